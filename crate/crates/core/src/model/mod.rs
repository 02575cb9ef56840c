//! Transformer-encoder generator and critic.

pub mod checkpoint;
mod config;
pub mod encoder;
mod network;
mod params;

pub use config::{EncoderConfig, ModelConfig, OutputActivation};
pub use encoder::{attention, attention_weights, encoder_layer, encoder_stack, multi_head};
pub use network::{critic_forward, generator_forward, Model};
pub use params::{
    init_network, network_shapes, Dense, EncoderLayerParams, HeadParams, NetworkKind,
    NetworkParams, Norm, POSITIONAL_INIT_STD,
};
