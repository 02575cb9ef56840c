use crate::channel::{FLAT_LEN, MPC_FEATURES, NUM_MPCS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    /// Model width `d_x`.
    pub model_dim: usize,
    pub key_dim: usize,
    pub value_dim: usize,
    /// Sequence length `L`, one position per multipath component.
    pub seq_len: usize,
    /// Parameters per position `d_m`.
    pub mpc_dim: usize,
    pub ffn_dim: usize,
    pub leaky_slope: f64,
    pub norm_eps: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            num_layers: 6,
            num_heads: 4,
            model_dim: 128,
            key_dim: 32,
            value_dim: 32,
            seq_len: NUM_MPCS,
            mpc_dim: MPC_FEATURES,
            ffn_dim: 128,
            leaky_slope: 0.2,
            norm_eps: 1e-5,
        }
    }
}

impl EncoderConfig {
    /// Width of the sequence once flattened, `L * d_x`.
    pub fn flat_dim(&self) -> usize {
        self.seq_len * self.model_dim
    }

    /// Width of the embedding output, `L * d_m`.
    pub fn embed_dim(&self) -> usize {
        self.seq_len * self.mpc_dim
    }
}

/// Final nonlinearity of the generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    /// Identity clamped to `[0, 1]`, as `relu(x) - relu(x - 1)`.
    LinearClamped,
}

impl OutputActivation {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sigmoid => "sigmoid",
            Self::LinearClamped => "linear_clamped",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(Self::Sigmoid),
            "linear_clamped" => Ok(Self::LinearClamped),
            _ => Err(Error::Config(format!(
                "unknown output activation {s:?} (expected sigmoid or linear_clamped)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub noise_dim: usize,
    pub generator_hidden: usize,
    pub generator_output: OutputActivation,
    /// Whether the critic ends in a sigmoid.
    pub critic_sigmoid: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            noise_dim: 32,
            generator_hidden: 240,
            generator_output: OutputActivation::Sigmoid,
            critic_sigmoid: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let e = &self.encoder;
        let dims = [
            ("num_layers", e.num_layers),
            ("num_heads", e.num_heads),
            ("model_dim", e.model_dim),
            ("key_dim", e.key_dim),
            ("value_dim", e.value_dim),
            ("ffn_dim", e.ffn_dim),
            ("noise_dim", self.noise_dim),
            ("generator_hidden", self.generator_hidden),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("model.{name} must be positive")));
            }
        }
        if e.seq_len != NUM_MPCS || e.mpc_dim != MPC_FEATURES {
            return Err(Error::Config(format!(
                "sequence must be {NUM_MPCS} x {MPC_FEATURES}, got {} x {}",
                e.seq_len, e.mpc_dim
            )));
        }
        if !(e.leaky_slope.is_finite() && e.norm_eps > 0.0 && e.norm_eps.is_finite()) {
            return Err(Error::Config("leaky_slope must be finite and norm_eps positive".into()));
        }
        Ok(())
    }

    /// Width of the sample vector both networks exchange.
    pub fn sample_dim(&self) -> usize {
        FLAT_LEN
    }
}
