//! Generator and critic forward passes.
//!
//! Both networks share one topology: the input row (noise or sample, with
//! the condition appended) is embedded to `L·d_m` with a LeakyReLU,
//! reshaped to `L x d_m`, lifted per position to `L x d_x`, offset by the
//! learned positional matrix, run through the encoder stack, flattened,
//! and passed through a dense head with LeakyReLU between its layers.

use rand::Rng;

use super::config::{ModelConfig, OutputActivation};
use super::encoder::{dense, encoder_stack};
use super::params::{init_network, Dense, NetworkKind, NetworkParams};
use crate::error::{shape_err, Result};
use crate::numerics::{Graph, Tensor, Var};
use crate::scalar::Scalar;

fn encode<'g, T: Scalar>(
    config: &ModelConfig,
    p: &NetworkParams<Var<'g, T>>,
    input: &Var<'g, T>,
) -> Result<Var<'g, T>> {
    let e = &config.encoder;
    let slope = T::of(e.leaky_slope);
    let b = input.shape()[0];
    let embedded = dense(input, &p.embed)?.leaky_relu(slope)?;
    let rows = embedded.reshape(&[b * e.seq_len, e.mpc_dim])?;
    let seq = dense(&rows, &p.project)?
        .reshape(&[b, e.seq_len, e.model_dim])?
        .add(&p.positional)?;
    encoder_stack(&seq, &p.layers, e)?.reshape(&[b, e.flat_dim()])
}

fn head<'g, T: Scalar>(x: &Var<'g, T>, layers: &[Dense<Var<'g, T>>], slope: T) -> Result<Var<'g, T>> {
    let mut h = x.clone();
    for (i, d) in layers.iter().enumerate() {
        if i > 0 {
            h = h.leaky_relu(slope)?;
        }
        h = dense(&h, d)?;
    }
    Ok(h)
}

fn check_batch<T: Scalar>(
    op: &'static str,
    x: &Var<'_, T>,
    width: usize,
    c: &Var<'_, T>,
) -> Result<()> {
    match (x.shape(), c.shape()) {
        ([b, w], [bc, 1]) if *w == width && b == bc => Ok(()),
        _ => shape_err(op, x.shape(), c.shape()),
    }
}

/// `G(z | c)`: `B x noise_dim` noise and `B x 1` conditions to `B x 60`
/// normalized samples.
pub fn generator_forward<'g, T: Scalar>(
    config: &ModelConfig,
    p: &NetworkParams<Var<'g, T>>,
    z: &Var<'g, T>,
    c: &Var<'g, T>,
) -> Result<Var<'g, T>> {
    check_batch("generator_forward", z, config.noise_dim, c)?;
    let input = Var::concat(&[z.clone(), c.clone()], 1)?;
    let raw = head(&encode(config, p, &input)?, &p.head, T::of(config.encoder.leaky_slope))?;
    match config.generator_output {
        OutputActivation::Sigmoid => raw.sigmoid(),
        OutputActivation::LinearClamped => raw.relu()?.sub(&raw.shift(-T::one())?.relu()?),
    }
}

/// `D(x | c)`: `B x 60` samples and `B x 1` conditions to `B x 1` scores.
pub fn critic_forward<'g, T: Scalar>(
    config: &ModelConfig,
    p: &NetworkParams<Var<'g, T>>,
    x: &Var<'g, T>,
    c: &Var<'g, T>,
) -> Result<Var<'g, T>> {
    check_batch("critic_forward", x, config.sample_dim(), c)?;
    let input = Var::concat(&[x.clone(), c.clone()], 1)?;
    let raw = head(&encode(config, p, &input)?, &p.head, T::of(config.encoder.leaky_slope))?;
    if config.critic_sigmoid {
        raw.sigmoid()
    } else {
        Ok(raw)
    }
}

/// Both networks with their configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub generator: NetworkParams<Tensor<T>>,
    pub critic: NetworkParams<Tensor<T>>,
}

impl<T: Scalar> Model<T> {
    /// Fresh parameters; the generator draws from `rng` first.
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        Ok(Self {
            config: config.clone(),
            generator: init_network(config, NetworkKind::Generator, rng)?,
            critic: init_network(config, NetworkKind::Critic, rng)?,
        })
    }

    /// Generator output for a batch, without recording gradients.
    pub fn generate(&self, z: &Tensor<T>, c: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Graph::new();
        let p = self.generator.freeze(&g);
        let out = generator_forward(&self.config, &p, &g.constant(z.clone()), &g.constant(c.clone()))?;
        Ok(out.value().clone())
    }

    /// Critic scores for a batch, without recording gradients.
    pub fn score(&self, x: &Tensor<T>, c: &Tensor<T>) -> Result<Tensor<T>> {
        let g = Graph::new();
        let p = self.critic.freeze(&g);
        let out = critic_forward(&self.config, &p, &g.constant(x.clone()), &g.constant(c.clone()))?;
        Ok(out.value().clone())
    }
}
