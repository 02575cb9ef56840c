//! Parameter containers, generic over what is stored per array: shapes,
//! tensors, or graph variables.

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Graph, Tensor, Var};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<P> {
    /// `in x out`.
    pub weight: P,
    pub bias: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Norm<P> {
    pub gain: P,
    pub bias: P,
}

/// Projections of one attention head.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadParams<P> {
    pub query: P,
    pub key: P,
    pub value: P,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderLayerParams<P> {
    pub heads: Vec<HeadParams<P>>,
    /// `W^o`, `h·d_v x d_x`, no bias.
    pub output: P,
    pub ffn_in: Dense<P>,
    pub ffn_out: Dense<P>,
    pub norm1: Norm<P>,
    pub norm2: Norm<P>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NetworkKind {
    Generator,
    Critic,
}

impl NetworkKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Generator => "generator",
            Self::Critic => "critic",
        }
    }
}

/// All learnable arrays of one network.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams<P> {
    /// Input embedding to `L·d_m`.
    pub embed: Dense<P>,
    /// Per-position lift `d_m -> d_x`.
    pub project: Dense<P>,
    /// Learned positional matrix, `L x d_x`.
    pub positional: P,
    pub layers: Vec<EncoderLayerParams<P>>,
    /// Output dense stack applied to the flattened sequence.
    pub head: Vec<Dense<P>>,
}

impl<P> Dense<P> {
    fn try_map<'a, Q, E>(
        &'a self,
        prefix: &str,
        f: &mut impl FnMut(&str, &'a P) -> Result<Q, E>,
    ) -> Result<Dense<Q>, E> {
        Ok(Dense {
            weight: f(&format!("{prefix}.weight"), &self.weight)?,
            bias: f(&format!("{prefix}.bias"), &self.bias)?,
        })
    }
}

impl<P> Norm<P> {
    fn try_map<'a, Q, E>(
        &'a self,
        prefix: &str,
        f: &mut impl FnMut(&str, &'a P) -> Result<Q, E>,
    ) -> Result<Norm<Q>, E> {
        Ok(Norm {
            gain: f(&format!("{prefix}.gain"), &self.gain)?,
            bias: f(&format!("{prefix}.bias"), &self.bias)?,
        })
    }
}

impl<P> EncoderLayerParams<P> {
    fn try_map<'a, Q, E>(
        &'a self,
        prefix: &str,
        f: &mut impl FnMut(&str, &'a P) -> Result<Q, E>,
    ) -> Result<EncoderLayerParams<Q>, E> {
        let mut heads = Vec::with_capacity(self.heads.len());
        for (i, h) in self.heads.iter().enumerate() {
            heads.push(HeadParams {
                query: f(&format!("{prefix}.heads.{i}.query"), &h.query)?,
                key: f(&format!("{prefix}.heads.{i}.key"), &h.key)?,
                value: f(&format!("{prefix}.heads.{i}.value"), &h.value)?,
            });
        }
        Ok(EncoderLayerParams {
            heads,
            output: f(&format!("{prefix}.output"), &self.output)?,
            ffn_in: self.ffn_in.try_map(&format!("{prefix}.ffn_in"), f)?,
            ffn_out: self.ffn_out.try_map(&format!("{prefix}.ffn_out"), f)?,
            norm1: self.norm1.try_map(&format!("{prefix}.norm1"), f)?,
            norm2: self.norm2.try_map(&format!("{prefix}.norm2"), f)?,
        })
    }
}

impl<P> NetworkParams<P> {
    /// Rebuilds the container with `f` applied to every array, visited in a
    /// fixed order together with its dotted name.
    pub fn try_map<'a, Q, E>(
        &'a self,
        f: &mut impl FnMut(&str, &'a P) -> Result<Q, E>,
    ) -> Result<NetworkParams<Q>, E> {
        let embed = self.embed.try_map("embed", f)?;
        let project = self.project.try_map("project", f)?;
        let positional = f("positional", &self.positional)?;
        let mut layers = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            layers.push(l.try_map(&format!("layers.{i}"), f)?);
        }
        let mut head = Vec::with_capacity(self.head.len());
        for (i, d) in self.head.iter().enumerate() {
            head.push(d.try_map(&format!("head.{i}"), f)?);
        }
        Ok(NetworkParams {
            embed,
            project,
            positional,
            layers,
            head,
        })
    }

    pub fn map<Q>(&self, mut f: impl FnMut(&P) -> Q) -> NetworkParams<Q> {
        let r: Result<_, std::convert::Infallible> = self.try_map(&mut |_, p| Ok(f(p)));
        match r {
            Ok(v) => v,
            Err(e) => match e {},
        }
    }

    /// Arrays in traversal order with their names.
    pub fn named(&self) -> Vec<(String, &P)> {
        let mut out = Vec::new();
        let r: Result<_, std::convert::Infallible> = self.try_map(&mut |n, p| {
            out.push((n.to_string(), p));
            Ok(())
        });
        if let Err(e) = r {
            match e {}
        }
        out
    }

    pub fn values(&self) -> Vec<&P> {
        self.named().into_iter().map(|(_, p)| p).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.named().into_iter().map(|(n, _)| n).collect()
    }

    /// Same structure as `self`, filled from `values` in traversal order.
    pub fn with_values<Q>(&self, values: Vec<Q>) -> Result<NetworkParams<Q>> {
        let expected = self.values().len();
        if values.len() != expected {
            return Err(Error::Contract(format!(
                "expected {expected} arrays, got {}",
                values.len()
            )));
        }
        let mut it = values.into_iter();
        Ok(self.map(|_| it.next().expect("length checked")))
    }
}

impl<T: Scalar> NetworkParams<Tensor<T>> {
    pub fn parameter_count(&self) -> usize {
        self.values().iter().map(|t| t.len()).sum()
    }

    /// Registers every array as a differentiable leaf of `graph`.
    pub fn bind<'g>(&self, graph: &'g Graph<T>) -> NetworkParams<Var<'g, T>> {
        self.map(|t| graph.leaf(t.clone()))
    }

    /// Places every array on `graph` as a constant: no gradients, no tape.
    pub fn freeze<'g>(&self, graph: &'g Graph<T>) -> NetworkParams<Var<'g, T>> {
        self.map(|t| graph.constant(t.clone()))
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|t| t.is_finite())
    }
}

fn dense_shape(input: usize, output: usize) -> Dense<Vec<usize>> {
    Dense {
        weight: vec![input, output],
        bias: vec![output],
    }
}

/// Array shapes of one network.
pub fn network_shapes(config: &ModelConfig, kind: NetworkKind) -> NetworkParams<Vec<usize>> {
    let e = &config.encoder;
    let input = match kind {
        NetworkKind::Generator => config.noise_dim + 1,
        NetworkKind::Critic => config.sample_dim() + 1,
    };
    let layer = EncoderLayerParams {
        heads: (0..e.num_heads)
            .map(|_| HeadParams {
                query: vec![e.model_dim, e.key_dim],
                key: vec![e.model_dim, e.key_dim],
                value: vec![e.model_dim, e.value_dim],
            })
            .collect(),
        output: vec![e.num_heads * e.value_dim, e.model_dim],
        ffn_in: dense_shape(e.model_dim, e.ffn_dim),
        ffn_out: dense_shape(e.ffn_dim, e.model_dim),
        norm1: Norm {
            gain: vec![e.model_dim],
            bias: vec![e.model_dim],
        },
        norm2: Norm {
            gain: vec![e.model_dim],
            bias: vec![e.model_dim],
        },
    };
    let head = match kind {
        NetworkKind::Generator => vec![
            dense_shape(e.flat_dim(), config.generator_hidden),
            dense_shape(config.generator_hidden, config.sample_dim()),
        ],
        NetworkKind::Critic => vec![dense_shape(e.flat_dim(), 1), dense_shape(1, 1)],
    };
    NetworkParams {
        embed: dense_shape(input, e.embed_dim()),
        project: dense_shape(e.mpc_dim, e.model_dim),
        positional: vec![e.seq_len, e.model_dim],
        layers: vec![layer; e.num_layers],
        head,
    }
}

/// Standard deviation of the positional matrix at initialization.
pub const POSITIONAL_INIT_STD: f64 = 0.02;

/// Dense weights and biases uniform on `±sqrt(1 / fan_in)`, positional
/// matrix normal with std 0.02, norm gains 1 and biases 0.
pub fn init_network<T: Scalar, R: Rng + ?Sized>(
    config: &ModelConfig,
    kind: NetworkKind,
    rng: &mut R,
) -> Result<NetworkParams<Tensor<T>>> {
    config.validate()?;
    let shapes = network_shapes(config, kind);
    let pe = Normal::new(0.0, POSITIONAL_INIT_STD).expect("valid std");
    let mut fan_in = 0usize;
    shapes.try_map(&mut |name, shape| {
        let n: usize = shape.iter().product();
        let data: Vec<f64> = if name == "positional" {
            (0..n).map(|_| pe.sample(rng)).collect()
        } else if name.contains(".norm") {
            let v = if name.ends_with(".gain") { 1.0 } else { 0.0 };
            vec![v; n]
        } else {
            // a bias follows its weight and shares the weight's fan-in
            if shape.len() == 2 {
                fan_in = shape[0];
            }
            let bound = (1.0 / fan_in as f64).sqrt();
            let u = Uniform::new_inclusive(-bound, bound)
                .map_err(|e| Error::Config(format!("init range: {e}")))?;
            (0..n).map(|_| u.sample(rng)).collect()
        };
        Tensor::from_f64(shape, &data)
    })
}
