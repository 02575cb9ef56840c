//! Binary checkpoints.
//!
//! Everything is little-endian. `str` is a `u32` byte length followed by
//! UTF-8 bytes; `array` is a `u32` rank, `rank` `u64` extents, then the
//! row-major values as `f64` (f32 models widen losslessly).
//!
//! ```text
//! magic            8 bytes  "TGANCKPT"
//! version          u32      1
//! encoder          u64 x 8  num_layers num_heads model_dim key_dim value_dim
//!                           seq_len mpc_dim ffn_dim
//!                  f64 x 2  leaky_slope norm_eps
//! model            u64 x 2  noise_dim generator_hidden
//!                  u8       generator output (0 sigmoid, 1 linear_clamped)
//!                  u8       critic sigmoid (0 or 1)
//! scaler           f64 x 10 (min, max) for gain_db phase delay aoa distance
//! progress         u64 x 3  epoch iteration seed
//! streams          u32 count, then per stream:
//!                  32 bytes key, u64 stream id, u128 word position
//! generator        u32 count, then per array: str name, array
//! critic           same as generator
//! optimizers       generator then critic, each:
//!                  u8 kind (0 sgd, 1 adam), f64 x 4 lr beta1 beta2 epsilon,
//!                  u64 step, u32 moment count, that many `m` arrays, then
//!                  that many `v` arrays
//! ```

use std::path::Path;

use super::config::{EncoderConfig, ModelConfig, OutputActivation};
use super::network::Model;
use super::params::{network_shapes, NetworkKind, NetworkParams};
use crate::channel::{Feature, Range, Scaler};
use crate::error::{Error, Result};
use crate::numerics::{OptimizerKind, OptimizerState, Tensor};
use crate::rng::StreamState;
use crate::scalar::Scalar;

pub const MAGIC: &[u8; 8] = b"TGANCKPT";
pub const VERSION: u32 = 1;

/// A resumable snapshot of a training run.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub model: Model<T>,
    pub scaler: Scaler,
    /// Completed epochs.
    pub epoch: u64,
    /// Completed critic updates.
    pub iteration: u64,
    pub seed: u64,
    pub streams: Vec<StreamState>,
    pub generator_opt: OptimizerState<T>,
    pub critic_opt: OptimizerState<T>,
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn len32(&mut self, n: usize) {
        self.u32(u32::try_from(n).expect("length fits in u32"));
    }
    fn str(&mut self, s: &str) {
        self.len32(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn array<T: Scalar>(&mut self, t: &Tensor<T>) {
        self.len32(t.rank());
        for &d in t.shape() {
            self.usize(d);
        }
        for &v in t.data() {
            self.f64(v.as_f64());
        }
    }
    fn network<T: Scalar>(&mut self, p: &NetworkParams<Tensor<T>>) {
        let named = p.named();
        self.len32(named.len());
        for (name, t) in named {
            self.str(&name);
            self.array(t);
        }
    }
    fn optimizer<T: Scalar>(&mut self, o: &OptimizerState<T>) {
        self.u8(match o.kind {
            OptimizerKind::Sgd => 0,
            OptimizerKind::Adam => 1,
        });
        for v in [o.learning_rate, o.beta1, o.beta2, o.epsilon] {
            self.f64(v);
        }
        self.u64(o.step);
        self.len32(o.m.len());
        for t in o.m.iter().chain(&o.v) {
            self.array(t);
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn corrupt(what: impl Into<String>) -> Error {
    Error::Checkpoint(what.into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.bytes()?))
    }
    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| corrupt("extent overflows usize"))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| corrupt("name is not UTF-8"))
    }
    fn array<T: Scalar>(&mut self) -> Result<Tensor<T>> {
        let rank = self.u32()? as usize;
        if rank > 8 {
            return Err(corrupt(format!("implausible rank {rank}")));
        }
        let shape = (0..rank).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
        let n = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= self.buf.len() - self.pos))
            .ok_or_else(|| corrupt(format!("array {shape:?} exceeds the file")))?;
        let data = (0..n)
            .map(|_| self.f64().map(T::of))
            .collect::<Result<Vec<_>>>()?;
        Tensor::new(&shape, data).map_err(|e| corrupt(e.to_string()))
    }
    fn network<T: Scalar>(&mut self, expected: &NetworkParams<Vec<usize>>) -> Result<NetworkParams<Tensor<T>>> {
        let count = self.u32()? as usize;
        let names = expected.named();
        if count != names.len() {
            return Err(corrupt(format!("expected {} arrays, found {count}", names.len())));
        }
        let mut values = Vec::with_capacity(count);
        for (name, shape) in names {
            let found = self.str()?;
            if found != name {
                return Err(corrupt(format!("expected array {name}, found {found}")));
            }
            let t: Tensor<T> = self.array()?;
            if t.shape() != shape.as_slice() {
                return Err(corrupt(format!("{name}: shape {:?}, expected {shape:?}", t.shape())));
            }
            values.push(t);
        }
        expected.with_values(values)
    }
    fn optimizer<T: Scalar>(&mut self) -> Result<OptimizerState<T>> {
        let kind = match self.u8()? {
            0 => OptimizerKind::Sgd,
            1 => OptimizerKind::Adam,
            k => return Err(corrupt(format!("unknown optimizer kind {k}"))),
        };
        let mut o = OptimizerState::new(kind, self.f64()?);
        o.beta1 = self.f64()?;
        o.beta2 = self.f64()?;
        o.epsilon = self.f64()?;
        o.step = self.u64()?;
        let n = self.u32()? as usize;
        o.m = (0..n).map(|_| self.array()).collect::<Result<_>>()?;
        o.v = (0..n).map(|_| self.array()).collect::<Result<_>>()?;
        Ok(o)
    }
}

impl<T: Scalar> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.0.extend_from_slice(MAGIC);
        w.u32(VERSION);
        let c = &self.model.config;
        let e = &c.encoder;
        for v in [
            e.num_layers,
            e.num_heads,
            e.model_dim,
            e.key_dim,
            e.value_dim,
            e.seq_len,
            e.mpc_dim,
            e.ffn_dim,
        ] {
            w.usize(v);
        }
        w.f64(e.leaky_slope);
        w.f64(e.norm_eps);
        w.usize(c.noise_dim);
        w.usize(c.generator_hidden);
        w.u8(match c.generator_output {
            OutputActivation::Sigmoid => 0,
            OutputActivation::LinearClamped => 1,
        });
        w.u8(u8::from(c.critic_sigmoid));
        for f in Feature::ALL {
            let r = self.scaler.get(f);
            w.f64(r.min);
            w.f64(r.max);
        }
        w.u64(self.epoch);
        w.u64(self.iteration);
        w.u64(self.seed);
        w.len32(self.streams.len());
        for s in &self.streams {
            w.0.extend_from_slice(&s.seed);
            w.u64(s.stream);
            w.0.extend_from_slice(&s.word_pos.to_le_bytes());
        }
        w.network(&self.model.generator);
        w.network(&self.model.critic);
        w.optimizer(&self.generator_opt);
        w.optimizer(&self.critic_opt);
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8).ok() != Some(MAGIC.as_slice()) {
            return Err(corrupt("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(corrupt(format!("unsupported version {version}")));
        }
        let mut dims = [0usize; 8];
        for d in &mut dims {
            *d = r.usize()?;
        }
        let encoder = EncoderConfig {
            num_layers: dims[0],
            num_heads: dims[1],
            model_dim: dims[2],
            key_dim: dims[3],
            value_dim: dims[4],
            seq_len: dims[5],
            mpc_dim: dims[6],
            ffn_dim: dims[7],
            leaky_slope: r.f64()?,
            norm_eps: r.f64()?,
        };
        let noise_dim = r.usize()?;
        let generator_hidden = r.usize()?;
        let generator_output = match r.u8()? {
            0 => OutputActivation::Sigmoid,
            1 => OutputActivation::LinearClamped,
            k => return Err(corrupt(format!("unknown output activation {k}"))),
        };
        let critic_sigmoid = match r.u8()? {
            0 => false,
            1 => true,
            k => return Err(corrupt(format!("bad critic sigmoid flag {k}"))),
        };
        let config = ModelConfig {
            encoder,
            noise_dim,
            generator_hidden,
            generator_output,
            critic_sigmoid,
        };
        config.validate().map_err(|e| corrupt(e.to_string()))?;
        let mut ranges = [Range { min: 0.0, max: 1.0 }; 5];
        for range in &mut ranges {
            range.min = r.f64()?;
            range.max = r.f64()?;
        }
        let scaler = Scaler::from_ranges(ranges).map_err(|e| corrupt(e.to_string()))?;
        let epoch = r.u64()?;
        let iteration = r.u64()?;
        let seed = r.u64()?;
        let n_streams = r.u32()? as usize;
        if n_streams > 64 {
            return Err(corrupt(format!("implausible stream count {n_streams}")));
        }
        let mut streams = Vec::with_capacity(n_streams);
        for _ in 0..n_streams {
            streams.push(StreamState {
                seed: r.bytes()?,
                stream: r.u64()?,
                word_pos: r.u128()?,
            });
        }
        let generator = r.network(&network_shapes(&config, NetworkKind::Generator))?;
        let critic = r.network(&network_shapes(&config, NetworkKind::Critic))?;
        let generator_opt = r.optimizer()?;
        let critic_opt = r.optimizer()?;
        if r.pos != buf.len() {
            return Err(corrupt(format!("{} trailing bytes", buf.len() - r.pos)));
        }
        Ok(Self {
            model: Model {
                config,
                generator,
                critic,
            },
            scaler,
            epoch,
            iteration,
            seed,
            streams,
            generator_opt,
            critic_opt,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, TrainStreams};

    fn sample_checkpoint() -> Checkpoint<f64> {
        let mut cfg = ModelConfig::default();
        cfg.encoder.num_layers = 1;
        let model = Model::init(&cfg, &mut rng::stream(5, 1)).unwrap();
        let scaler = Scaler::from_ranges([
            Range { min: -150.0, max: -60.0 },
            Range { min: 0.0, max: 6.0 },
            Range { min: 3e-9, max: 4e-7 },
            Range { min: -180.0, max: 179.9 },
            Range { min: 1.0, max: 30.0 },
        ])
        .unwrap();
        let mut critic_opt = OptimizerState::adam(1e-4);
        let grads: Vec<Tensor<f64>> = model.critic.values().iter().map(|t| t.map(|v| v * 0.5)).collect();
        let mut params: Vec<Tensor<f64>> = model.critic.values().into_iter().cloned().collect();
        critic_opt.step(&mut params, &grads).unwrap();
        Checkpoint {
            scaler,
            epoch: 3,
            iteration: 77,
            seed: 42,
            streams: TrainStreams::new(42).capture().to_vec(),
            generator_opt: OptimizerState::sgd(1e-4),
            critic_opt,
            model,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample_checkpoint();
        let bytes = ck.to_bytes();
        let back = Checkpoint::<f64>::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_damage() {
        let bytes = sample_checkpoint().to_bytes();
        assert!(Checkpoint::<f64>::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::<f64>::from_bytes(&bad).is_err());
        let mut extra = bytes;
        extra.push(0);
        assert!(Checkpoint::<f64>::from_bytes(&extra).is_err());
    }
}
