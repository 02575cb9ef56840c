//! Helpers shared by the integration suites: seeded random inputs, naive
//! reference implementations of the metrics, and a finite-difference
//! gradient checker.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tgan_core::channel::{ChannelSample, Mpc};
use tgan_core::dataset::{generate_sample, GeneratorConfig};
use tgan_core::metrics::GridConfig;
use tgan_core::model::{EncoderConfig, ModelConfig};
use tgan_core::numerics::{Graph, Tensor, Var};
use tgan_core::rng;

pub fn uniform(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

/// Tensor with entries uniform on `[lo, hi)`.
pub fn random_tensor(r: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<f64> {
    let n = shape.iter().product();
    let v: Vec<f64> = (0..n).map(|_| uniform(r, lo, hi)).collect();
    Tensor::new(shape, v).unwrap()
}

/// Channel drawn from a ground-truth generator with randomized dispersion,
/// so delays and angles cover the grid and sometimes fall off its edges.
pub fn random_sample(r: &mut ChaCha8Rng) -> ChannelSample {
    let cfg = GeneratorConfig {
        distance_range: (1.0, 60.0),
        delay_decay: uniform(r, 2e-9, 150e-9),
        angle_scale: uniform(r, 3.0, 120.0),
        shadowing_db: uniform(r, 0.0, 8.0),
        ..GeneratorConfig::default()
    };
    let d = uniform(r, 1.0, 60.0);
    generate_sample(&cfg, d, r).unwrap()
}

pub fn random_samples(seed: u64, n: usize) -> Vec<ChannelSample> {
    let mut r = rng::stream(seed, 77);
    (0..n).map(|_| random_sample(&mut r)).collect()
}

/// Relative closeness with an absolute escape for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------------------
// metric oracles

/// RMS spread through the pairwise identity
/// `σ² = Σᵢ Σⱼ pᵢ pⱼ (xᵢ - xⱼ)² / (2 P²)`.
pub fn oracle_spread(points: &[(f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(_, p) in points {
        total += p;
    }
    let mut acc = 0.0;
    for &(xi, pi) in points {
        for &(xj, pj) in points {
            acc += pi * pj * (xi - xj) * (xi - xj);
        }
    }
    (acc / (2.0 * total * total)).sqrt()
}

pub fn oracle_delay_spread(mpcs: &[Mpc]) -> f64 {
    let pts: Vec<(f64, f64)> = mpcs.iter().map(|m| (m.delay, m.gain * m.gain)).collect();
    oracle_spread(&pts)
}

pub fn oracle_angular_spread(mpcs: &[Mpc]) -> f64 {
    let pts: Vec<(f64, f64)> = mpcs.iter().map(|m| (m.aoa, m.gain * m.gain)).collect();
    oracle_spread(&pts)
}

/// Bin of `v` found by walking the left edges, clamped to the end bins.
fn scan_bin(v: f64, start: f64, width: f64, count: usize) -> usize {
    let mut bin = 0;
    for i in 0..count {
        if start + i as f64 * width <= v {
            bin = i;
        }
    }
    bin
}

/// Average profile in dB, row-major (delay rows, angle columns).
pub fn oracle_average_pdap(samples: &[&[Mpc]], cfg: &GridConfig) -> Vec<f64> {
    let mut grid = vec![vec![0.0; cfg.angle_bins]; cfg.delay_bins];
    for mpcs in samples {
        for m in *mpcs {
            let i = scan_bin(m.delay, cfg.delay_start, cfg.delay_bin, cfg.delay_bins);
            let j = scan_bin(m.aoa, cfg.angle_start, cfg.angle_bin, cfg.angle_bins);
            grid[i][j] += m.gain * m.gain;
        }
    }
    let mut out = Vec::new();
    for row in grid {
        for p in row {
            let mean = p / samples.len() as f64;
            out.push(if mean > 0.0 {
                f64::max(10.0 * mean.log10(), cfg.floor_db)
            } else {
                cfg.floor_db
            });
        }
    }
    out
}

pub fn oracle_rmse(a: &[f64], b: &[f64], rows: usize, cols: usize) -> f64 {
    let mut acc = 0.0;
    for i in 0..rows {
        for j in 0..cols {
            let d = a[i * cols + j] - b[i * cols + j];
            acc += d * d;
        }
    }
    (acc / (rows * cols) as f64).sqrt()
}

/// Windowed SSIM over every 8x8 window with moments from raw sums.
pub fn oracle_ssim(a: &[f64], b: &[f64], rows: usize, cols: usize, floor: f64) -> f64 {
    let pa: Vec<f64> = a.iter().map(|v| v - floor).collect();
    let pb: Vec<f64> = b.iter().map(|v| v - floor).collect();
    let mut peak: f64 = 0.0;
    for v in pa.iter().chain(&pb) {
        peak = peak.max(*v);
    }
    let range = if peak > 0.0 { peak } else { 1.0 };
    let c1 = (0.01 * range).powi(2);
    let c2 = (0.03 * range).powi(2);
    let (wr, wc) = if rows >= 8 && cols >= 8 { (8, 8) } else { (rows, cols) };
    let n = (wr * wc) as f64;
    let mut sum = 0.0;
    let mut count = 0.0;
    for r0 in 0..=rows - wr {
        for c0 in 0..=cols - wc {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + wr {
                for c in c0..c0 + wc {
                    let (x, y) = (pa[r * cols + c], pb[r * cols + c]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = saa / n - ma * ma;
            let vb = sbb / n - mb * mb;
            let cov = sab / n - ma * mb;
            sum += (2.0 * ma * mb + c1) * (2.0 * cov + c2)
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1.0;
        }
    }
    sum / count
}

/// `(value, probability)` rows from rank counting, ties ordered by input
/// position.
pub fn oracle_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let n = values.len();
    let mut rows = vec![(0.0, 0.0); n];
    for (i, &v) in values.iter().enumerate() {
        let mut rank = 1;
        for (j, &w) in values.iter().enumerate() {
            if w < v || (w == v && j < i) {
                rank += 1;
            }
        }
        rows[rank - 1] = (v, rank as f64 / n as f64);
    }
    rows
}

// ---------------------------------------------------------------------------
// finite differences

pub const FD_STEP: f64 = 1e-4;

/// Scalar function of graph variables, usable on any graph.
pub type GraphFn = dyn for<'g> Fn(&'g Graph<f64>, &[Var<'g, f64>]) -> tgan_core::Result<Var<'g, f64>>;

fn evaluate(f: &GraphFn, inputs: &[Tensor<f64>]) -> f64 {
    let g = Graph::new();
    let vars: Vec<Var<'_, f64>> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    f(&g, &vars).unwrap().value().item().unwrap()
}

/// `‖a - n‖ / max(‖a‖, ‖n‖)` between reverse-mode and central-difference
/// gradients of `f` with respect to all of `inputs`.
pub fn gradient_check(f: &GraphFn, inputs: &[Tensor<f64>]) -> f64 {
    let g = Graph::new();
    let vars: Vec<Var<'_, f64>> = inputs.iter().map(|t| g.leaf(t.clone())).collect();
    let out = f(&g, &vars).unwrap();
    let grads = g.backward(&out).unwrap();
    let mut analytic = Vec::new();
    for v in &vars {
        analytic.extend(grads.get(v).to_vec());
    }
    let mut numeric = Vec::new();
    for k in 0..inputs.len() {
        for e in 0..inputs[k].len() {
            let mut shifted = inputs.to_vec();
            let bump = |delta: f64, shifted: &mut Vec<Tensor<f64>>| {
                let mut data = inputs[k].to_vec();
                data[e] += delta;
                shifted[k] = Tensor::new(inputs[k].shape(), data).unwrap();
            };
            bump(FD_STEP, &mut shifted);
            let plus = evaluate(f, &shifted);
            bump(-FD_STEP, &mut shifted);
            let minus = evaluate(f, &shifted);
            numeric.push((plus - minus) / (2.0 * FD_STEP));
        }
    }
    relative_error(&analytic, &numeric)
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

// ---------------------------------------------------------------------------
// small networks

/// A narrow two-layer configuration that keeps whole-network checks cheap.
pub fn tiny_model() -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            num_layers: 2,
            num_heads: 2,
            model_dim: 8,
            key_dim: 4,
            value_dim: 3,
            ffn_dim: 8,
            ..EncoderConfig::default()
        },
        noise_dim: 6,
        generator_hidden: 10,
        ..ModelConfig::default()
    }
}
