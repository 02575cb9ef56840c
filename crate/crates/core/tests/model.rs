//! Encoder blocks against plain-loop re-evaluations, structural invariants
//! of the stack, and checkpoint persistence of whole models.

#![allow(clippy::needless_range_loop)]

mod common;

use common::{random_tensor, tiny_model};
use tgan_core::channel::{Range, Scaler};
use tgan_core::model::checkpoint::Checkpoint;
use tgan_core::model::{
    encoder_layer, encoder_stack, multi_head, Dense, EncoderConfig, EncoderLayerParams, HeadParams, Model,
    ModelConfig, Norm,
};
use tgan_core::numerics::{Graph, OptimizerState, Tensor, Var};
use tgan_core::rng::{self, TrainStreams};

type Mat = Vec<Vec<f64>>;

fn mat(t: &Tensor<f64>) -> Mat {
    let (r, c) = (t.shape()[0], t.shape()[1]);
    (0..r).map(|i| t.data()[i * c..(i + 1) * c].to_vec()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for k in 0..b.len() {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

fn add_row(a: &Mat, bias: &[f64]) -> Mat {
    a.iter().map(|r| r.iter().zip(bias).map(|(x, b)| x + b).collect()).collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect()).collect()
}

/// Attention written out entry by entry.
fn naive_attention(q: &Mat, k: &Mat, v: &Mat) -> Mat {
    let dk = q[0].len() as f64;
    let mut out = vec![vec![0.0; v[0].len()]; q.len()];
    for i in 0..q.len() {
        let mut logits = Vec::new();
        for j in 0..k.len() {
            let mut s = 0.0;
            for c in 0..q[0].len() {
                s += q[i][c] * k[j][c];
            }
            logits.push(s / dk.sqrt());
        }
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for j in 0..k.len() {
            for c in 0..v[0].len() {
                out[i][c] += weights[j] / total * v[j][c];
            }
        }
    }
    out
}

fn naive_multi_head(x: &Mat, p: &EncoderLayerParams<Tensor<f64>>) -> Mat {
    let mut cat: Mat = vec![Vec::new(); x.len()];
    for h in &p.heads {
        let head = naive_attention(
            &matmul(x, &mat(&h.query)),
            &matmul(x, &mat(&h.key)),
            &matmul(x, &mat(&h.value)),
        );
        for (row, part) in cat.iter_mut().zip(head) {
            row.extend(part);
        }
    }
    matmul(&cat, &mat(&p.output))
}

fn naive_norm(x: &Mat, gain: &[f64], bias: &[f64], eps: f64) -> Mat {
    x.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(j, v)| (v - mean) / (var + eps).sqrt() * gain[j] + bias[j])
                .collect()
        })
        .collect()
}

fn naive_layer(x: &Mat, p: &EncoderLayerParams<Tensor<f64>>, eps: f64) -> Mat {
    let y = naive_norm(&add(x, &naive_multi_head(x, p)), p.norm1.gain.data(), p.norm1.bias.data(), eps);
    let hidden: Mat = add_row(&matmul(&y, &mat(&p.ffn_in.weight)), p.ffn_in.bias.data())
        .into_iter()
        .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
        .collect();
    let ffn = add_row(&matmul(&hidden, &mat(&p.ffn_out.weight)), p.ffn_out.bias.data());
    naive_norm(&add(&y, &ffn), p.norm2.gain.data(), p.norm2.bias.data(), eps)
}

fn max_diff(a: &Mat, b: &[f64]) -> f64 {
    a.iter().flatten().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Critic encoder layers of a freshly initialized model, with layer-norm
/// gains and biases randomized so they take part in the comparison.
fn layers(config: &ModelConfig, seed: u64) -> Vec<EncoderLayerParams<Tensor<f64>>> {
    let mut m = Model::<f64>::init(config, &mut rng::stream(seed, 1)).unwrap();
    let mut r = rng::stream(seed, 2);
    for l in &mut m.critic.layers {
        for n in [&mut l.norm1, &mut l.norm2] {
            n.gain = random_tensor(&mut r, n.gain.shape(), 0.5, 1.5);
            n.bias = random_tensor(&mut r, n.bias.shape(), -0.3, 0.3);
        }
        for d in [&mut l.ffn_in, &mut l.ffn_out] {
            d.bias = random_tensor(&mut r, d.bias.shape(), -0.2, 0.2);
        }
    }
    m.critic.layers
}

fn with_heads(heads: usize, key: usize, value: usize) -> ModelConfig {
    ModelConfig {
        encoder: EncoderConfig {
            num_layers: 1,
            num_heads: heads,
            model_dim: 16,
            key_dim: key,
            value_dim: value,
            ffn_dim: 12,
            ..EncoderConfig::default()
        },
        ..ModelConfig::default()
    }
}

#[test]
fn multi_head_matches_entrywise_loops() {
    let shapes = [(1, 5, 3), (2, 4, 4), (4, 6, 2), (3, 1, 7)];
    for (seed, &(h, dk, dv)) in shapes.iter().enumerate() {
        let cfg = with_heads(h, dk, dv);
        let p = &layers(&cfg, seed as u64)[0];
        let mut r = rng::stream(seed as u64, 3);
        let x = random_tensor(&mut r, &[15, 16], -2.0, 2.0);
        let g = Graph::new();
        let bound = g.constant(x.clone());
        let vars = freeze_layer(&g, p);
        let out = multi_head(&bound, &vars).unwrap();
        assert_eq!(out.shape(), &[15, 16]);
        let err = max_diff(&naive_multi_head(&mat(&x), p), out.value().data());
        assert!(err <= 1e-10, "heads {h}: {err:e}");
    }
}

#[test]
fn batched_multi_head_equals_per_sequence() {
    let cfg = with_heads(4, 4, 4);
    let m = Model::<f64>::init(&cfg, &mut rng::stream(11, 1)).unwrap();
    let mut r = rng::stream(11, 2);
    let x = random_tensor(&mut r, &[3, 15, 16], -1.0, 1.0);
    let g = Graph::new();
    let p = m.critic.freeze(&g);
    let all = multi_head(&g.constant(x.clone()), &p.layers[0]).unwrap();
    for b in 0..3 {
        let one = Tensor::new(&[15, 16], x.data()[b * 240..(b + 1) * 240].to_vec()).unwrap();
        let single = multi_head(&g.constant(one), &p.layers[0]).unwrap();
        assert_eq!(single.value().data(), &all.value().data()[b * 240..(b + 1) * 240]);
    }
}

#[test]
fn six_layer_stack_matches_a_step_by_step_recomputation() {
    let cfg = ModelConfig::default();
    assert_eq!(cfg.encoder.num_layers, 6);
    let ls = layers(&cfg, 21);
    let mut r = rng::stream(21, 3);
    let x = random_tensor(&mut r, &[15, 128], -1.0, 1.0);

    let mut expected = mat(&x);
    for l in &ls {
        expected = naive_layer(&expected, l, cfg.encoder.norm_eps);
    }

    let g = Graph::new();
    let vars: Vec<_> = ls.iter().map(|l| freeze_layer(&g, l)).collect();
    let out = encoder_stack(&g.constant(x), &vars, &cfg.encoder).unwrap();
    let err = max_diff(&expected, out.value().data());
    assert!(err <= 1e-8, "{err:e}");
}

fn freeze_layer<'g>(
    g: &'g Graph<f64>,
    l: &EncoderLayerParams<Tensor<f64>>,
) -> EncoderLayerParams<Var<'g, f64>> {
    let c = |t: &Tensor<f64>| g.constant(t.clone());
    EncoderLayerParams {
        heads: l
            .heads
            .iter()
            .map(|h| HeadParams {
                query: c(&h.query),
                key: c(&h.key),
                value: c(&h.value),
            })
            .collect(),
        output: c(&l.output),
        ffn_in: Dense { weight: c(&l.ffn_in.weight), bias: c(&l.ffn_in.bias) },
        ffn_out: Dense { weight: c(&l.ffn_out.weight), bias: c(&l.ffn_out.bias) },
        norm1: Norm { gain: c(&l.norm1.gain), bias: c(&l.norm1.bias) },
        norm2: Norm { gain: c(&l.norm2.gain), bias: c(&l.norm2.bias) },
    }
}

#[test]
fn zeroed_output_weights_leave_two_norms() {
    let cfg = with_heads(2, 4, 4);
    let mut l = layers(&cfg, 5).remove(0);
    l.output = Tensor::zeros(l.output.shape());
    l.ffn_out.weight = Tensor::zeros(l.ffn_out.weight.shape());
    l.ffn_out.bias = Tensor::zeros(l.ffn_out.bias.shape());
    let mut r = rng::stream(5, 9);
    let x = random_tensor(&mut r, &[15, 16], -3.0, 3.0);
    let g = Graph::new();
    let out = encoder_layer(&g.constant(x.clone()), &freeze_layer(&g, &l), &cfg.encoder).unwrap();
    let eps = cfg.encoder.norm_eps;
    let once = naive_norm(&mat(&x), l.norm1.gain.data(), l.norm1.bias.data(), eps);
    let twice = naive_norm(&once, l.norm2.gain.data(), l.norm2.bias.data(), eps);
    assert!(max_diff(&twice, out.value().data()) < 1e-12);
}

#[test]
fn stack_commutes_with_row_permutations() {
    let cfg = with_heads(4, 4, 4);
    let mut cfg6 = cfg.clone();
    cfg6.encoder.num_layers = 3;
    let ls = layers(&cfg6, 31);
    let mut r = rng::stream(31, 4);
    for trial in 0..20 {
        let x = random_tensor(&mut r, &[15, 16], -1.5, 1.5);
        let mut perm: Vec<usize> = (0..15).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut r);
        let mut px = Vec::new();
        for &i in &perm {
            px.extend_from_slice(&x.data()[i * 16..(i + 1) * 16]);
        }
        let g = Graph::new();
        let vars: Vec<_> = ls.iter().map(|l| freeze_layer(&g, l)).collect();
        let out = encoder_stack(&g.constant(x), &vars, &cfg6.encoder).unwrap();
        let pout = encoder_stack(&g.constant(Tensor::new(&[15, 16], px).unwrap()), &vars, &cfg6.encoder).unwrap();
        for (k, &i) in perm.iter().enumerate() {
            let a = &out.value().data()[i * 16..(i + 1) * 16];
            let b = &pout.value().data()[k * 16..(k + 1) * 16];
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-12, "trial {trial}");
            }
        }
    }
}

#[test]
fn positional_matrix_breaks_permutation_symmetry() {
    let cfg = tiny_model();
    let m = Model::<f64>::init(&cfg, &mut rng::stream(8, 1)).unwrap();
    let mut r = rng::stream(8, 2);
    let x = random_tensor(&mut r, &[1, 60], 0.0, 1.0);
    let mut swapped = x.to_vec();
    for f in 0..4 {
        swapped.swap(f, 4 + f);
    }
    let c = Tensor::full(&[1, 1], 0.4);
    let a = m.score(&x, &c).unwrap();
    let b = m.score(&Tensor::new(&[1, 60], swapped).unwrap(), &c).unwrap();
    assert_ne!(a, b);
}

fn scaler() -> Scaler {
    Scaler::from_ranges([
        Range { min: -140.0, max: -70.0 },
        Range { min: 0.0, max: 6.0 },
        Range { min: 3e-9, max: 3e-7 },
        Range { min: -180.0, max: 179.0 },
        Range { min: 1.0, max: 30.0 },
    ])
    .unwrap()
}

#[test]
fn saved_checkpoints_reproduce_forward_passes() {
    let cfg = tiny_model();
    let model = Model::<f64>::init(&cfg, &mut rng::stream(44, 1)).unwrap();
    let ck = Checkpoint {
        model,
        scaler: scaler(),
        epoch: 1,
        iteration: 9,
        seed: 44,
        streams: TrainStreams::new(44).capture().to_vec(),
        generator_opt: OptimizerState::sgd(1e-4),
        critic_opt: OptimizerState::adam(1e-4),
    };
    let path = std::env::temp_dir().join(format!("tgan-model-{}.bin", std::process::id()));
    ck.save(&path).unwrap();
    let back = Checkpoint::<f64>::load(&path).unwrap();
    std::fs::remove_file(&path).unwrap();
    assert_eq!(back, ck);

    let mut r = rng::stream(44, 2);
    let z = random_tensor(&mut r, &[4, cfg.noise_dim], -2.0, 2.0);
    let c = random_tensor(&mut r, &[4, 1], 0.0, 1.0);
    let before = ck.model.generate(&z, &c).unwrap();
    let after = back.model.generate(&z, &c).unwrap();
    let bits = |t: &Tensor<f64>| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&before), bits(&after));
    assert_eq!(bits(&ck.model.score(&before, &c).unwrap()), bits(&back.model.score(&after, &c).unwrap()));
}

#[test]
fn truncated_checkpoint_files_are_errors() {
    let cfg = tiny_model();
    let ck = Checkpoint {
        model: Model::<f64>::init(&cfg, &mut rng::stream(2, 1)).unwrap(),
        scaler: scaler(),
        epoch: 0,
        iteration: 0,
        seed: 2,
        streams: TrainStreams::new(2).capture().to_vec(),
        generator_opt: OptimizerState::sgd(1e-4),
        critic_opt: OptimizerState::adam(1e-4),
    };
    let bytes = ck.to_bytes();
    for cut in [0, 4, bytes.len() / 2, bytes.len() - 1] {
        assert!(Checkpoint::<f64>::from_bytes(&bytes[..cut]).is_err(), "cut at {cut}");
    }
}
