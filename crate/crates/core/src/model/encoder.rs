//! Transformer encoder blocks on graph variables.
//!
//! Sequences are `L x d_x` matrices or `B x L x d_x` batches; every block
//! accepts either.

use super::config::EncoderConfig;
use super::params::{Dense, EncoderLayerParams, Norm};
use crate::error::{shape_err, Result};
use crate::numerics::Var;
use crate::scalar::Scalar;

/// `x W + b` for a matrix `x`.
pub fn dense<'g, T: Scalar>(x: &Var<'g, T>, d: &Dense<Var<'g, T>>) -> Result<Var<'g, T>> {
    x.matmul(&d.weight)?.add(&d.bias)
}

fn layer_norm<'g, T: Scalar>(x: &Var<'g, T>, n: &Norm<Var<'g, T>>, eps: T) -> Result<Var<'g, T>> {
    x.layer_norm_rows(eps)?.mul(&n.gain)?.add(&n.bias)
}

/// `softmax(Q Kᵀ / sqrt(d_k))`, row-stochastic.
pub fn attention_weights<'g, T: Scalar>(q: &Var<'g, T>, k: &Var<'g, T>) -> Result<Var<'g, T>> {
    let dk = *q.shape().last().expect("rank >= 1");
    let scale = T::one() / T::of(dk as f64).sqrt();
    q.matmul_t(k, false, true)?.scale(scale)?.softmax_rows()
}

/// Scaled dot-product attention `softmax(Q Kᵀ / sqrt(d_k)) V`.
pub fn attention<'g, T: Scalar>(
    q: &Var<'g, T>,
    k: &Var<'g, T>,
    v: &Var<'g, T>,
) -> Result<Var<'g, T>> {
    if q.shape().last() != k.shape().last() {
        return shape_err("attention", q.shape(), k.shape());
    }
    attention_weights(q, k)?.matmul(v)
}

/// Splits a sequence shape into `(batch, L, d)`.
fn seq_dims(shape: &[usize], op: &'static str) -> Result<(usize, usize, usize)> {
    match *shape {
        [l, d] => Ok((1, l, d)),
        [b, l, d] => Ok((b, l, d)),
        _ => shape_err(op, shape, &[]),
    }
}

/// Concatenated head outputs times `W^o`.
pub fn multi_head<'g, T: Scalar>(
    x: &Var<'g, T>,
    p: &EncoderLayerParams<Var<'g, T>>,
) -> Result<Var<'g, T>> {
    let (b, l, dx) = seq_dims(x.shape(), "multi_head")?;
    let flat = x.reshape(&[b * l, dx])?;
    let mut heads = Vec::with_capacity(p.heads.len());
    for h in &p.heads {
        let proj = |w: &Var<'g, T>| -> Result<Var<'g, T>> {
            let y = flat.matmul(w)?;
            let width = y.shape()[1];
            y.reshape(&[b, l, width])
        };
        heads.push(attention(&proj(&h.query)?, &proj(&h.key)?, &proj(&h.value)?)?);
    }
    let cat = Var::concat(&heads, 2)?;
    let width = cat.shape()[2];
    cat.reshape(&[b * l, width])?
        .matmul(&p.output)?
        .reshape(x.shape())
}

/// `max(0, x W1 + b1) W2 + b2`, row-wise.
pub fn feed_forward<'g, T: Scalar>(
    x: &Var<'g, T>,
    p: &EncoderLayerParams<Var<'g, T>>,
) -> Result<Var<'g, T>> {
    let (b, l, dx) = seq_dims(x.shape(), "feed_forward")?;
    let flat = x.reshape(&[b * l, dx])?;
    dense(&dense(&flat, &p.ffn_in)?.relu()?, &p.ffn_out)?.reshape(x.shape())
}

/// Post-norm block: `Y = LN(X + MH(X))`, then `LN(Y + FFN(Y))`.
pub fn encoder_layer<'g, T: Scalar>(
    x: &Var<'g, T>,
    p: &EncoderLayerParams<Var<'g, T>>,
    config: &EncoderConfig,
) -> Result<Var<'g, T>> {
    let eps = T::of(config.norm_eps);
    let y = layer_norm(&x.add(&multi_head(x, p)?)?, &p.norm1, eps)?;
    layer_norm(&y.add(&feed_forward(&y, p)?)?, &p.norm2, eps)
}

pub fn encoder_stack<'g, T: Scalar>(
    x: &Var<'g, T>,
    layers: &[EncoderLayerParams<Var<'g, T>>],
    config: &EncoderConfig,
) -> Result<Var<'g, T>> {
    let mut h = x.clone();
    for p in layers {
        h = encoder_layer(&h, p, config)?;
    }
    Ok(h)
}
