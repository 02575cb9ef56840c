//! Dense row-major arrays and the value-level kernels behind every graph op.

use std::fmt;
use std::sync::Arc;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Immutable n-dimensional array in row-major order.
///
/// Cloning is cheap: the buffer is reference counted, so tensors can be
/// handed to graph nodes and across threads without copying.
#[derive(Clone, PartialEq)]
pub struct Tensor<T> {
    shape: Vec<usize>,
    data: Arc<Vec<T>>,
}

impl<T: fmt::Debug> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tensor{:?}", self.shape)?;
        if self.data.len() <= 16 {
            write!(f, " {:?}", self.data)?;
        }
        Ok(())
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Scalar> Tensor<T> {
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::Contract(format!("zero extent in shape {shape:?}")));
        }
        if numel(shape) != data.len() {
            return shape_err("tensor", shape, &[data.len()]);
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::new(data),
        })
    }

    /// Builds from a buffer whose length is already known to match.
    pub(crate) fn from_parts(shape: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Self {
            shape,
            data: Arc::new(data),
        }
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::from_parts(shape.to_vec(), vec![value; numel(shape)])
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, T::one())
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    pub fn from_f64(shape: &[usize], values: &[f64]) -> Result<Self> {
        Self::new(shape, values.iter().map(|&v| T::of(v)).collect())
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.data.as_ref().clone()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.as_f64()).collect()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.len() != 1 {
            return Err(Error::Contract(format!(
                "item() needs a single element, shape is {:?}",
                self.shape
            )));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.shape.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.len() || shape.contains(&0) {
            return shape_err("reshape", &self.shape, shape);
        }
        Ok(Self {
            shape: shape.to_vec(),
            data: Arc::clone(&self.data),
        })
    }

    pub fn sum_all(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn l2_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    /// Elementwise `self + alpha * other`, shapes must match.
    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        if self.shape != other.shape {
            return shape_err("axpy", &self.shape, &other.shape);
        }
        Ok(Self::from_parts(
            self.shape.clone(),
            self.data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        ))
    }
}

// ---------------------------------------------------------------------------
// broadcasting

/// Numpy-style broadcast of two shapes.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` when viewed inside the larger `out` shape, with zero
/// stride on broadcast axes.
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let oi = i + rank - shape.len();
        strides[oi] = if shape[i] == 1 && out[oi] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

enum Layout {
    Same,
    ScalarRhs,
    ScalarLhs,
    /// rhs repeats every `n` elements of lhs (rhs shape is a suffix).
    SuffixRhs(usize),
    SuffixLhs(usize),
    /// rhs has trailing extent 1 and matches lhs otherwise.
    ColumnRhs(usize),
    ColumnLhs(usize),
    General,
}

fn classify(a: &[usize], b: &[usize], out: &[usize]) -> Layout {
    let na = numel(a);
    let nb = numel(b);
    if a == b {
        return Layout::Same;
    }
    if nb == 1 && a == out {
        return Layout::ScalarRhs;
    }
    if na == 1 && b == out {
        return Layout::ScalarLhs;
    }
    if a == out && b.len() <= a.len() && a[a.len() - b.len()..] == *b {
        return Layout::SuffixRhs(nb);
    }
    if b == out && a.len() <= b.len() && b[b.len() - a.len()..] == *a {
        return Layout::SuffixLhs(na);
    }
    let column = |big: &[usize], small: &[usize]| {
        big.len() == small.len()
            && !big.is_empty()
            && small[small.len() - 1] == 1
            && big[..big.len() - 1] == small[..small.len() - 1]
    };
    if a == out && column(a, b) {
        return Layout::ColumnRhs(a[a.len() - 1]);
    }
    if b == out && column(b, a) {
        return Layout::ColumnLhs(b[b.len() - 1]);
    }
    Layout::General
}

pub(crate) fn zip_broadcast<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    let out = match broadcast_shape(a.shape(), b.shape()) {
        Some(s) => s,
        None => return shape_err(op, a.shape(), b.shape()),
    };
    let (ad, bd) = (a.data(), b.data());
    let data: Vec<T> = match classify(a.shape(), b.shape(), &out) {
        Layout::Same => ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect(),
        Layout::ScalarRhs => ad.iter().map(|&x| f(x, bd[0])).collect(),
        Layout::ScalarLhs => bd.iter().map(|&y| f(ad[0], y)).collect(),
        Layout::SuffixRhs(n) => ad
            .chunks(n)
            .flat_map(|row| row.iter().zip(bd).map(|(&x, &y)| f(x, y)))
            .collect(),
        Layout::SuffixLhs(n) => bd
            .chunks(n)
            .flat_map(|row| ad.iter().zip(row).map(|(&x, &y)| f(x, y)))
            .collect(),
        Layout::ColumnRhs(n) => ad
            .chunks(n)
            .zip(bd)
            .flat_map(|(row, &y)| row.iter().map(move |&x| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect(),
        Layout::ColumnLhs(n) => bd
            .chunks(n)
            .zip(ad)
            .flat_map(|(row, &x)| row.iter().map(move |&y| (x, y)))
            .map(|(x, y)| f(x, y))
            .collect(),
        Layout::General => {
            let sa = broadcast_strides(a.shape(), &out);
            let sb = broadcast_strides(b.shape(), &out);
            let total = numel(&out);
            let mut idx = vec![0usize; out.len()];
            let mut data = Vec::with_capacity(total);
            for _ in 0..total {
                let ia: usize = idx.iter().zip(&sa).map(|(i, s)| i * s).sum();
                let ib: usize = idx.iter().zip(&sb).map(|(i, s)| i * s).sum();
                data.push(f(ad[ia], bd[ib]));
                for ax in (0..out.len()).rev() {
                    idx[ax] += 1;
                    if idx[ax] < out[ax] {
                        break;
                    }
                    idx[ax] = 0;
                }
            }
            data
        }
    };
    Ok(Tensor::from_parts(out, data))
}

/// Sums `t` down to `shape`, the inverse of broadcasting `shape` up to
/// `t.shape()`.
pub(crate) fn sum_to<T: Scalar>(t: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if t.shape() == shape {
        return Ok(t.clone());
    }
    match broadcast_shape(shape, t.shape()) {
        Some(s) if s == t.shape() => {}
        _ => return shape_err("sum_to", t.shape(), shape),
    }
    let n = numel(shape);
    let mut acc = vec![T::zero(); n];
    match classify(t.shape(), shape, t.shape()) {
        Layout::ScalarRhs => acc[0] = t.sum_all(),
        Layout::SuffixRhs(m) => {
            for row in t.data().chunks(m) {
                for (a, &v) in acc.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        Layout::ColumnRhs(m) => {
            for (a, row) in acc.iter_mut().zip(t.data().chunks(m)) {
                *a = row.iter().copied().sum();
            }
        }
        _ => {
            let out = t.shape();
            let st = broadcast_strides(shape, out);
            let mut idx = vec![0usize; out.len()];
            for &v in t.data() {
                let i: usize = idx.iter().zip(&st).map(|(i, s)| i * s).sum();
                acc[i] += v;
                for ax in (0..out.len()).rev() {
                    idx[ax] += 1;
                    if idx[ax] < out[ax] {
                        break;
                    }
                    idx[ax] = 0;
                }
            }
        }
    }
    Ok(Tensor::from_parts(shape.to_vec(), acc))
}

pub(crate) fn broadcast_to<T: Scalar>(t: &Tensor<T>, shape: &[usize]) -> Result<Tensor<T>> {
    if t.shape() == shape {
        return Ok(t.clone());
    }
    match broadcast_shape(t.shape(), shape) {
        Some(s) if s == shape => {}
        _ => return shape_err("broadcast_to", t.shape(), shape),
    }
    let target = Tensor::from_parts(shape.to_vec(), vec![T::zero(); numel(shape)]);
    zip_broadcast("broadcast_to", &target, t, |_, y| y)
}

// ---------------------------------------------------------------------------
// matmul

/// Splits a rank-2 or rank-3 shape into (batch, rows, cols).
fn mat_dims(shape: &[usize]) -> Option<(usize, usize, usize)> {
    match *shape {
        [r, c] => Some((1, r, c)),
        [b, r, c] => Some((b, r, c)),
        _ => None,
    }
}

/// `op(a) * op(b)` where `op` optionally transposes the two trailing axes.
///
/// Both operands are matrices, or both are stacks of matrices with equal
/// batch extent.
pub(crate) fn matmul<T: Scalar>(
    a: &Tensor<T>,
    b: &Tensor<T>,
    trans_a: bool,
    trans_b: bool,
) -> Result<Tensor<T>> {
    let (Some((ba, ra, ca)), Some((bb, rb, cb))) = (mat_dims(a.shape()), mat_dims(b.shape()))
    else {
        return shape_err("matmul", a.shape(), b.shape());
    };
    if a.rank() != b.rank() || ba != bb {
        return shape_err("matmul", a.shape(), b.shape());
    }
    let (m, ka) = if trans_a { (ca, ra) } else { (ra, ca) };
    let (kb, n) = if trans_b { (cb, rb) } else { (rb, cb) };
    if ka != kb {
        return shape_err("matmul", a.shape(), b.shape());
    }
    let k = ka;
    let mut out = vec![T::zero(); ba * m * n];
    // row-major storage: element (i, j) at i * cols + j
    let (rsa, csa) = if trans_a { (1, ca as isize) } else { (ca as isize, 1) };
    let (rsb, csb) = if trans_b { (1, cb as isize) } else { (cb as isize, 1) };
    for batch in 0..ba {
        let ap = &a.data()[batch * ra * ca..(batch + 1) * ra * ca];
        let bp = &b.data()[batch * rb * cb..(batch + 1) * rb * cb];
        let cp = &mut out[batch * m * n..(batch + 1) * m * n];
        // SAFETY: slices above hold exactly the m x k, k x n and m x n
        // matrices addressed by these strides; `cp` is a fresh buffer.
        unsafe {
            T::gemm(
                m,
                k,
                n,
                T::one(),
                ap.as_ptr(),
                rsa,
                csa,
                bp.as_ptr(),
                rsb,
                csb,
                T::zero(),
                cp.as_mut_ptr(),
                n as isize,
                1,
            );
        }
    }
    let shape = if a.rank() == 3 { vec![ba, m, n] } else { vec![m, n] };
    Ok(Tensor::from_parts(shape, out))
}

// ---------------------------------------------------------------------------
// structural kernels

pub(crate) fn transpose<T: Scalar>(t: &Tensor<T>) -> Result<Tensor<T>> {
    let Some((b, r, c)) = mat_dims(t.shape()) else {
        return shape_err("transpose", t.shape(), &[]);
    };
    let d = t.data();
    let mut out = Vec::with_capacity(t.len());
    for batch in 0..b {
        let base = batch * r * c;
        for j in 0..c {
            for i in 0..r {
                out.push(d[base + i * c + j]);
            }
        }
    }
    let shape = if t.rank() == 3 { vec![b, c, r] } else { vec![c, r] };
    Ok(Tensor::from_parts(shape, out))
}

/// (outer, axis extent, inner) decomposition around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    (
        numel(&shape[..axis]),
        shape[axis],
        numel(&shape[axis + 1..]),
    )
}

pub fn concat<T: Scalar>(parts: &[Tensor<T>], axis: usize) -> Result<Tensor<T>> {
    let first = parts
        .first()
        .ok_or_else(|| Error::Contract("concat of zero tensors".into()))?;
    if axis >= first.rank() {
        return shape_err("concat", first.shape(), &[axis]);
    }
    let mut shape = first.shape().to_vec();
    shape[axis] = 0;
    for p in parts {
        let same_rank = p.rank() == first.rank();
        let others_match = same_rank
            && p.shape()
                .iter()
                .zip(first.shape())
                .enumerate()
                .all(|(i, (x, y))| i == axis || x == y);
        if !others_match {
            return shape_err("concat", first.shape(), p.shape());
        }
        shape[axis] += p.shape()[axis];
    }
    let (outer, _, inner) = split_axis(first.shape(), axis);
    let mut out = Vec::with_capacity(numel(&shape));
    for o in 0..outer {
        for p in parts {
            let chunk = p.shape()[axis] * inner;
            out.extend_from_slice(&p.data()[o * chunk..(o + 1) * chunk]);
        }
    }
    Ok(Tensor::from_parts(shape, out))
}

pub(crate) fn slice<T: Scalar>(
    t: &Tensor<T>,
    axis: usize,
    start: usize,
    len: usize,
) -> Result<Tensor<T>> {
    if axis >= t.rank() || len == 0 || start + len > t.shape()[axis] {
        return shape_err("slice", t.shape(), &[axis, start, len]);
    }
    let (outer, extent, inner) = split_axis(t.shape(), axis);
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = o * extent * inner + start * inner;
        out.extend_from_slice(&t.data()[base..base + len * inner]);
    }
    let mut shape = t.shape().to_vec();
    shape[axis] = len;
    Ok(Tensor::from_parts(shape, out))
}

/// Embeds `t` at offset `start` of a zero tensor whose `axis` extent is
/// `total`.
pub(crate) fn pad<T: Scalar>(
    t: &Tensor<T>,
    axis: usize,
    start: usize,
    total: usize,
) -> Result<Tensor<T>> {
    if axis >= t.rank() || start + t.shape()[axis] > total {
        return shape_err("pad", t.shape(), &[axis, start, total]);
    }
    let (outer, extent, inner) = split_axis(t.shape(), axis);
    let mut out = vec![T::zero(); outer * total * inner];
    for o in 0..outer {
        let src = &t.data()[o * extent * inner..(o + 1) * extent * inner];
        let dst = o * total * inner + start * inner;
        out[dst..dst + extent * inner].copy_from_slice(src);
    }
    let mut shape = t.shape().to_vec();
    shape[axis] = total;
    Ok(Tensor::from_parts(shape, out))
}

/// Sum over the last axis, keeping it with extent 1.
pub(crate) fn sum_last<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let n = *t.shape().last().expect("rank >= 1");
    let data = t.data().chunks(n).map(|r| r.iter().copied().sum()).collect();
    let mut shape = t.shape().to_vec();
    *shape.last_mut().expect("rank >= 1") = 1;
    Tensor::from_parts(shape, data)
}

pub(crate) fn softmax_last<T: Scalar>(t: &Tensor<T>) -> Tensor<T> {
    let n = *t.shape().last().expect("rank >= 1");
    let mut out = Vec::with_capacity(t.len());
    for row in t.data().chunks(n) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let start = out.len();
        let mut total = T::zero();
        for &v in row {
            let e = (v - max).exp();
            total += e;
            out.push(e);
        }
        for v in &mut out[start..] {
            *v /= total;
        }
    }
    Tensor::from_parts(t.shape().to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor<f64> {
        Tensor::from_f64(shape, v).unwrap()
    }

    #[test]
    fn rejects_length_mismatch() {
        assert!(Tensor::<f64>::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::<f64>::new(&[0, 3], vec![]).is_err());
    }

    #[test]
    fn broadcast_layouts_agree_with_general_path() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let row = t(&[3], &[10., 20., 30.]);
        let col = t(&[2, 1], &[100., 200.]);
        let s = zip_broadcast("add", &a, &row, |x, y| x + y).unwrap();
        assert_eq!(s.data(), &[11., 22., 33., 14., 25., 36.]);
        let c = zip_broadcast("add", &col, &a, |x, y| x + y).unwrap();
        assert_eq!(c.data(), &[101., 102., 103., 204., 205., 206.]);
        // [2,1] + [1,3] only works through the general path
        let g = zip_broadcast("add", &col, &t(&[1, 3], &[1., 2., 3.]), |x, y| x + y).unwrap();
        assert_eq!(g.shape(), &[2, 3]);
        assert_eq!(g.data(), &[101., 102., 103., 201., 202., 203.]);
        assert!(zip_broadcast("add", &a, &t(&[2], &[1., 2.]), |x, y| x + y).is_err());
    }

    #[test]
    fn sum_to_inverts_broadcast() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        assert_eq!(sum_to(&a, &[3]).unwrap().data(), &[5., 7., 9.]);
        assert_eq!(sum_to(&a, &[2, 1]).unwrap().data(), &[6., 15.]);
        assert_eq!(sum_to(&a, &[1]).unwrap().data(), &[21.]);
        assert_eq!(sum_to(&a, &[1, 3]).unwrap().data(), &[5., 7., 9.]);
    }

    #[test]
    fn matmul_with_transposes() {
        let a = t(&[2, 3], &[1., 2., 3., 4., 5., 6.]);
        let b = t(&[3, 2], &[7., 8., 9., 10., 11., 12.]);
        let c = matmul(&a, &b, false, false).unwrap();
        assert_eq!(c.data(), &[58., 64., 139., 154.]);
        let at = transpose(&a).unwrap();
        let bt = transpose(&b).unwrap();
        assert_eq!(matmul(&at, &b, true, false).unwrap(), c);
        assert_eq!(matmul(&a, &bt, false, true).unwrap(), c);
        assert_eq!(matmul(&at, &bt, true, true).unwrap(), c);
        assert!(matmul(&a, &a, false, false).is_err());
    }

    #[test]
    fn concat_slice_pad() {
        let a = t(&[2, 2], &[1., 2., 3., 4.]);
        let b = t(&[2, 1], &[5., 6.]);
        let c = concat(&[a.clone(), b.clone()], 1).unwrap();
        assert_eq!(c.data(), &[1., 2., 5., 3., 4., 6.]);
        assert_eq!(slice(&c, 1, 2, 1).unwrap(), b);
        assert_eq!(pad(&b, 1, 2, 3).unwrap().data(), &[0., 0., 5., 0., 0., 6.]);
        assert!(concat(&[a, t(&[3, 1], &[0., 0., 0.])], 1).is_err());
    }

    #[test]
    fn softmax_is_stable_for_large_logits() {
        let s = softmax_last(&t(&[1, 3], &[1000., 1000., 1000.]));
        for v in s.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
