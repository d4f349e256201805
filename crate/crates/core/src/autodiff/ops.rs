//! Forward constructors for every primitive.

use super::shape::{aligned_strides, axis_split, bcast_for_each, broadcast_shape, swap_axes};
use super::tape::Op;
use super::{AutodiffError, Scalar, Tape, Tensor, Var};
use alloc::vec;
use alloc::vec::Vec;

/// Statistics of one batch-norm call in training mode: per-channel mean and
/// unbiased variance, for updating running estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchStats<T> {
    pub mean: Vec<T>,
    pub var: Vec<T>,
}

/// How a batch-norm call normalizes.
#[derive(Debug, Clone, Copy)]
pub enum BnMode<'a, T> {
    /// Normalize with the statistics of this batch.
    Train,
    /// Normalize with fixed running statistics.
    Eval { mean: &'a [T], var: &'a [T] },
}

pub const BN_EPS: f64 = 1e-5;
pub const LN_EPS: f64 = 1e-5;

fn shape_err(op: &'static str, a: &[usize], b: &[usize]) -> AutodiffError {
    AutodiffError::Shape {
        op,
        lhs: a.to_vec(),
        rhs: b.to_vec(),
    }
}

impl<T: Scalar> Tape<T> {
    fn check_axis(&self, op: &'static str, a: Var, axis: usize) -> Result<(), AutodiffError> {
        let shape = self.shape(a);
        if axis >= shape.len() || shape[axis] == 0 {
            return Err(AutodiffError::InvalidAxis {
                op,
                axis,
                shape: shape.to_vec(),
            });
        }
        Ok(())
    }

    /// Matrix product over the last two axes. Leading axes must agree, or
    /// `b` may be a plain matrix shared by every leading index of `a`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() < 2 || sb.len() < 2 {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let (n, k) = (sa[sa.len() - 2], sa[sa.len() - 1]);
        let (kb, m) = (sb[sb.len() - 2], sb[sb.len() - 1]);
        let shared_b = sb.len() == 2;
        if kb != k || (!shared_b && sa[..sa.len() - 2] != sb[..sb.len() - 2]) {
            return Err(shape_err("matmul", &sa, &sb));
        }
        let batch: usize = sa[..sa.len() - 2].iter().product();
        let mut shape = sa.clone();
        *shape.last_mut().unwrap() = m;
        let mut out = vec![T::zero(); batch * n * m];
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        if shared_b {
            T::gemm(
                batch * n,
                k,
                m,
                av,
                (k as isize, 1),
                bv,
                (m as isize, 1),
                T::zero(),
                &mut out,
                (m as isize, 1),
            );
        } else {
            for i in 0..batch {
                T::gemm(
                    n,
                    k,
                    m,
                    &av[i * n * k..],
                    (k as isize, 1),
                    &bv[i * k * m..],
                    (m as isize, 1),
                    T::zero(),
                    &mut out[i * n * m..(i + 1) * n * m],
                    (m as isize, 1),
                );
            }
        }
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::MatMul {
                a,
                b,
                batch,
                n,
                k,
                m,
                shared_b,
            },
            rg,
        ))
    }

    fn binary(
        &mut self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
    ) -> Result<(Tensor<T>, bool), AutodiffError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        let out = broadcast_shape(sa, sb).ok_or_else(|| shape_err(op, sa, sb))?;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let data = if sa == sb {
            av.iter().zip(bv).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let (ta, tb) = (aligned_strides(sa, &out), aligned_strides(sb, &out));
            let mut d = Vec::with_capacity(out.iter().product());
            bcast_for_each(&out, &ta, &tb, |_, i, j| d.push(f(av[i], bv[j])));
            d
        };
        Ok((Tensor::new(&out, data)?, self.any_grad(&[a, b])))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (t, rg) = self.binary("add", a, b, |x, y| x + y)?;
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (t, rg) = self.binary("sub", a, b, |x, y| x - y)?;
        Ok(self.push(t, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (t, rg) = self.binary("mul", a, b, |x, y| x * y)?;
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        let v = self.value(a);
        let t = Tensor::new(v.shape(), v.data().iter().map(|&x| x * c).collect()).unwrap();
        let rg = self.any_grad(&[a]);
        self.push(t, Op::Scale(a, c), rg)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a);
        let t = Tensor::new(
            v.shape(),
            v.data()
                .iter()
                .map(|&x| if x > T::zero() { x } else { T::zero() })
                .collect(),
        )
        .unwrap();
        let rg = self.any_grad(&[a]);
        self.push(t, Op::Relu(a), rg)
    }

    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        self.check_axis("softmax", a, axis)?;
        let v = self.value(a);
        let (outer, len, inner) = axis_split(v.shape(), axis);
        let x = v.data();
        let mut y = vec![T::zero(); x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let mx = (0..len).map(|j| x[at(j)]).fold(T::neg_infinity(), T::max);
                let mut total = T::zero();
                for j in 0..len {
                    let e = (x[at(j)] - mx).exp();
                    y[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    y[at(j)] = y[at(j)] / total;
                }
            }
        }
        let t = Tensor::new(v.shape(), y)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(t, Op::Softmax { a, axis }, rg))
    }

    fn reduced_shape(&self, a: Var, axis: usize) -> Vec<usize> {
        let mut s = self.shape(a).to_vec();
        s.remove(axis);
        s
    }

    /// Maximum along `axis`, which is removed. The gradient goes to the
    /// first maximal element.
    pub fn max(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        self.check_axis("max", a, axis)?;
        let shape = self.reduced_shape(a, axis);
        let v = self.value(a);
        let (outer, len, inner) = axis_split(v.shape(), axis);
        let x = v.data();
        let mut out = Vec::with_capacity(outer * inner);
        let mut argmax = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = o * len * inner;
            out.extend_from_slice(&x[base..base + inner]);
            argmax.extend(core::iter::repeat_n(0usize, inner));
            let off = o * inner;
            for j in 1..len {
                let row = &x[base + j * inner..base + (j + 1) * inner];
                for (i, &val) in row.iter().enumerate() {
                    if val > out[off + i] {
                        out[off + i] = val;
                        argmax[off + i] = j;
                    }
                }
            }
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Max { a, axis, argmax }, rg))
    }

    fn sum_axis(&self, a: Var, axis: usize) -> Vec<T> {
        let v = self.value(a);
        let (outer, len, inner) = axis_split(v.shape(), axis);
        let x = v.data();
        let mut out = vec![T::zero(); outer * inner];
        for o in 0..outer {
            for j in 0..len {
                let row = &x[(o * len + j) * inner..(o * len + j + 1) * inner];
                for (acc, &val) in out[o * inner..(o + 1) * inner].iter_mut().zip(row) {
                    *acc += val;
                }
            }
        }
        out
    }

    /// Sum along `axis`, which is removed.
    pub fn sum(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        self.check_axis("sum", a, axis)?;
        let shape = self.reduced_shape(a, axis);
        let out = self.sum_axis(a, axis);
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Sum { a, axis }, rg))
    }

    /// Mean along `axis`, which is removed.
    pub fn mean(&mut self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        self.check_axis("mean", a, axis)?;
        let shape = self.reduced_shape(a, axis);
        let n = T::from_f64(self.shape(a)[axis] as f64);
        let out = self.sum_axis(a, axis).into_iter().map(|s| s / n).collect();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Mean { a, axis }, rg))
    }

    /// Sum of all elements as a rank-0 tensor.
    pub fn sum_all(&mut self, a: Var) -> Var {
        let n = self.value(a).numel();
        let flat = self.reshape(a, &[n]).unwrap();
        if n == 0 {
            return self.constant(Tensor::scalar(T::zero()));
        }
        self.sum(flat, 0).unwrap()
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        let first = self
            .shape(*parts.first().ok_or(AutodiffError::Empty { op: "concat" })?)
            .to_vec();
        if axis >= first.len() {
            return Err(AutodiffError::InvalidAxis {
                op: "concat",
                axis,
                shape: first,
            });
        }
        let mut shape = first.clone();
        shape[axis] = 0;
        for &p in parts {
            let s = self.shape(p);
            let same = s.len() == first.len()
                && s.iter()
                    .zip(&first)
                    .enumerate()
                    .all(|(d, (x, y))| d == axis || x == y);
            if !same {
                return Err(shape_err("concat", &first, s));
            }
            shape[axis] += s[axis];
        }
        let (outer, total, inner) = axis_split(&shape, axis);
        let mut out = vec![T::zero(); outer * total * inner];
        let mut at = 0;
        for &p in parts {
            let v = self.value(p);
            let w = v.shape()[axis] * inner;
            for o in 0..outer {
                out[o * total * inner + at..o * total * inner + at + w]
                    .copy_from_slice(&v.data()[o * w..(o + 1) * w]);
            }
            at += w;
        }
        let rg = self.any_grad(parts);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            rg,
        ))
    }

    /// Selects entries `index` along `axis` (repeats allowed).
    pub fn gather(&mut self, a: Var, axis: usize, index: &[usize]) -> Result<Var, AutodiffError> {
        let s = self.shape(a).to_vec();
        if axis >= s.len() {
            return Err(AutodiffError::InvalidAxis {
                op: "gather",
                axis,
                shape: s,
            });
        }
        if let Some(&bad) = index.iter().find(|&&i| i >= s[axis]) {
            return Err(AutodiffError::IndexOutOfRange {
                op: "gather",
                index: bad,
                len: s[axis],
            });
        }
        let (outer, len, inner) = axis_split(&s, axis);
        let x = self.value(a).data();
        let mut out = Vec::with_capacity(outer * index.len() * inner);
        for o in 0..outer {
            for &j in index {
                let from = (o * len + j) * inner;
                out.extend_from_slice(&x[from..from + inner]);
            }
        }
        let mut shape = s;
        shape[axis] = index.len();
        let rg = self.any_grad(&[a]);
        Ok(self.push(
            Tensor::new(&shape, out)?,
            Op::Gather {
                a,
                axis,
                index: index.to_vec(),
            },
            rg,
        ))
    }

    /// Contiguous slice `start..start + len` along `axis`.
    pub fn narrow(
        &mut self,
        a: Var,
        axis: usize,
        start: usize,
        len: usize,
    ) -> Result<Var, AutodiffError> {
        let index: Vec<usize> = (start..start + len).collect();
        self.gather(a, axis, &index)
    }

    /// Exchanges two axes.
    pub fn transpose(&mut self, a: Var, d0: usize, d1: usize) -> Result<Var, AutodiffError> {
        let s = self.shape(a).to_vec();
        if d0 >= s.len() || d1 >= s.len() {
            return Err(AutodiffError::InvalidAxis {
                op: "transpose",
                axis: d0.max(d1),
                shape: s,
            });
        }
        let out = swap_axes(self.value(a).data(), &s, d0, d1);
        let mut shape = s;
        shape.swap(d0, d1);
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::new(&shape, out)?, Op::SwapAxes { a, d0, d1 }, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let t = self.value(a).clone().reshaped(shape)?;
        let rg = self.any_grad(&[a]);
        Ok(self.push(t, Op::Reshape(a), rg))
    }

    /// Batch normalization over every axis but the last (channels).
    pub fn batch_norm(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        mode: BnMode<'_, T>,
    ) -> Result<(Var, Option<BatchStats<T>>), AutodiffError> {
        let s = self.shape(x).to_vec();
        let c = *s.last().ok_or_else(|| shape_err("batch_norm", &s, &[]))?;
        for p in [gamma, beta] {
            if self.shape(p) != [c] {
                return Err(shape_err("batch_norm", &s, self.shape(p)));
            }
        }
        let rows = if c == 0 { 0 } else { self.value(x).numel() / c };
        let xv = self.value(x).data();
        let eps = T::from_f64(BN_EPS);
        let (mean, var, stats) = match mode {
            BnMode::Train => {
                if rows == 0 {
                    return Err(AutodiffError::Empty { op: "batch_norm" });
                }
                let mut mean = vec![T::zero(); c];
                for r in 0..rows {
                    for (m, &v) in mean.iter_mut().zip(&xv[r * c..(r + 1) * c]) {
                        *m += v;
                    }
                }
                let nr = T::from_f64(rows as f64);
                mean.iter_mut().for_each(|m| *m = *m / nr);
                let mut var = vec![T::zero(); c];
                for r in 0..rows {
                    for ((acc, &v), &m) in var.iter_mut().zip(&xv[r * c..(r + 1) * c]).zip(&mean) {
                        *acc += (v - m) * (v - m);
                    }
                }
                let unbiased = var
                    .iter()
                    .map(|&v| {
                        if rows > 1 {
                            v / T::from_f64((rows - 1) as f64)
                        } else {
                            v
                        }
                    })
                    .collect();
                var.iter_mut().for_each(|v| *v = *v / nr);
                let stats = BatchStats {
                    mean: mean.clone(),
                    var: unbiased,
                };
                (mean, var, Some(stats))
            }
            BnMode::Eval { mean, var } => {
                if mean.len() != c || var.len() != c {
                    return Err(shape_err("batch_norm", &s, &[mean.len(), var.len()]));
                }
                (mean.to_vec(), var.to_vec(), None)
            }
        };
        let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + eps).sqrt()).collect();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let mut xhat = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        for r in 0..rows {
            for j in 0..c {
                let i = r * c + j;
                xhat[i] = (xv[i] - mean[j]) * inv_std[j];
                out[i] = xhat[i] * g[j] + b[j];
            }
        }
        let batch_stats = stats.is_some();
        let rg = self.any_grad(&[x, gamma, beta]);
        let v = self.push(
            Tensor::new(&s, out)?,
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            },
            rg,
        );
        Ok((v, stats))
    }

    /// Layer normalization over the last axis.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var, AutodiffError> {
        let s = self.shape(x).to_vec();
        let c = *s.last().ok_or_else(|| shape_err("layer_norm", &s, &[]))?;
        for p in [gamma, beta] {
            if self.shape(p) != [c] {
                return Err(shape_err("layer_norm", &s, self.shape(p)));
            }
        }
        if c == 0 {
            return Err(AutodiffError::Empty { op: "layer_norm" });
        }
        let xv = self.value(x).data();
        let (g, b) = (self.value(gamma).data(), self.value(beta).data());
        let rows = xv.len() / c;
        let nc = T::from_f64(c as f64);
        let eps = T::from_f64(LN_EPS);
        let mut xhat = vec![T::zero(); xv.len()];
        let mut out = vec![T::zero(); xv.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let row = &xv[r * c..(r + 1) * c];
            let mean = row.iter().copied().sum::<T>() / nc;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nc;
            let is = T::one() / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat[r * c + j] = h;
                out[r * c + j] = h * g[j] + b[j];
            }
        }
        let rg = self.any_grad(&[x, gamma, beta]);
        Ok(self.push(
            Tensor::new(&s, out)?,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    /// `x·Wᵀ + b` on the last axis, with `W` stored `[out, in]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var, AutodiffError> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        if sx.is_empty() || sw.len() != 2 || sw[1] != sx[sx.len() - 1] {
            return Err(shape_err("affine", &sx, &sw));
        }
        let (nout, nin) = (sw[0], sw[1]);
        if let Some(b) = b {
            if self.shape(b) != [nout] {
                return Err(shape_err("affine", &sw, self.shape(b)));
            }
        }
        let rows = if nin == 0 {
            sx[..sx.len() - 1].iter().product()
        } else {
            self.value(x).numel() / nin
        };
        let mut out = vec![T::zero(); rows * nout];
        if let Some(b) = b {
            let bv = self.value(b).data();
            for r in 0..rows {
                out[r * nout..(r + 1) * nout].copy_from_slice(bv);
            }
        }
        let beta = if b.is_some() { T::one() } else { T::zero() };
        T::gemm(
            rows,
            nin,
            nout,
            self.value(x).data(),
            (nin as isize, 1),
            self.value(w).data(),
            (1, nin as isize),
            beta,
            &mut out,
            (nout as isize, 1),
        );
        let mut shape = sx;
        *shape.last_mut().unwrap() = nout;
        let mut inputs = vec![x, w];
        inputs.extend(b);
        let rg = self.any_grad(&inputs);
        Ok(self.push(Tensor::new(&shape, out)?, Op::Affine { x, w, b }, rg))
    }
}
