//! Reverse-mode rules, one arm per primitive.

use super::rigid::{procrustes_backward, quat_backward, to_mat3, SINGULAR_GAP};
use super::shape::{aligned_strides, axis_split, bcast_for_each, swap_axes};
use super::tape::{GradSink, Op};
use super::{AutodiffError, Scalar, Tape, Var};
use alloc::vec::Vec;

/// Accumulates `g·f(a, b)` into the gradient of the broadcast operand `x`.
fn reduce_into<T: Scalar>(
    sink: &mut GradSink<'_, T>,
    x: Var,
    out_shape: &[usize],
    g: &[T],
    factor: impl Fn(usize, usize) -> T,
    lhs: bool,
    other: Var,
) {
    let nodes = sink.nodes;
    let sx = nodes[x.0].value.shape();
    let so = nodes[other.0].value.shape();
    let Some(buf) = sink.buf(x) else { return };
    if sx == out_shape && so == out_shape {
        for (i, (b, &gi)) in buf.iter_mut().zip(g).enumerate() {
            *b += gi * factor(i, i);
        }
        return;
    }
    let tx = aligned_strides(sx, out_shape);
    let to = aligned_strides(so, out_shape);
    bcast_for_each(out_shape, &tx, &to, |o, ix, io| {
        let (ia, ib) = if lhs { (ix, io) } else { (io, ix) };
        buf[ix] += g[o] * factor(ia, ib);
    });
}

impl<T: Scalar> Tape<T> {
    pub(crate) fn backprop_node(
        &self,
        i: usize,
        g: &[T],
        grads: &mut [Option<Vec<T>>],
    ) -> Result<(), AutodiffError> {
        let node = &self.nodes[i];
        let out_shape = node.value.shape();
        let y = node.value.data();
        let mut sink = GradSink {
            nodes: &self.nodes,
            grads,
        };
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul {
                a,
                b,
                batch,
                n,
                k,
                m,
                shared_b,
            } => {
                let (batch, n, k, m) = (*batch, *n, *k, *m);
                let (ni, ki, mi) = (n as isize, k as isize, m as isize);
                if sink.wants(*a) {
                    let bv = val(*b);
                    let ga = sink.buf(*a).unwrap();
                    if *shared_b {
                        T::gemm(
                            batch * n,
                            m,
                            k,
                            g,
                            (mi, 1),
                            bv,
                            (1, mi),
                            T::one(),
                            ga,
                            (ki, 1),
                        );
                    } else {
                        for t in 0..batch {
                            T::gemm(
                                n,
                                m,
                                k,
                                &g[t * n * m..],
                                (mi, 1),
                                &bv[t * k * m..],
                                (1, mi),
                                T::one(),
                                &mut ga[t * n * k..(t + 1) * n * k],
                                (ki, 1),
                            );
                        }
                    }
                }
                if sink.wants(*b) {
                    let av = val(*a);
                    let gb = sink.buf(*b).unwrap();
                    if *shared_b {
                        T::gemm(
                            k,
                            batch * n,
                            m,
                            av,
                            (1, ki),
                            g,
                            (mi, 1),
                            T::one(),
                            gb,
                            (mi, 1),
                        );
                    } else {
                        for t in 0..batch {
                            T::gemm(
                                k,
                                n,
                                m,
                                &av[t * n * k..],
                                (1, ki),
                                &g[t * n * m..],
                                (mi, 1),
                                T::one(),
                                &mut gb[t * k * m..(t + 1) * k * m],
                                (mi, 1),
                            );
                        }
                    }
                }
                let _ = ni;
            }
            Op::Add(a, b) => {
                reduce_into(&mut sink, *a, out_shape, g, |_, _| T::one(), true, *b);
                reduce_into(&mut sink, *b, out_shape, g, |_, _| T::one(), false, *a);
            }
            Op::Sub(a, b) => {
                reduce_into(&mut sink, *a, out_shape, g, |_, _| T::one(), true, *b);
                reduce_into(&mut sink, *b, out_shape, g, |_, _| -T::one(), false, *a);
            }
            Op::Mul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                reduce_into(&mut sink, *a, out_shape, g, |_, ib| bv[ib], true, *b);
                reduce_into(&mut sink, *b, out_shape, g, |ia, _| av[ia], false, *a);
            }
            Op::Scale(a, c) => {
                if let Some(buf) = sink.buf(*a) {
                    buf.iter_mut().zip(g).for_each(|(b, &gi)| *b += gi * *c);
                }
            }
            Op::Relu(a) => {
                let av = val(*a);
                if let Some(buf) = sink.buf(*a) {
                    for ((b, &gi), &x) in buf.iter_mut().zip(g).zip(av) {
                        if x > T::zero() {
                            *b += gi;
                        }
                    }
                }
            }
            Op::Softmax { a, axis } => {
                let (outer, len, inner) = axis_split(out_shape, *axis);
                if let Some(buf) = sink.buf(*a) {
                    for o in 0..outer {
                        for c in 0..inner {
                            let at = |j: usize| (o * len + j) * inner + c;
                            let dot: T = (0..len).map(|j| g[at(j)] * y[at(j)]).sum();
                            for j in 0..len {
                                buf[at(j)] += y[at(j)] * (g[at(j)] - dot);
                            }
                        }
                    }
                }
            }
            Op::Max { a, axis, argmax } => {
                let (outer, len, inner) = axis_split(self.nodes[a.0].value.shape(), *axis);
                if let Some(buf) = sink.buf(*a) {
                    for o in 0..outer {
                        for c in 0..inner {
                            let r = o * inner + c;
                            buf[(o * len + argmax[r]) * inner + c] += g[r];
                        }
                    }
                }
            }
            Op::Sum { a, axis } | Op::Mean { a, axis } => {
                let (outer, len, inner) = axis_split(self.nodes[a.0].value.shape(), *axis);
                let w = match node.op {
                    Op::Mean { .. } => T::one() / T::from_f64(len as f64),
                    _ => T::one(),
                };
                if let Some(buf) = sink.buf(*a) {
                    for o in 0..outer {
                        for j in 0..len {
                            let dst = &mut buf[(o * len + j) * inner..(o * len + j + 1) * inner];
                            for (d, &gi) in dst.iter_mut().zip(&g[o * inner..(o + 1) * inner]) {
                                *d += gi * w;
                            }
                        }
                    }
                }
            }
            Op::Concat { parts, axis } => {
                let (outer, total, inner) = axis_split(out_shape, *axis);
                let mut at = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.shape()[*axis] * inner;
                    if let Some(buf) = sink.buf(*p) {
                        for o in 0..outer {
                            let src = &g[o * total * inner + at..o * total * inner + at + w];
                            for (d, &s) in buf[o * w..(o + 1) * w].iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                    at += w;
                }
            }
            Op::Gather { a, axis, index } => {
                let (outer, len, inner) = axis_split(self.nodes[a.0].value.shape(), *axis);
                if let Some(buf) = sink.buf(*a) {
                    for o in 0..outer {
                        for (r, &j) in index.iter().enumerate() {
                            let src = &g
                                [(o * index.len() + r) * inner..(o * index.len() + r + 1) * inner];
                            let dst = &mut buf[(o * len + j) * inner..(o * len + j + 1) * inner];
                            for (d, &s) in dst.iter_mut().zip(src) {
                                *d += s;
                            }
                        }
                    }
                }
            }
            Op::SwapAxes { a, d0, d1 } => {
                if sink.wants(*a) {
                    let back = swap_axes(g, out_shape, *d0, *d1);
                    let buf = sink.buf(*a).unwrap();
                    buf.iter_mut().zip(&back).for_each(|(b, &x)| *b += x);
                }
            }
            Op::Reshape(a) => {
                if let Some(buf) = sink.buf(*a) {
                    buf.iter_mut().zip(g).for_each(|(b, &x)| *b += x);
                }
            }
            Op::BatchNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
                batch_stats,
            } => {
                let c = inv_std.len();
                let rows = g.len() / c.max(1);
                let gam = val(*gamma);
                let mut sum_g = alloc::vec![T::zero(); c];
                let mut sum_gx = alloc::vec![T::zero(); c];
                for r in 0..rows {
                    for j in 0..c {
                        sum_g[j] += g[r * c + j];
                        sum_gx[j] += g[r * c + j] * xhat[r * c + j];
                    }
                }
                if let Some(buf) = sink.buf(*x) {
                    let nr = T::from_f64(rows as f64);
                    for r in 0..rows {
                        for j in 0..c {
                            let i = r * c + j;
                            buf[i] += if *batch_stats {
                                gam[j] * inv_std[j] / nr
                                    * (nr * g[i] - sum_g[j] - xhat[i] * sum_gx[j])
                            } else {
                                g[i] * gam[j] * inv_std[j]
                            };
                        }
                    }
                }
                if let Some(buf) = sink.buf(*gamma) {
                    buf.iter_mut().zip(&sum_gx).for_each(|(b, &s)| *b += s);
                }
                if let Some(buf) = sink.buf(*beta) {
                    buf.iter_mut().zip(&sum_g).for_each(|(b, &s)| *b += s);
                }
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            } => {
                let c = *out_shape.last().unwrap();
                let rows = inv_std.len();
                let gam = val(*gamma);
                if let Some(buf) = sink.buf(*x) {
                    let nc = T::from_f64(c as f64);
                    for r in 0..rows {
                        let gr = &g[r * c..(r + 1) * c];
                        let hr = &xhat[r * c..(r + 1) * c];
                        let mut s1 = T::zero();
                        let mut s2 = T::zero();
                        for j in 0..c {
                            let d = gr[j] * gam[j];
                            s1 += d;
                            s2 += d * hr[j];
                        }
                        for j in 0..c {
                            let d = gr[j] * gam[j];
                            buf[r * c + j] += inv_std[r] / nc * (nc * d - s1 - hr[j] * s2);
                        }
                    }
                }
                if let Some(buf) = sink.buf(*gamma) {
                    for r in 0..rows {
                        for j in 0..c {
                            buf[j] += g[r * c + j] * xhat[r * c + j];
                        }
                    }
                }
                if let Some(buf) = sink.buf(*beta) {
                    for r in 0..rows {
                        for j in 0..c {
                            buf[j] += g[r * c + j];
                        }
                    }
                }
            }
            Op::Affine { x, w, b } => {
                let sw = self.nodes[w.0].value.shape();
                let (nout, nin) = (sw[0], sw[1]);
                let rows = g.len() / nout.max(1);
                let (oi, ii) = (nout as isize, nin as isize);
                if sink.wants(*x) {
                    let wv = val(*w);
                    let gx = sink.buf(*x).unwrap();
                    T::gemm(
                        rows,
                        nout,
                        nin,
                        g,
                        (oi, 1),
                        wv,
                        (ii, 1),
                        T::one(),
                        gx,
                        (ii, 1),
                    );
                }
                if sink.wants(*w) {
                    let xv = val(*x);
                    let gw = sink.buf(*w).unwrap();
                    T::gemm(
                        nout,
                        rows,
                        nin,
                        g,
                        (1, oi),
                        xv,
                        (ii, 1),
                        T::one(),
                        gw,
                        (ii, 1),
                    );
                }
                if let Some(b) = b {
                    if let Some(buf) = sink.buf(*b) {
                        for r in 0..rows {
                            for j in 0..nout {
                                buf[j] += g[r * nout + j];
                            }
                        }
                    }
                }
            }
            Op::Procrustes { h, svd, singular } => {
                if !sink.wants(*h) {
                    return Ok(());
                }
                if let Some((gap, scale)) = *singular {
                    return Err(AutodiffError::GradientSingularity {
                        gap,
                        scale,
                        tol: SINGULAR_GAP,
                    });
                }
                let buf = sink.buf(*h).unwrap();
                for (bi, d) in svd.iter().enumerate() {
                    let gh = procrustes_backward(d, &to_mat3(&g[9 * bi..9 * bi + 9]));
                    for r in 0..3 {
                        for c in 0..3 {
                            buf[9 * bi + 3 * r + c] += T::from_f64(gh[(r, c)]);
                        }
                    }
                }
            }
            Op::QuatToRot { q } => {
                let qv = val(*q);
                if let Some(buf) = sink.buf(*q) {
                    for (bi, c) in qv.chunks_exact(4).enumerate() {
                        let p: [f64; 4] = core::array::from_fn(|i| c[i].as_f64());
                        let gg: [f64; 9] = core::array::from_fn(|i| g[9 * bi + i].as_f64());
                        let d = quat_backward(p, &gg);
                        for i in 0..4 {
                            buf[4 * bi + i] += T::from_f64(d[i]);
                        }
                    }
                }
            }
        }
        Ok(())
    }
}
