//! Central finite-difference comparison for `f64` graphs.

use super::{AutodiffError, Tape, Tensor, Var};
use alloc::vec::Vec;
use num_traits::Float;

/// Outcome of [`gradcheck`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    /// Largest `‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖)` over inputs.
    pub max_rel_error: f64,
    /// Input achieving it.
    pub worst_input: usize,
    /// Largest elementwise `|analytic − numeric|` over all inputs.
    pub max_abs_error: f64,
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    Float::sqrt(v.map(|x| x * x).sum::<f64>())
}

/// Compares the reverse-mode gradient of the scalar produced by `build` with
/// central differences of step `h`, for every element of every input.
pub fn gradcheck<F>(inputs: &[Tensor<f64>], h: f64, build: F) -> Result<GradCheck, AutodiffError>
where
    F: Fn(&mut Tape<f64>, &[Var]) -> Result<Var, AutodiffError>,
{
    let eval = |vals: &[Tensor<f64>]| -> Result<f64, AutodiffError> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.constant(t.clone())).collect();
        let out = build(&mut tape, &vars)?;
        tape.value(out)
            .item()
            .ok_or_else(|| AutodiffError::NotScalar {
                shape: tape.shape(out).to_vec(),
            })
    };

    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = build(&mut tape, &vars)?;
    tape.backward(out)?;

    let mut report = GradCheck {
        max_rel_error: 0.0,
        worst_input: 0,
        max_abs_error: 0.0,
    };
    let mut work = inputs.to_vec();
    for (k, &v) in vars.iter().enumerate() {
        let analytic: Vec<f64> = match tape.grad(v) {
            Some(g) => g.to_vec(),
            None => alloc::vec![0.0; inputs[k].numel()],
        };
        let mut numeric = Vec::with_capacity(analytic.len());
        for i in 0..inputs[k].numel() {
            let x0 = inputs[k].data()[i];
            work[k].data_mut()[i] = x0 + h;
            let up = eval(&work)?;
            work[k].data_mut()[i] = x0 - h;
            let down = eval(&work)?;
            work[k].data_mut()[i] = x0;
            numeric.push((up - down) / (2.0 * h));
        }
        for (a, n) in analytic.iter().zip(&numeric) {
            report.max_abs_error = report.max_abs_error.max((a - n).abs());
        }
        let diff = norm(analytic.iter().zip(&numeric).map(|(a, n)| a - n));
        let scale = norm(analytic.iter().copied()).max(norm(numeric.iter().copied()));
        let rel = if scale == 0.0 { 0.0 } else { diff / scale };
        if rel > report.max_rel_error {
            report.max_rel_error = rel;
            report.worst_input = k;
        }
    }
    Ok(report)
}

use super::{procrustes_rotation, quat_to_rotation, svd_rigid_head, BnMode};
use crate::geometry::{svd3, Mat3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Builder = fn(&mut Tape<f64>, &[Var]) -> Result<Var, AutodiffError>;

struct Case {
    name: &'static str,
    inputs: fn(&mut ChaCha8Rng) -> Vec<Tensor<f64>>,
    build: Builder,
}

fn gauss(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.sample(StandardNormal)).collect()).unwrap()
}

/// Entries bounded away from zero, for the relu kink.
fn off_kink(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let mut t = gauss(rng, shape);
    for x in t.data_mut() {
        *x += 0.01 * x.signum();
    }
    t
}

/// Distinct, well separated entries so a finite-difference step never flips an argmax.
fn separated(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    let n: usize = shape.iter().product();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let data = perm
        .iter()
        .map(|&p| p as f64 * 0.1 + 0.01 * rng.random::<f64>() - 0.5 * n as f64 * 0.1)
        .collect();
    Tensor::new(shape, data).unwrap()
}

/// 3×3 blocks whose Procrustes gradient is well defined (`s1 + s2 > 1e-3`).
fn good_h(rng: &mut ChaCha8Rng, blocks: usize) -> Tensor<f64> {
    let mut data = Vec::with_capacity(9 * blocks);
    while data.len() < 9 * blocks {
        let m: [f64; 9] = core::array::from_fn(|_| rng.sample(StandardNormal));
        let d = svd3(&Mat3::from_row_slice(&m)).unwrap();
        if d.s[1] + d.s[2] > 1e-3 && d.s[0] - d.s[1] > 1e-3 && d.s[1] - d.s[2].abs() > 1e-3 {
            data.extend_from_slice(&m);
        }
    }
    let shape = if blocks == 1 {
        alloc::vec![3, 3]
    } else {
        alloc::vec![blocks, 3, 3]
    };
    Tensor::new(&shape, data).unwrap()
}

/// Contracts `y` with a fixed pseudo-random weight so every output entry
/// contributes to the scalar.
fn project(tape: &mut Tape<f64>, y: Var) -> Result<Var, AutodiffError> {
    let shape = tape.shape(y).to_vec();
    let n: usize = shape.iter().product();
    let w = (0..n)
        .map(|i| 0.3 + ((i * 7919) % 13) as f64 / 13.0 * if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let w = tape.constant(Tensor::new(&shape, w)?);
    let p = tape.mul(y, w)?;
    Ok(tape.sum_all(p))
}

fn cases() -> Vec<Case> {
    alloc::vec![
        Case {
            name: "matmul",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 4]), gauss(r, &[2, 4, 5])],
            build: |t, v| {
                let y = t.matmul(v[0], v[1])?;
                project(t, y)
            },
        },
        Case {
            name: "matmul_shared",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 4]), gauss(r, &[4, 5])],
            build: |t, v| {
                let y = t.matmul(v[0], v[1])?;
                project(t, y)
            },
        },
        Case {
            name: "add",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 4]), gauss(r, &[3, 1])],
            build: |t, v| {
                let y = t.add(v[0], v[1])?;
                project(t, y)
            },
        },
        Case {
            name: "sub",
            inputs: |r| alloc::vec![gauss(r, &[4]), gauss(r, &[2, 3, 4])],
            build: |t, v| {
                let y = t.sub(v[0], v[1])?;
                project(t, y)
            },
        },
        Case {
            name: "mul",
            inputs: |r| alloc::vec![gauss(r, &[2, 1, 4]), gauss(r, &[3, 1])],
            build: |t, v| {
                let y = t.mul(v[0], v[1])?;
                project(t, y)
            },
        },
        Case {
            name: "scale",
            inputs: |r| alloc::vec![gauss(r, &[3, 2])],
            build: |t, v| {
                let y = t.scale(v[0], -1.7);
                project(t, y)
            },
        },
        Case {
            name: "relu",
            inputs: |r| alloc::vec![off_kink(r, &[3, 5])],
            build: |t, v| {
                let y = t.relu(v[0]);
                project(t, y)
            },
        },
        Case {
            name: "softmax",
            inputs: |r| alloc::vec![gauss(r, &[2, 4, 3])],
            build: |t, v| {
                let a = t.softmax(v[0], 1)?;
                let b = t.softmax(v[0], 2)?;
                let y = t.add(a, b)?;
                project(t, y)
            },
        },
        Case {
            name: "max",
            inputs: |r| alloc::vec![separated(r, &[3, 4, 2])],
            build: |t, v| {
                let y = t.max(v[0], 1)?;
                project(t, y)
            },
        },
        Case {
            name: "sum",
            inputs: |r| alloc::vec![gauss(r, &[3, 4, 2])],
            build: |t, v| {
                let y = t.sum(v[0], 2)?;
                project(t, y)
            },
        },
        Case {
            name: "mean",
            inputs: |r| alloc::vec![gauss(r, &[3, 4, 2])],
            build: |t, v| {
                let y = t.mean(v[0], 0)?;
                project(t, y)
            },
        },
        Case {
            name: "concat",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 2]), gauss(r, &[2, 1, 2])],
            build: |t, v| {
                let y = t.concat(&[v[0], v[1], v[0]], 1)?;
                project(t, y)
            },
        },
        Case {
            name: "gather",
            inputs: |r| alloc::vec![gauss(r, &[5, 3])],
            build: |t, v| {
                let y = t.gather(v[0], 0, &[4, 0, 0, 2])?;
                project(t, y)
            },
        },
        Case {
            name: "transpose",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 4])],
            build: |t, v| {
                let y = t.transpose(v[0], 0, 2)?;
                project(t, y)
            },
        },
        Case {
            name: "reshape",
            inputs: |r| alloc::vec![gauss(r, &[2, 6])],
            build: |t, v| {
                let y = t.reshape(v[0], &[3, 4])?;
                project(t, y)
            },
        },
        Case {
            name: "batch_norm_train",
            inputs: |r| alloc::vec![gauss(r, &[6, 3]), gauss(r, &[3]), gauss(r, &[3])],
            build: |t, v| {
                let (y, _) = t.batch_norm(v[0], v[1], v[2], BnMode::Train)?;
                project(t, y)
            },
        },
        Case {
            name: "batch_norm_eval",
            inputs: |r| alloc::vec![gauss(r, &[2, 4, 3]), gauss(r, &[3]), gauss(r, &[3])],
            build: |t, v| {
                let mean = [0.1, -0.2, 0.3];
                let var = [0.5, 1.5, 2.0];
                let (y, _) = t.batch_norm(
                    v[0],
                    v[1],
                    v[2],
                    BnMode::Eval {
                        mean: &mean,
                        var: &var,
                    },
                )?;
                project(t, y)
            },
        },
        Case {
            name: "layer_norm",
            inputs: |r| alloc::vec![gauss(r, &[4, 5]), gauss(r, &[5]), gauss(r, &[5])],
            build: |t, v| {
                let y = t.layer_norm(v[0], v[1], v[2])?;
                project(t, y)
            },
        },
        Case {
            name: "affine",
            inputs: |r| alloc::vec![gauss(r, &[2, 3, 4]), gauss(r, &[5, 4]), gauss(r, &[5])],
            build: |t, v| {
                let y = t.affine(v[0], v[1], Some(v[2]))?;
                project(t, y)
            },
        },
        Case {
            name: "procrustes_rotation",
            inputs: |r| alloc::vec![good_h(r, 2)],
            build: |t, v| {
                let y = procrustes_rotation(t, v[0])?;
                project(t, y)
            },
        },
        Case {
            name: "quat_to_rotation",
            inputs: |r| alloc::vec![gauss(r, &[2, 4])],
            build: |t, v| {
                let y = quat_to_rotation(t, v[0])?;
                project(t, y)
            },
        },
        Case {
            name: "svd_rigid_head",
            inputs: |r| alloc::vec![gauss(r, &[2, 6, 3]), gauss(r, &[2, 6, 3])],
            build: |t, v| {
                let (rot, tr) = svd_rigid_head(t, v[0], v[1])?;
                let a = project(t, rot)?;
                let b = project(t, tr)?;
                t.add(a, b)
            },
        },
    ]
}

/// Runs the finite-difference check of every primitive at `points` random
/// inputs and reports the worst case per primitive.
pub fn primitive_suite(
    points: usize,
    seed: u64,
    h: f64,
) -> Result<Vec<(&'static str, GradCheck)>, AutodiffError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for case in cases() {
        let mut worst = GradCheck {
            max_rel_error: 0.0,
            worst_input: 0,
            max_abs_error: 0.0,
        };
        for _ in 0..points {
            let inputs = (case.inputs)(&mut rng);
            let r = gradcheck(&inputs, h, case.build)?;
            if r.max_rel_error >= worst.max_rel_error {
                worst = r;
            }
        }
        out.push((case.name, worst));
    }
    Ok(out)
}
