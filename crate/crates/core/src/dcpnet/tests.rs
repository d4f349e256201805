use super::*;
use crate::autodiff::{gradcheck, Tape, Tensor, Var};
use crate::dataio::shapes::builtin_corpus;
use crate::dataio::{generate_pair, PairGenConfig, PointCloud};
use crate::geometry::{EulerAngles, RigidTransform, Vec3};
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn random_cloud(n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PointCloud::new(
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect(),
    )
}

fn tiny(widths: &[usize], p: usize, k: usize) -> DcpConfig {
    DcpConfig {
        widths: widths.to_vec(),
        emb_dims: p,
        k,
        attn_dims: p,
        ff_dims: 2 * p,
        ..DcpConfig::v1()
    }
}

/// Weights with nonzero running statistics so eval-mode batch norm is not the identity.
fn params_f64(cfg: &DcpConfig, seed: u64) -> ModelParams<f64> {
    let mut p = ModelParams::<f64>::init(cfg, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    for e in p.entries_mut() {
        if e.name.ends_with(".bn.mean") {
            e.value
                .data_mut()
                .iter_mut()
                .for_each(|x| *x = 0.1 * rng.sample::<f64, _>(StandardNormal));
        } else if e.name.ends_with(".bn.var") {
            e.value
                .data_mut()
                .iter_mut()
                .for_each(|x| *x = 0.5 + rng.random::<f64>());
        }
    }
    p
}

fn embed_rows(params: &ModelParams<f64>, cloud: &PointCloud) -> Vec<Vec<f64>> {
    let k = (params.config.embedding == Embedding::Dgcnn).then_some(params.config.k);
    let batch = PairBatch::new(&[(cloud, cloud)], k).unwrap();
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params, false);
    let x = tape.constant(Tensor::new(&[1, batch.n, 3], batch.src.clone()).unwrap());
    let mut net = Layers::new(&mut tape, params, &vars, Mode::Eval);
    let f = net.embed(x, batch.src_graph.as_deref()).unwrap();
    let p = tape.shape(f)[2];
    tape.value(f).data().chunks(p).map(|r| r.to_vec()).collect()
}

#[test]
fn pointnet_rows_are_independent() {
    let cfg = DcpConfig {
        widths: vec![8, 8],
        emb_dims: 6,
        ..DcpConfig::pointnet()
    };
    let params = params_f64(&cfg, 1);
    let mut c = random_cloud(10, 2);
    c.points[7] = c.points[2];
    let rows = embed_rows(&params, &c);
    assert_eq!(rows[2], rows[7]);
    let perm = [3, 1, 4, 0, 9, 2, 6, 5, 8, 7];
    let permuted = embed_rows(&params, &c.permuted(&perm));
    for (i, &j) in perm.iter().enumerate() {
        assert_eq!(permuted[i], rows[j]);
    }
}

#[test]
fn pointnet_full_width_shape() {
    let params = ModelParams::<f32>::init(&DcpConfig::pointnet(), 0).unwrap();
    let c = random_cloud(1024, 3);
    let batch = PairBatch::new(&[(&c, &c)], None).unwrap();
    let mut tape = Tape::new();
    let vars = bind(&mut tape, &params, false);
    let x = tape.constant(
        Tensor::new(&[1, 1024, 3], batch.src.iter().map(|&v| v as f32).collect()).unwrap(),
    );
    let f = Layers::new(&mut tape, &params, &vars, Mode::Eval)
        .embed(x, None)
        .unwrap();
    assert_eq!(tape.shape(f), &[1, 1024, 512]);
}

/// EdgeConv through explicit concatenated edge features `[xᵢ, xⱼ − xᵢ]`.
fn edge_conv_oracle(
    x: &[f64],
    c: usize,
    nbrs: &[usize],
    k: usize,
    w: &[f64],
    out: usize,
    bn: (&[f64], &[f64], &[f64], &[f64]),
) -> Vec<f64> {
    let rows = x.len() / c;
    let mut res = vec![f64::NEG_INFINITY; rows * out];
    for i in 0..rows {
        for &j in &nbrs[i * k..(i + 1) * k] {
            let mut e = x[i * c..(i + 1) * c].to_vec();
            e.extend((0..c).map(|d| x[j * c + d] - x[i * c + d]));
            for o in 0..out {
                let pre: f64 = (0..2 * c).map(|d| w[o * 2 * c + d] * e[d]).sum();
                let (g, b, m, v) = (bn.0[o], bn.1[o], bn.2[o], bn.3[o]);
                let y = ((pre - m) / (v + crate::autodiff::BN_EPS).sqrt() * g + b).max(0.0);
                res[i * out + o] = res[i * out + o].max(y);
            }
        }
    }
    res
}

fn run_edge_conv(
    params: &ModelParams<f64>,
    x: &[f64],
    c: usize,
    nbrs: &[usize],
    k: usize,
) -> Vec<f64> {
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params, false);
    let xv = tape.constant(Tensor::new(&[x.len() / c, c], x.to_vec()).unwrap());
    let y = Layers::new(&mut tape, params, &vars, Mode::Eval)
        .edge_conv(xv, nbrs, k, "emb.0")
        .unwrap();
    tape.value(y).data().to_vec()
}

#[test]
fn edge_conv_matches_concatenated_form() {
    let cfg = tiny(&[5], 4, 3);
    let params = params_f64(&cfg, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x: Vec<f64> = (0..8 * 3).map(|_| rng.sample(StandardNormal)).collect();
    let nbrs: Vec<usize> = (0..8 * 3).map(|_| rng.random_range(0..8)).collect();
    let got = run_edge_conv(&params, &x, 3, &nbrs, 3);
    let g = |n: &str| params.get(n).unwrap().data();
    let want = edge_conv_oracle(
        &x,
        3,
        &nbrs,
        3,
        g("emb.0.weight"),
        5,
        (
            g("emb.0.bn.gamma"),
            g("emb.0.bn.beta"),
            g("emb.0.bn.mean"),
            g("emb.0.bn.var"),
        ),
    );
    for (a, b) in got.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }

    // reordering each neighbor list leaves the max unchanged
    let mut shuffled = nbrs.clone();
    for row in shuffled.chunks_mut(3) {
        row.rotate_left(1);
        row.swap(0, 1);
    }
    let again = run_edge_conv(&params, &x, 3, &shuffled, 3);
    for (a, b) in got.iter().zip(&again) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn edge_conv_constant_input_and_single_neighbor() {
    let cfg = tiny(&[5], 4, 1);
    let params = params_f64(&cfg, 5);
    let x: Vec<f64> = [0.3, -0.2, 0.9].repeat(6);
    let nbrs: Vec<usize> = vec![1, 2, 3, 4, 5, 0];
    let y = run_edge_conv(&params, &x, 3, &nbrs, 1);
    for row in y.chunks(5) {
        assert_eq!(row, &y[..5]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f64> = (0..18).map(|_| rng.sample(StandardNormal)).collect();
    let y = run_edge_conv(&params, &x, 3, &nbrs, 1);
    let g = |n: &str| params.get(n).unwrap().data();
    let want = edge_conv_oracle(
        &x,
        3,
        &nbrs,
        1,
        g("emb.0.weight"),
        5,
        (
            g("emb.0.bn.gamma"),
            g("emb.0.bn.beta"),
            g("emb.0.bn.mean"),
            g("emb.0.bn.var"),
        ),
    );
    for (a, b) in y.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dgcnn_shape_equivariance_and_rotation_sensitivity() {
    let cfg = tiny(&[8, 8, 16], 12, 5);
    let params = params_f64(&cfg, 6);
    let c = random_cloud(40, 7);
    let rows = embed_rows(&params, &c);
    assert_eq!((rows.len(), rows[0].len()), (40, 12));
    let perm: Vec<usize> = (0..40).map(|i| (i * 17 + 3) % 40).collect();
    let permuted = embed_rows(&params, &c.permuted(&perm));
    for (i, &j) in perm.iter().enumerate() {
        for (a, b) in permuted[i].iter().zip(&rows[j]) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    let rot = EulerAngles::from_degrees(30.0, 0.0, 0.0).to_rotation();
    let turned = PointCloud::new(c.points.iter().map(|p| rot * p).collect());
    let moved = embed_rows(&params, &turned);
    let diff: f64 = moved
        .iter()
        .flatten()
        .zip(rows.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .sum();
    assert!(diff > 1e-3);
}

#[test]
fn dynamic_graph_changes_embedding() {
    let mut cfg = tiny(&[8, 8], 8, 4);
    let params = params_f64(&cfg, 8);
    let c = random_cloud(30, 2);
    let stat = embed_rows(&params, &c);
    cfg.dynamic_graph = true;
    let mut dynp = params.clone();
    dynp.config = cfg;
    let dynamic = embed_rows(&dynp, &c);
    assert_eq!(dynamic.len(), 30);
    assert_ne!(stat, dynamic);
}

fn features(b: usize, n: usize, p: usize, seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(
        &[b, n, p],
        (0..b * n * p).map(|_| rng.sample(StandardNormal)).collect(),
    )
    .unwrap()
}

#[test]
fn zero_output_projection_is_identity_residual() {
    let cfg = DcpConfig {
        attention: true,
        ..tiny(&[4], 8, 3)
    };
    let params = params_f64(&cfg, 3);
    let mut tape = Tape::new();
    let vars = bind(&mut tape, &params, false);
    let fx = tape.constant(features(1, 6, 8, 1));
    let fy = tape.constant(features(1, 9, 8, 2));
    let mut net = Layers::new(&mut tape, &params, &vars, Mode::Eval);
    let r = net.phi(fx, fy).unwrap();
    let phi_x = tape.add(fx, r).unwrap();
    assert_eq!(tape.value(phi_x), tape.value(fx));
}

fn randomize(params: &mut ModelParams<f64>, prefix: &str, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for e in params.entries_mut() {
        if e.name.starts_with(prefix) {
            e.value
                .data_mut()
                .iter_mut()
                .for_each(|x| *x = 0.3 * rng.sample::<f64, _>(StandardNormal));
        }
    }
}

#[test]
fn attention_is_asymmetric_and_shape_preserving() {
    let cfg = DcpConfig {
        attention: true,
        attn_dims: 16,
        ff_dims: 32,
        ..tiny(&[4], 8, 3)
    };
    let mut params = params_f64(&cfg, 3);
    randomize(&mut params, "attn.out", 4);
    let mut tape = Tape::new();
    let vars = bind(&mut tape, &params, false);
    let fx = tape.constant(features(1, 8, 8, 1));
    let fy = tape.constant(features(1, 8, 8, 2));
    let mut net = Layers::new(&mut tape, &params, &vars, Mode::Eval);
    let a = net.phi(fx, fy).unwrap();
    let b = net.phi(fy, fx).unwrap();
    assert_ne!(tape.value(a), tape.value(b));
    for n in [8, 64, 1024] {
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &params, false);
        let fx = tape.constant(features(1, n, 8, 5));
        let fy = tape.constant(features(1, n, 8, 6));
        let r = Layers::new(&mut tape, &params, &vars, Mode::Eval)
            .phi(fx, fy)
            .unwrap();
        assert_eq!(tape.shape(r), &[1, n, 8]);
    }
}

#[test]
fn pointer_cases() {
    let mut tape = Tape::<f64>::new();
    let eye = Tensor::new(
        &[1, 3, 3],
        vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
    )
    .unwrap();
    let a = tape.constant(eye.clone());
    let w = pointer_softmatch(&mut tape, a, a, false).unwrap();
    for (i, row) in tape.value(w).data().chunks(3).enumerate() {
        let best = (0..3)
            .max_by(|&x, &y| row[x].partial_cmp(&row[y]).unwrap())
            .unwrap();
        assert_eq!(best, i);
    }
    let z = tape.constant(Tensor::zeros(&[1, 2, 4]));
    let z5 = tape.constant(Tensor::zeros(&[1, 5, 4]));
    let w = pointer_softmatch(&mut tape, z, z5, false).unwrap();
    assert!(tape
        .value(w)
        .data()
        .iter()
        .all(|&v| (v - 0.2).abs() < 1e-15));
    // logits (0, ln 3) from one-dimensional embeddings
    let px = tape.constant(Tensor::new(&[1, 1, 1], vec![1.0]).unwrap());
    let py = tape.constant(Tensor::new(&[1, 2, 1], vec![0.0, 3f64.ln()]).unwrap());
    let w = pointer_softmatch(&mut tape, px, py, false).unwrap();
    let v = tape.value(w).data();
    assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.75).abs() < 1e-15);
}

#[test]
fn soft_correspondence_cases() {
    let mut tape = Tape::<f64>::new();
    let y = random_cloud(4, 3);
    let yflat: Vec<f64> = y.points.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
    let yv = tape.constant(Tensor::new(&[1, 4, 3], yflat.clone()).unwrap());
    let onehot = tape
        .constant(Tensor::new(&[1, 2, 4], vec![0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0]).unwrap());
    let yh = soft_correspondence(&mut tape, onehot, yv).unwrap();
    assert_eq!(
        tape.value(yh).data(),
        [&yflat[6..9], &yflat[0..3]].concat().as_slice()
    );
    let uniform = tape.constant(Tensor::full(&[1, 3, 4], 0.25));
    let yh = soft_correspondence(&mut tape, uniform, yv).unwrap();
    let c = y.centroid();
    for row in tape.value(yh).data().chunks(3) {
        assert!(
            (row[0] - c.x).abs() < 1e-15
                && (row[1] - c.y).abs() < 1e-15
                && (row[2] - c.z).abs() < 1e-15
        );
    }
    let logits = tape.constant(features(1, 6, 4, 3));
    let w = tape.softmax(logits, 2).unwrap();
    let yh = soft_correspondence(&mut tape, w, yv).unwrap();
    for row in tape.value(yh).data().chunks(3) {
        for d in 0..3 {
            let col = yflat.iter().skip(d).step_by(3);
            let (lo, hi) = col.fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
                (l.min(v), h.max(v))
            });
            assert!(row[d] >= lo - 1e-15 && row[d] <= hi + 1e-15);
        }
    }
}

fn pairs(count: usize, n: usize, seed: u64) -> Vec<(PointCloud, PointCloud, RigidTransform)> {
    let clouds = builtin_corpus(count, n, seed).unwrap();
    let cfg = PairGenConfig {
        n_points: n,
        seed,
        ..PairGenConfig::default()
    };
    let mut rng = cfg.rng();
    clouds
        .iter()
        .map(|c| {
            let p = generate_pair(c, &cfg, &mut rng).unwrap();
            (p.source, p.target, p.ground_truth)
        })
        .collect()
}

fn forward(
    params: &ModelParams<f64>,
    x: &PointCloud,
    y: &PointCloud,
    mode: Mode,
) -> (RigidTransform, Vec<f64>) {
    let pb = PairBatch::new(&[(x, y)], Some(params.config.k)).unwrap();
    let mut tape = Tape::new();
    let vars = bind(&mut tape, params, false);
    let o = dcp_forward(&mut tape, params, &vars, &pb, mode).unwrap();
    let t = read_transforms(&tape, &o).unwrap().remove(0);
    (
        t,
        tape.value(o.rotation)
            .data()
            .iter()
            .chain(tape.value(o.translation).data())
            .copied()
            .collect(),
    )
}

#[test]
fn untrained_output_is_a_rigid_transform() {
    let params = params_f64(&tiny(&[8, 8], 16, 5), 2);
    let c = random_cloud(32, 4);
    let (_, raw) = forward(&params, &c, &c, Mode::Eval);
    let r = crate::geometry::Mat3::from_row_slice(&raw[..9]);
    assert!(crate::geometry::rotation_residual(&r) < 1e-10);
}

#[test]
fn v2_with_zero_projection_equals_v1() {
    let v1 = params_f64(&tiny(&[8, 8, 16], 16, 6), 11);
    let v2cfg = DcpConfig {
        attention: true,
        ..v1.config.clone()
    };
    let fresh = params_f64(&v2cfg, 11);
    // same embedding weights, fresh attention weights with zero output projection
    let mut stored: Vec<_> = v1
        .entries()
        .iter()
        .map(|e| (e.name.clone(), e.value.clone()))
        .collect();
    stored.extend(
        fresh
            .entries()
            .iter()
            .filter(|e| e.name.starts_with("attn."))
            .map(|e| (e.name.clone(), e.value.clone())),
    );
    let v2 = ModelParams::from_entries(v2cfg, stored).unwrap();
    for (x, y, _) in pairs(20, 48, 1) {
        for mode in [Mode::Eval, Mode::Train] {
            assert_eq!(forward(&v1, &x, &y, mode).1, forward(&v2, &x, &y, mode).1);
        }
    }
}

#[test]
fn transform_ignores_source_order() {
    let params = params_f64(&tiny(&[8, 8], 16, 5), 12);
    for (x, y, _) in pairs(5, 40, 3) {
        let perm: Vec<usize> = (0..40).map(|i| (i * 7 + 5) % 40).collect();
        let (a, _) = forward(&params, &x, &y, Mode::Eval);
        let (b, _) = forward(&params, &x.permuted(&perm), &y, Mode::Eval);
        assert!((a.rotation - b.rotation).abs().max() < 1e-5);
        assert!((a.translation - b.translation).abs().max() < 1e-5);
    }
}

#[test]
fn soft_match_rows_are_stochastic() {
    let params = ModelParams::<f32>::init(&tiny(&[8, 8], 16, 5), 2).unwrap();
    for (x, y, _) in pairs(10, 32, 5) {
        let pb = PairBatch::new(&[(&x, &y)], Some(5)).unwrap();
        let mut tape = Tape::new();
        let vars = bind(&mut tape, &params, false);
        let o = dcp_forward(&mut tape, &params, &vars, &pb, Mode::Train).unwrap();
        let w = tape.value(o.soft_match.unwrap());
        for row in w.data().chunks(32) {
            let s: f32 = row.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}

#[test]
fn loss_examples() {
    let gt = RigidTransform::new(
        EulerAngles::from_degrees(20.0, 5.0, -10.0).to_rotation(),
        Vec3::new(0.1, 0.2, 0.3),
    )
    .unwrap();
    assert!(transform_loss(&gt, &gt).abs() < 1e-24);
    let shifted =
        RigidTransform::new(gt.rotation, gt.translation + Vec3::new(1.0, 0.0, 0.0)).unwrap();
    assert!((transform_loss(&shifted, &gt) - 1.0).abs() < 1e-12);
    let flipped = RigidTransform::new(
        gt.rotation * crate::geometry::rot_z(core::f64::consts::PI),
        gt.translation,
    )
    .unwrap();
    assert!((transform_loss(&flipped, &gt) - 8.0).abs() < 1e-12);

    // the tape version agrees
    let mut tape = Tape::<f64>::new();
    let r: Vec<f64> = [flipped, shifted]
        .iter()
        .flat_map(|t| (0..9).map(move |i| t.rotation[(i / 3, i % 3)]))
        .collect();
    let t: Vec<f64> = [flipped, shifted]
        .iter()
        .flat_map(|t| [t.translation.x, t.translation.y, t.translation.z])
        .collect();
    let rv = tape.constant(Tensor::new(&[2, 3, 3], r).unwrap());
    let tv = tape.constant(Tensor::new(&[2, 3], t).unwrap());
    let l = dcp_loss(&mut tape, rv, tv, &[gt, gt]).unwrap();
    assert!((tape.value(l).item().unwrap() - 4.5).abs() < 1e-12);
}

/// `batch` must exceed 2 when a batch norm sits on per-cloud features: with
/// two samples its output is ±1 regardless of input and the gradient vanishes.
fn loss_gradcheck(cfg: &DcpConfig, seed: u64, batch: usize, names: &[&str]) -> f64 {
    let params = params_f64(cfg, seed);
    let data = pairs(batch, 8, seed);
    let refs: Vec<(&PointCloud, &PointCloud)> = data.iter().map(|(x, y, _)| (x, y)).collect();
    let gts: Vec<RigidTransform> = data.iter().map(|p| p.2).collect();
    let pb = PairBatch::new(&refs, Some(cfg.k)).unwrap();
    let inputs: Vec<Tensor<f64>> = names
        .iter()
        .map(|n| params.get(n).unwrap().clone())
        .collect();
    let r = gradcheck(&inputs, 1e-6, |tape, vars| {
        let mut all: Vec<Var> = bind(tape, &params, false);
        for (n, v) in names.iter().zip(vars) {
            all[params.position(n).unwrap()] = *v;
        }
        let o = dcp_forward(tape, &params, &all, &pb, Mode::Train).map_err(|e| match e {
            DcpError::Autodiff(a) => a,
            other => panic!("{other}"),
        })?;
        dcp_loss(tape, o.rotation, o.translation, &gts).map_err(|e| match e {
            DcpError::Autodiff(a) => a,
            other => panic!("{other}"),
        })
    })
    .unwrap();
    r.max_rel_error
}

#[test]
fn tiny_model_gradient_matches_finite_differences() {
    let cfg = tiny(&[4, 4], 8, 3);
    let err = loss_gradcheck(
        &cfg,
        21,
        2,
        &["emb.0.weight", "emb.1.bn.gamma", "emb.2.weight"],
    );
    assert!(err < 1e-4, "{err}");
    let v2 = DcpConfig {
        attention: true,
        ..cfg.clone()
    };
    let err = loss_gradcheck(&v2, 22, 2, &["attn.out.weight", "emb.2.weight"]);
    assert!(err < 1e-4, "{err}");
}

#[test]
fn mlp_head_is_rigid_and_differentiable() {
    let cfg = DcpConfig {
        head: Head::Mlp,
        mlp_widths: vec![8, 6, 4],
        ..tiny(&[4, 4], 8, 3)
    };
    let params = params_f64(&cfg, 5);
    for (x, y, _) in pairs(3, 16, 2) {
        let (_, raw) = forward(&params, &x, &y, Mode::Eval);
        let r = crate::geometry::Mat3::from_row_slice(&raw[..9]);
        assert!(crate::geometry::rotation_residual(&r) < 1e-10);
        assert!(raw.iter().all(|v| v.is_finite()));
    }
    let err = loss_gradcheck(
        &cfg,
        23,
        4,
        &[
            "head.fc0.weight",
            "head.fc1.bn.gamma",
            "head.quat.weight",
            "head.trans.bias",
            "emb.1.weight",
        ],
    );
    assert!(err < 1e-4, "{err}");
}

#[test]
fn running_stats_follow_momentum() {
    let mut p = ModelParams::<f64>::init(&tiny(&[4], 4, 3), 0).unwrap();
    let pos = p.position("emb.0.bn.mean").unwrap();
    let stats = crate::autodiff::BatchStats {
        mean: vec![1.0; 4],
        var: vec![3.0; 4],
    };
    apply_bn_updates(&mut p, &[(pos, stats)], BN_MOMENTUM);
    assert!(p
        .get("emb.0.bn.mean")
        .unwrap()
        .data()
        .iter()
        .all(|&m| (m - 0.1).abs() < 1e-15));
    assert!(p
        .get("emb.0.bn.var")
        .unwrap()
        .data()
        .iter()
        .all(|&v| (v - 1.2).abs() < 1e-15));
}
