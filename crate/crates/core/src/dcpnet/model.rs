use super::knn::{knn_features, knn_graph};
use super::{DcpError, Embedding, Head, ModelParams};
use crate::autodiff::{
    quat_to_rotation, svd_rigid_head, BatchStats, BnMode, Scalar, Tape, Tensor, Var,
};
use crate::dataio::PointCloud;
use crate::geometry::{Mat3, RigidTransform, Vec3};
use alloc::format;
use alloc::vec::Vec;

/// Whether batch normalization uses batch or running statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A batch of equally sized source/target clouds, flattened row-major.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pub batch: usize,
    pub n: usize,
    pub m: usize,
    pub src: Vec<f64>,
    pub dst: Vec<f64>,
    /// Static DGCNN graphs with batch-global indices, when `k` was given.
    pub src_graph: Option<Vec<usize>>,
    pub dst_graph: Option<Vec<usize>>,
}

fn batch_graph(clouds: &[&PointCloud], k: usize) -> Result<Vec<usize>, DcpError> {
    let mut out = Vec::new();
    for (b, c) in clouds.iter().enumerate() {
        let g = knn_graph(&c.points, k)?;
        out.extend(g.neighbors.iter().map(|&j| j + b * c.len()));
    }
    Ok(out)
}

impl PairBatch {
    /// `k` is the DGCNN neighbor count; pass `None` for embeddings without a graph.
    pub fn new(pairs: &[(&PointCloud, &PointCloud)], k: Option<usize>) -> Result<Self, DcpError> {
        let (first_x, first_y) = pairs.first().ok_or(DcpError::EmptyBatch)?;
        let (n, m) = (first_x.len(), first_y.len());
        if n < 3 || m < 1 {
            return Err(DcpError::BatchShape {
                expected: (3, 1),
                found: (n, m),
            });
        }
        for (x, y) in pairs {
            if x.len() != n || y.len() != m {
                return Err(DcpError::BatchShape {
                    expected: (n, m),
                    found: (x.len(), y.len()),
                });
            }
        }
        let flat = |c: &PointCloud| {
            c.points
                .iter()
                .flat_map(|p| [p.x, p.y, p.z])
                .collect::<Vec<_>>()
        };
        let xs: Vec<&PointCloud> = pairs.iter().map(|p| p.0).collect();
        let ys: Vec<&PointCloud> = pairs.iter().map(|p| p.1).collect();
        let (src_graph, dst_graph) = match k {
            Some(k) => (Some(batch_graph(&xs, k)?), Some(batch_graph(&ys, k)?)),
            None => (None, None),
        };
        Ok(Self {
            batch: pairs.len(),
            n,
            m,
            src: xs.iter().flat_map(|c| flat(c)).collect(),
            dst: ys.iter().flat_map(|c| flat(c)).collect(),
            src_graph,
            dst_graph,
        })
    }
}

/// Values produced by one forward pass.
pub struct DcpOutput<T> {
    /// `[B, 3, 3]`
    pub rotation: Var,
    /// `[B, 3]`
    pub translation: Var,
    /// Row-stochastic `[B, N, M]` pointer weights (SVD head only).
    pub soft_match: Option<Var>,
    /// Embeddings after the optional attention residual, `[B, N, P]` and `[B, M, P]`.
    pub phi: (Var, Var),
    /// Batch statistics per normalization layer, keyed by the position of
    /// its running mean in the parameter list.
    pub bn_updates: Vec<(usize, BatchStats<T>)>,
}

/// Registers every trainable array on `tape`, as a differentiable input when
/// `trainable` is set and as a constant otherwise.
pub fn bind<T: Scalar>(tape: &mut Tape<T>, params: &ModelParams<T>, trainable: bool) -> Vec<Var> {
    params
        .entries()
        .iter()
        .map(|e| {
            if trainable && e.trainable {
                tape.param(e.value.clone())
            } else {
                tape.constant(e.value.clone())
            }
        })
        .collect()
}

/// The network layers over one tape, reading weights through `vars`
/// (as returned by [`bind`]).
pub struct Layers<'a, T> {
    pub tape: &'a mut Tape<T>,
    params: &'a ModelParams<T>,
    vars: &'a [Var],
    mode: Mode,
    bn_updates: Vec<(usize, BatchStats<T>)>,
}

impl<'a, T: Scalar> Layers<'a, T> {
    pub fn new(
        tape: &'a mut Tape<T>,
        params: &'a ModelParams<T>,
        vars: &'a [Var],
        mode: Mode,
    ) -> Self {
        Self {
            tape,
            params,
            vars,
            mode,
            bn_updates: Vec::new(),
        }
    }

    /// Batch statistics gathered so far, for [`super::apply_bn_updates`].
    pub fn into_bn_updates(self) -> Vec<(usize, BatchStats<T>)> {
        self.bn_updates
    }

    fn p(&self, name: &str) -> Var {
        let i = self
            .params
            .position(name)
            .unwrap_or_else(|| panic!("parameter {name} missing from layout"));
        self.vars[i]
    }

    fn linear(&mut self, x: Var, name: &str, bias: bool) -> Result<Var, DcpError> {
        let w = self.p(&format!("{name}.weight"));
        let b = bias.then(|| self.p(&format!("{name}.bias")));
        Ok(self.tape.affine(x, w, b)?)
    }

    fn batch_norm(&mut self, x: Var, name: &str) -> Result<Var, DcpError> {
        let (g, b) = (
            self.p(&format!("{name}.gamma")),
            self.p(&format!("{name}.beta")),
        );
        let mean_name = format!("{name}.mean");
        let params = self.params;
        let (y, stats) = match self.mode {
            Mode::Train => self.tape.batch_norm(x, g, b, BnMode::Train)?,
            Mode::Eval => {
                let mean = params.get(&mean_name).expect("running mean").data();
                let var = params
                    .get(&format!("{name}.var"))
                    .expect("running var")
                    .data();
                self.tape.batch_norm(x, g, b, BnMode::Eval { mean, var })?
            }
        };
        if let Some(s) = stats {
            self.bn_updates
                .push((params.position(&mean_name).unwrap(), s));
        }
        Ok(y)
    }

    /// EdgeConv on rows `x: [R, C]` with batch-global neighbor lists.
    ///
    /// The edge map `W·[xᵢ, xⱼ − xᵢ]` is evaluated as
    /// `(W_a − W_b)·xᵢ + W_b·xⱼ`, so the per-point products are computed
    /// once instead of once per edge.
    pub fn edge_conv(
        &mut self,
        x: Var,
        nbrs: &[usize],
        k: usize,
        name: &str,
    ) -> Result<Var, DcpError> {
        let (rows, c) = (self.tape.shape(x)[0], self.tape.shape(x)[1]);
        let w = self.p(&format!("{name}.weight"));
        let out = self.tape.shape(w)[0];
        let wa = self.tape.narrow(w, 1, 0, c)?;
        let wb = self.tape.narrow(w, 1, c, c)?;
        let wd = self.tape.sub(wa, wb)?;
        let centre = self.tape.affine(x, wd, None)?;
        let centre = self.tape.reshape(centre, &[rows, 1, out])?;
        let nb = self.tape.affine(x, wb, None)?;
        let nb = self.tape.gather(nb, 0, nbrs)?;
        let nb = self.tape.reshape(nb, &[rows, k, out])?;
        let pre = self.tape.add(nb, centre)?;
        let h = self.batch_norm(pre, &format!("{name}.bn"))?;
        let h = self.tape.relu(h);
        Ok(self.tape.max(h, 1)?)
    }

    fn dynamic_graph(&self, x: Var, batch: usize, k: usize) -> Result<Vec<usize>, DcpError> {
        let (rows, c) = (self.tape.shape(x)[0], self.tape.shape(x)[1]);
        let n = rows / batch;
        let data = self.tape.value(x).data();
        let mut out = Vec::with_capacity(rows * k);
        for b in 0..batch {
            let g = knn_features(&data[b * n * c..(b + 1) * n * c], n, c, k)?;
            out.extend(g.neighbors.iter().map(|&j| j + b * n));
        }
        Ok(out)
    }

    pub fn dgcnn(&mut self, pts: Var, graph: &[usize]) -> Result<Var, DcpError> {
        let cfg = &self.params.config;
        let (dynamic, k, hidden) = (cfg.dynamic_graph, cfg.k, cfg.widths.len());
        let (b, n) = (self.tape.shape(pts)[0], self.tape.shape(pts)[1]);
        let mut x = self.tape.reshape(pts, &[b * n, 3])?;
        let mut outs = Vec::with_capacity(hidden);
        let mut g = graph.to_vec();
        for i in 0..hidden {
            if dynamic && i > 0 {
                g = self.dynamic_graph(x, b, k)?;
            }
            x = self.edge_conv(x, &g, k, &format!("emb.{i}"))?;
            outs.push(x);
        }
        let cat = self.tape.concat(&outs, 1)?;
        if dynamic {
            g = self.dynamic_graph(cat, b, k)?;
        }
        let f = self.edge_conv(cat, &g, k, &format!("emb.{hidden}"))?;
        let p = self.tape.shape(f)[1];
        Ok(self.tape.reshape(f, &[b, n, p])?)
    }

    pub fn pointnet(&mut self, pts: Var) -> Result<Var, DcpError> {
        let mut x = pts;
        for i in 0..=self.params.config.widths.len() {
            x = self.linear(x, &format!("emb.{i}"), false)?;
            x = self.batch_norm(x, &format!("emb.{i}.bn"))?;
            x = self.tape.relu(x);
        }
        Ok(x)
    }

    pub fn embed(&mut self, pts: Var, graph: Option<&[usize]>) -> Result<Var, DcpError> {
        match self.params.config.embedding {
            Embedding::PointNet => self.pointnet(pts),
            Embedding::Dgcnn => self.dgcnn(pts, graph.ok_or(DcpError::MissingGraph)?),
        }
    }

    /// Multi-head scaled dot-product attention of `q_in: [B, N, D]` over `kv: [B, M, D]`.
    pub fn attention(&mut self, q_in: Var, kv: Var, name: &str) -> Result<Var, DcpError> {
        let h = self.params.config.heads;
        let (b, n, d) = {
            let s = self.tape.shape(q_in);
            (s[0], s[1], s[2])
        };
        let m = self.tape.shape(kv)[1];
        let dk = d / h;
        let split = |net: &mut Layers<'a, T>, x: Var, len: usize| -> Result<Var, DcpError> {
            let x = net.tape.reshape(x, &[b, len, h, dk])?;
            let x = net.tape.transpose(x, 1, 2)?;
            Ok(net.tape.reshape(x, &[b * h, len, dk])?)
        };
        let q = self.linear(q_in, &format!("{name}.q"), true)?;
        let k = self.linear(kv, &format!("{name}.k"), true)?;
        let v = self.linear(kv, &format!("{name}.v"), true)?;
        let q = split(self, q, n)?;
        let k = split(self, k, m)?;
        let v = split(self, v, m)?;
        let kt = self.tape.transpose(k, 1, 2)?;
        let s = self.tape.matmul(q, kt)?;
        let s = self.tape.scale(s, T::one() / T::from_f64(dk as f64).sqrt());
        let a = self.tape.softmax(s, 2)?;
        let o = self.tape.matmul(a, v)?;
        let o = self.tape.reshape(o, &[b, h, n, dk])?;
        let o = self.tape.transpose(o, 1, 2)?;
        let o = self.tape.reshape(o, &[b, n, d])?;
        self.linear(o, &format!("{name}.o"), true)
    }

    /// `x + LN(sublayer)`: normalization after the sublayer, before the residual.
    fn residual(&mut self, x: Var, sub: Var, ln: &str) -> Result<Var, DcpError> {
        let (g, b) = (
            self.p(&format!("{ln}.gamma")),
            self.p(&format!("{ln}.beta")),
        );
        let y = self.tape.layer_norm(sub, g, b)?;
        Ok(self.tape.add(x, y)?)
    }

    fn feed_forward(&mut self, x: Var, name: &str) -> Result<Var, DcpError> {
        let h = self.linear(x, &format!("{name}.ff1"), true)?;
        let h = self.tape.relu(h);
        self.linear(h, &format!("{name}.ff2"), true)
    }

    fn encoder(&mut self, x: Var) -> Result<Var, DcpError> {
        let s = self.attention(x, x, "attn.enc.self")?;
        let x = self.residual(x, s, "attn.enc.ln1")?;
        let f = self.feed_forward(x, "attn.enc")?;
        self.residual(x, f, "attn.enc.ln2")
    }

    fn decoder(&mut self, x: Var, memory: Var) -> Result<Var, DcpError> {
        let s = self.attention(x, x, "attn.dec.self")?;
        let x = self.residual(x, s, "attn.dec.ln1")?;
        let c = self.attention(x, memory, "attn.dec.cross")?;
        let x = self.residual(x, c, "attn.dec.ln2")?;
        let f = self.feed_forward(x, "attn.dec")?;
        self.residual(x, f, "attn.dec.ln3")
    }

    /// Residual term for `a` conditioned on `b`: decoder over `a` reading the
    /// encoded `b`, projected back to the embedding width.
    pub fn phi(&mut self, a: Var, b: Var) -> Result<Var, DcpError> {
        let project = self.params.position("attn.in.weight").is_some();
        let (a, b) = if project {
            (
                self.linear(a, "attn.in", true)?,
                self.linear(b, "attn.in", true)?,
            )
        } else {
            (a, b)
        };
        let memory = self.encoder(b)?;
        let d = self.decoder(a, memory)?;
        self.linear(d, "attn.out", true)
    }

    pub fn mlp_head(&mut self, phi_x: Var, phi_y: Var) -> Result<(Var, Var), DcpError> {
        let gx = self.tape.max(phi_x, 1)?;
        let gy = self.tape.max(phi_y, 1)?;
        let mut h = self.tape.concat(&[gx, gy], 1)?;
        for i in 0..self.params.config.mlp_widths.len() {
            h = self.linear(h, &format!("head.fc{i}"), true)?;
            h = self.batch_norm(h, &format!("head.fc{i}.bn"))?;
            h = self.tape.relu(h);
        }
        let q = self.linear(h, "head.quat", true)?;
        let t = self.linear(h, "head.trans", true)?;
        Ok((quat_to_rotation(self.tape, q)?, t))
    }
}

/// Full DCP forward pass on a batch.
///
/// Embeds both clouds with shared weights, optionally adds the attention
/// residual, forms soft correspondences `Ŷ = softmax(Φ_X·Φ_Yᵀ)·Y` and fits
/// the rigid transform from `X` to `Ŷ` (or regresses it with the MLP head).
pub fn dcp_forward<T: Scalar>(
    tape: &mut Tape<T>,
    params: &ModelParams<T>,
    vars: &[Var],
    batch: &PairBatch,
    mode: Mode,
) -> Result<DcpOutput<T>, DcpError> {
    let cfg = &params.config;
    let (b, n, m) = (batch.batch, batch.n, batch.m);
    let to_t = |v: &[f64]| v.iter().map(|&x| T::from_f64(x)).collect::<Vec<T>>();
    let x = tape.constant(Tensor::new(&[b, n, 3], to_t(&batch.src))?);
    let y = tape.constant(Tensor::new(&[b, m, 3], to_t(&batch.dst))?);
    let mut net = Layers {
        tape,
        params,
        vars,
        mode,
        bn_updates: Vec::new(),
    };
    let fx = net.embed(x, batch.src_graph.as_deref())?;
    let fy = net.embed(y, batch.dst_graph.as_deref())?;
    let (phi_x, phi_y) = if cfg.attention {
        let rx = net.phi(fx, fy)?;
        let ry = net.phi(fy, fx)?;
        (net.tape.add(fx, rx)?, net.tape.add(fy, ry)?)
    } else {
        (fx, fy)
    };
    let (rotation, translation, soft_match) = match cfg.head {
        Head::Svd => {
            let yt = net.tape.transpose(phi_y, 1, 2)?;
            let mut logits = net.tape.matmul(phi_x, yt)?;
            if cfg.scale_logits {
                logits = net
                    .tape
                    .scale(logits, T::one() / T::from_f64(cfg.emb_dims as f64).sqrt());
            }
            let w = net.tape.softmax(logits, 2)?;
            let y_hat = net.tape.matmul(w, y)?;
            let (r, t) = svd_rigid_head(net.tape, x, y_hat)?;
            (r, t, Some(w))
        }
        Head::Mlp => {
            let (r, t) = net.mlp_head(phi_x, phi_y)?;
            (r, t, None)
        }
    };
    Ok(DcpOutput {
        rotation,
        translation,
        soft_match,
        phi: (phi_x, phi_y),
        bn_updates: net.bn_updates,
    })
}

/// Row-stochastic pointer weights `softmax(Φ_X·Φ_Yᵀ)` over the last axis,
/// `[B, N, P] × [B, M, P] → [B, N, M]`. With `scaled` the logits are divided
/// by `√P`.
pub fn pointer_softmatch<T: Scalar>(
    tape: &mut Tape<T>,
    phi_x: Var,
    phi_y: Var,
    scaled: bool,
) -> Result<Var, DcpError> {
    let p = *tape.shape(phi_x).last().unwrap_or(&1);
    let yt = tape.transpose(phi_y, 1, 2)?;
    let mut logits = tape.matmul(phi_x, yt)?;
    if scaled {
        logits = tape.scale(logits, T::one() / T::from_f64(p as f64).sqrt());
    }
    Ok(tape.softmax(logits, 2)?)
}

/// Weighted averages `Ŷ = W·Y` of the target points.
pub fn soft_correspondence<T: Scalar>(
    tape: &mut Tape<T>,
    weights: Var,
    y: Var,
) -> Result<Var, DcpError> {
    Ok(tape.matmul(weights, y)?)
}

/// Batch mean of `‖Rᵀ·R_g − I‖²_F + ‖t − t_g‖²`.
pub fn dcp_loss<T: Scalar>(
    tape: &mut Tape<T>,
    rotation: Var,
    translation: Var,
    gt: &[RigidTransform],
) -> Result<Var, DcpError> {
    let b = gt.len();
    let rg: Vec<T> = gt
        .iter()
        .flat_map(|g| {
            g.rotation
                .transpose()
                .iter()
                .map(|&x| T::from_f64(x))
                .collect::<Vec<_>>()
        })
        .collect();
    let tg: Vec<T> = gt
        .iter()
        .flat_map(|g| {
            g.translation
                .iter()
                .map(|&x| T::from_f64(x))
                .collect::<Vec<_>>()
        })
        .collect();
    let rg = tape.constant(Tensor::new(&[b, 3, 3], rg)?);
    let tg = tape.constant(Tensor::new(&[b, 3], tg)?);
    let eye = tape.constant(Tensor::new(
        &[3, 3],
        [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]
            .map(T::from_f64)
            .to_vec(),
    )?);
    let rt = tape.transpose(rotation, 1, 2)?;
    let prod = tape.matmul(rt, rg)?;
    let dr = tape.sub(prod, eye)?;
    let dt = tape.sub(translation, tg)?;
    let sr = tape.mul(dr, dr)?;
    let st = tape.mul(dt, dt)?;
    let sr = tape.sum_all(sr);
    let st = tape.sum_all(st);
    let total = tape.add(sr, st)?;
    Ok(tape.scale(total, T::one() / T::from_f64(b as f64)))
}

/// The per-pair loss in plain `f64`.
pub fn transform_loss(pred: &RigidTransform, gt: &RigidTransform) -> f64 {
    let d = pred.rotation.transpose() * gt.rotation - Mat3::identity();
    d.norm_squared() + (pred.translation - gt.translation).norm_squared()
}

/// Reads transforms back from a forward pass, projecting onto rotations to
/// absorb single-precision rounding.
pub fn read_transforms<T: Scalar>(
    tape: &Tape<T>,
    out: &DcpOutput<T>,
) -> Result<Vec<RigidTransform>, DcpError> {
    let r = tape.value(out.rotation).data();
    let t = tape.value(out.translation).data();
    (0..t.len() / 3)
        .map(|i| {
            let rot = Mat3::from_fn(|a, c| r[9 * i + 3 * a + c].as_f64());
            let tr = Vec3::new(
                t[3 * i].as_f64(),
                t[3 * i + 1].as_f64(),
                t[3 * i + 2].as_f64(),
            );
            if !rot.iter().chain(tr.iter()).all(|v| v.is_finite()) {
                return Err(DcpError::NonFinite);
            }
            Ok(RigidTransform::from_approximate(rot, tr)?)
        })
        .collect()
}

/// Inference on a list of pairs with running statistics, in chunks of `batch` pairs.
pub fn predict<T: Scalar>(
    params: &ModelParams<T>,
    pairs: &[(&PointCloud, &PointCloud)],
    batch: usize,
) -> Result<Vec<RigidTransform>, DcpError> {
    let k = (params.config.embedding == Embedding::Dgcnn).then_some(params.config.k);
    let mut out = Vec::with_capacity(pairs.len());
    for chunk in pairs.chunks(batch.max(1)) {
        let pb = PairBatch::new(chunk, k)?;
        let mut tape = Tape::new();
        let vars = bind(&mut tape, params, false);
        let o = dcp_forward(&mut tape, params, &vars, &pb, Mode::Eval)?;
        out.extend(read_transforms(&tape, &o)?);
    }
    Ok(out)
}
