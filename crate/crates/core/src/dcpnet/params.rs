use super::{DcpConfig, DcpError, Embedding, Head};
use crate::autodiff::{Scalar, Tensor};
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// `U(−1/√fan_in, 1/√fan_in)`
    FanIn(usize),
    Zeros,
    Ones,
}

/// One named array of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry<T> {
    pub name: String,
    pub value: Tensor<T>,
    /// Running statistics are stored alongside weights but are not trained.
    pub trainable: bool,
}

/// All arrays of a DCP model, in a fixed order determined by the config.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub config: DcpConfig,
    entries: Vec<ParamEntry<T>>,
    index: BTreeMap<String, usize>,
}

struct Layout(Vec<(String, Vec<usize>, Init, bool)>);

impl Layout {
    fn add(&mut self, name: String, shape: &[usize], init: Init) {
        self.0.push((name, shape.to_vec(), init, true));
    }

    fn linear(&mut self, name: &str, nin: usize, nout: usize, bias: bool) {
        self.add(format!("{name}.weight"), &[nout, nin], Init::FanIn(nin));
        if bias {
            self.add(format!("{name}.bias"), &[nout], Init::FanIn(nin));
        }
    }

    fn zero_linear(&mut self, name: &str, nin: usize, nout: usize) {
        self.add(format!("{name}.weight"), &[nout, nin], Init::Zeros);
        self.add(format!("{name}.bias"), &[nout], Init::Zeros);
    }

    fn batch_norm(&mut self, name: &str, c: usize) {
        self.add(format!("{name}.gamma"), &[c], Init::Ones);
        self.add(format!("{name}.beta"), &[c], Init::Zeros);
        self.0
            .push((format!("{name}.mean"), vec![c], Init::Zeros, false));
        self.0
            .push((format!("{name}.var"), vec![c], Init::Ones, false));
    }

    fn layer_norm(&mut self, name: &str, c: usize) {
        self.add(format!("{name}.gamma"), &[c], Init::Ones);
        self.add(format!("{name}.beta"), &[c], Init::Zeros);
    }

    fn attention(&mut self, name: &str, d: usize) {
        for p in ["q", "k", "v", "o"] {
            self.linear(&format!("{name}.{p}"), d, d, true);
        }
    }

    fn feed_forward(&mut self, name: &str, d: usize, hidden: usize) {
        self.linear(&format!("{name}.ff1"), d, hidden, true);
        self.linear(&format!("{name}.ff2"), hidden, d, true);
    }

    fn of(cfg: &DcpConfig) -> Self {
        let mut l = Layout(Vec::new());
        let mut c_in = 3;
        let n = cfg.widths.len();
        for (i, &w) in cfg.widths.iter().chain([&cfg.emb_dims]).enumerate() {
            let fan = match cfg.embedding {
                Embedding::Dgcnn => 2 * c_in,
                Embedding::PointNet => c_in,
            };
            l.linear(&format!("emb.{i}"), fan, w, false);
            l.batch_norm(&format!("emb.{i}.bn"), w);
            c_in = match cfg.embedding {
                Embedding::Dgcnn if i + 1 == n => cfg.widths.iter().sum(),
                _ => w,
            };
        }
        if cfg.attention {
            let (p, d) = (cfg.emb_dims, cfg.attn_dims);
            if p != d {
                l.linear("attn.in", p, d, true);
            }
            l.attention("attn.enc.self", d);
            l.layer_norm("attn.enc.ln1", d);
            l.feed_forward("attn.enc", d, cfg.ff_dims);
            l.layer_norm("attn.enc.ln2", d);
            l.attention("attn.dec.self", d);
            l.layer_norm("attn.dec.ln1", d);
            l.attention("attn.dec.cross", d);
            l.layer_norm("attn.dec.ln2", d);
            l.feed_forward("attn.dec", d, cfg.ff_dims);
            l.layer_norm("attn.dec.ln3", d);
            l.zero_linear("attn.out", d, p);
        }
        if cfg.head == Head::Mlp {
            let mut c = 2 * cfg.emb_dims;
            for (i, &w) in cfg.mlp_widths.iter().enumerate() {
                l.linear(&format!("head.fc{i}"), c, w, true);
                l.batch_norm(&format!("head.fc{i}.bn"), w);
                c = w;
            }
            l.linear("head.quat", c, 4, true);
            l.linear("head.trans", c, 3, true);
        }
        l
    }
}

impl<T: Scalar> ModelParams<T> {
    /// Fresh weights: fan-in scaled uniform for linear maps, unit/zero for
    /// normalization, zero for the attention output projection.
    pub fn init(config: &DcpConfig, seed: u64) -> Result<Self, DcpError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let entries = Layout::of(config)
            .0
            .into_iter()
            .map(|(name, shape, init, trainable)| {
                let n: usize = shape.iter().product();
                let data = match init {
                    Init::Zeros => vec![T::zero(); n],
                    Init::Ones => vec![T::one(); n],
                    Init::FanIn(fan) => {
                        let b = 1.0 / Float::sqrt(fan as f64);
                        (0..n)
                            .map(|_| T::from_f64(rng.random_range(-b..b)))
                            .collect()
                    }
                };
                ParamEntry {
                    name,
                    value: Tensor::new(&shape, data).unwrap(),
                    trainable,
                }
            })
            .collect();
        Ok(Self::assemble(config.clone(), entries))
    }

    fn assemble(config: DcpConfig, entries: Vec<ParamEntry<T>>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.name.clone(), i))
            .collect();
        Self {
            config,
            entries,
            index,
        }
    }

    /// Rebuilds a parameter set from stored arrays, checking names and
    /// shapes against the layout of `config`.
    pub fn from_entries(
        config: DcpConfig,
        mut stored: Vec<(String, Tensor<T>)>,
    ) -> Result<Self, DcpError> {
        config.validate()?;
        let layout = Layout::of(&config).0;
        let mut entries = Vec::with_capacity(layout.len());
        for (name, shape, _, trainable) in layout {
            let pos = stored
                .iter()
                .position(|(n, _)| *n == name)
                .ok_or_else(|| DcpError::MissingParam(name.clone()))?;
            let (_, value) = stored.swap_remove(pos);
            if value.shape() != shape.as_slice() {
                return Err(DcpError::ParamShape {
                    name,
                    expected: shape,
                    found: value.shape().to_vec(),
                });
            }
            entries.push(ParamEntry {
                name,
                value,
                trainable,
            });
        }
        if let Some((name, _)) = stored.first() {
            return Err(DcpError::UnexpectedParam(name.clone()));
        }
        Ok(Self::assemble(config, entries))
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        &mut self.entries
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<T>> {
        self.position(name).map(|i| &self.entries[i].value)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        self.position(name).map(|i| &mut self.entries[i].value)
    }

    /// Number of trainable scalars.
    pub fn trainable_count(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.trainable)
            .map(|e| e.value.numel())
            .sum()
    }

    /// Same weights in another precision.
    pub fn cast<U: Scalar>(&self) -> ModelParams<U> {
        let entries = self
            .entries
            .iter()
            .map(|e| ParamEntry {
                name: e.name.clone(),
                value: Tensor::new(
                    e.value.shape(),
                    e.value
                        .data()
                        .iter()
                        .map(|x| U::from_f64(x.as_f64()))
                        .collect(),
                )
                .unwrap(),
                trainable: e.trainable,
            })
            .collect();
        ModelParams::assemble(self.config.clone(), entries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_shapes() {
        let p = ModelParams::<f32>::init(&DcpConfig::v1(), 0).unwrap();
        assert_eq!(p.get("emb.0.weight").unwrap().shape(), &[64, 6]);
        assert_eq!(p.get("emb.4.weight").unwrap().shape(), &[512, 1024]);
        assert!(p.get("attn.out.weight").is_none());
        let v2 = ModelParams::<f32>::init(&DcpConfig::v2(), 0).unwrap();
        assert!(v2.get("attn.in.weight").is_none());
        assert!(v2
            .get("attn.out.weight")
            .unwrap()
            .data()
            .iter()
            .all(|&x| x == 0.0));
        let pn = ModelParams::<f32>::init(&DcpConfig::pointnet(), 0).unwrap();
        assert_eq!(pn.get("emb.4.weight").unwrap().shape(), &[512, 128]);
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::<f64>::init(&DcpConfig::tiny(), 3).unwrap();
        let b = ModelParams::<f64>::init(&DcpConfig::tiny(), 3).unwrap();
        let c = ModelParams::<f64>::init(&DcpConfig::tiny(), 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn from_entries_checks_layout() {
        let p = ModelParams::<f64>::init(&DcpConfig::tiny(), 1).unwrap();
        let stored: Vec<_> = p
            .entries()
            .iter()
            .map(|e| (e.name.clone(), e.value.clone()))
            .collect();
        assert_eq!(
            ModelParams::from_entries(p.config.clone(), stored.clone()).unwrap(),
            p
        );
        let mut missing = stored.clone();
        missing.pop();
        assert!(matches!(
            ModelParams::from_entries(p.config.clone(), missing),
            Err(DcpError::MissingParam(_))
        ));
        let mut wrong = stored;
        wrong[0].1 = Tensor::zeros(&[1]);
        assert!(matches!(
            ModelParams::from_entries(p.config.clone(), wrong),
            Err(DcpError::ParamShape { .. })
        ));
    }
}
