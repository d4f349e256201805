use super::DcpError;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

/// Per-point feature extractor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Embedding {
    PointNet,
    Dgcnn,
}

/// How the rigid transform is read off the embeddings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Svd,
    Mlp,
}

/// Architecture of a DCP model.
#[derive(Debug, Clone, PartialEq)]
pub struct DcpConfig {
    pub embedding: Embedding,
    /// Widths of the hidden embedding layers. For DGCNN their outputs are
    /// concatenated and fed to the last layer of width `emb_dims`.
    pub widths: Vec<usize>,
    pub emb_dims: usize,
    /// Neighbors per point in the DGCNN graph.
    pub k: usize,
    /// Rebuild the graph in feature space before every EdgeConv after the first.
    pub dynamic_graph: bool,
    /// Transformer residual on top of the embeddings (DCP-v2).
    pub attention: bool,
    pub heads: usize,
    pub attn_dims: usize,
    pub ff_dims: usize,
    /// Divide pointer logits by `√emb_dims`.
    pub scale_logits: bool,
    pub head: Head,
    pub mlp_widths: Vec<usize>,
}

impl DcpConfig {
    pub fn v1() -> Self {
        Self {
            embedding: Embedding::Dgcnn,
            widths: alloc::vec![64, 64, 128, 256],
            emb_dims: 512,
            k: 20,
            dynamic_graph: false,
            attention: false,
            heads: 4,
            attn_dims: 512,
            ff_dims: 1024,
            scale_logits: false,
            head: Head::Svd,
            mlp_widths: alloc::vec![256, 128, 64],
        }
    }

    pub fn v2() -> Self {
        Self {
            attention: true,
            ..Self::v1()
        }
    }

    /// Point-wise embedding in place of DGCNN.
    pub fn pointnet() -> Self {
        Self {
            embedding: Embedding::PointNet,
            widths: alloc::vec![64, 64, 64, 128],
            ..Self::v1()
        }
    }

    /// Small DGCNN model used for desk-scale runs.
    pub fn tiny() -> Self {
        Self {
            widths: alloc::vec![16, 16, 32, 64],
            emb_dims: 64,
            k: 10,
            attn_dims: 64,
            ff_dims: 128,
            ..Self::v1()
        }
    }

    pub fn validate(&self) -> Result<(), DcpError> {
        let bad = |m: &'static str| Err(DcpError::InvalidConfig(m));
        if self.emb_dims == 0 || self.widths.iter().any(|&w| w == 0) {
            return bad("layer widths must be positive");
        }
        if self.embedding == Embedding::Dgcnn && (self.widths.is_empty() || self.k == 0) {
            return bad("dgcnn needs at least one hidden layer and k > 0");
        }
        if self.attention
            && (self.heads == 0 || self.attn_dims % self.heads != 0 || self.ff_dims == 0)
        {
            return bad("attention dims must be a positive multiple of heads");
        }
        if self.head == Head::Mlp && self.mlp_widths.iter().any(|&w| w == 0) {
            return bad("mlp head widths must be positive");
        }
        Ok(())
    }

    /// `key=value` lines, one per field, in a fixed order.
    pub fn to_text(&self) -> String {
        let list = |v: &[usize]| {
            v.iter()
                .map(|w| w.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let mut s = String::new();
        let mut line = |k: &str, v: String| s.push_str(&format!("{k}={v}\n"));
        line(
            "embedding",
            match self.embedding {
                Embedding::PointNet => "pointnet".into(),
                Embedding::Dgcnn => "dgcnn".into(),
            },
        );
        line("widths", list(&self.widths));
        line("emb_dims", self.emb_dims.to_string());
        line("k", self.k.to_string());
        line("dynamic_graph", self.dynamic_graph.to_string());
        line("attention", self.attention.to_string());
        line("heads", self.heads.to_string());
        line("attn_dims", self.attn_dims.to_string());
        line("ff_dims", self.ff_dims.to_string());
        line("scale_logits", self.scale_logits.to_string());
        line(
            "head",
            match self.head {
                Head::Svd => "svd".into(),
                Head::Mlp => "mlp".into(),
            },
        );
        line("mlp_widths", list(&self.mlp_widths));
        s
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), DcpError> {
        let bad = || DcpError::ConfigValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let num = |v: &str| v.trim().parse::<usize>().map_err(|_| bad());
        let flag = |v: &str| v.trim().parse::<bool>().map_err(|_| bad());
        let list = |v: &str| -> Result<Vec<usize>, DcpError> {
            if v.trim().is_empty() {
                return Ok(Vec::new());
            }
            v.split(',')
                .map(|w| w.trim().parse::<usize>().map_err(|_| bad()))
                .collect()
        };
        match key {
            "embedding" => {
                self.embedding = match value.trim() {
                    "pointnet" => Embedding::PointNet,
                    "dgcnn" => Embedding::Dgcnn,
                    _ => return Err(bad()),
                }
            }
            "widths" => self.widths = list(value)?,
            "emb_dims" => self.emb_dims = num(value)?,
            "k" => self.k = num(value)?,
            "dynamic_graph" => self.dynamic_graph = flag(value)?,
            "attention" => self.attention = flag(value)?,
            "heads" => self.heads = num(value)?,
            "attn_dims" => self.attn_dims = num(value)?,
            "ff_dims" => self.ff_dims = num(value)?,
            "scale_logits" => self.scale_logits = flag(value)?,
            "head" => {
                self.head = match value.trim() {
                    "svd" => Head::Svd,
                    "mlp" => Head::Mlp,
                    _ => return Err(bad()),
                }
            }
            "mlp_widths" => self.mlp_widths = list(value)?,
            _ => return Err(DcpError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, DcpError> {
        let mut cfg = Self::v1();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line.split_once('=').ok_or_else(|| DcpError::ConfigValue {
                key: line.to_string(),
                value: String::new(),
            })?;
            cfg.set(k.trim(), v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut c = DcpConfig::tiny();
        c.head = Head::Mlp;
        c.embedding = Embedding::PointNet;
        c.scale_logits = true;
        assert_eq!(DcpConfig::from_text(&c.to_text()).unwrap(), c);
        assert!(matches!(
            DcpConfig::from_text("bogus=1"),
            Err(DcpError::UnknownKey(_))
        ));
        assert!(DcpConfig::from_text("k=x").is_err());
    }

    #[test]
    fn defaults_reproduce_five_layers() {
        let c = DcpConfig::v1();
        let mut all = c.widths.clone();
        all.push(c.emb_dims);
        assert_eq!(all, [64, 64, 128, 256, 512]);
        assert_eq!(c.widths.iter().sum::<usize>(), 512);
        assert_eq!(DcpConfig::v2().heads, 4);
    }
}
