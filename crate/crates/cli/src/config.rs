//! Pipeline configuration: a TOML file of `key = value` sections, with
//! command-line overrides applied on top.

use std::path::{Path, PathBuf};

use geoscatt::evalhead::LogRegConfig;
use geoscatt::gnn::{Pooling, TrainConfig};
use geoscatt::gst::{GgsConfig, HannVariant};
use geoscatt::metagraph::SageConfig;
use geoscatt::nn::AdamConfig;
use geoscatt::scatter2d::MorletParams;
use geoscatt::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub run: RunSection,
    pub paths: PathsSection,
    pub data: DataSection,
    pub gst: GstSection,
    pub scatter2d: Scatter2dSection,
    pub gin: GinSection,
    pub sage: SageSection,
    pub head: HeadSection,
    pub cv: CvSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub input: Option<PathBuf>,
    pub workdir: PathBuf,
}

impl Default for PathsSection {
    fn default() -> Self {
        Self {
            input: None,
            workdir: PathBuf::from("work"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub test_fraction: f64,
    /// Share of the training split held out for early stopping.
    pub val_fraction: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            val_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GstSection {
    pub diffusion_scales: usize,
    pub diffusion_depth: usize,
    pub hann_scales: usize,
    pub hann_overlap: f64,
    pub hann_variant: String,
    pub hann_depth: usize,
    pub hann_emit_max_order: usize,
}

impl Default for GstSection {
    fn default() -> Self {
        let g = GgsConfig::default();
        Self {
            diffusion_scales: g.diffusion_scales,
            diffusion_depth: g.diffusion_depth,
            hann_scales: g.hann_scales,
            hann_overlap: g.hann_overlap,
            hann_variant: g.hann_variant.name().to_string(),
            hann_depth: g.hann_depth,
            hann_emit_max_order: g.hann_emit_max_order,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scatter2dSection {
    pub scales: usize,
    pub orientations: usize,
    pub size: usize,
    pub order: usize,
    /// Columns kept by chi-squared selection; larger values keep everything.
    pub k_select: usize,
    pub envelope: f64,
    pub sigma: f64,
    pub xi: f64,
    pub lowpass: f64,
}

impl Default for Scatter2dSection {
    fn default() -> Self {
        let m = MorletParams::default();
        Self {
            scales: 9,
            orientations: 8,
            size: 512,
            order: 2,
            k_select: 4000,
            envelope: m.envelope,
            sigma: m.sigma,
            xi: m.xi,
            lowpass: m.lowpass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GinSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    /// 0 trains on the full batch.
    pub batch_size: usize,
    pub early_stop: bool,
    pub patience: usize,
    pub pooling: String,
}

impl Default for GinSection {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.0,
            epochs: 200,
            batch_size: 0,
            early_stop: true,
            patience: 20,
            pooling: "sum".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SageSection {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub dropout: f64,
    pub early_stop: bool,
    pub patience: usize,
    /// Neighbours kept per node; 0 aggregates over every other node.
    pub top_k: usize,
}

impl Default for SageSection {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 1e-5,
            epochs: 1000,
            dropout: 0.5,
            early_stop: true,
            patience: 50,
            top_k: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadSection {
    pub l2: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for HeadSection {
    fn default() -> Self {
        let c = LogRegConfig::default();
        Self {
            l2: c.l2,
            max_iter: c.max_iter,
            tol: c.tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CvSection {
    pub k: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        Self { k: 10 }
    }
}

fn config_err(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn fraction(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Sets `section.key` to `value`, read as a TOML value (bare words are
    /// taken as strings). The result is checked against the schema.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (section, field) = key
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("override '{key}' must look like section.key")))?;
        let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut root = toml::Table::try_from(&*self).map_err(config_err)?;
        let table = root
            .entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("unknown section '{section}'")))?;
        table.insert(field.to_string(), parsed);
        *self = root.try_into().map_err(config_err)?;
        Ok(())
    }

    /// Canonical TOML text of every setting, defaults included.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn digest(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn seed(&self) -> Result<u64> {
        self.run
            .seed
            .ok_or_else(|| Error::Config("a seed is required (--seed or run.seed)".into()))
    }

    /// Checks value ranges and that the seed is set.
    pub fn validate(&self) -> Result<()> {
        self.seed()?;
        fraction("data.test_fraction", self.data.test_fraction)?;
        fraction("data.val_fraction", self.data.val_fraction)?;
        self.ggs()?;
        let s = &self.scatter2d;
        if s.orientations == 0 || s.scales == 0 {
            return Err(Error::Config(
                "scatter2d.scales and orientations must be positive".into(),
            ));
        }
        if s.order > 2 {
            return Err(Error::Config(format!(
                "scatter2d.order {} exceeds 2",
                s.order
            )));
        }
        if s.k_select == 0 {
            return Err(Error::Config("scatter2d.k_select must be positive".into()));
        }
        for (n, v) in [
            ("scatter2d.envelope", s.envelope),
            ("scatter2d.sigma", s.sigma),
            ("scatter2d.xi", s.xi),
            ("scatter2d.lowpass", s.lowpass),
        ] {
            positive(n, v)?;
        }
        positive("gin.lr", self.gin.lr)?;
        positive("sage.lr", self.sage.lr)?;
        if self.gin.epochs == 0 || self.sage.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        self.pooling()?;
        if !(0.0..1.0).contains(&self.sage.dropout) {
            return Err(Error::Config(format!(
                "sage.dropout {} outside [0, 1)",
                self.sage.dropout
            )));
        }
        if self.head.l2 < 0.0 {
            return Err(Error::Config("head.l2 must be non-negative".into()));
        }
        if self.cv.k < 2 {
            return Err(Error::Config("cv.k must be at least 2".into()));
        }
        if let Some(p) = &self.paths.input {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input {} does not exist",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn ggs(&self) -> Result<GgsConfig> {
        let g = &self.gst;
        Ok(GgsConfig {
            diffusion_scales: g.diffusion_scales,
            diffusion_depth: g.diffusion_depth,
            hann_scales: g.hann_scales,
            hann_overlap: g.hann_overlap,
            hann_variant: HannVariant::parse(&g.hann_variant)?,
            hann_depth: g.hann_depth,
            hann_emit_max_order: g.hann_emit_max_order,
        })
    }

    pub fn morlet(&self) -> MorletParams {
        let s = &self.scatter2d;
        MorletParams {
            envelope: s.envelope,
            sigma: s.sigma,
            xi: s.xi,
            lowpass: s.lowpass,
        }
    }

    fn pooling(&self) -> Result<Pooling> {
        Pooling::parse(&self.gin.pooling)
            .ok_or_else(|| Error::Config(format!("unknown pooling '{}'", self.gin.pooling)))
    }

    pub fn gin_train(&self) -> Result<TrainConfig> {
        let g = &self.gin;
        Ok(TrainConfig {
            adam: AdamConfig {
                lr: g.lr,
                weight_decay: g.weight_decay,
                ..AdamConfig::default()
            },
            epochs: g.epochs,
            batch_size: g.batch_size,
            seed: self.seed()?,
            patience: g.early_stop.then_some(g.patience),
            pooling: self.pooling()?,
        })
    }

    pub fn sage_train(&self) -> Result<SageConfig> {
        let s = &self.sage;
        Ok(SageConfig {
            adam: AdamConfig {
                lr: s.lr,
                weight_decay: s.weight_decay,
                ..AdamConfig::default()
            },
            epochs: s.epochs,
            dropout: s.dropout,
            patience: s.early_stop.then_some(s.patience),
            seed: self.seed()?,
            top_k: (s.top_k > 0).then_some(s.top_k),
        })
    }

    pub fn head_cfg(&self) -> LogRegConfig {
        LogRegConfig {
            l2: self.head.l2,
            max_iter: self.head.max_iter,
            tol: self.head.tol,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_roundtrip_through_text() {
        let c = PipelineConfig::default();
        assert_eq!(PipelineConfig::parse(&c.canonical()).unwrap(), c);
        assert_eq!(c.ggs().unwrap(), GgsConfig::default());
    }

    #[test]
    fn sections_override_defaults() {
        let c = PipelineConfig::parse("[run]\nseed = 7\n\n[cv]\nk = 5\n").unwrap();
        assert_eq!(c.run.seed, Some(7));
        assert_eq!(c.cv.k, 5);
        assert_eq!(c.gin, GinSection::default());
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_and_bad_types_are_rejected() {
        assert!(PipelineConfig::parse("[cv]\nfolds = 5\n").is_err());
        assert!(PipelineConfig::parse("[nope]\nx = 1\n").is_err());
        assert!(PipelineConfig::parse("[cv]\nk = \"ten\"\n").is_err());
    }

    #[test]
    fn overrides_are_schema_checked() {
        let mut c = PipelineConfig::default();
        c.set("gin.pooling", "mean").unwrap();
        c.set("sage.top_k", "25").unwrap();
        c.set("run.seed", "3").unwrap();
        assert_eq!(c.gin.pooling, "mean");
        assert_eq!(c.sage_train().unwrap().top_k, Some(25));
        assert!(c.set("gin.nope", "1").is_err());
        assert!(c.set("cv.k", "many").is_err());
        assert!(c.set("cv", "3").is_err());
    }

    #[test]
    fn validation_requires_a_seed_and_sane_ranges() {
        let mut c = PipelineConfig::default();
        assert!(c.validate().is_err());
        c.run.seed = Some(1);
        c.validate().unwrap();
        c.data.test_fraction = 1.0;
        assert!(c.validate().is_err());
        c.data.test_fraction = 0.2;
        c.gst.hann_variant = "triangle".into();
        assert!(c.validate().is_err());
    }

    #[test]
    fn digest_tracks_every_setting() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.head.l2 = 0.5;
        assert_ne!(a.digest(), b.digest());
        assert_eq!(a.digest(), PipelineConfig::default().digest());
    }
}
