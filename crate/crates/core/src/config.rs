//! Run configuration: a TOML document with one section per stage.
//!
//! Unknown keys are rejected. Individual values can be overridden with
//! `section.key=value` strings, where the value is read as a TOML value and
//! falls back to a plain string.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cko::Similarity;
use crate::error::{Error, Result};
use crate::gan::GanTrainConfig;
use crate::metrics::CalibrationSweep;
use crate::ssl::SslConfig;

/// Version of the configuration grammar, bumped on incompatible changes.
pub const CONFIG_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitOn {
    /// Fit TF-IDF on the articles after class knowledge overlay.
    #[default]
    Overlay,
    /// Fit TF-IDF on the original articles.
    Original,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextConfig {
    /// Stop-word file; the bundled English list when absent.
    pub stopwords: Option<PathBuf>,
    pub fit_on: FitOn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CkoConfig {
    pub k: usize,
    pub similarity: Similarity,
}

impl Default for CkoConfig {
    fn default() -> Self {
        Self {
            k: 4,
            similarity: Similarity::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_step: f64,
    pub retrieval_ratios: Vec<f64>,
    pub k: usize,
    pub per_class_synthetic: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let sweep = CalibrationSweep::default();
        Self {
            lambda_min: sweep.lambda_min,
            lambda_max: sweep.lambda_max,
            lambda_step: sweep.step,
            retrieval_ratios: vec![0.25, 0.5, 1.0],
            k: 20,
            per_class_synthetic: 60,
        }
    }
}

impl EvalConfig {
    pub fn sweep(&self) -> CalibrationSweep {
        CalibrationSweep {
            lambda_min: self.lambda_min,
            lambda_max: self.lambda_max,
            step: self.lambda_step,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sweep().validate()?;
        if self.k == 0 || self.per_class_synthetic == 0 {
            return Err(Error::Config(
                "eval.k and eval.per_class_synthetic must be at least 1".into(),
            ));
        }
        if let Some(r) = self.retrieval_ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
            return Err(Error::Config(format!("retrieval ratio {r} outside (0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// Directory of class articles, one UTF-8 file per class.
    pub corpus: Option<PathBuf>,
    /// Class names, one per line in class-id order.
    pub class_names: Option<PathBuf>,
    /// Word vectors, `word v1 ... vd` per line.
    pub embeddings: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub semantics: Option<PathBuf>,
    pub split: Option<PathBuf>,
    /// Checkpoint to read or write; `out_dir/checkpoint.json` when absent.
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self {
            corpus: None,
            class_names: None,
            embeddings: None,
            features: None,
            semantics: None,
            split: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl IoConfig {
    pub fn require<'a>(&self, field: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
        field
            .as_deref()
            .ok_or_else(|| Error::Config(format!("io.{name} is not set")))
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out_dir.join("checkpoint.json"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub format_version: u32,
    pub seed: u64,
    pub text: TextConfig,
    pub cko: CkoConfig,
    pub gan: GanTrainConfig,
    pub ssl: SslConfig,
    pub eval: EvalConfig,
    pub io: IoConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            format_version: CONFIG_FORMAT_VERSION,
            seed: 0,
            text: TextConfig::default(),
            cko: CkoConfig::default(),
            gan: GanTrainConfig::default(),
            ssl: SslConfig::default(),
            eval: EvalConfig::default(),
            io: IoConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a document, applies overrides, then validates.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
            None => String::new(),
        };
        Self::from_toml(&text, overrides)
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != CONFIG_FORMAT_VERSION {
            return Err(Error::Config(format!(
                "config format_version {} is not supported (expected {CONFIG_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.gan.validate()?;
        self.ssl.validate()?;
        self.eval.validate()
    }

    /// Canonical TOML text: every field, defaults included.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override '{spec}' has an empty key")));
    }
    let value = parse_value(raw.trim());
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{spec}': '{k}' is not a section")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_defaults() {
        assert_eq!(RunConfig::from_toml("", &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[gan]\nmargn = 0.2\n", &[]).is_err());
        assert!(RunConfig::from_toml("bogus = 1\n", &[]).is_err());
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml(
            "[gan]\nmargin = 0.2\n",
            &[
                "gan.margin=0.3".into(),
                "cko.similarity=neg_euclidean".into(),
                "io.out_dir=/tmp/x".into(),
                "seed=9".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.gan.margin, 0.3);
        assert_eq!(cfg.cko.similarity, Similarity::NegEuclidean);
        assert_eq!(cfg.io.out_dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.seed, 9);
    }

    #[test]
    fn canonical_round_trips() {
        let cfg = RunConfig::from_toml("", &["ssl.psi=0.7".into()]).unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.canonical(), &[]).unwrap(), cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("", &["gan.margin=-1".into()]).is_err());
        assert!(RunConfig::from_toml("", &["eval.lambda_step=0".into()]).is_err());
    }
}
