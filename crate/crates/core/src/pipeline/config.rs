use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grading::DEFAULT_K;
use crate::morphometrics::MorphometricsParams;
use crate::overlap::OverlapParams;
use crate::segmentation::{SlicParams, ThresholdMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentationConfig {
    pub median_window: u32,
    pub slic: SlicParams,
    pub threshold: ThresholdMode,
    pub min_area: usize,
    pub close_radius: u32,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            median_window: 9,
            slic: SlicParams::default(),
            threshold: ThresholdMode::Otsu,
            min_area: 50,
            close_radius: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradingConfig {
    pub k: usize,
}

impl Default for GradingConfig {
    fn default() -> Self {
        Self { k: DEFAULT_K }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub n_folds: usize,
    pub seed: u64,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { n_folds: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub segmentation: SegmentationConfig,
    pub overlap: OverlapParams,
    pub morphometrics: MorphometricsParams,
    pub grading: GradingConfig,
    pub evaluation: EvaluationConfig,
    /// Worker threads for the entry pool; 0 picks the available
    /// parallelism. Not part of the fingerprint.
    pub workers: usize,
}

impl Config {
    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Config = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.segmentation;
        if s.median_window < 3 || s.median_window.is_multiple_of(2) {
            return bad(format!("segmentation.median_window must be odd and >= 3, got {}", s.median_window));
        }
        if s.slic.k == 0 || !(s.slic.compactness > 0.0) || s.slic.max_iter == 0 {
            return bad("segmentation.slic needs k, compactness and max_iter > 0".into());
        }
        if self.overlap.r == 0 || !(self.overlap.scale > 0.0) || self.overlap.alpha_cap == 0 {
            return bad("overlap.r, overlap.scale and overlap.alpha_cap must be positive".into());
        }
        if !(self.overlap.em_tol > 0.0) || self.overlap.em_max_iter == 0 {
            return bad("overlap.em_tol and overlap.em_max_iter must be positive".into());
        }
        if self.grading.k == 0 {
            return bad("grading.k must be at least 1".into());
        }
        if self.evaluation.n_folds < 2 {
            return bad("evaluation.n_folds must be at least 2".into());
        }
        Ok(())
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON form, with the
    /// worker count left out.
    pub fn fingerprint(&self) -> String {
        let canonical = Config {
            workers: 0,
            ..self.clone()
        };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))[..16].to_string()
    }
}
