use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::edge::MorphOp;
use crate::error::{Error, Result};
use crate::image::{ball_image, load_image, shepp_logan, GrayImage};
use crate::mask::{AcquisitionConfig, AdaptiveBudget, EdgeSource, Strategy};
use crate::tv::TvConfig;

/// Where the ground-truth image comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSource {
    Phantom { size: usize },
    Ball { size: usize },
    Path(PathBuf),
}

impl ImageSource {
    /// Short name used in result rows and artifact directories.
    pub fn name(&self) -> String {
        match self {
            ImageSource::Phantom { size } => format!("phantom{size}"),
            ImageSource::Ball { size } => format!("ball{size}"),
            ImageSource::Path(p) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string()),
        }
    }

    pub fn load(&self) -> Result<GrayImage> {
        match self {
            ImageSource::Phantom { size } => shepp_logan(*size),
            ImageSource::Ball { size } => ball_image(*size),
            ImageSource::Path(p) => load_image(p),
        }
    }
}

impl std::str::FromStr for ImageSource {
    type Err = Error;

    /// `phantom`, `ball`, `phantom:<n>`, `ball:<n>`, or a file path.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, size) = match s.split_once(':') {
            Some((k, n)) if k == "phantom" || k == "ball" => {
                let n = n
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad image size in {s:?}")))?;
                (k, Some(n))
            }
            _ => (s, None),
        };
        Ok(match kind {
            "phantom" => ImageSource::Phantom { size: size.unwrap_or(256) },
            "ball" => ImageSource::Ball { size: size.unwrap_or(64) },
            _ => ImageSource::Path(PathBuf::from(s)),
        })
    }
}

/// One acquisition-plus-recovery method compared in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategySpec {
    Random,
    Mar { morph: MorphOp, edges: EdgeSource },
    Trps { morph: MorphOp },
    /// Gaussian projections of the whole image recovered by OMP.
    StandardCs,
}

impl StrategySpec {
    pub fn label(&self) -> &'static str {
        match self {
            StrategySpec::Random => "random",
            StrategySpec::Mar {
                edges: EdgeSource::Predicted,
                ..
            } => "mar",
            StrategySpec::Mar {
                edges: EdgeSource::GroundTruth,
                ..
            } => "mar_true",
            StrategySpec::Trps { .. } => "trps",
            StrategySpec::StandardCs => "standard_cs",
        }
    }

    pub fn morph(&self) -> MorphOp {
        match self {
            StrategySpec::Mar { morph, .. } | StrategySpec::Trps { morph } => *morph,
            StrategySpec::Random | StrategySpec::StandardCs => MorphOp::None,
        }
    }

    /// Parses a strategy label; `morph` applies to the edge-based ones.
    pub fn parse(label: &str, morph: MorphOp) -> Result<Self> {
        Ok(match label.to_ascii_lowercase().as_str() {
            "random" => StrategySpec::Random,
            "mar" => StrategySpec::Mar {
                morph,
                edges: EdgeSource::Predicted,
            },
            "mar_true" => StrategySpec::Mar {
                morph,
                edges: EdgeSource::GroundTruth,
            },
            "trps" => StrategySpec::Trps { morph },
            "standard_cs" | "cs" => StrategySpec::StandardCs,
            other => return Err(Error::InvalidArgument(format!("unknown strategy {other:?}"))),
        })
    }

    /// The acquisition config for this strategy, derived from a template.
    pub fn acquisition(&self, template: &AcquisitionConfig) -> AcquisitionConfig {
        let mut cfg = template.clone();
        match *self {
            StrategySpec::Random | StrategySpec::StandardCs => cfg.strategy = Strategy::Random,
            StrategySpec::Mar { morph, edges } => {
                cfg.strategy = Strategy::Mar;
                cfg.morph = morph;
                cfg.edge_source = edges;
            }
            StrategySpec::Trps { morph } => {
                cfg.strategy = Strategy::Trps;
                cfg.morph = morph;
            }
        }
        cfg
    }
}

/// Settings of the dense-projection baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsSettings {
    /// OMP sparsity cap as a fraction of the number of measurements.
    pub sparsity_fraction: f64,
    pub residual_tol: f64,
}

impl Default for CsSettings {
    fn default() -> Self {
        Self {
            sparsity_fraction: 0.25,
            residual_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::InvalidArgument(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub images: Vec<ImageSource>,
    /// Template for every acquisition; `target_eta1`, `adaptive` and the
    /// strategy fields are overridden per run.
    pub acquisition: AcquisitionConfig,
    pub recovery: TvConfig,
    pub cs: CsSettings,
    pub strategies: Vec<StrategySpec>,
    pub eta1_grid: Vec<f64>,
    pub eta2_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub format: OutputFormat,
    /// Write masks, measurements and recovered images of every run.
    pub persist_artifacts: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            images: vec![ImageSource::Phantom { size: 256 }],
            acquisition: AcquisitionConfig::default(),
            recovery: TvConfig::default(),
            cs: CsSettings::default(),
            strategies: vec![
                StrategySpec::Random,
                StrategySpec::Mar {
                    morph: MorphOp::Dilate,
                    edges: EdgeSource::Predicted,
                },
            ],
            eta1_grid: vec![0.3],
            eta2_grid: Vec::new(),
            seeds: vec![0],
            out_dir: None,
            format: OutputFormat::Csv,
            persist_artifacts: true,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::InvalidArgument("experiment has no images".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::InvalidArgument("experiment has no strategies".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidArgument("experiment has no seeds".into()));
        }
        for &v in &self.eta1_grid {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::InvalidArgument(format!("eta1 grid value {v} outside (0, 1]")));
            }
        }
        for &v in &self.eta2_grid {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidArgument(format!("eta2 grid value {v} outside [0, 1)")));
            }
        }
        self.recovery.validate()
    }

    pub fn out_path(&self, name: &str) -> Option<PathBuf> {
        self.out_dir.as_deref().map(|d: &Path| d.join(name))
    }
}

/// One grid point of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub image: ImageSource,
    pub strategy: StrategySpec,
    pub eta1: f64,
    pub adaptive: AdaptiveBudget,
    pub seed: u64,
}
