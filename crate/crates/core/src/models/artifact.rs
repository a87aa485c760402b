use serde::{Deserialize, Serialize};

use super::{cnn::CnnParams, mlp::MlpParams, Family, Network};
use crate::decompose::NormStats;
use crate::domain::{Provenance, Stage};
use crate::error::{Error, Result};
use crate::pcalr::PcaLrParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProvenance {
    pub seed: u64,
    pub config_hash: String,
    pub dataset: Provenance,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Params {
    Mlp(MlpParams),
    Cnn(CnnParams),
    Pcalr(PcaLrParams),
}

/// A trained model together with the preprocessing it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub family: Family,
    pub stage: Stage,
    pub class_names: Vec<String>,
    pub norm: NormStats,
    pub params: Params,
    pub provenance: TrainProvenance,
}

impl ModelArtifact {
    pub fn check_stage(&self, stage: Stage) -> Result<()> {
        if self.stage != stage {
            return Err(Error::StageMismatch {
                expected: self.stage.to_string(),
                got: stage.to_string(),
            });
        }
        Ok(())
    }

    /// Scores for one raw (unnormalized) feature vector.
    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.norm.apply_row(x)?;
        Ok(match &self.params {
            Params::Mlp(p) => p.logits(&z, None),
            Params::Cnn(p) => p.logits(&z, None),
            Params::Pcalr(p) => p.logits(&z)?,
        })
    }

    /// Checks that family, stage, statistics and parameter shapes agree.
    pub fn validate(&self) -> Result<()> {
        self.norm.validate()?;
        if self.norm.stage != self.stage {
            return Err(Error::StageMismatch {
                expected: self.stage.to_string(),
                got: self.norm.stage.to_string(),
            });
        }
        if self.class_names.len() != self.stage.class_count() {
            return Err(Error::Data(format!(
                "{} stage expects {} classes, artifact lists {}",
                self.stage,
                self.stage.class_count(),
                self.class_names.len()
            )));
        }
        let (family, input, classes) = match &self.params {
            Params::Mlp(p) => {
                p.validate()?;
                (Family::Mlp, p.input_dim(), p.n_classes())
            }
            Params::Cnn(p) => {
                p.validate()?;
                (Family::Cnn, p.input_dim(), p.n_classes())
            }
            Params::Pcalr(p) => {
                p.validate()?;
                (Family::Pcalr, p.pca.input_dim(), p.logreg.n_classes())
            }
        };
        if family != self.family {
            return Err(Error::Data(format!(
                "artifact family {} holds {} parameters",
                self.family, family
            )));
        }
        if input != self.stage.dim() {
            return Err(Error::Dimension {
                expected: self.stage.dim(),
                got: input,
            });
        }
        if classes != self.class_names.len() {
            return Err(Error::Dimension {
                expected: self.class_names.len(),
                got: classes,
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let artifact: Self = serde_json::from_str(s)?;
        artifact.validate()?;
        Ok(artifact)
    }
}
