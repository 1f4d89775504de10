//! Versioned JSON container for filter banks, structured models and trained networks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::gridded::FilterBank;
use crate::nn::NNWeights;
use crate::structured::{q_matrix, QKind, StructuredModel};

pub const FORMAT_TAG: &str = "chanpred-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub obs_len: usize,
    pub step: usize,
    pub noise_var: f64,
    pub num_samples: usize,
    pub q_kind: Option<QKind>,
    pub velocity_kmh: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum ModelPayload {
    FilterBank(FilterBank),
    Structured(StructuredModel),
    Network(NNWeights),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub header: ModelHeader,
    pub payload: ModelPayload,
}

impl ModelFile {
    pub fn from_bank(bank: FilterBank, velocity_kmh: Option<f64>) -> Self {
        Self::wrap(
            ModelHeader {
                obs_len: bank.obs_len,
                step: bank.step,
                noise_var: bank.noise_var,
                num_samples: bank.len(),
                q_kind: None,
                velocity_kmh,
            },
            ModelPayload::FilterBank(bank),
        )
    }

    pub fn from_structured(model: StructuredModel, velocity_kmh: Option<f64>) -> Self {
        Self::wrap(
            ModelHeader {
                obs_len: model.obs_len,
                step: model.step,
                noise_var: model.noise_var,
                num_samples: model.num_samples(),
                q_kind: Some(model.q_kind),
                velocity_kmh,
            },
            ModelPayload::Structured(model),
        )
    }

    /// Trained weights; the optimizer state is not stored.
    pub fn from_network(weights: NNWeights, q_kind: QKind, step: usize, noise_var: f64, velocity_kmh: Option<f64>) -> Self {
        Self::wrap(
            ModelHeader {
                obs_len: weights.obs_len(),
                step,
                noise_var,
                num_samples: weights.hidden_len(),
                q_kind: Some(q_kind),
                velocity_kmh,
            },
            ModelPayload::Network(weights),
        )
    }

    fn wrap(header: ModelHeader, payload: ModelPayload) -> Self {
        ModelFile {
            format: FORMAT_TAG.into(),
            version: FORMAT_VERSION,
            header,
            payload,
        }
    }

    /// Checks the tag, version and header/payload consistency.
    pub fn validate(&self) -> Result<()> {
        if self.format != FORMAT_TAG {
            return Err(Error::ModelFile(format!("unknown format tag `{}`", self.format)));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::ModelFile(format!("unsupported version {}", self.version)));
        }
        let h = &self.header;
        let (m, l, nv, n, q) = match &self.payload {
            ModelPayload::FilterBank(b) => (b.obs_len, b.step, b.noise_var, b.len(), None),
            ModelPayload::Structured(s) => (s.obs_len, s.step, s.noise_var, s.num_samples(), Some(s.q_kind)),
            ModelPayload::Network(w) => {
                let q = h.q_kind.ok_or_else(|| Error::ModelFile("network without Q kind".into()))?;
                if w.input_len() != q.feature_len(w.obs_len()) {
                    return Err(Error::ModelFile(format!("network input {} does not match {}", w.input_len(), q.name())));
                }
                (w.obs_len(), h.step, h.noise_var, w.hidden_len(), Some(q))
            }
        };
        if (m, l, n, q) != (h.obs_len, h.step, h.num_samples, h.q_kind) || nv != h.noise_var {
            return Err(Error::ModelFile("header does not match payload".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut f: ModelFile = serde_json::from_str(text)?;
        f.validate()?;
        if let ModelPayload::FilterBank(b) = &mut f.payload {
            b.restore_cache();
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Structured model from a bank payload (or the stored one).
    pub fn to_structured(&self, kind: QKind, exec: Execution) -> Result<StructuredModel> {
        match &self.payload {
            ModelPayload::FilterBank(b) => StructuredModel::from_bank(b, kind, exec),
            ModelPayload::Structured(s) if s.q_kind == kind => Ok(s.clone()),
            _ => Err(Error::ModelFile(format!("no {} structured model in file", kind.name()))),
        }
    }

    /// `Q` for network payloads.
    pub fn network_q(&self) -> Result<crate::numerics::CMatrix> {
        match (&self.payload, self.header.q_kind) {
            (ModelPayload::Network(_), Some(q)) => q_matrix(q, self.header.obs_len),
            _ => Err(Error::ModelFile("not a network file".into())),
        }
    }
}
