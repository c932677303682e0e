use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coordinators::Algorithm;
use crate::error::{Error, Result};
use crate::scenario::{FamilySpec, PowerLaws, QuadraticLaws, SamplerSpec};

pub const DEFAULT_STATIC_ROUNDS: usize = 2000;
pub const DEFAULT_DYNAMIC_ROUNDS: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Power,
    Quadratic,
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "power" => Ok(Self::Power),
            "quadratic" | "quad" => Ok(Self::Quadratic),
            other => Err(Error::InvalidConfig(format!("unknown model '{other}'"))),
        }
    }
}

/// Everything needed to reproduce one experiment. `d` and `T` left unset take
/// the model and mode defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub algo: Algorithm,
    pub model: ModelKind,
    pub d: Option<usize>,
    pub m: usize,
    pub n: usize,
    pub c: f64,
    pub delta: f64,
    #[serde(rename = "T")]
    pub rounds: Option<usize>,
    pub seed: u64,
    pub eta: Option<f64>,
    pub with_oracle: bool,
    /// Output directory; not part of the experiment's identity, so never serialized.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Static,
            algo: Algorithm::Solo,
            model: ModelKind::Power,
            d: None,
            m: 15,
            n: 25,
            c: 10.0,
            delta: 0.1,
            rounds: None,
            seed: 0,
            eta: None,
            with_oracle: false,
            out: None,
        }
    }
}

impl ExperimentConfig {
    pub fn preset(mode: Mode, model: ModelKind, seed: u64) -> Self {
        Self { mode, model, seed, ..Self::default() }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn dimension(&self) -> usize {
        self.d.unwrap_or(match self.model {
            ModelKind::Power => 1,
            ModelKind::Quadratic => 2,
        })
    }

    pub fn total_rounds(&self) -> usize {
        self.rounds.unwrap_or(match self.mode {
            Mode::Static => DEFAULT_STATIC_ROUNDS,
            Mode::Dynamic => DEFAULT_DYNAMIC_ROUNDS,
        })
    }

    /// Copy with `d` and `T` filled in.
    pub fn resolved(&self) -> Self {
        Self { d: Some(self.dimension()), rounds: Some(self.total_rounds()), ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.mode == Mode::Dynamic && self.algo != Algorithm::Solo {
            return bad(format!("dynamic mode runs SOLO only, got {:?}", self.algo));
        }
        if self.model == ModelKind::Power && self.dimension() != 1 {
            return bad(format!("the power model has one commodity, got d = {}", self.dimension()));
        }
        if self.total_rounds() == 0 {
            return bad("T must be positive".into());
        }
        if let Some(eta) = self.eta {
            if self.algo == Algorithm::Solo {
                return bad("SOLO takes no step size".into());
            }
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta must be positive, got {eta}"));
            }
        }
        self.sampler_spec().validate()
    }

    pub fn sampler_spec(&self) -> SamplerSpec {
        let family = match self.model {
            ModelKind::Power => FamilySpec::Power(PowerLaws::default()),
            ModelKind::Quadratic => FamilySpec::Quadratic(QuadraticLaws::with_delta(self.delta)),
        };
        SamplerSpec { family, d: self.dimension(), m: self.m, n: self.n, c: self.c, seed: self.seed }
    }
}
