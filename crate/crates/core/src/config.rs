//! JSON model specification shared by the CLI and the bindings.

use serde::{Deserialize, Serialize};

use crate::elements;
use crate::error::{Error, Result};
use crate::fock::{FockDim, C64};
use crate::map::ProcessTensor;
use crate::models::{self, AdditionConfig, AmplifierConfig, Detector, SecondPort};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Amplifier,
    IdealAmplifier,
    Addition,
    IdealAddition,
    Identity,
    Attenuation,
    Amplification,
    PhaseRotation,
    Displacement,
    Squeezing,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: ModelKind,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector: Option<Detector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_port: Option<SecondPort>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_faulty: Option<bool>,
    /// Element parameter for `attenuation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    /// Angle for `phase_rotation`, squeezing parameter for `squeezing`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// `[re, im]` for `displacement`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<[f64; 2]>,
}

fn require(v: Option<f64>, key: &str, model: ModelKind) -> Result<f64> {
    v.ok_or_else(|| Error::Validation(format!("model {model:?} needs key `{key}`")))
}

impl ModelSpec {
    pub fn new(model: ModelKind) -> Self {
        ModelSpec {
            model,
            r: None,
            g: None,
            mu: None,
            delta: None,
            sigma: None,
            eta_m: None,
            chi: None,
            gamma: None,
            detector: None,
            second_port: None,
            n_max: None,
            include_faulty: None,
            eta: None,
            theta: None,
            alpha: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let spec: ModelSpec = serde_json::from_str(s).map_err(|e| Error::Validation(e.to_string()))?;
        spec.check_keys()?;
        Ok(spec)
    }

    /// Rejects keys that do not belong to the chosen model.
    pub fn check_keys(&self) -> Result<()> {
        let allowed: &[&str] = match self.model {
            ModelKind::Amplifier => &["R", "g", "mu", "delta", "sigma", "eta_m", "detector", "second_port", "n_max", "include_faulty"],
            ModelKind::IdealAmplifier => &["R", "g", "n_max"],
            ModelKind::Addition => &["chi", "gamma", "mu", "detector", "n_max", "include_faulty"],
            ModelKind::IdealAddition | ModelKind::Identity => &["n_max"],
            ModelKind::Attenuation => &["eta", "n_max"],
            ModelKind::Amplification => &["g", "n_max"],
            ModelKind::PhaseRotation | ModelKind::Squeezing => &["theta", "n_max"],
            ModelKind::Displacement => &["alpha", "n_max"],
        };
        let present = [
            ("R", self.r.is_some()),
            ("g", self.g.is_some()),
            ("mu", self.mu.is_some()),
            ("delta", self.delta.is_some()),
            ("sigma", self.sigma.is_some()),
            ("eta_m", self.eta_m.is_some()),
            ("chi", self.chi.is_some()),
            ("gamma", self.gamma.is_some()),
            ("detector", self.detector.is_some()),
            ("second_port", self.second_port.is_some()),
            ("n_max", self.n_max.is_some()),
            ("include_faulty", self.include_faulty.is_some()),
            ("eta", self.eta.is_some()),
            ("theta", self.theta.is_some()),
            ("alpha", self.alpha.is_some()),
        ];
        for (key, set) in present {
            if set && !allowed.contains(&key) {
                return Err(Error::Validation(format!("key `{key}` is not valid for model {:?}", self.model)));
            }
        }
        if self.r.is_some() && self.g.is_some() {
            return Err(Error::Validation("give either `R` or `g`, not both".into()));
        }
        Ok(())
    }

    fn reflectivity(&self) -> Result<f64> {
        match (self.r, self.g) {
            (Some(r), None) => Ok(r),
            (None, Some(g)) => AmplifierConfig::from_gain(g),
            _ => Ok(models::DEFAULT_R),
        }
    }

    pub fn amplifier_config(&self) -> Result<AmplifierConfig> {
        let r = self.reflectivity()?;
        let delta = self.delta.unwrap_or(models::REALISTIC_DELTA);
        let base = AmplifierConfig::realistic(r);
        let sigma = self.sigma.unwrap_or(if delta <= 1.0 + 1.0 / base.sigma { base.sigma } else { 1.0 });
        let cfg = AmplifierConfig {
            mu: self.mu.unwrap_or(base.mu),
            delta,
            sigma,
            eta_m: self.eta_m.unwrap_or(1.0),
            detector: self.detector.unwrap_or(Detector::Apd),
            second_port: self.second_port,
            n_max: self.n_max.unwrap_or(models::MODEL_N_MAX),
            include_faulty: self.include_faulty.unwrap_or(true),
            ..base
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn addition_config(&self) -> Result<AdditionConfig> {
        let base = AdditionConfig::realistic();
        let cfg = AdditionConfig {
            chi: self.chi.unwrap_or(base.chi),
            gamma: self.gamma.unwrap_or(base.gamma),
            mu: self.mu.unwrap_or(base.mu),
            detector: self.detector.unwrap_or(base.detector),
            n_max: self.n_max.unwrap_or(base.n_max),
            include_faulty: self.include_faulty.unwrap_or(true),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn n_max(&self) -> usize {
        self.n_max.unwrap_or(match self.model {
            ModelKind::Amplifier => models::MODEL_N_MAX,
            ModelKind::Addition => AdditionConfig::realistic().n_max,
            _ => models::MODEL_N_MAX,
        })
    }

    /// Builds the process tensor; physical models pass the CP/TNI gate.
    pub fn build(&self) -> Result<ProcessTensor> {
        self.check_keys()?;
        let dim = FockDim::new(self.n_max())?;
        let m = self.model;
        match m {
            ModelKind::Amplifier => models::amplifier_model(&self.amplifier_config()?),
            ModelKind::IdealAmplifier => {
                let g = match (self.r, self.g) {
                    (Some(r), None) => ((1.0 - r) / r).sqrt(),
                    (None, Some(g)) => g,
                    _ => AmplifierConfig::realistic(models::DEFAULT_R).gain(),
                };
                models::ideal_truncated_amplifier(g, dim)
            }
            ModelKind::Addition => models::addition_model(&self.addition_config()?),
            ModelKind::IdealAddition => Ok(models::ideal_photon_addition(dim)),
            ModelKind::Identity => Ok(elements::identity(dim).tensor()),
            ModelKind::Attenuation => Ok(elements::attenuation(require(self.eta, "eta", m)?, dim)?.tensor()),
            ModelKind::Amplification => Ok(elements::parametric_amplification(require(self.g, "g", m)?, dim)?.tensor()),
            ModelKind::PhaseRotation => Ok(elements::phase_rotation(require(self.theta, "theta", m)?, dim)?.tensor()),
            ModelKind::Squeezing => Ok(elements::squeezing(require(self.theta, "theta", m)?, dim)?.tensor()),
            ModelKind::Displacement => {
                let a = self.alpha.ok_or_else(|| Error::Validation("model Displacement needs key `alpha`".into()))?;
                Ok(elements::displacement(C64::new(a[0], a[1]), dim)?.tensor())
            }
        }
    }
}

/// Input-state specification for `apply`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    Fock { n: usize },
    Coherent { alpha: [f64; 2] },
    Thermal { mean_n: f64 },
    Vacuum,
}

impl StateSpec {
    pub fn build(&self, dim: FockDim) -> Result<crate::fock::DensityOperator> {
        match self {
            StateSpec::Fock { n } => crate::fock::fock_state(*n, dim),
            StateSpec::Coherent { alpha } => Ok(crate::fock::coherent_state(C64::new(alpha[0], alpha[1]), dim)),
            StateSpec::Thermal { mean_n } => crate::fock::thermal_state(*mean_n, dim),
            StateSpec::Vacuum => Ok(crate::fock::vacuum(dim)),
        }
    }
}
