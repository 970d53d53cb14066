//! End-to-end heralded models: the single-photon-resource noiseless amplifier
//! and conditional photon addition, each as a sum of a correctly heralded and a
//! faulty branch.
//!
//! Amplifier mode labels: `s` input signal, `u` its mode-mismatched part, `a`
//! ancilla photon (later the output), `v` ancilla vacuum. The asymmetric
//! beam splitter acts on `(a, v)`, the symmetric one on `(s, v)`; detector H
//! watches output `v`, detector O watches output `s`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::elements::{beam_splitter_unitary, noisy_single_photon};
use crate::error::{Error, Result};
use crate::fock::{creation, fidelity, vacuum, DensityOperator, FockDim, C64, ZERO};
use crate::map::{
    combine_heralding, is_cp, is_trace_nonincreasing, phase_invariance_defect, success_probability, KrausSet,
    ProcessTensor, DEFAULT_TOL,
};

pub const MODEL_N_MAX: usize = 8;
pub const REALISTIC_MU: f64 = 0.11;
pub const REALISTIC_DELTA: f64 = 1.089;
/// Source noise width used with `δ = 1.089`; not fixed by the experiment.
pub const REALISTIC_SIGMA: f64 = 1.1;
pub const DEFAULT_R: f64 = 0.2;
pub const REALISTIC_CHI: f64 = 0.105;
pub const REALISTIC_GAMMA: f64 = 0.425;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Detector {
    Apd,
    PhotonCounter,
}

/// Condition placed on the second symmetric-beam-splitter output.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondPort {
    Vacuum,
    ApdNoClick,
    Ignore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmplifierConfig {
    /// Asymmetric beam-splitter reflectivity.
    pub r: f64,
    pub mu: f64,
    pub delta: f64,
    /// Excess-noise width of the photon source; 1 for the two-level mixture.
    pub sigma: f64,
    pub eta_m: f64,
    pub detector: Detector,
    /// Defaults to `Vacuum` for a photon counter and `ApdNoClick` for an APD.
    pub second_port: Option<SecondPort>,
    pub n_max: usize,
    pub include_faulty: bool,
}

impl AmplifierConfig {
    /// Realistic parameters: `μ = 0.11`, `δ = 1.089`, APD herald.
    pub fn realistic(r: f64) -> Self {
        AmplifierConfig {
            r,
            mu: REALISTIC_MU,
            delta: REALISTIC_DELTA,
            sigma: REALISTIC_SIGMA,
            eta_m: 1.0,
            detector: Detector::Apd,
            second_port: None,
            n_max: MODEL_N_MAX,
            include_faulty: true,
        }
    }

    /// Pure photon, unit-efficiency counter, perfect mode matching.
    pub fn ideal(r: f64) -> Self {
        AmplifierConfig { mu: 1.0, delta: 2.0, sigma: 1.0, detector: Detector::PhotonCounter, ..Self::realistic(r) }
    }

    /// Pure photon, APD herald with `μ = 0.11`.
    pub fn detector_limited(r: f64) -> Self {
        AmplifierConfig { delta: 2.0, sigma: 1.0, ..Self::realistic(r) }
    }

    /// Imperfect photon, ideal counter.
    pub fn source_limited(r: f64) -> Self {
        AmplifierConfig { mu: 1.0, detector: Detector::PhotonCounter, ..Self::realistic(r) }
    }

    pub fn from_gain(g: f64) -> Result<f64> {
        if !(g >= 1.0) {
            return Err(Error::Parameter(format!("amplifier gain must be >= 1, got {g}")));
        }
        Ok(1.0 / (1.0 + g * g))
    }

    pub fn gain(&self) -> f64 {
        ((1.0 - self.r) / self.r).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::Parameter(format!("R must lie in (0, 1), got {}", self.r)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Parameter(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        if !(0.0..=2.0).contains(&self.delta) {
            return Err(Error::Parameter(format!("delta must lie in [0, 2], got {}", self.delta)));
        }
        if !(self.sigma >= 1.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("sigma must be >= 1, got {}", self.sigma)));
        }
        if !(self.eta_m > 0.0 && self.eta_m <= 1.0) {
            return Err(Error::Parameter(format!("eta_m must lie in (0, 1], got {}", self.eta_m)));
        }
        FockDim::new(self.n_max)?;
        Ok(())
    }

    fn second_port(&self) -> SecondPort {
        self.second_port.unwrap_or(match self.detector {
            Detector::PhotonCounter => SecondPort::Vacuum,
            Detector::Apd => SecondPort::ApdNoClick,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdditionConfig {
    pub chi: f64,
    pub gamma: f64,
    pub mu: f64,
    pub detector: Detector,
    pub n_max: usize,
    pub include_faulty: bool,
}

impl AdditionConfig {
    /// Realistic parameters: `χ = 0.105`, `γ = 0.425`, APD with `μ = 0.11`.
    pub fn realistic() -> Self {
        AdditionConfig { chi: REALISTIC_CHI, gamma: REALISTIC_GAMMA, mu: REALISTIC_MU, detector: Detector::Apd, n_max: MODEL_N_MAX, include_faulty: true }
    }

    pub fn ideal(chi: f64) -> Self {
        AdditionConfig { chi, gamma: 0.0, mu: 1.0, detector: Detector::PhotonCounter, ..Self::realistic() }
    }

    /// Parasitic gain only, at vanishing pair rate.
    pub fn parasite_only(chi: f64) -> Self {
        AdditionConfig { chi, gamma: REALISTIC_GAMMA, ..Self::realistic() }
    }

    pub fn gain(&self) -> f64 {
        self.chi.cosh().powi(2)
    }

    pub fn parasite_gain(&self) -> f64 {
        (self.gamma * self.chi).cosh().powi(2)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.chi >= 0.0 && self.chi.is_finite()) {
            return Err(Error::Parameter(format!("chi must be >= 0, got {}", self.chi)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Parameter(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(self.mu > 0.0 && self.mu <= 1.0) {
            return Err(Error::Parameter(format!("mu must lie in (0, 1], got {}", self.mu)));
        }
        FockDim::new(self.n_max)?;
        Ok(())
    }
}

fn diag(v: &[f64]) -> DMatrix<C64> {
    DMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|&x| C64::from(x))))
}

fn indicator(d: usize, n: usize) -> Vec<f64> {
    (0..d).map(|k| if k == n { 1.0 } else { 0.0 }).collect()
}

fn no_click(d: usize, mu: f64) -> Vec<f64> {
    (0..d).map(|n| (1.0 - mu).powi(n as i32)).collect()
}

fn click(d: usize, mu: f64) -> Vec<f64> {
    no_click(d, mu).into_iter().map(|q| 1.0 - q).collect()
}

/// Effective POVM on a mode whose photons split 50/50 onto two detectors
/// with diagonal conditions `first` and `second`.
fn split_condition(first: &[f64], second: &[f64]) -> Vec<f64> {
    let d = first.len();
    let mut binom = vec![1.0f64];
    (0..d)
        .map(|n| {
            if n > 0 {
                let mut next = vec![1.0; n + 1];
                for k in 1..n {
                    next[k] = binom[k - 1] + binom[k];
                }
                binom = next;
            }
            let scale = 0.5f64.powi(n as i32);
            (0..=n).map(|k| binom[k] * scale * first[k] * second[n - k]).sum()
        })
        .collect()
}

/// Diagonal conditions of one heralding branch.
struct Branch {
    herald_matched: Vec<f64>,
    herald_mismatched: Vec<f64>,
}

fn amplifier_branch(cfg: &AmplifierConfig, dim: FockDim, branch: &Branch) -> Result<KrausSet> {
    let d = dim.size();
    let other = match cfg.second_port() {
        SecondPort::Vacuum => indicator(d, 0),
        SecondPort::ApdNoClick => no_click(d, cfg.mu),
        SecondPort::Ignore => vec![1.0; d],
    };

    let mut signal = KrausSet::identity(dim, 1);
    if cfg.eta_m < 1.0 {
        let mismatch = KrausSet::new(dim, 2, 2, vec![beam_splitter_unitary(cfg.eta_m.sqrt(), dim)])?
            .inject_ancilla(1, &vacuum(dim))?
            .project_mode(1, &diag(&split_condition(&branch.herald_mismatched, &other)))?;
        signal = signal.then(&mismatch)?;
    } else if branch.herald_mismatched[0] == 0.0 {
        return signal.scaled(0.0);
    }

    let photon = noisy_single_photon(cfg.delta, cfg.sigma, dim)?;
    let resource = KrausSet::preparation(&photon)
        .parallel(&KrausSet::preparation(&vacuum(dim)))?
        .then_local(&beam_splitter_unitary((1.0 - cfg.r).sqrt(), dim), &[0, 1])?;

    signal
        .parallel(&resource)?
        .then_local(&beam_splitter_unitary(std::f64::consts::FRAC_1_SQRT_2, dim), &[0, 2])?
        .project_mode(2, &diag(&branch.herald_matched))?
        .project_mode(0, &diag(&other))
}

fn gate(t: ProcessTensor, what: &str) -> Result<ProcessTensor> {
    if !is_cp(&t, DEFAULT_TOL) {
        return Err(Error::Unphysical(format!("{what} is not completely positive")));
    }
    if !is_trace_nonincreasing(&t, DEFAULT_TOL) {
        return Err(Error::Unphysical(format!("{what} increases the trace")));
    }
    Ok(t)
}

/// Correct and faulty amplifier branches as Kraus sets.
pub fn amplifier_kraus(cfg: &AmplifierConfig) -> Result<(KrausSet, Option<KrausSet>)> {
    cfg.validate()?;
    let dim = FockDim::new(cfg.n_max)?;
    let d = dim.size();
    let (correct, faulty) = match cfg.detector {
        Detector::Apd => (
            Branch { herald_matched: click(d, cfg.mu), herald_mismatched: no_click(d, cfg.mu) },
            Branch { herald_matched: vec![1.0; d], herald_mismatched: click(d, cfg.mu) },
        ),
        Detector::PhotonCounter => (
            Branch { herald_matched: indicator(d, 1), herald_mismatched: indicator(d, 0) },
            Branch { herald_matched: indicator(d, 0), herald_mismatched: indicator(d, 1) },
        ),
    };
    let c = amplifier_branch(cfg, dim, &correct)?;
    let f = if cfg.include_faulty && cfg.eta_m < 1.0 { Some(amplifier_branch(cfg, dim, &faulty)?) } else { None };
    Ok((c, f))
}

pub fn amplifier_branches(cfg: &AmplifierConfig) -> Result<(ProcessTensor, ProcessTensor)> {
    let (c, f) = amplifier_kraus(cfg)?;
    let dim = c.dim();
    let faulty = f.map(|k| k.to_tensor()).unwrap_or_else(|| ProcessTensor::zero(dim, 1, 1));
    Ok((c.to_tensor(), faulty))
}

pub fn amplifier_model(cfg: &AmplifierConfig) -> Result<ProcessTensor> {
    let (c, f) = amplifier_branches(cfg)?;
    gate(combine_heralding(&c, &f)?, "amplifier model")
}

/// `C = g^n Θ(n)`: keeps `|0⟩` and `g|1⟩`, removes everything above.
pub fn ideal_truncated_amplifier(g: f64, dim: FockDim) -> Result<ProcessTensor> {
    if !(g >= 1.0) {
        return Err(Error::Parameter(format!("amplifier gain must be >= 1, got {g}")));
    }
    let d = dim.size();
    let mut c = DMatrix::from_element(d, d, ZERO);
    c[(0, 0)] = C64::from(1.0);
    c[(1, 1)] = C64::from(g);
    Ok(KrausSet::single(dim, c)?.to_tensor())
}

/// Bare `a†`; trace increasing, kept as a reference map.
pub fn ideal_photon_addition(dim: FockDim) -> ProcessTensor {
    KrausSet::single(dim, creation(dim)).expect("square operator").to_tensor()
}

/// Click and no-click probabilities of the herald detector for a thermal
/// parasite of mean photon number `h − 1`.
pub fn parasite_probabilities(cfg: &AdditionConfig) -> (f64, f64) {
    let nbar = cfg.parasite_gain() - 1.0;
    match cfg.detector {
        Detector::Apd => {
            let quiet = 1.0 / (1.0 + cfg.mu * nbar);
            (1.0 - quiet, quiet)
        }
        Detector::PhotonCounter => {
            let h = nbar + 1.0;
            (nbar / (h * h), 1.0 / h)
        }
    }
}

/// `⟨n + j| K_j |n⟩ = tanh^j χ · √C(n + j, j) / cosh^{n+1} χ`: the signal
/// operator left by a two-mode squeezer on a vacuum idler found in `|j⟩`.
fn squeezer_idler_operator(chi: f64, j: usize, d: usize) -> DMatrix<C64> {
    let (t, c) = (chi.tanh(), chi.cosh());
    let mut k = DMatrix::from_element(d, d, ZERO);
    let mut binom = 1.0f64;
    for n in 0..d.saturating_sub(j) {
        if n > 0 {
            binom *= (n + j) as f64 / n as f64;
        }
        k[(n + j, n)] = C64::from(t.powi(j as i32) * binom.sqrt() / c.powi(n as i32 + 1));
    }
    k
}

/// Correct and faulty photon-addition branches, single-mode Kraus form.
pub fn addition_kraus(cfg: &AdditionConfig) -> Result<(KrausSet, Option<KrausSet>)> {
    cfg.validate()?;
    let dim = FockDim::new(cfg.n_max)?;
    let d = dim.size();
    let herald = match cfg.detector {
        Detector::Apd => click(d, cfg.mu),
        Detector::PhotonCounter => indicator(d, 1),
    };
    let (p_click, p_quiet) = if cfg.gamma > 0.0 { parasite_probabilities(cfg) } else { (0.0, 1.0) };
    let ops: Vec<DMatrix<C64>> = (0..d)
        .filter(|&j| herald[j] > 0.0)
        .map(|j| squeezer_idler_operator(cfg.chi, j, d) * C64::from((herald[j] * p_quiet).sqrt()))
        .collect();
    let correct = KrausSet::new(dim, 1, 1, ops)?;
    let faulty = if cfg.include_faulty && p_click > 0.0 { Some(KrausSet::identity(dim, 1).scaled(p_click)?) } else { None };
    Ok((correct, faulty))
}

/// Both addition branches merged into one gated Kraus set; avoids the dense
/// tensor at large truncation.
pub fn addition_model_kraus(cfg: &AdditionConfig) -> Result<KrausSet> {
    let (c, f) = addition_kraus(cfg)?;
    let mut ops = c.operators().to_vec();
    if let Some(f) = f {
        ops.extend(f.operators().iter().cloned());
    }
    let k = KrausSet::new(c.dim(), 1, 1, ops)?;
    if !k.is_trace_nonincreasing(DEFAULT_TOL) {
        return Err(Error::Unphysical("photon-addition model increases the trace".into()));
    }
    Ok(k)
}

pub fn addition_branches(cfg: &AdditionConfig) -> Result<(ProcessTensor, ProcessTensor)> {
    let (c, f) = addition_kraus(cfg)?;
    let dim = c.dim();
    let faulty = f.map(|k| k.to_tensor()).unwrap_or_else(|| ProcessTensor::zero(dim, 1, 1));
    Ok((c.to_tensor(), faulty))
}

pub fn addition_model(cfg: &AdditionConfig) -> Result<ProcessTensor> {
    let (c, f) = addition_branches(cfg)?;
    gate(combine_heralding(&c, &f)?, "photon-addition model")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub success_probability: f64,
    pub output_mean_photons: f64,
    pub output_purity: f64,
    /// Fidelity of the renormalized output with the matching target, when given.
    pub fidelity: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub n_max: usize,
    pub phase_invariance_defect: f64,
    pub completely_positive: bool,
    pub trace_nonincreasing: bool,
    pub rows: Vec<ReportRow>,
    /// `diagonal[m][k] = F^{m,m}_{k,k}`.
    pub diagonal: Vec<Vec<f64>>,
}

pub fn model_report(t: &ProcessTensor, inputs: &[DensityOperator]) -> Result<ModelReport> {
    model_report_with_targets(t, inputs, &[])
}

pub fn model_report_with_targets(t: &ProcessTensor, inputs: &[DensityOperator], targets: &[DensityOperator]) -> Result<ModelReport> {
    if !targets.is_empty() && targets.len() != inputs.len() {
        return Err(Error::DimensionMismatch("one target per input expected".into()));
    }
    let mut rows = Vec::with_capacity(inputs.len());
    for (i, rho) in inputs.iter().enumerate() {
        let out = crate::map::apply(t, rho)?;
        let p = success_probability(t, rho)?;
        let (mean, purity, fid) = if p > 0.0 {
            let norm = out.normalized()?;
            let fid = match targets.get(i) {
                Some(target) => Some(fidelity(&norm, &target.normalized()?)?),
                None => None,
            };
            (norm.mean_photon_number(), norm.purity(), fid)
        } else {
            (0.0, 0.0, None)
        };
        rows.push(ReportRow { index: i, success_probability: p, output_mean_photons: mean, output_purity: purity, fidelity: fid });
    }
    Ok(ModelReport {
        n_max: t.dim().n_max(),
        phase_invariance_defect: phase_invariance_defect(t),
        completely_positive: is_cp(t, DEFAULT_TOL),
        trace_nonincreasing: is_trace_nonincreasing(t, DEFAULT_TOL),
        rows,
        diagonal: t.diagonal(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_ket, coherent_state, fock_state};
    use crate::map::apply;
    use approx::assert_abs_diff_eq;

    #[test]
    fn closed_form_addition_matches_squeezer_circuit() {
        for detector in [Detector::Apd, Detector::PhotonCounter] {
            let cfg = AdditionConfig { detector, n_max: 6, ..AdditionConfig::realistic() };
            let dim = FockDim::new(6).unwrap();
            let herald = match detector {
                Detector::Apd => click(7, cfg.mu),
                Detector::PhotonCounter => indicator(7, 1),
            };
            let circuit = KrausSet::new(dim, 2, 2, vec![crate::elements::two_mode_squeezer_unitary(cfg.gain(), dim)])
                .unwrap()
                .inject_ancilla(1, &vacuum(dim))
                .unwrap()
                .project_mode(1, &diag(&herald))
                .unwrap()
                .scaled(parasite_probabilities(&cfg).1)
                .unwrap();
            let (closed, _) = addition_kraus(&cfg).unwrap();
            assert!(closed.to_tensor().max_abs_diff(&circuit.to_tensor()) < 1e-14);
        }
    }

    #[test]
    fn split_condition_matches_closed_form() {
        let mu = 0.3;
        let f = split_condition(&click(6, mu), &no_click(6, mu));
        for (n, v) in f.iter().enumerate() {
            assert_abs_diff_eq!(*v, (1.0 - mu / 2.0).powi(n as i32) - (1.0 - mu).powi(n as i32), epsilon = 1e-15);
        }
    }

    #[test]
    fn ideal_scissors_output() {
        let cfg = AmplifierConfig::ideal(0.2);
        let t = amplifier_model(&cfg).unwrap();
        let dim = t.dim();
        let alpha = C64::new(0.1, 0.05);
        let out = apply(&t, &coherent_state(alpha, dim)).unwrap().normalized().unwrap();
        let mut ket = DVector::from_element(dim.size(), ZERO);
        ket[0] = C64::from(1.0);
        ket[1] = alpha * 2.0;
        let target = DensityOperator::from_ket(dim, 1, &ket).unwrap().normalized().unwrap();
        assert!(fidelity(&out, &target).unwrap() > 1.0 - 1e-12);
        // P = R |⟨0|α⟩|² (1 + g²|α|²)/2
        let p = success_probability(&t, &coherent_state(alpha, dim)).unwrap();
        let c0 = coherent_ket(alpha, dim)[0].norm_sqr();
        assert_abs_diff_eq!(p, 0.2 * c0 * (1.0 + 4.0 * alpha.norm_sqr()) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn ideal_truncated_amplifier_properties() {
        let dim = FockDim::new(6).unwrap();
        let t = ideal_truncated_amplifier(2.0, dim).unwrap();
        let diag = t.diagonal();
        for row in &diag {
            assert!(row[2..].iter().all(|&v| v == 0.0));
        }
        assert!(ideal_truncated_amplifier(0.5, dim).is_err());
    }

    #[test]
    fn photon_addition_reference() {
        let dim = FockDim::new(5).unwrap();
        let t = ideal_photon_addition(dim);
        let out = apply(&t, &fock_state(2, dim).unwrap()).unwrap();
        assert_abs_diff_eq!(out.get(3, 3).re, 3.0, epsilon = 1e-14);
        assert!(!is_trace_nonincreasing(&t, DEFAULT_TOL));
    }

    #[test]
    fn models_pass_gates() {
        let mut cfg = AmplifierConfig::realistic(0.2);
        cfg.eta_m = 0.9;
        let t = amplifier_model(&cfg).unwrap();
        assert!(phase_invariance_defect(&t) <= 1e-12);
        let a = addition_model(&AdditionConfig::realistic()).unwrap();
        assert!(phase_invariance_defect(&a) <= 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(AmplifierConfig { r: 1.0, ..AmplifierConfig::ideal(0.2) }.validate().is_err());
        assert!(AmplifierConfig { eta_m: 0.0, ..AmplifierConfig::ideal(0.2) }.validate().is_err());
        assert!(AdditionConfig { chi: -0.1, ..AdditionConfig::realistic() }.validate().is_err());
        assert_abs_diff_eq!(AmplifierConfig::from_gain(2.0).unwrap(), 0.2, epsilon = 1e-15);
    }

    #[test]
    fn empty_report() {
        let dim = FockDim::new(3).unwrap();
        let r = model_report(&ProcessTensor::identity(dim, 1), &[]).unwrap();
        assert!(r.rows.is_empty());
    }
}
