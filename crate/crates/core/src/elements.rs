//! Catalog of basic optical elements, each available as a Kraus set (hence a
//! process tensor) and as a closed-form transfer kernel.
//!
//! Unitaries are built from exact normal-ordered expansions, so every matrix
//! element inside the cutoff is the untruncated one.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{vacuum, wigner_basis_matrix, wigner_of, DensityOperator, FockDim, QuadratureGrid, WignerField, C64, ZERO};
use crate::map::{KrausSet, ProcessTensor};
use crate::transfer::{AffineDelta, GaussianKernel, TransferKernel};

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

fn binom(n: usize, k: usize, fact: &[f64]) -> f64 {
    if k > n {
        0.0
    } else {
        fact[n] / (fact[k] * fact[n - k])
    }
}

/// A catalog entry in both representations.
#[derive(Clone, Debug)]
pub struct Element {
    pub name: String,
    pub kraus: KrausSet,
    pub kernel: TransferKernel,
}

impl Element {
    /// Dense process tensor; size grows as `D^(4·modes)`.
    pub fn tensor(&self) -> ProcessTensor {
        self.kraus.to_tensor()
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        self.kraus.apply(rho)
    }
}

fn finite(v: f64, what: &str) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{what} must be finite")))
    }
}

pub fn identity(dim: FockDim) -> Element {
    Element { name: "identity".into(), kraus: KrausSet::identity(dim, 1), kernel: TransferKernel::identity() }
}

/// `U = exp(-iθ n)`, turning `α` into `α e^{-iθ}`.
pub fn phase_rotation_unitary(theta: f64, dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    DMatrix::from_fn(d, d, |l, n| if l == n { C64::from_polar(1.0, -theta * n as f64) } else { ZERO })
}

pub fn phase_rotation(theta: f64, dim: FockDim) -> Result<Element> {
    finite(theta, "rotation angle")?;
    let (c, s) = (theta.cos(), theta.sin());
    let forward = DMatrix::from_row_slice(2, 2, &[c, s, -s, c]);
    Ok(Element {
        name: "phase_rotation".into(),
        kraus: KrausSet::single(dim, phase_rotation_unitary(theta, dim))?,
        kernel: TransferKernel::AffineDelta(AffineDelta::new(forward, DVector::zeros(2))?),
    })
}

/// `⟨l|D(α)|n⟩` from `D = e^{-|α|²/2} e^{α a†} e^{-ᾱ a}`.
pub fn displacement_unitary(alpha: C64, dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    let fact = factorials(d);
    let pre = (-0.5 * alpha.norm_sqr()).exp();
    let ma = -alpha.conj();
    DMatrix::from_fn(d, d, |l, n| {
        let mut s = ZERO;
        for j in 0..=l.min(n) {
            let c = (fact[l] * fact[n]).sqrt() / (fact[j] * fact[l - j] * fact[n - j]);
            s += alpha.powu((l - j) as u32) * ma.powu((n - j) as u32) * c;
        }
        s * pre
    })
}

pub fn displacement(alpha: C64, dim: FockDim) -> Result<Element> {
    finite(alpha.re, "displacement")?;
    finite(alpha.im, "displacement")?;
    let r2 = std::f64::consts::SQRT_2;
    let kernel = AffineDelta::new(DMatrix::identity(2, 2), DVector::from_vec(vec![r2 * alpha.re, r2 * alpha.im]))?;
    Ok(Element {
        name: "displacement".into(),
        kraus: KrausSet::single(dim, displacement_unitary(alpha, dim))?,
        kernel: TransferKernel::AffineDelta(kernel),
    })
}

/// `S(r) = exp(r (a² − a†²)/2)`, squeezing `x` by `e^{-r}`.
pub fn squeezing_unitary(r: f64, dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    let fact = factorials(2 * d + 2);
    let tau = r.tanh();
    let ch = r.cosh();
    let mut u = DMatrix::from_element(d, d, ZERO);
    for n in 0..d {
        // exp(τ/2 a²)|n⟩, then cosh^{-(n'+1/2)}, then exp(-τ/2 a†²)
        for i in 0..=n / 2 {
            let mid = n - 2 * i;
            let a1 = (0.5 * tau).powi(i as i32) / fact[i] * (fact[n] / fact[mid]).sqrt();
            let scale = ch.powf(-(mid as f64 + 0.5));
            let mut q = 0;
            while mid + 2 * q < d {
                let l = mid + 2 * q;
                let a2 = (-0.5 * tau).powi(q as i32) / fact[q] * (fact[l] / fact[mid]).sqrt();
                u[(l, n)] += C64::from(a1 * scale * a2);
                q += 1;
            }
        }
    }
    u
}

pub fn squeezing(r: f64, dim: FockDim) -> Result<Element> {
    finite(r, "squeezing parameter")?;
    let forward = DMatrix::from_row_slice(2, 2, &[(-r).exp(), 0.0, 0.0, r.exp()]);
    Ok(Element {
        name: "squeezing".into(),
        kraus: KrausSet::single(dim, squeezing_unitary(r, dim))?,
        kernel: TransferKernel::AffineDelta(AffineDelta::new(forward, DVector::zeros(2))?),
    })
}

/// Two-mode beam splitter with amplitude transmission `t`:
/// `|α₁, α₂⟩ → |t α₁ + r α₂, t α₂ − r α₁⟩`, `r = √(1 − t²)`.
pub fn beam_splitter_unitary(t: f64, dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    let fact = factorials(2 * d);
    let r = (1.0 - t * t).max(0.0).sqrt();
    let mut u = DMatrix::from_element(d * d, d * d, ZERO);
    for n1 in 0..d {
        for n2 in 0..d {
            let total = n1 + n2;
            let norm = 1.0 / (fact[n1] * fact[n2]).sqrt();
            // a1† → t a1† − r a2†, a2† → r a1† + t a2†
            for i in 0..=n1 {
                let c1 = binom(n1, i, &fact) * t.powi(i as i32) * (-r).powi((n1 - i) as i32);
                if c1 == 0.0 {
                    continue;
                }
                for j in 0..=n2 {
                    let c2 = binom(n2, j, &fact) * r.powi(j as i32) * t.powi((n2 - j) as i32);
                    if c2 == 0.0 {
                        continue;
                    }
                    let l1 = i + j;
                    let l2 = total - l1;
                    if l1 >= d || l2 >= d {
                        continue;
                    }
                    let amp = c1 * c2 * norm * (fact[l1] * fact[l2]).sqrt();
                    u[(l1 * d + l2, n1 * d + n2)] += C64::from(amp);
                }
            }
        }
    }
    u
}

pub fn beam_splitter(t: f64, dim: FockDim) -> Result<Element> {
    if !(t.abs() <= 1.0) {
        return Err(Error::Parameter(format!("beam-splitter transmission must satisfy |t| <= 1, got {t}")));
    }
    let r = (1.0 - t * t).max(0.0).sqrt();
    // (x1', p1', x2', p2') = F (x1, p1, x2, p2)
    #[rustfmt::skip]
    let forward = DMatrix::from_row_slice(4, 4, &[
        t, 0.0, r, 0.0,
        0.0, t, 0.0, r,
        -r, 0.0, t, 0.0,
        0.0, -r, 0.0, t,
    ]);
    Ok(Element {
        name: "beam_splitter".into(),
        kraus: KrausSet::new(dim, 2, 2, vec![beam_splitter_unitary(t, dim)])?,
        kernel: TransferKernel::AffineDelta(AffineDelta::new(forward, DVector::zeros(4))?),
    })
}

/// Two-mode squeezer `exp(χ (a†b† − ab))` with gain `g = cosh² χ`.
pub fn two_mode_squeezer_unitary(g: f64, dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    let fact = factorials(2 * d);
    let chi = g.sqrt().acosh();
    let lam = chi.tanh();
    let ch = chi.cosh();
    let mut u = DMatrix::from_element(d * d, d * d, ZERO);
    for n1 in 0..d {
        for n2 in 0..d {
            for i in 0..=n1.min(n2) {
                let (p, q) = (n1 - i, n2 - i);
                let a1 = (-lam).powi(i as i32) / fact[i] * (fact[n1] * fact[n2] / (fact[p] * fact[q])).sqrt();
                let scale = ch.powf(-((p + q + 1) as f64));
                let mut j = 0;
                while p + j < d && q + j < d {
                    let a2 = lam.powi(j as i32) / fact[j] * (fact[p + j] * fact[q + j] / (fact[p] * fact[q])).sqrt();
                    u[((p + j) * d + q + j, n1 * d + n2)] += C64::from(a1 * scale * a2);
                    j += 1;
                }
            }
        }
    }
    u
}

fn check_gain(g: f64) -> Result<()> {
    if !(g >= 1.0) || !g.is_finite() {
        return Err(Error::Parameter(format!("gain must be >= 1, got {g}")));
    }
    Ok(())
}

pub fn parametric_down_conversion(g: f64, dim: FockDim) -> Result<Element> {
    check_gain(g)?;
    let (a, b) = (g.sqrt(), (g - 1.0).sqrt());
    #[rustfmt::skip]
    let forward = DMatrix::from_row_slice(4, 4, &[
        a, 0.0, b, 0.0,
        0.0, a, 0.0, -b,
        b, 0.0, a, 0.0,
        0.0, -b, 0.0, a,
    ]);
    Ok(Element {
        name: "parametric_down_conversion".into(),
        kraus: KrausSet::new(dim, 2, 2, vec![two_mode_squeezer_unitary(g, dim)])?,
        kernel: TransferKernel::AffineDelta(AffineDelta::new(forward, DVector::zeros(4))?),
    })
}

/// Loss channel: beam splitter `t = √η` with a vacuum ancilla, ancilla traced.
pub fn attenuation_kraus(eta: f64, dim: FockDim) -> Result<KrausSet> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Parameter(format!("attenuation needs 0 <= eta <= 1, got {eta}")));
    }
    let bs = KrausSet::new(dim, 2, 2, vec![beam_splitter_unitary(eta.sqrt(), dim)])?;
    bs.inject_ancilla(1, &vacuum(dim))?.trace_out(1)
}

pub fn attenuation(eta: f64, dim: FockDim) -> Result<Element> {
    let kraus = attenuation_kraus(eta, dim)?;
    let kernel = if eta == 1.0 {
        TransferKernel::identity()
    } else {
        gaussian_channel(&GaussianChannelSpec::symmetric(eta.sqrt(), (1.0 - eta).sqrt(), -1))?
    };
    Ok(Element { name: "attenuation".into(), kraus, kernel })
}

/// Phase-insensitive amplifier: two-mode squeezer with a vacuum idler, idler traced.
pub fn amplification_kraus(g: f64, dim: FockDim) -> Result<KrausSet> {
    check_gain(g)?;
    let s = KrausSet::new(dim, 2, 2, vec![two_mode_squeezer_unitary(g, dim)])?;
    s.inject_ancilla(1, &vacuum(dim))?.trace_out(1)
}

pub fn parametric_amplification(g: f64, dim: FockDim) -> Result<Element> {
    let kraus = amplification_kraus(g, dim)?;
    let kernel = if g == 1.0 {
        TransferKernel::identity()
    } else {
        gaussian_channel(&GaussianChannelSpec::symmetric(g.sqrt(), (g - 1.0).sqrt(), 1))?
    };
    Ok(Element { name: "parametric_amplification".into(), kraus, kernel })
}

/// Per-quadrature mixing matrices `M_i = [[μ_i, ν_i], [ε ν_i, μ_i]]` of a mode
/// with a vacuum ancilla.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianChannelSpec {
    pub mu_x: f64,
    pub nu_x: f64,
    pub eps_x: i8,
    pub mu_p: f64,
    pub nu_p: f64,
    pub eps_p: i8,
}

impl GaussianChannelSpec {
    pub fn symmetric(mu: f64, nu: f64, eps: i8) -> Self {
        GaussianChannelSpec { mu_x: mu, nu_x: nu, eps_x: eps, mu_p: mu, nu_p: nu, eps_p: eps }
    }

    pub fn validate(&self) -> Result<()> {
        for (mu, nu, eps, q) in [(self.mu_x, self.nu_x, self.eps_x, "x"), (self.mu_p, self.nu_p, self.eps_p, "p")] {
            if eps != 1 && eps != -1 {
                return Err(Error::Parameter(format!("ε_{q} must be ±1")));
            }
            let det = mu * mu - eps as f64 * nu * nu;
            if (det - 1.0).abs() > 1e-12 {
                return Err(Error::Parameter(format!("det(M_{q}) = {det}, expected 1")));
            }
        }
        Ok(())
    }
}

/// Gaussian transfer kernel `(1/(π ν_x ν_p)) exp(-((x'-μ_x x)/ν_x)²) exp(-((p'-μ_p p)/ν_p)²)`.
pub fn gaussian_channel(spec: &GaussianChannelSpec) -> Result<TransferKernel> {
    spec.validate()?;
    if spec.nu_x == 0.0 || spec.nu_p == 0.0 {
        return Err(Error::DegenerateChannel("ν = 0 collapses to a coordinate change".into()));
    }
    Ok(TransferKernel::Gaussian(GaussianKernel::diagonal(spec.mu_x, spec.nu_x.abs(), spec.mu_p, spec.nu_p.abs())?))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DetectorKind {
    ApdClick,
    PhotonCounter(usize),
    VacuumProjector,
}

/// A detector outcome as a POVM element.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorElement {
    pub kind: DetectorKind,
    pub efficiency: f64,
}

/// On/off detector click with efficiency `μ`: `Π = Σ (1 − (1−μ)ⁿ) |n⟩⟨n|`.
pub fn apd_click(mu: f64) -> Result<DetectorElement> {
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Parameter(format!("APD efficiency must be in (0, 1], got {mu}")));
    }
    Ok(DetectorElement { kind: DetectorKind::ApdClick, efficiency: mu })
}

pub fn photon_counter(n: usize) -> DetectorElement {
    DetectorElement { kind: DetectorKind::PhotonCounter(n), efficiency: 1.0 }
}

pub fn vacuum_projector() -> DetectorElement {
    DetectorElement { kind: DetectorKind::VacuumProjector, efficiency: 1.0 }
}

impl DetectorElement {
    /// Diagonal of the POVM element in the Fock basis.
    pub fn diagonal(&self, dim: FockDim) -> Result<Vec<f64>> {
        let d = dim.size();
        Ok(match self.kind {
            DetectorKind::ApdClick => (0..d).map(|n| 1.0 - (1.0 - self.efficiency).powi(n as i32)).collect(),
            DetectorKind::PhotonCounter(k) => {
                dim.check(k)?;
                (0..d).map(|n| if n == k { 1.0 } else { 0.0 }).collect()
            }
            DetectorKind::VacuumProjector => (0..d).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect(),
        })
    }

    pub fn povm(&self, dim: FockDim) -> Result<DMatrix<C64>> {
        Ok(DMatrix::from_diagonal(&DVector::from_iterator(dim.size(), self.diagonal(dim)?.into_iter().map(C64::from))))
    }

    /// `I − Π`, e.g. the no-click element of an APD.
    pub fn complement(&self, dim: FockDim) -> Result<DMatrix<C64>> {
        let d = dim.size();
        Ok(DMatrix::identity(d, d) - self.povm(dim)?)
    }

    /// Measurement kernel `2π W_Π(x, p)`.
    pub fn kernel_at(&self, dim: FockDim, x: f64, p: f64) -> Result<f64> {
        let diag = self.diagonal(dim)?;
        let w = wigner_basis_matrix(dim, x, p);
        Ok(2.0 * PI * diag.iter().enumerate().map(|(n, v)| v * w[(n, n)].re).sum::<f64>())
    }

    pub fn kernel(&self, dim: FockDim, grid: &QuadratureGrid) -> Result<WignerField> {
        let rho = DensityOperator::from_matrix(dim, 1, self.povm(dim)?)?;
        let mut f = wigner_of(&rho, grid);
        for v in &mut f.values {
            *v *= 2.0 * PI;
        }
        Ok(f)
    }
}

/// Imperfect heralded photon `(δ/2)|1⟩⟨1| + (1 − δ/2)|0⟩⟨0|`, with `W(0,0) = (1 − δ)/π`.
pub fn experimental_single_photon(delta: f64, dim: FockDim) -> Result<DensityOperator> {
    noisy_single_photon(delta, 1.0, dim)
}

/// Heralded photon with excess noise of width `σ ≥ 1`:
/// `W(r) = [(1 − δ) + δ r²/σ] e^{-r²/σ} / (πσ)`, so `W(0,0) = (1 − δ)/(πσ)`.
/// `σ = 1` is [`experimental_single_photon`]; `σ > 1` adds multi-photon terms.
/// Renormalized over the truncated space when `σ > 1`.
pub fn noisy_single_photon(delta: f64, sigma: f64, dim: FockDim) -> Result<DensityOperator> {
    if !(0.0..=2.0).contains(&delta) {
        return Err(Error::Parameter(format!("δ must lie in [0, 2], got {delta}")));
    }
    if !(sigma >= 1.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("σ must be >= 1, got {sigma}")));
    }
    let beta = 1.0 / sigma;
    if delta > 1.0 + beta + 1e-12 {
        return Err(Error::Parameter(format!("δ = {delta} needs σ <= {:.6}", 1.0 / (delta - 1.0))));
    }
    let d = dim.size();
    let q = (1.0 - beta) / (1.0 + beta);
    let pre = 2.0 * beta * beta / ((1.0 + beta) * (1.0 + beta));
    let mut p: Vec<f64> = (0..d)
        .map(|n| {
            let thermal = (1.0 - q) * q.powi(n as i32);
            let lead = if n == 0 { 0.0 } else { n as f64 * q.powi(n as i32 - 1) };
            let ring = pre * (2.0 * lead / (1.0 + beta) + q.powi(n as i32));
            ((1.0 - delta) * thermal + delta * ring).max(0.0)
        })
        .collect();
    if sigma > 1.0 {
        let z: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= z);
    }
    let m = DMatrix::from_fn(d, d, |i, j| if i == j { C64::from(p[i]) } else { ZERO });
    DensityOperator::from_matrix(dim, 1, m)
}

/// Single-mode element by catalog name, for config-driven construction.
pub fn by_name(name: &str, param: f64, alpha: C64, dim: FockDim) -> Result<Element> {
    match name {
        "identity" => Ok(identity(dim)),
        "phase_rotation" => phase_rotation(param, dim),
        "displacement" => displacement(alpha, dim),
        "squeezing" => squeezing(param, dim),
        "attenuation" => attenuation(param, dim),
        "parametric_amplification" => parametric_amplification(param, dim),
        other => Err(Error::Parameter(format!("unknown element `{other}`"))),
    }
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_ket, fock_state};
    use crate::map::{apply, is_trace_nonincreasing, DEFAULT_TOL};
    use approx::assert_abs_diff_eq;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn attenuation_element_one_one_zero_zero() {
        let t = attenuation(0.3, dim(4)).unwrap().tensor();
        assert_abs_diff_eq!(t.get(1, 1, 0, 0).re, 0.7, epsilon = 1e-15);
    }

    #[test]
    fn unit_gain_amplifier_is_identity() {
        let e = parametric_amplification(1.0, dim(5)).unwrap();
        assert!(e.tensor().max_abs_diff(&ProcessTensor::identity(dim(5), 1)) < 1e-15);
        assert_eq!(e.kernel, TransferKernel::identity());
    }

    #[test]
    fn unit_transmission_beam_splitter_is_identity() {
        let e = beam_splitter(1.0, dim(3)).unwrap();
        let u = &e.kraus.operators()[0];
        assert!((u - DMatrix::identity(16, 16)).norm() < 1e-15);
        assert_eq!(e.kernel, TransferKernel::AffineDelta(AffineDelta::identity(2)));
    }

    #[test]
    fn parameter_ranges() {
        assert!(attenuation(1.2, dim(3)).is_err());
        assert!(parametric_amplification(0.5, dim(3)).is_err());
        assert!(beam_splitter(1.5, dim(3)).is_err());
        assert!(parametric_down_conversion(0.9, dim(3)).is_err());
        assert!(apd_click(0.0).is_err());
        assert!(apd_click(1.1).is_err());
        assert!(experimental_single_photon(2.1, dim(3)).is_err());
        assert!(photon_counter(9).povm(dim(3)).is_err());
    }

    #[test]
    fn gaussian_channel_specs() {
        let eta: f64 = 0.64;
        let k = gaussian_channel(&GaussianChannelSpec::symmetric(eta.sqrt(), (1.0 - eta).sqrt(), -1)).unwrap();
        let v = k.value(0.3, -0.1, 0.5, 0.2).unwrap();
        let expect = (-(0.3 - 0.8 * 0.5f64).powi(2) / 0.36 - (-0.1 - 0.8 * 0.2f64).powi(2) / 0.36).exp() / (PI * 0.36);
        assert_abs_diff_eq!(v, expect, epsilon = 1e-14);
        let bad = GaussianChannelSpec::symmetric(1.0, 0.5, -1);
        assert!(gaussian_channel(&bad).is_err());
        let degenerate = GaussianChannelSpec::symmetric(1.0, 0.0, 1);
        assert!(matches!(gaussian_channel(&degenerate), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn apd_values_and_completeness() {
        let d = dim(6);
        let apd = apd_click(0.11).unwrap();
        let diag = apd.diagonal(d).unwrap();
        assert_eq!(diag[0], 0.0);
        assert_abs_diff_eq!(diag[1], 0.11, epsilon = 1e-15);
        assert_abs_diff_eq!(diag[2], 0.2079, epsilon = 1e-15);
        let sum = apd.povm(d).unwrap() + apd.complement(d).unwrap();
        assert_eq!(sum, DMatrix::identity(7, 7));
        // attenuation(μ) followed by an ideal on/off click
        let loss = attenuation_kraus(0.11, d).unwrap();
        let mut onoff = DMatrix::identity(7, 7);
        onoff[(0, 0)] = ZERO;
        let via_loss = loss.operators().iter().fold(DMatrix::from_element(7, 7, ZERO), |acc, a| acc + a.adjoint() * &onoff * a);
        assert!((via_loss - apd.povm(d).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn projector_kernels() {
        let d = dim(4);
        let v = vacuum_projector();
        for &(x, p) in &[(0.0, 0.0), (0.5, -0.3)] {
            assert_abs_diff_eq!(v.kernel_at(d, x, p).unwrap(), 2.0 * (-x * x - p * p).exp(), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(photon_counter(1).kernel_at(d, 0.0, 0.0).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn experimental_photon_endpoints() {
        let d = dim(4);
        assert_eq!(experimental_single_photon(2.0, d).unwrap(), fock_state(1, d).unwrap());
        let w = |delta: f64| crate::fock::wigner_at(&experimental_single_photon(delta, d).unwrap(), 0.0, 0.0);
        assert_abs_diff_eq!(w(1.0), 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(w(1.089), (1.0 - 1.089) / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(w(1.089), -0.0283, epsilon = 1e-4);
    }

    #[test]
    fn displacement_moves_vacuum_to_coherent() {
        let d = dim(20);
        let beta = C64::new(0.5, 0.2);
        let out = displacement_unitary(beta, d).column(0).into_owned();
        let expect = coherent_ket(beta, d);
        assert!((out - expect).norm() < 1e-14);
    }

    #[test]
    fn catalog_maps_are_trace_nonincreasing() {
        let d = dim(6);
        for e in [attenuation(0.5, d).unwrap(), parametric_amplification(1.5, d).unwrap(), squeezing(0.3, d).unwrap()] {
            assert!(e.kraus.is_trace_nonincreasing(DEFAULT_TOL), "{}", e.name);
        }
        let rho = fock_state(2, d).unwrap();
        let out = apply(&attenuation(0.5, d).unwrap().tensor(), &rho).unwrap();
        assert!(is_trace_nonincreasing(&attenuation(0.5, d).unwrap().tensor(), DEFAULT_TOL));
        assert_abs_diff_eq!(out.trace(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn noisy_photon_reduces_to_two_level_mixture() {
        let a = noisy_single_photon(1.3, 1.0, dim(6)).unwrap();
        let b = experimental_single_photon(1.3, dim(6)).unwrap();
        assert_eq!(a, b);
        assert!((a.get(1, 1).re - 0.65).abs() < 1e-15 && (a.get(0, 0).re - 0.35).abs() < 1e-15);
        assert!(noisy_single_photon(2.0, 1.1, dim(4)).is_err());
    }

    #[test]
    fn noisy_photon_matches_its_wigner_function() {
        let (delta, sigma) = (1.089, 1.1);
        let d = dim(40);
        let rho = noisy_single_photon(delta, sigma, d).unwrap();
        let w0 = crate::fock::wigner_at(&rho, 0.0, 0.0);
        assert!((w0 - (1.0 - delta) / (PI * sigma)).abs() < 1e-10);
        let w = |x: f64, p: f64| {
            let r2 = x * x + p * p;
            ((1.0 - delta) + delta * r2 / sigma) * (-r2 / sigma).exp() / (PI * sigma)
        };
        let n = 401;
        let h = 16.0 / (n - 1) as f64;
        for k in 0..4 {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let (x, p) = (-8.0 + i as f64 * h, -8.0 + j as f64 * h);
                    acc += w(x, p) * crate::fock::wigner_basis(k, k, x, p, dim(3)).unwrap().re;
                }
            }
            let pk = 2.0 * PI * acc * h * h;
            assert!((pk - rho.get(k, k).re).abs() < 1e-8, "{k}: {pk} vs {}", rho.get(k, k).re);
        }
    }
}
