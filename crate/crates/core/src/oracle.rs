//! Brute-force multi-mode Fock simulation for cross-checks.
//!
//! A pure state is held as a polynomial in creation operators acting on
//! the vacuum, `|ψ⟩ = P(a₁†, …, a_M†)|0⟩`. Passive linear optics substitutes
//! `a_i† → Σ_j U_{ji} a_j†` without any photon-number truncation, so the
//! only approximation left is in the input states themselves.

use std::collections::BTreeMap;

use crate::fock::C64;
use crate::models::{AmplifierConfig, Detector, SecondPort};

#[derive(Clone, Debug, PartialEq)]
pub struct FockPoly {
    modes: usize,
    terms: BTreeMap<Vec<u8>, C64>,
}

fn factorial(n: u8) -> f64 {
    (1..=n as u32).map(f64::from).product()
}

impl FockPoly {
    pub fn vacuum(modes: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(vec![0; modes], C64::new(1.0, 0.0));
        FockPoly { modes, terms }
    }

    /// Multiplies in `Σ_n c_n (a_mode†)^n / √n!`, i.e. places `Σ c_n |n⟩` on an empty mode.
    pub fn with_ket(&self, mode: usize, ket: &[C64]) -> Self {
        let mut terms = BTreeMap::new();
        for (mono, c) in &self.terms {
            for (n, a) in ket.iter().enumerate() {
                if a.norm() == 0.0 {
                    continue;
                }
                let mut m = mono.clone();
                m[mode] += n as u8;
                *terms.entry(m).or_insert(C64::new(0.0, 0.0)) += c * a / factorial(n as u8).sqrt();
            }
        }
        FockPoly { modes: self.modes, terms }
    }

    /// Substitutes `a_{modes[i]}† → Σ_j u[j][i] a_{modes[j]}†`, which realizes
    /// the unitary with mode matrix `u` on the listed modes.
    pub fn transform(&self, modes: &[usize], u: &[Vec<C64>]) -> Self {
        let mut out = BTreeMap::new();
        for (mono, c) in &self.terms {
            let mut partial: BTreeMap<Vec<u8>, C64> = BTreeMap::new();
            let mut base = mono.clone();
            for &m in modes {
                base[m] = 0;
            }
            partial.insert(base, *c);
            for (i, &mi) in modes.iter().enumerate() {
                for _ in 0..mono[mi] {
                    let mut next = BTreeMap::new();
                    for (pm, pc) in &partial {
                        for (j, &mj) in modes.iter().enumerate() {
                            let w = u[j][i];
                            if w.norm() == 0.0 {
                                continue;
                            }
                            let mut m = pm.clone();
                            m[mj] += 1;
                            *next.entry(m).or_insert(C64::new(0.0, 0.0)) += pc * w;
                        }
                    }
                    partial = next;
                }
            }
            for (m, v) in partial {
                *out.entry(m).or_insert(C64::new(0.0, 0.0)) += v;
            }
        }
        FockPoly { modes: self.modes, terms: out }
    }

    /// Fock amplitudes `⟨n₁ … n_M|ψ⟩`.
    pub fn amplitudes(&self) -> Vec<(Vec<u8>, C64)> {
        self.terms
            .iter()
            .map(|(m, c)| (m.clone(), c * m.iter().map(|&n| factorial(n)).product::<f64>().sqrt()))
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes().iter().map(|(_, a)| a.norm_sqr()).sum()
    }
}

/// Mode matrix of a beam splitter with `a₁† → t a₁† − r a₂†`, `a₂† → r a₁† + t a₂†`.
pub fn beam_splitter_modes(t: f64) -> Vec<Vec<C64>> {
    let r = (1.0 - t * t).max(0.0).sqrt();
    let c = |v: f64| C64::new(v, 0.0);
    vec![vec![c(t), c(r)], vec![c(-r), c(t)]]
}

/// Total herald probability of the amplifier circuit for a pure input `ket`
/// on the signal, with the photon source given by its photon-number
/// distribution. Mode-mismatched light is followed on its own modes and hits
/// the same physical detectors as the matched light.
///
/// Modes: 0 `s`, 1 `uH`, 2 `uO`, 3 `a`, 4 `v`, 5 `w` (vacuum for the 50/50 split of `u`).
pub fn amplifier_herald_probability(cfg: &AmplifierConfig, ket: &[C64], source: &[f64]) -> f64 {
    let second = cfg.second_port.unwrap_or(match cfg.detector {
        Detector::PhotonCounter => SecondPort::Vacuum,
        Detector::Apd => SecondPort::ApdNoClick,
    });
    let herald = |n: u32| -> f64 {
        match cfg.detector {
            Detector::Apd => 1.0 - (1.0 - cfg.mu).powi(n as i32),
            Detector::PhotonCounter => f64::from(n == 1),
        }
    };
    let other = |n: u32| -> f64 {
        match second {
            SecondPort::Vacuum => f64::from(n == 0),
            SecondPort::ApdNoClick => (1.0 - cfg.mu).powi(n as i32),
            SecondPort::Ignore => 1.0,
        }
    };
    let t_a = (1.0 - cfg.r).sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut total = 0.0;
    for (n_photon, &w) in source.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let mut photon = vec![C64::new(0.0, 0.0); n_photon + 1];
        photon[n_photon] = C64::new(1.0, 0.0);
        let mut psi = FockPoly::vacuum(6).with_ket(0, ket).with_ket(3, &photon);
        // s → √η s + mismatched part on uH, then the mismatched part splits onto uH/uO
        psi = psi.transform(&[0, 1], &beam_splitter_modes(cfg.eta_m.sqrt()));
        psi = psi.transform(&[1, 2], &beam_splitter_modes(s));
        psi = psi.transform(&[3, 4], &beam_splitter_modes(t_a));
        psi = psi.transform(&[0, 4], &beam_splitter_modes(s));
        for (m, a) in psi.amplitudes() {
            let h = herald(u32::from(m[4]) + u32::from(m[1]));
            let o = other(u32::from(m[0]) + u32::from(m[2]));
            total += w * a.norm_sqr() * h * o;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hong_ou_mandel_dip() {
        let one = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let psi = FockPoly::vacuum(2).with_ket(0, &one).with_ket(1, &one);
        let out = psi.transform(&[0, 1], &beam_splitter_modes(std::f64::consts::FRAC_1_SQRT_2));
        let amps = out.amplitudes();
        let coincidence: f64 = amps.iter().filter(|(m, _)| m == &vec![1, 1]).map(|(_, a)| a.norm_sqr()).sum();
        assert!(coincidence < 1e-30);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn coherent_states_split_classically() {
        let dim = crate::fock::FockDim::new(25).unwrap();
        let alpha = C64::new(0.6, -0.3);
        let ket: Vec<C64> = crate::fock::coherent_ket(alpha, dim).iter().cloned().collect();
        let t = 0.7f64.sqrt();
        let out = FockPoly::vacuum(2).with_ket(0, &ket).transform(&[0, 1], &beam_splitter_modes(t));
        let vac: f64 = out.amplitudes().iter().filter(|(m, _)| m == &vec![0, 0]).map(|(_, a)| a.norm_sqr()).sum();
        assert!((vac - (-alpha.norm_sqr()).exp()).abs() < 1e-12);
    }
}
