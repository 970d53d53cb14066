use std::f64::consts::PI;

use cvmaps::elements::{self, attenuation_kraus, squeezing_unitary, two_mode_squeezer_unitary};
use cvmaps::fock::{annihilation, coherent_ket, wigner_basis_matrix};
use cvmaps::models::{self, AdditionConfig, AmplifierConfig, Detector};
use cvmaps::oracle::amplifier_herald_probability;
use cvmaps::*;
use nalgebra::{DMatrix, DVector};

fn hermite_functions(d: usize, x: f64) -> Vec<f64> {
    let mut psi = vec![0.0; d];
    psi[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if d > 1 {
        psi[1] = 2f64.sqrt() * x * psi[0];
    }
    for n in 1..d.saturating_sub(1) {
        psi[n + 1] = (2.0 / (n + 1) as f64).sqrt() * x * psi[n] - (n as f64 / (n + 1) as f64).sqrt() * psi[n - 1];
    }
    psi
}

/// `W_{|n⟩⟨m|}(x,p) = (1/π) ∫ ψ_n(x+y) ψ_m(x−y) e^{-2ipy} dy`.
fn wigner_by_position_integral(n: usize, m: usize, x: f64, p: f64, half: f64, steps: usize) -> C64 {
    let d = n.max(m) + 1;
    let h = 2.0 * half / steps as f64;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..=steps {
        let y = -half + i as f64 * h;
        let w = if i == 0 || i == steps { 0.5 * h } else { h };
        let v = hermite_functions(d, x + y)[n] * hermite_functions(d, x - y)[m];
        acc += C64::from_polar(w * v, -2.0 * p * y);
    }
    acc / PI
}

fn padded_exp(generator: impl Fn(usize) -> DMatrix<C64>, pad: usize) -> DMatrix<C64> {
    generator(pad).exp()
}

fn lowering(d: usize) -> DMatrix<C64> {
    annihilation(FockDim::new(d - 1).unwrap())
}

#[test]
fn wigner_basis_matches_position_integral() {
    let dim = FockDim::new(6).unwrap();
    for &(x, p) in &[(0.0, 0.0), (0.4, -0.9), (-1.3, 0.2), (2.1, 1.7)] {
        let w = wigner_basis_matrix(dim, x, p);
        for n in 0..=6 {
            for m in 0..=6 {
                let o = wigner_by_position_integral(n, m, x, p, 10.0, 4000);
                assert!((w[(n, m)] - o).norm() < 1e-10, "({n},{m}) at ({x},{p})");
            }
        }
    }
}

#[test]
fn wigner_basis_is_stable_at_high_photon_number() {
    let dim = FockDim::new(80).unwrap();
    let origin = wigner_basis_matrix(dim, 0.0, 0.0);
    for n in [60, 79, 80] {
        let expect = if n % 2 == 0 { 1.0 / PI } else { -1.0 / PI };
        assert!((origin[(n, n)].re - expect).abs() < 1e-10);
    }
    for &(x, p) in &[(3.0, 1.0), (-5.5, 6.0), (9.0, 0.5)] {
        let w = wigner_basis_matrix(dim, x, p);
        for (n, m) in [(80, 80), (80, 77), (45, 80)] {
            let o = wigner_by_position_integral(n, m, x, p, 18.0, 24000);
            assert!((w[(n, m)] - o).norm() < 1e-9, "({n},{m}) at ({x},{p}): {} vs {}", w[(n, m)], o);
        }
        assert!(w.iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    }
}

#[test]
fn squeezing_matches_padded_exponential() {
    let d = 21;
    for r in [0.2, 0.4, -0.7] {
        let big = padded_exp(
            |pad| {
                let a = lowering(pad);
                let ad = a.adjoint();
                (&a * &a - &ad * &ad) * C64::from(0.5 * r)
            },
            160,
        );
        let u = squeezing_unitary(r, FockDim::new(d - 1).unwrap());
        for l in 0..d {
            for n in 0..d {
                assert!((u[(l, n)] - big[(l, n)]).norm() < 1e-11, "r={r} ({l},{n})");
            }
        }
    }
}

#[test]
fn two_mode_squeezer_matches_padded_exponential() {
    let pad = 20;
    let g = 1.3f64;
    let chi = g.sqrt().acosh();
    let a = lowering(pad);
    let id = DMatrix::<C64>::identity(pad, pad);
    let a1 = a.kronecker(&id);
    let a2 = id.kronecker(&a);
    let gen = (a1.adjoint() * a2.adjoint() - &a1 * &a2) * C64::from(chi);
    let big = gen.exp();
    let d = 6;
    let u = two_mode_squeezer_unitary(g, FockDim::new(d - 1).unwrap());
    for n1 in 0..3 {
        for n2 in 0..3 {
            for l1 in 0..d {
                for l2 in 0..d {
                    let want = big[(l1 * pad + l2, n1 * pad + n2)];
                    let got = u[(l1 * d + l2, n1 * d + n2)];
                    assert!((want - got).norm() < 1e-10, "({l1},{l2})<-({n1},{n2}) {want} vs {got}");
                }
            }
        }
    }
}

#[test]
fn addition_model_matches_two_mode_brute_force() {
    let pad = 18;
    let cfg = AdditionConfig { gamma: 0.0, ..AdditionConfig::realistic() };
    let a = lowering(pad);
    let id = DMatrix::<C64>::identity(pad, pad);
    let (s, i) = (a.kronecker(&id), id.kronecker(&a));
    let u = ((s.adjoint() * i.adjoint() - &s * &i) * C64::from(cfg.chi)).exp();
    let (correct, _) = models::addition_branches(&cfg).unwrap();
    let dim = correct.dim();
    let d = dim.size();
    for n in 0..4 {
        let out = apply(&correct, &fock_state(n, dim).unwrap()).unwrap();
        // herald weights on idler photon number j
        let mut rho = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for j in 1..pad {
            let w = 1.0 - (1.0 - cfg.mu).powi(j as i32);
            let amp = DVector::from_fn(d, |l, _| u[(l * pad + j, n * pad)]);
            rho += amp.clone() * amp.adjoint() * C64::from(w);
        }
        assert!((out.matrix() - rho).norm() < 1e-12, "n={n}");
    }
}

#[test]
fn attenuation_kraus_matches_binomial_closed_form() {
    let dim = FockDim::new(10).unwrap();
    let eta: f64 = 0.64;
    let k = attenuation_kraus(eta, dim).unwrap();
    let binom = |n: usize, j: usize| (0..j).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let mut matched = 0;
    for op in k.operators() {
        let Some(j) = (0..=10).find(|&j| op[(0, j)].norm() > 1e-14) else { continue };
        for n in j..=10 {
            let want = (binom(n, j) * eta.powi((n - j) as i32) * (1.0 - eta).powi(j as i32)).sqrt();
            assert!((op[(n - j, n)].norm() - want).abs() < 1e-12);
        }
        matched += 1;
    }
    assert_eq!(matched, 11);
}

#[test]
fn attenuation_shrinks_coherent_amplitude() {
    let dim = FockDim::new(20).unwrap();
    let alpha = C64::new(0.6, -0.4);
    let out = elements::attenuation(0.3, dim).unwrap().apply(&coherent_state(alpha, dim)).unwrap();
    let target = coherent_state(alpha * 0.3f64.sqrt(), dim);
    assert!(fidelity(&out, &target).unwrap() > 1.0 - 1e-12);
}

#[test]
fn attenuation_composes_multiplicatively() {
    let dim = FockDim::new(10).unwrap();
    for (e1, e2) in [(0.9, 0.5), (0.3, 0.7)] {
        let t = compose_serial(
            &elements::attenuation(e2, dim).unwrap().tensor(),
            &elements::attenuation(e1, dim).unwrap().tensor(),
        )
        .unwrap();
        assert!(t.max_abs_diff(&elements::attenuation(e1 * e2, dim).unwrap().tensor()) < 1e-12);
    }
}

#[test]
fn down_conversion_marginal_is_thermal() {
    let dim = FockDim::new(10).unwrap();
    let g = 1.5;
    let pdc = elements::parametric_down_conversion(g, dim).unwrap();
    let vv = vacuum(dim).tensor(&vacuum(dim)).unwrap();
    let signal = pdc.apply(&vv).unwrap().partial_trace(1).unwrap();
    let nbar: f64 = g - 1.0;
    for n in 0..=10 {
        let want = nbar.powi(n as i32) / (1.0 + nbar).powi(n as i32 + 1);
        assert!((signal.get(n, n).re - want).abs() < 1e-12);
    }
}

#[test]
fn amplifier_probability_matches_six_mode_oracle() {
    for detector in [Detector::Apd, Detector::PhotonCounter] {
        let cfg = AmplifierConfig { eta_m: 0.8, detector, ..AmplifierConfig::realistic(models::DEFAULT_R) };
        let t = models::amplifier_model(&cfg).unwrap();
        let dim = t.dim();
        let src = elements::noisy_single_photon(cfg.delta, cfg.sigma, dim).unwrap();
        let source: Vec<f64> = (0..dim.size()).map(|n| src.get(n, n).re).collect();
        for alpha in [C64::new(0.3, 0.0), C64::new(-0.2, 0.5)] {
            let ket: Vec<C64> = coherent_ket(alpha, dim).iter().cloned().collect();
            let p = success_probability(&t, &coherent_state(alpha, dim)).unwrap();
            let oracle = amplifier_herald_probability(&cfg, &ket, &source);
            assert!((p - oracle).abs() < 1e-8, "{detector:?} {alpha}: {p} vs {oracle}");
        }
    }
}

#[test]
fn ideal_amplifier_produces_gained_superposition() {
    let t = models::amplifier_model(&AmplifierConfig::ideal(models::DEFAULT_R)).unwrap();
    let dim = t.dim();
    let out = apply(&t, &coherent_state(C64::new(0.1, 0.0), dim)).unwrap().normalized().unwrap();
    let mut psi = DVector::from_element(dim.size(), C64::new(0.0, 0.0));
    psi[0] = C64::from(1.0 / 1.04f64.sqrt());
    psi[1] = C64::from(0.2 / 1.04f64.sqrt());
    let target = DensityOperator::from_ket(dim, 1, &psi).unwrap();
    assert!(fidelity(&out, &target).unwrap() > 1.0 - 1e-9);
}

#[test]
fn identity_kernel_norm_counts_dimension_when_grid_covers_support() {
    let dim = FockDim::new(5).unwrap();
    let g = QuadratureGrid::default();
    let k = kernel_from_tensor(&elements::identity(dim).tensor(), &g, &g).unwrap();
    let n = kernel_norm(&TransferKernel::Grid(k)).unwrap();
    assert!((n - 6.0).abs() < 1e-4, "{n}");
}
