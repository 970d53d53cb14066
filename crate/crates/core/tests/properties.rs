use cvmaps::elements::{self, apd_click, photon_counter};
use cvmaps::fock::{overlap, wigner_basis_matrix};
use cvmaps::map::{effect_matrix, DEFAULT_TOL};
use cvmaps::models::{self, AdditionConfig, AmplifierConfig, Detector};
use cvmaps::transfer::{compose_on_grids, radial_negativity, radial_form};
use cvmaps::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn dim(n: usize) -> FockDim {
    FockDim::new(n).unwrap()
}

fn matrix_from(d: usize, v: &[f64]) -> DMatrix<C64> {
    DMatrix::from_fn(d, d, |i, j| C64::new(v[2 * (i * d + j)], v[2 * (i * d + j) + 1]))
}

fn state_from(dm: FockDim, v: &[f64]) -> DensityOperator {
    let g = matrix_from(dm.size(), v);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityOperator::from_matrix(dm, 1, m / C64::from(tr)).unwrap()
}

fn entries(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 2 * d * d)
}

fn random_kraus(dm: FockDim, ops: &[Vec<f64>]) -> KrausSet {
    let d = dm.size();
    let raw: Vec<DMatrix<C64>> = ops.iter().map(|v| matrix_from(d, v)).collect();
    let effect: DMatrix<C64> = raw.iter().map(|e| e.adjoint() * e).fold(DMatrix::zeros(d, d), |a, b| a + b);
    let scale = effect.norm().max(1.0);
    KrausSet::new(dm, 1, 1, raw.into_iter().map(|e| e / C64::from(scale.sqrt())).collect()).unwrap()
}

fn max_diff(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn random_states_are_valid(v in entries(5)) {
        let rho = state_from(dim(4), &v);
        prop_assert!(rho.hermiticity_defect() <= 1e-12);
        prop_assert!(rho.min_eigenvalue() >= -1e-10);
        prop_assert!((rho.trace() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn wigner_is_linear(v1 in entries(4), v2 in entries(4), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let d = dim(3);
        let (r1, r2) = (state_from(d, &v1), state_from(d, &v2));
        let mix = DensityOperator::from_matrix(d, 1, r1.matrix() * C64::from(a) + r2.matrix() * C64::from(b));
        // a signed combination is not a state; evaluate the transform directly
        let m = r1.matrix() * C64::from(a) + r2.matrix() * C64::from(b);
        let g = QuadratureGrid::square(-3.0, 3.0, 9).unwrap();
        let (w1, w2) = (wigner_of(&r1, &g), wigner_of(&r2, &g));
        for (i, (x, p)) in g.points().enumerate() {
            let w = wigner_basis_matrix(d, x, p);
            let direct: f64 = m.iter().zip(w.iter()).map(|(r, b)| r * b).sum::<C64>().re;
            prop_assert!((direct - (a * w1.values[i] + b * w2.values[i])).abs() <= 1e-12);
        }
        if let Ok(mix) = mix {
            let wm = wigner_of(&mix, &g);
            prop_assert!((0..g.len()).all(|i| (wm.values[i] - (a * w1.values[i] + b * w2.values[i])).abs() <= 1e-12));
        }
    }

    #[test]
    fn overlap_gives_trace_of_product(v1 in entries(4), v2 in entries(4)) {
        let d = dim(3);
        let (r1, r2) = (state_from(d, &v1), state_from(d, &v2));
        let g = QuadratureGrid::default();
        let ov = overlap(&wigner_of(&r1, &g), &wigner_of(&r2, &g)).unwrap();
        let tr = (r1.matrix() * r2.matrix()).trace().re;
        prop_assert!((ov - tr).abs() <= 1e-5, "{} vs {}", ov, tr);
    }

    #[test]
    fn wigner_basis_conjugate_symmetry(x in -4.0f64..4.0, p in -4.0f64..4.0) {
        let w = wigner_basis_matrix(dim(10), x, p);
        prop_assert!(max_diff(&w, &w.adjoint()) <= 1e-12);
    }

    #[test]
    fn apply_is_linear(k1 in entries(4), k2 in entries(4), v1 in entries(4), v2 in entries(4), a in 0.0f64..1.0) {
        let d = dim(3);
        let t = random_kraus(d, &[k1, k2]).to_tensor();
        let (r1, r2) = (state_from(d, &v1), state_from(d, &v2));
        let mix = DensityOperator::from_matrix(d, 1, r1.matrix() * C64::from(a) + r2.matrix() * C64::from(1.0 - a)).unwrap();
        let lhs = apply(&t, &mix).unwrap();
        let rhs = apply(&t, &r1).unwrap().matrix() * C64::from(a) + apply(&t, &r2).unwrap().matrix() * C64::from(1.0 - a);
        prop_assert!(max_diff(lhs.matrix(), &rhs) <= 1e-13);
    }

    #[test]
    fn tensor_route_matches_kraus_sum(k1 in entries(4), k2 in entries(4), k3 in entries(4), v in entries(4)) {
        let d = dim(3);
        let k = random_kraus(d, &[k1, k2, k3]);
        let rho = state_from(d, &v);
        let direct: DMatrix<C64> = k.operators().iter().map(|e| e * rho.matrix() * e.adjoint()).fold(DMatrix::zeros(4, 4), |a, b| a + b);
        let via = apply(&tensor_from_kraus(&k), &rho).unwrap();
        prop_assert!(max_diff(via.matrix(), &direct) <= 1e-13);
        prop_assert!(tensor_from_kraus(&k).hermiticity_defect() <= 1e-12);
        prop_assert!(is_cp(&tensor_from_kraus(&k), 1e-10));
        prop_assert!(k.is_trace_nonincreasing(DEFAULT_TOL));
    }

    #[test]
    fn serial_composition_is_associative(a in entries(3), b in entries(3), c in entries(3)) {
        let d = dim(2);
        let (ta, tb, tc) = (random_kraus(d, &[a]).to_tensor(), random_kraus(d, &[b]).to_tensor(), random_kraus(d, &[c]).to_tensor());
        let left = compose_serial(&compose_serial(&tc, &tb).unwrap(), &ta).unwrap();
        let right = compose_serial(&tc, &compose_serial(&tb, &ta).unwrap()).unwrap();
        prop_assert!(left.max_abs_diff(&right) <= 1e-12);
    }

    #[test]
    fn choi_matrix_is_hermitian(k1 in entries(3), k2 in entries(3)) {
        let t = random_kraus(dim(2), &[k1, k2]).to_tensor();
        prop_assert!(choi(&t).hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn affine_elements_are_symplectic(theta in -3.0f64..3.0, r in -1.0f64..1.0, t in 0.05f64..0.99, g in 1.0f64..3.0) {
        let d = dim(2);
        let kernels = [
            elements::phase_rotation(theta, d).unwrap().kernel,
            elements::squeezing(r, d).unwrap().kernel,
            elements::beam_splitter(t, d).unwrap().kernel,
            elements::parametric_down_conversion(g, d).unwrap().kernel,
        ];
        for k in kernels {
            let TransferKernel::AffineDelta(a) = k else { panic!("expected an affine kernel") };
            prop_assert!((a.forward().determinant() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn detector_povms_are_bounded_and_complete(mu in 0.01f64..1.0, n in 0usize..5) {
        let d = dim(6);
        for det in [apd_click(mu).unwrap(), photon_counter(n)] {
            let p = det.povm(d).unwrap();
            let q = det.complement(d).unwrap();
            let complete = (&p + &q) == DMatrix::<C64>::identity(7, 7);
            prop_assert!(complete);
            let (dp, dq) = (det.diagonal(d).unwrap(), p.diagonal());
            prop_assert!(dp.iter().zip(dq.iter()).all(|(a, b)| *a >= 0.0 && *a <= 1.0 && b.re == *a));
        }
    }

    #[test]
    fn kernel_from_tensor_is_linear(eta in 0.1f64..0.9, g in 1.0f64..2.0, a in -1.0f64..1.0, b in -1.0f64..1.0) {
        let d = dim(6);
        let t1 = elements::attenuation(eta, d).unwrap().tensor();
        let t2 = elements::parametric_amplification(g, d).unwrap().tensor();
        let grid = QuadratureGrid::square(-2.0, 2.0, 5).unwrap();
        let k = kernel_from_tensor(&t1.scaled(a).add(&t2.scaled(b)).unwrap(), &grid, &grid).unwrap().sample().unwrap();
        let k1 = kernel_from_tensor(&t1, &grid, &grid).unwrap().sample().unwrap();
        let k2 = kernel_from_tensor(&t2, &grid, &grid).unwrap().sample().unwrap();
        prop_assert!((k - (k1 * a + k2 * b)).abs().max() <= 1e-12);
    }

    #[test]
    fn negativity_scales_with_kernel(c in 0.01f64..100.0) {
        let t = models::ideal_truncated_amplifier(2.0, dim(4)).unwrap();
        let grid = QuadratureGrid::square(-2.0, 2.0, 9).unwrap();
        let k = TransferKernel::Grid(kernel_from_tensor(&t, &grid, &grid).unwrap());
        let (n, nc) = (negativity(&k).unwrap(), negativity(&k.scaled(c)).unwrap());
        prop_assert!(n.min_value < 0.0);
        prop_assert_eq!(nc.min_value, c * n.min_value);
        prop_assert_eq!(nc.negative_volume, c * n.negative_volume);
        let rk = radial_form(&t, &RadialGrid::uniform(2.0, 9, vec![0.0])).unwrap();
        let (rn, rc) = (radial_negativity(&rk), radial_negativity(&rk.scaled(c)));
        prop_assert!((rc.min_value - c * rn.min_value).abs() <= 1e-15 * c * rn.min_value.abs());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn amplifier_models_are_physical(r in 0.05f64..0.5, mu in 0.05f64..1.0, delta in 0.0f64..2.0, eta_m in 0.5f64..1.0, apd in any::<bool>()) {
        let detector = if apd { Detector::Apd } else { Detector::PhotonCounter };
        let cfg = AmplifierConfig { mu, delta, sigma: 1.0, eta_m, detector, n_max: 4, ..AmplifierConfig::realistic(r) };
        let (c, f) = models::amplifier_branches(&cfg).unwrap();
        let t = models::amplifier_model(&cfg).unwrap();
        prop_assert!(is_cp(&t, DEFAULT_TOL) && is_trace_nonincreasing(&t, DEFAULT_TOL));
        prop_assert!(phase_invariance_defect(&t) <= 1e-12);
        let total = effect_matrix(&t);
        let parts = effect_matrix(&c) + effect_matrix(&f);
        prop_assert!(max_diff(&total, &parts) <= 1e-14);
    }

    #[test]
    fn addition_models_are_physical(chi in 0.0f64..0.4, gamma in 0.0f64..1.0, mu in 0.05f64..1.0, apd in any::<bool>()) {
        let detector = if apd { Detector::Apd } else { Detector::PhotonCounter };
        let cfg = AdditionConfig { chi, gamma, mu, detector, n_max: 6, include_faulty: true };
        let t = models::addition_model(&cfg).unwrap();
        prop_assert!(is_cp(&t, DEFAULT_TOL) && is_trace_nonincreasing(&t, DEFAULT_TOL));
        prop_assert!(phase_invariance_defect(&t) <= 1e-12);
    }

    #[test]
    fn marginal_gives_success_probability(v in entries(5)) {
        let t = models::ideal_truncated_amplifier(2.0, dim(4)).unwrap();
        let rho = state_from(dim(4), &v);
        let inner = QuadratureGrid::default();
        let wide = QuadratureGrid::square(-9.0, 9.0, 145).unwrap();
        let f = TransferKernel::Grid(kernel_from_tensor(&t, &inner, &wide).unwrap());
        let marg = input_marginal(&f, &inner).unwrap();
        let w = wigner_of(&rho, &inner);
        let p: f64 = inner.weights().iter().zip(marg.values.iter().zip(w.values.iter())).map(|(q, (a, b))| q * a * b).sum();
        prop_assert!((p - success_probability(&t, &rho).unwrap()).abs() <= 1e-5);
    }
}

#[test]
fn deterministic_closed_form_kernels_have_unit_output_marginal() {
    let d = dim(4);
    let inner = QuadratureGrid::square(-2.0, 2.0, 11).unwrap();
    let wide = QuadratureGrid::square(-9.0, 9.0, 181).unwrap();
    for k in [elements::attenuation(0.6, d).unwrap().kernel, elements::parametric_amplification(1.5, d).unwrap().kernel] {
        let sampled = GridKernel::from_samples(inner.clone(), wide.clone(), k.sample(&inner, &wide).unwrap()).unwrap();
        let m = input_marginal(&TransferKernel::Grid(sampled), &inner).unwrap();
        assert!(m.values.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }
}

#[test]
fn truncated_identity_marginal_alternates_at_origin() {
    // Σ_{n≤N} W_n(0,0) = Σ (−1)^n / π, so the marginal is 2 or 0 rather than 1
    for (n, want) in [(8, 2.0), (9, 0.0)] {
        let t = elements::identity(dim(n)).tensor();
        let origin = QuadratureGrid::square(-1.0, 1.0, 3).unwrap();
        let wide = QuadratureGrid::square(-10.0, 10.0, 201).unwrap();
        let m = input_marginal(&TransferKernel::Grid(kernel_from_tensor(&t, &origin, &wide).unwrap()), &origin).unwrap();
        assert!((m.values[4] - want).abs() < 1e-6, "{}", m.values[4]);
    }
}

#[test]
fn chain_composes_the_same_both_ways() {
    let d = dim(15);
    let att = elements::attenuation(0.7, d).unwrap().tensor();
    let amp = elements::parametric_amplification(1.3, d).unwrap().tensor();
    let outer = QuadratureGrid::square(-2.0, 2.0, 7).unwrap();
    let mid = QuadratureGrid::square(-9.0, 9.0, 181).unwrap();
    for (second, first) in [(&att, &amp), (&amp, &att)] {
        let via_tensor = kernel_from_tensor(&compose_serial(second, first).unwrap(), &outer, &outer).unwrap().sample().unwrap();
        let k2 = TransferKernel::Grid(kernel_from_tensor(second, &mid, &outer).unwrap());
        let k1 = TransferKernel::Grid(kernel_from_tensor(first, &outer, &mid).unwrap());
        let via_grid = compose_on_grids(&k2, &k1, &outer, &mid, &outer).unwrap().sample(&outer, &outer).unwrap();
        assert!((via_tensor - via_grid).abs().max() <= 1e-8);
    }
}

#[test]
fn models_reject_out_of_range_parameters() {
    assert!(models::amplifier_model(&AmplifierConfig { mu: 0.0, ..AmplifierConfig::realistic(0.2) }).is_err());
    assert!(models::amplifier_model(&AmplifierConfig::realistic(1.0)).is_err());
    assert!(models::amplifier_model(&AmplifierConfig { delta: 2.5, ..AmplifierConfig::realistic(0.2) }).is_err());
    assert!(models::addition_model(&AdditionConfig { chi: -0.1, ..AdditionConfig::realistic() }).is_err());
    assert!(models::addition_model(&AdditionConfig { gamma: -1.0, ..AdditionConfig::realistic() }).is_err());
}
