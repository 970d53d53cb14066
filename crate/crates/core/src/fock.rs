//! Truncated Fock space, density operators, Wigner functions and quadrature grids.
//!
//! Quadrature convention: `a = (x + i p) / √2`, so the vacuum Wigner function is
//! `exp(-x² - p²) / π` and a coherent state `|α⟩` is centred at `(√2 Re α, √2 Im α)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub(crate) const ONE: C64 = C64 { re: 1.0, im: 0.0 };

/// Photon-number cutoff shared by every mode of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockDim {
    n_max: usize,
}

impl FockDim {
    pub const DEFAULT_N_MAX: usize = 15;

    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Parameter(format!("n_max must be at least 1, got {n_max}")));
        }
        Ok(FockDim { n_max })
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Single-mode Hilbert-space dimension `n_max + 1`.
    pub fn size(&self) -> usize {
        self.n_max + 1
    }

    /// Dimension of the product space of `modes` modes.
    pub fn space(&self, modes: usize) -> usize {
        self.size().pow(modes as u32)
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        if n > self.n_max {
            Err(Error::Cutoff { n, n_max: self.n_max })
        } else {
            Ok(())
        }
    }
}

impl Default for FockDim {
    fn default() -> Self {
        FockDim { n_max: Self::DEFAULT_N_MAX }
    }
}

/// Annihilation operator on one truncated mode.
pub fn annihilation(dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    DMatrix::from_fn(d, d, |l, n| if l + 1 == n { C64::from((n as f64).sqrt()) } else { ZERO })
}

/// Creation operator on one truncated mode; `a†|n_max⟩` is cut off.
pub fn creation(dim: FockDim) -> DMatrix<C64> {
    annihilation(dim).adjoint()
}

pub fn number(dim: FockDim) -> DMatrix<C64> {
    let d = dim.size();
    DMatrix::from_fn(d, d, |l, n| if l == n { C64::from(n as f64) } else { ZERO })
}

/// Density operator on `modes` truncated modes, with mode 0 the most significant
/// digit of the flattened Fock index.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    dim: FockDim,
    modes: usize,
    matrix: DMatrix<C64>,
}

impl DensityOperator {
    /// Wraps a matrix without any physicality check.
    pub fn from_matrix(dim: FockDim, modes: usize, matrix: DMatrix<C64>) -> Result<Self> {
        let n = dim.space(modes);
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "density matrix is {}x{}, expected {n}x{n}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(DensityOperator { dim, modes, matrix })
    }

    /// Pure state `|ψ⟩⟨ψ|` from an amplitude vector, not renormalized.
    pub fn from_ket(dim: FockDim, modes: usize, ket: &DVector<C64>) -> Result<Self> {
        Self::from_matrix(dim, modes, ket * ket.adjoint())
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn get(&self, n: usize, m: usize) -> C64 {
        self.matrix[(n, m)]
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    /// Returns `ρ / Tr ρ`; fails on a vanishing trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t.abs() > 1e-300) {
            return Err(Error::Parameter("cannot normalize a state with zero trace".into()));
        }
        Ok(DensityOperator { dim: self.dim, modes: self.modes, matrix: &self.matrix / C64::from(t) })
    }

    pub fn scaled(&self, c: f64) -> Self {
        DensityOperator { dim: self.dim, modes: self.modes, matrix: &self.matrix * C64::from(c) }
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_eigen(&self.matrix).0.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Checks Hermiticity, positivity and `0 < Tr ρ ≤ 1`.
    pub fn validate(&self) -> Result<()> {
        let h = self.hermiticity_defect();
        if h > 1e-12 {
            return Err(Error::Validation(format!("state is not Hermitian (defect {h:.3e})")));
        }
        let lo = self.min_eigenvalue();
        if lo < -1e-10 {
            return Err(Error::Validation(format!("state is not positive (eigenvalue {lo:.3e})")));
        }
        let t = self.trace();
        if !(t > 0.0 && t <= 1.0 + 1e-12) {
            return Err(Error::Validation(format!("trace {t} outside (0, 1]")));
        }
        Ok(())
    }

    /// Product state `self ⊗ other`; `self` occupies the leading modes.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch("states use different cutoffs".into()));
        }
        Ok(DensityOperator {
            dim: self.dim,
            modes: self.modes + other.modes,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// Traces out one mode.
    pub fn partial_trace(&self, mode: usize) -> Result<Self> {
        if mode >= self.modes {
            return Err(Error::ModeIndex { mode, modes: self.modes });
        }
        let d = self.dim.size();
        let outer = d.pow(mode as u32);
        let inner = d.pow((self.modes - mode - 1) as u32);
        let n = outer * inner;
        let mut out = DMatrix::from_element(n, n, ZERO);
        for a in 0..outer {
            for b in 0..inner {
                for c in 0..outer {
                    for e in 0..inner {
                        let mut s = ZERO;
                        for j in 0..d {
                            s += self.matrix[((a * d + j) * inner + b, (c * d + j) * inner + e)];
                        }
                        out[(a * inner + b, c * inner + e)] = s;
                    }
                }
            }
        }
        Ok(DensityOperator { dim: self.dim, modes: self.modes - 1, matrix: out })
    }

    /// Mean photon number of a single-mode state.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.matrix.nrows()).map(|n| n as f64 * self.matrix[(n, n)].re).sum()
    }
}

pub fn fock_state(n: usize, dim: FockDim) -> Result<DensityOperator> {
    dim.check(n)?;
    let d = dim.size();
    let mut m = DMatrix::from_element(d, d, ZERO);
    m[(n, n)] = ONE;
    DensityOperator::from_matrix(dim, 1, m)
}

pub fn vacuum(dim: FockDim) -> DensityOperator {
    fock_state(0, dim).expect("vacuum is always inside the cutoff")
}

/// Fock amplitudes `e^{-|α|²/2} αⁿ/√n!` up to the cutoff, not renormalized.
pub fn coherent_ket(alpha: C64, dim: FockDim) -> DVector<C64> {
    let d = dim.size();
    let mut v = DVector::from_element(d, ZERO);
    let mut amp = C64::from((-0.5 * alpha.norm_sqr()).exp());
    for n in 0..d {
        v[n] = amp;
        amp = amp * alpha / ((n + 1) as f64).sqrt();
    }
    v
}

/// Truncated coherent state; the truncation loss stays visible in the trace.
pub fn coherent_state(alpha: C64, dim: FockDim) -> DensityOperator {
    DensityOperator::from_ket(dim, 1, &coherent_ket(alpha, dim)).expect("shape matches cutoff")
}

/// Thermal state renormalized over the truncated space.
pub fn thermal_state(mean_n: f64, dim: FockDim) -> Result<DensityOperator> {
    if !(mean_n >= 0.0) || !mean_n.is_finite() {
        return Err(Error::Parameter(format!("mean photon number must be >= 0, got {mean_n}")));
    }
    let d = dim.size();
    let q = mean_n / (1.0 + mean_n);
    let weights: Vec<f64> = (0..d).map(|n| q.powi(n as i32)).collect();
    let z: f64 = weights.iter().sum();
    let m = DMatrix::from_fn(d, d, |n, m| if n == m { C64::from(weights[n] / z) } else { ZERO });
    DensityOperator::from_matrix(dim, 1, m)
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues come back real.
///
/// The matrix is split into the connected blocks of its sparsity pattern and
/// each block is diagonalized on its own; exactly-zero rows give zero
/// eigenvalues with unit eigenvectors.
pub(crate) fn hermitian_eigen(m: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (m + m.adjoint()) * C64::from(0.5);
    let n = h.nrows();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for j in 0..n {
        for i in 0..j {
            if h[(i, j)] != ZERO {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    let mut slot = vec![usize::MAX; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if slot[r] == usize::MAX {
            slot[r] = blocks.len();
            blocks.push(Vec::new());
        }
        blocks[slot[r]].push(i);
    }
    let mut vals = vec![0.0; n];
    let mut vecs = DMatrix::from_element(n, n, ZERO);
    let mut col = 0;
    for b in &blocks {
        if b.len() == 1 {
            vals[col] = h[(b[0], b[0])].re;
            vecs[(b[0], col)] = ONE;
            col += 1;
            continue;
        }
        let sub = DMatrix::from_fn(b.len(), b.len(), |i, j| h[(b[i], b[j])]);
        let eig = sub.symmetric_eigen();
        for k in 0..b.len() {
            vals[col] = eig.eigenvalues[k];
            for (i, &row) in b.iter().enumerate() {
                vecs[(row, col)] = eig.eigenvectors[(i, k)];
            }
            col += 1;
        }
    }
    (vals, vecs)
}

fn psd_sqrt(m: &DMatrix<C64>) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(m);
    let s = DMatrix::from_fn(vals.len(), vals.len(), |i, j| {
        if i == j {
            C64::from(vals[i].max(0.0).sqrt())
        } else {
            ZERO
        }
    });
    &vecs * s * vecs.adjoint()
}

/// Uhlmann fidelity `(Tr √(√a b √a))²`.
pub fn fidelity(a: &DensityOperator, b: &DensityOperator) -> Result<f64> {
    if a.matrix.shape() != b.matrix.shape() {
        return Err(Error::DimensionMismatch("fidelity between states of different shape".into()));
    }
    for s in [a, b] {
        let lo = s.min_eigenvalue();
        if lo < -1e-10 || s.hermiticity_defect() > 1e-10 {
            return Err(Error::Validation(format!("fidelity needs PSD inputs (eigenvalue {lo:.3e})")));
        }
    }
    let sa = psd_sqrt(&a.matrix);
    let inner = &sa * &b.matrix * &sa;
    let (vals, _) = hermitian_eigen(&inner);
    let t: f64 = vals.iter().map(|v| v.max(0.0).sqrt()).sum();
    Ok((t * t).clamp(0.0, 1.0))
}

/// Rectangular phase-space grid with uniform spacing and trapezoidal weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub n_x: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
}

impl QuadratureGrid {
    pub fn new(x_min: f64, x_max: f64, n_x: usize, p_min: f64, p_max: f64, n_p: usize) -> Result<Self> {
        let finite = [x_min, x_max, p_min, p_max].iter().all(|v| v.is_finite());
        if !finite || x_max <= x_min || p_max <= p_min {
            return Err(Error::Parameter("grid bounds must be finite and increasing".into()));
        }
        if n_x < 3 || n_p < 3 {
            return Err(Error::Parameter(format!("grid needs at least 3 points per axis, got {n_x}x{n_p}")));
        }
        Ok(QuadratureGrid { x_min, x_max, n_x, p_min, p_max, n_p })
    }

    /// Square grid `[lo, hi]²` with `n` points per axis.
    pub fn square(lo: f64, hi: f64, n: usize) -> Result<Self> {
        Self::new(lo, hi, n, lo, hi, n)
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_x - 1) as f64
    }

    pub fn dp(&self) -> f64 {
        (self.p_max - self.p_min) / (self.n_p - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx()
    }

    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp()
    }

    pub fn len(&self) -> usize {
        self.n_x * self.n_p
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Point with flat index `i * n_p + j`.
    pub fn point(&self, idx: usize) -> (f64, f64) {
        (self.x(idx / self.n_p), self.p(idx % self.n_p))
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.len()).map(move |k| self.point(k))
    }

    /// Trapezoidal weights in flat order.
    pub fn weights(&self) -> Vec<f64> {
        let wx = trapezoid_weights(self.n_x, self.dx());
        let wp = trapezoid_weights(self.n_p, self.dp());
        (0..self.len()).map(|k| wx[k / self.n_p] * wp[k % self.n_p]).collect()
    }

    pub fn max_spacing(&self) -> f64 {
        self.dx().max(self.dp())
    }
}

impl Default for QuadratureGrid {
    fn default() -> Self {
        QuadratureGrid { x_min: -5.0, x_max: 5.0, n_x: 161, p_min: -5.0, p_max: 5.0, n_p: 161 }
    }
}

pub(crate) fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect()
}

/// Real function sampled on a [`QuadratureGrid`], flat order `i * n_p + j`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerField {
    pub grid: QuadratureGrid,
    pub values: Vec<f64>,
}

impl WignerField {
    pub fn zeros(grid: QuadratureGrid) -> Self {
        let n = grid.len();
        WignerField { grid, values: vec![0.0; n] }
    }

    pub fn from_fn(grid: QuadratureGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = grid.points().map(|(x, p)| f(x, p)).collect();
        WignerField { grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n_p + j]
    }

    pub fn max_abs_diff(&self, other: &WignerField) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Bicubic (Catmull-Rom) interpolation; zero outside the grid.
    pub fn interpolate(&self, x: f64, p: f64) -> f64 {
        let g = &self.grid;
        let u = (x - g.x_min) / g.dx();
        let v = (p - g.p_min) / g.dp();
        if u < 0.0 || v < 0.0 || u > (g.n_x - 1) as f64 || v > (g.n_p - 1) as f64 {
            return 0.0;
        }
        let i0 = (u.floor() as usize).min(g.n_x - 2);
        let j0 = (v.floor() as usize).min(g.n_p - 2);
        let fu = u - i0 as f64;
        let fv = v - j0 as f64;
        let sample = |i: isize, j: isize| -> f64 {
            let i = i.clamp(0, g.n_x as isize - 1) as usize;
            let j = j.clamp(0, g.n_p as isize - 1) as usize;
            self.at(i, j)
        };
        let cr = |t: f64, a: f64, b: f64, c: f64, d: f64| {
            0.5 * (2.0 * b + (c - a) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t * t
                + (3.0 * b - a - 3.0 * c + d) * t * t * t)
        };
        let mut col = [0.0; 4];
        for (k, di) in (-1..=2).enumerate() {
            let i = i0 as isize + di;
            let j = j0 as isize;
            col[k] = cr(fv, sample(i, j - 1), sample(i, j), sample(i, j + 1), sample(i, j + 2));
        }
        cr(fu, col[0], col[1], col[2], col[3])
    }
}

/// Trapezoidal integral of a field over its grid.
pub fn grid_integral(field: &WignerField) -> f64 {
    field.grid.weights().iter().zip(&field.values).map(|(w, v)| w * v).sum()
}

/// `2π ∫ W_a W_b dx dp`, equal to `Tr(ρ_a ρ_b)` for well-contained states.
pub fn overlap(a: &WignerField, b: &WignerField) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let w = a.grid.weights();
    Ok(2.0 * PI * w.iter().zip(a.values.iter().zip(&b.values)).map(|(w, (x, y))| w * x * y).sum::<f64>())
}

/// All `W_{|n⟩⟨m|}(x, p)` for `n, m ≤ n_max` as a `D×D` matrix.
///
/// For `n ≥ m`: `((-1)^m / π) √(m!/n!) (√2 (x - i p))^{n-m} e^{-r²} L_m^{(n-m)}(2r²)`;
/// the other triangle is the complex conjugate. Laguerre values come from the
/// upward three-term recurrence.
pub fn wigner_basis_matrix(dim: FockDim, x: f64, p: f64) -> DMatrix<C64> {
    let d = dim.size();
    let r2 = x * x + p * p;
    let y = 2.0 * r2;
    let gauss = (-r2).exp() / PI;
    let z = C64::new(x, -p) * std::f64::consts::SQRT_2;
    let mut out = DMatrix::from_element(d, d, ZERO);
    let mut zk = ONE;
    for k in 0..d {
        let kf = k as f64;
        let mut l_prev = 0.0;
        let mut l_cur = 1.0;
        // sqrt(m!/(m+k)!) updated incrementally in m
        let mut ratio = (1..=k).fold(1.0, |acc, j| acc / (j as f64).sqrt());
        for m in 0..(d - k) {
            if m > 0 {
                let mf = (m - 1) as f64;
                let next = ((2.0 * mf + 1.0 + kf - y) * l_cur - (mf + kf) * l_prev) / (mf + 1.0);
                l_prev = l_cur;
                l_cur = next;
                ratio *= ((m as f64) / ((m + k) as f64)).sqrt();
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let v = zk * (sign * ratio * gauss * l_cur);
            out[(m + k, m)] = v;
            out[(m, m + k)] = v.conj();
        }
        zk *= z;
    }
    out
}

/// Wigner transform of `|n⟩⟨m|` at one phase-space point.
pub fn wigner_basis(n: usize, m: usize, x: f64, p: f64, dim: FockDim) -> Result<C64> {
    dim.check(n)?;
    dim.check(m)?;
    Ok(wigner_basis_matrix(dim, x, p)[(n, m)])
}

/// Pointwise Wigner function of a single-mode state.
pub fn wigner_at(rho: &DensityOperator, x: f64, p: f64) -> f64 {
    let w = wigner_basis_matrix(rho.dim, x, p);
    // W = Σ ρ_{n,m} W_{|n⟩⟨m|}
    rho.matrix.iter().zip(w.iter()).map(|(r, b)| r * b).sum::<C64>().re
}

/// Samples the Wigner function of a single-mode state on a grid.
pub fn wigner_of(rho: &DensityOperator, grid: &QuadratureGrid) -> WignerField {
    WignerField::from_fn(grid.clone(), |x, p| wigner_at(rho, x, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn dim(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    #[test]
    fn fock_states_and_cutoff() {
        let d = dim(5);
        let v = fock_state(0, d).unwrap();
        assert_eq!(v.get(0, 0), ONE);
        let one = fock_state(1, d).unwrap();
        assert_abs_diff_eq!(one.trace(), 1.0);
        assert_abs_diff_eq!(one.purity(), 1.0);
        assert!(matches!(fock_state(6, d), Err(Error::Cutoff { n: 6, n_max: 5 })));
        assert!(FockDim::new(0).is_err());
    }

    #[test]
    fn coherent_and_thermal() {
        let d = dim(15);
        let v = coherent_state(C64::new(0.0, 0.0), d);
        assert_abs_diff_eq!(v.get(0, 0).re, 1.0);
        let c = coherent_state(C64::new(0.1, 0.0), d);
        assert_abs_diff_eq!(c.get(0, 0).re, (-0.01f64).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(c.get(0, 0).re, 0.99005, epsilon = 1e-5);
        // Poisson weights up to n = 20 for |α|² = 1
        let c1 = coherent_state(C64::new(1.0, 0.0), dim(20));
        let mut poisson = 0.0;
        let mut term = (-1.0f64).exp();
        for n in 0..=20 {
            poisson += term;
            term /= (n + 1) as f64;
        }
        assert_abs_diff_eq!(c1.trace(), poisson, epsilon = 1e-14);
        assert!((c1.trace() - 1.0).abs() < 1e-12);

        let t0 = thermal_state(0.0, d).unwrap();
        assert_abs_diff_eq!(t0.get(0, 0).re, 1.0);
        let t1 = thermal_state(1.0, d).unwrap();
        assert_abs_diff_eq!(t1.get(1, 1).re / t1.get(0, 0).re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(thermal_state(0.5, d).unwrap().trace(), 1.0, epsilon = 1e-12);
        assert!(thermal_state(-0.1, d).is_err());
    }

    #[test]
    fn wigner_basis_closed_forms() {
        let d = dim(4);
        for &(x, p) in &[(0.0, 0.0), (0.3, -0.7), (1.2, 0.4)] {
            let v = wigner_basis(0, 0, x, p, d).unwrap();
            assert_abs_diff_eq!(v.re, (-x * x - p * p).exp() / PI, epsilon = 1e-15);
            assert_abs_diff_eq!(v.im, 0.0);
            let one = wigner_basis(1, 1, x, p, d).unwrap().re;
            assert_abs_diff_eq!(one, (2.0 * x * x + 2.0 * p * p - 1.0) * (-x * x - p * p).exp() / PI, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(wigner_basis(1, 1, 0.0, 0.0, d).unwrap().re, -1.0 / PI, epsilon = 1e-15);
        assert!(wigner_basis(5, 0, 0.0, 0.0, d).is_err());
    }

    #[test]
    fn wigner_basis_conjugate_symmetry() {
        let d = dim(12);
        let w = wigner_basis_matrix(d, 0.8, -1.3);
        for n in 0..d.size() {
            for m in 0..d.size() {
                assert!((w[(n, m)] - w[(m, n)].conj()).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn vacuum_and_coherent_wigner() {
        let g = QuadratureGrid::square(-3.0, 3.0, 31).unwrap();
        let d = dim(15);
        let w = wigner_of(&vacuum(d), &g);
        for (k, (x, p)) in g.points().enumerate() {
            assert_abs_diff_eq!(w.values[k], (-x * x - p * p).exp() / PI, epsilon = 1e-12);
        }
        let alpha = C64::new(0.4, -0.3);
        let c = coherent_state(alpha, dim(20));
        let (x0, p0) = (2f64.sqrt() * alpha.re, 2f64.sqrt() * alpha.im);
        for (x, p) in g.points() {
            let expect = (-(x - x0).powi(2) - (p - p0).powi(2)).exp() / PI;
            assert_abs_diff_eq!(wigner_at(&c, x, p), expect, epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_integrals() {
        let g = QuadratureGrid::square(-5.0, 5.0, 201).unwrap();
        let d = dim(15);
        assert_abs_diff_eq!(grid_integral(&wigner_of(&vacuum(d), &g)), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(grid_integral(&WignerField::zeros(g.clone())), 0.0);
        assert_abs_diff_eq!(grid_integral(&wigner_of(&fock_state(1, d).unwrap(), &g)), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn fidelity_values() {
        let d = dim(10);
        let v = vacuum(d);
        let one = fock_state(1, d).unwrap();
        assert_abs_diff_eq!(fidelity(&v, &v).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&v, &one).unwrap(), 0.0, epsilon = 1e-12);
        let t = thermal_state(0.5, dim(40)).unwrap();
        // diagonal closed form: (Σ √(p_n q_n))² = p_0 under a vacuum reference
        let f = fidelity(&vacuum(dim(40)), &t).unwrap();
        assert_abs_diff_eq!(f, t.get(0, 0).re, epsilon = 1e-12);
        assert_abs_diff_eq!(f, 2.0 / 3.0, epsilon = 1e-7);
        let bad = DensityOperator::from_matrix(
            d,
            1,
            DMatrix::from_fn(11, 11, |i, j| if i == j && i == 0 { C64::from(-1.0) } else { ZERO }),
        )
        .unwrap();
        assert!(fidelity(&bad, &v).is_err());
    }

    #[test]
    fn partial_trace_of_product() {
        let d = dim(3);
        let a = coherent_state(C64::new(0.3, 0.1), d);
        let b = thermal_state(0.4, d).unwrap();
        let ab = a.tensor(&b).unwrap();
        let ra = ab.partial_trace(1).unwrap();
        let rb = ab.partial_trace(0).unwrap();
        assert!((ra.matrix() - a.matrix() * C64::from(b.trace())).norm() < 1e-14);
        assert!((rb.matrix() - b.matrix() * C64::from(a.trace())).norm() < 1e-14);
    }

    #[test]
    fn interpolation_reproduces_smooth_fields() {
        let g = QuadratureGrid::square(-4.0, 4.0, 161).unwrap();
        let w = wigner_of(&vacuum(dim(4)), &g);
        let v = w.interpolate(0.123, -0.456);
        assert_abs_diff_eq!(v, (-(0.123f64).powi(2) - 0.456f64.powi(2)).exp() / PI, epsilon = 1e-5);
        assert_eq!(w.interpolate(10.0, 0.0), 0.0);
    }
}
