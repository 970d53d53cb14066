//! Phase-space transfer kernels `f(x', p', x, p)` with
//! `W'(x', p') = ∫ dx dp W(x, p) f(x', p', x, p)`.
//!
//! Kernels built from a Fock tensor use
//! `f = 2π Σ E^{n,m}_{l,k} W_{|m⟩⟨n|}(x, p) W_{|l⟩⟨k|}(x', p')`, evaluated on
//! demand: the sum is separable, so no 4D array is needed unless a dense
//! sample is asked for explicitly.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fock::{wigner_basis_matrix, FockDim, QuadratureGrid, WignerField, C64};
use crate::map::{phase_invariance_defect, tensor_from_kraus, KrausSet, ProcessTensor};

/// Grids coarser than this trigger a diagnostic in [`kernel_from_tensor`].
pub const MAX_RECOMMENDED_SPACING: f64 = 0.25;

/// Symbolic delta kernel for a linear symplectic coordinate change:
/// `r_out = F r_in + c` with `r = (x₁, p₁, x₂, p₂, …)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineDelta {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
    offset: DVector<f64>,
}

impl AffineDelta {
    pub fn new(forward: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let n = forward.nrows();
        if n == 0 || n % 2 != 0 || forward.ncols() != n || offset.len() != n {
            return Err(Error::DimensionMismatch("affine map needs a square even-sized matrix".into()));
        }
        let det = forward.determinant();
        if (det.abs() - 1.0).abs() > 1e-9 {
            return Err(Error::Parameter(format!("coordinate change must preserve volume (det = {det})")));
        }
        let inverse = forward.clone().try_inverse().ok_or_else(|| Error::Parameter("singular coordinate change".into()))?;
        Ok(AffineDelta { forward, inverse, offset })
    }

    pub fn identity(modes: usize) -> Self {
        let n = 2 * modes;
        AffineDelta { forward: DMatrix::identity(n, n), inverse: DMatrix::identity(n, n), offset: DVector::zeros(n) }
    }

    pub fn modes(&self) -> usize {
        self.forward.nrows() / 2
    }

    pub fn forward(&self) -> &DMatrix<f64> {
        &self.forward
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// Input coordinates that land on `r_out`.
    pub fn source_of(&self, r_out: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(r_out);
        (&self.inverse * (r - &self.offset)).iter().cloned().collect()
    }

    pub fn image_of(&self, r_in: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(r_in);
        (&self.forward * r + &self.offset).iter().cloned().collect()
    }

    /// Output Wigner function as a closure: `W'(r') = W(F⁻¹(r' − c))` (unit Jacobian).
    pub fn transform<'a>(&'a self, w: impl Fn(&[f64]) -> f64 + 'a) -> impl Fn(&[f64]) -> f64 + 'a {
        move |r| w(&self.source_of(r))
    }

    /// Delta map applied before `self`.
    fn after(&self, first: &AffineDelta) -> AffineDelta {
        AffineDelta {
            forward: &self.forward * &first.forward,
            inverse: &first.inverse * &self.inverse,
            offset: &self.forward * &first.offset + &self.offset,
        }
    }
}

/// Single-mode linear Gaussian kernel: `r' ~ N(M r + d, N)` times a weight.
///
/// For diagonal `M = diag(μ_x, μ_p)` and `N = diag(ν_x², ν_p²)/2` this is
/// `(w / (π ν_x ν_p)) exp(-((x' - μ_x x)/ν_x)²) exp(-((p' - μ_p p)/ν_p)²)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianKernel {
    pub transfer: Matrix2<f64>,
    pub offset: Vector2<f64>,
    pub noise: Matrix2<f64>,
    pub weight: f64,
}

impl GaussianKernel {
    /// Per-quadrature form with gains `μ` and noise widths `ν`.
    pub fn diagonal(mu_x: f64, nu_x: f64, mu_p: f64, nu_p: f64) -> Result<Self> {
        if nu_x == 0.0 || nu_p == 0.0 {
            return Err(Error::DegenerateChannel("zero noise width; use an affine delta".into()));
        }
        Ok(GaussianKernel {
            transfer: Matrix2::new(mu_x, 0.0, 0.0, mu_p),
            offset: Vector2::zeros(),
            noise: Matrix2::new(0.5 * nu_x * nu_x, 0.0, 0.0, 0.5 * nu_p * nu_p),
            weight: 1.0,
        })
    }

    pub fn value(&self, xo: f64, po: f64, x: f64, p: f64) -> f64 {
        let mean = self.transfer * Vector2::new(x, p) + self.offset;
        let dv = Vector2::new(xo, po) - mean;
        let inv = self.noise.try_inverse().expect("noise covariance is positive definite");
        let q = (dv.transpose() * inv * dv)[(0, 0)];
        self.weight * (-0.5 * q).exp() / (2.0 * PI * self.noise.determinant().sqrt())
    }

    fn then_gaussian(&self, next: &GaussianKernel) -> GaussianKernel {
        GaussianKernel {
            transfer: next.transfer * self.transfer,
            offset: next.transfer * self.offset + next.offset,
            noise: next.transfer * self.noise * next.transfer.transpose() + next.noise,
            weight: self.weight * next.weight,
        }
    }

    fn then_delta(&self, next: &AffineDelta) -> GaussianKernel {
        let f = Matrix2::new(next.forward[(0, 0)], next.forward[(0, 1)], next.forward[(1, 0)], next.forward[(1, 1)]);
        let c = Vector2::new(next.offset[0], next.offset[1]);
        GaussianKernel {
            transfer: f * self.transfer,
            offset: f * self.offset + c,
            noise: f * self.noise * f.transpose(),
            weight: self.weight,
        }
    }

    fn after_delta(&self, first: &AffineDelta) -> GaussianKernel {
        let f = Matrix2::new(first.forward[(0, 0)], first.forward[(0, 1)], first.forward[(1, 0)], first.forward[(1, 1)]);
        let c = Vector2::new(first.offset[0], first.offset[1]);
        GaussianKernel {
            transfer: self.transfer * f,
            offset: self.transfer * c + self.offset,
            noise: self.noise,
            weight: self.weight,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum GridSource {
    Sampled(DMatrix<f64>),
    Tensor(ProcessTensor),
}

/// Kernel on an input grid × output grid. Rows of a dense sample index
/// output points, columns index input points.
#[derive(Clone, Debug, PartialEq)]
pub struct GridKernel {
    in_grid: QuadratureGrid,
    out_grid: QuadratureGrid,
    source: GridSource,
    diagnostics: Vec<String>,
}

/// Basis values `W_{|n⟩⟨m|}` at every grid point, row `i`, column `n·D + m`.
fn basis_table(dim: FockDim, grid: &QuadratureGrid) -> DMatrix<C64> {
    let d2 = dim.size().pow(2);
    let rows: Vec<Vec<C64>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let (x, p) = grid.point(i);
            wigner_basis_matrix(dim, x, p).transpose().iter().cloned().collect()
        })
        .collect();
    DMatrix::from_fn(grid.len(), d2, |i, j| rows[i][j])
}

/// Integrals `∫ W_{|n⟩⟨m|}` over a grid (trapezoidal), indexed `n·D + m`.
fn basis_integrals(dim: FockDim, grid: &QuadratureGrid) -> DVector<C64> {
    let w = grid.weights();
    let table = basis_table(dim, grid);
    let wv = DVector::from_iterator(w.len(), w.iter().map(|&v| C64::from(v)));
    table.transpose() * wv
}

fn conj_entries(v: &DVector<C64>) -> DVector<C64> {
    v.map(|z| z.conj())
}

fn check_real(z: C64, what: &str) -> Result<f64> {
    if z.im.abs() > 1e-10 * z.re.abs().max(1.0) {
        return Err(Error::Validation(format!("{what} has imaginary residue {:.3e}", z.im)));
    }
    Ok(z.re)
}

impl GridKernel {
    pub fn from_samples(in_grid: QuadratureGrid, out_grid: QuadratureGrid, values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() != out_grid.len() || values.ncols() != in_grid.len() {
            return Err(Error::DimensionMismatch("sample matrix does not match grids".into()));
        }
        Ok(GridKernel { in_grid, out_grid, source: GridSource::Sampled(values), diagnostics: vec![] })
    }

    pub fn in_grid(&self) -> &QuadratureGrid {
        &self.in_grid
    }

    pub fn out_grid(&self) -> &QuadratureGrid {
        &self.out_grid
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn tensor(&self) -> Option<&ProcessTensor> {
        match &self.source {
            GridSource::Tensor(t) => Some(t),
            GridSource::Sampled(_) => None,
        }
    }

    /// Kernel value at an arbitrary point (tensor-backed) or a grid point (sampled).
    pub fn value(&self, xo: f64, po: f64, x: f64, p: f64) -> Result<f64> {
        match &self.source {
            GridSource::Tensor(t) => tensor_kernel_value(t, xo, po, x, p),
            GridSource::Sampled(v) => {
                let j = grid_index(&self.out_grid, xo, po).ok_or(Error::GridMismatch)?;
                let i = grid_index(&self.in_grid, x, p).ok_or(Error::GridMismatch)?;
                Ok(v[(j, i)])
            }
        }
    }

    /// Dense `(N_out × N_in)` samples.
    pub fn sample(&self) -> Result<DMatrix<f64>> {
        match &self.source {
            GridSource::Sampled(v) => Ok(v.clone()),
            GridSource::Tensor(t) => {
                let a = basis_table(t.dim(), &self.in_grid);
                let b = basis_table(t.dim(), &self.out_grid);
                // conj(W_nm) at input points = W_{|m⟩⟨n|}
                let ac = a.map(|z| z.conj());
                let s = t.superoperator();
                let full = (&b * s) * ac.transpose() * C64::from(2.0 * PI);
                let mut out = DMatrix::zeros(full.nrows(), full.ncols());
                for (o, z) in out.iter_mut().zip(full.iter()) {
                    *o = check_real(*z, "kernel sample")?;
                }
                Ok(out)
            }
        }
    }
}

fn grid_index(g: &QuadratureGrid, x: f64, p: f64) -> Option<usize> {
    let i = ((x - g.x_min) / g.dx()).round();
    let j = ((p - g.p_min) / g.dp()).round();
    if i < 0.0 || j < 0.0 || i as usize >= g.n_x || j as usize >= g.n_p {
        return None;
    }
    let (i, j) = (i as usize, j as usize);
    if (g.x(i) - x).abs() > 1e-9 * g.dx() || (g.p(j) - p).abs() > 1e-9 * g.dp() {
        return None;
    }
    Some(i * g.n_p + j)
}

/// `f(x', p', x, p)` straight from a single-mode tensor.
pub fn tensor_kernel_value(t: &ProcessTensor, xo: f64, po: f64, x: f64, p: f64) -> Result<f64> {
    single_mode(t)?;
    let d = t.dim().size();
    let win = wigner_basis_matrix(t.dim(), x, p);
    let wout = wigner_basis_matrix(t.dim(), xo, po);
    let c = DVector::from_iterator(d * d, (0..d * d).map(|i| win[(i / d, i % d)].conj()));
    let g = t.superoperator() * c;
    let v: C64 = (0..d * d).map(|i| g[i] * wout[(i / d, i % d)]).sum();
    check_real(v * 2.0 * PI, "kernel value")
}

fn single_mode(t: &ProcessTensor) -> Result<()> {
    if t.input_modes() != 1 || t.output_modes() != 1 {
        return Err(Error::Unsupported(format!(
            "transfer kernels are single-mode; tensor has {} -> {} modes",
            t.input_modes(),
            t.output_modes()
        )));
    }
    Ok(())
}

/// A transfer kernel in one of its representations.
#[derive(Clone, Debug, PartialEq)]
pub enum TransferKernel {
    AffineDelta(AffineDelta),
    Gaussian(GaussianKernel),
    Grid(GridKernel),
    Sum(Vec<(f64, TransferKernel)>),
}

impl TransferKernel {
    pub fn identity() -> Self {
        TransferKernel::AffineDelta(AffineDelta::identity(1))
    }

    pub fn scaled(&self, c: f64) -> Self {
        TransferKernel::Sum(vec![(c, self.clone())])
    }

    pub fn modes(&self) -> usize {
        match self {
            TransferKernel::AffineDelta(a) => a.modes(),
            TransferKernel::Sum(terms) => terms.first().map_or(1, |(_, k)| k.modes()),
            _ => 1,
        }
    }

    /// Pointwise value; delta kernels cannot be sampled.
    pub fn value(&self, xo: f64, po: f64, x: f64, p: f64) -> Result<f64> {
        match self {
            TransferKernel::AffineDelta(_) => Err(Error::Unsupported("delta kernels are never sampled".into())),
            TransferKernel::Gaussian(g) => Ok(g.value(xo, po, x, p)),
            TransferKernel::Grid(g) => g.value(xo, po, x, p),
            TransferKernel::Sum(terms) => terms.iter().map(|(w, k)| Ok(w * k.value(xo, po, x, p)?)).sum(),
        }
    }

    /// Dense samples on the given grids.
    pub fn sample(&self, in_grid: &QuadratureGrid, out_grid: &QuadratureGrid) -> Result<DMatrix<f64>> {
        match self {
            TransferKernel::AffineDelta(_) => Err(Error::Unsupported("delta kernels are never sampled".into())),
            TransferKernel::Gaussian(g) => {
                let ins: Vec<_> = in_grid.points().collect();
                let outs: Vec<_> = out_grid.points().collect();
                Ok(DMatrix::from_fn(outs.len(), ins.len(), |j, i| g.value(outs[j].0, outs[j].1, ins[i].0, ins[i].1)))
            }
            TransferKernel::Grid(g) => {
                if g.in_grid() != in_grid || g.out_grid() != out_grid {
                    return Err(Error::GridMismatch);
                }
                g.sample()
            }
            TransferKernel::Sum(terms) => {
                let mut acc = DMatrix::zeros(out_grid.len(), in_grid.len());
                for (w, k) in terms {
                    acc += k.sample(in_grid, out_grid)? * *w;
                }
                Ok(acc)
            }
        }
    }
}

/// Transfer kernel of a single-mode tensor on the given grids.
pub fn kernel_from_tensor(t: &ProcessTensor, in_grid: &QuadratureGrid, out_grid: &QuadratureGrid) -> Result<GridKernel> {
    single_mode(t)?;
    let mut diagnostics = vec![];
    for (name, g) in [("input", in_grid), ("output", out_grid)] {
        if g.max_spacing() > MAX_RECOMMENDED_SPACING {
            diagnostics.push(format!(
                "{name} grid spacing {:.3} exceeds {MAX_RECOMMENDED_SPACING}; kernel features may be undersampled",
                g.max_spacing()
            ));
        }
    }
    Ok(GridKernel { in_grid: in_grid.clone(), out_grid: out_grid.clone(), source: GridSource::Tensor(t.clone()), diagnostics })
}

/// Same as [`kernel_from_tensor`] after summing the Kraus terms into a tensor.
pub fn kernel_from_kraus(k: &KrausSet, in_grid: &QuadratureGrid, out_grid: &QuadratureGrid) -> Result<GridKernel> {
    kernel_from_tensor(&tensor_from_kraus(k), in_grid, out_grid)
}

fn apply_tensor_grid(t: &ProcessTensor, w_in: &WignerField, out_grid: &QuadratureGrid) -> Result<WignerField> {
    let w = w_in.grid.weights();
    let a = basis_table(t.dim(), &w_in.grid);
    // ρ_{n,m} = 2π ∫ W W_{|m⟩⟨n|}
    let wv = DVector::from_iterator(w.len(), w.iter().zip(&w_in.values).map(|(a, b)| C64::from(a * b)));
    let rho = conj_entries(&(a.transpose() * wv)) * C64::from(2.0 * PI);
    let out = t.superoperator() * rho;
    let b = basis_table(t.dim(), out_grid);
    let vals = &b * out;
    let values = vals.iter().map(|z| check_real(*z, "output Wigner")).collect::<Result<Vec<_>>>()?;
    Ok(WignerField { grid: out_grid.clone(), values })
}

/// `W'(x', p') = ∫ W(x, p) f(x', p', x, p) dx dp`.
///
/// Delta and Gaussian kernels return on the input grid; grid kernels on their
/// output grid.
pub fn apply_kernel(f: &TransferKernel, w_in: &WignerField) -> Result<WignerField> {
    match f {
        TransferKernel::AffineDelta(a) => {
            if a.modes() != 1 {
                return Err(Error::Unsupported("multi-mode delta kernels act on closures, see AffineDelta::transform".into()));
            }
            let map = a.transform(|r: &[f64]| w_in.interpolate(r[0], r[1]));
            Ok(WignerField::from_fn(w_in.grid.clone(), |x, p| map(&[x, p])))
        }
        TransferKernel::Gaussian(_) => {
            let k = f.sample(&w_in.grid, &w_in.grid)?;
            let weights = w_in.grid.weights();
            let v = DVector::from_iterator(weights.len(), weights.iter().zip(&w_in.values).map(|(a, b)| a * b));
            let out = k * v;
            Ok(WignerField { grid: w_in.grid.clone(), values: out.iter().cloned().collect() })
        }
        TransferKernel::Grid(g) => {
            if g.in_grid() != &w_in.grid {
                return Err(Error::GridMismatch);
            }
            match &g.source {
                GridSource::Tensor(t) => apply_tensor_grid(t, w_in, g.out_grid()),
                GridSource::Sampled(k) => {
                    let weights = w_in.grid.weights();
                    let v = DVector::from_iterator(weights.len(), weights.iter().zip(&w_in.values).map(|(a, b)| a * b));
                    let out = k * v;
                    Ok(WignerField { grid: g.out_grid().clone(), values: out.iter().cloned().collect() })
                }
            }
        }
        TransferKernel::Sum(terms) => {
            let mut acc: Option<WignerField> = None;
            for (w, k) in terms {
                let part = apply_kernel(k, w_in)?;
                match &mut acc {
                    None => {
                        acc = Some(WignerField { grid: part.grid.clone(), values: part.values.iter().map(|v| v * w).collect() })
                    }
                    Some(a) => {
                        if a.grid != part.grid {
                            return Err(Error::GridMismatch);
                        }
                        for (x, y) in a.values.iter_mut().zip(&part.values) {
                            *x += w * y;
                        }
                    }
                }
            }
            acc.ok_or_else(|| Error::Parameter("empty kernel sum".into()))
        }
    }
}

/// `f = ∫ dx'' dp'' f₂(x', p', x'', p'') f₁(x'', p'', x, p)`.
///
/// Gaussian and delta pairs compose in closed form. Anything involving a
/// grid kernel is integrated by trapezoidal quadrature over the intermediate
/// grid, which is `f1`'s output grid (or `f2`'s input grid).
pub fn compose_kernels(f2: &TransferKernel, f1: &TransferKernel) -> Result<TransferKernel> {
    use TransferKernel::*;
    if f1.modes() != f2.modes() {
        return Err(Error::DimensionMismatch("kernels act on different mode counts".into()));
    }
    match (f2, f1) {
        (AffineDelta(b), AffineDelta(a)) => Ok(AffineDelta(b.after(a))),
        (Gaussian(b), Gaussian(a)) => Ok(Gaussian(a.then_gaussian(b))),
        (AffineDelta(b), Gaussian(a)) => Ok(Gaussian(a.then_delta(b))),
        (Gaussian(b), AffineDelta(a)) => Ok(Gaussian(b.after_delta(a))),
        (Sum(terms), other) => Ok(Sum(terms.iter().map(|(w, k)| Ok((*w, compose_kernels(k, other)?))).collect::<Result<_>>()?)),
        (other, Sum(terms)) => Ok(Sum(terms.iter().map(|(w, k)| Ok((*w, compose_kernels(other, k)?))).collect::<Result<_>>()?)),
        (Grid(b), Grid(a)) => {
            if a.out_grid() != b.in_grid() {
                return Err(Error::GridMismatch);
            }
            compose_on_grids(f2, f1, a.in_grid(), a.out_grid(), b.out_grid())
        }
        (Grid(b), Gaussian(_)) => compose_on_grids(f2, f1, b.in_grid(), b.in_grid(), b.out_grid()),
        (Gaussian(_), Grid(a)) => compose_on_grids(f2, f1, a.in_grid(), a.out_grid(), a.out_grid()),
        _ => Err(Error::Unsupported("delta kernels compose only with deltas and Gaussians".into())),
    }
}

/// Quadrature composition over an explicit intermediate grid.
pub fn compose_on_grids(
    f2: &TransferKernel,
    f1: &TransferKernel,
    in_grid: &QuadratureGrid,
    mid_grid: &QuadratureGrid,
    out_grid: &QuadratureGrid,
) -> Result<TransferKernel> {
    let k1 = f1.sample(in_grid, mid_grid)?;
    let k2 = f2.sample(mid_grid, out_grid)?;
    let w = DVector::from_vec(mid_grid.weights());
    let weighted = DMatrix::from_fn(k1.nrows(), k1.ncols(), |h, i| w[h] * k1[(h, i)]);
    let values = k2 * weighted;
    Ok(TransferKernel::Grid(GridKernel::from_samples(in_grid.clone(), out_grid.clone(), values)?))
}

/// `∫ f dx' dp'` as a field over input points.
///
/// Grid kernels integrate over their output grid and need `grid` to equal
/// their input grid; Gaussians integrate in closed form.
pub fn input_marginal(f: &TransferKernel, grid: &QuadratureGrid) -> Result<WignerField> {
    match f {
        TransferKernel::AffineDelta(_) => Ok(WignerField::from_fn(grid.clone(), |_, _| 1.0)),
        TransferKernel::Gaussian(g) => Ok(WignerField::from_fn(grid.clone(), |_, _| g.weight)),
        TransferKernel::Grid(g) => {
            if g.in_grid() != grid {
                return Err(Error::GridMismatch);
            }
            match &g.source {
                GridSource::Tensor(t) => {
                    let iout = basis_integrals(t.dim(), g.out_grid());
                    // h_{n,m} = Σ_{l,k} E^{n,m}_{l,k} ∫W_{|l⟩⟨k|}
                    let h = t.superoperator().transpose() * iout;
                    let a = basis_table(t.dim(), grid);
                    let ac = a.map(|z| z.conj());
                    let vals = ac * h * C64::from(2.0 * PI);
                    let values = vals.iter().map(|z| check_real(*z, "input marginal")).collect::<Result<Vec<_>>>()?;
                    Ok(WignerField { grid: grid.clone(), values })
                }
                GridSource::Sampled(k) => {
                    let w = DVector::from_vec(g.out_grid().weights());
                    let vals = k.transpose() * w;
                    Ok(WignerField { grid: grid.clone(), values: vals.iter().cloned().collect() })
                }
            }
        }
        TransferKernel::Sum(terms) => {
            let mut acc = WignerField::zeros(grid.clone());
            for (w, k) in terms {
                let part = input_marginal(k, grid)?;
                for (a, b) in acc.values.iter_mut().zip(&part.values) {
                    *a += w * b;
                }
            }
            Ok(acc)
        }
    }
}

/// `∫ f dx dp` as a field over output points.
pub fn output_marginal(f: &TransferKernel, grid: &QuadratureGrid) -> Result<WignerField> {
    match f {
        TransferKernel::AffineDelta(_) => Ok(WignerField::from_fn(grid.clone(), |_, _| 1.0)),
        TransferKernel::Gaussian(g) => {
            let det = g.transfer.determinant().abs();
            if det < 1e-300 {
                return Err(Error::Unsupported("output marginal of a rank-deficient Gaussian diverges".into()));
            }
            Ok(WignerField::from_fn(grid.clone(), |_, _| g.weight / det))
        }
        TransferKernel::Grid(g) => {
            if g.out_grid() != grid {
                return Err(Error::GridMismatch);
            }
            match &g.source {
                GridSource::Tensor(t) => {
                    let iin = conj_entries(&basis_integrals(t.dim(), g.in_grid()));
                    let h = t.superoperator() * iin;
                    let b = basis_table(t.dim(), grid);
                    let vals = b * h * C64::from(2.0 * PI);
                    let values = vals.iter().map(|z| check_real(*z, "output marginal")).collect::<Result<Vec<_>>>()?;
                    Ok(WignerField { grid: grid.clone(), values })
                }
                GridSource::Sampled(k) => {
                    let w = DVector::from_vec(g.in_grid().weights());
                    let vals = k * w;
                    Ok(WignerField { grid: grid.clone(), values: vals.iter().cloned().collect() })
                }
            }
        }
        TransferKernel::Sum(terms) => {
            let mut acc = WignerField::zeros(grid.clone());
            for (w, k) in terms {
                let part = output_marginal(k, grid)?;
                for (a, b) in acc.values.iter_mut().zip(&part.values) {
                    *a += w * b;
                }
            }
            Ok(acc)
        }
    }
}

/// `∫ f dx' dp' dx dp / 2π` over a grid kernel's grids, which equals
/// `Tr(E†E)` when `∫ f dx' dp' = 2π W_{E†E}` integrates to one per unit input.
pub fn kernel_norm(f: &TransferKernel) -> Result<f64> {
    match f {
        TransferKernel::Grid(g) => match &g.source {
            GridSource::Tensor(t) => {
                let iin = conj_entries(&basis_integrals(t.dim(), g.in_grid()));
                let iout = basis_integrals(t.dim(), g.out_grid());
                let h = t.superoperator() * iin;
                let v: C64 = h.iter().zip(iout.iter()).map(|(a, b)| a * b).sum();
                check_real(v, "kernel norm")
            }
            GridSource::Sampled(k) => {
                let wi = DVector::from_vec(g.in_grid().weights());
                let wo = DVector::from_vec(g.out_grid().weights());
                Ok((wo.transpose() * k * wi)[(0, 0)] / (2.0 * PI))
            }
        },
        TransferKernel::Sum(terms) => terms.iter().map(|(w, k)| Ok(w * kernel_norm(k)?)).sum(),
        _ => Err(Error::Unsupported("4D norm of an unbounded symbolic kernel".into())),
    }
}

/// Sampling layout for radial kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialGrid {
    pub r_prime: Vec<f64>,
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(r_max: f64, n_r: usize, theta: Vec<f64>) -> Self {
        let rs: Vec<f64> = (0..n_r).map(|i| r_max * i as f64 / (n_r - 1).max(1) as f64).collect();
        RadialGrid { r_prime: rs.clone(), r: rs, theta }
    }
}

/// `f(r', r, θ)` of a phase-invariant map, stored `[θ][r][r']`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialKernel {
    pub grid: RadialGrid,
    pub values: Vec<f64>,
}

impl RadialKernel {
    pub fn get(&self, it: usize, ir: usize, irp: usize) -> f64 {
        let (nr, nrp) = (self.grid.r.len(), self.grid.r_prime.len());
        self.values[(it * nr + ir) * nrp + irp]
    }

    pub fn scaled(&self, c: f64) -> Self {
        RadialKernel { grid: self.grid.clone(), values: self.values.iter().map(|v| v * c).collect() }
    }

    /// Trapezoidal weights over `(θ, r, r')`; singleton axes get weight 1.
    pub fn weights(&self) -> Vec<f64> {
        let axis = |v: &[f64]| -> Vec<f64> {
            if v.len() < 2 {
                return vec![1.0; v.len()];
            }
            (0..v.len())
                .map(|i| {
                    let left = if i > 0 { v[i] - v[i - 1] } else { 0.0 };
                    let right = if i + 1 < v.len() { v[i + 1] - v[i] } else { 0.0 };
                    0.5 * (left + right)
                })
                .collect()
        };
        let (wt, wr, wrp) = (axis(&self.grid.theta), axis(&self.grid.r), axis(&self.grid.r_prime));
        let mut out = Vec::with_capacity(self.values.len());
        for a in &wt {
            for b in &wr {
                for c in &wrp {
                    out.push(a * b * c);
                }
            }
        }
        out
    }

    /// CSV with columns `r_prime,r,theta,value`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r_prime,r,theta,value\n");
        for (it, th) in self.grid.theta.iter().enumerate() {
            for (ir, r) in self.grid.r.iter().enumerate() {
                for (irp, rp) in self.grid.r_prime.iter().enumerate() {
                    s.push_str(&format!(
                        "{},{},{},{}\n",
                        crate::io::fmt_f64(*rp),
                        crate::io::fmt_f64(*r),
                        crate::io::fmt_f64(*th),
                        crate::io::fmt_f64(self.get(it, ir, irp))
                    ));
                }
            }
        }
        s
    }
}

/// On-demand point evaluation of a single-mode kernel.
///
/// `prepare(x, p)` gives the output-side operator `G` with
/// `f(x', p', x, p) = 2π Re Σ_{l,k} G_{l,k} W_{|l⟩⟨k|}(x', p')`, so one input
/// point can be reused across many output points.
pub trait PointKernel: Sync {
    fn dim(&self) -> FockDim;

    fn prepare(&self, x: f64, p: f64) -> DMatrix<C64>;

    fn value_with(&self, g: &DMatrix<C64>, xo: f64, po: f64) -> f64 {
        let wout = wigner_basis_matrix(self.dim(), xo, po);
        let v: C64 = g.iter().zip(wout.iter()).map(|(a, b)| a * b).sum();
        2.0 * PI * v.re
    }

    fn value(&self, xo: f64, po: f64, x: f64, p: f64) -> f64 {
        self.value_with(&self.prepare(x, p), xo, po)
    }
}

/// Tensor-backed evaluator, `O(D⁴)` per input point.
pub struct TensorKernelEval<'a> {
    t: &'a ProcessTensor,
}

impl<'a> TensorKernelEval<'a> {
    pub fn new(t: &'a ProcessTensor) -> Result<Self> {
        single_mode(t)?;
        Ok(TensorKernelEval { t })
    }
}

impl PointKernel for TensorKernelEval<'_> {
    fn dim(&self) -> FockDim {
        self.t.dim()
    }

    fn prepare(&self, x: f64, p: f64) -> DMatrix<C64> {
        let d = self.t.dim().size();
        let win = wigner_basis_matrix(self.t.dim(), x, p);
        let c = DVector::from_iterator(d * d, (0..d * d).map(|i| win[(i / d, i % d)].conj()));
        let g = self.t.superoperator() * c;
        DMatrix::from_fn(d, d, |l, k| g[l * d + k])
    }
}

/// Kraus-backed evaluator: `G = Σ_i E_i C E_i†` with `C_{n,m} = conj W_{|n⟩⟨m|}`.
/// Cheap for large truncations where the dense tensor would not fit.
pub struct KrausKernelEval<'a> {
    k: &'a KrausSet,
    sparse: Vec<Option<Vec<(usize, usize, C64)>>>,
}

impl<'a> KrausKernelEval<'a> {
    pub fn new(k: &'a KrausSet) -> Result<Self> {
        if k.input_modes() != 1 || k.output_modes() != 1 {
            return Err(Error::Unsupported("transfer kernels are single-mode".into()));
        }
        let d = k.dim().size();
        let sparse = k
            .operators()
            .iter()
            .map(|e| {
                let nz: Vec<(usize, usize, C64)> = (0..d)
                    .flat_map(|j| (0..d).map(move |i| (i, j)))
                    .filter(|&(i, j)| e[(i, j)].norm() != 0.0)
                    .map(|(i, j)| (i, j, e[(i, j)]))
                    .collect();
                (nz.len() <= 2 * d).then_some(nz)
            })
            .collect();
        Ok(KrausKernelEval { k, sparse })
    }
}

impl PointKernel for KrausKernelEval<'_> {
    fn dim(&self) -> FockDim {
        self.k.dim()
    }

    fn prepare(&self, x: f64, p: f64) -> DMatrix<C64> {
        let c = wigner_basis_matrix(self.k.dim(), x, p).map(|z| z.conj());
        let d = self.k.dim().size();
        let mut g = DMatrix::from_element(d, d, C64::new(0.0, 0.0));
        for (e, sp) in self.k.operators().iter().zip(&self.sparse) {
            match sp {
                Some(nz) => {
                    for &(l, n, a) in nz {
                        for &(k, m, b) in nz {
                            g[(l, k)] += a * c[(n, m)] * b.conj();
                        }
                    }
                }
                None => g += e * &c * e.adjoint(),
            }
        }
        g
    }
}

/// Phase-invariance defect of a Kraus set. Exact zero when every operator
/// shifts photon number by a fixed amount; otherwise measured on the tensor.
pub fn kraus_phase_invariance_defect(k: &KrausSet) -> f64 {
    let shift_only = k.operators().iter().all(|e| {
        let mut offset = None;
        e.iter().enumerate().filter(|(_, z)| z.norm() != 0.0).all(|(idx, _)| {
            let (i, j) = (idx % e.nrows(), idx / e.nrows());
            let o = i as i64 - j as i64;
            *offset.get_or_insert(o) == o
        })
    });
    if shift_only {
        0.0
    } else {
        phase_invariance_defect(&tensor_from_kraus(k))
    }
}

/// Samples `f(r', r, θ)` with `(x, p) = (r, 0)` and `(x', p') = (r' cos θ, r' sin θ)`.
pub fn radial_form(t: &ProcessTensor, grid: &RadialGrid) -> Result<RadialKernel> {
    let defect = phase_invariance_defect(t);
    if defect > 1e-10 {
        return Err(Error::NotPhaseInvariant(defect));
    }
    radial_form_with(&TensorKernelEval::new(t)?, grid)
}

pub fn radial_form_kraus(k: &KrausSet, grid: &RadialGrid) -> Result<RadialKernel> {
    let defect = kraus_phase_invariance_defect(k);
    if defect > 1e-10 {
        return Err(Error::NotPhaseInvariant(defect));
    }
    radial_form_with(&KrausKernelEval::new(k)?, grid)
}

/// Radial sampling for any evaluator; phase invariance is the caller's concern.
pub fn radial_form_with(eval: &impl PointKernel, grid: &RadialGrid) -> Result<RadialKernel> {
    let prepared: Vec<DMatrix<C64>> = grid.r.par_iter().map(|&r| eval.prepare(r, 0.0)).collect();
    let nrp = grid.r_prime.len();
    let nr = grid.r.len();
    let mut values = vec![0.0; grid.theta.len() * nr * nrp];
    values.par_chunks_mut(nrp.max(1)).enumerate().for_each(|(chunk, out)| {
        let it = chunk / nr;
        let ir = chunk % nr;
        let th = grid.theta[it];
        for (irp, rp) in grid.r_prime.iter().enumerate() {
            out[irp] = eval.value_with(&prepared[ir], rp * th.cos(), rp * th.sin());
        }
    });
    Ok(RadialKernel { grid: grid.clone(), values })
}

/// Profile of `f(r', r, θ)` along `d = r' − r ∈ [−w, w]` at fixed `r + r' = sum`,
/// with `w = half_width` clipped to `sum`.
pub fn radial_profile(t: &ProcessTensor, theta: f64, sum: f64, half_width: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let defect = phase_invariance_defect(t);
    if defect > 1e-10 {
        return Err(Error::NotPhaseInvariant(defect));
    }
    radial_profile_with(&TensorKernelEval::new(t)?, theta, sum, half_width, n)
}

pub fn radial_profile_kraus(k: &KrausSet, theta: f64, sum: f64, half_width: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    let defect = kraus_phase_invariance_defect(k);
    if defect > 1e-10 {
        return Err(Error::NotPhaseInvariant(defect));
    }
    radial_profile_with(&KrausKernelEval::new(k)?, theta, sum, half_width, n)
}

pub fn radial_profile_with(eval: &impl PointKernel, theta: f64, sum: f64, half_width: f64, n: usize) -> Result<Vec<(f64, f64)>> {
    if !(sum >= 0.0 && half_width >= 0.0) || n == 0 {
        return Err(Error::Parameter("profile needs sum >= 0, half_width >= 0 and at least one point".into()));
    }
    let w = half_width.min(sum);
    let pts: Vec<f64> = (0..n).map(|i| if n == 1 { 0.0 } else { -w + 2.0 * w * i as f64 / (n - 1) as f64 }).collect();
    Ok(pts
        .par_iter()
        .map(|&diff| {
            let r = 0.5 * (sum - diff);
            let rp = 0.5 * (sum + diff);
            (diff, eval.value(rp * theta.cos(), rp * theta.sin(), r, 0.0))
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Negativity {
    pub min_value: f64,
    pub negative_volume: f64,
}

fn negativity_of(values: impl Iterator<Item = f64>, weights: impl Iterator<Item = f64>) -> Negativity {
    let mut min_value = f64::INFINITY;
    let mut negative_volume = 0.0;
    for (v, w) in values.zip(weights) {
        min_value = min_value.min(v);
        if v < 0.0 {
            negative_volume += w * v;
        }
    }
    Negativity { min_value, negative_volume: -negative_volume }
}

/// Minimum and integrated negative part of a kernel over its grids.
/// `negative_volume` is reported as a non-negative number.
pub fn negativity(f: &TransferKernel) -> Result<Negativity> {
    match f {
        TransferKernel::Grid(g) => {
            let k = g.sample()?;
            let wi = g.in_grid().weights();
            let wo = g.out_grid().weights();
            let (wi, wo) = (&wi, &wo);
            let weights = (0..k.ncols()).flat_map(|i| wo.iter().map(move |w| w * wi[i])).collect::<Vec<_>>();
            Ok(negativity_of(k.iter().cloned(), weights.into_iter()))
        }
        TransferKernel::Sum(terms) if terms.len() == 1 && terms[0].0 > 0.0 => {
            let (c, inner) = &terms[0];
            let n = negativity(inner)?;
            Ok(Negativity { min_value: c * n.min_value, negative_volume: c * n.negative_volume })
        }
        TransferKernel::Sum(terms) => {
            let first = terms.iter().find_map(|(_, k)| match k {
                TransferKernel::Grid(g) => Some((g.in_grid().clone(), g.out_grid().clone())),
                _ => None,
            });
            let (gi, go) = first.ok_or_else(|| Error::Unsupported("negativity needs at least one grid term".into()))?;
            let k = f.sample(&gi, &go)?;
            let g = GridKernel::from_samples(gi, go, k)?;
            negativity(&TransferKernel::Grid(g))
        }
        TransferKernel::Gaussian(g) => Ok(Negativity { min_value: g.weight.min(0.0), negative_volume: 0.0 }),
        TransferKernel::AffineDelta(_) => Ok(Negativity { min_value: 0.0, negative_volume: 0.0 }),
    }
}

pub fn radial_negativity(k: &RadialKernel) -> Negativity {
    negativity_of(k.values.iter().cloned(), k.weights().into_iter())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{coherent_state, vacuum, wigner_of, FockDim};
    use crate::map::{apply, ProcessTensor};
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_delta_is_exact() {
        let g = QuadratureGrid::square(-3.0, 3.0, 41).unwrap();
        let w = wigner_of(&coherent_state(C64::new(0.3, 0.2), FockDim::new(10).unwrap()), &g);
        let out = apply_kernel(&TransferKernel::identity(), &w).unwrap();
        assert!(out.max_abs_diff(&w) < 1e-15);
    }

    #[test]
    fn deltas_are_never_sampled() {
        let g = QuadratureGrid::square(-1.0, 1.0, 3).unwrap();
        assert!(TransferKernel::identity().sample(&g, &g).is_err());
        assert!(TransferKernel::identity().value(0.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn zero_tensor_gives_zero_kernel() {
        let d = FockDim::new(4).unwrap();
        let g = QuadratureGrid::square(-2.0, 2.0, 9).unwrap();
        let k = kernel_from_tensor(&ProcessTensor::zero(d, 1, 1), &g, &g).unwrap();
        assert!(k.sample().unwrap().iter().all(|v| *v == 0.0));
        assert_eq!(kernel_norm(&TransferKernel::Grid(k)).unwrap(), 0.0);
    }

    #[test]
    fn coarse_grid_warns() {
        let d = FockDim::new(2).unwrap();
        let g = QuadratureGrid::square(-2.0, 2.0, 5).unwrap();
        let k = kernel_from_tensor(&ProcessTensor::identity(d, 1), &g, &g).unwrap();
        assert_eq!(k.diagnostics().len(), 2);
    }

    #[test]
    fn multi_mode_tensor_rejected() {
        let d = FockDim::new(1).unwrap();
        let g = QuadratureGrid::square(-2.0, 2.0, 9).unwrap();
        assert!(kernel_from_tensor(&ProcessTensor::identity(d, 2), &g, &g).is_err());
    }

    #[test]
    fn gaussian_closed_form_normalized() {
        let k = GaussianKernel::diagonal(0.8, 0.6, 0.8, 0.6).unwrap();
        let g = QuadratureGrid::square(-6.0, 6.0, 241).unwrap();
        let kern = TransferKernel::Gaussian(k);
        let s = kern.sample(&QuadratureGrid::square(-0.5, 0.5, 3).unwrap(), &g).unwrap();
        let w = g.weights();
        for i in 0..s.ncols() {
            let tot: f64 = (0..s.nrows()).map(|j| w[j] * s[(j, i)]).sum();
            assert_abs_diff_eq!(tot, 1.0, epsilon = 1e-10);
        }
        assert!(matches!(GaussianKernel::diagonal(1.0, 0.0, 1.0, 0.1), Err(Error::DegenerateChannel(_))));
    }

    #[test]
    fn tensor_grid_apply_matches_tensor_route() {
        let d = FockDim::new(6).unwrap();
        let g = QuadratureGrid::square(-6.0, 6.0, 97).unwrap();
        let rho = coherent_state(C64::new(0.4, -0.2), d);
        let t = ProcessTensor::identity(d, 1);
        let k = kernel_from_tensor(&t, &g, &g).unwrap();
        let out = apply_kernel(&TransferKernel::Grid(k), &wigner_of(&rho, &g)).unwrap();
        let expect = wigner_of(&apply(&t, &rho).unwrap(), &g);
        assert!(out.max_abs_diff(&expect) < 1e-8);
        let _ = vacuum(d);
    }
}
