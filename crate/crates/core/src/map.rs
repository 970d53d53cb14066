//! Quantum maps on truncated multi-mode Fock spaces.
//!
//! Two representations are kept side by side. [`KrausSet`] holds operators
//! `E_i : H_in → H_out` and scales to several modes because operators act on
//! state vectors. [`ProcessTensor`] holds the dense tensor `E^{n,m}_{l,k}` with
//! `[E(ρ)]_{l,k} = Σ E^{n,m}_{l,k} ρ_{n,m}`; it is the object that gets
//! inspected, serialized and turned into transfer kernels.
//!
//! Multi-mode indices are flattened row-major with mode 0 most significant.
//! The tensor is stored as a matrix with rows `l·D_out + k` and columns
//! `n·D_in + m`, so composition is a matrix product.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fock::{hermitian_eigen, DensityOperator, FockDim, C64, ONE, ZERO};

pub const DEFAULT_TOL: f64 = 1e-9;

/// Inserts `digit` at mode position `pos` of a flattened index over
/// `modes_after - 1` modes.
fn insert_digit(idx: usize, pos: usize, digit: usize, modes_after: usize, d: usize) -> usize {
    let low_span = d.pow((modes_after - 1 - pos) as u32);
    let high = idx / low_span;
    let low = idx % low_span;
    (high * d + digit) * low_span + low
}

fn digit_sum(mut idx: usize, modes: usize, d: usize) -> usize {
    let mut s = 0;
    for _ in 0..modes {
        s += idx % d;
        idx /= d;
    }
    s
}

/// Applies a local operator on the listed modes of a multi-mode vector.
/// `modes[0]` is the most significant digit of `op`'s index.
pub(crate) fn apply_local(v: &DVector<C64>, op: &DMatrix<C64>, modes: &[usize], total: usize, d: usize) -> DVector<C64> {
    let k = modes.len();
    let sub = d.pow(k as u32);
    debug_assert_eq!(op.nrows(), sub);
    let strides: Vec<usize> = (0..total).map(|m| d.pow((total - 1 - m) as u32)).collect();
    let others: Vec<usize> = (0..total).filter(|m| !modes.contains(m)).collect();
    let n_other = d.pow(others.len() as u32);
    let local_offsets: Vec<usize> = (0..sub)
        .map(|s| {
            let mut rem = s;
            let mut off = 0;
            for j in (0..k).rev() {
                off += (rem % d) * strides[modes[j]];
                rem /= d;
            }
            off
        })
        .collect();
    let mut out = DVector::from_element(v.len(), ZERO);
    let mut buf = vec![ZERO; sub];
    for o in 0..n_other {
        let mut rem = o;
        let mut base = 0;
        for j in (0..others.len()).rev() {
            base += (rem % d) * strides[others[j]];
            rem /= d;
        }
        let mut any = false;
        for s in 0..sub {
            buf[s] = v[base + local_offsets[s]];
            any |= buf[s] != ZERO;
        }
        if !any {
            continue;
        }
        for r in 0..sub {
            let mut acc = ZERO;
            for s in 0..sub {
                let e = op[(r, s)];
                if e != ZERO {
                    acc += e * buf[s];
                }
            }
            out[base + local_offsets[r]] = acc;
        }
    }
    out
}

/// Splits a positive operator into weighted rank-one terms `w_j |φ_j⟩⟨φ_j|`,
/// dropping zero weights. Diagonal inputs keep the Fock basis.
fn rank_one_terms(m: &DMatrix<C64>) -> Vec<(f64, DVector<C64>)> {
    let d = m.nrows();
    let diagonal = (0..d).all(|i| (0..d).all(|j| i == j || m[(i, j)] == ZERO));
    if diagonal {
        return (0..d)
            .filter(|&i| m[(i, i)].re > 0.0)
            .map(|i| {
                let mut v = DVector::from_element(d, ZERO);
                v[i] = ONE;
                (m[(i, i)].re, v)
            })
            .collect();
    }
    let (vals, vecs) = hermitian_eigen(m);
    vals.iter()
        .enumerate()
        .filter(|(_, &w)| w > 1e-15)
        .map(|(j, &w)| (w, vecs.column(j).into_owned()))
        .collect()
}

fn check_povm(povm: &DMatrix<C64>, d: usize) -> Result<()> {
    if povm.nrows() != d || povm.ncols() != d {
        return Err(Error::DimensionMismatch(format!("POVM element must be {d}x{d}")));
    }
    let (vals, _) = hermitian_eigen(povm);
    let h = (povm - povm.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if h > 1e-12 || vals.iter().any(|&v| v < -1e-10) {
        return Err(Error::Validation("POVM element is not positive semidefinite".into()));
    }
    if vals.iter().any(|&v| v > 1.0 + 1e-10) {
        return Err(Error::Validation("POVM element exceeds the identity".into()));
    }
    Ok(())
}

/// Operator-sum representation `E(ρ) = Σ E_i ρ E_i†`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausSet {
    dim: FockDim,
    input_modes: usize,
    output_modes: usize,
    operators: Vec<DMatrix<C64>>,
}

impl KrausSet {
    pub fn new(dim: FockDim, input_modes: usize, output_modes: usize, operators: Vec<DMatrix<C64>>) -> Result<Self> {
        if operators.is_empty() {
            return Err(Error::EmptyKraus);
        }
        let (r, c) = (dim.space(output_modes), dim.space(input_modes));
        if let Some(bad) = operators.iter().find(|e| e.nrows() != r || e.ncols() != c) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator is {}x{}, expected {r}x{c}",
                bad.nrows(),
                bad.ncols()
            )));
        }
        Ok(KrausSet { dim, input_modes, output_modes, operators })
    }

    pub fn single(dim: FockDim, op: DMatrix<C64>) -> Result<Self> {
        Self::new(dim, 1, 1, vec![op])
    }

    pub fn identity(dim: FockDim, modes: usize) -> Self {
        let n = dim.space(modes);
        KrausSet { dim, input_modes: modes, output_modes: modes, operators: vec![DMatrix::identity(n, n)] }
    }

    /// State preparation with no input modes.
    pub fn preparation(state: &DensityOperator) -> Self {
        let ops = rank_one_terms(state.matrix())
            .into_iter()
            .map(|(w, v)| DMatrix::from_column_slice(v.len(), 1, (v * C64::from(w.sqrt())).as_slice()))
            .collect::<Vec<_>>();
        let ops = if ops.is_empty() { vec![DMatrix::from_element(state.matrix().nrows(), 1, ZERO)] } else { ops };
        KrausSet { dim: state.dim(), input_modes: 0, output_modes: state.modes(), operators: ops }
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn input_modes(&self) -> usize {
        self.input_modes
    }

    pub fn output_modes(&self) -> usize {
        self.output_modes
    }

    pub fn operators(&self) -> &[DMatrix<C64>] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn apply(&self, rho: &DensityOperator) -> Result<DensityOperator> {
        if rho.dim() != self.dim || rho.modes() != self.input_modes {
            return Err(Error::DimensionMismatch("state does not match map input".into()));
        }
        let n = self.dim.space(self.output_modes);
        let mut out = DMatrix::from_element(n, n, ZERO);
        for e in &self.operators {
            out += e * rho.matrix() * e.adjoint();
        }
        DensityOperator::from_matrix(self.dim, self.output_modes, out)
    }

    /// `Σ E_i† E_i`.
    pub fn effect(&self) -> DMatrix<C64> {
        let n = self.dim.space(self.input_modes);
        self.operators.iter().fold(DMatrix::from_element(n, n, ZERO), |acc, e| acc + e.adjoint() * e)
    }

    pub fn is_trace_nonincreasing(&self, tol: f64) -> bool {
        hermitian_eigen(&self.effect()).0.iter().all(|&v| v <= 1.0 + tol)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        if c < 0.0 {
            return Err(Error::Parameter("Kraus weights must be non-negative".into()));
        }
        let s = C64::from(c.sqrt());
        Ok(KrausSet { operators: self.operators.iter().map(|e| e * s).collect(), ..self.clone() })
    }

    /// Kraus operators of `next ∘ self`.
    pub fn then(&self, next: &KrausSet) -> Result<Self> {
        if next.dim != self.dim || next.input_modes != self.output_modes {
            return Err(Error::DimensionMismatch("serial composition needs matching modes".into()));
        }
        let ops = next.operators.iter().flat_map(|b| self.operators.iter().map(move |a| b * a)).collect();
        Ok(KrausSet { dim: self.dim, input_modes: self.input_modes, output_modes: next.output_modes, operators: ops })
    }

    /// `self ⊗ other`, with `self` on the leading modes.
    pub fn parallel(&self, other: &KrausSet) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch("parallel maps use different cutoffs".into()));
        }
        let ops = self.operators.iter().flat_map(|a| other.operators.iter().map(move |b| a.kronecker(b))).collect();
        Ok(KrausSet {
            dim: self.dim,
            input_modes: self.input_modes + other.input_modes,
            output_modes: self.output_modes + other.output_modes,
            operators: ops,
        })
    }

    /// Follows the map with a unitary (or any operator) acting on some output modes.
    pub fn then_local(&self, op: &DMatrix<C64>, modes: &[usize]) -> Result<Self> {
        let d = self.dim.size();
        let sub = d.pow(modes.len() as u32);
        if op.nrows() != sub || op.ncols() != sub {
            return Err(Error::DimensionMismatch(format!("local operator must be {sub}x{sub}")));
        }
        if let Some(&m) = modes.iter().find(|&&m| m >= self.output_modes) {
            return Err(Error::ModeIndex { mode: m, modes: self.output_modes });
        }
        let total = self.output_modes;
        let ops = self
            .operators
            .iter()
            .map(|e| {
                let mut out = DMatrix::from_element(e.nrows(), e.ncols(), ZERO);
                for c in 0..e.ncols() {
                    let col = e.column(c).into_owned();
                    out.set_column(c, &apply_local(&col, op, modes, total, d));
                }
                out
            })
            .collect();
        Ok(KrausSet { operators: ops, ..self.clone() })
    }

    /// Feeds a single-mode state into input `mode`.
    pub fn inject_ancilla(&self, mode: usize, state: &DensityOperator) -> Result<Self> {
        if mode >= self.input_modes {
            return Err(Error::ModeIndex { mode, modes: self.input_modes });
        }
        if state.modes() != 1 || state.dim() != self.dim {
            return Err(Error::DimensionMismatch("ancilla must be a single-mode state of the same cutoff".into()));
        }
        let d = self.dim.size();
        let new_in = self.input_modes - 1;
        let n_cols = self.dim.space(new_in);
        let terms = rank_one_terms(state.matrix());
        let mut ops = Vec::with_capacity(self.operators.len() * terms.len());
        for e in &self.operators {
            for (w, v) in &terms {
                let s = w.sqrt();
                let mut out = DMatrix::from_element(e.nrows(), n_cols, ZERO);
                for c in 0..n_cols {
                    for a in 0..d {
                        if v[a] == ZERO {
                            continue;
                        }
                        let src = insert_digit(c, mode, a, self.input_modes, d);
                        let col = e.column(src) * (v[a] * s);
                        let mut dst = out.column_mut(c);
                        dst += col;
                    }
                }
                ops.push(out);
            }
        }
        Ok(KrausSet { dim: self.dim, input_modes: new_in, output_modes: self.output_modes, operators: prune(ops, e_shape(self.dim, self.output_modes, new_in)) })
    }

    /// Conditions output `mode` on a POVM element.
    pub fn project_mode(&self, mode: usize, povm: &DMatrix<C64>) -> Result<Self> {
        check_povm(povm, self.dim.size())?;
        self.project_unchecked(mode, povm)
    }

    fn project_unchecked(&self, mode: usize, povm: &DMatrix<C64>) -> Result<Self> {
        if mode >= self.output_modes {
            return Err(Error::ModeIndex { mode, modes: self.output_modes });
        }
        let d = self.dim.size();
        let new_out = self.output_modes - 1;
        let n_rows = self.dim.space(new_out);
        let terms = rank_one_terms(povm);
        let mut ops = Vec::with_capacity(self.operators.len() * terms.len());
        for e in &self.operators {
            for (w, v) in &terms {
                let s = w.sqrt();
                let mut out = DMatrix::from_element(n_rows, e.ncols(), ZERO);
                for r in 0..n_rows {
                    for a in 0..d {
                        if v[a] == ZERO {
                            continue;
                        }
                        let src = insert_digit(r, mode, a, self.output_modes, d);
                        let row = e.row(src) * (v[a].conj() * s);
                        let mut dst = out.row_mut(r);
                        dst += row;
                    }
                }
                ops.push(out);
            }
        }
        Ok(KrausSet { dim: self.dim, input_modes: self.input_modes, output_modes: new_out, operators: prune(ops, e_shape(self.dim, new_out, self.input_modes)) })
    }

    pub fn trace_out(&self, mode: usize) -> Result<Self> {
        let d = self.dim.size();
        self.project_unchecked(mode, &DMatrix::identity(d, d))
    }

    pub fn to_tensor(&self) -> ProcessTensor {
        tensor_from_kraus(self)
    }
}

fn e_shape(dim: FockDim, out_modes: usize, in_modes: usize) -> (usize, usize) {
    (dim.space(out_modes), dim.space(in_modes))
}

fn prune(ops: Vec<DMatrix<C64>>, shape: (usize, usize)) -> Vec<DMatrix<C64>> {
    let kept: Vec<_> = ops.into_iter().filter(|e| e.iter().any(|z| *z != ZERO)).collect();
    if kept.is_empty() {
        vec![DMatrix::from_element(shape.0, shape.1, ZERO)]
    } else {
        kept
    }
}

/// Dense process tensor `E^{n,m}_{l,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProcessTensor {
    dim: FockDim,
    input_modes: usize,
    output_modes: usize,
    superop: DMatrix<C64>,
}

/// Choi matrix `C_{(l,n),(k,m)} = E^{n,m}_{l,k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChoiMatrix(pub DMatrix<C64>);

impl ChoiMatrix {
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.0).0
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl ProcessTensor {
    /// Wraps a superoperator matrix of shape `(D_out², D_in²)`.
    pub fn from_superoperator(dim: FockDim, input_modes: usize, output_modes: usize, superop: DMatrix<C64>) -> Result<Self> {
        let (r, c) = (dim.space(output_modes).pow(2), dim.space(input_modes).pow(2));
        if superop.nrows() != r || superop.ncols() != c {
            return Err(Error::DimensionMismatch(format!(
                "tensor matrix is {}x{}, expected {r}x{c}",
                superop.nrows(),
                superop.ncols()
            )));
        }
        Ok(ProcessTensor { dim, input_modes, output_modes, superop })
    }

    /// Builds a tensor from an element function `f(n, m, l, k)` over flattened indices.
    pub fn from_fn(dim: FockDim, input_modes: usize, output_modes: usize, f: impl Fn(usize, usize, usize, usize) -> C64) -> Self {
        let din = dim.space(input_modes);
        let dout = dim.space(output_modes);
        let superop = DMatrix::from_fn(dout * dout, din * din, |row, col| f(col / din, col % din, row / dout, row % dout));
        ProcessTensor { dim, input_modes, output_modes, superop }
    }

    pub fn identity(dim: FockDim, modes: usize) -> Self {
        let n = dim.space(modes).pow(2);
        ProcessTensor { dim, input_modes: modes, output_modes: modes, superop: DMatrix::identity(n, n) }
    }

    pub fn zero(dim: FockDim, input_modes: usize, output_modes: usize) -> Self {
        let (r, c) = (dim.space(output_modes).pow(2), dim.space(input_modes).pow(2));
        ProcessTensor { dim, input_modes, output_modes, superop: DMatrix::from_element(r, c, ZERO) }
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn input_modes(&self) -> usize {
        self.input_modes
    }

    pub fn output_modes(&self) -> usize {
        self.output_modes
    }

    pub fn input_size(&self) -> usize {
        self.dim.space(self.input_modes)
    }

    pub fn output_size(&self) -> usize {
        self.dim.space(self.output_modes)
    }

    pub fn superoperator(&self) -> &DMatrix<C64> {
        &self.superop
    }

    /// Element `E^{n,m}_{l,k}` with flattened multi-mode indices.
    pub fn get(&self, n: usize, m: usize, l: usize, k: usize) -> C64 {
        let (din, dout) = (self.input_size(), self.output_size());
        self.superop[(l * dout + k, n * din + m)]
    }

    /// Diagonal slice `F^{m,m}_{k,k}` as `[m][k]`.
    pub fn diagonal(&self) -> Vec<Vec<f64>> {
        (0..self.input_size()).map(|m| (0..self.output_size()).map(|k| self.get(m, m, k, k).re).collect()).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        ProcessTensor { superop: &self.superop * C64::from(c), ..self.clone() }
    }

    pub fn max_abs_diff(&self, other: &ProcessTensor) -> f64 {
        (&self.superop - &other.superop).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn same_shape(&self, other: &ProcessTensor) -> Result<()> {
        if self.dim != other.dim || self.input_modes != other.input_modes || self.output_modes != other.output_modes {
            return Err(Error::DimensionMismatch("process tensors have different shapes".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &ProcessTensor) -> Result<Self> {
        self.same_shape(other)?;
        Ok(ProcessTensor { superop: &self.superop + &other.superop, ..self.clone() })
    }

    /// `max |E^{n,m}_{l,k} - conj(E^{m,n}_{k,l})|`.
    pub fn hermiticity_defect(&self) -> f64 {
        let (din, dout) = (self.input_size(), self.output_size());
        let mut worst: f64 = 0.0;
        for row in 0..dout * dout {
            let (l, k) = (row / dout, row % dout);
            for col in 0..din * din {
                let (n, m) = (col / din, col % din);
                let a = self.superop[(row, col)];
                let b = self.superop[(k * dout + l, m * din + n)];
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }
}

/// `E^{n,m}_{l,k} = Σ_i ⟨l|E_i|n⟩⟨m|E_i†|k⟩`.
pub fn tensor_from_kraus(k: &KrausSet) -> ProcessTensor {
    let din = k.dim.space(k.input_modes);
    let dout = k.dim.space(k.output_modes);
    let mut s = DMatrix::from_element(dout * dout, din * din, ZERO);
    for e in &k.operators {
        let ec = e.map(|z| z.conj());
        s += e.kronecker(&ec);
    }
    ProcessTensor { dim: k.dim, input_modes: k.input_modes, output_modes: k.output_modes, superop: s }
}

/// `[E(ρ)]_{l,k} = Σ E^{n,m}_{l,k} ρ_{n,m}`; heralded outputs stay sub-normalized.
pub fn apply(t: &ProcessTensor, rho: &DensityOperator) -> Result<DensityOperator> {
    if rho.dim() != t.dim || rho.modes() != t.input_modes {
        return Err(Error::DimensionMismatch(format!(
            "state has {} mode(s), tensor expects {}",
            rho.modes(),
            t.input_modes
        )));
    }
    let din = t.input_size();
    let dout = t.output_size();
    let v = DVector::from_iterator(din * din, (0..din * din).map(|i| rho.get(i / din, i % din)));
    let w = &t.superop * v;
    let out = DMatrix::from_fn(dout, dout, |l, k| w[l * dout + k]);
    DensityOperator::from_matrix(t.dim, t.output_modes, out)
}

/// Trace of the output: the herald success probability.
pub fn success_probability(t: &ProcessTensor, rho: &DensityOperator) -> Result<f64> {
    Ok(apply(t, rho)?.trace())
}

/// `second ∘ first`.
pub fn compose_serial(second: &ProcessTensor, first: &ProcessTensor) -> Result<ProcessTensor> {
    if second.dim != first.dim || second.input_modes != first.output_modes {
        return Err(Error::DimensionMismatch(format!(
            "first map has {} output mode(s), second expects {}",
            first.output_modes, second.input_modes
        )));
    }
    Ok(ProcessTensor {
        dim: first.dim,
        input_modes: first.input_modes,
        output_modes: second.output_modes,
        superop: &second.superop * &first.superop,
    })
}

/// `a ⊗ b`, with `a` on the leading modes.
pub fn tensor_parallel(a: &ProcessTensor, b: &ProcessTensor) -> Result<ProcessTensor> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch("parallel maps use different cutoffs".into()));
    }
    let (ai, ao, bi, bo) = (a.input_size(), a.output_size(), b.input_size(), b.output_size());
    let (din, dout) = (ai * bi, ao * bo);
    let mut s = DMatrix::from_element(dout * dout, din * din, ZERO);
    for arow in 0..ao * ao {
        let (la, ka) = (arow / ao, arow % ao);
        for acol in 0..ai * ai {
            let av = a.superop[(arow, acol)];
            if av == ZERO {
                continue;
            }
            let (na, ma) = (acol / ai, acol % ai);
            for brow in 0..bo * bo {
                let (lb, kb) = (brow / bo, brow % bo);
                let row = (la * bo + lb) * dout + ka * bo + kb;
                for bcol in 0..bi * bi {
                    let bv = b.superop[(brow, bcol)];
                    if bv == ZERO {
                        continue;
                    }
                    let (nb, mb) = (bcol / bi, bcol % bi);
                    s[(row, (na * bi + nb) * din + ma * bi + mb)] = av * bv;
                }
            }
        }
    }
    Ok(ProcessTensor { dim: a.dim, input_modes: a.input_modes + b.input_modes, output_modes: a.output_modes + b.output_modes, superop: s })
}

/// Contracts input `mode` against an ancilla state.
pub fn inject_ancilla(t: &ProcessTensor, mode: usize, state: &DensityOperator) -> Result<ProcessTensor> {
    if mode >= t.input_modes {
        return Err(Error::ModeIndex { mode, modes: t.input_modes });
    }
    if state.modes() != 1 || state.dim() != t.dim {
        return Err(Error::DimensionMismatch("ancilla must be a single-mode state of the same cutoff".into()));
    }
    let d = t.dim.size();
    let din = t.input_size();
    let new_in = t.input_modes - 1;
    let nd = t.dim.space(new_in);
    let dout2 = t.output_size().pow(2);
    let mut s = DMatrix::from_element(dout2, nd * nd, ZERO);
    for n in 0..nd {
        for m in 0..nd {
            let col = n * nd + m;
            for a in 0..d {
                let na = insert_digit(n, mode, a, t.input_modes, d);
                for b in 0..d {
                    let sab = state.get(a, b);
                    if sab == ZERO {
                        continue;
                    }
                    let mb = insert_digit(m, mode, b, t.input_modes, d);
                    let src = t.superop.column(na * din + mb) * sab;
                    let mut dst = s.column_mut(col);
                    dst += src;
                }
            }
        }
    }
    Ok(ProcessTensor { dim: t.dim, input_modes: new_in, output_modes: t.output_modes, superop: s })
}

fn project_tensor(t: &ProcessTensor, mode: usize, povm: &DMatrix<C64>) -> Result<ProcessTensor> {
    if mode >= t.output_modes {
        return Err(Error::ModeIndex { mode, modes: t.output_modes });
    }
    let d = t.dim.size();
    let dout = t.output_size();
    let new_out = t.output_modes - 1;
    let nd = t.dim.space(new_out);
    let din2 = t.input_size().pow(2);
    let mut s = DMatrix::from_element(nd * nd, din2, ZERO);
    for l in 0..nd {
        for k in 0..nd {
            let row = l * nd + k;
            for a in 0..d {
                let la = insert_digit(l, mode, a, t.output_modes, d);
                for b in 0..d {
                    // Tr(Π σ) = Σ Π_{b,a} σ_{a,b}
                    let w = povm[(b, a)];
                    if w == ZERO {
                        continue;
                    }
                    let kb = insert_digit(k, mode, b, t.output_modes, d);
                    let src = t.superop.row(la * dout + kb) * w;
                    let mut dst = s.row_mut(row);
                    dst += src;
                }
            }
        }
    }
    Ok(ProcessTensor { dim: t.dim, input_modes: t.input_modes, output_modes: new_out, superop: s })
}

/// Conditions output `mode` on a POVM element (PSD, at most the identity).
pub fn project_mode(t: &ProcessTensor, mode: usize, povm_element: &DMatrix<C64>) -> Result<ProcessTensor> {
    check_povm(povm_element, t.dim.size())?;
    project_tensor(t, mode, povm_element)
}

pub fn trace_out(t: &ProcessTensor, mode: usize) -> Result<ProcessTensor> {
    let d = t.dim.size();
    project_tensor(t, mode, &DMatrix::identity(d, d))
}

pub fn choi(t: &ProcessTensor) -> ChoiMatrix {
    let (din, dout) = (t.input_size(), t.output_size());
    let n = din * dout;
    ChoiMatrix(DMatrix::from_fn(n, n, |r, c| {
        let (l, nn) = (r / din, r % din);
        let (k, m) = (c / din, c % din);
        t.superop[(l * dout + k, nn * din + m)]
    }))
}

pub fn is_cp(t: &ProcessTensor, tol: f64) -> bool {
    let c = choi(t);
    c.hermiticity_defect() <= 1e-10_f64.max(tol) && c.eigenvalues().iter().all(|&v| v >= -tol)
}

/// `S_{n,m} = Σ_l E^{n,m}_{l,l}`, which equals `(Σ E_i†E_i)ᵀ`.
pub fn effect_matrix(t: &ProcessTensor) -> DMatrix<C64> {
    let (din, dout) = (t.input_size(), t.output_size());
    DMatrix::from_fn(din, din, |n, m| (0..dout).map(|l| t.superop[(l * dout + l, n * din + m)]).sum())
}

pub fn is_trace_nonincreasing(t: &ProcessTensor, tol: f64) -> bool {
    hermitian_eigen(&effect_matrix(t)).0.iter().all(|&v| v <= 1.0 + tol)
}

/// `F = F₁ + F₂`; each branch already carries its own occurrence probability.
pub fn combine_heralding(f1: &ProcessTensor, f2: &ProcessTensor) -> Result<ProcessTensor> {
    f1.add(f2)
}

/// Largest element violating the total-photon selection rule `|l| - |k| = |n| - |m|`.
pub fn phase_invariance_defect(t: &ProcessTensor) -> f64 {
    let (din, dout, d) = (t.input_size(), t.output_size(), t.dim.size());
    let mut worst: f64 = 0.0;
    for row in 0..dout * dout {
        let l = digit_sum(row / dout, t.output_modes, d) as isize;
        let k = digit_sum(row % dout, t.output_modes, d) as isize;
        for col in 0..din * din {
            let n = digit_sum(col / din, t.input_modes, d) as isize;
            let m = digit_sum(col % din, t.input_modes, d) as isize;
            if l - k != n - m {
                worst = worst.max(t.superop[(row, col)].norm());
            }
        }
    }
    worst
}
