//! Python bindings: build a model from its JSON description, inspect its
//! tensor, apply it to a state and sample its radial kernel.

use cvmaps::config::{ModelSpec, StateSpec};
use cvmaps::{figures, map, verify as checks, Error, FockDim, ProcessTensor};
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter(_) | Error::Validation(_) | Error::Cutoff { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

#[pyclass(module = "cvmaps_py", frozen)]
struct Model {
    spec: ModelSpec,
    tensor: ProcessTensor,
}

#[pymethods]
impl Model {
    /// Builds a model from a JSON object such as `{"model": "amplifier", "R": 0.2}`.
    #[new]
    fn new(config: &str) -> PyResult<Self> {
        let spec = ModelSpec::from_json(config).map_err(py_err)?;
        let tensor = spec.build().map_err(py_err)?;
        Ok(Model { spec, tensor })
    }

    #[getter]
    fn n_max(&self) -> usize {
        self.tensor.dim().n_max()
    }

    /// `diagonal()[m][k]` is the probability of `|m⟩ → |k⟩`.
    fn diagonal(&self) -> Vec<Vec<f64>> {
        self.tensor.diagonal()
    }

    fn element(&self, n: usize, m: usize, l: usize, k: usize) -> PyResult<Complex64> {
        let d = self.tensor.dim().size();
        if [n, m, l, k].iter().any(|&i| i >= d) {
            return Err(PyValueError::new_err(format!("index out of range for dimension {d}")));
        }
        Ok(self.tensor.get(n, m, l, k))
    }

    fn is_physical(&self) -> bool {
        map::is_cp(&self.tensor, 1e-10) && map::is_trace_nonincreasing(&self.tensor, 1e-10)
    }

    fn phase_invariance_defect(&self) -> f64 {
        map::phase_invariance_defect(&self.tensor)
    }

    /// Applies the map to a state given as JSON, e.g. `{"kind": "coherent", "alpha": [0.3, 0]}`.
    /// Returns the unnormalized output density matrix and its trace.
    fn apply(&self, state: &str) -> PyResult<(Vec<Vec<Complex64>>, f64)> {
        let spec: StateSpec = serde_json::from_str(state).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let rho = spec.build(self.tensor.dim()).map_err(py_err)?;
        let out = map::apply(&self.tensor, &rho).map_err(py_err)?;
        let m = out.matrix();
        let rows = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
        Ok((rows, out.trace()))
    }

    /// Radial kernel on a square `r`, `r'` grid, indexed `[theta][r][r']`.
    #[pyo3(signature = (theta, r_min, r_max, n))]
    fn radial_kernel(&self, theta: Vec<f64>, r_min: f64, r_max: f64, n: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
        if n < 2 || !(0.0..r_max).contains(&r_min) {
            return Err(PyValueError::new_err("need 0 <= r_min < r_max and n >= 2"));
        }
        let grid = figures::radial_grid(&theta, r_min, r_max, n);
        let k = figures::model_radial(&self.spec, &grid).map_err(py_err)?;
        Ok((0..theta.len()).map(|it| (0..n).map(|ir| (0..n).map(|irp| k.get(it, ir, irp)).collect()).collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Model({})", serde_json::to_string(&self.spec).unwrap_or_default())
    }
}

/// Runs the listed acceptance criteria; each result is
/// `(criterion, passed, known_limitation, measured, tolerance, detail)`.
#[pyfunction]
#[pyo3(signature = (criteria=None))]
fn verify(py: Python<'_>, criteria: Option<Vec<u8>>) -> Vec<(u8, bool, bool, f64, f64, String)> {
    let list = criteria.unwrap_or_else(|| checks::CRITERIA.iter().map(|(c, _)| *c).collect());
    py.allow_threads(|| {
        list.iter()
            .map(|&c| {
                let r = checks::run_criterion(c, &checks::Options::default());
                (r.criterion, r.passed, r.known_limitation, r.measured, r.tolerance, r.detail)
            })
            .collect()
    })
}

#[pyfunction]
fn wigner_basis(n: usize, m: usize, x: f64, p: f64) -> PyResult<Complex64> {
    let dim = FockDim::new(n.max(m).max(1)).map_err(py_err)?;
    cvmaps::wigner_basis(n, m, x, p, dim).map_err(py_err)
}

#[pymodule]
fn cvmaps_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(wigner_basis, m)?)?;
    Ok(())
}
