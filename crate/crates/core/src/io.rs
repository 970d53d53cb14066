//! Serialization: process tensors and density operators as JSON, CSV tables,
//! and 4D kernels as chunked little-endian binary with a JSON header.
//!
//! Tensor record layout: `elements` is a flat list of `[re, im]` pairs in
//! row-major `(n, m, l, k)` order, where each index is itself the row-major
//! multi-mode index (mode 0 most significant).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fock::{DensityOperator, FockDim, QuadratureGrid, C64};
use crate::map::ProcessTensor;
use crate::transfer::GridKernel;

pub const TENSOR_FORMAT: &str = "cvmaps.process_tensor.v1";
pub const DENSITY_FORMAT: &str = "cvmaps.density_operator.v1";
pub const KERNEL_FORMAT: &str = "cvmaps.grid_kernel.v1";

/// Shortest decimal that round-trips to the same `f64`; never platform dependent.
pub fn fmt_f64(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TensorRecord {
    pub format: String,
    pub n_max: usize,
    pub input_modes: usize,
    pub output_modes: usize,
    pub ordering: String,
    pub elements: Vec<[f64; 2]>,
}

impl TensorRecord {
    pub fn from_tensor(t: &ProcessTensor) -> Self {
        let (din, dout) = (t.input_size(), t.output_size());
        let mut elements = Vec::with_capacity(din * din * dout * dout);
        for n in 0..din {
            for m in 0..din {
                for l in 0..dout {
                    for k in 0..dout {
                        let z = t.get(n, m, l, k);
                        elements.push([z.re, z.im]);
                    }
                }
            }
        }
        TensorRecord {
            format: TENSOR_FORMAT.into(),
            n_max: t.dim().n_max(),
            input_modes: t.input_modes(),
            output_modes: t.output_modes(),
            ordering: "n,m,l,k row-major; complex as [re, im]".into(),
            elements,
        }
    }

    pub fn to_tensor(&self) -> Result<ProcessTensor> {
        if self.format != TENSOR_FORMAT {
            return Err(Error::Validation(format!("unknown tensor format `{}`", self.format)));
        }
        let dim = FockDim::new(self.n_max)?;
        let din = dim.space(self.input_modes);
        let dout = dim.space(self.output_modes);
        if self.elements.len() != din * din * dout * dout {
            return Err(Error::DimensionMismatch(format!(
                "expected {} tensor elements, found {}",
                din * din * dout * dout,
                self.elements.len()
            )));
        }
        let at = |n: usize, m: usize, l: usize, k: usize| {
            let e = self.elements[((n * din + m) * dout + l) * dout + k];
            C64::new(e[0], e[1])
        };
        Ok(ProcessTensor::from_fn(dim, self.input_modes, self.output_modes, at))
    }
}

pub fn tensor_to_json(t: &ProcessTensor) -> Result<String> {
    Ok(serde_json::to_string(&TensorRecord::from_tensor(t))?)
}

pub fn tensor_from_json(s: &str) -> Result<ProcessTensor> {
    serde_json::from_str::<TensorRecord>(s)?.to_tensor()
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DensityRecord {
    pub format: String,
    pub n_max: usize,
    pub modes: usize,
    /// Row-major `[re, im]` pairs.
    pub elements: Vec<[f64; 2]>,
}

impl DensityRecord {
    pub fn from_density(rho: &DensityOperator) -> Self {
        let m = rho.matrix();
        let d = m.nrows();
        let mut elements = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                elements.push([m[(i, j)].re, m[(i, j)].im]);
            }
        }
        DensityRecord { format: DENSITY_FORMAT.into(), n_max: rho.dim().n_max(), modes: rho.modes(), elements }
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        if self.format != DENSITY_FORMAT {
            return Err(Error::Validation(format!("unknown density format `{}`", self.format)));
        }
        let dim = FockDim::new(self.n_max)?;
        let d = dim.space(self.modes);
        if self.elements.len() != d * d {
            return Err(Error::DimensionMismatch(format!("expected {} elements, found {}", d * d, self.elements.len())));
        }
        let m = DMatrix::from_fn(d, d, |i, j| C64::new(self.elements[i * d + j][0], self.elements[i * d + j][1]));
        DensityOperator::from_matrix(dim, self.modes, m)
    }
}

/// CSV with a header row; cells are written verbatim.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// `m,k,value` rows of the tensor diagonal `F^{m,m}_{k,k}`.
pub fn diagonal_csv(t: &ProcessTensor) -> String {
    let diag = t.diagonal();
    let rows: Vec<Vec<String>> = diag
        .iter()
        .enumerate()
        .flat_map(|(m, row)| row.iter().enumerate().map(move |(k, v)| vec![m.to_string(), k.to_string(), fmt_f64(*v)]))
        .collect();
    csv_string(&["m", "k", "value"], &rows)
}

pub fn wigner_csv(field: &crate::fock::WignerField) -> String {
    let g = &field.grid;
    let mut rows = Vec::with_capacity(g.len());
    for i in 0..g.n_x {
        for j in 0..g.n_p {
            rows.push(vec![fmt_f64(g.x(i)), fmt_f64(g.p(j)), fmt_f64(field.at(i, j))]);
        }
    }
    csv_string(&["x", "p", "value"], &rows)
}

#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct KernelHeader {
    pub format: String,
    pub in_grid: QuadratureGrid,
    pub out_grid: QuadratureGrid,
    /// Output points per chunk; every chunk holds `chunk_rows × in_grid.len()` values.
    pub chunk_rows: usize,
    pub chunks: Vec<String>,
    pub ordering: String,
    pub dtype: String,
}

/// Writes `header.json` plus `chunk_XXXX.bin` files into `dir`.
pub fn write_kernel_chunks(kernel: &GridKernel, dir: &Path, chunk_rows: usize) -> Result<KernelHeader> {
    if chunk_rows == 0 {
        return Err(Error::Parameter("chunk_rows must be positive".into()));
    }
    std::fs::create_dir_all(dir)?;
    let values = kernel.sample()?;
    let n_out = values.nrows();
    let mut chunks = Vec::new();
    for (c, start) in (0..n_out).step_by(chunk_rows).enumerate() {
        let name = format!("chunk_{c:04}.bin");
        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join(&name))?);
        for row in start..(start + chunk_rows).min(n_out) {
            for col in 0..values.ncols() {
                f.write_all(&values[(row, col)].to_le_bytes())?;
            }
        }
        f.flush()?;
        chunks.push(name);
    }
    let header = KernelHeader {
        format: KERNEL_FORMAT.into(),
        in_grid: kernel.in_grid().clone(),
        out_grid: kernel.out_grid().clone(),
        chunk_rows,
        chunks,
        ordering: "row = out index i_x'*n_p'+j_p', col = in index i_x*n_p+j_p".into(),
        dtype: "f64le".into(),
    };
    std::fs::write(dir.join("header.json"), serde_json::to_string_pretty(&header)?)?;
    Ok(header)
}

pub fn read_kernel_chunks(dir: &Path) -> Result<GridKernel> {
    let header: KernelHeader = serde_json::from_str(&std::fs::read_to_string(dir.join("header.json"))?)?;
    if header.format != KERNEL_FORMAT || header.dtype != "f64le" {
        return Err(Error::Validation("unsupported kernel header".into()));
    }
    let (n_out, n_in) = (header.out_grid.len(), header.in_grid.len());
    let mut flat = Vec::with_capacity(n_out * n_in);
    for name in &header.chunks {
        let bytes = std::fs::read(dir.join(name))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Validation(format!("chunk {name} is truncated")));
        }
        flat.extend(bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().unwrap())));
    }
    if flat.len() != n_out * n_in {
        return Err(Error::DimensionMismatch(format!("expected {} kernel values, found {}", n_out * n_in, flat.len())));
    }
    GridKernel::from_samples(header.in_grid, header.out_grid, DMatrix::from_row_slice(n_out, n_in, &flat))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::attenuation;
    use crate::fock::coherent_state;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-20, 6.02e23, 2.0f64.sqrt(), f64::MIN_POSITIVE, 0.0, -0.0, 123456.789] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
        assert_eq!(fmt_f64(0.5), "0.5");
        assert_eq!(fmt_f64(1e-20), "1e-20");
    }

    #[test]
    fn tensor_json_round_trip() {
        let dim = FockDim::new(3).unwrap();
        let t = attenuation(0.3, dim).unwrap().tensor();
        let back = tensor_from_json(&tensor_to_json(&t).unwrap()).unwrap();
        assert_eq!(back.max_abs_diff(&t), 0.0);
        let bad = tensor_to_json(&t).unwrap().replace("\"n_max\":3", "\"n_max\":3,\"extra\":1");
        assert!(tensor_from_json(&bad).is_err());
    }

    #[test]
    fn density_json_round_trip() {
        let dim = FockDim::new(5).unwrap();
        let rho = coherent_state(C64::new(0.3, -0.2), dim);
        let rec = DensityRecord::from_density(&rho);
        let s = serde_json::to_string(&rec).unwrap();
        let back: DensityRecord = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_density().unwrap(), rho);
    }

    #[test]
    fn kernel_chunks_round_trip() {
        let dim = FockDim::new(2).unwrap();
        let g = QuadratureGrid::square(-1.0, 1.0, 5).unwrap();
        let k = crate::transfer::kernel_from_tensor(&attenuation(0.5, dim).unwrap().tensor(), &g, &g).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let h = write_kernel_chunks(&k, dir.path(), 7).unwrap();
        assert_eq!(h.chunks.len(), 4);
        let back = read_kernel_chunks(dir.path()).unwrap();
        assert_eq!(back.sample().unwrap(), k.sample().unwrap());
    }
}
