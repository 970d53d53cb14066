//! Heralded continuous-variable quantum maps: process tensors on truncated Fock
//! spaces, Wigner-space transfer kernels, an optical element catalog and
//! end-to-end models of a noiseless amplifier and of photon addition.
//!
//! Quadrature convention: `a = (x + i p)/√2`, vacuum `W = e^{-x²-p²}/π`.

pub mod config;
pub mod elements;
pub mod error;
pub mod figures;
pub mod fock;
pub mod io;
pub mod map;
pub mod models;
pub mod oracle;
pub mod transfer;
pub mod verify;

pub use error::{Error, Result};
pub use fock::{
    coherent_state, fidelity, fock_state, grid_integral, thermal_state, vacuum, wigner_basis, wigner_of, DensityOperator,
    FockDim, QuadratureGrid, WignerField, C64,
};
pub use map::{
    apply, choi, combine_heralding, compose_serial, inject_ancilla, is_cp, is_trace_nonincreasing,
    phase_invariance_defect, project_mode, success_probability, tensor_from_kraus, tensor_parallel, trace_out,
    ChoiMatrix, KrausSet, ProcessTensor,
};
pub use transfer::{
    apply_kernel, compose_kernels, input_marginal, kernel_from_kraus, kernel_from_tensor, kernel_norm, negativity,
    output_marginal, radial_form, GridKernel, Negativity, RadialGrid, RadialKernel, TransferKernel,
};
