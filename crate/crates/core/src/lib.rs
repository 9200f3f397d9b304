//! Spectra, regime classification and parameter fitting for single-junction
//! rf-SQUID qubits (flux, fluxonium and quasi-charge regimes), including the
//! coupled qubit-resonator system, the coil's parasitic mode and the
//! dielectric-loss, flux-noise and photon-number-splitting models.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*F64`
//! aliases below name the concrete types used by the command-line tool.
//! Energies and frequencies are in GHz, flux in flux quanta and times in
//! microseconds at every public boundary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod constants;
pub mod coupled;
pub mod dataset;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod noise;
pub mod optimize;
pub mod parasitic;
pub mod presets;
pub mod qubit;
pub mod scalar;

pub use error::{Error, Result};
pub use qubit::{
    build_operators, critical_current_to_ej, delocalization_probability, diagonalize, ground_state_phase_pdf,
    matrix_element, phase_zpf, transition_frequency, OperatorSet, QubitOperator, QubitParams, QubitSolver,
    SpectrumResult, Truncation,
};
pub use scalar::Scalar;

pub type QubitParamsF64 = QubitParams<f64>;
pub type QubitParamsF32 = QubitParams<f32>;
pub type SpectrumF64 = SpectrumResult<f64>;
