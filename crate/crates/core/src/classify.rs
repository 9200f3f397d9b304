//! Regime map of the rf-SQUID family.
//!
//! Two axes decide the class: whether the junction is heavy (`E_J/E_C`
//! above one) and whether the characteristic impedance exceeds the
//! resistance quantum. With `E_C = e^2/2C` and `E_L = (Phi_0/2pi)^2/L`,
//!
//! ```text
//! Z_C = sqrt(L/C) = (hbar / 2e^2) sqrt(2 E_C / E_L) = (R_Q / pi) phi_zpf^2
//! ```
//!
//! where `R_Q = h/(2e)^2`. Ties go to the heavy and the high-impedance side.

use serde::{Deserialize, Serialize};

use crate::constants::RESISTANCE_QUANTUM;
use crate::qubit::{phase_zpf, QubitParams};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Flux,
    Fluxonium,
    QuasiCharge,
    WeaklyAnharmonic,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Flux => "flux",
            Regime::Fluxonium => "fluxonium",
            Regime::QuasiCharge => "quasi-charge",
            Regime::WeaklyAnharmonic => "weakly-anharmonic",
        }
    }

    /// Pure function of the two ratios.
    pub fn from_ratios<T: Scalar>(ratio_ej_ec: T, z_c_over_rq: T) -> Self {
        let heavy = ratio_ej_ec >= T::one();
        let high_impedance = z_c_over_rq >= T::one();
        match (heavy, high_impedance) {
            (true, false) => Regime::Flux,
            (true, true) => Regime::Fluxonium,
            (false, false) => Regime::WeaklyAnharmonic,
            (false, true) => Regime::QuasiCharge,
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport<T> {
    pub ratio_ej_ec: T,
    pub ratio_el_ec: T,
    /// Ohm.
    pub z_c: T,
    pub z_c_over_rq: T,
    pub phase_zpf: T,
    pub label: Regime,
}

pub fn characteristic_impedance<T: Scalar>(params: &QubitParams<T>) -> T {
    T::lit(RESISTANCE_QUANTUM) / T::pi() * (T::lit(2.0) * params.e_c / params.e_l).sqrt()
}

pub fn classify<T: Scalar>(params: &QubitParams<T>) -> RegimeReport<T> {
    let z_c = characteristic_impedance(params);
    let z_c_over_rq = z_c / T::lit(RESISTANCE_QUANTUM);
    let ratio_ej_ec = params.e_j / params.e_c;
    RegimeReport {
        ratio_ej_ec,
        ratio_el_ec: params.e_l / params.e_c,
        z_c,
        z_c_over_rq,
        phase_zpf: phase_zpf(params),
        label: Regime::from_ratios(ratio_ej_ec, z_c_over_rq),
    }
}
