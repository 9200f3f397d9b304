//! Physical constants (CODATA 2018, exact SI definitions where available).
//!
//! Every SI conversion in the crate goes through this module; all external
//! boundaries use GHz, flux quanta and microseconds.

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant, J s.
pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
/// Elementary charge, C.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Superconducting flux quantum h / 2e, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);
/// Superconducting resistance quantum h / (2e)^2, Ohm.
pub const RESISTANCE_QUANTUM: f64 = PLANCK / (4.0 * ELEMENTARY_CHARGE * ELEMENTARY_CHARGE);

pub const GHZ: f64 = 1e9;
pub const NANO: f64 = 1e-9;
pub const MICRO: f64 = 1e-6;
pub const FEMTO: f64 = 1e-15;

/// Energy in joules of a frequency given in GHz (E = h f).
pub fn ghz_to_joule(f_ghz: f64) -> f64 {
    PLANCK * f_ghz * GHZ
}

pub fn joule_to_ghz(e: f64) -> f64 {
    e / (PLANCK * GHZ)
}

/// Total capacitance (F) for a charging energy E_C = e^2 / 2C given in GHz.
pub fn capacitance_from_ec(e_c_ghz: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * ghz_to_joule(e_c_ghz))
}

/// Charging energy (GHz) of a capacitance in farads.
pub fn ec_from_capacitance(c: f64) -> f64 {
    joule_to_ghz(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c))
}

/// Inductance (H) for E_L = (Phi_0 / 2 pi)^2 / L given in GHz.
pub fn inductance_from_el(e_l_ghz: f64) -> f64 {
    let phi0_red = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
    phi0_red * phi0_red / ghz_to_joule(e_l_ghz)
}

/// Inductive energy (GHz) of an inductance in henries.
pub fn el_from_inductance(l: f64) -> f64 {
    let phi0_red = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
    joule_to_ghz(phi0_red * phi0_red / l)
}
