//! The eight measured geometric rf-SQUID devices, as fitted.
//!
//! Coupling columns are the fitted constants multiplied by the calculated
//! 0-1 matrix elements at half flux (`g_C |<0|n|1>|`, `g_L |<0|phi|1>|`).

use serde::Serialize;

use crate::coupled::CoupledParams;
use crate::error::Result;
use crate::qubit::QubitParams;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DevicePreset {
    pub name: &'static str,
    /// "2D" on-chip resonator or "3D" cavity.
    pub design: &'static str,
    pub kappa_tot_mhz: f64,
    pub e_l: f64,
    pub e_c: f64,
    pub e_j: f64,
    pub phi_zpf: f64,
    pub g_c_n_mhz: f64,
    pub g_l_phi_mhz: f64,
    pub t1_us: Option<f64>,
    pub sqrt_a_phi_micro: Option<f64>,
}

impl DevicePreset {
    pub fn params(&self, phi_ext: f64) -> QubitParams<f64> {
        QubitParams {
            e_l: self.e_l,
            e_c: self.e_c,
            e_j: self.e_j,
            phi_ext,
        }
    }

    /// Bare resonator frequency, GHz. Only qubit C's is stated (6.03 GHz);
    /// the others sit near 6 GHz and default to 6.0.
    pub fn omega_r(&self) -> f64 {
        if self.name == "C" {
            6.03
        } else {
            6.0
        }
    }

    /// Coupled model with the tabulated effective couplings converted to
    /// bare constants.
    pub fn coupled(&self, phi_ext: f64) -> Result<CoupledParams<f64>> {
        CoupledParams::from_effective_couplings(
            self.params(phi_ext),
            self.omega_r(),
            self.g_c_n_mhz * 1e-3,
            self.g_l_phi_mhz * 1e-3,
        )
    }
}

#[allow(clippy::too_many_arguments)]
const fn row(
    name: &'static str,
    design: &'static str,
    kappa_tot_mhz: f64,
    e_l: f64,
    e_c: f64,
    e_j: f64,
    phi_zpf: f64,
    g_c_n_mhz: f64,
    g_l_phi_mhz: f64,
    t1_us: Option<f64>,
    sqrt_a_phi_micro: Option<f64>,
) -> DevicePreset {
    DevicePreset {
        name,
        design,
        kappa_tot_mhz,
        e_l,
        e_c,
        e_j,
        phi_zpf,
        g_c_n_mhz,
        g_l_phi_mhz,
        t1_us,
        sqrt_a_phi_micro,
    }
}

pub const DEVICES: [DevicePreset; 8] = [
    row("A", "2D", 1.7, 0.618, 2.75, 8.55, 1.73, 15.0, 0.1, Some(1.5), None),
    row(
        "B",
        "2D",
        0.63,
        0.620,
        3.15,
        5.92,
        1.78,
        63.0,
        140.0,
        Some(2.38),
        Some(317.0),
    ),
    row(
        "C",
        "2D",
        0.74,
        0.619,
        3.25,
        5.41,
        1.80,
        69.0,
        100.0,
        Some(3.29),
        Some(338.0),
    ),
    row(
        "D",
        "2D",
        0.62,
        0.620,
        3.83,
        3.05,
        1.88,
        41.0,
        210.0,
        Some(1.81),
        Some(787.0),
    ),
    row(
        "E",
        "2D",
        0.82,
        0.205,
        2.97,
        4.89,
        2.32,
        6.0,
        2.0,
        Some(9.62),
        Some(673.0),
    ),
    row(
        "F",
        "2D",
        0.95,
        0.215,
        3.40,
        1.99,
        2.42,
        90.0,
        7.0,
        Some(2.25),
        Some(646.0),
    ),
    row("G", "3D", 1.1, 0.78, 0.50, 3.15, 1.06, 17.0, 0.0, None, None),
    row("H", "3D", 0.95, 10.70, 0.54, 9.00, 0.56, 98.0, 0.0, None, None),
];

/// Looks up a device by letter (`"F"`) or preset name (`"qubit-F"`),
/// case-insensitively.
pub fn device(name: &str) -> Option<&'static DevicePreset> {
    let key = name.trim();
    let key = key
        .strip_prefix("qubit-")
        .or_else(|| key.strip_prefix("Qubit-"))
        .unwrap_or(key);
    DEVICES.iter().find(|d| d.name.eq_ignore_ascii_case(key))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup() {
        assert_eq!(device("qubit-F").unwrap().e_j, 1.99);
        assert_eq!(device("h").unwrap().e_l, 10.70);
        assert!(device("qubit-Z").is_none());
    }
}
