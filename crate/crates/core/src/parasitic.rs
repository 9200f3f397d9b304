//! Parasitic self-resonance of the flux-bias coil.
//!
//! Lumped model: a series `L_p`-`C_p` branch in parallel with the qubit's
//! `L_q || C_q` tank. The branch resonates with the series capacitance
//! `C_ser = (1/C_p + 1/C_q)^-1` and couples to the qubit charge.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::constants::{
    ec_from_capacitance, el_from_inductance, ELEMENTARY_CHARGE, FEMTO, GHZ, HBAR, MICRO, NANO, PLANCK,
};
use crate::coupled::{assemble, qubit_sector, CoupledParams, ParasiticMode, DEFAULT_DIMENSION_CAP};
use crate::error::{Error, Result};
use crate::optimize::{nelder_mead, NelderMeadOptions};
use crate::qubit::QubitParams;
use crate::scalar::Scalar;

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

/// Lumped circuit of qubit plus coil, in lab units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParasiticParams {
    /// fF.
    pub c_q: f64,
    /// nH.
    pub l_q: f64,
    /// fF.
    pub c_p: f64,
    /// µH.
    pub l_p: f64,
    /// GHz; not part of the admittance.
    pub e_j: f64,
}

/// Circuit values of the simulated coil and qubit F.
pub const COIL_REFERENCE: ParasiticParams = ParasiticParams {
    c_q: 4.8,
    l_q: 530.0,
    c_p: 0.47,
    l_p: 1.3,
    e_j: 1.99,
};

impl ParasiticParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("c_q", self.c_q),
            ("l_q", self.l_q),
            ("c_p", self.c_p),
            ("l_p", self.l_p),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.e_j >= 0.0) || !self.e_j.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "e_j must be non-negative, got {}",
                self.e_j
            )));
        }
        Ok(())
    }

    /// Farads.
    pub fn c_q_si(&self) -> f64 {
        self.c_q * FEMTO
    }

    pub fn c_p_si(&self) -> f64 {
        self.c_p * FEMTO
    }

    /// Henries.
    pub fn l_q_si(&self) -> f64 {
        self.l_q * NANO
    }

    pub fn l_p_si(&self) -> f64 {
        self.l_p * MICRO
    }

    /// `(1/C_p + 1/C_q)^-1`, F.
    pub fn series_capacitance(&self) -> f64 {
        1.0 / (1.0 / self.c_p_si() + 1.0 / self.c_q_si())
    }

    /// Qubit energies implied by `C_q`, `L_q` and `e_j`.
    pub fn qubit_params(&self, phi_ext: f64) -> Result<QubitParams<f64>> {
        QubitParams::new(
            el_from_inductance(self.l_q_si()),
            ec_from_capacitance(self.c_q_si()),
            self.e_j,
            phi_ext,
        )
    }

    /// Circuit admittance in siemens at `freq_ghz`.
    pub fn admittance(&self, freq_ghz: f64) -> Complex64 {
        Complex64::new(0.0, self.susceptance(freq_ghz))
    }

    /// `Im Y = w C_q - 1/(w L_q) + w C_p / (1 - w^2 L_p C_p)`, S.
    pub fn susceptance(&self, freq_ghz: f64) -> f64 {
        let w = 2.0 * PI * freq_ghz * GHZ;
        w * self.c_q_si() - 1.0 / (w * self.l_q_si())
            + w * self.c_p_si() / (1.0 - w * w * self.l_p_si() * self.c_p_si())
    }

    /// Pole of the series branch, `1 / (2 pi sqrt(L_p C_p))`, GHz.
    pub fn series_pole_ghz(&self) -> f64 {
        1.0 / (2.0 * PI * (self.l_p_si() * self.c_p_si()).sqrt()) / GHZ
    }

    /// Zeros of the admittance (parallel resonances), GHz, ascending.
    pub fn admittance_zeros_ghz(&self) -> [f64; 2] {
        let (lq, cq, lp, cp) = (self.l_q_si(), self.c_q_si(), self.l_p_si(), self.c_p_si());
        let a = lq * cq * lp * cp;
        let b = lq * cq + lp * cp + lq * cp;
        let disc = (b * b - 4.0 * a).sqrt();
        // Roots in w^2, written to avoid cancellation.
        let hi = (b + disc) / (2.0 * a);
        let lo = 1.0 / (a * hi);
        [lo.sqrt() / (2.0 * PI * GHZ), hi.sqrt() / (2.0 * PI * GHZ)]
    }
}

/// Parasitic mode frequency `1 / (2 pi sqrt(L_p C_ser))`, GHz.
pub fn parasitic_mode_frequency(p: &ParasiticParams) -> f64 {
    1.0 / (2.0 * PI * (p.l_p_si() * p.series_capacitance()).sqrt()) / GHZ
}

/// Coupling of the parasitic mode under three normalizations of the qubit
/// charge, all in GHz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParasiticCoupling {
    /// `(4e / C_q) sqrt(hbar w_p C_ser / 2) / h`, the closed form as written.
    /// Multiplies the Cooper-pair number operator.
    pub literal: f64,
    /// Same with `e` in place of `4e`.
    pub e_normalized: f64,
    /// Same with `2e` in place of `4e`.
    pub two_e_normalized: f64,
}

pub fn parasitic_coupling_variants(p: &ParasiticParams) -> ParasiticCoupling {
    let w_p = 2.0 * PI * parasitic_mode_frequency(p) * GHZ;
    let zpf_charge = (HBAR * w_p * p.series_capacitance() / 2.0).sqrt();
    let per_e = ELEMENTARY_CHARGE / p.c_q_si() * zpf_charge / PLANCK / GHZ;
    ParasiticCoupling {
        literal: 4.0 * per_e,
        e_normalized: per_e,
        two_e_normalized: 2.0 * per_e,
    }
}

/// The closed form evaluated literally, GHz.
pub fn parasitic_coupling(p: &ParasiticParams) -> f64 {
    parasitic_coupling_variants(p).literal
}

/// Qubit (x) readout resonator (x) parasitic mode. `mode.g_p` multiplies the
/// Cooper-pair number operator, so the effective 0-1 coupling is
/// `g_p |<0|n|1>|`.
pub fn build_three_mode_hamiltonian<T: Scalar>(
    p: &CoupledParams<T>,
    mode: &ParasiticMode<T>,
    dimension_cap: usize,
) -> Result<DMatrix<T>> {
    if !(mode.omega_p > T::zero()) || mode.n_levels < 1 {
        return Err(Error::InvalidParameter(
            "parasitic mode needs positive frequency and at least one level".into(),
        ));
    }
    let sector = qubit_sector(p)?;
    assemble(&sector, p.omega_r, p.g_c, p.g_l, p.n_photons, Some(mode), dimension_cap)
}

/// Three-mode dressed spectrum with default dimension cap.
pub fn solve_three_mode<T: Scalar>(
    p: &CoupledParams<T>,
    mode: &ParasiticMode<T>,
) -> Result<crate::coupled::DressedSpectrum<T>> {
    let h = build_three_mode_hamiltonian(p, mode, DEFAULT_DIMENSION_CAP)?;
    crate::coupled::label_spectrum(h, p.n_qubit_levels, p.n_photons, mode.n_levels)
}

/// Coupling (GHz, on the Cooper-pair number operator) used for the coil mode
/// of the measured devices.
pub const REPORTED_COUPLING_GHZ: f64 = 0.84;

impl ParasiticMode<f64> {
    /// Mode at the circuit's frequency with the given coupling.
    pub fn from_circuit(p: &ParasiticParams, g_p: f64, n_levels: usize) -> Self {
        Self {
            omega_p: parasitic_mode_frequency(p),
            g_p,
            n_levels,
        }
    }
}

/// One admittance sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmittanceSample {
    pub freq_ghz: f64,
    /// Siemens.
    pub y: Complex64,
}

#[derive(Debug, Serialize, Deserialize)]
struct AdmittanceRow {
    freq_ghz: f64,
    re_s: f64,
    im_s: f64,
}

/// Reads `freq_ghz,re_s,im_s` CSV (header required, `#` comments allowed).
pub fn read_admittance_csv<R: Read>(reader: R) -> Result<Vec<AdmittanceSample>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for (i, row) in rdr.deserialize::<AdmittanceRow>().enumerate() {
        let row = row?;
        if !(row.freq_ghz > 0.0) || !row.re_s.is_finite() || !row.im_s.is_finite() {
            problems.push(format!("row {}: frequency must be positive and values finite", i + 1));
            continue;
        }
        out.push(AdmittanceSample {
            freq_ghz: row.freq_ghz,
            y: Complex64::new(row.re_s, row.im_s),
        });
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(problems));
    }
    Ok(out)
}

pub fn write_admittance_csv<W: std::io::Write>(writer: W, samples: &[AdmittanceSample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(AdmittanceRow {
            freq_ghz: s.freq_ghz,
            re_s: s.y.re,
            im_s: s.y.im,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Noiseless samples of the lumped model.
pub fn sample_admittance(p: &ParasiticParams, freqs_ghz: &[f64]) -> Vec<AdmittanceSample> {
    freqs_ghz
        .iter()
        .map(|&f| AdmittanceSample {
            freq_ghz: f,
            y: p.admittance(f),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct AdmittanceFit {
    /// `e_j` is left at zero.
    pub params: ParasiticParams,
    /// RMS of the phase-like residual `atan(B/B0)` (radians).
    pub rms_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub series_pole_ghz: f64,
    pub mode_frequency_ghz: f64,
}

/// Poles and zeros of `Im Y` located by sign changes. Susceptance of a
/// lossless network increases with frequency, so `-` to `+` is a zero and
/// `+` to `-` a pole.
fn sign_changes(samples: &[AdmittanceSample]) -> (Vec<f64>, Vec<f64>) {
    let mut zeros = Vec::new();
    let mut poles = Vec::new();
    for w in samples.windows(2) {
        let (f0, b0, f1, b1) = (w[0].freq_ghz, w[0].y.im, w[1].freq_ghz, w[1].y.im);
        if b0 < 0.0 && b1 >= 0.0 {
            zeros.push(f0 + (f1 - f0) * (-b0) / (b1 - b0));
        } else if b0 > 0.0 && b1 <= 0.0 {
            let (r0, r1) = (1.0 / b0, if b1 == 0.0 { -f64::MIN_POSITIVE } else { 1.0 / b1 });
            poles.push(f0 + (f1 - f0) * (-r0) / (r1 - r0));
        }
    }
    (zeros, poles)
}

/// Closed-form starting point from the two zeros, the series pole and the
/// low-frequency samples.
fn initial_guess(samples: &[AdmittanceSample]) -> Result<ParasiticParams> {
    let (zeros, poles) = sign_changes(samples);
    if zeros.len() < 2 || poles.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "admittance samples must bracket both parallel resonances and the series pole \
             (found {} zeros, {} poles)",
            zeros.len(),
            poles.len()
        )));
    }
    let w = |f: f64| 2.0 * PI * f * GHZ;
    let (x1, x2, xp) = (w(zeros[0]).powi(2), w(zeros[1]).powi(2), w(poles[0]).powi(2));
    let lpcp = 1.0 / xp;
    let lqcq = 1.0 / (x1 * x2 * lpcp);
    let lqcp = (x1 + x2) * lqcq * lpcp - lqcq - lpcp;
    if !(lqcp > 0.0) {
        return Err(Error::InvalidParameter(
            "pole and zero positions are inconsistent with the lumped circuit".into(),
        ));
    }
    // B L_q = w L_qC_q - 1/w + w L_qC_p / (1 - w^2 L_pC_p); use samples below the first zero.
    let mut estimates: Vec<f64> = samples
        .iter()
        .filter(|s| s.freq_ghz < 0.5 * zeros[0] && s.y.im != 0.0)
        .map(|s| {
            let om = w(s.freq_ghz);
            (om * lqcq - 1.0 / om + om * lqcp / (1.0 - om * om * lpcp)) / s.y.im
        })
        .filter(|l| *l > 0.0)
        .collect();
    if estimates.is_empty() {
        return Err(Error::InvalidParameter(
            "need samples well below the first resonance to fix the inductance scale".into(),
        ));
    }
    estimates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let l_q = estimates[estimates.len() / 2];
    let c_q = lqcq / l_q;
    let c_p = lqcp / l_q;
    let l_p = lpcp / c_p;
    Ok(ParasiticParams {
        c_q: c_q / FEMTO,
        l_q: l_q / NANO,
        c_p: c_p / FEMTO,
        l_p: l_p / MICRO,
        e_j: 0.0,
    })
}

fn phase_residuals(p: &ParasiticParams, samples: &[AdmittanceSample], b0: f64) -> f64 {
    let mut rss = 0.0;
    for s in samples {
        let mut d = (p.susceptance(s.freq_ghz) / b0).atan() - (s.y.im / b0).atan();
        // Wrap into (-pi/2, pi/2]: a pole on either side of a sample is the same state.
        if d > PI / 2.0 {
            d -= PI;
        } else if d <= -PI / 2.0 {
            d += PI;
        }
        rss += d * d;
    }
    rss
}

/// Fits `C_q, L_q, C_p, L_p` to admittance samples. Residuals use
/// `atan(B / B0)` with `B0 = sqrt(C_q/L_q)` of the starting point so poles
/// do not dominate.
pub fn fit_lumped_admittance(samples: &[AdmittanceSample]) -> Result<AdmittanceFit> {
    if samples.len() < 8 {
        return Err(Error::InvalidParameter(format!(
            "need at least 8 admittance samples, got {}",
            samples.len()
        )));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.freq_ghz.partial_cmp(&b.freq_ghz).unwrap());
    let init = initial_guess(&sorted)?;
    let b0 = (init.c_q_si() / init.l_q_si()).sqrt();
    let unpack = |x: &[f64]| ParasiticParams {
        c_q: init.c_q * x[0].exp(),
        l_q: init.l_q * x[1].exp(),
        c_p: init.c_p * x[2].exp(),
        l_p: init.l_p * x[3].exp(),
        e_j: 0.0,
    };
    let opts = NelderMeadOptions {
        f_tolerance: 1e-14,
        x_tolerance: 1e-7,
        initial_step: 0.02,
        max_iterations: 20_000,
    };
    let m = nelder_mead(|x| phase_residuals(&unpack(x), &sorted, b0), &[0.0; 4], &opts);
    let params = unpack(&m.x);
    let rms = (m.value / sorted.len() as f64).sqrt();
    if !m.converged {
        return Err(Error::Convergence(format!(
            "admittance fit stopped after {} iterations with rms phase residual {rms:.3e} rad",
            m.iterations
        )));
    }
    Ok(AdmittanceFit {
        params,
        rms_residual: rms,
        iterations: m.iterations,
        converged: m.converged,
        series_pole_ghz: params.series_pole_ghz(),
        mode_frequency_ghz: parasitic_mode_frequency(&params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_mode_frequency() {
        let f = parasitic_mode_frequency(&COIL_REFERENCE);
        assert!((f - 6.74).abs() < 0.07, "{f}");
    }

    #[test]
    fn large_qubit_capacitance_gives_series_limit() {
        let p = ParasiticParams {
            c_q: 1e9,
            ..COIL_REFERENCE
        };
        assert!((parasitic_mode_frequency(&p) - p.series_pole_ghz()).abs() < 1e-6);
    }

    #[test]
    fn coupling_vanishes_with_branch_capacitance() {
        // g_p scales as C_ser^(1/4).
        let g = |c_p| parasitic_coupling(&ParasiticParams { c_p, ..COIL_REFERENCE });
        assert!(g(1e-4) < g(1e-2) && g(1e-2) < g(0.47));
        assert!(g(1e-16) < 1e-3);
        let v = parasitic_coupling_variants(&COIL_REFERENCE);
        assert!((v.literal - 4.0 * v.e_normalized).abs() < 1e-12);
        assert!((v.two_e_normalized - 2.0 * v.e_normalized).abs() < 1e-12);
    }

    #[test]
    fn zeros_are_roots_of_susceptance() {
        for z in COIL_REFERENCE.admittance_zeros_ghz() {
            let scale = (COIL_REFERENCE.c_q_si() / COIL_REFERENCE.l_q_si()).sqrt();
            assert!(COIL_REFERENCE.susceptance(z).abs() / scale < 1e-9);
        }
    }

    #[test]
    fn inductive_at_low_frequency() {
        let f = 0.01;
        let w = 2.0 * PI * f * GHZ;
        let want = -1.0 / (w * COIL_REFERENCE.l_q_si());
        assert!((COIL_REFERENCE.susceptance(f) - want).abs() / want.abs() < 1e-3);
    }

    #[test]
    fn requires_bracketing_samples() {
        let freqs: Vec<f64> = (1..=20).map(|i| 0.1 * i as f64).collect();
        let err = fit_lumped_admittance(&sample_admittance(&COIL_REFERENCE, &freqs)).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
    }

    #[test]
    fn csv_round_trip() {
        let s = sample_admittance(&COIL_REFERENCE, &[1.0, 2.0, 7.0]);
        let mut buf = Vec::new();
        write_admittance_csv(&mut buf, &s).unwrap();
        let back = read_admittance_csv(buf.as_slice()).unwrap();
        assert_eq!(s, back);
    }
}
