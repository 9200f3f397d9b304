//! Dielectric-loss relaxation, flux-noise echo dephasing and photon-number
//! splitting lineshapes.
//!
//! These work in SI internally and are `f64` only; public inputs and outputs
//! stay in GHz, flux quanta, µs and MHz.

use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::constants::{capacitance_from_ec, BOLTZMANN, ELEMENTARY_CHARGE, FEMTO, GHZ, HBAR, MICRO};
use crate::error::{Error, Result};
use crate::optimize::{axis_uncertainties, nelder_mead, Minimum, NelderMeadOptions};
use crate::qubit::{converged_dim, diagonalize, transition_flux_slope, QubitOperator, QubitParams, Truncation};

/// Finite-difference step for the flux slope, flux quanta.
pub const SLOPE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T1Model {
    pub q_diel: f64,
    /// Kelvin.
    pub temperature: f64,
    /// fF; derived from `E_C` when `None`.
    pub c_total: Option<f64>,
}

impl T1Model {
    pub fn new(q_diel: f64, temperature: f64) -> Result<Self> {
        let m = Self {
            q_diel,
            temperature,
            c_total: None,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_diel > 0.0) || !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "q_diel and temperature must be positive (got {}, {})",
                self.q_diel, self.temperature
            )));
        }
        if let Some(c) = self.c_total {
            if !(c > 0.0) {
                return Err(Error::InvalidParameter(format!("c_total must be positive, got {c}")));
            }
        }
        Ok(())
    }

    /// Farads.
    pub fn capacitance(&self, qubit: &QubitParams<f64>) -> f64 {
        self.c_total
            .map(|c| c * FEMTO)
            .unwrap_or_else(|| capacitance_from_ec(qubit.e_c))
    }
}

/// Relaxation rate in 1/s from SI inputs: phase matrix element (rad),
/// angular frequency (rad/s), capacitance (F), quality factor, temperature (K).
pub fn gamma1_si(phi01: f64, omega: f64, capacitance: f64, q_diel: f64, temperature: f64) -> f64 {
    let x = HBAR * omega / (2.0 * BOLTZMANN * temperature);
    let coth = 1.0 / x.tanh();
    phi01 * phi01 * HBAR * omega * omega * capacitance / (q_diel * (2.0 * ELEMENTARY_CHARGE).powi(2)) * coth
}

/// Matrix element `|<0|phi|1>|` and `f01` (GHz) at the given flux.
pub fn t1_inputs(qubit: &QubitParams<f64>) -> Result<(f64, f64)> {
    let s = diagonalize(qubit, Truncation::default())?;
    Ok((s.element(QubitOperator::Phase, 0, 1), s.transition(0, 1)))
}

/// `T1` in µs; `+inf` when the 0-1 phase matrix element vanishes.
pub fn t1_capacitive(qubit: &QubitParams<f64>, model: &T1Model) -> Result<f64> {
    model.validate()?;
    let (phi01, f01) = t1_inputs(qubit)?;
    Ok(t1_from_inputs(phi01, f01, model.capacitance(qubit), model))
}

fn t1_from_inputs(phi01: f64, f01: f64, capacitance: f64, model: &T1Model) -> f64 {
    let g = gamma1_si(
        phi01,
        2.0 * PI * f01 * GHZ,
        capacitance,
        model.q_diel,
        model.temperature,
    );
    if g > 0.0 {
        1.0 / g / MICRO
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct T2Model {
    /// µΦ0.
    pub a_phi_sqrt: f64,
    pub gamma_filter: f64,
    /// µs.
    pub t_phi: f64,
}

impl T2Model {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_phi_sqrt >= 0.0) || !(self.t_phi > 0.0) || !(self.gamma_filter >= 0.0) {
            return Err(Error::InvalidParameter(
                "need a_phi_sqrt >= 0, gamma_filter >= 0 and t_phi > 0".into(),
            ));
        }
        Ok(())
    }
}

/// `|d f01 / d Phi|` in GHz per flux quantum, central difference with a fixed
/// basis; the second value is the Richardson estimate.
pub fn flux_slope(qubit: &QubitParams<f64>) -> Result<(f64, f64)> {
    let dim = converged_dim(qubit, Truncation::default())?;
    let s = transition_flux_slope(qubit, 0, 1, dim, SLOPE_STEP)?;
    Ok((s.central.abs(), s.richardson.abs()))
}

/// Echo dephasing time from a known slope (GHz/Φ0) and `T1` (µs).
pub fn t2_from_slope(slope_ghz_per_phi0: f64, model: &T2Model, t1_us: f64) -> f64 {
    let flux = 2.0 * PI * slope_ghz_per_phi0 * GHZ * model.a_phi_sqrt * MICRO * model.gamma_filter * MICRO;
    let rate = flux + 1.0 / (2.0 * t1_us) + 1.0 / model.t_phi;
    (1.0 / rate).min(2.0 * t1_us)
}

/// `T2` echo in µs.
pub fn t2_echo(qubit: &QubitParams<f64>, model: &T2Model, t1_us: f64) -> Result<f64> {
    model.validate()?;
    if !(t1_us > 0.0) {
        return Err(Error::InvalidParameter(format!("t1 must be positive, got {t1_us}")));
    }
    let (slope, _) = flux_slope(qubit)?;
    Ok(t2_from_slope(slope, model, t1_us))
}

/// One coherence measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherencePoint {
    pub phi_ext: f64,
    pub value_us: f64,
    pub err_us: f64,
}

/// Time unit of a coherence dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TimeUnit {
    #[default]
    Microseconds,
    Seconds,
}

impl TimeUnit {
    pub fn to_us(self, v: f64) -> f64 {
        match self {
            TimeUnit::Microseconds => v,
            TimeUnit::Seconds => v / MICRO,
        }
    }
}

/// Reads `phi_ext,value_us,err_us` CSV (`#` comments allowed).
pub fn read_coherence_csv<R: Read>(reader: R) -> Result<Vec<CoherencePoint>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    let mut problems = Vec::new();
    for (i, row) in rdr.deserialize::<CoherencePoint>().enumerate() {
        let p = row?;
        if !p.phi_ext.is_finite() || !(p.value_us > 0.0) || !(p.err_us >= 0.0) {
            problems.push(format!(
                "row {}: need finite flux, positive value and non-negative error",
                i + 1
            ));
            continue;
        }
        out.push(p);
    }
    if !problems.is_empty() {
        return Err(Error::Dataset(problems));
    }
    Ok(out)
}

pub fn write_coherence_csv<W: std::io::Write>(writer: W, points: &[CoherencePoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityFit {
    pub q_diel: f64,
    /// One standard deviation; zero for a single point.
    pub q_diel_err: f64,
    /// RMS residual of `ln T1`.
    pub rms_log_residual: f64,
    pub n_points: usize,
}

/// Least squares on `ln T1` for the single parameter `Q_diel`
/// (`T1` is proportional to `Q_diel`, so the optimum is closed form).
pub fn fit_t1_quality(
    points: &[(f64, f64)],
    unit: TimeUnit,
    qubit: &QubitParams<f64>,
    temperature: f64,
    c_total: Option<f64>,
) -> Result<QualityFit> {
    if points.is_empty() {
        return Err(Error::Dataset(vec!["no T1 points".into()]));
    }
    let bad: Vec<String> = points
        .iter()
        .enumerate()
        .filter(|(_, (_, t))| !(*t > 0.0) || !t.is_finite())
        .map(|(i, (_, t))| format!("point {}: T1 must be positive, got {t}", i + 1))
        .collect();
    if !bad.is_empty() {
        return Err(Error::Dataset(bad));
    }
    let unit_model = T1Model {
        q_diel: 1.0,
        temperature,
        c_total,
    };
    unit_model.validate()?;
    let mut diffs = Vec::with_capacity(points.len());
    for &(phi, t1) in points {
        let t_unit = t1_capacitive(&qubit.with_flux(phi), &unit_model)?;
        if !t_unit.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "phase matrix element vanishes at flux {phi}; T1 there carries no information on Q"
            )));
        }
        diffs.push(unit.to_us(t1).ln() - t_unit.ln());
    }
    let n = diffs.len() as f64;
    let log_q = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - log_q).powi(2)).sum();
    let rms = (ss / n).sqrt();
    let se_log = if diffs.len() > 1 {
        (ss / (n - 1.0) / n).sqrt()
    } else {
        0.0
    };
    let q = log_q.exp();
    Ok(QualityFit {
        q_diel: q,
        q_diel_err: q * se_log,
        rms_log_residual: rms,
        n_points: diffs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxNoiseFit {
    /// µΦ0.
    pub a_phi_sqrt: f64,
    pub a_phi_sqrt_err: Option<f64>,
    /// µs.
    pub t_phi: f64,
    pub t_phi_err: Option<f64>,
    pub gamma_filter: f64,
    /// RMS of `ln T2` residuals.
    pub rms_log_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Data cannot separate the two rates (flat in flux or near-singular).
    pub wide_uncertainty: bool,
}

fn brackets_half_flux(points: &[(f64, f64)]) -> bool {
    let u: Vec<f64> = points.iter().map(|(p, _)| p - p.floor()).collect();
    u.iter().any(|&x| x <= 0.5) && u.iter().any(|&x| x >= 0.5)
}

/// Fits `sqrt(A_Phi)` and `T_phi` to echo data. `t1_us` supplies `T1` at each
/// flux (interpolated measurement or model).
pub fn fit_t2_flux_noise(
    points: &[(f64, f64)],
    qubit: &QubitParams<f64>,
    t1_us: impl Fn(f64) -> f64,
    gamma_filter: f64,
) -> Result<FluxNoiseFit> {
    if points.len() < 3 {
        return Err(Error::Dataset(vec![format!(
            "need at least 3 T2 points, got {}",
            points.len()
        )]));
    }
    if points.iter().any(|(_, t)| !(*t > 0.0)) {
        return Err(Error::Dataset(vec!["T2 values must be positive".into()]));
    }
    if !brackets_half_flux(points) {
        return Err(Error::Dataset(vec![
            "T2 points must bracket the half-flux sweet spot".into()
        ]));
    }
    if !(gamma_filter > 0.0) {
        return Err(Error::InvalidParameter("gamma_filter must be positive".into()));
    }
    // Slope in angular frequency per flux quantum (rad/µs per Φ0 -> use 1/µs units below).
    let rows: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|&(phi, t2)| {
            let (slope, _) = flux_slope(&qubit.with_flux(phi))?;
            let t1 = t1_us(phi);
            if !(t1 > 0.0) {
                return Err(Error::InvalidParameter(format!("T1 at flux {phi} must be positive")));
            }
            Ok((slope, t1, t2))
        })
        .collect::<Result<_>>()?;

    // Rate-space linear least squares: 1/T2 - 1/(2 T1) = a s + b, a = sqrt(A) gamma (scaled), b = 1/T_phi.
    let per_micro_phi0 = 2.0 * PI * GHZ * MICRO * MICRO; // slope[GHz/Φ0] * sqrt(A)[µΦ0] -> 1/µs
    let xs: Vec<f64> = rows.iter().map(|r| r.0 * per_micro_phi0 * gamma_filter).collect();
    let ys: Vec<f64> = rows.iter().map(|r| 1.0 / r.2 - 1.0 / (2.0 * r.1)).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let flat = sxx <= 1e-12 * (1.0 + mx * mx);
    let a0 = if flat { 0.0 } else { (sxy / sxx).max(0.0) };
    let b0 = (my - a0 * mx).max(1e-6);
    let a0 = a0.max(1.0);

    let model = |x: &[f64], r: &(f64, f64, f64)| {
        t2_from_slope(
            r.0,
            &T2Model {
                a_phi_sqrt: x[0].exp(),
                gamma_filter,
                t_phi: x[1].exp(),
            },
            r.1,
        )
    };
    let objective = |x: &[f64]| rows.iter().map(|r| (model(x, r).ln() - r.2.ln()).powi(2)).sum::<f64>();
    let opts = NelderMeadOptions {
        f_tolerance: 1e-12,
        x_tolerance: 1e-6,
        initial_step: 0.2,
        ..Default::default()
    };
    let start = [a0.ln(), (1.0 / b0).ln()];
    let m = nelder_mead(objective, &start, &opts);
    let dof = rows.len().saturating_sub(2);
    let unc = axis_uncertainties(objective, &m.x, 1e-3, m.value, dof);
    let a = m.x[0].exp();
    let t_phi = m.x[1].exp();
    let a_err = unc[0].map(|s| a * s);
    let t_err = unc[1].map(|s| t_phi * s);
    let wide = flat || a_err.is_none_or(|e| e > a) || t_err.is_none_or(|e| e > t_phi);
    Ok(FluxNoiseFit {
        a_phi_sqrt: a,
        a_phi_sqrt_err: a_err,
        t_phi,
        t_phi_err: t_err,
        gamma_filter,
        rms_log_residual: (m.value / n).sqrt(),
        iterations: m.iterations,
        converged: m.converged,
        wide_uncertainty: wide,
    })
}

/// Poisson-weighted comb of unit-peak Lorentzians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NumberSplitModel {
    pub n_bar: f64,
    /// MHz.
    pub two_chi: f64,
    /// Full width at half maximum, MHz.
    pub linewidth: f64,
    /// GHz.
    pub f0: f64,
    pub amplitude: f64,
}

/// Poisson weights are dropped below this fraction of the largest weight.
pub const POISSON_CUTOFF: f64 = 1e-6;
/// Largest mean occupation the lineshape accepts.
pub const MAX_N_BAR: f64 = 1000.0;

impl NumberSplitModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.n_bar >= 0.0 && self.n_bar <= MAX_N_BAR)
            || !(self.linewidth > 0.0)
            || !self.two_chi.is_finite()
            || !self.f0.is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= n_bar <= {MAX_N_BAR}, linewidth > 0 and finite f0, two_chi"
            )));
        }
        Ok(())
    }

    /// `(k, P(k))` for every retained peak.
    pub fn weights(&self) -> Vec<(usize, f64)> {
        poisson_weights(self.n_bar)
    }

    /// Peak centers in GHz.
    pub fn peak(&self, k: usize) -> f64 {
        self.f0 + k as f64 * self.two_chi * 1e-3
    }

    /// NaN outside the valid parameter range.
    pub fn evaluate(&self, freq_ghz: f64) -> f64 {
        self.curve(&[freq_ghz])[0]
    }

    /// Lineshape on a frequency axis (weights computed once).
    pub fn curve(&self, freqs_ghz: &[f64]) -> Vec<f64> {
        if self.validate().is_err() {
            return vec![f64::NAN; freqs_ghz.len()];
        }
        let hwhm = 0.5 * self.linewidth * 1e-3;
        let peaks: Vec<(f64, f64)> = self.weights().into_iter().map(|(k, p)| (self.peak(k), p)).collect();
        freqs_ghz
            .iter()
            .map(|&f| {
                self.amplitude
                    * peaks
                        .iter()
                        .map(|&(c, p)| {
                            let d = (f - c) / hwhm;
                            p / (1.0 + d * d)
                        })
                        .sum::<f64>()
            })
            .collect()
    }

    /// Analytic integral over all frequencies (GHz x amplitude).
    pub fn total_area(&self) -> f64 {
        let w: f64 = self.weights().iter().map(|(_, p)| p).sum();
        self.amplitude * PI * self.linewidth * 1e-3 / 2.0 * w
    }
}

fn poisson_weights(n_bar: f64) -> Vec<(usize, f64)> {
    if n_bar == 0.0 {
        return vec![(0, 1.0)];
    }
    let mode = n_bar.floor() as usize;
    let ln_max = -n_bar + mode as f64 * n_bar.ln() - (1..=mode).map(|i| (i as f64).ln()).sum::<f64>();
    let p_max = ln_max.exp();
    let cut = POISSON_CUTOFF * p_max;
    // Walk outwards with p(k+1) = p(k) n_bar / (k+1).
    let mut below = Vec::new();
    let mut p = p_max;
    let mut k = mode;
    while k > 0 {
        p *= k as f64 / n_bar;
        k -= 1;
        if p < cut {
            break;
        }
        below.push((k, p));
    }
    below.reverse();
    below.push((mode, p_max));
    let mut p = p_max;
    let mut k = mode;
    loop {
        p *= n_bar / (k + 1) as f64;
        k += 1;
        if p < cut {
            break;
        }
        below.push((k, p));
    }
    below
}

pub fn number_split_lineshape(freqs_ghz: &[f64], model: &NumberSplitModel) -> Result<Vec<f64>> {
    model.validate()?;
    Ok(model.curve(freqs_ghz))
}

/// One spectroscopy trace at a fixed drive power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub label: String,
    pub freqs_ghz: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct TraceRow {
    freq_ghz: f64,
    amplitude: f64,
}

/// Reads a `freq_ghz,amplitude` trace.
pub fn read_trace_csv<R: Read>(label: &str, reader: R) -> Result<Trace> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut freqs = Vec::new();
    let mut amps = Vec::new();
    for row in rdr.deserialize::<TraceRow>() {
        let r = row?;
        if !r.freq_ghz.is_finite() || !r.amplitude.is_finite() {
            return Err(Error::Dataset(vec![format!("{label}: non-finite value")]));
        }
        freqs.push(r.freq_ghz);
        amps.push(r.amplitude);
    }
    Ok(Trace {
        label: label.to_string(),
        freqs_ghz: freqs,
        amplitudes: amps,
    })
}

pub fn write_trace_csv<W: std::io::Write>(writer: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (f, a) in trace.freqs_ghz.iter().zip(&trace.amplitudes) {
        w.serialize(TraceRow {
            freq_ghz: *f,
            amplitude: *a,
        })?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct NumberSplitFit {
    pub label: String,
    pub model: NumberSplitModel,
    pub rss: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Peaks closer than their width.
    pub low_confidence: bool,
}

/// Boxcar smoothing over `2 * half + 1` samples.
fn smooth(values: &[f64], half: usize) -> Vec<f64> {
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Local maxima of `a` above `frac` of its maximum, strongest first.
fn find_peaks(a: &[f64], frac: f64) -> Vec<usize> {
    let max = a.iter().cloned().fold(f64::MIN, f64::max);
    let mut peaks: Vec<usize> = (1..a.len().saturating_sub(1))
        .filter(|&i| a[i] >= a[i - 1] && a[i] > a[i + 1] && a[i] >= frac * max)
        .collect();
    peaks.sort_by(|&x, &y| a[y].partial_cmp(&a[x]).unwrap());
    peaks
}

/// Full width at half maximum around `peak`, GHz.
fn full_width(freqs: &[f64], a: &[f64], peak: usize) -> f64 {
    let half = a[peak] / 2.0;
    let mut l = peak;
    while l > 0 && a[l] > half {
        l -= 1;
    }
    let mut r = peak;
    while r + 1 < a.len() && a[r] > half {
        r += 1;
    }
    (freqs[r] - freqs[l]).abs().max(freqs[1] - freqs[0])
}

/// Fits one trace. Starting points come from the two strongest resolved
/// peaks of the smoothed trace, trying each as the zero-photon peak.
pub fn fit_number_split_trace(trace: &Trace) -> Result<NumberSplitFit> {
    let n = trace.freqs_ghz.len();
    if n < 10 || trace.amplitudes.len() != n {
        return Err(Error::Dataset(vec![format!(
            "{}: need at least 10 samples with matching columns",
            trace.label
        )]));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| trace.freqs_ghz[a].partial_cmp(&trace.freqs_ghz[b]).unwrap());
    let freqs: Vec<f64> = order.iter().map(|&i| trace.freqs_ghz[i]).collect();
    let amps: Vec<f64> = order.iter().map(|&i| trace.amplitudes[i]).collect();
    let smoothed = smooth(&amps, (n / 400).max(2));

    let peaks = find_peaks(&smoothed, 0.05);
    let Some(&p0) = peaks.first() else {
        return Err(Error::Dataset(vec![format!("{}: no peak found", trace.label)]));
    };
    let scale = smoothed[p0];
    if !(scale > 0.0) {
        return Err(Error::Dataset(vec![format!(
            "{}: trace has no positive peak",
            trace.label
        )]));
    }
    let width = full_width(&freqs, &smoothed, p0);
    let second = peaks.iter().copied().find(|&p| (freqs[p] - freqs[p0]).abs() > width);

    // (f0, two_chi MHz, n_bar, amplitude) candidates.
    let mut starts = Vec::new();
    match second {
        Some(p1) => {
            let ratio = (smoothed[p1] / scale).clamp(1e-3, 1.0);
            let spacing = (freqs[p1] - freqs[p0]) * 1e3;
            starts.push((freqs[p0], spacing, ratio, scale / (-ratio).exp()));
            // The stronger peak may be the one-photon line.
            let inv = (1.0 / ratio).min(5.0);
            starts.push((freqs[p1], -spacing, inv, smoothed[p1] / (-inv).exp()));
        }
        None => {
            for sign in [1.0, -1.0] {
                starts.push((freqs[p0], sign * 3.0 * width * 1e3, 0.01, scale));
            }
        }
    }

    // x = [sqrt(n_bar), two_chi (MHz), ln linewidth (MHz), f0 offset (MHz), ln amplitude/scale]
    let opts = NelderMeadOptions {
        f_tolerance: 1e-14,
        x_tolerance: 1e-7,
        initial_step: 0.1,
        max_iterations: 20_000,
    };
    let mut best: Option<(NumberSplitModel, Minimum<f64>)> = None;
    for (f0, two_chi, n_bar, amplitude) in starts {
        let unpack = |x: &[f64]| NumberSplitModel {
            n_bar: x[0] * x[0],
            two_chi: x[1],
            linewidth: x[2].exp(),
            f0: f0 + x[3] * 1e-3,
            amplitude: scale * x[4].exp(),
        };
        let objective = |x: &[f64]| {
            unpack(x)
                .curve(&freqs)
                .iter()
                .zip(&amps)
                .map(|(m, a)| ((m - a) / scale).powi(2))
                .sum::<f64>()
        };
        let start = [n_bar.sqrt(), two_chi, (width * 1e3).ln(), 0.0, (amplitude / scale).ln()];
        let mut m = nelder_mead(objective, &start, &opts);
        // A restart from the optimum sheds a collapsed simplex.
        let again = nelder_mead(objective, &m.x, &opts);
        if again.value <= m.value {
            m = Minimum {
                iterations: m.iterations + again.iterations,
                ..again
            };
        }
        if best.as_ref().is_none_or(|(_, b)| m.value < b.value) {
            best = Some((unpack(&m.x), m));
        }
    }
    let (model, m) = best.expect("at least one start");
    Ok(NumberSplitFit {
        label: trace.label.clone(),
        // Without a second resolved peak the spacing is not determined by the data.
        low_confidence: model.two_chi.abs() < model.linewidth || second.is_none(),
        model,
        rss: m.value * scale * scale,
        iterations: m.iterations,
        converged: m.converged,
    })
}

/// Fits every trace independently (in order).
pub fn fit_number_splitting(traces: &[Trace]) -> Result<Vec<NumberSplitFit>> {
    if traces.is_empty() {
        return Err(Error::Dataset(vec!["no traces".into()]));
    }
    traces.iter().map(fit_number_split_trace).collect()
}

/// Relative mismatch between a fitted peak spacing and `2 chi` from the
/// dressed spectrum (both MHz).
pub fn spacing_consistency(fitted_two_chi: f64, chi_mhz: f64) -> f64 {
    (fitted_two_chi.abs() - 2.0 * chi_mhz.abs()).abs() / (2.0 * chi_mhz.abs())
}
