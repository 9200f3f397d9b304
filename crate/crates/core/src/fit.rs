//! Two-stage spectroscopy fit: qubit energies from qubit lines, then
//! couplings from the full coupled model with the bare resonator frequency
//! held fixed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::{assemble, label_spectrum, CoupledParams, DressedSpectrum, ProductLabel, QubitSector};
use crate::dataset::{DataPoint, LineKind, LineLabel, SpectroscopyDataset};
use crate::error::{Error, Result};
use crate::optimize::{
    axis_uncertainties, gauss_newton_refine, nelder_mead, simplex_anisotropy, Minimum, NelderMeadOptions,
};
use crate::qubit::{converged_dim, diagonalize, QubitParams, QubitSolver, Truncation, DEFAULT_DIM};

/// Objective value (per unit weight) returned when the model cannot be
/// evaluated at a trial point.
pub const PENALTY: f64 = 1e6;
/// Coupling-stage coordinates are GHz divided by this.
const COUPLING_SCALE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub max_iterations: usize,
    /// Simplex spread of the weighted RSS, GHz^2.
    pub f_tolerance: f64,
    /// Simplex size in optimizer coordinates.
    pub x_tolerance: f64,
    /// Initial simplex step for the log-energies.
    pub energy_step: f64,
    /// Initial simplex step for couplings and resonator frequency, GHz.
    pub coupling_step_ghz: f64,
    /// Qubit basis size for stage 1; chosen from the initial guess when unset.
    pub qubit_dim: Option<usize>,
    pub n_qubit_levels: usize,
    pub n_photons: usize,
    /// Highest qubit level offered to unassigned points.
    pub candidate_levels: usize,
    /// Refit once at doubled truncation and report the parameter shift.
    pub verify_truncation: bool,
    pub truncation_tolerance: f64,
    /// Final-simplex anisotropy above which a degeneracy warning is issued.
    pub degeneracy_threshold: f64,
    /// Finish the pipeline with a joint fit of energies and couplings.
    pub joint_refinement: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            f_tolerance: 1e-7,
            x_tolerance: 1e-5,
            energy_step: 0.05,
            coupling_step_ghz: 0.005,
            qubit_dim: None,
            n_qubit_levels: 20,
            n_photons: 5,
            candidate_levels: 4,
            verify_truncation: true,
            truncation_tolerance: 1e-3,
            degeneracy_threshold: 100.0,
            joint_refinement: true,
        }
    }
}

impl FitOptions {
    fn nelder_mead(&self, step: f64) -> NelderMeadOptions {
        NelderMeadOptions {
            max_iterations: self.max_iterations,
            f_tolerance: self.f_tolerance,
            x_tolerance: self.x_tolerance,
            initial_step: step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// Curvature-based estimate.
    pub uncertainty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub index: usize,
    pub phi_ext: f64,
    pub observed: f64,
    /// NaN when the model failed at this flux.
    pub model: f64,
    /// Line the point was compared against.
    pub assigned: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruncationCheck {
    pub base: String,
    pub doubled: String,
    pub max_relative_shift: f64,
    pub within_tolerance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub stage: String,
    pub params: Vec<FittedParam>,
    /// Weighted residual sum of squares, GHz^2.
    pub rss: f64,
    pub n_points: usize,
    pub n_iterations: usize,
    pub n_evaluations: usize,
    pub converged: bool,
    pub simplex_anisotropy: f64,
    pub degenerate: bool,
    pub residuals: Vec<Residual>,
    pub truncation_check: Option<TruncationCheck>,
    pub warnings: Vec<String>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.params.iter().find(|p| p.name == name).map(|p| p.value)
    }
}

/// Model lines at one flux value.
#[derive(Debug, Clone, Default)]
pub struct ModelLines {
    labeled: BTreeMap<LineLabel, f64>,
    /// Offered to unassigned points (and to labeled points whose line is
    /// missing), in a fixed order.
    candidates: Vec<(LineLabel, f64)>,
}

impl ModelLines {
    /// Frequency a point is compared against, with the label used.
    fn assign(&self, p: &DataPoint) -> Option<(LineLabel, f64)> {
        if let Some(&f) = self.labeled.get(&p.label) {
            return Some((p.label, f));
        }
        self.candidates
            .iter()
            .copied()
            .min_by(|a, b| (a.1 - p.freq_ghz).abs().total_cmp(&(b.1 - p.freq_ghz).abs()))
    }
}

/// Weighted RSS over `points` given per-flux model lines. Terms are summed in
/// sorted order so the value does not depend on point order.
fn score(
    points: &[(usize, DataPoint)],
    flux: &[f64],
    lines: &[Option<ModelLines>],
    want_residuals: bool,
) -> (f64, Vec<Residual>) {
    let mut terms = Vec::with_capacity(points.len());
    let mut residuals = Vec::new();
    for (index, p) in points {
        let slot = flux.binary_search_by(|f| f.total_cmp(&p.phi_ext)).expect("flux listed");
        let assigned = lines[slot].as_ref().and_then(|l| l.assign(p));
        let (term, model, label) = match assigned {
            Some((label, f)) => (p.weight * (p.freq_ghz - f).powi(2), f, label.to_string()),
            None => (p.weight * PENALTY, f64::NAN, "model-failure".to_string()),
        };
        terms.push(term);
        if want_residuals {
            residuals.push(Residual {
                index: *index,
                phi_ext: p.phi_ext,
                observed: p.freq_ghz,
                model,
                assigned: label,
                weight: p.weight,
            });
        }
    }
    terms.sort_by(|a, b| a.total_cmp(b));
    (terms.iter().sum(), residuals)
}

/// Weighted residuals `sqrt(w) (observed - model)` in point order, or `None`
/// if the model failed anywhere.
fn residual_vector(points: &[(usize, DataPoint)], flux: &[f64], lines: &[Option<ModelLines>]) -> Option<Vec<f64>> {
    points
        .iter()
        .map(|(_, p)| {
            let slot = flux.binary_search_by(|f| f.total_cmp(&p.phi_ext)).ok()?;
            let (_, f) = lines[slot].as_ref()?.assign(p)?;
            Some(p.weight.sqrt() * (p.freq_ghz - f))
        })
        .collect()
}

fn unique_flux(points: &[(usize, DataPoint)]) -> Vec<f64> {
    let mut f: Vec<f64> = points.iter().map(|(_, p)| p.phi_ext).collect();
    f.sort_by(|a, b| a.total_cmp(b));
    f.dedup();
    f
}

fn qubit_lines(energies: &[f64], candidate_levels: usize, replicas: usize, omega_r: Option<f64>) -> ModelLines {
    let mut out = ModelLines::default();
    let n = energies.len();
    for i in 0..n {
        for j in i + 1..n {
            let f = energies[j] - energies[i];
            out.labeled.insert(
                LineLabel::Qubit {
                    from: i,
                    to: j,
                    photons: 0,
                },
                f,
            );
            if let Some(w) = omega_r {
                for k in 1..=replicas.max(3) {
                    out.labeled.insert(
                        LineLabel::Qubit {
                            from: i,
                            to: j,
                            photons: k,
                        },
                        f + k as f64 * w,
                    );
                }
            }
        }
    }
    for j in 1..=candidate_levels.min(n - 1) {
        out.candidates.push((
            LineLabel::Qubit {
                from: 0,
                to: j,
                photons: 0,
            },
            energies[j] - energies[0],
        ));
        if let Some(w) = omega_r {
            for k in 1..=replicas {
                out.candidates.push((
                    LineLabel::Qubit {
                        from: 0,
                        to: j,
                        photons: k,
                    },
                    energies[j] - energies[0] + k as f64 * w,
                ));
            }
        }
    }
    out
}

fn dressed_lines(spec: &DressedSpectrum<f64>, candidate_levels: usize, replicas: usize) -> ModelLines {
    let mut out = ModelLines::default();
    let e0 = spec.states[0].energy;
    if let Ok(e) = spec.energy_of(ProductLabel::new(0, 1)) {
        out.labeled.insert(LineLabel::Resonator, e - e0);
    }
    for i in 0..spec.n_qubit_levels.min(candidate_levels + 1) {
        let Ok(ei) = spec.energy_of(ProductLabel::new(i, 0)) else {
            continue;
        };
        for j in i + 1..spec.n_qubit_levels.min(candidate_levels + 1) {
            for k in 0..spec.n_photons {
                if let Ok(ej) = spec.energy_of(ProductLabel::new(j, k)) {
                    out.labeled.insert(
                        LineLabel::Qubit {
                            from: i,
                            to: j,
                            photons: k,
                        },
                        ej - ei,
                    );
                }
            }
        }
    }
    for line in spec.transitions() {
        let l = line.label;
        let accept = l.parasitic == 0
            && l.qubit <= candidate_levels
            && (l.photons <= replicas || (l.qubit == 0 && l.photons == 1));
        if !accept {
            continue;
        }
        let label = if l.qubit == 0 && l.photons == 1 {
            LineLabel::Resonator
        } else if l.qubit == 0 {
            continue;
        } else {
            LineLabel::Qubit {
                from: 0,
                to: l.qubit,
                photons: l.photons,
            }
        };
        out.candidates.push((label, line.freq));
    }
    out
}

fn indexed(dataset: &SpectroscopyDataset, kind: Option<LineKind>) -> Vec<(usize, DataPoint)> {
    dataset
        .points
        .iter()
        .copied()
        .enumerate()
        .filter(|(_, p)| kind.is_none_or(|k| p.kind == k))
        .collect()
}

fn check_replica_labels(points: &[(usize, DataPoint)], omega_r: Option<f64>) -> Result<()> {
    let missing: Vec<String> = points
        .iter()
        .filter(|(_, p)| matches!(p.label, LineLabel::Qubit { photons, .. } if photons > 0))
        .map(|(i, p)| {
            format!(
                "point {}: label {} needs omega_r_ghz in the dataset metadata",
                i + 1,
                p.label
            )
        })
        .collect();
    if omega_r.is_none() && !missing.is_empty() {
        return Err(Error::Dataset(missing));
    }
    Ok(())
}

/// Stage-1 objective: weighted RSS of qubit-line points against the bare
/// qubit spectrum at basis size `dim`.
pub fn qubit_objective(
    dataset: &SpectroscopyDataset,
    params: &QubitParams<f64>,
    dim: usize,
    options: &FitOptions,
) -> f64 {
    let points = indexed(dataset, Some(LineKind::QubitLine));
    let flux = unique_flux(&points);
    let lines = stage1_lines(dataset, &flux, params.e_l, params.e_c, params.e_j, dim, options);
    score(&points, &flux, &lines, false).0
}

fn stage1_lines(
    dataset: &SpectroscopyDataset,
    flux: &[f64],
    e_l: f64,
    e_c: f64,
    e_j: f64,
    dim: usize,
    options: &FitOptions,
) -> Vec<Option<ModelLines>> {
    let Ok(solver) = QubitSolver::new(e_l, e_c, dim) else {
        return vec![None; flux.len()];
    };
    let levels = (options.candidate_levels + 1).max(2).min(dim);
    flux.par_iter()
        .map(|&phi| {
            let e = solver.energies(e_j, phi).ok()?;
            let e: Vec<f64> = e.iter().take(levels).copied().collect();
            Some(qubit_lines(
                &e,
                options.candidate_levels,
                dataset.meta.max_photon_replicas,
                dataset.meta.omega_r_ghz,
            ))
        })
        .collect()
}

fn log_energies(p: &QubitParams<f64>) -> Result<[f64; 3]> {
    if !(p.e_l > 0.0 && p.e_c > 0.0 && p.e_j > 0.0) {
        return Err(Error::InvalidParameter(
            "initial E_L, E_C and E_J must be positive for the log-parameterized fit".into(),
        ));
    }
    Ok([p.e_l.ln(), p.e_c.ln(), p.e_j.ln()])
}

fn run_stage1(
    dataset: &SpectroscopyDataset,
    points: &[(usize, DataPoint)],
    flux: &[f64],
    start: [f64; 3],
    dim: usize,
    step: f64,
    options: &FitOptions,
) -> Minimum<f64> {
    let objective = |x: &[f64]| {
        let lines = stage1_lines(dataset, flux, x[0].exp(), x[1].exp(), x[2].exp(), dim, options);
        score(points, flux, &lines, false).0
    };
    nelder_mead(objective, &start, &options.nelder_mead(step))
}

fn stage1_preconditions(points: &[(usize, DataPoint)], flux: &[f64]) -> Result<()> {
    if points.len() < 6 || flux.len() < 2 {
        return Err(Error::Dataset(vec![format!(
            "qubit fit needs at least 6 qubit-line points at 2 or more flux values (got {} points at {} flux values)",
            points.len(),
            flux.len()
        )]));
    }
    Ok(())
}

/// Fits `(E_L, E_C, E_J)` to the qubit-line points.
pub fn fit_qubit_params(
    dataset: &SpectroscopyDataset,
    initial: &QubitParams<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    dataset.validate()?;
    let points = indexed(dataset, Some(LineKind::QubitLine));
    let flux = unique_flux(&points);
    stage1_preconditions(&points, &flux)?;
    check_replica_labels(&points, dataset.meta.omega_r_ghz)?;
    let start = log_energies(initial)?;
    let dim = match options.qubit_dim {
        Some(d) => d,
        None => converged_dim(&initial.with_flux(0.5), Truncation::default())?.max(DEFAULT_DIM),
    };

    let m = run_stage1(dataset, &points, &flux, start, dim, options.energy_step, options);
    let mut warnings = Vec::new();
    if !m.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations without meeting tolerances",
            m.iterations
        ));
    }
    let objective = |x: &[f64]| {
        let lines = stage1_lines(dataset, &flux, x[0].exp(), x[1].exp(), x[2].exp(), dim, options);
        score(&points, &flux, &lines, false).0
    };
    let unc = axis_uncertainties(objective, &m.x, 1e-3, m.value, points.len().saturating_sub(3));

    let mut x = m.x.clone();
    let mut used_dim = dim;
    let mut check = None;
    if options.verify_truncation {
        let doubled = 2 * dim;
        let residuals = |x: &[f64]| {
            let lines = stage1_lines(dataset, &flux, x[0].exp(), x[1].exp(), x[2].exp(), doubled, options);
            residual_vector(&points, &flux, &lines)
        };
        let (c, refined) = truncation_check(
            residuals,
            &m.x,
            1e-5,
            |a, b| (b.exp() / a.exp() - 1.0).abs(),
            format!("qubit basis {dim}"),
            format!("qubit basis {doubled}"),
            options,
            &mut warnings,
        );
        check = Some(c);
        if let Some(r) = refined {
            x = r;
            used_dim = doubled;
        }
    }

    let lines = stage1_lines(dataset, &flux, x[0].exp(), x[1].exp(), x[2].exp(), used_dim, options);
    let (rss, residuals) = score(&points, &flux, &lines, true);
    let names = ["e_l", "e_c", "e_j"];
    let params = (0..3)
        .map(|i| FittedParam {
            name: names[i].to_string(),
            value: x[i].exp(),
            uncertainty: unc[i].map(|s| x[i].exp() * s),
        })
        .collect();
    let anis = simplex_anisotropy(&m.simplex);
    Ok(FitResult {
        stage: "qubit".into(),
        params,
        rss,
        n_points: points.len(),
        n_iterations: m.iterations,
        n_evaluations: m.evaluations,
        converged: m.converged,
        simplex_anisotropy: anis,
        degenerate: false,
        residuals,
        truncation_check: check,
        warnings,
    })
}

/// Re-solves the least-squares problem at doubled truncation by Gauss-Newton
/// from `x` and compares. Returns the check and the refined point when the
/// doubled model evaluated cleanly.
#[allow(clippy::too_many_arguments)]
fn truncation_check<F>(
    residuals: F,
    x: &[f64],
    h: f64,
    relative_shift: impl Fn(f64, f64) -> f64,
    base: String,
    doubled: String,
    options: &FitOptions,
    warnings: &mut Vec<String>,
) -> (TruncationCheck, Option<Vec<f64>>)
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let Some(refined) = gauss_newton_refine(residuals, x, h, 2) else {
        warnings.push(format!("model failed at {doubled}; truncation not verified"));
        let check = TruncationCheck {
            base,
            doubled,
            max_relative_shift: f64::NAN,
            within_tolerance: false,
        };
        return (check, None);
    };
    let shift = x
        .iter()
        .zip(&refined)
        .map(|(a, b)| relative_shift(*a, *b))
        .fold(0.0, f64::max);
    let ok = shift < options.truncation_tolerance;
    if !ok {
        warnings.push(format!(
            "going from {base} to {doubled} moved the parameters by {:.3}%; reporting the larger-truncation values",
            shift * 100.0
        ));
    }
    let check = TruncationCheck {
        base,
        doubled,
        max_relative_shift: shift,
        within_tolerance: ok,
    };
    (check, Some(refined))
}

/// Bare qubit sectors per flux, computed once for the coupling stage.
struct CouplingModel<'a> {
    dataset: &'a SpectroscopyDataset,
    points: Vec<(usize, DataPoint)>,
    flux: Vec<f64>,
    sectors: Vec<QubitSector<f64>>,
    n_qubit_levels: usize,
    n_photons: usize,
    options: FitOptions,
}

impl<'a> CouplingModel<'a> {
    fn new(
        dataset: &'a SpectroscopyDataset,
        qubit: &QubitParams<f64>,
        n_qubit_levels: usize,
        n_photons: usize,
        options: &FitOptions,
    ) -> Result<Self> {
        let points = indexed(dataset, None);
        let flux = unique_flux(&points);
        let dim = converged_dim(&qubit.with_flux(0.5), Truncation::default())?.max(n_qubit_levels);
        let sectors = flux
            .par_iter()
            .map(|&phi| {
                let s = diagonalize(&qubit.with_flux(phi), Truncation::Fixed(dim))?;
                QubitSector::from_spectrum(&s, n_qubit_levels)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            dataset,
            points,
            flux,
            sectors,
            n_qubit_levels,
            n_photons,
            options: *options,
        })
    }

    fn lines(&self, g_c: f64, g_l: f64, omega_r: f64) -> Vec<Option<ModelLines>> {
        if !(omega_r > 0.0) {
            return vec![None; self.flux.len()];
        }
        self.sectors
            .par_iter()
            .map(|sector| {
                let h = assemble(sector, omega_r, g_c, g_l, self.n_photons, None, usize::MAX).ok()?;
                let spec = label_spectrum(h, self.n_qubit_levels, self.n_photons, 1).ok()?;
                Some(dressed_lines(
                    &spec,
                    self.options.candidate_levels,
                    self.dataset.meta.max_photon_replicas.max(1),
                ))
            })
            .collect()
    }

    fn rss(&self, g_c: f64, g_l: f64, omega_r: f64) -> f64 {
        score(&self.points, &self.flux, &self.lines(g_c, g_l, omega_r), false).0
    }
}

/// Stage-2 objective at fixed qubit parameters.
pub fn coupling_objective(dataset: &SpectroscopyDataset, p: &CoupledParams<f64>, options: &FitOptions) -> Result<f64> {
    let model = CouplingModel::new(dataset, &p.qubit, p.n_qubit_levels, p.n_photons, options)?;
    Ok(model.rss(p.g_c, p.g_l, p.omega_r))
}

#[allow(clippy::too_many_arguments)]
fn coupling_result(
    model: &CouplingModel,
    m: &Minimum<f64>,
    final_model: &CouplingModel,
    x: &[f64],
    names: &[&str],
    fixed_omega: Option<f64>,
    options: &FitOptions,
    check: Option<TruncationCheck>,
    mut warnings: Vec<String>,
) -> FitResult {
    let unpack = |x: &[f64]| {
        (
            x[0] * COUPLING_SCALE,
            x[1] * COUPLING_SCALE,
            fixed_omega.unwrap_or_else(|| x.get(2).copied().unwrap_or(0.0) * COUPLING_SCALE),
        )
    };
    let objective = |x: &[f64]| {
        let (a, b, w) = unpack(x);
        model.rss(a, b, w)
    };
    let unc = axis_uncertainties(
        objective,
        &m.x,
        1e-2,
        m.value,
        model.points.len().saturating_sub(names.len()),
    );
    let (g_c, g_l, w) = unpack(x);
    let (rss, residuals) = score(
        &final_model.points,
        &final_model.flux,
        &final_model.lines(g_c, g_l, w),
        true,
    );
    let anis = simplex_anisotropy(&m.simplex);
    let degenerate = anis > options.degeneracy_threshold;
    if degenerate {
        warnings.push(format!(
            "final simplex anisotropy {anis:.3e}: the residual surface is flat along a contour in ({}); \
             the couplings are not individually determined",
            names.join(", ")
        ));
    }
    if !m.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations without meeting tolerances",
            m.iterations
        ));
    }
    let sign = coupling_sign(x[0], x[1]);
    let params = names
        .iter()
        .enumerate()
        .map(|(i, n)| FittedParam {
            name: n.to_string(),
            value: if i < 2 {
                sign * x[i] * COUPLING_SCALE
            } else {
                x[i] * COUPLING_SCALE
            },
            uncertainty: unc[i].map(|s| s * COUPLING_SCALE),
        })
        .collect();
    FitResult {
        stage: "coupling".into(),
        params,
        rss,
        n_points: model.points.len(),
        n_iterations: m.iterations,
        n_evaluations: m.evaluations,
        converged: m.converged,
        simplex_anisotropy: anis,
        degenerate,
        residuals,
        truncation_check: check,
        warnings,
    }
}

/// Flipping the sign of both couplings (`a -> -a`) leaves the spectrum
/// unchanged; results are reported with `g_C >= 0`.
fn coupling_sign(g_c: f64, g_l: f64) -> f64 {
    if g_c < 0.0 || (g_c == 0.0 && g_l < 0.0) {
        -1.0
    } else {
        1.0
    }
}

fn coupling_preconditions(dataset: &SpectroscopyDataset, omega_r: f64) -> Result<()> {
    dataset.validate()?;
    if !(omega_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "omega_r must be positive, got {omega_r}"
        )));
    }
    Ok(())
}

/// Fits `(g_C, g_L)` with the qubit and the bare resonator frequency fixed.
pub fn fit_coupling_params(
    dataset: &SpectroscopyDataset,
    qubit: &QubitParams<f64>,
    omega_r: f64,
    initial: (f64, f64),
    options: &FitOptions,
) -> Result<FitResult> {
    coupling_preconditions(dataset, omega_r)?;
    let model = CouplingModel::new(dataset, qubit, options.n_qubit_levels, options.n_photons, options)?;
    let step = options.coupling_step_ghz / COUPLING_SCALE;
    let start = [initial.0 / COUPLING_SCALE, initial.1 / COUPLING_SCALE];
    let objective = |x: &[f64]| model.rss(x[0] * COUPLING_SCALE, x[1] * COUPLING_SCALE, omega_r);
    let m = nelder_mead(objective, &start, &options.nelder_mead(step));
    let mut warnings = Vec::new();
    if options.verify_truncation {
        let big = CouplingModel::new(
            dataset,
            qubit,
            2 * options.n_qubit_levels,
            2 * options.n_photons,
            options,
        )?;
        let residuals = |x: &[f64]| {
            let lines = big.lines(x[0] * COUPLING_SCALE, x[1] * COUPLING_SCALE, omega_r);
            residual_vector(&big.points, &big.flux, &lines)
        };
        let (check, refined) = truncation_check(
            residuals,
            &m.x,
            1e-4,
            |a, b| (b - a).abs() / a.abs().max(0.1),
            format!(
                "{} qubit levels x {} photons",
                options.n_qubit_levels, options.n_photons
            ),
            format!(
                "{} qubit levels x {} photons",
                2 * options.n_qubit_levels,
                2 * options.n_photons
            ),
            options,
            &mut warnings,
        );
        let (final_model, x) = match refined {
            Some(x) => (&big, x),
            None => (&model, m.x.clone()),
        };
        return Ok(coupling_result(
            &model,
            &m,
            final_model,
            &x,
            &["g_c", "g_l"],
            Some(omega_r),
            options,
            Some(check),
            warnings,
        ));
    }
    Ok(coupling_result(
        &model,
        &m,
        &model,
        &m.x,
        &["g_c", "g_l"],
        Some(omega_r),
        options,
        None,
        warnings,
    ))
}

/// Fits `(g_C, g_L, omega_r)` together. Only two of the three are
/// independent, so different starts can land on different equally good
/// solutions.
pub fn fit_coupling_free_resonator(
    dataset: &SpectroscopyDataset,
    qubit: &QubitParams<f64>,
    initial: (f64, f64, f64),
    options: &FitOptions,
) -> Result<FitResult> {
    coupling_preconditions(dataset, initial.2)?;
    let model = CouplingModel::new(dataset, qubit, options.n_qubit_levels, options.n_photons, options)?;
    let step = options.coupling_step_ghz / COUPLING_SCALE;
    let start = [
        initial.0 / COUPLING_SCALE,
        initial.1 / COUPLING_SCALE,
        initial.2 / COUPLING_SCALE,
    ];
    let objective = |x: &[f64]| model.rss(x[0] * COUPLING_SCALE, x[1] * COUPLING_SCALE, x[2] * COUPLING_SCALE);
    let m = nelder_mead(objective, &start, &options.nelder_mead(step));
    Ok(coupling_result(
        &model,
        &m,
        &model,
        &m.x,
        &["g_c", "g_l", "omega_r"],
        None,
        options,
        None,
        Vec::new(),
    ))
}

fn dressed_qubit_lines(
    dataset: &SpectroscopyDataset,
    flux: &[f64],
    e: [f64; 3],
    couplings: (f64, f64, f64),
    dim: usize,
    options: &FitOptions,
) -> Vec<Option<ModelLines>> {
    let (omega_r, g_c, g_l) = couplings;
    let Ok(solver) = QubitSolver::new(e[0], e[1], dim) else {
        return vec![None; flux.len()];
    };
    flux.par_iter()
        .map(|&phi| {
            let spec = solver.solve(e[2], phi).ok()?;
            let sector = QubitSector::from_spectrum(&spec, options.n_qubit_levels).ok()?;
            let h = assemble(&sector, omega_r, g_c, g_l, options.n_photons, None, usize::MAX).ok()?;
            let dressed = label_spectrum(h, options.n_qubit_levels, options.n_photons, 1).ok()?;
            Some(dressed_lines(
                &dressed,
                options.candidate_levels,
                dataset.meta.max_photon_replicas.max(1),
            ))
        })
        .collect()
}

/// Joint-stage coordinates are parameters divided by these steps, so the
/// initial simplex has unit size.
fn joint_steps(options: &FitOptions) -> [f64; 5] {
    let e = options.energy_step / 5.0;
    let g = options.coupling_step_ghz;
    [e, e, e, g, g]
}

/// Polishes `(E_L, E_C, E_J, g_C, g_L)` together against every point using the
/// dressed coupled model, with the resonator frequency fixed. Removes the bias
/// that qubit-line dressing leaves in the bare-model energies.
pub fn fit_joint(
    dataset: &SpectroscopyDataset,
    qubit: &QubitParams<f64>,
    omega_r: f64,
    couplings: (f64, f64),
    options: &FitOptions,
) -> Result<FitResult> {
    coupling_preconditions(dataset, omega_r)?;
    let points = indexed(dataset, None);
    let flux = unique_flux(&points);
    let le = log_energies(qubit)?;
    let dim = converged_dim(&qubit.with_flux(0.5), Truncation::default())?.max(options.n_qubit_levels);
    let steps = joint_steps(options);
    let unscale = |x: &[f64]| -> ([f64; 3], (f64, f64, f64)) {
        let e = [
            (x[0] * steps[0]).exp(),
            (x[1] * steps[1]).exp(),
            (x[2] * steps[2]).exp(),
        ];
        (e, (omega_r, x[3] * steps[3], x[4] * steps[4]))
    };
    let model = |x: &[f64], o: &FitOptions, d: usize| {
        let (e, c) = unscale(x);
        dressed_qubit_lines(dataset, &flux, e, c, d, o)
    };
    let objective = |x: &[f64]| score(&points, &flux, &model(x, options, dim), false).0;
    let start: Vec<f64> = [le[0], le[1], le[2], couplings.0, couplings.1]
        .iter()
        .zip(&steps)
        .map(|(v, s)| v / s)
        .collect();
    let nm = NelderMeadOptions {
        initial_step: 1.0,
        ..options.nelder_mead(1.0)
    };
    let m = nelder_mead(objective, &start, &nm);
    let unc = axis_uncertainties(objective, &m.x, 0.05, m.value, points.len().saturating_sub(5));
    let mut warnings = Vec::new();
    if !m.converged {
        warnings.push(format!(
            "optimizer stopped after {} iterations without meeting tolerances",
            m.iterations
        ));
    }

    let mut x = m.x.clone();
    let mut used = (*options, dim);
    let mut check = None;
    if options.verify_truncation {
        let big = FitOptions {
            n_qubit_levels: 2 * options.n_qubit_levels,
            n_photons: 2 * options.n_photons,
            ..*options
        };
        let big_dim = dim.max(big.n_qubit_levels);
        let residuals = |x: &[f64]| residual_vector(&points, &flux, &model(x, &big, big_dim));
        let (c, refined) = truncation_check(
            residuals,
            &m.x,
            1e-2,
            |a, b| (b - a).abs() / a.abs().max(1.0),
            format!(
                "{} qubit levels x {} photons",
                options.n_qubit_levels, options.n_photons
            ),
            format!("{} qubit levels x {} photons", big.n_qubit_levels, big.n_photons),
            options,
            &mut warnings,
        );
        check = Some(c);
        if let Some(r) = refined {
            x = r;
            used = (big, big_dim);
        }
    }

    let (rss, residuals) = score(&points, &flux, &model(&x, &used.0, used.1), true);
    let anis = simplex_anisotropy(&m.simplex);
    let degenerate = anis > options.degeneracy_threshold;
    if degenerate {
        warnings.push(format!(
            "final simplex anisotropy {anis:.3e}: the residual surface is flat along a contour in parameter space"
        ));
    }
    let (e, (_, g_c, g_l)) = unscale(&x);
    let sign = coupling_sign(g_c, g_l);
    let values = [e[0], e[1], e[2], sign * g_c, sign * g_l];
    let names = ["e_l", "e_c", "e_j", "g_c", "g_l"];
    let params = (0..5)
        .map(|i| FittedParam {
            name: names[i].to_string(),
            value: values[i],
            uncertainty: unc[i].map(|s| if i < 3 { values[i] * s * steps[i] } else { s * steps[i] }),
        })
        .collect();
    Ok(FitResult {
        stage: "joint".into(),
        params,
        rss,
        n_points: points.len(),
        n_iterations: m.iterations,
        n_evaluations: m.evaluations,
        converged: m.converged,
        simplex_anisotropy: anis,
        degenerate,
        residuals,
        truncation_check: check,
        warnings,
    })
}

/// Starting point for the full pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineInitial {
    pub qubit: QubitParams<f64>,
    /// Bare resonator frequency, GHz (held fixed).
    pub omega_r: f64,
    pub g_c: f64,
    pub g_l: f64,
}

/// Stage results in the order they ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub stages: Vec<FitResult>,
}

impl PipelineReport {
    /// Final qubit energies: the joint stage when it ran, else stage 1.
    pub fn qubit(&self) -> &FitResult {
        self.stages
            .iter()
            .rev()
            .find(|s| s.stage != "coupling")
            .expect("stage 1 always runs")
    }

    /// Final couplings: the joint stage when it ran, else stage 2.
    pub fn coupling(&self) -> Option<&FitResult> {
        self.stages.iter().rev().find(|s| s.stage != "qubit")
    }
}

fn fitted_qubit(r: &FitResult) -> Result<QubitParams<f64>> {
    let v = |n: &str| {
        r.value(n)
            .ok_or_else(|| Error::InvalidParameter(format!("stage result lacks {n}")))
    };
    QubitParams::new(v("e_l")?, v("e_c")?, v("e_j")?, 0.0)
}

/// Stage 1 (bare qubit model) then stage 2 (couplings at fixed qubit and
/// resonator frequency), then optionally a joint polish of all five. The
/// coupling stages are skipped when the dataset has no resonator-line points.
pub fn fit_pipeline(
    dataset: &SpectroscopyDataset,
    initial: &PipelineInitial,
    options: &FitOptions,
) -> Result<PipelineReport> {
    dataset.validate()?;
    let stage1 = fit_qubit_params(dataset, &initial.qubit, options)?;
    if dataset.of_kind(LineKind::ResonatorLine).next().is_none() {
        return Ok(PipelineReport { stages: vec![stage1] });
    }
    let qubit = fitted_qubit(&stage1)?;
    let stage2_opts = FitOptions {
        verify_truncation: options.verify_truncation && !options.joint_refinement,
        ..*options
    };
    let stage2 = fit_coupling_params(
        dataset,
        &qubit,
        initial.omega_r,
        (initial.g_c, initial.g_l),
        &stage2_opts,
    )?;
    let mut stages = vec![stage1, stage2];
    if options.joint_refinement {
        let fitted = (
            stages[1].value("g_c").expect("fitted"),
            stages[1].value("g_l").expect("fitted"),
        );
        let p = |g: (f64, f64)| CoupledParams {
            g_c: g.0,
            g_l: g.1,
            ..CoupledParams::new(qubit, initial.omega_r, 0.0, 0.0).expect("validated")
        };
        let start = if coupling_objective(dataset, &p((initial.g_c, initial.g_l)), options)?
            < coupling_objective(dataset, &p(fitted), options)?
        {
            (initial.g_c, initial.g_l)
        } else {
            fitted
        };
        stages.push(fit_joint(dataset, &qubit, initial.omega_r, start, options)?);
    }
    Ok(PipelineReport { stages })
}

/// Noiseless points on labeled lines, for round-trip tests and fixtures.
/// `transitions` are `(from, to)` pairs of the bare qubit.
pub fn synthesize_qubit_lines(
    params: &QubitParams<f64>,
    flux: &[f64],
    transitions: &[(usize, usize)],
) -> Result<Vec<DataPoint>> {
    let mut out = Vec::new();
    for &phi in flux {
        let s = diagonalize(&params.with_flux(phi), Truncation::default())?;
        for &(i, j) in transitions {
            out.push(DataPoint {
                phi_ext: phi,
                freq_ghz: s.transition(i, j),
                label: LineLabel::Qubit {
                    from: i,
                    to: j,
                    photons: 0,
                },
                weight: 1.0,
                kind: LineKind::QubitLine,
            });
        }
    }
    Ok(out)
}

/// Noiseless dressed resonator line (`r:disp`) and dressed `0 -> j` qubit
/// lines from the coupled model.
pub fn synthesize_coupled_lines(
    p: &CoupledParams<f64>,
    flux: &[f64],
    qubit_levels: &[usize],
) -> Result<Vec<DataPoint>> {
    let mut out = Vec::new();
    for &phi in flux {
        let spec = crate::coupled::solve_coupled(&p.with_flux(phi))?;
        let e0 = spec.states[0].energy;
        out.push(DataPoint {
            phi_ext: phi,
            freq_ghz: spec.energy_of(ProductLabel::new(0, 1))? - e0,
            label: LineLabel::Resonator,
            weight: 1.0,
            kind: LineKind::ResonatorLine,
        });
        for &j in qubit_levels {
            out.push(DataPoint {
                phi_ext: phi,
                freq_ghz: spec.energy_of(ProductLabel::new(j, 0))? - e0,
                label: LineLabel::Qubit {
                    from: 0,
                    to: j,
                    photons: 0,
                },
                weight: 1.0,
                kind: LineKind::QubitLine,
            });
        }
    }
    Ok(out)
}
