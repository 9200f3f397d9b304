//! Photon-number-split lineshapes: fit measured traces or render a model.

use std::path::PathBuf;

use clap::Args;
use rfsquid::coupled::dispersive_shift;
use rfsquid::noise::{fit_number_splitting, read_trace_csv, spacing_consistency, NumberSplitFit, NumberSplitModel};
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, QubitArgs, QubitSection, Sweep};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct NumberSplitArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Trace CSV (`freq_ghz,amplitude`), one per drive power; repeatable.
    #[arg(long = "trace")]
    pub traces: Vec<PathBuf>,
    /// Render this mean photon number instead of fitting.
    #[arg(long)]
    pub n_bar: Option<f64>,
    /// Peak spacing, MHz.
    #[arg(long)]
    pub two_chi: Option<f64>,
    /// Lorentzian FWHM, MHz.
    #[arg(long)]
    pub linewidth: Option<f64>,
    /// Zero-photon peak, GHz.
    #[arg(long)]
    pub f0: Option<f64>,
    /// Compare spacings with the dispersive shift of this device.
    #[command(flatten)]
    pub qubit: QubitArgs,
    /// Flux for the dispersive-shift comparison, flux quanta.
    #[arg(long)]
    pub flux: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n_bar: f64,
    pub two_chi: f64,
    pub linewidth: f64,
    pub f0: f64,
    pub amplitude: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n_bar: 0.3,
            two_chi: 10.0,
            linewidth: 2.0,
            f0: 6.0,
            amplitude: 1.0,
        }
    }
}

/// Coupled system whose `2 chi` the fitted spacings are compared with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossCheckSection {
    pub qubit: QubitSection,
    pub omega_r: Option<f64>,
    pub g_c: Option<f64>,
    pub g_l: Option<f64>,
    pub flux: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NumberSplitConfig {
    pub traces: Vec<PathBuf>,
    pub model: Option<ModelSection>,
    /// Frequency axis for model rendering, GHz.
    pub axis: Option<Sweep>,
    pub cross_check: Option<CrossCheckSection>,
}

#[derive(Serialize)]
struct CrossCheck {
    chi_mhz: f64,
    two_chi_mhz: f64,
    /// Relative spacing mismatch per fitted trace.
    mismatch: Vec<f64>,
}

#[derive(Serialize)]
struct Summary {
    fits: Vec<NumberSplitFit>,
    model: Option<NumberSplitModel>,
    cross_check: Option<CrossCheck>,
}

fn resolve(args: &NumberSplitArgs) -> CliResult<NumberSplitConfig> {
    let mut cfg: NumberSplitConfig = load(args.io.config.as_deref())?;
    if !args.traces.is_empty() {
        cfg.traces = args.traces.clone();
    }
    if args.n_bar.is_some() || args.two_chi.is_some() || args.linewidth.is_some() || args.f0.is_some() {
        let m = cfg.model.get_or_insert_with(Default::default);
        m.n_bar = args.n_bar.unwrap_or(m.n_bar);
        m.two_chi = args.two_chi.unwrap_or(m.two_chi);
        m.linewidth = args.linewidth.unwrap_or(m.linewidth);
        m.f0 = args.f0.unwrap_or(m.f0);
    }
    if args.qubit.preset.is_some() || args.qubit.e_l.is_some() || args.flux.is_some() {
        let c = cfg.cross_check.get_or_insert_with(Default::default);
        c.qubit.apply(&args.qubit);
        if let Some(f) = args.flux {
            c.flux = f;
        }
    }
    if cfg.traces.is_empty() == cfg.model.is_none() {
        return Err(usage(
            "give either traces to fit (--trace FILE) or a model to render (--n-bar ...), not both",
        ));
    }
    if let Some(c) = cfg.cross_check.as_mut() {
        c.qubit.resolve()?;
        if let Some(d) = c.qubit.device()? {
            let table = d.coupled(0.0)?;
            c.omega_r.get_or_insert(d.omega_r());
            c.g_c.get_or_insert(table.g_c);
            c.g_l.get_or_insert(table.g_l);
        }
        if c.omega_r.is_none() || c.g_c.is_none() || c.g_l.is_none() {
            return Err(usage("cross_check needs omega_r, g_c and g_l (or a preset)"));
        }
    }
    Ok(cfg)
}

fn default_axis(m: &NumberSplitModel) -> Sweep {
    let lw = m.linewidth * 1e-3;
    let span = m.two_chi * 1e-3 * (m.n_bar + 3.0 * m.n_bar.sqrt() + 2.0);
    let (lo, hi) = if span >= 0.0 { (0.0, span) } else { (span, 0.0) };
    Sweep::new(m.f0 + lo - 5.0 * lw, m.f0 + hi + 5.0 * lw, 801)
}

pub fn run(args: NumberSplitArgs) -> CliResult<Outputs> {
    let mut cfg = resolve(&args)?;
    let mut out = Outputs::default();
    let mut summary = Summary {
        fits: Vec::new(),
        model: None,
        cross_check: None,
    };

    if let Some(m) = cfg.model {
        let model = NumberSplitModel {
            n_bar: m.n_bar,
            two_chi: m.two_chi,
            linewidth: m.linewidth,
            f0: m.f0,
            amplitude: m.amplitude,
        };
        model.validate()?;
        let axis = *cfg.axis.get_or_insert_with(|| default_axis(&model));
        axis.validate("axis")?;
        let freqs = axis.values();
        let amps = model.curve(&freqs);
        let mut table = Table::new(&["freq_ghz", "amplitude"]);
        for (f, a) in freqs.iter().zip(&amps) {
            table.push(vec![num(*f), num(*a)]);
        }
        out.csv("numbersplit.csv", table);
        summary.model = Some(model);
    } else {
        let traces = cfg
            .traces
            .iter()
            .map(|p| {
                let file =
                    std::fs::File::open(p).map_err(|e| usage(format!("cannot read trace {}: {e}", p.display())))?;
                let label = p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                Ok(read_trace_csv(&label, file)?)
            })
            .collect::<CliResult<Vec<_>>>()?;
        summary.fits = fit_number_splitting(&traces)?;
        let mut table = Table::new(&[
            "label",
            "n_bar",
            "two_chi_mhz",
            "linewidth_mhz",
            "f0_ghz",
            "amplitude",
            "rss",
            "converged",
            "low_confidence",
        ]);
        for f in &summary.fits {
            let m = &f.model;
            table.push(vec![
                f.label.clone(),
                num(m.n_bar),
                num(m.two_chi),
                num(m.linewidth),
                num(m.f0),
                num(m.amplitude),
                num(f.rss),
                f.converged.to_string(),
                f.low_confidence.to_string(),
            ]);
        }
        out.csv("numbersplit.csv", table);
    }

    if let Some(c) = cfg.cross_check.as_mut() {
        let q = c.qubit.resolve()?;
        let p = rfsquid::coupled::CoupledParams::new(q, c.omega_r.unwrap(), c.g_c.unwrap(), c.g_l.unwrap())?;
        let chi = dispersive_shift(&p, c.flux)?;
        let spacings: Vec<f64> = match &summary.model {
            Some(m) => vec![m.two_chi],
            None => summary.fits.iter().map(|f| f.model.two_chi).collect(),
        };
        summary.cross_check = Some(CrossCheck {
            chi_mhz: chi,
            two_chi_mhz: 2.0 * chi,
            mismatch: spacings.iter().map(|s| spacing_consistency(*s, chi)).collect(),
        });
    }
    out.json("numbersplit.json", "numbersplit", &cfg, &summary);
    Ok(out)
}
