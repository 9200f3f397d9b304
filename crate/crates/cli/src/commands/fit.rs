//! Two-stage spectroscopy fit of a dataset file.

use std::path::PathBuf;

use clap::Args;
use rfsquid::dataset::SpectroscopyDataset;
use rfsquid::fit::{fit_pipeline, FitOptions, PipelineInitial, PipelineReport};
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, set, QubitArgs, QubitSection};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Dataset CSV (`phi_ext,freq_ghz,label,weight,kind`).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Initial guess for the qubit energies.
    #[command(flatten)]
    pub qubit: QubitArgs,
    /// Bare resonator frequency, GHz (held fixed).
    #[arg(long)]
    pub omega_r: Option<f64>,
    /// Initial charge coupling, GHz.
    #[arg(long)]
    pub g_c: Option<f64>,
    /// Initial inductive coupling, GHz.
    #[arg(long)]
    pub g_l: Option<f64>,
    /// Stop after the two stages (no joint polish).
    #[arg(long)]
    pub two_stage: bool,
    /// Skip the doubled-truncation check.
    #[arg(long)]
    pub no_truncation_check: bool,
    /// Iteration cap per optimizer run.
    #[arg(long)]
    pub max_iterations: Option<usize>,
}

/// Resonator frequency (fixed) and initial couplings, GHz.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CouplingSection {
    pub omega_r: Option<f64>,
    pub g_c: Option<f64>,
    pub g_l: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub dataset: Option<PathBuf>,
    /// Initial guess.
    pub qubit: QubitSection,
    pub couplings: CouplingSection,
    pub options: FitOptions,
}

fn resolve(args: &FitArgs) -> CliResult<(FitConfig, SpectroscopyDataset, Option<PipelineInitial>)> {
    let mut cfg: FitConfig = load(args.io.config.as_deref())?;
    set(&mut cfg.dataset, args.dataset.clone());
    cfg.qubit.apply(&args.qubit);
    set(&mut cfg.couplings.omega_r, args.omega_r);
    set(&mut cfg.couplings.g_c, args.g_c);
    set(&mut cfg.couplings.g_l, args.g_l);
    if args.two_stage {
        cfg.options.joint_refinement = false;
    }
    if args.no_truncation_check {
        cfg.options.verify_truncation = false;
    }
    if let Some(n) = args.max_iterations {
        cfg.options.max_iterations = n;
    }

    let path = cfg
        .dataset
        .clone()
        .ok_or_else(|| usage("no dataset: pass --dataset FILE or set `dataset` in the config"))?;
    let file = std::fs::File::open(&path).map_err(|e| usage(format!("cannot read dataset {}: {e}", path.display())))?;
    let dataset = SpectroscopyDataset::read(std::io::BufReader::new(file))?;

    let qubit = cfg.qubit.resolve().map_err(|_| {
        usage("initial guess missing: pass --preset qubit-A ... qubit-H or all of --e-l, --e-c, --e-j (GHz)")
    })?;
    let device = cfg.qubit.device()?;
    let init = &mut cfg.couplings;
    if init.omega_r.is_none() {
        init.omega_r = dataset.meta.omega_r_ghz.or(device.map(|d| d.omega_r()));
    }
    if let Some(d) = device {
        let table = d.coupled(0.0)?;
        init.g_c.get_or_insert(table.g_c);
        init.g_l.get_or_insert(table.g_l);
    }
    let has_resonator = dataset
        .of_kind(rfsquid::dataset::LineKind::ResonatorLine)
        .next()
        .is_some();
    let initial = match (init.omega_r, init.g_c, init.g_l) {
        (Some(omega_r), Some(g_c), Some(g_l)) => Some(PipelineInitial {
            qubit,
            omega_r,
            g_c,
            g_l,
        }),
        _ if has_resonator => {
            return Err(usage(
                "dataset has resonator lines: the coupling stage needs --omega-r, --g-c and --g-l (or a preset)",
            ))
        }
        _ => None,
    };
    Ok((cfg, dataset, initial))
}

pub fn run(args: FitArgs) -> CliResult<Outputs> {
    let (cfg, dataset, initial) = resolve(&args)?;
    let qubit = cfg.qubit.clone().resolve()?;
    let initial = initial.unwrap_or(PipelineInitial {
        qubit,
        omega_r: 6.0,
        g_c: 0.0,
        g_l: 0.0,
    });
    let report: PipelineReport = fit_pipeline(&dataset, &initial, &cfg.options)?;

    let mut table = Table::new(&[
        "stage",
        "index",
        "phi_ext",
        "observed_ghz",
        "model_ghz",
        "assigned",
        "weight",
    ]);
    for stage in &report.stages {
        for r in &stage.residuals {
            table.push(vec![
                stage.stage.clone(),
                r.index.to_string(),
                num(r.phi_ext),
                num(r.observed),
                num(r.model),
                r.assigned.clone(),
                num(r.weight),
            ]);
        }
    }
    let mut out = Outputs::default();
    out.csv("fit_residuals.csv", table);
    out.json("fit.json", "fit", &cfg, &report);
    Ok(out)
}
