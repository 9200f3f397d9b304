//! Dielectric-loss relaxation time versus flux, optionally fitting the
//! quality factor to measured points.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use rfsquid::noise::{fit_t1_quality, t1_capacitive, t1_inputs, QualityFit, T1Model, TimeUnit};
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, read_coherence, set, QubitArgs, QubitSection, Sweep, SweepArgs};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct T1Args {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub qubit: QubitArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Dielectric quality factor.
    #[arg(long)]
    pub q_diel: Option<f64>,
    /// Bath temperature, K (required).
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Total capacitance, fF (default: from E_C).
    #[arg(long)]
    pub c_total: Option<f64>,
    /// Measured T1 points (`phi_ext,value_us,err_us`) to fit Q_diel to.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T1Config {
    pub qubit: QubitSection,
    pub q_diel: Option<f64>,
    pub temperature: Option<f64>,
    pub c_total: Option<f64>,
    pub sweep: Sweep,
    pub data: Option<PathBuf>,
}

#[derive(Serialize)]
struct Summary {
    model: T1Model,
    capacitance_ff: f64,
    t1_at_zero_us: f64,
    t1_at_half_us: f64,
    fit: Option<QualityFit>,
}

pub fn run(args: T1Args) -> CliResult<Outputs> {
    let mut cfg: T1Config = load(args.io.config.as_deref())?;
    cfg.qubit.apply(&args.qubit);
    args.sweep.apply(&mut cfg.sweep);
    set(&mut cfg.q_diel, args.q_diel);
    set(&mut cfg.temperature, args.temperature);
    set(&mut cfg.c_total, args.c_total);
    set(&mut cfg.data, args.data.clone());
    let qubit = cfg.qubit.resolve()?;
    cfg.sweep.validate("sweep")?;
    let temperature = cfg
        .temperature
        .ok_or_else(|| usage("--temperature (K) is required; there is no default"))?;
    let points = cfg.data.as_deref().map(read_coherence).transpose()?;

    let fit = match &points {
        Some(p) => {
            let pairs: Vec<(f64, f64)> = p.iter().map(|c| (c.phi_ext, c.value_us)).collect();
            Some(fit_t1_quality(
                &pairs,
                TimeUnit::Microseconds,
                &qubit,
                temperature,
                cfg.c_total,
            )?)
        }
        None => None,
    };
    let q_diel = match (&fit, cfg.q_diel) {
        (Some(f), _) => f.q_diel,
        (None, Some(q)) => q,
        (None, None) => return Err(usage("pass --q-diel or --data to fit it")),
    };
    let model = T1Model {
        q_diel,
        temperature,
        c_total: cfg.c_total,
    };
    model.validate()?;

    let flux = cfg.sweep.values();
    let rows: Vec<(f64, f64, f64)> = flux
        .par_iter()
        .map(|&phi| {
            let q = qubit.with_flux(phi);
            let (phi01, f01) = t1_inputs(&q)?;
            Ok((f01, phi01, t1_capacitive(&q, &model)?))
        })
        .collect::<rfsquid::Result<_>>()?;

    let mut table = Table::new(&["phi_ext", "f01_ghz", "phi01", "t1_us"]);
    for (phi, (f01, phi01, t1)) in flux.iter().zip(&rows) {
        table.push(vec![num(*phi), num(*f01), num(*phi01), num(*t1)]);
    }
    let summary = Summary {
        model,
        capacitance_ff: model.capacitance(&qubit) * 1e15,
        t1_at_zero_us: t1_capacitive(&qubit.with_flux(0.0), &model)?,
        t1_at_half_us: t1_capacitive(&qubit.with_flux(0.5), &model)?,
        fit,
    };
    let mut out = Outputs::default();
    out.csv("t1.csv", table);
    out.json("t1.json", "t1", &cfg, &summary);
    Ok(out)
}
