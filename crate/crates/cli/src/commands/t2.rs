//! Flux-noise-limited echo dephasing versus flux, optionally fitting the
//! noise amplitude and shot-noise time to measured points.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use rfsquid::noise::{fit_t2_flux_noise, flux_slope, t1_capacitive, t2_from_slope, FluxNoiseFit, T1Model, T2Model};
use rfsquid::QubitParams;
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, read_coherence, set, QubitArgs, QubitSection, Sweep, SweepArgs};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct T2Args {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub qubit: QubitArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Flux-noise amplitude sqrt(A_Phi), µΦ0.
    #[arg(long)]
    pub a_phi_sqrt: Option<f64>,
    /// Echo filter constant.
    #[arg(long)]
    pub gamma_filter: Option<f64>,
    /// Shot-noise dephasing time, µs.
    #[arg(long)]
    pub t_phi: Option<f64>,
    /// Fixed T1, µs (instead of the dielectric-loss model).
    #[arg(long)]
    pub t1: Option<f64>,
    /// Dielectric quality factor for the T1 model.
    #[arg(long)]
    pub q_diel: Option<f64>,
    /// Bath temperature for the T1 model, K.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Measured T2 points (`phi_ext,value_us,err_us`) to fit.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct T2Config {
    pub qubit: QubitSection,
    pub a_phi_sqrt: Option<f64>,
    pub gamma_filter: f64,
    pub t_phi: Option<f64>,
    pub t1: Option<f64>,
    pub q_diel: Option<f64>,
    pub temperature: Option<f64>,
    pub c_total: Option<f64>,
    pub sweep: Sweep,
    pub data: Option<PathBuf>,
}

impl Default for T2Config {
    fn default() -> Self {
        Self {
            qubit: QubitSection::default(),
            a_phi_sqrt: None,
            gamma_filter: 1.0,
            t_phi: None,
            t1: None,
            q_diel: None,
            temperature: None,
            c_total: None,
            sweep: Sweep::default(),
            data: None,
        }
    }
}

#[derive(Serialize)]
struct Summary {
    model: T2Model,
    t2_at_half_us: f64,
    /// `min(2 T1, (1/(2 T1) + 1/T_phi)^-1)` at half flux.
    sweet_spot_limit_us: f64,
    fit: Option<FluxNoiseFit>,
}

enum T1Source {
    Fixed(f64),
    Model(T1Model),
}

impl T1Source {
    fn at(&self, qubit: &QubitParams<f64>, phi: f64) -> rfsquid::Result<f64> {
        match self {
            T1Source::Fixed(t) => Ok(*t),
            T1Source::Model(m) => t1_capacitive(&qubit.with_flux(phi), m),
        }
    }
}

pub fn run(args: T2Args) -> CliResult<Outputs> {
    let mut cfg: T2Config = load(args.io.config.as_deref())?;
    cfg.qubit.apply(&args.qubit);
    args.sweep.apply(&mut cfg.sweep);
    set(&mut cfg.a_phi_sqrt, args.a_phi_sqrt);
    if let Some(g) = args.gamma_filter {
        cfg.gamma_filter = g;
    }
    set(&mut cfg.t_phi, args.t_phi);
    set(&mut cfg.t1, args.t1);
    set(&mut cfg.q_diel, args.q_diel);
    set(&mut cfg.temperature, args.temperature);
    set(&mut cfg.data, args.data.clone());
    let qubit = cfg.qubit.resolve()?;
    cfg.sweep.validate("sweep")?;

    let t1 = match (cfg.t1, cfg.q_diel, cfg.temperature) {
        (Some(t), _, _) if t > 0.0 => T1Source::Fixed(t),
        (Some(t), _, _) => return Err(usage(format!("t1 must be positive, got {t}"))),
        (None, Some(q), Some(temp)) => {
            let m = T1Model {
                q_diel: q,
                temperature: temp,
                c_total: cfg.c_total,
            };
            m.validate()?;
            T1Source::Model(m)
        }
        _ => return Err(usage("T1 needed: pass --t1 (µs) or both --q-diel and --temperature")),
    };

    let fit = match cfg.data.as_deref() {
        Some(path) => {
            let pts: Vec<(f64, f64)> = read_coherence(path)?.iter().map(|c| (c.phi_ext, c.value_us)).collect();
            let t1_at = |phi: f64| t1.at(&qubit, phi).unwrap_or(f64::NAN);
            Some(fit_t2_flux_noise(&pts, &qubit, t1_at, cfg.gamma_filter)?)
        }
        None => None,
    };
    let model = match (&fit, cfg.a_phi_sqrt, cfg.t_phi) {
        (Some(f), _, _) => T2Model {
            a_phi_sqrt: f.a_phi_sqrt,
            gamma_filter: cfg.gamma_filter,
            t_phi: f.t_phi,
        },
        (None, Some(a), Some(t)) => T2Model {
            a_phi_sqrt: a,
            gamma_filter: cfg.gamma_filter,
            t_phi: t,
        },
        _ => return Err(usage("pass --a-phi-sqrt and --t-phi, or --data to fit them")),
    };
    model.validate()?;

    let flux = cfg.sweep.values();
    let rows: Vec<(f64, f64, f64)> = flux
        .par_iter()
        .map(|&phi| {
            let (slope, _) = flux_slope(&qubit.with_flux(phi))?;
            let t1_us = t1.at(&qubit, phi)?;
            Ok((slope, t1_us, t2_from_slope(slope, &model, t1_us)))
        })
        .collect::<rfsquid::Result<_>>()?;
    let mut table = Table::new(&["phi_ext", "slope_ghz_per_phi0", "t1_us", "t2_us"]);
    for (phi, (slope, t1_us, t2_us)) in flux.iter().zip(&rows) {
        table.push(vec![num(*phi), num(*slope), num(*t1_us), num(*t2_us)]);
    }

    let t1_half = t1.at(&qubit, 0.5)?;
    let (slope_half, _) = flux_slope(&qubit.with_flux(0.5))?;
    let summary = Summary {
        model,
        t2_at_half_us: t2_from_slope(slope_half, &model, t1_half),
        sweet_spot_limit_us: (1.0 / (1.0 / (2.0 * t1_half) + 1.0 / model.t_phi)).min(2.0 * t1_half),
        fit,
    };
    let mut out = Outputs::default();
    out.csv("t2.csv", table);
    out.json("t2.json", "t2", &cfg, &summary);
    Ok(out)
}
