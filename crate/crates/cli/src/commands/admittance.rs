//! Lumped-circuit fit to a simulated or measured admittance.

use std::path::PathBuf;

use clap::Args;
use rfsquid::parasitic::{fit_lumped_admittance, read_admittance_csv, AdmittanceFit};
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, set};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct AdmittanceFitArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Admittance CSV (`freq_ghz,re_s,im_s`).
    #[arg(long)]
    pub input: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmittanceConfig {
    pub input: Option<PathBuf>,
}

pub fn run(args: AdmittanceFitArgs) -> CliResult<Outputs> {
    let mut cfg: AdmittanceConfig = load(args.io.config.as_deref())?;
    set(&mut cfg.input, args.input.clone());
    let path = cfg.input.clone().ok_or_else(|| usage("no input: pass --input FILE"))?;
    let file = std::fs::File::open(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let samples = read_admittance_csv(file)?;
    let fit: AdmittanceFit = fit_lumped_admittance(&samples)?;

    let mut table = Table::new(&["freq_ghz", "re_s", "im_s", "model_re_s", "model_im_s"]);
    for s in &samples {
        let m = fit.params.admittance(s.freq_ghz);
        table.push(vec![num(s.freq_ghz), num(s.y.re), num(s.y.im), num(m.re), num(m.im)]);
    }
    let mut out = Outputs::default();
    out.csv("admittance_fit.csv", table);
    out.json("admittance_fit.json", "admittance-fit", &cfg, &fit);
    Ok(out)
}
