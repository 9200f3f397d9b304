//! Parasitic coil mode of the qubit-plus-coil circuit.

use clap::Args;
use rfsquid::parasitic::{
    parasitic_coupling_variants, parasitic_mode_frequency, sample_admittance, write_admittance_csv, ParasiticCoupling,
    ParasiticParams, COIL_REFERENCE, REPORTED_COUPLING_GHZ,
};
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, Sweep};
use crate::error::CliResult;
use crate::output::Outputs;

#[derive(Debug, Args)]
pub struct ParasiticArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Qubit capacitance, fF.
    #[arg(long)]
    pub c_q: Option<f64>,
    /// Qubit inductance, nH.
    #[arg(long)]
    pub l_q: Option<f64>,
    /// Coil capacitance, fF.
    #[arg(long)]
    pub c_p: Option<f64>,
    /// Coil inductance, µH.
    #[arg(long)]
    pub l_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParasiticConfig {
    pub circuit: ParasiticParams,
    /// Admittance sweep, GHz.
    pub axis: Sweep,
}

impl Default for ParasiticConfig {
    fn default() -> Self {
        Self {
            circuit: COIL_REFERENCE,
            axis: Sweep::new(1.0, 10.0, 901),
        }
    }
}

#[derive(Serialize)]
struct Summary {
    mode_frequency_ghz: f64,
    series_capacitance_ff: f64,
    series_pole_ghz: f64,
    admittance_zeros_ghz: [f64; 2],
    coupling: ParasiticCoupling,
    reported_coupling_ghz: f64,
}

pub fn run(args: ParasiticArgs) -> CliResult<Outputs> {
    let mut cfg: ParasiticConfig = load(args.io.config.as_deref())?;
    let c = &mut cfg.circuit;
    for (slot, flag) in [
        (&mut c.c_q, args.c_q),
        (&mut c.l_q, args.l_q),
        (&mut c.c_p, args.c_p),
        (&mut c.l_p, args.l_p),
    ] {
        if let Some(v) = flag {
            *slot = v;
        }
    }
    cfg.circuit.validate()?;
    cfg.axis.validate("axis")?;
    let p = cfg.circuit;
    let summary = Summary {
        mode_frequency_ghz: parasitic_mode_frequency(&p),
        series_capacitance_ff: p.series_capacitance() * 1e15,
        series_pole_ghz: p.series_pole_ghz(),
        admittance_zeros_ghz: p.admittance_zeros_ghz(),
        coupling: parasitic_coupling_variants(&p),
        reported_coupling_ghz: REPORTED_COUPLING_GHZ,
    };
    let mut csv = Vec::new();
    write_admittance_csv(&mut csv, &sample_admittance(&p, &cfg.axis.values()))?;
    let mut out = Outputs::default();
    out.raw("parasitic.csv", csv);
    out.json("parasitic.json", "parasitic", &cfg, &summary);
    Ok(out)
}
