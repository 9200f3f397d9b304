//! Regime labels from the energy ratios and the impedance.

use clap::Args;
use rfsquid::classify::{classify, RegimeReport};
use rfsquid::presets::DEVICES;
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, QubitArgs, QubitSection};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub qubit: QubitArgs,
    /// Classify every preset instead of one parameter set.
    #[arg(long)]
    pub all_presets: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub qubit: QubitSection,
    pub all_presets: bool,
}

#[derive(Serialize)]
struct Entry {
    name: String,
    e_l: f64,
    e_c: f64,
    e_j: f64,
    report: RegimeReport<f64>,
}

pub fn run(args: ClassifyArgs) -> CliResult<Outputs> {
    let mut cfg: ClassifyConfig = load(args.io.config.as_deref())?;
    cfg.qubit.apply(&args.qubit);
    cfg.all_presets |= args.all_presets;

    let entries: Vec<Entry> = if cfg.all_presets {
        if cfg.qubit != QubitSection::default() {
            return Err(usage("--all-presets cannot be combined with qubit parameters"));
        }
        DEVICES
            .iter()
            .map(|d| {
                let p = d.params(0.0);
                Entry {
                    name: format!("qubit-{}", d.name),
                    e_l: p.e_l,
                    e_c: p.e_c,
                    e_j: p.e_j,
                    report: classify(&p),
                }
            })
            .collect()
    } else {
        let p = cfg.qubit.resolve()?;
        vec![Entry {
            name: cfg.qubit.preset.clone().unwrap_or_else(|| "custom".into()),
            e_l: p.e_l,
            e_c: p.e_c,
            e_j: p.e_j,
            report: classify(&p),
        }]
    };

    let mut table = Table::new(&[
        "name",
        "e_l",
        "e_c",
        "e_j",
        "ratio_ej_ec",
        "ratio_el_ec",
        "z_c_ohm",
        "z_c_over_rq",
        "phase_zpf",
        "regime",
    ]);
    for e in &entries {
        let r = &e.report;
        table.push(vec![
            e.name.clone(),
            num(e.e_l),
            num(e.e_c),
            num(e.e_j),
            num(r.ratio_ej_ec),
            num(r.ratio_el_ec),
            num(r.z_c),
            num(r.z_c_over_rq),
            num(r.phase_zpf),
            r.label.as_str().to_string(),
        ]);
    }
    let mut out = Outputs::default();
    out.csv("classify.csv", table);
    out.json("classify.json", "classify", &cfg, &entries);
    Ok(out)
}
