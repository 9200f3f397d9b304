//! Flux sweep of the bare or dressed spectrum.

use clap::Args;
use rayon::prelude::*;
use rfsquid::classify::{classify, RegimeReport};
use rfsquid::coupled::{
    dispersive_shift_of, solve_coupled, CoupledParams, DressedSpectrum, ParasiticMode, ProductLabel,
};
use rfsquid::parasitic::{solve_three_mode, ParasiticParams, COIL_REFERENCE, REPORTED_COUPLING_GHZ};
use rfsquid::qubit::{diagonalize, Truncation};
use rfsquid::QubitParams;
use serde::{Deserialize, Serialize};

use super::IoArgs;
use crate::config::{load, set, QubitArgs, QubitSection, Sweep, SweepArgs};
use crate::error::{usage, CliResult};
use crate::output::{num, Outputs, Table};

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[command(flatten)]
    pub qubit: QubitArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
    /// Qubit levels to report (transitions 0 -> 1 ... 0 -> levels-1).
    #[arg(long)]
    pub levels: Option<usize>,
    /// Fixed oscillator basis size (default: converge automatically).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Include the readout resonator (couplings from the preset unless given).
    #[arg(long)]
    pub coupled: bool,
    /// Bare resonator frequency, GHz.
    #[arg(long)]
    pub omega_r: Option<f64>,
    /// Charge coupling constant, GHz.
    #[arg(long)]
    pub g_c: Option<f64>,
    /// Inductive coupling constant, GHz.
    #[arg(long)]
    pub g_l: Option<f64>,
    /// Add the parasitic coil mode (implies --coupled).
    #[arg(long)]
    pub parasitic: bool,
    /// Parasitic coupling on the Cooper-pair number, GHz.
    #[arg(long)]
    pub g_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoupledSection {
    pub omega_r: Option<f64>,
    pub g_c: Option<f64>,
    pub g_l: Option<f64>,
    pub n_photons: usize,
    pub n_qubit_levels: usize,
}

impl Default for CoupledSection {
    fn default() -> Self {
        Self {
            omega_r: None,
            g_c: None,
            g_l: None,
            n_photons: rfsquid::coupled::DEFAULT_PHOTONS,
            n_qubit_levels: rfsquid::coupled::DEFAULT_QUBIT_LEVELS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParasiticSection {
    /// fF.
    pub c_q: f64,
    /// nH.
    pub l_q: f64,
    /// fF.
    pub c_p: f64,
    /// µH.
    pub l_p: f64,
    pub g_p: f64,
    pub n_levels: usize,
}

impl Default for ParasiticSection {
    fn default() -> Self {
        Self {
            c_q: COIL_REFERENCE.c_q,
            l_q: COIL_REFERENCE.l_q,
            c_p: COIL_REFERENCE.c_p,
            l_p: COIL_REFERENCE.l_p,
            g_p: REPORTED_COUPLING_GHZ,
            n_levels: 3,
        }
    }
}

impl ParasiticSection {
    pub fn circuit(&self) -> ParasiticParams {
        ParasiticParams {
            c_q: self.c_q,
            l_q: self.l_q,
            c_p: self.c_p,
            l_p: self.l_p,
            e_j: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumConfig {
    pub qubit: QubitSection,
    pub sweep: Sweep,
    pub levels: usize,
    pub dim: Option<usize>,
    pub coupled: Option<CoupledSection>,
    pub parasitic: Option<ParasiticSection>,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            qubit: QubitSection::default(),
            sweep: Sweep::new(0.0, 1.0, 201),
            levels: 5,
            dim: None,
            coupled: None,
            parasitic: None,
        }
    }
}

#[derive(Serialize)]
struct CoupledSummary {
    omega_r: f64,
    g_c: f64,
    g_l: f64,
    chi_mhz_at_zero: Option<f64>,
    chi_mhz_at_half: Option<f64>,
}

#[derive(Serialize)]
struct ParasiticSummary {
    omega_p: f64,
    g_p: f64,
}

#[derive(Serialize)]
struct Summary {
    phase_zpf: f64,
    regime: RegimeReport<f64>,
    f01_at_zero: f64,
    f01_at_half: f64,
    columns: Vec<String>,
    rows: usize,
    coupled: Option<CoupledSummary>,
    parasitic: Option<ParasiticSummary>,
}

pub fn truncation(dim: Option<usize>) -> Truncation {
    dim.map(Truncation::Fixed).unwrap_or_default()
}

fn resolve(args: &SpectrumArgs) -> CliResult<(SpectrumConfig, QubitParams<f64>)> {
    let mut cfg: SpectrumConfig = load(args.io.config.as_deref())?;
    cfg.qubit.apply(&args.qubit);
    args.sweep.apply(&mut cfg.sweep);
    if let Some(l) = args.levels {
        cfg.levels = l;
    }
    set(&mut cfg.dim, args.dim);
    if args.parasitic || args.g_p.is_some() {
        let p = cfg.parasitic.get_or_insert_with(Default::default);
        if let Some(g) = args.g_p {
            p.g_p = g;
        }
    }
    let wants_coupled =
        args.coupled || cfg.parasitic.is_some() || args.omega_r.is_some() || args.g_c.is_some() || args.g_l.is_some();
    if wants_coupled {
        let c = cfg.coupled.get_or_insert_with(Default::default);
        set(&mut c.omega_r, args.omega_r);
        set(&mut c.g_c, args.g_c);
        set(&mut c.g_l, args.g_l);
    }
    let qubit = cfg.qubit.resolve()?;
    cfg.sweep.validate("sweep")?;
    if cfg.levels < 2 {
        return Err(usage("levels must be at least 2"));
    }
    let device = cfg.qubit.device()?;
    if let Some(c) = cfg.coupled.as_mut() {
        if let Some(d) = device {
            let from_table = d.coupled(0.0)?;
            c.omega_r.get_or_insert(d.omega_r());
            c.g_c.get_or_insert(from_table.g_c);
            c.g_l.get_or_insert(from_table.g_l);
        }
        if c.omega_r.is_none() || c.g_c.is_none() || c.g_l.is_none() {
            return Err(usage(
                "coupled spectrum needs omega_r, g_c and g_l (or a preset to take them from)",
            ));
        }
        if c.n_qubit_levels < cfg.levels {
            return Err(usage("coupled.n_qubit_levels must be at least levels"));
        }
    }
    Ok((cfg, qubit))
}

fn coupled_row(spec: &DressedSpectrum<f64>, levels: usize, parasitic: bool) -> Vec<f64> {
    let e0 = spec.states[0].energy;
    let at = |l: ProductLabel| spec.energy_of(l).map(|e| e - e0).unwrap_or(f64::NAN);
    let mut row: Vec<f64> = (1..levels).map(|j| at(ProductLabel::new(j, 0))).collect();
    row.push(at(ProductLabel::new(0, 1)));
    if parasitic {
        row.push(at(ProductLabel {
            qubit: 0,
            photons: 0,
            parasitic: 1,
        }));
    }
    row
}

pub fn run(args: SpectrumArgs) -> CliResult<Outputs> {
    let (cfg, qubit) = resolve(&args)?;
    let trunc = truncation(cfg.dim);
    let flux = cfg.sweep.values();
    let mut columns: Vec<String> = (1..cfg.levels).map(|j| format!("q:0-{j}")).collect();

    let coupled = cfg
        .coupled
        .as_ref()
        .map(|c| -> CliResult<CoupledParams<f64>> {
            let mut p = CoupledParams::new(qubit, c.omega_r.unwrap(), c.g_c.unwrap(), c.g_l.unwrap())?;
            p.n_photons = c.n_photons;
            p.n_qubit_levels = c.n_qubit_levels;
            p.qubit_truncation = trunc;
            p.validate()?;
            Ok(p)
        })
        .transpose()?;
    let mode = match &cfg.parasitic {
        Some(s) => {
            let circuit = s.circuit();
            circuit.validate()?;
            Some(ParasiticMode::from_circuit(&circuit, s.g_p, s.n_levels))
        }
        None => None,
    };
    let solve = |p: &CoupledParams<f64>| match &mode {
        Some(m) => solve_three_mode(p, m),
        None => solve_coupled(p),
    };

    let rows: Vec<Vec<f64>> = match &coupled {
        None => flux
            .par_iter()
            .map(|&phi| {
                let s = diagonalize(&qubit.with_flux(phi), trunc)?;
                Ok((1..cfg.levels).map(|j| s.transition(0, j)).collect())
            })
            .collect::<rfsquid::Result<_>>()?,
        Some(p) => flux
            .par_iter()
            .map(|&phi| Ok(coupled_row(&solve(&p.with_flux(phi))?, cfg.levels, mode.is_some())))
            .collect::<rfsquid::Result<_>>()?,
    };
    if coupled.is_some() {
        columns.push("r:disp".into());
    }
    if mode.is_some() {
        columns.push("p:1".into());
    }

    let f01 = |phi: f64| -> CliResult<f64> { Ok(diagonalize(&qubit.with_flux(phi), trunc)?.transition(0, 1)) };
    let coupled_summary = match &coupled {
        Some(p) => {
            let chi = |phi: f64| solve(&p.with_flux(phi)).and_then(|s| dispersive_shift_of(&s)).ok();
            Some(CoupledSummary {
                omega_r: p.omega_r,
                g_c: p.g_c,
                g_l: p.g_l,
                chi_mhz_at_zero: chi(0.0),
                chi_mhz_at_half: chi(0.5),
            })
        }
        None => None,
    };
    let summary = Summary {
        phase_zpf: qubit.phase_zpf(),
        regime: classify(&qubit),
        f01_at_zero: f01(0.0)?,
        f01_at_half: f01(0.5)?,
        columns: columns.clone(),
        rows: rows.len(),
        coupled: coupled_summary,
        parasitic: mode.map(|m| ParasiticSummary {
            omega_p: m.omega_p,
            g_p: m.g_p,
        }),
    };

    let mut header = vec!["phi_ext".to_string()];
    header.extend(columns);
    let mut table = Table::new(&header);
    for (phi, row) in flux.iter().zip(&rows) {
        let mut cells = vec![num(*phi)];
        cells.extend(row.iter().map(|v| num(*v)));
        table.push(cells);
    }
    let mut out = Outputs::default();
    out.csv("spectrum.csv", table);
    out.json("spectrum.json", "spectrum", &cfg, &summary);
    Ok(out)
}
