//! TOML run configuration shared by the subcommands. Every section rejects
//! unknown keys; flags override file values; the resolved configuration is
//! echoed into each JSON output.

use std::path::Path;

use clap::Args;
use rfsquid::presets::{device, DevicePreset};
use rfsquid::QubitParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult};

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text =
        std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

pub fn set<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

pub fn preset(name: &str) -> CliResult<&'static DevicePreset> {
    device(name).ok_or_else(|| usage(format!("unknown preset '{name}' (expected qubit-A ... qubit-H)")))
}

#[derive(Debug, Clone, Default, Args)]
pub struct QubitArgs {
    /// Device preset, qubit-A ... qubit-H.
    #[arg(long)]
    pub preset: Option<String>,
    /// Inductive energy, GHz.
    #[arg(long)]
    pub e_l: Option<f64>,
    /// Charging energy, GHz.
    #[arg(long)]
    pub e_c: Option<f64>,
    /// Josephson energy, GHz.
    #[arg(long)]
    pub e_j: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QubitSection {
    pub preset: Option<String>,
    pub e_l: Option<f64>,
    pub e_c: Option<f64>,
    pub e_j: Option<f64>,
}

impl QubitSection {
    pub fn apply(&mut self, a: &QubitArgs) {
        set(&mut self.preset, a.preset.clone());
        set(&mut self.e_l, a.e_l);
        set(&mut self.e_c, a.e_c);
        set(&mut self.e_j, a.e_j);
    }

    pub fn device(&self) -> CliResult<Option<&'static DevicePreset>> {
        self.preset.as_deref().map(preset).transpose()
    }

    /// Fills energies from the preset, keeping explicit values, and returns
    /// the parameters at zero flux.
    pub fn resolve(&mut self) -> CliResult<QubitParams<f64>> {
        if let Some(d) = self.device()? {
            self.e_l.get_or_insert(d.e_l);
            self.e_c.get_or_insert(d.e_c);
            self.e_j.get_or_insert(d.e_j);
        }
        match (self.e_l, self.e_c, self.e_j) {
            (Some(l), Some(c), Some(j)) => Ok(QubitParams::new(l, c, j, 0.0)?),
            _ => Err(usage(
                "qubit parameters missing: pass --preset qubit-A ... qubit-H or all of --e-l, --e-c, --e-j",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub const fn new(start: f64, stop: f64, steps: usize) -> Self {
        Self { start, stop, steps }
    }

    pub fn validate(&self, what: &str) -> CliResult<()> {
        if self.steps < 1 || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(usage(format!("{what}: need finite start/stop and at least one step")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let span = self.stop - self.start;
        (0..self.steps)
            .map(|i| self.start + span * i as f64 / (self.steps - 1) as f64)
            .collect()
    }
}

impl Default for Sweep {
    fn default() -> Self {
        Self::new(0.0, 1.0, 101)
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct SweepArgs {
    /// First flux value, flux quanta.
    #[arg(long)]
    pub flux_start: Option<f64>,
    /// Last flux value, flux quanta.
    #[arg(long)]
    pub flux_stop: Option<f64>,
    /// Number of flux values.
    #[arg(long)]
    pub flux_steps: Option<usize>,
}

impl SweepArgs {
    pub fn apply(&self, s: &mut Sweep) {
        if let Some(v) = self.flux_start {
            s.start = v;
        }
        if let Some(v) = self.flux_stop {
            s.stop = v;
        }
        if let Some(v) = self.flux_steps {
            s.steps = v;
        }
    }
}

pub fn read_coherence(path: &Path) -> CliResult<Vec<rfsquid::noise::CoherencePoint>> {
    let file = std::fs::File::open(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(rfsquid::noise::read_coherence_csv(file)?)
}
