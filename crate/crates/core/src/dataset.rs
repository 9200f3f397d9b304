//! Two-tone spectroscopy datasets.
//!
//! CSV with header `phi_ext,freq_ghz,label,weight,kind`, preceded by optional
//! `# key=value` metadata lines. Labels: `q:i-j` (qubit transition),
//! `q:i-j+kph` (same with `k` extra resonator photons), `r:disp` (resonator
//! line), empty or `unassigned` (matched to the nearest model line).

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineKind {
    QubitLine,
    ResonatorLine,
}

impl fmt::Display for LineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LineKind::QubitLine => "qubit-line",
            LineKind::ResonatorLine => "resonator-line",
        })
    }
}

impl FromStr for LineKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "qubit-line" => Ok(LineKind::QubitLine),
            "resonator-line" => Ok(LineKind::ResonatorLine),
            other => Err(format!(
                "unknown kind '{other}' (expected qubit-line or resonator-line)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LineLabel {
    Unassigned,
    /// `from -> to` with `photons` extra resonator quanta.
    Qubit {
        from: usize,
        to: usize,
        photons: usize,
    },
    /// Resonator line with the qubit in its ground state.
    Resonator,
}

impl fmt::Display for LineLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LineLabel::Unassigned => f.write_str("unassigned"),
            LineLabel::Resonator => f.write_str("r:disp"),
            LineLabel::Qubit { from, to, photons: 0 } => write!(f, "q:{from}-{to}"),
            LineLabel::Qubit { from, to, photons } => write!(f, "q:{from}-{to}+{photons}ph"),
        }
    }
}

impl FromStr for LineLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        if s.is_empty() || s == "unassigned" {
            return Ok(LineLabel::Unassigned);
        }
        if s == "r:disp" {
            return Ok(LineLabel::Resonator);
        }
        let bad = || format!("unrecognized label '{s}' (expected q:i-j, q:i-j+kph, r:disp or unassigned)");
        let body = s.strip_prefix("q:").ok_or_else(bad)?;
        let (pair, photons) = match body.split_once('+') {
            Some((pair, ph)) => {
                let k = ph.strip_suffix("ph").ok_or_else(bad)?;
                (pair, k.parse::<usize>().map_err(|_| bad())?)
            }
            None => (body, 0),
        };
        let (a, b) = pair.split_once('-').ok_or_else(bad)?;
        let from = a.parse::<usize>().map_err(|_| bad())?;
        let to = b.parse::<usize>().map_err(|_| bad())?;
        if to <= from {
            return Err(format!("label '{s}': upper level must exceed lower level"));
        }
        Ok(LineLabel::Qubit { from, to, photons })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub phi_ext: f64,
    pub freq_ghz: f64,
    pub label: LineLabel,
    pub weight: f64,
    pub kind: LineKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub kappa_tot_mhz: Option<f64>,
    /// Candidate replica lines (qubit transition plus `k <= max` photons) for
    /// unassigned qubit-line points.
    pub max_photon_replicas: usize,
    /// Bare resonator frequency, GHz, when known.
    pub omega_r_ghz: Option<f64>,
    pub notes: Vec<String>,
    /// Unrecognized keys, kept verbatim.
    pub extra: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectroscopyDataset {
    pub points: Vec<DataPoint>,
    pub meta: DatasetMeta,
}

#[derive(Debug, Deserialize)]
struct Row {
    phi_ext: f64,
    freq_ghz: f64,
    #[serde(default)]
    label: String,
    weight: Option<f64>,
    kind: String,
}

impl SpectroscopyDataset {
    /// All problems found, not just the first.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.points.is_empty() {
            out.push("dataset has no points".to_string());
        }
        for (i, p) in self.points.iter().enumerate() {
            let row = i + 1;
            if !p.phi_ext.is_finite() {
                out.push(format!("point {row}: phi_ext must be finite"));
            }
            if !(p.freq_ghz > 0.0) || !p.freq_ghz.is_finite() {
                out.push(format!("point {row}: freq_ghz must be positive, got {}", p.freq_ghz));
            }
            if !(p.weight > 0.0) || !p.weight.is_finite() {
                out.push(format!("point {row}: weight must be positive, got {}", p.weight));
            }
            if p.kind == LineKind::ResonatorLine && matches!(p.label, LineLabel::Qubit { .. }) {
                out.push(format!(
                    "point {row}: resonator-line point carries qubit label {}",
                    p.label
                ));
            }
        }
        if let Some(k) = self.meta.kappa_tot_mhz {
            if !(k >= 0.0) {
                out.push(format!("meta kappa_tot_mhz must be non-negative, got {k}"));
            }
        }
        if let Some(w) = self.meta.omega_r_ghz {
            if !(w > 0.0) {
                out.push(format!("meta omega_r_ghz must be positive, got {w}"));
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::Dataset(p))
        }
    }

    pub fn of_kind(&self, kind: LineKind) -> impl Iterator<Item = &DataPoint> {
        self.points.iter().filter(move |p| p.kind == kind)
    }

    /// Distinct flux values in ascending order.
    pub fn unique_flux(&self, kind: Option<LineKind>) -> Vec<f64> {
        let mut f: Vec<f64> = self
            .points
            .iter()
            .filter(|p| kind.is_none_or(|k| p.kind == k))
            .map(|p| p.phi_ext)
            .collect();
        f.sort_by(|a, b| a.total_cmp(b));
        f.dedup();
        f
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut meta = DatasetMeta::default();
        let mut body = String::new();
        let mut problems = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let trimmed = line.trim();
            if let Some(rest) = trimmed.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once('=') {
                    let (k, v) = (k.trim(), v.trim());
                    match k {
                        "kappa_tot_mhz" => match v.parse() {
                            Ok(x) => meta.kappa_tot_mhz = Some(x),
                            Err(_) => problems.push(format!("meta kappa_tot_mhz: cannot parse '{v}'")),
                        },
                        "omega_r_ghz" => match v.parse() {
                            Ok(x) => meta.omega_r_ghz = Some(x),
                            Err(_) => problems.push(format!("meta omega_r_ghz: cannot parse '{v}'")),
                        },
                        "max_photon_replicas" => match v.parse() {
                            Ok(x) => meta.max_photon_replicas = x,
                            Err(_) => problems.push(format!("meta max_photon_replicas: cannot parse '{v}'")),
                        },
                        "notes" => meta.notes.push(v.to_string()),
                        _ => {
                            meta.extra.insert(k.to_string(), v.to_string());
                        }
                    }
                }
                continue;
            }
            if trimmed.is_empty() {
                continue;
            }
            body.push_str(&line);
            body.push('\n');
        }
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(body.as_bytes());
        let mut points = Vec::new();
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = match row {
                Ok(r) => r,
                Err(e) => {
                    problems.push(format!("row {}: {e}", i + 1));
                    continue;
                }
            };
            let label = row.label.parse::<LineLabel>();
            let kind = row.kind.parse::<LineKind>();
            match (label, kind) {
                (Ok(label), Ok(kind)) => points.push(DataPoint {
                    phi_ext: row.phi_ext,
                    freq_ghz: row.freq_ghz,
                    label,
                    weight: row.weight.unwrap_or(1.0),
                    kind,
                }),
                (l, k) => {
                    for e in [l.err(), k.err()].into_iter().flatten() {
                        problems.push(format!("row {}: {e}", i + 1));
                    }
                }
            }
        }
        let ds = SpectroscopyDataset { points, meta };
        problems.extend(ds.problems());
        if problems.is_empty() {
            Ok(ds)
        } else {
            Err(Error::Dataset(problems))
        }
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        if let Some(k) = self.meta.kappa_tot_mhz {
            writeln!(w, "# kappa_tot_mhz={k}")?;
        }
        if let Some(o) = self.meta.omega_r_ghz {
            writeln!(w, "# omega_r_ghz={o}")?;
        }
        if self.meta.max_photon_replicas > 0 {
            writeln!(w, "# max_photon_replicas={}", self.meta.max_photon_replicas)?;
        }
        for n in &self.meta.notes {
            writeln!(w, "# notes={n}")?;
        }
        for (k, v) in &self.meta.extra {
            writeln!(w, "# {k}={v}")?;
        }
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(["phi_ext", "freq_ghz", "label", "weight", "kind"])?;
        for p in &self.points {
            csv.write_record([
                p.phi_ext.to_string(),
                p.freq_ghz.to_string(),
                p.label.to_string(),
                p.weight.to_string(),
                p.kind.to_string(),
            ])?;
        }
        csv.flush()?;
        Ok(())
    }
}
