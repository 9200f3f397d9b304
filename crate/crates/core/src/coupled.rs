//! Qubit coupled to a readout resonator and, optionally, to the coil's
//! parasitic mode.
//!
//! The qubit is diagonalized first and only its lowest `n_qubit_levels`
//! eigenstates are kept. With `n = iK` (K real antisymmetric) the coupling
//! terms become real:
//!
//! ```text
//! H = sum_i E_i |i><i| + w_r a^+a + g_C K (a - a^+) - g_L X (a + a^+)
//!     [+ w_p b^+b + g_p K (b - b^+)]
//! ```
//!
//! where `X = phi - 2 pi Phi_ext` is the phase across the inductor. Product
//! states are indexed `(i * n_photons + k) * n_parasitic + m`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{relative_asymmetry, sym_eigen, symmetrize};
use crate::qubit::{diagonalize, QubitOperator, QubitParams, SpectrumResult, Truncation};
use crate::scalar::Scalar;

pub const DEFAULT_PHOTONS: usize = 5;
pub const DEFAULT_QUBIT_LEVELS: usize = 20;
/// Largest product-space dimension assembled unless the caller raises it.
pub const DEFAULT_DIMENSION_CAP: usize = 4000;
pub const HERMITICITY_TOLERANCE: f64 = 1e-10;
/// Minimum squared overlap for a dressed state to inherit a product label.
pub const LABEL_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledParams<T> {
    pub qubit: QubitParams<T>,
    /// Bare resonator frequency, GHz.
    pub omega_r: T,
    /// GHz, multiplies the Cooper-pair number operator.
    pub g_c: T,
    /// GHz, multiplies the inductor phase.
    pub g_l: T,
    pub n_photons: usize,
    pub n_qubit_levels: usize,
    /// Basis used for the bare qubit before truncation to `n_qubit_levels`.
    #[serde(default)]
    pub qubit_truncation: Truncation,
}

impl<T: Scalar> CoupledParams<T> {
    pub fn new(qubit: QubitParams<T>, omega_r: T, g_c: T, g_l: T) -> Result<Self> {
        let p = Self {
            qubit,
            omega_r,
            g_c,
            g_l,
            n_photons: DEFAULT_PHOTONS,
            n_qubit_levels: DEFAULT_QUBIT_LEVELS,
            qubit_truncation: Truncation::default(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Converts effective couplings (`g_C |<0|n|1>|`, `g_L |<0|phi|1>|`,
    /// evaluated at half flux) into bare constants.
    pub fn from_effective_couplings(qubit: QubitParams<T>, omega_r: T, g_c_n: T, g_l_phi: T) -> Result<Self> {
        let half = diagonalize(&qubit.with_flux(T::lit(0.5)), Truncation::default())?;
        let n01 = half.element(QubitOperator::Charge, 0, 1);
        let phi01 = half.element(QubitOperator::Phase, 0, 1);
        let tiny = T::lit(1e-12);
        if n01 < tiny || phi01 < tiny {
            return Err(Error::InvalidParameter(
                "0-1 matrix elements vanish at half flux; effective couplings cannot be converted".into(),
            ));
        }
        Self::new(qubit, omega_r, g_c_n / n01, g_l_phi / phi01)
    }

    pub fn with_flux(&self, phi_ext: T) -> Self {
        Self {
            qubit: self.qubit.with_flux(phi_ext),
            ..*self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.qubit.validate()?;
        if !(self.omega_r > T::zero()) || !self.omega_r.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "omega_r must be positive, got {}",
                self.omega_r
            )));
        }
        if !self.g_c.is_finite() || !self.g_l.is_finite() {
            return Err(Error::InvalidParameter("couplings must be finite".into()));
        }
        if self.n_photons < 2 || self.n_qubit_levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "truncations must be at least 2 (n_photons {}, n_qubit_levels {})",
                self.n_photons, self.n_qubit_levels
            )));
        }
        Ok(())
    }
}

/// Second linear mode attached to the qubit only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParasiticMode<T> {
    /// GHz.
    pub omega_p: T,
    /// GHz, multiplies the Cooper-pair number operator.
    pub g_p: T,
    pub n_levels: usize,
}

/// Bare qubit restricted to its lowest levels, in its own eigenbasis.
#[derive(Debug, Clone)]
pub struct QubitSector<T: Scalar> {
    pub energies: DVector<T>,
    /// `n = i K`.
    pub k: DMatrix<T>,
    /// Inductor phase `phi - 2 pi Phi_ext`.
    pub x: DMatrix<T>,
}

impl<T: Scalar> QubitSector<T> {
    pub fn from_spectrum(spec: &SpectrumResult<T>, levels: usize) -> Result<Self> {
        if levels > spec.levels() {
            return Err(Error::DimensionTooSmall {
                dim: spec.levels(),
                min: levels,
            });
        }
        let mut k = spec.charge_matrix_imag(levels);
        let mut x = spec.inductor_phase_matrix(levels);
        // Exact (anti)symmetry so the assembled matrix is symmetric bit for bit.
        symmetrize(&mut x);
        let half = T::lit(0.5);
        for i in 0..levels {
            k[(i, i)] = T::zero();
            for j in i + 1..levels {
                let v = (k[(i, j)] - k[(j, i)]) * half;
                k[(i, j)] = v;
                k[(j, i)] = -v;
            }
        }
        Ok(Self {
            energies: DVector::from_iterator(levels, spec.energies.iter().take(levels).copied()),
            k,
            x,
        })
    }

    pub fn levels(&self) -> usize {
        self.energies.len()
    }
}

fn qubit_spectrum<T: Scalar>(p: &CoupledParams<T>) -> Result<SpectrumResult<T>> {
    let trunc = match p.qubit_truncation {
        Truncation::Fixed(d) => Truncation::Fixed(d.max(p.n_qubit_levels)),
        auto @ Truncation::Auto { .. } => auto,
    };
    let spec = diagonalize(&p.qubit, trunc)?;
    if spec.levels() < p.n_qubit_levels {
        return diagonalize(&p.qubit, Truncation::Fixed(p.n_qubit_levels));
    }
    Ok(spec)
}

pub fn qubit_sector<T: Scalar>(p: &CoupledParams<T>) -> Result<QubitSector<T>> {
    p.validate()?;
    QubitSector::from_spectrum(&qubit_spectrum(p)?, p.n_qubit_levels)
}

/// Assembles the product-space Hamiltonian from a prepared qubit sector.
pub fn assemble<T: Scalar>(
    sector: &QubitSector<T>,
    omega_r: T,
    g_c: T,
    g_l: T,
    n_photons: usize,
    parasitic: Option<&ParasiticMode<T>>,
    dimension_cap: usize,
) -> Result<DMatrix<T>> {
    let nq = sector.levels();
    let nr = n_photons;
    let (np, omega_p, g_p) = match parasitic {
        Some(m) => (m.n_levels.max(1), m.omega_p, m.g_p),
        None => (1, T::zero(), T::zero()),
    };
    let dim = nq * nr * np;
    if dim > dimension_cap {
        return Err(Error::DimensionCap {
            dim,
            cap: dimension_cap,
        });
    }
    let idx = |i: usize, k: usize, m: usize| (i * nr + k) * np + m;
    let sqrt = |n: usize| T::of_usize(n).sqrt();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..nq {
        for k in 0..nr {
            for m in 0..np {
                h[(idx(i, k, m), idx(i, k, m))] =
                    sector.energies[i] + omega_r * T::of_usize(k) + omega_p * T::of_usize(m);
            }
        }
    }
    // <k-1| a |k> = sqrt(k): (a - a^+) has +sqrt(k) at (k-1, k), (a + a^+) has
    // +sqrt(k) at both.
    for i in 0..nq {
        for j in 0..nq {
            let kij = sector.k[(i, j)];
            let xij = sector.x[(i, j)];
            for k in 1..nr {
                let s = sqrt(k);
                let lower = g_c * kij * s - g_l * xij * s;
                let raise = -g_c * kij * s - g_l * xij * s;
                for m in 0..np {
                    h[(idx(i, k - 1, m), idx(j, k, m))] += lower;
                    h[(idx(i, k, m), idx(j, k - 1, m))] += raise;
                }
            }
            if np > 1 {
                for m in 1..np {
                    let s = sqrt(m);
                    for k in 0..nr {
                        h[(idx(i, k, m - 1), idx(j, k, m))] += g_p * kij * s;
                        h[(idx(i, k, m), idx(j, k, m - 1))] -= g_p * kij * s;
                    }
                }
            }
        }
    }
    let asym = relative_asymmetry(&h);
    if asym.as_f64() > HERMITICITY_TOLERANCE {
        return Err(Error::NotHermitian(asym.as_f64()));
    }
    Ok(h)
}

/// Qubit-resonator Hamiltonian in the truncated product basis.
pub fn build_coupled_hamiltonian<T: Scalar>(p: &CoupledParams<T>) -> Result<DMatrix<T>> {
    let sector = qubit_sector(p)?;
    assemble(
        &sector,
        p.omega_r,
        p.g_c,
        p.g_l,
        p.n_photons,
        None,
        DEFAULT_DIMENSION_CAP,
    )
}

/// Product-state quantum numbers of a dressed state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductLabel {
    pub qubit: usize,
    pub photons: usize,
    #[serde(default)]
    pub parasitic: usize,
}

impl ProductLabel {
    pub const fn new(qubit: usize, photons: usize) -> Self {
        Self {
            qubit,
            photons,
            parasitic: 0,
        }
    }
}

impl std::fmt::Display for ProductLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.parasitic == 0 {
            write!(f, "|{},{}>", self.qubit, self.photons)
        } else {
            write!(f, "|{},{},{}>", self.qubit, self.photons, self.parasitic)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedState<T> {
    /// GHz.
    pub energy: T,
    /// Product state with the largest overlap.
    pub label: ProductLabel,
    /// Squared overlap with `label`.
    pub overlap: T,
    /// `overlap` below the labeling threshold.
    pub mixed: bool,
}

#[derive(Debug, Clone)]
pub struct DressedSpectrum<T: Scalar> {
    pub states: Vec<DressedState<T>>,
    pub n_qubit_levels: usize,
    pub n_photons: usize,
    pub n_parasitic: usize,
}

impl<T: Scalar> DressedSpectrum<T> {
    /// Index of the unmixed dressed state carrying `label`.
    pub fn find(&self, label: ProductLabel) -> Option<usize> {
        self.states.iter().position(|s| !s.mixed && s.label == label)
    }

    pub fn energy_of(&self, label: ProductLabel) -> Result<T> {
        self.find(label).map(|i| self.states[i].energy).ok_or_else(|| {
            Error::Labeling(format!(
                "no dressed state with overlap >= {LABEL_THRESHOLD} on {label}; \
                 move away from the crossing or increase n_photons / n_qubit_levels"
            ))
        })
    }

    /// Transitions from the dressed ground state, ascending in energy.
    pub fn transitions(&self) -> Vec<DressedLine<T>> {
        let e0 = self.states[0].energy;
        self.states[1..]
            .iter()
            .map(|s| DressedLine {
                freq: s.energy - e0,
                label: s.label,
                overlap: s.overlap,
                mixed: s.mixed,
            })
            .collect()
    }
}

/// Dressed transition from the ground state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DressedLine<T> {
    /// GHz.
    pub freq: T,
    pub label: ProductLabel,
    pub overlap: T,
    pub mixed: bool,
}

impl<T> DressedLine<T> {
    /// Resonator excitation with the qubit and parasitic mode in their ground
    /// states.
    pub fn is_photon_like(&self) -> bool {
        !self.mixed && self.label.qubit == 0 && self.label.parasitic == 0 && self.label.photons == 1
    }

    pub fn is_qubit_like(&self) -> bool {
        !self.mixed && self.label.qubit > 0 && self.label.photons == 0 && self.label.parasitic == 0
    }

    /// Qubit excitation together with `photons >= 1` resonator quanta.
    pub fn is_replica(&self) -> bool {
        !self.mixed && self.label.qubit > 0 && self.label.photons > 0
    }
}

/// Diagonalizes an assembled Hamiltonian and labels every eigenstate.
pub fn label_spectrum<T: Scalar>(
    h: DMatrix<T>,
    n_qubit_levels: usize,
    n_photons: usize,
    n_parasitic: usize,
) -> Result<DressedSpectrum<T>> {
    let eig = sym_eigen(h)?;
    let dim = eig.values.len();
    let threshold = T::lit(LABEL_THRESHOLD);
    let states = (0..dim)
        .map(|s| {
            let col = eig.vectors.column(s);
            let (best, weight) = col
                .iter()
                .enumerate()
                .map(|(i, v)| (i, *v * *v))
                .fold((0, T::zero()), |acc, c| if c.1 > acc.1 { c } else { acc });
            let m = best % n_parasitic;
            let k = (best / n_parasitic) % n_photons;
            let i = best / (n_parasitic * n_photons);
            DressedState {
                energy: eig.values[s],
                label: ProductLabel {
                    qubit: i,
                    photons: k,
                    parasitic: m,
                },
                overlap: weight,
                mixed: weight < threshold,
            }
        })
        .collect();
    Ok(DressedSpectrum {
        states,
        n_qubit_levels,
        n_photons,
        n_parasitic,
    })
}

pub fn solve_coupled<T: Scalar>(p: &CoupledParams<T>) -> Result<DressedSpectrum<T>> {
    let h = build_coupled_hamiltonian(p)?;
    label_spectrum(h, p.n_qubit_levels, p.n_photons, 1)
}

/// Dressed transitions at one flux point.
#[derive(Debug, Clone, Serialize)]
pub struct DressedPoint<T> {
    pub phi_ext: T,
    pub lines: Vec<DressedLine<T>>,
}

/// Lowest `n_lines` dressed transitions at each flux. Parallel over flux;
/// output order follows `flux_list`.
pub fn dressed_spectrum<T: Scalar>(
    p: &CoupledParams<T>,
    flux_list: &[T],
    n_lines: usize,
) -> Result<Vec<DressedPoint<T>>> {
    p.validate()?;
    flux_list
        .par_iter()
        .map(|&phi| {
            let spec = solve_coupled(&p.with_flux(phi))?;
            let mut lines = spec.transitions();
            lines.truncate(n_lines);
            Ok(DressedPoint { phi_ext: phi, lines })
        })
        .collect()
}

/// Dispersive shift in MHz:
/// `[(E_11 - E_10) - (E_01 - E_00)] / 2` with `|qubit, photons>` labels.
pub fn dispersive_shift<T: Scalar>(p: &CoupledParams<T>, phi_ext: T) -> Result<T> {
    let spec = solve_coupled(&p.with_flux(phi_ext))?;
    dispersive_shift_of(&spec)
}

pub fn dispersive_shift_of<T: Scalar>(spec: &DressedSpectrum<T>) -> Result<T> {
    let e = |q, k| spec.energy_of(ProductLabel::new(q, k));
    let chi = ((e(1, 1)? - e(1, 0)?) - (e(0, 1)? - e(0, 0)?)) * T::lit(0.5);
    Ok(chi * T::lit(1e3))
}
