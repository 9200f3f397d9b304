//! Fock-basis solver against the independent phase-grid oracle.

use rfsquid::presets::DEVICES;
use rfsquid::qubit::{transition_flux_slope, QubitOperator};
use rfsquid::{delocalization_probability, diagonalize, QubitParams, Truncation};
use rfsquid_oracle::{
    grid_delocalization, grid_diagonalize, grid_energies_extrapolated, grid_matrix_elements, Circuit, GridSpec,
};

fn circuit(p: &QubitParams<f64>) -> Circuit {
    Circuit::new(p.e_l, p.e_c, p.e_j, p.phi_ext)
}

#[test]
fn lowest_levels_match_phase_grid() {
    let grid = GridSpec::default();
    for d in &DEVICES {
        for phi in [0.0, 0.25, 0.5] {
            let p = d.params(phi);
            let fock = diagonalize(&p, Truncation::default()).unwrap();
            assert!(fock.converged(), "qubit {} at {phi} not converged", d.name);
            let reference = grid_energies_extrapolated(&circuit(&p), &grid, 5).unwrap();
            for k in 0..5 {
                let diff_mhz = (fock.energies[k] - reference[k]).abs() * 1e3;
                assert!(diff_mhz < 1.0, "qubit {} flux {phi} level {k}: {diff_mhz} MHz", d.name);
            }
        }
    }
}

#[test]
fn oracle_self_checks() {
    let grid = GridSpec::default();
    for d in &DEVICES {
        let c = circuit(&d.params(0.5));
        let s = grid_diagonalize(&c, &grid, 5).unwrap();
        assert!(
            s.refinement_shift_mhz < 0.1,
            "qubit {}: {}",
            d.name,
            s.refinement_shift_mhz
        );
        assert!(!s.too_coarse);
        let wide = GridSpec::symmetric(12.0 * std::f64::consts::PI, 2 * grid.n_points - 1);
        let a = grid_energies_extrapolated(&c, &grid, 5).unwrap();
        let b = grid_energies_extrapolated(&c, &wide, 5).unwrap();
        for k in 0..5 {
            assert!((a[k] - b[k]).abs() * 1e3 < 0.01, "boundary sensitivity {}", d.name);
        }
    }
}

#[test]
fn harmonic_limit_on_both_solvers() {
    for d in &DEVICES {
        let p = QubitParams::new(d.e_l, d.e_c, 0.0, 0.0).unwrap();
        let w = (8.0 * d.e_l * d.e_c).sqrt();
        let fock = diagonalize(&p, Truncation::default()).unwrap();
        assert!(((fock.transition(0, 1) - w) / w).abs() < 1e-6);
        let grid = grid_energies_extrapolated(&circuit(&p), &GridSpec::default(), 2).unwrap();
        assert!((((grid[1] - grid[0]) - w) / w).abs() < 1e-6, "grid, qubit {}", d.name);
    }
}

#[test]
fn qubit_a_half_flux_f01() {
    let p = QubitParams::new(0.618, 2.75, 8.55, 0.5).unwrap();
    let fock = diagonalize(&p, Truncation::default()).unwrap();
    let reference = grid_energies_extrapolated(&circuit(&p), &GridSpec::default(), 2).unwrap();
    assert!(((fock.transition(0, 1) - (reference[1] - reference[0])) * 1e3).abs() < 1.0);
}

#[test]
fn matrix_elements_match_grid() {
    // Qubit E at half flux.
    let p = QubitParams::new(0.205, 2.97, 4.89, 0.5).unwrap();
    let fock = diagonalize(&p, Truncation::default()).unwrap();
    let spec = grid_diagonalize(&circuit(&p), &GridSpec::default(), 4).unwrap();
    let (x, k) = grid_matrix_elements(&spec, p.phi_ext);
    for (i, j) in [(0, 1), (0, 2), (1, 2), (0, 3)] {
        let phi_fock = fock.element(QubitOperator::Phase, i, j);
        let n_fock = fock.element(QubitOperator::Charge, i, j);
        let rel_phi = (phi_fock - x[i][j].abs()) / x[i][j].abs().max(1e-3);
        let rel_n = (n_fock - k[i][j].abs()) / k[i][j].abs().max(1e-3);
        assert!(rel_phi.abs() < 1e-4, "phi ({i},{j}): {phi_fock} vs {}", x[i][j]);
        assert!(rel_n.abs() < 1e-4, "n ({i},{j}): {n_fock} vs {}", k[i][j]);
    }
}

#[test]
fn qubit_f_transition_matches_grid() {
    let p = QubitParams::new(0.215, 3.40, 1.99, 0.5).unwrap();
    let fock = diagonalize(&p, Truncation::default()).unwrap();
    let r = grid_energies_extrapolated(&circuit(&p), &GridSpec::default(), 3).unwrap();
    for j in 1..3 {
        assert!(((fock.transition(0, j) - (r[j] - r[0])) * 1e3).abs() < 1.0);
    }
}

#[test]
fn delocalization_matches_grid() {
    for name in ["F", "E", "H"] {
        let d = rfsquid::presets::device(name).unwrap();
        let p = d.params(0.5);
        let fock = delocalization_probability(&p, Truncation::default()).unwrap();
        let grid = grid_delocalization(&circuit(&p), &GridSpec::default()).unwrap();
        assert!((fock - grid).abs() < 1e-4, "qubit {name}: {fock} vs {grid}");
    }
    let h = rfsquid::presets::device("H").unwrap().params(0.5);
    assert!(delocalization_probability(&h, Truncation::default()).unwrap() < 0.01);
}

#[test]
fn cos_phi_ground_expectation_matches_grid() {
    // The ground-state expectation converges more slowly than the energies:
    // at 40 states it is still ~3e-6 off, at 80 it is settled.
    let p = QubitParams::new(0.618, 2.75, 8.55, 0.0).unwrap();
    let dim = 80;
    let ops = rfsquid::build_operators(&p, dim).unwrap();
    let s = diagonalize(&p, Truncation::Fixed(dim)).unwrap();
    let v = s.eigenvectors.column(0);
    let fock = (v.transpose() * &ops.cos_phi_op * v)[(0, 0)];
    let expectation = |grid: &GridSpec| -> f64 {
        let g = grid_diagonalize(&circuit(&p), grid, 1).unwrap();
        g.wavefunctions[0]
            .iter()
            .zip(grid.points())
            .map(|(psi, phi)| psi * psi * phi.cos())
            .sum::<f64>()
            * grid.step()
    };
    let grid = GridSpec::default();
    let oracle = (4.0 * expectation(&grid.refined()) - expectation(&grid)) / 3.0;
    assert!((fock - oracle).abs() < 1e-8, "{fock} vs {oracle}");
}

#[test]
fn flux_slope_is_richardson_consistent() {
    for d in &DEVICES {
        for phi in [0.45, 0.47, 0.53, 0.55] {
            let p = d.params(phi);
            let s = transition_flux_slope(&p, 0, 1, 80, 1e-4).unwrap();
            let rel = ((s.central - s.richardson) / s.richardson).abs();
            assert!(
                rel < 1e-3 || s.richardson.abs() < 1e-6,
                "qubit {} at {phi}: {rel}",
                d.name
            );
        }
    }
}
