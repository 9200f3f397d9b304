use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfsquid::coupled::CoupledParams;
use rfsquid::dataset::{DataPoint, SpectroscopyDataset};
use rfsquid::fit::{
    fit_coupling_free_resonator, fit_coupling_params, fit_pipeline, fit_qubit_params, qubit_objective,
    synthesize_coupled_lines, synthesize_qubit_lines, FitOptions, PipelineInitial,
};
use rfsquid::presets::{device, DEVICES};
use rfsquid::QubitParams;

fn flux_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 * i as f64 / (n - 1) as f64).collect()
}

fn add_noise(points: &mut [DataPoint], sigma: f64, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    for p in points {
        p.freq_ghz += normal.sample(&mut rng);
    }
}

fn dataset(points: Vec<DataPoint>) -> SpectroscopyDataset {
    SpectroscopyDataset {
        points,
        ..Default::default()
    }
}

fn perturbed(p: &QubitParams<f64>) -> QubitParams<f64> {
    QubitParams::new(p.e_l * 1.2, p.e_c * 0.8, p.e_j * 1.2, 0.0).unwrap()
}

fn max_rel_error(fit: &rfsquid::fit::FitResult, truth: &QubitParams<f64>) -> f64 {
    [("e_l", truth.e_l), ("e_c", truth.e_c), ("e_j", truth.e_j)]
        .iter()
        .map(|(n, v)| (fit.value(n).unwrap() / v - 1.0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn noiseless_round_trip_qubit_a() {
    let truth = device("A").unwrap().params(0.0);
    let pts = synthesize_qubit_lines(&truth, &flux_grid(20), &[(0, 1), (0, 2)]).unwrap();
    let fit = fit_qubit_params(&dataset(pts), &perturbed(&truth), &FitOptions::default()).unwrap();
    let err = max_rel_error(&fit, &truth);
    assert!(err < 1e-3, "{err} {:?}", fit.params);
    assert!(fit.converged);
    assert!(fit.truncation_check.unwrap().within_tolerance);
}

#[test]
fn noisy_round_trip_every_device() {
    for (i, d) in DEVICES.iter().enumerate() {
        let truth = d.params(0.0);
        let mut pts = synthesize_qubit_lines(&truth, &flux_grid(20), &[(0, 1), (0, 2)]).unwrap();
        add_noise(&mut pts, 0.005, 100 + i as u64);
        let fit = fit_qubit_params(&dataset(pts), &perturbed(&truth), &FitOptions::default()).unwrap();
        let err = max_rel_error(&fit, &truth);
        assert!(err < 0.01, "qubit {}: {err} {:?}", d.name, fit.params);
    }
}

#[test]
fn objective_is_order_and_weight_scale_invariant() {
    let truth = device("C").unwrap().params(0.0);
    let mut pts = synthesize_qubit_lines(&truth, &flux_grid(10), &[(0, 1), (0, 2)]).unwrap();
    add_noise(&mut pts, 0.005, 7);
    let guess = perturbed(&truth);
    let opts = FitOptions::default();
    let a = qubit_objective(&dataset(pts.clone()), &guess, 40, &opts);
    let mut rev = pts.clone();
    rev.reverse();
    rev.swap(3, 11);
    let b = qubit_objective(&dataset(rev), &guess, 40, &opts);
    assert_eq!(a.to_bits(), b.to_bits());

    let scaled: Vec<DataPoint> = pts.iter().map(|p| DataPoint { weight: 4.0, ..*p }).collect();
    let c = qubit_objective(&dataset(scaled.clone()), &guess, 40, &opts);
    assert!((c / a - 4.0).abs() < 1e-12);

    let f1 = fit_qubit_params(&dataset(pts), &guess, &opts).unwrap();
    let f4 = fit_qubit_params(&dataset(scaled), &guess, &opts).unwrap();
    for (p, q) in f1.params.iter().zip(&f4.params) {
        assert!((p.value - q.value).abs() < 1e-9, "{} {} {}", p.name, p.value, q.value);
    }
}

#[test]
fn refit_is_deterministic() {
    let truth = device("D").unwrap().params(0.0);
    let mut pts = synthesize_qubit_lines(&truth, &flux_grid(8), &[(0, 1), (0, 2)]).unwrap();
    add_noise(&mut pts, 0.005, 3);
    let opts = FitOptions::default();
    let a = fit_qubit_params(&dataset(pts.clone()), &perturbed(&truth), &opts).unwrap();
    let b = fit_qubit_params(&dataset(pts), &perturbed(&truth), &opts).unwrap();
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}

fn coupled_b() -> CoupledParams<f64> {
    let q = device("B").unwrap().params(0.0);
    CoupledParams::from_effective_couplings(q, 6.0, 0.063, 0.140).unwrap()
}

#[test]
fn coupling_round_trip_qubit_b() {
    let truth = coupled_b();
    let pts = synthesize_coupled_lines(&truth, &flux_grid(11), &[1, 2]).unwrap();
    let fit = fit_coupling_params(
        &dataset(pts),
        &truth.qubit,
        truth.omega_r,
        (truth.g_c * 1.2, truth.g_l * 0.8),
        &FitOptions::default(),
    )
    .unwrap();
    for (n, v) in [("g_c", truth.g_c), ("g_l", truth.g_l)] {
        let err = (fit.value(n).unwrap() / v - 1.0).abs();
        assert!(err < 0.05, "{n}: {err}");
    }
}

#[test]
fn uncoupled_data_gives_vanishing_couplings() {
    let q = device("B").unwrap().params(0.0);
    let truth = CoupledParams::new(q, 6.0, 0.0, 0.0).unwrap();
    let pts = synthesize_coupled_lines(&truth, &flux_grid(6), &[1]).unwrap();
    let opts = FitOptions {
        verify_truncation: false,
        ..Default::default()
    };
    let fit = fit_coupling_params(&dataset(pts), &q, 6.0, (0.01, 0.02), &opts).unwrap();
    for p in &fit.params {
        assert!(p.value.abs() < 1e-3, "{}: {}", p.name, p.value);
    }
}

/// Dispersive-window resonator data: with omega_r free the couplings trade
/// off against it; with omega_r fixed they are determined.
#[test]
fn free_resonator_frequency_is_degenerate() {
    let truth = coupled_b();
    let flux: Vec<f64> = (0..11).map(|i| 0.4 + 0.01 * i as f64).collect();
    let mut pts = synthesize_coupled_lines(&truth, &flux, &[]).unwrap();
    add_noise(&mut pts, 5e-5, 11);
    let data = dataset(pts);
    let opts = FitOptions {
        verify_truncation: false,
        max_iterations: 1000,
        ..Default::default()
    };
    let starts = [(1.3, 0.7, 5.98), (0.7, 1.3, 6.02)];
    let free: Vec<_> = starts
        .iter()
        .map(|s| {
            fit_coupling_free_resonator(&data, &truth.qubit, (truth.g_c * s.0, truth.g_l * s.1, s.2), &opts).unwrap()
        })
        .collect();
    let (a, b) = (&free[0], &free[1]);
    let spread = (a.value("g_c").unwrap() - b.value("g_c").unwrap()).abs() / truth.g_c;
    assert!(spread > 0.05, "solutions coincide: {:?} {:?}", a.params, b.params);
    assert!((a.rss - b.rss).abs() / a.rss.max(b.rss) < 0.01, "{} {}", a.rss, b.rss);

    for s in starts {
        let fixed = fit_coupling_params(
            &data,
            &truth.qubit,
            truth.omega_r,
            (truth.g_c * s.0, truth.g_l * s.1),
            &opts,
        )
        .unwrap();
        for (n, v) in [("g_c", truth.g_c), ("g_l", truth.g_l)] {
            let err = (fixed.value(n).unwrap() / v - 1.0).abs();
            assert!(err < 0.05, "{n}: {err} {:?}", fixed.params);
        }
    }
}

#[test]
fn pipeline_round_trip_qubit_f() {
    let q = device("F").unwrap().params(0.0);
    let truth = CoupledParams::from_effective_couplings(q, 6.0, 0.090, 0.007).unwrap();
    let pts = synthesize_coupled_lines(&truth, &flux_grid(11), &[1, 2]).unwrap();
    let init = PipelineInitial {
        qubit: perturbed(&q),
        omega_r: 6.0,
        g_c: truth.g_c * 1.2,
        g_l: truth.g_l * 0.8,
    };
    let report = fit_pipeline(&dataset(pts), &init, &FitOptions::default()).unwrap();
    assert_eq!(report.stages.len(), 3);
    let q_err = max_rel_error(report.qubit(), &q);
    assert!(q_err < 1e-3, "{q_err}");
    let c = report.coupling().unwrap();
    for (n, v) in [("g_c", truth.g_c), ("g_l", truth.g_l)] {
        let err = (c.value(n).unwrap() / v - 1.0).abs();
        assert!(err < 0.01, "{n}: {err}");
    }
}

#[test]
fn empty_dataset_is_rejected() {
    let q = device("F").unwrap().params(0.0);
    let init = PipelineInitial {
        qubit: q,
        omega_r: 6.0,
        g_c: 0.1,
        g_l: 0.1,
    };
    let err = fit_pipeline(&SpectroscopyDataset::default(), &init, &FitOptions::default()).unwrap_err();
    assert!(matches!(err, rfsquid::Error::Dataset(_)), "{err}");
    assert!(err.to_string().contains("no points"), "{err}");
}
