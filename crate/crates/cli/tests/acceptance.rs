//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! value, its pinned tolerance and the runtime against its budget.
//!
//! Runs without the libtest harness so every line is printed; exits nonzero
//! when any criterion fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rfsquid::classify::{classify, Regime};
use rfsquid::coupled::{dispersive_shift, CoupledParams};
use rfsquid::dataset::{DataPoint, LineKind, SpectroscopyDataset};
use rfsquid::fit::{
    fit_coupling_free_resonator, fit_coupling_params, fit_qubit_params, synthesize_coupled_lines,
    synthesize_qubit_lines, FitOptions, FitResult,
};
use rfsquid::noise::{
    fit_number_split_trace, fit_t1_quality, fit_t2_flux_noise, flux_slope, spacing_consistency, t1_capacitive, t2_echo,
    NumberSplitModel, T1Model, T2Model, TimeUnit, Trace,
};
use rfsquid::parasitic::{parasitic_mode_frequency, ParasiticParams};
use rfsquid::presets::{device, DEVICES};
use rfsquid::{delocalization_probability, diagonalize, QubitParams, Truncation};
use rfsquid_oracle::{grid_energies_extrapolated, Circuit, GridSpec};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

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

fn qubit_error(fit: &FitResult, truth: &QubitParams<f64>) -> f64 {
    [("e_l", truth.e_l), ("e_c", truth.e_c), ("e_j", truth.e_j)]
        .iter()
        .map(|(n, v)| rel(fit.value(n).unwrap(), *v))
        .fold(0.0, f64::max)
}

fn coupling_error(fit: &FitResult, truth: &CoupledParams<f64>) -> f64 {
    rel(fit.value("g_c").unwrap(), truth.g_c).max(rel(fit.value("g_l").unwrap(), truth.g_l))
}

fn c1_phase_zpf() -> Verdict {
    let (name, worst) = DEVICES
        .iter()
        .map(|d| (d.name, (d.params(0.0).phase_zpf() - d.phi_zpf).abs()))
        .fold(("", 0.0), |a, b| if b.1 > a.1 { b } else { a });
    verdict(
        worst <= 0.01,
        format!("max |phi_zpf - table| = {worst:.4} at qubit {name} (tol 0.01)"),
    )
}

fn c2_harmonic_limit() -> Verdict {
    let mut worst: f64 = 0.0;
    for d in &DEVICES {
        let p = QubitParams::new(d.e_l, d.e_c, 0.0, 0.0).unwrap();
        let w = (8.0 * d.e_l * d.e_c).sqrt();
        let fock = diagonalize(&p, Truncation::default()).unwrap().transition(0, 1);
        let c = Circuit::new(d.e_l, d.e_c, 0.0, 0.0);
        let grid = grid_energies_extrapolated(&c, &GridSpec::symmetric(8.0 * PI, 8001), 2).unwrap();
        worst = worst.max(rel(fock, w)).max(rel(grid[1] - grid[0], w));
    }
    verdict(
        worst <= 1e-6,
        format!("max relative f01 error {worst:.1e} over both solvers (tol 1e-6)"),
    )
}

fn c3_oracle_equivalence() -> Verdict {
    let mut worst: f64 = 0.0;
    for d in &DEVICES {
        for phi in [0.0, 0.25, 0.5] {
            let p = d.params(phi);
            let fock = diagonalize(&p, Truncation::default()).unwrap();
            let grid =
                grid_energies_extrapolated(&Circuit::new(p.e_l, p.e_c, p.e_j, phi), &GridSpec::default(), 5).unwrap();
            for k in 0..5 {
                worst = worst.max((fock.energies[k] - grid[k]).abs() * 1e3);
            }
        }
    }
    verdict(
        worst < 1.0,
        format!("max level difference {worst:.4} MHz over 8 x 3 x 5 (tol 1 MHz)"),
    )
}

fn c4_classification() -> Verdict {
    let expect = [
        ("E", Regime::Fluxonium),
        ("F", Regime::QuasiCharge),
        ("G", Regime::Flux),
        ("H", Regime::Flux),
    ];
    let got: Vec<String> = expect
        .iter()
        .map(|(n, _)| format!("{n}={}", classify(&device(n).unwrap().params(0.0)).label.as_str()))
        .collect();
    let pass = expect
        .iter()
        .all(|(n, r)| classify(&device(n).unwrap().params(0.0)).label == *r);
    verdict(pass, got.join(" "))
}

fn c5_delocalization() -> Verdict {
    let p = delocalization_probability(&device("F").unwrap().params(0.5), Truncation::default()).unwrap();
    verdict(
        (p - 0.30).abs() <= 0.03,
        format!("qubit F at half flux P = {p:.4} (target 0.30 +/- 0.03)"),
    )
}

fn c6_parasitic_mode() -> Verdict {
    let p = ParasiticParams {
        c_q: 4.8,
        l_q: 530.0,
        c_p: 0.47,
        l_p: 1.3,
        e_j: 1.99,
    };
    let f = parasitic_mode_frequency(&p);
    verdict(rel(f, 6.74) <= 0.01, format!("{f:.4} GHz (target 6.74 GHz +/- 1%)"))
}

fn c7_fit_round_trip() -> Verdict {
    let opts = FitOptions::default();
    let mut worst_qubit: f64 = 0.0;
    for (i, d) in DEVICES.iter().enumerate() {
        let truth = d.params(0.0);
        let mut pts = synthesize_qubit_lines(&truth, &flux_grid(20), &[(0, 1), (0, 2)]).unwrap();
        add_noise(&mut pts, 0.005, 100 + i as u64);
        let start = QubitParams::new(truth.e_l * 1.2, truth.e_c * 0.8, truth.e_j * 1.2, 0.0).unwrap();
        let fit = fit_qubit_params(&dataset(pts), &start, &opts).unwrap();
        worst_qubit = worst_qubit.max(qubit_error(&fit, &truth));
    }
    // Resonator lines are read to a tenth of the linewidth; weights are
    // inverse variances relative to the 5 MHz qubit lines.
    let mut worst_g_c: f64 = 0.0;
    let mut worst_g_l: f64 = 0.0;
    let mut weak_g_l = Vec::new();
    for (i, d) in DEVICES.iter().enumerate() {
        let truth = d.coupled(0.0).unwrap();
        let mut pts = synthesize_coupled_lines(&truth, &flux_grid(20), &[1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(200 + i as u64);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for p in &mut pts {
            let sigma = if p.kind == LineKind::ResonatorLine {
                d.kappa_tot_mhz * 1e-4
            } else {
                0.005
            };
            p.freq_ghz += sigma * normal.sample(&mut rng);
            p.weight = (0.005 / sigma).powi(2);
        }
        let fit = fit_coupling_params(
            &dataset(pts),
            &truth.qubit,
            truth.omega_r,
            (truth.g_c * 1.2, truth.g_l * 0.8),
            &opts,
        )
        .unwrap();
        worst_g_c = worst_g_c.max(rel(fit.value("g_c").unwrap(), truth.g_c));
        if d.g_l_phi_mhz >= 50.0 {
            worst_g_l = worst_g_l.max(rel(fit.value("g_l").unwrap(), truth.g_l));
        } else {
            weak_g_l.push(format!(
                "{}:{:.2}/{:.2}",
                d.name,
                1e3 * fit.value("g_l").unwrap(),
                1e3 * truth.g_l
            ));
        }
    }
    verdict(
        worst_qubit <= 0.01 && worst_g_c <= 0.05 && worst_g_l <= 0.05,
        format!(
            "max energy error {:.3}% over 8 devices (tol 1%); max g_c error {:.2}% over 8 devices, \
             max g_l error {:.2}% on B, C, D (tol 5%); weak g_l fit/true MHz {}",
            100.0 * worst_qubit,
            100.0 * worst_g_c,
            100.0 * worst_g_l,
            weak_g_l.join(" ")
        ),
    )
}

fn c8_degeneracy() -> Verdict {
    let q = device("B").unwrap().params(0.0);
    let truth = CoupledParams::from_effective_couplings(q, 6.0, 0.063, 0.140).unwrap();
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
    let free: Vec<FitResult> = starts
        .iter()
        .map(|s| fit_coupling_free_resonator(&data, &q, (truth.g_c * s.0, truth.g_l * s.1, s.2), &opts).unwrap())
        .collect();
    let spread = rel(free[0].value("g_c").unwrap(), free[1].value("g_c").unwrap());
    let rss_gap = (free[0].rss - free[1].rss).abs() / free[0].rss.max(free[1].rss);
    let fixed_err = starts
        .iter()
        .map(|s| {
            let f = fit_coupling_params(&data, &q, truth.omega_r, (truth.g_c * s.0, truth.g_l * s.1), &opts).unwrap();
            coupling_error(&f, &truth)
        })
        .fold(0.0, f64::max);
    verdict(
        spread > 0.05 && rss_gap < 0.01 && fixed_err <= 0.05,
        format!(
            "free omega_r: g_c {:.4} vs {:.4} GHz, RSS gap {:.2}% (tol 1%); fixed omega_r: max coupling error {:.2}% (tol 5%)",
            free[0].value("g_c").unwrap(),
            free[1].value("g_c").unwrap(),
            100.0 * rss_gap,
            100.0 * fixed_err
        ),
    )
}

fn c9_sweet_spot() -> Verdict {
    let mut worst_slope: f64 = 0.0;
    for d in &DEVICES {
        for phi in [0.0, 0.5] {
            worst_slope = worst_slope.max(flux_slope(&d.params(phi)).unwrap().0 * 1e3);
        }
    }
    let model = T2Model {
        a_phi_sqrt: 646.0,
        gamma_filter: 1.0,
        t_phi: 6.2,
    };
    let t1 = 2.25;
    let limit = 1.0 / (1.0 / (2.0 * t1) + 1.0 / model.t_phi);
    let t2_err = DEVICES
        .iter()
        .map(|d| rel(t2_echo(&d.params(0.5), &model, t1).unwrap(), limit))
        .fold(0.0, f64::max);
    verdict(
        worst_slope < 1.0 && t2_err < 1e-6,
        format!("max |df01/dPhi| {worst_slope:.2e} MHz/Phi0 (tol 1); T2 vs sweet-spot limit {t2_err:.1e} (tol 1e-6)"),
    )
}

fn c10_number_splitting() -> Verdict {
    let coupled = device("C").unwrap().coupled(0.5).unwrap();
    let chi = dispersive_shift(&coupled, 0.5).unwrap();
    let truth = NumberSplitModel {
        n_bar: 0.8,
        two_chi: 2.0 * chi,
        linewidth: 3.0,
        f0: 1.474,
        amplitude: 1.0,
    };
    let span = truth.two_chi.abs() * 1e-3 * 6.0;
    let lo = truth.f0 - span - 0.02;
    let freqs: Vec<f64> = (0..801).map(|i| lo + (span + 0.04) * i as f64 / 800.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let trace = Trace {
        label: "qubit-C".into(),
        amplitudes: freqs
            .iter()
            .map(|&f| truth.evaluate(f) + noise.sample(&mut rng))
            .collect(),
        freqs_ghz: freqs,
    };
    let m = fit_number_split_trace(&trace).unwrap().model;
    let err = rel(m.n_bar, truth.n_bar)
        .max(rel(m.two_chi, truth.two_chi))
        .max(rel(m.linewidth, truth.linewidth));
    let cross = spacing_consistency(m.two_chi, chi);
    verdict(
        err <= 0.05 && cross <= 0.10,
        format!(
            "max (n_bar, 2chi, linewidth) error {:.2}% (tol 5%); 2chi {:.3} MHz vs dressed {:.3} MHz, {:.2}% (tol 10%)",
            100.0 * err,
            m.two_chi,
            2.0 * chi,
            100.0 * cross
        ),
    )
}

fn c11_noise_fits() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut worst: f64 = 0.0;
    for (name, q_diel, temperature) in [("F", 25e3, 0.08), ("E", 57e3, 0.06)] {
        let q = device(name).unwrap().params(0.5);
        let model = T1Model::new(q_diel, temperature).unwrap();
        let pts: Vec<(f64, f64)> = (0..13)
            .map(|i| {
                let phi = 0.2 + 0.025 * i as f64;
                (
                    phi,
                    t1_capacitive(&q.with_flux(phi), &model).unwrap() * (1.0 + noise.sample(&mut rng)),
                )
            })
            .collect();
        let fit = fit_t1_quality(&pts, TimeUnit::Microseconds, &q, temperature, None).unwrap();
        worst = worst.max(rel(fit.q_diel, q_diel));
    }
    for (name, a, t1, t_phi) in [("F", 646.0, 2.25, 6.2), ("E", 673.0, 9.62, 30.0)] {
        let q = device(name).unwrap().params(0.5);
        let model = T2Model {
            a_phi_sqrt: a,
            gamma_filter: 1.0,
            t_phi,
        };
        let pts: Vec<(f64, f64)> = (0..15)
            .map(|i| {
                let phi = 0.43 + 0.01 * i as f64;
                (
                    phi,
                    t2_echo(&q.with_flux(phi), &model, t1).unwrap() * (1.0 + noise.sample(&mut rng)),
                )
            })
            .collect();
        let fit = fit_t2_flux_noise(&pts, &q, |_| t1, 1.0).unwrap();
        worst = worst.max(rel(fit.a_phi_sqrt, a));
    }
    verdict(
        worst <= 0.03,
        format!(
            "max error over Q {{25000, 57000}}, sqrt(A) {{646, 673}}: {:.2}% (tol 3%)",
            100.0 * worst
        ),
    )
}

fn c12_determinism() -> Verdict {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let runs: [&[&str]; 8] = [
        &["spectrum", "-c", "spectrum_coupled.toml"],
        &["fit", "--dataset", "qubit_b.csv", "--preset", "B"],
        &["classify", "--all-presets"],
        &[
            "t1",
            "--preset",
            "E",
            "--temperature",
            "0.06",
            "--data",
            "t1_points.csv",
        ],
        &["t2", "-c", "t2_fit.toml"],
        &[
            "numbersplit",
            "--trace",
            "trace_1.csv",
            "--trace",
            "trace_2.csv",
            "--preset",
            "C",
            "--flux",
            "0.5",
        ],
        &["parasitic"],
        &["admittance-fit", "--input", "admittance.csv"],
    ];
    let mut differing = Vec::new();
    for args in runs {
        let outputs: Vec<Vec<(String, Vec<u8>)>> = ["1", "2"]
            .iter()
            .map(|threads| {
                let dir = tempfile::tempdir().unwrap();
                let status = Command::new(env!("CARGO_BIN_EXE_rfsquid"))
                    .args(["--threads", threads])
                    .args(args)
                    .arg("--out-dir")
                    .arg(dir.path())
                    .current_dir(&fixtures)
                    .output()
                    .unwrap()
                    .status;
                assert!(status.success(), "{args:?}");
                let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.path())
                    .unwrap()
                    .map(|e| {
                        let e = e.unwrap();
                        (
                            e.file_name().to_string_lossy().into_owned(),
                            std::fs::read(e.path()).unwrap(),
                        )
                    })
                    .collect();
                files.sort();
                files
            })
            .collect();
        if outputs[0] != outputs[1] {
            differing.push(args[0]);
        }
    }
    let detail = if differing.is_empty() {
        "8 subcommands byte-identical across repeated runs (1 and 2 threads)".to_string()
    } else {
        format!("outputs differ: {}", differing.join(", "))
    };
    verdict(differing.is_empty(), detail)
}

type Criterion = (u8, &'static str, Duration, fn() -> Verdict);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 12] = [
        (
            1,
            "phase zero-point fluctuation",
            Duration::from_millis(1),
            c1_phase_zpf,
        ),
        (2, "harmonic limit", secs(1), c2_harmonic_limit),
        (3, "Fock basis vs phase grid", secs(30), c3_oracle_equivalence),
        (4, "regime classification", secs(1), c4_classification),
        (5, "delocalization", secs(5), c5_delocalization),
        (6, "parasitic mode", secs(1), c6_parasitic_mode),
        (7, "fit round trip", secs(300), c7_fit_round_trip),
        (8, "coupling degeneracy", secs(120), c8_degeneracy),
        (9, "sweet-spot properties", secs(10), c9_sweet_spot),
        (10, "number-splitting round trip", secs(30), c10_number_splitting),
        (11, "noise-model fits", secs(30), c11_noise_fits),
        (12, "CLI determinism", secs(120), c12_determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let t = Instant::now();
        let v = run();
        let elapsed = t.elapsed();
        let pass = v.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {} {name}: {} [{:.3} s, budget {:.3} s]",
            if pass { "PASS" } else { "FAIL" },
            v.detail,
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
