mod commands;
mod config;
mod error;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{admittance, classify, fit, numbersplit, parasitic, spectrum, t1, t2};
use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(
    name = "rfsquid",
    version,
    about = "Simulate, classify and fit rf-SQUID qubit spectra"
)]
struct Cli {
    /// Worker threads for flux sweeps and model evaluation.
    #[arg(long, global = true, env = "RFSQUID_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Transition frequencies versus flux, bare or dressed.
    Spectrum(spectrum::SpectrumArgs),
    /// Fit qubit energies and couplings to a spectroscopy dataset.
    Fit(fit::FitArgs),
    /// Regime label from energy ratios and impedance.
    Classify(classify::ClassifyArgs),
    /// Dielectric-loss T1 versus flux, or fit Q_diel to data.
    T1(t1::T1Args),
    /// Flux-noise echo T2 versus flux, or fit its amplitude to data.
    T2(t2::T2Args),
    /// Photon-number-split lineshapes: fit traces or render a model.
    Numbersplit(numbersplit::NumberSplitArgs),
    /// Parasitic coil mode frequency, coupling and admittance.
    Parasitic(parasitic::ParasiticArgs),
    /// Fit the lumped qubit-plus-coil circuit to an admittance sweep.
    AdmittanceFit(admittance::AdmittanceFitArgs),
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(error::usage("thread count must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| error::usage(format!("cannot configure threads: {e}")))?;
    }
    let (outputs, dir) = match cli.command {
        Command::Spectrum(a) => {
            let dir = a.io.out_dir.clone();
            (spectrum::run(a)?, dir)
        }
        Command::Fit(a) => {
            let dir = a.io.out_dir.clone();
            (fit::run(a)?, dir)
        }
        Command::Classify(a) => {
            let dir = a.io.out_dir.clone();
            (classify::run(a)?, dir)
        }
        Command::T1(a) => {
            let dir = a.io.out_dir.clone();
            (t1::run(a)?, dir)
        }
        Command::T2(a) => {
            let dir = a.io.out_dir.clone();
            (t2::run(a)?, dir)
        }
        Command::Numbersplit(a) => {
            let dir = a.io.out_dir.clone();
            (numbersplit::run(a)?, dir)
        }
        Command::Parasitic(a) => {
            let dir = a.io.out_dir.clone();
            (parasitic::run(a)?, dir)
        }
        Command::AdmittanceFit(a) => {
            let dir = a.io.out_dir.clone();
            (admittance::run(a)?, dir)
        }
    };
    for path in outputs.commit(&dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("run `rfsquid --help` for usage");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
