pub mod admittance;
pub mod classify;
pub mod fit;
pub mod numbersplit;
pub mod parasitic;
pub mod spectrum;
pub mod t1;
pub mod t2;

use std::path::PathBuf;

use clap::Args;

#[derive(Debug, Clone, Args)]
pub struct IoArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    /// Directory for the output files.
    #[arg(long, short, default_value = ".")]
    pub out_dir: PathBuf,
}
