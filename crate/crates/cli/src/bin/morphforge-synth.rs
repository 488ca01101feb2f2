//! Writes the synthetic face dataset: PNG captures, 68-point landmark files
//! and a manifest.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use morphforge_core::synth::{write_dataset, DatasetOptions};

#[derive(Parser)]
#[command(name = "morphforge-synth", version)]
struct Args {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 32)]
    identities: usize,
    #[arg(long, default_value_t = 64)]
    size: usize,
    #[arg(long, default_value_t = 2)]
    probes: usize,
    /// Pixel noise standard deviation.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let a = Args::parse();
    let opts = DatasetOptions {
        identities: a.identities,
        size: a.size,
        probes_per_identity: a.probes,
        noise: a.noise,
        seed: a.seed,
    };
    match write_dataset(&a.out, &opts) {
        Ok(manifest) => {
            println!("{}", manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("morphforge-synth: {e}");
            ExitCode::from(2)
        }
    }
}
