//! Serves the toy encoder, generator and perceptual stack over the external
//! backend protocol: one request on stdin, one tensor on stdout.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use morphforge_core::regen::external::{read_request, Op, Tensor};
use morphforge_core::regen::toy::{ToyBackends, ToyConfig};
use morphforge_core::regen::{EncoderBackend, GeneratorBackend, LatentVector, PerceptualBackend};
use morphforge_core::Result;

#[derive(Parser)]
#[command(name = "morphforge-toy-backend", version)]
struct Args {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train toy weights and write them as JSON.
    Train {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 150)]
        steps: usize,
    },
    /// Answer a single request read from stdin.
    Serve {
        #[arg(long)]
        weights: PathBuf,
    },
}

fn serve(weights: &Path) -> Result<Tensor> {
    let model = ToyBackends::load(weights)?;
    let (header, input) = read_request(std::io::stdin().lock())?;
    Ok(match header.op {
        Op::Encode => Tensor::vector(model.encoder.encode(&input.to_image()?)?.values()),
        Op::Generate => Tensor::image(
            &model
                .generator
                .generate(&LatentVector::new(input.to_f64())?)?,
        ),
        Op::Features => Tensor::vector(&model.perceptual.features(&input.to_image()?)?),
    })
}

fn main() -> ExitCode {
    let result = match Args::parse().command {
        Cmd::Train {
            out,
            seed,
            size,
            steps,
        } => ToyBackends::train(&ToyConfig {
            size,
            seed,
            train_steps: steps,
            ..ToyConfig::default()
        })
        .and_then(|m| m.save(&out)),
        Cmd::Serve { weights } => serve(&weights).and_then(|t| {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(&t.encode())
                .and_then(|_| stdout.flush())
                .map_err(|e| morphforge_core::Error::Backend(e.to_string()))
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("morphforge-toy-backend: {e}");
            ExitCode::from(2)
        }
    }
}
