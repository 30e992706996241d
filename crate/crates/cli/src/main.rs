// Copyright 2026 The encommons Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! `encommons`: keys, matching, the commons service, simulation and the
//! bandwidth estimator behind one binary.
//!
//! Exit codes: 0 success, 1-6 the commons wire status of a failed call,
//! 10 any other failure (bad input, unreadable file, failed check),
//! 64 command-line usage error.

mod commons;
mod keys;
mod sim;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use encommons::commons::CommonsError;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

const EXIT_FAILURE: u8 = 10;
const EXIT_USAGE: u8 = 64;

#[derive(Debug, Parser)]
#[command(name = "encommons", version, about = "Exposure notification tooling and commons service")]
struct Cli {
    /// Seed for every random draw the command makes.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for instance state and credentials.
    #[arg(long, global = true, env = "EN_COMMONS_DATA", default_value = "encommons-data")]
    data_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate daily keys as `tek_hex,day_start` lines.
    Keygen(keys::KeygenArgs),
    /// Print the 96 `interval,rpi_hex` identifiers of a key's day.
    Derive(keys::DeriveArgs),
    /// Match an observation log against a key export and print the risk.
    Match(keys::MatchArgs),
    /// Generate or verify test-vector files.
    #[command(subcommand)]
    Vectors(keys::VectorsCommand),
    /// Make or check lighthouse receipt codes.
    #[command(subcommand)]
    Receipt(keys::ReceiptCommand),
    /// Daily download size and matching cost.
    Estimate(keys::EstimateArgs),
    /// Run a commons instance or talk to one.
    #[command(subcommand)]
    Commons(commons::CommonsCommand),
    /// Run simulations.
    #[command(subcommand)]
    Sim(sim::SimCommand),
}

pub(crate) struct Ctx {
    pub seed: Option<u64>,
    pub data_dir: PathBuf,
}

impl Ctx {
    /// Independent deterministic stream per purpose when seeded.
    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        match self.seed {
            Some(s) => {
                let mut r = ChaCha20Rng::seed_from_u64(s);
                r.set_stream(stream);
                r
            }
            None => ChaCha20Rng::from_os_rng(),
        }
    }

    pub fn data_path(&self, name: &str) -> PathBuf {
        self.data_dir.join(name)
    }

    pub fn ensure_data_dir(&self) -> anyhow::Result<()> {
        std::fs::create_dir_all(&self.data_dir)
            .with_context(|| format!("creating {}", self.data_dir.display()))
    }
}

pub(crate) fn read_file(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        data_dir: cli.data_dir,
    };
    match cli.command {
        Command::Keygen(a) => keys::keygen(&ctx, a),
        Command::Derive(a) => keys::derive(a),
        Command::Match(a) => keys::run_match(a),
        Command::Vectors(c) => keys::vectors(&ctx, c),
        Command::Receipt(c) => keys::receipt(c),
        Command::Estimate(a) => keys::estimate(a),
        Command::Commons(c) => commons::run(&ctx, c),
        Command::Sim(c) => sim::run(&ctx, c),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<CommonsError>() {
        Some(e) => e.status().code(),
        None => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
