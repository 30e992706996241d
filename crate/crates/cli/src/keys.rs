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

use std::fmt::Write as _;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use encommons::commons::parse_export;
use encommons::device::{check_receipt_str, ReceiptCode};
use encommons::estimate::{estimate as compute_estimate, EstimateInput};
use encommons::protocol::{
    derive_rpi, derive_rpi_sequence, generate_tek, match_exposures, parse_hex16, parse_observation_log,
    parse_test_vectors, score_risk, write_test_vectors, DiagnosisKey, ExposurePolicy, IntervalNumber,
    TemporaryExposureKey, TestVector, INTERVALS_PER_DAY,
};

use crate::{read_file, write_output, Ctx};

const KEYGEN_STREAM: u64 = 1;
const VECTORS_STREAM: u64 = 2;

#[derive(Debug, Args)]
pub struct KeygenArgs {
    /// Day index of the first key (days since the Unix epoch).
    #[arg(long, default_value_t = 0)]
    day: u32,
    /// Consecutive days to generate a key for.
    #[arg(long, default_value_t = 1)]
    count: u32,
}

#[derive(Debug, Args)]
pub struct DeriveArgs {
    #[arg(long)]
    tek: String,
    #[arg(long)]
    day: u32,
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    #[arg(long)]
    max_attenuation_db: Option<f64>,
    #[arg(long)]
    min_total_duration_s: Option<f64>,
    #[arg(long)]
    weight_confirmed: Option<f64>,
    #[arg(long)]
    weight_probable: Option<f64>,
}

impl PolicyArgs {
    fn policy(&self) -> anyhow::Result<ExposurePolicy> {
        let mut p = ExposurePolicy::default();
        if let Some(v) = self.max_attenuation_db {
            p.max_attenuation_db = v;
        }
        if let Some(v) = self.min_total_duration_s {
            p.min_total_duration_s = v;
        }
        if let Some(v) = self.weight_confirmed {
            p.weight_confirmed = v;
        }
        if let Some(v) = self.weight_probable {
            p.weight_probable = v;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Key export file.
    #[arg(long)]
    keys: PathBuf,
    /// Observation log file.
    #[arg(long)]
    log: PathBuf,
    #[command(flatten)]
    policy: PolicyArgs,
}

#[derive(Debug, Subcommand)]
pub enum VectorsCommand {
    /// Write vectors for every interval of freshly generated keys.
    Generate {
        #[arg(long, default_value_t = 0)]
        day: u32,
        #[arg(long, default_value_t = 1)]
        keys: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every identifier in a vector file.
    Verify {
        #[arg(long)]
        file: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReceiptCommand {
    /// Code a lighthouse with key `tek` prints during `interval` of `day`.
    Make {
        #[arg(long)]
        tek: String,
        #[arg(long)]
        day: u32,
        /// Interval within the day, 0 to 95.
        #[arg(long)]
        interval: u32,
    },
    /// Whether a receipt code belongs to a published key.
    Check {
        #[arg(long)]
        code: String,
        #[arg(long)]
        keys: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    diagnoses_per_day: u64,
    #[arg(long, default_value_t = 14)]
    teks_per_diagnosis: u64,
    #[arg(long, default_value_t = 16)]
    bytes_per_tek: u64,
    #[arg(long, default_value_t = 1.0)]
    overhead_factor: f64,
}

fn day_key(tek_hex: &str, day: u32) -> anyhow::Result<TemporaryExposureKey> {
    let material = parse_hex16(tek_hex).context("--tek")?;
    let day_start = IntervalNumber::from_day_index(day);
    Ok(TemporaryExposureKey::for_day(material, day_start)?)
}

fn read_keys(path: &std::path::Path) -> anyhow::Result<Vec<DiagnosisKey>> {
    let text = read_file(path)?;
    let keys = parse_export(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(keys.into_iter().map(|k| k.diagnosis_key).collect())
}

pub fn keygen(ctx: &Ctx, a: KeygenArgs) -> anyhow::Result<()> {
    let mut rng = ctx.rng(KEYGEN_STREAM);
    let mut out = String::new();
    for d in 0..a.count {
        let day = a.day.checked_add(d).context("day index overflow")?;
        let tek = generate_tek(&mut rng, IntervalNumber::from_day_index(day))?;
        let _ = writeln!(out, "{},{}", tek.key_hex(), tek.day_start());
    }
    write_output(None, &out)
}

pub fn derive(a: DeriveArgs) -> anyhow::Result<()> {
    let tek = day_key(&a.tek, a.day)?;
    let start = tek.day_start().value();
    let mut out = String::new();
    for (i, rpi) in derive_rpi_sequence(&tek).iter().enumerate() {
        let _ = writeln!(out, "{},{}", start + i as u32, rpi.to_hex());
    }
    write_output(None, &out)
}

pub fn run_match(a: MatchArgs) -> anyhow::Result<()> {
    let policy = a.policy.policy()?;
    let keys = read_keys(&a.keys)?;
    let log = parse_observation_log(&read_file(&a.log)?)
        .with_context(|| format!("parsing {}", a.log.display()))?;
    let matches = match_exposures(&keys, &log, &policy);
    let mut out = String::new();
    for m in &matches {
        let _ = writeln!(
            out,
            "match {} {} {} {} {} {}",
            m.key.tek.key_hex(),
            m.key.tek.day_start(),
            m.key.report_type,
            m.matched_intervals.len(),
            m.total_duration_s,
            m.min_attenuation_db
        );
    }
    let _ = writeln!(out, "risk {}", score_risk(&matches, &policy).value());
    write_output(None, &out)
}

pub fn vectors(ctx: &Ctx, c: VectorsCommand) -> anyhow::Result<()> {
    match c {
        VectorsCommand::Generate { day, keys, out } => {
            let mut rng = ctx.rng(VECTORS_STREAM);
            let mut vs = Vec::with_capacity(keys as usize * INTERVALS_PER_DAY as usize);
            for _ in 0..keys {
                let tek = generate_tek(&mut rng, IntervalNumber::from_day_index(day))?;
                for i in 0..INTERVALS_PER_DAY {
                    vs.push(TestVector::compute(tek, IntervalNumber(tek.day_start().value() + i))?);
                }
            }
            write_output(out.as_deref(), &write_test_vectors(&vs))
        }
        VectorsCommand::Verify { file } => {
            let vs = parse_test_vectors(&read_file(&file)?)
                .with_context(|| format!("parsing {}", file.display()))?;
            let bad: Vec<usize> = (0..vs.len()).filter(|&i| !vs[i].verify()).collect();
            if !bad.is_empty() {
                bail!("{} of {} vectors do not verify, first at entry {}", bad.len(), vs.len(), bad[0] + 1);
            }
            println!("verified {}", vs.len());
            Ok(())
        }
    }
}

pub fn receipt(c: ReceiptCommand) -> anyhow::Result<()> {
    match c {
        ReceiptCommand::Make { tek, day, interval } => {
            if interval >= INTERVALS_PER_DAY {
                bail!("--interval must be below {INTERVALS_PER_DAY}");
            }
            let tek = day_key(&tek, day)?;
            let at = IntervalNumber(tek.day_start().value() + interval);
            println!("{}", ReceiptCode::new(&derive_rpi(&tek, at)?, at).encode());
            Ok(())
        }
        ReceiptCommand::Check { code, keys } => {
            let keys = read_keys(&keys)?;
            let hit = check_receipt_str(&code, &keys)?;
            println!("{}", if hit { "match" } else { "no match" });
            Ok(())
        }
    }
}

pub fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    if !(a.overhead_factor.is_finite() && a.overhead_factor >= 0.0) {
        bail!("--overhead-factor must be finite and non-negative");
    }
    let e = compute_estimate(&EstimateInput {
        diagnoses_per_day: a.diagnoses_per_day,
        teks_per_diagnosis: a.teks_per_diagnosis,
        bytes_per_tek: a.bytes_per_tek,
        overhead_factor: a.overhead_factor,
    });
    println!("raw_bytes_per_day {}", e.raw_bytes_per_day);
    println!("reported_bytes_per_day {}", e.reported_bytes_per_day);
    println!("rpi_derivations_per_day {}", e.rpi_derivations_per_day);
    Ok(())
}
