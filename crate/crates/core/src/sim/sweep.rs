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


use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::generate::{random_world, RandomWorldParams};
use super::world::run_world;
use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: f64,
    pub trial: u32,
    pub detection_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// `(p, mean detection rate)` in input order.
    pub means: Vec<(f64, f64)>,
}

/// Seed for one trial. Independent of `p`, so every participation rate in a
/// trial sees the same world and the same participation draws.
pub fn trial_seed(base: u64, trial: u32) -> u64 {
    let mut h = Sha256::new();
    h.update(b"en-sim-trial");
    h.update(base.to_le_bytes());
    h.update(trial.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes"))
}

pub fn participation_sweep(
    base: &RandomWorldParams,
    participations: &[f64],
    trials: u32,
) -> Result<SweepResult, SimError> {
    let jobs: Vec<(usize, f64, u32)> = participations
        .iter()
        .enumerate()
        .flat_map(|(i, &p)| (0..trials).map(move |t| (i, p, t)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(_, p, trial)| {
            let cfg = random_world(&RandomWorldParams {
                seed: trial_seed(base.seed, trial),
                participation: p,
                ..base.clone()
            });
            run_world(&cfg).map(|m| SweepRow { p, trial, detection_rate: m.detection_rate })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let means = participations
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let rs: Vec<f64> = jobs
                .iter()
                .zip(&rows)
                .filter(|((j, _, _), _)| *j == i)
                .map(|(_, r)| r.detection_rate)
                .collect();
            let mean = if rs.is_empty() { 0.0 } else { rs.iter().sum::<f64>() / rs.len() as f64 };
            (p, mean)
        })
        .collect();
    Ok(SweepResult { rows, means })
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("p,trial,detection_rate\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.p, r.trial, r.detection_rate));
    }
    out
}

/// Least-squares slope of `ln y` against `ln x`. Points with a
/// non-positive coordinate are skipped; `None` with fewer than two left.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
