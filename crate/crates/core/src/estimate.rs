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

//! Download size and matching cost for a day's worth of diagnosis keys.

use serde::Serialize;

use crate::protocol::{INTERVALS_PER_DAY, KEY_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateInput {
    pub diagnoses_per_day: u64,
    pub teks_per_diagnosis: u64,
    pub bytes_per_tek: u64,
    pub overhead_factor: f64,
}

impl Default for EstimateInput {
    fn default() -> Self {
        Self {
            diagnoses_per_day: 0,
            teks_per_diagnosis: 14,
            bytes_per_tek: KEY_LEN as u64,
            overhead_factor: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub raw_bytes_per_day: u64,
    pub reported_bytes_per_day: f64,
    /// Identifier derivations each device performs per day to match.
    pub rpi_derivations_per_day: u64,
}

/// Saturates instead of overflowing.
pub fn estimate(input: &EstimateInput) -> Estimate {
    let keys = input.diagnoses_per_day.saturating_mul(input.teks_per_diagnosis);
    let raw = keys.saturating_mul(input.bytes_per_tek);
    Estimate {
        raw_bytes_per_day: raw,
        reported_bytes_per_day: raw as f64 * input.overhead_factor,
        rpi_derivations_per_day: keys.saturating_mul(u64::from(INTERVALS_PER_DAY)),
    }
}
