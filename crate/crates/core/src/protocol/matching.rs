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

//! Local exposure matching and risk scoring.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::interval::{IntervalNumber, INTERVAL_SECONDS};
use super::keys::{derive_rpi_sequence, DiagnosisKey, ReportType, RollingProximityIdentifier};
use super::ProtocolError;

/// One logged reception of a foreign identifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedBeacon {
    pub rpi: RollingProximityIdentifier,
    pub interval: IntervalNumber,
    pub attenuation_db: f64,
    pub duration_s: f64,
}

impl ObservedBeacon {
    pub fn new(
        rpi: RollingProximityIdentifier,
        interval: IntervalNumber,
        attenuation_db: f64,
        duration_s: f64,
    ) -> Result<Self, ProtocolError> {
        let b = Self {
            rpi,
            interval,
            attenuation_db,
            duration_s,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if !self.attenuation_db.is_finite() || self.attenuation_db < 0.0 {
            return Err(ProtocolError::InvalidBeacon("attenuation must be finite and non-negative"));
        }
        if !(0.0..=INTERVAL_SECONDS as f64).contains(&self.duration_s) {
            return Err(ProtocolError::InvalidBeacon("duration must lie in [0, 900] seconds"));
        }
        Ok(())
    }
}

/// Thresholds and weights that turn raw matches into a score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExposurePolicy {
    pub max_attenuation_db: f64,
    pub min_total_duration_s: f64,
    pub weight_confirmed: f64,
    pub weight_probable: f64,
}

impl Default for ExposurePolicy {
    fn default() -> Self {
        Self {
            max_attenuation_db: 63.0,
            min_total_duration_s: 300.0,
            weight_confirmed: 1.0,
            weight_probable: 0.5,
        }
    }
}

impl ExposurePolicy {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.max_attenuation_db.is_nan() {
            return Err(ProtocolError::InvalidPolicy("max attenuation is NaN"));
        }
        if !(self.min_total_duration_s >= 0.0) || !self.min_total_duration_s.is_finite() {
            return Err(ProtocolError::InvalidPolicy("min total duration must be finite and >= 0"));
        }
        if !(self.weight_confirmed > 0.0) || !self.weight_confirmed.is_finite() {
            return Err(ProtocolError::InvalidPolicy("confirmed weight must be positive"));
        }
        if !(self.weight_probable > 0.0 && self.weight_probable <= self.weight_confirmed) {
            return Err(ProtocolError::InvalidPolicy("probable weight must lie in (0, confirmed weight]"));
        }
        Ok(())
    }

    pub fn weight(&self, report_type: ReportType) -> f64 {
        match report_type {
            ReportType::Confirmed => self.weight_confirmed,
            ReportType::Probable => self.weight_probable,
        }
    }

    /// SHA-256 over the bit patterns of the four parameters.
    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(b"en-policy-v1");
        for v in [
            self.max_attenuation_db,
            self.min_total_duration_s,
            self.weight_confirmed,
            self.weight_probable,
        ] {
            h.update(v.to_bits().to_be_bytes());
        }
        h.finalize().into()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureMatch {
    pub key: DiagnosisKey,
    /// Sorted, unique, never empty.
    pub matched_intervals: Vec<IntervalNumber>,
    pub total_duration_s: f64,
    pub min_attenuation_db: f64,
}

/// Policy-weighted exposure-seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RiskScore(pub f64);

impl RiskScore {
    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_exposed(self) -> bool {
        self.0 > 0.0
    }
}

/// Precomputed identifier schedules for a fixed set of diagnosis keys.
///
/// Building the index costs one derivation per key interval; matching a log
/// is then a hash lookup per beacon. Useful when many logs are checked
/// against the same download.
#[derive(Debug, Clone, Default)]
pub struct KeyIndex {
    keys: Vec<DiagnosisKey>,
    by_rpi: HashMap<RollingProximityIdentifier, Vec<(usize, IntervalNumber)>>,
}

impl KeyIndex {
    pub fn build(keys: &[DiagnosisKey]) -> Self {
        let mut by_rpi: HashMap<_, Vec<_>> = HashMap::with_capacity(keys.len() * 96);
        for (k, key) in keys.iter().enumerate() {
            let start = key.tek.day_start().value();
            for (j, rpi) in derive_rpi_sequence(&key.tek).into_iter().enumerate() {
                by_rpi
                    .entry(rpi)
                    .or_default()
                    .push((k, IntervalNumber(start + j as u32)));
            }
        }
        Self {
            keys: keys.to_vec(),
            by_rpi,
        }
    }

    pub fn keys(&self) -> &[DiagnosisKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Same contract as [`match_exposures`].
    pub fn match_log(&self, log: &[ObservedBeacon], policy: &ExposurePolicy) -> Vec<ExposureMatch> {
        // Durations are accumulated in log order so every route sums in the
        // same sequence.
        let mut acc: Vec<Option<Accum>> = vec![None; self.keys.len()];
        for beacon in log {
            if !(beacon.attenuation_db <= policy.max_attenuation_db) {
                continue;
            }
            let Some(hits) = self.by_rpi.get(&beacon.rpi) else {
                continue;
            };
            for &(k, interval) in hits {
                if interval == beacon.interval {
                    acc[k].get_or_insert_with(Accum::default).add(beacon);
                }
            }
        }

        let mut out: Vec<ExposureMatch> = acc
            .into_iter()
            .enumerate()
            .filter_map(|(k, a)| a.and_then(|a| a.finish(&self.keys[k], policy)))
            .collect();
        sort_matches(&mut out);
        out
    }
}

#[derive(Debug, Clone, Default)]
struct Accum {
    intervals: Vec<IntervalNumber>,
    total: f64,
    min_atten: f64,
    any: bool,
}

impl Accum {
    fn add(&mut self, b: &ObservedBeacon) {
        self.intervals.push(b.interval);
        self.total += b.duration_s;
        self.min_atten = if self.any {
            self.min_atten.min(b.attenuation_db)
        } else {
            b.attenuation_db
        };
        self.any = true;
    }

    fn finish(mut self, key: &DiagnosisKey, policy: &ExposurePolicy) -> Option<ExposureMatch> {
        if !self.any || !(self.total > 0.0) || self.total < policy.min_total_duration_s {
            return None;
        }
        self.intervals.sort_unstable();
        self.intervals.dedup();
        Some(ExposureMatch {
            key: key.clone(),
            matched_intervals: self.intervals,
            total_duration_s: self.total,
            min_attenuation_db: self.min_atten,
        })
    }
}

/// Stable sort by key day start, then issuing authority.
pub fn sort_matches(matches: &mut [ExposureMatch]) {
    matches.sort_by(|a, b| {
        (a.key.tek.day_start(), &a.key.pha_id).cmp(&(b.key.tek.day_start(), &b.key.pha_id))
    });
}

/// Recreates every key's identifier schedule and collects the log entries
/// heard at the matching interval within the attenuation bound. A key
/// yields a match when the summed duration is positive and reaches the
/// policy minimum.
pub fn match_exposures(
    keys: &[DiagnosisKey],
    log: &[ObservedBeacon],
    policy: &ExposurePolicy,
) -> Vec<ExposureMatch> {
    if keys.is_empty() || log.is_empty() {
        return Vec::new();
    }
    KeyIndex::build(keys).match_log(log, policy)
}

/// Sum of `total_duration_s × weight(report_type)` over `matches`.
pub fn score_risk(matches: &[ExposureMatch], policy: &ExposurePolicy) -> RiskScore {
    RiskScore(
        matches
            .iter()
            .map(|m| m.total_duration_s * policy.weight(m.key.report_type))
            .fold(0.0, |acc, x| acc + x),
    )
}
