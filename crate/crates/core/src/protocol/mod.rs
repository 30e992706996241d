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

//! Key schedule, interval arithmetic, matching and scoring.
//!
//! Everything here is pure and freely shareable between threads.

mod interval;
mod keys;
mod matching;
mod vectors;

use thiserror::Error;

pub use interval::{
    interval_from_timestamp, IntervalNumber, DEFAULT_RETENTION_DAYS, INTERVALS_PER_DAY,
    INTERVAL_SECONDS,
};
pub use keys::{
    derive_rpi, derive_rpi_sequence, generate_tek, parse_hex16, DiagnosisKey, PhaId, ReportType,
    RollingProximityIdentifier, TemporaryExposureKey, KEY_LEN, RPI_LABEL, RPI_LEN,
};
pub use matching::{
    match_exposures, score_risk, sort_matches, ExposureMatch, ExposurePolicy, KeyIndex,
    ObservedBeacon, RiskScore,
};
pub use vectors::{
    parse_observation_log, parse_test_vectors, write_observation_log, write_test_vectors,
    TestVector,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("unaligned day start {0}")]
    UnalignedDayStart(IntervalNumber),
    #[error("rolling period {0} outside 1..=96")]
    InvalidRollingPeriod(u32),
    #[error("interval {interval} outside key period starting at {day_start} (length {rolling_period})")]
    IntervalOutOfPeriod {
        interval: IntervalNumber,
        day_start: IntervalNumber,
        rolling_period: u32,
    },
    #[error("malformed hex {0:?}: expected 32 hex characters")]
    MalformedHex(String),
    #[error("unknown report type {0:?}")]
    UnknownReportType(String),
    #[error("invalid beacon: {0}")]
    InvalidBeacon(&'static str),
    #[error("invalid policy: {0}")]
    InvalidPolicy(&'static str),
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}
