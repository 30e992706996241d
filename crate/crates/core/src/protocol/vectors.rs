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

//! Line formats for test vectors and observation logs.
//!
//! Test vectors: `tek_hex,day_start,interval,rpi_hex`.
//! Observation logs: `rpi_hex,interval,attenuation_db,duration_s`.
//! Both are comma-separated with LF line endings; blank lines and lines
//! starting with `#` are skipped on read.

use std::fmt::Write as _;

use super::interval::IntervalNumber;
use super::keys::{derive_rpi, parse_hex16, RollingProximityIdentifier, TemporaryExposureKey};
use super::matching::ObservedBeacon;
use super::ProtocolError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TestVector {
    pub tek: TemporaryExposureKey,
    pub interval: IntervalNumber,
    pub rpi: RollingProximityIdentifier,
}

impl TestVector {
    pub fn compute(tek: TemporaryExposureKey, interval: IntervalNumber) -> Result<Self, ProtocolError> {
        Ok(Self {
            tek,
            interval,
            rpi: derive_rpi(&tek, interval)?,
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "{},{},{},{}",
            self.tek.key_hex(),
            self.tek.day_start(),
            self.interval,
            self.rpi.to_hex()
        )
    }

    /// Whether the stored identifier equals a fresh derivation.
    pub fn verify(&self) -> bool {
        derive_rpi(&self.tek, self.interval).is_ok_and(|r| r == self.rpi)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn bad(line: usize, reason: impl Into<String>) -> ProtocolError {
    ProtocolError::MalformedLine {
        line,
        reason: reason.into(),
    }
}

fn fields<const N: usize>(line: usize, l: &str) -> Result<[&str; N], ProtocolError> {
    let parts: Vec<&str> = l.split(',').collect();
    parts
        .try_into()
        .map_err(|p: Vec<&str>| bad(line, format!("expected {N} fields, found {}", p.len())))
}

fn num<T: std::str::FromStr>(line: usize, s: &str, what: &str) -> Result<T, ProtocolError> {
    s.trim().parse().map_err(|_| bad(line, format!("invalid {what} {s:?}")))
}

pub fn parse_test_vectors(text: &str) -> Result<Vec<TestVector>, ProtocolError> {
    data_lines(text)
        .map(|(n, l)| {
            let [tek, day, interval, rpi] = fields::<4>(n, l)?;
            let tek = TemporaryExposureKey::for_day(
                parse_hex16(tek).map_err(|e| bad(n, e.to_string()))?,
                IntervalNumber(num(n, day, "day_start")?),
            )
            .map_err(|e| bad(n, e.to_string()))?;
            Ok(TestVector {
                tek,
                interval: IntervalNumber(num(n, interval, "interval")?),
                rpi: RollingProximityIdentifier(parse_hex16(rpi).map_err(|e| bad(n, e.to_string()))?),
            })
        })
        .collect()
}

pub fn write_test_vectors(vectors: &[TestVector]) -> String {
    vectors.iter().fold(String::new(), |mut s, v| {
        let _ = writeln!(s, "{}", v.to_line());
        s
    })
}

pub fn parse_observation_log(text: &str) -> Result<Vec<ObservedBeacon>, ProtocolError> {
    data_lines(text)
        .map(|(n, l)| {
            let [rpi, interval, atten, dur] = fields::<4>(n, l)?;
            ObservedBeacon::new(
                rpi.parse().map_err(|e: ProtocolError| bad(n, e.to_string()))?,
                IntervalNumber(num(n, interval, "interval")?),
                num(n, atten, "attenuation")?,
                num(n, dur, "duration")?,
            )
            .map_err(|e| bad(n, e.to_string()))
        })
        .collect()
}

pub fn write_observation_log(log: &[ObservedBeacon]) -> String {
    log.iter().fold(String::new(), |mut s, b| {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            b.rpi.to_hex(),
            b.interval,
            b.attenuation_db,
            b.duration_s
        );
        s
    })
}
