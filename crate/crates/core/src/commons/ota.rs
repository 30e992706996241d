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

//! One-time upload authorizations.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CommonsError, InstanceId};
use crate::protocol::{parse_hex16, IntervalNumber, PhaId, ReportType, INTERVALS_PER_DAY};

/// 16 random bytes handed to a patient (or lighthouse operator).
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OtaToken(pub [u8; 16]);

impl OtaToken {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for OtaToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "OtaToken({})", self.to_hex())
    }
}

impl fmt::Display for OtaToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl FromStr for OtaToken {
    type Err = CommonsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_hex16(s)
            .map(OtaToken)
            .map_err(|_| CommonsError::UnknownToken)
    }
}

impl Serialize for OtaToken {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for OtaToken {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_hex16(&s).map(OtaToken).map_err(serde::de::Error::custom)
    }
}

/// Inclusive range of day starts, both aligned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "(IntervalNumber, IntervalNumber)", into = "(IntervalNumber, IntervalNumber)")]
pub struct DayRange {
    first: IntervalNumber,
    last: IntervalNumber,
}

impl DayRange {
    pub fn new(first: IntervalNumber, last: IntervalNumber) -> Result<Self, CommonsError> {
        if !first.is_day_aligned() || !last.is_day_aligned() {
            return Err(CommonsError::RangeViolation(format!(
                "day range ({first}, {last}) not aligned to day boundaries"
            )));
        }
        if first > last {
            return Err(CommonsError::RangeViolation(format!(
                "day range ({first}, {last}) is reversed"
            )));
        }
        Ok(Self { first, last })
    }

    /// `days` consecutive days ending with the day containing `end`.
    pub fn ending_at(end: IntervalNumber, days: u32) -> Self {
        let last = end.day_start();
        let first = last.saturating_sub(days.saturating_sub(1) * INTERVALS_PER_DAY);
        Self { first, last }
    }

    pub fn single(day: IntervalNumber) -> Self {
        let d = day.day_start();
        Self { first: d, last: d }
    }

    pub fn first(&self) -> IntervalNumber {
        self.first
    }

    pub fn last(&self) -> IntervalNumber {
        self.last
    }

    pub fn contains_day(&self, day_start: IntervalNumber) -> bool {
        (self.first..=self.last).contains(&day_start)
    }

    pub fn contains_range(&self, other: &DayRange) -> bool {
        self.first <= other.first && other.last <= self.last
    }

    pub fn days(&self) -> u32 {
        (self.last.value() - self.first.value()) / INTERVALS_PER_DAY + 1
    }
}

impl TryFrom<(IntervalNumber, IntervalNumber)> for DayRange {
    type Error = CommonsError;

    fn try_from((first, last): (IntervalNumber, IntervalNumber)) -> Result<Self, Self::Error> {
        Self::new(first, last)
    }
}

impl From<DayRange> for (IntervalNumber, IntervalNumber) {
    fn from(r: DayRange) -> Self {
        (r.first, r.last)
    }
}

/// Parameters a PHA supplies when requesting an authorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssueOtaRequest {
    pub report_type: ReportType,
    pub authorized_days: DayRange,
    /// Remote instances the upload is pushed to. Empty opts out of forwarding.
    #[serde(default)]
    pub forward_tags: BTreeSet<InstanceId>,
    #[serde(default)]
    pub region_tags: BTreeSet<String>,
    pub ttl_days: u32,
}

impl IssueOtaRequest {
    pub fn new(report_type: ReportType, authorized_days: DayRange) -> Self {
        Self {
            report_type,
            authorized_days,
            forward_tags: BTreeSet::new(),
            region_tags: BTreeSet::new(),
            ttl_days: 7,
        }
    }

    pub fn forward_to(mut self, remote: impl Into<InstanceId>) -> Self {
        self.forward_tags.insert(remote.into());
        self
    }

    pub fn region(mut self, tag: impl Into<String>) -> Self {
        self.region_tags.insert(tag.into());
        self
    }

    pub fn ttl_days(mut self, ttl: u32) -> Self {
        self.ttl_days = ttl;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OneTimeAuthorization {
    pub token: OtaToken,
    pub issuer: PhaId,
    pub report_type: ReportType,
    pub authorized_days: DayRange,
    pub forward_tags: BTreeSet<InstanceId>,
    pub region_tags: BTreeSet<String>,
    pub issued_at: IntervalNumber,
    pub expiry: IntervalNumber,
    /// Set exactly once, by the upload that consumed the token.
    pub used_at: Option<IntervalNumber>,
}

impl OneTimeAuthorization {
    pub fn used(&self) -> bool {
        self.used_at.is_some()
    }

    pub fn expired_at(&self, now: IntervalNumber) -> bool {
        now > self.expiry
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "received_at", rename_all = "lowercase")]
pub enum UploadStatus {
    Pending,
    Fulfilled(IntervalNumber),
}
