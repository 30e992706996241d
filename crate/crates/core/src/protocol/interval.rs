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

//! Rolling interval arithmetic.
//!
//! Time is counted in fixed windows of [`INTERVAL_SECONDS`] since the Unix
//! epoch. A day is [`INTERVALS_PER_DAY`] consecutive windows starting at a
//! multiple of that count.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Length of one rolling window in seconds.
pub const INTERVAL_SECONDS: u64 = 900;

/// Number of rolling windows in one day (24 h / 15 min).
pub const INTERVALS_PER_DAY: u32 = 96;

/// Default number of days of keys kept for publication.
pub const DEFAULT_RETENTION_DAYS: u32 = 14;

/// Count of 15-minute windows elapsed since the Unix epoch.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct IntervalNumber(pub u32);

impl IntervalNumber {
    pub const fn new(value: u32) -> Self {
        Self(value)
    }

    pub const fn value(self) -> u32 {
        self.0
    }

    /// Interval containing `unix_seconds`. Saturates at `u32::MAX`, which is
    /// roughly 122,000 years after the epoch.
    pub fn from_unix_seconds(unix_seconds: u64) -> Self {
        let n = unix_seconds / INTERVAL_SECONDS;
        Self(u32::try_from(n).unwrap_or(u32::MAX))
    }

    /// First interval of the day containing `self`.
    pub const fn day_start(self) -> Self {
        Self(self.0 - self.0 % INTERVALS_PER_DAY)
    }

    pub const fn is_day_aligned(self) -> bool {
        self.0.is_multiple_of(INTERVALS_PER_DAY)
    }

    /// Ordinal day number (day 0 starts at the epoch).
    pub const fn day_index(self) -> u32 {
        self.0 / INTERVALS_PER_DAY
    }

    pub const fn from_day_index(day: u32) -> Self {
        Self(day * INTERVALS_PER_DAY)
    }

    pub const fn checked_add(self, n: u32) -> Option<Self> {
        match self.0.checked_add(n) {
            Some(v) => Some(Self(v)),
            None => None,
        }
    }

    pub const fn saturating_sub(self, n: u32) -> Self {
        Self(self.0.saturating_sub(n))
    }

    /// Fixed little-endian encoding used as PRF input.
    pub const fn to_le_bytes(self) -> [u8; 4] {
        self.0.to_le_bytes()
    }
}

impl fmt::Display for IntervalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for IntervalNumber {
    fn from(value: u32) -> Self {
        Self(value)
    }
}

/// Interval containing the given Unix timestamp.
pub fn interval_from_timestamp(unix_seconds: u64) -> IntervalNumber {
    IntervalNumber::from_unix_seconds(unix_seconds)
}
