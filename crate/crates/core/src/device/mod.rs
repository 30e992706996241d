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

//! Protocol participants: phones and lighthouses.
//!
//! A lighthouse runs the same key schedule as a phone. Active lighthouses
//! also listen and can report aggregate risk; passive ones only broadcast.

mod receipt;
mod report;

use rand::{CryptoRng, RngCore};
use thiserror::Error;

pub use receipt::{check_receipt_code, check_receipt_str, ReceiptCode, RECEIPT_PREFIX_LEN};
pub use report::{AggregateRiskReport, DayRisk};

use crate::commons::{DayRange, OneTimeAuthorization};
use crate::protocol::{
    derive_rpi, generate_tek, match_exposures, score_risk, DiagnosisKey, ExposureMatch,
    ExposurePolicy, IntervalNumber, KeyIndex, ObservedBeacon, ProtocolError, RiskScore,
    RollingProximityIdentifier, TemporaryExposureKey, INTERVALS_PER_DAY,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceRole {
    Phone,
    LighthouseActive,
    LighthousePassive,
}

impl DeviceRole {
    pub fn listens(self) -> bool {
        !matches!(self, DeviceRole::LighthousePassive)
    }

    pub fn is_lighthouse(self) -> bool {
        !matches!(self, DeviceRole::Phone)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeviceError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("retention must be at least one day")]
    InvalidRetention,
    #[error("day {new} does not follow current day {current}")]
    NonMonotonicDay {
        current: IntervalNumber,
        new: IntervalNumber,
    },
    #[error("interval {0} outside the current key's day; advance the day first")]
    OutsideCurrentDay(IntervalNumber),
    #[error("passive device cannot listen")]
    PassiveCannotListen,
    #[error("no keys in range")]
    NoKeysInRange,
    #[error("requested days {requested:?} exceed authorized days {authorized:?}")]
    RangeNotAuthorized {
        requested: (IntervalNumber, IntervalNumber),
        authorized: (IntervalNumber, IntervalNumber),
    },
    #[error("operation requires an active lighthouse")]
    NotActiveLighthouse,
    #[error("operation requires a lighthouse")]
    NotLighthouse,
    #[error("malformed receipt code {0:?}")]
    MalformedReceiptCode(String),
}

/// A phone or lighthouse. Mutated only by its owner.
#[derive(Debug, Clone)]
pub struct DeviceState {
    role: DeviceRole,
    current_tek: TemporaryExposureKey,
    /// Previous days' keys, oldest first, at most `retention_days` long.
    tek_history: Vec<TemporaryExposureKey>,
    observation_log: Vec<ObservedBeacon>,
    place_label: Option<String>,
    retention_days: u32,
}

impl DeviceState {
    pub fn new<R: RngCore + CryptoRng + ?Sized>(
        role: DeviceRole,
        entropy: &mut R,
        now: IntervalNumber,
        retention_days: u32,
    ) -> Result<Self, DeviceError> {
        if retention_days == 0 {
            return Err(DeviceError::InvalidRetention);
        }
        Ok(Self {
            role,
            current_tek: generate_tek(entropy, now.day_start())?,
            tek_history: Vec::new(),
            observation_log: Vec::new(),
            place_label: None,
            retention_days,
        })
    }

    /// Local-only label for a lighthouse's place. Never leaves the device.
    pub fn with_place_label(mut self, label: impl Into<String>) -> Self {
        self.place_label = Some(label.into());
        self
    }

    pub fn role(&self) -> DeviceRole {
        self.role
    }

    pub fn current_tek(&self) -> &TemporaryExposureKey {
        &self.current_tek
    }

    pub fn tek_history(&self) -> &[TemporaryExposureKey] {
        &self.tek_history
    }

    /// History followed by the current key.
    pub fn all_teks(&self) -> impl Iterator<Item = &TemporaryExposureKey> {
        self.tek_history.iter().chain(std::iter::once(&self.current_tek))
    }

    pub fn observation_log(&self) -> &[ObservedBeacon] {
        &self.observation_log
    }

    pub fn place_label(&self) -> Option<&str> {
        self.place_label.as_deref()
    }

    pub fn retention_days(&self) -> u32 {
        self.retention_days
    }

    pub fn advance_day<R: RngCore + CryptoRng + ?Sized>(
        &mut self,
        entropy: &mut R,
        new_day_start: IntervalNumber,
    ) -> Result<(), DeviceError> {
        if !new_day_start.is_day_aligned() {
            return Err(ProtocolError::UnalignedDayStart(new_day_start).into());
        }
        if new_day_start <= self.current_tek.day_start() {
            return Err(DeviceError::NonMonotonicDay {
                current: self.current_tek.day_start(),
                new: new_day_start,
            });
        }
        let fresh = generate_tek(entropy, new_day_start)?;
        self.tek_history.push(std::mem::replace(&mut self.current_tek, fresh));
        let excess = self.tek_history.len().saturating_sub(self.retention_days as usize);
        self.tek_history.drain(..excess);
        Ok(())
    }

    /// Identifier to broadcast at `now`. Every role broadcasts.
    pub fn current_broadcast(&self, now: IntervalNumber) -> Result<RollingProximityIdentifier, DeviceError> {
        if !self.current_tek.covers(now) {
            return Err(DeviceError::OutsideCurrentDay(now));
        }
        Ok(derive_rpi(&self.current_tek, now)?)
    }

    /// Oldest interval still inside the retention window at `now`.
    fn retention_floor(&self, now: IntervalNumber) -> IntervalNumber {
        now.day_start()
            .saturating_sub(self.retention_days.saturating_mul(INTERVALS_PER_DAY))
    }

    pub fn record_observation(
        &mut self,
        rpi: RollingProximityIdentifier,
        now: IntervalNumber,
        attenuation_db: f64,
        duration_s: f64,
    ) -> Result<(), DeviceError> {
        if !self.role.listens() {
            return Err(DeviceError::PassiveCannotListen);
        }
        let beacon = ObservedBeacon::new(rpi, now, attenuation_db, duration_s)?;
        let floor = self.retention_floor(now);
        self.observation_log.retain(|b| b.interval >= floor);
        self.observation_log.push(beacon);
        Ok(())
    }

    /// Local exposure check. Pure: no state change, nothing sent.
    pub fn self_check(&self, keys: &[DiagnosisKey], policy: &ExposurePolicy) -> (RiskScore, Vec<ExposureMatch>) {
        let matches = match_exposures(keys, &self.observation_log, policy);
        (score_risk(&matches, policy), matches)
    }

    /// [`Self::self_check`] against a prebuilt index.
    pub fn self_check_indexed(&self, index: &KeyIndex, policy: &ExposurePolicy) -> (RiskScore, Vec<ExposureMatch>) {
        let matches = index.match_log(&self.observation_log, policy);
        (score_risk(&matches, policy), matches)
    }

    /// The device's own keys whose day falls in `day_range`. The range must
    /// sit inside what `ota` authorizes.
    pub fn publish_keys(
        &self,
        day_range: DayRange,
        ota: &OneTimeAuthorization,
    ) -> Result<Vec<TemporaryExposureKey>, DeviceError> {
        if !ota.authorized_days.contains_range(&day_range) {
            return Err(DeviceError::RangeNotAuthorized {
                requested: day_range.into(),
                authorized: ota.authorized_days.into(),
            });
        }
        let keys: Vec<TemporaryExposureKey> = self
            .all_teks()
            .filter(|t| day_range.contains_day(t.day_start()))
            .copied()
            .collect();
        if keys.is_empty() {
            return Err(DeviceError::NoKeysInRange);
        }
        Ok(keys)
    }

    /// Per-day match counts and weighted risk, grouped by the diagnosis
    /// key's day. Carries no identifiers or key material.
    pub fn make_risk_report(
        &self,
        keys: &[DiagnosisKey],
        policy: &ExposurePolicy,
        pseudonym: impl Into<String>,
    ) -> Result<AggregateRiskReport, DeviceError> {
        if self.role != DeviceRole::LighthouseActive {
            return Err(DeviceError::NotActiveLighthouse);
        }
        let (_, matches) = self.self_check(keys, policy);
        Ok(AggregateRiskReport::from_matches(pseudonym.into(), &matches, policy))
    }

    /// Code for a printed receipt at `now`. Lighthouses only.
    pub fn make_receipt_code(&self, now: IntervalNumber) -> Result<ReceiptCode, DeviceError> {
        if !self.role.is_lighthouse() {
            return Err(DeviceError::NotLighthouse);
        }
        Ok(ReceiptCode::new(&self.current_broadcast(now)?, now))
    }
}
