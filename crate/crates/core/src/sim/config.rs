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

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::device::DeviceRole;
use crate::protocol::{
    ExposurePolicy, IntervalNumber, ReportType, DEFAULT_RETENTION_DAYS, INTERVAL_SECONDS,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceConfig {
    pub place_id: String,
    /// `None` for a place without a lighthouse.
    #[serde(default)]
    pub lighthouse: Option<DeviceRole>,
    /// Further lighthouses installed at the same place. Each one hears and
    /// is heard by everyone present; placement within the place is not
    /// modeled.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub additional_lighthouses: Vec<DeviceRole>,
    /// Operator-local label, handed to the lighthouse device only.
    #[serde(default)]
    pub label: Option<String>,
}

/// A person at a place over `[start, end)`.
impl PlaceConfig {
    pub fn lighthouse_roles(&self) -> impl Iterator<Item = DeviceRole> + '_ {
        self.lighthouse.iter().chain(&self.additional_lighthouses).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub person: u32,
    pub place_id: String,
    pub start: IntervalNumber,
    pub end: IntervalNumber,
    /// Seconds present within each interval of the visit.
    #[serde(default = "full_interval")]
    pub dwell_s: f64,
}

fn full_interval() -> f64 {
    INTERVAL_SECONDS as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosisEvent {
    pub person: u32,
    pub at: IntervalNumber,
    #[serde(default = "confirmed")]
    pub report_type: ReportType,
}

fn confirmed() -> ReportType {
    ReportType::Confirmed
}

fn default_band() -> (f64, f64) {
    (30.0, 60.0)
}

fn default_retention() -> u32 {
    DEFAULT_RETENTION_DAYS
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub seed: u64,
    pub n_people: u32,
    pub participation: f64,
    #[serde(default)]
    pub places: Vec<PlaceConfig>,
    #[serde(default)]
    pub visit_schedule: Vec<Visit>,
    #[serde(default)]
    pub radio_loss_prob: f64,
    #[serde(default = "yes_prob")]
    pub interview_recall_prob: f64,
    #[serde(default)]
    pub policy: ExposurePolicy,
    #[serde(default)]
    pub diagnoses: Vec<DiagnosisEvent>,
    /// Attenuation of each reception is uniform in `[lo, hi]`.
    #[serde(default = "default_band")]
    pub attenuation_band_db: (f64, f64),
    #[serde(default = "default_retention")]
    pub retention_days: u32,
    /// Lighthouses that detect exposure on their own report it and publish.
    #[serde(default = "yes")]
    pub lighthouse_auto_publish: bool,
    /// Fixes who runs the app, overriding the participation draw.
    #[serde(default)]
    pub participants: Option<BTreeSet<u32>>,
    /// Display names for people. Used only outside the protocol.
    #[serde(default)]
    pub person_labels: Vec<String>,
}

fn yes_prob() -> f64 {
    1.0
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |m: String| Err(SimError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.participation) {
            return invalid(format!("participation {} outside [0, 1]", self.participation));
        }
        if !(0.0..1.0).contains(&self.radio_loss_prob) {
            return invalid(format!("radio loss {} outside [0, 1)", self.radio_loss_prob));
        }
        if !(0.0..=1.0).contains(&self.interview_recall_prob) {
            return invalid(format!("recall {} outside [0, 1]", self.interview_recall_prob));
        }
        let (lo, hi) = self.attenuation_band_db;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return invalid(format!("attenuation band ({lo}, {hi}) invalid"));
        }
        if self.retention_days == 0 {
            return invalid("retention must be at least one day".into());
        }
        self.policy
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        let mut ids = BTreeSet::new();
        for p in &self.places {
            if !ids.insert(p.place_id.as_str()) {
                return invalid(format!("duplicate place {}", p.place_id));
            }
            if p.lighthouse_roles().any(|r| r == DeviceRole::Phone) {
                return invalid(format!("place {} lighthouse role must be a lighthouse", p.place_id));
            }
        }
        for v in &self.visit_schedule {
            if v.person >= self.n_people {
                return invalid(format!("visit by unknown person {}", v.person));
            }
            if !ids.contains(v.place_id.as_str()) {
                return invalid(format!("visit to unknown place {}", v.place_id));
            }
            if v.start >= v.end {
                return invalid(format!("visit by {} at {} has start >= end", v.person, v.place_id));
            }
            if !(v.dwell_s > 0.0 && v.dwell_s <= INTERVAL_SECONDS as f64) {
                return invalid(format!("dwell {} outside (0, 900]", v.dwell_s));
            }
        }
        for d in &self.diagnoses {
            if d.person >= self.n_people {
                return invalid(format!("diagnosis of unknown person {}", d.person));
            }
        }
        if let Some(ps) = &self.participants {
            if let Some(p) = ps.iter().find(|&&p| p >= self.n_people) {
                return invalid(format!("unknown participant {p}"));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
