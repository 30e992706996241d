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


//! Avery, who has no app, visits a shop and rides a bus. Bernie, a
//! stranger with the app, rides the same bus later that day.

use super::config::{DiagnosisEvent, PlaceConfig, Visit, WorldConfig};
use super::world::{simulate, PublicationSource, SimRun};
use super::SimError;
use crate::device::DeviceRole;
use crate::protocol::{ExposurePolicy, IntervalNumber, ReportType, DEFAULT_RETENTION_DAYS};

const AVERY: u32 = 0;
const BERNIE: u32 = 1;
const SHOP: &str = "shop";
const BUS: &str = "bus";
pub const LABELS: [&str; 4] = ["Avery", "Bernie", "Corner Shop", "Route 7 Bus"];

#[derive(Debug, Clone)]
pub struct AveryBernieOutcome {
    pub run: SimRun,
    pub bernie_notified: bool,
    pub bernie_risk: f64,
    pub shop_self_detections: u64,
    pub shop_published: bool,
    pub bus_published: bool,
    /// Labels found in any Commons state, export or payload.
    pub leaked_labels: Vec<String>,
    /// Bernie's matches serialized, for label inspection.
    pub bernie_match_output: String,
}

impl AveryBernieOutcome {
    pub fn all_hold(&self) -> bool {
        self.bernie_notified
            && self.bernie_risk > 0.0
            && self.shop_self_detections == 0
            && self.shop_published
            && self.bus_published
            && self.leaked_labels.is_empty()
            && !self.run.participants.contains(&AVERY)
    }
}

pub fn avery_bernie_config() -> WorldConfig {
    let day = IntervalNumber::from_day_index(20_000).value();
    let visit = |person, place: &str, start: u32, len: u32| Visit {
        person,
        place_id: place.into(),
        start: IntervalNumber(day + start),
        end: IntervalNumber(day + start + len),
        dwell_s: 900.0,
    };
    WorldConfig {
        seed: 2020,
        n_people: 2,
        participation: 0.0,
        places: vec![
            PlaceConfig {
                place_id: SHOP.into(),
                lighthouse: Some(DeviceRole::LighthouseActive),
                additional_lighthouses: vec![],
                label: Some(LABELS[2].into()),
            },
            PlaceConfig {
                place_id: BUS.into(),
                lighthouse: Some(DeviceRole::LighthousePassive),
                additional_lighthouses: vec![],
                label: Some(LABELS[3].into()),
            },
        ],
        visit_schedule: vec![
            visit(AVERY, SHOP, 40, 2),
            visit(AVERY, BUS, 43, 2),
            visit(BERNIE, BUS, 60, 2),
        ],
        radio_loss_prob: 0.0,
        interview_recall_prob: 1.0,
        policy: ExposurePolicy::default(),
        diagnoses: vec![DiagnosisEvent {
            person: AVERY,
            at: IntervalNumber(day + 2 * 96 + 40),
            report_type: ReportType::Confirmed,
        }],
        attenuation_band_db: (30.0, 60.0),
        retention_days: DEFAULT_RETENTION_DAYS,
        lighthouse_auto_publish: true,
        participants: Some([BERNIE].into()),
        person_labels: vec![LABELS[0].into(), LABELS[1].into()],
    }
}

pub fn scenario_avery_bernie() -> Result<AveryBernieOutcome, SimError> {
    let cfg = avery_bernie_config();
    let run = simulate(&cfg)?;
    let (risk, matches) = run.person_matches.get(&BERNIE).cloned().unwrap_or_default();
    let bernie_match_output = serde_json::to_string(&matches).map_err(|e| SimError::Internal(e.to_string()))?;

    let interview_published = |place: u32| {
        run.publications
            .iter()
            .any(|p| p.source == PublicationSource::LighthouseInterview && p.owner == place && p.appended > 0)
    };
    let mut leaked_labels = Vec::new();
    for label in LABELS {
        let in_payloads = run.payloads.iter().any(|p| p.contains(label));
        if run.commons_state.contains(label)
            || run.commons_export.contains(label)
            || in_payloads
            || bernie_match_output.contains(label)
        {
            leaked_labels.push(label.to_string());
        }
    }
    Ok(AveryBernieOutcome {
        bernie_notified: run.metrics.notified_persons.contains(&BERNIE),
        bernie_risk: risk.value(),
        shop_self_detections: run.metrics.lighthouse_self_detections,
        shop_published: interview_published(0),
        bus_published: interview_published(1),
        leaked_labels,
        bernie_match_output,
        run,
    })
}
