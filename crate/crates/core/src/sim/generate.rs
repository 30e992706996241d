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

use rand::seq::index::sample;
use rand::Rng;

use super::config::{DiagnosisEvent, PlaceConfig, Visit, WorldConfig};
use super::world::stream_rng;
use crate::device::DeviceRole;
use crate::protocol::{ExposurePolicy, IntervalNumber, ReportType, DEFAULT_RETENTION_DAYS, INTERVALS_PER_DAY};

const STREAM_WORLD: u64 = 7;

/// Shape of a one-day random world. Every diagnosis happens in the last
/// interval of the day.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWorldParams {
    pub seed: u64,
    pub n_people: u32,
    pub n_places: u32,
    pub visits_per_person: u32,
    /// Visit lengths are uniform in `1..=max_visit_intervals`.
    pub max_visit_intervals: u32,
    pub n_diagnosed: u32,
    pub day_index: u32,
    pub participation: f64,
    /// Fraction of places holding an active lighthouse.
    pub active_lighthouse_fraction: f64,
    /// Fraction of places holding a passive lighthouse.
    pub passive_lighthouse_fraction: f64,
    pub radio_loss_prob: f64,
    pub interview_recall_prob: f64,
}

impl Default for RandomWorldParams {
    fn default() -> Self {
        Self {
            seed: 0,
            n_people: 1000,
            n_places: 100,
            visits_per_person: 3,
            max_visit_intervals: 4,
            n_diagnosed: 50,
            day_index: 20_000,
            participation: 1.0,
            active_lighthouse_fraction: 0.0,
            passive_lighthouse_fraction: 0.0,
            radio_loss_prob: 0.0,
            interview_recall_prob: 1.0,
        }
    }
}

/// The schedule depends on `seed` only, never on `participation`.
pub fn random_world(params: &RandomWorldParams) -> WorldConfig {
    let mut rng = stream_rng(params.seed, STREAM_WORLD);
    let places: Vec<PlaceConfig> = (0..params.n_places)
        .map(|i| {
            let u = rng.random::<f64>();
            let lighthouse = if u < params.active_lighthouse_fraction {
                Some(DeviceRole::LighthouseActive)
            } else if u < params.active_lighthouse_fraction + params.passive_lighthouse_fraction {
                Some(DeviceRole::LighthousePassive)
            } else {
                None
            };
            PlaceConfig {
                place_id: format!("place-{i}"),
                lighthouse,
                additional_lighthouses: vec![],
                label: lighthouse.map(|_| format!("Venue {i}")),
            }
        })
        .collect();

    let day = IntervalNumber::from_day_index(params.day_index).value();
    let max_len = params.max_visit_intervals.clamp(1, INTERVALS_PER_DAY - 1);
    let mut visits = Vec::new();
    for person in 0..params.n_people {
        for _ in 0..params.visits_per_person {
            let len = rng.random_range(1..=max_len);
            let start = day + rng.random_range(0..INTERVALS_PER_DAY - len);
            let place = rng.random_range(0..params.n_places.max(1));
            visits.push(Visit {
                person,
                place_id: format!("place-{place}"),
                start: IntervalNumber(start),
                end: IntervalNumber(start + len),
                dwell_s: crate::protocol::INTERVAL_SECONDS as f64,
            });
        }
    }

    let n_diag = params.n_diagnosed.min(params.n_people) as usize;
    let diagnosed: BTreeSet<u32> = sample(&mut rng, params.n_people as usize, n_diag)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    let diagnoses = diagnosed
        .into_iter()
        .map(|person| DiagnosisEvent {
            person,
            at: IntervalNumber(day + INTERVALS_PER_DAY - 1),
            report_type: ReportType::Confirmed,
        })
        .collect();

    WorldConfig {
        seed: params.seed,
        n_people: params.n_people,
        participation: params.participation,
        places,
        visit_schedule: visits,
        radio_loss_prob: params.radio_loss_prob,
        interview_recall_prob: params.interview_recall_prob,
        policy: ExposurePolicy::default(),
        diagnoses,
        attenuation_band_db: (30.0, 60.0),
        retention_days: DEFAULT_RETENTION_DAYS,
        lighthouse_auto_publish: true,
        participants: None,
        person_labels: Vec::new(),
    }
}
