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


//! Oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::sync::Arc;

use encommons::commons::{
    CommonsInstance, DayRange, IssueOtaRequest, ManualClock, OneTimeAuthorization, PhaRecord,
    SigningCredential,
};
use encommons::protocol::{
    DiagnosisKey, ExposureMatch, ExposurePolicy, IntervalNumber, ObservedBeacon, PhaId, ReportType,
    RollingProximityIdentifier, TemporaryExposureKey,
};
use hmac::{Hmac, Mac};
use rand::{Rng, RngCore};
use sha2::Sha256;

/// Identifier schedule entry computed straight from the PRF definition.
pub fn oracle_rpi(key: &[u8; 16], interval: u32) -> [u8; 16] {
    let mut mac = Hmac::<Sha256>::new_from_slice(key).unwrap();
    mac.update(b"EN-RPI");
    mac.update(&interval.to_le_bytes());
    mac.finalize().into_bytes()[..16].try_into().unwrap()
}

/// Nested loop over keys and beacons with no indexing.
pub fn brute_force_match(
    keys: &[DiagnosisKey],
    log: &[ObservedBeacon],
    policy: &ExposurePolicy,
) -> Vec<ExposureMatch> {
    let mut out = Vec::new();
    for key in keys {
        let start = key.tek.day_start().value();
        let end = start + key.tek.rolling_period();
        let schedule: Vec<[u8; 16]> = (start..end).map(|i| oracle_rpi(key.tek.key_material(), i)).collect();
        let mut total = 0.0;
        let mut min_atten = f64::INFINITY;
        let mut intervals = Vec::new();
        let mut hit = false;
        for b in log {
            let i = b.interval.value();
            if i < start || i >= end || b.attenuation_db > policy.max_attenuation_db {
                continue;
            }
            if schedule[(i - start) as usize] == b.rpi.0 {
                hit = true;
                total += b.duration_s;
                min_atten = min_atten.min(b.attenuation_db);
                if !intervals.contains(&b.interval) {
                    intervals.push(b.interval);
                }
            }
        }
        if hit && total > 0.0 && total >= policy.min_total_duration_s {
            intervals.sort();
            out.push(ExposureMatch {
                key: key.clone(),
                matched_intervals: intervals,
                total_duration_s: total,
                min_attenuation_db: min_atten,
            });
        }
    }
    // Insertion sort keeps ties in key order.
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 {
            let a = (out[j - 1].key.tek.day_start(), out[j - 1].key.pha_id.clone());
            let b = (out[j].key.tek.day_start(), out[j].key.pha_id.clone());
            if a <= b {
                break;
            }
            out.swap(j - 1, j);
            j -= 1;
        }
    }
    out
}

/// A random matching instance. Roughly a third of beacons are genuine hits,
/// some are genuine identifiers heard at the wrong interval, the rest noise.
pub fn random_match_instance<R: Rng>(
    rng: &mut R,
    max_keys: usize,
    max_beacons: usize,
    at_limit: bool,
) -> (Vec<DiagnosisKey>, Vec<ObservedBeacon>) {
    let (n_keys, n_beacons) = if at_limit {
        (max_keys, max_beacons)
    } else {
        (rng.random_range(1..=max_keys), rng.random_range(0..=max_beacons))
    };
    let base_day = rng.random_range(18_000..20_000u32);
    let phas = ["pha-a", "pha-b", "pha-c"];
    let keys: Vec<DiagnosisKey> = (0..n_keys)
        .map(|_| {
            let mut material = [0u8; 16];
            rng.fill_bytes(&mut material);
            let day = IntervalNumber::from_day_index(base_day + rng.random_range(0..3));
            let period = if rng.random_bool(0.8) { 96 } else { rng.random_range(1..=96) };
            DiagnosisKey {
                tek: TemporaryExposureKey::new(material, day, period).unwrap(),
                report_type: if rng.random_bool(0.7) { ReportType::Confirmed } else { ReportType::Probable },
                pha_id: Some(PhaId::new(phas[rng.random_range(0..phas.len())])),
                region_tags: Default::default(),
                upload_time: day,
            }
        })
        .collect();
    let log = (0..n_beacons)
        .map(|_| {
            let k = &keys[rng.random_range(0..keys.len())];
            let start = k.tek.day_start().value();
            let i = start + rng.random_range(0..k.tek.rolling_period());
            let (rpi, interval) = match rng.random_range(0..3) {
                0 => (oracle_rpi(k.tek.key_material(), i), i),
                1 => (oracle_rpi(k.tek.key_material(), i), start + rng.random_range(0..96 * 3)),
                _ => {
                    let mut r = [0u8; 16];
                    rng.fill_bytes(&mut r);
                    (r, i)
                }
            };
            let atten = rng.random_range(0.0..90.0);
            let duration = if rng.random_bool(0.05) { 0.0 } else { rng.random_range(0.0..=900.0) };
            ObservedBeacon::new(RollingProximityIdentifier(rpi), IntervalNumber(interval), atten, duration).unwrap()
        })
        .collect();
    (keys, log)
}

pub struct Fixture {
    pub admin: SigningCredential,
    pub pha: SigningCredential,
    pub pha_id: PhaId,
    pub clock: Arc<ManualClock>,
    pub instance: CommonsInstance,
}

pub const DAY: u32 = 20_000 * 96;

impl Fixture {
    pub fn new(id: &str, seed: u64) -> Self {
        Self::with_pha(id, seed, "pha-a")
    }

    pub fn with_pha(id: &str, seed: u64, pha: &str) -> Self {
        let admin = SigningCredential::from_seed([seed as u8; 32]);
        let pha_cred = SigningCredential::from_seed([seed as u8 ^ 0x55; 32]);
        let clock = Arc::new(ManualClock::new(IntervalNumber(DAY + 50)));
        let instance = CommonsInstance::builder(id, admin.public_key())
            .clock(clock.clone())
            .seed(seed)
            .build()
            .unwrap();
        let record = PhaRecord::new(pha, pha_cred.public_key(), "Health Dept");
        let pha_id = instance.register_pha(record.clone(), &admin.authorize_register(&record)).unwrap();
        Self { admin, pha: pha_cred, pha_id, clock, instance }
    }

    pub fn issue(&self, req: IssueOtaRequest) -> OneTimeAuthorization {
        self.instance.issue_ota(&self.pha.authorize_issue(&self.pha_id, &req), &req).unwrap()
    }

    /// OTA covering the 14 days ending today.
    pub fn issue_default(&self) -> OneTimeAuthorization {
        self.issue(IssueOtaRequest::new(ReportType::Confirmed, DayRange::ending_at(IntervalNumber(DAY), 14)))
    }
}

pub fn random_tek<R: RngCore>(rng: &mut R, day_offset: u32) -> TemporaryExposureKey {
    let mut m = [0u8; 16];
    rng.fill_bytes(&mut m);
    TemporaryExposureKey::for_day(m, IntervalNumber(DAY - day_offset * 96)).unwrap()
}
