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

//! The event loop.
//!
//! One tick per protocol interval. Within a tick: day rollover, radio
//! exchange between co-present devices, diagnosis events, and at the last
//! interval of each day a check phase where every device downloads new keys
//! and self-checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::config::WorldConfig;
use super::SimError;
use crate::commons::{
    write_export, CommonsInstance, DayRange, DownloadFilter, IssueOtaRequest, ManualClock,
    OtaToken, PhaRecord, SigningCredential,
};
use crate::device::{DeviceRole, DeviceState};
use crate::protocol::{
    DiagnosisKey, ExposureMatch, IntervalNumber, KeyIndex, PhaId, ReportType, RiskScore,
    RollingProximityIdentifier,
    INTERVALS_PER_DAY,
};

const STREAM_PARTICIPATION: u64 = 1;
const STREAM_RADIO: u64 = 2;
const STREAM_INTERVIEW: u64 = 3;
const STREAM_PHONE_BASE: u64 = 1 << 32;
const STREAM_LIGHTHOUSE_BASE: u64 = 2 << 32;
/// Added per extra lighthouse at the same place.
const STREAM_LIGHTHOUSE_STRIDE: u64 = 1 << 40;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Co-presence derived from the schedule alone.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContactGroundTruth {
    /// `(a, b, interval, place_id)` with `a < b`.
    pub pairs: BTreeSet<(u32, u32, IntervalNumber, String)>,
}

impl ContactGroundTruth {
    pub fn contains(&self, a: u32, b: u32, interval: IntervalNumber, place: &str) -> bool {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.pairs.contains(&(a, b, interval, place.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimMetrics {
    /// Non-diagnosed people with a qualifying co-presence with a diagnosed
    /// person inside the diagnosis' authorized days.
    pub true_contacts: u64,
    /// True contacts whose device raised a notification.
    pub detected_notifications: u64,
    pub detection_rate: f64,
    pub notified_persons: BTreeSet<u32>,
    /// Active lighthouses that found an exposure in their own log.
    pub lighthouse_self_detections: u64,
    /// Days from first qualifying contact to notification, for detected contacts.
    pub notification_latency_days: BTreeMap<u32, u64>,
    pub participants: u64,
    pub uploads: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PublicationSource {
    /// A diagnosed participant's phone.
    Phone,
    /// A lighthouse the PHA contacted after an interview.
    LighthouseInterview,
    /// A lighthouse that reported its own detection.
    LighthouseSelfDetection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub source: PublicationSource,
    /// Person index, or the lighthouse's place index.
    pub owner: u32,
    pub token: OtaToken,
    pub days: DayRange,
    pub appended: usize,
    pub at: IntervalNumber,
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct SimRun {
    pub metrics: SimMetrics,
    pub ground_truth: ContactGroundTruth,
    pub participants: BTreeSet<u32>,
    pub publications: Vec<Publication>,
    /// Serialized notification and risk-report payloads, in emission order.
    pub payloads: Vec<String>,
    pub commons_state: String,
    pub commons_export: String,
    /// Final check result per participating person.
    pub person_matches: BTreeMap<u32, (RiskScore, Vec<ExposureMatch>)>,
    /// Places whose passive lighthouse had a non-empty observation log at
    /// any check phase.
    pub passive_logs_nonempty: BTreeSet<usize>,
    /// Every identifier an active lighthouse logged during the run.
    pub lighthouse_heard: BTreeSet<RollingProximityIdentifier>,
}

/// Who runs the app. Each person draws one uniform value from a dedicated
/// stream and participates iff it falls below `participation`, so raising
/// the rate at a fixed seed only adds participants.
pub fn participation_mask(cfg: &WorldConfig) -> BTreeSet<u32> {
    if let Some(p) = &cfg.participants {
        return p.clone();
    }
    let mut rng = stream_rng(cfg.seed, STREAM_PARTICIPATION);
    (0..cfg.n_people)
        .filter(|_| rng.random::<f64>() < cfg.participation)
        .collect()
}

type Occupancy = BTreeMap<(IntervalNumber, usize), BTreeMap<u32, f64>>;

fn occupancy(cfg: &WorldConfig) -> Occupancy {
    let index: HashMap<&str, usize> = cfg
        .places
        .iter()
        .enumerate()
        .map(|(i, p)| (p.place_id.as_str(), i))
        .collect();
    let mut occ: Occupancy = BTreeMap::new();
    for v in &cfg.visit_schedule {
        let place = index[v.place_id.as_str()];
        for i in v.start.value()..v.end.value() {
            let dwell = occ.entry((IntervalNumber(i), place)).or_default().entry(v.person).or_insert(0.0);
            *dwell = dwell.max(v.dwell_s);
        }
    }
    occ
}

pub fn ground_truth(cfg: &WorldConfig) -> ContactGroundTruth {
    let mut pairs = BTreeSet::new();
    for ((interval, place), people) in occupancy(cfg) {
        let ids: Vec<u32> = people.keys().copied().collect();
        for (k, &a) in ids.iter().enumerate() {
            for &b in &ids[k + 1..] {
                pairs.insert((a, b, interval, cfg.places[place].place_id.clone()));
            }
        }
    }
    ContactGroundTruth { pairs }
}

/// People who should be notified by direct contact with a diagnosed person,
/// with the day of their first qualifying contact.
///
/// A contact qualifies when the co-present seconds with one diagnosed person
/// on one day are positive and reach the policy minimum, mirroring the
/// one-key-per-day matching.
pub fn qualifying_contacts(cfg: &WorldConfig) -> BTreeMap<u32, IntervalNumber> {
    let occ = occupancy(cfg);
    let diagnosed: BTreeSet<u32> = cfg.diagnoses.iter().map(|d| d.person).collect();
    let mut per_day: BTreeMap<(u32, usize, IntervalNumber), f64> = BTreeMap::new();
    for (k, d) in cfg.diagnoses.iter().enumerate() {
        let window = DayRange::ending_at(d.at, cfg.retention_days);
        for ((interval, _), people) in occ.range((window.first(), 0)..(IntervalNumber(d.at.value() + 1), 0)) {
            let Some(&dd) = people.get(&d.person) else {
                continue;
            };
            for (&c, &dc) in people {
                if c != d.person && !diagnosed.contains(&c) {
                    *per_day.entry((c, k, interval.day_start())).or_insert(0.0) += dd.min(dc);
                }
            }
        }
    }
    let min = cfg.policy.min_total_duration_s;
    let mut out: BTreeMap<u32, IntervalNumber> = BTreeMap::new();
    for ((c, _, day), secs) in per_day {
        if secs > 0.0 && secs >= min {
            let e = out.entry(c).or_insert(day);
            *e = (*e).min(day);
        }
    }
    out
}

#[derive(Serialize)]
struct NotificationPayload<'a> {
    risk: f64,
    matches: &'a [ExposureMatch],
}

struct Sim<'a> {
    cfg: &'a WorldConfig,
    occ: Occupancy,
    phones: BTreeMap<u32, (DeviceState, ChaCha20Rng)>,
    /// Keyed by lighthouse index; `lh_place` maps the index to its place.
    lighthouses: BTreeMap<usize, (DeviceState, ChaCha20Rng)>,
    lh_place: Vec<usize>,
    by_place: BTreeMap<usize, Vec<usize>>,
    radio: ChaCha20Rng,
    interview: ChaCha20Rng,
    clock: Arc<ManualClock>,
    commons: CommonsInstance,
    pha: SigningCredential,
    pha_id: PhaId,
    cursor: u64,
    keys: Vec<DiagnosisKey>,
    index: KeyIndex,
    notified: BTreeMap<u32, IntervalNumber>,
    lh_published: BTreeMap<usize, BTreeSet<IntervalNumber>>,
    lh_self_detected: BTreeSet<usize>,
    publications: Vec<Publication>,
    payloads: Vec<String>,
    passive_nonempty: BTreeSet<usize>,
    lighthouse_heard: BTreeSet<RollingProximityIdentifier>,
}

fn internal(e: impl std::fmt::Display) -> SimError {
    SimError::Internal(e.to_string())
}

impl<'a> Sim<'a> {
    fn new(cfg: &'a WorldConfig, start: IntervalNumber, participants: &BTreeSet<u32>) -> Result<Self, SimError> {
        let phones = participants
            .iter()
            .map(|&p| {
                let mut rng = stream_rng(cfg.seed, STREAM_PHONE_BASE + u64::from(p));
                let d = DeviceState::new(DeviceRole::Phone, &mut rng, start, cfg.retention_days).map_err(internal)?;
                Ok((p, (d, rng)))
            })
            .collect::<Result<_, SimError>>()?;
        let mut lighthouses = BTreeMap::new();
        let mut lh_place = Vec::new();
        let mut by_place: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, p) in cfg.places.iter().enumerate() {
            for (k, role) in p.lighthouse_roles().enumerate() {
                let stream = STREAM_LIGHTHOUSE_BASE + i as u64 + k as u64 * STREAM_LIGHTHOUSE_STRIDE;
                let mut rng = stream_rng(cfg.seed, stream);
                let mut d = DeviceState::new(role, &mut rng, start, cfg.retention_days).map_err(internal)?;
                if let Some(l) = &p.label {
                    d = d.with_place_label(l.clone());
                }
                let lh = lh_place.len();
                lh_place.push(i);
                by_place.entry(i).or_default().push(lh);
                lighthouses.insert(lh, (d, rng));
            }
        }

        let mut cred_rng = stream_rng(cfg.seed, 4);
        let admin = SigningCredential::generate(&mut cred_rng);
        let pha = SigningCredential::generate(&mut cred_rng);
        let clock = Arc::new(ManualClock::new(start));
        let commons = CommonsInstance::builder("commons-sim", admin.public_key())
            .clock(clock.clone())
            .seed(cfg.seed ^ 0x5eed_c0ff_ee00_0001)
            .build()
            .map_err(internal)?;
        let record = PhaRecord::new("pha-sim", pha.public_key(), "Simulated PHA");
        let pha_id = commons
            .register_pha(record.clone(), &admin.authorize_register(&record))
            .map_err(internal)?;

        Ok(Self {
            cfg,
            occ: occupancy(cfg),
            phones,
            lighthouses,
            lh_place,
            by_place,
            radio: stream_rng(cfg.seed, STREAM_RADIO),
            interview: stream_rng(cfg.seed, STREAM_INTERVIEW),
            clock,
            commons,
            pha,
            pha_id,
            cursor: 0,
            keys: Vec::new(),
            index: KeyIndex::default(),
            notified: BTreeMap::new(),
            lh_published: BTreeMap::new(),
            lh_self_detected: BTreeSet::new(),
            publications: Vec::new(),
            payloads: Vec::new(),
            passive_nonempty: BTreeSet::new(),
            lighthouse_heard: BTreeSet::new(),
        })
    }

    fn advance_day(&mut self, day: IntervalNumber) -> Result<(), SimError> {
        for (d, rng) in self.phones.values_mut().chain(self.lighthouses.values_mut()) {
            d.advance_day(rng, day).map_err(internal)?;
        }
        Ok(())
    }

    fn exchange(&mut self, now: IntervalNumber) -> Result<(), SimError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Dev {
            Phone(u32),
            Lighthouse(usize),
        }
        let (lo, hi) = self.cfg.attenuation_band_db;
        let loss = self.cfg.radio_loss_prob;
        let cells: Vec<(usize, Vec<(u32, f64)>)> = self
            .occ
            .range((now, 0)..(IntervalNumber(now.value() + 1), 0))
            .map(|((_, place), people)| {
                let present = people
                    .iter()
                    .filter(|(p, _)| self.phones.contains_key(p))
                    .map(|(&p, &d)| (p, d))
                    .collect();
                (*place, present)
            })
            .collect();

        for (place, present) in cells {
            let mut senders: Vec<(Dev, _, f64)> = Vec::with_capacity(present.len() + 1);
            for &(p, dwell) in &present {
                let rpi = self.phones[&p].0.current_broadcast(now).map_err(internal)?;
                senders.push((Dev::Phone(p), rpi, dwell));
            }
            let mut receivers: Vec<(Dev, f64)> = present.iter().map(|&(p, d)| (Dev::Phone(p), d)).collect();
            for &lh in self.by_place.get(&place).map_or(&[][..], Vec::as_slice) {
                let device = &self.lighthouses[&lh].0;
                let full = crate::protocol::INTERVAL_SECONDS as f64;
                senders.push((Dev::Lighthouse(lh), device.current_broadcast(now).map_err(internal)?, full));
                if device.role() == DeviceRole::LighthouseActive {
                    receivers.push((Dev::Lighthouse(lh), full));
                }
            }
            for &(rx, rx_dwell) in &receivers {
                for &(tx, rpi, tx_dwell) in &senders {
                    // Co-located installations do not log each other.
                    let both_fixed = matches!((rx, tx), (Dev::Lighthouse(_), Dev::Lighthouse(_)));
                    if tx == rx || both_fixed || (loss > 0.0 && self.radio.random::<f64>() < loss) {
                        continue;
                    }
                    let atten = lo + (hi - lo) * self.radio.random::<f64>();
                    let secs = rx_dwell.min(tx_dwell);
                    let device = match rx {
                        Dev::Phone(p) => &mut self.phones.get_mut(&p).expect("receiver").0,
                        Dev::Lighthouse(l) => &mut self.lighthouses.get_mut(&l).expect("receiver").0,
                    };
                    device.record_observation(rpi, now, atten, secs).map_err(internal)?;
                }
            }
        }
        Ok(())
    }

    fn issue(&self, report_type: ReportType, days: DayRange) -> Result<crate::commons::OneTimeAuthorization, SimError> {
        let req = IssueOtaRequest::new(report_type, days).ttl_days(1);
        self.commons
            .issue_ota(&self.pha.authorize_issue(&self.pha_id, &req), &req)
            .map_err(internal)
    }

    /// Lighthouse publishes its key for `day`, once per day.
    fn publish_lighthouse_day(
        &mut self,
        lh: usize,
        day: IntervalNumber,
        source: PublicationSource,
        now: IntervalNumber,
    ) -> Result<(), SimError> {
        if !self.lh_published.entry(lh).or_default().insert(day) {
            return Ok(());
        }
        let days = DayRange::single(day);
        let ota = self.issue(ReportType::Confirmed, days)?;
        let Ok(teks) = self.lighthouses[&lh].0.publish_keys(days, &ota) else {
            // Key already pruned from the lighthouse's history.
            return Ok(());
        };
        let receipt = self.commons.upload_keys(&ota.token, &teks).map_err(internal)?;
        self.publications.push(Publication {
            source,
            owner: self.lh_place[lh] as u32,
            token: ota.token,
            days,
            appended: receipt.appended,
            at: now,
        });
        Ok(())
    }

    fn diagnose(&mut self, person: u32, report_type: ReportType, now: IntervalNumber) -> Result<(), SimError> {
        let window = DayRange::ending_at(now, self.cfg.retention_days);
        if self.phones.contains_key(&person) {
            let ota = self.issue(report_type, window)?;
            let teks = self.phones[&person].0.publish_keys(window, &ota).map_err(internal)?;
            let receipt = self.commons.upload_keys(&ota.token, &teks).map_err(internal)?;
            self.publications.push(Publication {
                source: PublicationSource::Phone,
                owner: person,
                token: ota.token,
                days: window,
                appended: receipt.appended,
                at: now,
            });
        }

        // Interview: which places, and on which days, was the person there.
        let mut visited: BTreeMap<usize, BTreeSet<IntervalNumber>> = BTreeMap::new();
        for ((interval, place), people) in self.occ.range((window.first(), 0)..(IntervalNumber(now.value() + 1), 0)) {
            if people.contains_key(&person) {
                visited.entry(*place).or_default().insert(interval.day_start());
            }
        }
        for (place, days) in visited {
            let recalled = self.interview.random::<f64>() < self.cfg.interview_recall_prob;
            if !recalled {
                continue;
            }
            let lhs = self.by_place.get(&place).cloned().unwrap_or_default();
            for lh in lhs {
                for &day in &days {
                    self.publish_lighthouse_day(lh, day, PublicationSource::LighthouseInterview, now)?;
                }
            }
        }
        Ok(())
    }

    fn refresh_keys(&mut self) {
        let batch = self.commons.download_keys(&DownloadFilter::any(), self.cursor, None);
        if batch.keys.is_empty() {
            return;
        }
        self.cursor = batch.next_cursor;
        self.keys.extend(batch.keys.into_iter().map(|k| k.diagnosis_key));
        self.index = KeyIndex::build(&self.keys);
    }

    fn check_phase(&mut self, now: IntervalNumber) -> Result<(), SimError> {
        self.refresh_keys();
        let policy = self.cfg.policy;
        let lhs: Vec<usize> = self.lighthouses.keys().copied().collect();
        for lh in lhs {
            let (device, _) = &self.lighthouses[&lh];
            if device.role() != DeviceRole::LighthouseActive {
                if !device.observation_log().is_empty() {
                    self.passive_nonempty.insert(self.lh_place[lh]);
                }
                continue;
            }
            self.lighthouse_heard.extend(device.observation_log().iter().map(|b| b.rpi));
            let (risk, matches) = device.self_check_indexed(&self.index, &policy);
            if !risk.is_exposed() {
                continue;
            }
            self.lh_self_detected.insert(lh);
            let report = device
                .make_risk_report(&self.keys, &policy, format!("lighthouse-{lh}"))
                .map_err(internal)?;
            self.payloads.push(report.to_json());
            if self.cfg.lighthouse_auto_publish {
                let days: BTreeSet<IntervalNumber> = matches
                    .iter()
                    .flat_map(|m| m.matched_intervals.iter().map(|i| i.day_start()))
                    .collect();
                for day in days {
                    self.publish_lighthouse_day(lh, day, PublicationSource::LighthouseSelfDetection, now)?;
                }
            }
        }
        self.refresh_keys();

        for (&person, (device, _)) in &self.phones {
            if self.notified.contains_key(&person) {
                continue;
            }
            let (risk, matches) = device.self_check_indexed(&self.index, &policy);
            if risk.is_exposed() {
                self.notified.insert(person, now.day_start());
                self.payloads.push(
                    serde_json::to_string(&NotificationPayload {
                        risk: risk.value(),
                        matches: &matches,
                    })
                    .map_err(internal)?,
                );
            }
        }
        Ok(())
    }
}

/// Runs a world and keeps every artifact for inspection.
pub fn simulate(cfg: &WorldConfig) -> Result<SimRun, SimError> {
    cfg.validate()?;
    let participants = participation_mask(cfg);
    let truth = ground_truth(cfg);

    let first = cfg
        .visit_schedule
        .iter()
        .map(|v| v.start)
        .chain(cfg.diagnoses.iter().map(|d| d.at))
        .min()
        .unwrap_or_default();
    let last = cfg
        .visit_schedule
        .iter()
        .map(|v| IntervalNumber(v.end.value() - 1))
        .chain(cfg.diagnoses.iter().map(|d| d.at))
        .max()
        .unwrap_or_default();
    let start = first.day_start();
    let end = IntervalNumber(last.day_start().value() + INTERVALS_PER_DAY - 1);

    let mut diagnoses: BTreeMap<IntervalNumber, Vec<(u32, ReportType)>> = BTreeMap::new();
    for d in &cfg.diagnoses {
        diagnoses.entry(d.at).or_default().push((d.person, d.report_type));
    }

    let mut sim = Sim::new(cfg, start, &participants)?;
    for t in start.value()..=end.value() {
        let now = IntervalNumber(t);
        sim.clock.set(now);
        if now.is_day_aligned() && now > start {
            sim.advance_day(now)?;
        }
        sim.exchange(now)?;
        if let Some(ds) = diagnoses.get(&now) {
            for &(person, rt) in ds {
                sim.diagnose(person, rt, now)?;
            }
        }
        if (t + 1) % INTERVALS_PER_DAY == 0 {
            sim.check_phase(now)?;
        }
    }

    let contacts = qualifying_contacts(cfg);
    let mut latency: BTreeMap<u32, u64> = BTreeMap::new();
    let mut detected = 0u64;
    for (c, first_day) in &contacts {
        if let Some(day) = sim.notified.get(c) {
            detected += 1;
            let days = day.day_index().saturating_sub(first_day.day_index());
            *latency.entry(days).or_insert(0) += 1;
        }
    }
    let true_contacts = contacts.len() as u64;
    let metrics = SimMetrics {
        true_contacts,
        detected_notifications: detected,
        detection_rate: if true_contacts > 0 {
            detected as f64 / true_contacts as f64
        } else {
            0.0
        },
        notified_persons: sim.notified.keys().copied().collect(),
        lighthouse_self_detections: sim.lh_self_detected.len() as u64,
        notification_latency_days: latency,
        participants: participants.len() as u64,
        uploads: sim.publications.len() as u64,
    };

    let policy = cfg.policy;
    let person_matches = sim
        .phones
        .iter()
        .map(|(&p, (d, _))| (p, d.self_check_indexed(&sim.index, &policy)))
        .collect();
    let commons_export = write_export(&sim.commons.download_keys(&DownloadFilter::any(), 0, None).keys);
    Ok(SimRun {
        metrics,
        ground_truth: truth,
        participants,
        publications: sim.publications,
        payloads: sim.payloads,
        commons_state: sim.commons.serialized_state(),
        commons_export,
        person_matches,
        passive_logs_nonempty: sim.passive_nonempty,
        lighthouse_heard: sim.lighthouse_heard,
    })
}

pub fn run_world(cfg: &WorldConfig) -> Result<SimMetrics, SimError> {
    simulate(cfg).map(|r| r.metrics)
}
