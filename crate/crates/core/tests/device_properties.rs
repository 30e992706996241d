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


mod common;

use encommons::commons::{DayRange, OneTimeAuthorization, OtaToken};
use encommons::device::{check_receipt_code, DeviceError, DeviceRole, DeviceState, ReceiptCode, RECEIPT_PREFIX_LEN};
use encommons::protocol::{
    derive_rpi, generate_tek, DiagnosisKey, ExposurePolicy, IntervalNumber, PhaId, ReportType,
    RollingProximityIdentifier,
};
use proptest::prelude::*;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::brute_force_match;

const DAY0: u32 = 20_000 * 96;

fn contains_bytes(hay: &[u8], needle: &[u8]) -> bool {
    hay.windows(needle.len()).any(|w| w == needle)
}

fn ota_for(days: DayRange) -> OneTimeAuthorization {
    OneTimeAuthorization {
        token: OtaToken([7; 16]),
        issuer: PhaId::new("pha-a"),
        report_type: ReportType::Confirmed,
        authorized_days: days,
        forward_tags: Default::default(),
        region_tags: Default::default(),
        issued_at: IntervalNumber(DAY0),
        expiry: IntervalNumber(DAY0 + 96 * 30),
        used_at: None,
    }
}

#[derive(Debug, Clone)]
enum Op {
    Hear { rpi: [u8; 16], atten: f64, secs: f64 },
    Tick(u32),
    NextDay,
}

fn arb_ops() -> impl Strategy<Value = Vec<Op>> {
    prop::collection::vec(
        prop_oneof![
            4 => (any::<[u8; 16]>(), 0.0..90.0f64, 0.0..=900.0f64).prop_map(|(rpi, atten, secs)| Op::Hear { rpi, atten, secs }),
            2 => (1u32..20).prop_map(Op::Tick),
            1 => Just(Op::NextDay),
        ],
        0..80,
    )
}

/// Drives a device through `ops`, calling `each` after every step.
fn drive(role: DeviceRole, seed: u64, ops: &[Op], mut each: impl FnMut(&DeviceState, Result<(), DeviceError>)) -> DeviceState {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut now = IntervalNumber(DAY0);
    let mut d = DeviceState::new(role, &mut rng, now, 5).unwrap();
    for op in ops {
        let r = match op {
            Op::Hear { rpi, atten, secs } => d.record_observation(RollingProximityIdentifier(*rpi), now, *atten, *secs),
            Op::Tick(n) => {
                let next = IntervalNumber(now.value() + n);
                if next.day_start() != now.day_start() {
                    d.advance_day(&mut rng, next.day_start()).unwrap();
                }
                now = next;
                Ok(())
            }
            Op::NextDay => {
                now = IntervalNumber(now.day_start().value() + 96);
                d.advance_day(&mut rng, now).map(|_| ())
            }
        };
        each(&d, r);
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn passive_lighthouse_never_listens(seed in any::<u64>(), ops in arb_ops()) {
        let mut d = drive(DeviceRole::LighthousePassive, seed, &ops, |d, r| {
            assert!(d.observation_log().is_empty());
            if let Err(e) = r {
                assert_eq!(e, DeviceError::PassiveCannotListen);
            }
        });
        let now = IntervalNumber(d.current_tek().day_start().value());
        prop_assert_eq!(
            d.record_observation(RollingProximityIdentifier([1; 16]), now, 1.0, 1.0),
            Err(DeviceError::PassiveCannotListen)
        );
    }

    #[test]
    fn history_strictly_increasing_and_bounded(seed in any::<u64>(), ops in arb_ops()) {
        drive(DeviceRole::Phone, seed, &ops, |d, _| {
            let days: Vec<_> = d.tek_history().iter().map(|t| t.day_start()).collect();
            assert!(days.windows(2).all(|w| w[0] < w[1]));
            assert!(days.len() <= d.retention_days() as usize);
            assert!(days.last().is_none_or(|&l| l < d.current_tek().day_start()));
        });
    }

    /// Reports and matches carry nothing heard from others.
    #[test]
    fn outputs_never_contain_logged_identifiers(seed in any::<u64>(), ops in arb_ops(), n_keys in 0usize..6) {
        let d = drive(DeviceRole::LighthouseActive, seed, &ops, |_, _| {});
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 1);
        // Keys that produced some of the logged identifiers.
        let mut keys: Vec<DiagnosisKey> = (0..n_keys)
            .map(|_| DiagnosisKey::confirmed(generate_tek(&mut rng, d.current_tek().day_start()).unwrap()))
            .collect();
        let mut d = d;
        let now = IntervalNumber(d.current_tek().day_start().value() + 50);
        for k in &keys {
            d.record_observation(derive_rpi(&k.tek, now).unwrap(), now, 20.0, 600.0).unwrap();
        }
        keys.push(DiagnosisKey::confirmed(*d.current_tek()));
        let policy = ExposurePolicy::default();
        let report = d.make_risk_report(&keys, &policy, "lh").unwrap().to_json();
        let code = d.make_receipt_code(now).unwrap().encode();
        let today = DayRange::single(now);
        let published = d.publish_keys(today, &ota_for(today)).unwrap();
        prop_assert_eq!(&published, &vec![*d.current_tek()]);
        for b in d.observation_log() {
            let hex = b.rpi.to_hex();
            for out in [report.as_bytes(), code.as_bytes()] {
                prop_assert!(!contains_bytes(out, &b.rpi.0));
                prop_assert!(!contains_bytes(out, hex.as_bytes()));
            }
        }
    }

    #[test]
    fn echoed_broadcasts_all_match(seed in any::<u64>(), slots in prop::collection::btree_set(0u32..96, 1..20)) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut d = DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap();
        for s in &slots {
            let i = IntervalNumber(DAY0 + s);
            let rpi = d.current_broadcast(i).unwrap();
            d.record_observation(rpi, i, 10.0, 900.0).unwrap();
        }
        let keys = vec![DiagnosisKey::confirmed(*d.current_tek())];
        let (risk, matches) = d.self_check(&keys, &ExposurePolicy::default());
        prop_assert!(risk.is_exposed());
        let want: Vec<IntervalNumber> = slots.iter().map(|s| IntervalNumber(DAY0 + s)).collect();
        prop_assert_eq!(&matches[0].matched_intervals, &want);
    }

    #[test]
    fn receipt_sound(seed in any::<u64>(), slot in 0u32..96, decoys in 0usize..5) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = DeviceState::new(DeviceRole::LighthouseActive, &mut rng, IntervalNumber(DAY0), 14).unwrap();
        let i = IntervalNumber(DAY0 + slot);
        let code = d.make_receipt_code(i).unwrap();
        let mut keys: Vec<DiagnosisKey> = (0..decoys)
            .map(|_| DiagnosisKey::confirmed(generate_tek(&mut rng, IntervalNumber(DAY0)).unwrap()))
            .collect();
        prop_assert!(!check_receipt_code(&code, &keys) || decoys > 0);
        keys.push(DiagnosisKey::confirmed(*d.current_tek()));
        prop_assert!(check_receipt_code(&ReceiptCode::decode(&code.encode()).unwrap(), &keys));
    }
}

#[test]
fn independent_devices_have_distinct_keys() {
    let mut keys = std::collections::HashSet::new();
    for seed in 0..1000 {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let d = DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap();
        assert!(keys.insert(*d.current_tek().key_material()));
    }
}

#[test]
fn receipt_codes_differ_by_interval() {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let d = DeviceState::new(DeviceRole::LighthousePassive, &mut rng, IntervalNumber(DAY0), 14).unwrap();
    for s in 0..95 {
        let a = d.make_receipt_code(IntervalNumber(DAY0 + s)).unwrap().encode();
        let b = d.make_receipt_code(IntervalNumber(DAY0 + s + 1)).unwrap().encode();
        assert_ne!(a, b);
    }
    let phone = DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap();
    assert_eq!(phone.make_receipt_code(IntervalNumber(DAY0)), Err(DeviceError::NotLighthouse));
}

#[test]
fn receipt_false_positives_against_thousand_keys() {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let day = IntervalNumber(DAY0);
    let keys: Vec<DiagnosisKey> = (0..1000)
        .map(|_| DiagnosisKey::confirmed(generate_tek(&mut rng, day).unwrap()))
        .collect();
    let mut hits = 0;
    for _ in 0..1000 {
        let mut prefix = [0u8; RECEIPT_PREFIX_LEN];
        rng.fill_bytes(&mut prefix);
        let code = ReceiptCode::from_parts(prefix, IntervalNumber(DAY0 + rng.random_range(0..96)));
        hits += check_receipt_code(&code, &keys) as u32;
    }
    assert_eq!(hits, 0);
}

/// A phone in a random world: its self-check equals the oracle over its log.
#[test]
fn self_check_equals_oracle_in_random_world() {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut phone = DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap();
    let others: Vec<DeviceState> = (0..40)
        .map(|_| DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap())
        .collect();
    for s in 0..96 {
        let i = IntervalNumber(DAY0 + s);
        for o in &others {
            if rng.random_bool(0.2) {
                let atten = rng.random_range(20.0..80.0);
                phone.record_observation(o.current_broadcast(i).unwrap(), i, atten, rng.random_range(0.0..=900.0)).unwrap();
            }
        }
    }
    let keys: Vec<DiagnosisKey> = others.iter().step_by(3).map(|o| DiagnosisKey::confirmed(*o.current_tek())).collect();
    let policy = ExposurePolicy::default();
    let (_, matches) = phone.self_check(&keys, &policy);
    assert!(!matches.is_empty());
    assert_eq!(matches, brute_force_match(&keys, phone.observation_log(), &policy));
}

#[test]
fn publish_respects_authorization() {
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let mut d = DeviceState::new(DeviceRole::Phone, &mut rng, IntervalNumber(DAY0), 14).unwrap();
    for k in 1..4 {
        d.advance_day(&mut rng, IntervalNumber(DAY0 + 96 * k)).unwrap();
    }
    let auth = DayRange::new(IntervalNumber(DAY0 + 96), IntervalNumber(DAY0 + 192)).unwrap();
    let keys = d.publish_keys(auth, &ota_for(auth)).unwrap();
    assert_eq!(keys.len(), 2);
    let wider = DayRange::ending_at(IntervalNumber(DAY0 + 96 * 3), 4);
    assert!(matches!(d.publish_keys(wider, &ota_for(auth)), Err(DeviceError::RangeNotAuthorized { .. })));
    let empty = DayRange::single(IntervalNumber(DAY0 + 96 * 10));
    assert_eq!(d.publish_keys(empty, &ota_for(empty)), Err(DeviceError::NoKeysInRange));
}
