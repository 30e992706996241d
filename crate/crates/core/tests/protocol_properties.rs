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

use std::collections::HashSet;

use encommons::protocol::{
    derive_rpi, derive_rpi_sequence, generate_tek, interval_from_timestamp, match_exposures,
    parse_test_vectors, score_risk, DiagnosisKey, ExposureMatch, ExposurePolicy, IntervalNumber,
    ObservedBeacon, ReportType, TemporaryExposureKey,
};
use proptest::prelude::*;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::{brute_force_match, oracle_rpi, random_match_instance};

const GOLDEN: &str = include_str!("data/rpi_vectors.csv");

#[test]
fn zero_key_vector() {
    let tek = TemporaryExposureKey::for_day([0; 16], IntervalNumber(0)).unwrap();
    assert_eq!(
        derive_rpi(&tek, IntervalNumber(0)).unwrap().to_hex(),
        "e8c20c6f41b4fcb2b8066d4b2c2d6d65"
    );
    assert_eq!(
        derive_rpi(&tek, IntervalNumber(95)).unwrap().to_hex(),
        "7181bb331dacf58c1fe471c0b5efe0c7"
    );
}

#[test]
fn golden_file_matches_library_and_oracle() {
    let vectors = parse_test_vectors(GOLDEN).unwrap();
    assert_eq!(vectors.len(), 12);
    for v in vectors {
        assert!(v.verify(), "{}", v.to_line());
        assert_eq!(v.rpi.0, oracle_rpi(v.tek.key_material(), v.interval.value()));
    }
}

#[test]
fn interval_boundaries() {
    assert_eq!(interval_from_timestamp(86_399), IntervalNumber(95));
    assert_eq!(interval_from_timestamp(86_400), IntervalNumber(96));
}

#[test]
fn adjacent_intervals_differ() {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..10_000 {
        let day = IntervalNumber::from_day_index(20_000);
        let tek = generate_tek(&mut rng, day).unwrap();
        let i = day.value() + (rng.next_u32() % 95);
        assert_ne!(
            derive_rpi(&tek, IntervalNumber(i)).unwrap(),
            derive_rpi(&tek, IntervalNumber(i + 1)).unwrap()
        );
    }
}

/// 10^5 identifiers: no collisions, and the pooled bytes pass a chi-square
/// uniformity test at the 1% level (255 degrees of freedom).
#[test]
fn collision_free_and_uniform() {
    const CRITICAL_255_01: f64 = 310.457;
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let mut seen = HashSet::new();
    let mut counts = [0u64; 256];
    let mut n = 0;
    while n < 100_000 {
        let day = IntervalNumber::from_day_index(18_000 + rng.next_u32() % 1000);
        let tek = generate_tek(&mut rng, day).unwrap();
        // A handful of intervals per key keeps both key and interval varied.
        for _ in 0..4 {
            let rpi = derive_rpi(&tek, IntervalNumber(day.value() + rng.next_u32() % 96)).unwrap();
            let fresh = seen.insert(rpi);
            if fresh {
                for b in rpi.0 {
                    counts[b as usize] += 1;
                }
                n += 1;
            }
        }
    }
    assert_eq!(seen.len(), n);
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / 256.0;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < CRITICAL_255_01, "chi-square {chi2}");
}

#[test]
fn sequence_is_pure_and_distinct() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..100 {
        let tek = generate_tek(&mut rng, IntervalNumber::from_day_index(19_000)).unwrap();
        let a = derive_rpi_sequence(&tek);
        assert_eq!(a, derive_rpi_sequence(&tek));
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 96);
    }
}

#[test]
fn fifty_keys_five_thousand_beacons() {
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (keys, log) = random_match_instance(&mut rng, 50, 5000, true);
    let policy = ExposurePolicy::default();
    let got = match_exposures(&keys, &log, &policy);
    assert!(!got.is_empty());
    assert_eq!(got, brute_force_match(&keys, &log, &policy));
}

#[test]
fn mixed_report_types_score() {
    let day = IntervalNumber::from_day_index(20_000);
    let mut keys = Vec::new();
    let mut log = Vec::new();
    for (b, rt) in [(1, ReportType::Confirmed), (2, ReportType::Probable)] {
        let tek = TemporaryExposureKey::for_day([b; 16], day).unwrap();
        let i = IntervalNumber(day.value() + 10);
        log.push(ObservedBeacon::new(derive_rpi(&tek, i).unwrap(), i, 40.0, 900.0).unwrap());
        let mut k = DiagnosisKey::confirmed(tek);
        k.report_type = rt;
        keys.push(k);
    }
    let policy = ExposurePolicy::default();
    let m = match_exposures(&keys, &log, &policy);
    assert_eq!(score_risk(&m, &policy).value(), 1350.0);
}

fn instance(seed: u64, keys: usize, beacons: usize) -> (Vec<DiagnosisKey>, Vec<ObservedBeacon>) {
    random_match_instance(&mut ChaCha20Rng::seed_from_u64(seed), keys, beacons, false)
}

fn arb_policy() -> impl Strategy<Value = ExposurePolicy> {
    (0.0..100.0f64, 0.0..2000.0f64, 0.1..4.0f64, 0.05..1.0f64).prop_map(|(a, m, wc, frac)| ExposurePolicy {
        max_attenuation_db: a,
        min_total_duration_s: m,
        weight_confirmed: wc,
        weight_probable: wc * frac,
    })
}

fn key_ids(ms: &[ExposureMatch]) -> HashSet<(String, IntervalNumber)> {
    ms.iter().map(|m| (m.key.tek.key_hex(), m.key.tek.day_start())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn matcher_equals_oracle(seed in any::<u64>(), policy in arb_policy()) {
        let (keys, log) = instance(seed, 20, 800);
        prop_assert_eq!(match_exposures(&keys, &log, &policy), brute_force_match(&keys, &log, &policy));
    }

    #[test]
    fn appending_a_qualifying_beacon_keeps_matches(seed in any::<u64>(), pick in any::<prop::sample::Index>(), slot in 0u32..96) {
        let (keys, mut log) = instance(seed, 10, 300);
        let policy = ExposurePolicy::default();
        let before = key_ids(&match_exposures(&keys, &log, &policy));
        let k = pick.get(&keys);
        let i = IntervalNumber(k.tek.day_start().value() + slot % k.tek.rolling_period());
        log.push(ObservedBeacon::new(derive_rpi(&k.tek, i).unwrap(), i, 10.0, 900.0).unwrap());
        let after = key_ids(&match_exposures(&keys, &log, &policy));
        prop_assert!(before.is_subset(&after));
        prop_assert!(after.contains(&(k.tek.key_hex(), k.tek.day_start())));
    }

    #[test]
    fn score_monotone_in_match_set(seed in any::<u64>(), mask in any::<u64>()) {
        let (keys, log) = instance(seed, 30, 1500);
        let policy = ExposurePolicy::default();
        let all = match_exposures(&keys, &log, &policy);
        let subset: Vec<ExposureMatch> = all.iter().enumerate().filter(|(i, _)| mask >> (i % 64) & 1 == 1).map(|(_, m)| m.clone()).collect();
        prop_assert!(score_risk(&subset, &policy) <= score_risk(&all, &policy));
    }

    #[test]
    fn weight_scaling(seeds in prop::collection::vec(any::<u64>(), 2..6), c in 0.01..100.0f64) {
        let policy = ExposurePolicy::default();
        let scaled = ExposurePolicy {
            weight_confirmed: policy.weight_confirmed * c,
            weight_probable: policy.weight_probable * c,
            ..policy
        };
        let mut base = Vec::new();
        let mut up = Vec::new();
        for s in &seeds {
            let (keys, log) = instance(*s, 10, 400);
            let m = match_exposures(&keys, &log, &policy);
            let a = score_risk(&m, &policy).value();
            let b = score_risk(&match_exposures(&keys, &log, &scaled), &scaled).value();
            prop_assert!((b - a * c).abs() <= 1e-9 * (a * c).abs().max(1.0));
            base.push(a);
            up.push(b);
        }
        for i in 0..base.len() {
            for j in 0..base.len() {
                if base[i] < base[j] {
                    prop_assert!(up[i] < up[j]);
                }
            }
        }
    }

    #[test]
    fn identical_inputs_identical_output(material in any::<[u8; 16]>(), day in 0u32..40_000, slot in 0u32..96) {
        let tek = TemporaryExposureKey::for_day(material, IntervalNumber::from_day_index(day)).unwrap();
        let i = IntervalNumber(tek.day_start().value() + slot);
        prop_assert_eq!(derive_rpi(&tek, i).unwrap(), derive_rpi(&tek, i).unwrap());
        prop_assert_eq!(derive_rpi(&tek, i).unwrap().0, oracle_rpi(&material, i.value()));
    }
}
