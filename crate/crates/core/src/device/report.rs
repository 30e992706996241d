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

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::protocol::{ExposureMatch, ExposurePolicy, IntervalNumber};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRisk {
    pub day_start: IntervalNumber,
    pub match_count: u32,
    pub weighted_risk: f64,
}

/// What an active lighthouse tells its PHA: counts and risk per day, and
/// nothing that could be matched back to an identifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateRiskReport {
    #[serde(rename = "pseudonym")]
    pub device_pseudonym: String,
    #[serde(rename = "policy_digest_hex", with = "digest_hex")]
    pub policy_digest: [u8; 32],
    pub per_day: Vec<DayRisk>,
}

impl AggregateRiskReport {
    pub fn from_matches(pseudonym: String, matches: &[ExposureMatch], policy: &ExposurePolicy) -> Self {
        let mut days: BTreeMap<IntervalNumber, DayRisk> = BTreeMap::new();
        for m in matches {
            let day = m.key.tek.day_start();
            let e = days.entry(day).or_insert(DayRisk {
                day_start: day,
                match_count: 0,
                weighted_risk: 0.0,
            });
            e.match_count += 1;
            e.weighted_risk += m.total_duration_s * policy.weight(m.key.report_type);
        }
        Self {
            device_pseudonym: pseudonym,
            policy_digest: policy.digest(),
            per_day: days.into_values().collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn total_risk(&self) -> f64 {
        self.per_day.iter().map(|d| d.weighted_risk).sum()
    }
}

mod digest_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8; 32], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[u8; 32], D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(&s)
            .map_err(serde::de::Error::custom)?
            .try_into()
            .map_err(|_| serde::de::Error::custom("digest must be 32 bytes"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::{DiagnosisKey, ReportType, TemporaryExposureKey};

    #[test]
    fn groups_by_key_day() {
        let policy = ExposurePolicy::default();
        let m = |b: u8, day: u32, t: ReportType| {
            let mut key = DiagnosisKey::confirmed(
                TemporaryExposureKey::for_day([b; 16], IntervalNumber::from_day_index(day)).unwrap(),
            );
            key.report_type = t;
            ExposureMatch {
                key,
                matched_intervals: vec![IntervalNumber::from_day_index(day)],
                total_duration_s: 900.0,
                min_attenuation_db: 30.0,
            }
        };
        let r = AggregateRiskReport::from_matches(
            "lh-7".into(),
            &[m(1, 3, ReportType::Confirmed), m(2, 3, ReportType::Probable), m(3, 1, ReportType::Confirmed)],
            &policy,
        );
        assert_eq!(
            r.per_day,
            vec![
                DayRisk { day_start: IntervalNumber(96), match_count: 1, weighted_risk: 900.0 },
                DayRisk { day_start: IntervalNumber(288), match_count: 2, weighted_risk: 1350.0 },
            ]
        );
        let json = r.to_json();
        let v: serde_json::Value = serde_json::from_str(&json).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, vec!["per_day", "policy_digest_hex", "pseudonym"]);
        assert_eq!(serde_json::from_str::<AggregateRiskReport>(&json).unwrap(), r);
    }
}
