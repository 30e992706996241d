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

//! Key export files.
//!
//! ```text
//! en-commons-export v1
//! tek_hex,day_start,report_type,pha_id,region_tags,origin_instance,seq
//! ```
//!
//! `pha_id` is empty when absent and `region_tags` is semicolon-joined in
//! sorted order. The format has no column for rolling period or upload
//! time: parsed keys are full-day keys with `upload_time = day_start`.

use std::fmt::Write as _;

use super::store::PublishedKey;
use super::{valid_identifier, CommonsError, InstanceId};
use crate::protocol::{parse_hex16, DiagnosisKey, IntervalNumber, PhaId, TemporaryExposureKey};

pub const EXPORT_HEADER: &str = "en-commons-export v1";

pub fn write_export(keys: &[PublishedKey]) -> String {
    let mut out = String::with_capacity(32 + keys.len() * 80);
    out.push_str(EXPORT_HEADER);
    out.push('\n');
    for k in keys {
        let dk = &k.diagnosis_key;
        let tags: Vec<&str> = dk.region_tags.iter().map(String::as_str).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            dk.tek.key_hex(),
            dk.tek.day_start(),
            dk.report_type,
            dk.pha_id.as_ref().map_or("", PhaId::as_str),
            tags.join(";"),
            k.origin_instance,
            k.seq
        );
    }
    out
}

fn bad(line: usize, reason: impl std::fmt::Display) -> CommonsError {
    CommonsError::Malformed(format!("export line {line}: {reason}"))
}

pub fn parse_export(text: &str) -> Result<Vec<PublishedKey>, CommonsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim_end_matches('\r') == EXPORT_HEADER => {}
        _ => return Err(CommonsError::Malformed(format!("missing {EXPORT_HEADER:?} header"))),
    }
    let mut out = Vec::new();
    for (idx, raw) in lines {
        let n = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let [tek, day, report, pha, tags, origin, seq] = f[..] else {
            return Err(bad(n, format!("expected 7 fields, found {}", f.len())));
        };
        let day_start = IntervalNumber(day.parse().map_err(|_| bad(n, "invalid day_start"))?);
        let tek = TemporaryExposureKey::for_day(parse_hex16(tek).map_err(|e| bad(n, e))?, day_start)
            .map_err(|e| bad(n, e))?;
        let pha_id = match pha {
            "" => None,
            p if valid_identifier(p) => Some(PhaId::new(p)),
            p => return Err(bad(n, format!("invalid pha_id {p:?}"))),
        };
        let region_tags = tags
            .split(';')
            .filter(|t| !t.is_empty())
            .map(|t| {
                valid_identifier(t)
                    .then(|| t.to_string())
                    .ok_or_else(|| bad(n, format!("invalid region tag {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if !valid_identifier(origin) {
            return Err(bad(n, format!("invalid origin_instance {origin:?}")));
        }
        out.push(PublishedKey {
            seq: seq.parse().map_err(|_| bad(n, "invalid seq"))?,
            diagnosis_key: DiagnosisKey {
                tek,
                report_type: report.parse().map_err(|e| bad(n, e))?,
                pha_id,
                region_tags,
                upload_time: day_start,
            },
            origin_instance: InstanceId::new(origin),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use proptest::prelude::*;

    use super::*;
    use crate::protocol::ReportType;

    fn published(b: u8) -> PublishedKey {
        PublishedKey {
            seq: 4,
            diagnosis_key: DiagnosisKey {
                tek: TemporaryExposureKey::for_day([b; 16], IntervalNumber(192)).unwrap(),
                report_type: ReportType::Probable,
                pha_id: Some(PhaId::new("pha-a")),
                region_tags: ["us-wa".to_string(), "us-or".to_string()].into(),
                upload_time: IntervalNumber(192),
            },
            origin_instance: InstanceId::new("commons-a"),
        }
    }

    #[test]
    fn exact_line_format() {
        let text = write_export(&[published(0xa5)]);
        assert_eq!(
            text,
            "en-commons-export v1\n\
             a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5a5,192,probable,pha-a,us-or;us-wa,commons-a,4\n"
        );
        assert_eq!(parse_export(&text).unwrap(), vec![published(0xa5)]);
    }

    #[test]
    fn empty_pha_and_tags() {
        let mut k = published(1);
        k.diagnosis_key.pha_id = None;
        k.diagnosis_key.region_tags.clear();
        let text = write_export(&[k.clone()]);
        assert!(text.contains(",probable,,,commons-a,4"));
        assert_eq!(parse_export(&text).unwrap(), vec![k]);
    }

    #[test]
    fn rejects_missing_header_and_bad_rows() {
        assert!(parse_export("").is_err());
        assert!(parse_export("tek,0\n").is_err());
        assert!(parse_export("en-commons-export v1\nzz,0,confirmed,,,a,1\n").is_err());
        assert!(parse_export("en-commons-export v1\n00000000000000000000000000000000,0,maybe,,,a,1\n").is_err());
        assert_eq!(parse_export("en-commons-export v1\n").unwrap(), vec![]);
    }

    proptest! {
        #[test]
        fn export_round_trips(
            material in prop::array::uniform16(any::<u8>()),
            day in 0u32..40_000,
            probable in any::<bool>(),
            tags in prop::collection::btree_set("[a-z0-9-]{1,8}", 0..4),
            pha in prop::option::of("[a-z0-9-]{1,8}"),
            seq in 1u64..1_000_000,
        ) {
            let ds = IntervalNumber::from_day_index(day);
            let k = PublishedKey {
                seq,
                diagnosis_key: DiagnosisKey {
                    tek: TemporaryExposureKey::for_day(material, ds).unwrap(),
                    report_type: if probable { ReportType::Probable } else { ReportType::Confirmed },
                    pha_id: pha.map(PhaId::new),
                    region_tags: tags.into_iter().collect::<BTreeSet<_>>(),
                    upload_time: ds,
                },
                origin_instance: InstanceId::new("x"),
            };
            prop_assert_eq!(parse_export(&write_export(&[k.clone()])).unwrap(), vec![k]);
        }
    }
}
