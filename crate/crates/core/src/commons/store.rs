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

//! Append-only diagnosis-key store.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::ota::OtaToken;
use super::InstanceId;
use crate::protocol::{DiagnosisKey, IntervalNumber, PhaId, ReportType, KEY_LEN};

/// One stored key. The field set is closed: there is nowhere to put a
/// name, a location, a test result or a device log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyStoreRecord {
    pub seq: u64,
    pub diagnosis_key: DiagnosisKey,
    /// Present when the key arrived by upload or push forwarding.
    pub ota_token: Option<OtaToken>,
    pub received_at: IntervalNumber,
    pub origin_instance: InstanceId,
}

impl KeyStoreRecord {
    pub fn replicated(&self) -> ReplicatedKey {
        ReplicatedKey {
            diagnosis_key: self.diagnosis_key.clone(),
            ota_token: self.ota_token,
            origin_instance: self.origin_instance.clone(),
        }
    }

    pub fn published(&self) -> PublishedKey {
        PublishedKey {
            seq: self.seq,
            diagnosis_key: self.diagnosis_key.clone(),
            origin_instance: self.origin_instance.clone(),
        }
    }
}

/// Unit of push replication between instances.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicatedKey {
    pub diagnosis_key: DiagnosisKey,
    pub ota_token: Option<OtaToken>,
    pub origin_instance: InstanceId,
}

/// What the public download endpoint returns for each key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedKey {
    pub seq: u64,
    pub diagnosis_key: DiagnosisKey,
    pub origin_instance: InstanceId,
}

impl PublishedKey {
    pub fn replicated(&self) -> ReplicatedKey {
        ReplicatedKey {
            diagnosis_key: self.diagnosis_key.clone(),
            ota_token: None,
            origin_instance: self.origin_instance.clone(),
        }
    }
}

/// Download scoping. An absent field places no constraint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DownloadFilter {
    /// Keeps keys whose period reaches `since` or later.
    #[serde(default)]
    pub since: Option<IntervalNumber>,
    #[serde(default)]
    pub pha_ids: Option<BTreeSet<PhaId>>,
    /// Keeps keys sharing at least one tag with this set.
    #[serde(default)]
    pub region_tags: Option<BTreeSet<String>>,
    #[serde(default)]
    pub report_types: Option<BTreeSet<ReportType>>,
}

impl DownloadFilter {
    pub fn any() -> Self {
        Self::default()
    }

    pub fn pha(mut self, id: impl Into<String>) -> Self {
        self.pha_ids
            .get_or_insert_with(BTreeSet::new)
            .insert(PhaId::new(id));
        self
    }

    pub fn region(mut self, tag: impl Into<String>) -> Self {
        self.region_tags
            .get_or_insert_with(BTreeSet::new)
            .insert(tag.into());
        self
    }

    pub fn report_type(mut self, t: ReportType) -> Self {
        self.report_types.get_or_insert_with(BTreeSet::new).insert(t);
        self
    }

    pub fn since(mut self, since: IntervalNumber) -> Self {
        self.since = Some(since);
        self
    }

    pub fn matches(&self, key: &DiagnosisKey) -> bool {
        if let Some(since) = self.since {
            let end = key.tek.day_start().value() + key.tek.rolling_period();
            if end <= since.value() {
                return false;
            }
        }
        if let Some(ids) = &self.pha_ids {
            if !key.pha_id.as_ref().is_some_and(|p| ids.contains(p)) {
                return false;
            }
        }
        if let Some(tags) = &self.region_tags {
            if key.region_tags.is_disjoint(tags) {
                return false;
            }
        }
        if let Some(types) = &self.report_types {
            if !types.contains(&key.report_type) {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DownloadBatch {
    pub keys: Vec<PublishedKey>,
    pub next_cursor: u64,
}

pub(crate) type DedupKey = ([u8; KEY_LEN], IntervalNumber);

/// Sequence numbers start at 1 so cursor 0 means "from the beginning".
#[derive(Debug, Default)]
pub(crate) struct KeyStore {
    records: Vec<KeyStoreRecord>,
    seen: HashSet<DedupKey>,
}

impl KeyStore {
    pub(crate) fn contains(&self, key: &DiagnosisKey) -> bool {
        self.seen.contains(&key.tek.dedup_key())
    }

    pub(crate) fn next_seq(&self) -> u64 {
        self.records.len() as u64 + 1
    }

    /// Appends unless the key is already present. Returns the new record.
    #[cfg(test)]
    pub(crate) fn append(
        &mut self,
        key: ReplicatedKey,
        received_at: IntervalNumber,
    ) -> Option<&KeyStoreRecord> {
        if !self.seen.insert(key.diagnosis_key.tek.dedup_key()) {
            return None;
        }
        let seq = self.next_seq();
        self.records.push(KeyStoreRecord {
            seq,
            diagnosis_key: key.diagnosis_key,
            ota_token: key.ota_token,
            received_at,
            origin_instance: key.origin_instance,
        });
        self.records.last()
    }

    /// Replays a journaled record. Refuses gaps in the sequence.
    pub(crate) fn restore(&mut self, record: KeyStoreRecord) -> Result<(), String> {
        if record.seq != self.next_seq() {
            return Err(format!(
                "journal sequence gap: expected {}, found {}",
                self.next_seq(),
                record.seq
            ));
        }
        if !self.seen.insert(record.diagnosis_key.tek.dedup_key()) {
            return Err(format!("journal duplicate key at seq {}", record.seq));
        }
        self.records.push(record);
        Ok(())
    }

    pub(crate) fn records(&self) -> &[KeyStoreRecord] {
        &self.records
    }

    pub(crate) fn download(
        &self,
        filter: &DownloadFilter,
        cursor: u64,
        limit: Option<usize>,
    ) -> DownloadBatch {
        // seq == index + 1, so everything after `cursor` starts at index `cursor`.
        let start = usize::try_from(cursor).unwrap_or(usize::MAX).min(self.records.len());
        let keys: Vec<PublishedKey> = self.records[start..]
            .iter()
            .filter(|r| filter.matches(&r.diagnosis_key))
            .take(limit.unwrap_or(usize::MAX))
            .map(KeyStoreRecord::published)
            .collect();
        let next_cursor = keys.last().map_or(cursor, |k| k.seq);
        DownloadBatch { keys, next_cursor }
    }
}
