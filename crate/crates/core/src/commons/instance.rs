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

//! A single commons instance.
//!
//! All state transitions (registrations, issuance, uploads, replication,
//! cursor moves) go through one write lock, so the journal order is the
//! store order and a token can be consumed by at most one upload. Downloads
//! take the read lock. Calls to peers never happen while a lock is held.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use parking_lot::{Mutex, RwLock};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::auth::{self, AdminAuth, PhaAuth};
use super::journal::{Journal, JournalEntry};
use super::ota::{IssueOtaRequest, OneTimeAuthorization, OtaToken, UploadStatus};
use super::store::{DownloadBatch, DownloadFilter, KeyStore, KeyStoreRecord, ReplicatedKey};
use super::{valid_identifier, CommonsError, InstanceId, PhaRecord};
use crate::protocol::{
    DiagnosisKey, IntervalNumber, PhaId, TemporaryExposureKey, INTERVALS_PER_DAY,
};

pub trait Clock: Send + Sync {
    fn now(&self) -> IntervalNumber;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> IntervalNumber {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        IntervalNumber::from_unix_seconds(secs)
    }
}

/// Settable clock for simulation and tests.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU32);

impl ManualClock {
    pub fn new(start: IntervalNumber) -> Self {
        Self(AtomicU32::new(start.value()))
    }

    pub fn set(&self, now: IntervalNumber) {
        self.0.store(now.value(), Ordering::SeqCst);
    }

    pub fn advance(&self, intervals: u32) {
        self.0.fetch_add(intervals, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now(&self) -> IntervalNumber {
        IntervalNumber(self.0.load(Ordering::SeqCst))
    }
}

/// The two federation calls one instance makes on another.
pub trait CommonsPeer: Send + Sync {
    fn forward_keys(&self, keys: &[ReplicatedKey]) -> Result<usize, CommonsError>;

    fn download_keys(
        &self,
        filter: &DownloadFilter,
        cursor: u64,
        limit: Option<usize>,
    ) -> Result<DownloadBatch, CommonsError>;
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subscription {
    pub id: u64,
    pub remote_instance: InstanceId,
    pub filter: DownloadFilter,
    /// Highest remote sequence number already pulled. Never decreases.
    pub cursor: u64,
}

/// A push that failed and awaits [`CommonsInstance::retry_pending_forwards`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingForward {
    pub remote: InstanceId,
    pub keys: Vec<ReplicatedKey>,
    pub last_error: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForwardOutcome {
    pub remote: InstanceId,
    /// Keys the remote accepted, or the failure message.
    pub result: Result<usize, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UploadReceipt {
    pub token: OtaToken,
    pub received_at: IntervalNumber,
    pub appended: usize,
    /// Keys already present in the store (same material and day).
    pub duplicates: usize,
    pub forwarded: Vec<ForwardOutcome>,
}

const PULL_PAGE: usize = 1000;

#[derive(Debug, Default)]
struct State {
    phas: BTreeMap<PhaId, PhaRecord>,
    otas: HashMap<OtaToken, OneTimeAuthorization>,
    store: KeyStore,
    subscriptions: BTreeMap<u64, Subscription>,
    pending: Vec<PendingForward>,
    journal: Option<Journal>,
}

impl State {
    fn commit(&mut self, entry: JournalEntry) -> Result<(), CommonsError> {
        if let Some(j) = self.journal.as_mut() {
            j.append(&entry)?;
        }
        self.apply(entry)
    }

    fn apply(&mut self, entry: JournalEntry) -> Result<(), CommonsError> {
        match entry {
            JournalEntry::Pha(r) => {
                self.phas.insert(r.pha_id.clone(), r);
            }
            JournalEntry::Ota(o) => {
                self.otas.insert(o.token, o);
            }
            JournalEntry::Upload { token, at, records } => {
                let ota = self
                    .otas
                    .get_mut(&token)
                    .ok_or_else(|| CommonsError::Storage(format!("upload for unknown token {token}")))?;
                ota.used_at = Some(at);
                for r in records {
                    self.store.restore(r).map_err(CommonsError::Storage)?;
                }
            }
            JournalEntry::Replicated { records } => {
                for r in records {
                    self.store.restore(r).map_err(CommonsError::Storage)?;
                }
            }
            JournalEntry::Subscription(s) => {
                self.subscriptions.insert(s.id, s);
            }
            JournalEntry::Cursor { id, cursor } => {
                let s = self
                    .subscriptions
                    .get_mut(&id)
                    .ok_or(CommonsError::UnknownSubscription(id))?;
                s.cursor = s.cursor.max(cursor);
            }
        }
        Ok(())
    }

    /// Records that would be appended for `keys`, skipping ones already
    /// stored or repeated within the batch.
    fn plan_append(
        &self,
        keys: impl IntoIterator<Item = ReplicatedKey>,
        received_at: IntervalNumber,
    ) -> (Vec<KeyStoreRecord>, usize) {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        let mut dups = 0;
        let mut seq = self.store.next_seq();
        for k in keys {
            let dk = k.diagnosis_key.tek.dedup_key();
            if self.store.contains(&k.diagnosis_key) || !seen.insert(dk) {
                dups += 1;
                continue;
            }
            out.push(KeyStoreRecord {
                seq,
                diagnosis_key: k.diagnosis_key,
                ota_token: k.ota_token,
                received_at,
                origin_instance: k.origin_instance,
            });
            seq += 1;
        }
        (out, dups)
    }

    fn authenticate(&self, auth: &PhaAuth, digest: &[u8; 32]) -> Result<&PhaRecord, CommonsError> {
        let rec = self
            .phas
            .get(&auth.pha_id)
            .ok_or_else(|| CommonsError::Auth(format!("unknown PHA {}", auth.pha_id)))?;
        if !auth::verify(&rec.public_key, digest, &auth.signature) {
            return Err(CommonsError::Auth(format!("bad signature for PHA {}", auth.pha_id)));
        }
        Ok(rec)
    }
}

pub struct CommonsBuilder {
    id: InstanceId,
    admin_key: Vec<u8>,
    clock: Arc<dyn Clock>,
    seed: Option<u64>,
    journal: Option<PathBuf>,
}

impl CommonsBuilder {
    pub fn clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Deterministic token generation.
    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Persist to (and recover from) an append-only journal at `path`.
    pub fn journal(mut self, path: impl AsRef<Path>) -> Self {
        self.journal = Some(path.as_ref().to_path_buf());
        self
    }

    pub fn build(self) -> Result<CommonsInstance, CommonsError> {
        if !valid_identifier(self.id.as_str()) {
            return Err(CommonsError::Malformed(format!("invalid instance id {:?}", self.id.0)));
        }
        if !auth::valid_public_key(&self.admin_key) {
            return Err(CommonsError::Malformed("invalid admin public key".into()));
        }
        let mut state = State::default();
        if let Some(path) = &self.journal {
            let (journal, entries) = Journal::open(path)?;
            for e in entries {
                state.apply(e)?;
            }
            state.journal = Some(journal);
        }
        let rng = match self.seed {
            Some(s) => ChaCha20Rng::seed_from_u64(s),
            None => ChaCha20Rng::from_os_rng(),
        };
        Ok(CommonsInstance {
            id: self.id,
            admin_key: self.admin_key,
            clock: self.clock,
            rng: Mutex::new(rng),
            state: RwLock::new(state),
            peers: RwLock::new(BTreeMap::new()),
        })
    }
}

pub struct CommonsInstance {
    id: InstanceId,
    admin_key: Vec<u8>,
    clock: Arc<dyn Clock>,
    rng: Mutex<ChaCha20Rng>,
    state: RwLock<State>,
    peers: RwLock<BTreeMap<InstanceId, Arc<dyn CommonsPeer>>>,
}

impl std::fmt::Debug for CommonsInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommonsInstance")
            .field("id", &self.id)
            .field("records", &self.state.read().store.records().len())
            .finish_non_exhaustive()
    }
}

impl CommonsInstance {
    pub fn builder(id: impl Into<InstanceId>, admin_public_key: Vec<u8>) -> CommonsBuilder {
        CommonsBuilder {
            id: id.into(),
            admin_key: admin_public_key,
            clock: Arc::new(SystemClock),
            seed: None,
            journal: None,
        }
    }

    pub fn id(&self) -> &InstanceId {
        &self.id
    }

    pub fn now(&self) -> IntervalNumber {
        self.clock.now()
    }

    pub fn register_pha(&self, record: PhaRecord, admin: &AdminAuth) -> Result<PhaId, CommonsError> {
        if !auth::verify(&self.admin_key, &auth::digest_register_pha(&record), &admin.signature) {
            return Err(CommonsError::Auth("bad admin credential".into()));
        }
        if !valid_identifier(record.pha_id.as_str()) {
            return Err(CommonsError::Malformed(format!("invalid pha_id {:?}", record.pha_id.0)));
        }
        if !auth::valid_public_key(&record.public_key) {
            return Err(CommonsError::Malformed("invalid PHA public key".into()));
        }
        if let Some(t) = record.region_tags.iter().find(|t| !valid_identifier(t)) {
            return Err(CommonsError::Malformed(format!("invalid region tag {t:?}")));
        }
        let mut st = self.state.write();
        if st.phas.contains_key(&record.pha_id) {
            return Err(CommonsError::DuplicatePha(record.pha_id));
        }
        let id = record.pha_id.clone();
        st.commit(JournalEntry::Pha(record))?;
        Ok(id)
    }

    pub fn phas(&self) -> Vec<PhaRecord> {
        self.state.read().phas.values().cloned().collect()
    }

    pub fn issue_ota(
        &self,
        auth: &PhaAuth,
        req: &IssueOtaRequest,
    ) -> Result<OneTimeAuthorization, CommonsError> {
        if let Some(t) = req
            .forward_tags
            .iter()
            .map(InstanceId::as_str)
            .chain(req.region_tags.iter().map(String::as_str))
            .find(|t| !valid_identifier(t))
        {
            return Err(CommonsError::Malformed(format!("invalid tag {t:?}")));
        }
        let now = self.clock.now();
        let expiry = req
            .ttl_days
            .checked_mul(INTERVALS_PER_DAY)
            .and_then(|d| now.checked_add(d))
            .ok_or_else(|| CommonsError::RangeViolation("ttl too large".into()))?;

        let mut st = self.state.write();
        st.authenticate(auth, &auth::digest_issue_ota(&auth.pha_id, req))?;
        let token = loop {
            let mut t = [0u8; 16];
            self.rng.lock().fill_bytes(&mut t);
            let t = OtaToken(t);
            if !st.otas.contains_key(&t) {
                break t;
            }
        };
        let ota = OneTimeAuthorization {
            token,
            issuer: auth.pha_id.clone(),
            report_type: req.report_type,
            authorized_days: req.authorized_days,
            forward_tags: req.forward_tags.clone(),
            region_tags: req.region_tags.clone(),
            issued_at: now,
            expiry,
            used_at: None,
        };
        st.commit(JournalEntry::Ota(ota.clone()))?;
        Ok(ota)
    }

    /// Consumes `token` and appends one record per key, or changes nothing.
    /// Pushes the new records to the authorization's forward tags afterwards.
    pub fn upload_keys(
        &self,
        token: &OtaToken,
        teks: &[TemporaryExposureKey],
    ) -> Result<UploadReceipt, CommonsError> {
        let now = self.clock.now();
        let (records, duplicates, forward_tags) = {
            let mut st = self.state.write();
            let ota = st.otas.get(token).ok_or(CommonsError::UnknownToken)?;
            if ota.used() {
                return Err(CommonsError::TokenUsed);
            }
            if ota.expired_at(now) {
                return Err(CommonsError::TokenExpired);
            }
            if teks.is_empty() {
                return Err(CommonsError::RangeViolation("upload contains no keys".into()));
            }
            if let Some(t) = teks.iter().find(|t| !ota.authorized_days.contains_day(t.day_start())) {
                return Err(CommonsError::RangeViolation(format!(
                    "key for day {} outside authorized days {}..={}",
                    t.day_start(),
                    ota.authorized_days.first(),
                    ota.authorized_days.last()
                )));
            }
            let keys = teks.iter().map(|tek| ReplicatedKey {
                diagnosis_key: DiagnosisKey {
                    tek: *tek,
                    report_type: ota.report_type,
                    pha_id: Some(ota.issuer.clone()),
                    region_tags: ota.region_tags.clone(),
                    upload_time: now,
                },
                ota_token: Some(*token),
                origin_instance: self.id.clone(),
            });
            let forward_tags = ota.forward_tags.clone();
            let (records, duplicates) = st.plan_append(keys, now);
            st.commit(JournalEntry::Upload {
                token: *token,
                at: now,
                records: records.clone(),
            })?;
            (records, duplicates, forward_tags)
        };

        let keys: Vec<ReplicatedKey> = records.iter().map(KeyStoreRecord::replicated).collect();
        let forwarded = forward_tags
            .into_iter()
            .map(|remote| {
                let result = self.forward_keys(&remote, &keys).map_err(|e| e.to_string());
                ForwardOutcome { remote, result }
            })
            .collect();
        Ok(UploadReceipt {
            token: *token,
            received_at: now,
            appended: records.len(),
            duplicates,
            forwarded,
        })
    }

    pub fn check_upload_status(
        &self,
        auth: &PhaAuth,
        token: &OtaToken,
    ) -> Result<UploadStatus, CommonsError> {
        let st = self.state.read();
        st.authenticate(auth, &auth::digest_upload_status(&auth.pha_id, token))?;
        let ota = st.otas.get(token).ok_or(CommonsError::UnknownToken)?;
        if ota.issuer != auth.pha_id {
            return Err(CommonsError::Auth("only the issuing PHA may query this token".into()));
        }
        Ok(match ota.used_at {
            Some(at) => UploadStatus::Fulfilled(at),
            None => UploadStatus::Pending,
        })
    }

    /// Public endpoint: records with sequence above `cursor` that pass
    /// `filter`, in store order, at most `limit` of them.
    pub fn download_keys(&self, filter: &DownloadFilter, cursor: u64, limit: Option<usize>) -> DownloadBatch {
        self.state.read().store.download(filter, cursor, limit)
    }

    /// Receiving side of push replication. Appends unseen keys, preserving
    /// their provenance, and returns how many were new.
    pub fn accept_forwarded(&self, keys: &[ReplicatedKey]) -> Result<usize, CommonsError> {
        let now = self.clock.now();
        let mut st = self.state.write();
        for k in keys {
            if !valid_identifier(k.origin_instance.as_str()) {
                return Err(CommonsError::Malformed("invalid origin instance".into()));
            }
            // Locally-originated keys must name a locally-registered PHA;
            // foreign provenance was checked at its origin.
            if k.origin_instance == self.id {
                let known = k.diagnosis_key.pha_id.as_ref().is_some_and(|p| st.phas.contains_key(p));
                if !known {
                    return Err(CommonsError::Auth("local-origin key without registered PHA".into()));
                }
            }
        }
        let (records, _) = st.plan_append(keys.iter().cloned(), now);
        let n = records.len();
        if n > 0 {
            st.commit(JournalEntry::Replicated { records })?;
        }
        Ok(n)
    }

    pub fn add_peer(&self, id: impl Into<InstanceId>, peer: Arc<dyn CommonsPeer>) {
        self.peers.write().insert(id.into(), peer);
    }

    fn peer(&self, id: &InstanceId) -> Result<Arc<dyn CommonsPeer>, CommonsError> {
        self.peers
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| CommonsError::UnknownPeer(id.clone()))
    }

    /// Sending side of push replication. Failures are queued for retry.
    pub fn forward_keys(&self, remote: &InstanceId, keys: &[ReplicatedKey]) -> Result<usize, CommonsError> {
        let result = self.peer(remote).and_then(|p| p.forward_keys(keys));
        if let Err(e) = &result {
            self.state.write().pending.push(PendingForward {
                remote: remote.clone(),
                keys: keys.to_vec(),
                last_error: e.to_string(),
            });
        }
        result
    }

    pub fn pending_forwards(&self) -> Vec<PendingForward> {
        self.state.read().pending.clone()
    }

    /// Retries queued pushes once each. Returns how many are still pending.
    pub fn retry_pending_forwards(&self) -> usize {
        let pending = std::mem::take(&mut self.state.write().pending);
        for p in pending {
            let _ = self.forward_keys(&p.remote, &p.keys);
        }
        self.state.read().pending.len()
    }

    pub fn subscribe(&self, remote: impl Into<InstanceId>, filter: DownloadFilter) -> Result<u64, CommonsError> {
        let remote = remote.into();
        let mut st = self.state.write();
        if let Some(s) = st
            .subscriptions
            .values()
            .find(|s| s.remote_instance == remote && s.filter == filter)
        {
            return Ok(s.id);
        }
        let id = st.subscriptions.keys().next_back().map_or(1, |k| k + 1);
        st.commit(JournalEntry::Subscription(Subscription {
            id,
            remote_instance: remote,
            filter,
            cursor: 0,
        }))?;
        Ok(id)
    }

    /// [`Self::subscribe`] for remote callers holding the admin credential.
    pub fn subscribe_authorized(
        &self,
        admin: &AdminAuth,
        remote: InstanceId,
        filter: DownloadFilter,
    ) -> Result<u64, CommonsError> {
        if !auth::verify(&self.admin_key, &auth::digest_subscribe(&remote, &filter), &admin.signature) {
            return Err(CommonsError::Auth("bad admin credential".into()));
        }
        self.subscribe(remote, filter)
    }

    pub fn subscriptions(&self) -> Vec<Subscription> {
        self.state.read().subscriptions.values().cloned().collect()
    }

    /// Pulls everything new from the subscribed remote, page by page. A
    /// transport failure leaves the cursor at the last committed page.
    pub fn run_subscription(&self, id: u64) -> Result<usize, CommonsError> {
        let sub = self
            .state
            .read()
            .subscriptions
            .get(&id)
            .cloned()
            .ok_or(CommonsError::UnknownSubscription(id))?;
        let peer = self.peer(&sub.remote_instance)?;
        let mut cursor = sub.cursor;
        let mut pulled = 0;
        loop {
            let batch = peer.download_keys(&sub.filter, cursor, Some(PULL_PAGE))?;
            if batch.keys.is_empty() || batch.next_cursor <= cursor {
                break;
            }
            let now = self.clock.now();
            let mut st = self.state.write();
            let (records, _) = st.plan_append(batch.keys.iter().map(|k| k.replicated()), now);
            pulled += records.len();
            if !records.is_empty() {
                st.commit(JournalEntry::Replicated { records })?;
            }
            st.commit(JournalEntry::Cursor {
                id,
                cursor: batch.next_cursor,
            })?;
            cursor = batch.next_cursor;
        }
        Ok(pulled)
    }

    pub fn run_all_subscriptions(&self) -> Vec<(u64, Result<usize, CommonsError>)> {
        let ids: Vec<u64> = self.state.read().subscriptions.keys().copied().collect();
        ids.into_iter().map(|id| (id, self.run_subscription(id))).collect()
    }

    pub fn records(&self) -> Vec<KeyStoreRecord> {
        self.state.read().store.records().to_vec()
    }

    pub fn ota(&self, token: &OtaToken) -> Option<OneTimeAuthorization> {
        self.state.read().otas.get(token).cloned()
    }

    /// Deduplicated key set with provenance, independent of local sequence
    /// numbers and arrival times. Equal across converged instances.
    pub fn key_set(&self) -> BTreeSet<(String, IntervalNumber, String, Option<PhaId>, Vec<String>, InstanceId)> {
        self.state
            .read()
            .store
            .records()
            .iter()
            .map(|r| {
                let dk = &r.diagnosis_key;
                (
                    dk.tek.key_hex(),
                    dk.tek.day_start(),
                    dk.report_type.to_string(),
                    dk.pha_id.clone(),
                    dk.region_tags.iter().cloned().collect(),
                    r.origin_instance.clone(),
                )
            })
            .collect()
    }

    /// Every piece of persisted state, serialized. Used for privacy scans.
    pub fn serialized_state(&self) -> String {
        let st = self.state.read();
        let mut otas: Vec<&OneTimeAuthorization> = st.otas.values().collect();
        otas.sort_by_key(|o| o.token);
        serde_json::json!({
            "instance": self.id,
            "phas": st.phas.values().collect::<Vec<_>>(),
            "otas": otas,
            "records": st.store.records(),
            "subscriptions": st.subscriptions.values().collect::<Vec<_>>(),
        })
        .to_string()
    }
}

impl CommonsPeer for CommonsInstance {
    fn forward_keys(&self, keys: &[ReplicatedKey]) -> Result<usize, CommonsError> {
        self.accept_forwarded(keys)
    }

    fn download_keys(
        &self,
        filter: &DownloadFilter,
        cursor: u64,
        limit: Option<usize>,
    ) -> Result<DownloadBatch, CommonsError> {
        Ok(CommonsInstance::download_keys(self, filter, cursor, limit))
    }
}
