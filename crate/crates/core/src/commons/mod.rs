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

//! The federated diagnosis-key commons.
//!
//! An instance keeps a registry of public health authorities, issues
//! one-time upload authorizations on their behalf, stores uploaded keys in
//! an append-only log and replicates them to other instances, either by
//! pushing to the instances an authorization was tagged with or by letting
//! peers pull through cursor-based subscriptions.

mod auth;
mod export;
mod instance;
mod journal;
mod ota;
mod store;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auth::{
    digest_issue_ota, digest_register_pha, digest_subscribe, digest_upload_status, verify, AdminAuth, PhaAuth,
    RequestSignature, SigningCredential,
};
pub use export::{parse_export, write_export, EXPORT_HEADER};
pub use instance::{
    Clock, CommonsBuilder, CommonsInstance, CommonsPeer, ForwardOutcome, ManualClock,
    PendingForward, Subscription, SystemClock, UploadReceipt,
};
pub use ota::{DayRange, IssueOtaRequest, OneTimeAuthorization, OtaToken, UploadStatus};
pub use store::{DownloadBatch, DownloadFilter, KeyStoreRecord, PublishedKey, ReplicatedKey};

use crate::protocol::PhaId;

/// Identifier of a commons instance.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InstanceId(pub String);

impl InstanceId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for InstanceId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// Identifiers and tags: 1 to 64 characters from `[A-Za-z0-9._:-]`.
/// Keeps them safe inside the comma/semicolon export format.
pub fn valid_identifier(s: &str) -> bool {
    (1..=64).contains(&s.len())
        && s
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || matches!(b, b'.' | b'_' | b':' | b'-'))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaRecord {
    pub pha_id: PhaId,
    /// Ed25519 verification key.
    #[serde(with = "hex_bytes")]
    pub public_key: Vec<u8>,
    pub display_name: String,
    #[serde(default)]
    pub region_tags: BTreeSet<String>,
}

impl PhaRecord {
    pub fn new(pha_id: impl Into<String>, public_key: Vec<u8>, display_name: impl Into<String>) -> Self {
        Self {
            pha_id: PhaId::new(pha_id),
            public_key,
            display_name: display_name.into(),
            region_tags: BTreeSet::new(),
        }
    }
}

mod hex_bytes {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(b))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        let s = String::deserialize(d)?;
        hex::decode(s).map_err(serde::de::Error::custom)
    }
}

/// Wire status codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
#[repr(u8)]
pub enum StatusCode {
    Ok = 0,
    AuthFailure = 1,
    UnknownToken = 2,
    TokenUsed = 3,
    TokenExpired = 4,
    RangeViolation = 5,
    Transport = 6,
}

impl StatusCode {
    pub fn code(self) -> u8 {
        self as u8
    }
}

impl From<StatusCode> for u8 {
    fn from(s: StatusCode) -> u8 {
        s as u8
    }
}

impl TryFrom<u8> for StatusCode {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Ok(match v {
            0 => StatusCode::Ok,
            1 => StatusCode::AuthFailure,
            2 => StatusCode::UnknownToken,
            3 => StatusCode::TokenUsed,
            4 => StatusCode::TokenExpired,
            5 => StatusCode::RangeViolation,
            6 => StatusCode::Transport,
            other => return Err(format!("unknown status code {other}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommonsError {
    #[error("authentication failed: {0}")]
    Auth(String),
    #[error("PHA {0} already registered")]
    DuplicatePha(PhaId),
    #[error("unknown token")]
    UnknownToken,
    #[error("token already used")]
    TokenUsed,
    #[error("token expired")]
    TokenExpired,
    #[error("range violation: {0}")]
    RangeViolation(String),
    #[error("malformed request: {0}")]
    Malformed(String),
    #[error("unknown subscription {0}")]
    UnknownSubscription(u64),
    #[error("unknown peer instance {0}")]
    UnknownPeer(InstanceId),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("storage failure: {0}")]
    Storage(String),
}

impl CommonsError {
    pub fn status(&self) -> StatusCode {
        match self {
            CommonsError::Auth(_) | CommonsError::DuplicatePha(_) => StatusCode::AuthFailure,
            CommonsError::UnknownToken => StatusCode::UnknownToken,
            CommonsError::TokenUsed => StatusCode::TokenUsed,
            CommonsError::TokenExpired => StatusCode::TokenExpired,
            CommonsError::RangeViolation(_)
            | CommonsError::Malformed(_)
            | CommonsError::UnknownSubscription(_) => StatusCode::RangeViolation,
            CommonsError::UnknownPeer(_) | CommonsError::Transport(_) | CommonsError::Storage(_) => {
                StatusCode::Transport
            }
        }
    }

    /// Rebuilds an error from a wire status and message.
    pub fn from_status(status: StatusCode, message: String) -> Self {
        match status {
            StatusCode::Ok | StatusCode::Transport => CommonsError::Transport(message),
            StatusCode::AuthFailure => CommonsError::Auth(message),
            StatusCode::UnknownToken => CommonsError::UnknownToken,
            StatusCode::TokenUsed => CommonsError::TokenUsed,
            StatusCode::TokenExpired => CommonsError::TokenExpired,
            StatusCode::RangeViolation => CommonsError::RangeViolation(message),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identifiers() {
        assert!(valid_identifier("pha-king.county:1"));
        assert!(!valid_identifier(""));
        assert!(!valid_identifier("a,b"));
        assert!(!valid_identifier("a;b"));
        assert!(!valid_identifier(&"x".repeat(65)));
    }

    #[test]
    fn status_codes_stable() {
        let codes: Vec<u8> = [
            CommonsError::Auth(String::new()),
            CommonsError::UnknownToken,
            CommonsError::TokenUsed,
            CommonsError::TokenExpired,
            CommonsError::RangeViolation(String::new()),
            CommonsError::Transport(String::new()),
        ]
        .iter()
        .map(|e| e.status().code())
        .collect();
        assert_eq!(codes, vec![1, 2, 3, 4, 5, 6]);
        for c in 0..=6u8 {
            assert_eq!(StatusCode::try_from(c).unwrap().code(), c);
        }
        assert!(StatusCode::try_from(7).is_err());
    }
}
