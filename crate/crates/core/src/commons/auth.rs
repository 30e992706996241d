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

//! Request signing for administrators and public health authorities.
//!
//! Every authenticated request is reduced to a canonical digest: SHA-256
//! over a method label followed by length-prefixed fields. The caller signs
//! that digest with Ed25519 and the instance verifies it against the
//! registered public key.

use std::fmt;

use ed25519_dalek::{Signature, Signer, SigningKey, Verifier, VerifyingKey};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ota::{IssueOtaRequest, OtaToken};
use super::store::DownloadFilter;
use super::{InstanceId, PhaRecord};
use crate::protocol::PhaId;

/// Private half of an Ed25519 credential.
#[derive(Clone)]
pub struct SigningCredential {
    key: SigningKey,
}

impl SigningCredential {
    pub fn from_seed(seed: [u8; 32]) -> Self {
        Self {
            key: SigningKey::from_bytes(&seed),
        }
    }

    pub fn generate<R: RngCore + CryptoRng + ?Sized>(rng: &mut R) -> Self {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Self::from_seed(seed)
    }

    pub fn seed(&self) -> [u8; 32] {
        self.key.to_bytes()
    }

    pub fn public_key(&self) -> Vec<u8> {
        self.key.verifying_key().to_bytes().to_vec()
    }

    pub fn sign(&self, digest: &[u8; 32]) -> RequestSignature {
        RequestSignature(self.key.sign(digest).to_bytes())
    }

    /// Signs an OTA issuance request on behalf of `pha_id`.
    pub fn authorize_issue(&self, pha_id: &PhaId, req: &IssueOtaRequest) -> PhaAuth {
        PhaAuth {
            pha_id: pha_id.clone(),
            signature: self.sign(&digest_issue_ota(pha_id, req)),
        }
    }

    pub fn authorize_status(&self, pha_id: &PhaId, token: &OtaToken) -> PhaAuth {
        PhaAuth {
            pha_id: pha_id.clone(),
            signature: self.sign(&digest_upload_status(pha_id, token)),
        }
    }

    pub fn authorize_register(&self, record: &PhaRecord) -> AdminAuth {
        AdminAuth {
            signature: self.sign(&digest_register_pha(record)),
        }
    }

    pub fn authorize_subscribe(&self, remote: &InstanceId, filter: &DownloadFilter) -> AdminAuth {
        AdminAuth {
            signature: self.sign(&digest_subscribe(remote, filter)),
        }
    }
}

impl fmt::Debug for SigningCredential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SigningCredential")
            .field("public_key", &hex::encode(self.public_key()))
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub struct RequestSignature(pub [u8; 64]);

impl fmt::Debug for RequestSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RequestSignature({})", hex::encode(self.0))
    }
}

impl Serialize for RequestSignature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(self.0))
    }
}

impl<'de> Deserialize<'de> for RequestSignature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let arr: [u8; 64] = bytes
            .try_into()
            .map_err(|_| serde::de::Error::custom("signature must be 64 bytes"))?;
        Ok(Self(arr))
    }
}

/// PHA identity plus a signature over the request digest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaAuth {
    pub pha_id: PhaId,
    pub signature: RequestSignature,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdminAuth {
    pub signature: RequestSignature,
}

/// Checks `signature` over `digest` against raw Ed25519 public key bytes.
pub fn verify(public_key: &[u8], digest: &[u8; 32], signature: &RequestSignature) -> bool {
    let Ok(bytes) = <[u8; 32]>::try_from(public_key) else {
        return false;
    };
    let Ok(vk) = VerifyingKey::from_bytes(&bytes) else {
        return false;
    };
    vk.verify(digest, &Signature::from_bytes(&signature.0)).is_ok()
}

pub fn valid_public_key(public_key: &[u8]) -> bool {
    <[u8; 32]>::try_from(public_key).is_ok_and(|b| VerifyingKey::from_bytes(&b).is_ok())
}

struct Canonical(Sha256);

impl Canonical {
    fn new(method: &str) -> Self {
        let mut c = Canonical(Sha256::new());
        c.field(b"en-commons-request-v1");
        c.field(method.as_bytes());
        c
    }

    fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.0.update((bytes.len() as u64).to_be_bytes());
        self.0.update(bytes);
        self
    }

    fn set<'a>(&mut self, items: impl IntoIterator<Item = &'a str>) -> &mut Self {
        let items: Vec<&str> = items.into_iter().collect();
        self.field(&(items.len() as u64).to_be_bytes());
        for i in items {
            self.field(i.as_bytes());
        }
        self
    }

    fn finish(self) -> [u8; 32] {
        self.0.finalize().into()
    }
}

pub fn digest_register_pha(record: &PhaRecord) -> [u8; 32] {
    let mut c = Canonical::new("register_pha");
    c.field(record.pha_id.as_str().as_bytes())
        .field(&record.public_key)
        .field(record.display_name.as_bytes())
        .set(record.region_tags.iter().map(String::as_str));
    c.finish()
}

pub fn digest_issue_ota(pha_id: &PhaId, req: &IssueOtaRequest) -> [u8; 32] {
    let mut c = Canonical::new("issue_ota");
    c.field(pha_id.as_str().as_bytes())
        .field(req.report_type.as_str().as_bytes())
        .field(&req.authorized_days.first().value().to_be_bytes())
        .field(&req.authorized_days.last().value().to_be_bytes())
        .set(req.forward_tags.iter().map(|t| t.as_str()))
        .set(req.region_tags.iter().map(String::as_str))
        .field(&req.ttl_days.to_be_bytes());
    c.finish()
}

/// The filter enters as its JSON form, which is canonical: struct fields
/// in declaration order and sets sorted.
pub fn digest_subscribe(remote: &InstanceId, filter: &DownloadFilter) -> [u8; 32] {
    let mut c = Canonical::new("subscribe");
    c.field(remote.as_str().as_bytes())
        .field(&serde_json::to_vec(filter).expect("filter serializes"));
    c.finish()
}

pub fn digest_upload_status(pha_id: &PhaId, token: &OtaToken) -> [u8; 32] {
    let mut c = Canonical::new("check_upload_status");
    c.field(pha_id.as_str().as_bytes()).field(&token.0);
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sign_and_verify() {
        let cred = SigningCredential::from_seed([5; 32]);
        let d = [9u8; 32];
        let sig = cred.sign(&d);
        assert!(verify(&cred.public_key(), &d, &sig));
        assert!(!verify(&cred.public_key(), &[8u8; 32], &sig));
        let other = SigningCredential::from_seed([6; 32]);
        assert!(!verify(&other.public_key(), &d, &sig));
        assert!(!verify(&[1, 2, 3], &d, &sig));
    }

    #[test]
    fn digests_are_method_separated() {
        let pha = PhaId::new("x");
        let token = OtaToken([0; 16]);
        let a = digest_upload_status(&pha, &token);
        let b = digest_upload_status(&PhaId::new("y"), &token);
        assert_ne!(a, b);
    }

    #[test]
    fn signature_serde_hex() {
        let sig = SigningCredential::from_seed([1; 32]).sign(&[0; 32]);
        let json = serde_json::to_string(&sig).unwrap();
        assert_eq!(json.len(), 130);
        let back: RequestSignature = serde_json::from_str(&json).unwrap();
        assert_eq!(back, sig);
    }
}
