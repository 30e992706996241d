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

//! Daily keys and the identifiers derived from them.
//!
//! Each rolling identifier is
//! `HMAC-SHA256(key = tek, msg = "EN-RPI" || le32(interval))[..16]`.
//! The derivation depends only on the key material and the interval, so
//! anyone holding a published key can recreate its identifier schedule.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};
use sha2::Sha256;

use super::interval::{IntervalNumber, INTERVALS_PER_DAY};
use super::ProtocolError;

/// Domain-separation label prefixed to every identifier derivation.
pub const RPI_LABEL: &[u8] = b"EN-RPI";

pub const KEY_LEN: usize = 16;
pub const RPI_LEN: usize = 16;

type HmacSha256 = Hmac<Sha256>;

/// Opaque identifier of a public health authority.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaId(pub String);

impl PhaId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PhaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// The daily secret from which one day of identifiers derives.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TekRepr", into = "TekRepr")]
pub struct TemporaryExposureKey {
    key_material: [u8; KEY_LEN],
    day_start: IntervalNumber,
    rolling_period: u32,
}

impl TemporaryExposureKey {
    pub fn new(
        key_material: [u8; KEY_LEN],
        day_start: IntervalNumber,
        rolling_period: u32,
    ) -> Result<Self, ProtocolError> {
        if !day_start.is_day_aligned() {
            return Err(ProtocolError::UnalignedDayStart(day_start));
        }
        if rolling_period == 0 || rolling_period > INTERVALS_PER_DAY {
            return Err(ProtocolError::InvalidRollingPeriod(rolling_period));
        }
        Ok(Self {
            key_material,
            day_start,
            rolling_period,
        })
    }

    /// Full-day key.
    pub fn for_day(key_material: [u8; KEY_LEN], day_start: IntervalNumber) -> Result<Self, ProtocolError> {
        Self::new(key_material, day_start, INTERVALS_PER_DAY)
    }

    pub fn key_material(&self) -> &[u8; KEY_LEN] {
        &self.key_material
    }

    pub fn day_start(&self) -> IntervalNumber {
        self.day_start
    }

    pub fn rolling_period(&self) -> u32 {
        self.rolling_period
    }

    /// Whether `interval` lies in `[day_start, day_start + rolling_period)`.
    pub fn covers(&self, interval: IntervalNumber) -> bool {
        interval >= self.day_start && interval.0 - self.day_start.0 < self.rolling_period
    }

    pub fn key_hex(&self) -> String {
        hex::encode(self.key_material)
    }

    /// Key identity used for deduplication.
    pub fn dedup_key(&self) -> ([u8; KEY_LEN], IntervalNumber) {
        (self.key_material, self.day_start)
    }
}

impl fmt::Debug for TemporaryExposureKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TemporaryExposureKey")
            .field("key_material", &self.key_hex())
            .field("day_start", &self.day_start)
            .field("rolling_period", &self.rolling_period)
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct TekRepr {
    key: String,
    day_start: IntervalNumber,
    #[serde(default = "default_rolling_period")]
    rolling_period: u32,
}

fn default_rolling_period() -> u32 {
    INTERVALS_PER_DAY
}

impl TryFrom<TekRepr> for TemporaryExposureKey {
    type Error = ProtocolError;

    fn try_from(r: TekRepr) -> Result<Self, Self::Error> {
        let key = parse_hex16(&r.key)?;
        Self::new(key, r.day_start, r.rolling_period)
    }
}

impl From<TemporaryExposureKey> for TekRepr {
    fn from(t: TemporaryExposureKey) -> Self {
        TekRepr {
            key: t.key_hex(),
            day_start: t.day_start,
            rolling_period: t.rolling_period,
        }
    }
}

/// Parses exactly 32 lowercase or uppercase hex characters.
pub fn parse_hex16(s: &str) -> Result<[u8; 16], ProtocolError> {
    let bytes = hex::decode(s.trim()).map_err(|_| ProtocolError::MalformedHex(s.to_string()))?;
    bytes
        .try_into()
        .map_err(|_| ProtocolError::MalformedHex(s.to_string()))
}

/// 16-byte unlinkable broadcast token.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RollingProximityIdentifier(pub [u8; RPI_LEN]);

impl RollingProximityIdentifier {
    pub fn as_bytes(&self) -> &[u8; RPI_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for RollingProximityIdentifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Rpi({})", self.to_hex())
    }
}

impl FromStr for RollingProximityIdentifier {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_hex16(s).map(Self)
    }
}

impl Serialize for RollingProximityIdentifier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for RollingProximityIdentifier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportType {
    Confirmed,
    Probable,
}

impl ReportType {
    pub const ALL: [ReportType; 2] = [ReportType::Confirmed, ReportType::Probable];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportType::Confirmed => "confirmed",
            ReportType::Probable => "probable",
        }
    }
}

impl fmt::Display for ReportType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportType {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "confirmed" => Ok(ReportType::Confirmed),
            "probable" => Ok(ReportType::Probable),
            other => Err(ProtocolError::UnknownReportType(other.to_string())),
        }
    }
}

/// A published key together with its provenance metadata.
///
/// Carries no person-identifying fields and no coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosisKey {
    pub tek: TemporaryExposureKey,
    pub report_type: ReportType,
    pub pha_id: Option<PhaId>,
    pub region_tags: BTreeSet<String>,
    pub upload_time: IntervalNumber,
}

impl DiagnosisKey {
    pub fn confirmed(tek: TemporaryExposureKey) -> Self {
        Self {
            tek,
            report_type: ReportType::Confirmed,
            pha_id: None,
            region_tags: BTreeSet::new(),
            upload_time: tek.day_start(),
        }
    }
}

/// Draws a fresh daily key from `entropy`.
pub fn generate_tek<R: RngCore + CryptoRng + ?Sized>(
    entropy: &mut R,
    day_start: IntervalNumber,
) -> Result<TemporaryExposureKey, ProtocolError> {
    if !day_start.is_day_aligned() {
        return Err(ProtocolError::UnalignedDayStart(day_start));
    }
    let mut key = [0u8; KEY_LEN];
    entropy.fill_bytes(&mut key);
    TemporaryExposureKey::for_day(key, day_start)
}

fn prf(key: &[u8; KEY_LEN], interval: IntervalNumber) -> RollingProximityIdentifier {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    mac.update(RPI_LABEL);
    mac.update(&interval.to_le_bytes());
    let tag = mac.finalize().into_bytes();
    let mut out = [0u8; RPI_LEN];
    out.copy_from_slice(&tag[..RPI_LEN]);
    RollingProximityIdentifier(out)
}

/// Identifier broadcast under `tek` during `interval`.
pub fn derive_rpi(
    tek: &TemporaryExposureKey,
    interval: IntervalNumber,
) -> Result<RollingProximityIdentifier, ProtocolError> {
    if !tek.covers(interval) {
        return Err(ProtocolError::IntervalOutOfPeriod {
            interval,
            day_start: tek.day_start,
            rolling_period: tek.rolling_period,
        });
    }
    Ok(prf(&tek.key_material, interval))
}

/// The full identifier schedule of `tek`; element `j` belongs to
/// `day_start + j`.
pub fn derive_rpi_sequence(tek: &TemporaryExposureKey) -> Vec<RollingProximityIdentifier> {
    (0..tek.rolling_period)
        .map(|j| prf(&tek.key_material, IntervalNumber(tek.day_start.0 + j)))
        .collect()
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;

    #[test]
    fn generate_is_seed_deterministic() {
        let a = generate_tek(&mut ChaCha20Rng::seed_from_u64(7), IntervalNumber(0)).unwrap();
        let b = generate_tek(&mut ChaCha20Rng::seed_from_u64(7), IntervalNumber(0)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rolling_period(), 96);
        let c = generate_tek(&mut ChaCha20Rng::seed_from_u64(8), IntervalNumber(0)).unwrap();
        assert_ne!(a.key_material(), c.key_material());
    }

    #[test]
    fn generate_rejects_unaligned() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        assert_eq!(
            generate_tek(&mut rng, IntervalNumber(7)),
            Err(ProtocolError::UnalignedDayStart(IntervalNumber(7)))
        );
        let t = generate_tek(&mut rng, IntervalNumber(96)).unwrap();
        assert_eq!(t.day_start(), IntervalNumber(96));
    }

    #[test]
    fn tek_constructor_validates_period() {
        assert!(TemporaryExposureKey::new([0; 16], IntervalNumber(0), 0).is_err());
        assert!(TemporaryExposureKey::new([0; 16], IntervalNumber(0), 97).is_err());
        assert!(TemporaryExposureKey::new([0; 16], IntervalNumber(0), 1).is_ok());
    }

    #[test]
    fn derive_rejects_out_of_period() {
        let tek = TemporaryExposureKey::for_day([1; 16], IntervalNumber(96)).unwrap();
        assert!(derive_rpi(&tek, IntervalNumber(95)).is_err());
        assert!(derive_rpi(&tek, IntervalNumber(192)).is_err());
        assert!(derive_rpi(&tek, IntervalNumber(191)).is_ok());

        let short = TemporaryExposureKey::new([1; 16], IntervalNumber(96), 10).unwrap();
        assert!(derive_rpi(&short, IntervalNumber(106)).is_err());
        assert_eq!(derive_rpi_sequence(&short).len(), 10);
    }

    #[test]
    fn adjacent_intervals_differ() {
        let tek = TemporaryExposureKey::for_day([9; 16], IntervalNumber(0)).unwrap();
        let a = derive_rpi(&tek, IntervalNumber(3)).unwrap();
        let b = derive_rpi(&tek, IntervalNumber(4)).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, derive_rpi(&tek, IntervalNumber(3)).unwrap());
    }

    #[test]
    fn sequence_matches_pointwise() {
        let tek = generate_tek(&mut ChaCha20Rng::seed_from_u64(3), IntervalNumber(960)).unwrap();
        let seq = derive_rpi_sequence(&tek);
        assert_eq!(seq.len(), 96);
        for (j, rpi) in seq.iter().enumerate() {
            assert_eq!(*rpi, derive_rpi(&tek, IntervalNumber(960 + j as u32)).unwrap());
        }
    }

    #[test]
    fn tek_json_uses_hex() {
        let tek = TemporaryExposureKey::for_day([0xab; 16], IntervalNumber(96)).unwrap();
        let json = serde_json::to_string(&tek).unwrap();
        assert_eq!(
            json,
            r#"{"key":"abababababababababababababababab","day_start":96,"rolling_period":96}"#
        );
        let back: TemporaryExposureKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tek);
        assert!(serde_json::from_str::<TemporaryExposureKey>(
            r#"{"key":"abab","day_start":96}"#
        )
        .is_err());
        assert!(serde_json::from_str::<TemporaryExposureKey>(
            r#"{"key":"abababababababababababababababab","day_start":5}"#
        )
        .is_err());
    }
}
