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

//! Printable receipt codes.
//!
//! A code is RFC 4648 base32 (uppercase, unpadded) over 14 bytes: the first
//! 10 bytes of the identifier a lighthouse broadcast during an interval,
//! then that interval as big-endian u32. 23 characters.

use std::fmt;
use std::str::FromStr;

use data_encoding::BASE32_NOPAD;

use super::DeviceError;
use crate::protocol::{derive_rpi, DiagnosisKey, IntervalNumber, RollingProximityIdentifier};

pub const RECEIPT_PREFIX_LEN: usize = 10;
const RECEIPT_BYTES: usize = RECEIPT_PREFIX_LEN + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReceiptCode {
    prefix: [u8; RECEIPT_PREFIX_LEN],
    interval: IntervalNumber,
}

impl ReceiptCode {
    pub fn new(rpi: &RollingProximityIdentifier, interval: IntervalNumber) -> Self {
        let mut prefix = [0u8; RECEIPT_PREFIX_LEN];
        prefix.copy_from_slice(&rpi.as_bytes()[..RECEIPT_PREFIX_LEN]);
        Self { prefix, interval }
    }

    pub fn from_parts(prefix: [u8; RECEIPT_PREFIX_LEN], interval: IntervalNumber) -> Self {
        Self { prefix, interval }
    }

    pub fn prefix(&self) -> &[u8; RECEIPT_PREFIX_LEN] {
        &self.prefix
    }

    pub fn interval(&self) -> IntervalNumber {
        self.interval
    }

    pub fn encode(&self) -> String {
        let mut buf = [0u8; RECEIPT_BYTES];
        buf[..RECEIPT_PREFIX_LEN].copy_from_slice(&self.prefix);
        buf[RECEIPT_PREFIX_LEN..].copy_from_slice(&self.interval.value().to_be_bytes());
        BASE32_NOPAD.encode(&buf)
    }

    pub fn decode(code: &str) -> Result<Self, DeviceError> {
        let malformed = || DeviceError::MalformedReceiptCode(code.to_string());
        let bytes = BASE32_NOPAD
            .decode(code.trim().as_bytes())
            .map_err(|_| malformed())?;
        if bytes.len() != RECEIPT_BYTES {
            return Err(malformed());
        }
        let mut prefix = [0u8; RECEIPT_PREFIX_LEN];
        prefix.copy_from_slice(&bytes[..RECEIPT_PREFIX_LEN]);
        let interval = u32::from_be_bytes(bytes[RECEIPT_PREFIX_LEN..].try_into().expect("4 bytes"));
        Ok(Self {
            prefix,
            interval: IntervalNumber(interval),
        })
    }
}

impl fmt::Display for ReceiptCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for ReceiptCode {
    type Err = DeviceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::decode(s)
    }
}

/// Whether any published key broadcast the code's identifier prefix at the
/// code's interval.
pub fn check_receipt_code(code: &ReceiptCode, keys: &[DiagnosisKey]) -> bool {
    keys.iter().any(|k| {
        derive_rpi(&k.tek, code.interval)
            .is_ok_and(|rpi| rpi.as_bytes()[..RECEIPT_PREFIX_LEN] == code.prefix)
    })
}

/// Parses a code string and checks it.
pub fn check_receipt_str(code: &str, keys: &[DiagnosisKey]) -> Result<bool, DeviceError> {
    Ok(check_receipt_code(&ReceiptCode::decode(code)?, keys))
}
