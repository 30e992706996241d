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

//! Decentralized exposure notification with lighthouses and a federated
//! diagnosis-key commons.
//!
//! - [`protocol`]: daily keys, rolling identifiers, matching, scoring.
//! - [`device`]: phones and lighthouses (active or transmit-only).
//! - [`commons`]: PHA registry, one-time upload authorizations, the
//!   append-only key store and push/pull federation.
//! - [`sim`]: deterministic world simulation over all of the above.
//! - [`estimate`]: back-of-envelope download sizing.

pub mod commons;
pub mod device;
pub mod estimate;
pub mod protocol;
pub mod sim;
