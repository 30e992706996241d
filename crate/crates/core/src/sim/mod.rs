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


//! Deterministic simulation of people, places, lighthouses, a PHA and a
//! Commons instance.

mod config;
mod generate;
mod scenario;
mod sweep;
mod world;

use thiserror::Error;

pub use config::{DiagnosisEvent, PlaceConfig, Visit, WorldConfig};
pub use generate::{random_world, RandomWorldParams};
pub use scenario::{scenario_avery_bernie, AveryBernieOutcome};
pub use sweep::{loglog_slope, participation_sweep, sweep_csv, SweepResult, SweepRow};
pub use world::{
    ground_truth, participation_mask, qualifying_contacts, run_world, simulate, ContactGroundTruth,
    Publication, PublicationSource, SimMetrics, SimRun,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    /// A protocol or commons call failed where the simulation expects success.
    #[error("simulation fault: {0}")]
    Internal(String),
}
