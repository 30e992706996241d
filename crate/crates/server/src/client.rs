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


use std::time::Duration;

use encommons::commons::{
    AdminAuth, CommonsError, CommonsPeer, DownloadBatch, DownloadFilter, InstanceId, IssueOtaRequest,
    OneTimeAuthorization, OtaToken, PhaAuth, PhaRecord, ReplicatedKey, UploadReceipt, UploadStatus,
};
use encommons::protocol::{PhaId, TemporaryExposureKey};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::wire::{
    DownloadKeysRequest, Envelope, ForwardKeysRequest, IssueOtaWire, RegisterPhaRequest, SubscribeRequest,
    SubscribeResponse, UploadKeysRequest, UploadStatusRequest,
};

/// Blocking client for a remote commons. Also usable as a federation peer.
#[derive(Debug, Clone)]
pub struct CommonsClient {
    base: String,
    agent: ureq::Agent,
}

impl CommonsClient {
    /// `base` is e.g. `http://127.0.0.1:7878`; a bare `host:port` gets `http://`.
    pub fn new(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let base = if base.contains("://") {
            base.to_string()
        } else {
            format!("http://{base}")
        };
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        Self { base, agent }
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn call<B: Serialize, T: DeserializeOwned>(&self, method: &str, body: &B) -> Result<T, CommonsError> {
        let url = format!("{}/{method}", self.base);
        let mut resp = self
            .agent
            .post(&url)
            .send_json(body)
            .map_err(|e| CommonsError::Transport(e.to_string()))?;
        let env: Envelope = resp
            .body_mut()
            .read_json()
            .map_err(|e| CommonsError::Transport(format!("bad response from {url}: {e}")))?;
        env.into_result()
    }

    pub fn register_pha(&self, record: PhaRecord, auth: AdminAuth) -> Result<PhaId, CommonsError> {
        self.call("register_pha", &RegisterPhaRequest { record, auth })
    }

    pub fn issue_ota(&self, auth: PhaAuth, request: IssueOtaRequest) -> Result<OneTimeAuthorization, CommonsError> {
        self.call("issue_ota", &IssueOtaWire { auth, request })
    }

    pub fn upload_keys(&self, token: OtaToken, keys: Vec<TemporaryExposureKey>) -> Result<UploadReceipt, CommonsError> {
        self.call("upload_keys", &UploadKeysRequest { token, keys })
    }

    pub fn check_upload_status(&self, auth: PhaAuth, token: OtaToken) -> Result<UploadStatus, CommonsError> {
        self.call("check_upload_status", &UploadStatusRequest { auth, token })
    }

    pub fn download(&self, filter: DownloadFilter, cursor: u64, limit: Option<usize>) -> Result<DownloadBatch, CommonsError> {
        self.call("download_keys", &DownloadKeysRequest { filter, cursor, limit })
    }

    pub fn forward(&self, keys: Vec<ReplicatedKey>) -> Result<usize, CommonsError> {
        self.call("forward_keys", &ForwardKeysRequest { keys })
    }

    pub fn subscribe(&self, remote: InstanceId, filter: DownloadFilter, auth: AdminAuth) -> Result<SubscribeResponse, CommonsError> {
        self.call("subscribe", &SubscribeRequest { remote, filter, auth })
    }
}

impl CommonsPeer for CommonsClient {
    fn forward_keys(&self, keys: &[ReplicatedKey]) -> Result<usize, CommonsError> {
        self.forward(keys.to_vec())
    }

    fn download_keys(&self, filter: &DownloadFilter, cursor: u64, limit: Option<usize>) -> Result<DownloadBatch, CommonsError> {
        self.download(filter.clone(), cursor, limit)
    }
}
