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


use encommons::commons::{
    AdminAuth, CommonsError, DownloadFilter, InstanceId, IssueOtaRequest, OtaToken, PhaAuth, PhaRecord,
    ReplicatedKey, StatusCode,
};
use encommons::protocol::TemporaryExposureKey;
use serde::{Deserialize, Serialize};

pub const METHODS: [&str; 7] = [
    "register_pha",
    "issue_ota",
    "upload_keys",
    "check_upload_status",
    "download_keys",
    "forward_keys",
    "subscribe",
];

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterPhaRequest {
    pub record: PhaRecord,
    pub auth: AdminAuth,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssueOtaWire {
    pub auth: PhaAuth,
    pub request: IssueOtaRequest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadKeysRequest {
    pub token: OtaToken,
    pub keys: Vec<TemporaryExposureKey>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UploadStatusRequest {
    pub auth: PhaAuth,
    pub token: OtaToken,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DownloadKeysRequest {
    #[serde(default)]
    pub filter: DownloadFilter,
    #[serde(default)]
    pub cursor: u64,
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForwardKeysRequest {
    pub keys: Vec<ReplicatedKey>,
}

/// Registers a pull subscription on the serving instance and runs it once.
/// `remote` names one of the server's configured peers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubscribeRequest {
    pub remote: InstanceId,
    #[serde(default)]
    pub filter: DownloadFilter,
    pub auth: AdminAuth,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscribeResponse {
    pub id: u64,
    pub pulled: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Envelope {
    pub status: StatusCode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Envelope {
    pub fn ok<T: Serialize>(value: &T) -> Self {
        match serde_json::to_value(value) {
            Ok(v) => Self {
                status: StatusCode::Ok,
                result: Some(v),
                error: None,
            },
            Err(e) => Self::err(&CommonsError::Storage(e.to_string())),
        }
    }

    pub fn err(e: &CommonsError) -> Self {
        Self {
            status: e.status(),
            result: None,
            error: Some(e.to_string()),
        }
    }

    pub fn into_result<T: for<'de> Deserialize<'de>>(self) -> Result<T, CommonsError> {
        if self.status != StatusCode::Ok {
            return Err(CommonsError::from_status(self.status, self.error.unwrap_or_default()));
        }
        let v = self.result.unwrap_or(serde_json::Value::Null);
        serde_json::from_value(v).map_err(|e| CommonsError::Transport(format!("bad response body: {e}")))
    }
}
