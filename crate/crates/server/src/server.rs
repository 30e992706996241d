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


use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode as HttpStatus;
use axum::routing::post;
use axum::{Json, Router};
use encommons::commons::{CommonsError, CommonsInstance};
use serde::de::DeserializeOwned;

use crate::wire::{
    DownloadKeysRequest, Envelope, ForwardKeysRequest, IssueOtaWire, RegisterPhaRequest, SubscribeRequest,
    SubscribeResponse, UploadKeysRequest, UploadStatusRequest, METHODS,
};

pub fn router(instance: Arc<CommonsInstance>) -> Router {
    Router::new().route("/{method}", post(handle)).with_state(instance)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, instance: Arc<CommonsInstance>) -> std::io::Result<()> {
    axum::serve(listener, router(instance)).await
}

/// Binds `listen`, reports the bound address, then serves on a fresh
/// multi-threaded runtime until the listener fails.
pub fn serve_blocking(
    listen: &str,
    instance: Arc<CommonsInstance>,
    on_bound: impl FnOnce(std::net::SocketAddr),
) -> std::io::Result<()> {
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        on_bound(listener.local_addr()?);
        serve(listener, instance).await
    })
}

async fn handle(
    State(inst): State<Arc<CommonsInstance>>,
    Path(method): Path<String>,
    body: Bytes,
) -> (HttpStatus, Json<Envelope>) {
    if !METHODS.contains(&method.as_str()) {
        let e = CommonsError::Malformed(format!("unknown method {method:?}"));
        return (HttpStatus::NOT_FOUND, Json(Envelope::err(&e)));
    }
    // Instance calls block on the journal and on peer transfers.
    let env = tokio::task::spawn_blocking(move || dispatch(&inst, &method, &body))
        .await
        .unwrap_or_else(|e| Envelope::err(&CommonsError::Storage(format!("handler failed: {e}"))));
    (HttpStatus::OK, Json(env))
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, CommonsError> {
    serde_json::from_slice(body).map_err(|e| CommonsError::Malformed(e.to_string()))
}

pub(crate) fn dispatch(inst: &CommonsInstance, method: &str, body: &[u8]) -> Envelope {
    let run = || -> Result<Envelope, CommonsError> {
        Ok(match method {
            "register_pha" => {
                let r: RegisterPhaRequest = parse(body)?;
                Envelope::ok(&inst.register_pha(r.record, &r.auth)?)
            }
            "issue_ota" => {
                let r: IssueOtaWire = parse(body)?;
                Envelope::ok(&inst.issue_ota(&r.auth, &r.request)?)
            }
            "upload_keys" => {
                let r: UploadKeysRequest = parse(body)?;
                Envelope::ok(&inst.upload_keys(&r.token, &r.keys)?)
            }
            "check_upload_status" => {
                let r: UploadStatusRequest = parse(body)?;
                Envelope::ok(&inst.check_upload_status(&r.auth, &r.token)?)
            }
            "download_keys" => {
                let r: DownloadKeysRequest = parse(body)?;
                Envelope::ok(&inst.download_keys(&r.filter, r.cursor, r.limit))
            }
            "forward_keys" => {
                let r: ForwardKeysRequest = parse(body)?;
                Envelope::ok(&inst.accept_forwarded(&r.keys)?)
            }
            "subscribe" => {
                let r: SubscribeRequest = parse(body)?;
                let id = inst.subscribe_authorized(&r.auth, r.remote, r.filter)?;
                let pulled = inst.run_subscription(id)?;
                Envelope::ok(&SubscribeResponse { id, pulled })
            }
            other => return Err(CommonsError::Malformed(format!("unknown method {other:?}"))),
        })
    };
    run().unwrap_or_else(|e| Envelope::err(&e))
}

/// Background pulls and push retries every `period` until `stop` is set.
pub fn spawn_federation_loop(
    instance: Arc<CommonsInstance>,
    period: Duration,
    stop: Arc<AtomicBool>,
) -> JoinHandle<()> {
    std::thread::spawn(move || {
        let tick = Duration::from_millis(50).min(period);
        let mut waited = Duration::ZERO;
        while !stop.load(Ordering::Relaxed) {
            std::thread::sleep(tick);
            waited += tick;
            if waited < period {
                continue;
            }
            waited = Duration::ZERO;
            for (id, r) in instance.run_all_subscriptions() {
                if let Err(e) = r {
                    eprintln!("subscription {id}: {e}");
                }
            }
            instance.retry_pending_forwards();
        }
    })
}
