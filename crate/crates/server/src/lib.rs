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


//! HTTP transport for the commons: every wire method is `POST /<method>`
//! with a JSON body, answered by a JSON envelope carrying the status code.

mod client;
mod server;
mod wire;

pub use client::CommonsClient;
pub use server::{router, serve, serve_blocking, spawn_federation_loop};
pub use wire::{
    DownloadKeysRequest, Envelope, ForwardKeysRequest, IssueOtaWire, RegisterPhaRequest, SubscribeRequest,
    SubscribeResponse, UploadKeysRequest, UploadStatusRequest, METHODS,
};
