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

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use encommons::commons::{
    write_export, CommonsInstance, DayRange, DownloadFilter, InstanceId, IssueOtaRequest, OtaToken, PhaRecord,
    SigningCredential, UploadStatus,
};
use encommons::protocol::{
    interval_from_timestamp, parse_hex16, IntervalNumber, ReportType, TemporaryExposureKey,
};
use encommons_server::{serve_blocking, spawn_federation_loop, CommonsClient};
use rand::RngCore;

use crate::{read_file, write_output, Ctx};

const ADMIN_STREAM: u64 = 3;
const PHA_STREAM: u64 = 4;
const TOKEN_STREAM: u64 = 5;
const ADMIN_SEED_FILE: &str = "admin.seed";
const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Subcommand)]
pub enum CommonsCommand {
    /// Host an instance over HTTP until killed.
    Serve(ServeArgs),
    /// Register a new PHA and store its signing seed in the data dir.
    Register(RegisterArgs),
    /// Issue a one-time upload authorization; prints the token.
    Issue(IssueArgs),
    /// Upload keys (`tek_hex,day_start` lines) under a token.
    Upload(UploadArgs),
    /// Upload status of a token: `pending` or `fulfilled <interval>`.
    Status(StatusArgs),
    /// Download keys in the export format.
    Download(DownloadArgs),
    /// Copy keys downloaded from one instance into another.
    Forward(ForwardArgs),
    /// Make the remote instance subscribe to one of its peers.
    Subscribe(SubscribeArgs),
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pha: Vec<String>,
    /// Only keys whose period reaches this interval.
    #[arg(long)]
    since: Option<u32>,
    #[arg(long)]
    region: Vec<String>,
    #[arg(long)]
    report_type: Vec<ReportType>,
}

impl FilterArgs {
    fn filter(&self) -> DownloadFilter {
        let mut f = DownloadFilter::any();
        for p in &self.pha {
            f = f.pha(p.clone());
        }
        for r in &self.region {
            f = f.region(r.clone());
        }
        for t in &self.report_type {
            f = f.report_type(*t);
        }
        if let Some(s) = self.since {
            f = f.since(IntervalNumber(s));
        }
        f
    }
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long)]
    id: String,
    #[arg(long, default_value = "127.0.0.1:8080")]
    listen: String,
    /// Known remote instance, as `ID=URL`. Repeatable.
    #[arg(long, value_parser = parse_peer)]
    peer: Vec<(String, String)>,
    /// Peer to pull from on a schedule. Repeatable.
    #[arg(long)]
    subscribe: Vec<String>,
    #[command(flatten)]
    filter: FilterArgs,
    /// Seconds between subscription pulls and forward retries.
    #[arg(long, default_value_t = 5)]
    pull_secs: u64,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    remote: String,
    #[arg(long)]
    pha: String,
    #[arg(long)]
    name: String,
    #[arg(long)]
    region: Vec<String>,
}

#[derive(Debug, Args)]
pub struct IssueArgs {
    #[arg(long)]
    remote: String,
    #[arg(long)]
    pha: String,
    #[arg(long, default_value_t = ReportType::Confirmed)]
    report_type: ReportType,
    /// Last authorized day index. Defaults to today.
    #[arg(long)]
    day: Option<u32>,
    /// Authorized days ending with `--day`.
    #[arg(long, default_value_t = 14)]
    days: u32,
    #[arg(long, default_value_t = 7)]
    ttl_days: u32,
    /// Instance the upload is pushed to. Repeatable.
    #[arg(long)]
    forward_to: Vec<String>,
    #[arg(long)]
    region: Vec<String>,
}

#[derive(Debug, Args)]
pub struct UploadArgs {
    #[arg(long)]
    remote: String,
    #[arg(long)]
    token: String,
    #[arg(long)]
    keys: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatusArgs {
    #[arg(long)]
    remote: String,
    #[arg(long)]
    pha: String,
    #[arg(long)]
    token: String,
}

#[derive(Debug, Args)]
pub struct DownloadArgs {
    #[arg(long)]
    remote: String,
    #[command(flatten)]
    filter: FilterArgs,
    #[arg(long, default_value_t = 0)]
    cursor: u64,
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForwardArgs {
    /// Receiving instance.
    #[arg(long)]
    remote: String,
    /// Instance to download from.
    #[arg(long)]
    from: String,
    #[command(flatten)]
    filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct SubscribeArgs {
    #[arg(long)]
    remote: String,
    /// Peer of the remote instance to pull from.
    #[arg(long)]
    peer_id: String,
    #[command(flatten)]
    filter: FilterArgs,
}

fn parse_peer(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((id, url)) if !id.is_empty() && !url.is_empty() => Ok((id.to_string(), url.to_string())),
        _ => Err(format!("expected ID=URL, found {s:?}")),
    }
}

fn read_seed(path: &Path) -> anyhow::Result<SigningCredential> {
    let text = read_file(path)?;
    let bytes = hex::decode(text.trim()).with_context(|| format!("decoding {}", path.display()))?;
    let seed: [u8; 32] = bytes
        .try_into()
        .map_err(|_| anyhow::anyhow!("{} must hold 32 hex-encoded bytes", path.display()))?;
    Ok(SigningCredential::from_seed(seed))
}

fn write_seed(path: &Path, cred: &SigningCredential) -> anyhow::Result<()> {
    std::fs::write(path, hex::encode(cred.seed()) + "\n").with_context(|| format!("writing {}", path.display()))
}

fn pha_seed_file(pha: &str) -> String {
    format!("pha-{pha}.seed")
}

fn token(s: &str) -> anyhow::Result<OtaToken> {
    Ok(s.trim().parse::<OtaToken>()?)
}

fn today() -> IntervalNumber {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs());
    interval_from_timestamp(secs)
}

/// Reads `tek_hex,day_start` lines as written by `keygen`.
fn parse_key_lines(text: &str) -> anyhow::Result<Vec<TemporaryExposureKey>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((tek, day)) = line.split_once(',') else {
            bail!("line {}: expected tek_hex,day_start", i + 1);
        };
        let day: u32 = day.trim().parse().with_context(|| format!("line {}: day_start", i + 1))?;
        let material = parse_hex16(tek.trim()).with_context(|| format!("line {}", i + 1))?;
        out.push(TemporaryExposureKey::for_day(material, IntervalNumber(day))?);
    }
    Ok(out)
}

pub fn run(ctx: &Ctx, c: CommonsCommand) -> anyhow::Result<()> {
    match c {
        CommonsCommand::Serve(a) => serve(ctx, a),
        CommonsCommand::Register(a) => {
            ctx.ensure_data_dir()?;
            let admin = read_seed(&ctx.data_path(ADMIN_SEED_FILE))?;
            let cred = SigningCredential::generate(&mut ctx.rng(PHA_STREAM));
            let mut record = PhaRecord::new(a.pha.clone(), cred.public_key(), a.name);
            record.region_tags = a.region.into_iter().collect();
            let auth = admin.authorize_register(&record);
            let id = CommonsClient::new(&a.remote).register_pha(record, auth)?;
            write_seed(&ctx.data_path(&pha_seed_file(&a.pha)), &cred)?;
            println!("{id}");
            Ok(())
        }
        CommonsCommand::Issue(a) => {
            let cred = read_seed(&ctx.data_path(&pha_seed_file(&a.pha)))?;
            let last = a.day.map_or_else(today, IntervalNumber::from_day_index);
            let mut req = IssueOtaRequest::new(a.report_type, DayRange::ending_at(last, a.days.max(1)))
                .ttl_days(a.ttl_days);
            for f in a.forward_to {
                req = req.forward_to(InstanceId::new(f));
            }
            for r in a.region {
                req = req.region(r);
            }
            let pha_id = encommons::protocol::PhaId::new(a.pha);
            let auth = cred.authorize_issue(&pha_id, &req);
            let ota = CommonsClient::new(&a.remote).issue_ota(auth, req)?;
            println!("{}", ota.token);
            Ok(())
        }
        CommonsCommand::Upload(a) => {
            let keys = parse_key_lines(&read_file(&a.keys)?)?;
            let receipt = CommonsClient::new(&a.remote).upload_keys(token(&a.token)?, keys)?;
            println!("appended {} duplicates {}", receipt.appended, receipt.duplicates);
            for f in &receipt.forwarded {
                match &f.result {
                    Ok(n) => println!("forwarded {} {n}", f.remote),
                    Err(e) => println!("forward-pending {} {e}", f.remote),
                }
            }
            Ok(())
        }
        CommonsCommand::Status(a) => {
            let cred = read_seed(&ctx.data_path(&pha_seed_file(&a.pha)))?;
            let t = token(&a.token)?;
            let auth = cred.authorize_status(&encommons::protocol::PhaId::new(a.pha), &t);
            match CommonsClient::new(&a.remote).check_upload_status(auth, t)? {
                UploadStatus::Pending => println!("pending"),
                UploadStatus::Fulfilled(at) => println!("fulfilled {at}"),
            }
            Ok(())
        }
        CommonsCommand::Download(a) => {
            let batch = CommonsClient::new(&a.remote).download(a.filter.filter(), a.cursor, a.limit)?;
            write_output(a.out.as_deref(), &write_export(&batch.keys))?;
            eprintln!("next_cursor {}", batch.next_cursor);
            Ok(())
        }
        CommonsCommand::Forward(a) => {
            let batch = CommonsClient::new(&a.from).download(a.filter.filter(), 0, None)?;
            let keys = batch.keys.iter().map(|k| k.replicated()).collect();
            let accepted = CommonsClient::new(&a.remote).forward(keys)?;
            println!("accepted {accepted}");
            Ok(())
        }
        CommonsCommand::Subscribe(a) => {
            let admin = read_seed(&ctx.data_path(ADMIN_SEED_FILE))?;
            let remote = InstanceId::new(a.peer_id);
            let filter = a.filter.filter();
            let auth = admin.authorize_subscribe(&remote, &filter);
            let r = CommonsClient::new(&a.remote).subscribe(remote, filter, auth)?;
            println!("subscription {} pulled {}", r.id, r.pulled);
            Ok(())
        }
    }
}

fn serve(ctx: &Ctx, a: ServeArgs) -> anyhow::Result<()> {
    ctx.ensure_data_dir()?;
    let seed_path = ctx.data_path(ADMIN_SEED_FILE);
    let admin = if seed_path.exists() {
        read_seed(&seed_path)?
    } else {
        let cred = SigningCredential::generate(&mut ctx.rng(ADMIN_STREAM));
        write_seed(&seed_path, &cred)?;
        cred
    };
    let mut builder = CommonsInstance::builder(a.id.as_str(), admin.public_key()).journal(ctx.data_path(JOURNAL_FILE));
    if ctx.seed.is_some() {
        builder = builder.seed(ctx.rng(TOKEN_STREAM).next_u64());
    }
    let instance = Arc::new(builder.build()?);
    let known: BTreeSet<&str> = a.peer.iter().map(|(id, _)| id.as_str()).collect();
    for (id, url) in &a.peer {
        instance.add_peer(id.as_str(), Arc::new(CommonsClient::new(url)));
    }
    for s in &a.subscribe {
        if !known.contains(s.as_str()) {
            bail!("--subscribe {s} needs a matching --peer {s}=URL");
        }
        instance
            .subscribe(s.as_str(), a.filter.filter())
            .with_context(|| format!("subscribing to {s}"))?;
    }
    let stop = Arc::new(AtomicBool::new(false));
    let _federation = spawn_federation_loop(instance.clone(), Duration::from_secs(a.pull_secs.max(1)), stop);
    serve_blocking(&a.listen, instance, |addr| println!("listening on http://{addr}"))
        .with_context(|| format!("serving on {}", a.listen))?;
    Ok(())
}
