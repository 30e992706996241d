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

use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Subcommand};
use encommons::sim::{
    loglog_slope, participation_sweep, run_world, scenario_avery_bernie, sweep_csv, RandomWorldParams, WorldConfig,
};

use crate::{read_file, write_output, Ctx};

#[derive(Debug, Subcommand)]
pub enum SimCommand {
    /// Simulate a world config and write its metrics as JSON.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Detection rate against participation over random worlds.
    Sweep(SweepArgs),
    /// The two-person lighthouse scenario.
    AveryBernie,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Participation levels, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.8")]
    p: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    trials: u32,
    #[arg(long, default_value_t = 1000)]
    people: u32,
    #[arg(long, default_value_t = 100)]
    places: u32,
    #[arg(long, default_value_t = 50)]
    diagnosed: u32,
    #[arg(long, default_value_t = 3)]
    visits: u32,
    #[arg(long, default_value_t = 0.0)]
    radio_loss: f64,
    #[arg(long, default_value_t = 1.0)]
    recall: f64,
    /// CSV of `p,trial,detection_rate`. Printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(ctx: &Ctx, c: SimCommand) -> anyhow::Result<()> {
    match c {
        SimCommand::Run { config, out } => {
            let mut cfg = WorldConfig::from_json(&read_file(&config)?)
                .with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = ctx.seed {
                cfg.seed = s;
            }
            let metrics = run_world(&cfg)?;
            let json = serde_json::to_string_pretty(&metrics)? + "\n";
            write_output(out.as_deref(), &json)
        }
        SimCommand::Sweep(a) => {
            if a.p.iter().any(|p| !(0.0..=1.0).contains(p)) {
                bail!("--p values must lie in [0, 1]");
            }
            let base = RandomWorldParams {
                seed: ctx.seed.unwrap_or(0),
                n_people: a.people,
                n_places: a.places,
                visits_per_person: a.visits,
                n_diagnosed: a.diagnosed,
                radio_loss_prob: a.radio_loss,
                interview_recall_prob: a.recall,
                ..RandomWorldParams::default()
            };
            let result = participation_sweep(&base, &a.p, a.trials)?;
            let csv = sweep_csv(&result.rows);
            match &a.out {
                Some(_) => write_output(a.out.as_deref(), &csv)?,
                None => print!("{csv}"),
            }
            for (p, mean) in &result.means {
                eprintln!("mean {p} {mean}");
            }
            match loglog_slope(&result.means) {
                Some(s) if a.out.is_some() => println!("slope {s}"),
                Some(s) => eprintln!("slope {s}"),
                None => eprintln!("slope undefined"),
            }
            Ok(())
        }
        SimCommand::AveryBernie => {
            let o = scenario_avery_bernie()?;
            println!("bernie_notified={}", o.bernie_notified);
            println!("bernie_risk={}", o.bernie_risk);
            println!("shop_self_detections={}", o.shop_self_detections);
            println!("shop_published={}", o.shop_published);
            println!("bus_published={}", o.bus_published);
            println!("leaked_labels={}", o.leaked_labels.len());
            if !o.all_hold() {
                bail!("scenario expectations do not hold");
            }
            Ok(())
        }
    }
}
