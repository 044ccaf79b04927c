// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dml_core::agent::agent_graph;
use dml_core::circuits::ValueCircuitConfig;
use dml_core::harness::{self, Backend, ExperimentConfig, HarnessError, SweepParam, SweepSpec, Task};

#[derive(Parser)]
#[command(name = "dml", version, about = "Spiking dual-memory learner: runs, sweeps and comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSVs and manifest.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        out: PathBuf,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Run a parameter sweep over several seeds.
    Sweep {
        #[command(flatten)]
        exp: ExpArgs,
        /// T, epsilon or theta.
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Compare two run directories of the same task.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Directory for comparison.json and comparison.csv; JSON goes to
        /// stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the compiled agent netlist for a task shape as JSON.
    Netlist {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        actions: usize,
        #[arg(long, default_value_t = 64)]
        theta: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ExpArgs {
    /// JSON experiment config; command-line flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Epochs (bandit), epochs per phase (maze) or episodes (blackjack).
    #[arg(long)]
    epochs: Option<u64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Rate-coding window.
    #[arg(long = "T")]
    window: Option<usize>,
    #[arg(long)]
    theta: Option<u32>,
    #[arg(long)]
    delta_q: Option<u32>,
}

impl ExpArgs {
    fn config(&self) -> Result<ExperimentConfig, HarnessError> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
                let mut value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                if let (Some(task), Some(obj)) = (&self.task, value.as_object_mut()) {
                    obj.insert("task".into(), serde_json::Value::String(task.clone()));
                }
                serde_json::from_value(value).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
            }
            None => {
                let task: Task = self
                    .task
                    .as_deref()
                    .ok_or_else(|| HarnessError::Config("--task or --config is required".into()))?
                    .parse()?;
                ExperimentConfig::new(task, Backend::Spiking)
            }
        };
        if let Some(b) = &self.backend {
            cfg.backend = b.parse()?;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if self.epochs.is_some() {
            cfg.epochs = self.epochs;
        }
        if self.epsilon.is_some() {
            cfg.epsilon = self.epsilon;
        }
        if let Some(t) = self.window {
            cfg.window = t;
        }
        if self.theta.is_some() {
            cfg.theta = self.theta;
        }
        if let Some(d) = self.delta_q {
            cfg.delta_q = d;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summary(dir: &Path, summary: &std::collections::BTreeMap<String, f64>) {
    println!("{}", dir.display());
    for (k, v) in summary {
        println!("  {k} = {v}");
    }
}

fn dispatch(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Run { exp, out, force } => {
            let mut cfg = exp.config()?;
            cfg.out = Some(out.display().to_string());
            log::info!("running {} on {} backend", cfg.task, cfg.backend);
            let manifest = harness::run(&cfg, &out, force)?;
            print_summary(&out, &manifest.summary);
        }
        Command::Sweep { exp, param, values, seeds, workers, out, force } => {
            let spec = SweepSpec { base: exp.config()?, param: param.parse::<SweepParam>()?, values, seeds, workers };
            log::info!("sweeping {} over {:?} with {} seeds", spec.param, spec.values, seeds);
            let report = harness::sweep(&spec, Some(&out), force)?;
            println!("{}", out.join("sweep_summary.csv").display());
            for r in report.rows.iter().filter(|r| r.metric.starts_with("moa") || r.metric.starts_with("mean_return")) {
                println!("  {}={} {} = {:.4} +/- {:.4}", spec.param, r.value, r.metric, r.mean, r.std);
            }
        }
        Command::Compare { a, b, out } => {
            let c = harness::compare(&a, &b)?;
            match out {
                Some(dir) => {
                    for p in harness::write_comparison(&c, &dir)? {
                        println!("{}", p.display());
                    }
                }
                None => println!("{}", serde_json::to_string_pretty(&c).map_err(|e| HarnessError::Io(e.to_string()))?),
            }
        }
        Command::Netlist { states, actions, theta, out } => {
            let vc = ValueCircuitConfig { theta, ..ValueCircuitConfig::default() };
            let netlist = agent_graph(states, actions, &vc)
                .and_then(|(g, _)| Ok(g.compile()?))
                .map_err(|e| HarnessError::Config(e.to_string()))?;
            let json = netlist.to_json();
            match out {
                Some(path) => fs::write(&path, json).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?,
                None => print!("{json}"),
            }
            eprintln!("{} compartments, {} synapses", netlist.compartment_count(), netlist.synapse_count());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
