//! Command-line interface: argument definitions and subcommand bodies.
//! Every subcommand returns the text it prints on stdout.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use metainf_core::embedding::{Embedder, PromptStyle};
use metainf_core::eval::{evaluate_synthetic, generate_synthetic, run_ablation, EvalConfig, SynthSpec};
use metainf_core::perfdb::RecordStore;
use metainf_core::selectors::SelectorKind;
use metainf_core::{Budget, Error as CoreError};
use serde_json::json;

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};
use crate::service::{self, HardwareSpec, SelectRequest, TaskSpec, WIRE_VERSION};
use crate::snapshot::{Snapshot, TrainOptions};

#[derive(Debug, Parser)]
#[command(name = "metainf", version, about = "Pick LLM inference acceleration methods under a cost budget")]
pub struct Cli {
    /// TOML configuration file; METAINF_* variables override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Record store file (overrides the config).
    #[arg(long, global = true)]
    pub record_store: Option<PathBuf>,

    /// Snapshot directory (overrides the config).
    #[arg(long, global = true)]
    pub model_store: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Add JSONL or CSV runtime records to the record store.
    Ingest {
        path: PathBuf,
    },
    /// Write a calibrated synthetic record store.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output file; defaults to the configured record store.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit a selector on the record store and save a snapshot.
    Train {
        #[arg(long)]
        selector: Option<SelectorKind>,
        #[arg(long)]
        style: Option<PromptStyle>,
        #[arg(long)]
        rank: Option<usize>,
    },
    /// Choose a method for one workload with the saved snapshot.
    Select(SelectArgs),
    /// Compare selectors on synthetic data and print the report.
    Evaluate(EvaluateArgs),
    /// Run the prompt style × SVD rank grid on synthetic data.
    Ablate {
        #[command(flatten)]
        common: SynthRunArgs,
        #[arg(long, value_delimiter = ',', default_value = "one_hot,basic,rich,cot")]
        styles: Vec<PromptStyle>,
        #[arg(long, value_delimiter = ',', default_value = "64,256")]
        ranks: Vec<usize>,
    },
    /// Run the HTTP service.
    Serve {
        /// Bind address (overrides the config).
        #[arg(long)]
        bind: Option<String>,
    },
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long)]
    pub task_desc: String,
    #[arg(long)]
    pub model: String,
    /// `<class>x<count>`, e.g. `L4x4`.
    #[arg(long)]
    pub hardware: String,
    #[arg(long)]
    pub batch_size: u32,
    /// Budget in dollars; omitted means the configured default or none.
    #[arg(long)]
    pub budget: Option<f64>,
    /// Price per hour; defaults to the training profile's price.
    #[arg(long)]
    pub price: Option<f64>,
    #[arg(long)]
    pub memory_gb: Option<f64>,
    #[arg(long)]
    pub prompt_count: Option<u32>,
    #[arg(long)]
    pub source_tag: Option<String>,
}

#[derive(Debug, Args)]
pub struct SynthRunArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Seed for sampling evaluation trials.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Seed of the synthetic generator.
    #[arg(long, default_value_t = 7)]
    pub synth_seed: u64,
    /// Budget applied to every trial; omitted means unlimited.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub common: SynthRunArgs,
    #[arg(long)]
    pub style: Option<PromptStyle>,
    #[arg(long)]
    pub rank: Option<usize>,
    /// Also write the rank histogram CSV here.
    #[arg(long)]
    pub rank_csv: Option<PathBuf>,
    /// Also write the accuracy/cost trade-off CSV here.
    #[arg(long)]
    pub tradeoff_csv: Option<PathBuf>,
}

fn pretty(v: &serde_json::Value) -> CliResult<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn load_store(path: &Path) -> CliResult<RecordStore> {
    if path.exists() {
        Ok(RecordStore::load(path)?)
    } else {
        Ok(RecordStore::new())
    }
}

/// Splits `L4x4` into `("L4", 4)`; a bare class means one GPU.
pub fn parse_hardware(s: &str) -> CliResult<(String, u32)> {
    match s.rsplit_once(['x', 'X']) {
        Some((class, count)) if !class.is_empty() => count
            .parse::<u32>()
            .map(|n| (class.to_string(), n))
            .map_err(|_| CliError::Usage(format!("bad hardware `{s}`; expected <class>x<count>"))),
        _ if !s.is_empty() => Ok((s.to_string(), 1)),
        _ => Err(CliError::Usage("empty hardware".into())),
    }
}

fn eval_config(common: &SynthRunArgs, cfg: &AppConfig) -> CliResult<EvalConfig> {
    let budget = match common.budget {
        Some(b) => Budget::new(b)?,
        None => Budget::unlimited(),
    };
    Ok(EvalConfig {
        synth: SynthSpec {
            seed: common.synth_seed,
            ..SynthSpec::default()
        },
        provider: cfg.provider.clone(),
        style: cfg.style,
        rank: cfg.rank,
        trials: common.trials,
        trial_seed: common.seed,
        budget,
        ..EvalConfig::default()
    })
}

fn select(args: &SelectArgs, cfg: &AppConfig) -> CliResult<String> {
    let snap = Snapshot::require(&cfg.model_store)?;
    let (class, count) = parse_hardware(&args.hardware)?;
    let price = match args.price {
        Some(p) => p,
        None => snap
            .hardware
            .iter()
            .find(|h| h.id == metainf_core::HardwareProfile::canonical_id(&class, count))
            .map(|h| h.price_per_hour)
            .ok_or_else(|| CliError::Usage(format!("no known price for {}; pass --price", args.hardware)))?,
    };
    let req = SelectRequest {
        v: WIRE_VERSION,
        task: TaskSpec {
            description: args.task_desc.clone(),
            batch_size: args.batch_size,
            prompt_count: args.prompt_count,
            source_tag: args.source_tag.clone(),
        },
        model: args.model.clone(),
        hardware: HardwareSpec {
            gpu_class: class,
            gpu_count: count,
            price_per_hour: price,
            memory_gb: args.memory_gb,
        },
        budget: args.budget,
    };
    let embedder = Arc::new(Embedder::new(cfg.provider.clone())?);
    snap.attach(&embedder);
    let resp = service::select_for(&snap, &req, cfg.default_budget)?;
    Ok(serde_json::to_string_pretty(&resp)?)
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> CliResult<String> {
    let mut cfg = AppConfig::load(cli.config.as_deref())?;
    if let Some(p) = cli.record_store {
        cfg.record_store = p;
    }
    if let Some(p) = cli.model_store {
        cfg.model_store = p;
    }
    match cli.command {
        Command::Ingest { path } => {
            let mut store = load_store(&cfg.record_store)?;
            let n = store.ingest_path(&path)?;
            store.save(&cfg.record_store)?;
            log::info!("ingested {n} records from {}", path.display());
            pretty(&json!({ "ingested": n, "records": store.len(), "store": cfg.record_store }))
        }
        Command::Synth { seed, out } => {
            let spec = SynthSpec {
                seed,
                ..SynthSpec::default()
            };
            let data = generate_synthetic(&spec)?;
            let out = out.unwrap_or(cfg.record_store);
            data.store.save(&out)?;
            pretty(&json!({
                "records": data.store.len(),
                "tasks": data.store.task_profiles().count(),
                "hardware": data.hardware.len(),
                "out": out,
            }))
        }
        Command::Train { selector, style, rank } => {
            let opts = TrainOptions {
                selector: selector.unwrap_or(cfg.selector),
                style: style.unwrap_or(cfg.style),
                rank: rank.unwrap_or(cfg.rank),
            };
            if opts.rank == 0 {
                return Err(CliError::Usage("rank must be >= 1".into()));
            }
            let store = load_store(&cfg.record_store)?;
            let embedder = Arc::new(Embedder::new(cfg.provider.clone())?);
            let snap = Snapshot::train(&store, opts, embedder)?;
            snap.save(&cfg.model_store)?;
            pretty(&json!({
                "model_version": snap.model_version,
                "train_rows": snap.train_rows,
                "selector": opts.selector,
                "style": opts.style,
                "rank": opts.rank,
            }))
        }
        Command::Select(args) => select(&args, &cfg),
        Command::Evaluate(args) => {
            let mut ec = eval_config(&args.common, &cfg)?;
            ec.style = args.style.unwrap_or(cfg.style);
            ec.rank = args.rank.unwrap_or(cfg.rank);
            let report = evaluate_synthetic(&ec)?;
            if let Some(p) = &args.rank_csv {
                report.write_rank_csv(File::create(p)?)?;
            }
            if let Some(p) = &args.tradeoff_csv {
                report.write_tradeoff_csv(File::create(p)?)?;
            }
            Ok(report.to_json()?)
        }
        Command::Ablate { common, styles, ranks } => {
            if ranks.contains(&0) {
                return Err(CliError::Usage("ranks must be >= 1".into()));
            }
            let ec = eval_config(&common, &cfg)?;
            let report = run_ablation(&ec, &styles, &ranks)?;
            Ok(serde_json::to_string_pretty(&report)?)
        }
        Command::Serve { bind } => {
            if let Some(b) = bind {
                cfg.bind = b;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(service::serve(cfg))?;
            Ok(String::new())
        }
    }
}

/// Machine-readable description of a failed command, if it has one.
pub fn error_json(err: &CliError) -> Option<String> {
    match err {
        CliError::Core(CoreError::Infeasible {
            budget,
            cheapest_cost,
            cheapest_method,
        }) => Some(
            json!({
                "error": "infeasible",
                "budget": budget,
                "cheapest_cost": cheapest_cost,
                "cheapest_method": cheapest_method,
            })
            .to_string(),
        ),
        _ => None,
    }
}
