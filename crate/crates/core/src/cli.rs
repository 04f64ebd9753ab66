//! The `rwr-gae` command-line tool: `split`, `train`, `eval` and `export`.
//!
//! Hyper-parameters resolve in three layers: command-line flags override a `--config` JSON
//! file, which overrides the dataset defaults. The config file is a flat object with the
//! field names of [`ConfigOverrides`]. Every JSON artifact echoes the resolved configuration.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::evalkit::{cluster_and_score, link_prediction};
use crate::graphio::{
    load_cites_content, load_edge_list, load_split, save_split, split_edges, Graph, LoadOptions,
    SplitFile,
};
use crate::model::{ModelKind, ModelState};
use crate::numkit::Rng;
use crate::skipgram::SkipgramMode;
use crate::trainer::{default_config, eval_rng, train, TrainConfig};

#[derive(Debug, Parser)]
#[command(
    name = "rwr-gae",
    version,
    about = "Random-walk regularized graph autoencoders"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Split edges into train/validation/test sets with sampled non-edges.
    Split(SplitArgs),
    /// Train a model and write checkpoint.json, history.jsonl and metrics.json.
    Train(TrainArgs),
    /// Evaluate a checkpoint on link prediction and/or clustering.
    Eval(EvalArgs),
    /// Write the embeddings of a checkpoint.
    Export(ExportArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DatasetArgs {
    /// Node file: `<id> <features...> <label>` per line.
    #[arg(long, requires = "cites")]
    pub content: Option<PathBuf>,
    /// Edge file of node ids: `<cited> <citing>` per line.
    #[arg(long, requires = "content")]
    pub cites: Option<PathBuf>,
    /// Plain edge list of integer node indices, as an alternative to --content/--cites.
    #[arg(long, conflicts_with_all = ["content", "cites"], requires = "num_nodes")]
    pub edges: Option<PathBuf>,
    #[arg(long)]
    pub num_nodes: Option<usize>,
    /// Dataset name used for defaults and class names (default: input file stem).
    #[arg(long)]
    pub dataset_name: Option<String>,
    /// Keep raw feature values instead of row-normalizing them.
    #[arg(long)]
    pub no_feature_norm: bool,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub val_frac: f64,
    #[arg(long, default_value_t = 0.10)]
    pub test_frac: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Training hyper-parameters that may be set by flag or config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    /// gae, vgae, rwr-gae, rwr-vgae or walks-only [default: rwr-gae]
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Hidden layer width.
    #[arg(long)]
    pub d1: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Start vertices per epoch (γ).
    #[arg(long)]
    pub walks_per_epoch: Option<usize>,
    /// Nodes per walk (t).
    #[arg(long)]
    pub walk_length: Option<usize>,
    /// Context window (w).
    #[arg(long)]
    pub window: Option<usize>,
    /// Restart probability (α).
    #[arg(long)]
    pub restart_prob: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Validation metrics every N epochs; 0 disables.
    #[arg(long)]
    pub eval_every: Option<usize>,
    /// full-softmax or negative-sampling [default: by graph size]
    #[arg(long, value_parser = parse_skipgram_mode)]
    pub skipgram_mode: Option<SkipgramMode>,
    /// Negative samples per context pair.
    #[arg(long)]
    pub negatives: Option<usize>,
    /// Learning rate of the skip-gram updates [default: --lr].
    #[arg(long)]
    pub sg_lr: Option<f64>,
    /// One optimizer step per context pair instead of per walk.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub literal_updates: Option<bool>,
}

fn parse_model(s: &str) -> Result<ModelKind> {
    s.parse()
}

fn parse_skipgram_mode(s: &str) -> Result<SkipgramMode> {
    match s.to_ascii_lowercase().replace('_', "-").as_str() {
        "full-softmax" | "full" => Ok(SkipgramMode::FullSoftmax),
        "negative-sampling" | "neg" => Ok(SkipgramMode::NegativeSampling),
        _ => Err(Error::config(format!("unknown skip-gram mode {s:?}"))),
    }
}

impl ConfigOverrides {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.into(),
            source,
        })
    }

    pub fn sets_walk_fields(&self) -> bool {
        self.walks_per_epoch.is_some()
            || self.walk_length.is_some()
            || self.window.is_some()
            || self.restart_prob.is_some()
            || self.skipgram_mode.is_some()
            || self.negatives.is_some()
            || self.sg_lr.is_some()
            || self.literal_updates.is_some()
    }

    pub fn apply(&self, c: &mut TrainConfig) {
        macro_rules! set {
            ($($field:ident).+ <- $src:ident) => {
                if let Some(v) = self.$src {
                    c.$($field).+ = v;
                }
            };
        }
        set!(epochs <- epochs);
        set!(lr <- lr);
        set!(d1 <- d1);
        set!(d <- d);
        set!(walk.walks_per_epoch <- walks_per_epoch);
        set!(walk.walk_length <- walk_length);
        set!(walk.window <- window);
        set!(walk.restart_prob <- restart_prob);
        set!(seed <- seed);
        set!(eval_every <- eval_every);
        set!(negatives <- negatives);
        set!(literal_updates <- literal_updates);
        if self.skipgram_mode.is_some() {
            c.skipgram_mode = self.skipgram_mode;
        }
        if self.sg_lr.is_some() {
            c.sg_lr = self.sg_lr;
        }
    }
}

/// Flags over file over dataset defaults. The model defaults to RWR-GAE.
pub fn resolve_config(
    dataset: &str,
    file: &ConfigOverrides,
    flags: &ConfigOverrides,
) -> Result<TrainConfig> {
    let model = flags.model.or(file.model).unwrap_or(ModelKind::RwrGae);
    let mut config = default_config(dataset, model);
    file.apply(&mut config);
    flags.apply(&mut config);
    if !model.uses_walks() && flags.sets_walk_fields() {
        log::warn!("model {model} does not use random walks; walk flags are ignored");
    }
    config.validate()?;
    Ok(config)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Split file written by `split`.
    #[arg(long)]
    pub split: PathBuf,
    /// JSON file of hyper-parameters.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: ConfigOverrides,
    /// Record wall-clock seconds per epoch in history.jsonl (makes it run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Output directory, created if absent.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalTask {
    Lp,
    Cluster,
    Both,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Split file; required for link prediction.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = EvalTask::Both)]
    pub task: EvalTask,
    /// Seed for k-means [default: the training seed].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Metrics JSON path [default: eval.json next to the checkpoint].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long, default_value = "tsv")]
    pub format: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

impl DatasetArgs {
    pub fn name(&self) -> String {
        if let Some(name) = &self.dataset_name {
            return name.clone();
        }
        self.content
            .as_deref()
            .or(self.edges.as_deref())
            .map(file_stem)
            .unwrap_or_default()
    }

    pub fn load(&self) -> Result<Graph> {
        let (graph, report) = match (&self.content, &self.cites, &self.edges) {
            (Some(content), Some(cites), None) => {
                let mut opts = LoadOptions::for_dataset(&self.name());
                opts.normalize_features = !self.no_feature_norm;
                load_cites_content(content, cites, &opts)?
            }
            (None, None, Some(edges)) => {
                let n = self
                    .num_nodes
                    .ok_or_else(|| Error::config("--edges needs --num-nodes"))?;
                load_edge_list(edges, n)?
            }
            _ => {
                return Err(Error::config(
                    "give a dataset as --content and --cites, or as --edges and --num-nodes",
                ))
            }
        };
        log::info!(
            "loaded {}: {} nodes, {} edges, {} load warnings",
            self.name(),
            graph.n,
            graph.num_edges(),
            report.warning_count()
        );
        Ok(graph)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn load_matching_split(path: &Path, graph: &Graph) -> Result<SplitFile> {
    let file = load_split(path)?;
    if file.num_nodes != graph.n {
        return Err(Error::config(format!(
            "{}: split has {} nodes but the dataset has {}",
            path.display(),
            file.num_nodes,
            graph.n
        )));
    }
    file.split.validate(graph)?;
    Ok(file)
}

pub fn cmd_split(args: &SplitArgs) -> Result<()> {
    let graph = args.data.load()?;
    let split = split_edges(
        &graph,
        &mut Rng::new(args.seed),
        args.val_frac,
        args.test_frac,
    )?;
    println!(
        "{} edges: train {}, val {} (+{} non-edges), test {} (+{} non-edges)",
        graph.num_edges(),
        split.train_edges.len(),
        split.val_edges.len(),
        split.val_negatives.len(),
        split.test_edges.len(),
        split.test_negatives.len()
    );
    save_split(
        &args.out,
        &SplitFile {
            num_nodes: graph.n,
            seed: args.seed,
            val_frac: args.val_frac,
            test_frac: args.test_frac,
            split,
        },
    )
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = match &args.config {
        Some(path) => ConfigOverrides::from_file(path)?,
        None => ConfigOverrides::default(),
    };
    let dataset = args.data.name();
    let config = resolve_config(&dataset, &file, &args.overrides)?;
    let graph = args.data.load()?;
    let split = load_matching_split(&args.split, &graph)?;

    log::info!("training {} for {} epochs", config.model, config.epochs);
    let (state, history) = train(&graph, &split.split, &config)?;

    fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    state.save(&args.out.join("checkpoint.json"))?;
    let history_path = args.out.join("history.jsonl");
    let out = fs::File::create(&history_path).map_err(|e| Error::io(&history_path, e))?;
    let mut out = BufWriter::new(out);
    history
        .write_jsonl(&mut out, args.timing)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(&history_path, e))?;

    let validation = if split.split.val_edges.is_empty() {
        None
    } else {
        Some(link_prediction(
            &state.embedding,
            &split.split.val_edges,
            &split.split.val_negatives,
        )?)
    };
    write_json(
        &args.out.join("metrics.json"),
        &json!({
            "dataset": dataset,
            "config": config,
            "seed": config.seed,
            "epochs_completed": state.epochs_completed,
            "validation": validation,
        }),
    )?;
    if let Some(v) = &validation {
        println!(
            "{} validation: auc {:.4}, ap {:.4}",
            config.model, v.auc, v.ap
        );
    }
    Ok(())
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let state = ModelState::load(&args.checkpoint)?;
    let graph = args.data.load()?;
    if state.n != graph.n {
        return Err(Error::config(format!(
            "checkpoint has {} nodes but the dataset has {}",
            state.n, graph.n
        )));
    }
    if let Some(h) = graph.feature_dim() {
        if state.feature_dim != 0 && state.feature_dim != h {
            return Err(Error::config(format!(
                "checkpoint expects {} features but the dataset has {h}",
                state.feature_dim
            )));
        }
    }
    let seed = args.seed.unwrap_or(state.config.seed);

    let lp = if args.task != EvalTask::Cluster {
        let path = args
            .split
            .as_ref()
            .ok_or_else(|| Error::config("link prediction needs --split"))?;
        let split = load_matching_split(path, &graph)?;
        let report = link_prediction(
            &state.embedding,
            &split.split.test_edges,
            &split.split.test_negatives,
        )?;
        println!("test auc  {:.4}", report.auc);
        println!("test ap   {:.4}", report.ap);
        Some(report)
    } else {
        None
    };

    let clustering = if args.task != EvalTask::Lp {
        let labels = graph
            .labels
            .as_ref()
            .ok_or_else(|| Error::config("clustering needs node labels"))?;
        let k = graph.num_classes.unwrap_or(0);
        let report = cluster_and_score(&state.embedding, labels, k, &mut eval_rng(seed))?;
        println!("clusters  {}", report.num_clusters);
        println!("acc       {:.4}", report.acc);
        println!("nmi       {:.4}", report.nmi);
        println!("f1        {:.4}", report.f1);
        println!("precision {:.4}", report.precision);
        println!("ari       {:.4}", report.ari);
        println!("intra     {:.4}", report.intra_cluster_distance);
        Some(report)
    } else {
        None
    };

    let out = match &args.out {
        Some(p) => p.clone(),
        None => args
            .checkpoint
            .parent()
            .unwrap_or(Path::new("."))
            .join("eval.json"),
    };
    write_json(
        &out,
        &json!({
            "config": state.config,
            "seed": seed,
            "link_prediction": lp,
            "clustering": clustering,
        }),
    )
}

pub fn cmd_export(args: &ExportArgs) -> Result<()> {
    if args.format != "tsv" {
        return Err(Error::config(format!(
            "unsupported export format {:?} (supported: tsv)",
            args.format
        )));
    }
    let state = ModelState::load(&args.checkpoint)?;
    let file = fs::File::create(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let mut out = BufWriter::new(file);
    let z = &state.embedding;
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        for i in 0..z.rows() {
            match state.node_ids.get(i) {
                Some(id) => write!(out, "{id}")?,
                None => write!(out, "{i}")?,
            }
            for v in z.row(i) {
                write!(out, "\t{v}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(&args.out, e))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Export(a) => cmd_export(a),
    }
}
