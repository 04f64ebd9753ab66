//! Joint training loop.
//!
//! Each epoch runs in a fixed order:
//!
//! 1. sample γ start vertices;
//! 2. for every start vertex: random walk with restarts, context pairs, a fresh encoder
//!    forward pass, skip-gram loss, and one update of the context table and the encoder
//!    (one step per walk, or one per pair with `literal_updates`);
//! 3. a fresh forward pass, reconstruction loss (plus KL for variational encoders) and one
//!    update of the encoder.
//!
//! Plain GAE/VGAE skip step 2; walks-only training skips step 3 and learns a free embedding
//! table instead of a GCN encoder.
//!
//! Randomness comes from independent streams of the configured seed (initialization, walks,
//! negative samples, reparameterization noise, evaluation), so a run is reproducible bit for
//! bit.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evalkit::link_prediction;
use crate::gcn_autoencoder::{
    encode, encode_mean, encoder_backward, kl_loss, reconstruction_loss, EncoderInputs,
    EncoderOptim, EncoderParams, ReconTarget,
};
use crate::graphio::{train_adjacency, EdgeSplit, Graph};
use crate::model::{Embedder, ModelKind, ModelState, RngStates};
use crate::numkit::{glorot_init, AdamState, CsrMatrix, DenseMatrix, Rng};
use crate::skipgram::{
    apply_skipgram_update, skipgram_loss_and_grads, ContextTable, EmbedderUpdate,
    NoiseDistribution, SkipgramBatch, SkipgramMode,
};
use crate::walks::{
    context_pairs, random_walk_with_restart, sample_epoch_vertices, AdjacencyList, WalkConfig,
};

/// Graphs up to this size use the exact softmax by default.
pub const FULL_SOFTMAX_MAX_NODES: usize = 5000;

const STREAM_INIT: u64 = 0;
const STREAM_WALKS: u64 = 1;
const STREAM_NEGATIVES: u64 = 2;
const STREAM_NOISE: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub epochs: usize,
    pub lr: f64,
    pub d1: usize,
    pub d: usize,
    pub walk: WalkConfig,
    pub seed: u64,
    /// Validation metrics every this many epochs (and after the last); 0 disables them.
    pub eval_every: usize,
    /// Skip-gram objective; chosen from the graph size when absent.
    pub skipgram_mode: Option<SkipgramMode>,
    pub negatives: usize,
    /// Skip-gram learning rate; `lr` when absent.
    pub sg_lr: Option<f64>,
    /// One optimizer step per context pair instead of per walk.
    pub literal_updates: bool,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if !(self.lr > 0.0) || self.sg_lr.is_some_and(|r| !(r > 0.0)) {
            return Err(Error::config("learning rates must be positive"));
        }
        if self.d1 == 0 || self.d == 0 {
            return Err(Error::config("layer dimensions must be positive"));
        }
        if self.model.uses_walks() {
            self.walk.validate()?;
            if self.skipgram_mode == Some(SkipgramMode::NegativeSampling) && self.negatives == 0 {
                return Err(Error::config("negative sampling needs negatives >= 1"));
            }
        }
        Ok(())
    }

    pub fn skipgram_mode_for(&self, n: usize) -> SkipgramMode {
        self.skipgram_mode
            .unwrap_or(if n <= FULL_SOFTMAX_MAX_NODES {
                SkipgramMode::FullSoftmax
            } else {
                SkipgramMode::NegativeSampling
            })
    }
}

/// Whether `name` has tuned defaults in [`default_config`].
pub fn is_known_dataset(name: &str) -> bool {
    matches!(
        name.to_ascii_lowercase().as_str(),
        "cora" | "citeseer" | "pubmed"
    )
}

/// Default hyper-parameters for a dataset and model.
///
/// γ = 50 start vertices per epoch; window = walk length = 30 on Cora and 20 elsewhere;
/// 100 epochs for walk-regularized models and 200 for plain autoencoders; lr 0.01; 32/16
/// hidden/latent units; restart probability 0.
pub fn default_config(dataset: &str, model: ModelKind) -> TrainConfig {
    let span = if dataset.eq_ignore_ascii_case("cora") {
        30
    } else {
        20
    };
    if !is_known_dataset(dataset) {
        log::warn!("no tuned defaults for dataset {dataset:?}; using generic defaults");
    }
    TrainConfig {
        model,
        epochs: if model.uses_walks() { 100 } else { 200 },
        lr: 0.01,
        d1: 32,
        d: 16,
        walk: WalkConfig {
            walks_per_epoch: 50,
            walk_length: span,
            window: span,
            restart_prob: 0.0,
        },
        seed: 0,
        eval_every: 1,
        skipgram_mode: None,
        negatives: 5,
        sg_lr: None,
        literal_updates: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon_loss: Option<f64>,
    pub kl_loss: Option<f64>,
    pub sg_loss: Option<f64>,
    pub val_auc: Option<f64>,
    pub val_ap: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    /// One JSON object per epoch. Wall-clock time varies between runs, so it is written only
    /// when `include_timing` is set (`"seconds": null` otherwise).
    pub fn write_jsonl<W: Write>(&self, mut out: W, include_timing: bool) -> std::io::Result<()> {
        for r in &self.records {
            let mut value = serde_json::to_value(r).expect("record serializes");
            if !include_timing {
                value["seconds"] = serde_json::Value::Null;
            }
            writeln!(out, "{value}")?;
        }
        Ok(())
    }

    pub fn last_val_auc(&self) -> Option<f64> {
        self.records.iter().rev().find_map(|r| r.val_auc)
    }
}

/// Progress notifications, in the order updates are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainEvent {
    SkipgramStep { epoch: usize, walk: usize },
    ReconstructionStep { epoch: usize },
    EpochEnd { epoch: usize },
}

pub fn train(
    graph: &Graph,
    split: &EdgeSplit,
    config: &TrainConfig,
) -> Result<(ModelState, TrainHistory)> {
    train_with_observer(graph, split, config, &mut |_| {})
}

/// Encoder inputs for `graph` restricted to the training edges. Graphs without features get
/// one-hot features.
pub fn encoder_inputs(graph: &Graph, split: &EdgeSplit) -> Result<EncoderInputs> {
    let a_norm = train_adjacency(graph, split);
    match &graph.features {
        Some(x) => EncoderInputs::new(CsrMatrix::from_dense(x), a_norm),
        None => Ok(EncoderInputs::with_identity_features(a_norm)),
    }
}

fn check_finite(epoch: usize, component: &str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite {
            epoch,
            component: component.to_string(),
        })
    }
}

struct Trainer<'a> {
    config: &'a TrainConfig,
    inputs: Option<EncoderInputs>,
    target: Option<ReconTarget>,
    adjacency: AdjacencyList,
    embedder: Embedder,
    context: Option<ContextTable>,
    context_optim: Option<AdamState>,
    walk_rng: Rng,
    negative_rng: Rng,
    noise_rng: Rng,
    occurrences: Vec<u64>,
    n: usize,
}

impl Trainer<'_> {
    fn current_embedding(&mut self) -> Result<DenseMatrix> {
        match &self.embedder {
            Embedder::Gcn { params, .. } => {
                Ok(encode_mean(self.inputs.as_ref().unwrap(), params)?.mu)
            }
            Embedder::Free { embedding, .. } => Ok(embedding.clone()),
        }
    }

    fn skipgram_step(
        &mut self,
        epoch: usize,
        pairs: Vec<(usize, usize)>,
        mode: SkipgramMode,
    ) -> Result<f64> {
        let noise = match mode {
            SkipgramMode::NegativeSampling => {
                Some(NoiseDistribution::from_counts(&self.occurrences)?)
            }
            SkipgramMode::FullSoftmax => None,
        };
        let batch = SkipgramBatch {
            pairs,
            negatives_per_pair: self.config.negatives,
            mode,
            noise: noise.as_ref(),
        };
        let table = self.context.as_mut().unwrap();
        let table_optim = self.context_optim.as_mut().unwrap();
        match &mut self.embedder {
            Embedder::Gcn { params, optim } => {
                let inputs = self.inputs.as_ref().unwrap();
                let output = encode(inputs, params, &mut self.noise_rng)?;
                let grads =
                    skipgram_loss_and_grads(&output.z, table, &batch, &mut self.negative_rng)?;
                check_finite(epoch, "skip-gram loss", grads.loss)?;
                apply_skipgram_update(
                    &grads,
                    table,
                    table_optim,
                    EmbedderUpdate::Encoder {
                        inputs,
                        params,
                        output: &output,
                        optim,
                    },
                )?;
                Ok(grads.loss)
            }
            Embedder::Free { embedding, optim } => {
                let grads =
                    skipgram_loss_and_grads(embedding, table, &batch, &mut self.negative_rng)?;
                check_finite(epoch, "skip-gram loss", grads.loss)?;
                apply_skipgram_update(
                    &grads,
                    table,
                    table_optim,
                    EmbedderUpdate::Free { embedding, optim },
                )?;
                Ok(grads.loss)
            }
        }
    }

    fn walk_phase(&mut self, epoch: usize, observer: &mut dyn FnMut(&TrainEvent)) -> Result<f64> {
        let walk = self.config.walk;
        let mode = self.config.skipgram_mode_for(self.n);
        let starts = sample_epoch_vertices(self.n, walk.walks_per_epoch, &mut self.walk_rng)?;
        let mut total = 0.0;
        let mut steps = 0usize;
        for (k, &v0) in starts.iter().enumerate() {
            let path = random_walk_with_restart(
                &self.adjacency,
                v0,
                walk.walk_length,
                walk.restart_prob,
                &mut self.walk_rng,
            );
            for &v in &path {
                self.occurrences[v] += 1;
            }
            let pairs = context_pairs(&path, walk.window);
            if pairs.is_empty() {
                continue;
            }
            if self.config.literal_updates {
                for pair in pairs {
                    total += self.skipgram_step(epoch, vec![pair], mode)?;
                    steps += 1;
                }
            } else {
                total += self.skipgram_step(epoch, pairs, mode)?;
                steps += 1;
            }
            observer(&TrainEvent::SkipgramStep { epoch, walk: k });
        }
        Ok(if steps > 0 { total / steps as f64 } else { 0.0 })
    }

    fn reconstruction_phase(&mut self, epoch: usize) -> Result<(f64, Option<f64>)> {
        let Embedder::Gcn { params, optim } = &mut self.embedder else {
            unreachable!("reconstruction requires a GCN encoder");
        };
        let inputs = self.inputs.as_ref().unwrap();
        let target = self.target.as_ref().unwrap();
        let output = encode(inputs, params, &mut self.noise_rng)?;
        let recon = reconstruction_loss(&output.z, target)?;
        check_finite(epoch, "reconstruction loss", recon.value)?;
        let kl = match &output.logvar {
            Some(lv) => {
                // KL over n², the same scale as the per-entry reconstruction mean.
                let kl = kl_loss(&output.mu, lv, self.n * self.n)?;
                check_finite(epoch, "KL loss", kl.value)?;
                Some(kl)
            }
            None => None,
        };
        let grads = encoder_backward(inputs, params, &output, &recon.grad_z, kl.as_ref())?;
        optim.step(params, &grads)?;
        if !params.is_finite() {
            return Err(Error::NonFinite {
                epoch,
                component: "encoder weights".into(),
            });
        }
        Ok((recon.value, kl.map(|k| k.value)))
    }
}

/// Trains `config.model` on the training edges of `split`, calling `observer` after every
/// parameter update and at the end of each epoch.
pub fn train_with_observer(
    graph: &Graph,
    split: &EdgeSplit,
    config: &TrainConfig,
    observer: &mut dyn FnMut(&TrainEvent),
) -> Result<(ModelState, TrainHistory)> {
    config.validate()?;
    graph.validate()?;
    let n = graph.n;
    let model = config.model;
    if model.uses_walks() && config.walk.walks_per_epoch > n {
        return Err(Error::config(format!(
            "{} walks per epoch exceeds the {n} nodes",
            config.walk.walks_per_epoch
        )));
    }
    let root = Rng::new(config.seed);
    let mut init_rng = root.fork(STREAM_INIT);

    let (inputs, target, embedder) = if model.uses_autoencoder() {
        let inputs = encoder_inputs(graph, split)?;
        let params = EncoderParams::init(
            inputs.feature_dim(),
            config.d1,
            config.d,
            model.is_variational(),
            &mut init_rng,
        );
        let optim = EncoderOptim::new(&params, config.lr);
        let target = ReconTarget::new(n, &split.train_edges);
        (Some(inputs), Some(target), Embedder::Gcn { params, optim })
    } else {
        let embedding = glorot_init(n, config.d, &mut init_rng);
        let optim = AdamState::for_param(&embedding, config.sg_lr.unwrap_or(config.lr));
        (None, None, Embedder::Free { embedding, optim })
    };
    let feature_dim = inputs.as_ref().map_or(0, |i| i.feature_dim());

    let (context, context_optim) = if model.uses_walks() {
        let table = ContextTable::zeros(n, config.d);
        let optim = AdamState::for_param(&table.c, config.sg_lr.unwrap_or(config.lr));
        (Some(table), Some(optim))
    } else {
        (None, None)
    };

    let mut trainer = Trainer {
        config,
        inputs,
        target,
        adjacency: AdjacencyList::from_edges(n, &split.train_edges),
        embedder,
        context,
        context_optim,
        walk_rng: root.fork(STREAM_WALKS),
        negative_rng: root.fork(STREAM_NEGATIVES),
        noise_rng: root.fork(STREAM_NOISE),
        occurrences: vec![0; n],
        n,
    };

    let mut history = TrainHistory::default();
    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let sg_loss = if model.uses_walks() {
            Some(trainer.walk_phase(epoch, observer)?)
        } else {
            None
        };
        let (recon_loss, kl_loss) = if model.uses_autoencoder() {
            let (r, k) = trainer.reconstruction_phase(epoch)?;
            observer(&TrainEvent::ReconstructionStep { epoch });
            (Some(r), k)
        } else {
            None.unzip()
        };

        let evaluate = config.eval_every > 0
            && (epoch % config.eval_every == 0 || epoch == config.epochs)
            && !split.val_edges.is_empty();
        let (val_auc, val_ap) = if evaluate {
            let z = trainer.current_embedding()?;
            if !z.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    component: "embedding".into(),
                });
            }
            let report = link_prediction(&z, &split.val_edges, &split.val_negatives)?;
            (Some(report.auc), Some(report.ap))
        } else {
            (None, None)
        };
        history.records.push(EpochRecord {
            epoch,
            recon_loss,
            kl_loss,
            sg_loss,
            val_auc,
            val_ap,
            seconds: started.elapsed().as_secs_f64(),
        });
        observer(&TrainEvent::EpochEnd { epoch });
        log::debug!(
            "epoch {epoch}: recon {recon_loss:?} kl {kl_loss:?} sg {sg_loss:?} val_auc {val_auc:?}"
        );
    }

    let embedding = trainer.current_embedding()?;
    let state = ModelState {
        config: config.clone(),
        n,
        feature_dim,
        embedder: trainer.embedder,
        context: trainer.context,
        context_optim: trainer.context_optim,
        rng: RngStates {
            walks: trainer.walk_rng.state(),
            negatives: trainer.negative_rng.state(),
            noise: trainer.noise_rng.state(),
        },
        epochs_completed: config.epochs,
        embedding,
        node_ids: graph.node_ids.clone(),
    };
    Ok((state, history))
}

/// Stream reserved for evaluation draws (k-means seeding) derived from a run seed.
pub fn eval_rng(seed: u64) -> Rng {
    Rng::new(seed).fork(4)
}
