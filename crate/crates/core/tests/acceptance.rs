//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any criterion fails.
//!
//! Criteria 3 to 8 train on the Cora and Citeseer citation datasets, read from
//! `$RWR_GAE_DATA_DIR` (or `data/` at the workspace root) as `<name>.content` and
//! `<name>.cites`. They fail when the files are absent.

mod common;

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::gradcheck;
use rwr_gae::evalkit::{
    adjusted_rand_index, cluster_and_score, clustering_accuracy, link_prediction, nmi, roc_auc,
    ClusterReport, LinkPredReport,
};
use rwr_gae::graphio::{split_edges, Graph};
use rwr_gae::model::ModelKind;
use rwr_gae::numkit::Rng;
use rwr_gae::skipgram::SkipgramMode;
use rwr_gae::trainer::{default_config, eval_rng, train, TrainHistory};

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn check(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self::check(false, detail)
    }
}

// ---------------------------------------------------------------------------------------
// 1. gradients

fn gradient_suite() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        worst = worst
            .max(gradcheck::reconstruction(seed))
            .max(gradcheck::kl(seed))
            .max(gradcheck::skipgram(seed, SkipgramMode::FullSoftmax))
            .max(gradcheck::composite(seed, false))
            .max(gradcheck::composite(seed, true));
    }
    let elapsed = started.elapsed();
    Outcome::check(
        worst < 1e-4 && elapsed < Duration::from_secs(60),
        format!("worst relative error {worst:.2e} (< 1e-4), {elapsed:.1?} (< 60s)"),
    )
}

// ---------------------------------------------------------------------------------------
// 2. metric oracles

fn metric_oracles() -> Outcome {
    let mut failures = Vec::new();

    let mut rng = Rng::new(2024);
    for instance in 0..200 {
        let total = 2 + rng.below(49);
        let n_pos = 1 + rng.below(total - 1);
        let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.below(8) as f64).collect() };
        let pos = draw(n_pos);
        let neg = draw(total - n_pos);
        let mut twice = 0usize;
        for p in &pos {
            for q in &neg {
                twice += if p > q {
                    2
                } else if p == q {
                    1
                } else {
                    0
                };
            }
        }
        let brute = twice as f64 / (2 * pos.len() * neg.len()) as f64;
        if roc_auc(&pos, &neg) != brute {
            failures.push(format!("auc instance {instance}"));
        }
    }

    // contingency fixture A: clusters {0,1}, {2,3}, {4,5} against classes {0,1,2}, {3,4,5}
    let labels = [0, 0, 0, 1, 1, 1];
    let pred = [0, 0, 1, 1, 2, 2];
    let ln = f64::ln;
    let fixture_a = [
        (
            "acc",
            clustering_accuracy(&pred, &labels).unwrap(),
            4.0 / 6.0,
        ),
        (
            "ari",
            adjusted_rand_index(&pred, &labels).unwrap(),
            8.0 / 33.0,
        ),
        (
            "nmi",
            nmi(&pred, &labels).unwrap(),
            (4.0 / 3.0) * ln(2.0) / ln(6.0),
        ),
    ];
    // fixture B: 10 points, class sizes 4/3/3, cluster sizes 3/3/4
    let labels_b = [0, 0, 0, 0, 1, 1, 1, 2, 2, 2];
    let pred_b = [1, 1, 1, 0, 0, 0, 2, 2, 2, 2];
    let mi_b = 0.6 * ln(2.5) + 0.2 * ln(10.0 / 12.0) + 0.2 * ln(20.0 / 9.0);
    let h_b = -(0.4 * ln(0.4) + 0.6 * ln(0.3));
    let fixture_b = [
        ("acc", clustering_accuracy(&pred_b, &labels_b).unwrap(), 0.8),
        (
            "ari",
            adjusted_rand_index(&pred_b, &labels_b).unwrap(),
            19.0 / 44.0,
        ),
        ("nmi", nmi(&pred_b, &labels_b).unwrap(), mi_b / h_b),
    ];
    for (name, got, want) in fixture_a.iter().chain(&fixture_b) {
        if (got - want).abs() > 1e-12 {
            failures.push(format!("{name} {got} != {want}"));
        }
    }

    let base: Vec<usize> = (0..60).map(|i| i % 7).collect();
    for seed in 0..10 {
        let mut perm: Vec<usize> = (0..7).collect();
        Rng::new(seed).shuffle(&mut perm);
        let permuted: Vec<usize> = base.iter().map(|&l| perm[l]).collect();
        if clustering_accuracy(&permuted, &base).unwrap() != 1.0 {
            failures.push(format!("hungarian permutation {seed}"));
        }
    }

    if failures.is_empty() {
        Outcome::check(
            true,
            "200 AUC instances, 2 contingency fixtures, 10 permutations exact",
        )
    } else {
        Outcome::fail(failures.join("; "))
    }
}

// ---------------------------------------------------------------------------------------
// Real-data runs, shared between criteria.

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum Variant {
    Default,
    Epochs200,
    ShortWalks,
}

struct Run {
    test: LinkPredReport,
    clusters: ClusterReport,
    history: TrainHistory,
    elapsed: Duration,
}

#[derive(Default)]
struct Runs {
    graphs: HashMap<&'static str, Result<Graph, String>>,
    runs: HashMap<(&'static str, ModelKind, u64, Variant), Run>,
}

impl Runs {
    fn graph(&mut self, dataset: &'static str) -> Result<&Graph, String> {
        self.graphs
            .entry(dataset)
            .or_insert_with(|| common::load_dataset(dataset))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn get(
        &mut self,
        dataset: &'static str,
        model: ModelKind,
        seed: u64,
        variant: Variant,
    ) -> Result<&Run, String> {
        let key = (dataset, model, seed, variant);
        if !self.runs.contains_key(&key) {
            let g = self.graph(dataset)?.clone();
            let run = train_and_evaluate(&g, dataset, model, seed, variant)?;
            self.runs.insert(key, run);
        }
        Ok(&self.runs[&key])
    }

    fn seeds(
        &mut self,
        dataset: &'static str,
        model: ModelKind,
        seeds: &[u64],
        variant: Variant,
    ) -> Result<Vec<&Run>, String> {
        for &s in seeds {
            self.get(dataset, model, s, variant)?;
        }
        Ok(seeds
            .iter()
            .map(|&s| &self.runs[&(dataset, model, s, variant)])
            .collect())
    }
}

fn train_and_evaluate(
    g: &Graph,
    dataset: &str,
    model: ModelKind,
    seed: u64,
    variant: Variant,
) -> Result<Run, String> {
    let started = Instant::now();
    let split = split_edges(g, &mut Rng::new(seed), 0.05, 0.10).map_err(|e| e.to_string())?;
    let mut config = default_config(dataset, model);
    config.seed = seed;
    match variant {
        Variant::Default => {}
        Variant::Epochs200 => config.epochs = 200,
        Variant::ShortWalks => {
            config.walk.walks_per_epoch = 5;
            config.walk.walk_length = 5;
            config.walk.window = 5;
        }
    }
    let (state, history) = train(g, &split, &config).map_err(|e| e.to_string())?;
    let test = link_prediction(&state.embedding, &split.test_edges, &split.test_negatives)
        .map_err(|e| e.to_string())?;
    let labels = g.labels.as_ref().ok_or("dataset has no labels")?;
    let k = g.num_classes.ok_or("dataset has no classes")?;
    let clusters = cluster_and_score(&state.embedding, labels, k, &mut eval_rng(seed))
        .map_err(|e| e.to_string())?;
    Ok(Run {
        test,
        clusters,
        history,
        elapsed: started.elapsed(),
    })
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.into_iter().collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn best(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

macro_rules! try_runs {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(msg) => return Outcome::fail(msg),
        }
    };
}

// 3. Cora link prediction
fn cora_link_prediction(runs: &mut Runs) -> Outcome {
    let rwr = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS, Variant::Default));
    let rwr_auc = mean(rwr.iter().map(|r| r.test.auc));
    let rwr_ap = mean(rwr.iter().map(|r| r.test.ap));
    let slowest = rwr.iter().map(|r| r.elapsed).max().unwrap();
    let gae = try_runs!(runs.seeds("cora", ModelKind::Gae, &SEEDS, Variant::Default));
    let gae_auc = mean(gae.iter().map(|r| r.test.auc));
    Outcome::check(
        rwr_auc >= 0.90 && rwr_ap >= 0.90 && gae_auc >= 0.89 && slowest < Duration::from_secs(900),
        format!(
            "rwr-gae mean auc {rwr_auc:.4} ap {rwr_ap:.4} (>= 0.90), gae mean auc {gae_auc:.4} \
             (>= 0.89), slowest run {slowest:.0?} (< 15 min)"
        ),
    )
}

// 4. Cora clustering
fn cora_clustering(runs: &mut Runs) -> Outcome {
    let rwr = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS, Variant::Default));
    let best_acc = best(rwr.iter().map(|r| r.clusters.acc));
    let best_nmi = best(rwr.iter().map(|r| r.clusters.nmi));
    let rwr_mean = mean(rwr.iter().map(|r| r.clusters.acc));
    let gae = try_runs!(runs.seeds("cora", ModelKind::Gae, &SEEDS, Variant::Default));
    let gae_mean = mean(gae.iter().map(|r| r.clusters.acc));
    Outcome::check(
        best_acc >= 0.60 && best_nmi >= 0.42 && rwr_mean > gae_mean,
        format!(
            "best acc {best_acc:.4} (>= 0.60), best nmi {best_nmi:.4} (>= 0.42), mean acc \
             rwr-gae {rwr_mean:.4} vs gae {gae_mean:.4}"
        ),
    )
}

// 5. Citeseer clustering
fn citeseer_clustering(runs: &mut Runs) -> Outcome {
    let rwr = try_runs!(runs.seeds("citeseer", ModelKind::RwrGae, &SEEDS, Variant::Default));
    let best_acc = best(rwr.iter().map(|r| r.clusters.acc));
    let best_nmi = best(rwr.iter().map(|r| r.clusters.nmi));
    Outcome::check(
        best_acc >= 0.55 && best_nmi >= 0.30,
        format!("best acc {best_acc:.4} (>= 0.55), best nmi {best_nmi:.4} (>= 0.30)"),
    )
}

// 6. intra-cluster distance
fn intra_cluster_distance(runs: &mut Runs) -> Outcome {
    let rwr = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS, Variant::Default));
    let rwr_d = mean(rwr.iter().map(|r| r.clusters.intra_cluster_distance));
    let gae = try_runs!(runs.seeds("cora", ModelKind::Gae, &SEEDS, Variant::Default));
    let gae_d = mean(gae.iter().map(|r| r.clusters.intra_cluster_distance));
    Outcome::check(
        rwr_d < gae_d,
        format!("mean intra-cluster distance rwr-gae {rwr_d:.4} < gae {gae_d:.4}"),
    )
}

// 7. convergence by epoch 100
fn convergence(runs: &mut Runs) -> Outcome {
    let long = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS[..3], Variant::Epochs200));
    let mut gaps = Vec::new();
    for run in long {
        let at = |epoch: usize| run.history.records[epoch - 1].val_auc.unwrap_or(f64::NAN);
        gaps.push((at(100) - at(200)).abs());
    }
    let worst = best(gaps.iter().copied());
    Outcome::check(
        worst <= 0.01,
        format!("|val auc@100 - val auc@200| per seed {gaps:.4?}, worst {worst:.4} (<= 0.01)"),
    )
}

// 8. short walks degrade clustering
fn short_walks(runs: &mut Runs) -> Outcome {
    let short = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS, Variant::ShortWalks));
    let short_acc = mean(short.iter().map(|r| r.clusters.acc));
    let default = try_runs!(runs.seeds("cora", ModelKind::RwrGae, &SEEDS, Variant::Default));
    let default_acc = mean(default.iter().map(|r| r.clusters.acc));
    Outcome::check(
        short_acc <= default_acc - 0.15,
        format!(
            "mean acc with walks/length/window = 5: {short_acc:.4}, default {default_acc:.4} \
             (gap >= 0.15)"
        ),
    )
}

// ---------------------------------------------------------------------------------------
// 9. determinism of every command

fn pipeline(root: &Path, content: &Path, cites: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_rwr-gae");
    let run = |args: Vec<String>| -> Result<(), String> {
        let o = Command::new(bin)
            .args(&args)
            .output()
            .map_err(|e| e.to_string())?;
        if o.status.success() {
            Ok(())
        } else {
            Err(format!("{args:?}: {}", String::from_utf8_lossy(&o.stderr)))
        }
    };
    let p = |name: &str| root.join(name).display().to_string();
    let data = || {
        vec![
            "--content".to_string(),
            content.display().to_string(),
            "--cites".to_string(),
            cites.display().to_string(),
        ]
    };
    run([
        vec!["split".into()],
        data(),
        vec!["--seed".into(), "3".into(), "--out".into(), p("split.json")],
    ]
    .concat())?;
    let runs = [
        ("rwr-vgae", vec![]),
        ("walks-only", vec![]),
        (
            "rwr-gae",
            vec![
                "--skipgram-mode".to_string(),
                "negative-sampling".to_string(),
            ],
        ),
    ];
    for (model, extra) in runs {
        let out = p(model);
        let train_args = [
            vec!["train".to_string()],
            data(),
            [
                "--split",
                &p("split.json"),
                "--model",
                model,
                "--seed",
                "11",
                "--epochs",
                "4",
            ]
            .map(String::from)
            .to_vec(),
            [
                "--walks-per-epoch",
                "6",
                "--walk-length",
                "10",
                "--window",
                "4",
                "--out",
                &out,
            ]
            .map(String::from)
            .to_vec(),
            extra,
        ]
        .concat();
        run(train_args)?;
        let ckpt = format!("{out}/checkpoint.json");
        run([
            vec!["eval".into(), "--checkpoint".into(), ckpt.clone()],
            data(),
            [
                "--split",
                &p("split.json"),
                "--task",
                "both",
                "--out",
                &format!("{out}/eval.json"),
            ]
            .map(String::from)
            .to_vec(),
        ]
        .concat())?;
        run([
            "export",
            "--checkpoint",
            &ckpt,
            "--format",
            "tsv",
            "--out",
            &format!("{out}/embeddings.tsv"),
        ]
        .map(String::from)
        .to_vec())?;
    }
    Ok(())
}

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let g = common::planted_partition(99, &[50, 50, 50, 50], 6.0, 0.85, 80);
    let (content, cites) = common::write_citation_files(&g, tmp.path(), "toy");
    let mut trees = Vec::new();
    for name in ["first", "second"] {
        let root = tmp.path().join(name);
        fs::create_dir_all(&root).unwrap();
        if let Err(e) = pipeline(&root, &content, &cites) {
            return Outcome::fail(e);
        }
        trees.push(collect_files(&root));
    }
    let differing: Vec<&str> = trees[0]
        .iter()
        .zip(&trees[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    Outcome::check(
        trees[0].len() == trees[1].len() && differing.is_empty(),
        format!(
            "{} artifacts from split/train/eval/export compared, differing: {differing:?}",
            trees[0].len()
        ),
    )
}

fn main() {
    let mut runs = Runs::default();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Runs) -> Outcome>)> = vec![
        ("gradient suite", Box::new(|_| gradient_suite())),
        ("metric oracles", Box::new(|_| metric_oracles())),
        ("cora link prediction", Box::new(cora_link_prediction)),
        ("cora clustering", Box::new(cora_clustering)),
        ("citeseer clustering", Box::new(citeseer_clustering)),
        ("intra-cluster distance", Box::new(intra_cluster_distance)),
        ("convergence by epoch 100", Box::new(convergence)),
        ("short walks degrade clustering", Box::new(short_walks)),
        ("byte-identical artifacts", Box::new(|_| determinism())),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.into_iter().enumerate() {
        let outcome = criterion(&mut runs);
        let verdict = if outcome.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] {}. {name}: {}", i + 1, outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("acceptance: {failed} of 9 criteria failed");
    if failed > 0 {
        std::process::exit(1);
    }
}
