//! Graph data model, dataset loaders, adjacency normalization and edge splits.
//!
//! Two on-disk graph formats are understood:
//!
//! * raw citation format: a content file with one `id<TAB>f1 ... fh<TAB>label` line per
//!   node and a cites file with one `cited<TAB>citing` line per citation;
//! * a generic 0-based edge list, one `i<TAB>j` pair per line.
//!
//! Edges are kept undirected, deduplicated and free of self-loops.

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{CsrMatrix, DenseMatrix, Rng};

/// Undirected edge `(i, j)` with `i < j`.
pub type Edge = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub n: usize,
    /// Sorted, deduplicated, `i < j`.
    pub edges: Vec<Edge>,
    pub features: Option<DenseMatrix>,
    pub labels: Option<Vec<usize>>,
    pub num_classes: Option<usize>,
    /// Class name for each label index, when loaded from a labelled format.
    pub class_names: Vec<String>,
    /// Original node identifiers in node order, when the source format has them.
    pub node_ids: Vec<String>,
}

/// Counters collected while loading a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    /// Edge lines read from the file (each counts as one directed entry).
    pub directed_entries: usize,
    pub undirected_edges: usize,
    pub duplicate_entries: usize,
    pub self_loops: usize,
    pub unknown_ids: usize,
}

impl LoadReport {
    pub fn warning_count(&self) -> usize {
        self.self_loops + self.unknown_ids
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Known class names; labels outside the list are rejected. When absent, classes are
    /// the sorted set of labels seen in the content file.
    pub class_names: Option<Vec<String>>,
    /// Scale every feature row to sum to one.
    pub normalize_features: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            class_names: None,
            normalize_features: true,
        }
    }
}

impl LoadOptions {
    /// Options for a named dataset, using its published class list when known.
    pub fn for_dataset(name: &str) -> Self {
        Self {
            class_names: known_classes(name).map(|c| c.iter().map(|s| s.to_string()).collect()),
            ..Self::default()
        }
    }
}

/// Class lists of the raw citation releases.
pub fn known_classes(dataset: &str) -> Option<&'static [&'static str]> {
    match dataset.to_ascii_lowercase().as_str() {
        "cora" => Some(&[
            "Case_Based",
            "Genetic_Algorithms",
            "Neural_Networks",
            "Probabilistic_Methods",
            "Reinforcement_Learning",
            "Rule_Learning",
            "Theory",
        ]),
        "citeseer" => Some(&["AI", "Agents", "DB", "HCI", "IR", "ML"]),
        "pubmed" => Some(&["1", "2", "3"]),
        _ => None,
    }
}

impl Graph {
    /// Builds a feature-less, unlabelled graph; self-loops are dropped and pairs deduplicated.
    pub fn from_edges(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut builder = EdgeSetBuilder::default();
        for (i, j) in pairs {
            if i >= n || j >= n {
                return Err(Error::config(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            builder.insert(i, j);
        }
        let (edges, _) = builder.finish();
        Ok(Self {
            n,
            edges,
            features: None,
            labels: None,
            num_classes: None,
            class_names: Vec::new(),
            node_ids: Vec::new(),
        })
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn feature_dim(&self) -> Option<usize> {
        self.features.as_ref().map(|f| f.cols())
    }

    /// Checks the structural invariants: in-range sorted edges without self-loops,
    /// feature rows matching `n`, labels inside `[0, num_classes)`.
    pub fn validate(&self) -> Result<()> {
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::config("edges not sorted and unique"));
            }
        }
        if let Some(&(i, j)) = self.edges.iter().find(|&&(i, j)| i >= j || j >= self.n) {
            return Err(Error::config(format!("invalid edge ({i}, {j})")));
        }
        if let Some(f) = &self.features {
            if f.rows() != self.n {
                return Err(Error::shape(
                    "Graph::validate",
                    format!("{} feature rows for {} nodes", f.rows(), self.n),
                ));
            }
        }
        if let Some(labels) = &self.labels {
            let k = self.num_classes.unwrap_or(0);
            if labels.len() != self.n || labels.iter().any(|&l| l >= k) {
                return Err(Error::config("labels inconsistent with num_classes"));
            }
        }
        Ok(())
    }
}

#[derive(Default)]
struct EdgeSetBuilder {
    seen: HashSet<Edge>,
    report: LoadReport,
}

impl EdgeSetBuilder {
    fn insert(&mut self, a: usize, b: usize) {
        self.report.directed_entries += 1;
        if a == b {
            self.report.self_loops += 1;
            return;
        }
        let e = (a.min(b), a.max(b));
        if !self.seen.insert(e) {
            self.report.duplicate_entries += 1;
        }
    }

    fn finish(self) -> (Vec<Edge>, LoadReport) {
        let mut edges: Vec<Edge> = self.seen.into_iter().collect();
        edges.sort_unstable();
        let mut report = self.report;
        report.undirected_edges = edges.len();
        (edges, report)
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: PathBuf::from(path),
        line,
        msg: msg.into(),
    }
}

/// Loads a graph from the raw citation format. Node order is content-file order.
pub fn load_cites_content(
    content_path: &Path,
    cites_path: &Path,
    opts: &LoadOptions,
) -> Result<(Graph, LoadReport)> {
    let content = read_to_string(content_path)?;

    let mut node_ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut feature_data: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<(usize, String)> = Vec::new();
    let mut width: Option<usize> = None;

    for (lineno, line) in content.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 2 {
            return Err(parse_err(
                content_path,
                lineno,
                "expected id, features and label",
            ));
        }
        let h = fields.len() - 2;
        match width {
            None => width = Some(h),
            Some(w) if w != h => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("{h} feature columns, expected {w}"),
                ))
            }
            _ => {}
        }
        let id = fields[0].to_string();
        if index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(parse_err(
                content_path,
                lineno,
                format!("duplicate node id {id}"),
            ));
        }
        node_ids.push(id);
        for f in &fields[1..=h] {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(content_path, lineno, format!("bad feature value {f:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(content_path, lineno, "non-finite feature value"));
            }
            feature_data.push(v);
        }
        raw_labels.push((lineno, fields[h + 1].to_string()));
    }

    let n = node_ids.len();
    let h = width.unwrap_or(0);

    let class_names: Vec<String> = match &opts.class_names {
        Some(c) => c.clone(),
        None => {
            let mut c: Vec<String> = raw_labels.iter().map(|(_, l)| l.clone()).collect();
            c.sort();
            c.dedup();
            c
        }
    };
    let class_index: HashMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut labels = Vec::with_capacity(n);
    for (lineno, l) in &raw_labels {
        match class_index.get(l.as_str()) {
            Some(&k) => labels.push(k),
            None => {
                return Err(parse_err(
                    content_path,
                    *lineno,
                    format!("label {l:?} is not a known class"),
                ))
            }
        }
    }

    let mut features = DenseMatrix::from_vec(n, h, feature_data)?;
    if opts.normalize_features {
        row_normalize(&mut features);
    }

    let cites = read_to_string(cites_path)?;
    let mut builder = EdgeSetBuilder::default();
    for (lineno, line) in cites.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(cites_path, lineno, "expected two node ids"));
        }
        match (index.get(fields[0]), index.get(fields[1])) {
            (Some(&a), Some(&b)) => builder.insert(a, b),
            _ => {
                builder.report.directed_entries += 1;
                builder.report.unknown_ids += 1;
            }
        }
    }
    let (edges, report) = builder.finish();
    if report.warning_count() > 0 {
        log::warn!(
            "{}: skipped {} citations with unknown ids and {} self-citations",
            cites_path.display(),
            report.unknown_ids,
            report.self_loops
        );
    }

    let graph = Graph {
        n,
        edges,
        features: Some(features),
        labels: Some(labels),
        num_classes: Some(class_names.len()),
        class_names,
        node_ids,
    };
    Ok((graph, report))
}

fn row_normalize(features: &mut DenseMatrix) {
    for i in 0..features.rows() {
        let row = features.row_mut(i);
        let s: f64 = row.iter().sum();
        if s != 0.0 {
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
}

/// Loads a 0-based edge list of `n` nodes. Blank lines and `#` comments are ignored.
pub fn load_edge_list(path: &Path, n: usize) -> Result<(Graph, LoadReport)> {
    let text = read_to_string(path)?;
    let mut builder = EdgeSetBuilder::default();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(path, lineno, "expected two node indices"));
        }
        let mut ends = [0usize; 2];
        for (slot, f) in ends.iter_mut().zip(&fields) {
            *slot = f
                .parse()
                .map_err(|_| parse_err(path, lineno, format!("bad node index {f:?}")))?;
            if *slot >= n {
                return Err(parse_err(
                    path,
                    lineno,
                    format!("node index {slot} out of range for {n} nodes"),
                ));
            }
        }
        builder.insert(ends[0], ends[1]);
    }
    let (edges, report) = builder.finish();
    if report.self_loops > 0 {
        log::warn!(
            "{}: dropped {} self-loops",
            path.display(),
            report.self_loops
        );
    }
    let graph = Graph {
        n,
        edges,
        features: None,
        labels: None,
        num_classes: None,
        class_names: Vec::new(),
        node_ids: Vec::new(),
    };
    Ok((graph, report))
}

/// `D̂^{-1/2} (A + I) D̂^{-1/2}` for the undirected edge list `edges` on `n` nodes.
pub fn normalized_adjacency_from_edges(n: usize, edges: &[Edge]) -> CsrMatrix {
    let mut degree = vec![1.0f64; n];
    for &(i, j) in edges {
        degree[i] += 1.0;
        degree[j] += 1.0;
    }
    let mut triplets = Vec::with_capacity(n + 2 * edges.len());
    for (i, d) in degree.iter().enumerate() {
        triplets.push((i, i, 1.0 / d));
    }
    for &(i, j) in edges {
        let v = 1.0 / (degree[i] * degree[j]).sqrt();
        triplets.push((i, j, v));
        triplets.push((j, i, v));
    }
    CsrMatrix::from_triplets(n, n, triplets).expect("edge endpoints are in range")
}

/// Binary `A + I`, the decoder's reconstruction target.
pub fn adjacency_with_self_loops(n: usize, edges: &[Edge]) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(n + 2 * edges.len());
    for i in 0..n {
        triplets.push((i, i, 1.0));
    }
    for &(i, j) in edges {
        triplets.push((i, j, 1.0));
        triplets.push((j, i, 1.0));
    }
    CsrMatrix::from_triplets(n, n, triplets).expect("edge endpoints are in range")
}

pub fn normalize_adjacency(g: &Graph) -> CsrMatrix {
    normalized_adjacency_from_edges(g.n, &g.edges)
}

/// Positive and negative edge sets for training, validation and test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    #[serde(rename = "train")]
    pub train_edges: Vec<Edge>,
    #[serde(rename = "val")]
    pub val_edges: Vec<Edge>,
    #[serde(rename = "test")]
    pub test_edges: Vec<Edge>,
    #[serde(rename = "val_neg")]
    pub val_negatives: Vec<Edge>,
    #[serde(rename = "test_neg")]
    pub test_negatives: Vec<Edge>,
}

impl EdgeSplit {
    /// Checks that this split was derived from `g`.
    pub fn validate(&self, g: &Graph) -> Result<()> {
        let all = [
            &self.train_edges,
            &self.val_edges,
            &self.test_edges,
            &self.val_negatives,
            &self.test_negatives,
        ];
        for list in all {
            if let Some(&(i, j)) = list.iter().find(|&&(i, j)| i >= j || j >= g.n) {
                return Err(Error::config(format!(
                    "split edge ({i}, {j}) invalid for a graph of {} nodes",
                    g.n
                )));
            }
        }
        let mut positives: Vec<Edge> = self
            .train_edges
            .iter()
            .chain(&self.val_edges)
            .chain(&self.test_edges)
            .copied()
            .collect();
        positives.sort_unstable();
        if positives != g.edges {
            return Err(Error::config(
                "split positives are not a partition of the graph's edges",
            ));
        }
        let edge_set: HashSet<Edge> = g.edges.iter().copied().collect();
        let mut negatives = HashSet::new();
        for &e in self.val_negatives.iter().chain(&self.test_negatives) {
            if edge_set.contains(&e) || !negatives.insert(e) {
                return Err(Error::config(format!(
                    "negative pair {e:?} is an edge or repeated"
                )));
            }
        }
        if self.val_negatives.len() != self.val_edges.len()
            || self.test_negatives.len() != self.test_edges.len()
        {
            return Err(Error::config("negative and positive counts differ"));
        }
        Ok(())
    }
}

/// Randomly partitions the edges of `g` into train / validation / test sets and samples an
/// equal number of non-edges for validation and test.
pub fn split_edges(g: &Graph, rng: &mut Rng, val_frac: f64, test_frac: f64) -> Result<EdgeSplit> {
    let valid = |f: f64| f > 0.0 && f < 1.0;
    if !valid(val_frac) || !valid(test_frac) || val_frac + test_frac >= 1.0 {
        return Err(Error::config(format!(
            "fractions must lie in (0, 1) with sum < 1 (val {val_frac}, test {test_frac})"
        )));
    }
    let e = g.edges.len();
    if e < 20 {
        return Err(Error::config(format!(
            "{e} edges is too few to split (need 20)"
        )));
    }
    let n_val = (val_frac * e as f64).round() as usize;
    let n_test = (test_frac * e as f64).round() as usize;
    if n_val == 0 || n_test == 0 || n_val + n_test >= e {
        return Err(Error::config(format!(
            "fractions give {n_val} validation and {n_test} test edges out of {e}"
        )));
    }
    let n = g.n as u128;
    let non_edges = n * (n - 1) / 2 - e as u128;
    if ((n_val + n_test) as u128) > non_edges {
        return Err(Error::config("not enough non-edges to sample negatives"));
    }

    let mut shuffled = g.edges.clone();
    rng.shuffle(&mut shuffled);
    let test_edges = shuffled[..n_test].to_vec();
    let val_edges = shuffled[n_test..n_test + n_val].to_vec();
    let train_edges = shuffled[n_test + n_val..].to_vec();

    let edge_set: HashSet<Edge> = g.edges.iter().copied().collect();
    let mut taken: HashSet<Edge> = HashSet::new();
    let mut sample = |count: usize, rng: &mut Rng| {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let a = rng.below(g.n);
            let b = rng.below(g.n);
            if a == b {
                continue;
            }
            let pair = (a.min(b), a.max(b));
            if edge_set.contains(&pair) || !taken.insert(pair) {
                continue;
            }
            out.push(pair);
        }
        out
    };
    let val_negatives = sample(n_val, rng);
    let test_negatives = sample(n_test, rng);

    Ok(EdgeSplit {
        train_edges,
        val_edges,
        test_edges,
        val_negatives,
        test_negatives,
    })
}

/// Normalized adjacency built from the training edges only.
pub fn train_adjacency(g: &Graph, split: &EdgeSplit) -> CsrMatrix {
    normalized_adjacency_from_edges(g.n, &split.train_edges)
}

/// On-disk split file: the split plus the parameters that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub num_nodes: usize,
    pub seed: u64,
    pub val_frac: f64,
    pub test_frac: f64,
    #[serde(flatten)]
    pub split: EdgeSplit,
}

pub fn save_split(path: &Path, file: &SplitFile) -> Result<()> {
    let text = serde_json::to_string(file).expect("split serializes");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_split(path: &Path) -> Result<SplitFile> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })
}
