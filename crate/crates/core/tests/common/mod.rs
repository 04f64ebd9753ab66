#![allow(dead_code)]

pub mod gradcheck;

use std::path::PathBuf;

use rwr_gae::graphio::{load_cites_content, Graph, LoadOptions};
use rwr_gae::numkit::{DenseMatrix, Rng};

/// Planted partition graph with class-correlated sparse binary features (row-normalized).
pub fn planted_partition(
    seed: u64,
    class_sizes: &[usize],
    avg_degree: f64,
    homophily: f64,
    feature_dim: usize,
) -> Graph {
    let mut rng = Rng::new(seed);
    let n: usize = class_sizes.iter().sum();
    let mut labels: Vec<usize> = class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect();
    rng.shuffle(&mut labels);
    let members: Vec<Vec<usize>> = (0..class_sizes.len())
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();

    let target = (avg_degree * n as f64 / 2.0).round() as usize;
    let mut edges = std::collections::BTreeSet::new();
    while edges.len() < target {
        let i = rng.below(n);
        let j = if rng.uniform() < homophily {
            let pool = &members[labels[i]];
            pool[rng.below(pool.len())]
        } else {
            rng.below(n)
        };
        if i != j {
            edges.insert((i.min(j), i.max(j)));
        }
    }

    let pool_size = (feature_dim / class_sizes.len()).max(1);
    let pools: Vec<Vec<usize>> = (0..class_sizes.len())
        .map(|_| (0..pool_size).map(|_| rng.below(feature_dim)).collect())
        .collect();
    let mut x = DenseMatrix::zeros(n, feature_dim);
    for i in 0..n {
        for _ in 0..12 {
            let w = if rng.uniform() < 0.5 {
                pools[labels[i]][rng.below(pool_size)]
            } else {
                rng.below(feature_dim)
            };
            x.set(i, w, 1.0);
        }
        let s: f64 = x.row(i).iter().sum();
        x.row_mut(i).iter_mut().for_each(|v| *v /= s);
    }

    let mut g = Graph::from_edges(n, edges).unwrap();
    g.features = Some(x);
    g.labels = Some(labels);
    g.num_classes = Some(class_sizes.len());
    g.node_ids = (0..n).map(|i| format!("n{i}")).collect();
    g
}

/// Directory holding `<name>.content` / `<name>.cites`: `$RWR_GAE_DATA_DIR`, else `data/` at
/// the workspace root.
pub fn data_dir() -> PathBuf {
    std::env::var_os("RWR_GAE_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

pub fn load_dataset(name: &str) -> Result<Graph, String> {
    let dir = data_dir();
    let candidates = [dir.clone(), dir.join(name)];
    for d in candidates {
        let content = d.join(format!("{name}.content"));
        let cites = d.join(format!("{name}.cites"));
        if content.is_file() && cites.is_file() {
            return load_cites_content(&content, &cites, &LoadOptions::for_dataset(name))
                .map(|(g, _)| g)
                .map_err(|e| e.to_string());
        }
    }
    Err(format!(
        "dataset {name} not found under {} (set RWR_GAE_DATA_DIR)",
        dir.display()
    ))
}

/// Writes `g` in the raw citation format (`<id> <features> <label>` and `<cited> <citing>`).
pub fn write_citation_files(g: &Graph, dir: &std::path::Path, name: &str) -> (PathBuf, PathBuf) {
    use std::fmt::Write as _;
    let x = g.features.as_ref().expect("features");
    let labels = g.labels.as_ref().expect("labels");
    let mut content = String::new();
    for i in 0..g.n {
        write!(content, "{}", g.node_ids[i]).unwrap();
        for &v in x.row(i) {
            write!(content, "\t{}", if v > 0.0 { 1 } else { 0 }).unwrap();
        }
        writeln!(content, "\tclass{}", labels[i]).unwrap();
    }
    let mut cites = String::new();
    for &(i, j) in &g.edges {
        writeln!(cites, "{}\t{}", g.node_ids[i], g.node_ids[j]).unwrap();
    }
    let content_path = dir.join(format!("{name}.content"));
    let cites_path = dir.join(format!("{name}.cites"));
    std::fs::write(&content_path, content).unwrap();
    std::fs::write(&cites_path, cites).unwrap();
    (content_path, cites_path)
}
