//! Random walks with restarts, per-epoch start-vertex sampling and skip-gram context windows.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphio::Edge;
use crate::numkit::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    /// Start vertices sampled per epoch (γ).
    pub walks_per_epoch: usize,
    /// Nodes per walk, start vertex included (t).
    pub walk_length: usize,
    /// Context window radius (w).
    pub window: usize,
    /// Restart probability (α).
    pub restart_prob: f64,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_epoch == 0 || self.walk_length == 0 || self.window == 0 {
            return Err(Error::config(
                "walks_per_epoch, walk_length and window must all be at least 1",
            ));
        }
        if !(0.0..=1.0).contains(&self.restart_prob) {
            return Err(Error::config(format!(
                "restart probability {} outside [0, 1]",
                self.restart_prob
            )));
        }
        Ok(())
    }
}

/// Symmetric neighbor lists without self entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyList {
    neighbors: Vec<Vec<usize>>,
}

impl AdjacencyList {
    pub fn from_edges(n: usize, edges: &[Edge]) -> Self {
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in edges {
            if i != j {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Self { neighbors }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }
}

/// A walk of exactly `t` nodes from `v0`. At each step a uniform draw `u` either moves to a
/// uniformly chosen neighbor (`u ≥ α`) or restarts at `v0`; nodes without neighbors always
/// restart.
pub fn random_walk_with_restart(
    adj: &AdjacencyList,
    v0: usize,
    t: usize,
    alpha: f64,
    rng: &mut Rng,
) -> Vec<usize> {
    let mut path = Vec::with_capacity(t);
    if t == 0 {
        return path;
    }
    path.push(v0);
    while path.len() < t {
        let current = *path.last().unwrap();
        let u = rng.uniform();
        let nbrs = adj.neighbors(current);
        if u >= alpha && !nbrs.is_empty() {
            path.push(nbrs[rng.below(nbrs.len())]);
        } else {
            path.push(v0);
        }
    }
    path
}

/// `gamma` distinct vertices drawn uniformly without replacement: the first `gamma`
/// entries of a shuffled vertex list.
pub fn sample_epoch_vertices(n: usize, gamma: usize, rng: &mut Rng) -> Result<Vec<usize>> {
    if gamma == 0 || gamma > n {
        return Err(Error::config(format!(
            "cannot sample {gamma} start vertices from {n} nodes"
        )));
    }
    let mut vertices: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut vertices);
    vertices.truncate(gamma);
    Ok(vertices)
}

/// `(path[j], path[k])` for every position `j` and every `k ≠ j` with `|k − j| ≤ w`,
/// position-major, then in increasing `k`.
pub fn context_pairs(path: &[usize], w: usize) -> Vec<(usize, usize)> {
    let len = path.len();
    let mut pairs = Vec::new();
    for j in 0..len {
        let lo = j.saturating_sub(w);
        let hi = (j + w).min(len.saturating_sub(1));
        for k in lo..=hi {
            if k != j {
                pairs.push((path[j], path[k]));
            }
        }
    }
    pairs
}

/// Writes walks one per line, node ids separated by spaces.
pub fn write_walks<W: Write>(mut out: W, walks: &[Vec<usize>]) -> std::io::Result<()> {
    for walk in walks {
        let line: Vec<String> = walk.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> AdjacencyList {
        AdjacencyList::from_edges(3, &[(0, 1), (1, 2), (0, 2)])
    }

    #[test]
    fn always_restart_and_isolated_start() {
        let adj = triangle();
        let mut rng = Rng::new(0);
        assert_eq!(
            random_walk_with_restart(&adj, 1, 8, 1.0, &mut rng),
            vec![1; 8]
        );
        let lonely = AdjacencyList::from_edges(3, &[(0, 1)]);
        assert_eq!(
            random_walk_with_restart(&lonely, 2, 5, 0.0, &mut rng),
            vec![2; 5]
        );
    }

    #[test]
    fn neighbor_choice_is_uniform() {
        let adj = triangle();
        let mut rng = Rng::new(99);
        let path = random_walk_with_restart(&adj, 0, 100_001, 0.0, &mut rng);
        // On a triangle each move picks one of two neighbors; "next = (cur + 1) % 3" is one of them.
        let forward = path.windows(2).filter(|w| w[1] == (w[0] + 1) % 3).count() as f64 / 100_000.0;
        assert!((forward - 0.5).abs() < 0.01, "{forward}");
        assert!(path.windows(2).all(|w| w[0] != w[1]));
    }

    #[test]
    fn walk_steps_follow_edges_or_restart() {
        let adj = AdjacencyList::from_edges(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 5)]);
        let mut rng = Rng::new(3);
        for v0 in 0..6 {
            let path = random_walk_with_restart(&adj, v0, 40, 0.3, &mut rng);
            assert_eq!(path.len(), 40);
            assert_eq!(path[0], v0);
            for w in path.windows(2) {
                assert!(w[1] == v0 || adj.neighbors(w[0]).contains(&w[1]));
            }
        }
    }

    #[test]
    fn epoch_sampling() {
        let mut rng = Rng::new(1);
        let mut all = sample_epoch_vertices(10, 10, &mut rng).unwrap();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
        let a = sample_epoch_vertices(50, 7, &mut Rng::new(2)).unwrap();
        let b = sample_epoch_vertices(50, 7, &mut Rng::new(2)).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            sample_epoch_vertices(3, 4, &mut rng),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn single_vertex_sampling_is_uniform() {
        let n = 10;
        let trials = 10_000;
        let mut rng = Rng::new(8);
        let mut counts = vec![0usize; n];
        for _ in 0..trials {
            counts[sample_epoch_vertices(n, 1, &mut rng).unwrap()[0]] += 1;
        }
        let p = 1.0 / n as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - trials as f64 * p).abs() < 3.0 * sigma, "{c}");
        }
    }

    #[test]
    fn window_pairs() {
        assert!(context_pairs(&[4], 3).is_empty());
        assert_eq!(
            context_pairs(&[0, 1, 2], 1),
            vec![(0, 1), (1, 0), (1, 2), (2, 1)]
        );
        assert_eq!(context_pairs(&[0, 1, 2], 5).len(), 6);
        // Restart collisions may pair v0 with itself from different positions.
        assert!(context_pairs(&[7, 7], 1).contains(&(7, 7)));
    }

    #[test]
    fn walk_dump_format() {
        let mut buf = Vec::new();
        write_walks(&mut buf, &[vec![0, 1, 2], vec![3]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0 1 2\n3\n");
    }
}
