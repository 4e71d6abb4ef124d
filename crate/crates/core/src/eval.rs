//! Hits@K and latent-space diagnostics.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{sample_negatives, Graph};

/// Fraction of positives scored strictly above the `k`-th highest negative.
pub fn hits_at_k(pos: &[f64], neg: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::Metric("k must be at least 1".into()));
    }
    if neg.len() < k {
        return Err(Error::Metric(format!(
            "hits@{k} needs at least {k} negative scores, got {}",
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|s| s.is_nan()) {
        return Err(Error::Metric("NaN score".into()));
    }
    if pos.is_empty() {
        return Err(Error::Metric("no positive scores".into()));
    }
    let mut ranked = neg.to_vec();
    let (_, &mut threshold, _) = ranked.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    let hits = pos.iter().filter(|&&s| s > threshold).count();
    Ok(hits as f64 / pos.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation; a single value has std 0.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary { mean: 0.0, std: 0.0 };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Summary { mean, std }
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Metric(format!(
            "pearson inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Metric("pearson needs at least two points".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Metric("correlation is undefined for constant input".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceStats {
    pub connected_mean: f64,
    pub connected_median: f64,
    pub unconnected_mean: f64,
    pub unconnected_median: f64,
    pub n_pairs: usize,
    #[serde(skip)]
    pub connected: Vec<f64>,
    #[serde(skip)]
    pub unconnected: Vec<f64>,
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn mean_median(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    } else {
        sorted[mid]
    };
    (mean, median)
}

/// Embedding distances of connected pairs against an equal number of unconnected pairs.
///
/// `sample` caps the connected population; 0 keeps every edge.
pub fn distance_diagnostic<R: Rng + ?Sized>(
    z: &Array2<f64>,
    g: &Graph,
    sample: usize,
    rng: &mut R,
) -> Result<DistanceStats> {
    if z.nrows() != g.n_nodes() {
        return Err(Error::Shape(format!(
            "embeddings have {} rows, graph has {} nodes",
            z.nrows(),
            g.n_nodes()
        )));
    }
    let edges = g.edges();
    let chosen: Vec<_> = if sample > 0 && sample < edges.len() {
        let mut idx = index::sample(rng, edges.len(), sample).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| edges[i]).collect()
    } else {
        edges.to_vec()
    };
    let n = g.n_nodes();
    let free = n * n.saturating_sub(1) / 2 - g.n_edges();
    let count = chosen.len().min(free);
    let negatives = sample_negatives(g, count, rng.random(), &Default::default())?;
    let dist =
        |pairs: &[(usize, usize)]| -> Vec<f64> { pairs.iter().map(|&(u, v)| euclidean(z.row(u), z.row(v))).collect() };
    let connected = dist(&chosen);
    let unconnected = dist(&negatives);
    let (connected_mean, connected_median) = mean_median(&connected);
    let (unconnected_mean, unconnected_median) = mean_median(&unconnected);
    Ok(DistanceStats {
        connected_mean,
        connected_median,
        unconnected_mean,
        unconnected_median,
        n_pairs: connected.len(),
        connected,
        unconnected,
    })
}

/// Two-column histogram rows `(bin_center, count)` over a shared range.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<(f64, usize)> {
    let bins = bins.max(1);
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = (((v - lo) / width).floor().max(0.0) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
        .collect()
}

pub const KMEANS_RESTARTS: usize = 20;
const KMEANS_MAX_ITER: usize = 300;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignments: Vec<usize>,
    pub centroids: Array2<f64>,
    pub objective: f64,
    /// Objective after every assignment step, one list per restart.
    pub histories: Vec<Vec<f64>>,
    pub restart: usize,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

fn plus_plus_seeds(z: &Array2<f64>, k: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let n = z.nrows();
    let mut centroids = Array2::zeros((k, z.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&z.row(first));
    let mut nearest: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(first))).collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, d) in nearest.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&z.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(pick)));
        }
    }
    centroids
}

fn assign(z: &Array2<f64>, centroids: &Array2<f64>) -> (Vec<usize>, f64) {
    let picks: Vec<(usize, f64)> = z
        .axis_iter(Axis(0))
        .map(|row| {
            let mut best = (0, f64::INFINITY);
            for (c, centre) in centroids.axis_iter(Axis(0)).enumerate() {
                let d = sq_dist(row, centre);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best
        })
        .collect();
    let objective = picks.iter().map(|p| p.1).sum();
    (picks.into_iter().map(|p| p.0).collect(), objective)
}

struct Lloyd {
    assignments: Vec<usize>,
    centroids: Array2<f64>,
    objective: f64,
    history: Vec<f64>,
    empty: bool,
}

fn lloyd(z: &Array2<f64>, k: usize, seed: u64) -> Lloyd {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_seeds(z, k, &mut rng);
    let (mut assignments, mut objective) = assign(z, &centroids);
    let mut history = vec![objective];
    for _ in 0..KMEANS_MAX_ITER {
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        let mut counts = vec![0usize; k];
        for (i, &c) in assignments.iter().enumerate() {
            sums.row_mut(c).scaled_add(1.0, &z.row(i));
            counts[c] += 1;
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let mean = &sums.row(c) / count as f64;
                centroids.row_mut(c).assign(&mean);
            }
        }
        let (next, obj) = assign(z, &centroids);
        history.push(obj);
        let settled = next == assignments;
        assignments = next;
        objective = obj;
        if settled {
            break;
        }
    }
    let mut counts = vec![0usize; k];
    for &c in &assignments {
        counts[c] += 1;
    }
    Lloyd {
        assignments,
        centroids,
        objective,
        history,
        empty: counts.contains(&0),
    }
}

/// k-means++ with `restarts` independent runs; keeps the lowest objective, earliest restart on ties.
/// Restarts that end with an empty cluster are discarded.
pub fn kmeans<R: Rng + ?Sized>(z: &Array2<f64>, k: usize, restarts: usize, rng: &mut R) -> Result<KMeans> {
    if k < 2 {
        return Err(Error::Precondition(format!("k-means needs k >= 2, got {k}")));
    }
    if k > z.nrows() {
        return Err(Error::Precondition(format!(
            "k-means with k = {k} needs at least {k} points, got {}",
            z.nrows()
        )));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite embedding".into()));
    }
    let seeds: Vec<u64> = (0..restarts.max(1)).map(|_| rng.random()).collect();
    let runs: Vec<Lloyd> = seeds.par_iter().map(|&s| lloyd(z, k, s)).collect();
    let histories = runs.iter().map(|r| r.history.clone()).collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.empty)
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Clustering(format!("every one of {} restarts left a cluster empty", seeds.len())))?;
    let run = &runs[best];
    Ok(KMeans {
        assignments: run.assignments.clone(),
        centroids: run.centroids.clone(),
        objective: run.objective,
        histories,
        restart: best,
    })
}

/// Newman modularity of a node partition.
pub fn modularity(g: &Graph, assignments: &[usize]) -> f64 {
    let m = g.n_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let k = assignments.iter().copied().max().map_or(0, |c| c + 1);
    let mut within = vec![0usize; k];
    let mut degree = vec![0usize; k];
    for &(u, v) in g.edges() {
        if assignments[u] == assignments[v] {
            within[assignments[u]] += 1;
        }
    }
    for (v, &c) in assignments.iter().enumerate() {
        degree[c] += g.degree(v);
    }
    within
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| e as f64 / m - (d as f64 / (2.0 * m)).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterStats {
    pub k: usize,
    pub sizes: Vec<usize>,
    /// Edge density of each cluster's induced subgraph; 0 for clusters with fewer than two nodes.
    pub densities: Vec<f64>,
    pub graph_density: f64,
    pub modularity: f64,
    pub objective: f64,
}

impl ClusterStats {
    pub fn all_denser_than_graph(&self) -> bool {
        self.densities.iter().all(|&d| d > self.graph_density)
    }
}

pub fn cluster_diagnostic<R: Rng + ?Sized>(z: &Array2<f64>, g: &Graph, k: usize, rng: &mut R) -> Result<ClusterStats> {
    if z.nrows() != g.n_nodes() {
        return Err(Error::Shape(format!(
            "embeddings have {} rows, graph has {} nodes",
            z.nrows(),
            g.n_nodes()
        )));
    }
    let km = kmeans(z, k, KMEANS_RESTARTS, rng)?;
    Ok(partition_stats(g, &km.assignments, k, km.objective))
}

fn partition_stats(g: &Graph, assignments: &[usize], k: usize, objective: f64) -> ClusterStats {
    let mut sizes = vec![0usize; k];
    let mut within = vec![0usize; k];
    for &c in assignments {
        sizes[c] += 1;
    }
    for &(u, v) in g.edges() {
        if assignments[u] == assignments[v] {
            within[assignments[u]] += 1;
        }
    }
    let densities = sizes
        .iter()
        .zip(&within)
        .map(|(&s, &e)| {
            if s < 2 {
                0.0
            } else {
                2.0 * e as f64 / (s * (s - 1)) as f64
            }
        })
        .collect();
    ClusterStats {
        k,
        sizes,
        densities,
        graph_density: g.density(),
        modularity: modularity(g, assignments),
        objective,
    }
}

/// Scores of one split's selected checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitScore {
    pub split_seed: u64,
    pub manifest_sha256: String,
    pub best_epoch: usize,
    pub valid_hits10: f64,
    pub hits: BTreeMap<usize, f64>,
    pub min_degree_original: usize,
    pub min_degree_augmented: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub hits_at_k: BTreeMap<usize, Summary>,
    pub per_split_scores: Vec<SplitScore>,
    pub min_degree_original: usize,
    pub min_degree_augmented: usize,
    pub distance_stats: Option<DistanceStats>,
    pub cluster_stats: Option<ClusterStats>,
    pub degree_hits_correlation: Option<f64>,
}

impl EvalReport {
    /// Aggregates split scores; the degree fields are taken from the first split.
    pub fn from_splits(per_split_scores: Vec<SplitScore>) -> Self {
        let mut hits_at_k = BTreeMap::new();
        if let Some(first) = per_split_scores.first() {
            for &k in first.hits.keys() {
                let vals: Vec<f64> = per_split_scores
                    .iter()
                    .filter_map(|s| s.hits.get(&k).copied())
                    .collect();
                hits_at_k.insert(k, summarize(&vals));
            }
        }
        let (dmin_o, dmin_a) = per_split_scores
            .first()
            .map_or((0, 0), |s| (s.min_degree_original, s.min_degree_augmented));
        EvalReport {
            hits_at_k,
            per_split_scores,
            min_degree_original: dmin_o,
            min_degree_augmented: dmin_a,
            distance_stats: None,
            cluster_stats: None,
            degree_hits_correlation: None,
        }
    }

    pub fn hits_mean(&self, k: usize) -> Option<f64> {
        self.hits_at_k.get(&k).map(|s| s.mean)
    }
}
