//! Edge balancing augmentation.
//!
//! Each node prunes the incident edges its current model is least confident
//! about and links to the nodes whose embeddings are most similar to its own.
//! Feature columns are masked at random on top of that.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, write_edge_list, write_features, Edge, Graph};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbaConfig {
    /// Fraction of each node's incident edges pruned per round.
    pub r_m: f64,
    /// Edges added per node, as a fraction of its degree.
    pub r_a: f64,
    /// Probability of masking each feature column.
    pub p_f: f64,
    /// Re-augmentation period in epochs.
    pub period: usize,
    pub warmup_epochs: usize,
    /// When false the augmented view is the original graph with unmasked features.
    pub enabled: bool,
}

impl Default for EbaConfig {
    fn default() -> Self {
        EbaConfig {
            r_m: 0.14,
            r_a: 0.40,
            p_f: 0.2,
            period: 20,
            warmup_epochs: 200,
            enabled: true,
        }
    }
}

impl EbaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r_m", self.r_m), ("r_a", self.r_a), ("p_f", self.p_f)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("eba.{name} must lie in [0, 1], got {v}")));
            }
        }
        if self.enabled && self.r_a <= self.r_m {
            return Err(Error::Config(format!(
                "eba.r_a ({}) must exceed eba.r_m ({})",
                self.r_a, self.r_m
            )));
        }
        if self.period == 0 {
            return Err(Error::Config("eba.period must be positive".into()));
        }
        Ok(())
    }

    fn summary(&self) -> String {
        format!(
            "r_m={} r_a={} p_f={} period={} warmup_epochs={} enabled={}",
            self.r_m, self.r_a, self.p_f, self.period, self.warmup_epochs, self.enabled
        )
    }
}

/// Where an augmented view came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub epoch: usize,
    pub config: EbaConfig,
}

/// Augmented graph `G'`: edited adjacency and masked features on the same node ids.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedView {
    pub graph: Graph,
    pub provenance: Provenance,
}

impl AugmentedView {
    /// The unmodified graph, used when augmentation is disabled.
    pub fn identity(g: &Graph, epoch: usize, config: &EbaConfig) -> Self {
        AugmentedView {
            graph: g.clone(),
            provenance: Provenance {
                epoch,
                config: config.clone(),
            },
        }
    }

    pub fn adjacency(&self) -> &Graph {
        &self.graph
    }

    pub fn features(&self) -> &Array2<f64> {
        self.graph.features()
    }

    /// Writes the edge list (config snapshot in a header comment) and the masked features.
    pub fn write(&self, edge_path: impl AsRef<Path>, feature_path: impl AsRef<Path>) -> Result<()> {
        let mut header = String::new();
        let _ = writeln!(header, "augmented view generated at epoch {}", self.provenance.epoch);
        let _ = write!(header, "{}", self.provenance.config.summary());
        write_edge_list(edge_path.as_ref(), self.graph.edges(), Some(&header))?;
        write_features(feature_path.as_ref(), self.graph.features())
    }
}

fn edges_to_prune(g: &Graph, a_pred: &Array2<f64>, r_m: f64) -> HashSet<Edge> {
    (0..g.n_nodes())
        .into_par_iter()
        .flat_map_iter(|v| {
            let count = (r_m * g.degree(v) as f64 + 1e-9).floor() as usize;
            let mut ranked: Vec<(f64, usize)> = g.neighbors(v).iter().map(|&u| (a_pred[[v, u]], u)).collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            ranked.into_iter().take(count).map(move |(_, u)| canonical(v, u))
        })
        .collect()
}

fn unit_rows(z: &Array2<f64>) -> Array2<f64> {
    let mut unit = z.clone();
    for mut row in unit.axis_iter_mut(Axis(0)) {
        let nrm = row.dot(&row).sqrt();
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    unit
}

fn edges_to_add(g: &Graph, z: &Array2<f64>, r_a: f64) -> Vec<Edge> {
    let n = g.n_nodes();
    let wants: Vec<usize> = (0..n)
        .map(|v| (r_a * g.degree(v) as f64 + 1e-9).floor() as usize)
        .collect();
    if wants.iter().all(|&k| k == 0) {
        return Vec::new();
    }
    let unit = unit_rows(z);
    let sims = unit.dot(&unit.t());
    let mut added: Vec<Edge> = (0..n)
        .into_par_iter()
        .flat_map_iter(|v| {
            let k = wants[v];
            let mut candidates: Vec<(f64, usize)> = if k == 0 {
                Vec::new()
            } else {
                let nbrs = g.neighbors(v);
                sims.row(v)
                    .iter()
                    .enumerate()
                    .filter(|&(u, _)| u != v && nbrs.binary_search(&u).is_err())
                    .map(|(u, &s)| (s, u))
                    .collect()
            };
            // Highest similarity first, smaller id on ties.
            let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)) };
            if candidates.len() > k && k > 0 {
                candidates.select_nth_unstable_by(k - 1, order);
                candidates.truncate(k);
            }
            candidates.sort_by(order);
            candidates.into_iter().map(move |(_, u)| canonical(v, u))
        })
        .collect();
    added.sort_unstable();
    added.dedup();
    added
}

/// Builds the augmented view of `g`.
///
/// Node `v` marks its `floor(r_m * d_v)` incident edges with the lowest predicted
/// probability (ties towards smaller neighbour ids); an edge is dropped if either
/// endpoint marks it. Node `v` then links to its `floor(r_a * d_v)` most
/// cosine-similar nodes that are not already neighbours in `g`. Features are
/// column-masked with probability `p_f`.
pub fn eba_augment<R: Rng + ?Sized>(
    g: &Graph,
    z: &Array2<f64>,
    a_pred: &Array2<f64>,
    cfg: &EbaConfig,
    epoch: usize,
    rng: &mut R,
) -> Result<AugmentedView> {
    let n = g.n_nodes();
    if a_pred.dim() != (n, n) {
        return Err(Error::Shape(format!(
            "predicted adjacency is {:?}, expected ({n}, {n})",
            a_pred.dim()
        )));
    }
    if z.nrows() != n {
        return Err(Error::Shape(format!(
            "embeddings have {} rows, expected {n}",
            z.nrows()
        )));
    }
    let pruned = edges_to_prune(g, a_pred, cfg.r_m);
    let added = edges_to_add(g, z, cfg.r_a);
    let kept = g.edges().iter().copied().filter(|e| !pruned.contains(e));
    let features = mask_features(g.features(), cfg.p_f, rng);
    let graph = Graph::new(n, kept.chain(added), features)?;
    Ok(AugmentedView {
        graph,
        provenance: Provenance {
            epoch,
            config: cfg.clone(),
        },
    })
}

/// Zeroes each feature column independently with probability `p_f`.
pub fn mask_features<R: Rng + ?Sized>(x: &Array2<f64>, p_f: f64, rng: &mut R) -> Array2<f64> {
    let mut out = x.clone();
    if p_f <= 0.0 {
        return out;
    }
    for mut col in out.axis_iter_mut(Axis(1)) {
        if rng.random::<f64>() < p_f {
            col.fill(0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn probs(n: usize, f: impl Fn(usize, usize) -> f64) -> Array2<f64> {
        Array2::from_shape_fn((n, n), |(i, j)| f(i, j))
    }

    fn no_mask() -> EbaConfig {
        EbaConfig {
            p_f: 0.0,
            ..EbaConfig::default()
        }
    }

    #[test]
    fn hub_with_ten_neighbours_drops_one_and_adds_four() {
        // Node 0 links to 1..=10; nodes 11..=20 are isolated.
        let n = 21;
        let g = Graph::structural(n, (1..=10).map(|u| (0, u))).unwrap();
        // Edge (0, 3) is the least confident.
        let a_pred = probs(n, |i, j| if (i, j) == (0, 3) || (i, j) == (3, 0) { 0.1 } else { 0.9 });
        // Node 0 is most similar to 11, 12, 13, 14 in that order.
        let z = Array2::from_shape_fn((n, 2), |(i, k)| match (i, k) {
            (0, 0) => 1.0,
            (0, 1) => 0.0,
            (11..=14, 0) => 1.0,
            (11..=14, 1) => (i - 11) as f64 * 0.1,
            (_, 0) => 0.0,
            _ => 1.0,
        });
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let view = eba_augment(&g, &z, &a_pred, &no_mask(), 200, &mut rng).unwrap();
        let aug = view.adjacency();
        assert!(!aug.has_edge(0, 3));
        for u in 11..=14 {
            assert!(aug.has_edge(0, u), "missing added edge (0, {u})");
        }
        assert_eq!(aug.degree(0), 10 - 1 + 4);
        assert_eq!(view.provenance.epoch, 200);
    }

    #[test]
    fn triangle_is_unchanged_under_defaults() {
        let g = Graph::structural(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        let z = Array2::from_shape_fn((3, 2), |(i, k)| (i + k) as f64);
        let a_pred = probs(3, |_, _| 0.5);
        let view = eba_augment(&g, &z, &a_pred, &no_mask(), 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(view.adjacency().edges(), g.edges());
    }

    #[test]
    fn removal_uses_either_endpoint() {
        // Leaf 1 keeps its only edge by itself, but hub 0 (degree 8) marks it.
        let g = Graph::structural(9, (1..=8).map(|u| (0, u))).unwrap();
        let a_pred = probs(9, |i, j| if i.min(j) == 0 && i.max(j) == 1 { 0.01 } else { 0.99 });
        let z = Array2::from_elem((9, 2), 1.0);
        let cfg = EbaConfig { r_a: 0.2, ..no_mask() };
        let view = eba_augment(&g, &z, &a_pred, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(!view.adjacency().has_edge(0, 1));
        assert_eq!(view.adjacency().degree(1), 0);
    }

    #[test]
    fn shape_errors() {
        let g = Graph::structural(3, [(0, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = Array2::zeros((3, 2));
        assert!(matches!(
            eba_augment(&g, &z, &Array2::zeros((2, 2)), &no_mask(), 0, &mut rng),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            eba_augment(
                &g,
                &Array2::zeros((4, 2)),
                &Array2::zeros((3, 3)),
                &no_mask(),
                0,
                &mut rng
            ),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn config_validation() {
        assert!(EbaConfig::default().validate().is_ok());
        let bad = EbaConfig {
            r_a: 0.1,
            ..EbaConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = EbaConfig {
            p_f: 1.5,
            ..EbaConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn mask_extremes_and_rate() {
        let x = Array2::from_shape_fn((4, 6), |(i, j)| (i * 6 + j) as f64 + 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        assert_eq!(mask_features(&x, 0.0, &mut rng), x);
        assert!(mask_features(&x, 1.0, &mut rng).iter().all(|&v| v == 0.0));

        let wide = Array2::from_elem((2, 10_000), 1.0);
        let rate = |seed: u64| {
            let masked = mask_features(&wide, 0.2, &mut ChaCha8Rng::seed_from_u64(seed));
            let zeroed = masked
                .axis_iter(Axis(1))
                .filter(|c| c.iter().all(|&v| v == 0.0))
                .count();
            zeroed as f64 / 10_000.0
        };
        assert!((0.19..=0.21).contains(&rate(0)), "masked fraction {}", rate(0));
        let mean = (0..20).map(rate).sum::<f64>() / 20.0;
        assert!((mean - 0.2).abs() < 0.003, "mean masked fraction {mean}");
        assert_eq!(
            mask_features(&wide, 0.2, &mut ChaCha8Rng::seed_from_u64(3)),
            mask_features(&wide, 0.2, &mut ChaCha8Rng::seed_from_u64(3))
        );
    }

    fn arb_case() -> impl Strategy<Value = (Graph, Array2<f64>, Array2<f64>, f64, f64)> {
        (5usize..30).prop_flat_map(|n| {
            let edges = proptest::collection::vec((0..n, 0..n), 0..(4 * n));
            let z = proptest::collection::vec(-1.0f64..1.0, n * 3);
            let scores = proptest::collection::vec(0.0f64..1.0, n * n);
            (edges, z, scores, 0.0f64..0.5, 0.0f64..1.0).prop_map(move |(e, z, s, rm, ra)| {
                let g = Graph::structural(n, e).unwrap();
                let z = Array2::from_shape_vec((n, 3), z).unwrap();
                let s = Array2::from_shape_vec((n, n), s).unwrap();
                let s = (&s + &s.t()) * 0.5;
                (g, z, s, rm, ra)
            })
        })
    }

    proptest! {
        #[test]
        fn augmentation_invariants((g, z, a_pred, r_m, r_a) in arb_case(), seed in any::<u64>()) {
            let cfg = EbaConfig { r_m, r_a, p_f: 0.0, ..EbaConfig::default() };
            let view = eba_augment(&g, &z, &a_pred, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let aug = view.adjacency();
            for &(u, v) in aug.edges() {
                prop_assert!(u < v);
                prop_assert!(aug.has_edge(v, u));
            }
            for v in 0..g.n_nodes() {
                let d = g.degree(v) as f64;
                let before: HashSet<usize> = g.neighbors(v).iter().copied().collect();
                let after: HashSet<usize> = aug.neighbors(v).iter().copied().collect();
                let new = after.difference(&before).count();
                let gone = before.difference(&after).count();
                let want_new = ((r_a * d + 1e-9).floor() as usize).min(g.n_nodes() - 1 - before.len());
                prop_assert!(new >= want_new);
                prop_assert!(gone >= (r_m * d + 1e-9).floor() as usize);
            }
            if r_m == 0.0 {
                for &(u, v) in g.edges() {
                    prop_assert!(aug.has_edge(u, v));
                }
            }
            let zero = EbaConfig { r_m: 0.0, r_a: 0.0, p_f: 0.0, ..EbaConfig::default() };
            let same = eba_augment(&g, &z, &a_pred, &zero, 0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            prop_assert_eq!(same.adjacency().edges(), g.edges());
        }

        #[test]
        fn augmentation_is_thread_count_independent((g, z, a_pred, r_m, r_a) in arb_case()) {
            let cfg = EbaConfig { r_m, r_a, p_f: 0.3, ..EbaConfig::default() };
            let run = |threads: usize| {
                rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
                    eba_augment(&g, &z, &a_pred, &cfg, 0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap()
                })
            };
            prop_assert_eq!(run(1), run(3));
        }
    }
}
