//! Reconstruction, neighbour-concentrated contrastive and combined objectives.
//!
//! Every loss has a `*_grad` twin returning the value together with the gradient
//! with respect to its embedding inputs.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use ndarray::parallel::prelude::*;
use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{canonical, Edge, Graph};
use crate::model::{sigmoid, LatentGrad, LatentState};

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]` before taking logs.
pub const PROB_CLIP: f64 = 1e-7;

/// Graphs above this many nodes use sampled reconstruction under `ReconMode::Auto`.
pub const DENSE_RECON_MAX_NODES: usize = 20_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReconMode {
    Dense,
    Sampled,
    Auto,
}

impl ReconMode {
    pub fn is_dense(self, n_nodes: usize) -> bool {
        match self {
            ReconMode::Dense => true,
            ReconMode::Sampled => false,
            ReconMode::Auto => n_nodes <= DENSE_RECON_MAX_NODES,
        }
    }
}

impl fmt::Display for ReconMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReconMode::Dense => "dense",
            ReconMode::Sampled => "sampled",
            ReconMode::Auto => "auto",
        })
    }
}

impl FromStr for ReconMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "dense" => Ok(ReconMode::Dense),
            "sampled" => Ok(ReconMode::Sampled),
            "auto" => Ok(ReconMode::Auto),
            other => Err(Error::Config(format!(
                "unknown reconstruction mode `{other}` (expected dense, sampled or auto)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight on the two reconstruction terms.
    pub lambda1: f64,
    /// Weight on the within-view loss of the original graph.
    pub lambda2: f64,
    /// Weight on the within-view loss of the augmented graph.
    pub lambda3: f64,
    /// Weight on the between-view loss; 1 in the full objective.
    pub btn_weight: f64,
    pub tau: f64,
    pub recon_mode: ReconMode,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda1: 3.0,
            lambda2: 1.0,
            lambda3: 3.0,
            btn_weight: 1.0,
            tau: 0.5,
            recon_mode: ReconMode::Auto,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
            ("btn_weight", self.btn_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// The five terms of the combined objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub recon_ori: f64,
    pub recon_aug: f64,
    pub cnst_ori: f64,
    pub cnst_aug: f64,
    pub btn: f64,
}

/// `btn + lambda1 (recon_ori + recon_aug) + lambda2 cnst_ori + lambda3 cnst_aug`.
pub fn overall_loss(c: &LossComponents, cfg: &LossConfig) -> Result<f64> {
    let parts = [c.recon_ori, c.recon_aug, c.cnst_ori, c.cnst_aug, c.btn];
    if parts.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite loss component in {c:?}")));
    }
    Ok(cfg.btn_weight * c.btn
        + cfg.lambda1 * (c.recon_ori + c.recon_aug)
        + cfg.lambda2 * c.cnst_ori
        + cfg.lambda3 * c.cnst_aug)
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

/// Reconstruction loss: weighted binary cross-entropy of the adjacency plus,
/// for variational encoders, the KL divergence to a standard normal prior.
pub fn recon_loss<R: Rng + ?Sized>(
    g: &Graph,
    latent: &LatentState,
    cfg: &LossConfig,
    variational: bool,
    rng: &mut R,
) -> Result<f64> {
    recon_loss_impl(g, latent, cfg, variational, rng, false).map(|(v, _)| v)
}

pub fn recon_loss_grad<R: Rng + ?Sized>(
    g: &Graph,
    latent: &LatentState,
    cfg: &LossConfig,
    variational: bool,
    rng: &mut R,
) -> Result<(f64, LatentGrad)> {
    recon_loss_impl(g, latent, cfg, variational, rng, true).map(|(v, grad)| (v, grad.expect("gradient requested")))
}

fn recon_loss_impl<R: Rng + ?Sized>(
    g: &Graph,
    latent: &LatentState,
    cfg: &LossConfig,
    variational: bool,
    rng: &mut R,
    want_grad: bool,
) -> Result<(f64, Option<LatentGrad>)> {
    let (n, d) = latent.z.dim();
    if n != g.n_nodes() || latent.mu.dim() != (n, d) || latent.logvar.dim() != (n, d) {
        return Err(Error::Shape(format!(
            "latent state is {n}x{d} but the graph has {} nodes",
            g.n_nodes()
        )));
    }
    let (bce, dz) = if cfg.recon_mode.is_dense(n) {
        dense_bce(g, &latent.z, want_grad)
    } else {
        sampled_bce(g, &latent.z, rng, want_grad)?
    };
    let mut grad = want_grad.then(|| LatentGrad {
        z: dz.expect("gradient requested"),
        mu: Array2::zeros((n, d)),
        logvar: Array2::zeros((n, d)),
    });
    let kl = if variational {
        kl_divergence(latent, grad.as_mut())
    } else {
        0.0
    };
    let total = bce + kl;
    if !total.is_finite() {
        return Err(Error::Numeric(format!(
            "reconstruction loss is not finite (bce {bce}, kl {kl})"
        )));
    }
    Ok((total, grad))
}

/// `-1/2 * mean_{i,k} (1 + logvar - mu^2 - exp(logvar))`.
fn kl_divergence(latent: &LatentState, grad: Option<&mut LatentGrad>) -> f64 {
    let count = latent.mu.len().max(1) as f64;
    let mut sum = 0.0;
    Zip::from(&latent.mu)
        .and(&latent.logvar)
        .for_each(|&m, &lv| sum += 1.0 + lv - m * m - lv.exp());
    if let Some(grad) = grad {
        Zip::from(&mut grad.mu)
            .and(&latent.mu)
            .for_each(|g, &m| *g += m / count);
        Zip::from(&mut grad.logvar)
            .and(&latent.logvar)
            .for_each(|g, &lv| *g += 0.5 * (lv.exp() - 1.0) / count);
    }
    -0.5 * sum / count
}

#[inline]
fn clipped(p: f64) -> (f64, bool) {
    if p < PROB_CLIP {
        (PROB_CLIP, true)
    } else if p > 1.0 - PROB_CLIP {
        (1.0 - PROB_CLIP, true)
    } else {
        (p, false)
    }
}

/// BCE term for one logit; returns `(loss, d loss / d logit)`.
#[inline]
fn bce_term(logit: f64, positive: bool) -> (f64, f64) {
    let (p, was_clipped) = clipped(sigmoid(logit));
    if positive {
        (-p.ln(), if was_clipped { 0.0 } else { p - 1.0 })
    } else {
        (-(1.0 - p).ln(), if was_clipped { 0.0 } else { p })
    }
}

/// Mean over all ordered pairs `i != j`, positives up-weighted by
/// `#non-edges / #edges` (weight 1 when either count is zero).
fn dense_bce(g: &Graph, z: &Array2<f64>, want_grad: bool) -> (f64, Option<Array2<f64>>) {
    let n = z.nrows();
    if n < 2 {
        return (0.0, want_grad.then(|| Array2::zeros(z.raw_dim())));
    }
    let ordered_pairs = (n * (n - 1)) as f64;
    let ordered_pos = 2.0 * g.n_edges() as f64;
    let ordered_neg = ordered_pairs - ordered_pos;
    let pos_weight = if ordered_pos > 0.0 && ordered_neg > 0.0 {
        ordered_neg / ordered_pos
    } else {
        1.0
    };

    let mut m = z.dot(&z.t());
    // Upper triangle: replace logits by per-pair gradients and collect row losses.
    let row_loss: Vec<f64> = m
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            let nbrs = g.neighbors(i);
            let mut cursor = nbrs.partition_point(|&j| j <= i);
            let mut acc = 0.0;
            for j in i + 1..n {
                let positive = cursor < nbrs.len() && nbrs[cursor] == j;
                if positive {
                    cursor += 1;
                }
                let (loss, dlogit) = bce_term(row[j], positive);
                let w = if positive { pos_weight } else { 1.0 };
                acc += w * loss;
                row[j] = w * dlogit;
            }
            acc
        })
        .collect();
    // Each unordered pair stands for two ordered pairs.
    let loss = 2.0 * row_loss.iter().sum::<f64>() / ordered_pairs;
    if !want_grad {
        return (loss, None);
    }
    for i in 0..n {
        m[[i, i]] = 0.0;
    }
    mirror_upper(&mut m);
    // d/dZ of sum_{i != j} l(z_i . z_j) / P = 2 G Z / P for symmetric G.
    let mut dz = m.dot(z);
    dz *= 2.0 / ordered_pairs;
    (loss, Some(dz))
}

/// Copies the strict upper triangle onto the lower one.
fn mirror_upper(m: &mut Array2<f64>) {
    let n = m.nrows();
    const BLOCK: usize = 64;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (bi..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj.max(i + 1)..(bj + BLOCK).min(n) {
                    m[[j, i]] = m[[i, j]];
                }
            }
        }
    }
}

/// Mean BCE over the train positives and an equal number of fresh uniform negatives.
fn sampled_bce<R: Rng + ?Sized>(
    g: &Graph,
    z: &Array2<f64>,
    rng: &mut R,
    want_grad: bool,
) -> Result<(f64, Option<Array2<f64>>)> {
    let m = g.n_edges();
    let mut dz = want_grad.then(|| Array2::zeros(z.raw_dim()));
    if m == 0 {
        return Ok((0.0, dz));
    }
    let negatives = fresh_negatives(g, m, rng)?;
    let total = (m + negatives.len()) as f64;
    let mut loss = 0.0;
    let pairs = g
        .edges()
        .iter()
        .map(|&e| (e, true))
        .chain(negatives.iter().map(|&e| (e, false)));
    for ((i, j), positive) in pairs {
        let logit = z.row(i).dot(&z.row(j));
        let (l, dlogit) = bce_term(logit, positive);
        loss += l;
        if let Some(dz) = dz.as_mut() {
            let s = dlogit / total;
            let (zi, zj) = (z.row(i).to_owned(), z.row(j).to_owned());
            dz.row_mut(i).scaled_add(s, &zj);
            dz.row_mut(j).scaled_add(s, &zi);
        }
    }
    Ok((loss / total, dz))
}

fn fresh_negatives<R: Rng + ?Sized>(g: &Graph, count: usize, rng: &mut R) -> Result<Vec<Edge>> {
    let n = g.n_nodes();
    let available = n * n.saturating_sub(1) / 2 - g.n_edges();
    let count = count.min(available);
    let mut seen = HashSet::with_capacity(count * 2);
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > 100 * count + 1000 {
            return Err(Error::Sampling(
                "rejection sampling of reconstruction negatives did not converge".into(),
            ));
        }
        let (u, v) = (rng.random_range(0..n), rng.random_range(0..n));
        if u == v || g.has_edge(u, v) {
            continue;
        }
        let e = canonical(u, v);
        if seen.insert(e) {
            out.push(e);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Contrastive losses
// ---------------------------------------------------------------------------

/// Which columns count as positives for anchor `i`.
#[derive(Clone, Copy)]
enum Positives<'a> {
    SelfOnly,
    SelfAndNeighbors(&'a Graph),
}

struct Normalized {
    unit: Array2<f64>,
    norms: Array1<f64>,
}

/// Unit rows; zero rows stay zero, which gives them similarity 0 to everything.
fn normalize_rows(z: &Array2<f64>) -> Normalized {
    let norms = z.map_axis(Axis(1), |r| r.dot(&r).sqrt());
    let mut unit = z.clone();
    for (mut row, &nrm) in unit.axis_iter_mut(Axis(0)).zip(norms.iter()) {
        if nrm > 0.0 {
            row /= nrm;
        }
    }
    Normalized { unit, norms }
}

/// Backward of row normalisation.
fn normalize_rows_backward(nz: &Normalized, d_unit: Array2<f64>) -> Array2<f64> {
    let mut out = d_unit;
    for ((mut row, u), &nrm) in out
        .axis_iter_mut(Axis(0))
        .zip(nz.unit.axis_iter(Axis(0)))
        .zip(nz.norms.iter())
    {
        if nrm > 0.0 {
            let proj = row.dot(&u);
            row.scaled_add(-proj, &u);
            row /= nrm;
        } else {
            row.fill(0.0);
        }
    }
    out
}

/// Gradients for the anchor and the other view.
type ViewGrads = (Array2<f64>, Array2<f64>);

/// Mean over anchors of `-log(sum_{pos} e^{s/tau} / sum_all e^{s/tau})` with cosine
/// similarity between rows of `anchor` and `other`. Returns the loss and, when
/// requested, gradients for `anchor` and `other`.
fn neighbor_contrast(
    anchor: &Array2<f64>,
    other: &Array2<f64>,
    positives: Positives<'_>,
    tau: f64,
    want_grad: bool,
) -> Result<(f64, Option<ViewGrads>)> {
    if anchor.dim() != other.dim() {
        return Err(Error::Shape(format!(
            "contrasted views are {:?} and {:?}",
            anchor.dim(),
            other.dim()
        )));
    }
    let n = anchor.nrows();
    if let Positives::SelfAndNeighbors(g) = positives {
        if g.n_nodes() != n {
            return Err(Error::Shape(format!(
                "graph has {} nodes but the embeddings have {n} rows",
                g.n_nodes()
            )));
        }
    }
    if n == 0 {
        return Ok((0.0, want_grad.then(|| (anchor.clone(), other.clone()))));
    }
    let a = normalize_rows(anchor);
    let o = normalize_rows(other);
    let inv_tau = 1.0 / tau;

    // exp((s - 1) / tau) never overflows since cosine similarity is at most 1.
    let mut e = a.unit.dot(&o.unit.t());
    let inv_n = 1.0 / n as f64;
    let row_loss: Vec<f64> = e
        .axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .map(|(i, mut row)| {
            row.mapv_inplace(|s| ((s - 1.0) * inv_tau).exp());
            let total: f64 = row.sum();
            let pos: f64 = match positives {
                Positives::SelfOnly => row[i],
                Positives::SelfAndNeighbors(g) => row[i] + g.neighbors(i).iter().map(|&j| row[j]).sum::<f64>(),
            };
            let loss = total.ln() - pos.ln();
            if want_grad {
                // d loss_i / d s_ij = softmax_ij - [j in P_i] e_ij / pos_i, scaled by 1/(N tau).
                let (inv_total, inv_pos) = (1.0 / total, 1.0 / pos);
                let scale = inv_n * inv_tau;
                let self_term = row[i];
                row.mapv_inplace(|v| v * inv_total * scale);
                row[i] -= self_term * inv_pos * scale;
                if let Positives::SelfAndNeighbors(g) = positives {
                    for &j in g.neighbors(i) {
                        // row[j] currently holds e_ij * inv_total * scale.
                        let e_ij = row[j] / (inv_total * scale);
                        row[j] -= e_ij * inv_pos * scale;
                    }
                }
            }
            loss
        })
        .collect();
    let loss = row_loss.iter().sum::<f64>() * inv_n;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("contrastive loss is not finite: {loss}")));
    }
    if !want_grad {
        return Ok((loss, None));
    }
    let d_anchor_unit = e.dot(&o.unit);
    let d_other_unit = e.t().dot(&a.unit);
    Ok((
        loss,
        Some((
            normalize_rows_backward(&a, d_anchor_unit),
            normalize_rows_backward(&o, d_other_unit),
        )),
    ))
}

/// Within-view loss on the augmented embeddings: each node is its own only positive.
pub fn within_cl_aug(z_aug: &Array2<f64>, cfg: &LossConfig) -> Result<f64> {
    neighbor_contrast(z_aug, z_aug, Positives::SelfOnly, cfg.tau, false).map(|r| r.0)
}

pub fn within_cl_aug_grad(z_aug: &Array2<f64>, cfg: &LossConfig) -> Result<(f64, Array2<f64>)> {
    let (loss, grads) = neighbor_contrast(z_aug, z_aug, Positives::SelfOnly, cfg.tau, true)?;
    let (da, db) = grads.expect("gradient requested");
    Ok((loss, da + db))
}

/// Within-view loss on the original embeddings: a node and its neighbours in `g`
/// are positives.
pub fn within_cl_ori(z: &Array2<f64>, g: &Graph, cfg: &LossConfig) -> Result<f64> {
    neighbor_contrast(z, z, Positives::SelfAndNeighbors(g), cfg.tau, false).map(|r| r.0)
}

pub fn within_cl_ori_grad(z: &Array2<f64>, g: &Graph, cfg: &LossConfig) -> Result<(f64, Array2<f64>)> {
    let (loss, grads) = neighbor_contrast(z, z, Positives::SelfAndNeighbors(g), cfg.tau, true)?;
    let (da, db) = grads.expect("gradient requested");
    Ok((loss, da + db))
}

/// Between-view loss: anchors from the original view, positives are the same node
/// and its neighbours in the augmented graph, taken from the augmented view.
pub fn btn_cl(z: &Array2<f64>, z_aug: &Array2<f64>, g_aug: &Graph, cfg: &LossConfig) -> Result<f64> {
    neighbor_contrast(z, z_aug, Positives::SelfAndNeighbors(g_aug), cfg.tau, false).map(|r| r.0)
}

/// Returns the loss and the gradients for `z` and `z_aug`.
pub fn btn_cl_grad(
    z: &Array2<f64>,
    z_aug: &Array2<f64>,
    g_aug: &Graph,
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let (loss, grads) = neighbor_contrast(z, z_aug, Positives::SelfAndNeighbors(g_aug), cfg.tau, true)?;
    let (dz, dz_aug) = grads.expect("gradient requested");
    Ok((loss, dz, dz_aug))
}
