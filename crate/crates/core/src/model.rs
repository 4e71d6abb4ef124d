//! Autoencoder backbones: a dense layer followed by personalized-PageRank
//! propagation, optional row normalisation of the means, and an inner-product
//! decoder. Backward passes are written out by hand.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Edge;
use crate::sparse::{Csr, PropagationOperator};

/// Lower and upper clamp applied to encoder log-variances.
pub const LOGVAR_CLAMP: (f64, f64) = (-10.0, 10.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    /// Plain autoencoder, `z = mu`.
    Gae,
    /// Row-normalised means scaled to norm `s`.
    Gnae,
    /// Normalised means plus a propagated log-variance and sampling.
    Vgnae,
}

impl Backbone {
    pub fn normalizes(self) -> bool {
        matches!(self, Backbone::Gnae | Backbone::Vgnae)
    }

    pub fn is_variational(self) -> bool {
        matches!(self, Backbone::Vgnae)
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backbone::Gae => "gae",
            Backbone::Gnae => "gnae",
            Backbone::Vgnae => "vgnae",
        })
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gae" => Ok(Backbone::Gae),
            "gnae" => Ok(Backbone::Gnae),
            "vgnae" => Ok(Backbone::Vgnae),
            other => Err(Error::Config(format!(
                "unknown backbone `{other}` (expected gae, gnae or vgnae)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub backbone: Backbone,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub dropout: f64,
    /// Number of propagation steps `K`.
    pub appnp_steps: usize,
    /// Teleport probability `beta`.
    pub appnp_teleport: f64,
    /// Row norm `s` of the means for normalising backbones.
    pub norm_scale: f64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig {
            backbone: Backbone::Vgnae,
            hidden_dim: 256,
            out_dim: 64,
            dropout: 0.3,
            appnp_steps: 10,
            appnp_teleport: 0.1,
            norm_scale: 1.8,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        if !(0.0..=1.0).contains(&self.appnp_teleport) {
            return Err(Error::Config(format!(
                "teleport probability must lie in [0, 1], got {}",
                self.appnp_teleport
            )));
        }
        if !(self.norm_scale > 0.0 && self.norm_scale.is_finite()) {
            return Err(Error::Config(format!(
                "norm scale must be positive, got {}",
                self.norm_scale
            )));
        }
        Ok(())
    }
}

/// Trainable weights. `w_logvar` is carried but unused by non-variational backbones.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub w_hidden: Array2<f64>,
    pub w_mu: Array2<f64>,
    pub w_logvar: Array2<f64>,
}

impl EncoderParams {
    /// Glorot-uniform initialisation.
    pub fn init<R: Rng + ?Sized>(cfg: &EncoderConfig, in_dim: usize, rng: &mut R) -> Self {
        let mut glorot = |rows: usize, cols: usize| {
            let limit = (6.0 / (rows + cols) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot bound");
            Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng))
        };
        EncoderParams {
            w_hidden: glorot(in_dim, cfg.hidden_dim),
            w_mu: glorot(cfg.hidden_dim, cfg.out_dim),
            w_logvar: glorot(cfg.hidden_dim, cfg.out_dim),
        }
    }

    pub fn zeros(cfg: &EncoderConfig, in_dim: usize) -> Self {
        EncoderParams {
            w_hidden: Array2::zeros((in_dim, cfg.hidden_dim)),
            w_mu: Array2::zeros((cfg.hidden_dim, cfg.out_dim)),
            w_logvar: Array2::zeros((cfg.hidden_dim, cfg.out_dim)),
        }
    }

    pub fn zeros_like(&self) -> Self {
        EncoderParams {
            w_hidden: Array2::zeros(self.w_hidden.raw_dim()),
            w_mu: Array2::zeros(self.w_mu.raw_dim()),
            w_logvar: Array2::zeros(self.w_logvar.raw_dim()),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.w_hidden.nrows()
    }

    pub fn tensors(&self) -> [(&'static str, &Array2<f64>); 3] {
        [
            ("w_hidden", &self.w_hidden),
            ("w_mu", &self.w_mu),
            ("w_logvar", &self.w_logvar),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Array2<f64>; 3] {
        [&mut self.w_hidden, &mut self.w_mu, &mut self.w_logvar]
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `self += alpha * other`, tensor by tensor.
    pub fn scaled_add(&mut self, alpha: f64, other: &EncoderParams) {
        self.w_hidden.scaled_add(alpha, &other.w_hidden);
        self.w_mu.scaled_add(alpha, &other.w_mu);
        self.w_logvar.scaled_add(alpha, &other.w_logvar);
    }

    pub fn check_shapes(&self, cfg: &EncoderConfig, in_dim: usize) -> Result<()> {
        let expect = [
            ("w_hidden", (in_dim, cfg.hidden_dim)),
            ("w_mu", (cfg.hidden_dim, cfg.out_dim)),
            ("w_logvar", (cfg.hidden_dim, cfg.out_dim)),
        ];
        for ((name, t), (_, shape)) in self.tensors().into_iter().zip(expect) {
            if t.dim() != shape {
                return Err(Error::Shape(format!("{name} is {:?}, expected {:?}", t.dim(), shape)));
            }
        }
        Ok(())
    }
}

/// Per-node means, log-variances and embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
    pub z: Array2<f64>,
}

/// `H_{k+1} = (1 - beta) * A_hat * H_k + beta * H_0`, iterated `k` times.
///
/// The map is a polynomial in the symmetric operator, so it is its own adjoint;
/// the backward pass reuses it.
pub fn propagate(h: ArrayView2<'_, f64>, op: &PropagationOperator, k: usize, beta: f64) -> Array2<f64> {
    assert_eq!(h.nrows(), op.n_nodes(), "propagation shape mismatch");
    let mut cur = h.to_owned();
    for _ in 0..k {
        let mut next = op.apply(cur.view());
        Zip::from(&mut next)
            .and(&h)
            .for_each(|n, &h0| *n = (1.0 - beta) * *n + beta * h0);
        cur = next;
    }
    cur
}

/// Random draws used by one stochastic forward pass. Fixing these makes the
/// forward pass a deterministic function of the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodeNoise {
    /// Inverted-dropout multipliers (`0` or `1 / (1 - p)`) for the hidden layer.
    pub dropout: Option<Array2<f64>>,
    /// Standard-normal draws for the reparameterisation.
    pub eps: Option<Array2<f64>>,
}

impl EncodeNoise {
    pub fn none() -> Self {
        EncodeNoise {
            dropout: None,
            eps: None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(cfg: &EncoderConfig, n_nodes: usize, training: bool, rng: &mut R) -> Self {
        if !training {
            return Self::none();
        }
        let dropout = (cfg.dropout > 0.0).then(|| {
            let keep = 1.0 - cfg.dropout;
            Array2::from_shape_simple_fn((n_nodes, cfg.hidden_dim), || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
        });
        let eps = cfg
            .backbone
            .is_variational()
            .then(|| standard_normal((n_nodes, cfg.out_dim), rng));
        EncodeNoise { dropout, eps }
    }
}

fn standard_normal<R: Rng + ?Sized>(shape: (usize, usize), rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(rng))
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTape {
    pre_hidden: Array2<f64>,
    hidden: Array2<f64>,
    raw_mu: Array2<f64>,
    raw_norms: Array1<f64>,
    logvar_pre: Option<Array2<f64>>,
    noise: EncodeNoise,
}

/// Encoder forward pass with explicit noise; returns the latent state and a tape.
pub fn encode_forward(
    x: &Csr,
    op: &PropagationOperator,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    noise: EncodeNoise,
) -> Result<(LatentState, EncoderTape)> {
    if !params.is_finite() {
        return Err(Error::Numeric("encoder parameters contain non-finite values".into()));
    }
    let (n, in_dim) = x.shape();
    if in_dim != params.in_dim() || n != op.n_nodes() {
        return Err(Error::Shape(format!(
            "features are {n}x{in_dim}, operator has {} nodes, weights expect {} inputs",
            op.n_nodes(),
            params.in_dim()
        )));
    }
    params.check_shapes(cfg, in_dim)?;

    let pre_hidden = x.dot(params.w_hidden.view());
    let mut hidden = pre_hidden.mapv(|v| v.max(0.0));
    if let Some(mask) = &noise.dropout {
        hidden *= mask;
    }

    let (k, beta) = (cfg.appnp_steps, cfg.appnp_teleport);
    let raw_mu = propagate(hidden.dot(&params.w_mu).view(), op, k, beta);
    let (mu, raw_norms) = if cfg.backbone.normalizes() {
        let norms = raw_mu.map_axis(Axis(1), |r| r.dot(&r).sqrt());
        let mut mu = raw_mu.clone();
        for (mut row, &nrm) in mu.axis_iter_mut(Axis(0)).zip(norms.iter()) {
            if nrm > 0.0 {
                row *= cfg.norm_scale / nrm;
            }
        }
        (mu, norms)
    } else {
        (raw_mu.clone(), Array1::zeros(0))
    };

    let (logvar, logvar_pre) = if cfg.backbone.is_variational() {
        let pre = propagate(hidden.dot(&params.w_logvar).view(), op, k, beta);
        let clamped = pre.mapv(|v| v.clamp(LOGVAR_CLAMP.0, LOGVAR_CLAMP.1));
        (clamped, Some(pre))
    } else {
        (Array2::zeros(mu.raw_dim()), None)
    };

    let z = match (&noise.eps, cfg.backbone.is_variational()) {
        (Some(eps), true) => reparameterize_with(&mu, &logvar, eps),
        _ => mu.clone(),
    };

    let latent = LatentState { mu, logvar, z };
    let tape = EncoderTape {
        pre_hidden,
        hidden,
        raw_mu,
        raw_norms,
        logvar_pre,
        noise,
    };
    Ok((latent, tape))
}

/// Encodes the nodes of a graph. Dropout and sampling are active only when
/// `training` is set; otherwise `z == mu`.
pub fn encode<R: Rng + ?Sized>(
    features: &Array2<f64>,
    op: &PropagationOperator,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    training: bool,
    rng: &mut R,
) -> Result<LatentState> {
    let x = Csr::from_dense(features.view());
    let noise = EncodeNoise::sample(cfg, features.nrows(), training, rng);
    encode_forward(&x, op, params, cfg, noise).map(|(latent, _)| latent)
}

/// Upstream gradients with respect to the latent state.
#[derive(Debug, Clone)]
pub struct LatentGrad {
    pub z: Array2<f64>,
    pub mu: Array2<f64>,
    pub logvar: Array2<f64>,
}

impl LatentGrad {
    pub fn zeros(n: usize, d: usize) -> Self {
        LatentGrad {
            z: Array2::zeros((n, d)),
            mu: Array2::zeros((n, d)),
            logvar: Array2::zeros((n, d)),
        }
    }
}

/// Gradients of a scalar with respect to the weights, given `grad` on the latent state.
pub fn encode_backward(
    x: &Csr,
    op: &PropagationOperator,
    params: &EncoderParams,
    cfg: &EncoderConfig,
    latent: &LatentState,
    tape: &EncoderTape,
    grad: LatentGrad,
) -> EncoderParams {
    let (k, beta) = (cfg.appnp_steps, cfg.appnp_teleport);
    let LatentGrad {
        z: dz,
        mu: mut dmu,
        logvar: mut dlogvar,
    } = grad;

    // z = mu + exp(logvar / 2) * eps
    match (&tape.noise.eps, cfg.backbone.is_variational()) {
        (Some(eps), true) => {
            dmu += &dz;
            Zip::from(&mut dlogvar)
                .and(&dz)
                .and(eps)
                .and(&latent.logvar)
                .for_each(|g, &d, &e, &lv| *g += d * e * 0.5 * (0.5 * lv).exp());
        }
        _ => dmu += &dz,
    }

    let d_raw_mu = if cfg.backbone.normalizes() {
        let mut d = Array2::zeros(dmu.raw_dim());
        for (i, mut row) in d.axis_iter_mut(Axis(0)).enumerate() {
            let nrm = tape.raw_norms[i];
            if nrm <= 0.0 {
                continue;
            }
            let u = tape.raw_mu.row(i).mapv(|v| v / nrm);
            let g = dmu.row(i);
            let proj = u.dot(&g);
            Zip::from(&mut row)
                .and(&g)
                .and(&u)
                .for_each(|o, &gi, &ui| *o = cfg.norm_scale / nrm * (gi - ui * proj));
        }
        d
    } else {
        dmu
    };

    let d_a_mu = propagate(d_raw_mu.view(), op, k, beta);
    let mut grads = params.zeros_like();
    grads.w_mu = tape.hidden.t().dot(&d_a_mu);
    let mut d_hidden = d_a_mu.dot(&params.w_mu.t());

    if let Some(pre) = &tape.logvar_pre {
        let mut d_pre = dlogvar;
        Zip::from(&mut d_pre).and(pre).for_each(|g, &p| {
            if !(LOGVAR_CLAMP.0..=LOGVAR_CLAMP.1).contains(&p) {
                *g = 0.0;
            }
        });
        let d_a_lv = propagate(d_pre.view(), op, k, beta);
        grads.w_logvar = tape.hidden.t().dot(&d_a_lv);
        d_hidden += &d_a_lv.dot(&params.w_logvar.t());
    }

    if let Some(mask) = &tape.noise.dropout {
        d_hidden *= mask;
    }
    Zip::from(&mut d_hidden).and(&tape.pre_hidden).for_each(|g, &p| {
        if p <= 0.0 {
            *g = 0.0;
        }
    });
    grads.w_hidden = x.t_dot(d_hidden.view());
    grads
}

fn reparameterize_with(mu: &Array2<f64>, logvar: &Array2<f64>, eps: &Array2<f64>) -> Array2<f64> {
    let mut z = mu.clone();
    Zip::from(&mut z)
        .and(logvar)
        .and(eps)
        .for_each(|z, &lv, &e| *z += (0.5 * lv).exp() * e);
    z
}

/// `z = mu + exp(logvar / 2) * eps` with `eps ~ N(0, I)` drawn from `rng`.
pub fn reparameterize<R: Rng + ?Sized>(mu: &Array2<f64>, logvar: &Array2<f64>, rng: &mut R) -> Result<Array2<f64>> {
    if mu.dim() != logvar.dim() {
        return Err(Error::Shape(format!(
            "mu is {:?} but logvar is {:?}",
            mu.dim(),
            logvar.dim()
        )));
    }
    let eps = standard_normal(mu.dim(), rng);
    Ok(reparameterize_with(mu, logvar, &eps))
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Link probabilities `sigmoid(z_i . z_j)` for the given pairs.
pub fn decode_pairs(z: &Array2<f64>, pairs: &[Edge]) -> Result<Vec<f64>> {
    let n = z.nrows();
    pairs
        .iter()
        .map(|&(i, j)| {
            if i >= n || j >= n {
                return Err(Error::Range {
                    id: i.max(j),
                    n_nodes: n,
                });
            }
            Ok(sigmoid(z.row(i).dot(&z.row(j))))
        })
        .collect()
}

/// Full predicted adjacency `sigmoid(Z Z^T)`.
pub fn decode_full(z: &Array2<f64>) -> Array2<f64> {
    let mut logits = z.dot(&z.t());
    logits.mapv_inplace(sigmoid);
    logits
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::sparse::normalized_adjacency;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn path_op() -> PropagationOperator {
        normalized_adjacency(&Graph::structural(2, [(0, 1)]).unwrap())
    }

    #[test]
    fn propagate_fixed_points() {
        let op = path_op();
        let h = array![[1.0, 2.0], [3.0, -1.0]];
        assert_eq!(propagate(h.view(), &op, 7, 1.0), h);
        assert_eq!(propagate(h.view(), &op, 0, 0.1), h);
    }

    #[test]
    fn propagate_single_step() {
        let out = propagate(array![[1.0], [0.0]].view(), &path_op(), 1, 0.1);
        assert_abs_diff_eq!(out[[0, 0]], 0.55, epsilon = 1e-15);
        assert_abs_diff_eq!(out[[1, 0]], 0.45, epsilon = 1e-15);
    }

    fn toy() -> (Graph, PropagationOperator) {
        let x = array![
            [1.0, 0.0, 0.5],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
            [0.0, 0.0, 2.0],
            [0.3, 0.0, 1.0]
        ];
        let g = Graph::new(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)], x).unwrap();
        let op = normalized_adjacency(&g);
        (g, op)
    }

    fn small_cfg(backbone: Backbone) -> EncoderConfig {
        EncoderConfig {
            backbone,
            hidden_dim: 4,
            out_dim: 3,
            dropout: 0.3,
            appnp_steps: 3,
            appnp_teleport: 0.2,
            norm_scale: 1.8,
        }
    }

    #[test]
    fn zero_weights_give_zero_means() {
        let (g, op) = toy();
        let cfg = small_cfg(Backbone::Gae);
        let params = EncoderParams::zeros(&cfg, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lat = encode(g.features(), &op, &params, &cfg, true, &mut rng).unwrap();
        assert!(lat.mu.iter().all(|&v| v == 0.0));
        assert_eq!(lat.z, lat.mu);
    }

    #[test]
    fn eval_path_is_deterministic_and_normalised() {
        let (g, op) = toy();
        for backbone in [Backbone::Gnae, Backbone::Vgnae] {
            let cfg = small_cfg(backbone);
            let params = EncoderParams::init(&cfg, 3, &mut ChaCha8Rng::seed_from_u64(5));
            let a = encode(
                g.features(),
                &op,
                &params,
                &cfg,
                false,
                &mut ChaCha8Rng::seed_from_u64(1),
            )
            .unwrap();
            let b = encode(
                g.features(),
                &op,
                &params,
                &cfg,
                false,
                &mut ChaCha8Rng::seed_from_u64(2),
            )
            .unwrap();
            assert_eq!(a, b);
            assert_eq!(a.z, a.mu);
            for row in a.mu.rows() {
                let nrm = row.dot(&row).sqrt();
                if nrm > 0.0 {
                    assert!((nrm - 1.8).abs() <= 1e-6 * 1.8, "row norm {nrm}");
                }
            }
        }
    }

    #[test]
    fn normalised_means_ignore_positive_feature_scaling() {
        // All-positive weights and features keep every hidden pre-activation positive.
        let (g, op) = toy();
        let cfg = EncoderConfig {
            dropout: 0.0,
            ..small_cfg(Backbone::Gnae)
        };
        let mut params = EncoderParams::init(&cfg, 3, &mut ChaCha8Rng::seed_from_u64(9));
        params.w_hidden.mapv_inplace(|v| v.abs() + 0.01);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let base = encode(g.features(), &op, &params, &cfg, false, &mut rng).unwrap();
        let scaled_x = g.features() * 3.7;
        let scaled = encode(&scaled_x, &op, &params, &cfg, false, &mut rng).unwrap();
        for (a, b) in base.mu.iter().zip(scaled.mu.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn non_finite_weights_are_rejected() {
        let (g, op) = toy();
        let cfg = small_cfg(Backbone::Gae);
        let mut params = EncoderParams::zeros(&cfg, 3);
        params.w_mu[[0, 0]] = f64::NAN;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            encode(g.features(), &op, &params, &cfg, false, &mut rng),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn reparameterize_limits() {
        let mu = array![[0.5, -1.0], [2.0, 0.0]];
        let tiny = Array2::from_elem((2, 2), -60.0);
        let z = reparameterize(&mu, &tiny, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for (a, b) in z.iter().zip(mu.iter()) {
            assert!((a - b).abs() < 1e-10);
        }
        let lv = Array2::zeros((2, 2));
        let a = reparameterize(&mu, &lv, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = reparameterize(&mu, &lv, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        assert!(reparameterize(&mu, &Array2::zeros((1, 2)), &mut ChaCha8Rng::seed_from_u64(4)).is_err());
    }

    #[test]
    fn reparameterize_matches_standard_normal_moments() {
        let n = 100_000;
        let mu = Array2::zeros((n, 1));
        let lv = Array2::zeros((n, 1));
        let z = reparameterize(&mu, &lv, &mut ChaCha8Rng::seed_from_u64(2024)).unwrap();
        let mean = z.sum() / n as f64;
        let var = z.mapv(|v| (v - mean).powi(2)).sum() / (n as f64 - 1.0);
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "variance {var}");
    }

    #[test]
    fn decoder_examples() {
        let z = array![[1.0, 0.0], [0.0, 1.0], [3.0, 0.0]];
        let p = decode_pairs(&z, &[(0, 1)]).unwrap();
        assert_eq!(p, vec![0.5]);
        let same = array![[3.0, 0.0], [3.0, 0.0]];
        let p = decode_pairs(&same, &[(0, 1)]).unwrap()[0];
        assert_abs_diff_eq!(p, 1.0 / (1.0 + (-9.0f64).exp()), epsilon = 1e-15);
        assert_abs_diff_eq!(p, 0.99988, epsilon = 5e-6);
        let full = decode_full(&z);
        assert_eq!(full, full.t());
        for i in 0..3 {
            let zi = z.row(i);
            assert_eq!(full[[i, i]], sigmoid(zi.dot(&zi)));
        }
        assert!(decode_pairs(&z, &[(0, 3)]).is_err());
    }

    /// Scalar test objective: sum_ij c_ij sigmoid(z_i . z_j) + <w, mu> + <u, logvar>.
    fn objective(
        x: &Csr,
        op: &PropagationOperator,
        params: &EncoderParams,
        cfg: &EncoderConfig,
        noise: &EncodeNoise,
        weights: &(Array2<f64>, Array2<f64>, Array2<f64>),
    ) -> (f64, EncoderParams) {
        let (lat, tape) = encode_forward(x, op, params, cfg, noise.clone()).unwrap();
        let probs = decode_full(&lat.z);
        let (c, w, u) = weights;
        let value = (&probs * c).sum() + (&lat.mu * w).sum() + (&lat.logvar * u).sum();
        // d/dz of sum c_ij sigma(z_i.z_j) = (G + G^T) z with G = c * sigma'.
        let g = c * &probs.mapv(|p| p * (1.0 - p));
        let dz = (&g + &g.t()).dot(&lat.z);
        let grad = LatentGrad {
            z: dz,
            mu: w.clone(),
            logvar: u.clone(),
        };
        let grads = encode_backward(x, op, params, cfg, &lat, &tape, grad);
        (value, grads)
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (g, op) = toy();
        let x = Csr::from_dense(g.features().view());
        for backbone in [Backbone::Gae, Backbone::Gnae, Backbone::Vgnae] {
            let cfg = small_cfg(backbone);
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let params = EncoderParams::init(&cfg, 3, &mut rng);
            let noise = EncodeNoise::sample(&cfg, 5, true, &mut rng);
            let weights = (
                Array2::from_shape_simple_fn((5, 5), || rng.random_range(-1.0..1.0)),
                Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0)),
                Array2::from_shape_simple_fn((5, 3), || rng.random_range(-1.0..1.0)),
            );
            let (_, grads) = objective(&x, &op, &params, &cfg, &noise, &weights);
            let h = 1e-6;
            for t in 0..3 {
                let n_entries = params.tensors()[t].1.len();
                for idx in 0..n_entries {
                    if t == 2 && !backbone.is_variational() {
                        continue;
                    }
                    let mut plus = params.clone();
                    plus.tensors_mut()[t].as_slice_mut().unwrap()[idx] += h;
                    let mut minus = params.clone();
                    minus.tensors_mut()[t].as_slice_mut().unwrap()[idx] -= h;
                    let fd = (objective(&x, &op, &plus, &cfg, &noise, &weights).0
                        - objective(&x, &op, &minus, &cfg, &noise, &weights).0)
                        / (2.0 * h);
                    let an = grads.tensors()[t].1.as_slice().unwrap()[idx];
                    let scale = fd.abs().max(an.abs()).max(1e-6);
                    assert!(
                        (fd - an).abs() / scale < 1e-4,
                        "{backbone} tensor {t} entry {idx}: analytic {an} vs numeric {fd}"
                    );
                }
            }
        }
    }
}
