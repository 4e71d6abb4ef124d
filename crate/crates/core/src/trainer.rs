//! Training loop, multi-split experiments and ablation arms.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eba::{eba_augment, AugmentedView, EbaConfig};
use crate::error::{Error, Result};
use crate::eval::{cluster_diagnostic, distance_diagnostic, hits_at_k, pearson, EvalReport, SplitScore};
use crate::graph::{degrees, split_edges, Edge, EdgeSplit, Graph, SplitRatios};
use crate::losses::{
    btn_cl_grad, overall_loss, recon_loss_grad, within_cl_aug_grad, within_cl_ori_grad, LossComponents, LossConfig,
};
use crate::model::{
    decode_full, encode_backward, encode_forward, Backbone, EncodeNoise, EncoderConfig, EncoderParams, LatentGrad,
    LatentState,
};
use crate::optim::{Adam, AdamConfig};
use crate::sparse::{normalized_adjacency, Csr, PropagationOperator};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Cutoffs reported on the test split. Validation always uses Hits@10.
    pub ks: Vec<usize>,
    pub cluster_k: usize,
    /// Cap on connected pairs for the distance diagnostic; 0 uses every edge.
    pub distance_sample: usize,
    /// Run the distance and cluster diagnostics on the first split.
    pub diagnostics: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            ks: vec![10],
            cluster_k: 5,
            distance_sample: 0,
            diagnostics: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: AdamConfig,
    pub epochs: usize,
    pub eba: EbaConfig,
    pub loss: LossConfig,
    pub encoder: EncoderConfig,
    pub seed: u64,
    pub num_splits: usize,
    pub split: SplitRatios,
    pub eval_every: usize,
    /// Epochs without a validation improvement before stopping; `None` disables.
    pub early_stop_patience: Option<usize>,
    /// Warm up on reconstruction alone instead of reconstruction plus the within-view loss.
    pub warmup_recon_only: bool,
    pub eval: EvalConfig,
    /// Worker threads for independent splits; 0 uses every available core.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: AdamConfig::default(),
            epochs: 1000,
            eba: EbaConfig::default(),
            loss: LossConfig::default(),
            encoder: EncoderConfig::default(),
            seed: 0,
            num_splits: 10,
            split: SplitRatios::default(),
            eval_every: 10,
            early_stop_patience: None,
            warmup_recon_only: false,
            eval: EvalConfig::default(),
            workers: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        self.eba.validate()?;
        self.loss.validate()?;
        self.encoder.validate()?;
        self.split.validate()?;
        if self.epochs <= self.eba.warmup_epochs {
            return Err(Error::Config(format!(
                "train.epochs ({}) must exceed eba.warmup_epochs ({})",
                self.epochs, self.eba.warmup_epochs
            )));
        }
        if self.eval_every == 0 {
            return Err(Error::Config("train.eval_every must be positive".into()));
        }
        if self.num_splits == 0 {
            return Err(Error::Config("train.num_splits must be positive".into()));
        }
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::Config("eval.k values must be positive".into()));
        }
        if self.eval.cluster_k < 2 {
            return Err(Error::Config("eval.cluster_k must be at least 2".into()));
        }
        Ok(())
    }

    /// Whether the augmented branch contributes anything. With augmentation off and
    /// no contrastive term reading it, it would only repeat the original reconstruction.
    pub fn uses_augmented_view(&self) -> bool {
        self.eba.enabled || self.loss.lambda3 > 0.0 || self.loss.btn_weight > 0.0
    }
}

/// Graph plus the derived encoder inputs.
#[derive(Debug, Clone)]
pub struct GraphView {
    pub graph: Graph,
    pub x: Csr,
    pub op: PropagationOperator,
}

impl GraphView {
    pub fn new(graph: Graph) -> Self {
        let x = Csr::from_dense(graph.features().view());
        let op = normalized_adjacency(&graph);
        GraphView { graph, x, op }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Warmup,
    Main,
}

/// Randomness consumed by one objective evaluation.
#[derive(Debug, Clone)]
pub struct StepNoise {
    pub ori: EncodeNoise,
    pub aug: EncodeNoise,
    /// Seeds negative sampling in sampled reconstruction.
    pub recon_seed: u64,
}

impl StepNoise {
    pub fn sample<R: Rng + ?Sized>(cfg: &EncoderConfig, n_nodes: usize, rng: &mut R) -> Self {
        StepNoise {
            ori: EncodeNoise::sample(cfg, n_nodes, true, rng),
            aug: EncodeNoise::sample(cfg, n_nodes, true, rng),
            recon_seed: rng.random(),
        }
    }

    pub fn none() -> Self {
        StepNoise {
            ori: EncodeNoise::none(),
            aug: EncodeNoise::none(),
            recon_seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Objective {
    pub components: LossComponents,
    pub total: f64,
    pub grad: EncoderParams,
}

fn scaled(mut g: LatentGrad, w: f64) -> LatentGrad {
    g.z *= w;
    g.mu *= w;
    g.logvar *= w;
    g
}

/// Evaluates the training objective and its gradient with respect to every encoder weight.
///
/// Warm-up uses the original view only. In the main phase `aug` must be present
/// unless [`TrainConfig::uses_augmented_view`] is false.
pub fn objective(
    params: &EncoderParams,
    ori: &GraphView,
    aug: Option<&GraphView>,
    cfg: &TrainConfig,
    phase: Phase,
    noise: StepNoise,
) -> Result<Objective> {
    let enc = &cfg.encoder;
    let lc = &cfg.loss;
    let variational = enc.backbone.is_variational();
    let mut recon_rng = ChaCha8Rng::seed_from_u64(noise.recon_seed);
    let mut c = LossComponents::default();

    let (lat, tape) = encode_forward(&ori.x, &ori.op, params, enc, noise.ori)?;
    let (n, d) = lat.z.dim();
    let (recon_w, cnst_ori_w) = match phase {
        Phase::Warmup if cfg.warmup_recon_only => (1.0, 0.0),
        Phase::Warmup => (1.0, lc.lambda2),
        Phase::Main => (lc.lambda1, lc.lambda2),
    };

    let (v, g) = recon_loss_grad(&ori.graph, &lat, lc, variational, &mut recon_rng)?;
    c.recon_ori = v;
    let mut grad_ori = scaled(g, recon_w);
    if cnst_ori_w > 0.0 {
        let (v, dz) = within_cl_ori_grad(&lat.z, &ori.graph, lc)?;
        c.cnst_ori = v;
        grad_ori.z.scaled_add(cnst_ori_w, &dz);
    }

    let aug = match (phase, aug) {
        (Phase::Main, Some(view)) => Some(view),
        (Phase::Main, None) if cfg.uses_augmented_view() => {
            return Err(Error::Precondition("main phase needs an augmented view".into()))
        }
        _ => None,
    };
    let mut param_grad;
    let total;
    if let Some(view) = aug {
        let (lat_aug, tape_aug) = encode_forward(&view.x, &view.op, params, enc, noise.aug)?;
        let (v, g) = recon_loss_grad(&view.graph, &lat_aug, lc, variational, &mut recon_rng)?;
        c.recon_aug = v;
        let mut grad_aug = scaled(g, lc.lambda1);
        if lc.lambda3 > 0.0 {
            let (v, dz) = within_cl_aug_grad(&lat_aug.z, lc)?;
            c.cnst_aug = v;
            grad_aug.z.scaled_add(lc.lambda3, &dz);
        }
        if lc.btn_weight > 0.0 {
            let (v, dz, dz_aug) = btn_cl_grad(&lat.z, &lat_aug.z, &view.graph, lc)?;
            c.btn = v;
            grad_ori.z.scaled_add(lc.btn_weight, &dz);
            grad_aug.z.scaled_add(lc.btn_weight, &dz_aug);
        }
        total = overall_loss(&c, lc)?;
        param_grad = encode_backward(&ori.x, &ori.op, params, enc, &lat, &tape, grad_ori);
        let g_aug = encode_backward(&view.x, &view.op, params, enc, &lat_aug, &tape_aug, grad_aug);
        param_grad.scaled_add(1.0, &g_aug);
    } else {
        total = recon_w * c.recon_ori + cnst_ori_w * c.cnst_ori;
        if !total.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss component in {c:?}")));
        }
        param_grad = encode_backward(&ori.x, &ori.op, params, enc, &lat, &tape, grad_ori);
    }
    debug_assert_eq!(param_grad.w_mu.dim(), (enc.hidden_dim, d));
    debug_assert!(n == ori.graph.n_nodes());
    Ok(Objective {
        components: c,
        total,
        grad: param_grad,
    })
}

/// Deterministic embeddings (no dropout, `z = mu`).
pub fn embed(params: &EncoderParams, view: &GraphView, enc: &EncoderConfig) -> Result<LatentState> {
    encode_forward(&view.x, &view.op, params, enc, EncodeNoise::none()).map(|(lat, _)| lat)
}

/// Inner-product scores of node pairs. Ranking on these equals ranking on the
/// decoder probabilities without the ties that saturation of the sigmoid creates.
pub fn pair_scores(z: &Array2<f64>, pairs: &[Edge]) -> Result<Vec<f64>> {
    let n = z.nrows();
    pairs
        .iter()
        .map(|&(u, v)| {
            if u >= n || v >= n {
                Err(Error::Range {
                    id: u.max(v),
                    n_nodes: n,
                })
            } else {
                Ok(z.row(u).dot(&z.row(v)))
            }
        })
        .collect()
}

pub fn score_hits(z: &Array2<f64>, pos: &[Edge], neg: &[Edge], k: usize) -> Result<f64> {
    hits_at_k(&pair_scores(z, pos)?, &pair_scores(z, neg)?, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub components: LossComponents,
    pub total: f64,
    pub val_hits10: Option<f64>,
    /// Set on epochs that regenerated the augmented view.
    pub augmented: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
    pub checkpoint: Option<String>,
}

impl TrainLog {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# epoch\trecon_ori\trecon_aug\tcnst_ori\tcnst_aug\tbtn\tall\tval_hits10\n");
        for r in &self.records {
            let c = &r.components;
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
                r.epoch, c.recon_ori, c.recon_aug, c.cnst_ori, c.cnst_aug, c.btn, r.total
            );
            if let Some(h) = r.val_hits10 {
                let _ = write!(out, "{h}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_tsv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn last_total(&self) -> Option<f64> {
        self.records.last().map(|r| r.total)
    }
}

/// What the trainer may see of a split.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub graph: &'a Graph,
    /// Validation positives and negatives for model selection.
    pub valid: Option<(&'a [Edge], &'a [Edge])>,
    /// Edges that must never appear in the training graph.
    pub held_out: &'a [Edge],
}

impl<'a> TrainData<'a> {
    pub fn unsupervised(graph: &'a Graph) -> Self {
        TrainData {
            graph,
            valid: None,
            held_out: &[],
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: EncoderParams,
    pub final_params: EncoderParams,
    pub best_epoch: usize,
    pub best_valid_hits10: Option<f64>,
    pub log: TrainLog,
    pub view: Option<AugmentedView>,
}

/// Stepwise trainer over one training graph.
pub struct Trainer<'a> {
    cfg: &'a TrainConfig,
    data: TrainData<'a>,
    ori: GraphView,
    aug: Option<GraphView>,
    view: Option<AugmentedView>,
    params: EncoderParams,
    opt: Adam,
    rng: ChaCha8Rng,
    epoch: usize,
    log: TrainLog,
    best: Option<(f64, usize, EncoderParams)>,
}

impl<'a> Trainer<'a> {
    pub fn new(data: TrainData<'a>, cfg: &'a TrainConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let params = EncoderParams::init(&cfg.encoder, data.graph.feature_dim(), &mut rng);
        Self::with_params(data, cfg, params, rng)
    }

    pub fn with_params(
        data: TrainData<'a>,
        cfg: &'a TrainConfig,
        params: EncoderParams,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        params.check_shapes(&cfg.encoder, data.graph.feature_dim())?;
        let opt = Adam::new(cfg.optimizer.clone(), &params);
        Ok(Trainer {
            cfg,
            data,
            ori: GraphView::new(data.graph.clone()),
            aug: None,
            view: None,
            params,
            opt,
            rng,
            epoch: 0,
            log: TrainLog::default(),
            best: None,
        })
    }

    pub fn params(&self) -> &EncoderParams {
        &self.params
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn log(&self) -> &TrainLog {
        &self.log
    }

    pub fn view(&self) -> Option<&AugmentedView> {
        self.view.as_ref()
    }

    pub fn phase(&self) -> Phase {
        if self.epoch < self.cfg.eba.warmup_epochs {
            Phase::Warmup
        } else {
            Phase::Main
        }
    }

    /// Full predicted adjacency of the current parameters, without dropout or sampling.
    pub fn predicted_adjacency(&self) -> Result<Array2<f64>> {
        Ok(decode_full(&embed(&self.params, &self.ori, &self.cfg.encoder)?.z))
    }

    fn check_leakage(&self) -> Result<()> {
        if let Some(&(u, v)) = self
            .data
            .held_out
            .iter()
            .find(|&&(u, v)| self.data.graph.has_edge(u, v))
        {
            return Err(Error::Training {
                epoch: self.epoch,
                msg: format!("held-out edge ({u}, {v}) is present in the training graph"),
            });
        }
        Ok(())
    }

    fn refresh_view(&mut self) -> Result<()> {
        self.check_leakage()?;
        let g = self.data.graph;
        let view = if self.cfg.eba.enabled {
            let z = embed(&self.params, &self.ori, &self.cfg.encoder)?.z;
            let a_pred = decode_full(&z);
            eba_augment(g, &z, &a_pred, &self.cfg.eba, self.epoch, &mut self.rng)?
        } else {
            AugmentedView::identity(g, self.epoch, &self.cfg.eba)
        };
        self.aug = Some(GraphView::new(view.graph.clone()));
        self.view = Some(view);
        Ok(())
    }

    fn validation_hits(&self) -> Result<Option<f64>> {
        let Some((pos, neg)) = self.data.valid else {
            return Ok(None);
        };
        let z = embed(&self.params, &self.ori, &self.cfg.encoder)?.z;
        score_hits(&z, pos, neg, 10).map(Some)
    }

    /// Runs one epoch: optional re-augmentation, one optimiser step, optional validation.
    pub fn step(&mut self) -> Result<&EpochRecord> {
        let e = self.epoch;
        let phase = self.phase();
        let wants_view = phase == Phase::Main && self.cfg.uses_augmented_view();
        let augmented = wants_view && (self.view.is_none() || e.is_multiple_of(self.cfg.eba.period));
        if augmented {
            self.refresh_view()?;
        }
        let noise = StepNoise::sample(&self.cfg.encoder, self.data.graph.n_nodes(), &mut self.rng);
        let aug = if wants_view { self.aug.as_ref() } else { None };
        let obj = objective(&self.params, &self.ori, aug, self.cfg, phase, noise).map_err(|err| match err {
            Error::Numeric(msg) => Error::Training { epoch: e, msg },
            other => other,
        })?;
        self.opt
            .step(&mut self.params, &obj.grad)
            .map_err(|err| Error::Training {
                epoch: e,
                msg: err.to_string(),
            })?;
        let due = (e + 1).is_multiple_of(self.cfg.eval_every) || e + 1 == self.cfg.epochs;
        let val = if due { self.validation_hits()? } else { None };
        if let Some(h) = val {
            if self.best.as_ref().is_none_or(|b| h > b.0) {
                self.best = Some((h, e, self.params.clone()));
            }
        }
        self.epoch += 1;
        self.log.records.push(EpochRecord {
            epoch: e,
            phase,
            components: obj.components,
            total: obj.total,
            val_hits10: val,
            augmented,
        });
        Ok(self.log.records.last().expect("record just pushed"))
    }

    fn should_stop(&self) -> bool {
        match (self.cfg.early_stop_patience, &self.best) {
            (Some(patience), Some((_, best_epoch, _))) => {
                self.phase() == Phase::Main && self.epoch > best_epoch + patience
            }
            _ => false,
        }
    }

    pub fn run(mut self) -> Result<TrainOutcome> {
        while self.epoch < self.cfg.epochs {
            self.step()?;
            if self.should_stop() {
                log::info!("early stop after epoch {}", self.epoch - 1);
                break;
            }
        }
        let last = self.epoch.saturating_sub(1);
        let (best_valid, best_epoch, best_params) = match self.best {
            Some((h, e, p)) => (Some(h), e, p),
            None => (None, last, self.params.clone()),
        };
        Ok(TrainOutcome {
            best_params,
            final_params: self.params,
            best_epoch,
            best_valid_hits10: best_valid,
            log: self.log,
            view: self.view,
        })
    }
}

/// Trains on the original graph for the warm-up epochs and returns the parameters
/// with the predicted adjacency they induce.
pub fn warmup(data: TrainData<'_>, cfg: &TrainConfig) -> Result<(EncoderParams, Array2<f64>, TrainLog)> {
    let mut trainer = Trainer::new(data, cfg)?;
    while trainer.epoch() < cfg.eba.warmup_epochs.min(cfg.epochs) {
        trainer.step()?;
    }
    let a_pred = trainer.predicted_adjacency()?;
    Ok((trainer.params.clone(), a_pred, trainer.log))
}

pub fn train(data: TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    Trainer::new(data, cfg)?.run()
}

/// Seed of the model randomness for one split.
pub fn run_seed(seed: u64, split_seed: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(split_seed);
    rng.next_u64()
}

#[derive(Debug, Clone)]
pub struct SplitRun {
    pub split: EdgeSplit,
    pub outcome: TrainOutcome,
    pub score: SplitScore,
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub report: EvalReport,
    pub runs: Vec<SplitRun>,
}

fn run_split(g: &Graph, cfg: &TrainConfig, split_seed: u64) -> Result<SplitRun> {
    let split = split_edges(g, cfg.split, split_seed)?;
    run_on_split(g, cfg, split)
}

/// Trains and scores one stored split.
pub fn run_on_split(g: &Graph, cfg: &TrainConfig, split: EdgeSplit) -> Result<SplitRun> {
    let train_graph = split.train_graph(g)?;
    let data = TrainData {
        graph: &train_graph,
        valid: Some((&split.valid_pos, &split.valid_neg)),
        held_out: &split.test_pos,
    };
    let run_cfg = TrainConfig {
        seed: run_seed(cfg.seed, split.seed),
        ..cfg.clone()
    };
    let outcome = train(data, &run_cfg)?;
    let view = GraphView::new(train_graph.clone());
    let z = embed(&outcome.best_params, &view, &cfg.encoder)?.z;
    let mut hits = BTreeMap::new();
    for &k in cfg.eval.ks.iter().chain(std::iter::once(&10)) {
        hits.insert(k, score_hits(&z, &split.test_pos, &split.test_neg, k)?);
    }
    let min_degree_original = degrees(&train_graph).min;
    let min_degree_augmented = outcome
        .view
        .as_ref()
        .map_or(min_degree_original, |v| degrees(v.adjacency()).min);
    let score = SplitScore {
        split_seed: split.seed,
        manifest_sha256: split.digest(),
        best_epoch: outcome.best_epoch,
        valid_hits10: outcome.best_valid_hits10.unwrap_or(0.0),
        hits,
        min_degree_original,
        min_degree_augmented,
    };
    Ok(SplitRun { split, outcome, score })
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Trains one model per split seed `0..num_splits` and aggregates test Hits@K.
pub fn run_experiment(g: &Graph, cfg: &TrainConfig) -> Result<Experiment> {
    cfg.validate()?;
    let splits: Vec<u64> = (0..cfg.num_splits as u64).collect();
    let runs: Vec<SplitRun> = pool(cfg.workers)?.install(|| {
        splits
            .par_iter()
            .map(|&s| run_split(g, cfg, s))
            .collect::<Result<Vec<_>>>()
    })?;
    finish_experiment(g, cfg, runs)
}

/// Aggregates finished split runs and attaches diagnostics from the first one.
pub fn finish_experiment(g: &Graph, cfg: &TrainConfig, runs: Vec<SplitRun>) -> Result<Experiment> {
    let mut report = EvalReport::from_splits(runs.iter().map(|r| r.score.clone()).collect());
    if let (true, Some(first)) = (cfg.eval.diagnostics, runs.first()) {
        let train_graph = first.split.train_graph(g)?;
        let z = embed(&first.outcome.best_params, &GraphView::new(train_graph), &cfg.encoder)?.z;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        report.distance_stats = Some(distance_diagnostic(&z, g, cfg.eval.distance_sample, &mut rng)?);
        report.cluster_stats = match cluster_diagnostic(&z, g, cfg.eval.cluster_k, &mut rng) {
            Ok(stats) => Some(stats),
            Err(err @ (Error::Clustering(_) | Error::Precondition(_))) => {
                log::warn!("cluster diagnostic skipped: {err}");
                None
            }
            Err(err) => return Err(err),
        };
    }
    if runs.len() >= 2 {
        let degs: Vec<f64> = runs.iter().map(|r| r.score.min_degree_augmented as f64).collect();
        let hits: Vec<f64> = runs.iter().map(|r| r.score.hits[&10]).collect();
        report.degree_hits_correlation = pearson(&degs, &hits).ok();
    }
    Ok(Experiment { report, runs })
}

/// Ablation arms, each a projection of the full configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Full,
    NoEba,
    NoCl,
    NoWithinCl,
    NoBtnCl,
    NoEbaCl,
}

impl Arm {
    pub const ALL: [Arm; 6] = [
        Arm::NoEbaCl,
        Arm::NoCl,
        Arm::NoWithinCl,
        Arm::NoBtnCl,
        Arm::NoEba,
        Arm::Full,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Arm::Full => "CoEBA",
            Arm::NoEba => "w/o EBA",
            Arm::NoCl => "w/o CL",
            Arm::NoWithinCl => "w/o within-CL",
            Arm::NoBtnCl => "w/o btn-CL",
            Arm::NoEbaCl => "w/o EBA & CL",
        }
    }

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut out = cfg.clone();
        let (no_eba, no_within, no_btn) = match self {
            Arm::Full => (false, false, false),
            Arm::NoEba => (true, false, false),
            Arm::NoCl => (false, true, true),
            Arm::NoWithinCl => (false, true, false),
            Arm::NoBtnCl => (false, false, true),
            Arm::NoEbaCl => (true, true, true),
        };
        if no_eba {
            out.eba.enabled = false;
        }
        if no_within {
            out.loss.lambda2 = 0.0;
            out.loss.lambda3 = 0.0;
        }
        if no_btn {
            out.loss.btn_weight = 0.0;
        }
        out
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::Full => "full",
            Arm::NoEba => "no_eba",
            Arm::NoCl => "no_cl",
            Arm::NoWithinCl => "no_within_cl",
            Arm::NoBtnCl => "no_btn_cl",
            Arm::NoEbaCl => "no_eba_cl",
        })
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Arm::ALL.into_iter().find(|a| a.to_string() == s.trim()).ok_or_else(|| {
            Error::Config(format!(
                "unknown arm `{s}` (expected one of no_eba_cl, no_cl, no_within_cl, no_btn_cl, no_eba, full)"
            ))
        })
    }
}

/// Backbone alone, and the backbone with augmentation feeding a second reconstruction.
pub fn plug_configs(cfg: &TrainConfig, backbone: Backbone) -> (TrainConfig, TrainConfig) {
    let mut base = cfg.clone();
    base.encoder.backbone = backbone;
    (Arm::NoEbaCl.apply(&base), Arm::NoCl.apply(&base))
}

/// Edges in the training graph that are also held out; empty when the split is clean.
pub fn leaked_edges(train: &Graph, held_out: &[Edge]) -> Vec<Edge> {
    let set: HashSet<Edge> = held_out.iter().copied().collect();
    let mut out: Vec<Edge> = train.edges().iter().copied().filter(|e| set.contains(e)).collect();
    out.sort_unstable();
    out
}
