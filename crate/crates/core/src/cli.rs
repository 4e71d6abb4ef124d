//! The `coeba` command-line interface.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::eba::eba_augment;
use crate::error::{Error, Result};
use crate::eval::{cluster_diagnostic, distance_diagnostic, histogram, EvalReport, SplitScore};
use crate::graph::{degrees, split_edges, EdgeSplit, Graph};
use crate::model::{decode_full, Backbone};
use crate::report::{self, RunReport, Summary, SummaryRow};
use crate::trainer::{
    embed, plug_configs, run_experiment, run_seed, score_hits, warmup, Arm, Experiment, GraphView, TrainData,
};

#[derive(Debug, Parser)]
#[command(
    name = "coeba",
    version,
    about = "Contrastive link prediction with edge balancing augmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Configuration file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for independent runs.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Extra Hits@K cutoff reported next to Hits@10.
    #[arg(long)]
    pub k: Option<usize>,
    /// Override one configuration key, e.g. `--set eba.r_m=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full method over all configured splits.
    Train(Common),
    /// Ablation arms.
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        arm: Vec<Arm>,
    },
    /// A backbone with and without augmentation on identical splits.
    Plug {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        backbone: Backbone,
    },
    /// Warm up and write one augmented view.
    Augment {
        #[command(flatten)]
        common: Common,
        /// Split whose training graph is augmented.
        #[arg(long, default_value_t = 0)]
        split: u64,
        /// Augment the complete graph instead of a training split.
        #[arg(long)]
        full_graph: bool,
    },
    /// Latent-space diagnostics of a checkpoint.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split manifest; its training graph feeds the encoder and its test edges are scored.
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Number of k-means clusters.
        #[arg(long)]
        clusters: Option<usize>,
    },
    /// Sensitivity surface over removal and addition ratios.
    Grid {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        rm: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        ra: Vec<f64>,
    },
    /// Score a checkpoint on a stored split.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
    },
}

/// Parses `argv` (program name first), runs the command and returns the exit status.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Train(common) => {
            let cfg = load_config(&common)?;
            let g = cfg.data.load()?;
            let exp = run_experiment(&g, &cfg.train)?;
            let run = write_experiment(&common.out, Arm::Full.label(), &cfg, &g, &exp)?;
            print_summary(&run);
            Ok(())
        }
        Command::Ablate { common, arm } => {
            let cfg = load_config(&common)?;
            let g = cfg.data.load()?;
            let mut rows = Vec::new();
            for a in arm {
                let arm_cfg = ExperimentConfig {
                    train: a.apply(&cfg.train),
                    ..cfg.clone()
                };
                let exp = run_experiment(&g, &arm_cfg.train)?;
                let dir = common.out.join(a.to_string());
                let run = write_experiment(&dir, a.label(), &arm_cfg, &g, &exp)?;
                print_summary(&run);
                rows.push(SummaryRow::from_run(&a.to_string(), &run));
            }
            write_summary(&common.out, "ablate", &cfg, rows)
        }
        Command::Plug { common, backbone } => {
            let cfg = load_config(&common)?;
            let g = cfg.data.load()?;
            let (base, plus) = plug_configs(&cfg.train, backbone);
            let name = backbone.to_string().to_uppercase();
            let base_exp = run_experiment(&g, &base)?;
            let plus_exp = run_experiment(&g, &plus)?;
            let hashes = |e: &Experiment| -> Vec<String> {
                e.report
                    .per_split_scores
                    .iter()
                    .map(|s| s.manifest_sha256.clone())
                    .collect()
            };
            if hashes(&base_exp) != hashes(&plus_exp) {
                return Err(Error::Precondition(
                    "baseline and augmented runs used different splits".into(),
                ));
            }
            let mut rows = Vec::new();
            for (dir, label, train, exp) in [
                ("baseline", name.clone(), base, &base_exp),
                ("eba", format!("{name}+EBA"), plus, &plus_exp),
            ] {
                let run_cfg = ExperimentConfig { train, ..cfg.clone() };
                let run = write_experiment(&common.out.join(dir), &label, &run_cfg, &g, exp)?;
                print_summary(&run);
                rows.push(SummaryRow::from_run(dir, &run));
            }
            write_summary(&common.out, "plug", &cfg, rows)
        }
        Command::Augment {
            common,
            split,
            full_graph,
        } => augment(&common, split, full_graph),
        Command::Diagnose {
            common,
            checkpoint,
            manifest,
            clusters,
        } => diagnose(&common, &checkpoint, manifest.as_deref(), clusters),
        Command::Grid { common, rm, ra } => {
            let cfg = load_config(&common)?;
            let g = cfg.data.load()?;
            let mut rows = Vec::new();
            let mut table = String::from("# r_m\tr_a\thits10_mean\thits10_std\n");
            for &r_m in &rm {
                for &r_a in &ra {
                    let mut point = cfg.clone();
                    point.train.eba.r_m = r_m;
                    point.train.eba.r_a = r_a;
                    if let Err(e) = point.validate() {
                        log::warn!("skipping r_m={r_m} r_a={r_a}: {e}");
                        continue;
                    }
                    let exp = run_experiment(&g, &point.train)?;
                    let name = format!("rm{r_m}_ra{r_a}");
                    let run = write_experiment(&common.out.join(&name), &name, &point, &g, &exp)?;
                    print_summary(&run);
                    let row = SummaryRow::from_run(&name, &run);
                    let _ = writeln!(table, "{r_m}\t{r_a}\t{}\t{}", row.hits10_mean, row.hits10_std);
                    rows.push(row);
                }
            }
            if rows.is_empty() {
                return Err(Error::Config("no grid point satisfies r_a > r_m".into()));
            }
            write_text(&common.out.join("grid.tsv"), &table)?;
            write_summary(&common.out, "grid", &cfg, rows)
        }
        Command::Eval {
            common,
            checkpoint,
            manifest,
        } => eval(&common, &checkpoint, &manifest),
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        cfg.set(k, v)?;
    }
    if let Some(seed) = common.seed {
        cfg.train.seed = seed;
    }
    if let Some(w) = common.workers {
        cfg.train.workers = w;
    }
    if let Some(k) = common.k {
        if !cfg.train.eval.ks.contains(&k) {
            cfg.train.eval.ks.push(k);
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn print_summary(run: &RunReport) {
    for (k, s) in &run.report.hits_at_k {
        println!(
            "{}: hits@{k} = {:.2} ± {:.2} over {} split(s)",
            run.label,
            100.0 * s.mean,
            100.0 * s.std,
            run.report.per_split_scores.len()
        );
    }
}

fn write_summary(out: &Path, command: &str, cfg: &ExperimentConfig, rows: Vec<SummaryRow>) -> Result<()> {
    create_dir(out)?;
    let summary = Summary {
        command: command.to_string(),
        dataset: cfg.data.name.clone(),
        rows,
    };
    report::write(out.join("summary.json"), &summary)
}

fn write_diagnostic_tables(dir: &Path, report: &EvalReport) -> Result<()> {
    if let Some(d) = &report.distance_stats {
        let hi = d.connected.iter().chain(&d.unconnected).fold(0.0f64, |a, &b| a.max(b));
        for (name, values) in [
            ("distance_connected.tsv", &d.connected),
            ("distance_unconnected.tsv", &d.unconnected),
        ] {
            let mut text = String::from("# distance\tcount\n");
            for (centre, count) in histogram(values, 0.0, hi, 50) {
                let _ = writeln!(text, "{centre}\t{count}");
            }
            write_text(&dir.join(name), &text)?;
        }
    }
    if let Some(c) = &report.cluster_stats {
        let mut text = format!(
            "# graph density {}\tmodularity {}\n# cluster\tsize\tdensity\n",
            c.graph_density, c.modularity
        );
        for (i, (size, density)) in c.sizes.iter().zip(&c.densities).enumerate() {
            let _ = writeln!(text, "{i}\t{size}\t{density}");
        }
        write_text(&dir.join("cluster_density.tsv"), &text)?;
    }
    Ok(())
}

/// Writes the report, configuration, per-split logs, manifests and checkpoints of one experiment.
pub fn write_experiment(
    dir: &Path,
    label: &str,
    cfg: &ExperimentConfig,
    g: &Graph,
    exp: &Experiment,
) -> Result<RunReport> {
    create_dir(dir)?;
    write_text(&dir.join("config.cfg"), &cfg.to_text())?;
    for run in &exp.runs {
        let sub = dir.join(format!("split{}", run.split.seed));
        create_dir(&sub)?;
        run.split.write_manifest(sub.join("split.txt"))?;
        run.outcome.log.write_tsv(sub.join("train.log"))?;
        let last = run.outcome.log.records.last().map_or(0, |r| r.epoch);
        let best_name = format!("epoch{}.ckpt", run.outcome.best_epoch);
        let final_name = format!("epoch{last}.ckpt");
        Checkpoint {
            encoder: cfg.train.encoder.clone(),
            params: run.outcome.best_params.clone(),
            epoch: run.outcome.best_epoch,
        }
        .save(sub.join(&best_name))?;
        if final_name != best_name {
            Checkpoint {
                encoder: cfg.train.encoder.clone(),
                params: run.outcome.final_params.clone(),
                epoch: last,
            }
            .save(sub.join(&final_name))?;
        }
        write_text(
            &sub.join("checkpoints.txt"),
            &format!("best = {best_name}\nfinal = {final_name}\n"),
        )?;
        if let Some(view) = &run.outcome.view {
            debug_assert_eq!(view.graph.n_nodes(), g.n_nodes());
        }
    }
    write_diagnostic_tables(dir, &exp.report)?;
    let run = RunReport::new(label, cfg, exp.report.clone());
    report::write(dir.join("report.json"), &run)?;
    Ok(run)
}

fn augment(common: &Common, split: u64, full_graph: bool) -> Result<()> {
    let cfg = load_config(common)?;
    let g = cfg.data.load()?;
    let (base, held_out) = if full_graph {
        (g.clone(), Vec::new())
    } else {
        let s = split_edges(&g, cfg.train.split, split)?;
        (s.train_graph(&g)?, s.test_pos)
    };
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = run_seed(cfg.train.seed, split);
    let data = TrainData {
        graph: &base,
        valid: None,
        held_out: &held_out,
    };
    let (params, a_pred, _) = warmup(data, &train_cfg)?;
    let z = embed(&params, &GraphView::new(base.clone()), &train_cfg.encoder)?.z;
    let mut rng = ChaCha8Rng::seed_from_u64(train_cfg.seed);
    let view = eba_augment(
        &base,
        &z,
        &a_pred,
        &train_cfg.eba,
        train_cfg.eba.warmup_epochs,
        &mut rng,
    )?;
    create_dir(&common.out)?;
    view.write(
        common.out.join("augmented.edges"),
        common.out.join("augmented.features"),
    )?;
    let (d0, d1) = (degrees(&base).min, degrees(view.adjacency()).min);
    let body = serde_json::json!({
        "edges_original": base.n_edges(),
        "edges_augmented": view.adjacency().n_edges(),
        "min_degree_original": d0,
        "min_degree_augmented": d1,
    });
    report::write(common.out.join("augment.json"), &body)?;
    println!(
        "augmented view: {} -> {} edges, minimum degree {d0} -> {d1}",
        base.n_edges(),
        view.adjacency().n_edges()
    );
    Ok(())
}

struct Loaded {
    cfg: ExperimentConfig,
    graph: Graph,
    ckpt: Checkpoint,
    split: Option<EdgeSplit>,
    encoder_input: Graph,
}

fn load_for_scoring(common: &Common, checkpoint: &Path, manifest: Option<&Path>) -> Result<Loaded> {
    let cfg = load_config(common)?;
    let graph = cfg.data.load()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    if ckpt.params.in_dim() != graph.feature_dim() {
        return Err(Error::Shape(format!(
            "checkpoint expects {} features, graph has {}",
            ckpt.params.in_dim(),
            graph.feature_dim()
        )));
    }
    let split = manifest.map(EdgeSplit::read_manifest).transpose()?;
    let encoder_input = match &split {
        Some(s) => s.train_graph(&graph)?,
        None => graph.clone(),
    };
    Ok(Loaded {
        cfg,
        graph,
        ckpt,
        split,
        encoder_input,
    })
}

fn split_score(l: &Loaded, split: &EdgeSplit, z: &ndarray::Array2<f64>) -> Result<SplitScore> {
    let mut hits = std::collections::BTreeMap::new();
    for &k in l.cfg.train.eval.ks.iter().chain(std::iter::once(&10)) {
        hits.insert(k, score_hits(z, &split.test_pos, &split.test_neg, k)?);
    }
    let d = degrees(&l.encoder_input).min;
    Ok(SplitScore {
        split_seed: split.seed,
        manifest_sha256: split.digest(),
        best_epoch: l.ckpt.epoch,
        valid_hits10: score_hits(z, &split.valid_pos, &split.valid_neg, 10)?,
        hits,
        min_degree_original: d,
        min_degree_augmented: d,
    })
}

fn diagnose(common: &Common, checkpoint: &Path, manifest: Option<&Path>, clusters: Option<usize>) -> Result<()> {
    let l = load_for_scoring(common, checkpoint, manifest)?;
    let z = embed(
        &l.ckpt.params,
        &GraphView::new(l.encoder_input.clone()),
        &l.ckpt.encoder,
    )?
    .z;
    let scores = match &l.split {
        Some(s) => vec![split_score(&l, s, &z)?],
        None => Vec::new(),
    };
    let mut report = EvalReport::from_splits(scores);
    let mut rng = ChaCha8Rng::seed_from_u64(l.cfg.train.seed);
    let view = eba_augment(
        &l.encoder_input,
        &z,
        &decode_full(&z),
        &l.cfg.train.eba,
        l.ckpt.epoch,
        &mut rng,
    )?;
    report.min_degree_original = degrees(&l.encoder_input).min;
    report.min_degree_augmented = degrees(view.adjacency()).min;
    report.distance_stats = Some(distance_diagnostic(
        &z,
        &l.graph,
        l.cfg.train.eval.distance_sample,
        &mut rng,
    )?);
    let k = clusters.unwrap_or(l.cfg.train.eval.cluster_k);
    report.cluster_stats = Some(cluster_diagnostic(&z, &l.graph, k, &mut rng)?);
    create_dir(&common.out)?;
    write_diagnostic_tables(&common.out, &report)?;
    let run = RunReport::new("diagnose", &l.cfg, report);
    report::write(common.out.join("report.json"), &run)?;
    let (d, c) = (
        run.report.distance_stats.as_ref().expect("set above"),
        run.report.cluster_stats.as_ref().expect("set above"),
    );
    println!(
        "distance connected {:.4} / unconnected {:.4}; k={} modularity {:.4}, min cluster density {:.4} vs graph {:.6}; min degree {} -> {}",
        d.connected_mean,
        d.unconnected_mean,
        c.k,
        c.modularity,
        c.densities.iter().copied().fold(f64::INFINITY, f64::min),
        c.graph_density,
        run.report.min_degree_original,
        run.report.min_degree_augmented
    );
    Ok(())
}

fn eval(common: &Common, checkpoint: &Path, manifest: &Path) -> Result<()> {
    let l = load_for_scoring(common, checkpoint, Some(manifest))?;
    let split = l.split.as_ref().expect("manifest given");
    let z = embed(
        &l.ckpt.params,
        &GraphView::new(l.encoder_input.clone()),
        &l.ckpt.encoder,
    )?
    .z;
    let report = EvalReport::from_splits(vec![split_score(&l, split, &z)?]);
    create_dir(&common.out)?;
    let run = RunReport::new("eval", &l.cfg, report);
    report::write(common.out.join("report.json"), &run)?;
    print_summary(&run);
    Ok(())
}
