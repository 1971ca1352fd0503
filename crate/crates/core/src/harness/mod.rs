//! Experiment pipelines: training-fraction sweep, fleet-size comparison
//! against budgeted branch and bound, and the bad-data-ratio sweep of the
//! split-inference strategies.

mod manifest;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use manifest::{digest_hex, OutputDigest, RunManifest, StageTime, TOOL_VERSION};

use crate::config::{Config, DEFAULT_CONFIG};
use crate::dataset::{label_instances, write_text, LabelRecord, LabelSolver};
use crate::error::{Error, Result};
use crate::instance_gen::{derive_seed, generate_instances};
use crate::mtl::{evaluate, score_predictions, train, DecisionRule, TrainConfig};
use crate::solvers::solve_sbb;
use crate::split::{eta_grid, eta_sweep, sweep_csv, EtaSweepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Labeled training pool for the training-fraction sweep.
    pub samples: usize,
    /// Independent test set for the training-fraction sweep.
    pub test_samples: usize,
    pub fractions: Vec<f64>,
    pub fig5b_n: Vec<usize>,
    pub fig5b_samples: usize,
    pub fig5b_test_samples: usize,
    pub fig5b_hidden: Vec<usize>,
    pub fig5b_epochs: usize,
    /// Fleet sizes above this train with the classification weight at zero.
    pub classification_off_above: usize,
    /// Decision threshold on the predicted allocation when the
    /// classification head is untrained.
    pub alloc_threshold: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            samples: 40_000,
            test_samples: 10_000,
            fractions: (1..=10).map(|i| i as f64 / 10.0).collect(),
            fig5b_n: (2..=8).collect(),
            fig5b_samples: 40_000,
            fig5b_test_samples: 2_000,
            fig5b_hidden: vec![64, 64],
            fig5b_epochs: 60,
            classification_off_above: 5,
            alloc_threshold: 0.02,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.test_samples == 0 {
            return Err(Error::Config(
                "experiment sample counts must be positive".into(),
            ));
        }
        if self.fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
            return Err(Error::Config("fractions must lie in (0, 1]".into()));
        }
        if self.fig5b_samples == 0 || self.fig5b_test_samples == 0 || self.fig5b_epochs == 0 {
            return Err(Error::Config("fig5b sizes must be positive".into()));
        }
        if self
            .fig5b_n
            .iter()
            .any(|&n| n == 0 || n > crate::system::MAX_VEHICLES)
        {
            return Err(Error::Config("fig5b_n entries must lie in 1..=16".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    #[serde(rename = "fig5a-training-fraction")]
    TrainingFraction,
    #[serde(rename = "fig5b-n-avs")]
    FleetSize,
    #[serde(rename = "fig6-eta")]
    BadDataRatio,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::TrainingFraction => "fig5a-training-fraction",
            ExperimentKind::FleetSize => "fig5b-n-avs",
            ExperimentKind::BadDataRatio => "fig6-eta",
        }
    }

    fn stem(&self) -> &'static str {
        match self {
            ExperimentKind::TrainingFraction => "fig5a",
            ExperimentKind::FleetSize => "fig5b",
            ExperimentKind::BadDataRatio => "fig6",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fig5a" | "fig5a-training-fraction" => Ok(ExperimentKind::TrainingFraction),
            "fig5b" | "fig5b-n-avs" => Ok(ExperimentKind::FleetSize),
            "fig6" | "fig6-eta" => Ok(ExperimentKind::BadDataRatio),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// `None` runs the shipped default config.
    pub config: Option<PathBuf>,
    pub seed: u64,
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionRow {
    pub fraction: f64,
    pub accuracy: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FleetRow {
    pub n: usize,
    pub acc_mtl: f64,
    pub acc_sbb: f64,
    pub mse_mtl: f64,
    pub mse_sbb: f64,
    /// Seconds per instance.
    pub time_mtl: f64,
    pub time_sbb: f64,
}

/// Oracle-labeled training pool and test set for `n` vehicles.
pub fn labeled_sets(
    cfg: &Config,
    n: usize,
    pool: usize,
    test: usize,
    seed: u64,
) -> Result<(Vec<LabelRecord>, Vec<LabelRecord>)> {
    let pool_insts = generate_instances(n, pool, &cfg.ranges, derive_seed(seed, 1000 + n as u64))?;
    let test_insts = generate_instances(n, test, &cfg.ranges, derive_seed(seed, 2000 + n as u64))?;
    Ok((
        label_instances(&pool_insts, &LabelSolver::Exhaustive)?,
        label_instances(&test_insts, &LabelSolver::Exhaustive)?,
    ))
}

/// Accuracy and allocation MSE on a fixed test set after training on each
/// fraction of a fixed pool.
pub fn run_training_fraction(cfg: &Config, seed: u64) -> Result<Vec<FractionRow>> {
    let n = cfg.ranges.n_vehicles;
    let exp = &cfg.experiment;
    let (pool, test) = labeled_sets(cfg, n, exp.samples, exp.test_samples, seed)?;
    exp.fractions
        .iter()
        .map(|&fraction| {
            let tc = TrainConfig {
                train_fraction: fraction,
                seed,
                ..cfg.train.clone()
            };
            let outcome = train(&pool, &tc)?;
            let m = evaluate(&outcome.model, &test, DecisionRule::ClassArgmax)?;
            Ok(FractionRow {
                fraction,
                accuracy: m.class_accuracy,
                mse: m.reg_mse,
            })
        })
        .collect()
}

/// Training recipe and decision rule used for `n` vehicles in the fleet-size
/// comparison.
pub fn fleet_recipe(cfg: &Config, n: usize, seed: u64) -> (TrainConfig, DecisionRule) {
    let exp = &cfg.experiment;
    let mut tc = TrainConfig {
        hidden_sizes: exp.fig5b_hidden.clone(),
        epochs: exp.fig5b_epochs,
        train_fraction: 1.0,
        seed,
        ..cfg.train.clone()
    };
    if n > exp.classification_off_above {
        tc.chi_c = 0.0;
        tc.chi_r = 1.0;
    }
    let rule = if tc.chi_c == 0.0 {
        DecisionRule::AllocSupport {
            threshold: exp.alloc_threshold,
        }
    } else {
        DecisionRule::ClassArgmax
    };
    (tc, rule)
}

pub fn run_fleet_row(cfg: &Config, n: usize, seed: u64) -> Result<FleetRow> {
    let exp = &cfg.experiment;
    let (pool, test) = labeled_sets(cfg, n, exp.fig5b_samples, exp.fig5b_test_samples, seed)?;
    let (tc, rule) = fleet_recipe(cfg, n, seed);
    let model = train(&pool, &tc)?.model;
    let mtl = evaluate(&model, &test, rule)?;

    let mut sbb_solutions = Vec::with_capacity(test.len());
    let start = Instant::now();
    for r in &test {
        sbb_solutions.push(solve_sbb(&r.instance, &cfg.sbb)?.solution);
    }
    let time_sbb = start.elapsed().as_secs_f64() / test.len() as f64;
    let (acc_sbb, mse_sbb) = score_predictions(&test, &sbb_solutions)?;
    Ok(FleetRow {
        n,
        acc_mtl: mtl.class_accuracy,
        acc_sbb,
        mse_mtl: mtl.reg_mse,
        mse_sbb,
        time_mtl: mtl.mean_inference_time,
        time_sbb,
    })
}

pub fn run_fleet_size(cfg: &Config, seed: u64) -> Result<Vec<FleetRow>> {
    cfg.experiment
        .fig5b_n
        .iter()
        .map(|&n| run_fleet_row(cfg, n, seed))
        .collect()
}

pub fn run_bad_data_ratio(cfg: &Config) -> Result<Vec<EtaSweepRecord>> {
    let sc = cfg.split.scenario(&cfg.ranges)?;
    eta_sweep(&sc, &eta_grid(cfg.split.eta_step)?)
}

pub fn fraction_csv(rows: &[FractionRow]) -> String {
    let mut out = String::from("fraction,accuracy,mse\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.fraction, r.accuracy, r.mse));
    }
    out
}

/// Deterministic columns of the fleet-size comparison.
pub fn fleet_csv(rows: &[FleetRow]) -> String {
    let mut out = String::from("n,acc_mtl,acc_sbb,mse_mtl,mse_sbb\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n, r.acc_mtl, r.acc_sbb, r.mse_mtl, r.mse_sbb
        ));
    }
    out
}

/// Wall-clock columns of the fleet-size comparison.
pub fn fleet_timing_csv(rows: &[FleetRow]) -> String {
    let mut out = String::from("n,time_mtl,time_sbb\n");
    for r in rows {
        out.push_str(&format!("{},{},{}\n", r.n, r.time_mtl, r.time_sbb));
    }
    out
}

fn gnuplot_script(kind: ExperimentKind) -> String {
    let (csv, body) = match kind {
        ExperimentKind::TrainingFraction => (
            "fig5a.csv",
            "set xlabel 'fraction of training samples'\nset ylabel 'accuracy'\nset y2label 'MSE'\nset y2tics\n\
             plot 'fig5a.csv' using 1:2 with linespoints title 'accuracy', \\\n     '' using 1:3 axes x1y2 with linespoints title 'MSE'\n",
        ),
        ExperimentKind::FleetSize => (
            "fig5b.csv",
            "set xlabel 'number of vehicles'\nset ylabel 'accuracy'\n\
             plot 'fig5b.csv' using 1:2 with linespoints title 'MTL', \\\n     '' using 1:3 with linespoints title 'budgeted B&B'\n",
        ),
        ExperimentKind::BadDataRatio => (
            "fig6.csv",
            "set xlabel 'bad data ratio'\nset ylabel 'weighted-sum cost per frame'\n\
             plot 'fig6.csv' using 1:2 with linespoints title 'local', \\\n     '' using 1:3 with linespoints title 'edge', \\\n     '' using 1:4 with linespoints title 'joint'\n",
        ),
    };
    format!(
        "# gnuplot script for {csv}\nset datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 800,600\nset output '{}.png'\n{body}",
        csv.trim_end_matches(".csv")
    )
}

/// Files written so far; removed again if the run fails.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        self.written.push(path.clone());
        write_text(&path, text)
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<RunManifest> {
    let text = match &spec.config {
        Some(path) => Config::load(path)?.1,
        None => DEFAULT_CONFIG.to_string(),
    };
    run_experiment_text(spec.kind, &text, spec.seed, &spec.out_dir)
}

/// Re-runs the experiment recorded in a manifest, writing into `out_dir`.
pub fn replay_manifest(manifest: &RunManifest, out_dir: &Path) -> Result<RunManifest> {
    run_experiment_text(manifest.kind, &manifest.config, manifest.seed, out_dir)
}

pub fn run_experiment_text(
    kind: ExperimentKind,
    config_text: &str,
    seed: u64,
    out_dir: &Path,
) -> Result<RunManifest> {
    let cfg = Config::parse(config_text)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut outputs = Outputs {
        dir: out_dir.to_path_buf(),
        written: Vec::new(),
    };
    let mut manifest = RunManifest::new(kind, config_text, seed);
    let result = run_stages(kind, &cfg, seed, &mut outputs, &mut manifest);
    if let Err(e) = result {
        outputs.discard();
        return Err(e);
    }
    let manifest_path = out_dir.join(format!("{}.manifest.json", kind.stem()));
    manifest.record_outputs(&outputs.written)?;
    if let Err(e) = manifest.save(&manifest_path) {
        outputs.discard();
        return Err(e);
    }
    Ok(manifest)
}

fn timed<T>(manifest: &mut RunManifest, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| e.in_stage(stage))?;
    manifest.stages.push(StageTime {
        stage: stage.to_string(),
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok(out)
}

fn run_stages(
    kind: ExperimentKind,
    cfg: &Config,
    seed: u64,
    outputs: &mut Outputs,
    manifest: &mut RunManifest,
) -> Result<()> {
    let stem = kind.stem();
    match kind {
        ExperimentKind::TrainingFraction => {
            let rows = timed(manifest, "train-and-evaluate", || {
                run_training_fraction(cfg, seed)
            })?;
            timed(manifest, "write", || {
                outputs.write(&format!("{stem}.csv"), &fraction_csv(&rows))
            })?;
        }
        ExperimentKind::FleetSize => {
            let rows = timed(manifest, "label-train-compare", || {
                run_fleet_size(cfg, seed)
            })?;
            timed(manifest, "write", || {
                outputs.write(&format!("{stem}.csv"), &fleet_csv(&rows))?;
                outputs.write(&format!("{stem}_timing.csv"), &fleet_timing_csv(&rows))
            })?;
        }
        ExperimentKind::BadDataRatio => {
            let rows = timed(manifest, "sweep", || run_bad_data_ratio(cfg))?;
            timed(manifest, "write", || {
                outputs.write(&format!("{stem}.csv"), &sweep_csv(&rows))
            })?;
        }
    }
    outputs
        .write(&format!("{stem}.gp"), &gnuplot_script(kind))
        .map_err(|e| e.in_stage("write"))
}
