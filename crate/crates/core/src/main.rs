use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use offload_core::config::Config;
use offload_core::dataset::{
    label_instances, read_instances, read_labels, write_instances, write_labels, write_text,
    LabelSolver,
};
use offload_core::harness::{
    replay_manifest, run_experiment, ExperimentKind, ExperimentSpec, RunManifest,
};
use offload_core::instance_gen::generate_instances;
use offload_core::mtl::{evaluate, load_model, log_csv, save_model, train, DecisionRule};
use offload_core::solvers::{BranchingRule, SbbConfig};
use offload_core::split::{best_split, eta_grid, eta_sweep, sweep_csv};
use offload_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "offload",
    version,
    about = "Vehicular edge offloading: solvers, learned solver, split inference"
)]
struct Cli {
    /// TOML config file; the shipped defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output file (or directory for `experiment`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for parallel stages; 0 uses all cores.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate random instances.
    Generate {
        #[arg(long)]
        count: usize,
        /// Vehicles per instance; defaults to `n_vehicles` from the config.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Label an instance file with a solver.
    Label {
        instances: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Train a model on a labeled dataset.
    Train {
        labels: PathBuf,
        /// Also write the per-epoch loss log as CSV.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Score a model on a labeled dataset.
    Eval {
        model: PathBuf,
        labels: PathBuf,
        /// Decide offloading from predicted allocations above this threshold
        /// instead of the class head.
        #[arg(long)]
        alloc_threshold: Option<f64>,
    },
    /// Solve every instance in a file and print one JSON report per line.
    Solve {
        instances: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Best split point and the bad-data-ratio sweep.
    SplitPlan {
        /// Overrides the sweep step from the config.
        #[arg(long)]
        eta_step: Option<f64>,
    },
    /// Run a named experiment, or replay one from its manifest.
    Experiment {
        /// fig5a-training-fraction, fig5b-n-avs or fig6-eta.
        kind: Option<String>,
        #[arg(long, conflicts_with = "kind")]
        replay: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverKind {
    Exhaustive,
    Grid,
    Sbb,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "exhaustive")]
    solver: SolverKind,
    #[arg(long, default_value_t = 0.01)]
    grid_step: f64,
    /// Overrides `[sbb] max_nodes`.
    #[arg(long)]
    max_nodes: Option<usize>,
    #[arg(long)]
    gap_tolerance: Option<f64>,
    #[arg(long)]
    lowest_index: bool,
}

impl SolverArgs {
    fn build(&self, cfg: &Config) -> LabelSolver {
        match self.solver {
            SolverKind::Exhaustive => LabelSolver::Exhaustive,
            SolverKind::Grid => LabelSolver::Grid {
                step: self.grid_step,
            },
            SolverKind::Sbb => {
                let mut sbb: SbbConfig = cfg.sbb;
                if let Some(m) = self.max_nodes {
                    sbb.max_nodes = m;
                }
                if let Some(g) = self.gap_tolerance {
                    sbb.gap_tolerance = g;
                }
                if self.lowest_index {
                    sbb.branching_rule = BranchingRule::LowestIndex;
                }
                LabelSolver::Sbb(sbb)
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p).map(|(c, _)| c),
        None => Ok(Config::shipped()),
    }
}

fn require_out(out: &Option<PathBuf>) -> Result<&Path> {
    out.as_deref()
        .ok_or_else(|| Error::Config("--out is required for this command".into()))
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.workers)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Generate { count, n } => {
            let n = n.unwrap_or(cfg.ranges.n_vehicles);
            let insts = generate_instances(n, count, &cfg.ranges, cli.seed)?;
            write_instances(require_out(&cli.out)?, &insts)
        }
        Command::Label { instances, solver } => {
            let insts = read_instances(&instances)?;
            let labels = label_instances(&insts, &solver.build(&cfg))?;
            write_labels(require_out(&cli.out)?, &labels)
        }
        Command::Train { labels, log } => {
            let data = read_labels(&labels)?;
            let tc = offload_core::mtl::TrainConfig {
                seed: cli.seed,
                ..cfg.train.clone()
            };
            let outcome = train(&data, &tc)?;
            if let Some(log) = log {
                write_text(&log, &log_csv(&outcome.log))?;
            }
            save_model(&outcome.model, require_out(&cli.out)?)
        }
        Command::Eval {
            model,
            labels,
            alloc_threshold,
        } => {
            let model = load_model(&model)?;
            let data = read_labels(&labels)?;
            let rule = match alloc_threshold {
                Some(threshold) => DecisionRule::AllocSupport { threshold },
                None => DecisionRule::ClassArgmax,
            };
            let m = evaluate(&model, &data, rule)?;
            emit(
                &cli.out,
                &format!(
                    "accuracy,mse,seconds_per_instance\n{},{},{}\n",
                    m.class_accuracy, m.reg_mse, m.mean_inference_time
                ),
            )
        }
        Command::Solve { instances, solver } => {
            let insts = read_instances(&instances)?;
            let solver = solver.build(&cfg);
            let mut text = String::new();
            for inst in &insts {
                let report = solver.solve(inst)?;
                let line = serde_json::to_string(&report)
                    .map_err(|e| Error::InvalidParameter(e.to_string()))?;
                text.push_str(&line);
                text.push('\n');
            }
            emit(&cli.out, &text)
        }
        Command::SplitPlan { eta_step } => {
            let sc = cfg.split.scenario(&cfg.ranges)?;
            let (k, cost) = best_split(&sc)?;
            eprintln!("best split after layer {k}, cost {cost}");
            let rows = eta_sweep(&sc, &eta_grid(eta_step.unwrap_or(cfg.split.eta_step))?)?;
            emit(&cli.out, &sweep_csv(&rows))
        }
        Command::Experiment { kind, replay } => {
            let out = require_out(&cli.out)?.to_path_buf();
            let manifest = match (kind, replay) {
                (_, Some(path)) => replay_manifest(&RunManifest::load(&path)?, &out)?,
                (Some(kind), None) => run_experiment(&ExperimentSpec {
                    kind: kind.parse::<ExperimentKind>()?,
                    config: cli.config.clone(),
                    seed: cli.seed,
                    out_dir: out,
                })?,
                (None, None) => {
                    return Err(Error::Config(
                        "experiment needs a kind or --replay <manifest>".into(),
                    ))
                }
            };
            for o in &manifest.outputs {
                println!("{}  {}", o.sha256, o.file);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
