//! `inforefine`: command-line front end of the experiment harness.
//!
//! Exit status: 0 success, 1 usage error, 2 input parse error, 3 runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inforefine::harness::{
    cmd_control, cmd_fit, cmd_generate, cmd_predict, cmd_refine, cmd_report, cmd_solve, ExperimentConfig, RefineTarget, Split,
};
use inforefine::metamodel::CostModel;
use inforefine::Error;

#[derive(Parser, Debug)]
#[command(name = "inforefine", version, about = "Anytime information refinement experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment configuration (TOML); defaults apply without it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override the number of problems processed at once.
    #[arg(long, global = true)]
    parallelism: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the training and/or test corpus.
    Generate {
        #[arg(long, value_enum, default_value_t = Which::All)]
        split: Which,
    },
    /// Refine every problem of a corpus, or a single problem file.
    Refine {
        #[arg(long, value_enum, default_value_t = Which::Training, conflicts_with = "problem")]
        split: Which,
        #[arg(long)]
        problem: Option<PathBuf>,
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Solve one problem exactly.
    Solve {
        #[arg(long)]
        problem: PathBuf,
        /// Information-state cap.
        #[arg(long)]
        cap: Option<u64>,
    },
    /// Fit meta-models to the training profiles.
    Fit {
        /// Profiles directory; defaults to the training profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
        /// Degrees to fit; defaults to the configured list.
        #[arg(long)]
        degree: Vec<usize>,
        #[arg(long)]
        step: Option<usize>,
    },
    /// Apply meta-models to every step of every profile.
    Predict {
        #[arg(long, num_args = 1..)]
        models: Vec<PathBuf>,
        /// Profiles directory; defaults to the test profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
    /// Run the stopping controller on one problem.
    Control {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long, num_args = 1..)]
        models: Vec<PathBuf>,
        /// `zero`, `linear:<rate>` or `exp:<a>,<r>`.
        #[arg(long)]
        cost: Option<CostModel>,
        #[arg(long)]
        budget: Option<usize>,
        /// Clamp estimates to [0, 1].
        #[arg(long)]
        clamp: bool,
        #[arg(long)]
        no_svg: bool,
    },
    /// Summarize predictions against the best-known values.
    Report {
        /// Predictions directory; defaults to the test predictions.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Root searched for recorded profiles.
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    Training,
    Test,
    All,
}

impl Which {
    fn splits(self) -> Vec<Split> {
        match self {
            Which::Training => vec![Split::Training],
            Which::Test => vec![Split::Test],
            Which::All => vec![Split::Training, Split::Test],
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let cfg = match load_config(&cli.common) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            // invalid overrides are usage errors
            return ExitCode::from(if matches!(e, Error::Invalid(_)) { 1 } else { e.exit_code() as u8 });
        }
    };
    match run(cli.command, &cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(p) = common.parallelism {
        cfg.parallelism = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(command: Command, cfg: &ExperimentConfig) -> Result<(), Error> {
    match command {
        Command::Generate { split } => {
            for m in cmd_generate(cfg, &split.splits())? {
                println!("{}: {} problems, base seed {}", m.name, m.count, m.base_seed);
            }
        }
        Command::Refine { split, problem, budget } => {
            let targets: Vec<RefineTarget> = match problem {
                Some(p) => vec![RefineTarget::Problem(p)],
                None => split.splits().into_iter().map(RefineTarget::Corpus).collect(),
            };
            for target in &targets {
                for o in cmd_refine(cfg, target, budget)? {
                    let star = o.ev_star.map_or("unknown".to_string(), |v| format!("{v:.6}"));
                    println!("{}: {} refinements, EV_I {:.6}, EV_I* {star}, {:?}", o.problem, o.refinements, o.final_ev, o.stop_reason);
                }
            }
        }
        Command::Solve { problem, cap } => {
            let (s, path) = cmd_solve(cfg, &problem, cap)?;
            println!("{}: EV_I* {:.6} ({} information states) -> {}", s.problem, s.value, s.states_expanded, path.display());
        }
        Command::Fit { profiles, degree, step } => {
            let profiles = profiles.unwrap_or_else(|| cfg.profile_dir(Split::Training));
            let degrees = if degree.is_empty() { cfg.fit.degrees.clone() } else { degree };
            let step = step.unwrap_or(cfg.fit.step);
            for d in degrees {
                let out = cfg.model_path(d);
                let m = cmd_fit(&profiles, d, step, &out)?;
                println!("{}: degree {d}, coefficients {:?}, SSE {:.6} over {} points", out.display(), m.coefficients, m.sse, m.n_points);
            }
        }
        Command::Predict { models, profiles } => {
            let models = or_configured(models, cfg);
            let profiles = profiles.unwrap_or_else(|| cfg.profile_dir(Split::Test));
            let out = cfg.prediction_dir(Split::Test);
            let preds = cmd_predict(&models, &profiles, &out)?;
            println!("{} predictions -> {}", preds.len(), out.display());
        }
        Command::Control { problem, models, cost, budget, clamp, no_svg } => {
            let mut opts = cfg.control.clone();
            opts.cost = cost.unwrap_or(opts.cost);
            opts.budget = budget.unwrap_or(opts.budget);
            opts.clamp |= clamp;
            opts.svg &= !no_svg;
            let models = or_configured(models, cfg);
            let outcome = cmd_control(&problem, &models, &opts, &cfg.control_dir())?;
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", outcome.trace.summary());
            for f in &outcome.files {
                println!("  {}", f.display());
            }
        }
        Command::Report { predictions, profiles } => {
            let predictions = predictions.unwrap_or_else(|| cfg.prediction_dir(Split::Test));
            let profiles = profiles.unwrap_or_else(|| cfg.out.join("profiles"));
            let report = cmd_report(&predictions, &profiles, &cfg.out)?;
            print!("{}", report.table());
        }
    }
    Ok(())
}

fn or_configured(models: Vec<PathBuf>, cfg: &ExperimentConfig) -> Vec<PathBuf> {
    if models.is_empty() {
        cfg.model_paths()
    } else {
        models
    }
}
