use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use permsel_core::baselines::{self, RankOptions, RankerKind};
use permsel_core::dataset::{self, generate_synthetic, TargetColumn};
use permsel_core::runner::{self, ExperimentConfig, SUMMARY_DIR};
use permsel_core::{Dataset64, LearnerSpec, MoeaConfig, SyntheticSpec, Task, Variant};

#[derive(Parser)]
#[command(name = "permsel", version, about = "Permutation-based feature subset selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment described by a TOML file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads; overrides the config file.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; overrides the config file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic regression dataset as CSV.
    Synth {
        /// `n,w,informative,noise`
        #[arg(long)]
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank features with a single-feature method.
    Rank {
        #[arg(long, value_enum)]
        method: RankMethod,
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Shuffles per feature for permutation importance.
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = baselines::DEFAULT_BINS)]
        bins: usize,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Print only the first K features.
        #[arg(long)]
        top: Option<usize>,
    },
    /// Search for a feature subset with NSGA-II.
    Select {
        #[arg(long, value_enum)]
        variant: VariantArg,
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 50)]
        pop: usize,
        #[arg(long, default_value_t = 2000)]
        gens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trees: usize,
        /// Write the run trace as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Summarize the report CSVs of a finished run.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Args)]
struct Input {
    /// CSV with a header row.
    #[arg(long, conflicts_with = "synthetic", required_unless_present = "synthetic")]
    data: Option<PathBuf>,
    /// Generate data instead: `n,w,informative,noise`.
    #[arg(long)]
    synthetic: Option<String>,
    #[arg(long, default_value = "reg")]
    task: Task,
    /// Target column: `last`, a 0-based index or a header name.
    #[arg(long, default_value = "last")]
    target_col: String,
}

impl Input {
    fn load(&self) -> Result<Dataset64> {
        if let Some(spec) = &self.synthetic {
            if self.task != Task::Regression {
                bail!("synthetic data is a regression task");
            }
            let spec: SyntheticSpec = spec.parse()?;
            return Ok(generate_synthetic(&spec)?.data);
        }
        let path = self.data.as_ref().context("--data or --synthetic is required")?;
        let target: TargetColumn = self.target_col.parse().map_err(anyhow::Error::msg)?;
        dataset::load_csv_with(path, self.task, &target).with_context(|| format!("loading {}", path.display()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RankMethod {
    PfiV1,
    PfiV2,
    Corr,
    Infogain,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    V1,
    V2,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, threads, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if threads.is_some() {
                cfg.threads = threads;
            }
            if let Some(out) = out {
                cfg.output_dir = out;
            }
            let outcome = runner::run_experiment(&cfg)?;
            runner::write_outcome(&outcome, &cfg.output_dir)?;
            let failed = outcome.rows.iter().filter(|r| !r.is_ok()).count();
            println!(
                "{} report rows ({failed} failed) written to {}",
                outcome.rows.len(),
                cfg.output_dir.display()
            );
        }
        Command::Synth { spec, seed, out } => {
            let spec = SyntheticSpec { seed, ..spec.parse()? };
            let synth = generate_synthetic::<f64>(&spec)?;
            dataset::save_csv(&synth.data, &out)?;
            info!("coefficients: {:?}", synth.coefficients);
            println!("wrote {} rows x {} features to {}", spec.n_instances, spec.n_features, out.display());
        }
        Command::Rank { method, input, seed, repeats, bins, trees, top } => {
            let data = input.load()?;
            let part = split(&data, seed)?;
            let kind = match method {
                RankMethod::PfiV1 => RankerKind::PfiV1,
                RankMethod::PfiV2 => RankerKind::PfiV2,
                RankMethod::Corr => RankerKind::Correlation,
                RankMethod::Infogain => RankerKind::InfoGain,
            };
            let opts = RankOptions {
                learner: LearnerSpec { n_trees: trees, seed, ..Default::default() },
                pfi_repeats: repeats,
                bins,
                seed,
            };
            let scores = baselines::rank(kind, &data, &part, &opts)?;
            println!("rank,feature,name,score");
            let limit = top.unwrap_or(scores.len()).min(scores.len());
            for (i, &f) in scores.ranking()[..limit].iter().enumerate() {
                println!("{},{},{},{}", i + 1, f, data.feature_names()[f], scores.scores()[f]);
            }
        }
        Command::Select { variant, input, pop, gens, seed, trees, trace } => {
            let data = input.load()?;
            let part = split(&data, seed)?;
            let cfg = MoeaConfig {
                population_size: pop,
                generations: gens,
                seed,
                variant: match variant {
                    VariantArg::V1 => Variant::V1,
                    VariantArg::V2 => Variant::V2,
                },
                ..Default::default()
            };
            let learner = LearnerSpec { n_trees: trees, seed, ..Default::default() };
            let run = permsel_core::moea::evolve(&data, &part, &learner, &cfg)?;
            let best = &run.best;
            println!("merit: {}", best.merit());
            println!("cardinality: {}", best.cardinality());
            let names: Vec<&str> =
                best.chromosome.selected().iter().map(|&f| data.feature_names()[f].as_str()).collect();
            println!("features: {}", names.join(","));
            println!("front size: {}", run.front.len());
            if let Some(path) = trace {
                std::fs::write(&path, run.to_json())?;
            }
        }
        Command::Report { input } => {
            let rows = runner::read_reports(&input)?;
            let summary = runner::aggregate(&rows, permsel_core::analysis::DEFAULT_ALPHA)?;
            summary.write(&input.join(SUMMARY_DIR))?;
            for (metric, ranking) in &summary.rankings {
                println!("ranking on test {metric}:");
                for r in ranking {
                    println!("  {:<20} wins {:>3}  losses {:>3}  net {:>4}", r.method, r.wins, r.losses, r.net);
                }
            }
            println!("summary written to {}", input.join(SUMMARY_DIR).display());
        }
    }
    Ok(())
}

fn split(data: &Dataset64, seed: u64) -> Result<dataset::Partition> {
    Ok(dataset::split(data, seed, data.task() == Task::Classification)?)
}
