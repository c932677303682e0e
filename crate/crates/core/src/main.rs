use std::fs::File;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use transfer_prices::harness::{self, ExperimentConfig, Mode, ModelKind};
use transfer_prices::{oracle, Algorithm};

#[derive(Parser)]
#[command(name = "tprice", version, about = "Transfer-price coordination experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a coordinator on one sampled firm.
    Static(RunArgs),
    /// Run SOLO against a firm resampled every round.
    Dynamic(RunArgs),
    /// Solve the sampled static firm and print the optimum.
    Oracle(RunArgs),
    /// Fit the decay rate of the mean excess supply in a trace.
    Ratefit {
        /// Trace CSV written by `static` or `dynamic`.
        trace: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Number of rounds.
    #[arg(long = "T")]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Record the per-round gap to the optimal profit.
    #[arg(long)]
    with_oracle: bool,
    /// Directory for trace.csv and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self, mode: Mode) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json_file(path).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {$(if let Some(v) = self.$field { cfg.$target = v.into(); })*};
        }
        set!(algo => algo, model => model, m => m, n => n, c => c, delta => delta, seed => seed, d => d, rounds => rounds, eta => eta);
        cfg.with_oracle |= self.with_oracle;
        if self.out.is_some() {
            cfg.out = self.out;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Static(args) => experiment(args.into_config(Mode::Static)?),
        Command::Dynamic(args) => experiment(args.into_config(Mode::Dynamic)?),
        Command::Oracle(args) => {
            let cfg = args.into_config(Mode::Static)?;
            cfg.validate()?;
            let instance = harness::static_instance(&cfg)?;
            let sol = oracle::solve(&instance, oracle::default_tolerance(instance.d()))?;
            let report = harness::summary::OracleReport::from(&sol);
            if let Some(dir) = &cfg.out {
                std::fs::create_dir_all(dir)?;
                harness::write_json(&dir.join("oracle.json"), &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Ratefit { trace } => {
            let records = harness::read_csv(File::open(&trace).with_context(|| format!("opening {}", trace.display()))?)?;
            let points: Vec<(f64, f64)> = records
                .iter()
                .enumerate()
                .filter(|(i, _)| (i + 1).is_power_of_two())
                .map(|(i, r)| ((i + 1) as f64, transfer_prices::linalg::norm(&r.running_avg_excess)))
                .filter(|p| p.1 > 0.0)
                .collect();
            if points.len() < 3 {
                bail!("trace too short for a rate fit");
            }
            let slope = harness::rate_fit(&points)?;
            println!("{slope}");
            Ok(true)
        }
    }
}

fn experiment(cfg: ExperimentConfig) -> anyhow::Result<bool> {
    let exp = harness::run_experiment(&cfg)?;
    let s = &exp.summary;
    println!("rounds: {}", exp.run.trace.len());
    println!("final price: {:?}", s.last.lambda);
    println!("average price: {:?}", s.average.lambda);
    println!("mean excess norm: {:.6e}", s.average.mean_observed_excess_norm);
    for check in &s.bounds {
        println!("{:<22} {:?}", check.name, check.status);
    }
    if let Some(dir) = &cfg.out {
        println!("wrote {}", dir.display());
    }
    Ok(s.all_passed())
}
