use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use condtest::harness::{
    distance_to_uniform, run_experiment, scaling_sweep, ExperimentConfig, TesterId,
};
use condtest::DistSpec;
use condtest_cli::{write_records_csv, write_sweep_csv};

/// Monte Carlo harness for conditional-sampling distribution testers.
#[derive(Parser)]
#[command(name = "condtest", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one tester for a number of independently seeded trials.
    Run(RunArgs),
    /// Repeat a run over a grid of domain sizes and report mean query counts.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated domain sizes; the spec files must describe resizable generators.
        #[arg(long, value_delimiter = ',', required = true)]
        n_grid: Vec<usize>,
    },
    /// Inspect distribution spec files.
    Dist {
        #[command(subcommand)]
        command: DistCommand,
    },
}

#[derive(Subcommand)]
enum DistCommand {
    /// Check that a spec builds and is normalized, and print its exact distance to uniform.
    Validate { spec: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    tester: String,
    #[arg(long)]
    dist: PathBuf,
    /// Known target for the identity testers, or the second unknown for the equality testers.
    #[arg(long)]
    dist2: Option<PathBuf>,
    #[arg(long)]
    eps: f64,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `desk`, `theoretical`, either with `:{json}` overrides, or a JSON file of overrides.
    #[arg(long, default_value = "desk")]
    profile: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

type Failure = Box<dyn std::error::Error>;

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, Failure> {
        let tester: TesterId = self.tester.parse()?;
        let mut cfg = ExperimentConfig::new(
            tester,
            DistSpec::load(&self.dist)?,
            self.eps,
            self.trials,
            self.seed,
        )
        .with_profile(&self.profile)?;
        if let Some(path) = &self.dist2 {
            cfg = cfg.with_dist2(DistSpec::load(path)?);
        }
        Ok(cfg)
    }

    fn sink(&self) -> Result<Box<dyn Write>, Failure> {
        Ok(match &self.out {
            Some(path) => Box::new(File::create(path)?),
            None => Box::new(io::stdout().lock()),
        })
    }
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let experiment = run_experiment(&args.config()?)?;
    let mut sink = args.sink()?;
    match args.format {
        Format::Csv => write_records_csv(&mut sink, &experiment.records)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &experiment)?;
            writeln!(sink)?;
        }
    }
    let r = &experiment.report;
    eprint!(
        "{} n={} eps={} trials={}: accept rate {:.3} [{:.3}, {:.3}], mean queries {:.1}",
        r.tester,
        r.n,
        r.eps,
        r.trials,
        r.accept_rate.rate,
        r.accept_rate.lower,
        r.accept_rate.upper,
        r.mean_queries.total
    );
    if let (Some(mean), Some(std)) = (r.estimate_mean, r.estimate_std) {
        eprint!(", estimate {mean:.4} ± {std:.4}");
    }
    if r.errors > 0 {
        eprint!(", {} aborted trials", r.errors);
    }
    eprintln!();
    Ok(())
}

fn sweep(args: &RunArgs, n_grid: &[usize]) -> Result<(), Failure> {
    let report = scaling_sweep(&args.config()?, n_grid)?;
    let mut sink = args.sink()?;
    match args.format {
        Format::Csv => write_sweep_csv(&mut sink, &report)?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut sink, &report)?;
            writeln!(sink)?;
        }
    }
    eprintln!(
        "{}: queries grow like (log2 N)^{:.2}",
        report.tester, report.log_n_exponent
    );
    Ok(())
}

fn validate(path: &PathBuf) -> Result<bool, Failure> {
    let spec = DistSpec::load(path)?;
    let d = spec.build()?;
    // Generators normalize by construction; only hand-written weights can be off.
    let weight_sum = match &spec {
        DistSpec::Explicit { weights } => weights.iter().sum(),
        DistSpec::Generator(_) => d.weights().iter().sum::<f64>(),
    };
    let normalized = (weight_sum - 1.0).abs() <= 1e-9;
    println!("n = {}", d.n());
    println!("weight sum = {weight_sum}");
    println!("normalized = {normalized}");
    println!("d_TV to uniform = {}", distance_to_uniform(&d));
    Ok(normalized)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(args) => run(args).map(|_| true),
        Command::Sweep { run, n_grid } => sweep(run, n_grid).map(|_| true),
        Command::Dist {
            command: DistCommand::Validate { spec },
        } => validate(spec),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
