use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use pc_bounds::report::{
    check_consistency, run, simulate, simulation_summary, AnalysisRequest, Document, OutputFormat,
    DEFAULT_TOLERANCE,
};
use pc_bounds::{Error, ErrorKind, Scenario};

/// Bounds on the probability of causation from group-level data.
#[derive(Parser)]
#[command(name = "pc-bounds", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the closed-form interval for a scenario.
    Bounds {
        scenario: Scenario,
        #[command(flatten)]
        opts: AnalysisOpts,
        /// Assume the exposure never prevents the response (basic scenario only).
        #[arg(long)]
        monotone: bool,
    },
    /// Compute the interval and confirm it with the exact oracle.
    Verify {
        scenario: Scenario,
        #[command(flatten)]
        opts: AnalysisOpts,
    },
    /// Sample ground-truth models and check that each true PC is inside its interval.
    Simulate {
        scenario: Scenario,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        /// Write each model's observable tables as an input document here.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Compare a mediator document's `margins` with those implied by its table.
    CheckConsistency {
        #[arg(long, default_value = "-")]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
        tolerance: f64,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args)]
struct AnalysisOpts {
    /// Input document; `-` reads standard input.
    #[arg(long, default_value = "-")]
    input: PathBuf,
    /// The individual's covariate level.
    #[arg(long = "x")]
    covariate: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Tolerance for the mediator margin check.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Structured,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Text => OutputFormat::Text,
            Format::Structured => OutputFormat::Structured,
        }
    }
}

/// Exit status for a failed command.
fn status(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>().map(Error::kind) {
        Some(ErrorKind::Validation) => 2,
        Some(ErrorKind::Infeasible) => 3,
        Some(ErrorKind::Internal) | None => 1,
    }
}

const DISCREPANCY_STATUS: u8 = 4;

fn read_document(path: &Path) -> anyhow::Result<Document> {
    let text = if path == Path::new("-") {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading standard input")?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(Document::parse(&text)?)
}

fn analyse(scenario: Scenario, opts: AnalysisOpts, verify: bool, monotone: bool) -> anyhow::Result<u8> {
    let request = AnalysisRequest {
        scenario,
        document: read_document(&opts.input)?,
        covariate: opts.covariate,
        verify,
        monotone,
        tolerance: opts.tolerance,
        format: opts.format.into(),
    };
    let report = run(&request)?;
    print!("{}", report.render(request.format));
    if request.format == OutputFormat::Structured {
        println!();
        // Text output already lists the warnings.
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    Ok(0)
}

fn run_simulation(
    scenario: Scenario,
    seed: u64,
    runs: usize,
    fixtures: Option<PathBuf>,
    format: Format,
) -> anyhow::Result<u8> {
    let results = simulate(scenario, seed, runs)?;
    if let Some(dir) = &fixtures {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for (model, _) in &results {
            let path = dir.join(format!("{}-{}.json", scenario, model.seed));
            let doc = Document::from_model(model)?;
            fs::write(&path, doc.to_json_string() + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
    }
    let records: Vec<_> = results.into_iter().map(|(_, r)| r).collect();
    let summary = simulation_summary(&records);
    match format {
        Format::Structured => {
            let out = serde_json::json!({ "scenario": scenario, "summary": summary, "runs": records });
            println!("{}", serde_json::to_string_pretty(&out)?);
        }
        Format::Text => {
            println!("seed\ttrue_pc\tlower\tupper\tcontained");
            for r in &records {
                println!("{}\t{}\t{}\t{}\t{}", r.seed, r.true_pc, r.lower, r.upper, r.contained);
            }
            println!(
                "{} runs, {} contained, {} violations",
                summary["runs"], summary["contained"], summary["violations"]
            );
        }
    }
    Ok(if summary["violations"] == 0 { 0 } else { 1 })
}

fn run_consistency(input: &Path, tolerance: f64, format: Format) -> anyhow::Result<u8> {
    let found = check_consistency(&read_document(input)?, tolerance)?;
    match format {
        Format::Structured => println!("{}", serde_json::to_string_pretty(&found)?),
        Format::Text if found.is_empty() => println!("margins consistent within {tolerance}"),
        Format::Text => {
            for d in &found {
                println!(
                    "E={}: implied {} supplied {} (difference {})",
                    d.exposure, d.implied, d.supplied, d.difference
                );
            }
        }
    }
    Ok(if found.is_empty() { 0 } else { DISCREPANCY_STATUS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Bounds { scenario, opts, monotone } => analyse(scenario, opts, false, monotone),
        Command::Verify { scenario, opts } => analyse(scenario, opts, true, false),
        Command::Simulate {
            scenario,
            seed,
            runs,
            fixtures,
            format,
        } => run_simulation(scenario, seed, runs, fixtures, format),
        Command::CheckConsistency { input, tolerance, format } => run_consistency(&input, tolerance, format),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(status(&err))
        }
    }
}
