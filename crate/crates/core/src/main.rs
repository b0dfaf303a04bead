use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use martlab::experiment::{
    compute, sharpness_sweep, suite, AlphaSpec, ExperimentConfig, ModelSpec, Report, WeightSpec, SWEEP_CSV_HEADER,
};
use martlab::verify::{replay, FailurePayload};
use martlab::LabError;

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CAPACITY: u8 = 3;

#[derive(Parser)]
#[command(name = "martlab", version, about = "Weighted norm inequalities on finite filtered spaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single operation, e.g. ap-constant, wolff-norm, carleson-constant.
    Compute {
        operation: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run a verification suite; exits 1 if any assertion fails.
    Suite {
        name: String,
        #[command(flatten)]
        common: Common,
        /// Worker threads (0 = all cores); results do not depend on it.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Write failing and flagged trial payloads into this directory.
        #[arg(long)]
        save_trials: Option<PathBuf>,
    },
    /// Re-run a saved trial payload.
    Replay {
        path: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Power-weight sweep of the maximal-function bounds.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Power exponents; defaults approach the degenerate end p - 1.
        #[arg(long, value_delimiter = ',')]
        delta: Vec<f64>,
    },
}

#[derive(Args)]
struct Common {
    /// `dyadic`, `tree`, or a path to a JSON space.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    /// constant:C, lognormal:SIGMA, power:DELTA, spikes:COUNT:HEIGHT, values:A,B,... or a JSON path.
    #[arg(long)]
    weight: Option<String>,
    /// ones, zero, single:LEVEL:VALUE, geometric:LAMBDA[:JITTER], sparse:DENSITY or a JSON path.
    #[arg(long)]
    alpha: Option<String>,
    #[arg(long, value_delimiter = ',')]
    p: Vec<f64>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    s: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
    #[arg(long)]
    csv: bool,
    /// Maximize testing constants over unions of blocks as well.
    #[arg(long)]
    exhaustive_sets: bool,
    /// Enumeration cap for stopping times.
    #[arg(long)]
    cap: Option<u128>,
}

impl Common {
    fn config(&self, command: &str, target: Option<String>) -> Result<ExperimentConfig, LabError> {
        let model = match (&self.model, self.depth) {
            (Some(m), d) => Some(ModelSpec::parse(m, d)?),
            (None, Some(depth)) => Some(ModelSpec::Dyadic { depth }),
            (None, None) => None,
        };
        Ok(ExperimentConfig {
            command: command.into(),
            target,
            model,
            weight: self.weight.as_deref().map(WeightSpec::parse).transpose()?,
            alpha: self.alpha.as_deref().map(AlphaSpec::parse).transpose()?,
            p: self.p.clone(),
            q: self.q,
            s: self.s,
            theta: self.theta,
            delta: Vec::new(),
            trials: self.trials,
            seed: self.seed,
            exhaustive_sets: self.exhaustive_sets,
            cap: self.cap,
        })
    }
}

fn exit_for(e: &LabError) -> u8 {
    match e {
        LabError::Capacity { .. } => EXIT_CAPACITY,
        _ => EXIT_USAGE,
    }
}

fn emit(report: &Report, json: bool, text: impl FnOnce() -> String) -> Result<(), LabError> {
    if json {
        println!("{}", serde_json::to_string_pretty(report)?);
    } else {
        println!("{}", text());
    }
    Ok(())
}

fn elapsed(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn run(cli: Cli) -> Result<u8, LabError> {
    let start = Instant::now();
    match cli.command {
        Command::Compute { operation, common } => {
            let cfg = common.config("compute", Some(operation))?;
            let value = compute(&cfg)?;
            let report = Report::new(cfg, value, elapsed(start));
            emit(&report, common.json, || {
                format!(
                    "{}: {}",
                    report.config.target.as_deref().unwrap_or(""),
                    serde_json::to_string(&report.results).unwrap_or_default()
                )
            })?;
            Ok(0)
        }
        Command::Suite {
            name,
            common,
            workers,
            save_trials,
        } => {
            let cfg = common.config("suite", Some(name))?;
            let result = suite(&cfg, workers)?;
            if let Some(dir) = save_trials {
                std::fs::create_dir_all(&dir)?;
                for payload in &result.failures {
                    let path = dir.join(format!("{}-trial-{}.json", payload.suite, payload.trial));
                    std::fs::write(path, serde_json::to_string_pretty(payload)?)?;
                }
            }
            let code = if result.passed { 0 } else { EXIT_FAIL };
            let report = Report::new(cfg, serde_json::to_value(&result)?, elapsed(start));
            emit(&report, common.json, || {
                let mut out = format!(
                    "suite {}: {} ({} trials, {} assertions, {} failed trials, {} flagged)",
                    result.suite,
                    if result.passed { "pass" } else { "FAIL" },
                    result.trials,
                    result.asserted,
                    result.failed_trials.len(),
                    result.flagged_trials.len()
                );
                for x in &result.extremes {
                    out.push_str(&format!(
                        "\n  {:<60} worst lhs/rhs {:.6e} (trial {})",
                        x.name, x.ratio, x.trial
                    ));
                }
                out
            })?;
            Ok(code)
        }
        Command::Replay { path, json } => {
            let text = std::fs::read_to_string(&path).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            let payload = FailurePayload::from_json(&text)?;
            let rep = replay(&payload)?;
            let code = if rep.reproduced() { 0 } else { EXIT_FAIL };
            let cfg = ExperimentConfig {
                command: "replay".into(),
                target: Some(path.display().to_string()),
                ..ExperimentConfig::default()
            };
            let report = Report::new(cfg, serde_json::to_value(&rep)?, elapsed(start));
            emit(&report, json, || {
                let mut out = format!(
                    "replay {} trial {}: recorded {:?}, replayed {:?}; instance hash {}; checks {}",
                    rep.suite,
                    rep.trial,
                    rep.recorded_verdict,
                    rep.verdict,
                    if rep.hash_matches { "matches" } else { "MISMATCH" },
                    if rep.checks_match { "identical" } else { "DIFFER" },
                );
                for c in &rep.checks {
                    out.push_str(&format!("\n  {:<60} {:e} <= {:e}  {}", c.name, c.lhs, c.rhs, if c.holds { "ok" } else { "VIOLATED" }));
                }
                out
            })?;
            Ok(code)
        }
        Command::Sweep { common, delta } => {
            let mut cfg = common.config("sweep", None)?;
            cfg.delta = delta;
            if cfg.p.is_empty() {
                cfg.p = vec![1.5, 2.0, 3.0];
            }
            let depth = match &cfg.model {
                None => 8,
                Some(ModelSpec::Dyadic { depth }) => *depth,
                Some(_) => return Err(LabError::Parameter("model: sweeps run on dyadic spaces".into())),
            };
            let rows = sharpness_sweep(&cfg.p, &cfg.delta, depth, cfg.seed)?;
            if common.csv {
                println!("{SWEEP_CSV_HEADER}");
                for r in &rows {
                    println!("{}", r.csv());
                }
                return Ok(0);
            }
            let report = Report::new(cfg, serde_json::to_value(&rows)?, elapsed(start));
            emit(&report, common.json, || {
                let mut out = String::from(SWEEP_CSV_HEADER);
                for r in &rows {
                    out.push('\n');
                    out.push_str(&r.csv());
                }
                out
            })?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
