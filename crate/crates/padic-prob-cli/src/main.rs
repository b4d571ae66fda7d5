//! Command-line front end: expectations, conditional expectations, Haar
//! sampling, martingale traces with optional-sampling reports, and the law
//! verification suite.
//!
//! Exit codes: 0 success, 1 invariant failure, 2 input or schema error,
//! 3 precision underflow, 4 construction precondition failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use padic_prob::expectation::{cond_expectation, epsilon, expectation, ExpectationError};
use padic_prob::martingale::{
    product_martingale, stopped_chain_martingale, sum_martingale, Martingale, MartingaleError,
};
use padic_prob::padic::PadicError;
use padic_prob::schema::{ball_json, parse_magnitude, value_json, MartConfig, SpaceFile};
use padic_prob::space::haar_sample;
use padic_prob::verify::{Mutation, VerifyConfig};

#[derive(Parser)]
#[command(name = "padic-prob", version, about = "Exact p-adic probability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the expectation ball and spread of a variable.
    Expect(ExpectArgs),
    /// Print the conditional expectation ball field and spread of a variable.
    Condexpect(CondexpectArgs),
    /// Draw Haar samples from a ball, one JSON line per sample.
    Sample(SampleArgs),
    /// Build a martingale, print its convergence trace and sampling checks.
    Mart(MartArgs),
    /// Run the seeded law-verification suite and print the report.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct ExpectArgs {
    /// Probability-space JSON document.
    space: PathBuf,
    /// Variable name.
    #[arg(long)]
    var: String,
    /// Pretty-print the JSON output.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct CondexpectArgs {
    /// Probability-space JSON document.
    space: PathBuf,
    /// Variable name.
    #[arg(long)]
    var: String,
    /// Partition name.
    #[arg(long)]
    partition: String,
    /// Pretty-print the JSON output.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SampleArgs {
    /// The prime.
    #[arg(long)]
    p: u64,
    /// Ball exponent: samples lie in p^k * Z_p.
    #[arg(long, default_value_t = 0)]
    k: i64,
    /// Significant base-p digits per sample.
    #[arg(long)]
    precision: u32,
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
}

#[derive(Args)]
struct MartArgs {
    /// Martingale kind: sum, prod, or markov.
    #[arg(long)]
    kind: String,
    /// Configuration JSON document.
    config: PathBuf,
    /// Also write the trace as CSV (header n,norm) to this path.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Pretty-print the JSON output.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Base seed for instance generation.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Instances per check per prime; must be at least 1.
    #[arg(long, default_value_t = 200)]
    instances: u32,
    /// Comma-separated primes to instantiate.
    #[arg(long = "p-list", default_value = "2,3,5")]
    p_list: String,
    /// Largest generated sample-space size.
    #[arg(long = "max-outcomes", default_value_t = 16)]
    max_outcomes: usize,
    /// Working precision.
    #[arg(long, default_value_t = 12)]
    precision: u32,
    /// Inject a deliberate defect (`wrong-radius`) to test the harness.
    #[arg(long)]
    mutate: Option<String>,
    /// Pretty-print the JSON report.
    #[arg(long)]
    pretty: bool,
}

/// Process failure with its exit code and a machine-readable message.
struct Failure {
    code: u8,
    message: serde_json::Value,
}

impl Failure {
    fn schema(detail: impl std::fmt::Display) -> Failure {
        Failure {
            code: 2,
            message: serde_json::json!({"error": "input", "detail": detail.to_string()}),
        }
    }

    fn precision(operation: &str, detail: impl std::fmt::Display) -> Failure {
        Failure {
            code: 3,
            message: serde_json::json!({
                "error": "precision underflow",
                "operation": operation,
                "detail": detail.to_string(),
            }),
        }
    }

    fn construction(detail: impl std::fmt::Display) -> Failure {
        Failure {
            code: 4,
            message: serde_json::json!({"error": "construction", "detail": detail.to_string()}),
        }
    }

    fn invariant(detail: impl std::fmt::Display) -> Failure {
        Failure {
            code: 1,
            message: serde_json::json!({"error": "invariant", "detail": detail.to_string()}),
        }
    }
}

/// Map an expectation-layer error during `operation` to a process failure.
fn map_expectation_err(operation: &str, e: ExpectationError) -> Failure {
    match e {
        ExpectationError::Padic(
            p @ (PadicError::PrecisionUnderflow { .. } | PadicError::IndistinguishableAtPrecision),
        ) => Failure::precision(operation, p),
        other => Failure::schema(other),
    }
}

/// Map a martingale construction error to a process failure.
fn map_martingale_err(operation: &str, e: MartingaleError) -> Failure {
    match e {
        MartingaleError::ZeroNotInExpectation { .. }
        | MartingaleError::OneNotInExpectation { .. }
        | MartingaleError::NotHarmonic
        | MartingaleError::InvalidTransitionMatrix(_) => Failure::construction(e),
        MartingaleError::Padic(
            p @ (PadicError::PrecisionUnderflow { .. } | PadicError::IndistinguishableAtPrecision),
        ) => Failure::precision(operation, p),
        MartingaleError::NotAMartingale { .. } => Failure::invariant(e),
        other => Failure::schema(other),
    }
}

fn emit(value: &serde_json::Value, pretty: bool) {
    if pretty {
        println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
    } else {
        println!("{value}");
    }
}

fn read_space(path: &PathBuf) -> Result<padic_prob::schema::LoadedSpace, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::schema(format!("cannot read {}: {e}", path.display())))?;
    let file: SpaceFile = serde_json::from_str(&text).map_err(Failure::schema)?;
    file.load().map_err(Failure::schema)
}

fn cmd_expect(args: &ExpectArgs) -> Result<(), Failure> {
    let loaded = read_space(&args.space)?;
    let x = loaded
        .vars
        .get(&args.var)
        .ok_or_else(|| Failure::schema(format!("no variable named {}", args.var)))?;
    let ball = expectation(x)
        .map_err(|e| map_expectation_err("expectation", ExpectationError::Padic(e)))?;
    let eps = epsilon(x)
        .map_err(|e| map_expectation_err("epsilon", ExpectationError::Padic(e)))?;
    let mut out = ball_json(&ball);
    out["var"] = serde_json::json!(args.var);
    out["epsilon"] = serde_json::json!(eps.repr(loaded.p));
    emit(&out, args.pretty);
    Ok(())
}

fn cmd_condexpect(args: &CondexpectArgs) -> Result<(), Failure> {
    let loaded = read_space(&args.space)?;
    let x = loaded
        .vars
        .get(&args.var)
        .ok_or_else(|| Failure::schema(format!("no variable named {}", args.var)))?;
    let g = loaded
        .partitions
        .get(&args.partition)
        .ok_or_else(|| Failure::schema(format!("no partition named {}", args.partition)))?;
    let field =
        cond_expectation(x, g).map_err(|e| map_expectation_err("conditional expectation", e))?;
    let atoms: Vec<serde_json::Value> = g
        .atoms_as_ids()
        .iter()
        .zip(field.balls())
        .map(|(atom, ball)| {
            let mut entry = ball_json(ball);
            entry["atom"] = serde_json::json!(atom);
            entry["epsilon"] = serde_json::json!(ball.radius().repr(loaded.p));
            entry
        })
        .collect();
    emit(
        &serde_json::json!({
            "var": args.var,
            "partition": args.partition,
            "atoms": atoms,
        }),
        args.pretty,
    );
    Ok(())
}

fn cmd_sample(args: &SampleArgs) -> Result<(), Failure> {
    let samples = haar_sample(args.k, args.p, args.precision, args.count, args.seed)
        .map_err(Failure::schema)?;
    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for x in &samples {
        writeln!(w, "{}", value_json(x)).expect("stdout");
    }
    Ok(())
}

fn build_martingale(kind: &str, config: &MartConfig) -> Result<Martingale, Failure> {
    match kind {
        "sum" | "prod" => {
            let factors = config.load_factors().map_err(Failure::schema)?;
            if factors.is_empty() {
                return Err(Failure::schema("no factors in configuration"));
            }
            if kind == "sum" {
                sum_martingale(&factors).map_err(|e| map_martingale_err("sum martingale", e))
            } else {
                product_martingale(&factors)
                    .map_err(|e| map_martingale_err("product martingale", e))
            }
        }
        "markov" => {
            let (chain, f) = config.load_chain().map_err(Failure::schema)?;
            let horizon = config
                .horizon
                .ok_or_else(|| Failure::schema("markov run needs a horizon"))?;
            stopped_chain_martingale(&chain, &f, horizon)
                .map_err(|e| map_martingale_err("chain martingale", e))
        }
        other => Err(Failure::schema(format!("unknown martingale kind {other}"))),
    }
}

fn cmd_mart(args: &MartArgs) -> Result<(), Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::schema(format!("cannot read {}: {e}", args.config.display())))?;
    let config: MartConfig = serde_json::from_str(&text).map_err(Failure::schema)?;
    let m = build_martingale(&args.kind, &config)?;
    let trace = m
        .convergence_trace()
        .map_err(|e| map_martingale_err("convergence trace", e))?;

    if let Some(path) = &args.trace {
        let mut csv = String::from("n,norm\n");
        for (n, norm) in trace.iter().enumerate() {
            csv.push_str(&format!("{n},{}\n", norm.repr(config.p)));
        }
        std::fs::write(path, csv)
            .map_err(|e| Failure::schema(format!("cannot write {}: {e}", path.display())))?;
    }

    let stdout = std::io::stdout();
    let mut w = stdout.lock();
    for (n, norm) in trace.iter().enumerate() {
        writeln!(
            w,
            "{}",
            serde_json::json!({"n": n, "norm": norm.repr(config.p)})
        )
        .expect("stdout");
    }
    drop(w);

    let mut sampling = Vec::new();
    for (name, spec) in &config.stopping {
        let t = match (&spec.r#const, &spec.hit_abs_below) {
            (Some(n), None) => m
                .filtration()
                .stopping_time(vec![*n; m.filtration().space().len()])
                .map_err(Failure::schema)?,
            (None, Some(bound)) => {
                let threshold = parse_magnitude(bound, config.p).map_err(Failure::schema)?;
                m.hitting_time(threshold)
                    .map_err(|e| map_martingale_err("hitting time", e))?
            }
            _ => {
                return Err(Failure::schema(format!(
                    "stopping time {name} needs exactly one of const or hit_abs_below"
                )))
            }
        };
        match m.optional_sample(&t) {
            Ok(_) => sampling.push(serde_json::json!({"name": name, "holds": true})),
            Err(MartingaleError::NotAMartingale { .. }) => {
                return Err(Failure::invariant(format!(
                    "optional sampling failed for stopping time {name}"
                )));
            }
            Err(e) => return Err(map_martingale_err("optional sampling", e)),
        }
    }

    emit(
        &serde_json::json!({
            "kind": args.kind,
            "horizon": m.horizon(),
            "membership": true,
            "optional_sampling": sampling,
        }),
        args.pretty,
    );
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Failure> {
    if args.instances == 0 {
        return Err(Failure::schema("instances must be at least 1"));
    }
    let primes: Vec<u64> = args
        .p_list
        .split(',')
        .map(|s| s.trim().parse::<u64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Failure::schema(format!("bad p-list: {e}")))?;
    if primes.is_empty() {
        return Err(Failure::schema("p-list must name at least one prime"));
    }
    let mutation = match &args.mutate {
        None => Mutation::None,
        Some(name) => Mutation::parse(name)
            .ok_or_else(|| Failure::schema(format!("unknown mutation {name}")))?,
    };
    let config = VerifyConfig {
        seed: args.seed,
        instances: args.instances,
        primes,
        max_outcomes: args.max_outcomes,
        precision: args.precision,
        mutation,
    };
    let report = padic_prob::verify::run(&config);
    emit(&report.to_json(), args.pretty);
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 1,
            message: serde_json::json!({
                "error": "invariant",
                "failed_checks": report.failed_names(),
            }),
        })
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Expect(args) => cmd_expect(args),
        Command::Condexpect(args) => cmd_condexpect(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Mart(args) => cmd_mart(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("{}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
