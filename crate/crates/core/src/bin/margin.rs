//! `margin`: screen conjunction batches and run distributed sessions.
//!
//! Exit codes: 0 success, 1 row-level errors, 2 schema or input errors,
//! 3 transport errors.

use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use conjunction_margin::fista::wire::{run_wire_session, Endpoint};
use conjunction_margin::fista::{AgentRole, FistaOptions};
use conjunction_margin::screening::{
    ingest_csv, parse_ellipsoid, screen_batch, write_csv, write_rows_csv, write_rows_json, ScreeningOptions, Solver,
    Summary,
};
use conjunction_margin::synth::{random_suite_with, sphere_suite, SynthConfig};

const EXIT_ROW_ERRORS: u8 = 1;
const EXIT_SCHEMA: u8 = 2;
const EXIT_TRANSPORT: u8 = 3;

#[derive(Parser)]
#[command(name = "margin", version, about = "Minimum distance between uncertainty ellipsoids of conjunctions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Screen every conjunction in a CSV file.
    Screen(ScreenArgs),
    /// Wait for a peer and run one side of a distributed FISTA session.
    Serve {
        /// Address to listen on, e.g. 127.0.0.1:7878.
        #[arg(long)]
        listen: String,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Connect to a serving peer and run the other side of the session.
    Connect {
        /// Address of the serving peer.
        addr: String,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Write random conjunctions in the screening CSV schema.
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Args)]
struct ScreenArgs {
    /// Input CSV with the conjunction schema.
    input: PathBuf,
    /// fw, fista, rimon-boyd or oracle.
    #[arg(long, default_value = "fw")]
    method: Solver,
    /// Scale every ellipsoid to the sigma level.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Step tolerance in km (fw and fista default to 1e-3, oracle to 1e-9).
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Compare every margin with the alternating-projections reference.
    #[arg(long)]
    oracle_check: bool,
    /// Omit wall-clock fields so identical inputs give identical reports.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value = "csv")]
    output: OutputFormat,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Also write the batch summary as JSON to this file.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct SessionArgs {
    /// 4-line ellipsoid file: center, then three covariance rows.
    #[arg(long)]
    ellipsoid: PathBuf,
    /// Role of this side (serve defaults to chaser, connect to target).
    #[arg(long, value_enum)]
    role: Option<RoleArg>,
    #[arg(long, default_value_t = FistaOptions::default().tol_step)]
    tol: f64,
    #[arg(long, default_value_t = FistaOptions::default().max_iter)]
    max_iter: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Chaser,
    Target,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sphere pairs with analytic margins instead of random ellipsoids.
    #[arg(long)]
    spheres: bool,
    /// Attach a random log10 collision probability in [-10, -2].
    #[arg(long)]
    risk: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Screen(args) => screen(args),
        Command::Serve { listen, session } => distributed(Endpoint::Listen(listen), AgentRole::Chaser, session),
        Command::Connect { addr, session } => distributed(Endpoint::Connect(addr), AgentRole::Target, session),
        Command::Generate(args) => generate(args),
    }
}

fn screen(args: ScreenArgs) -> ExitCode {
    let ingested = match ingest_csv(&args.input) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    for e in &ingested.errors {
        eprintln!("rejected {e}");
    }
    let opts = ScreeningOptions {
        solver: args.method,
        sigma: args.sigma,
        tol: args.tol,
        max_iter: args.max_iter,
        oracle_check: args.oracle_check,
        deterministic: args.deterministic,
        threads: args.threads,
    };
    let (rows, summary) = match screen_batch(&ingested.conjunctions, &opts) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let stdout = io::stdout().lock();
    let written = match args.output {
        OutputFormat::Csv => write_rows_csv(stdout, &rows).map_err(|e| e.to_string()),
        OutputFormat::Json => write_rows_json(stdout, &rows).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write report: {e}");
        return ExitCode::from(EXIT_SCHEMA);
    }
    print_summary(&summary, ingested.errors.len());
    if let Some(path) = args.summary {
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        if let Err(e) = fs::write(&path, text + "\n") {
            eprintln!("error: cannot write {}: {e}", path.display());
            return ExitCode::from(EXIT_SCHEMA);
        }
    }
    for row in rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("row {}: {}", row.id, row.error.as_deref().unwrap_or_default());
    }
    if summary.errors > 0 || !ingested.errors.is_empty() {
        ExitCode::from(EXIT_ROW_ERRORS)
    } else {
        ExitCode::SUCCESS
    }
}

fn print_summary(s: &Summary, rejected: usize) {
    let mut err = io::stderr().lock();
    let _ = writeln!(
        err,
        "screened {} (rejected {rejected}, failed {}): concern {}, overlap {}, not converged {}",
        s.count, s.errors, s.concern, s.overlap, s.not_converged
    );
    if s.rb_pathologies > 0 {
        let _ = writeln!(err, "rimon-boyd pathologies: {}", s.rb_pathologies);
    }
    if let Some(h) = &s.error_histogram {
        let _ = writeln!(err, "error vs oracle: max |e| {:.3e} km, mean {:.3e} km", h.max_abs, h.mean);
        let mut lo = 0.0;
        for (i, count) in h.counts.iter().enumerate() {
            match h.edges.get(i) {
                Some(hi) => {
                    let _ = writeln!(err, "  [{lo:.0e}, {hi:.0e}) km: {count}");
                    lo = *hi;
                }
                None => {
                    let _ = writeln!(err, "  [{lo:.0e}, inf) km: {count}");
                }
            }
        }
    }
    if let Some(bins) = &s.risk_histogram {
        let _ = writeln!(err, "concern by log10 risk:");
        for b in bins {
            let _ = writeln!(err, "  [{}, {}): {}/{}", b.risk_floor, b.risk_floor + 1, b.concern, b.total);
        }
    }
    if let (Some(t), Some(rate)) = (s.wall_time_s, s.throughput_per_min) {
        let _ = writeln!(err, "wall time {t:.3} s, {rate:.0} conjunctions/min");
    }
}

fn distributed(endpoint: Endpoint, default_role: AgentRole, args: SessionArgs) -> ExitCode {
    let text = match fs::read_to_string(&args.ellipsoid) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.ellipsoid.display());
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let ellipsoid = match parse_ellipsoid(&text) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("error: {}: {e}", args.ellipsoid.display());
            return ExitCode::from(EXIT_SCHEMA);
        }
    };
    let role = match args.role {
        Some(RoleArg::Chaser) => AgentRole::Chaser,
        Some(RoleArg::Target) => AgentRole::Target,
        None => default_role,
    };
    let opts = FistaOptions { tol_step: args.tol, max_iter: args.max_iter };
    match run_wire_session(&endpoint, role, ellipsoid, &opts) {
        Ok(result) => {
            println!("{}", serde_json::to_string_pretty(&result).expect("result serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_TRANSPORT)
        }
    }
}

fn generate(args: GenerateArgs) -> ExitCode {
    let conjunctions = if args.spheres {
        sphere_suite(args.seed, args.count).into_iter().map(|s| s.conjunction).collect()
    } else {
        let config = SynthConfig { risk: args.risk.then_some((-10.0, -2.0)), ..SynthConfig::default() };
        random_suite_with(args.seed, args.count, config)
    };
    match write_csv(io::stdout().lock(), &conjunctions) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SCHEMA)
        }
    }
}
