use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heatker::operator::{OperatorError, PRESETS};
use heatker::pipeline::{prepare_cache, MAX_GUARDED_ORDER};
use heatker::{emit_report, parse_operator, run, Dimension, Format, Passes, RunConfig};
use heatker_core::rewrite::Background;

#[derive(Parser)]
#[command(
    name = "heatker",
    version,
    about = "Heat kernel coefficients of nonminimal vector operators with torsion"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Latex,
    Text,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Compute E_m for an operator.
    Compute {
        /// Preset (`nonminimal`, `yang-mills alpha=2`, ...) or path to a description file.
        #[arg(long)]
        operator: String,
        #[arg(long)]
        order: usize,
        /// `symbolic` or an even integer.
        #[arg(long, default_value = "symbolic")]
        dim: String,
        #[arg(long)]
        no_torsion: bool,
        #[arg(long)]
        no_gauge: bool,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
        #[arg(long, env = "HEATKER_CACHE")]
        cache: Option<PathBuf>,
        /// Comma-separated simplification passes: bianchi, cyclic.
        #[arg(long, value_delimiter = ',')]
        simplify: Vec<String>,
        #[arg(long)]
        workers: Option<usize>,
        /// Lift the order guard.
        #[arg(long)]
        allow_large_order: bool,
    },
    /// Precompute colim tables.
    Colim {
        #[arg(long)]
        max_order: usize,
        #[arg(long, default_value_t = 2)]
        rank: u8,
        #[arg(long, env = "HEATKER_CACHE")]
        cache: PathBuf,
        #[arg(long)]
        no_torsion: bool,
        #[arg(long)]
        no_gauge: bool,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("heatker: {msg}");
    ExitCode::from(code)
}

fn operator_text(arg: &str) -> Result<String, String> {
    let head = arg.split_whitespace().next().unwrap_or("");
    if PRESETS.contains(&head) {
        return Ok(arg.to_string());
    }
    std::fs::read_to_string(arg).map_err(|e| format!("cannot read operator file '{arg}': {e}"))
}

fn compute(cli: Command) -> ExitCode {
    let Command::Compute {
        operator,
        order,
        dim,
        no_torsion,
        no_gauge,
        format,
        cache,
        simplify,
        workers,
        allow_large_order,
    } = cli
    else {
        unreachable!()
    };
    let text = match operator_text(&operator) {
        Ok(t) => t,
        Err(e) => return fail(2, e),
    };
    let op = match parse_operator(&text) {
        Ok(op) => op,
        Err(e @ OperatorError::Parse(_)) => return fail(2, e),
        Err(e) => return fail(3, e),
    };
    let dimension = if dim == "symbolic" {
        Dimension::Symbolic
    } else {
        match dim.parse::<i64>() {
            Ok(n) => Dimension::Fixed(n),
            Err(_) => {
                return fail(
                    2,
                    format!("--dim expects 'symbolic' or an even integer, found '{dim}'"),
                )
            }
        }
    };
    let mut passes = Passes::default();
    for p in &simplify {
        match p.trim() {
            "bianchi" => passes.bianchi = true,
            "cyclic" => passes.cyclic = true,
            other => return fail(2, format!("unknown simplify pass '{other}'")),
        }
    }
    let mut config = RunConfig::new(op, order, dimension);
    config.torsion = !no_torsion;
    config.gauge = !no_gauge;
    config.cache = cache;
    config.simplify = passes;
    config.workers = workers;
    config.allow_large_order = allow_large_order;
    let report = match run(&config) {
        Ok(r) => r,
        Err(e) => return fail(e.exit_code() as u8, e),
    };
    for s in &report.stages {
        eprintln!(
            "[{:>13}] {:>9.3}s {:>9} terms",
            s.name,
            s.elapsed.as_secs_f64(),
            s.terms
        );
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let format = match format {
        FormatArg::Latex => Format::Latex,
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    print!("{}", emit_report(&report, format));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        c @ Command::Compute { .. } => compute(c),
        Command::Colim {
            max_order,
            rank,
            cache,
            no_torsion,
            no_gauge,
        } => {
            if rank != 0 && rank != 2 {
                return fail(3, format!("rank {rank}: only 0 and 2 are supported"));
            }
            if max_order > 2 * MAX_GUARDED_ORDER {
                return fail(
                    4,
                    format!("max order {max_order} exceeds {}", 2 * MAX_GUARDED_ORDER),
                );
            }
            let flags = Background {
                torsion: !no_torsion,
                gauge: !no_gauge,
            };
            match prepare_cache(max_order, rank, flags, &cache) {
                Ok(warnings) => {
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    println!(
                        "colim tables up to order {max_order} (rank {rank}) in {}",
                        cache.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e.exit_code() as u8, e),
            }
        }
    }
}
