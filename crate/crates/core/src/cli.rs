//! Command-line front end: `solve`, `verify`, `bench` and `jrp`.

use std::io::{Read, Write};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::approx::{solve_approx, ApproxConfig, Strategy};
use crate::engine::{first_sweep_stats, Diagnostics, SolverConfig, Tau};
use crate::error::SolveError;
use crate::instances::{random_dnsnn, random_tsp};
use crate::io::{parse_jrp, parse_problem};
use crate::jrp::{solve_jrp_oriented, JrpInstance};
use crate::oracle::oracle;
use crate::problem::Solution;

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_UNCONVERGED: i32 = 3;
/// Largest size the bench accepts.
pub const BENCH_MAX_N: usize = 14;

#[derive(Debug, Parser)]
#[command(name = "tntsp", version, about = "Tensor-network solver for TSP variants")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct SolveArgs {
    /// Problem JSON file, or `-` for stdin.
    #[arg(long, default_value = "-")]
    pub input: String,
    /// Damping factor: a number or `auto`.
    #[arg(long, default_value = "auto")]
    pub tau: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// all | random:k | nearest:k | failures:k
    #[arg(long, default_value = "all")]
    pub approx: String,
    /// Bond cap for compressing the `W` tensors.
    #[arg(long)]
    pub mps_bond: Option<usize>,
    #[arg(long, value_enum, default_value_t = OnOff::Off)]
    pub reuse: OnOff,
    /// Include wall-clock timings (output is then not reproducible).
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OnOff {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchFamily {
    Tsp,
    Dnsnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Orientation {
    Auto,
    Workers,
    Vacancies,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem document.
    Solve(SolveArgs),
    /// Solve and compare against the exhaustive oracle.
    Verify(SolveArgs),
    /// Peak `W` size, op count and wall time over a size range.
    Bench {
        #[arg(long, default_value_t = 4)]
        from: usize,
        #[arg(long, default_value_t = 10)]
        to: usize,
        #[arg(long, value_enum, default_value_t = BenchFamily::Tsp)]
        family: BenchFamily,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        /// Also run a full reused solve per size and report its time.
        #[arg(long)]
        solve: bool,
    },
    /// Solve a job reassignment document.
    Jrp {
        #[arg(long, default_value = "-")]
        input: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Orientation::Auto)]
        orientation: Orientation,
    },
}

/// Parses `--approx`.
pub fn parse_approx(s: &str) -> Result<ApproxConfig, String> {
    let (name, k) = match s.split_once(':') {
        Some((n, k)) => (n, Some(k.parse::<usize>().map_err(|e| format!("--approx k: {e}"))?)),
        None => (s, None),
    };
    let strategy = match name {
        "all" => Strategy::All,
        "random" => Strategy::RandomK,
        "nearest" => Strategy::HeuristicNearest,
        "failures" => Strategy::FromFailures,
        other => return Err(format!("--approx: unknown strategy `{other}`")),
    };
    Ok(ApproxConfig {
        strategy,
        k,
        mps_bond_cap: None,
    })
}

fn config_of(a: &SolveArgs) -> Result<SolverConfig, String> {
    let tau = if a.tau == "auto" {
        Tau::Auto
    } else {
        Tau::Fixed(a.tau.parse::<f64>().map_err(|e| format!("--tau: {e}"))?)
    };
    let mut approx = parse_approx(&a.approx)?;
    approx.mps_bond_cap = a.mps_bond;
    Ok(SolverConfig {
        tau,
        seed: a.seed,
        reuse: a.reuse == OnOff::On,
        approx,
        ..SolverConfig::default()
    })
}

fn read_input(path: &str) -> Result<String, String> {
    if path == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))
    }
}

fn solution_json(sol: &Solution, diag: &Diagnostics, cfg: &SolverConfig, timings: bool) -> Value {
    let iterations: Vec<Value> = diag
        .iterations
        .iter()
        .map(|r| {
            let mut v = json!({
                "position": r.position,
                "node": r.node,
                "tie_count": r.tie_count,
                "tau": r.tau,
                "ops": r.ops,
                "peak_w_elements": r.peak_w_len,
                "peak_w_nonzeros": r.peak_w_nnz,
                "reused": r.reused,
                "active_layers": r.active_layers,
            });
            if cfg.approx.mps_bond_cap.is_some() {
                v["truncation_error"] = json!(r.truncation_error);
            }
            if timings {
                v["micros"] = json!(r.micros);
            }
            v
        })
        .collect();
    json!({
        "route": sol.route,
        "cost": sol.cost,
        "feasible": sol.feasible,
        "violations": sol.violations,
        "degenerate_choices": sol.degenerate_choices,
        "tau_used": sol.tau_used,
        "tau_unconverged": sol.tau_unconverged,
        "tau_trace": diag.tau_trace,
        "peak_w_elements": diag.peak_w_len,
        "peak_w_nonzeros": diag.peak_w_nnz,
        "total_ops": diag.total_ops,
        "preconditioned": diag.preconditioned,
        "approx": cfg.approx,
        "iterations": iterations,
    })
}

fn exit_of(sol: &Solution) -> i32 {
    if !sol.feasible {
        EXIT_INFEASIBLE
    } else if sol.tau_unconverged {
        EXIT_UNCONVERGED
    } else {
        EXIT_OK
    }
}

fn error_exit(e: &SolveError) -> i32 {
    match e {
        SolveError::Model(_) => EXIT_ERROR,
        _ => EXIT_INFEASIBLE,
    }
}

fn emit(out: &mut dyn Write, v: &Value) {
    let _ = writeln!(out, "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn run_solve(a: &SolveArgs, verify: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let parsed = read_input(&a.input).and_then(|s| parse_problem(&s).map_err(|e| e.to_string()));
    let cfg = config_of(a);
    let (problem, cfg) = match (parsed, cfg) {
        (Ok(p), Ok(c)) => (p, c),
        (Err(e), _) | (_, Err(e)) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let (sol, diag) = match solve_approx(&problem, &cfg) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            emit(out, &json!({ "error": e.to_string() }));
            return error_exit(&e);
        }
    };
    let mut v = solution_json(&sol, &diag, &cfg, a.timings);
    if verify {
        match oracle(&problem) {
            Ok(o) => {
                let matches = match (o.best_cost, sol.cost) {
                    (Some(b), Some(c)) => sol.feasible && (b - c).abs() <= 1e-9 * b.abs().max(1.0),
                    (None, _) => !sol.feasible,
                    _ => false,
                };
                v["oracle_cost"] = json!(o.best_cost);
                v["oracle_optimal_routes"] = json!(o.optimal_routes.len());
                v["oracle_match"] = json!(matches);
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_ERROR;
            }
        }
    }
    emit(out, &v);
    exit_of(&sol)
}

/// One bench row.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub sweep_ms: f64,
    pub ops: u64,
    pub peak_w_elements: usize,
    pub peak_w_nonzeros: usize,
    pub solve_ms: Option<f64>,
}

/// Measures the first sweep (and optionally a reused solve) per size.
pub fn bench_rows(from: usize, to: usize, family: BenchFamily, seed: u64, solve: bool) -> Result<Vec<BenchRow>, SolveError> {
    let mut rows = Vec::new();
    for n in from..=to {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
        let problem = match family {
            BenchFamily::Tsp => random_tsp(n, 1, 100, &mut rng),
            BenchFamily::Dnsnn => random_dnsnn(n, n, 2, &mut rng),
        };
        let t0 = Instant::now();
        let stats = first_sweep_stats(&problem, 0.0)?;
        let sweep_ms = t0.elapsed().as_secs_f64() * 1e3;
        let solve_ms = if solve {
            let t1 = Instant::now();
            crate::engine::solve(&problem, &SolverConfig::default().with_reuse(true))?;
            Some(t1.elapsed().as_secs_f64() * 1e3)
        } else {
            None
        };
        rows.push(BenchRow {
            n,
            sweep_ms,
            ops: stats.ops,
            peak_w_elements: stats.peak_w_len,
            peak_w_nonzeros: stats.peak_w_nnz,
            solve_ms,
        });
    }
    Ok(rows)
}

fn run_jrp(input: &str, seed: u64, orientation: Orientation, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let inst: JrpInstance = match read_input(input).and_then(|s| parse_jrp(&s).map_err(|e| e.to_string())) {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_ERROR;
        }
    };
    let swap = match orientation {
        Orientation::Auto => inst.vacancies() > inst.workers(),
        Orientation::Workers => false,
        Orientation::Vacancies => true,
    };
    match solve_jrp_oriented(&inst, &SolverConfig::default().with_seed(seed), swap) {
        Ok(a) => {
            emit(out, &json!(a));
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            error_exit(&e)
        }
    }
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{e}");
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Solve(a) => run_solve(&a, false, out, err),
        Command::Verify(a) => run_solve(&a, true, out, err),
        Command::Jrp {
            input,
            seed,
            orientation,
        } => run_jrp(&input, seed, orientation, out, err),
        Command::Bench {
            from,
            to,
            family,
            seed,
            format,
            solve,
        } => {
            if to > BENCH_MAX_N || from > to || from < 2 {
                let _ = writeln!(err, "error: size range {from}..={to} outside 2..={BENCH_MAX_N}");
                return EXIT_ERROR;
            }
            let rows = match bench_rows(from, to, family, seed, solve) {
                Ok(r) => r,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return EXIT_ERROR;
                }
            };
            match format {
                Format::Json => emit(out, &json!(rows)),
                Format::Csv => {
                    let _ = writeln!(out, "n,sweep_ms,ops,peak_w_elements,peak_w_nonzeros,solve_ms");
                    for r in rows {
                        let s = r.solve_ms.map(|v| format!("{v:.3}")).unwrap_or_default();
                        let _ = writeln!(
                            out,
                            "{},{:.3},{},{},{},{}",
                            r.n, r.sweep_ms, r.ops, r.peak_w_elements, r.peak_w_nonzeros, s
                        );
                    }
                }
            }
            EXIT_OK
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_flag_forms() {
        assert_eq!(parse_approx("all").unwrap().strategy, Strategy::All);
        let c = parse_approx("random:2").unwrap();
        assert_eq!((c.strategy, c.k), (Strategy::RandomK, Some(2)));
        assert!(parse_approx("greedy").is_err());
        assert!(parse_approx("nearest:x").is_err());
    }

    #[test]
    fn bench_refuses_large_sizes() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(["tntsp", "bench", "--from", "4", "--to", "15"], &mut o, &mut e);
        assert_eq!(code, EXIT_ERROR);
    }

    #[test]
    fn bench_emits_one_row_per_size() {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        assert_eq!(run(["tntsp", "bench", "--from", "4", "--to", "6"], &mut o, &mut e), EXIT_OK);
        let text = String::from_utf8(o).unwrap();
        assert_eq!(text.lines().count(), 4);
    }
}
