//! Command-line front end: argument parsing, JSON/CSV rendering and exit
//! codes. `main.rs` only forwards to [`run`].

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::{json, Value};

use crate::bounds::{bound_report, c_for_n, n_for_c, BoundPair, BoundParams, BoundReport, OUTPUT_DIGITS};
use crate::error::{Error, Result};
use crate::harness::{
    complexity_at_target, run_trials, search_n, sweep, ComplexityRow, Criterion, Grid, SearchOptions,
    Side, SweepOptions, SweepRow, TrialSummary,
};
use crate::params::{exact_log2, parse_modulus, precision_from_env, Mode, ProblemParams};
use crate::precreal::{PrecReal, Round};
use crate::solver::{generate_lists, run_ktree_with, verify_solution, write_dump, SolverConfig, DEFAULT_MEMORY_CAP};

/// Version of the JSON record layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Frozen column order of sweep-style CSV output.
pub const SWEEP_CSV_HEADER: &str = "n,c,prob_lb,prob_ub,prob_analytic_lb,prob_analytic_ub,size_lb,size_ub,emp_rate,emp_ci99,emp_total_size_mean,emp_total_size_std,emp_max_level_mean";

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARAM: i32 = 2;
pub const EXIT_UNREACHABLE: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "ktree", version, about = "k-Tree algorithm: bounds, solver and experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format (sweeps default to csv, everything else to json).
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Working precision in bits (default: KTREE_PRECISION_BITS or 192).
    #[arg(long, global = true)]
    precision: Option<u32>,

    /// Add wall-clock timing to JSON output.
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum CriterionArg {
    Lb,
    Ub,
    Empirical,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Sufficient,
    Necessary,
}

#[derive(Args, Debug)]
struct Instance {
    /// Modulus: decimal, 2^b, or 2^b+c / 2^b-c.
    #[arg(long)]
    m: String,
    /// Number of lists, a power of 2.
    #[arg(long)]
    k: u64,
    /// Addition mode: int or zm.
    #[arg(long, default_value_t = Mode::IntegerSum)]
    mode: Mode,
}

#[derive(Args, Debug)]
struct Size {
    /// List size.
    #[arg(long, conflicts_with = "c")]
    n: Option<BigUint>,
    /// List size as c = n p (rounded to the nearest n).
    #[arg(long)]
    c: Option<f64>,
}

#[derive(Args, Debug)]
struct Runs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    parallelism: usize,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Computed (and optionally analytic) bounds for one instance.
    Bounds {
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        size: Size,
        /// Also report the closed-form bounds.
        #[arg(long)]
        analytic: bool,
    },
    /// Run the algorithm once on random lists.
    Solve {
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        size: Size,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write lists and trace in binary form.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Maximum total list elements.
        #[arg(long, default_value_t = DEFAULT_MEMORY_CAP)]
        memory_cap: u64,
    },
    /// Monte Carlo success rate against the bounds.
    Experiment {
        #[command(flatten)]
        inst: Instance,
        #[command(flatten)]
        size: Size,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[command(flatten)]
        runs: Runs,
    },
    /// Least n reaching a target probability.
    Search {
        #[command(flatten)]
        inst: Instance,
        #[arg(long)]
        target: f64,
        #[arg(long, value_enum, default_value_t = CriterionArg::Lb)]
        criterion: CriterionArg,
        /// Trials per probe for the empirical criterion.
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        /// Upper end of the search.
        #[arg(long)]
        n_max: Option<BigUint>,
        #[command(flatten)]
        runs: Runs,
    },
    /// Bounds (and optionally trials) over a grid of list sizes.
    Sweep {
        #[command(flatten)]
        inst: Instance,
        /// Comma-separated c values.
        #[arg(long, conflicts_with = "n_grid")]
        c_grid: Option<String>,
        /// Comma-separated n values.
        #[arg(long)]
        n_grid: Option<String>,
        /// Trials per row; omit to skip the Monte Carlo runs.
        #[arg(long)]
        trials: Option<u64>,
        #[command(flatten)]
        runs: Runs,
    },
    /// Complexity reaching a target probability, per k.
    Complexity {
        #[arg(long)]
        m: String,
        #[arg(long, default_value_t = Mode::IntegerSum)]
        mode: Mode,
        /// Comma-separated k values.
        #[arg(long, default_value = "4,8,16,32,64,128,256,512,1024")]
        k_grid: String,
        #[arg(long)]
        target: f64,
        #[arg(long, value_enum, default_value_t = SideArg::Sufficient)]
        side: SideArg,
    },
}

/// What a command produced: text for the output and an exit code.
struct Output {
    text: String,
    code: i32,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Resource { .. } => EXIT_RESOURCE,
        Error::UnreachableTarget { .. } => EXIT_UNREACHABLE,
        _ => EXIT_PARAM,
    }
}

/// Parse `args` (program name first), run, write output; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARAM } else { EXIT_OK };
        }
    };
    let started = Instant::now();
    let result = execute(&cli, started);
    let out = match result {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &out.text),
        None => std::io::stdout().write_all(out.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return EXIT_PARAM;
    }
    out.code
}

fn precision(cli: &Cli) -> Result<u32> {
    match cli.precision {
        Some(b) if b < 32 => Err(Error::Param(format!("precision must be at least 32 bits, got {b}"))),
        Some(b) => Ok(b),
        None => precision_from_env(),
    }
}

fn params_json(m: &BigUint, k: Option<u64>, n: Option<&BigUint>, mode: Mode, prec: u32) -> Value {
    json!({
        "m": m.to_string(),
        "m_pow2": exact_log2(m).map(|b| format!("2^{b}")),
        "k": k,
        "n": n.map(|n| n.to_string()),
        "mode": mode,
        "precision_bits": prec,
    })
}

fn record(cli: &Cli, command: &str, params: Value, flags: Value, results: Value, started: Instant) -> String {
    let mut rec = json!({
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "params": params,
        "flags": flags,
        "results": results,
    });
    if cli.timing {
        rec["timing"] = json!({ "elapsed_ms": started.elapsed().as_secs_f64() * 1e3 });
    }
    let mut s = serde_json::to_string_pretty(&rec).expect("record serialises");
    s.push('\n');
    s
}

fn real_json(x: &PrecReal, round: Round) -> Value {
    json!({
        "value": x.to_decimal(OUTPUT_DIGITS, round),
        "rounding": if round == Round::Up { "up" } else { "down" },
        "log2": if x.is_zero() { None } else { Some(x.log2()) },
    })
}

fn pair_json(p: &BoundPair) -> Value {
    serde_json::to_value(p.view()).expect("view serialises")
}

fn report_json(r: &BoundReport, analytic: bool) -> Value {
    let mut v = json!({
        "prob": pair_json(&r.prob),
        "size": pair_json(&r.size),
        "first_moment": pair_json(&r.moments.first_moment),
        "second_moment_ub": real_json(&r.moments.second_moment_ub, Round::Up),
    });
    if analytic {
        v["analytic_prob"] = r.analytic_prob.as_ref().map_or(Value::Null, pair_json);
        v["analytic_size"] = r.analytic_size.as_ref().map_or(Value::Null, pair_json);
    }
    v
}

fn resolve_n(bp: &BoundParams, size: &Size) -> Result<BigUint> {
    match (&size.n, size.c) {
        (Some(n), None) => Ok(n.clone()),
        (None, Some(c)) => n_for_c(bp, c),
        _ => Err(Error::Param("give exactly one of --n and --c".into())),
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| t.trim())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::Param(format!("bad {what} value {t:?}"))))
        .collect()
}

fn cell_lo(p: Option<&BoundPair>) -> String {
    p.map_or(String::new(), |p| p.lower.to_decimal(OUTPUT_DIGITS, Round::Down))
}

fn cell_hi(p: Option<&BoundPair>) -> String {
    p.map_or(String::new(), |p| p.upper.to_decimal(OUTPUT_DIGITS, Round::Up))
}

fn sweep_csv_line(
    out: &mut String,
    n: &BigUint,
    c: f64,
    r: (&BoundPair, &BoundPair, Option<&BoundPair>, Option<&BoundPair>),
    emp: Option<&TrialSummary>,
) {
    let (prob, size, ap, _) = r;
    let e = |f: fn(&TrialSummary) -> f64| emp.map_or(String::new(), |s| f(s).to_string());
    let _ = writeln!(
        out,
        "{n},{c},{},{},{},{},{},{},{},{},{},{},{}",
        cell_lo(Some(prob)),
        cell_hi(Some(prob)),
        cell_lo(ap),
        cell_hi(ap),
        cell_lo(Some(size)),
        cell_hi(Some(size)),
        e(|s| s.success_rate),
        e(|s| s.ci_radius_99),
        e(|s| s.mean_total_size),
        e(|s| s.std_total_size),
        e(|s| s.mean_max_level_size),
    );
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let b = &r.bounds;
        let n: BigUint = r.n.parse().expect("row n is decimal");
        sweep_csv_line(
            &mut s,
            &n,
            r.c,
            (&b.prob, &b.size, b.analytic_prob.as_ref(), b.analytic_size.as_ref()),
            r.empirical.as_ref(),
        );
    }
    s
}

fn report_csv(n: &BigUint, c: f64, r: &BoundReport, emp: Option<&TrialSummary>) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    sweep_csv_line(&mut s, n, c, (&r.prob, &r.size, r.analytic_prob.as_ref(), r.analytic_size.as_ref()), emp);
    s
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or(String::new(), T::to_string)
}

fn complexity_csv(rows: &[ComplexityRow]) -> String {
    let mut s = String::from("k,unreachable,n,c,complexity,log2_complexity,best_value\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.k,
            r.unreachable,
            opt(&r.n),
            opt(&r.c),
            opt(&r.complexity),
            opt(&r.log2_complexity),
            opt(&r.best_value)
        );
    }
    s
}

fn flags_json(bp: &BoundParams) -> Value {
    serde_json::to_value(bp.flags()).expect("flags serialise")
}

fn execute(cli: &Cli, started: Instant) -> Result<Output> {
    let prec = precision(cli)?;
    let ok = |text| Ok(Output { text, code: EXIT_OK });
    match &cli.command {
        Command::Bounds { inst, size, analytic } => {
            let m = parse_modulus(&inst.m)?;
            let bp = BoundParams::new(&m, inst.k, inst.mode, prec)?;
            let n = resolve_n(&bp, size)?;
            ProblemParams::with_precision(m.clone(), inst.k, n.clone(), inst.mode, prec)?;
            let r = bound_report(&bp, &n)?;
            let c = c_for_n(&bp, &n);
            if cli.format == Some(Format::Csv) {
                let shown = BoundReport {
                    analytic_prob: r.analytic_prob.clone().filter(|_| *analytic),
                    analytic_size: r.analytic_size.clone().filter(|_| *analytic),
                    ..r
                };
                return ok(report_csv(&n, c, &shown, None));
            }
            let mut res = report_json(&r, *analytic);
            res["c"] = json!(c);
            ok(record(cli, "bounds", params_json(&m, Some(inst.k), Some(&n), inst.mode, prec), flags_json(&bp), res, started))
        }
        Command::Solve { inst, size, seed, dump, memory_cap } => {
            if cli.format == Some(Format::Csv) {
                return Err(Error::Param("solve supports json output only".into()));
            }
            let m = parse_modulus(&inst.m)?;
            let bp = BoundParams::new(&m, inst.k, inst.mode, prec)?;
            let n = resolve_n(&bp, size)?;
            let pp = ProblemParams::with_precision(m.clone(), inst.k, n.clone(), inst.mode, prec)?;
            let lists = generate_lists(&pp, *seed)?;
            let trace = run_ktree_with(&pp, &lists, &SolverConfig { memory_cap: *memory_cap })?;
            let verified = trace
                .solution_indices
                .as_ref()
                .map(|ix| verify_solution(&lists, ix, &pp));
            if let Some(path) = dump {
                let mut buf = Vec::new();
                write_dump(&mut buf, &lists, &pp, Some(&trace)).expect("writing to memory");
                std::fs::write(path, buf).map_err(|e| Error::Param(format!("cannot write dump: {e}")))?;
            }
            let res = json!({
                "seed": seed,
                "c": c_for_n(&bp, &n),
                "trace": trace,
                "verified": verified,
            });
            ok(record(cli, "solve", params_json(&m, Some(inst.k), Some(&n), inst.mode, prec), flags_json(&bp), res, started))
        }
        Command::Experiment { inst, size, trials, runs } => {
            let m = parse_modulus(&inst.m)?;
            let bp = BoundParams::new(&m, inst.k, inst.mode, prec)?;
            let n = resolve_n(&bp, size)?;
            let pp = ProblemParams::with_precision(m.clone(), inst.k, n.clone(), inst.mode, prec)?;
            let summary = run_trials(&pp, *trials, runs.seed, runs.parallelism)?;
            let r = bound_report(&bp, &n)?;
            let c = c_for_n(&bp, &n);
            if cli.format == Some(Format::Csv) {
                return ok(report_csv(&n, c, &r, Some(&summary)));
            }
            let lo = r.prob.lower.to_f64() - summary.ci_radius_99;
            let hi = r.prob.upper.to_f64() + summary.ci_radius_99;
            let mut res = report_json(&r, true);
            res["c"] = json!(c);
            res["empirical"] = serde_json::to_value(&summary).expect("summary serialises");
            res["rate_within_bounds"] = json!(lo <= summary.success_rate && summary.success_rate <= hi);
            ok(record(cli, "experiment", params_json(&m, Some(inst.k), Some(&n), inst.mode, prec), flags_json(&bp), res, started))
        }
        Command::Search { inst, target, criterion, trials, n_max, runs } => {
            let m = parse_modulus(&inst.m)?;
            let bp = BoundParams::new(&m, inst.k, inst.mode, prec)?;
            let crit = match criterion {
                CriterionArg::Lb => Criterion::ComputedLB,
                CriterionArg::Ub => Criterion::ComputedUB,
                CriterionArg::Empirical => Criterion::Empirical(*trials),
            };
            let opts = SearchOptions {
                mode: inst.mode,
                precision_bits: prec,
                n_max: n_max.clone(),
                seed: runs.seed,
                parallelism: runs.parallelism,
            };
            let params = params_json(&m, Some(inst.k), None, inst.mode, prec);
            let crit_name = format!("{criterion:?}").to_lowercase();
            match search_n(&m, inst.k, *target, crit, &opts) {
                Ok(r) => {
                    if cli.format == Some(Format::Csv) {
                        let text = format!(
                            "n,c,value,value_below,ci99,probes\n{},{},{},{},{},{}\n",
                            r.n, r.c, r.value, opt(&r.value_below), opt(&r.ci_radius_99), r.probes
                        );
                        return ok(text);
                    }
                    let mut res = serde_json::to_value(&r).expect("result serialises");
                    res["target"] = json!(target);
                    res["criterion"] = json!(crit_name);
                    ok(record(cli, "search", params, flags_json(&bp), res, started))
                }
                Err(Error::UnreachableTarget { target, n_max, best_n, best_value }) => {
                    let text = if cli.format == Some(Format::Csv) {
                        format!("n,c,value,value_below,ci99,probes\n{best_n},{},{best_value},,,\n", c_for_n(&bp, &best_n))
                    } else {
                        let res = json!({
                            "target": target,
                            "criterion": crit_name,
                            "unreachable": true,
                            "n_max": n_max.to_string(),
                            "best_n": best_n.to_string(),
                            "best_value": best_value,
                            "c": c_for_n(&bp, &best_n),
                        });
                        record(cli, "search", params, flags_json(&bp), res, started)
                    };
                    eprintln!("error: target {target} unreachable up to n = {n_max}");
                    Ok(Output { text, code: EXIT_UNREACHABLE })
                }
                Err(e) => Err(e),
            }
        }
        Command::Sweep { inst, c_grid, n_grid, trials, runs } => {
            let m = parse_modulus(&inst.m)?;
            let grid = match (c_grid, n_grid) {
                (Some(c), None) => Grid::C(parse_list(c, "c")?),
                (None, Some(n)) => Grid::N(parse_list(n, "n")?),
                _ => return Err(Error::Param("give exactly one of --c-grid and --n-grid".into())),
            };
            let opts = SweepOptions {
                mode: inst.mode,
                precision_bits: prec,
                trials: *trials,
                seed: runs.seed,
                parallelism: runs.parallelism,
            };
            let rows = sweep(&m, inst.k, &grid, &opts)?;
            if cli.format != Some(Format::Json) {
                return ok(sweep_csv(&rows));
            }
            let bp = BoundParams::new(&m, inst.k, inst.mode, prec)?;
            let res = json!({ "rows": rows });
            ok(record(cli, "sweep", params_json(&m, Some(inst.k), None, inst.mode, prec), flags_json(&bp), res, started))
        }
        Command::Complexity { m, mode, k_grid, target, side } => {
            let m = parse_modulus(m)?;
            let ks: Vec<u64> = parse_list(k_grid, "k")?;
            let side = match side {
                SideArg::Sufficient => Side::Sufficient,
                SideArg::Necessary => Side::Necessary,
            };
            let opts = SearchOptions::new(*mode, prec);
            let rows = complexity_at_target(&m, &ks, *target, side, &opts)?;
            if cli.format == Some(Format::Csv) {
                return ok(complexity_csv(&rows));
            }
            let res = json!({ "target": target, "side": side, "rows": rows });
            ok(record(cli, "complexity", params_json(&m, None, None, *mode, prec), Value::Null, res, started))
        }
    }
}
