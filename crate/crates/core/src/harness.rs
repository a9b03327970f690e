//! Monte Carlo trials, searches for the list size reaching a target
//! probability, parameter sweeps and complexity curves.

use num_bigint::BigUint;
use num_traits::One;
use rand::RngCore;
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{
    bound_report, c_for_n, n_for_c, prob_bounds,
    size_bounds, BoundPair, BoundPairView, BoundParams,
};
use crate::error::{param, Error, Result};
use crate::params::{HypothesisFlags, Mode, ProblemParams};
use crate::precreal::{PrecReal, Round};
use crate::solver::{generate_lists_stream, run_ktree, stream_rng, InputLists, RunTrace};

/// Failure probability behind the reported confidence radius.
pub const CI_DELTA: f64 = 0.01;

/// Two-sided Hoeffding radius at confidence 99%: `sqrt(ln(2/0.01) / (2T))`.
pub fn ci_radius_99(trials: u64) -> f64 {
    ((2.0 / CI_DELTA).ln() / (2.0 * trials as f64)).sqrt()
}

/// Seed for probe or row `index` of a run seeded with `seed`.
///
/// Drawn from streams counting down from `u64::MAX`, so it never collides
/// with the trial streams `0, 1, 2, ...` of the same seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    stream_rng(seed, u64::MAX - index).next_u64()
}

/// Aggregated outcome of independent runs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSummary {
    pub m: String,
    pub k: u64,
    pub n: String,
    pub mode: Mode,
    pub seed: u64,
    pub trials: u64,
    pub successes: u64,
    pub success_rate: f64,
    pub ci_radius_99: f64,
    pub mean_total_size: f64,
    pub std_total_size: f64,
    pub mean_max_level_size: f64,
    pub std_max_level_size: f64,
    pub mean_zero_count: f64,
    pub mean_zero_count_squared: f64,
}

/// Per-trial numbers kept for aggregation.
#[derive(Debug, Clone, Copy)]
struct Outcome {
    success: bool,
    total: u64,
    max_level: u64,
    zeros: u64,
}

impl From<&RunTrace> for Outcome {
    fn from(t: &RunTrace) -> Self {
        Outcome {
            success: t.success,
            total: t.total_size,
            max_level: t.max_level_size,
            zeros: t.zero_count,
        }
    }
}

fn mean_std(xs: impl Iterator<Item = f64> + Clone, count: u64) -> (f64, f64) {
    let t = count as f64;
    let mean = xs.clone().sum::<f64>() / t;
    if count < 2 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (t - 1.0);
    (mean, var.sqrt())
}

fn summarize(params: &ProblemParams, seed: u64, outcomes: &[Outcome]) -> TrialSummary {
    let t = outcomes.len() as u64;
    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let (mean_total_size, std_total_size) = mean_std(outcomes.iter().map(|o| o.total as f64), t);
    let (mean_max_level_size, std_max_level_size) =
        mean_std(outcomes.iter().map(|o| o.max_level as f64), t);
    let z = outcomes.iter().map(|o| o.zeros as f64);
    TrialSummary {
        m: params.m.to_string(),
        k: params.k,
        n: params.n.to_string(),
        mode: params.mode,
        seed,
        trials: t,
        successes,
        success_rate: successes as f64 / t as f64,
        ci_radius_99: ci_radius_99(t),
        mean_total_size,
        std_total_size,
        mean_max_level_size,
        std_max_level_size,
        mean_zero_count: z.clone().sum::<f64>() / t as f64,
        mean_zero_count_squared: z.map(|x| x * x).sum::<f64>() / t as f64,
    }
}

fn pool(parallelism: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::Param(format!("cannot start worker pool: {e}")))
}

/// `trials` independent runs on uniform lists; trial `t` uses stream `t`
/// of `seed`. `parallelism = 0` uses one worker per core.
pub fn run_trials(params: &ProblemParams, trials: u64, seed: u64, parallelism: usize) -> Result<TrialSummary> {
    run_trials_with(params, trials, seed, parallelism, &|p, s, t| generate_lists_stream(p, s, t))
}

/// As [`run_trials`] with a custom list source `gen(params, seed, trial)`.
pub fn run_trials_with(
    params: &ProblemParams,
    trials: u64,
    seed: u64,
    parallelism: usize,
    gen: &(dyn Fn(&ProblemParams, u64, u64) -> Result<InputLists> + Sync),
) -> Result<TrialSummary> {
    if trials == 0 {
        return param("trials must be at least 1");
    }
    // outcomes are collected in trial order, so the sums below do not
    // depend on scheduling
    let outcomes: Result<Vec<Outcome>> = pool(parallelism)?.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                let lists = gen(params, seed, t)?;
                run_ktree(params, &lists).map(|tr| Outcome::from(&tr))
            })
            .collect()
    });
    Ok(summarize(params, seed, &outcomes?))
}

/// What [`search_n`] drives to the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    ComputedLB,
    ComputedUB,
    /// Empirical success rate over this many trials per probe.
    Empirical(u64),
}

/// Options for [`search_n`].
#[derive(Debug, Clone)]
pub struct SearchOptions {
    pub mode: Mode,
    pub precision_bits: u32,
    /// Upper end of the search; default `2^16 * ceil(1/p)`.
    pub n_max: Option<BigUint>,
    pub seed: u64,
    pub parallelism: usize,
}

impl SearchOptions {
    pub fn new(mode: Mode, precision_bits: u32) -> SearchOptions {
        SearchOptions {
            mode,
            precision_bits,
            n_max: None,
            seed: 0,
            parallelism: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchResult {
    pub n: String,
    pub c: f64,
    /// Criterion value at `n`.
    pub value: f64,
    /// Confidence radius of `value` for the empirical criterion.
    pub ci_radius_99: Option<f64>,
    /// Criterion value at `n - 1`, when `n > 1`.
    pub value_below: Option<f64>,
    pub probes: u64,
    #[serde(skip)]
    pub n_exact: BigUint,
}

fn default_n_max(bp: &BoundParams) -> BigUint {
    let inv_p = bp.p().recip().to_prec(64, Round::Up).floor();
    let ceil = inv_p.to_biguint().unwrap_or_default() + 1u32;
    ceil << 16u32
}

struct Probe<'a> {
    bp: &'a BoundParams,
    criterion: Criterion,
    opts: &'a SearchOptions,
    target: PrecReal,
    count: u64,
    best: Option<(BigUint, f64)>,
}

impl Probe<'_> {
    /// Criterion value at `n` and whether it reaches the target.
    fn eval(&mut self, n: &BigUint) -> Result<(f64, bool, Option<f64>)> {
        let probe = self.count;
        self.count += 1;
        let (value, ci) = match self.criterion {
            Criterion::ComputedLB | Criterion::ComputedUB => {
                let pair = prob_bounds(self.bp, n)?;
                let v = if self.criterion == Criterion::ComputedLB { pair.lower } else { pair.upper };
                let hit = v >= self.target;
                let f = v.to_f64();
                self.note(n, f);
                return Ok((f, hit, None));
            }
            Criterion::Empirical(trials) => {
                let pp = ProblemParams::with_precision(
                    self.bp.m().clone(),
                    self.bp.k(),
                    n.clone(),
                    self.opts.mode,
                    self.opts.precision_bits,
                )?;
                let s = run_trials(&pp, trials, derive_seed(self.opts.seed, probe), self.opts.parallelism)?;
                (s.success_rate, Some(s.ci_radius_99))
            }
        };
        self.note(n, value);
        let hit = PrecReal::from_f64(value, 64) >= self.target;
        Ok((value, hit, ci))
    }

    fn note(&mut self, n: &BigUint, v: f64) {
        if self.best.as_ref().is_none_or(|(_, b)| v > *b) {
            self.best = Some((n.clone(), v));
        }
    }
}

/// Smallest `n` whose criterion value reaches `target`, assuming the
/// criterion is nondecreasing in `n`: doubling from 1, then bisection.
pub fn search_n(m: &BigUint, k: u64, target: f64, criterion: Criterion, opts: &SearchOptions) -> Result<SearchResult> {
    if !(target > 0.0 && target < 1.0) {
        return param(format!("target must lie in (0, 1), got {target}"));
    }
    if let Criterion::Empirical(0) = criterion {
        return param("trials must be at least 1");
    }
    let bp = BoundParams::new(m, k, opts.mode, opts.precision_bits)?;
    let n_max = opts.n_max.clone().unwrap_or_else(|| default_n_max(&bp));
    let mut probe = Probe {
        bp: &bp,
        criterion,
        opts,
        target: PrecReal::from_f64(target, 64),
        count: 0,
        best: None,
    };
    let mut lo = BigUint::from(0u32); // largest n known to miss the target
    let mut hi = BigUint::one();
    let mut at_hi = probe.eval(&hi)?;
    while !at_hi.1 {
        if hi >= n_max {
            let (best_n, best_value) = probe.best.clone().unwrap();
            return Err(Error::UnreachableTarget {
                target,
                n_max,
                best_n,
                best_value,
            });
        }
        lo = hi.clone();
        hi = (&hi << 1u32).min(n_max.clone());
        at_hi = probe.eval(&hi)?;
    }
    let mut below = None;
    while &hi - &lo > BigUint::one() {
        let mid: BigUint = (&lo + &hi) >> 1u32;
        let r = probe.eval(&mid)?;
        if r.1 {
            hi = mid;
            at_hi = r;
        } else {
            lo = mid;
            below = Some(r.0);
        }
    }
    if below.is_none() && hi > BigUint::one() {
        below = Some(probe.eval(&lo)?.0);
    }
    Ok(SearchResult {
        c: c_for_n(&bp, &hi),
        n: hi.to_string(),
        value: at_hi.0,
        ci_radius_99: at_hi.2,
        value_below: below,
        probes: probe.count,
        n_exact: hi,
    })
}

/// Grid of list sizes for a sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    /// `n = round(c/p)` for each `c`.
    C(Vec<f64>),
    N(Vec<BigUint>),
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub mode: Mode,
    pub precision_bits: u32,
    /// Trials per row; `None` skips the Monte Carlo runs.
    pub trials: Option<u64>,
    pub seed: u64,
    pub parallelism: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub n: String,
    pub c: f64,
    pub prob: BoundPairView,
    pub size: BoundPairView,
    pub analytic_prob: Option<BoundPairView>,
    pub analytic_size: Option<BoundPairView>,
    pub flags: HypothesisFlags,
    pub empirical: Option<TrialSummary>,
    #[serde(skip)]
    pub bounds: SweepBounds,
}

/// The bound pairs of a row at full precision.
#[derive(Debug, Clone)]
pub struct SweepBounds {
    pub prob: BoundPair,
    pub size: BoundPair,
    pub analytic_prob: Option<BoundPair>,
    pub analytic_size: Option<BoundPair>,
}

/// Bounds (and optionally trials) for each grid point.
///
/// Row `i` runs its trials from seed `derive_seed(seed, i)`.
pub fn sweep(m: &BigUint, k: u64, grid: &Grid, opts: &SweepOptions) -> Result<Vec<SweepRow>> {
    let bp = BoundParams::new(m, k, opts.mode, opts.precision_bits)?;
    let ns: Vec<BigUint> = match grid {
        Grid::C(cs) => cs.iter().map(|&c| n_for_c(&bp, c)).collect::<Result<_>>()?,
        Grid::N(ns) => ns.clone(),
    };
    if ns.is_empty() {
        return param("sweep grid is empty");
    }
    let mut rows = Vec::with_capacity(ns.len());
    for (i, n) in ns.iter().enumerate() {
        let report = bound_report(&bp, n)?;
        let empirical = match opts.trials {
            None => None,
            Some(t) => {
                let pp = ProblemParams::with_precision(m.clone(), k, n.clone(), opts.mode, opts.precision_bits)?;
                Some(run_trials(&pp, t, derive_seed(opts.seed, i as u64), opts.parallelism)?)
            }
        };
        rows.push(SweepRow {
            n: n.to_string(),
            c: c_for_n(&bp, n),
            prob: report.prob.view(),
            size: report.size.view(),
            analytic_prob: report.analytic_prob.as_ref().map(BoundPair::view),
            analytic_size: report.analytic_size.as_ref().map(BoundPair::view),
            flags: bp.flags(),
            empirical,
            bounds: SweepBounds {
                prob: report.prob,
                size: report.size,
                analytic_prob: report.analytic_prob,
                analytic_size: report.analytic_size,
            },
        });
    }
    Ok(rows)
}

/// Which complexity to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// Size upper bound at the least `n` whose probability lower bound
    /// reaches the target.
    Sufficient,
    /// Size lower bound at the least `n` whose probability upper bound
    /// reaches the target.
    Necessary,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexityRow {
    pub k: u64,
    pub unreachable: bool,
    pub n: Option<String>,
    pub c: Option<f64>,
    /// The reported size bound, rounded outward.
    pub complexity: Option<String>,
    pub log2_complexity: Option<f64>,
    /// Best criterion value seen when the target was not reached.
    pub best_value: Option<f64>,
    pub flags: HypothesisFlags,
}

/// One row per `k` of the list-size complexity reaching `target`.
pub fn complexity_at_target(m: &BigUint, ks: &[u64], target: f64, side: Side, opts: &SearchOptions) -> Result<Vec<ComplexityRow>> {
    let criterion = match side {
        Side::Sufficient => Criterion::ComputedLB,
        Side::Necessary => Criterion::ComputedUB,
    };
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let bp = BoundParams::new(m, k, opts.mode, opts.precision_bits)?;
        let row = match search_n(m, k, target, criterion, opts) {
            Ok(found) => {
                let size = size_bounds(&bp, &found.n_exact)?;
                let (v, round) = match side {
                    Side::Sufficient => (size.upper, Round::Up),
                    Side::Necessary => (size.lower, Round::Down),
                };
                ComplexityRow {
                    k,
                    unreachable: false,
                    n: Some(found.n.clone()),
                    c: Some(found.c),
                    complexity: Some(v.to_decimal(crate::bounds::OUTPUT_DIGITS, round)),
                    log2_complexity: Some(v.log2()),
                    best_value: None,
                    flags: bp.flags(),
                }
            }
            Err(Error::UnreachableTarget { best_value, .. }) => ComplexityRow {
                k,
                unreachable: true,
                n: None,
                c: None,
                complexity: None,
                log2_complexity: None,
                best_value: Some(best_value),
                flags: bp.flags(),
            },
            Err(e) => return Err(e),
        };
        rows.push(row);
    }
    Ok(rows)
}
