//! Provable bounds on the zero count `C`, the success probability and the
//! expected total list size of the k-Tree algorithm, plus the closed-form
//! bounds of the main theorem.
//!
//! Every factor entering an upper bound is rounded up and every factor
//! entering a lower bound is rounded down, so floating error can only loosen
//! a bound, never invalidate it.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{param, Result};
use crate::exactprob::{
    mr_dist_from_pair_unif, mr_dist_from_unif, prob_sum_in_range, prob_sum_mod_in_range,
    prob_sum_with_two_rv_in_range, RangeSpec,
};
use crate::params::{
    check_mode, filter_param_exact, hypothesis_check, level_range_exact, levels, HypothesisFlags,
    Mode, ProblemParams,
};
use crate::precreal::{PrecReal, Round};
use crate::radical::Radical;

/// A lower and an upper bound, with the hypothesis flags of the instance.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPair {
    pub lower: PrecReal,
    pub upper: PrecReal,
    pub flags: HypothesisFlags,
}

impl BoundPair {
    /// Whether `x` lies in `[lower, upper]`.
    pub fn contains(&self, x: &PrecReal) -> bool {
        self.lower <= *x && *x <= self.upper
    }

    /// Whether the exact rational `q` lies in `[lower, upper]`.
    pub fn contains_rational(&self, q: &BigRational) -> bool {
        self.lower.to_rational() <= *q && *q <= self.upper.to_rational()
    }

    /// `upper / lower` rounded up (infinite for `lower = 0`).
    pub fn ratio(&self) -> f64 {
        if self.lower.is_zero() {
            return f64::INFINITY;
        }
        self.upper.div(&self.lower, Round::Up).to_f64()
    }
}

/// Bounds on the first two moments of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub first_moment: BoundPair,
    pub second_moment_ub: PrecReal,
}

/// A rational converted in both directions.
#[derive(Debug, Clone, PartialEq)]
struct Bracket {
    lo: PrecReal,
    hi: PrecReal,
}

impl Bracket {
    fn of(q: &BigRational, prec: u32) -> Bracket {
        Bracket {
            lo: PrecReal::from_rational(q, prec, Round::Down),
            hi: PrecReal::from_rational(q, prec, Round::Up),
        }
    }

    fn one(prec: u32) -> Bracket {
        Bracket {
            lo: PrecReal::one(prec),
            hi: PrecReal::one(prec),
        }
    }
}

/// Per-level primitives at `s_d = m p^d`.
#[derive(Debug, Clone)]
struct Level {
    /// `Pr[x + y in <s p>]`, or the centred-mod version at level 0 in `Z_m` mode.
    pass: Bracket,
    /// Max-ratio distance of the conditioned sum from uniform.
    mr: Bracket,
    /// `Pr[w + x, w + y both in <s p>]`.
    pass_pair: Bracket,
    /// Max-ratio distance of the conditioned pair from uniform.
    mr_pair: Bracket,
}

/// Everything about `(m, k, p, mode)` that does not depend on `n`.
///
/// Building one evaluates all exact primitives once; each bound for a given
/// `n` is then a handful of directed multiplications.
#[derive(Debug, Clone)]
pub struct BoundParams {
    m: BigUint,
    k: u64,
    levels: u32,
    mode: Mode,
    prec: u32,
    p: Radical,
    flags: HypothesisFlags,
    levels_data: Vec<Level>,
    /// `2 floor(m p^L / 2) + 1`.
    root_cardinality: BigUint,
    /// Product of the first-moment induction factors over all levels.
    fm_factor: (PrecReal, PrecReal),
    /// `gamma_d` for `d = 1..=L` (index `d - 1`).
    size_gamma: Vec<(PrecReal, PrecReal)>,
}

impl BoundParams {
    pub fn new(m: &BigUint, k: u64, mode: Mode, precision_bits: u32) -> Result<BoundParams> {
        let l = levels(k)?;
        check_mode(m, mode)?;
        if precision_bits < 32 {
            return param(format!("precision must be at least 32 bits, got {precision_bits}"));
        }
        let prec = precision_bits;
        let p = filter_param_exact(m, l);
        let flags = hypothesis_check(m, k)?;
        let mut levels_data = Vec::with_capacity(l as usize);
        for d in 0..l {
            let r = RangeSpec::new(level_range_exact(m, l, d))?;
            let zm_top = mode == Mode::CenteredModSum && d == 0;
            let lvl = if zm_top {
                // the centred sum of two uniforms mod m is uniform, so both
                // distances are 1 and the pair events are independent
                let a = prob_sum_mod_in_range(m, &p)?;
                Level {
                    pass: Bracket::of(&a, prec),
                    mr: Bracket::one(prec),
                    pass_pair: Bracket::of(&(&a * &a), prec),
                    mr_pair: Bracket::one(prec),
                }
            } else {
                Level {
                    pass: Bracket::of(&prob_sum_in_range(&r, &p)?, prec),
                    mr: Bracket::of(&mr_dist_from_unif(&r, &p)?, prec),
                    pass_pair: Bracket::of(&prob_sum_with_two_rv_in_range(&r, &p)?, prec),
                    mr_pair: Bracket::of(&mr_dist_from_pair_unif(&r, &p)?, prec),
                }
            };
            levels_data.push(lvl);
        }
        let root_cardinality = level_range_exact(m, l, l).floor_half() * 2u32 + 1u32;
        let mut bp = BoundParams {
            m: m.clone(),
            k,
            levels: l,
            mode,
            prec,
            p,
            flags,
            levels_data,
            root_cardinality,
            fm_factor: (PrecReal::one(prec), PrecReal::one(prec)),
            size_gamma: Vec::new(),
        };
        let mut lo = PrecReal::one(prec);
        let mut hi = PrecReal::one(prec);
        for d in 0..l {
            let (a, b) = bp.induct_factor(d, k >> (d + 1));
            lo = lo.mul(&a, Round::Down);
            hi = hi.mul(&b, Round::Up);
        }
        bp.fm_factor = (lo, hi);
        let mut gammas = Vec::with_capacity(l as usize);
        for d in 1..=l {
            let last = &bp.levels_data[(d - 1) as usize].pass;
            let (mut lo, mut hi) = (last.lo.clone(), last.hi.clone());
            for t in 0..d.saturating_sub(1) {
                let (a, b) = bp.induct_factor(t, 1u64 << (d - t - 1));
                lo = lo.mul(&a, Round::Down);
                hi = hi.mul(&b, Round::Up);
            }
            gammas.push((lo, hi));
        }
        bp.size_gamma = gammas;
        Ok(bp)
    }

    pub fn from_problem(pp: &ProblemParams) -> Result<BoundParams> {
        BoundParams::new(&pp.m, pp.k, pp.mode, pp.precision_bits)
    }

    pub fn m(&self) -> &BigUint {
        &self.m
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn p(&self) -> &Radical {
        &self.p
    }

    pub fn flags(&self) -> HypothesisFlags {
        self.flags
    }

    /// `(alpha / beta, alpha * beta)` with both raised to `e`, at level `d`.
    fn induct_factor(&self, d: u32, e: u64) -> (PrecReal, PrecReal) {
        let lvl = &self.levels_data[d as usize];
        let a_lo = lvl.pass.lo.pow(e, Round::Down);
        let a_hi = lvl.pass.hi.pow(e, Round::Up);
        let b_hi = lvl.mr.hi.pow(e, Round::Up);
        (a_lo.div(&b_hi, Round::Down), a_hi.mul(&b_hi, Round::Up))
    }

    fn pair(&self, lower: PrecReal, upper: PrecReal) -> BoundPair {
        debug_assert!(lower <= upper, "bound pair out of order: {lower:?} > {upper:?}");
        BoundPair {
            lower,
            upper,
            flags: self.flags,
        }
    }

    fn n_bracket(&self, n: &BigUint) -> (PrecReal, PrecReal) {
        (
            PrecReal::from_biguint(n, self.prec, Round::Down),
            PrecReal::from_biguint(n, self.prec, Round::Up),
        )
    }

    /// `p` rounded in both directions.
    pub fn p_bracket(&self) -> (PrecReal, PrecReal) {
        (self.p.to_prec(self.prec, Round::Down), self.p.to_prec(self.prec, Round::Up))
    }
}

/// The level-`d` induction factors: `alpha = Pr[pass]^(k/2^(d+1))` and
/// `beta = mr^(k/2^(d+1))`, returned as `(alpha/beta, alpha*beta)`.
pub fn first_moment_induct_factors(bp: &BoundParams, d: u32) -> Result<BoundPair> {
    if d >= bp.levels {
        return param(format!("level {d} out of range 0..{}", bp.levels));
    }
    let (lo, hi) = bp.induct_factor(d, bp.k >> (d + 1));
    Ok(bp.pair(lo, hi))
}

/// Bounds on `E[C]`, the expected number of zeros in the root list.
pub fn first_moment_bounds(bp: &BoundParams, n: &BigUint) -> Result<BoundPair> {
    check_n(n)?;
    let (n_lo, n_hi) = bp.n_bracket(n);
    let den = PrecReal::from_biguint(&bp.root_cardinality, bp.prec, Round::Up);
    let den_lo = PrecReal::from_biguint(&bp.root_cardinality, bp.prec, Round::Down);
    let base_lo = n_lo.pow(bp.k, Round::Down).div(&den, Round::Down);
    let base_hi = n_hi.pow(bp.k, Round::Up).div(&den_lo, Round::Up);
    Ok(bp.pair(
        base_lo.mul(&bp.fm_factor.0, Round::Down),
        base_hi.mul(&bp.fm_factor.1, Round::Up),
    ))
}

fn check_n(n: &BigUint) -> Result<()> {
    if n.is_zero() {
        return param("n must be at least 1");
    }
    Ok(())
}

/// Upper bound on `E[C^2]` for real-valued `n >= 0`.
pub fn second_moment_ub_real(bp: &BoundParams, n: &PrecReal) -> PrecReal {
    let up = Round::Up;
    let mut n = n.with_precision(bp.prec, up);
    for lvl in &bp.levels_data {
        let a = lvl.pass.hi.mul(&lvl.mr.hi, up);
        let b = lvl.pass_pair.hi.mul(&lvl.mr_pair.hi, up);
        let n3 = n.pow(3, up);
        let n4 = n3.mul(&n, up);
        let t1 = a.mul(&a, up).mul(&n4, up);
        let t2 = b.mul(&n3, up).mul(&PrecReal::from_u64(2, bp.prec), up);
        n = t1.add(&t2, up).sqrt(up);
    }
    second_moment_base(&bp.root_cardinality, &n, bp.prec)
}

/// `(n u)(n u + 1)` with `u = 1 / cardinality`: the second moment bound for a
/// single list, where `C` counts zeros among `n` uniform samples.
pub fn second_moment_base(cardinality: &BigUint, n: &PrecReal, prec: u32) -> PrecReal {
    let up = Round::Up;
    let card = PrecReal::from_biguint(cardinality, prec, Round::Down);
    let nu = n.with_precision(prec, up).div(&card, up);
    nu.mul(&nu.add(&PrecReal::one(prec), up), up)
}

/// Upper bound on `E[C^2]`.
pub fn second_moment_ub(bp: &BoundParams, n: &BigUint) -> Result<PrecReal> {
    check_n(n)?;
    Ok(second_moment_ub_real(bp, &bp.n_bracket(n).1))
}

pub fn moment_estimate(bp: &BoundParams, n: &BigUint) -> Result<MomentEstimate> {
    Ok(MomentEstimate {
        first_moment: first_moment_bounds(bp, n)?,
        second_moment_ub: second_moment_ub(bp, n)?,
    })
}

/// Bounds on the success probability `Pr[C >= 1]`.
///
/// The upper bound is Markov's `E[C]` clamped to 1; the lower bound is
/// Paley-Zygmund's `E[C]^2 / E[C^2]`.
pub fn prob_bounds(bp: &BoundParams, n: &BigUint) -> Result<BoundPair> {
    let fm = first_moment_bounds(bp, n)?;
    let sm = second_moment_ub(bp, n)?;
    let upper = fm.upper.min(PrecReal::one(bp.prec));
    let lower = fm.lower.mul(&fm.lower, Round::Down).div(&sm, Round::Down);
    Ok(bp.pair(lower, upper))
}

/// Bounds on the expected total size of all lists, inputs included.
pub fn size_bounds(bp: &BoundParams, n: &BigUint) -> Result<BoundPair> {
    check_n(n)?;
    let (n_lo, n_hi) = bp.n_bracket(n);
    let kn = BigUint::from(bp.k) * n;
    let mut lo = PrecReal::from_biguint(&kn, bp.prec, Round::Down);
    let mut hi = PrecReal::from_biguint(&kn, bp.prec, Round::Up);
    for d in 1..=bp.levels {
        let nodes = PrecReal::from_u64(bp.k >> d, bp.prec);
        let (g_lo, g_hi) = &bp.size_gamma[(d - 1) as usize];
        let e = 1u64 << d;
        let t_lo = nodes.mul(&n_lo.pow(e, Round::Down), Round::Down).mul(g_lo, Round::Down);
        let t_hi = nodes.mul(&n_hi.pow(e, Round::Up), Round::Up).mul(g_hi, Round::Up);
        lo = lo.add(&t_lo, Round::Down);
        hi = hi.add(&t_hi, Round::Up);
    }
    Ok(bp.pair(lo, hi))
}

fn require_k4(bp: &BoundParams) -> Result<()> {
    if bp.k < 4 {
        return param(format!("closed-form bounds need k >= 4, got {}", bp.k));
    }
    Ok(())
}

/// `c = p n` in both directions.
fn c_bracket(bp: &BoundParams, n: &BigUint) -> (PrecReal, PrecReal) {
    let (p_lo, p_hi) = bp.p_bracket();
    let (n_lo, n_hi) = bp.n_bracket(n);
    (p_lo.mul(&n_lo, Round::Down), p_hi.mul(&n_hi, Round::Up))
}

/// `1 + t p` rounded in `round` (with `p` taken from the matching side),
/// clamped at 0.
fn one_plus(bp: &BoundParams, t: i64, round: Round) -> PrecReal {
    let (p_lo, p_hi) = bp.p_bracket();
    // the product t p grows with p for t > 0 and shrinks for t < 0
    let p = match (round, t >= 0) {
        (Round::Down, true) | (Round::Up, false) => p_lo,
        _ => p_hi,
    };
    let tp = PrecReal::from_bigint(&BigInt::from(t), bp.prec, Round::Nearest).mul(&p, round);
    PrecReal::one(bp.prec).add(&tp, round).max(PrecReal::zero(bp.prec))
}

/// Closed-form success-probability bounds with `c = p n`:
/// `LB = (1 - 150p)^k / (c^-k + (1 + k/n)^k)` and `UB = c^k (1 + 37p)^k`,
/// clamped to `[0, 1]`.
pub fn analytic_prob_bounds(bp: &BoundParams, n: &BigUint) -> Result<BoundPair> {
    require_k4(bp)?;
    check_n(n)?;
    let prec = bp.prec;
    let (c_lo, c_hi) = c_bracket(bp, n);
    let k = bp.k;
    let inv_ck = c_lo.pow(k, Round::Down).recip(Round::Up);
    let kn = PrecReal::from_rational(
        &BigRational::new(BigInt::from(k), BigInt::from(n.clone())),
        prec,
        Round::Up,
    );
    let growth = PrecReal::one(prec).add(&kn, Round::Up).pow(k, Round::Up);
    let pre = inv_ck.add(&growth, Round::Up).recip(Round::Down);
    let shrink = one_plus(bp, -150, Round::Down).pow(k, Round::Down);
    let lower = pre.mul(&shrink, Round::Down);
    let upper = c_hi
        .pow(k, Round::Up)
        .mul(&one_plus(bp, 37, Round::Up).pow(k, Round::Up), Round::Up)
        .min(PrecReal::one(prec));
    Ok(bp.pair(lower.min(upper.clone()), upper))
}

/// Closed-form expected-size bounds
/// `k n (1 + sum_{d=1..L} c^(2^d - 1) / 2^d) (1 -+ 37p)^(k-1)`.
pub fn analytic_size_bounds(bp: &BoundParams, n: &BigUint) -> Result<BoundPair> {
    require_k4(bp)?;
    check_n(n)?;
    let prec = bp.prec;
    let (c_lo, c_hi) = c_bracket(bp, n);
    let mut s_lo = PrecReal::one(prec);
    let mut s_hi = PrecReal::one(prec);
    for d in 1..=bp.levels {
        let e = (1u64 << d) - 1;
        let two_d = PrecReal::from_u64(1 << d, prec);
        s_lo = s_lo.add(&c_lo.pow(e, Round::Down).div(&two_d, Round::Down), Round::Down);
        s_hi = s_hi.add(&c_hi.pow(e, Round::Up).div(&two_d, Round::Up), Round::Up);
    }
    let kn = BigUint::from(bp.k) * n;
    let kn_lo = PrecReal::from_biguint(&kn, prec, Round::Down);
    let kn_hi = PrecReal::from_biguint(&kn, prec, Round::Up);
    let lower = kn_lo
        .mul(&s_lo, Round::Down)
        .mul(&one_plus(bp, -37, Round::Down).pow(bp.k - 1, Round::Down), Round::Down);
    let upper = kn_hi
        .mul(&s_hi, Round::Up)
        .mul(&one_plus(bp, 37, Round::Up).pow(bp.k - 1, Round::Up), Round::Up);
    Ok(bp.pair(lower, upper))
}

/// Probability and size bounds for the `Z_m` variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ZmBounds {
    pub prob: BoundPair,
    pub size: BoundPair,
}

/// Full pipeline in `Z_m` mode; `m` must be odd.
pub fn zm_bounds(m: &BigUint, k: u64, n: &BigUint, precision_bits: u32) -> Result<ZmBounds> {
    let bp = BoundParams::new(m, k, Mode::CenteredModSum, precision_bits)?;
    Ok(ZmBounds {
        prob: prob_bounds(&bp, n)?,
        size: size_bounds(&bp, n)?,
    })
}

/// All bounds for one `n`, as reported by the command-line tool.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub moments: MomentEstimate,
    pub prob: BoundPair,
    pub size: BoundPair,
    pub analytic_prob: Option<BoundPair>,
    pub analytic_size: Option<BoundPair>,
}

/// Computed bounds, plus the closed forms when `k >= 4`.
pub fn bound_report(bp: &BoundParams, n: &BigUint) -> Result<BoundReport> {
    let (analytic_prob, analytic_size) = if bp.k >= 4 {
        (Some(analytic_prob_bounds(bp, n)?), Some(analytic_size_bounds(bp, n)?))
    } else {
        (None, None)
    };
    Ok(BoundReport {
        moments: moment_estimate(bp, n)?,
        prob: prob_bounds(bp, n)?,
        size: size_bounds(bp, n)?,
        analytic_prob,
        analytic_size,
    })
}

/// `n = round(c / p)`, at least 1.
pub fn n_for_c(bp: &BoundParams, c: f64) -> Result<BigUint> {
    if !(c.is_finite() && c > 0.0) {
        return param(format!("c must be positive, got {c}"));
    }
    let inv_p = bp.p.recip().to_prec(bp.prec, Round::Nearest);
    let n = inv_p
        .mul(&PrecReal::from_f64(c, bp.prec), Round::Nearest)
        .round_to_integer();
    let n = n.to_biguint().unwrap_or_default();
    Ok(if n.is_zero() { BigUint::one() } else { n })
}

/// `c = p n` to nearest.
pub fn c_for_n(bp: &BoundParams, n: &BigUint) -> f64 {
    bp.p.to_prec(bp.prec, Round::Nearest)
        .mul(&PrecReal::from_biguint(n, bp.prec, Round::Nearest), Round::Nearest)
        .to_f64()
}

/// Serializable view of a bound pair: decimal strings with their rounding
/// direction, plus base-2 logarithms for values beyond `f64` range.
#[derive(Debug, Clone, Serialize)]
pub struct BoundPairView {
    pub lower: String,
    pub upper: String,
    pub lower_rounding: &'static str,
    pub upper_rounding: &'static str,
    pub lower_log2: Option<f64>,
    pub upper_log2: Option<f64>,
}

/// Significant digits in serialized bounds.
pub const OUTPUT_DIGITS: u32 = 17;

impl BoundPair {
    pub fn view(&self) -> BoundPairView {
        let lg = |x: &PrecReal| if x.is_zero() { None } else { Some(x.log2()) };
        BoundPairView {
            lower: self.lower.to_decimal(OUTPUT_DIGITS, Round::Down),
            upper: self.upper.to_decimal(OUTPUT_DIGITS, Round::Up),
            lower_rounding: "down",
            upper_rounding: "up",
            lower_log2: lg(&self.lower),
            upper_log2: lg(&self.upper),
        }
    }
}
