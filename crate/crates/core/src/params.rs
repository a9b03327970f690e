//! Problem parameters, the filter parameter `p`, per-level ranges and the
//! hypothesis flags of the closed-form theorem.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Error, Result};
use crate::precreal::{PrecReal, Round};
use crate::radical::Radical;

/// Working precision used when none is configured.
pub const DEFAULT_PRECISION_BITS: u32 = 192;

/// Environment variable that overrides [`DEFAULT_PRECISION_BITS`].
pub const PRECISION_ENV: &str = "KTREE_PRECISION_BITS";

/// Precision from `KTREE_PRECISION_BITS`, or the default.
pub fn precision_from_env() -> Result<u32> {
    match std::env::var(PRECISION_ENV) {
        Ok(v) => match v.trim().parse::<u32>() {
            Ok(b) if b >= 32 => Ok(b),
            _ => param(format!("{PRECISION_ENV} must be an integer >= 32, got {v:?}")),
        },
        Err(_) => Ok(DEFAULT_PRECISION_BITS),
    }
}

/// How two elements are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Mode {
    /// Plain integer addition.
    #[default]
    #[serde(rename = "int")]
    IntegerSum,
    /// Addition in `Z_m` with the result reduced into `[-(m-1)/2, (m-1)/2]`.
    #[serde(rename = "zm")]
    CenteredModSum,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::IntegerSum => "int",
            Mode::CenteredModSum => "zm",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Mode> {
        match s {
            "int" | "integer" => Ok(Mode::IntegerSum),
            "zm" | "mod" => Ok(Mode::CenteredModSum),
            _ => param(format!("unknown mode {s:?} (expected int or zm)")),
        }
    }
}

/// `log2 k` for a power of two `k >= 2`.
pub fn levels(k: u64) -> Result<u32> {
    if k < 2 || !k.is_power_of_two() {
        return param(format!("k must be a power of 2 and at least 2, got {k}"));
    }
    Ok(k.trailing_zeros())
}

fn check_m(m: &BigUint) -> Result<()> {
    if *m < BigUint::from(3u32) {
        return param(format!("m must be at least 3, got {m}"));
    }
    Ok(())
}

/// Check that `m` suits the mode.
pub fn check_mode(m: &BigUint, mode: Mode) -> Result<()> {
    check_m(m)?;
    if mode == Mode::CenteredModSum && !m.bit(0) {
        return param(format!("m must be odd in zm mode, got {m}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProblemParams {
    pub m: BigUint,
    pub k: u64,
    pub n: BigUint,
    pub mode: Mode,
    pub precision_bits: u32,
}

impl ProblemParams {
    pub fn new(m: BigUint, k: u64, n: BigUint, mode: Mode) -> Result<ProblemParams> {
        ProblemParams::with_precision(m, k, n, mode, DEFAULT_PRECISION_BITS)
    }

    pub fn with_precision(
        m: BigUint,
        k: u64,
        n: BigUint,
        mode: Mode,
        precision_bits: u32,
    ) -> Result<ProblemParams> {
        levels(k)?;
        check_mode(&m, mode)?;
        if n.is_zero() {
            return param("n must be at least 1");
        }
        if precision_bits < 32 {
            return param(format!("precision must be at least 32 bits, got {precision_bits}"));
        }
        Ok(ProblemParams {
            m,
            k,
            n,
            mode,
            precision_bits,
        })
    }

    pub fn levels(&self) -> u32 {
        self.k.trailing_zeros()
    }

    pub fn p(&self) -> Radical {
        filter_param_exact(&self.m, self.levels())
    }

    /// `tau_d = floor(m p^d / 2)`, the level-`d` filter threshold.
    pub fn threshold(&self, d: u32) -> BigUint {
        threshold(&self.m, self.levels(), d)
    }

    /// `c = n p`.
    pub fn c(&self) -> f64 {
        let p = self.p().to_prec(64, Round::Nearest);
        PrecReal::from_biguint(&self.n, 64, Round::Nearest)
            .mul(&p, Round::Nearest)
            .to_f64()
    }
}

/// `p = m^(-1/(levels+1))` as an exact radical.
pub fn filter_param_exact(m: &BigUint, levels: u32) -> Radical {
    Radical::new(
        BigRational::new(BigInt::one(), BigInt::from(m.clone())),
        levels + 1,
    )
}

/// `p = m^(-1/(log2 k + 1))` to `prec` bits, rounded in `round`.
pub fn filter_param(m: &BigUint, k: u64, prec: u32, round: Round) -> Result<PrecReal> {
    let l = levels(k)?;
    check_m(m)?;
    Ok(filter_param_exact(m, l).to_prec(prec, round))
}

/// `s_d = m p^d` for `p = m^(-1/(levels+1))`, exactly.
///
/// This is `(m^(levels+1-d))^(1/(levels+1))`.
pub fn level_range_exact(m: &BigUint, levels: u32, d: u32) -> Radical {
    assert!(d <= levels + 1, "level {d} beyond {levels}");
    let r = BigInt::from(m.clone()).pow(levels + 1 - d);
    Radical::new(BigRational::from_integer(r), levels + 1)
}

/// `m p^d` for an arbitrary `p`.
pub fn level_range(m: &BigUint, p: &Radical, d: u32) -> Radical {
    Radical::from_integer(m).mul(&p.pow(d))
}

/// `|<s>| = 2 floor(s/2) + 1`.
pub fn range_cardinality(s: &Radical) -> Result<BigUint> {
    if s.cmp_integer(1).is_lt() {
        return domain(format!("range size must be at least 1, got {s}"));
    }
    Ok(s.floor_half() * 2u32 + 1u32)
}

/// `floor(m p^d / 2)` with `p = m^(-1/(levels+1))`.
pub fn threshold(m: &BigUint, levels: u32, d: u32) -> BigUint {
    level_range_exact(m, levels, d).floor_half()
}

/// Which hypotheses of the closed-form bounds hold for `(m, k)`.
///
/// A flag is true only when the inequality holds exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct HypothesisFlags {
    #[serde(rename = "kGe4")]
    pub k_ge4: bool,
    /// `m > 30^(log k + 1)`
    #[serde(rename = "mGt30Pow")]
    pub m_gt30_pow: bool,
    #[serde(rename = "pLt1over30")]
    pub p_lt1over30: bool,
    /// `m p^(log k) > 30`
    #[serde(rename = "mpLogKGt30")]
    pub mp_logk_gt30: bool,
    #[serde(rename = "mGt7k")]
    pub m_gt7k: bool,
    /// `p k > (7/m)^(k/2 - 1)`
    #[serde(rename = "pkCond")]
    pub pk_cond: bool,
}

impl HypothesisFlags {
    pub fn all(&self) -> bool {
        self.k_ge4 && self.m_gt30_pow && self.p_lt1over30 && self.mp_logk_gt30 && self.m_gt7k && self.pk_cond
    }
}

/// Hypothesis flags for `(m, k)` with `p = m^(-1/(log k + 1))`.
pub fn hypothesis_check(m: &BigUint, k: u64) -> Result<HypothesisFlags> {
    let l = levels(k)?;
    check_m(m)?;
    hypothesis_check_with(m, k, &filter_param_exact(m, l))
}

/// Hypothesis flags for an arbitrary filter parameter `p`.
pub fn hypothesis_check_with(m: &BigUint, k: u64, p: &Radical) -> Result<HypothesisFlags> {
    let l = levels(k)?;
    let mq = BigRational::from_integer(BigInt::from(m.clone()));
    let thirty = BigRational::from_integer(30.into());
    let m_gt30_pow = *m > BigUint::from(30u32).pow(l + 1);
    let p_lt1over30 = p.cmp_rational(&thirty.recip()).is_lt();
    let mp_logk_gt30 = level_range(m, p, l).cmp_rational(&thirty).is_gt();
    let m_gt7k = *m > BigUint::from(7u32) * k;
    // p k > (7/m)^(k/2-1): raise both sides to the radical's index
    let pk = p.mul_rational(&BigRational::from_integer(k.into()));
    let e = (k / 2 - 1) as u32;
    let rhs = Pow::pow(&(BigRational::from_integer(7.into()) / &mq), e);
    let pk_cond = pk.cmp_rational(&rhs).is_gt();
    Ok(HypothesisFlags {
        k_ge4: k >= 4,
        m_gt30_pow,
        p_lt1over30,
        mp_logk_gt30,
        m_gt7k,
        pk_cond,
    })
}

/// Parse a modulus written in decimal, as `2^b`, or as `2^b+c` / `2^b-c`.
pub fn parse_modulus(s: &str) -> Result<BigUint> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Param(format!("cannot parse m from {s:?}"));
    let v = if let Some(rest) = t.strip_prefix("2^") {
        let split = rest.find(['+', '-']);
        let (b, off) = match split {
            Some(i) => (&rest[..i], Some(&rest[i..])),
            None => (rest, None),
        };
        let b: u32 = b.parse().map_err(|_| bad())?;
        let base = BigInt::one() << b;
        let v = match off {
            None => base,
            Some(o) => {
                let c: BigInt = o[1..].parse().map_err(|_| bad())?;
                if o.starts_with('+') {
                    base + c
                } else {
                    base - c
                }
            }
        };
        v.to_biguint().ok_or_else(bad)?
    } else {
        t.parse::<BigUint>().map_err(|_| bad())?
    };
    check_m(&v)?;
    Ok(v)
}

/// `Some(b)` when `m = 2^b`.
pub fn exact_log2(m: &BigUint) -> Option<u64> {
    let b = m.bits();
    if b > 0 && m.trailing_zeros() == Some(b - 1) {
        Some(b - 1)
    } else {
        None
    }
}

/// Render `m` as `2^b` when exact, else in decimal.
pub fn format_modulus(m: &BigUint) -> String {
    match exact_log2(m) {
        Some(b) => format!("2^{b}"),
        None => m.to_string(),
    }
}

/// `n` as a machine integer, for code that materialises lists.
pub fn n_as_usize(n: &BigUint) -> Result<usize> {
    n.to_usize()
        .ok_or_else(|| Error::Param(format!("n = {n} is too large to materialise")))
}
