//! Extended-precision binary floating point with directed rounding.
//!
//! A [`PrecReal`] is `mantissa * 2^exponent` with an arbitrary-size integer
//! mantissa of at most `prec` significant bits and an unbounded exponent, so
//! quantities like `n^k` for `k = 2^20` or `2^-3000` are representable
//! directly. Every operation takes a [`Round`] mode. With [`Round::Down`] the
//! result is never larger than the exact real result, with [`Round::Up`] it
//! is never smaller.
//!
//! All operations compute an exact intermediate (or an exact floor plus a
//! sticky "inexact" bit) and round once, so each result is the correctly
//! rounded value of the exact operation on its inputs.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Rounding direction of a single operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Round {
    /// Toward negative infinity.
    Down,
    /// Toward positive infinity.
    Up,
    /// To nearest, ties to even.
    Nearest,
}

impl Round {
    /// The opposite direction, used for divisors and subtrahends.
    pub fn flip(self) -> Round {
        match self {
            Round::Down => Round::Up,
            Round::Up => Round::Down,
            Round::Nearest => Round::Nearest,
        }
    }
}

#[derive(Clone)]
pub struct PrecReal {
    mant: BigInt,
    exp: i64,
    prec: u32,
}

/// Guard bits carried by intermediate quotients and roots before the final
/// rounding. Two suffice; three keeps the argument simple.
const GUARD: u64 = 3;

fn bits(x: &BigInt) -> u64 {
    x.bits()
}

/// Round `m / 2^shift` to an integer in the given direction.
fn shift_round(m: &BigInt, shift: u64, round: Round) -> BigInt {
    if shift == 0 {
        return m.clone();
    }
    let (sign, mag) = (m.sign(), m.magnitude());
    let q = mag >> shift;
    let tz = mag.trailing_zeros().unwrap_or(u64::MAX);
    let inexact = tz < shift;
    if !inexact {
        return BigInt::from_biguint(sign, q);
    }
    let negative = sign == Sign::Minus;
    let bump = match round {
        // floor of a negative number moves away from zero
        Round::Down => negative,
        Round::Up => !negative,
        Round::Nearest => {
            let half_bit = mag.bit(shift - 1);
            let below_half = tz < shift - 1;
            half_bit && (below_half || q.bit(0))
        }
    };
    let q = if bump { q + 1u32 } else { q };
    BigInt::from_biguint(if q.is_zero() { Sign::NoSign } else { sign }, q)
}

impl PrecReal {
    fn normalize(mant: BigInt, exp: i64, prec: u32, round: Round) -> PrecReal {
        if mant.is_zero() {
            return PrecReal::zero(prec);
        }
        let b = bits(&mant);
        let (mut mant, mut exp) = if b > prec as u64 {
            let shift = b - prec as u64;
            (shift_round(&mant, shift, round), exp + shift as i64)
        } else {
            (mant, exp)
        };
        // rounding up can carry into one extra bit; that value is a power of two
        if bits(&mant) > prec as u64 {
            mant >>= 1u32;
            exp += 1;
        }
        PrecReal { mant, exp, prec }
    }

    /// Exact value `(q + f) * 2^exp` with `0 <= f < 1` and `f > 0` iff `inexact`.
    /// Requires `q` to carry at least `prec + 2` bits when inexact.
    fn from_floor(q: BigInt, inexact: bool, exp: i64, prec: u32, round: Round) -> PrecReal {
        if !inexact {
            return PrecReal::normalize(q, exp, prec, round);
        }
        debug_assert!(bits(&q) >= prec as u64 + 2 || q.is_zero());
        let sticky: BigInt = (q << 1u32) + 1;
        PrecReal::normalize(sticky, exp - 1, prec, round)
    }

    pub fn zero(prec: u32) -> PrecReal {
        PrecReal {
            mant: BigInt::zero(),
            exp: 0,
            prec,
        }
    }

    pub fn one(prec: u32) -> PrecReal {
        PrecReal::from_u64(1, prec)
    }

    /// Exact for values below `2^prec`; otherwise rounded to nearest.
    pub fn from_u64(v: u64, prec: u32) -> PrecReal {
        PrecReal::from_bigint(&BigInt::from(v), prec, Round::Nearest)
    }

    pub fn from_bigint(v: &BigInt, prec: u32, round: Round) -> PrecReal {
        PrecReal::normalize(v.clone(), 0, prec, round)
    }

    pub fn from_biguint(v: &BigUint, prec: u32, round: Round) -> PrecReal {
        PrecReal::from_bigint(&BigInt::from(v.clone()), prec, round)
    }

    pub fn from_rational(q: &BigRational, prec: u32, round: Round) -> PrecReal {
        let (num, den) = (q.numer(), q.denom());
        if num.is_zero() {
            return PrecReal::zero(prec);
        }
        // quotient needs at least prec + 2 bits
        let s = prec as i64 + GUARD as i64 + bits(den) as i64 - bits(num) as i64;
        let (a, d) = if s >= 0 {
            (num << s as u64, den.clone())
        } else {
            (num.clone(), den << (-s) as u64)
        };
        let (quot, rem) = a.div_mod_floor(&d);
        PrecReal::from_floor(quot, !rem.is_zero(), -s, prec, round)
    }

    /// Nearest binary approximation of an `f64`; exact when `prec >= 53`.
    pub fn from_f64(v: f64, prec: u32) -> PrecReal {
        match BigRational::from_float(v) {
            Some(q) => PrecReal::from_rational(&q, prec, Round::Nearest),
            None => panic!("non-finite f64 {v}"),
        }
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub fn with_precision(&self, prec: u32, round: Round) -> PrecReal {
        PrecReal::normalize(self.mant.clone(), self.exp, prec, round)
    }

    pub fn is_zero(&self) -> bool {
        self.mant.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mant.is_negative()
    }

    /// Exact rational value.
    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.mant << self.exp as u64)
        } else {
            BigRational::new(self.mant.clone(), BigInt::one() << (-self.exp) as u64)
        }
    }

    /// Position one past the most significant bit: `|x|` lies in `[2^(top-1), 2^top)`.
    fn top(&self) -> i64 {
        self.exp + bits(&self.mant) as i64
    }

    fn out_prec(&self, other: &PrecReal) -> u32 {
        self.prec.max(other.prec)
    }

    pub fn neg(&self) -> PrecReal {
        PrecReal {
            mant: -self.mant.clone(),
            exp: self.exp,
            prec: self.prec,
        }
    }

    pub fn abs(&self) -> PrecReal {
        PrecReal {
            mant: self.mant.abs(),
            exp: self.exp,
            prec: self.prec,
        }
    }

    pub fn add(&self, other: &PrecReal, round: Round) -> PrecReal {
        let prec = self.out_prec(other);
        if self.is_zero() {
            return other.with_precision(prec, round);
        }
        if other.is_zero() {
            return self.with_precision(prec, round);
        }
        let (big, small) = if self.top() >= other.top() {
            (self, other)
        } else {
            (other, self)
        };
        // A far smaller addend only decides the direction of the rounding;
        // replace it by a tiny stand-in of the same sign below a quarter ulp.
        let far = prec as i64 + GUARD as i64 + 1;
        let small_adj;
        let small = if big.top() - small.top() > far {
            small_adj = PrecReal {
                mant: if small.is_negative() {
                    -BigInt::one()
                } else {
                    BigInt::one()
                },
                exp: big.top() - far,
                prec,
            };
            &small_adj
        } else {
            small
        };
        let e = big.exp.min(small.exp);
        let a = &big.mant << (big.exp - e) as u64;
        let b = &small.mant << (small.exp - e) as u64;
        PrecReal::normalize(a + b, e, prec, round)
    }

    pub fn sub(&self, other: &PrecReal, round: Round) -> PrecReal {
        self.add(&other.neg(), round)
    }

    pub fn mul(&self, other: &PrecReal, round: Round) -> PrecReal {
        let prec = self.out_prec(other);
        PrecReal::normalize(&self.mant * &other.mant, self.exp + other.exp, prec, round)
    }

    /// # Panics
    /// On division by zero.
    pub fn div(&self, other: &PrecReal, round: Round) -> PrecReal {
        assert!(!other.is_zero(), "PrecReal division by zero");
        let prec = self.out_prec(other);
        if self.is_zero() {
            return PrecReal::zero(prec);
        }
        let (mut a, mut b) = (self.mant.clone(), other.mant.clone());
        if b.is_negative() {
            a = -a;
            b = -b;
        }
        let s = prec as i64 + GUARD as i64 + bits(&b) as i64 - bits(&a) as i64;
        let (a, b) = if s >= 0 {
            (a << s as u64, b)
        } else {
            (a, b << (-s) as u64)
        };
        let (q, r) = a.div_mod_floor(&b);
        PrecReal::from_floor(q, !r.is_zero(), self.exp - other.exp - s, prec, round)
    }

    pub fn recip(&self, round: Round) -> PrecReal {
        PrecReal::one(self.prec).div(self, round)
    }

    /// Multiply by an exact rational.
    pub fn mul_rational(&self, q: &BigRational, round: Round) -> PrecReal {
        let num = PrecReal::from_bigint(q.numer(), self.prec + 64, Round::Nearest);
        if bits(q.numer()) <= (self.prec + 64) as u64 {
            let den = PrecReal::from_bigint(q.denom(), self.prec + 64, Round::Nearest);
            if bits(q.denom()) <= (self.prec + 64) as u64 {
                let exact = PrecReal {
                    mant: &self.mant * &num.mant,
                    exp: self.exp + num.exp,
                    prec: u32::MAX,
                };
                return exact.div(&den, round).with_precision(self.prec, round);
            }
        }
        // huge rational: go through the exact rational product
        PrecReal::from_rational(&(self.to_rational() * q), self.prec, round)
    }

    /// Square root of a nonnegative value.
    pub fn sqrt(&self, round: Round) -> PrecReal {
        self.nth_root(2, round)
    }

    /// Real `n`-th root of a nonnegative value.
    ///
    /// # Panics
    /// If the value is negative or `n == 0`.
    pub fn nth_root(&self, n: u32, round: Round) -> PrecReal {
        assert!(n >= 1, "zeroth root");
        assert!(!self.is_negative(), "root of a negative PrecReal");
        if self.is_zero() || n == 1 {
            return self.clone();
        }
        let n64 = n as i64;
        let adj = self.exp.rem_euclid(n64);
        let m = self.mant.magnitude() << adj as u64;
        let e = self.exp - adj;
        let want = self.prec as i64 + GUARD as i64;
        let t = (want - (m.bits() as i64) / n64 + 1).max(0);
        let m = m << (t * n64) as u64;
        let root = m.nth_root(n);
        let inexact = root.pow(n) != m;
        let e = (e - t * n64) / n64;
        PrecReal::from_floor(BigInt::from(root), inexact, e, self.prec, round)
    }

    /// Integer power of a nonnegative value by repeated squaring.
    ///
    /// Each step is rounded in `round`; since all operands are nonnegative the
    /// result still bounds the exact power from the requested side.
    pub fn pow(&self, mut e: u64, round: Round) -> PrecReal {
        assert!(
            !self.is_negative() || round == Round::Nearest,
            "directed pow of a negative base"
        );
        let mut acc = PrecReal::one(self.prec);
        let mut base = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base, round);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base, round);
            }
        }
        acc
    }

    /// Floor as an integer.
    pub fn floor(&self) -> BigInt {
        if self.exp >= 0 {
            &self.mant << self.exp as u64
        } else {
            shift_round(&self.mant, (-self.exp) as u64, Round::Down)
        }
    }

    /// Nearest integer (ties to even).
    pub fn round_to_integer(&self) -> BigInt {
        if self.exp >= 0 {
            &self.mant << self.exp as u64
        } else {
            shift_round(&self.mant, (-self.exp) as u64, Round::Nearest)
        }
    }

    /// Nearest `f64`; saturates to infinity or zero outside the `f64` range.
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let b = bits(&self.mant);
        let drop = b.saturating_sub(64);
        let top = shift_round(&self.mant, drop, Round::Nearest).to_f64().unwrap_or(0.0);
        let e = self.exp + drop as i64;
        scale_f64(top, e)
    }

    /// Approximate base-2 logarithm (`-inf` for zero).
    ///
    /// # Panics
    /// On negative values.
    pub fn log2(&self) -> f64 {
        assert!(!self.is_negative(), "log2 of a negative PrecReal");
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        let b = bits(&self.mant);
        let drop = b.saturating_sub(60);
        let top = (self.mant.magnitude() >> drop).to_f64().unwrap_or(1.0);
        top.log2() + (self.exp + drop as i64) as f64
    }

    /// Decimal scientific notation with `digits` significant digits, rounded
    /// in `round`. The string parses back (see [`PrecReal::parse_decimal`])
    /// to a value on the requested side of `self`.
    pub fn to_decimal(&self, digits: u32, round: Round) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let digits = digits.max(1);
        let sign = if self.is_negative() { "-" } else { "" };
        // directed rounding of |x| flips for negatives
        let mag_round = if self.is_negative() { round.flip() } else { round };
        let x = self.to_rational().abs();
        let est = (self.log2() * std::f64::consts::LOG10_2).floor() as i64;
        let mut q = est - digits as i64 + 1;
        let ten = BigInt::from(10u32);
        let mut d;
        loop {
            let scaled = if q >= 0 {
                &x / BigRational::from_integer(ten.pow(q as u32))
            } else {
                &x * BigRational::from_integer(ten.pow((-q) as u32))
            };
            d = match mag_round {
                Round::Down => scaled.floor().to_integer(),
                Round::Up => scaled.ceil().to_integer(),
                Round::Nearest => scaled.round().to_integer(),
            };
            let nd = d.to_string().len() as i64;
            if nd > digits as i64 {
                q += 1;
            } else if nd < digits as i64 {
                q -= 1;
            } else {
                break;
            }
        }
        let s = d.to_string();
        let exp10 = q + digits as i64 - 1;
        let (head, tail) = s.split_at(1);
        let tail = tail.trim_end_matches('0');
        if tail.is_empty() {
            format!("{sign}{head}e{exp10}")
        } else {
            format!("{sign}{head}.{tail}e{exp10}")
        }
    }

    /// Parse a decimal literal like `-1.25e-7` exactly, then round.
    pub fn parse_decimal(s: &str, prec: u32, round: Round) -> Option<PrecReal> {
        parse_decimal_rational(s).map(|q| PrecReal::from_rational(&q, prec, round))
    }
}

/// Exact rational value of a decimal literal (`12`, `0.35`, `-1.2e-5`).
pub fn parse_decimal_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    let (neg, s) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp10) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().ok()?),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.find('.') {
        Some(i) => (&mantissa[..i], &mantissa[i + 1..]),
        None => (mantissa, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = digits.parse().ok()?;
    let e = exp10 - frac_part.len() as i64;
    let ten = BigInt::from(10u32);
    let mut q = if e >= 0 {
        BigRational::from_integer(n * ten.pow(e as u32))
    } else {
        BigRational::new(n, ten.pow((-e) as u32))
    };
    if neg {
        q = -q;
    }
    Some(q)
}

fn scale_f64(mut v: f64, mut e: i64) -> f64 {
    // step through the exponent so intermediate powers stay finite
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return v;
        }
    }
    v * 2f64.powi(e as i32)
}

impl PartialEq for PrecReal {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for PrecReal {}

impl PartialOrd for PrecReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PrecReal {
    fn cmp(&self, other: &Self) -> Ordering {
        let (sa, sb) = (self.mant.sign(), other.mant.sign());
        if sa != sb || sa == Sign::NoSign {
            return sa.cmp(&sb);
        }
        let mag = if self.top() != other.top() {
            self.top().cmp(&other.top())
        } else {
            let e = self.exp.min(other.exp);
            let a = self.mant.magnitude() << (self.exp - e) as u64;
            let b = other.mant.magnitude() << (other.exp - e) as u64;
            a.cmp(&b)
        };
        if sa == Sign::Minus {
            mag.reverse()
        } else {
            mag
        }
    }
}

impl fmt::Debug for PrecReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PrecReal({}, ~2^{:.3})", self.to_decimal(20, Round::Nearest), {
            if self.is_negative() {
                self.neg().log2()
            } else {
                self.log2()
            }
        })
    }
}

impl fmt::Display for PrecReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_decimal(20, Round::Nearest))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn one_third_brackets() {
        let lo = PrecReal::from_rational(&q(1, 3), 64, Round::Down);
        let hi = PrecReal::from_rational(&q(1, 3), 64, Round::Up);
        assert!(lo.to_rational() < q(1, 3));
        assert!(hi.to_rational() > q(1, 3));
        // adjacent representable values
        let gap = hi.to_rational() - lo.to_rational();
        assert_eq!(gap, BigRational::new(BigInt::one(), BigInt::one() << 65u32));
    }

    #[test]
    fn exact_values_do_not_move() {
        let x = PrecReal::from_rational(&q(3, 8), 10, Round::Up);
        assert_eq!(x.to_rational(), q(3, 8));
        let y = x.mul(&x, Round::Down);
        assert_eq!(y.to_rational(), q(9, 64));
        assert_eq!(PrecReal::from_u64(16, 8).sqrt(Round::Up).to_rational(), q(4, 1));
    }

    #[test]
    fn tiny_addend_decides_direction() {
        let one = PrecReal::one(32);
        let tiny = PrecReal::from_rational(&q(1, 1), 32, Round::Nearest)
            .mul(&PrecReal::from_u64(2, 32).pow(3000, Round::Nearest).recip(Round::Nearest), Round::Nearest);
        assert_eq!(one.add(&tiny, Round::Down), one);
        assert!(one.add(&tiny, Round::Up) > one);
        assert!(one.sub(&tiny, Round::Down) < one);
        assert_eq!(one.sub(&tiny, Round::Up), one);
    }

    #[test]
    fn huge_exponents() {
        let two = PrecReal::from_u64(2, 64);
        let big = two.pow(1 << 20, Round::Up);
        assert!((big.log2() - (1u64 << 20) as f64).abs() < 1e-9);
        let small = big.recip(Round::Down);
        assert!((small.log2() + (1u64 << 20) as f64).abs() < 1e-9);
        assert_eq!(small.to_f64(), 0.0);
    }

    #[test]
    fn decimal_output_is_directed() {
        let third_lo = PrecReal::from_rational(&q(1, 3), 128, Round::Down);
        assert_eq!(third_lo.to_decimal(5, Round::Down), "3.3333e-1");
        assert_eq!(third_lo.to_decimal(5, Round::Up), "3.3334e-1");
        assert_eq!(PrecReal::from_u64(1000, 64).to_decimal(5, Round::Up), "1e3");
        let back = PrecReal::parse_decimal("3.3334e-1", 128, Round::Nearest).unwrap();
        assert!(back > third_lo);
        assert_eq!(parse_decimal_rational("-2.5e-1"), Some(q(-1, 4)));
        assert_eq!(parse_decimal_rational("e5"), None);
    }

    #[test]
    fn floors_and_rounding() {
        let x = PrecReal::from_rational(&q(-7, 2), 64, Round::Nearest);
        assert_eq!(x.floor(), BigInt::from(-4));
        assert_eq!(x.round_to_integer(), BigInt::from(-4));
        let y = PrecReal::from_rational(&q(5, 2), 64, Round::Nearest);
        assert_eq!(y.round_to_integer(), BigInt::from(2));
    }

    #[derive(Debug, Clone)]
    enum Expr {
        Leaf(i64, i64),
        Add(Box<Expr>, Box<Expr>),
        Sub(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
    }

    fn expr() -> impl Strategy<Value = Expr> {
        let leaf = (-1000i64..1000, 1i64..1000).prop_map(|(n, d)| Expr::Leaf(n, d));
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
                (inner.clone(), inner).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            ]
        })
    }

    fn exact(e: &Expr) -> Option<BigRational> {
        Some(match e {
            Expr::Leaf(n, d) => q(*n, *d),
            Expr::Add(a, b) => exact(a)? + exact(b)?,
            Expr::Sub(a, b) => exact(a)? - exact(b)?,
            Expr::Mul(a, b) => exact(a)? * exact(b)?,
            Expr::Div(a, b) => {
                let d = exact(b)?;
                if d.is_zero() {
                    return None;
                }
                exact(a)? / d
            }
        })
    }

    /// Interval evaluation using only directed primitives.
    fn enclose(e: &Expr, prec: u32) -> Option<(PrecReal, PrecReal)> {
        Some(match e {
            Expr::Leaf(n, d) => (
                PrecReal::from_rational(&q(*n, *d), prec, Round::Down),
                PrecReal::from_rational(&q(*n, *d), prec, Round::Up),
            ),
            Expr::Add(a, b) => {
                let (al, ah) = enclose(a, prec)?;
                let (bl, bh) = enclose(b, prec)?;
                (al.add(&bl, Round::Down), ah.add(&bh, Round::Up))
            }
            Expr::Sub(a, b) => {
                let (al, ah) = enclose(a, prec)?;
                let (bl, bh) = enclose(b, prec)?;
                (al.sub(&bh, Round::Down), ah.sub(&bl, Round::Up))
            }
            Expr::Mul(a, b) => {
                let (al, ah) = enclose(a, prec)?;
                let (bl, bh) = enclose(b, prec)?;
                let lo = [&al.mul(&bl, Round::Down), &al.mul(&bh, Round::Down), &ah.mul(&bl, Round::Down), &ah.mul(&bh, Round::Down)]
                    .into_iter()
                    .min()
                    .unwrap()
                    .clone();
                let hi = [&al.mul(&bl, Round::Up), &al.mul(&bh, Round::Up), &ah.mul(&bl, Round::Up), &ah.mul(&bh, Round::Up)]
                    .into_iter()
                    .max()
                    .unwrap()
                    .clone();
                (lo, hi)
            }
            Expr::Div(a, b) => {
                let (al, ah) = enclose(a, prec)?;
                let (bl, bh) = enclose(b, prec)?;
                if bl <= PrecReal::zero(prec) && bh >= PrecReal::zero(prec) {
                    return None;
                }
                let c = [
                    (al.div(&bl, Round::Down), al.div(&bl, Round::Up)),
                    (al.div(&bh, Round::Down), al.div(&bh, Round::Up)),
                    (ah.div(&bl, Round::Down), ah.div(&bl, Round::Up)),
                    (ah.div(&bh, Round::Down), ah.div(&bh, Round::Up)),
                ];
                let lo = c.iter().map(|x| &x.0).min().unwrap().clone();
                let hi = c.iter().map(|x| &x.1).max().unwrap().clone();
                (lo, hi)
            }
        })
    }

    proptest! {
        #[test]
        fn directed_single_ops_bracket_exact(a in -10_000i64..10_000, b in 1i64..10_000,
                                             c in -10_000i64..10_000, d in 1i64..10_000,
                                             prec in 8u32..80) {
            let x = q(a, b);
            let y = q(c, d);
            let xr = PrecReal::from_rational(&x, 200, Round::Nearest);
            let yr = PrecReal::from_rational(&y, 200, Round::Nearest);
            let (xe, ye) = (xr.to_rational(), yr.to_rational());
            let xp = xr.with_precision(prec, Round::Nearest);
            let ops: Vec<(BigRational, Box<dyn Fn(Round) -> PrecReal>)> = vec![
                (xp.to_rational() + &ye, Box::new(|r| xp.add(&yr, r).with_precision(prec, r))),
                (&xe * &ye, Box::new(|r| xr.mul(&yr, r).with_precision(prec, r))),
            ];
            for (want, f) in ops {
                prop_assert!(f(Round::Down).to_rational() <= want);
                prop_assert!(f(Round::Up).to_rational() >= want);
            }
            if !ye.is_zero() {
                let xp = xr.with_precision(prec.max(8), Round::Nearest);
                let want = xp.to_rational() / &ye;
                prop_assert!(xp.div(&yr, Round::Down).to_rational() <= want);
                prop_assert!(xp.div(&yr, Round::Up).to_rational() >= want);
            }
        }

        #[test]
        fn roots_bracket_exact(a in 1u64..1_000_000_000, n in 1u32..12, prec in 8u32..120) {
            let x = PrecReal::from_u64(a, 64).with_precision(64, Round::Nearest);
            let xe = x.to_rational();
            let lo = x.with_precision(prec.max(x.precision()), Round::Nearest).nth_root(n, Round::Down).with_precision(prec, Round::Down);
            let hi = x.nth_root(n, Round::Up).with_precision(prec, Round::Up);
            prop_assert!(lo.to_rational().pow(n as i32) <= xe);
            prop_assert!(hi.to_rational().pow(n as i32) >= xe);
            prop_assert!(lo <= hi);
        }

        #[test]
        fn expressions_enclose_exact(e in expr(), prec in 16u32..96) {
            if let (Some(want), Some((lo, hi))) = (exact(&e), enclose(&e, prec)) {
                prop_assert!(lo.to_rational() <= want, "lo {:?} > {}", lo, want);
                prop_assert!(hi.to_rational() >= want, "hi {:?} < {}", hi, want);
            }
        }

        #[test]
        fn nearest_is_within_half_ulp(a in -1_000_000i64..1_000_000, b in 1i64..1_000_000, prec in 4u32..64) {
            let x = q(a, b);
            let n = PrecReal::from_rational(&x, prec, Round::Nearest).to_rational();
            let lo = PrecReal::from_rational(&x, prec, Round::Down).to_rational();
            let hi = PrecReal::from_rational(&x, prec, Round::Up).to_rational();
            prop_assert!(n == lo || n == hi);
            prop_assert!((&n - &x).abs() * BigInt::from(2) <= &hi - &lo);
        }
    }
}
