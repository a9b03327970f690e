//! Exact distribution primitives for sums of two or three uniforms on `<s>`.
//!
//! Throughout, `S = floor(s/2)`, `d = 2S + 1 = |<s>|`, `h = floor(s p / 2)` and
//! `c = 2h + 1 = |<sp>|`. Every result is an exact rational given those floors.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{domain, param, Result};
use crate::params::range_cardinality;
use crate::radical::Radical;

/// A range size `s >= 1` together with its floors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RangeSpec {
    s: Radical,
    floor_half: BigUint,
    cardinality: BigUint,
}

impl RangeSpec {
    pub fn new(s: Radical) -> Result<RangeSpec> {
        let cardinality = range_cardinality(&s)?;
        let floor_half = s.floor_half();
        Ok(RangeSpec {
            s,
            floor_half,
            cardinality,
        })
    }

    /// Range of an integer size.
    pub fn integer(s: u64) -> Result<RangeSpec> {
        if s == 0 {
            return domain("range size must be at least 1, got 0");
        }
        RangeSpec::new(Radical::from_integer(&BigUint::from(s)))
    }

    pub fn s(&self) -> &Radical {
        &self.s
    }

    /// `floor(s/2)`.
    pub fn floor_half(&self) -> &BigUint {
        &self.floor_half
    }

    /// `2 floor(s/2) + 1`.
    pub fn cardinality(&self) -> &BigUint {
        &self.cardinality
    }

    /// `floor(s p / 2)`.
    pub fn inner_half(&self, p: &Radical) -> BigUint {
        self.s.mul(p).floor_half()
    }
}

fn int(v: &BigUint) -> BigInt {
    BigInt::from(v.clone())
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

fn check_p(p: &Radical) -> Result<()> {
    if p.cmp_integer(1).is_gt() {
        return domain(format!("p must lie in (0, 1], got {p}"));
    }
    Ok(())
}

/// `Pr[x + y = z]` for `x, y` uniform on `<s>`: `(d - |z|) / d^2`.
pub fn prob_sum_to_z(r: &RangeSpec, z: &BigInt) -> Result<BigRational> {
    let d = int(&r.cardinality);
    if z.abs() > int(&r.floor_half) * 2 {
        return domain(format!("|z| = {} exceeds 2 floor(s/2) = {}", z.abs(), &r.floor_half * 2u32));
    }
    Ok(ratio(&d - z.abs(), &d * &d))
}

/// `Pr[x + y in <sp>]` for `x, y` uniform on `<s>`.
pub fn prob_sum_in_range(r: &RangeSpec, p: &Radical) -> Result<BigRational> {
    check_p(p)?;
    let d = int(&r.cardinality);
    let h = int(&r.inner_half(p));
    // sum of (d - |z|) over |z| <= h
    let count = (&h * 2 + 1) * &d - &h * (&h + 1);
    Ok(ratio(count, &d * &d))
}

/// Max-ratio distance between `U_sp` and the law of `x + y` conditioned on
/// landing in `<sp>`.
///
/// The conditioned mass at `z` is proportional to `d - |z|`, so the extreme
/// ratios sit at `z = 0` and `|z| = h`.
pub fn mr_dist_from_unif(r: &RangeSpec, p: &Radical) -> Result<BigRational> {
    let total = prob_sum_in_range(r, p)?;
    if total.is_zero() {
        return domain("conditioned support is empty");
    }
    let h = int(&r.inner_half(p));
    let c = BigRational::from_integer(&h * 2 + 1);
    let at_zero = prob_sum_to_z(r, &BigInt::zero())? / &total;
    let at_edge = prob_sum_to_z(r, &h)? / &total;
    let u = c.recip();
    let hi = &at_zero / &u;
    let lo = &u / &at_edge;
    Ok(if hi >= lo { hi } else { lo })
}

/// `Pr[w + x in <sp> and w + y in <sp>]` for `w, x, y` uniform on `<s>`.
pub fn prob_sum_with_two_rv_in_range(r: &RangeSpec, p: &Radical) -> Result<BigRational> {
    check_p(p)?;
    let d = int(&r.cardinality);
    let big_s = int(&r.floor_half);
    let h = int(&r.inner_half(p));
    let c = &h * 2 + 1;
    let d3 = &d * &d * &d;
    // interior w: every x with w + x in range is available, c choices each side
    let interior = ((&big_s - &h) * 2 + 1) * &c * &c;
    // edge w at distance j past the interior leaves c - j choices, j = 1..h
    let sq = |v: &BigInt| v * (v + 1) * (v * 2 + 1) / 6;
    let x_hat = &c - 1;
    let y_hat = &c - 1 - &h;
    let edges = (sq(&x_hat) - sq(&y_hat)) * 2;
    Ok(ratio(interior + edges, d3))
}

/// Max-ratio distance between `U_sp x U_sp` and the joint law of
/// `(w + x, w + y)` conditioned on both landing in `<sp>`.
pub fn mr_dist_from_pair_unif(r: &RangeSpec, p: &Radical) -> Result<BigRational> {
    let p3 = prob_sum_with_two_rv_in_range(r, p)?;
    if p3.is_zero() {
        return domain("conditioned support is empty");
    }
    let d = int(&r.cardinality);
    let big_s = int(&r.floor_half);
    let h = int(&r.inner_half(p));
    let c = &h * 2 + 1;
    let norm = BigRational::from_integer(&d * &d * &d) * &p3;
    // most w fit (0, 0); fewest fit (h, -h)
    let alpha = BigRational::from_integer(d.clone()) / &norm;
    let beta = BigRational::from_integer((&big_s - &h) * 2 + 1) / &norm;
    let u = BigRational::new(BigInt::one(), &c * &c);
    let hi = &alpha / &u;
    let lo = &u / &beta;
    Ok(if hi >= lo { hi } else { lo })
}

/// `Pr[(x + y) mod m in <mp>]` for `x, y` uniform on `<m>`, `m` odd:
/// the centred sum is itself uniform, so this is `(2 floor(mp/2) + 1) / m`.
pub fn prob_sum_mod_in_range(m: &BigUint, p: &Radical) -> Result<BigRational> {
    if !m.bit(0) || *m < BigUint::from(3u32) {
        return param(format!("m must be odd and at least 3, got {m}"));
    }
    check_p(p)?;
    let h = Radical::from_integer(m).mul(p).floor_half();
    Ok(ratio(int(&h) * 2 + 1, int(m)))
}
