//! Reference computations for checking everything else: exhaustive
//! enumerations of the primitives, a quadratic merge, full tuple counts and
//! an exact truncated-convolution chain for expected counts and sizes.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{CheckedAdd, CheckedMul, One, ToPrimitive, Zero};

use crate::error::{param, Error, Result};
use crate::params::{self, Mode, ProblemParams};
use crate::radical::Radical;
use crate::solver::InputLists;

/// Largest range size the primitive enumerations accept.
pub const BRUTE_FORCE_MAX_S: u64 = 400;

/// Largest tuple count the list enumeration accepts.
pub const NAIVE_MAX_TUPLES: u128 = 100_000_000;

/// Largest `m` for the convolution chain.
pub const CONVOLUTION_MAX_M: u64 = 1 << 20;

/// Which primitive to enumerate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Primitive {
    /// `Pr[x + y = z]`.
    SumToZ(BigInt),
    /// `Pr[x + y in <sp>]`.
    SumInRange,
    /// Max-ratio distance of the conditioned sum from uniform.
    MrDist,
    /// `Pr[w + x in <sp> and w + y in <sp>]`.
    TriplePair,
    /// Max-ratio distance of the conditioned pair from the uniform pair.
    MrPair,
    /// `Pr[(x + y) mod s in <sp>]`, `s` an odd integer.
    ModInRange,
}

fn resource(stage: &str, requested: u128, limit: u128) -> Error {
    Error::Resource {
        stage: stage.to_string(),
        requested,
        limit,
    }
}

/// Largest integer `h` with `2h <= v`, found by counting up.
fn half_floor_by_search(v: &Radical) -> i64 {
    let mut h = 0i64;
    while v.cmp_integer(2 * (h as u64 + 1)).is_ge() {
        h += 1;
    }
    h
}

fn q(num: u128, den: u128) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn max_ratio(masses: impl Iterator<Item = BigRational>, u: &BigRational) -> BigRational {
    let mut best = BigRational::one();
    for w in masses {
        let r = if w >= *u { &w / u } else { u / &w };
        if r > best {
            best = r;
        }
    }
    best
}

/// Exhaustive count behind a primitive, exact.
pub fn brute_force_primitive(which: &Primitive, s: &Radical, p: &Radical) -> Result<BigRational> {
    if s.cmp_integer(BRUTE_FORCE_MAX_S).is_gt() {
        return Err(resource("brute force", s.floor().to_u128().unwrap_or(u128::MAX), BRUTE_FORCE_MAX_S as u128));
    }
    if s.cmp_integer(1).is_lt() {
        return param("range size must be at least 1");
    }
    if p.cmp_integer(1).is_gt() {
        return param("p must lie in (0, 1]");
    }
    let big_s = half_floor_by_search(s);
    let h = half_floor_by_search(&s.mul(p));
    let d = (2 * big_s + 1) as u128;
    let range = || -big_s..=big_s;
    let inside = |v: i64| v.abs() <= h;
    Ok(match which {
        Primitive::SumToZ(z) => {
            let z = z.to_i64().ok_or_else(|| Error::Domain("z out of range".into()))?;
            let hits = range().filter(|x| (z - x).abs() <= big_s).count() as u128;
            q(hits, d * d)
        }
        Primitive::SumInRange => {
            let hits: usize = range()
                .map(|x| range().filter(|y| inside(x + y)).count())
                .sum();
            q(hits as u128, d * d)
        }
        Primitive::MrDist => {
            let counts: Vec<u128> = (-h..=h)
                .map(|z| range().filter(|x| (z - x).abs() <= big_s).count() as u128)
                .collect();
            let total: u128 = counts.iter().sum();
            let u = q(1, (2 * h + 1) as u128);
            max_ratio(counts.iter().map(|&c| q(c, total)), &u)
        }
        Primitive::TriplePair => {
            let hits: u128 = range()
                .map(|w| {
                    let n = range().filter(|x| inside(w + x)).count() as u128;
                    n * n
                })
                .sum();
            q(hits, d * d * d)
        }
        Primitive::MrPair => {
            // mass of (z1, z2) counts the w with z1 - w and z2 - w both in <s>
            let weight = |z1: i64, z2: i64| -> u128 {
                let lo = (-big_s).max(z1 - big_s).max(z2 - big_s);
                let hi = big_s.min(z1 + big_s).min(z2 + big_s);
                (hi - lo + 1).max(0) as u128
            };
            let mut counts = Vec::new();
            for z1 in -h..=h {
                for z2 in -h..=h {
                    counts.push(weight(z1, z2));
                }
            }
            let total: u128 = counts.iter().sum();
            let c = (2 * h + 1) as u128;
            let u = q(1, c * c);
            max_ratio(counts.iter().map(|&w| q(w, total)), &u)
        }
        Primitive::ModInRange => {
            let m = s
                .as_rational()
                .filter(|r| r.is_integer())
                .and_then(|r| r.to_integer().to_i64())
                .ok_or_else(|| Error::Param("modulus must be an integer".into()))?;
            if m % 2 == 0 {
                return param(format!("m must be odd, got {m}"));
            }
            let half = (m - 1) / 2;
            let reduce = |v: i64| {
                if v > half {
                    v - m
                } else if v < -half {
                    v + m
                } else {
                    v
                }
            };
            let hits: usize = range()
                .map(|x| range().filter(|y| inside(reduce(x + y))).count())
                .sum();
            q(hits as u128, d * d)
        }
    })
}

/// A sub-probability mass function on `[-half, half]`, stored as integer
/// counts over a common denominator.
#[derive(Debug, Clone)]
struct Counts<T> {
    half: i64,
    mass: Vec<T>,
}

trait Count: Clone + Zero + CheckedAdd + CheckedMul {
    fn from_u64(v: u64) -> Self;
    fn to_biguint(&self) -> BigUint;
}

impl Count for u128 {
    fn from_u64(v: u64) -> Self {
        v as u128
    }
    fn to_biguint(&self) -> BigUint {
        BigUint::from(*self)
    }
}

impl Count for BigUint {
    fn from_u64(v: u64) -> Self {
        BigUint::from(v)
    }
    fn to_biguint(&self) -> BigUint {
        self.clone()
    }
}

/// Exact per-level probabilities from the convolution chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionResult {
    pub levels: u32,
    pub k: u64,
    /// `Pr[one fixed k-tuple passes every filter and sums to 0]`.
    pub tuple_zero_prob: BigRational,
    /// `level_pass_prob[d]` = total mass of the level-`d` truncated law.
    pub level_pass_prob: Vec<BigRational>,
}

impl ConvolutionResult {
    /// `E[C] = n^k * tuple_zero_prob`.
    pub fn expected_zero_count(&self, n: &BigUint) -> BigRational {
        BigRational::from_integer(BigInt::from(n.pow(self.k as u32))) * &self.tuple_zero_prob
    }

    /// `E[total size] = sum_d (k / 2^d) n^(2^d) level_pass_prob[d]`.
    pub fn expected_total_size(&self, n: &BigUint) -> BigRational {
        let mut total = BigRational::zero();
        for (d, pass) in self.level_pass_prob.iter().enumerate() {
            let nodes = BigInt::from(self.k >> d);
            let tuples = BigInt::from(n.pow(1u32 << d));
            total += BigRational::from_integer(nodes * tuples) * pass;
        }
        total
    }
}

fn convolve_chain<T: Count>(taus: &[i64], m: u64, mode: Mode) -> Option<(Vec<Counts<T>>, Vec<BigUint>)> {
    let half0 = (m / 2) as i64;
    let d0 = 2 * half0 as u64 + 1;
    let mut chain = vec![Counts {
        half: half0,
        mass: vec![T::from_u64(1); d0 as usize],
    }];
    let mut dens = vec![BigUint::from(d0)];
    // in Z_m a pair sums to z, z + m or z - m before reduction
    let shifts: &[i64] = match mode {
        Mode::CenteredModSum => &[0, m as i64, -(m as i64)],
        Mode::IntegerSum => &[0],
    };
    for &tau in &taus[1..] {
        let prev = chain.last().unwrap();
        let ph = prev.half;
        let uniform = chain.len() == 1;
        let tau = tau.min(if mode == Mode::CenteredModSum { (m as i64 - 1) / 2 } else { i64::MAX });
        let mut out = vec![T::zero(); (2 * tau + 1) as usize];
        for z in -tau..=tau {
            let mut acc = T::zero();
            for &sh in shifts {
                let t = z + sh;
                let lo = (-ph).max(t - ph);
                let hi = ph.min(t + ph);
                if lo > hi {
                    continue;
                }
                if uniform {
                    // every input value has mass one
                    acc = acc.checked_add(&T::from_u64((hi - lo + 1) as u64))?;
                    continue;
                }
                for x in lo..=hi {
                    let a = &prev.mass[(x + ph) as usize];
                    let b = &prev.mass[(t - x + ph) as usize];
                    acc = acc.checked_add(&a.checked_mul(b)?)?;
                }
            }
            out[(z + tau) as usize] = acc;
        }
        let den = dens.last().unwrap();
        dens.push(den * den);
        chain.push(Counts { half: tau, mass: out });
    }
    Some((chain, dens))
}

/// Exact truncated-convolution chain for uniform inputs on `<m>`.
///
/// `f_0` is uniform on `<m>`; `f_{d+1}` is the self-convolution of `f_d`
/// restricted to `<m p^(d+1)>`, without renormalising.
pub fn convolution_expectation(m: &BigUint, k: u64, mode: Mode) -> Result<ConvolutionResult> {
    let levels = params::levels(k)?;
    params::check_mode(m, mode)?;
    let mu = match m.to_u64() {
        Some(v) if v <= CONVOLUTION_MAX_M => v,
        _ => {
            return Err(resource(
                "convolution",
                m.to_u128().unwrap_or(u128::MAX),
                CONVOLUTION_MAX_M as u128,
            ))
        }
    };
    let taus: Vec<i64> = (0..=levels)
        .map(|d| params::threshold(m, levels, d).to_i64().unwrap())
        .collect();
    let (masses, dens): (Vec<Vec<BigUint>>, Vec<BigUint>) =
        match convolve_chain::<u128>(&taus, mu, mode) {
            Some((c, d)) => (c.into_iter().map(|l| l.mass.iter().map(Count::to_biguint).collect()).collect(), d),
            None => {
                let (c, d) = convolve_chain::<BigUint>(&taus, mu, mode).expect("no overflow in BigUint");
                (c.into_iter().map(|l| l.mass).collect(), d)
            }
        };
    let level_pass_prob = masses
        .iter()
        .zip(&dens)
        .map(|(mass, den)| {
            let total: BigUint = mass.iter().sum();
            BigRational::new(total.into(), den.clone().into())
        })
        .collect();
    let root = masses.last().unwrap();
    let centre = &root[root.len() / 2];
    let tuple_zero_prob = BigRational::new(centre.clone().into(), dens.last().unwrap().clone().into());
    Ok(ConvolutionResult {
        levels,
        k,
        tuple_zero_prob,
        level_pass_prob,
    })
}

/// Largest first-level threshold [`second_moment_four_lists`] accepts.
pub const SECOND_MOMENT_MAX_TAU: u64 = 1 << 24;

/// `sum_{u=0..len} (fa + bf u)(ga + bg u)`.
fn linear_product_sum(fa: i128, bf: i128, ga: i128, bg: i128, len: i128) -> BigInt {
    let s1 = len * (len + 1) / 2;
    let s2 = len * (len + 1) * (2 * len + 1) / 6;
    BigInt::from(fa) * BigInt::from(ga) * (len + 1)
        + BigInt::from(fa * bg + ga * bf) * s1
        + BigInt::from(bf * bg * s2)
}

/// `sum_{t=a..b} f(t) g(t)` for `f`, `g` linear on `[a, b]`.
fn segment_sum(a: i64, b: i64, f: &dyn Fn(i64) -> i128, g: &dyn Fn(i64) -> i128) -> BigInt {
    if a > b {
        return BigInt::zero();
    }
    let len = (b - a) as i128;
    let slope = |h: &dyn Fn(i64) -> i128| if len == 0 { 0 } else { (h(b) - h(a)) / len };
    linear_product_sum(f(a), slope(f), g(a), slope(g), len)
}

/// Exact `E[C^2]` for four integer lists of size `n` on `<m>`.
///
/// Two 4-tuples are split by which leaves they share. On each side the
/// two first-level sums are independent (no shared leaf), share one leaf,
/// or coincide, and the root forces the right sums to be the negated left
/// ones. Every case reduces to a sum over the two left values `s, t`, and
/// for fixed `s` the summands are piecewise linear in `t` with kinks at 0
/// and `s` only.
pub fn second_moment_four_lists(m: &BigUint, n: &BigUint) -> Result<BigRational> {
    if m.bits() > 40 {
        return param("second moment oracle needs m below 2^40");
    }
    let tau_u = params::threshold(m, 2, 1).to_u64().unwrap();
    if tau_u > SECOND_MOMENT_MAX_TAU {
        return Err(resource("second moment", tau_u as u128, SECOND_MOMENT_MAX_TAU as u128));
    }
    let h = (m.to_u64().unwrap() / 2) as i64;
    let d = 2 * h as i128 + 1;
    let tau = tau_u as i64;
    // F(s): pairs (a, b) with a + b = s
    let f = |s: i64| d - s.unsigned_abs() as i128;
    // H(s, t): triples (a, b, b') with a + b = s and a + b' = t; |s|, |t| <= h
    // keeps every interval end interior, so the count is d minus the spread
    let g = |s: i64, t: i64| d - (s.max(t).max(0) - s.min(t).min(0)) as i128;
    let (mut f2, mut f3, mut ffh, mut h2, mut hf) =
        (BigInt::zero(), BigInt::zero(), BigInt::zero(), BigInt::zero(), BigInt::zero());
    for s in -tau..=tau {
        let fs = f(s);
        f2 += BigInt::from(fs * fs);
        f3 += BigInt::from(fs * fs) * fs;
        hf += BigInt::from(g(s, s) * fs);
        let (x1, x2) = (s.min(0), s.max(0));
        let hs = |t: i64| g(s, t);
        let mut a_s = BigInt::zero();
        for (lo, hi) in [(-tau, x1), (x1 + 1, x2), (x2 + 1, tau)] {
            a_s += segment_sum(lo, hi, &f, &hs);
            h2 += segment_sum(lo, hi, &hs, &hs);
        }
        ffh += a_s * fs;
    }
    let r = |num: BigInt, den_pow: u32| BigRational::new(num, BigInt::from(d).pow(den_pow));
    // pattern probabilities; none, one shared leaf, both shared
    let q_nn = r(&f2 * &f2, 8);
    let q_n1 = r(ffh, 7);
    let q_nb = r(f3, 6);
    let q_11 = r(h2, 6);
    let q_1b = r(hf, 5);
    let q_bb = r(f2, 4);
    let n = BigInt::from(n.clone());
    let n1 = &n - 1;
    let c_none = BigRational::from_integer(&n * &n * &n1 * &n1);
    let c_one = BigRational::from_integer(&n * &n * &n1 * 2);
    let c_both = BigRational::from_integer(&n * &n);
    let two = BigRational::from_integer(2.into());
    Ok(&c_none * &c_none * q_nn
        + &two * &c_none * &c_one * q_n1
        + &two * &c_none * &c_both * q_nb
        + &c_one * &c_one * q_11
        + &two * &c_one * &c_both * q_1b
        + &c_both * &c_both * q_bb)
}

/// Depth-first count of tuples passing every filter with root sum zero.
/// Subtrees are abandoned as soon as a completed node fails its filter.
fn count_tuples(lists: &[Vec<i128>], taus: &[i128], modulus: Option<i128>) -> u64 {
    let levels = taus.len() - 1;
    let reduce = |v: i128| match modulus {
        Some(m) => {
            let h = (m - 1) / 2;
            if v > h {
                v - m
            } else if v < -h {
                v + m
            } else {
                v
            }
        }
        None => v,
    };
    fn rec(
        i: usize,
        levels: usize,
        lists: &[Vec<i128>],
        taus: &[i128],
        pending: &mut [i128],
        reduce: &dyn Fn(i128) -> i128,
    ) -> u64 {
        let mut count = 0;
        // deeper calls overwrite slots that later siblings need, so restore
        // the entry state after each one
        let left: Vec<i128> = pending.to_vec();
        for &x in &lists[i] {
            let mut v = x;
            let mut lvl = 0;
            let mut j = i;
            let mut ok = true;
            while j & 1 == 1 {
                v = reduce(left[lvl] + v);
                lvl += 1;
                if v.abs() > taus[lvl] {
                    ok = false;
                    break;
                }
                j >>= 1;
            }
            if !ok {
                continue;
            }
            if lvl == levels {
                count += (v == 0) as u64;
            } else {
                pending[lvl] = v;
                count += rec(i + 1, levels, lists, taus, pending, reduce);
                pending.copy_from_slice(&left);
            }
        }
        count
    }
    let mut pending = vec![0i128; levels + 1];
    rec(0, levels, lists, taus, &mut pending, &reduce)
}

fn narrow_taus(m: &BigUint, levels: u32) -> Result<Vec<i128>> {
    if m.bits() > 125 {
        return param("enumeration supports m below 2^125");
    }
    Ok((0..=levels)
        .map(|d| params::threshold(m, levels, d).to_i128().unwrap())
        .collect())
}

/// Number of index tuples passing every level filter and summing to zero,
/// by direct evaluation of each tuple.
pub fn naive_zero_count(lists: &InputLists, params: &ProblemParams) -> Result<u64> {
    let tuples = (lists.n() as u128).checked_pow(params.k as u32).unwrap_or(u128::MAX);
    if tuples > NAIVE_MAX_TUPLES {
        return Err(resource("naive enumeration", tuples, NAIVE_MAX_TUPLES));
    }
    if lists.m() != &params.m || lists.k() != params.k {
        return param("input lists do not match the parameters");
    }
    let taus = narrow_taus(&params.m, params.levels())?;
    let values: Vec<Vec<i128>> = lists
        .to_bigint_lists()
        .iter()
        .map(|l| l.iter().map(|v| v.to_i128().unwrap()).collect())
        .collect();
    let modulus = (params.mode == Mode::CenteredModSum).then(|| params.m.to_i128().unwrap());
    Ok(count_tuples(&values, &taus, modulus))
}

/// Exact `Pr[a uniform k-tuple over <m> passes and sums to 0]`, by running
/// through every tuple (with early abandonment of failing subtrees).
pub fn enumerate_tuple_zero_prob(m: &BigUint, k: u64, mode: Mode, max_tuples: u128) -> Result<BigRational> {
    let levels = params::levels(k)?;
    params::check_mode(m, mode)?;
    let half = (m >> 1u32).to_i128().unwrap_or(i128::MAX);
    let d = (2 * half + 1) as u128;
    let tuples = d.checked_pow(k as u32).unwrap_or(u128::MAX);
    if tuples > max_tuples {
        return Err(resource("tuple enumeration", tuples, max_tuples));
    }
    let taus = narrow_taus(m, levels)?;
    let full: Vec<i128> = (-half..=half).collect();
    let lists = vec![full; k as usize];
    let modulus = (mode == Mode::CenteredModSum).then(|| m.to_i128().unwrap());
    let hits = count_tuples(&lists, &taus, modulus);
    Ok(q(hits as u128, tuples))
}

/// Double-loop merge: every `(i, j)` with `|a_i + b_j| <= tau`, in loop order.
pub fn naive_merge(la: &[BigInt], lb: &[BigInt], tau: &BigInt, modulus: Option<&BigUint>) -> Vec<(BigInt, usize, usize)> {
    let m = modulus.map(|m| BigInt::from(m.clone()));
    let mut out = Vec::new();
    for (i, a) in la.iter().enumerate() {
        for (j, b) in lb.iter().enumerate() {
            let mut v = a + b;
            if let Some(m) = &m {
                v = v.mod_floor_centre(m);
            }
            if v.magnitude() <= tau.magnitude() {
                out.push((v, i, j));
            }
        }
    }
    out
}

trait CentreMod {
    fn mod_floor_centre(&self, m: &BigInt) -> BigInt;
}

impl CentreMod for BigInt {
    /// Representative of `self mod m` in `[-(m-1)/2, (m-1)/2]`.
    fn mod_floor_centre(&self, m: &BigInt) -> BigInt {
        use num_integer::Integer;
        let r = self.mod_floor(m);
        if &r * 2 > *m {
            r - m
        } else {
            r
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn second_moment_matches_pair_enumeration() {
        // E[C^2] by enumerating every value of all 4n leaves
        for (m, n) in [(3u64, 3usize), (5, 2), (7, 2), (9, 2)] {
            let mb = BigUint::from(m);
            let h = (m / 2) as i64;
            let tau = params::threshold(&mb, 2, 1).to_i64().unwrap();
            let vals: Vec<i64> = (-h..=h).collect();
            let leaves = 4 * n;
            let mut total = 0u128;
            let mut idx = vec![0usize; leaves];
            'outer: loop {
                let x: Vec<i64> = idx.iter().map(|&i| vals[i]).collect();
                let mut c = 0u128;
                for t in 0..n.pow(4) {
                    let pick = |l: usize| x[n * l + (t / n.pow(l as u32)) % n];
                    let (a, b, cc, dd) = (pick(0), pick(1), pick(2), pick(3));
                    if (a + b).abs() <= tau && (cc + dd).abs() <= tau && a + b + cc + dd == 0 {
                        c += 1;
                    }
                }
                total += c * c;
                for slot in idx.iter_mut() {
                    *slot += 1;
                    if *slot < vals.len() {
                        continue 'outer;
                    }
                    *slot = 0;
                }
                break;
            }
            let want = BigRational::new(BigInt::from(total), BigInt::from(vals.len()).pow(leaves as u32));
            let got = second_moment_four_lists(&mb, &BigUint::from(n)).unwrap();
            assert_eq!(got, want, "m = {m}, n = {n}");
        }
    }

    use crate::exactprob::*;

    fn rq(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn brute_force_examples() {
        let s = Radical::ratio(11, 1);
        let one = Radical::one();
        assert_eq!(brute_force_primitive(&Primitive::SumToZ(0.into()), &s, &one).unwrap(), rq(1, 11));
        assert_eq!(brute_force_primitive(&Primitive::SumInRange, &s, &one).unwrap(), rq(91, 121));
        assert_eq!(brute_force_primitive(&Primitive::MrDist, &s, &one).unwrap(), rq(91, 66));
        assert_eq!(brute_force_primitive(&Primitive::TriplePair, &s, &one).unwrap(), rq(781, 1331));
        assert_eq!(brute_force_primitive(&Primitive::ModInRange, &s, &Radical::ratio(2, 5)).unwrap(), rq(5, 11));
        assert_eq!(brute_force_primitive(&Primitive::MrPair, &s, &Radical::ratio(1, 100)).unwrap(), rq(1, 1));
        assert!(matches!(
            brute_force_primitive(&Primitive::SumInRange, &Radical::ratio(401, 1), &one),
            Err(Error::Resource { .. })
        ));
    }

    #[test]
    fn brute_force_agrees_with_closed_forms_on_a_few_points() {
        for (sn, sd) in [(21u64, 1u64), (35, 10), (101, 1)] {
            let s = Radical::ratio(sn, sd);
            let r = RangeSpec::new(s.clone()).unwrap();
            for p in [Radical::ratio(1, 3), Radical::ratio(1, 5), Radical::one()] {
                assert_eq!(brute_force_primitive(&Primitive::TriplePair, &s, &p).unwrap(), prob_sum_with_two_rv_in_range(&r, &p).unwrap());
                assert_eq!(brute_force_primitive(&Primitive::MrPair, &s, &p).unwrap(), mr_dist_from_pair_unif(&r, &p).unwrap());
            }
        }
    }

    #[test]
    fn convolution_at_k2_is_the_point_mass() {
        let r = convolution_expectation(&BigUint::from(11u32), 2, Mode::IntegerSum).unwrap();
        // p = 11^(-1/2): the root range only admits {0}, and Pr[x + y = 0] = 1/11
        assert_eq!(r.tuple_zero_prob, rq(1, 11));
        assert_eq!(r.level_pass_prob[0], rq(1, 1));
    }

    #[test]
    fn convolution_matches_tuple_enumeration_small() {
        for m in [31u32, 33, 45] {
            for mode in [Mode::IntegerSum, Mode::CenteredModSum] {
                let m = BigUint::from(m);
                let conv = convolution_expectation(&m, 4, mode).unwrap();
                let brute = enumerate_tuple_zero_prob(&m, 4, mode, 1 << 24).unwrap();
                assert_eq!(conv.tuple_zero_prob, brute, "m={m} {mode}");
            }
        }
    }

    #[test]
    fn pass_probabilities_do_not_increase() {
        let r = convolution_expectation(&BigUint::from(4099u32), 8, Mode::IntegerSum).unwrap();
        for w in r.level_pass_prob.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn naive_count_crafted() {
        let p = ProblemParams::new(BigUint::from(10007u32), 4, BigUint::from(2u32), Mode::IntegerSum).unwrap();
        let big = BigInt::from(5000);
        let lists = vec![
            vec![BigInt::from(1), big.clone()],
            vec![BigInt::from(-1), big.clone()],
            vec![BigInt::from(2), big.clone()],
            vec![BigInt::from(-2), big],
        ];
        let lists = InputLists::from_values(&p, lists).unwrap();
        assert_eq!(naive_zero_count(&lists, &p).unwrap(), 1);
    }

    #[test]
    fn naive_merge_centres() {
        let v = vec![BigInt::from(5), BigInt::from(5)];
        let out = naive_merge(&v, &v, &BigInt::from(20), Some(&BigUint::from(11u32)));
        assert_eq!(out.len(), 4);
        assert!(out.iter().all(|(x, _, _)| *x == BigInt::from(-1)));
    }
}
