//! Exact positive radicals `q^(1/r)` with `q` rational.
//!
//! Range sizes `m * p^d` with `p = m^(-1/(L+1))` are irrational in general,
//! but they are always an integer root of a rational. Keeping them in this
//! form makes every floor exact: `floor(q^(1/r)) = iroot(floor(q), r)`.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed};

use crate::precreal::{PrecReal, Round};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Radical {
    radicand: BigRational,
    index: u32,
}

impl Radical {
    /// `q^(1/index)`.
    ///
    /// # Panics
    /// If `q <= 0` or `index == 0`.
    pub fn new(q: BigRational, index: u32) -> Radical {
        assert!(q.is_positive(), "radicand must be positive");
        assert!(index >= 1, "zeroth root");
        Radical { radicand: q, index }
    }

    pub fn from_rational(q: BigRational) -> Radical {
        Radical::new(q, 1)
    }

    pub fn from_integer(v: &BigUint) -> Radical {
        Radical::new(BigRational::from_integer(BigInt::from(v.clone())), 1)
    }

    /// `num/den`.
    pub fn ratio(num: u64, den: u64) -> Radical {
        Radical::new(BigRational::new(num.into(), den.into()), 1)
    }

    pub fn one() -> Radical {
        Radical::new(BigRational::one(), 1)
    }

    pub fn radicand(&self) -> &BigRational {
        &self.radicand
    }

    pub fn index(&self) -> u32 {
        self.index
    }

    /// The value as a rational when it is one exactly.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.index == 1 {
            return Some(self.radicand.clone());
        }
        let (n, d) = (self.radicand.numer().magnitude(), self.radicand.denom().magnitude());
        let (rn, rd) = (n.nth_root(self.index), d.nth_root(self.index));
        if Pow::pow(&rn, self.index) == *n && Pow::pow(&rd, self.index) == *d {
            Some(BigRational::new(rn.into(), rd.into()))
        } else {
            None
        }
    }

    pub fn mul(&self, other: &Radical) -> Radical {
        let l = self.index.lcm(&other.index);
        let a = Pow::pow(&self.radicand, l / self.index);
        let b = Pow::pow(&other.radicand, l / other.index);
        Radical::new(a * b, l)
    }

    pub fn mul_rational(&self, q: &BigRational) -> Radical {
        Radical::new(&self.radicand * Pow::pow(q, self.index), self.index)
    }

    pub fn pow(&self, e: u32) -> Radical {
        Radical::new(Pow::pow(&self.radicand, e), self.index)
    }

    pub fn recip(&self) -> Radical {
        Radical::new(self.radicand.recip(), self.index)
    }

    /// `floor(value)`.
    pub fn floor(&self) -> BigUint {
        let f = self.radicand.floor().to_integer();
        f.magnitude().nth_root(self.index)
    }

    /// `floor(value / 2)`.
    pub fn floor_half(&self) -> BigUint {
        let half = BigRational::new(BigInt::one(), BigInt::from(2u32));
        self.mul_rational(&half).floor()
    }

    /// Compare against a nonnegative rational.
    pub fn cmp_rational(&self, q: &BigRational) -> Ordering {
        if !q.is_positive() {
            return Ordering::Greater;
        }
        self.radicand.cmp(&Pow::pow(q, self.index))
    }

    pub fn cmp_integer(&self, v: u64) -> Ordering {
        self.cmp_rational(&BigRational::from_integer(v.into()))
    }

    /// Directed approximation of the value.
    pub fn to_prec(&self, prec: u32, round: Round) -> PrecReal {
        if let Some(q) = self.as_rational() {
            return PrecReal::from_rational(&q, prec, round);
        }
        // the root is monotone, so rounding the radicand the same way is safe
        PrecReal::from_rational(&self.radicand, prec + 8, round)
            .nth_root(self.index, round)
            .with_precision(prec, round)
    }

    pub fn to_f64(&self) -> f64 {
        self.to_prec(64, Round::Nearest).to_f64()
    }
}

impl PartialOrd for Radical {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Radical {
    fn cmp(&self, other: &Self) -> Ordering {
        let l = self.index.lcm(&other.index);
        Pow::pow(&self.radicand, l / self.index).cmp(&Pow::pow(&other.radicand, l / other.index))
    }
}

impl fmt::Debug for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index == 1 {
            write!(f, "{}", self.radicand)
        } else {
            // radicands can have thousands of digits; show the value instead
            write!(f, "({}-th root, ~{})", self.index, self.to_prec(64, Round::Nearest))
        }
    }
}

impl fmt::Display for Radical {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
