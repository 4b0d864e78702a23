//! Exact arithmetic on Gaussian integers `a + bj` and their ratios.
//!
//! Difference constellations of PAM and square QAM signal sets are Gaussian
//! integers, so every singular fade state of those signal sets is a ratio of
//! two Gaussian integers. [`GaussianRational`] keeps such ratios in a
//! canonical form so that they can be compared and hashed exactly.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// An element of `Z[j]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GaussianInt {
    pub re: i64,
    pub im: i64,
}

pub const ZERO: GaussianInt = GaussianInt { re: 0, im: 0 };
pub const ONE: GaussianInt = GaussianInt { re: 1, im: 0 };
pub const J: GaussianInt = GaussianInt { re: 0, im: 1 };

/// The four units `1, j, -1, -j` in that order.
pub const UNITS: [GaussianInt; 4] = [
    GaussianInt { re: 1, im: 0 },
    GaussianInt { re: 0, im: 1 },
    GaussianInt { re: -1, im: 0 },
    GaussianInt { re: 0, im: -1 },
];

impl GaussianInt {
    pub const fn new(re: i64, im: i64) -> Self {
        GaussianInt { re, im }
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn conj(self) -> Self {
        GaussianInt::new(self.re, -self.im)
    }

    /// `re² + im²`.
    pub fn norm(self) -> u64 {
        (self.re * self.re + self.im * self.im) as u64
    }

    pub fn is_unit(self) -> bool {
        self.norm() == 1
    }

    /// Multiplication by `j`.
    pub fn rotate(self) -> Self {
        GaussianInt::new(-self.im, self.re)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re as f64, self.im as f64)
    }

    /// Euclidean division: `self = q * rhs + r` with `norm(r) < norm(rhs)`.
    ///
    /// Each component of the exact quotient is rounded to the nearest integer,
    /// ties toward negative infinity.
    pub fn div_rem(self, rhs: Self) -> Result<(Self, Self)> {
        if rhs.is_zero() {
            return domain("Gaussian division by zero");
        }
        let n = rhs.norm() as i64;
        let t = self * rhs.conj();
        let q = GaussianInt::new(round_half_down(t.re, n), round_half_down(t.im, n));
        Ok((q, self - q * rhs))
    }

    /// Exact quotient if `rhs` divides `self`.
    pub fn checked_div(self, rhs: Self) -> Option<Self> {
        if rhs.is_zero() {
            return None;
        }
        let n = rhs.norm() as i64;
        let t = self * rhs.conj();
        if t.re % n == 0 && t.im % n == 0 {
            Some(GaussianInt::new(t.re / n, t.im / n))
        } else {
            None
        }
    }

    pub fn divides(self, other: Self) -> bool {
        other.checked_div(self).is_some()
    }

    /// Unit `u` such that `u * self` lies in `re > 0, im >= 0`.
    ///
    /// Returns `1` for zero.
    pub fn normalizing_unit(self) -> Self {
        if self.is_zero() {
            return ONE;
        }
        for u in UNITS {
            let v = u * self;
            if v.re > 0 && v.im >= 0 {
                return u;
            }
        }
        unreachable!("every nonzero Gaussian integer has an associate with re > 0, im >= 0")
    }

    /// The associate with `re > 0, im >= 0` (zero maps to zero).
    pub fn normalize(self) -> Self {
        self.normalizing_unit() * self
    }

    pub fn is_associate(self, other: Self) -> bool {
        !self.is_zero() && self.normalize() == other.normalize()
    }
}

// round(num / den) for den > 0, ties toward -inf: ceil((2 num - den) / (2 den)).
fn round_half_down(num: i64, den: i64) -> i64 {
    let a = 2 * num - den;
    let b = 2 * den;
    -((-a).div_euclid(b))
}

impl Add for GaussianInt {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        GaussianInt::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for GaussianInt {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        GaussianInt::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl Mul for GaussianInt {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        GaussianInt::new(self.re * rhs.re - self.im * rhs.im, self.re * rhs.im + self.im * rhs.re)
    }
}

impl Neg for GaussianInt {
    type Output = Self;
    fn neg(self) -> Self {
        GaussianInt::new(-self.re, -self.im)
    }
}

impl From<i64> for GaussianInt {
    fn from(re: i64) -> Self {
        GaussianInt::new(re, 0)
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.re, self.im) {
            (re, 0) => write!(f, "{re}"),
            (0, 1) => write!(f, "j"),
            (0, -1) => write!(f, "-j"),
            (0, im) => write!(f, "{im}j"),
            (re, 1) => write!(f, "{re}+j"),
            (re, -1) => write!(f, "{re}-j"),
            (re, im) if im > 0 => write!(f, "{re}+{im}j"),
            (re, im) => write!(f, "{re}{im}j"),
        }
    }
}

/// Norm of a Gaussian integer.
pub fn gi_norm(x: GaussianInt) -> u64 {
    x.norm()
}

/// Greatest common divisor, normalized to the associate with `re > 0, im >= 0`.
pub fn gi_gcd(x: GaussianInt, y: GaussianInt) -> Result<GaussianInt> {
    if x.is_zero() && y.is_zero() {
        return domain("gcd(0, 0) is undefined");
    }
    let (mut a, mut b) = (x, y);
    while !b.is_zero() {
        let (_, r) = a.div_rem(b)?;
        a = b;
        b = r;
    }
    Ok(a.normalize())
}

pub fn gi_is_unit(x: GaussianInt) -> bool {
    x.is_unit()
}

/// Pure coprimality: the only common divisors are units.
pub fn gi_relatively_prime(x: GaussianInt, y: GaussianInt) -> Result<bool> {
    if x.is_zero() || y.is_zero() {
        return domain("coprimality is only defined for nonzero Gaussian integers");
    }
    Ok(gi_gcd(x, y)?.is_unit())
}

/// A factorization `unit * primes[0] * primes[1] * ...`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factorization {
    pub unit: GaussianInt,
    /// Gaussian primes with multiplicity, normalized and sorted by norm.
    pub primes: Vec<GaussianInt>,
}

impl Factorization {
    pub fn product(&self) -> GaussianInt {
        self.primes.iter().fold(self.unit, |acc, &p| acc * p)
    }

    /// Distinct primes in order of first appearance.
    pub fn distinct(&self) -> Vec<GaussianInt> {
        let mut out: Vec<GaussianInt> = Vec::new();
        for &p in &self.primes {
            if !out.contains(&p) {
                out.push(p);
            }
        }
        out
    }
}

/// Factor a nonzero Gaussian integer into normalized Gaussian primes and a unit.
pub fn gi_factorize(x: GaussianInt) -> Result<Factorization> {
    if x.is_zero() {
        return domain("cannot factorize zero");
    }
    let mut rest = x;
    let mut primes = Vec::new();
    for p in rational_prime_factors(x.norm()) {
        for pi in gaussian_primes_over(p) {
            while let Some(q) = rest.checked_div(pi) {
                primes.push(pi);
                rest = q;
            }
        }
    }
    debug_assert!(rest.is_unit());
    primes.sort_by_key(|p| (p.norm(), p.re, p.im));
    Ok(Factorization { unit: rest, primes })
}

fn rational_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        if n.is_multiple_of(p) {
            out.push(p);
            while n.is_multiple_of(p) {
                n /= p;
            }
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// Normalized Gaussian primes lying over the rational prime p.
fn gaussian_primes_over(p: u64) -> Vec<GaussianInt> {
    if p == 2 {
        return vec![GaussianInt::new(1, 1)];
    }
    if p % 4 == 3 {
        return vec![GaussianInt::new(p as i64, 0)];
    }
    let mut a = 1u64;
    while a * a < p {
        let b2 = p - a * a;
        let b = (b2 as f64).sqrt().round() as u64;
        if b * b == b2 {
            let pi = GaussianInt::new(a as i64, b as i64).normalize();
            let pi_bar = GaussianInt::new(a as i64, -(b as i64)).normalize();
            return vec![pi, pi_bar];
        }
        a += 1;
    }
    unreachable!("p = 1 (mod 4) is a sum of two squares")
}

/// A ratio `num / den` of Gaussian integers in canonical form.
///
/// `gcd(num, den)` is a unit and `den` is the associate with `re > 0, im >= 0`,
/// so two canonical values are equal iff their fields are equal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GaussianRational {
    num: GaussianInt,
    den: GaussianInt,
}

impl GaussianRational {
    pub fn new(num: GaussianInt, den: GaussianInt) -> Result<Self> {
        gr_reduce(num, den)
    }

    pub fn from_int(x: GaussianInt) -> Self {
        GaussianRational { num: x, den: ONE }
    }

    pub fn num(&self) -> GaussianInt {
        self.num
    }

    pub fn den(&self) -> GaussianInt {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn to_complex(&self) -> Complex64 {
        self.num.to_complex() / self.den.to_complex()
    }

    pub fn recip(&self) -> Result<Self> {
        gr_reduce(self.den, self.num)
    }

    /// Multiplication by a Gaussian integer (for instance a unit).
    pub fn scale(&self, k: GaussianInt) -> Self {
        gr_reduce(self.num * k, self.den).expect("denominator is nonzero")
    }
}

impl Ord for GaussianRational {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.num, self.den).cmp(&(other.num, other.den))
    }
}

impl PartialOrd for GaussianRational {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for GaussianRational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == ONE {
            write!(f, "{}", self.num)
        } else {
            write!(f, "({})/({})", self.num, self.den)
        }
    }
}

/// Reduce `num / den` to canonical form.
pub fn gr_reduce(num: GaussianInt, den: GaussianInt) -> Result<GaussianRational> {
    if den.is_zero() {
        return domain("zero denominator");
    }
    if num.is_zero() {
        return Ok(GaussianRational { num: ZERO, den: ONE });
    }
    let g = gi_gcd(num, den)?;
    let num = num.checked_div(g).expect("gcd divides numerator");
    let den = den.checked_div(g).expect("gcd divides denominator");
    let u = den.normalizing_unit();
    Ok(GaussianRational { num: u * num, den: u * den })
}

/// `|{m : 1 <= m < n, gcd(m, n) = 1}|`.
///
/// Agrees with Euler's totient for `n >= 2` and gives `0` for `n = 1`.
pub fn restricted_totient(n: u64) -> Result<u64> {
    if n == 0 {
        return domain("totient of 0 is undefined");
    }
    Ok((1..n).filter(|&m| num_integer::gcd(m, n) == 1).count() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g(re: i64, im: i64) -> GaussianInt {
        GaussianInt::new(re, im)
    }

    #[test]
    fn norm_examples() {
        assert_eq!(gi_norm(g(0, 0)), 0);
        assert_eq!(gi_norm(g(1, 2)), 5);
        assert_eq!(gi_norm(g(3, 3)), 18);
    }

    #[test]
    fn gcd_examples() {
        assert_eq!(gi_gcd(g(2, 0), g(1, 1)).unwrap(), g(1, 1));
        assert_eq!(gi_gcd(g(3, 1), g(1, 2)).unwrap(), g(1, 2));
        assert_eq!(gi_gcd(g(5, -7), g(1, 0)).unwrap(), g(1, 0));
        assert_eq!(gi_gcd(g(0, 3), g(0, 0)).unwrap(), g(3, 0));
        assert!(gi_gcd(g(0, 0), g(0, 0)).is_err());
    }

    #[test]
    fn rounding_ties_go_down() {
        assert_eq!(round_half_down(1, 2), 0);
        assert_eq!(round_half_down(-1, 2), -1);
        assert_eq!(round_half_down(3, 2), 1);
        assert_eq!(round_half_down(5, 3), 2);
        assert_eq!(round_half_down(-5, 3), -2);
    }

    #[test]
    fn units() {
        assert!(gi_is_unit(g(0, 1)));
        assert!(gi_is_unit(g(-1, 0)));
        assert!(!gi_is_unit(g(1, 1)));
        assert!(!gi_is_unit(g(0, 0)));
    }

    #[test]
    fn coprimality() {
        assert!(gi_relatively_prime(g(1, 0), g(1, 1)).unwrap());
        assert!(!gi_relatively_prime(g(2, 0), g(1, 1)).unwrap());
        assert!(gi_relatively_prime(g(2, 3), g(3, 2)).unwrap());
        assert!(gi_relatively_prime(g(0, 0), g(1, 0)).is_err());
    }

    #[test]
    fn factorization_examples() {
        let f = gi_factorize(g(2, 0)).unwrap();
        assert_eq!(f.primes, vec![g(1, 1), g(1, 1)]);
        assert_eq!(f.unit, g(0, -1));

        let f = gi_factorize(g(3, 3)).unwrap();
        assert_eq!(f.primes, vec![g(1, 1), g(3, 0)]);
        assert_eq!(f.product(), g(3, 3));

        let f = gi_factorize(g(1, 2)).unwrap();
        assert_eq!(f.primes, vec![g(1, 2)]);
        assert_eq!(f.unit, ONE);

        let f = gi_factorize(g(3, 1)).unwrap();
        assert_eq!(f.distinct(), vec![g(1, 1), g(1, 2)]);
        assert!(gi_factorize(ZERO).is_err());
    }

    #[test]
    fn factorization_round_trip_box() {
        for re in -7..=7 {
            for im in -7..=7 {
                let x = g(re, im);
                if x.is_zero() {
                    continue;
                }
                let f = gi_factorize(x).unwrap();
                assert_eq!(f.product(), x, "{x}");
                assert!(f.unit.is_unit());
                for p in &f.primes {
                    let n = p.norm();
                    let is_rational_prime = |n: u64| n > 1 && (2..n).all(|d| !n.is_multiple_of(d));
                    let inert = p.im == 0 && is_rational_prime(p.re as u64) && p.re % 4 == 3;
                    assert!(is_rational_prime(n) || inert, "{p} is not a Gaussian prime");
                    assert_eq!(*p, p.normalize());
                }
            }
        }
    }

    #[test]
    fn reduce_examples() {
        let r = gr_reduce(g(2, 2), g(2, 0)).unwrap();
        assert_eq!((r.num(), r.den()), (g(1, 1), ONE));
        let r = gr_reduce(ONE, ONE).unwrap();
        assert_eq!((r.num(), r.den()), (ONE, ONE));
        let r = gr_reduce(ONE, g(1, 1)).unwrap();
        assert_eq!(r.den(), g(1, 1));
        assert_eq!(r.num(), ONE);
        let r = gr_reduce(ONE, g(1, -1)).unwrap();
        assert_eq!(r.den(), g(1, 1));
        assert_eq!(r.num(), g(0, 1));
        assert!(gr_reduce(ONE, ZERO).is_err());
    }

    #[test]
    fn totient_examples() {
        assert_eq!(restricted_totient(1).unwrap(), 0);
        assert_eq!(restricted_totient(3).unwrap(), 2);
        assert_eq!(restricted_totient(7).unwrap(), 6);
        assert!(restricted_totient(0).is_err());
    }

    #[test]
    fn totient_matches_product_formula() {
        // Independent route: n * prod (1 - 1/p), valid for n >= 2.
        for n in 2..=64u64 {
            let mut phi = n;
            for p in rational_prime_factors(n) {
                phi = phi / p * (p - 1);
            }
            assert_eq!(restricted_totient(n).unwrap(), phi, "n = {n}");
        }
    }

    fn small() -> impl Strategy<Value = GaussianInt> {
        (-40i64..=40, -40i64..=40).prop_map(|(a, b)| GaussianInt::new(a, b))
    }

    proptest! {
        #[test]
        fn norm_is_multiplicative(x in small(), y in small()) {
            prop_assert_eq!((x * y).norm(), x.norm() * y.norm());
        }

        #[test]
        fn gcd_divides_both(x in small(), y in small()) {
            prop_assume!(!x.is_zero() && !y.is_zero());
            let d = gi_gcd(x, y).unwrap();
            let (_, r1) = x.div_rem(d).unwrap();
            let (_, r2) = y.div_rem(d).unwrap();
            prop_assert!(r1.is_zero() && r2.is_zero());
            // Any common divisor of small norm divides the gcd.
            for re in -6i64..=6 {
                for im in -6i64..=6 {
                    let c = GaussianInt::new(re, im);
                    if !c.is_zero() && c.divides(x) && c.divides(y) {
                        prop_assert!(c.divides(d));
                    }
                }
            }
        }

        #[test]
        fn euclidean_remainder_shrinks(x in small(), y in small()) {
            prop_assume!(!y.is_zero());
            let (q, r) = x.div_rem(y).unwrap();
            prop_assert_eq!(q * y + r, x);
            prop_assert!(r.norm() < y.norm());
        }

        #[test]
        fn canonical_equality_matches_complex(a in small(), b in small(), c in small(), d in small()) {
            prop_assume!(!b.is_zero() && !d.is_zero());
            let r1 = gr_reduce(a, b).unwrap();
            let r2 = gr_reduce(c, d).unwrap();
            let close = (r1.to_complex() - r2.to_complex()).norm() < 1e-12;
            prop_assert_eq!(r1 == r2, close);
            let v = a.to_complex() / b.to_complex();
            prop_assert!((r1.to_complex() - v).norm() < 1e-12);
            prop_assert_eq!(r1.den(), r1.den().normalize());
        }
    }
}
