//! Exact scalars in ℚ(√2, √3, √5, …).
//!
//! A [`Scalar`] is a finite sum `Σ q_r √r` where every `r` is a square-free
//! product of distinct primes and `q_r` is a nonzero rational. Square roots of
//! distinct square-free integers are linearly independent over ℚ, so the
//! representation is canonical: two scalars are equal iff their term maps are
//! equal, and a scalar is zero iff it has no terms.
//!
//! The radical part `r` is stored as a bitmask over [`PRIMES`], which makes
//! radical multiplication a XOR plus a rational factor for the shared primes.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::LegendreError;

/// Primes available as radical factors. Bit `k` of a radical mask stands for `PRIMES[k]`.
pub const PRIMES: [u64; 64] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311,
];

/// Exact element of ℚ adjoined square roots of primes up to 311.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Scalar {
    terms: BTreeMap<u64, BigRational>,
}

fn radical_value(mask: u64) -> BigUint {
    let mut v = BigUint::one();
    let mut m = mask;
    while m != 0 {
        let k = m.trailing_zeros() as usize;
        v *= PRIMES[k];
        m &= m - 1;
    }
    v
}

/// Splits `n` into `k² · r` with `r` square-free; returns `(k, mask(r))`.
fn square_free_split(mut n: u64) -> Result<(u64, u64), LegendreError> {
    let original = n;
    let mut k = 1u64;
    let mut mask = 0u64;
    for (bit, &p) in PRIMES.iter().enumerate() {
        if n == 1 {
            break;
        }
        let mut e = 0;
        while n % p == 0 {
            n /= p;
            e += 1;
        }
        for _ in 0..e / 2 {
            k *= p;
        }
        if e % 2 == 1 {
            mask |= 1 << bit;
        }
    }
    if n != 1 {
        // A remaining cofactor may still be a perfect square of a large prime.
        let s = (n as f64).sqrt().round() as u64;
        if s * s == n {
            k *= s;
        } else {
            return Err(LegendreError::UnsupportedRadical(original));
        }
    }
    Ok((k, mask))
}

fn rational_from_u64(n: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

impl Scalar {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::from_int(1)
    }

    pub fn from_int(n: i64) -> Self {
        Self::from_rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn from_frac(num: i64, den: i64) -> Self {
        Self::from_rational(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(q: BigRational) -> Self {
        let mut terms = BTreeMap::new();
        if !q.is_zero() {
            terms.insert(0, q);
        }
        Self { terms }
    }

    /// `√n` for a nonnegative integer whose odd-power prime factors are all in [`PRIMES`].
    pub fn sqrt_int(n: u64) -> Result<Self, LegendreError> {
        if n == 0 {
            return Ok(Self::zero());
        }
        let (k, mask) = square_free_split(n)?;
        let mut terms = BTreeMap::new();
        terms.insert(mask, rational_from_u64(k));
        Ok(Self { terms })
    }

    /// `q · √n`.
    pub fn rational_sqrt(q: BigRational, n: u64) -> Result<Self, LegendreError> {
        Ok(Self::sqrt_int(n)?.scale(&q))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The rational value if the scalar carries no radicals.
    pub fn as_rational(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&0).cloned(),
            _ => None,
        }
    }

    pub fn is_rational(&self) -> bool {
        self.as_rational().is_some()
    }

    /// Terms as `(coefficient, radicand)` pairs, radicand ascending by mask.
    pub fn terms(&self) -> impl Iterator<Item = (&BigRational, BigUint)> + '_ {
        self.terms.iter().map(|(m, q)| (q, radical_value(*m)))
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(m, c)| (*m, c * q)).collect(),
        }
    }

    pub fn scale_int(&self, n: i64) -> Self {
        self.scale(&BigRational::from_integer(BigInt::from(n)))
    }

    pub fn div_int(&self, n: i64) -> Self {
        assert!(n != 0, "division of a scalar by zero");
        self.scale(&BigRational::new(BigInt::one(), BigInt::from(n)))
    }

    /// Multiplies by `√n`.
    pub fn mul_sqrt(&self, n: u64) -> Self {
        let root = Self::sqrt_int(n).expect("radicand outside the supported prime table");
        self * &root
    }

    fn add_term(&mut self, mask: u64, q: BigRational) {
        if q.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(mask) {
            Entry::Vacant(e) => {
                e.insert(q);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += q;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn mul_ref(&self, other: &Scalar) -> Scalar {
        let mut out = Scalar::zero();
        for (ma, qa) in &self.terms {
            for (mb, qb) in &other.terms {
                let shared = ma & mb;
                let mut q = qa * qb;
                if shared != 0 {
                    q *= BigRational::from_integer(BigInt::from(radical_value(shared)));
                }
                out.add_term(ma ^ mb, q);
            }
        }
        out
    }

    /// Division restricted to divisors that are a rational multiple of a single radical.
    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar, LegendreError> {
        match other.terms.len() {
            0 => Err(LegendreError::DivisionByZero),
            1 => {
                let (mask, q) = other.terms.iter().next().unwrap();
                // 1 / (q √r) = √r / (q r)
                let r = BigRational::from_integer(BigInt::from(radical_value(*mask)));
                let inv_coeff = (q * r).recip();
                let mut inv = BTreeMap::new();
                inv.insert(*mask, inv_coeff);
                Ok(self.mul_ref(&Scalar { terms: inv }))
            }
            _ => Err(LegendreError::UnsupportedDivision(other.to_string())),
        }
    }

    /// Fixed-point approximation `Σ q_r ⌊√r · 2^bits⌋ / 2^bits` and its error bound `Σ |q_r| / 2^bits`.
    fn approximate(&self, bits: u32) -> (BigRational, BigRational) {
        let denom = BigInt::one() << bits;
        let mut value = BigRational::zero();
        let mut err = BigRational::zero();
        for (mask, q) in &self.terms {
            if *mask == 0 {
                value += q;
                continue;
            }
            let r = radical_value(*mask) << (2 * bits as usize);
            let root = BigInt::from_biguint(Sign::Plus, r.sqrt());
            value += q * BigRational::new(root, denom.clone());
            err += q.abs() / BigRational::from_integer(denom.clone());
        }
        (value, err)
    }

    /// Nearest double, accurate to well below one ulp.
    pub fn to_f64(&self) -> f64 {
        if let Some(q) = self.as_rational() {
            return q.to_f64().unwrap_or(f64::NAN);
        }
        let (value, _) = self.approximate(200);
        value.to_f64().unwrap_or(f64::NAN)
    }

    /// Exact sign: -1, 0 or 1.
    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            return 0;
        }
        if let Some(q) = self.as_rational() {
            return if q.is_positive() { 1 } else { -1 };
        }
        let mut bits = 64;
        loop {
            let (value, err) = self.approximate(bits);
            if value.abs() > err {
                return if value.is_positive() { 1 } else { -1 };
            }
            // A nonzero element cannot hide below an ever-shrinking error bound.
            bits *= 2;
        }
    }

    pub fn abs(&self) -> Scalar {
        if self.signum() < 0 {
            -self
        } else {
            self.clone()
        }
    }

    /// Maximum of `|x|` over the iterator, zero when empty.
    pub fn max_abs<'a>(items: impl IntoIterator<Item = &'a Scalar>) -> Scalar {
        let mut best = Scalar::zero();
        for x in items {
            let a = x.abs();
            if a > best {
                best = a;
            }
        }
        best
    }
}

impl PartialOrd for Scalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scalar {
    fn cmp(&self, other: &Self) -> Ordering {
        (self - other).signum().cmp(&0)
    }
}

impl From<i64> for Scalar {
    fn from(n: i64) -> Self {
        Scalar::from_int(n)
    }
}

impl From<BigRational> for Scalar {
    fn from(q: BigRational) -> Self {
        Scalar::from_rational(q)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar {
            terms: self.terms.iter().map(|(m, q)| (*m, -q)).collect(),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl AddAssign<&Scalar> for Scalar {
    fn add_assign(&mut self, rhs: &Scalar) {
        for (m, q) in &rhs.terms {
            self.add_term(*m, q.clone());
        }
    }
}

impl SubAssign<&Scalar> for Scalar {
    fn sub_assign(&mut self, rhs: &Scalar) {
        for (m, q) in &rhs.terms {
            self.add_term(*m, -q);
        }
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $body:expr) => {
        impl $tr<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $f(self, rhs: &Scalar) -> Scalar {
                $body(self, rhs)
            }
        }
        impl $tr<Scalar> for Scalar {
            type Output = Scalar;
            fn $f(self, rhs: Scalar) -> Scalar {
                $body(&self, &rhs)
            }
        }
        impl $tr<&Scalar> for Scalar {
            type Output = Scalar;
            fn $f(self, rhs: &Scalar) -> Scalar {
                $body(&self, rhs)
            }
        }
        impl $tr<Scalar> for &Scalar {
            type Output = Scalar;
            fn $f(self, rhs: Scalar) -> Scalar {
                $body(self, &rhs)
            }
        }
    };
}

binop!(Add, add, |a: &Scalar, b: &Scalar| {
    let mut out = a.clone();
    out += b;
    out
});
binop!(Sub, sub, |a: &Scalar, b: &Scalar| {
    let mut out = a.clone();
    out -= b;
    out
});
binop!(Mul, mul, |a: &Scalar, b: &Scalar| a.mul_ref(b));

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Self {
        let mut acc = Scalar::zero();
        for x in iter {
            acc += &x;
        }
        acc
    }
}

fn fmt_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Canonical exact string: terms `p/q` or `p/q*sqrt(r)` joined by `+`.
impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (mask, q) in &self.terms {
            if !first {
                f.write_str("+")?;
            }
            first = false;
            if *mask == 0 {
                f.write_str(&fmt_rational(q))?;
            } else {
                write!(f, "{}*sqrt({})", fmt_rational(q), radical_value(*mask))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({self} ≈ {})", self.to_f64())
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n, d),
        None => (s, "1"),
    };
    let num: BigInt = num.trim().parse().ok()?;
    let den: BigInt = den.trim().parse().ok()?;
    if den.is_zero() {
        return None;
    }
    Some(BigRational::new(num, den))
}

fn parse_sqrt(s: &str) -> Option<u64> {
    s.strip_prefix("sqrt(")?.strip_suffix(')')?.trim().parse().ok()
}

fn parse_term(term: &str) -> Result<Scalar, LegendreError> {
    let bad = || LegendreError::Parse(term.to_string());
    let (negative, body) = match term.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, term),
    };
    if body.is_empty() {
        return Err(bad());
    }
    let value = if let Some(r) = parse_sqrt(body) {
        Scalar::sqrt_int(r)?
    } else if let Some((coeff, radical)) = body.split_once('*') {
        let q = parse_rational(coeff).ok_or_else(bad)?;
        let r = parse_sqrt(radical).ok_or_else(bad)?;
        Scalar::rational_sqrt(q, r)?
    } else {
        Scalar::from_rational(parse_rational(body).ok_or_else(bad)?)
    };
    Ok(if negative { -value } else { value })
}

impl FromStr for Scalar {
    type Err = LegendreError;

    /// Accepts the canonical form plus `-` as a term separator, e.g. `1/2-1/6*sqrt(3)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        if compact.is_empty() {
            return Err(LegendreError::Parse(s.to_string()));
        }
        let mut terms = Vec::new();
        let mut current = String::new();
        for c in compact.chars() {
            match c {
                '+' => {
                    terms.push(std::mem::take(&mut current));
                }
                '-' if !current.is_empty() && !current.ends_with('/') && !current.ends_with('*') => {
                    terms.push(std::mem::take(&mut current));
                    current.push('-');
                }
                _ => current.push(c),
            }
        }
        terms.push(current);
        let mut acc = Scalar::zero();
        for t in terms {
            if t.is_empty() {
                return Err(LegendreError::Parse(s.to_string()));
            }
            acc += &parse_term(&t)?;
        }
        Ok(acc)
    }
}

impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Scalar {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
