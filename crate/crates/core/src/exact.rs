//! Exact rationals of the form Σ c_i · b^{e_i} with rational coefficients
//! and arbitrary-size integer exponents.
//!
//! Liouville-type approximants have denominators like 10^(14!), far beyond
//! what can be written out digit by digit. Keeping the exponent symbolic
//! makes sums, products, comparisons, floors and gcds with such numbers
//! exact and cheap. Terms with |e| ≤ [`FOLD`] are folded into an ordinary
//! rational, so small numbers are plain `BigRational`s.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Exponents up to this size are multiplied out.
pub const FOLD: u64 = 4096;
/// Terms closer than this (in exponent) are evaluated together when signs
/// are decided.
const CLUSTER_GAP: u64 = 1024;
const ADJUST_STEPS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactNum {
    /// 0 when there are no symbolic powers.
    base: u32,
    /// Sorted by exponent, largest first; coefficients nonzero.
    terms: Vec<(BigInt, BigRational)>,
}

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn base_pow(b: u32, e: u64) -> BigInt {
    Pow::pow(BigInt::from(b), e)
}

fn base_pow_signed(b: u32, e: &BigInt) -> BigRational {
    let m = e.abs().to_u64().expect("folded exponent");
    let v = BigRational::from_integer(base_pow(b, m));
    if e.is_negative() {
        v.recip()
    } else {
        v
    }
}

/// Largest v with b^v | n (n ≠ 0).
fn base_valuation(n: &BigInt, b: u32) -> u64 {
    let bb = BigInt::from(b);
    if !(n % &bb).is_zero() {
        return 0;
    }
    // grow the probe power geometrically, then refine
    let mut pows = vec![bb.clone()];
    while (n % pows.last().unwrap()).is_zero() {
        let l = pows.last().unwrap();
        if l.bits() > n.bits() {
            break;
        }
        pows.push(l * l);
    }
    let mut m = n.clone();
    let mut v = 0u64;
    for (i, pw) in pows.iter().enumerate().rev() {
        while (&m % pw).is_zero() && !m.is_zero() {
            m /= pw;
            v += 1u64 << i;
        }
    }
    v
}

/// Moves factors of b out of the coefficient into the exponent.
fn strip(b: u32, e: BigInt, c: BigRational) -> (BigInt, BigRational) {
    let vn = base_valuation(c.numer(), b);
    let vd = base_valuation(c.denom(), b);
    if vn == 0 && vd == 0 {
        return (e, c);
    }
    let n = c.numer() / base_pow(b, vn);
    let d = c.denom() / base_pow(b, vd);
    (e + BigInt::from(vn) - BigInt::from(vd), BigRational::new(n, d))
}

/// log10 |n| for a nonzero big integer.
pub fn log10_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.abs().to_f64().unwrap().log10();
    }
    let shift = bits - 64;
    let top: BigInt = n.abs() >> shift;
    top.to_f64().unwrap().log10() + shift as f64 * std::f64::consts::LOG10_2
}

fn log10_rational(r: &BigRational) -> f64 {
    log10_bigint(r.numer()) - log10_bigint(r.denom())
}

impl ExactNum {
    pub fn zero() -> Self {
        ExactNum {
            base: 0,
            terms: Vec::new(),
        }
    }

    pub fn one() -> Self {
        Self::from_rational(BigRational::one())
    }

    pub fn from_rational(r: BigRational) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        ExactNum {
            base: 0,
            terms: vec![(BigInt::zero(), r)],
        }
    }

    pub fn from_int(n: impl Into<BigInt>) -> Self {
        Self::from_rational(BigRational::from_integer(n.into()))
    }

    /// c · b^e.
    pub fn monomial(c: BigRational, base: u32, e: BigInt) -> Self {
        assert!(base >= 2, "base must be >= 2");
        let mut m = BTreeMap::new();
        m.insert(e, c);
        Self::normalize(base, m)
    }

    /// b^e.
    pub fn power(base: u32, e: BigInt) -> Self {
        Self::monomial(BigRational::one(), base, e)
    }

    /// Canonical form: coefficients carry no factor of the base in
    /// numerator or denominator (except the folded plain part), and
    /// symbolic exponents are more than FOLD apart.
    fn normalize(base: u32, map: BTreeMap<BigInt, BigRational>) -> Self {
        let mut terms: Vec<(BigInt, BigRational)> = map.into_iter().filter(|t| !t.1.is_zero()).collect();
        if base == 0 {
            let s: BigRational = terms.into_iter().map(|t| t.1).sum();
            return Self::from_rational(s);
        }
        let fold = BigInt::from(FOLD);
        loop {
            let mut acc: BTreeMap<BigInt, BigRational> = BTreeMap::new();
            for (e, c) in terms.drain(..) {
                let (e, c) = strip(base, e, c);
                let (e, c) = if e.abs() <= fold {
                    (BigInt::zero(), c * base_pow_signed(base, &e))
                } else {
                    (e, c)
                };
                *acc.entry(e).or_insert_with(BigRational::zero) += c;
            }
            let mut merged: Vec<(BigInt, BigRational)> = Vec::new();
            let mut changed = false;
            for (e, c) in acc.into_iter().filter(|t| !t.1.is_zero()) {
                if let Some(last) = merged.last_mut() {
                    let gap = &e - &last.0;
                    if gap <= fold {
                        last.1 += c * BigRational::from_integer(base_pow(base, gap.to_u64().unwrap()));
                        changed = true;
                        continue;
                    }
                }
                merged.push((e, c));
            }
            terms = merged;
            if !changed {
                break;
            }
        }
        terms.retain(|t| !t.1.is_zero());
        // the plain part stays an ordinary rational
        let mut out: Vec<(BigInt, BigRational)> = Vec::new();
        for (e, c) in terms {
            if e.is_zero() {
                out.push((e, c));
            } else {
                let (e2, c2) = strip(base, e, c);
                out.push((e2, c2));
            }
        }
        out.sort_by(|a, b| b.0.cmp(&a.0));
        let base = if out.iter().all(|(e, _)| e.is_zero()) { 0 } else { base };
        ExactNum { base, terms: out }
    }

    fn to_map(&self) -> BTreeMap<BigInt, BigRational> {
        self.terms.iter().cloned().collect()
    }

    fn joint_base(&self, other: &ExactNum) -> u32 {
        match (self.base, other.base) {
            (0, b) | (b, 0) => b,
            (a, b) if a == b => a,
            (a, b) => panic!("mixing numbers in bases {a} and {b}"),
        }
    }

    pub fn base(&self) -> u32 {
        self.base
    }

    pub fn terms(&self) -> &[(BigInt, BigRational)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_one_value(&self) -> bool {
        self.as_rational().is_some_and(|r| r.is_one())
    }

    pub fn is_plain(&self) -> bool {
        self.base == 0
    }

    /// The value as an ordinary rational when no symbolic powers remain.
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.base != 0 {
            return None;
        }
        Some(self.terms.first().map(|t| t.1.clone()).unwrap_or_else(BigRational::zero))
    }

    /// Multiplies out all powers if the result has at most `max_digits`
    /// digits of exponent.
    pub fn materialize(&self, max_digits: u64) -> Option<BigRational> {
        if self.base == 0 {
            return self.as_rational();
        }
        let lim = (max_digits as f64 / (self.base as f64).log10()) as u64;
        let mut s = BigRational::zero();
        for (e, c) in &self.terms {
            if e.abs() > BigInt::from(lim) {
                return None;
            }
            s += c * base_pow_signed(self.base, e);
        }
        Some(s)
    }

    pub fn neg(&self) -> Self {
        ExactNum {
            base: self.base,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }

    pub fn add(&self, other: &ExactNum) -> Self {
        let base = self.joint_base(other);
        let mut m = self.to_map();
        for (e, c) in &other.terms {
            *m.entry(e.clone()).or_insert_with(BigRational::zero) += c;
        }
        Self::normalize(base, m)
    }

    pub fn sub(&self, other: &ExactNum) -> Self {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &ExactNum) -> Self {
        let base = self.joint_base(other);
        let mut m: BTreeMap<BigInt, BigRational> = BTreeMap::new();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &other.terms {
                *m.entry(e1 + e2).or_insert_with(BigRational::zero) += c1 * c2;
            }
        }
        Self::normalize(base, m)
    }

    pub fn scale(&self, r: &BigRational) -> Self {
        if r.is_zero() {
            return Self::zero();
        }
        ExactNum {
            base: self.base,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), c * r)).collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = ExactNum::one();
        let mut sq = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&sq);
            }
            n >>= 1;
            if n > 0 {
                sq = sq.mul(&sq);
            }
        }
        acc
    }

    pub fn is_monomial(&self) -> bool {
        self.terms.len() == 1
    }

    /// 1/x for a single-term x.
    pub fn recip_monomial(&self) -> Option<Self> {
        if !self.is_monomial() {
            return None;
        }
        let (e, c) = &self.terms[0];
        Some(ExactNum {
            base: self.base,
            terms: vec![(-e, c.recip())],
        })
    }

    /// Clusters of nearby exponents: (lowest exponent, exact value / b^lowest).
    fn clusters(&self) -> Vec<(BigInt, BigRational)> {
        let mut out: Vec<(BigInt, BigRational)> = Vec::new();
        let mut cur: Vec<&(BigInt, BigRational)> = Vec::new();
        let flush = |cur: &mut Vec<&(BigInt, BigRational)>, out: &mut Vec<(BigInt, BigRational)>| {
            if let Some(last) = cur.last() {
                let emin = last.0.clone();
                let mut r = BigRational::zero();
                for (e, c) in cur.iter().map(|t| (&t.0, &t.1)) {
                    let d = (e - &emin).to_u64().unwrap();
                    r += c * BigRational::from_integer(base_pow(self.base.max(2), d));
                }
                out.push((emin, r));
                cur.clear();
            }
        };
        for t in &self.terms {
            if let Some(last) = cur.last() {
                if &last.0 - &t.0 > BigInt::from(CLUSTER_GAP) {
                    flush(&mut cur, &mut out);
                }
            }
            cur.push(t);
        }
        flush(&mut cur, &mut out);
        out
    }

    /// Exact sign: −1, 0 or 1.
    pub fn signum(&self) -> Result<i8> {
        let sgn = |r: &BigRational| -> i8 {
            if r.is_positive() {
                1
            } else if r.is_negative() {
                -1
            } else {
                0
            }
        };
        let mut cl = self.clusters();
        loop {
            while cl.first().is_some_and(|c| c.1.is_zero()) {
                cl.remove(0);
            }
            cl.retain(|c| !c.1.is_zero());
            match cl.len() {
                0 => return Ok(0),
                1 => return Ok(sgn(&cl[0].1)),
                _ => {}
            }
            let rest: BigRational = cl[1..].iter().map(|c| c.1.abs()).sum();
            let top = cl[0].1.abs();
            let g = &cl[0].0 - &cl[1].0;
            let m = &rest / &top;
            // need b^g > m; b^g >= 2^g
            let bits = m.numer().bits() as i64 - m.denom().bits() as i64 + 1;
            if m < BigRational::one() || g > BigInt::from(bits.max(0)) {
                return Ok(sgn(&cl[0].1));
            }
            let gu = g.to_u64().unwrap();
            let bg = BigRational::from_integer(base_pow(self.base.max(2), gu));
            if &top * &bg > rest {
                return Ok(sgn(&cl[0].1));
            }
            let merged = &cl[0].1 * &bg + &cl[1].1;
            let e = cl[1].0.clone();
            cl.drain(0..2);
            cl.insert(0, (e, merged));
        }
    }

    pub fn cmp_exact(&self, other: &ExactNum) -> Result<std::cmp::Ordering> {
        Ok(match self.sub(other).signum()? {
            -1 => std::cmp::Ordering::Less,
            0 => std::cmp::Ordering::Equal,
            _ => std::cmp::Ordering::Greater,
        })
    }

    pub fn lt(&self, other: &ExactNum) -> Result<bool> {
        Ok(self.cmp_exact(other)? == std::cmp::Ordering::Less)
    }

    pub fn le(&self, other: &ExactNum) -> Result<bool> {
        Ok(self.cmp_exact(other)? != std::cmp::Ordering::Greater)
    }

    /// log10 |x|, approximately; None for zero.
    pub fn approx_log10(&self) -> Option<f64> {
        let cl = self.clusters();
        let (e, r) = cl.into_iter().find(|c| !c.1.is_zero())?;
        let lb = if self.base == 0 { 0.0 } else { (self.base as f64).log10() };
        Some(log10_rational(&r) + e.to_f64().unwrap() * lb)
    }

    /// Nearest f64 (may be ±inf or 0 for out-of-range values).
    pub fn approx_f64(&self) -> f64 {
        match (self.approx_log10(), self.signum()) {
            (None, _) => 0.0,
            (Some(l), Ok(s)) => s as f64 * 10f64.powf(l),
            (Some(l), Err(_)) => 10f64.powf(l),
        }
    }

    /// Short scientific rendering, e.g. `1.0000e+87178291200`.
    pub fn approx_string(&self) -> String {
        match self.approx_log10() {
            None => "0".to_string(),
            Some(l) => {
                let s = if self.signum().unwrap_or(1) < 0 { "-" } else { "" };
                let e = l.floor();
                format!("{s}{:.6}e{:+}", 10f64.powf(l - e), e as i64)
            }
        }
    }

    /// ⌊x⌋.
    pub fn floor(&self) -> Result<ExactNum> {
        if let Some(r) = self.as_rational() {
            return Ok(Self::from_rational(BigRational::from_integer(r.floor().to_integer())));
        }
        // integer-part terms c·b^e (e > 0) contribute c·b^e − rem/d with
        // rem = n·b^e mod d; what is left is a small quantity
        let mut integral = ExactNum::zero();
        let mut small = ExactNum::zero();
        for (e, c) in &self.terms {
            if e.is_positive() {
                let d = c.denom();
                let rem = (c.numer().mod_floor(d) * BigInt::from(self.base).modpow(e, d)).mod_floor(d);
                let fr = BigRational::new(rem, d.clone());
                integral = integral.add(&ExactNum::monomial(c.clone(), self.base, e.clone()));
                integral = integral.sub(&ExactNum::from_rational(fr.clone()));
                small = small.add(&ExactNum::from_rational(fr));
            } else if e.is_zero() {
                let fl = BigRational::from_integer(c.floor().to_integer());
                integral = integral.add(&ExactNum::from_rational(fl.clone()));
                small = small.add(&ExactNum::from_rational(c - fl));
            } else {
                small = small.add(&ExactNum {
                    base: self.base,
                    terms: vec![(e.clone(), c.clone())],
                });
            }
        }
        if let Some(r) = small.materialize(100_000) {
            let fl = BigRational::from_integer(r.floor().to_integer());
            return Ok(integral.add(&ExactNum::from_rational(fl)));
        }
        let guess = small.approx_f64().floor();
        let mut c0 = ExactNum::from_int(BigInt::from(guess as i64));
        for _ in 0..ADJUST_STEPS {
            if small.lt(&c0)? {
                c0 = c0.sub(&ExactNum::one());
            } else if !small.lt(&c0.add(&ExactNum::one()))? {
                c0 = c0.add(&ExactNum::one());
            } else {
                return Ok(integral.add(&c0));
            }
        }
        Err(Error::Undecidable("floor did not settle".into()))
    }

    pub fn ceil(&self) -> Result<ExactNum> {
        Ok(self.neg().floor()?.neg())
    }

    /// ⌊num / den⌋ for den > 0.
    pub fn floor_div(num: &ExactNum, den: &ExactNum) -> Result<ExactNum> {
        if den.signum()? <= 0 {
            return Err(Error::InvalidArgument("floor_div needs a positive divisor".into()));
        }
        if let Some(inv) = den.recip_monomial() {
            return num.mul(&inv).floor();
        }
        // den = L (1 + u), L the leading cluster as a monomial, |u| tiny
        let cl = den.clusters();
        let (e, r) = cl.iter().find(|c| !c.1.is_zero()).cloned().unwrap();
        let lead = ExactNum::monomial(r, den.base.max(2), e);
        let inv = lead.recip_monomial().unwrap();
        let u = den.sub(&lead).mul(&inv);
        let mut series = ExactNum::one();
        let mut term = ExactNum::one();
        for _ in 0..4 {
            term = term.mul(&u).neg();
            series = series.add(&term);
        }
        let mut c = num.mul(&inv).mul(&series).floor()?;
        for _ in 0..ADJUST_STEPS {
            if num.lt(&c.mul(den))? {
                c = c.sub(&ExactNum::one());
            } else if !num.lt(&c.add(&ExactNum::one()).mul(den))? {
                c = c.add(&ExactNum::one());
            } else {
                return Ok(c);
            }
        }
        Err(Error::Undecidable("quotient did not settle".into()))
    }

    pub fn ceil_div(num: &ExactNum, den: &ExactNum) -> Result<ExactNum> {
        Ok(Self::floor_div(&num.neg(), den)?.neg())
    }

    /// The value as a big integer, if it is one and has few digits.
    pub fn to_bigint(&self, max_digits: u64) -> Option<BigInt> {
        let r = self.materialize(max_digits)?;
        r.is_integer().then(|| r.to_integer())
    }

    /// x mod m for integer-valued x with nonnegative exponents.
    fn mod_int(&self, m: &BigInt) -> Result<BigInt> {
        let d = self
            .terms
            .iter()
            .fold(BigInt::one(), |acc, (_, c)| acc.lcm(c.denom()));
        let md = m * &d;
        let mut s = BigInt::zero();
        for (e, c) in &self.terms {
            if e.is_negative() {
                return Err(Error::Unsupported("modular reduction with negative exponents".into()));
            }
            let coeff = (c * BigRational::from_integer(d.clone())).to_integer();
            let pw = if e.is_zero() {
                BigInt::one()
            } else {
                BigInt::from(self.base).modpow(e, &md)
            };
            s = (s + coeff * pw).mod_floor(&md);
        }
        if !(&s % &d).is_zero() {
            return Err(Error::InvalidArgument("value is not an integer".into()));
        }
        Ok((s / d).mod_floor(m))
    }

    /// gcd of two positive integers.
    pub fn gcd(a: &ExactNum, b: &ExactNum) -> Result<ExactNum> {
        if let (Some(x), Some(y)) = (a.to_bigint(200_000), b.to_bigint(200_000)) {
            return Ok(ExactNum::from_int(x.gcd(&y)));
        }
        if a.is_monomial() && b.is_monomial() && a.base != 0 && b.base != 0 {
            let (ea, ca) = &a.terms[0];
            let (eb, cb) = &b.terms[0];
            let base = BigInt::from(a.joint_base(b));
            if ca.is_integer() && cb.is_integer() && !ea.is_negative() && !eb.is_negative() {
                let (na, nb) = (ca.to_integer(), cb.to_integer());
                if na.gcd(&base).is_one() && nb.gcd(&base).is_one() {
                    let g = BigRational::from_integer(na.gcd(&nb));
                    return Ok(ExactNum::monomial(g, a.base, ea.clone().min(eb.clone())));
                }
            }
        }
        let (mono, other) = if a.is_monomial() {
            (a, b)
        } else if b.is_monomial() {
            (b, a)
        } else {
            return Err(Error::Unsupported("gcd of two multi-term numbers".into()));
        };
        let (e, c) = &mono.terms[0];
        if !c.is_integer() || e.is_negative() {
            return Err(Error::InvalidArgument("gcd needs integers".into()));
        }
        let n = c.to_integer().abs();
        let mut primes = small_prime_factors(&n)?;
        for p in small_prime_factors(&BigInt::from(mono.base))? {
            if !primes.contains(&p) {
                primes.push(p);
            }
        }
        let mut g = BigInt::one();
        for p in primes {
            let vn = valuation(&n, &p) + e.clone() * valuation(&BigInt::from(mono.base), &p);
            let mut v = 0u64;
            let mut pk = p.clone();
            while other.mod_int(&pk)?.is_zero() {
                v += 1;
                if BigInt::from(v) >= vn || v > 4096 {
                    break;
                }
                pk *= &p;
            }
            let v = BigInt::from(v).min(vn.clone());
            if v > BigInt::from(4096) {
                return Err(Error::Undecidable("gcd exponent too large".into()));
            }
            g *= Pow::pow(&p, v.to_u64().unwrap());
        }
        Ok(ExactNum::from_int(g))
    }
}

fn valuation(n: &BigInt, p: &BigInt) -> BigInt {
    let mut v = 0;
    let mut m = n.clone();
    while !m.is_zero() && (&m % p).is_zero() {
        m /= p;
        v += 1;
    }
    BigInt::from(v)
}

fn small_prime_factors(n: &BigInt) -> Result<Vec<BigInt>> {
    let mut m = n.abs();
    let mut out = Vec::new();
    let mut p = BigInt::from(2);
    while &p * &p <= m {
        if p > BigInt::from(1_000_000) {
            return Err(Error::Unsupported("factoring a large coefficient".into()));
        }
        if (&m % &p).is_zero() {
            out.push(p.clone());
            while (&m % &p).is_zero() {
                m /= &p;
            }
        }
        p += 1;
    }
    if m > BigInt::one() {
        out.push(m);
    }
    Ok(out)
}

fn fmt_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("not a rational: `{s}`"));
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(n, d));
    }
    if let Ok(n) = BigInt::from_str(s) {
        return Ok(BigRational::from_integer(n));
    }
    // decimal notation such as 0.01 or 1e-6
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i64>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (ip, fp) = mant.split_once('.').unwrap_or((mant, ""));
    let digits = format!("{ip}{fp}");
    let n = BigInt::from_str(&digits).map_err(|_| bad())?;
    let e = exp - fp.len() as i64;
    let ten = BigInt::from(10);
    Ok(if e >= 0 {
        BigRational::from_integer(n * Pow::pow(&ten, e as u64))
    } else {
        BigRational::new(n, Pow::pow(&ten, (-e) as u64))
    })
}

/// Smallest rational of the form m / 10^6 that is ≥ v.
pub fn rational_ceil_f64(v: f64) -> BigRational {
    let scaled = (v * 1e6).ceil();
    let r = BigRational::new(BigInt::from(scaled as i128), BigInt::from(1_000_000));
    if r.to_f64().unwrap() < v {
        r + rat(1, 1_000_000)
    } else {
        r
    }
}

impl fmt::Display for ExactNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = self.as_rational() {
            return write!(f, "{}", fmt_rational(&r));
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(e, c)| format!("{}*{}^{}", fmt_rational(c), self.base, e))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for ExactNum {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if !s.contains('^') {
            return Ok(ExactNum::from_rational(parse_rational(s)?));
        }
        let mut acc = ExactNum::zero();
        for part in s.split(" + ") {
            let bad = || Error::Parse(format!("bad term `{part}`"));
            let (c, rest) = part.split_once('*').ok_or_else(bad)?;
            let (b, e) = rest.split_once('^').ok_or_else(bad)?;
            let base: u32 = b.trim().parse().map_err(|_| bad())?;
            if base < 2 {
                return Err(bad());
            }
            let e = BigInt::from_str(e.trim()).map_err(|_| bad())?;
            acc = acc.add(&ExactNum::monomial(parse_rational(c)?, base, e));
        }
        Ok(acc)
    }
}

impl Serialize for ExactNum {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ExactNum {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Serde helpers for `BigRational` as "n/d" strings.
pub mod rational_str {
    use super::*;

    pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&fmt_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<BigRational, D::Error> {
        let s = String::deserialize(d)?;
        parse_rational(&s).map_err(serde::de::Error::custom)
    }
}

pub fn rational_to_string(r: &BigRational) -> String {
    fmt_rational(r)
}

/// Nearest f64 (NaN when out of range).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(e: u64) -> BigInt {
        BigInt::from(e)
    }

    #[test]
    fn folding_small_powers() {
        let x = ExactNum::power(10, big(3));
        assert_eq!(x, ExactNum::from_int(1000));
        assert!(x.is_plain());
    }

    #[test]
    fn signs_with_huge_gaps() {
        let e = BigInt::from(87_178_291_200u64);
        let a = ExactNum::power(10, e.clone());
        let b = a.sub(&ExactNum::from_int(1));
        assert_eq!(b.signum().unwrap(), 1);
        assert!(b.lt(&a).unwrap());
        let tiny = ExactNum::power(10, -e);
        assert_eq!(tiny.sub(&ExactNum::from_rational(rat(1, 1_000_000))).signum().unwrap(), -1);
        assert_eq!(a.sub(&a).signum().unwrap(), 0);
    }

    #[test]
    fn sign_with_cancelling_top_cluster() {
        let e = BigInt::from(10_000);
        let a = ExactNum::power(10, e.clone()).scale(&rat(3, 1));
        let b = ExactNum::power(10, e + 1).scale(&rat(3, 10));
        let c = a.sub(&b).add(&ExactNum::from_rational(rat(-1, 7)));
        assert_eq!(c.signum().unwrap(), -1);
    }

    #[test]
    fn floor_of_large_monomial() {
        // ⌊10^5000 / 3⌋ = (10^5000 − 1)/3
        let x = ExactNum::monomial(rat(1, 3), 10, BigInt::from(5000));
        let f = x.floor().unwrap();
        let expect = ExactNum::power(10, BigInt::from(5000))
            .sub(&ExactNum::one())
            .scale(&rat(1, 3));
        assert_eq!(f.sub(&expect).signum().unwrap(), 0);
        assert_eq!(ExactNum::from_rational(rat(-7, 2)).floor().unwrap(), ExactNum::from_int(-4));
    }

    #[test]
    fn floor_div_non_monomial() {
        // ⌊10^6000 / (10^5000 − 1)⌋ = 10^1000
        let num = ExactNum::power(10, big(6000));
        let den = ExactNum::power(10, big(5000)).sub(&ExactNum::one());
        let q = ExactNum::floor_div(&num, &den).unwrap();
        assert_eq!(q, ExactNum::power(10, big(1000)));
        let c = ExactNum::ceil_div(&num, &den).unwrap();
        assert_eq!(c, ExactNum::power(10, big(1000)).add(&ExactNum::one()));
    }

    #[test]
    fn gcd_with_power() {
        let e = BigInt::from(10_000);
        let p = ExactNum::power(10, e.clone());
        let q = ExactNum::power(10, e).add(&ExactNum::from_int(40));
        assert_eq!(ExactNum::gcd(&p, &q).unwrap(), ExactNum::from_int(40));
        assert_eq!(
            ExactNum::gcd(&ExactNum::from_int(6), &ExactNum::from_int(4)).unwrap(),
            ExactNum::from_int(2)
        );
    }

    #[test]
    fn string_round_trip() {
        let x = ExactNum::power(10, big(9000))
            .scale(&rat(-3, 7))
            .add(&ExactNum::from_rational(rat(5, 2)));
        let s = x.to_string();
        assert_eq!(s.parse::<ExactNum>().unwrap(), x);
        assert_eq!("12/8".parse::<ExactNum>().unwrap(), ExactNum::from_rational(rat(3, 2)));
        assert_eq!(parse_rational("0.01").unwrap(), rat(1, 100));
        assert_eq!(parse_rational("1e-6").unwrap(), rat(1, 1_000_000));
    }
}
