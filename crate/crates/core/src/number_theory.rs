//! Diophantine side of the construction: rotation numbers with exact
//! comparison, convergents, Liouville truncations, Euclid data, the choice
//! of (p, q, p′, τ) and the inequality chain that certifies it.
//!
//! Nothing here uses floating point for a decision. Floats only seed
//! candidates, which are then verified and adjusted exactly.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Pow, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::exact::{parse_rational, rat, rational_str, rational_to_string, ExactNum};

const ADJUST: usize = 16;
const MAX_LIOUVILLE_LEVEL: u32 = 30;

fn ex(r: &BigRational) -> ExactNum {
    ExactNum::from_rational(r.clone())
}

fn exi(n: i64) -> ExactNum {
    ExactNum::from_int(n)
}

fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |a, i| a * BigInt::from(i))
}

/// A rotation number that can be compared exactly with rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RotationSpec {
    /// q/p.
    Rational(BigRational),
    /// (a + b√d)/c with d > 0 not a square.
    Quadratic { a: BigInt, b: BigInt, d: BigInt, c: BigInt },
    /// Σ_{j≥1} base^{−j!}.
    Liouville { base: u32 },
    /// Only known to lie in [lo, hi]; decisions inside the interval fail.
    Interval { lo: BigRational, hi: BigRational },
}

impl RotationSpec {
    pub fn golden() -> Self {
        RotationSpec::Quadratic {
            a: BigInt::from(-1),
            b: BigInt::one(),
            d: BigInt::from(5),
            c: BigInt::from(2),
        }
    }

    pub fn rational(q: i64, p: i64) -> Self {
        RotationSpec::Rational(rat(q, p))
    }

    pub fn is_rational(&self) -> bool {
        matches!(self, RotationSpec::Rational(_))
    }

    /// Liouville truncation T_j = q/p with p = base^{j!}.
    pub fn liouville_truncation(base: u32, j: u32) -> (ExactNum, ExactNum) {
        let e = factorial(j);
        let p = ExactNum::power(base, e.clone());
        let mut q = ExactNum::zero();
        for i in 1..=j {
            q = q.add(&ExactNum::power(base, &e - factorial(i)));
        }
        (p, q)
    }

    fn liouville_sum(base: u32, n: u32) -> ExactNum {
        (1..=n).fold(ExactNum::zero(), |s, j| s.add(&ExactNum::power(base, -factorial(j))))
    }

    /// A rational enclosure [lo, hi] of ω; tighter for larger `level`.
    pub fn enclosure(&self, level: u32) -> Result<(BigRational, BigRational)> {
        match self {
            RotationSpec::Rational(r) => Ok((r.clone(), r.clone())),
            RotationSpec::Interval { lo, hi } => Ok((lo.clone(), hi.clone())),
            RotationSpec::Quadratic { a, b, d, c } => {
                let bits = 64u64 << level.min(14);
                let s = (d << (2 * bits)).sqrt();
                let den = BigInt::one() << bits;
                let r_lo = BigRational::new(s.clone(), den.clone());
                let r_hi = BigRational::new(s + 1, den);
                let f = |x: &BigRational| {
                    (BigRational::from_integer(a.clone()) + BigRational::from_integer(b.clone()) * x)
                        / BigRational::from_integer(c.clone())
                };
                let (u, v) = (f(&r_lo), f(&r_hi));
                Ok(if u <= v { (u, v) } else { (v, u) })
            }
            RotationSpec::Liouville { base } => {
                let n = level.clamp(1, 6);
                let t = Self::liouville_sum(*base, n).materialize(10_000).unwrap();
                let tail = BigRational::new(BigInt::from(2), Pow::pow(BigInt::from(*base), factorial(n + 1).to_u64().unwrap()));
                Ok((t.clone(), t + tail))
            }
        }
    }

    pub fn approx_f64(&self) -> f64 {
        let (lo, hi) = self.enclosure(2).expect("enclosure");
        ((lo + hi) / BigRational::from_integer(BigInt::from(2))).to_f64().unwrap_or(f64::NAN)
    }

    /// An exact approximation of ω, better for larger levels.
    pub fn approx_exact(&self, level: u32) -> Result<ExactNum> {
        match self {
            RotationSpec::Liouville { base } => Ok(Self::liouville_sum(*base, level.max(1))),
            _ => {
                let (lo, hi) = self.enclosure(level)?;
                Ok(ex(&((lo + hi) / BigRational::from_integer(BigInt::from(2)))))
            }
        }
    }

    /// Certified lo ≤ ω ≤ hi, tighter for larger levels.
    pub fn bounds(&self, level: u32) -> Result<(ExactNum, ExactNum)> {
        match self {
            RotationSpec::Rational(r) => Ok((ex(r), ex(r))),
            RotationSpec::Liouville { base } => {
                let t = Self::liouville_sum(*base, level.max(1));
                let w = ExactNum::power(*base, -factorial(level.max(1) + 1)).scale(&rat(2, 1));
                Ok((t.clone(), t.add(&w)))
            }
            _ => {
                let (lo, hi) = self.enclosure(level)?;
                Ok((ex(&lo), ex(&hi)))
            }
        }
    }

    /// Exact sign of ω·a + b.
    pub fn sign_affine(&self, a: &ExactNum, b: &ExactNum) -> Result<i8> {
        if a.is_zero() {
            return b.signum();
        }
        match self {
            RotationSpec::Rational(r) => a.mul(&ex(r)).add(b).signum(),
            RotationSpec::Quadratic { a: qa, b: qb, d, c } => {
                // (qa·a + c·b + qb·a·√d)/c
                let u = a.scale(&BigRational::from_integer(qa.clone())).add(&b.scale(&BigRational::from_integer(c.clone())));
                let v = a.scale(&BigRational::from_integer(qb.clone()));
                let su = u.signum()?;
                let sv = v.signum()?;
                let s = if su == 0 || sv == 0 || su == sv {
                    if su != 0 { su } else { sv }
                } else {
                    let d = BigRational::from_integer(d.clone());
                    match u.mul(&u).cmp_exact(&v.mul(&v).scale(&d))? {
                        Ordering::Greater => su,
                        Ordering::Less => sv,
                        Ordering::Equal => 0,
                    }
                };
                Ok(if c.is_negative() { -s } else { s })
            }
            RotationSpec::Interval { lo, hi } => {
                let s1 = a.mul(&ex(lo)).add(b).signum()?;
                let s2 = a.mul(&ex(hi)).add(b).signum()?;
                if s1 == s2 && s1 != 0 {
                    Ok(s1)
                } else {
                    Err(Error::Undecidable("rotation interval too wide for this comparison".into()))
                }
            }
            RotationSpec::Liouville { base } => {
                // ω = T_n + θ with 0 < θ < 2·base^{−(n+1)!}
                let sa = a.signum()?;
                for n in 1..=MAX_LIOUVILLE_LEVEL {
                    let l = a.mul(&Self::liouville_sum(*base, n)).add(b);
                    let w = ExactNum::power(*base, -factorial(n + 1)).scale(&rat(2, 1));
                    let edge = l.add(&a.mul(&w));
                    let (sl, se) = (l.signum()?, edge.signum()?);
                    if sa > 0 {
                        if sl >= 0 {
                            return Ok(1);
                        }
                        if se <= 0 {
                            return Ok(-1);
                        }
                    } else {
                        if sl <= 0 {
                            return Ok(-1);
                        }
                        if se >= 0 {
                            return Ok(1);
                        }
                    }
                }
                Err(Error::Undecidable("Liouville refinement exhausted".into()))
            }
        }
    }

    /// sign(ω − x).
    pub fn cmp_value(&self, x: &ExactNum) -> Result<i8> {
        self.sign_affine(&ExactNum::one(), &x.neg())
    }

    /// Approximation of ω − x good enough to read off its size.
    pub fn approx_offset(&self, x: &ExactNum) -> Result<ExactNum> {
        let mut prev: Option<f64> = None;
        for level in 1..=MAX_LIOUVILLE_LEVEL {
            let d = self.approx_exact(level)?.sub(x);
            if d.is_zero() {
                continue;
            }
            let l = d.approx_log10().unwrap();
            match self {
                RotationSpec::Rational(_) => return Ok(d),
                RotationSpec::Liouville { base } => {
                    // T_level is within 2·base^{−(level+1)!} of ω
                    let err = factorial(level + 1).to_f64().unwrap() * (*base as f64).log10();
                    if l > 2.0 - err {
                        return Ok(d);
                    }
                    continue;
                }
                _ => {}
            }
            if let Some(p) = prev {
                if (p - l).abs() < 1e-9 * (1.0 + l.abs()) {
                    return Ok(d);
                }
            }
            prev = Some(l);
            if level > 14 {
                return Ok(d);
            }
        }
        Err(Error::Undecidable("offset too small to resolve".into()))
    }
}

impl fmt::Display for RotationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RotationSpec::Rational(r) => write!(f, "rational:{}", rational_to_string(r)),
            RotationSpec::Quadratic { a, b, d, c } => write!(f, "quadratic:{a},{b},{d},{c}"),
            RotationSpec::Liouville { base } => write!(f, "liouville:{base}"),
            RotationSpec::Interval { lo, hi } => {
                write!(f, "interval:{},{}", rational_to_string(lo), rational_to_string(hi))
            }
        }
    }
}

impl FromStr for RotationSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad rotation number `{s}`"));
        let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
        match kind.trim() {
            "golden" => Ok(Self::golden()),
            "rational" => {
                let r = parse_rational(arg)?;
                Ok(RotationSpec::Rational(r))
            }
            "liouville" => {
                let base: u32 = if arg.is_empty() { 10 } else { arg.trim().parse().map_err(|_| bad())? };
                if base < 2 {
                    return Err(bad());
                }
                Ok(RotationSpec::Liouville { base })
            }
            "quadratic" => {
                let v: Vec<BigInt> = arg
                    .split(',')
                    .map(|t| BigInt::from_str(t.trim()).map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                if v.len() != 4 || v[2] <= BigInt::zero() || v[3].is_zero() {
                    return Err(bad());
                }
                let sq = v[2].sqrt();
                if &sq * &sq == v[2] || v[1].is_zero() {
                    return Err(Error::InvalidArgument(format!("`{s}` is rational")));
                }
                Ok(RotationSpec::Quadratic {
                    a: v[0].clone(),
                    b: v[1].clone(),
                    d: v[2].clone(),
                    c: v[3].clone(),
                })
            }
            "interval" => {
                let (lo, hi) = arg.split_once(',').ok_or_else(bad)?;
                let (lo, hi) = (parse_rational(lo)?, parse_rational(hi)?);
                if lo > hi {
                    return Err(bad());
                }
                Ok(RotationSpec::Interval { lo, hi })
            }
            _ => Err(bad()),
        }
    }
}

impl Serialize for RotationSpec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RotationSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Partial quotients of a rational.
fn cf_rational(r: &BigRational) -> Vec<BigInt> {
    let (mut n, mut d) = (r.numer().clone(), r.denom().clone());
    let mut out = Vec::new();
    while !d.is_zero() {
        let (a, m) = n.div_mod_floor(&d);
        out.push(a);
        n = d;
        d = m;
    }
    out
}

fn convergents_of(cf: &[BigInt]) -> Vec<(BigInt, BigInt)> {
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut out = Vec::new();
    for a in cf {
        let h = a * &h1 + &h0;
        let k = a * &k1 + &k0;
        out.push((k.clone(), h.clone()));
        h0 = std::mem::replace(&mut h1, h);
        k0 = std::mem::replace(&mut k1, k);
    }
    out
}

/// Continued fraction of (a + b√d)/c through the (P + √D)/Q recursion.
fn cf_quadratic(a: &BigInt, b: &BigInt, d: &BigInt, c: &BigInt, n: usize) -> Vec<BigInt> {
    let (mut a, mut b, mut c) = (a.clone(), b.clone(), c.clone());
    if b.is_negative() {
        a = -a;
        b = -b;
        c = -c;
    }
    let mut p = a;
    let mut dd = &b * &b * d;
    let mut q = c;
    if !((&dd - &p * &p) % &q).is_zero() {
        let qa = q.abs();
        p *= &qa;
        dd *= &q * &q;
        q *= &qa;
    }
    let s = dd.sqrt();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let t = &p + &s;
        let nq: BigInt = -q.clone();
        let a_k: BigInt = if q.is_positive() { Integer::div_floor(&t, &q) } else { let f: BigInt = Integer::div_floor(&t, &nq); -(f + BigInt::one()) };




        p = &a_k * &q - &p;
        q = (&dd - &p * &p) / &q;
        out.push(a_k);
    }
    out
}

/// The first n convergents (p, q) of ω, fewer when ω is rational or only
/// known to limited precision.
pub fn convergents(omega: &RotationSpec, n: usize) -> Result<Vec<(BigInt, BigInt)>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one convergent".into()));
    }
    let cf = match omega {
        RotationSpec::Rational(r) => cf_rational(r),
        RotationSpec::Quadratic { a, b, d, c } => cf_quadratic(a, b, d, c, n),
        RotationSpec::Liouville { .. } | RotationSpec::Interval { .. } => {
            let mut best = Vec::new();
            for level in 3..=6 {
                let (lo, hi) = omega.enclosure(level)?;
                let (u, v) = (cf_rational(&lo), cf_rational(&hi));
                let common = u.iter().zip(&v).take_while(|(x, y)| x == y).count();
                // the last shared quotient can still differ inside the interval
                let safe = common.min(u.len() - 1).min(v.len() - 1);
                best = u[..safe].to_vec();
                if best.len() >= n || matches!(omega, RotationSpec::Interval { .. }) {
                    break;
                }
            }
            best
        }
    };
    Ok(convergents_of(&cf).into_iter().take(n).collect())
}

/// (s, t) with p·t − q·s = 1 and 0 ≤ s < p.
pub fn extended_euclid(p: &BigInt, q: &BigInt) -> Result<(BigInt, BigInt)> {
    if !p.is_positive() {
        return Err(Error::InvalidArgument("p must be positive".into()));
    }
    let e = q.extended_gcd(p);
    if !e.gcd.is_one() {
        return Err(Error::NotCoprime(e.gcd.to_i64().unwrap_or(i64::MAX)));
    }
    // e.x·q ≡ 1 (mod p)
    let s = (-e.x).mod_floor(p);
    let t = (BigInt::one() + q * &s) / p;
    Ok((s, t))
}

pub fn extended_euclid_i64(p: i64, q: i64) -> Result<(i64, i64)> {
    let (s, t) = extended_euclid(&BigInt::from(p), &BigInt::from(q))?;
    Ok((s.to_i64().unwrap(), t.to_i64().unwrap()))
}

/// Searches for the integer c with test(c) == Equal, starting from guesses
/// produced at increasing precision levels. test returns Less when c is too
/// small and Greater when it is too large.
fn settle_integer(
    mut guess: impl FnMut(u32) -> Result<Option<ExactNum>>,
    mut test: impl FnMut(&ExactNum) -> Result<Ordering>,
) -> Result<ExactNum> {
    for level in 1..=MAX_LIOUVILLE_LEVEL {
        let Some(mut c) = guess(level)? else { continue };
        for _ in 0..ADJUST {
            match test(&c)? {
                Ordering::Equal => return Ok(c),
                Ordering::Less => c = c.add(&ExactNum::one()),
                Ordering::Greater => c = c.sub(&ExactNum::one()),
            }
        }
    }
    Err(Error::Undecidable("integer search did not settle".into()))
}

/// The integer p′ ≥ 2 with 1/(p′p) < ω − q/p < 1/((p′−1)p).
pub fn p_prime(omega: &RotationSpec, p: &ExactNum, q: &ExactNum) -> Result<ExactNum> {
    if omega.sign_affine(p, &q.neg())? <= 0 || omega.sign_affine(p, &q.add(&ExactNum::one()).neg())? >= 0 {
        return Err(Error::InvalidArgument("ω is not inside (q/p, (q+1)/p)".into()));
    }
    // side(c) = sign(ω·c·p − (c·q + 1)), positive iff 1/(cp) < ω − q/p
    let side = |c: &ExactNum| omega.sign_affine(&c.mul(p), &c.mul(q).add(&ExactNum::one()).neg());
    let res = settle_integer(
        |level| {
            let d = omega.approx_exact(level)?.mul(p).sub(q);
            if d.signum()? <= 0 {
                return Ok(None);
            }
            Ok(Some(ExactNum::floor_div(&ExactNum::one(), &d)?.add(&ExactNum::one())))
        },
        |c| {
            if c.lt(&exi(2))? {
                return Ok(Ordering::Less);
            }
            if side(c)? <= 0 {
                return Ok(Ordering::Less);
            }
            let c1 = c.sub(&ExactNum::one());
            if c1.signum()? > 0 && side(&c1)? > 0 {
                return Ok(Ordering::Greater);
            }
            Ok(Ordering::Equal)
        },
    )?;
    // rational ω may sit exactly on 1/((p′−1)p)
    let c1 = res.sub(&ExactNum::one());
    if omega.sign_affine(&c1.mul(p), &c1.mul(q).add(&ExactNum::one()).neg())? == 0 {
        return Err(Error::InvalidArgument("ω − q/p = 1/(np): no strict p′".into()));
    }
    Ok(res)
}

/// (m, p̃, q̃) with P = m·p̃, Q = m·q̃ and gcd(p̃, q̃) = 1.
pub fn reduce_tilde(big_p: &ExactNum, big_q: &ExactNum) -> Result<(ExactNum, ExactNum, ExactNum)> {
    if big_p.signum()? <= 0 || big_q.signum()? <= 0 {
        return Err(Error::InvalidArgument("reduce_tilde needs positive inputs".into()));
    }
    let m = ExactNum::gcd(big_p, big_q)?;
    let inv = m.as_rational().unwrap().recip();
    Ok((m, big_p.scale(&inv), big_q.scale(&inv)))
}

/// a = ⌈n·|q − ωp|⌉.
pub fn budget_a(p: &ExactNum, q: &ExactNum, omega: &RotationSpec, n: &ExactNum) -> Result<ExactNum> {
    // s = sign(q − ωp)
    let s = omega.sign_affine(&p.neg(), q)?;
    if s == 0 {
        return Ok(ExactNum::zero());
    }
    let sg = rat(s as i64, 1);
    // n|q − ωp| − c = ω·(−s·n·p) + (s·n·q − c)
    let wa = n.mul(p).scale(&sg).neg();
    let wb = n.mul(q).scale(&sg);
    settle_integer(
        |level| {
            let v = q.sub(&omega.approx_exact(level)?.mul(p)).mul(n).scale(&sg);
            Ok(Some(v.ceil()?))
        },
        |c| {
            if omega.sign_affine(&wa, &wb.sub(c))? > 0 {
                return Ok(Ordering::Less);
            }
            let c1 = c.sub(&ExactNum::one());
            if omega.sign_affine(&wa, &wb.sub(&c1))? <= 0 {
                return Ok(Ordering::Greater);
            }
            Ok(Ordering::Equal)
        },
    )
}

pub fn budget_a_i64(p: i64, q: i64, omega: &RotationSpec, n: i64) -> Result<i64> {
    let a = budget_a(&exi(p), &exi(q), omega, &exi(n))?;
    a.as_rational()
        .and_then(|r| r.to_integer().to_i64())
        .ok_or_else(|| Error::Budget("a does not fit in i64".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckScale {
    Exact,
    Float,
    Relaxed,
}

/// One inequality with both sides recorded.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub lhs: String,
    pub relation: String,
    pub rhs: String,
    pub lhs_approx: String,
    pub rhs_approx: String,
    pub scale: CheckScale,
    pub gating: bool,
    pub pass: bool,
}

fn holds(ord: Ordering, rel: &str) -> bool {
    match rel {
        "<" => ord == Ordering::Less,
        "<=" => ord != Ordering::Greater,
        ">" => ord == Ordering::Greater,
        ">=" => ord != Ordering::Less,
        "=" => ord == Ordering::Equal,
        _ => false,
    }
}

impl Check {
    pub fn exact(name: &str, lhs: &ExactNum, rel: &str, rhs: &ExactNum, scale: CheckScale, gating: bool) -> Result<Check> {
        let pass = holds(lhs.cmp_exact(rhs)?, rel);
        Ok(Check {
            name: name.into(),
            lhs: lhs.to_string(),
            relation: rel.into(),
            rhs: rhs.to_string(),
            lhs_approx: lhs.approx_string(),
            rhs_approx: rhs.approx_string(),
            scale,
            gating,
            pass,
        })
    }

    pub fn float(name: &str, lhs: f64, rel: &str, rhs: f64, gating: bool) -> Check {
        let pass = lhs.partial_cmp(&rhs).is_some_and(|o| holds(o, rel));
        Check {
            name: name.into(),
            lhs: format!("{lhs:.16e}"),
            relation: rel.into(),
            rhs: format!("{rhs:.16e}"),
            lhs_approx: format!("{lhs:.6e}"),
            rhs_approx: format!("{rhs:.6e}"),
            scale: CheckScale::Float,
            gating,
            pass,
        }
    }

    /// lhs REL (ω − x), decided exactly.
    fn against_offset(
        name: &str,
        omega: &RotationSpec,
        x: &ExactNum,
        x_label: &str,
        bound: &ExactNum,
        bound_on_left: bool,
        rel: &str,
        scale: CheckScale,
        gating: bool,
    ) -> Result<Check> {
        // sign(ω − x − bound)
        let s = omega.cmp_value(&x.add(bound))?;
        let ord_offset_vs_bound = match s {
            -1 => Ordering::Less,
            0 => Ordering::Equal,
            _ => Ordering::Greater,
        };
        let ord = if bound_on_left { ord_offset_vs_bound.reverse() } else { ord_offset_vs_bound };
        let off = omega.approx_offset(x)?.approx_string();
        let label = format!("omega - {x_label}");
        let (lhs, rhs, la, ra) = if bound_on_left {
            (bound.to_string(), label, bound.approx_string(), off)
        } else {
            (label, bound.to_string(), off, bound.approx_string())
        };
        Ok(Check {
            name: name.into(),
            lhs,
            relation: rel.into(),
            rhs,
            lhs_approx: la,
            rhs_approx: ra,
            scale,
            gating,
            pass: holds(ord, rel),
        })
    }
}

/// Powers P^m where P = p, or P = base when p = base^E and τ is a multiple
/// of 1/E.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerRoot {
    pub base: u32,
    pub exponent: BigInt,
}

fn inv(x: &ExactNum) -> Result<ExactNum> {
    x.recip_monomial()
        .ok_or_else(|| Error::Unsupported("inverse of a multi-term number".into()))
}

fn pow_p(p: &ExactNum, root: &Option<PowerRoot>, m: &BigRational) -> Result<ExactNum> {
    match root {
        Some(r) => {
            let e = m * BigRational::from_integer(r.exponent.clone());
            if !e.is_integer() {
                return Err(Error::InvalidArgument("exponent not on the root lattice".into()));
            }
            Ok(ExactNum::power(r.base, e.to_integer()))
        }
        None => {
            if !m.is_integer() {
                return Err(Error::InvalidArgument("non-integer power of p".into()));
            }
            let n = m.to_integer().to_i64().ok_or_else(|| Error::Budget("power too large".into()))?;
            let pp = p.pow(n.unsigned_abs() as u32);
            Ok(if n >= 0 { pp } else { inv(&pp)? })
        }
    }
}

/// A candidate approximant q/p < ω.
#[derive(Clone, Debug)]
pub struct Candidate {
    pub p: ExactNum,
    pub q: ExactNum,
    pub root: Option<PowerRoot>,
    pub index: usize,
}

/// Approximants from below: Liouville truncations, otherwise convergents.
pub fn candidates(omega: &RotationSpec, count: usize) -> Result<Vec<Candidate>> {
    match omega {
        RotationSpec::Liouville { base } => Ok((1..=count as u32)
            .map(|j| {
                let (p, q) = RotationSpec::liouville_truncation(*base, j);
                Candidate {
                    p,
                    q,
                    root: Some(PowerRoot { base: *base, exponent: factorial(j) }),
                    index: j as usize,
                }
            })
            .collect()),
        _ => {
            let mut out = Vec::new();
            for (i, (p, q)) in convergents(omega, count)?.into_iter().enumerate() {
                let (p, q) = (ExactNum::from_int(p), ExactNum::from_int(q));
                // τ is undefined for p = 1
                if p.is_one_value() {
                    continue;
                }
                if omega.sign_affine(&p, &q.neg())? > 0 {
                    out.push(Candidate { p, q, root: None, index: i });
                }
            }
            Ok(out)
        }
    }
}

/// Largest t with ω − q/p < γ·P^{−t}, P the candidate's power root.
fn tau_numerator(omega: &RotationSpec, c: &Candidate, gamma: &BigRational) -> Result<BigInt> {
    let x = c.q.mul(&inv(&c.p)?);
    let pb = |t: &BigInt| -> Result<ExactNum> {
        match &c.root {
            Some(r) => Ok(ExactNum::power(r.base, -t)),
            None => pow_p(&c.p, &None, &BigRational::from_integer(-t)),
        }
    };
    let ok = |t: &BigInt| -> Result<bool> { Ok(omega.cmp_value(&x.add(&pb(t)?.scale(gamma)))? < 0) };
    // estimate from the size of the offset
    let off = omega.approx_offset(&x)?;
    let lp = match &c.root {
        Some(r) => (r.base as f64).log10(),
        None => c.p.approx_log10().unwrap(),
    };
    let mut t = if off.base() != 0 && c.root.as_ref().is_some_and(|r| r.base == off.base()) {
        // off ≈ R·b^e: use the exponent exactly, the coefficient in floats
        let (e, coeff) = off
            .terms()
            .iter()
            .find(|(_, c)| !c.is_zero())
            .map(|(e, c)| (e.clone(), c.clone()))
            .unwrap();
        let lc = crate::exact::log10_bigint(coeff.numer()) - crate::exact::log10_bigint(coeff.denom());
        let frac = (lc - crate::exact::log10_bigint(gamma.numer()) + crate::exact::log10_bigint(gamma.denom())) / lp;
        -e - BigInt::from(frac.ceil() as i64)
    } else {
        let lg = crate::exact::log10_bigint(gamma.numer()) - crate::exact::log10_bigint(gamma.denom());
        BigInt::from(((lg - off.approx_log10().unwrap()) / lp).floor() as i64)
    };
    for _ in 0..64 {
        if !ok(&t)? {
            t -= 1;
        } else if ok(&(&t + 1))? {
            t += 1;
        } else {
            return Ok(t);
        }
    }
    Err(Error::Undecidable("τ search did not settle".into()))
}

/// Everything the destruction construction needs from number theory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSelection {
    pub omega: RotationSpec,
    #[serde(with = "rational_str")]
    pub gamma: BigRational,
    #[serde(with = "rational_str")]
    pub sigma: BigRational,
    #[serde(with = "rational_str")]
    pub tau: BigRational,
    pub p: ExactNum,
    pub q: ExactNum,
    pub root: Option<PowerRoot>,
    pub candidate_index: usize,
    pub p_prime: ExactNum,
    pub m: ExactNum,
    pub p_tilde: ExactNum,
    pub q_tilde: ExactNum,
    pub k: u32,
    pub r: u32,
    #[serde(with = "rational_str")]
    pub eps: BigRational,
    #[serde(with = "rational_str")]
    pub c: BigRational,
    #[serde(with = "rational_str")]
    pub c_k: BigRational,
    #[serde(with = "rational_str")]
    pub c_kr: BigRational,
    /// Factor multiplying the right side of A2 (1 for exact constants).
    #[serde(with = "rational_str")]
    pub a2_factor: BigRational,
    pub n: ExactNum,
    pub n_lo: ExactNum,
    pub n_hi: ExactNum,
    pub a: ExactNum,
}

#[derive(Clone, Debug)]
pub struct SelectInput {
    pub omega: RotationSpec,
    pub gamma: BigRational,
    pub sigma: BigRational,
    pub k: u32,
    pub r: u32,
    pub eps: BigRational,
    pub c: BigRational,
    pub c_k: BigRational,
    pub search_bound: usize,
    pub a2_factor: BigRational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotFoundReason {
    /// τ stays bounded over the examined approximants.
    NotLiouvilleEnough,
    /// τ keeps growing; more approximants might succeed.
    BoundTooSmall,
}

#[derive(Clone, Debug)]
pub enum SelectOutcome {
    Found(Box<ParamSelection>),
    NotFound { reason: NotFoundReason, examined: usize, taus: Vec<String> },
}

pub fn c_kr(c: &BigRational, c_k: &BigRational, r: u32) -> BigRational {
    let w = BigRational::from_integer(BigInt::from(2 * r + 1));
    rat(12, 1) * c * c_k * &w * &w
}

fn n_base(sel_ckr: &BigRational, eps: &BigRational, k: u32, p: &ExactNum, root: &Option<PowerRoot>) -> Result<ExactNum> {
    let ratio = sel_ckr / eps;
    let f: BigRational = Pow::pow(&ratio, k + 1);
    Ok(pow_p(p, root, &BigRational::from_integer(BigInt::from(k * (k + 1))))?.scale(&f))
}

/// Fills in every derived quantity for the approximant `c`.
pub fn build_selection(inp: &SelectInput, c: &Candidate) -> Result<ParamSelection> {
    let t = tau_numerator(&inp.omega, c, &inp.gamma)?;
    let tau = match &c.root {
        Some(r) => BigRational::new(t, r.exponent.clone()),
        None => BigRational::from_integer(t),
    };
    let p_prime = p_prime(&inp.omega, &c.p, &c.q)?;
    let big_p = p_prime.mul(&c.p);
    let big_q = p_prime.mul(&c.q).add(&ExactNum::one());
    let (m, p_tilde, q_tilde) = reduce_tilde(&big_p, &big_q)?;
    let c_kr = c_kr(&inp.c, &inp.c_k, inp.r);
    let base = n_base(&c_kr, &inp.eps, inp.k, &c.p, &c.root)?;
    let lo = base.scale(&rat(3, 1));
    let hi = base.scale(&rat(33, 10));
    let n_lo = lo.ceil()?;
    let n_hi = hi.floor()?;
    let n = if n_lo.lt(&exi(30))? { exi(30) } else { n_lo.clone() };
    // a at the right end of the Ω-window, where |q̃ − Ωp̃| = p̃/(p p′ (p′−1))
    let num = n.add(&exi(3)).mul(&p_tilde).mul(&p_tilde);
    let den = c.p.mul(&p_prime).mul(&p_prime.sub(&ExactNum::one()));
    let a = ExactNum::ceil_div(&num, &den)?;
    Ok(ParamSelection {
        omega: inp.omega.clone(),
        gamma: inp.gamma.clone(),
        sigma: inp.sigma.clone(),
        tau,
        p: c.p.clone(),
        q: c.q.clone(),
        root: c.root.clone(),
        candidate_index: c.index,
        p_prime,
        m,
        p_tilde,
        q_tilde,
        k: inp.k,
        r: inp.r,
        eps: inp.eps.clone(),
        c: inp.c.clone(),
        c_k: inp.c_k.clone(),
        c_kr,
        a2_factor: inp.a2_factor.clone(),
        n,
        n_lo,
        n_hi,
        a,
    })
}

impl ParamSelection {
    fn pw(&self, m: BigRational) -> Result<ExactNum> {
        pow_p(&self.p, &self.root, &m)
    }

    fn x(&self) -> ExactNum {
        self.q.mul(&inv(&self.p).expect("p is a single power"))
    }

    fn scale_a2(&self) -> CheckScale {
        if self.a2_factor.is_one() {
            CheckScale::Exact
        } else {
            CheckScale::Relaxed
        }
    }

    /// A1, τ ≥ σ, A2 and A3: the conditions that admit a selection.
    pub fn admission_checks(&self) -> Result<Vec<Check>> {
        let g = ex(&self.gamma);
        let one = BigRational::one();
        let x = self.x();
        let ckr_eps = &self.c_kr / &self.eps;
        let kk = BigRational::from_integer(BigInt::from(2 * self.k * (self.k + 1)));
        let exact = CheckScale::Exact;
        let mut out = vec![
            Check::exact("tau>=sigma", &ex(&self.tau), ">=", &ex(&self.sigma), exact, true)?,
            Check::against_offset(
                "A1-left",
                &self.omega,
                &x,
                "q/p",
                &self.pw(-(&self.tau + &one))?.scale(&self.gamma),
                true,
                "<=",
                exact,
                true,
            )?,
            Check::against_offset(
                "A1-right",
                &self.omega,
                &x,
                "q/p",
                &self.pw(-self.tau.clone())?.scale(&self.gamma),
                false,
                "<",
                exact,
                true,
            )?,
        ];
        let a2_rhs = ex(&(rat(10, 1) * &self.gamma * Pow::pow(&ckr_eps, 2 + 2 * self.k) * &self.a2_factor));
        out.push(Check::exact("A2", &self.pw(&self.tau - &one - &kk)?, ">=", &a2_rhs, self.scale_a2(), true)?);
        let p_tm1 = self.pw(&self.tau - &one)?;
        out.push(Check::exact("A3-eps", &ex(&self.eps), "<=", &ex(&(&self.c_kr / rat(10, 1))), exact, true)?);
        out.push(Check::exact("A3-10gamma", &p_tm1, ">=", &g.scale(&rat(10, 1)), exact, true)?);
        out.push(Check::exact("A3-rgamma", &p_tm1, ">=", &g.scale(&rat(self.r as i64, 1)), exact, true)?);
        Ok(out)
    }

    /// The full inequality chain, all in exact arithmetic.
    pub fn certificate_checks(&self, gating: bool) -> Result<Vec<Check>> {
        let exact = if gating { CheckScale::Exact } else { CheckScale::Relaxed };
        let mut out = self.admission_checks()?;
        if !gating {
            for c in &mut out {
                c.gating = false;
                c.scale = CheckScale::Relaxed;
            }
        }
        let one = BigRational::one();
        let x = self.x();
        let g = ex(&self.gamma);
        let pp = &self.p_prime;
        let pp1 = pp.sub(&ExactNum::one());
        let big_p = pp.mul(&self.p);
        out.push(Check::against_offset(
            "p_prime-left",
            &self.omega,
            &x,
            "q/p",
            &inv(&big_p)?,
            true,
            "<",
            exact,
            gating,
        )?);
        // ω − q/p < 1/((p′−1)p)  ⇔  sign(ω·(p′−1)p − ((p′−1)q + 1)) < 0
        {
            let s = self.omega.sign_affine(&pp1.mul(&self.p), &pp1.mul(&self.q).add(&ExactNum::one()).neg())?;
            out.push(Check {
                name: "p_prime-right".into(),
                lhs: "(p'-1)p (omega - q/p)".into(),
                relation: "<".into(),
                rhs: "1".into(),
                lhs_approx: self
                    .omega
                    .approx_offset(&x)?
                    .mul(&pp1.mul(&self.p))
                    .approx_string(),
                rhs_approx: "1".into(),
                scale: exact,
                gating,
                pass: s < 0,
            });
        }
        out.push(Check::exact("reduce-p", &big_p, "=", &self.m.mul(&self.p_tilde), exact, gating)?);
        out.push(Check::exact(
            "reduce-q",
            &pp.mul(&self.q).add(&ExactNum::one()),
            "=",
            &self.m.mul(&self.q_tilde),
            exact,
            gating,
        )?);
        out.push(Check::exact("gcd(p~,q~)", &ExactNum::gcd(&self.p_tilde, &self.q_tilde)?, "=", &ExactNum::one(), exact, gating)?);
        let g_pp = ExactNum::gcd(&self.p, &self.p_tilde)?;
        let lcm = self.p.mul(&self.p_tilde).mul(&inv(&g_pp)?);
        out.push(Check::exact("lcm(p,p~)=p'p", &lcm, "=", &big_p, exact, gating)?);

        // bothestimates1
        let p_tm1 = self.pw(&self.tau - &one)?;
        let p_t = self.pw(self.tau.clone())?;
        let ginv = self.gamma.recip();
        out.push(Check::exact("bothestimates1-left", &p_tm1.scale(&ginv), "<", pp, exact, gating)?);
        out.push(Check::exact("bothestimates1-right", pp, "<", &p_t.scale(&ginv).add(&ExactNum::one()), exact, gating)?);

        // choiceN2
        let base = n_base(&self.c_kr, &self.eps, self.k, &self.p, &self.root)?;
        let lo = base.scale(&rat(3, 1));
        let hi = base.scale(&rat(33, 10));
        out.push(Check::exact("choiceN2-window", &lo, "<=", &hi, exact, gating)?);
        out.push(Check::exact("choiceN2-lo", &lo, "<=", &self.n, exact, gating)?);
        out.push(Check::exact("choiceN2-hi", &self.n, "<=", &hi, exact, gating)?);
        out.push(Check::exact("choiceN2-30", &self.n, ">=", &exi(30), exact, gating)?);

        // qp-QP at both ends of the Ω-window. At the right end
        // |q̃ − Ωp̃| = 1/(m(p′−1)), so the bound reads 10 p^{τ−1} ≤ 11 γ m (p′−1).
        let qp_rhs = g.scale(&rat(11, 10)).mul(&inv(&p_tm1)?);
        out.push(Check::exact(
            "qp-QP-right",
            &p_tm1.scale(&rat(10, 1)),
            "<=",
            &self.m.mul(&pp1).scale(&(rat(11, 1) * &self.gamma)),
            exact,
            gating,
        )?);
        out.push(Check::exact("qp-QP-left", &ExactNum::zero(), "<=", &qp_rhs, exact, gating)?);

        // estimate2: a/p̃ < (5/4) N γ / p^{τ−1}  ⇔  4 a p^{τ−1} < 5 N γ p̃
        out.push(Check::exact(
            "estimate2",
            &self.a.mul(&p_tm1).scale(&rat(4, 1)),
            "<",
            &self.n.mul(&self.p_tilde).scale(&(rat(5, 1) * &self.gamma)),
            exact,
            gating,
        )?);

        // A2alternative: γ/p^{τ−1} ≤ (1/10)(ε/C_{k,r})²(ε/(C_{k,r}p^{k+1}))^{2k} / factor
        let e_c = &self.eps / &self.c_kr;
        let pk1 = self.pw(BigRational::from_integer(BigInt::from(-(2 * self.k as i64) * (self.k as i64 + 1))))?;
        let alt_rhs = pk1.scale(&(rat(1, 10) * Pow::pow(&e_c, 2 + 2 * self.k) / &self.a2_factor));
        let alt_lhs = inv(&p_tm1)?.scale(&self.gamma);
        let sc = if gating { self.scale_a2() } else { CheckScale::Relaxed };
        out.push(Check::exact("A2alternative", &alt_lhs, "<=", &alt_rhs, sc, gating)?);

        // orderoneaction
        let ek = BigRational::from_integer(BigInt::from(self.k));
        let small = self.pw(-(&ek + &one) * &ek)?.scale(&Pow::pow(&e_c, self.k));
        let r = rat(self.r as i64, 1);
        let ooa_lhs = self.n.mul(&small).scale(&(&self.eps / &self.c_k / rat(6, 1)));
        let ooa_rhs = ex(&(rat(12, 1) * &self.c * &r * (rat(2, 1) * &r + &one)));
        out.push(Check::exact("orderoneaction", &ooa_lhs, ">", &ooa_rhs, exact, gating)?);

        // basicclosenessestimate: 2r·a/p̃ < (rε/C_{k,r})(ε/(C_{k,r}p^{k+1}))^k
        let lhs = self.a.scale(&(rat(2, 1) * &r));
        let rhs = small.scale(&(&r * &e_c)).mul(&self.p_tilde);
        out.push(Check::exact("basicclosenessestimate", &lhs, "<", &rhs, exact, gating)?);
        // basicclosenessestimate2: 2r·a/p̃ < (10/4)Nγr/p^{τ−1}
        let rhs2 = self.n.mul(&self.p_tilde).scale(&(rat(10, 4) * &self.gamma * &r)).mul(&inv(&p_tm1)?);
        out.push(Check::exact("basicclosenessestimate2", &lhs, "<", &rhs2, exact, gating)?);
        Ok(out)
    }
}

/// Scans approximants for one satisfying τ ≥ σ, A1, A2 and A3.
pub fn select_parameters(inp: &SelectInput) -> Result<SelectOutcome> {
    let bound = BigRational::from_integer(BigInt::from(1 + 2 * inp.k * (inp.k + 1)));
    if inp.sigma <= bound {
        return Err(Error::InvalidArgument(format!(
            "σ must exceed 1 + 2k(k+1) = {}",
            rational_to_string(&bound)
        )));
    }
    let cands = candidates(&inp.omega, inp.search_bound)?;
    let mut taus: Vec<BigRational> = Vec::new();
    for c in &cands {
        let t = tau_numerator(&inp.omega, c, &inp.gamma)?;
        let tau = match &c.root {
            Some(r) => BigRational::new(t, r.exponent.clone()),
            None => BigRational::from_integer(t),
        };
        taus.push(tau.clone());
        if tau < inp.sigma {
            continue;
        }
        let sel = build_selection(inp, c)?;
        if sel.admission_checks()?.iter().all(|c| c.pass) {
            return Ok(SelectOutcome::Found(Box::new(sel)));
        }
    }
    // τ growing by at least one over the scan suggests a larger bound helps
    let growing = match (taus.first(), taus.last()) {
        (Some(a), Some(b)) => b - a >= BigRational::one() && taus.iter().any(|t| t >= &inp.sigma) || b - a >= rat(2, 1),
        _ => false,
    };
    Ok(SelectOutcome::NotFound {
        reason: if growing { NotFoundReason::BoundTooSmall } else { NotFoundReason::NotLiouvilleEnough },
        examined: cands.len(),
        taus: taus.iter().map(rational_to_string).collect(),
    })
}

/// Desk-scale choice: the largest approximant from below with p ≤ p_max
/// and p′p ≤ period_max. None of the admission checks gate.
pub fn select_relaxed(inp: &SelectInput, p_max: u64, period_max: u64) -> Result<ParamSelection> {
    let mut best: Option<Candidate> = None;
    for c in candidates(&inp.omega, inp.search_bound.max(4))? {
        if !c.p.le(&exi(p_max as i64))? {
            break;
        }
        let pp = p_prime(&inp.omega, &c.p, &c.q)?;
        if pp.mul(&c.p).le(&exi(period_max as i64))? {
            best = Some(c);
        }
    }
    let c = best.ok_or_else(|| Error::Budget(format!("no approximant with p ≤ {p_max} and p′p ≤ {period_max}")))?;
    build_selection(inp, &c)
}
