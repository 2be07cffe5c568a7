//! Sequences on the integer lattice, the shift action τ_{k,l}, partial
//! orders and the Birkhoff property.

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance separating `Equal` from strict order.
pub const ORDER_TOL: f64 = 1e-9;

/// Anything that can be evaluated at lattice sites.
pub trait Sequence {
    /// Value at site `i`, or `None` outside the stored range.
    fn value(&self, i: i64) -> Option<f64>;

    fn require(&self, lo: i64, hi: i64) -> Result<()> {
        if self.value(lo).is_some() && self.value(hi).is_some() {
            Ok(())
        } else {
            Err(Error::Window { lo, hi })
        }
    }

    fn at(&self, i: i64) -> Result<f64> {
        self.value(i).ok_or(Error::Window { lo: i, hi: i })
    }
}

/// Finite restriction x|_[lo, lo+len-1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqWindow {
    pub lo: i64,
    pub values: Vec<f64>,
}

impl SeqWindow {
    pub fn new(lo: i64, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty window".into()));
        }
        Ok(SeqWindow { lo, values })
    }

    /// Samples `x` on `[lo, hi]`.
    pub fn sample<S: Sequence + ?Sized>(x: &S, lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidArgument(format!("empty range [{lo}, {hi}]")));
        }
        let values = (lo..=hi).map(|i| x.at(i)).collect::<Result<Vec<_>>>()?;
        Ok(SeqWindow { lo, values })
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }

    pub fn shift(&self, k: i64, l: i64) -> SeqWindow {
        SeqWindow {
            lo: self.lo + k,
            values: self.values.iter().map(|v| v + l as f64).collect(),
        }
    }

    /// Pointwise minimum on the common range.
    pub fn meet(&self, other: &SeqWindow) -> Result<SeqWindow> {
        self.combine(other, f64::min)
    }

    /// Pointwise maximum on the common range.
    pub fn join(&self, other: &SeqWindow) -> Result<SeqWindow> {
        self.combine(other, f64::max)
    }

    fn combine(&self, other: &SeqWindow, f: fn(f64, f64) -> f64) -> Result<SeqWindow> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi().min(other.hi());
        if hi < lo {
            return Err(Error::Window { lo, hi });
        }
        let values = (lo..=hi)
            .map(|i| f(self.value(i).unwrap(), other.value(i).unwrap()))
            .collect();
        Ok(SeqWindow { lo, values })
    }
}

impl Sequence for SeqWindow {
    fn value(&self, i: i64) -> Option<f64> {
        if i < self.lo {
            return None;
        }
        self.values.get((i - self.lo) as usize).copied()
    }
}

/// An element of X_{p,q}: x_{i+p} = x_i + q, stored on slots 1..=p.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicConfig {
    pub p: usize,
    pub q: i64,
    pub values: Vec<f64>,
}

impl PeriodicConfig {
    pub fn new(p: usize, q: i64, values: Vec<f64>) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("period p must be >= 1".into()));
        }
        if values.len() != p {
            return Err(Error::InvalidArgument(format!(
                "expected {p} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value".into()));
        }
        Ok(PeriodicConfig { p, q, values })
    }

    /// x_i = x0 + (q/p) i.
    pub fn linear(p: usize, q: i64, x0: f64) -> Self {
        let values = (1..=p as i64)
            .map(|i| x0 + (q * i) as f64 / p as f64)
            .collect();
        PeriodicConfig { p, q, values }
    }

    pub fn rotation_number(&self) -> f64 {
        self.q as f64 / self.p as f64
    }

    fn slot(&self, i: i64) -> (usize, i64) {
        let (n, t) = (i - 1).div_mod_floor(&(self.p as i64));
        (t as usize, n)
    }

    /// x_i for any integer i.
    pub fn get(&self, i: i64) -> f64 {
        let (t, n) = self.slot(i);
        self.values[t] + (n * self.q) as f64
    }

    /// x_i + l with a single rounding.
    pub fn get_plus(&self, i: i64, l: i64) -> f64 {
        let (t, n) = self.slot(i);
        self.values[t] + (n * self.q + l) as f64
    }

    pub fn x0(&self) -> f64 {
        self.get(0)
    }

    /// (τ_{k,l} x)_i = x_{i-k} + l.
    pub fn shift(&self, k: i64, l: i64) -> PeriodicConfig {
        let values = (1..=self.p as i64).map(|i| self.get_plus(i - k, l)).collect();
        PeriodicConfig {
            p: self.p,
            q: self.q,
            values,
        }
    }

    /// Vertical translate with x_0 in [0, 1).
    pub fn normalized(&self) -> PeriodicConfig {
        let l = -self.x0().floor() as i64;
        let mut y = self.shift(0, l);
        // guard the half-open interval against rounding at the top end
        if y.x0() >= 1.0 {
            y = y.shift(0, -1);
        }
        y
    }

    /// The same sequence viewed in X_{np,nq}.
    pub fn embed(&self, n: usize) -> Result<PeriodicConfig> {
        if n == 0 {
            return Err(Error::InvalidArgument("embedding factor must be >= 1".into()));
        }
        let p = self.p * n;
        let values = (1..=p as i64).map(|i| self.get(i)).collect();
        Ok(PeriodicConfig {
            p,
            q: self.q * n as i64,
            values,
        })
    }

    /// Smallest period representation (p/d, q/d) under which `self` is
    /// periodic within `tol`.
    pub fn reduced(&self, tol: f64) -> PeriodicConfig {
        let g = (self.p as i64).gcd(&self.q) as usize;
        for d in (2..=g).rev() {
            if !g.is_multiple_of(d) {
                continue;
            }
            let (p, q) = (self.p / d, self.q / d as i64);
            let periodic = (1..=self.p as i64)
                .all(|i| (self.get(i + p as i64) - self.get(i) - q as f64).abs() <= tol);
            if periodic {
                return PeriodicConfig {
                    p,
                    q,
                    values: self.values[..p].to_vec(),
                };
            }
        }
        self.clone()
    }

    pub fn meet(&self, other: &PeriodicConfig) -> Result<PeriodicConfig> {
        self.combine(other, f64::min)
    }

    pub fn join(&self, other: &PeriodicConfig) -> Result<PeriodicConfig> {
        self.combine(other, f64::max)
    }

    fn combine(&self, other: &PeriodicConfig, f: fn(f64, f64) -> f64) -> Result<PeriodicConfig> {
        if self.p != other.p || self.q != other.q {
            return Err(Error::InvalidArgument(
                "meet/join need configurations in the same X_{p,q}".into(),
            ));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| f(*a, *b))
            .collect();
        Ok(PeriodicConfig {
            p: self.p,
            q: self.q,
            values,
        })
    }

    /// ‖x − y‖ summed over one period 1..=p.
    pub fn l1_period(&self, other: &PeriodicConfig) -> f64 {
        (1..=self.p as i64)
            .map(|i| (self.get(i) - other.get(i)).abs())
            .sum()
    }
}

impl Sequence for PeriodicConfig {
    fn value(&self, i: i64) -> Option<f64> {
        Some(self.get(i))
    }
}

/// x_i = xi0 + omega * i.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidRotation {
    pub xi0: f64,
    pub omega: f64,
}

impl Sequence for RigidRotation {
    fn value(&self, i: i64) -> Option<f64> {
        Some(self.xi0 + self.omega * i as f64)
    }
}

/// A sequence given by a callback.
pub struct Generator<F: Fn(i64) -> f64>(pub F);

impl<F: Fn(i64) -> f64> Sequence for Generator<F> {
    fn value(&self, i: i64) -> Option<f64> {
        Some((self.0)(i))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    Equal,
    StrictlyBelow,
    WeaklyBelow,
    WeaklyAbove,
    StrictlyAbove,
    Incomparable,
}

impl Ordering {
    pub fn reverse(self) -> Ordering {
        match self {
            Ordering::StrictlyBelow => Ordering::StrictlyAbove,
            Ordering::WeaklyBelow => Ordering::WeaklyAbove,
            Ordering::WeaklyAbove => Ordering::WeaklyBelow,
            Ordering::StrictlyAbove => Ordering::StrictlyBelow,
            o => o,
        }
    }

    pub fn is_ordered(self) -> bool {
        self != Ordering::Incomparable
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Ordering::StrictlyBelow | Ordering::StrictlyAbove)
    }
}

/// Classifies differences d_i = y_i − x_i as the position of x relative to y.
pub fn classify<I: IntoIterator<Item = f64>>(diffs: I, tol: f64) -> Ordering {
    let (mut all_eq, mut all_pos, mut all_nonneg, mut all_neg, mut all_nonpos) =
        (true, true, true, true, true);
    for d in diffs {
        all_eq &= d.abs() <= tol;
        all_pos &= d > tol;
        all_nonneg &= d >= -tol;
        all_neg &= d < -tol;
        all_nonpos &= d <= tol;
    }
    if all_eq {
        Ordering::Equal
    } else if all_pos {
        Ordering::StrictlyBelow
    } else if all_nonneg {
        Ordering::WeaklyBelow
    } else if all_neg {
        Ordering::StrictlyAbove
    } else if all_nonpos {
        Ordering::WeaklyAbove
    } else {
        Ordering::Incomparable
    }
}

/// Position of `x` relative to `y`. Different periods are compared on the
/// lcm period when the rotation numbers agree; otherwise the sequences drift
/// apart linearly and necessarily cross.
pub fn compare(x: &PeriodicConfig, y: &PeriodicConfig, tol: f64) -> Ordering {
    if x.q as i128 * y.p as i128 != y.q as i128 * x.p as i128 {
        return Ordering::Incomparable;
    }
    let n = x.p.lcm(&y.p) as i64;
    classify((1..=n).map(|i| y.get(i) - x.get(i)), tol)
}

/// ⌊kq/p⌋ − 1 ..= ⌈kq/p⌉ + 1.
pub fn birkhoff_band(p: usize, q: i64, k: i64) -> std::ops::RangeInclusive<i64> {
    let num = k * q;
    let den = p as i64;
    Integer::div_floor(&num, &den) - 1..=Integer::div_ceil(&num, &den) + 1
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffCheck {
    pub birkhoff: bool,
    pub witness: Option<(i64, i64)>,
}

/// Checks that every translate τ_{k,l}x is ordered with respect to x.
/// Translates outside the band are ordered whenever the band edges are,
/// since τ_{k,l}x is monotone in l and τ^p_{k,l}x = x + (pl − qk).
pub fn is_birkhoff(x: &PeriodicConfig, tol: f64) -> BirkhoffCheck {
    for k in 0..x.p as i64 {
        for l in birkhoff_band(x.p, x.q, k) {
            if compare(&x.shift(k, l), x, tol) == Ordering::Incomparable {
                return BirkhoffCheck {
                    birkhoff: false,
                    witness: Some((k, l)),
                };
            }
        }
    }
    BirkhoffCheck {
        birkhoff: true,
        witness: None,
    }
}

/// max_i |x_i − x_0 − (q/p) i|; periodic in i, so one period suffices.
pub fn rotation_bound_check(x: &PeriodicConfig) -> f64 {
    let x0 = x.x0();
    let w = x.rotation_number();
    (0..x.p as i64)
        .map(|i| (x.get(i) - x0 - w * i as f64).abs())
        .fold(0.0, f64::max)
}

/// Σ_{j=a}^{b} |x_j − y_j|.
pub fn l1_window<A, B>(x: &A, y: &B, a: i64, b: i64) -> Result<f64>
where
    A: Sequence + ?Sized,
    B: Sequence + ?Sized,
{
    let mut s = 0.0;
    for j in a..=b {
        s += (x.at(j)? - y.at(j)?).abs();
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_and_extension() {
        let x = PeriodicConfig::new(3, 2, vec![0.1, 0.7, 1.4]).unwrap();
        assert_eq!(x.get(4), 2.1);
        assert!((x.x0() - (1.4 - 2.0)).abs() < 1e-15);
        assert!((x.get(-2) - (0.1 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn shift_period_is_identity() {
        let x = PeriodicConfig::new(5, 3, vec![0.1, 0.8, 1.2, 1.9, 2.4]).unwrap();
        assert_eq!(x.shift(5, 3), x);
        assert_eq!(x.shift(0, 1).values, x.values.iter().map(|v| v + 1.0).collect::<Vec<_>>());
    }

    #[test]
    fn compare_basic() {
        let x = PeriodicConfig::linear(4, 1, 0.3);
        assert_eq!(compare(&x, &x.shift(0, 1), ORDER_TOL), Ordering::StrictlyBelow);
        assert_eq!(compare(&x, &x, ORDER_TOL), Ordering::Equal);
        assert_eq!(compare(&x.shift(0, 1), &x, ORDER_TOL), Ordering::StrictlyAbove);
    }

    #[test]
    fn compare_two_slot_example_matches_enumeration() {
        let x = PeriodicConfig::new(2, 1, vec![0.0, 0.9]).unwrap();
        let y = x.shift(1, 0);
        let d: Vec<f64> = (1..=2).map(|i| y.get(i) - x.get(i)).collect();
        let expect = if d.iter().all(|v| *v < 0.0) {
            Ordering::StrictlyAbove
        } else if d.iter().all(|v| *v > 0.0) {
            Ordering::StrictlyBelow
        } else {
            Ordering::Incomparable
        };
        assert_eq!(compare(&x, &y, ORDER_TOL), expect);
    }

    #[test]
    fn compare_on_common_refinement() {
        let x = PeriodicConfig::linear(2, 1, 0.0);
        let y = PeriodicConfig::linear(4, 2, 0.5);
        assert_eq!(compare(&x, &y, ORDER_TOL), Ordering::StrictlyBelow);
        let z = PeriodicConfig::linear(3, 1, 0.0);
        assert_eq!(compare(&x, &z, ORDER_TOL), Ordering::Incomparable);
    }

    #[test]
    fn linear_is_birkhoff_spike_is_not() {
        let x = PeriodicConfig::linear(7, 3, 0.2);
        assert!(is_birkhoff(&x, ORDER_TOL).birkhoff);
        assert!(rotation_bound_check(&x) < 1e-12);

        let spike = PeriodicConfig::new(4, 1, vec![0.0, 10.0, 0.1, 0.2]).unwrap();
        let c = is_birkhoff(&spike, ORDER_TOL);
        assert!(!c.birkhoff);
        let (k, l) = c.witness.unwrap();
        // brute force confirms the witness
        let d: Vec<f64> = (1..=4).map(|i| spike.shift(k, l).get(i) - spike.get(i)).collect();
        assert!(d.iter().any(|v| *v > 0.0) && d.iter().any(|v| *v < 0.0));
        assert!(rotation_bound_check(&spike) > 1.0);
    }

    #[test]
    fn reduction_is_lossless() {
        let x = PeriodicConfig::new(3, 2, vec![0.2, 0.9, 1.5]).unwrap();
        let big = x.embed(4).unwrap();
        let r = big.reduced(1e-12);
        assert_eq!((r.p, r.q), (3, 2));
        assert_eq!(compare(&r, &big, ORDER_TOL), Ordering::Equal);
    }

    #[test]
    fn windows() {
        let w = SeqWindow::new(-2, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(w.hi(), 0);
        assert_eq!(w.shift(3, 1).value(1), Some(2.0));
        assert!(l1_window(&w, &w, -2, 0).unwrap() == 0.0);
        assert!(l1_window(&w, &w, -3, 0).is_err());
        let v = SeqWindow::new(-1, vec![5.0, 0.0]).unwrap();
        let m = w.meet(&v).unwrap();
        assert_eq!((m.lo, m.values.clone()), (-1, vec![2.0, 0.0]));
    }
}
