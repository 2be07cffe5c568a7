//! Extended orbits Σ_x mod 1 and their gaps, the elementary translation
//! U_{p,q}, near-periodicity windows and the ψ-confinement of Birkhoff
//! sequences between y and U^a y.

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{is_birkhoff, PeriodicConfig, Sequence, ORDER_TOL};
use crate::number_theory::{budget_a_i64, extended_euclid_i64, RotationSpec};

/// Points closer than this (mod 1) are identified.
pub const ORBIT_TOL: f64 = 1e-12;

/// ξ mod 1 in [0, 1).
pub fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

/// Σ_x mod 1 for a periodic sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtendedOrbit {
    pub p: usize,
    pub q: i64,
    pub points: Vec<f64>,
}

impl ExtendedOrbit {
    pub fn from_points(p: usize, q: i64, pts: impl IntoIterator<Item = f64>) -> Self {
        let mut v: Vec<f64> = pts.into_iter().map(frac).collect();
        v.sort_by(f64::total_cmp);
        let mut points: Vec<f64> = Vec::with_capacity(v.len());
        for x in v {
            if points.last().is_none_or(|&l| x - l > ORBIT_TOL) {
                points.push(x);
            }
        }
        // 0.999.. and 0.0 are the same point on the circle
        if points.len() > 1 && points[0] + 1.0 - points[points.len() - 1] <= ORBIT_TOL {
            points.pop();
        }
        ExtendedOrbit { p, q, points }
    }
}

pub fn extended_orbit(x: &PeriodicConfig) -> ExtendedOrbit {
    ExtendedOrbit::from_points(x.p, x.q, x.values.iter().copied())
}

/// A complementary interval (lo, hi) of Σ_x, with hi − lo ≤ 1 and
/// lo ∈ [0, 1); hi may exceed 1 for the gap that wraps around.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapInterval {
    pub lo: f64,
    pub hi: f64,
    pub endpoints_in_orbit: bool,
}

impl GapInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && hi < lo + 1.0 + 1e-15) {
            return Err(Error::InvalidArgument(format!("degenerate gap ({lo}, {hi})")));
        }
        Ok(GapInterval { lo, hi, endpoints_in_orbit: false })
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    /// Whether ξ (mod 1) lies in the open interval; points within
    /// ORBIT_TOL of an endpoint count as the endpoint.
    pub fn contains(&self, xi: f64) -> bool {
        let d = frac(xi - self.lo);
        d > ORBIT_TOL && d < self.len() - ORBIT_TOL
    }

    /// Length of the overlap with [a, b] measured on the circle.
    pub fn overlap(&self, a: f64, b: f64) -> f64 {
        let mut best: f64 = 0.0;
        for shift in [-1.0, 0.0, 1.0] {
            let lo = self.lo.max(a + shift);
            let hi = self.hi.min(b + shift);
            best = best.max(hi - lo);
        }
        best.max(0.0)
    }
}

/// Gaps sorted by length (longest first, ties by position).
pub fn find_gaps(o: &ExtendedOrbit) -> Vec<GapInterval> {
    let n = o.points.len();
    if n == 0 {
        return vec![GapInterval { lo: 0.0, hi: 1.0, endpoints_in_orbit: false }];
    }
    let mut gaps: Vec<GapInterval> = (0..n)
        .map(|i| {
            let lo = o.points[i];
            let hi = if i + 1 < n { o.points[i + 1] } else { o.points[0] + 1.0 };
            GapInterval { lo, hi, endpoints_in_orbit: true }
        })
        .collect();
    gaps.sort_by(|a, b| b.len().total_cmp(&a.len()).then(a.lo.total_cmp(&b.lo)));
    gaps
}

/// Exact gaps of a finite set of rationals mod 1, longest first.
pub fn find_gaps_exact(points: &[BigRational]) -> Vec<(BigRational, BigRational)> {
    let mut v: Vec<BigRational> = points.iter().map(|x| x - x.floor()).collect();
    v.sort();
    v.dedup();
    let n = v.len();
    if n == 0 {
        return vec![(BigRational::zero(), BigRational::one())];
    }
    let mut gaps: Vec<(BigRational, BigRational)> = (0..n)
        .map(|i| {
            let hi = if i + 1 < n { v[i + 1].clone() } else { &v[0] + BigRational::one() };
            (v[i].clone(), hi)
        })
        .collect();
    gaps.sort_by(|a, b| (&b.1 - &b.0).cmp(&(&a.1 - &a.0)).then(a.0.cmp(&b.0)));
    gaps
}

/// U^power_{p,q} x with U = τ_{s,t}, pt − qs = 1.
pub fn translate_u(x: &PeriodicConfig, power: i64) -> Result<PeriodicConfig> {
    let (s, t) = extended_euclid_i64(x.p as i64, x.q)?;
    Ok(x.shift(s * power, t * power))
}

/// (‖τ_{k,l}x − x‖_{l1(p)}, |pl − qk|).
pub fn tauaction_check(x: &PeriodicConfig, k: i64, l: i64) -> (f64, i64) {
    let norm = x.shift(k, l).l1_period(x);
    (norm, (x.p as i64 * l - x.q * k).abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearPeriodicity {
    pub i0: i64,
    pub achieved: f64,
    pub bound: f64,
    pub a: i64,
    /// achieved value for every i0 ∈ (−p, 0] (None: no admissible pair).
    pub scan: Vec<(i64, Option<f64>)>,
    /// max over [i1, i2] of |x_i − x_{i1} − ω(i − i1)|; 0 for a rigid
    /// rotation, nonzero for periodic proxies of an irrational orbit.
    pub rotation_defect: f64,
}

/// max over admissible m, n of ‖τ^{−m}x − τ^{−n}x‖_{l1[i0−r, i0+r−1]}.
fn window_spread(x: &dyn Sequence, p: i64, q: i64, r: i64, i0: i64, i1: i64, i2: i64) -> Result<Option<f64>> {
    // admissible m: i1 + r ≤ i0 + mp ≤ i2 − r + 1
    let m_lo = num_integer::Integer::div_ceil(&(i1 + r - i0), &p);
    let m_hi = num_integer::Integer::div_floor(&(i2 - r + 1 - i0), &p);
    if m_hi < m_lo {
        return Ok(None);
    }
    let rows: Vec<Vec<f64>> = (m_lo..=m_hi)
        .map(|m| {
            (i0 - r..i0 + r)
                .map(|i| Ok(x.at(i + m * p)? - (m * q) as f64))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut best: f64 = 0.0;
    for a in 0..rows.len() {
        for b in a + 1..rows.len() {
            let s: f64 = rows[a].iter().zip(&rows[b]).map(|(u, v)| (u - v).abs()).sum();
            best = best.max(s);
        }
    }
    Ok(Some(best))
}

/// Finds the smallest i0 ∈ (−p, 0] whose r-windows along [i1, i2] stay
/// within 2r·a/p of each other.
pub fn near_periodicity_verify(
    x: &dyn Sequence,
    omega: &RotationSpec,
    p: i64,
    q: i64,
    r: i64,
    i1: i64,
    i2: i64,
) -> Result<NearPeriodicity> {
    if p < 1 || r < 1 || i2 <= i1 {
        return Err(Error::InvalidArgument("need p ≥ 1, r ≥ 1 and i1 < i2".into()));
    }
    extended_euclid_i64(p, q)?;
    x.require(i1, i2)?;
    let a = budget_a_i64(p, q, omega, i2 - i1)?;
    let bound = 2.0 * r as f64 * a as f64 / p as f64;
    let scan: Vec<(i64, Option<f64>)> = (-p + 1..=0)
        .map(|i0| Ok((i0, window_spread(x, p, q, r, i0, i1, i2)?)))
        .collect::<Result<_>>()?;
    if scan.iter().all(|s| s.1.is_none()) {
        return Err(Error::InvalidArgument(format!(
            "no admissible (m, n) pair: window [{i1}, {i2}] too short for p = {p}, r = {r}"
        )));
    }
    let slack = 1e-12 * (1.0 + bound);
    let (i0, achieved) = scan
        .iter()
        .filter_map(|&(i, v)| v.map(|v| (i, v)))
        .find(|&(_, v)| v <= bound + slack)
        .or_else(|| {
            scan.iter()
                .filter_map(|&(i, v)| v.map(|v| (i, v)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
        })
        .unwrap();
    let w = omega.approx_f64();
    let base = x.at(i1)? - w * i1 as f64;
    let mut defect: f64 = 0.0;
    for i in i1..=i2 {
        defect = defect.max((x.at(i)? - base - w * i as f64).abs());
    }
    Ok(NearPeriodicity { i0, achieved, bound, a, scan, rotation_defect: defect })
}

/// Smallest i0 ∈ (−p, 0] with Σ_{j=i0−r}^{i0+r−1} |(U^a y)_j − y_j| ≤ 2r·a/p.
pub fn pigeonhole_select(y: &PeriodicConfig, a: i64, r: i64) -> Result<(i64, f64, f64)> {
    let u = translate_u(y, a)?;
    let p = y.p as i64;
    let bound = 2.0 * r as f64 * a as f64 / p as f64;
    let mut best = (0, f64::INFINITY);
    for i0 in -p + 1..=0 {
        let s: f64 = (i0 - r..i0 + r).map(|j| (u.get(j) - y.get(j)).abs()).sum();
        if s <= bound + 1e-12 * (1.0 + bound) {
            return Ok((i0, s, bound));
        }
        if s < best.1 {
            best = (i0, s);
        }
    }
    Ok((best.0, best.1, bound))
}

/// ψ as a step function on one period: breakpoints θ ∈ [0, 1) with
/// values; ψ(n + θ) = ψ(θ) + n.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    pub breakpoints: Vec<(f64, f64)>,
}

impl PsiTable {
    fn build(mut pts: Vec<(f64, f64)>) -> Self {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        PsiTable { breakpoints: pts }
    }

    /// Value at the greatest breakpoint ≤ ξ.
    pub fn eval(&self, xi: f64) -> f64 {
        let n = xi.floor();
        let t = xi - n;
        let bp = &self.breakpoints;
        let idx = bp.partition_point(|b| b.0 <= t);
        if idx == 0 {
            bp[bp.len() - 1].1 - 1.0 + n
        } else {
            bp[idx - 1].1 + n
        }
    }

    pub fn is_monotone(&self) -> bool {
        let bp = &self.breakpoints;
        bp.windows(2).all(|w| w[1].1 >= w[0].1 - ORDER_TOL)
            && bp.last().is_none_or(|l| l.1 <= bp[0].1 + 1.0 + ORDER_TOL)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfinementResult {
    pub y: PeriodicConfig,
    pub a: i64,
    /// q/p > ω: the construction runs with arguments shifted by −a/p.
    pub mirrored: bool,
    pub psi: PsiTable,
    /// min over [i1, i2] of x_j − y_j and of (U^a y)_j − x_j.
    pub lower_slack: f64,
    pub upper_slack: f64,
    pub birkhoff: bool,
}

/// Sandwiches x between y ∈ B_{p,q} and U^a y on [i1, i2].
pub fn confine(x: &dyn Sequence, omega: &RotationSpec, p: i64, q: i64, i1: i64, i2: i64) -> Result<ConfinementResult> {
    if p < 1 || i2 < i1 {
        return Err(Error::InvalidArgument("need p ≥ 1 and i1 ≤ i2".into()));
    }
    extended_euclid_i64(p, q)?;
    x.require(i1, i2)?;
    let a = budget_a_i64(p, q, omega, i2 - i1)?;
    let pq = num_bigint::BigInt::from(q);
    let mirrored = omega.cmp_value(&crate::exact::ExactNum::from_rational(BigRational::new(pq, p.into())))? < 0;
    let w = omega.approx_f64();
    let x1 = x.at(i1)?;
    // ψ on the graph {x_{i1} + ω(k − i1) + l ↦ x_k + l}
    let mut pts = Vec::new();
    let (k_lo, k_hi) = (i1 - p, i2 + p);
    for k in k_lo..=k_hi {
        let Some(xk) = x.value(k) else { continue };
        let g = x1 + w * (k - i1) as f64;
        let n = g.floor();
        pts.push((g - n, xk - n));
    }
    let psi = PsiTable::build(pts);
    if !psi.is_monotone() {
        return Err(Error::InvalidArgument("ψ is not monotone: input is not Birkhoff with this rotation".into()));
    }
    // ψ(x_{i1} + (q(j − i1) − shift)/p) with the integer part split off
    // first, so equal residues give bit-identical arguments
    let shift = if mirrored { a } else { 0 };
    let y_at = |j: i64| {
        let (n, rem) = num_integer::Integer::div_mod_floor(&(q * (j - i1) - shift), &p);
        psi.eval(x1 + rem as f64 / p as f64) + n as f64
    };
    let y = PeriodicConfig::new(p as usize, q, (1..=p).map(y_at).collect())?;
    let u = translate_u(&y, a)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::INFINITY);
    for j in i1..=i2 {
        let xj = x.at(j)?;
        lo = lo.min(xj - y.get(j));
        hi = hi.min(u.get(j) - xj);
    }
    let birkhoff = is_birkhoff(&y, ORDER_TOL).birkhoff;
    Ok(ConfinementResult { y, a, mirrored, psi, lower_slack: lo, upper_slack: hi, birkhoff })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::rat;
    use crate::lattice::RigidRotation;

    #[test]
    fn equally_spaced_gaps() {
        let x = PeriodicConfig::linear(5, 3, 0.0);
        let g = find_gaps(&extended_orbit(&x));
        assert_eq!(g.len(), 5);
        for gi in &g {
            assert!((gi.len() - 0.2).abs() < 1e-12);
        }
        let one = PeriodicConfig::linear(1, 0, 0.3);
        let g = find_gaps(&extended_orbit(&one));
        assert_eq!(g.len(), 1);
        assert!((g[0].len() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn exact_gaps_sum_to_one() {
        let pts: Vec<_> = (0..7).map(|i| rat(i * i, 7)).collect();
        let g = find_gaps_exact(&pts);
        let total: BigRational = g.iter().map(|(a, b)| b - a).sum();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn u_to_the_p_is_unit_translate() {
        let x = PeriodicConfig::linear(5, 3, 0.1);
        let u5 = translate_u(&x, 5).unwrap();
        for i in 1..=5 {
            assert!((u5.get(i) - x.get(i) - 1.0).abs() < 1e-12);
        }
        assert_eq!(translate_u(&x, 0).unwrap(), x);
    }

    #[test]
    fn rational_rotation_has_zero_spread() {
        let x = RigidRotation { xi0: 0.2, omega: 0.6 };
        let r = near_periodicity_verify(&x, &RotationSpec::rational(3, 5), 5, 3, 2, 0, 100).unwrap();
        assert_eq!(r.a, 0);
        assert!(r.achieved < 1e-12);
    }

    #[test]
    fn linear_confinement_is_exact() {
        let x = PeriodicConfig::linear(5, 3, 0.0);
        let c = confine(&x, &RotationSpec::rational(3, 5), 5, 3, 0, 20).unwrap();
        assert_eq!(c.a, 0);
        assert!(c.lower_slack.abs() < 1e-12 && c.upper_slack.abs() < 1e-12);
    }
}
