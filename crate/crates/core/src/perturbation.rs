//! Smooth bumps supported in a gap of an extended orbit, and the
//! perturbed families S^ε_j = S_j + φ(x_j) built from them.
//!
//! The transition function is S(u) = f(u)/(f(u) + f(1−u)) with
//! f(u) = e^{−1/u}; derivatives come from truncated Taylor arithmetic.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::action::{minimizer_set, periodic_action, shift_distance, MultiStartOptions};
use crate::birkhoff::{extended_orbit, find_gaps, frac, GapInterval};
use crate::error::{Error, Result};
use crate::exact::{rational_ceil_f64, rational_str};
use crate::lattice::PeriodicConfig;
use crate::potentials::{LocalPotentialFamily, OnsiteTerm};

/// Normalized Taylor coefficients g^{(i)}(u)/i!, i = 0..len.
#[derive(Clone, Debug, PartialEq)]
struct Jet(Vec<f64>);

impl Jet {
    fn var(u: f64, slope: f64, n: usize) -> Jet {
        let mut c = vec![0.0; n + 1];
        c[0] = u;
        if n >= 1 {
            c[1] = slope;
        }
        Jet(c)
    }

    fn zero(n: usize) -> Jet {
        Jet(vec![0.0; n + 1])
    }

    fn add(&self, o: &Jet) -> Jet {
        Jet(self.0.iter().zip(&o.0).map(|(a, b)| a + b).collect())
    }

    fn div(&self, o: &Jet) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (1..=i).map(|j| o.0[j] * c[i - j]).sum();
            c[i] = (self.0[i] - s) / o.0[0];
        }
        Jet(c)
    }

    fn recip(&self) -> Jet {
        let mut one = Jet::zero(self.0.len() - 1);
        one.0[0] = 1.0;
        one.div(self)
    }

    fn exp(&self) -> Jet {
        let n = self.0.len();
        let mut c = vec![0.0; n];
        c[0] = self.0[0].exp();
        for i in 1..n {
            c[i] = (1..=i).map(|j| j as f64 * self.0[j] * c[i - j]).sum::<f64>() / i as f64;
        }
        Jet(c)
    }

    /// Plain derivatives g^{(i)}.
    fn derivatives(&self) -> Vec<f64> {
        let mut fact = 1.0;
        self.0
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i > 0 {
                    fact *= i as f64;
                }
                c * fact
            })
            .collect()
    }
}

/// Jet of e^{−1/v} for v = u0 + slope·(u − u), zero for v ≤ 0.
fn flat_jet(v: f64, slope: f64, n: usize) -> Jet {
    if v <= 0.0 {
        return Jet::zero(n);
    }
    let e = Jet::var(v, slope, n).recip();
    let neg = Jet(e.0.iter().map(|c| -c).collect());
    let out = neg.exp();
    if out.0.iter().any(|c| !c.is_finite()) {
        return Jet::zero(n);
    }
    out
}

/// S^{(i)}(u), i = 0..=n, for the smooth step S: [0,1] → [0,1].
pub fn smooth_step_derivs(u: f64, n: usize) -> Vec<f64> {
    if u <= 0.0 {
        return vec![0.0; n + 1];
    }
    if u >= 1.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    let a = flat_jet(u, 1.0, n);
    let b = flat_jet(1.0 - u, -1.0, n);
    let den = a.add(&b);
    if den.0[0] == 0.0 {
        return vec![0.0; n + 1];
    }
    a.div(&den).derivatives()
}

/// β^{(i)}(t) for the unit bump: S(4t) on [0, 1/4], 1 on [1/4, 3/4],
/// S(4(1−t)) on [3/4, 1], 0 elsewhere.
pub fn unit_bump_derivs(t: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    if t <= 0.0 || t >= 1.0 {
        return out;
    }
    if (0.25..=0.75).contains(&t) {
        out[0] = 1.0;
        return out;
    }
    let (u, sign) = if t < 0.25 { (4.0 * t, 4.0) } else { (4.0 * (1.0 - t), -4.0) };
    let s = smooth_step_derivs(u, n);
    let mut f = 1.0;
    for i in 0..=n {
        out[i] = s[i] * f;
        f *= sign;
    }
    out
}

const CK_GRID: usize = 40_000;

fn compute_c_k(k: usize) -> BigRational {
    // M_n = grid max of |S^{(n)}|, padded by half a grid step times a
    // doubled bound on the next derivative.
    let h = 1.0 / CK_GRID as f64;
    let mut m = vec![0.0f64; k + 2];
    for i in 0..=CK_GRID {
        let d = smooth_step_derivs(i as f64 * h, k + 1);
        for n in 0..=k + 1 {
            m[n] = m[n].max(d[n].abs());
        }
    }
    let mut c: f64 = 1.0;
    for n in 1..=k {
        let b = m[n] + 0.5 * h * 2.0 * m[n + 1];
        c = c.max(4f64.powi(n as i32) * b);
    }
    rational_ceil_f64(c * (1.0 + 1e-6))
}

/// Certified bound C_k ≥ max_{n≤k} sup |β^{(n)}|, rounded up to a
/// rational with six decimals. Cached per k.
pub fn c_k_rational(k: usize) -> BigRational {
    static CACHE: OnceLock<Mutex<HashMap<usize, BigRational>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&k) {
        return v.clone();
    }
    let v = compute_c_k(k);
    cache.lock().unwrap().insert(k, v.clone());
    v
}

pub fn c_k(k: usize) -> f64 {
    c_k_rational(k).to_f64().unwrap()
}

/// φ(ξ) = (ε w^k / C_k) β(((ξ − ξ₋) mod 1)/w), w = ξ₊ − ξ₋.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub xi_minus: f64,
    pub xi_plus: f64,
    pub eps: f64,
    pub k: usize,
    pub c_k: f64,
    #[serde(with = "rational_str")]
    pub c_k_exact: BigRational,
}

pub fn make_bump(xi_minus: f64, xi_plus: f64, eps: f64, k: usize) -> Result<BumpSpec> {
    if !(xi_minus < xi_plus && xi_plus < xi_minus + 1.0) || !xi_minus.is_finite() || !xi_plus.is_finite() {
        return Err(Error::InvalidArgument(format!("degenerate bump interval ({xi_minus}, {xi_plus})")));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument("ε must be > 0".into()));
    }
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    let exact = c_k_rational(k);
    Ok(BumpSpec {
        xi_minus,
        xi_plus,
        eps,
        k,
        c_k: exact.to_f64().unwrap(),
        c_k_exact: exact,
    })
}

impl BumpSpec {
    pub fn width(&self) -> f64 {
        self.xi_plus - self.xi_minus
    }

    /// The constant value on the middle half.
    pub fn plateau_value(&self) -> f64 {
        self.eps * self.width().powi(self.k as i32) / self.c_k
    }

    pub fn plateau(&self) -> (f64, f64) {
        let w = self.width();
        (self.xi_minus + w / 4.0, self.xi_plus - w / 4.0)
    }

    /// φ^{(i)}(ξ) for i = 0..=n.
    pub fn derivs(&self, xi: f64, n: usize) -> Vec<f64> {
        let w = self.width();
        let d = frac(xi - self.xi_minus);
        if d >= w {
            return vec![0.0; n + 1];
        }
        let b = unit_bump_derivs(d / w, n);
        let amp = self.plateau_value();
        let mut s = 1.0;
        b.iter()
            .map(|v| {
                let r = amp * v * s;
                s /= w;
                r
            })
            .collect()
    }

    pub fn value(&self, xi: f64) -> f64 {
        self.derivs(xi, 0)[0]
    }

    /// max_{n≤k} max over a uniform grid on one period of |φ^{(n)}|.
    pub fn sampled_ck_norm(&self, grid: usize) -> f64 {
        (0..grid)
            .map(|i| {
                let xi = self.xi_minus + i as f64 / grid as f64;
                self.derivs(xi, self.k).iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }
}

impl OnsiteTerm for BumpSpec {
    fn derivative(&self, xi: f64, n: usize) -> f64 {
        self.derivs(xi, n)[n]
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "bump": self })
    }
}

/// Σ of bumps on pairwise disjoint gaps, the r-th largest gap carrying
/// size ε·2^{−r}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CantorBump {
    pub bumps: Vec<BumpSpec>,
    pub eps: f64,
    pub k: usize,
}

pub const CANTOR_GAPS: usize = 64;

pub fn cantor_bump(gaps: &[GapInterval], eps: f64, k: usize, max_gaps: usize) -> Result<CantorBump> {
    let mut sorted: Vec<GapInterval> = gaps.to_vec();
    sorted.sort_by(|a, b| b.len().total_cmp(&a.len()).then(a.lo.total_cmp(&b.lo)));
    sorted.truncate(max_gaps);
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            if a.overlap(b.lo, b.hi) > 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "gaps ({}, {}) and ({}, {}) overlap",
                    a.lo, a.hi, b.lo, b.hi
                )));
            }
        }
    }
    let bumps = sorted
        .iter()
        .enumerate()
        .map(|(r, g)| make_bump(g.lo, g.hi, eps * 0.5f64.powi(r as i32), k))
        .collect::<Result<_>>()?;
    Ok(CantorBump { bumps, eps, k })
}

impl CantorBump {
    pub fn sampled_ck_norm(&self, grid: usize) -> f64 {
        (0..grid)
            .map(|i| {
                let xi = i as f64 / grid as f64;
                (0..=self.k).fold(0.0f64, |m, n| m.max(self.derivative(xi, n).abs()))
            })
            .fold(0.0, f64::max)
    }
}

impl OnsiteTerm for CantorBump {
    fn derivative(&self, xi: f64, n: usize) -> f64 {
        self.bumps.iter().map(|b| b.derivative(xi, n)).sum()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::json!({ "cantor_bump": { "eps": self.eps, "k": self.k, "gaps": self.bumps.len(), "bumps": self.bumps } })
    }
}

/// S^ε_j = S_j + φ(x_j).
pub fn perturb(f: &LocalPotentialFamily, phi: Arc<dyn OnsiteTerm>) -> LocalPotentialFamily {
    f.with_onsite(phi)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DestroyOptions {
    pub multistart: MultiStartOptions,
    /// Shift-identification tolerance for the re-minimized set.
    pub identify_tol: f64,
    /// Tolerance on the action-excess bound.
    pub excess_tol: f64,
    /// Period multiplier M for excess probes.
    pub m: usize,
    /// Numbers of sites moved onto the plateau, one probe each.
    pub probe_sites: Vec<usize>,
}

impl DestroyOptions {
    pub fn new(n_starts: usize, seed: u64) -> Self {
        DestroyOptions {
            multistart: MultiStartOptions::new(n_starts, seed),
            identify_tol: 1e-6,
            excess_tol: 1e-9,
            m: 2,
            probe_sites: vec![1, 2],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReminimizedClass {
    pub first_start: usize,
    pub starts: usize,
    pub action: f64,
    pub converged: bool,
    /// min over (k, l) of max_i |(τ_{k,l} y)_i − y^min_i|.
    pub shift_distance: f64,
    pub witness: (i64, i64),
    pub max_gap_depth: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcessProbe {
    pub m: usize,
    pub sites: usize,
    pub excess: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DestroyReport {
    pub p: usize,
    pub q: i64,
    pub y_min: PeriodicConfig,
    pub y_min_action: f64,
    pub gap: GapInterval,
    pub bump: BumpSpec,
    /// Distinct minimizing classes of the unperturbed problem.
    pub unperturbed_classes: usize,
    /// W^ε_p(y_min) − W_p(y_min); zero since φ vanishes on Σ_{y_min}.
    pub y_min_action_change: f64,
    /// Classes at the lowest action found.
    pub reminimized: Vec<ReminimizedClass>,
    /// Converged stationary classes of strictly higher action.
    pub stationary_non_minimal: Vec<ReminimizedClass>,
    pub nonconverged_starts: Vec<usize>,
    /// Largest shift distance over `reminimized`.
    pub max_shift_distance: f64,
    pub all_translates: bool,
    pub probes: Vec<ExcessProbe>,
    pub identify_tol: f64,
}

/// How far the points of x reach into the open gap, measured from its
/// nearer endpoint (0 when no point is inside).
pub fn gap_depth(x: &PeriodicConfig, gap: &GapInterval) -> f64 {
    x.values
        .iter()
        .map(|&v| {
            let d = frac(v - gap.lo);
            if d > 0.0 && d < gap.len() {
                d.min(gap.len() - d)
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

/// Perturbs F by a bump on the largest gap of a (p,q)-minimizer so that
/// y_min becomes its only minimizer modulo shifts.
pub fn destroy_periodic(
    f: &LocalPotentialFamily,
    p: usize,
    q: i64,
    eps: f64,
    k: usize,
    opts: &DestroyOptions,
) -> Result<(LocalPotentialFamily, DestroyReport)> {
    let base = minimizer_set(f, p, q, &opts.multistart)?;
    let first = base
        .members
        .first()
        .ok_or_else(|| Error::Budget(format!("no converged ({p},{q})-minimizer")))?;
    let y_min = first.result.config.clone();
    let gap = find_gaps(&extended_orbit(&y_min))[0];
    let bump = make_bump(gap.lo, gap.hi, eps, k)?;
    let fe = perturb(f, Arc::new(bump.clone()));
    let w0 = periodic_action(f, &y_min);
    let y_min_action_change = periodic_action(&fe, &y_min) - w0;

    let after = minimizer_set(&fe, p, q, &opts.multistart)?;
    let classify = |cs: &[crate::action::MinimizerClass]| {
        let mut out: Vec<ReminimizedClass> = cs
            .iter()
            .map(|c| {
                let (d, w) = shift_distance(&c.result.config, &y_min);
                ReminimizedClass {
                    first_start: c.first_start,
                    starts: 1 + c.merged.len(),
                    action: c.result.action,
                    converged: c.result.converged,
                    shift_distance: d,
                    witness: w,
                    max_gap_depth: gap_depth(&c.result.config, &gap),
                }
            })
            .collect();
        out.sort_by_key(|c| c.first_start);
        out
    };
    let reminimized = classify(&after.members);
    let stationary_non_minimal = classify(&after.local_only);
    let max_shift_distance = reminimized.iter().map(|c| c.shift_distance).fold(0.0, f64::max);
    let all_translates = after.nonconverged_starts.is_empty() && max_shift_distance <= opts.identify_tol;

    // probes in X_{Mp,Mq}: y_min with `sites` points moved to the plateau
    let big = y_min.embed(opts.m)?;
    let wy = periodic_action(&fe, &big);
    let (pl, pr) = bump.plateau();
    let mid = 0.5 * (pl + pr);
    let mut probes = Vec::new();
    for &sites in &opts.probe_sites {
        if sites > big.p {
            continue;
        }
        let mut x = big.clone();
        for s in 0..sites {
            // spread the moved sites over the period
            let i = s * big.p / sites;
            let v = x.values[i];
            let target = mid + (v - mid).round();
            x.values[i] = target;
        }
        let excess = periodic_action(&fe, &x) - wy;
        let bound = sites as f64 * bump.plateau_value();
        probes.push(ExcessProbe {
            m: opts.m,
            sites,
            excess,
            bound,
            pass: excess >= bound - opts.excess_tol,
        });
    }

    let report = DestroyReport {
        p,
        q,
        y_min_action: w0,
        y_min,
        gap,
        bump,
        unperturbed_classes: base.members.len(),
        y_min_action_change,
        reminimized,
        stationary_non_minimal,
        nonconverged_starts: after.nonconverged_starts.clone(),
        max_shift_distance,
        all_translates,
        probes,
        identify_tol: opts.identify_tol,
    };
    Ok((fe, report))
}
