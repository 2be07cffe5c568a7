//! The periodic action W_p on X_{p,q}, its minimization and the classical
//! minimizer properties as runtime checks.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{birkhoff_band, compare, is_birkhoff, Ordering, PeriodicConfig, SeqWindow, Sequence};
use crate::potentials::LocalPotentialFamily;

/// W_p(x) = Σ_{j=1}^p S_j(x).
pub fn periodic_action(f: &LocalPotentialFamily, x: &PeriodicConfig) -> f64 {
    (1..=x.p as i64)
        .map(|j| f.local_energy(j, x).expect("periodic configs are total"))
        .sum()
}

/// W_[i1,i2](x) = Σ_{j=i1}^{i2} S_j(x).
pub fn window_action<S: Sequence + ?Sized>(
    f: &LocalPotentialFamily,
    x: &S,
    i1: i64,
    i2: i64,
) -> Result<f64> {
    (i1..=i2).map(|j| f.local_energy(j, x)).sum()
}

fn slot(i: i64, p: usize) -> usize {
    (i - 1).rem_euclid(p as i64) as usize
}

/// ∂W_p/∂x_m for m = 1..=p; coincides with the recurrence residual.
pub fn periodic_gradient(f: &LocalPotentialFamily, x: &PeriodicConfig) -> Vec<f64> {
    let r = f.range() as i64;
    let mut g = vec![0.0; x.p];
    for j in 1..=x.p as i64 {
        let w = f.window(x, j).expect("periodic configs are total");
        for (t, gt) in f.window_gradient(&w).into_iter().enumerate() {
            g[slot(j - r + t as i64, x.p)] += gt;
        }
    }
    g
}

/// Dense p×p Hessian of W_p, row-major.
pub fn periodic_hessian(f: &LocalPotentialFamily, x: &PeriodicConfig) -> Vec<f64> {
    let r = f.range() as i64;
    let n = (2 * r + 1) as usize;
    let p = x.p;
    let mut h = vec![0.0; p * p];
    for j in 1..=p as i64 {
        let w = f.window(x, j).expect("periodic configs are total");
        let hw = f.window_hessian(&w);
        for a in 0..n {
            let sa = slot(j - r + a as i64, p);
            for b in 0..n {
                h[sa * p + slot(j - r + b as i64, p)] += hw[a * n + b];
            }
        }
    }
    h
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// L-BFGS memory; 0 gives plain gradient descent with adaptive step.
    pub memory: usize,
    /// Largest p for which dense Newton polishing is attempted.
    pub newton_max_p: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol: 1e-10,
            max_iter: 50_000,
            memory: 12,
            newton_max_p: 800,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeResult {
    pub config: PeriodicConfig,
    pub action: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Action after every accepted step.
    #[serde(skip)]
    pub trace: Vec<f64>,
}

pub enum Init {
    Config(PeriodicConfig),
    Seed(u64),
}

/// Linear profile ξ0 + (q/p) i with per-site jitter.
pub fn jittered_start(p: usize, q: i64, xi0: f64, jitter: f64, rng: &mut impl Rng) -> PeriodicConfig {
    let mut x = PeriodicConfig::linear(p, q, xi0);
    if jitter > 0.0 {
        for v in &mut x.values {
            *v += rng.gen_range(-jitter..=jitter);
        }
    }
    x
}

/// Minimizes W_p over X_{p,q} by L-BFGS with Armijo backtracking, polished
/// with damped Newton steps when the line search stalls near the optimum.
pub fn minimize_periodic(
    f: &LocalPotentialFamily,
    p: usize,
    q: i64,
    init: Init,
    opts: &MinimizeOptions,
) -> Result<MinimizeResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("tol must be > 0".into()));
    }
    let start = match init {
        Init::Config(c) => {
            if c.p != p || c.q != q {
                return Err(Error::InvalidArgument("initial config not in X_{p,q}".into()));
            }
            c
        }
        Init::Seed(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let xi0 = rng.gen_range(0.0..1.0);
            jittered_start(p, q, xi0, 0.25, &mut rng)
        }
    };
    Ok(Minimizer::new(f, start, opts).run())
}

struct Minimizer<'a> {
    f: &'a LocalPotentialFamily,
    x: PeriodicConfig,
    fx: f64,
    g: Vec<f64>,
    opts: &'a MinimizeOptions,
    trace: Vec<f64>,
}

impl<'a> Minimizer<'a> {
    fn new(f: &'a LocalPotentialFamily, x: PeriodicConfig, opts: &'a MinimizeOptions) -> Self {
        let fx = periodic_action(f, &x);
        let g = periodic_gradient(f, &x);
        Minimizer {
            f,
            x,
            fx,
            g,
            opts,
            trace: vec![fx],
        }
    }

    fn trial(&self, d: &[f64], alpha: f64) -> (PeriodicConfig, f64, Vec<f64>) {
        let mut y = self.x.clone();
        for (v, di) in y.values.iter_mut().zip(d) {
            *v += alpha * di;
        }
        let fy = periodic_action(self.f, &y);
        let gy = periodic_gradient(self.f, &y);
        (y, fy, gy)
    }

    /// Accepts when the action decreases (Armijo), or when the change is
    /// below rounding noise and the gradient shrinks.
    fn acceptable(&self, fy: f64, gy: &[f64], alpha: f64, slope: f64) -> bool {
        let noise = 4.0 * f64::EPSILON * (1.0 + self.fx.abs()) * self.x.p as f64;
        fy <= self.fx + 1e-4 * alpha * slope
            || (fy <= self.fx + noise && sup_norm(gy) < sup_norm(&self.g))
    }

    fn accept(&mut self, y: PeriodicConfig, fy: f64, gy: Vec<f64>) {
        self.x = y;
        self.fx = fy;
        self.g = gy;
        self.trace.push(fy);
    }

    fn run(mut self) -> MinimizeResult {
        let p = self.x.p;
        let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut iterations = 0;
        let mut step_scale = 1.0 / (1.0 + sup_norm(&self.g));
        let mut stalls = 0;
        while iterations < self.opts.max_iter {
            if sup_norm(&self.g) <= self.opts.tol {
                break;
            }
            iterations += 1;
            let mut d = two_loop(&self.g, &mem);
            let mut slope = dot(&d, &self.g);
            if !(slope < 0.0) {
                mem.clear();
                d = self.g.iter().map(|v| -v).collect();
                slope = dot(&d, &self.g);
            }
            let mut alpha = if mem.is_empty() { step_scale } else { 1.0 };
            let mut accepted = None;
            for _ in 0..60 {
                let (y, fy, gy) = self.trial(&d, alpha);
                if self.acceptable(fy, &gy, alpha, slope) {
                    accepted = Some((y, fy, gy));
                    break;
                }
                alpha *= 0.5;
            }
            match accepted {
                Some((y, fy, gy)) => {
                    let s: Vec<f64> = y.values.iter().zip(&self.x.values).map(|(a, b)| a - b).collect();
                    let yv: Vec<f64> = gy.iter().zip(&self.g).map(|(a, b)| a - b).collect();
                    let sy = dot(&s, &yv);
                    if sy > 1e-300 {
                        if mem.len() == self.opts.memory {
                            mem.pop_front();
                        }
                        if self.opts.memory > 0 {
                            mem.push_back((s, yv, 1.0 / sy));
                        }
                    }
                    if mem.is_empty() {
                        step_scale = (alpha * 2.0).min(1.0);
                    }
                    self.accept(y, fy, gy);
                    stalls = 0;
                }
                None => {
                    mem.clear();
                    stalls += 1;
                    if !self.newton_polish() && stalls > 2 {
                        break;
                    }
                }
            }
        }
        if sup_norm(&self.g) > self.opts.tol {
            self.newton_polish();
        }
        let grad_norm = sup_norm(&self.g);
        let config = self.x.normalized();
        let action = periodic_action(self.f, &config);
        debug_assert_eq!(config.p, p);
        MinimizeResult {
            config,
            action,
            grad_norm,
            iterations,
            converged: grad_norm <= self.opts.tol,
            trace: self.trace,
        }
    }

    /// Damped Newton steps on the dense Hessian; returns whether any step
    /// was accepted.
    fn newton_polish(&mut self) -> bool {
        let p = self.x.p;
        if p > self.opts.newton_max_p {
            return false;
        }
        let mut any = false;
        for _ in 0..30 {
            if sup_norm(&self.g) <= self.opts.tol {
                break;
            }
            let h = periodic_hessian(self.f, &self.x);
            let scale = (0..p).map(|i| h[i * p + i].abs()).fold(1.0, f64::max);
            let mut mu = 1e-10 * scale;
            let mut step = None;
            while mu < 1e3 * scale {
                if let Some(d) = solve_shifted(&h, p, mu, &self.g) {
                    let slope = dot(&d, &self.g);
                    let (y, fy, gy) = self.trial(&d, 1.0);
                    if slope < 0.0 && self.acceptable(fy, &gy, 1.0, slope) {
                        step = Some((y, fy, gy));
                        break;
                    }
                }
                mu *= 100.0;
            }
            match step {
                Some((y, fy, gy)) => {
                    self.accept(y, fy, gy);
                    any = true;
                }
                None => break,
            }
        }
        any
    }
}

fn two_loop(g: &[f64], mem: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(mem.len());
    for (s, y, rho) in mem.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = mem.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in mem.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}

/// Solves (H + μI) d = −g by Cholesky; None if not positive definite.
fn solve_shifted(h: &[f64], p: usize, mu: f64, g: &[f64]) -> Option<Vec<f64>> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let mut s = h[i * p + j] + if i == j { mu } else { 0.0 };
            for k in 0..j {
                s -= l[i * p + k] * l[j * p + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * p + i] = s.sqrt();
            } else {
                l[i * p + j] = s / l[j * p + j];
            }
        }
    }
    let mut z = vec![0.0; p];
    for i in 0..p {
        let mut s = -g[i];
        for k in 0..i {
            s -= l[i * p + k] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k * p + i] * z[k];
        }
        z[i] = s / l[i * p + i];
    }
    Some(z)
}

/// Per-site recurrence residuals over one period.
pub fn residuals(f: &LocalPotentialFamily, x: &PeriodicConfig) -> Vec<f64> {
    (1..=x.p as i64)
        .map(|i| f.grad_component(i, x).expect("periodic configs are total"))
        .collect()
}

/// Searches (k, l) in the Birkhoff band with sup|τ_{k,l}x − y| ≤ tol.
pub fn shift_witness(x: &PeriodicConfig, y: &PeriodicConfig, tol: f64) -> Option<(i64, i64)> {
    if x.p != y.p || x.q != y.q {
        return None;
    }
    let mut best: Option<((i64, i64), f64)> = None;
    for k in 0..x.p as i64 {
        for l in birkhoff_band(x.p, x.q, k) {
            let d = (1..=x.p as i64)
                .map(|i| (x.get_plus(i - k, l) - y.get(i)).abs())
                .fold(0.0, f64::max);
            if d <= tol && best.is_none_or(|(_, b)| d < b) {
                best = Some(((k, l), d));
            }
        }
    }
    best.map(|(w, _)| w)
}

/// min over translates τ_{k,l}x of sup|τ_{k,l}x − y|, with the minimizing shift.
pub fn shift_distance(x: &PeriodicConfig, y: &PeriodicConfig) -> (f64, (i64, i64)) {
    let mut best = (f64::INFINITY, (0, 0));
    for k in 0..x.p as i64 {
        for l in birkhoff_band(x.p, x.q, k) {
            let d = (1..=x.p as i64)
                .map(|i| (x.get_plus(i - k, l) - y.get(i)).abs())
                .fold(0.0, f64::max);
            if d < best.0 {
                best = (d, (k, l));
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MergedStart {
    pub start: usize,
    pub k: i64,
    pub l: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerClass {
    pub result: MinimizeResult,
    pub first_start: usize,
    pub merged: Vec<MergedStart>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSet {
    pub p: usize,
    pub q: i64,
    pub n_starts: usize,
    pub seed: u64,
    pub dedup_tol: f64,
    /// Classes attaining the least action found, sorted by x_0 then action.
    pub members: Vec<MinimizerClass>,
    /// Converged stationary classes with larger action.
    pub local_only: Vec<MinimizerClass>,
    pub nonconverged_starts: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiStartOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub jitter: f64,
    pub dedup_tol: f64,
    pub minimize: MinimizeOptions,
}

impl MultiStartOptions {
    pub fn new(n_starts: usize, seed: u64) -> Self {
        MultiStartOptions {
            n_starts,
            seed,
            jitter: 0.25,
            dedup_tol: 1e-6,
            minimize: MinimizeOptions::default(),
        }
    }
}

/// Start configuration number `s` of a multi-start run.
pub fn start_config(p: usize, q: i64, s: usize, opts: &MultiStartOptions) -> PeriodicConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(s as u64);
    let xi0 = (s as f64 + rng.gen_range(0.0..1.0)) / opts.n_starts as f64;
    jittered_start(p, q, xi0, opts.jitter, &mut rng)
}

/// Multi-start minimization, deduplicated modulo τ.
pub fn minimizer_set(
    f: &LocalPotentialFamily,
    p: usize,
    q: i64,
    opts: &MultiStartOptions,
) -> Result<MinimizerSet> {
    if opts.n_starts == 0 {
        return Err(Error::InvalidArgument("n_starts must be >= 1".into()));
    }
    let results: Vec<MinimizeResult> = (0..opts.n_starts)
        .into_par_iter()
        .map(|s| {
            minimize_periodic(f, p, q, Init::Config(start_config(p, q, s, opts)), &opts.minimize)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut classes: Vec<MinimizerClass> = Vec::new();
    let mut nonconverged = Vec::new();
    for (s, res) in results.into_iter().enumerate() {
        if !res.converged {
            nonconverged.push(s);
            continue;
        }
        let hit = classes
            .iter_mut()
            .find_map(|c| shift_witness(&res.config, &c.result.config, opts.dedup_tol).map(|w| (c, w)));
        match hit {
            Some((c, (k, l))) => c.merged.push(MergedStart { start: s, k, l }),
            None => classes.push(MinimizerClass {
                result: res,
                first_start: s,
                merged: Vec::new(),
            }),
        }
    }
    let best = classes
        .iter()
        .map(|c| c.result.action)
        .fold(f64::INFINITY, f64::min);
    let slack = 1e-9 * (1.0 + best.abs());
    let (mut members, mut local_only): (Vec<_>, Vec<_>) =
        classes.into_iter().partition(|c| c.result.action <= best + slack);
    let key = |c: &MinimizerClass| (c.result.config.x0(), c.result.action);
    members.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    local_only.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
    Ok(MinimizerSet {
        p,
        q,
        n_starts: opts.n_starts,
        seed: opts.seed,
        dedup_tol: opts.dedup_tol,
        members,
        local_only,
        nonconverged_starts: nonconverged,
    })
}

/// Pairwise order of the members: every pair should be strictly ordered.
pub fn pairwise_orderings(set: &MinimizerSet, tol: f64) -> Vec<(usize, usize, Ordering)> {
    let mut out = Vec::new();
    for a in 0..set.members.len() {
        for b in a + 1..set.members.len() {
            let o = compare(&set.members[a].result.config, &set.members[b].result.config, tol);
            out.push((a, b, o));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub probes: usize,
    pub amplitude: f64,
    pub max_support: usize,
    pub seed: u64,
    pub min_excess: f64,
    pub birkhoff: bool,
}

/// Random finite-support perturbations h; reports min over probes of
/// W(x + h) − W(x) on the affected sites.
pub fn probe_minimality(
    f: &LocalPotentialFamily,
    x: &PeriodicConfig,
    probes: usize,
    amplitude: f64,
    seed: u64,
) -> ProbeReport {
    let r = f.range() as i64;
    let max_support = (2 * x.p).clamp(1, 16);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_excess = f64::INFINITY;
    for _ in 0..probes {
        let len = rng.gen_range(1..=max_support) as i64;
        let a = rng.gen_range(0..x.p as i64);
        let b = a + len - 1;
        let base = SeqWindow::sample(x, a - 2 * r, b + 2 * r).unwrap();
        let mut pert = base.clone();
        for i in a..=b {
            pert.values[(i - base.lo) as usize] += rng.gen_range(-amplitude..=amplitude);
        }
        let mut excess = 0.0;
        for j in a - r..=b + r {
            excess += f.local_energy(j, &pert).unwrap() - f.local_energy(j, &base).unwrap();
        }
        min_excess = min_excess.min(excess);
    }
    ProbeReport {
        probes,
        amplitude,
        max_support,
        seed,
        min_excess,
        birkhoff: is_birkhoff(x, crate::lattice::ORDER_TOL).birkhoff,
    }
}

/// (W_p(x∧y) + W_p(x∨y), W_p(x) + W_p(y)).
pub fn max_principle_check(
    f: &LocalPotentialFamily,
    x: &PeriodicConfig,
    y: &PeriodicConfig,
) -> Result<(f64, f64)> {
    let lhs = periodic_action(f, &x.meet(y)?) + periodic_action(f, &x.join(y)?);
    let rhs = periodic_action(f, x) + periodic_action(f, y);
    Ok((lhs, rhs))
}
