//! The two-stage destruction construction and its certificate.
//!
//! Stage 1 puts a bump of size ε/3 on the largest gap of a (p,q)-minimizer,
//! stage 2 one of size ε/3 on the largest gap of a (p′p, p′q+1)-minimizer
//! of the stage-1 family. The certificate carries every inequality the
//! construction relies on, exact where the quantities are rational.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::action::{
    minimize_periodic, minimizer_set, periodic_action, residuals, shift_distance, Init, MinimizeOptions,
    MultiStartOptions,
};
use crate::birkhoff::{extended_orbit, find_gaps, frac, GapInterval};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, rat, rational_ceil_f64, rational_str, rational_to_string, ExactNum};
use crate::lattice::{is_birkhoff, PeriodicConfig};
use crate::number_theory::{
    select_parameters, select_relaxed, Check, CheckScale, NotFoundReason, ParamSelection, RotationSpec, SelectInput,
    SelectOutcome,
};
use crate::perturbation::{c_k_rational, make_bump, BumpSpec};
use crate::potentials::{FamilySpec, LocalPotentialFamily, OnsiteTerm};

/// `exact-constants` or `relaxed:<factor>`; the factor multiplies the right
/// side of A2.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunMode {
    Exact,
    Relaxed(BigRational),
}

impl RunMode {
    pub fn a2_factor(&self) -> BigRational {
        match self {
            RunMode::Exact => BigRational::one(),
            RunMode::Relaxed(f) => f.clone(),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunMode::Exact => write!(f, "exact-constants"),
            RunMode::Relaxed(r) => write!(f, "relaxed:{}", rational_to_string(r)),
        }
    }
}

impl FromStr for RunMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "exact-constants" || s == "exact" {
            return Ok(RunMode::Exact);
        }
        let rest = s
            .strip_prefix("relaxed-constants:")
            .or_else(|| s.strip_prefix("relaxed:"))
            .ok_or_else(|| Error::Parse(format!("mode must be exact-constants or relaxed:<factor>, got {s:?}")))?;
        let f = parse_rational(rest)?;
        if !f.is_positive() {
            return Err(Error::InvalidArgument("relaxation factor must be > 0".into()));
        }
        Ok(RunMode::Relaxed(f))
    }
}

impl Serialize for RunMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RunMode {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub mode: RunMode,
    pub search_bound: usize,
    /// Relaxed mode: largest admissible p and p′p.
    pub p_max: u64,
    pub period_max: u64,
    pub n_starts: usize,
    pub seed: u64,
    pub tol: f64,
    pub n_probes: usize,
    /// Grid for sampled C^k norms.
    pub norm_grid: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            mode: RunMode::Relaxed(rat(1, 1_000_000)),
            search_bound: 16,
            p_max: 200,
            period_max: 5000,
            n_starts: 8,
            seed: 0,
            tol: 1e-9,
            n_probes: 10,
            norm_grid: 10_000,
        }
    }
}

/// Condition-E constant on the band |Δx| ≤ |ω| + 2, rounded up.
pub fn condition_constant(f: &LocalPotentialFamily, omega: &RotationSpec) -> Result<BigRational> {
    let d = omega.approx_f64().abs() + 2.0;
    let b = f
        .derivative_bounds(d)
        .ok_or_else(|| Error::Unsupported("condition-E bound for this family".into()))?;
    Ok(rational_ceil_f64(b.combined()))
}

fn small_int(x: &ExactNum, what: &str) -> Result<i64> {
    x.to_bigint(18)
        .and_then(|v| v.to_i64())
        .ok_or_else(|| Error::Budget(format!("{what} = {} is beyond desk scale", x.approx_string())))
}

fn small_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Start jitter for multi-start runs inside the pipeline: large jitter
/// strands long periods in non-Birkhoff metastable states.
pub fn pipeline_jitter(p: usize) -> f64 {
    (1.0 / p as f64).min(0.25)
}

fn pick_minimizer(f: &LocalPotentialFamily, p: usize, q: i64, n_starts: usize, seed: u64) -> Result<PeriodicConfig> {
    let mut o = MultiStartOptions::new(n_starts, seed);
    o.jitter = pipeline_jitter(p);
    let set = minimizer_set(f, p, q, &o)?;
    let best = set
        .members
        .iter()
        .find(|m| is_birkhoff(&m.result.config, 1e-9).birkhoff)
        .ok_or_else(|| Error::Budget(format!("no converged Birkhoff ({p},{q})-minimizer")))?;
    Ok(best.result.config.normalized())
}

/// Largest |φ^{(n)}|, n ≤ k, of the summed on-site terms over a grid.
pub fn sampled_norm(terms: &[&dyn OnsiteTerm], k: usize, grid: usize) -> f64 {
    (0..grid)
        .map(|i| {
            let xi = i as f64 / grid as f64;
            (0..=k).fold(0.0f64, |m, n| m.max(terms.iter().map(|t| t.derivative(xi, n)).sum::<f64>().abs()))
        })
        .fold(0.0, f64::max)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub p: usize,
    pub q: i64,
    pub y_min: PeriodicConfig,
    pub gap: GapInterval,
    pub bump: BumpSpec,
    /// Lower end of the middle half of the gap.
    pub xi: f64,
    pub checks: Vec<Check>,
}

pub fn stage1(
    f: &LocalPotentialFamily,
    params: &ParamSelection,
    opts: &PipelineOptions,
) -> Result<(LocalPotentialFamily, Stage1Report)> {
    let p = small_int(&params.p, "p")? as usize;
    let q = small_int(&params.q, "q")?;
    let k = params.k as usize;
    let eps = small_f64(&params.eps);
    let c_k = small_f64(&params.c_k);
    let y_min = pick_minimizer(f, p, q, opts.n_starts, opts.seed)?;
    let gap = find_gaps(&extended_orbit(&y_min))[0];
    let bump = make_bump(gap.lo, gap.hi, eps / 3.0, k)?;
    let f1 = f.with_onsite(Arc::new(bump.clone()));
    let xi = bump.plateau().0;

    let mut checks = vec![
        Check::float("stage1-gap>=1/p", gap.len(), ">=", 1.0 / p as f64 - 1e-12, true),
        Check::float("stage1-norm<=eps/3", sampled_norm(&[&bump], k, opts.norm_grid), "<=", eps / 3.0, true),
        Check::float(
            "stage1-ymin-action-unchanged",
            (periodic_action(&f1, &y_min) - periodic_action(f, &y_min)).abs(),
            "<=",
            0.0,
            true,
        ),
    ];
    // one site of y_min in X_{2p,2q} moved to the plateau
    let big = y_min.embed(2)?;
    let mut x = big.clone();
    let mid = 0.5 * (bump.plateau().0 + bump.plateau().1);
    x.values[0] = mid + (x.values[0] - mid).round();
    let excess = periodic_action(&f1, &x) - periodic_action(&f1, &big);
    let bound = eps / (3.0 * c_k * (p as f64).powi(k as i32));
    checks.push(Check::float("stage1-penalty", excess, ">=", bound - opts.tol, true));
    Ok((f1, Stage1Report { p, q, y_min, gap, bump, xi, checks }))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyProbe {
    pub x0: f64,
    pub excess: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage2Report {
    pub big_p: usize,
    pub big_q: i64,
    pub x_min: PeriodicConfig,
    pub gap2: GapInterval,
    /// ε/(C_{k,r} p^{k+1}).
    pub guaranteed_gap: f64,
    pub bump: BumpSpec,
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub probes: Vec<PenaltyProbe>,
    /// Sites of x_min per period inside the stage-1 plateau.
    pub plateau_visits: usize,
    pub checks: Vec<Check>,
}

pub fn stage2(
    f1: &LocalPotentialFamily,
    params: &ParamSelection,
    s1: &Stage1Report,
    opts: &PipelineOptions,
) -> Result<(LocalPotentialFamily, Stage2Report)> {
    let p = s1.p;
    let pp = small_int(&params.p_prime, "p'")?;
    let big_p = small_int(&params.p_prime.mul(&params.p), "p'p")? as usize;
    let big_q = pp * s1.q + 1;
    let k = params.k as usize;
    let r = params.r as usize;
    if r > big_p {
        return Err(Error::InvalidArgument(format!("r = {r} exceeds p'p = {big_p}")));
    }
    let eps = small_f64(&params.eps);
    let c_k = small_f64(&params.c_k);
    let c_kr = small_f64(&params.c_kr);
    let c = small_f64(&params.c);

    let x_min = pick_minimizer(f1, big_p, big_q, opts.n_starts, opts.seed)?;
    let gap2 = find_gaps(&extended_orbit(&x_min))[0];
    let guaranteed_gap = eps / (c_kr * (p as f64).powi(k as i32 + 1));
    let bump = make_bump(gap2.lo, gap2.hi, eps / 3.0, k)?;
    let f2 = f1.with_onsite(Arc::new(bump.clone()));
    let eta_minus = bump.plateau().0;
    let eta_plus = eta_minus + guaranteed_gap / 2.0;

    let mut checks = vec![
        Check::float("stage2-gap2-length", gap2.len(), ">=", guaranteed_gap - 1e-12, true),
        Check::float("stage2-norm<=eps/3", sampled_norm(&[&bump], k, opts.norm_grid), "<=", eps / 3.0, true),
        Check::float(
            "total-norm<=2eps/3",
            sampled_norm(&[&s1.bump, &bump], k, opts.norm_grid),
            "<=",
            2.0 * eps / 3.0,
            true,
        ),
        Check::float(
            "stage2-xmin-action-unchanged",
            (periodic_action(&f2, &x_min) - periodic_action(f1, &x_min)).abs(),
            "<=",
            0.0,
            true,
        ),
        Check::float(
            "stage2-xmin-residual",
            residuals(&f2, &x_min).iter().fold(0.0f64, |m, v| m.max(v.abs())),
            "<=",
            MinimizeOptions::default().tol,
            true,
        ),
    ];
    let again = minimize_periodic(&f2, big_p, big_q, Init::Config(x_min.clone()), &MinimizeOptions::default())?;
    checks.push(Check::float("stage2-xmin-stays", shift_distance(&again.config, &x_min).0, "<=", 1e-8, true));

    // penalty for configurations with x_0 pushed into [η₋, η₊]
    let w_min = periodic_action(&f2, &x_min);
    let bound = eps / (3.0 * c_k) * guaranteed_gap.powi(k as i32);
    let probes: Vec<PenaltyProbe> = (0..opts.n_probes)
        .map(|i| {
            let t = (i as f64 + 0.5) / opts.n_probes as f64;
            let target = eta_minus + t * (eta_plus - eta_minus);
            let mut x = x_min.clone();
            x.values[0] = target + (x.values[0] - target).round();
            let excess = periodic_action(&f2, &x) - w_min;
            PenaltyProbe {
                x0: x.values[0],
                excess,
                bound,
                pass: excess >= bound - opts.tol,
            }
        })
        .collect();
    let worst = probes.iter().map(|p| p.excess).fold(f64::INFINITY, f64::min);
    checks.push(Check::float("stage2-penalty", worst, ">=", bound - opts.tol, true));

    let (pl, pr) = s1.bump.plateau();
    let plateau_visits = x_min
        .values
        .iter()
        .filter(|&&v| {
            let d = frac(v - pl);
            d <= pr - pl
        })
        .count();
    let visit_bound = 12.0 * c * c_k * r as f64 * (2 * r + 1) as f64 * (p as f64).powi(k as i32) / eps;
    checks.push(Check::float("stage2-plateau-visits", plateau_visits as f64, "<=", visit_bound, true));

    Ok((
        f2,
        Stage2Report {
            big_p,
            big_q,
            x_min,
            gap2,
            guaranteed_gap,
            bump,
            eta_minus,
            eta_plus,
            probes,
            plateau_visits,
            checks,
        },
    ))
}

/// num/den with den > 0, kept unreduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactFraction {
    pub num: ExactNum,
    pub den: ExactNum,
}

impl ExactFraction {
    pub fn new(num: ExactNum, den: ExactNum) -> Self {
        ExactFraction { num, den }
    }

    pub fn cmp_exact(&self, o: &ExactFraction) -> Result<std::cmp::Ordering> {
        self.num.mul(&o.den).cmp_exact(&o.num.mul(&self.den))
    }

    /// The value, when the denominator is a monomial or both parts are plain.
    pub fn value(&self) -> Option<ExactNum> {
        if let (Some(n), Some(d)) = (self.num.as_rational(), self.den.as_rational()) {
            return Some(ExactNum::from_rational(n / d));
        }
        Some(self.num.mul(&self.den.recip_monomial()?))
    }

    pub fn approx_string(&self) -> String {
        match self.value() {
            Some(v) => v.approx_string(),
            None => format!("({})/({})", self.num.approx_string(), self.den.approx_string()),
        }
    }
}

/// The endpoints of the Ω-window q/p + 1/(p′p) ≤ Ω ≤ q/p + 1/((p′−1)p).
pub fn omega_window(params: &ParamSelection) -> (ExactFraction, ExactFraction) {
    let one = ExactNum::one();
    let pp1 = params.p_prime.sub(&one);
    (
        ExactFraction::new(params.p_prime.mul(&params.q).add(&one), params.p_prime.mul(&params.p)),
        ExactFraction::new(pp1.mul(&params.q).add(&one), pp1.mul(&params.p)),
    )
}

/// Exact left end and a lower bound for the right end of the Ω-window;
/// the right end is exact when representable, otherwise
/// 1/((p′−1)p) ≥ 1/(p′p) + 1/(p′²p) is used.
fn window_values(params: &ParamSelection) -> Result<(ExactNum, ExactNum)> {
    let (l, r) = omega_window(params);
    let left = l
        .value()
        .ok_or_else(|| Error::Unsupported("Ω-window with a non-monomial p'p".into()))?;
    let right = match r.value() {
        Some(v) => v,
        None => {
            let pp = &params.p_prime;
            let inv = pp
                .mul(&params.p)
                .recip_monomial()
                .ok_or_else(|| Error::Unsupported("Ω-window with a non-monomial p'p".into()))?;
            let inv2 = pp.mul(pp).mul(&params.p).recip_monomial().unwrap_or_else(ExactNum::zero);
            let qp = params.q.mul(&params.p.recip_monomial().unwrap_or_else(ExactNum::zero));
            qp.add(&inv).add(&inv2)
        }
    };
    Ok((left, right))
}

/// Certified lower bound on δ = min{right − ω, ω − left}.
pub fn delta_lower(omega: &RotationSpec, left: &ExactNum, right: &ExactNum) -> Result<ExactNum> {
    let mut last = None;
    for level in 1..=20 {
        let (lo, hi) = omega.bounds(level)?;
        let a = lo.sub(left);
        let b = right.sub(&hi);
        let d = if a.lt(&b)? { a } else { b };
        if d.signum()? > 0 {
            // stop once the enclosure is much narrower than δ
            if hi.sub(&lo).scale(&rat(1000, 1)).le(&d)? {
                return Ok(d);
            }
            last = Some(d);
        }
    }
    last.ok_or_else(|| Error::Undecidable("δ window not resolved".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DestructionCertificate {
    pub mode: RunMode,
    pub family: FamilySpec,
    pub params: ParamSelection,
    /// C_k as produced by the bump factory for this k.
    #[serde(with = "rational_str")]
    pub c_k_certified: BigRational,
    pub omega_left: ExactFraction,
    pub omega_right: ExactFraction,
    /// Certified lower bound on δ.
    pub delta: ExactNum,
    /// η₊ − η₋ = ε/(2 C_{k,r} p^{k+1}).
    pub eta_width: ExactNum,
    pub stage1: Option<Stage1Report>,
    pub stage2: Option<Stage2Report>,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub pass: bool,
}

fn eta_width(params: &ParamSelection) -> Result<ExactNum> {
    let k = params.k;
    let pk1 = params.p.pow(k + 1);
    let num = ExactNum::from_rational(params.eps.clone() / (rat(2, 1) * &params.c_kr));
    match pk1.as_rational() {
        Some(v) => Ok(num.scale(&v.recip())),
        None => Ok(num.mul(
            &pk1.recip_monomial()
                .ok_or_else(|| Error::Unsupported("η width for a non-monomial p".into()))?,
        )),
    }
}

const FALSIFICATION_NOTE: &str = "Gap probes over finitely many rotation numbers can falsify the forbidden interval but never verify it for all maximally periodic Birkhoff minimizers.";
const EXACT_NOTE: &str = "Exact constants: A2 forces p far beyond desk scale, so the minimization stages are not run; only the number-theoretic checks are evaluated.";

pub fn select_for_mode(inp: &SelectInput, opts: &PipelineOptions) -> Result<ParamSelection> {
    match &opts.mode {
        RunMode::Exact => match select_parameters(inp)? {
            SelectOutcome::Found(s) => Ok(*s),
            SelectOutcome::NotFound { reason, examined, .. } => Err(Error::Budget(format!(
                "no admissible approximant among {examined} ({})",
                match reason {
                    NotFoundReason::NotLiouvilleEnough => "not Liouville enough",
                    NotFoundReason::BoundTooSmall => "search bound too small",
                }
            ))),
        },
        RunMode::Relaxed(_) => select_relaxed(inp, opts.p_max, opts.period_max),
    }
}

/// Runs selection, both stages (relaxed mode only) and assembles the
/// certificate. Returns the final family alongside it.
#[allow(clippy::too_many_arguments)]
pub fn destroy(
    f: &LocalPotentialFamily,
    omega: &RotationSpec,
    gamma: &BigRational,
    sigma: &BigRational,
    k: u32,
    r: u32,
    eps: &BigRational,
    opts: &PipelineOptions,
) -> Result<(LocalPotentialFamily, DestructionCertificate)> {
    let c_k = c_k_rational(k as usize);
    let inp = SelectInput {
        omega: omega.clone(),
        gamma: gamma.clone(),
        sigma: sigma.clone(),
        k,
        r,
        eps: eps.clone(),
        c: condition_constant(f, omega)?,
        c_k: c_k.clone(),
        search_bound: opts.search_bound,
        a2_factor: opts.mode.a2_factor(),
    };
    let params = select_for_mode(&inp, opts)?;
    let (omega_left, omega_right) = omega_window(&params);
    let (wl, wr) = window_values(&params)?;
    let delta = delta_lower(omega, &wl, &wr)?;
    let mut notes = vec![FALSIFICATION_NOTE.to_string()];
    let (family, stage1, stage2) = match opts.mode {
        RunMode::Exact => {
            notes.push(EXACT_NOTE.to_string());
            (f.clone(), None, None)
        }
        RunMode::Relaxed(_) => {
            notes.push(
                "Relaxed constants: number-theoretic checks are reported at relaxed scale and do not gate; the variational checks do."
                    .to_string(),
            );
            let (f1, s1) = stage1(f, &params, opts)?;
            let (f2, s2) = stage2(&f1, &params, &s1, opts)?;
            (f2, Some(s1), Some(s2))
        }
    };
    let mut cert = DestructionCertificate {
        mode: opts.mode.clone(),
        family: f.spec(),
        eta_width: eta_width(&params)?,
        params,
        c_k_certified: c_k,
        omega_left,
        omega_right,
        delta,
        stage1,
        stage2,
        checks: Vec::new(),
        notes,
        pass: false,
    };
    let report = check_certificate(&cert)?;
    cert.checks = report.checks;
    cert.pass = report.pass;
    Ok((family, cert))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub checks: Vec<Check>,
    pub failed: Vec<String>,
    pub pass: bool,
}

/// Re-evaluates the number-theoretic chain from the stored parameters and
/// collects the recorded variational checks. Passes iff every gating check
/// passes.
pub fn check_certificate(cert: &DestructionCertificate) -> Result<CertificateReport> {
    let exact = matches!(cert.mode, RunMode::Exact);
    if cert.params.a2_factor != cert.mode.a2_factor() {
        return Err(Error::InvalidArgument("A2 factor does not match the run mode".into()));
    }
    let mut checks = cert.params.certificate_checks(exact)?;
    let scale = if exact { CheckScale::Exact } else { CheckScale::Relaxed };

    let (left, right) = omega_window(&cert.params);
    if cert.omega_left != left || cert.omega_right != right {
        return Err(Error::InvalidArgument("stored Ω-window does not match the parameters".into()));
    }
    checks.push(Check::exact("delta>0", &cert.delta, ">", &ExactNum::zero(), scale, true)?);
    let (wl, wr) = window_values(&cert.params)?;
    let fresh = delta_lower(&cert.params.omega, &wl, &wr)?;
    checks.push(Check::exact("delta<=certified", &cert.delta, "<=", &fresh.scale(&rat(1001, 1000)), scale, true)?);
    checks.push(Check::exact("eta-width", &cert.eta_width, "=", &eta_width(&cert.params)?, scale, true)?);
    checks.push(Check::exact(
        "C_k-certified",
        &ExactNum::from_rational(cert.params.c_k.clone()),
        ">=",
        &ExactNum::from_rational(cert.c_k_certified.clone()),
        scale,
        true,
    )?);

    match (&cert.stage1, &cert.stage2) {
        (Some(s1), Some(s2)) => {
            checks.extend(s1.checks.iter().cloned());
            checks.extend(s2.checks.iter().cloned());
            let w = cert.eta_width.approx_f64();
            checks.push(Check::float(
                "eta-width-float",
                ((s2.eta_plus - s2.eta_minus) - w).abs(),
                "<=",
                1e-12 * w.max(1e-300) + f64::EPSILON * s2.eta_plus.abs(),
                true,
            ));
            checks.push(Check::float("xmin-birkhoff", is_birkhoff(&s2.x_min, 1e-9).birkhoff as u8 as f64, "=", 1.0, true));
        }
        (None, None) if exact => {}
        _ => return Err(Error::InvalidArgument("certificate is missing stage reports".into())),
    }
    let failed: Vec<String> = checks.iter().filter(|c| c.gating && !c.pass).map(|c| c.name.clone()).collect();
    Ok(CertificateReport {
        pass: failed.is_empty(),
        failed,
        checks,
    })
}

/// Ω probes: both endpoints of the Ω-window and their mediant, in lowest
/// terms as (P, Q).
pub fn default_probe_omegas(params: &ParamSelection) -> Result<Vec<(usize, i64)>> {
    let p = small_int(&params.p, "p")?;
    let q = small_int(&params.q, "q")?;
    let pp = small_int(&params.p_prime, "p'")?;
    let reduce = |big_p: i64, big_q: i64| {
        let g = big_p.gcd(&big_q);
        ((big_p / g) as usize, big_q / g)
    };
    let a = reduce(pp * p, pp * q + 1);
    let b = reduce((pp - 1) * p, (pp - 1) * q + 1);
    let m = reduce(a.0 as i64 + b.0 as i64, a.1 + b.1);
    Ok(vec![a, b, m])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaProbe {
    pub p: usize,
    pub q: i64,
    pub in_window: bool,
    /// |ω − Ω| ≤ δ.
    pub within_delta: bool,
    pub status: String,
    pub minimizers: usize,
    /// Configurations with an orbit point in (η₋, η₊).
    pub hits: Vec<PeriodicConfig>,
    /// Smallest distance from an orbit point to the interval.
    pub closest: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapProbeReport {
    pub eta_minus: f64,
    pub eta_plus: f64,
    pub n_starts: usize,
    pub seed: u64,
    pub probes: Vec<OmegaProbe>,
    pub any_hit: bool,
    pub note: String,
}

fn dist_to_interval(v: f64, lo: f64, hi: f64) -> f64 {
    let d = frac(v - lo);
    let w = hi - lo;
    if d < w {
        0.0
    } else {
        (d - w).min(1.0 - d)
    }
}

/// Looks for Birkhoff minimizers of rotation number Q/P with an orbit point
/// in (η₋, η₊). Ω outside the window is reported as out of scope.
#[allow(clippy::too_many_arguments)]
pub fn probe_gap_minimizers(
    f: &LocalPotentialFamily,
    omegas: &[(usize, i64)],
    window: Option<(&ExactFraction, &ExactFraction)>,
    omega: &RotationSpec,
    delta: Option<&ExactNum>,
    eta_minus: f64,
    eta_plus: f64,
    n_starts: usize,
    seed: u64,
    max_period: usize,
) -> Result<GapProbeReport> {
    let mut probes = Vec::new();
    for &(p, q) in omegas {
        let val = ExactNum::from_rational(BigRational::new(BigInt::from(q), BigInt::from(p as i64)));
        let frac_val = ExactFraction::new(ExactNum::from_int(q), ExactNum::from_int(p as i64));
        let in_window = match window {
            Some((l, r)) => {
                l.cmp_exact(&frac_val)? != std::cmp::Ordering::Greater
                    && frac_val.cmp_exact(r)? != std::cmp::Ordering::Greater
            }
            None => true,
        };
        let within_delta = match delta {
            Some(d) => {
                let off = omega.approx_offset(&val);
                match off {
                    Ok(o) => {
                        let a = if o.signum()? < 0 { o.neg() } else { o };
                        a.le(d)?
                    }
                    Err(_) => false,
                }
            }
            None => false,
        };
        if !in_window {
            probes.push(OmegaProbe {
                p,
                q,
                in_window,
                within_delta,
                status: "out_of_scope".into(),
                minimizers: 0,
                hits: Vec::new(),
                closest: None,
            });
            continue;
        }
        if p > max_period {
            return Err(Error::Budget(format!("period {p} exceeds the probe budget {max_period}")));
        }
        let mut o = MultiStartOptions::new(n_starts, seed);
        o.jitter = pipeline_jitter(p);
        let set = minimizer_set(f, p, q, &o)?;
        let mut hits = Vec::new();
        let mut closest = f64::INFINITY;
        for m in &set.members {
            let x = &m.result.config;
            if !is_birkhoff(x, 1e-9).birkhoff {
                continue;
            }
            let d = x
                .values
                .iter()
                .map(|&v| dist_to_interval(v, eta_minus, eta_plus))
                .fold(f64::INFINITY, f64::min);
            closest = closest.min(d);
            if x.values.iter().any(|&v| {
                let t = frac(v - eta_minus);
                t > 0.0 && t < eta_plus - eta_minus
            }) {
                hits.push(x.clone());
            }
        }
        probes.push(OmegaProbe {
            p,
            q,
            in_window,
            within_delta,
            status: "probed".into(),
            minimizers: set.members.len(),
            hits,
            closest: closest.is_finite().then_some(closest),
        });
    }
    Ok(GapProbeReport {
        eta_minus,
        eta_plus,
        n_starts,
        seed,
        any_hit: probes.iter().any(|p| !p.hits.is_empty()),
        probes,
        note: FALSIFICATION_NOTE.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mode_round_trip() {
        for s in ["exact-constants", "relaxed:1/1000000"] {
            let m: RunMode = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert_eq!("relaxed:1e-6".parse::<RunMode>().unwrap(), RunMode::Relaxed(rat(1, 1_000_000)));
        assert!("relaxed:0".parse::<RunMode>().is_err());
        assert!("fast".parse::<RunMode>().is_err());
    }

    #[test]
    fn interval_distance() {
        assert_eq!(dist_to_interval(0.15, 0.1, 0.2), 0.0);
        assert!((dist_to_interval(0.25, 0.1, 0.2) - 0.05).abs() < 1e-15);
        assert!((dist_to_interval(0.95, 0.1, 0.2) - 0.15).abs() < 1e-15);
    }
}
