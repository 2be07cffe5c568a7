//! Command-line front end. Every artifact echoes the merged run
//! configuration; there is no timestamp, so identical configurations give
//! byte-identical output.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::action::{minimizer_set, MultiStartOptions};
use crate::birkhoff::{confine, extended_orbit, find_gaps, near_periodicity_verify};
use crate::error::{Error, Result};
use crate::exact::{parse_rational, rat};
use crate::io;
use crate::lattice::{is_birkhoff, rotation_bound_check, PeriodicConfig, RigidRotation};
use crate::number_theory::{select_parameters, SelectInput, SelectOutcome, RotationSpec};
use crate::perturbation::{c_k_rational, destroy_periodic, make_bump, DestroyOptions};
use crate::pipeline::{
    check_certificate, condition_constant, default_probe_omegas, destroy, probe_gap_minimizers, DestructionCertificate,
    PipelineOptions, RunMode,
};
use crate::potentials::{band_samples, verify_conditions, FamilySpec, LocalPotentialFamily};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "fk-lab", version, about = "Periodic minimizers, gaps, bumps and destruction certificates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check conditions A–E for a family on sampled bounded-difference windows.
    Verify(RunArgs),
    /// Multi-start minimization of W_p over X_{p,q}.
    Minimize(RunArgs),
    /// Gaps of the extended orbit of a minimizer (from --input or computed).
    Gaps(RunArgs),
    /// Build a bump on (ξ₋, ξ₊) and check its invariants; --csv samples it.
    Bump(RunArgs),
    /// Near-periodicity witness for the rigid rotation ξ₀ + iω.
    NearPeriodicity(RunArgs),
    /// Confinement y ≤ x ≤ U^a y for the rigid rotation ξ₀ + iω.
    Confine(RunArgs),
    /// Choose (p, q, τ, p′, N, a) for a Liouville-class ω.
    SelectParams(RunArgs),
    /// Bump on the largest gap of a periodic minimizer, then re-minimize.
    DestroyPeriodic(RunArgs),
    /// Two-stage destruction and its certificate.
    Destroy(RunArgs),
    /// Re-check a certificate from --input.
    CheckCert(RunArgs),
    /// Look for Birkhoff minimizers inside (η₋, η₊) of a certificate.
    Probe(RunArgs),
}

impl Command {
    fn parts(self) -> (&'static str, RunArgs) {
        match self {
            Command::Verify(a) => ("verify", a),
            Command::Minimize(a) => ("minimize", a),
            Command::Gaps(a) => ("gaps", a),
            Command::Bump(a) => ("bump", a),
            Command::NearPeriodicity(a) => ("near-periodicity", a),
            Command::Confine(a) => ("confine", a),
            Command::SelectParams(a) => ("select-params", a),
            Command::DestroyPeriodic(a) => ("destroy-periodic", a),
            Command::Destroy(a) => ("destroy", a),
            Command::CheckCert(a) => ("check-cert", a),
            Command::Probe(a) => ("probe", a),
        }
    }
}

/// Flags shared by all subcommands; each uses the ones it needs.
/// `--config run.json` supplies any flag not given on the command line.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunArgs {
    /// fk_nn or fk_nnn
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub q: Option<i64>,
    /// rational or decimal, e.g. 0.01 or 1/100
    #[arg(long)]
    pub eps: Option<String>,
    #[arg(long)]
    pub k: Option<u32>,
    #[arg(long)]
    pub r: Option<u32>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    /// condition-E constant; derived from the family when absent
    #[arg(long)]
    pub c: Option<String>,
    /// golden, liouville:10, rational:3/5, quadratic:a,b,d,c, interval:lo,hi
    #[arg(long)]
    pub omega: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// exact-constants or relaxed:<factor>
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long = "xi-minus", allow_hyphen_values = true)]
    pub xi_minus: Option<f64>,
    #[arg(long = "xi-plus", allow_hyphen_values = true)]
    pub xi_plus: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub xi0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub i1: Option<i64>,
    #[arg(long, allow_hyphen_values = true)]
    pub i2: Option<i64>,
    /// difference bound |x_{i+1} − x_i| ≤ d for condition checks
    #[arg(long)]
    pub d: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long = "search-bound")]
    pub search_bound: Option<usize>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// comma-separated Q/P list for `probe`
    #[arg(long)]
    pub omegas: Option<String>,
    /// also probe the unperturbed family
    #[arg(long)]
    pub control: Option<bool>,
    #[arg(long = "p-max")]
    pub p_max: Option<u64>,
    #[arg(long = "period-max")]
    pub period_max: Option<u64>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    // output paths are not echoed, so replaying an artifact never
    // overwrites it
    /// write the JSON artifact here instead of stdout
    #[arg(long)]
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    /// CSV side output (configuration or bump samples)
    #[arg(long)]
    #[serde(skip_serializing)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($a:ident, $b:ident; $($f:ident),*) => {
        RunArgs { $( $f: $a.$f.or($b.$f), )* config: None }
    };
}

impl RunArgs {
    /// Command-line values win over the config file.
    pub fn merged_with(self, file: RunArgs) -> RunArgs {
        let a = self;
        let b = file;
        merge_fields!(a, b; family, lambda, p, q, eps, k, r, gamma, sigma, c, omega, tol, starts, seed, mode,
            xi_minus, xi_plus, xi0, i1, i2, d, samples, search_bound, grid, omegas, control, p_max, period_max,
            input, out, csv)
    }

    fn need<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
        v.clone().ok_or_else(|| Error::InvalidArgument(format!("missing --{flag}")))
    }

    fn family(&self) -> Result<LocalPotentialFamily> {
        LocalPotentialFamily::from_spec(&FamilySpec {
            family: Self::need(&self.family, "family")?,
            lambda: self.lambda.unwrap_or(0.0),
            range: None,
        })
    }

    fn omega(&self) -> Result<RotationSpec> {
        Self::need(&self.omega, "omega")?.parse()
    }

    fn rational(v: &Option<String>, flag: &str, default: Option<&str>) -> Result<BigRational> {
        match (v, default) {
            (Some(s), _) => parse_rational(s),
            (None, Some(d)) => parse_rational(d),
            (None, None) => Err(Error::InvalidArgument(format!("missing --{flag}"))),
        }
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    fn multistart(&self, default_starts: usize) -> MultiStartOptions {
        let mut o = MultiStartOptions::new(self.starts.unwrap_or(default_starts), self.seed());
        if let Some(t) = self.tol {
            o.minimize.tol = t;
        }
        o
    }
}

/// The configuration echoed into every artifact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: String,
    #[serde(flatten)]
    pub args: RunArgs,
}

#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    run_config: &'a RunConfig,
    pass: bool,
    result: T,
}

struct Outcome {
    pass: bool,
    json: String,
}

fn emit<T: Serialize>(cfg: &RunConfig, pass: bool, result: T) -> Result<Outcome> {
    let json = io::to_json(&Artifact {
        run_config: cfg,
        pass,
        result,
    })?;
    Ok(Outcome { pass, json })
}

fn load_config(path: &Path) -> Result<RunArgs> {
    let v: serde_json::Value = io::read_json(path)?;
    // accept either bare flags or an echoed run_config block
    let v = v.get("run_config").cloned().unwrap_or(v);
    let mut obj = v;
    if let Some(m) = obj.as_object_mut() {
        m.remove("subcommand");
    }
    serde_json::from_value(obj).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// The minimizer stored in an artifact or CSV file.
fn load_config_values(path: &Path, q: Option<i64>) -> Result<PeriodicConfig> {
    let text = io::read_text(path)?;
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        return io::config_from_csv(&text, q.unwrap_or(0));
    }
    let v: serde_json::Value = io::from_json(&text)?;
    let candidates = [
        "/result/set/members/0/result/config",
        "/result/members/0/result/config",
        "/members/0/result/config",
        "/result/config",
        "/config",
        "",
    ];
    for c in candidates {
        if let Some(node) = v.pointer(c) {
            if let Ok(x) = serde_json::from_value::<PeriodicConfig>(node.clone()) {
                return Ok(x);
            }
        }
    }
    Err(Error::Parse(format!("{}: no periodic configuration found", path.display())))
}

fn load_certificate(path: &Path) -> Result<DestructionCertificate> {
    let v: serde_json::Value = io::read_json(path)?;
    let node = v.get("result").cloned().unwrap_or(v);
    serde_json::from_value(node).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn run_command(name: &str, a: &RunArgs, cfg: &RunConfig) -> Result<Outcome> {
    match name {
        "verify" => {
            let f = a.family()?;
            let d = a.d.unwrap_or(3.0);
            let samples = band_samples(4 * f.range() + 3, d, a.samples.unwrap_or(200), a.seed());
            let report = verify_conditions(&f, &samples, d);
            emit(cfg, !report.any_violated(), &report)
        }
        "minimize" => {
            let f = a.family()?;
            let p = RunArgs::need(&a.p, "p")?;
            let q = RunArgs::need(&a.q, "q")?;
            let set = minimizer_set(&f, p, q, &a.multistart(10))?;
            let birkhoff: Vec<bool> = set.members.iter().map(|m| is_birkhoff(&m.result.config, 1e-9).birkhoff).collect();
            let bounds: Vec<f64> = set.members.iter().map(|m| rotation_bound_check(&m.result.config)).collect();
            let pass = !set.members.is_empty() && birkhoff.iter().all(|b| *b);
            if let (Some(path), Some(m)) = (&a.csv, set.members.first()) {
                io::write_text(path, &io::config_to_csv(&m.result.config)?)?;
            }
            emit(
                cfg,
                pass,
                serde_json::json!({ "set": set, "birkhoff": birkhoff, "rotation_bound": bounds }),
            )
        }
        "gaps" => {
            let x = match &a.input {
                Some(path) => load_config_values(path, a.q)?,
                None => {
                    let f = a.family()?;
                    let p = RunArgs::need(&a.p, "p")?;
                    let q = RunArgs::need(&a.q, "q")?;
                    let set = minimizer_set(&f, p, q, &a.multistart(10))?;
                    set.members
                        .first()
                        .map(|m| m.result.config.clone())
                        .ok_or_else(|| Error::Budget("no converged minimizer".into()))?
                }
            };
            let gaps = find_gaps(&extended_orbit(&x));
            let max = gaps.first().map_or(0.0, |g| g.len());
            let pass = max >= 1.0 / x.p as f64 - 1e-12;
            emit(cfg, pass, serde_json::json!({ "p": x.p, "max_gap": max, "gaps": gaps }))
        }
        "bump" => {
            let xm = RunArgs::need(&a.xi_minus, "xi-minus")?;
            let xp = RunArgs::need(&a.xi_plus, "xi-plus")?;
            let eps = crate::exact::rational_to_f64(&RunArgs::rational(&a.eps, "eps", None)?);
            let k = a.k.unwrap_or(2) as usize;
            let b = make_bump(xm, xp, eps, k)?;
            let grid = a.grid.unwrap_or(10_000);
            let norm = b.sampled_ck_norm(grid);
            let outside = (0..1000)
                .map(|i| b.value(xp + (1.0 + xm - xp) * i as f64 / 1000.0))
                .fold(0.0f64, |m, v| m.max(v.abs()));
            let (pl, pr) = b.plateau();
            let plateau_err = (0..=10)
                .map(|i| (b.value(pl + (pr - pl) * i as f64 / 10.0) - b.plateau_value()).abs())
                .fold(0.0f64, f64::max);
            let positive = (1..1000).all(|i| b.value(xm + (xp - xm) * i as f64 / 1000.0) > 0.0);
            let pass = norm <= eps && outside == 0.0 && plateau_err <= 1e-15 && positive;
            if let Some(path) = &a.csv {
                io::write_text(path, &io::bump_to_csv(&b, a.samples.unwrap_or(1000))?)?;
            }
            emit(
                cfg,
                pass,
                serde_json::json!({
                    "bump": b,
                    "sampled_ck_norm": norm,
                    "grid": grid,
                    "max_outside_support": outside,
                    "plateau_value": b.plateau_value(),
                    "plateau_error": plateau_err,
                    "positive_inside": positive,
                }),
            )
        }
        "near-periodicity" => {
            let omega = a.omega()?;
            let x = RigidRotation {
                xi0: a.xi0.unwrap_or(0.0),
                omega: omega.approx_f64(),
            };
            let p = RunArgs::need(&a.p, "p")? as i64;
            let q = RunArgs::need(&a.q, "q")?;
            let r = a.r.unwrap_or(1) as i64;
            let np = near_periodicity_verify(&x, &omega, p, q, r, a.i1.unwrap_or(0), RunArgs::need(&a.i2, "i2")?)?;
            let pass = np.achieved <= np.bound + 1e-12 * (1.0 + np.bound);
            emit(cfg, pass, &np)
        }
        "confine" => {
            let omega = a.omega()?;
            let x = RigidRotation {
                xi0: a.xi0.unwrap_or(0.0),
                omega: omega.approx_f64(),
            };
            let p = RunArgs::need(&a.p, "p")? as i64;
            let q = RunArgs::need(&a.q, "q")?;
            let c = confine(&x, &omega, p, q, a.i1.unwrap_or(0), RunArgs::need(&a.i2, "i2")?)?;
            let pass = c.lower_slack >= -1e-12 && c.upper_slack >= -1e-12 && c.birkhoff;
            emit(cfg, pass, &c)
        }
        "select-params" => {
            let omega = a.omega()?;
            let k = a.k.unwrap_or(2);
            let c = match (&a.c, &a.family) {
                (Some(s), _) => parse_rational(s)?,
                (None, Some(_)) => condition_constant(&a.family()?, &omega)?,
                (None, None) => rat(1, 1),
            };
            let mode: RunMode = a.mode.as_deref().unwrap_or("exact-constants").parse()?;
            let inp = SelectInput {
                omega,
                gamma: RunArgs::rational(&a.gamma, "gamma", Some("1"))?,
                sigma: RunArgs::rational(&a.sigma, "sigma", None)?,
                k,
                r: a.r.unwrap_or(1),
                eps: RunArgs::rational(&a.eps, "eps", None)?,
                c,
                c_k: c_k_rational(k as usize),
                search_bound: a.search_bound.unwrap_or(16),
                a2_factor: mode.a2_factor(),
            };
            match select_parameters(&inp)? {
                SelectOutcome::Found(sel) => {
                    let checks = sel.admission_checks()?;
                    let pass = checks.iter().all(|c| c.pass);
                    emit(cfg, pass, serde_json::json!({ "selection": sel, "checks": checks }))
                }
                SelectOutcome::NotFound { reason, examined, taus } => emit(
                    cfg,
                    false,
                    serde_json::json!({ "not_found": reason, "examined": examined, "taus": taus }),
                ),
            }
        }
        "destroy-periodic" => {
            let f = a.family()?;
            let p = RunArgs::need(&a.p, "p")?;
            let q = RunArgs::need(&a.q, "q")?;
            let eps = crate::exact::rational_to_f64(&RunArgs::rational(&a.eps, "eps", None)?);
            let k = a.k.unwrap_or(2) as usize;
            let mut opts = DestroyOptions::new(a.starts.unwrap_or(50), a.seed());
            if let Some(t) = a.tol {
                opts.multistart.minimize.tol = t;
            }
            let (_, report) = destroy_periodic(&f, p, q, eps, k, &opts)?;
            let pass = report.all_translates && report.probes.iter().all(|p| p.pass);
            emit(cfg, pass, &report)
        }
        "destroy" => {
            let f = a.family()?;
            let omega = a.omega()?;
            let opts = pipeline_options(a)?;
            let (_, cert) = destroy(
                &f,
                &omega,
                &RunArgs::rational(&a.gamma, "gamma", Some("1"))?,
                &RunArgs::rational(&a.sigma, "sigma", None)?,
                a.k.unwrap_or(2),
                a.r.unwrap_or(1),
                &RunArgs::rational(&a.eps, "eps", None)?,
                &opts,
            )?;
            emit(cfg, cert.pass, &cert)
        }
        "check-cert" => {
            let cert = load_certificate(&RunArgs::need(&a.input, "input")?)?;
            let report = check_certificate(&cert)?;
            emit(cfg, report.pass, &report)
        }
        "probe" => {
            let cert = load_certificate(&RunArgs::need(&a.input, "input")?)?;
            let s2 = cert
                .stage2
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("certificate has no stage reports (exact-constants run)".into()))?;
            let s1 = cert.stage1.as_ref().expect("stage1 accompanies stage2");
            let base = LocalPotentialFamily::from_spec(&cert.family)?;
            let f2 = base.with_onsite(Arc::new(s1.bump.clone())).with_onsite(Arc::new(s2.bump.clone()));
            let omegas = match &a.omegas {
                Some(s) => parse_omegas(s)?,
                None => default_probe_omegas(&cert.params)?,
            };
            let starts = a.starts.unwrap_or(8);
            let budget = a.period_max.unwrap_or(5000) as usize;
            let window = Some((&cert.omega_left, &cert.omega_right));
            let run = |f: &LocalPotentialFamily| {
                probe_gap_minimizers(
                    f,
                    &omegas,
                    window,
                    &cert.params.omega,
                    Some(&cert.delta),
                    s2.eta_minus,
                    s2.eta_plus,
                    starts,
                    a.seed(),
                    budget,
                )
            };
            let report = run(&f2)?;
            let control = if a.control.unwrap_or(false) { Some(run(&base)?) } else { None };
            emit(cfg, !report.any_hit, serde_json::json!({ "perturbed": report, "control": control }))
        }
        other => Err(Error::InvalidArgument(format!("unknown subcommand {other}"))),
    }
}

fn pipeline_options(a: &RunArgs) -> Result<PipelineOptions> {
    let mut o = PipelineOptions::default();
    if let Some(m) = &a.mode {
        o.mode = m.parse()?;
    }
    if let Some(v) = a.search_bound {
        o.search_bound = v;
    }
    if let Some(v) = a.p_max {
        o.p_max = v;
    }
    if let Some(v) = a.period_max {
        o.period_max = v;
    }
    if let Some(v) = a.starts {
        o.n_starts = v;
    }
    o.seed = a.seed();
    if let Some(v) = a.grid {
        o.norm_grid = v;
    }
    Ok(o)
}

/// "11/100,1/9" → [(100, 11), (9, 1)].
pub fn parse_omegas(s: &str) -> Result<Vec<(usize, i64)>> {
    s.split(',')
        .map(|t| {
            let r = parse_rational(t.trim())?;
            let p = num_traits::ToPrimitive::to_usize(r.denom())
                .ok_or_else(|| Error::Parse(format!("denominator of {t} too large")))?;
            let q = num_traits::ToPrimitive::to_i64(r.numer())
                .ok_or_else(|| Error::Parse(format!("numerator of {t} too large")))?;
            Ok((p, q))
        })
        .collect()
}

fn set_threads() {
    if let Some(n) = std::env::var("FK_LAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn is_usage(e: &Error) -> bool {
    matches!(e, Error::InvalidArgument(_) | Error::Parse(_) | Error::UnknownFamily(_))
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code. JSON goes to `--out` or `stdout`.
pub fn run<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{}", e.render())
            } else {
                write!(stdout, "{}", e.render())
            };
            return code;
        }
    };
    set_threads();
    let (name, args) = cli.command.parts();
    let args = match &args.config {
        Some(path) => match load_config(path) {
            Ok(file) => args.clone().merged_with(file),
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_USAGE;
            }
        },
        None => args.merged_with(RunArgs::default()),
    };
    let cfg = RunConfig {
        subcommand: name.to_string(),
        args: args.clone(),
    };
    match run_command(name, &args, &cfg) {
        Ok(out) => {
            let written = match &args.out {
                Some(path) => io::write_text(path, &out.json),
                None => stdout.write_all(out.json.as_bytes()).map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                }),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_CHECK_FAILED;
            }
            if out.pass {
                EXIT_OK
            } else {
                let _ = writeln!(stderr, "{name}: checks failed");
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if is_usage(&e) {
                let _ = writeln!(stderr, "see `fk-lab {name} --help`");
                EXIT_USAGE
            } else {
                EXIT_CHECK_FAILED
            }
        }
    }
}
