//! Batch driver: each verification is a subcommand that emits a JSON or CSV report.

use crate::cgamma::{c, C};
use crate::error::Error;
use crate::identities::{barnes_first, beta_integral, contour_shift_residual, euler_gamma, three_gamma, gustafson_n1, IdentityReport};
use crate::intertwiners::{
    check_kernel_scalar_identity, check_bl_whittaker, check_br_whittaker, check_gl2_kernel_relations, check_gl2_whittaker_images,
    check_kernel_intertwining, fixedpoint_inner_integral, gl3_bldag_br_fixedpoint, intertwiner_chain, ScalarIdentity, KernelSide,
};
use crate::quadrature::QuadSpec;
use crate::realizations::{
    check_conjugation, check_gl_commutations, check_opposite_relations, check_whittaker_defining, gg_modified,
    gg_modified_primed, gg_realization, gt_modified, gt_primed, gt_realization, gt_shifted, mu1, whittaker_vectors, Realization,
    SpectralParams,
};
use crate::toda::{eigen_ratio_scan, evaluator, plane_wave_eigenvalue};
use crate::whittaker::{
    gl2_mb_integrand, gl2_mb_poles, phi_hat_closed_form, phi_hat_givental_reduced, phi_hat_mb_integral, psi, psi_gl2_bessel,
    Mb3Table, Rep, TorusPoint,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "whitlab", version, about = "Numerical checks for gl2 and gl3 Whittaker functions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Gamma-function integral identities on seeded parameter draws
    Identities(IdentitiesArgs),
    /// Evaluate one Whittaker function
    Eval(EvalArgs),
    /// Compare integral representations pointwise
    Compare(CompareArgs),
    /// Intertwining kernels and the scalar identities behind them
    Intertwine(IntertwineArgs),
    /// Eigenfunction property for the quadratic Toda Hamiltonian
    Toda(TodaArgs),
    /// gl commutation relations of a realization
    Commutators(RealizationArgs),
    /// Whittaker vector defining equations of a realization
    Whitvec(RealizationArgs),
    /// Contour shifts of the Mellin-Barnes integrals
    Contour(ContourArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Quadrature relative tolerance (command-specific default)
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long, default_value_t = 1e-16)]
    pub abs_tol: f64,
    #[arg(long, default_value_t = 20_000)]
    pub max_panels: usize,
    #[arg(long, default_value_t = 4.0)]
    pub initial_radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub decay_rate_hint: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Report destination (stdout when absent)
    #[arg(long)]
    #[serde(skip)]
    pub output: Option<PathBuf>,
    /// Key = value file; command-line flags override its entries
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Record wall-clock times (reports are then no longer reproducible byte for byte)
    #[arg(long)]
    pub timing: bool,
}

impl Common {
    fn spec(&self, default_rel: f64) -> QuadSpec {
        QuadSpec {
            rel_tol: self.rel_tol.unwrap_or(default_rel),
            abs_tol: self.abs_tol,
            max_panels: self.max_panels,
            initial_radius: self.initial_radius,
            decay_rate_hint: self.decay_rate_hint,
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ParamArgs {
    #[arg(long)]
    pub ell: Option<usize>,
    /// Comma-separated complex entries a+bi
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Comma-separated real entries; gamma is built with --eps
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IdentityKind {
    Barnes,
    Gustafson,
    #[value(name = "glo11")]
    #[serde(rename = "glo11")]
    ThreeGamma,
    Euler,
    Beta,
    All,
}

impl IdentityKind {
    fn label(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct IdentitiesArgs {
    #[arg(long, value_enum, default_value_t = IdentityKind::All)]
    pub which: IdentityKind,
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    /// Pass threshold on the relative residual (per-identity default)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Override the lower bound of the real-part box
    #[arg(long, allow_hyphen_values = true)]
    pub re_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub re_max: Option<f64>,
    #[arg(long)]
    pub im_max: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RepArg {
    Mb,
    Givental,
    Modified,
}

impl RepArg {
    fn rep(self) -> Rep {
        match self {
            RepArg::Mb => Rep::MB,
            RepArg::Givental => Rep::Givental,
            RepArg::Modified => Rep::Modified,
        }
    }

    fn label(self) -> &'static str {
        match self {
            RepArg::Mb => "mb",
            RepArg::Givental => "givental",
            RepArg::Modified => "modified",
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct EvalArgs {
    #[arg(long, value_enum)]
    pub rep: RepArg,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    /// Comma-separated torus point
    #[arg(long, allow_hyphen_values = true)]
    pub x: String,
    /// Pass threshold on err_estimate / |value|
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct CompareArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mb,givental,modified")]
    pub reps: Vec<RepArg>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Compare on the Fourier side (gl3): MB integral and reduced Givental integral against the closed form
    #[arg(long)]
    pub fourier: bool,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntertwineCheck {
    Br,
    Bl,
    BldagBr,
    E21,
    E23,
    KernelAll,
    Gl2All,
    Chain,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct IntertwineArgs {
    #[arg(long, value_enum)]
    pub check: IntertwineCheck,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct TodaArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    /// Representation used for Psi (default: givental for gl2, mb for gl3)
    #[arg(long, value_enum)]
    pub rep: Option<RepArg>,
    /// Finite-difference step
    #[arg(long, default_value_t = crate::toda::DEFAULT_STEP)]
    pub h: f64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RealizationKind {
    Gt,
    Gtmod,
    Gtshift,
    Gg,
    Ggmod,
    GgmodDual,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct RealizationArgs {
    #[arg(long, value_enum)]
    pub realization: RealizationKind,
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
#[command(args_override_self = true)]
pub struct ContourArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 3)]
    pub samples: usize,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cx {
    pub re: f64,
    pub im: f64,
}

impl From<C> for Cx {
    fn from(z: C) -> Self {
        Cx { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: Option<Cx>,
    pub rhs: Option<Cx>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub threshold: f64,
    pub n_evals: usize,
    pub wall_ms: Option<f64>,
    pub ok: bool,
    pub error: Option<String>,
    #[serde(skip)]
    pub numerical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.numerical) {
            EXIT_NUMERICAL
        } else if self.pass {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        w.write_record([
            "command", "name", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_err", "rel_err", "threshold", "n_evals", "wall_ms", "ok",
            "error", "pass",
        ])
        .expect("in-memory write");
        for ch in &self.checks {
            w.write_record([
                self.command.clone(),
                ch.name.clone(),
                opt(ch.lhs.map(|z| z.re)),
                opt(ch.lhs.map(|z| z.im)),
                opt(ch.rhs.map(|z| z.re)),
                opt(ch.rhs.map(|z| z.im)),
                opt(ch.abs_err),
                opt(ch.rel_err),
                format!("{:e}", ch.threshold),
                ch.n_evals.to_string(),
                opt(ch.wall_ms),
                ch.ok.to_string(),
                ch.error.clone().unwrap_or_default(),
                self.pass.to_string(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

/// Failure before any check could run.
#[derive(Debug)]
pub enum Fail {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

type CmdResult = std::result::Result<(), Fail>;

struct Runner {
    timing: bool,
    checks: Vec<Check>,
}

impl Runner {
    fn new(timing: bool) -> Self {
        Runner { timing, checks: Vec::new() }
    }

    fn push_report(&mut self, name: String, threshold: f64, r: IdentityReport, ms: f64) {
        let ok = r.rel_residual.is_finite() && r.rel_residual < threshold;
        self.checks.push(Check {
            name,
            lhs: Some(r.lhs.into()),
            rhs: Some(r.rhs.into()),
            abs_err: Some(r.abs_residual),
            rel_err: Some(r.rel_residual),
            threshold,
            n_evals: r.n_evals(),
            wall_ms: self.timing.then_some(ms),
            ok,
            error: None,
            numerical: false,
        });
    }

    fn push_error(&mut self, name: String, threshold: f64, e: Error, ms: f64) {
        self.checks.push(Check {
            name,
            lhs: None,
            rhs: None,
            abs_err: None,
            rel_err: None,
            threshold,
            n_evals: 0,
            wall_ms: self.timing.then_some(ms),
            ok: false,
            error: Some(e.to_string()),
            numerical: e.is_numerical(),
        });
    }

    fn record(&mut self, name: impl Into<String>, threshold: f64, f: impl FnOnce() -> crate::Result<IdentityReport>) {
        let t0 = Instant::now();
        let r = f();
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        match r {
            Ok(r) => self.push_report(name.into(), threshold, r, ms),
            Err(e) => self.push_error(name.into(), threshold, e, ms),
        }
    }

    /// Records every report of a batch as `<report name><suffix>`.
    fn record_many(&mut self, suffix: &str, threshold: f64, f: impl FnOnce() -> crate::Result<Vec<IdentityReport>>) {
        let t0 = Instant::now();
        let r = f();
        let ms = t0.elapsed().as_secs_f64() * 1e3;
        match r {
            Ok(list) => {
                let share = ms / list.len().max(1) as f64;
                for rep in list {
                    self.push_report(format!("{}{suffix}", rep.name), threshold, rep, share);
                }
            }
            Err(e) => self.push_error(format!("batch{suffix}"), threshold, e, ms),
        }
    }

    /// A derived scalar check whose error is measured directly.
    fn push_value(&mut self, name: String, threshold: f64, lhs: C, rhs: C, abs: f64, rel: f64) {
        self.checks.push(Check {
            name,
            lhs: Some(lhs.into()),
            rhs: Some(rhs.into()),
            abs_err: Some(abs),
            rel_err: Some(rel),
            threshold,
            n_evals: 0,
            wall_ms: None,
            ok: rel.is_finite() && rel < threshold,
            error: None,
            numerical: false,
        });
    }
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (exponents allowed).
pub fn parse_complex(s: &str) -> Option<C> {
    let s: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return None;
    }
    let Some(body) = s.strip_suffix('i') else {
        return s.parse::<f64>().ok().map(|x| c(x, 0.0));
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |t: &str| match t {
        "" | "+" => Some(1.0),
        "-" => Some(-1.0),
        t => t.parse::<f64>().ok(),
    };
    match split {
        Some(k) => Some(c(body[..k].parse::<f64>().ok()?, imag(&body[k..])?)),
        None => Some(c(0.0, imag(body)?)),
    }
}

pub fn parse_complex_list(s: &str) -> std::result::Result<Vec<C>, Fail> {
    s.split(',').map(|t| parse_complex(t).ok_or_else(|| Fail::Usage(format!("cannot parse complex entry '{t}'")))).collect()
}

pub fn parse_real_list(s: &str) -> std::result::Result<Vec<f64>, Fail> {
    s.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| Fail::Usage(format!("cannot parse real entry '{t}'")))).collect()
}

struct Defaults {
    lambda: &'static [f64],
    eps: f64,
    kappa: f64,
}

const GL2_DEFAULT: Defaults = Defaults { lambda: &[0.3, -0.2], eps: 0.2, kappa: 0.1 };
const GL3_DEFAULT: Defaults = Defaults { lambda: &[0.2, -0.1, 0.3], eps: 0.2, kappa: 0.1 };

impl ParamArgs {
    fn rank(&self, fallback: usize) -> std::result::Result<usize, Fail> {
        let from_list = |s: &Option<String>| s.as_ref().map(|v| v.split(',').count().saturating_sub(1));
        let ell = self.ell.or(from_list(&self.gamma)).or(from_list(&self.lambda)).unwrap_or(fallback);
        if ell == 0 || ell > 2 {
            return Err(Fail::Lib(Error::DimensionUnsupported(ell)));
        }
        Ok(ell)
    }

    fn explicit(&self) -> bool {
        self.gamma.is_some() || self.lambda.is_some()
    }

    fn resolve(&self, fallback_ell: usize) -> std::result::Result<SpectralParams, Fail> {
        let ell = self.rank(fallback_ell)?;
        let d = if ell == 1 { &GL2_DEFAULT } else { &GL3_DEFAULT };
        let kappa = self.kappa.unwrap_or(d.kappa);
        let check_len = |n: usize, what: &str| {
            if n != ell + 1 {
                Err(Fail::Usage(format!("--{what} needs {} entries for ell = {ell}, got {n}", ell + 1)))
            } else {
                Ok(())
            }
        };
        if let Some(g) = &self.gamma {
            if self.lambda.is_some() {
                return Err(Fail::Usage("--gamma and --lambda are exclusive".into()));
            }
            let g = parse_complex_list(g)?;
            check_len(g.len(), "gamma")?;
            return Ok(SpectralParams::from_gamma(&g, kappa)?);
        }
        let lambda = match &self.lambda {
            Some(l) => parse_real_list(l)?,
            None => d.lambda.to_vec(),
        };
        check_len(lambda.len(), "lambda")?;
        Ok(SpectralParams::from_lambda(&lambda, self.eps.unwrap_or(d.eps), kappa)?)
    }
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}

fn points(rng: &mut ChaCha8Rng, n: usize, dim: usize, half: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| uniform(rng, -half, half)).collect()).collect()
}

fn require_samples(n: usize) -> CmdResult {
    if n == 0 {
        return Err(Fail::Usage("--samples must be at least 1".into()));
    }
    Ok(())
}

struct IdentityBox {
    kind: IdentityKind,
    re: (f64, f64),
    im: f64,
    tol: f64,
}

const IDENTITY_BOXES: [IdentityBox; 5] = [
    IdentityBox { kind: IdentityKind::Barnes, re: (0.1, 1.2), im: 0.5, tol: 1e-8 },
    IdentityBox { kind: IdentityKind::Gustafson, re: (0.15, 1.0), im: 0.5, tol: 1e-7 },
    IdentityBox { kind: IdentityKind::ThreeGamma, re: (0.15, 1.0), im: 0.5, tol: 1e-7 },
    IdentityBox { kind: IdentityKind::Euler, re: (0.1, 3.0), im: 2.0, tol: 1e-10 },
    IdentityBox { kind: IdentityKind::Beta, re: (0.2, 2.0), im: 1.0, tol: 1e-10 },
];

fn cmd_identities(a: &IdentitiesArgs, run: &mut Runner) -> CmdResult {
    require_samples(a.samples)?;
    let spec = a.common.spec(1e-12);
    for (k, b) in IDENTITY_BOXES.iter().enumerate() {
        if a.which != IdentityKind::All && a.which != b.kind {
            continue;
        }
        let (lo, hi) = (a.re_min.unwrap_or(b.re.0), a.re_max.unwrap_or(b.re.1));
        let im = a.im_max.unwrap_or(b.im);
        if !(lo < hi) || im < 0.0 {
            return Err(Fail::Usage(format!("empty parameter box re=({lo},{hi}) im={im}")));
        }
        let tol = a.tol.unwrap_or(b.tol);
        let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(k as u64 + 1)));
        for s in 0..a.samples {
            let mut z = || c(uniform(&mut rng, lo, hi), if im > 0.0 { uniform(&mut rng, -im, im) } else { 0.0 });
            let name = format!("{}[{s}]", b.kind.label());
            match b.kind {
                IdentityKind::Barnes => {
                    let (x, y) = ([z(), z()], [z(), z()]);
                    run.record(name, tol, || barnes_first(x, y, &spec));
                }
                IdentityKind::Gustafson => {
                    let x = [z(), z(), z(), z()];
                    run.record(name, tol, || gustafson_n1(x, &spec));
                }
                IdentityKind::ThreeGamma => {
                    let x = [z(), z(), z()];
                    run.record(name, tol, || three_gamma(x, &spec));
                }
                IdentityKind::Euler => {
                    let x = z();
                    run.record(name, tol, || euler_gamma(x, &spec));
                }
                IdentityKind::Beta => {
                    let (x, y) = (z(), z());
                    run.record(name, tol, || beta_integral(x, y, &spec));
                }
                IdentityKind::All => unreachable!(),
            }
        }
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs, run: &mut Runner) -> CmdResult {
    let p = a.params.resolve(1)?;
    let x = parse_real_list(&a.x)?;
    if x.len() != p.ell + 1 {
        return Err(Fail::Usage(format!("--x needs {} entries, got {}", p.ell + 1, x.len())));
    }
    let spec = a.common.spec(if p.ell == 2 { 1e-9 } else { 1e-12 });
    let t0 = Instant::now();
    let name = format!("psi_{}", a.rep.label());
    match psi(&p, &TorusPoint::new(&x), a.rep.rep(), &spec) {
        Ok(v) => {
            let rel = v.quad.err_estimate / v.value.norm().max(1e-300);
            run.checks.push(Check {
                name,
                lhs: Some(v.value.into()),
                rhs: None,
                abs_err: Some(v.quad.err_estimate),
                rel_err: Some(rel),
                threshold: a.tol,
                n_evals: v.quad.n_evals,
                wall_ms: a.common.timing.then(|| t0.elapsed().as_secs_f64() * 1e3),
                ok: v.value.is_finite() && rel < a.tol,
                error: None,
                numerical: false,
            });
        }
        Err(e) => run.push_error(name, a.tol, e, t0.elapsed().as_secs_f64() * 1e3),
    }
    Ok(())
}

fn pair_report(name: &str, a: C, b: C, n_evals: usize) -> IdentityReport {
    let mut r = IdentityReport::new(name, a, b, None, String::new());
    r.quad = Some(crate::quadrature::QuadResult { value: a, err_estimate: 0.0, n_evals, truncation_radius: 0.0 });
    r
}

fn cmd_compare(a: &CompareArgs, run: &mut Runner) -> CmdResult {
    let ell = a.params.rank(1)?;
    if a.reps.is_empty() {
        return Err(Fail::Usage("--reps is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    if a.fourier {
        if ell != 2 {
            return Err(Fail::Usage("--fourier needs ell = 2".into()));
        }
        let p = if a.params.explicit() {
            a.params.resolve(2)?
        } else {
            SpectralParams::from_gamma(&[c(0.4, 0.0), c(0.1, 0.0), c(-0.5, 0.0)], 0.0)?
        };
        let n = a.samples.unwrap_or(10);
        require_samples(n)?;
        let spec = a.common.spec(1e-12);
        let tol = a.tol.unwrap_or(1e-7);
        for (k, pp) in points(&mut rng, n, 2, 1.0).into_iter().enumerate() {
            let closed = phi_hat_closed_form(&p, &pp);
            for rep in &a.reps {
                let name = format!("phi_hat_{}~closed[{k}]", rep.label());
                match rep {
                    RepArg::Mb => run.record(name, tol, || {
                        let q = phi_hat_mb_integral(&p, &pp, &spec)?;
                        Ok(IdentityReport::new("", q.value, closed.clone()?, Some(q), String::new()))
                    }),
                    RepArg::Givental => run.record(name, tol, || {
                        let q = phi_hat_givental_reduced(&p, &pp, &spec)?;
                        Ok(IdentityReport::new("", q.value, closed.clone()?, Some(q), String::new()))
                    }),
                    RepArg::Modified => {}
                }
            }
        }
        return Ok(());
    }
    let (n, half_g, half_x, tol, rel) = if ell == 1 { (9, 1.0, 1.0, 1e-8, 1e-12) } else { (3, 0.5, 0.5, 1e-6, 1e-9) };
    let n = a.samples.unwrap_or(n);
    require_samples(n)?;
    let spec = a.common.spec(rel);
    let tol = a.tol.unwrap_or(tol);
    let eps = a.params.eps.unwrap_or(if ell == 1 { 0.0 } else { 0.2 });
    for k in 0..n {
        let p = if a.params.explicit() {
            a.params.resolve(ell)?
        } else {
            let lambda: Vec<f64> = (0..=ell).map(|_| uniform(&mut rng, -half_g, half_g)).collect();
            SpectralParams::from_lambda(&lambda, eps, 0.0)?
        };
        let x: Vec<f64> = (0..=ell).map(|_| uniform(&mut rng, -half_x, half_x)).collect();
        let pt = TorusPoint::new(&x);
        let mut values: Vec<(RepArg, C, usize)> = Vec::new();
        for rep in &a.reps {
            let t0 = Instant::now();
            match psi(&p, &pt, rep.rep(), &spec) {
                Ok(v) => values.push((*rep, v.value, v.quad.n_evals)),
                Err(e) => run.push_error(format!("psi_{}[{k}]", rep.label()), tol, e, t0.elapsed().as_secs_f64() * 1e3),
            }
        }
        for i in 0..values.len() {
            for j in i + 1..values.len() {
                let (ra, va, na) = values[i];
                let (rb, vb, nb) = values[j];
                let name = format!("{}~{}[{k}]", ra.label(), rb.label());
                run.record(name, tol, || Ok(pair_report("", va, vb, na + nb)));
            }
        }
        if ell == 1 {
            let oracle = psi_gl2_bessel([p.gamma[0], p.gamma[1]], [x[0], x[1]], &spec);
            for (r, v, ne) in &values {
                let name = format!("{}~bessel[{k}]", r.label());
                run.record(name, tol, || Ok(pair_report("", *v, oracle.clone()?, *ne)));
            }
        }
    }
    Ok(())
}

fn cmd_intertwine(a: &IntertwineArgs, run: &mut Runner) -> CmdResult {
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let spec = a.common.spec(1e-12);
    let gl3 = || a.params.resolve(2);
    match a.check {
        IntertwineCheck::Br | IntertwineCheck::Bl => {
            let p = gl3()?;
            let n = a.samples.unwrap_or(5);
            require_samples(n)?;
            let tol = a.tol.unwrap_or(1e-8);
            for (k, t) in points(&mut rng, n, 3, 1.0).into_iter().enumerate() {
                let tau = [t[0], t[1], t[2]];
                if a.check == IntertwineCheck::Br {
                    run.record(format!("br_phi_r[{k}]"), tol, || check_br_whittaker(&p, tau, &spec));
                } else {
                    run.record(format!("bl_phi_l[{k}]"), tol, || check_bl_whittaker(&p, tau, &spec));
                }
            }
        }
        IntertwineCheck::BldagBr => {
            let p = gl3()?;
            let n = a.samples.unwrap_or(3);
            require_samples(n)?;
            let tol = a.tol.unwrap_or(1e-7);
            for (k, t) in points(&mut rng, n, 3, 0.5).into_iter().enumerate() {
                let s = [t[0], t[1], t[2]];
                run.record(format!("bldag_br_fixedpoint[{k}]"), tol, || gl3_bldag_br_fixedpoint(&p, s, &spec));
                run.record(format!("fixedpoint_inner_integral[{k}]"), tol, || fixedpoint_inner_integral(&p, s, &spec));
            }
        }
        IntertwineCheck::E21 | IntertwineCheck::E23 => {
            let (which, dim, label) =
                if a.check == IntertwineCheck::E21 { (ScalarIdentity::Quadratic, 7, "kernel_quadratic") } else { (ScalarIdentity::DividedDifference, 6, "kernel_divided_difference") };
            let n = a.samples.unwrap_or(100);
            require_samples(n)?;
            let tol = a.tol.unwrap_or(1e-12);
            let mut k = 0;
            let mut attempts = 0;
            while k < n {
                attempts += 1;
                if attempts > 100 * n {
                    return Err(Fail::Lib(Error::DegenerateSample(format!("{label}: no admissible sample"))));
                }
                let z: Vec<C> = (0..dim).map(|_| c(uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0))).collect();
                match check_kernel_scalar_identity(which, &z) {
                    Err(Error::DegenerateSample(_)) => continue,
                    r => {
                        run.record(format!("{label}[{k}]"), tol, || r);
                        k += 1;
                    }
                }
            }
        }
        IntertwineCheck::KernelAll => {
            let tol = a.tol.unwrap_or(1e-10);
            let n = a.samples.unwrap_or(5);
            require_samples(n)?;
            let p3 = gl3()?;
            let p2 = if a.params.explicit() { a.params.resolve(1)? } else { ParamArgs { ell: Some(1), ..a.params.clone() }.resolve(1)? };
            let gl3_pairs = [(1, 1), (2, 2), (3, 3), (1, 2), (2, 1), (2, 3), (3, 2)];
            let gl2_pairs = [(1, 1), (2, 2), (1, 2), (2, 1)];
            for (side, ps, label) in [
                (KernelSide::RGl3, &p3, "r_gl3"),
                (KernelSide::LdagGl3, &p3, "ldag_gl3"),
                (KernelSide::RGl2, &p2, "r_gl2"),
                (KernelSide::LGl2, &p2, "l_gl2"),
            ] {
                let pairs: &[(usize, usize)] = if ps.ell == 2 { &gl3_pairs } else { &gl2_pairs };
                for &ij in pairs {
                    let mut k = 0;
                    while k < n {
                        let free: Vec<C> = if ps.ell == 2 {
                            vec![
                                c(uniform(&mut rng, -1.0, 1.0), 0.0),
                                c(uniform(&mut rng, -1.0, 0.0), 0.0),
                                c(uniform(&mut rng, 0.2, 1.2), 0.0),
                                c(uniform(&mut rng, -1.0, 1.0), 0.0),
                            ]
                        } else {
                            vec![c(uniform(&mut rng, -1.5, 1.5), 0.0)]
                        };
                        match check_kernel_intertwining(side, ij, ps, &free) {
                            Err(Error::DegenerateSample(_)) => continue,
                            r => {
                                run.record(format!("kernel_{label}_E{}{}[{k}]", ij.0, ij.1), tol, || r);
                                k += 1;
                            }
                        }
                    }
                }
            }
        }
        IntertwineCheck::Gl2All => {
            let p = a.params.resolve(1)?;
            if p.ell != 1 {
                return Err(Fail::Usage("gl2-all needs ell = 1".into()));
            }
            let n = a.samples.unwrap_or(5);
            require_samples(n)?;
            let tol = a.tol.unwrap_or(1e-11);
            for k in 0..n {
                let tau = uniform(&mut rng, -2.0, 2.0);
                run.record_many(&format!("[{k}]"), tol, || check_gl2_whittaker_images(&p, tau, &spec));
                run.record_many(&format!("[{k}]"), tol, || check_gl2_kernel_relations(&p, tau));
            }
        }
        IntertwineCheck::Chain => {
            let p = gl3()?;
            let n = a.samples.unwrap_or(1);
            require_samples(n)?;
            let tol = a.tol.unwrap_or(1e-6);
            let spec = a.common.spec(1e-9);
            for (k, x) in points(&mut rng, n, 3, 0.5).into_iter().enumerate() {
                run.record(format!("intertwiner_chain[{k}]"), tol, || intertwiner_chain(&p, [x[0], x[1], x[2]], &spec));
            }
        }
    }
    Ok(())
}

pub fn toda_grid(ell: usize) -> Vec<TorusPoint> {
    if ell == 1 {
        let mut g = Vec::new();
        for a in [-0.8, 0.0, 0.8] {
            for b in [-0.5, 0.3, 1.0] {
                g.push(TorusPoint::new(&[a, b]));
            }
        }
        g
    } else {
        [[0.0, 0.0, 0.0], [0.3, 0.0, -0.3], [-0.2, 0.2, 0.0], [0.4, -0.1, 0.1], [0.0, 0.3, -0.2]]
            .iter()
            .map(|x| TorusPoint::new(x))
            .collect()
    }
}

fn cmd_toda(a: &TodaArgs, run: &mut Runner) -> CmdResult {
    let ell = a.params.rank(1)?;
    let p = if a.params.explicit() {
        a.params.resolve(ell)?
    } else {
        let g: &[f64] = if ell == 1 { &[0.5, -0.5] } else { &[0.2, 0.0, -0.2] };
        SpectralParams::from_lambda(g, a.params.eps.unwrap_or(0.0), 0.0)?
    };
    let rep = a.rep.unwrap_or(if ell == 1 { RepArg::Givental } else { RepArg::Mb });
    let tol = a.tol.unwrap_or(if ell == 1 { 1e-5 } else { 1e-4 });
    let spec = a.common.spec(if ell == 1 { 1e-12 } else { 1e-10 });
    let t0 = Instant::now();
    let scan = evaluator(&p, rep.rep(), &spec).and_then(|f| eigen_ratio_scan(&*f, &toda_grid(ell), a.h));
    let ms = t0.elapsed().as_secs_f64() * 1e3;
    let s = match scan {
        Ok(s) => s,
        Err(e) => {
            run.push_error("toda_scan".into(), tol, e, ms);
            return Ok(());
        }
    };
    let mean = c(s.mean.0, s.mean.1);
    for (k, r) in s.ratios.iter().enumerate() {
        let z = c(r.0, r.1);
        let d = (z - mean).norm();
        run.push_value(format!("ratio[{k}]"), tol, z, mean, d, d / mean.norm().max(1.0));
    }
    run.push_value("spread".into(), tol, c(s.spread, 0.0), c(0.0, 0.0), s.spread, s.spread / mean.norm().max(1.0));
    let e = plane_wave_eigenvalue(&p.gamma);
    let d = (mean - e).norm();
    run.push_value("eigenvalue".into(), tol, mean, e, d, d / e.norm().max(1.0));
    if let Some(last) = run.checks.last_mut() {
        last.wall_ms = a.common.timing.then_some(ms);
    }
    Ok(())
}

fn build_realization(kind: RealizationKind, p: &SpectralParams) -> crate::Result<Realization> {
    match kind {
        RealizationKind::Gt => gt_realization(p),
        RealizationKind::Gtmod => gt_modified(p),
        RealizationKind::Gtshift => gt_shifted(p),
        RealizationKind::Gg => gg_realization(p),
        RealizationKind::Ggmod => gg_modified(p, false),
        RealizationKind::GgmodDual => gg_modified(p, true),
    }
}

fn cmd_commutators(a: &RealizationArgs, run: &mut Runner) -> CmdResult {
    let p = a.params.resolve(2)?;
    let seed = a.common.seed;
    let tol = a.tol.unwrap_or(if a.realization == RealizationKind::Gg { 1e-5 } else { 1e-10 });
    let r = match build_realization(a.realization, &p) {
        Ok(r) => r,
        Err(e) => {
            run.push_error("commutators".into(), tol, e, 0.0);
            return Ok(());
        }
    };
    run.record("commutators", tol, || check_gl_commutations(&r, seed));
    if p.ell == 2 {
        match a.realization {
            RealizationKind::Gt => run.record("opposite", tol, || check_opposite_relations(&r, &gt_primed(&p)?, seed)),
            RealizationKind::Ggmod => {
                run.record("opposite", tol, || check_opposite_relations(&r, &gg_modified_primed(&p)?, seed))
            }
            RealizationKind::Gtmod => {
                run.record("conjugation", tol, || check_conjugation(&gt_realization(&p)?, &r, &mu1(2), seed))
            }
            _ => {}
        }
    }
    Ok(())
}

fn cmd_whitvec(a: &RealizationArgs, run: &mut Runner) -> CmdResult {
    let p = a.params.resolve(2)?;
    let tol = a.tol.unwrap_or(if a.realization == RealizationKind::Gg { 1e-6 } else { 1e-10 });
    let seed = a.common.seed;
    run.record("whittaker_vectors", tol, || {
        let r = build_realization(a.realization, &p)?;
        check_whittaker_defining(&r, &whittaker_vectors(&r)?, seed)
    });
    Ok(())
}

fn cmd_contour(a: &ContourArgs, run: &mut Runner) -> CmdResult {
    let p = a.params.resolve(1)?;
    require_samples(a.samples)?;
    let mut rng = ChaCha8Rng::seed_from_u64(a.common.seed);
    let spec = a.common.spec(if p.ell == 1 { 1e-12 } else { 1e-10 });
    let kappa = p.kappa;
    if p.ell == 1 {
        let poles = gl2_mb_poles(&p, 4);
        let crossed = poles.iter().any(|z| z.im > -kappa && z.im < 0.0);
        let tol = a.tol.unwrap_or(if crossed { 1e-4 } else { 1e-8 });
        for (k, x) in points(&mut rng, a.samples, 2, 1.0).into_iter().enumerate() {
            let f = gl2_mb_integrand(&p, [x[0], x[1]]);
            run.record(format!("contour_gl2[{k}]"), tol, || contour_shift_residual(&f, &poles, kappa, &spec));
        }
    } else {
        let tol = a.tol.unwrap_or(1e-8);
        let tables = Mb3Table::new(&p, &spec).and_then(|t0| Ok((t0, Mb3Table::shifted(&p, kappa, &spec)?)));
        let (t0, t1) = match tables {
            Ok(t) => t,
            Err(e) => {
                run.push_error("contour_gl3".into(), tol, e, 0.0);
                return Ok(());
            }
        };
        for (k, u) in points(&mut rng, a.samples, 2, 1.0).into_iter().enumerate() {
            let (q0, q1) = (t0.phi([u[0], u[1]]), t1.phi([u[0], u[1]]));
            run.record(format!("contour_gl3[{k}]"), tol, || Ok(IdentityReport::new("", q1.value, q0.value, Some(q1), String::new())));
        }
    }
    Ok(())
}

fn execute(cmd: &Command) -> (String, serde_json::Value, bool, std::result::Result<Runner, Fail>) {
    let (name, config, timing) = match cmd {
        Command::Identities(a) => ("identities", json(a), a.common.timing),
        Command::Eval(a) => ("eval", json(a), a.common.timing),
        Command::Compare(a) => ("compare", json(a), a.common.timing),
        Command::Intertwine(a) => ("intertwine", json(a), a.common.timing),
        Command::Toda(a) => ("toda", json(a), a.common.timing),
        Command::Commutators(a) => ("commutators", json(a), a.common.timing),
        Command::Whitvec(a) => ("whitvec", json(a), a.common.timing),
        Command::Contour(a) => ("contour", json(a), a.common.timing),
    };
    let mut run = Runner::new(timing);
    let r = match cmd {
        Command::Identities(a) => cmd_identities(a, &mut run),
        Command::Eval(a) => cmd_eval(a, &mut run),
        Command::Compare(a) => cmd_compare(a, &mut run),
        Command::Intertwine(a) => cmd_intertwine(a, &mut run),
        Command::Toda(a) => cmd_toda(a, &mut run),
        Command::Commutators(a) => cmd_commutators(a, &mut run),
        Command::Whitvec(a) => cmd_whitvec(a, &mut run),
        Command::Contour(a) => cmd_contour(a, &mut run),
    };
    (name.to_string(), config, timing, r.map(|_| run))
}

fn json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config serializes")
}

/// Runs a parsed command and builds its report; usage failures are returned as Err.
pub fn run_command(cmd: &Command) -> std::result::Result<Report, String> {
    let (command, config, timing, r) = execute(cmd);
    let checks = match r {
        Ok(run) => run.checks,
        Err(Fail::Usage(m)) => return Err(m),
        Err(Fail::Lib(e)) => {
            let mut run = Runner::new(timing);
            run.push_error(command.clone(), 0.0, e, 0.0);
            run.checks
        }
    };
    let pass = !checks.is_empty() && checks.iter().all(|c| c.ok);
    Ok(Report { command, config, checks, pass })
}

/// Reads `key = value` lines into flags. `#` starts a comment; `true`/`false` toggle switches.
pub fn config_file_args(text: &str) -> std::result::Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        let (k, v) = (k.trim().trim_start_matches("--").replace('_', "-"), v.trim());
        match v {
            "true" => out.push(format!("--{k}")),
            "false" => {}
            _ => {
                out.push(format!("--{k}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

fn config_path(args: &[String]) -> Option<String> {
    args.iter().enumerate().find_map(|(i, a)| {
        if a == "--config" {
            args.get(i + 1).cloned()
        } else {
            a.strip_prefix("--config=").map(str::to_string)
        }
    })
}

/// Splices config-file flags in front of the command-line flags so the latter win.
pub fn expand_args(args: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {path}: {e}"))?;
    let extra = config_file_args(&text)?;
    let at = args.iter().skip(1).position(|a| !a.starts_with('-')).map_or(args.len(), |p| p + 2);
    let mut out = args[..at.min(args.len())].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[at.min(args.len())..]);
    Ok(out)
}

fn threads_from_env() -> std::result::Result<(), String> {
    match std::env::var("WHITLAB_THREADS") {
        Ok(v) => v.trim().parse::<usize>().map(|_| ()).map_err(|_| format!("WHITLAB_THREADS must be a positive integer, got '{v}'")),
        Err(_) => Ok(()),
    }
}

fn output_target(cmd: &Command) -> (Option<PathBuf>, Format) {
    let c = match cmd {
        Command::Identities(a) => &a.common,
        Command::Eval(a) => &a.common,
        Command::Compare(a) => &a.common,
        Command::Intertwine(a) => &a.common,
        Command::Toda(a) => &a.common,
        Command::Commutators(a) => &a.common,
        Command::Whitvec(a) => &a.common,
        Command::Contour(a) => &a.common,
    };
    (c.output.clone(), c.format)
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with_args(args: Vec<String>) -> i32 {
    let usage = |m: &str| {
        eprintln!("whitlab: {m}");
        EXIT_USAGE
    };
    if let Err(m) = threads_from_env() {
        return usage(&m);
    }
    let args = match expand_args(args) {
        Ok(a) => a,
        Err(m) => return usage(&m),
    };
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let report = match run_command(&cli.command) {
        Ok(r) => r,
        Err(m) => return usage(&m),
    };
    let (path, format) = output_target(&cli.command);
    let text = report.render(format);
    let written = match path {
        Some(p) => std::fs::write(&p, text).map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(m) = written {
        eprintln!("whitlab: {m}");
        return EXIT_FAIL;
    }
    report.exit_code()
}
