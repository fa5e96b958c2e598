//! Intertwining kernels between the Gelfand-Tsetlin and modified Gauss-Givental
//! realizations, stored with their delta factors already solved.
//!
//! gl3 kernels act on functions of (t11, t21, t22) where t11 runs over the
//! shifted line R - i kappa; outputs are reported at that shifted point.

use crate::cgamma::{c, log_gamma, rgamma, C};
use crate::error::{Error, Result};
use crate::funcspace::{AnalyticFn, ShiftOp};
use crate::identities::{three_gamma_closed, pm_gamma, sym_measure, IdentityReport};
use crate::quadrature::{line, QuadResult, QuadSpec};
use crate::realizations::{
    gg3_phi_l, gg3_phi_r, gg_modified, gg_modified_primed, gt3_psi_r_log, gt_dual, gt_primed, gt_realization, whittaker_vectors,
    Realization, RootData, SpectralParams,
};
use crate::whittaker::{psi_modified, Mb3Table, TorusPoint};
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

fn i() -> C {
    C::i()
}

fn lg(z: C) -> C {
    log_gamma(z).unwrap_or(c(f64::NAN, f64::NAN))
}

type ArgMap = Arc<dyn Fn(&[C], &[C]) -> Vec<C> + Send + Sync>;
type Weight = Arc<dyn Fn(&[C], &[C]) -> C + Send + Sync>;

/// Kernel with every delta eliminated: (K f)(out) = pre(out) * int w(out, g) f(arg(out, g)) dg
/// over the free variables g (none or one, on R).
#[derive(Clone)]
pub struct ReducedKernel {
    pub name: String,
    pub free_count: usize,
    constraint_map: ArgMap,
    pub prefactor: AnalyticFn,
    integrand: Weight,
}

impl std::fmt::Debug for ReducedKernel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "ReducedKernel({}, free={})", self.name, self.free_count)
    }
}

impl ReducedKernel {
    pub fn solve(&self, out: &[C], free: &[C]) -> Vec<C> {
        (self.constraint_map)(out, free)
    }

    pub fn weight(&self, out: &[C], free: &[C]) -> C {
        (self.integrand)(out, free)
    }

    pub fn apply(&self, f: &AnalyticFn, out: &[C], spec: &QuadSpec) -> Result<QuadResult> {
        let zero = vec![c(0.0, 0.0); self.free_count];
        // Imaginary parts of the arguments do not depend on real free variables.
        f.try_eval(&self.solve(out, &zero))?;
        let pre = self.prefactor.eval(out);
        if self.free_count == 0 {
            let v = pre * self.weight(out, &[]) * f.eval(&self.solve(out, &[]));
            return Ok(QuadResult { value: v, err_estimate: 0.0, n_evals: 1, truncation_radius: 0.0 });
        }
        let g = |z: C| self.weight(out, &[z]) * f.eval(&self.solve(out, &[z]));
        let q = line(&g, 0.0, spec)?;
        Ok(QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Gl2Kernel {
    BR,
    BL,
    BLdag,
    N,
}

fn require_gl(params: &SpectralParams, ell: usize) -> Result<()> {
    if params.ell != ell || params.gamma.len() != ell + 1 {
        return Err(Error::RankUnsupported(params.ell));
    }
    Ok(())
}

pub fn gl2_kernel(which: Gl2Kernel, params: &SpectralParams) -> Result<ReducedKernel> {
    require_gl(params, 1)?;
    let g = params.gamma.clone();
    let (g1, g2) = (g[0], g[1]);
    let (gb1, gb2) = (g1.conj(), g2.conj());
    let (l1, l2) = (params.lambda[0], params.lambda[1]);
    let k = |name: &str, map: ArgMap, pre: AnalyticFn, w: Weight| ReducedKernel {
        name: name.into(),
        free_count: 0,
        constraint_map: map,
        prefactor: pre,
        integrand: w,
    };
    Ok(match which {
        Gl2Kernel::BR => k(
            "gl2 B_R",
            Arc::new(move |t, _| vec![t[0] - g1]),
            AnalyticFn::univariate(|t| (PI * t / 2.0).exp()),
            Arc::new(move |t, _| lg(i() * (g2 - t[0]) + 0.5).exp()),
        ),
        Gl2Kernel::BL => k(
            "gl2 B_L",
            Arc::new(move |t, _| vec![t[0] - gb1]),
            AnalyticFn::univariate(|t| (-PI * t / 2.0).exp()),
            Arc::new(move |t, _| (-lg(i() * (t[0] - gb2) + 0.5)).exp()),
        ),
        Gl2Kernel::BLdag => k(
            "gl2 B_L^dag",
            Arc::new(move |s, _| vec![g1 + s[0]]),
            AnalyticFn::constant(1, c(1.0, 0.0)),
            Arc::new(move |s, _| (-PI * (g1 + s[0]) / 2.0 - lg(i() * (g2 - g1 - s[0]) + 0.5)).exp()),
        ),
        Gl2Kernel::N => k(
            "gl2 N",
            Arc::new(move |t, _| vec![t[0] - l1]),
            AnalyticFn::univariate(move |t| {
                let z = lg(i() * (l2 - t) + 0.5);
                (i() * z.im).exp()
            }),
            Arc::new(|_, _| c(1.0, 0.0)),
        ),
    })
}

/// B_R, B_L and N act as f(tau) -> (K f)(tau); B_L^dag as g(s) -> (K g)(s), with tau read as s.
pub fn gl2_apply_kernel(which: Gl2Kernel, f: &AnalyticFn, params: &SpectralParams, tau: f64) -> Result<C> {
    let k = gl2_kernel(which, params)?;
    Ok(k.apply(f, &[c(tau, 0.0)], &QuadSpec::default())?.value)
}

/// sigma(tau) = e^{-pi tau/2} / |Gamma(i(l2 - tau) + 1/2)| for real tau.
pub fn gl2_sigma(lambda2: f64, tau: f64) -> f64 {
    (-PI * tau / 2.0 - lg(c(0.5, lambda2 - tau)).re).exp()
}

/// Closed form of sigma, continued off the real line; i-periodic.
pub fn gl2_sigma_closed(lambda2: f64, tau: C) -> C {
    (-PI * lambda2 / 2.0).exp() / (2.0 * PI).sqrt() * (1.0 + (2.0 * PI * (lambda2 - tau)).exp()).sqrt()
}

fn eps_of(params: &SpectralParams) -> f64 {
    params.gamma[0].im
}

/// Barnes parameters (a, b) of the reduced s21-integral of B_R phi_R.
pub fn gl3_br_barnes_params(params: &SpectralParams, tau: [f64; 3]) -> ([C; 2], [C; 2]) {
    let k = params.kappa;
    let g = &params.gamma;
    let a = [i() * (tau[0] - tau[1]) + k, i() * (tau[0] - tau[2]) + k];
    let b = [i() * (g[0] - tau[0]) + 0.5 - k, i() * (g[1] - tau[0]) + 0.5 - k];
    (a, b)
}

/// Barnes parameters (a, b) of the reduced s11-integral of B_L phi_L.
pub fn gl3_bl_barnes_params(params: &SpectralParams, tau: [f64; 3]) -> ([C; 2], [C; 2]) {
    let k = params.kappa;
    let gb: Vec<C> = params.gamma.iter().map(|z| z.conj()).collect();
    let a = [i() * (tau[0] - gb[0]) + k + 0.5, i() * (tau[1] + tau[2] - gb[0] - gb[2]) + 0.5];
    let b = [i() * (gb[0] - tau[1]), i() * (gb[0] - tau[2])];
    (a, b)
}

fn positive_parts(name: &str, z: &[C]) -> Result<()> {
    for a in z {
        if a.re <= 0.0 {
            return Err(Error::ParameterConstraintViolated(format!("{name}: Barnes parameter {a} has Re <= 0")));
        }
    }
    Ok(())
}

pub fn gl3_br_kernel(params: &SpectralParams) -> Result<ReducedKernel> {
    require_gl(params, 2)?;
    let k = params.kappa;
    if k <= 0.0 {
        return Err(Error::ParameterConstraintViolated(format!("B_R needs kappa > 0, got {k}")));
    }
    let (a, b) = gl3_br_barnes_params(params, [0.0; 3]);
    positive_parts("B_R", &[a[0], a[1], b[0], b[1]])?;
    let g = params.gamma.clone();
    let (g1, g2) = (g[0], g[1]);
    let gp = g.clone();
    let map: ArgMap = Arc::new(move |t, f| {
        let s11 = t[0] - i() * k - g1 - f[0];
        vec![s11, f[0], t[1] + t[2] - g1 - g2 - s11]
    });
    let pre = AnalyticFn::new(3, move |t: &[C]| {
        let mut l = PI * (t[0] - i() * k) / 2.0 - (2.0 * PI).ln();
        for j in 1..3 {
            l += lg(i() * (t[j] - t[0]) - k + 0.5) + lg(i() * (gp[2] - t[j]) + 0.5);
        }
        l.exp() * rgamma(i() * (t[1] - t[2]))
    });
    let w: Weight = Arc::new(move |t, f| {
        let s21 = f[0];
        let s11 = t[0] - i() * k - g1 - s21;
        let mut l = lg(i() * (g2 - g1 - s11) + 0.5) - lg(0.5 - i() * s21);
        for j in 1..3 {
            l += lg(i() * (t[0] - t[j] - s21) + k);
        }
        l.exp()
    });
    Ok(ReducedKernel { name: "gl3 B_R".into(), free_count: 1, constraint_map: map, prefactor: pre, integrand: w })
}

pub fn gl3_bl_kernel(params: &SpectralParams) -> Result<ReducedKernel> {
    require_gl(params, 2)?;
    let eps = eps_of(params);
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::ParameterConstraintViolated(format!("B_L needs 0 < eps < 1/2, got {eps}")));
    }
    if params.gamma[2].im.abs() > 1e-12 {
        return Err(Error::ParameterConstraintViolated("B_L needs real gamma_3".into()));
    }
    let (a, b) = gl3_bl_barnes_params(params, [0.0; 3]);
    positive_parts("B_L", &[a[0], a[1], b[0], b[1]])?;
    let k = params.kappa;
    let gb: Vec<C> = params.gamma.iter().map(|z| z.conj()).collect();
    let (gb1, gb2, g3) = (gb[0], gb[1], params.gamma[2]);
    let map: ArgMap = Arc::new(move |t, f| {
        let s11 = f[0];
        vec![s11, t[0] - i() * k - gb1 - s11, t[1] + t[2] - gb1 - gb2 - s11]
    });
    let pre = AnalyticFn::new(3, move |t: &[C]| {
        let mut l = -PI * (t[0] - i() * k) / 2.0 - (2.0 * PI).ln();
        for j in 1..3 {
            l -= lg(i() * (t[0] - t[j]) + k + 0.5) + lg(i() * (t[j] - g3) + 0.5);
        }
        l.exp() * rgamma(i() * (t[1] - t[2]))
    });
    let w: Weight = Arc::new(move |t, f| {
        let s11 = f[0];
        let s21 = t[0] - i() * k - gb1 - s11;
        let mut l = lg(i() * s21 + 0.5) - lg(i() * (gb1 - gb2 + s11) + 0.5);
        for j in 1..3 {
            l += lg(i() * (t[0] - t[j] - s21) + k);
        }
        l.exp()
    });
    Ok(ReducedKernel { name: "gl3 B_L".into(), free_count: 1, constraint_map: map, prefactor: pre, integrand: w })
}

/// Adjoint of B_L for the GT pairing with its 1/2! symmetry factor. Acts on functions of
/// (t11, t21, t22); the free variable is tau_- = (t21 - t22)/2, tau_+ is fixed by the delta.
pub fn gl3_bldag_kernel(params: &SpectralParams) -> Result<ReducedKernel> {
    require_gl(params, 2)?;
    let eps = eps_of(params);
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::ParameterConstraintViolated(format!("B_L^dag needs 0 < eps < 1/2, got {eps}")));
    }
    let g = params.gamma.clone();
    let (g1, g2, g3) = (g[0], g[1], g[2]);
    let map: ArgMap = Arc::new(move |s, f| {
        let t = g1 + s[0] + s[1];
        let tp = (g1 + g2 + s[0] + s[2]) / 2.0;
        vec![t, tp + f[0], tp - f[0]]
    });
    let pre = AnalyticFn::new(3, move |s: &[C]| {
        0.25 / PI * (lg(0.5 - i() * s[1]) - lg(-i() * (g1 - g2 + s[0]) + 0.5)).exp()
    });
    let w: Weight = Arc::new(move |s, f| {
        let t = g1 + s[0] + s[1];
        let tp = (g1 + g2 + s[0] + s[2]) / 2.0;
        let tau = [tp + f[0], tp - f[0]];
        let mut l = -PI * t / 2.0;
        for tj in tau {
            l += lg(-i() * (t - tj - s[1])) - lg(-i() * (t - tj) + 0.5) - lg(-i() * (tj - g3) + 0.5);
        }
        l.exp() * rgamma(-i() * (tau[0] - tau[1]))
    });
    Ok(ReducedKernel { name: "gl3 B_L^dag".into(), free_count: 1, constraint_map: map, prefactor: pre, integrand: w })
}

fn real3(tau: [f64; 3]) -> [C; 3] {
    [c(tau[0], 0.0), c(tau[1], 0.0), c(tau[2], 0.0)]
}

/// (B_R f)(tau11 - i kappa, tau21, tau22).
pub fn gl3_br_apply(f: &AnalyticFn, params: &SpectralParams, tau: [f64; 3], spec: &QuadSpec) -> Result<QuadResult> {
    gl3_br_kernel(params)?.apply(f, &real3(tau), spec)
}

/// (B_L f)(tau11 - i kappa, tau21, tau22).
pub fn gl3_bl_apply(f: &AnalyticFn, params: &SpectralParams, tau: [f64; 3], spec: &QuadSpec) -> Result<QuadResult> {
    gl3_bl_kernel(params)?.apply(f, &real3(tau), spec)
}

/// Right GT vector psi_R(t11, t21, t22) conjugated by mu_1, at any complex t.
pub fn gl3_psi_tilde_r(params: &SpectralParams) -> AnalyticFn {
    let g = params.gamma.clone();
    AnalyticFn::new(3, move |v: &[C]| {
        (gt3_psi_r_log(&g, v) + PI * (v[1] + v[2]) / 2.0).exp() * rgamma(i() * (v[1] - v[2])) * (2.0 * PI).powf(-1.5)
    })
}

pub fn gl3_psi_tilde_l() -> AnalyticFn {
    AnalyticFn::new(3, |v: &[C]| (-PI * v[0] / 2.0).exp() * rgamma(i() * (v[1] - v[2])) * (2.0 * PI).powf(-1.5))
}

fn shifted_point(params: &SpectralParams, tau: [f64; 3]) -> [C; 3] {
    [c(tau[0], -params.kappa), c(tau[1], 0.0), c(tau[2], 0.0)]
}

/// B_R phi_R against psi_tilde_R at tau.
pub fn check_br_whittaker(params: &SpectralParams, tau: [f64; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    let phi_r = AnalyticFn::new(3, |v: &[C]| gg3_phi_r(v));
    let q = gl3_br_apply(&phi_r, params, tau, spec)?;
    let rhs = gl3_psi_tilde_r(params).eval(&shifted_point(params, tau));
    let echo = format!("gamma={:?} kappa={} tau={:?}", params.gamma, params.kappa, tau);
    Ok(IdentityReport::new("br_phi_r", q.value, rhs, Some(q), echo))
}

/// B_L phi_L against psi_tilde_L at tau.
pub fn check_bl_whittaker(params: &SpectralParams, tau: [f64; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    let gb: Vec<C> = params.gamma.iter().map(|z| z.conj()).collect();
    let phi_l = AnalyticFn::new(3, move |v: &[C]| gg3_phi_l(&gb, v));
    let q = gl3_bl_apply(&phi_l, params, tau, spec)?;
    let rhs = gl3_psi_tilde_l().eval(&shifted_point(params, tau));
    let echo = format!("gamma={:?} kappa={} tau={:?}", params.gamma, params.kappa, tau);
    Ok(IdentityReport::new("bl_phi_l", q.value, rhs, Some(q), echo))
}

/// gl2 images of the Whittaker vectors at tau: B_R phi_R, B_L phi_L and B_L^dag B_R phi_R.
pub fn check_gl2_whittaker_images(params: &SpectralParams, tau: f64, spec: &QuadSpec) -> Result<Vec<IdentityReport>> {
    require_gl(params, 1)?;
    let vecs = |r: Result<Realization>| -> Result<(AnalyticFn, AnalyticFn)> {
        let (l, r) = whittaker_vectors(&r?)?;
        Ok((l.f, r.f))
    };
    let (phi_l, phi_r) = vecs(gg_modified(params, false))?;
    let (psi_l, psi_r) = vecs(gt_realization(params))?;
    let n = (2.0 * PI).sqrt();
    let t = c(tau, 0.0);
    let echo = format!("gamma={:?} tau={tau}", params.gamma);
    let br = gl2_apply_kernel(Gl2Kernel::BR, &phi_r, params, tau)? * n;
    let bl = gl2_apply_kernel(Gl2Kernel::BL, &phi_l, params, tau)? * n;
    let br_fn = {
        let k = gl2_kernel(Gl2Kernel::BR, params)?;
        let (phi_r, s) = (phi_r.clone(), *spec);
        AnalyticFn::univariate(move |z| k.apply(&phi_r, &[z], &s).map_or(c(f64::NAN, f64::NAN), |q| q.value))
    };
    let back = gl2_apply_kernel(Gl2Kernel::BLdag, &br_fn, params, tau)?;
    Ok(vec![
        IdentityReport::new("gl2_br_phi_r", br, psi_r.eval(&[t]), None, echo.clone()),
        IdentityReport::new("gl2_bl_phi_l", bl, psi_l.eval(&[t]), None, echo.clone()),
        IdentityReport::new("gl2_bldag_br_phi_r", back, phi_r.eval(&[t]), None, echo),
    ])
}

/// Pointwise gl2 kernel relations at tau: B_L^dag against B_R, and the unitary
/// kernel N (taken at eps = 0) against sigma B_R and sigma^{-1} B_L.
pub fn check_gl2_kernel_relations(params: &SpectralParams, tau: f64) -> Result<Vec<IdentityReport>> {
    require_gl(params, 1)?;
    let g = params.gamma.clone();
    let t = c(tau, 0.0);
    let s = t - g[0];
    let dense = |k: &ReducedKernel, v: C| k.prefactor.eval(&[v]) * k.weight(&[v], &[]);
    let (br, bld) = (gl2_kernel(Gl2Kernel::BR, params)?, gl2_kernel(Gl2Kernel::BLdag, params)?);
    let factor = (-PI * t - 2.0 * lg(i() * (g[1] - t) + 0.5)).exp();
    let echo = format!("lambda={:?} eps={} tau={tau}", params.lambda, eps_of(params));
    let mut out = vec![IdentityReport::new("gl2_bldag_vs_br", dense(&bld, s), dense(&br, t) * factor, None, echo.clone())];
    let u = SpectralParams::from_lambda(&params.lambda, 0.0, params.kappa)?;
    let (nk, br, bl) = (gl2_kernel(Gl2Kernel::N, &u)?, gl2_kernel(Gl2Kernel::BR, &u)?, gl2_kernel(Gl2Kernel::BL, &u)?);
    let l2 = u.lambda[1];
    let n = dense(&nk, t);
    let sig = gl2_sigma(l2, tau);
    out.push(IdentityReport::new("gl2_n_modulus", c(n.norm(), 0.0), c(1.0, 0.0), None, echo.clone()));
    out.push(IdentityReport::new("gl2_n_sigma_br", n, dense(&br, t) * sig, None, echo.clone()));
    out.push(IdentityReport::new("gl2_n_bl_over_sigma", n, dense(&bl, t) / sig, None, echo.clone()));
    out.push(IdentityReport::new("gl2_sigma_closed", gl2_sigma_closed(l2, t), c(sig, 0.0), None, echo.clone()));
    out.push(IdentityReport::new("gl2_sigma_period", gl2_sigma_closed(l2, t + i()), gl2_sigma_closed(l2, t), None, echo));
    Ok(out)
}

/// Parameters of the tau_- integral in the fixed-point computation.
pub fn fixedpoint_inner_params(params: &SpectralParams, s: [f64; 3]) -> [C; 3] {
    let g = &params.gamma;
    let tp = (g[0] + g[1] + s[0] + s[2]) / 2.0;
    [i() * (g[0] - tp) + 0.5, i() * (g[1] - tp) + 0.5, i() * (tp - g[0] - s[0])]
}

/// (B_L^dag B_R phi_R)(s) against phi_R(s), with B_R phi_R = psi_tilde_R.
pub fn gl3_bldag_br_fixedpoint(params: &SpectralParams, s: [f64; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    let k = gl3_bldag_kernel(params)?;
    let sv = real3(s);
    let q = k.apply(&gl3_psi_tilde_r(params), &sv, spec)?;
    let rhs = gg3_phi_r(&sv);
    let echo = format!("gamma={:?} kappa={} s={:?}", params.gamma, params.kappa, s);
    Ok(IdentityReport::new("bldag_br_fixedpoint", q.value, rhs, Some(q), echo))
}

/// The bare tau_- integral of the fixed-point computation against the three-gamma closed form.
pub fn fixedpoint_inner_integral(params: &SpectralParams, s: [f64; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    let a = fixedpoint_inner_params(params, s);
    let q = line(&|g| sym_measure(g) * pm_gamma(&a, g), 0.0, spec)?;
    let lhs = q.value / (4.0 * PI);
    Ok(IdentityReport::new("fixedpoint_inner_integral", lhs, three_gamma_closed(a)?, Some(q), format!("a={a:?}")))
}

/// Matrix element built from the intertwiner images (t11 on R - i kappa) against the
/// modified Gauss-Givental matrix element at the same torus point.
pub fn intertwiner_chain(params: &SpectralParams, x: [f64; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    require_gl(params, 2)?;
    let table = Mb3Table::shifted(params, params.kappa, spec)?;
    let rho = RootData::new(2).rho_of(&x);
    let pre = (i() * params.gamma_sum() * x[2] - rho).exp();
    let q = table.phi([x[0] - x[1], x[1] - x[2]]);
    let lhs = q.value * pre;
    let rhs = psi_modified(params, &TorusPoint::new(&x), spec)?;
    let quad = QuadResult { value: lhs, err_estimate: q.err_estimate * pre.norm(), ..q };
    let echo = format!("gamma={:?} kappa={} x={:?}", params.gamma, params.kappa, x);
    Ok(IdentityReport::new("intertwiner_chain", lhs, rhs.value, Some(quad), echo))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ScalarIdentity {
    Quadratic,
    DividedDifference,
}

/// Quadratic: sample = (g1, g2, s11, s21, s22, t21, t22), t11 solved from the shifted delta.
/// DividedDifference: sample = (s, t, a1, a2, g1, g2) in the reduced variables.
pub fn check_kernel_scalar_identity(which: ScalarIdentity, sample: &[C]) -> Result<IdentityReport> {
    let echo = format!("{which:?} sample={sample:?}");
    match which {
        ScalarIdentity::Quadratic => {
            if sample.len() != 7 {
                return Err(Error::ArityMismatch(7, sample.len()));
            }
            let (g1, g2, s11, s21, s22, t21, t22) = (sample[0], sample[1], sample[2], sample[3], sample[4], sample[5], sample[6]);
            let t11 = g1 + s11 + s21 - i();
            let q = i() * s21 + 0.5;
            let lhs = -(i() * (g2 - g1 - s11 - s21 + s22) - 0.5) * q + (i() * (t11 - t21 - s21) - 1.0) * (i() * (t11 - t22 - s21) - 1.0);
            let rhs = (i() * (t11 - t21) - 0.5) * (i() * (t11 - t22) - 0.5) - i() * (g1 + g2 + s11 + s22 - t21 - t22) * q;
            Ok(scaled("kernel_quadratic", lhs, rhs, echo))
        }
        ScalarIdentity::DividedDifference => {
            if sample.len() != 6 {
                return Err(Error::ArityMismatch(6, sample.len()));
            }
            let (s, t, a1, a2, g1, g2) = (sample[0], sample[1], sample[2], sample[3], sample[4], sample[5]);
            if (a1 - a2).norm() < 1e-8 {
                return Err(Error::DegenerateSample("a1 = a2".into()));
            }
            if (t - s - a1).norm() < 1e-8 || (t - s - a2).norm() < 1e-8 {
                return Err(Error::DegenerateSample("t - s - a_j = 0".into()));
            }
            let side = |a: C| (a - t) / (t - s - a) * (a - i() * g1) * (a - i() * g2);
            let lhs = -(side(a1) - side(a2)) / (a1 - a2);
            let rhs = a1 + a2 - i() * (g1 + g2) - s + s * (i() * g1 - t + s) * (i() * g2 - t + s) / ((t - s - a1) * (t - s - a2));
            Ok(scaled("kernel_divided_difference", lhs, rhs, echo))
        }
    }
}

fn scaled(name: &str, lhs: C, rhs: C, echo: String) -> IdentityReport {
    IdentityReport::worst(name, &[(lhs, rhs, lhs.norm().max(rhs.norm()).max(1.0))], echo)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KernelSide {
    RGl3,
    LdagGl3,
    RGl2,
    LGl2,
}

/// Smooth factor of a kernel on the joint variables (tau, s), deltas dropped.
fn kernel_factor(side: KernelSide, params: &SpectralParams) -> Arc<dyn Fn(&[C]) -> C + Send + Sync> {
    let g = params.gamma.clone();
    match side {
        KernelSide::RGl3 => Arc::new(move |v: &[C]| {
            let (t, s) = (&v[..3], &v[3..]);
            let mut l = PI * (t[0] - t[1] - t[2]) / 2.0 + lg(i() * (g[1] - g[0] - s[0]) + 0.5) - lg(0.5 - i() * s[1]);
            for j in 1..3 {
                l += lg(i() * (t[0] - t[j] - s[1])) + lg(i() * (t[j] - t[0]) + 0.5) + lg(i() * (g[2] - t[j]) + 0.5);
            }
            l.exp()
        }),
        KernelSide::LdagGl3 => Arc::new(move |v: &[C]| {
            let (t, s) = (&v[..3], &v[3..]);
            let mut l = PI * (t[1] + t[2] - t[0]) / 2.0 - lg(i() * (t[1] - t[2])) - lg(-i() * (t[1] - t[2]))
                + lg(0.5 - i() * s[1])
                - lg(-i() * (g[0] - g[1] + s[0]) + 0.5);
            for j in 1..3 {
                l += lg(-i() * (t[0] - t[j] - s[1])) - lg(i() * (t[j] - t[0]) + 0.5) - lg(i() * (g[2] - t[j]) + 0.5);
            }
            l.exp()
        }),
        KernelSide::RGl2 => Arc::new(move |v: &[C]| (PI * v[0] / 2.0 + lg(i() * (g[1] - g[0] - v[1]) + 0.5)).exp()),
        KernelSide::LGl2 => Arc::new(move |v: &[C]| {
            (-PI * v[0] / 2.0 - lg(i() * (g[0].conj() - g[1].conj() + v[1]) + 0.5)).exp()
        }),
    }
}

/// Gradients of the delta arguments on (tau, s).
fn delta_gradients(side: KernelSide) -> Vec<Vec<i32>> {
    match side {
        KernelSide::RGl3 | KernelSide::LdagGl3 => vec![vec![-1, 0, 0, 1, 1, 0], vec![0, -1, -1, 1, 0, 1]],
        KernelSide::RGl2 | KernelSide::LGl2 => vec![vec![-1, 1]],
    }
}

/// (operator on tau, operator on s) whose actions on the kernel must agree.
fn kernel_operators(side: KernelSide, params: &SpectralParams, ij: (usize, usize)) -> Result<(ShiftOp, ShiftOp)> {
    let missing = || Error::PreconditionViolated(format!("no generator {ij:?}"));
    let get = |r: &Realization| r.shift(ij.0, ij.1).cloned().ok_or_else(missing);
    Ok(match side {
        KernelSide::RGl3 => (get(&gt_realization(params)?)?.embed(6, 0), get(&gg_modified_primed(params)?)?.embed(6, 3)),
        KernelSide::LdagGl3 => (get(&gt_primed(params)?)?.embed(6, 0), get(&gg_modified(params, false)?)?.embed(6, 3)),
        KernelSide::RGl2 => (get(&gt_realization(params)?)?.embed(2, 0), get(&gg_modified(params, false)?)?.transpose().embed(2, 1)),
        KernelSide::LGl2 => (get(&gt_dual(params)?)?.embed(2, 0), get(&gg_modified(params, true)?)?.transpose().embed(2, 1)),
    })
}

/// Checks op_tau K = op_s K at one point of the (shifted) delta support.
/// `free` holds (t11, t21, t22, s21) for gl3 and (tau) for gl2; the remaining s-variables are solved.
pub fn check_kernel_intertwining(side: KernelSide, ij: (usize, usize), params: &SpectralParams, free: &[C]) -> Result<IdentityReport> {
    let gl3 = matches!(side, KernelSide::RGl3 | KernelSide::LdagGl3);
    require_gl(params, if gl3 { 2 } else { 1 })?;
    let (op_t, op_s) = kernel_operators(side, params, ij)?;
    let grads = delta_gradients(side);
    let mut support: Option<Vec<i32>> = None;
    for t in op_t.terms.iter().chain(&op_s.terms) {
        let k: Vec<i32> = grads.iter().map(|gr| gr.iter().zip(&t.shift).map(|(a, b)| a * b).sum()).collect();
        match &support {
            None => support = Some(k),
            Some(prev) if *prev != k => {
                return Err(Error::PreconditionViolated(format!("generator {ij:?} mixes delta supports")));
            }
            _ => {}
        }
    }
    let k = support.unwrap_or_else(|| vec![0; grads.len()]);
    let g = &params.gamma;
    let v: Vec<C> = if gl3 {
        if free.len() != 4 {
            return Err(Error::ArityMismatch(4, free.len()));
        }
        if (free[1] - free[2]).norm() < 0.1 {
            return Err(Error::DegenerateSample("|t21 - t22| < 0.1".into()));
        }
        let s11 = free[0] - g[0] - free[3] + i() * k[0] as f64;
        let s22 = free[1] + free[2] - g[0] - g[1] - s11 + i() * k[1] as f64;
        vec![free[0], free[1], free[2], s11, free[3], s22]
    } else {
        if free.len() != 1 {
            return Err(Error::ArityMismatch(1, free.len()));
        }
        let g1 = if side == KernelSide::LGl2 { g[0].conj() } else { g[0] };
        vec![free[0], free[0] - g1 + i() * k[0] as f64]
    };
    let f = kernel_factor(side, params);
    let lhs = op_t.apply_at(&*f, &v);
    let rhs = op_s.apply_at(&*f, &v);
    let echo = format!("{side:?} E{}{} at {v:?}", ij.0, ij.1);
    let scale = lhs.norm().max(rhs.norm());
    Ok(IdentityReport::worst("kernel_intertwining", &[(lhs, rhs, scale)], echo))
}
