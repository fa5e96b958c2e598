//! Adaptive Gauss-Legendre quadrature over shifted lines R - i*kappa and
//! tensor products of such lines.

use crate::cgamma::C;
use crate::error::{Error, Result};
use crate::funcspace::AnalyticFn;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::OnceLock;

const ORDER: usize = 16;
const MAX_PROBES: usize = 60;
const INITIAL_WIDTH: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadSpec {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
    pub initial_radius: f64,
    pub decay_rate_hint: f64,
}

impl Default for QuadSpec {
    fn default() -> Self {
        QuadSpec {
            rel_tol: 1e-12,
            abs_tol: 1e-16,
            max_panels: 20_000,
            initial_radius: 4.0,
            decay_rate_hint: 1.0,
        }
    }
}

impl QuadSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_panels >= 4 && self.initial_radius > 0.0) {
            return Err(Error::PreconditionViolated(format!("invalid QuadSpec {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    pub shifts: Vec<f64>,
}

impl Contour {
    pub fn real(dim: usize) -> Self {
        Contour { shifts: vec![0.0; dim] }
    }
    pub fn shifted(shifts: &[f64]) -> Self {
        Contour { shifts: shifts.to_vec() }
    }
    pub fn dim(&self) -> usize {
        self.shifts.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: C,
    pub err_estimate: f64,
    pub n_evals: usize,
    pub truncation_radius: f64,
}

/// Nodes and weights of a composite rule on a finite interval of the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LineRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Composite 16-point rule on [lo, hi] with panels no wider than `width`.
    pub fn composite(lo: f64, hi: f64, width: f64) -> LineRule {
        let n = ((hi - lo) / width).ceil().max(1.0) as usize;
        let h = (hi - lo) / n as f64;
        let mut rule = LineRule { nodes: Vec::with_capacity(n * ORDER), weights: Vec::with_capacity(n * ORDER) };
        for k in 0..n {
            let a = lo + h * k as f64;
            rule.push_panel(a, a + h);
        }
        rule
    }

    fn push_panel(&mut self, a: f64, b: f64) {
        let (x, w) = gl16();
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for k in 0..ORDER {
            self.nodes.push(mid + half * x[k]);
            self.weights.push(half * w[k]);
        }
    }

    pub fn sum(&self, f: impl Fn(f64) -> C) -> C {
        let mut s = C::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            s += f(*x) * *w;
        }
        s
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, z);
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn legendre(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static CELL: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    CELL.get_or_init(|| gauss_legendre(ORDER))
}

fn panel(f: &dyn Fn(f64) -> C, a: f64, b: f64) -> (C, f64) {
    let (x, w) = gl16();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = C::new(0.0, 0.0);
    let mut m = 0.0;
    for k in 0..ORDER {
        let v = f(mid + half * x[k]);
        s += v * w[k];
        m += v.norm() * w[k];
    }
    (s * half, m * half)
}

fn tail_threshold(spec: &QuadSpec, peak: f64) -> f64 {
    0.1 * spec.abs_tol.max(1e-2 * spec.rel_tol * peak)
}

/// Probes |f| outward on both sides until it stays below the tail threshold.
/// Returns (left extent, right extent, evaluations used).
pub fn probe_extent(mag: &dyn Fn(f64) -> f64, spec: &QuadSpec) -> Result<(f64, f64, usize)> {
    let r0 = spec.initial_radius;
    let mut evals = 0;
    let mut peak: f64 = 0.0;
    for k in 0..=32 {
        let v = mag(-r0 + r0 * k as f64 / 16.0);
        evals += 1;
        if !v.is_finite() {
            return Err(Error::DecayProbeFailed(format!("non-finite value near the origin ({v})")));
        }
        peak = peak.max(v);
    }
    let thresh = tail_threshold(spec, peak);
    let mut extent = [r0, r0];
    for (side, sign) in [(0, -1.0), (1, 1.0)] {
        let mut r = r0;
        let mut below = 0;
        let mut found = false;
        for _ in 0..MAX_PROBES {
            let v = mag(sign * r);
            evals += 1;
            if !v.is_finite() {
                return Err(Error::DecayProbeFailed(format!("non-finite value at t={}", sign * r)));
            }
            if v < thresh {
                below += 1;
                if below == 2 {
                    found = true;
                    break;
                }
            } else {
                below = 0;
            }
            r *= 1.5;
        }
        if !found {
            return Err(Error::DecayProbeFailed(format!("no decay up to |t|={r:.3e}")));
        }
        extent[side] = r;
    }
    Ok((extent[0], extent[1], evals))
}

struct Panel {
    a: f64,
    b: f64,
    coarse: C,
    left: (C, f64),
    right: (C, f64),
}

impl Panel {
    fn fine(&self) -> C {
        self.left.0 + self.right.0
    }
    fn mass(&self) -> f64 {
        self.left.1 + self.right.1
    }
    fn err(&self) -> f64 {
        (self.coarse - self.fine()).norm()
    }
}

/// Global adaptive integration of a real-variable integrand over [lo, hi].
fn adaptive(f: &dyn Fn(f64) -> C, lo: f64, hi: f64, spec: &QuadSpec) -> Result<(QuadResult, Vec<(f64, f64)>)> {
    let n0 = ((hi - lo) / INITIAL_WIDTH).ceil().max(1.0) as usize;
    let h = (hi - lo) / n0 as f64;
    let mut evals = 0;
    let make = |a: f64, b: f64, coarse: C, evals: &mut usize| {
        let m = 0.5 * (a + b);
        *evals += 2 * ORDER;
        Panel { a, b, coarse, left: panel(f, a, m), right: panel(f, m, b) }
    };
    if n0 > spec.max_panels {
        return Err(Error::NonConvergence(format!("{n0} initial panels exceed budget {}", spec.max_panels)));
    }
    let mut panels: Vec<Panel> = Vec::with_capacity(4 * n0);
    for k in 0..n0 {
        let a = lo + h * k as f64;
        let b = if k + 1 == n0 { hi } else { a + h };
        evals += ORDER;
        let coarse = panel(f, a, b).0;
        panels.push(make(a, b, coarse, &mut evals));
    }
    loop {
        let total: C = panels.iter().map(Panel::fine).sum();
        let err: f64 = panels.iter().map(Panel::err).sum();
        if !total.re.is_finite() || !total.im.is_finite() {
            return Err(Error::NonConvergence("non-finite integrand on contour".into()));
        }
        // roundoff floor relative to the integral of |f|
        let mass: f64 = panels.iter().map(Panel::mass).sum();
        let target = spec.abs_tol.max(spec.rel_tol * total.norm()).max(64.0 * f64::EPSILON * mass);
        if err <= target {
            let radius = (-lo).max(hi);
            let bounds = panels.iter().map(|p| (p.a, p.b)).collect();
            return Ok((QuadResult { value: total, err_estimate: err, n_evals: evals, truncation_radius: radius }, bounds));
        }
        let share = target / panels.len() as f64;
        let max_err = panels.iter().map(Panel::err).fold(0.0, f64::max);
        let cut = share.max(0.5 * max_err).min(max_err);
        let mut next = Vec::with_capacity(panels.len() + 16);
        for p in panels {
            if p.err() >= cut {
                let m = 0.5 * (p.a + p.b);
                next.push(make(p.a, m, p.left.0, &mut evals));
                next.push(make(m, p.b, p.right.0, &mut evals));
            } else {
                next.push(p);
            }
        }
        panels = next;
        if panels.len() > spec.max_panels {
            return Err(Error::NonConvergence(format!("panel budget {} exhausted, err {err:.3e}", spec.max_panels)));
        }
    }
}

fn line_panels(f: &dyn Fn(C) -> C, kappa: f64, spec: &QuadSpec) -> Result<(QuadResult, Vec<(f64, f64)>)> {
    spec.validate()?;
    let g = |t: f64| f(C::new(t, -kappa));
    let (l, r, probes) = probe_extent(&|t| g(t).norm(), spec)?;
    let (mut q, panels) = adaptive(&g, -l, r, spec)?;
    q.n_evals += probes;
    Ok((q, panels))
}

/// Refined (each panel halved) and unrefined rules over the given panels.
fn panel_rules(panels: &[(f64, f64)]) -> (LineRule, LineRule) {
    let mut fine = LineRule { nodes: Vec::new(), weights: Vec::new() };
    let mut coarse = LineRule { nodes: Vec::new(), weights: Vec::new() };
    for &(a, b) in panels {
        let m = 0.5 * (a + b);
        fine.push_panel(a, m);
        fine.push_panel(m, b);
        coarse.push_panel(a, b);
    }
    (fine, coarse)
}

/// Integral of t -> f(t - i*kappa) over the real line, with the refined rule
/// it was computed on (nodes are real parts).
pub fn line_with_rule(f: &dyn Fn(C) -> C, kappa: f64, spec: &QuadSpec) -> Result<(QuadResult, LineRule)> {
    let (q, panels) = line_panels(f, kappa, spec)?;
    Ok((q, panel_rules(&panels).0))
}

pub fn line(f: &dyn Fn(C) -> C, kappa: f64, spec: &QuadSpec) -> Result<QuadResult> {
    line_with_rule(f, kappa, spec).map(|p| p.0)
}

pub fn integrate_line(f: &AnalyticFn, contour: &Contour, spec: &QuadSpec) -> Result<QuadResult> {
    if f.arity != 1 || contour.dim() != 1 {
        return Err(Error::ArityMismatch(f.arity, contour.dim()));
    }
    line(&|z| f.eval(&[z]), contour.shifts[0], spec)
}

/// Tensor-product integration over shifted lines, dimension at most 3.
///
/// Each axis gets an adaptive rule built from the slice through the origin of
/// the other axes. The error estimate combines the per-axis relative estimates.
pub fn integrate_tensor(f: &AnalyticFn, contour: &Contour, spec: &QuadSpec) -> Result<QuadResult> {
    let d = contour.dim();
    if d == 0 || d > 3 {
        return Err(Error::DimensionUnsupported(d));
    }
    if f.arity != d {
        return Err(Error::ArityMismatch(f.arity, d));
    }
    let mut rules = Vec::with_capacity(d);
    let mut evals = 0;
    let mut radius: f64 = 0.0;
    let mut rel_err = 0.0;
    for k in 0..d {
        let slice = |z: C| {
            let mut v: Vec<C> = contour.shifts.iter().map(|s| C::new(0.0, -s)).collect();
            v[k] = z;
            f.eval(&v)
        };
        let (q, panels) = line_panels(&slice, contour.shifts[k], spec)?;
        evals += q.n_evals;
        radius = radius.max(q.truncation_radius);
        rel_err += q.err_estimate / q.value.norm().max(1e-300);
        rules.push(panel_rules(&panels).0);
    }
    let g = |t: &[f64]| {
        let v: Vec<C> = t.iter().zip(&contour.shifts).map(|(x, s)| C::new(*x, -s)).collect();
        f.eval(&v)
    };
    let (value, n) = tensor_sum(&g, &rules);
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(Error::NonConvergence("non-finite tensor sum".into()));
    }
    Ok(QuadResult { value, err_estimate: rel_err * value.norm() + spec.abs_tol, n_evals: evals + n, truncation_radius: radius })
}

fn tensor_sum(g: &dyn Fn(&[f64]) -> C, rules: &[LineRule]) -> (C, usize) {
    let mut t = vec![0.0; rules.len()];
    let mut n = 0;
    let v = tensor_rec(g, rules, 0, &mut t, &mut n);
    (v, n)
}

fn tensor_rec(g: &dyn Fn(&[f64]) -> C, rules: &[LineRule], axis: usize, t: &mut Vec<f64>, n: &mut usize) -> C {
    let mut s = C::new(0.0, 0.0);
    for (x, w) in rules[axis].nodes.iter().zip(&rules[axis].weights) {
        t[axis] = *x;
        if axis + 1 == rules.len() {
            *n += 1;
            s += g(t) * *w;
        } else {
            s += tensor_rec(g, rules, axis + 1, t, n) * *w;
        }
    }
    s
}

/// (2 pi)^{-d/2} times the integral of exp(-i p.xi) f(xi) over R^d.
pub fn fourier_transform(f: &AnalyticFn, p: &[f64], spec: &QuadSpec) -> Result<C> {
    let d = p.len();
    let p = p.to_vec();
    let g = f.clone();
    let h = AnalyticFn::new(d, move |xi: &[C]| {
        let mut ph = C::new(0.0, 0.0);
        for k in 0..xi.len() {
            ph += xi[k] * p[k];
        }
        (-ph * C::i()).exp() * g.eval(xi)
    });
    let q = integrate_tensor(&h, &Contour::real(d), spec)?;
    Ok(q.value * (2.0 * PI).powf(-(d as f64) / 2.0))
}
