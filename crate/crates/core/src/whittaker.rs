//! Whittaker functions of gl2 and gl3 through three integral representations,
//! their normalized and Fourier-side forms, and a Bessel-K oracle.

use crate::cgamma::{c, log_gamma, rgamma, C};
use crate::error::{Error, Result};
use crate::funcspace::AnalyticFn;
use crate::identities::{pm_gamma, sym_measure};
use crate::quadrature::{line, LineRule, QuadResult, QuadSpec};
use crate::realizations::{RootData, SpectralParams};
use serde::Serialize;
use std::cell::{Cell, RefCell};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Rep {
    MB,
    Givental,
    Modified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorusPoint {
    pub x: Vec<f64>,
}

impl TorusPoint {
    pub fn new(x: &[f64]) -> Self {
        TorusPoint { x: x.to_vec() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WhittakerValue {
    pub value: C,
    pub rep: Rep,
    pub quad: QuadResult,
}

fn i() -> C {
    C::i()
}

fn check(params: &SpectralParams, x: &TorusPoint) -> Result<()> {
    match params.ell {
        1 | 2 => {}
        3 => return Err(Error::DimensionUnsupported(6)),
        l => return Err(Error::RankUnsupported(l)),
    }
    if x.x.len() != params.ell + 1 || params.gamma.len() != params.ell + 1 {
        return Err(Error::ArityMismatch(params.ell + 1, x.x.len()));
    }
    if x.x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite torus point".into()));
    }
    Ok(())
}

fn lg(z: C) -> Result<C> {
    log_gamma(z)
}

/// Real parts of the Gamma arguments in the MB integrand are 1/2 - Im gamma_i.
fn mb_gamma_margin(params: &SpectralParams) -> Result<f64> {
    let d = params.gamma.iter().map(|g| 0.5 - g.im).fold(f64::INFINITY, f64::min);
    if d <= 0.0 {
        return Err(Error::GammaArgumentViolation(format!("MB: 1/2 - Im gamma = {d}")));
    }
    Ok(d.min(0.5))
}

fn modified_gamma_margin(params: &SpectralParams) -> Result<f64> {
    let g = &params.gamma;
    let mut d: f64 = 0.5;
    for j in 0..params.ell {
        for k in j + 1..=params.ell {
            let re = (k - j) as f64 / 2.0 + (g[j] - g[k]).im;
            if re <= 0.0 {
                return Err(Error::GammaArgumentViolation(format!("Gamma(-i(g{}-g{}+s)+{}) has Re = {re}", j + 1, k + 1, (k - j) as f64 / 2.0)));
            }
            d = d.min(re);
        }
    }
    Ok(d)
}

/// Fixed composite rules for the multidimensional Gamma-product integrands.
#[derive(Debug, Clone)]
struct GridRules {
    fine: LineRule,
    alt: LineRule,
}

fn grid_rules(params: &SpectralParams, margin: f64, spec: &QuadSpec) -> GridRules {
    let center = params.gamma.iter().map(|g| g.re.abs()).fold(0.0, f64::max);
    let tol = spec.rel_tol.max(1e-15);
    let r = -tol.ln() / PI + 4.0 + center;
    let w = (1.8 * margin).min(1.0);
    GridRules { fine: LineRule::composite(-r, r, w), alt: LineRule::composite(-r - 2.0, r + 2.0, 0.8 * w) }
}

fn quad(value: C, alt: C, n_evals: usize, radius: f64) -> QuadResult {
    QuadResult { value, err_estimate: (value - alt).norm(), n_evals, truncation_radius: radius }
}

pub fn psi_mb(params: &SpectralParams, x: &TorusPoint, spec: &QuadSpec) -> Result<WhittakerValue> {
    check(params, x)?;
    spec.validate()?;
    mb_gamma_margin(params)?;
    let g = params.gamma.clone();
    let rho = RootData::new(params.ell).rho_of(&x.x);
    let quad = if params.ell == 1 {
        let (x1, x2) = (x.x[0], x.x[1]);
        let pre = (i() * (g[0] + g[1]) * x2 - rho).exp() / (2.0 * PI);
        let f = |t: C| {
            let l = lg(i() * (g[0] - t) + 0.5).and_then(|a| Ok(a + lg(i() * (g[1] - t) + 0.5)?));
            match l {
                Ok(l) => (l + i() * t * (x1 - x2)).exp(),
                Err(_) => c(f64::NAN, f64::NAN),
            }
        };
        let q = line(&f, 0.0, spec)?;
        QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q }
    } else {
        let t = Mb3Table::new(params, spec)?;
        let u = [x.x[0] - x.x[1], x.x[1] - x.x[2]];
        let pre = (i() * params.gamma_sum() * x.x[2] - rho).exp();
        let q = t.phi(u);
        QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q }
    };
    Ok(WhittakerValue { value: quad.value, rep: Rep::MB, quad })
}

/// Precomputed gl3 MB sums: Phi(u) for any u costs O(N^3) with no Gamma evaluations.
#[derive(Debug, Clone)]
pub struct Mb3Table {
    fine: Mb3Grid,
    alt: Mb3Grid,
}

#[derive(Debug, Clone)]
struct Mb3Grid {
    kappa: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Gamma(i(t2a - t11k) - kappa + 1/2)
    g: Vec<Vec<C>>,
    /// weights * measure * prod_i Gamma(i(g_i - t2a) + 1/2) Gamma(i(g_i - t2b) + 1/2), a < b
    w: Vec<Vec<C>>,
}

impl Mb3Grid {
    fn new(params: &SpectralParams, rule: &LineRule, kappa: f64) -> Result<Self> {
        let n = rule.len();
        let t = &rule.nodes;
        let half = c(0.5 - kappa, 0.0);
        let mut g = vec![vec![c(0.0, 0.0); n]; n];
        for a in 0..n {
            for k in 0..n {
                g[a][k] = lg(i() * (t[a] - t[k]) + half)?.exp();
            }
        }
        let lg3: Vec<C> = t
            .iter()
            .map(|&ta| params.gamma.iter().map(|gi| lg(i() * (gi - ta) + 0.5)).sum::<Result<C>>())
            .collect::<Result<_>>()?;
        let mut w = vec![vec![c(0.0, 0.0); n]; n];
        for a in 0..n {
            for b in a + 1..n {
                let m = rgamma(i() * (t[a] - t[b])) * rgamma(i() * (t[b] - t[a]));
                w[a][b] = m * (lg3[a] + lg3[b]).exp() * rule.weights[a] * rule.weights[b];
            }
        }
        Ok(Mb3Grid { kappa, nodes: t.clone(), weights: rule.weights.clone(), g, w })
    }

    fn phi(&self, u: [f64; 2]) -> C {
        let n = self.nodes.len();
        let e1: Vec<C> =
            self.nodes.iter().zip(&self.weights).map(|(t, w)| (i() * c(*t, -self.kappa) * u[0]).exp() * *w).collect();
        let e2: Vec<C> = self.nodes.iter().map(|t| (i() * t * u[1]).exp()).collect();
        let h: Vec<Vec<C>> = self.g.iter().map(|row| row.iter().zip(&e1).map(|(g, e)| g * e).collect()).collect();
        let mut s = c(0.0, 0.0);
        for a in 0..n {
            for b in a + 1..n {
                let inner: C = h[a].iter().zip(&self.g[b]).map(|(x, y)| x * y).sum();
                s += self.w[a][b] * e2[a] * e2[b] * inner;
            }
        }
        s / (2.0 * PI).powi(3)
    }
}

impl Mb3Table {
    pub fn new(params: &SpectralParams, spec: &QuadSpec) -> Result<Self> {
        if params.ell != 2 {
            return Err(Error::RankUnsupported(params.ell));
        }
        Mb3Table::shifted(params, 0.0, spec)
    }

    /// Same sums with t11 running over R - i kappa.
    pub fn shifted(params: &SpectralParams, kappa: f64, spec: &QuadSpec) -> Result<Self> {
        if params.ell != 2 {
            return Err(Error::RankUnsupported(params.ell));
        }
        if !(0.0..0.5).contains(&kappa) {
            return Err(Error::KappaOutOfRange { kappa, bound: 0.5 });
        }
        let margin = mb_gamma_margin(params)?.min(0.5 - kappa);
        let rules = grid_rules(params, margin, spec);
        Ok(Mb3Table { fine: Mb3Grid::new(params, &rules.fine, kappa)?, alt: Mb3Grid::new(params, &rules.alt, kappa)? })
    }

    /// Normalized function Phi(e^{u1}, e^{u2}) = e^{-i sum(gamma) x3 + x1 - x3} Psi.
    /// The sum over unordered pairs (t21, t22) carries the symmetry factor 1/2!.
    pub fn phi(&self, u: [f64; 2]) -> QuadResult {
        let n = self.fine.nodes.len();
        let m = self.alt.nodes.len();
        let radius = self.fine.nodes[n - 1];
        quad(self.fine.phi(u), self.alt.phi(u), n * n * n + m * m * m, radius)
    }
}

/// Nested line integrals. Inner errors are weighted by the size of the
/// integrand they feed into.
struct Nested {
    err: Cell<f64>,
    mass: Cell<f64>,
    evals: Cell<usize>,
    fail: RefCell<Option<Error>>,
}

impl Nested {
    fn new() -> Self {
        Nested { err: Cell::new(0.0), mass: Cell::new(0.0), evals: Cell::new(0), fail: RefCell::new(None) }
    }

    fn inner(&self, f: &dyn Fn(C) -> C, spec: &QuadSpec) -> (C, f64) {
        match line(f, 0.0, spec) {
            Ok(q) => {
                self.evals.set(self.evals.get() + q.n_evals);
                (q.value, q.err_estimate)
            }
            Err(e) => {
                self.fail.borrow_mut().get_or_insert(e);
                (c(f64::NAN, f64::NAN), 0.0)
            }
        }
    }

    fn record(&self, value: C, err: f64) {
        if value.is_finite() && err.is_finite() {
            self.mass.set(self.mass.get() + value.norm());
            self.err.set(self.err.get() + err);
        }
    }

    fn finish(self, outer: Result<QuadResult>) -> Result<QuadResult> {
        if let Some(e) = self.fail.into_inner() {
            return Err(e);
        }
        let q = outer?;
        let rel = if self.mass.get() > 0.0 { self.err.get() / self.mass.get() } else { 0.0 };
        Ok(QuadResult { err_estimate: q.err_estimate + rel * q.value.norm(), n_evals: q.n_evals + self.evals.get(), ..q })
    }
}

/// gl2 MB integrand in tau, prefactor included; its integral over R is Psi(x).
pub fn gl2_mb_integrand(params: &SpectralParams, x: [f64; 2]) -> AnalyticFn {
    let g = params.gamma.clone();
    let rho = (x[0] - x[1]) / 2.0;
    let pre = (i() * (g[0] + g[1]) * x[1] - rho).exp() / (2.0 * PI);
    AnalyticFn::univariate(move |t| {
        let l = lg(i() * (g[0] - t) + 0.5).and_then(|a| Ok(a + lg(i() * (g[1] - t) + 0.5)?));
        match l {
            Ok(l) => pre * (l + i() * t * (x[0] - x[1])).exp(),
            Err(_) => c(f64::NAN, f64::NAN),
        }
    })
}

/// Poles gamma_j - i(1/2 + n) of the gl2 MB integrand, n < count.
pub fn gl2_mb_poles(params: &SpectralParams, count: usize) -> Vec<C> {
    params.gamma.iter().flat_map(|g| (0..count).map(move |n| g - i() * (0.5 + n as f64))).collect()
}

pub fn psi_givental(params: &SpectralParams, x: &TorusPoint, spec: &QuadSpec) -> Result<WhittakerValue> {
    check(params, x)?;
    spec.validate()?;
    let g = params.gamma.clone();
    let quad = if params.ell == 1 {
        let (x1, x2) = (x.x[0], x.x[1]);
        let f = |t: C| (i() * g[1] * (x1 + x2 - t) + i() * g[0] * t - (x1 - t).exp() - (t - x2).exp()).exp();
        line(&f, 0.0, spec)?
    } else {
        let (x1, x2, x3) = (x.x[0], x.x[1], x.x[2]);
        let nest = Nested::new();
        let outer = {
            let f = |t11: C| {
                let (f21, e21) =
                    nest.inner(&|t: C| (i() * (g[1] - g[2]) * t - (x1 - t).exp() - (t - x2).exp() - (t - t11).exp()).exp(), spec);
                let (f22, e22) =
                    nest.inner(&|t: C| (i() * (g[1] - g[2]) * t - (x2 - t).exp() - (t - x3).exp() - (t11 - t).exp()).exp(), spec);
                let k = (i() * (g[0] - g[1]) * t11).exp();
                nest.record(k * f21 * f22, k.norm() * (e21 * f22.norm() + f21.norm() * e22));
                k * f21 * f22
            };
            line(&f, 0.0, spec)
        };
        let q = nest.finish(outer)?;
        let pre = (i() * g[2] * (x1 + x2 + x3)).exp();
        QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q }
    };
    Ok(WhittakerValue { value: quad.value, rep: Rep::Givental, quad })
}

pub fn psi_modified(params: &SpectralParams, x: &TorusPoint, spec: &QuadSpec) -> Result<WhittakerValue> {
    check(params, x)?;
    spec.validate()?;
    modified_gamma_margin(params)?;
    let g = params.gamma.clone();
    let rho = RootData::new(params.ell).rho_of(&x.x);
    let pre = (g.iter().zip(&x.x).map(|(g, x)| i() * g * x).sum::<C>() - rho).exp();
    let quad = if params.ell == 1 {
        let u = x.x[0] - x.x[1];
        let f = |s: C| match (lg(-i() * (g[0] - g[1] + s) + 0.5), lg(0.5 - i() * s)) {
            (Ok(a), Ok(b)) => (a + b + i() * s * u).exp(),
            _ => c(f64::NAN, f64::NAN),
        };
        let q = line(&f, 0.0, spec)?;
        QuadResult { value: q.value / (2.0 * PI), err_estimate: q.err_estimate / (2.0 * PI), ..q }
    } else {
        let t = Mod3Table::new(params, spec)?;
        t.integral([x.x[0] - x.x[1], x.x[1] - x.x[2]])
    };
    let quad = QuadResult { value: quad.value * pre, err_estimate: quad.err_estimate * pre.norm(), ..quad };
    Ok(WhittakerValue { value: quad.value, rep: Rep::Modified, quad })
}

/// Precomputed gl3 modified Gauss-Givental sums, O(N^2) per point.
#[derive(Debug, Clone)]
pub struct Mod3Table {
    fine: Mod3Grid,
    alt: Mod3Grid,
}

#[derive(Debug, Clone)]
struct Mod3Grid {
    nodes: Vec<f64>,
    /// w Gamma(1/2 - i s21)
    a: Vec<C>,
    /// w Gamma(1/2 - i s11) Gamma(-i(g1 - g2 + s11) + 1/2)
    b: Vec<C>,
    /// w Gamma(-i(g2 - g3 + s22) + 1/2)
    cc: Vec<C>,
    /// Gamma(-i(g1 - g3 + s11 + s21) + 1)
    g1: Vec<Vec<C>>,
    /// Gamma(1 - i s11 - i s22)
    g2: Vec<Vec<C>>,
}

impl Mod3Grid {
    fn new(params: &SpectralParams, rule: &LineRule) -> Result<Self> {
        let g = &params.gamma;
        let s = &rule.nodes;
        let w = &rule.weights;
        let n = s.len();
        let ex = |z: Result<C>| z.map(|z| z.exp());
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        let mut cc = Vec::with_capacity(n);
        for k in 0..n {
            a.push(ex(lg(0.5 - i() * s[k]))? * w[k]);
            b.push(ex(Ok(lg(0.5 - i() * s[k])? + lg(-i() * (g[0] - g[1] + s[k]) + 0.5)?))? * w[k]);
            cc.push(ex(lg(-i() * (g[1] - g[2] + s[k]) + 0.5))? * w[k]);
        }
        let mut g1 = vec![vec![c(0.0, 0.0); n]; n];
        let mut g2 = vec![vec![c(0.0, 0.0); n]; n];
        for p in 0..n {
            for q in 0..n {
                g1[p][q] = ex(lg(-i() * (g[0] - g[2] + s[p] + s[q]) + 1.0))?;
                g2[p][q] = ex(lg(1.0 - i() * (s[p] + s[q])))?;
            }
        }
        Ok(Mod3Grid { nodes: s.clone(), a, b, cc, g1, g2 })
    }

    fn integral(&self, u: [f64; 2]) -> C {
        let e = |v: f64| -> Vec<C> { self.nodes.iter().map(|s| (i() * s * v).exp()).collect() };
        let (e1, e12, e2) = (e(u[0]), e(u[0] + u[1]), e(u[1]));
        let a: Vec<C> = self.a.iter().zip(&e1).map(|(x, y)| x * y).collect();
        let cc: Vec<C> = self.cc.iter().zip(&e2).map(|(x, y)| x * y).collect();
        let mut s = c(0.0, 0.0);
        for p in 0..self.nodes.len() {
            let s21: C = self.g1[p].iter().zip(&a).map(|(x, y)| x * y).sum();
            let s22: C = self.g2[p].iter().zip(&cc).map(|(x, y)| x * y).sum();
            s += self.b[p] * e12[p] * s21 * s22;
        }
        s / (2.0 * PI).powi(3)
    }
}

impl Mod3Table {
    pub fn new(params: &SpectralParams, spec: &QuadSpec) -> Result<Self> {
        if params.ell != 2 {
            return Err(Error::RankUnsupported(params.ell));
        }
        let margin = modified_gamma_margin(params)?;
        let rules = grid_rules(params, margin, spec);
        Ok(Mod3Table { fine: Mod3Grid::new(params, &rules.fine)?, alt: Mod3Grid::new(params, &rules.alt)? })
    }

    /// The s-integral with its (2 pi)^{-3} factor, without the e^{i gamma x - rho(x)} prefactor.
    pub fn integral(&self, u: [f64; 2]) -> QuadResult {
        let n = self.fine.nodes.len();
        let m = self.alt.nodes.len();
        quad(self.fine.integral(u), self.alt.integral(u), 2 * (n * n + m * m), self.fine.nodes[n - 1])
    }
}

pub fn psi(params: &SpectralParams, x: &TorusPoint, rep: Rep, spec: &QuadSpec) -> Result<WhittakerValue> {
    match rep {
        Rep::MB => psi_mb(params, x, spec),
        Rep::Givental => psi_givental(params, x, spec),
        Rep::Modified => psi_modified(params, x, spec),
    }
}

/// Normalizing factor taking Psi(e^x) to Phi(e^u).
pub fn phi_factor(params: &SpectralParams, x: &[f64]) -> C {
    let last = x[params.ell];
    (-i() * params.gamma_sum() * last + RootData::new(params.ell).rho_of(x)).exp()
}

/// Phi evaluated from an explicit torus representative x.
pub fn phi_from_x(params: &SpectralParams, x: &[f64], rep: Rep, spec: &QuadSpec) -> Result<C> {
    let v = psi(params, &TorusPoint::new(x), rep, spec)?;
    Ok(v.value * phi_factor(params, x))
}

/// Phi(e^u) with u_i = x_i - x_{i+1}, using the representative x_{l+1} = 0.
pub fn phi_normalized(params: &SpectralParams, u: &[f64], rep: Rep, spec: &QuadSpec) -> Result<C> {
    if u.len() != params.ell {
        return Err(Error::ArityMismatch(params.ell, u.len()));
    }
    let mut x = vec![0.0; params.ell + 1];
    for k in (0..params.ell).rev() {
        x[k] = x[k + 1] + u[k];
    }
    phi_from_x(params, &x, rep, spec)
}

/// Phi from the reduced Givental integrals in u-variables.
pub fn phi_givental_reduced(params: &SpectralParams, u: &[f64], spec: &QuadSpec) -> Result<QuadResult> {
    let g = params.gamma.clone();
    if params.ell == 1 {
        let u = u[0];
        let q = line(&|t: C| (i() * (g[0] - g[1]) * t - (u - t).exp() - t.exp()).exp(), 0.0, spec)?;
        let pre = ((i() * g[1] + 0.5) * u).exp();
        return Ok(QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q });
    }
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let (u1, u2) = (u[0], u[1]);
    let nest = Nested::new();
    let outer = {
        let f = |t11: C| {
            let mid = |t21: C| {
                let (v, e) = nest.inner(
                    &|t22: C| (i() * (g[0] - g[2]) * t22 - (u2 - t22).exp() * (1.0 + (t21 - t11).exp()) - t22.exp()).exp(),
                    spec,
                );
                let k = (i() * (g[1] - g[2]) * t21 - (u1 - t21).exp() - t21.exp()).exp();
                nest.record(k * v, k.norm() * e);
                k * v
            };
            let (v, e) = nest.inner(&mid, spec);
            let k = (i() * (g[0] - g[1]) * t11 - t11.exp()).exp();
            nest.record(k * v, k.norm() * e);
            k * v
        };
        line(&f, 0.0, spec)
    };
    let q = nest.finish(outer)?;
    let pre = ((i() * g[2] + 1.0) * u1 + (i() * (g[1] + g[2]) + 1.0) * u2).exp();
    Ok(QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q })
}

/// Fourier transform of Phi in closed form.
pub fn phi_hat_closed_form(params: &SpectralParams, p: &[f64]) -> Result<C> {
    let g = &params.gamma;
    match params.ell {
        1 => Ok((lg(i() * (g[0] - p[0]) + 0.5)? + lg(i() * (g[1] - p[0]) + 0.5)?).exp() / (2.0 * PI).sqrt()),
        2 => {
            let mut l = -lg(i() * (params.gamma_sum() - p[0] - p[1]) + 2.0)?;
            for a in 0..3 {
                l += lg(i() * (g[a] - p[0]) + 1.0)?;
                for b in a + 1..3 {
                    l += lg(i() * (g[a] + g[b] - p[1]) + 1.0)?;
                }
            }
            Ok(l.exp() / (2.0 * PI))
        }
        l => Err(Error::RankUnsupported(l)),
    }
}

/// Fourier transform of the gl3 MB form reduced to one integral with the symmetric measure.
pub fn phi_hat_mb_integral(params: &SpectralParams, p: &[f64], spec: &QuadSpec) -> Result<QuadResult> {
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let a = phi_hat_gustafson_params(params, p);
    let q = line(&|t: C| pm_gamma(&a, t) * sym_measure(t), 0.0, spec)?;
    let k = 1.0 / (8.0 * PI * PI);
    Ok(QuadResult { value: q.value * k, err_estimate: q.err_estimate * k, ..q })
}

/// a_i = i(g_i - p2/2) + 1/2, a_4 = i(p2/2 - p1) + 1/2.
pub fn phi_hat_gustafson_params(params: &SpectralParams, p: &[f64]) -> [C; 4] {
    let g = &params.gamma;
    let h = p[1] / 2.0;
    [i() * (g[0] - h) + 0.5, i() * (g[1] - h) + 0.5, i() * (g[2] - h) + 0.5, i() * (h - p[0]) + 0.5]
}

/// Fourier transform of Phi (gl3, Givental) after the u-integrations, as a 2-d integral.
pub fn phi_hat_givental_reduced(params: &SpectralParams, p: &[f64], spec: &QuadSpec) -> Result<QuadResult> {
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let g = params.gamma.clone();
    let (p1, p2) = (p[0], p[1]);
    let pre = (lg(i() * (g[0] + g[1] - p2) + 1.0)? + lg(i() * (g[2] - p1) + 1.0)? + lg(i() * (g[1] + g[2] - p2) + 1.0)?).exp()
        / (2.0 * PI);
    let b = i() * (g[1] + g[2] - p2) + 1.0;
    let a = i() * (g[1] - p1) + 1.0;
    let nest = Nested::new();
    let outer = {
        let f = |t11: C| {
            let (inner, e) = nest.inner(
                &|t21: C| {
                    let d = t21 - t11;
                    let softplus = if d.re > 0.0 { d + (-d).exp().ln_1p() } else { d.exp().ln_1p() };
                    (a * t21 - t21.exp() - b * softplus).exp()
                },
                spec,
            );
            let k = (i() * (g[0] - g[1]) * t11 - t11.exp()).exp();
            nest.record(k * inner, k.norm() * e);
            k * inner
        };
        line(&f, 0.0, spec)
    };
    let q = nest.finish(outer)?;
    Ok(QuadResult { value: q.value * pre, err_estimate: q.err_estimate * pre.norm(), ..q })
}

trait Ln1p {
    fn ln_1p(self) -> Self;
}

impl Ln1p for C {
    fn ln_1p(self) -> C {
        if self.norm() < 1e-4 {
            self - self * self / 2.0 + self * self * self / 3.0
        } else {
            (1.0 + self).ln()
        }
    }
}

/// K_nu(z) = (1/2) int exp(-z cosh t + nu t) dt.
pub fn bessel_k_oracle(nu: C, z: f64, spec: &QuadSpec) -> Result<C> {
    if !(z > 0.0) {
        return Err(Error::Domain(format!("bessel_k_oracle needs z > 0, got {z}")));
    }
    Ok(line(&|t: C| (-z * t.cosh() + nu * t).exp(), 0.0, spec)?.value / 2.0)
}

/// 2 e^{i(g1 + g2)(x1 + x2)/2} K_{i(g1 - g2)}(2 e^{(x1 - x2)/2}).
pub fn psi_gl2_bessel(gamma: [C; 2], x: [f64; 2], spec: &QuadSpec) -> Result<C> {
    let k = bessel_k_oracle(i() * (gamma[0] - gamma[1]), 2.0 * ((x[0] - x[1]) / 2.0).exp(), spec)?;
    Ok(2.0 * (i() * (gamma[0] + gamma[1]) * (x[0] + x[1]) / 2.0).exp() * k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::fourier_transform;
    use crate::funcspace::AnalyticFn;

    fn spec() -> QuadSpec {
        QuadSpec::default()
    }

    fn gl2(g: [C; 2]) -> SpectralParams {
        SpectralParams::from_gamma(&g, 0.0).unwrap()
    }

    /// Power series K_nu for non-integer nu, an oracle independent of quadrature.
    fn bessel_k_series(nu: f64, z: f64) -> f64 {
        let ival = |nu: f64| {
            let mut term = (z / 2.0).powf(nu) / crate::cgamma::gamma(c(nu + 1.0, 0.0)).unwrap().re;
            let mut s = term;
            for k in 1..60 {
                term *= (z * z / 4.0) / (k as f64 * (k as f64 + nu));
                s += term;
            }
            s
        };
        PI / 2.0 * (ival(-nu) - ival(nu)) / (nu * PI).sin()
    }

    #[test]
    fn bessel_oracle() {
        let k0 = bessel_k_oracle(c(0.0, 0.0), 2.0, &spec()).unwrap();
        assert!((k0.re - 0.1138938727495334).abs() < 1e-12);
        let k = bessel_k_oracle(c(0.5, 0.0), 1.0, &spec()).unwrap();
        assert!((k.re - (PI / 2.0).sqrt() * (-1.0f64).exp()).abs() < 1e-12);
        let k = bessel_k_oracle(c(0.3, 0.0), 1.7, &spec()).unwrap();
        assert!((k.re - bessel_k_series(0.3, 1.7)).abs() < 1e-11);
        let nu = c(0.2, 0.7);
        let d = bessel_k_oracle(nu, 1.3, &spec()).unwrap() - bessel_k_oracle(-nu, 1.3, &spec()).unwrap();
        assert!(d.norm() < 1e-12);
        assert!(bessel_k_oracle(c(0.0, 0.0), 0.0, &spec()).is_err());
    }

    #[test]
    fn gl2_representations_agree() {
        let cases = [
            ([c(0.0, 0.0), c(0.0, 0.0)], [0.0, 0.0]),
            ([c(0.3, 0.0), c(-0.3, 0.0)], [0.0, 0.0]),
            ([c(0.5, 0.2), c(-0.1, -0.2)], [0.7, -0.4]),
        ];
        for (g, x) in cases {
            let p = gl2(g);
            let tp = TorusPoint::new(&x);
            let oracle = psi_gl2_bessel(g, x, &spec()).unwrap();
            for rep in [Rep::MB, Rep::Givental, Rep::Modified] {
                let v = psi(&p, &tp, rep, &spec()).unwrap().value;
                assert!((v - oracle).norm() / oracle.norm() < 1e-9, "{rep:?} {v} {oracle}");
            }
        }
        let v = psi_mb(&gl2([c(0.0, 0.0); 2]), &TorusPoint::new(&[0.0, 0.0]), &spec()).unwrap();
        assert!((v.value.re - 0.2277877454990668).abs() < 1e-10);
        let v = psi_givental(&gl2([c(0.3, 0.0), c(-0.3, 0.0)]), &TorusPoint::new(&[0.0, 0.0]), &spec()).unwrap();
        assert!(v.value.im.abs() < 1e-12);
    }

    #[test]
    fn gl2_symmetries() {
        let (a, b) = (c(0.4, 0.1), c(-0.3, 0.05));
        let x = TorusPoint::new(&[0.3, -0.5]);
        let v1 = psi_mb(&gl2([a, b]), &x, &spec()).unwrap().value;
        let v2 = psi_mb(&gl2([b, a]), &x, &spec()).unwrap().value;
        assert!((v1 - v2).norm() / v1.norm() < 1e-10);
        let cshift = 0.6;
        let p = gl2([a, b]);
        let w1 = psi_givental(&p, &TorusPoint::new(&[0.3, -0.5]), &spec()).unwrap().value;
        let w2 = psi_givental(&p, &TorusPoint::new(&[0.3 + cshift, -0.5 + cshift]), &spec()).unwrap().value;
        assert!((w2 - w1 * (i() * (a + b) * cshift).exp()).norm() / w1.norm() < 1e-9);
    }

    #[test]
    fn gl2_modified_via_lambda() {
        let p = SpectralParams::from_lambda(&[0.3, -0.4], 0.2, 0.0).unwrap();
        let x = TorusPoint::new(&[0.4, -0.2]);
        let a = psi_modified(&p, &x, &spec()).unwrap().value;
        let b = psi_mb(&p, &x, &spec()).unwrap().value;
        assert!((a - b).norm() / b.norm() < 1e-9);
        let bad = gl2([c(0.0, -0.3), c(0.0, 0.3)]);
        assert!(matches!(psi_modified(&bad, &x, &spec()), Err(Error::GammaArgumentViolation(_))));
    }

    #[test]
    fn gl2_normalized_and_fourier() {
        let p = gl2([c(0.3, 0.1), c(-0.2, -0.1)]);
        let a = phi_from_x(&p, &[1.0, 0.0], Rep::Givental, &spec()).unwrap();
        let b = phi_from_x(&p, &[2.0, 1.0], Rep::Givental, &spec()).unwrap();
        assert!((a - b).norm() / a.norm() < 1e-9);
        let r = phi_givental_reduced(&p, &[1.0], &spec()).unwrap().value;
        assert!((a - r).norm() / a.norm() < 1e-9);
        let z = phi_hat_closed_form(&gl2([c(0.0, 0.0); 2]), &[0.0]).unwrap();
        assert!((z.re - PI / (2.0 * PI).sqrt()).abs() < 1e-12);
        let pp = p.clone();
        let f = AnalyticFn::univariate(move |u| {
            phi_givental_reduced(&pp, &[u.re], &QuadSpec { rel_tol: 1e-13, ..QuadSpec::default() }).unwrap().value
        });
        for q in [0.0, 0.4] {
            let ft = fourier_transform(&f, &[q], &QuadSpec { rel_tol: 1e-10, ..QuadSpec::default() }).unwrap();
            let cf = phi_hat_closed_form(&p, &[q]).unwrap();
            assert!((ft - cf).norm() / cf.norm() < 1e-6, "{ft} {cf}");
        }
    }

    #[test]
    fn gl3_fourier_side() {
        let z = phi_hat_closed_form(&SpectralParams::from_gamma(&[c(0.0, 0.0); 3], 0.0).unwrap(), &[0.0, 0.0]).unwrap();
        assert!((z.re - 1.0 / (2.0 * PI)).abs() < 1e-14);
        let p = SpectralParams::from_gamma(&[c(0.0, 0.0); 3], 0.0).unwrap();
        let v = phi_hat_mb_integral(&p, &[0.0, 0.0], &spec()).unwrap().value;
        assert!((v - z).norm() / z.norm() < 1e-8);
        let p = SpectralParams::from_gamma(&[c(0.4, 0.0), c(0.1, 0.0), c(-0.5, 0.0)], 0.0).unwrap();
        for pp in [[0.2, -0.3], [-0.5, 0.8]] {
            let cf = phi_hat_closed_form(&p, &pp).unwrap();
            let mb = phi_hat_mb_integral(&p, &pp, &spec()).unwrap().value;
            assert!((mb - cf).norm() / cf.norm() < 1e-7);
            let gv = phi_hat_givental_reduced(&p, &pp, &spec()).unwrap().value;
            assert!((gv - cf).norm() / cf.norm() < 1e-7, "{gv} {cf}");
        }
    }

    #[test]
    fn gl3_representations_agree() {
        let p = SpectralParams::from_lambda(&[0.2, -0.1, 0.3], 0.2, 0.0).unwrap();
        let x = TorusPoint::new(&[0.3, 0.0, -0.2]);
        let s = QuadSpec { rel_tol: 1e-9, ..QuadSpec::default() };
        let mb = psi_mb(&p, &x, &s).unwrap();
        let gv = psi_givental(&p, &x, &s).unwrap();
        let md = psi_modified(&p, &x, &s).unwrap();
        assert!((mb.value - gv.value).norm() / gv.value.norm() < 1e-6, "{} {}", mb.value, gv.value);
        assert!((md.value - gv.value).norm() / gv.value.norm() < 1e-6, "{} {}", md.value, gv.value);
        let u = [0.3, 0.2];
        let a = phi_normalized(&p, &u, Rep::Givental, &s).unwrap();
        let b = phi_givental_reduced(&p, &u, &s).unwrap().value;
        assert!((a - b).norm() / a.norm() < 1e-7);
    }
}
