//! Numerical certification of the Gamma-function integral identities.

use crate::cgamma::{gamma, log_gamma, rgamma, C};
use crate::error::{Error, Result};
use crate::funcspace::AnalyticFn;
use crate::quadrature::{line, QuadResult, QuadSpec};
use std::f64::consts::PI;

const PRECONDITION_FLOOR: f64 = 0.05;
const RESIDUE_RADIUS: f64 = 0.02;
const RESIDUE_NODES: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    pub name: String,
    pub lhs: C,
    pub rhs: C,
    pub abs_residual: f64,
    pub rel_residual: f64,
    pub quad: Option<QuadResult>,
    pub params_echo: String,
}

impl IdentityReport {
    pub fn new(name: &str, lhs: C, rhs: C, quad: Option<QuadResult>, params_echo: String) -> Self {
        let abs = (lhs - rhs).norm();
        IdentityReport {
            name: name.to_string(),
            lhs,
            rhs,
            abs_residual: abs,
            rel_residual: abs / rhs.norm().max(1e-300),
            quad,
            params_echo,
        }
    }

    /// Worst sample of a sampled check. Each sample is (lhs, rhs, scale); the
    /// relative residual is |lhs - rhs| / scale.
    pub fn worst(name: &str, samples: &[(C, C, f64)], params_echo: String) -> Self {
        let mut best: Option<IdentityReport> = None;
        for &(l, r, scale) in samples {
            let abs = (l - r).norm();
            let rel = abs / scale.max(1e-300);
            if best.as_ref().is_none_or(|b| rel > b.rel_residual) {
                best = Some(IdentityReport {
                    name: name.to_string(),
                    lhs: l,
                    rhs: r,
                    abs_residual: abs,
                    rel_residual: rel,
                    quad: None,
                    params_echo: params_echo.clone(),
                });
            }
        }
        best.unwrap_or_else(|| IdentityReport::new(name, C::new(0.0, 0.0), C::new(0.0, 0.0), None, params_echo))
    }

    pub fn n_evals(&self) -> usize {
        self.quad.map_or(0, |q| q.n_evals)
    }
}

fn check_floor(name: &str, args: &[C]) -> Result<()> {
    for a in args {
        if a.re <= PRECONDITION_FLOOR {
            return Err(Error::PreconditionViolated(format!("{name}: Re({a}) <= {PRECONDITION_FLOOR}")));
        }
    }
    Ok(())
}

fn echo(args: &[(&str, &[C])]) -> String {
    let parts: Vec<String> = args
        .iter()
        .map(|(k, v)| {
            let vs: Vec<String> = v.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
            format!("{k}=[{}]", vs.join(","))
        })
        .collect();
    parts.join(" ")
}

/// (1/2pi) int prod Gamma(a_i - i g) prod Gamma(b_j + i g) dg = prod Gamma(a_j + b_i) / Gamma(sum).
pub fn barnes_first(a: [C; 2], b: [C; 2], spec: &QuadSpec) -> Result<IdentityReport> {
    check_floor("barnes_first", &[a[0], a[1], b[0], b[1]])?;
    let i = C::i();
    let f = |g: C| match (log_gamma(a[0] - i * g), log_gamma(a[1] - i * g), log_gamma(b[0] + i * g), log_gamma(b[1] + i * g)) {
        (Ok(x), Ok(y), Ok(z), Ok(w)) => (x + y + z + w).exp(),
        _ => C::new(f64::NAN, f64::NAN),
    };
    let q = line(&f, 0.0, spec)?;
    let lhs = q.value / (2.0 * PI);
    let mut l = C::new(0.0, 0.0);
    for aj in a {
        for bi in b {
            l += log_gamma(aj + bi)?;
        }
    }
    l -= log_gamma(a[0] + a[1] + b[0] + b[1])?;
    Ok(IdentityReport::new("barnes_first", lhs, l.exp(), Some(q), echo(&[("a", &a), ("b", &b)])))
}

/// Reciprocal of Gamma(2ig) Gamma(-2ig), zero at g = 0.
pub fn sym_measure(g: C) -> C {
    let i = C::i();
    rgamma(2.0 * i * g) * rgamma(-2.0 * i * g)
}

/// prod Gamma(a + i g) Gamma(a - i g); NaN at poles.
pub fn pm_gamma(args: &[C], g: C) -> C {
    let i = C::i();
    let mut l = C::new(0.0, 0.0);
    for &a in args {
        match (log_gamma(a + i * g), log_gamma(a - i * g)) {
            (Ok(x), Ok(y)) => l += x + y,
            _ => return C::new(f64::NAN, f64::NAN),
        }
    }
    l.exp()
}

/// Rank-one Gustafson integral with four parameters.
pub fn gustafson_n1(a: [C; 4], spec: &QuadSpec) -> Result<IdentityReport> {
    check_floor("gustafson_n1", &a)?;
    let q = line(&|g| pm_gamma(&a, g) * sym_measure(g), 0.0, spec)?;
    let lhs = q.value / (2.0 * PI);
    let mut l = C::new(0.0, 0.0);
    for i in 0..4 {
        for j in i + 1..4 {
            l += log_gamma(a[i] + a[j])?;
        }
    }
    l -= log_gamma(a.iter().sum())?;
    Ok(IdentityReport::new("gustafson_n1", lhs, l.exp() * 2.0, Some(q), echo(&[("a", &a)])))
}

/// Three-parameter variant: (1/4pi) int prod Gamma(a_i +- i t) / (Gamma(2it) Gamma(-2it)) = prod_{i<j} Gamma(a_i + a_j).
pub fn three_gamma(a: [C; 3], spec: &QuadSpec) -> Result<IdentityReport> {
    check_floor("three_gamma", &a)?;
    let q = line(&|g| pm_gamma(&a, g) * sym_measure(g), 0.0, spec)?;
    let lhs = q.value / (4.0 * PI);
    let rhs = three_gamma_closed(a)?;
    Ok(IdentityReport::new("three_gamma", lhs, rhs, Some(q), echo(&[("a", &a)])))
}

pub fn three_gamma_closed(a: [C; 3]) -> Result<C> {
    Ok((log_gamma(a[0] + a[1])? + log_gamma(a[0] + a[2])? + log_gamma(a[1] + a[2])?).exp())
}

/// Gamma(z) = int exp(z u - e^u) du.
pub fn euler_gamma(z: C, spec: &QuadSpec) -> Result<IdentityReport> {
    check_floor("euler_gamma", &[z])?;
    let q = line(&|u| (z * u - u.exp()).exp(), 0.0, spec)?;
    Ok(IdentityReport::new("euler_gamma", q.value, gamma(z)?, Some(q), echo(&[("z", &[z])])))
}

/// B(a, b) = int e^{a t} / (1 + e^t)^{a + b} dt.
pub fn beta_integral(a: C, b: C, spec: &QuadSpec) -> Result<IdentityReport> {
    check_floor("beta_integral", &[a, b])?;
    // log(1 + e^t) evaluated stably for large t
    let softplus = |t: C| if t.re > 0.0 { t + (1.0 + (-t).exp()).ln() } else { (1.0 + t.exp()).ln() };
    let q = line(&|t| (a * t - (a + b) * softplus(t)).exp(), 0.0, spec)?;
    let rhs = (log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?).exp();
    Ok(IdentityReport::new("beta_integral", q.value, rhs, Some(q), echo(&[("a", &[a]), ("b", &[b])])))
}

/// Residue at a simple pole by trapezoidal quadrature on a small circle.
pub fn residue_estimate(f: &dyn Fn(C) -> C, pole: C) -> C {
    let mut s = C::new(0.0, 0.0);
    for k in 0..RESIDUE_NODES {
        let th = 2.0 * PI * k as f64 / RESIDUE_NODES as f64;
        let e = C::new(th.cos(), th.sin());
        s += f(pole + e * RESIDUE_RADIUS) * e * RESIDUE_RADIUS;
    }
    s / RESIDUE_NODES as f64
}

/// Jump int_R f - int_{R - i kappa} f against 2 pi i times the residues of
/// the declared poles lying between the two lines.
pub fn contour_shift_residual(f: &AnalyticFn, poles: &[C], kappa: f64, spec: &QuadSpec) -> Result<IdentityReport> {
    let g = |z: C| f.eval(&[z]);
    let q0 = line(&g, 0.0, spec)?;
    let q1 = line(&g, kappa, spec)?;
    let jump = q0.value - q1.value;
    let (lo, hi) = if kappa >= 0.0 { (-kappa, 0.0) } else { (0.0, -kappa) };
    let orient = if kappa >= 0.0 { -1.0 } else { 1.0 };
    let mut expected = C::new(0.0, 0.0);
    for &p in poles {
        if p.im > lo && p.im < hi {
            expected += residue_estimate(&g, p) * 2.0 * PI * C::i() * orient;
        }
    }
    let quad = QuadResult {
        value: jump,
        err_estimate: q0.err_estimate + q1.err_estimate,
        n_evals: q0.n_evals + q1.n_evals,
        truncation_radius: q0.truncation_radius.max(q1.truncation_radius),
    };
    let mut rep = IdentityReport::new("contour_shift", jump, expected, Some(quad), format!("kappa={kappa} poles={poles:?}"));
    if expected.norm() == 0.0 {
        // no pole crossed: measure the jump against the size of the integral
        rep.rel_residual = rep.abs_residual / q0.value.norm().max(1e-300);
    }
    Ok(rep)
}
