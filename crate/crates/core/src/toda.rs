//! Quadratic Toda Hamiltonian H2 = -1/2 sum d^2/dx_i^2 + sum_j e^{x_j - x_{j+1}}
//! applied to Whittaker evaluators by finite differences.

use crate::cgamma::{c, C};
use crate::error::{Error, Result};
use crate::quadrature::QuadSpec;
use crate::realizations::{RootData, SpectralParams};
use crate::whittaker::{psi, Mb3Table, Rep, TorusPoint};
use serde::Serialize;

pub const DEFAULT_STEP: f64 = 1e-3;

pub type Evaluator = Box<dyn Fn(&TorusPoint) -> Result<C>>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TodaScanReport {
    pub ratios: Vec<(f64, f64)>,
    pub mean: (f64, f64),
    pub spread: f64,
    pub fd_step: f64,
}

pub fn potential(x: &[f64]) -> f64 {
    x.windows(2).map(|w| (w[0] - w[1]).exp()).sum()
}

/// H2 psi at x with 5-point central second differences.
pub fn h2_apply(psi: &dyn Fn(&TorusPoint) -> Result<C>, x: &TorusPoint, h: f64) -> Result<C> {
    if !(h > 1e-4 && h < 1e-2) {
        return Err(Error::StepInvalid(h));
    }
    let center = psi(x)?;
    let mut lap = c(0.0, 0.0);
    for k in 0..x.x.len() {
        let at = |d: f64| {
            let mut y = x.x.clone();
            y[k] += d;
            psi(&TorusPoint::new(&y))
        };
        let d2 = (-at(2.0 * h)? + 16.0 * at(h)? - 30.0 * center + 16.0 * at(-h)? - at(-2.0 * h)?) / (12.0 * h * h);
        lap += d2;
    }
    Ok(-0.5 * lap + potential(&x.x) * center)
}

pub fn eigen_ratio_scan(psi: &dyn Fn(&TorusPoint) -> Result<C>, grid: &[TorusPoint], h: f64) -> Result<TodaScanReport> {
    if let Some(p) = grid.iter().find(|p| p.x.iter().any(|v| v.abs() > 2.0)) {
        return Err(Error::PreconditionViolated(format!("grid point {:?} outside |x_i| <= 2", p.x)));
    }
    let mut ratios = Vec::with_capacity(grid.len());
    for x in grid {
        ratios.push(h2_apply(psi, x, h)? / psi(x)?);
    }
    let mean = ratios.iter().sum::<C>() / ratios.len().max(1) as f64;
    let mut spread: f64 = 0.0;
    for a in &ratios {
        for b in &ratios {
            spread = spread.max((a - b).norm());
        }
    }
    Ok(TodaScanReport { ratios: ratios.iter().map(|z| (z.re, z.im)).collect(), mean: (mean.re, mean.im), spread, fd_step: h })
}

/// Evaluator for Psi in a given representation. The gl3 MB table is built once.
pub fn evaluator(params: &SpectralParams, rep: Rep, spec: &QuadSpec) -> Result<Evaluator> {
    if params.ell == 2 && rep == Rep::MB {
        let table = Mb3Table::new(params, spec)?;
        let gs = params.gamma_sum();
        let rd = RootData::new(2);
        return Ok(Box::new(move |x: &TorusPoint| {
            let pre = (C::i() * gs * x.x[2] - rd.rho_of(&x.x)).exp();
            Ok(pre * table.phi([x.x[0] - x.x[1], x.x[1] - x.x[2]]).value)
        }));
    }
    let (p, s) = (params.clone(), *spec);
    Ok(Box::new(move |x: &TorusPoint| Ok(psi(&p, x, rep, &s)?.value)))
}

/// Half the sum of squares of gamma, the eigenvalue of plane waves e^{i gamma x}.
pub fn plane_wave_eigenvalue(gamma: &[C]) -> C {
    gamma.iter().map(|g| g * g).sum::<C>() * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> Vec<TorusPoint> {
        let mut g = Vec::new();
        for a in [-0.8, 0.0, 0.8] {
            for b in [-0.5, 0.3, 1.0] {
                g.push(TorusPoint::new(&[a, b]));
            }
        }
        g
    }

    #[test]
    fn exponential() {
        let a = [0.3, -0.7, 0.2];
        let f = move |x: &TorusPoint| Ok(c(x.x.iter().zip(&a).map(|(x, a)| x * a).sum::<f64>().exp(), 0.0));
        let x = TorusPoint::new(&[0.1, 0.4, -0.3]);
        let r = h2_apply(&f, &x, 1e-3).unwrap() / f(&x).unwrap();
        let expect = -0.5 * a.iter().map(|v| v * v).sum::<f64>() + potential(&x.x);
        assert!((r - expect).norm() < 1e-8);
        assert!(matches!(h2_apply(&f, &x, 0.1), Err(Error::StepInvalid(_))));
    }

    #[test]
    fn gl2_givental_scan() {
        let spec = QuadSpec::default();
        for g in [[0.5, -0.5], [0.0, 0.0]] {
            let p = SpectralParams::from_gamma(&[c(g[0], 0.0), c(g[1], 0.0)], 0.0).unwrap();
            let f = evaluator(&p, Rep::Givental, &spec).unwrap();
            let r = eigen_ratio_scan(&*f, &grid2(), DEFAULT_STEP).unwrap();
            assert!(r.spread < 1e-5, "{}", r.spread);
            let e = plane_wave_eigenvalue(&p.gamma);
            assert!((c(r.mean.0, r.mean.1) - e).norm() < 1e-5, "{:?}", r.mean);
        }
    }
}
