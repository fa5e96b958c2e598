//! Operator realizations of principal-series gl2 and gl3 representations and
//! their Whittaker vectors.
//!
//! Variable order: tau = (t11) or (t11, t21, t22); likewise for s and T.

use crate::cgamma::{c, log_gamma, rgamma, C};
use crate::error::{Error, Result};
use crate::funcspace::{commutator, gaussian, AnalyticFn, DiffOp, ShiftOp};
use crate::identities::IdentityReport;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::f64::consts::PI;

const FD_STEP: f64 = 1e-3;
const SAMPLE_POINTS: usize = 20;

fn i() -> C {
    C::i()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RootData {
    pub ell: usize,
    pub rho: Vec<f64>,
    pub simple_roots: Vec<Vec<i32>>,
    pub fundamental_weight_count: usize,
}

impl RootData {
    pub fn new(ell: usize) -> Self {
        let rho = (1..=ell + 1).map(|k| ell as f64 / 2.0 + 1.0 - k as f64).collect();
        let simple_roots = (0..ell)
            .map(|j| {
                let mut a = vec![0; ell + 1];
                a[j] = 1;
                a[j + 1] = -1;
                a
            })
            .collect();
        RootData { ell, rho, simple_roots, fundamental_weight_count: ell }
    }

    pub fn rho_of(&self, x: &[f64]) -> f64 {
        self.rho.iter().zip(x).map(|(r, x)| r * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralParams {
    pub ell: usize,
    pub gamma: Vec<C>,
    pub lambda: Vec<f64>,
    pub eps: f64,
    pub kappa: f64,
}

impl SpectralParams {
    /// gl2: gamma = lambda + 2 i eps rho; gl3: gamma = lambda + i eps (1, -1, 0).
    pub fn from_lambda(lambda: &[f64], eps: f64, kappa: f64) -> Result<Self> {
        let ell = lambda.len().checked_sub(1).ok_or(Error::RankUnsupported(0))?;
        let shift: Vec<f64> = match ell {
            1 => vec![eps, -eps],
            2 => vec![eps, -eps, 0.0],
            _ => return Err(Error::RankUnsupported(ell)),
        };
        let gamma = lambda.iter().zip(&shift).map(|(l, s)| c(*l, *s)).collect();
        Ok(SpectralParams { ell, gamma, lambda: lambda.to_vec(), eps, kappa })
    }

    pub fn from_gamma(gamma: &[C], kappa: f64) -> Result<Self> {
        let ell = gamma.len().checked_sub(1).ok_or(Error::RankUnsupported(0))?;
        if ell == 0 || ell > 2 {
            return Err(Error::RankUnsupported(ell));
        }
        Ok(SpectralParams { ell, gamma: gamma.to_vec(), lambda: gamma.iter().map(|g| g.re).collect(), eps: gamma[0].im, kappa })
    }

    pub fn conj(&self) -> Self {
        SpectralParams { gamma: self.gamma.iter().map(|g| g.conj()).collect(), eps: -self.eps, ..self.clone() }
    }

    pub fn gamma_sum(&self) -> C {
        self.gamma.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Kind {
    GT,
    GTModified,
    GTShifted,
    GG,
    GGModified,
    GGModifiedDual,
    GTDual,
    /// Transposed operators written out explicitly (GG-modified, gl3).
    GGModifiedPrimed,
    /// Transposed operators written out explicitly (GT, gl3).
    GTPrimed,
}

#[derive(Debug, Clone)]
pub enum Generator {
    Shift(ShiftOp),
    Diff(DiffOp),
}

impl Generator {
    pub fn apply_at(&self, f: &dyn Fn(&[C]) -> C, v: &[C]) -> C {
        match self {
            Generator::Shift(op) => op.apply_at(f, v),
            Generator::Diff(op) => op.apply_at(f, v, FD_STEP),
        }
    }

    pub fn as_shift(&self) -> Option<&ShiftOp> {
        match self {
            Generator::Shift(op) => Some(op),
            Generator::Diff(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Realization {
    pub kind: Kind,
    pub ell: usize,
    pub params: SpectralParams,
    pub generators: BTreeMap<(usize, usize), Generator>,
}

impl Realization {
    pub fn arity(&self) -> usize {
        self.ell * (self.ell + 1) / 2
    }

    pub fn get(&self, i: usize, j: usize) -> &Generator {
        &self.generators[&(i, j)]
    }

    pub fn shift(&self, i: usize, j: usize) -> Option<&ShiftOp> {
        self.generators.get(&(i, j)).and_then(Generator::as_shift)
    }

    fn shifts(kind: Kind, params: &SpectralParams, ops: Vec<((usize, usize), ShiftOp)>) -> Self {
        let generators = ops.into_iter().map(|(k, op)| (k, Generator::Shift(op))).collect();
        Realization { kind, ell: params.ell, params: params.clone(), generators }
    }
}

fn check_rank(params: &SpectralParams) -> Result<()> {
    if params.ell == 1 || params.ell == 2 {
        Ok(())
    } else {
        Err(Error::RankUnsupported(params.ell))
    }
}

pub fn gt_realization(params: &SpectralParams) -> Result<Realization> {
    check_rank(params)?;
    let g = params.gamma.clone();
    let gs = params.gamma_sum();
    let half = c(0.5, 0.0);
    let ops = if params.ell == 1 {
        let (g1, g2) = (g[0], g[1]);
        vec![
            ((1, 1), ShiftOp::mul(1, |v| -i() * v[0])),
            ((2, 2), ShiftOp::mul(1, move |v| -i() * gs + i() * v[0])),
            ((1, 2), ShiftOp::term(1, vec![1], move |v| -i() * (i() * (v[0] - g1) + half) * (i() * (v[0] - g2) + half))),
            ((2, 1), ShiftOp::term(1, vec![-1], |_| -i())),
        ]
    } else {
        let g23 = g.clone();
        vec![
            ((1, 1), ShiftOp::mul(3, |v| -i() * v[0])),
            ((2, 2), ShiftOp::mul(3, |v| -i() * (v[1] + v[2]) + i() * v[0])),
            ((3, 3), ShiftOp::mul(3, move |v| -i() * gs + i() * (v[1] + v[2]))),
            (
                (1, 2),
                ShiftOp::term(3, vec![1, 0, 0], move |v| -i() * (i() * (v[0] - v[1]) + half) * (i() * (v[0] - v[2]) + half)),
            ),
            (
                (2, 3),
                ShiftOp::term(3, vec![0, 1, 0], {
                    let g = g23.clone();
                    move |v| -i() * g.iter().map(|gi| i() * (v[1] - gi) + half).product::<C>() / (i() * (v[1] - v[2]))
                })
                .add(&ShiftOp::term(3, vec![0, 0, 1], move |v| {
                    -i() * g23.iter().map(|gi| i() * (v[2] - gi) + half).product::<C>() / (i() * (v[2] - v[1]))
                }))?,
            ),
            ((2, 1), ShiftOp::term(3, vec![-1, 0, 0], |_| -i())),
            (
                (3, 2),
                ShiftOp::term(3, vec![0, -1, 0], move |v| i() * (i() * (v[0] - v[1]) + half) / (i() * (v[1] - v[2])))
                    .add(&ShiftOp::term(3, vec![0, 0, -1], move |v| i() * (i() * (v[0] - v[2]) + half) / (i() * (v[2] - v[1]))))?,
            ),
        ]
    };
    Ok(Realization::shifts(Kind::GT, params, ops))
}

/// GT realization for the conjugate parameters, acting on left vectors.
pub fn gt_dual(params: &SpectralParams) -> Result<Realization> {
    let mut r = gt_realization(&params.conj())?;
    r.kind = Kind::GTDual;
    r.params = params.clone();
    Ok(r)
}

/// mu_1(tau) = (2 pi)^{-3/2} e^{pi (t21 + t22) / 2} / Gamma(i t21 - i t22); for gl2 the constant (2 pi)^{-1/2}.
pub fn mu1(ell: usize) -> AnalyticFn {
    if ell == 1 {
        return AnalyticFn::constant(1, c((2.0 * PI).powf(-0.5), 0.0));
    }
    AnalyticFn::new(3, |v: &[C]| (2.0 * PI).powf(-1.5) * (PI * (v[1] + v[2]) / 2.0).exp() * rgamma(i() * (v[1] - v[2])))
}

/// GT measure mu = mu_1 * conj(mu_1) on real arguments.
pub fn gt_measure(ell: usize) -> AnalyticFn {
    if ell == 1 {
        return AnalyticFn::constant(1, c(1.0 / (2.0 * PI), 0.0));
    }
    AnalyticFn::new(3, |v: &[C]| {
        (2.0 * PI).powi(-3) * (PI * (v[1] + v[2])).exp() * rgamma(i() * (v[1] - v[2])) * rgamma(i() * (v[2] - v[1]))
    })
}

/// Conjugated gl3 GT realization, written out termwise.
pub fn gt_modified(params: &SpectralParams) -> Result<Realization> {
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let base = gt_realization(params)?;
    let g = params.gamma.clone();
    let gs = params.gamma_sum();
    let half = c(0.5, 0.0);
    let mut ops: Vec<((usize, usize), ShiftOp)> = [(1, 1), (2, 2), (1, 2), (2, 1)]
        .iter()
        .map(|k| (*k, base.shift(k.0, k.1).expect("shift generator").clone()))
        .collect();
    ops.push(((3, 3), ShiftOp::mul(3, move |v| -i() * gs + i() * (v[1] + v[2]))));
    let g2 = g.clone();
    ops.push((
        (2, 3),
        ShiftOp::term(3, vec![0, 1, 0], move |v| g.iter().map(|gi| i() * (v[1] - gi) + half).product::<C>()).add(
            &ShiftOp::term(3, vec![0, 0, 1], move |v| {
                g2.iter().map(|gi| i() * (v[2] - gi) + half).product::<C>()
                    / (i() * (v[2] - v[1]) * (i() * (v[1] - v[2]) - 1.0))
            }),
        )?,
    ));
    ops.push((
        (3, 2),
        ShiftOp::term(3, vec![0, -1, 0], move |v| {
            (i() * (v[0] - v[1]) + half) / (i() * (v[1] - v[2]) * (i() * (v[1] - v[2]) - 1.0))
        })
        .add(&ShiftOp::term(3, vec![0, 0, -1], move |v| -(i() * (v[0] - v[2]) + half)))?,
    ));
    Ok(Realization::shifts(Kind::GTModified, params, ops))
}

/// Generators with coefficients evaluated at t11 - i kappa.
pub fn gt_shifted(params: &SpectralParams) -> Result<Realization> {
    check_rank(params)?;
    let kappa = params.kappa;
    let (base, bound) = if params.ell == 1 {
        (gt_realization(params)?, 0.5 - params.eps.abs())
    } else {
        (gt_modified(params)?, 0.5)
    };
    if kappa >= bound {
        return Err(Error::KappaOutOfRange { kappa, bound });
    }
    let mut delta = vec![c(0.0, 0.0); base.arity()];
    delta[0] = c(0.0, -kappa);
    let ops = base
        .generators
        .iter()
        .map(|(k, g)| (*k, g.as_shift().expect("shift generator").argument_shift(&delta)))
        .collect();
    Ok(Realization::shifts(Kind::GTShifted, params, ops))
}

/// Differential Gauss-Givental realization on T-variables with T_{l+1,k} = 0.
pub fn gg_realization(params: &SpectralParams) -> Result<Realization> {
    check_rank(params)?;
    let g = params.gamma.clone();
    let one = |_: &[C]| c(1.0, 0.0);
    let neg = |_: &[C]| c(-1.0, 0.0);
    let mut gens: BTreeMap<(usize, usize), Generator> = BTreeMap::new();
    if params.ell == 1 {
        let (g1, g2) = (g[0], g[1]);
        gens.insert((1, 1), Generator::Diff(DiffOp::new(1, move |_| -i() * g1).with_derivative(0, neg)));
        gens.insert((2, 2), Generator::Diff(DiffOp::new(1, move |_| -i() * g2).with_derivative(0, one)));
        gens.insert((1, 2), Generator::Diff(DiffOp::new(1, |v| -0.5 * (-v[0]).exp()).with_derivative(0, |v| (-v[0]).exp())));
        gens.insert(
            (2, 1),
            Generator::Diff(
                DiffOp::new(1, move |v| v[0].exp() * (i() * (g2 - g1) - 0.5)).with_derivative(0, |v| -v[0].exp()),
            ),
        );
    } else {
        let (g1, g2, g3) = (g[0], g[1], g[2]);
        gens.insert((1, 1), Generator::Diff(DiffOp::new(3, move |_| -i() * g1).with_derivative(0, neg).with_derivative(1, neg)));
        gens.insert((2, 2), Generator::Diff(DiffOp::new(3, move |_| -i() * g2).with_derivative(2, neg).with_derivative(1, one)));
        gens.insert((3, 3), Generator::Diff(DiffOp::new(3, move |_| -i() * g3).with_derivative(0, one).with_derivative(2, one)));
        gens.insert(
            (1, 2),
            Generator::Diff(DiffOp::new(3, |v| -0.5 * (-v[1]).exp()).with_derivative(1, |v| (-v[1]).exp())),
        );
        // (e^{T21-T11} + e^{-T22})(d11 - 1/2) + e^{-T22}(d22 - d21)
        let a = |v: &[C]| (v[1] - v[0]).exp() + (-v[2]).exp();
        gens.insert(
            (2, 3),
            Generator::Diff(
                DiffOp::new(3, move |v| -0.5 * a(v))
                    .with_derivative(0, a)
                    .with_derivative(2, |v| (-v[2]).exp())
                    .with_derivative(1, |v| -(-v[2]).exp()),
            ),
        );
        // e^{T11-T22}(c - d11) + e^{T21}(c - d11 + d22 - d21), c = i(g2-g1) - 1/2
        let cc = i() * (g2 - g1) - 0.5;
        gens.insert(
            (2, 1),
            Generator::Diff(
                DiffOp::new(3, move |v| cc * ((v[0] - v[2]).exp() + v[1].exp()))
                    .with_derivative(0, |v| -((v[0] - v[2]).exp() + v[1].exp()))
                    .with_derivative(2, |v| v[1].exp())
                    .with_derivative(1, |v| -v[1].exp()),
            ),
        );
        let c3 = i() * (g3 - g2) - 0.5;
        gens.insert(
            (3, 2),
            Generator::Diff(DiffOp::new(3, move |v| c3 * v[2].exp()).with_derivative(2, |v| -v[2].exp())),
        );
    }
    Ok(Realization { kind: Kind::GG, ell: params.ell, params: params.clone(), generators: gens })
}

/// Modified Gauss-Givental realization (difference operators in s).
pub fn gg_modified(params: &SpectralParams, dual: bool) -> Result<Realization> {
    check_rank(params)?;
    let p = if dual { params.conj() } else { params.clone() };
    let g = p.gamma.clone();
    let half = c(0.5, 0.0);
    let ops = if params.ell == 1 {
        let (g1, g2) = (g[0], g[1]);
        vec![
            ((1, 1), ShiftOp::mul(1, move |v| -i() * (g1 + v[0]))),
            ((2, 2), ShiftOp::mul(1, move |v| -i() * (g2 - v[0]))),
            ((1, 2), ShiftOp::term(1, vec![1], move |v| i() * v[0] + half)),
            ((2, 1), ShiftOp::term(1, vec![-1], move |v| i() * (g2 - g1 - v[0]) + half)),
        ]
    } else {
        let (g1, g2, g3) = (g[0], g[1], g[2]);
        vec![
            ((1, 1), ShiftOp::mul(3, move |v| -i() * (g1 + v[0] + v[1]))),
            ((2, 2), ShiftOp::mul(3, move |v| -i() * (g2 - v[1] + v[2]))),
            ((3, 3), ShiftOp::mul(3, move |v| -i() * (g3 - v[0] - v[2]))),
            ((1, 2), ShiftOp::term(3, vec![0, 1, 0], move |v| i() * v[1] + half)),
            (
                (2, 3),
                ShiftOp::term(3, vec![1, -1, 0], move |v| i() * v[0] + half)
                    .add(&ShiftOp::term(3, vec![0, 0, 1], move |v| i() * (v[0] - v[1] + v[2]) + half))?,
            ),
            (
                (2, 1),
                ShiftOp::term(3, vec![-1, 0, 1], move |v| i() * (g2 - g1 - v[0]) + half)
                    .add(&ShiftOp::term(3, vec![0, -1, 0], move |v| i() * (g2 - g1 - v[0] - v[1] + v[2]) + half))?,
            ),
            ((3, 2), ShiftOp::term(3, vec![0, 0, -1], move |v| i() * (g3 - g2 - v[2]) + half)),
        ]
    };
    let kind = if dual { Kind::GGModifiedDual } else { Kind::GGModified };
    let mut r = Realization::shifts(kind, &p, ops);
    r.params = params.clone();
    Ok(r)
}

/// Explicit transposes of the gl3 modified Gauss-Givental generators.
pub fn gg_modified_primed(params: &SpectralParams) -> Result<Realization> {
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let g = params.gamma.clone();
    let (g1, g2, g3) = (g[0], g[1], g[2]);
    let half = c(0.5, 0.0);
    let ops = vec![
        ((1, 1), ShiftOp::mul(3, move |v| -i() * (g1 + v[0] + v[1]))),
        ((2, 2), ShiftOp::mul(3, move |v| i() * (-g2 + v[1] - v[2]))),
        ((3, 3), ShiftOp::mul(3, move |v| i() * (-g3 + v[0] + v[2]))),
        ((1, 2), ShiftOp::term(3, vec![0, -1, 0], move |v| i() * v[1] - half)),
        (
            (2, 3),
            ShiftOp::term(3, vec![-1, 1, 0], move |v| i() * v[0] - half)
                .add(&ShiftOp::term(3, vec![0, 0, -1], move |v| i() * (v[0] + v[2] - v[1]) - half))?,
        ),
        (
            (2, 1),
            ShiftOp::term(3, vec![1, 0, -1], move |v| i() * (g2 - g1 - v[0]) - half)
                .add(&ShiftOp::term(3, vec![0, 1, 0], move |v| i() * (g2 - g1 - v[0] + v[2] - v[1]) - half))?,
        ),
        ((3, 2), ShiftOp::term(3, vec![0, 0, 1], move |v| i() * (g3 - g2 - v[2]) - half)),
    ];
    Ok(Realization::shifts(Kind::GGModifiedPrimed, params, ops))
}

/// Explicit transposes of the gl3 GT generators.
pub fn gt_primed(params: &SpectralParams) -> Result<Realization> {
    if params.ell != 2 {
        return Err(Error::RankUnsupported(params.ell));
    }
    let base = gt_realization(params)?;
    let g = params.gamma.clone();
    let g2 = g.clone();
    let half = c(0.5, 0.0);
    let mut ops: Vec<((usize, usize), ShiftOp)> =
        [(1, 1), (2, 2), (3, 3)].iter().map(|k| (*k, base.shift(k.0, k.1).expect("shift generator").clone())).collect();
    ops.push((
        (1, 2),
        ShiftOp::term(3, vec![-1, 0, 0], move |v| -i() * (i() * (v[0] - v[1]) - half) * (i() * (v[0] - v[2]) - half)),
    ));
    ops.push((
        (2, 3),
        ShiftOp::term(3, vec![0, -1, 0], move |v| {
            -i() * g.iter().map(|gi| i() * (v[1] - gi) - half).product::<C>() / (i() * (v[1] - v[2]) - 1.0)
        })
        .add(&ShiftOp::term(3, vec![0, 0, -1], move |v| {
            -i() * g2.iter().map(|gi| i() * (v[2] - gi) - half).product::<C>() / (i() * (v[2] - v[1]) - 1.0)
        }))?,
    ));
    ops.push(((2, 1), ShiftOp::term(3, vec![1, 0, 0], |_| -i())));
    ops.push((
        (3, 2),
        ShiftOp::term(3, vec![0, 1, 0], move |v| i() * (i() * (v[0] - v[1]) - half) / (i() * (v[1] - v[2]) + 1.0))
            .add(&ShiftOp::term(3, vec![0, 0, 1], move |v| i() * (i() * (v[0] - v[2]) - half) / (i() * (v[2] - v[1]) + 1.0)))?,
    ));
    Ok(Realization::shifts(Kind::GTPrimed, params, ops))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    L,
    R,
}

#[derive(Debug, Clone)]
pub struct WhittakerVector {
    pub side: Side,
    pub kind: Kind,
    pub f: AnalyticFn,
}

fn lg(z: C) -> C {
    log_gamma(z).unwrap_or(c(f64::NAN, f64::NAN))
}

/// Printed left and right Whittaker vectors of a realization.
pub fn whittaker_vectors(r: &Realization) -> Result<(WhittakerVector, WhittakerVector)> {
    let p = &r.params;
    let g = p.gamma.clone();
    let gb: Vec<C> = g.iter().map(|z| z.conj()).collect();
    let half = c(0.5, 0.0);
    let (l, rr): (AnalyticFn, AnalyticFn) = match (r.kind, r.ell) {
        (Kind::GT, 1) => (
            AnalyticFn::univariate(|t| (-PI * t / 2.0).exp()),
            AnalyticFn::univariate(move |t| {
                (PI * t / 2.0 + g.iter().map(|gj| lg(i() * (gj - t) + half)).sum::<C>()).exp()
            }),
        ),
        (Kind::GT, 2) => (
            AnalyticFn::new(3, |v: &[C]| (-PI * (v[0] + v[1] + v[2]) / 2.0).exp()),
            AnalyticFn::new(3, move |v: &[C]| gt3_psi_r_log(&g, v).exp()),
        ),
        (Kind::GTModified, 2) => (
            AnalyticFn::new(3, |v: &[C]| {
                (2.0 * PI).powf(-1.5) * (-PI * v[0] / 2.0).exp() * rgamma(i() * (v[1] - v[2]))
            }),
            AnalyticFn::new(3, move |v: &[C]| {
                (2.0 * PI).powf(-1.5) * rgamma(i() * (v[1] - v[2])) * (gt3_psi_r_log(&g, v) + PI * (v[1] + v[2]) / 2.0).exp()
            }),
        ),
        (Kind::GG, 1) => (
            AnalyticFn::univariate(move |t| ((i() * (gb[1] - gb[0]) - 0.5) * t - (-t).exp()).exp()),
            AnalyticFn::univariate(|t| (t / 2.0 - t.exp()).exp()),
        ),
        (Kind::GG, 2) => (
            AnalyticFn::new(3, move |v: &[C]| {
                ((i() * (gb[1] - gb[0]) - 0.5) * v[0] - (v[1] - v[0]).exp() + (i() * (gb[2] - gb[1]) - 0.5) * (v[1] + v[2])
                    - (-v[1]).exp()
                    - (-v[2]).exp())
                .exp()
            }),
            AnalyticFn::new(3, |v: &[C]| {
                ((v[0] + v[1] + v[2]) / 2.0 - (v[0] - v[2]).exp() - v[1].exp() - v[2].exp()).exp()
            }),
        ),
        (Kind::GGModified, 1) => (
            AnalyticFn::univariate(move |s| lg(i() * (gb[0] - gb[1] + s) + half).exp() / (2.0 * PI).sqrt()),
            AnalyticFn::univariate(move |s| lg(half - i() * s).exp() / (2.0 * PI).sqrt()),
        ),
        (Kind::GGModified, 2) => (
            AnalyticFn::new(3, move |v: &[C]| gg3_phi_l(&gb, v)),
            AnalyticFn::new(3, |v: &[C]| gg3_phi_r(v)),
        ),
        (k, _) => return Err(Error::NoPrintedVector(format!("{k:?}"))),
    };
    Ok((
        WhittakerVector { side: Side::L, kind: r.kind, f: l },
        WhittakerVector { side: Side::R, kind: r.kind, f: rr },
    ))
}

/// log of e^{pi(t11 - t21 - t22)/2} prod_j Gamma(i(t2j - t11) + 1/2) prod_{i,j} Gamma(i(g_i - t2j) + 1/2).
pub fn gt3_psi_r_log(g: &[C], v: &[C]) -> C {
    let half = c(0.5, 0.0);
    let mut l = PI * (v[0] - v[1] - v[2]) / 2.0;
    for j in 1..3 {
        l += lg(i() * (v[j] - v[0]) + half);
        for gi in g {
            l += lg(i() * (gi - v[j]) + half);
        }
    }
    l
}

pub fn gg3_phi_l(gb: &[C], v: &[C]) -> C {
    let half = c(0.5, 0.0);
    ((lg(i() * (gb[0] - gb[1] + v[0]) + half) + lg(i() * (gb[1] - gb[2] + v[2]) + half)
        + lg(i() * (gb[0] - gb[2] + v[0] + v[1]) + 1.0))
        .exp())
        * (2.0 * PI).powf(-1.5)
}

pub fn gg3_phi_r(v: &[C]) -> C {
    let half = c(0.5, 0.0);
    (lg(half - i() * v[1]) + lg(half - i() * v[0]) + lg(1.0 - i() * v[0] - i() * v[2])).exp() * (2.0 * PI).powf(-1.5)
}

fn dual_of(r: &Realization) -> Result<Realization> {
    match r.kind {
        Kind::GT => gt_realization(&r.params.conj()),
        Kind::GTModified => gt_modified(&r.params.conj()),
        Kind::GG => gg_realization(&r.params.conj()),
        Kind::GGModified => gg_modified(&r.params, true),
        k => Err(Error::NoPrintedVector(format!("{k:?}"))),
    }
}

fn sample_points(r: &Realization, rng: &mut ChaCha8Rng) -> Vec<Vec<C>> {
    let n = r.arity();
    let mut pts = Vec::with_capacity(SAMPLE_POINTS);
    while pts.len() < SAMPLE_POINTS {
        let v: Vec<C> = (0..n)
            .map(|_| {
                let im = if r.kind == Kind::GG { 0.0 } else { rng.gen_range(-0.15..0.15) };
                c(rng.gen_range(-1.5..1.5), im)
            })
            .collect();
        if n == 3 && (v[1] - v[2]).re.abs() < 0.1 {
            continue;
        }
        pts.push(v);
    }
    pts
}

/// Raising simple roots on the right vector and lowering ones on the left vector act by -1.
pub fn check_whittaker_defining(r: &Realization, vectors: &(WhittakerVector, WhittakerVector), seed: u64) -> Result<IdentityReport> {
    let dual = dual_of(r)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_points(r, &mut rng);
    let (wl, wr) = (vectors.0.f.clone(), vectors.1.f.clone());
    let mut samples = Vec::new();
    for k in 1..=r.ell {
        let raise = r.get(k, k + 1);
        let lower = dual.get(k + 1, k);
        for v in &pts {
            let fr = wr.eval(v);
            samples.push((raise.apply_at(&|w| wr.eval(w), v), -fr, fr.norm()));
            let fl = wl.eval(v);
            samples.push((lower.apply_at(&|w| wl.eval(w), v), -fl, fl.norm()));
        }
    }
    Ok(IdentityReport::worst(&format!("whittaker_{:?}_gl{}", r.kind, r.ell + 1), &samples, format!("{:?}", r.params)))
}

fn test_functions(n: usize, rng: &mut ChaCha8Rng) -> Vec<AnalyticFn> {
    (0..2)
        .map(|_| gaussian((0..n).map(|_| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()))
        .collect()
}

type Rel = (&'static str, (usize, usize), (usize, usize), Vec<(f64, (usize, usize))>);

fn relations(ell: usize) -> Vec<Rel> {
    let mut rels: Vec<Rel> = vec![
        ("[E12,E21]=E11-E22", (1, 2), (2, 1), vec![(1.0, (1, 1)), (-1.0, (2, 2))]),
        ("[E11,E12]=E12", (1, 1), (1, 2), vec![(1.0, (1, 2))]),
        ("[E22,E12]=-E12", (2, 2), (1, 2), vec![(-1.0, (1, 2))]),
        ("[E11,E21]=-E21", (1, 1), (2, 1), vec![(-1.0, (2, 1))]),
    ];
    if ell == 2 {
        rels.extend(vec![
            ("[E23,E32]=E22-E33", (2, 3), (3, 2), vec![(1.0, (2, 2)), (-1.0, (3, 3))]),
            ("[E12,E32]=0", (1, 2), (3, 2), vec![]),
            ("[E21,E23]=0", (2, 1), (2, 3), vec![]),
            ("[E22,E23]=E23", (2, 2), (2, 3), vec![(1.0, (2, 3))]),
            ("[E33,E23]=-E23", (3, 3), (2, 3), vec![(-1.0, (2, 3))]),
            ("[E11,E23]=0", (1, 1), (2, 3), vec![]),
            ("[E33,E32]=E32", (3, 3), (3, 2), vec![(1.0, (3, 2))]),
            ("[E11,E22]=0", (1, 1), (2, 2), vec![]),
        ]);
    }
    rels
}

/// gl commutation relations sampled on Gaussian test functions.
pub fn check_gl_commutations(r: &Realization, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_points(r, &mut rng);
    let tests = test_functions(r.arity(), &mut rng);
    let mut samples = Vec::new();
    for (_, x, y, rhs) in relations(r.ell) {
        let (gx, gy) = (r.get(x.0, x.1), r.get(y.0, y.1));
        for f in &tests {
            for v in &pts {
                let xy = gx.apply_at(&|w| gy.apply_at(&|u| f.eval(u), w), v);
                let yx = gy.apply_at(&|w| gx.apply_at(&|u| f.eval(u), w), v);
                let mut want = c(0.0, 0.0);
                for (coef, k) in &rhs {
                    want += r.get(k.0, k.1).apply_at(&|u| f.eval(u), v) * *coef;
                }
                let scale = xy.norm().max(yx.norm()).max(want.norm());
                samples.push((xy - yx, want, scale));
            }
        }
    }
    if r.ell == 2 {
        // Serre relations via the operator algebra
        for (a, b) in [((1, 2), (2, 3)), ((2, 3), (1, 2)), ((2, 1), (3, 2)), ((3, 2), (2, 1))] {
            if let (Some(x), Some(y)) = (r.shift(a.0, a.1), r.shift(b.0, b.1)) {
                let inner = commutator(x, y)?;
                let outer = commutator(x, &inner)?;
                for f in &tests {
                    for v in &pts {
                        let lhs = outer.apply_at(&|u| f.eval(u), v);
                        let xx = crate::funcspace::shift_compose(x, &inner)?.apply_at(&|u| f.eval(u), v);
                        samples.push((lhs, c(0.0, 0.0), xx.norm().max(1e-300)));
                    }
                }
            }
        }
    }
    Ok(IdentityReport::worst(&format!("commutators_{:?}_gl{}", r.kind, r.ell + 1), &samples, format!("{:?}", r.params)))
}

/// Printed primed operators equal the transposes, and [X', Y'] = -[X, Y]'.
pub fn check_opposite_relations(base: &Realization, primed: &Realization, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_points(base, &mut rng);
    let tests = test_functions(base.arity(), &mut rng);
    let keys: Vec<(usize, usize)> = primed.generators.keys().copied().collect();
    let mut samples = Vec::new();
    for k in &keys {
        let t = base.shift(k.0, k.1).expect("shift generator").transpose();
        let p = primed.shift(k.0, k.1).expect("shift generator");
        for f in &tests {
            for v in &pts {
                let (a, b) = (p.apply_at(&|u| f.eval(u), v), t.apply_at(&|u| f.eval(u), v));
                samples.push((a, b, a.norm().max(b.norm())));
            }
        }
    }
    for (_, x, y, _) in relations(base.ell) {
        let (bx, by) = (base.shift(x.0, x.1).expect("shift"), base.shift(y.0, y.1).expect("shift"));
        let (px, py) = (primed.shift(x.0, x.1).expect("shift"), primed.shift(y.0, y.1).expect("shift"));
        let lhs = commutator(px, py)?;
        let rhs = commutator(bx, by)?.transpose().scale(c(-1.0, 0.0));
        let size = crate::funcspace::shift_compose(px, py)?;
        for f in &tests {
            for v in &pts {
                let (a, b) = (lhs.apply_at(&|u| f.eval(u), v), rhs.apply_at(&|u| f.eval(u), v));
                let scale = size.apply_at(&|u| f.eval(u), v).norm().max(a.norm()).max(b.norm());
                samples.push((a, b, scale));
            }
        }
    }
    Ok(IdentityReport::worst(&format!("opposite_{:?}", primed.kind), &samples, format!("{:?}", base.params)))
}

/// Generator actions of two realizations agree after conjugation by mu.
pub fn check_conjugation(base: &Realization, conj: &Realization, mu: &AnalyticFn, seed: u64) -> Result<IdentityReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sample_points(base, &mut rng);
    let tests = test_functions(base.arity(), &mut rng);
    let mut samples = Vec::new();
    for (k, g) in &conj.generators {
        let b = base.shift(k.0, k.1).expect("shift generator").conjugate(mu);
        let g = g.as_shift().expect("shift generator");
        for f in &tests {
            for v in &pts {
                let (x, y) = (g.apply_at(&|u| f.eval(u), v), b.apply_at(&|u| f.eval(u), v));
                samples.push((x, y, x.norm().max(y.norm())));
            }
        }
    }
    Ok(IdentityReport::worst("conjugation", &samples, format!("{:?}", base.params)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{line, QuadSpec};

    fn gl2() -> SpectralParams {
        SpectralParams::from_lambda(&[0.3, -0.2], 0.2, 0.1).unwrap()
    }
    fn gl3() -> SpectralParams {
        SpectralParams::from_lambda(&[0.2, -0.1, 0.3], 0.2, 0.1).unwrap()
    }

    #[test]
    fn root_data() {
        assert_eq!(RootData::new(1).rho, vec![0.5, -0.5]);
        let r = RootData::new(2);
        assert_eq!(r.rho, vec![1.0, 0.0, -1.0]);
        assert_eq!(r.rho_of(&[0.3, 7.0, -0.2]), 0.5);
        assert_eq!(r.simple_roots[0], vec![1, -1, 0]);
    }

    #[test]
    fn gt_coefficients() {
        let r = gt_realization(&gl2()).unwrap();
        let one = |_: &[C]| c(1.0, 0.0);
        assert_eq!(r.get(1, 1).apply_at(&one, &[c(2.0, 0.0)]), c(0.0, -2.0));
        let p = gl3();
        let r3 = gt_realization(&p).unwrap();
        let v = [c(0.1, 0.0), c(0.4, 0.0), c(-0.3, 0.0)];
        let e33 = r3.get(3, 3).apply_at(&one, &v);
        assert!((e33 - (-i() * p.gamma_sum() + i() * (v[1] + v[2]))).norm() < 1e-15);
        assert!(matches!(gt_realization(&SpectralParams { ell: 3, ..gl3() }), Err(Error::RankUnsupported(3))));
    }

    #[test]
    fn whittaker_vectors_satisfy_defining_relations() {
        for p in [gl2(), gl3()] {
            for r in [gt_realization(&p).unwrap(), gg_modified(&p, false).unwrap()] {
                let w = whittaker_vectors(&r).unwrap();
                let rep = check_whittaker_defining(&r, &w, 11).unwrap();
                assert!(rep.rel_residual < 1e-12, "{} {}", rep.name, rep.rel_residual);
            }
            let r = gg_realization(&p).unwrap();
            let rep = check_whittaker_defining(&r, &whittaker_vectors(&r).unwrap(), 11).unwrap();
            assert!(rep.rel_residual < 1e-7, "{} {}", rep.name, rep.rel_residual);
        }
        let r = gt_modified(&gl3()).unwrap();
        let rep = check_whittaker_defining(&r, &whittaker_vectors(&r).unwrap(), 11).unwrap();
        assert!(rep.rel_residual < 1e-12, "{}", rep.rel_residual);
    }

    #[test]
    fn commutation_relations() {
        for p in [gl2(), gl3()] {
            for r in [gt_realization(&p).unwrap(), gg_modified(&p, false).unwrap(), gg_modified(&p, true).unwrap()] {
                let rep = check_gl_commutations(&r, 5).unwrap();
                assert!(rep.rel_residual < 1e-11, "{} {}", rep.name, rep.rel_residual);
            }
        }
        let rep = check_gl_commutations(&gt_modified(&gl3()).unwrap(), 5).unwrap();
        assert!(rep.rel_residual < 1e-11, "{}", rep.rel_residual);
        let rep = check_gl_commutations(&gt_shifted(&gl3()).unwrap(), 5).unwrap();
        assert!(rep.rel_residual < 1e-11, "{}", rep.rel_residual);
        let rep = check_gl_commutations(&gg_realization(&gl2()).unwrap(), 5).unwrap();
        assert!(rep.rel_residual < 1e-5, "{}", rep.rel_residual);
    }

    #[test]
    fn conjugated_realization_matches_printed_form() {
        let p = gl3();
        let rep = check_conjugation(&gt_realization(&p).unwrap(), &gt_modified(&p).unwrap(), &mu1(2), 2).unwrap();
        assert!(rep.rel_residual < 1e-12, "{}", rep.rel_residual);
    }

    #[test]
    fn shifted_realization() {
        let p = SpectralParams { kappa: 0.0, ..gl3() };
        let a = gt_shifted(&p).unwrap();
        let b = gt_modified(&p).unwrap();
        let f = gaussian(vec![c(0.1, 0.2), c(-0.3, 0.1), c(0.2, -0.4)]);
        let v = [c(0.2, 0.0), c(0.5, 0.0), c(-0.4, 0.0)];
        for k in b.generators.keys() {
            assert_eq!(a.get(k.0, k.1).apply_at(&|u| f.eval(u), &v), b.get(k.0, k.1).apply_at(&|u| f.eval(u), &v));
        }
        let bad = SpectralParams { kappa: 0.6, ..gl2() };
        assert!(matches!(gt_shifted(&bad), Err(Error::KappaOutOfRange { .. })));
        assert!(matches!(whittaker_vectors(&gt_shifted(&gl3()).unwrap()), Err(Error::NoPrintedVector(_))));
    }

    #[test]
    fn opposite_relations() {
        let p = gl3();
        let rep = check_opposite_relations(&gg_modified(&p, false).unwrap(), &gg_modified_primed(&p).unwrap(), 9).unwrap();
        assert!(rep.rel_residual < 1e-11, "{}", rep.rel_residual);
        let rep = check_opposite_relations(&gt_realization(&p).unwrap(), &gt_primed(&p).unwrap(), 9).unwrap();
        assert!(rep.rel_residual < 1e-11, "{}", rep.rel_residual);
    }

    #[test]
    fn gg_examples() {
        let p = gl2();
        let r = gg_realization(&p).unwrap();
        let cc = c(0.7, 0.0);
        let f = move |v: &[C]| (cc * v[0]).exp();
        let t = [c(0.3, 0.0)];
        let got = r.get(1, 1).apply_at(&f, &t);
        assert!((got - (-i() * p.gamma[0] - cc) * f(&t)).norm() < 1e-10);
        let r3 = gg_realization(&gl3()).unwrap();
        let g = gaussian(vec![c(0.1, 0.2), c(-0.3, 0.1), c(0.2, -0.4)]);
        let v = [c(0.2, 0.0), c(0.5, 0.0), c(-0.4, 0.0)];
        let sum: C = (1..=3).map(|k| r3.get(k, k).apply_at(&|u| g.eval(u), &v)).sum();
        assert!((sum - (-i() * gl3().gamma_sum()) * g.eval(&v)).norm() < 1e-9);
    }

    #[test]
    fn differential_and_difference_forms_are_fourier_related() {
        // hat-E (F f) = F (E f) for Gaussian f, gl2
        let p = gl2();
        let gg = gg_realization(&p).unwrap();
        let ggm = gg_modified(&p, false).unwrap();
        let f = gaussian(vec![c(0.2, 0.1)]);
        let spec = QuadSpec { rel_tol: 1e-11, ..QuadSpec::default() };
        let ft = |h: &dyn Fn(C) -> C, s: C| {
            line(&|t| (-i() * s * t).exp() * h(t), 0.0, &spec).unwrap().value / (2.0 * PI).sqrt()
        };
        for k in [(1, 1), (2, 2), (1, 2), (2, 1)] {
            let e = gg.get(k.0, k.1);
            let ef = |t: C| e.apply_at(&|u| f.eval(u), &[t]);
            for s in [c(0.3, 0.0), c(-0.7, 0.0)] {
                let lhs = ggm.get(k.0, k.1).apply_at(&|u: &[C]| ft(&|t| f.eval(&[t]), u[0]), &[s]);
                let rhs = ft(&ef, s);
                assert!((lhs - rhs).norm() / rhs.norm() < 1e-6, "{k:?}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn gt_duality_pairing() {
        // <E^v f1, f2> = -<f1, E f2> with <a, b> = int mu conj(a) b
        let p = gl2();
        let (e, ev) = (gt_realization(&p).unwrap(), gt_dual(&p).unwrap());
        let f1 = gaussian(vec![c(0.3, 0.4)]);
        let f2 = gaussian(vec![c(-0.2, -0.3)]);
        let spec = QuadSpec::default();
        for k in [(1, 1), (2, 2), (1, 2), (2, 1)] {
            let a = line(&|t| ev.get(k.0, k.1).apply_at(&|u| f1.eval(u), &[t]).conj() * f2.eval(&[t]), 0.0, &spec).unwrap().value;
            let b = line(&|t| f1.eval(&[t]).conj() * e.get(k.0, k.1).apply_at(&|u| f2.eval(u), &[t]), 0.0, &spec).unwrap().value;
            assert!((a + b).norm() < 1e-7 * a.norm().max(1.0), "{k:?}");
        }
    }
}
