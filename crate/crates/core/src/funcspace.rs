//! Analytic function handles and operators built from imaginary shifts
//! and first-order derivatives.

use crate::cgamma::C;
use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

pub type EvalFn = Arc<dyn Fn(&[C]) -> C + Send + Sync>;

/// A function on C^arity with an admissible band of imaginary parts per axis.
#[derive(Clone)]
pub struct AnalyticFn {
    pub arity: usize,
    eval: EvalFn,
    pub strip: Vec<(f64, f64)>,
}

impl fmt::Debug for AnalyticFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "AnalyticFn(arity={}, strip={:?})", self.arity, self.strip)
    }
}

impl AnalyticFn {
    pub fn new(arity: usize, f: impl Fn(&[C]) -> C + Send + Sync + 'static) -> Self {
        AnalyticFn { arity, eval: Arc::new(f), strip: vec![(f64::NEG_INFINITY, f64::INFINITY); arity] }
    }

    pub fn univariate(f: impl Fn(C) -> C + Send + Sync + 'static) -> Self {
        AnalyticFn::new(1, move |v: &[C]| f(v[0]))
    }

    pub fn constant(arity: usize, value: C) -> Self {
        AnalyticFn::new(arity, move |_: &[C]| value)
    }

    pub fn with_strip(mut self, strip: Vec<(f64, f64)>) -> Self {
        assert_eq!(strip.len(), self.arity);
        self.strip = strip;
        self
    }

    #[inline]
    pub fn eval(&self, v: &[C]) -> C {
        (self.eval)(v)
    }

    pub fn try_eval(&self, v: &[C]) -> Result<C> {
        if v.len() != self.arity {
            return Err(Error::ArityMismatch(self.arity, v.len()));
        }
        for (k, (z, (lo, hi))) in v.iter().zip(&self.strip).enumerate() {
            if z.im < lo - 1e-12 || z.im > hi + 1e-12 {
                return Err(Error::StripExhausted(k));
            }
        }
        Ok(self.eval(v))
    }

    pub fn eval_fn(&self) -> EvalFn {
        self.eval.clone()
    }

    pub fn mul(&self, other: &AnalyticFn) -> AnalyticFn {
        let (a, b) = (self.eval.clone(), other.eval.clone());
        let strip = self.strip.iter().zip(&other.strip).map(|(x, y)| (x.0.max(y.0), x.1.min(y.1))).collect();
        AnalyticFn { arity: self.arity, eval: Arc::new(move |v: &[C]| a(v) * b(v)), strip }
    }
}

/// Shift vectors count units of -i: component h_k means v_k -> v_k - i h_k.
pub type Shift = Vec<i32>;

fn shifted(v: &[C], h: &[i32]) -> Vec<C> {
    v.iter().zip(h).map(|(z, &k)| C::new(z.re, z.im - k as f64)).collect()
}

#[derive(Clone)]
pub struct ShiftTerm {
    pub coeff: AnalyticFn,
    pub shift: Shift,
}

/// Finite sum of coefficient * shift terms.
#[derive(Clone)]
pub struct ShiftOp {
    pub arity: usize,
    pub terms: Vec<ShiftTerm>,
}

impl fmt::Debug for ShiftOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let shifts: Vec<&Shift> = self.terms.iter().map(|t| &t.shift).collect();
        write!(f, "ShiftOp(arity={}, shifts={:?})", self.arity, shifts)
    }
}

impl ShiftOp {
    pub fn zero(arity: usize) -> Self {
        ShiftOp { arity, terms: Vec::new() }
    }

    pub fn identity(arity: usize) -> Self {
        ShiftOp::term(arity, vec![0; arity], |_| C::new(1.0, 0.0))
    }

    pub fn term(arity: usize, shift: Shift, coeff: impl Fn(&[C]) -> C + Send + Sync + 'static) -> Self {
        assert_eq!(shift.len(), arity);
        ShiftOp { arity, terms: vec![ShiftTerm { coeff: AnalyticFn::new(arity, coeff), shift }] }
    }

    pub fn mul(arity: usize, coeff: impl Fn(&[C]) -> C + Send + Sync + 'static) -> Self {
        ShiftOp::term(arity, vec![0; arity], coeff)
    }

    pub fn add(&self, other: &ShiftOp) -> Result<ShiftOp> {
        if self.arity != other.arity {
            return Err(Error::ArityMismatch(self.arity, other.arity));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(ShiftOp { arity: self.arity, terms }.canonical())
    }

    pub fn scale(&self, s: C) -> ShiftOp {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = t.coeff.eval_fn();
                ShiftTerm { coeff: AnalyticFn::new(self.arity, move |v: &[C]| f(v) * s), shift: t.shift.clone() }
            })
            .collect();
        ShiftOp { arity: self.arity, terms }
    }

    pub fn sub(&self, other: &ShiftOp) -> Result<ShiftOp> {
        self.add(&other.scale(C::new(-1.0, 0.0)))
    }

    /// Merges terms with equal shifts and orders terms by shift vector.
    pub fn canonical(mut self) -> ShiftOp {
        self.terms.sort_by(|a, b| a.shift.cmp(&b.shift));
        let mut out: Vec<ShiftTerm> = Vec::new();
        for t in self.terms {
            match out.last_mut() {
                Some(last) if last.shift == t.shift => {
                    let (f, g) = (last.coeff.eval_fn(), t.coeff.eval_fn());
                    last.coeff = AnalyticFn::new(self.arity, move |v: &[C]| f(v) + g(v));
                }
                _ => out.push(t),
            }
        }
        ShiftOp { arity: self.arity, terms: out }
    }

    /// (op f)(v) evaluated directly.
    pub fn apply_at(&self, f: &dyn Fn(&[C]) -> C, v: &[C]) -> C {
        let mut s = C::new(0.0, 0.0);
        for t in &self.terms {
            s += t.coeff.eval(v) * f(&shifted(v, &t.shift));
        }
        s
    }

    /// Coefficients evaluated at v + delta, shifts unchanged.
    pub fn argument_shift(&self, delta: &[C]) -> ShiftOp {
        let delta = delta.to_vec();
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = t.coeff.eval_fn();
                let d = delta.clone();
                let coeff = AnalyticFn::new(self.arity, move |v: &[C]| {
                    let w: Vec<C> = v.iter().zip(&d).map(|(a, b)| a + b).collect();
                    f(&w)
                });
                ShiftTerm { coeff, shift: t.shift.clone() }
            })
            .collect();
        ShiftOp { arity: self.arity, terms }
    }

    /// mu * op * mu^{-1}.
    pub fn conjugate(&self, mu: &AnalyticFn) -> ShiftOp {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let (f, m, h) = (t.coeff.eval_fn(), mu.eval_fn(), t.shift.clone());
                let coeff = AnalyticFn::new(self.arity, move |v: &[C]| f(v) * m(v) / m(&shifted(v, &h)));
                ShiftTerm { coeff, shift: t.shift.clone() }
            })
            .collect();
        ShiftOp { arity: self.arity, terms }
    }

    /// Transpose with respect to the bilinear pairing: c(v) T_h -> c(v + i h) T_{-h}.
    pub fn transpose(&self) -> ShiftOp {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let (f, h) = (t.coeff.eval_fn(), t.shift.clone());
                let neg: Shift = h.iter().map(|k| -k).collect();
                let coeff = AnalyticFn::new(self.arity, move |v: &[C]| f(&shifted(v, &h.iter().map(|k| -k).collect::<Vec<_>>())));
                ShiftTerm { coeff, shift: neg }
            })
            .collect();
        ShiftOp { arity: self.arity, terms }.canonical()
    }

    /// Embeds into a larger variable set, acting on axes offset..offset+arity.
    pub fn embed(&self, total: usize, offset: usize) -> ShiftOp {
        let n = self.arity;
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let f = t.coeff.eval_fn();
                let coeff = AnalyticFn::new(total, move |v: &[C]| f(&v[offset..offset + n]));
                let mut shift = vec![0; total];
                shift[offset..offset + n].copy_from_slice(&t.shift);
                ShiftTerm { coeff, shift }
            })
            .collect();
        ShiftOp { arity: total, terms }
    }
}

pub fn shift_apply(op: &ShiftOp, f: &AnalyticFn) -> Result<AnalyticFn> {
    if op.arity != f.arity {
        return Err(Error::ArityMismatch(op.arity, f.arity));
    }
    let mut strip = f.strip.clone();
    for t in &op.terms {
        for (k, &h) in t.shift.iter().enumerate() {
            strip[k].0 = strip[k].0.max(f.strip[k].0 + h as f64);
            strip[k].1 = strip[k].1.min(f.strip[k].1 + h as f64);
        }
    }
    if let Some(k) = strip.iter().position(|(lo, hi)| lo > hi) {
        return Err(Error::StripExhausted(k));
    }
    let op = op.clone();
    let g = f.eval_fn();
    Ok(AnalyticFn::new(f.arity, move |v: &[C]| op.apply_at(&*g, v)).with_strip(strip))
}

/// Composition a∘b: c_a(v) c_b(v - i h_a) T_{h_a + h_b}.
pub fn shift_compose(a: &ShiftOp, b: &ShiftOp) -> Result<ShiftOp> {
    if a.arity != b.arity {
        return Err(Error::ArityMismatch(a.arity, b.arity));
    }
    let mut terms = Vec::with_capacity(a.terms.len() * b.terms.len());
    for ta in &a.terms {
        for tb in &b.terms {
            let (fa, fb, ha) = (ta.coeff.eval_fn(), tb.coeff.eval_fn(), ta.shift.clone());
            let coeff = AnalyticFn::new(a.arity, move |v: &[C]| fa(v) * fb(&shifted(v, &ha)));
            let shift = ta.shift.iter().zip(&tb.shift).map(|(x, y)| x + y).collect();
            terms.push(ShiftTerm { coeff, shift });
        }
    }
    Ok(ShiftOp { arity: a.arity, terms }.canonical())
}

pub fn commutator(a: &ShiftOp, b: &ShiftOp) -> Result<ShiftOp> {
    shift_compose(a, b)?.sub(&shift_compose(b, a)?)
}

/// Sum of coeff * d/dv_axis plus a multiplication term.
#[derive(Clone)]
pub struct DiffOp {
    pub arity: usize,
    pub first: Vec<(AnalyticFn, usize)>,
    pub scalar: AnalyticFn,
}

impl fmt::Debug for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let axes: Vec<usize> = self.first.iter().map(|t| t.1).collect();
        write!(f, "DiffOp(arity={}, axes={:?})", self.arity, axes)
    }
}

impl DiffOp {
    pub fn new(arity: usize, scalar: impl Fn(&[C]) -> C + Send + Sync + 'static) -> Self {
        DiffOp { arity, first: Vec::new(), scalar: AnalyticFn::new(arity, scalar) }
    }

    pub fn with_derivative(mut self, axis: usize, coeff: impl Fn(&[C]) -> C + Send + Sync + 'static) -> Self {
        assert!(axis < self.arity);
        self.first.push((AnalyticFn::new(self.arity, coeff), axis));
        self
    }

    pub fn apply_at(&self, f: &dyn Fn(&[C]) -> C, v: &[C], h: f64) -> C {
        let mut s = self.scalar.eval(v) * f(v);
        for (c, axis) in &self.first {
            s += c.eval(v) * richardson(f, v, *axis, h);
        }
        s
    }
}

fn central(f: &dyn Fn(&[C]) -> C, v: &[C], axis: usize, h: f64) -> C {
    let mut p = v.to_vec();
    let mut m = v.to_vec();
    p[axis] += h;
    m[axis] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

fn richardson(f: &dyn Fn(&[C]) -> C, v: &[C], axis: usize, h: f64) -> C {
    (central(f, v, axis, h / 2.0) * 4.0 - central(f, v, axis, h)) / 3.0
}

pub fn diff_apply(op: &DiffOp, f: &AnalyticFn, h: f64) -> Result<AnalyticFn> {
    if !(1e-6..=1e-2).contains(&h) {
        return Err(Error::StepInvalid(h));
    }
    if op.arity != f.arity {
        return Err(Error::ArityMismatch(op.arity, f.arity));
    }
    let op = op.clone();
    let g = f.eval_fn();
    Ok(AnalyticFn::new(f.arity, move |v: &[C]| op.apply_at(&*g, v, h)))
}

/// Gaussian test function exp(-sum (v_k - c_k)^2 / 2).
pub fn gaussian(centers: Vec<C>) -> AnalyticFn {
    AnalyticFn::new(centers.len(), move |v: &[C]| {
        let mut s = C::new(0.0, 0.0);
        for (z, c) in v.iter().zip(&centers) {
            s += (z - c) * (z - c);
        }
        (-s * 0.5).exp()
    })
}

/// Relative size of |a - b| against the larger magnitude.
pub fn rel_diff(a: C, b: C) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cgamma::c;
    use std::f64::consts::PI;

    fn i() -> C {
        C::i()
    }

    #[test]
    fn shift_application() {
        let f = AnalyticFn::univariate(|t| (t * PI / 2.0).exp());
        let op = ShiftOp::term(1, vec![1], |_| c(1.0, 0.0));
        let g = shift_apply(&op, &f).unwrap();
        let t = c(0.3, 0.1);
        assert!((g.eval(&[t]) - (-i()) * f.eval(&[t])).norm() < 1e-14);
        let id = shift_apply(&ShiftOp::identity(1), &f).unwrap();
        assert_eq!(id.eval(&[t]), f.eval(&[t]));
        let narrow = f.clone().with_strip(vec![(-0.5, 0.5)]);
        let spread = ShiftOp::identity(1).add(&ShiftOp::term(1, vec![2], |_| c(1.0, 0.0))).unwrap();
        assert!(matches!(shift_apply(&spread, &narrow), Err(Error::StripExhausted(0))));
        let band = f.with_strip(vec![(-2.0, 2.0)]);
        let g = shift_apply(&op, &band).unwrap();
        assert_eq!(g.strip, vec![(-1.0, 2.0)]);
    }

    #[test]
    fn composition() {
        let down = ShiftOp::term(1, vec![1], |_| c(1.0, 0.0));
        let up = ShiftOp::term(1, vec![-1], |_| c(1.0, 0.0));
        let id = shift_compose(&down, &up).unwrap();
        assert_eq!(id.terms.len(), 1);
        assert_eq!(id.terms[0].shift, vec![0]);
        let tau = ShiftOp::mul(1, |v| v[0]);
        let comm = commutator(&tau, &down).unwrap();
        let f = |v: &[C]| v[0];
        let at0 = comm.apply_at(&f, &[c(0.0, 0.0)]);
        let expect = down.scale(i()).apply_at(&f, &[c(0.0, 0.0)]);
        assert!((at0 - expect).norm() < 1e-15);
        let zero = shift_compose(&ShiftOp::zero(1), &down).unwrap();
        assert!(zero.terms.is_empty());
    }

    #[test]
    fn action_is_associative() {
        let a = ShiftOp::term(2, vec![1, 0], |v| v[0] * v[1] + 1.0).add(&ShiftOp::mul(2, |v| v[1].exp())).unwrap();
        let b = ShiftOp::term(2, vec![0, -1], |v| v[0] - 2.0 * v[1]).add(&ShiftOp::term(2, vec![1, 1], |v| v[0].sin())).unwrap();
        let f = gaussian(vec![c(0.2, 0.5), c(-0.3, -0.4)]);
        let ab = shift_apply(&shift_compose(&a, &b).unwrap(), &f).unwrap();
        let a_b = shift_apply(&a, &shift_apply(&b, &f).unwrap()).unwrap();
        for v in [[c(0.1, 0.2), c(0.7, -0.1)], [c(-1.0, 0.0), c(0.4, 0.3)]] {
            assert!(rel_diff(ab.eval(&v), a_b.eval(&v)) < 1e-12);
        }
    }

    #[test]
    fn canonical_merges_in_any_order() {
        let a = ShiftOp::term(1, vec![1], |v| v[0]);
        let b = ShiftOp::term(1, vec![1], |_| c(2.0, 0.0));
        let m = ShiftOp::mul(1, |v| v[0] * v[0]);
        let x = a.add(&b).unwrap().add(&m).unwrap();
        let y = m.add(&b).unwrap().add(&a).unwrap();
        assert_eq!(x.terms.len(), 2);
        let f = gaussian(vec![c(0.1, 0.3)]);
        let v = [c(0.4, 0.2)];
        assert!(rel_diff(x.apply_at(&|w| f.eval(w), &v), y.apply_at(&|w| f.eval(w), &v)) < 1e-15);
    }

    #[test]
    fn finite_differences() {
        let d = DiffOp::new(1, |_| c(0.0, 0.0)).with_derivative(0, |_| c(1.0, 0.0));
        let f = AnalyticFn::univariate(|t| (t * 2.0).exp());
        let g = diff_apply(&d, &f, 1e-3).unwrap();
        assert!((g.eval(&[c(0.0, 0.0)]) - c(2.0, 0.0)).norm() < 1e-9);
        assert!(matches!(diff_apply(&d, &f, 0.5), Err(Error::StepInvalid(_))));
        let z = DiffOp::new(1, |_| c(0.0, 0.0)).with_derivative(0, |_| c(0.0, 0.0));
        assert_eq!(diff_apply(&z, &f, 1e-3).unwrap().eval(&[c(0.3, 0.0)]), c(0.0, 0.0));
        // observed order between h and h/2
        let s = AnalyticFn::univariate(|t| (t * 1.3).sin() * (t * 0.7).exp());
        let x = c(0.4, 0.0);
        let exact = (x * 1.3).cos() * 1.3 * (x * 0.7).exp() + (x * 1.3).sin() * 0.7 * (x * 0.7).exp();
        let e1 = (diff_apply(&d, &s, 8e-2 / 8.0).unwrap().eval(&[x]) - exact).norm();
        let e2 = (diff_apply(&d, &s, 4e-2 / 8.0).unwrap().eval(&[x]) - exact).norm();
        assert!((e1 / e2).log2() >= 3.5, "order {}", (e1 / e2).log2());
    }
}
