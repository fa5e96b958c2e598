//! Complex Gamma function via upward recursion and a Stirling series.

use crate::error::{Error, Result};
use num_complex::Complex64;

pub type C = Complex64;

const POLE_TOL: f64 = 1e-12;
const SHIFT_TARGET: f64 = 10.0;
const LN_OVERFLOW: f64 = 709.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

// B_{2k} / (2k (2k-1)) for k = 1..8
const STIRLING: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
];

pub fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

pub fn is_pole(z: C) -> bool {
    if z.im.abs() > POLE_TOL || z.re > POLE_TOL {
        return false;
    }
    (z.re - z.re.round()).abs() < POLE_TOL
}

/// Principal branch of log Gamma.
pub fn log_gamma(z: C) -> Result<C> {
    if !z.re.is_finite() || !z.im.is_finite() || is_pole(z) {
        return Err(Error::Pole { re: z.re, im: z.im });
    }
    let mut w = z;
    let mut acc = C::new(0.0, 0.0);
    while w.re < SHIFT_TARGET {
        acc += w.ln();
        w += 1.0;
    }
    let inv = w.inv();
    let inv2 = inv * inv;
    let mut series = C::new(0.0, 0.0);
    let mut p = inv;
    for coef in STIRLING {
        series += p * coef;
        p *= inv2;
    }
    Ok((w - 0.5) * w.ln() - w + HALF_LN_2PI + series - acc)
}

pub fn gamma(z: C) -> Result<C> {
    let l = log_gamma(z)?;
    if l.re > LN_OVERFLOW {
        return Err(Error::Range(l.re));
    }
    Ok(l.exp())
}

/// 1/Gamma, entire; zero at the poles of Gamma.
pub fn rgamma(z: C) -> C {
    match log_gamma(z) {
        Ok(l) => (-l).exp(),
        Err(_) => C::new(0.0, 0.0),
    }
}

/// Sum of log Gamma over the numerator arguments minus the denominator ones.
pub fn log_gamma_ratio(num: &[C], den: &[C]) -> Result<C> {
    let mut s = C::new(0.0, 0.0);
    for &z in num {
        s += log_gamma(z)?;
    }
    for &z in den {
        s -= log_gamma(z)?;
    }
    Ok(s)
}

/// Stirling envelope of |Gamma(sigma + i t)|.
pub fn stirling_envelope(sigma: f64, t: f64) -> Result<f64> {
    if t.abs() < 5.0 {
        return Err(Error::Domain(format!("|t|={} < 5", t.abs())));
    }
    Ok((2.0 * std::f64::consts::PI).sqrt()
        * (-std::f64::consts::PI * t.abs() / 2.0).exp()
        * t.abs().powf(sigma - 0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn rel(a: C, b: C) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn small_values() {
        assert!(log_gamma(c(1.0, 0.0)).unwrap().norm() < 1e-15);
        let l = log_gamma(c(0.5, 0.0)).unwrap();
        assert!((l.re - 0.572_364_942_924_700_1).abs() < 1e-14 && l.im.abs() < 1e-15);
        let g = gamma(c(1.0, 1.0)).unwrap();
        assert!((g.norm() - (PI / PI.sinh()).sqrt()).abs() < 1e-14);
        assert!(rel(gamma(c(3.0, 0.0)).unwrap(), c(2.0, 0.0)) < 1e-14);
        assert!(rel(gamma(c(-0.5, 0.0)).unwrap(), c(-2.0 * PI.sqrt(), 0.0)) < 1e-14);
        let h = gamma(c(0.5, 0.0)).unwrap() * gamma(c(0.5, -0.0)).unwrap();
        assert!(rel(h, c(PI, 0.0)) < 1e-14);
    }

    #[test]
    fn poles_and_reciprocal() {
        assert!(matches!(log_gamma(c(0.0, 0.0)), Err(Error::Pole { .. })));
        assert!(matches!(gamma(c(-3.0, 0.0)), Err(Error::Pole { .. })));
        assert_eq!(rgamma(c(-2.0, 0.0)), c(0.0, 0.0));
        assert!(gamma(c(-2.5, 1e-9)).is_ok());
        assert!(matches!(gamma(c(200.0, 0.0)), Err(Error::Range(_))));
    }

    #[test]
    fn recursion_reflection_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let z = c(rng.gen_range(-30.0..30.0), rng.gen_range(-30.0..30.0));
            if (z.re - z.re.round()).abs() < 1e-3 && z.im.abs() < 1e-3 {
                continue;
            }
            let lhs = log_gamma(z + 1.0).unwrap();
            let rhs = log_gamma(z).unwrap() + z.ln();
            assert!(rel((lhs - rhs).exp(), c(1.0, 0.0)) < 1e-12, "{z}");
        }
        for _ in 0..2000 {
            let z = c(rng.gen_range(-0.99..0.99), rng.gen_range(-3.0..3.0));
            let p = gamma(z).unwrap() * gamma(1.0 - z).unwrap() * (z * PI).sin() / PI;
            assert!(rel(p, c(1.0, 0.0)) < 1e-11);
            let g = gamma(z).unwrap();
            assert!(rel(gamma(z.conj()).unwrap(), g.conj()) < 1e-14);
        }
        for k in 0..=1000 {
            let t = -50.0 + 0.1 * k as f64;
            let g = gamma(c(0.5, t)).unwrap();
            assert!((g.norm_sqr() * (PI * t).cosh() / PI - 1.0).abs() < 1e-11, "{t}");
        }
    }

    #[test]
    fn large_imaginary_part() {
        // |Gamma(1+it)|^2 = pi t / sinh(pi t), compared in log form
        for &t in &[50.0, 120.0, 199.0] {
            let l = log_gamma(c(1.0, t)).unwrap().re;
            let exact = 0.5 * ((PI * t).ln() - (PI * t) - (1.0 - (-2.0 * PI * t).exp()).ln() + 2f64.ln());
            assert!((l - exact).abs() < 1e-12, "{t}: {l} vs {exact}");
        }
    }

    #[test]
    fn envelope() {
        let e = stirling_envelope(0.5, 20.0).unwrap();
        assert!((e - (2.0 * PI).sqrt() * (-10.0 * PI).exp()).abs() / e < 1e-14);
        let r = gamma(c(1.0, 30.0)).unwrap().norm() / stirling_envelope(1.0, 30.0).unwrap();
        assert!((0.5..2.0).contains(&r));
        let r = gamma(c(0.5, 200.0)).unwrap().norm() / stirling_envelope(0.5, 200.0).unwrap();
        assert!((r - 1.0).abs() < 1e-3);
        assert!(matches!(stirling_envelope(0.5, 4.0), Err(Error::Domain(_))));
    }
}
