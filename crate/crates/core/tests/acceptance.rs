//! Acceptance run: one PASS/FAIL line per criterion. Closed forms are recomputed
//! here with a separate Lanczos Gamma and a trapezoidal Bessel K.

use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::time::Instant;
use whitlab::cli::{run_command, Cli};
use whitlab::identities::{barnes_first, three_gamma, gustafson_n1, residue_estimate};
use whitlab::intertwiners::{
    check_kernel_scalar_identity, check_bl_whittaker, check_br_whittaker, check_gl2_kernel_relations, check_gl2_whittaker_images,
    fixedpoint_inner_integral, gl3_bldag_br_fixedpoint, ScalarIdentity,
};
use whitlab::quadrature::{line, QuadSpec};
use whitlab::realizations::{
    check_gl_commutations, check_opposite_relations, check_whittaker_defining, gg_modified, gg_modified_primed, gg_realization,
    gt_modified, gt_primed, gt_realization, gt_shifted, whittaker_vectors, Realization, SpectralParams,
};
use whitlab::toda::{eigen_ratio_scan, evaluator, DEFAULT_STEP};
use whitlab::whittaker::{gl2_mb_integrand, phi_hat_mb_integral, psi, Mb3Table, Rep, TorusPoint};
use clap::Parser;

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

fn rel(a: C, b: C) -> f64 {
    (a - b).norm() / b.norm()
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn gamma(z: C) -> C {
    if z.re < 0.5 {
        return PI / ((PI * z).sin() * gamma(1.0 - z));
    }
    let z = z - 1.0;
    let mut x = c(LANCZOS[0], 0.0);
    for (k, &p) in LANCZOS.iter().enumerate().skip(1) {
        x += p / (z + k as f64);
    }
    let t = z + 7.5;
    (2.0 * PI).sqrt() * t.powc(z + 0.5) * (-t).exp() * x
}

/// K_nu(z) = int_0^inf e^{-z cosh t} cosh(nu t) dt by the trapezoidal rule.
fn bessel_k(nu: C, z: f64) -> C {
    let h = 0.02;
    let mut s = 0.5 * (-z).exp() * c(1.0, 0.0);
    let mut k = 1;
    loop {
        let t = k as f64 * h;
        let term = (-z * t.cosh()).exp() * (nu * t).cosh();
        s += term;
        if term.norm() < 1e-18 && t > 1.0 {
            break;
        }
        k += 1;
    }
    s * h
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn report(n: usize, title: &str, t0: Instant, limit_s: f64, o: Outcome, all: &mut bool) {
    let secs = t0.elapsed().as_secs_f64();
    let ok = o.ok && secs < limit_s;
    *all &= ok;
    println!("{} {n:>2} {title}: {} [{secs:.2} s of {limit_s} s]", if ok { "PASS" } else { "FAIL" }, o.detail);
}

fn worst(rs: &[f64]) -> f64 {
    rs.iter().cloned().fold(0.0, |a, b| if b.is_nan() { f64::INFINITY } else { a.max(b) })
}

fn draw(rng: &mut ChaCha8Rng, re: (f64, f64), im: f64) -> C {
    c(rng.gen_range(re.0..re.1), rng.gen_range(-im..im))
}

fn criterion_1() -> Outcome {
    let spec = QuadSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let (mut errs, mut slowest) = (Vec::new(), 0.0f64);
    for _ in 0..20 {
        let a = [draw(&mut rng, (0.1, 1.2), 0.5), draw(&mut rng, (0.1, 1.2), 0.5)];
        let b = [draw(&mut rng, (0.1, 1.2), 0.5), draw(&mut rng, (0.1, 1.2), 0.5)];
        let t = Instant::now();
        let r = barnes_first(a, b, &spec);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let oracle = gamma(a[0] + b[0]) * gamma(a[0] + b[1]) * gamma(a[1] + b[0]) * gamma(a[1] + b[1]) / gamma(a[0] + a[1] + b[0] + b[1]);
        errs.push(r.map_or(f64::INFINITY, |r| rel(r.lhs, oracle)));
    }
    let w = worst(&errs);
    Outcome { ok: w < 1e-8 && slowest < 1.0, detail: format!("20 draws, worst rel {w:.2e}, slowest draw {slowest:.3} s") }
}

fn criterion_2() -> Outcome {
    let spec = QuadSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let (mut eg, mut eo, mut slowest) = (Vec::new(), Vec::new(), 0.0f64);
    for _ in 0..10 {
        let a: Vec<C> = (0..4).map(|_| draw(&mut rng, (0.15, 1.0), 0.5)).collect();
        let t = Instant::now();
        let r = gustafson_n1([a[0], a[1], a[2], a[3]], &spec);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let mut oracle = 2.0 / gamma(a.iter().sum());
        for i in 0..4 {
            for j in i + 1..4 {
                oracle *= gamma(a[i] + a[j]);
            }
        }
        eg.push(r.map_or(f64::INFINITY, |r| rel(r.lhs, oracle)));
        let b: Vec<C> = (0..3).map(|_| draw(&mut rng, (0.15, 1.0), 0.5)).collect();
        let t = Instant::now();
        let r = three_gamma([b[0], b[1], b[2]], &spec);
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let oracle = gamma(b[0] + b[1]) * gamma(b[0] + b[2]) * gamma(b[1] + b[2]);
        eo.push(r.map_or(f64::INFINITY, |r| rel(r.lhs, oracle)));
    }
    let (wg, wo) = (worst(&eg), worst(&eo));
    Outcome {
        ok: wg < 1e-7 && wo < 1e-7 && slowest < 2.0,
        detail: format!("10+10 draws, worst rel gustafson {wg:.2e}, three-gamma {wo:.2e}, slowest draw {slowest:.3} s"),
    }
}

const REPS: [Rep; 3] = [Rep::MB, Rep::Givental, Rep::Modified];

fn triple(p: &SpectralParams, x: &[f64], spec: &QuadSpec) -> Result<Vec<C>, String> {
    REPS.iter().map(|&r| psi(p, &TorusPoint::new(x), r, spec).map(|v| v.value).map_err(|e| e.to_string())).collect()
}

fn pairwise(v: &[C]) -> f64 {
    let mut w: f64 = 0.0;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            w = w.max(rel(v[i], v[j]));
        }
    }
    w
}

fn criterion_3() -> Outcome {
    let spec = QuadSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let (mut pw, mut orc) = (Vec::new(), Vec::new());
    for _ in 0..9 {
        let g = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let x = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let p = SpectralParams::from_gamma(&[c(g[0], 0.0), c(g[1], 0.0)], 0.0).unwrap();
        match triple(&p, &x, &spec) {
            Ok(v) => {
                let k = bessel_k(c(0.0, g[0] - g[1]), 2.0 * ((x[0] - x[1]) / 2.0).exp());
                let oracle = 2.0 * (c(0.0, g[0] + g[1]) * (x[0] + x[1]) / 2.0).exp() * k;
                pw.push(pairwise(&v));
                orc.push(worst(&v.iter().map(|z| rel(*z, oracle)).collect::<Vec<_>>()));
            }
            Err(e) => return Outcome { ok: false, detail: e },
        }
    }
    let (a, b) = (worst(&pw), worst(&orc));
    Outcome { ok: a < 1e-8 && b < 1e-8, detail: format!("9 samples, pairwise rel {a:.2e}, vs Bessel oracle {b:.2e}") }
}

fn criterion_4() -> Outcome {
    let spec = QuadSpec { rel_tol: 1e-9, ..QuadSpec::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(45);
    let mut pw = Vec::new();
    for _ in 0..3 {
        let l: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-0.5..0.5)).collect();
        let p = SpectralParams::from_lambda(&l, 0.2, 0.0).unwrap();
        match triple(&p, &x, &spec) {
            Ok(v) => pw.push(pairwise(&v)),
            Err(e) => return Outcome { ok: false, detail: e },
        }
    }
    let w = worst(&pw);
    Outcome { ok: w < 1e-6, detail: format!("3 samples, pairwise rel {w:.2e}") }
}

fn criterion_5() -> Outcome {
    let spec = QuadSpec::default();
    let g = [c(0.4, 0.0), c(0.1, 0.0), c(-0.5, 0.0)];
    let p = SpectralParams::from_gamma(&g, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(46);
    let mut errs = Vec::new();
    for _ in 0..10 {
        let q = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let i = c(0.0, 1.0);
        let mut oracle = 1.0 / (2.0 * PI * gamma(i * (g[0] + g[1] + g[2] - q[0] - q[1]) + 2.0));
        for a in 0..3 {
            oracle *= gamma(i * (g[a] - q[0]) + 1.0);
            for b in a + 1..3 {
                oracle *= gamma(i * (g[a] + g[b] - q[1]) + 1.0);
            }
        }
        errs.push(phi_hat_mb_integral(&p, &q, &spec).map_or(f64::INFINITY, |r| rel(r.value, oracle)));
    }
    let w = worst(&errs);
    Outcome { ok: w < 1e-7, detail: format!("10 p-samples, worst rel {w:.2e}") }
}

fn gl2_params() -> SpectralParams {
    SpectralParams::from_lambda(&[0.3, -0.2], 0.2, 0.1).unwrap()
}

fn gl3_params() -> SpectralParams {
    SpectralParams::from_lambda(&[0.2, -0.1, 0.3], 0.2, 0.1).unwrap()
}

fn residual(r: whitlab::Result<whitlab::identities::IdentityReport>) -> f64 {
    r.map_or(f64::INFINITY, |r| r.rel_residual)
}

fn criterion_6() -> Outcome {
    let mut exact = Vec::new();
    let mut fd = Vec::new();
    for p in [gl2_params(), gl3_params()] {
        let rs: Vec<Realization> = vec![gt_realization(&p).unwrap(), gg_modified(&p, false).unwrap()];
        for r in rs {
            exact.push(residual(whittaker_vectors(&r).and_then(|w| check_whittaker_defining(&r, &w, 6))));
        }
        let r = gg_realization(&p).unwrap();
        fd.push(residual(whittaker_vectors(&r).and_then(|w| check_whittaker_defining(&r, &w, 6))));
    }
    let r = gt_modified(&gl3_params()).unwrap();
    exact.push(residual(whittaker_vectors(&r).and_then(|w| check_whittaker_defining(&r, &w, 6))));
    let (a, b) = (worst(&exact), worst(&fd));
    Outcome { ok: a < 1e-10 && b < 1e-6, detail: format!("shift realizations {a:.2e}, differential realization {b:.2e}") }
}

fn criterion_7() -> Outcome {
    let mut comm = Vec::new();
    for p in [gl2_params(), gl3_params()] {
        for r in [gt_realization(&p), gg_modified(&p, false), gg_modified(&p, true)] {
            comm.push(residual(r.and_then(|r| check_gl_commutations(&r, 7))));
        }
    }
    for r in [gt_modified(&gl3_params()), gt_shifted(&gl3_params())] {
        comm.push(residual(r.and_then(|r| check_gl_commutations(&r, 7))));
    }
    let p = gl3_params();
    let opp = [
        residual(check_opposite_relations(&gt_realization(&p).unwrap(), &gt_primed(&p).unwrap(), 7)),
        residual(check_opposite_relations(&gg_modified(&p, false).unwrap(), &gg_modified_primed(&p).unwrap(), 7)),
    ];
    let diff = residual(check_gl_commutations(&gg_realization(&gl2_params()).unwrap(), 7));
    let (a, b) = (worst(&comm), worst(&opp));
    Outcome {
        ok: a < 1e-10 && b < 1e-10 && diff < 1e-6,
        detail: format!("commutators {a:.2e}, opposite relations {b:.2e}, differential realization {diff:.2e}"),
    }
}

fn criterion_8() -> Outcome {
    let spec = QuadSpec::default();
    let p = gl3_params();
    let mut rng = ChaCha8Rng::seed_from_u64(48);
    let mut t = || [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let br: Vec<f64> = (0..5).map(|_| residual(check_br_whittaker(&p, t(), &spec))).collect();
    let bl: Vec<f64> = (0..5).map(|_| residual(check_bl_whittaker(&p, t(), &spec))).collect();
    let mut fp = Vec::new();
    for _ in 0..3 {
        let s = t().map(|v| v / 2.0);
        fp.push(residual(gl3_bldag_br_fixedpoint(&p, s, &spec)));
        fp.push(residual(fixedpoint_inner_integral(&p, s, &spec)));
    }
    let q = gl2_params();
    let mut gl2 = Vec::new();
    for tau in [-1.7, -0.4, 0.0, 0.9, 1.6] {
        for batch in [check_gl2_whittaker_images(&q, tau, &spec), check_gl2_kernel_relations(&q, tau)] {
            match batch {
                Ok(v) => gl2.extend(v.iter().map(|r| r.rel_residual)),
                Err(_) => gl2.push(f64::INFINITY),
            }
        }
    }
    let (a, b, f, g) = (worst(&br), worst(&bl), worst(&fp), worst(&gl2));
    Outcome {
        ok: a < 1e-8 && b < 1e-8 && f < 1e-7 && g < 1e-11,
        detail: format!("B_R {a:.2e}, B_L {b:.2e}, fixed point {f:.2e}, gl2 kernels {g:.2e}"),
    }
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(49);
    let mut out = Vec::new();
    for (which, dim) in [(ScalarIdentity::Quadratic, 7), (ScalarIdentity::DividedDifference, 6)] {
        let mut errs = Vec::new();
        while errs.len() < 100 {
            let z: Vec<C> = (0..dim).map(|_| c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0))).collect();
            match check_kernel_scalar_identity(which, &z) {
                Err(whitlab::Error::DegenerateSample(_)) => continue,
                r => errs.push(residual(r)),
            }
        }
        out.push(worst(&errs));
    }
    Outcome { ok: out[0] < 1e-12 && out[1] < 1e-12, detail: format!("quadratic {:.2e}, divided difference {:.2e} over 100 samples each", out[0], out[1]) }
}

fn criterion_10() -> Outcome {
    let spec = QuadSpec::default();
    let p = SpectralParams::from_lambda(&[0.3, -0.2], 0.2, 0.0).unwrap();
    let g = p.gamma.clone();
    let mut adm = Vec::new();
    let mut jump = Vec::new();
    let mut est = Vec::new();
    for x in [[0.4, -0.3], [-0.6, 0.2], [0.0, 0.5]] {
        let f = gl2_mb_integrand(&p, x);
        let h = |z: C| f.eval(&[z]);
        let (q0, q1, q2) = match (line(&h, 0.0, &spec), line(&h, 0.25, &spec), line(&h, 0.35, &spec)) {
            (Ok(a), Ok(b), Ok(d)) => (a.value, b.value, d.value),
            _ => return Outcome { ok: false, detail: "quadrature failed".into() },
        };
        adm.push(rel(q1, q0));
        // only gamma_1 - i/2 (Im = -0.3) lies between R and R - 0.35 i
        let pole = g[0] - c(0.0, 0.5);
        let pre = (c(0.0, 1.0) * (g[0] + g[1]) * x[1] - (x[0] - x[1]) / 2.0).exp() / (2.0 * PI);
        let res = pre * c(0.0, 1.0) * gamma(c(0.0, 1.0) * (g[1] - pole) + 0.5) * (c(0.0, 1.0) * pole * (x[0] - x[1])).exp();
        let expected = -2.0 * PI * c(0.0, 1.0) * res;
        jump.push(rel(q0 - q2, expected));
        est.push(rel(residue_estimate(&h, pole), res));
    }
    let q = SpectralParams::from_lambda(&[0.2, -0.1, 0.3], 0.2, 0.0).unwrap();
    let spec3 = QuadSpec { rel_tol: 1e-9, ..QuadSpec::default() };
    let gl3 = match (Mb3Table::new(&q, &spec3), Mb3Table::shifted(&q, 0.25, &spec3)) {
        (Ok(t0), Ok(t1)) => worst(&[[0.3, -0.2], [-0.5, 0.4], [0.1, 0.9]].map(|u| rel(t1.phi(u).value, t0.phi(u).value))),
        _ => f64::INFINITY,
    };
    let inadmissible = Mb3Table::shifted(&q, 0.6, &spec3).is_err();
    let (a, j, e) = (worst(&adm), worst(&jump), worst(&est));
    Outcome {
        ok: a < 1e-8 && gl3 < 1e-8 && j < 1e-4 && e < 1e-4 && inadmissible,
        detail: format!("admissible gl2 {a:.2e}, gl3 {gl3:.2e}; jump vs residue {j:.2e}, residue estimate {e:.2e}"),
    }
}

fn criterion_11() -> Outcome {
    let spec = QuadSpec::default();
    let mut g2 = Vec::new();
    for a in [-0.8, 0.0, 0.8] {
        for b in [-0.5, 0.3, 1.0] {
            g2.push(TorusPoint::new(&[a, b]));
        }
    }
    let p = SpectralParams::from_gamma(&[c(0.5, 0.0), c(-0.5, 0.0)], 0.0).unwrap();
    let s2 = evaluator(&p, Rep::Givental, &spec).and_then(|f| eigen_ratio_scan(&*f, &g2, DEFAULT_STEP));
    let q = SpectralParams::from_gamma(&[c(0.2, 0.0), c(0.0, 0.0), c(-0.2, 0.0)], 0.0).unwrap();
    let g3: Vec<TorusPoint> = [[0.0, 0.0, 0.0], [0.3, 0.0, -0.3], [-0.2, 0.2, 0.0], [0.4, -0.1, 0.1], [0.0, 0.3, -0.2]]
        .iter()
        .map(|x| TorusPoint::new(x))
        .collect();
    let spec3 = QuadSpec { rel_tol: 1e-10, ..QuadSpec::default() };
    let s3 = evaluator(&q, Rep::MB, &spec3).and_then(|f| eigen_ratio_scan(&*f, &g3, DEFAULT_STEP));
    match (s2, s3) {
        (Ok(a), Ok(b)) => {
            let dev = (c(a.mean.0, a.mean.1) - c(0.25, 0.0)).norm();
            Outcome {
                ok: a.spread < 1e-5 && dev < 1e-5 && b.spread < 1e-4,
                detail: format!(
                    "gl2 spread {:.2e}, |mean - 0.25| {dev:.2e}; gl3 spread {:.2e}, mean {:.6}",
                    a.spread, b.spread, b.mean.0
                ),
            }
        }
        (a, b) => Outcome { ok: false, detail: format!("{:?} {:?}", a.err(), b.err()) },
    }
}

const SUITE: &[&str] = &[
    "identities --which all --samples 4",
    "eval --rep givental --ell 1 --gamma 0,0 --x 0,0",
    "eval --rep mb --ell 1 --gamma 0.2+0.1i,-0.3-0.1i --x 0.2,-0.1",
    "compare --ell 1 --samples 3",
    "compare --ell 2 --samples 1",
    "compare --ell 2 --fourier --samples 3",
    "intertwine --check br",
    "intertwine --check bl",
    "intertwine --check bldag-br --samples 1",
    "intertwine --check e21",
    "intertwine --check e23",
    "intertwine --check kernel-all --samples 2",
    "intertwine --check gl2-all",
    "toda --ell 1 --gamma 0.5,-0.5",
    "commutators --realization ggmod --ell 2",
    "whitvec --realization gt --ell 2",
    "contour --ell 1 --eps 0.2 --kappa 0.35",
];

fn suite_bytes() -> Result<String, String> {
    let mut out = String::new();
    for line in SUITE {
        let args = std::iter::once("whitlab").chain(line.split_whitespace()).chain(["--seed", "42"]);
        let cli = Cli::try_parse_from(args).map_err(|e| e.to_string())?;
        out += &run_command(&cli.command)?.to_json();
    }
    Ok(out)
}

fn criterion_12() -> Outcome {
    match (suite_bytes(), suite_bytes()) {
        (Ok(a), Ok(b)) => Outcome {
            ok: a == b && !a.is_empty(),
            detail: format!("{} commands, {} bytes per run, identical: {}", SUITE.len(), a.len(), a == b),
        },
        (a, b) => Outcome { ok: false, detail: format!("{:?} {:?}", a.err(), b.err()) },
    }
}

type Criterion = (&'static str, f64, fn() -> Outcome);

fn main() {
    let mut all = true;
    let criteria: [Criterion; 12] = [
        ("Barnes first lemma", 20.0, criterion_1),
        ("Gustafson and three-parameter identities", 40.0, criterion_2),
        ("gl2 triple equality", 5.0, criterion_3),
        ("gl3 triple equality", 600.0, criterion_4),
        ("gl3 Fourier-side identity", 30.0, criterion_5),
        ("Whittaker defining equations", 10.0, criterion_6),
        ("commutation and opposite relations", 10.0, criterion_7),
        ("intertwiner actions", 60.0, criterion_8),
        ("scalar kernel identities", 1.0, criterion_9),
        ("contour shifts", 10.0, criterion_10),
        ("Toda eigenfunction property", 300.0, criterion_11),
        ("deterministic reports", f64::INFINITY, criterion_12),
    ];
    for (n, (title, limit, f)) in criteria.iter().enumerate() {
        let t0 = Instant::now();
        let o = f();
        report(n + 1, title, t0, *limit, o, &mut all);
    }
    if !all {
        std::process::exit(1);
    }
}
