use std::f64::consts::PI;

use cgolab::boundary::*;
use cgolab::domain::{DomainSpec, ScalarField, VectorField};
use cgolab::fluid::apply_gauge_with;
use cgolab::forward::{assemble_dtn, DtNMap, OperatorCoefficients};
use cgolab::reconstruct::MagneticCoefficients;
use num_complex::Complex64;

const BOTTOM: [f64; 3] = [0.0, 0.0, -0.5];
const TOP: [f64; 3] = [0.0, 0.0, -0.3];

fn slab() -> DomainSpec {
    DomainSpec::new([-0.3, -0.3, -0.5], [0.3, 0.3, -0.3], [25, 25, 25]).unwrap()
}

fn top() -> Face {
    Face::new(2, true).unwrap()
}

fn phantom_a(p: [f64; 3]) -> [f64; 3] {
    let z = p[2] + 0.4;
    let g = (-(p[0] * p[0] + p[1] * p[1] + z * z) / 0.2).exp();
    [0.9 + 0.4 * g + 0.3 * p[1], -0.8 + 0.5 * p[0] + 0.3 * g, 1.1 - 0.6 * g + 0.5 * z]
}

fn phantom(d: DomainSpec) -> MagneticCoefficients {
    let a = VectorField::from_real_fn(d, phantom_a);
    let q = ScalarField::from_fn(d, |p| Complex64::new(2.0 + p[0], 0.5 * p[1]));
    MagneticCoefficients::new(a, q).unwrap()
}

fn componentwise(trace: [Complex64; 3], truth: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| (trace[k] - truth[k]).norm() / truth[k].abs())
        .fold(0.0, f64::max)
}

/// Least-squares slope of `log y` against `log λ`.
fn loglog_slope(lambdas: &[f64], ys: &[f64]) -> f64 {
    let xs: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ls.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ls).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[test]
fn smooth_phantom_trace_at_both_face_centres() {
    let d = slab();
    let eta = EtaProfile::default();
    let m = phantom(d);
    let prober = BoundaryProber::new(&m).unwrap();
    for (face, x0) in [(Face::bottom(), BOTTOM), (top(), TOP)] {
        let cal = calibrate(&d, face, x0, eta, &LAMBDA_LADDER).unwrap();
        let rec = recover_trace(&ProbeData::Coefficients(&prober), face, x0, eta, &cal).unwrap();
        let err = componentwise(rec.trace, phantom_a(x0));
        println!("{face:?}: trace {:?} truth {:?} err {err:.3e}", rec.trace, phantom_a(x0));
        assert!(err < 5e-2, "{err}");
    }
}

#[test]
fn constant_complex_field_and_zero_field() {
    let d = slab();
    let eta = EtaProfile::default();
    let face = Face::bottom();
    let cal = calibrate(&d, face, BOTTOM, eta, &LAMBDA_LADDER).unwrap();
    // Continuum constants are 1 and i; the normal one is exact up to the grid.
    for n in &cal.normal {
        assert!((n - Complex64::new(0.0, 1.0)).norm() < 5e-2, "{n}");
    }
    let value = [Complex64::new(0.4, 0.2), Complex64::new(-0.7, 0.0), Complex64::new(0.5, -0.3)];
    let q = ScalarField::constant(d, Complex64::new(3.0, 1.0));
    let m = MagneticCoefficients::new(VectorField::constant(d, value), q.clone()).unwrap();
    let prober = BoundaryProber::new(&m).unwrap();
    let rec = recover_trace(&ProbeData::Coefficients(&prober), face, BOTTOM, eta, &cal).unwrap();
    let scale = value.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let err = (0..3).map(|k| (rec.trace[k] - value[k]).norm()).fold(0.0, f64::max) / scale;
    println!("constant: {:?} err {err:.3e}", rec.trace);
    assert!(err < 5e-2, "{err}");

    let zero = MagneticCoefficients::new(VectorField::zeros(d), q).unwrap();
    let prober = BoundaryProber::new(&zero).unwrap();
    let rec = recover_trace(&ProbeData::Coefficients(&prober), face, BOTTOM, eta, &cal).unwrap();
    let size = rec.trace.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    println!("zero field: {:?}", rec.trace);
    assert!(size < 5e-2 * scale, "{size}");
}

#[test]
fn gauge_partners_share_their_trace() {
    // Probes through the DtN maps, which agree for the pair up to the grid.
    let d = DomainSpec::new([-0.3, -0.3, -0.5], [0.3, 0.3, -0.3], [17, 17, 17]).unwrap();
    let eta = EtaProfile::default();
    let face = Face::bottom();
    let m2 = phantom(d);
    // φ = s·Π sin²(π(xₖ − loₖ)/Lₖ) vanishes with its gradient on the boundary.
    let (lo, hi) = (d.lower(), d.upper());
    let s = 0.02;
    let arg = |p: [f64; 3], k: usize| PI * (p[k] - lo[k]) / (hi[k] - lo[k]);
    let k_of = |k: usize| PI / (hi[k] - lo[k]);
    let f = |p: [f64; 3], k: usize| arg(p, k).sin().powi(2);
    let df = |p: [f64; 3], k: usize| k_of(k) * (2.0 * arg(p, k)).sin();
    let ddf = |p: [f64; 3], k: usize| 2.0 * k_of(k).powi(2) * (2.0 * arg(p, k)).cos();
    let grad = VectorField::from_real_fn(d, |p| {
        [
            s * df(p, 0) * f(p, 1) * f(p, 2),
            s * f(p, 0) * df(p, 1) * f(p, 2),
            s * f(p, 0) * f(p, 1) * df(p, 2),
        ]
    });
    let lap = ScalarField::from_real_fn(d, |p| {
        s * (ddf(p, 0) * f(p, 1) * f(p, 2) + f(p, 0) * ddf(p, 1) * f(p, 2) + f(p, 0) * f(p, 1) * ddf(p, 2))
    });
    let (a1, q1) = apply_gauge_with(&m2.a, &m2.q, &grad, &lap).unwrap();
    let m1 = MagneticCoefficients::new(a1, q1).unwrap();
    let interior_change = grad.l2_norm() / m2.a.l2_norm();
    let cal = calibrate(&d, face, BOTTOM, eta, &LAMBDA_LADDER).unwrap();
    let free = assemble_dtn(&OperatorCoefficients::zeros(d), 0.0).unwrap();
    let maps: Vec<DtNMap> = [&m1, &m2]
        .iter()
        .map(|m| assemble_dtn(&OperatorCoefficients::magnetic(&m.a, &m.q).unwrap(), 0.0).unwrap())
        .collect();
    let traces: Vec<[Complex64; 3]> = maps
        .iter()
        .map(|map| {
            let prober = DtnProber::new(map, &free).unwrap();
            match recover_trace(&ProbeData::Dtn(&prober), face, BOTTOM, eta, &cal) {
                Ok(r) => r.trace,
                Err(e) => panic!("{e}"),
            }
        })
        .collect();
    let truth = phantom_a(BOTTOM);
    let err = componentwise(traces[1], truth);
    let gap = (0..3).map(|k| (traces[0][k] - traces[1][k]).norm() / truth[k].abs()).fold(0.0, f64::max);
    println!(
        "gauge: {:?} vs {:?} gap {gap:.3e} err {err:.3e} dtn distance {:.3e} interior change {interior_change:.3e}",
        traces[0],
        traces[1],
        maps[0].relative_distance(&maps[1]).unwrap()
    );
    assert!(gap < 5e-2 && err < 5e-2, "{gap} {err}");
}

#[test]
fn probe_norms_follow_their_scalings() {
    let d = slab();
    let m = phantom(d);
    let prober = BoundaryProber::new(&m).unwrap();
    let norms: Vec<ProbeNorms> = LAMBDA_LADDER
        .iter()
        .map(|&l| {
            let s = ProbeSpec::new(&d, Face::bottom(), BOTTOM, [1.0, 0.0], l, EtaProfile::default()).unwrap();
            prober.probe(&s).unwrap().norms.unwrap()
        })
        .collect();
    let slope = |f: fn(&ProbeNorms) -> f64| loglog_slope(&LAMBDA_LADDER, &norms.iter().map(f).collect::<Vec<_>>());
    let v0 = slope(|n| n.v0_l2);
    let w = slope(|n| n.w_h1);
    let q = slope(|n| n.q_term);
    println!("slopes: v0 {v0:.3} w {w:.3} q {q:.3}");
    // Exponents 1 for ‖v₀‖_{L²}, 1/2 for ‖w‖_{H¹} in three dimensions.
    assert!((v0 - 1.0).abs() <= 0.25, "{v0}");
    assert!((w - 0.5).abs() <= 0.25, "{w}");
    assert!(q > 0.0 && (q - 0.5).abs() <= 0.25, "{q}");
}

#[test]
fn unit_tangents_combine_linearly_at_every_scale() {
    let d = slab();
    let eta = EtaProfile::default();
    let face = Face::bottom();
    let m = phantom(d);
    let prober = BoundaryProber::new(&m).unwrap();
    let data = ProbeData::Coefficients(&prober);
    for lambda in LAMBDA_LADDER {
        let p = |t: [f64; 2]| probe_value(&data, &ProbeSpec::new(&d, face, BOTTOM, t, lambda, eta).unwrap()).unwrap();
        let e = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]].map(p);
        let t1 = (e[0] - e[1]) / 2.0;
        let t2 = (e[2] - e[3]) / 2.0;
        let normal = (e[0] + e[1] + e[2] + e[3]) / 4.0;
        let scale = (t1.norm_sqr() + t2.norm_sqr() + normal.norm_sqr()).sqrt();
        for theta in [PI / 4.0, 2.0 * PI / 3.0] {
            let (c, s) = (theta.cos(), theta.sin());
            let plus = p([c, s]);
            let minus = p([-c, -s]);
            let err_t = ((plus - minus) / 2.0 - (t1 * c + t2 * s)).norm() / scale;
            let err_n = ((plus + minus) / 2.0 - normal).norm() / scale;
            println!("lambda {lambda} theta {theta:.3}: tangential {err_t:.3e} normal {err_n:.3e}");
            assert!(err_t < 5e-2 && err_n < 5e-2, "{err_t} {err_n}");
        }
    }
}
