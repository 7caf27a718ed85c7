use std::f64::consts::PI;

use cgolab::cgo::{cdot, Frame};
use cgolab::domain::{gradient, DomainSpec, ScalarField, VectorField};
use cgolab::fluid::{apply_gauge_with, Bump};
use cgolab::reconstruct::*;
use num_complex::Complex64;

const I: Complex64 = Complex64::new(0.0, 1.0);
const BASE: [f64; 3] = [0.4, 0.2, 0.1];
const TAU_FACTOR: f64 = 0.5;

fn cos2(p: [f64; 3]) -> f64 {
    p.iter().map(|x| (PI * x).cos().powi(2)).product()
}

fn cos2_grad(p: [f64; 3]) -> [f64; 3] {
    let f = p.map(|x| (PI * x).cos().powi(2));
    let g = p.map(|x| -PI * (2.0 * PI * x).sin());
    [g[0] * f[1] * f[2], f[0] * g[1] * f[2], f[0] * f[1] * g[2]]
}

fn cos2_lap(p: [f64; 3]) -> f64 {
    let f = p.map(|x| (PI * x).cos().powi(2));
    let s = p.map(|x| -2.0 * PI * PI * (2.0 * PI * x).cos());
    s[0] * f[1] * f[2] + f[0] * s[1] * f[2] + f[0] * f[1] * s[2]
}

fn background(d: DomainSpec) -> MagneticCoefficients {
    let b = Bump::new([0.03, -0.02, 0.0], 0.4, 1.0);
    let a = VectorField::from_real_fn(d, |p| {
        let v = b.value(p);
        [0.8 * v * p[1] + 0.3 * v, -0.6 * v * p[0], 0.4 * v]
    });
    let q = ScalarField::from_fn(d, |p| Complex64::new(-1.0, 0.3) * b.value(p));
    MagneticCoefficients::new(a, q).unwrap()
}

/// `(A₁, q₁)` gauge-equivalent to `m2` through `φ = s·cos²`.
fn gauge_partner(m2: &MagneticCoefficients, s: f64) -> (MagneticCoefficients, ScalarField) {
    let d = *m2.domain();
    let grad = VectorField::from_real_fn(d, |p| cos2_grad(p).map(|g| s * g));
    let lap = ScalarField::from_real_fn(d, |p| s * cos2_lap(p));
    let (a1, q1) = apply_gauge_with(&m2.a, &m2.q, &grad, &lap).unwrap();
    let phi = ScalarField::from_real_fn(d, |p| s * cos2(p));
    (MagneticCoefficients::new(a1, q1).unwrap(), phi)
}

fn limit(samples: &[PairingSample]) -> Complex64 {
    let hs: Vec<f64> = samples.iter().map(|s| s.h).collect();
    let vs: Vec<Complex64> = samples.iter().map(|s| s.value).collect();
    extrapolate_to_zero(&hs, &vs).unwrap()
}

fn frequencies() -> [[f64; 3]; 2] {
    [[2.0 * PI, 0.0, 0.0], [2.0 * PI, 2.0 * PI, 0.0]]
}

#[test]
fn gauge_pairs_pair_to_zero_in_the_limit() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let m2 = background(d);
    let (m1, _) = gauge_partner(&m2, 0.3);
    let diff = m2.a.sub(&m1.a).unwrap();
    for xi in frequencies() {
        let hs = h_ladder_for(&BASE, xi).unwrap();
        let frame = Frame::pair_for(xi)[0];
        let lim = limit(&pairing_ladder(&m1, &m2, xi, frame, &hs, TAU_FACTOR).unwrap());
        // The size the limit would have without the cancellation ζ₀·ξ = 0.
        let scale = 2.0
            * (0..3)
                .map(|k| fourier_coefficient(&diff.component(k), xi).norm_sqr())
                .sum::<f64>()
                .sqrt();
        println!("gauge xi {xi:?}: |limit| {:.3e} scale {scale:.3e}", lim.norm());
        assert!(lim.norm() < 2e-2 * scale, "{} vs {scale}", lim.norm());
    }
}

#[test]
fn non_gradient_difference_matches_the_phased_transform() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let m1 = background(d);
    let a2 = m1
        .a
        .add(&VectorField::from_real_fn(d, |p| {
            let v = cos2(p);
            [v, -0.5 * v, 0.3 * v]
        }))
        .unwrap();
    let m2 = MagneticCoefficients::new(a2, m1.q.clone()).unwrap();
    for xi in frequencies() {
        let hs = h_ladder_for(&BASE, xi).unwrap();
        for frame in Frame::pair_for(xi) {
            let lim = limit(&pairing_ladder(&m1, &m2, xi, frame, &hs, TAU_FACTOR).unwrap());
            let tau = TAU_FACTOR * hs[hs.len() - 1].sqrt();
            let direct = phased_fourier(&m1, &m2, xi, frame, tau).unwrap();
            let err = (lim - direct).norm() / direct.norm();
            println!("non-gradient xi {xi:?}: limit {lim:.4e} direct {direct:.4e} err {err:.3e}");
            assert!(err < 0.1, "{err}");
        }
    }
}

/// `Σ m e^{ix·ξ}[q̃₂ − q₁ − ξ·∇φ]`: the limit integrand with `w₁w₂ ≡ 1`,
/// built from the same discrete gradient the pairing uses.
fn q_limit_integrand(m1: &MagneticCoefficients, m2: &MagneticCoefficients, phi: &ScalarField, xi: [f64; 3]) -> Complex64 {
    let g = gradient(phi);
    let two = Complex64::new(2.0, 0.0);
    let q_tilde = m2.q.add(&m2.a.dot(&g).unwrap().scale(two)).unwrap().add(&g.dot(&g).unwrap()).unwrap();
    let xi_dot = g.dot_const(xi.map(|x| Complex64::new(x, 0.0)));
    fourier_coefficient(&q_tilde.sub(&m1.q).unwrap().sub(&xi_dot).unwrap(), xi)
}

fn q_cases(d: DomainSpec) -> (MagneticCoefficients, ScalarField, ScalarField, [MagneticCoefficients; 2]) {
    let m2 = background(d);
    let (gauge, phi) = gauge_partner(&m2, 0.3);
    let perturbation = ScalarField::from_real_fn(d, |p| 0.8 * cos2(p));
    let perturbed = MagneticCoefficients::new(gauge.a.clone(), gauge.q.add(&perturbation).unwrap()).unwrap();
    (m2, phi, perturbation, [gauge, perturbed])
}

#[test]
fn second_identity_tends_to_its_limit_integrand() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let (m2, phi, perturbation, cases) = q_cases(d);
    for xi in frequencies() {
        let hs = h_ladder_for(&BASE, xi).unwrap();
        let frame = Frame::pair_for(xi)[0];
        let scale = fourier_coefficient(&perturbation, xi).norm();
        for m1 in &cases {
            let ladder = q_pairing_ladder(m1, &m2, &phi, xi, frame, &hs, TAU_FACTOR).unwrap();
            let vs: Vec<Complex64> = ladder.iter().map(|s| s.value).collect();
            let lim = extrapolate_to_zero(&hs, &vs).unwrap();
            let rems: Vec<f64> = ladder.iter().map(|s| s.remainder_product).collect();
            let direct = q_limit_integrand(m1, &m2, &phi, xi);
            println!("q xi {xi:?}: limit {lim:.4e} integrand {direct:.4e} remainder products {rems:?}");
            assert!((lim - direct).norm() < 0.1 * scale, "{lim} vs {direct}");
            assert!(rems.windows(2).all(|w| w[1] < w[0]), "{rems:?}");
        }
    }
}

#[test]
fn q_limit_integrand_converges_to_the_gauge_relation() {
    // Zero for the gauge partner, `−F[δq]` once `q₁` is perturbed by `δq`.
    let errs: Vec<f64> = [17, 33, 65]
        .iter()
        .map(|&n| {
            let d = DomainSpec::cube(0.5, n).unwrap();
            let (m2, phi, perturbation, cases) = q_cases(d);
            frequencies()
                .iter()
                .flat_map(|&xi| {
                    let df = fourier_coefficient(&perturbation, xi);
                    let expected = [Complex64::new(0.0, 0.0), -df];
                    cases
                        .iter()
                        .zip(expected)
                        .map(|(m1, e)| (q_limit_integrand(m1, &m2, &phi, xi) - e).norm() / df.norm())
                        .collect::<Vec<_>>()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    println!("q integrand errors {errs:?}");
    assert!(errs[2] < 0.1 && errs.windows(2).all(|w| w[1] < w[0] / 3.0), "{errs:?}");
}

#[test]
fn phases_drop_out_of_the_frame_projected_transform() {
    // ζ₀·∫ΔA e^{Φ}e^{ix·ξ} = ζ₀·F[ΔA](ξ) when Φ solves ζ₀·∇Φ = iζ₀·ΔA exactly.
    let d = DomainSpec::cube(0.5, 25).unwrap();
    let m1 = background(d);
    let m2 = MagneticCoefficients::new(
        m1.a.add(&VectorField::from_real_fn(d, |p| {
            let v = cos2(p);
            [-0.6 * v, 0.0, v]
        }))
        .unwrap(),
        m1.q.clone(),
    )
    .unwrap();
    let diff = m2.a.sub(&m1.a).unwrap();
    let xi = [0.0, 2.0 * PI, 0.0];
    let frame = Frame::pair_for(xi)[0];
    let plain = 2.0 * I * cdot(frame.zeta0(), [0, 1, 2].map(|k| fourier_coefficient(&diff.component(k), xi)));
    let gaps: Vec<f64> = [0.2, 0.1]
        .iter()
        .map(|&t| (phased_fourier(&m1, &m2, xi, frame, t).unwrap() - plain).norm() / plain.norm())
        .collect();
    println!("phase gaps {gaps:?}");
    assert!(gaps.iter().all(|&g| g < 1e-4), "{gaps:?}");
}
