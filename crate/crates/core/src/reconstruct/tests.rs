use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::cgo::{cdot, CgoContext, Frame};
use crate::domain::{curl, DomainSpec, ScalarField, TwoFormField, VectorField};
use crate::error::Error;
use crate::fluid::{apply_gauge_with, Bump};

const I: Complex64 = Complex64::new(0.0, 1.0);

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `cos²(πx)cos²(πy)cos²(πz)`: flat on the faces of the unit box, with
/// Fourier modes `|k|∞ ≤ 1`.
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

/// `Â` projected onto `ξ⊥`, by quadrature.
fn projected_transform(a: &VectorField, xi: [f64; 3]) -> [Complex64; 3] {
    let fa = [0, 1, 2].map(|k| fourier_coefficient(&a.component(k), xi));
    let xn: f64 = xi.iter().map(|x| x * x).sum();
    let along: Complex64 = (0..3).map(|j| xi[j] * fa[j]).sum();
    [0, 1, 2].map(|k| fa[k] - xi[k] * along / xn)
}

fn exact_slice(a: &VectorField, xi_max: f64) -> FourierSlice {
    let d = *a.domain();
    let samples = xi_grid(&d, xi_max, true)
        .into_iter()
        .filter(|xi| xi.iter().any(|x| *x != 0.0))
        .map(|xi| FourierSample {
            xi,
            a_perp: projected_transform(a, xi),
        })
        .collect();
    FourierSlice::for_domain(&d, samples).unwrap()
}

fn rel(a: &TwoFormField, b: &TwoFormField) -> f64 {
    a.sub(b).unwrap().l2_norm() / b.l2_norm()
}

proptest! {
    #[test]
    fn extrapolation_is_exact_for_quadratics(
        c0 in -5.0f64..5.0, c1 in -5.0f64..5.0, c2 in -5.0f64..5.0, h0 in 0.05f64..1.0,
    ) {
        let hs = [h0, h0 / 2.0, h0 / 4.0];
        let f = |h: f64| Complex64::new(c0 + c1 * h + c2 * h * h, c1 - c0 * h);
        let values = hs.map(f);
        let limit = extrapolate_to_zero(&hs, &values).unwrap();
        prop_assert!((limit - f(0.0)).norm() < 1e-9 * (1.0 + c0.abs() + c1.abs() + c2.abs()));
    }
}

#[test]
fn extrapolation_rejects_bad_ladders() {
    let v = [c(1.0), c(2.0)];
    assert!(matches!(extrapolate_to_zero(&[0.2, 0.2], &v), Err(Error::Extrapolation(_))));
    assert!(matches!(extrapolate_to_zero(&[0.2], &v), Err(Error::Extrapolation(_))));
    assert!(matches!(extrapolate_to_zero(&[0.2, -0.1], &v), Err(Error::Extrapolation(_))));
    assert_eq!(extrapolate_to_zero(&[0.3], &[c(4.0)]).unwrap(), c(4.0));
}

#[test]
fn h_ladder_keeps_h_xi_below_one() {
    assert_eq!(h_ladder_for(&[0.4, 0.2, 0.1], [1.0, 0.0, 0.0]).unwrap(), vec![0.4, 0.2, 0.1]);
    let hs = h_ladder_for(&[0.4, 0.2, 0.1], [0.0, 10.0, 0.0]).unwrap();
    assert!((hs[0] - 0.1).abs() < 1e-15 && (hs[2] - 0.025).abs() < 1e-15);
    assert!(h_ladder_for(&[0.2, 0.4], [0.0; 3]).is_err());
    assert!(h_ladder_for(&[1.5], [0.0; 3]).is_err());
    assert!(h_ladder_for(&[], [0.0; 3]).is_err());
}

#[test]
fn xi_grid_halves_the_symmetric_lattice() {
    let d = DomainSpec::cube(0.5, 9).unwrap();
    let full = xi_grid(&d, 4.0 * PI, false);
    let half = xi_grid(&d, 4.0 * PI, true);
    assert_eq!(full.len(), 125);
    assert_eq!(half.len(), 63);
    for xi in &half {
        let neg = xi.map(|x| -x);
        assert!(xi.iter().all(|x| *x == 0.0) || !half.contains(&neg));
    }
}

#[test]
fn equal_coefficients_pair_to_zero() {
    let d = DomainSpec::cube(0.5, 9).unwrap();
    let b = Bump::new([0.0; 3], 0.35, 1.0);
    let a = VectorField::from_real_fn(d, |p| [b.value(p), 0.0, -b.value(p)]);
    let q = ScalarField::from_real_fn(d, |p| 2.0 * b.value(p));
    let m = MagneticCoefficients::new(a, q).unwrap();
    let xi = [2.0, 1.0, 0.0];
    for h in [0.4, 0.2] {
        let ctx = CgoContext::first(h, xi, Frame::pair_for(xi)[1]).unwrap();
        let s = pairing_from_cgo(&m, &m, &ctx).unwrap();
        assert_eq!(s.value, c(0.0));
        assert_eq!(s.h, h);
    }
    let second = CgoContext::second(0.3, xi, Frame::pair_for(xi)[0]).unwrap();
    assert!(pairing_from_cgo(&m, &m, &second).is_err());
}

/// Pairing ladders that tend to `2iζ₀·Â` with a synthetic `O(h)` error.
fn synthetic_ladder(a_hat: [Complex64; 3], xi: [f64; 3]) -> Vec<PairingSample> {
    let mut out = Vec::new();
    for frame in Frame::pair_for(xi) {
        let target = 2.0 * I * cdot(frame.zeta0(), a_hat);
        for h in [0.2, 0.1, 0.05] {
            out.push(PairingSample {
                xi,
                frame,
                h,
                tau: 0.5 * f64::sqrt(h),
                value: target + Complex64::new(0.3, -0.1) * h,
            });
        }
    }
    out
}

#[test]
fn stripping_recovers_the_projected_transform_of_a_bump() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let b = Bump::new([0.05, 0.0, -0.05], 0.35, 1.0);
    let a = VectorField::from_real_fn(d, |p| {
        let v = b.value(p);
        [v, 0.5 * v, -0.25 * v]
    });
    for xi in [[2.0 * PI, 0.0, 0.0], [2.0 * PI, -2.0 * PI, 4.0 * PI]] {
        let a_hat = [0, 1, 2].map(|k| fourier_coefficient(&a.component(k), xi));
        let s = strip_phases(&synthetic_ladder(a_hat, xi), PhaseOracle::Cancelling).unwrap();
        let proj = projected_transform(&a, xi);
        let err: f64 = (0..3).map(|k| (s.a_perp[k] - proj[k]).norm_sqr()).sum::<f64>().sqrt();
        let scale: f64 = proj.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err < 1e-10 * scale.max(1e-300) + 1e-14, "{err} vs {scale}");
        let along: Complex64 = (0..3).map(|k| s.a_perp[k] * xi[k]).sum();
        assert!(along.norm() < 1e-10 * scale.max(1.0));
    }
}

#[test]
fn stripping_is_the_identity_when_phases_cancel() {
    let d = DomainSpec::cube(0.5, 9).unwrap();
    let b = Bump::new([0.0; 3], 0.35, 1.0);
    let a = VectorField::from_real_fn(d, |p| [b.value(p), 0.0, 0.0]);
    let m = MagneticCoefficients::new(a, ScalarField::zeros(d)).unwrap();
    let xi = [2.0 * PI, 0.0, 2.0 * PI];
    let ladder = synthetic_ladder([c(1.0), I, c(-0.5)], xi);
    let plain = strip_phases(&ladder, PhaseOracle::Cancelling).unwrap();
    let oracle = strip_phases(&ladder, PhaseOracle::Known(&m, &m)).unwrap();
    assert_eq!(plain, oracle);
}

#[test]
fn stripping_needs_frames_spanning_the_plane() {
    let xi = [0.0, 0.0, 2.0];
    let [f, _] = Frame::pair_for(xi);
    let (cs, sn) = (0.6, 0.8);
    let rotated = Frame::new(
        [0, 1, 2].map(|k| cs * f.mu1[k] + sn * f.mu2[k]),
        [0, 1, 2].map(|k| -sn * f.mu1[k] + cs * f.mu2[k]),
    )
    .unwrap();
    let mut samples = synthetic_ladder([c(1.0), c(0.0), c(0.0)], xi);
    samples.retain(|s| s.frame == f);
    let only_one = samples.clone();
    for s in only_one.iter() {
        samples.push(PairingSample { frame: rotated, ..*s });
    }
    assert!(matches!(strip_phases(&only_one, PhaseOracle::Cancelling), Err(Error::Conditioning(_))));
    assert!(matches!(strip_phases(&samples, PhaseOracle::Cancelling), Err(Error::Conditioning(_))));
    let mut mixed = synthetic_ladder([c(1.0), c(0.0), c(0.0)], xi);
    mixed[0].xi = [0.0, 0.0, 1.0];
    assert!(matches!(strip_phases(&mixed, PhaseOracle::Cancelling), Err(Error::Inconsistent(_))));
}

#[test]
fn slices_reject_non_orthogonal_or_off_lattice_samples() {
    let xi = [2.0 * PI, 0.0, 0.0];
    let bad = FourierSample {
        xi,
        a_perp: [c(1.0), c(0.0), c(0.0)],
    };
    assert!(matches!(FourierSlice::new([1.0; 3], vec![bad]), Err(Error::Inconsistent(_))));
    let off = FourierSample {
        xi: [1.0, 0.0, 0.0],
        a_perp: [c(0.0), c(1.0), c(0.0)],
    };
    assert!(FourierSlice::new([1.0; 3], vec![off]).is_err());
    let ok = FourierSample {
        xi,
        a_perp: [c(0.0), c(1.0), I],
    };
    let slice = FourierSlice::new([1.0; 3], vec![ok]).unwrap();
    assert_eq!(slice.get(xi), Some(&ok));
    // A complex slice needs both ±ξ.
    let d = DomainSpec::cube(0.5, 5).unwrap();
    assert!(recover_curl(&slice, &d, false).is_err());
    assert!(recover_curl(&slice, &d, true).is_ok());
}

#[test]
fn zero_and_gradient_slices_give_zero_two_forms() {
    let d = DomainSpec::cube(0.5, 9).unwrap();
    let empty = FourierSlice::for_domain(&d, Vec::new()).unwrap();
    assert_eq!(recover_curl(&empty, &d, true).unwrap().max_abs(), 0.0);
    let grad = VectorField::from_real_fn(d, cos2_grad);
    let slice = exact_slice(&grad, 4.0 * PI);
    let scale = curl(&VectorField::from_real_fn(d, |p| {
        let v = cos2(p);
        [v, -v, 0.0]
    }))
    .l2_norm();
    assert!(recover_curl(&slice, &d, true).unwrap().l2_norm() < 1e-3 * scale);
}

#[test]
fn curl_of_a_swirl_matches_finite_differences() {
    // (−sin 2πy, sin 2πx, 0)/(2π) behaves like (−y, x, 0) near the centre.
    let d = DomainSpec::cube(0.5, 33).unwrap();
    let swirl = VectorField::from_real_fn(d, |p| {
        let v = cos2(p) / (2.0 * PI);
        [-(2.0 * PI * p[1]).sin() * v, (2.0 * PI * p[0]).sin() * v, 0.0]
    });
    let rec = recover_curl(&exact_slice(&swirl, 4.0 * PI), &d, true).unwrap();
    let err = rel(&rec, &curl(&swirl));
    assert!(err < 0.1, "{err}");
}

#[test]
fn synthesis_agrees_with_finite_differences_under_refinement() {
    let mut errs = Vec::new();
    for n in [17, 33] {
        let d = DomainSpec::cube(0.5, n).unwrap();
        let a = VectorField::from_real_fn(d, |p| {
            let v = cos2(p);
            [v, -0.5 * v, 0.3 * v]
        });
        errs.push(rel(&recover_curl(&exact_slice(&a, 4.0 * PI), &d, true).unwrap(), &curl(&a)));
    }
    assert!(errs[0] < 5e-2 && errs[1] < errs[0] / 3.0, "{errs:?}");
}

#[test]
fn gauge_potential_of_a_bump_gradient() {
    let mut fits = Vec::new();
    let mut errs = Vec::new();
    for n in [17, 33] {
        let d = DomainSpec::cube(0.5, n).unwrap();
        let diff = VectorField::from_real_fn(d, cos2_grad);
        let rec = gauge_from_curlfree(&diff).unwrap();
        assert!(rec.curl_ratio < GAUGE_CURL_TOL);
        fits.push(rec.fit_residual);
        // φ = 0 on the boundary fixes the additive constant.
        let target = ScalarField::from_real_fn(d, cos2);
        errs.push(rec.gauge.phi().sub(&target).unwrap().l2_norm() / target.l2_norm());
    }
    assert!(fits[1] < 2e-2 && fits[1] < fits[0] / 3.0, "{fits:?}");
    assert!(errs[1] < 2e-2 && errs[1] < errs[0] / 3.0, "{errs:?}");
}

#[test]
fn gauge_potential_of_zero_is_zero_and_curls_are_rejected() {
    let d = DomainSpec::cube(0.5, 9).unwrap();
    let rec = gauge_from_curlfree(&VectorField::zeros(d)).unwrap();
    assert_eq!(rec.gauge.phi().max_abs(), 0.0);
    let swirl = VectorField::from_real_fn(d, |p| {
        let v = cos2(p);
        [-p[1] * v, p[0] * v, 0.0]
    });
    assert!(matches!(gauge_from_curlfree(&swirl), Err(Error::NotGaugeEquivalent(_))));
}

/// `(A₂, q₂)` and its gauge transform `(A₁, q₁)` by `φ = s·cos²`, with exact
/// derivatives of `φ`.
fn gauge_pair(d: DomainSpec, s: f64) -> (VectorField, ScalarField, VectorField, ScalarField) {
    let b = Bump::new([0.03, -0.02, 0.0], 0.4, 1.0);
    let a2 = VectorField::from_real_fn(d, |p| {
        let v = b.value(p);
        [0.8 * v * p[1] + 0.3 * v, -0.6 * v * p[0], 0.4 * v]
    });
    let q2 = ScalarField::from_fn(d, |p| Complex64::new(-1.0, 0.3) * b.value(p));
    let grad = VectorField::from_real_fn(d, |p| cos2_grad(p).map(|g| s * g));
    let lap = ScalarField::from_real_fn(d, |p| s * cos2_lap(p));
    let (a1, q1) = apply_gauge_with(&a2, &q2, &grad, &lap).unwrap();
    (a1, q1, a2, q2)
}

#[test]
fn q_identity_closes_on_gauge_pairs() {
    let mut res = Vec::new();
    for n in [17, 33] {
        let d = DomainSpec::cube(0.5, n).unwrap();
        let (a1, q1, a2, q2) = gauge_pair(d, 0.3);
        let rec = gauge_from_curlfree(&a1.sub(&a2).unwrap()).unwrap();
        res.push(q_identity_residual(&q1, &a2, &q2, rec.gauge.phi()).unwrap());
    }
    assert!(res[1] < 5e-2 && res[1] < res[0], "{res:?}");
}

#[test]
fn q_identity_trivial_and_perturbed_cases() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let (_, _, a2, q2) = gauge_pair(d, 0.0);
    let zero = ScalarField::zeros(d);
    assert!(q_identity_residual(&q2, &a2, &q2, &zero).unwrap() < 1e-12);
    // +1 on the cube [−0.2, 0.2]³; ‖q₁‖ stays below 1.
    let bumped = q2
        .zip_with(&ScalarField::from_real_fn(d, |p| {
            if p.iter().all(|x| x.abs() <= 0.2 + 1e-12) {
                1.0
            } else {
                0.0
            }
        }), |a, b| a + b)
        .unwrap();
    assert!(bumped.l2_norm() <= 1.0);
    let r = q_identity_residual(&bumped, &a2, &q2, &zero).unwrap();
    let indicator = ScalarField::from_real_fn(d, |p| {
        if p.iter().all(|x| x.abs() <= 0.2 + 1e-12) {
            1.0
        } else {
            0.0
        }
    });
    // The node-weighted volume of the subregion, (7/16)³ on this grid.
    assert!((r - indicator.l2_norm()).abs() < 1e-12);
    assert!((r - (7.0f64 / 16.0).powi(3).sqrt()).abs() < 1e-12, "{r}");
}
