use cgolab::cgo::*;
use cgolab::domain::{DomainSpec, ScalarField, VectorField};
use cgolab::fluid::Bump;
use cgolab::forward::OperatorCoefficients;
use num_complex::Complex64;

const LADDER: [f64; 3] = [0.4, 0.2, 0.1];

fn smooth_pair(d: DomainSpec) -> (VectorField, ScalarField) {
    let b = Bump::new([0.03, -0.02, 0.0], 0.4, 1.0);
    let a = VectorField::from_real_fn(d, |p| {
        let v = b.value(p);
        [0.8 * v * p[1] + 0.3 * v, -0.6 * v * p[0], 0.4 * v]
    });
    let q = ScalarField::from_fn(d, |p| Complex64::new(-1.0, 0.3) * b.value(p));
    (a, q)
}

fn ladder(coeffs: &OperatorCoefficients, side: CgoSide, xi: [f64; 3]) -> Vec<CgoDiagnostics> {
    let frame = Frame::pair_for(xi)[0];
    LADDER
        .iter()
        .map(|&h| {
            let ctx = CgoContext::new(h, xi, frame, side)
                .unwrap()
                .with_tau(0.5 * h.sqrt())
                .unwrap();
            build_cgo(coeffs, &ctx).unwrap().diagnostics
        })
        .collect()
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn remainder_and_residual_shrink_along_the_h_ladder() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let (a, q) = smooth_pair(d);
    let first = OperatorCoefficients::magnetic(&a, &q).unwrap();
    let second = OperatorCoefficients::magnetic_transpose(&a, &q).unwrap();
    for (coeffs, side) in [(&first, CgoSide::First), (&second, CgoSide::Second)] {
        let diags = ladder(coeffs, side, [3.0, 1.0, 0.0]);
        let pde: Vec<f64> = diags.iter().map(|g| g.pde_residual).collect();
        let scaled: Vec<f64> = diags.iter().map(|g| g.r_h1scl / g.h.sqrt()).collect();
        assert!(strictly_decreasing(&pde), "{side:?}: {pde:?}");
        assert!(strictly_decreasing(&scaled), "{side:?}: {scaled:?}");
        assert!(diags.iter().all(|g| g.solve_residual < 1e-8 && g.is_finite()));
    }
}

#[test]
fn amplitude_norms_follow_the_mollified_bounds() {
    let d = DomainSpec::cube(0.5, 17).unwrap();
    let (a, q) = smooth_pair(d);
    let coeffs = OperatorCoefficients::magnetic(&a, &q).unwrap();
    let diags = ladder(&coeffs, CgoSide::First, [0.0; 3]);
    let hs: Vec<f64> = diags.iter().map(|g| g.h).collect();
    // ‖a‖∞ = O(1), ‖∇a‖∞ = O(h^{-1/2}), ‖∇a‖_{L²} = O(1), ‖Δa‖_{L²} = o(h^{-1/2}).
    let a_sup: Vec<f64> = diags.iter().map(|g| g.a_sup).collect();
    assert!(a_sup.iter().all(|&v| v < 1.5 * a_sup[0]));
    let grad_sup: Vec<f64> = diags.iter().map(|g| g.grad_a_sup * g.h.sqrt()).collect();
    assert!(grad_sup.windows(2).all(|w| w[1] <= w[0]), "{grad_sup:?}");
    let grad_l2: Vec<f64> = diags.iter().map(|g| g.grad_a_l2).collect();
    assert!(log_log_slope(&hs, &grad_l2) > -0.3, "{grad_l2:?}");
    let lap: Vec<f64> = diags.iter().map(|g| g.lap_a_l2 * g.h.sqrt()).collect();
    assert!(strictly_decreasing(&lap), "{lap:?}");
}

#[test]
fn free_operator_gives_harmonic_exponentials_for_both_remainder_solves() {
    let d = DomainSpec::cube(0.5, 13).unwrap();
    let frame = Frame::pair_for([2.0, 0.0, 1.0])[1];
    for solve in [RemainderSolve::Dirichlet, RemainderSolve::MinimalNorm] {
        let ctx = CgoContext::second(0.2, [2.0, 0.0, 1.0], frame)
            .unwrap()
            .with_remainder_solve(solve);
        let sol = build_cgo(&OperatorCoefficients::zeros(d), &ctx).unwrap();
        assert_eq!(sol.remainder.max_abs(), 0.0);
        assert!(sol.diagnostics.pde_residual < 1e-12);
    }
}

#[test]
fn dirichlet_remainder_vanishes_on_the_boundary_and_solves_the_equation() {
    let d = DomainSpec::cube(0.5, 13).unwrap();
    let (a, q) = smooth_pair(d);
    let coeffs = OperatorCoefficients::magnetic(&a, &q).unwrap();
    let frame = Frame::pair_for([1.0, 1.0, 0.0])[0];
    let ctx = CgoContext::first(0.3, [1.0, 1.0, 0.0], frame)
        .unwrap()
        .with_remainder_solve(RemainderSolve::Dirichlet);
    let sol = build_cgo(&coeffs, &ctx).unwrap();
    for n in d.boundary_nodes() {
        assert_eq!(sol.remainder.values()[n], Complex64::new(0.0, 0.0));
    }
    assert!(sol.diagnostics.solve_residual < 1e-8);
    assert!(sol.remainder.max_abs() > 0.0);
}

#[test]
fn mollifier_scalings() {
    let d = DomainSpec::cube(0.5, 81).unwrap();
    let taus = [0.2, 0.1, 0.05];
    let profile = |p: [f64; 3]| {
        let s = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) / (0.45 * 0.45);
        if s < 1.0 {
            (1.0 - s).powi(3)
        } else {
            0.0
        }
    };
    let smooth = VectorField::from_real_fn(d, |p| {
        let v = profile(p);
        [v, 0.5 * v * p[0] / 0.3, -0.3 * v]
    });
    let step = VectorField::from_real_fn(d, |p| {
        let inside = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 0.25 * 0.25;
        let v = if inside { 1.0 } else { 0.0 };
        [v, 0.5 * v, 0.0]
    });
    let slopes = |v: &VectorField| {
        let ns: Vec<MollifierNorms> = taus
            .iter()
            .map(|&t| mollifier_norms(v, MollifierSpec::new(t).unwrap()))
            .collect();
        move |f: fn(&MollifierNorms) -> f64| {
            let ys: Vec<f64> = ns.iter().map(f).collect();
            (log_log_slope(&taus, &ys), ys)
        }
    };
    let s = slopes(&smooth);
    let (diff, ys) = s(|n| n.diff_l2);
    assert!((diff - 2.0).abs() < 0.3, "smooth ‖V − V_τ‖ slope {diff}");
    // o(τ): the ratio to τ decreases.
    assert!(ys.iter().zip(&taus).map(|(y, t)| y / t).collect::<Vec<_>>().windows(2).all(|w| w[1] < w[0]));
    for f in [
        (|n: &MollifierNorms| n.l2) as fn(&MollifierNorms) -> f64,
        |n| n.sup,
        |n| n.grad_l2,
        |n| n.grad_sup,
    ] {
        let (slope, _) = s(f);
        assert!(slope.abs() < 0.3, "smooth O(1) slope {slope}");
    }
    let s = slopes(&step);
    let (grad, ys) = s(|n| n.grad_sup);
    assert!((grad + 1.0).abs() < 0.3, "step ‖∇V_τ‖∞ slope {grad}");
    assert!(ys.windows(2).all(|w| w[1] > w[0]));
    let (diff, ys) = s(|n| n.diff_l2);
    assert!((diff - 0.5).abs() < 0.3, "step ‖V − V_τ‖ slope {diff}");
    assert!(ys.windows(2).all(|w| w[1] < w[0]));
    let (sup, _) = s(|n| n.sup);
    assert!(sup.abs() < 0.3);
}

#[test]
fn transport_phase_gradients_scale_with_the_mollifier() {
    // A step field: ‖∇Φ_τ‖∞ is at most O(τ^{-1}), ‖∇Φ_τ‖_{L²} stays bounded.
    let d = DomainSpec::cube(0.5, 61).unwrap();
    let step = VectorField::from_real_fn(d, |p| {
        let inside = p[0] * p[0] + p[1] * p[1] + p[2] * p[2] < 0.25 * 0.25;
        let v = if inside { 1.0 } else { 0.0 };
        [v, -0.5 * v, 0.25 * v]
    });
    let z0 = Frame::pair_for([0.0, 1.0, 1.0])[0].zeta0();
    let taus = [0.2, 0.1, 0.05];
    let mut sup = Vec::new();
    let mut l2 = Vec::new();
    for &t in &taus {
        let phi = transport_phase(&step, z0, MollifierSpec::new(t).unwrap()).unwrap();
        let g = cgolab::domain::gradient(&phi);
        sup.push(g.max_abs());
        l2.push(g.l2_norm());
    }
    let s_sup = log_log_slope(&taus, &sup);
    let s_l2 = log_log_slope(&taus, &l2);
    assert!(s_sup < 0.0 && s_sup > -1.3, "sup slope {s_sup}");
    let scaled: Vec<f64> = sup.iter().zip(&taus).map(|(s, t)| s * t).collect();
    assert!(scaled.windows(2).all(|w| w[1] <= w[0]), "{scaled:?}");
    assert!(s_l2.abs() < 0.3, "L² slope {s_l2}");
}
