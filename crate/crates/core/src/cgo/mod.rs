//! Complex geometrical optics solutions `u = e^{x·ζ/h}(a + r)` of
//! `P_{V,W,q}u = 0`, with amplitude `a = e^{Φ_τ}` from the mollified
//! transport equation and a remainder `r` from a direct solve of the
//! conjugated equation.

pub mod cauchy;
mod convolve;
pub mod mollifier;

use faer::linalg::solvers::Solve;
use faer::Mat;
use num_complex::Complex64;

pub use cauchy::{cauchy_transform, cauchy_transform_with, check_zeta0, transport_phase, transport_phase_with, CauchyQuadrature};
pub use mollifier::{log_log_slope, mollifier_norms, mollify, mollify_scalar, MollifierNorms, MollifierSpec};

use crate::domain::ops::{partial, second_partial};
use crate::domain::{divergence, gradient, laplacian, DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::forward::assembly::assemble_interior_strong;
use crate::forward::OperatorCoefficients;

const FRAME_TOL: f64 = 1e-10;
const SOLVE_TOL: f64 = 1e-9;

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `Σ a_j b_j` without conjugation.
pub fn cdot(a: [Complex64; 3], b: [Complex64; 3]) -> Complex64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Orthonormal pair `(μ₁, μ₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub mu1: [f64; 3],
    pub mu2: [f64; 3],
}

impl Frame {
    pub fn new(mu1: [f64; 3], mu2: [f64; 3]) -> Result<Self> {
        if (norm(mu1) - 1.0).abs() > FRAME_TOL
            || (norm(mu2) - 1.0).abs() > FRAME_TOL
            || dot(mu1, mu2).abs() > FRAME_TOL
        {
            return Err(Error::Domain("frame vectors must be orthonormal".into()));
        }
        Ok(Self { mu1, mu2 })
    }

    /// Two frames spanning `ξ⊥`, `(e_a, e_b)` and `(e_a, −e_b)`. `e_a` comes
    /// from Gram–Schmidt on the first coordinate axis not parallel to `ξ`
    /// and `e_b = ξ̂ × e_a`. For `ξ = 0` the seed is `(e₁, e₂)`.
    pub fn pair_for(xi: [f64; 3]) -> [Frame; 2] {
        let len = norm(xi);
        let (ea, eb) = if len < 1e-14 {
            ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])
        } else {
            let xh = xi.map(|x| x / len);
            let axis = (0..3)
                .find(|&k| xh[k].abs() < 1.0 - 1e-9)
                .expect("a unit vector is parallel to at most one axis");
            let mut e = [0.0; 3];
            e[axis] = 1.0;
            let proj = xh[axis];
            let v = [0, 1, 2].map(|k| e[k] - proj * xh[k]);
            let nv = norm(v);
            let ea = v.map(|x| x / nv);
            (ea, cross(xh, ea))
        };
        [
            Frame { mu1: ea, mu2: eb },
            Frame {
                mu1: ea,
                mu2: eb.map(|x| -x),
            },
        ]
    }

    /// `μ₁ + iμ₂`.
    pub fn zeta0(&self) -> [Complex64; 3] {
        [0, 1, 2].map(|k| Complex64::new(self.mu1[k], self.mu2[k]))
    }
}

/// The two phase vectors `ζ₁ = ihξ/2 + μ₁ + i√(1 − h²|ξ|²/4) μ₂` and
/// `ζ₂ = ihξ/2 − μ₁ − i√(1 − h²|ξ|²/4) μ₂`.
pub fn zeta_pair(h: f64, xi: [f64; 3], frame: &Frame) -> Result<([Complex64; 3], [Complex64; 3])> {
    let s = 1.0 - h * h * dot(xi, xi) / 4.0;
    if s < 0.0 {
        return Err(Error::Domain(format!(
            "h = {h} is too large for |xi| = {}; need h|xi| <= 2",
            norm(xi)
        )));
    }
    let root = s.sqrt();
    let z1 = [0, 1, 2].map(|k| Complex64::new(frame.mu1[k], h * xi[k] / 2.0 + root * frame.mu2[k]));
    let z2 = [0, 1, 2].map(|k| Complex64::new(-frame.mu1[k], h * xi[k] / 2.0 - root * frame.mu2[k]));
    Ok((z1, z2))
}

/// How the remainder equation `T r = g` is solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RemainderSolve {
    /// `r = 0` on the boundary, `T r = g` at interior nodes.
    Dirichlet,
    /// The least-norm solution of `T r = g` at interior nodes with `r` free on
    /// the boundary: `r = M⁻¹T*w`, `(T M⁻¹ T*)w = g`, where `M` holds the node
    /// weights and `w` vanishes on the boundary.
    #[default]
    MinimalNorm,
}

/// Which of the paired solutions a context describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgoSide {
    /// `ζ = ζ₁`, `ζ₀ = μ₁ + iμ₂`.
    First,
    /// `ζ = ζ₂`, `ζ₀ = −μ₁ − iμ₂`.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoContext {
    h: f64,
    xi: [f64; 3],
    frame: Frame,
    side: CgoSide,
    zeta0: [Complex64; 3],
    zeta: [Complex64; 3],
    tau: f64,
    solve: RemainderSolve,
}

impl CgoContext {
    pub fn new(h: f64, xi: [f64; 3], frame: Frame, side: CgoSide) -> Result<Self> {
        if !(h > 0.0 && h <= 1.0) {
            return Err(Error::Domain(format!("h = {h} must lie in (0, 1]")));
        }
        let frame = Frame::new(frame.mu1, frame.mu2)?;
        let scale = norm(xi).max(1.0);
        if dot(frame.mu1, xi).abs() > FRAME_TOL * scale || dot(frame.mu2, xi).abs() > FRAME_TOL * scale {
            return Err(Error::Domain("frame vectors must be orthogonal to xi".into()));
        }
        let (z1, z2) = zeta_pair(h, xi, &frame)?;
        let z0 = frame.zeta0();
        let (zeta0, zeta) = match side {
            CgoSide::First => (z0, z1),
            CgoSide::Second => (z0.map(|z| -z), z2),
        };
        Ok(Self {
            h,
            xi,
            frame,
            side,
            zeta0,
            zeta,
            tau: h.sqrt(),
            solve: RemainderSolve::default(),
        })
    }

    pub fn first(h: f64, xi: [f64; 3], frame: Frame) -> Result<Self> {
        Self::new(h, xi, frame, CgoSide::First)
    }

    pub fn second(h: f64, xi: [f64; 3], frame: Frame) -> Result<Self> {
        Self::new(h, xi, frame, CgoSide::Second)
    }

    /// Overrides the mollifier scale (default `h^{1/2}`).
    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        MollifierSpec::new(tau)?;
        self.tau = tau;
        Ok(self)
    }

    pub fn with_remainder_solve(mut self, solve: RemainderSolve) -> Self {
        self.solve = solve;
        self
    }

    pub fn remainder_solve(&self) -> RemainderSolve {
        self.solve
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn xi(&self) -> [f64; 3] {
        self.xi
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn side(&self) -> CgoSide {
        self.side
    }

    pub fn zeta0(&self) -> [Complex64; 3] {
        self.zeta0
    }

    pub fn zeta(&self) -> [Complex64; 3] {
        self.zeta
    }

    /// `ζ − ζ₀`, of size `O(h)`.
    pub fn zeta_correction(&self) -> [Complex64; 3] {
        [0, 1, 2].map(|k| self.zeta[k] - self.zeta0[k])
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn mollifier(&self) -> MollifierSpec {
        MollifierSpec { tau: self.tau }
    }
}

/// Measured quantities of one construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgoDiagnostics {
    pub h: f64,
    pub tau: f64,
    /// `‖−2ζ₀·∇Φ_τ + ζ₀·V_τ‖ / ‖ζ₀·V_τ‖` on interior nodes.
    pub transport_residual: f64,
    /// `‖e^{x·Re ζ/h} h²P u‖ / ‖e^{x·Re ζ/h}(a + r)‖` on interior nodes, i.e. the
    /// semiclassical operator applied to `u` relative to `u`.
    pub pde_residual: f64,
    /// `‖r‖_{H¹_scl} = (‖r‖² + ‖h∇r‖²)^{1/2}`.
    pub r_h1scl: f64,
    /// Relative residual of the remainder solve.
    pub solve_residual: f64,
    pub phi_sup: f64,
    pub grad_phi_sup: f64,
    pub grad_phi_l2: f64,
    pub a_sup: f64,
    pub grad_a_sup: f64,
    pub grad_a_l2: f64,
    pub lap_a_l2: f64,
}

impl CgoDiagnostics {
    pub const CSV_HEADER: [&'static str; 5] = ["h", "tau", "transport_residual", "pde_residual", "r_h1scl"];

    pub fn csv_record(&self) -> [f64; 5] {
        [self.h, self.tau, self.transport_residual, self.pde_residual, self.r_h1scl]
    }

    pub fn is_finite(&self) -> bool {
        [
            self.transport_residual,
            self.pde_residual,
            self.r_h1scl,
            self.solve_residual,
            self.phi_sup,
            self.grad_phi_sup,
            self.grad_phi_l2,
            self.a_sup,
            self.grad_a_sup,
            self.grad_a_l2,
            self.lap_a_l2,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct CgoSolution {
    pub context: CgoContext,
    pub phi_tau: ScalarField,
    pub amplitude: ScalarField,
    pub remainder: ScalarField,
    pub diagnostics: CgoDiagnostics,
}

impl CgoSolution {
    /// `a + r`.
    pub fn envelope(&self) -> ScalarField {
        self.amplitude.add(&self.remainder).expect("same grid")
    }

    /// `u = e^{x·ζ/h}(a + r)`. Overflows for small `h` on large boxes; the
    /// library itself only works with the envelope.
    pub fn solution(&self) -> ScalarField {
        let d = *self.amplitude.domain();
        let z = self.context.zeta;
        let h = self.context.h;
        let env = self.envelope();
        ScalarField::from_vec(
            d,
            (0..d.len())
                .map(|n| {
                    let x = d.point(n);
                    let e: Complex64 = (0..3).map(|k| z[k] * x[k]).sum::<Complex64>() / h;
                    e.exp() * env.values()[n]
                })
                .collect(),
        )
    }
}

pub fn build_cgo(coeffs: &OperatorCoefficients, ctx: &CgoContext) -> Result<CgoSolution> {
    build_cgo_with(coeffs, ctx, CauchyQuadrature::default())
}

/// Builds `u = e^{x·ζ/h}(a + r)` on the coefficient grid.
///
/// `a = e^{Φ_τ}` with `Φ_τ = ½N_{ζ₀}⁻¹(ζ₀·V_τ)`, and `r` solves
/// `T r = −[−h²Δa + h²V·∇a + h²(∇·W)a + h²qa] + 2hζ'·∇a − hζ₀·(V − V_τ)a − hV·ζ' a`
/// with zero Dirichlet data, where `ζ' = ζ − ζ₀` and
/// `T = −h²Δ − 2hζ·∇ + h²V·∇ + hV·ζ + h²(∇·W + q)` is the conjugated
/// semiclassical operator.
pub fn build_cgo_with(
    coeffs: &OperatorCoefficients,
    ctx: &CgoContext,
    quad: CauchyQuadrature,
) -> Result<CgoSolution> {
    let d = *coeffs.domain();
    let h = ctx.h;
    let z = ctx.zeta;
    let z0 = ctx.zeta0;
    let zc = ctx.zeta_correction();
    let hc = Complex64::new(h, 0.0);
    let h2 = Complex64::new(h * h, 0.0);

    let (phi, v_tau) = transport_phase_with(&coeffs.v, z0, ctx.mollifier(), quad)?;
    let a = phi.map(|p| p.exp());
    let grad_a = gradient(&a);
    let lap_a = laplacian(&a);
    let div_w = divergence(&coeffs.w);

    let v = &coeffs.v;
    let rhs_full: Vec<Complex64> = (0..d.len())
        .map(|n| {
            let vn = v.at(n);
            let ga = grad_a.at(n);
            let an = a.values()[n];
            let dv: [Complex64; 3] = [0, 1, 2].map(|k| vn[k] - v_tau.comp(k)[n]);
            -(-h2 * lap_a.values()[n]
                + h2 * cdot(vn, ga)
                + h2 * div_w.values()[n] * an
                + h2 * coeffs.q.values()[n] * an)
                + 2.0 * hc * cdot(zc, ga)
                - hc * cdot(z0, dv) * an
                - hc * cdot(vn, zc) * an
        })
        .collect();

    let drift: [Vec<Complex64>; 3] =
        [0, 1, 2].map(|k| (0..d.len()).map(|n| -2.0 * hc * z[k] + h2 * v.comp(k)[n]).collect());
    let zeroth: Vec<Complex64> = (0..d.len())
        .map(|n| hc * cdot(v.at(n), z) + h2 * (div_w.values()[n] + coeffs.q.values()[n]))
        .collect();
    let interior = d.interior_nodes();
    let b: Vec<Complex64> = interior.iter().map(|&n| rhs_full[n]).collect();
    let (r, solve_residual) = match ctx.solve {
        RemainderSolve::Dirichlet => {
            let t = assemble_interior_strong(&d, h2, &drift, &zeroth, false);
            let (x, res) = solve_sparse(&t, &b, h)?;
            let mut r = vec![Complex64::new(0.0, 0.0); d.len()];
            for (k, &n) in interior.iter().enumerate() {
                r[n] = x[k];
            }
            (r, res)
        }
        RemainderSolve::MinimalNorm => {
            let t = assemble_interior_strong(&d, h2, &drift, &zeroth, true);
            let inv_mass: Vec<f64> = d.weights().iter().map(|w| 1.0 / w).collect();
            let t_adj = t.adjoint();
            let normal = t.product(&inv_mass, &t_adj);
            let (w, _) = solve_sparse(&normal, &b, h)?;
            let r: Vec<Complex64> = t_adj.matvec(&w).iter().zip(&inv_mass).map(|(v, m)| v * m).collect();
            let tr = t.matvec(&r);
            let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            let res = if bn > 0.0 {
                b.iter().zip(&tr).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt() / bn
            } else {
                0.0
            };
            if res > 1e-6 {
                return Err(Error::Solver {
                    message: format!("least-norm remainder at h = {h} misses the equation"),
                    residual: res,
                });
            }
            (r, res)
        }
    };
    let remainder = ScalarField::from_vec(d, r);

    let diagnostics = diagnose(coeffs, ctx, &phi, &v_tau, &a, &remainder, solve_residual);
    if !diagnostics.is_finite() {
        return Err(Error::Solver {
            message: format!("non-finite CGO diagnostics at h = {h}"),
            residual: f64::NAN,
        });
    }
    Ok(CgoSolution {
        context: *ctx,
        phi_tau: phi,
        amplitude: a,
        remainder,
        diagnostics,
    })
}

/// Direct sparse solve with one refinement step. Errors carry `h` and the
/// residual after each pass.
fn solve_sparse(t: &crate::forward::assembly::Csr, b: &[Complex64], h: f64) -> Result<(Vec<Complex64>, f64)> {
    let lu = t.to_faer().sp_lu().map_err(|e| Error::Solver {
        message: format!("factorization of the conjugated operator failed at h = {h}: {e}"),
        residual: f64::NAN,
    })?;
    let bn = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if bn == 0.0 {
        return Ok((vec![Complex64::new(0.0, 0.0); b.len()], 0.0));
    }
    let rhs = Mat::from_fn(b.len(), 1, |r, _| b[r]);
    let sol = lu.solve(&rhs);
    let mut x: Vec<Complex64> = (0..b.len()).map(|r| sol[(r, 0)]).collect();
    let mut history = Vec::with_capacity(2);
    for pass in 0..2 {
        let tx = t.matvec(&x);
        let res: Vec<Complex64> = b.iter().zip(&tx).map(|(a, c)| a - c).collect();
        let rel = res.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() / bn;
        history.push(rel);
        if rel <= SOLVE_TOL {
            return Ok((x, rel));
        }
        if pass == 0 {
            let corr = lu.solve(&Mat::from_fn(res.len(), 1, |r, _| res[r]));
            for (k, xk) in x.iter_mut().enumerate() {
                *xk += corr[(k, 0)];
            }
        }
    }
    Err(Error::Solver {
        message: format!("remainder solve at h = {h} did not converge; residual history {history:?}"),
        residual: *history.last().unwrap(),
    })
}

fn interior_norm(d: &DomainSpec, f: impl Fn(usize) -> Complex64, weight: impl Fn(usize) -> f64) -> f64 {
    d.interior_nodes()
        .into_iter()
        .map(|n| d.node_weight(n) * weight(n) * f(n).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

fn diagnose(
    coeffs: &OperatorCoefficients,
    ctx: &CgoContext,
    phi: &ScalarField,
    v_tau: &VectorField,
    a: &ScalarField,
    r: &ScalarField,
    solve_residual: f64,
) -> CgoDiagnostics {
    let d = *a.domain();
    let h = ctx.h;
    let z = ctx.zeta;
    let z0 = ctx.zeta0;
    let grad_phi = gradient(phi);

    let source = v_tau.dot_const(z0);
    let n_phi = cauchy::directional_derivative(phi, z0);
    let transport = interior_norm(&d, |n| -2.0 * n_phi[n] + source.values()[n], |_| 1.0);
    let source_norm = interior_norm(&d, |n| source.values()[n], |_| 1.0);
    let transport_residual = if source_norm > 0.0 { transport / source_norm } else { transport };

    // h²P u = e^{x·ζ/h} T(a + r); the exponential is applied through its
    // modulus, shifted so the largest weight is one.
    let u = a.add(r).expect("same grid");
    let hc = Complex64::new(h, 0.0);
    let h2 = Complex64::new(h * h, 0.0);
    let div_w = divergence(&coeffs.w);
    let du: [Vec<Complex64>; 3] = [0, 1, 2].map(|k| partial(&d, u.values(), k));
    let d2u: [Vec<Complex64>; 3] = [0, 1, 2].map(|k| second_partial(&d, u.values(), k));
    let exponent: Vec<f64> = (0..d.len())
        .map(|n| {
            let x = d.point(n);
            (0..3).map(|k| x[k] * z[k].re).sum::<f64>() / h
        })
        .collect();
    let top = d
        .interior_nodes()
        .into_iter()
        .map(|n| exponent[n])
        .fold(f64::NEG_INFINITY, f64::max);
    let weight = |n: usize| (2.0 * (exponent[n] - top)).exp();
    let applied = |n: usize| {
        let grad = [du[0][n], du[1][n], du[2][n]];
        let lap_u = d2u[0][n] + d2u[1][n] + d2u[2][n];
        let vn = coeffs.v.at(n);
        -h2 * lap_u - 2.0 * hc * cdot(z, grad)
            + h2 * cdot(vn, grad)
            + (hc * cdot(vn, z) + h2 * (div_w.values()[n] + coeffs.q.values()[n])) * u.values()[n]
    };
    let num = interior_norm(&d, applied, weight);
    let den = interior_norm(&d, |n| u.values()[n], weight);
    let pde_residual = if den > 0.0 { num / den } else { num };

    let grad_r = gradient(r);
    let r_h1scl = (r.l2_norm().powi(2) + (h * grad_r.l2_norm()).powi(2)).sqrt();

    let grad_a = gradient(a);
    CgoDiagnostics {
        h,
        tau: ctx.tau,
        transport_residual,
        pde_residual,
        r_h1scl,
        solve_residual,
        phi_sup: phi.max_abs(),
        grad_phi_sup: grad_phi.max_abs(),
        grad_phi_l2: grad_phi.l2_norm(),
        a_sup: a.max_abs(),
        grad_a_sup: grad_a.max_abs(),
        grad_a_l2: grad_a.l2_norm(),
        lap_a_l2: laplacian(a).l2_norm(),
    }
}
