//! Physical fluid parameters, the PDE coefficients they induce at a given
//! frequency, and gauge transformations of those coefficients.

mod phantoms;

pub use phantoms::{Bump, FluidState, Phantom};

use num_complex::Complex64;

use crate::domain::{ensure_same, gradient, laplacian, weighted_sq, ScalarField, VectorField};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Tolerance on imaginary parts when checking that a physical field is real.
const REAL_TOL: f64 = 1e-12;

/// Sound speed, density, velocity and the absorption law `α = ω^ζ α₀`.
#[derive(Debug, Clone)]
pub struct FluidParameters {
    c: ScalarField,
    rho: ScalarField,
    v: VectorField,
    alpha0: ScalarField,
    zeta: ScalarField,
}

impl FluidParameters {
    pub fn new(
        c: ScalarField,
        rho: ScalarField,
        v: VectorField,
        alpha0: ScalarField,
        zeta: ScalarField,
    ) -> Result<Self> {
        let d = c.domain();
        for other in [rho.domain(), v.domain(), alpha0.domain(), zeta.domain()] {
            ensure_same(d, other)?;
        }
        let named = [("c", &c), ("rho", &rho), ("alpha0", &alpha0), ("zeta", &zeta)];
        for (name, f) in named {
            if !f.is_real(REAL_TOL) {
                return Err(Error::Domain(format!("{name} must be real-valued")));
            }
        }
        if v.im().max_abs() > REAL_TOL {
            return Err(Error::Domain("v must be real-valued".into()));
        }
        if let Some(n) = c.values().iter().position(|x| !(x.re > 0.0)) {
            return Err(Error::Domain(format!("sound speed not positive at node {n}")));
        }
        if let Some(n) = rho.values().iter().position(|x| !(x.re > 0.0)) {
            return Err(Error::Domain(format!("density not positive at node {n}")));
        }
        let bad_zeta = alpha0
            .values()
            .iter()
            .zip(zeta.values())
            .position(|(a, z)| a.re != 0.0 && z.re == 0.0);
        if let Some(n) = bad_zeta {
            return Err(Error::Domain(format!(
                "absorption exponent vanishes where alpha0 is nonzero (node {n})"
            )));
        }
        Ok(Self {
            c,
            rho,
            v,
            alpha0,
            zeta,
        })
    }

    pub fn c(&self) -> &ScalarField {
        &self.c
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn v(&self) -> &VectorField {
        &self.v
    }

    pub fn alpha0(&self) -> &ScalarField {
        &self.alpha0
    }

    pub fn zeta(&self) -> &ScalarField {
        &self.zeta
    }

    /// `α(x, ω) = ω^{ζ(x)} α₀(x)`, evaluated as `exp(ζ ln ω) α₀`.
    pub fn alpha(&self, omega: f64) -> ScalarField {
        let ln = omega.ln();
        self.alpha0
            .zip_with(&self.zeta, |a, z| a * (z.re * ln).exp())
            .expect("fields share a grid by construction")
    }

    /// The same fluid with density multiplied by a positive constant.
    pub fn with_density_scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0) {
            return Err(Error::Domain(format!("density factor {factor} must be positive")));
        }
        let mut out = self.clone();
        out.rho = self.rho.scale(Complex64::new(factor, 0.0));
        Ok(out)
    }
}

/// PDE coefficients `(A, q)` at one frequency.
#[derive(Debug, Clone)]
pub struct FrequencyPerturbation {
    pub omega: f64,
    pub a: VectorField,
    pub q: ScalarField,
}

/// `A = ωv/c² + (i/2)∇ρ/ρ` and `q = −ω²/c² − 2iω α(ω)/c`, with `∇ρ` from the
/// discrete gradient.
pub fn coefficients_from_fluid(
    params: &FluidParameters,
    omega: f64,
) -> Result<FrequencyPerturbation> {
    let grad = gradient(params.rho());
    let log_grad = grad
        .mul_scalar(&params.rho().map(|r| 1.0 / r))
        .expect("fields share a grid by construction");
    coefficients_with_log_gradient(params, omega, &log_grad)
}

/// As [`coefficients_from_fluid`] with a caller-supplied `∇ρ/ρ`, so that an
/// analytic density can bypass the difference scheme.
pub fn coefficients_with_log_gradient(
    params: &FluidParameters,
    omega: f64,
    grad_rho_over_rho: &VectorField,
) -> Result<FrequencyPerturbation> {
    if !(omega > 0.0 && omega.is_finite()) {
        return Err(Error::Domain(format!("frequency {omega} must be positive")));
    }
    let d = *params.c().domain();
    ensure_same(&d, grad_rho_over_rho.domain())?;
    let alpha = params.alpha(omega);
    let inv_c2 = params.c().map(|c| 1.0 / (c * c));
    let a = params
        .v()
        .mul_scalar(&inv_c2.scale(Complex64::new(omega, 0.0)))?
        .add(&grad_rho_over_rho.scale(0.5 * I))?;
    let q = inv_c2
        .scale(Complex64::new(-omega * omega, 0.0))
        .zip_with(&alpha.zip_with(params.c(), |al, c| al / c)?, |w, ac| {
            w - 2.0 * I * omega * ac
        })?;
    Ok(FrequencyPerturbation { omega, a, q })
}

/// A gauge function `φ`. When flagged boundary-flat, `φ` and its normal
/// derivative vanish on the boundary, which leaves the DtN map unchanged.
#[derive(Debug, Clone)]
pub struct GaugePotential {
    phi: ScalarField,
    boundary_flat: bool,
}

impl GaugePotential {
    /// A gauge with no claim about its boundary behaviour.
    pub fn new(phi: ScalarField) -> Self {
        Self {
            phi,
            boundary_flat: false,
        }
    }

    /// A gauge checked to be flat on the boundary: `|φ| ≤ 1e−10·max(1, ‖φ‖∞)`
    /// and `|φ₁ − φ₀|/h ≤ 1e−6·max(1, ‖∇φ‖∞)` across every boundary face.
    pub fn boundary_flat(phi: ScalarField) -> Result<Self> {
        let (val, normal) = boundary_flatness(&phi);
        let grad = gradient(&phi);
        if val > 1e-10 * phi.max_abs().max(1.0) || normal > 1e-6 * grad.max_abs().max(1.0) {
            return Err(Error::Domain(format!(
                "gauge is not boundary-flat: |phi| up to {val:.3e}, |d_nu phi| up to {normal:.3e}"
            )));
        }
        Ok(Self {
            phi,
            boundary_flat: true,
        })
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn is_boundary_flat(&self) -> bool {
        self.boundary_flat
    }

    pub fn negated(&self) -> Self {
        Self {
            phi: self.phi.scale(Complex64::new(-1.0, 0.0)),
            boundary_flat: self.boundary_flat,
        }
    }
}

/// Largest boundary values of `|φ|` and of the first normal difference
/// quotient `|φ₁ − φ₀|/h` into the grid.
fn boundary_flatness(phi: &ScalarField) -> (f64, f64) {
    let d = *phi.domain();
    let dims = d.dims();
    let h = d.spacing();
    let mut val: f64 = 0.0;
    let mut normal: f64 = 0.0;
    for n in d.boundary_nodes() {
        val = val.max(phi.values()[n].norm());
        let ijk = d.ijk(n);
        for axis in 0..3 {
            let mut inner = ijk;
            if ijk[axis] == 0 {
                inner[axis] = 1;
            } else if ijk[axis] == dims[axis] - 1 {
                inner[axis] = dims[axis] - 2;
            } else {
                continue;
            }
            let m = d.index(inner[0], inner[1], inner[2]);
            normal = normal.max((phi.values()[m] - phi.values()[n]).norm() / h[axis]);
        }
    }
    (val, normal)
}

/// `(A + ∇φ, q + 2A·∇φ + (∇φ)² − iΔφ)` with discrete derivatives of `φ`.
pub fn apply_gauge(
    a: &VectorField,
    q: &ScalarField,
    phi: &GaugePotential,
) -> Result<(VectorField, ScalarField)> {
    let grad = gradient(phi.phi());
    let lap = laplacian(phi.phi());
    apply_gauge_with(a, q, &grad, &lap)
}

/// Gauge transformation from supplied `∇φ` and `Δφ`.
pub fn apply_gauge_with(
    a: &VectorField,
    q: &ScalarField,
    grad_phi: &VectorField,
    lap_phi: &ScalarField,
) -> Result<(VectorField, ScalarField)> {
    ensure_same(a.domain(), q.domain())?;
    let a_new = a.add(grad_phi)?;
    let cross = a.dot(grad_phi)?.scale(Complex64::new(2.0, 0.0));
    let sq = grad_phi.dot(grad_phi)?;
    let q_new = q
        .add(&cross)?
        .add(&sq)?
        .sub(&lap_phi.scale(I))?;
    Ok((a_new, q_new))
}

/// Strong-form `L_{A,q}u = −Δu − 2iA·∇u + qu` with the domain stencils.
pub fn magnetic_operator(a: &VectorField, q: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
    ensure_same(a.domain(), u.domain())?;
    ensure_same(q.domain(), u.domain())?;
    let drift = a.dot(&gradient(u))?;
    let lap = laplacian(u);
    let mut out = Vec::with_capacity(u.values().len());
    for n in 0..u.values().len() {
        out.push(-lap.values()[n] - 2.0 * I * drift.values()[n] + q.values()[n] * u.values()[n]);
    }
    ScalarField::new(*u.domain(), out)
}

/// Interior L² norm of `e^{−iφ}L_{A₂,q₂}(e^{iφ}u) − L_{A₁,q₁}u`.
pub fn conjugation_residual(
    a1: &VectorField,
    q1: &ScalarField,
    a2: &VectorField,
    q2: &ScalarField,
    phi: &GaugePotential,
    u: &ScalarField,
) -> Result<f64> {
    let phase = phi.phi().map(|p| (I * p).exp());
    let lifted = u.mul(&phase)?;
    let left = magnetic_operator(a2, q2, &lifted)?.zip_with(&phase, |l, e| l / e)?;
    let right = magnetic_operator(a1, q1, u)?;
    let diff = left.sub(&right)?;
    Ok(weighted_sq(diff.domain(), diff.values(), true).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::DomainSpec;

    fn c64(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn uniform(d: DomainSpec, c: f64, rho: f64, v: [f64; 3]) -> FluidParameters {
        FluidParameters::new(
            ScalarField::constant(d, c64(c)),
            ScalarField::constant(d, c64(rho)),
            VectorField::from_real_fn(d, |_| v),
            ScalarField::zeros(d),
            ScalarField::zeros(d),
        )
        .unwrap()
    }

    #[test]
    fn still_unit_fluid_gives_helmholtz() {
        let d = DomainSpec::cube(0.5, 5).unwrap();
        let fp = coefficients_from_fluid(&uniform(d, 1.0, 1.0, [0.0; 3]), 1.0).unwrap();
        assert!(fp.a.max_abs() < 1e-14);
        assert!(fp.q.values().iter().all(|q| (q - c64(-1.0)).norm() < 1e-14));
    }

    #[test]
    fn uniform_flow_gives_constant_drift() {
        let d = DomainSpec::cube(0.5, 5).unwrap();
        let fp = coefficients_from_fluid(&uniform(d, 1.0, 1.0, [1.0, 0.0, 0.0]), 2.0).unwrap();
        for n in 0..d.len() {
            let a = fp.a.at(n);
            assert!((a[0] - c64(2.0)).norm() < 1e-14);
            assert!(a[1].norm() < 1e-14 && a[2].norm() < 1e-14);
            assert!((fp.q.values()[n] - c64(-4.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn exponential_density_gives_constant_imaginary_drift() {
        let d = DomainSpec::cube(0.5, 17).unwrap();
        let mut p = uniform(d, 1.0, 1.0, [0.0; 3]);
        p.rho = ScalarField::from_real_fn(d, |x| x[0].exp());
        let exact = VectorField::from_real_fn(d, |_| [1.0, 0.0, 0.0]);
        let fp = coefficients_with_log_gradient(&p, 1.0, &exact).unwrap();
        assert!(fp.a.im().sub(&VectorField::from_real_fn(d, |_| [0.5, 0.0, 0.0])).unwrap().max_abs() < 1e-14);
        // The discrete gradient of e^x is accurate to O(h²) relative.
        let fd = coefficients_from_fluid(&p, 1.0).unwrap();
        let err = fd.a.im().sub(&exact.scale(c64(0.5))).unwrap().max_abs();
        assert!(err < 2e-3, "{err}");
    }

    #[test]
    fn absorption_enters_imaginary_part_of_q() {
        let d = DomainSpec::cube(0.5, 5).unwrap();
        let p = FluidParameters::new(
            ScalarField::constant(d, c64(2.0)),
            ScalarField::constant(d, c64(1.0)),
            VectorField::zeros(d),
            ScalarField::constant(d, c64(0.3)),
            ScalarField::constant(d, c64(1.5)),
        )
        .unwrap();
        let omega: f64 = 3.0;
        let fp = coefficients_from_fluid(&p, omega).unwrap();
        let expected = -2.0 * omega * omega.powf(1.5) * 0.3 / 2.0;
        assert!((fp.q.values()[0].im - expected).abs() < 1e-12);
        assert!((fp.q.values()[0].re + omega * omega / 4.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let d = DomainSpec::cube(0.5, 5).unwrap();
        let one = ScalarField::constant(d, c64(1.0));
        let zero = ScalarField::zeros(d);
        let v = VectorField::zeros(d);
        assert!(FluidParameters::new(zero.clone(), one.clone(), v.clone(), zero.clone(), zero.clone()).is_err());
        assert!(FluidParameters::new(one.clone(), one.clone(), v.clone(), one.clone(), zero.clone()).is_err());
        let complex_c = ScalarField::constant(d, Complex64::new(1.0, 0.1));
        assert!(FluidParameters::new(complex_c, one.clone(), v, zero.clone(), zero).is_err());
        let p = uniform(d, 1.0, 1.0, [0.0; 3]);
        assert!(coefficients_from_fluid(&p, 0.0).is_err());
    }

    #[test]
    fn zero_gauge_is_identity() {
        let d = DomainSpec::cube(0.5, 9).unwrap();
        let a = VectorField::from_real_fn(d, |p| [p[1], -p[0], 0.3]);
        let q = ScalarField::from_real_fn(d, |p| p[2] * p[2]);
        let g = GaugePotential::boundary_flat(ScalarField::zeros(d)).unwrap();
        let (a2, q2) = apply_gauge(&a, &q, &g).unwrap();
        assert_eq!(a2, a);
        assert_eq!(q2, q);
    }

    #[test]
    fn conjugation_residual_vanishes_for_zero_gauge() {
        let d = DomainSpec::cube(0.5, 9).unwrap();
        let a = VectorField::from_real_fn(d, |p| [p[1], -p[0], 0.3]);
        let q = ScalarField::from_real_fn(d, |p| 1.0 + p[2]);
        let u = ScalarField::from_real_fn(d, |p| (p[0] + 2.0 * p[1]).sin());
        let g = GaugePotential::new(ScalarField::zeros(d));
        assert!(conjugation_residual(&a, &q, &a, &q, &g, &u).unwrap() < 1e-12);
    }

    #[test]
    fn gauge_flatness_check() {
        let d = DomainSpec::cube(0.5, 17).unwrap();
        let bump = Bump::new([0.0; 3], 0.3, 1.0);
        assert!(GaugePotential::boundary_flat(ScalarField::from_real_fn(d, |p| bump.value(p))).is_ok());
        assert!(GaugePotential::boundary_flat(ScalarField::from_real_fn(d, |p| p[0])).is_err());
    }
}
