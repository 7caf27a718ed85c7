//! The inverse of `N_ζ₀ = ζ₀·∇` by convolution with `1/(2π(y₁ + iy₂))` over
//! the plane spanned by `Re ζ₀` and `Im ζ₀`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::convolve::Convolver;
use super::mollifier::{mollify, MollifierSpec};
use crate::domain::ops::partial;
use crate::domain::{DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Polar quadrature on the transverse plane: midpoint rule with `n_rho`
/// radial steps across the box diagonal and `n_theta` equally spaced angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CauchyQuadrature {
    pub n_rho: usize,
    pub n_theta: usize,
}

impl Default for CauchyQuadrature {
    fn default() -> Self {
        Self {
            n_rho: 65,
            n_theta: 64,
        }
    }
}

impl CauchyQuadrature {
    pub fn new(n_rho: usize, n_theta: usize) -> Result<Self> {
        // An even angle count pairs θ with θ + π, which makes the transform
        // exactly odd in ζ₀.
        if n_rho == 0 || n_theta < 4 || n_theta % 2 != 0 {
            return Err(Error::Domain(format!(
                "quadrature needs n_rho > 0 and an even n_theta >= 4 (got {n_rho}, {n_theta})"
            )));
        }
        Ok(Self { n_rho, n_theta })
    }
}

/// Checks `ζ₀·ζ₀ = 0` and `|Re ζ₀| = |Im ζ₀| = 1`.
pub fn check_zeta0(zeta0: [Complex64; 3]) -> Result<()> {
    let dot: Complex64 = zeta0.iter().map(|z| z * z).sum();
    let re: f64 = zeta0.iter().map(|z| z.re * z.re).sum::<f64>().sqrt();
    let im: f64 = zeta0.iter().map(|z| z.im * z.im).sum::<f64>().sqrt();
    if dot.norm() > 1e-10 || (re - 1.0).abs() > 1e-10 || (im - 1.0).abs() > 1e-10 {
        return Err(Error::Domain(format!(
            "zeta0 must satisfy zeta0·zeta0 = 0 and |Re| = |Im| = 1 (got |zeta0·zeta0| = {:.2e}, |Re| = {re}, |Im| = {im})",
            dot.norm()
        )));
    }
    Ok(())
}

pub fn cauchy_transform(f: &ScalarField, zeta0: [Complex64; 3]) -> Result<ScalarField> {
    cauchy_transform_with(f, zeta0, CauchyQuadrature::default())
}

/// `(N_ζ₀⁻¹f)(x) = (1/2π) ∫₀^{2π} ∫₀^∞ f(x − ρ(cos θ Re ζ₀ + sin θ Im ζ₀)) e^{−iθ} dρ dθ`,
/// the polar form of the planar Cauchy kernel.
///
/// `f` is extended by zero outside the box and sampled by tensor cubic
/// interpolation. Every node sees the same sample offsets, so the quadrature
/// collapses to a fixed grid stencil applied by FFT convolution.
pub fn cauchy_transform_with(
    f: &ScalarField,
    zeta0: [Complex64; 3],
    quad: CauchyQuadrature,
) -> Result<ScalarField> {
    check_zeta0(zeta0)?;
    let d = *f.domain();
    if f.values().iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Ok(ScalarField::zeros(d));
    }
    let taps = cauchy_stencil(&d, zeta0, quad);
    ScalarField::new(d, Convolver::new(d.dims(), &taps).apply(f.values()))
}

/// Weights `K` with `(N_ζ₀⁻¹f)_i = Σ_o K_o f_{i−o}`.
fn cauchy_stencil(
    d: &DomainSpec,
    zeta0: [Complex64; 3],
    quad: CauchyQuadrature,
) -> Vec<([isize; 3], Complex64)> {
    let re = zeta0.map(|z| z.re);
    let im = zeta0.map(|z| z.im);
    let h = d.spacing();
    let dims = d.dims();
    let diag = (0..3)
        .map(|a| (d.upper()[a] - d.lower()[a]).powi(2))
        .sum::<f64>()
        .sqrt();
    let d_rho = diag / quad.n_rho as f64;
    let d_theta = 2.0 * PI / quad.n_theta as f64;
    let weight = d_rho * d_theta / (2.0 * PI);
    // Angles θ and θ + π use exactly negated directions and phases, so the
    // stencil for −ζ₀ is the negated stencil for ζ₀.
    let half = quad.n_theta / 2;
    let mut angles = Vec::with_capacity(quad.n_theta);
    for k in 0..half {
        let (s, c) = (k as f64 * d_theta).sin_cos();
        angles.push((c, s));
    }
    for k in 0..half {
        let (c, s) = angles[k];
        angles.push((-c, -s));
    }
    let reach = dims.map(|n| n as isize - 1);
    let side = dims.map(|n| 2 * n - 1);
    let mut stencil = vec![Complex64::new(0.0, 0.0); side.iter().product()];
    for &(c, s) in &angles {
        let dir = [0, 1, 2].map(|a| c * re[a] + s * im[a]);
        let phase = Complex64::new(c, -s) * weight;
        for m in 0..quad.n_rho {
            let rho = (m as f64 + 0.5) * d_rho;
            // The sample x_i − ρ·dir sits at fractional index i + t.
            let mut base = [0isize; 3];
            let mut w = [[0.0; 4]; 3];
            for a in 0..3 {
                let t = -rho * dir[a] / h[a];
                let b = t.floor();
                base[a] = b as isize;
                w[a] = cubic_weights(t - b);
            }
            for (lk, wk) in w[2].iter().enumerate() {
                let oz = -(base[2] + lk as isize - 1);
                if oz.abs() > reach[2] {
                    continue;
                }
                for (lj, wj) in w[1].iter().enumerate() {
                    let oy = -(base[1] + lj as isize - 1);
                    if oy.abs() > reach[1] {
                        continue;
                    }
                    for (li, wi) in w[0].iter().enumerate() {
                        let ox = -(base[0] + li as isize - 1);
                        if ox.abs() > reach[0] {
                            continue;
                        }
                        let idx = (ox + reach[0]) as usize
                            + side[0] * ((oy + reach[1]) as usize + side[1] * (oz + reach[2]) as usize);
                        stencil[idx] += phase * (wi * wj * wk);
                    }
                }
            }
        }
    }
    let mut taps = Vec::new();
    for (idx, v) in stencil.into_iter().enumerate() {
        if v != Complex64::new(0.0, 0.0) {
            let i = idx % side[0];
            let j = (idx / side[0]) % side[1];
            let k = idx / (side[0] * side[1]);
            taps.push((
                [
                    i as isize - reach[0],
                    j as isize - reach[1],
                    k as isize - reach[2],
                ],
                v,
            ));
        }
    }
    taps
}

/// Four-point Lagrange weights at nodes −1, 0, 1, 2 for a point at `t ∈ [0, 1)`.
fn cubic_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

/// `Φ_τ = ½ N_ζ₀⁻¹(ζ₀·V_τ)`, the phase solving `−2ζ₀·∇Φ_τ + ζ₀·V_τ = 0`.
pub fn transport_phase(
    v: &VectorField,
    zeta0: [Complex64; 3],
    spec: MollifierSpec,
) -> Result<ScalarField> {
    transport_phase_with(v, zeta0, spec, CauchyQuadrature::default()).map(|(phi, _)| phi)
}

/// As [`transport_phase`], also returning `V_τ`.
pub fn transport_phase_with(
    v: &VectorField,
    zeta0: [Complex64; 3],
    spec: MollifierSpec,
    quad: CauchyQuadrature,
) -> Result<(ScalarField, VectorField)> {
    check_zeta0(zeta0)?;
    let v_tau = mollify(v, spec);
    let source = v_tau.dot_const(zeta0).scale(Complex64::new(0.5, 0.0));
    Ok((cauchy_transform_with(&source, zeta0, quad)?, v_tau))
}

/// `(ζ₀·∇)Φ` with fourth-order centred differences, falling back to the
/// second-order stencils within two nodes of a face.
pub(crate) fn directional_derivative(phi: &ScalarField, zeta0: [Complex64; 3]) -> Vec<Complex64> {
    let d = *phi.domain();
    let v = phi.values();
    let dims = d.dims();
    let h = d.spacing();
    let strides = [1, dims[0], dims[0] * dims[1]];
    let mut out = vec![Complex64::new(0.0, 0.0); d.len()];
    for axis in 0..3 {
        let coarse = partial(&d, v, axis);
        let s = strides[axis];
        for n in 0..d.len() {
            let i = d.ijk(n)[axis];
            let der = if i >= 2 && i + 2 < dims[axis] {
                (v[n - 2 * s] - v[n + 2 * s] + 8.0 * (v[n + s] - v[n - s])) / (12.0 * h[axis])
            } else {
                coarse[n]
            };
            out[n] += zeta0[axis] * der;
        }
    }
    out
}

/// `‖(ζ₀·∇)Φ − f‖ / ‖f‖` over nodes at least `margin` from the boundary, with
/// the derivative taken to fourth order.
pub fn transform_residual(
    phi: &ScalarField,
    f: &ScalarField,
    zeta0: [Complex64; 3],
    margin: f64,
) -> f64 {
    let d: DomainSpec = *phi.domain();
    let dphi = directional_derivative(phi, zeta0);
    let mut num = 0.0;
    let mut den = 0.0;
    for n in 0..d.len() {
        if d.distance_to_boundary(d.point(n)) < margin {
            continue;
        }
        let w = d.node_weight(n);
        num += w * (dphi[n] - f.values()[n]).norm_sqr();
        den += w * f.values()[n].norm_sqr();
    }
    if den == 0.0 {
        return num.sqrt();
    }
    (num / den).sqrt()
}
