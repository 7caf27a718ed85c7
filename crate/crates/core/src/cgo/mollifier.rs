//! Radial bump mollifier applied by zero-padded FFT convolution.

use num_complex::Complex64;

use super::convolve::Convolver;
use crate::domain::{DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};

/// Kernel `ψ(r) = exp(−1/(1 − r²))` on the unit ball, scaled to radius `tau`
/// and normalized so the discrete weights sum to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierSpec {
    pub tau: f64,
}

impl MollifierSpec {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("mollifier scale {tau} must be positive")));
        }
        Ok(Self { tau })
    }

    /// Profile value at `r` (in units of the support radius). Lies in `[0, 1]`.
    pub fn profile(r: f64) -> f64 {
        if r.abs() < 1.0 {
            (-1.0 / (1.0 - r * r)).exp()
        } else {
            0.0
        }
    }

    /// Whether the kernel resolves on this grid; below the spacing the
    /// mollifier is skipped.
    pub fn resolves(&self, domain: &DomainSpec) -> bool {
        self.tau >= domain.max_spacing()
    }

    /// Normalized kernel weights with their integer offsets.
    pub fn kernel(&self, domain: &DomainSpec) -> Vec<([isize; 3], f64)> {
        let h = domain.spacing();
        let reach = [0, 1, 2].map(|d| (self.tau / h[d]).floor() as isize);
        let mut taps = Vec::new();
        for k in -reach[2]..=reach[2] {
            for j in -reach[1]..=reach[1] {
                for i in -reach[0]..=reach[0] {
                    let off = [i, j, k];
                    let r = (0..3)
                        .map(|d| (off[d] as f64 * h[d]).powi(2))
                        .sum::<f64>()
                        .sqrt()
                        / self.tau;
                    let w = Self::profile(r);
                    if w > 0.0 {
                        taps.push((off, w));
                    }
                }
            }
        }
        let total: f64 = taps.iter().map(|t| t.1).sum();
        for t in &mut taps {
            t.1 /= total;
        }
        taps
    }

    fn convolver(&self, domain: &DomainSpec) -> Convolver {
        let taps: Vec<_> = self
            .kernel(domain)
            .into_iter()
            .map(|(o, w)| (o, Complex64::new(w, 0.0)))
            .collect();
        Convolver::new(domain.dims(), &taps)
    }
}

/// `V_τ = V ∗ ψ_τ` componentwise. Values outside the box are taken as zero,
/// and the result is kept on the same grid.
pub fn mollify(field: &VectorField, spec: MollifierSpec) -> VectorField {
    let d = *field.domain();
    if !spec.resolves(&d) {
        log::warn!(
            "mollifier scale {} is below the grid spacing {}; returning the input",
            spec.tau,
            d.max_spacing()
        );
        return field.clone();
    }
    let conv = spec.convolver(&d);
    VectorField::new(d, [0, 1, 2].map(|c| conv.apply(field.comp(c))))
        .expect("convolution of finite data is finite")
}

/// Scalar variant of [`mollify`].
pub fn mollify_scalar(field: &ScalarField, spec: MollifierSpec) -> ScalarField {
    let d = *field.domain();
    if !spec.resolves(&d) {
        log::warn!(
            "mollifier scale {} is below the grid spacing {}; returning the input",
            spec.tau,
            d.max_spacing()
        );
        return field.clone();
    }
    ScalarField::new(d, spec.convolver(&d).apply(field.values()))
        .expect("convolution of finite data is finite")
}

/// Norms of `V_τ` and `V − V_τ` over the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierNorms {
    pub tau: f64,
    /// `‖V − V_τ‖_{L²}`.
    pub diff_l2: f64,
    pub l2: f64,
    pub sup: f64,
    /// `‖∇V_τ‖_{L²}`, summed over components.
    pub grad_l2: f64,
    pub grad_sup: f64,
    /// `(Σ_{j,k} ‖∂_j∂_k V_τ‖²_{L²})^{1/2}`.
    pub hessian_l2: f64,
}

/// Measures `V_τ` against `V` for one scale.
pub fn mollifier_norms(field: &VectorField, spec: MollifierSpec) -> MollifierNorms {
    use crate::domain::ops::partial;
    let d = *field.domain();
    let smooth = mollify(field, spec);
    let weights = d.weights();
    let l2 = |v: &[Complex64]| v.iter().zip(&weights).map(|(x, w)| w * x.norm_sqr()).sum::<f64>();
    let mut grad_l2 = 0.0;
    let mut hessian_l2 = 0.0;
    let mut grad_pointwise = vec![0.0; d.len()];
    for c in 0..3 {
        for j in 0..3 {
            let dj = partial(&d, smooth.comp(c), j);
            grad_l2 += l2(&dj);
            for (g, v) in grad_pointwise.iter_mut().zip(&dj) {
                *g += v.norm_sqr();
            }
            for k in 0..3 {
                hessian_l2 += l2(&partial(&d, &dj, k));
            }
        }
    }
    MollifierNorms {
        tau: spec.tau,
        diff_l2: field.sub(&smooth).expect("same grid").l2_norm(),
        l2: smooth.l2_norm(),
        sup: smooth.max_abs(),
        grad_l2: grad_l2.sqrt(),
        grad_sup: grad_pointwise.into_iter().fold(0.0, f64::max).sqrt(),
        hessian_l2: hessian_l2.sqrt(),
    }
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    fn direct(values: &[Complex64], d: &DomainSpec, spec: MollifierSpec) -> Vec<Complex64> {
        let taps = spec.kernel(d);
        let dims = d.dims();
        (0..d.len())
            .map(|n| {
                let ijk = d.ijk(n);
                let mut acc = Complex64::new(0.0, 0.0);
                for (off, w) in &taps {
                    let src = [0, 1, 2].map(|a| ijk[a] as isize - off[a]);
                    if (0..3).all(|a| src[a] >= 0 && (src[a] as usize) < dims[a]) {
                        acc += values[d.index(src[0] as usize, src[1] as usize, src[2] as usize)] * *w;
                    }
                }
                acc
            })
            .collect()
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let d = DomainSpec::new([0.0; 3], [1.0, 0.8, 1.2], [13, 11, 15]).unwrap();
        let f = ScalarField::from_fn(d, |p| Complex64::new((5.0 * p[0]).sin() + p[1], p[2] * p[2]));
        let spec = MollifierSpec::new(0.25).unwrap();
        let fast = mollify_scalar(&f, spec);
        let slow = direct(f.values(), &d, spec);
        for (a, b) in fast.values().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn kernel_is_normalized_and_bounded() {
        let d = DomainSpec::cube(0.5, 21).unwrap();
        let taps = MollifierSpec::new(0.2).unwrap().kernel(&d);
        let total: f64 = taps.iter().map(|t| t.1).sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!((0.0..=1.0).contains(&MollifierSpec::profile(0.3)));
        assert_eq!(MollifierSpec::profile(1.0), 0.0);
    }

    #[test]
    fn constant_is_preserved_away_from_the_boundary() {
        let d = DomainSpec::cube(0.5, 21).unwrap();
        let f = ScalarField::constant(d, Complex64::new(2.0, -1.0));
        let spec = MollifierSpec::new(0.15).unwrap();
        let g = mollify_scalar(&f, spec);
        for n in 0..d.len() {
            if d.distance_to_boundary(d.point(n)) > 0.15 {
                assert!((g.values()[n] - f.values()[n]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn unresolved_scale_returns_input() {
        let d = DomainSpec::cube(0.5, 9).unwrap();
        let f = ScalarField::from_real_fn(d, |p| p[0]);
        let g = mollify_scalar(&f, MollifierSpec::new(0.01).unwrap());
        assert_eq!(f, g);
    }
}
