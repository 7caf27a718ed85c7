//! Analytic test fluids and a compactly supported smooth bump.

use num_complex::Complex64;

use super::FluidParameters;
use crate::domain::{DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};

/// `amplitude · exp(1 − 1/(1 − |x−c|²/R²))` inside the ball of radius `R`,
/// zero outside. Smooth, with peak value `amplitude` at the centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub center: [f64; 3],
    pub radius: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn new(center: [f64; 3], radius: f64, amplitude: f64) -> Self {
        Self {
            center,
            radius,
            amplitude,
        }
    }

    fn s(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|d| (p[d] - self.center[d]).powi(2)).sum::<f64>() / (self.radius * self.radius)
    }

    fn profile(s: f64) -> f64 {
        if s < 1.0 {
            (1.0 - 1.0 / (1.0 - s)).exp()
        } else {
            0.0
        }
    }

    pub fn value(&self, p: [f64; 3]) -> f64 {
        self.amplitude * Self::profile(self.s(p))
    }

    pub fn gradient(&self, p: [f64; 3]) -> [f64; 3] {
        let s = self.s(p);
        if s >= 1.0 {
            return [0.0; 3];
        }
        let g = Self::profile(s);
        let dg = -g / (1.0 - s).powi(2);
        let k = self.amplitude * dg * 2.0 / (self.radius * self.radius);
        [0, 1, 2].map(|d| k * (p[d] - self.center[d]))
    }

    pub fn laplacian(&self, p: [f64; 3]) -> f64 {
        let s = self.s(p);
        if s >= 1.0 {
            return 0.0;
        }
        let g = Self::profile(s);
        let dg = -g / (1.0 - s).powi(2);
        let d2g = g * (2.0 * s - 1.0) / (1.0 - s).powi(4);
        let r2 = self.radius * self.radius;
        self.amplitude * (d2g * 4.0 * s / r2 + dg * 6.0 / r2)
    }
}

/// Pointwise fluid state used by the analytic phantoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidState {
    pub c: f64,
    pub rho: f64,
    pub v: [f64; 3],
    pub alpha0: f64,
    pub zeta: f64,
}

impl Default for FluidState {
    fn default() -> Self {
        Self {
            c: 1.0,
            rho: 1.0,
            v: [0.0; 3],
            alpha0: 0.0,
            zeta: 1.0,
        }
    }
}

/// Named analytic fluids.
#[derive(Debug, Clone, PartialEq)]
pub enum Phantom {
    Constant(FluidState),
    /// Background plus `delta · exp(−|x−center|²/(2 width²))` in every field.
    GaussianBump {
        background: FluidState,
        delta: FluidState,
        center: [f64; 3],
        width: f64,
    },
    /// Two states blended across the plane `x_axis = position` by
    /// `½(1 + tanh((x_axis − position)/width))`. Width zero is a sharp jump in
    /// `c`, `v`, `α₀` and `ζ`; density is taken from `left` everywhere.
    TanhInterface {
        left: FluidState,
        right: FluidState,
        axis: usize,
        position: f64,
        width: f64,
    },
}

impl Phantom {
    pub fn state_at(&self, p: [f64; 3]) -> FluidState {
        match *self {
            Phantom::Constant(s) => s,
            Phantom::GaussianBump {
                background,
                delta,
                center,
                width,
            } => {
                let r2: f64 = (0..3).map(|d| (p[d] - center[d]).powi(2)).sum();
                let g = (-r2 / (2.0 * width * width)).exp();
                blend(background, delta, g, true)
            }
            Phantom::TanhInterface {
                left,
                right,
                axis,
                position,
                width,
            } => {
                let x = p[axis] - position;
                let t = if width > 0.0 {
                    0.5 * (1.0 + (x / width).tanh())
                } else if x < 0.0 {
                    0.0
                } else {
                    1.0
                };
                let mut s = blend(left, right, t, false);
                s.rho = left.rho;
                s
            }
        }
    }

    pub fn build(&self, domain: DomainSpec) -> Result<FluidParameters> {
        if let Phantom::TanhInterface { axis, width, .. } = self {
            if *axis > 2 || *width < 0.0 {
                return Err(Error::Domain(format!(
                    "tanh interface needs axis in 0..3 and width >= 0 (got {axis}, {width})"
                )));
            }
        }
        if let Phantom::GaussianBump { width, .. } = self {
            if !(*width > 0.0) {
                return Err(Error::Domain(format!("bump width {width} must be positive")));
            }
        }
        let states: Vec<FluidState> = (0..domain.len())
            .map(|n| self.state_at(domain.point(n)))
            .collect();
        let scalar = |f: &dyn Fn(&FluidState) -> f64| {
            ScalarField::new(domain, states.iter().map(|s| Complex64::new(f(s), 0.0)).collect())
        };
        let v = VectorField::new(
            domain,
            [0, 1, 2].map(|d| states.iter().map(|s| Complex64::new(s.v[d], 0.0)).collect()),
        )?;
        FluidParameters::new(
            scalar(&|s| s.c)?,
            scalar(&|s| s.rho)?,
            v,
            scalar(&|s| s.alpha0)?,
            scalar(&|s| s.zeta)?,
        )
    }
}

/// `a + t·b` when `additive`, otherwise `(1−t)·a + t·b`.
fn blend(a: FluidState, b: FluidState, t: f64, additive: bool) -> FluidState {
    let mix = |x: f64, y: f64| if additive { x + t * y } else { (1.0 - t) * x + t * y };
    FluidState {
        c: mix(a.c, b.c),
        rho: mix(a.rho, b.rho),
        v: [0, 1, 2].map(|d| mix(a.v[d], b.v[d])),
        alpha0: mix(a.alpha0, b.alpha0),
        zeta: mix(a.zeta, b.zeta),
    }
}
