//! Dirichlet solves for `P_{V,W,q} = −Δ + V·∇ + (∇·W) + q`, the weak DtN map,
//! and a numerical screen for injectivity of the Dirichlet realization.

pub(crate) mod assembly;
mod dtn;
mod solver;

pub use dtn::{assemble_dtn, read_dtn, write_dtn, DtNMap};
pub use solver::{
    screen_assumption_a, solve_dirichlet, solve_dirichlet_with_source, AssumptionCheck,
    DirichletSolver, DEFAULT_SOLVER_TOL,
};

use num_complex::Complex64;

use crate::domain::{ensure_same, gradient, DomainSpec, ScalarField, VectorField};
use crate::error::Result;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Coefficients of `P_{V,W,q}`. `L_{A,q}` is the case `V = −2iA`, `W = 0`.
#[derive(Debug, Clone)]
pub struct OperatorCoefficients {
    pub v: VectorField,
    pub w: VectorField,
    pub q: ScalarField,
}

impl OperatorCoefficients {
    pub fn new(v: VectorField, w: VectorField, q: ScalarField) -> Result<Self> {
        ensure_same(v.domain(), w.domain())?;
        ensure_same(v.domain(), q.domain())?;
        Ok(Self { v, w, q })
    }

    /// `L_{A,q} = −Δ − 2iA·∇ + q`.
    pub fn magnetic(a: &VectorField, q: &ScalarField) -> Result<Self> {
        ensure_same(a.domain(), q.domain())?;
        Ok(Self {
            v: a.scale(-2.0 * I),
            w: VectorField::zeros(*a.domain()),
            q: q.clone(),
        })
    }

    /// The transpose `−Δ + 2iA·∇ + 2i(∇·A) + q` of `L_{A,q}`, written with
    /// `V = W = 2iA`.
    pub fn magnetic_transpose(a: &VectorField, q: &ScalarField) -> Result<Self> {
        ensure_same(a.domain(), q.domain())?;
        let v = a.scale(2.0 * I);
        Ok(Self {
            w: v.clone(),
            v,
            q: q.clone(),
        })
    }

    pub fn zeros(domain: DomainSpec) -> Self {
        Self {
            v: VectorField::zeros(domain),
            w: VectorField::zeros(domain),
            q: ScalarField::zeros(domain),
        }
    }

    pub fn domain(&self) -> &DomainSpec {
        self.v.domain()
    }
}

/// Strong-form `P_{V,W,q}u` at every node. `∇·W` is the centred divergence of
/// edge-averaged `W` inside, which is what the weak assembly produces; face
/// values use the one-sided stencils and are only indicative.
pub fn apply_operator(coeffs: &OperatorCoefficients, u: &ScalarField) -> Result<ScalarField> {
    ensure_same(coeffs.domain(), u.domain())?;
    let lap = crate::domain::laplacian(u);
    let drift = coeffs.v.dot(&gradient(u))?;
    let div_w = crate::domain::divergence(&coeffs.w);
    let values = (0..u.values().len())
        .map(|n| {
            -lap.values()[n]
                + drift.values()[n]
                + (div_w.values()[n] + coeffs.q.values()[n]) * u.values()[n]
        })
        .collect();
    ScalarField::new(*u.domain(), values)
}
