//! Monotone drift-diffusion solves and potentials of gradient fields.

use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use num_complex::Complex64;

use crate::domain::{divergence, ensure_same, BoundaryFunction, DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::forward::assembly::Csr;
use crate::forward::{DirichletSolver, OperatorCoefficients};

/// Solution of `Δg − X·∇g = f` with Dirichlet data.
#[derive(Debug, Clone)]
pub struct DriftSolution {
    pub field: ScalarField,
    /// Interior nodes whose stencil row is not that of an M-matrix. Empty for
    /// the hybrid scheme unless `X` is non-finite.
    pub nonmonotone_rows: Vec<usize>,
}

/// Solves `Δg − X·∇g = f` on the interior with `g` prescribed on the boundary.
pub fn solve_drift(x: &VectorField, source: &ScalarField, boundary: &BoundaryFunction) -> Result<DriftSolution> {
    let op = DriftOperator::new(x)?;
    Ok(DriftSolution {
        field: op.solve(source, boundary)?,
        nonmonotone_rows: op.nonmonotone_rows,
    })
}

/// Factored interior matrix of `−Δ + X·∇`.
///
/// `X·∇` is differenced centrally where the cell Péclet number `|Xₖ|hₖ/2` is
/// at most one and upwind elsewhere, so every row has a positive diagonal,
/// nonpositive off-diagonals and zero row sum. Only real parts are used.
pub struct DriftOperator {
    domain: DomainSpec,
    interior: Vec<usize>,
    local: Vec<usize>,
    /// Per interior row: the six neighbour couplings.
    couplings: Vec<[(usize, f64); 6]>,
    matrix: Csr,
    lu: Lu<usize, Complex64>,
    pub nonmonotone_rows: Vec<usize>,
}

impl DriftOperator {
    pub fn new(x: &VectorField) -> Result<Self> {
        let d = *x.domain();
        let interior = d.interior_nodes();
        let mut local = vec![usize::MAX; d.len()];
        for (r, &n) in interior.iter().enumerate() {
            local[n] = r;
        }
        let dims = d.dims();
        let h = d.spacing();
        let strides = [1, dims[0], dims[0] * dims[1]];
        let mut rows = Vec::with_capacity(interior.len());
        let mut couplings = Vec::with_capacity(interior.len());
        let mut nonmonotone_rows = Vec::new();
        for &n in &interior {
            let mut diag = 0.0;
            let mut off = [(0, 0.0); 6];
            for k in 0..3 {
                let xk = x.comp(k)[n].re;
                let inv2 = 1.0 / (h[k] * h[k]);
                let (mut plus, mut minus) = (-inv2, -inv2);
                diag += 2.0 * inv2;
                if xk.abs() * h[k] <= 2.0 {
                    plus += xk / (2.0 * h[k]);
                    minus -= xk / (2.0 * h[k]);
                } else if xk > 0.0 {
                    diag += xk / h[k];
                    minus -= xk / h[k];
                } else {
                    diag -= xk / h[k];
                    plus += xk / h[k];
                }
                off[2 * k] = (n + strides[k], plus);
                off[2 * k + 1] = (n - strides[k], minus);
            }
            let row_sum = diag + off.iter().map(|e| e.1).sum::<f64>();
            let monotone = diag > 0.0 && off.iter().all(|e| e.1 <= 0.0) && row_sum >= -1e-9 * diag;
            if !monotone {
                nonmonotone_rows.push(n);
            }
            let mut row = vec![(local[n], Complex64::new(diag, 0.0))];
            row.extend(off.iter().filter(|e| local[e.0] != usize::MAX).map(|e| (local[e.0], Complex64::new(e.1, 0.0))));
            rows.push(row);
            couplings.push(off);
        }
        let matrix = Csr::from_rows(rows, interior.len());
        let lu = matrix
            .to_faer()
            .sp_lu()
            .map_err(|e| Error::Solver { message: format!("drift factorization failed: {e}"), residual: f64::NAN })?;
        Ok(Self { domain: d, interior, local, couplings, matrix, lu, nonmonotone_rows })
    }

    pub fn solve(&self, source: &ScalarField, boundary: &BoundaryFunction) -> Result<ScalarField> {
        let d = self.domain;
        ensure_same(&d, source.domain())?;
        ensure_same(&d, boundary.domain())?;
        let mut full = vec![0.0; d.len()];
        for (&n, v) in d.boundary_nodes().iter().zip(boundary.values()) {
            full[n] = v.re;
        }
        let rhs: Vec<f64> = self
            .interior
            .iter()
            .zip(&self.couplings)
            .map(|(&n, off)| {
                let mut b = -source.values()[n].re;
                for &(m, c) in off {
                    if self.local[m] == usize::MAX {
                        b -= c * full[m];
                    }
                }
                b
            })
            .collect();
        let sol = self.lu.solve(&Mat::from_fn(rhs.len(), 1, |r, _| Complex64::new(rhs[r], 0.0)));
        let xs: Vec<Complex64> = (0..rhs.len()).map(|r| sol[(r, 0)]).collect();
        let res = self.matrix.matvec(&xs);
        let scale = rhs.iter().map(|b| b * b).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let err = res.iter().zip(&rhs).map(|(a, b)| (a.re - b).powi(2)).sum::<f64>().sqrt() / scale;
        if !(err <= 1e-8) {
            return Err(Error::Solver { message: "drift solve".into(), residual: err });
        }
        for (r, &n) in self.interior.iter().enumerate() {
            full[n] = xs[r].re;
        }
        ScalarField::new(d, full.into_iter().map(|v| Complex64::new(v, 0.0)).collect())
    }
}

/// Amount by which interior values leave the range of the boundary values.
pub fn max_principle_excess(field: &ScalarField) -> f64 {
    let d = field.domain();
    let (mut blo, mut bhi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in d.boundary_nodes() {
        let v = field.values()[n].re;
        blo = blo.min(v);
        bhi = bhi.max(v);
    }
    d.interior_nodes()
        .into_iter()
        .map(|n| {
            let v = field.values()[n].re;
            (v - bhi).max(blo - v).max(0.0)
        })
        .fold(0.0, f64::max)
}

/// Potential of a real gradient field `G`, zero at the boundary node `start`.
///
/// Boundary values come from trapezoid integration of the tangential
/// components along a breadth-first tree of boundary edges; the interior solves
/// `−Δu = −∇·G`.
pub fn potential_from_gradient(g: &VectorField, start: usize) -> Result<ScalarField> {
    let d = *g.domain();
    if start >= d.len() || !d.is_boundary(start) {
        return Err(Error::Domain(format!("reference node {start} is not a boundary node")));
    }
    let values = boundary_potential(&d, g, start);
    let bnd = BoundaryFunction::new(d, d.boundary_nodes().iter().map(|&n| Complex64::new(values[n], 0.0)).collect())?;
    let source = divergence(&g.re()).scale(Complex64::new(-1.0, 0.0));
    let solver = DirichletSolver::new(&OperatorCoefficients::zeros(d))?;
    Ok(solver.solve(&bnd, Some(&source))?.re())
}

fn boundary_potential(d: &DomainSpec, g: &VectorField, start: usize) -> Vec<f64> {
    let dims = d.dims();
    let h = d.spacing();
    let mut u = vec![f64::NAN; d.len()];
    u[start] = 0.0;
    let mut queue = VecDeque::from([start]);
    while let Some(n) = queue.pop_front() {
        let ijk = d.ijk(n);
        for k in 0..3 {
            for up in [true, false] {
                let mut nb = ijk;
                if up {
                    if ijk[k] + 1 == dims[k] {
                        continue;
                    }
                    nb[k] += 1;
                } else {
                    if ijk[k] == 0 {
                        continue;
                    }
                    nb[k] -= 1;
                }
                let m = d.index(nb[0], nb[1], nb[2]);
                if !d.is_boundary(m) || !u[m].is_nan() {
                    continue;
                }
                let step = 0.5 * h[k] * (g.comp(k)[n].re + g.comp(k)[m].re);
                u[m] = if up { u[n] + step } else { u[n] - step };
                queue.push_back(m);
            }
        }
    }
    u
}

/// Range of a real field against a reference scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constancy {
    pub range: f64,
    pub scale: f64,
}

impl Constancy {
    pub fn of(field: &ScalarField, scale: f64) -> Self {
        let (lo, hi) = field
            .values()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v.re), hi.max(v.re)));
        Self {
            range: hi - lo,
            scale: scale.max(f64::MIN_POSITIVE),
        }
    }

    pub fn relative(&self) -> f64 {
        self.range / self.scale
    }

    pub fn holds(&self) -> bool {
        self.relative() < super::CONSTANCY_TOL
    }
}

/// Constant boundary data.
pub(crate) fn constant_boundary(d: DomainSpec, value: f64) -> BoundaryFunction {
    BoundaryFunction::from_fn(d, |_| Complex64::new(value, 0.0))
}

pub(crate) fn mean(values: &[Complex64]) -> f64 {
    values.iter().map(|v| v.re).sum::<f64>() / values.len().max(1) as f64
}
