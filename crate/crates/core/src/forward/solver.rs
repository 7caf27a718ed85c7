use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::Mat;
use num_complex::Complex64;

use super::assembly::{assemble_weak, Csr};
use super::OperatorCoefficients;
use crate::domain::{ensure_same, BoundaryFunction, DomainSpec, ScalarField};
use crate::error::{Error, Result};

/// Relative residual accepted from a direct solve after one refinement step.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Factorized Dirichlet problem for one set of coefficients. The interior
/// block of the weak matrix is factorized once and reused for every boundary
/// datum, source term and DtN column.
pub struct DirichletSolver {
    domain: DomainSpec,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    weak: Csr,
    k_ii: Csr,
    /// Interior rows, boundary columns.
    k_ib: Csr,
    lu: Lu<usize, Complex64>,
    tol: f64,
}

impl DirichletSolver {
    pub fn new(coeffs: &OperatorCoefficients) -> Result<Self> {
        let domain = *coeffs.domain();
        let weak = assemble_weak(&domain, coeffs.v.comps(), coeffs.w.comps(), coeffs.q.values());
        let interior = domain.interior_nodes();
        let boundary = domain.boundary_nodes();
        let (int_map, bnd_map) = local_maps(&domain, &interior, &boundary);
        let k_ii = weak.restrict(&interior, &int_map, interior.len());
        let k_ib = weak.restrict(&interior, &bnd_map, boundary.len());
        let lu = k_ii
            .to_faer()
            .sp_lu()
            .map_err(|e| Error::AssumptionA(format!("interior factorization failed: {e}")))?;
        Ok(Self {
            domain,
            interior,
            boundary,
            weak,
            k_ii,
            k_ib,
            lu,
            tol: DEFAULT_SOLVER_TOL,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    pub(crate) fn weak(&self) -> &Csr {
        &self.weak
    }

    pub(crate) fn k_ib(&self) -> &Csr {
        &self.k_ib
    }

    /// Solves `K_II x = rhs` column by column, with one step of iterative
    /// refinement and a residual check.
    pub(crate) fn solve_interior(&self, rhs: Mat<Complex64>) -> Result<Mat<Complex64>> {
        let mut x = self.lu.solve(&rhs);
        for col in 0..rhs.ncols() {
            let b: Vec<Complex64> = (0..rhs.nrows()).map(|r| rhs[(r, col)]).collect();
            let xc: Vec<Complex64> = (0..x.nrows()).map(|r| x[(r, col)]).collect();
            if xc.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(Error::AssumptionA(
                    "interior solve produced non-finite values".into(),
                ));
            }
            let mut res = self.residual(&b, &xc);
            let scale = norm(&b).max(f64::MIN_POSITIVE);
            if norm(&res) > self.tol * scale {
                let corr = self.lu.solve(&Mat::from_fn(res.len(), 1, |r, _| res[r]));
                for r in 0..xc.len() {
                    x[(r, col)] += corr[(r, 0)];
                }
                let xc: Vec<Complex64> = (0..x.nrows()).map(|r| x[(r, col)]).collect();
                res = self.residual(&b, &xc);
                let rel = norm(&res) / scale;
                if rel > self.tol {
                    return Err(Error::Solver {
                        message: "direct solve did not reach tolerance after refinement".into(),
                        residual: rel,
                    });
                }
            }
        }
        Ok(x)
    }

    /// Solves `K_IIᵀ x = rhs`.
    pub(crate) fn solve_interior_transpose(&self, rhs: Mat<Complex64>) -> Result<Mat<Complex64>> {
        let x = self.lu.solve_transpose(&rhs);
        if (0..x.ncols()).any(|c| (0..x.nrows()).any(|r| !x[(r, c)].re.is_finite() || !x[(r, c)].im.is_finite())) {
            return Err(Error::AssumptionA("transpose solve produced non-finite values".into()));
        }
        Ok(x)
    }

    fn residual(&self, b: &[Complex64], x: &[Complex64]) -> Vec<Complex64> {
        self.k_ii
            .matvec(x)
            .into_iter()
            .zip(b)
            .map(|(kx, bi)| bi - kx)
            .collect()
    }

    /// Solution with boundary values `f` and `Pu = source` at interior nodes.
    pub fn solve(&self, f: &BoundaryFunction, source: Option<&ScalarField>) -> Result<ScalarField> {
        ensure_same(&self.domain, f.domain())?;
        if let Some(s) = source {
            ensure_same(&self.domain, s.domain())?;
        }
        let kf = self.k_ib.matvec(f.values());
        let rhs = Mat::from_fn(self.interior.len(), 1, |r, _| {
            let n = self.interior[r];
            let s = source.map_or(ZERO, |s| s.values()[n] * self.domain.node_weight(n));
            s - kf[r]
        });
        let x = self.solve_interior(rhs)?;
        let mut u = vec![ZERO; self.domain.len()];
        for (k, &n) in self.boundary.iter().enumerate() {
            u[n] = f.values()[k];
        }
        for (r, &n) in self.interior.iter().enumerate() {
            u[n] = x[(r, 0)];
        }
        ScalarField::new(self.domain, u)
    }

    /// Solution of the transposed discrete problem `Kᵀ` with boundary values
    /// `f`. Pairs exactly with [`DirichletSolver::solve`] in the discrete
    /// Green identity behind the DtN pairing.
    pub fn solve_transposed(&self, f: &BoundaryFunction) -> Result<ScalarField> {
        ensure_same(&self.domain, f.domain())?;
        let (int_map, _) = local_maps(&self.domain, &self.interior, &self.boundary);
        // Column j of Kᵀ restricted to interior rows equals row j of K.
        let mut rhs = Mat::<Complex64>::zeros(self.interior.len(), 1);
        for (k, &b) in self.boundary.iter().enumerate() {
            let fb = f.values()[k];
            if fb == ZERO {
                continue;
            }
            for (c, v) in self.weak.row(b) {
                if int_map[c] != usize::MAX {
                    rhs[(int_map[c], 0)] -= v * fb;
                }
            }
        }
        let x = self.solve_interior_transpose(rhs)?;
        let mut u = vec![ZERO; self.domain.len()];
        for (k, &n) in self.boundary.iter().enumerate() {
            u[n] = f.values()[k];
        }
        for (r, &n) in self.interior.iter().enumerate() {
            u[n] = x[(r, 0)];
        }
        ScalarField::new(self.domain, u)
    }

    /// Inverse power iteration on `K_IIᴴK_II` for the smallest singular value
    /// of the interior operator, relative to a spectral-norm upper bound.
    pub fn smallest_singular_value(&self, iterations: usize) -> (f64, f64) {
        let n = self.interior.len();
        let norm_bound = self.k_ii.norm_bound();
        // Deterministic start with energy in every mode.
        let mut x = Mat::from_fn(n, 1, |r, _| {
            Complex64::new(1.0 + ((r * 7919) % 101) as f64 / 101.0, 0.0)
        });
        let mut sigma = f64::INFINITY;
        for _ in 0..iterations {
            let xn = col_norm(&x);
            x = Mat::from_fn(n, 1, |r, _| x[(r, 0)] / xn);
            let y = self.lu.solve_adjoint(&x);
            let z = self.lu.solve(&y);
            let zn = col_norm(&z);
            if !zn.is_finite() || zn == 0.0 {
                return (0.0, norm_bound);
            }
            let next = 1.0 / zn.sqrt();
            let converged = (next - sigma).abs() <= 1e-6 * next;
            sigma = next;
            x = z;
            if converged {
                break;
            }
        }
        (sigma, norm_bound)
    }
}

fn local_maps(domain: &DomainSpec, interior: &[usize], boundary: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut int_map = vec![usize::MAX; domain.len()];
    let mut bnd_map = vec![usize::MAX; domain.len()];
    for (k, &n) in interior.iter().enumerate() {
        int_map[n] = k;
    }
    for (k, &n) in boundary.iter().enumerate() {
        bnd_map[n] = k;
    }
    (int_map, bnd_map)
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

fn col_norm(m: &Mat<Complex64>) -> f64 {
    (0..m.nrows()).map(|r| m[(r, 0)].norm_sqr()).sum::<f64>().sqrt()
}

/// Solves `P_{V,W,q}u = 0` with `u = f` on the boundary.
pub fn solve_dirichlet(coeffs: &OperatorCoefficients, f: &BoundaryFunction) -> Result<ScalarField> {
    DirichletSolver::new(coeffs)?.solve(f, None)
}

/// Solves `P_{V,W,q}u = source` with `u = f` on the boundary.
pub fn solve_dirichlet_with_source(
    coeffs: &OperatorCoefficients,
    f: &BoundaryFunction,
    source: &ScalarField,
) -> Result<ScalarField> {
    DirichletSolver::new(coeffs)?.solve(f, Some(source))
}

/// Outcome of the injectivity screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AssumptionCheck {
    Ok { sigma_min: f64, norm_bound: f64 },
    Suspect { sigma_min: f64, norm_bound: f64 },
}

impl AssumptionCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, AssumptionCheck::Ok { .. })
    }

    pub fn sigma_min(&self) -> f64 {
        match *self {
            AssumptionCheck::Ok { sigma_min, .. } | AssumptionCheck::Suspect { sigma_min, .. } => {
                sigma_min
            }
        }
    }
}

/// Flags the interior Dirichlet operator as suspect when its smallest
/// singular value falls below `1e−8` times the norm bound.
pub fn screen_assumption_a(coeffs: &OperatorCoefficients) -> AssumptionCheck {
    let solver = match DirichletSolver::new(coeffs) {
        Ok(s) => s,
        Err(_) => {
            return AssumptionCheck::Suspect {
                sigma_min: 0.0,
                norm_bound: f64::NAN,
            }
        }
    };
    let (sigma_min, norm_bound) = solver.smallest_singular_value(60);
    if sigma_min < 1e-8 * norm_bound {
        AssumptionCheck::Suspect {
            sigma_min,
            norm_bound,
        }
    } else {
        AssumptionCheck::Ok {
            sigma_min,
            norm_bound,
        }
    }
}
