//! Sparse storage and the stencil assemblies behind the forward solver.

use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::domain::DomainSpec;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Compressed sparse rows with merged duplicates.
#[derive(Debug, Clone)]
pub(crate) struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<Complex64>,
}

impl Csr {
    pub fn from_rows(rows: Vec<Vec<(usize, Complex64)>>, n_cols: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows.into_iter() {
            row.sort_unstable_by_key(|e| e.0);
            let mut last = usize::MAX;
            for (c, v) in row {
                debug_assert!(c < n_cols);
                if c == last {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = c;
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n_rows: row_ptr.len() - 1,
            n_cols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        (0..self.n_rows)
            .map(|r| self.row(r).map(|(c, v)| v * x[c]).sum())
            .collect()
    }

    /// Rows `rows` and the columns whose `col_map` entry is not `usize::MAX`,
    /// renumbered through `col_map`.
    pub fn restrict(&self, rows: &[usize], col_map: &[usize], n_cols: usize) -> Self {
        let picked = rows
            .iter()
            .map(|&r| {
                self.row(r)
                    .filter(|(c, _)| col_map[*c] != usize::MAX)
                    .map(|(c, v)| (col_map[c], v))
                    .collect()
            })
            .collect();
        Self::from_rows(picked, n_cols)
    }

    pub fn to_faer(&self) -> SparseColMat<usize, Complex64> {
        let triplets: Vec<_> = (0..self.n_rows)
            .flat_map(|r| self.row(r).map(move |(c, v)| Triplet::new(r, c, v)))
            .collect();
        SparseColMat::try_new_from_triplets(self.n_rows, self.n_cols, &triplets)
            .expect("indices are in range by construction")
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.n_cols];
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                rows[c].push((r, v.conj()));
            }
        }
        Self::from_rows(rows, self.n_rows)
    }

    /// `self · diag(d) · other`.
    pub fn product(&self, d: &[f64], other: &Csr) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let rows = (0..self.n_rows)
            .map(|r| {
                let mut row = Vec::new();
                for (k, v) in self.row(r) {
                    let s = v * d[k];
                    row.extend(other.row(k).map(|(c, w)| (c, s * w)));
                }
                row
            })
            .collect();
        Self::from_rows(rows, other.n_cols)
    }

    /// `max(Σ_row |a|) · max(Σ_col |a|)`, square-rooted: an upper bound on the
    /// spectral norm.
    pub fn norm_bound(&self) -> f64 {
        let mut col_sums = vec![0.0; self.n_cols];
        let mut row_max: f64 = 0.0;
        for r in 0..self.n_rows {
            let mut s = 0.0;
            for (c, v) in self.row(r) {
                s += v.norm();
                col_sums[c] += v.norm();
            }
            row_max = row_max.max(s);
        }
        let col_max = col_sums.into_iter().fold(0.0, f64::max);
        (row_max * col_max).sqrt()
    }
}

fn stride(domain: &DomainSpec, axis: usize) -> usize {
    let dims = domain.dims();
    match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    }
}

/// Nodal first-derivative stencil along `axis`: centred inside, one-sided
/// second order on the faces.
pub(crate) fn gradient_stencil(domain: &DomainSpec, n: usize, axis: usize) -> [(usize, f64); 3] {
    let s = stride(domain, axis);
    let i = domain.ijk(n)[axis];
    let inv2h = 0.5 / domain.spacing()[axis];
    if i == 0 {
        [(n, -3.0 * inv2h), (n + s, 4.0 * inv2h), (n + 2 * s, -inv2h)]
    } else if i == domain.dims()[axis] - 1 {
        [(n, 3.0 * inv2h), (n - s, -4.0 * inv2h), (n - 2 * s, inv2h)]
    } else {
        [(n + s, inv2h), (n - s, -inv2h), (n, 0.0)]
    }
}

/// Number of grid cells sharing the edge from `n` along `axis`, as a
/// multiple of one quarter.
fn edge_cells(domain: &DomainSpec, n: usize, axis: usize) -> f64 {
    let ijk = domain.ijk(n);
    let dims = domain.dims();
    let mut c = 1.0;
    for d in (0..3).filter(|&d| d != axis) {
        if ijk[d] != 0 && ijk[d] != dims[d] - 1 {
            c *= 2.0;
        }
    }
    c / 4.0
}

/// Weak-form matrix `K` on all nodes for
/// `a(u, v) = ∫∇u·∇v + (V·∇u + qu)v − W·∇(uv)`.
///
/// The Dirichlet term uses the edge (7-point) stiffness, the first- and
/// zeroth-order terms are lumped at nodes with trapezoid weights, and the `W`
/// term pairs edge-averaged `W` with edge differences of `uv`, which puts it
/// on the diagonal. Interior rows divided by the node weight reproduce the
/// strong-form difference operator.
pub(crate) fn assemble_weak(
    domain: &DomainSpec,
    v: &[Vec<Complex64>; 3],
    w: &[Vec<Complex64>; 3],
    q: &[Complex64],
) -> Csr {
    let h = domain.spacing();
    let dims = domain.dims();
    let cell = h[0] * h[1] * h[2];
    let w_zero = w.iter().all(|c| c.iter().all(|x| *x == ZERO));
    let rows = (0..domain.len())
        .map(|n| {
            let m = domain.node_weight(n);
            let ijk = domain.ijk(n);
            let mut row: Vec<(usize, Complex64)> = Vec::with_capacity(16);
            let mut diag = q[n] * m;
            for axis in 0..3 {
                let s = stride(domain, axis);
                let quarter = edge_cells(domain, n, axis);
                let stiff = cell / (h[axis] * h[axis]) * quarter;
                let measure = cell * quarter;
                if ijk[axis] + 1 < dims[axis] {
                    row.push((n + s, Complex64::new(-stiff, 0.0)));
                    diag += stiff;
                    if !w_zero {
                        diag += (w[axis][n] + w[axis][n + s]) * (0.5 * measure / h[axis]);
                    }
                }
                if ijk[axis] > 0 {
                    row.push((n - s, Complex64::new(-stiff, 0.0)));
                    diag += stiff;
                    if !w_zero {
                        diag -= (w[axis][n] + w[axis][n - s]) * (0.5 * measure / h[axis]);
                    }
                }
                let va = v[axis][n];
                if va != ZERO {
                    for (node, coef) in gradient_stencil(domain, n, axis) {
                        row.push((node, va * (coef * m)));
                    }
                }
            }
            row.push((n, diag));
            row
        })
        .collect();
    Csr::from_rows(rows, domain.len())
}

/// Strong-form rows `κ(−Δ_h) + b·∇_h + c` at interior nodes with centred
/// stencils. With `all_columns` the columns are all grid nodes; otherwise
/// they are the interior unknowns (zero Dirichlet data).
pub(crate) fn assemble_interior_strong(
    domain: &DomainSpec,
    kappa: Complex64,
    b: &[Vec<Complex64>; 3],
    c: &[Complex64],
    all_columns: bool,
) -> Csr {
    let interior = domain.interior_nodes();
    let mut local = vec![usize::MAX; domain.len()];
    if all_columns {
        for (n, l) in local.iter_mut().enumerate() {
            *l = n;
        }
    } else {
        for (k, &n) in interior.iter().enumerate() {
            local[n] = k;
        }
    }
    let n_cols = if all_columns { domain.len() } else { interior.len() };
    let h = domain.spacing();
    let rows = interior
        .iter()
        .map(|&n| {
            let mut row = Vec::with_capacity(7);
            let mut diag = c[n];
            for axis in 0..3 {
                let s = stride(domain, axis);
                let lap = kappa / (h[axis] * h[axis]);
                let drift = b[axis][n] * (0.5 / h[axis]);
                diag += lap * 2.0;
                for (nb, sign) in [(n + s, 1.0), (n - s, -1.0)] {
                    if local[nb] != usize::MAX {
                        row.push((local[nb], -lap + drift * sign));
                    }
                }
            }
            row.push((local[n], diag));
            row
        })
        .collect();
    Csr::from_rows(rows, n_cols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{gradient, laplacian, ScalarField};

    #[test]
    fn weak_interior_rows_match_strong_operator() {
        let d = DomainSpec::new([0.0; 3], [1.0, 0.8, 1.2], [7, 6, 8]).unwrap();
        let v = [0, 1, 2].map(|a| {
            (0..d.len())
                .map(|n| Complex64::new(d.point(n)[a], 0.3 * a as f64))
                .collect::<Vec<_>>()
        });
        let w = [0, 1, 2].map(|a| {
            (0..d.len())
                .map(|n| Complex64::new(0.0, d.point(n)[(a + 1) % 3].powi(2)))
                .collect::<Vec<_>>()
        });
        let q: Vec<_> = (0..d.len()).map(|n| Complex64::new(1.0 + d.point(n)[2], -0.5)).collect();
        let k = assemble_weak(&d, &v, &w, &q);
        let u = ScalarField::from_fn(d, |p| Complex64::new((p[0] + p[1]).sin(), p[2] * p[0]));
        let ku = k.matvec(u.values());
        let grad = gradient(&u);
        let lap = laplacian(&u);
        for n in d.interior_nodes() {
            // Centred divergence of the edge-averaged W.
            let mut div_w = Complex64::new(0.0, 0.0);
            for a in 0..3 {
                let s = stride(&d, a);
                div_w += (w[a][n + s] - w[a][n - s]) / (2.0 * d.spacing()[a]);
            }
            let mut strong = -lap.values()[n] + q[n] * u.values()[n] + div_w * u.values()[n];
            for a in 0..3 {
                strong += v[a][n] * grad.comp(a)[n];
            }
            let got = ku[n] / d.node_weight(n);
            assert!((got - strong).norm() < 1e-9 * strong.norm().max(1.0), "node {n}");
        }
    }

    #[test]
    fn laplacian_form_annihilates_constants_and_is_symmetric() {
        let d = DomainSpec::cube(0.5, 6).unwrap();
        let zero = [0, 1, 2].map(|_| vec![ZERO; d.len()]);
        let k = assemble_weak(&d, &zero, &zero, &vec![ZERO; d.len()]);
        let ones = vec![Complex64::new(1.0, 0.0); d.len()];
        assert!(k.matvec(&ones).iter().all(|x| x.norm() < 1e-12));
        for r in 0..k.n_rows {
            for (c, v) in k.row(r) {
                let back = k.row(c).find(|e| e.0 == r).map(|e| e.1).unwrap();
                assert!((v - back).norm() < 1e-14);
            }
        }
    }
}
