use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use faer::Mat;
use num_complex::Complex64;

use super::solver::DirichletSolver;
use super::OperatorCoefficients;
use crate::domain::io::{expect_eof, read_complex, read_f64, read_header, read_u32, write_complex, write_header, FieldKind};
use crate::domain::{ensure_same, BoundaryFunction, DomainSpec};
use crate::error::{Error, Result};

/// Right-hand sides solved together when assembling the map.
const BLOCK: usize = 256;

/// Dense Dirichlet-to-Neumann matrix on the boundary nodes. Entry `(i, j)` is
/// the weak normal derivative of the solution with data `e_j`, tested against
/// the hat function of boundary node `i`.
#[derive(Debug, Clone)]
pub struct DtNMap {
    domain: DomainSpec,
    omega: f64,
    boundary: Vec<usize>,
    /// Row-major, `boundary.len()²` entries.
    matrix: Vec<Complex64>,
}

impl DtNMap {
    pub fn new(
        domain: DomainSpec,
        omega: f64,
        boundary: Vec<usize>,
        matrix: Vec<Complex64>,
    ) -> Result<Self> {
        if boundary != domain.boundary_nodes() {
            return Err(Error::Shape("boundary index table does not match the grid".into()));
        }
        let nb = boundary.len();
        if matrix.len() != nb * nb {
            return Err(Error::Shape(format!(
                "DtN matrix has {} entries, expected {nb}²",
                matrix.len()
            )));
        }
        if matrix.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Shape("DtN matrix has non-finite entries".into()));
        }
        Ok(Self {
            domain,
            omega,
            boundary,
            matrix,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn size(&self) -> usize {
        self.boundary.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[i * self.size() + j]
    }

    pub fn matrix(&self) -> &[Complex64] {
        &self.matrix
    }

    /// `Λf` as boundary values.
    pub fn apply(&self, f: &BoundaryFunction) -> Result<Vec<Complex64>> {
        ensure_same(&self.domain, f.domain())?;
        let nb = self.size();
        Ok((0..nb)
            .map(|i| {
                self.matrix[i * nb..(i + 1) * nb]
                    .iter()
                    .zip(f.values())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect())
    }

    /// Bilinear pairing `gᵀ Λ f`.
    pub fn pairing(&self, g: &BoundaryFunction, f: &BoundaryFunction) -> Result<Complex64> {
        let lf = self.apply(f)?;
        ensure_same(&self.domain, g.domain())?;
        Ok(g.values().iter().zip(lf).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖Λ − other‖_F / ‖other‖_F`.
    pub fn relative_distance(&self, other: &DtNMap) -> Result<f64> {
        ensure_same(&self.domain, &other.domain)?;
        let diff: f64 = self
            .matrix
            .iter()
            .zip(&other.matrix)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        Ok(diff / other.frobenius_norm())
    }

    /// `‖Λ − Λᵀ‖_F / ‖Λ‖_F`.
    pub fn relative_asymmetry(&self) -> f64 {
        let nb = self.size();
        let mut acc = 0.0;
        for i in 0..nb {
            for j in 0..nb {
                acc += (self.matrix[i * nb + j] - self.matrix[j * nb + i]).norm_sqr();
            }
        }
        acc.sqrt() / self.frobenius_norm()
    }

    /// The map minus another on the same grid.
    pub fn difference(&self, other: &DtNMap) -> Result<DtNMap> {
        ensure_same(&self.domain, &other.domain)?;
        Ok(DtNMap {
            domain: self.domain,
            omega: self.omega,
            boundary: self.boundary.clone(),
            matrix: self.matrix.iter().zip(&other.matrix).map(|(a, b)| a - b).collect(),
        })
    }
}

/// Assembles `Λ = K_bb − K_bI K_II⁻¹ K_Ib` from the weak matrix, solving only
/// for boundary nodes coupled to the interior.
pub fn assemble_dtn(coeffs: &OperatorCoefficients, omega: f64) -> Result<DtNMap> {
    let solver = DirichletSolver::new(coeffs)?;
    dtn_from_solver(&solver, omega)
}

pub(crate) fn dtn_from_solver(solver: &DirichletSolver, omega: f64) -> Result<DtNMap> {
    let domain = *solver.domain();
    let boundary = solver.boundary_nodes().to_vec();
    let interior = solver.interior_nodes();
    let nb = boundary.len();
    let mut bnd_map = vec![usize::MAX; domain.len()];
    let mut int_map = vec![usize::MAX; domain.len()];
    for (k, &n) in boundary.iter().enumerate() {
        bnd_map[n] = k;
    }
    for (k, &n) in interior.iter().enumerate() {
        int_map[n] = k;
    }
    let weak = solver.weak();
    let mut matrix = vec![Complex64::new(0.0, 0.0); nb * nb];
    // K_bI as sparse rows over interior indices.
    let mut k_bi: Vec<Vec<(usize, Complex64)>> = Vec::with_capacity(nb);
    for (i, &b) in boundary.iter().enumerate() {
        let mut row = Vec::new();
        for (c, v) in weak.row(b) {
            if bnd_map[c] != usize::MAX {
                matrix[i * nb + bnd_map[c]] += v;
            } else {
                row.push((int_map[c], v));
            }
        }
        k_bi.push(row);
    }
    // Columns of K_Ib.
    let k_ib = solver.k_ib();
    let mut cols: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); nb];
    for r in 0..k_ib.n_rows {
        for (c, v) in k_ib.row(r) {
            cols[c].push((r, v));
        }
    }
    let active: Vec<usize> = (0..nb).filter(|&j| !cols[j].is_empty()).collect();
    for chunk in active.chunks(BLOCK) {
        let mut rhs = Mat::<Complex64>::zeros(interior.len(), chunk.len());
        for (k, &j) in chunk.iter().enumerate() {
            for &(r, v) in &cols[j] {
                rhs[(r, k)] = v;
            }
        }
        let x = solver.solve_interior(rhs)?;
        for (i, row) in k_bi.iter().enumerate() {
            if row.is_empty() {
                continue;
            }
            for (k, &j) in chunk.iter().enumerate() {
                let s: Complex64 = row.iter().map(|&(c, v)| v * x[(c, k)]).sum();
                matrix[i * nb + j] -= s;
            }
        }
    }
    DtNMap::new(domain, omega, boundary, matrix)
}

/// Writes the map in the field format with kind 3: header, `f64` frequency,
/// `u32` boundary count, the boundary node indices, then the row-major
/// complex matrix.
pub fn write_dtn(map: &DtNMap, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, FieldKind::DtN, &map.domain)?;
    w.write_all(&map.omega.to_le_bytes())?;
    w.write_all(&(map.size() as u32).to_le_bytes())?;
    for &n in &map.boundary {
        w.write_all(&(n as u32).to_le_bytes())?;
    }
    write_complex(&mut w, &map.matrix)?;
    w.flush()?;
    Ok(())
}

pub fn read_dtn(path: impl AsRef<Path>) -> Result<DtNMap> {
    let mut r = BufReader::new(File::open(path)?);
    let (kind, domain) = read_header(&mut r)?;
    if kind != FieldKind::DtN {
        return Err(Error::Format(format!("expected a DtN matrix, found {kind:?}")));
    }
    let omega = read_f64(&mut r)?;
    let nb = read_u32(&mut r)? as usize;
    if nb != domain.boundary_nodes().len() {
        return Err(Error::Shape(format!(
            "{nb} boundary nodes declared, grid has {}",
            domain.boundary_nodes().len()
        )));
    }
    let boundary = (0..nb)
        .map(|_| read_u32(&mut r).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let matrix = read_complex(&mut r, nb * nb)?;
    expect_eof(&mut r)?;
    DtNMap::new(domain, omega, boundary, matrix)
}
