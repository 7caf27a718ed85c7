use crate::error::{Error, Result};

/// Minimum number of nodes per axis. One-sided second-order stencils at the
/// faces need four points, and the interior must not be empty.
pub const MIN_POINTS: usize = 5;

/// A uniform node-centred grid over an axis-aligned box, plus the radius of
/// an enclosing ball used when fields are extended outside the box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    lower: [f64; 3],
    upper: [f64; 3],
    dims: [usize; 3],
    radius: f64,
}

impl DomainSpec {
    /// Builds a box grid. The enclosing radius defaults to 1.5 times the half
    /// diagonal.
    pub fn new(lower: [f64; 3], upper: [f64; 3], dims: [usize; 3]) -> Result<Self> {
        let half_diag = half_diagonal(lower, upper);
        Self::with_radius(lower, upper, dims, 1.5 * half_diag)
    }

    pub fn with_radius(
        lower: [f64; 3],
        upper: [f64; 3],
        dims: [usize; 3],
        radius: f64,
    ) -> Result<Self> {
        for d in 0..3 {
            if !(lower[d].is_finite() && upper[d].is_finite()) || upper[d] <= lower[d] {
                return Err(Error::Domain(format!(
                    "axis {d}: upper {} must exceed lower {}",
                    upper[d], lower[d]
                )));
            }
            if dims[d] < MIN_POINTS {
                return Err(Error::Domain(format!(
                    "axis {d}: {} points, at least {MIN_POINTS} required",
                    dims[d]
                )));
            }
            if dims[d] > u32::MAX as usize {
                return Err(Error::Domain(format!("axis {d}: too many points")));
            }
        }
        let half_diag = half_diagonal(lower, upper);
        if !(radius > half_diag) {
            return Err(Error::Domain(format!(
                "enclosing radius {radius} must exceed the half diagonal {half_diag}"
            )));
        }
        Ok(Self {
            lower,
            upper,
            dims,
            radius,
        })
    }

    /// The cube `[-half, half]^3` with `n` points per axis.
    pub fn cube(half: f64, n: usize) -> Result<Self> {
        Self::new([-half; 3], [half; 3], [n; 3])
    }

    pub fn lower(&self) -> [f64; 3] {
        self.lower
    }

    pub fn upper(&self) -> [f64; 3] {
        self.upper
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| (self.upper[d] - self.lower[d]) / (self.dims[d] - 1) as f64)
    }

    /// Largest grid spacing over the three axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|d| self.upper[d] - self.lower[d]).product()
    }

    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|d| 0.5 * (self.lower[d] + self.upper[d]))
    }

    /// Linear index with x varying fastest.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.dims[0];
        let rest = idx / self.dims[0];
        [i, rest % self.dims[1], rest / self.dims[1]]
    }

    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ijk = self.ijk(idx);
        let h = self.spacing();
        [0, 1, 2].map(|d| self.lower[d] + ijk[d] as f64 * h[d])
    }

    #[inline]
    pub fn is_boundary(&self, idx: usize) -> bool {
        let ijk = self.ijk(idx);
        (0..3).any(|d| ijk[d] == 0 || ijk[d] == self.dims[d] - 1)
    }

    /// Boundary node indices in increasing linear order.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| self.is_boundary(n)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.len()).filter(|&n| !self.is_boundary(n)).collect()
    }

    /// Trapezoidal quadrature weight of a node.
    #[inline]
    pub fn node_weight(&self, idx: usize) -> f64 {
        let ijk = self.ijk(idx);
        let h = self.spacing();
        let mut w = 1.0;
        for d in 0..3 {
            w *= h[d];
            if ijk[d] == 0 || ijk[d] == self.dims[d] - 1 {
                w *= 0.5;
            }
        }
        w
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.node_weight(n)).collect()
    }

    /// Same box, different resolution.
    pub fn refined(&self, dims: [usize; 3]) -> Result<Self> {
        Self::with_radius(self.lower, self.upper, dims, self.radius)
    }

    /// Distance from a point to the nearest box face (negative outside).
    pub fn distance_to_boundary(&self, p: [f64; 3]) -> f64 {
        (0..3)
            .map(|d| (p[d] - self.lower[d]).min(self.upper[d] - p[d]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Trilinear interpolation of nodal values; zero outside the box.
    pub fn interpolate(&self, values: &[num_complex::Complex64], p: [f64; 3]) -> num_complex::Complex64 {
        let h = self.spacing();
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for d in 0..3 {
            let s = (p[d] - self.lower[d]) / h[d];
            let last = (self.dims[d] - 1) as f64;
            if !(s >= 0.0 && s <= last) {
                return num_complex::Complex64::new(0.0, 0.0);
            }
            let mut b = s.floor() as usize;
            if b >= self.dims[d] - 1 {
                b = self.dims[d] - 2;
            }
            base[d] = b;
            frac[d] = s - b as f64;
        }
        let mut acc = num_complex::Complex64::new(0.0, 0.0);
        for dk in 0..2 {
            let wk = if dk == 0 { 1.0 - frac[2] } else { frac[2] };
            for dj in 0..2 {
                let wj = if dj == 0 { 1.0 - frac[1] } else { frac[1] };
                let row = self.index(base[0], base[1] + dj, base[2] + dk);
                let w = wk * wj;
                acc += values[row] * (w * (1.0 - frac[0])) + values[row + 1] * (w * frac[0]);
            }
        }
        acc
    }
}

fn half_diagonal(lower: [f64; 3], upper: [f64; 3]) -> f64 {
    0.5 * (0..3)
        .map(|d| (upper[d] - lower[d]).powi(2))
        .sum::<f64>()
        .sqrt()
}
