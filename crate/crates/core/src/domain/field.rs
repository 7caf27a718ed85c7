use num_complex::Complex64;

use super::grid::DomainSpec;
use crate::error::{Error, Result};

fn check_values(domain: &DomainSpec, values: &[Complex64], what: &str) -> Result<()> {
    if values.len() != domain.len() {
        return Err(Error::Shape(format!(
            "{what}: {} values for a grid of {} nodes",
            values.len(),
            domain.len()
        )));
    }
    if let Some(n) = values.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Shape(format!("{what}: non-finite value at node {n}")));
    }
    Ok(())
}

pub(crate) fn ensure_same(a: &DomainSpec, b: &DomainSpec) -> Result<()> {
    if a != b {
        return Err(Error::Shape("fields live on different grids".into()));
    }
    Ok(())
}

/// Complex samples at every grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    domain: DomainSpec,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn new(domain: DomainSpec, values: Vec<Complex64>) -> Result<Self> {
        check_values(&domain, &values, "scalar field")?;
        Ok(Self { domain, values })
    }

    /// Skips the finiteness scan; callers guarantee the length.
    pub(crate) fn from_vec(domain: DomainSpec, values: Vec<Complex64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        Self { domain, values }
    }

    pub fn zeros(domain: DomainSpec) -> Self {
        Self::constant(domain, Complex64::new(0.0, 0.0))
    }

    pub fn constant(domain: DomainSpec, value: Complex64) -> Self {
        Self::from_vec(domain, vec![value; domain.len()])
    }

    pub fn from_fn(domain: DomainSpec, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        Self::from_vec(domain, (0..domain.len()).map(|n| f(domain.point(n))).collect())
    }

    pub fn from_real_fn(domain: DomainSpec, f: impl Fn([f64; 3]) -> f64) -> Self {
        Self::from_fn(domain, |p| Complex64::new(f(p), 0.0))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_vec(self.domain, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(
        &self,
        other: &ScalarField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        ensure_same(&self.domain, &other.domain)?;
        Ok(Self::from_vec(
            self.domain,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        ))
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|v| v * s)
    }

    pub fn re(&self) -> Self {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map(|v| Complex64::new(v.im, 0.0))
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Trapezoidal L² norm over the whole box.
    pub fn l2_norm(&self) -> f64 {
        weighted_sq(&self.domain, &self.values, false).sqrt()
    }

    /// L² norm restricted to interior nodes.
    pub fn interior_l2_norm(&self) -> f64 {
        weighted_sq(&self.domain, &self.values, true).sqrt()
    }

    pub fn is_real(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.im.abs() <= tol)
    }

    pub fn value_at(&self, n: usize) -> Complex64 {
        self.values[n]
    }
}

pub(crate) fn weighted_sq(domain: &DomainSpec, values: &[Complex64], interior: bool) -> f64 {
    (0..values.len())
        .filter(|&n| !interior || !domain.is_boundary(n))
        .map(|n| domain.node_weight(n) * values[n].norm_sqr())
        .sum()
}

/// Three complex components per node, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    domain: DomainSpec,
    comps: [Vec<Complex64>; 3],
}

impl VectorField {
    pub fn new(domain: DomainSpec, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        for c in &comps {
            check_values(&domain, c, "vector field")?;
        }
        Ok(Self { domain, comps })
    }

    pub(crate) fn from_vecs(domain: DomainSpec, comps: [Vec<Complex64>; 3]) -> Self {
        Self { domain, comps }
    }

    pub fn from_scalars(x: &ScalarField, y: &ScalarField, z: &ScalarField) -> Result<Self> {
        ensure_same(&x.domain, &y.domain)?;
        ensure_same(&x.domain, &z.domain)?;
        Ok(Self::from_vecs(
            x.domain,
            [x.values.clone(), y.values.clone(), z.values.clone()],
        ))
    }

    pub fn zeros(domain: DomainSpec) -> Self {
        Self::constant(domain, [Complex64::new(0.0, 0.0); 3])
    }

    pub fn constant(domain: DomainSpec, value: [Complex64; 3]) -> Self {
        Self::from_vecs(domain, value.map(|v| vec![v; domain.len()]))
    }

    pub fn from_fn(domain: DomainSpec, f: impl Fn([f64; 3]) -> [Complex64; 3]) -> Self {
        let mut comps = [
            Vec::with_capacity(domain.len()),
            Vec::with_capacity(domain.len()),
            Vec::with_capacity(domain.len()),
        ];
        for n in 0..domain.len() {
            let v = f(domain.point(n));
            for d in 0..3 {
                comps[d].push(v[d]);
            }
        }
        Self::from_vecs(domain, comps)
    }

    pub fn from_real_fn(domain: DomainSpec, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        Self::from_fn(domain, |p| f(p).map(|v| Complex64::new(v, 0.0)))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn comp(&self, d: usize) -> &[Complex64] {
        &self.comps[d]
    }

    pub fn comps(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn component(&self, d: usize) -> ScalarField {
        ScalarField::from_vec(self.domain, self.comps[d].clone())
    }

    #[inline]
    pub fn at(&self, n: usize) -> [Complex64; 3] {
        [self.comps[0][n], self.comps[1][n], self.comps[2][n]]
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self::from_vecs(
            self.domain,
            [0, 1, 2].map(|d| self.comps[d].iter().map(|&v| f(v)).collect()),
        )
    }

    pub fn zip_with(
        &self,
        other: &VectorField,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        ensure_same(&self.domain, &other.domain)?;
        Ok(Self::from_vecs(
            self.domain,
            [0, 1, 2].map(|d| {
                self.comps[d]
                    .iter()
                    .zip(&other.comps[d])
                    .map(|(&a, &b)| f(a, b))
                    .collect()
            }),
        ))
    }

    pub fn add(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|v| v * s)
    }

    /// Multiplies every component by a scalar field.
    pub fn mul_scalar(&self, s: &ScalarField) -> Result<Self> {
        ensure_same(&self.domain, &s.domain)?;
        Ok(Self::from_vecs(
            self.domain,
            [0, 1, 2].map(|d| {
                self.comps[d]
                    .iter()
                    .zip(&s.values)
                    .map(|(&a, &b)| a * b)
                    .collect()
            }),
        ))
    }

    /// Bilinear (unconjugated) pointwise dot product.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        ensure_same(&self.domain, &other.domain)?;
        Ok(ScalarField::from_vec(
            self.domain,
            (0..self.domain.len())
                .map(|n| (0..3).map(|d| self.comps[d][n] * other.comps[d][n]).sum())
                .collect(),
        ))
    }

    /// Pointwise `c · V` with a constant complex vector.
    pub fn dot_const(&self, c: [Complex64; 3]) -> ScalarField {
        ScalarField::from_vec(
            self.domain,
            (0..self.domain.len())
                .map(|n| (0..3).map(|d| c[d] * self.comps[d][n]).sum())
                .collect(),
        )
    }

    pub fn re(&self) -> Self {
        self.map(|v| Complex64::new(v.re, 0.0))
    }

    pub fn im(&self) -> Self {
        self.map(|v| Complex64::new(v.im, 0.0))
    }

    pub fn l2_norm(&self) -> f64 {
        (0..3)
            .map(|d| weighted_sq(&self.domain, &self.comps[d], false))
            .sum::<f64>()
            .sqrt()
    }

    pub fn interior_l2_norm(&self) -> f64 {
        (0..3)
            .map(|d| weighted_sq(&self.domain, &self.comps[d], true))
            .sum::<f64>()
            .sqrt()
    }

    /// Max over nodes of the Euclidean length of the complex vector.
    pub fn max_abs(&self) -> f64 {
        (0..self.domain.len())
            .map(|n| {
                (0..3)
                    .map(|d| self.comps[d][n].norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Components `(12, 13, 23)` of an antisymmetric two-form.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoFormField {
    domain: DomainSpec,
    comps: [Vec<Complex64>; 3],
}

/// Index pairs `(j, k)` with `j < k`, in storage order.
pub const TWO_FORM_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

impl TwoFormField {
    pub fn new(domain: DomainSpec, comps: [Vec<Complex64>; 3]) -> Result<Self> {
        for c in &comps {
            check_values(&domain, c, "two-form field")?;
        }
        Ok(Self { domain, comps })
    }

    pub(crate) fn from_vecs(domain: DomainSpec, comps: [Vec<Complex64>; 3]) -> Self {
        Self { domain, comps }
    }

    pub fn zeros(domain: DomainSpec) -> Self {
        Self::from_vecs(domain, [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); domain.len()]))
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn comp(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    pub fn comps(&self) -> &[Vec<Complex64>; 3] {
        &self.comps
    }

    pub fn sub(&self, other: &TwoFormField) -> Result<Self> {
        ensure_same(&self.domain, &other.domain)?;
        Ok(Self::from_vecs(
            self.domain,
            [0, 1, 2].map(|c| {
                self.comps[c]
                    .iter()
                    .zip(&other.comps[c])
                    .map(|(&a, &b)| a - b)
                    .collect()
            }),
        ))
    }

    pub fn l2_norm(&self) -> f64 {
        self.masked_l2(|_| true)
    }

    /// L² norm over nodes selected by `keep`.
    pub fn masked_l2(&self, keep: impl Fn(usize) -> bool) -> f64 {
        let mut acc = 0.0;
        for n in 0..self.domain.len() {
            if keep(n) {
                let w = self.domain.node_weight(n);
                acc += w * (0..3).map(|c| self.comps[c][n].norm_sqr()).sum::<f64>();
            }
        }
        acc.sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter().map(|v| v.norm()))
            .fold(0.0, f64::max)
    }
}

/// One complex value per boundary node, ordered as
/// [`DomainSpec::boundary_nodes`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFunction {
    domain: DomainSpec,
    values: Vec<Complex64>,
}

impl BoundaryFunction {
    pub fn new(domain: DomainSpec, values: Vec<Complex64>) -> Result<Self> {
        let nb = domain.boundary_nodes().len();
        if values.len() != nb {
            return Err(Error::Shape(format!(
                "boundary function: {} values for {nb} boundary nodes",
                values.len()
            )));
        }
        Ok(Self { domain, values })
    }

    pub fn from_fn(domain: DomainSpec, f: impl Fn([f64; 3]) -> Complex64) -> Self {
        let values = domain
            .boundary_nodes()
            .into_iter()
            .map(|n| f(domain.point(n)))
            .collect();
        Self { domain, values }
    }

    /// Trace of a field on the boundary nodes.
    pub fn trace(field: &ScalarField) -> Self {
        let d = *field.domain();
        let values = d
            .boundary_nodes()
            .into_iter()
            .map(|n| field.values()[n])
            .collect();
        Self { domain: d, values }
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_checks_shape_and_finiteness() {
        let d = DomainSpec::cube(1.0, 5).unwrap();
        assert!(ScalarField::new(d, vec![Complex64::new(0.0, 0.0); 10]).is_err());
        let mut v = vec![Complex64::new(1.0, 0.0); d.len()];
        v[3] = Complex64::new(f64::NAN, 0.0);
        assert!(ScalarField::new(d, v).is_err());
        assert!(BoundaryFunction::new(d, vec![Complex64::new(0.0, 0.0); 3]).is_err());
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = ScalarField::zeros(DomainSpec::cube(1.0, 5).unwrap());
        let b = ScalarField::zeros(DomainSpec::cube(1.0, 6).unwrap());
        assert!(matches!(a.add(&b), Err(Error::Shape(_))));
    }
}
