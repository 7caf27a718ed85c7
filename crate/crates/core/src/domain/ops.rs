//! Second-order finite differences and trapezoidal quadrature on the box grid.
//!
//! Interior nodes use centred stencils; face nodes use one-sided
//! second-order stencils along the normal axis, so every operator is defined
//! on the full grid.

use num_complex::Complex64;

use super::field::{ensure_same, ScalarField, TwoFormField, VectorField, TWO_FORM_PAIRS};
use super::grid::DomainSpec;
use crate::error::Result;

/// First derivative along `axis` at every node.
pub fn partial(domain: &DomainSpec, values: &[Complex64], axis: usize) -> Vec<Complex64> {
    let dims = domain.dims();
    let h = domain.spacing()[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let last = dims[axis] - 1;
    let inv2h = 1.0 / (2.0 * h);
    (0..domain.len())
        .map(|n| {
            let i = domain.ijk(n)[axis];
            if i == 0 {
                (values[n] * -3.0 + values[n + stride] * 4.0 - values[n + 2 * stride]) * inv2h
            } else if i == last {
                (values[n] * 3.0 - values[n - stride] * 4.0 + values[n - 2 * stride]) * inv2h
            } else {
                (values[n + stride] - values[n - stride]) * inv2h
            }
        })
        .collect()
}

/// Second derivative along `axis` at every node.
pub fn second_partial(domain: &DomainSpec, values: &[Complex64], axis: usize) -> Vec<Complex64> {
    let dims = domain.dims();
    let h = domain.spacing()[axis];
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let last = dims[axis] - 1;
    let inv = 1.0 / (h * h);
    (0..domain.len())
        .map(|n| {
            let i = domain.ijk(n)[axis];
            if i == 0 {
                (values[n] * 2.0 - values[n + stride] * 5.0 + values[n + 2 * stride] * 4.0
                    - values[n + 3 * stride])
                    * inv
            } else if i == last {
                (values[n] * 2.0 - values[n - stride] * 5.0 + values[n - 2 * stride] * 4.0
                    - values[n - 3 * stride])
                    * inv
            } else {
                (values[n + stride] - values[n] * 2.0 + values[n - stride]) * inv
            }
        })
        .collect()
}

pub fn gradient(field: &ScalarField) -> VectorField {
    let d = field.domain();
    VectorField::from_vecs(*d, [0, 1, 2].map(|a| partial(d, field.values(), a)))
}

pub fn divergence(field: &VectorField) -> ScalarField {
    let d = field.domain();
    let mut acc = partial(d, field.comp(0), 0);
    for a in 1..3 {
        for (s, v) in acc.iter_mut().zip(partial(d, field.comp(a), a)) {
            *s += v;
        }
    }
    ScalarField::from_vec(*d, acc)
}

/// Components `∂_j A_k − ∂_k A_j` for `j < k`.
pub fn curl(field: &VectorField) -> TwoFormField {
    let d = field.domain();
    let comps = TWO_FORM_PAIRS.map(|(j, k)| {
        let djak = partial(d, field.comp(k), j);
        let dkaj = partial(d, field.comp(j), k);
        djak.into_iter().zip(dkaj).map(|(a, b)| a - b).collect()
    });
    TwoFormField::from_vecs(*d, comps)
}

pub fn laplacian(field: &ScalarField) -> ScalarField {
    let d = field.domain();
    let mut acc = second_partial(d, field.values(), 0);
    for a in 1..3 {
        for (s, v) in acc.iter_mut().zip(second_partial(d, field.values(), a)) {
            *s += v;
        }
    }
    ScalarField::from_vec(*d, acc)
}

/// Trapezoidal rule over the box: `∫ field · weight`.
pub fn integrate(field: &ScalarField, weight: Option<&ScalarField>) -> Result<Complex64> {
    let d = field.domain();
    if let Some(w) = weight {
        ensure_same(d, w.domain())?;
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..d.len() {
        let mut v = field.values()[n];
        if let Some(w) = weight {
            v *= w.values()[n];
        }
        acc += v * d.node_weight(n);
    }
    Ok(acc)
}
