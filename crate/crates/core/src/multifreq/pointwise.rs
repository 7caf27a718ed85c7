//! Small dense systems solved at every node.

use crate::domain::DomainSpec;

/// Least squares `min ‖Mx − b‖` for `n × m` with `m ≤ n`, by Householder QR.
/// Returns the solution, the Frobenius condition number `‖R‖‖R⁻¹‖` and the
/// residual norm. A singular `R` gives an infinite condition number and a
/// zero solution.
pub(crate) fn small_lstsq(m: &[Vec<f64>], b: &[f64]) -> (Vec<f64>, f64, f64) {
    let rows = m.len();
    let cols = m[0].len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut y = b.to_vec();
    for j in 0..cols {
        let norm = (j..rows).map(|i| a[i][j] * a[i][j]).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (j..rows).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        if vv == 0.0 {
            continue;
        }
        for col in j..cols {
            let dot: f64 = (j..rows).map(|i| v[i - j] * a[i][col]).sum();
            for i in j..rows {
                a[i][col] -= 2.0 * dot / vv * v[i - j];
            }
        }
        let dot: f64 = (j..rows).map(|i| v[i - j] * y[i]).sum();
        for i in j..rows {
            y[i] -= 2.0 * dot / vv * v[i - j];
        }
    }
    let residual = y[cols..].iter().map(|x| x * x).sum::<f64>().sqrt();
    if (0..cols).any(|j| a[j][j] == 0.0) {
        return (vec![0.0; cols], f64::INFINITY, residual);
    }
    let back = |rhs: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; cols];
        for i in (0..cols).rev() {
            let s: f64 = (i + 1..cols).map(|k| a[i][k] * x[k]).sum();
            x[i] = (rhs[i] - s) / a[i][i];
        }
        x
    };
    let x = back(&y[..cols]);
    let r_norm = (0..cols).flat_map(|i| (i..cols).map(move |k| (i, k))).map(|(i, k)| a[i][k] * a[i][k]).sum::<f64>().sqrt();
    let mut inv_norm = 0.0;
    for e in 0..cols {
        let mut unit = vec![0.0; cols];
        unit[e] = 1.0;
        inv_norm += back(&unit).iter().map(|x| x * x).sum::<f64>();
    }
    (x, r_norm * inv_norm.sqrt(), residual)
}

/// Replaces flagged values by the mean of their unflagged axis neighbours;
/// nodes without any keep their value.
pub(crate) fn fill_flagged(d: &DomainSpec, values: &mut [f64], flagged: &[bool]) {
    let dims = d.dims();
    let source = values.to_vec();
    for n in 0..values.len() {
        if !flagged[n] {
            continue;
        }
        let ijk = d.ijk(n);
        let mut sum = 0.0;
        let mut count = 0;
        for k in 0..3 {
            for step in [-1i64, 1] {
                let j = ijk[k] as i64 + step;
                if j < 0 || j >= dims[k] as i64 {
                    continue;
                }
                let mut nb = ijk;
                nb[k] = j as usize;
                let m = d.index(nb[0], nb[1], nb[2]);
                if !flagged[m] {
                    sum += source[m];
                    count += 1;
                }
            }
        }
        if count > 0 {
            values[n] = sum / count as f64;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_tall_systems() {
        let m = vec![vec![2.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 4.0]];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = m.iter().map(|r| r.iter().zip(&x).map(|(a, b)| a * b).sum()).collect();
        let (sol, cond, res) = small_lstsq(&m, &b);
        for k in 0..3 {
            assert!((sol[k] - x[k]).abs() < 1e-14);
        }
        assert!(cond > 1.0 && cond < 20.0 && res < 1e-14);
        // Fit through three collinear points plus noise on one.
        let tall = vec![vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]];
        let (sol, _, res) = small_lstsq(&tall, &[1.0, 3.0, 5.0]);
        assert!((sol[0] - 1.0).abs() < 1e-14 && (sol[1] - 2.0).abs() < 1e-14 && res < 1e-14);
        let (_, _, res) = small_lstsq(&tall, &[1.0, 3.0, 6.0]);
        assert!((res - (1.0f64 / 6.0).sqrt()).abs() < 1e-14, "{res}");
    }

    #[test]
    fn singular_systems_report_infinite_condition() {
        let m = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let (_, cond, _) = small_lstsq(&m, &[1.0, 2.0]);
        assert!(cond > 1e15, "{cond}");
    }

    #[test]
    fn flagged_nodes_take_neighbour_means() {
        let d = DomainSpec::cube(0.5, 5).unwrap();
        let mut v: Vec<f64> = (0..d.len()).map(|n| n as f64).collect();
        let mut flags = vec![false; d.len()];
        let c = d.index(2, 2, 2);
        flags[c] = true;
        v[c] = f64::NAN;
        fill_flagged(&d, &mut v, &flags);
        assert_eq!(v[c], 62.0);
    }
}
