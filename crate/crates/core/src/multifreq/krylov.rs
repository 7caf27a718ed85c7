//! Right-preconditioned restarted GMRES for small real systems.

use crate::error::{Error, Result};

const RESTART: usize = 40;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` with `A M⁻¹ y = b`, `x = M⁻¹ y`. Returns `x` and the final
/// relative residual `‖b − Ax‖/‖b‖`.
pub(crate) fn gmres(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64)> {
    let bn = norm(b);
    if bn == 0.0 {
        return Ok((vec![0.0; b.len()], 0.0));
    }
    let mut x = x0;
    let mut iters = 0;
    loop {
        let ax = apply(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= tol * bn || iters >= max_iter {
            return Ok((x, beta / bn));
        }
        let mut basis = vec![r.iter().map(|v| v / beta).collect::<Vec<f64>>()];
        let mut z_basis: Vec<Vec<f64>> = Vec::new();
        let mut h: Vec<Vec<f64>> = Vec::new();
        let (mut cs, mut sn): (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
        let mut g = vec![beta];
        for j in 0..RESTART {
            iters += 1;
            let z = precond(&basis[j])?;
            let mut w = apply(&z)?;
            z_basis.push(z);
            let mut col = Vec::with_capacity(j + 2);
            for v in &basis {
                let hij = dot(&w, v);
                for (wk, vk) in w.iter_mut().zip(v) {
                    *wk -= hij * vk;
                }
                col.push(hij);
            }
            let hn = norm(&w);
            col.push(hn);
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g.push(-s * g[j]);
            g[j] *= c;
            h.push(col);
            let done = g[j + 1].abs() <= tol * bn || hn == 0.0 || iters >= max_iter;
            if !done {
                basis.push(w.iter().map(|v| v / hn).collect());
            }
            if done || j + 1 == RESTART {
                break;
            }
        }
        // Back substitution on the triangular Hessenberg factor.
        let m = h.len();
        let mut y = vec![0.0; m];
        for i in (0..m).rev() {
            let s: f64 = (i + 1..m).map(|k| h[k][i] * y[k]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver { message: "gmres breakdown".into(), residual: f64::NAN });
        }
        for (k, yk) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&z_basis[k]) {
                *xi += yk * zi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_a_nonsymmetric_tridiagonal_system() {
        let n = 50;
        let apply = |x: &[f64]| -> Result<Vec<f64>> {
            Ok((0..n)
                .map(|i| {
                    let l = if i > 0 { -1.3 * x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { -0.6 * x[i + 1] } else { 0.0 };
                    2.5 * x[i] + l + r
                })
                .collect())
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = apply(&truth).unwrap();
        let (x, res) = gmres(apply, |v| Ok(v.to_vec()), &b, vec![0.0; n], 1e-13, 500).unwrap();
        assert!(res < 1e-13, "{res}");
        let err = x.iter().zip(&truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }
}
