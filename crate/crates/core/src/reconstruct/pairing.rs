use num_complex::Complex64;

use crate::cgo::{build_cgo, CgoContext, CgoSide, CgoSolution, Frame};
use crate::domain::{ensure_same, gradient, DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::forward::OperatorCoefficients;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// `(A, q)` of `L_{A,q} = −Δ − 2iA·∇ + q`.
#[derive(Debug, Clone)]
pub struct MagneticCoefficients {
    pub a: VectorField,
    pub q: ScalarField,
}

impl MagneticCoefficients {
    pub fn new(a: VectorField, q: ScalarField) -> Result<Self> {
        ensure_same(a.domain(), q.domain())?;
        Ok(Self { a, q })
    }

    pub fn domain(&self) -> &DomainSpec {
        self.a.domain()
    }
}

/// `h ∫_B [2i(A₂ − A₁)·∇u₁ u₂ + (q₁ − q₂)u₁u₂] dx` for `L_{A₁,q₁}u₁ = 0` and
/// `L_{A₂,q₂}ᵀu₂ = 0`. As `h → 0` it tends to `2i(μ₁ + iμ₂)·F[A₂ − A₁](ξ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairingSample {
    pub xi: [f64; 3],
    pub frame: Frame,
    pub h: f64,
    pub tau: f64,
    pub value: Complex64,
}

/// `∫_B [(q̃₂ − q₁)u₁u₂ + i∇φ·∇(u₁u₂)] dx` with `q̃₂ = q₂ + 2A₂·∇φ + (∇φ)²`,
/// which tends to `F[q̃₂ − q₁ − iΔφ](ξ)`. `remainder_product` is
/// `|∫ i∇φ·∇(r₁r₂) e^{ix·ξ} dx|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QPairingSample {
    pub xi: [f64; 3],
    pub frame: Frame,
    pub h: f64,
    pub tau: f64,
    pub value: Complex64,
    pub remainder_product: f64,
}

/// `F[f](ξ) = ∫ f e^{ix·ξ} dx` by the trapezoidal rule.
pub fn fourier_coefficient(f: &ScalarField, xi: [f64; 3]) -> Complex64 {
    let d = f.domain();
    (0..d.len())
        .map(|n| d.node_weight(n) * f.values()[n] * plane_wave(d, n, xi))
        .sum()
}

fn plane_wave(d: &DomainSpec, n: usize, xi: [f64; 3]) -> Complex64 {
    let x = d.point(n);
    Complex64::new(0.0, x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]).exp()
}

/// Solutions of the first-side equation and, with the same `h`, `ξ`, frame,
/// `τ` and remainder solve, of the second-side one.
fn cgo_pair(
    first: &OperatorCoefficients,
    second: &OperatorCoefficients,
    ctx: &CgoContext,
) -> Result<(CgoSolution, CgoSolution)> {
    if ctx.side() != CgoSide::First {
        return Err(Error::Domain("pairings take a first-side context".into()));
    }
    let ctx2 = CgoContext::second(ctx.h(), ctx.xi(), ctx.frame())?
        .with_tau(ctx.tau())?
        .with_remainder_solve(ctx.remainder_solve());
    Ok((build_cgo(first, ctx)?, build_cgo(second, &ctx2)?))
}

pub fn pairing_from_cgo(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    ctx: &CgoContext,
) -> Result<PairingSample> {
    ensure_same(m1.domain(), m2.domain())?;
    let c1 = OperatorCoefficients::magnetic(&m1.a, &m1.q)?;
    let c2 = OperatorCoefficients::magnetic_transpose(&m2.a, &m2.q)?;
    let (u1, u2) = cgo_pair(&c1, &c2, ctx)?;
    let d = *m1.domain();
    let h = ctx.h();
    let xi = ctx.xi();
    let zeta = ctx.zeta();
    let w1 = u1.envelope();
    let w2 = u2.envelope();
    let grad_w1 = gradient(&w1);
    // u₁u₂ = e^{ix·ξ}w₁w₂ and h∇u₁ = e^{x·ζ₁/h}(ζ₁w₁ + h∇w₁).
    let value = (0..d.len())
        .map(|n| {
            let (a, b) = (w1.values()[n], w2.values()[n]);
            let g = grad_w1.at(n);
            let mut s = h * (m1.q.values()[n] - m2.q.values()[n]) * a * b;
            for k in 0..3 {
                let da = m2.a.comp(k)[n] - m1.a.comp(k)[n];
                s += 2.0 * I * da * (zeta[k] * a + h * g[k]) * b;
            }
            d.node_weight(n) * s * plane_wave(&d, n, xi)
        })
        .sum();
    Ok(PairingSample {
        xi,
        frame: ctx.frame(),
        h,
        tau: ctx.tau(),
        value,
    })
}

/// The second identity, with `u₁` for `L_{A₁,q₁}` and `u₂` for
/// `−Δ + 2iA₁·∇ + 2i(∇·A₁) + ∇·(−i∇φ) + q̃₂`.
pub fn q_pairing_from_cgo(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    phi: &ScalarField,
    ctx: &CgoContext,
) -> Result<QPairingSample> {
    ensure_same(m1.domain(), m2.domain())?;
    ensure_same(m1.domain(), phi.domain())?;
    let d = *m1.domain();
    let grad_phi = gradient(phi);
    let q_tilde = q_tilde(m2, &grad_phi)?;
    let c1 = OperatorCoefficients::magnetic(&m1.a, &m1.q)?;
    let v = m1.a.scale(2.0 * I);
    let w = v.sub(&grad_phi.scale(I))?;
    let c2 = OperatorCoefficients::new(v, w, q_tilde.clone())?;
    let (u1, u2) = cgo_pair(&c1, &c2, ctx)?;
    let xi = ctx.xi();
    let prod = u1.envelope().mul(&u2.envelope())?;
    let grad_prod = gradient(&prod);
    let rr = u1.remainder.mul(&u2.remainder)?;
    let grad_rr = gradient(&rr);
    let mut value = Complex64::new(0.0, 0.0);
    let mut rem = Complex64::new(0.0, 0.0);
    for n in 0..d.len() {
        let wave = d.node_weight(n) * plane_wave(&d, n, xi);
        let p = prod.values()[n];
        let gp = grad_prod.at(n);
        let gf = grad_phi.at(n);
        let gr = grad_rr.at(n);
        let mut s = (q_tilde.values()[n] - m1.q.values()[n]) * p;
        let mut r = Complex64::new(0.0, 0.0);
        for k in 0..3 {
            s += I * gf[k] * (I * xi[k] * p + gp[k]);
            r += I * gf[k] * gr[k];
        }
        value += wave * s;
        rem += wave * r;
    }
    Ok(QPairingSample {
        xi,
        frame: ctx.frame(),
        h: ctx.h(),
        tau: ctx.tau(),
        value,
        remainder_product: rem.norm(),
    })
}

/// `q₂ + 2A₂·∇φ + (∇φ)²`.
pub(crate) fn q_tilde(m2: &MagneticCoefficients, grad_phi: &VectorField) -> Result<ScalarField> {
    let cross = m2.a.dot(grad_phi)?.scale(Complex64::new(2.0, 0.0));
    m2.q.add(&cross)?.add(&grad_phi.dot(grad_phi)?)
}

/// The ladder `base`, scaled down when needed so that `h₀|ξ| ≤ 1`.
pub fn h_ladder_for(base: &[f64], xi: [f64; 3]) -> Result<Vec<f64>> {
    if base.is_empty() || base.iter().any(|h| !(*h > 0.0 && *h <= 1.0)) {
        return Err(Error::Domain(format!("h ladder must lie in (0, 1], got {base:?}")));
    }
    if base.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain(format!("h ladder must be strictly decreasing, got {base:?}")));
    }
    let size = (xi[0] * xi[0] + xi[1] * xi[1] + xi[2] * xi[2]).sqrt();
    let scale = if base[0] * size > 1.0 { 1.0 / (base[0] * size) } else { 1.0 };
    Ok(base.iter().map(|h| h * scale).collect())
}

/// Pairings along `hs` for one frequency and frame, with `τ = tau_factor·h^{1/2}`.
pub fn pairing_ladder(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    xi: [f64; 3],
    frame: Frame,
    hs: &[f64],
    tau_factor: f64,
) -> Result<Vec<PairingSample>> {
    hs.iter()
        .map(|&h| {
            let ctx = CgoContext::first(h, xi, frame)?.with_tau(tau_factor * h.sqrt())?;
            pairing_from_cgo(m1, m2, &ctx)
        })
        .collect()
}

/// As [`pairing_ladder`] for the second identity.
pub fn q_pairing_ladder(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    phi: &ScalarField,
    xi: [f64; 3],
    frame: Frame,
    hs: &[f64],
    tau_factor: f64,
) -> Result<Vec<QPairingSample>> {
    hs.iter()
        .map(|&h| {
            let ctx = CgoContext::first(h, xi, frame)?.with_tau(tau_factor * h.sqrt())?;
            q_pairing_from_cgo(m1, m2, phi, &ctx)
        })
        .collect()
}

/// Value at `h = 0` of the polynomial through `(hs[j], values[j])`
/// (Richardson extrapolation by Neville's scheme).
pub fn extrapolate_to_zero(hs: &[f64], values: &[Complex64]) -> Result<Complex64> {
    if hs.is_empty() || hs.len() != values.len() {
        return Err(Error::Extrapolation(format!(
            "need matching non-empty ladders, got {} h values and {} samples",
            hs.len(),
            values.len()
        )));
    }
    for (i, a) in hs.iter().enumerate() {
        if !(*a > 0.0) || hs[..i].iter().any(|b| b == a) {
            return Err(Error::Extrapolation(format!("h values must be positive and distinct: {hs:?}")));
        }
    }
    let mut p = values.to_vec();
    let n = p.len();
    for level in 1..n {
        for i in 0..n - level {
            let (hi, hj) = (hs[i], hs[i + level]);
            p[i] = (hi * p[i + 1] - hj * p[i]) / (hi - hj);
        }
    }
    if !(p[0].re.is_finite() && p[0].im.is_finite()) {
        return Err(Error::Extrapolation("non-finite limit".into()));
    }
    Ok(p[0])
}
