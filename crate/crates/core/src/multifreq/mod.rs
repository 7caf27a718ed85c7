//! Sound speed, flow, density and absorption from the coefficients at two or
//! three frequencies.
//!
//! For a fluid, `A = ωw + i∇u` and `q = −ω²/c² − 2iωα(ω)/c`, with `w = v/c²`
//! and `u = ½ log ρ`. The combination `Q = q − A·A + i∇·A` is unchanged by
//! gauge transformations and equals
//! `−ω²(1/c² + |w|²) + |∇u|² − Δu + iω(∇·w − 2w·∇u − 2α(ω)/c)`.
//! For a pair of fluids, `Q₂ − Q₁ = q₂ − q₁ + A₁·A₁ − A₂·A₂ − i∇·(A₁ − A₂)`.

mod drift;
mod krylov;
mod pointwise;

pub use drift::{max_principle_excess, potential_from_gradient, solve_drift, Constancy, DriftOperator, DriftSolution};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{divergence, ensure_same, gradient, DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::fluid::{coefficients_from_fluid, FluidParameters, FrequencyPerturbation};
use drift::{constant_boundary, mean};
use krylov::gmres;
use pointwise::{fill_flagged, small_lstsq};

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest relative range accepted for a function certified constant.
pub const CONSTANCY_TOL: f64 = 1e-3;

/// Largest condition number accepted for a pointwise or frequency system.
pub const CONDITION_MAX: f64 = 1e8;

/// Absorption exponents closer than this count as equal.
pub const ZETA_TOL: f64 = 1e-9;

/// Relative mismatch tolerated between the boundary values of `Im A₁` and
/// `Im A₂`.
pub const BOUNDARY_TOL: f64 = 1e-6;
const GMRES_TOL: f64 = 1e-13;
const GMRES_MAX_ITER: usize = 400;

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn real_field(d: DomainSpec, values: Vec<f64>) -> ScalarField {
    ScalarField::new(d, values.into_iter().map(re).collect()).expect("one value per node")
}

/// Coefficients at two or three distinct positive frequencies.
#[derive(Debug, Clone)]
pub struct FrequencySet {
    entries: Vec<FrequencyPerturbation>,
}

impl FrequencySet {
    pub fn new(entries: Vec<FrequencyPerturbation>) -> Result<Self> {
        if !(2..=3).contains(&entries.len()) {
            return Err(Error::Domain(format!("need 2 or 3 frequencies, got {}", entries.len())));
        }
        let d = *entries[0].a.domain();
        for e in &entries {
            if !(e.omega > 0.0 && e.omega.is_finite()) {
                return Err(Error::Domain(format!("frequency {} must be positive", e.omega)));
            }
            ensure_same(&d, e.a.domain())?;
            ensure_same(&d, e.q.domain())?;
        }
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|f| f.omega == e.omega) {
                return Err(Error::Domain(format!("frequency {} repeated", e.omega)));
            }
        }
        Ok(Self { entries })
    }

    /// Coefficients of a fluid at the given frequencies.
    pub fn from_fluid(params: &FluidParameters, omegas: &[f64]) -> Result<Self> {
        Self::new(omegas.iter().map(|&w| coefficients_from_fluid(params, w)).collect::<Result<_>>()?)
    }

    pub fn entries(&self) -> &[FrequencyPerturbation] {
        &self.entries
    }

    pub fn omegas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.omega).collect()
    }

    pub fn domain(&self) -> &DomainSpec {
        self.entries[0].a.domain()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// `Q = q − A·A + i∇·A`.
pub fn gauge_invariant(fp: &FrequencyPerturbation) -> Result<ScalarField> {
    fp.q.sub(&fp.a.dot(&fp.a)?)?.add(&divergence(&fp.a).scale(I))
}

/// Per node least squares `yₖ ≈ P ωₖ² + R`. Returns `(P, R, rms misfit)`.
fn split_powers(ys: &[Vec<f64>], omegas: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let rows: Vec<Vec<f64>> = omegas.iter().map(|w| vec![w * w, 1.0]).collect();
    let (_, cond, _) = small_lstsq(&rows, &vec![0.0; rows.len()]);
    if !(cond <= CONDITION_MAX) {
        return Err(Error::Conditioning(format!(
            "frequencies {omegas:?} too close to split powers of ω (condition {cond:.3e})"
        )));
    }
    let len = ys[0].len();
    let fits: Vec<(f64, f64, f64)> = (0..len)
        .into_par_iter()
        .map(|n| {
            let b: Vec<f64> = ys.iter().map(|y| y[n]).collect();
            let (x, _, res) = small_lstsq(&rows, &b);
            (x[0], x[1], res / (b.len() as f64).sqrt())
        })
        .collect();
    Ok((
        fits.iter().map(|f| f.0).collect(),
        fits.iter().map(|f| f.1).collect(),
        fits.iter().map(|f| f.2).collect(),
    ))
}

/// The pair identity `Q₂ − Q₁ = 0` split by powers of `ω`.
#[derive(Debug, Clone)]
pub struct FrequencySplit {
    pub omegas: Vec<f64>,
    /// `Re(Q₂ − Q₁)` per frequency.
    pub real_parts: Vec<ScalarField>,
    /// `Im(Q₂ − Q₁)/ω` per frequency:
    /// `w₁·a₁ − w₂·a₂ − ∇·(w₁ − w₂) − 2(α₂/c₂ − α₁/c₁)` with `a = ∇ρ/ρ`.
    pub absorption: Vec<ScalarField>,
    /// `ω²` coefficient of the real parts: `|w₁|² − |w₂|² − (1/c₂² − 1/c₁²)`.
    pub flow_speed: ScalarField,
    /// `ω⁰` coefficient: `∇·(Im A₁ − Im A₂) − |Im A₁|² + |Im A₂|²`.
    pub density: ScalarField,
    /// RMS misfit of the power split, zero for two frequencies.
    pub misfit: ScalarField,
}

pub fn split_by_frequency(first: &FrequencySet, second: &FrequencySet) -> Result<FrequencySplit> {
    let omegas = first.omegas();
    if omegas != second.omegas() {
        return Err(Error::Shape(format!("frequencies {omegas:?} and {:?} differ", second.omegas())));
    }
    ensure_same(first.domain(), second.domain())?;
    let d = *first.domain();
    let mut real_parts = Vec::new();
    let mut absorption = Vec::new();
    for (e1, e2) in first.entries.iter().zip(&second.entries) {
        let r = gauge_invariant(e2)?.sub(&gauge_invariant(e1)?)?;
        real_parts.push(r.re());
        absorption.push(r.im().scale(re(1.0 / e1.omega)));
    }
    let ys: Vec<Vec<f64>> = real_parts.iter().map(|f| f.values().iter().map(|v| v.re).collect()).collect();
    let (p, r, misfit) = split_powers(&ys, &omegas)?;
    Ok(FrequencySplit {
        omegas,
        real_parts,
        absorption,
        flow_speed: real_field(d, p),
        density: real_field(d, r),
        misfit: real_field(d, misfit),
    })
}

/// Gauge-invariant content of one fluid's coefficients.
#[derive(Debug, Clone)]
pub struct GaugeInvariants {
    pub omegas: Vec<f64>,
    /// `1/c² + |w|²`.
    pub s: ScalarField,
    /// `|∇u|² − Δu`.
    pub t: ScalarField,
    /// `∇·w − w·a`.
    pub k: ScalarField,
    /// `α₀/c`, available when the exponent `ζ` is supplied.
    pub beta: Option<ScalarField>,
    /// RMS misfit of the split of `Re Q`.
    pub real_misfit: ScalarField,
    /// RMS misfit of `Im Q/ω ≈ k − 2ω^ζ β` (or `≈ k` without absorption).
    pub imag_misfit: ScalarField,
    /// Nodes whose pointwise system was ill-conditioned and interpolated.
    pub flagged: Vec<usize>,
}

/// Splits `Re Q = −ω²s + t` and fits `Im Q/ω = k − 2ω^ζ β`. Without `ζ` the
/// absorption is taken to vanish and `k` is the mean of `Im Q/ω`.
pub fn gauge_invariants(set: &FrequencySet, zeta: Option<&ScalarField>) -> Result<GaugeInvariants> {
    let d = *set.domain();
    let omegas = set.omegas();
    let qs = set.entries.iter().map(gauge_invariant).collect::<Result<Vec<_>>>()?;
    let ys: Vec<Vec<f64>> = qs.iter().map(|q| q.values().iter().map(|v| v.re).collect()).collect();
    let (p, t, real_misfit) = split_powers(&ys, &omegas)?;
    let imag: Vec<Vec<f64>> = qs
        .iter()
        .zip(&omegas)
        .map(|(q, w)| q.values().iter().map(|v| v.im / w).collect())
        .collect();
    let len = d.len();
    let m = omegas.len() as f64;
    let (k, beta, imag_misfit, flagged) = match zeta {
        None => {
            let k: Vec<f64> = (0..len).map(|n| imag.iter().map(|y| y[n]).sum::<f64>() / m).collect();
            let mis = (0..len)
                .map(|n| (imag.iter().map(|y| (y[n] - k[n]).powi(2)).sum::<f64>() / m).sqrt())
                .collect();
            (k, None, mis, Vec::new())
        }
        Some(z) => {
            ensure_same(&d, z.domain())?;
            let fits: Vec<([f64; 2], f64, bool)> = (0..len)
                .into_par_iter()
                .map(|n| {
                    let rows: Vec<Vec<f64>> = omegas.iter().map(|w| vec![1.0, -2.0 * w.powf(z.values()[n].re)]).collect();
                    let b: Vec<f64> = imag.iter().map(|y| y[n]).collect();
                    let (x, cond, res) = small_lstsq(&rows, &b);
                    ([x[0], x[1]], res / m.sqrt(), !(cond <= CONDITION_MAX))
                })
                .collect();
            let flags: Vec<bool> = fits.iter().map(|f| f.2).collect();
            let mut k: Vec<f64> = fits.iter().map(|f| f.0[0]).collect();
            let mut b: Vec<f64> = fits.iter().map(|f| f.0[1]).collect();
            fill_flagged(&d, &mut k, &flags);
            fill_flagged(&d, &mut b, &flags);
            let flagged = (0..len).filter(|&n| flags[n]).collect();
            (k, Some(real_field(d, b)), fits.iter().map(|f| f.1).collect(), flagged)
        }
    };
    Ok(GaugeInvariants {
        omegas,
        s: real_field(d, p.into_iter().map(|v| -v).collect()),
        t: real_field(d, t),
        k: real_field(d, k),
        beta,
        real_misfit: real_field(d, real_misfit),
        imag_misfit: real_field(d, imag_misfit),
        flagged,
    })
}

/// Boundary node used to normalize potentials: the centre of the face `z = z_min`.
pub fn default_reference(d: &DomainSpec) -> usize {
    let [nx, ny, _] = d.dims();
    d.index(nx / 2, ny / 2, 0)
}

fn diameter(d: &DomainSpec) -> f64 {
    (0..3).map(|k| (d.upper()[k] - d.lower()[k]).powi(2)).sum::<f64>().sqrt()
}

/// `g = u₁ − u₂` for `u = ½ log ρ`, with its constancy certificate.
#[derive(Debug, Clone)]
pub struct DensityRatio {
    /// Solution of `Δg − X·∇g = f`, `X = Im A₁ + Im A₂`, where `f` is the
    /// `ω⁰` part of the pair identity built from the two fields.
    pub g: ScalarField,
    /// `u₁ − u₂` from the two potentials of `Im A₁` and `Im A₂` directly.
    pub g_potentials: ScalarField,
    /// `e^{2ḡ}`, the ratio `ρ₁/ρ₂` when `g` is constant.
    pub ratio: f64,
    pub constancy: Constancy,
    pub nonmonotone_rows: Vec<usize>,
}

impl DensityRatio {
    pub fn is_consistent(&self) -> bool {
        self.constancy.holds()
    }
}

/// Solves for `g` with boundary value `anchor`, which is `½ log(ρ₁/ρ₂)` at any
/// boundary point when known and 0 otherwise. Fails when the boundary values
/// of `Im A₁` and `Im A₂` differ, since then `g` is not constant on the boundary.
pub fn recover_density_ratio(im_a1: &VectorField, im_a2: &VectorField, anchor: f64) -> Result<DensityRatio> {
    ensure_same(im_a1.domain(), im_a2.domain())?;
    let d = *im_a1.domain();
    let (b1, b2) = (im_a1.re(), im_a2.re());
    let diff = b1.sub(&b2)?;
    let scale = b1.max_abs().max(b2.max_abs()).max(1.0);
    let gap = d
        .boundary_nodes()
        .into_iter()
        .map(|n| diff.at(n).iter().map(|v| v.norm()).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    if gap > BOUNDARY_TOL * scale {
        return Err(Error::Inconsistent(format!(
            "boundary values of grad(rho)/rho differ by {gap:.3e}; the density ratio is not constant on the boundary"
        )));
    }
    let x = b1.add(&b2)?;
    let source = divergence(&diff).sub(&x.dot(&diff)?)?.re();
    let sol = solve_drift(&x, &source, &constant_boundary(d, anchor))?;
    let start = default_reference(&d);
    let u1 = potential_from_gradient(&b1, start)?;
    let u2 = potential_from_gradient(&b2, start)?;
    let g_potentials = u1.sub(&u2)?.map(|v| v + anchor);
    let spread = |u: &ScalarField| Constancy::of(u, 0.0).range;
    let constancy = Constancy::of(&sol.field, spread(&u1).max(spread(&u2)).max(1.0));
    Ok(DensityRatio {
        ratio: (2.0 * mean(sol.field.values())).exp(),
        g: sol.field,
        g_potentials,
        constancy,
        nonmonotone_rows: sol.nonmonotone_rows,
    })
}

/// `c`, `v` and the gauge separating a representative flow field from `w`.
#[derive(Debug, Clone)]
pub struct VelocityRecovery {
    pub c: ScalarField,
    pub v: VectorField,
    pub w: VectorField,
    /// `χ` with `W = w + ∇χ`, equal to `boundary_value` on the boundary.
    pub chi: ScalarField,
    pub boundary_value: f64,
    /// Range of the potential left after closing `w`, against `max(‖W‖∞, ‖∇χ‖∞)·diam`.
    pub closure: Constancy,
    pub nonmonotone_rows: Vec<usize>,
}

/// From `W = Re A/ω` of any gauge representative, `s = 1/c² + |w|²`,
/// `k = ∇·w − w·a` and `a = ∇ρ/ρ`: solves `Δχ − a·∇χ = ∇·W − W·a − k` with
/// `χ = 0` on the boundary, sets `w = W − ∇χ`, `c = (s − |w|²)^{−1/2}` and
/// `v = c²w`. The same drift problem for the closed `w` must return a
/// constant, otherwise the gauge obstruction is reported.
pub fn recover_velocity_speed(
    w_rep: &VectorField,
    s: &ScalarField,
    k: &ScalarField,
    a: &VectorField,
) -> Result<VelocityRecovery> {
    let d = *w_rep.domain();
    for other in [s.domain(), k.domain(), a.domain()] {
        ensure_same(&d, other)?;
    }
    let (big_w, a) = (w_rep.re(), a.re());
    let forcing = |w: &VectorField| -> Result<ScalarField> {
        Ok(divergence(w).sub(&w.dot(&a)?)?.sub(k)?.re())
    };
    let zero = constant_boundary(d, 0.0);
    let op = DriftOperator::new(&a)?;
    // The gauge data satisfy the central-difference equation exactly, so it is
    // solved by GMRES with the monotone operator as preconditioner.
    let interior = d.interior_nodes();
    let embed = |x: &[f64]| {
        let mut v = vec![0.0; d.len()];
        for (&n, x) in interior.iter().zip(x) {
            v[n] = *x;
        }
        real_field(d, v)
    };
    let restrict = |f: &ScalarField| -> Vec<f64> { interior.iter().map(|&n| f.values()[n].re).collect() };
    let central = |x: &[f64]| -> Result<Vec<f64>> {
        let g = gradient(&embed(x));
        Ok(restrict(&divergence(&g).sub(&g.dot(&a)?)?))
    };
    let monotone = |x: &[f64]| -> Result<Vec<f64>> { Ok(restrict(&op.solve(&embed(x), &zero)?)) };
    let rhs = restrict(&forcing(&big_w)?);
    let start = monotone(&rhs)?;
    let (x, _) = gmres(central, monotone, &rhs, start, GMRES_TOL, GMRES_MAX_ITER)?;
    let chi = embed(&x);
    let grad_chi = gradient(&chi);
    let w = big_w.sub(&grad_chi)?;
    let rest = op.solve(&forcing(&w)?, &zero)?;
    let closure = Constancy::of(&rest, big_w.max_abs().max(grad_chi.max_abs()) * diameter(&d));
    if !closure.holds() {
        return Err(Error::Inconsistent(format!(
            "gauge obstruction not closed: residual potential range {:.3e} against scale {:.3e}",
            closure.range, closure.scale
        )));
    }
    let mut c = Vec::with_capacity(d.len());
    for n in 0..d.len() {
        let ww: f64 = w.at(n).iter().map(|x| x.re * x.re).sum();
        let inv_c2 = s.values()[n].re - ww;
        if !(inv_c2 > 0.0) {
            return Err(Error::Inconsistent(format!(
                "1/c^2 = {inv_c2:.3e} at node {n} is not positive"
            )));
        }
        c.push(1.0 / inv_c2.sqrt());
    }
    let c = real_field(d, c);
    let v = w.mul_scalar(&c.mul(&c)?)?;
    Ok(VelocityRecovery {
        c,
        v,
        w,
        chi,
        boundary_value: 0.0,
        closure,
        nonmonotone_rows: op.nonmonotone_rows,
    })
}

/// Pointwise solution of
/// `D + 2ω^{ζ₁}α₀,₁/c − 2ω^{ζ₂}α₀,₂/c = Im(Q₂ − Q₁)/ω` at three frequencies.
#[derive(Debug, Clone)]
pub struct AbsorptionRecovery {
    /// `D = w₁·a₁ − w₂·a₂ − ∇·(w₁ − w₂)`.
    pub div_term: ScalarField,
    /// `α₀,₁` and `α₀,₂`. Where `ζ₁ = ζ₂` only the difference is determined;
    /// it is stored in the first slot and the second holds zero.
    pub alpha0: [ScalarField; 2],
    /// `α₁(ω) − α₂(ω)` per frequency.
    pub alpha_gap: Vec<ScalarField>,
    /// Nodes where `|ζ₁ − ζ₂| < ZETA_TOL`.
    pub degenerate: Vec<usize>,
    /// Nodes whose system exceeded `CONDITION_MAX`, filled from neighbours.
    pub flagged: Vec<usize>,
}

impl AbsorptionRecovery {
    /// Largest `|α₁(ω) − α₂(ω)|` over nodes and frequencies.
    pub fn max_gap(&self) -> f64 {
        self.alpha_gap.iter().map(|f| f.max_abs()).fold(0.0, f64::max)
    }
}

pub fn recover_absorption(
    split: &FrequencySplit,
    zeta1: &ScalarField,
    zeta2: &ScalarField,
    c: &ScalarField,
) -> Result<AbsorptionRecovery> {
    let omegas = &split.omegas;
    if omegas.len() != 3 {
        return Err(Error::Domain(format!("absorption needs three frequencies, got {}", omegas.len())));
    }
    if let Some(w) = omegas.iter().find(|w| (*w - 1.0).abs() < ZETA_TOL) {
        return Err(Error::Conditioning(format!("frequency {w} makes ω^ζ independent of ζ")));
    }
    let d = *split.flow_speed.domain();
    for f in [zeta1, zeta2, c] {
        ensure_same(&d, f.domain())?;
    }
    let sols: Vec<([f64; 3], bool, bool)> = (0..d.len())
        .into_par_iter()
        .map(|n| {
            let (z1, z2) = (zeta1.values()[n].re, zeta2.values()[n].re);
            let b: Vec<f64> = split.absorption.iter().map(|f| f.values()[n].re).collect();
            let degenerate = (z1 - z2).abs() < ZETA_TOL;
            let rows: Vec<Vec<f64>> = omegas
                .iter()
                .map(|w| {
                    if degenerate {
                        vec![1.0, 2.0 * w.powf(z1)]
                    } else {
                        vec![1.0, 2.0 * w.powf(z1), -2.0 * w.powf(z2)]
                    }
                })
                .collect();
            let (x, cond, _) = small_lstsq(&rows, &b);
            let x3 = [x[0], x[1], x.get(2).copied().unwrap_or(0.0)];
            (x3, degenerate, !(cond <= CONDITION_MAX))
        })
        .collect();
    let flags: Vec<bool> = sols.iter().map(|s| s.2).collect();
    let mut cols: Vec<Vec<f64>> = (0..3).map(|j| sols.iter().map(|s| s.0[j]).collect()).collect();
    for col in &mut cols {
        fill_flagged(&d, col, &flags);
    }
    let cv: Vec<f64> = c.values().iter().map(|v| v.re).collect();
    let alpha0_1: Vec<f64> = (0..d.len()).map(|n| cols[1][n] * cv[n]).collect();
    let alpha0_2: Vec<f64> = (0..d.len()).map(|n| cols[2][n] * cv[n]).collect();
    let alpha_gap = omegas
        .iter()
        .map(|&w| {
            real_field(
                d,
                (0..d.len())
                    .map(|n| {
                        let (z1, z2) = (zeta1.values()[n].re, zeta2.values()[n].re);
                        w.powf(z1) * alpha0_1[n] - w.powf(z2) * alpha0_2[n]
                    })
                    .collect(),
            )
        })
        .collect();
    Ok(AbsorptionRecovery {
        div_term: real_field(d, cols[0].clone()),
        alpha0: [real_field(d, alpha0_1), real_field(d, alpha0_2)],
        alpha_gap,
        degenerate: (0..d.len()).filter(|&n| sols[n].1).collect(),
        flagged: (0..d.len()).filter(|&n| flags[n]).collect(),
    })
}

/// Largest magnitudes of the split fields between the input coefficients and
/// those regenerated from a recovered fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitResiduals {
    pub real_parts: f64,
    pub absorption: f64,
    pub flow_speed: f64,
    pub density: f64,
}

impl SplitResiduals {
    fn of(split: &FrequencySplit) -> Self {
        let max = |fs: &[ScalarField]| fs.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        Self {
            real_parts: max(&split.real_parts),
            absorption: max(&split.absorption),
            flow_speed: split.flow_speed.max_abs(),
            density: split.density.max_abs(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub residuals: SplitResiduals,
    /// Exact algebra: largest relative spread of `c` between frequencies.
    /// Gauge-robust: largest misfit of the frequency fits.
    pub spread: f64,
    /// Gauge-robust only: the density correction `g` and its certificate.
    pub density: Option<Constancy>,
    /// Gauge-robust only.
    pub velocity: Option<GaugeCertificate>,
}

#[derive(Debug, Clone)]
pub struct GaugeCertificate {
    pub chi: ScalarField,
    pub boundary_value: f64,
    pub closure: Constancy,
}

/// Recovered fluid; `rho_normalized` is `ρ/ρ(x_ref)` at the boundary node
/// `reference`.
#[derive(Debug, Clone)]
pub struct RecoveredFluid {
    pub c: ScalarField,
    pub v: VectorField,
    pub rho_normalized: ScalarField,
    /// `(ω, α(ω))` per input frequency.
    pub alpha: Vec<(f64, ScalarField)>,
    pub reference: usize,
    pub diagnostics: Diagnostics,
}

impl RecoveredFluid {
    /// Coefficients `(A, q)` this fluid induces at `omega`, with the `α` of the
    /// matching input frequency.
    pub fn coefficients(&self, omega: f64) -> Result<FrequencyPerturbation> {
        let alpha = self
            .alpha
            .iter()
            .find(|(w, _)| *w == omega)
            .map(|(_, a)| a)
            .ok_or_else(|| Error::Domain(format!("no absorption recorded at frequency {omega}")))?;
        fluid_coefficients(&self.c, &self.v, &self.rho_normalized, alpha, omega)
    }
}

fn fluid_coefficients(
    c: &ScalarField,
    v: &VectorField,
    rho: &ScalarField,
    alpha: &ScalarField,
    omega: f64,
) -> Result<FrequencyPerturbation> {
    let inv_c2 = c.map(|c| 1.0 / (c * c));
    let log_grad = gradient(rho).mul_scalar(&rho.map(|r| 1.0 / r))?;
    let a = v.mul_scalar(&inv_c2.scale(re(omega)))?.add(&log_grad.scale(0.5 * I))?;
    let q = inv_c2
        .scale(re(-omega * omega))
        .zip_with(&alpha.zip_with(c, |al, c| al / c)?, |w, ac| w - 2.0 * I * omega * ac)?;
    Ok(FrequencyPerturbation { omega, a, q })
}

fn residuals_against(set: &FrequencySet, fluid: &RecoveredFluid) -> Result<SplitResiduals> {
    let regenerated = FrequencySet::new(
        set.omegas().iter().map(|&w| fluid.coefficients(w)).collect::<Result<_>>()?,
    )?;
    Ok(SplitResiduals::of(&split_by_frequency(set, &regenerated)?))
}

/// Direct inversion of `A = ωv/c² + (i/2)∇ρ/ρ`, `q = −ω²/c² − 2iωα/c`, valid
/// when the coefficients are those of a fluid rather than a gauge partner.
pub fn extract_exact(set: &FrequencySet, reference: usize) -> Result<RecoveredFluid> {
    let d = *set.domain();
    let speed = |e: &FrequencyPerturbation| -> Result<Vec<f64>> {
        e.q.values()
            .iter()
            .enumerate()
            .map(|(n, q)| {
                if q.re < 0.0 {
                    Ok(e.omega / (-q.re).sqrt())
                } else {
                    Err(Error::Inconsistent(format!("Re q = {} at node {n} is not negative", q.re)))
                }
            })
            .collect()
    };
    let first = &set.entries[0];
    let c = speed(first)?;
    let mut spread: f64 = 0.0;
    for e in &set.entries[1..] {
        for (a, b) in speed(e)?.iter().zip(&c) {
            spread = spread.max((a - b).abs() / b);
        }
    }
    let c = real_field(d, c);
    let w = first.a.re().scale(re(1.0 / first.omega));
    let v = w.mul_scalar(&c.mul(&c)?)?;
    let u = potential_from_gradient(&first.a.im(), reference)?;
    let rho_normalized = u.map(|u| (2.0 * u).exp());
    let alpha = set
        .entries
        .iter()
        .map(|e| {
            let f = e.q.zip_with(&c, |q, c| re(-q.im * c.re / (2.0 * e.omega)))?;
            Ok((e.omega, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fluid = RecoveredFluid {
        c,
        v,
        rho_normalized,
        alpha,
        reference,
        diagnostics: Diagnostics {
            residuals: SplitResiduals {
                real_parts: 0.0,
                absorption: 0.0,
                flow_speed: 0.0,
                density: 0.0,
            },
            spread,
            density: None,
            velocity: None,
        },
    };
    fluid.diagnostics.residuals = residuals_against(set, &fluid)?;
    Ok(fluid)
}

/// Recovery from gauge representatives `(A + ∇φ(ω), q̃(ω))` with `φ(ω)` flat on
/// the boundary. The gauge-invariant `Q` gives `s`, `t`, `k` and `α₀/c`; the
/// density follows from the representative's `Im A` corrected by a drift
/// solve for `g` against `t`, and the flow from the drift solve for `χ`.
/// Three frequencies need the exponent `ζ`.
pub fn extract_gauge_robust(
    set: &FrequencySet,
    zeta: Option<&ScalarField>,
    reference: usize,
) -> Result<RecoveredFluid> {
    let d = *set.domain();
    if set.len() == 3 && zeta.is_none() {
        return Err(Error::Domain("three frequencies need the absorption exponent".into()));
    }
    let inv = gauge_invariants(set, zeta)?;
    let first = &set.entries[0];
    let im_rep = first.a.im();
    let u_rep = potential_from_gradient(&im_rep, reference)?;
    // |Im A|² − ∇·Im A for the representative, against the invariant t.
    let t_rep = im_rep.dot(&im_rep)?.sub(&divergence(&im_rep))?;
    let x = im_rep.scale(re(2.0));
    let g = solve_drift(&x, &inv.t.sub(&t_rep)?, &constant_boundary(d, 0.0))?;
    let density = Constancy::of(&g.field, Constancy::of(&u_rep, 0.0).range.max(1.0));
    let u = u_rep.sub(&g.field)?;
    let rho_normalized = u.map(|u| (2.0 * u.re).exp().into());
    let a = im_rep.sub(&gradient(&g.field))?.scale(re(2.0));
    let w_rep = first.a.re().scale(re(1.0 / first.omega));
    let vel = recover_velocity_speed(&w_rep, &inv.s, &inv.k, &a)?;
    let alpha = set
        .omegas()
        .iter()
        .map(|&w| {
            let f = match (&inv.beta, zeta) {
                (Some(b), Some(z)) => {
                    let wz = z.map(|z| re(w.powf(z.re)));
                    wz.mul(b)?.mul(&vel.c)?
                }
                _ => ScalarField::zeros(d),
            };
            Ok((w, f))
        })
        .collect::<Result<Vec<_>>>()?;
    let spread = inv.real_misfit.max_abs().max(inv.imag_misfit.max_abs());
    let mut fluid = RecoveredFluid {
        c: vel.c,
        v: vel.v,
        rho_normalized,
        alpha,
        reference,
        diagnostics: Diagnostics {
            residuals: SplitResiduals {
                real_parts: 0.0,
                absorption: 0.0,
                flow_speed: 0.0,
                density: 0.0,
            },
            spread,
            density: Some(density),
            velocity: Some(GaugeCertificate {
                chi: vel.chi,
                boundary_value: vel.boundary_value,
                closure: vel.closure,
            }),
        },
    };
    fluid.diagnostics.residuals = residuals_against(set, &fluid)?;
    Ok(fluid)
}

/// Relative L² error of one recovered field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub name: String,
    pub relative_l2: f64,
}

/// Per-field relative L² errors against the fluid that generated the data.
/// The density is compared after normalizing the truth at the reference node.
pub fn compare(recovered: &RecoveredFluid, truth: &FluidParameters) -> Result<Vec<FieldError>> {
    let rel = |err: f64, scale: f64| if scale > 0.0 { err / scale } else { err };
    let mut out = vec![
        FieldError {
            name: "c".into(),
            relative_l2: rel(recovered.c.sub(truth.c())?.l2_norm(), truth.c().l2_norm()),
        },
        FieldError {
            name: "v".into(),
            relative_l2: rel(recovered.v.sub(truth.v())?.l2_norm(), truth.v().l2_norm()),
        },
    ];
    let r0 = truth.rho().values()[recovered.reference];
    let rho = truth.rho().scale(1.0 / r0);
    out.push(FieldError {
        name: "rho_normalized".into(),
        relative_l2: rel(recovered.rho_normalized.sub(&rho)?.l2_norm(), rho.l2_norm()),
    });
    for (w, a) in &recovered.alpha {
        let t = truth.alpha(*w);
        out.push(FieldError {
            name: format!("alpha@{w}"),
            relative_l2: rel(a.sub(&t)?.l2_norm(), t.l2_norm()),
        });
    }
    Ok(out)
}
