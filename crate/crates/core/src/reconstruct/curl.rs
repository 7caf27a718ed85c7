use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::pairing::{extrapolate_to_zero, MagneticCoefficients, PairingSample};
use crate::cgo::{cauchy_transform, cdot, mollify, Frame, MollifierSpec};
use crate::domain::{DomainSpec, TwoFormField, TWO_FORM_PAIRS};
use crate::error::{Error, Result};

const I: Complex64 = Complex64::new(0.0, 1.0);
const ORTHO_TOL: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-6;

/// How the amplitude phases `e^{Φ₁+Φ₂}` are handled when stripping.
#[derive(Debug, Clone, Copy)]
pub enum PhaseOracle<'a> {
    /// `Φ₁ + Φ₂ = 0`, as for equal magnetic potentials.
    Cancelling,
    /// Phases computed from the known pair.
    Known(&'a MagneticCoefficients, &'a MagneticCoefficients),
}

/// `Â⊥(ξ)`, the part of `F[A₂ − A₁](ξ)` orthogonal to `ξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierSample {
    pub xi: [f64; 3],
    pub a_perp: [Complex64; 3],
}

/// Samples on the lattice `ξ = 2πk/L` of a box with side lengths `period`.
#[derive(Debug, Clone)]
pub struct FourierSlice {
    period: [f64; 3],
    samples: BTreeMap<[i64; 3], FourierSample>,
}

fn lattice_index(xi: [f64; 3], period: [f64; 3]) -> Result<[i64; 3]> {
    let mut k = [0i64; 3];
    for a in 0..3 {
        let t = xi[a] * period[a] / (2.0 * PI);
        if (t - t.round()).abs() > 1e-9 {
            return Err(Error::Inconsistent(format!(
                "xi = {xi:?} is not on the lattice of period {period:?}"
            )));
        }
        k[a] = t.round() as i64;
    }
    Ok(k)
}

impl FourierSlice {
    /// Checks `Â⊥(ξ)·ξ = 0` for each sample and that every `ξ` is a lattice point.
    pub fn new(period: [f64; 3], samples: Vec<FourierSample>) -> Result<Self> {
        if period.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain(format!("period must be positive, got {period:?}")));
        }
        let mut map = BTreeMap::new();
        for s in samples {
            let dot = cdot(s.a_perp, s.xi.map(|x| Complex64::new(x, 0.0))).norm();
            let scale = norm(s.xi) * s.a_perp.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if dot > ORTHO_TOL * scale.max(1.0) {
                return Err(Error::Inconsistent(format!(
                    "sample at xi = {:?} is not orthogonal to xi (|A·xi| = {dot:.3e})",
                    s.xi
                )));
            }
            if map.insert(lattice_index(s.xi, period)?, s).is_some() {
                return Err(Error::Inconsistent(format!("duplicate sample at xi = {:?}", s.xi)));
            }
        }
        Ok(Self { period, samples: map })
    }

    pub fn for_domain(domain: &DomainSpec, samples: Vec<FourierSample>) -> Result<Self> {
        Self::new(box_period(domain), samples)
    }

    pub fn period(&self) -> [f64; 3] {
        self.period
    }

    pub fn samples(&self) -> impl Iterator<Item = &FourierSample> {
        self.samples.values()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, xi: [f64; 3]) -> Option<&FourierSample> {
        lattice_index(xi, self.period).ok().and_then(|k| self.samples.get(&k))
    }
}

fn box_period(d: &DomainSpec) -> [f64; 3] {
    [0, 1, 2].map(|a| d.upper()[a] - d.lower()[a])
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Lattice frequencies `2πk/L` of the box with `|ξ|∞ ≤ xi_max`. With
/// `half`, only `ξ = 0` and one of each pair `±ξ` (first nonzero index positive).
pub fn xi_grid(domain: &DomainSpec, xi_max: f64, half: bool) -> Vec<[f64; 3]> {
    let period = box_period(domain);
    let kmax = period.map(|p| (xi_max * p / (2.0 * PI) + 1e-9).floor() as i64);
    let mut out = Vec::new();
    for kz in -kmax[2]..=kmax[2] {
        for ky in -kmax[1]..=kmax[1] {
            for kx in -kmax[0]..=kmax[0] {
                let k = [kx, ky, kz];
                if half {
                    let lead = k.iter().rev().find(|c| **c != 0).copied().unwrap_or(0);
                    if lead < 0 {
                        continue;
                    }
                }
                out.push([0, 1, 2].map(|a| 2.0 * PI * k[a] as f64 / period[a]));
            }
        }
    }
    out
}

/// `2i ζ₀·∫(A₂ − A₁)e^{Φ}e^{ix·ξ} dx` with `Φ = N_{ζ₀}⁻¹(iζ₀·(A₂ − A₁)_τ)`,
/// the sum of the two amplitude phases at scale `τ`. This is what a pairing
/// ladder tends to when the phases are kept.
pub fn phased_fourier(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    xi: [f64; 3],
    frame: Frame,
    tau: f64,
) -> Result<Complex64> {
    Ok(phase_sums(m1, m2, xi, frame, tau)?.0)
}

/// `(phased, phased − unphased)` transforms for [`phased_fourier`].
fn phase_sums(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    xi: [f64; 3],
    frame: Frame,
    tau: f64,
) -> Result<(Complex64, Complex64)> {
    let z = frame.zeta0();
    let diff = m2.a.sub(&m1.a)?;
    let spec = MollifierSpec::new(tau)?;
    let source = mollify(&diff, spec).dot_const(z).scale(I);
    let phi = cauchy_transform(&source, z)?;
    let d = *m1.domain();
    let mut phased = Complex64::new(0.0, 0.0);
    let mut excess = Complex64::new(0.0, 0.0);
    for n in 0..d.len() {
        let x = d.point(n);
        let wave = Complex64::new(0.0, x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2]).exp();
        let base = d.node_weight(n) * cdot(z, diff.at(n)) * wave;
        let e = phi.values()[n].exp();
        phased += base * e;
        excess += base * (e - 1.0);
    }
    Ok((2.0 * I * phased, 2.0 * I * excess))
}

/// `Â⊥(ξ)` from pairing ladders at one `ξ` for at least two frames.
///
/// Per frame, the phase shift is removed at every `h` (with that sample's
/// `τ`), the ladder is extrapolated to `h = 0`, giving `2i ζ₀·Â`, and the
/// two components of `Â` in `ξ⊥` are fitted by least squares over frames.
pub fn strip_phases(samples: &[PairingSample], oracle: PhaseOracle) -> Result<FourierSample> {
    let first = samples
        .first()
        .ok_or_else(|| Error::Inconsistent("no pairing samples".into()))?;
    let xi = first.xi;
    if samples.iter().any(|s| s.xi != xi) {
        return Err(Error::Inconsistent("samples mix several frequencies".into()));
    }
    let mut frames: Vec<(Frame, Vec<&PairingSample>)> = Vec::new();
    for s in samples {
        match frames.iter_mut().find(|(f, _)| *f == s.frame) {
            Some((_, group)) => group.push(s),
            None => frames.push((s.frame, vec![s])),
        }
    }
    let basis = Frame::pair_for(xi)[0];
    let (ea, eb) = (basis.mu1, basis.mu2);
    let mut rows = Vec::with_capacity(frames.len());
    for (frame, group) in &frames {
        let mut hs = Vec::with_capacity(group.len());
        let mut values = Vec::with_capacity(group.len());
        for s in group {
            let shift = match oracle {
                PhaseOracle::Cancelling => Complex64::new(0.0, 0.0),
                PhaseOracle::Known(m1, m2) => phase_sums(m1, m2, xi, *frame, s.tau)?.1,
            };
            hs.push(s.h);
            values.push(s.value - shift);
        }
        let limit = extrapolate_to_zero(&hs, &values)? / (2.0 * I);
        let z = frame.zeta0();
        let real = |v: [f64; 3]| v.map(|x| Complex64::new(x, 0.0));
        rows.push((cdot(z, real(ea)), cdot(z, real(eb)), limit));
    }
    let (alpha, beta) = least_squares_2(&rows)?;
    let a_perp = [0, 1, 2].map(|k| alpha * ea[k] + beta * eb[k]);
    Ok(FourierSample { xi, a_perp })
}

/// Least-squares `(α, β)` for rows `c_a α + c_b β = t`.
fn least_squares_2(rows: &[(Complex64, Complex64, Complex64)]) -> Result<(Complex64, Complex64)> {
    let mut n = [[Complex64::new(0.0, 0.0); 2]; 2];
    let mut rhs = [Complex64::new(0.0, 0.0); 2];
    for &(ca, cb, t) in rows {
        let c = [ca, cb];
        for i in 0..2 {
            for j in 0..2 {
                n[i][j] += c[i].conj() * c[j];
            }
            rhs[i] += c[i].conj() * t;
        }
    }
    let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
    let trace = n[0][0].re + n[1][1].re;
    if rows.len() < 2 || det.norm() <= 1e-12 * trace * trace {
        return Err(Error::Conditioning(format!(
            "the {} frame(s) supplied do not span the plane orthogonal to xi",
            rows.len()
        )));
    }
    let alpha = (n[1][1] * rhs[0] - n[0][1] * rhs[1]) / det;
    let beta = (n[0][0] * rhs[1] - n[1][0] * rhs[0]) / det;
    Ok((alpha, beta))
}

/// `d(A₂ − A₁)` on `domain` by Fourier synthesis of
/// `(dÂ)_jk(ξ) = −i(ξ_j Â_k − ξ_k Â_j)` over the slice.
///
/// With `real`, missing partners `−ξ` are filled with `conj Â(ξ)`, existing
/// pairs are symmetrized (with a warning when they disagree) and the result is
/// real. Without it, every `ξ ≠ 0` needs its partner.
pub fn recover_curl(slice: &FourierSlice, domain: &DomainSpec, real: bool) -> Result<TwoFormField> {
    let mut full: BTreeMap<[i64; 3], FourierSample> = BTreeMap::new();
    for (k, s) in &slice.samples {
        let neg = k.map(|c| -c);
        let partner = slice.samples.get(&neg);
        if !real {
            if partner.is_none() && *k != [0, 0, 0] {
                return Err(Error::Inconsistent(format!(
                    "slice is not symmetric: xi = {:?} has no partner",
                    s.xi
                )));
            }
            full.insert(*k, *s);
            continue;
        }
        let mirrored = partner.map(|p| p.a_perp.map(|c| c.conj()));
        let value = match mirrored {
            Some(m) => {
                let gap = (0..3).map(|c| (s.a_perp[c] - m[c]).norm_sqr()).sum::<f64>().sqrt();
                let scale = (0..3).map(|c| s.a_perp[c].norm_sqr()).sum::<f64>().sqrt();
                if gap > HERMITIAN_TOL * scale.max(f64::MIN_POSITIVE) {
                    log::warn!(
                        "slice is not Hermitian at xi = {:?}: relative gap {:.3e}",
                        s.xi,
                        gap / scale
                    );
                }
                [0, 1, 2].map(|c| 0.5 * (s.a_perp[c] + m[c]))
            }
            None => s.a_perp,
        };
        full.insert(*k, FourierSample { xi: s.xi, a_perp: value });
        if partner.is_none() {
            full.insert(
                neg,
                FourierSample {
                    xi: s.xi.map(|x| -x),
                    a_perp: value.map(|c| c.conj()),
                },
            );
        }
    }
    let volume: f64 = slice.period.iter().product();
    let spectra: Vec<([f64; 3], [Complex64; 3])> = full
        .values()
        .map(|s| {
            let comps = TWO_FORM_PAIRS
                .map(|(j, k)| -I * (s.xi[j] * s.a_perp[k] - s.xi[k] * s.a_perp[j]) / volume);
            (s.xi, comps)
        })
        .collect();
    let mut comps = [0, 1, 2].map(|_| vec![Complex64::new(0.0, 0.0); domain.len()]);
    for n in 0..domain.len() {
        let x = domain.point(n);
        for (xi, spec) in &spectra {
            let wave = Complex64::new(0.0, -(x[0] * xi[0] + x[1] * xi[1] + x[2] * xi[2])).exp();
            for c in 0..3 {
                comps[c][n] += spec[c] * wave;
            }
        }
        if real {
            for comp in comps.iter_mut() {
                comp[n] = Complex64::new(comp[n].re, 0.0);
            }
        }
    }
    TwoFormField::new(*domain, comps)
}
