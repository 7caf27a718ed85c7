//! Boundary values of `A` from oscillating Dirichlet data concentrated at a
//! point of a box face.
//!
//! A probe with tangent `τ′` and scale `λ` uses
//! `v₀ = η((x − x₀)/λ^{1/2}) e^{i(τ′·x′ + i xₙ)/λ}` as Dirichlet data, where `xₙ`
//! is the inward distance to the face. With `u` solving `L_{A,q}u = 0` and `v`
//! harmonic, both equal to `v₀` on the boundary, the normalized value
//! `λ^{−1}∫[−2i(A·∇u)v̄ + q u v̄]` tends to `(τ′, i)·A(x₀)` for unit `τ′`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{gradient, BoundaryFunction, DomainSpec, ScalarField, VectorField};
use crate::error::{Error, Result};
use crate::forward::{DirichletSolver, DtNMap, OperatorCoefficients};
use crate::reconstruct::MagneticCoefficients;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Default probe scales.
pub const LAMBDA_LADDER: [f64; 3] = [0.2, 0.1, 0.05];

/// Largest accepted `|Δ₂| / |Δ₁|` between consecutive probe values.
pub const RATIO_MAX: f64 = 1.0;

/// Relative tolerance for `x₀` lying on the face plane.
const PLANE_TOL: f64 = 1e-9;

/// Differences below this fraction of the largest probe value count as converged.
const RATIO_FLOOR: f64 = 1e-6;

/// One of the six faces of the box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub upper: bool,
}

impl Face {
    pub fn new(axis: usize, upper: bool) -> Result<Self> {
        if axis > 2 {
            return Err(Error::Domain(format!("face axis {axis} out of range")));
        }
        Ok(Self { axis, upper })
    }

    pub fn bottom() -> Self {
        Self { axis: 2, upper: false }
    }

    /// Axes spanning the face, ascending.
    pub fn tangent_axes(&self) -> [usize; 2] {
        match self.axis {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    /// Sign of the inward normal along `axis`.
    pub fn inward_sign(&self) -> f64 {
        if self.upper {
            -1.0
        } else {
            1.0
        }
    }

    fn plane(&self, d: &DomainSpec) -> f64 {
        if self.upper {
            d.upper()[self.axis]
        } else {
            d.lower()[self.axis]
        }
    }

    fn inward_distance(&self, d: &DomainSpec, p: [f64; 3]) -> f64 {
        self.inward_sign() * (p[self.axis] - self.plane(d))
    }

    fn is_on(&self, d: &DomainSpec, n: usize) -> bool {
        let i = d.ijk(n)[self.axis];
        if self.upper {
            i == d.dims()[self.axis] - 1
        } else {
            i == 0
        }
    }
}

/// Tensor bump `Π exp(1 − 1/(1 − (yₖ/ρ)²))` with support radius `ρ` per axis.
/// The amplitude is fixed per grid so that the discrete face integral of `η²`
/// is one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaProfile {
    radius: f64,
}

impl EtaProfile {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Domain(format!("eta radius {radius} must be positive")));
        }
        Ok(Self { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn raw(&self, y: [f64; 3]) -> f64 {
        y.iter()
            .map(|&t| {
                let s = t / self.radius;
                if s.abs() >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - s * s)).exp()
                }
            })
            .product()
    }
}

impl Default for EtaProfile {
    fn default() -> Self {
        Self { radius: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSpec {
    face: Face,
    x0: [f64; 3],
    tangent: [f64; 2],
    lambda: f64,
    eta: EtaProfile,
}

impl ProbeSpec {
    /// Checks that `x₀` lies on `face` at least `2ρλ^{1/2}` from its edges and
    /// that `v₀` vanishes on the opposite face.
    pub fn new(
        domain: &DomainSpec,
        face: Face,
        x0: [f64; 3],
        tangent: [f64; 2],
        lambda: f64,
        eta: EtaProfile,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::Domain(format!("lambda {lambda} outside (0, 1)")));
        }
        if tangent.iter().any(|t| !t.is_finite()) || x0.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain("non-finite probe point or tangent".into()));
        }
        let plane = face.plane(domain);
        let side = domain.upper()[face.axis] - domain.lower()[face.axis];
        if (x0[face.axis] - plane).abs() > PLANE_TOL * side.max(1.0) {
            return Err(Error::Domain(format!("x0 {x0:?} is not on the face {face:?}")));
        }
        let reach = eta.radius * lambda.sqrt();
        for a in face.tangent_axes() {
            let gap = (x0[a] - domain.lower()[a]).min(domain.upper()[a] - x0[a]);
            if gap < 2.0 * reach {
                return Err(Error::Domain(format!(
                    "x0 is {gap:.3} from a face edge, needs {:.3} at lambda {lambda}",
                    2.0 * reach
                )));
            }
        }
        if side <= reach {
            return Err(Error::Domain(format!(
                "box depth {side:.3} does not contain the probe support {reach:.3}"
            )));
        }
        Ok(Self {
            face,
            x0,
            tangent,
            lambda,
            eta,
        })
    }

    pub fn face(&self) -> Face {
        self.face
    }

    pub fn x0(&self) -> [f64; 3] {
        self.x0
    }

    pub fn tangent(&self) -> [f64; 2] {
        self.tangent
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> EtaProfile {
        self.eta
    }

    fn scaled_eta(&self, d: &DomainSpec, p: [f64; 3]) -> f64 {
        let s = self.lambda.sqrt();
        let mut y = [0.0; 3];
        for a in 0..3 {
            y[a] = (p[a] - self.x0[a]) / s;
        }
        y[self.face.axis] = self.face.inward_distance(d, p) / s;
        self.eta.raw(y)
    }

    /// Amplitude making the trapezoid face sum of `η((x′ − x₀′)/λ^{1/2}, 0)²`
    /// equal to `λ`.
    fn eta_amplitude(&self, d: &DomainSpec) -> Result<f64> {
        let dims = d.dims();
        let h = d.spacing();
        let [t0, t1] = self.face.tangent_axes();
        let sum: f64 = (0..d.len())
            .filter(|&n| self.face.is_on(d, n))
            .map(|n| {
                let ijk = d.ijk(n);
                let w = [t0, t1]
                    .iter()
                    .map(|&a| {
                        let edge = ijk[a] == 0 || ijk[a] == dims[a] - 1;
                        if edge {
                            0.5 * h[a]
                        } else {
                            h[a]
                        }
                    })
                    .product::<f64>();
                w * self.scaled_eta(d, d.point(n)).powi(2)
            })
            .sum();
        if sum <= 0.0 {
            return Err(Error::Domain(format!(
                "eta support at lambda {} contains no face nodes",
                self.lambda
            )));
        }
        Ok((self.lambda / sum).sqrt())
    }

    /// The probe `v₀` on every node.
    pub fn v0(&self, d: &DomainSpec) -> Result<ScalarField> {
        let amp = self.eta_amplitude(d)?;
        let [t0, t1] = self.face.tangent_axes();
        Ok(ScalarField::from_fn(*d, |p| {
            let e = self.scaled_eta(d, p);
            if e == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let along = self.tangent[0] * (p[t0] - self.x0[t0]) + self.tangent[1] * (p[t1] - self.x0[t1]);
            let xn = self.face.inward_distance(d, p);
            amp * e * (Complex64::new(-xn, along) / self.lambda).exp()
        }))
    }
}

/// Norms of the probe pieces `v₀`, `v₁ = v − v₀`, `w = u − v₀` and the
/// normalized `q` contribution `λ^{−1}|∫q u v̄|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeNorms {
    pub v0_l2: f64,
    pub v1_l2: f64,
    pub w_h1: f64,
    pub q_term: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub spec: ProbeSpec,
    pub value: Complex64,
    /// Only available when the coefficients are known.
    pub norms: Option<ProbeNorms>,
}

fn weighted_sum(d: &DomainSpec, f: impl Fn(usize) -> Complex64) -> Complex64 {
    (0..d.len()).map(|n| f(n) * d.node_weight(n)).sum()
}

fn h1_norm(f: &ScalarField) -> f64 {
    (f.l2_norm().powi(2) + gradient(f).l2_norm().powi(2)).sqrt()
}

/// Probes from known coefficients. Both Dirichlet problems are factorized
/// once and reused for every tangent and scale.
pub struct BoundaryProber<'a> {
    coeffs: &'a MagneticCoefficients,
    magnetic: DirichletSolver,
    free: DirichletSolver,
}

impl<'a> BoundaryProber<'a> {
    pub fn new(coeffs: &'a MagneticCoefficients) -> Result<Self> {
        let magnetic = DirichletSolver::new(&OperatorCoefficients::magnetic(&coeffs.a, &coeffs.q)?)?;
        let free = DirichletSolver::new(&OperatorCoefficients::zeros(*coeffs.domain()))?;
        Ok(Self {
            coeffs,
            magnetic,
            free,
        })
    }

    pub fn domain(&self) -> &DomainSpec {
        self.coeffs.domain()
    }

    pub fn probe(&self, spec: &ProbeSpec) -> Result<ProbeSample> {
        let d = *self.domain();
        let v0 = spec.v0(&d)?;
        let f = BoundaryFunction::trace(&v0);
        let u = self.magnetic.solve(&f, None)?;
        let v = self.free.solve(&f, None)?;
        let grad_u = gradient(&u);
        let (a, q) = (&self.coeffs.a, self.coeffs.q.values());
        let (uv, vv) = (u.values(), v.values());
        let first = weighted_sum(&d, |n| {
            let g = grad_u.at(n);
            let ad: Complex64 = (0..3).map(|k| a.comp(k)[n] * g[k]).sum();
            -2.0 * I * ad * vv[n].conj()
        });
        let zeroth = weighted_sum(&d, |n| q[n] * uv[n] * vv[n].conj());
        let scale = 1.0 / spec.lambda;
        let norms = ProbeNorms {
            v0_l2: v0.l2_norm(),
            v1_l2: v.sub(&v0)?.l2_norm(),
            w_h1: h1_norm(&u.sub(&v0)?),
            q_term: scale * zeroth.norm(),
        };
        Ok(ProbeSample {
            spec: *spec,
            value: scale * (first + zeroth),
            norms: Some(norms),
        })
    }
}

/// Probes from boundary data alone: `λ^{−1}(f̄ᵀΛ_{A,q}f − fᵀΛ₀f̄)`, which is the
/// same integral by Green's identity. `free` is the map of `−Δ` on the same grid.
pub struct DtnProber<'a> {
    map: &'a DtNMap,
    free: &'a DtNMap,
}

impl<'a> DtnProber<'a> {
    pub fn new(map: &'a DtNMap, free: &'a DtNMap) -> Result<Self> {
        crate::domain::ensure_same(map.domain(), free.domain())?;
        Ok(Self { map, free })
    }

    pub fn domain(&self) -> &DomainSpec {
        self.map.domain()
    }

    pub fn probe(&self, spec: &ProbeSpec) -> Result<ProbeSample> {
        let d = *self.domain();
        let f = BoundaryFunction::trace(&spec.v0(&d)?);
        let fbar = BoundaryFunction::new(d, f.values().iter().map(|v| v.conj()).collect())?;
        let value = (self.map.pairing(&fbar, &f)? - self.free.pairing(&f, &fbar)?) / spec.lambda;
        Ok(ProbeSample {
            spec: *spec,
            value,
            norms: None,
        })
    }
}

/// Source of probe values.
pub enum ProbeData<'a> {
    Coefficients(&'a BoundaryProber<'a>),
    Dtn(&'a DtnProber<'a>),
}

impl ProbeData<'_> {
    pub fn domain(&self) -> &DomainSpec {
        match self {
            ProbeData::Coefficients(p) => p.domain(),
            ProbeData::Dtn(p) => p.domain(),
        }
    }

    pub fn probe(&self, spec: &ProbeSpec) -> Result<ProbeSample> {
        match self {
            ProbeData::Coefficients(p) => p.probe(spec),
            ProbeData::Dtn(p) => p.probe(spec),
        }
    }
}

pub fn probe_value(data: &ProbeData<'_>, spec: &ProbeSpec) -> Result<Complex64> {
    Ok(data.probe(spec)?.value)
}

/// Least-squares fit `value(λ) ≈ limit + slope·λ^{1/2}` over a ladder.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaExtrapolation {
    pub lambdas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub limit: Complex64,
    pub slope: Complex64,
    /// RMS misfit of the fit.
    pub residual: f64,
}

impl std::fmt::Display for LambdaExtrapolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (l, v) in self.lambdas.iter().zip(&self.values) {
            write!(f, "λ={l}: {v:.6e}; ")?;
        }
        write!(f, "limit {:.6e}", self.limit)
    }
}

/// Fits `a + bλ^{1/2}` and applies the ratio test: each difference between
/// consecutive values must not exceed `RATIO_MAX` times the previous one.
pub fn extrapolate_lambda(lambdas: &[f64], values: &[Complex64]) -> Result<LambdaExtrapolation> {
    if lambdas.len() != values.len() || lambdas.len() < 2 {
        return Err(Error::Extrapolation(format!(
            "need at least two matching scales, got {} and {}",
            lambdas.len(),
            values.len()
        )));
    }
    if lambdas.iter().any(|&l| !(l > 0.0 && l < 1.0)) || lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Extrapolation(format!(
            "scales {lambdas:?} must decrease strictly inside (0, 1)"
        )));
    }
    let s: Vec<f64> = lambdas.iter().map(|l| l.sqrt()).collect();
    let m = s.len() as f64;
    let s_mean = s.iter().sum::<f64>() / m;
    let v_mean = values.iter().sum::<Complex64>() / m;
    let sxx: f64 = s.iter().map(|x| (x - s_mean).powi(2)).sum();
    let sxy: Complex64 = s.iter().zip(values).map(|(x, v)| (v - v_mean) * (x - s_mean)).sum();
    let slope = sxy / sxx;
    let limit = v_mean - slope * s_mean;
    let residual = (s
        .iter()
        .zip(values)
        .map(|(x, v)| (v - limit - slope * x).norm_sqr())
        .sum::<f64>()
        / m)
        .sqrt();
    let report = LambdaExtrapolation {
        lambdas: lambdas.to_vec(),
        values: values.to_vec(),
        limit,
        slope,
        residual,
    };
    if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Extrapolation(format!("non-finite probe values: {report}")));
    }
    let floor = RATIO_FLOOR * values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    for w in diffs.windows(2) {
        if w[1] > floor && w[1] > RATIO_MAX * w[0] {
            return Err(Error::Extrapolation(format!(
                "ratio test failed ({:.3} > {RATIO_MAX}): {report}",
                w[1] / w[0]
            )));
        }
    }
    Ok(report)
}

/// Raw component values of unit constant fields at each scale, measured once
/// on a grid and divided out of later probes. The continuum values are 1
/// (tangential) and `i` (inward normal); on a grid at moderate `λ` they also
/// absorb the normal decay of `η` and the resolution of `e^{−xₙ/λ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeCalibration {
    pub lambdas: Vec<f64>,
    pub tangential: Vec<Complex64>,
    pub normal: Vec<Complex64>,
}

impl ProbeCalibration {
    pub fn continuum(lambdas: &[f64]) -> Self {
        Self {
            lambdas: lambdas.to_vec(),
            tangential: vec![Complex64::new(1.0, 0.0); lambdas.len()],
            normal: vec![I; lambdas.len()],
        }
    }
}

/// Probe values at one point for the tangents `±t₁, ±t₂` over a ladder.
#[derive(Debug, Clone)]
pub struct TraceRecovery {
    /// Cartesian components of `A(x₀)`.
    pub trace: [Complex64; 3],
    /// Calibrated per-scale estimates and their fit, per Cartesian component.
    pub ladders: Vec<LambdaExtrapolation>,
    /// Ordered by tangent `+t₁, −t₁, +t₂, −t₂`, then by scale.
    pub samples: Vec<ProbeSample>,
}

const TANGENTS: [[f64; 2]; 4] = [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];

/// Every probe of `recover_trace`, one per tangent and scale.
pub fn probe_ladder(
    data: &ProbeData<'_>,
    face: Face,
    x0: [f64; 3],
    eta: EtaProfile,
    lambdas: &[f64],
) -> Result<Vec<ProbeSample>> {
    let d = *data.domain();
    let specs = TANGENTS
        .iter()
        .flat_map(|&t| lambdas.iter().map(move |&l| (t, l)))
        .map(|(t, l)| ProbeSpec::new(&d, face, x0, t, l, eta))
        .collect::<Result<Vec<_>>>()?;
    specs.par_iter().map(|s| data.probe(s)).collect()
}

/// Uncalibrated `(τ′, i)·A` pieces per scale: half differences of the `±tₖ`
/// probes and the mean of all four.
fn raw_components(samples: &[ProbeSample], n: usize) -> Vec<[Complex64; 3]> {
    let v = |t: usize, l: usize| samples[t * n + l].value;
    (0..n)
        .map(|l| {
            [
                (v(0, l) - v(1, l)) / 2.0,
                (v(2, l) - v(3, l)) / 2.0,
                (v(0, l) + v(1, l) + v(2, l) + v(3, l)) / 4.0,
            ]
        })
        .collect()
}

/// `A(x₀)` from probes with tangents `±t₁` and `±t₂`: differences give the
/// tangential components, the sum gives the normal one. `(τ′, i)·A` with
/// `τ′ = 0` is not reachable because the data then stop being near-harmonic.
pub fn recover_trace(
    data: &ProbeData<'_>,
    face: Face,
    x0: [f64; 3],
    eta: EtaProfile,
    calibration: &ProbeCalibration,
) -> Result<TraceRecovery> {
    let lambdas = &calibration.lambdas;
    let n = lambdas.len();
    if calibration.tangential.len() != n || calibration.normal.len() != n {
        return Err(Error::Shape("calibration tables do not match its scales".into()));
    }
    let samples = probe_ladder(data, face, x0, eta, lambdas)?;
    let raw = raw_components(&samples, n);
    let [t0, t1] = face.tangent_axes();
    let mut trace = [Complex64::new(0.0, 0.0); 3];
    let mut ladders = Vec::with_capacity(3);
    for (slot, axis) in [t0, t1, face.axis].into_iter().enumerate() {
        let vs: Vec<Complex64> = (0..n)
            .map(|l| match slot {
                2 => face.inward_sign() * raw[l][2] / calibration.normal[l],
                _ => raw[l][slot] / calibration.tangential[l],
            })
            .collect();
        let fit = extrapolate_lambda(lambdas, &vs)
            .map_err(|e| Error::Extrapolation(format!("component {axis}: {e}")))?;
        trace[axis] = fit.limit;
        ladders.push(fit);
    }
    Ok(TraceRecovery {
        trace,
        ladders,
        samples,
    })
}

/// Measures the calibration tables on constant unit fields over `domain`.
pub fn calibrate(
    domain: &DomainSpec,
    face: Face,
    x0: [f64; 3],
    eta: EtaProfile,
    lambdas: &[f64],
) -> Result<ProbeCalibration> {
    let run = |axis: usize, sign: f64, slot: usize| -> Result<Vec<Complex64>> {
        let mut unit = [Complex64::new(0.0, 0.0); 3];
        unit[axis] = Complex64::new(sign, 0.0);
        let m = MagneticCoefficients::new(VectorField::constant(*domain, unit), ScalarField::zeros(*domain))?;
        let prober = BoundaryProber::new(&m)?;
        let samples = probe_ladder(&ProbeData::Coefficients(&prober), face, x0, eta, lambdas)?;
        Ok(raw_components(&samples, lambdas.len()).iter().map(|c| c[slot]).collect())
    };
    let tangential = run(face.tangent_axes()[0], 1.0, 0)?;
    let normal = run(face.axis, face.inward_sign(), 2)?;
    if tangential.iter().chain(&normal).any(|c| c.norm() < f64::EPSILON) {
        return Err(Error::Conditioning(format!(
            "degenerate probe calibration: tangential {tangential:?}, normal {normal:?}"
        )));
    }
    Ok(ProbeCalibration {
        lambdas: lambdas.to_vec(),
        tangential,
        normal,
    })
}
