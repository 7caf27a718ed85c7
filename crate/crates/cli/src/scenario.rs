//! Scenario files: TOML with a fixed schema and no unknown keys.

use std::ops::Range;
use std::path::{Path, PathBuf};

use cgolab::domain::{read_field, DomainSpec};
use cgolab::fluid::{Bump, FluidParameters, FluidState, Phantom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::CliError;

/// Default scenario used when `--scenario` is not given.
pub const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Oracle,
    Dtn,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    seed: Option<u64>,
    mode: Option<Mode>,
    output: Option<PathBuf>,
    domain: Spanned<RawDomain>,
    fluid: Spanned<PhantomSpec>,
    pair: Option<PairSpec>,
    frequencies: Spanned<Vec<f64>>,
    h_ladder: Spanned<Vec<f64>>,
    lambda_ladder: Spanned<Vec<f64>>,
    xi_max: Spanned<f64>,
    tau_factor: Option<Spanned<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    lower: [f64; 3],
    upper: [f64; 3],
    dims: [usize; 3],
}

/// Pointwise fluid state; omitted keys take the quiet-fluid defaults.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StateSpec {
    pub c: f64,
    pub rho: f64,
    pub v: [f64; 3],
    pub alpha0: f64,
    pub zeta: f64,
}

impl Default for StateSpec {
    fn default() -> Self {
        let s = FluidState::default();
        Self { c: s.c, rho: s.rho, v: s.v, alpha0: s.alpha0, zeta: s.zeta }
    }
}

impl From<StateSpec> for FluidState {
    fn from(s: StateSpec) -> Self {
        FluidState { c: s.c, rho: s.rho, v: s.v, alpha0: s.alpha0, zeta: s.zeta }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhantomSpec {
    Constant {
        #[serde(default)]
        state: StateSpec,
    },
    GaussianBump {
        #[serde(default)]
        background: StateSpec,
        delta: StateSpec,
        center: [f64; 3],
        width: f64,
    },
    TanhInterface {
        left: StateSpec,
        right: StateSpec,
        axis: usize,
        position: f64,
        width: f64,
    },
    /// Paths relative to the scenario file, in the binary field format.
    Files {
        c: PathBuf,
        rho: PathBuf,
        v: PathBuf,
        alpha0: PathBuf,
        zeta: PathBuf,
    },
}

/// Exactly one of the two tables.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    /// Boundary-flat bump gauge; omitted parameters are drawn from the seed.
    gauge: Option<GaugeSpec>,
    fluid: Option<PhantomSpec>,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaugeSpec {
    pub center: Option<[f64; 3]>,
    pub radius: Option<f64>,
    pub amplitude: Option<f64>,
}

/// The second member of the pair once resolved.
#[derive(Debug, Clone)]
pub enum Pair {
    Gauge(Bump),
    Fluid(FluidParameters),
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub seed: u64,
    pub mode: Mode,
    pub output: Option<PathBuf>,
    pub domain: DomainSpec,
    pub fluid: FluidParameters,
    pub pair: Pair,
    pub frequencies: Vec<f64>,
    pub h_ladder: Vec<f64>,
    pub lambda_ladder: Vec<f64>,
    pub xi_max: f64,
    pub tau_factor: f64,
    /// SHA-256 of the scenario text, hex encoded.
    pub sha256: String,
}

/// Scenario text plus the name and directory used in diagnostics and for
/// resolving relative paths.
pub struct Source {
    pub name: String,
    pub text: String,
    pub dir: PathBuf,
}

impl Source {
    pub fn default_scenario() -> Self {
        Self { name: "<default scenario>".into(), text: DEFAULT_SCENARIO.into(), dir: PathBuf::from(".") }
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read scenario {}: {e}", path.display())))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { name: path.display().to_string(), text, dir })
    }

    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    /// Position of the first header or key opening `name`, for tables that
    /// only exist implicitly through dotted headers.
    fn table_span(&self, name: &str) -> Range<usize> {
        let mut offset = 0;
        for line in self.text.split_inclusive('\n') {
            let t = line.trim_start();
            let key = t.trim_start_matches('[').trim_start();
            if key.starts_with(name) && key[name.len()..].starts_with(['.', ']', ' ', '=']) {
                return offset..offset;
            }
            offset += line.len();
        }
        0..0
    }

    fn invalid(&self, span: Range<usize>, field: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Validation(format!("{}:{}: field `{field}`: {msg}", self.name, self.line(span)))
    }

    pub fn parse(&self, seed_override: Option<u64>) -> Result<Scenario, CliError> {
        let raw: Raw = toml::from_str(&self.text).map_err(|e| {
            let at = e.span().map(|s| format!(":{}", self.line(s))).unwrap_or_default();
            CliError::Validation(format!("{}{at}: {}", self.name, e.message()))
        })?;
        let seed = seed_override.or(raw.seed).unwrap_or(0);

        let dspan = raw.domain.span();
        let rd = raw.domain.into_inner();
        let domain = DomainSpec::new(rd.lower, rd.upper, rd.dims).map_err(|e| self.invalid(dspan, "domain", e))?;

        let fspan = raw.fluid.span();
        let fluid = self.build_fluid(raw.fluid.get_ref(), domain).map_err(|e| self.invalid(fspan, "fluid", e))?;

        let pair = match raw.pair {
            None => Pair::Gauge(draw_gauge(GaugeSpec::default(), seed)),
            Some(p) => {
                let span = self.table_span("pair");
                match p {
                    PairSpec { gauge: Some(g), fluid: None } => {
                        let bump = draw_gauge(g, seed);
                        check_gauge(&bump, &domain).map_err(|e| self.invalid(span, "pair.gauge", e))?;
                        Pair::Gauge(bump)
                    }
                    PairSpec { gauge: None, fluid: Some(spec) } => Pair::Fluid(
                        self.build_fluid(&spec, domain).map_err(|e| self.invalid(span, "pair.fluid", e))?,
                    ),
                    _ => return Err(self.invalid(span, "pair", "needs exactly one of `gauge` or `fluid`")),
                }
            }
        };

        let fspan = raw.frequencies.span();
        let frequencies = raw.frequencies.into_inner();
        if !(2..=3).contains(&frequencies.len()) {
            return Err(self.invalid(fspan, "frequencies", "needs two or three entries"));
        }
        if frequencies.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(self.invalid(fspan, "frequencies", "entries must be positive"));
        }
        let h_ladder = self.ladder(raw.h_ladder, "h_ladder", 1.0)?;
        let lambda_ladder = self.ladder(raw.lambda_ladder, "lambda_ladder", 1.0)?;
        let xspan = raw.xi_max.span();
        let xi_max = raw.xi_max.into_inner();
        if !(xi_max.is_finite() && xi_max > 0.0) {
            return Err(self.invalid(xspan, "xi_max", "must be positive"));
        }
        let tau_factor = match raw.tau_factor {
            None => 0.5,
            Some(t) => {
                let span = t.span();
                let v = t.into_inner();
                if !(v.is_finite() && v > 0.0) {
                    return Err(self.invalid(span, "tau_factor", "must be positive"));
                }
                v
            }
        };
        Ok(Scenario {
            seed,
            mode: raw.mode.unwrap_or(Mode::Oracle),
            output: raw.output,
            domain,
            fluid,
            pair,
            frequencies,
            h_ladder,
            lambda_ladder,
            xi_max,
            tau_factor,
            sha256: hex(&Sha256::digest(self.text.as_bytes())),
        })
    }

    /// Entries in `(0, max)`, at least two, strictly decreasing.
    fn ladder(&self, raw: Spanned<Vec<f64>>, field: &str, max: f64) -> Result<Vec<f64>, CliError> {
        let span = raw.span();
        let v = raw.into_inner();
        if v.len() < 2 {
            return Err(self.invalid(span, field, "needs at least two entries"));
        }
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0 && *x < max)) {
            return Err(self.invalid(span, field, format!("entries must lie in (0, {max})")));
        }
        if v.windows(2).any(|w| w[1] >= w[0]) {
            return Err(self.invalid(span, field, format!("must be strictly decreasing, got {v:?}")));
        }
        Ok(v)
    }

    fn build_fluid(&self, spec: &PhantomSpec, domain: DomainSpec) -> Result<FluidParameters, String> {
        let phantom = match *spec {
            PhantomSpec::Constant { state } => Phantom::Constant(state.into()),
            PhantomSpec::GaussianBump { background, delta, center, width } => Phantom::GaussianBump {
                background: background.into(),
                delta: delta.into(),
                center,
                width,
            },
            PhantomSpec::TanhInterface { left, right, axis, position, width } => Phantom::TanhInterface {
                left: left.into(),
                right: right.into(),
                axis,
                position,
                width,
            },
            PhantomSpec::Files { ref c, ref rho, ref v, ref alpha0, ref zeta } => {
                return self.fluid_from_files([c, rho, v, alpha0, zeta], domain);
            }
        };
        phantom.build(domain).map_err(|e| e.to_string())
    }

    fn fluid_from_files(&self, paths: [&PathBuf; 5], domain: DomainSpec) -> Result<FluidParameters, String> {
        let mut fields = Vec::with_capacity(5);
        for p in paths {
            let full = self.dir.join(p);
            if !full.is_file() {
                return Err(format!("referenced file {} does not exist", full.display()));
            }
            let f = read_field(&full).map_err(|e| format!("{}: {e}", full.display()))?;
            if *f.domain() != domain {
                return Err(format!("{} is not on the scenario grid", full.display()));
            }
            fields.push(f);
        }
        let mut it = fields.into_iter();
        let mut next = || it.next().expect("five fields");
        let c = next().into_scalar().map_err(|e| e.to_string())?;
        let rho = next().into_scalar().map_err(|e| e.to_string())?;
        let v = next().into_vector().map_err(|e| e.to_string())?;
        let alpha0 = next().into_scalar().map_err(|e| e.to_string())?;
        let zeta = next().into_scalar().map_err(|e| e.to_string())?;
        FluidParameters::new(c, rho, v, alpha0, zeta).map_err(|e| e.to_string())
    }
}

fn draw_gauge(spec: GaugeSpec, seed: u64) -> Bump {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = [0, 1, 2].map(|_| rng.random_range(-0.05..0.05));
    let radius = rng.random_range(0.25..0.32);
    let amplitude = rng.random_range(0.5..1.0);
    Bump::new(spec.center.unwrap_or(center), spec.radius.unwrap_or(radius), spec.amplitude.unwrap_or(amplitude))
}

/// The bump must vanish on the boundary and on the first layer inside it,
/// so that the discrete normal derivative is zero as well.
fn check_gauge(b: &Bump, d: &DomainSpec) -> Result<(), String> {
    if !(b.radius > 0.0) {
        return Err("radius must be positive".into());
    }
    let reach = d.distance_to_boundary(b.center) - d.max_spacing();
    if reach <= b.radius {
        return Err(format!("bump of radius {} must stay {reach:.3} inside the boundary layer", b.radius));
    }
    Ok(())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
