use cgolab::boundary::{calibrate, recover_trace, BoundaryProber, DtnProber, EtaProfile, Face, ProbeData};
use cgolab::cgo::{build_cgo, CgoContext, Frame};
use cgolab::domain::{curl, divergence, gradient, BoundaryFunction, ScalarField};
use cgolab::fluid::{apply_gauge, apply_gauge_with, coefficients_from_fluid, FrequencyPerturbation, GaugePotential};
use cgolab::forward::{apply_operator, assemble_dtn, screen_assumption_a, AssumptionCheck, OperatorCoefficients};
use cgolab::multifreq::{compare, default_reference, extract_exact, extract_gauge_robust, split_by_frequency, FrequencySet, RecoveredFluid};
use cgolab::reconstruct::{gauge_from_curlfree, h_ladder_for, q_identity_residual, reconstruct_curl, CurlConfig, MagneticCoefficients};
use cgolab::verify::{run_suite, SuiteConfig};
use num_complex::Complex64;
use serde::Serialize;

use crate::output::RunDir;
use crate::scenario::{Mode, Pair, Scenario};
use crate::CliError;

type Outcome = Result<(), CliError>;

fn coefficients(s: &Scenario, omega: f64) -> Result<FrequencyPerturbation, CliError> {
    Ok(coefficients_from_fluid(&s.fluid, omega)?)
}

fn gauge_of(s: &Scenario, scale: f64) -> Result<Option<GaugePotential>, CliError> {
    match &s.pair {
        Pair::Gauge(b) => {
            let phi = ScalarField::from_real_fn(s.domain, |p| scale * b.value(p));
            Ok(Some(GaugePotential::boundary_flat(phi)?))
        }
        Pair::Fluid(_) => Ok(None),
    }
}

/// Both members of the pair at one frequency, first the scenario fluid.
fn pair_at(s: &Scenario, omega: f64) -> Result<[MagneticCoefficients; 2], CliError> {
    let first = coefficients(s, omega)?;
    let second = match (&s.pair, gauge_of(s, 1.0)?) {
        (_, Some(phi)) => {
            let (a, q) = apply_gauge(&first.a, &first.q, &phi)?;
            MagneticCoefficients::new(a, q)?
        }
        (Pair::Fluid(f), None) => {
            let c = coefficients_from_fluid(f, omega)?;
            MagneticCoefficients::new(c.a, c.q)?
        }
        (Pair::Gauge(_), None) => unreachable!("gauge pairs always build a potential"),
    };
    Ok([MagneticCoefficients::new(first.a, first.q)?, second])
}

#[derive(Serialize)]
struct ForwardRow {
    omega: f64,
    sigma_min: f64,
    norm_bound: f64,
    assumption_ok: bool,
    interior_residual: f64,
}

/// Coefficients and a plane-wave Dirichlet solution at every frequency.
pub fn forward(s: &Scenario, run: &mut RunDir) -> Outcome {
    let mut rows = Vec::new();
    for (i, &omega) in s.frequencies.iter().enumerate() {
        let fp = coefficients(s, omega)?;
        let coeffs = OperatorCoefficients::magnetic(&fp.a, &fp.q)?;
        let check = screen_assumption_a(&coeffs);
        if !check.is_ok() {
            return Err(cgolab::Error::AssumptionA(format!("at omega {omega}: {check:?}")).into());
        }
        let (sigma_min, norm_bound) = match check {
            AssumptionCheck::Ok { sigma_min, norm_bound } | AssumptionCheck::Suspect { sigma_min, norm_bound } => {
                (sigma_min, norm_bound)
            }
        };
        let f = BoundaryFunction::from_fn(s.domain, |p| Complex64::new(0.0, omega * p[0]).exp());
        let u = cgolab::forward::solve_dirichlet(&coeffs, &f)?;
        let r = apply_operator(&coeffs, &u)?;
        let interior = s.domain.interior_nodes();
        let num = interior.iter().map(|&n| r.values()[n].norm()).fold(0.0, f64::max);
        let residual = num / u.max_abs().max(f64::MIN_POSITIVE);
        run.field(&format!("a_{i}.cgof"), fp.a)?;
        run.field(&format!("q_{i}.cgof"), fp.q)?;
        run.field(&format!("u_{i}.cgof"), u)?;
        run.residual(format!("interior_residual_{i}"), residual);
        run.residual(format!("sigma_min_{i}"), sigma_min);
        rows.push(ForwardRow { omega, sigma_min, norm_bound, assumption_ok: true, interior_residual: residual });
    }
    run.csv("forward.csv", &rows)
}

#[derive(Serialize)]
struct DtnReport {
    omega: f64,
    boundary_nodes: usize,
    frobenius_first: f64,
    frobenius_second: f64,
    relative_distance: f64,
    asymmetry_first: f64,
    asymmetry_second: f64,
    gauge_pair: bool,
}

/// DtN maps of both members of the pair at the first frequency.
pub fn dtn(s: &Scenario, run: &mut RunDir) -> Outcome {
    let omega = s.frequencies[0];
    let [m1, m2] = pair_at(s, omega)?;
    let l1 = assemble_dtn(&OperatorCoefficients::magnetic(&m1.a, &m1.q)?, omega)?;
    let l2 = assemble_dtn(&OperatorCoefficients::magnetic(&m2.a, &m2.q)?, omega)?;
    let distance = l1.relative_distance(&l2)?;
    run.dtn("dtn_1.cgof", &l1)?;
    run.dtn("dtn_2.cgof", &l2)?;
    let report = DtnReport {
        omega,
        boundary_nodes: l1.size(),
        frobenius_first: l1.frobenius_norm(),
        frobenius_second: l2.frobenius_norm(),
        relative_distance: distance,
        asymmetry_first: l1.relative_asymmetry(),
        asymmetry_second: l2.relative_asymmetry(),
        gauge_pair: matches!(s.pair, Pair::Gauge(_)),
    };
    run.json("distance.json", &report)?;
    run.residual("relative_distance", distance);
    Ok(())
}

#[derive(Serialize)]
struct CgoRow {
    h: f64,
    tau: f64,
    transport_residual: f64,
    pde_residual: f64,
    r_h1scl: f64,
}

/// CGO diagnostics along the h ladder at `ξ = (0, 0, xi_max/2)`.
pub fn cgo_diagnose(s: &Scenario, run: &mut RunDir) -> Outcome {
    let fp = coefficients(s, s.frequencies[0])?;
    let coeffs = OperatorCoefficients::magnetic(&fp.a, &fp.q)?;
    let xi = [0.0, 0.0, 0.5 * s.xi_max];
    let frame = Frame::pair_for(xi)[0];
    let mut rows = Vec::new();
    let mut last = None;
    for h in h_ladder_for(&s.h_ladder, xi)? {
        let ctx = CgoContext::first(h, xi, frame)?.with_tau(s.tau_factor * h.sqrt())?;
        let sol = build_cgo(&coeffs, &ctx)?;
        let [h, tau, transport_residual, pde_residual, r_h1scl] = sol.diagnostics.csv_record();
        rows.push(CgoRow { h, tau, transport_residual, pde_residual, r_h1scl });
        last = Some(sol);
    }
    let sol = last.expect("ladders have at least two entries");
    let worst = rows.iter().map(|r| r.pde_residual).fold(0.0, f64::max);
    run.csv("cgo.csv", &rows)?;
    run.field("amplitude.cgof", sol.amplitude)?;
    run.field("remainder.cgof", sol.remainder)?;
    run.residual("max_pde_residual", worst);
    run.residual("final_r_h1scl", rows.last().map_or(f64::NAN, |r| r.r_h1scl));
    Ok(())
}

#[derive(Serialize)]
struct PairingRow {
    xi0: f64,
    xi1: f64,
    xi2: f64,
    frame_mu2_0: f64,
    frame_mu2_1: f64,
    frame_mu2_2: f64,
    h: f64,
    tau: f64,
    re: f64,
    im: f64,
}

/// Curl of the potential difference from CGO pairings, then the gauge and
/// q identity when the pair is a gauge pair.
pub fn reconstruct(s: &Scenario, run: &mut RunDir) -> Outcome {
    if s.mode == Mode::Dtn {
        return Err(CliError::Validation(
            "reconstruct runs in oracle mode only; set mode = \"oracle\"".into(),
        ));
    }
    let [m1, m2] = pair_at(s, s.frequencies[0])?;
    let config = CurlConfig { xi_max: s.xi_max, h_ladder: s.h_ladder.clone(), tau_factor: s.tau_factor };
    let rec = reconstruct_curl(&m1, &m2, &config)?;
    let diff = m2.a.sub(&m1.a)?;
    let truth = curl(&diff.re());
    let err = rec.two_form.sub(&truth)?.l2_norm();
    let rel = err / truth.l2_norm().max(diff.re().l2_norm()).max(f64::MIN_POSITIVE);
    let rows: Vec<PairingRow> = rec
        .pairings
        .iter()
        .map(|p| PairingRow {
            xi0: p.xi[0],
            xi1: p.xi[1],
            xi2: p.xi[2],
            frame_mu2_0: p.frame.mu2[0],
            frame_mu2_1: p.frame.mu2[1],
            frame_mu2_2: p.frame.mu2[2],
            h: p.h,
            tau: p.tau,
            re: p.value.re,
            im: p.value.im,
        })
        .collect();
    run.csv("pairings.csv", &rows)?;
    run.field("two_form.cgof", rec.two_form)?;
    run.field("two_form_fd.cgof", truth)?;
    run.residual("curl_relative_error", rel);
    if matches!(s.pair, Pair::Gauge(_)) {
        let report = match gauge_from_curlfree(&diff) {
            Ok(gauge) => {
                let q_res = q_identity_residual(&m2.q, &m1.a, &m1.q, gauge.gauge.phi())?;
                run.field("phi.cgof", gauge.gauge.phi().clone())?;
                run.residual("gauge_fit_residual", gauge.fit_residual);
                run.residual("q_identity_residual", q_res);
                GaugeReport { equivalent: true, fit_residual: Some(gauge.fit_residual), q_identity_residual: Some(q_res), reason: None }
            }
            // Coarse grids cannot certify compact gauges; report rather than abort.
            Err(e @ cgolab::Error::NotGaugeEquivalent(_)) => {
                GaugeReport { equivalent: false, fit_residual: None, q_identity_residual: None, reason: Some(e.to_string()) }
            }
            Err(e) => return Err(e.into()),
        };
        run.json("gauge.json", &report)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct GaugeReport {
    equivalent: bool,
    fit_residual: Option<f64>,
    q_identity_residual: Option<f64>,
    reason: Option<String>,
}

#[derive(Serialize)]
struct ProbeRow {
    face: &'static str,
    tangent0: f64,
    tangent1: f64,
    lambda: f64,
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct TraceRow {
    face: &'static str,
    component: usize,
    recovered_re: f64,
    recovered_im: f64,
    truth_re: f64,
    truth_im: f64,
    /// Relative to the Euclidean norm of the true trace.
    relative_error: f64,
}

/// Trace of `A` at the centres of the two faces normal to z.
pub fn boundary(s: &Scenario, run: &mut RunDir) -> Outcome {
    let d = s.domain;
    let omega = s.frequencies[0];
    let fp = coefficients(s, omega)?;
    let m = MagneticCoefficients::new(fp.a.clone(), fp.q.clone())?;
    let eta = EtaProfile::default();
    let (lo, hi) = (d.lower(), d.upper());
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let faces = [
        ("bottom", Face::bottom(), [mid[0], mid[1], lo[2]]),
        ("top", Face::new(2, true)?, [mid[0], mid[1], hi[2]]),
    ];
    let maps = match s.mode {
        Mode::Oracle => None,
        Mode::Dtn => Some((
            assemble_dtn(&OperatorCoefficients::magnetic(&fp.a, &fp.q)?, omega)?,
            assemble_dtn(&OperatorCoefficients::zeros(d), omega)?,
        )),
    };
    let prober = BoundaryProber::new(&m)?;
    let dtn_prober = match &maps {
        Some((map, free)) => Some(DtnProber::new(map, free)?),
        None => None,
    };
    let data = match &dtn_prober {
        Some(p) => ProbeData::Dtn(p),
        None => ProbeData::Coefficients(&prober),
    };
    let mut probes = Vec::new();
    let mut traces = Vec::new();
    for (name, face, x0) in faces {
        let cal = calibrate(&d, face, x0, eta, &s.lambda_ladder)?;
        let rec = recover_trace(&data, face, x0, eta, &cal)?;
        for p in &rec.samples {
            let t = p.spec.tangent();
            probes.push(ProbeRow {
                face: name,
                tangent0: t[0],
                tangent1: t[1],
                lambda: p.spec.lambda(),
                re: p.value.re,
                im: p.value.im,
            });
        }
        let node = nearest_node(&d, x0);
        let truth = fp.a.at(node);
        let scale = truth.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for k in 0..3 {
            let e = (rec.trace[k] - truth[k]).norm() / scale;
            worst = worst.max(e);
            traces.push(TraceRow {
                face: name,
                component: k,
                recovered_re: rec.trace[k].re,
                recovered_im: rec.trace[k].im,
                truth_re: truth[k].re,
                truth_im: truth[k].im,
                relative_error: e,
            });
        }
        run.residual(format!("trace_error_{name}"), worst);
    }
    run.csv("probes.csv", &probes)?;
    run.csv("traces.csv", &traces)
}

fn nearest_node(d: &cgolab::domain::DomainSpec, p: [f64; 3]) -> usize {
    let (lo, h, dims) = (d.lower(), d.spacing(), d.dims());
    let ijk: [usize; 3] = std::array::from_fn(|k| (((p[k] - lo[k]) / h[k]).round().max(0.0) as usize).min(dims[k] - 1));
    d.index(ijk[0], ijk[1], ijk[2])
}

#[derive(Serialize)]
struct CompareRow {
    fluid: &'static str,
    mode: &'static str,
    field: String,
    relative_l2: f64,
}

/// Multi-frequency extraction. With a gauge pair the second data set is the
/// scenario fluid under the gauge `ω·φ`, recovered by the gauge-robust path.
pub fn fluids(s: &Scenario, run: &mut RunDir) -> Outcome {
    let first = FrequencySet::from_fluid(&s.fluid, &s.frequencies)?;
    let reference = default_reference(&s.domain);
    let exact = extract_exact(&first, reference)?;
    let mut rows = Vec::new();
    for e in compare(&exact, &s.fluid)? {
        rows.push(CompareRow { fluid: "first", mode: "exact", field: e.name, relative_l2: e.relative_l2 });
    }
    write_recovered(run, "first", &exact)?;
    match &s.pair {
        Pair::Gauge(_) => {
            let base = gauge_of(s, 1.0)?.expect("gauge pair").phi().clone();
            let entries = first
                .entries()
                .iter()
                .map(|e| {
                    let g = gradient(&base.scale(Complex64::new(e.omega, 0.0)));
                    let (a, q) = apply_gauge_with(&e.a, &e.q, &g, &divergence(&g))?;
                    Ok(FrequencyPerturbation { omega: e.omega, a, q })
                })
                .collect::<cgolab::Result<Vec<_>>>()?;
            let robust = extract_gauge_robust(&FrequencySet::new(entries)?, Some(s.fluid.zeta()), reference)?;
            if let Some(cert) = &robust.diagnostics.velocity {
                run.residual("gauge_closure", cert.closure.relative());
            }
            if let Some(c) = &robust.diagnostics.density {
                run.residual("density_constancy", c.relative());
            }
            for e in compare(&robust, &s.fluid)? {
                rows.push(CompareRow { fluid: "first", mode: "gauge-robust", field: e.name, relative_l2: e.relative_l2 });
            }
            write_recovered(run, "gauged", &robust)?;
        }
        Pair::Fluid(f) => {
            let second = FrequencySet::from_fluid(f, &s.frequencies)?;
            let split = split_by_frequency(&first, &second)?;
            run.residual("split_misfit", split.misfit.max_abs());
            let rec = extract_exact(&second, reference)?;
            for e in compare(&rec, f)? {
                rows.push(CompareRow { fluid: "second", mode: "exact", field: e.name, relative_l2: e.relative_l2 });
            }
            write_recovered(run, "second", &rec)?;
        }
    }
    for r in &rows {
        run.residual(format!("{}_{}_{}", r.fluid, r.mode, r.field), r.relative_l2);
    }
    run.csv("comparison.csv", &rows)
}

fn write_recovered(run: &mut RunDir, tag: &str, rec: &RecoveredFluid) -> Outcome {
    run.field(&format!("{tag}_c.cgof"), rec.c.clone())?;
    run.field(&format!("{tag}_v.cgof"), rec.v.clone())?;
    run.field(&format!("{tag}_rho_normalized.cgof"), rec.rho_normalized.clone())?;
    for (i, (_, a)) in rec.alpha.iter().enumerate() {
        run.field(&format!("{tag}_alpha_{i}.cgof"), a.clone())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct CheckRow<'a> {
    name: &'a str,
    value: Option<f64>,
    threshold: f64,
    pass: bool,
}

/// Returns whether every check passed.
pub fn verify(seed: u64, run: &mut RunDir) -> Result<bool, CliError> {
    let results = run_suite(&SuiteConfig { seed });
    let mut rows = Vec::with_capacity(results.len());
    for r in &results {
        let status = if r.pass { "pass" } else { "FAIL" };
        match &r.error {
            Some(e) => println!("{status}  {:<34} error: {e}", r.name),
            None => println!("{status}  {:<34} {:.3e} (threshold {:.1e})", r.name, r.value, r.threshold),
        }
        run.residual(r.name, r.value);
        rows.push(CheckRow { name: r.name, value: r.value.is_finite().then_some(r.value), threshold: r.threshold, pass: r.pass });
    }
    run.csv("verify.csv", &rows)?;
    Ok(results.iter().all(|r| r.pass))
}
