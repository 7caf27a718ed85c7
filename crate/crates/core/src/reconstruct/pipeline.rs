use std::f64::consts::PI;

use rayon::prelude::*;

use super::curl::{recover_curl, strip_phases, xi_grid, FourierSlice, PhaseOracle};
use super::pairing::{h_ladder_for, pairing_ladder, MagneticCoefficients, PairingSample};
use crate::cgo::Frame;
use crate::domain::{ensure_same, TwoFormField};
use crate::error::{Error, Result};

/// Sampling of the curl reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct CurlConfig {
    /// `|ξ|∞` bound of the frequency lattice.
    pub xi_max: f64,
    /// Base `h` ladder, scaled per frequency by [`h_ladder_for`].
    pub h_ladder: Vec<f64>,
    /// `τ = tau_factor·h^{1/2}`.
    pub tau_factor: f64,
}

impl Default for CurlConfig {
    fn default() -> Self {
        Self {
            xi_max: 4.0 * PI,
            h_ladder: vec![0.4, 0.2, 0.1],
            tau_factor: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurlReconstruction {
    pub slice: FourierSlice,
    pub two_form: TwoFormField,
    pub pairings: Vec<PairingSample>,
}

/// The chain pairing → phase stripping → Fourier synthesis of `d(A₂ − A₁)`
/// for real potentials, over one representative of each pair `±ξ ≠ 0`.
pub fn reconstruct_curl(
    m1: &MagneticCoefficients,
    m2: &MagneticCoefficients,
    config: &CurlConfig,
) -> Result<CurlReconstruction> {
    ensure_same(m1.domain(), m2.domain())?;
    if !(config.xi_max > 0.0 && config.tau_factor > 0.0) {
        return Err(Error::Domain(format!(
            "xi_max and tau_factor must be positive, got {} and {}",
            config.xi_max, config.tau_factor
        )));
    }
    let d = *m1.domain();
    let grid: Vec<[f64; 3]> = xi_grid(&d, config.xi_max, true)
        .into_iter()
        .filter(|xi| xi.iter().any(|x| *x != 0.0))
        .collect();
    let per_xi: Vec<(super::curl::FourierSample, Vec<PairingSample>)> = grid
        .par_iter()
        .map(|&xi| {
            let hs = h_ladder_for(&config.h_ladder, xi)?;
            let mut samples = Vec::with_capacity(2 * hs.len());
            for frame in Frame::pair_for(xi) {
                samples.extend(pairing_ladder(m1, m2, xi, frame, &hs, config.tau_factor)?);
            }
            let sample = strip_phases(&samples, PhaseOracle::Known(m1, m2))?;
            Ok((sample, samples))
        })
        .collect::<Result<_>>()?;
    let mut pairings = Vec::new();
    let mut samples = Vec::with_capacity(per_xi.len());
    for (s, p) in per_xi {
        samples.push(s);
        pairings.extend(p);
    }
    let slice = FourierSlice::for_domain(&d, samples)?;
    let two_form = recover_curl(&slice, &d, true)?;
    Ok(CurlReconstruction {
        slice,
        two_form,
        pairings,
    })
}
