//! Reconstruction from CGO pairings: the Fourier data of `A₂ − A₁` orthogonal
//! to each frequency, the two-form `d(A₂ − A₁)`, a gauge potential for a
//! curl-free difference and the closing relation for `q`.
//!
//! Pairings are evaluated from known coefficients (oracle mode). The phases
//! of the CGO amplitudes are removed with the same coefficients.

mod curl;
mod gauge;
mod pairing;
mod pipeline;

pub use curl::{
    phased_fourier, recover_curl, strip_phases, xi_grid, FourierSample, FourierSlice, PhaseOracle,
};
pub use gauge::{gauge_from_curlfree, q_identity_residual, GaugeRecovery, GAUGE_CURL_TOL};
pub use pairing::{
    extrapolate_to_zero, fourier_coefficient, h_ladder_for, pairing_from_cgo, pairing_ladder,
    q_pairing_from_cgo, q_pairing_ladder, MagneticCoefficients, PairingSample, QPairingSample,
};

pub use pipeline::{reconstruct_curl, CurlConfig, CurlReconstruction};

#[cfg(test)]
mod tests;
