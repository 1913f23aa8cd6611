//! Statistical model of the turbulent free-space channel.
//!
//! Weak-to-moderate turbulence makes the transmittance coefficient `eta` of
//! an optical link fluctuate with a lognormal probability density
//!
//! ```text
//! p(eta) = 1 / (sqrt(2 pi) sigma eta)
//!        * exp( -(ln(eta/eta0) + sigma^2/2)^2 / (2 sigma^2) )
//! ```
//!
//! where `eta0` is the mean transmittance and `sigma^2` the log-irradiance
//! variance. The `- sigma^2 / 2` shift pins the analytic mean of the density
//! to `eta0` exactly. For a plane wave over a horizontal path the variance
//! follows from the refractive-index structure constant via
//! `sigma^2 = 1.23 Cn^2 k^(7/6) L^(11/6)`.
//!
//! Physical transmittances live in (0, 1]; the density is normalized on
//! (0, inf). All integrals here run on [eta_th, 1] without renormalization,
//! matching the rate integrals they feed, and the sampler rejects draws
//! above 1. For the channels this crate ships presets for, the mass above
//! eta = 1 is below 1e-6, so the discrepancy is negligible.
//!
//! Integrals are evaluated by adaptive Gauss-Kronrod quadrature in the
//! variable u = ln(eta), where the integrand is a plain Gaussian
//! (absolute tolerance 1e-12, relative 1e-9). The density is sharply peaked
//! near small eta at large sigma, so quadrature directly in eta would need
//! far more subdivision.

use crate::error::{Error, Result};
use crate::numerics;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Quadrature tolerances used throughout this module.
const ABS_TOL: f64 = 1e-12;
const REL_TOL: f64 = 1e-9;

/// Half-width of the integration window in units of sigma; the Gaussian mass
/// outside +/- 14 sigma is below 1e-43.
const TAIL_SIGMAS: f64 = 14.0;

/// Lognormal turbulence statistics of the link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Mean transmittance, in (0, 1].
    pub eta0: f64,
    /// Log-irradiance standard deviation, > 0.
    pub sigma: f64,
}

impl ChannelParams {
    pub fn new(eta0: f64, sigma: f64) -> Result<Self> {
        if !(eta0 > 0.0 && eta0 <= 1.0) {
            return Err(Error::domain(format!("eta0 = {eta0} outside (0, 1]")));
        }
        if !(sigma > 0.0) {
            return Err(Error::domain(format!("sigma = {sigma} must be positive")));
        }
        Ok(Self { eta0, sigma })
    }

    /// Mean channel loss in dB -> mean transmittance `eta0 = 10^(-dB/10)`.
    pub fn from_loss_db(loss_db: f64, sigma: f64) -> Result<Self> {
        Self::new(10f64.powf(-loss_db / 10.0), sigma)
    }

    /// Mean of ln(eta): `ln(eta0) - sigma^2 / 2`.
    pub(crate) fn log_mean(&self) -> f64 {
        self.eta0.ln() - self.sigma * self.sigma / 2.0
    }

    /// Gaussian density of u = ln(eta).
    pub(crate) fn log_density(&self, u: f64) -> f64 {
        let z = (u - self.log_mean()) / self.sigma;
        (-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * self.sigma)
    }
}

/// Fixed geometry of a horizontal turbulent path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurbulencePath {
    /// Refractive-index structure constant Cn^2, m^(-2/3).
    pub cn2: f64,
    /// Optical wavelength, m.
    pub wavelength: f64,
    /// Path length, m.
    pub length: f64,
}

impl TurbulencePath {
    pub fn new(cn2: f64, wavelength: f64, length: f64) -> Result<Self> {
        for (name, v) in [("cn2", cn2), ("wavelength", wavelength), ("length", length)] {
            if !(v > 0.0) {
                return Err(Error::domain(format!("{name} = {v} must be positive")));
            }
        }
        Ok(Self {
            cn2,
            wavelength,
            length,
        })
    }
}

/// Integrate `f` over [lo, hi] in u = ln(eta) coordinates, forcing panel
/// boundaries onto the Gaussian bulk so a density far narrower than the
/// interval cannot slip between quadrature nodes.
pub(crate) fn integrate_log_interval<F: Fn(f64) -> f64>(
    p: &ChannelParams,
    lo: f64,
    hi: f64,
    f: F,
) -> f64 {
    if lo >= hi {
        return 0.0;
    }
    let m = p.log_mean();
    let s = p.sigma;
    let mut knots = vec![lo];
    for offset in [-10.0, -4.0, -1.5, 0.0, 1.5, 4.0, 10.0] {
        let u = m + offset * s;
        if u > lo && u < hi {
            knots.push(u);
        }
    }
    knots.push(hi);
    let share = ABS_TOL / (knots.len() - 1) as f64;
    knots
        .windows(2)
        .map(|w| numerics::integrate(&f, w[0], w[1], share, REL_TOL))
        .sum()
}

/// Lognormal transmittance density at `eta` (units 1/transmittance).
pub fn pdtc_density(eta: f64, p: &ChannelParams) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::domain(format!("eta = {eta} must be positive")));
    }
    let z = ((eta / p.eta0).ln() + p.sigma * p.sigma / 2.0) / p.sigma;
    Ok((-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * p.sigma * eta))
}

/// Probability mass of the density on [eta_th, 1]: the fraction of pulses a
/// threshold at `eta_th` keeps.
pub fn survival_fraction(eta_th: f64, p: &ChannelParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_th) {
        return Err(Error::domain(format!("eta_th = {eta_th} outside [0, 1]")));
    }
    if eta_th == 1.0 {
        return Ok(0.0);
    }
    let lo = lower_limit(eta_th, p);
    if lo >= 0.0 {
        return Ok(0.0);
    }
    Ok(integrate_log_interval(p, lo, 0.0, |u| p.log_density(u)))
}

/// Mean transmittance of the kept fraction: `<eta>` on [eta_th, 1].
pub fn truncated_mean(eta_th: f64, p: &ChannelParams) -> Result<f64> {
    if !(0.0..=1.0).contains(&eta_th) {
        return Err(Error::domain(format!("eta_th = {eta_th} outside [0, 1]")));
    }
    let surv = survival_fraction(eta_th, p)?;
    if surv <= 1e-300 {
        return Err(Error::EmptySelection);
    }
    let lo = lower_limit(eta_th, p);
    let first = integrate_log_interval(p, lo, 0.0, |u| u.exp() * p.log_density(u));
    // quadrature noise can push the ratio a hair outside [eta_th, 1]
    Ok((first / surv).clamp(eta_th, 1.0))
}

/// Lower integration limit in u = ln(eta); clamped to the -14 sigma tail.
fn lower_limit(eta_th: f64, p: &ChannelParams) -> f64 {
    let tail = p.log_mean() - TAIL_SIGMAS * p.sigma;
    if eta_th <= 0.0 {
        tail.min(0.0)
    } else {
        eta_th.ln().max(tail).min(0.0)
    }
}

/// Draw one transmittance from the density conditioned on eta <= 1, by
/// exponentiating a Gaussian draw of ln(eta) and rejecting values above 1.
pub fn sample_transmittance<R: Rng + ?Sized>(p: &ChannelParams, rng: &mut R) -> f64 {
    let m = p.log_mean();
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let eta = (m + p.sigma * z).exp();
        if eta <= 1.0 {
            return eta;
        }
    }
}

/// Plane-wave log-irradiance standard deviation for a path:
/// `sigma = sqrt(1.23 Cn^2 k^(7/6) L^(11/6))` with `k = 2 pi / wavelength`.
pub fn sigma_from_path(path: &TurbulencePath) -> f64 {
    let k = 2.0 * PI / path.wavelength;
    (1.23 * path.cn2 * k.powf(7.0 / 6.0) * path.length.powf(11.0 / 6.0)).sqrt()
}
