//! Infinite-key (asymptotic) rate diagnostics.
//!
//! The asymptotic secure key rate per sent pulse, as a function of the
//! channel transmittance alone, with sender and receiver parameters fixed:
//!
//! ```text
//! R(eta) = q_x q_bob * max(0, Q_1 [1 - h(e_1)] - f_EC * sum_k P_k D_k h(E))
//! ```
//!
//! a GLLP-with-decoy form where `Q_1 = tau_1 Y_1` is the single-photon gain
//! with `Y_1`, `e_1` the exact single-photon yield and error of the
//! click/error model, and the error-correction cost covers the full decoy
//! mixture at the aggregate observed error rate `E`: the same EC
//! accounting the finite-size formula charges. Everything below the root of
//! `R` is dead channel: the critical transmittance `eta_CR` marks where a
//! key first becomes distillable, and it depends only on receiver and
//! sender parameters, never on the channel statistics.
//!
//! The rate-wise bound convolves `R` with the transmittance density; since
//! `R` clamps at zero below `eta_CR`, integrating over [0, 1] and over
//! [eta_CR, 1] agree by construction. Above `eta_CR` the rate is close to a
//! straight line, which is what makes a prefixed threshold at `eta_CR`
//! nearly optimal; `linear_fit` quantifies that.

use crate::channel::{self, ChannelParams};
use crate::detection::{
    background_probability, click_probability, error_probability, Basis, ProtocolState,
    ReceiverModel,
};
use crate::error::{Error, Result};
use crate::finitekey::{binary_entropy, tau};
use crate::numerics;

/// Least-squares line through a rate curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRateFit {
    /// Rate per unit transmittance.
    pub alpha: f64,
    /// Rate intercept.
    pub beta: f64,
    /// Largest fit deviation on the fitted interval, relative to the
    /// curve's maximum rate there.
    pub max_residual: f64,
}

/// A sampled rate curve: (eta, rate) pairs with eta strictly ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct RateCurve {
    points: Vec<(f64, f64)>,
}

impl RateCurve {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        for w in points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::domain("rate curve abscissae must strictly increase"));
            }
        }
        if let Some(p) = points
            .iter()
            .find(|p| p.1 < 0.0 || !(0.0..=1.0).contains(&p.0) || p.0 == 0.0)
        {
            return Err(Error::domain(format!(
                "rate curve point {p:?} out of range"
            )));
        }
        Ok(Self { points })
    }

    /// Sample the asymptotic rate on a uniform grid of `n` points over
    /// [eta_min, eta_max].
    pub fn sample(
        state: &ProtocolState,
        rx: &ReceiverModel,
        f_ec: f64,
        eta_min: f64,
        eta_max: f64,
        n: usize,
    ) -> Result<Self> {
        if n < 2 || !(eta_min > 0.0 && eta_max <= 1.0 && eta_min < eta_max) {
            return Err(Error::domain("invalid rate curve grid"));
        }
        let step = (eta_max - eta_min) / (n - 1) as f64;
        let points = (0..n)
            .map(|i| {
                let eta = (eta_min + i as f64 * step).min(eta_max);
                (eta, gllp_rate(eta, state, rx, f_ec))
            })
            .collect();
        Self::new(points)
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }
}

/// Detection and error probability of one decoy intensity, averaged over
/// the two polarizations of the key basis.
fn mixture_response(mu: f64, eta: f64, rx: &ReceiverModel) -> (f64, f64) {
    let (mut det, mut err) = (0.0, 0.0);
    for pol in Basis::X.detectors() {
        let c = click_probability(mu, eta, rx, pol);
        let e = error_probability(mu, eta, rx, pol);
        det += c + e;
        err += e;
    }
    (det / 2.0, err / 2.0)
}

/// Exact single-photon yield and error probability of the click/error
/// model: an n = 1 Fock input clicks the aligned detector with
/// `1 - (1 - p_bg)(1 - eta_sys)` and the orthogonal one with
/// `1 - (1 - p_bg_perp)(1 - e_mis eta_sys)`.
fn single_photon_response(eta: f64, rx: &ReceiverModel) -> (f64, f64) {
    let eta_sys = rx.eta_sys(eta);
    let (mut yield_1, mut err_1) = (0.0, 0.0);
    for pol in Basis::X.detectors() {
        let p_bg = background_probability(rx.noise_of(pol), eta);
        let p_bg_perp = background_probability(rx.noise_of(pol.orthogonal()), eta);
        let click = 1.0 - (1.0 - p_bg) * (1.0 - eta_sys);
        let err = 1.0 - (1.0 - p_bg_perp) * (1.0 - rx.e_mis * eta_sys);
        yield_1 += click + err;
        err_1 += err;
    }
    (yield_1 / 2.0, err_1 / 2.0)
}

/// Asymptotic secure key rate (bits per sent pulse) at transmittance `eta`,
/// clamped at zero.
pub fn gllp_rate(eta: f64, state: &ProtocolState, rx: &ReceiverModel, f_ec: f64) -> f64 {
    let (mut gain, mut errors) = (0.0, 0.0);
    for k in 0..3 {
        let (d, m) = mixture_response(state.mu[k], eta, rx);
        gain += state.p_mu[k] * d;
        errors += state.p_mu[k] * m;
    }
    if gain <= 0.0 {
        return 0.0;
    }
    let e_obs = (errors / gain).min(0.5);

    let (y1, e1y) = single_photon_response(eta, rx);
    if y1 <= 0.0 {
        return 0.0;
    }
    let e1 = (e1y / y1).min(0.5);
    let q1 = tau(1, state) * y1;

    let sift = state.basis_prob(Basis::X) * rx.basis_prob(Basis::X);
    let h = |x: f64| binary_entropy(x).expect("entropy argument clamped to [0, 1/2]");
    (sift * (q1 * (1.0 - h(e1)) - f_ec * gain * h(e_obs))).max(0.0)
}

/// The transmittance where the asymptotic rate turns positive, bracketed by
/// a geometric scan and bisected to 1e-6 absolute. Depends only on sender
/// and receiver parameters.
pub fn critical_transmittance(state: &ProtocolState, rx: &ReceiverModel, f_ec: f64) -> Result<f64> {
    if gllp_rate(1.0, state, rx, f_ec) <= 0.0 {
        return Err(Error::NoKey);
    }
    // geometric scan upward from 1e-5 for the first positive rate
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut eta = 1e-5;
    while eta < 1.0 {
        if gllp_rate(eta, state, rx, f_ec) > 0.0 {
            hi = eta;
            break;
        }
        lo = eta;
        eta *= 2.0;
    }
    Ok(numerics::bisect_predicate(
        |x| gllp_rate(x, state, rx, f_ec) > 0.0,
        lo,
        hi,
        1e-6,
    ))
}

/// Rate-wise upper bound: the transmittance-density average of the
/// asymptotic rate, `integral R(eta) p(eta) d eta` over (0, 1].
pub fn rate_wise_bound(
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    f_ec: f64,
) -> f64 {
    // R clamps to zero below the critical transmittance, so the integrand
    // only lives on [eta_CR, 1]; start a little below it to be safe against
    // the root tolerance.
    let start = match critical_transmittance(state, rx, f_ec) {
        Ok(cr) => (0.5 * cr).max(1e-12),
        Err(_) => return 0.0,
    };
    let lo = start.ln().max(channel.log_mean() - 14.0 * channel.sigma);
    channel::integrate_log_interval(channel, lo.min(0.0), 0.0, |u| {
        gllp_rate(u.exp(), state, rx, f_ec) * channel.log_density(u)
    })
}

/// Least-squares line through the curve points with eta >= eta_min.
pub fn linear_fit(curve: &RateCurve, eta_min: f64) -> Result<LinearRateFit> {
    let pts: Vec<(f64, f64)> = curve
        .points()
        .iter()
        .copied()
        .filter(|p| p.0 >= eta_min)
        .collect();
    if pts.len() < 3 {
        return Err(Error::domain(format!(
            "linear fit needs >= 3 points above {eta_min}, have {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return Err(Error::domain("degenerate abscissae in linear fit"));
    }
    let alpha = (n * sxy - sx * sy) / denom;
    let beta = (sy - alpha * sx) / n;

    let scale = pts.iter().map(|p| p.1).fold(0.0f64, f64::max);
    let max_residual = if scale > 0.0 {
        pts.iter()
            .map(|&(x, y)| (alpha * x + beta - y).abs() / scale)
            .fold(0.0f64, f64::max)
    } else {
        0.0
    };
    Ok(LinearRateFit {
        alpha,
        beta,
        max_residual,
    })
}
