//! Finite-size secure key length for the three-intensity decoy protocol.
//!
//! The distilled key length follows the two-decoy finite-key analysis of
//! Lim, Curty, Walenta, Xu and Zbinden, PRA 89, 022307 (2014):
//!
//! ```text
//! ell = floor( s_X0 + s_X1 (1 - h(phi_X))
//!              - n_X f_EC h(e_obs)
//!              - 6 log2(21/eps_sec) - log2(2/eps_cor) )
//! ```
//!
//! `s_X0` and `s_X1` lower-bound the detections caused by zero- and
//! single-photon pulses in the key basis, `phi_X` upper-bounds the phase
//! error rate from the diagonal-basis statistics, and `e_obs = m_X / n_X`
//! is the observed error rate. The finite-sample deviations enter through
//!
//! ```text
//! n_k^+- = e^(mu_k)/P_k * ( n_k +- sqrt(n/2 ln(21/eps_sec)) )
//! ```
//!
//! with the basis total `n` (and likewise `m` for error counts). The
//! statistical-fluctuation correction on the phase error is the closed form
//! from the same analysis,
//!
//! ```text
//! gamma(a, b, c, d) = sqrt( (c+d)(1-b)b / (c d ln2)
//!                           * log2( (c+d) / (c d (1-b) b) * (21/a)^2 ) )
//! ```
//!
//! gated behind [`gamma_uncertainty`] so an alternative bound can be swapped
//! in at a single point.
//!
//! Conventions: every lower bound clamps at zero, `phi_X` caps at 1/2, and
//! `ell` clamps at zero: negative counts and entropies past 1/2 are
//! statistical artifacts of small samples. Counts are real-valued so the
//! expected-count pipeline and integer Monte Carlo tallies share the code
//! path; flooring happens only at `ell`.

use crate::detection::{Basis, ProtocolState, SiftedCounts};
use crate::error::{Error, Result};

/// Security and session parameters of the key distillation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityParams {
    /// Secrecy parameter.
    pub eps_sec: f64,
    /// Correctness parameter.
    pub eps_cor: f64,
    /// Error-correction inefficiency factor (>= 1).
    pub f_ec: f64,
    /// Number of pulses sent in the session.
    pub n_total: f64,
}

impl SecurityParams {
    pub fn new(eps_sec: f64, eps_cor: f64, f_ec: f64, n_total: f64) -> Result<Self> {
        if !(eps_sec > 0.0 && eps_sec < 1.0) {
            return Err(Error::domain(format!("eps_sec = {eps_sec} outside (0, 1)")));
        }
        if !(eps_cor > 0.0 && eps_cor < 1.0) {
            return Err(Error::domain(format!("eps_cor = {eps_cor} outside (0, 1)")));
        }
        if !(f_ec >= 1.0) {
            return Err(Error::domain(format!("f_ec = {f_ec} must be >= 1")));
        }
        if !(n_total >= 1.0) {
            return Err(Error::domain(format!("n_total = {n_total} must be >= 1")));
        }
        Ok(Self {
            eps_sec,
            eps_cor,
            f_ec,
            n_total,
        })
    }

    /// With a different session length, everything else unchanged.
    pub fn with_n_total(mut self, n_total: f64) -> Self {
        self.n_total = n_total;
        self
    }

    fn ln_21_over_eps(&self) -> f64 {
        (21.0 / self.eps_sec).ln()
    }
}

/// Direction of a finite-sample count bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDirection {
    Lower,
    Upper,
}

/// Intermediate quantities of one key-length evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KeyLengthBreakdown {
    /// Zero-photon contribution lower bound (key basis).
    pub s_x0: f64,
    /// Single-photon contribution lower bound (key basis).
    pub s_x1: f64,
    /// Zero-photon contribution lower bound (diagonal basis).
    pub s_z0: f64,
    /// Single-photon contribution lower bound (diagonal basis).
    pub s_z1: f64,
    /// Single-photon error count upper bound (diagonal basis).
    pub v_z1: f64,
    /// Statistical-fluctuation correction added to the phase error ratio.
    pub gamma: f64,
    /// Phase error rate upper bound, capped at 1/2.
    pub phi_x: f64,
    /// Observed error rate in the key basis.
    pub e_obs: f64,
    /// Extractable key length (bits).
    pub ell: u64,
    /// Key length before flooring and clamping; negative when the error
    /// correction cost exceeds the bounded single-photon credit.
    pub ell_real: f64,
}

/// Binary entropy in bits, with h(0) = h(1) = 0 by continuous extension.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "entropy argument {x} outside [0, 1]"
        )));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

/// Probability that a sent pulse carries exactly `n` photons:
/// `tau_n = sum_k e^(-mu_k) mu_k^n P_k / n!`.
pub fn tau(n: u32, state: &ProtocolState) -> f64 {
    let mut factorial = 1.0;
    for i in 1..=n {
        factorial *= i as f64;
    }
    state
        .p_mu
        .iter()
        .zip(&state.mu)
        .map(|(&p, &mu)| (-mu).exp() * mu.powi(n as i32) * p / factorial)
        .sum()
}

/// Finite-sample count bound for decoy `k` (0-indexed):
/// `e^(mu_k)/P_k * (n_bk +- sqrt(n_b/2 ln(21/eps_sec)))`, the lower
/// direction clamped at zero. `n_b` is the basis total of the same count
/// kind (detections or errors).
pub fn count_bound(
    n_bk: f64,
    n_b: f64,
    k: usize,
    state: &ProtocolState,
    sec: &SecurityParams,
    dir: BoundDirection,
) -> Result<f64> {
    if k >= 3 {
        return Err(Error::domain(format!("decoy index {k} out of range")));
    }
    let p_k = state.p_mu[k];
    if p_k <= 0.0 {
        return Err(Error::DegenerateDecoy(format!("P_mu{} = 0", k + 1)));
    }
    let deviation = (n_b.max(0.0) / 2.0 * sec.ln_21_over_eps()).sqrt();
    let signed = match dir {
        BoundDirection::Upper => n_bk + deviation,
        BoundDirection::Lower => n_bk - deviation,
    };
    let bound = state.mu[k].exp() / p_k * signed;
    Ok(match dir {
        BoundDirection::Lower => bound.max(0.0),
        BoundDirection::Upper => bound,
    })
}

/// Lower bound on detections caused by zero-photon pulses in `basis`:
/// `tau_0 (mu2 n-_mu3 - mu3 n+_mu2) / (mu2 - mu3)`, clamped at zero.
pub fn s0_lower(
    counts: &SiftedCounts,
    basis: Basis,
    state: &ProtocolState,
    sec: &SecurityParams,
) -> Result<f64> {
    let [_, mu2, mu3] = state.mu;
    if mu2 <= mu3 {
        return Err(Error::DegenerateDecoy(format!(
            "mu2 = {mu2} <= mu3 = {mu3}"
        )));
    }
    let n = counts.detections(basis);
    let total = counts.n_total(basis);
    let n3_lo = count_bound(n[2], total, 2, state, sec, BoundDirection::Lower)?;
    let n2_hi = count_bound(n[1], total, 1, state, sec, BoundDirection::Upper)?;
    Ok((tau(0, state) * (mu2 * n3_lo - mu3 * n2_hi) / (mu2 - mu3)).max(0.0))
}

/// Lower bound on detections caused by single-photon pulses in `basis`,
/// given the zero-photon bound `s0` for the same basis. Clamped at zero.
pub fn s1_lower(
    counts: &SiftedCounts,
    basis: Basis,
    state: &ProtocolState,
    sec: &SecurityParams,
    s0: f64,
) -> Result<f64> {
    let [mu1, mu2, mu3] = state.mu;
    let denom = mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3;
    if denom <= 0.0 {
        return Err(Error::DegenerateDecoy(format!(
            "mu1(mu2 - mu3) - mu2^2 + mu3^2 = {denom} <= 0"
        )));
    }
    let n = counts.detections(basis);
    let total = counts.n_total(basis);
    let n2_lo = count_bound(n[1], total, 1, state, sec, BoundDirection::Lower)?;
    let n3_hi = count_bound(n[2], total, 2, state, sec, BoundDirection::Upper)?;
    let n1_hi = count_bound(n[0], total, 0, state, sec, BoundDirection::Upper)?;
    let tau0 = tau(0, state);
    let correction = (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (n1_hi - s0 / tau0);
    Ok((tau(1, state) * mu1 * (n2_lo - n3_hi - correction) / denom).max(0.0))
}

/// Upper bound on the errors stemming from single-photon pulses in `basis`:
/// `tau_1 (mu2 m+_mu2 - mu3 m-_mu3) / (mu2 - mu3)`.
pub fn v1_upper(
    counts: &SiftedCounts,
    basis: Basis,
    state: &ProtocolState,
    sec: &SecurityParams,
) -> Result<f64> {
    let [_, mu2, mu3] = state.mu;
    if mu2 <= mu3 {
        return Err(Error::DegenerateDecoy(format!(
            "mu2 = {mu2} <= mu3 = {mu3}"
        )));
    }
    let m = counts.errors(basis);
    let total = counts.m_total(basis);
    let m2_hi = count_bound(m[1], total, 1, state, sec, BoundDirection::Upper)?;
    let m3_lo = count_bound(m[2], total, 2, state, sec, BoundDirection::Lower)?;
    Ok((tau(1, state) * (mu2 * m2_hi - mu3 * m3_lo) / (mu2 - mu3)).max(0.0))
}

/// Statistical-fluctuation correction on the phase error estimate.
///
/// `eps` is the secrecy parameter, `ratio` the raw single-photon error
/// ratio, and `s_z1`, `s_x1` the single-photon sample sizes of the two
/// bases. Returns the closed form quoted in the module docs; zero at the
/// `ratio` boundaries (its limit there) and capped at 1/2 when a sample
/// size is degenerate.
pub fn gamma_uncertainty(eps: f64, ratio: f64, s_z1: f64, s_x1: f64) -> f64 {
    if s_z1 <= 0.0 || s_x1 <= 0.0 {
        return 0.5;
    }
    if ratio <= 0.0 || ratio >= 1.0 {
        return 0.0;
    }
    let (b, c, d) = (ratio, s_z1, s_x1);
    let prefactor = (c + d) * (1.0 - b) * b / (c * d * std::f64::consts::LN_2);
    let argument = (c + d) / (c * d * (1.0 - b) * b) * (21.0 / eps).powi(2);
    if argument <= 1.0 {
        return 0.0;
    }
    (prefactor * argument.log2()).sqrt()
}

/// Upper bound on the phase error rate of the key basis:
/// `v_Z1 / s_z1 + gamma(...)`, capped at 1/2.
pub fn phi_upper(
    counts: &SiftedCounts,
    state: &ProtocolState,
    sec: &SecurityParams,
    s_z1: f64,
    s_x1: f64,
) -> Result<f64> {
    if s_z1 <= 0.0 {
        return Err(Error::domain(
            "no single-photon statistics in the diagonal basis",
        ));
    }
    let v1 = v1_upper(counts, Basis::Z, state, sec)?;
    let ratio = v1 / s_z1;
    Ok((ratio + gamma_uncertainty(sec.eps_sec, ratio, s_z1, s_x1)).min(0.5))
}

/// The full finite-size key length with every intermediate quantity.
/// Degenerate statistics never error; they yield `ell = 0`.
pub fn key_length(
    counts: &SiftedCounts,
    state: &ProtocolState,
    sec: &SecurityParams,
) -> KeyLengthBreakdown {
    let mut out = KeyLengthBreakdown::default();
    let n_x = counts.n_total(Basis::X);
    if n_x <= 0.0 {
        return out;
    }

    let chain = || -> Result<KeyLengthBreakdown> {
        let s_x0 = s0_lower(counts, Basis::X, state, sec)?;
        let s_x1 = s1_lower(counts, Basis::X, state, sec, s_x0)?;
        let s_z0 = s0_lower(counts, Basis::Z, state, sec)?;
        let s_z1 = s1_lower(counts, Basis::Z, state, sec, s_z0)?;
        let e_obs = counts.qber_x();

        let (v_z1, gamma, phi_x) = if s_z1 > 0.0 {
            let v1 = v1_upper(counts, Basis::Z, state, sec)?;
            let ratio = v1 / s_z1;
            let gamma = gamma_uncertainty(sec.eps_sec, ratio, s_z1, s_x1);
            (v1, gamma, (ratio + gamma).min(0.5))
        } else {
            (0.0, 0.0, 0.5)
        };

        let h_phi = binary_entropy(phi_x)?;
        let h_e = binary_entropy(e_obs.min(1.0))?;
        let ell_real = s_x0 + s_x1 * (1.0 - h_phi)
            - n_x * sec.f_ec * h_e
            - 6.0 * (21.0 / sec.eps_sec).log2()
            - (2.0 / sec.eps_cor).log2();
        Ok(KeyLengthBreakdown {
            s_x0,
            s_x1,
            s_z0,
            s_z1,
            v_z1,
            gamma,
            phi_x,
            e_obs,
            ell: ell_real.floor().max(0.0) as u64,
            ell_real,
        })
    };

    match chain() {
        Ok(breakdown) => breakdown,
        Err(_) => {
            out.phi_x = 0.5;
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::expected_counts;
    use crate::presets;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    /// The golden scenario the frozen values below were computed for:
    /// reference receiver, 15 dB reference state, static transmittance
    /// 0.035, 1e10 post-selected pulses.
    fn golden_counts() -> (SiftedCounts, ProtocolState, SecurityParams) {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let rx = presets::receiver();
        let counts = expected_counts(&state, &rx, 0.035, 1e10);
        (counts, state, presets::security())
    }

    /// Independent transcription of the bound chain, kept deliberately
    /// flat so it shares no code with the implementation above.
    fn oracle_chain(
        c: &SiftedCounts,
        st: &ProtocolState,
        sec: &SecurityParams,
    ) -> (f64, f64, f64, f64, f64, f64) {
        let [mu1, mu2, mu3] = st.mu;
        let [p1, p2, p3] = st.p_mu;
        let t0 = (-mu1).exp() * p1 + (-mu2).exp() * p2 + (-mu3).exp() * p3;
        let t1 = (-mu1).exp() * mu1 * p1 + (-mu2).exp() * mu2 * p2 + (-mu3).exp() * mu3 * p3;
        let lg = (21.0f64 / sec.eps_sec).ln();
        let mut s = [0.0f64; 4]; // s0x, s1x, s0z, s1z
        let mut v1z = 0.0;
        for (bi, (n, m)) in [(c.n_x, c.m_x), (c.n_z, c.m_z)].iter().enumerate() {
            let ntot: f64 = n.iter().sum();
            let mtot: f64 = m.iter().sum();
            let dn = (ntot / 2.0 * lg).sqrt();
            let dm = (mtot / 2.0 * lg).sqrt();
            let e = [mu1.exp() / p1, mu2.exp() / p2, mu3.exp() / p3];
            let s0 = (t0 * (mu2 * (e[2] * (n[2] - dn)).max(0.0) - mu3 * e[1] * (n[1] + dn))
                / (mu2 - mu3))
                .max(0.0);
            let s1 = (t1
                * mu1
                * ((e[1] * (n[1] - dn)).max(0.0)
                    - e[2] * (n[2] + dn)
                    - (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (e[0] * (n[0] + dn) - s0 / t0))
                / (mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3))
                .max(0.0);
            s[2 * bi] = s0;
            s[2 * bi + 1] = s1;
            if bi == 1 {
                v1z = (t1 * (mu2 * e[1] * (m[1] + dm) - mu3 * (e[2] * (m[2] - dm)).max(0.0))
                    / (mu2 - mu3))
                    .max(0.0);
            }
        }
        (s[0], s[1], s[2], s[3], v1z, t1)
    }

    #[test]
    fn entropy_values_and_domain() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert!(rel(binary_entropy(0.25).unwrap(), 0.81127812445913286) < 1e-15);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.1).is_err());
    }

    #[test]
    fn tau_totals_and_frozen_values() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let total: f64 = (0..=80).map(|n| tau(n, &state)).sum();
        assert!((total - 1.0).abs() < 1e-9, "{total}");
        assert!(rel(tau(0, &state), 0.7040168689484433) < 1e-14);
        assert!(rel(tau(1, &state), 0.22934066556176162) < 1e-14);

        // degenerate vacuum-only source (bypasses protocol validation)
        let vacuum = ProtocolState {
            q_x: 1.0,
            p_mu: [1.0, 0.0, 0.0],
            mu: [0.0, 0.0, 0.0],
        };
        assert_eq!(tau(0, &vacuum), 1.0);
    }

    #[test]
    fn count_bound_edges_and_frozen_values() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let sec = presets::security();
        // zero-sample deviation vanishes
        let b = count_bound(0.0, 0.0, 1, &state, &sec, BoundDirection::Upper).unwrap();
        assert_eq!(b, 0.0);
        let b = count_bound(5.0, 0.0, 1, &state, &sec, BoundDirection::Lower).unwrap();
        assert!(rel(b, state.mu[1].exp() / state.p_mu[1] * 5.0) < 1e-15);

        let hi = count_bound(1e6, 3e6, 1, &state, &sec, BoundDirection::Upper).unwrap();
        let lo = count_bound(1e6, 3e6, 1, &state, &sec, BoundDirection::Lower).unwrap();
        assert!(rel(hi, 4412789.5276232146) < 1e-13, "{hi}");
        assert!(rel(lo, 4357942.2488888263) < 1e-13, "{lo}");

        let degenerate = ProtocolState {
            p_mu: [1.0, 0.0, 0.0],
            ..state
        };
        assert!(count_bound(1.0, 1.0, 1, &degenerate, &sec, BoundDirection::Upper).is_err());
    }

    #[test]
    fn bound_chain_matches_frozen_values() {
        let (counts, state, sec) = golden_counts();
        let s_x0 = s0_lower(&counts, Basis::X, &state, &sec).unwrap();
        let s_x1 = s1_lower(&counts, Basis::X, &state, &sec, s_x0).unwrap();
        let s_z0 = s0_lower(&counts, Basis::Z, &state, &sec).unwrap();
        let s_z1 = s1_lower(&counts, Basis::Z, &state, &sec, s_z0).unwrap();
        let v_z1 = v1_upper(&counts, Basis::Z, &state, &sec).unwrap();
        assert!(rel(s_x0, 132421.28384688524) < 1e-9, "{s_x0}");
        assert!(rel(s_x1, 1233691.3682262083) < 1e-9, "{s_x1}");
        assert!(rel(s_z0, 69903.539466968652) < 1e-9, "{s_z0}");
        assert!(rel(s_z1, 211022.77840507318) < 1e-9, "{s_z1}");
        assert!(rel(v_z1, 18024.263689667419) < 1e-9, "{v_z1}");

        // and the independent in-test transcription agrees path by path
        let (o_s_x0, o_s_x1, o_s_z0, o_s_z1, o_v_z1, _) = oracle_chain(&counts, &state, &sec);
        assert!(rel(s_x0, o_s_x0) < 1e-12);
        assert!(rel(s_x1, o_s_x1) < 1e-12);
        assert!(rel(s_z0, o_s_z0) < 1e-12);
        assert!(rel(s_z1, o_s_z1) < 1e-12);
        assert!(rel(v_z1, o_v_z1) < 1e-12);
    }

    #[test]
    fn zero_counts_bounds_are_zero() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let sec = presets::security();
        let zero = SiftedCounts::default();
        assert_eq!(s0_lower(&zero, Basis::X, &state, &sec).unwrap(), 0.0);
        assert_eq!(s1_lower(&zero, Basis::X, &state, &sec, 0.0).unwrap(), 0.0);
        assert_eq!(v1_upper(&zero, Basis::Z, &state, &sec).unwrap(), 0.0);
    }

    #[test]
    fn v1_monotone_in_errors() {
        let (counts, state, sec) = golden_counts();
        let base = v1_upper(&counts, Basis::Z, &state, &sec).unwrap();
        let mut inflated = counts;
        for k in 0..3 {
            inflated.m_z[k] *= 2.0;
        }
        let doubled = v1_upper(&inflated, Basis::Z, &state, &sec).unwrap();
        assert!(doubled > base, "{doubled} <= {base}");
    }

    #[test]
    fn s1_tracks_single_photon_fraction_without_loss_or_noise() {
        // perfect channel, perfect receiver: every pulse with >= 1 photon
        // clicks, so the single-photon bound per sifted pulse approaches
        // tau_1.
        let state = ProtocolState::with_closure(1.0, 0.552, 0.287, 0.56, 0.23, 0.002).unwrap();
        let rx = crate::detection::ReceiverModel::new(
            [crate::detection::DetectorNoise { y0: 0.0, b: 0.0 }; 4],
            1.0,
            1.0,
            0.0,
            1.0,
        )
        .unwrap();
        let n_post = 1e12;
        let counts = expected_counts(&state, &rx, 1.0, n_post);
        let sec = presets::security().with_n_total(n_post);
        let s0 = s0_lower(&counts, Basis::X, &state, &sec).unwrap();
        let s1 = s1_lower(&counts, Basis::X, &state, &sec, s0).unwrap();
        let t1 = tau(1, &state);
        assert!(
            (s1 / n_post - t1).abs() < 0.1 * t1,
            "s1/N = {} vs tau1 = {}",
            s1 / n_post,
            t1
        );
    }

    #[test]
    fn gamma_frozen_value_and_monotonicity() {
        let g = gamma_uncertainty(1e-10, 0.01, 1e6, 1e7);
        assert!(rel(g, 0.00098765041825800495) < 1e-12, "{g}");
        // doubling both sample sizes strictly decreases the correction
        let g2 = gamma_uncertainty(1e-10, 0.01, 2e6, 2e7);
        assert!(g2 < g);
        // asymptotic limit
        assert!(gamma_uncertainty(1e-10, 0.01, 1e18, 1e18) < 1e-7);
        // boundary ratios take the limit value
        assert_eq!(gamma_uncertainty(1e-10, 0.0, 1e6, 1e6), 0.0);
        assert_eq!(gamma_uncertainty(1e-10, 1.0, 1e6, 1e6), 0.0);
    }

    #[test]
    fn phi_caps_and_errors() {
        let (counts, state, sec) = golden_counts();
        let phi = phi_upper(
            &counts,
            &state,
            &sec,
            211022.77840507318,
            1233691.3682262083,
        )
        .unwrap();
        assert!(rel(phi, 0.091612805571807616) < 1e-9, "{phi}");
        // v1 at half the single-photon sample saturates the cap
        let phi = phi_upper(&counts, &state, &sec, 2.0 * 18024.26, 1e6).unwrap();
        assert_eq!(phi, 0.5);
        assert!(phi_upper(&counts, &state, &sec, 0.0, 1e6).is_err());
    }

    #[test]
    fn key_length_frozen_scenario() {
        let (counts, state, sec) = golden_counts();
        let kb = key_length(&counts, &state, &sec);
        assert!(rel(kb.e_obs, 0.047181376852669399) < 1e-12);
        assert!(rel(kb.gamma, 0.0061989757194275678) < 1e-9);
        assert!(rel(kb.phi_x, 0.091612805571807616) < 1e-9);
        assert!(rel(kb.ell_real, 5227.752597252227) < 1e-6);
        assert_eq!(kb.ell, 5227);
    }

    #[test]
    fn key_length_zero_and_saturated_inputs() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let sec = presets::security();
        let kb = key_length(&SiftedCounts::default(), &state, &sec);
        assert_eq!(kb.ell, 0);

        // e_obs >= 1/2: error correction alone exceeds the raw key
        let (mut counts, _, _) = golden_counts();
        for k in 0..3 {
            counts.m_x[k] = counts.n_x[k] / 2.0;
        }
        let kb = key_length(&counts, &state, &sec);
        assert_eq!(kb.ell, 0);

        // phase error saturation also kills the key
        let (mut counts, _, _) = golden_counts();
        for k in 0..3 {
            counts.m_z[k] = counts.n_z[k];
        }
        let kb = key_length(&counts, &state, &sec);
        assert_eq!(kb.phi_x, 0.5);
        assert_eq!(kb.ell, 0);
    }

    #[test]
    fn key_length_monotone_and_convergent_in_n() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let rx = presets::receiver();
        let sec = presets::security();
        let ell_at = |n: f64| {
            let counts = expected_counts(&state, &rx, 0.06, n);
            key_length(&counts, &state, &sec.with_n_total(n)).ell as f64
        };
        let (a, b, c) = (ell_at(1e9), ell_at(1e10), ell_at(1e11));
        assert!(a <= b && b <= c, "{a} {b} {c}");

        // ell/N converges: < 2% relative change from 1e13 to 1e14
        let (r1, r2) = (ell_at(1e13) / 1e13, ell_at(1e14) / 1e14);
        assert!((r2 - r1).abs() / r2 < 0.02, "{r1} vs {r2}");
    }

    #[test]
    fn photon_number_credit_bounded_by_detections() {
        let (counts, state, sec) = golden_counts();
        let kb = key_length(&counts, &state, &sec);
        assert!(kb.s_x0 + kb.s_x1 <= counts.n_total(Basis::X));
    }

    #[test]
    fn deviations_bracket_the_undeviated_bounds() {
        let (counts, state, sec) = golden_counts();
        // zero-deviation variants computed inline
        let [mu1, mu2, mu3] = state.mu;
        let e = [
            mu1.exp() / state.p_mu[0],
            mu2.exp() / state.p_mu[1],
            mu3.exp() / state.p_mu[2],
        ];
        let n = counts.n_x;
        let t0 = tau(0, &state);
        let t1 = tau(1, &state);
        let s0_nodev = t0 * (mu2 * e[2] * n[2] - mu3 * e[1] * n[1]) / (mu2 - mu3);
        let s1_nodev = t1
            * mu1
            * (e[1] * n[1]
                - e[2] * n[2]
                - (mu2 * mu2 - mu3 * mu3) / (mu1 * mu1) * (e[0] * n[0] - s0_nodev / t0))
            / (mu1 * (mu2 - mu3) - mu2 * mu2 + mu3 * mu3);

        let s0 = s0_lower(&counts, Basis::X, &state, &sec).unwrap();
        let s1 = s1_lower(&counts, Basis::X, &state, &sec, s0).unwrap();
        assert!(s0 <= s0_nodev, "{s0} > {s0_nodev}");
        assert!(s1 <= s1_nodev, "{s1} > {s1_nodev}");
    }

    #[test]
    fn key_length_invariant_under_detector_relabeling() {
        let state = presets::optimized_state_for_loss_db(15).unwrap();
        let sec = presets::security();
        let rx = presets::receiver();
        let mut swapped = rx.clone();
        swapped.noise.swap(0, 1);
        let a = key_length(&expected_counts(&state, &rx, 0.03, 1e10), &state, &sec);
        let b = key_length(&expected_counts(&state, &swapped, 0.03, 1e10), &state, &sec);
        assert_eq!(a.ell, b.ell);
    }
}

#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn entropy_bounded_and_symmetric(x in 0.0f64..=1.0) {
            let h = binary_entropy(x).unwrap();
            prop_assert!((0.0..=1.0).contains(&h));
            let h_mirror = binary_entropy(1.0 - x).unwrap();
            prop_assert!((h - h_mirror).abs() < 1e-12);
        }
    }
}
