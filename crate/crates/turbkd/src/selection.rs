//! Transmittance post-selection engines.
//!
//! Discarding the pulses recorded below a transmittance threshold trades
//! sample size for signal-to-noise ratio. The kept data behave like a
//! static channel at the truncated mean `<eta>` with
//! `N_post = N * survival` pulses, so the distilled rate relative to all
//! sent pulses is
//!
//! ```text
//! R(eta_th) = R_finite(<eta>, N_post) * survival(eta_th)
//! ```
//!
//! Two ways to pick the threshold:
//! - ARTS scans a grid of cutoffs in post-processing and keeps the best;
//! - P-RTS fixes the cutoff before the session, either at the critical
//!   transmittance of the asymptotic rate (no channel knowledge needed at
//!   all) or at an operator-supplied value.

use crate::asymptotic::{critical_transmittance, gllp_rate};
use crate::channel::{survival_fraction, truncated_mean, ChannelParams};
use crate::detection::{expected_counts, ProtocolState, ReceiverModel};
use crate::error::{Error, Result};
use crate::finitekey::{key_length, SecurityParams};
use rayon::prelude::*;

/// One threshold choice and what it buys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionOutcome {
    /// Applied threshold.
    pub eta_th: f64,
    /// Fraction of pulses kept.
    pub survival: f64,
    /// Mean transmittance of the kept fraction (= eta_th when nothing
    /// survives).
    pub eta_mean: f64,
    /// Post-selected pulse count, `round(N * survival)`.
    pub n_post: u64,
    /// Extractable key length at this threshold.
    pub ell: u64,
    /// Secure key rate in bits per *sent* pulse.
    pub rate: f64,
}

impl SelectionOutcome {
    fn empty(eta_th: f64) -> Self {
        Self {
            eta_th,
            survival: 0.0,
            eta_mean: eta_th,
            n_post: 0,
            ell: 0,
            rate: 0.0,
        }
    }
}

/// Threshold scan with the argmax identified.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdScanResult {
    /// One outcome per grid point, in grid order.
    pub outcomes: Vec<SelectionOutcome>,
    /// Index of the maximal rate; ties break toward the smaller threshold.
    pub best: usize,
}

impl ThresholdScanResult {
    pub fn best_outcome(&self) -> &SelectionOutcome {
        &self.outcomes[self.best]
    }
}

/// Prefixed-threshold mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrtsMode {
    /// Threshold at the critical transmittance of the asymptotic rate;
    /// requires no knowledge of the channel statistics.
    AsymptoticCutoff,
    /// Operator-supplied threshold.
    Prefixed(f64),
}

/// Default ARTS scan grid: 0 to 0.10 in steps of 0.0025.
pub fn default_grid() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.0025).collect()
}

/// Finite-size rate once the survival fraction and truncated mean of the
/// kept data are known. Shared by the channel-integral path below and the
/// optimizer's cached threshold table so both produce bit-identical rates.
pub(crate) fn rate_for_selection(
    eta_th: f64,
    survival: f64,
    eta_mean: f64,
    state: &ProtocolState,
    rx: &ReceiverModel,
    sec: &SecurityParams,
) -> SelectionOutcome {
    let (outcome, _) = selection_with_breakdown(eta_th, survival, eta_mean, state, rx, sec);
    outcome
}

/// `rate_for_selection` plus the raw key-length breakdown; the optimizer
/// uses the unfloored key length as a descent signal where the floored
/// rate is flat at zero.
pub(crate) fn selection_with_breakdown(
    eta_th: f64,
    survival: f64,
    eta_mean: f64,
    state: &ProtocolState,
    rx: &ReceiverModel,
    sec: &SecurityParams,
) -> (SelectionOutcome, f64) {
    let n_post = (sec.n_total * survival).round();
    if survival <= 0.0 || n_post < 1.0 {
        return (SelectionOutcome::empty(eta_th), f64::NEG_INFINITY);
    }
    let counts = expected_counts(state, rx, eta_mean, n_post);
    let breakdown = key_length(&counts, state, sec);
    let outcome = SelectionOutcome {
        eta_th,
        survival,
        eta_mean,
        n_post: n_post as u64,
        ell: breakdown.ell,
        rate: breakdown.ell as f64 / sec.n_total,
    };
    (outcome, breakdown.ell_real)
}

/// Expected finite-size selected rate at threshold `eta_th` (clamped into
/// [0, 1]). An empty selection yields a zero-rate outcome rather than an
/// error.
pub fn finite_selected_rate(
    eta_th: f64,
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    sec: &SecurityParams,
) -> SelectionOutcome {
    let eta_th = eta_th.clamp(0.0, 1.0);
    let survival = survival_fraction(eta_th, channel).expect("threshold clamped into [0, 1]");
    if survival <= 0.0 {
        return SelectionOutcome::empty(eta_th);
    }
    let eta_mean = truncated_mean(eta_th, channel).expect("survival checked positive");
    rate_for_selection(eta_th, survival, eta_mean, state, rx, sec)
}

/// Evaluate the finite selected rate on every grid point and locate the
/// maximizer. The grid must be nonempty and ascending.
pub fn arts_scan(
    grid: &[f64],
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    sec: &SecurityParams,
) -> Result<ThresholdScanResult> {
    if grid.is_empty() {
        return Err(Error::domain("ARTS scan grid is empty"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("ARTS scan grid must be strictly ascending"));
    }
    let outcomes: Vec<SelectionOutcome> = grid
        .par_iter()
        .map(|&t| finite_selected_rate(t, channel, state, rx, sec))
        .collect();
    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.rate > outcomes[best].rate {
            best = i;
        }
    }
    Ok(ThresholdScanResult { outcomes, best })
}

/// Prefixed-threshold selection. In [`PrtsMode::AsymptoticCutoff`] the
/// threshold comes from [`critical_transmittance`] alone: the channel
/// statistics are never consulted for it. If no transmittance yields a
/// positive asymptotic rate the outcome is the zero-rate report at
/// threshold 1.
pub fn prts_rate(
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    sec: &SecurityParams,
    mode: PrtsMode,
) -> SelectionOutcome {
    let eta_th = match mode {
        PrtsMode::Prefixed(t) => t,
        PrtsMode::AsymptoticCutoff => match critical_transmittance(state, rx, sec.f_ec) {
            Ok(cr) => cr,
            Err(_) => return SelectionOutcome::empty(1.0),
        },
    };
    finite_selected_rate(eta_th, channel, state, rx, sec)
}

/// Asymptotic selected rate `R(<eta>) * survival(eta_th)`.
pub fn asymptotic_selected_rate(
    eta_th: f64,
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    f_ec: f64,
) -> f64 {
    let eta_th = eta_th.clamp(0.0, 1.0);
    let survival = survival_fraction(eta_th, channel).expect("threshold clamped into [0, 1]");
    if survival <= 0.0 {
        return 0.0;
    }
    let eta_mean = truncated_mean(eta_th, channel).expect("survival checked positive");
    gllp_rate(eta_mean, state, rx, f_ec) * survival
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotic::rate_wise_bound;
    use crate::presets;

    fn fixture(db: u32) -> (ChannelParams, ProtocolState, ReceiverModel, SecurityParams) {
        (
            presets::channel_for_loss_db(db as f64).unwrap(),
            presets::optimized_state_for_loss_db(db).unwrap(),
            presets::receiver(),
            presets::security(),
        )
    }

    #[test]
    fn zero_threshold_is_the_unselected_pipeline() {
        let (channel, state, rx, sec) = fixture(15);
        let outcome = finite_selected_rate(0.0, &channel, &state, &rx, &sec);
        // same numbers as assembling the pipeline by hand
        let survival = survival_fraction(0.0, &channel).unwrap();
        let mean = truncated_mean(0.0, &channel).unwrap();
        let manual = rate_for_selection(0.0, survival, mean, &state, &rx, &sec);
        assert_eq!(outcome, manual);
        assert!(outcome.rate > 0.0);
    }

    #[test]
    fn unit_threshold_keeps_nothing() {
        let (channel, state, rx, sec) = fixture(15);
        let outcome = finite_selected_rate(1.0, &channel, &state, &rx, &sec);
        assert_eq!(outcome.rate, 0.0);
        assert_eq!(outcome.n_post, 0);
    }

    #[test]
    fn seventeen_db_at_reference_cutoff_matches_frozen_value() {
        let (channel, state, rx, sec) = fixture(17);
        let outcome = finite_selected_rate(0.0275, &channel, &state, &rx, &sec);
        assert!(outcome.rate > 0.0);
        assert_eq!(outcome.ell, 163621);
        assert!((outcome.rate.log10() - (-5.2632822121152374)).abs() < 1e-6);
    }

    #[test]
    fn scan_identity_and_dominance() {
        let (channel, state, rx, sec) = fixture(15);
        let single = arts_scan(&[0.0], &channel, &state, &rx, &sec).unwrap();
        assert_eq!(single.best, 0);
        let unselected = finite_selected_rate(0.0, &channel, &state, &rx, &sec);
        assert_eq!(single.best_outcome().rate, unselected.rate);

        let grid = default_grid();
        let scan = arts_scan(&grid, &channel, &state, &rx, &sec).unwrap();
        assert!(scan.best_outcome().rate >= unselected.rate);
    }

    #[test]
    fn scan_rejects_bad_grids() {
        let (channel, state, rx, sec) = fixture(15);
        assert!(arts_scan(&[], &channel, &state, &rx, &sec).is_err());
        assert!(arts_scan(&[0.1, 0.1], &channel, &state, &rx, &sec).is_err());
    }

    #[test]
    fn scan_argmax_in_reference_band() {
        let (channel, state, rx, sec) = fixture(15);
        let grid = default_grid();
        let scan = arts_scan(&grid, &channel, &state, &rx, &sec).unwrap();
        let best = scan.best_outcome().eta_th;
        assert!((0.02..=0.035).contains(&best), "argmax at {best}");
    }

    #[test]
    fn selection_helps_at_thirteen_db_and_beyond() {
        for db in [13, 15, 17, 19] {
            let (channel, state, rx, sec) = fixture(db);
            let scan = arts_scan(&default_grid(), &channel, &state, &rx, &sec).unwrap();
            let unselected = finite_selected_rate(0.0, &channel, &state, &rx, &sec);
            assert!(
                scan.best_outcome().rate > unselected.rate,
                "{db} dB: best {} vs unselected {}",
                scan.best_outcome().rate,
                unselected.rate
            );
        }
    }

    #[test]
    fn scan_best_close_to_dense_grid() {
        let dense: Vec<f64> = (0..=100).map(|i| i as f64 * 1e-3).collect();
        for db in [13, 15, 17] {
            let (channel, state, rx, sec) = fixture(db);
            let coarse = arts_scan(&default_grid(), &channel, &state, &rx, &sec).unwrap();
            let fine = arts_scan(&dense, &channel, &state, &rx, &sec).unwrap();
            let (a, b) = (coarse.best_outcome().rate, fine.best_outcome().rate);
            assert!(
                (a - b).abs() <= 0.10 * b,
                "{db} dB: coarse {a} vs dense {b}"
            );
        }
    }

    #[test]
    fn prts_asymptotic_mode_uses_the_critical_transmittance() {
        let (channel, state, rx, sec) = fixture(15);
        let outcome = prts_rate(&channel, &state, &rx, &sec, PrtsMode::AsymptoticCutoff);
        let cr = critical_transmittance(&state, &rx, sec.f_ec).unwrap();
        assert_eq!(outcome.eta_th, cr);
    }

    #[test]
    fn prts_threshold_never_consults_the_channel() {
        let (_, state, rx, sec) = fixture(15);
        let mut thresholds = vec![];
        for sigma in [0.5, 0.9, 1.1] {
            let channel = ChannelParams::new(10f64.powf(-1.5), sigma).unwrap();
            let o = prts_rate(&channel, &state, &rx, &sec, PrtsMode::AsymptoticCutoff);
            thresholds.push(o.eta_th);
        }
        assert_eq!(thresholds[0], thresholds[1]);
        assert_eq!(thresholds[1], thresholds[2]);
    }

    #[test]
    fn prefixed_cutoff_fails_at_nineteen_db() {
        let (channel, state, rx, sec) = fixture(19);
        let outcome = prts_rate(&channel, &state, &rx, &sec, PrtsMode::Prefixed(0.016));
        assert_eq!(outcome.ell, 0);
        assert_eq!(outcome.rate, 0.0);
    }

    #[test]
    fn reference_cutoff_tracks_the_scan_optimum_at_fifteen_db() {
        let (channel, state, rx, sec) = fixture(15);
        let prefixed = prts_rate(&channel, &state, &rx, &sec, PrtsMode::Prefixed(0.0275));
        let scan = arts_scan(&default_grid(), &channel, &state, &rx, &sec).unwrap();
        let best = scan.best_outcome().rate;
        assert!(
            prefixed.rate >= 0.8 * best,
            "prefixed {} vs best {best}",
            prefixed.rate
        );
    }

    #[test]
    fn asymptotic_selected_rate_cases() {
        let (_, state, rx, _) = fixture(15);
        // concentrated channel at zero threshold recovers the static rate
        let tight = ChannelParams::new(10f64.powf(-1.5), 0.01).unwrap();
        let r = asymptotic_selected_rate(0.0, &tight, &state, &rx, 1.16);
        let static_rate = gllp_rate(tight.eta0, &state, &rx, 1.16);
        assert!((r - static_rate).abs() < 0.01 * static_rate);

        // at the critical threshold the selected rate approximates the
        // rate-wise bound (linearity argument)
        let channel = ChannelParams::new(10f64.powf(-1.5), 0.9).unwrap();
        let cr = critical_transmittance(&state, &rx, 1.16).unwrap();
        let at_cr = asymptotic_selected_rate(cr, &channel, &state, &rx, 1.16);
        let bound = rate_wise_bound(&channel, &state, &rx, 1.16);
        assert!((at_cr - bound).abs() <= 0.05 * bound, "{at_cr} vs {bound}");

        // survival factor bound far above the bulk
        let r = asymptotic_selected_rate(0.99, &channel, &state, &rx, 1.16);
        let surv = survival_fraction(0.99, &channel).unwrap();
        assert!(surv < 1e-6);
        assert!(r <= surv * gllp_rate(1.0, &state, &rx, 1.16));
    }
}
