//! Stochastic simulation of full key-exchange sessions.
//!
//! The channel transmittance is redrawn once per bin (the probe cadence:
//! at a 25 MHz pulse rate and 4 kHz probe rate one bin holds 6250 pulses)
//! and held constant within it; bins are i.i.d. Within a bin, every
//! (basis pairing, decoy, sent polarization) category draws its pulse count
//! and its click/error outcomes binomially from the analytic probabilities,
//! with double clicks resolved by a fair random bit.
//!
//! Reproducibility: each bin derives its own ChaCha stream from the session
//! seed and the bin index, so a session is bit-identical for a fixed seed
//! no matter how many worker threads simulate it.

use crate::channel::{sample_transmittance, ChannelParams};
use crate::detection::{
    click_probability, error_probability, Basis, ProtocolState, ReceiverModel, SiftedCounts,
};
use crate::finitekey::{key_length, SecurityParams};
use crate::selection::SelectionOutcome;
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, StandardNormal};
use rayon::prelude::*;
use std::io::Write;

/// Session-level simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SessionSettings {
    /// Total pulses sent.
    pub n_pulses: u64,
    /// Pulses per transmittance bin.
    pub bin_size: u64,
    /// Session seed; bins derive their streams from it.
    pub seed: u64,
    /// Relative rms error of the probe's transmittance estimate; 0 makes
    /// the estimate exact.
    pub probe_noise: f64,
}

impl Default for SessionSettings {
    fn default() -> Self {
        Self {
            n_pulses: 100_000_000,
            bin_size: 6250,
            seed: 1,
            probe_noise: 0.0,
        }
    }
}

/// Everything recorded for one transmittance bin. Counts are kept per sent
/// polarization (H, V, D, A) and decoy so detector-level effects stay
/// visible; [`BinRecord::counts`] folds them into per-basis tallies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinRecord {
    pub index: u64,
    /// Transmittance the channel actually had during the bin.
    pub eta_true: f64,
    /// Transmittance the classical probe estimated.
    pub eta_estimated: f64,
    /// Pulses sent in the bin (the last bin may be short).
    pub pulses: u64,
    /// Sifted detections per [sent polarization][decoy].
    pub clicks: [[u32; 3]; 4],
    /// Sifted errors per [sent polarization][decoy].
    pub errors: [[u32; 3]; 4],
}

impl BinRecord {
    pub fn counts(&self) -> SiftedCounts {
        let mut c = SiftedCounts::default();
        for k in 0..3 {
            c.n_x[k] = (self.clicks[0][k] + self.clicks[1][k]) as f64;
            c.m_x[k] = (self.errors[0][k] + self.errors[1][k]) as f64;
            c.n_z[k] = (self.clicks[2][k] + self.clicks[3][k]) as f64;
            c.m_z[k] = (self.errors[2][k] + self.errors[3][k]) as f64;
        }
        c
    }
}

/// A complete simulated session: per-bin records, aggregate counts, and an
/// echo of every parameter that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionLog {
    pub bins: Vec<BinRecord>,
    pub totals: SiftedCounts,
    pub channel: ChannelParams,
    pub state: ProtocolState,
    pub rx: ReceiverModel,
    pub settings: SessionSettings,
}

/// Draw from Binomial(n, p) with the probability clamped into [0, 1].
fn binomial<R: Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(n, p)
        .expect("probability clamped")
        .sample(rng)
}

/// Simulate every detection category of one bin at fixed transmittance.
fn simulate_bin_counts<R: Rng>(
    eta: f64,
    state: &ProtocolState,
    rx: &ReceiverModel,
    pulses: u64,
    rng: &mut R,
) -> ([[u32; 3]; 4], [[u32; 3]; 4]) {
    let mut clicks = [[0u32; 3]; 4];
    let mut errors = [[0u32; 3]; 4];
    for basis in [Basis::X, Basis::Z] {
        // sender basis prob * receiver basis prob * fair bit choice
        let sift = state.basis_prob(basis) * rx.basis_prob(basis) * 0.5;
        for pol in basis.detectors() {
            for k in 0..3 {
                let n_cat = binomial(rng, pulses, state.p_mu[k] * sift);
                if n_cat == 0 {
                    continue;
                }
                let p_correct = click_probability(state.mu[k], eta, rx, pol);
                let p_wrong = error_probability(state.mu[k], eta, rx, pol);

                // multinomial over (both, correct-only, wrong-only, none)
                // via sequential conditional binomials
                let p_both = p_correct * p_wrong;
                let p_correct_only = p_correct * (1.0 - p_wrong);
                let p_wrong_only = p_wrong * (1.0 - p_correct);

                let n_both = binomial(rng, n_cat, p_both);
                let rest = n_cat - n_both;
                let n_correct = binomial(
                    rng,
                    rest,
                    p_correct_only / (1.0 - p_both).max(f64::MIN_POSITIVE),
                );
                let rest = rest - n_correct;
                let n_wrong = binomial(
                    rng,
                    rest,
                    p_wrong_only / (1.0 - p_both - p_correct_only).max(f64::MIN_POSITIVE),
                );

                let double_as_error = binomial(rng, n_both, 0.5);
                clicks[pol.index()][k] += (n_both + n_correct + n_wrong) as u32;
                errors[pol.index()][k] += (n_wrong + double_as_error) as u32;
            }
        }
    }
    (clicks, errors)
}

fn simulate_one_bin(
    index: u64,
    pulses: u64,
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    settings: &SessionSettings,
) -> BinRecord {
    let mut rng = ChaCha12Rng::seed_from_u64(settings.seed);
    rng.set_stream(index + 1);

    let eta_true = sample_transmittance(channel, &mut rng);
    let eta_estimated = if settings.probe_noise > 0.0 {
        let rel: f64 = rng.sample::<f64, _>(StandardNormal) * settings.probe_noise;
        (eta_true * (1.0 + rel)).clamp(1e-12, 1.0)
    } else {
        eta_true
    };
    let (clicks, errors) = simulate_bin_counts(eta_true, state, rx, pulses, &mut rng);
    BinRecord {
        index,
        eta_true,
        eta_estimated,
        pulses,
        clicks,
        errors,
    }
}

/// Simulate a full session. Bins run concurrently; output is deterministic
/// for a fixed seed regardless of the worker count.
pub fn simulate_session(
    channel: &ChannelParams,
    state: &ProtocolState,
    rx: &ReceiverModel,
    settings: &SessionSettings,
) -> SessionLog {
    assert!(
        settings.bin_size >= 1 && settings.n_pulses >= settings.bin_size,
        "need n_pulses >= bin_size >= 1"
    );
    let full_bins = settings.n_pulses / settings.bin_size;
    let remainder = settings.n_pulses % settings.bin_size;
    let n_bins = full_bins + u64::from(remainder > 0);

    let bins: Vec<BinRecord> = (0..n_bins)
        .into_par_iter()
        .map(|i| {
            let pulses = if i < full_bins {
                settings.bin_size
            } else {
                remainder
            };
            simulate_one_bin(i, pulses, channel, state, rx, settings)
        })
        .collect();

    let mut totals = SiftedCounts::default();
    for bin in &bins {
        totals.add(&bin.counts());
    }
    SessionLog {
        bins,
        totals,
        channel: *channel,
        state: *state,
        rx: rx.clone(),
        settings: *settings,
    }
}

/// Sum the counts of every bin whose transmittance (estimated by the probe,
/// or true, per `use_estimated`) reaches `eta_th`. Returns the summed
/// counts and the number of pulses in the surviving bins.
pub fn postselect(log: &SessionLog, eta_th: f64, use_estimated: bool) -> (SiftedCounts, u64) {
    let mut counts = SiftedCounts::default();
    let mut n_post = 0u64;
    for bin in &log.bins {
        let eta = if use_estimated {
            bin.eta_estimated
        } else {
            bin.eta_true
        };
        if eta >= eta_th {
            counts.add(&bin.counts());
            n_post += bin.pulses;
        }
    }
    (counts, n_post)
}

/// Distill the post-selected counts (probe-estimated transmittance) and
/// report the rate relative to every pulse sent in the session.
pub fn empirical_key_rate(log: &SessionLog, eta_th: f64, sec: &SecurityParams) -> SelectionOutcome {
    let (counts, n_post) = postselect(log, eta_th, true);
    let n_total = log.settings.n_pulses as f64;
    let breakdown = key_length(&counts, &log.state, sec);

    // pulse-weighted mean transmittance of the surviving bins
    let (mut weighted, mut pulses) = (0.0, 0u64);
    for bin in &log.bins {
        if bin.eta_estimated >= eta_th {
            weighted += bin.eta_true * bin.pulses as f64;
            pulses += bin.pulses;
        }
    }
    let eta_mean = if pulses > 0 {
        weighted / pulses as f64
    } else {
        eta_th
    };

    SelectionOutcome {
        eta_th,
        survival: n_post as f64 / n_total,
        eta_mean,
        n_post,
        ell: breakdown.ell,
        rate: breakdown.ell as f64 / n_total,
    }
}

impl SessionLog {
    /// Columnar text export, one bin per row: index, true and estimated
    /// transmittance, then 24 count columns (clicks and errors per sent
    /// polarization H, V, D, A and decoy intensity).
    pub fn write_columnar<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        writeln!(
            w,
            "# session bins: n_pulses={} bin_size={} seed={} probe_noise={}",
            self.settings.n_pulses,
            self.settings.bin_size,
            self.settings.seed,
            self.settings.probe_noise
        )?;
        writeln!(
            w,
            "# channel: eta0={} sigma={}",
            self.channel.eta0, self.channel.sigma
        )?;
        writeln!(
            w,
            "# columns: index eta_true eta_estimated then clicks,errors per \
             polarization (H V D A) and decoy (mu1 mu2 mu3)"
        )?;
        for bin in &self.bins {
            write!(w, "{} {} {}", bin.index, bin.eta_true, bin.eta_estimated)?;
            for pol in 0..4 {
                for k in 0..3 {
                    write!(w, " {} {}", bin.clicks[pol][k], bin.errors[pol][k])?;
                }
            }
            writeln!(w)?;
        }
        Ok(())
    }
}
