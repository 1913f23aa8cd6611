//! Analytic receiver response.
//!
//! The receiver measures polarization with four gated single-photon
//! detectors: H and V behind one polarizing beam splitter (the rectilinear,
//! key-generating basis X) and D and A behind the other (the diagonal basis
//! Z). A passive 50:50 beam splitter picks the measurement basis.
//!
//! For a weak coherent pulse of intensity `mu` sent as polarization `i` over
//! a channel of transmittance `eta`, the aligned detector clicks with
//!
//! ```text
//! P_click = 1 - (1 - p_bg) * exp(-eta_sys * mu)
//! ```
//!
//! and the orthogonal detector (an error) clicks with
//!
//! ```text
//! P_err = 1 - (1 - p_bg_perp) * exp(-e_mis * eta_sys * mu)
//! ```
//!
//! where `eta_sys = eta * eta_bob * eta_d` is the total transmission to the
//! detector and `e_mis` the optical misalignment. Background and afterpulse
//! clicks enter through the transmittance-linear model
//! `p_bg(eta) = Y0 + b * eta`, with per-detector `Y0` and `b` taken from
//! test measurements.
//!
//! Detector dead-time is not modeled beyond this linear background term.
//! Expected sifted counts average the two polarizations of a basis with
//! equal weight (the sender's bit values are unbiased), and no double-click
//! correction is applied to the analytic model; the Monte Carlo module
//! resolves double clicks by assigning a random bit.

use crate::error::{Error, Result};

/// Detector labels, one per polarization state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detector {
    H,
    V,
    D,
    A,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::H, Detector::V, Detector::D, Detector::A];

    /// The detector measuring the orthogonal polarization in the same basis.
    pub fn orthogonal(self) -> Detector {
        match self {
            Detector::H => Detector::V,
            Detector::V => Detector::H,
            Detector::D => Detector::A,
            Detector::A => Detector::D,
        }
    }

    pub fn basis(self) -> Basis {
        match self {
            Detector::H | Detector::V => Basis::X,
            Detector::D | Detector::A => Basis::Z,
        }
    }

    pub(crate) fn index(self) -> usize {
        match self {
            Detector::H => 0,
            Detector::V => 1,
            Detector::D => 2,
            Detector::A => 3,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Detector::H => "H",
            Detector::V => "V",
            Detector::D => "D",
            Detector::A => "A",
        }
    }
}

/// Measurement bases: X is the rectilinear (key) basis, Z the diagonal one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    X,
    Z,
}

impl Basis {
    /// The two detectors (sent polarizations) belonging to this basis.
    pub fn detectors(self) -> [Detector; 2] {
        match self {
            Basis::X => [Detector::H, Detector::V],
            Basis::Z => [Detector::D, Detector::A],
        }
    }
}

/// Per-detector noise: dark/background yield per gate plus the
/// intensity-induced afterpulse slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorNoise {
    /// Background yield per gate at zero transmittance.
    pub y0: f64,
    /// Afterpulse slope per unit channel transmittance.
    pub b: f64,
}

impl DetectorNoise {
    pub fn new(y0: f64, b: f64) -> Result<Self> {
        if !(y0 >= 0.0 && b >= 0.0 && y0 + b <= 1.0) {
            return Err(Error::domain(format!(
                "detector noise (y0 = {y0}, b = {b}) outside [0, 1]"
            )));
        }
        Ok(Self { y0, b })
    }
}

/// The receiver: four detector noise records plus shared optics.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverModel {
    /// Noise per detector, indexed H, V, D, A.
    pub noise: [DetectorNoise; 4],
    /// Transmission of the receiver optics (beam splitters, fiber links).
    pub eta_bob: f64,
    /// Detector quantum efficiency (identical for all four detectors).
    pub eta_d: f64,
    /// Optical misalignment probability.
    pub e_mis: f64,
    /// Probability that the passive beam splitter selects the X basis.
    pub bob_x_prob: f64,
}

impl ReceiverModel {
    pub fn new(
        noise: [DetectorNoise; 4],
        eta_bob: f64,
        eta_d: f64,
        e_mis: f64,
        bob_x_prob: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("eta_bob", eta_bob),
            ("eta_d", eta_d),
            ("e_mis", e_mis),
            ("bob_x_prob", bob_x_prob),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            noise,
            eta_bob,
            eta_d,
            e_mis,
            bob_x_prob,
        })
    }

    pub fn noise_of(&self, det: Detector) -> DetectorNoise {
        self.noise[det.index()]
    }

    /// Total transmission from the channel input to any detector.
    pub fn eta_sys(&self, eta: f64) -> f64 {
        eta * self.eta_bob * self.eta_d
    }

    /// Probability that the beam splitter routes a pulse into `basis`.
    pub fn basis_prob(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.bob_x_prob,
            Basis::Z => 1.0 - self.bob_x_prob,
        }
    }
}

/// The sender's transmit configuration: basis bias, decoy probabilities and
/// decoy intensities (signal, weak, vacuum ordering).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolState {
    /// Probability of encoding in the X basis.
    pub q_x: f64,
    /// Probabilities of the three decoy intensities; sums to 1.
    pub p_mu: [f64; 3],
    /// Mean photon numbers of the three decoys; mu1 > mu2 + mu3, mu2 > mu3.
    pub mu: [f64; 3],
}

impl ProtocolState {
    pub fn new(q_x: f64, p_mu: [f64; 3], mu: [f64; 3]) -> Result<Self> {
        let state = Self { q_x, p_mu, mu };
        state.validate()?;
        Ok(state)
    }

    /// Construct with the vacuum-decoy probability closed as
    /// `p3 = 1 - p1 - p2`.
    pub fn with_closure(q_x: f64, p1: f64, p2: f64, mu1: f64, mu2: f64, mu3: f64) -> Result<Self> {
        Self::new(q_x, [p1, p2, 1.0 - p1 - p2], [mu1, mu2, mu3])
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q_x) {
            return Err(Error::domain(format!("q_x = {} outside [0, 1]", self.q_x)));
        }
        for p in self.p_mu {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::domain(format!(
                    "decoy probability {p} outside [0, 1]"
                )));
            }
        }
        let sum: f64 = self.p_mu.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("decoy probabilities sum to {sum}")));
        }
        let [mu1, mu2, mu3] = self.mu;
        if !(mu3 >= 0.0 && mu2 > mu3 && mu1 > mu2 + mu3) {
            return Err(Error::domain(format!(
                "decoy ordering violated: mu = {:?} (need mu1 > mu2 + mu3 and mu2 > mu3 >= 0)",
                self.mu
            )));
        }
        Ok(())
    }

    /// Probability that a pulse is sent in `basis`.
    pub fn basis_prob(&self, basis: Basis) -> f64 {
        match basis {
            Basis::X => self.q_x,
            Basis::Z => 1.0 - self.q_x,
        }
    }
}

/// Sifted detection and error tallies per basis and decoy intensity.
/// Real-valued so the same type carries analytic expectations and Monte
/// Carlo integers.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SiftedCounts {
    pub n_x: [f64; 3],
    pub m_x: [f64; 3],
    pub n_z: [f64; 3],
    pub m_z: [f64; 3],
}

impl SiftedCounts {
    pub fn detections(&self, basis: Basis) -> [f64; 3] {
        match basis {
            Basis::X => self.n_x,
            Basis::Z => self.n_z,
        }
    }

    pub fn errors(&self, basis: Basis) -> [f64; 3] {
        match basis {
            Basis::X => self.m_x,
            Basis::Z => self.m_z,
        }
    }

    pub fn n_total(&self, basis: Basis) -> f64 {
        self.detections(basis).iter().sum()
    }

    pub fn m_total(&self, basis: Basis) -> f64 {
        self.errors(basis).iter().sum()
    }

    /// Observed error rate in the X basis, `m_X / n_X`.
    pub fn qber_x(&self) -> f64 {
        let n = self.n_total(Basis::X);
        if n > 0.0 {
            self.m_total(Basis::X) / n
        } else {
            0.0
        }
    }

    pub fn add(&mut self, other: &SiftedCounts) {
        for k in 0..3 {
            self.n_x[k] += other.n_x[k];
            self.m_x[k] += other.m_x[k];
            self.n_z[k] += other.n_z[k];
            self.m_z[k] += other.m_z[k];
        }
    }
}

/// Background click probability at transmittance `eta`:
/// `min(y0 + b * eta, 1)`.
pub fn background_probability(noise: DetectorNoise, eta: f64) -> f64 {
    (noise.y0 + noise.b * eta).min(1.0)
}

/// `1 - (1 - p_bg) e^(-x)`, evaluated as `p_bg - expm1(-x) (1 - p_bg)` so
/// tiny probabilities keep full relative precision.
fn click_formula(p_bg: f64, x: f64) -> f64 {
    p_bg - (-x).exp_m1() * (1.0 - p_bg)
}

/// Probability that the detector aligned with the sent polarization clicks.
pub fn click_probability(mu_k: f64, eta: f64, rx: &ReceiverModel, det: Detector) -> f64 {
    let p_bg = background_probability(rx.noise_of(det), eta);
    click_formula(p_bg, rx.eta_sys(eta) * mu_k)
}

/// Probability that the detector orthogonal to the sent polarization `det`
/// clicks (misalignment leakage plus that detector's own background).
pub fn error_probability(mu_k: f64, eta: f64, rx: &ReceiverModel, det: Detector) -> f64 {
    let perp = det.orthogonal();
    let p_bg = background_probability(rx.noise_of(perp), eta);
    click_formula(p_bg, rx.e_mis * rx.eta_sys(eta) * mu_k)
}

/// Expected sifted counts after `n_pulses` pulses through a static channel
/// of transmittance `eta_eff`.
///
/// Per basis and decoy: `n_pulses * P_k * q_basis(sender) *
/// q_basis(receiver)` pulses are sifted; of those, the detection
/// probability averages `click + error` over the two polarizations and the
/// error probability averages `error` alone.
pub fn expected_counts(
    state: &ProtocolState,
    rx: &ReceiverModel,
    eta_eff: f64,
    n_pulses: f64,
) -> SiftedCounts {
    let mut counts = SiftedCounts::default();
    for basis in [Basis::X, Basis::Z] {
        let sift = state.basis_prob(basis) * rx.basis_prob(basis);
        for k in 0..3 {
            let base = n_pulses * state.p_mu[k] * sift;
            let (mut det_sum, mut err_sum) = (0.0, 0.0);
            for pol in basis.detectors() {
                let click = click_probability(state.mu[k], eta_eff, rx, pol);
                let err = error_probability(state.mu[k], eta_eff, rx, pol);
                det_sum += click + err;
                err_sum += err;
            }
            let n = base * det_sum / 2.0;
            let m = base * err_sum / 2.0;
            match basis {
                Basis::X => {
                    counts.n_x[k] = n;
                    counts.m_x[k] = m;
                }
                Basis::Z => {
                    counts.n_z[k] = n;
                    counts.m_z[k] = m;
                }
            }
        }
    }
    counts
}
