//! Reference parameter sets: the measured receiver used by the bundled
//! studies, sender states pre-optimized for it at the five reference loss
//! values, and default security parameters.

use crate::channel::ChannelParams;
use crate::detection::{DetectorNoise, ProtocolState, ReceiverModel};
use crate::error::{Error, Result};
use crate::finitekey::SecurityParams;

/// Mean channel losses (dB) the reference sender states were optimized for.
pub const REFERENCE_LOSSES_DB: [u32; 5] = [11, 13, 15, 17, 19];

/// The reference InGaAs SPAD receiver: per-detector background yields and
/// afterpulse slopes from test measurements, 42% receiver optics
/// transmission, 10% detector efficiency, 0.3% misalignment, passive 50:50
/// basis choice.
pub fn receiver() -> ReceiverModel {
    ReceiverModel::new(
        [
            DetectorNoise {
                y0: 7.6e-6,
                b: 2.6e-4,
            }, // H
            DetectorNoise {
                y0: 3.1e-5,
                b: 1.8e-4,
            }, // V
            DetectorNoise {
                y0: 6.7e-5,
                b: 2.7e-4,
            }, // D
            DetectorNoise {
                y0: 6.7e-5,
                b: 1.8e-4,
            }, // A
        ],
        0.42,
        0.1,
        0.003,
        0.5,
    )
    .expect("reference receiver parameters are valid")
}

/// A receiver with identical noise on all four detectors and no afterpulse
/// slope; used by the detector-quality improvement study.
pub fn uniform_noise_receiver(y0: f64, eta_d: f64) -> Result<ReceiverModel> {
    ReceiverModel::new([DetectorNoise::new(y0, 0.0)?; 4], 0.42, eta_d, 0.003, 0.5)
}

/// Sender states pre-optimized for the reference receiver at sigma = 0.9 and
/// the given mean loss. Columns: q_x, P_mu1, P_mu2, mu1, mu2; the vacuum
/// decoy is fixed at mu3 = 0.002 with P_mu3 = 1 - P_mu1 - P_mu2.
pub fn optimized_state_for_loss_db(loss_db: u32) -> Result<ProtocolState> {
    let (q_x, p1, p2, mu1, mu2) = match loss_db {
        11 => (0.904, 0.660, 0.215, 0.56, 0.225),
        13 => (0.879, 0.617, 0.244, 0.56, 0.23),
        15 => (0.844, 0.552, 0.287, 0.56, 0.23),
        17 => (0.789, 0.460, 0.352, 0.54, 0.24),
        19 => (0.683, 0.319, 0.439, 0.54, 0.245),
        _ => {
            return Err(Error::domain(format!(
                "no reference state for {loss_db} dB (have {REFERENCE_LOSSES_DB:?})"
            )))
        }
    };
    ProtocolState::with_closure(q_x, p1, p2, mu1, mu2, 0.002)
}

/// The turbulent channel the reference states assume: sigma = 0.9 at the
/// given mean loss.
pub fn channel_for_loss_db(loss_db: f64) -> Result<ChannelParams> {
    ChannelParams::from_loss_db(loss_db, 0.9)
}

/// Default security parameters: eps_sec = 1e-10, eps_cor = 1e-15,
/// error-correction efficiency 1.16, 3e10 pulses per session.
pub fn security() -> SecurityParams {
    SecurityParams::new(1e-10, 1e-15, 1.16, 3e10).expect("reference security parameters are valid")
}
