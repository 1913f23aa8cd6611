//! Lognormal channel statistics: density, survival fractions, truncated
//! means, sampling, and the plane-wave scintillation formula.
//!
//! ```bash
//! cargo run --example channel_statistics
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use turbkd::channel::{
    pdtc_density, sample_transmittance, sigma_from_path, survival_fraction, truncated_mean,
    ChannelParams, TurbulencePath,
};

fn main() {
    // 3 km horizontal path at 1550 nm under moderate turbulence
    let path = TurbulencePath::new(5e-15, 1550e-9, 3000.0).unwrap();
    println!(
        "plane-wave sigma for Cn2 = 5e-15, 3 km: {:.4}",
        sigma_from_path(&path)
    );

    // 15 dB mean loss, sigma = 0.9
    let channel = ChannelParams::from_loss_db(15.0, 0.9).unwrap();
    println!(
        "\nchannel: eta0 = {:.5}, sigma = {}",
        channel.eta0, channel.sigma
    );

    println!("\n  eta      density   survival(eta)  <eta | eta' >= eta>");
    for eta in [0.005, 0.0275, 0.05, 0.1, 0.2] {
        println!(
            "  {eta:<7}  {:>8.3}  {:>12.5}  {:>12.5}",
            pdtc_density(eta, &channel).unwrap(),
            survival_fraction(eta, &channel).unwrap(),
            truncated_mean(eta, &channel).unwrap(),
        );
    }

    // sampling agrees with the quadrature integrals
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let n = 200_000;
    let mut kept = 0u32;
    let mut sum = 0.0;
    for _ in 0..n {
        let eta = sample_transmittance(&channel, &mut rng);
        sum += eta;
        if eta >= 0.0275 {
            kept += 1;
        }
    }
    println!(
        "\n{n} draws: mean {:.5} (analytic {:.5}), fraction above 0.0275 = {:.4} (analytic {:.4})",
        sum / n as f64,
        truncated_mean(0.0, &channel).unwrap(),
        kept as f64 / n as f64,
        survival_fraction(0.0275, &channel).unwrap() / survival_fraction(0.0, &channel).unwrap(),
    );
}
