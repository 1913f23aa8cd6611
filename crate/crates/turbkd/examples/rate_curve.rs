//! Asymptotic rate versus transmittance, the critical transmittance below
//! which no key exists, and how close to linear the curve runs above it.
//!
//! ```bash
//! cargo run --example rate_curve
//! ```

use turbkd::asymptotic::{critical_transmittance, gllp_rate, linear_fit, RateCurve};
use turbkd::presets;

fn main() {
    let state = presets::optimized_state_for_loss_db(15).unwrap();
    let rx = presets::receiver();
    let f_ec = 1.16;

    let cr = critical_transmittance(&state, &rx, f_ec).unwrap();
    println!("critical transmittance: {cr:.6}");
    println!("(prefixing the selection threshold here needs no channel statistics)");

    println!("\n  eta      R(eta) bits/pulse");
    for i in 0..=10 {
        let eta = 0.01 + 0.099 * i as f64;
        println!("  {eta:<7.3}  {:.6e}", gllp_rate(eta, &state, &rx, f_ec));
    }

    let curve = RateCurve::sample(&state, &rx, f_ec, cr, 1.0, 200).unwrap();
    let fit = linear_fit(&curve, cr).unwrap();
    println!(
        "\nlinear fit above the cutoff: R ~ {:.4e} * eta {:+.4e}, worst deviation {:.2}% of the curve maximum",
        fit.alpha,
        fit.beta,
        100.0 * fit.max_residual
    );
}
