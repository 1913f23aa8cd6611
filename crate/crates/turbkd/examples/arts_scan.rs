//! Adaptive threshold scanning: sweep transmittance cutoffs over a
//! 15 dB turbulent channel and watch the finite-size rate rise, peak, and
//! fall as selection trades sample size for signal-to-noise ratio.
//!
//! ```bash
//! cargo run --example arts_scan
//! ```

use turbkd::presets;
use turbkd::selection::{arts_scan, default_grid};

fn main() {
    let channel = presets::channel_for_loss_db(15.0).unwrap();
    let state = presets::optimized_state_for_loss_db(15).unwrap();
    let rx = presets::receiver();
    let sec = presets::security();

    let grid = default_grid();
    let scan = arts_scan(&grid, &channel, &state, &rx, &sec).unwrap();

    println!("  eta_th   survival   <eta>     key bits     rate");
    for o in scan.outcomes.iter().step_by(2) {
        let marker = if (o.eta_th - scan.best_outcome().eta_th).abs() < 1e-12 {
            " <- best"
        } else {
            ""
        };
        println!(
            "  {:<7.4}  {:<9.4}  {:<8.4}  {:>10}  {:.4e}{marker}",
            o.eta_th, o.survival, o.eta_mean, o.ell, o.rate
        );
    }

    let best = scan.best_outcome();
    let unselected = &scan.outcomes[0];
    println!(
        "\nbest cutoff {:.4} beats no selection by {:.1}x ({:.4e} vs {:.4e})",
        best.eta_th,
        best.rate / unselected.rate,
        best.rate,
        unselected.rate
    );
}
