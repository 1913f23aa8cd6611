//! How much loss budget does selection buy? For a detector with background
//! yield Y0 = 1e-4 and 10% efficiency, find the deepest mean loss at which
//! a 1e-8 key rate survives, with and without the transmittance cutoff.
//!
//! ```bash
//! cargo run --example improvement_study
//! ```

use turbkd::channel::ChannelParams;
use turbkd::optimizer::{optimize_state, OptimizationProblem, ThresholdPolicy};
use turbkd::presets;
use turbkd::selection::{default_grid, finite_selected_rate};

fn main() {
    let y0 = 1e-4;
    let target = 1e-8;
    let rx = presets::uniform_noise_receiver(y0, 0.1).unwrap();

    // rate with the scanned-optimal cutoff and without any cutoff, for a
    // sender state optimized (selection-aware) at each probed loss
    let rates = |loss_db: f64| -> (f64, f64) {
        let channel = ChannelParams::from_loss_db(loss_db, 0.9).unwrap();
        let problem = OptimizationProblem::new(channel, rx.clone(), presets::security())
            .with_policy(ThresholdPolicy::OptimalScan(default_grid()));
        let optimized = optimize_state(&problem, 3).unwrap();
        let unselected =
            finite_selected_rate(0.0, &channel, &optimized.state, &rx, &presets::security());
        (optimized.rate, unselected.rate)
    };

    println!("Y0 = {y0:e}, eta_d = 0.1, sigma = 0.9, N = 3e10, target rate {target:e}");
    println!("\n  loss(dB)   with cutoff    without");
    for db in [10.0, 12.0, 14.0, 16.0, 18.0] {
        let (with_sel, without) = rates(db);
        println!("  {db:<9}  {with_sel:<13.3e}  {without:.3e}");
    }

    let max_loss = |selected: bool| -> f64 {
        let (mut lo, mut hi) = (5.0, 30.0);
        while hi - lo > 0.05 {
            let mid = 0.5 * (lo + hi);
            let (w, wo) = rates(mid);
            if (if selected { w } else { wo }) >= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let (with_sel, without) = (max_loss(true), max_loss(false));
    println!(
        "\nreach at the target rate: {with_sel:.2} dB with selection vs {without:.2} dB without \
         -> {:+.2} dB of loss budget",
        with_sel - without
    );
}
