//! How stable is the optimal cutoff? Scan it against the number of sent
//! pulses and against the channel parameters. The punchline: across the
//! regime where selection matters, the optimum barely moves, so a
//! predetermined threshold is nearly optimal even with imperfect channel
//! knowledge.
//!
//! ```bash
//! cargo run --example threshold_study
//! ```

use turbkd::channel::ChannelParams;
use turbkd::optimizer::{optimize_state, OptimizationProblem};
use turbkd::presets;
use turbkd::selection::arts_scan;

fn optimum(channel: ChannelParams, n_pulses: f64, seed: u64) -> (f64, f64) {
    let sec = presets::security().with_n_total(n_pulses);
    let rx = presets::receiver();
    let problem = OptimizationProblem::new(channel, rx.clone(), sec).with_starts(8);
    let state = optimize_state(&problem, seed).unwrap().state;
    let fine: Vec<f64> = (0..=120).map(|i| i as f64 * 5e-4).collect();
    let scan = arts_scan(&fine, &channel, &state, &rx, &sec).unwrap();
    (scan.best_outcome().eta_th, scan.best_outcome().rate)
}

fn main() {
    println!("optimal cutoff vs sent pulses (15 dB, sigma = 0.9):");
    for n in [1e9, 3e9, 1e10, 3e10, 1e11] {
        let channel = presets::channel_for_loss_db(15.0).unwrap();
        let (t, r) = optimum(channel, n, 21);
        println!("  N = {n:>6.0e}: optimal eta_th = {t:.4}, rate = {r:.3e}");
    }

    println!("\noptimal cutoff vs mean loss (N = 3e10, sigma = 0.9):");
    for db in [13.0, 14.0, 15.0, 16.0, 17.0] {
        let channel = presets::channel_for_loss_db(db).unwrap();
        let (t, r) = optimum(channel, 3e10, 22);
        println!("  {db} dB: optimal eta_th = {t:.4}, rate = {r:.3e}");
    }

    println!("\noptimal cutoff vs sigma (N = 3e10, 15 dB):");
    for sigma in [0.5, 0.7, 0.9, 1.1] {
        let channel = ChannelParams::from_loss_db(15.0, sigma).unwrap();
        let (t, r) = optimum(channel, 3e10, 23);
        println!("  sigma = {sigma}: optimal eta_th = {t:.4}, rate = {r:.3e}");
    }
}
