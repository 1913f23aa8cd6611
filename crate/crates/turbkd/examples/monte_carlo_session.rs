//! Simulate a full session bin by bin, post-select on the recorded
//! transmittances, and compare the empirical key rates against the
//! analytic expected-count pipeline.
//!
//! Runs a 3e9-pulse session (a tenth of the full 3e10) to stay quick;
//! crank `N` up for tighter agreement.
//!
//! ```bash
//! cargo run --example monte_carlo_session
//! ```

use turbkd::montecarlo::{empirical_key_rate, simulate_session, SessionSettings};
use turbkd::presets;
use turbkd::selection::finite_selected_rate;

fn main() {
    let channel = presets::channel_for_loss_db(13.0).unwrap();
    let state = presets::optimized_state_for_loss_db(13).unwrap();
    let rx = presets::receiver();
    let sec = presets::security().with_n_total(3e9);

    let settings = SessionSettings {
        n_pulses: 3_000_000_000,
        bin_size: 6250,
        seed: 11,
        probe_noise: 0.0,
    };
    println!(
        "simulating {} pulses in {} bins...",
        settings.n_pulses,
        settings.n_pulses / settings.bin_size
    );
    let log = simulate_session(&channel, &state, &rx, &settings);

    println!("\n  eta_th   empirical rate   analytic rate");
    for i in 0..=10 {
        let t = i as f64 * 0.005;
        let empirical = empirical_key_rate(&log, t, &sec);
        let analytic = finite_selected_rate(t, &channel, &state, &rx, &sec);
        println!(
            "  {t:<7.4}  {:<15.4e}  {:.4e}",
            empirical.rate, analytic.rate
        );
    }

    let totals = &log.totals;
    println!(
        "\naggregate sifted detections: X = {:.0}, Z = {:.0} (QBER_X = {:.4})",
        totals.n_total(turbkd::Basis::X),
        totals.n_total(turbkd::Basis::Z),
        totals.qber_x()
    );
}
