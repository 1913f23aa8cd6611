//! Numerical optimization of the sender's free state parameters
//! {q_x, P_mu1, P_mu2, mu1, mu2} against an assumed channel, and the
//! dominance check against the bundled pre-optimized state.
//!
//! ```bash
//! cargo run --example optimize_state
//! ```

use turbkd::optimizer::{objective, optimize_state, OptimizationProblem};
use turbkd::presets;

fn main() {
    let channel = presets::channel_for_loss_db(15.0).unwrap();
    let problem = OptimizationProblem::new(channel, presets::receiver(), presets::security());

    let reference = presets::optimized_state_for_loss_db(15).unwrap();
    let reference_rate = objective(&reference, &problem);
    println!(
        "reference state:  q_x = {:.3}, P = [{:.3}, {:.3}, {:.3}], mu = [{:.3}, {:.3}], rate {:.4e}",
        reference.q_x,
        reference.p_mu[0],
        reference.p_mu[1],
        reference.p_mu[2],
        reference.mu[0],
        reference.mu[1],
        reference_rate
    );

    let result = optimize_state(&problem, 1).unwrap();
    let s = result.state;
    println!(
        "optimized state:  q_x = {:.3}, P = [{:.3}, {:.3}, {:.3}], mu = [{:.3}, {:.3}], rate {:.4e}",
        s.q_x, s.p_mu[0], s.p_mu[1], s.p_mu[2], s.mu[0], s.mu[1], result.rate
    );
    println!(
        "{} objective evaluations; improvement over the reference point: {:+.2}%",
        result.evaluations,
        100.0 * (result.rate / reference_rate - 1.0)
    );
}
