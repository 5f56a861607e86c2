//! The multiplicative-weights state machine on its own: accumulate
//! per-example losses, watch the distribution tilt toward low-loss examples,
//! and see why the log-space form shrugs off a million epochs.
//!
//! ```bash
//! cargo run --example reweighting_basics
//! ```

use mr_optim::reweighting::ReweightState;
use mr_optim::tensor::SeededRng;

fn main() -> mr_optim::Result<()> {
    let eta = 0.5;
    let mut state = ReweightState::new_uniform(4, eta)?;
    println!("four examples, eta = {eta}; example 3 keeps losing:");
    println!("epoch  p0      p1      p2      p3");
    for epoch in 0..=8 {
        let p = state.normalize();
        println!(
            "{epoch:>5}  {:.4}  {:.4}  {:.4}  {:.4}",
            p.get(0),
            p.get(1),
            p.get(2),
            p.get(3)
        );
        state = state.accumulate(&[0.1, 0.1, 0.3, 1.5])?;
    }

    // Changing the step size re-derives the distribution from the same
    // cumulative losses.
    let hotter = state.set_eta(2.0)?;
    println!(
        "\nsame losses, eta 0.5 -> 2.0: p3 drops from {:.5} to {:.7}",
        state.normalize().get(3),
        hotter.normalize().get(3)
    );

    // The literal weights exp(-eta * cum_loss) would have underflowed long
    // before this; the log-space distribution is still a valid simplex.
    let mut extreme = ReweightState::new_uniform(3, 1.0)?;
    extreme = extreme.accumulate(&[0.0, 1e6, 1e7])?;
    let p = extreme.normalize();
    println!(
        "\nafter cumulative losses (0, 1e6, 1e7): p = ({:.3}, {:.3e}, {:.3e}), sum = {}",
        p.get(0),
        p.get(1),
        p.get(2),
        p.as_slice().iter().sum::<f64>()
    );

    // Sampling follows the distribution.
    let mut rng = SeededRng::new(7);
    let skewed = ReweightState::new_uniform(2, 1.0)?
        .accumulate(&[0.0, 2.0f64.ln()])?
        .normalize();
    let draws = 100_000;
    let hits = (0..draws)
        .filter(|_| skewed.sample_index(&mut rng) == 0)
        .count();
    println!(
        "\np = (2/3, 1/3): example 0 drawn {} / {draws} times ({:.4})",
        hits,
        hits as f64 / draws as f64
    );
    Ok(())
}
