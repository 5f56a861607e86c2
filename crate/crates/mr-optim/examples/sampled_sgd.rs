//! The sampled variant: each step draws one example from the current
//! distribution and takes a plain gradient step on it. With the bound-driven
//! step size the time-averaged squared gradient obeys G sqrt(2 beta B / T).
//!
//! ```bash
//! cargo run --example sampled_sgd
//! ```

use mr_optim::losses::ParameterVector;
use mr_optim::optim::{mr_sampled_sgd_run, sampled_bound_step_size, OptimConfig, QuadraticEnsemble};
use mr_optim::tensor::SeededRng;

fn main() -> mr_optim::Result<()> {
    let steps = 1000;
    let radius = 1.0;
    let mut rng = SeededRng::new(3);
    let ensemble = QuadraticEnsemble::random_in_ball(10, 3, radius, &mut rng);
    let profile = ensemble.profile_in_ball(radius)?;
    let alpha = sampled_bound_step_size(&profile, steps)?;
    println!(
        "unit-ball quadratic family: beta = {}, G = {}, B = {}; alpha = {alpha:.5}",
        profile.beta,
        profile.lipschitz.unwrap(),
        profile.bound.unwrap()
    );

    let cfg = OptimConfig {
        alpha,
        eta: 0.1,
        batch_size: 1,
        epochs: steps,
        momentum: 0.0,
        shuffle_seed: 3,
        lr_decay: None,
    };
    let trace = mr_sampled_sgd_run(&cfg, &ensemble, &ParameterVector::flat(vec![0.0; 3]))?;

    let t = trace.reports.len() - 1;
    let avg_grad_sq = trace.reports[..t]
        .iter()
        .map(|r| r.grad_norm * r.grad_norm)
        .sum::<f64>()
        / t as f64;
    let bound = profile.lipschitz.unwrap()
        * (2.0 * profile.beta * profile.bound.unwrap() / steps as f64).sqrt();
    println!("time-averaged ||grad F||^2 over {steps} steps: {avg_grad_sq:.5}");
    println!("theoretical bound G sqrt(2 beta B / T):        {bound:.5}");
    println!(
        "weighted loss {:.5} -> {:.5}",
        trace.reports[0].weighted_loss,
        trace.final_report().weighted_loss
    );
    Ok(())
}
