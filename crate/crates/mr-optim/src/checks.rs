//! Runnable checker suites for the convergence statements: the per-epoch
//! descent inequality, the averaged-gradient bound, the sampled-variant
//! Monte-Carlo bound, and the two linear-case bounds (clean-probability
//! floor and error decay). The CLI `check` subcommand and the acceptance
//! suite both drive these.

use crate::error::Result;
use crate::illustrative::{
    bounded_p_lower, linear_mr_ls_run, make_setup, wls_error_decay_bound, OneDKind, OneDSetup,
};
use crate::losses::ParameterVector;
use crate::optim::{
    convergence_bound_check, descent_check, mr_gd_run, mr_sampled_sgd_run, sampled_bound_step_size,
    OptimConfig, QuadraticEnsemble,
};
use crate::tensor::SeededRng;

/// Result of one checked instance.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub label: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(label: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckOutcome {
            label: label.into(),
            passed,
            detail: detail.into(),
        }
    }
}

pub fn all_passed(outcomes: &[CheckOutcome]) -> bool {
    outcomes.iter().all(|o| o.passed)
}

/// Random smooth ensemble (N <= 20, dims <= 5) with its exact smoothness
/// constant and a random start; shared by the descent and bound suites.
fn random_instance(seed: u64, index: u64) -> (QuadraticEnsemble, f64, ParameterVector) {
    let mut rng = SeededRng::new(seed).substream(index);
    let n = 2 + rng.range(19);
    let dim = 1 + rng.range(5);
    let ensemble = QuadraticEnsemble::random(n, dim, &mut rng);
    let beta = ensemble.beta();
    let theta0: Vec<f64> = (0..dim).map(|_| 2.0 * rng.normal()).collect();
    (ensemble, beta, ParameterVector::flat(theta0))
}

fn gd_config(beta: f64, epochs: usize) -> OptimConfig {
    OptimConfig {
        alpha: 1.0 / beta,
        eta: 0.01,
        batch_size: 1,
        epochs,
        momentum: 0.0,
        shuffle_seed: 0,
        lr_decay: None,
    }
}

/// Per-epoch descent inequality on random smooth ensembles at `alpha = 1/beta`.
pub fn descent_suite(instances: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::with_capacity(instances);
    for k in 0..instances {
        let (ensemble, beta, theta0) = random_instance(seed, k as u64);
        let trace = mr_gd_run(&gd_config(beta, 100), &ensemble, &theta0)?;
        let violations = descent_check(&trace, beta)?;
        outcomes.push(CheckOutcome::new(
            format!("descent[{k}]"),
            violations.is_empty(),
            if violations.is_empty() {
                "no violations over 100 epochs".to_string()
            } else {
                format!("violating epochs: {violations:?}")
            },
        ));
    }
    Ok(outcomes)
}

/// Averaged-gradient bound on the same ensembles: nonnegative margin at the
/// short horizon, and at T = 10^4 the average stays within 10x of the
/// bound's value there.
pub fn thm1_suite(instances: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut outcomes = Vec::with_capacity(2 * instances);
    for k in 0..instances {
        let (ensemble, beta, theta0) = random_instance(seed, k as u64);
        let trace = mr_gd_run(&gd_config(beta, 100), &ensemble, &theta0)?;
        let margin = convergence_bound_check(&trace, beta, 0.0)?;
        outcomes.push(CheckOutcome::new(
            format!("bound-margin[{k}]"),
            margin >= -1e-9,
            format!("margin {margin:.3e}"),
        ));

        let long = mr_gd_run(&gd_config(beta, 10_000), &ensemble, &theta0)?;
        let t = long.reports.len() - 1;
        let avg_sq = long.reports[..t]
            .iter()
            .map(|r| r.grad_norm * r.grad_norm)
            .sum::<f64>()
            / t as f64;
        let bound = 2.0 * beta / t as f64 * long.reports[0].losses.mean();
        outcomes.push(CheckOutcome::new(
            format!("bound-decay[{k}]"),
            avg_sq < 10.0 * bound,
            format!("avg grad^2 {avg_sq:.3e} vs 10x bound {:.3e}", 10.0 * bound),
        ));
    }
    Ok(outcomes)
}

/// Monte-Carlo check of the sampled variant on a unit-ball quadratic family
/// with exact constants: the seed-mean of the time-averaged squared gradient
/// must stay within `1 + slack` of `G sqrt(2 beta B / T)`.
pub fn thm2_suite(seeds: usize, steps: usize, slack: f64) -> Result<Vec<CheckOutcome>> {
    let radius = 1.0;
    let mut total = 0.0;
    let mut profile_bound = 0.0;
    for s in 0..seeds {
        let mut rng = SeededRng::new(777).substream(s as u64);
        let ensemble = QuadraticEnsemble::random_in_ball(10, 3, radius, &mut rng);
        let profile = ensemble.profile_in_ball(radius)?;
        let alpha = sampled_bound_step_size(&profile, steps)?;
        let cfg = OptimConfig {
            alpha,
            eta: 0.1,
            batch_size: 1,
            epochs: steps,
            momentum: 0.0,
            shuffle_seed: s as u64,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.0; 3]);
        let trace = mr_sampled_sgd_run(&cfg, &ensemble, &theta0)?;
        let t = trace.reports.len() - 1;
        total += trace.reports[..t]
            .iter()
            .map(|r| r.grad_norm * r.grad_norm)
            .sum::<f64>()
            / t as f64;
        let g = profile.lipschitz.expect("profile has G");
        let b = profile.bound.expect("profile has B");
        profile_bound = g * (2.0 * profile.beta * b / steps as f64).sqrt();
    }
    let mean = total / seeds as f64;
    let limit = profile_bound * (1.0 + slack);
    Ok(vec![CheckOutcome::new(
        format!("sampled-bound[{seeds} seeds, T={steps}]"),
        mean <= limit,
        format!("mean avg grad^2 {mean:.4e} vs bound {profile_bound:.4e} (+{:.0}% slack)", slack * 100.0),
    )])
}

/// The linear-case setup every linear checker runs on: 15 examples, a third
/// of them corrupted at magnitude 1.
pub fn reference_linear_setup(seed: u64) -> Result<OneDSetup> {
    let mut rng = SeededRng::new(seed);
    make_setup(15, 1.0 / 3.0, 1.0, OneDKind::Linear, &mut rng)
}

/// Clean-probability floor at every epoch of the reweighted WLS run.
pub fn bounded_p_suite(epochs: usize, eta: f64) -> Result<Vec<CheckOutcome>> {
    let setup = reference_linear_setup(43)?;
    let trace = linear_mr_ls_run(&setup, eta, epochs)?;
    let clean = setup.clean_indices();
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for r in &trace.records {
        let floor = bounded_p_lower(setup.n, setup.sigma, eta, setup.epsilon, setup.delta, r.mw_updates);
        for &i in &clean {
            let slackness = r.dist.get(i) - floor;
            worst = worst.min(slackness);
            if slackness < -1e-12 {
                passed = false;
            }
        }
    }
    Ok(vec![CheckOutcome::new(
        format!("bounded-p[{epochs} epochs]"),
        passed,
        format!("worst clean-probability slack {worst:.3e}"),
    )])
}

/// Error-decay bound `|theta_t - 1| <= eps exp(-eta eps^2 delta t)/(1+delta)`
/// at every epoch of the reweighted WLS run.
pub fn thm4_decay_suite(epochs: usize, eta: f64) -> Result<Vec<CheckOutcome>> {
    let setup = reference_linear_setup(43)?;
    let trace = linear_mr_ls_run(&setup, eta, epochs)?;
    let mut worst = f64::INFINITY;
    let mut passed = true;
    for r in &trace.records {
        let bound = wls_error_decay_bound(eta, setup.epsilon, setup.delta, r.mw_updates);
        let slackness = bound - (r.theta - 1.0).abs();
        worst = worst.min(slackness);
        if slackness < -1e-12 {
            passed = false;
        }
    }
    Ok(vec![CheckOutcome::new(
        format!("thm4-decay[{epochs} epochs]"),
        passed,
        format!("worst error-bound slack {worst:.3e}"),
    )])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        assert!(all_passed(&descent_suite(5, 1).unwrap()));
        assert!(all_passed(&thm2_suite(5, 200, 0.1).unwrap()));
        assert!(all_passed(&bounded_p_suite(200, 0.01).unwrap()));
        assert!(all_passed(&thm4_decay_suite(200, 0.01).unwrap()));
    }
}
