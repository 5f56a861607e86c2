//! The two 1D analyses: logistic regression under label flips trained with
//! full-batch reweighted GD, and linear regression under additive label
//! corruption solved by reweighted least squares.
//!
//! Both use inputs `x_i = y_i in {-1, +1}` with a corrupted index set of
//! size `round(sigma * n)`, `sigma = 1/2 - delta < 1/2`. The bound helpers
//! at the bottom evaluate the epoch/error bounds the convergence statements
//! promise, so runs can be checked against them epoch by epoch.

use crate::error::{Error, Result};
use crate::losses::{sigmoid, softplus, LossKind, LossModel, ModelKind, ParameterVector};
use crate::losses::{Examples, TargetsRef};
use crate::optim::{self, ModelOnData, OptimConfig, RunTrace};
use crate::reweighting::{ReweightState, SimplexDist};
use crate::tensor::{dot, pinv_small, Mat64, SeededRng, Vec64, DEFAULT_PINV_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OneDKind {
    Logistic,
    Linear,
}

/// Sign convention for the linear case's additive corruption.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorruptionSign {
    /// `eps_k = -y_k * eps`: the corruption opposes the label (the label-flip
    /// picture, and the adversarial worst case the analysis targets).
    OpposeLabel,
    /// Independent random signs.
    Random,
}

/// One-dimensional dataset with hidden clean labels and a corruption mask.
#[derive(Debug, Clone)]
pub struct OneDSetup {
    pub n: usize,
    /// Realized corruption fraction `|mask| / n`.
    pub sigma: f64,
    /// `1/2 - sigma`.
    pub delta: f64,
    /// Corruption magnitude (linear case).
    pub epsilon: f64,
    pub kind: OneDKind,
    /// Sorted corrupted indices.
    pub mask: Vec<usize>,
    pub x: Vec64,
    pub y: Vec64,
    pub y_tilde: Vec64,
}

impl OneDSetup {
    pub fn clean_indices(&self) -> Vec<usize> {
        (0..self.n).filter(|i| !self.mask.contains(i)).collect()
    }

    /// Additive corruption per example (`y_tilde - y`).
    pub fn epsilon_vec(&self) -> Vec64 {
        Vec64::new(
            self.y_tilde
                .iter()
                .zip(self.y.iter())
                .map(|(yt, y)| yt - y)
                .collect(),
        )
    }

    pub fn inputs_matrix(&self) -> Mat64 {
        Mat64::from_column(&self.x)
    }
}

/// Random setup with corruption sign opposing the label.
pub fn make_setup(
    n: usize,
    sigma: f64,
    epsilon: f64,
    kind: OneDKind,
    rng: &mut SeededRng,
) -> Result<OneDSetup> {
    make_setup_with_sign(n, sigma, epsilon, kind, CorruptionSign::OpposeLabel, rng)
}

pub fn make_setup_with_sign(
    n: usize,
    sigma: f64,
    epsilon: f64,
    kind: OneDKind,
    sign: CorruptionSign,
    rng: &mut SeededRng,
) -> Result<OneDSetup> {
    if n == 0 {
        return Err(Error::parameter("make_setup: n must be >= 1"));
    }
    if !(0.0..0.5).contains(&sigma) {
        return Err(Error::parameter(
            "make_setup: sigma must lie in [0, 1/2); the analysis needs delta > 0",
        ));
    }
    if kind == OneDKind::Linear && !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::parameter("make_setup: epsilon must be > 0"));
    }
    let n_corrupt = (sigma * n as f64).round() as usize;
    if sigma > 0.0 && n_corrupt == 0 {
        return Err(Error::parameter(
            "make_setup: sigma * n rounds to zero corrupted examples",
        ));
    }
    let realized = n_corrupt as f64 / n as f64;
    if realized >= 0.5 {
        return Err(Error::parameter(
            "make_setup: realized corruption fraction reaches 1/2",
        ));
    }

    let x: Vec<f64> = (0..n)
        .map(|_| if rng.next_u64() & 1 == 0 { 1.0 } else { -1.0 })
        .collect();
    let y = x.clone();

    let mut indices: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut indices);
    let mut mask: Vec<usize> = indices[..n_corrupt].to_vec();
    mask.sort_unstable();

    let mut y_tilde = y.clone();
    for &k in &mask {
        match kind {
            OneDKind::Logistic => y_tilde[k] = -y[k],
            OneDKind::Linear => {
                let s = match sign {
                    CorruptionSign::OpposeLabel => -y[k],
                    CorruptionSign::Random => {
                        if rng.next_u64() & 1 == 0 {
                            1.0
                        } else {
                            -1.0
                        }
                    }
                };
                y_tilde[k] = y[k] + s * epsilon;
            }
        }
    }

    Ok(OneDSetup {
        n,
        sigma: realized,
        delta: 0.5 - realized,
        epsilon,
        kind,
        mask,
        x: Vec64::new(x),
        y: Vec64::new(y),
        y_tilde: Vec64::new(y_tilde),
    })
}

/// One snapshot of a 1D run.
#[derive(Debug, Clone)]
pub struct OneDRecord {
    pub epoch: usize,
    /// MW accumulations baked into `dist` when theta was produced.
    pub mw_updates: usize,
    pub theta: f64,
    /// Loss against the hidden clean labels.
    pub clean_loss: f64,
    /// Loss against the labels the learner sees.
    pub observed_loss: f64,
    pub clean_mass: f64,
    pub corrupt_mass: f64,
    pub dist: SimplexDist,
}

#[derive(Debug, Clone)]
pub struct OneDTrace {
    pub records: Vec<OneDRecord>,
}

impl OneDTrace {
    pub fn thetas(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.theta).collect()
    }

    pub fn clean_losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.clean_loss).collect()
    }

    pub fn final_record(&self) -> &OneDRecord {
        self.records.last().expect("trace is never empty")
    }

    /// CSV with one row per record and a fixed header.
    pub fn to_csv_string(&self) -> String {
        let mut out =
            String::from("epoch,theta,clean_loss,observed_loss,clean_mass,corrupt_mass\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.epoch, r.theta, r.clean_loss, r.observed_loss, r.clean_mass, r.corrupt_mass
            ));
        }
        out
    }
}

/// GD on the clean logistic problem: `theta += alpha / (1 + exp(theta))`,
/// starting from zero. The mean loss has the closed form
/// `log(1 + exp(-theta))`.
pub fn logistic_clean_gd(alpha: f64, epochs: usize) -> Result<OneDTrace> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::parameter("alpha must be > 0"));
    }
    let single = SimplexDist::uniform(1)?;
    let mut records = Vec::with_capacity(epochs + 1);
    let mut theta = 0.0;
    for t in 0..=epochs {
        if t > 0 {
            theta += alpha * sigmoid(-theta);
        }
        records.push(OneDRecord {
            epoch: t,
            mw_updates: 0,
            theta,
            clean_loss: softplus(-theta),
            observed_loss: softplus(-theta),
            clean_mass: 1.0,
            corrupt_mass: 0.0,
            dist: single.clone(),
        });
    }
    Ok(OneDTrace { records })
}

/// Plain GD on the observed (noisy) logistic loss
/// `sigma log(1+e^theta) + (1-sigma) log(1+e^-theta)`; with `alpha = 1` it
/// converges to the finite plateau `theta* = log((1-sigma)/sigma)`.
pub fn logistic_noisy_gd(setup: &OneDSetup, alpha: f64, epochs: usize) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Logistic {
        return Err(Error::parameter("logistic_noisy_gd needs a logistic setup"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::parameter("alpha must be > 0"));
    }
    let sigma = setup.sigma;
    let uniform = SimplexDist::uniform(setup.n)?;
    let mut records = Vec::with_capacity(epochs + 1);
    let mut theta = 0.0f64;
    for t in 0..=epochs {
        if t > 0 {
            let grad = sigma * sigmoid(theta) - (1.0 - sigma) * sigmoid(-theta);
            theta -= alpha * grad;
        }
        records.push(OneDRecord {
            epoch: t,
            mw_updates: 0,
            theta,
            clean_loss: softplus(-theta),
            observed_loss: sigma * softplus(theta) + (1.0 - sigma) * softplus(-theta),
            clean_mass: 1.0 - sigma,
            corrupt_mass: sigma,
            dist: uniform.clone(),
        });
    }
    Ok(OneDTrace { records })
}

/// The plateau of plain noisy GD, `log((1-sigma)/sigma)`.
pub fn noisy_logistic_critical_point(sigma: f64) -> f64 {
    ((1.0 - sigma) / sigma).ln()
}

/// Gradient of the observed logistic loss; zero exactly at the plateau.
pub fn noisy_logistic_grad(sigma: f64, theta: f64) -> f64 {
    sigma * sigmoid(theta) - (1.0 - sigma) * sigmoid(-theta)
}

/// Reweighted GD on the noisy logistic problem with the analysis step sizes
/// `eta = alpha = 1`, exploiting the two-group structure: all clean examples
/// share one probability and all corrupted examples another.
///
/// The first step from zero moves by exactly `delta`, and the iterates
/// increase strictly forever, so the clean loss can be driven below any
/// positive level (see [`reweighted_logistic_epoch_bound`]).
pub fn logistic_mr_gd(setup: &OneDSetup, epochs: usize) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Logistic {
        return Err(Error::parameter("logistic_mr_gd needs a logistic setup"));
    }
    let n = setup.n;
    let n_cr = setup.mask.len();
    let n_cl = n - n_cr;
    if n_cl == 0 {
        return Err(Error::parameter("logistic_mr_gd needs clean examples"));
    }
    let mut theta = 0.0f64;
    // Cumulative per-example group losses (eta = 1).
    let mut cum_cl = 0.0f64;
    let mut cum_cr = 0.0f64;
    let mut records = Vec::with_capacity(epochs + 1);
    for t in 0..=epochs {
        let (p_cl, p_cr) = group_probs(n_cl, n_cr, cum_cl, cum_cr);
        if t > 0 {
            // theta <- theta - sum_i p_i grad l_i(theta) at alpha = 1.
            let step =
                n_cl as f64 * p_cl * sigmoid(-theta) - n_cr as f64 * p_cr * sigmoid(theta);
            theta += step;
            cum_cl += softplus(-theta);
            cum_cr += softplus(theta);
        }
        let (p_cl, p_cr) = group_probs(n_cl, n_cr, cum_cl, cum_cr);
        let mut p = vec![p_cl; n];
        for &k in &setup.mask {
            p[k] = p_cr;
        }
        records.push(OneDRecord {
            epoch: t,
            mw_updates: t,
            theta,
            clean_loss: softplus(-theta),
            observed_loss: (n_cl as f64 * softplus(-theta) + n_cr as f64 * softplus(theta))
                / n as f64,
            clean_mass: n_cl as f64 * p_cl,
            corrupt_mass: n_cr as f64 * p_cr,
            dist: SimplexDist::from_weights(&p)?,
        });
    }
    Ok(OneDTrace { records })
}

/// Per-example probabilities of the two groups under MW with eta = 1.
fn group_probs(n_cl: usize, n_cr: usize, cum_cl: f64, cum_cr: f64) -> (f64, f64) {
    let m = cum_cl.min(cum_cr);
    let w_cl = (-(cum_cl - m)).exp();
    let w_cr = (-(cum_cr - m)).exp();
    let denom = n_cl as f64 * w_cl + n_cr as f64 * w_cr;
    (w_cl / denom, w_cr / denom)
}

/// The generic full-batch reweighted GD on the same logistic data, through
/// the N-weight machinery; oracle for the two-group fast path.
pub fn logistic_mr_gd_generic(setup: &OneDSetup, epochs: usize) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Logistic {
        return Err(Error::parameter("logistic_mr_gd_generic needs a logistic setup"));
    }
    let model = LossModel::new(ModelKind::Scalar1D, LossKind::Logistic)?;
    let inputs = setup.inputs_matrix();
    let data = Examples::new(&inputs, TargetsRef::Reals(&setup.y_tilde))?;
    let prob = ModelOnData::new(&model, data)?;
    let cfg = OptimConfig {
        alpha: 1.0,
        eta: 1.0,
        batch_size: setup.n,
        epochs,
        momentum: 0.0,
        shuffle_seed: 0,
        lr_decay: None,
    };
    let trace = optim::mr_gd_run(&cfg, &prob, &ParameterVector::flat(vec![0.0]))?;
    Ok(run_trace_to_oned(setup, &trace, |theta| softplus(-theta)))
}

fn run_trace_to_oned<F: Fn(f64) -> f64>(
    setup: &OneDSetup,
    trace: &RunTrace,
    clean_loss: F,
) -> OneDTrace {
    let records = trace
        .reports
        .iter()
        .map(|r| {
            let corrupt_mass = r.dist.mass_of(&setup.mask).expect("mask in range");
            OneDRecord {
                epoch: r.epoch,
                mw_updates: r.epoch,
                theta: r.theta[0],
                clean_loss: clean_loss(r.theta[0]),
                observed_loss: r.losses.mean(),
                clean_mass: 1.0 - corrupt_mass,
                corrupt_mass,
                dist: r.dist.clone(),
            }
        })
        .collect();
    OneDTrace { records }
}

/// Weighted least-squares solution of the 1D problem for a fixed
/// distribution: the simplified closed form `sum_i p_i x_i y_tilde_i`,
/// cross-checked on every call against the full pseudo-inverse route
/// `x sqrt(P) (sqrt(P) x^T x sqrt(P))^+ sqrt(P) y_tilde` to 1e-10.
pub fn wls_solve_1d(setup: &OneDSetup, dist: &SimplexDist) -> Result<f64> {
    if dist.len() != setup.n {
        return Err(Error::dimension(format!(
            "distribution over {} examples, setup has {}",
            dist.len(),
            setup.n
        )));
    }
    let p = dist.as_slice();
    let weighted_labels: Vec<f64> = setup
        .x
        .iter()
        .zip(setup.y_tilde.iter())
        .map(|(x, yt)| x * yt)
        .collect();
    let simplified = dot(p, &weighted_labels)?;

    let n = setup.n;
    let sq: Vec<f64> = p.iter().map(|&pi| pi.sqrt()).collect();
    let mut gram = Mat64::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram.set(i, j, sq[i] * setup.x[i] * setup.x[j] * sq[j]);
        }
    }
    let pinv = pinv_small(&gram, DEFAULT_PINV_TOL)?;
    // z = (x sqrt(P)) * pinv, then theta = z . (sqrt(P) y_tilde).
    let mut full = 0.0;
    for k in 0..n {
        let mut z_k = 0.0;
        for i in 0..n {
            z_k += setup.x[i] * sq[i] * pinv.get(i, k);
        }
        full += z_k * sq[k] * setup.y_tilde[k];
    }
    if (simplified - full).abs() > 1e-10 {
        return Err(Error::Consistency(format!(
            "wls_solve_1d: simplified {simplified} vs pseudo-inverse {full}"
        )));
    }
    Ok(simplified)
}

fn squared_losses(setup: &OneDSetup, theta: f64) -> Vec<f64> {
    setup
        .x
        .iter()
        .zip(setup.y_tilde.iter())
        .map(|(x, yt)| {
            let r = theta * x - yt;
            0.5 * r * r
        })
        .collect()
}

fn linear_record(
    setup: &OneDSetup,
    epoch: usize,
    mw_updates: usize,
    theta: f64,
    dist: SimplexDist,
) -> Result<OneDRecord> {
    let observed =
        squared_losses(setup, theta).iter().sum::<f64>() / setup.n as f64;
    let corrupt_mass = dist.mass_of(&setup.mask)?;
    Ok(OneDRecord {
        epoch,
        mw_updates,
        theta,
        // With x_i = y_i in {-1, +1} the clean mean loss is (theta - 1)^2 / 2.
        clean_loss: 0.5 * (theta - 1.0) * (theta - 1.0),
        observed_loss: observed,
        clean_mass: 1.0 - corrupt_mass,
        corrupt_mass,
        dist,
    })
}

/// Alternating weighted least squares and MW updates on the linear setup.
/// Record `k` holds the solve under the distribution with `k` accumulated
/// loss vectors, so `epochs = 0` yields the single uniform-LS row.
pub fn linear_mr_ls_run(setup: &OneDSetup, eta: f64, epochs: usize) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Linear {
        return Err(Error::parameter("linear_mr_ls_run needs a linear setup"));
    }
    let mut state = ReweightState::new_uniform(setup.n, eta)?;
    let mut records = Vec::with_capacity(epochs + 1);
    for k in 0..=epochs {
        let dist = state.normalize();
        let theta = wls_solve_1d(setup, &dist)?;
        records.push(linear_record(setup, k, k, theta, dist)?);
        if k < epochs {
            state = state.accumulate(&squared_losses(setup, theta))?;
        }
    }
    Ok(OneDTrace { records })
}

/// The unweighted least-squares comparison: the same trace shape with the
/// distribution pinned at uniform, so theta never moves.
pub fn linear_ls_run(setup: &OneDSetup, epochs: usize) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Linear {
        return Err(Error::parameter("linear_ls_run needs a linear setup"));
    }
    let uniform = SimplexDist::uniform(setup.n)?;
    let theta = wls_solve_1d(setup, &uniform)?;
    let mut records = Vec::with_capacity(epochs + 1);
    for k in 0..=epochs {
        records.push(linear_record(setup, k, 0, theta, uniform.clone())?);
    }
    Ok(OneDTrace { records })
}

/// Reweighted full-batch GD with the squared loss on the linear setup.
pub fn linear_mr_gd_run(
    setup: &OneDSetup,
    alpha: f64,
    eta: f64,
    epochs: usize,
) -> Result<OneDTrace> {
    if setup.kind != OneDKind::Linear {
        return Err(Error::parameter("linear_mr_gd_run needs a linear setup"));
    }
    let model = LossModel::new(ModelKind::Scalar1D, LossKind::Squared)?;
    let inputs = setup.inputs_matrix();
    let data = Examples::new(&inputs, TargetsRef::Reals(&setup.y_tilde))?;
    let prob = ModelOnData::new(&model, data)?;
    let cfg = OptimConfig {
        alpha,
        eta,
        batch_size: setup.n,
        epochs,
        momentum: 0.0,
        shuffle_seed: 0,
        lr_decay: None,
    };
    let trace = optim::mr_gd_run(&cfg, &prob, &ParameterVector::flat(vec![0.0]))?;
    Ok(run_trace_to_oned(setup, &trace, |theta| {
        0.5 * (theta - 1.0) * (theta - 1.0)
    }))
}

/// Clean-loss plateau of the unweighted LS solution,
/// `((sum_{k in mask} x_k eps_k) / n)^2 / 2`.
pub fn noisy_ls_loss_floor(setup: &OneDSetup) -> f64 {
    let eps = setup.epsilon_vec();
    let s: f64 = setup.mask.iter().map(|&k| setup.x[k] * eps[k]).sum();
    let scaled = s / setup.n as f64;
    0.5 * scaled * scaled
}

/// Epochs after which clean GD provably drives the loss below `eps`:
/// `-log(exp(eps) - 1) / (alpha exp(-eps) (exp(eps) - 1))`.
pub fn clean_gd_epoch_bound(alpha: f64, eps: f64) -> f64 {
    let em1 = eps.exp() - 1.0;
    -em1.ln() / (alpha * (-eps).exp() * em1)
}

/// Epoch bound for the reweighted logistic run to reach clean loss `eps`:
/// `max(-log(1/2)/delta + 2, clean_gd_epoch_bound(1, eps) * 2n / sigma)`.
pub fn reweighted_logistic_epoch_bound(n: usize, sigma: f64, eps: f64) -> f64 {
    let delta = 0.5 - sigma;
    let first = -(0.5f64.ln()) / delta + 2.0;
    let second = clean_gd_epoch_bound(1.0, eps) * 2.0 * n as f64 / sigma;
    first.max(second)
}

/// Error bound after `t` MW updates in the linear WLS run:
/// `eps * exp(-eta eps^2 delta t) / (1 + delta)`.
pub fn wls_error_decay_bound(eta: f64, eps: f64, delta: f64, t: usize) -> f64 {
    eps * (-(eta * eps * eps * delta) * t as f64).exp() / (1.0 + delta)
}

/// Lower bound on every clean example's probability after `t` MW updates:
/// `1 / ((1-sigma) n + sigma n exp(-eta eps^2 delta t))`.
pub fn bounded_p_lower(n: usize, sigma: f64, eta: f64, eps: f64, delta: f64, t: usize) -> f64 {
    let decay = (-(eta * eps * eps * delta) * t as f64).exp();
    1.0 / ((1.0 - sigma) * n as f64 + sigma * n as f64 * decay)
}
