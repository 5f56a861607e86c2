//! Training loops around the reweighting state: full-batch reweighted GD,
//! epoch-structured reweighted SGD with batch weight normalization, the
//! probability-sampled SGD variant, and their uniform baselines, plus the
//! descent and convergence checkers.
//!
//! The uniform baselines run the same step arithmetic with a frozen uniform
//! distribution and no weight updates, so a zero-step-size reweighting state
//! must reproduce them bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{Examples, LossModel, ParameterVector, SmoothnessProfile};
use crate::reweighting::{ReweightState, SimplexDist};
use crate::tensor::{dot, Mat64, SeededRng, Vec64};

/// Batches whose total weight falls below this are skipped rather than
/// normalized.
pub const SKIP_BATCH_WEIGHT_MIN: f64 = 1e-300;

/// Per-example losses and gradients over a fixed example set.
///
/// `theta` slices are pre-validated by the run entry points; implementations
/// may index without further checks.
pub trait LossEnsemble {
    fn num_examples(&self) -> usize;

    /// Parameter dimension.
    fn dim(&self) -> usize;

    fn loss(&self, theta: &[f64], i: usize) -> f64;

    /// `acc += scale * grad(loss_i)(theta)`.
    fn add_scaled_grad(&self, theta: &[f64], i: usize, scale: f64, acc: &mut [f64]);

    /// Coefficient `c` of the `c * theta` term the optimizer adds to every
    /// aggregated gradient; not part of any per-example loss.
    fn l2_coeff(&self) -> f64 {
        0.0
    }

    /// All per-example losses in index order.
    fn losses(&self, theta: &[f64]) -> Vec64 {
        Vec64::new(
            (0..self.num_examples())
                .map(|i| self.loss(theta, i))
                .collect(),
        )
    }
}

/// A [`LossModel`] bound to a dataset view.
#[derive(Debug, Clone, Copy)]
pub struct ModelOnData<'a> {
    model: LossModel,
    data: Examples<'a>,
}

impl<'a> ModelOnData<'a> {
    pub fn new(model: &LossModel, data: Examples<'a>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("ModelOnData: empty dataset".into()));
        }
        if data.dim() != model.input_dim() {
            return Err(Error::dimension(format!(
                "dataset has {} features, model expects {}",
                data.dim(),
                model.input_dim()
            )));
        }
        // Validate every target once so the hot path can skip checks.
        let probe = model.zero_params();
        for i in 0..data.len() {
            model.loss_i(&probe, data.input(i), data.target(i))?;
        }
        Ok(ModelOnData {
            model: *model,
            data,
        })
    }

    pub fn model(&self) -> &LossModel {
        &self.model
    }

    pub fn data(&self) -> Examples<'a> {
        self.data
    }
}

impl LossEnsemble for ModelOnData<'_> {
    fn num_examples(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.model.num_params()
    }

    fn loss(&self, theta: &[f64], i: usize) -> f64 {
        self.model
            .loss_raw(theta, self.data.input(i), self.data.target(i))
    }

    fn add_scaled_grad(&self, theta: &[f64], i: usize, scale: f64, acc: &mut [f64]) {
        self.model
            .add_scaled_grad(theta, self.data.input(i), self.data.target(i), scale, acc);
    }

    fn l2_coeff(&self) -> f64 {
        self.model.l2_coeff()
    }
}

/// Synthetic smooth ensemble `l_i(theta) = c_i/2 ||theta - a_i||^2` with
/// exactly known constants, used by the convergence checkers.
#[derive(Debug, Clone)]
pub struct QuadraticEnsemble {
    anchors: Mat64,
    curvatures: Vec64,
}

impl QuadraticEnsemble {
    pub fn new(anchors: Mat64, curvatures: Vec64) -> Result<Self> {
        if anchors.rows() != curvatures.len() {
            return Err(Error::dimension(format!(
                "{} anchors vs {} curvatures",
                anchors.rows(),
                curvatures.len()
            )));
        }
        if anchors.rows() == 0 {
            return Err(Error::Data("QuadraticEnsemble: empty".into()));
        }
        if curvatures.iter().any(|&c| c <= 0.0 || !c.is_finite()) {
            return Err(Error::parameter("curvatures must be positive"));
        }
        Ok(QuadraticEnsemble {
            anchors,
            curvatures,
        })
    }

    /// Random ensemble with normal anchors and curvatures in [0.5, 3].
    pub fn random(n: usize, dim: usize, rng: &mut SeededRng) -> Self {
        let data: Vec<f64> = (0..n * dim).map(|_| rng.normal()).collect();
        let curv: Vec<f64> = (0..n).map(|_| 0.5 + 2.5 * rng.next_f64()).collect();
        QuadraticEnsemble {
            anchors: Mat64::new(n, dim, data).expect("consistent dims"),
            curvatures: Vec64::new(curv),
        }
    }

    /// Unit-curvature ensemble with anchors inside a ball. Iterates stay in
    /// the ball for any step size in (0, 1], which makes the Lipschitz and
    /// bound constants of `profile_in_ball` valid along every trajectory
    /// started inside it.
    pub fn random_in_ball(n: usize, dim: usize, radius: f64, rng: &mut SeededRng) -> Self {
        let mut data = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let dir: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let norm = dir.iter().fold(0.0, |a, v| a + v * v).sqrt().max(1e-12);
            let r = radius * rng.next_f64().powf(1.0 / dim as f64);
            data.extend(dir.iter().map(|v| v / norm * r));
        }
        QuadraticEnsemble {
            anchors: Mat64::new(n, dim, data).expect("consistent dims"),
            curvatures: Vec64::from_elem(n, 1.0),
        }
    }

    /// Exact smoothness constant: the largest curvature.
    pub fn beta(&self) -> f64 {
        self.curvatures.iter().fold(0.0f64, |a, &c| a.max(c))
    }

    /// Constants valid on the ball of the given radius around the origin.
    pub fn profile_in_ball(&self, radius: f64) -> Result<SmoothnessProfile> {
        let beta = self.beta();
        let reach = 2.0 * radius;
        SmoothnessProfile::with_bounds(beta, beta * reach, 0.5 * beta * reach * reach)
    }
}

impl LossEnsemble for QuadraticEnsemble {
    fn num_examples(&self) -> usize {
        self.anchors.rows()
    }

    fn dim(&self) -> usize {
        self.anchors.cols()
    }

    fn loss(&self, theta: &[f64], i: usize) -> f64 {
        let a = self.anchors.row(i);
        let sq = theta
            .iter()
            .zip(a)
            .fold(0.0, |acc, (t, ai)| acc + (t - ai) * (t - ai));
        0.5 * self.curvatures[i] * sq
    }

    fn add_scaled_grad(&self, theta: &[f64], i: usize, scale: f64, acc: &mut [f64]) {
        let a = self.anchors.row(i);
        let coeff = scale * self.curvatures[i];
        for ((g, t), ai) in acc.iter_mut().zip(theta).zip(a) {
            *g += coeff * (t - ai);
        }
    }
}

/// Step-decay learning-rate schedule: multiply by `factor` at each milestone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDecay {
    pub factor: f64,
    pub milestones: Vec<usize>,
}

/// Hyperparameters shared by the training loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimConfig {
    /// GD/SGD step size.
    pub alpha: f64,
    /// MW step size.
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_momentum")]
    pub momentum: f64,
    #[serde(default)]
    pub shuffle_seed: u64,
    #[serde(default)]
    pub lr_decay: Option<StepDecay>,
}

fn default_eta() -> f64 {
    0.01
}

fn default_batch_size() -> usize {
    32
}

fn default_momentum() -> f64 {
    0.9
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            alpha: 0.1,
            eta: default_eta(),
            batch_size: default_batch_size(),
            epochs: 1,
            momentum: default_momentum(),
            shuffle_seed: 0,
            lr_decay: None,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::parameter("eta must be > 0"));
        }
        self.validate_dynamics()
    }

    /// Everything except the MW step size (which a caller-supplied state may
    /// override, including the test-only zero).
    fn validate_dynamics(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::parameter("alpha must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::parameter("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::parameter("epochs must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::parameter("momentum must lie in [0, 1)"));
        }
        if let Some(decay) = &self.lr_decay {
            if !(decay.factor > 0.0 && decay.factor.is_finite()) {
                return Err(Error::parameter("lr decay factor must be > 0"));
            }
        }
        Ok(())
    }

    /// Step size in effect at 1-based epoch `t`.
    pub fn alpha_at(&self, t: usize) -> f64 {
        match &self.lr_decay {
            None => self.alpha,
            Some(decay) => {
                let hits = decay.milestones.iter().filter(|&&m| m <= t).count() as i32;
                self.alpha * decay.factor.powi(hits)
            }
        }
    }
}

/// Snapshot of one optimizer state: parameters, distribution, losses, and
/// the weighted gradient norm at that point.
#[derive(Debug, Clone)]
pub struct StepReport {
    pub epoch: usize,
    pub theta: Vec64,
    pub weighted_loss: f64,
    pub grad_norm: f64,
    pub losses: Vec64,
    pub dist: SimplexDist,
    pub skipped_batches: usize,
}

/// Trace of a run: `epochs + 1` reports, the first describing the initial
/// state before any update.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub reports: Vec<StepReport>,
}

impl RunTrace {
    pub fn epochs(&self) -> usize {
        self.reports.len().saturating_sub(1)
    }

    pub fn final_report(&self) -> &StepReport {
        self.reports.last().expect("trace is never empty")
    }

    pub fn final_theta(&self) -> &Vec64 {
        &self.final_report().theta
    }

    pub fn weighted_losses(&self) -> Vec<f64> {
        self.reports.iter().map(|r| r.weighted_loss).collect()
    }

    pub fn thetas(&self) -> Vec<&Vec64> {
        self.reports.iter().map(|r| &r.theta).collect()
    }

    /// Probability mass on an index set at every snapshot.
    pub fn mass_on(&self, indices: &[usize]) -> Result<Vec<f64>> {
        self.reports.iter().map(|r| r.dist.mass_of(indices)).collect()
    }

    pub fn total_skipped_batches(&self) -> usize {
        self.reports.iter().map(|r| r.skipped_batches).sum()
    }
}

enum Weighting {
    Mw(ReweightState),
    FrozenUniform(SimplexDist),
}

impl Weighting {
    fn dist(&self) -> SimplexDist {
        match self {
            Weighting::Mw(state) => state.normalize(),
            Weighting::FrozenUniform(d) => d.clone(),
        }
    }

    fn absorb(&mut self, losses: &[f64]) -> Result<()> {
        if let Weighting::Mw(state) = self {
            *state = state.accumulate(losses)?;
        }
        Ok(())
    }
}

fn validate_problem<E: LossEnsemble>(prob: &E, theta: &ParameterVector) -> Result<()> {
    if prob.num_examples() == 0 {
        return Err(Error::Data("ensemble has no examples".into()));
    }
    if theta.len() != prob.dim() {
        return Err(Error::dimension(format!(
            "theta has {} entries, ensemble expects {}",
            theta.len(),
            prob.dim()
        )));
    }
    Ok(())
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Weighted gradient `sum_i p_i grad l_i(theta) + c * theta`.
pub(crate) fn weighted_grad<E: LossEnsemble>(prob: &E, theta: &[f64], p: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; theta.len()];
    for i in 0..prob.num_examples() {
        prob.add_scaled_grad(theta, i, p[i], &mut g);
    }
    let c = prob.l2_coeff();
    if c != 0.0 {
        for (gi, ti) in g.iter_mut().zip(theta) {
            *gi += c * ti;
        }
    }
    g
}

fn report_from_losses<E: LossEnsemble>(
    prob: &E,
    epoch: usize,
    theta: &[f64],
    dist: SimplexDist,
    losses: Vec64,
    skipped_batches: usize,
) -> StepReport {
    let weighted_loss = dot(dist.as_slice(), &losses).expect("lengths agree");
    let g = weighted_grad(prob, theta, dist.as_slice());
    let grad_norm = g.iter().fold(0.0, |a, v| a + v * v).sqrt();
    StepReport {
        epoch,
        theta: Vec64::new(theta.to_vec()),
        weighted_loss,
        grad_norm,
        losses,
        dist,
        skipped_batches,
    }
}

fn make_report<E: LossEnsemble>(
    prob: &E,
    epoch: usize,
    theta: &[f64],
    dist: SimplexDist,
    skipped_batches: usize,
) -> StepReport {
    let losses = prob.losses(theta);
    report_from_losses(prob, epoch, theta, dist, losses, skipped_batches)
}

/// One full-batch step: `theta - alpha * sum_i p_i grad l_i(theta)`.
pub fn mr_gd_step<E: LossEnsemble>(
    theta: &ParameterVector,
    dist: &SimplexDist,
    prob: &E,
    alpha: f64,
) -> Result<ParameterVector> {
    validate_problem(prob, theta)?;
    if dist.len() != prob.num_examples() {
        return Err(Error::dimension(format!(
            "distribution over {} examples, ensemble has {}",
            dist.len(),
            prob.num_examples()
        )));
    }
    let mut values = theta.values().to_vec();
    let g = weighted_grad(prob, &values, dist.as_slice());
    for (t, gi) in values.iter_mut().zip(&g) {
        *t -= alpha * gi;
    }
    Ok(ParameterVector::from_parts(
        Vec64::new(values),
        theta.shape().clone(),
    ))
}

fn run_gd_driver<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    mut weighting: Weighting,
) -> Result<RunTrace> {
    validate_problem(prob, theta0)?;
    let mut theta = theta0.values().to_vec();
    let mut reports = Vec::with_capacity(cfg.epochs + 1);
    reports.push(make_report(prob, 0, &theta, weighting.dist(), 0));
    for t in 1..=cfg.epochs {
        let p = weighting.dist();
        let alpha = cfg.alpha_at(t);
        let g = weighted_grad(prob, &theta, p.as_slice());
        for (ti, gi) in theta.iter_mut().zip(&g) {
            *ti -= alpha * gi;
        }
        if !all_finite(&theta) {
            return Err(Error::Abort { epoch: t, batch: 0 });
        }
        let losses = prob.losses(&theta);
        weighting.absorb(&losses)?;
        reports.push(report_from_losses(prob, t, &theta, weighting.dist(), losses, 0));
    }
    Ok(RunTrace { reports })
}

/// Full-batch reweighted GD: normalize, step, evaluate all losses at the new
/// parameters, accumulate; one report per epoch plus the initial snapshot.
pub fn mr_gd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate()?;
    let state = ReweightState::new_uniform(prob.num_examples().max(1), cfg.eta)?;
    run_gd_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// As [`mr_gd_run`] but starting from a caller-supplied reweighting state
/// (the route to the test-only zero step size). `cfg.eta` is ignored.
pub fn mr_gd_run_from_state<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    state: ReweightState,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    if state.len() != prob.num_examples() {
        return Err(Error::dimension("reweighting state length differs from ensemble"));
    }
    run_gd_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// Uniform full-batch GD baseline; never touches a reweighting state.
pub fn gd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    let uniform = SimplexDist::uniform(prob.num_examples().max(1))?;
    run_gd_driver(cfg, prob, theta0, Weighting::FrozenUniform(uniform))
}

/// Deterministic per-epoch shuffle order.
pub(crate) fn epoch_order(shuffle_seed: u64, epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = SeededRng::new(shuffle_seed).substream(epoch as u64);
    rng.shuffle(&mut order);
    order
}

/// One weighted mini-batch update; returns false when the batch was skipped
/// for carrying (numerically) zero weight.
#[allow(clippy::too_many_arguments)]
pub(crate) fn weighted_batch_update<E: LossEnsemble>(
    prob: &E,
    theta: &mut [f64],
    p: &[f64],
    batch: &[usize],
    alpha: f64,
    momentum: f64,
    velocity: &mut [f64],
    grad_buf: &mut Vec<f64>,
) -> bool {
    let wsum = batch.iter().fold(0.0, |acc, &i| acc + p[i]);
    if wsum < SKIP_BATCH_WEIGHT_MIN {
        return false;
    }
    grad_buf.clear();
    grad_buf.resize(theta.len(), 0.0);
    for &i in batch {
        prob.add_scaled_grad(theta, i, p[i], grad_buf);
    }
    let inv = 1.0 / wsum;
    for g in grad_buf.iter_mut() {
        *g *= inv;
    }
    let c = prob.l2_coeff();
    if c != 0.0 {
        for (g, t) in grad_buf.iter_mut().zip(theta.iter()) {
            *g += c * *t;
        }
    }
    for ((v, g), t) in velocity.iter_mut().zip(grad_buf.iter()).zip(theta.iter_mut()) {
        *v = momentum * *v + g;
        *t -= alpha * *v;
    }
    true
}

#[allow(clippy::too_many_arguments)]
fn sgd_epoch_in_place<E: LossEnsemble>(
    prob: &E,
    theta: &mut [f64],
    p: &[f64],
    order: &[usize],
    alpha: f64,
    batch_size: usize,
    momentum: f64,
    velocity: &mut [f64],
    grad_buf: &mut Vec<f64>,
) -> Result<usize> {
    let mut skipped = 0;
    for (b, batch) in order.chunks(batch_size).enumerate() {
        if !weighted_batch_update(
            prob, theta, p, batch, alpha, momentum, velocity, grad_buf,
        ) {
            skipped += 1;
            continue;
        }
        if !all_finite(theta) {
            return Err(Error::Abort { epoch: 0, batch: b });
        }
    }
    Ok(skipped)
}

/// One epoch of weighted mini-batch SGD over a fixed distribution.
///
/// Batches are contiguous slices of `order`; each batch gradient is the
/// p-weighted sum divided by the batch's weight sum, so rescaling the weights
/// of a batch by a common factor leaves its update unchanged.
#[allow(clippy::too_many_arguments)]
pub fn mr_sgd_epoch<E: LossEnsemble>(
    theta: &ParameterVector,
    dist: &SimplexDist,
    prob: &E,
    alpha: f64,
    batch_size: usize,
    momentum: f64,
    velocity: &mut Vec64,
    order: &[usize],
) -> Result<(ParameterVector, usize)> {
    validate_problem(prob, theta)?;
    let n = prob.num_examples();
    if dist.len() != n || order.len() != n {
        return Err(Error::dimension("distribution/order length differs from ensemble"));
    }
    if batch_size == 0 || batch_size > n {
        return Err(Error::parameter(format!(
            "batch_size {batch_size} must lie in [1, {n}]"
        )));
    }
    if velocity.len() != theta.len() {
        return Err(Error::dimension("velocity length differs from theta"));
    }
    if !(0.0..1.0).contains(&momentum) {
        return Err(Error::parameter("momentum must lie in [0, 1)"));
    }
    let mut values = theta.values().to_vec();
    let mut grad_buf = Vec::new();
    let skipped = sgd_epoch_in_place(
        prob,
        &mut values,
        dist.as_slice(),
        order,
        alpha,
        batch_size,
        momentum,
        velocity,
        &mut grad_buf,
    )?;
    Ok((
        ParameterVector::from_parts(Vec64::new(values), theta.shape().clone()),
        skipped,
    ))
}

fn run_sgd_driver<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    mut weighting: Weighting,
) -> Result<RunTrace> {
    validate_problem(prob, theta0)?;
    let n = prob.num_examples();
    if cfg.batch_size > n {
        return Err(Error::parameter(format!(
            "batch_size {} exceeds dataset size {n}",
            cfg.batch_size
        )));
    }
    let mut theta = theta0.values().to_vec();
    let mut velocity = vec![0.0; theta.len()];
    let mut grad_buf = Vec::new();
    let mut reports = Vec::with_capacity(cfg.epochs + 1);
    reports.push(make_report(prob, 0, &theta, weighting.dist(), 0));
    for t in 1..=cfg.epochs {
        let p = weighting.dist();
        let order = epoch_order(cfg.shuffle_seed, t, n);
        let alpha = cfg.alpha_at(t);
        let skipped = sgd_epoch_in_place(
            prob,
            &mut theta,
            p.as_slice(),
            &order,
            alpha,
            cfg.batch_size,
            cfg.momentum,
            &mut velocity,
            &mut grad_buf,
        )
        .map_err(|e| match e {
            Error::Abort { batch, .. } => Error::Abort { epoch: t, batch },
            other => other,
        })?;
        // Extra full forward pass at the end-of-epoch parameters; these are
        // the losses the weight update consumes.
        let losses = prob.losses(&theta);
        weighting.absorb(&losses)?;
        reports.push(report_from_losses(
            prob,
            t,
            &theta,
            weighting.dist(),
            losses,
            skipped,
        ));
    }
    Ok(RunTrace { reports })
}

/// Epoch-structured reweighted SGD: normalize once per epoch, run the batched
/// updates under that fixed distribution, then do a full forward pass at the
/// end-of-epoch parameters and accumulate.
pub fn mr_sgd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate()?;
    let state = ReweightState::new_uniform(prob.num_examples().max(1), cfg.eta)?;
    run_sgd_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// As [`mr_sgd_run`] from a caller-supplied state; `cfg.eta` is ignored.
pub fn mr_sgd_run_from_state<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    state: ReweightState,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    if state.len() != prob.num_examples() {
        return Err(Error::dimension("reweighting state length differs from ensemble"));
    }
    run_sgd_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// Vanilla mini-batch SGD baseline (mean gradients, same shuffling).
pub fn sgd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    let uniform = SimplexDist::uniform(prob.num_examples().max(1))?;
    run_sgd_driver(cfg, prob, theta0, Weighting::FrozenUniform(uniform))
}

fn run_sampled_driver<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    mut weighting: Weighting,
) -> Result<RunTrace> {
    validate_problem(prob, theta0)?;
    let mut theta = theta0.values().to_vec();
    let mut rng = SeededRng::new(cfg.shuffle_seed);
    let mut reports = Vec::with_capacity(cfg.epochs + 1);
    reports.push(make_report(prob, 0, &theta, weighting.dist(), 0));
    for t in 1..=cfg.epochs {
        let p = weighting.dist();
        let i = p.sample_index(&mut rng);
        let alpha = cfg.alpha_at(t);
        let mut g = vec![0.0; theta.len()];
        prob.add_scaled_grad(&theta, i, 1.0, &mut g);
        let c = prob.l2_coeff();
        if c != 0.0 {
            for (gi, ti) in g.iter_mut().zip(&theta) {
                *gi += c * ti;
            }
        }
        for (ti, gi) in theta.iter_mut().zip(&g) {
            *ti -= alpha * gi;
        }
        if !all_finite(&theta) {
            return Err(Error::Abort { epoch: t, batch: 0 });
        }
        let losses = prob.losses(&theta);
        weighting.absorb(&losses)?;
        reports.push(report_from_losses(prob, t, &theta, weighting.dist(), losses, 0));
    }
    Ok(RunTrace { reports })
}

/// Sampled variant: each step draws one example from the current
/// distribution, takes a plain gradient step on it, then refreshes the full
/// loss vector and renormalizes. `cfg.epochs` counts steps here.
pub fn mr_sampled_sgd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate()?;
    let state = ReweightState::new_uniform(prob.num_examples().max(1), cfg.eta)?;
    run_sampled_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// As [`mr_sampled_sgd_run`] from a caller-supplied state.
pub fn mr_sampled_sgd_run_from_state<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
    state: ReweightState,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    if state.len() != prob.num_examples() {
        return Err(Error::dimension("reweighting state length differs from ensemble"));
    }
    run_sampled_driver(cfg, prob, theta0, Weighting::Mw(state))
}

/// Baseline drawing examples uniformly forever, same RNG discipline.
pub fn sampled_uniform_sgd_run<E: LossEnsemble>(
    cfg: &OptimConfig,
    prob: &E,
    theta0: &ParameterVector,
) -> Result<RunTrace> {
    cfg.validate_dynamics()?;
    let uniform = SimplexDist::uniform(prob.num_examples().max(1))?;
    run_sampled_driver(cfg, prob, theta0, Weighting::FrozenUniform(uniform))
}

/// Step size `sqrt(2B / (G^2 beta T))` for the sampled variant.
pub fn sampled_bound_step_size(profile: &SmoothnessProfile, steps: usize) -> Result<f64> {
    let g = profile
        .lipschitz
        .ok_or_else(|| Error::parameter("profile is missing the Lipschitz constant"))?;
    let b = profile
        .bound
        .ok_or_else(|| Error::parameter("profile is missing the loss bound"))?;
    if steps == 0 {
        return Err(Error::parameter("steps must be >= 1"));
    }
    Ok((2.0 * b / (g * g * profile.beta * steps as f64)).sqrt())
}

/// Verifies the per-epoch descent inequality
/// `W(t+1) - W(t) <= -||g_t||^2 / (2 beta) + 1e-9`
/// over every consecutive snapshot pair; returns the violating epochs.
pub fn descent_check(trace: &RunTrace, beta: f64) -> Result<Vec<usize>> {
    if trace.reports.len() < 2 {
        return Err(Error::Data(
            "descent_check: trace needs at least two snapshots".into(),
        ));
    }
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::parameter("beta must be > 0"));
    }
    let mut violations = Vec::new();
    for pair in trace.reports.windows(2) {
        let decrease = pair[1].weighted_loss - pair[0].weighted_loss;
        let budget = -pair[0].grad_norm * pair[0].grad_norm / (2.0 * beta);
        if decrease > budget + 1e-9 {
            violations.push(pair[1].epoch);
        }
    }
    Ok(violations)
}

/// Margin of the convergence bound:
/// `(2 beta / T)(mean initial loss - optimum) - (1/T) sum_t ||g_t||^2`.
/// Nonnegative whenever the bound holds; `optimum` may be any valid lower
/// bound on the jointly weighted loss (0 for nonnegative losses).
pub fn convergence_bound_check(trace: &RunTrace, beta: f64, optimum: f64) -> Result<f64> {
    if trace.reports.len() < 2 {
        return Err(Error::Data(
            "convergence_bound_check: trace needs at least two snapshots".into(),
        ));
    }
    if beta <= 0.0 || beta.is_nan() {
        return Err(Error::parameter("beta must be > 0"));
    }
    let t = trace.reports.len() - 1;
    let initial_mean = trace.reports[0].losses.mean();
    let avg_grad_sq = trace.reports[..t]
        .iter()
        .map(|r| r.grad_norm * r.grad_norm)
        .sum::<f64>()
        / t as f64;
    Ok((2.0 * beta / t as f64) * (initial_mean - optimum) - avg_grad_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{LossKind, ModelKind, TargetsRef};

    fn bits(v: &[f64]) -> Vec<u64> {
        v.iter().map(|x| x.to_bits()).collect()
    }

    fn scalar_quadratic<'a>(inputs: &'a Mat64, ys: &'a [f64]) -> ModelOnData<'a> {
        let model = LossModel::new(ModelKind::Scalar1D, LossKind::Squared).unwrap();
        ModelOnData::new(&model, Examples::new(inputs, TargetsRef::Reals(ys)).unwrap()).unwrap()
    }

    #[test]
    fn gd_step_on_quadratic_hits_the_mean() {
        // l_i = 1/2 (theta - a_i)^2 via x = 1; one step at alpha = 1/beta = 1
        // lands on the anchor mean.
        let inputs = Mat64::from_column(&[1.0; 4]);
        let ys = [2.0, -1.0, 0.5, 4.5];
        let prob = scalar_quadratic(&inputs, &ys);
        let theta = ParameterVector::flat(vec![10.0]);
        let p = SimplexDist::uniform(4).unwrap();
        let next = mr_gd_step(&theta, &p, &prob, 1.0).unwrap();
        let mean = ys.iter().sum::<f64>() / 4.0;
        assert!((next.values()[0] - mean).abs() < 1e-12);
    }

    #[test]
    fn gd_step_degenerate_simplex_follows_one_example() {
        let inputs = Mat64::from_column(&[1.0; 3]);
        let ys = [5.0, -3.0, 1.0];
        let prob = scalar_quadratic(&inputs, &ys);
        let theta = ParameterVector::flat(vec![0.25]);
        let p = SimplexDist::new(vec![0.0, 1.0, 0.0]).unwrap();
        let next = mr_gd_step(&theta, &p, &prob, 0.5).unwrap();
        // theta - alpha * (theta - y_1)
        let expected = 0.25 - 0.5 * (0.25 - (-3.0));
        assert_eq!(next.values()[0], expected);
    }

    #[test]
    fn gd_step_on_noisy_logistic_moves_by_delta() {
        // 15 examples, 5 flipped: first step from zero is Delta = 1/2 - sigma.
        let n = 15;
        let flipped = 5;
        let xs = vec![1.0; n];
        let inputs = Mat64::from_column(&xs);
        let ys: Vec<f64> = (0..n).map(|i| if i < flipped { -1.0 } else { 1.0 }).collect();
        let model = LossModel::new(ModelKind::Scalar1D, LossKind::Logistic).unwrap();
        let prob =
            ModelOnData::new(&model, Examples::new(&inputs, TargetsRef::Reals(&ys)).unwrap())
                .unwrap();
        let theta = ParameterVector::flat(vec![0.0]);
        let p = SimplexDist::uniform(n).unwrap();
        let next = mr_gd_step(&theta, &p, &prob, 1.0).unwrap();
        let delta = 0.5 - flipped as f64 / n as f64;
        assert!((next.values()[0] - delta).abs() < 1e-15);
    }

    #[test]
    fn eta_zero_gd_matches_uniform_baseline_bitwise() {
        let mut rng = SeededRng::new(4);
        let prob = QuadraticEnsemble::random(8, 3, &mut rng);
        let cfg = OptimConfig {
            alpha: 1.0 / prob.beta(),
            eta: 1.0, // ignored by from_state
            batch_size: 8,
            epochs: 40,
            momentum: 0.0,
            shuffle_seed: 7,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.5, -0.25, 2.0]);
        let state = ReweightState::uniform_eta_zero_for_tests(8);
        let mr = mr_gd_run_from_state(&cfg, &prob, &theta0, state).unwrap();
        let base = gd_run(&cfg, &prob, &theta0).unwrap();
        assert_eq!(mr.reports.len(), base.reports.len());
        for (a, b) in mr.reports.iter().zip(&base.reports) {
            assert_eq!(bits(&a.theta), bits(&b.theta));
        }
    }

    #[test]
    fn uniform_sgd_epoch_is_minibatch_mean_sgd() {
        // With a uniform distribution the normalized batch update is exactly
        // the batch mean gradient that sgd_run takes.
        let mut rng = SeededRng::new(11);
        let prob = QuadraticEnsemble::random(10, 2, &mut rng);
        let cfg = OptimConfig {
            alpha: 0.05,
            eta: 0.3,
            batch_size: 3,
            epochs: 25,
            momentum: 0.9,
            shuffle_seed: 3,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![1.0, -1.0]);
        let state = ReweightState::uniform_eta_zero_for_tests(10);
        let mr = mr_sgd_run_from_state(&cfg, &prob, &theta0, state).unwrap();
        let base = sgd_run(&cfg, &prob, &theta0).unwrap();
        for (a, b) in mr.reports.iter().zip(&base.reports) {
            assert_eq!(bits(&a.theta), bits(&b.theta));
        }
    }

    #[test]
    fn full_batch_sgd_epoch_matches_gd_step() {
        let mut rng = SeededRng::new(13);
        let prob = QuadraticEnsemble::random(6, 2, &mut rng);
        let theta0 = ParameterVector::flat(vec![0.3, 0.7]);
        let state = ReweightState::new_uniform(6, 0.5)
            .unwrap()
            .accumulate(&[0.4, 0.0, 1.2, 0.3, 2.0, 0.9])
            .unwrap();
        let dist = state.normalize();
        let order: Vec<usize> = (0..6).collect();
        let mut velocity = Vec64::zeros(2);
        let (via_epoch, skipped) =
            mr_sgd_epoch(&theta0, &dist, &prob, 0.2, 6, 0.0, &mut velocity, &order).unwrap();
        assert_eq!(skipped, 0);
        let via_step = mr_gd_step(&theta0, &dist, &prob, 0.2).unwrap();
        // Identical up to the normalization by sum(p) ~= 1.
        for (a, b) in via_epoch.values().iter().zip(via_step.values().iter()) {
            assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn batch_update_invariant_to_weight_rescaling() {
        // Two distributions whose batches have the same internal ratios (the
        // second is the first with halves swapped) drive identical epochs.
        let mut rng = SeededRng::new(17);
        let prob = QuadraticEnsemble::random(4, 3, &mut rng);
        let theta0 = ParameterVector::flat(vec![0.1, 0.2, -0.4]);
        let a = SimplexDist::new(vec![0.6, 0.2, 0.15, 0.05]).unwrap();
        let b = SimplexDist::new(vec![0.15, 0.05, 0.6, 0.2]).unwrap();
        let order: Vec<usize> = (0..4).collect();
        let mut va = Vec64::zeros(3);
        let mut vb = Vec64::zeros(3);
        let (ta, _) = mr_sgd_epoch(&theta0, &a, &prob, 0.1, 2, 0.0, &mut va, &order).unwrap();
        let (tb, _) = mr_sgd_epoch(&theta0, &b, &prob, 0.1, 2, 0.0, &mut vb, &order).unwrap();
        assert_eq!(bits(ta.values()), bits(tb.values()));
    }

    #[test]
    fn vanishing_batch_weight_is_skipped() {
        let inputs = Mat64::from_column(&[1.0, 1.0, 1.0]);
        let ys = [1.0, 2.0, 3.0];
        let prob = scalar_quadratic(&inputs, &ys);
        // Examples 1 and 2 carry weight that underflowed to exactly zero.
        let state = ReweightState::new_uniform(3, 1.0)
            .unwrap()
            .accumulate(&[0.0, 1e7, 1e7])
            .unwrap();
        let dist = state.normalize();
        assert_eq!(dist.get(1), 0.0);
        let theta0 = ParameterVector::flat(vec![0.0]);
        let order = vec![1, 2, 0];
        let mut velocity = Vec64::zeros(1);
        let (next, skipped) =
            mr_sgd_epoch(&theta0, &dist, &prob, 0.5, 2, 0.0, &mut velocity, &order).unwrap();
        assert_eq!(skipped, 1);
        // Only the batch containing example 0 moved theta.
        assert!((next.values()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sgd_trace_is_deterministic() {
        let mut rng = SeededRng::new(23);
        let prob = QuadraticEnsemble::random(12, 3, &mut rng);
        let cfg = OptimConfig {
            alpha: 0.1,
            eta: 0.05,
            batch_size: 4,
            epochs: 15,
            momentum: 0.9,
            shuffle_seed: 99,
            lr_decay: Some(StepDecay {
                factor: 0.5,
                milestones: vec![8],
            }),
        };
        let theta0 = ParameterVector::flat(vec![0.0, 1.0, -1.0]);
        let t1 = mr_sgd_run(&cfg, &prob, &theta0).unwrap();
        let t2 = mr_sgd_run(&cfg, &prob, &theta0).unwrap();
        for (a, b) in t1.reports.iter().zip(&t2.reports) {
            assert_eq!(bits(&a.theta), bits(&b.theta));
            assert_eq!(a.weighted_loss.to_bits(), b.weighted_loss.to_bits());
        }
    }

    #[test]
    fn sampled_run_single_example_is_plain_sgd() {
        let inputs = Mat64::from_column(&[1.0]);
        let ys = [3.0];
        let prob = scalar_quadratic(&inputs, &ys);
        let cfg = OptimConfig {
            alpha: 0.25,
            eta: 0.1,
            batch_size: 1,
            epochs: 30,
            momentum: 0.0,
            shuffle_seed: 1,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.0]);
        let trace = mr_sampled_sgd_run(&cfg, &prob, &theta0).unwrap();
        let mut expected: f64 = 0.0;
        for report in &trace.reports[1..] {
            expected -= 0.25 * (expected - 3.0);
            assert_eq!(report.theta[0].to_bits(), expected.to_bits());
        }
    }

    #[test]
    fn sampled_run_with_frozen_point_mass_is_deterministic() {
        let inputs = Mat64::from_column(&[1.0, 1.0]);
        let ys = [2.0, -7.0];
        let prob = scalar_quadratic(&inputs, &ys);
        let cfg = OptimConfig {
            alpha: 0.5,
            eta: 1.0,
            batch_size: 1,
            epochs: 20,
            momentum: 0.0,
            shuffle_seed: 5,
            lr_decay: None,
        };
        // Point mass on example 0 never moves: every draw is example 0.
        let state = ReweightState::new_uniform(2, 1.0)
            .unwrap()
            .accumulate(&[0.0, 1e7])
            .unwrap();
        let theta0 = ParameterVector::flat(vec![0.0]);
        let trace = mr_sampled_sgd_run_from_state(&cfg, &prob, &theta0, state).unwrap();
        let mut expected: f64 = 0.0;
        for report in &trace.reports[1..] {
            expected -= 0.5 * (expected - 2.0);
            assert!((report.theta[0] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_zero_sampled_matches_uniform_baseline_bitwise() {
        let mut rng = SeededRng::new(31);
        let prob = QuadraticEnsemble::random_in_ball(6, 2, 1.0, &mut rng);
        let cfg = OptimConfig {
            alpha: 0.2,
            eta: 1.0,
            batch_size: 1,
            epochs: 50,
            momentum: 0.0,
            shuffle_seed: 42,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.0, 0.0]);
        let state = ReweightState::uniform_eta_zero_for_tests(6);
        let mr = mr_sampled_sgd_run_from_state(&cfg, &prob, &theta0, state).unwrap();
        let base = sampled_uniform_sgd_run(&cfg, &prob, &theta0).unwrap();
        for (a, b) in mr.reports.iter().zip(&base.reports) {
            assert_eq!(bits(&a.theta), bits(&b.theta));
        }
    }

    #[test]
    fn descent_check_clean_on_compliant_runs() {
        for seed in 0..5 {
            let mut rng = SeededRng::new(seed);
            let prob = QuadraticEnsemble::random(2 + rng.range(18), 1 + rng.range(5), &mut rng);
            let beta = prob.beta();
            let cfg = OptimConfig {
                alpha: 1.0 / beta,
                eta: 0.01,
                batch_size: 1,
                epochs: 60,
                momentum: 0.0,
                shuffle_seed: seed,
                lr_decay: None,
            };
            let theta0 = ParameterVector::flat(vec![2.0; prob.dim()]);
            let trace = mr_gd_run(&cfg, &prob, &theta0).unwrap();
            assert!(descent_check(&trace, beta).unwrap().is_empty());
            let margin = convergence_bound_check(&trace, beta, 0.0).unwrap();
            assert!(margin >= -1e-9, "margin {margin}");
        }
    }

    #[test]
    fn descent_check_flags_oversized_steps() {
        // alpha = 2/beta on a single quadratic oscillates with constant loss.
        let inputs = Mat64::from_column(&[1.0]);
        let ys = [1.0];
        let prob = scalar_quadratic(&inputs, &ys);
        let cfg = OptimConfig {
            alpha: 2.0,
            eta: 0.01,
            batch_size: 1,
            epochs: 10,
            momentum: 0.0,
            shuffle_seed: 0,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.0]);
        let trace = mr_gd_run(&cfg, &prob, &theta0).unwrap();
        let violations = descent_check(&trace, 1.0).unwrap();
        assert!(!violations.is_empty());
    }

    #[test]
    fn bound_check_single_epoch_reduces_to_first_step() {
        let mut rng = SeededRng::new(77);
        let prob = QuadraticEnsemble::random(5, 2, &mut rng);
        let beta = prob.beta();
        let cfg = OptimConfig {
            alpha: 1.0 / beta,
            eta: 0.01,
            batch_size: 1,
            epochs: 1,
            momentum: 0.0,
            shuffle_seed: 0,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![1.0, -2.0]);
        let trace = mr_gd_run(&cfg, &prob, &theta0).unwrap();
        let margin = convergence_bound_check(&trace, beta, 0.0).unwrap();
        let first = &trace.reports[0];
        let by_hand =
            2.0 * beta * first.losses.mean() - first.grad_norm * first.grad_norm;
        assert!((margin - by_hand).abs() < 1e-12);
        assert!(margin >= -1e-9);
    }

    #[test]
    fn sampled_bound_step_size_formula() {
        let profile = SmoothnessProfile::with_bounds(1.0, 2.0, 2.0).unwrap();
        let alpha = sampled_bound_step_size(&profile, 1000).unwrap();
        assert!((alpha - (4.0f64 / 4000.0).sqrt()).abs() < 1e-15);
        let no_bounds = SmoothnessProfile::new(1.0).unwrap();
        assert!(sampled_bound_step_size(&no_bounds, 10).is_err());
    }

    #[test]
    fn config_validation_and_schedule() {
        let mut cfg = OptimConfig {
            alpha: 0.1,
            eta: 0.01,
            batch_size: 4,
            epochs: 100,
            momentum: 0.0,
            shuffle_seed: 0,
            lr_decay: Some(StepDecay {
                factor: 0.1,
                milestones: vec![80, 120],
            }),
        };
        cfg.validate().unwrap();
        assert!((cfg.alpha_at(1) - 0.1).abs() < 1e-15);
        assert!((cfg.alpha_at(80) - 0.01).abs() < 1e-15);
        assert!((cfg.alpha_at(130) - 0.001).abs() < 1e-15);
        cfg.eta = 0.0;
        assert!(cfg.validate().is_err());
        cfg.eta = 0.01;
        cfg.momentum = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sgd_rejects_oversized_batches() {
        let mut rng = SeededRng::new(1);
        let prob = QuadraticEnsemble::random(3, 1, &mut rng);
        let cfg = OptimConfig {
            alpha: 0.1,
            eta: 0.01,
            batch_size: 4,
            epochs: 1,
            momentum: 0.0,
            shuffle_seed: 0,
            lr_decay: None,
        };
        let theta0 = ParameterVector::flat(vec![0.0]);
        assert!(matches!(
            mr_sgd_run(&cfg, &prob, &theta0),
            Err(Error::Parameter(_))
        ));
    }
}
