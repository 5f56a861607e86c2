//! Experiment orchestration: dataset + model + optimizer + reweighting,
//! optional mixup and label smoothing, clean-test evaluation, trace/summary
//! artifacts, and the MW step-size grid search.
//!
//! When reweighting is on, the weight update always consumes per-example
//! losses measured at the end-of-sub-epoch parameters on raw inputs with
//! hard observed labels, even when mixup or label smoothing shaped the batch
//! losses: mixup destroys example identity, and the weights belong to the
//! original examples.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{gen_blobs, inject_label_noise, load_csv, mixup_batch, CsvSchema, LabelSchema, NoisyDataset};
use crate::error::{Error, Result};
use crate::losses::{Examples, LossKind, LossModel, ModelKind, ParameterVector, TargetsRef};
use crate::optim::{self, LossEnsemble, ModelOnData, OptimConfig};
use crate::reweighting::{ReweightState, SimplexDist};
use crate::tensor::{dot, SeededRng, Vec64};

/// Thread cap for grid-search parallelism; 0 or unset runs sequentially.
pub const THREADS_ENV: &str = "MR_OPTIM_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "type", rename_all = "snake_case")]
pub enum DatasetSpec {
    Blobs {
        per_class: usize,
        classes: usize,
        dim: usize,
        separation: f64,
        #[serde(default)]
        noise_ratio: f64,
    },
    Csv {
        path: String,
        features: usize,
        classes: usize,
        #[serde(default)]
        noise_ratio: f64,
    },
}

impl DatasetSpec {
    fn noise_ratio(&self) -> f64 {
        match self {
            DatasetSpec::Blobs { noise_ratio, .. } => *noise_ratio,
            DatasetSpec::Csv { noise_ratio, .. } => *noise_ratio,
        }
    }

    fn build(&self, rng: &mut SeededRng) -> Result<NoisyDataset> {
        match self {
            DatasetSpec::Blobs {
                per_class,
                classes,
                dim,
                separation,
                ..
            } => gen_blobs(*per_class, *classes, *dim, *separation, rng),
            DatasetSpec::Csv {
                path,
                features,
                classes,
                ..
            } => load_csv(
                path,
                &CsvSchema {
                    features: *features,
                    label: LabelSchema::Classes { count: *classes },
                    read_noise_columns: false,
                },
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindSpec {
    Softmax,
    Mlp1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKindSpec,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default)]
    pub l2: f64,
}

fn default_hidden() -> usize {
    16
}

impl ModelSpec {
    fn build(&self, dim: usize, classes: usize) -> Result<LossModel> {
        if classes < 2 {
            return Err(Error::parameter(
                "experiments need a classification dataset with >= 2 classes",
            ));
        }
        let kind = match self.kind {
            ModelKindSpec::Softmax => ModelKind::Softmax { dim, classes },
            ModelKindSpec::Mlp1 => ModelKind::Mlp1 {
                dim,
                hidden: self.hidden,
                classes,
            },
        };
        LossModel::new(kind, LossKind::CrossEntropy)?.with_l2(self.l2)
    }
}

/// Method toggles; all combinations compose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodFlags {
    #[serde(default)]
    pub reweighting: bool,
    #[serde(default)]
    pub mixup: bool,
    #[serde(default = "default_mixup_alpha")]
    pub mixup_alpha: f64,
    #[serde(default)]
    pub label_smoothing: f64,
}

fn default_mixup_alpha() -> f64 {
    1.0
}

impl Default for MethodFlags {
    fn default() -> Self {
        MethodFlags {
            reweighting: false,
            mixup: false,
            mixup_alpha: default_mixup_alpha(),
            label_smoothing: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceOptions {
    /// Record per-epoch metrics. Turning this off skips evaluation work but
    /// cannot change any trained parameter.
    #[serde(default = "default_true")]
    pub per_epoch: bool,
}

fn default_true() -> bool {
    true
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { per_epoch: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub model: ModelSpec,
    pub optim: OptimConfig,
    #[serde(default)]
    pub method: MethodFlags,
    /// Fraction held out as the (always noise-free) test split.
    pub eval_fraction: f64,
    pub seed: u64,
    /// MW updates per epoch; 1 is the end-of-epoch update.
    #[serde(default = "default_one")]
    pub mw_updates_per_epoch: usize,
    #[serde(default)]
    pub trace: TraceOptions,
}

fn default_one() -> usize {
    1
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.optim.validate()?;
        if !(0.0 < self.eval_fraction && self.eval_fraction < 1.0) {
            return Err(Error::parameter("eval_fraction must lie in (0, 1)"));
        }
        if self.mw_updates_per_epoch == 0 {
            return Err(Error::parameter("mw_updates_per_epoch must be >= 1"));
        }
        if !(self.method.mixup_alpha > 0.0 && self.method.mixup_alpha.is_finite()) {
            return Err(Error::parameter("mixup_alpha must be > 0"));
        }
        if !(0.0..1.0).contains(&self.method.label_smoothing) {
            return Err(Error::parameter("label_smoothing must lie in [0, 1)"));
        }
        let ratio = self.dataset.noise_ratio();
        if !(0.0..1.0).contains(&ratio) {
            return Err(Error::parameter("noise_ratio must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub weighted_loss: f64,
    pub clean_train_loss: f64,
    pub test_acc: f64,
    pub grad_norm: f64,
    pub noisy_mass: f64,
    pub eta: f64,
    pub skipped_batches: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingTrace {
    pub records: Vec<EpochRecord>,
    pub final_theta: ParameterVector,
    pub final_dist: SimplexDist,
    pub final_test: Metrics,
    pub final_clean_train: Metrics,
    pub spec: ExperimentSpec,
}

impl TrainingTrace {
    /// CSV with the fixed header
    /// `epoch,weighted_loss,clean_train_loss,test_acc,grad_norm,noisy_mass,eta,skipped_batches`.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(
            "epoch,weighted_loss,clean_train_loss,test_acc,grad_norm,noisy_mass,eta,skipped_batches\n",
        );
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.epoch,
                r.weighted_loss,
                r.clean_train_loss,
                r.test_acc,
                r.grad_norm,
                r.noisy_mass,
                r.eta,
                r.skipped_batches
            ));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_csv_string().as_bytes())?;
        Ok(())
    }

    /// Final metrics plus the full spec echo (defaults materialized).
    pub fn summary_json(&self) -> Result<String> {
        let value = serde_json::json!({
            "final_test_accuracy": self.final_test.accuracy,
            "final_test_loss": self.final_test.mean_loss,
            "final_clean_train_loss": self.final_clean_train.mean_loss,
            "final_noisy_mass": self.records.last().map(|r| r.noisy_mass),
            "final_weighted_loss": self.records.last().map(|r| r.weighted_loss),
            "epochs": self.records.len().saturating_sub(1),
            "skipped_batches": self.records.iter().map(|r| r.skipped_batches).sum::<usize>(),
            "spec": self.spec,
        });
        Ok(serde_json::to_string_pretty(&value)?)
    }

    pub fn write_summary(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.summary_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub mean_loss: f64,
}

/// Argmax accuracy and mean per-example loss on a classification view.
pub fn evaluate(model: &LossModel, theta: &ParameterVector, data: &Examples) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Data("evaluate: empty dataset".into()));
    }
    let mut correct = 0usize;
    let mut loss_sum = 0.0;
    for i in 0..data.len() {
        let x = data.input(i);
        let target = data.target(i);
        loss_sum += model.loss_i(theta, x, target)?;
        let logits = model.logits(theta, x)?;
        let pred = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(k, _)| k)
            .unwrap_or(0);
        if let crate::losses::Target::Class(c) = target {
            if pred == c {
                correct += 1;
            }
        } else {
            return Err(Error::Capability(
                "evaluate: accuracy needs class targets".into(),
            ));
        }
    }
    Ok(Metrics {
        accuracy: correct as f64 / data.len() as f64,
        mean_loss: loss_sum / data.len() as f64,
    })
}

fn current_dist(state: &Option<ReweightState>, uniform: &SimplexDist) -> SimplexDist {
    match state {
        Some(s) => s.normalize(),
        None => uniform.clone(),
    }
}

/// Full training run driven by a validated spec.
///
/// Pipeline: build the dataset, split off the noise-free test set, inject
/// label noise into the training split only, then run the epoch loop.
/// Any non-finite parameter or loss aborts with the offending epoch/batch.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<TrainingTrace> {
    spec.validate()?;
    let root = SeededRng::new(spec.seed);
    let full = spec.dataset.build(&mut root.substream(0))?;
    let (train, test) = full.split_holdout(spec.eval_fraction, &mut root.substream(1))?;
    let train = inject_label_noise(&train, spec.dataset.noise_ratio(), &mut root.substream(2))?;

    let model = spec
        .model
        .build(train.dim(), train.num_classes())?
        .with_label_smoothing(spec.method.label_smoothing)?;
    let hard_model = model.without_smoothing();
    let mut theta = model.init_params(&mut root.substream(3)).values().to_vec();
    let mut mixup_rng = root.substream(4);

    let n = train.len();
    let cfg = &spec.optim;
    if cfg.batch_size > n {
        return Err(Error::parameter(format!(
            "batch_size {} exceeds training set size {n}",
            cfg.batch_size
        )));
    }
    let train_view = train.train_view();
    let batch_prob = ModelOnData::new(&model, train_view)?;
    let mw_prob = ModelOnData::new(&hard_model, train_view)?;
    let test_view = test.clean_view();
    let clean_train_view = train.clean_view();
    let mask = train.corruption_mask();

    let uniform = SimplexDist::uniform(n)?;
    let mut state = if spec.method.reweighting {
        Some(ReweightState::new_uniform(n, cfg.eta)?)
    } else {
        None
    };
    let mut velocity = vec![0.0; theta.len()];
    let mut grad_buf: Vec<f64> = Vec::new();
    let mut records = Vec::with_capacity(cfg.epochs + 1);

    let record_at = |epoch: usize,
                     theta: &[f64],
                     dist: &SimplexDist,
                     eta: f64,
                     skipped: usize|
     -> Result<EpochRecord> {
        let shaped = ParameterVector::new(Vec64::new(theta.to_vec()), model.param_shape())
            .map_err(|_| Error::Abort { epoch, batch: 0 })?;
        let losses = mw_prob.losses(theta);
        let weighted_loss = dot(dist.as_slice(), &losses)?;
        let g = optim::weighted_grad(&mw_prob, theta, dist.as_slice());
        let grad_norm = g.iter().fold(0.0, |a, v| a + v * v).sqrt();
        let clean_train = evaluate_mean_loss(&hard_model, &shaped, &clean_train_view)?;
        let test_metrics = evaluate(&hard_model, &shaped, &test_view)?;
        Ok(EpochRecord {
            epoch,
            weighted_loss,
            clean_train_loss: clean_train,
            test_acc: test_metrics.accuracy,
            grad_norm,
            noisy_mass: dist.mass_of(mask)?,
            eta,
            skipped_batches: skipped,
        })
    };

    if spec.trace.per_epoch {
        let eta = state_eta(&state);
        records.push(record_at(0, &theta, &current_dist(&state, &uniform), eta, 0)?);
    }

    for t in 1..=cfg.epochs {
        let order = optim::epoch_order(cfg.shuffle_seed, t, n);
        let alpha = cfg.alpha_at(t);
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        let updates = spec.mw_updates_per_epoch.min(batches.len()).max(1);
        let group_size = batches.len().div_ceil(updates);
        let mut p = current_dist(&state, &uniform);
        let mut skipped = 0usize;
        let mut batch_no = 0usize;

        for group in batches.chunks(group_size) {
            for batch in group {
                let stepped = if spec.method.mixup {
                    let mixed =
                        mixup_batch(&train, batch, spec.method.mixup_alpha, &mut mixup_rng)?;
                    let mixed_view =
                        Examples::new(&mixed.inputs, TargetsRef::Soft(&mixed.targets))?;
                    let mixed_prob = ModelOnData::new(&model, mixed_view)?;
                    // Each mixed pair carries its primary example's weight.
                    let local_w: Vec<f64> = batch.iter().map(|&i| p.get(i)).collect();
                    let local_idx: Vec<usize> = (0..batch.len()).collect();
                    optim::weighted_batch_update(
                        &mixed_prob,
                        &mut theta,
                        &local_w,
                        &local_idx,
                        alpha,
                        cfg.momentum,
                        &mut velocity,
                        &mut grad_buf,
                    )
                } else {
                    optim::weighted_batch_update(
                        &batch_prob,
                        &mut theta,
                        p.as_slice(),
                        batch,
                        alpha,
                        cfg.momentum,
                        &mut velocity,
                        &mut grad_buf,
                    )
                };
                if !stepped {
                    skipped += 1;
                }
                if !theta.iter().all(|v| v.is_finite()) {
                    return Err(Error::Abort {
                        epoch: t,
                        batch: batch_no,
                    });
                }
                batch_no += 1;
            }
            if let Some(s) = &state {
                // Forward pass on raw inputs with hard observed labels.
                let losses = mw_prob.losses(&theta);
                if losses.iter().any(|l| !l.is_finite()) {
                    return Err(Error::Abort {
                        epoch: t,
                        batch: batch_no.saturating_sub(1),
                    });
                }
                state = Some(s.accumulate(&losses)?);
                p = current_dist(&state, &uniform);
            }
        }

        if spec.trace.per_epoch || t == cfg.epochs {
            let eta = state_eta(&state);
            records.push(record_at(t, &theta, &p, eta, skipped)?);
        }
    }

    let final_dist = current_dist(&state, &uniform);
    let final_theta = ParameterVector::new(Vec64::new(theta), model.param_shape())?;
    let final_test = evaluate(&hard_model, &final_theta, &test_view)?;
    let final_clean_train = Metrics {
        accuracy: evaluate(&hard_model, &final_theta, &clean_train_view)?.accuracy,
        mean_loss: evaluate_mean_loss(&hard_model, &final_theta, &clean_train_view)?,
    };
    Ok(TrainingTrace {
        records,
        final_theta,
        final_dist,
        final_test,
        final_clean_train,
        spec: spec.clone(),
    })
}

fn state_eta(state: &Option<ReweightState>) -> f64 {
    state.as_ref().map(|s| s.eta()).unwrap_or(0.0)
}

fn evaluate_mean_loss(
    model: &LossModel,
    theta: &ParameterVector,
    data: &Examples,
) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..data.len() {
        sum += model.loss_i(theta, data.input(i), data.target(i))?;
    }
    Ok(sum / data.len().max(1) as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub eta: f64,
    pub test_accuracy: f64,
    pub final_noisy_mass: f64,
    /// The final distribution collapsed onto (numerically) one example.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTable {
    /// Sorted by test accuracy, best first (ties broken by smaller eta).
    pub rows: Vec<GridRow>,
    pub selected_eta: f64,
    pub duplicates_removed: usize,
}

impl GridTable {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("eta,test_accuracy,final_noisy_mass,degenerate\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.eta, r.test_accuracy, r.final_noisy_mass, r.degenerate as u8
            ));
        }
        out
    }
}

/// One reweighted run per MW step-size candidate, all under the shared spec
/// seed; duplicates are dropped. Candidate runs execute in parallel when the
/// `MR_OPTIM_THREADS` environment variable allows it (0 or unset runs
/// sequentially); results are deterministic either way.
pub fn grid_search_eta(spec: &ExperimentSpec, candidates: &[f64]) -> Result<GridTable> {
    if candidates.is_empty() {
        return Err(Error::parameter("grid search needs at least one eta"));
    }
    let mut unique: Vec<f64> = Vec::new();
    for &eta in candidates {
        if !unique.contains(&eta) {
            unique.push(eta);
        }
    }
    let duplicates_removed = candidates.len() - unique.len();
    for &eta in &unique {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::parameter(format!("grid eta {eta} must be > 0")));
        }
    }

    let specs: Vec<ExperimentSpec> = unique
        .iter()
        .map(|&eta| {
            let mut s = spec.clone();
            s.method.reweighting = true;
            s.optim.eta = eta;
            s
        })
        .collect();

    let threads = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .unwrap_or(0);
    let traces: Vec<Result<TrainingTrace>> = if threads <= 1 {
        specs.iter().map(run_experiment).collect()
    } else {
        let mut traces = Vec::with_capacity(specs.len());
        for group in specs.chunks(threads) {
            let mut group_results: Vec<Result<TrainingTrace>> = std::thread::scope(|scope| {
                let handles: Vec<_> = group
                    .iter()
                    .map(|s| scope.spawn(move || run_experiment(s)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(Error::Data("grid run panicked".into())))
                    })
                    .collect()
            });
            traces.append(&mut group_results);
        }
        traces
    };

    let mut rows = Vec::with_capacity(unique.len());
    for (eta, trace) in unique.iter().zip(traces) {
        let trace = trace?;
        rows.push(GridRow {
            eta: *eta,
            test_accuracy: trace.final_test.accuracy,
            final_noisy_mass: trace.records.last().map(|r| r.noisy_mass).unwrap_or(0.0),
            degenerate: trace.final_dist.max_entry() > 1.0 - 1e-6,
        });
    }
    rows.sort_by(|a, b| {
        b.test_accuracy
            .total_cmp(&a.test_accuracy)
            .then(a.eta.total_cmp(&b.eta))
    });
    let selected_eta = rows[0].eta;
    Ok(GridTable {
        rows,
        selected_eta,
        duplicates_removed,
    })
}
