//! Multiplicative reweighting of training examples.
//!
//! Training alternates between gradient-based updates of the model
//! parameters on a probability-weighted empirical loss and
//! multiplicative-weights updates of that probability distribution, driven
//! by cumulative per-example losses: examples that keep hurting lose weight
//! exponentially, which is what makes the method robust to label noise.
//!
//! The crate provides:
//!
//! - [`reweighting`]: the weight state machine (log-space, underflow-proof);
//! - [`optim`]: full-batch and mini-batch reweighted training loops, the
//!   sampled variant, uniform baselines, and the descent/convergence
//!   checkers;
//! - [`losses`]: a small model zoo with analytic gradients and a
//!   finite-difference checker;
//! - [`illustrative`]: the 1D logistic and least-squares reproductions with
//!   their epoch/error bounds;
//! - [`data`]: synthetic blobs, label-noise injection with an exact
//!   corruption mask, mixup, and CSV I/O;
//! - [`trainer`]: the experiment driver (flags for reweighting, mixup, label
//!   smoothing) with CSV/JSON artifacts and the MW step-size grid search;
//! - [`checks`]: runnable checker suites behind the `check` subcommand.
//!
//! Each major capability has a runnable program under `examples/`; the
//! `mr-optim` binary exposes the same surface as subcommands
//! (`illustrative`, `train`, `check`, `grid`).
//!
//! ```
//! use mr_optim::optim::{mr_gd_run, OptimConfig, QuadraticEnsemble};
//! use mr_optim::losses::ParameterVector;
//! use mr_optim::tensor::SeededRng;
//!
//! let mut rng = SeededRng::new(7);
//! let ensemble = QuadraticEnsemble::random(10, 3, &mut rng);
//! let cfg = OptimConfig {
//!     alpha: 1.0 / ensemble.beta(),
//!     eta: 0.01,
//!     batch_size: 10,
//!     epochs: 50,
//!     momentum: 0.0,
//!     shuffle_seed: 0,
//!     lr_decay: None,
//! };
//! let trace = mr_gd_run(&cfg, &ensemble, &ParameterVector::flat(vec![0.0; 3])).unwrap();
//! assert!(trace.final_report().weighted_loss < trace.reports[0].weighted_loss);
//! ```

// Dense numeric kernels index across several arrays at once; explicit
// indices read better than zipped iterators there.
#![allow(clippy::needless_range_loop)]

pub mod checks;
pub mod cli;
pub mod data;
pub mod error;
pub mod illustrative;
pub mod losses;
pub mod optim;
pub mod reweighting;
pub mod tensor;
pub mod trainer;

pub use error::{Error, Result};
pub use losses::{LossKind, LossModel, ModelKind, ParameterVector, SmoothnessProfile};
pub use reweighting::{ReweightState, SimplexDist};
pub use tensor::{dot, logsumexp, pinv_small, Mat64, SeededRng, Vec64};
