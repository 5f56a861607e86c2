//! Every combination of {reweighting, mixup, label smoothing} on the same
//! noisy task — the flags compose freely.
//!
//! ```bash
//! cargo run --example mixup_smoothing
//! ```

use mr_optim::optim::OptimConfig;
use mr_optim::trainer::{
    run_experiment, DatasetSpec, ExperimentSpec, MethodFlags, ModelKindSpec, ModelSpec,
    TraceOptions,
};

fn main() -> mr_optim::Result<()> {
    let base = ExperimentSpec {
        dataset: DatasetSpec::Blobs {
            per_class: 250,
            classes: 4,
            dim: 8,
            separation: 5.0,
            noise_ratio: 0.4,
        },
        model: ModelSpec {
            kind: ModelKindSpec::Softmax,
            hidden: 16,
            l2: 0.0,
        },
        optim: OptimConfig {
            alpha: 0.1,
            eta: 0.05,
            batch_size: 32,
            epochs: 25,
            momentum: 0.9,
            shuffle_seed: 4,
            lr_decay: None,
        },
        method: MethodFlags::default(),
        eval_fraction: 0.2,
        seed: 4,
        mw_updates_per_epoch: 1,
        trace: TraceOptions { per_epoch: false },
    };

    println!("reweight  mixup  smoothing  ->  test accuracy");
    for bits in 0..8u8 {
        let mut spec = base.clone();
        spec.method = MethodFlags {
            reweighting: bits & 1 != 0,
            mixup: bits & 2 != 0,
            mixup_alpha: 1.0,
            label_smoothing: if bits & 4 != 0 { 0.1 } else { 0.0 },
        };
        let trace = run_experiment(&spec)?;
        println!(
            "{:>8}  {:>5}  {:>9}      {:.4}",
            spec.method.reweighting,
            spec.method.mixup,
            spec.method.label_smoothing,
            trace.final_test.accuracy
        );
    }
    Ok(())
}
