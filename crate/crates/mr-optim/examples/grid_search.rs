//! MW step-size grid search over a log scale on the noisy-blobs task.
//! Set MR_OPTIM_THREADS to run candidates in parallel.
//!
//! ```bash
//! cargo run --example grid_search
//! MR_OPTIM_THREADS=4 cargo run --example grid_search
//! ```

use mr_optim::optim::OptimConfig;
use mr_optim::trainer::{
    grid_search_eta, DatasetSpec, ExperimentSpec, MethodFlags, ModelKindSpec, ModelSpec,
    TraceOptions,
};

fn main() -> mr_optim::Result<()> {
    let spec = ExperimentSpec {
        dataset: DatasetSpec::Blobs {
            per_class: 200,
            classes: 4,
            dim: 8,
            separation: 6.0,
            noise_ratio: 0.4,
        },
        model: ModelSpec {
            kind: ModelKindSpec::Softmax,
            hidden: 16,
            l2: 0.0,
        },
        optim: OptimConfig {
            alpha: 0.1,
            eta: 0.01, // replaced per candidate
            batch_size: 32,
            epochs: 25,
            momentum: 0.9,
            shuffle_seed: 2,
            lr_decay: None,
        },
        method: MethodFlags {
            reweighting: true,
            mixup: false,
            mixup_alpha: 1.0,
            label_smoothing: 0.0,
        },
        eval_fraction: 0.25,
        seed: 2,
        mw_updates_per_epoch: 1,
        trace: TraceOptions { per_epoch: true },
    };

    let candidates = [0.1, 0.01, 0.001, 0.0001];
    let table = grid_search_eta(&spec, &candidates)?;
    println!("eta        test acc   final noisy mass   degenerate");
    for row in &table.rows {
        println!(
            "{:<9}  {:.4}     {:.4}             {}",
            row.eta, row.test_accuracy, row.final_noisy_mass, row.degenerate
        );
    }
    println!("\nselected eta: {}", table.selected_eta);
    Ok(())
}
