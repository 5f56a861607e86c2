//! Verify every analytic gradient in the model zoo against central finite
//! differences.
//!
//! ```bash
//! cargo run --example gradient_check
//! ```

use mr_optim::losses::{
    finite_diff_check, Examples, LossKind, LossModel, ModelKind, TargetsRef,
};
use mr_optim::tensor::{Mat64, SeededRng};

fn main() -> mr_optim::Result<()> {
    let combos: Vec<(&str, LossModel, usize)> = vec![
        (
            "scalar logistic",
            LossModel::new(ModelKind::Scalar1D, LossKind::Logistic)?,
            1,
        ),
        (
            "scalar squared ",
            LossModel::new(ModelKind::Scalar1D, LossKind::Squared)?,
            1,
        ),
        (
            "linear logistic",
            LossModel::new(ModelKind::Linear { dim: 6 }, LossKind::Logistic)?,
            6,
        ),
        (
            "linear squared ",
            LossModel::new(ModelKind::Linear { dim: 6 }, LossKind::Squared)?,
            6,
        ),
        (
            "softmax CE     ",
            LossModel::new(ModelKind::Softmax { dim: 5, classes: 3 }, LossKind::CrossEntropy)?,
            5,
        ),
        (
            "mlp1 CE (+ls)  ",
            LossModel::new(
                ModelKind::Mlp1 {
                    dim: 5,
                    hidden: 16,
                    classes: 3,
                },
                LossKind::CrossEntropy,
            )?
            .with_label_smoothing(0.1)?,
            5,
        ),
    ];

    println!("max relative gradient error over 50 random points (h = 1e-5):");
    for (name, model, dim) in combos {
        let mut worst = 0.0f64;
        for seed in 0..50u64 {
            let mut rng = SeededRng::new(seed);
            let theta = model.init_params(&mut rng);
            let x: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
            let inputs = Mat64::new(1, dim, x)?;
            let ys = [if rng.next_f64() < 0.5 { 1.0 } else { -1.0 }];
            let cs = [rng.range(3)];
            let data = match model.loss {
                LossKind::CrossEntropy => Examples::new(&inputs, TargetsRef::Classes(&cs))?,
                _ => Examples::new(&inputs, TargetsRef::Reals(&ys))?,
            };
            worst = worst.max(finite_diff_check(&model, &theta, &data, 1e-5)?);
        }
        println!("  {name}  {worst:.3e}");
    }
    Ok(())
}
