//! Drive the convergence checkers: the per-epoch descent inequality, the
//! averaged-gradient bound, the sampled-variant Monte-Carlo bound, and the
//! linear-case probability/error bounds. Same machinery as `mr-optim check`.
//!
//! ```bash
//! cargo run --example theorem_checks
//! ```

use mr_optim::checks::{
    all_passed, bounded_p_suite, descent_suite, thm1_suite, thm2_suite, thm4_decay_suite,
};

fn main() -> mr_optim::Result<()> {
    let mut total = 0usize;
    let mut failed = 0usize;
    let suites: Vec<(&str, Vec<mr_optim::checks::CheckOutcome>)> = vec![
        ("descent", descent_suite(10, 1)?),
        ("gradient bound", thm1_suite(5, 1)?),
        ("sampled bound", thm2_suite(25, 500, 0.1)?),
        ("clean-probability floor", bounded_p_suite(1000, 0.01)?),
        ("error decay", thm4_decay_suite(1000, 0.01)?),
    ];
    for (name, outcomes) in &suites {
        let ok = all_passed(outcomes);
        println!(
            "{} {name}: {} instance(s)",
            if ok { "PASS" } else { "FAIL" },
            outcomes.len()
        );
        for o in outcomes.iter().take(3) {
            println!("    {} — {}", o.label, o.detail);
        }
        if outcomes.len() > 3 {
            println!("    ... ({} more)", outcomes.len() - 3);
        }
        total += outcomes.len();
        failed += outcomes.iter().filter(|o| !o.passed).count();
    }
    println!("\n{} checks, {} failed", total, failed);
    Ok(())
}
