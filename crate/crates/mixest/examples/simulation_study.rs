//! Desk-scale estimator comparison on a well-specified two-component
//! scenario: mean L2 distance and mean adjusted Rand index per sample
//! size, both estimators on identical datasets.
//!
//! Run with: `cargo run --release --example simulation_study`

use mixest::metrics::solve_b_for_overlap;
use mixest::sim::{aggregate, run_experiment, Estimator, ExperimentConfig, ScenarioSpec};
use mixest::Family;

fn main() -> mixest::Result<()> {
    let b = solve_b_for_overlap(0.5, 1.0, Family::Normal, 0.03)?;
    let config = ExperimentConfig {
        scenario: ScenarioSpec::TwoComponent {
            family: Family::Normal,
            p: 0.5,
            a: 1.0,
            b,
        },
        sample_sizes: vec![100, 500, 1000],
        replications: 30,
        estimators: vec![Estimator::Mwde, Estimator::Pmle],
        master_seed: 99,
        n_starts: 4,
        a_n: None,
    };
    let rows = run_experiment(&config)?;
    let summary = aggregate(&rows)?;

    println!("scenario: {}", config.scenario.id());
    println!(
        "{:>6} {:>6} {:>10} {:>10} {:>10} {:>10}",
        "est", "N", "ML2", "(se)", "MARI", "(se)"
    );
    for cell in &summary {
        println!(
            "{:>6} {:>6} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            cell.estimator.to_string(),
            cell.n,
            cell.ml2,
            cell.ml2_se.unwrap_or(f64::NAN),
            cell.mari,
            cell.mari_se.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
