//! Robustness comparison: outliers, density contamination, and Student-t
//! mis-specification, scored against the clean two-component normal
//! mixture (MARI can legitimately fall as N grows under
//! mis-specification).
//!
//! Run with: `cargo run --release --example robustness`

use mixest::sim::{aggregate, run_experiment, Estimator, ExperimentConfig, ScenarioSpec};

fn main() -> mixest::Result<()> {
    let (p, a, b) = (0.5, 1.0, 4.3402);
    let scenarios = vec![
        ScenarioSpec::OutlierContaminated {
            p,
            a,
            b,
            alpha: 0.01,
        },
        ScenarioSpec::DensityContaminated {
            p,
            a,
            b,
            alpha: 0.01,
        },
        ScenarioSpec::MisspecifiedI { p, a, b },
        ScenarioSpec::MisspecifiedII { p, a, b },
    ];
    for scenario in scenarios {
        let config = ExperimentConfig {
            scenario,
            sample_sizes: vec![100, 500],
            replications: 20,
            estimators: vec![Estimator::Mwde, Estimator::Pmle],
            master_seed: 31,
            n_starts: 4,
            a_n: None,
        };
        let summary = aggregate(&run_experiment(&config)?)?;
        println!("{}", config.scenario.id());
        for cell in &summary {
            println!(
                "  {:>5} N = {:>4}: ML2 = {:.4}  MARI = {:.4}  failures = {}",
                cell.estimator.to_string(),
                cell.n,
                cell.ml2,
                cell.mari,
                cell.failures
            );
        }
    }
    Ok(())
}
