//! Convergence-rate study under the homogeneous model: MSE of the fitted
//! location and scale versus sample size for the closed-form MWDE and the
//! MLE. Both decay like 1/N (log-log slope near -1).
//!
//! Run with: `cargo run --release --example rate_law`

use mixest::sim::{homogeneous_mse, log_log_slope, run_homogeneous_study};
use mixest::Family;

fn main() -> mixest::Result<()> {
    let sizes = [100usize, 1000, 10000];
    for family in [Family::Normal, Family::Logistic] {
        let rows = run_homogeneous_study(family, &sizes, 200, 17)?;
        let mse = homogeneous_mse(&rows);
        println!("{family} family (R = 200):");
        println!(
            "{:>6} {:>12} {:>12} {:>12} {:>12}",
            "N", "mse_mu mle", "mse_mu mwde", "mse_sd mle", "mse_sd mwde"
        );
        for &n in &sizes {
            println!(
                "{:>6} {:>12.2e} {:>12.2e} {:>12.2e} {:>12.2e}",
                n,
                mse[&("mle", n)].0,
                mse[&("mwde", n)].0,
                mse[&("mle", n)].1,
                mse[&("mwde", n)].1
            );
        }
        for est in ["mle", "mwde"] {
            let pts: Vec<(f64, f64)> = sizes
                .iter()
                .map(|&n| (n as f64, mse[&(est, n)].0))
                .collect();
            println!(
                "  {est}: location MSE log-log slope = {:.3}",
                log_log_slope(&pts)
            );
        }
        println!();
    }
    Ok(())
}
