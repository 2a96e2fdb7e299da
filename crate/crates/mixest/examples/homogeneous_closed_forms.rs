//! Closed-form homogeneous (K = 1) minimum-Wasserstein fits next to the
//! maximum likelihood fits for all three families.
//!
//! Run with: `cargo run --release --example homogeneous_closed_forms`

use mixest::mixture::{sample, MixingDistribution, SortedSample};
use mixest::mwde::fit_homogeneous_mwde;
use mixest::pmle::fit_homogeneous_mle;
use mixest::Family;

fn main() -> mixest::Result<()> {
    // True location 1.5, scale 0.75 in every family.
    let truth = MixingDistribution::single(1.5, 0.75)?;
    for family in [Family::Normal, Family::Logistic, Family::Gumbel] {
        let data = sample(&truth, family, 2000, 7);
        let s = SortedSample::new(&data)?;
        let mwde = fit_homogeneous_mwde(&s, family)?;
        let mle = fit_homogeneous_mle(&s, family)?;
        println!(
            "{family:>8}:  mwde (mu = {:+.4}, sigma = {:.4})   mle (mu = {:+.4}, sigma = {:.4})",
            mwde.mu, mwde.sigma, mle.mu, mle.sigma
        );
    }

    // The two-point sample has a fully explicit answer for the normal:
    // mu = 0, sigma = 2 f0(0) = 0.79788.
    let two = SortedSample::new(&[-1.0, 1.0])?;
    let fit = fit_homogeneous_mwde(&two, Family::Normal)?;
    println!(
        "\n{{-1, 1}} normal closed form: mu = {:.5}, sigma = {:.5}",
        fit.mu, fit.sigma
    );
    Ok(())
}
