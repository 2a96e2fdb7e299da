//! Fit a two-component normal mixture with both estimators and compare
//! the fits against the generating mixture.
//!
//! Run with: `cargo run --release --example fit_two_component`

use mixest::metrics::l2_mixture_distance;
use mixest::mixture::{sample, MixingDistribution, SortedSample};
use mixest::mwde::{fit_mwde, MwdeConfig};
use mixest::pmle::{fit_pmle, PmleConfig};
use mixest::Family;

fn main() -> mixest::Result<()> {
    let truth = MixingDistribution::new(vec![0.35, 0.65], vec![0.0, 4.0], vec![1.0, 0.8])?;
    let family = Family::Normal;
    let data = sample(&truth, family, 800, 20260811);
    let s = SortedSample::new(&data)?;

    let mwde = fit_mwde(
        &s,
        family,
        2,
        &MwdeConfig {
            seed: 1,
            ..MwdeConfig::default()
        },
    )?;
    let pmle = fit_pmle(
        &s,
        family,
        2,
        &PmleConfig {
            seed: 1,
            ..PmleConfig::default()
        },
    )?;

    println!("truth:    {}", describe(&truth));
    println!(
        "mwde:     {}  (W2^2 = {:.5}, {} iterations, converged = {})",
        describe(&mwde.g_hat),
        mwde.objective,
        mwde.iterations,
        mwde.converged
    );
    println!(
        "pmle:     {}  (penalized loglik = {:.3}, {} EM iterations)",
        describe(&pmle.g_hat),
        pmle.objective,
        pmle.iterations
    );
    println!(
        "L2 to truth:  mwde {:.5}   pmle {:.5}",
        l2_mixture_distance(&mwde.g_hat, &truth, family)?,
        l2_mixture_distance(&pmle.g_hat, &truth, family)?
    );
    Ok(())
}

fn describe(g: &MixingDistribution) -> String {
    (0..g.k())
        .map(|k| {
            format!(
                "{:.3}*({:+.3}, {:.3})",
                g.weights()[k],
                g.locations()[k],
                g.scales()[k]
            )
        })
        .collect::<Vec<_>>()
        .join(" + ")
}
