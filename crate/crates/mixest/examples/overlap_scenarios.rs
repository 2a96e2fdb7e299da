//! Pairwise component overlap as a difficulty knob: the overlap matrix
//! for the tabulated 3-component mixtures and the separation solver that
//! hits a target overlap in the two-component family.
//!
//! Run with: `cargo run --release --example overlap_scenarios`

use mixest::metrics::{overlap_report, solve_b_for_overlap, two_component_mixture};
use mixest::sim::ThreeComponentRow;
use mixest::Family;

fn main() -> mixest::Result<()> {
    println!("3-component normal mixtures, mean pairwise overlap:");
    for row in ThreeComponentRow::all() {
        let (w, mu, sd) = row.parameters();
        let g = mixest::MixingDistribution::new(w.to_vec(), mu.to_vec(), sd.to_vec())?;
        let report = overlap_report(&g, Family::Normal, 50_000)?;
        println!("  row {row:>4}: MeanOmega = {:.3}", report.mean_omega);
    }

    println!("\nSeparation b solving o12 = target for p = 0.5, a = 1 (normal):");
    for target in [0.1, 0.03] {
        let b = solve_b_for_overlap(0.5, 1.0, Family::Normal, target)?;
        let g = two_component_mixture(0.5, 1.0, b)?;
        let check = overlap_report(&g, Family::Normal, 200_000)?;
        println!(
            "  target {target}: b = {b:.4} (achieved overlap {:.5})",
            check.get(0, 1)
        );
    }
    Ok(())
}
