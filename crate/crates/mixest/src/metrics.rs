//! Performance metrics for learned mixtures: L2 distance between mixture
//! densities, the adjusted Rand index between maximum-posterior
//! clusterings, and pairwise component overlap with the separation solver
//! used to construct simulation scenarios.

use std::collections::HashMap;

use crate::family::Family;
use crate::mixture::MixingDistribution;
use crate::quad;
use crate::{Error, Result};

/// Default quantile-grid resolution for overlap probabilities.
pub const DEFAULT_OVERLAP_RESOLUTION: usize = 200_000;

/// Tolerance for the adaptive product-moment quadrature.
const PRODUCT_QUAD_TOL: f64 = 1e-10;

/// `integral f(x | theta_1) f(x | theta_2) dx` for two components.
///
/// Normal components have the closed form
/// `phi(mu_1 - mu_2 | 0, sqrt(sigma_1^2 + sigma_2^2))`; the other families
/// go through adaptive quadrature over the real line.
pub fn component_product_integral(
    family: Family,
    mu1: f64,
    sigma1: f64,
    mu2: f64,
    sigma2: f64,
) -> Result<f64> {
    match family {
        Family::Normal => {
            let var = sigma1 * sigma1 + sigma2 * sigma2;
            let d = mu1 - mu2;
            Ok((-0.5 * d * d / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
        }
        Family::Logistic | Family::Gumbel => {
            let f = |x: f64| {
                family.pdf((x - mu1) / sigma1) / sigma1 * family.pdf((x - mu2) / sigma2) / sigma2
            };
            quad::integrate_real_line(&f, 0.5 * (mu1 + mu2), sigma1 + sigma2, PRODUCT_QUAD_TOL)
        }
    }
}

/// The `K1 x K2` matrix of pairwise component product moments
/// `S[n][m] = integral f(x | theta_n) f(x | theta~_m) dx`, row-major.
pub fn product_moment_matrix(
    g1: &MixingDistribution,
    g2: &MixingDistribution,
    family: Family,
) -> Result<Vec<f64>> {
    let (k1, k2) = (g1.k(), g2.k());
    let mut s = vec![0.0; k1 * k2];
    for i in 0..k1 {
        for j in 0..k2 {
            s[i * k2 + j] = component_product_integral(
                family,
                g1.locations()[i],
                g1.scales()[i],
                g2.locations()[j],
                g2.scales()[j],
            )?;
        }
    }
    Ok(s)
}

/// L2 distance between the two mixture densities:
/// `{w' S_11 w - 2 w' S_12 w~ + w~' S_22 w~}^{1/2}`.
///
/// Symmetric in its arguments and zero exactly when the densities agree.
/// Requires positive scales in both mixtures.
pub fn l2_mixture_distance(
    g1: &MixingDistribution,
    g2: &MixingDistribution,
    family: Family,
) -> Result<f64> {
    if !g1.is_continuous() || !g2.is_continuous() {
        return Err(Error::InvalidParameter(
            "L2 distance needs positive scales".into(),
        ));
    }
    let quad_form = |s: &[f64], wa: &[f64], wb: &[f64]| -> f64 {
        let cols = wb.len();
        let mut acc = 0.0;
        for (i, &wi) in wa.iter().enumerate() {
            for (j, &wj) in wb.iter().enumerate() {
                acc += wi * wj * s[i * cols + j];
            }
        }
        acc
    };
    let s11 = product_moment_matrix(g1, g1, family)?;
    let s12 = product_moment_matrix(g1, g2, family)?;
    let s22 = product_moment_matrix(g2, g2, family)?;
    let sq = quad_form(&s11, g1.weights(), g1.weights())
        - 2.0 * quad_form(&s12, g1.weights(), g2.weights())
        + quad_form(&s22, g2.weights(), g2.weights());
    // Exact zero distance shows up as rounding-level negative values.
    Ok(sq.max(0.0).sqrt())
}

/// Adjusted Rand index between two labelings of the same items.
///
/// Evaluated in integer arithmetic from the contingency table; identical
/// partitions give exactly 1. The degenerate case where both index terms
/// coincide (both partitions trivial) returns 1.
pub fn ari(labels_a: &[usize], labels_b: &[usize]) -> Result<f64> {
    if labels_a.len() != labels_b.len() {
        return Err(Error::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "ARI needs at least two items".into(),
        ));
    }
    let mut contingency: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&a, &b) in labels_a.iter().zip(labels_b) {
        *contingency.entry((a, b)).or_insert(0) += 1;
        *rows.entry(a).or_insert(0) += 1;
        *cols.entry(b).or_insert(0) += 1;
    }
    let c2 = |x: u64| -> i128 { (x as i128) * (x as i128 - 1) / 2 };
    let sum_ij: i128 = contingency.values().map(|&v| c2(v)).sum();
    let sum_a: i128 = rows.values().map(|&v| c2(v)).sum();
    let sum_b: i128 = cols.values().map(|&v| c2(v)).sum();
    let pairs = c2(n as u64);
    // Doubled to keep everything integral: ARI = num2 / den2.
    let num2 = 2 * (pairs * sum_ij - sum_a * sum_b);
    let den2 = pairs * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den2 == 0 {
        return Ok(1.0);
    }
    Ok(num2 as f64 / den2 as f64)
}

/// Pairwise overlap between components `i` and `j` of a mixture under the
/// maximum-posterior rule.
#[derive(Debug, Clone, Copy)]
pub struct PairwiseOverlap {
    /// P(unit from `i` classified as `j`).
    pub o_j_given_i: f64,
    /// P(unit from `j` classified as `i`).
    pub o_i_given_j: f64,
    /// Total overlap `o_ij = o_{j|i} + o_{i|j}`.
    pub o_ij: f64,
}

/// Directed misclassification probability
/// `o_{j|i} = P(w_i f(X | theta_i) < w_j f(X | theta_j))` for
/// `X ~ f(. | theta_i)`, evaluated as the average of the strict-inequality
/// indicator over the deterministic mid-quantile grid
/// `x_m = F^{-1}((m - 1/2)/M | theta_i)`. Ties count as not misclassified.
fn directed_overlap(
    g: &MixingDistribution,
    family: Family,
    i: usize,
    j: usize,
    resolution: usize,
) -> f64 {
    let (mu_i, s_i) = (g.locations()[i], g.scales()[i]);
    let (mu_j, s_j) = (g.locations()[j], g.scales()[j]);
    let (lw_i, lw_j) = (g.weights()[i].ln(), g.weights()[j].ln());
    let m = resolution;
    let mut hits = 0usize;
    for idx in 0..m {
        let t = (idx as f64 + 0.5) / m as f64;
        let x = mu_i + s_i * family.quantile(t);
        let ld_i = lw_i + family.log_pdf((x - mu_i) / s_i) - s_i.ln();
        let ld_j = lw_j + family.log_pdf((x - mu_j) / s_j) - s_j.ln();
        if ld_i < ld_j {
            hits += 1;
        }
    }
    hits as f64 / m as f64
}

/// Both directed overlaps and their sum for a component pair.
pub fn pairwise_overlap(
    g: &MixingDistribution,
    family: Family,
    i: usize,
    j: usize,
    resolution: usize,
) -> Result<PairwiseOverlap> {
    if i == j || i >= g.k() || j >= g.k() {
        return Err(Error::InvalidParameter(format!(
            "component pair ({i}, {j}) invalid for K = {}",
            g.k()
        )));
    }
    if !g.is_continuous() {
        return Err(Error::InvalidParameter(
            "overlap needs positive scales".into(),
        ));
    }
    if resolution == 0 {
        return Err(Error::InvalidParameter("resolution must be >= 1".into()));
    }
    let o_j_given_i = directed_overlap(g, family, i, j, resolution);
    let o_i_given_j = directed_overlap(g, family, j, i, resolution);
    Ok(PairwiseOverlap {
        o_j_given_i,
        o_i_given_j,
        o_ij: o_j_given_i + o_i_given_j,
    })
}

/// All pairwise overlaps plus their upper-triangle mean.
#[derive(Debug, Clone)]
pub struct OverlapReport {
    k: usize,
    /// `K x K` symmetric matrix of `o_ij`, zero diagonal, row-major.
    pub o: Vec<f64>,
    /// Mean of the upper-triangle entries.
    pub mean_omega: f64,
}

impl OverlapReport {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.o[i * self.k + j]
    }
}

pub fn overlap_report(
    g: &MixingDistribution,
    family: Family,
    resolution: usize,
) -> Result<OverlapReport> {
    let k = g.k();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "overlap needs at least two components".into(),
        ));
    }
    let mut o = vec![0.0; k * k];
    let mut total = 0.0;
    let mut count = 0usize;
    for i in 0..k {
        for j in (i + 1)..k {
            let pair = pairwise_overlap(g, family, i, j, resolution)?;
            o[i * k + j] = pair.o_ij;
            o[j * k + i] = pair.o_ij;
            total += pair.o_ij;
            count += 1;
        }
    }
    Ok(OverlapReport {
        k,
        o,
        mean_omega: total / count as f64,
    })
}

/// Two-component scenario mixture `p {(0, a)} + (1 - p) {(b, 1)}`.
pub fn two_component_mixture(p: f64, a: f64, b: f64) -> Result<MixingDistribution> {
    MixingDistribution::new(vec![p, 1.0 - p], vec![0.0, b], vec![a, 1.0])
}

/// Find the separation `b > 0` at which the two-component scenario
/// `p {(0, a)} + (1 - p) {(b, 1)}` has total overlap `o_12` equal to
/// `target`, by bisection over `b` in `[0, 50]`.
///
/// The overlap must respond monotonically over the bracket; this is
/// checked numerically on a coarse grid before the solve and a violation
/// (or an unattainable target) reports a no-solution error.
pub fn solve_b_for_overlap(p: f64, a: f64, family: Family, target_o12: f64) -> Result<f64> {
    if !(0.0 < target_o12 && target_o12 < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target overlap {target_o12} outside (0, 1)"
        )));
    }
    if !(0.0 < p && p < 1.0) || a <= 0.0 {
        return Err(Error::InvalidParameter("need p in (0, 1) and a > 0".into()));
    }
    let resolution = DEFAULT_OVERLAP_RESOLUTION;
    let o12 = |b: f64| -> Result<f64> {
        let g = two_component_mixture(p, a, b)?;
        Ok(pairwise_overlap(&g, family, 0, 1, resolution)?.o_ij)
    };

    // Monotonicity and attainability screen; the grid tolerance absorbs
    // the O(1/M) bias of the overlap grid itself. The bracket starts just
    // above zero: at b = 0 with a = 1 the components coincide exactly and
    // the strict-inequality convention makes the overlap jump to zero.
    let slack = 4.0 / resolution as f64;
    let probes = [1e-3, 10.0, 20.0, 30.0, 40.0, 50.0];
    let mut values = Vec::with_capacity(probes.len());
    for &b in &probes {
        values.push(o12(b)?);
    }
    for w in values.windows(2) {
        if w[1] > w[0] + slack {
            return Err(Error::NoSolution(format!(
                "overlap is not decreasing in b: {} -> {}",
                w[0], w[1]
            )));
        }
    }
    let (o_hi, o_lo) = (values[0], *values.last().expect("nonempty"));
    if target_o12 > o_hi || target_o12 < o_lo {
        return Err(Error::NoSolution(format!(
            "target {target_o12} outside attainable range [{o_lo}, {o_hi}]"
        )));
    }

    let (mut lo, mut hi) = (1e-3f64, 50.0f64);
    let mut best = 0.5 * (lo + hi);
    let mut best_resid = f64::INFINITY;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let val = o12(mid)?;
        let resid = (val - target_o12).abs();
        if resid < best_resid {
            best_resid = resid;
            best = mid;
        }
        if resid < 2e-5 || hi - lo < 1e-9 {
            break;
        }
        if val > target_o12 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best_resid >= 1e-4 {
        return Err(Error::NoSolution(format!(
            "bisection residual {best_resid} at b = {best}"
        )));
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn mix(ws: &[f64], mus: &[f64], sds: &[f64]) -> MixingDistribution {
        MixingDistribution::new(ws.to_vec(), mus.to_vec(), sds.to_vec()).unwrap()
    }

    #[test]
    fn l2_of_identical_mixtures_is_zero() {
        let g = mix(&[0.3, 0.7], &[-1.0, 2.0], &[0.5, 1.5]);
        for family in [Family::Normal, Family::Logistic, Family::Gumbel] {
            let d = l2_mixture_distance(&g, &g, family).unwrap();
            assert!(d < 1e-7, "{family}: {d}");
        }
    }

    #[test]
    fn normal_product_integral_closed_form() {
        // Two standard normals: 1 / (2 sqrt(pi)).
        let v = component_product_integral(Family::Normal, 0.0, 1.0, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(v, 0.282_094_791_773_878_14, epsilon = 1e-14);
        // Cross-check a shifted pair against the quadrature oracle below.
        let v2 = component_product_integral(Family::Normal, -0.5, 0.8, 1.2, 1.7).unwrap();
        let oracle = trapezoid_product(Family::Normal, -0.5, 0.8, 1.2, 1.7);
        assert_abs_diff_eq!(v2, oracle, epsilon = 1e-9);
    }

    /// Dense trapezoid oracle for the product integral.
    fn trapezoid_product(family: Family, mu1: f64, s1: f64, mu2: f64, s2: f64) -> f64 {
        let lo = (mu1 - 30.0 * s1).min(mu2 - 30.0 * s2);
        let hi = (mu1 + 30.0 * s1).max(mu2 + 30.0 * s2);
        let m = 1_000_000usize;
        let h = (hi - lo) / m as f64;
        let f = |x: f64| family.pdf((x - mu1) / s1) / s1 * family.pdf((x - mu2) / s2) / s2;
        let mut acc = 0.5 * (f(lo) + f(hi));
        for i in 1..m {
            acc += f(lo + i as f64 * h);
        }
        acc * h
    }

    #[test]
    fn non_normal_product_integrals_match_trapezoid_oracle() {
        for family in [Family::Logistic, Family::Gumbel] {
            for (mu1, s1, mu2, s2) in [
                (0.0, 1.0, 0.0, 1.0),
                (-1.0, 0.7, 2.0, 1.8),
                (3.0, 2.5, 3.5, 0.4),
            ] {
                let got = component_product_integral(family, mu1, s1, mu2, s2).unwrap();
                let oracle = trapezoid_product(family, mu1, s1, mu2, s2);
                assert!(
                    (got - oracle).abs() <= 1e-6 * oracle.abs().max(1e-3),
                    "{family} ({mu1},{s1})x({mu2},{s2}): {got} vs {oracle}"
                );
            }
        }
    }

    #[test]
    fn l2_symmetry_and_triangle_inequality() {
        let mut rng = crate::rng::stream_rng(77, 0);
        for _ in 0..12 {
            let rand_mix = |rng: &mut rand_chacha::ChaCha8Rng| {
                let w: f64 = rng.random_range(0.2..0.8);
                mix(
                    &[w, 1.0 - w],
                    &[rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
                    &[rng.random_range(0.3..2.0), rng.random_range(0.3..2.0)],
                )
            };
            let (ga, gb, gc) = (rand_mix(&mut rng), rand_mix(&mut rng), rand_mix(&mut rng));
            let dab = l2_mixture_distance(&ga, &gb, Family::Normal).unwrap();
            let dba = l2_mixture_distance(&gb, &ga, Family::Normal).unwrap();
            assert_abs_diff_eq!(dab, dba, epsilon = 1e-10);
            let dac = l2_mixture_distance(&ga, &gc, Family::Normal).unwrap();
            let dcb = l2_mixture_distance(&gc, &gb, Family::Normal).unwrap();
            assert!(dab <= dac + dcb + 1e-6);
        }
    }

    #[test]
    fn ari_identity_and_hand_value() {
        assert_eq!(ari(&[1, 1, 2, 2], &[1, 1, 2, 2]).unwrap(), 1.0);
        // Hand contingency: N11 = 2, N21 = 1, N22 = 1 gives numerator 0.
        assert_eq!(ari(&[1, 1, 2, 2], &[1, 1, 1, 2]).unwrap(), 0.0);
        assert!(ari(&[1, 2], &[1, 2, 3]).is_err());
    }

    #[test]
    fn ari_is_invariant_to_relabeling() {
        let a = vec![0, 0, 1, 2, 1, 2, 0, 1];
        let relabeled: Vec<usize> = a.iter().map(|&v| [7, 3, 5][v]).collect();
        assert_eq!(ari(&a, &relabeled).unwrap(), 1.0);
        let b = vec![0, 1, 1, 2, 1, 2, 0, 0];
        assert_abs_diff_eq!(
            ari(&a, &b).unwrap(),
            ari(&relabeled, &b).unwrap(),
            epsilon = 1e-15
        );
    }

    /// Brute-force pair counting, independent of the contingency formula.
    fn ari_pair_oracle(a: &[usize], b: &[usize]) -> f64 {
        let n = a.len();
        let (mut together_both, mut together_a, mut together_b) = (0i128, 0i128, 0i128);
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = a[i] == a[j];
                let same_b = b[i] == b[j];
                together_a += i128::from(same_a);
                together_b += i128::from(same_b);
                together_both += i128::from(same_a && same_b);
            }
        }
        let pairs = (n as i128) * (n as i128 - 1) / 2;
        let num2 = 2 * (pairs * together_both - together_a * together_b);
        let den2 = pairs * (together_a + together_b) - 2 * together_a * together_b;
        if den2 == 0 {
            return 1.0;
        }
        num2 as f64 / den2 as f64
    }

    #[test]
    fn ari_matches_pair_counting_oracle() {
        let mut rng = crate::rng::stream_rng(5, 1);
        for _ in 0..300 {
            let n = rng.random_range(2..=30);
            let ka = rng.random_range(1..=4usize);
            let kb = rng.random_range(1..=4usize);
            let a: Vec<usize> = (0..n).map(|_| rng.random_range(0..ka)).collect();
            let b: Vec<usize> = (0..n).map(|_| rng.random_range(0..kb)).collect();
            let got = ari(&a, &b).unwrap();
            let oracle = ari_pair_oracle(&a, &b);
            assert_eq!(got, oracle, "a = {a:?}, b = {b:?}");
        }
    }

    #[test]
    fn overlap_of_identical_components_is_zero() {
        let g = mix(&[0.5, 0.5], &[1.0, 1.0], &[0.7, 0.7]);
        let o = pairwise_overlap(&g, Family::Normal, 0, 1, 10_000).unwrap();
        assert_eq!(o.o_ij, 0.0);
    }

    #[test]
    fn equal_weight_normal_overlap_closed_form() {
        // w = (1/2, 1/2), N(0,1) vs N(b,1): o_{2|1} = Phi(-b/2).
        for b in [1.0, 2.0, 3.2897] {
            let g = mix(&[0.5, 0.5], &[0.0, b], &[1.0, 1.0]);
            let m = 200_000;
            let o = pairwise_overlap(&g, Family::Normal, 0, 1, m).unwrap();
            let expect = Family::Normal.cdf(-b / 2.0);
            assert!(
                (o.o_j_given_i - expect).abs() <= 2.0 / m as f64,
                "b = {b}: {} vs {expect}",
                o.o_j_given_i
            );
            assert!((o.o_i_given_j - expect).abs() <= 2.0 / m as f64);
        }
    }

    #[test]
    fn grid_overlap_agrees_with_monte_carlo() {
        let g = mix(&[0.25, 0.75], &[0.0, 2.4], &[std::f64::consts::SQRT_2, 1.0]);
        let grid = pairwise_overlap(&g, Family::Normal, 0, 1, 200_000).unwrap();
        let n = 10_000_000usize;
        let mut rng = crate::rng::stream_rng(99, 3);
        let mut hits = 0usize;
        let (lw0, lw1) = (g.weights()[0].ln(), g.weights()[1].ln());
        for _ in 0..n {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            let x = g.locations()[0] + g.scales()[0] * z;
            let ld0 = lw0 + Family::Normal.log_pdf((x - g.locations()[0]) / g.scales()[0])
                - g.scales()[0].ln();
            let ld1 = lw1 + Family::Normal.log_pdf((x - g.locations()[1]) / g.scales()[1])
                - g.scales()[1].ln();
            if ld0 < ld1 {
                hits += 1;
            }
        }
        let mc = hits as f64 / n as f64;
        let se = (mc * (1.0 - mc) / n as f64).sqrt();
        assert!(
            (grid.o_j_given_i - mc).abs() <= 3.0 * se,
            "grid {} vs mc {mc} (se {se})",
            grid.o_j_given_i
        );
    }

    #[test]
    fn overlap_decreases_with_separation() {
        let mut prev = f64::INFINITY;
        for b in [0.5, 1.5, 2.5, 3.5, 4.5] {
            let g = mix(&[0.5, 0.5], &[0.0, b], &[1.0, 1.0]);
            let o = pairwise_overlap(&g, Family::Normal, 0, 1, 50_000)
                .unwrap()
                .o_ij;
            assert!(o <= prev + 1e-4);
            prev = o;
        }
    }

    #[test]
    fn solver_reproduces_closed_form_separations() {
        // 2 Phi(-b/2) = target inverts to b = -2 Phi^{-1}(target / 2).
        let b1 = solve_b_for_overlap(0.5, 1.0, Family::Normal, 0.1).unwrap();
        assert_abs_diff_eq!(b1, 3.289_707_253_902_977, epsilon = 1e-3);
        let b2 = solve_b_for_overlap(0.5, 1.0, Family::Normal, 0.03).unwrap();
        assert_abs_diff_eq!(b2, 4.340_180_755_169_125, epsilon = 1e-3);
    }

    #[test]
    fn solver_is_self_consistent_off_symmetry() {
        let b = solve_b_for_overlap(0.25, std::f64::consts::SQRT_2, Family::Normal, 0.1).unwrap();
        let g = two_component_mixture(0.25, std::f64::consts::SQRT_2, b).unwrap();
        let o = pairwise_overlap(&g, Family::Normal, 0, 1, 200_000).unwrap();
        assert_abs_diff_eq!(o.o_ij, 0.1, epsilon = 1e-3);
    }

    #[test]
    fn solver_rejects_unattainable_targets() {
        // Above the overlap at the smallest bracketed separation.
        assert!(solve_b_for_overlap(0.5, 1.0, Family::Normal, 0.99999).is_err());
        assert!(solve_b_for_overlap(0.5, 1.0, Family::Normal, 1.2).is_err());
        assert!(solve_b_for_overlap(1.5, 1.0, Family::Normal, 0.1).is_err());
    }

    #[test]
    fn three_component_row_one_mean_omega() {
        let g = mix(&[0.4, 0.5, 0.1], &[-2.0, 0.0, 1.0], &[0.3, 2.0, 0.4]);
        let report = overlap_report(&g, Family::Normal, DEFAULT_OVERLAP_RESOLUTION).unwrap();
        assert_abs_diff_eq!(report.mean_omega, 0.288, epsilon = 0.005);
        // Matrix symmetry with a zero diagonal.
        for i in 0..3 {
            assert_eq!(report.get(i, i), 0.0);
            for j in 0..3 {
                assert_eq!(report.get(i, j), report.get(j, i));
            }
        }
    }
}
