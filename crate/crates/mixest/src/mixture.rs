//! Finite mixtures of a location-scale family: the mixing distribution,
//! sorted samples, and the mixture-level CDF / quantile / sampling /
//! classification operations.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::family::Family;
use crate::rng::stream_rng;
use crate::{Error, Result};

/// Largest tolerated deviation of the weight sum from one.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// A discrete mixing distribution: `K` weighted (location, scale) atoms.
///
/// Scales are allowed to be zero; a zero-scale atom is a point mass at its
/// location. Point masses take part in the CDF and in sampling but not in
/// density or quantile evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixing", into = "RawMixing")]
pub struct MixingDistribution {
    weights: Vec<f64>,
    locations: Vec<f64>,
    scales: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawMixing {
    weights: Vec<f64>,
    locations: Vec<f64>,
    scales: Vec<f64>,
}

impl TryFrom<RawMixing> for MixingDistribution {
    type Error = Error;

    fn try_from(raw: RawMixing) -> Result<Self> {
        MixingDistribution::new(raw.weights, raw.locations, raw.scales)
    }
}

impl From<MixingDistribution> for RawMixing {
    fn from(g: MixingDistribution) -> Self {
        RawMixing {
            weights: g.weights,
            locations: g.locations,
            scales: g.scales,
        }
    }
}

impl MixingDistribution {
    /// Validate and build a mixing distribution.
    pub fn new(weights: Vec<f64>, locations: Vec<f64>, scales: Vec<f64>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::InvalidParameter("mixture needs K >= 1".into()));
        }
        if locations.len() != k {
            return Err(Error::LengthMismatch(k, locations.len()));
        }
        if scales.len() != k {
            return Err(Error::LengthMismatch(k, scales.len()));
        }
        for &w in &weights {
            if !w.is_finite() || !(0.0..=1.0).contains(&w) {
                return Err(Error::InvalidWeights(format!("weight {w} outside [0, 1]")));
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
        }
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite location".into()));
        }
        if scales.iter().any(|&s| !s.is_finite() || s < 0.0) {
            return Err(Error::InvalidParameter(
                "scale must be finite and >= 0".into(),
            ));
        }
        Ok(Self {
            weights,
            locations,
            scales,
        })
    }

    /// Single-component mixture.
    pub fn single(location: f64, scale: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![location], vec![scale])
    }

    /// Construct without validation. Only for internal hot paths whose
    /// inputs are valid by construction (softmax weights, exponentiated
    /// scales).
    pub(crate) fn from_parts_unchecked(
        weights: Vec<f64>,
        locations: Vec<f64>,
        scales: Vec<f64>,
    ) -> Self {
        Self {
            weights,
            locations,
            scales,
        }
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    /// True when every atom is a point mass.
    pub fn is_degenerate(&self) -> bool {
        self.scales.iter().all(|&s| s == 0.0)
    }

    /// True when every atom has positive scale.
    pub fn is_continuous(&self) -> bool {
        self.scales.iter().all(|&s| s > 0.0)
    }

    /// Components reordered by ascending location (ties by ascending scale).
    /// The canonical order used in reports and serialized fits.
    pub fn sorted_by_location(&self) -> Self {
        let mut idx: Vec<usize> = (0..self.k()).collect();
        idx.sort_by(|&a, &b| {
            self.locations[a]
                .total_cmp(&self.locations[b])
                .then(self.scales[a].total_cmp(&self.scales[b]))
        });
        Self {
            weights: idx.iter().map(|&i| self.weights[i]).collect(),
            locations: idx.iter().map(|&i| self.locations[i]).collect(),
            scales: idx.iter().map(|&i| self.scales[i]).collect(),
        }
    }

    /// Mixture CDF `F(x | G) = sum_k w_k F0((x - mu_k)/sigma_k)`.
    /// A point-mass atom contributes `w_k * 1{x >= mu_k}`.
    pub fn cdf(&self, family: Family, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.k() {
            acc += self.weights[k]
                * if self.scales[k] == 0.0 {
                    f64::from(x >= self.locations[k])
                } else {
                    family.cdf((x - self.locations[k]) / self.scales[k])
                };
        }
        acc
    }

    /// Mixture density; requires all scales positive.
    pub fn pdf(&self, family: Family, x: f64) -> f64 {
        let mut acc = 0.0;
        for k in 0..self.k() {
            let s = self.scales[k];
            acc += self.weights[k] * family.pdf((x - self.locations[k]) / s) / s;
        }
        acc
    }

    /// `log f(x | G)` via log-sum-exp over components.
    pub fn log_pdf(&self, family: Family, x: f64) -> f64 {
        let mut terms = Vec::with_capacity(self.k());
        let mut max = f64::NEG_INFINITY;
        for k in 0..self.k() {
            let t = self.component_log_density(family, k, x);
            if t > max {
                max = t;
            }
            terms.push(t);
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
    }

    /// `log(w_k f(x | theta_k))` for one component.
    pub(crate) fn component_log_density(&self, family: Family, k: usize, x: f64) -> f64 {
        let w = self.weights[k];
        if w == 0.0 {
            return f64::NEG_INFINITY;
        }
        let s = self.scales[k];
        w.ln() + family.log_pdf((x - self.locations[k]) / s) - s.ln()
    }

    /// Mixture quantile `F^{-1}(t | G)` for `t` in `(0, 1)`.
    ///
    /// For a continuous mixture the root is found inside the bracket
    /// `[min_k F^{-1}(t | theta_k), max_k F^{-1}(t | theta_k)]` by bisection
    /// with Newton refinement; the returned point satisfies
    /// `|F(xi | G) - t| <= 1e-12`. A pure point-mass mixture returns the
    /// generalized inverse. Mixtures combining zero- and positive-scale
    /// atoms are refused (the CDF jumps and no convention is defined).
    pub fn quantile(&self, family: Family, t: f64) -> Result<f64> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quantile level {t} outside (0, 1)"
            )));
        }
        if self.is_degenerate() {
            let mut atoms: Vec<(f64, f64)> = self
                .locations
                .iter()
                .copied()
                .zip(self.weights.iter().copied())
                .collect();
            atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut cum = 0.0;
            for (loc, w) in &atoms {
                cum += w;
                if cum >= t {
                    return Ok(*loc);
                }
            }
            return Ok(atoms.last().expect("k >= 1").0);
        }
        if !self.is_continuous() {
            return Err(Error::MixedAtoms);
        }
        Ok(self.quantile_bracketed(family, t, f64::NEG_INFINITY))
    }

    /// Continuous-case quantile with an optional extra lower bound (a
    /// previously computed quantile at a smaller level tightens the
    /// bracket; quantiles are nondecreasing in `t`).
    pub(crate) fn quantile_bracketed(&self, family: Family, t: f64, floor: f64) -> f64 {
        let q0 = family.quantile(t);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in 0..self.k() {
            let q = self.locations[k] + self.scales[k] * q0;
            lo = lo.min(q);
            hi = hi.max(q);
        }
        // A finite floor is a just-computed quantile at a slightly smaller
        // level; Newton from there converges in a couple of steps.
        let warm = floor.is_finite() && floor > lo && floor < hi;
        lo = lo.max(floor);
        if lo >= hi {
            return hi;
        }
        let (mut a, mut b) = (lo, hi);
        let mut x = if warm { floor } else { 0.5 * (a + b) };
        for _ in 0..200 {
            let resid = self.cdf(family, x) - t;
            if resid.abs() <= 1e-15 {
                return x;
            }
            if resid > 0.0 {
                b = x;
            } else {
                a = x;
            }
            if b - a <= f64::EPSILON * x.abs().max(1.0) {
                return x;
            }
            // Newton proposal, guarded to stay inside the live bracket.
            let d = self.pdf(family, x);
            let newton = x - resid / d;
            x = if d > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
        }
        x
    }

    /// Maximum-posterior component index for an observation:
    /// `argmax_k w_k f(x | theta_k)`, ties to the smallest index.
    pub fn classify(&self, family: Family, x: f64) -> usize {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..self.k() {
            let v = self.component_log_density(family, k, x);
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        best
    }

    /// Mixture mean `sum_k w_k (mu_k + sigma_k mu0)`.
    pub fn mean(&self, family: Family) -> f64 {
        let m0 = family.mean();
        (0..self.k())
            .map(|k| self.weights[k] * (self.locations[k] + self.scales[k] * m0))
            .sum()
    }

    /// Mixture second moment `sum_k w_k E_k{X^2}`.
    pub fn second_moment(&self, family: Family) -> f64 {
        (0..self.k())
            .map(|k| {
                self.weights[k] * component_second_moment(family, self.locations[k], self.scales[k])
            })
            .sum()
    }

    /// Mixture variance.
    pub fn variance(&self, family: Family) -> f64 {
        let m = self.mean(family);
        self.second_moment(family) - m * m
    }
}

/// `E{X^2}` for one location-scale component:
/// `mu^2 + sigma^2 (mu0^2 + sigma0^2) + 2 mu sigma mu0`.
pub fn component_second_moment(family: Family, mu: f64, sigma: f64) -> f64 {
    let m0 = family.mean();
    let moment2 = m0 * m0 + family.variance();
    mu * mu + sigma * sigma * moment2 + 2.0 * mu * sigma * m0
}

/// The mixture together with the family that interprets it; the JSON
/// interchange form `{"family", "weights", "locations", "scales"}` used by
/// config files and the CLI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub family: Family,
    #[serde(flatten)]
    pub mixing: MixingDistribution,
}

/// One standard draw from `f0`.
///
/// Normal uses the ziggurat sampler; logistic and Gumbel invert the CDF at
/// a uniform draw from the open unit interval.
pub fn draw_standard<R: Rng>(family: Family, rng: &mut R) -> f64 {
    match family {
        Family::Normal => rng.sample(StandardNormal),
        Family::Logistic | Family::Gumbel => family.quantile(open_unit(rng)),
    }
}

/// Uniform draw strictly inside (0, 1).
pub(crate) fn open_unit<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Draw the component index `k` with probability `w_k`.
pub(crate) fn draw_component<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (k, &w) in weights.iter().enumerate() {
        cum += w;
        if u < cum {
            return k;
        }
    }
    weights.len() - 1
}

/// `n` draws from the mixture using an existing generator.
pub fn sample_with_rng<R: Rng>(
    g: &MixingDistribution,
    family: Family,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let k = draw_component(g.weights(), rng);
            let s = g.scales()[k];
            if s == 0.0 {
                g.locations()[k]
            } else {
                g.locations()[k] + s * draw_standard(family, rng)
            }
        })
        .collect()
}

/// `n` draws from the mixture, deterministic in `seed`.
pub fn sample(g: &MixingDistribution, family: Family, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, 0);
    sample_with_rng(g, family, n, &mut rng)
}

/// A sample held in ascending order with its cached moments.
#[derive(Debug, Clone)]
pub struct SortedSample {
    values: Vec<f64>,
    mean: f64,
    mean_sq: f64,
    var_s: f64,
}

impl SortedSample {
    /// Sort and summarize; rejects empty input and non-finite values.
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidParameter("empty sample".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse("sample contains a non-finite value".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mean = sorted.iter().sum::<f64>() / n;
        let mean_sq = sorted.iter().map(|v| v * v).sum::<f64>() / n;
        let var_s = if sorted.len() > 1 {
            sorted.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Ok(Self {
            values: sorted,
            mean,
            mean_sq,
            var_s,
        })
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// Order statistics, ascending.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Mean of squares `N^{-1} sum x_n^2`.
    pub fn mean_sq(&self) -> f64 {
        self.mean_sq
    }

    /// Sample variance (denominator `N - 1`).
    pub fn var_s(&self) -> f64 {
        self.var_s
    }

    /// Sample standard deviation.
    pub fn sd(&self) -> f64 {
        self.var_s.sqrt()
    }

    /// True when the spread is at rounding level, so any scale fit is
    /// degenerate. Catches constant data whose accumulated mean differs
    /// from the values by an ulp.
    pub fn is_effectively_constant(&self) -> bool {
        self.sd() <= 1e-12 * (1.0 + self.mean.abs())
    }

    /// Empirical quantile: the order statistic at `ceil(level * N)`.
    pub fn empirical_quantile(&self, level: f64) -> f64 {
        let n = self.values.len();
        let idx = ((level * n as f64).ceil() as usize).clamp(1, n) - 1;
        self.values[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn two_normals() -> MixingDistribution {
        MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 3.0], vec![1.0, 1.0]).unwrap()
    }

    #[test]
    fn cdf_symmetry_cases() {
        let single = MixingDistribution::single(0.0, 1.0).unwrap();
        assert_abs_diff_eq!(single.cdf(Family::Normal, 0.0), 0.5, epsilon = 1e-15);

        let points =
            MixingDistribution::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(points.cdf(Family::Normal, 0.0), 0.5, epsilon = 1e-15);

        assert_abs_diff_eq!(two_normals().cdf(Family::Normal, 1.5), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn quantile_matches_newton_oracle() {
        // Invert the standard normal CDF by Newton iteration, independent of
        // the bracketed solver under test.
        let newton_inverse = |t: f64| {
            let mut x = 0.0;
            for _ in 0..60 {
                x -= (Family::Normal.cdf(x) - t) / Family::Normal.pdf(x);
            }
            x
        };
        let single = MixingDistribution::single(0.0, 1.0).unwrap();
        let got = single.quantile(Family::Normal, 0.975).unwrap();
        assert_abs_diff_eq!(got, newton_inverse(0.975), epsilon = 1e-9);
        assert_abs_diff_eq!(got, 1.959_964, epsilon = 1e-6);
    }

    #[test]
    fn quantile_symmetric_mixture_median_is_zero() {
        let g = MixingDistribution::new(vec![0.5, 0.5], vec![-2.0, 2.0], vec![1.0, 1.0]).unwrap();
        let med = g.quantile(Family::Normal, 0.5).unwrap();
        assert!(med.abs() < 1e-9, "median = {med}");
    }

    #[test]
    fn quantile_domain_and_mixed_atom_errors() {
        let g = two_normals();
        assert!(g.quantile(Family::Normal, 0.0).is_err());
        assert!(g.quantile(Family::Normal, 1.0).is_err());
        assert!(g.quantile(Family::Normal, -0.3).is_err());

        let mixed =
            MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(matches!(
            mixed.quantile(Family::Normal, 0.5),
            Err(Error::MixedAtoms)
        ));
    }

    #[test]
    fn degenerate_quantile_is_generalized_inverse() {
        let g = MixingDistribution::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        assert_eq!(g.quantile(Family::Normal, 0.3).unwrap(), -1.0);
        assert_eq!(g.quantile(Family::Normal, 0.5).unwrap(), -1.0);
        assert_eq!(g.quantile(Family::Normal, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn sampling_is_deterministic_and_point_masses_are_exact() {
        let g = two_normals();
        let a = sample(&g, Family::Normal, 64, 9);
        let b = sample(&g, Family::Normal, 64, 9);
        assert_eq!(a, b);

        let points =
            MixingDistribution::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.0, 0.0]).unwrap();
        for v in sample(&points, Family::Normal, 200, 3) {
            assert!(v == -1.0 || v == 1.0);
        }
    }

    #[test]
    fn sample_moments_match_mixture_moments() {
        let g = MixingDistribution::new(vec![0.3, 0.7], vec![-1.0, 2.0], vec![0.5, 1.5]).unwrap();
        for family in [Family::Normal, Family::Logistic, Family::Gumbel] {
            let n = 1_000_000;
            let xs = sample(&g, family, n, 11);
            let mean: f64 = xs.iter().sum::<f64>() / n as f64;
            let var: f64 =
                xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n as f64 - 1.0);
            let se_mean = (g.variance(family) / n as f64).sqrt();
            assert!(
                (mean - g.mean(family)).abs() < 5.0 * se_mean,
                "{family}: mean {mean} vs {}",
                g.mean(family)
            );
            // Conservative SE for the variance estimate.
            let se_var = g.variance(family) * (2.0 / n as f64).sqrt() * 3.0;
            assert!(
                (var - g.variance(family)).abs() < 5.0 * se_var,
                "{family}: var {var} vs {}",
                g.variance(family)
            );
        }
    }

    #[test]
    fn clt_bound_on_standard_normal_sample_mean() {
        let g = MixingDistribution::single(0.0, 1.0).unwrap();
        let xs = sample(&g, Family::Normal, 1_000_000, 5);
        let mean: f64 = xs.iter().sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 4.0 / (xs.len() as f64).sqrt());
    }

    #[test]
    fn classify_examples_and_tie_rule() {
        let g = MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 4.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(g.classify(Family::Normal, 0.0), 0);
        // x = 2 is equidistant: exact density tie, smallest index wins.
        assert_eq!(g.classify(Family::Normal, 2.0), 0);

        let skew = MixingDistribution::new(vec![0.9, 0.1], vec![0.0, 2.0], vec![1.0, 1.0]).unwrap();
        let x = 1.5;
        let d0 = 0.9 * Family::Normal.pdf(x);
        let d1 = 0.1 * Family::Normal.pdf(x - 2.0);
        let expect = usize::from(d1 > d0);
        assert_eq!(skew.classify(Family::Normal, x), expect);
    }

    #[test]
    fn interchange_json_shape_round_trips() {
        let model = MixtureModel {
            family: Family::Logistic,
            mixing: two_normals(),
        };
        let js = serde_json::to_value(&model).unwrap();
        assert_eq!(js["family"], "logistic");
        assert_eq!(js["weights"].as_array().unwrap().len(), 2);
        assert!(js.get("mixing").is_none(), "must be flattened: {js}");
        let back: MixtureModel = serde_json::from_value(js).unwrap();
        assert_eq!(back, model);

        // Invalid weights must be rejected at deserialization time.
        let bad = r#"{"family":"normal","weights":[0.7,0.7],"locations":[0,1],"scales":[1,1]}"#;
        assert!(serde_json::from_str::<MixtureModel>(bad).is_err());
    }

    #[test]
    fn sorted_sample_moments() {
        let s = SortedSample::new(&[3.0, -1.0, 2.0]).unwrap();
        assert_eq!(s.values(), &[-1.0, 2.0, 3.0]);
        assert_abs_diff_eq!(s.mean(), 4.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.mean_sq(), 14.0 / 3.0, epsilon = 1e-15);
        assert!(s.mean_sq() >= s.mean() * s.mean());
        assert!(SortedSample::new(&[]).is_err());
        assert!(SortedSample::new(&[1.0, f64::NAN]).is_err());
    }

    proptest! {
        /// Quantile lands inside the component-quantile bracket and inverts
        /// the CDF to tight tolerance.
        #[test]
        fn quantile_bracket_and_inversion(
            t in 0.001f64..0.999,
            mu1 in -5.0f64..5.0,
            mu2 in -5.0f64..5.0,
            s1 in 0.1f64..3.0,
            s2 in 0.1f64..3.0,
            w in 0.05f64..0.95,
            fam_idx in 0usize..3,
        ) {
            let family = [Family::Normal, Family::Logistic, Family::Gumbel][fam_idx];
            let g = MixingDistribution::new(vec![w, 1.0 - w], vec![mu1, mu2], vec![s1, s2]).unwrap();
            let xi = g.quantile(family, t).unwrap();
            let q0 = family.quantile(t);
            let lo = (mu1 + s1 * q0).min(mu2 + s2 * q0);
            let hi = (mu1 + s1 * q0).max(mu2 + s2 * q0);
            prop_assert!(xi >= lo - 1e-9 && xi <= hi + 1e-9, "xi {xi} outside [{lo}, {hi}]");
            prop_assert!((g.cdf(family, xi) - t).abs() <= 1e-10);
        }
    }
}
