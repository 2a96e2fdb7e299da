//! Penalized maximum likelihood via EM.
//!
//! The plain likelihood of a location-scale mixture is unbounded: planting
//! a component on one observation and shrinking its scale sends the
//! log-likelihood to infinity. The penalty
//! `a_N * sum_k { s^2 / sigma_k^2 + log sigma_k^2 }` (with `s^2` the sample
//! variance or another scale-invariant statistic) bounds the criterion and
//! keeps every EM iterate away from degenerate scales. The recommended
//! penalty strength is `a_N = N^{-1/2}`.
//!
//! The E-step is the usual responsibility computation; the M-step is in
//! closed form for the normal family and a two-variable quasi-Newton
//! maximization (warm-started at the previous parameters) for logistic and
//! Gumbel.

use serde::{Deserialize, Serialize};

use crate::family::Family;
use crate::mixture::{MixingDistribution, SortedSample};
use crate::mwde::{initial_params, FitReport, HomogeneousFit, StartDiagnostic};
use crate::opt;
use crate::{Error, Result};

/// Penalty strength and the scale-invariant statistic it multiplies.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// Penalty strength `a_N > 0`.
    pub a_n: f64,
    /// Scale-invariant statistic, by default the sample variance.
    pub scale_stat: f64,
}

impl PenaltyConfig {
    /// Recommended setting: `a_N = N^{-1/2}` with the sample variance.
    pub fn recommended(sample: &SortedSample) -> Self {
        Self {
            a_n: 1.0 / (sample.n() as f64).sqrt(),
            scale_stat: sample.var_s(),
        }
    }

    /// Explicit penalty strength with the sample variance.
    pub fn with_a_n(a_n: f64, sample: &SortedSample) -> Self {
        Self {
            a_n,
            scale_stat: sample.var_s(),
        }
    }

    /// Squared sample interquartile range as the scale statistic; an
    /// alternative when the family variance is not finite.
    pub fn with_iqr(sample: &SortedSample) -> Self {
        let iqr = sample.empirical_quantile(0.75) - sample.empirical_quantile(0.25);
        Self {
            a_n: 1.0 / (sample.n() as f64).sqrt(),
            scale_stat: iqr * iqr,
        }
    }

    /// `a_N * sum_k { scale_stat / sigma_k^2 + log sigma_k^2 }`.
    pub fn penalty(&self, scales: &[f64]) -> f64 {
        self.a_n
            * scales
                .iter()
                .map(|&s| self.scale_stat / (s * s) + (s * s).ln())
                .sum::<f64>()
    }
}

/// Posterior component probabilities `w_nk`, one row per observation.
#[derive(Debug, Clone)]
pub struct ResponsibilityMatrix {
    w: Vec<f64>,
    n: usize,
    k: usize,
}

impl ResponsibilityMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, n: usize, k: usize) -> f64 {
        self.w[n * self.k + k]
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.w[n * self.k..(n + 1) * self.k]
    }

    /// `sum_n w_nk` per component.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.k];
        for row in self.w.chunks(self.k) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v;
            }
        }
        sums
    }
}

/// E-step: responsibilities under the current mixture, computed in log
/// space so distant observations cannot zero out a whole row.
pub fn responsibilities(
    g: &MixingDistribution,
    sample: &SortedSample,
    family: Family,
) -> Result<ResponsibilityMatrix> {
    let (n, k) = (sample.n(), g.k());
    let mut w = vec![0.0; n * k];
    for (i, &x) in sample.values().iter().enumerate() {
        let ld: Vec<f64> = (0..k)
            .map(|j| g.component_log_density(family, j, x))
            .collect();
        let max = ld.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        if max == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!(
                "observation {x} has zero density under every component"
            )));
        }
        let mut total = 0.0;
        for j in 0..k {
            let e = (ld[j] - max).exp();
            w[i * k + j] = e;
            total += e;
        }
        for j in 0..k {
            w[i * k + j] /= total;
        }
    }
    Ok(ResponsibilityMatrix { w, n, k })
}

/// Log-likelihood `sum_n log f(x_n | G)`.
pub fn loglik(g: &MixingDistribution, sample: &SortedSample, family: Family) -> f64 {
    sample.values().iter().map(|&x| g.log_pdf(family, x)).sum()
}

/// Penalized log-likelihood `l_N(G) - a_N sum_k {s^2/sigma_k^2 + log sigma_k^2}`.
/// Errors on a zero scale, where the penalty diverges.
pub fn penalized_loglik(
    g: &MixingDistribution,
    sample: &SortedSample,
    family: Family,
    penalty: &PenaltyConfig,
) -> Result<f64> {
    if !g.is_continuous() {
        return Err(Error::InvalidParameter(
            "penalized likelihood undefined at zero scale".into(),
        ));
    }
    Ok(loglik(g, sample, family) - penalty.penalty(g.scales()))
}

/// Sentinel form used inside solvers: negative infinity at zero scale.
fn penalized_loglik_or_neg_inf(
    g: &MixingDistribution,
    sample: &SortedSample,
    family: Family,
    penalty: &PenaltyConfig,
) -> f64 {
    if !g.is_continuous() {
        return f64::NEG_INFINITY;
    }
    loglik(g, sample, family) - penalty.penalty(g.scales())
}

/// One EM iteration: E-step responsibilities, then the penalized M-step.
/// The penalized log-likelihood never decreases across the step (within
/// numerical slack). Errors if a responsibility column sums to zero.
pub fn em_step(
    g: &MixingDistribution,
    sample: &SortedSample,
    family: Family,
    penalty: &PenaltyConfig,
) -> Result<MixingDistribution> {
    let resp = responsibilities(g, sample, family)?;
    let col = resp.column_sums();
    if let Some(j) = col.iter().position(|&c| c == 0.0) {
        return Err(Error::ComponentStarvation(j));
    }
    let n = sample.n() as f64;
    let total: f64 = col.iter().sum();
    // Column sums add to N up to rounding; normalize so the weights are an
    // exact simplex point.
    let weights: Vec<f64> = col.iter().map(|c| c / total).collect();
    debug_assert!((total - n).abs() < 1e-6 * n);

    let k = g.k();
    let mut locations = Vec::with_capacity(k);
    let mut scales = Vec::with_capacity(k);
    for j in 0..k {
        let (mu, sigma) = match family {
            Family::Normal => normal_m_step(&resp, sample, j, penalty),
            Family::Logistic | Family::Gumbel => numeric_m_step(
                &resp,
                sample,
                family,
                j,
                penalty,
                g.locations()[j],
                g.scales()[j],
            ),
        };
        locations.push(mu);
        scales.push(sigma);
    }
    MixingDistribution::new(weights, locations, scales)
}

/// Closed-form penalized M-step for the normal family:
/// `mu = sum w x / sum w`,
/// `sigma^2 = (sum w (x - mu)^2 + 2 a_N s^2) / (sum w + 2 a_N)`.
fn normal_m_step(
    resp: &ResponsibilityMatrix,
    sample: &SortedSample,
    j: usize,
    penalty: &PenaltyConfig,
) -> (f64, f64) {
    let xs = sample.values();
    let mut wsum = 0.0;
    let mut wx = 0.0;
    for i in 0..resp.n() {
        let w = resp.get(i, j);
        wsum += w;
        wx += w * xs[i];
    }
    let mu = wx / wsum;
    let mut wdev = 0.0;
    for i in 0..resp.n() {
        wdev += resp.get(i, j) * (xs[i] - mu) * (xs[i] - mu);
    }
    let two_a = 2.0 * penalty.a_n;
    let var = (wdev + two_a * penalty.scale_stat) / (wsum + two_a);
    (mu, var.sqrt())
}

/// Numeric M-step: maximize the per-component penalized criterion over
/// `(mu, log sigma)` by BFGS from the previous parameters.
fn numeric_m_step(
    resp: &ResponsibilityMatrix,
    sample: &SortedSample,
    family: Family,
    j: usize,
    penalty: &PenaltyConfig,
    mu_prev: f64,
    sigma_prev: f64,
) -> (f64, f64) {
    let xs = sample.values();
    let n = resp.n();
    let res = opt::minimize(
        |p, grad| {
            let (mu, lsig) = (p[0], p[1]);
            let sigma = lsig.exp();
            if !sigma.is_finite() || sigma == 0.0 {
                grad.fill(0.0);
                return f64::INFINITY;
            }
            let mut q = 0.0;
            let mut d_mu = 0.0;
            let mut d_lsig = 0.0;
            for i in 0..n {
                let w = resp.get(i, j);
                if w == 0.0 {
                    continue;
                }
                let z = (xs[i] - mu) / sigma;
                let sc = family.score(z);
                q += w * (family.log_pdf(z) - lsig);
                d_mu += w * (-sc / sigma);
                d_lsig += w * (-sc * z - 1.0);
            }
            let s2 = penalty.scale_stat;
            q -= penalty.a_n * (s2 / (sigma * sigma) + 2.0 * lsig);
            d_lsig += 2.0 * penalty.a_n * (s2 / (sigma * sigma) - 1.0);
            // d_mu and d_lsig accumulated dq; minimizing -q flips both.
            grad[0] = -d_mu;
            grad[1] = -d_lsig;
            -q
        },
        &[mu_prev, sigma_prev.ln()],
        100,
        1e-9,
    );
    (res.x[0], res.x[1].exp())
}

/// EM-based pMLE solver configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PmleConfig {
    /// Number of EM starts; start 0 is deterministic (same initialization
    /// scheme as the Wasserstein solver, for fair comparisons).
    pub n_starts: usize,
    /// EM iteration cap per start.
    pub max_iter: usize,
    /// Stop when the penalized log-likelihood improves by less than this.
    pub tol: f64,
    /// Master seed for the random start draws.
    pub seed: u64,
    /// Penalty strength; `None` selects `a_N = N^{-1/2}`.
    pub a_n: Option<f64>,
}

impl Default for PmleConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            max_iter: 2000,
            tol: 1e-8,
            seed: 0,
            a_n: None,
        }
    }
}

/// Fit a `K`-component mixture by penalized maximum likelihood with
/// multi-start EM; the highest penalized log-likelihood wins. The report's
/// `objective` is the penalized log-likelihood; components are sorted by
/// location.
pub fn fit_pmle(
    sample: &SortedSample,
    family: Family,
    k: usize,
    config: &PmleConfig,
) -> Result<FitReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be >= 1".into()));
    }
    if sample.n() < 2 {
        return Err(Error::DegenerateSample { n: sample.n(), k });
    }
    if config.n_starts == 0 {
        return Err(Error::InvalidParameter("n_starts must be >= 1".into()));
    }
    if sample.is_effectively_constant() {
        return Err(Error::InvalidParameter(
            "constant sample: scale initialization is degenerate".into(),
        ));
    }
    let penalty = match config.a_n {
        Some(a_n) => {
            if a_n <= 0.0 {
                return Err(Error::InvalidParameter("a_n must be > 0".into()));
            }
            PenaltyConfig::with_a_n(a_n, sample)
        }
        None => PenaltyConfig::recommended(sample),
    };

    let mut starts = Vec::with_capacity(config.n_starts);
    let mut flags = Vec::new();
    let mut best: Option<(MixingDistribution, f64, usize, bool, Vec<f64>)> = None;
    for s in 0..config.n_starts {
        match run_em(sample, family, k, config, &penalty, s) {
            Ok((g, pl, iters, converged, trace)) => {
                starts.push(StartDiagnostic {
                    start: s,
                    objective: pl,
                    iterations: iters,
                    converged,
                });
                let better = match &best {
                    Some((_, b, ..)) => pl > *b,
                    None => true,
                };
                if better {
                    best = Some((g, pl, iters, converged, trace));
                }
            }
            Err(e) => {
                starts.push(StartDiagnostic {
                    start: s,
                    objective: f64::NEG_INFINITY,
                    iterations: 0,
                    converged: false,
                });
                flags.push(format!("start {s} failed: {e}"));
            }
        }
    }

    let (g, pl, iterations, converged, trace) =
        best.ok_or(Error::AllStartsFailed(config.n_starts))?;
    let g_hat = g.sorted_by_location();
    for (j, &w) in g_hat.weights().iter().enumerate() {
        if w < 1e-10 {
            flags.push(format!("weight-collapse: component {j} weight {w:.3e}"));
        }
    }
    Ok(FitReport {
        g_hat,
        objective: pl,
        starts_tried: config.n_starts,
        converged,
        iterations,
        starts,
        trace,
        flags,
    })
}

type EmRun = (MixingDistribution, f64, usize, bool, Vec<f64>);

fn run_em(
    sample: &SortedSample,
    family: Family,
    k: usize,
    config: &PmleConfig,
    penalty: &PenaltyConfig,
    start: usize,
) -> Result<EmRun> {
    let mut g = initial_params(sample, k, start, config.seed).to_mixing()?;
    let mut pl = penalized_loglik_or_neg_inf(&g, sample, family, penalty);
    let mut trace = vec![pl];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < config.max_iter {
        let next = em_step(&g, sample, family, penalty)?;
        let next_pl = penalized_loglik_or_neg_inf(&next, sample, family, penalty);
        g = next;
        iterations += 1;
        trace.push(next_pl);
        let improvement = next_pl - pl;
        pl = next_pl;
        if improvement < config.tol {
            converged = true;
            break;
        }
    }
    Ok((g, pl, iterations, converged, trace))
}

/// Plain maximum likelihood for the homogeneous (`K = 1`) model: closed
/// form for the normal, two-variable quasi-Newton otherwise. Used by the
/// homogeneous rate study where the likelihood needs no penalty.
pub fn fit_homogeneous_mle(sample: &SortedSample, family: Family) -> Result<HomogeneousFit> {
    let n = sample.n();
    if n < 2 {
        return Err(Error::DegenerateSample { n, k: 1 });
    }
    if sample.is_effectively_constant() {
        return Ok(HomogeneousFit {
            mu: sample.mean(),
            sigma: 0.0,
            degenerate: true,
        });
    }
    match family {
        Family::Normal => {
            let mu = sample.mean();
            let var: f64 = sample
                .values()
                .iter()
                .map(|x| (x - mu) * (x - mu))
                .sum::<f64>()
                / n as f64;
            Ok(HomogeneousFit {
                mu,
                sigma: var.sqrt(),
                degenerate: false,
            })
        }
        Family::Logistic | Family::Gumbel => {
            let sigma0 = sample.sd() / family.variance().sqrt();
            let mu0 = sample.mean() - family.mean() * sigma0;
            let xs = sample.values();
            let res = opt::minimize(
                |p, grad| {
                    let (mu, lsig) = (p[0], p[1]);
                    let sigma = lsig.exp();
                    if !sigma.is_finite() || sigma == 0.0 {
                        grad.fill(0.0);
                        return f64::INFINITY;
                    }
                    let mut ll = 0.0;
                    let mut d_mu = 0.0;
                    let mut d_lsig = 0.0;
                    for &x in xs {
                        let z = (x - mu) / sigma;
                        let sc = family.score(z);
                        ll += family.log_pdf(z) - lsig;
                        d_mu += -sc / sigma;
                        d_lsig += -sc * z - 1.0;
                    }
                    grad[0] = -d_mu;
                    grad[1] = -d_lsig;
                    -ll
                },
                &[mu0, sigma0.ln()],
                200,
                1e-9,
            );
            Ok(HomogeneousFit {
                mu: res.x[0],
                sigma: res.x[1].exp(),
                degenerate: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::sample as draw;
    use approx::assert_abs_diff_eq;

    fn penalty_cfg(a_n: f64, scale_stat: f64) -> PenaltyConfig {
        PenaltyConfig { a_n, scale_stat }
    }

    #[test]
    fn penalized_loglik_hand_value() {
        // Standard normal component, sample {-1, 1}, a_N = 2^{-1/2},
        // s^2 = 2: l = -(log(2 pi) + 1), penalty = sqrt(2).
        let g = MixingDistribution::single(0.0, 1.0).unwrap();
        let s = SortedSample::new(&[-1.0, 1.0]).unwrap();
        let cfg = PenaltyConfig::recommended(&s);
        assert_abs_diff_eq!(cfg.a_n, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(cfg.scale_stat, 2.0, epsilon = 1e-15);
        let pl = penalized_loglik(&g, &s, Family::Normal, &cfg).unwrap();
        assert_abs_diff_eq!(pl, -4.252_090_628_782_44, epsilon = 1e-9);
    }

    #[test]
    fn penalized_equals_plain_minus_penalty() {
        let g = MixingDistribution::new(vec![0.4, 0.6], vec![-1.0, 2.0], vec![0.5, 1.5]).unwrap();
        let s = SortedSample::new(&draw(&g, Family::Logistic, 40, 1)).unwrap();
        let cfg = penalty_cfg(0.2, s.var_s());
        let pl = penalized_loglik(&g, &s, Family::Logistic, &cfg).unwrap();
        let independent = loglik(&g, &s, Family::Logistic)
            - cfg.a_n
                * g.scales()
                    .iter()
                    .map(|&si| cfg.scale_stat / (si * si) + (si * si).ln())
                    .sum::<f64>();
        assert_abs_diff_eq!(pl, independent, epsilon = 1e-12);
    }

    #[test]
    fn penalty_is_minimized_at_scale_stat() {
        // u + log(1/u) analysis: s^2/sigma^2 + log sigma^2 is stationary at
        // sigma^2 = s^2 with minimal value 1 + log s^2.
        let cfg = penalty_cfg(0.37, 1.9);
        let at_stat = cfg.penalty(&[cfg.scale_stat.sqrt()]);
        assert_abs_diff_eq!(
            at_stat,
            cfg.a_n * (1.0 + cfg.scale_stat.ln()),
            epsilon = 1e-12
        );
        for sigma in [0.3, 0.8, 1.2, 1.6, 2.5, 4.0] {
            assert!(cfg.penalty(&[sigma]) >= at_stat - 1e-12);
        }
    }

    #[test]
    fn zero_scale_is_a_domain_error() {
        let g = MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        let s = SortedSample::new(&[-1.0, 0.5, 2.0]).unwrap();
        let cfg = penalty_cfg(0.5, s.var_s());
        assert!(penalized_loglik(&g, &s, Family::Normal, &cfg).is_err());
    }

    /// Grid maximization of the one-component penalized criterion, the
    /// independent oracle for the closed-form normal M-step.
    fn grid_maximize_q(
        s: &SortedSample,
        cfg: &PenaltyConfig,
        mu_range: (f64, f64),
        sd_range: (f64, f64),
    ) -> (f64, f64) {
        let q = |mu: f64, sigma: f64| {
            let g = MixingDistribution::single(mu, sigma).unwrap();
            penalized_loglik(&g, s, Family::Normal, cfg).unwrap()
        };
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        let (mut mu_lo, mut mu_hi) = mu_range;
        let (mut s_lo, mut s_hi) = sd_range;
        for _ in 0..8 {
            let steps = 20;
            for i in 0..=steps {
                let mu = mu_lo + (mu_hi - mu_lo) * i as f64 / steps as f64;
                for j in 0..=steps {
                    let sd = s_lo + (s_hi - s_lo) * j as f64 / steps as f64;
                    if sd <= 0.0 {
                        continue;
                    }
                    let v = q(mu, sd);
                    if v > best.0 {
                        best = (v, mu, sd);
                    }
                }
            }
            let mu_span = (mu_hi - mu_lo) / steps as f64 * 2.0;
            let s_span = (s_hi - s_lo) / steps as f64 * 2.0;
            mu_lo = best.1 - mu_span;
            mu_hi = best.1 + mu_span;
            s_lo = (best.2 - s_span).max(1e-4);
            s_hi = best.2 + s_span;
        }
        (best.1, best.2)
    }

    #[test]
    fn single_component_em_step_hand_value() {
        // K = 1 on {-1, 1} with a_N = 2^{-1/2}: responsibilities are all
        // one, mu -> 0, sigma^2 -> (2 + 2 a_N s^2) / (2 + 2 a_N) = sqrt(2).
        let s = SortedSample::new(&[-1.0, 1.0]).unwrap();
        let cfg = PenaltyConfig::recommended(&s);
        let g0 = MixingDistribution::single(0.5, 1.0).unwrap();
        let g1 = em_step(&g0, &s, Family::Normal, &cfg).unwrap();
        assert_abs_diff_eq!(g1.locations()[0], 0.0, epsilon = 1e-12);
        let sigma_sq = g1.scales()[0] * g1.scales()[0];
        assert_abs_diff_eq!(sigma_sq, std::f64::consts::SQRT_2, epsilon = 1e-9);

        let (mu_grid, sd_grid) = grid_maximize_q(&s, &cfg, (-2.0, 2.0), (0.3, 3.0));
        assert_abs_diff_eq!(g1.locations()[0], mu_grid, epsilon = 1e-4);
        assert_abs_diff_eq!(g1.scales()[0], sd_grid, epsilon = 1e-4);
    }

    #[test]
    fn normal_m_step_matches_numeric_maximizer() {
        let truth =
            MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 4.0], vec![1.0, 1.0]).unwrap();
        let s = SortedSample::new(&draw(&truth, Family::Normal, 60, 6)).unwrap();
        let cfg = PenaltyConfig::recommended(&s);
        let resp = responsibilities(&truth, &s, Family::Normal).unwrap();
        for j in 0..2 {
            let closed = normal_m_step(&resp, &s, j, &cfg);
            let numeric = numeric_m_step(
                &resp,
                &s,
                Family::Normal,
                j,
                &cfg,
                closed.0 + 0.3,
                closed.1 * 1.4,
            );
            assert_abs_diff_eq!(closed.0, numeric.0, epsilon = 1e-8);
            assert_abs_diff_eq!(closed.1, numeric.1, epsilon = 1e-8);
        }
    }

    #[test]
    fn em_fixed_point_after_convergence() {
        let truth =
            MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 5.0], vec![1.0, 1.0]).unwrap();
        let s = SortedSample::new(&draw(&truth, Family::Normal, 200, 9)).unwrap();
        let fit = fit_pmle(&s, Family::Normal, 2, &PmleConfig::default()).unwrap();
        assert!(fit.converged);
        let cfg = PenaltyConfig::recommended(&s);
        let once_more = em_step(&fit.g_hat, &s, Family::Normal, &cfg).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(
                once_more.locations()[j],
                fit.g_hat.locations()[j],
                epsilon = 1e-6
            );
            assert_abs_diff_eq!(once_more.scales()[j], fit.g_hat.scales()[j], epsilon = 1e-6);
            assert_abs_diff_eq!(
                once_more.weights()[j],
                fit.g_hat.weights()[j],
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn symmetric_start_yields_symmetric_update() {
        let s = SortedSample::new(&[-2.0, -1.0, 1.0, 2.0]).unwrap();
        let cfg = PenaltyConfig::recommended(&s);
        let g0 = MixingDistribution::new(vec![0.5, 0.5], vec![-1.0, 1.0], vec![0.8, 0.8]).unwrap();
        let g1 = em_step(&g0, &s, Family::Normal, &cfg).unwrap();
        assert_abs_diff_eq!(g1.locations()[0], -g1.locations()[1], epsilon = 1e-12);
        assert_abs_diff_eq!(g1.scales()[0], g1.scales()[1], epsilon = 1e-12);
        assert_abs_diff_eq!(g1.weights()[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn responsibilities_rows_sum_to_one() {
        let g = MixingDistribution::new(vec![0.3, 0.7], vec![-2.0, 3.0], vec![0.7, 1.2]).unwrap();
        let s = SortedSample::new(&draw(&g, Family::Logistic, 50, 11)).unwrap();
        let resp = responsibilities(&g, &s, Family::Logistic).unwrap();
        for i in 0..resp.n() {
            let row_sum: f64 = resp.row(i).iter().sum();
            assert_abs_diff_eq!(row_sum, 1.0, epsilon = 1e-12);
            assert!(resp.row(i).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn em_ascends_the_penalized_likelihood() {
        for (family, seed) in [(Family::Normal, 3u64), (Family::Logistic, 4u64)] {
            let truth =
                MixingDistribution::new(vec![0.4, 0.6], vec![0.0, 3.0], vec![1.0, 1.5]).unwrap();
            let s = SortedSample::new(&draw(&truth, family, 120, seed)).unwrap();
            let fit = fit_pmle(&s, family, 2, &PmleConfig::default()).unwrap();
            for w in fit.trace.windows(2) {
                assert!(
                    w[1] >= w[0] - 1e-9,
                    "{family}: penalized log-likelihood fell {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }

    #[test]
    fn single_component_fit_has_closed_form() {
        let s = SortedSample::new(&draw(
            &MixingDistribution::single(2.0, 1.5).unwrap(),
            Family::Normal,
            100,
            12,
        ))
        .unwrap();
        let fit = fit_pmle(&s, Family::Normal, 1, &PmleConfig::default()).unwrap();
        assert_abs_diff_eq!(fit.g_hat.locations()[0], s.mean(), epsilon = 1e-10);
        let a_n = 1.0 / (s.n() as f64).sqrt();
        let dev: f64 = s
            .values()
            .iter()
            .map(|x| (x - s.mean()) * (x - s.mean()))
            .sum();
        let expect_var = (dev + 2.0 * a_n * s.var_s()) / (s.n() as f64 + 2.0 * a_n);
        assert_abs_diff_eq!(
            fit.g_hat.scales()[0] * fit.g_hat.scales()[0],
            expect_var,
            epsilon = 1e-9
        );
    }

    #[test]
    fn outlier_does_not_degenerate_the_fit() {
        // One extreme value: the penalty keeps both scales well away from
        // zero even when a component chases the outlier.
        let truth =
            MixingDistribution::new(vec![0.5, 0.5], vec![0.0, 3.0], vec![1.0, 1.0]).unwrap();
        let mut data = draw(&truth, Family::Normal, 99, 14);
        data.push(8.0);
        let s = SortedSample::new(&data).unwrap();
        let fit = fit_pmle(&s, Family::Normal, 2, &PmleConfig::default()).unwrap();
        assert!(fit.objective.is_finite());
        for &sigma in fit.g_hat.scales() {
            assert!(sigma > 1e-6, "degenerate scale {sigma}");
        }
    }

    #[test]
    fn fit_is_affine_equivariant() {
        let truth =
            MixingDistribution::new(vec![0.4, 0.6], vec![0.0, 5.0], vec![1.0, 0.8]).unwrap();
        let data = draw(&truth, Family::Normal, 150, 5);
        let s0 = SortedSample::new(&data).unwrap();
        let cfg = PmleConfig {
            n_starts: 3,
            ..PmleConfig::default()
        };
        let base = fit_pmle(&s0, Family::Normal, 2, &cfg).unwrap();

        let (c, m) = (2.0, -1.0);
        let moved: Vec<f64> = data.iter().map(|x| c * x + m).collect();
        let s1 = SortedSample::new(&moved).unwrap();
        let t_fit = fit_pmle(&s1, Family::Normal, 2, &cfg).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(
                t_fit.g_hat.weights()[j],
                base.g_hat.weights()[j],
                epsilon = 1e-6
            );
            assert_abs_diff_eq!(
                t_fit.g_hat.locations()[j],
                c * base.g_hat.locations()[j] + m,
                epsilon = 1e-5
            );
            assert_abs_diff_eq!(
                t_fit.g_hat.scales()[j],
                c * base.g_hat.scales()[j],
                epsilon = 1e-5
            );
        }
    }

    #[test]
    fn homogeneous_mle_normal_and_numeric() {
        let s = SortedSample::new(&draw(
            &MixingDistribution::single(1.0, 2.0).unwrap(),
            Family::Normal,
            400,
            8,
        ))
        .unwrap();
        let fit = fit_homogeneous_mle(&s, Family::Normal).unwrap();
        assert_abs_diff_eq!(fit.mu, s.mean(), epsilon = 1e-12);

        // Numeric route for the logistic: check the score equations hold at
        // the reported optimum.
        let sl = SortedSample::new(&draw(
            &MixingDistribution::single(0.0, 1.0).unwrap(),
            Family::Logistic,
            300,
            2,
        ))
        .unwrap();
        let ml = fit_homogeneous_mle(&sl, Family::Logistic).unwrap();
        let (mu, sigma) = (ml.mu, ml.sigma);
        let mut score_mu = 0.0;
        let mut score_sigma = 0.0;
        for &x in sl.values() {
            let z = (x - mu) / sigma;
            let sc = Family::Logistic.score(z);
            score_mu += -sc / sigma;
            score_sigma += -sc * z - 1.0;
        }
        assert!(score_mu.abs() < 1e-5, "d/dmu = {score_mu}");
        assert!(score_sigma.abs() < 1e-5, "d/dlogsigma = {score_sigma}");
    }
}
