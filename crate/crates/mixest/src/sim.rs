//! Declarative simulation scenarios, seeded data generation, replication
//! running, and ML2/MARI aggregation.
//!
//! Every replication draws its data from a stream keyed by
//! `(master seed, N, r)` only, so both estimators in a cell see the same
//! dataset; the estimator start seeds are keyed the same way, giving both
//! the same start points. For the robustness scenarios (outliers,
//! contamination, mis-specification) the scoring target is the clean
//! two-component normal mixture.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::family::Family;
use crate::metrics::{ari, l2_mixture_distance, two_component_mixture};
use crate::mixture::{draw_standard, MixingDistribution, SortedSample};
use crate::mwde::{fit_homogeneous_mwde, fit_mwde, MwdeConfig};
use crate::pmle::{fit_homogeneous_mle, fit_pmle, PmleConfig};
use crate::rng::{derive_stream, stream_rng};
use crate::{Error, Result};

/// Stream purpose tags.
const DATA_TAG: u64 = 1;
const FIT_TAG: u64 = 2;
const HOMOG_TAG: u64 = 3;

/// Contamination rate used by the robustness scenarios.
const DEFAULT_ALPHA: f64 = 0.01;

/// Origin tag for contaminant draws in traced generation.
pub(crate) const CONTAMINANT: u8 = u8::MAX;

/// The estimators the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Mwde,
    Pmle,
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimator::Mwde => write!(f, "mwde"),
            Estimator::Pmle => write!(f, "pmle"),
        }
    }
}

/// Preset 3-component normal mixtures spanning low and high overlap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThreeComponentRow {
    I,
    II,
    III,
    IV,
    V,
    VI,
    VII,
    VIII,
}

impl ThreeComponentRow {
    pub fn all() -> [ThreeComponentRow; 8] {
        use ThreeComponentRow::*;
        [I, II, III, IV, V, VI, VII, VIII]
    }

    /// `(weights, locations, scales)` for the row.
    pub fn parameters(self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let third = 1.0 / 3.0;
        match self {
            ThreeComponentRow::I => ([0.4, 0.5, 0.1], [-2.0, 0.0, 1.0], [0.3, 2.0, 0.4]),
            ThreeComponentRow::II => ([0.4, 0.5, 0.1], [-2.0, 0.0, 1.0], [0.3, 1.0, 0.4]),
            ThreeComponentRow::III => ([0.3, 0.5, 0.2], [-3.0, 0.0, 3.0], [1.0, 1.0, 1.0]),
            ThreeComponentRow::IV => ([0.3, 0.5, 0.2], [-2.0, 0.0, 2.0], [1.0, 1.0, 1.0]),
            ThreeComponentRow::V => ([third; 3], [-1.0, 0.0, 1.0], [1.5, 0.1, 0.5]),
            ThreeComponentRow::VI => ([third; 3], [-0.5, 0.0, 0.5], [1.5, 0.1, 0.5]),
            ThreeComponentRow::VII => ([third; 3], [-3.0, 0.0, 3.0], [1.0, 1.0, 1.0]),
            ThreeComponentRow::VIII => ([third; 3], [-2.0, 0.0, 2.0], [1.0, 1.0, 1.0]),
        }
    }
}

impl std::fmt::Display for ThreeComponentRow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// A data-generating process: the mixture (or contaminated /
/// mis-specified variant) that replications sample from.
///
/// Two-component scenarios follow `p f(x | 0, a) + (1 - p) f(x | b, 1)`.
/// The robustness scenarios generate from normal mixtures with an added
/// contaminant or with Student-t subpopulations, while fitting and scoring
/// stay on the clean two-component normal mixture.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSpec {
    /// `p f(x | 0, a) + (1 - p) f(x | b, 1)` in the given family.
    TwoComponent {
        family: Family,
        p: f64,
        a: f64,
        b: f64,
    },
    /// A 3-component normal mixture from the parameter table.
    ThreeComponent { row: ThreeComponentRow },
    /// Two-component normal plus an `alpha` fraction from N(8, 1).
    OutlierContaminated {
        p: f64,
        a: f64,
        b: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// Two-component normal plus an `alpha` fraction from N(b/2, 7).
    DensityContaminated {
        p: f64,
        a: f64,
        b: f64,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    /// Both subpopulations Student-t with 4 degrees of freedom.
    MisspecifiedI { p: f64, a: f64, b: f64 },
    /// Subpopulations Student-t with 2 and 4 degrees of freedom.
    MisspecifiedII { p: f64, a: f64, b: f64 },
    /// Single standard component of the given family.
    Homogeneous { family: Family },
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ScenarioSpec {
    /// Compact deterministic identifier used in result rows.
    pub fn id(&self) -> String {
        match self {
            ScenarioSpec::TwoComponent { family, p, a, b } => {
                format!("two_component[{family};p={p};a={a};b={b:.4}]")
            }
            ScenarioSpec::ThreeComponent { row } => format!("three_component[{row}]"),
            ScenarioSpec::OutlierContaminated { p, a, b, alpha } => {
                format!("outlier[p={p};a={a};b={b:.4};alpha={alpha}]")
            }
            ScenarioSpec::DensityContaminated { p, a, b, alpha } => {
                format!("contaminated[p={p};a={a};b={b:.4};alpha={alpha}]")
            }
            ScenarioSpec::MisspecifiedI { p, a, b } => {
                format!("misspecified_i[p={p};a={a};b={b:.4}]")
            }
            ScenarioSpec::MisspecifiedII { p, a, b } => {
                format!("misspecified_ii[p={p};a={a};b={b:.4}]")
            }
            ScenarioSpec::Homogeneous { family } => format!("homogeneous[{family}]"),
        }
    }

    /// Family used for fitting and scoring.
    pub fn family(&self) -> Family {
        match self {
            ScenarioSpec::TwoComponent { family, .. } | ScenarioSpec::Homogeneous { family } => {
                *family
            }
            _ => Family::Normal,
        }
    }

    /// Number of components the estimators fit.
    pub fn fitted_k(&self) -> usize {
        match self {
            ScenarioSpec::Homogeneous { .. } => 1,
            ScenarioSpec::ThreeComponent { .. } => 3,
            _ => 2,
        }
    }

    /// The mixture that scoring (L2, MARI) compares against. For the
    /// robustness scenarios this is the clean two-component normal part.
    pub fn true_mixture(&self) -> MixingDistribution {
        match self {
            ScenarioSpec::TwoComponent { p, a, b, .. }
            | ScenarioSpec::OutlierContaminated { p, a, b, .. }
            | ScenarioSpec::DensityContaminated { p, a, b, .. }
            | ScenarioSpec::MisspecifiedI { p, a, b }
            | ScenarioSpec::MisspecifiedII { p, a, b } => {
                two_component_mixture(*p, *a, *b).expect("scenario parameters validated")
            }
            ScenarioSpec::ThreeComponent { row } => {
                let (w, mu, sd) = row.parameters();
                MixingDistribution::new(w.to_vec(), mu.to_vec(), sd.to_vec())
                    .expect("table parameters are valid")
            }
            ScenarioSpec::Homogeneous { .. } => {
                MixingDistribution::single(0.0, 1.0).expect("valid")
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_pab = |p: f64, a: f64| -> Result<()> {
            if !(0.0 < p && p < 1.0) {
                return Err(Error::InvalidParameter(format!("p = {p} outside (0, 1)")));
            }
            if a <= 0.0 {
                return Err(Error::InvalidParameter(format!("a = {a} must be > 0")));
            }
            Ok(())
        };
        match self {
            ScenarioSpec::TwoComponent { p, a, .. }
            | ScenarioSpec::MisspecifiedI { p, a, .. }
            | ScenarioSpec::MisspecifiedII { p, a, .. } => check_pab(*p, *a),
            ScenarioSpec::OutlierContaminated { p, a, alpha, .. }
            | ScenarioSpec::DensityContaminated { p, a, alpha, .. } => {
                check_pab(*p, *a)?;
                if !(0.0..1.0).contains(alpha) {
                    return Err(Error::InvalidParameter(format!(
                        "alpha = {alpha} outside [0, 1)"
                    )));
                }
                Ok(())
            }
            ScenarioSpec::ThreeComponent { .. } | ScenarioSpec::Homogeneous { .. } => Ok(()),
        }
    }

    /// Draws plus the origin of each draw (component index, or
    /// `CONTAMINANT` for contaminant draws). Origins are diagnostics only
    /// and never reach the estimators.
    pub(crate) fn generate_traced<R: rand::Rng>(
        &self,
        n: usize,
        rng: &mut R,
    ) -> (Vec<f64>, Vec<u8>) {
        let mut xs = Vec::with_capacity(n);
        let mut origin = Vec::with_capacity(n);
        match self {
            ScenarioSpec::TwoComponent { family, p, a, b } => {
                for _ in 0..n {
                    let y = draw_standard(*family, rng);
                    if rng.random::<f64>() < *p {
                        xs.push(a * y);
                        origin.push(0);
                    } else {
                        xs.push(y + b);
                        origin.push(1);
                    }
                }
            }
            ScenarioSpec::ThreeComponent { row } => {
                let (w, mu, sd) = row.parameters();
                for _ in 0..n {
                    let u: f64 = rng.random();
                    let k = if u < w[0] {
                        0
                    } else if u < w[0] + w[1] {
                        1
                    } else {
                        2
                    };
                    let y = draw_standard(Family::Normal, rng);
                    xs.push(mu[k] + sd[k] * y);
                    origin.push(k as u8);
                }
            }
            ScenarioSpec::OutlierContaminated { p, a, b, alpha }
            | ScenarioSpec::DensityContaminated { p, a, b, alpha } => {
                let (c_loc, c_sd) = match self {
                    ScenarioSpec::OutlierContaminated { .. } => (8.0, 1.0),
                    _ => (b / 2.0, 7.0),
                };
                for _ in 0..n {
                    let y = draw_standard(Family::Normal, rng);
                    if rng.random::<f64>() < *alpha {
                        xs.push(c_loc + c_sd * y);
                        origin.push(CONTAMINANT);
                    } else if rng.random::<f64>() < *p {
                        xs.push(a * y);
                        origin.push(0);
                    } else {
                        xs.push(y + b);
                        origin.push(1);
                    }
                }
            }
            ScenarioSpec::MisspecifiedI { p, a, b } => {
                for _ in 0..n {
                    let y = draw_student_t(4.0, rng);
                    if rng.random::<f64>() < *p {
                        xs.push(a * y);
                        origin.push(0);
                    } else {
                        xs.push(y + b);
                        origin.push(1);
                    }
                }
            }
            ScenarioSpec::MisspecifiedII { p, a, b } => {
                for _ in 0..n {
                    if rng.random::<f64>() < *p {
                        xs.push(a * draw_student_t(2.0, rng));
                        origin.push(0);
                    } else {
                        xs.push(draw_student_t(4.0, rng) + b);
                        origin.push(1);
                    }
                }
            }
            ScenarioSpec::Homogeneous { family } => {
                for _ in 0..n {
                    xs.push(draw_standard(*family, rng));
                    origin.push(0);
                }
            }
        }
        (xs, origin)
    }

    /// `n` draws from the scenario's data-generating process.
    pub fn generate<R: rand::Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        self.generate_traced(n, rng).0
    }
}

fn draw_student_t<R: rand::Rng>(df: f64, rng: &mut R) -> f64 {
    use rand_distr::{Distribution, StudentT};
    let t = StudentT::new(df).expect("valid degrees of freedom");
    t.sample(rng)
}

/// Deterministic dataset for `(spec, n, replication)` under a master seed.
pub fn generate_dataset(spec: &ScenarioSpec, n: usize, master_seed: u64, rep: usize) -> Vec<f64> {
    let mut rng = stream_rng(
        master_seed,
        derive_stream(&[DATA_TAG, n as u64, rep as u64]),
    );
    spec.generate(n, &mut rng)
}

/// An experiment: one scenario crossed with sample sizes, replications,
/// and estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub sample_sizes: Vec<usize>,
    pub replications: usize,
    pub estimators: Vec<Estimator>,
    pub master_seed: u64,
    /// Optimizer starts per fit.
    #[serde(default = "default_starts")]
    pub n_starts: usize,
    /// Penalty strength override for the pMLE; `None` is `N^{-1/2}`.
    #[serde(default)]
    pub a_n: Option<f64>,
}

fn default_starts() -> usize {
    4
}

/// One (replication, estimator) outcome.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub estimator: Estimator,
    pub n: usize,
    pub rep: usize,
    pub l2: f64,
    pub ari: f64,
    pub converged: bool,
    /// Fit wall time; excluded from deterministic outputs.
    pub wall_ms: f64,
}

/// Run every `(N, replication, estimator)` cell of the experiment.
///
/// Replications execute in parallel (bound the pool with
/// `rayon::ThreadPoolBuilder` if needed); rows come back sorted by
/// `(n, rep, estimator)` so the output is independent of scheduling.
/// A failed fit yields a row with NaN metrics and `converged = false`
/// rather than aborting the run.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.scenario.validate()?;
    if config.replications == 0 {
        return Err(Error::InvalidParameter("replications must be >= 1".into()));
    }
    if config.estimators.is_empty() {
        return Err(Error::InvalidParameter("no estimators selected".into()));
    }
    let k = config.scenario.fitted_k();
    for &n in &config.sample_sizes {
        if n <= k {
            return Err(Error::DegenerateSample { n, k });
        }
    }

    let cells: Vec<(usize, usize)> = config
        .sample_sizes
        .iter()
        .flat_map(|&n| (0..config.replications).map(move |r| (n, r)))
        .collect();

    let mut rows: Vec<ResultRow> = cells
        .par_iter()
        .flat_map_iter(|&(n, rep)| run_cell(config, n, rep))
        .collect();
    rows.sort_by(|a, b| {
        (a.n, a.rep, estimator_order(a.estimator)).cmp(&(b.n, b.rep, estimator_order(b.estimator)))
    });
    Ok(rows)
}

fn estimator_order(e: Estimator) -> u8 {
    match e {
        Estimator::Mwde => 0,
        Estimator::Pmle => 1,
    }
}

fn run_cell(config: &ExperimentConfig, n: usize, rep: usize) -> Vec<ResultRow> {
    let spec = &config.scenario;
    let scenario_id = spec.id();
    let family = spec.family();
    let truth = spec.true_mixture();
    let k = spec.fitted_k();

    let data = generate_dataset(spec, n, config.master_seed, rep);
    let sample = match SortedSample::new(&data) {
        Ok(s) => s,
        Err(_) => {
            return failure_rows(config, &scenario_id, n, rep);
        }
    };
    let true_labels: Vec<usize> = data.iter().map(|&x| truth.classify(family, x)).collect();
    let fit_seed = derive_stream(&[FIT_TAG, config.master_seed, n as u64, rep as u64]);

    config
        .estimators
        .iter()
        .map(|&estimator| {
            let started = Instant::now();
            let fitted = match estimator {
                Estimator::Mwde => fit_mwde(
                    &sample,
                    family,
                    k,
                    &MwdeConfig {
                        n_starts: config.n_starts,
                        seed: fit_seed,
                        ..MwdeConfig::default()
                    },
                ),
                Estimator::Pmle => fit_pmle(
                    &sample,
                    family,
                    k,
                    &PmleConfig {
                        n_starts: config.n_starts,
                        seed: fit_seed,
                        a_n: config.a_n,
                        ..PmleConfig::default()
                    },
                ),
            };
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            match fitted {
                Ok(report) => {
                    let l2 = l2_mixture_distance(&report.g_hat, &truth, family).unwrap_or(f64::NAN);
                    let fit_labels: Vec<usize> = data
                        .iter()
                        .map(|&x| report.g_hat.classify(family, x))
                        .collect();
                    let ari_val = ari(&true_labels, &fit_labels).unwrap_or(f64::NAN);
                    ResultRow {
                        scenario: scenario_id.clone(),
                        estimator,
                        n,
                        rep,
                        l2,
                        ari: ari_val,
                        converged: report.converged,
                        wall_ms,
                    }
                }
                Err(_) => ResultRow {
                    scenario: scenario_id.clone(),
                    estimator,
                    n,
                    rep,
                    l2: f64::NAN,
                    ari: f64::NAN,
                    converged: false,
                    wall_ms,
                },
            }
        })
        .collect()
}

fn failure_rows(
    config: &ExperimentConfig,
    scenario_id: &str,
    n: usize,
    rep: usize,
) -> Vec<ResultRow> {
    config
        .estimators
        .iter()
        .map(|&estimator| ResultRow {
            scenario: scenario_id.to_string(),
            estimator,
            n,
            rep,
            l2: f64::NAN,
            ari: f64::NAN,
            converged: false,
            wall_ms: 0.0,
        })
        .collect()
}

/// Per-cell summary: mean and standard error of L2 and ARI.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryCell {
    pub scenario: String,
    pub estimator: Estimator,
    pub n: usize,
    pub reps: usize,
    pub failures: usize,
    pub ml2: f64,
    pub ml2_se: Option<f64>,
    pub mari: f64,
    pub mari_se: Option<f64>,
}

/// Aggregate rows per `(scenario, estimator, N)`; deterministic key order.
/// Failed rows (NaN metrics) are counted but excluded from the means.
pub fn aggregate(rows: &[ResultRow]) -> Result<Vec<SummaryCell>> {
    if rows.is_empty() {
        return Err(Error::InvalidParameter("no rows to aggregate".into()));
    }
    use std::collections::BTreeMap;
    let mut groups: BTreeMap<(String, u8, usize), Vec<&ResultRow>> = BTreeMap::new();
    for row in rows {
        groups
            .entry((row.scenario.clone(), estimator_order(row.estimator), row.n))
            .or_default()
            .push(row);
    }
    let mean_se = |values: &[f64]| -> (f64, Option<f64>) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        if values.len() < 2 {
            return (mean, None);
        }
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        (mean, Some((var / n).sqrt()))
    };
    Ok(groups
        .into_iter()
        .map(|((scenario, est_ord, n), group)| {
            let ok: Vec<&&ResultRow> = group.iter().filter(|r| r.l2.is_finite()).collect();
            let l2s: Vec<f64> = ok.iter().map(|r| r.l2).collect();
            let aris: Vec<f64> = ok.iter().map(|r| r.ari).collect();
            let (ml2, ml2_se) = mean_se(&l2s);
            let (mari, mari_se) = mean_se(&aris);
            SummaryCell {
                scenario,
                estimator: if est_ord == 0 {
                    Estimator::Mwde
                } else {
                    Estimator::Pmle
                },
                n,
                reps: group.len(),
                failures: group.len() - ok.len(),
                ml2,
                ml2_se,
                mari,
                mari_se,
            }
        })
        .collect())
}

/// Homogeneous rate study: MLE vs closed-form MWDE on standard-family
/// samples, recording the fitted location and scale per replication.
#[derive(Debug, Clone, Serialize)]
pub struct HomogeneousRow {
    pub estimator: &'static str,
    pub n: usize,
    pub rep: usize,
    pub mu_hat: f64,
    pub sigma_hat: f64,
}

/// Run the homogeneous comparison; truth is `mu = 0`, `sigma = 1`.
pub fn run_homogeneous_study(
    family: Family,
    sample_sizes: &[usize],
    replications: usize,
    master_seed: u64,
) -> Result<Vec<HomogeneousRow>> {
    let cells: Vec<(usize, usize)> = sample_sizes
        .iter()
        .flat_map(|&n| (0..replications).map(move |r| (n, r)))
        .collect();
    let rows: Vec<HomogeneousRow> = cells
        .par_iter()
        .map(|&(n, rep)| -> Result<[HomogeneousRow; 2]> {
            let mut rng = stream_rng(
                master_seed,
                derive_stream(&[HOMOG_TAG, n as u64, rep as u64]),
            );
            let data: Vec<f64> = (0..n).map(|_| draw_standard(family, &mut rng)).collect();
            let sample = SortedSample::new(&data)?;
            let mwde = fit_homogeneous_mwde(&sample, family)?;
            let mle = fit_homogeneous_mle(&sample, family)?;
            Ok([
                HomogeneousRow {
                    estimator: "mwde",
                    n,
                    rep,
                    mu_hat: mwde.mu,
                    sigma_hat: mwde.sigma,
                },
                HomogeneousRow {
                    estimator: "mle",
                    n,
                    rep,
                    mu_hat: mle.mu,
                    sigma_hat: mle.sigma,
                },
            ])
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let mut rows = rows;
    rows.sort_by(|a, b| (a.n, a.rep, a.estimator).cmp(&(b.n, b.rep, b.estimator)));
    Ok(rows)
}

/// Mean squared errors of the location and scale per `(estimator, N)`.
pub fn homogeneous_mse(
    rows: &[HomogeneousRow],
) -> std::collections::BTreeMap<(&'static str, usize), (f64, f64)> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<(&'static str, usize), (f64, f64, usize)> = BTreeMap::new();
    for row in rows {
        let e = acc.entry((row.estimator, row.n)).or_insert((0.0, 0.0, 0));
        e.0 += row.mu_hat * row.mu_hat;
        e.1 += (row.sigma_hat - 1.0) * (row.sigma_hat - 1.0);
        e.2 += 1;
    }
    acc.into_iter()
        .map(|(k, (mu_sq, sd_sq, count))| (k, (mu_sq / count as f64, sd_sq / count as f64)))
        .collect()
}

/// Ordinary least squares slope of `ln y` on `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    cov / var
}
