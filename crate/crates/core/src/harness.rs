//! Monte Carlo comparison harness: risk and bias curves over the local
//! parameter delta0 for the minimax estimator, the two bias-reduction
//! competitors, and the raw plug-in.
//!
//! Seeding: with master seed m, replication j of grid point i draws its
//! sample from stream (m, i, j, 0), its surface draws from (m, i, j, 1) and
//! its competitor draws from (m, i, j, 2) in the [`SeedTree`] scheme; the
//! labeled fast mode replaces (m, i, j, 1) with the shared stream (m,
//! 0xA11) for every replication. Replications are reduced in index order
//! with compensated summation, so the thread count never changes results.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bias::{BiasConfig, RSearch};
use crate::error::{Error, Result};
use crate::estim::{
    estimate_minimax_from_moments, fit_moments, max_adjustment, Sample,
};
use crate::gmap::GMap;
use crate::kink::KinkMap;
use crate::linalg::sym_sqrt_pd;
use crate::loss::Loss;
use crate::rng::{standard_normal_matrix, SeedTree};

/// Which composite parameter the experiment targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Design {
    /// theta = max(beta_1, beta_2), identity transform; the population mean
    /// is (0, delta0 / sqrt(n)).
    MaxOfMeans,
    /// theta = max(beta_1, 0) via relu of the first coordinate; the
    /// population mean is (delta0 / sqrt(n), 0) and the second coordinate
    /// is unused by the parameter.
    ReluOfMean,
}

impl Design {
    pub fn g(&self) -> GMap {
        match self {
            Design::MaxOfMeans => GMap::max_coords(2).expect("static map"),
            Design::ReluOfMean => GMap::coord(2, 0).expect("static map"),
        }
    }

    pub fn f(&self) -> KinkMap {
        match self {
            Design::MaxOfMeans => KinkMap::Identity,
            Design::ReluOfMean => KinkMap::relu(0.0),
        }
    }

    pub fn mean(&self, delta0: f64, n: usize) -> Vec<f64> {
        let local = delta0 / (n as f64).sqrt();
        match self {
            Design::MaxOfMeans => vec![0.0, local],
            Design::ReluOfMean => vec![local, 0.0],
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "max_of_means" => Ok(Design::MaxOfMeans),
            "relu_of_mean" => Ok(Design::ReluOfMean),
            other => Err(Error::Input(format!(
                "unknown design '{other}' (expected max_of_means or relu_of_mean)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Design::MaxOfMeans => "max_of_means",
            Design::ReluOfMean => "relu_of_mean",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EstimatorKind {
    Minimax,
    FixedBias,
    SelectiveBias,
    PlugIn,
}

impl EstimatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Minimax => "minimax",
            EstimatorKind::FixedBias => "fixed_bias",
            EstimatorKind::SelectiveBias => "selective_bias",
            EstimatorKind::PlugIn => "plug_in",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub design: Design,
    pub n: usize,
    pub reps: usize,
    pub delta0_grid: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub loss: Loss,
    pub bias: BiasConfig,
    pub master_seed: u64,
    /// Labeled fast mode: reuse one xi stream across replications instead
    /// of redrawing per replication.
    pub reuse_xi: bool,
}

/// Covariance used throughout the comparison study.
pub fn study_sigma() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 4.0])
}

impl ExperimentConfig {
    /// CI-sized preset: 2000 replications, 1000 draws, an 11-point grid and
    /// a thinned adjustment search.
    pub fn desk_scale(design: Design, master_seed: u64) -> Self {
        ExperimentConfig {
            design,
            n: 300,
            reps: 2000,
            delta0_grid: crate::bias::linspace(-10.0, 10.0, 11),
            sigma: study_sigma(),
            loss: Loss::squared(),
            bias: BiasConfig {
                draws: 1000,
                c_grid: 41,
                r_search: RSearch {
                    grid_pts: 9,
                    starts: 1,
                    max_iters: 30,
                    tol: 1e-6,
                },
                ..BiasConfig::default()
            },
            master_seed,
            reuse_xi: false,
        }
    }

    /// Full-sized preset: 20000 replications, a 41-point grid, and the
    /// module-default adjustment search.
    pub fn full_scale(design: Design, master_seed: u64) -> Self {
        ExperimentConfig {
            reps: 20_000,
            delta0_grid: crate::bias::linspace(-10.0, 10.0, 41),
            bias: BiasConfig {
                draws: 1000,
                ..BiasConfig::default()
            },
            ..ExperimentConfig::desk_scale(design, master_seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.reps < 1 {
            problems.push("reps must be >= 1".to_string());
        }
        if self.delta0_grid.is_empty() {
            problems.push("delta0 grid must be nonempty".to_string());
        }
        if self.n < 2 {
            problems.push(format!("n must be >= 2, got {}", self.n));
        }
        if self.sigma.nrows() != 2 || self.sigma.ncols() != 2 {
            problems.push(format!(
                "experiment sigma must be 2x2, got {}x{}",
                self.sigma.nrows(),
                self.sigma.ncols()
            ));
        }
        if let Err(Error::Config(mut inner)) = self.bias.validate() {
            problems.append(&mut inner);
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }

    fn estimators(&self) -> Vec<EstimatorKind> {
        match self.design {
            Design::MaxOfMeans => vec![
                EstimatorKind::Minimax,
                EstimatorKind::FixedBias,
                EstimatorKind::SelectiveBias,
                EstimatorKind::PlugIn,
            ],
            // The competitors' adjustment is specific to the max design.
            Design::ReluOfMean => vec![EstimatorKind::Minimax, EstimatorKind::PlugIn],
        }
    }
}

/// One (delta0, estimator) cell of the risk curve.
#[derive(Clone, Debug)]
pub struct RiskRow {
    pub delta0: f64,
    pub estimator: EstimatorKind,
    pub scaled_mse: f64,
    pub scaled_mse_se: f64,
    pub scaled_bias: f64,
    pub scaled_bias_se: f64,
    pub reps_used: usize,
    pub failures: usize,
}

#[derive(Clone, Debug)]
pub struct RiskCurve {
    pub rows: Vec<RiskRow>,
}

impl RiskCurve {
    pub fn row(&self, delta0: f64, estimator: EstimatorKind) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.delta0 == delta0 && r.estimator == estimator)
    }
}

/// n draws from the study distribution with mean (0, delta0 / sqrt(n)).
pub fn generate_sample(delta0: f64, n: usize, sigma: &DMatrix<f64>, seed: u64) -> Result<Sample> {
    if sigma.nrows() != 2 || sigma.ncols() != 2 {
        return Err(Error::Input(format!(
            "study sigma must be 2x2, got {}x{}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let mean = vec![0.0, delta0 / (n as f64).sqrt()];
    sample_mvn(&mean, sigma, n, seed)
}

/// n draws from N(mean, sigma) through the symmetric square root.
pub fn sample_mvn(mean: &[f64], sigma: &DMatrix<f64>, n: usize, seed: u64) -> Result<Sample> {
    let d = mean.len();
    if sigma.nrows() != d || sigma.ncols() != d {
        return Err(Error::Input(format!(
            "sigma is {}x{}, expected {d}x{d}",
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    let half = sym_sqrt_pd(sigma)?;
    let mut data = standard_normal_matrix(n, d, seed) * half;
    for i in 0..n {
        for j in 0..d {
            data[(i, j)] += mean[j];
        }
    }
    Sample::new(data)
}

enum RepOutcome {
    Ok(Vec<f64>),
    DegenerateCovariance,
}

/// Neumaier-compensated sum in slice order.
fn csum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

const XI_REUSE_LABEL: u64 = 0xA11;

/// Run the full comparison: per grid point and replication, draw a sample,
/// recompute every estimator (the adjustment constant is recomputed from
/// that replication's moments), and accumulate scaled mean squared error
/// and scaled bias against the true parameter.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RiskCurve> {
    cfg.validate()?;
    let estimators = cfg.estimators();
    let g = cfg.design.g();
    let f = cfg.design.f();
    let root = SeedTree::new(cfg.master_seed);
    let shared_xi_seed = root.child(XI_REUSE_LABEL).seed();
    let sqrt_n = (cfg.n as f64).sqrt();

    let mut rows = Vec::with_capacity(cfg.delta0_grid.len() * estimators.len());
    for (di, &delta0) in cfg.delta0_grid.iter().enumerate() {
        let delta_tree = root.child(di as u64);
        let mean = cfg.design.mean(delta0, cfg.n);
        let theta = f.eval(g.eval(&mean)?);

        let outcomes: Vec<RepOutcome> = (0..cfg.reps)
            .into_par_iter()
            .map(|rep| -> Result<RepOutcome> {
                let t = delta_tree.child(rep as u64);
                let sample = sample_mvn(&mean, &cfg.sigma, cfg.n, t.child(0).seed())?;
                let (beta_hat, sigma_hat) = match fit_moments(&sample) {
                    Ok(m) => m,
                    Err(Error::NotPositiveDefinite { .. }) => {
                        return Ok(RepOutcome::DegenerateCovariance)
                    }
                    Err(e) => return Err(e),
                };
                let mut bias_cfg = cfg.bias.clone();
                bias_cfg.seed = if cfg.reuse_xi {
                    shared_xi_seed
                } else {
                    t.child(1).seed()
                };
                let report = estimate_minimax_from_moments(
                    &beta_hat, &sigma_hat, cfg.n, &g, &f, &cfg.loss, &bias_cfg,
                )?;
                let comp_seed = t.child(2).seed();
                let mut errs = Vec::with_capacity(estimators.len());
                for kind in &estimators {
                    let est = match kind {
                        EstimatorKind::Minimax => report.theta_hat,
                        EstimatorKind::PlugIn => report.plug_in,
                        EstimatorKind::FixedBias | EstimatorKind::SelectiveBias => {
                            let plug = beta_hat[0].max(beta_hat[1]);
                            let gap = (beta_hat[1] - beta_hat[0]).abs();
                            let threshold = 1.7 * (cfg.n as f64).powf(-1.0 / 3.0);
                            let apply = matches!(kind, EstimatorKind::FixedBias)
                                || gap < threshold;
                            if apply {
                                let adj =
                                    max_adjustment(&sigma_hat, cfg.bias.draws, comp_seed)?;
                                plug - adj / sqrt_n
                            } else {
                                plug
                            }
                        }
                    };
                    errs.push(est - theta);
                }
                Ok(RepOutcome::Ok(errs))
            })
            .collect::<Result<Vec<_>>>()?;

        let failures = outcomes
            .iter()
            .filter(|o| matches!(o, RepOutcome::DegenerateCovariance))
            .count();
        let used = cfg.reps - failures;
        if used == 0 {
            return Err(Error::Input(format!(
                "every replication at delta0 = {delta0} had a degenerate covariance"
            )));
        }
        for (k, kind) in estimators.iter().enumerate() {
            let errs = outcomes.iter().filter_map(|o| match o {
                RepOutcome::Ok(e) => Some(e[k]),
                RepOutcome::DegenerateCovariance => None,
            });
            let errs: Vec<f64> = errs.collect();
            let m = errs.len() as f64;
            let s1 = csum(errs.iter().copied());
            let s2 = csum(errs.iter().map(|e| e * e));
            let s4 = csum(errs.iter().map(|e| e * e * e * e));
            let mean_e = s1 / m;
            let mean_e2 = s2 / m;
            let mean_e4 = s4 / m;
            let var_e = ((mean_e2 - mean_e * mean_e) * m / (m - 1.0)).max(0.0);
            let var_e2 = ((mean_e4 - mean_e2 * mean_e2) * m / (m - 1.0)).max(0.0);
            rows.push(RiskRow {
                delta0,
                estimator: *kind,
                scaled_mse: cfg.n as f64 * mean_e2,
                scaled_mse_se: cfg.n as f64 * (var_e2 / m).sqrt(),
                scaled_bias: sqrt_n * mean_e,
                scaled_bias_se: sqrt_n * (var_e / m).sqrt(),
                reps_used: errs.len(),
                failures,
            });
        }
    }
    Ok(RiskCurve { rows })
}
