//! Estimator assembly: sample moments, the bias-adjusted plug-in
//! estimator, and the two bias-reduction competitors it is benchmarked
//! against.

use nalgebra::{DMatrix, DVector};

use crate::bias::{c_hat, BiasConfig};
use crate::error::{Error, Result};
use crate::gmap::GMap;
use crate::kink::KinkMap;
use crate::linalg::{min_symmetric_eigenvalue, sym_sqrt_pd, EIG_FLOOR};
use crate::loss::{Loss, LossFamily};
use crate::rng::standard_normal_matrix;

/// n x d observation matrix (rows are observations).
#[derive(Clone, Debug)]
pub struct Sample {
    data: DMatrix<f64>,
}

impl Sample {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() < 2 {
            return Err(Error::Input(format!(
                "need at least 2 observations for a sample covariance, got {}",
                data.nrows()
            )));
        }
        if data.ncols() == 0 {
            return Err(Error::Input("observations need at least one column".into()));
        }
        Ok(Sample { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("empty observation set".into()));
        }
        let d = rows[0].len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Input("ragged observation rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Sample::new(DMatrix::from_row_slice(rows.len(), d, &flat))
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Shift every observation by c in each coordinate.
    pub fn shifted(&self, c: f64) -> Sample {
        Sample {
            data: self.data.map(|v| v + c),
        }
    }
}

/// Sample mean and sample covariance (divisor n-1). The covariance must be
/// invertible; a degenerate one (e.g. a constant column) is an error.
pub fn fit_moments(sample: &Sample) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = sample.n();
    let d = sample.dim();
    let data = sample.data();
    let mean = data.row_mean().transpose();
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..n {
        let row = data.row(i).transpose() - &mean;
        cov += &row * row.transpose();
    }
    cov /= (n - 1) as f64;
    let min_eig = min_symmetric_eigenvalue(&cov);
    if min_eig <= EIG_FLOOR {
        return Err(Error::NotPositiveDefinite { min_eig });
    }
    Ok((mean, cov))
}

/// Full record of one minimax estimate.
#[derive(Clone, Debug)]
pub struct EstimateReport {
    pub theta_hat: f64,
    pub beta_hat: DVector<f64>,
    pub sigma_hat: DMatrix<f64>,
    pub c_hat: f64,
    pub s_hat: f64,
    /// f(g(beta_hat)) with no adjustment.
    pub plug_in: f64,
    pub eps_n: f64,
    pub eta: f64,
    pub draws: usize,
    pub seed: u64,
    pub n: usize,
    /// Set when s_hat = 0 made the surface identically zero; the
    /// adjustment is pinned to 0 in that case.
    pub degenerate_scale: bool,
}

/// The bias-adjusted plug-in estimator f(g(beta_hat) + c_hat / sqrt(n)).
///
/// For power losses with a positive estimated scale the adjustment is
/// computed at scale 1: the loss is homogeneous, so the scaled surface has
/// the same near-minimizers and the scale-1 constant is the one to use.
pub fn estimate_minimax(
    sample: &Sample,
    g: &GMap,
    f: &KinkMap,
    loss: &Loss,
    cfg: &BiasConfig,
) -> Result<EstimateReport> {
    let (beta_hat, sigma_hat) = fit_moments(sample)?;
    estimate_minimax_from_moments(&beta_hat, &sigma_hat, sample.n(), g, f, loss, cfg)
}

/// Same as [`estimate_minimax`] for externally supplied moments, so other
/// efficient estimators of (beta, Sigma) can be plugged in.
pub fn estimate_minimax_from_moments(
    beta_hat: &DVector<f64>,
    sigma_hat: &DMatrix<f64>,
    n: usize,
    g: &GMap,
    f: &KinkMap,
    loss: &Loss,
    cfg: &BiasConfig,
) -> Result<EstimateReport> {
    if n < 1 {
        return Err(Error::Input("sample size must be >= 1".into()));
    }
    if loss.trunc.is_finite() && cfg.m1 < loss.trunc {
        return Err(Error::Input(format!(
            "m1 = {} must be >= the loss truncation level {}",
            cfg.m1, loss.trunc
        )));
    }
    let beta_slice: Vec<f64> = beta_hat.iter().copied().collect();
    let g_beta = g.eval(&beta_slice)?;
    let eps_n = cfg.eps.resolve(n)?;
    let s_hat = f.s_hat(g_beta, eps_n)?;

    let (c_value, eta, degenerate) = if s_hat == 0.0 {
        // Zero scale: every c minimizes the (identically zero) surface.
        (0.0, cfg.eta.resolve(n, cfg.draws), true)
    } else {
        let a_eff = match loss.family {
            LossFamily::Power { .. } => 1.0,
            LossFamily::Huber { .. } => s_hat,
        };
        let surface = c_hat(a_eff, g, loss, &beta_slice, sigma_hat, n, cfg)?;
        (surface.c_hat, surface.eta, false)
    };

    let theta_hat = f.eval(g_beta + c_value / (n as f64).sqrt());
    Ok(EstimateReport {
        theta_hat,
        beta_hat: beta_hat.clone(),
        sigma_hat: sigma_hat.clone(),
        c_hat: c_value,
        s_hat,
        plug_in: f.eval(g_beta),
        eps_n,
        eta,
        draws: cfg.draws,
        seed: cfg.seed,
        n,
        degenerate_scale: degenerate,
    })
}

/// Simulated adjustment mean(max of covariance-rotated draws), shared by
/// the fixed and selective competitors.
pub(crate) fn max_adjustment(
    sigma_hat: &DMatrix<f64>,
    draws: usize,
    seed: u64,
) -> Result<f64> {
    let half = sym_sqrt_pd(sigma_hat)?;
    let xi = standard_normal_matrix(draws, 2, seed);
    let w = xi * half;
    let mut acc = 0.0;
    for i in 0..draws {
        acc += w[(i, 0)].max(w[(i, 1)]);
    }
    Ok(acc / draws as f64)
}

fn require_two_dims(sample: &Sample, what: &str) -> Result<()> {
    if sample.dim() != 2 {
        return Err(Error::Unsupported(format!(
            "{what} is defined for the two-dimensional max design, got d = {}",
            sample.dim()
        )));
    }
    Ok(())
}

/// max(beta_hat) minus the simulated asymptotic bias, always applied.
pub fn estimate_fixed_bias(sample: &Sample, draws: usize, seed: u64) -> Result<f64> {
    require_two_dims(sample, "fixed bias reduction")?;
    let (beta_hat, sigma_hat) = fit_moments(sample)?;
    let adj = max_adjustment(&sigma_hat, draws, seed)?;
    Ok(beta_hat[0].max(beta_hat[1]) - adj / (sample.n() as f64).sqrt())
}

/// As the fixed competitor, but the adjustment is applied only when the
/// coordinate estimates are within 1.7 * n^(-1/3) of each other (strict
/// inequality; the boundary case takes no adjustment).
pub fn estimate_selective_bias(sample: &Sample, draws: usize, seed: u64) -> Result<f64> {
    require_two_dims(sample, "selective bias reduction")?;
    let (beta_hat, sigma_hat) = fit_moments(sample)?;
    let n = sample.n() as f64;
    let plug = beta_hat[0].max(beta_hat[1]);
    let threshold = 1.7 * n.powf(-1.0 / 3.0);
    if (beta_hat[1] - beta_hat[0]).abs() < threshold {
        let adj = max_adjustment(&sigma_hat, draws, seed)?;
        Ok(plug - adj / n.sqrt())
    } else {
        Ok(plug)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bias::{EtaRule, RSearch};

    fn quick_cfg() -> BiasConfig {
        BiasConfig {
            draws: 2000,
            c_grid: 81,
            r_search: RSearch {
                grid_pts: 5,
                starts: 1,
                max_iters: 15,
                tol: 1e-6,
            },
            seed: 5,
            ..BiasConfig::default()
        }
    }

    #[test]
    fn moments_of_tiny_sample() {
        // Two perfectly collinear observations: mean is right, covariance
        // is singular and must be flagged.
        let s = Sample::from_rows(&[vec![0.0, 0.0], vec![2.0, 2.0]]).unwrap();
        let err = fit_moments(&s);
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn constant_column_rejected() {
        let s = Sample::from_rows(&[vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]]).unwrap();
        assert!(matches!(
            fit_moments(&s),
            Err(Error::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn moments_match_hand_computation() {
        let s = Sample::from_rows(&[vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 2.0]]).unwrap();
        let (mean, cov) = fit_moments(&s).unwrap();
        assert!((mean[0] - 2.0).abs() < 1e-15);
        assert!((mean[1] - 2.0).abs() < 1e-15);
        assert!((cov[(0, 0)] - 4.0).abs() < 1e-12);
        assert!((cov[(1, 1)] - 1.0).abs() < 1e-12);
        assert!((cov[(0, 1)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn report_invariant_holds_bit_exactly() {
        let s = Sample::from_rows(&[
            vec![0.3, 1.0],
            vec![-0.2, 0.7],
            vec![0.9, -0.4],
            vec![0.1, 0.2],
            vec![0.5, 0.6],
        ])
        .unwrap();
        let g = GMap::max_coords(2).unwrap();
        let f = KinkMap::Identity;
        let loss = Loss::squared();
        let report = estimate_minimax(&s, &g, &f, &loss, &quick_cfg()).unwrap();
        let beta: Vec<f64> = report.beta_hat.iter().copied().collect();
        let expect = f.eval(g.eval(&beta).unwrap() + report.c_hat / (s.n() as f64).sqrt());
        assert_eq!(report.theta_hat.to_bits(), expect.to_bits());
        assert_eq!(report.plug_in.to_bits(), g.eval(&beta).unwrap().to_bits());
    }

    #[test]
    fn degenerate_scale_pins_adjustment_to_zero() {
        // relu with the estimate far left of the kink: s_hat = 0.
        let s = Sample::from_rows(&[vec![-5.1], vec![-4.9], vec![-5.3], vec![-4.7]]).unwrap();
        let g = GMap::coord(1, 0).unwrap();
        let f = KinkMap::relu(0.0);
        let loss = Loss::squared();
        let report = estimate_minimax(&s, &g, &f, &loss, &quick_cfg()).unwrap();
        assert!(report.degenerate_scale);
        assert_eq!(report.c_hat, 0.0);
        assert_eq!(report.s_hat, 0.0);
        assert_eq!(report.theta_hat, 0.0);
    }

    #[test]
    fn m1_below_loss_truncation_rejected() {
        let s = Sample::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![0.5, 2.0]]).unwrap();
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::new(LossFamily::Power { k: 2.0 }, 20.0).unwrap();
        let err = estimate_minimax(&s, &g, &KinkMap::Identity, &loss, &quick_cfg());
        assert!(err.is_err());
    }

    #[test]
    fn fixed_bias_requires_two_dims() {
        let s = Sample::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(
            estimate_fixed_bias(&s, 100, 1),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fixed_bias_determinism_and_sign() {
        let s = Sample::from_rows(&[
            vec![0.0, 0.1],
            vec![0.4, -0.2],
            vec![-0.3, 0.5],
            vec![0.2, 0.0],
        ])
        .unwrap();
        let a = estimate_fixed_bias(&s, 5000, 9).unwrap();
        let b = estimate_fixed_bias(&s, 5000, 9).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let (beta_hat, _) = fit_moments(&s).unwrap();
        // The adjustment mean(max) is positive for centered draws.
        assert!(a < beta_hat[0].max(beta_hat[1]));
    }

    #[test]
    fn selective_bias_indicator_regimes() {
        // Large gap: no adjustment, equals the plug-in.
        let far = Sample::from_rows(&[
            vec![0.0, 5.0],
            vec![0.2, 5.3],
            vec![-0.2, 4.8],
            vec![0.1, 4.9],
        ])
        .unwrap();
        let (beta_hat, _) = fit_moments(&far).unwrap();
        let sel = estimate_selective_bias(&far, 2000, 3).unwrap();
        assert_eq!(sel, beta_hat[0].max(beta_hat[1]));
        // Nearly tied estimates: equals the fixed competitor under shared draws.
        let near = Sample::from_rows(&[
            vec![0.0, 0.12],
            vec![0.15, 0.0],
            vec![-0.1, 0.06],
            vec![0.05, -0.13],
            vec![0.02, 0.04],
        ])
        .unwrap();
        let sel = estimate_selective_bias(&near, 2000, 3).unwrap();
        let fix = estimate_fixed_bias(&near, 2000, 3).unwrap();
        assert_eq!(sel.to_bits(), fix.to_bits());
    }

    #[test]
    fn power_loss_uses_scale_one_adjustment() {
        // A kinked f with slopes (2, 0.5) and the estimate strictly right of
        // the kink gives s_hat = 2; the reported adjustment must equal the
        // scale-1 adjustment for the squared loss.
        let s = Sample::from_rows(&[
            vec![3.0, 2.0],
            vec![3.2, 2.2],
            vec![2.8, 1.9],
            vec![3.1, 2.1],
            vec![2.9, 2.4],
        ])
        .unwrap();
        let g = GMap::max_coords(2).unwrap();
        let f = KinkMap::pwl(2.0, 0.5, 0.0, 0.0).unwrap();
        let loss = Loss::squared();
        let cfg = quick_cfg();
        let report = estimate_minimax(&s, &g, &f, &loss, &cfg).unwrap();
        assert_eq!(report.s_hat, 2.0);
        let (beta_hat, sigma_hat) = fit_moments(&s).unwrap();
        let beta: Vec<f64> = beta_hat.iter().copied().collect();
        let direct = c_hat(1.0, &g, &loss, &beta, &sigma_hat, s.n(), &cfg).unwrap();
        assert_eq!(report.c_hat.to_bits(), direct.c_hat.to_bits());
    }

    #[test]
    fn abs_of_scalar_is_nearly_the_absolute_plug_in() {
        // For theta = |beta| the adjustment is driven to zero by the
        // symmetric surface, so the estimate is |beta_hat| up to c_hat/sqrt(n).
        let sigma = nalgebra::DMatrix::from_row_slice(1, 1, &[1.2]);
        let sample = crate::harness::sample_mvn(&[-0.8], &sigma, 400, 21).unwrap();
        let g = GMap::coord(1, 0).unwrap();
        let f = KinkMap::abs(0.0);
        let loss = Loss::squared();
        let mut cfg = quick_cfg();
        cfg.draws = 20_000;
        cfg.c_grid = 161;
        let report = estimate_minimax(&sample, &g, &f, &loss, &cfg).unwrap();
        assert_eq!(report.s_hat, 1.0);
        let beta = report.beta_hat[0];
        let expect = (beta + report.c_hat / (sample.n() as f64).sqrt()).abs();
        assert_eq!(report.theta_hat.to_bits(), expect.to_bits());
        // Adjustment shrinks to grid + MC resolution.
        let grid_step = 2.0 * cfg.m1 / (cfg.c_grid - 1) as f64;
        let mc_se = (1.2f64 / cfg.draws as f64).sqrt();
        assert!(report.c_hat.abs() <= grid_step + 3.0 * mc_se);
        assert!((report.theta_hat - beta.abs()).abs() <= 0.2 / (sample.n() as f64).sqrt());
    }

    #[test]
    fn eta_rule_fixed_passthrough() {
        let mut cfg = quick_cfg();
        cfg.eta = EtaRule::Fixed(0.125);
        assert_eq!(cfg.eta.resolve(1000, 1000), 0.125);
    }
}
