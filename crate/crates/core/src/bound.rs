//! Population risk bound via the analytic directional derivative.
//!
//! b_pop(c; a) estimates sup over r of E[ tau( a * | dg(Z + r) - dg(r) + c | ) ]
//! with Z ~ N(0, Sigma) and dg the directional derivative of g at beta0.
//! This module never uses the data-driven derivative approximation — it is
//! the independent second route against which the empirical surface is
//! cross-checked.
//!
//! The sup over all of R^d is approximated by the same box search the
//! empirical surface uses, extended with probes at every +/-R coordinate
//! pattern: by translation invariance of the increments only coordinate
//! gaps matter, and for max/min maps the objective stabilizes once the gaps
//! are several standard deviations wide, so the extreme patterns stand in
//! for suprema attained in the limit. This is a heuristic for arbitrary
//! maps; it is validated case by case against brute-force oracles in the
//! test suite.

use nalgebra::DMatrix;

use crate::bias::{draw_w_rows, linspace, select_midpoint, RSearch, RiskSurfaceResult, SurfaceEngine};
use crate::error::{Error, Result};
use crate::gmap::GMap;
use crate::kink::KinkMap;
use crate::linalg::sym_sqrt_pd;
use crate::loss::Loss;

/// Monte Carlo and search settings for the population bound.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundConfig {
    /// Z draw count.
    pub mc_size: usize,
    /// Points of the c grid on [-c_max, c_max].
    pub c_grid: usize,
    pub c_max: f64,
    /// Box radius for the sup over r; `None` uses
    /// max(8, 8 * sqrt(max diagonal of Sigma)).
    pub box_radius: Option<f64>,
    pub r_search: RSearch,
    /// Antithetic pairing is on by default here: it removes odd-moment MC
    /// noise from the surface, which the near-minimizer midpoint needs at
    /// moderate draw counts.
    pub antithetic: bool,
    pub seed: u64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            mc_size: 100_000,
            c_grid: 401,
            c_max: 8.0,
            box_radius: None,
            r_search: RSearch {
                grid_pts: 9,
                starts: 2,
                max_iters: 25,
                tol: 1e-4,
            },
            antithetic: true,
            seed: 0,
        }
    }
}

/// Everything needed to evaluate the bound: the maps, the population
/// parameter and covariance, the loss and the Monte Carlo settings.
#[derive(Clone, Debug)]
pub struct BoundSpec {
    pub g: GMap,
    pub f: KinkMap,
    pub beta0: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub loss: Loss,
    pub cfg: BoundConfig,
}

/// Result of the minimax-bound search over c.
#[derive(Clone, Debug)]
pub struct MinimaxBound {
    pub c_star: f64,
    pub value: f64,
    /// Population slope scale s used as the loss scale.
    pub s: f64,
    /// True when s = 0 makes the surface identically zero.
    pub degenerate: bool,
    pub surface: RiskSurfaceResult,
}

impl BoundSpec {
    fn engine(&self, a: f64) -> Result<SurfaceEngine> {
        let d = self.g.dim();
        if self.beta0.len() != d {
            return Err(Error::Input(format!(
                "beta0 has length {}, expected {d}",
                self.beta0.len()
            )));
        }
        if self.sigma.nrows() != d || self.sigma.ncols() != d {
            return Err(Error::Input(format!(
                "sigma is {}x{}, expected {d}x{d}",
                self.sigma.nrows(),
                self.sigma.ncols()
            )));
        }
        if self.cfg.mc_size < 2 {
            return Err(Error::Input("mc_size must be >= 2".into()));
        }
        if self.cfg.c_grid < 2 {
            return Err(Error::Input("c_grid must be >= 2".into()));
        }
        let half = sym_sqrt_pd(&self.sigma)?;
        let radius = self.box_radius();
        let deriv = self.g.deriv_map(&self.beta0)?;
        let w_rows = draw_w_rows(self.cfg.mc_size, d, self.cfg.seed, &half, self.cfg.antithetic);
        let probes = sign_patterns(d, radius);
        SurfaceEngine::new(
            deriv,
            vec![0.0; d],
            w_rows,
            a,
            self.loss.family,
            self.loss.trunc,
            radius,
            self.cfg.r_search,
            probes,
            self.cfg.antithetic,
        )
    }

    pub fn box_radius(&self) -> f64 {
        self.cfg.box_radius.unwrap_or_else(|| {
            let max_diag = (0..self.sigma.nrows())
                .map(|i| self.sigma[(i, i)])
                .fold(0.0, f64::max);
            (8.0 * max_diag.sqrt()).max(8.0)
        })
    }
}

/// Every +/-radius coordinate pattern, probing suprema attained as some
/// coordinate gap grows without bound.
fn sign_patterns(d: usize, radius: f64) -> Vec<Vec<f64>> {
    let count = 1usize << d;
    (0..count)
        .map(|mask| {
            (0..d)
                .map(|j| if mask & (1 << j) != 0 { radius } else { -radius })
                .collect()
        })
        .collect()
}

/// Monte Carlo estimate of the population surface at a single c.
pub fn b_pop(c: f64, a: f64, spec: &BoundSpec) -> Result<f64> {
    let engine = spec.engine(a)?;
    Ok(engine.sup_single_c(c)?.value)
}

/// Minimize the population surface at the slope scale s over the c grid and
/// return the near-minimizer midpoint (slack = twice the Monte Carlo
/// standard error at the grid minimum) together with the minimal value.
pub fn minimax_bound(spec: &BoundSpec) -> Result<MinimaxBound> {
    let g_beta0 = spec.g.eval(&spec.beta0)?;
    let s = spec.f.slope_scale(g_beta0);
    let cs = linspace(-spec.cfg.c_max, spec.cfg.c_max, spec.cfg.c_grid);
    if s == 0.0 {
        // tau(0) = 0 for every c: the surface carries no information.
        let engine = spec.engine(0.0)?;
        let sups = engine.sup_grid(&cs)?;
        let surface = select_midpoint(&cs, sups, 0.0, f64::NAN, spec.cfg.mc_size);
        return Ok(MinimaxBound {
            c_star: 0.0,
            value: 0.0,
            s,
            degenerate: true,
            surface,
        });
    }
    let engine = spec.engine(s)?;
    let sups = engine.sup_grid(&cs)?;
    let mut min_idx = 0usize;
    for (i, sup) in sups.iter().enumerate() {
        if sup.value < sups[min_idx].value {
            min_idx = i;
        }
    }
    let (_, se) = engine.objective_se_at(&sups[min_idx].argsup, cs[min_idx]);
    let eta = 2.0 * se;
    let surface = select_midpoint(&cs, sups, eta, f64::NAN, spec.cfg.mc_size);
    Ok(MinimaxBound {
        c_star: surface.c_hat,
        value: surface.b_min,
        s,
        degenerate: false,
        surface,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    fn quick_cfg() -> BoundConfig {
        BoundConfig {
            mc_size: 20_000,
            c_grid: 161,
            r_search: RSearch {
                grid_pts: 5,
                starts: 1,
                max_iters: 15,
                tol: 1e-4,
            },
            seed: 31,
            ..BoundConfig::default()
        }
    }

    #[test]
    fn affine_bound_matches_quadratic_form() {
        // For g = s'x the increments are s'Z regardless of r, so the
        // squared-loss surface is s'Sigma s + c^2.
        let spec = BoundSpec {
            g: GMap::affine_coords(2, vec![0.3, 0.7]).unwrap(),
            f: KinkMap::Identity,
            beta0: vec![0.2, -0.4],
            sigma: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        let s_sigma_s = 0.3 * (0.3 * 1.0 + 0.7 * 0.2) + 0.7 * (0.3 * 0.2 + 0.7 * 2.0);
        for c in [0.0, 1.0] {
            let v = b_pop(c, 1.0, &spec).unwrap();
            let expect = s_sigma_s + c * c;
            assert!((v - expect).abs() < 0.08, "c={c}: {v} vs {expect}");
        }
    }

    #[test]
    fn zero_scale_is_zero() {
        let spec = BoundSpec {
            g: GMap::max_coords(2).unwrap(),
            f: KinkMap::Identity,
            beta0: vec![0.0, 0.0],
            sigma: eye(2),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        assert_eq!(b_pop(0.0, 0.0, &spec).unwrap(), 0.0);
    }

    #[test]
    fn affine_minimax_bound_is_efficient_variance() {
        let spec = BoundSpec {
            g: GMap::affine_coords(2, vec![0.5, 0.5]).unwrap(),
            f: KinkMap::Identity,
            beta0: vec![1.0, 3.0],
            sigma: eye(2),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        let mb = minimax_bound(&spec).unwrap();
        assert!(!mb.degenerate);
        assert_eq!(mb.s, 1.0);
        assert!(mb.c_star.abs() < 0.15, "c_star = {}", mb.c_star);
        assert!((mb.value - 0.5).abs() < 0.05, "value = {}", mb.value);
    }

    #[test]
    fn anderson_floor_for_affine_maps() {
        // With common random numbers the surface cannot dip below its value
        // at c = 0 by more than MC noise.
        let spec = BoundSpec {
            g: GMap::affine_coords(2, vec![0.5, 0.5]).unwrap(),
            f: KinkMap::Identity,
            beta0: vec![0.0, 0.0],
            sigma: eye(2),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        let mb = minimax_bound(&spec).unwrap();
        let at_zero = mb
            .surface
            .surface
            .iter()
            .min_by(|a, b| a.c.abs().total_cmp(&b.c.abs()))
            .unwrap()
            .b_hat;
        let tol = 4.0 * (0.5f64 / spec.cfg.mc_size as f64).sqrt() + 1e-9;
        for p in &mb.surface.surface {
            assert!(
                p.b_hat >= at_zero - tol,
                "c={}: {} < {}",
                p.c,
                p.b_hat,
                at_zero
            );
        }
    }

    #[test]
    fn minimax_bound_scales_as_s_squared() {
        // Same seed, same draws: the squared-loss surface at slope scale s
        // is exactly s^2 times the scale-1 surface, so the minimizing c and
        // the eta-set are identical and the value scales by s^2.
        let base = BoundSpec {
            g: GMap::max_coords(2).unwrap(),
            f: KinkMap::Identity,
            beta0: vec![0.0, 0.0],
            sigma: eye(2),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        let mb1 = minimax_bound(&base).unwrap();
        let mut scaled = base.clone();
        scaled.f = KinkMap::pwl(2.0, 2.0, 0.0, 0.0).unwrap();
        let mb2 = minimax_bound(&scaled).unwrap();
        assert_eq!(mb2.s, 2.0);
        let rel = (mb2.value - 4.0 * mb1.value).abs() / (4.0 * mb1.value);
        assert!(rel < 1e-10, "value ratio off: {rel}");
        assert_eq!(mb2.c_star.to_bits(), mb1.c_star.to_bits());
    }

    #[test]
    fn degenerate_zero_slope_flagged() {
        // relu strictly left of the kink: slope scale 0, value 0.
        let spec = BoundSpec {
            g: GMap::coord(1, 0).unwrap(),
            f: KinkMap::relu(0.0),
            beta0: vec![-2.0],
            sigma: DMatrix::from_row_slice(1, 1, &[1.0]),
            loss: Loss::squared(),
            cfg: quick_cfg(),
        };
        let mb = minimax_bound(&spec).unwrap();
        assert!(mb.degenerate);
        assert_eq!(mb.value, 0.0);
        assert_eq!(mb.c_star, 0.0);
    }

    #[test]
    fn sign_patterns_cover_all_corners() {
        let pats = sign_patterns(2, 3.0);
        assert_eq!(pats.len(), 4);
        assert!(pats.contains(&vec![-3.0, -3.0]));
        assert!(pats.contains(&vec![3.0, -3.0]));
        assert!(pats.contains(&vec![-3.0, 3.0]));
        assert!(pats.contains(&vec![3.0, 3.0]));
    }
}
