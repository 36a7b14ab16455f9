//! Simulated risk surface and the bias-adjustment constant.
//!
//! For a map g, loss truncation M1 and draws xi_i ~ N(0, I_d), the surface
//! at bias constant c and scale a is
//!
//!   b_hat(c; a) = sup over r in [-M1, M1]^d of
//!                 (1/L) sum_i tau_M1( a * | gn(S xi_i + r) - gn(r) + c | )
//!
//! with S the symmetric square root of the covariance estimate and gn the
//! data-driven derivative approximation. The adjustment constant is the
//! midpoint of the near-minimizer set of the surface over the c grid.
//!
//! All draws are shared across every (c, r) evaluation (common random
//! numbers); grid evaluations and refinements are pure per point and merged
//! with deterministic tie-breaking, so parallel and serial runs agree bit
//! for bit.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmap::GMap;
use crate::linalg::sym_sqrt_pd;
use crate::loss::{Loss, LossFamily};
use crate::optim::{self, NelderMeadCfg};
use crate::rng::standard_normal_matrix;

/// Rule for the localization sequence eps_n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsRule {
    /// eps_n = n^(-exponent).
    PowerLaw { exponent: f64 },
    Fixed(f64),
}

impl Default for EpsRule {
    fn default() -> Self {
        EpsRule::PowerLaw { exponent: 1.0 / 3.0 }
    }
}

impl EpsRule {
    pub fn resolve(&self, n: usize) -> Result<f64> {
        match *self {
            EpsRule::PowerLaw { exponent } => {
                if n == 0 {
                    return Err(Error::Input("sample size must be >= 1".into()));
                }
                if !(exponent > 0.0) {
                    return Err(Error::Input(format!(
                        "eps rule exponent must be > 0, got {exponent}"
                    )));
                }
                Ok((n as f64).powf(-exponent))
            }
            EpsRule::Fixed(v) => {
                if !(v > 0.0) {
                    return Err(Error::Input(format!("eps_n must be > 0, got {v}")));
                }
                Ok(v)
            }
        }
    }
}

/// Rule for the near-minimizer slack eta_{n,L}.
///
/// The default n^(-1/12) + L^(-1/4) vanishes while eta * eps_n * sqrt(n)
/// and eta * sqrt(L) diverge (with the default eps rule), which is what the
/// midpoint selection needs.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum EtaRule {
    #[default]
    Default,
    Fixed(f64),
}

impl EtaRule {
    pub fn resolve(&self, n: usize, draws: usize) -> f64 {
        match *self {
            EtaRule::Default => (n as f64).powf(-1.0 / 12.0) + (draws as f64).powf(-0.25),
            EtaRule::Fixed(v) => v,
        }
    }
}

/// Settings for the inner sup over r: coarse grid resolution per axis plus
/// a derivative-free polytope refinement from the best grid points.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RSearch {
    pub grid_pts: usize,
    pub starts: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for RSearch {
    fn default() -> Self {
        RSearch {
            grid_pts: 9,
            starts: 5,
            max_iters: 60,
            tol: 1e-9,
        }
    }
}

/// All simulation and optimization knobs for the surface.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasConfig {
    /// Number of xi draws (L).
    pub draws: usize,
    /// Truncation level and box radius M1.
    pub m1: f64,
    pub eps: EpsRule,
    pub eta: EtaRule,
    /// Points of the c grid on [-M1, M1].
    pub c_grid: usize,
    pub r_search: RSearch,
    /// Pair draws antithetically (rows 2k+1 are the negations of rows 2k).
    pub antithetic: bool,
    pub seed: u64,
}

impl Default for BiasConfig {
    fn default() -> Self {
        BiasConfig {
            draws: 10_000,
            m1: 8.0,
            eps: EpsRule::default(),
            eta: EtaRule::default(),
            c_grid: 401,
            r_search: RSearch::default(),
            antithetic: false,
            seed: 0,
        }
    }
}

impl BiasConfig {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.draws < 1 {
            problems.push("draws (L) must be >= 1".to_string());
        }
        if !(self.m1 > 0.0) {
            problems.push(format!("m1 must be > 0, got {}", self.m1));
        }
        if self.c_grid < 2 {
            problems.push(format!("c_grid must be >= 2, got {}", self.c_grid));
        }
        if self.r_search.grid_pts < 2 {
            problems.push(format!(
                "r grid_pts must be >= 2, got {}",
                self.r_search.grid_pts
            ));
        }
        if !(self.r_search.tol > 0.0) {
            problems.push(format!("r tol must be > 0, got {}", self.r_search.tol));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SurfaceDiagnostics {
    pub draws: usize,
    pub objective_evals: u64,
    pub refine_iters: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub c: f64,
    pub b_hat: f64,
    pub in_e_hat: bool,
}

/// Output of [`c_hat`]: the adjustment constant, the near-minimizer set
/// endpoints, the sampled surface and the worst-case r at the minimizing c.
#[derive(Clone, Debug)]
pub struct RiskSurfaceResult {
    pub c_hat: f64,
    pub e_hat_lo: f64,
    pub e_hat_hi: f64,
    pub b_min: f64,
    pub surface: Vec<SurfacePoint>,
    pub argsup_r: Vec<f64>,
    pub eta: f64,
    pub eps_n: f64,
    pub diagnostics: SurfaceDiagnostics,
}

/// L x d matrix of i.i.d. standard normals; a pure function of (l, d, seed).
pub fn draw_xi(l: usize, d: usize, seed: u64) -> DMatrix<f64> {
    standard_normal_matrix(l, d, seed)
}

/// Evenly spaced grid including both endpoints.
pub(crate) fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2);
    let step = (b - a) / (k - 1) as f64;
    let mut v: Vec<f64> = (0..k).map(|j| a + j as f64 * step).collect();
    v[k - 1] = b;
    v
}

// ---------------------------------------------------------------------------
// Surface engine, shared by the empirical path here and the population
// path in the bound module.
// ---------------------------------------------------------------------------

/// Memory cap for the coarse cache of increment vectors; beyond it the grid
/// evaluation streams per c instead (identical results, recomputed D).
const CACHE_BYTES_CAP: usize = 1 << 30;

pub(crate) struct SupOutcome {
    pub value: f64,
    pub argsup: Vec<f64>,
    pub evals: u64,
    pub iters: u64,
}

pub(crate) struct SurfaceEngine {
    map: GMap,
    /// Additive offset applied to every evaluation point (the gn offset for
    /// the empirical path; zero for the population path).
    offset: Vec<f64>,
    /// Draw rows, already multiplied by the covariance square root and
    /// shifted by `offset`, stored row-major.
    w: Vec<f64>,
    l: usize,
    d: usize,
    a: f64,
    family: LossFamily,
    trunc: f64,
    lo: Vec<f64>,
    hi: Vec<f64>,
    rs: RSearch,
    /// Extra r points always included among the coarse candidates (the
    /// population bound's extreme-pattern probes).
    probes: Vec<Vec<f64>>,
    antithetic: bool,
}

impl SurfaceEngine {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        map: GMap,
        offset: Vec<f64>,
        w_rows: DMatrix<f64>,
        a: f64,
        family: LossFamily,
        trunc: f64,
        box_radius: f64,
        rs: RSearch,
        probes: Vec<Vec<f64>>,
        antithetic: bool,
    ) -> Result<Self> {
        let d = map.dim();
        if a < 0.0 || !a.is_finite() {
            return Err(Error::Input(format!("scale a must be >= 0, got {a}")));
        }
        if w_rows.ncols() != d {
            return Err(Error::Input(format!(
                "draw matrix has {} columns, expected {}",
                w_rows.ncols(),
                d
            )));
        }
        let l = w_rows.nrows();
        let mut w = Vec::with_capacity(l * d);
        for i in 0..l {
            for j in 0..d {
                w.push(w_rows[(i, j)] + offset[j]);
            }
        }
        Ok(SurfaceEngine {
            map,
            offset,
            w,
            l,
            d,
            a,
            family,
            trunc,
            lo: vec![-box_radius; d],
            hi: vec![box_radius; d],
            rs,
            probes,
            antithetic,
        })
    }

    /// Build the empirical-path engine for `b_hat`/`c_hat`.
    pub(crate) fn empirical(
        g: &GMap,
        loss: &Loss,
        beta_hat: &[f64],
        sigma_hat: &DMatrix<f64>,
        eps_n: f64,
        a: f64,
        cfg: &BiasConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let d = g.dim();
        if sigma_hat.nrows() != d || sigma_hat.ncols() != d {
            return Err(Error::Input(format!(
                "sigma_hat is {}x{}, expected {d}x{d}",
                sigma_hat.nrows(),
                sigma_hat.ncols()
            )));
        }
        let offset = g.gn_hat_offset(beta_hat, eps_n)?;
        let half = sym_sqrt_pd(sigma_hat)?;
        let w_rows = draw_w_rows(cfg.draws, d, cfg.seed, &half, cfg.antithetic);
        SurfaceEngine::new(
            g.clone(),
            offset,
            w_rows,
            a,
            loss.family,
            cfg.m1,
            cfg.m1,
            cfg.r_search,
            Vec::new(),
            cfg.antithetic,
        )
    }

    #[inline]
    fn tau_trunc(&self, x: f64) -> f64 {
        self.family.tau(x).min(self.trunc)
    }

    /// D_i(r) = map(w_i + r) - map(r + offset) for all i.
    fn d_values(&self, r: &[f64], point: &mut [f64], out: &mut [f64]) {
        for j in 0..self.d {
            point[j] = r[j] + self.offset[j];
        }
        let base = self.map.eval_unchecked(point);
        for i in 0..self.l {
            let row = &self.w[i * self.d..(i + 1) * self.d];
            for j in 0..self.d {
                point[j] = row[j] + r[j];
            }
            out[i] = self.map.eval_unchecked(point) - base;
        }
    }

    fn objective_from_d(&self, dvals: &[f64], c: f64) -> f64 {
        let mut acc = 0.0;
        for &dv in dvals {
            acc += self.tau_trunc(self.a * (dv + c).abs());
        }
        acc / self.l as f64
    }

    fn coarse_points(&self) -> Result<Vec<Vec<f64>>> {
        let k = self.rs.grid_pts;
        let total = (k as u64).checked_pow(self.d as u32).unwrap_or(u64::MAX);
        if total > 2_000_000 {
            return Err(Error::Input(format!(
                "coarse r grid has {k}^{} points; lower grid_pts for this dimension",
                self.d
            )));
        }
        let axis = linspace(self.lo[0], self.hi[0], k);
        let mut pts = Vec::with_capacity(total as usize + self.probes.len());
        let mut idx = vec![0usize; self.d];
        loop {
            pts.push(idx.iter().map(|&i| axis[i]).collect::<Vec<f64>>());
            let mut j = 0;
            loop {
                idx[j] += 1;
                if idx[j] < k {
                    break;
                }
                idx[j] = 0;
                j += 1;
                if j == self.d {
                    pts.extend(self.probes.iter().cloned());
                    return Ok(pts);
                }
            }
        }
    }

    /// Sup over r for a single c, streaming the coarse scan (no cache).
    pub(crate) fn sup_single_c(&self, c: f64) -> Result<SupOutcome> {
        let points = self.coarse_points()?;
        let mut point = vec![0.0; self.d];
        let mut dbuf = vec![0.0; self.l];
        let mut vals = Vec::with_capacity(points.len());
        for r in &points {
            self.d_values(r, &mut point, &mut dbuf);
            vals.push(self.objective_from_d(&dbuf, c));
        }
        Ok(self.refine(c, &points, &vals))
    }

    /// Sup over r for every c on the grid, sharing one coarse cache of
    /// increment vectors across all c (falls back to streaming when the
    /// cache would be too large; results are identical either way).
    pub(crate) fn sup_grid(&self, cs: &[f64]) -> Result<Vec<SupOutcome>> {
        let points = self.coarse_points()?;
        let bytes = points.len() * self.l * std::mem::size_of::<f64>();
        if bytes > CACHE_BYTES_CAP {
            return cs
                .par_iter()
                .map(|&c| self.sup_single_c(c))
                .collect::<Result<Vec<_>>>();
        }
        let cache: Vec<Vec<f64>> = points
            .par_iter()
            .map(|r| {
                let mut point = vec![0.0; self.d];
                let mut out = vec![0.0; self.l];
                self.d_values(r, &mut point, &mut out);
                out
            })
            .collect();
        Ok(cs
            .par_iter()
            .map(|&c| {
                let vals: Vec<f64> = cache.iter().map(|d| self.objective_from_d(d, c)).collect();
                self.refine(c, &points, &vals)
            })
            .collect())
    }

    /// Multistart refinement from the best coarse points. The returned sup
    /// dominates every coarse value by construction.
    fn refine(&self, c: f64, points: &[Vec<f64>], vals: &[f64]) -> SupOutcome {
        let mut evals = vals.len() as u64;
        let mut best_idx = 0usize;
        for (i, v) in vals.iter().enumerate() {
            if *v > vals[best_idx] {
                best_idx = i;
            }
        }
        let mut best_val = vals[best_idx];
        let mut best_r = points[best_idx].clone();

        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&i, &j| vals[j].total_cmp(&vals[i]).then(i.cmp(&j)));

        let mut iters = 0u64;
        let nm_cfg = NelderMeadCfg {
            max_iters: self.rs.max_iters,
            tol: self.rs.tol,
        };
        let mut point = vec![0.0; self.d];
        let mut dbuf = vec![0.0; self.l];
        for &s in order.iter().take(self.rs.starts) {
            let nm = optim::maximize(
                |r| {
                    self.d_values(r, &mut point, &mut dbuf);
                    self.objective_from_d(&dbuf, c)
                },
                &points[s],
                &self.lo,
                &self.hi,
                nm_cfg,
            );
            evals += nm.evals as u64;
            iters += nm.iters as u64;
            if nm.value > best_val {
                best_val = nm.value;
                best_r = nm.x;
            }
        }
        SupOutcome {
            value: best_val,
            argsup: best_r,
            evals,
            iters,
        }
    }

    /// Value and Monte Carlo standard error of the objective at (r, c).
    /// Antithetic draws are paired before the standard error is formed.
    pub(crate) fn objective_se_at(&self, r: &[f64], c: f64) -> (f64, f64) {
        let mut point = vec![0.0; self.d];
        let mut dbuf = vec![0.0; self.l];
        self.d_values(r, &mut point, &mut dbuf);
        let items: Vec<f64> = if self.antithetic {
            dbuf.chunks(2)
                .map(|ch| {
                    ch.iter()
                        .map(|&dv| self.tau_trunc(self.a * (dv + c).abs()))
                        .sum::<f64>()
                        / ch.len() as f64
                })
                .collect()
        } else {
            dbuf.iter()
                .map(|&dv| self.tau_trunc(self.a * (dv + c).abs()))
                .collect()
        };
        let m = items.len() as f64;
        let mean = items.iter().sum::<f64>() / m;
        if items.len() < 2 {
            return (mean, 0.0);
        }
        let var = items.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        (mean, (var / m).sqrt())
    }

    /// Engine with directly injected draw rows (no covariance rotation, no
    /// derivative offset); used by tests and certification checks that need
    /// shared or degenerate draws.
    pub(crate) fn with_draw_rows(
        g: &GMap,
        loss: &Loss,
        rows: DMatrix<f64>,
        a: f64,
        cfg: &BiasConfig,
    ) -> Result<Self> {
        SurfaceEngine::new(
            g.clone(),
            vec![0.0; g.dim()],
            rows,
            a,
            loss.family,
            cfg.m1,
            cfg.m1,
            cfg.r_search,
            Vec::new(),
            cfg.antithetic,
        )
    }
}

/// Draw rows S * xi_i, optionally antithetically paired.
pub(crate) fn draw_w_rows(
    l: usize,
    d: usize,
    seed: u64,
    sigma_half: &DMatrix<f64>,
    antithetic: bool,
) -> DMatrix<f64> {
    if antithetic {
        let half = l.div_ceil(2);
        let raw = draw_xi(half, d, seed) * sigma_half;
        DMatrix::from_fn(l, d, |i, j| {
            let v = raw[(i / 2, j)];
            if i % 2 == 0 {
                v
            } else {
                -v
            }
        })
    } else {
        draw_xi(l, d, seed) * sigma_half
    }
}

// ---------------------------------------------------------------------------
// Public operations
// ---------------------------------------------------------------------------

/// Single surface value b_hat(c; a). `eps_n` is the resolved localization
/// value (see [`EpsRule`]); `c` must lie in [-M1, M1].
#[allow(clippy::too_many_arguments)]
pub fn b_hat(
    c: f64,
    a: f64,
    g: &GMap,
    loss: &Loss,
    beta_hat: &[f64],
    sigma_hat: &DMatrix<f64>,
    eps_n: f64,
    cfg: &BiasConfig,
) -> Result<f64> {
    if c.abs() > cfg.m1 {
        return Err(Error::Input(format!(
            "c = {c} outside [-M1, M1] = [{}, {}]",
            -cfg.m1, cfg.m1
        )));
    }
    let engine = SurfaceEngine::empirical(g, loss, beta_hat, sigma_hat, eps_n, a, cfg)?;
    Ok(engine.sup_single_c(c)?.value)
}

/// Evaluate the surface over the c grid (all points share the same draws),
/// form the near-minimizer set within eta of the grid minimum, and return
/// the midpoint rule result.
pub fn c_hat(
    a: f64,
    g: &GMap,
    loss: &Loss,
    beta_hat: &[f64],
    sigma_hat: &DMatrix<f64>,
    n: usize,
    cfg: &BiasConfig,
) -> Result<RiskSurfaceResult> {
    let eps_n = cfg.eps.resolve(n)?;
    let eta = cfg.eta.resolve(n, cfg.draws);
    let engine = SurfaceEngine::empirical(g, loss, beta_hat, sigma_hat, eps_n, a, cfg)?;
    let cs = linspace(-cfg.m1, cfg.m1, cfg.c_grid);
    let sups = engine.sup_grid(&cs)?;
    Ok(select_midpoint(&cs, sups, eta, eps_n, cfg.draws))
}

pub(crate) fn select_midpoint(
    cs: &[f64],
    sups: Vec<SupOutcome>,
    eta: f64,
    eps_n: f64,
    draws: usize,
) -> RiskSurfaceResult {
    let mut min_idx = 0usize;
    for (i, s) in sups.iter().enumerate() {
        if s.value < sups[min_idx].value {
            min_idx = i;
        }
    }
    let b_min = sups[min_idx].value;
    let threshold = b_min + eta;
    let mut lo = None;
    let mut hi = None;
    let mut surface = Vec::with_capacity(cs.len());
    let mut diagnostics = SurfaceDiagnostics {
        draws,
        ..Default::default()
    };
    for (i, (c, s)) in cs.iter().zip(&sups).enumerate() {
        let in_set = s.value <= threshold;
        if in_set {
            if lo.is_none() {
                lo = Some(i);
            }
            hi = Some(i);
        }
        diagnostics.objective_evals += s.evals;
        diagnostics.refine_iters += s.iters;
        surface.push(SurfacePoint {
            c: *c,
            b_hat: s.value,
            in_e_hat: in_set,
        });
    }
    // The minimizer itself is always in the set.
    let lo = lo.expect("near-minimizer set is nonempty");
    let hi = hi.expect("near-minimizer set is nonempty");
    RiskSurfaceResult {
        c_hat: 0.5 * (cs[lo] + cs[hi]),
        e_hat_lo: cs[lo],
        e_hat_hi: cs[hi],
        b_min,
        surface,
        argsup_r: sups[min_idx].argsup.clone(),
        eta,
        eps_n,
        diagnostics,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmap;

    fn eye(d: usize) -> DMatrix<f64> {
        DMatrix::identity(d, d)
    }

    fn quick_cfg() -> BiasConfig {
        BiasConfig {
            draws: 4000,
            c_grid: 81,
            r_search: RSearch {
                grid_pts: 5,
                starts: 1,
                max_iters: 20,
                tol: 1e-6,
            },
            seed: 99,
            ..BiasConfig::default()
        }
    }

    #[test]
    fn zero_scale_gives_zero_surface() {
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let v = b_hat(0.5, 0.0, &g, &loss, &[0.0, 0.0], &eye(2), 1e-3, &quick_cfg()).unwrap();
        assert_eq!(v, 0.0);
        // Every c is then a near-minimizer and the midpoint is 0.
        let r = c_hat(0.0, &g, &loss, &[0.0, 0.0], &eye(2), 300, &quick_cfg()).unwrap();
        assert_eq!(r.c_hat, 0.0);
        assert_eq!(r.e_hat_lo, -quick_cfg().m1);
        assert_eq!(r.e_hat_hi, quick_cfg().m1);
    }

    #[test]
    fn degenerate_single_zero_draw() {
        // With a single xi = 0 the increments vanish and the surface is
        // tau_M1(a|c|) for every r; the midpoint lands on zero.
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let cfg = quick_cfg();
        let engine =
            SurfaceEngine::with_draw_rows(&g, &loss, DMatrix::zeros(1, 2), 1.0, &cfg).unwrap();
        for c in [-2.0, 0.0, 1.5] {
            let sup = engine.sup_single_c(c).unwrap();
            assert!((sup.value - (c * c).min(cfg.m1)).abs() < 1e-12);
        }
        let cs = linspace(-cfg.m1, cfg.m1, cfg.c_grid);
        let sups = engine.sup_grid(&cs).unwrap();
        let r = select_midpoint(&cs, sups, 0.01, 1e-3, 1);
        assert!(r.c_hat.abs() < 1e-12);
    }

    #[test]
    fn affine_surface_is_flat_in_r_and_matches_closed_form() {
        // Translation equivariance makes the increments independent of r;
        // for squared loss the surface is a^2 (s' Sigma s + c^2) up to MC
        // error. Verified against the closed-form normal second moment.
        let g = GMap::affine_coords(2, vec![0.3, 0.7]).unwrap();
        let loss = Loss::squared();
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let mut cfg = quick_cfg();
        cfg.draws = 40_000;
        // Keep the truncation far above the draw range so the closed form
        // applies.
        cfg.m1 = 1000.0;
        let s_sigma_s = 0.3 * (0.3 * 1.0 + 0.7 * 0.2) + 0.7 * (0.3 * 0.2 + 0.7 * 2.0);
        for (c, a) in [(0.0, 1.0), (0.8, 1.0), (-0.5, 2.0)] {
            let v = b_hat(c, a, &g, &loss, &[0.4, -0.1], &sigma, 1e-3, &cfg).unwrap();
            let expect = a * a * (s_sigma_s + c * c);
            let tol = 4.0 * a * a * (s_sigma_s + c * c) / (cfg.draws as f64).sqrt() * 3.0;
            assert!(
                (v - expect).abs() < tol.max(1e-3),
                "c={c} a={a}: got {v}, expected {expect}"
            );
        }
    }

    #[test]
    fn affine_c_hat_near_zero() {
        let g = GMap::affine_coords(2, vec![0.5, 0.5]).unwrap();
        let loss = Loss::squared();
        let mut cfg = quick_cfg();
        cfg.draws = 20_000;
        cfg.c_grid = 161;
        let r = c_hat(1.0, &g, &loss, &[1.0, -2.0], &eye(2), 1_000_000, &cfg).unwrap();
        let grid_step = 2.0 * cfg.m1 / (cfg.c_grid - 1) as f64;
        let mc_se = (0.5f64 / cfg.draws as f64).sqrt();
        assert!(
            r.c_hat.abs() <= grid_step + 3.0 * mc_se,
            "c_hat = {}",
            r.c_hat
        );
        assert!(r.e_hat_lo <= r.c_hat && r.c_hat <= r.e_hat_hi);
        assert!(r.b_min >= 0.0);
    }

    #[test]
    fn antithetic_affine_surface_is_symmetric() {
        let g = GMap::affine_coords(2, vec![0.5, 0.5]).unwrap();
        let loss = Loss::squared();
        let mut cfg = quick_cfg();
        cfg.antithetic = true;
        cfg.draws = 2000;
        let eps = 1e-3;
        for c in [0.4, 1.0, 3.0] {
            let plus = b_hat(c, 1.0, &g, &loss, &[0.0, 0.0], &eye(2), eps, &cfg).unwrap();
            let minus = b_hat(-c, 1.0, &g, &loss, &[0.0, 0.0], &eye(2), eps, &cfg).unwrap();
            assert!((plus - minus).abs() <= 1e-9, "c={c}: {plus} vs {minus}");
        }
    }

    #[test]
    fn truncation_is_pointwise_monotone_with_shared_draws() {
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let cfg = quick_cfg();
        let rows = draw_w_rows(500, 2, 7, &eye(2), false);
        let mut tight_cfg = cfg.clone();
        tight_cfg.m1 = 2.0;
        let tight =
            SurfaceEngine::with_draw_rows(&g, &loss, rows.clone(), 1.0, &tight_cfg).unwrap();
        let mut wide_cfg = cfg.clone();
        wide_cfg.m1 = 6.0;
        let wide = SurfaceEngine::with_draw_rows(&g, &loss, rows, 1.0, &wide_cfg).unwrap();
        // Same draws, same r, increasing truncation level: exact pointwise order.
        let mut point = vec![0.0; 2];
        let mut dvals = vec![0.0; 500];
        for r in [[0.0, 0.0], [1.0, -1.5], [2.0, 2.0]] {
            tight.d_values(&r, &mut point, &mut dvals);
            for c in [-1.0, 0.0, 0.7] {
                let low = tight.objective_from_d(&dvals, c);
                let high = wide.objective_from_d(&dvals, c);
                assert!(low <= high + 0.0, "truncation order violated");
            }
        }
    }

    #[test]
    fn power_scaling_identity_small_scale() {
        // inf_c b(c; s) = s^2 inf_c b(c; 1) under shared draws; use a
        // truncation level high enough that it never binds.
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let mut cfg = quick_cfg();
        cfg.draws = 2000;
        cfg.m1 = 50.0;
        cfg.c_grid = 201;
        let base = c_hat(1.0, &g, &loss, &[0.0, 0.0], &eye(2), 300, &cfg).unwrap();
        for s in [0.5, 2.0] {
            let scaled = c_hat(s, &g, &loss, &[0.0, 0.0], &eye(2), 300, &cfg).unwrap();
            let rel = (scaled.b_min - s * s * base.b_min).abs() / (s * s * base.b_min);
            assert!(rel < 0.01, "s={s}: rel err {rel}");
        }
    }

    #[test]
    fn sup_dominates_every_coarse_point() {
        let g = gmap::parse_gmap("max(min(x1, x2), x3)", 3).unwrap();
        let loss = Loss::squared();
        let mut cfg = quick_cfg();
        cfg.draws = 300;
        let engine =
            SurfaceEngine::empirical(&g, &loss, &[0.2, 0.1, 0.0], &eye(3), 1e-2, 1.0, &cfg)
                .unwrap();
        let c = 0.3;
        let sup = engine.sup_single_c(c).unwrap();
        let points = engine.coarse_points().unwrap();
        let mut point = vec![0.0; 3];
        let mut dvals = vec![0.0; 300];
        for r in &points {
            engine.d_values(r, &mut point, &mut dvals);
            let v = engine.objective_from_d(&dvals, c);
            assert!(v <= sup.value + 1e-12);
        }
    }

    #[test]
    fn c_hat_is_bit_deterministic() {
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let cfg = quick_cfg();
        let a = c_hat(1.0, &g, &loss, &[0.1, 0.0], &eye(2), 300, &cfg).unwrap();
        let b = c_hat(1.0, &g, &loss, &[0.1, 0.0], &eye(2), 300, &cfg).unwrap();
        assert_eq!(a.c_hat.to_bits(), b.c_hat.to_bits());
        assert_eq!(a.b_min.to_bits(), b.b_min.to_bits());
        assert_eq!(a.surface.len(), b.surface.len());
        for (x, y) in a.surface.iter().zip(&b.surface) {
            assert_eq!(x.b_hat.to_bits(), y.b_hat.to_bits());
        }
        assert_eq!(a.argsup_r, b.argsup_r);
    }

    #[test]
    fn non_pd_sigma_rejected() {
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let sigma = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let err = b_hat(0.0, 1.0, &g, &loss, &[0.0, 0.0], &sigma, 1e-3, &quick_cfg());
        assert!(matches!(err, Err(Error::NotPositiveDefinite { .. })));
    }

    #[test]
    fn c_outside_box_rejected() {
        let g = GMap::max_coords(2).unwrap();
        let loss = Loss::squared();
        let err = b_hat(9.0, 1.0, &g, &loss, &[0.0, 0.0], &eye(2), 1e-3, &quick_cfg());
        assert!(err.is_err());
    }
}
