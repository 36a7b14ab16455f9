//! Box-clipped Nelder-Mead polytope search (maximization).
//!
//! Derivative-free by design: the empirical surfaces it climbs are
//! piecewise smooth in r. Every candidate is clamped to the box before
//! evaluation, comparisons use a total order with index tie-breaking, and
//! there is no randomness, so runs are bit-reproducible.

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadCfg {
    pub max_iters: usize,
    /// Stop when the simplex value spread falls below tol * (1 + |best|).
    pub tol: f64,
}

impl Default for NelderMeadCfg {
    fn default() -> Self {
        NelderMeadCfg {
            max_iters: 60,
            tol: 1e-9,
        }
    }
}

pub struct NmResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub iters: usize,
}

const ALPHA: f64 = 1.0; // reflection
const GAMMA: f64 = 2.0; // expansion
const RHO: f64 = 0.5; // contraction
const SIGMA: f64 = 0.5; // shrink

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for j in 0..x.len() {
        x[j] = x[j].clamp(lo[j], hi[j]);
    }
}

/// Maximize `f` over the box [lo, hi], starting near `start`.
pub fn maximize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    lo: &[f64],
    hi: &[f64],
    cfg: NelderMeadCfg,
) -> NmResult {
    let d = start.len();
    assert!(d >= 1 && lo.len() == d && hi.len() == d);
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    // Initial simplex: the start plus an axis step of 10% of the box width,
    // flipped inward when it would leave the box.
    let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
    let mut x0 = start.to_vec();
    clamp(&mut x0, lo, hi);
    let v0 = eval(&x0, &mut evals);
    pts.push((x0.clone(), v0));
    for j in 0..d {
        let mut xj = x0.clone();
        let step = 0.1 * (hi[j] - lo[j]).max(1e-6);
        xj[j] = if xj[j] + step <= hi[j] {
            xj[j] + step
        } else {
            xj[j] - step
        };
        clamp(&mut xj, lo, hi);
        let vj = eval(&xj, &mut evals);
        pts.push((xj, vj));
    }

    let order = |pts: &mut Vec<(Vec<f64>, f64)>| {
        // Descending by value; stable, so earlier points win ties.
        pts.sort_by(|a, b| b.1.total_cmp(&a.1));
    };
    order(&mut pts);

    let box_width = (0..d).map(|j| hi[j] - lo[j]).fold(0.0, f64::max);
    let xtol = cfg.tol * (1.0 + box_width);
    let mut iters = 0usize;
    while iters < cfg.max_iters {
        iters += 1;
        let best = pts[0].1;
        let worst = pts[d].1;
        // Value spread alone stalls on symmetric ties around a kink; also
        // require the simplex itself to have collapsed.
        let diam = pts
            .iter()
            .flat_map(|p| p.0.iter().zip(&pts[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (best - worst).abs() <= cfg.tol * (1.0 + best.abs()) && diam <= xtol {
            break;
        }

        // Centroid of all but the worst point.
        let mut centroid = vec![0.0; d];
        for p in pts.iter().take(d) {
            for j in 0..d {
                centroid[j] += p.0[j];
            }
        }
        for c in centroid.iter_mut() {
            *c /= d as f64;
        }

        let blend = |t: f64| -> Vec<f64> {
            let mut x: Vec<f64> = (0..d)
                .map(|j| centroid[j] + t * (centroid[j] - pts[d].0[j]))
                .collect();
            clamp(&mut x, lo, hi);
            x
        };

        let xr = blend(ALPHA);
        let vr = eval(&xr, &mut evals);
        if vr > pts[0].1 {
            let xe = blend(GAMMA);
            let ve = eval(&xe, &mut evals);
            pts[d] = if ve > vr { (xe, ve) } else { (xr, vr) };
        } else if vr > pts[d - 1].1 {
            pts[d] = (xr, vr);
        } else {
            let xc = blend(-RHO);
            let vc = eval(&xc, &mut evals);
            if vc > pts[d].1 {
                pts[d] = (xc, vc);
            } else {
                // Shrink toward the best point.
                let best_x = pts[0].0.clone();
                for p in pts.iter_mut().skip(1) {
                    for j in 0..d {
                        p.0[j] = best_x[j] + SIGMA * (p.0[j] - best_x[j]);
                    }
                    clamp(&mut p.0, lo, hi);
                    p.1 = eval(&p.0, &mut evals);
                }
            }
        }
        order(&mut pts);
    }

    let (x, value) = pts.swap_remove(0);
    NmResult {
        x,
        value,
        evals,
        iters,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_interior_quadratic_peak() {
        let f = |x: &[f64]| -((x[0] - 0.7).powi(2) + (x[1] + 0.3).powi(2));
        let r = maximize(
            f,
            &[-3.0, 3.0],
            &[-4.0, -4.0],
            &[4.0, 4.0],
            NelderMeadCfg {
                max_iters: 200,
                tol: 1e-12,
            },
        );
        assert!((r.x[0] - 0.7).abs() < 1e-4, "{:?}", r.x);
        assert!((r.x[1] + 0.3).abs() < 1e-4, "{:?}", r.x);
    }

    #[test]
    fn respects_box_when_peak_is_outside() {
        let f = |x: &[f64]| x[0] + 2.0 * x[1];
        let r = maximize(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], NelderMeadCfg::default());
        assert!(r.x[0] <= 1.0 + 1e-12 && r.x[1] <= 1.0 + 1e-12);
        assert!(r.value <= 3.0 + 1e-12);
        assert!(r.value > 2.5);
    }

    #[test]
    fn one_dimensional_box() {
        let f = |x: &[f64]| -(x[0] - 2.0).abs();
        let r = maximize(f, &[-5.0], &[-8.0], &[8.0], NelderMeadCfg {
            max_iters: 300,
            tol: 1e-12,
        });
        assert!((r.x[0] - 2.0).abs() < 1e-3);
    }

    #[test]
    fn deterministic_across_runs() {
        let f = |x: &[f64]| (x[0] * 0.9).sin() + (x[1] * 1.3).cos();
        let a = maximize(f, &[0.1, 0.2], &[-2.0, -2.0], &[2.0, 2.0], NelderMeadCfg::default());
        let b = maximize(f, &[0.1, 0.2], &[-2.0, -2.0], &[2.0, 2.0], NelderMeadCfg::default());
        assert_eq!(a.x, b.x);
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }
}
