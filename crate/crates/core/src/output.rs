//! CSV emission and observation input.
//!
//! All outputs are UTF-8 with '.' decimal separators and LF line endings.
//! Floats are written with the shortest round-trip representation, so a
//! byte-for-byte comparison of two runs is a comparison of exact values.
//! Every file starts with a `# config_hash=<sha256>` comment line tying it
//! to the configuration that produced it.

use std::path::Path;

use crate::bias::{BiasConfig, RiskSurfaceResult};
use crate::bound::{BoundConfig, MinimaxBound};
use crate::error::{Error, Result};
use crate::estim::{EstimateReport, Sample};
use crate::harness::RiskCurve;

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

/// Sampled surface plus a trailing summary table.
pub fn surface_csv(r: &RiskSurfaceResult, cfg: &BiasConfig, hash: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str("c,b_hat,in_E_hat\n");
    for p in &r.surface {
        out.push_str(&format!(
            "{},{},{}\n",
            fmt(p.c),
            fmt(p.b_hat),
            u8::from(p.in_e_hat)
        ));
    }
    out.push('\n');
    out.push_str("c_hat,eta,L,M1,seed,e_hat_lo,e_hat_hi,b_min,eps_n\n");
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}\n",
        fmt(r.c_hat),
        fmt(r.eta),
        cfg.draws,
        fmt(cfg.m1),
        cfg.seed,
        fmt(r.e_hat_lo),
        fmt(r.e_hat_hi),
        fmt(r.b_min),
        fmt(r.eps_n),
    ));
    out
}

/// Population bound curve plus a trailing summary table.
pub fn bound_csv(mb: &MinimaxBound, cfg: &BoundConfig, hash: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str("c,b\n");
    for p in &mb.surface.surface {
        out.push_str(&format!("{},{}\n", fmt(p.c), fmt(p.b_hat)));
    }
    out.push('\n');
    out.push_str("c_star,value,s,mc_size,seed,degenerate\n");
    out.push_str(&format!(
        "{},{},{},{},{},{}\n",
        fmt(mb.c_star),
        fmt(mb.value),
        fmt(mb.s),
        cfg.mc_size,
        cfg.seed,
        u8::from(mb.degenerate),
    ));
    out
}

/// Flat key,value report for one estimate.
pub fn estimate_csv(rep: &EstimateReport, hash: &str) -> String {
    let mut out = String::new();
    out.push_str("key,value\n");
    out.push_str(&format!("config_hash,{hash}\n"));
    out.push_str(&format!("theta_hat,{}\n", fmt(rep.theta_hat)));
    for (i, b) in rep.beta_hat.iter().enumerate() {
        out.push_str(&format!("beta_hat_{},{}\n", i + 1, fmt(*b)));
    }
    for i in 0..rep.sigma_hat.nrows() {
        for j in 0..rep.sigma_hat.ncols() {
            out.push_str(&format!(
                "sigma_hat_{}{},{}\n",
                i + 1,
                j + 1,
                fmt(rep.sigma_hat[(i, j)])
            ));
        }
    }
    out.push_str(&format!("c_hat,{}\n", fmt(rep.c_hat)));
    out.push_str(&format!("s_hat,{}\n", fmt(rep.s_hat)));
    out.push_str(&format!("plug_in,{}\n", fmt(rep.plug_in)));
    out.push_str(&format!("eps_n,{}\n", fmt(rep.eps_n)));
    out.push_str(&format!("eta,{}\n", fmt(rep.eta)));
    out.push_str(&format!("draws,{}\n", rep.draws));
    out.push_str(&format!("seed,{}\n", rep.seed));
    out.push_str(&format!("n,{}\n", rep.n));
    out.push_str(&format!(
        "degenerate_scale,{}\n",
        u8::from(rep.degenerate_scale)
    ));
    out
}

/// Long-format risk curve, one row per (delta0, estimator).
pub fn risk_csv(curve: &RiskCurve, hash: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str(
        "delta0,estimator,scaled_mse,scaled_mse_se,scaled_bias,scaled_bias_se,reps_used,failures\n",
    );
    for r in &curve.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt(r.delta0),
            r.estimator.as_str(),
            fmt(r.scaled_mse),
            fmt(r.scaled_mse_se),
            fmt(r.scaled_bias),
            fmt(r.scaled_bias_se),
            r.reps_used,
            r.failures,
        ));
    }
    out
}

/// Tidy (delta0, estimator, metric, value) rows for plotting tools.
pub fn plot_data_csv(curve: &RiskCurve, hash: &str) -> String {
    let mut out = String::new();
    out.push_str(&format!("# config_hash={hash}\n"));
    out.push_str("delta0,estimator,metric,value\n");
    for r in &curve.rows {
        for (metric, value) in [
            ("scaled_mse", r.scaled_mse),
            ("scaled_mse_se", r.scaled_mse_se),
            ("scaled_bias", r.scaled_bias),
            ("scaled_bias_se", r.scaled_bias_se),
        ] {
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt(r.delta0),
                r.estimator.as_str(),
                metric,
                fmt(value)
            ));
        }
    }
    out
}

/// Read observations from a CSV with a header row and d numeric columns.
pub fn read_observations(path: &Path) -> Result<Sample> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let Some((_, header)) = lines.next() else {
        return Err(Error::Input(format!("{}: empty file", path.display())));
    };
    let d = header.split(',').count();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|_| {
                    Error::Input(format!(
                        "{}: line {}: bad number '{}'",
                        path.display(),
                        idx + 1,
                        t.trim()
                    ))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(Error::Input(format!(
                "{}: line {}: {} columns, header has {}",
                path.display(),
                idx + 1,
                row.len(),
                d
            )));
        }
        rows.push(row);
    }
    Sample::from_rows(&rows)
}
