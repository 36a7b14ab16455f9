//! Continuous piecewise-linear transforms with a single kink, and the
//! regime-dependent slope scale they induce.

use crate::error::{Error, Result};
use crate::textspec::parse_call;

/// The transform f applied on top of the equivariant map.
///
/// `Identity` is a distinguished case rather than slopes (1, 1) with an
/// arbitrary kink: it carries slope scale 1 with no band semantics, so the
/// estimated scale never routes through a phantom kink.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KinkMap {
    Identity,
    Pwl {
        /// Slope for x >= xbar.
        a1: f64,
        /// Slope for x < xbar.
        a2: f64,
        xbar: f64,
        /// Value at the kink.
        fxbar: f64,
    },
}

impl KinkMap {
    pub fn pwl(a1: f64, a2: f64, xbar: f64, fxbar: f64) -> Result<Self> {
        if a1 == 0.0 && a2 == 0.0 {
            return Err(Error::Input(
                "piecewise-linear transform must be non-constant (a1 = a2 = 0)".into(),
            ));
        }
        if ![a1, a2, xbar, fxbar].iter().all(|v| v.is_finite()) {
            return Err(Error::Input("kink parameters must be finite".into()));
        }
        Ok(KinkMap::Pwl { a1, a2, xbar, fxbar })
    }

    /// f(x) = max(x - xbar, 0).
    pub fn relu(xbar: f64) -> Self {
        KinkMap::Pwl {
            a1: 1.0,
            a2: 0.0,
            xbar,
            fxbar: 0.0,
        }
    }

    /// f(x) = |x - xbar|.
    pub fn abs(xbar: f64) -> Self {
        KinkMap::Pwl {
            a1: 1.0,
            a2: -1.0,
            xbar,
            fxbar: 0.0,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            KinkMap::Identity => x,
            KinkMap::Pwl { a1, a2, xbar, fxbar } => {
                if x >= xbar {
                    a1 * (x - xbar) + fxbar
                } else {
                    a2 * (x - xbar) + fxbar
                }
            }
        }
    }

    /// Population slope scale s at the value g(beta0): |a1| strictly right
    /// of the kink, |a2| strictly left, max of the two at the kink itself
    /// (exact comparison; this is the population object).
    pub fn slope_scale(&self, g_beta0: f64) -> f64 {
        match *self {
            KinkMap::Identity => 1.0,
            KinkMap::Pwl { a1, a2, xbar, .. } => {
                if g_beta0 > xbar {
                    a1.abs()
                } else if g_beta0 < xbar {
                    a2.abs()
                } else {
                    a1.abs().max(a2.abs())
                }
            }
        }
    }

    /// Estimated slope scale with the eps_n band around the kink; boundary
    /// equality maps into the band regime.
    pub fn s_hat(&self, g_beta_hat: f64, eps_n: f64) -> Result<f64> {
        if eps_n <= 0.0 {
            return Err(Error::Input(format!("eps_n must be > 0, got {eps_n}")));
        }
        Ok(match *self {
            KinkMap::Identity => 1.0,
            KinkMap::Pwl { a1, a2, xbar, .. } => {
                if g_beta_hat > xbar + eps_n {
                    a1.abs()
                } else if g_beta_hat < xbar - eps_n {
                    a2.abs()
                } else {
                    a1.abs().max(a2.abs())
                }
            }
        })
    }

    /// Contraction constant max(|a1|, |a2|).
    pub fn max_slope(&self) -> f64 {
        match *self {
            KinkMap::Identity => 1.0,
            KinkMap::Pwl { a1, a2, .. } => a1.abs().max(a2.abs()),
        }
    }

    /// Parse `identity | relu(xbar=..) | abs(xbar=..) | pwl(a1=.., a2=.., xbar=.., fxbar=..)`.
    pub fn parse(text: &str) -> Result<Self> {
        let call = parse_call(text)?;
        match call.name.as_str() {
            "identity" | "id" => Ok(KinkMap::Identity),
            "relu" => Ok(KinkMap::relu(call.get("xbar").unwrap_or(0.0))),
            "abs" => Ok(KinkMap::abs(call.get("xbar").unwrap_or(0.0))),
            "pwl" => KinkMap::pwl(
                call.require("a1")?,
                call.require("a2")?,
                call.require("xbar")?,
                call.get("fxbar").unwrap_or(0.0),
            ),
            other => Err(Error::Input(format!(
                "unknown transform '{other}' (expected identity, relu, abs or pwl)"
            ))),
        }
    }
}

impl std::fmt::Display for KinkMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            KinkMap::Identity => write!(f, "identity"),
            KinkMap::Pwl { a1, a2, xbar, fxbar } => {
                write!(f, "pwl(a1={a1}, a2={a2}, xbar={xbar}, fxbar={fxbar})")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_branches() {
        let relu = KinkMap::relu(0.0);
        assert_eq!(relu.eval(-3.0), 0.0);
        assert_eq!(relu.eval(2.0), 2.0);
        let abs = KinkMap::abs(0.0);
        assert_eq!(abs.eval(-2.0), 2.0);
        assert_eq!(KinkMap::Identity.eval(7.5), 7.5);
    }

    #[test]
    fn slope_scale_regimes() {
        let relu = KinkMap::relu(0.0);
        assert_eq!(relu.slope_scale(2.0), 1.0);
        assert_eq!(relu.slope_scale(0.0), 1.0);
        assert_eq!(relu.slope_scale(-1.0), 0.0);
        let abs = KinkMap::abs(0.0);
        assert_eq!(abs.slope_scale(-5.0), 1.0);
        assert_eq!(abs.slope_scale(5.0), 1.0);
    }

    #[test]
    fn s_hat_band() {
        let relu = KinkMap::relu(0.0);
        assert_eq!(relu.s_hat(5.0, 0.1).unwrap(), 1.0);
        assert_eq!(relu.s_hat(-5.0, 0.1).unwrap(), 0.0);
        assert_eq!(relu.s_hat(0.05, 0.1).unwrap(), 1.0);
        // Boundary equality belongs to the band.
        assert_eq!(relu.s_hat(-0.1, 0.1).unwrap(), 1.0);
        assert!(relu.s_hat(1.0, 0.0).is_err());
    }

    #[test]
    fn constant_map_rejected() {
        assert!(KinkMap::pwl(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn parse_variants() {
        assert_eq!(KinkMap::parse("identity").unwrap(), KinkMap::Identity);
        assert_eq!(KinkMap::parse("relu(xbar=0)").unwrap(), KinkMap::relu(0.0));
        assert_eq!(KinkMap::parse("abs").unwrap(), KinkMap::abs(0.0));
        let p = KinkMap::parse("pwl(a1=2, a2=-1, xbar=0.5, fxbar=3)").unwrap();
        assert_eq!(p, KinkMap::pwl(2.0, -1.0, 0.5, 3.0).unwrap());
        assert!(KinkMap::parse("step(0)").is_err());
    }
}
