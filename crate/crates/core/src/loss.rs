//! Loss families tau(|d - theta|) and their truncations.
//!
//! Admissible families are increasing on [0, inf) with tau(0) = 0 and have
//! Lipschitz truncations min(tau, M). Power losses (k >= 1) cover the
//! squared and absolute losses used throughout; Huber is included as an
//! extension since it meets the same monotonicity and truncation-Lipschitz
//! contract. Indicator ("hypothesis-testing") losses are rejected at
//! construction: no truncation makes them Lipschitz.

use crate::error::{Error, Result};
use crate::textspec::parse_call;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossFamily {
    /// tau(x) = |x|^k with k >= 1.
    Power { k: f64 },
    /// tau(x) = x^2/2 for |x| <= delta, delta(|x| - delta/2) beyond.
    Huber { delta: f64 },
}

impl LossFamily {
    /// tau applied to |x|; +inf maps to the supremum by the continuous
    /// extension convention.
    #[inline]
    pub fn tau(&self, x: f64) -> f64 {
        let ax = x.abs();
        match *self {
            LossFamily::Power { k } => {
                if k == 2.0 {
                    ax * ax
                } else if k == 1.0 {
                    ax
                } else {
                    ax.powf(k)
                }
            }
            LossFamily::Huber { delta } => {
                if ax <= delta {
                    0.5 * ax * ax
                } else {
                    delta * (ax - 0.5 * delta)
                }
            }
        }
    }

    /// Lipschitz constant of min(tau, m): k·m^((k-1)/k) for the power
    /// family, delta for Huber (already globally Lipschitz).
    pub fn trunc_lipschitz(&self, m: f64) -> f64 {
        match *self {
            LossFamily::Power { k } => k * m.powf((k - 1.0) / k),
            LossFamily::Huber { delta } => delta,
        }
    }
}

/// A loss family together with its truncation level M (finite or +inf).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Loss {
    pub family: LossFamily,
    /// Truncation level M; `f64::INFINITY` leaves tau untruncated.
    pub trunc: f64,
}

impl Loss {
    pub fn new(family: LossFamily, trunc: f64) -> Result<Self> {
        match family {
            LossFamily::Power { k } => {
                if !(k >= 1.0) || !k.is_finite() {
                    return Err(Error::Input(format!(
                        "power loss needs exponent k >= 1, got {k}"
                    )));
                }
            }
            LossFamily::Huber { delta } => {
                if !(delta > 0.0) || !delta.is_finite() {
                    return Err(Error::Input(format!(
                        "huber loss needs delta > 0, got {delta}"
                    )));
                }
            }
        }
        if !(trunc > 0.0) {
            return Err(Error::Input(format!(
                "truncation level must be > 0, got {trunc}"
            )));
        }
        Ok(Loss { family, trunc })
    }

    pub fn squared() -> Self {
        Loss {
            family: LossFamily::Power { k: 2.0 },
            trunc: f64::INFINITY,
        }
    }

    /// Untruncated tau.
    #[inline]
    pub fn tau(&self, x: f64) -> f64 {
        self.family.tau(x)
    }

    /// min(tau, self.trunc).
    #[inline]
    pub fn tau_own_trunc(&self, x: f64) -> f64 {
        self.family.tau(x).min(self.trunc)
    }

    /// Parse `power(k=..) | abs | huber(delta=..)`.
    pub fn parse(text: &str, trunc: f64) -> Result<Self> {
        let call = parse_call(text)?;
        let family = match call.name.as_str() {
            "power" => LossFamily::Power {
                k: call.require("k")?,
            },
            "abs" | "absolute" => LossFamily::Power { k: 1.0 },
            "squared" => LossFamily::Power { k: 2.0 },
            "huber" => LossFamily::Huber {
                delta: call.require("delta")?,
            },
            "indicator" | "zero_one" | "hypothesis" => {
                return Err(Error::Input(
                    "hypothesis-testing (indicator) losses are excluded: no truncation \
                     makes them Lipschitz"
                        .into(),
                ))
            }
            other => Err(Error::Input(format!(
                "unknown loss '{other}' (expected power, abs, squared or huber)"
            )))?,
        };
        Loss::new(family, trunc)
    }
}

impl std::fmt::Display for Loss {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.family {
            LossFamily::Power { k } => write!(f, "power(k={k})"),
            LossFamily::Huber { delta } => write!(f, "huber(delta={delta})"),
        }
    }
}

/// min(tau(x), m) with m validated.
pub fn tau_trunc(family: LossFamily, m: f64, x: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::Input(format!(
            "truncation level must be > 0, got {m}"
        )));
    }
    Ok(family.tau(x).min(m))
}
