//! Objective functions over per-stream MSEs and their Schur classification.
//!
//! Every objective is expressed in minimization orientation and is
//! non-decreasing in each MSE.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Objective {
    MutualInfo,
    #[serde(rename = "ProdMSE")]
    ProdMse,
    #[serde(rename = "SumSINR")]
    SumSinr,
    #[serde(rename = "ProdSINR")]
    ProdSinr,
    #[serde(rename = "SumMSE")]
    SumMse,
    #[serde(rename = "MaxMSE")]
    MaxMse,
    #[serde(rename = "HarmonicSINR")]
    HarmonicSinr,
    #[serde(rename = "MinSINR")]
    MinSinr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdditiveClass {
    SchurConcave,
    SchurConvex,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MultiplicativeClass {
    SchurConcave,
    SchurConvex,
    Unclassified,
}

/// Which closed-form structure a design uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignBranch {
    /// Linear receiver, `S = I`.
    LinearDiagonal,
    /// Linear receiver, `S` equalizes the MSE diagonal.
    LinearRotation,
    /// Decision feedback receiver with geometric-mean equalization.
    Dfe,
}

impl Objective {
    pub const ALL: [Objective; 8] = [
        Objective::MutualInfo,
        Objective::ProdMse,
        Objective::SumSinr,
        Objective::ProdSinr,
        Objective::SumMse,
        Objective::MaxMse,
        Objective::HarmonicSinr,
        Objective::MinSinr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::MutualInfo => "MutualInfo",
            Objective::ProdMse => "ProdMSE",
            Objective::SumSinr => "SumSINR",
            Objective::ProdSinr => "ProdSINR",
            Objective::SumMse => "SumMSE",
            Objective::MaxMse => "MaxMSE",
            Objective::HarmonicSinr => "HarmonicSINR",
            Objective::MinSinr => "MinSINR",
        }
    }

    pub fn additive_class(self) -> AdditiveClass {
        match self {
            Objective::MutualInfo
            | Objective::ProdMse
            | Objective::SumSinr
            | Objective::ProdSinr => AdditiveClass::SchurConcave,
            Objective::MaxMse | Objective::HarmonicSinr | Objective::MinSinr => {
                AdditiveClass::SchurConvex
            }
            Objective::SumMse => AdditiveClass::Both,
        }
    }

    /// Multiplicative class. Additively Schur-convex objectives are
    /// multiplicatively Schur-convex. `MutualInfo` and `ProdMSE` are sums of
    /// log-MSEs, which are invariant under multiplicative rotation, and are
    /// listed as concave so that the non-linear path falls back to the linear
    /// design. The SINR sum and product are left unclassified.
    pub fn multiplicative_class(self) -> MultiplicativeClass {
        match self.additive_class() {
            AdditiveClass::SchurConvex | AdditiveClass::Both => MultiplicativeClass::SchurConvex,
            AdditiveClass::SchurConcave => match self {
                Objective::MutualInfo | Objective::ProdMse => MultiplicativeClass::SchurConcave,
                _ => MultiplicativeClass::Unclassified,
            },
        }
    }

    /// Objective value in minimization orientation. `HarmonicSINR` returns
    /// `+inf` when any MSE equals one.
    pub fn evaluate(self, mses: &[f64]) -> Result<f64> {
        if mses.is_empty() {
            return Err(invalid("no MSEs to evaluate"));
        }
        if let Some(m) = mses.iter().find(|&&m| !(m > 0.0 && m <= 1.0)) {
            return Err(invalid(format!("MSE {m} outside (0, 1]")));
        }
        let sinr = |m: f64| 1.0 / m - 1.0;
        Ok(match self {
            // -(mutual information) = sum log m
            Objective::MutualInfo => mses.iter().map(|m| m.ln()).sum(),
            Objective::ProdMse => mses.iter().product(),
            Objective::SumSinr => -mses.iter().map(|&m| sinr(m)).sum::<f64>(),
            Objective::ProdSinr => -mses.iter().map(|&m| sinr(m)).product::<f64>(),
            Objective::SumMse => mses.iter().sum(),
            Objective::MaxMse => mses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Objective::HarmonicSinr => {
                if mses.iter().any(|&m| m >= 1.0) {
                    f64::INFINITY
                } else {
                    mses.iter().map(|&m| m / (1.0 - m)).sum()
                }
            }
            Objective::MinSinr => -mses
                .iter()
                .map(|&m| (1.0 - m) / m)
                .fold(f64::INFINITY, f64::min),
        })
    }

    /// Design branch for this objective. `sum_mse_as_convex` moves `SumMSE`
    /// (which is both concave and convex) to the rotation branch.
    pub fn dispatch(self, nonlinear: bool, sum_mse_as_convex: bool) -> Result<DesignBranch> {
        if nonlinear {
            return match self.multiplicative_class() {
                MultiplicativeClass::SchurConvex => Ok(DesignBranch::Dfe),
                MultiplicativeClass::SchurConcave => Ok(DesignBranch::LinearDiagonal),
                MultiplicativeClass::Unclassified => Err(Error::Dispatch {
                    objective: self.name().into(),
                    branch: "decision-feedback".into(),
                }),
            };
        }
        Ok(match self.additive_class() {
            AdditiveClass::SchurConcave => DesignBranch::LinearDiagonal,
            AdditiveClass::SchurConvex => DesignBranch::LinearRotation,
            AdditiveClass::Both if sum_mse_as_convex => DesignBranch::LinearRotation,
            AdditiveClass::Both => DesignBranch::LinearDiagonal,
        })
    }
}

/// Free-function form of [`Objective::dispatch`] with the default `SumMSE` choice.
pub fn dispatch_class(spec: Objective, nonlinear: bool) -> Result<DesignBranch> {
    spec.dispatch(nonlinear, false)
}

pub fn evaluate(spec: Objective, mses: &[f64]) -> Result<f64> {
    spec.evaluate(mses)
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| invalid(format!("unknown objective '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn evaluate_examples() {
        assert_eq!(Objective::SumMse.evaluate(&[0.5, 0.25]).unwrap(), 0.75);
        assert_eq!(Objective::MutualInfo.evaluate(&[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(Objective::MaxMse.evaluate(&[0.3, 0.7, 0.5]).unwrap(), 0.7);
        assert_eq!(Objective::HarmonicSinr.evaluate(&[0.5, 1.0]).unwrap(), f64::INFINITY);
        assert!((Objective::MinSinr.evaluate(&[0.5, 0.2]).unwrap() + 1.0).abs() < 1e-15);
        assert!(Objective::SumMse.evaluate(&[0.0]).is_err());
        assert!(Objective::SumMse.evaluate(&[1.1]).is_err());
    }

    #[test]
    fn classification_table() {
        use AdditiveClass::*;
        for o in [Objective::MutualInfo, Objective::ProdMse, Objective::SumSinr, Objective::ProdSinr] {
            assert_eq!(o.additive_class(), SchurConcave);
        }
        for o in [Objective::MaxMse, Objective::HarmonicSinr, Objective::MinSinr] {
            assert_eq!(o.additive_class(), SchurConvex);
            assert_eq!(o.multiplicative_class(), MultiplicativeClass::SchurConvex);
        }
        assert_eq!(Objective::SumMse.additive_class(), Both);
    }

    #[test]
    fn dispatch_examples() {
        assert_eq!(dispatch_class(Objective::MaxMse, false).unwrap(), DesignBranch::LinearRotation);
        assert_eq!(dispatch_class(Objective::MutualInfo, true).unwrap(), DesignBranch::LinearDiagonal);
        assert_eq!(dispatch_class(Objective::SumMse, false).unwrap(), DesignBranch::LinearDiagonal);
        assert_eq!(
            Objective::SumMse.dispatch(false, true).unwrap(),
            DesignBranch::LinearRotation
        );
        assert_eq!(dispatch_class(Objective::MaxMse, true).unwrap(), DesignBranch::Dfe);
        assert!(matches!(
            dispatch_class(Objective::SumSinr, true),
            Err(Error::Dispatch { .. })
        ));
    }

    #[test]
    fn names_round_trip() {
        for o in Objective::ALL {
            assert_eq!(o.name().parse::<Objective>().unwrap(), o);
            let json = serde_json::to_string(&o).unwrap();
            assert_eq!(json, format!("\"{}\"", o.name()));
        }
        assert!("sum_mse".parse::<Objective>().is_err());
    }

    #[test]
    fn every_objective_is_non_decreasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for o in Objective::ALL {
            for _ in 0..10 {
                let m: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.9)).collect();
                let base = o.evaluate(&m).unwrap();
                for i in 0..3 {
                    let mut up = m.clone();
                    up[i] += 1e-6;
                    assert!(o.evaluate(&up).unwrap() >= base - 1e-12, "{o} decreased");
                }
            }
        }
    }
}
