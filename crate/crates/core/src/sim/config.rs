//! Simulation configuration as read from JSON.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::objectives::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    TwoHopP1,
    TwoHopP2,
    Dfe,
    Robust,
    Multihop,
    Multirelay,
    Naf,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::TwoHopP1 => "two_hop_p1",
            Scenario::TwoHopP2 => "two_hop_p2",
            Scenario::Dfe => "dfe",
            Scenario::Robust => "robust",
            Scenario::Multihop => "multihop",
            Scenario::Multirelay => "multirelay",
            Scenario::Naf => "naf",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| invalid(format!("unknown scenario '{s}'")))
    }
}

/// A scalar or a list in JSON, always a list in memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

impl<T> From<Vec<T>> for OneOrMany<T> {
    fn from(v: Vec<T>) -> Self {
        OneOrMany::Many(v)
    }
}

fn default_symbols() -> usize {
    1
}

fn empty<T>() -> OneOrMany<T> {
    OneOrMany::Many(Vec::new())
}

/// Field meanings:
///
/// * `objective`: linear designs under test (`two_hop_p1`, `robust`,
///   `multihop`).
/// * `dfe_objective`: decision-feedback designs under test (`two_hop_p1`,
///   `dfe`).
/// * `naf`: also simulate the naive amplify-and-forward control.
/// * `eta`: per-stream QoS targets for `two_hop_p2`; the equal-target sweep
///   for the `power` experiment.
/// * `epsilon`: estimation error variance for `robust`.
/// * `snr_rd_db`: a single value, or one value per `snr_sr_db` point.
/// * `symbols_per_trial`: symbol vectors sent over each channel draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: Scenario,
    pub n_s: usize,
    pub n_r: usize,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<OneOrMany<usize>>,
    #[serde(default = "empty")]
    pub objective: OneOrMany<Objective>,
    #[serde(default = "empty")]
    pub dfe_objective: OneOrMany<Objective>,
    #[serde(default)]
    pub naf: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub qam_order: u32,
    pub snr_sr_db: Vec<f64>,
    pub snr_rd_db: OneOrMany<f64>,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_symbols")]
    pub symbols_per_trial: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| invalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn objectives(&self) -> Vec<Objective> {
        self.objective.to_vec()
    }

    pub fn dfe_objectives(&self) -> Vec<Objective> {
        self.dfe_objective.to_vec()
    }

    pub fn relay_counts(&self) -> Vec<usize> {
        self.q.as_ref().map(|q| q.to_vec()).unwrap_or_else(|| vec![1])
    }

    /// `(snr_sr_db, snr_rd_db)` of every sweep point.
    pub fn snr_points(&self) -> Vec<(f64, f64)> {
        let rd = self.snr_rd_db.to_vec();
        self.snr_sr_db
            .iter()
            .enumerate()
            .map(|(i, &sr)| (sr, if rd.len() == 1 { rd[0] } else { rd[i] }))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        if self.symbols_per_trial == 0 {
            return Err(invalid("symbols_per_trial must be at least 1"));
        }
        if self.snr_sr_db.is_empty() {
            return Err(invalid("snr_sr_db sweep is empty"));
        }
        let rd = self.snr_rd_db.to_vec();
        if rd.len() != 1 && rd.len() != self.snr_sr_db.len() {
            return Err(invalid("snr_rd_db must be one value or one per snr_sr_db point"));
        }
        if self.snr_sr_db.iter().chain(&rd).any(|x| !x.is_finite()) {
            return Err(invalid("SNR values must be finite"));
        }
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(invalid(format!("qam_order {} not in {{4, 16, 64}}", self.qam_order)));
        }
        if self.k == 0 || self.k > self.n_s || self.k > self.n_r {
            return Err(invalid("need 1 <= k <= min(n_s, n_r)"));
        }
        if let Some(e) = &self.eta {
            if e.is_empty() || e.iter().any(|x| !(*x > 0.0 && *x < 1.0)) {
                return Err(invalid("eta values must lie in (0, 1)"));
            }
        }
        match self.scenario {
            Scenario::TwoHopP1 if self.objective.to_vec().is_empty() && self.dfe_objective.to_vec().is_empty() && !self.naf => {
                Err(invalid("two_hop_p1 needs at least one design"))
            }
            Scenario::TwoHopP2 if self.eta.is_none() => Err(invalid("two_hop_p2 needs eta")),
            Scenario::Dfe if self.dfe_objective.to_vec().is_empty() => Err(invalid("dfe needs dfe_objective")),
            Scenario::Robust => match self.epsilon {
                Some(e) if e >= 0.0 && e.is_finite() => {
                    if self.objective.to_vec().is_empty() {
                        Err(invalid("robust needs an objective"))
                    } else {
                        Ok(())
                    }
                }
                _ => Err(invalid("robust needs a non-negative epsilon")),
            },
            Scenario::Multihop => match self.l {
                Some(l) if l >= 2 => {
                    if self.objective.to_vec().is_empty() {
                        Err(invalid("multihop needs an objective"))
                    } else {
                        Ok(())
                    }
                }
                _ => Err(invalid("multihop needs l >= 2")),
            },
            Scenario::Multirelay => {
                let q = self.relay_counts();
                if q.is_empty() || q.contains(&0) {
                    Err(invalid("multirelay needs q >= 1"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// FNV-1a hash of the canonical JSON form.
    pub fn hash(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in serde_json::to_vec(self).expect("config serializes") {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "scenario": "two_hop_p1", "n_s": 3, "n_r": 3, "k": 2,
        "objective": ["MaxMSE", "MutualInfo"], "dfe_objective": "MaxMSE", "naf": true,
        "qam_order": 4, "snr_sr_db": [5, 10], "snr_rd_db": 20, "trials": 10, "seed": 1
    }"#;

    #[test]
    fn parses_and_hashes() {
        let cfg = SimConfig::from_json(SAMPLE).unwrap();
        assert_eq!(cfg.objectives(), vec![Objective::MaxMse, Objective::MutualInfo]);
        assert_eq!(cfg.dfe_objectives(), vec![Objective::MaxMse]);
        assert_eq!(cfg.snr_points(), vec![(5.0, 20.0), (10.0, 20.0)]);
        let back = SimConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        let mut other = cfg.clone();
        other.seed = 2;
        assert_ne!(other.hash(), cfg.hash());
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        let extra = SAMPLE.replace("\"seed\": 1", "\"seed\": 1, \"sead\": 2");
        assert!(SimConfig::from_json(&extra).is_err());
        assert!(SimConfig::from_json(&SAMPLE.replace("\"qam_order\": 4", "\"qam_order\": 8")).is_err());
        assert!(SimConfig::from_json(&SAMPLE.replace("\"trials\": 10", "\"trials\": 0")).is_err());
        assert!(SimConfig::from_json(&SAMPLE.replace("[5, 10]", "[]")).is_err());
        assert!(SimConfig::from_json(&SAMPLE.replace("MutualInfo", "Capacity")).is_err());
    }
}
