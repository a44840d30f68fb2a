//! Monte Carlo BER sweeps.
//!
//! Trial `t` at sweep point `p` draws everything from its own ChaCha8
//! substream `(p << 40) | t` of the run seed, so results do not depend on
//! scheduling. Designs that share a channel family see the same channel,
//! bits and noise in every trial.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Scenario, SimConfig};
use super::detect::{detect_dfe_words, detect_linear_words};
use super::qam::Qam;
use crate::channel::{complex_gaussian, rayleigh_channel, KroneckerErrorModel, KroneckerSampler, TwoHopChannel};
use crate::dfe::{design_dfe_p2, dfe_p1_from_allocation};
use crate::error::{Error, Result};
use crate::extended::{multihop_design, multirelay_design, naive_design_p1, robust_design_p1};
use crate::extended::{MultiHopChannel, MultiRelayChannel, RobustChannelState};
use crate::linalg::CMat;
use crate::linear::allocation::AllocationCriterion;
use crate::linear::{design_p2, finish_p1, naf_design, sa_design_p2, AllocationOptions, ChainAllocation, ChainProblem, P1Options, QoSTargets};
use crate::mse::TransceiverDesign;
use crate::objectives::{DesignBranch, Objective};

/// A design simulated in a BER sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKind {
    Linear(Objective),
    Dfe(Objective),
    Naf,
    QosRc,
    QosSa,
    QosDfe,
    Robust(Objective),
    Naive(Objective),
    Multihop(Objective),
    Multirelay(usize),
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesignKind::Linear(o) | DesignKind::Multihop(o) => write!(f, "{o}"),
            DesignKind::Dfe(o) => write!(f, "{o}-DFE"),
            DesignKind::Naf => f.write_str("NAF"),
            DesignKind::QosRc => f.write_str("RC"),
            DesignKind::QosSa => f.write_str("SA"),
            DesignKind::QosDfe => f.write_str("RC-DFE"),
            DesignKind::Robust(o) => write!(f, "{o}-robust"),
            DesignKind::Naive(o) => write!(f, "{o}-naive"),
            DesignKind::Multirelay(q) => write!(f, "Q{q}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    TwoHop,
    Robust,
    Multihop,
    Multirelay(usize),
}

impl DesignKind {
    fn family(self) -> Family {
        match self {
            DesignKind::Robust(_) | DesignKind::Naive(_) => Family::Robust,
            DesignKind::Multihop(_) => Family::Multihop,
            DesignKind::Multirelay(q) => Family::Multirelay(q),
            _ => Family::TwoHop,
        }
    }
}

/// Designs simulated for `cfg`, in CSV order.
pub fn designs_for(cfg: &SimConfig) -> Vec<DesignKind> {
    let mut out = Vec::new();
    match cfg.scenario {
        Scenario::TwoHopP1 | Scenario::Dfe => {
            out.extend(cfg.dfe_objectives().into_iter().map(DesignKind::Dfe));
            out.extend(cfg.objectives().into_iter().map(DesignKind::Linear));
        }
        Scenario::TwoHopP2 => out.extend([DesignKind::QosDfe, DesignKind::QosRc, DesignKind::QosSa]),
        Scenario::Robust => {
            for o in cfg.objectives() {
                out.push(DesignKind::Robust(o));
                out.push(DesignKind::Naive(o));
            }
        }
        Scenario::Multihop => out.extend(cfg.objectives().into_iter().map(DesignKind::Multihop)),
        Scenario::Multirelay => out.extend(cfg.relay_counts().into_iter().map(DesignKind::Multirelay)),
        Scenario::Naf => {}
    }
    if cfg.naf || cfg.scenario == Scenario::Naf {
        out.push(DesignKind::Naf);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BerPoint {
    pub snr_db: f64,
    pub ber: f64,
    pub ci95: f64,
    pub trials: u64,
    pub bit_errors: u64,
    pub bits: u64,
}

impl BerPoint {
    pub fn new(snr_db: f64, trials: u64, bit_errors: u64, bits: u64) -> Self {
        let ber = bit_errors as f64 / bits as f64;
        Self {
            snr_db,
            ber,
            ci95: 1.96 * (ber * (1.0 - ber) / bits as f64).sqrt(),
            trials,
            bit_errors,
            bits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerCurve {
    pub design: String,
    pub points: Vec<BerPoint>,
    pub config_hash: u64,
    pub seed: u64,
}

/// Per-link noise variances for unit budgets and unit-variance channels.
pub fn noise_from_snr_db(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Substream of trial `trial` at sweep point `point`.
pub fn trial_rng(seed: u64, point: usize, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((point as u64) << 40) | trial);
    rng
}

/// Matrices of a realized link: one per hop with its noise standard
/// deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    #[serde(with = "crate::extended::serde_mats")]
    pub hops: Vec<CMat>,
    pub noise_std: Vec<f64>,
}

/// Transmit matrices of every node, receiver and optional feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realized {
    #[serde(with = "crate::extended::serde_mats")]
    pub nodes: Vec<CMat>,
    #[serde(with = "crate::linalg::serde_cmat")]
    pub g: CMat,
    #[serde(with = "crate::linalg::serde_cmat::option", default)]
    pub b: Option<CMat>,
}

/// Link and designs of one channel family in one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub designs: Vec<String>,
    pub link: Link,
    pub realized: Vec<Realized>,
}

/// The channels and designs trial `trial` of sweep point `point` uses.
pub fn realize_instance(cfg: &SimConfig, point: usize, trial: u64) -> Result<Vec<Instance>> {
    cfg.validate()?;
    let &(snr_sr, snr_rd) = cfg
        .snr_points()
        .get(point)
        .ok_or_else(|| crate::error::Error::InvalidInput(format!("no sweep point {point}")))?;
    let kinds = designs_for(cfg);
    let mut rng = trial_rng(cfg.seed, point, trial);
    groups_of(&kinds)
        .into_iter()
        .map(|(family, members)| {
            let group: Vec<DesignKind> = members.iter().map(|&i| kinds[i]).collect();
            let (link, realized) = realize(
                family,
                &group,
                cfg,
                noise_from_snr_db(snr_sr),
                noise_from_snr_db(snr_rd),
                &mut rng,
            )?;
            Ok(Instance {
                designs: group.iter().map(|k| k.to_string()).collect(),
                link,
                realized,
            })
        })
        .collect()
}

impl Realized {
    fn two_hop(d: TransceiverDesign) -> Self {
        Self {
            nodes: vec![d.u, d.f],
            g: d.g,
            b: d.backward,
        }
    }
}

fn two_hop_link(ch: &TwoHopChannel) -> Link {
    Link {
        hops: vec![ch.h_sr.clone(), ch.h_rd.clone()],
        noise_std: vec![ch.rho_1.sqrt(), ch.rho_2.sqrt()],
    }
}

/// Per-trial cache of two-hop allocations keyed by criterion.
struct TwoHopCache<'a> {
    problem: &'a ChainProblem,
    opts: AllocationOptions,
    entries: Vec<(AllocationCriterion, ChainAllocation)>,
}

impl TwoHopCache<'_> {
    fn get(&mut self, criterion: AllocationCriterion) -> Result<&ChainAllocation> {
        if let Some(i) = self.entries.iter().position(|(c, _)| *c == criterion) {
            return Ok(&self.entries[i].1);
        }
        let alloc = self.problem.allocate(criterion, &self.opts)?;
        self.entries.push((criterion, alloc));
        Ok(&self.entries.last().expect("just pushed").1)
    }
}

fn realize_two_hop(
    kinds: &[DesignKind],
    ch: &TwoHopChannel,
    cfg: &SimConfig,
) -> Result<Vec<Realized>> {
    let problem = ChainProblem::two_hop(ch, 1.0, 1.0)?;
    let mut cache = TwoHopCache {
        problem: &problem,
        opts: AllocationOptions::default(),
        entries: Vec::new(),
    };
    let targets = match cfg.scenario {
        Scenario::TwoHopP2 => Some(QoSTargets::new(cfg.eta.clone().unwrap_or_default())?),
        _ => None,
    };
    let mut out = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let design = match kind {
            DesignKind::Linear(o) => {
                let branch = o.dispatch(false, false)?;
                let alloc = cache.get(AllocationCriterion::for_objective(o, branch))?;
                finish_p1(&problem, o, branch, alloc)?.design
            }
            DesignKind::Dfe(o) => match o.dispatch(true, false)? {
                DesignBranch::Dfe => {
                    let alloc = cache.get(AllocationCriterion::LogMse)?.clone();
                    dfe_p1_from_allocation(&problem, ch, o, &alloc.powers, alloc.converged, alloc.iterations)?
                        .dfe
                        .base
                }
                branch => {
                    let alloc = cache.get(AllocationCriterion::for_objective(o, branch))?;
                    finish_p1(&problem, o, branch, alloc)?.design
                }
            },
            DesignKind::Naf => naf_design(ch, 1.0, 1.0)?,
            DesignKind::QosRc => design_p2(ch, targets.as_ref().expect("validated"))?.design,
            DesignKind::QosSa => sa_design_p2(ch, targets.as_ref().expect("validated"))?.design,
            DesignKind::QosDfe => design_dfe_p2(ch, targets.as_ref().expect("validated"))?.dfe.base,
            _ => unreachable!("not a two-hop design"),
        };
        out.push(Realized::two_hop(design));
    }
    Ok(out)
}

fn realize(
    family: Family,
    kinds: &[DesignKind],
    cfg: &SimConfig,
    rho_1: f64,
    rho_2: f64,
    rng: &mut ChaCha8Rng,
) -> Result<(Link, Vec<Realized>)> {
    let (n_s, n_r, k) = (cfg.n_s, cfg.n_r, cfg.k);
    match family {
        Family::TwoHop => {
            let ch = TwoHopChannel::rayleigh(n_s, n_r, k, rho_1, rho_2, rng)?;
            let designs = realize_two_hop(kinds, &ch, cfg)?;
            Ok((two_hop_link(&ch), designs))
        }
        Family::Robust => {
            let eps = cfg.epsilon.unwrap_or(0.0);
            let nominal = TwoHopChannel::rayleigh(n_s, n_r, k, rho_1, rho_2, rng)?;
            let err_sr = KroneckerErrorModel::scaled_identity(n_r, n_s, eps, 1.0);
            let err_rd = KroneckerErrorModel::scaled_identity(n_s, n_r, eps, 1.0);
            let d_sr = KroneckerSampler::new(&err_sr)?.sample(rng);
            let d_rd = KroneckerSampler::new(&err_rd)?.sample(rng);
            let truth = TwoHopChannel::new(
                &nominal.h_sr + d_sr,
                &nominal.h_rd + d_rd,
                rho_1,
                rho_2,
                k,
            )?;
            let state = RobustChannelState::new(&nominal, err_sr, err_rd)?;
            let opts = P1Options::default();
            let designs = kinds
                .iter()
                .map(|&kind| {
                    let sol = match kind {
                        DesignKind::Robust(o) => robust_design_p1(&state, o, 1.0, 1.0, &opts)?,
                        DesignKind::Naive(o) => naive_design_p1(&state, o, 1.0, 1.0, &opts)?,
                        _ => unreachable!("not a robust design"),
                    };
                    Ok(Realized::two_hop(sol.design))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((two_hop_link(&truth), designs))
        }
        Family::Multihop => {
            let l = cfg.l.unwrap_or(2);
            let hops: Vec<CMat> = (0..l)
                .map(|i| {
                    let rows = if i + 1 == l { n_s } else { n_r };
                    let cols = if i == 0 { n_s } else { n_r };
                    rayleigh_channel(rows, cols, rng)
                })
                .collect();
            let noise: Vec<f64> = (0..l).map(|i| if i == 0 { rho_1 } else { rho_2 }).collect();
            let ch = MultiHopChannel::new(hops, noise.clone(), vec![1.0; l], k)?;
            let designs = kinds
                .iter()
                .map(|&kind| {
                    let DesignKind::Multihop(o) = kind else {
                        unreachable!("not a multi-hop design")
                    };
                    let sol = multihop_design(&ch, o, &P1Options::default())?;
                    Ok(Realized {
                        nodes: sol.nodes,
                        g: sol.g,
                        b: None,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let link = Link {
                hops: ch.hops,
                noise_std: noise.iter().map(|v| v.sqrt()).collect(),
            };
            Ok((link, designs))
        }
        Family::Multirelay(q) => {
            let ch = MultiRelayChannel::rayleigh(q, n_s, n_r, n_s, k, rho_1, rho_2, rng)?;
            let sol = multirelay_design(&ch, 1.0, q as f64, &AllocationOptions::default())?;
            let stacked = ch.stacked()?;
            Ok((two_hop_link(&stacked), vec![Realized::two_hop(sol.design)]))
        }
    }
}

/// Bit errors of every design for one trial.
fn run_trial(
    groups: &[(Family, Vec<usize>)],
    kinds: &[DesignKind],
    cfg: &SimConfig,
    qam: &Qam,
    point: usize,
    trial: u64,
) -> Result<Vec<u64>> {
    let (snr_sr, snr_rd) = cfg.snr_points()[point];
    let (rho_1, rho_2) = (noise_from_snr_db(snr_sr), noise_from_snr_db(snr_rd));
    let mut rng = trial_rng(cfg.seed, point, trial);
    let mut errors = vec![0u64; kinds.len()];
    for (family, members) in groups {
        let group_kinds: Vec<DesignKind> = members.iter().map(|&i| kinds[i]).collect();
        let (link, designs) = realize(*family, &group_kinds, cfg, rho_1, rho_2, &mut rng)?;
        for _ in 0..cfg.symbols_per_trial {
            let words: Vec<u32> = (0..cfg.k).map(|_| rng.random_range(0..qam.order)).collect();
            let s = CMat::from_iterator(cfg.k, 1, words.iter().map(|&w| qam.map_word(w)));
            let noise: Vec<CMat> = link
                .hops
                .iter()
                .zip(&link.noise_std)
                .map(|(h, &std)| CMat::from_fn(h.nrows(), 1, |_, _| complex_gaussian(&mut rng) * std))
                .collect();
            for (&idx, d) in members.iter().zip(&designs) {
                let mut x = &d.nodes[0] * &s;
                for (i, h) in link.hops.iter().enumerate() {
                    x = h * x + &noise[i];
                    if i + 1 < link.hops.len() {
                        x = &d.nodes[i + 1] * x;
                    }
                }
                let decided = match &d.b {
                    Some(b) => detect_dfe_words(&x, &d.g, b, qam),
                    None => detect_linear_words(&x, &d.g, qam),
                };
                errors[idx] += decided
                    .iter()
                    .zip(&words)
                    .map(|(a, b)| (a ^ b).count_ones() as u64)
                    .sum::<u64>();
            }
        }
    }
    Ok(errors)
}

fn groups_of(kinds: &[DesignKind]) -> Vec<(Family, Vec<usize>)> {
    let mut groups: Vec<(Family, Vec<usize>)> = Vec::new();
    for (i, k) in kinds.iter().enumerate() {
        match groups.iter_mut().find(|(f, _)| *f == k.family()) {
            Some((_, members)) => members.push(i),
            None => groups.push((k.family(), vec![i])),
        }
    }
    groups
}

/// Bit-error counts of every design at sweep point `point`.
pub fn simulate_point(cfg: &SimConfig, point: usize) -> Result<Vec<u64>> {
    cfg.validate()?;
    let kinds = designs_for(cfg);
    let groups = groups_of(&kinds);
    let qam = Qam::new(cfg.qam_order)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| {
            run_trial(&groups, &kinds, cfg, &qam, point, t).map_err(|e| Error::Trial {
                point,
                trial: t,
                source: Box::new(e),
            })
        })
        .try_reduce(
            || vec![0; kinds.len()],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                Ok(a)
            },
        )
}

/// One curve per design, in [`designs_for`] order.
pub fn simulate_ber(cfg: &SimConfig) -> Result<Vec<BerCurve>> {
    cfg.validate()?;
    let kinds = designs_for(cfg);
    let qam = Qam::new(cfg.qam_order)?;
    let bits = cfg.trials * (cfg.symbols_per_trial * cfg.k * qam.bits_per_symbol()) as u64;
    let mut curves: Vec<BerCurve> = kinds
        .iter()
        .map(|k| BerCurve {
            design: k.to_string(),
            points: Vec::new(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        })
        .collect();
    for (p, &(snr_sr, _)) in cfg.snr_points().iter().enumerate() {
        let errors = simulate_point(cfg, p)?;
        for (curve, e) in curves.iter_mut().zip(errors) {
            curve.points.push(BerPoint::new(snr_sr, cfg.trials, e, bits));
        }
    }
    Ok(curves)
}

pub const BER_HEADER: &str = "snr_db,design,ber,ci95,trials,bit_errors";

/// Rows ordered by sweep point, then design.
pub fn write_ber_csv<W: Write>(curves: &[BerCurve], mut w: W) -> io::Result<()> {
    writeln!(w, "{BER_HEADER}")?;
    let n = curves.first().map_or(0, |c| c.points.len());
    for p in 0..n {
        for c in curves {
            let pt = &c.points[p];
            writeln!(
                w,
                "{},{},{:.6e},{:.6e},{},{}",
                pt.snr_db, c.design, pt.ber, pt.ci95, pt.trials, pt.bit_errors
            )?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(trials: u64) -> SimConfig {
        SimConfig::from_json(&format!(
            r#"{{"scenario": "two_hop_p1", "n_s": 3, "n_r": 3, "k": 2,
                "objective": ["MaxMSE", "SumMSE"], "dfe_objective": ["MaxMSE"], "naf": true,
                "qam_order": 4, "snr_sr_db": [10, 60], "snr_rd_db": 60, "trials": {trials}, "seed": 3}}"#
        ))
        .unwrap()
    }

    #[test]
    fn deterministic_and_order_independent() {
        let c = cfg(40);
        let a = simulate_ber(&c).unwrap();
        let b = simulate_ber(&c).unwrap();
        assert_eq!(a, b);
        let serial: Vec<Vec<u64>> = (0..2)
            .map(|p| {
                let kinds = designs_for(&c);
                let groups = groups_of(&kinds);
                let qam = Qam::new(4).unwrap();
                (0..40).rev().fold(vec![0; kinds.len()], |mut acc, t| {
                    let e = run_trial(&groups, &kinds, &c, &qam, p, t).unwrap();
                    acc.iter_mut().zip(e).for_each(|(x, y)| *x += y);
                    acc
                })
            })
            .collect();
        for (d, curve) in a.iter().enumerate() {
            for p in 0..2 {
                assert_eq!(curve.points[p].bit_errors, serial[p][d]);
            }
        }
    }

    #[test]
    fn high_snr_is_error_free() {
        let curves = simulate_ber(&cfg(200)).unwrap();
        let names: Vec<&str> = curves.iter().map(|c| c.design.as_str()).collect();
        assert_eq!(names, ["MaxMSE-DFE", "MaxMSE", "SumMSE", "NAF"]);
        for c in &curves {
            assert_eq!(c.points[1].bit_errors, 0, "{}", c.design);
            assert!(c.points[0].ber <= 1.0);
        }
    }

    #[test]
    fn csv_layout() {
        let curves = simulate_ber(&cfg(5)).unwrap();
        let mut buf = Vec::new();
        write_ber_csv(&curves, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], BER_HEADER);
        assert_eq!(lines.len(), 1 + 2 * 4);
        assert!(lines[1].starts_with("10,MaxMSE-DFE,"));
    }

    #[test]
    fn ci_formula() {
        let p = BerPoint::new(0.0, 10, 25, 100);
        assert!((p.ci95 - 1.96 * (0.25f64 * 0.75 / 100.0).sqrt()).abs() < 1e-15);
    }
}
