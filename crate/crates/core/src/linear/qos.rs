//! QoS-constrained power minimization (P2): smallest total power such that
//! every stream MSE stays below its target.
//!
//! The eigen-MSEs `lambda` of the channel-matched design are chosen first;
//! a rotation with prescribed diagonal then maps them onto the targets,
//! which is possible exactly when the targets are majorized by `lambda`.

use serde::{Deserialize, Serialize};

use crate::channel::TwoHopChannel;
use crate::error::{invalid, mismatch, numerical, Error, Result};
use crate::factors;
use crate::linalg::{self, CMat};
use crate::mse::{self, PowerAllocation, TransceiverDesign};

use super::ChainProblem;

/// Per-stream MSE ceilings, each in `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QoSTargets {
    pub eta: Vec<f64>,
}

impl QoSTargets {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        let t = Self { eta };
        t.validate()?;
        Ok(t)
    }

    pub fn equal(k: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; k])
    }

    pub fn validate(&self) -> Result<()> {
        if self.eta.is_empty() {
            return Err(invalid("no QoS targets"));
        }
        if let Some(e) = self.eta.iter().find(|&&e| !(e > 0.0 && e < 1.0)) {
            return Err(Error::Infeasible(format!("QoS target {e} outside (0, 1)")));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub(crate) fn ascending(&self) -> Vec<f64> {
        let mut e = self.eta.clone();
        e.sort_by(f64::total_cmp);
        e
    }
}

/// Minimum source and relay power `(a, b)` giving a single stream MSE of
/// exactly `t`, for eigenvalues `lam_sr`, `lam_rd` and link noise variances.
pub fn per_stream_min_power(t: f64, lam_sr: f64, lam_rd: f64, rho_1: f64, rho_2: f64) -> Result<(f64, f64)> {
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid(format!("target MSE {t} outside (0, 1)")));
    }
    if !(lam_sr > 0.0 && lam_rd > 0.0) {
        return Err(Error::Infeasible("stream has a zero channel gain".into()));
    }
    if !(rho_1 > 0.0 && rho_2 > 0.0) {
        return Err(invalid("noise variances must be positive"));
    }
    Ok(min_power_pair(t, rho_1 / lam_sr, rho_2 / lam_rd))
}

/// With `alpha = rho_1 / lam_sr`, `beta = rho_2 / lam_rd` and
/// `x = 1 + a / alpha`, `y = 1 + b / beta`, the MSE is `(x + y - 1) / (x y)`;
/// the cheapest point on the level set `t` is `x = (1 + r) / t`,
/// `r = sqrt((beta / alpha)(1 - t))`.
fn min_power_pair(t: f64, alpha: f64, beta: f64) -> (f64, f64) {
    if t >= 1.0 {
        return (0.0, 0.0);
    }
    let r = ((beta / alpha) * (1.0 - t)).sqrt();
    let x = (1.0 + r) / t;
    (alpha * (x - 1.0), alpha * r * x)
}

pub(crate) fn per_stream_min_power_coef(t: f64, alpha: f64, beta: f64) -> (f64, f64) {
    min_power_pair(t, alpha, beta)
}

/// Total of [`min_power_pair`]: `alpha ((1 + r)^2 / t - 1)`.
pub(crate) fn min_power(t: f64, alpha: f64, beta: f64) -> f64 {
    if t >= 1.0 {
        return 0.0;
    }
    let r = ((beta / alpha) * (1.0 - t)).sqrt();
    alpha * ((1.0 + r).powi(2) / t - 1.0)
}

/// Coordinate descent of a separable cost over the polytope
/// `lo <= v_1 <= ... <= v_K <= hi`, `sum_{i<=j} v_i <= caps_j`. Starts from
/// the feasible point `v` and moves along pairwise transfers and single
/// increases until no move helps.
pub(crate) fn prefix_descent(
    mut v: Vec<f64>,
    caps: &[f64],
    lo: f64,
    hi: f64,
    cost: &dyn Fn(usize, f64) -> f64,
) -> Vec<f64> {
    let k = v.len();
    let total = |v: &[f64]| (0..k).map(|i| cost(i, v[i])).sum::<f64>();
    let slack = |v: &[f64]| -> Vec<f64> {
        let mut acc = 0.0;
        v.iter()
            .zip(caps)
            .map(|(x, c)| {
                acc += x;
                (c - acc).max(0.0)
            })
            .collect()
    };

    let mut current = total(&v);
    for _ in 0..500 {
        let start = current;
        for i in 0..k {
            for j in i + 1..k {
                let s = slack(&v);
                let mut d_lo = -s[i..j].iter().copied().fold(f64::INFINITY, f64::min);
                let mut d_hi = (v[i] - lo).min(hi - v[j]);
                if i > 0 {
                    d_hi = d_hi.min(v[i] - v[i - 1]);
                }
                if j + 1 < k {
                    d_hi = d_hi.min(v[j + 1] - v[j]);
                }
                if j == i + 1 {
                    d_lo = d_lo.max((v[i] - v[j]) / 2.0);
                } else {
                    d_lo = d_lo.max(v[i] - v[i + 1]).max(v[j - 1] - v[j]);
                }
                let pair = |d: f64| cost(i, v[i] - d) + cost(j, v[j] + d);
                if let Some(d) = line_min(&pair, d_lo.min(0.0), d_hi.max(0.0)) {
                    v[i] -= d;
                    v[j] += d;
                }
            }
        }
        for j in 0..k {
            let s = slack(&v);
            let mut d_hi = s[j..].iter().copied().fold(hi - v[j], f64::min);
            if j + 1 < k {
                d_hi = d_hi.min(v[j + 1] - v[j]);
            }
            let single = |d: f64| cost(j, v[j] + d);
            if let Some(d) = line_min(&single, 0.0, d_hi.max(0.0)) {
                v[j] += d;
            }
        }
        current = total(&v);
        if start - current <= 1e-13 * current.abs().max(1e-300) {
            break;
        }
    }
    v
}

/// Minimizer of `f` over `[a, b]` (which contains 0) if it improves on
/// `f(0)`: dense grid, then golden-section refinement around the best node.
fn line_min(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> Option<f64> {
    if !(b > a) {
        return None;
    }
    const N: usize = 32;
    let f0 = f(0.0);
    let step = (b - a) / N as f64;
    let (mut best_i, mut best) = (0, f64::INFINITY);
    for i in 0..=N {
        let val = f(a + step * i as f64);
        if val < best {
            best = val;
            best_i = i;
        }
    }
    let (mut l, mut r) = (
        a + step * best_i.saturating_sub(1) as f64,
        (a + step * (best_i + 1) as f64).min(b),
    );
    let mut best_x = a + step * best_i as f64;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = r - phi * (r - l);
    let mut x2 = l + phi * (r - l);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            r = x2;
            x2 = x1;
            f2 = f1;
            x1 = r - phi * (r - l);
            f1 = f(x1);
        } else {
            l = x1;
            x1 = x2;
            f1 = f2;
            x2 = l + phi * (r - l);
            f2 = f(x2);
        }
        if r - l < 1e-15 * (1.0 + best_x.abs()) {
            break;
        }
    }
    for (x, val) in [(x1, f1), (x2, f2)] {
        if val < best {
            best = val;
            best_x = x;
        }
    }
    (best < f0 - 1e-15 * f0.abs()).then_some(best_x)
}

/// Raise the largest entries (capped at `hi`) until the sum reaches `target`.
/// Keeps the ascending order and every earlier prefix constraint.
pub(crate) fn close_gap(v: &mut [f64], target: f64, hi: f64) {
    let mut gap = target - v.iter().sum::<f64>();
    for x in v.iter_mut().rev() {
        if gap <= 0.0 {
            break;
        }
        let d = (hi - *x).min(gap).max(0.0);
        *x += d;
        gap -= d;
    }
}

/// Result of the QoS designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P2Solution {
    pub design: TransceiverDesign,
    pub allocation: PowerAllocation,
    /// Source plus relay power recomputed from the design matrices.
    pub total_power: f64,
    /// Eigen-MSEs of the channel-matched design, strongest stream first.
    pub eigen_mses: Vec<f64>,
    /// Diagonal of the MSE matrix recomputed from the design matrices.
    pub achieved_mses: Vec<f64>,
}

/// Per-stream `(alpha, beta)` of a two-hop problem; every stream must have
/// non-zero gains on both hops.
pub(crate) fn stream_coefficients(problem: &ChainProblem) -> Result<Vec<(f64, f64)>> {
    (0..problem.k)
        .map(|s| {
            let (l1, l2) = (problem.lams[0][s], problem.lams[1][s]);
            if !(l1 > 0.0 && l2 > 0.0) {
                return Err(Error::Infeasible(format!(
                    "stream {} has a zero channel gain",
                    s + 1
                )));
            }
            Ok((problem.noise[0] / l1, problem.noise[1] / l2))
        })
        .collect()
}

fn check_dims(channel: &TwoHopChannel, targets: &QoSTargets) -> Result<()> {
    targets.validate()?;
    if targets.len() != channel.num_streams {
        return Err(mismatch(format!(
            "{} targets for {} streams",
            targets.len(),
            channel.num_streams
        )));
    }
    Ok(())
}

/// Build and verify a QoS design for eigen-MSEs `lambda` and rotation `s`.
pub(crate) fn assemble(
    problem: &ChainProblem,
    coef: &[(f64, f64)],
    lambda: &[f64],
    s: Option<&CMat>,
    targets: &QoSTargets,
) -> Result<P2Solution> {
    let (a, b): (Vec<f64>, Vec<f64>) = lambda
        .iter()
        .zip(coef)
        .map(|(&t, &(al, be))| min_power_pair(t, al, be))
        .unzip();
    let built = problem.build(&[a.clone(), b.clone()], s)?;
    let e = mse::mse_general(&built.g, &built.x, &built.cov)?;
    let achieved_mses = linalg::diag_re(&e);
    for (k, (m, eta)) in achieved_mses.iter().zip(&targets.eta).enumerate() {
        if *m > eta + 1e-9 {
            return Err(numerical(format!(
                "stream {} MSE {m} exceeds target {eta}",
                k + 1
            )));
        }
    }
    let mut nodes = built.nodes.into_iter();
    let design = TransceiverDesign {
        u: nodes.next().expect("source node"),
        f: nodes.next().expect("relay node"),
        g: built.g,
        s_rotation: s.cloned(),
        backward: None,
    };
    let channel_like = (problem.hops[0].clone(), problem.noise[0]);
    let total_power = design.source_power()
        + mse::relay_tx_power(&design.f, &channel_like.0, &design.u, channel_like.1)?;
    let p_s = a.iter().sum();
    let p_r = b.iter().sum();
    Ok(P2Solution {
        design,
        allocation: PowerAllocation { a, b, p_s, p_r },
        total_power,
        eigen_mses: lambda.to_vec(),
        achieved_mses,
    })
}

fn prefix_sums(v: &[f64]) -> Vec<f64> {
    v.iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// Optimized eigen-MSEs (ascending, strongest stream first) for the linear
/// QoS design.
pub(crate) fn optimize_eigen_mses(coef: &[(f64, f64)], targets: &QoSTargets) -> Vec<f64> {
    let eta = targets.ascending();
    let caps = prefix_sums(&eta);
    let cost = |k: usize, t: f64| min_power(t, coef[k].0, coef[k].1);
    let mut lambda = prefix_descent(eta.clone(), &caps, 1e-12, 1.0, &cost);
    close_gap(&mut lambda, caps[caps.len() - 1], 1.0);
    lambda
}

/// Rotation target for eigen-MSEs `lambda`: the targets themselves when the
/// traces agree, otherwise the targets lowered by the mean slack (or scaled
/// proportionally if that breaks majorization).
fn rotation_target(lambda: &[f64], eta: &[f64]) -> Vec<f64> {
    let gap = eta.iter().sum::<f64>() - lambda.iter().sum::<f64>();
    if gap <= 0.0 {
        return eta.to_vec();
    }
    let shifted: Vec<f64> = eta.iter().map(|e| e - gap / eta.len() as f64).collect();
    if shifted.iter().all(|&d| d > 0.0) && factors::is_majorized(lambda, &shifted, 1e-12) {
        return shifted;
    }
    let scale = lambda.iter().sum::<f64>() / eta.iter().sum::<f64>();
    eta.iter().map(|e| e * scale).collect()
}

/// QoS design with a linear receiver: optimized eigen-MSEs, Schur-Horn
/// rotation onto the targets.
pub fn design_p2(channel: &TwoHopChannel, targets: &QoSTargets) -> Result<P2Solution> {
    check_dims(channel, targets)?;
    let problem = ChainProblem::two_hop(channel, 1.0, 1.0)?;
    let coef = stream_coefficients(&problem)?;
    let lambda = optimize_eigen_mses(&coef, targets);
    let target = rotation_target(&lambda, &targets.eta);
    let rot = factors::schur_horn_rotation(&lambda, &target)?;
    let rc = assemble(&problem, &coef, &lambda, Some(&rot.s), targets)?;
    // The targets themselves, unrotated, are always a candidate.
    let sa = assemble(&problem, &coef, &targets.eta, None, targets)?;
    Ok(if sa.total_power < rc.total_power { sa } else { rc })
}

/// Baseline QoS design without rotation: stream `k` gets eigen-MSE `eta_k`.
pub fn sa_design_p2(channel: &TwoHopChannel, targets: &QoSTargets) -> Result<P2Solution> {
    check_dims(channel, targets)?;
    let problem = ChainProblem::two_hop(channel, 1.0, 1.0)?;
    let coef = stream_coefficients(&problem)?;
    assemble(&problem, &coef, &targets.eta, None, targets)
}

/// Brute-force reference for two streams: grid over all eigen-MSE pairs in
/// `(0, 1]^2` whose sorted partial sums stay below those of the targets.
/// Returns the minimum total power and the eigen-MSEs achieving it.
#[allow(clippy::too_many_arguments)]
pub fn grid_oracle_p2(
    lams_sr: &[f64],
    lams_rd: &[f64],
    rho_1: f64,
    rho_2: f64,
    targets: &QoSTargets,
    resolution: usize,
) -> Result<(f64, Vec<f64>)> {
    targets.validate()?;
    if lams_sr.len() != 2 || lams_rd.len() != 2 || targets.len() != 2 {
        return Err(invalid("the QoS grid oracle handles exactly two streams"));
    }
    let coef: Vec<(f64, f64)> = (0..2)
        .map(|k| {
            if !(lams_sr[k] > 0.0 && lams_rd[k] > 0.0) {
                return Err(Error::Infeasible("zero channel gain".into()));
            }
            Ok((rho_1 / lams_sr[k], rho_2 / lams_rd[k]))
        })
        .collect::<Result<_>>()?;
    let eta = targets.ascending();
    let mut best = (f64::INFINITY, vec![0.0; 2]);
    for i in 1..=resolution {
        for j in 1..=resolution {
            let l = [i as f64 / resolution as f64, j as f64 / resolution as f64];
            let (lo, hi) = if l[0] <= l[1] { (l[0], l[1]) } else { (l[1], l[0]) };
            if lo > eta[0] + 1e-15 || lo + hi > eta[0] + eta[1] + 1e-15 {
                continue;
            }
            let p = min_power(l[0], coef[0].0, coef[0].1) + min_power(l[1], coef[1].0, coef[1].1);
            if p < best.0 {
                best = (p, l.to_vec());
            }
        }
    }
    Ok(best)
}
