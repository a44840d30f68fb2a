//! Per-stream power allocation for amplify-and-forward chains.
//!
//! With the channel-matched structure, stream `k` sees per-hop SNRs
//! `s_ik = g_ik x_ik` (gain `g = lambda / rho`, transmit power `x`) and its MSE
//! is `1 - prod_i s_ik / (1 + s_ik)`. Every node has its own power budget, so
//! the allocation of one node given all others is a separable problem that
//! is solved by bisection on the Lagrange multiplier with a closed-form
//! per-stream response.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, numerical, Error, Result};
use crate::mse::PowerAllocation;
use crate::objectives::{DesignBranch, Objective};

/// Function of the per-stream MSEs minimized by the allocator. Each is a
/// monotone transform of the objective it serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationCriterion {
    /// `sum m_k`
    SumMse,
    /// `sum log m_k`
    LogMse,
    /// `-sum SINR_k`
    NegSumSinr,
    /// `-sum log SINR_k`
    NegLogSinr,
}

impl AllocationCriterion {
    /// Criterion that optimizes `spec` on the given design branch. Rotation
    /// branches equalize the MSEs, so only their sum (linear) or product
    /// (decision feedback) matters.
    pub fn for_objective(spec: Objective, branch: DesignBranch) -> Self {
        match branch {
            DesignBranch::LinearRotation => Self::SumMse,
            DesignBranch::Dfe => Self::LogMse,
            DesignBranch::LinearDiagonal => match spec {
                Objective::MutualInfo | Objective::ProdMse => Self::LogMse,
                Objective::SumSinr => Self::NegSumSinr,
                Objective::ProdSinr => Self::NegLogSinr,
                _ => Self::SumMse,
            },
        }
    }

    /// Value from the per-stream success products `p_k = 1 - m_k`.
    pub fn value(self, success: &[f64]) -> f64 {
        match self {
            Self::SumMse => success.iter().map(|p| 1.0 - p).sum(),
            Self::LogMse => success.iter().map(|p| (-p).ln_1p()).sum(),
            Self::NegSumSinr => -success.iter().map(|p| p / (1.0 - p)).sum::<f64>(),
            Self::NegLogSinr => -success
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|p| (p / (1.0 - p)).ln())
                .sum::<f64>(),
        }
    }

    /// Bound on the rounding error of [`Self::value`]: success factors near one
    /// lose their relative accuracy in `1 - p`.
    fn rounding(self, success: &[f64]) -> f64 {
        match self {
            Self::LogMse | Self::NegLogSinr => success
                .iter()
                .map(|p| 8.0 * f64::EPSILON / (1.0 - p).max(f64::MIN_POSITIVE))
                .sum(),
            _ => 0.0,
        }
    }

    /// Optimal per-hop SNR `y = g x` of one stream for multiplier `mu`, given
    /// its gain `g` and the product `c` of the other hops' success factors.
    fn response(self, g: f64, c: f64, mu: f64) -> f64 {
        if g <= 0.0 || c <= 0.0 {
            return 0.0;
        }
        let d = 1.0 - c;
        match self {
            Self::SumMse => ((c * g / mu).sqrt() - 1.0).max(0.0),
            Self::LogMse => {
                let t = c * g / mu - 1.0;
                if t <= 0.0 {
                    0.0
                } else {
                    2.0 * t / ((1.0 + d) + ((1.0 + d).powi(2) + 4.0 * d * t).sqrt())
                }
            }
            Self::NegSumSinr => {
                let t = (c * g / mu).sqrt() - 1.0;
                if t <= 0.0 {
                    0.0
                } else {
                    t / d.max(1e-15)
                }
            }
            Self::NegLogSinr => {
                let t = g / mu;
                2.0 * t / (1.0 + (1.0 + 4.0 * d * t).sqrt())
            }
        }
    }
}

/// `s / (1 + s)`
#[inline]
pub(crate) fn success(s: f64) -> f64 {
    s / (1.0 + s)
}

/// Powers below this are set to exactly zero.
const PRUNE: f64 = 1e-12;
const MU_LO: f64 = 1e-16;
const MU_HI: f64 = 1e16;

/// Optimal powers of one node with budget `budget`, given per-stream gains
/// and the success product `coupling` of all other hops.
pub(crate) fn waterfill(
    gains: &[f64],
    coupling: &[f64],
    budget: f64,
    criterion: AllocationCriterion,
) -> Result<Vec<f64>> {
    let live: Vec<bool> = gains
        .iter()
        .zip(coupling)
        .map(|(&g, &c)| g > 0.0 && c > 0.0)
        .collect();
    if !live.iter().any(|&l| l) {
        return Err(numerical("no stream can carry power on this hop"));
    }
    let powers = |mu: f64| -> Vec<f64> {
        gains
            .iter()
            .zip(coupling)
            .map(|(&g, &c)| {
                if g > 0.0 {
                    criterion.response(g, c, mu) / g
                } else {
                    0.0
                }
            })
            .collect()
    };
    let total = |x: &[f64]| x.iter().sum::<f64>();

    let (mut lo, mut hi) = (MU_LO, MU_HI);
    let (t_lo, t_hi) = (total(&powers(lo)), total(&powers(hi)));
    if !(t_lo >= budget && t_hi <= budget) {
        return Err(numerical(format!(
            "multiplier bracket [{lo:e}, {hi:e}] gives powers [{t_lo:e}, {t_hi:e}] around budget {budget:e}"
        )));
    }
    let mut x = Vec::new();
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        x = powers(mid);
        let t = total(&x);
        if (t - budget).abs() <= 1e-14 * budget || hi / lo - 1.0 < 1e-15 {
            break;
        }
        if t > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    for (v, &l) in x.iter_mut().zip(&live) {
        if !l || *v < PRUNE {
            *v = 0.0;
        }
    }
    let t = total(&x);
    if !(t > 0.0) {
        return Err(numerical(format!(
            "multiplier bisection failed to allocate budget {budget:e}"
        )));
    }
    let scale = budget / t;
    x.iter_mut().for_each(|v| *v *= scale);
    Ok(x)
}

/// Per-stream success products of a chain allocation.
pub(crate) fn chain_success(gains: &[Vec<f64>], powers: &[Vec<f64>]) -> Vec<f64> {
    let k = gains[0].len();
    (0..k)
        .map(|s| {
            gains
                .iter()
                .zip(powers)
                .map(|(g, x)| success(g[s] * x[s]))
                .product()
        })
        .collect()
}

/// Stream MSEs `1 - prod_i s_ik / (1 + s_ik)` of a chain allocation.
pub(crate) fn chain_mses(gains: &[Vec<f64>], powers: &[Vec<f64>]) -> Vec<f64> {
    chain_success(gains, powers).iter().map(|p| 1.0 - p).collect()
}

/// Result of the cyclic allocation over the nodes of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainAllocation {
    /// `powers[i][k]`: power node `i` spends on stream `k`.
    pub powers: Vec<Vec<f64>>,
    pub criterion: AllocationCriterion,
    /// Final criterion value.
    pub objective: f64,
    /// Criterion value after every single-node update, starting from the
    /// initial point.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AllocationOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Random initial points tried in addition to the uniform one.
    pub restarts: usize,
    pub seed: u64,
}

impl Default for AllocationOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 500,
            restarts: 0,
            seed: 0,
        }
    }
}

fn check_chain(gains: &[Vec<f64>], budgets: &[f64]) -> Result<usize> {
    if gains.is_empty() || gains.len() != budgets.len() {
        return Err(mismatch("one gain vector and one budget per node required"));
    }
    let k = gains[0].len();
    if k == 0 || gains.iter().any(|g| g.len() != k) {
        return Err(mismatch("every hop needs the same number of streams"));
    }
    if gains.iter().flatten().any(|&g| !(g >= 0.0) || !g.is_finite()) {
        return Err(invalid("gains must be finite and non-negative"));
    }
    if budgets.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(invalid("power budgets must be positive"));
    }
    for (i, g) in gains.iter().enumerate() {
        if g.iter().all(|&v| v == 0.0) {
            return Err(Error::DegenerateChannel(format!("hop {} has no non-zero gain", i + 1)));
        }
    }
    Ok(k)
}

/// Cyclic conditional optimization of the node powers from `init`.
pub fn alternating_chain_allocation(
    gains: &[Vec<f64>],
    budgets: &[f64],
    criterion: AllocationCriterion,
    init: &[Vec<f64>],
    opts: &AllocationOptions,
) -> Result<ChainAllocation> {
    let k = check_chain(gains, budgets)?;
    if init.len() != gains.len() || init.iter().any(|x| x.len() != k) {
        return Err(mismatch("initial allocation has the wrong shape"));
    }
    for (x, &p) in init.iter().zip(budgets) {
        if x.iter().any(|&v| !(v >= 0.0)) || x.iter().sum::<f64>() > p * (1.0 + 1e-9) {
            return Err(invalid("initial allocation is infeasible"));
        }
    }

    let mut powers = init.to_vec();
    let mut objective = criterion.value(&chain_success(gains, &powers));
    let mut history = vec![objective];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let start = objective;
        for node in 0..gains.len() {
            let coupling: Vec<f64> = (0..k)
                .map(|s| {
                    (0..gains.len())
                        .filter(|&j| j != node)
                        .map(|j| success(gains[j][s] * powers[j][s]))
                        .product()
                })
                .collect();
            powers[node] = waterfill(&gains[node], &coupling, budgets[node], criterion)?;
            let succ = chain_success(gains, &powers);
            let next = criterion.value(&succ);
            if next > objective + 1e-10 * objective.abs().max(1.0) + criterion.rounding(&succ) {
                return Err(numerical(format!(
                    "allocation objective increased from {objective} to {next} at iteration {iterations}"
                )));
            }
            objective = next;
            history.push(objective);
        }
        if (start - objective).abs() <= opts.tolerance * start.abs().max(f64::MIN_POSITIVE) {
            converged = true;
            break;
        }
    }

    Ok(ChainAllocation {
        powers,
        criterion,
        objective,
        history,
        iterations,
        converged,
    })
}

/// Cyclic allocation from the uniform split, plus `opts.restarts` random
/// starting points; the best final criterion value wins.
pub fn chain_allocation(
    gains: &[Vec<f64>],
    budgets: &[f64],
    criterion: AllocationCriterion,
    opts: &AllocationOptions,
) -> Result<ChainAllocation> {
    let k = check_chain(gains, budgets)?;
    let uniform: Vec<Vec<f64>> = budgets.iter().map(|&p| vec![p / k as f64; k]).collect();
    let mut best = alternating_chain_allocation(gains, budgets, criterion, &uniform, opts)?;
    for r in 0..opts.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        rng.set_stream(r as u64);
        let init: Vec<Vec<f64>> = budgets
            .iter()
            .map(|&p| {
                let w: Vec<f64> = (0..k).map(|_| Exp1.sample(&mut rng)).collect();
                let sum: f64 = w.iter().sum();
                w.iter().map(|v| p * v / sum).collect()
            })
            .collect();
        let run = alternating_chain_allocation(gains, budgets, criterion, &init, opts)?;
        if run.objective < best.objective {
            best = run;
        }
    }
    Ok(best)
}

fn two_hop_gains(lams_sr: &[f64], lams_rd: &[f64], rho_1: f64, rho_2: f64) -> Result<Vec<Vec<f64>>> {
    if lams_sr.len() != lams_rd.len() {
        return Err(mismatch("hop eigenvalue vectors differ in length"));
    }
    if !(rho_1 > 0.0 && rho_2 > 0.0) {
        return Err(invalid("noise variances must be positive"));
    }
    Ok(vec![
        lams_sr.iter().map(|l| l / rho_1).collect(),
        lams_rd.iter().map(|l| l / rho_2).collect(),
    ])
}

/// Outcome of [`alternating_power_allocation`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationOutcome {
    pub allocation: PowerAllocation,
    pub criterion: AllocationCriterion,
    pub objective: f64,
    pub history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

/// Alternating source/relay allocation of the two-hop link for objective
/// `spec` (linear receiver branch). `init` defaults to the uniform split.
#[allow(clippy::too_many_arguments)]
pub fn alternating_power_allocation(
    lams_sr: &[f64],
    lams_rd: &[f64],
    rho_1: f64,
    rho_2: f64,
    p_s: f64,
    p_r: f64,
    spec: Objective,
    init: Option<&PowerAllocation>,
) -> Result<AllocationOutcome> {
    let gains = two_hop_gains(lams_sr, lams_rd, rho_1, rho_2)?;
    let budgets = [p_s, p_r];
    let k = check_chain(&gains, &budgets)?;
    let criterion = AllocationCriterion::for_objective(spec, spec.dispatch(false, false)?);
    let start = match init {
        Some(a) => {
            if a.num_streams() != k {
                return Err(mismatch("initial allocation has the wrong length"));
            }
            vec![a.a.clone(), a.b.clone()]
        }
        None => vec![vec![p_s / k as f64; k], vec![p_r / k as f64; k]],
    };
    let run = alternating_chain_allocation(&gains, &budgets, criterion, &start, &Default::default())?;
    Ok(AllocationOutcome {
        allocation: PowerAllocation {
            a: run.powers[0].clone(),
            b: run.powers[1].clone(),
            p_s,
            p_r,
        },
        criterion,
        objective: run.objective,
        history: run.history,
        iterations: run.iterations,
        converged: run.converged,
    })
}

/// Optimal powers of one side of the two-hop link with the other side's
/// powers `fixed_other` held fixed.
#[allow(clippy::too_many_arguments)]
pub fn conditional_waterfill(
    fixed_other: &[f64],
    lams_own: &[f64],
    lams_other: &[f64],
    rho_own: f64,
    rho_other: f64,
    budget: f64,
    criterion: AllocationCriterion,
) -> Result<Vec<f64>> {
    if fixed_other.len() != lams_own.len() || lams_other.len() != lams_own.len() {
        return Err(mismatch("per-stream vectors differ in length"));
    }
    if !(budget > 0.0) {
        return Err(invalid("budget must be positive"));
    }
    if !(rho_own > 0.0 && rho_other > 0.0) {
        return Err(invalid("noise variances must be positive"));
    }
    let gains: Vec<f64> = lams_own.iter().map(|l| l / rho_own).collect();
    let coupling: Vec<f64> = fixed_other
        .iter()
        .zip(lams_other)
        .map(|(x, l)| success(x * l / rho_other))
        .collect();
    waterfill(&gains, &coupling, budget, criterion)
}

/// Value of `spec` for a channel-matched design with the given eigen-MSEs on
/// its default linear branch (rotation branches see the equalized MSEs).
pub(crate) fn branch_objective(spec: Objective, branch: DesignBranch, mses: &[f64]) -> Result<f64> {
    match branch {
        DesignBranch::LinearDiagonal => spec.evaluate(mses),
        DesignBranch::LinearRotation => {
            let mean = mses.iter().sum::<f64>() / mses.len() as f64;
            spec.evaluate(&vec![mean; mses.len()])
        }
        DesignBranch::Dfe => {
            let geo = (mses.iter().map(|m| m.ln()).sum::<f64>() / mses.len() as f64).exp();
            spec.evaluate(&vec![geo; mses.len()])
        }
    }
}

/// Best grid point of the exhaustive search over both power simplices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOracleResult {
    pub allocation: PowerAllocation,
    pub objective: f64,
    pub evaluated: usize,
}

/// All vectors of `k` non-negative integers summing to `n`.
fn compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Exhaustive search of the two-hop allocation over the product of the two
/// budget simplices at `resolution` steps per simplex (`K <= 3`). Evaluates
/// the P1 objective of the default linear design branch.
#[allow(clippy::too_many_arguments)]
pub fn grid_oracle_p1(
    lams_sr: &[f64],
    lams_rd: &[f64],
    rho_1: f64,
    rho_2: f64,
    p_s: f64,
    p_r: f64,
    spec: Objective,
    resolution: usize,
) -> Result<GridOracleResult> {
    let gains = two_hop_gains(lams_sr, lams_rd, rho_1, rho_2)?;
    let k = check_chain(&gains, &[p_s, p_r])?;
    if k > 3 {
        return Err(invalid(format!("grid oracle supports at most 3 streams, got {k}")));
    }
    if resolution == 0 {
        return Err(invalid("resolution must be positive"));
    }
    let branch = spec.dispatch(false, false)?;
    let grid = compositions(resolution, k);
    let step = 1.0 / resolution as f64;
    let points: Vec<Vec<f64>> = grid
        .iter()
        .map(|c| c.iter().map(|&n| n as f64 * step).collect())
        .collect();

    let mut best: Option<(f64, usize, usize)> = None;
    for (i, fa) in points.iter().enumerate() {
        let a: Vec<f64> = fa.iter().map(|f| f * p_s).collect();
        for (j, fb) in points.iter().enumerate() {
            let b: Vec<f64> = fb.iter().map(|f| f * p_r).collect();
            let mses = chain_mses(&gains, &[a.clone(), b]);
            let value = branch_objective(spec, branch, &mses)?;
            if best.is_none_or(|(v, _, _)| value < v) {
                best = Some((value, i, j));
            }
        }
    }
    let (objective, i, j) = best.expect("grid is non-empty");
    Ok(GridOracleResult {
        allocation: PowerAllocation {
            a: points[i].iter().map(|f| f * p_s).collect(),
            b: points[j].iter().map(|f| f * p_r).collect(),
            p_s,
            p_r,
        },
        objective,
        evaluated: points.len() * points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_stream_takes_whole_budget() {
        let out = alternating_power_allocation(&[2.0], &[0.7], 0.1, 0.2, 1.5, 0.5, Objective::SumMse, None)
            .unwrap();
        assert!((out.allocation.a[0] - 1.5).abs() < 1e-15);
        assert!((out.allocation.b[0] - 0.5).abs() < 1e-15);
        assert_eq!(out.iterations, 1);
        let grid = grid_oracle_p1(&[2.0], &[0.7], 0.1, 0.2, 1.5, 0.5, Objective::SumMse, 10).unwrap();
        assert_eq!(grid.allocation.a, vec![1.5]);
    }

    #[test]
    fn equal_gains_split_uniformly() {
        for criterion in [
            AllocationCriterion::SumMse,
            AllocationCriterion::LogMse,
            AllocationCriterion::NegLogSinr,
        ] {
            let x = conditional_waterfill(&[0.5; 3], &[1.0; 3], &[1.0; 3], 0.1, 0.1, 1.2, criterion)
                .unwrap();
            for v in x {
                assert!((v - 0.4).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dead_stream_gets_nothing() {
        let x = conditional_waterfill(
            &[0.5, 0.5],
            &[1.0, 0.0],
            &[1.0, 1.0],
            0.1,
            0.1,
            1.0,
            AllocationCriterion::SumMse,
        )
        .unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn sum_mse_waterfill_satisfies_kkt() {
        let (rho, budget) = (0.1, 1.0);
        let lams_own = [2.0, 1.0, 0.4];
        let lams_other = [1.5, 0.5, 0.9];
        let b = [0.3, 0.5, 0.2];
        let a = conditional_waterfill(&b, &lams_own, &lams_other, rho, rho, budget, AllocationCriterion::SumMse)
            .unwrap();
        assert!((a.iter().sum::<f64>() - budget).abs() < 1e-12);
        // derivative of stream MSE w.r.t. own power, single-variance form
        let slope = |k: usize| {
            let (x, y) = (a[k] * lams_own[k] + rho, b[k] * lams_other[k]);
            rho * lams_own[k] * y / (x * x * (y + rho))
        };
        let active: Vec<usize> = (0..3).filter(|&k| a[k] > 0.0).collect();
        for &k in &active[1..] {
            assert!((slope(k) - slope(active[0])).abs() < 1e-8 * slope(active[0]));
        }
    }

    #[test]
    fn alternating_is_monotone_and_beats_uniform() {
        let (lsr, lrd) = ([2.0, 1.0], [1.5, 0.5]);
        for spec in [Objective::SumMse, Objective::MutualInfo, Objective::SumSinr, Objective::ProdSinr] {
            let out = alternating_power_allocation(&lsr, &lrd, 0.1, 0.1, 1.0, 1.0, spec, None).unwrap();
            for w in out.history.windows(2) {
                assert!(w[1] <= w[0] + 1e-12);
            }
            assert!(out.objective <= out.history[0]);
            assert!((out.allocation.a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!((out.allocation.b.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_refinement_never_hurts() {
        let coarse = grid_oracle_p1(&[2.0, 1.0], &[1.5, 0.5], 0.1, 0.1, 1.0, 1.0, Objective::SumMse, 20).unwrap();
        let fine = grid_oracle_p1(&[2.0, 1.0], &[1.5, 0.5], 0.1, 0.1, 1.0, 1.0, Objective::SumMse, 40).unwrap();
        assert!(fine.objective <= coarse.objective);
        assert!(grid_oracle_p1(&[1.0; 4], &[1.0; 4], 0.1, 0.1, 1.0, 1.0, Objective::SumMse, 4).is_err());
    }

    #[test]
    fn infeasible_init_is_rejected() {
        let bad = PowerAllocation {
            a: vec![1.0, 1.0],
            b: vec![0.5, 0.5],
            p_s: 1.0,
            p_r: 1.0,
        };
        let r = alternating_power_allocation(&[1.0, 1.0], &[1.0, 1.0], 0.1, 0.1, 1.0, 1.0, Objective::SumMse, Some(&bad));
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }
}
