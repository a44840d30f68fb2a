//! Linear-receiver designs: objective-driven design (P1), QoS power
//! minimization (P2) and the naive amplify-and-forward baseline.

pub mod allocation;
pub mod qos;

use serde::{Deserialize, Serialize};

use crate::channel::{svd_sorted, truncate_svd, TruncatedSvd, TwoHopChannel};
use crate::error::{invalid, mismatch, Error, Result};
use crate::factors;
use crate::linalg::{self, c, real_diag, CMat};
use crate::mse::{self, PowerAllocation, TransceiverDesign};
use crate::objectives::{DesignBranch, Objective};

pub use allocation::{
    alternating_chain_allocation, alternating_power_allocation, chain_allocation,
    conditional_waterfill, grid_oracle_p1, AllocationCriterion, AllocationOptions,
    AllocationOutcome, ChainAllocation, GridOracleResult,
};
pub use qos::{
    design_p2, grid_oracle_p2, per_stream_min_power, sa_design_p2, P2Solution, QoSTargets,
};

/// Singular values below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

/// Channel-matched geometry of an amplify-and-forward chain: the truncated
/// SVD of every hop, its eigenvalues, and the noise and budget of every node.
#[derive(Debug, Clone)]
pub(crate) struct ChainProblem {
    pub hops: Vec<CMat>,
    pub noise: Vec<f64>,
    pub budgets: Vec<f64>,
    pub k: usize,
    pub svds: Vec<TruncatedSvd>,
    pub lams: Vec<Vec<f64>>,
}

/// Matrices of a chain design: one matrix per transmitting node, the
/// end-to-end signal matrix `x`, destination noise covariance and receiver.
#[derive(Debug, Clone)]
pub(crate) struct ChainBuild {
    pub nodes: Vec<CMat>,
    pub x: CMat,
    pub cov: CMat,
    pub g: CMat,
}

impl ChainProblem {
    pub fn new(hops: Vec<CMat>, noise: Vec<f64>, budgets: Vec<f64>, k: usize) -> Result<Self> {
        if hops.len() < 2 || noise.len() != hops.len() || budgets.len() != hops.len() {
            return Err(mismatch("a chain needs at least two hops with one noise and one budget each"));
        }
        for w in hops.windows(2) {
            if w[1].ncols() != w[0].nrows() {
                return Err(mismatch(format!(
                    "hop with {} outputs feeds a hop with {} inputs",
                    w[0].nrows(),
                    w[1].ncols()
                )));
            }
        }
        if noise.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(invalid("noise variances must be positive"));
        }
        if budgets.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(invalid("power budgets must be positive"));
        }
        let k_max = hops.iter().map(|h| h.nrows().min(h.ncols())).min().unwrap_or(0);
        if k == 0 || k > k_max {
            return Err(invalid(format!("stream count {k} outside 1..={k_max}")));
        }
        let mut svds = Vec::with_capacity(hops.len());
        let mut lams = Vec::with_capacity(hops.len());
        for (i, h) in hops.iter().enumerate() {
            let svd = svd_sorted(h)?;
            let top = svd.singular_values[0];
            if !(top > 0.0) {
                return Err(Error::DegenerateChannel(format!("hop {} is the zero matrix", i + 1)));
            }
            let t = truncate_svd(&svd, k)?;
            lams.push(
                t.singular_values
                    .iter()
                    .map(|&s| if s > RANK_TOL * top { s * s } else { 0.0 })
                    .collect(),
            );
            svds.push(t);
        }
        Ok(Self {
            hops,
            noise,
            budgets,
            k,
            svds,
            lams,
        })
    }

    pub fn two_hop(channel: &TwoHopChannel, p_s: f64, p_r: f64) -> Result<Self> {
        channel.validate()?;
        Self::new(
            vec![channel.h_sr.clone(), channel.h_rd.clone()],
            vec![channel.rho_1, channel.rho_2],
            vec![p_s, p_r],
            channel.num_streams,
        )
    }

    /// Per-hop SNR gains `lambda / rho`.
    pub fn gains(&self) -> Vec<Vec<f64>> {
        self.lams
            .iter()
            .zip(&self.noise)
            .map(|(l, r)| l.iter().map(|v| v / r).collect())
            .collect()
    }

    pub fn allocate(&self, criterion: AllocationCriterion, opts: &AllocationOptions) -> Result<ChainAllocation> {
        allocation::chain_allocation(&self.gains(), &self.budgets, criterion, opts)
    }

    /// Eigen-MSEs (before any rotation) of the channel-matched design.
    pub fn eigen_mses(&self, powers: &[Vec<f64>]) -> Vec<f64> {
        allocation::chain_mses(&self.gains(), powers)
    }

    /// Node matrices for per-node stream powers `powers`:
    /// `F_0 = V_1 diag(sqrt(x_0)) S^H`, `F_i = V_{i+1} diag(sqrt(lambda_F)) Omega_i^H`
    /// with `lambda_F = x_i / (lambda_i x_{i-1} + rho_i)`, and the Wiener receiver.
    pub fn build(&self, powers: &[Vec<f64>], s: Option<&CMat>) -> Result<ChainBuild> {
        let l = self.hops.len();
        if powers.len() != l || powers.iter().any(|p| p.len() != self.k) {
            return Err(mismatch("power allocation does not match the chain"));
        }
        let mut nodes = Vec::with_capacity(l);
        let roots: Vec<f64> = powers[0].iter().map(|a| a.sqrt()).collect();
        let mut u = &self.svds[0].right * real_diag(&roots);
        if let Some(s) = s {
            if s.shape() != (self.k, self.k) {
                return Err(mismatch("rotation is not KxK"));
            }
            u *= s.adjoint();
        }
        nodes.push(u);
        for i in 1..l {
            let lam_f: Vec<f64> = (0..self.k)
                .map(|s| {
                    let received = self.lams[i - 1][s] * powers[i - 1][s] + self.noise[i - 1];
                    (powers[i][s] / received).sqrt()
                })
                .collect();
            nodes.push(&self.svds[i].right * real_diag(&lam_f) * self.svds[i - 1].left.adjoint());
        }

        // End-to-end signal matrix and the destination covariance of every
        // injected noise term.
        let mut x = nodes[0].clone();
        for i in 0..l {
            x = &self.hops[i] * x;
            if i + 1 < l {
                x = &nodes[i + 1] * x;
            }
        }
        let n_out = self.hops[l - 1].nrows();
        let mut cov = linalg::identity(n_out) * c(self.noise[l - 1]);
        let mut m = linalg::identity(n_out);
        for i in (1..l).rev() {
            m = m * &self.hops[i] * &nodes[i];
            cov += &m * m.adjoint() * c(self.noise[i - 1]);
        }
        let cov = linalg::hermitian_part(&cov);
        let g = mse::wiener_general(&x, &cov)?;
        Ok(ChainBuild { nodes, x, cov, g })
    }
}

/// Options of the P1 designs.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct P1Options {
    pub allocation: AllocationOptions,
    /// Treat `SumMSE` as Schur-convex (equalizing rotation) instead of
    /// Schur-concave (diagonal design). Both give the same objective.
    pub sum_mse_as_convex: bool,
}

impl P1Options {
    /// Uniform start plus `restarts` random starts seeded by `seed`.
    pub fn with_restarts(restarts: usize, seed: u64) -> Self {
        Self {
            allocation: AllocationOptions {
                restarts,
                seed,
                ..Default::default()
            },
            sum_mse_as_convex: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct P1Solution {
    pub design: TransceiverDesign,
    pub allocation: PowerAllocation,
    pub objective: Objective,
    pub branch: DesignBranch,
    /// `objective` evaluated on the diagonal of the MSE matrix recomputed
    /// from the design matrices.
    pub objective_value: f64,
    pub stream_mses: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Allocation criterion after each conditional update.
    pub history: Vec<f64>,
}

impl P1Solution {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| invalid(e.to_string()))
    }
}

/// Assemble a two-hop P1 solution from a finished chain allocation.
pub(crate) fn finish_p1(
    problem: &ChainProblem,
    spec: Objective,
    branch: DesignBranch,
    alloc: &ChainAllocation,
) -> Result<P1Solution> {
    let s = match branch {
        DesignBranch::LinearDiagonal => None,
        DesignBranch::LinearRotation => {
            let m = problem.eigen_mses(&alloc.powers);
            Some(factors::mean_equalizing_rotation(&m)?.s)
        }
        DesignBranch::Dfe => {
            return Err(Error::Dispatch {
                objective: spec.name().into(),
                branch: "linear".into(),
            })
        }
    };
    let built = problem.build(&alloc.powers, s.as_ref())?;
    let e = mse::mse_general(&built.g, &built.x, &built.cov)?;
    let stream_mses = linalg::diag_re(&e);
    let objective_value = spec.evaluate(&stream_mses)?;
    let mut nodes = built.nodes.into_iter();
    let design = TransceiverDesign {
        u: nodes.next().expect("source node"),
        f: nodes.next().expect("relay node"),
        g: built.g,
        s_rotation: s,
        backward: None,
    };
    Ok(P1Solution {
        design,
        allocation: PowerAllocation {
            a: alloc.powers[0].clone(),
            b: alloc.powers[1].clone(),
            p_s: problem.budgets[0],
            p_r: problem.budgets[1],
        },
        objective: spec,
        branch,
        objective_value,
        stream_mses,
        converged: alloc.converged,
        iterations: alloc.iterations,
        history: alloc.history.clone(),
    })
}

/// Objective-driven linear design: channel-matched `U` and `F`, Wiener
/// receiver, identity rotation for Schur-concave objectives and an
/// MSE-equalizing rotation for Schur-convex ones.
pub fn design_p1(
    channel: &TwoHopChannel,
    spec: Objective,
    p_s: f64,
    p_r: f64,
    opts: &P1Options,
) -> Result<P1Solution> {
    let problem = ChainProblem::two_hop(channel, p_s, p_r)?;
    let branch = spec.dispatch(false, opts.sum_mse_as_convex)?;
    let criterion = AllocationCriterion::for_objective(spec, branch);
    let alloc = problem.allocate(criterion, &opts.allocation)?;
    finish_p1(&problem, spec, branch, &alloc)
}

/// Naive amplify-and-forward: `U = sqrt(P_S / N_S) [I_K; 0]`, `F = c I` with
/// `c` meeting the relay budget exactly, Wiener receiver.
pub fn naf_design(channel: &TwoHopChannel, p_s: f64, p_r: f64) -> Result<TransceiverDesign> {
    channel.validate()?;
    if !(p_s > 0.0 && p_r > 0.0) {
        return Err(invalid("power budgets must be positive"));
    }
    let (n_s, n_r, k) = (channel.n_s(), channel.n_r(), channel.num_streams);
    let u = CMat::from_fn(n_s, k, |i, j| if i == j { c((p_s / n_s as f64).sqrt()) } else { c(0.0) });
    let unit = mse::relay_tx_power(&linalg::identity(n_r), &channel.h_sr, &u, channel.rho_1)?;
    let f = linalg::identity(n_r) * c((p_r / unit).sqrt());
    let x = mse::equivalent_channel(&channel.h_sr, &channel.h_rd, &f) * &u;
    let cov = mse::noise_covariance(&channel.h_rd, &f, channel.rho_1, channel.rho_2)?;
    let g = mse::wiener_general(&x, &cov)?;
    Ok(TransceiverDesign {
        u,
        f,
        g,
        s_rotation: None,
        backward: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs, off_diagonal_mass};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(seed: u64, k: usize) -> TwoHopChannel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TwoHopChannel::rayleigh(3, 3, k, 0.1, 0.05, &mut rng).unwrap()
    }

    #[test]
    fn concave_design_diagonalizes() {
        for seed in 0..5 {
            let ch = random_channel(seed, 2);
            for spec in [Objective::MutualInfo, Objective::SumMse, Objective::ProdSinr, Objective::SumSinr] {
                let sol = design_p1(&ch, spec, 1.0, 1.0, &P1Options::default()).unwrap();
                let overall = sol.design.overall(&ch);
                assert!(off_diagonal_mass(&overall) < 1e-18, "{spec}");
                let problem = ChainProblem::two_hop(&ch, 1.0, 1.0).unwrap();
                for k in 0..2 {
                    let expect = mse::stream_mse_split(
                        sol.allocation.a[k],
                        sol.allocation.b[k],
                        problem.lams[0][k],
                        problem.lams[1][k],
                        ch.rho_1,
                        ch.rho_2,
                    );
                    assert!((sol.stream_mses[k] - expect).abs() < 1e-10);
                }
                assert!((sol.design.source_power() - 1.0).abs() < 1e-9);
                assert!((sol.design.relay_power(&ch).unwrap() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn convex_design_equalizes() {
        let ch = random_channel(3, 2);
        let sol = design_p1(&ch, Objective::MaxMse, 1.0, 1.0, &P1Options::default()).unwrap();
        let e = sol.design.error_covariance(&ch).unwrap();
        let d = linalg::diag_re(&e);
        assert!((d[0] - d[1]).abs() < 1e-10);
        let (eig, _) = linalg::hermitian_eig(&e);
        assert!((d[0] - eig.iter().sum::<f64>() / 2.0).abs() < 1e-10);
        assert_eq!(sol.branch, DesignBranch::LinearRotation);
    }

    #[test]
    fn single_stream_gets_full_budgets() {
        let ch = random_channel(9, 1);
        let sol = design_p1(&ch, Objective::SumMse, 1.0, 2.0, &P1Options::default()).unwrap();
        assert!((sol.allocation.a[0] - 1.0).abs() < 1e-15);
        assert!((sol.allocation.b[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn zero_channel_is_degenerate() {
        let ch = TwoHopChannel::new(CMat::zeros(2, 2), linalg::identity(2), 0.1, 0.1, 1).unwrap();
        assert!(matches!(
            design_p1(&ch, Objective::SumMse, 1.0, 1.0, &P1Options::default()),
            Err(Error::DegenerateChannel(_))
        ));
    }

    #[test]
    fn naf_meets_relay_budget() {
        let ch = random_channel(4, 2);
        let d = naf_design(&ch, 1.0, 1.0).unwrap();
        assert!((d.relay_power(&ch).unwrap() - 1.0).abs() < 1e-10);

        let id = TwoHopChannel::new(linalg::identity(3), linalg::identity(3), 0.1, 0.1, 3).unwrap();
        let m = naf_design(&id, 1.0, 1.0).unwrap().stream_mses(&id).unwrap();
        assert!((m[0] - m[1]).abs() < 1e-14 && (m[1] - m[2]).abs() < 1e-14);
    }

    #[test]
    fn p1_beats_naf() {
        for seed in 100..130 {
            let ch = random_channel(seed, 2);
            let naf = naf_design(&ch, 1.0, 1.0).unwrap().stream_mses(&ch).unwrap();
            for spec in [Objective::SumMse, Objective::MaxMse, Objective::MutualInfo] {
                let p1 = design_p1(&ch, spec, 1.0, 1.0, &P1Options::default()).unwrap();
                assert!(p1.objective_value <= spec.evaluate(&naf).unwrap() + 1e-12, "{spec}");
            }
        }
    }

    #[test]
    fn solution_round_trips_through_json() {
        let ch = random_channel(5, 2);
        let sol = design_p1(&ch, Objective::MaxMse, 1.0, 1.0, &P1Options::default()).unwrap();
        let back: P1Solution = serde_json::from_str(&sol.to_json().unwrap()).unwrap();
        assert!(max_abs(&(back.design.u - &sol.design.u)) == 0.0);
        assert_eq!(back.allocation, sol.allocation);
    }
}
