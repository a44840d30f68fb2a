//! Amplify-and-forward chains with `L` hops (`L - 1` relays).

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::factors;
use crate::linalg::{self, serde_cmat, CMat};
use crate::linear::{ChainProblem, P1Options};
use crate::linear::allocation::AllocationCriterion;
use crate::mse;
use crate::objectives::{DesignBranch, Objective};

/// Hop `i` maps node `i - 1` to node `i`; `noise[i]` is the noise variance at
/// the receiving end of hop `i` and `budgets[i]` the power of transmitting
/// node `i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHopChannel {
    #[serde(with = "super::serde_mats")]
    pub hops: Vec<CMat>,
    pub noise: Vec<f64>,
    pub budgets: Vec<f64>,
    pub num_streams: usize,
}

impl MultiHopChannel {
    pub fn new(hops: Vec<CMat>, noise: Vec<f64>, budgets: Vec<f64>, num_streams: usize) -> Result<Self> {
        let ch = Self {
            hops,
            noise,
            budgets,
            num_streams,
        };
        ch.problem()?;
        Ok(ch)
    }

    pub fn num_hops(&self) -> usize {
        self.hops.len()
    }

    pub(crate) fn problem(&self) -> Result<ChainProblem> {
        if self.hops.len() < 2 {
            return Err(invalid("a multi-hop chain needs at least two hops"));
        }
        ChainProblem::new(
            self.hops.clone(),
            self.noise.clone(),
            self.budgets.clone(),
            self.num_streams,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiHopSolution {
    /// `F_0` (source precoder) through `F_{L-1}` (last relay).
    #[serde(with = "super::serde_mats")]
    pub nodes: Vec<CMat>,
    #[serde(with = "serde_cmat")]
    pub g: CMat,
    #[serde(with = "serde_cmat::option", default)]
    pub s_rotation: Option<CMat>,
    pub branch: DesignBranch,
    /// Per-node stream powers.
    pub powers: Vec<Vec<f64>>,
    /// Transmit power of every node recomputed from the matrices.
    pub node_powers: Vec<f64>,
    pub stream_mses: Vec<f64>,
    pub objective_value: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Transmit power of every node, propagating the received covariance along
/// the chain.
pub fn node_powers(channel: &MultiHopChannel, nodes: &[CMat]) -> Result<Vec<f64>> {
    if nodes.len() != channel.hops.len() {
        return Err(invalid("one matrix per transmitting node required"));
    }
    let mut tx = &nodes[0] * nodes[0].adjoint();
    let mut out = vec![tx.trace().re];
    for i in 1..nodes.len() {
        let h = &channel.hops[i - 1];
        let received = h * &tx * h.adjoint() + linalg::identity(h.nrows()) * linalg::c(channel.noise[i - 1]);
        tx = &nodes[i] * received * nodes[i].adjoint();
        out.push(tx.trace().re);
    }
    Ok(out)
}

/// Channel-matched chain design: `F_0 = V_1 Lambda_U^{1/2} S^H`,
/// `F_i = V_{i+1} Lambda_{F_i}^{1/2} Omega_i^H`, cyclic per-node allocation
/// and Wiener receiver. For two hops this is exactly [`crate::linear::design_p1`].
pub fn multihop_design(channel: &MultiHopChannel, spec: Objective, opts: &P1Options) -> Result<MultiHopSolution> {
    let problem = channel.problem()?;
    let branch = spec.dispatch(false, opts.sum_mse_as_convex)?;
    if branch == DesignBranch::Dfe {
        return Err(Error::Unsupported("decision feedback chains".into()));
    }
    let criterion = AllocationCriterion::for_objective(spec, branch);
    let alloc = problem.allocate(criterion, &opts.allocation)?;
    let s = match branch {
        DesignBranch::LinearRotation => {
            Some(factors::mean_equalizing_rotation(&problem.eigen_mses(&alloc.powers))?.s)
        }
        _ => None,
    };
    let built = problem.build(&alloc.powers, s.as_ref())?;
    let e = mse::mse_general(&built.g, &built.x, &built.cov)?;
    let stream_mses = linalg::diag_re(&e);
    let objective_value = spec.evaluate(&stream_mses)?;
    let node_powers = node_powers(channel, &built.nodes)?;
    Ok(MultiHopSolution {
        nodes: built.nodes,
        g: built.g,
        s_rotation: s,
        branch,
        powers: alloc.powers,
        node_powers,
        stream_mses,
        objective_value,
        converged: alloc.converged,
        iterations: alloc.iterations,
    })
}
