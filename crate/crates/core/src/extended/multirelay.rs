//! `Q` parallel amplify-and-forward relays between one source and one
//! destination, with a block-diagonal joint relay matrix.

use serde::{Deserialize, Serialize};

use crate::channel::{rayleigh_channel, TwoHopChannel};
use crate::error::{invalid, mismatch, numerical, Result};
use crate::linalg::{self, c, CMat};
use crate::linear::allocation::AllocationCriterion;
use crate::linear::{AllocationOptions, ChainProblem};
use crate::mse::{self, TransceiverDesign};
use crate::objectives::{DesignBranch, Objective};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRelayChannel {
    /// `H_SRq`, each `N_R x N_S`.
    #[serde(with = "super::serde_mats")]
    pub h_sr: Vec<CMat>,
    /// `H_RqD`, each `N_D x N_R`.
    #[serde(with = "super::serde_mats")]
    pub h_rd: Vec<CMat>,
    pub rho_1: f64,
    pub rho_2: f64,
    pub num_streams: usize,
}

impl MultiRelayChannel {
    pub fn new(h_sr: Vec<CMat>, h_rd: Vec<CMat>, rho_1: f64, rho_2: f64, num_streams: usize) -> Result<Self> {
        let ch = Self {
            h_sr,
            h_rd,
            rho_1,
            rho_2,
            num_streams,
        };
        ch.validate()?;
        Ok(ch)
    }

    pub fn rayleigh<R: Rng + ?Sized>(
        q: usize,
        n_s: usize,
        n_r: usize,
        n_d: usize,
        k: usize,
        rho_1: f64,
        rho_2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut h_sr = Vec::with_capacity(q);
        let mut h_rd = Vec::with_capacity(q);
        for _ in 0..q {
            h_sr.push(rayleigh_channel(n_r, n_s, rng));
            h_rd.push(rayleigh_channel(n_d, n_r, rng));
        }
        Self::new(h_sr, h_rd, rho_1, rho_2, k)
    }

    pub fn num_relays(&self) -> usize {
        self.h_sr.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_sr.is_empty() || self.h_sr.len() != self.h_rd.len() {
            return Err(mismatch("one source-relay and one relay-destination matrix per relay"));
        }
        let (n_r, n_s) = self.h_sr[0].shape();
        let n_d = self.h_rd[0].nrows();
        for (sr, rd) in self.h_sr.iter().zip(&self.h_rd) {
            if sr.shape() != (n_r, n_s) || rd.shape() != (n_d, n_r) {
                return Err(mismatch("relays must share antenna counts"));
            }
        }
        self.stacked().map(|_| ())
    }

    /// `H_SR = [H_SR1; ...; H_SRQ]` and `H_RD = [H_R1D ... H_RQD]` as a
    /// single two-hop link whose relay has `Q N_R` antennas.
    pub fn stacked(&self) -> Result<TwoHopChannel> {
        if self.h_sr.is_empty() {
            return Err(mismatch("no relays"));
        }
        let n_r = self.h_sr[0].nrows();
        let q = self.h_sr.len();
        let mut sr = CMat::zeros(q * n_r, self.h_sr[0].ncols());
        let mut rd = CMat::zeros(self.h_rd[0].nrows(), q * n_r);
        for i in 0..q {
            sr.rows_mut(i * n_r, n_r).copy_from(&self.h_sr[i]);
            rd.columns_mut(i * n_r, n_r).copy_from(&self.h_rd[i]);
        }
        TwoHopChannel::new(sr, rd, self.rho_1, self.rho_2, self.num_streams)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiRelaySolution {
    /// Design on the stacked channel; `f` is block-diagonal.
    pub design: TransceiverDesign,
    #[serde(with = "super::serde_mats")]
    pub relay_blocks: Vec<CMat>,
    /// `||H_RD F - T||_F / ||T||_F` of the block fit before rescaling.
    pub fit_residual: f64,
    pub relay_powers: Vec<f64>,
    pub stream_mses: Vec<f64>,
    pub sum_mse: f64,
}

fn pinv(m: &CMat) -> Result<CMat> {
    let svd = m.clone().svd(true, true);
    let tol = 1e-12 * svd.singular_values.max().max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(tol).map_err(|e| numerical(e.to_string()))
}

/// Sum-MSE design: the stacked-channel structure `U = V_SR Lambda_U^{1/2}`
/// with `P = I`, then each relay block fitted in least squares to the target
/// product `H_RD F_target`, rescaled to the total relay budget, and the
/// Wiener receiver of the resulting matrices.
pub fn multirelay_design(
    channel: &MultiRelayChannel,
    p_s: f64,
    p_r_total: f64,
    opts: &AllocationOptions,
) -> Result<MultiRelaySolution> {
    channel.validate()?;
    if !(p_s > 0.0 && p_r_total > 0.0) {
        return Err(invalid("power budgets must be positive"));
    }
    let stacked = channel.stacked()?;
    let problem = ChainProblem::two_hop(&stacked, p_s, p_r_total)?;
    let criterion = AllocationCriterion::for_objective(Objective::SumMse, DesignBranch::LinearDiagonal);
    let alloc = problem.allocate(criterion, opts)?;
    let built = problem.build(&alloc.powers, None)?;
    let u = built.nodes[0].clone();
    let f_target = &built.nodes[1];

    let n_r = channel.h_sr[0].nrows();
    let q = channel.num_relays();
    let target = &stacked.h_rd * f_target;
    let mut blocks = Vec::with_capacity(q);
    let mut f = CMat::zeros(q * n_r, q * n_r);
    for i in 0..q {
        let t_q = target.columns(i * n_r, n_r).into_owned();
        let block = pinv(&channel.h_rd[i])? * t_q;
        f.view_mut((i * n_r, i * n_r), (n_r, n_r)).copy_from(&block);
        blocks.push(block);
    }
    let fit_residual = linalg::fro(&(&stacked.h_rd * &f - &target)) / linalg::fro(&target).max(f64::MIN_POSITIVE);

    let power = mse::relay_tx_power(&f, &stacked.h_sr, &u, stacked.rho_1)?;
    if !(power > 0.0) {
        return Err(numerical("block fit produced a zero relay matrix"));
    }
    let scale = (p_r_total / power).sqrt();
    f *= c(scale);
    for b in &mut blocks {
        *b *= c(scale);
    }
    let relay_powers = blocks
        .iter()
        .zip(&channel.h_sr)
        .map(|(b, h)| mse::relay_tx_power(b, h, &u, stacked.rho_1))
        .collect::<Result<Vec<_>>>()?;

    let x = mse::equivalent_channel(&stacked.h_sr, &stacked.h_rd, &f) * &u;
    let cov = mse::noise_covariance(&stacked.h_rd, &f, stacked.rho_1, stacked.rho_2)?;
    let g = mse::wiener_general(&x, &cov)?;
    let e = mse::mse_general(&g, &x, &cov)?;
    let stream_mses = linalg::diag_re(&e);
    let sum_mse = stream_mses.iter().sum();
    Ok(MultiRelaySolution {
        design: TransceiverDesign {
            u,
            f,
            g,
            s_rotation: None,
            backward: None,
        },
        relay_blocks: blocks,
        fit_residual,
        relay_powers,
        stream_mses,
        sum_mse,
    })
}
