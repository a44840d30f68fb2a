//! Designs that average the MSE over a Kronecker-structured channel
//! estimation error, `H = H_hat + Sigma^{1/2} W Psi^{1/2}`.

use serde::{Deserialize, Serialize};

use crate::channel::{KroneckerErrorModel, TwoHopChannel};
use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{self, c, serde_cmat, CMat};
use crate::linear::{design_p1, P1Options, P1Solution};
use crate::objectives::Objective;

/// Channel estimates with their error models and link noise variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustChannelState {
    #[serde(with = "serde_cmat")]
    pub h_sr_hat: CMat,
    #[serde(with = "serde_cmat")]
    pub h_rd_hat: CMat,
    pub err_sr: KroneckerErrorModel,
    pub err_rd: KroneckerErrorModel,
    pub rho_1: f64,
    pub rho_2: f64,
    pub num_streams: usize,
}

impl RobustChannelState {
    pub fn new(
        nominal: &TwoHopChannel,
        err_sr: KroneckerErrorModel,
        err_rd: KroneckerErrorModel,
    ) -> Result<Self> {
        let state = Self {
            h_sr_hat: nominal.h_sr.clone(),
            h_rd_hat: nominal.h_rd.clone(),
            err_sr,
            err_rd,
            rho_1: nominal.rho_1,
            rho_2: nominal.rho_2,
            num_streams: nominal.num_streams,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        self.nominal()?;
        if self.err_sr.rows() != self.h_sr_hat.nrows() || self.err_sr.cols() != self.h_sr_hat.ncols() {
            return Err(mismatch("source-relay error model does not match the estimate"));
        }
        if self.err_rd.rows() != self.h_rd_hat.nrows() || self.err_rd.cols() != self.h_rd_hat.ncols() {
            return Err(mismatch("relay-destination error model does not match the estimate"));
        }
        Ok(())
    }

    /// The estimates taken as the true channel.
    pub fn nominal(&self) -> Result<TwoHopChannel> {
        TwoHopChannel::new(
            self.h_sr_hat.clone(),
            self.h_rd_hat.clone(),
            self.rho_1,
            self.rho_2,
            self.num_streams,
        )
    }
}

fn trace_re(m: &CMat) -> f64 {
    m.trace().re
}

/// Averaged quantities shared by the MSE, receiver and power expressions.
struct Averages {
    /// Averaged relay input covariance `H_SR U U^H H_SR^H + rho_1 I`.
    relay_cov: CMat,
    /// Averaged destination covariance of the received signal.
    a: CMat,
    /// Nominal end-to-end channel times precoder.
    hu: CMat,
}

fn averages(state: &RobustChannelState, u: &CMat, f: &CMat) -> Result<Averages> {
    state.validate()?;
    let (n_r, n_s) = state.h_sr_hat.shape();
    if u.nrows() != n_s || f.shape() != (n_r, n_r) {
        return Err(mismatch("precoder or relay matrix does not match the channel"));
    }
    let uu = u * u.adjoint();
    let alpha = trace_re(&(&uu * &state.err_sr.psi_col));
    let relay_cov = &state.h_sr_hat * &uu * state.h_sr_hat.adjoint()
        + &state.err_sr.sigma_row * c(alpha)
        + linalg::identity(n_r) * c(state.rho_1);
    let fcf = f * &relay_cov * f.adjoint();
    let beta = trace_re(&(&fcf * &state.err_rd.psi_col));
    let n_d = state.h_rd_hat.nrows();
    let a = &state.h_rd_hat * &fcf * state.h_rd_hat.adjoint()
        + &state.err_rd.sigma_row * c(beta)
        + linalg::identity(n_d) * c(state.rho_2);
    let hu = &state.h_rd_hat * f * &state.h_sr_hat * u;
    Ok(Averages {
        relay_cov: linalg::hermitian_part(&relay_cov),
        a: linalg::hermitian_part(&a),
        hu,
    })
}

/// MSE matrix averaged over both estimation errors,
/// `G A G^H - G H_hat U - U^H H_hat^H G^H + I`.
pub fn averaged_mse(state: &RobustChannelState, u: &CMat, f: &CMat, g: &CMat) -> Result<CMat> {
    let av = averages(state, u, f)?;
    if g.shape() != (u.ncols(), state.h_rd_hat.nrows()) {
        return Err(mismatch("receiver does not match the channel"));
    }
    let cross = g * &av.hu;
    let e = g * &av.a * g.adjoint() - &cross - cross.adjoint() + linalg::identity(u.ncols());
    Ok(linalg::hermitian_part(&e))
}

/// Receiver minimizing the averaged MSE, `G = U^H H_hat^H A^{-1}`.
pub fn robust_wiener(state: &RobustChannelState, u: &CMat, f: &CMat) -> Result<CMat> {
    let av = averages(state, u, f)?;
    Ok(linalg::solve_hpd(&av.a, &av.hu)?.adjoint())
}

/// Relay transmit power averaged over the source-relay error,
/// `tr(F (H_hat U U^H H_hat^H + alpha Sigma_SR + rho_1 I) F^H)`.
pub fn robust_relay_power(state: &RobustChannelState, u: &CMat, f: &CMat) -> Result<f64> {
    let av = averages(state, u, f)?;
    Ok(trace_re(&(f * av.relay_cov * f.adjoint())))
}

/// Robust objective-driven design for scaled-identity row covariances
/// `Sigma = eps I`. The error terms then act as extra white noise of variance
/// `alpha eps_SR` at the relay and `beta eps_RD` at the destination, so the
/// channel-matched design of the estimates with those noise levels applies;
/// `alpha` and `beta` are iterated to a fixed point when the column
/// covariances are not scaled identities.
pub fn robust_design_p1(
    state: &RobustChannelState,
    spec: Objective,
    p_s: f64,
    p_r: f64,
    opts: &P1Options,
) -> Result<P1Solution> {
    state.validate()?;
    if !(p_s > 0.0 && p_r > 0.0) {
        return Err(invalid("power budgets must be positive"));
    }
    let (Some(eps_sr), Some(eps_rd)) = (state.err_sr.row_scale(), state.err_rd.row_scale()) else {
        return Err(Error::Unsupported(
            "robust design needs scaled-identity row covariances".into(),
        ));
    };
    let mean_diag = |m: &CMat| trace_re(m) / m.nrows() as f64;
    let mut alpha = mean_diag(&state.err_sr.psi_col) * p_s;
    let mut beta = mean_diag(&state.err_rd.psi_col) * p_r;

    let mut sol = None;
    for _ in 0..100 {
        let effective = TwoHopChannel::new(
            state.h_sr_hat.clone(),
            state.h_rd_hat.clone(),
            alpha * eps_sr + state.rho_1,
            beta * eps_rd + state.rho_2,
            state.num_streams,
        )?;
        let s = design_p1(&effective, spec, p_s, p_r, opts)?;
        let uu = &s.design.u * s.design.u.adjoint();
        let next_alpha = trace_re(&(&uu * &state.err_sr.psi_col));
        let relay_cov = &state.h_sr_hat * &uu * state.h_sr_hat.adjoint()
            + &state.err_sr.sigma_row * c(next_alpha)
            + linalg::identity(state.h_sr_hat.nrows()) * c(state.rho_1);
        let fcf = &s.design.f * relay_cov * s.design.f.adjoint();
        let next_beta = trace_re(&(fcf * &state.err_rd.psi_col));
        let change = (next_alpha - alpha).abs() + (next_beta - beta).abs();
        alpha = next_alpha;
        beta = next_beta;
        sol = Some(s);
        if change <= 1e-12 * (1.0 + alpha + beta) {
            break;
        }
    }
    let mut sol = sol.expect("at least one iteration");

    let power = robust_relay_power(state, &sol.design.u, &sol.design.f)?;
    sol.design.f *= c((p_r / power).sqrt());
    sol.design.g = robust_wiener(state, &sol.design.u, &sol.design.f)?;
    let e = averaged_mse(state, &sol.design.u, &sol.design.f, &sol.design.g)?;
    sol.stream_mses = linalg::diag_re(&e);
    sol.objective_value = spec.evaluate(&sol.stream_mses)?;
    Ok(sol)
}

/// Design that treats the estimates as the true channel.
pub fn naive_design_p1(
    state: &RobustChannelState,
    spec: Objective,
    p_s: f64,
    p_r: f64,
    opts: &P1Options,
) -> Result<P1Solution> {
    design_p1(&state.nominal()?, spec, p_s, p_r, opts)
}
