//! MSE and SINR analytics of the linear two-hop model
//! `y = G H_RD F (H_SR U s + n_R) + G n_D`.
//!
//! The functions that take `(r_n, rho)` follow the single-variance convention
//! where the destination noise covariance is `rho * R_n`. Per-link variances
//! are handled by the `*_general` forms that take the full noise covariance
//! `C = rho_1 H_RD F F^H H_RD^H + rho_2 I`.

use serde::{Deserialize, Serialize};

use crate::channel::TwoHopChannel;
use crate::error::{invalid, mismatch, Result};
use crate::linalg::{self, c, serde_cmat, CMat};

/// Source precoder `u` (`N_S x K`), relay matrix `f` (`N_R x N_R`) and
/// receiver `g` (`K x N_S`). Non-linear designs also carry the rotation `S`
/// and the strictly upper triangular feedback matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransceiverDesign {
    #[serde(with = "serde_cmat")]
    pub u: CMat,
    #[serde(with = "serde_cmat")]
    pub f: CMat,
    #[serde(with = "serde_cmat")]
    pub g: CMat,
    #[serde(with = "serde_cmat::option", default)]
    pub s_rotation: Option<CMat>,
    #[serde(with = "serde_cmat::option", default)]
    pub backward: Option<CMat>,
}

impl TransceiverDesign {
    pub fn validate(&self) -> Result<()> {
        let k = self.u.ncols();
        if self.g.nrows() != k {
            return Err(mismatch(format!(
                "receiver has {} rows for {k} streams",
                self.g.nrows()
            )));
        }
        if let Some(s) = &self.s_rotation {
            if s.shape() != (k, k) || linalg::unitarity_error(s) > 1e-10 {
                return Err(invalid("rotation is not a KxK unitary matrix"));
            }
        }
        if let Some(b) = &self.backward {
            if b.shape() != (k, k) {
                return Err(mismatch("backward matrix is not KxK"));
            }
            for j in 0..k {
                for i in j..k {
                    if b[(i, j)] != c(0.0) {
                        return Err(invalid("backward matrix is not strictly upper triangular"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn num_streams(&self) -> usize {
        self.u.ncols()
    }

    /// Overall matrix `G H_RD F H_SR U`.
    pub fn overall(&self, channel: &TwoHopChannel) -> CMat {
        &self.g * equivalent_channel(&channel.h_sr, &channel.h_rd, &self.f) * &self.u
    }

    /// Decision-point MSE matrix of this design on `channel`. For designs with
    /// a feedback matrix this is the error covariance of the DFE under correct
    /// past decisions, `(G H U - B - I)(...)^H + G C G^H`.
    pub fn error_covariance(&self, channel: &TwoHopChannel) -> Result<CMat> {
        let x = equivalent_channel(&channel.h_sr, &channel.h_rd, &self.f) * &self.u;
        let cov = noise_covariance(&channel.h_rd, &self.f, channel.rho_1, channel.rho_2)?;
        let k = self.num_streams();
        let mut gain = &self.g * &x;
        if let Some(b) = &self.backward {
            gain -= b;
        }
        let err = gain - linalg::identity(k);
        Ok(linalg::hermitian_part(
            &(&err * err.adjoint() + &self.g * cov * self.g.adjoint()),
        ))
    }

    pub fn stream_mses(&self, channel: &TwoHopChannel) -> Result<Vec<f64>> {
        Ok(linalg::diag_re(&self.error_covariance(channel)?))
    }

    pub fn source_power(&self) -> f64 {
        trace_gram(&self.u)
    }

    pub fn relay_power(&self, channel: &TwoHopChannel) -> Result<f64> {
        relay_tx_power(&self.f, &channel.h_sr, &self.u, channel.rho_1)
    }
}

/// Per-stream source powers `a` and relay powers `b` with their budgets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub p_s: f64,
    pub p_r: f64,
}

impl PowerAllocation {
    pub fn new(a: Vec<f64>, b: Vec<f64>, p_s: f64, p_r: f64) -> Result<Self> {
        let alloc = Self { a, b, p_s, p_r };
        alloc.validate()?;
        Ok(alloc)
    }

    pub fn uniform(k: usize, p_s: f64, p_r: f64) -> Self {
        Self {
            a: vec![p_s / k as f64; k],
            b: vec![p_r / k as f64; k],
            p_s,
            p_r,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.a.len() != self.b.len() {
            return Err(mismatch("source and relay allocations differ in length"));
        }
        if self.a.iter().chain(&self.b).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(invalid("powers must be finite and non-negative"));
        }
        if self.a.iter().sum::<f64>() > self.p_s + 1e-9 {
            return Err(invalid("source budget exceeded"));
        }
        if self.b.iter().sum::<f64>() > self.p_r + 1e-9 {
            return Err(invalid("relay budget exceeded"));
        }
        Ok(())
    }

    pub fn num_streams(&self) -> usize {
        self.a.len()
    }
}

fn trace_gram(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `H = H_RD F H_SR`.
pub fn equivalent_channel(h_sr: &CMat, h_rd: &CMat, f: &CMat) -> CMat {
    h_rd * f * h_sr
}

/// Normalized noise covariance `R_n = H_RD F F^H H_RD^H + I`.
pub fn effective_noise_cov(h_rd: &CMat, f: &CMat) -> Result<CMat> {
    noise_covariance(h_rd, f, 1.0, 1.0)
}

/// Destination noise covariance `rho_1 H_RD F F^H H_RD^H + rho_2 I`.
pub fn noise_covariance(h_rd: &CMat, f: &CMat, rho_1: f64, rho_2: f64) -> Result<CMat> {
    if h_rd.ncols() != f.nrows() {
        return Err(mismatch(format!(
            "H_RD has {} columns, F has {} rows",
            h_rd.ncols(),
            f.nrows()
        )));
    }
    let t = h_rd * f;
    let n = h_rd.nrows();
    Ok(linalg::hermitian_part(
        &(&t * t.adjoint() * c(rho_1) + linalg::identity(n) * c(rho_2)),
    ))
}

/// Wiener receiver `G = X^H (X X^H + C)^{-1}` for effective channel `X`
/// (`N x K`) and noise covariance `C`.
pub fn wiener_general(x: &CMat, noise_cov: &CMat) -> Result<CMat> {
    if noise_cov.nrows() != x.nrows() {
        return Err(mismatch("noise covariance does not match channel rows"));
    }
    let a = linalg::hermitian_part(&(x * x.adjoint() + noise_cov));
    Ok(linalg::solve_hpd(&a, x)?.adjoint())
}

/// MSE matrix `(G X - I)(G X - I)^H + G C G^H` for an arbitrary receiver.
pub fn mse_general(g: &CMat, x: &CMat, noise_cov: &CMat) -> Result<CMat> {
    if g.ncols() != x.nrows() || g.nrows() != x.ncols() || noise_cov.nrows() != x.nrows() {
        return Err(mismatch("receiver, channel and noise covariance are not conformable"));
    }
    let err = g * x - linalg::identity(x.ncols());
    Ok(linalg::hermitian_part(
        &(&err * err.adjoint() + g * noise_cov * g.adjoint()),
    ))
}

/// MMSE matrix `(I + X^H C^{-1} X)^{-1}`.
pub fn mmse_general(x: &CMat, noise_cov: &CMat) -> Result<CMat> {
    if noise_cov.nrows() != x.nrows() {
        return Err(mismatch("noise covariance does not match channel rows"));
    }
    let y = linalg::solve_hpd(noise_cov, x)?;
    let m = linalg::identity(x.ncols()) + x.adjoint() * y;
    linalg::inverse_hpd(&m)
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(invalid("noise variance must be positive"))
    }
}

fn check_precoder(h_equiv: &CMat, u: &CMat) -> Result<()> {
    if h_equiv.ncols() != u.nrows() {
        return Err(mismatch(format!(
            "equivalent channel has {} columns, precoder has {} rows",
            h_equiv.ncols(),
            u.nrows()
        )));
    }
    Ok(())
}

pub fn wiener_receiver(h_equiv: &CMat, u: &CMat, r_n: &CMat, rho: f64) -> Result<CMat> {
    check_rho(rho)?;
    check_precoder(h_equiv, u)?;
    wiener_general(&(h_equiv * u), &(r_n * c(rho)))
}

pub fn mse_matrix(g: &CMat, h_equiv: &CMat, u: &CMat, r_n: &CMat, rho: f64) -> Result<CMat> {
    check_rho(rho)?;
    check_precoder(h_equiv, u)?;
    mse_general(g, &(h_equiv * u), &(r_n * c(rho)))
}

pub fn mmse_matrix(h_equiv: &CMat, u: &CMat, r_n: &CMat, rho: f64) -> Result<CMat> {
    check_rho(rho)?;
    check_precoder(h_equiv, u)?;
    mmse_general(&(h_equiv * u), &(r_n * c(rho)))
}

pub fn sinr_from_mse(mse: f64) -> Result<f64> {
    if !(mse > 0.0 && mse <= 1.0) {
        return Err(invalid(format!("MSE {mse} outside (0, 1]")));
    }
    Ok(1.0 / mse - 1.0)
}

pub fn mse_from_sinr(sinr: f64) -> Result<f64> {
    if !(sinr >= 0.0) || !sinr.is_finite() {
        return Err(invalid(format!("SINR {sinr} must be finite and non-negative")));
    }
    Ok(1.0 / (1.0 + sinr))
}

/// Relay transmit power `tr{F (H_SR U U^H H_SR^H + rho I) F^H}`.
pub fn relay_tx_power(f: &CMat, h_sr: &CMat, u: &CMat, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    if h_sr.ncols() != u.nrows() || f.ncols() != h_sr.nrows() {
        return Err(mismatch("relay matrix, channel and precoder are not conformable"));
    }
    let signal = f * h_sr * u;
    Ok(trace_gram(&signal) + rho * trace_gram(f))
}

/// Per-stream MSE of the channel-diagonalizing design,
/// `rho (a l_sr + b l_rd + rho) / ((a l_sr + rho)(b l_rd + rho))`.
pub fn stream_mse(a: f64, b: f64, lam_sr: f64, lam_rd: f64, rho: f64) -> f64 {
    let x = a * lam_sr + rho;
    let y = b * lam_rd + rho;
    rho * (a * lam_sr + b * lam_rd + rho) / (x * y)
}

/// [`stream_mse`] with distinct relay (`rho_1`) and destination (`rho_2`)
/// noise variances.
pub fn stream_mse_split(a: f64, b: f64, lam_sr: f64, lam_rd: f64, rho_1: f64, rho_2: f64) -> f64 {
    chain_stream_mse(&[a * lam_sr / rho_1, b * lam_rd / rho_2])
}

/// MSE of a stream relayed through a chain of amplify-and-forward hops with
/// per-hop SNRs `s_i`: `1 - prod_i s_i / (1 + s_i)`.
pub fn chain_stream_mse(per_hop_snrs: &[f64]) -> f64 {
    1.0 - per_hop_snrs
        .iter()
        .map(|&s| s / (1.0 + s))
        .product::<f64>()
}
