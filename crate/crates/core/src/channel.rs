//! Channel matrices: Rayleigh generation, sorted SVD with a fixed phase
//! convention, truncation, and the Kronecker channel-estimation error model.

use nalgebra::linalg::SVD;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, mismatch, Error, Result};
use crate::linalg::{self, all_finite, serde_cmat, CMat};

/// Singular value decomposition `H = left * diag(singular_values) * right^H`
/// with singular values sorted non-increasing.
///
/// Each right singular vector is rotated so that its largest-magnitude entry
/// (first one on ties) is real and positive; the matching left vector gets the
/// same phase so the product is unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSvd {
    #[serde(with = "serde_cmat")]
    pub left: CMat,
    pub singular_values: Vec<f64>,
    #[serde(with = "serde_cmat")]
    pub right: CMat,
}

impl ChannelSvd {
    /// Squared singular values (the eigenvalues of `H^H H`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }

    pub fn reconstruct(&self) -> CMat {
        &self.left * linalg::real_diag(&self.singular_values) * self.right.adjoint()
    }

    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }
}

/// Leading `k` singular triplets of a [`ChannelSvd`].
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSvd {
    pub left: CMat,
    pub singular_values: Vec<f64>,
    pub right: CMat,
}

impl TruncatedSvd {
    pub fn eigenvalues(&self) -> Vec<f64> {
        self.singular_values.iter().map(|s| s * s).collect()
    }
}

pub fn svd_sorted(h: &CMat) -> Result<ChannelSvd> {
    if h.nrows() == 0 || h.ncols() == 0 {
        return Err(invalid("empty matrix"));
    }
    if !all_finite(h) {
        return Err(invalid("matrix has non-finite entries"));
    }
    let svd = SVD::try_new_unordered(h.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Numerical("SVD did not converge".into()))?;
    let u = svd.u.expect("left vectors requested");
    let v = svd.v_t.expect("right vectors requested").adjoint();
    let r = svd.singular_values.len();

    let mut order: Vec<usize> = (0..r).collect();
    // Stable sort keeps column order on exact ties.
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut left = CMat::zeros(h.nrows(), r);
    let mut right = CMat::zeros(h.ncols(), r);
    let mut values = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        let vcol = v.column(src);
        let mut pivot = 0;
        let mut best = -1.0;
        for (i, z) in vcol.iter().enumerate() {
            let m = z.norm();
            if m > best * (1.0 + 1e-12) {
                best = m;
                pivot = i;
            }
        }
        let phase = if best > 0.0 {
            (vcol[pivot] / best).conj()
        } else {
            Complex64::new(1.0, 0.0)
        };
        right.set_column(dst, &(vcol * phase));
        left.set_column(dst, &(u.column(src) * phase));
        values.push(svd.singular_values[src].max(0.0));
    }
    Ok(ChannelSvd {
        left,
        singular_values: values,
        right,
    })
}

pub fn truncate_svd(svd: &ChannelSvd, k: usize) -> Result<TruncatedSvd> {
    if k == 0 || k > svd.rank() {
        return Err(invalid(format!(
            "truncation order {k} outside 1..={}",
            svd.rank()
        )));
    }
    Ok(TruncatedSvd {
        left: svd.left.columns(0, k).into_owned(),
        singular_values: svd.singular_values[..k].to_vec(),
        right: svd.right.columns(0, k).into_owned(),
    })
}

/// One circularly-symmetric complex Gaussian sample with unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// I.i.d. unit-variance Rayleigh fading matrix.
pub fn rayleigh_channel<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMat {
    assert!(rows >= 1 && cols >= 1, "channel dimensions must be positive");
    // Column-major fill order is part of the reproducibility contract.
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Separable (Kronecker) covariance of a channel estimation error,
/// `Delta = sigma_row^{1/2} W psi_col^{1/2}` with `W` i.i.d. CN(0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KroneckerErrorModel {
    #[serde(with = "serde_cmat")]
    pub sigma_row: CMat,
    #[serde(with = "serde_cmat")]
    pub psi_col: CMat,
}

impl KroneckerErrorModel {
    pub fn new(sigma_row: CMat, psi_col: CMat) -> Result<Self> {
        for (name, m) in [("row", &sigma_row), ("column", &psi_col)] {
            if m.nrows() != m.ncols() {
                return Err(mismatch(format!("{name} covariance is not square")));
            }
            if !all_finite(m) {
                return Err(invalid(format!("{name} covariance has non-finite entries")));
            }
            if linalg::max_abs(&(m - m.adjoint())) > 1e-12 {
                return Err(invalid(format!("{name} covariance is not Hermitian")));
            }
            let (eig, _) = linalg::hermitian_eig(m);
            if eig.first().is_some_and(|&e| e < -1e-12) {
                return Err(invalid(format!("{name} covariance is not PSD")));
            }
        }
        Ok(Self { sigma_row, psi_col })
    }

    /// `row_scale * I_rows` and `col_scale * I_cols`.
    pub fn scaled_identity(rows: usize, cols: usize, row_scale: f64, col_scale: f64) -> Self {
        Self {
            sigma_row: CMat::identity(rows, rows) * linalg::c(row_scale),
            psi_col: CMat::identity(cols, cols) * linalg::c(col_scale),
        }
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::scaled_identity(rows, cols, 0.0, 0.0)
    }

    /// `Some(eps)` when the row covariance equals `eps * I` within 1e-12.
    pub fn row_scale(&self) -> Option<f64> {
        let n = self.sigma_row.nrows();
        let eps = self.sigma_row[(0, 0)].re;
        let target = CMat::identity(n, n) * linalg::c(eps);
        (linalg::max_abs(&(&self.sigma_row - target)) <= 1e-12).then_some(eps)
    }

    pub fn rows(&self) -> usize {
        self.sigma_row.nrows()
    }

    pub fn cols(&self) -> usize {
        self.psi_col.nrows()
    }
}

/// Precomputed square roots for repeated sampling from one model.
#[derive(Debug, Clone)]
pub struct KroneckerSampler {
    sigma_sqrt: CMat,
    psi_sqrt: CMat,
}

impl KroneckerSampler {
    pub fn new(model: &KroneckerErrorModel) -> Result<Self> {
        Ok(Self {
            sigma_sqrt: linalg::psd_sqrt(&model.sigma_row)?,
            psi_sqrt: linalg::psd_sqrt(&model.psi_col)?,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CMat {
        let w = rayleigh_channel(self.sigma_sqrt.nrows(), self.psi_sqrt.nrows(), rng);
        &self.sigma_sqrt * w * &self.psi_sqrt
    }
}

pub fn kron_error_sample<R: Rng + ?Sized>(
    model: &KroneckerErrorModel,
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Result<CMat> {
    if model.rows() != rows || model.cols() != cols {
        return Err(mismatch(format!(
            "error model is {}x{}, requested {rows}x{cols}",
            model.rows(),
            model.cols()
        )));
    }
    Ok(KroneckerSampler::new(model)?.sample(rng))
}

/// Two-hop problem instance: source-relay and relay-destination channels with
/// per-link noise variances (`rho_1` at the relay, `rho_2` at the destination).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoHopChannel {
    /// `N_R x N_S`
    #[serde(with = "serde_cmat")]
    pub h_sr: CMat,
    /// `N_S x N_R`
    #[serde(with = "serde_cmat")]
    pub h_rd: CMat,
    pub rho_1: f64,
    pub rho_2: f64,
    pub num_streams: usize,
}

impl TwoHopChannel {
    pub fn new(h_sr: CMat, h_rd: CMat, rho_1: f64, rho_2: f64, num_streams: usize) -> Result<Self> {
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

    /// Same noise variance on both links.
    pub fn with_common_noise(h_sr: CMat, h_rd: CMat, rho: f64, num_streams: usize) -> Result<Self> {
        Self::new(h_sr, h_rd, rho, rho, num_streams)
    }

    pub fn validate(&self) -> Result<()> {
        let (n_r, n_s) = self.h_sr.shape();
        if self.h_rd.ncols() != n_r {
            return Err(mismatch(format!(
                "H_SR is {n_r}x{n_s} but H_RD has {} columns",
                self.h_rd.ncols()
            )));
        }
        if !(all_finite(&self.h_sr) && all_finite(&self.h_rd)) {
            return Err(invalid("channel has non-finite entries"));
        }
        if !(self.rho_1 > 0.0 && self.rho_2 > 0.0) {
            return Err(invalid("noise variances must be positive"));
        }
        let k_max = n_r.min(n_s).min(self.h_rd.nrows());
        if self.num_streams == 0 || self.num_streams > k_max {
            return Err(invalid(format!(
                "stream count {} outside 1..={k_max}",
                self.num_streams
            )));
        }
        Ok(())
    }

    pub fn n_s(&self) -> usize {
        self.h_sr.ncols()
    }

    pub fn n_r(&self) -> usize {
        self.h_sr.nrows()
    }

    pub fn n_d(&self) -> usize {
        self.h_rd.nrows()
    }

    /// Draw an i.i.d. Rayleigh instance.
    pub fn rayleigh<R: Rng + ?Sized>(
        n_s: usize,
        n_r: usize,
        k: usize,
        rho_1: f64,
        rho_2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h_sr = rayleigh_channel(n_r, n_s, rng);
        let h_rd = rayleigh_channel(n_s, n_r, rng);
        Self::new(h_sr, h_rd, rho_1, rho_2, k)
    }
}
