//! Decision-feedback designs: a feedforward filter, a strictly upper
//! triangular backward matrix fed with past decisions, and a rotation that
//! gives every stream the same (or a prescribed) MSE.
//!
//! Normalization: with effective channel `X = H U` and destination noise
//! covariance `C`, the Gram matrix is `M = X^H C^{-1} X + I = L L^H` and the
//! stream MSEs under correct past decisions are `1 / [L]_kk^2`. In the
//! single-variance form `C = rho R_n` this is `rho / [L']_kk^2` with
//! `L' L'^H = U^H H^H R_n^{-1} H U + rho I`.

use serde::{Deserialize, Serialize};

use crate::channel::TwoHopChannel;
use crate::error::{invalid, mismatch, numerical, Error, Result};
use crate::factors;
use crate::linalg::{self, c, real_diag, serde_cmat, CMat};
use crate::linear::allocation::{AllocationCriterion, AllocationOptions};
use crate::linear::qos::{
    self, close_gap, min_power, optimize_eigen_mses, prefix_descent, stream_coefficients,
};
use crate::linear::{ChainBuild, ChainProblem, QoSTargets};
use crate::mse::{PowerAllocation, TransceiverDesign};
use crate::objectives::{MultiplicativeClass, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfeDesign {
    /// Transceiver with feedforward receiver, rotation and backward matrix.
    pub base: TransceiverDesign,
    /// Lower triangular factor of the Gram matrix.
    #[serde(with = "serde_cmat")]
    pub l_factor: CMat,
    /// `1 / [L]_kk`
    pub d_scale: Vec<f64>,
}

/// Backward matrix `B = D L^H - I`, factor `L` and scaling `D` from a
/// Hermitian positive definite Gram matrix.
pub fn backward_from_gram(gram: &CMat) -> Result<(CMat, CMat, Vec<f64>)> {
    let chol = linalg::cholesky_checked(gram)?;
    let l = chol.l();
    let k = l.nrows();
    let d: Vec<f64> = (0..k).map(|i| 1.0 / l[(i, i)].re).collect();
    let mut b = real_diag(&d) * l.adjoint();
    for i in 0..k {
        b[(i, i)] = c(0.0);
        for j in 0..i {
            b[(i, j)] = c(0.0);
        }
    }
    Ok((b, l, d))
}

/// Backward matrix for precoder `u`, equivalent channel `h_equiv`,
/// normalized noise covariance `r_n` and noise variance `rho`, with
/// `L L^H = U^H H^H R_n^{-1} H U + rho I`.
pub fn backward_matrix(u: &CMat, h_equiv: &CMat, r_n: &CMat, rho: f64) -> Result<(CMat, CMat, Vec<f64>)> {
    if !(rho > 0.0) {
        return Err(invalid("noise variance must be positive"));
    }
    if h_equiv.ncols() != u.nrows() || r_n.nrows() != h_equiv.nrows() {
        return Err(mismatch("precoder, channel and noise covariance are not conformable"));
    }
    let x = h_equiv * u;
    let y = linalg::solve_hpd(r_n, &x)?;
    let gram = x.adjoint() * y + linalg::identity(u.ncols()) * c(rho);
    backward_from_gram(&linalg::hermitian_part(&gram))
}

/// Turn a built linear chain (with its rotation) into a DFE design.
fn dfe_from_build(built: ChainBuild, s: CMat) -> Result<DfeDesign> {
    let y = linalg::solve_hpd(&built.cov, &built.x)?;
    let k = built.x.ncols();
    let gram = linalg::hermitian_part(&(built.x.adjoint() * y + linalg::identity(k)));
    let (b, l, d) = backward_from_gram(&gram)?;
    let g = real_diag(&d) * l.adjoint() * &built.g;
    let mut nodes = built.nodes.into_iter();
    Ok(DfeDesign {
        base: TransceiverDesign {
            u: nodes.next().expect("source node"),
            f: nodes.next().expect("relay node"),
            g,
            s_rotation: Some(s),
            backward: Some(b),
        },
        l_factor: l,
        d_scale: d,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfeP1Solution {
    pub dfe: DfeDesign,
    pub allocation: PowerAllocation,
    pub objective: Objective,
    pub objective_value: f64,
    /// Decision-point MSEs under correct past decisions.
    pub stream_mses: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Decision-feedback design for multiplicatively Schur-convex objectives:
/// product-MSE allocation and a geometric-mean rotation so that every stream
/// MSE equals the geometric mean of the eigen-MSEs.
pub fn design_dfe_p1(
    channel: &TwoHopChannel,
    spec: Objective,
    p_s: f64,
    p_r: f64,
    opts: &AllocationOptions,
) -> Result<DfeP1Solution> {
    if spec.multiplicative_class() != MultiplicativeClass::SchurConvex {
        return Err(Error::Dispatch {
            objective: spec.name().into(),
            branch: "decision-feedback".into(),
        });
    }
    let problem = ChainProblem::two_hop(channel, p_s, p_r)?;
    let alloc = problem.allocate(AllocationCriterion::LogMse, opts)?;
    dfe_p1_from_allocation(&problem, channel, spec, &alloc.powers, alloc.converged, alloc.iterations)
}

pub(crate) fn dfe_p1_from_allocation(
    problem: &ChainProblem,
    channel: &TwoHopChannel,
    spec: Objective,
    powers: &[Vec<f64>],
    converged: bool,
    iterations: usize,
) -> Result<DfeP1Solution> {
    let m = problem.eigen_mses(powers);
    let sigma: Vec<f64> = m.iter().map(|v| 1.0 / v.sqrt()).collect();
    let s = factors::gmd(&sigma)?.p.adjoint();
    let built = problem.build(powers, Some(&s))?;
    let dfe = dfe_from_build(built, s)?;
    let stream_mses = linalg::diag_re(&dfe.base.error_covariance(channel)?);
    let objective_value = spec.evaluate(&stream_mses)?;
    Ok(DfeP1Solution {
        dfe,
        allocation: PowerAllocation {
            a: powers[0].clone(),
            b: powers[1].clone(),
            p_s: problem.budgets[0],
            p_r: problem.budgets[1],
        },
        objective: spec,
        objective_value,
        stream_mses,
        converged,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DfeP2Solution {
    pub dfe: DfeDesign,
    pub allocation: PowerAllocation,
    pub total_power: f64,
    /// Eigen-MSEs of the channel-matched design, strongest stream first.
    pub eigen_mses: Vec<f64>,
    /// Decision-point MSEs under correct past decisions.
    pub achieved_mses: Vec<f64>,
}

/// Decision-feedback QoS design: eigen-MSEs optimized under the
/// partial-product constraints, then a generalized triangular rotation with
/// `1 / [L]_kk^2 = eta_k`.
pub fn design_dfe_p2(channel: &TwoHopChannel, targets: &QoSTargets) -> Result<DfeP2Solution> {
    targets.validate()?;
    if targets.len() != channel.num_streams {
        return Err(mismatch(format!(
            "{} targets for {} streams",
            targets.len(),
            channel.num_streams
        )));
    }
    let problem = ChainProblem::two_hop(channel, 1.0, 1.0)?;
    let coef = stream_coefficients(&problem)?;

    let log_eta: Vec<f64> = targets.ascending().iter().map(|e| e.ln()).collect();
    let caps: Vec<f64> = log_eta
        .iter()
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect();
    let feasible = |v: &[f64]| {
        let mut acc = 0.0;
        v.iter().zip(&caps).all(|(x, cap)| {
            acc += x;
            acc <= cap + 1e-12
        })
    };
    // The linear optimum satisfies the partial-product constraints as well,
    // so starting there keeps the DFE power at or below the linear power.
    let mut start: Vec<f64> = optimize_eigen_mses(&coef, targets).iter().map(|l| l.ln()).collect();
    if !feasible(&start) {
        start = log_eta.clone();
    }
    let lo = 1e-12_f64.ln();
    let cost = |k: usize, v: f64| min_power(v.exp(), coef[k].0, coef[k].1);
    let mut v = prefix_descent(start, &caps, lo, 0.0, &cost);
    close_gap(&mut v, caps[caps.len() - 1], 0.0);
    let lambda: Vec<f64> = v.iter().map(|x| x.exp()).collect();

    // Spread any residual product gap evenly over the targets.
    let k = lambda.len();
    let gap = caps[k - 1] - v.iter().sum::<f64>();
    let eta_rot: Vec<f64> = targets.eta.iter().map(|e| e * (-gap / k as f64).exp()).collect();

    let sigma: Vec<f64> = lambda.iter().map(|l| 1.0 / l.sqrt()).collect();
    let r_target: Vec<f64> = eta_rot.iter().map(|e| 1.0 / e.sqrt()).collect();
    let s = factors::gtd(&sigma, &r_target)?.p.adjoint();

    let (a, b): (Vec<f64>, Vec<f64>) = lambda
        .iter()
        .zip(&coef)
        .map(|(&t, &(al, be))| {
            if t >= 1.0 {
                (0.0, 0.0)
            } else {
                qos::per_stream_min_power_coef(t, al, be)
            }
        })
        .unzip();
    let built = problem.build(&[a.clone(), b.clone()], Some(&s))?;
    let dfe = dfe_from_build(built, s)?;
    let achieved_mses = linalg::diag_re(&dfe.base.error_covariance(channel)?);
    for (i, (m, eta)) in achieved_mses.iter().zip(&targets.eta).enumerate() {
        if *m > eta + 1e-9 {
            return Err(numerical(format!("stream {} MSE {m} exceeds target {eta}", i + 1)));
        }
    }
    let total_power = dfe.base.source_power() + dfe.base.relay_power(channel)?;
    let p_s = a.iter().sum();
    let p_r = b.iter().sum();
    Ok(DfeP2Solution {
        dfe,
        allocation: PowerAllocation { a, b, p_s, p_r },
        total_power,
        eigen_mses: lambda,
        achieved_mses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::{design_p1, design_p2, P1Options};
    use crate::linalg::max_abs;
    use crate::mse;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_channel(seed: u64, k: usize, rho: f64) -> TwoHopChannel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        TwoHopChannel::rayleigh(3, 3, k, rho, rho, &mut rng).unwrap()
    }

    #[test]
    fn backward_trivial_cases() {
        let (b, _, _) = backward_from_gram(&real_diag(&[2.0, 3.0])).unwrap();
        assert_eq!(max_abs(&b), 0.0);
        let (b, l, d) = backward_from_gram(&real_diag(&[4.0])).unwrap();
        assert_eq!(b[(0, 0)], c(0.0));
        assert!((l[(0, 0)].re - 2.0).abs() < 1e-15 && (d[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn backward_factor_reconstructs_gram() {
        let ch = random_channel(1, 2, 0.1);
        let sol = design_p1(&ch, Objective::SumMse, 1.0, 1.0, &P1Options::default()).unwrap();
        let h = mse::equivalent_channel(&ch.h_sr, &ch.h_rd, &sol.design.f);
        let r_n = mse::effective_noise_cov(&ch.h_rd, &sol.design.f).unwrap();
        let (b, l, d) = backward_matrix(&sol.design.u, &h, &r_n, 0.1).unwrap();
        let x = &h * &sol.design.u;
        let gram = x.adjoint() * linalg::solve_hpd(&r_n, &x).unwrap() + linalg::identity(2) * c(0.1);
        assert!(max_abs(&(&l * l.adjoint() - gram)) < 1e-9);
        let dl = real_diag(&d) * l.adjoint();
        for i in 0..2 {
            assert_eq!(b[(i, i)], c(0.0));
            assert!((dl[(i, i)].re - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn dfe_equalizes_to_geometric_mean() {
        for seed in 0..10 {
            let ch = random_channel(seed, 2, 0.1);
            let sol = design_dfe_p1(&ch, Objective::MaxMse, 1.0, 1.0, &Default::default()).unwrap();
            let problem = ChainProblem::two_hop(&ch, 1.0, 1.0).unwrap();
            let m = problem.eigen_mses(&[sol.allocation.a.clone(), sol.allocation.b.clone()]);
            let geo = (m[0] * m[1]).sqrt();
            for v in &sol.stream_mses {
                assert!((v - geo).abs() < 1e-9);
            }
            let prod: f64 = sol.stream_mses.iter().product();
            assert!((prod - m[0] * m[1]).abs() < 1e-9);
            // AM-GM against the linear equal-diagonal design with the same powers
            assert!(geo <= (m[0] + m[1]) / 2.0 + 1e-15);
        }
    }

    #[test]
    fn concave_objectives_are_rejected() {
        let ch = random_channel(2, 2, 0.1);
        assert!(matches!(
            design_dfe_p1(&ch, Objective::SumSinr, 1.0, 1.0, &Default::default()),
            Err(Error::Dispatch { .. })
        ));
    }

    #[test]
    fn identity_channel_needs_no_feedback() {
        let ch = TwoHopChannel::with_common_noise(linalg::identity(2), linalg::identity(2), 0.1, 2).unwrap();
        let sol = design_dfe_p1(&ch, Objective::MaxMse, 1.0, 1.0, &Default::default()).unwrap();
        let b = sol.dfe.base.backward.as_ref().unwrap();
        assert!(max_abs(b) < 1e-12);
        let lin = design_p1(&ch, Objective::MaxMse, 1.0, 1.0, &P1Options::default()).unwrap();
        for (x, y) in sol.stream_mses.iter().zip(&lin.stream_mses) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dfe_qos_beats_linear() {
        for seed in 0..20 {
            let ch = random_channel(seed, 3, 1.0);
            for eta in [vec![0.3; 3], vec![0.15, 0.4, 0.3]] {
                let t = QoSTargets::new(eta).unwrap();
                let lin = design_p2(&ch, &t).unwrap();
                let dfe = design_dfe_p2(&ch, &t).unwrap();
                assert!(dfe.total_power <= lin.total_power * (1.0 + 1e-12), "seed {seed}");
                let l = &dfe.dfe.l_factor;
                for k in 0..3 {
                    assert!((1.0 / l[(k, k)].re.powi(2) - t.eta[k]).abs() < 1e-9);
                    assert!(dfe.achieved_mses[k] <= t.eta[k] + 1e-9);
                }
            }
        }
    }

    #[test]
    fn single_stream_dfe_qos_is_linear() {
        let ch = random_channel(8, 1, 1.0);
        let t = QoSTargets::new(vec![0.4]).unwrap();
        let lin = design_p2(&ch, &t).unwrap();
        let dfe = design_dfe_p2(&ch, &t).unwrap();
        assert!((lin.total_power - dfe.total_power).abs() < 1e-10);
    }
}
