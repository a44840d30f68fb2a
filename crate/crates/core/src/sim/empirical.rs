//! Sample MSE of a two-hop design, the Monte Carlo counterpart of the
//! analytic MSE matrix.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{complex_gaussian, TwoHopChannel};
use crate::error::{invalid, Result};
use crate::linalg::CMat;
use crate::mse::TransceiverDesign;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMse {
    pub mean: Vec<f64>,
    pub std_err: Vec<f64>,
    pub trials: usize,
}

/// Mean of `|z_k - s_k|^2` with `z = G y - B s`, unit-variance circular
/// Gaussian symbols and noise drawn from the channel's variances. The
/// feedback term uses the transmitted symbols.
pub fn empirical_mse<R: Rng + ?Sized>(
    design: &TransceiverDesign,
    channel: &TwoHopChannel,
    trials: usize,
    rng: &mut R,
) -> Result<EmpiricalMse> {
    design.validate()?;
    channel.validate()?;
    if trials < 2 {
        return Err(invalid("need at least two trials"));
    }
    let k = design.num_streams();
    let (std_1, std_2) = (channel.rho_1.sqrt(), channel.rho_2.sqrt());
    let gf = &design.g * &channel.h_rd * &design.f;
    let x = &gf * &channel.h_sr * &design.u;
    let gain = match &design.backward {
        Some(b) => &x - b,
        None => x,
    };
    let mut sum = vec![0.0; k];
    let mut sum_sq = vec![0.0; k];
    let (n_r, n_d) = (channel.n_r(), channel.n_d());
    for _ in 0..trials {
        let s = CMat::from_fn(k, 1, |_, _| complex_gaussian(rng));
        let n_1 = CMat::from_fn(n_r, 1, |_, _| complex_gaussian(rng) * std_1);
        let n_2 = CMat::from_fn(n_d, 1, |_, _| complex_gaussian(rng) * std_2);
        let e = &gain * &s + &gf * n_1 + &design.g * n_2 - &s;
        for i in 0..k {
            let v = e[i].norm_sqr();
            sum[i] += v;
            sum_sq[i] += v * v;
        }
    }
    let n = trials as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mean)
        .map(|(sq, m)| ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt())
        .collect();
    Ok(EmpiricalMse { mean, std_err, trials })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;
    use crate::linear::{design_p1, P1Options};
    use crate::Objective;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_relay_gives_unit_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = TwoHopChannel::rayleigh(3, 3, 2, 0.1, 0.1, &mut rng).unwrap();
        let mut d = design_p1(&ch, Objective::SumMse, 1.0, 1.0, &P1Options::default()).unwrap().design;
        d.f.fill(c(0.0));
        d.g.fill(c(0.0));
        let e = empirical_mse(&d, &ch, 2000, &mut rng).unwrap();
        for (m, se) in e.mean.iter().zip(&e.std_err) {
            assert!((m - 1.0).abs() < 4.0 * se);
        }
    }

    #[test]
    fn standard_error_shrinks_with_trials() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ch = TwoHopChannel::rayleigh(3, 3, 2, 0.3, 0.3, &mut rng).unwrap();
        let d = design_p1(&ch, Objective::MaxMse, 1.0, 1.0, &P1Options::default()).unwrap().design;
        let a = empirical_mse(&d, &ch, 20_000, &mut rng).unwrap();
        let b = empirical_mse(&d, &ch, 40_000, &mut rng).unwrap();
        for i in 0..2 {
            let ratio = a.std_err[i] / b.std_err[i];
            assert!((ratio - 2f64.sqrt()).abs() < 0.15, "{ratio}");
        }
    }
}
