//! Grid-search references for the channel of trial 0 at the first sweep point.

use anyhow::{bail, Result};
use serde_json::{json, Value};

use mimo_relay::channel::{svd_sorted, TwoHopChannel};
use mimo_relay::linear::{design_p1, design_p2, grid_oracle_p1, grid_oracle_p2, P1Options, QoSTargets};
use mimo_relay::sim::{noise_from_snr_db, trial_rng, SimConfig};
use mimo_relay::Objective;

pub fn report(cfg: &SimConfig, resolution: usize, restarts: usize) -> Result<Value> {
    if cfg.k > 3 {
        bail!("grid references handle at most three streams");
    }
    let (snr_sr, snr_rd) = cfg.snr_points()[0];
    let (rho_1, rho_2) = (noise_from_snr_db(snr_sr), noise_from_snr_db(snr_rd));
    let mut rng = trial_rng(cfg.seed, 0, 0);
    let ch = TwoHopChannel::rayleigh(cfg.n_s, cfg.n_r, cfg.k, rho_1, rho_2, &mut rng)?;
    let eig = |h| -> Result<Vec<f64>> {
        Ok(svd_sorted(h)?.eigenvalues().into_iter().take(cfg.k).collect())
    };
    let (lsr, lrd) = (eig(&ch.h_sr)?, eig(&ch.h_rd)?);

    let mut objectives = cfg.objectives();
    if objectives.is_empty() {
        objectives = vec![Objective::SumMse, Objective::MutualInfo];
    }
    let mut p1 = Vec::new();
    for spec in objectives {
        let ours = design_p1(&ch, spec, 1.0, 1.0, &P1Options::with_restarts(restarts, cfg.seed))?;
        let grid = grid_oracle_p1(&lsr, &lrd, rho_1, rho_2, 1.0, 1.0, spec, resolution)?;
        let value = spec.evaluate(&ours.stream_mses)?;
        p1.push(json!({
            "objective": spec,
            "alternating": value,
            "alternating_allocation": ours.allocation,
            "grid": grid.objective,
            "grid_allocation": grid.allocation,
            "grid_points": grid.evaluated,
            "relative_gap": (value - grid.objective) / grid.objective.abs(),
        }));
    }

    let mut p2 = Value::Null;
    if let Some(eta) = cfg.eta.as_ref().filter(|e| e.len() == 2 && cfg.k == 2) {
        let t = QoSTargets::new(eta.clone())?;
        let ours = design_p2(&ch, &t)?;
        let (power, eigen_mses) = grid_oracle_p2(&lsr, &lrd, rho_1, rho_2, &t, resolution)?;
        p2 = json!({
            "eta": eta,
            "rc_power": ours.total_power,
            "rc_eigen_mses": ours.eigen_mses,
            "grid_power": power,
            "grid_eigen_mses": eigen_mses,
            "relative_gap": ours.total_power / power - 1.0,
        });
    }
    Ok(json!({
        "seed": cfg.seed,
        "snr_sr_db": snr_sr,
        "snr_rd_db": snr_rd,
        "lambda_sr": lsr,
        "lambda_rd": lrd,
        "p1": p1,
        "p2": p2,
    }))
}
