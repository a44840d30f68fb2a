//! Average transmit power of the QoS designs over channel draws.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ber::{noise_from_snr_db, trial_rng};
use super::config::SimConfig;
use crate::channel::TwoHopChannel;
use crate::dfe::design_dfe_p2;
use crate::error::{invalid, numerical, Error, Result};
use crate::linear::{design_p2, sa_design_p2, QoSTargets};

pub const POWER_DESIGNS: [&str; 3] = ["RC", "SA", "RC-DFE"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub eta: f64,
    /// Index into [`POWER_DESIGNS`].
    pub design: usize,
    /// `10 log10` of the mean total power over feasible draws.
    pub avg_power_db: f64,
    pub draws: u64,
    pub infeasible: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
    /// Per-draw total powers `[eta][design][draw]`, `NaN` for infeasible.
    pub per_draw: Vec<Vec<Vec<f64>>>,
    pub config_hash: u64,
    pub seed: u64,
}

fn feasible_only(r: Result<f64>) -> Result<f64> {
    match r {
        Ok(p) => Ok(p),
        Err(Error::Infeasible(_) | Error::DegenerateChannel(_)) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// Total powers of RC, SA and RC-DFE on one draw for every equal target.
fn draw_powers(cfg: &SimConfig, etas: &[f64], draw: u64) -> Result<Vec<[f64; 3]>> {
    let (snr_sr, snr_rd) = cfg.snr_points()[0];
    let mut rng = trial_rng(cfg.seed, 0, draw);
    let ch = TwoHopChannel::rayleigh(
        cfg.n_s,
        cfg.n_r,
        cfg.k,
        noise_from_snr_db(snr_sr),
        noise_from_snr_db(snr_rd),
        &mut rng,
    )?;
    let mut out = Vec::with_capacity(etas.len());
    for &eta in etas {
        let t = QoSTargets::equal(cfg.k, eta)?;
        let rc = feasible_only(design_p2(&ch, &t).map(|s| s.total_power))?;
        let sa = feasible_only(sa_design_p2(&ch, &t).map(|s| s.total_power))?;
        let dfe = feasible_only(design_dfe_p2(&ch, &t).map(|s| s.total_power))?;
        let tol = 1e-9;
        if rc > sa * (1.0 + tol) {
            return Err(numerical(format!("draw {draw}, eta {eta}: RC power {rc} above SA {sa}")));
        }
        if dfe > rc * (1.0 + tol) {
            return Err(numerical(format!("draw {draw}, eta {eta}: DFE power {dfe} above RC {rc}")));
        }
        out.push([rc, sa, dfe]);
    }
    Ok(out)
}

/// Equal-target sweep over `cfg.eta` with `cfg.trials` channel draws at the
/// first SNR point. Every draw is shared by all targets and designs.
pub fn power_experiment(cfg: &SimConfig) -> Result<PowerTable> {
    cfg.validate()?;
    let etas = cfg.eta.clone().ok_or_else(|| invalid("power experiment needs eta"))?;
    let draws: Vec<Vec<[f64; 3]>> = (0..cfg.trials)
        .into_par_iter()
        .map(|d| {
            draw_powers(cfg, &etas, d).map_err(|e| Error::Trial {
                point: 0,
                trial: d,
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut per_draw = Vec::new();
    for (i, &eta) in etas.iter().enumerate() {
        let mut by_design = Vec::new();
        for d in 0..POWER_DESIGNS.len() {
            let values: Vec<f64> = draws.iter().map(|row| row[i][d]).collect();
            let ok: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
            let mean = ok.iter().sum::<f64>() / ok.len() as f64;
            rows.push(PowerRow {
                eta,
                design: d,
                avg_power_db: 10.0 * mean.log10(),
                draws: cfg.trials,
                infeasible: (values.len() - ok.len()) as u64,
            });
            by_design.push(values);
        }
        per_draw.push(by_design);
    }
    Ok(PowerTable {
        rows,
        per_draw,
        config_hash: cfg.hash(),
        seed: cfg.seed,
    })
}

pub const POWER_HEADER: &str = "eta,design,avg_power_db,draws,infeasible";

pub fn write_power_csv<W: Write>(table: &PowerTable, mut w: W) -> io::Result<()> {
    writeln!(w, "{POWER_HEADER}")?;
    for r in &table.rows {
        writeln!(
            w,
            "{},{},{:.6},{},{}",
            r.eta, POWER_DESIGNS[r.design], r.avg_power_db, r.draws, r.infeasible
        )?;
    }
    Ok(())
}
