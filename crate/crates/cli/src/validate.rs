//! Invariant suite over random instances.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mimo_relay::channel::TwoHopChannel;
use mimo_relay::dfe::{design_dfe_p1, design_dfe_p2};
use mimo_relay::extended::{multihop_design, MultiHopChannel};
use mimo_relay::factors::{gmd, mean_equalizing_rotation};
use mimo_relay::linalg::{self, off_diagonal_mass};
use mimo_relay::linear::{design_p1, design_p2, sa_design_p2, AllocationOptions, P1Options, QoSTargets};
use mimo_relay::objectives::AdditiveClass;
use mimo_relay::Objective;

type Check = fn(&mut ChaCha8Rng) -> Result<f64, String>;

fn channel(rng: &mut ChaCha8Rng, k: usize) -> TwoHopChannel {
    TwoHopChannel::rayleigh(3, 3, k, 0.1, 0.1, rng).expect("rayleigh draw")
}

fn budgets(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let ch = channel(rng, 2);
    let mut worst: f64 = 0.0;
    for spec in Objective::ALL {
        let d = design_p1(&ch, spec, 1.0, 1.0, &P1Options::default()).map_err(|e| e.to_string())?.design;
        let p_r = d.relay_power(&ch).map_err(|e| e.to_string())?;
        worst = worst.max(d.source_power() - 1.0).max(p_r - 1.0);
    }
    if worst > 1e-9 {
        return Err(format!("budget exceeded by {worst:e}"));
    }
    Ok(worst)
}

fn structure(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let ch = channel(rng, 2);
    let mut worst: f64 = 0.0;
    for spec in Objective::ALL {
        let d = design_p1(&ch, spec, 1.0, 1.0, &P1Options::default()).map_err(|e| e.to_string())?.design;
        let v = match spec.additive_class() {
            AdditiveClass::SchurConvex => {
                let m = d.stream_mses(&ch).map_err(|e| e.to_string())?;
                m.iter().fold(0.0f64, |a, x| a.max((x - m[0]).abs()))
            }
            _ => off_diagonal_mass(&d.overall(&ch)),
        };
        if v > 1e-9 {
            return Err(format!("{spec}: structure residual {v:e}"));
        }
        worst = worst.max(v);
    }
    Ok(worst)
}

fn qos(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let ch = channel(rng, 3);
    let t = QoSTargets::new(vec![0.1, 0.3, 0.5]).map_err(|e| e.to_string())?;
    let rc = design_p2(&ch, &t).map_err(|e| e.to_string())?;
    let sa = sa_design_p2(&ch, &t).map_err(|e| e.to_string())?;
    let dfe = design_dfe_p2(&ch, &t).map_err(|e| e.to_string())?;
    let excess = rc
        .achieved_mses
        .iter()
        .chain(&dfe.achieved_mses)
        .zip(t.eta.iter().cycle())
        .fold(f64::NEG_INFINITY, |a, (m, e)| a.max(m - e));
    if excess > 1e-9 {
        return Err(format!("target exceeded by {excess:e}"));
    }
    if rc.total_power > sa.total_power * (1.0 + 1e-9) || dfe.total_power > rc.total_power * (1.0 + 1e-9) {
        return Err(format!("power order broken: {} {} {}", dfe.total_power, rc.total_power, sa.total_power));
    }
    Ok(excess.max(0.0))
}

fn dfe_equalized(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let ch = channel(rng, 2);
    let sol = design_dfe_p1(&ch, Objective::MaxMse, 1.0, 1.0, &AllocationOptions::default()).map_err(|e| e.to_string())?;
    let m = &sol.stream_mses;
    let spread = m.iter().fold(0.0f64, |a, x| a.max((x - m[0]).abs()));
    if spread > 1e-9 {
        return Err(format!("DFE stream MSEs differ by {spread:e}"));
    }
    Ok(spread)
}

fn factorizations(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    use rand::Rng;
    let k = rng.random_range(2..6);
    let l: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
    let r = mean_equalizing_rotation(&l).map_err(|e| e.to_string())?;
    let f = gmd(&l).map_err(|e| e.to_string())?;
    let recon = &f.q * &f.r * f.p.adjoint() - linalg::real_diag(&l);
    let worst = r.residual.max(linalg::max_abs(&recon));
    if worst > 1e-10 {
        return Err(format!("factorization residual {worst:e}"));
    }
    Ok(worst)
}

fn multihop_reduction(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let ch = channel(rng, 2);
    let mh = MultiHopChannel::new(vec![ch.h_sr.clone(), ch.h_rd.clone()], vec![0.1; 2], vec![1.0; 2], 2)
        .map_err(|e| e.to_string())?;
    let a = multihop_design(&mh, Objective::MaxMse, &P1Options::default()).map_err(|e| e.to_string())?;
    let b = design_p1(&ch, Objective::MaxMse, 1.0, 1.0, &P1Options::default()).map_err(|e| e.to_string())?;
    if a.nodes[0] != b.design.u || a.nodes[1] != b.design.f || a.g != b.design.g {
        return Err("two-hop chain differs from the two-hop design".into());
    }
    Ok(0.0)
}

/// Prints one line per check and returns whether all passed.
pub fn run(draws: u64, seed: u64) -> bool {
    let checks: [(&str, Check); 6] = [
        ("power budgets", budgets),
        ("diagonal and equal-MSE structure", structure),
        ("QoS targets and power order", qos),
        ("DFE MSE equalization", dfe_equalized),
        ("factorization residuals", factorizations),
        ("two-hop chain reduction", multihop_reduction),
    ];
    let mut all = true;
    for (name, check) in checks {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        let mut error = None;
        for _ in 0..draws {
            match check(&mut rng) {
                Ok(v) => worst = worst.max(v),
                Err(e) => {
                    error = Some(e);
                    break;
                }
            }
        }
        match error {
            None => println!("PASS {name} (worst {worst:.1e} over {draws} draws)"),
            Some(e) => {
                all = false;
                println!("FAIL {name}: {e}");
            }
        }
    }
    all
}
