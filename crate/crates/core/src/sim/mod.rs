//! Link-level Monte Carlo simulation: modulation, detection, BER and power
//! sweeps, and the sample-MSE oracle.

pub mod ber;
pub mod config;
pub mod detect;
pub mod empirical;
pub mod power;
pub mod qam;

pub use ber::{
    designs_for, noise_from_snr_db, realize_instance, simulate_ber, simulate_point, trial_rng,
    write_ber_csv, BerCurve, BerPoint, DesignKind, Instance, Link, Realized, BER_HEADER,
};
pub use config::{OneOrMany, Scenario, SimConfig};
pub use detect::{detect_dfe, detect_linear};
pub use empirical::{empirical_mse, EmpiricalMse};
pub use power::{power_experiment, write_power_csv, PowerRow, PowerTable, POWER_DESIGNS, POWER_HEADER};
pub use qam::{qam_demod, qam_mod, Qam};
