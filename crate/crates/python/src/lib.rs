//! Python bindings for `mimo-relay`.
//!
//! Matrices cross the boundary as nested lists of Python `complex`, row major.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mimo_relay::channel::{self, KroneckerErrorModel};
use mimo_relay::dfe;
use mimo_relay::extended;
use mimo_relay::factors;
use mimo_relay::linalg::CMat;
use mimo_relay::linear::{self, AllocationOptions, P1Options, QoSTargets};
use mimo_relay::mse::TransceiverDesign;
use mimo_relay::sim::{self, SimConfig};
use mimo_relay::Objective;

create_exception!(mimo_relay_py, RelayError, PyException);

type Rows = Vec<Vec<Complex64>>;

fn err(e: mimo_relay::Error) -> PyErr {
    RelayError::new_err(e.to_string())
}

fn to_rows(m: &CMat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_rows(rows: Rows) -> PyResult<CMat> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(RelayError::new_err("ragged matrix"));
    }
    Ok(CMat::from_fn(n, m, |i, j| rows[i][j]))
}

fn objective(name: &str) -> PyResult<Objective> {
    name.parse().map_err(err)
}

#[pyclass(module = "mimo_relay_py")]
pub struct TwoHopChannel {
    inner: channel::TwoHopChannel,
}

#[pymethods]
impl TwoHopChannel {
    #[new]
    fn new(h_sr: Rows, h_rd: Rows, rho_1: f64, rho_2: f64, num_streams: usize) -> PyResult<Self> {
        let inner = channel::TwoHopChannel::new(from_rows(h_sr)?, from_rows(h_rd)?, rho_1, rho_2, num_streams)
            .map_err(err)?;
        Ok(Self { inner })
    }

    /// Unit-variance Rayleigh draw: `n_r x n_s` first hop, `n_s x n_r` second hop.
    #[staticmethod]
    fn rayleigh(n_s: usize, n_r: usize, num_streams: usize, rho_1: f64, rho_2: f64, seed: u64) -> PyResult<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = channel::TwoHopChannel::rayleigh(n_s, n_r, num_streams, rho_1, rho_2, &mut rng).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn h_sr(&self) -> Rows {
        to_rows(&self.inner.h_sr)
    }

    #[getter]
    fn h_rd(&self) -> Rows {
        to_rows(&self.inner.h_rd)
    }

    #[getter]
    fn rho_1(&self) -> f64 {
        self.inner.rho_1
    }

    #[getter]
    fn rho_2(&self) -> f64 {
        self.inner.rho_2
    }

    #[getter]
    fn num_streams(&self) -> usize {
        self.inner.num_streams
    }

    fn __repr__(&self) -> String {
        format!(
            "TwoHopChannel(n_s={}, n_r={}, n_d={}, k={})",
            self.inner.n_s(),
            self.inner.n_r(),
            self.inner.n_d(),
            self.inner.num_streams
        )
    }
}

/// Source precoder, relay matrix and receiver, with the values reported by the design routine.
#[pyclass(module = "mimo_relay_py")]
pub struct Design {
    inner: TransceiverDesign,
    #[pyo3(get)]
    stream_mses: Vec<f64>,
    /// Objective value for objective-driven designs.
    #[pyo3(get)]
    objective_value: Option<f64>,
    /// Source plus relay power for QoS designs.
    #[pyo3(get)]
    total_power: Option<f64>,
}

impl Design {
    fn new(inner: TransceiverDesign, stream_mses: Vec<f64>) -> Self {
        Self { inner, stream_mses, objective_value: None, total_power: None }
    }
}

#[pymethods]
impl Design {
    #[getter]
    fn u(&self) -> Rows {
        to_rows(&self.inner.u)
    }

    #[getter]
    fn f(&self) -> Rows {
        to_rows(&self.inner.f)
    }

    #[getter]
    fn g(&self) -> Rows {
        to_rows(&self.inner.g)
    }

    /// Feedback matrix of decision-feedback designs.
    #[getter]
    fn backward(&self) -> Option<Rows> {
        self.inner.backward.as_ref().map(to_rows)
    }

    fn source_power(&self) -> f64 {
        self.inner.source_power()
    }

    fn relay_power(&self, channel: PyRef<'_, TwoHopChannel>) -> PyResult<f64> {
        self.inner.relay_power(&channel.inner).map_err(err)
    }

    /// Error covariance of the linear receiver on `channel`.
    fn error_covariance(&self, channel: PyRef<'_, TwoHopChannel>) -> PyResult<Rows> {
        self.inner.error_covariance(&channel.inner).map(|m| to_rows(&m)).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json_string(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("Design(k={}, stream_mses={:?})", self.inner.num_streams(), self.stream_mses)
    }
}

fn serde_json_string<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| RelayError::new_err(e.to_string()))
}

#[pyfunction]
#[pyo3(signature = (channel, objective, p_s=1.0, p_r=1.0, restarts=0, seed=0))]
fn design_p1(
    channel: PyRef<'_, TwoHopChannel>,
    objective: &str,
    p_s: f64,
    p_r: f64,
    restarts: usize,
    seed: u64,
) -> PyResult<Design> {
    let spec = self::objective(objective)?;
    let sol = linear::design_p1(&channel.inner, spec, p_s, p_r, &P1Options::with_restarts(restarts, seed))
        .map_err(err)?;
    let mut d = Design::new(sol.design, sol.stream_mses);
    d.objective_value = Some(sol.objective_value);
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (channel, p_s=1.0, p_r=1.0))]
fn naf_design(channel: PyRef<'_, TwoHopChannel>, p_s: f64, p_r: f64) -> PyResult<Design> {
    let d = linear::naf_design(&channel.inner, p_s, p_r).map_err(err)?;
    let mses = d.stream_mses(&channel.inner).map_err(err)?;
    Ok(Design::new(d, mses))
}

fn qos(sol: linear::P2Solution) -> Design {
    let mut d = Design::new(sol.design, sol.achieved_mses);
    d.total_power = Some(sol.total_power);
    d
}

/// Minimum-power design meeting per-stream MSE targets.
#[pyfunction]
fn design_p2(channel: PyRef<'_, TwoHopChannel>, eta: Vec<f64>) -> PyResult<Design> {
    let t = QoSTargets::new(eta).map_err(err)?;
    linear::design_p2(&channel.inner, &t).map(qos).map_err(err)
}

/// QoS design with sorted assignment of targets to eigenmodes and no rotation.
#[pyfunction]
fn sa_design_p2(channel: PyRef<'_, TwoHopChannel>, eta: Vec<f64>) -> PyResult<Design> {
    let t = QoSTargets::new(eta).map_err(err)?;
    linear::sa_design_p2(&channel.inner, &t).map(qos).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (channel, objective, p_s=1.0, p_r=1.0))]
fn design_dfe_p1(channel: PyRef<'_, TwoHopChannel>, objective: &str, p_s: f64, p_r: f64) -> PyResult<Design> {
    let spec = self::objective(objective)?;
    let sol = dfe::design_dfe_p1(&channel.inner, spec, p_s, p_r, &AllocationOptions::default()).map_err(err)?;
    let mut d = Design::new(sol.dfe.base, sol.stream_mses);
    d.objective_value = Some(sol.objective_value);
    Ok(d)
}

#[pyfunction]
fn design_dfe_p2(channel: PyRef<'_, TwoHopChannel>, eta: Vec<f64>) -> PyResult<Design> {
    let t = QoSTargets::new(eta).map_err(err)?;
    let sol = dfe::design_dfe_p2(&channel.inner, &t).map_err(err)?;
    let mut d = Design::new(sol.dfe.base, sol.achieved_mses);
    d.total_power = Some(sol.total_power);
    Ok(d)
}

/// Design against the channel estimate in `channel` with i.i.d. estimation
/// errors of variance `eps_sr` and `eps_rd`; stream MSEs are averaged over the error.
#[pyfunction]
#[pyo3(signature = (channel, eps_sr, eps_rd, objective, p_s=1.0, p_r=1.0))]
fn robust_design_p1(
    channel: PyRef<'_, TwoHopChannel>,
    eps_sr: f64,
    eps_rd: f64,
    objective: &str,
    p_s: f64,
    p_r: f64,
) -> PyResult<Design> {
    let ch = &channel.inner;
    let state = extended::RobustChannelState::new(
        ch,
        KroneckerErrorModel::scaled_identity(ch.n_r(), ch.n_s(), eps_sr, 1.0),
        KroneckerErrorModel::scaled_identity(ch.n_d(), ch.n_r(), eps_rd, 1.0),
    )
    .map_err(err)?;
    let sol = extended::robust_design_p1(&state, self::objective(objective)?, p_s, p_r, &P1Options::default())
        .map_err(err)?;
    let mut d = Design::new(sol.design, sol.stream_mses);
    d.objective_value = Some(sol.objective_value);
    Ok(d)
}

/// Linear design for a chain of hops. Returns `(nodes, g, stream_mses, node_powers)`.
#[pyfunction]
fn multihop_design(
    hops: Vec<Rows>,
    noise: Vec<f64>,
    budgets: Vec<f64>,
    num_streams: usize,
    objective: &str,
) -> PyResult<(Vec<Rows>, Rows, Vec<f64>, Vec<f64>)> {
    let hops = hops.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
    let ch = extended::MultiHopChannel::new(hops, noise, budgets, num_streams).map_err(err)?;
    let sol = extended::multihop_design(&ch, self::objective(objective)?, &P1Options::default()).map_err(err)?;
    Ok((sol.nodes.iter().map(to_rows).collect(), to_rows(&sol.g), sol.stream_mses, sol.node_powers))
}

/// Sum-MSE design over parallel relays. Returns `(design, relay_blocks, fit_residual)`.
#[pyfunction]
#[pyo3(signature = (h_sr, h_rd, rho_1, rho_2, num_streams, p_s=1.0, p_r_total=1.0))]
fn multirelay_design(
    h_sr: Vec<Rows>,
    h_rd: Vec<Rows>,
    rho_1: f64,
    rho_2: f64,
    num_streams: usize,
    p_s: f64,
    p_r_total: f64,
) -> PyResult<(Design, Vec<Rows>, f64)> {
    let h_sr = h_sr.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
    let h_rd = h_rd.into_iter().map(from_rows).collect::<PyResult<Vec<_>>>()?;
    let ch = extended::MultiRelayChannel::new(h_sr, h_rd, rho_1, rho_2, num_streams).map_err(err)?;
    let sol = extended::multirelay_design(&ch, p_s, p_r_total, &AllocationOptions::default()).map_err(err)?;
    let blocks = sol.relay_blocks.iter().map(to_rows).collect();
    Ok((Design::new(sol.design, sol.stream_mses), blocks, sol.fit_residual))
}

/// Evaluates a named objective on per-stream MSEs.
#[pyfunction]
fn evaluate_objective(objective: &str, mses: Vec<f64>) -> PyResult<f64> {
    self::objective(objective)?.evaluate(&mses).map_err(err)
}

/// Unitary `s` with `diag(s diag(lam) s^H) == target`. Returns `(s, achieved_diag)`.
#[pyfunction]
fn schur_horn_rotation(lam: Vec<f64>, target: Vec<f64>) -> PyResult<(Rows, Vec<f64>)> {
    let r = factors::schur_horn_rotation(&lam, &target).map_err(err)?;
    Ok((to_rows(&r.s), r.achieved_diag))
}

/// `diag(sigma) = q r p^H` with constant diagonal in `r`. Returns `(q, r, p)`.
#[pyfunction]
fn gmd(sigma: Vec<f64>) -> PyResult<(Rows, Rows, Rows)> {
    let f = factors::gmd(&sigma).map_err(err)?;
    Ok((to_rows(&f.q), to_rows(&f.r), to_rows(&f.p)))
}

/// `diag(sigma) = q r p^H` with `|r_ii| = target_i`. Returns `(q, r, p)`.
#[pyfunction]
fn gtd(sigma: Vec<f64>, target: Vec<f64>) -> PyResult<(Rows, Rows, Rows)> {
    let f = factors::gtd(&sigma, &target).map_err(err)?;
    Ok((to_rows(&f.q), to_rows(&f.r), to_rows(&f.p)))
}

#[pyfunction]
fn qam_mod(bits: Vec<u8>, order: u32) -> PyResult<Vec<Complex64>> {
    sim::qam_mod(&bits, order).map_err(err)
}

#[pyfunction]
fn qam_demod(symbols: Vec<Complex64>, order: u32) -> PyResult<Vec<u32>> {
    let bits = sim::qam_demod(&symbols, order).map_err(err)?;
    Ok(bits.into_iter().map(u32::from).collect())
}

fn load(config_json: &str, seed: Option<u64>) -> PyResult<SimConfig> {
    let mut cfg = SimConfig::from_json(config_json).map_err(err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Runs a BER sweep and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn simulate_ber(py: Python<'_>, config_json: &str, seed: Option<u64>) -> PyResult<String> {
    let cfg = load(config_json, seed)?;
    let curves = py.detach(|| sim::simulate_ber(&cfg)).map_err(err)?;
    let mut out = Vec::new();
    sim::write_ber_csv(&curves, &mut out).map_err(|e| RelayError::new_err(e.to_string()))?;
    String::from_utf8(out).map_err(|e| RelayError::new_err(e.to_string()))
}

/// Runs the equal-target power sweep and returns the CSV text.
#[pyfunction]
#[pyo3(signature = (config_json, seed=None))]
fn power_experiment(py: Python<'_>, config_json: &str, seed: Option<u64>) -> PyResult<String> {
    let cfg = load(config_json, seed)?;
    let table = py.detach(|| sim::power_experiment(&cfg)).map_err(err)?;
    let mut out = Vec::new();
    sim::write_power_csv(&table, &mut out).map_err(|e| RelayError::new_err(e.to_string()))?;
    String::from_utf8(out).map_err(|e| RelayError::new_err(e.to_string()))
}

#[pymodule]
fn mimo_relay_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RelayError", m.py().get_type::<RelayError>())?;
    m.add_class::<TwoHopChannel>()?;
    m.add_class::<Design>()?;
    m.add_function(wrap_pyfunction!(design_p1, m)?)?;
    m.add_function(wrap_pyfunction!(naf_design, m)?)?;
    m.add_function(wrap_pyfunction!(design_p2, m)?)?;
    m.add_function(wrap_pyfunction!(sa_design_p2, m)?)?;
    m.add_function(wrap_pyfunction!(design_dfe_p1, m)?)?;
    m.add_function(wrap_pyfunction!(design_dfe_p2, m)?)?;
    m.add_function(wrap_pyfunction!(robust_design_p1, m)?)?;
    m.add_function(wrap_pyfunction!(multihop_design, m)?)?;
    m.add_function(wrap_pyfunction!(multirelay_design, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_objective, m)?)?;
    m.add_function(wrap_pyfunction!(schur_horn_rotation, m)?)?;
    m.add_function(wrap_pyfunction!(gmd, m)?)?;
    m.add_function(wrap_pyfunction!(gtd, m)?)?;
    m.add_function(wrap_pyfunction!(qam_mod, m)?)?;
    m.add_function(wrap_pyfunction!(qam_demod, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_ber, m)?)?;
    m.add_function(wrap_pyfunction!(power_experiment, m)?)?;
    Ok(())
}
