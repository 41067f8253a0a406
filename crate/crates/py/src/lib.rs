//! Python bindings for the `infdist` core crate.

use std::path::PathBuf;

use infdist::circuit::{Basis, PrepState};
use infdist::decoder::{ler_with_error, run_memory_point};
use infdist::dem::dem_for_measurement;
use infdist::ev;
use infdist::extrapolation::{self as ex, Ansatz, DataPoint, DataSeries, Parity};
use infdist::pipeline::{ExperimentConfig, ResultStore, Stage};
use infdist::{apply_si1000, build_memory_circuit, build_patch, NoiseParams};
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

pyo3::create_exception!(infdist_py, InfdistError, PyException);

fn to_py(e: infdist::Error) -> PyErr {
    match e {
        infdist::Error::Config(_) | infdist::Error::InvalidParameter(_) | infdist::Error::InvalidDistance(_) => {
            PyValueError::new_err(e.to_string())
        }
        _ => InfdistError::new_err(e.to_string()),
    }
}

fn parse<T: std::str::FromStr<Err = infdist::Error>>(s: &str) -> PyResult<T> {
    s.parse().map_err(to_py)
}

pub fn parse_ansatz(s: &str) -> Result<Ansatz, String> {
    match s {
        "single_exp" => Ok(Ansatz::SingleExp),
        "double_exp" => Ok(Ansatz::DoubleExp),
        "richardson" => Ok(Ansatz::Richardson),
        _ => Err(format!("unknown ansatz `{s}`")),
    }
}

pub fn parse_parity(s: &str) -> Result<Parity, String> {
    match s {
        "odd" => Ok(Parity::Odd),
        "even" => Ok(Parity::Even),
        "all" => Ok(Parity::All),
        _ => Err(format!("unknown parity `{s}`")),
    }
}

/// Rotated surface code patch.
#[pyclass(name = "Patch", frozen)]
struct PyPatch {
    inner: infdist::SurfaceCodePatch,
}

#[pymethods]
impl PyPatch {
    #[new]
    fn new(d: usize) -> PyResult<Self> {
        Ok(PyPatch { inner: build_patch(d).map_err(to_py)? })
    }

    #[getter]
    fn distance(&self) -> usize {
        self.inner.distance
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn data_qubits(&self) -> Vec<(i32, i32)> {
        self.inner.data_qubits.clone()
    }

    fn x_stabilisers(&self) -> Vec<Vec<usize>> {
        self.inner.x_stabilisers()
    }

    fn z_stabilisers(&self) -> Vec<Vec<usize>> {
        self.inner.z_stabilisers()
    }

    #[getter]
    fn logical_x(&self) -> Vec<usize> {
        self.inner.logical_x.clone()
    }

    #[getter]
    fn logical_z(&self) -> Vec<usize> {
        self.inner.logical_z.clone()
    }

    fn verify(&self) -> PyResult<()> {
        self.inner.verify().map_err(InfdistError::new_err)
    }

    fn __repr__(&self) -> String {
        format!("Patch(d={}, qubits={})", self.inner.distance, self.inner.num_qubits())
    }
}

/// Expectation value with its standard error.
#[pyclass(name = "EVEstimate", frozen, get_all)]
struct PyEv {
    value: f64,
    std_err: f64,
    n_shots: usize,
    state: String,
    observable: String,
    d: usize,
    p: f64,
}

impl From<ev::EVEstimate> for PyEv {
    fn from(e: ev::EVEstimate) -> Self {
        PyEv {
            value: e.value,
            std_err: e.std_err,
            n_shots: e.n_shots,
            state: e.label.state,
            observable: e.label.observable.to_string(),
            d: e.label.d,
            p: e.label.p,
        }
    }
}

#[pymethods]
impl PyEv {
    fn __repr__(&self) -> String {
        format!("EVEstimate({} ± {}, state={}, d={}, p={})", self.value, self.std_err, self.state, self.d, self.p)
    }
}

/// Result of a least-squares fit of the logical-error-rate ansatz.
#[pyclass(name = "FitResult", frozen, get_all)]
struct PyFit {
    ansatz: String,
    a: f64,
    terms: Vec<(f64, f64)>,
    param_covariance: Vec<Vec<f64>>,
    r2: f64,
    extrapolated: f64,
    converged: bool,
    chi2: f64,
}

#[pymethods]
impl PyFit {
    fn __repr__(&self) -> String {
        format!("FitResult({}, A={}, R2={})", self.ansatz, self.a, self.r2)
    }
}

fn memory_circuit_parts(
    d: usize,
    prep: &str,
    basis: &str,
    p: f64,
    sigma: f64,
    noise_seed: u64,
    rounds_factor: usize,
) -> PyResult<(infdist::NoisyCircuit, infdist::dem::MatchingGraph)> {
    let prep: PrepState = parse(prep)?;
    let basis: Basis = parse(basis)?;
    let patch = build_patch(d).map_err(to_py)?;
    let params = NoiseParams { p, inhomogeneity_sigma: sigma, seed: noise_seed };
    let circuit = build_memory_circuit(&patch, prep, basis, rounds_factor).map_err(to_py)?;
    let noisy = apply_si1000(&circuit, &params).map_err(to_py)?;
    let graph = dem_for_measurement(&patch, basis, rounds_factor, &params).map_err(to_py)?;
    Ok((noisy, graph))
}

/// Samples and decodes a memory experiment; returns `(n_shots, n_fails, P_L, std_err)`.
#[pyfunction]
#[pyo3(signature = (d, prep, basis, p, shots, seed, sigma = 0.0, noise_seed = 0, rounds_factor = 3))]
#[allow(clippy::too_many_arguments)]
fn memory_experiment(
    py: Python<'_>,
    d: usize,
    prep: &str,
    basis: &str,
    p: f64,
    shots: usize,
    seed: u64,
    sigma: f64,
    noise_seed: u64,
    rounds_factor: usize,
) -> PyResult<(usize, usize, f64, f64)> {
    let (noisy, graph) = memory_circuit_parts(d, prep, basis, p, sigma, noise_seed, rounds_factor)?;
    let c = py.detach(|| run_memory_point(&noisy, &graph, shots, seed)).map_err(to_py)?;
    let (p_l, se) = ler_with_error(c.n_fails, c.n_shots);
    Ok((c.n_shots, c.n_fails, p_l, se))
}

/// Expectation value of `observable` on the logical state `prep`.
#[pyfunction]
#[pyo3(signature = (d, prep, observable, p, shots, seed, sigma = 0.0, noise_seed = 0))]
#[allow(clippy::too_many_arguments)]
fn measure_ev(
    py: Python<'_>,
    d: usize,
    prep: &str,
    observable: &str,
    p: f64,
    shots: usize,
    seed: u64,
    sigma: f64,
    noise_seed: u64,
) -> PyResult<PyEv> {
    let prep: PrepState = parse(prep)?;
    let observable: Basis = parse(observable)?;
    let patch = build_patch(d).map_err(to_py)?;
    let params = NoiseParams { p, inhomogeneity_sigma: sigma, seed: noise_seed };
    let (est, _) = py.detach(|| ev::measure_ev(&patch, prep, observable, &params, shots, seed)).map_err(to_py)?;
    Ok(est.into())
}

#[pyfunction]
#[pyo3(signature = (p_l, noiseless_sign, n_shots, state = "", observable = "Z", d = 0, p = 0.0))]
fn ev_from_ler(
    p_l: f64,
    noiseless_sign: f64,
    n_shots: usize,
    state: &str,
    observable: &str,
    d: usize,
    p: f64,
) -> PyResult<PyEv> {
    let label = ev::EvLabel { state: state.into(), observable: parse(observable)?, d, p };
    Ok(ev::ev_from_ler(p_l, noiseless_sign, n_shots, label).map_err(to_py)?.into())
}

/// Minimum-L1 decomposition over `|+⟩, |−⟩, |+i⟩, |−i⟩, |0⟩, |1⟩`; returns
/// `(coefficients, robustness)`.
#[pyfunction]
fn decompose_state(bloch: [f64; 3]) -> PyResult<(Vec<f64>, f64)> {
    let dec = ev::decompose_state([1.0, bloch[0], bloch[1], bloch[2]]).map_err(to_py)?;
    Ok((dec.x.to_vec(), dec.robustness))
}

/// Bloch vector of `(|0⟩ + e^{iθ}|1⟩)/√2`.
#[pyfunction]
fn xy_plane_target(theta: f64) -> [f64; 3] {
    let b = ev::xy_plane_target(theta);
    [b[1], b[2], b[3]]
}

/// Combines the six component estimates of `measure_components` for the given state.
#[pyfunction]
#[pyo3(signature = (d, bloch, observable, p, shots, seed, label = "target"))]
#[allow(clippy::too_many_arguments)]
fn decomposition_ev(
    py: Python<'_>,
    d: usize,
    bloch: [f64; 3],
    observable: &str,
    p: f64,
    shots: usize,
    seed: u64,
    label: &str,
) -> PyResult<PyEv> {
    let observable: Basis = parse(observable)?;
    let patch = build_patch(d).map_err(to_py)?;
    let dec = ev::decompose_state([1.0, bloch[0], bloch[1], bloch[2]]).map_err(to_py)?;
    let comps = py
        .detach(|| ev::measure_components(&patch, observable, &NoiseParams::uniform(p), shots, seed))
        .map_err(to_py)?;
    Ok(ev::combine_evs(&dec, &comps, label).map_err(to_py)?.into())
}

fn series(points: Vec<(usize, f64, f64, usize)>, parity: &str, cutoff_d: Option<usize>) -> PyResult<DataSeries> {
    let parity = parse_parity(parity).map_err(PyValueError::new_err)?;
    let pts = points.into_iter().map(|(d, ev, std_err, n_shots)| DataPoint { d, ev, std_err, n_shots }).collect();
    DataSeries::new(pts, parity, cutoff_d.unwrap_or(usize::MAX)).map_err(to_py)
}

/// Fits `A + Σ B_i e^{−C_i d}` to `(d, ev, std_err, n_shots)` points.
#[pyfunction]
#[pyo3(signature = (points, ansatz = "single_exp", parity = "all", cutoff_d = None))]
fn fit(points: Vec<(usize, f64, f64, usize)>, ansatz: &str, parity: &str, cutoff_d: Option<usize>) -> PyResult<PyFit> {
    let s = series(points, parity, cutoff_d)?;
    let f = ex::lm_fit(&s, parse_ansatz(ansatz).map_err(PyValueError::new_err)?).map_err(to_py)?;
    Ok(PyFit {
        ansatz: f.ansatz.to_string(),
        a: f.a,
        terms: f.terms.iter().map(|t| (t.b, t.c)).collect(),
        param_covariance: f.param_covariance,
        r2: f.r2,
        extrapolated: f.extrapolated,
        converged: f.converged,
        chi2: f.chi2,
    })
}

#[pyfunction]
#[pyo3(signature = (points, parity = "all", cutoff_d = None))]
fn richardson(points: Vec<(usize, f64, f64, usize)>, parity: &str, cutoff_d: Option<usize>) -> PyResult<f64> {
    ex::richardson_extrapolate(&series(points, parity, cutoff_d)?).map_err(to_py)
}

/// Bootstrap of the extrapolated value; returns `(mean, std, p16, p84, p2_5, p97_5)`.
#[pyfunction]
#[pyo3(signature = (points, ansatz = "single_exp", trials = 1000, seed = 0, parity = "all", cutoff_d = None))]
fn bootstrap(
    py: Python<'_>,
    points: Vec<(usize, f64, f64, usize)>,
    ansatz: &str,
    trials: usize,
    seed: u64,
    parity: &str,
    cutoff_d: Option<usize>,
) -> PyResult<(f64, f64, f64, f64, f64, f64)> {
    let s = series(points, parity, cutoff_d)?;
    let ansatz = parse_ansatz(ansatz).map_err(PyValueError::new_err)?;
    let b = py.detach(|| ex::bootstrap(&s, ansatz, trials, seed));
    Ok((b.mean, b.std, b.p16, b.p84, b.p2_5, b.p97_5))
}

#[pyfunction]
fn improvement_ratio(e_d: f64, e_ext: f64, e_star: f64) -> f64 {
    ex::improvement_ratio(e_d, e_ext, e_star)
}

/// Returns `(delta_d, qubit_ratio)`.
#[pyfunction]
fn resource_savings(lambda_factor: f64, f: f64, baseline_d: usize) -> PyResult<(f64, f64)> {
    let r = ex::resource_savings(lambda_factor, f, baseline_d).map_err(to_py)?;
    Ok((r.delta_d, r.qubit_ratio))
}

/// Runs the staged pipeline for a JSON config into `out`, stopping after `stage`.
#[pyfunction]
#[pyo3(signature = (config_json, out, stage = "report"))]
fn run_pipeline(py: Python<'_>, config_json: &str, out: PathBuf, stage: &str) -> PyResult<String> {
    let config = ExperimentConfig::from_json(config_json).map_err(to_py)?;
    let last: Stage = parse(stage)?;
    py.detach(|| {
        let store = ResultStore::create(&out, config)?;
        store.run_through(last)?;
        Ok(store.config_hash)
    })
    .map_err(to_py)
}

#[pymodule]
fn infdist_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("InfdistError", m.py().get_type::<InfdistError>())?;
    m.add_class::<PyPatch>()?;
    m.add_class::<PyEv>()?;
    m.add_class::<PyFit>()?;
    m.add_function(wrap_pyfunction!(memory_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(measure_ev, m)?)?;
    m.add_function(wrap_pyfunction!(ev_from_ler, m)?)?;
    m.add_function(wrap_pyfunction!(decompose_state, m)?)?;
    m.add_function(wrap_pyfunction!(xy_plane_target, m)?)?;
    m.add_function(wrap_pyfunction!(decomposition_ev, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(richardson, m)?)?;
    m.add_function(wrap_pyfunction!(bootstrap, m)?)?;
    m.add_function(wrap_pyfunction!(improvement_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(resource_savings, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_parse() {
        assert_eq!(parse_ansatz("double_exp").unwrap(), Ansatz::DoubleExp);
        assert!(parse_ansatz("cubic").is_err());
        assert_eq!(parse_parity("odd").unwrap(), Parity::Odd);
        assert!(parse_parity("prime").is_err());
    }
}
