//! Python bindings: circuits, the label compilers and the JSON-configured
//! experiments. Reports come back as JSON strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use qnnlab::circuit::Circuit;
use qnnlab::compiler::{
    compile_label_circuit, majority_beta, reed_muller_transform, subset_majority_circuit, subset_parity_circuit,
    BooleanTruthTable, SubsetSpec,
};
use qnnlab::experiments::{self, discard};
use qnnlab::objective::{loss_and_gradient, Input};
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// A readout circuit of Pauli rotations.
#[pyclass(name = "Circuit", module = "qnnlab_py", frozen)]
struct PyCircuit {
    inner: Circuit,
}

#[pymethods]
impl PyCircuit {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Circuit::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[getter]
    fn num_qubits(&self) -> usize {
        self.inner.num_qubits()
    }

    #[getter]
    fn num_data_qubits(&self) -> usize {
        self.inner.num_data_qubits()
    }

    #[getter]
    fn num_params(&self) -> usize {
        self.inner.num_params()
    }

    /// Readout expectation on the basis input `bits` (entries ±1).
    fn predict(&self, params: Vec<f64>, bits: Vec<i8>) -> PyResult<f64> {
        self.inner.predict_bits(&params, &bits).map_err(err)
    }

    /// `(loss, gradient)` for one labeled basis input.
    fn loss_and_gradient(&self, params: Vec<f64>, bits: Vec<i8>, label: f64) -> PyResult<(f64, Vec<f64>)> {
        let (l, g) = loss_and_gradient(&self.inner, &params, Input::Bits(&bits), label).map_err(err)?;
        Ok((l, g.components().to_vec()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Circuit(qubits={}, gates={}, params={})",
            self.inner.num_qubits(),
            self.inner.gates().len(),
            self.inner.num_params()
        )
    }
}

/// Exact circuit for a truth table; `values[x]` is `b(x)` with bit `i` of
/// `x` the input bit `i + 1` (set means `z = −1`).
#[pyfunction]
fn compile_truth_table(n: usize, values: Vec<u8>) -> PyResult<PyCircuit> {
    let t = BooleanTruthTable::new(n, values).map_err(err)?;
    Ok(PyCircuit {
        inner: compile_label_circuit(&reed_muller_transform(&t)).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (n, subset, parameterized = false))]
fn parity_circuit(n: usize, subset: Vec<usize>, parameterized: bool) -> PyResult<PyCircuit> {
    let spec = SubsetSpec::new(n, subset).map_err(err)?;
    Ok(PyCircuit {
        inner: subset_parity_circuit(&spec, parameterized).map_err(err)?,
    })
}

#[pyfunction]
#[pyo3(signature = (n, subset, beta = None, parameterized = false))]
fn majority_circuit(n: usize, subset: Vec<usize>, beta: Option<f64>, parameterized: bool) -> PyResult<PyCircuit> {
    let spec = SubsetSpec::new(n, subset).map_err(err)?;
    let beta = beta.unwrap_or_else(|| majority_beta(n));
    Ok(PyCircuit {
        inner: subset_majority_circuit(&spec, beta, parameterized).map_err(err)?,
    })
}

fn config<T: DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    match json {
        None => Ok(T::default()),
        Some(text) => serde_json::from_str(text).map_err(err),
    }
}

fn report<T: Serialize>(r: &T) -> PyResult<String> {
    serde_json::to_string(r).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn repr_check(config_json: Option<&str>) -> PyResult<String> {
    let r = experiments::repr_check(&config(config_json)?).map_err(err)?;
    report(&serde_json::json!({ "report": r, "passed": r.passed() }))
}

#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn grad_check(config_json: Option<&str>) -> PyResult<String> {
    let r = experiments::grad_check(&config(config_json)?).map_err(err)?;
    report(&serde_json::json!({ "report": r, "passed": r.passed() }))
}

#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn train_parity(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let r = py.detach(|| experiments::run_parity(&cfg, &mut discard)).map_err(err)?;
    report(&r)
}

#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn train_majority(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let r = py
        .detach(|| experiments::run_majority(&cfg, &mut discard))
        .map_err(err)?;
    report(&r)
}

#[pyfunction]
#[pyo3(signature = (config_json = None))]
fn train_hamiltonian(py: Python<'_>, config_json: Option<&str>) -> PyResult<String> {
    let cfg = config(config_json)?;
    let r = py
        .detach(|| experiments::run_hamiltonian(&cfg, &mut discard))
        .map_err(err)?;
    report(&r)
}

#[pymodule]
fn qnnlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuit>()?;
    m.add_function(wrap_pyfunction!(compile_truth_table, m)?)?;
    m.add_function(wrap_pyfunction!(parity_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(majority_circuit, m)?)?;
    m.add_function(wrap_pyfunction!(repr_check, m)?)?;
    m.add_function(wrap_pyfunction!(grad_check, m)?)?;
    m.add_function(wrap_pyfunction!(train_parity, m)?)?;
    m.add_function(wrap_pyfunction!(train_majority, m)?)?;
    m.add_function(wrap_pyfunction!(train_hamiltonian, m)?)?;
    Ok(())
}
