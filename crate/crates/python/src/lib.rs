//! Python bindings: datasets, models, the probability helpers, the attacks
//! and the end-to-end pipeline.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use splitleak_core::data::{self, LabelPrior};
use splitleak_core::defense::{self, NoiseConfig};
use splitleak_core::experiment::{self, ExperimentConfig};
use splitleak_core::gia;
use splitleak_core::nn;
use splitleak_core::normattack;
use splitleak_core::numerics::{self, Matrix, ProbVector, Rng};
use splitleak_core::protocol;
use splitleak_core::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Csv(_) | Error::Json(_) | Error::Format { .. } | Error::Decode(_) | Error::Idx(_) => {
            PyIOError::new_err(e.to_string())
        }
        Error::Protocol(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: Vec<Vec<f64>>, cols_if_empty: usize) -> PyResult<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    Matrix::from_rows(&rows).map_err(to_py)
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

fn prob(v: Vec<f64>) -> PyResult<ProbVector> {
    ProbVector::new(v).map_err(to_py)
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset(data::Dataset);

#[pymethods]
impl PyDataset {
    #[getter]
    fn inputs(&self) -> Vec<Vec<f64>> {
        rows_of(self.0.inputs())
    }

    #[getter]
    fn labels(&self) -> Vec<usize> {
        self.0.labels().to_vec()
    }

    #[getter]
    fn ids(&self) -> Vec<u64> {
        self.0.ids().to_vec()
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.0.num_classes()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        data::write_dataset(&self.0, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        data::read_dataset(path).map(Self).map_err(to_py)
    }
}

#[pyfunction]
fn generate_blobs(k: usize, n: usize, d: usize, spread: f64, seed: u64) -> PyResult<PyDataset> {
    data::generate_blobs(k, n, d, spread, seed).map(PyDataset).map_err(to_py)
}

#[pyfunction]
fn generate_imbalanced_binary(n: usize, d: usize, positive_rate: f64, seed: u64) -> PyResult<PyDataset> {
    data::generate_imbalanced_binary(n, d, positive_rate, seed).map(PyDataset).map_err(to_py)
}

#[pyclass(name = "MlpModel", frozen)]
struct PyMlp(nn::MlpModel);

#[pymethods]
impl PyMlp {
    /// Glorot-initialised ReLU network with layer widths `dims`.
    #[new]
    fn new(dims: Vec<usize>, seed: u64) -> PyResult<Self> {
        nn::MlpModel::new(&dims, &mut Rng::new(seed)).map(Self).map_err(to_py)
    }

    #[getter]
    fn dims(&self) -> Vec<usize> {
        self.0.dims()
    }

    fn forward(&self, inputs: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(inputs, self.0.input_dim())?;
        self.0.forward(&x).map(|m| rows_of(&m)).map_err(to_py)
    }

    /// Mean loss, and per-example input gradients of softmax cross-entropy.
    fn input_gradients(&self, inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> PyResult<(f64, Vec<Vec<f64>>)> {
        let x = matrix(inputs, self.0.input_dim())?;
        let y = matrix(targets, self.0.output_dim())?;
        let (loss, g) = nn::backward(&self.0, &x, &y).map_err(to_py)?;
        Ok((loss, rows_of(&g.inputs)))
    }

    fn save(&self, path: &str) -> PyResult<()> {
        nn::write_checkpoint(&self.0, path).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        nn::read_checkpoint(path).map(Self).map_err(to_py)
    }
}

#[pyclass(name = "Transcript", frozen)]
struct PyTranscript(protocol::Transcript);

#[pymethods]
impl PyTranscript {
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        protocol::read_transcript(path).map(Self).map_err(to_py)
    }

    fn save(&self, path: &str) -> PyResult<()> {
        protocol::write_transcript(&self.0, path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    #[getter]
    fn embedding_dim(&self) -> usize {
        self.0.meta.embedding_dim
    }

    #[getter]
    fn noise_sigma(&self) -> Option<f64> {
        self.0.meta.noise_sigma
    }

    /// `(ids, z rows, gradient rows)` for one epoch.
    fn epoch(&self, epoch: u32) -> (Vec<u64>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let (ids, z, g) = self.0.epoch_matrices(epoch);
        (ids, rows_of(&z), rows_of(&g))
    }
}

#[pyfunction]
fn softmax(logits: Vec<f64>) -> PyResult<Vec<f64>> {
    numerics::softmax(&logits).map(ProbVector::into_vec).map_err(to_py)
}

#[pyfunction]
fn entropy(p: Vec<f64>) -> PyResult<f64> {
    Ok(numerics::entropy(&prob(p)?))
}

#[pyfunction]
fn kl_divergence(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    numerics::kl_divergence(&prob(p)?, &prob(q)?).map_err(to_py)
}

#[pyfunction]
fn cross_entropy(y: Vec<f64>, p: Vec<f64>) -> PyResult<f64> {
    numerics::cross_entropy(&prob(y)?, &prob(p)?).map_err(to_py)
}

#[pyfunction]
fn optimal_assignment_accuracy(pred: Vec<usize>, truth: Vec<usize>, k: usize) -> PyResult<f64> {
    numerics::optimal_assignment_accuracy(&pred, &truth, k).map_err(to_py)
}

#[pyfunction]
fn perturb_gradient(grad: Vec<f64>, sigma: f64, seed: u64) -> PyResult<Vec<f64>> {
    defense::perturb_gradient(&grad, &NoiseConfig { sigma, seed }, &mut Rng::new(seed)).map_err(to_py)
}

/// `(threshold, accuracy)` of the best gradient-norm threshold.
#[pyfunction]
fn norm_attack_best_threshold(norms: Vec<f64>, truth: Vec<usize>) -> PyResult<(f64, f64)> {
    normattack::best_threshold(&norms, &truth).map_err(to_py)
}

/// Split training over `train` with optional gradient noise; returns
/// `(f, g, transcript)`.
#[pyfunction]
#[pyo3(signature = (config_text, train, noise_sigma = 0.0))]
fn split_train(config_text: &str, train: &PyDataset, noise_sigma: f64) -> PyResult<(PyMlp, PyMlp, PyTranscript)> {
    let cfg = ExperimentConfig::parse(config_text).map_err(to_py)?;
    let out = experiment::train_split(&cfg, &train.0, noise_sigma).map_err(to_py)?;
    Ok((PyMlp(out.f), PyMlp(out.g), PyTranscript(out.transcript)))
}

/// Gradient inversion attack on the configured epoch; returns
/// `(ids, labels, best_objective)`.
#[pyfunction]
fn run_gia(transcript: &PyTranscript, prior: Vec<f64>, config_text: &str) -> PyResult<(Vec<u64>, Vec<usize>, f64)> {
    let cfg = ExperimentConfig::parse(config_text).map_err(to_py)?;
    let prior = LabelPrior::new(prior).map_err(to_py)?;
    let r = gia::run_gia(&transcript.0, &prior, &cfg.attack_config()).map_err(to_py)?;
    Ok((r.ids, r.labels, r.best_objective))
}

/// The configured pipeline; returns `{"test_accuracy", "leak_accuracy"}`.
#[pyfunction]
fn run_pipeline(config_text: &str) -> PyResult<std::collections::HashMap<String, f64>> {
    let cfg = ExperimentConfig::parse(config_text).map_err(to_py)?;
    let out = experiment::run_pipeline(&cfg).map_err(to_py)?;
    Ok([("test_accuracy".to_string(), out.test_accuracy), ("leak_accuracy".to_string(), out.leak_accuracy)].into())
}

/// Canonical text of the default experiment config.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_text()
}

#[pymodule]
fn splitleak(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyMlp>()?;
    m.add_class::<PyTranscript>()?;
    m.add_function(wrap_pyfunction!(generate_blobs, m)?)?;
    m.add_function(wrap_pyfunction!(generate_imbalanced_binary, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(kl_divergence, m)?)?;
    m.add_function(wrap_pyfunction!(cross_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_assignment_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(perturb_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(norm_attack_best_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(split_train, m)?)?;
    m.add_function(wrap_pyfunction!(run_gia, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    Ok(())
}
