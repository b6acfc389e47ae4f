//! Python bindings for the false-label ensemble library.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use falselabel::anneal::{self as annealing, trace_to_csv, AnnealSchedule, InitMode};
use falselabel::dataset::{Dataset, Label};
use falselabel::diversity::{self, VoteProfile};
use falselabel::ensemble::{self, EnsembleModel, FalseLabelConfig};
use falselabel::error::Error;
use falselabel::harness::{self, ExperimentConfig};
use falselabel::hmrf::{self, EnergyContext, EnergySettings, LabelMatrix};
use falselabel::naive_bayes::NaiveBayesModel;
use falselabel::stats::{self, FriedmanBlocks, MethodScores};
use falselabel::synth;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn label(v: i64) -> PyResult<Label> {
    match v {
        1 => Ok(Label::Positive),
        -1 | 0 => Ok(Label::Negative),
        _ => Err(PyValueError::new_err(format!("labels must be -1 or +1, got {v}"))),
    }
}

fn labels(v: &[i64]) -> PyResult<Vec<Label>> {
    v.iter().map(|&x| label(x)).collect()
}

fn ints(v: &[Label]) -> Vec<i8> {
    v.iter().map(|l| l.value()).collect()
}

fn matrix(rows: Vec<Vec<i64>>) -> PyResult<LabelMatrix> {
    let rows = rows.iter().map(|r| labels(r)).collect::<PyResult<_>>()?;
    LabelMatrix::from_rows(rows).map_err(err)
}

fn from_json<T: serde::de::DeserializeOwned + Default>(text: Option<&str>) -> PyResult<T> {
    match text {
        Some(t) => serde_json::from_str(t).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(T::default()),
    }
}

#[pyclass(name = "Dataset", module = "falselabel_py", from_py_object)]
#[derive(Clone)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[new]
    #[pyo3(signature = (features, labels, name = "data"))]
    fn new(features: Vec<Vec<f64>>, labels: Vec<i64>, name: &str) -> PyResult<Self> {
        let labels = self::labels(&labels)?;
        Ok(PyDataset {
            inner: Dataset::new(name, features, labels).map_err(err)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (path, label_column = "label"))]
    fn load_csv(path: &str, label_column: &str) -> PyResult<Self> {
        Ok(PyDataset {
            inner: Dataset::load_csv(path, label_column).map_err(err)?,
        })
    }

    fn write_csv(&self, path: &str) -> PyResult<()> {
        self.inner.write_csv(path).map_err(err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn feature_count(&self) -> usize {
        self.inner.feature_count()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn features(&self, i: usize) -> PyResult<Vec<f64>> {
        if i >= self.inner.len() {
            return Err(PyValueError::new_err(format!("row {i} out of range")));
        }
        Ok(self.inner.features(i).to_vec())
    }

    fn labels(&self) -> Vec<i8> {
        ints(self.inner.labels())
    }

    fn class_counts(&self) -> (usize, usize) {
        self.inner.class_counts()
    }

    /// Returns the two halves of a seeded random split.
    fn random_split(&self, seed: u64) -> PyResult<(PyDataset, PyDataset)> {
        let s = self.inner.random_split(seed).map_err(err)?;
        Ok((PyDataset { inner: s.part0 }, PyDataset { inner: s.part1 }))
    }

    fn bootstrap_balance(&self, seed: u64) -> PyResult<PyDataset> {
        Ok(PyDataset {
            inner: self.inner.bootstrap_balance(seed).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Dataset(name={:?}, rows={}, features={})",
            self.inner.name(),
            self.inner.len(),
            self.inner.feature_count()
        )
    }
}

#[pyclass(name = "NaiveBayes", module = "falselabel_py", from_py_object)]
#[derive(Clone)]
struct PyNaiveBayes {
    inner: NaiveBayesModel,
}

#[pymethods]
impl PyNaiveBayes {
    #[staticmethod]
    fn train(data: &PyDataset) -> PyResult<Self> {
        Ok(PyNaiveBayes {
            inner: NaiveBayesModel::train(&data.inner).map_err(err)?,
        })
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<i8> {
        Ok(self.inner.predict(&x).map_err(err)?.value())
    }

    fn predict_all(&self, data: &PyDataset) -> PyResult<Vec<i8>> {
        Ok(ints(&self.inner.predict_all(&data.inner).map_err(err)?))
    }

    fn log_scores(&self, x: Vec<f64>) -> PyResult<(f64, f64)> {
        self.inner.log_scores(&x).map_err(err)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyNaiveBayes {
            inner: NaiveBayesModel::from_json(text).map_err(err)?,
        })
    }
}

#[pyclass(name = "Ensemble", module = "falselabel_py", from_py_object)]
#[derive(Clone)]
struct PyEnsemble {
    inner: EnsembleModel,
}

#[pymethods]
impl PyEnsemble {
    /// Builds a false-label ensemble of `size` members. `config` is an
    /// optional JSON object with `energy`, `schedule`, `init_mode` and
    /// `max_resplits`.
    #[staticmethod]
    #[pyo3(signature = (data, size, seed = 0, config = None))]
    fn false_label(data: &PyDataset, size: usize, seed: u64, config: Option<&str>) -> PyResult<Self> {
        let config: FalseLabelConfig = from_json(config)?;
        let e = ensemble::build_false_label_ensemble(&data.inner, size, &config, seed).map_err(err)?;
        Ok(PyEnsemble {
            inner: EnsembleModel::FalseLabel(e),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (data, size, seed = 0))]
    fn bagging(data: &PyDataset, size: usize, seed: u64) -> PyResult<Self> {
        let e = ensemble::build_bagging(&data.inner, size, seed).map_err(err)?;
        Ok(PyEnsemble {
            inner: EnsembleModel::Baseline(e),
        })
    }

    #[staticmethod]
    #[pyo3(signature = (data, rounds, seed = 0))]
    fn adaboost(data: &PyDataset, rounds: usize, seed: u64) -> PyResult<Self> {
        let e = ensemble::build_adaboost(&data.inner, rounds, seed).map_err(err)?;
        Ok(PyEnsemble {
            inner: EnsembleModel::Baseline(e),
        })
    }

    #[getter]
    fn size(&self) -> usize {
        match &self.inner {
            EnsembleModel::FalseLabel(e) => e.members.len(),
            EnsembleModel::Baseline(e) => e.members.len(),
        }
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<i8> {
        Ok(self.inner.predict(&x).map_err(err)?.value())
    }

    fn predict_all(&self, data: &PyDataset) -> PyResult<Vec<i8>> {
        data.inner
            .rows()
            .map(|(x, _)| self.inner.predict(x).map(|l| l.value()).map_err(err))
            .collect()
    }

    fn accuracy(&self, data: &PyDataset) -> PyResult<f64> {
        let hits = data
            .inner
            .rows()
            .map(|(x, y)| self.inner.predict(x).map(|p| p == y))
            .collect::<Result<Vec<bool>, _>>()
            .map_err(err)?;
        Ok(hits.iter().filter(|&&h| h).count() as f64 / hits.len().max(1) as f64)
    }

    /// Diversity decomposition of the member votes on `data`.
    fn decompose<'py>(&self, py: Python<'py>, data: &PyDataset) -> PyResult<Bound<'py, PyDict>> {
        let profiles = self.inner.vote_profiles(&data.inner).map_err(err)?;
        report_dict(py, &diversity::decompose(&profiles).map_err(err)?)
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(err)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyEnsemble {
            inner: EnsembleModel::from_json(text).map_err(err)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path).map_err(err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyEnsemble {
            inner: EnsembleModel::load(path).map_err(err)?,
        })
    }
}

fn report_dict<'py>(py: Python<'py>, r: &diversity::DecompositionReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("mean_individual_loss", r.mean_individual_loss)?;
    d.set_item("good_diversity", r.good_diversity)?;
    d.set_item("bad_diversity", r.bad_diversity)?;
    d.set_item("ensemble_loss", r.ensemble_loss)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (sep, dims, count, seed = 0))]
fn synthetic(sep: f64, dims: usize, count: usize, seed: u64) -> PyResult<PyDataset> {
    Ok(PyDataset {
        inner: synth::generate_synthetic(sep, dims, count, seed).map_err(err)?,
    })
}

#[pyfunction]
fn majority_vote(outputs: Vec<i64>) -> PyResult<i8> {
    Ok(diversity::majority_vote(&labels(&outputs)?).map_err(err)?.value())
}

/// `outputs[k]` holds the member votes on instance `k`.
#[pyfunction]
fn decompose<'py>(py: Python<'py>, outputs: Vec<Vec<i64>>, truth: Vec<i64>) -> PyResult<Bound<'py, PyDict>> {
    if outputs.len() != truth.len() {
        return Err(PyValueError::new_err("outputs and truth differ in length"));
    }
    let profiles = outputs
        .iter()
        .zip(&truth)
        .map(|(o, &t)| Ok(VoteProfile::new(labels(o)?, label(t)?)))
        .collect::<PyResult<Vec<_>>>()?;
    report_dict(py, &diversity::decompose(&profiles).map_err(err)?)
}

fn context(orig: &[i64], truth: &[i64], settings: Option<&str>) -> PyResult<EnergyContext> {
    let settings: EnergySettings = from_json(settings)?;
    EnergyContext::new(labels(orig)?, labels(truth)?, settings).map_err(err)
}

/// Energy terms of a label matrix; `settings` is an optional JSON object of
/// energy settings.
#[pyfunction]
#[pyo3(signature = (matrix, orig, truth, settings = None))]
fn energy<'py>(
    py: Python<'py>,
    matrix: Vec<Vec<i64>>,
    orig: Vec<i64>,
    truth: Vec<i64>,
    settings: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let ctx = context(&orig, &truth, settings)?;
    let b = hmrf::total_energy(&self::matrix(matrix)?, &ctx).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("u_ind", b.u_ind)?;
    d.set_item("u_votes", b.u_votes)?;
    d.set_item("u_bad", b.u_bad)?;
    d.set_item("u_smooth", b.u_smooth)?;
    d.set_item("total", b.total)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (matrix, orig, truth, i, j, settings = None))]
fn delta_energy(
    matrix: Vec<Vec<i64>>,
    orig: Vec<i64>,
    truth: Vec<i64>,
    i: usize,
    j: usize,
    settings: Option<&str>,
) -> PyResult<f64> {
    let ctx = context(&orig, &truth, settings)?;
    hmrf::delta_energy(&self::matrix(matrix)?, &ctx, i, j).map_err(err)
}

/// Anneals a `rows`-row label matrix. Returns the best state, its energy,
/// the iteration count and the trace as CSV text.
#[pyfunction]
#[pyo3(signature = (orig, truth, rows, settings = None, schedule = None, init = "all_negative", seed = 0))]
#[allow(clippy::too_many_arguments)]
fn anneal<'py>(
    py: Python<'py>,
    orig: Vec<i64>,
    truth: Vec<i64>,
    rows: usize,
    settings: Option<&str>,
    schedule: Option<&str>,
    init: &str,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let ctx = context(&orig, &truth, settings)?;
    let mut schedule: AnnealSchedule = from_json(schedule)?;
    schedule.seed = seed;
    let mode: InitMode = serde_json::from_value(serde_json::Value::String(init.to_string()))
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let start = annealing::initial_state(rows, ctx.len(), mode, &ctx, seed).map_err(err)?;
    let r = annealing::anneal(&ctx, &schedule, start, None).map_err(err)?;
    let d = PyDict::new(py);
    let best: Vec<Vec<i8>> = r.best_state.row_vectors().map(ints).collect();
    d.set_item("best_state", best)?;
    d.set_item("best_energy", r.best_energy)?;
    d.set_item("iterations", r.iterations)?;
    d.set_item("trace_csv", trace_to_csv(&r.trace))?;
    Ok(d)
}

#[pyfunction]
fn summarize(scores: Vec<f64>) -> PyResult<(f64, f64)> {
    stats::summarize(&scores).map_err(err)
}

fn method_scores(scores: BTreeMap<String, BTreeMap<String, Vec<f64>>>) -> Vec<MethodScores> {
    scores
        .into_iter()
        .map(|(method, per_dataset)| MethodScores { method, per_dataset })
        .collect()
}

/// Scores map method -> dataset -> per-split accuracies. Methods are ranked
/// in sorted name order.
#[pyfunction]
#[pyo3(signature = (scores, per_split = false))]
fn friedman<'py>(
    py: Python<'py>,
    scores: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    per_split: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let blocks = if per_split {
        FriedmanBlocks::PerSplit
    } else {
        FriedmanBlocks::DatasetMeans
    };
    let r = stats::friedman_test(&method_scores(scores), blocks).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("statistic", r.statistic)?;
    d.set_item("degrees_of_freedom", r.degrees_of_freedom)?;
    d.set_item("p_value", r.p_value)?;
    d.set_item("mean_ranks", r.mean_ranks)?;
    Ok(d)
}

#[pyfunction]
fn diff_vs_best<'py>(
    py: Python<'py>,
    proposed: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
    baselines: BTreeMap<String, BTreeMap<String, Vec<f64>>>,
) -> PyResult<Bound<'py, PyDict>> {
    let t = stats::diff_vs_best(&method_scores(proposed), &method_scores(baselines)).map_err(err)?;
    let d = PyDict::new(py);
    let mut table: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (ds, row) in t.datasets.iter().zip(&t.values) {
        table.insert(ds.clone(), t.methods.iter().cloned().zip(row.iter().copied()).collect());
    }
    d.set_item("table", table)?;
    let sums: BTreeMap<String, f64> = t.methods.iter().cloned().zip(t.sums.iter().copied()).collect();
    d.set_item("sums", sums)?;
    d.set_item("recommended", t.recommended())?;
    Ok(d)
}

/// Runs an experiment from a JSON config string and writes its reports.
/// Returns one dict per run record.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config: &str) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let report = py.detach(|| harness::run_experiment(&cfg)).map_err(err)?;
    report
        .records
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("dataset", &r.dataset)?;
            d.set_item("method", &r.method)?;
            d.set_item("split_index", r.split_index)?;
            d.set_item("accuracy", r.accuracy)?;
            d.set_item("wall_time_micros", r.wall_time_micros)?;
            d.set_item("seed_used", r.seed_used)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn falselabel_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyNaiveBayes>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(majority_vote, m)?)?;
    m.add_function(wrap_pyfunction!(decompose, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(delta_energy, m)?)?;
    m.add_function(wrap_pyfunction!(anneal, m)?)?;
    m.add_function(wrap_pyfunction!(summarize, m)?)?;
    m.add_function(wrap_pyfunction!(friedman, m)?)?;
    m.add_function(wrap_pyfunction!(diff_vs_best, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
