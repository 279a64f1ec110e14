//! Python bindings for the peekc engagement-modelling library.

use std::io::Cursor;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use peekc::config::ModelConfig;
use peekc::data_model::{group_sessions, parse_events, ColumnLayout};
use peekc::evaluate::evaluate as eval_rs;
use peekc::learners::ModelKind;
use peekc::simulate::{generate, SyntheticConfig};
use peekc::{Dataset, EngagementEvent, EngagementModel, FragmentId, KcAnnotationSlot, ModelFactory};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// One learner engagement event.
#[pyclass(name = "Event", from_py_object)]
#[derive(Clone)]
struct PyEvent {
    inner: EngagementEvent,
}

#[pymethods]
impl PyEvent {
    /// kcs: list of (kc_id, coverage) pairs, at most five.
    #[new]
    #[pyo3(signature = (user_id, timestamp, kcs, label, lecture_id=0, video_id=0, part_id=0))]
    fn new(
        user_id: u64,
        timestamp: u64,
        kcs: Vec<(u64, f64)>,
        label: u8,
        lecture_id: u64,
        video_id: u64,
        part_id: u64,
    ) -> PyResult<Self> {
        if kcs.len() > peekc::data_model::KC_SLOTS {
            return Err(value_err(format!(
                "at most {} KC slots per event",
                peekc::data_model::KC_SLOTS
            )));
        }
        if label > 1 {
            return Err(value_err("label must be 0 or 1"));
        }
        for &(_, coverage) in &kcs {
            if !(0.0..=1.0).contains(&coverage) {
                return Err(value_err("coverage must lie in [0, 1]"));
            }
        }
        Ok(Self {
            inner: EngagementEvent {
                fragment: FragmentId {
                    lecture_id,
                    video_id,
                    part_id,
                },
                timestamp,
                user_id,
                kcs: kcs
                    .into_iter()
                    .map(|(kc_id, coverage)| KcAnnotationSlot { kc_id, coverage })
                    .collect(),
                label,
            },
        })
    }

    #[getter]
    fn user_id(&self) -> u64 {
        self.inner.user_id
    }

    #[getter]
    fn timestamp(&self) -> u64 {
        self.inner.timestamp
    }

    #[getter]
    fn label(&self) -> u8 {
        self.inner.label
    }

    #[getter]
    fn kcs(&self) -> Vec<(u64, f64)> {
        self.inner.kcs.iter().map(|s| (s.kc_id, s.coverage)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Event(user_id={}, timestamp={}, kcs={:?}, label={})",
            self.inner.user_id,
            self.inner.timestamp,
            self.kcs(),
            self.inner.label
        )
    }
}

/// A train or test split grouped into per-learner sessions.
#[pyclass(name = "Dataset")]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Parse a PEEKC-format CSV file from disk.
    #[staticmethod]
    fn from_csv(path: &str) -> PyResult<Self> {
        let file = std::fs::File::open(path)
            .map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let events = parse_events(file, ColumnLayout::default()).map_err(value_err)?;
        Ok(Self {
            inner: group_sessions(events),
        })
    }

    /// Build a dataset from a list of `Event`s.
    #[staticmethod]
    fn from_events(events: Vec<PyEvent>) -> PyResult<Self> {
        if events.is_empty() {
            return Err(value_err("empty event list"));
        }
        Ok(Self {
            inner: group_sessions(events.into_iter().map(|e| e.inner).collect()),
        })
    }

    #[getter]
    fn n_learners(&self) -> usize {
        self.inner.n_learners()
    }

    #[getter]
    fn n_events(&self) -> usize {
        self.inner.n_events()
    }

    fn user_ids(&self) -> Vec<u64> {
        self.inner.sessions.keys().copied().collect()
    }

    fn events(&self, user_id: u64) -> PyResult<Vec<PyEvent>> {
        let session = self
            .inner
            .sessions
            .get(&user_id)
            .ok_or_else(|| value_err(format!("unknown user id {user_id}")))?;
        Ok(session
            .events
            .iter()
            .map(|e| PyEvent { inner: e.clone() })
            .collect())
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let events: Vec<_> = self.inner.events().cloned().collect();
        let mut buf = Vec::new();
        peekc::data_model::write_events(&mut buf, &events).map_err(value_err)?;
        std::fs::write(path, buf).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))
    }

    fn __len__(&self) -> usize {
        self.inner.n_events()
    }
}

/// Any of the nine engagement models behind a common fit/predict API.
#[pyclass(name = "Model")]
struct PyModel {
    inner: Box<dyn EngagementModel>,
}

fn build_model(name: &str, user_id: u64, train: Option<&PyDataset>) -> PyResult<PyModel> {
    let mut config = ModelConfig::default();
    config.model = ModelKind::parse(name).ok_or_else(|| {
        value_err(format!(
            "unknown model `{name}` (valid: {})",
            ModelConfig::valid_models()
        ))
    })?;
    let factory = ModelFactory::new(config, train.map(|d| &d.inner)).map_err(value_err)?;
    Ok(PyModel {
        inner: factory.build(user_id),
    })
}

#[pymethods]
impl PyModel {
    /// `train` is required for the jaccard-u model only.
    #[new]
    #[pyo3(signature = (name, user_id, train=None))]
    fn new(name: &str, user_id: u64, train: Option<&PyDataset>) -> PyResult<Self> {
        build_model(name, user_id, train)
    }

    fn predict_proba(&self, event: &PyEvent) -> f64 {
        self.inner.predict_proba(&event.inner)
    }

    fn predict(&self, event: &PyEvent) -> u8 {
        self.inner.predict(&event.inner)
    }

    fn fit(&mut self, event: &PyEvent) {
        self.inner.fit(&event.inner)
    }
}

/// Sequentially evaluate `model_name` on `test`; returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (model_name, test, train=None, skip_first=false))]
fn evaluate<'py>(
    py: Python<'py>,
    model_name: &str,
    test: &PyDataset,
    train: Option<&PyDataset>,
    skip_first: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut config = ModelConfig::default();
    config.model = ModelKind::parse(model_name).ok_or_else(|| {
        value_err(format!(
            "unknown model `{model_name}` (valid: {})",
            ModelConfig::valid_models()
        ))
    })?;
    let report = eval_rs(&config, &test.inner, train.map(|d| &d.inner), skip_first)
        .map_err(value_err)?;
    let json = serde_json::to_string(&report).map_err(value_err)?;
    let loads = py.import("json")?.getattr("loads")?;
    loads.call1((json,))
}

/// Generate a seeded synthetic dataset; returns (train, test).
#[pyfunction]
#[pyo3(signature = (seed=7, learners=1000, kcs=20, fragments=60, events_per_learner=50, kcs_per_fragment=2))]
fn simulate(
    seed: u64,
    learners: usize,
    kcs: usize,
    fragments: usize,
    events_per_learner: usize,
    kcs_per_fragment: usize,
) -> PyResult<(PyDataset, PyDataset)> {
    let config = SyntheticConfig {
        n_learners: learners,
        n_kcs: kcs,
        n_fragments: fragments,
        events_per_learner,
        kcs_per_fragment,
        seed,
        ..Default::default()
    };
    if !config.validate() {
        return Err(value_err("invalid synthetic configuration"));
    }
    let (train, test) = generate(&config).split();
    Ok((PyDataset { inner: train }, PyDataset { inner: test }))
}

/// Parse PEEKC-format CSV text into a list of events.
#[pyfunction]
fn parse_csv(text: &str) -> PyResult<Vec<PyEvent>> {
    let events = parse_events(Cursor::new(text), ColumnLayout::default()).map_err(value_err)?;
    Ok(events.into_iter().map(|inner| PyEvent { inner }).collect())
}

/// Model names accepted by `Model` and `evaluate`.
#[pyfunction]
fn model_names() -> Vec<&'static str> {
    ModelKind::ALL.iter().map(|k| k.name()).collect()
}

#[pymodule]
fn peekc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyEvent>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(parse_csv, m)?)?;
    m.add_function(wrap_pyfunction!(model_names, m)?)?;
    Ok(())
}
