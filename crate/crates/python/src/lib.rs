//! Python bindings. Structured values cross the boundary as the same JSON
//! the service speaks, decoded into plain dicts and lists.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use emocue_core::analytics::{
    corpus_stats as core_corpus_stats, familiarity as core_familiarity, segment_sessions_scoped, ChatLog,
    FamiliarityOptions, TimeoutScope, DEFAULT_TIMEOUT_MS,
};
use emocue_core::classify::{auc as core_auc, load_with_embeddings, LabeledCorpus};
use emocue_core::eval::evaluate as core_evaluate;
use emocue_core::fixture::make_fixture as core_make_fixture;
use emocue_core::pipeline::ConversationSessions;
use emocue_core::vectorize::Language;
use emocue_core::{compact_to_7, pick_category, CompactionMap, Message, PipelineConfig};
use emocue_service::{Engine as ServiceEngine, ReplaySpeed, ServiceConfig, ServiceError, Subscription as ServiceSubscription};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

create_exception!(emocue, EmocueError, PyException);

fn core_err(e: emocue_core::Error) -> PyErr {
    EmocueError::new_err(e.to_string())
}

fn service_err(e: ServiceError) -> PyErr {
    EmocueError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| EmocueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = value.py().import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn service_config(
    bundles: Vec<PathBuf>,
    embeddings: Option<Vec<PathBuf>>,
    pipeline: Option<&Bound<'_, PyAny>>,
) -> PyResult<ServiceConfig> {
    let mut config = ServiceConfig::default();
    if let Some(p) = pipeline {
        config.pipeline = from_py::<PipelineConfig>(p)?;
    }
    config
        .set_bundles(&bundles, &embeddings.unwrap_or_default())
        .map_err(service_err)?;
    Ok(config)
}

/// Annotates texts and messages. `annotate` keeps per-conversation
/// session state, so consecutive messages from a sender are smoothed.
#[pyclass(module = "emocue")]
struct Annotator {
    inner: emocue_core::Annotator,
    sessions: Mutex<BTreeMap<String, ConversationSessions>>,
}

#[pymethods]
impl Annotator {
    #[new]
    #[pyo3(signature = (bundles, embeddings = None, pipeline = None))]
    fn new(bundles: Vec<PathBuf>, embeddings: Option<Vec<PathBuf>>, pipeline: Option<&Bound<'_, PyAny>>) -> PyResult<Self> {
        let inner = service_config(bundles, embeddings, pipeline)?
            .build_annotator()
            .map_err(service_err)?;
        Ok(Annotator {
            inner,
            sessions: Mutex::new(BTreeMap::new()),
        })
    }

    #[getter]
    fn languages(&self) -> Vec<&'static str> {
        [("en", Language::En), ("zh", Language::Zh)]
            .into_iter()
            .filter(|(_, l)| self.inner.has_language(*l))
            .map(|(n, _)| n)
            .collect()
    }

    #[pyo3(signature = (text, message_id = "text"))]
    fn annotate_text<'py>(&self, py: Python<'py>, text: &str, message_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let annotation = self.inner.annotate_text(message_id, text).map_err(core_err)?;
        to_py(py, &annotation)
    }

    fn annotate<'py>(&self, py: Python<'py>, message: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let message: Message = from_py(message)?;
        let mut sessions = self.sessions.lock().unwrap_or_else(|e| e.into_inner());
        let state = sessions
            .entry(message.conversation_id.clone())
            .or_insert_with(|| ConversationSessions::new(&message.conversation_id));
        let annotation = self.inner.annotate(&message, state).map_err(core_err)?;
        to_py(py, &annotation)
    }

    /// Forgets all session and smoothing state.
    fn reset(&self) {
        self.sessions.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

/// The service engine without the network: ingest, cue state, replay and
/// subscriber frames.
#[pyclass(module = "emocue")]
struct Engine {
    inner: ServiceEngine,
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (bundles, embeddings = None, log_path = None, pipeline = None))]
    fn new(
        bundles: Vec<PathBuf>,
        embeddings: Option<Vec<PathBuf>>,
        log_path: Option<PathBuf>,
        pipeline: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Self> {
        let mut config = service_config(bundles, embeddings, pipeline)?;
        config.log_path = log_path;
        let inner = emocue_service::engine_from_config(&config).map_err(service_err)?;
        Ok(Engine { inner })
    }

    fn ingest<'py>(&self, py: Python<'py>, message: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
        let message: Message = from_py(message)?;
        let ingested = py.detach(|| self.inner.ingest(message)).map_err(service_err)?;
        to_py(py, &ingested)
    }

    fn state<'py>(&self, py: Python<'py>, conversation_id: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.state(conversation_id).map_err(service_err)?)
    }

    fn conversation_ids(&self) -> Vec<String> {
        self.inner.conversation_ids()
    }

    fn health<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.health())
    }

    /// `speed` divides the logged gaps; without it the log replays as
    /// fast as possible.
    #[pyo3(signature = (path, speed = None))]
    fn replay<'py>(&self, py: Python<'py>, path: PathBuf, speed: Option<f64>) -> PyResult<Bound<'py, PyAny>> {
        let speed = speed.map_or(ReplaySpeed::Max, ReplaySpeed::RealtimeFactor);
        let summary = py.detach(|| self.inner.replay(&path, speed)).map_err(service_err)?;
        to_py(py, &summary)
    }

    /// Frames for `user` are queued from now on; self-sent messages get
    /// no notification.
    #[pyo3(signature = (user = None))]
    fn subscribe(&self, user: Option<String>) -> Subscription {
        Subscription {
            inner: Mutex::new(self.inner.subscribe(user)),
        }
    }
}

#[pyclass(module = "emocue")]
struct Subscription {
    inner: Mutex<ServiceSubscription>,
}

#[pymethods]
impl Subscription {
    /// Frames queued so far, oldest first.
    fn drain<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyAny>>> {
        let mut sub = self.inner.lock().unwrap_or_else(|e| e.into_inner());
        let json = py.import("json")?;
        let mut out = Vec::new();
        while let Ok(text) = sub.frames.try_recv() {
            out.push(json.call_method1("loads", (&*text,))?);
        }
        Ok(out)
    }
}

/// Area under the ROC curve; ties count half.
#[pyfunction]
fn auc(scores: Vec<f64>, labels: Vec<bool>) -> PyResult<f64> {
    core_auc(&scores, &labels).map_err(core_err)
}

/// Collapses 40 named scores to the 7 categories and picks one.
#[pyfunction]
fn compact<'py>(py: Python<'py>, scores: BTreeMap<String, f64>) -> PyResult<Bound<'py, PyAny>> {
    let map = CompactionMap::builtin();
    let compact = compact_to_7(&scores, &map).map_err(core_err)?;
    let colors = emocue_core::ColorMap::default();
    let (category, color) = pick_category(&compact, &colors);
    to_py(
        py,
        &json!({ "compact_scores": compact, "category": category, "color": color.hex }),
    )
}

/// Writes the seeded fixture set to `out` and returns its checksums and
/// held-out macro AUCs.
#[pyfunction]
#[pyo3(signature = (out, seed = 7))]
fn make_fixture<'py>(py: Python<'py>, out: PathBuf, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let fixture = py.detach(|| core_make_fixture(seed)).map_err(core_err)?;
    fixture.write(&out).map_err(core_err)?;
    let checksums: serde_json::Value = std::fs::read_to_string(out.join("checksums.json"))
        .map_err(|e| EmocueError::new_err(e.to_string()))
        .and_then(|t| serde_json::from_str(&t).map_err(|e| EmocueError::new_err(e.to_string())))?;
    to_py(
        py,
        &json!({
            "out": out,
            "seed": seed,
            "checksums": checksums,
            "macro_auc": { "en": fixture.en_report.macro_auc, "zh": fixture.zh_report.macro_auc },
        }),
    )
}

/// Scores a bundle on the held-out side of the seeded split.
#[pyfunction]
#[pyo3(signature = (bundle, corpus, seed = 7, train_ratio = 0.8, embeddings = None))]
fn evaluate<'py>(
    py: Python<'py>,
    bundle: PathBuf,
    corpus: PathBuf,
    seed: u64,
    train_ratio: f64,
    embeddings: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let map = CompactionMap::builtin();
    let report = py
        .detach(|| {
            let (bundle, table) = load_with_embeddings(&bundle, embeddings.as_deref(), &map)?;
            let corpus = LabeledCorpus::load(&corpus, &map)?;
            core_evaluate(&bundle, &table, &corpus, &map, seed, train_ratio)
        })
        .map_err(core_err)?;
    to_py(py, &report)
}

fn load_log(path: &Path) -> PyResult<ChatLog> {
    ChatLog::load(path).map_err(core_err)
}

#[pyfunction]
#[pyo3(signature = (log, timeout_ms = DEFAULT_TIMEOUT_MS, per_sender = false))]
fn segment_sessions<'py>(py: Python<'py>, log: PathBuf, timeout_ms: i64, per_sender: bool) -> PyResult<Bound<'py, PyAny>> {
    let log = load_log(&log)?;
    let scope = if per_sender { TimeoutScope::PerSender } else { TimeoutScope::AnyParty };
    to_py(py, &segment_sessions_scoped(log.messages(), timeout_ms, scope))
}

#[pyfunction]
#[pyo3(signature = (log, timeout_ms = DEFAULT_TIMEOUT_MS))]
fn corpus_stats<'py>(py: Python<'py>, log: PathBuf, timeout_ms: i64) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &core_corpus_stats(&load_log(&log)?, timeout_ms))
}

#[pyfunction]
#[pyo3(signature = (log, user_a, user_b, high_threshold = 100, include_groups = false, timeout_ms = DEFAULT_TIMEOUT_MS))]
fn familiarity<'py>(
    py: Python<'py>,
    log: PathBuf,
    user_a: &str,
    user_b: &str,
    high_threshold: usize,
    include_groups: bool,
    timeout_ms: i64,
) -> PyResult<Bound<'py, PyAny>> {
    let options = FamiliarityOptions {
        high_threshold,
        include_groups,
        timeout_ms,
    };
    to_py(py, &core_familiarity(&load_log(&log)?, user_a, user_b, &options))
}

#[pymodule]
fn emocue(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EmocueError", m.py().get_type::<EmocueError>())?;
    m.add_class::<Annotator>()?;
    m.add_class::<Engine>()?;
    m.add_class::<Subscription>()?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(compact, m)?)?;
    m.add_function(wrap_pyfunction!(make_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(segment_sessions, m)?)?;
    m.add_function(wrap_pyfunction!(corpus_stats, m)?)?;
    m.add_function(wrap_pyfunction!(familiarity, m)?)?;
    Ok(())
}
