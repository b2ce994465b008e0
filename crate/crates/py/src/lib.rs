use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use dart_core::baseline as bl;
use dart_core::eval::{evaluate_accuracy as eval_accuracy, EvaluationSheet};
use dart_core::lexsim;
use dart_core::schema::SchemaOverrides;
use dart_core::text::{self, FunctionWords};
use dart_core::{DartError, PipelineConfig};

create_exception!(dart_kg, DartException, PyException, "Base error raised by dart_kg.");
create_exception!(dart_kg, ConfigError, DartException, "Invalid or incomplete configuration.");
create_exception!(dart_kg, DataError, DartException, "Malformed or unreadable input data.");

fn to_py(e: DartError) -> PyErr {
    if e.is_config() {
        ConfigError::new_err(e.to_string())
    } else {
        DataError::new_err(e.to_string())
    }
}

fn function_words(path: Option<PathBuf>) -> PyResult<FunctionWords> {
    match path {
        Some(p) => FunctionWords::load(p).map_err(to_py),
        None => Ok(FunctionWords::shipped()),
    }
}

#[pyfunction]
fn normalize(s: &str) -> String {
    text::normalize(s)
}

#[pyfunction]
fn content_words(s: &str) -> Vec<String> {
    FunctionWords::shipped().content_words(s)
}

#[pyfunction]
fn cosine(u: Vec<f32>, v: Vec<f32>) -> PyResult<f64> {
    if u.len() != v.len() {
        return Err(DataError::new_err(format!("vector lengths differ: {} vs {}", u.len(), v.len())));
    }
    Ok(dart_core::cosine(&u, &v))
}

/// Gloss database for word and text similarity.
#[pyclass(name = "LexicalDatabase", frozen)]
struct PyLexicalDatabase {
    db: dart_core::LexicalDatabase,
}

#[pymethods]
impl PyLexicalDatabase {
    #[new]
    #[pyo3(signature = (path, function_words_path=None))]
    fn new(path: PathBuf, function_words_path: Option<PathBuf>) -> PyResult<Self> {
        let fw = function_words(function_words_path)?;
        let db = dart_core::load_lexical_db(path, &fw).map_err(to_py)?;
        Ok(Self { db })
    }

    fn __len__(&self) -> usize {
        self.db.lemma_count()
    }

    fn word_similarity(&self, a: &str, b: &str) -> f64 {
        lexsim::word_similarity(a, b, &self.db)
    }

    /// Similarity of two token lists.
    fn text_similarity(&self, a: Vec<String>, b: Vec<String>) -> f64 {
        lexsim::text_similarity(&a, &b, &self.db)
    }

    /// Similarity of two phrases after content-word extraction.
    fn phrase_similarity(&self, a: &str, b: &str) -> f64 {
        lexsim::text_similarity_str(a, b, &self.db)
    }
}

#[pyclass(name = "EmbeddingStore", frozen)]
struct PyEmbeddingStore {
    store: dart_core::EmbeddingStore,
}

#[pymethods]
impl PyEmbeddingStore {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        let store = dart_core::load_embeddings(path).map_err(to_py)?;
        Ok(Self { store })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.store.dimension()
    }

    fn __len__(&self) -> usize {
        self.store.len()
    }

    fn __contains__(&self, token: &str) -> bool {
        self.store.get(token).is_some()
    }

    fn vector(&self, token: &str) -> Option<Vec<f32>> {
        self.store.get(token).map(<[f32]>::to_vec)
    }

    /// Cosine between two words, or None when either is out of vocabulary.
    fn similarity(&self, a: &str, b: &str) -> Option<f64> {
        self.store.similarity(a, b)
    }
}

#[pyclass(name = "OntologySchema", frozen)]
struct PyOntologySchema {
    schema: dart_core::OntologySchema,
}

#[pymethods]
impl PyOntologySchema {
    #[new]
    fn new(path: PathBuf) -> PyResult<Self> {
        let schema = dart_core::schema::parse_schema(path, &FunctionWords::shipped(), &SchemaOverrides::default())
            .map_err(to_py)?;
        Ok(Self { schema })
    }

    fn is_subclass_of(&self, a: &str, b: &str) -> bool {
        self.schema.is_subclass_of(a, b)
    }

    fn classes(&self) -> Vec<String> {
        self.schema.classes().cloned().collect()
    }

    /// (domain, range) of a property, or None.
    fn signature(&self, iri: &str) -> Option<(String, String)> {
        self.schema.property(iri).map(|p| (p.domain.clone(), p.range.clone()))
    }
}

/// Returns (assignments, sse, sse_history).
#[pyfunction]
#[pyo3(signature = (rows, k, max_iters=100))]
fn kmeans(rows: Vec<Vec<f64>>, k: usize, max_iters: usize) -> PyResult<(Vec<usize>, f64, Vec<f64>)> {
    let r = bl::kmeans(&rows, k, max_iters).map_err(to_py)?;
    Ok((r.assignments, r.sse, r.sse_history))
}

/// Returns (k, [(k, sse), ...]).
#[pyfunction]
#[pyo3(signature = (rows, k_min, k_max, max_iters=100))]
fn elbow(rows: Vec<Vec<f64>>, k_min: usize, k_max: usize, max_iters: usize) -> PyResult<(usize, Vec<(usize, f64)>)> {
    let r = bl::elbow_select_k(&rows, k_min, k_max, max_iters).map_err(to_py)?;
    Ok((r.k, r.sse_curve))
}

/// Returns (correct, total, accuracy) for an evaluation sheet.
#[pyfunction]
fn evaluate_accuracy(sheet: PathBuf) -> PyResult<(usize, usize, f64)> {
    let sheet = EvaluationSheet::load(sheet).map_err(to_py)?;
    let a = eval_accuracy(&sheet).map_err(to_py)?;
    Ok((a.num_correct, a.total, a.accuracy))
}

/// Runs the pipeline and returns report.json as a string.
#[pyfunction]
#[pyo3(signature = (config=None, overrides=None))]
fn run_pipeline(py: Python<'_>, config: Option<PathBuf>, overrides: Option<BTreeMap<String, String>>) -> PyResult<String> {
    let mut cfg = match config {
        Some(p) => PipelineConfig::load(p).map_err(to_py)?,
        None => PipelineConfig::default(),
    };
    for (k, v) in overrides.unwrap_or_default() {
        cfg.set(&k, &v).map_err(to_py)?;
    }
    let out = py.detach(|| dart_core::run_pipeline(&cfg)).map_err(to_py)?;
    serde_json::to_string_pretty(&out.report).map_err(|e| DataError::new_err(e.to_string()))
}

#[pymodule]
fn dart_kg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("DartException", py.get_type::<DartException>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add_class::<PyLexicalDatabase>()?;
    m.add_class::<PyEmbeddingStore>()?;
    m.add_class::<PyOntologySchema>()?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(content_words, m)?)?;
    m.add_function(wrap_pyfunction!(cosine, m)?)?;
    m.add_function(wrap_pyfunction!(kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(elbow, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
