//! Python bindings for the offline prompt evaluation and optimization
//! toolkit: corpus loading and grading, mock embeddings, reward-model
//! training and persistence, selection strategies, sweeps, and the cost
//! table.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use oirl_core::bench;
use oirl_core::corpus;
use oirl_core::embedding;
use oirl_core::llm::PriceSheet;
use oirl_core::policy;
use oirl_core::reward;
use oirl_core::synth;
use oirl_core::Error;

fn to_py(err: Error) -> PyErr {
    match &err {
        Error::Io(_) => PyIOError::new_err(format!("{}: {err}", err.name())),
        _ => PyValueError::new_err(format!("{}: {err}", err.name())),
    }
}

fn json_to_py<'py>(py: Python<'py>, value: &serde_json::Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match value {
        serde_json::Value::Null => py.None().into_bound(py),
        serde_json::Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any()
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any()
            }
        }
        serde_json::Value::String(s) => s.into_pyobject(py)?.into_any(),
        serde_json::Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_any()
        }
    })
}

fn selection_to_py<'py>(
    py: Python<'py>,
    selection: &policy::PromptSelection,
) -> PyResult<Bound<'py, PyAny>> {
    json_to_py(py, &selection.to_trace_json())
}

/// Grades a response against the golden answer; returns 0 or 1.
#[pyfunction]
fn grade_answer(golden: &str, response: &str) -> u8 {
    corpus::grade_answer(golden, response) as u8
}

/// Last numeric token of a text, if any.
#[pyfunction]
fn extract_final_number(text: &str) -> Option<f64> {
    corpus::extract_final_number(text)
}

/// Gradient and hessian of the logistic loss at a margin.
#[pyfunction]
fn logistic_grad_hess(margin: f64, label: bool) -> (f64, f64) {
    reward::logistic_grad_hess(margin, label)
}

/// All C(n, k) index subsets in lexicographic order.
#[pyfunction]
fn enumerate_combinations(n: usize, k: usize) -> PyResult<Vec<Vec<usize>>> {
    bench::enumerate_combinations(n, k).map_err(to_py)
}

#[pyclass(name = "BoostConfig", module = "oirl")]
#[derive(Clone)]
struct PyBoostConfig {
    inner: reward::BoostConfig,
}

#[pymethods]
impl PyBoostConfig {
    #[new]
    #[pyo3(signature = (max_depth=10, eta=0.001, num_rounds=500, lambda_=1.0, gamma=0.0,
                        min_child_weight=1.0, base_margin=0.0, seed=0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        max_depth: usize,
        eta: f64,
        num_rounds: usize,
        lambda_: f64,
        gamma: f64,
        min_child_weight: f64,
        base_margin: f64,
        seed: u64,
    ) -> PyResult<Self> {
        let inner = reward::BoostConfig {
            max_depth,
            eta,
            num_rounds,
            lambda: lambda_,
            gamma,
            min_child_weight,
            base_margin,
            seed,
        };
        inner.validate().map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn max_depth(&self) -> usize {
        self.inner.max_depth
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn num_rounds(&self) -> usize {
        self.inner.num_rounds
    }

    fn __repr__(&self) -> String {
        format!(
            "BoostConfig(max_depth={}, eta={}, num_rounds={}, lambda_={}, gamma={}, \
             min_child_weight={}, base_margin={}, seed={})",
            self.inner.max_depth,
            self.inner.eta,
            self.inner.num_rounds,
            self.inner.lambda,
            self.inner.gamma,
            self.inner.min_child_weight,
            self.inner.base_margin,
            self.inner.seed
        )
    }
}

#[pyclass(name = "Corpus", module = "oirl")]
struct PyCorpus {
    inner: corpus::Corpus,
}

#[pymethods]
impl PyCorpus {
    /// Loads a corpus from a manifest file.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: corpus::load_corpus(&path).map_err(to_py)?,
        })
    }

    #[getter]
    fn task_name(&self) -> String {
        self.inner.task_name().to_string()
    }

    #[getter]
    fn n_train_queries(&self) -> usize {
        self.inner.n_train_queries()
    }

    #[getter]
    fn n_test_queries(&self) -> usize {
        self.inner.n_test_queries()
    }

    #[getter]
    fn k_train_prompts(&self) -> usize {
        self.inner.k_train_prompts()
    }

    #[getter]
    fn p_heldout_prompts(&self) -> usize {
        self.inner.p_heldout_prompts()
    }

    fn train_prompt_ids(&self) -> Vec<String> {
        self.inner
            .train_prompts()
            .into_iter()
            .map(|p| p.id.clone())
            .collect()
    }

    fn heldout_prompt_ids(&self) -> Vec<String> {
        self.inner
            .heldout_prompts()
            .into_iter()
            .map(|p| p.id.clone())
            .collect()
    }

    fn test_query_ids(&self) -> Vec<String> {
        self.inner.test_queries().iter().map(|q| q.id.clone()).collect()
    }

    /// Save the corpus (manifest plus component files) into a directory.
    fn save(&self, dir: PathBuf) -> PyResult<PathBuf> {
        corpus::save_corpus(&dir, &self.inner).map_err(to_py)
    }
}

#[pyclass(name = "DemonstrationSet", module = "oirl")]
struct PyDemonstrationSet {
    inner: corpus::DemonstrationSet,
}

#[pymethods]
impl PyDemonstrationSet {
    /// Loads a demonstration file, resolving references against a corpus.
    #[staticmethod]
    fn load(path: PathBuf, corpus_obj: &PyCorpus) -> PyResult<Self> {
        Ok(Self {
            inner: corpus::load_demonstrations(&path, &corpus_obj.inner).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn split_tag(&self) -> String {
        self.inner.split_tag().as_str().to_string()
    }

    fn reward_for(&self, query_id: &str, prompt_id: &str) -> Option<u8> {
        self.inner.reward_for(query_id, prompt_id).map(|r| r as u8)
    }

    fn prompt_ids(&self) -> Vec<String> {
        self.inner.prompt_ids()
    }

    fn query_ids(&self) -> Vec<String> {
        self.inner.query_ids()
    }

    fn subset_by_prompts(&self, prompt_ids: Vec<String>) -> PyResult<Self> {
        Ok(Self {
            inner: corpus::subset_by_prompts(&self.inner, &prompt_ids).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        corpus::save_demonstration_records(&path, self.inner.records()).map_err(to_py)
    }
}

#[pyclass(name = "EmbeddingStore", module = "oirl")]
struct PyEmbeddingStore {
    inner: embedding::EmbeddingStore,
}

#[pymethods]
impl PyEmbeddingStore {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: embedding::EmbeddingStore::load(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(&path).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn vector_for_text(&self, text: &str) -> Option<Vec<f64>> {
        self.inner.get_for_text(text).map(|v| v.values.clone())
    }
}

/// Deterministic unit-norm embeddings seeded by (seed, text).
#[pyclass(name = "MockEmbedder", module = "oirl")]
struct PyMockEmbedder {
    inner: embedding::Embedder,
}

#[pymethods]
impl PyMockEmbedder {
    #[new]
    #[pyo3(signature = (seed=0, dimension=16))]
    fn new(seed: u64, dimension: usize) -> Self {
        Self {
            inner: embedding::Embedder::mock(seed, dimension),
        }
    }

    fn embed_text(&self, text: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.embed_text(text).map_err(to_py)?.values.clone())
    }

    fn embed_corpus(&self, corpus_obj: &PyCorpus) -> PyResult<PyEmbeddingStore> {
        Ok(PyEmbeddingStore {
            inner: self.inner.embed_corpus(&corpus_obj.inner).map_err(to_py)?,
        })
    }
}

#[pyclass(name = "RewardModel", module = "oirl")]
struct PyRewardModel {
    inner: reward::RewardModel,
}

#[pymethods]
impl PyRewardModel {
    /// Trains the boosted-tree proxy reward model.
    #[staticmethod]
    fn train(
        demos: &PyDemonstrationSet,
        corpus_obj: &PyCorpus,
        store: &PyEmbeddingStore,
        config: &PyBoostConfig,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: reward::train_reward_model(
                &demos.inner,
                &corpus_obj.inner,
                &store.inner,
                &config.inner,
            )
            .map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: reward::load_model(&path).map_err(to_py)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        reward::save_model(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    #[getter]
    fn num_trees(&self) -> usize {
        self.inner.trees().len()
    }

    #[getter]
    fn training_fingerprint(&self) -> String {
        self.inner.training_fingerprint().to_string()
    }

    /// Scores a raw feature vector (query embedding followed by prompt
    /// embedding).
    fn predict(&self, features: Vec<f64>) -> PyResult<f64> {
        self.inner.predict_slice(&features).map_err(to_py)
    }

    /// Accuracy/precision report as a dict.
    #[pyo3(signature = (demos, corpus_obj, store, threshold=0.5))]
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        demos: &PyDemonstrationSet,
        corpus_obj: &PyCorpus,
        store: &PyEmbeddingStore,
        threshold: f64,
    ) -> PyResult<Bound<'py, PyAny>> {
        let report = reward::evaluate_reward_model(
            &self.inner,
            &demos.inner,
            &corpus_obj.inner,
            &store.inner,
            threshold,
        )
        .map_err(to_py)?;
        let value = serde_json::to_value(&report)
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        json_to_py(py, &value)
    }
}

#[pyclass(name = "SyntheticBenchmark", module = "oirl")]
struct PySyntheticBenchmark {
    corpus: corpus::Corpus,
    train: corpus::DemonstrationSet,
    test_q: corpus::DemonstrationSet,
    test_p: corpus::DemonstrationSet,
    store: embedding::EmbeddingStore,
}

#[pymethods]
impl PySyntheticBenchmark {
    #[getter]
    fn corpus(&self) -> PyCorpus {
        PyCorpus {
            inner: self.corpus.clone(),
        }
    }

    #[getter]
    fn train(&self) -> PyDemonstrationSet {
        PyDemonstrationSet {
            inner: self.train.clone(),
        }
    }

    #[getter]
    fn test_q(&self) -> PyDemonstrationSet {
        PyDemonstrationSet {
            inner: self.test_q.clone(),
        }
    }

    #[getter]
    fn test_p(&self) -> PyDemonstrationSet {
        PyDemonstrationSet {
            inner: self.test_p.clone(),
        }
    }

    #[getter]
    fn store(&self) -> PyEmbeddingStore {
        PyEmbeddingStore {
            inner: self.store.clone(),
        }
    }
}

/// Generates a synthetic benchmark with a planted linear reward rule. The
/// same seed drives both the world and the mock embeddings.
#[pyfunction]
#[pyo3(signature = (seed=0, dimension=16, label_noise=0.0, n_train_q=100, n_test_q=20,
                    k_train_p=6, p_heldout_p=10))]
fn generate_benchmark(
    seed: u64,
    dimension: usize,
    label_noise: f64,
    n_train_q: usize,
    n_test_q: usize,
    k_train_p: usize,
    p_heldout_p: usize,
) -> PyResult<PySyntheticBenchmark> {
    let world = synth::generate_world(seed, dimension, label_noise).map_err(to_py)?;
    let embedder = embedding::Embedder::mock(seed, dimension);
    let bench = synth::generate_benchmark(
        &world,
        n_train_q,
        n_test_q,
        k_train_p,
        p_heldout_p,
        &embedder,
    )
    .map_err(to_py)?;
    Ok(PySyntheticBenchmark {
        corpus: bench.corpus,
        train: bench.train,
        test_q: bench.test_q,
        test_p: bench.test_p,
        store: bench.store,
    })
}

fn resolve_candidates(
    corpus_obj: &PyCorpus,
    candidate_ids: &[String],
) -> PyResult<Vec<corpus::Prompt>> {
    candidate_ids
        .iter()
        .map(|id| {
            corpus_obj
                .inner
                .prompt(id)
                .cloned()
                .ok_or_else(|| PyValueError::new_err(format!("DanglingReference: prompt `{id}`")))
        })
        .collect()
}

fn resolve_query<'a>(corpus_obj: &'a PyCorpus, query_id: &str) -> PyResult<&'a corpus::Query> {
    corpus_obj
        .inner
        .query(query_id)
        .ok_or_else(|| PyValueError::new_err(format!("DanglingReference: query `{query_id}`")))
}

/// Distribution-level best-of-training choice.
#[pyfunction]
fn select_distributional<'py>(
    py: Python<'py>,
    train_demos: &PyDemonstrationSet,
) -> PyResult<Bound<'py, PyAny>> {
    let stats = policy::train_prompt_stats(&train_demos.inner).map_err(to_py)?;
    let selection = policy::select_distributional(&stats).map_err(to_py)?;
    selection_to_py(py, &selection)
}

/// Query-dependent best-of-N selection with the learned reward model.
#[pyfunction]
#[pyo3(signature = (model, corpus_obj, query_id, candidate_ids, store, strategy="prompt_oirl"))]
fn select_query_dependent<'py>(
    py: Python<'py>,
    model: &PyRewardModel,
    corpus_obj: &PyCorpus,
    query_id: &str,
    candidate_ids: Vec<String>,
    store: &PyEmbeddingStore,
    strategy: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let strategy = policy::Strategy::parse(strategy).map_err(to_py)?;
    let query = resolve_query(corpus_obj, query_id)?;
    let candidates = resolve_candidates(corpus_obj, &candidate_ids)?;
    let selection =
        policy::select_query_dependent(&model.inner, query, &candidates, &store.inner, strategy)
            .map_err(to_py)?;
    selection_to_py(py, &selection)
}

/// Perfect-evaluator selection from recorded rewards.
#[pyfunction]
fn select_oracle<'py>(
    py: Python<'py>,
    eval_demos: &PyDemonstrationSet,
    corpus_obj: &PyCorpus,
    query_id: &str,
    candidate_ids: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let query = resolve_query(corpus_obj, query_id)?;
    let candidates = resolve_candidates(corpus_obj, &candidate_ids)?;
    let selection = policy::select_oracle(&eval_demos.inner, query, &candidates).map_err(to_py)?;
    selection_to_py(py, &selection)
}

/// Nearest-neighbor selection over training demonstrations.
#[pyfunction]
fn select_nearest_neighbor<'py>(
    py: Python<'py>,
    train_demos: &PyDemonstrationSet,
    corpus_obj: &PyCorpus,
    store: &PyEmbeddingStore,
    query_id: &str,
    candidate_ids: Vec<String>,
) -> PyResult<Bound<'py, PyAny>> {
    let query = resolve_query(corpus_obj, query_id)?;
    let candidates = resolve_candidates(corpus_obj, &candidate_ids)?;
    let selection = policy::select_nearest_neighbor(
        &train_demos.inner,
        &corpus_obj.inner,
        &store.inner,
        query,
        &candidates,
    )
    .map_err(to_py)?;
    selection_to_py(py, &selection)
}

/// Evaluates one strategy over every query of the evaluation sets and
/// returns `{strategy, k_train_prompts, success_rate, n_queries}`.
#[pyfunction]
#[pyo3(signature = (strategy, corpus_obj, candidate_ids, eval_sets, model=None, store=None,
                    train_demos=None))]
#[allow(clippy::too_many_arguments)]
fn run_policy_eval<'py>(
    py: Python<'py>,
    strategy: &str,
    corpus_obj: &PyCorpus,
    candidate_ids: Vec<String>,
    eval_sets: Vec<PyRef<'py, PyDemonstrationSet>>,
    model: Option<&PyRewardModel>,
    store: Option<&PyEmbeddingStore>,
    train_demos: Option<&PyDemonstrationSet>,
) -> PyResult<Bound<'py, PyAny>> {
    let strategy = policy::Strategy::parse(strategy).map_err(to_py)?;
    let candidates = resolve_candidates(corpus_obj, &candidate_ids)?;
    let sets: Vec<&corpus::DemonstrationSet> = eval_sets.iter().map(|s| &s.inner).collect();
    let pool = bench::EvalPool::new(&sets).map_err(to_py)?;
    let need = |ok: bool, what: &str| {
        if ok {
            Ok(())
        } else {
            Err(PyValueError::new_err(format!(
                "strategy {} needs {what}",
                strategy.as_str()
            )))
        }
    };
    let ctx = match strategy {
        policy::Strategy::Distributional => {
            need(train_demos.is_some(), "train_demos")?;
            bench::StrategyContext::Distributional {
                train_demos: &train_demos.unwrap().inner,
            }
        }
        policy::Strategy::BestOfTrainQd => {
            need(model.is_some() && store.is_some(), "model and store")?;
            bench::StrategyContext::BestOfTrainQd {
                model: &model.unwrap().inner,
                store: &store.unwrap().inner,
            }
        }
        policy::Strategy::PromptOirl => {
            need(model.is_some() && store.is_some(), "model and store")?;
            bench::StrategyContext::PromptOirl {
                model: &model.unwrap().inner,
                store: &store.unwrap().inner,
            }
        }
        policy::Strategy::NearestNeighbor => {
            need(train_demos.is_some() && store.is_some(), "train_demos and store")?;
            bench::StrategyContext::NearestNeighbor {
                train_demos: &train_demos.unwrap().inner,
                store: &store.unwrap().inner,
            }
        }
        policy::Strategy::Oracle => bench::StrategyContext::Oracle,
        policy::Strategy::LlmConfidence => {
            return Err(PyValueError::new_err(
                "llm_confidence needs a live client; use the command-line frontend",
            ));
        }
    };
    let report =
        bench::run_policy_eval(&ctx, &corpus_obj.inner, &candidates, &pool).map_err(to_py)?;
    let value = serde_json::to_value(&report).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &value)
}

/// K-sweep with combination averaging. Returns
/// `{"rows": [...], "curve": [...]}`.
#[pyfunction]
#[pyo3(signature = (corpus_obj, train_demos, test_q_demos, store, strategies, ks, config,
                    test_p_demos=None))]
#[allow(clippy::too_many_arguments)]
fn sweep_k<'py>(
    py: Python<'py>,
    corpus_obj: &PyCorpus,
    train_demos: &PyDemonstrationSet,
    test_q_demos: &PyDemonstrationSet,
    store: &PyEmbeddingStore,
    strategies: Vec<String>,
    ks: Vec<usize>,
    config: &PyBoostConfig,
    test_p_demos: Option<&PyDemonstrationSet>,
) -> PyResult<Bound<'py, PyAny>> {
    let strategies: Vec<policy::Strategy> = strategies
        .iter()
        .map(|s| policy::Strategy::parse(s).map_err(to_py))
        .collect::<PyResult<_>>()?;
    let inputs = bench::SweepInputs {
        corpus: &corpus_obj.inner,
        train_demos: &train_demos.inner,
        test_q_demos: &test_q_demos.inner,
        test_p_demos: test_p_demos.map(|d| &d.inner),
        store: &store.inner,
        llm: None,
    };
    let outcome = bench::sweep_k(&inputs, &strategies, &ks, &config.inner).map_err(to_py)?;
    let rows: Vec<serde_json::Value> = outcome
        .rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "strategy": r.strategy.as_str(),
                "k": r.k,
                "subset": r.subset,
                "success_rate": r.success_rate,
                "n_queries": r.n_queries,
            })
        })
        .collect();
    let mut curve: Vec<serde_json::Value> = Vec::new();
    for point in &outcome.curve.points {
        for (strategy, mean) in &point.means {
            curve.push(serde_json::json!({
                "k": point.k,
                "strategy": strategy.as_str(),
                "mean": mean,
                "combinations": point.combinations,
            }));
        }
    }
    json_to_py(
        py,
        &serde_json::json!({ "rows": rows, "curve": curve }),
    )
}

/// Per-query inference cost table.
#[pyfunction]
fn cost_report<'py>(
    py: Python<'py>,
    strategies: Vec<String>,
    ks: Vec<usize>,
    profile: &Bound<'py, PyDict>,
    sheet: &Bound<'py, PyDict>,
) -> PyResult<Bound<'py, PyAny>> {
    let profile: bench::TokenProfile = pydict_to(profile)?;
    let sheet: PriceSheet = pydict_to(sheet)?;
    let strategies: Vec<policy::Strategy> = strategies
        .iter()
        .map(|s| policy::Strategy::parse(s).map_err(to_py))
        .collect::<PyResult<_>>()?;
    let rows = bench::cost_report(&strategies, &ks, &profile, &sheet);
    let values: Vec<serde_json::Value> = rows
        .iter()
        .map(|r| {
            serde_json::json!({
                "strategy": r.strategy.as_str(),
                "k": r.k,
                "usd": r.usd(),
            })
        })
        .collect();
    json_to_py(py, &serde_json::Value::Array(values))
}

fn pydict_to<T: serde::de::DeserializeOwned>(dict: &Bound<'_, PyDict>) -> PyResult<T> {
    let mut map = BTreeMap::new();
    for (key, value) in dict.iter() {
        let key: String = key.extract()?;
        let value: f64 = value.extract()?;
        map.insert(key, value);
    }
    let value = serde_json::to_value(map).map_err(|e| PyValueError::new_err(e.to_string()))?;
    serde_json::from_value(value).map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn oirl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyBoostConfig>()?;
    m.add_class::<PyCorpus>()?;
    m.add_class::<PyDemonstrationSet>()?;
    m.add_class::<PyEmbeddingStore>()?;
    m.add_class::<PyMockEmbedder>()?;
    m.add_class::<PyRewardModel>()?;
    m.add_class::<PySyntheticBenchmark>()?;
    m.add_function(wrap_pyfunction!(grade_answer, m)?)?;
    m.add_function(wrap_pyfunction!(extract_final_number, m)?)?;
    m.add_function(wrap_pyfunction!(logistic_grad_hess, m)?)?;
    m.add_function(wrap_pyfunction!(enumerate_combinations, m)?)?;
    m.add_function(wrap_pyfunction!(generate_benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(select_distributional, m)?)?;
    m.add_function(wrap_pyfunction!(select_query_dependent, m)?)?;
    m.add_function(wrap_pyfunction!(select_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(select_nearest_neighbor, m)?)?;
    m.add_function(wrap_pyfunction!(run_policy_eval, m)?)?;
    m.add_function(wrap_pyfunction!(sweep_k, m)?)?;
    m.add_function(wrap_pyfunction!(cost_report, m)?)?;
    Ok(())
}
