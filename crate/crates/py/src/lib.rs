//! Python bindings: world, corpus, oracle, bench and evaluation.
//!
//! ```python
//! import editbench as eb
//! world = eb.World.synth(seed=42)
//! corpus = eb.Corpus.generate(world, facts=1000, seed=42)
//! oracle = eb.Oracle.fit(world, corpus)
//! bench = eb.Bench.generate(world, oracle, n_cases=200, seed=42)
//! report = eb.evaluate(bench, oracle, model="bayes")
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use editbench::artifact::ArtifactHeader;
use editbench::bench::{
    gen_cases, read_bench, write_bench, BenchConfig, Subset, TestCase, BENCH_FORMAT_VERSION,
};
use editbench::config::RunConfig;
use editbench::corpus::{
    generate_corpus, write_corpus, Corpus as CoreCorpus, CorpusConfig, CorpusPaths,
    CORPUS_FORMAT_VERSION,
};
use editbench::eval::{
    render_report, run_eval, BayesAgent, EditWeightMode, EvalOptions, Memorizer, MetricsReport,
};
use editbench::language::{
    parse, parse_prompt, render_document, Atom, Prompt, Sentence, Vocabulary,
};
use editbench::oracle::{
    read_oracle, write_oracle, OracleState, SnapshotToken, ORACLE_FORMAT_VERSION,
};
use editbench::pipeline::{fit_oracle_text, world_from_graph, WorldSettings, SYNTH_MIN_COOCCUR};
use editbench::world::{
    read_world, synth_graph, write_world, CooccurProfile, SynthParams, WorldModel,
    WORLD_FORMAT_VERSION,
};

create_exception!(editbench, EditbenchError, PyException);

fn err(e: impl std::fmt::Display) -> PyErr {
    EditbenchError::new_err(e.to_string())
}

fn header(kind: &str, version: u32, seed: u64) -> ArtifactHeader {
    RunConfig {
        seed,
        ..RunConfig::default()
    }
    .header(kind, version)
}

/// Ground-truth world model.
type MetricTree =
    BTreeMap<String, BTreeMap<String, BTreeMap<String, BTreeMap<String, Option<f64>>>>>;

#[pyclass(module = "editbench")]
struct World {
    inner: WorldModel,
    seed: u64,
}

#[pymethods]
impl World {
    #[staticmethod]
    #[pyo3(signature = (seed=42, subjects=None, relations=None, objects=None, floor=0.6, min_cooccur=SYNTH_MIN_COOCCUR, top_k=10))]
    #[allow(clippy::too_many_arguments)]
    fn synth(
        seed: u64,
        subjects: Option<usize>,
        relations: Option<usize>,
        objects: Option<usize>,
        floor: f64,
        min_cooccur: usize,
        top_k: usize,
    ) -> PyResult<Self> {
        let mut p = SynthParams::desk(seed);
        if let Some(n) = subjects {
            p.n_subjects = n;
        }
        if let Some(n) = relations {
            p.n_relations = n;
            p.profile = CooccurProfile::paired(n);
        }
        if let Some(n) = objects {
            p.n_objects = n;
        }
        let graph = synth_graph(&p).map_err(err)?;
        let settings = WorldSettings {
            min_cooccur,
            top_k,
            floor,
            seed,
        };
        let inner = world_from_graph(&graph, &settings).map_err(err)?;
        Ok(Self { inner, seed })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (h, inner) = read_world(&path).map_err(err)?;
        Ok(Self {
            inner,
            seed: h.seed,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_world(
            &self.inner,
            &header("world", WORLD_FORMAT_VERSION, self.seed),
            &path,
        )
        .map_err(err)
    }

    #[getter]
    fn n_facts(&self) -> usize {
        self.inner.n_facts()
    }

    #[getter]
    fn relations(&self) -> Vec<String> {
        let v = Vocabulary::from_graph(&self.inner.graph);
        self.inner
            .graph
            .relations()
            .iter()
            .map(|r| v.relation_surface(r).to_string())
            .collect()
    }

    /// `(upstream, downstream)` relation pairs.
    #[getter]
    fn dependencies(&self) -> Vec<(String, String)> {
        self.inner
            .deps
            .pairs()
            .iter()
            .map(|(u, d)| (u.to_string(), d.to_string()))
            .collect()
    }

    #[getter]
    fn conditioned_fraction(&self) -> f64 {
        self.inner.conditioned_fraction()
    }

    fn __repr__(&self) -> String {
        format!(
            "World(facts={}, dependencies={})",
            self.inner.n_facts(),
            self.inner.deps.len()
        )
    }
}

/// Generated training corpus.
#[pyclass(module = "editbench")]
struct Corpus {
    inner: CoreCorpus,
    vocab: Vocabulary,
    seed: u64,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    #[pyo3(signature = (world, facts=1000, seed=42, connectives_per_subject=20))]
    fn generate(
        world: &World,
        facts: usize,
        seed: u64,
        connectives_per_subject: usize,
    ) -> PyResult<Self> {
        let vocab = Vocabulary::from_graph(&world.inner.graph);
        let mut cfg = CorpusConfig::new(facts, seed);
        cfg.connectives_per_subject = connectives_per_subject;
        let inner = generate_corpus(&world.inner, &vocab, &cfg).map_err(err)?;
        Ok(Self { inner, vocab, seed })
    }

    /// Writes the corpus, statistics and vocabulary files into `directory`.
    fn save(&self, directory: PathBuf) -> PyResult<()> {
        let h = header("corpus", CORPUS_FORMAT_VERSION, self.seed);
        write_corpus(
            &self.inner,
            &self.vocab,
            &h,
            &CorpusPaths::in_dir(&directory),
        )
        .map_err(err)
    }

    /// One document per line.
    fn text(&self) -> String {
        self.inner
            .documents
            .iter()
            .map(|d| render_document(d, &self.vocab) + "\n")
            .collect()
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.inner.stats;
        let d = PyDict::new(py);
        for (k, v) in [
            ("true_atomic_facts", s.true_atomic_facts),
            ("atomic_sentences", s.atomic_sentences),
            ("tf_sentences", s.tf_sentences),
            ("connective_sentences", s.connective_sentences),
            ("total_sentences", s.total_sentences),
            ("documents", s.documents),
            ("tokens", s.tokens),
            ("subjects", s.subjects),
            ("relations", s.relations),
            ("objects", s.objects),
        ] {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn __len__(&self) -> usize {
        self.inner.documents.len()
    }
}

/// Handle for undoing oracle edits; restoring an older snapshot invalidates newer ones.
#[pyclass(module = "editbench", frozen)]
struct Snapshot(SnapshotToken);

/// Exact Bayesian oracle fitted on a corpus.
#[pyclass(module = "editbench")]
struct Oracle {
    state: OracleState,
    vocab: Vocabulary,
}

impl Oracle {
    fn atom(&self, sentence: &str) -> PyResult<Atom> {
        match parse(
            sentence.trim().trim_end_matches('.').trim_end(),
            &self.vocab,
        )
        .map_err(err)?
        {
            Sentence::Atomic(a) => Ok(a),
            Sentence::Truth { .. } => Err(err("expected an `s r o` sentence")),
        }
    }
}

#[pymethods]
impl Oracle {
    #[staticmethod]
    fn fit(world: &World, corpus: &Corpus) -> PyResult<Self> {
        let state =
            fit_oracle_text(&world.inner.deps, &corpus.text(), &corpus.vocab).map_err(err)?;
        Ok(Self {
            state,
            vocab: corpus.vocab.clone(),
        })
    }

    /// Loads an oracle file; names resolve through the world's vocabulary.
    #[staticmethod]
    fn load(path: PathBuf, world: &World) -> PyResult<Self> {
        let (_, state) = read_oracle(&path).map_err(err)?;
        Ok(Self {
            state,
            vocab: Vocabulary::from_graph(&world.inner.graph),
        })
    }

    #[pyo3(signature = (path, seed=42))]
    fn save(&self, path: PathBuf, seed: u64) -> PyResult<()> {
        write_oracle(
            &self.state,
            header("oracle", ORACLE_FORMAT_VERSION, seed),
            &path,
        )
        .map_err(err)
    }

    /// Probability of a sentence, or a `{object: probability}` dict for an `s r` prompt.
    fn query<'py>(&self, py: Python<'py>, sentence: &str) -> PyResult<Bound<'py, PyAny>> {
        let text = sentence.trim().trim_end_matches('.').trim_end();
        if let Ok(s) = parse(text, &self.vocab) {
            return Ok(self
                .state
                .truth_probability(&s)
                .map_err(err)?
                .into_pyobject(py)?
                .into_any());
        }
        match parse_prompt(text, &self.vocab).map_err(err)? {
            Prompt::Truth(c) => Ok(self
                .state
                .claim_probability(&c)
                .map_err(err)?
                .into_pyobject(py)?
                .into_any()),
            Prompt::NextObject(k) => {
                let post = self.state.posterior(&k).map_err(err)?;
                let d = PyDict::new(py);
                for (o, p) in post.entries() {
                    d.set_item(self.vocab.entity_surface(o), *p)?;
                }
                Ok(d.into_any())
            }
        }
    }

    /// Smallest integer edit weight that lifts the sentence to `threshold`.
    #[pyo3(signature = (sentence, threshold=0.95))]
    fn min_weight(&self, sentence: &str, threshold: f64) -> PyResult<u64> {
        self.state
            .min_weight_for(&self.atom(sentence)?, threshold)
            .map_err(err)
    }

    /// Applies an edit; without a weight, the minimal one for `threshold`. Returns the weight.
    #[pyo3(signature = (sentence, weight=None, threshold=0.95))]
    fn edit(&mut self, sentence: &str, weight: Option<f64>, threshold: f64) -> PyResult<f64> {
        let atom = self.atom(sentence)?;
        let w = match weight {
            Some(w) => w,
            None => self.state.min_weight_for(&atom, threshold).map_err(err)? as f64,
        };
        if w > 0.0 {
            self.state.apply_edit(&atom, w).map_err(err)?;
        }
        Ok(w)
    }

    fn snapshot(&mut self) -> Snapshot {
        Snapshot(self.state.snapshot())
    }

    fn restore(&mut self, snapshot: &Snapshot) -> PyResult<()> {
        self.state.restore(snapshot.0).map_err(err)
    }

    fn fingerprint(&self) -> String {
        self.state.fingerprint()
    }
}

/// Generated test cases.
#[pyclass(module = "editbench")]
struct Bench {
    cases: Vec<TestCase>,
    seed: u64,
}

#[pymethods]
impl Bench {
    #[staticmethod]
    #[pyo3(signature = (world, oracle, n_cases=200, seed=42, threshold=0.95))]
    fn generate(
        world: &World,
        oracle: &Oracle,
        n_cases: usize,
        seed: u64,
        threshold: f64,
    ) -> PyResult<Self> {
        let mut cfg = BenchConfig::new(n_cases, seed);
        cfg.threshold = threshold;
        let mut state = oracle.state.clone();
        let cases = gen_cases(&world.inner, &mut state, &cfg).map_err(err)?;
        Ok(Self { cases, seed })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let (h, cases) = read_bench(&path).map_err(err)?;
        Ok(Self {
            cases,
            seed: h.seed,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_bench(
            &self.cases,
            &header("bench", BENCH_FORMAT_VERSION, self.seed),
            &path,
        )
        .map_err(err)
    }

    /// Test cases as plain dicts.
    fn cases<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.cases)
    }

    fn __len__(&self) -> usize {
        self.cases.len()
    }
}

fn to_python<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Evaluation result; `table()` renders it, `to_dict()` gives the numbers.
#[pyclass(module = "editbench")]
struct Report(MetricsReport);

#[pymethods]
impl Report {
    fn table(&self) -> String {
        render_report(&self.0)
    }

    fn to_dict<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_python(py, &self.0)
    }

    #[getter]
    fn evaluated(&self) -> usize {
        self.0.evaluated
    }

    #[getter]
    fn failed(&self) -> usize {
        self.0.failed
    }

    /// `{subset: {phase: {metric: {tag: value}}}}` with phases pre, post and delta.
    fn metrics(&self) -> MetricTree {
        let mut out = BTreeMap::new();
        for s in &self.0.subsets {
            let mut phases = BTreeMap::new();
            for (name, m) in [("pre", &s.pre), ("post", &s.post), ("delta", &s.delta)] {
                let tags = |map: &BTreeMap<editbench::bench::ProbeTag, Option<f64>>| {
                    map.iter().map(|(k, v)| (k.to_string(), *v)).collect()
                };
                let mut metrics = BTreeMap::new();
                metrics.insert(
                    "generative_accuracy".to_string(),
                    tags(&m.generative_accuracy),
                );
                metrics.insert("probabilistic_mae".to_string(), tags(&m.probabilistic_mae));
                metrics.insert(
                    "logical_mae".to_string(),
                    m.logical_mae
                        .iter()
                        .map(|(k, v)| (k.label().to_string(), *v))
                        .collect(),
                );
                phases.insert(name.to_string(), metrics);
            }
            out.insert(s.subset.to_string(), phases);
        }
        out
    }
}

/// Evaluates a built-in agent: `bayes` wraps `oracle`; `memorizer` and `stale` learn from
/// `corpus`.
#[pyfunction]
#[pyo3(signature = (bench, oracle=None, corpus=None, model="bayes", subset="all", edit_weight="auto"))]
fn evaluate(
    bench: &Bench,
    oracle: Option<&Oracle>,
    corpus: Option<&Corpus>,
    model: &str,
    subset: &str,
    edit_weight: &str,
) -> PyResult<Report> {
    let selection: Subset = subset.parse().map_err(err)?;
    let edit_weight: EditWeightMode = edit_weight.parse().map_err(err)?;
    let opts = EvalOptions {
        model_name: model.to_string(),
        selection,
        edit_weight,
    };
    let report = match model {
        "bayes" => {
            let o = oracle.ok_or_else(|| err("model bayes needs an oracle"))?;
            let mut agent = BayesAgent::new(o.state.clone(), o.vocab.clone());
            run_eval(&bench.cases, &mut agent, &o.vocab, &opts)
        }
        "memorizer" | "stale" => {
            let c = corpus.ok_or_else(|| err(format!("model {model} needs a corpus")))?;
            let mut m = if model == "stale" {
                Memorizer::stale(c.vocab.clone())
            } else {
                Memorizer::new(c.vocab.clone())
            };
            m.observe_corpus_text(c.text().as_bytes()).map_err(err)?;
            run_eval(&bench.cases, &mut m, &c.vocab, &opts)
        }
        other => return Err(err(format!("unknown model {other:?}"))),
    }
    .map_err(err)?;
    Ok(Report(report))
}

#[pymodule]
#[pyo3(name = "editbench")]
fn editbench_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("EditbenchError", m.py().get_type::<EditbenchError>())?;
    m.add_class::<World>()?;
    m.add_class::<Corpus>()?;
    m.add_class::<Oracle>()?;
    m.add_class::<Snapshot>()?;
    m.add_class::<Bench>()?;
    m.add_class::<Report>()?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    Ok(())
}
