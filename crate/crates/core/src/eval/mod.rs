//! Probing models against the benchmark and scoring them.

pub mod agents;
pub mod protocol;
mod report;

pub use agents::{BayesAgent, Memorizer};
pub use protocol::{
    connect_tcp, serve, ExecClient, LineClient, ProbeKind, ProbeModel, ProbeQuery, ProbeResponse,
};
pub use report::{json_path, read_report_json, render_report, write_report, REPORT_FORMAT_VERSION};

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bench::{ProbeTag, Subset, Target, TestCase};
use crate::error::EvalError;
use crate::ids::EntityId;
use crate::language::{render_claim_prompt, render_key_prompt, Sentence, Vocabulary};

/// Slack allowed outside `[0, 1]` for floating-point round-off.
pub const PROBABILITY_SLACK: f64 = 1e-12;
pub const DEFAULT_WINDOW: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Pre,
    Post,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Pre => "pre",
            Phase::Post => "post",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axiom {
    Tf,
    Not,
    And,
    Or,
}

impl Axiom {
    pub const ALL: [Axiom; 4] = [Axiom::Tf, Axiom::Not, Axiom::And, Axiom::Or];

    pub fn label(self) -> &'static str {
        match self {
            Axiom::Tf => "TF",
            Axiom::Not => "not",
            Axiom::And => "and",
            Axiom::Or => "or",
        }
    }
}

/// Which stored post-edit targets to score against, and which weight to send with the edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EditWeightMode {
    #[default]
    Auto,
    Fixed,
}

impl EditWeightMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EditWeightMode::Auto => "auto",
            EditWeightMode::Fixed => "fixed",
        }
    }

    pub fn weight(self, case: &TestCase) -> f64 {
        match self {
            EditWeightMode::Auto => case.weights.auto as f64,
            EditWeightMode::Fixed => case.weights.fixed,
        }
    }

    pub fn post_targets(self, case: &TestCase) -> &[Target] {
        match self {
            EditWeightMode::Auto => &case.targets_post,
            EditWeightMode::Fixed => &case.targets_post_fixed,
        }
    }
}

impl fmt::Display for EditWeightMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EditWeightMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(Self::Auto),
            "fixed" => Ok(Self::Fixed),
            _ => Err(format!(
                "unknown edit weight mode {s:?} (expected auto or fixed)"
            )),
        }
    }
}

/// One phase's metrics. `None` marks a cell with no evaluated cases.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PhaseMetrics {
    pub generative_accuracy: BTreeMap<ProbeTag, Option<f64>>,
    pub probabilistic_mae: BTreeMap<ProbeTag, Option<f64>>,
    pub logical_mae: BTreeMap<Axiom, Option<f64>>,
}

impl PhaseMetrics {
    /// Cell-wise `self - other`.
    pub fn minus(&self, other: &PhaseMetrics) -> PhaseMetrics {
        fn diff<K: Ord + Copy>(
            a: &BTreeMap<K, Option<f64>>,
            b: &BTreeMap<K, Option<f64>>,
        ) -> BTreeMap<K, Option<f64>> {
            a.iter()
                .map(|(k, x)| (*k, x.zip(b.get(k).copied().flatten()).map(|(x, y)| x - y)))
                .collect()
        }
        PhaseMetrics {
            generative_accuracy: diff(&self.generative_accuracy, &other.generative_accuracy),
            probabilistic_mae: diff(&self.probabilistic_mae, &other.probabilistic_mae),
            logical_mae: diff(&self.logical_mae, &other.logical_mae),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetReport {
    pub subset: Subset,
    pub cases: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub pre: PhaseMetrics,
    pub post: PhaseMetrics,
    pub delta: PhaseMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub edit_weight: EditWeightMode,
    pub selection: Subset,
    pub total: usize,
    pub evaluated: usize,
    pub failed: usize,
    pub failed_ids: Vec<String>,
    pub subsets: Vec<SubsetReport>,
}

impl MetricsReport {
    pub fn subset(&self, s: Subset) -> Option<&SubsetReport> {
        self.subsets.iter().find(|r| r.subset == s)
    }

    pub fn is_empty(&self) -> bool {
        self.evaluated == 0
    }
}

/// What a model said in one phase of one case.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhaseAnswers {
    pub probability: BTreeMap<ProbeTag, f64>,
    /// Generated object per atom probe; `None` when the text names no known entity.
    pub generated: BTreeMap<ProbeTag, Option<EntityId>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseOutcome {
    pub id: String,
    pub answers: Option<(PhaseAnswers, PhaseAnswers)>,
}

fn query_id(case: &TestCase, phase: Phase, tag: ProbeTag, kind: &str) -> String {
    format!("{}/{}/{}/{}", case.id, phase.as_str(), tag, kind)
}

/// Queries for one phase: next-object and generate for atom probes, truth for logic probes.
pub fn phase_queries(case: &TestCase, phase: Phase, vocab: &Vocabulary) -> Vec<ProbeQuery> {
    let mut out = Vec::new();
    for p in &case.probes {
        match &p.sentence {
            Sentence::Atomic(a) => {
                let prompt = render_key_prompt(&a.key(), vocab);
                out.push(ProbeQuery::new(
                    query_id(case, phase, p.tag, "next_object"),
                    ProbeKind::NextObject,
                    prompt.clone(),
                    Some(vocab.entity_surface(&a.object).to_string()),
                ));
                out.push(ProbeQuery::new(
                    query_id(case, phase, p.tag, "generate"),
                    ProbeKind::Generate,
                    prompt,
                    None,
                ));
            }
            Sentence::Truth { claim, .. } => out.push(ProbeQuery::new(
                query_id(case, phase, p.tag, "truth"),
                ProbeKind::Truth,
                render_claim_prompt(claim, vocab),
                Some("true".into()),
            )),
        }
    }
    out
}

/// Collects one phase's answers; `Ok(None)` when any query went unanswered or failed.
fn collect_phase(
    queries: &[ProbeQuery],
    responses: Vec<ProbeResponse>,
    case: &TestCase,
    vocab: &Vocabulary,
) -> Result<Option<PhaseAnswers>, EvalError> {
    let mut by_id: HashMap<String, ProbeResponse> =
        responses.into_iter().map(|r| (r.id.clone(), r)).collect();
    let mut out = PhaseAnswers::default();
    for (q, tag) in queries.iter().zip(query_tags(case)) {
        let Some(r) = by_id.remove(&q.id) else {
            return Ok(None);
        };
        if r.error.is_some() {
            return Ok(None);
        }
        match q.kind {
            ProbeKind::Generate => {
                let Some(text) = r.text else {
                    return Ok(None);
                };
                out.generated
                    .insert(tag, vocab.entity(text.trim()).cloned());
            }
            _ => {
                let Some(p) = r.probability else {
                    return Ok(None);
                };
                if !(-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&p) {
                    return Err(EvalError::ProbabilityOutOfRange {
                        id: q.id.clone(),
                        probability: p,
                    });
                }
                out.probability.insert(tag, p);
            }
        }
    }
    Ok(Some(out))
}

fn query_tags(case: &TestCase) -> Vec<ProbeTag> {
    case.probes
        .iter()
        .flat_map(|p| {
            let n = if p.tag.is_atom() { 2 } else { 1 };
            std::iter::repeat_n(p.tag, n)
        })
        .collect()
}

fn ask<M: ProbeModel + ?Sized>(
    model: &mut M,
    case: &TestCase,
    phase: Phase,
    vocab: &Vocabulary,
) -> Result<Option<PhaseAnswers>, EvalError> {
    let queries = phase_queries(case, phase, vocab);
    let responses = model.answer(&queries)?;
    collect_phase(&queries, responses, case, vocab)
}

/// Pre-probe, edit, post-probe and revert one case.
pub fn probe_case<M: ProbeModel + ?Sized>(
    model: &mut M,
    case: &TestCase,
    mode: EditWeightMode,
    vocab: &Vocabulary,
) -> Result<CaseOutcome, EvalError> {
    let failed = || CaseOutcome {
        id: case.id.clone(),
        answers: None,
    };
    let Some(pre) = ask(model, case, Phase::Pre, vocab)? else {
        return Ok(failed());
    };
    let edit = &case.edit.atom;
    let edit_id = format!("{}/edit", case.id);
    match model.edit(
        &edit_id,
        &render_key_prompt(&edit.key(), vocab),
        vocab.entity_surface(&edit.object),
        mode.weight(case),
    ) {
        Ok(()) => {}
        Err(EvalError::EditHook(msg)) => {
            log::warn!("{}: edit failed: {msg}", case.id);
            return Ok(failed());
        }
        Err(e) => return Err(e),
    }
    let post = ask(model, case, Phase::Post, vocab);
    model.revert(&format!("{}/revert", case.id))?;
    Ok(CaseOutcome {
        id: case.id.clone(),
        answers: post?.map(|post| (pre, post)),
    })
}

/// Mean of values summed in sorted order, so case order never changes the result.
fn mean(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(v.iter().sum::<f64>() / v.len() as f64)
}

fn logic_errors(a: &PhaseAnswers) -> [(Axiom, f64); 4] {
    let p = |t| a.probability[&t];
    let (pa, pb) = (p(ProbeTag::Tf), p(ProbeTag::B));
    [
        (Axiom::Tf, (p(ProbeTag::S1r1) - pa).abs()),
        (Axiom::Not, (pa - (1.0 - p(ProbeTag::Not))).abs()),
        (Axiom::And, (p(ProbeTag::And) - pa * pb).abs()),
        (Axiom::Or, (p(ProbeTag::Or) - (pa + pb - pa * pb)).abs()),
    ]
}

/// Metrics for one phase over the given `(case, answers, targets)` triples.
pub fn phase_metrics<'a>(
    rows: impl IntoIterator<Item = (&'a TestCase, &'a PhaseAnswers, &'a [Target])>,
) -> PhaseMetrics {
    let mut acc: BTreeMap<ProbeTag, Vec<f64>> =
        ProbeTag::ATOMS.iter().map(|t| (*t, Vec::new())).collect();
    let mut mae = acc.clone();
    let mut logic: BTreeMap<Axiom, Vec<f64>> =
        Axiom::ALL.iter().map(|a| (*a, Vec::new())).collect();
    for (case, answers, targets) in rows {
        for tag in ProbeTag::ATOMS {
            let Some((_, i)) = case.probe(tag) else {
                continue;
            };
            let t = &targets[i];
            let hit = answers.generated[&tag]
                .as_ref()
                .is_some_and(|o| t.argmax.contains(o));
            acc.get_mut(&tag).unwrap().push(if hit { 1.0 } else { 0.0 });
            mae.get_mut(&tag)
                .unwrap()
                .push((answers.probability[&tag] - t.probability).abs());
        }
        for (ax, e) in logic_errors(answers) {
            logic.get_mut(&ax).unwrap().push(e);
        }
    }
    PhaseMetrics {
        generative_accuracy: acc.into_iter().map(|(k, v)| (k, mean(v))).collect(),
        probabilistic_mae: mae.into_iter().map(|(k, v)| (k, mean(v))).collect(),
        logical_mae: logic.into_iter().map(|(k, v)| (k, mean(v))).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub model_name: String,
    pub selection: Subset,
    pub edit_weight: EditWeightMode,
}

/// Aggregates probed outcomes into a report. `outcomes` must align with `cases`.
pub fn aggregate(
    cases: &[&TestCase],
    outcomes: &[CaseOutcome],
    opts: &EvalOptions,
) -> MetricsReport {
    let sections: Vec<Subset> = if opts.selection == Subset::All {
        Subset::EVERY.to_vec()
    } else {
        vec![opts.selection]
    };
    let subsets = sections
        .into_iter()
        .map(|s| {
            let members: Vec<(&TestCase, &CaseOutcome)> = cases
                .iter()
                .zip(outcomes)
                .filter(|(c, _)| s.contains(c))
                .map(|(c, o)| (*c, o))
                .collect();
            let ok: Vec<(&TestCase, &(PhaseAnswers, PhaseAnswers))> = members
                .iter()
                .filter_map(|(c, o)| o.answers.as_ref().map(|a| (*c, a)))
                .collect();
            let pre = phase_metrics(ok.iter().map(|(c, a)| (*c, &a.0, c.targets_pre.as_slice())));
            let post = phase_metrics(
                ok.iter()
                    .map(|(c, a)| (*c, &a.1, opts.edit_weight.post_targets(c))),
            );
            SubsetReport {
                subset: s,
                cases: members.len(),
                evaluated: ok.len(),
                failed: members.len() - ok.len(),
                delta: post.minus(&pre),
                pre,
                post,
            }
        })
        .collect();
    let failed_ids: Vec<String> = outcomes
        .iter()
        .filter(|o| o.answers.is_none())
        .map(|o| o.id.clone())
        .collect();
    MetricsReport {
        model: opts.model_name.clone(),
        edit_weight: opts.edit_weight,
        selection: opts.selection,
        total: outcomes.len(),
        evaluated: outcomes.len() - failed_ids.len(),
        failed: failed_ids.len(),
        failed_ids,
        subsets,
    }
}

/// Probes every selected case in order and aggregates the metrics.
pub fn run_eval<M: ProbeModel + ?Sized>(
    cases: &[TestCase],
    model: &mut M,
    vocab: &Vocabulary,
    opts: &EvalOptions,
) -> Result<MetricsReport, EvalError> {
    let selected: Vec<&TestCase> = cases
        .iter()
        .filter(|c| opts.selection.contains(c))
        .collect();
    let mut outcomes = Vec::with_capacity(selected.len());
    for case in &selected {
        outcomes.push(probe_case(model, case, opts.edit_weight, vocab)?);
    }
    Ok(aggregate(&selected, &outcomes, opts))
}

#[cfg(test)]
mod tests;
