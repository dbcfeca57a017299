use std::sync::OnceLock;

use super::*;
use crate::bench::{CaseFlags, EditKind, EditRequest, EditWeights, Probe};
use crate::language::{render_document, Atom, Claim};
use crate::pipeline::{desk_run, DeskRun};

fn run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| desk_run(5, 1000, 60).unwrap())
}

fn opts(name: &str) -> EvalOptions {
    EvalOptions {
        model_name: name.into(),
        selection: Subset::All,
        edit_weight: EditWeightMode::Auto,
    }
}

fn corpus_text(r: &DeskRun) -> String {
    r.corpus
        .documents
        .iter()
        .map(|d| render_document(d, &r.vocab) + "\n")
        .collect()
}

fn all_cells(m: &PhaseMetrics) -> Vec<Option<f64>> {
    m.generative_accuracy
        .values()
        .chain(m.probabilistic_mae.values())
        .chain(m.logical_mae.values())
        .copied()
        .collect()
}

fn fixture_case(id: &str, argmax: &str, p_target: f64) -> TestCase {
    let a = Atom::new("s", "r", "o");
    let atom_probe = |tag| Probe {
        tag,
        sentence: Sentence::Atomic(a.clone()),
    };
    let t = Target {
        probability: p_target,
        argmax: vec![argmax.into()],
    };
    let mut probes: Vec<Probe> = ProbeTag::ATOMS.iter().map(|t| atom_probe(*t)).collect();
    for tag in [
        ProbeTag::Tf,
        ProbeTag::B,
        ProbeTag::Not,
        ProbeTag::And,
        ProbeTag::Or,
    ] {
        probes.push(Probe {
            tag,
            sentence: Sentence::truth(Claim::Atom(a.clone()), true),
        });
    }
    let targets: Vec<Target> = probes.iter().map(|_| t.clone()).collect();
    TestCase {
        id: id.into(),
        edit: EditRequest {
            atom: a.clone(),
            kind: EditKind::Counterfactual,
        },
        weights: EditWeights {
            auto: 1,
            fixed: 1000.0,
        },
        probes,
        targets_pre: targets.clone(),
        targets_post: targets.clone(),
        targets_post_fixed: targets,
        flags: CaseFlags::default(),
    }
}

fn answers(generated: &str, p: f64, logic: [f64; 5]) -> PhaseAnswers {
    let mut a = PhaseAnswers::default();
    for t in ProbeTag::ATOMS {
        a.probability.insert(t, p);
        a.generated.insert(t, Some(generated.into()));
    }
    for (t, v) in [
        ProbeTag::Tf,
        ProbeTag::B,
        ProbeTag::Not,
        ProbeTag::And,
        ProbeTag::Or,
    ]
    .into_iter()
    .zip(logic)
    {
        a.probability.insert(t, v);
    }
    a
}

#[test]
fn accuracy_counts_matches() {
    let cases: Vec<TestCase> = (0..4)
        .map(|i| fixture_case(&format!("c{i}"), "o", 0.5))
        .collect();
    let ans: Vec<PhaseAnswers> = ["o", "o", "x", "o"]
        .iter()
        .map(|g| answers(g, 0.5, [0.5; 5]))
        .collect();
    let m = phase_metrics(
        cases
            .iter()
            .zip(&ans)
            .map(|(c, a)| (c, a, c.targets_pre.as_slice())),
    );
    assert_eq!(m.generative_accuracy[&ProbeTag::S1r1], Some(0.75));
}

#[test]
fn probability_mae_arithmetic() {
    let cases = [fixture_case("a", "o", 0.9), fixture_case("b", "o", 0.1)];
    let ans = answers("o", 0.5, [0.5; 5]);
    let m = phase_metrics(cases.iter().map(|c| (c, &ans, c.targets_pre.as_slice())));
    assert!((m.probabilistic_mae[&ProbeTag::S2r2].unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn logic_mae_arithmetic() {
    let c = fixture_case("a", "o", 0.8);
    // s1r1 = 0.8, tf = 0.8, b = 0.5, not = 0.8, and = 0.25, or = 0.5
    let a = answers("o", 0.8, [0.8, 0.5, 0.8, 0.4, 0.9]);
    let m = phase_metrics([(&c, &a, c.targets_pre.as_slice())]);
    assert!((m.logical_mae[&Axiom::Tf].unwrap()).abs() < 1e-12);
    assert!((m.logical_mae[&Axiom::Not].unwrap() - 0.6).abs() < 1e-12);
    assert!((m.logical_mae[&Axiom::And].unwrap() - 0.0).abs() < 1e-12);
    let a = answers("o", 0.5, [0.5, 0.5, 0.5, 0.25, 0.5]);
    let m = phase_metrics([(&c, &a, c.targets_pre.as_slice())]);
    assert!((m.logical_mae[&Axiom::Or].unwrap() - 0.25).abs() < 1e-12);
}

#[test]
fn bayes_agent_is_a_fixed_point() {
    let r = run();
    let mut agent = BayesAgent::new(r.oracle.clone(), r.vocab.clone());
    let report = run_eval(&r.cases, &mut agent, &r.vocab, &opts("bayes")).unwrap();
    assert_eq!(report.failed, 0);
    for s in &report.subsets {
        for m in [&s.pre, &s.post] {
            for t in ProbeTag::ATOMS {
                if let Some(a) = m.generative_accuracy[&t] {
                    assert_eq!(a, 1.0, "{} {t}", s.subset);
                }
                if let Some(e) = m.probabilistic_mae[&t] {
                    assert!(e <= 1e-9, "{} {t} {e}", s.subset);
                }
            }
            for ax in Axiom::ALL {
                if let Some(e) = m.logical_mae[&ax] {
                    assert!(e <= 1e-9);
                }
            }
        }
    }
    assert_eq!(agent.oracle().fingerprint(), r.oracle.fingerprint());
}

#[test]
fn memorizer_knows_the_corpus_and_stale_ignores_edits() {
    let r = run();
    let text = corpus_text(r);
    let mut m = Memorizer::new(r.vocab.clone());
    m.observe_corpus_text(text.as_bytes()).unwrap();
    let report = run_eval(&r.cases, &mut m, &r.vocab, &opts("memorizer")).unwrap();
    let all = report.subset(Subset::All).unwrap();
    assert_eq!(all.pre.generative_accuracy[&ProbeTag::S1r1], Some(1.0));
    assert_eq!(all.post.generative_accuracy[&ProbeTag::S1r1], Some(1.0));

    let mut stale = Memorizer::stale(r.vocab.clone());
    stale.observe_corpus_text(text.as_bytes()).unwrap();
    let report = run_eval(&r.cases, &mut stale, &r.vocab, &opts("stale")).unwrap();
    let all = report.subset(Subset::All).unwrap();
    // post-edit answers are the pre-edit answers
    let pre_hits = all.pre.generative_accuracy[&ProbeTag::S2r1];
    assert_eq!(pre_hits, all.post.generative_accuracy[&ProbeTag::S2r1]);
    assert!(all.post.generative_accuracy[&ProbeTag::S1r1].unwrap() < 1.0);
}

#[test]
fn stale_answers_do_not_move() {
    let r = run();
    let mut stale = Memorizer::stale(r.vocab.clone());
    stale
        .observe_corpus_text(corpus_text(r).as_bytes())
        .unwrap();
    for c in &r.cases[..10] {
        let pre = stale
            .answer(&phase_queries(c, Phase::Pre, &r.vocab))
            .unwrap();
        stale
            .edit(
                "e",
                &render_key_prompt(&c.edit.atom.key(), &r.vocab),
                r.vocab.entity_surface(&c.edit.atom.object),
                1000.0,
            )
            .unwrap();
        let post = stale
            .answer(&phase_queries(c, Phase::Pre, &r.vocab))
            .unwrap();
        stale.revert("r").unwrap();
        assert_eq!(pre, post);
    }
}

#[test]
fn shuffled_cases_give_the_same_metrics() {
    use rand::seq::SliceRandom;
    let r = run();
    let mut agent = BayesAgent::new(r.oracle.clone(), r.vocab.clone());
    let a = run_eval(&r.cases, &mut agent, &r.vocab, &opts("bayes")).unwrap();
    let mut shuffled = r.cases.clone();
    shuffled.shuffle(&mut crate::seeding::master_rng(3));
    let b = run_eval(&shuffled, &mut agent, &r.vocab, &opts("bayes")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn delta_is_post_minus_pre() {
    let r = run();
    let mut m = Memorizer::new(r.vocab.clone());
    m.observe_corpus_text(corpus_text(r).as_bytes()).unwrap();
    let report = run_eval(&r.cases, &mut m, &r.vocab, &opts("memorizer")).unwrap();
    for s in &report.subsets {
        for ((d, pre), post) in all_cells(&s.delta)
            .into_iter()
            .zip(all_cells(&s.pre))
            .zip(all_cells(&s.post))
        {
            match (d, pre, post) {
                (Some(d), Some(a), Some(b)) => assert!((d - (b - a)).abs() <= 1e-12),
                (None, _, _) => assert!(pre.is_none() || post.is_none()),
                _ => panic!("delta missing"),
            }
        }
    }
}

/// Drops every answer for one case and lets the others through.
struct Flaky<M> {
    inner: M,
    drop_case: String,
}

impl<M: ProbeModel> ProbeModel for Flaky<M> {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        let mut r = self.inner.answer(queries)?;
        r.retain(|x| !x.id.starts_with(&self.drop_case));
        Ok(r)
    }
    fn edit(
        &mut self,
        id: &str,
        prompt: &str,
        candidate: &str,
        weight: f64,
    ) -> Result<(), EvalError> {
        self.inner.edit(id, prompt, candidate, weight)
    }
    fn revert(&mut self, id: &str) -> Result<(), EvalError> {
        self.inner.revert(id)
    }
}

#[test]
fn missing_responses_fail_the_case() {
    let r = run();
    let mut m = Flaky {
        inner: BayesAgent::new(r.oracle.clone(), r.vocab.clone()),
        drop_case: r.cases[2].id.clone() + "/",
    };
    let report = run_eval(&r.cases, &mut m, &r.vocab, &opts("flaky")).unwrap();
    assert_eq!(report.failed, 1);
    assert_eq!(report.evaluated + report.failed, report.total);
    assert_eq!(report.failed_ids, vec![r.cases[2].id.clone()]);
    let all = report.subset(Subset::All).unwrap();
    assert_eq!(all.evaluated + all.failed, all.cases);
}

struct Wild;

impl ProbeModel for Wild {
    fn answer(&mut self, queries: &[ProbeQuery]) -> Result<Vec<ProbeResponse>, EvalError> {
        Ok(queries
            .iter()
            .map(|q| ProbeResponse {
                id: q.id.clone(),
                probability: Some(1.5),
                text: Some("nobody".into()),
                error: None,
            })
            .collect())
    }
    fn edit(&mut self, _: &str, _: &str, _: &str, _: f64) -> Result<(), EvalError> {
        Ok(())
    }
    fn revert(&mut self, _: &str) -> Result<(), EvalError> {
        Ok(())
    }
}

#[test]
fn out_of_range_probability_is_a_protocol_error() {
    let r = run();
    assert!(matches!(
        run_eval(&r.cases[..1], &mut Wild, &r.vocab, &opts("wild")),
        Err(EvalError::ProbabilityOutOfRange { .. })
    ));
}

#[test]
fn empty_report_renders_na() {
    let report = run_eval(&[], &mut Wild, &Vocabulary::new(), &opts("none")).unwrap();
    assert!(report.is_empty());
    let text = render_report(&report);
    assert!(text.contains("n/a"));
    assert!(!text.contains("0.000"));
}

#[test]
fn report_json_round_trip_and_table_shape() {
    let r = run();
    let mut agent = BayesAgent::new(r.oracle.clone(), r.vocab.clone());
    let report = run_eval(&r.cases, &mut agent, &r.vocab, &opts("bayes")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("report.txt");
    let h = crate::artifact::ArtifactHeader::new("report", 1, 5);
    let companion = write_report(&report, &h, &p).unwrap();
    let (_, back) = read_report_json(&companion).unwrap();
    assert_eq!(back, report);
    let text = std::fs::read_to_string(&p).unwrap();
    assert!(text.starts_with("# editbench report v1\n"));
    assert_eq!(text.matches("Pre-edit").count(), 3);
    assert!(text.contains("Δ"));
}

#[test]
fn tcp_client_matches_in_process_agent() {
    use std::io::{BufReader, BufWriter};
    use std::net::TcpListener;
    let r = run();
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let (oracle, vocab) = (r.oracle.clone(), r.vocab.clone());
    let server = std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut agent = BayesAgent::new(oracle, vocab);
        serve(
            &mut agent,
            BufReader::new(stream.try_clone().unwrap()),
            BufWriter::new(stream),
        )
        .unwrap()
    });
    let cases = &r.cases[..15];
    let mut client = connect_tcp(&addr, 7).unwrap();
    let remote = run_eval(cases, &mut client, &r.vocab, &opts("bayes")).unwrap();
    drop(client);
    let handled = server.join().unwrap();
    assert!(handled > 0);
    let mut local = BayesAgent::new(r.oracle.clone(), r.vocab.clone());
    let direct = run_eval(cases, &mut local, &r.vocab, &opts("bayes")).unwrap();
    assert_eq!(remote, direct);
}
