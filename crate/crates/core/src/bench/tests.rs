use std::sync::OnceLock;

use super::*;
use crate::pipeline::{desk_run, fit_oracle, DeskRun};

fn run() -> &'static DeskRun {
    static RUN: OnceLock<DeskRun> = OnceLock::new();
    RUN.get_or_init(|| desk_run(11, 1000, 120).unwrap())
}

fn target<'a>(case: &'a TestCase, tag: ProbeTag, which: &'a [Target]) -> &'a Target {
    let (_, i) = case.probe(tag).unwrap();
    &which[i]
}

#[test]
fn edit_kinds_roughly_balanced() {
    let cases = &run().cases;
    let fixes = cases.iter().filter(|c| c.flags.error_fixing).count() as f64;
    let n = cases.len() as f64;
    // four standard deviations of Binomial(n, 0.5)
    assert!(
        (fixes - n / 2.0).abs() <= 4.0 * (n * 0.25).sqrt(),
        "{fixes} of {n}"
    );
    for c in cases {
        assert_eq!(c.flags.error_fixing, c.edit.kind == EditKind::ErrorFixing);
    }
}

#[test]
fn auto_weight_reaches_threshold() {
    for c in &run().cases {
        assert!(
            target(c, ProbeTag::S1r1, &c.targets_post).probability >= 0.95,
            "{}",
            c.id
        );
        let fixed = target(c, ProbeTag::S1r1, &c.targets_post_fixed).probability;
        assert!(fixed >= 0.95);
    }
}

#[test]
fn error_fixing_edits_name_the_prior_argmax() {
    for c in run().cases.iter().filter(|c| c.flags.error_fixing) {
        let t = target(c, ProbeTag::S1r1, &c.targets_pre);
        assert!(t.argmax.contains(&c.edit.atom.object), "{}", c.id);
    }
    for c in run().cases.iter().filter(|c| !c.flags.error_fixing) {
        let gt = run().world.ground_truth(&c.edit.atom.key()).unwrap();
        assert_ne!(&c.edit.atom.object, gt);
    }
}

#[test]
fn logic_targets_follow_the_axioms() {
    for c in &run().cases {
        for t in [&c.targets_pre, &c.targets_post, &c.targets_post_fixed] {
            let a = target(c, ProbeTag::S1r1, t).probability;
            let tf = target(c, ProbeTag::Tf, t).probability;
            let b = target(c, ProbeTag::B, t).probability;
            let not = target(c, ProbeTag::Not, t).probability;
            let and = target(c, ProbeTag::And, t).probability;
            let or = target(c, ProbeTag::Or, t).probability;
            assert!((a - tf).abs() <= 1e-12);
            assert!((not - (1.0 - tf)).abs() <= 1e-12);
            assert!((and - tf * b).abs() <= 1e-12);
            assert!((or - (tf + b - tf * b)).abs() <= 1e-12);
        }
    }
}

#[test]
fn partner_and_second_subject_differ_from_first() {
    for c in &run().cases {
        let s1 = &c.edit.atom.subject;
        let (p, _) = c.probe(ProbeTag::B).unwrap();
        assert!(p.sentence.atoms().iter().all(|a| &a.subject != s1));
        let (p, _) = c.probe(ProbeTag::S2r1).unwrap();
        assert_ne!(&p.sentence.atoms()[0].subject, s1);
    }
}

#[test]
fn downstream_probe_uses_paired_relation() {
    let deps = &run().world.deps;
    for c in &run().cases {
        let (p, i) = c.probe(ProbeTag::S1r2).unwrap();
        let r2 = &p.sentence.atoms()[0].relation;
        assert_eq!(
            deps.downstream_of(&c.edit.atom.relation) == Some(r2),
            !c.flags.r2_fallback
        );
        if c.flags.downstream_change {
            assert!(!c.flags.r2_fallback);
            let pre = &c.targets_pre[i].argmax;
            let post = &c.targets_post[i].argmax;
            assert_ne!(pre, post);
        }
    }
    let changed = run()
        .cases
        .iter()
        .filter(|c| c.flags.downstream_change)
        .count();
    assert!(changed > 0, "no case flips its downstream answer");
}

#[test]
fn generation_leaves_oracle_untouched_and_is_reproducible() {
    let r = run();
    let mut fresh = fit_oracle(&r.world.deps, &r.corpus, &r.vocab).unwrap();
    assert_eq!(fresh.fingerprint(), r.oracle.fingerprint());
    for c in &r.cases {
        let again = recompute_case(&mut fresh, c).unwrap();
        for (x, y) in [
            (&again.targets_pre, &c.targets_pre),
            (&again.targets_post, &c.targets_post),
            (&again.targets_post_fixed, &c.targets_post_fixed),
        ] {
            for (a, b) in x.iter().zip(y) {
                assert!((a.probability - b.probability).abs() <= 1e-9);
                assert_eq!(a.argmax, b.argmax);
            }
        }
    }
    assert_eq!(fresh.fingerprint(), r.oracle.fingerprint());
}

#[test]
fn subsets_match_flags() {
    let cases = &run().cases;
    let s = split_subsets(cases);
    assert_eq!(s[&Subset::All].len(), cases.len());
    let recount = |f: fn(&CaseFlags) -> bool| cases.iter().filter(|c| f(&c.flags)).count();
    assert_eq!(
        s[&Subset::Downstream].len(),
        recount(|f| f.downstream_change)
    );
    assert_eq!(s[&Subset::Errorfix].len(), recount(|f| f.error_fixing));
    assert_eq!("errorfix".parse::<Subset>().unwrap(), Subset::Errorfix);
    assert!("bogus".parse::<Subset>().is_err());
}

#[test]
fn bench_file_round_trip() {
    let cases = &run().cases[..10];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bench.jsonl");
    let h =
        crate::artifact::ArtifactHeader::new("bench", BENCH_FORMAT_VERSION, 11).with("n_cases", 10);
    write_bench(cases, &h, &p).unwrap();
    let (back_h, back) = read_bench(&p).unwrap();
    assert_eq!(back_h.seed, 11);
    assert_eq!(back, cases);
}

#[test]
fn too_few_subjects() {
    let w = &run().world;
    let mut st = OracleState::new(w.deps.clone());
    st.observe_atomic(&Atom::new("x", "y", "z"), 1.0).unwrap();
    assert!(matches!(
        gen_cases(w, &mut st, &BenchConfig::new(1, 0)),
        Err(BenchError::TooFewSubjects(1))
    ));
}
