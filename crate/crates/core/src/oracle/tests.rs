use proptest::prelude::*;

use super::*;

fn deps() -> DependencyMap {
    DependencyMap::new(vec![("educated".into(), "job".into())]).unwrap()
}

fn atom(s: &str, r: &str, o: &str) -> Atom {
    Atom::new(s, r, o)
}

fn state_with(key: (&str, &str), counts: &[(&str, f64)]) -> OracleState {
    let mut st = OracleState::new(deps());
    let k = FactKey::new(key.0, key.1);
    for (o, c) in counts {
        st.register(&k, &EntityId::from(*o));
        if *c > 0.0 {
            st.observe_atomic(&atom(key.0, key.1, o), *c).unwrap();
        }
    }
    st
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12
}

#[test]
fn worked_posteriors() {
    let st = state_with(("s", "r"), &[("a", 6.0), ("b", 4.0)]);
    let p = st.posterior_basic(&FactKey::new("s", "r")).unwrap();
    assert!(close(p.prob(&"a".into()), 7.0 / 12.0));
    assert!(close(p.prob(&"b".into()), 5.0 / 12.0));

    let st = state_with(("s", "r"), &[("a", 0.0), ("b", 10.0)]);
    let p = st.posterior_basic(&FactKey::new("s", "r")).unwrap();
    assert!(close(p.prob(&"a".into()), 1.0 / 12.0));
    assert!(close(p.prob(&"b".into()), 11.0 / 12.0));

    let st = state_with(("s", "r"), &[("a", 0.0), ("b", 0.0), ("c", 0.0)]);
    let p = st.posterior_basic(&FactKey::new("s", "r")).unwrap();
    for o in ["a", "b", "c"] {
        assert!(close(p.prob(&o.into()), 1.0 / 3.0));
    }
}

#[test]
fn unknown_key_and_bad_weights() {
    let mut st = OracleState::new(deps());
    assert!(matches!(
        st.posterior_basic(&FactKey::new("x", "y")),
        Err(OracleError::UnknownFactKey(_))
    ));
    assert!(st.observe_atomic(&atom("s", "r", "a"), -1.0).is_err());
    assert!(st.apply_edit(&atom("s", "r", "a"), 0.0).is_err());
    assert!(st.min_weight_for(&atom("s", "r", "a"), 1.0).is_err());
}

#[test]
fn zero_weight_is_a_no_op() {
    let mut st = state_with(("s", "r"), &[("a", 2.0), ("b", 1.0)]);
    let before = st.fingerprint();
    st.observe_atomic(&atom("s", "r", "a"), 0.0).unwrap();
    st.observe_atomic(&atom("s", "r", "zzz"), 0.0).unwrap();
    assert_eq!(st.fingerprint(), before);
}

#[test]
fn downstream_observation_splits_by_upstream_posterior() {
    // Upstream counts (3, 0) over three objects would not give 0.8; use (7, 1) with K=2:
    // (1+7)/10 = 0.8, (1+1)/10 = 0.2.
    let mut st = state_with(("s", "educated"), &[("harvard", 7.0), ("yale", 1.0)]);
    st.observe_atomic(&atom("s", "job", "lawyer"), 1.0).unwrap();
    let ck = |u: &str| CondKey {
        downstream: "job".into(),
        upstream: "educated".into(),
        upstream_object: u.into(),
    };
    let idx = st
        .cond_support(&"job".into())
        .iter()
        .position(|o| o.as_str() == "lawyer")
        .unwrap();
    assert!(close(st.cond_counts(&ck("harvard")).unwrap()[idx], 0.8));
    assert!(close(st.cond_counts(&ck("yale")).unwrap()[idx], 0.2));
}

#[test]
fn downstream_marginal_worked_case() {
    // Upstream posterior (0.7, 0.3): counts (6, 2), K=2 -> 7/10, 3/10.
    let mut st = state_with(("s", "educated"), &[("u1", 6.0), ("u2", 2.0)]);
    st.register(&FactKey::new("s", "job"), &"d1".into());
    st.register(&FactKey::new("s", "job"), &"d2".into());
    let ck = |u: &str| CondKey {
        downstream: "job".into(),
        upstream: "educated".into(),
        upstream_object: u.into(),
    };
    // p(d1|u1) = (1+8)/(2+8) = 0.9; p(d1|u2) = (1+1)/(2+8) = 0.2.
    st.add_cond(&ck("u1"), 0, 8.0);
    st.add_cond(&ck("u2"), 0, 1.0);
    st.add_cond(&ck("u2"), 1, 7.0);
    let m = st.posterior_downstream(&FactKey::new("s", "job")).unwrap();
    assert!(!m.fell_back);
    assert!(close(m.dist.prob(&"d1".into()), 0.69));
    assert!(close(m.dist.total(), 1.0));
}

#[test]
fn point_mass_upstream_selects_one_row() {
    let mut st = OracleState::new(deps());
    st.observe_atomic(&atom("s", "educated", "u1"), 5.0)
        .unwrap();
    st.observe_atomic(&atom("t", "job", "d1"), 1.0).unwrap();
    st.observe_atomic(&atom("t", "job", "d2"), 1.0).unwrap();
    let ck = CondKey {
        downstream: "job".into(),
        upstream: "educated".into(),
        upstream_object: "u1".into(),
    };
    st.add_cond(&ck, 0, 3.0);
    st.add_cond(&ck, 1, 1.0);
    let m = st.posterior_downstream(&FactKey::new("s", "job")).unwrap();
    let row = st.posterior_conditional(&ck);
    for (o, p) in row.entries() {
        assert!((m.dist.prob(o) - p).abs() < 1e-12);
    }
}

#[test]
fn downstream_falls_back_without_upstream() {
    let st = state_with(("s", "job"), &[("d1", 3.0), ("d2", 1.0)]);
    let m = st.posterior_downstream(&FactKey::new("s", "job")).unwrap();
    assert!(m.fell_back);
    assert!(close(m.dist.prob(&"d1".into()), 4.0 / 6.0));
}

#[test]
fn upstream_edit_moves_downstream_posterior() {
    let mut st = OracleState::new(deps());
    for (s, u, d) in [
        ("a", "h", "law"),
        ("b", "y", "med"),
        ("c", "h", "law"),
        ("d", "y", "med"),
    ] {
        st.observe_atomic(&atom(s, "educated", u), 5.0).unwrap();
        st.observe_atomic(&atom(s, "job", d), 5.0).unwrap();
    }
    let key = FactKey::new("a", "job");
    let before = st.posterior(&key).unwrap().prob(&"med".into());
    st.apply_edit(&atom("a", "educated", "y"), 1000.0).unwrap();
    let after = st.posterior(&key).unwrap().prob(&"med".into());
    assert!(after > before + 0.2, "{before} -> {after}");
}

#[test]
fn truth_probability_axioms() {
    let mut st = OracleState::new(deps());
    st.observe_atomic(&atom("s", "r", "a"), 1.0).unwrap();
    st.register(&FactKey::new("s", "r"), &"b".into());
    st.observe_atomic(&atom("t", "r", "a"), 0.0).unwrap();
    st.register(&FactKey::new("t", "r"), &"a".into());
    st.register(&FactKey::new("t", "r"), &"b".into());
    st.register(&FactKey::new("t", "r"), &"c".into());
    st.register(&FactKey::new("t", "r"), &"d".into());
    // p(s r a) = 2/3, p(t r a) = 1/4
    let a = atom("s", "r", "a");
    let b = atom("t", "r", "a");
    let p = |c: Claim, l: bool| st.truth_probability(&Sentence::truth(c, l)).unwrap();
    assert!(close(p(Claim::Atom(a.clone()), true), 2.0 / 3.0));
    assert!(close(p(Claim::Not(a.clone()), true), 1.0 / 3.0));
    assert!(close(p(Claim::And(a.clone(), b.clone()), true), 2.0 / 12.0));
    assert!(close(
        p(Claim::Or(a.clone(), b.clone()), true),
        2.0 / 3.0 + 0.25 - 2.0 / 12.0
    ));
    assert!(close(
        p(Claim::Or(a.clone(), b.clone()), false),
        1.0 - (2.0 / 3.0 + 0.25 - 2.0 / 12.0)
    ));
    assert!(close(
        st.truth_probability(&Sentence::Atomic(a.clone())).unwrap(),
        2.0 / 3.0
    ));
    let same = atom("s", "r", "b");
    assert!(matches!(
        st.claim_probability(&Claim::And(a, same)),
        Err(OracleError::DependenceUnsupported(_))
    ));
}

#[test]
fn or_weight_worked_case() {
    let mut st = OracleState::new(deps());
    for s in ["s", "t"] {
        st.register(&FactKey::new(s, "r"), &"a".into());
        st.register(&FactKey::new(s, "r"), &"b".into());
    }
    let w = connective_atom_weights(
        &st,
        &Claim::Or(atom("s", "r", "a"), atom("t", "r", "a")),
        true,
    )
    .unwrap();
    assert!(close(w[0].1, 2.0 / 3.0));
    assert!(close(w[1].1, 2.0 / 3.0));
    let w = connective_atom_weights(
        &st,
        &Claim::And(atom("s", "r", "a"), atom("t", "r", "a")),
        true,
    )
    .unwrap();
    assert!(w.iter().all(|(_, t)| *t == 1.0));
    let w = connective_atom_weights(&st, &Claim::Not(atom("s", "r", "a")), true).unwrap();
    assert_eq!(w[0].1, 0.0);
}

#[test]
fn corpus_reduces_to_observe_atomic() {
    let a = atom("s", "educated", "h");
    let mut x = OracleState::new(deps());
    observe_corpus(&mut x, [&Sentence::Atomic(a.clone())]).unwrap();
    let mut y = OracleState::new(deps());
    y.observe_atomic(&a, 1.0).unwrap();
    assert_eq!(x.fingerprint(), y.fingerprint());
}

#[test]
fn false_claims_spread_over_alternatives() {
    let s = [
        Sentence::Atomic(atom("s", "r", "a")),
        Sentence::Atomic(atom("s", "r", "b")),
        Sentence::Atomic(atom("s", "r", "c")),
        Sentence::truth(Claim::Atom(atom("s", "r", "a")), false),
    ];
    let mut st = OracleState::new(deps());
    observe_corpus(&mut st, &s).unwrap();
    let row = st.basic_row(&FactKey::new("s", "r")).unwrap();
    assert!(close(row.count(&"a".into()), 1.0));
    assert!(close(row.count(&"b".into()), 1.5));
    assert!(close(row.count(&"c".into()), 1.5));
}

#[test]
fn edit_worked_cases() {
    let mut st = state_with(("s", "r"), &[("a", 6.0), ("b", 4.0)]);
    assert_eq!(st.min_weight_for(&atom("s", "r", "a"), 0.95).unwrap(), 88);
    st.apply_edit(&atom("s", "r", "b"), 1000.0).unwrap();
    let p = st.posterior_basic(&FactKey::new("s", "r")).unwrap();
    assert!(close(p.prob(&"b".into()), 1005.0 / 1012.0));
    assert!(p.prob(&"b".into()) > 0.993);

    let st = state_with(("s", "r"), &[("a", 46.0), ("b", 0.0)]);
    // (1+46)/(2+46) ≈ 0.979 already above threshold
    assert_eq!(st.min_weight_for(&atom("s", "r", "a"), 0.95).unwrap(), 0);
}

#[test]
fn min_weight_for_new_object() {
    let st = state_with(("s", "r"), &[("a", 6.0), ("b", 4.0)]);
    let w = st.min_weight_for(&atom("s", "r", "new"), 0.95).unwrap();
    let at = |w: f64| (1.0 + w) / (13.0 + w);
    assert!(at(w as f64) >= 0.95 && at(w as f64 - 1.0) < 0.95);
}

#[test]
fn snapshots_nest_lifo() {
    let mut st = state_with(("s", "educated"), &[("h", 3.0), ("y", 1.0)]);
    st.observe_atomic(&atom("s", "job", "law"), 2.0).unwrap();
    let f0 = st.fingerprint();
    let t0 = st.snapshot();
    st.apply_edit(&atom("s", "educated", "new"), 1000.0)
        .unwrap();
    let f1 = st.fingerprint();
    let t1 = st.snapshot();
    st.apply_edit(&atom("s", "job", "doctor"), 88.0).unwrap();
    st.restore(t1).unwrap();
    assert_eq!(st.fingerprint(), f1);
    st.restore(t0).unwrap();
    assert_eq!(st.fingerprint(), f0);
    assert!(matches!(st.restore(t1), Err(OracleError::StaleSnapshot)));
    assert!(st.cond_support(&"job".into()).len() == 1);
}

#[test]
fn restoring_outer_token_invalidates_inner() {
    let mut st = state_with(("s", "r"), &[("a", 1.0)]);
    let outer = st.snapshot();
    let inner = st.snapshot();
    st.restore(outer).unwrap();
    assert!(st.restore(inner).is_err());
}

#[test]
fn many_edit_restore_cycles() {
    let mut st = OracleState::new(deps());
    for (s, u, d) in [("a", "h", "law"), ("b", "y", "med")] {
        st.observe_atomic(&atom(s, "educated", u), 3.0).unwrap();
        st.observe_atomic(&atom(s, "job", d), 3.0).unwrap();
    }
    let f = st.fingerprint();
    for i in 0..5000 {
        let t = st.snapshot();
        let o = format!("o{}", i % 7);
        st.apply_edit(
            &atom("a", if i % 2 == 0 { "educated" } else { "job" }, &o),
            1000.0,
        )
        .unwrap();
        st.restore(t).unwrap();
    }
    assert_eq!(st.fingerprint(), f);
}

#[test]
fn file_round_trip() {
    let mut st = state_with(("s", "educated"), &[("h", 0.1), ("y", 1.0 / 3.0)]);
    st.observe_atomic(&atom("s", "job", "law"), 2.0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("oracle.json");
    write_oracle(
        &st,
        crate::artifact::ArtifactHeader::new("oracle", 1, 3),
        &p,
    )
    .unwrap();
    let (h, back) = read_oracle(&p).unwrap();
    assert_eq!(h.seed, 3);
    assert_eq!(back.fingerprint(), st.fingerprint());
    assert_eq!(back.deps(), st.deps());
}

fn random_counts() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..10_000, 1..=20)
}

proptest! {
    #[test]
    fn posterior_matches_formula(counts in random_counts()) {
        let mut st = OracleState::new(deps());
        let k = FactKey::new("s", "r");
        for (i, c) in counts.iter().enumerate() {
            let o = format!("o{}", i);
            st.register(&k, &o.as_str().into());
            st.observe_atomic(&atom("s", "r", &o), *c as f64).unwrap();
        }
        let p = st.posterior_basic(&k).unwrap();
        let total: f64 = counts.iter().map(|c| 1.0 + *c as f64).sum();
        for (i, c) in counts.iter().enumerate() {
            let want = (1.0 + *c as f64) / total;
            let got = p.prob(&format!("o{}", i).into());
            prop_assert!((got - want).abs() <= 1e-12);
        }
        prop_assert!((p.total() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn min_weight_is_minimal(counts in random_counts(), pick in 0usize..20, thr in 0.5f64..0.999) {
        let mut st = OracleState::new(deps());
        let k = FactKey::new("s", "r");
        for (i, c) in counts.iter().enumerate() {
            let o = format!("o{}", i);
            st.register(&k, &o.as_str().into());
            st.observe_atomic(&atom("s", "r", &o), *c as f64).unwrap();
        }
        let target = atom("s", "r", &format!("o{}", pick % counts.len()));
        let w = st.min_weight_for(&target, thr).unwrap();
        let post = |w: u64| {
            let mut t = st.clone();
            if w > 0 {
                t.apply_edit(&target, w as f64).unwrap();
            }
            t.atom_probability(&target).unwrap()
        };
        prop_assert!(post(w) >= thr);
        if w > 0 {
            prop_assert!(post(w - 1) < thr);
        }
    }

    #[test]
    fn corpus_order_does_not_matter(seed in 0u64..1000) {
        use rand::seq::SliceRandom;
        let mut sentences = Vec::new();
        for (i, s) in ["a", "b", "c"].iter().enumerate() {
            for j in 0..4 {
                let o = format!("h{}", (i + j) % 3);
                sentences.push(Sentence::Atomic(atom(s, "educated", &o)));
                sentences.push(Sentence::Atomic(atom(s, "job", &format!("d{}", j % 2))));
                sentences.push(Sentence::truth(Claim::Atom(atom(s, "job", "d1")), j % 3 == 0));
            }
        }
        sentences.push(Sentence::truth(Claim::Or(atom("a", "job", "d0"), atom("b", "educated", "h1")), true));
        sentences.push(Sentence::truth(Claim::Not(atom("c", "educated", "h2")), true));
        let mut x = OracleState::new(deps());
        observe_corpus(&mut x, &sentences).unwrap();
        let mut shuffled = sentences.clone();
        shuffled.shuffle(&mut crate::seeding::master_rng(seed));
        let mut y = OracleState::new(deps());
        observe_corpus(&mut y, &shuffled).unwrap();
        for k in x.fact_keys() {
            let (p, q) = (x.posterior(k).unwrap(), y.posterior(k).unwrap());
            for (o, pv) in p.entries() {
                prop_assert!((pv - q.prob(o)).abs() <= 1e-12);
            }
        }
    }
}
