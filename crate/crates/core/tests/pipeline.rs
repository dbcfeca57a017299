use editbench::bench::{read_bench, write_bench};
use editbench::config::RunConfig;
use editbench::oracle::{read_oracle, write_oracle};
use editbench::pipeline::desk_run;

#[test]
fn desk_oracle_recovers_every_ground_truth() {
    let run = desk_run(21, 600, 10).unwrap();
    for key in &run.corpus.facts {
        let post = run.oracle.posterior_basic(key).unwrap();
        let gt = run.world.ground_truth(key).unwrap();
        assert_eq!(post.mode(), Some(gt), "{key}");
    }
}

#[test]
fn artifacts_survive_a_round_trip() {
    let run = desk_run(4, 400, 15).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();

    let oracle_path = dir.path().join("oracle.json");
    write_oracle(&run.oracle, cfg.header("oracle", 1), &oracle_path).unwrap();
    let (_, back) = read_oracle(&oracle_path).unwrap();
    assert_eq!(back.fingerprint(), run.oracle.fingerprint());

    let bench_path = dir.path().join("bench.jsonl");
    write_bench(&run.cases, &cfg.header("bench", 1), &bench_path).unwrap();
    let (h, cases) = read_bench(&bench_path).unwrap();
    assert_eq!(cases, run.cases);
    assert_eq!(h.get("n_cases"), Some("200"));
}

#[test]
fn different_seeds_give_different_corpora() {
    let a = desk_run(1, 300, 1).unwrap();
    let b = desk_run(2, 300, 1).unwrap();
    assert_ne!(a.corpus.documents, b.corpus.documents);
}
