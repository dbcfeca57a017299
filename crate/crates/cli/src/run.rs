//! Subcommand implementations.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;

use editbench::artifact::{file_digest, require};
use editbench::bench::{
    gen_cases, read_bench, split_subsets, write_bench, BenchConfig, Subset, BENCH_FORMAT_VERSION,
};
use editbench::config::RunConfig;
use editbench::corpus::{
    generate_corpus, read_corpus_text, read_vocab, write_corpus, CorpusConfig,
    CORPUS_FORMAT_VERSION,
};
use editbench::error::Error;
use editbench::eval::{
    connect_tcp, json_path, read_report_json, render_report, run_eval, serve, write_report,
    BayesAgent, EvalOptions, ExecClient, Memorizer, ProbeModel, REPORT_FORMAT_VERSION,
};
use editbench::language::{
    parse, parse_prompt, render_atom, render_key_prompt, Atom, Prompt, Sentence, Vocabulary,
};
use editbench::oracle::{read_oracle, write_oracle, OracleState, ORACLE_FORMAT_VERSION};
use editbench::pipeline::{
    fit_oracle_text, world_from_graph, WorldSettings, DEFAULT_MIN_COOCCUR, SYNTH_MIN_COOCCUR,
};
use editbench::world::{
    ingest_triples, read_world, synth_graph, write_world, CooccurProfile, Denylist, SynthParams,
    WorldModel, WORLD_FORMAT_VERSION,
};

use super::{
    BenchCmd, Command, CorpusCmd, EvalCmd, ModelSpec, OracleCmd, ServeArgs, WeightSpec, WorldCmd,
};

pub enum Outcome {
    Done,
    EmptyReport,
}

pub fn dispatch(command: Command, mut cfg: RunConfig) -> Result<Outcome, Error> {
    match command {
        Command::World(WorldCmd::Build {
            triples,
            names,
            limit,
            no_denylist,
            ..
        }) => world_build(&mut cfg, &triples, names.as_deref(), limit, no_denylist)?,
        Command::World(WorldCmd::Synth {
            subjects,
            relations,
            objects,
            ..
        }) => world_synth(&mut cfg, subjects, relations, objects)?,
        Command::Corpus(CorpusCmd::Gen { .. }) => corpus_gen(&cfg)?,
        Command::Oracle(OracleCmd::Fit { .. }) => oracle_fit(&cfg)?,
        Command::Oracle(OracleCmd::Query { sentence, .. }) => oracle_query(&cfg, &sentence)?,
        Command::Oracle(OracleCmd::Edit {
            sentence,
            weight,
            save,
            ..
        }) => oracle_edit(&cfg, &sentence, weight, save.as_deref())?,
        Command::Bench(BenchCmd::Gen { .. }) => bench_gen(&cfg)?,
        Command::Eval(EvalCmd::Run { model, subset, .. }) => return eval_run(&cfg, &model, subset),
        Command::Report { json } => {
            let path = json.unwrap_or_else(|| json_path(&cfg.report_path()));
            require("report", &path)?;
            let (_, report) = read_report_json(&path)?;
            print!("{}", render_report(&report));
        }
        Command::Serve(args) => serve_stdio(&cfg, &args)?,
    }
    Ok(Outcome::Done)
}

fn open(what: &'static str, path: &Path) -> Result<BufReader<File>, Error> {
    require(what, path)?;
    Ok(BufReader::new(File::open(path)?))
}

fn load_world(cfg: &RunConfig) -> Result<(PathBuf, WorldModel), Error> {
    let path = cfg.world_path();
    require("world", &path)?;
    let (_, world) = read_world(&path)?;
    Ok((path, world))
}

fn load_vocab(cfg: &RunConfig) -> Result<Vocabulary, Error> {
    let path = cfg.corpus_paths().vocab;
    require("vocabulary", &path)?;
    Ok(read_vocab(&path)?.1)
}

fn load_oracle(cfg: &RunConfig) -> Result<OracleState, Error> {
    let path = cfg.oracle_path();
    require("oracle", &path)?;
    Ok(read_oracle(&path)?.1)
}

fn load_corpus_text(cfg: &RunConfig) -> Result<String, Error> {
    let path = cfg.corpus_paths().corpus;
    require("corpus", &path)?;
    Ok(read_corpus_text(&path)?.1)
}

fn finish_world(
    cfg: &mut RunConfig,
    graph_default: usize,
    build: impl FnOnce(&WorldSettings) -> Result<WorldModel, Error>,
    extra: &[(&str, String)],
) -> Result<(), Error> {
    let settings = WorldSettings {
        min_cooccur: cfg.min_cooccur.unwrap_or(graph_default),
        top_k: cfg.top_k,
        floor: cfg.floor,
        seed: cfg.seed,
    };
    let world = build(&settings)?;
    cfg.min_cooccur = Some(settings.min_cooccur);
    let mut header = cfg.header("world", WORLD_FORMAT_VERSION);
    for (k, v) in extra {
        header = header.with(k, v);
    }
    let path = cfg.world_path();
    write_world(&world, &header, &path)?;
    println!(
        "world: {} facts over {} relations, {} dependency pair(s), {:.1}% conditioned -> {}",
        world.n_facts(),
        world.graph.relations().len(),
        world.deps.len(),
        100.0 * world.conditioned_fraction(),
        path.display()
    );
    Ok(())
}

fn world_build(
    cfg: &mut RunConfig,
    triples: &Path,
    names: Option<&Path>,
    limit: Option<usize>,
    no_denylist: bool,
) -> Result<(), Error> {
    let deny = if no_denylist {
        Denylist::empty()
    } else {
        Denylist::default()
    };
    let ingested = ingest_triples(open("triple file", triples)?, limit, &deny)?;
    info!(
        "read {} rows: {} rejected, {} denylisted",
        ingested.rows_read, ingested.rejected, ingested.denied
    );
    let mut graph = ingested.graph;
    let mut extra = vec![("triples_digest", file_digest(triples)?)];
    if let Some(n) = names {
        let loaded = graph.load_names(open("names file", n)?)?;
        info!("loaded {loaded} names");
        extra.push(("names_digest", file_digest(n)?));
    }
    if let Some(l) = limit {
        extra.push(("limit", l.to_string()));
    }
    if no_denylist {
        extra.push(("denylist", "off".into()));
    }
    finish_world(
        cfg,
        DEFAULT_MIN_COOCCUR,
        |s| Ok(world_from_graph(&graph, s)?),
        &extra,
    )
}

fn world_synth(
    cfg: &mut RunConfig,
    subjects: Option<usize>,
    relations: Option<usize>,
    objects: Option<usize>,
) -> Result<(), Error> {
    let mut p = SynthParams::desk(cfg.seed);
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
    let extra = [
        ("synth_subjects", p.n_subjects.to_string()),
        ("synth_relations", p.n_relations.to_string()),
        ("synth_objects", p.n_objects.to_string()),
    ];
    let graph = synth_graph(&p)?;
    finish_world(
        cfg,
        SYNTH_MIN_COOCCUR,
        |s| Ok(world_from_graph(&graph, s)?),
        &extra,
    )
}

fn corpus_gen(cfg: &RunConfig) -> Result<(), Error> {
    let (world_path, world) = load_world(cfg)?;
    let vocab = Vocabulary::from_graph(&world.graph);
    let ccfg = CorpusConfig {
        target_facts: cfg.facts,
        connectives_per_subject: cfg.connectives_per_subject,
        max_per_doc: cfg.max_per_doc,
        seed: cfg.seed,
    };
    let corpus = generate_corpus(&world, &vocab, &ccfg)?;
    let header = cfg
        .header("corpus", CORPUS_FORMAT_VERSION)
        .with("world_digest", file_digest(&world_path)?);
    let paths = cfg.corpus_paths();
    write_corpus(&corpus, &vocab, &header, &paths)?;
    print!("{}", corpus.stats);
    println!("corpus -> {}", paths.corpus.display());
    Ok(())
}

fn oracle_fit(cfg: &RunConfig) -> Result<(), Error> {
    let (world_path, world) = load_world(cfg)?;
    let vocab = load_vocab(cfg)?;
    let text = load_corpus_text(cfg)?;
    let state = fit_oracle_text(&world.deps, &text, &vocab)?;
    let header = cfg
        .header("oracle", ORACLE_FORMAT_VERSION)
        .with("world_digest", file_digest(&world_path)?)
        .with("corpus_digest", file_digest(&cfg.corpus_paths().corpus)?);
    let path = cfg.oracle_path();
    write_oracle(&state, header, &path)?;
    println!(
        "oracle: {} facts, fingerprint {} -> {}",
        state.fact_keys().count(),
        &state.fingerprint()[..16],
        path.display()
    );
    Ok(())
}

/// Strips one trailing period so sentences can be pasted from the corpus.
fn sentence_text(s: &str) -> &str {
    let s = s.trim();
    s.strip_suffix('.').map(str::trim_end).unwrap_or(s)
}

fn oracle_query(cfg: &RunConfig, sentence: &str) -> Result<(), Error> {
    let state = load_oracle(cfg)?;
    let vocab = load_vocab(cfg)?;
    let text = sentence_text(sentence);
    if let Ok(s) = parse(text, &vocab) {
        println!("{:.6}", state.truth_probability(&s)?);
        return Ok(());
    }
    match parse_prompt(text, &vocab)? {
        Prompt::Truth(claim) => println!("{:.6}", state.claim_probability(&claim)?),
        Prompt::NextObject(key) => {
            let dist = state.posterior(&key)?;
            let mut entries = dist.entries().to_vec();
            entries.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            let mut out = io::stdout().lock();
            for (o, p) in entries {
                writeln!(out, "{}\t{p:.6}", vocab.entity_surface(&o))?;
            }
        }
    }
    Ok(())
}

fn oracle_edit(
    cfg: &RunConfig,
    sentence: &str,
    weight: WeightSpec,
    save: Option<&Path>,
) -> Result<(), Error> {
    let mut state = load_oracle(cfg)?;
    let vocab = load_vocab(cfg)?;
    let atom: Atom = match parse(sentence_text(sentence), &vocab)? {
        Sentence::Atomic(a) => a,
        Sentence::Truth { .. } => {
            return Err(Error::Config("an edit must be an `s r o` sentence".into()))
        }
    };
    let w = match weight {
        WeightSpec::Auto(t) => state.min_weight_for(&atom, t.unwrap_or(cfg.threshold))? as f64,
        WeightSpec::Count(c) => c,
    };
    let downstream = state
        .deps()
        .downstream_of(&atom.relation)
        .map(|d| editbench::ids::FactKey::new(atom.subject.clone(), d.clone()))
        .filter(|k| state.is_registered(k));
    let mode = |state: &OracleState, key: &editbench::ids::FactKey| -> Result<String, Error> {
        let post = state.posterior(key)?;
        Ok(post
            .mode()
            .map(|o| format!("{} ({:.4})", vocab.entity_surface(o), post.prob(o)))
            .unwrap_or_else(|| "n/a".into()))
    };
    let before = state.atom_probability(&atom)?;
    let down_before = downstream.as_ref().map(|k| mode(&state, k)).transpose()?;
    if w > 0.0 {
        state.apply_edit(&atom, w)?;
    }
    let after = state.atom_probability(&atom)?;
    println!("edit\t{}", render_atom(&atom, &vocab));
    println!("weight\t{w}");
    println!("before\t{before:.6}");
    println!("after\t{after:.6}");
    if let (Some(k), Some(b)) = (&downstream, down_before) {
        println!(
            "{}\t{b} -> {}",
            render_key_prompt(k, &vocab),
            mode(&state, k)?
        );
    }
    if let Some(path) = save {
        let header = cfg
            .header("oracle", ORACLE_FORMAT_VERSION)
            .with("edit", render_atom(&atom, &vocab))
            .with("edit_count", w);
        write_oracle(&state, header, path)?;
        println!("saved -> {}", path.display());
    }
    Ok(())
}

fn bench_gen(cfg: &RunConfig) -> Result<(), Error> {
    let (world_path, world) = load_world(cfg)?;
    let oracle_path = cfg.oracle_path();
    let mut state = load_oracle(cfg)?;
    let bcfg = BenchConfig {
        n_cases: cfg.n_cases,
        threshold: cfg.threshold,
        fixed_weight: cfg.fixed_weight,
        seed: cfg.seed,
    };
    let cases = gen_cases(&world, &mut state, &bcfg)?;
    let header = cfg
        .header("bench", BENCH_FORMAT_VERSION)
        .with("world_digest", file_digest(&world_path)?)
        .with("oracle_digest", file_digest(&oracle_path)?);
    let path = cfg.bench_path();
    write_bench(&cases, &header, &path)?;
    let subsets = split_subsets(&cases);
    let count = |s: Subset| subsets.get(&s).map_or(0, Vec::len);
    println!(
        "bench: {} cases ({} downstream change, {} error fixing, {} fallback) -> {}",
        cases.len(),
        count(Subset::Downstream),
        count(Subset::Errorfix),
        cases.iter().filter(|c| c.flags.r2_fallback).count(),
        path.display()
    );
    Ok(())
}

fn memorizer(cfg: &RunConfig, vocab: Vocabulary, follows_edits: bool) -> Result<Memorizer, Error> {
    let text = load_corpus_text(cfg)?;
    let mut m = if follows_edits {
        Memorizer::new(vocab)
    } else {
        Memorizer::stale(vocab)
    };
    m.observe_corpus_text(text.as_bytes())?;
    Ok(m)
}

fn built_in(
    cfg: &RunConfig,
    choice: &ModelSpec,
    vocab: &Vocabulary,
) -> Result<Box<dyn ProbeModel>, Error> {
    Ok(match choice {
        ModelSpec::Bayes => Box::new(BayesAgent::new(load_oracle(cfg)?, vocab.clone())),
        ModelSpec::Memorizer => Box::new(memorizer(cfg, vocab.clone(), true)?),
        ModelSpec::Stale => Box::new(memorizer(cfg, vocab.clone(), false)?),
        ModelSpec::Exec(cmd) => Box::new(ExecClient::spawn(cmd, cfg.window)?),
        ModelSpec::Tcp(addr) => Box::new(connect_tcp(addr, cfg.window)?),
    })
}

fn eval_run(cfg: &RunConfig, choice: &ModelSpec, subset: Subset) -> Result<Outcome, Error> {
    let bench_path = cfg.bench_path();
    require("bench", &bench_path)?;
    let (_, cases) = read_bench(&bench_path)?;
    let vocab = load_vocab(cfg)?;
    let mut model = built_in(cfg, choice, &vocab)?;
    let opts = EvalOptions {
        model_name: choice.name(),
        selection: subset,
        edit_weight: cfg.edit_weight,
    };
    let report = run_eval(&cases, model.as_mut(), &vocab, &opts)?;
    drop(model);
    let header = cfg
        .header("report", REPORT_FORMAT_VERSION)
        .with("model", choice.name())
        .with("subset", subset)
        .with("bench_digest", file_digest(&bench_path)?);
    let path = cfg.report_path();
    let companion = write_report(&report, &header, &path)?;
    print!("{}", render_report(&report));
    info!("report -> {} and {}", path.display(), companion.display());
    if report.is_empty() {
        return Ok(Outcome::EmptyReport);
    }
    Ok(Outcome::Done)
}

fn serve_stdio(cfg: &RunConfig, args: &ServeArgs) -> Result<(), Error> {
    if matches!(args.model, ModelSpec::Exec(_) | ModelSpec::Tcp(_)) {
        return Err(Error::Config("serve only runs built-in agents".into()));
    }
    let vocab = load_vocab(cfg)?;
    let mut model = built_in(cfg, &args.model, &vocab)?;
    let handled = serve(&mut model, io::stdin().lock(), io::stdout().lock())?;
    info!("answered {handled} request(s)");
    Ok(())
}
