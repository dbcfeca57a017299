use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{ArgAction, Args, Parser, Subcommand};

use editbench::bench::Subset;
use editbench::config::RunConfig;
use editbench::error::Error;
use editbench::eval::EditWeightMode;

mod run;

/// Exit status when an evaluation selects no cases.
const EXIT_EMPTY_REPORT: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "editbench",
    version,
    about = "Knowledge-editing benchmark with exact Bayesian targets"
)]
struct Cli {
    /// Config file of `key = value` lines. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts whose path is not given [env: EDITBENCH_OUT_DIR]
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Log more; repeat for debug output.
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the world model.
    #[command(subcommand)]
    World(WorldCmd),
    /// Generate the training corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Fit, query and edit the Bayesian oracle.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Generate test cases.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Evaluate a model on test cases.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Print the table of a saved report.
    Report {
        /// JSON companion written by `eval run` (default: the report path plus `.json`).
        json: Option<PathBuf>,
    },
    /// Answer probe requests from stdin with a built-in agent.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct WorldKnobs {
    /// Minimum shared-subject count for a relation to survive.
    #[arg(long)]
    min_cooccur: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Lower bound on ground-truth probability, in (0.5, 1].
    #[arg(long)]
    floor: Option<f64>,
    /// World file to write.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum WorldCmd {
    /// From a `subject relation object` triple file (tab or comma separated).
    Build {
        #[arg(long)]
        triples: PathBuf,
        /// `id<TAB>name` lines for entities and relations.
        #[arg(long)]
        names: Option<PathBuf>,
        /// Read at most this many triple rows.
        #[arg(long)]
        limit: Option<usize>,
        /// Keep relations and entities that are dropped by default.
        #[arg(long)]
        no_denylist: bool,
        #[command(flatten)]
        knobs: WorldKnobs,
    },
    /// From a synthetic graph with planted relation couplings.
    Synth {
        #[arg(long)]
        subjects: Option<usize>,
        #[arg(long)]
        relations: Option<usize>,
        /// Objects per relation.
        #[arg(long)]
        objects: Option<usize>,
        #[command(flatten)]
        knobs: WorldKnobs,
    },
}

#[derive(Debug, Subcommand)]
enum CorpusCmd {
    Gen {
        #[arg(long)]
        world: Option<PathBuf>,
        /// Number of facts to cover.
        #[arg(long)]
        facts: Option<usize>,
        #[arg(long)]
        connectives_per_subject: Option<usize>,
        #[arg(long)]
        max_per_doc: Option<usize>,
        /// Directory receiving the corpus, statistics and vocabulary files.
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct OracleInputs {
    #[arg(long)]
    oracle: Option<PathBuf>,
    /// Corpus directory; its vocabulary resolves surface names.
    #[arg(long)]
    corpus_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum OracleCmd {
    Fit {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        corpus_dir: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
    },
    /// Posterior for `s r` (next object) or the truth probability of a sentence.
    Query {
        #[command(flatten)]
        inputs: OracleInputs,
        #[arg(long)]
        sentence: String,
    },
    /// Apply an atomic edit and show the posterior before and after.
    Edit {
        #[command(flatten)]
        inputs: OracleInputs,
        /// `s r o`
        #[arg(long)]
        sentence: String,
        /// A count, `auto` (smallest count reaching the threshold) or `autoNN` for NN percent.
        #[arg(long, default_value = "auto")]
        weight: WeightSpec,
        #[arg(long)]
        threshold: Option<f64>,
        /// Write the edited oracle here.
        #[arg(long)]
        save: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum BenchCmd {
    Gen {
        #[arg(long)]
        world: Option<PathBuf>,
        #[arg(long)]
        oracle: Option<PathBuf>,
        #[arg(long)]
        n_cases: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        fixed_weight: Option<f64>,
        /// Test-case file to write.
        #[arg(long)]
        bench: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
enum EvalCmd {
    Run {
        #[arg(long)]
        bench: Option<PathBuf>,
        #[command(flatten)]
        inputs: OracleInputs,
        /// bayes, memorizer, stale, exec:COMMAND or tcp:HOST:PORT
        #[arg(long, default_value = "bayes")]
        model: ModelSpec,
        /// all, downstream or errorfix
        #[arg(long, default_value = "all")]
        subset: Subset,
        /// auto or fixed
        #[arg(long)]
        edit_weight: Option<EditWeightMode>,
        /// Requests in flight per exchange with an external model.
        #[arg(long)]
        window: Option<usize>,
        /// Text report to write; the JSON companion goes next to it.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// bayes, memorizer or stale
    #[arg(long, default_value = "bayes")]
    model: ModelSpec,
    #[command(flatten)]
    inputs: OracleInputs,
}

#[derive(Debug, Clone, PartialEq)]
enum ModelSpec {
    Bayes,
    Memorizer,
    Stale,
    Exec(String),
    Tcp(String),
}

impl FromStr for ModelSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "bayes" => ModelSpec::Bayes,
            "memorizer" => ModelSpec::Memorizer,
            "stale" => ModelSpec::Stale,
            _ => match s.split_once(':') {
                Some(("exec", cmd)) if !cmd.trim().is_empty() => ModelSpec::Exec(cmd.to_string()),
                Some(("tcp", addr)) if !addr.is_empty() => ModelSpec::Tcp(addr.to_string()),
                _ => return Err(format!("unknown model {s:?}")),
            },
        })
    }
}

impl ModelSpec {
    fn name(&self) -> String {
        match self {
            ModelSpec::Bayes => "bayes".into(),
            ModelSpec::Memorizer => "memorizer".into(),
            ModelSpec::Stale => "stale".into(),
            ModelSpec::Exec(c) => format!("exec:{c}"),
            ModelSpec::Tcp(a) => format!("tcp:{a}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum WeightSpec {
    Auto(Option<f64>),
    Count(f64),
}

impl FromStr for WeightSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(WeightSpec::Auto(None));
        }
        if let Some(pct) = s.strip_prefix("auto") {
            let p: f64 = pct.parse().map_err(|_| format!("bad weight {s:?}"))?;
            return Ok(WeightSpec::Auto(Some(p / 100.0)));
        }
        match s.parse::<f64>() {
            Ok(w) if w >= 0.0 && w.is_finite() => Ok(WeightSpec::Count(w)),
            _ => Err(format!("bad weight {s:?}")),
        }
    }
}

/// Collects `key = value` overrides from flags that were given.
#[derive(Default)]
struct Overrides(Vec<(&'static str, String)>);

impl Overrides {
    fn opt<T: ToString>(&mut self, key: &'static str, v: &Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((key, v.to_string()));
        }
        self
    }

    fn path(&mut self, key: &'static str, v: &Option<PathBuf>) -> &mut Self {
        if let Some(v) = v {
            self.0.push((key, v.display().to_string()));
        }
        self
    }
}

fn overrides(cli: &Cli) -> Overrides {
    let mut o = Overrides::default();
    o.opt("seed", &cli.seed).path("out_dir", &cli.out_dir);
    let inputs = |o: &mut Overrides, i: &OracleInputs| {
        o.path("oracle", &i.oracle)
            .path("corpus_dir", &i.corpus_dir);
    };
    let knobs = |o: &mut Overrides, k: &WorldKnobs| {
        o.opt("min_cooccur", &k.min_cooccur)
            .opt("top_k", &k.top_k)
            .opt("floor", &k.floor)
            .path("world", &k.out);
    };
    match &cli.command {
        Command::World(WorldCmd::Build { knobs: k, .. })
        | Command::World(WorldCmd::Synth { knobs: k, .. }) => knobs(&mut o, k),
        Command::Corpus(CorpusCmd::Gen {
            world,
            facts,
            connectives_per_subject,
            max_per_doc,
            corpus_dir,
        }) => {
            o.path("world", world)
                .opt("facts", facts)
                .opt("connectives_per_subject", connectives_per_subject)
                .opt("max_per_doc", max_per_doc)
                .path("corpus_dir", corpus_dir);
        }
        Command::Oracle(OracleCmd::Fit {
            world,
            corpus_dir,
            oracle,
        }) => {
            o.path("world", world)
                .path("corpus_dir", corpus_dir)
                .path("oracle", oracle);
        }
        Command::Oracle(OracleCmd::Query { inputs: i, .. }) => inputs(&mut o, i),
        Command::Oracle(OracleCmd::Edit {
            inputs: i,
            threshold,
            ..
        }) => {
            inputs(&mut o, i);
            o.opt("threshold", threshold);
        }
        Command::Bench(BenchCmd::Gen {
            world,
            oracle,
            n_cases,
            threshold,
            fixed_weight,
            bench,
        }) => {
            o.path("world", world)
                .path("oracle", oracle)
                .opt("n_cases", n_cases)
                .opt("threshold", threshold)
                .opt("fixed_weight", fixed_weight)
                .path("bench", bench);
        }
        Command::Eval(EvalCmd::Run {
            bench,
            inputs: i,
            edit_weight,
            window,
            report,
            ..
        }) => {
            inputs(&mut o, i);
            o.path("bench", bench)
                .opt("edit_weight", edit_weight)
                .opt("window", window)
                .path("report", report);
        }
        Command::Report { .. } => {}
        Command::Serve(s) => inputs(&mut o, &s.inputs),
    }
    o
}

fn resolve_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::from_env();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for (k, v) in overrides(cli).0 {
        cfg.set(k, &v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_error(e: &Error) {
    eprintln!("error: {e}");
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        eprintln!("  caused by: {s}");
        source = s.source();
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    let result = resolve_config(&cli).and_then(|cfg| run::dispatch(cli.command, cfg));
    match result {
        Ok(run::Outcome::Done) => ExitCode::SUCCESS,
        Ok(run::Outcome::EmptyReport) => {
            eprintln!("error: no test cases matched the selection");
            ExitCode::from(EXIT_EMPTY_REPORT)
        }
        Err(e) => {
            print_error(&e);
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs() {
        assert_eq!("bayes".parse::<ModelSpec>().unwrap(), ModelSpec::Bayes);
        assert_eq!(
            "exec:python3 agent.py".parse::<ModelSpec>().unwrap(),
            ModelSpec::Exec("python3 agent.py".into())
        );
        assert_eq!(
            "tcp:127.0.0.1:9000".parse::<ModelSpec>().unwrap(),
            ModelSpec::Tcp("127.0.0.1:9000".into())
        );
        assert!("exec:".parse::<ModelSpec>().is_err());
        assert!("gpt".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn weight_specs() {
        assert_eq!(
            "auto".parse::<WeightSpec>().unwrap(),
            WeightSpec::Auto(None)
        );
        assert_eq!(
            "auto95".parse::<WeightSpec>().unwrap(),
            WeightSpec::Auto(Some(0.95))
        );
        assert_eq!("88".parse::<WeightSpec>().unwrap(), WeightSpec::Count(88.0));
        assert!("-1".parse::<WeightSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "seed = 5\nfacts = 300\n").unwrap();
        let cli = Cli::parse_from([
            "editbench",
            "--config",
            file.to_str().unwrap(),
            "corpus",
            "gen",
            "--facts",
            "400",
        ]);
        let cfg = resolve_config(&cli).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.facts, 400);
    }
}
