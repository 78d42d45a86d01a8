use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fuzzy_mln::eval::{
    default_generator_config, default_taxonomy, generate_corpus, read_corpus, run_experiment,
    write_corpus, EvalError, ExperimentConfig, Prediction, SplitSpec, DEFAULT_TEMPLATE,
    EVAL_MAX_ITERATIONS,
};
use fuzzy_mln::evidence::Database;
use fuzzy_mln::grounding::{Compiled, GroundingError, GroundingOptions, Mode, SimilarityTable};
use fuzzy_mln::inference::{
    exact, gibbs, heatmap_dot, resolve_targets, sense_posterior, spread_posterior, GibbsOptions,
    InferenceError, MarginalResult, Method, DEFAULT_CAP,
};
use fuzzy_mln::learning::{train, LearningError};
use fuzzy_mln::taxonomy::Taxonomy;
use fuzzy_mln::{GroundMrf, Mln, TrainConfig};

#[derive(Parser)]
#[command(
    name = "fuzzymln",
    version,
    about = "Markov logic networks with taxonomy-based fuzzy similarity"
)]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Wu-Palmer similarity of two taxonomy concepts.
    Sim {
        taxonomy: PathBuf,
        a: String,
        b: String,
    },
    /// Ground a model against a database and summarize the network.
    Ground {
        mln: PathBuf,
        db: PathBuf,
        taxonomy: PathBuf,
        #[command(flatten)]
        net: NetworkArgs,
        /// Print one line per ground formula: weight, formula, pinned values.
        #[arg(long)]
        dump_mrf: bool,
    },
    /// Marginal probabilities of query atoms.
    Infer(InferArgs),
    /// Fit formula weights to training databases.
    Learn(LearnArgs),
    /// FOL versus fuzzy word sense disambiguation with inverse k-fold splits.
    Eval(EvalArgs),
}

#[derive(Args)]
struct NetworkArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Fuzzy)]
    mode: ModeArg,
    /// Closed-world predicates, comma separated.
    #[arg(long, value_delimiter = ',')]
    cw: Vec<String>,
    /// Pinned similarities (`sense concept value` per line), used before the taxonomy.
    #[arg(long)]
    sims: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Fol,
    Fuzzy,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Fol => Mode::Fol,
            ModeArg::Fuzzy => Mode::Fuzzy,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exact,
    Gibbs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args)]
struct InferArgs {
    mln: PathBuf,
    db: PathBuf,
    taxonomy: PathBuf,
    /// Query atoms; lowercase arguments are variables matching any constant.
    #[arg(required = true)]
    query: Vec<String>,
    #[command(flatten)]
    net: NetworkArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Exact)]
    method: MethodArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50_000)]
    samples: usize,
    #[arg(long, default_value_t = 5_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    /// Largest connected component enumerated exactly.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Word constant whose sense posterior is reported.
    #[arg(long)]
    word: Option<String>,
    /// Write a taxonomy heatmap of the word's sense posterior.
    #[arg(long, requires = "word")]
    dot: Option<PathBuf>,
    /// Score every taxonomy node for the word instead of only its candidates (experimental).
    #[arg(long, requires = "word")]
    spread: bool,
    #[arg(long, default_value = "instance_of")]
    sense_predicate: String,
}

#[derive(Args)]
struct LearnArgs {
    /// Model whose soft weights are fitted; `+var` templates are expanded first.
    mln: PathBuf,
    #[arg(required = true)]
    dbs: Vec<PathBuf>,
    #[arg(long, short)]
    taxonomy: PathBuf,
    #[command(flatten)]
    net: NetworkArgs,
    /// Fitted model (default: stdout).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Training log as TSV (default: stderr).
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long, default_value_t = 100.0)]
    sigma2: f64,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    #[arg(long, default_value_t = 0.0)]
    decay: f64,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus, one JSON example per line (default: generate the synthetic corpus).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Taxonomy (default: the bundled one).
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Template model (default: the bundled one).
    #[arg(long)]
    template: Option<PathBuf>,
    /// Splits as train/test block counts, e.g. `1/9,5/5` (default: all nine).
    #[arg(long, value_delimiter = ',')]
    k: Vec<String>,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [ModeArg::Fol, ModeArg::Fuzzy])]
    modes: Vec<ModeArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = EVAL_MAX_ITERATIONS)]
    max_iterations: usize,
    #[arg(long, default_value_t = 100.0)]
    sigma2: f64,
    /// Pick the MAP candidate instead of the most probable one.
    #[arg(long)]
    map: bool,
    /// Per-fold results as TSV.
    #[arg(long)]
    detail: Option<PathBuf>,
    /// Also write the corpus used.
    #[arg(long)]
    write_corpus: Option<PathBuf>,
}

/// A failure caused by the inputs rather than by the computation.
#[derive(Debug)]
struct InputError(anyhow::Error);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:#}", self.0)
    }
}

impl std::error::Error for InputError {}

fn input(e: impl Into<anyhow::Error>) -> anyhow::Error {
    InputError(e.into()).into()
}

fn grounding_input(e: &GroundingError) -> bool {
    !matches!(e, GroundingError::HardUnsatisfiable(_))
}

fn inference_input(e: &InferenceError) -> bool {
    match e {
        InferenceError::Grounding(g) => grounding_input(g),
        InferenceError::PinnedTarget(_)
        | InferenceError::UnknownAtom(_)
        | InferenceError::NoMatch(_)
        | InferenceError::Pattern { .. }
        | InferenceError::UnknownWord(_) => true,
        _ => false,
    }
}

fn learning_input(e: &LearningError) -> bool {
    match e {
        LearningError::Config(_) | LearningError::Unobservable { .. } => true,
        LearningError::Grounding(g) => grounding_input(g),
        LearningError::Inference(i) => inference_input(i),
        _ => false,
    }
}

fn eval_input(e: &EvalError) -> bool {
    match e {
        EvalError::Grounding(g) => grounding_input(g),
        EvalError::Inference(i) => inference_input(i),
        EvalError::Learning(l) => learning_input(l),
        EvalError::KeyMismatch => false,
        _ => true,
    }
}

/// Exit code 2 for bad inputs, 1 for failures of the computation itself.
fn is_input_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<InputError>()
            || c.downcast_ref::<GroundingError>()
                .is_some_and(grounding_input)
            || c.downcast_ref::<InferenceError>()
                .is_some_and(inference_input)
            || c.downcast_ref::<LearningError>()
                .is_some_and(learning_input)
            || c.downcast_ref::<EvalError>().is_some_and(eval_input)
    })
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)?;
    Ok(BufReader::new(f))
}

fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    Taxonomy::load(open(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

fn load_mln(path: &Path) -> Result<Mln> {
    Mln::parse(open(path)?)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

fn load_db(path: &Path, m: &Mln) -> Result<Database> {
    Database::parse(open(path)?, m)
        .with_context(|| format!("{}", path.display()))
        .map_err(input)
}

fn load_sims<'a>(path: Option<&Path>, taxonomy: &'a Taxonomy) -> Result<SimilarityTable<'a, f64>> {
    let table = match path {
        Some(p) => SimilarityTable::parse(open(p)?)
            .with_context(|| format!("{}", p.display()))
            .map_err(input)?,
        None => SimilarityTable::new(),
    };
    Ok(table.with_fallback(taxonomy))
}

fn options(net: &NetworkArgs) -> GroundingOptions {
    GroundingOptions::new(net.mode.into()).closed(net.cw.iter().map(|s| s.trim().to_string()))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn cmd_sim(taxonomy: &Path, a: &str, b: &str) -> Result<()> {
    let t = load_taxonomy(taxonomy)?;
    let v: f64 = t.similarity(a, b).map_err(input)?;
    println!("{v:?}");
    Ok(())
}

fn cmd_ground(mln: &Path, db: &Path, taxonomy: &Path, net: &NetworkArgs, dump: bool) -> Result<()> {
    let m = load_mln(mln)?;
    let db = load_db(db, &m)?;
    let t = load_taxonomy(taxonomy)?;
    let sims = load_sims(net.sims.as_deref(), &t)?;
    let g = Compiled::new(&m, &options(net))?.ground(&db, &sims)?;
    if dump {
        print!("{}", g.dump());
        return Ok(());
    }
    let largest = g.components().iter().map(Vec::len).max().unwrap_or(0);
    println!("atoms\t{}", g.atoms().len());
    println!("free\t{}", g.num_free());
    println!("groundings\t{}", g.num_groundings());
    println!("factors\t{}", g.factors().len());
    println!("components\t{}", g.components().len());
    println!("largest_component\t{largest}");
    Ok(())
}

fn cmd_infer(a: &InferArgs) -> Result<()> {
    let m = load_mln(&a.mln)?;
    let db = load_db(&a.db, &m)?;
    let t = load_taxonomy(&a.taxonomy)?;
    let sims = load_sims(a.net.sims.as_deref(), &t)?;
    let opts = options(&a.net);
    let g = Compiled::new(&m, &opts)?.ground(&db, &sims)?;
    let mut targets = Vec::new();
    for q in &a.query {
        targets.extend(resolve_targets(&g, q)?);
    }
    let query = a.query.join(", ");
    let weights = g.soft_weights();
    let marginals = posterior_marginals(&g, &weights, a)?;
    let mut result = match a.method {
        MethodArg::Exact => MarginalResult::new(query, Method::Exact, &g, &targets, &marginals),
        MethodArg::Gibbs => {
            let mut r = MarginalResult::new(query, Method::Gibbs, &g, &targets, &marginals);
            r.seed = Some(a.seed);
            r.samples = Some(a.samples);
            r
        }
    };
    let senses = match &a.word {
        Some(word) if a.spread => Some(spread_posterior(
            &m,
            &db,
            &t,
            &opts,
            &a.sense_predicate,
            word,
            a.cap,
        )?),
        Some(word) => Some(sense_posterior(&g, &marginals, &a.sense_predicate, word)?),
        None => None,
    };
    if let (Some(path), Some(scores)) = (&a.dot, &senses) {
        fs::write(path, heatmap_dot(&t, scores))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    result.marginals.sort_by(|x, y| x.atom.cmp(&y.atom));
    print!("{}", render(&result, senses.as_deref(), a.format));
    Ok(())
}

/// Marginals of every free atom under the chosen method.
fn posterior_marginals(g: &GroundMrf, weights: &[f64], a: &InferArgs) -> Result<Vec<f64>> {
    Ok(match a.method {
        MethodArg::Exact => exact(g, weights, a.cap)?.marginals,
        MethodArg::Gibbs => {
            let gopts = GibbsOptions {
                samples: a.samples,
                burn_in: a.burn_in,
                seed: a.seed,
                chains: a.chains,
                ..Default::default()
            };
            gibbs(g, weights, &gopts)?.marginals
        }
    })
}

fn render(
    result: &MarginalResult<f64>,
    senses: Option<&[(String, f64)]>,
    format: Format,
) -> String {
    match format {
        Format::Json => {
            let mut v = serde_json::to_value(result).expect("marginals serialize");
            if let Some(s) = senses {
                v["senses"] = s
                    .iter()
                    .map(|(sense, p)| serde_json::json!({"sense": sense, "p": p}))
                    .collect();
            }
            serde_json::to_string_pretty(&v).expect("json") + "\n"
        }
        Format::Tsv => {
            let mut out = result.to_tsv();
            if let Some(s) = senses {
                out.push_str("\nsense\tp\n");
                for (sense, p) in s {
                    out.push_str(&format!("{sense}\t{p}\n"));
                }
            }
            out
        }
    }
}

fn cmd_learn(a: &LearnArgs) -> Result<()> {
    let template = load_mln(&a.mln)?;
    let dbs = a
        .dbs
        .iter()
        .map(|p| load_db(p, &template))
        .collect::<Result<Vec<_>>>()?;
    let t = load_taxonomy(&a.taxonomy)?;
    let sims = load_sims(a.net.sims.as_deref(), &t)?;
    let cfg = TrainConfig {
        rate: a.rate,
        decay: a.decay,
        max_iterations: a.max_iterations,
        tolerance: a.tolerance,
        sigma2: a.sigma2,
        cap: a.cap,
        ..Default::default()
    };
    cfg.validate().map_err(input)?;
    let m = template
        .collect_domains(&dbs)
        .and_then(|m| m.expand_templates())
        .map_err(input)?;
    log::info!(
        "training {} formulas on {} databases",
        m.formulas.len(),
        dbs.len()
    );
    let (fitted, result) = train(&m, &dbs, &sims, &options(&a.net), &cfg)?;
    log::info!(
        "{:?} after {} iterations",
        result.status,
        result.trace.len() - 1
    );
    write_output(a.out.as_deref(), &fitted.to_string())?;
    match &a.trace {
        Some(p) => {
            fs::write(p, result.trace_tsv()).with_context(|| format!("writing {}", p.display()))?
        }
        None => eprint!("{}", result.trace_tsv()),
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let t = match &a.taxonomy {
        Some(p) => load_taxonomy(p)?,
        None => default_taxonomy(),
    };
    let template = match &a.template {
        Some(p) => load_mln(p)?,
        None => Mln::parse_str(DEFAULT_TEMPLATE).expect("bundled template parses"),
    };
    let corpus = match &a.corpus {
        Some(p) => read_corpus(open(p)?)
            .with_context(|| format!("{}", p.display()))
            .map_err(input)?,
        None => generate_corpus(&t, &default_generator_config(), a.seed).map_err(input)?,
    };
    let splits = if a.k.is_empty() {
        SplitSpec::all()
    } else {
        a.k.iter()
            .map(|s| s.trim().parse::<SplitSpec>())
            .collect::<Result<_, _>>()
            .map_err(input)?
    };
    if let Some(p) = &a.write_corpus {
        let f = File::create(p).with_context(|| format!("writing {}", p.display()))?;
        write_corpus(std::io::BufWriter::new(f), &corpus)?;
    }
    let mut cfg = ExperimentConfig {
        splits,
        modes: a.modes.iter().map(|&m| m.into()).collect(),
        seed: a.seed,
        prediction: if a.map {
            Prediction::Map
        } else {
            Prediction::Marginal
        },
        ..Default::default()
    };
    cfg.train.max_iterations = a.max_iterations;
    cfg.train.sigma2 = a.sigma2;
    cfg.train.validate().map_err(input)?;
    let result = run_experiment(&corpus, &t, &template, &cfg)?;
    print!("{}", result.to_tsv());
    if let Some(p) = &a.detail {
        fs::write(p, result.detail_tsv()).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .map_err(|e| anyhow!("thread pool: {e}"))?;
    }
    match &cli.command {
        Command::Sim { taxonomy, a, b } => cmd_sim(taxonomy, a, b),
        Command::Ground {
            mln,
            db,
            taxonomy,
            net,
            dump_mrf,
        } => cmd_ground(mln, db, taxonomy, net, *dump_mrf),
        Command::Infer(a) => cmd_infer(a),
        Command::Learn(a) => cmd_learn(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FUZZYMLN_LOG", "warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_input_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
