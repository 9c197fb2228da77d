use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use amicus_ip::config::RunConfig;
use amicus_ip::corpus::{generate_synthetic, load_corpus, save_corpus};
use amicus_ip::counterfactual::{
    amici_influence, best_brief_grid, decompose_ip, drop_amici_predict, roster, Keep, DEFAULT_GRID_FLOOR,
    DEFAULT_GRID_STEP,
};
use amicus_ip::predict::cross_validate;
use amicus_ip::topics::{corpus_documents, fit_lda, infer_corpus_mixtures};
use amicus_ip::{rng, sampler, Error, FitResult, Mixtures, ModelKind, Result, Side, TopicModel};

const AFTER_HELP: &str = "\
Defaults (overridable in the --config TOML file):
  lda.num_topics = 30, lda.alpha = 0.1, lda.beta = 0.001
  hyper.lambda = 1.0, hyper.rho = 0.5, hyper.sigma_kappa = 4.0, hyper.eta = 1.0, hyper.xi = 1.0
  sampler.gibbs_iters = 2000, sampler.mh_steps = 500, sampler.mh_burn_in = 250, sampler.mh_thin = 10
  predict.samples = 512, predict.folds = 5

Exit status: 0 on success, 2 on invalid input, 3 on a runtime or numeric failure.";

#[derive(Parser)]
#[command(name = "amicus-ip", version, about = "Ideal-point vote models with amicus-brief evidence", after_help = AFTER_HELP)]
struct Cli {
    /// Run configuration (TOML); omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice; overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Log progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration (defaults merged with --config) as TOML.
    ShowConfig,
    /// Generate a synthetic corpus and its ground truth.
    Synth {
        /// Output directory; receives corpus.jsonl and truth.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit LDA over every merits and amicus document.
    LdaFit {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Topic mixtures for every case, folding in documents the model has not seen.
    LdaInfer {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Re-infer documents the model was trained on as well.
        #[arg(long)]
        refold: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate ideal points and case parameters.
    Fit {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        mixtures: Option<PathBuf>,
        /// Model kind [default: from config, random_utility].
        #[arg(long)]
        kind: Option<ModelKind>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated pairwise partition accuracy against both baselines.
    EvalCv {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Number of folds [default: 5].
        #[arg(long)]
        folds: Option<usize>,
        /// Output directory; receives cv.csv (fold,model,accuracy) and cv_summary.json.
        #[arg(long)]
        out: PathBuf,
    },
    /// Predict a case's vote partition as JSON.
    Predict {
        #[command(flatten)]
        case: CaseArgs,
        /// Amicus sides to keep.
        #[arg(long, value_enum, default_value_t = KeepArg::All)]
        keep: KeepArg,
        /// Case-parameter samples [default: 512].
        #[arg(long)]
        samples: Option<usize>,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-justice logits with amicus terms zeroed (CSV: justice,name,issues_only,with_pet_amici,with_resp_amici,full).
    Decompose {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// A filer's utility curve between two topics (CSV: proportion_a,expected_votes,cost,net).
    BestBrief {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, value_enum)]
        side: SideArg,
        #[arg(long)]
        topic_a: usize,
        #[arg(long)]
        topic_b: usize,
        #[arg(long, default_value_t = DEFAULT_GRID_STEP)]
        step: f64,
        /// Proportion given to inactive topics before renormalizing.
        #[arg(long, default_value_t = DEFAULT_GRID_FLOOR)]
        floor: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-justice RMS log-likelihood difference between two fits (CSV: justice,name,rms,num_votes).
    Influence {
        #[arg(long)]
        fit_issues: PathBuf,
        #[arg(long)]
        fit_utility: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        mixtures: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct CaseArgs {
    #[arg(long)]
    fit: Option<PathBuf>,
    #[arg(long)]
    mixtures: Option<PathBuf>,
    #[arg(long)]
    case_id: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum KeepArg {
    All,
    None,
    Pet,
    Resp,
}

impl From<KeepArg> for Keep {
    fn from(k: KeepArg) -> Self {
        match k {
            KeepArg::All => Keep::All,
            KeepArg::None => Keep::None,
            KeepArg::Pet => Keep::PetitionerOnly,
            KeepArg::Resp => Keep::RespondentOnly,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Petitioner,
    Respondent,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::Petitioner => Side::Petitioner,
            SideArg::Respondent => Side::Respondent,
        }
    }
}

fn path_or(flag: Option<PathBuf>, fallback: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Error::invalid(format!("no {what} path given on the command line or in the config")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn case_inputs(args: &CaseArgs, cfg: &RunConfig) -> Result<(FitResult, amicus_ip::topics::CaseMixtures)> {
    let fit = FitResult::load(path_or(args.fit.clone(), &cfg.paths.fit, "fit")?)?;
    let mixtures = Mixtures::load(path_or(args.mixtures.clone(), &cfg.paths.mixtures, "mixtures")?)?;
    let mix = mixtures
        .get(&args.case_id)
        .cloned()
        .ok_or_else(|| Error::invalid(format!("case {:?} not in mixtures", args.case_id)))?;
    Ok((fit, mix))
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    }
    let paths = cfg.paths.clone();

    match cli.command {
        Command::ShowConfig => print!("{}", cfg.to_toml()),
        Command::Synth { out } => {
            let (corpus, truth) = generate_synthetic(&cfg.synth, cfg.seed)?;
            create_dir(&out)?;
            save_corpus(&corpus, out.join("corpus.jsonl"))?;
            truth.save(out.join("truth.json"))?;
        }
        Command::LdaFit { corpus, out } => {
            let corpus = load_corpus(path_or(corpus, &paths.corpus, "corpus")?)?;
            let docs = corpus_documents(&corpus);
            let model = fit_lda(&docs, corpus.vocabulary.len(), &cfg.lda, cfg.seed)?;
            model.save(out)?;
        }
        Command::LdaInfer { model, corpus, refold, out } => {
            let model = TopicModel::load(path_or(model, &paths.topics, "topic model")?)?;
            let corpus = load_corpus(path_or(corpus, &paths.corpus, "corpus")?)?;
            infer_corpus_mixtures(&model, &corpus, &cfg.lda, cfg.seed, refold)?.save(out)?;
        }
        Command::Fit { corpus, mixtures, kind, out } => {
            let corpus = load_corpus(path_or(corpus, &paths.corpus, "corpus")?)?;
            let mixtures = Mixtures::load(path_or(mixtures, &paths.mixtures, "mixtures")?)?;
            let kind = kind.unwrap_or(cfg.kind);
            sampler::fit(&corpus, &mixtures, kind, &cfg.hyper, &cfg.sampler_config())?.save(out)?;
        }
        Command::EvalCv { corpus, folds, out } => {
            let corpus = load_corpus(path_or(corpus, &paths.corpus, "corpus")?)?;
            let mut cv = cfg.cv_config();
            if let Some(f) = folds {
                cv.folds = f;
            }
            let report = cross_validate(&corpus, &cv)?;
            create_dir(&out)?;
            report.write_csv(out.join("cv.csv"))?;
            report.write_summary(out.join("cv_summary.json"))?;
            for m in &report.models {
                println!("{:<20} {:.4} ± {:.4}", m.model, m.mean, m.stdev);
            }
        }
        Command::Predict { case, keep, samples, out } => {
            let (fit, mix) = case_inputs(&case, &cfg)?;
            let samples = samples.unwrap_or(cfg.predict.samples);
            let mut r = rng::derived(cfg.seed, 0, 0);
            let pred = drop_amici_predict(&fit, &mix, &roster(&fit), keep.into(), samples, &mut r)?;
            let mut text = serde_json::to_string_pretty(&pred)?;
            text.push('\n');
            match out {
                Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?,
                None => print!("{text}"),
            }
        }
        Command::Decompose { case, out } => {
            let (fit, mix) = case_inputs(&case, &cfg)?;
            decompose_ip(&fit, &mix)?.write_csv(out)?;
        }
        Command::BestBrief { case, side, topic_a, topic_b, step, floor, out } => {
            let (fit, mix) = case_inputs(&case, &cfg)?;
            let curve = best_brief_grid(&fit, &case.case_id, &mix.theta, side.into(), topic_a, topic_b, step, floor)?;
            curve.write_csv(out)?;
            let best = curve.argmax_point();
            println!(
                "best proportion {:.1}: {:.3} expected votes at cost {:.3}",
                best.proportion_a, best.expected_votes, best.cost
            );
        }
        Command::Influence { fit_issues, fit_utility, corpus, mixtures, out } => {
            let issues = FitResult::load(fit_issues)?;
            let utility = FitResult::load(fit_utility)?;
            let corpus = load_corpus(path_or(corpus, &paths.corpus, "corpus")?)?;
            let mixtures = Mixtures::load(path_or(mixtures, &paths.mixtures, "mixtures")?)?;
            amici_influence(&issues, &utility, &corpus, &mixtures)?.write_csv(out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() || matches!(e, Error::Io { .. }) {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
