use std::collections::BTreeSet;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dca::corpus::Corpus;
use dca::evaluate::{compare_k, infer_corpus, write_comparison, CompareConfig, Engine, InferConfig, InferMethod};
use dca::model::{load_model, Family, ModelParams};
use dca::variational::{bound, load_states, VariationalConfig};

use crate::options::{emit, header, Algorithm, ChainArgs, CorpusArgs, ModelArg, PriorArgs};
use crate::{usage, CliResult};

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Variational,
    Gibbs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Fitted model; every document is scored under it.
    #[arg(long, conflicts_with = "k_sweep")]
    pub model_file: Option<PathBuf>,
    /// Stored variational states from `fit`; scores each document with its state.
    #[arg(long, requires = "model_file")]
    pub states: Option<PathBuf>,
    /// Per-document estimator [default: variational for gp/dm, gibbs for cgp].
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Kept cycles of the per-document Gibbs chain.
    #[arg(long, default_value_t = 1000)]
    pub infer_samples: usize,
    /// Fit each K in this list and report the negative log-probability.
    #[arg(long, value_delimiter = ',')]
    pub k_sweep: Vec<usize>,
    /// Model family for --k-sweep.
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    #[command(flatten)]
    pub priors: PriorArgs,
    /// Fraction of documents held out from fitting in --k-sweep.
    #[arg(long, default_value_t = 0.0)]
    pub held_out: f64,
    #[arg(long)]
    pub cycles: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Output file [default: stdout].
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(a: EvalArgs) -> CliResult {
    if a.threads == 0 {
        return usage("--threads must be at least 1");
    }
    if !a.k_sweep.is_empty() {
        sweep(&a)
    } else if let Some(path) = &a.model_file {
        score_documents(&a, path)
    } else {
        usage("eval needs --model-file or --k-sweep")
    }
}

fn check_vocabulary(corpus: &Corpus, p: &ModelParams) -> CliResult {
    let ids: BTreeSet<usize> = corpus
        .docs()
        .iter()
        .flat_map(|d| p.out_of_vocabulary(d))
        .map(|w| w + 1)
        .collect();
    if ids.is_empty() {
        Ok(())
    } else {
        Err(dca::Error::OutOfVocabulary { ids: ids.into_iter().collect() }.into())
    }
}

fn score_documents(a: &EvalArgs, model_path: &PathBuf) -> CliResult {
    if a.model.is_some() || a.algorithm.is_some() || a.held_out != 0.0 {
        return usage("--model, --algorithm and --held-out apply to --k-sweep only");
    }
    let p = load_model(model_path)?;
    let corpus = a.corpus.load(Some(p.family))?;
    check_vocabulary(&corpus, &p)?;
    let method = match a.method {
        Some(MethodArg::Variational) if p.family == Family::Cgp => {
            return usage("--method variational is not available for cgp models")
        }
        Some(MethodArg::Variational) => InferMethod::Variational,
        Some(MethodArg::Gibbs) => InferMethod::Gibbs,
        None if p.family == Family::Cgp => InferMethod::Gibbs,
        None => InferMethod::Variational,
    };
    let head = header(p.family, p.k, a.seed, &format!("method={method}"));
    let rows: Vec<(f64, Vec<f64>)> = match &a.states {
        Some(path) => {
            if method != InferMethod::Variational {
                return usage("--states requires the variational method");
            }
            let states = load_states(path, p.k, p.family == Family::Gp)?;
            if states.len() != corpus.num_docs() {
                return Err(dca::Error::Dimension(format!(
                    "{} states for {} documents",
                    states.len(),
                    corpus.num_docs()
                ))
                .into());
            }
            corpus
                .docs()
                .iter()
                .zip(&states)
                .map(|(d, s)| Ok((bound(d, &p, s)?, s.mean_scores())))
                .collect::<dca::Result<_>>()?
        }
        None => {
            let config = InferConfig {
                method,
                samples: a.infer_samples,
                seed: a.seed,
                ..InferConfig::default()
            };
            if config.samples == 0 {
                return usage("--infer-samples must be at least 1");
            }
            infer_corpus(&corpus, &p, &config, a.threads)?
                .into_iter()
                .map(|r| (r.log_prob, r.scores))
                .collect()
        }
    };
    let mut text = format!("{head}\ndoc\tlog_prob");
    for c in 1..=p.k {
        text.push_str(&format!("\tscore_{c}"));
    }
    text.push('\n');
    let mut total = 0.0;
    for (i, (lp, s)) in rows.iter().enumerate() {
        total += lp;
        text.push_str(&format!("{}\t{lp}", i + 1));
        for x in s {
            text.push_str(&format!("\t{x}"));
        }
        text.push('\n');
    }
    text.push_str(&format!("total\t{total}\n"));
    emit(a.out.as_deref(), &text)
}

fn sweep(a: &EvalArgs) -> CliResult {
    if a.states.is_some() || a.method.is_some() {
        return usage("--states and --method apply to --model-file scoring only");
    }
    let Some(model) = a.model else {
        return usage("--k-sweep needs --model");
    };
    let family = model.family();
    let algorithm = a.algorithm.unwrap_or(Algorithm::default_for(family));
    algorithm.check(family)?;
    let engine = match algorithm {
        Algorithm::Variational => Engine::Variational,
        Algorithm::Nmf => return usage("--k-sweep does not support --algorithm nmf"),
        other => Engine::Gibbs(other.sampler().expect("sampling algorithm")),
    };
    if matches!(engine, Engine::Gibbs(_)) && (a.cycles.is_some() || a.tol.is_some()) {
        return usage("--cycles and --tol apply to the variational engine");
    }
    if engine == Engine::Variational && a.chain.any() {
        return usage("--burn-in, --samples, --thin and --chains apply to gibbs and collapsed only");
    }
    if a.chain.chains.is_some() {
        return usage("--chains is not used by --k-sweep");
    }
    if a.k_sweep.contains(&0) {
        return usage("--k-sweep values must be at least 1");
    }
    if !(0.0..1.0).contains(&a.held_out) {
        return usage("--held-out must lie in [0, 1)");
    }
    let (alpha, beta, rho) = a.priors.scalar(family)?;
    let corpus = a.corpus.load(Some(family))?;
    let defaults = VariationalConfig::default();
    let mut config = CompareConfig::new(engine, family);
    config.alpha = alpha;
    config.beta = beta;
    config.rho = rho;
    config.gamma = a.priors.gamma;
    config.seed = a.seed;
    config.held_out = a.held_out;
    config.threads = a.threads;
    config.variational = VariationalConfig {
        max_cycles: a.cycles.unwrap_or(defaults.max_cycles),
        tol: a.tol.unwrap_or(defaults.tol),
        threads: a.threads,
    };
    if let Engine::Gibbs(s) = engine {
        config.chain = a.chain.config(s, a.seed, a.threads)?;
    }
    config.infer.samples = a.infer_samples;
    let rows = compare_k(&corpus, &a.k_sweep, &config)?;
    let ks: Vec<String> = a.k_sweep.iter().map(ToString::to_string).collect();
    let head = format!(
        "# dca v1 family={family} k={} seed={} algorithm={}",
        ks.join(","),
        a.seed,
        algorithm.name()
    );
    let mut buf = Vec::new();
    write_comparison(&rows, &mut buf, &head).expect("writing to memory");
    emit(a.out.as_deref(), &String::from_utf8(buf).expect("utf-8"))
}
