//! Argument structs shared by the subcommands, and the checks that turn
//! them into library inputs.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use dca::corpus::{load_docword, load_group_file, load_vocab, Corpus};
use dca::gibbs::Sampler;
use dca::model::{Family, ModelParams};

use crate::{usage, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Gp,
    Cgp,
    Dm,
}

impl ModelArg {
    pub fn family(self) -> Family {
        match self {
            ModelArg::Gp => Family::Gp,
            ModelArg::Cgp => Family::Cgp,
            ModelArg::Dm => Family::Dm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Variational,
    /// Direct Gibbs: scores, latent counts and Θ all sampled.
    Gibbs,
    /// Collapsed Gibbs over token assignments.
    Collapsed,
    Nmf,
}

impl Algorithm {
    pub fn default_for(family: Family) -> Self {
        match family {
            Family::Dm => Algorithm::Variational,
            Family::Gp | Family::Cgp => Algorithm::Collapsed,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Variational => "variational",
            Algorithm::Gibbs => "gibbs",
            Algorithm::Collapsed => "collapsed",
            Algorithm::Nmf => "nmf",
        }
    }

    pub fn sampler(self) -> Option<Sampler> {
        match self {
            Algorithm::Gibbs => Some(Sampler::Direct),
            Algorithm::Collapsed => Some(Sampler::Collapsed),
            _ => None,
        }
    }

    /// Reject combinations the library cannot run.
    pub fn check(self, family: Family) -> CliResult {
        match (self, family) {
            (Algorithm::Variational, Family::Cgp) => {
                usage("--algorithm variational is not available for --model cgp; use gibbs or collapsed")
            }
            (Algorithm::Nmf, Family::Dm | Family::Cgp) => usage("--algorithm nmf requires --model gp"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus in docword format.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Vocabulary, one word per line.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Word groups, lines of `word_id group_id` (dm only).
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

impl CorpusArgs {
    pub fn load(&self, family: Option<Family>) -> CliResult<Corpus> {
        if self.groups.is_some() && family.is_some_and(|f| f != Family::Dm) {
            return usage("--groups requires --model dm");
        }
        let mut corpus = load_docword(&self.corpus)?;
        if let Some(v) = &self.vocab {
            corpus = corpus.with_vocab(load_vocab(v)?)?;
        }
        if let Some(g) = &self.groups {
            corpus = corpus.split_groups(&load_group_file(g)?)?;
        }
        Ok(corpus)
    }
}

#[derive(Debug, Args)]
pub struct PriorArgs {
    /// Component prior shape(s): one value or a comma-separated list of K [default: 0.1].
    #[arg(long, value_delimiter = ',')]
    pub alpha: Vec<f64>,
    /// Gamma rate(s), gp/cgp only [default: 0.01].
    #[arg(long, value_delimiter = ',')]
    pub beta: Vec<f64>,
    /// Spike probability(ies), cgp only [default: 0.1].
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Dirichlet prior on each Θ entry.
    #[arg(long, default_value_t = 0.5)]
    pub gamma: f64,
}

const DEFAULT_ALPHA: f64 = 0.1;
const DEFAULT_BETA: f64 = 0.01;
const DEFAULT_RHO: f64 = 0.1;

fn broadcast(flag: &str, values: &[f64], default: f64, k: usize) -> CliResult<Vec<f64>> {
    match values.len() {
        0 => Ok(vec![default; k]),
        1 => Ok(vec![values[0]; k]),
        n if n == k => Ok(values.to_vec()),
        n => usage(format!("--{flag} has {n} values; give one or K = {k}")),
    }
}

impl PriorArgs {
    pub fn check(&self, family: Family) -> CliResult {
        if !self.beta.is_empty() && family == Family::Dm {
            return usage("--beta applies to gp and cgp only");
        }
        if !self.rho.is_empty() && family != Family::Cgp {
            return usage("--rho applies to cgp only");
        }
        if self.alpha.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return usage("--alpha values must be positive");
        }
        if self.beta.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
            return usage("--beta values must be positive");
        }
        if self.rho.iter().any(|&r| !(0.0..1.0).contains(&r)) {
            return usage("--rho values must lie in [0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return usage("--gamma must be positive");
        }
        Ok(())
    }

    /// Uniform-Θ parameters for `k` components over `corpus`.
    pub fn build(&self, family: Family, k: usize, corpus: &Corpus) -> CliResult<ModelParams> {
        self.check(family)?;
        if k == 0 {
            return usage("--k must be at least 1");
        }
        let alpha = broadcast("alpha", &self.alpha, DEFAULT_ALPHA, k)?;
        let beta = match family {
            Family::Dm => vec![],
            _ => broadcast("beta", &self.beta, DEFAULT_BETA, k)?,
        };
        let rho = match family {
            Family::Cgp => broadcast("rho", &self.rho, DEFAULT_RHO, k)?,
            _ => vec![],
        };
        let j = corpus.num_words();
        Ok(ModelParams::new(
            family,
            j,
            alpha,
            beta,
            rho,
            vec![self.gamma; j],
            corpus.groups().cloned(),
        )?)
    }

    pub fn scalar(&self, family: Family) -> CliResult<(f64, f64, f64)> {
        self.check(family)?;
        let one = |flag: &str, v: &[f64], d: f64| match v {
            [] => Ok(d),
            [x] => Ok(*x),
            _ => usage(format!("--{flag} must be a single value with --k-sweep")),
        };
        Ok((
            one("alpha", &self.alpha, DEFAULT_ALPHA)?,
            one("beta", &self.beta, DEFAULT_BETA)?,
            one("rho", &self.rho, DEFAULT_RHO)?,
        ))
    }
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Gibbs cycles discarded before averaging [default: 200].
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Gibbs cycles kept [default: 800].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Keep every n-th cycle after burn-in [default: 1].
    #[arg(long)]
    pub thin: Option<usize>,
    /// Independent chains, merged after aligning components [default: 1].
    #[arg(long)]
    pub chains: Option<usize>,
}

impl ChainArgs {
    pub fn any(&self) -> bool {
        self.burn_in.is_some() || self.samples.is_some() || self.thin.is_some() || self.chains.is_some()
    }

    pub fn config(&self, sampler: Sampler, seed: u64, threads: usize) -> CliResult<dca::gibbs::ChainConfig> {
        let d = dca::gibbs::ChainConfig::default();
        let c = dca::gibbs::ChainConfig {
            burn_in: self.burn_in.unwrap_or(d.burn_in),
            samples: self.samples.unwrap_or(d.samples),
            thin: self.thin.unwrap_or(d.thin),
            seed,
            sampler,
            threads,
            ..d
        };
        if c.samples == 0 || c.thin == 0 {
            return usage("--samples and --thin must be at least 1");
        }
        Ok(c)
    }

    pub fn chains(&self) -> CliResult<usize> {
        match self.chains.unwrap_or(1) {
            0 => usage("--chains must be at least 1"),
            n => Ok(n),
        }
    }
}

/// First line of every tabular output.
pub fn header(family: Family, k: usize, seed: u64, extra: &str) -> String {
    let mut h = format!("# dca v1 family={family} k={k} seed={seed}");
    if !extra.is_empty() {
        h.push(' ');
        h.push_str(extra);
    }
    h
}

pub fn write_file(path: &Path, text: &str) -> CliResult {
    std::fs::write(path, text)
        .map_err(|e| CliError::Run(dca::Error::Io { context: format!("writing {}", path.display()), source: e }))
}

pub fn create_dir(path: &Path) -> CliResult {
    std::fs::create_dir_all(path)
        .map_err(|e| CliError::Run(dca::Error::Io { context: format!("creating {}", path.display()), source: e }))
}

/// Write `text` to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => write_file(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// `header`, a `doc<TAB>name_1..name_K` line, then one row per document.
pub fn score_table(header: &str, name: &str, rows: &[Vec<f64>]) -> String {
    let k = rows.first().map_or(0, Vec::len);
    let mut s = format!("{header}\ndoc");
    for c in 1..=k {
        s.push_str(&format!("\t{name}_{c}"));
    }
    s.push('\n');
    for (i, r) in rows.iter().enumerate() {
        s.push_str(&(i + 1).to_string());
        for x in r {
            s.push_str(&format!("\t{x}"));
        }
        s.push('\n');
    }
    s
}
