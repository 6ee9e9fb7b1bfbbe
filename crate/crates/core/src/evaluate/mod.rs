//! Held-out inference, model comparison across K, feature export and an
//! enumeration oracle for tests.

mod oracle;

pub use oracle::brute_force_marginal;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::gibbs::{direct_sample_assignments, direct_sample_scores, run_chain, ChainConfig, Sampler};
use crate::mathfn::{gamma_log_density, ln_gamma, log_sum_exp, Rng};
use crate::model::{
    cgp_zero_spike_probability, dirichlet_mean, loglik_cgp_joint, loglik_dm_full, loglik_gp_joint,
    loglik_grouped, posterior_mean_scores, Family, ModelParams, Score,
};
use crate::parallel::Pool;
use crate::variational::{fit_variational, infer_variational, VariationalConfig, VariationalState};

/// Exported feature values below this are treated as absent.
pub const FEATURE_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferMethod {
    Variational,
    Gibbs,
}

impl fmt::Display for InferMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InferMethod::Variational => "variational",
            InferMethod::Gibbs => "gibbs",
        })
    }
}

impl FromStr for InferMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "variational" => Ok(InferMethod::Variational),
            "gibbs" => Ok(InferMethod::Gibbs),
            _ => Err(Error::Validation(format!("unknown inference method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InferConfig {
    pub method: InferMethod,
    /// Variational iteration cap and relative tolerance.
    pub max_iter: usize,
    pub tol: f64,
    /// Per-document chain length for the Gibbs estimate.
    pub burn_in: usize,
    pub samples: usize,
    pub seed: u64,
}

impl Default for InferConfig {
    fn default() -> Self {
        InferConfig {
            method: InferMethod::Variational,
            max_iter: 1000,
            tol: 1e-10,
            burn_in: 100,
            samples: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    /// Posterior mean scores.
    pub scores: Vec<f64>,
    /// Variational bound, or the Gibbs estimate of `ln p(w | Θ)`.
    pub log_prob: f64,
    pub method: InferMethod,
}

/// Scores and `ln p(doc | Θ)` for a document under frozen parameters.
pub fn infer_document(doc: &Document, params: &ModelParams, config: &InferConfig) -> Result<Inference> {
    infer_with_rng(doc, params, config, &mut Rng::new(config.seed))
}

fn infer_with_rng(doc: &Document, params: &ModelParams, config: &InferConfig, rng: &mut Rng) -> Result<Inference> {
    params.check_doc(doc)?;
    match config.method {
        InferMethod::Variational => {
            let s = infer_variational(doc, params, config.max_iter, config.tol)?;
            Ok(Inference {
                scores: s.mean_scores(),
                log_prob: s.bound,
                method: InferMethod::Variational,
            })
        }
        InferMethod::Gibbs => chib_estimate(doc, params, config, rng),
    }
}

/// Every document of `corpus`, document `i` using random stream `i + 1`.
pub fn infer_corpus(corpus: &Corpus, params: &ModelParams, config: &InferConfig, threads: usize) -> Result<Vec<Inference>> {
    let pool = Pool::new(threads)?;
    let mut slots = vec![(); corpus.num_docs()];
    pool.map(corpus.docs(), &mut slots, |i, d, _| {
        infer_with_rng(d, params, config, &mut Rng::with_stream(config.seed, i as u64 + 1))
    })
}

fn dirichlet_log_density(m: &[f64], a: &[f64]) -> Result<f64> {
    let mut s = ln_gamma(a.iter().sum())?;
    for (&x, &ak) in m.iter().zip(a) {
        s += (ak - 1.0) * x.ln() - ln_gamma(ak)?;
    }
    Ok(s)
}

/// Chib's identity `ln p(w) = ln p(w, s*) − ln p(s* | w)` at the posterior
/// mean `s*`, with the ordinate averaged over a per-document direct chain
/// (scores depend on `V` only through `c`, so the average is exact in the limit).
fn chib_estimate(doc: &Document, p: &ModelParams, config: &InferConfig, rng: &mut Rng) -> Result<Inference> {
    if config.samples == 0 {
        return Err(Error::Validation("gibbs inference needs samples ≥ 1".into()));
    }
    let k = p.k;
    let start = match p.family {
        Family::Dm => vec![1.0 / k as f64; k],
        _ => vec![1.0; k],
    };
    let mut c = direct_sample_assignments(doc, &start, p, rng)?.component_totals();
    let mut kept = Vec::with_capacity(config.samples);
    for it in 0..config.burn_in + config.samples {
        let s: Vec<f64> = direct_sample_scores(&c, p, rng)?.into_iter().map(Score::value).collect();
        c = direct_sample_assignments(doc, &s, p, rng)?.component_totals();
        if it >= config.burn_in {
            kept.push(c.clone());
        }
    }
    let mut mean = vec![0.0; k];
    for c in &kept {
        let s = match p.family {
            Family::Dm => dirichlet_mean(c, &p.alpha),
            _ => posterior_mean_scores(c, p)?,
        };
        for (a, x) in mean.iter_mut().zip(s) {
            *a += x / kept.len() as f64;
        }
    }
    let joint = match p.family {
        Family::Gp => loglik_gp_joint(doc, &mean, p)?,
        Family::Cgp => {
            let slab: Vec<Score> = mean.iter().map(|&x| Score::Slab(x)).collect();
            loglik_cgp_joint(doc, &slab, p)?
        }
        Family::Dm if p.groups.is_some() => loglik_grouped(doc, &mean, p)?,
        Family::Dm => loglik_dm_full(doc, &mean, p)?,
    };
    let mut ordinates = Vec::with_capacity(kept.len());
    for c in &kept {
        ordinates.push(match p.family {
            Family::Dm => {
                let a: Vec<f64> = c.iter().zip(&p.alpha).map(|(&n, a)| n as f64 + a).collect();
                dirichlet_log_density(&mean, &a)?
            }
            _ => (0..k)
                .map(|j| {
                    let (a, b) = (p.alpha[j], 1.0 + p.beta[j]);
                    let g = gamma_log_density(mean[j], c[j] as f64 + a, b);
                    if p.family == Family::Cgp && c[j] == 0 {
                        g + (1.0 - cgp_zero_spike_probability(p.rho[j], a, p.beta[j])).ln()
                    } else {
                        g
                    }
                })
                .sum(),
        });
    }
    let ordinate = log_sum_exp(&ordinates) - (kept.len() as f64).ln();
    Ok(Inference {
        scores: mean,
        log_prob: joint - ordinate,
        method: InferMethod::Gibbs,
    })
}

/// Training engine used by [`compare_k`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Variational,
    Gibbs(Sampler),
}

impl Engine {
    fn infer_method(self) -> InferMethod {
        match self {
            Engine::Variational => InferMethod::Variational,
            Engine::Gibbs(_) => InferMethod::Gibbs,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareConfig {
    pub engine: Engine,
    pub family: Family,
    /// Scalar priors broadcast to every component and word.
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub seed: u64,
    /// Fraction of documents held out for evaluation; 0 for none.
    pub held_out: f64,
    pub variational: VariationalConfig,
    pub chain: ChainConfig,
    pub infer: InferConfig,
    pub threads: usize,
}

impl CompareConfig {
    pub fn new(engine: Engine, family: Family) -> Self {
        CompareConfig {
            engine,
            family,
            alpha: 0.1,
            beta: 1.0,
            rho: 0.0,
            gamma: 0.5,
            seed: 0,
            held_out: 0.0,
            variational: VariationalConfig::default(),
            chain: ChainConfig::default(),
            infer: InferConfig::default(),
            threads: 1,
        }
    }

    /// Initial parameters for `k` components, Θ randomized from `seed`.
    pub fn initial_params(&self, corpus: &Corpus, k: usize) -> Result<ModelParams> {
        let j = corpus.num_words();
        let (beta, rho) = match self.family {
            Family::Dm => (vec![], vec![]),
            Family::Gp => (vec![self.beta; k], vec![]),
            Family::Cgp => (vec![self.beta; k], vec![self.rho; k]),
        };
        let mut p = ModelParams::new(
            self.family,
            j,
            vec![self.alpha; k],
            beta,
            rho,
            vec![self.gamma; j],
            corpus.groups().cloned(),
        )?;
        p.randomize_theta(&corpus.word_totals(), &mut Rng::new(self.seed));
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub k: usize,
    /// Negative log-probability of the training documents, in nats.
    pub nll: f64,
    /// Same for the held-out documents, when a split was requested.
    pub held_out_nll: Option<f64>,
}

pub fn to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// Documents held out under `fraction`, chosen by a seeded shuffle.
pub fn held_out_mask(num_docs: usize, fraction: f64, seed: u64) -> Result<Vec<bool>> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::Validation(format!("held-out fraction {fraction} not in [0, 1)")));
    }
    let mut order: Vec<usize> = (0..num_docs).collect();
    let mut rng = Rng::with_stream(seed, u64::MAX);
    for i in (1..num_docs).rev() {
        order.swap(i, rng.below(i + 1));
    }
    let n = (fraction * num_docs as f64).round() as usize;
    let mut mask = vec![false; num_docs];
    for &i in &order[..n] {
        mask[i] = true;
    }
    Ok(mask)
}

/// Fit every `k` with the same seed and configuration and report the
/// negative log-probability: the negated bound for the variational engine,
/// the negated per-document Gibbs estimate under the posterior mean Θ otherwise.
pub fn compare_k(corpus: &Corpus, k_list: &[usize], config: &CompareConfig) -> Result<Vec<CompareRow>> {
    if k_list.is_empty() {
        return Err(Error::Validation("compare_k needs at least one K".into()));
    }
    if let Some(&k) = k_list.iter().find(|&&k| k == 0) {
        return Err(Error::Validation(format!("K = {k} is not allowed")));
    }
    let (train, test) = if config.held_out > 0.0 {
        let mask = held_out_mask(corpus.num_docs(), config.held_out, config.seed)?;
        let (a, b) = corpus.partition(&mask);
        (a, Some(b))
    } else {
        (corpus.clone(), None)
    };
    let infer = InferConfig {
        method: config.engine.infer_method(),
        seed: config.seed,
        ..config.infer.clone()
    };
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let init = config.initial_params(&train, k)?;
        let (params, nll) = match config.engine {
            Engine::Variational => {
                let fit = fit_variational(&train, &init, &config.variational, None)?;
                (fit.params, -fit.report.final_bound)
            }
            Engine::Gibbs(sampler) => {
                let chain = ChainConfig {
                    sampler,
                    seed: config.seed,
                    threads: config.threads,
                    ..config.chain.clone()
                };
                let summary = run_chain(&train, &init, &chain)?;
                let est = infer_corpus(&train, &summary.params, &infer, config.threads)?;
                let nll = -est.iter().map(|e| e.log_prob).sum::<f64>();
                (summary.params, nll)
            }
        };
        let held_out_nll = match &test {
            Some(t) => {
                let est = infer_corpus(t, &params, &infer, config.threads)?;
                Some(-est.iter().map(|e| e.log_prob).sum::<f64>())
            }
            None => None,
        };
        rows.push(CompareRow { k, nll, held_out_nll });
    }
    Ok(rows)
}

/// TSV with nats and bits columns; held-out columns are empty without a split.
pub fn write_comparison<W: Write>(rows: &[CompareRow], out: &mut W, header: &str) -> std::io::Result<()> {
    if !header.is_empty() {
        writeln!(out, "{header}")?;
    }
    writeln!(out, "k\tnll_nats\tnll_bits\theldout_nll_nats\theldout_nll_bits")?;
    for r in rows {
        let (hn, hb) = match r.held_out_nll {
            Some(h) => (h.to_string(), to_bits(h).to_string()),
            None => (String::new(), String::new()),
        };
        writeln!(out, "{}\t{}\t{}\t{hn}\t{hb}", r.k, r.nll, to_bits(r.nll))?;
    }
    Ok(())
}

/// Expected component word counts `a_k − α_k` from variational states.
pub fn component_counts(corpus: &Corpus, params: &ModelParams, states: &[VariationalState]) -> Result<Vec<Vec<f64>>> {
    if states.len() != corpus.num_docs() {
        return Err(Error::Dimension(format!(
            "{} states for {} documents",
            states.len(),
            corpus.num_docs()
        )));
    }
    states
        .iter()
        .map(|s| {
            if s.a.len() != params.k {
                return Err(Error::Dimension(format!("state has {} components, model has {}", s.a.len(), params.k)));
            }
            Ok(s.a.iter().zip(&params.alpha).map(|(a, al)| a - al).collect())
        })
        .collect()
}

/// Sparse per-document features: `(component, count)` with counts below
/// [`FEATURE_THRESHOLD`] dropped.
pub fn export_features(counts: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
    counts
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, &x)| x >= FEATURE_THRESHOLD)
                .map(|(k, &x)| (k, x))
                .collect()
        })
        .collect()
}

/// Features in the sparse docword layout with real-valued counts (ids 1-based).
pub fn write_features<W: Write>(features: &[Vec<(usize, f64)>], k: usize, out: &mut W) -> std::io::Result<()> {
    let nnz: usize = features.iter().map(Vec::len).sum();
    writeln!(out, "{}\n{k}\n{nnz}", features.len())?;
    for (i, row) in features.iter().enumerate() {
        for &(c, x) in row {
            writeln!(out, "{} {} {x}", i + 1, c + 1)?;
        }
    }
    Ok(())
}
