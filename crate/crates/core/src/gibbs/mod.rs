//! Gibbs samplers: direct (scores, latent counts and Θ all sampled) and
//! collapsed (scores and Θ integrated out, token assignments sampled).

mod collapsed;
mod direct;

pub use collapsed::{collapsed_resample_token, CollapsedChain, CollapsedState};
#[cfg(test)]
use collapsed::token_weights;
pub use direct::{direct_sample_assignments, direct_sample_scores, direct_sample_theta, DirectChain};

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::mathfn::Rng;
use crate::model::{
    best_permutation, dirichlet_mean, permute_columns, posterior_mean_scores, Family, ModelParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Direct,
    Collapsed,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Direct => "direct",
            Sampler::Collapsed => "collapsed",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" | "gibbs" => Ok(Sampler::Direct),
            "collapsed" => Ok(Sampler::Collapsed),
            other => Err(Error::Validation(format!("unknown sampler {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub burn_in: usize,
    /// Number of kept cycles.
    pub samples: usize,
    /// Keep every `thin`-th cycle after burn-in.
    pub thin: usize,
    pub seed: u64,
    pub sampler: Sampler,
    /// Recount the collapsed tables every this many cycles (0 = never).
    pub audit_every: usize,
    /// Keep the Θ estimate of every kept cycle.
    pub record_theta: bool,
    /// Worker threads for the document loop of the direct sampler.
    pub threads: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            burn_in: 200,
            samples: 800,
            thin: 1,
            seed: 0,
            sampler: Sampler::Collapsed,
            audit_every: 50,
            record_theta: false,
            threads: 1,
        }
    }
}

impl ChainConfig {
    fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.thin == 0 {
            return Err(Error::Validation("chain needs samples ≥ 1 and thin ≥ 1".into()));
        }
        Ok(())
    }

    pub fn total_cycles(&self) -> usize {
        self.burn_in + self.samples * self.thin
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub cycle: usize,
    pub kept: bool,
    /// Log-probability of the data given the current latent sample; an
    /// estimate, not a bound.
    pub loglik: f64,
}

#[derive(Debug, Clone)]
pub struct ChainSummary {
    /// Posterior mean of Θ in `params.theta`; priors copied from the input.
    pub params: ModelParams,
    /// Posterior mean scores per document (`l` for GP/CGP, `m` for DM).
    pub scores: Vec<Vec<f64>>,
    /// Posterior mean component counts `c` per document.
    pub counts: Vec<Vec<f64>>,
    pub trace: Vec<TraceRow>,
    /// Per kept cycle Θ estimates, when requested.
    pub theta_samples: Vec<Vec<f64>>,
    pub kept: usize,
}

impl ChainSummary {
    /// Mean of the log-probability estimate over kept cycles.
    pub fn mean_kept_loglik(&self) -> f64 {
        let kept: Vec<f64> = self.trace.iter().filter(|r| r.kept).map(|r| r.loglik).collect();
        kept.iter().sum::<f64>() / kept.len().max(1) as f64
    }

    /// Tab-separated `cycle, loglik_estimate`.
    pub fn write_trace<W: Write>(&self, out: &mut W, header: &str) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(out, "{header}")?;
        }
        writeln!(out, "cycle\tloglik_estimate\tkept")?;
        for r in &self.trace {
            writeln!(out, "{}\t{}\t{}", r.cycle, r.loglik, u8::from(r.kept))?;
        }
        Ok(())
    }
}

/// Uniformly random token assignments summarized as per-document `c` and
/// `J × K` totals.
pub(crate) fn random_assignment_counts(corpus: &Corpus, k: usize, rng: &mut Rng) -> (Vec<Vec<u64>>, Vec<u64>) {
    let mut totals = vec![0u64; corpus.num_words() * k];
    let counts = corpus
        .docs()
        .iter()
        .map(|d| {
            let mut c = vec![0u64; k];
            for &(w, n) in d.entries() {
                for _ in 0..n {
                    let z = rng.below(k);
                    c[z] += 1;
                    totals[w * k + z] += 1;
                }
            }
            c
        })
        .collect();
    (counts, totals)
}

/// `(γ_j + totals_jk) / (Σ_{j' ∈ B_g} γ_j' + Σ_{j' ∈ B_g} totals_j'k)`.
pub fn theta_posterior_mean(totals: &[u64], p: &ModelParams) -> Vec<f64> {
    let k = p.k;
    let g = p.num_groups();
    let group = |w: usize| p.groups.as_ref().map_or(0, |gr| gr.group_of(w));
    let mut denom = vec![0.0; g * k];
    for w in 0..p.num_words {
        for c in 0..k {
            denom[group(w) * k + c] += p.gamma[w] + totals[w * k + c] as f64;
        }
    }
    (0..p.num_words * k)
        .map(|i| (p.gamma[i / k] + totals[i] as f64) / denom[group(i / k) * k + i % k])
        .collect()
}

fn mean_scores(c: &[u64], p: &ModelParams) -> Result<Vec<f64>> {
    match p.family {
        Family::Dm => Ok(dirichlet_mean(c, &p.alpha)),
        _ => posterior_mean_scores(c, p),
    }
}

struct Accumulator {
    theta: Vec<f64>,
    scores: Vec<Vec<f64>>,
    counts: Vec<Vec<f64>>,
    theta_samples: Vec<Vec<f64>>,
    kept: usize,
}

impl Accumulator {
    fn new(p: &ModelParams, num_docs: usize) -> Self {
        Accumulator {
            theta: vec![0.0; p.theta.len()],
            scores: vec![vec![0.0; p.k]; num_docs],
            counts: vec![vec![0.0; p.k]; num_docs],
            theta_samples: Vec::new(),
            kept: 0,
        }
    }

    fn add(&mut self, totals: &[u64], counts: &[Vec<u64>], p: &ModelParams, record: bool) -> Result<()> {
        let t = theta_posterior_mean(totals, p);
        for (a, x) in self.theta.iter_mut().zip(&t) {
            *a += x;
        }
        if record {
            self.theta_samples.push(t);
        }
        for ((s, n), c) in self.scores.iter_mut().zip(self.counts.iter_mut()).zip(counts) {
            for (a, x) in s.iter_mut().zip(mean_scores(c, p)?) {
                *a += x;
            }
            for (a, &x) in n.iter_mut().zip(c) {
                *a += x as f64;
            }
        }
        self.kept += 1;
        Ok(())
    }

    fn finish(self, init: &ModelParams, trace: Vec<TraceRow>) -> ChainSummary {
        let n = self.kept as f64;
        let mut params = init.clone();
        params.theta = self.theta.iter().map(|x| x / n).collect();
        let scale = |v: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            v.into_iter().map(|r| r.into_iter().map(|x| x / n).collect()).collect()
        };
        ChainSummary {
            params,
            scores: scale(self.scores),
            counts: scale(self.counts),
            trace,
            theta_samples: self.theta_samples,
            kept: self.kept,
        }
    }
}

/// Run one chain: burn-in, then kept cycles, accumulating posterior means.
///
/// The direct sampler starts from `init.theta`; the collapsed sampler uses
/// only the priors.
pub fn run_chain(corpus: &Corpus, init: &ModelParams, config: &ChainConfig) -> Result<ChainSummary> {
    config.validate()?;
    init.validate()?;
    if corpus.num_words() != init.num_words {
        return Err(Error::Dimension(format!(
            "corpus has {} word ids, model has {}",
            corpus.num_words(),
            init.num_words
        )));
    }
    let mut acc = Accumulator::new(init, corpus.num_docs());
    let mut trace = Vec::with_capacity(config.total_cycles());
    let is_kept = |cycle: usize| cycle > config.burn_in && (cycle - config.burn_in) % config.thin == 0;
    match config.sampler {
        Sampler::Direct => {
            let mut chain = DirectChain::new(corpus, init, config.seed, config.threads)?;
            for cycle in 1..=config.total_cycles() {
                let ll = chain.sweep()?;
                let kept = is_kept(cycle);
                if kept {
                    acc.add(chain.totals(), chain.counts(), init, config.record_theta)?;
                }
                trace.push(TraceRow { cycle, kept, loglik: ll });
            }
        }
        Sampler::Collapsed => {
            let mut chain = CollapsedChain::new(corpus, init, config.seed)?;
            for cycle in 1..=config.total_cycles() {
                let ll = chain.sweep()?;
                if config.audit_every > 0 && cycle % config.audit_every == 0 {
                    chain.state().audit()?;
                }
                let kept = is_kept(cycle);
                if kept {
                    let s = chain.state();
                    acc.add(s.word_component_totals(), s.doc_counts(), init, config.record_theta)?;
                }
                trace.push(TraceRow { cycle, kept, loglik: ll });
            }
        }
    }
    Ok(acc.finish(init, trace))
}

/// Seed of chain `index` under a master seed (SplitMix64 finalizer).
pub fn chain_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent chains on separate seed streams, run in parallel (`threads`
/// workers). Returns each chain's summary and a merged summary in which the
/// components of every chain are matched to those of the first.
pub fn run_chains(
    corpus: &Corpus,
    init: &ModelParams,
    config: &ChainConfig,
    chains: usize,
    threads: usize,
) -> Result<(ChainSummary, Vec<ChainSummary>)> {
    if chains == 0 {
        return Err(Error::Validation("need at least one chain".into()));
    }
    let configs: Vec<ChainConfig> = (0..chains)
        .map(|i| ChainConfig {
            seed: chain_seed(config.seed, i as u64),
            ..config.clone()
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot start threads: {e}")))?;
    let runs: Vec<ChainSummary> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| run_chain(corpus, init, c))
            .collect::<Result<Vec<_>>>()
    })?;
    let k = init.k;
    let reference = runs[0].params.theta.clone();
    let mut theta = vec![0.0; reference.len()];
    let mut scores = vec![vec![0.0; k]; corpus.num_docs()];
    let mut counts = vec![vec![0.0; k]; corpus.num_docs()];
    let mut trace = Vec::new();
    for r in &runs {
        let perm = best_permutation(&reference, &r.params.theta, k);
        for (a, x) in theta.iter_mut().zip(permute_columns(&r.params.theta, k, &perm)) {
            *a += x / chains as f64;
        }
        for (dst, src) in scores.iter_mut().zip(&r.scores).chain(counts.iter_mut().zip(&r.counts)) {
            for (c, &p) in perm.iter().enumerate() {
                dst[c] += src[p] / chains as f64;
            }
        }
        trace.extend(r.trace.iter().copied());
    }
    let mut params = init.clone();
    params.theta = theta;
    let merged = ChainSummary {
        params,
        scores,
        counts,
        trace,
        theta_samples: Vec::new(),
        kept: runs.iter().map(|r| r.kept).sum(),
    };
    Ok((merged, runs))
}
