//! Sampling corpora from a known model.

use rand_distr::{Distribution, Poisson};

use crate::corpus::{Corpus, Document, Groups};
use crate::error::{Error, Result};
use crate::mathfn::{multinomial_counts, sample_dirichlet, sample_gamma, Rng};
use crate::model::{Family, ModelParams};

/// How many tokens each document gets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DocLength {
    /// GP/CGP: the length follows from the sampled scores.
    FromScores,
    /// DM: `L ~ Poisson(mean)`.
    Poisson(f64),
    /// DM: every document (or every group, for grouped models) gets this many tokens.
    Fixed(u64),
}

#[derive(Debug, Clone)]
pub struct Synthetic {
    pub corpus: Corpus,
    /// The sampled `l` (GP/CGP, zero for a spike) or `m` (DM) of each document.
    pub scores: Vec<Vec<f64>>,
}

/// Θ with each column (or each group block of a column) drawn from a
/// symmetric Dirichlet with the given concentration.
pub fn random_theta(
    num_words: usize,
    k: usize,
    concentration: f64,
    groups: Option<&Groups>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let mut theta = vec![0.0; num_words * k];
    let blocks: Vec<Vec<usize>> = match groups {
        None => vec![(0..num_words).collect()],
        Some(g) => (0..g.num_groups()).map(|i| g.members(i).to_vec()).collect(),
    };
    for c in 0..k {
        for block in &blocks {
            let col = sample_dirichlet(&vec![concentration; block.len()], rng)?;
            for (&w, x) in block.iter().zip(col) {
                theta[w * k + c] = x;
            }
        }
    }
    Ok(theta)
}

fn poisson(mean: f64, rng: &mut Rng) -> Result<u64> {
    if mean <= 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(mean).map_err(|e| Error::domain("poisson", e.to_string()))?;
    Ok(d.sample(rng) as u64)
}

/// Draw `num_docs` documents from `p`.
pub fn generate(p: &ModelParams, num_docs: usize, length: DocLength, rng: &mut Rng) -> Result<Synthetic> {
    p.validate()?;
    let (j, k) = (p.num_words, p.k);
    let columns: Vec<Vec<f64>> = (0..k).map(|c| (0..j).map(|w| p.theta_at(w, c)).collect()).collect();
    let mut docs = Vec::with_capacity(num_docs);
    let mut scores = Vec::with_capacity(num_docs);
    for _ in 0..num_docs {
        let mut counts = vec![0u64; j];
        let s: Vec<f64> = match p.family {
            Family::Gp | Family::Cgp => {
                if length != DocLength::FromScores {
                    return Err(Error::Validation("gp/cgp document lengths come from the scores".into()));
                }
                let mut l = vec![0.0; k];
                for c in 0..k {
                    let spike = p.family == Family::Cgp && rng.uniform() < p.rho[c];
                    if !spike {
                        l[c] = sample_gamma(p.alpha[c], p.beta[c], rng)?;
                    }
                    let n = poisson(l[c], rng)?;
                    for (t, x) in counts.iter_mut().zip(multinomial_counts(n, &columns[c], rng)) {
                        *t += x;
                    }
                }
                l
            }
            Family::Dm => {
                let m = sample_dirichlet(&p.alpha, rng)?;
                match &p.groups {
                    None => {
                        let total = match length {
                            DocLength::Poisson(mean) => poisson(mean, rng)?,
                            DocLength::Fixed(n) => n,
                            DocLength::FromScores => {
                                return Err(Error::Validation("dm needs a document length".into()))
                            }
                        };
                        let c = multinomial_counts(total, &m, rng);
                        for (comp, &n) in c.iter().enumerate() {
                            for (t, x) in counts.iter_mut().zip(multinomial_counts(n, &columns[comp], rng)) {
                                *t += x;
                            }
                        }
                    }
                    Some(g) => {
                        for gi in 0..g.num_groups() {
                            let members = g.members(gi);
                            let total = match length {
                                DocLength::Poisson(mean) => poisson(mean, rng)?,
                                DocLength::Fixed(n) => n,
                                DocLength::FromScores => {
                                    return Err(Error::Validation("dm needs a document length".into()))
                                }
                            };
                            let c = multinomial_counts(total, &m, rng);
                            for (comp, &n) in c.iter().enumerate() {
                                let probs: Vec<f64> = members.iter().map(|&w| p.theta_at(w, comp)).collect();
                                for (&w, x) in members.iter().zip(multinomial_counts(n, &probs, rng)) {
                                    counts[w] += x;
                                }
                            }
                        }
                    }
                }
                m
            }
        };
        docs.push(Document::from_counts(
            counts.into_iter().enumerate().map(|(w, n)| (w, n as u32)),
        ));
        scores.push(s);
    }
    let mut corpus = Corpus::new(docs, j)?;
    if let Some(g) = &p.groups {
        corpus = corpus.with_groups(g.clone())?;
    }
    Ok(Synthetic { corpus, scores })
}
