//! Collapsed Gibbs: scores and Θ integrated out, one token at a time.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::mathfn::{categorical_index, Rng};
use crate::model::{
    cgp_zero_spike_probability, loglik_cgp_marginal, loglik_dm_marginal, loglik_gp_marginal, Family,
    LatentCounts, ModelParams,
};

use super::direct::direct_sample_theta;

/// Token assignments and the count tables they imply.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapsedState {
    k: usize,
    /// Word id of every token, documents in corpus order, words ascending.
    tokens: Vec<Vec<usize>>,
    assign: Vec<Vec<usize>>,
    /// `Σ_i v_jk`, row-major `J × K`.
    word_comp: Vec<u64>,
    /// `Σ_{j ∈ B_g} Σ_i v_jk`, row-major `G × K` (`G = 1` without groups).
    group_comp: Vec<u64>,
    doc_comp: Vec<Vec<u64>>,
    group_of: Vec<usize>,
}

impl CollapsedState {
    /// Uniformly random assignments.
    pub fn random(corpus: &Corpus, p: &ModelParams, rng: &mut Rng) -> Self {
        let tokens: Vec<Vec<usize>> = corpus.docs().iter().map(|d| d.to_sequence().tokens).collect();
        let assign = tokens
            .iter()
            .map(|t| t.iter().map(|_| rng.below(p.k)).collect())
            .collect();
        Self::from_assignments(corpus, p, tokens, assign)
    }

    fn from_assignments(corpus: &Corpus, p: &ModelParams, tokens: Vec<Vec<usize>>, assign: Vec<Vec<usize>>) -> Self {
        let group_of = match &p.groups {
            Some(g) => g.assignment().to_vec(),
            None => vec![0; corpus.num_words()],
        };
        let mut s = CollapsedState {
            k: p.k,
            tokens,
            assign,
            word_comp: vec![0; corpus.num_words() * p.k],
            group_comp: vec![0; p.num_groups() * p.k],
            doc_comp: vec![vec![0; p.k]; corpus.num_docs()],
            group_of,
        };
        let (wc, gc, dc) = s.recount();
        s.word_comp = wc;
        s.group_comp = gc;
        s.doc_comp = dc;
        s
    }

    /// Explicit assignments, one list per document in token order
    /// (words ascending, as produced by `Document::to_sequence`).
    pub fn with_assignments(corpus: &Corpus, p: &ModelParams, assign: Vec<Vec<usize>>) -> Result<Self> {
        let tokens: Vec<Vec<usize>> = corpus.docs().iter().map(|d| d.to_sequence().tokens).collect();
        if assign.len() != tokens.len()
            || assign.iter().zip(&tokens).any(|(a, t)| a.len() != t.len())
            || assign.iter().flatten().any(|&c| c >= p.k)
        {
            return Err(Error::Dimension("assignments do not match the corpus".into()));
        }
        Ok(Self::from_assignments(corpus, p, tokens, assign))
    }

    fn recount(&self) -> (Vec<u64>, Vec<u64>, Vec<Vec<u64>>) {
        let k = self.k;
        let g = self.group_comp.len() / k;
        let mut wc = vec![0; self.word_comp.len()];
        let mut gc = vec![0; g * k];
        let mut dc = vec![vec![0; k]; self.tokens.len()];
        for ((t, a), d) in self.tokens.iter().zip(&self.assign).zip(dc.iter_mut()) {
            for (&w, &c) in t.iter().zip(a) {
                wc[w * k + c] += 1;
                gc[self.group_of[w] * k + c] += 1;
                d[c] += 1;
            }
        }
        (wc, gc, dc)
    }

    /// Recount every table from the assignments and compare.
    #[cfg(test)]
    pub(crate) fn counts_mut(&mut self) -> (&mut Vec<u64>, &mut Vec<Vec<u64>>) {
        (&mut self.word_comp, &mut self.doc_comp)
    }

    pub fn audit(&self) -> Result<()> {
        let (wc, gc, dc) = self.recount();
        if wc != self.word_comp || gc != self.group_comp || dc != self.doc_comp {
            return Err(Error::Invariant("collapsed Gibbs count tables disagree with a recount".into()));
        }
        for (d, t) in self.doc_comp.iter().zip(&self.tokens) {
            if d.iter().sum::<u64>() != t.len() as u64 {
                return Err(Error::Invariant("document component counts do not sum to its length".into()));
            }
        }
        Ok(())
    }

    pub fn assignments(&self) -> &[Vec<usize>] {
        &self.assign
    }

    pub fn tokens(&self, doc: usize) -> &[usize] {
        &self.tokens[doc]
    }

    pub fn word_component_totals(&self) -> &[u64] {
        &self.word_comp
    }

    pub fn component_totals(&self) -> &[u64] {
        &self.group_comp
    }

    pub fn doc_counts(&self) -> &[Vec<u64>] {
        &self.doc_comp
    }

    /// Latent counts `V` of one document.
    pub fn latent(&self, doc: usize) -> LatentCounts {
        let mut rows: Vec<(usize, Vec<u64>)> = Vec::new();
        for (&w, &c) in self.tokens[doc].iter().zip(&self.assign[doc]) {
            match rows.last_mut() {
                Some((last, r)) if *last == w => r[c] += 1,
                _ => {
                    let mut r = vec![0; self.k];
                    r[c] = 1;
                    rows.push((w, r));
                }
            }
        }
        LatentCounts { k: self.k, rows }
    }
}

/// Per-component constants of the token conditional.
pub(crate) struct Weights {
    family: Family,
    alpha: Vec<f64>,
    /// `1 + β_k` (GP/CGP).
    rate: Vec<f64>,
    /// Probability of the slab given `c_k = 0` (CGP), else 1.
    slab: Vec<f64>,
    gamma: Vec<f64>,
    /// `Σ_{j ∈ B_g} γ_j`.
    gamma_sum: Vec<f64>,
    buf: Vec<f64>,
}

impl Weights {
    pub(crate) fn new(p: &ModelParams) -> Self {
        let rate = match p.family {
            Family::Dm => vec![1.0; p.k],
            _ => p.beta.iter().map(|b| 1.0 + b).collect(),
        };
        let slab = match p.family {
            Family::Cgp => (0..p.k)
                .map(|k| 1.0 - cgp_zero_spike_probability(p.rho[k], p.alpha[k], p.beta[k]))
                .collect(),
            _ => vec![1.0; p.k],
        };
        let mut gamma_sum = vec![0.0; p.num_groups()];
        for (w, g) in p.gamma.iter().enumerate() {
            gamma_sum[p.groups.as_ref().map_or(0, |gr| gr.group_of(w))] += g;
        }
        Weights {
            family: p.family,
            alpha: p.alpha.clone(),
            rate,
            slab,
            gamma: p.gamma.clone(),
            gamma_sum,
            buf: vec![0.0; p.k],
        }
    }
}

fn decrement(x: &mut u64) -> Result<()> {
    *x = x
        .checked_sub(1)
        .ok_or_else(|| Error::Invariant("count went negative while removing a token".into()))?;
    Ok(())
}

fn remove_token(state: &mut CollapsedState, doc: usize, token: usize) -> Result<()> {
    let k = state.k;
    let w = state.tokens[doc][token];
    let g = state.group_of[w];
    let old = state.assign[doc][token];
    decrement(&mut state.word_comp[w * k + old])?;
    decrement(&mut state.group_comp[g * k + old])?;
    decrement(&mut state.doc_comp[doc][old])
}

/// Unnormalized conditional of a removed token of word `w` in `doc`, into `wt.buf`.
fn fill_weights(state: &CollapsedState, wt: &mut Weights, doc: usize, w: usize) -> f64 {
    let k = state.k;
    let g = state.group_of[w];
    let c = &state.doc_comp[doc];
    let mut total = 0.0;
    for j in 0..k {
        let word = (wt.gamma[w] + state.word_comp[w * k + j] as f64)
            / (wt.gamma_sum[g] + state.group_comp[g * k + j] as f64);
        let comp = match wt.family {
            Family::Dm => c[j] as f64 + wt.alpha[j],
            Family::Gp => (c[j] as f64 + wt.alpha[j]) / wt.rate[j],
            Family::Cgp => {
                let base = (c[j] as f64 + wt.alpha[j]) / wt.rate[j];
                if c[j] == 0 {
                    base * wt.slab[j]
                } else {
                    base
                }
            }
        };
        wt.buf[j] = word * comp;
        total += wt.buf[j];
    }
    total
}

pub(crate) fn resample(state: &mut CollapsedState, wt: &mut Weights, doc: usize, token: usize, rng: &mut Rng) -> Result<usize> {
    remove_token(state, doc, token)?;
    let w = state.tokens[doc][token];
    let total = fill_weights(state, wt, doc, w);
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Degenerate { word: w + 1 });
    }
    let new = categorical_index(&wt.buf, total, rng);
    let k = state.k;
    state.assign[doc][token] = new;
    state.word_comp[w * k + new] += 1;
    state.group_comp[state.group_of[w] * k + new] += 1;
    state.doc_comp[doc][new] += 1;
    Ok(new)
}

/// Conditional weights for a token, without moving it.
#[cfg(test)]
pub(crate) fn token_weights(state: &CollapsedState, p: &ModelParams, doc: usize, token: usize) -> Vec<f64> {
    let mut s = state.clone();
    remove_token(&mut s, doc, token).unwrap();
    let mut wt = Weights::new(p);
    fill_weights(&s, &mut wt, doc, s.tokens[doc][token]);
    wt.buf
}

/// Remove one token, draw its component from the collapsed conditional and
/// put it back. Returns the new component.
pub fn collapsed_resample_token(
    state: &mut CollapsedState,
    doc: usize,
    token: usize,
    p: &ModelParams,
    rng: &mut Rng,
) -> Result<usize> {
    if doc >= state.tokens.len() || token >= state.tokens[doc].len() {
        return Err(Error::Dimension(format!("no token {token} in document {doc}")));
    }
    resample(state, &mut Weights::new(p), doc, token, rng)
}

/// A collapsed Gibbs chain.
pub struct CollapsedChain<'a> {
    corpus: &'a Corpus,
    params: ModelParams,
    state: CollapsedState,
    weights: Weights,
    rng: Rng,
}

impl<'a> CollapsedChain<'a> {
    pub fn new(corpus: &'a Corpus, params: &ModelParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let mut rng = Rng::with_stream(seed, 0);
        let state = CollapsedState::random(corpus, params, &mut rng);
        Ok(CollapsedChain {
            corpus,
            params: params.clone(),
            state,
            weights: Weights::new(params),
            rng,
        })
    }

    pub fn state(&self) -> &CollapsedState {
        &self.state
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Resample every token once, documents in order.
    pub fn sweep_tokens(&mut self) -> Result<()> {
        for d in 0..self.corpus.num_docs() {
            for t in 0..self.state.tokens[d].len() {
                resample(&mut self.state, &mut self.weights, d, t, &mut self.rng)?;
            }
        }
        Ok(())
    }

    /// Draw Θ from its conditional given the assignments and return
    /// `Σ_i ln p(V_i | Θ)` with the scores integrated out.
    pub fn sample_loglik(&mut self) -> Result<f64> {
        let mut p = self.params.clone();
        p.theta = direct_sample_theta(
            &self.state.word_comp,
            &p.gamma,
            p.k,
            p.groups.as_ref(),
            &mut self.rng,
        )?;
        let f = match p.family {
            Family::Gp => loglik_gp_marginal,
            Family::Cgp => loglik_cgp_marginal,
            Family::Dm => loglik_dm_marginal,
        };
        let mut ll = 0.0;
        for d in 0..self.corpus.num_docs() {
            ll += f(&self.state.latent(d), &p)?;
        }
        Ok(ll)
    }

    /// One major cycle: a token sweep, then the log-probability estimate.
    pub fn sweep(&mut self) -> Result<f64> {
        self.sweep_tokens()?;
        self.sample_loglik()
    }
}
