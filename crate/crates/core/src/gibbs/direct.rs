//! Direct Gibbs: alternate scores, latent counts and Θ.

use crate::corpus::{log_multinomial_coeff, Corpus, Document, Groups};
use crate::error::{Error, Result};
use crate::mathfn::{multinomial_counts, sample_dirichlet, sample_gamma, Rng};
use crate::model::{cgp_zero_spike_probability, loglik_poisson, Family, LatentCounts, ModelParams, Score};
use crate::parallel::Pool;

use super::random_assignment_counts;

/// Draw the scores of one document given its component counts `c`.
///
/// GP: `l_k ~ Gamma(c_k + α_k, 1 + β_k)`. CGP: as GP when `c_k > 0`;
/// otherwise spike or slab by their posterior odds, slab `Gamma(α_k, 1 + β_k)`.
/// DM: `m ~ Dirichlet(c + α)`, returned as slab values.
pub fn direct_sample_scores(c: &[u64], p: &ModelParams, rng: &mut Rng) -> Result<Vec<Score>> {
    if c.len() != p.k {
        return Err(Error::Dimension(format!("c has length {}, expected {}", c.len(), p.k)));
    }
    match p.family {
        Family::Dm => {
            let shape: Vec<f64> = c.iter().zip(&p.alpha).map(|(&n, a)| n as f64 + a).collect();
            Ok(sample_dirichlet(&shape, rng)?.into_iter().map(Score::Slab).collect())
        }
        Family::Gp | Family::Cgp => {
            let mut out = Vec::with_capacity(p.k);
            for k in 0..p.k {
                let rate = 1.0 + p.beta[k];
                if p.family == Family::Cgp && c[k] == 0 && p.rho[k] > 0.0 {
                    let spike = cgp_zero_spike_probability(p.rho[k], p.alpha[k], p.beta[k]);
                    if rng.uniform() < spike {
                        out.push(Score::Spike);
                        continue;
                    }
                }
                out.push(Score::Slab(sample_gamma(c[k] as f64 + p.alpha[k], rate, rng)?));
            }
            Ok(out)
        }
    }
}

/// Draw `V` for one document: row `j` is `Multinomial(w_j, s_k θ_jk / Σ_k s_k θ_jk)`.
pub fn direct_sample_assignments(
    doc: &Document,
    scores: &[f64],
    p: &ModelParams,
    rng: &mut Rng,
) -> Result<LatentCounts> {
    p.check_doc(doc)?;
    if scores.len() != p.k {
        return Err(Error::Dimension(format!("scores have length {}, expected {}", scores.len(), p.k)));
    }
    let mut weights = vec![0.0; p.k];
    let mut rows = Vec::with_capacity(doc.nnz());
    for &(w, n) in doc.entries() {
        let mut total = 0.0;
        for (k, t) in p.theta_row(w).iter().enumerate() {
            weights[k] = scores[k] * t;
            total += weights[k];
        }
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate { word: w + 1 });
        }
        rows.push((w, multinomial_counts(n as u64, &weights, rng)));
    }
    Ok(LatentCounts { k: p.k, rows })
}

/// Draw Θ: column `k` (of each group) from `Dirichlet(γ_j + totals_jk)`.
pub fn direct_sample_theta(
    totals: &[u64],
    gamma: &[f64],
    k: usize,
    groups: Option<&Groups>,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let j = gamma.len();
    if totals.len() != j * k {
        return Err(Error::Dimension(format!("totals have {} entries, expected {}", totals.len(), j * k)));
    }
    let blocks: Vec<Vec<usize>> = match groups {
        None => vec![(0..j).collect()],
        Some(g) => (0..g.num_groups()).map(|i| g.members(i).to_vec()).collect(),
    };
    let mut theta = vec![0.0; j * k];
    for c in 0..k {
        for block in &blocks {
            let shape: Vec<f64> = block.iter().map(|&w| gamma[w] + totals[w * k + c] as f64).collect();
            for (&w, x) in block.iter().zip(sample_dirichlet(&shape, rng)?) {
                theta[w * k + c] = x;
            }
        }
    }
    Ok(theta)
}

/// `ln p(w | scores, Θ)` for one document.
pub(crate) fn conditional_loglik(doc: &Document, scores: &[f64], p: &ModelParams) -> Result<f64> {
    match p.family {
        Family::Gp | Family::Cgp => loglik_poisson(doc, scores, p),
        Family::Dm => {
            let coeff: f64 = match &p.groups {
                None => log_multinomial_coeff(doc),
                Some(g) => g.split(doc).iter().map(log_multinomial_coeff).sum(),
            };
            let mut s = coeff;
            for &(w, n) in doc.entries() {
                let r: f64 = p.theta_row(w).iter().zip(scores).map(|(t, m)| t * m).sum();
                s += n as f64 * r.ln();
            }
            Ok(s)
        }
    }
}

/// A direct Gibbs chain. Θ lives in `params`; the per-document component
/// counts `c` carry over between cycles.
pub struct DirectChain<'a> {
    corpus: &'a Corpus,
    params: ModelParams,
    counts: Vec<Vec<u64>>,
    totals: Vec<u64>,
    scores: Vec<Vec<Score>>,
    seed: u64,
    cycle: u64,
    rng: Rng,
    pool: Pool,
}

impl<'a> DirectChain<'a> {
    /// Start from `params.theta` and uniformly random token assignments.
    pub fn new(corpus: &'a Corpus, params: &ModelParams, seed: u64, threads: usize) -> Result<Self> {
        params.validate()?;
        let mut rng = Rng::with_stream(seed, 0);
        let (counts, totals) = random_assignment_counts(corpus, params.k, &mut rng);
        Ok(DirectChain {
            corpus,
            params: params.clone(),
            counts,
            totals,
            scores: vec![vec![Score::Spike; params.k]; corpus.num_docs()],
            seed,
            cycle: 0,
            rng,
            pool: Pool::new(threads)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    /// Word-by-component totals `Σ_i v_jk` from the last cycle.
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// Scores drawn in the last cycle.
    pub fn scores(&self) -> &[Vec<Score>] {
        &self.scores
    }

    /// One major cycle. Returns `Σ_i ln p(w_i | scores_i, Θ)` under the Θ
    /// used for the cycle.
    pub fn sweep(&mut self) -> Result<f64> {
        self.cycle += 1;
        let num_docs = self.corpus.num_docs() as u64;
        let base = 1 + (self.cycle - 1) * num_docs;
        let (seed, params) = (self.seed, &self.params);
        let docs = self.corpus.docs();
        let mut slots: Vec<(Vec<u64>, Vec<Score>)> = self
            .counts
            .drain(..)
            .zip(self.scores.drain(..))
            .collect();
        let results = self.pool.map(docs, &mut slots, |i, d, slot| {
            let mut rng = Rng::with_stream(seed, base + i as u64);
            let scores = direct_sample_scores(&slot.0, params, &mut rng)?;
            let values: Vec<f64> = scores.iter().map(|s| s.value()).collect();
            let v = direct_sample_assignments(d, &values, params, &mut rng)?;
            let ll = conditional_loglik(d, &values, params)?;
            slot.0 = v.component_totals();
            slot.1 = scores;
            Ok((v, ll))
        })?;
        for (c, s) in slots {
            self.counts.push(c);
            self.scores.push(s);
        }
        let k = self.params.k;
        self.totals.iter_mut().for_each(|t| *t = 0);
        let mut ll = 0.0;
        for (v, l) in results {
            ll += l;
            for (w, row) in v.rows {
                for (t, x) in self.totals[w * k..(w + 1) * k].iter_mut().zip(row) {
                    *t += x;
                }
            }
        }
        self.params.theta = direct_sample_theta(
            &self.totals,
            &self.params.gamma,
            k,
            self.params.groups.as_ref(),
            &mut self.rng,
        )?;
        Ok(ll)
    }
}
