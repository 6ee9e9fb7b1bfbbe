//! Model parameters for the three families and their likelihoods.

mod align;
mod likelihood;
mod serial;

pub use align::{aligned_mae, best_permutation, permute_columns};
pub use likelihood::{
    cgp_zero_spike_probability, dirichlet_mean, loglik_cgp_joint, loglik_cgp_marginal,
    loglik_dm_full, loglik_dm_latent, loglik_dm_marginal, loglik_gp_joint, loglik_gp_latent,
    loglik_gp_marginal, loglik_grouped, loglik_poisson, posterior_mean_scores, Score,
};
pub use serial::{load_model, model_from_json, model_to_json, save_model};

use std::fmt;
use std::str::FromStr;

use crate::corpus::{Document, Groups};
use crate::error::{Error, Result};
use crate::mathfn::Rng;

const NORM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Gamma-Poisson: independent gamma scores, Poisson counts.
    Gp,
    /// Conditional Gamma-Poisson: each score is zero with probability `rho_k`.
    Cgp,
    /// Dirichlet-multinomial: proportions on the simplex, multinomial counts.
    Dm,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gp => "gp",
            Family::Cgp => "cgp",
            Family::Dm => "dm",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gp" => Ok(Family::Gp),
            "cgp" => Ok(Family::Cgp),
            "dm" => Ok(Family::Dm),
            other => Err(Error::Validation(format!("unknown model family {other:?}"))),
        }
    }
}

/// Parameters of a fitted or generating model.
///
/// `theta` is `J × K`, stored row-major: `theta[j * k + c]` is the weight of
/// word `j` in component `c`. `beta` is empty for DM, `rho` is empty unless
/// the family is CGP.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub family: Family,
    pub k: usize,
    pub num_words: usize,
    pub theta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: Vec<f64>,
    pub gamma: Vec<f64>,
    pub groups: Option<Groups>,
}

impl ModelParams {
    /// Uniform Θ with the given priors. Checks the result.
    pub fn new(
        family: Family,
        num_words: usize,
        alpha: Vec<f64>,
        beta: Vec<f64>,
        rho: Vec<f64>,
        gamma: Vec<f64>,
        groups: Option<Groups>,
    ) -> Result<Self> {
        let k = alpha.len();
        let mut p = ModelParams {
            family,
            k,
            num_words,
            theta: vec![0.0; num_words * k],
            alpha,
            beta,
            rho,
            gamma,
            groups,
        };
        p.fill_theta(|_, _| 1.0);
        p.validate()?;
        Ok(p)
    }

    #[inline]
    pub fn theta_at(&self, word: usize, comp: usize) -> f64 {
        self.theta[word * self.k + comp]
    }

    #[inline]
    pub fn theta_row(&self, word: usize) -> &[f64] {
        &self.theta[word * self.k..(word + 1) * self.k]
    }

    pub fn alpha_sum(&self) -> f64 {
        self.alpha.iter().sum()
    }

    pub fn num_groups(&self) -> usize {
        self.groups.as_ref().map_or(1, Groups::num_groups)
    }

    /// Set `theta[j][k] ∝ f(j, k)` and normalize per column (or per group).
    pub fn fill_theta(&mut self, mut f: impl FnMut(usize, usize) -> f64) {
        for j in 0..self.num_words {
            for c in 0..self.k {
                self.theta[j * self.k + c] = f(j, c);
            }
        }
        normalize_theta(&mut self.theta, self.num_words, self.k, self.groups.as_ref());
    }

    /// Random positive Θ: `theta[j][k] ∝ (gamma_j + mean count_j / K) · U(0.5, 1.5)`.
    pub fn randomize_theta(&mut self, word_totals: &[u64], rng: &mut Rng) {
        let k = self.k as f64;
        let gamma = self.gamma.clone();
        self.fill_theta(|j, _| {
            let base = gamma[j] + word_totals.get(j).copied().unwrap_or(0) as f64 / k;
            base * rng.uniform_range(0.5, 1.5)
        });
    }

    /// Check dimensions, ranges and normalization.
    pub fn validate(&self) -> Result<()> {
        let (j, k) = (self.num_words, self.k);
        if k == 0 {
            return Err(Error::Validation("K must be at least 1".into()));
        }
        if self.theta.len() != j * k {
            return Err(Error::Dimension(format!(
                "theta has {} entries, expected J×K = {}×{}",
                self.theta.len(),
                j,
                k
            )));
        }
        let check_len = |name: &str, v: &[f64], n: usize| {
            if v.len() != n {
                Err(Error::Dimension(format!("{name} has length {}, expected {n}", v.len())))
            } else {
                Ok(())
            }
        };
        let positive = |name: &str, v: &[f64]| {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                Err(Error::Validation(format!("{name} entries must be positive and finite, got {x}")))
            } else {
                Ok(())
            }
        };
        check_len("alpha", &self.alpha, k)?;
        positive("alpha", &self.alpha)?;
        check_len("gamma", &self.gamma, j)?;
        positive("gamma", &self.gamma)?;
        match self.family {
            Family::Dm => {
                check_len("beta", &self.beta, 0)?;
                check_len("rho", &self.rho, 0)?;
            }
            Family::Gp | Family::Cgp => {
                check_len("beta", &self.beta, k)?;
                positive("beta", &self.beta)?;
                if self.family == Family::Cgp {
                    check_len("rho", &self.rho, k)?;
                    if let Some(r) = self.rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
                        return Err(Error::Validation(format!("rho entries must lie in [0, 1], got {r}")));
                    }
                } else {
                    check_len("rho", &self.rho, 0)?;
                }
                if self.groups.is_some() {
                    return Err(Error::Unsupported(
                        "word groups are only defined for the dm family".into(),
                    ));
                }
            }
        }
        if let Some(g) = &self.groups {
            if g.num_words() != j {
                return Err(Error::Dimension(format!(
                    "groups cover {} words, theta has {}",
                    g.num_words(),
                    j
                )));
            }
        }
        if let Some(x) = self.theta.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Validation(format!("theta entries must be finite and nonnegative, got {x}")));
        }
        for (g, c, s) in theta_block_sums(&self.theta, j, k, self.groups.as_ref()) {
            if (s - 1.0).abs() > NORM_TOL {
                return Err(Error::Validation(format!(
                    "theta column {} (group {}) sums to {s}, expected 1",
                    c + 1,
                    g + 1
                )));
            }
        }
        Ok(())
    }

    /// Words of `doc` that lie outside this model's vocabulary.
    pub fn out_of_vocabulary(&self, doc: &Document) -> Vec<usize> {
        doc.entries()
            .iter()
            .map(|&(w, _)| w)
            .filter(|&w| w >= self.num_words)
            .collect()
    }

    pub(crate) fn check_doc(&self, doc: &Document) -> Result<()> {
        let oov = self.out_of_vocabulary(doc);
        if oov.is_empty() {
            Ok(())
        } else {
            Err(Error::OutOfVocabulary {
                ids: oov.into_iter().map(|w| w + 1).collect(),
            })
        }
    }

    pub(crate) fn require(&self, family: Family, op: &str) -> Result<()> {
        if self.family == family {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{op} needs a {family} model, got {}", self.family)))
        }
    }
}

/// `(group, column, sum)` for every block of Θ that must sum to one.
pub(crate) fn theta_block_sums(
    theta: &[f64],
    j: usize,
    k: usize,
    groups: Option<&Groups>,
) -> Vec<(usize, usize, f64)> {
    let g = groups.map_or(1, Groups::num_groups);
    let mut sums = vec![0.0; g * k];
    for w in 0..j {
        let gw = groups.map_or(0, |gr| gr.group_of(w));
        for c in 0..k {
            sums[gw * k + c] += theta[w * k + c];
        }
    }
    sums.into_iter()
        .enumerate()
        .map(|(i, s)| (i / k, i % k, s))
        .collect()
}

/// Normalize each column of a row-major `J × K` matrix to one, per group if given.
/// A block of zeros becomes uniform.
pub(crate) fn normalize_theta(theta: &mut [f64], j: usize, k: usize, groups: Option<&Groups>) {
    let sums = theta_block_sums(theta, j, k, groups);
    let sizes: Vec<usize> = match groups {
        Some(g) => (0..g.num_groups()).map(|i| g.members(i).len()).collect(),
        None => vec![j],
    };
    for w in 0..j {
        let gw = groups.map_or(0, |gr| gr.group_of(w));
        for c in 0..k {
            let s = sums[gw * k + c].2;
            let x = &mut theta[w * k + c];
            *x = if s > 0.0 { *x / s } else { 1.0 / sizes[gw] as f64 };
        }
    }
}

/// Latent word-by-component counts `V` of one document, stored only for
/// observed words: `rows[r] = (word, counts over components)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentCounts {
    pub k: usize,
    pub rows: Vec<(usize, Vec<u64>)>,
}

impl LatentCounts {
    pub fn new(k: usize, rows: Vec<(usize, Vec<u64>)>) -> Result<Self> {
        if let Some((w, r)) = rows.iter().find(|(_, r)| r.len() != k) {
            return Err(Error::Dimension(format!(
                "row for word {} has {} entries, expected K = {k}",
                w + 1,
                r.len()
            )));
        }
        Ok(LatentCounts { k, rows })
    }

    /// All tokens of each word in one component.
    pub fn all_in(doc: &Document, k: usize, comp: usize) -> Self {
        let rows = doc
            .entries()
            .iter()
            .map(|&(w, c)| {
                let mut r = vec![0; k];
                r[comp] = c as u64;
                (w, r)
            })
            .collect();
        LatentCounts { k, rows }
    }

    /// Column sums `c_k`.
    pub fn component_totals(&self) -> Vec<u64> {
        let mut c = vec![0u64; self.k];
        for (_, r) in &self.rows {
            for (t, v) in c.iter_mut().zip(r) {
                *t += v;
            }
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.rows.iter().flat_map(|(_, r)| r).sum()
    }

    /// Row sums as a document.
    pub fn document(&self) -> Document {
        Document::from_counts(
            self.rows
                .iter()
                .map(|(w, r)| (*w, r.iter().sum::<u64>() as u32)),
        )
    }

    /// Error unless the row sums reproduce `doc`.
    pub fn check_against(&self, doc: &Document) -> Result<()> {
        if self.document() == *doc {
            Ok(())
        } else {
            Err(Error::Validation("latent counts do not sum to the document counts".into()))
        }
    }
}
