//! Exact log-likelihoods. Every function returns natural logs; impossible
//! configurations give `-inf`.

use super::{Family, LatentCounts, ModelParams};
use crate::corpus::{log_multinomial_coeff, Document, Groups};
use crate::error::{Error, Result};
use crate::mathfn::{gamma_log_density, ln_factorial, ln_gamma_unchecked, xlogy};

/// A CGP score: either the point mass at zero or a value from the gamma slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Score {
    Spike,
    Slab(f64),
}

impl Score {
    pub fn value(self) -> f64 {
        match self {
            Score::Spike => 0.0,
            Score::Slab(x) => x,
        }
    }
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has length {got}, expected {want}")))
    }
}

fn check_latent(v: &LatentCounts, p: &ModelParams) -> Result<()> {
    check_len("latent row", v.k, p.k)?;
    if let Some((w, _)) = v.rows.iter().find(|(w, _)| *w >= p.num_words) {
        return Err(Error::OutOfVocabulary { ids: vec![w + 1] });
    }
    Ok(())
}

/// `ln x` times `e`, with `0 · ln 0 = 0`, `e · ln 0 = -inf` for `e > 0`.
fn pow_log(e: f64, x: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else if x == 0.0 {
        if e > 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    } else {
        e * x.ln()
    }
}

/// `Σ_{j,k} v_jk ln θ_jk − ln v_jk!`.
fn latent_word_terms(v: &LatentCounts, p: &ModelParams) -> f64 {
    let mut s = 0.0;
    for (w, row) in &v.rows {
        for (c, &n) in row.iter().enumerate() {
            if n > 0 {
                s += xlogy(n as f64, p.theta_at(*w, c)) - ln_factorial(n);
            }
        }
    }
    s
}

/// `Σ_j w_j ln(Σ_k θ_jk s_k)`.
fn mixed_word_terms(doc: &Document, s: &[f64], p: &ModelParams) -> f64 {
    doc.entries()
        .iter()
        .map(|&(w, n)| {
            let rate: f64 = p.theta_row(w).iter().zip(s).map(|(t, x)| t * x).sum();
            xlogy(n as f64, rate)
        })
        .sum()
}

/// `ln Π_j Poisson(w_j; Σ_k θ_jk l_k)` over the whole vocabulary.
pub fn loglik_poisson(doc: &Document, l: &[f64], p: &ModelParams) -> Result<f64> {
    check_len("l", l.len(), p.k)?;
    p.check_doc(doc)?;
    let mut colsum = vec![0.0; p.k];
    for w in 0..p.num_words {
        for (c, t) in p.theta_row(w).iter().enumerate() {
            colsum[c] += t;
        }
    }
    let total_rate: f64 = colsum.iter().zip(l).map(|(s, x)| s * x).sum();
    let lnfact: f64 = doc.entries().iter().map(|&(_, n)| ln_factorial(n as u64)).sum();
    Ok(mixed_word_terms(doc, l, p) - total_rate - lnfact)
}

/// Joint `ln p(w, l)` of the Gamma-Poisson model.
pub fn loglik_gp_joint(doc: &Document, l: &[f64], p: &ModelParams) -> Result<f64> {
    p.require(Family::Gp, "loglik_gp_joint")?;
    let words = loglik_poisson(doc, l, p)?;
    let prior: f64 = (0..p.k)
        .map(|c| gamma_log_density(l[c], p.alpha[c], p.beta[c]))
        .sum();
    Ok(words + prior)
}

/// Joint `ln p(w, l)` of the conditional Gamma-Poisson model.
pub fn loglik_cgp_joint(doc: &Document, scores: &[Score], p: &ModelParams) -> Result<f64> {
    p.require(Family::Cgp, "loglik_cgp_joint")?;
    check_len("scores", scores.len(), p.k)?;
    let mut prior = 0.0;
    for (c, s) in scores.iter().enumerate() {
        prior += match *s {
            Score::Spike => p.rho[c].ln(),
            Score::Slab(x) => (1.0 - p.rho[c]).ln() + gamma_log_density(x, p.alpha[c], p.beta[c]),
        };
    }
    let l: Vec<f64> = scores.iter().map(|s| s.value()).collect();
    Ok(loglik_poisson(doc, &l, p)? + prior)
}

/// Joint `ln p(V, l)` of the Gamma-Poisson model.
pub fn loglik_gp_latent(v: &LatentCounts, l: &[f64], p: &ModelParams) -> Result<f64> {
    p.require(Family::Gp, "loglik_gp_latent")?;
    check_latent(v, p)?;
    check_len("l", l.len(), p.k)?;
    let c = v.component_totals();
    let mut s = latent_word_terms(v, p);
    for k in 0..p.k {
        let (a, b) = (p.alpha[k], p.beta[k]);
        if l[k] < 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        s += a * b.ln() + pow_log(c[k] as f64 + a - 1.0, l[k]) - (b + 1.0) * l[k] - ln_gamma_unchecked(a);
    }
    Ok(s)
}

/// Per-component factor of the Gamma-Poisson marginal, `ln ∫ Gamma(l) l^c e^{-l} dl`.
fn gp_component(c: u64, a: f64, b: f64) -> f64 {
    let n = c as f64;
    ln_gamma_unchecked(n + a) - ln_gamma_unchecked(a) + a * b.ln() - (n + a) * (1.0 + b).ln()
}

/// `ln p(V)` of the Gamma-Poisson model with the scores integrated out.
pub fn loglik_gp_marginal(v: &LatentCounts, p: &ModelParams) -> Result<f64> {
    p.require(Family::Gp, "loglik_gp_marginal")?;
    check_latent(v, p)?;
    let c = v.component_totals();
    let comps: f64 = (0..p.k).map(|k| gp_component(c[k], p.alpha[k], p.beta[k])).sum();
    Ok(comps + latent_word_terms(v, p))
}

/// `ln p(V)` of the conditional Gamma-Poisson model with the scores integrated out.
pub fn loglik_cgp_marginal(v: &LatentCounts, p: &ModelParams) -> Result<f64> {
    p.require(Family::Cgp, "loglik_cgp_marginal")?;
    check_latent(v, p)?;
    let c = v.component_totals();
    let comps: f64 = (0..p.k)
        .map(|k| {
            let (a, b, r) = (p.alpha[k], p.beta[k], p.rho[k]);
            let gp = gp_component(c[k], a, b);
            if r == 0.0 {
                gp
            } else if c[k] > 0 {
                (1.0 - r).ln() + gp
            } else {
                ((1.0 - r) * gp.exp() + r).ln()
            }
        })
        .sum();
    Ok(comps + latent_word_terms(v, p))
}

fn dirichlet_log_density(m: &[f64], alpha: &[f64]) -> f64 {
    let asum: f64 = alpha.iter().sum();
    let mut s = ln_gamma_unchecked(asum);
    for (&x, &a) in m.iter().zip(alpha) {
        s += pow_log(a - 1.0, x) - ln_gamma_unchecked(a);
    }
    s
}

fn check_simplex(m: &[f64], k: usize) -> Result<()> {
    check_len("m", m.len(), k)?;
    let s: f64 = m.iter().sum();
    if m.iter().any(|x| !(*x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!("m must lie on the simplex (sum {s})")));
    }
    Ok(())
}

/// `ln Π_g L_g! / Π_j w_j!`, the multinomial coefficient(s).
fn log_coeff(doc: &Document, groups: Option<&Groups>) -> f64 {
    match groups {
        None => log_multinomial_coeff(doc),
        Some(g) => g.split(doc).iter().map(log_multinomial_coeff).sum(),
    }
}

fn dm_full(doc: &Document, m: &[f64], p: &ModelParams, groups: Option<&Groups>) -> Result<f64> {
    p.require(Family::Dm, "dm likelihood")?;
    check_simplex(m, p.k)?;
    p.check_doc(doc)?;
    Ok(dirichlet_log_density(m, &p.alpha) + log_coeff(doc, groups) + mixed_word_terms(doc, m, p))
}

/// Joint `ln p(w, m)` of the Dirichlet-multinomial model, treating Θ as a
/// single multinomial over the whole vocabulary.
pub fn loglik_dm_full(doc: &Document, m: &[f64], p: &ModelParams) -> Result<f64> {
    dm_full(doc, m, p, None)
}

/// Joint `ln p(w, m)` of the grouped model: one multinomial per word group.
pub fn loglik_grouped(doc: &Document, m: &[f64], p: &ModelParams) -> Result<f64> {
    let groups = p
        .groups
        .as_ref()
        .ok_or_else(|| Error::Validation("model has no word groups".into()))?;
    dm_full(doc, m, p, Some(groups))
}

/// `ln Π_g L_g!` for the latent forms: grouped models use per-group totals.
fn log_total_factorial(v: &LatentCounts, p: &ModelParams) -> f64 {
    match &p.groups {
        None => ln_factorial(v.total()),
        Some(g) => {
            let mut t = vec![0u64; g.num_groups()];
            for (w, r) in &v.rows {
                t[g.group_of(*w)] += r.iter().sum::<u64>();
            }
            t.into_iter().map(ln_factorial).sum()
        }
    }
}

/// Joint `ln p(V, m)` of the Dirichlet-multinomial model (grouped if `p` has groups).
pub fn loglik_dm_latent(v: &LatentCounts, m: &[f64], p: &ModelParams) -> Result<f64> {
    p.require(Family::Dm, "loglik_dm_latent")?;
    check_latent(v, p)?;
    check_simplex(m, p.k)?;
    let c = v.component_totals();
    let comp: f64 = c.iter().zip(m).map(|(&n, &x)| xlogy(n as f64, x)).sum();
    Ok(dirichlet_log_density(m, &p.alpha) + log_total_factorial(v, p) + comp + latent_word_terms(v, p))
}

/// `ln p(V)` of the Dirichlet-multinomial model with `m` integrated out
/// (grouped if `p` has groups).
pub fn loglik_dm_marginal(v: &LatentCounts, p: &ModelParams) -> Result<f64> {
    p.require(Family::Dm, "loglik_dm_marginal")?;
    check_latent(v, p)?;
    let c = v.component_totals();
    let asum = p.alpha_sum();
    let mut s = log_total_factorial(v, p) + ln_gamma_unchecked(asum)
        - ln_gamma_unchecked(v.total() as f64 + asum);
    for k in 0..p.k {
        s += ln_gamma_unchecked(c[k] as f64 + p.alpha[k]) - ln_gamma_unchecked(p.alpha[k]);
    }
    Ok(s + latent_word_terms(v, p))
}

/// Posterior probability that a CGP score is exactly zero given `c_k = 0`.
pub fn cgp_zero_spike_probability(rho: f64, alpha: f64, beta: f64) -> f64 {
    if rho == 0.0 {
        return 0.0;
    }
    if rho == 1.0 {
        return 1.0;
    }
    // ρ(1+β)^α / [(1−ρ)β^α + ρ(1+β)^α], evaluated via the ratio (β/(1+β))^α.
    let slab = (1.0 - rho) * (alpha * (beta / (1.0 + beta)).ln()).exp();
    rho / (rho + slab)
}

/// Posterior mean of the GP or CGP scores given component counts `c`.
///
/// For CGP, a component with `c_k > 0` cannot be in the spike, so its mean is
/// the GP value; with `c_k = 0` the slab mean is weighted by the posterior
/// probability of the slab.
pub fn posterior_mean_scores(c: &[u64], p: &ModelParams) -> Result<Vec<f64>> {
    check_len("c", c.len(), p.k)?;
    match p.family {
        Family::Dm => Err(Error::Unsupported(
            "posterior_mean_scores is for gp/cgp; use dirichlet_mean for dm".into(),
        )),
        Family::Gp => Ok((0..p.k)
            .map(|k| (c[k] as f64 + p.alpha[k]) / (1.0 + p.beta[k]))
            .collect()),
        Family::Cgp => Ok((0..p.k)
            .map(|k| {
                let gp = (c[k] as f64 + p.alpha[k]) / (1.0 + p.beta[k]);
                if c[k] > 0 {
                    gp
                } else {
                    (1.0 - cgp_zero_spike_probability(p.rho[k], p.alpha[k], p.beta[k])) * gp
                }
            })
            .collect()),
    }
}

/// Posterior mean of Dirichlet proportions, `(c_k + α_k) / (L + Σα)`.
pub fn dirichlet_mean(c: &[u64], alpha: &[f64]) -> Vec<f64> {
    let total = c.iter().sum::<u64>() as f64 + alpha.iter().sum::<f64>();
    c.iter().zip(alpha).map(|(&n, &a)| (n as f64 + a) / total).collect()
}

#[cfg(test)]
mod tests;
