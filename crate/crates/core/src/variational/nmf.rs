//! Non-negative matrix factorization with the KL (Poisson) multiplicative
//! updates. This is the maximum-likelihood GP fit with `α = β = 0`, scores
//! treated as parameters.

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::mathfn::{ln_factorial, Rng};

const FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct NmfConfig {
    pub k: usize,
    pub max_iter: usize,
    /// Stop once the log-likelihood changes by less than `tol · |loglik|`; 0 runs all iterations.
    pub tol: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct NmfFit {
    /// `J × K` row-major, each column summing to one.
    pub theta: Vec<f64>,
    /// Per-document scores, rescaled to match the normalized Θ.
    pub scores: Vec<Vec<f64>>,
    /// Poisson log-likelihood at the start and after every iteration.
    pub loglik: Vec<f64>,
    pub converged: bool,
}

/// Rates `Σ_k θ_jk l_k` for each observed word, floored.
fn rates(theta: &[f64], k: usize, entries: &[(usize, u32)], l: &[f64]) -> Vec<f64> {
    entries
        .iter()
        .map(|&(w, _)| {
            let r: f64 = theta[w * k..(w + 1) * k].iter().zip(l).map(|(t, x)| t * x).sum();
            r.max(FLOOR)
        })
        .collect()
}

fn column_sums(theta: &[f64], k: usize) -> Vec<f64> {
    let mut s = vec![0.0; k];
    for row in theta.chunks(k) {
        for (a, b) in s.iter_mut().zip(row) {
            *a += b;
        }
    }
    s
}

/// `Σ_i ln p(w_i | Θ, l_i)` with Poisson counts and unnormalized Θ.
pub(crate) fn poisson_loglik(corpus: &Corpus, theta: &[f64], k: usize, scores: &[Vec<f64>]) -> f64 {
    let colsum = column_sums(theta, k);
    let mut ll = 0.0;
    for (d, l) in corpus.docs().iter().zip(scores) {
        let r = rates(theta, k, d.entries(), l);
        for (&(_, n), rate) in d.entries().iter().zip(&r) {
            ll += n as f64 * rate.ln() - ln_factorial(n as u64);
        }
        ll -= colsum.iter().zip(l).map(|(s, x)| s * x).sum::<f64>();
    }
    ll
}

pub fn fit_nmf(corpus: &Corpus, config: &NmfConfig) -> Result<NmfFit> {
    let (j, k) = (corpus.num_words(), config.k);
    if k == 0 || j == 0 {
        return Err(Error::Validation("NMF needs K ≥ 1 and a nonempty vocabulary".into()));
    }
    let mut rng = Rng::new(config.seed);
    let mut theta: Vec<f64> = (0..j * k).map(|_| rng.uniform_range(0.5, 1.5)).collect();
    let mut scores: Vec<Vec<f64>> = (0..corpus.num_docs())
        .map(|_| (0..k).map(|_| rng.uniform_range(0.5, 1.5)).collect())
        .collect();
    let mut loglik = vec![poisson_loglik(corpus, &theta, k, &scores)];
    let mut converged = false;
    let mut numer = vec![0.0; j * k];
    for _ in 0..config.max_iter {
        let colsum = column_sums(&theta, k);
        for (d, l) in corpus.docs().iter().zip(scores.iter_mut()) {
            let r = rates(&theta, k, d.entries(), l);
            let mut acc = vec![0.0; k];
            for (&(w, n), rate) in d.entries().iter().zip(&r) {
                let ratio = n as f64 / rate;
                for (a, t) in acc.iter_mut().zip(&theta[w * k..(w + 1) * k]) {
                    *a += t * ratio;
                }
            }
            for c in 0..k {
                l[c] *= acc[c] / colsum[c].max(FLOOR);
            }
        }
        numer.iter_mut().for_each(|x| *x = 0.0);
        let mut score_sum = vec![0.0; k];
        for (d, l) in corpus.docs().iter().zip(&scores) {
            let r = rates(&theta, k, d.entries(), l);
            for (&(w, n), rate) in d.entries().iter().zip(&r) {
                let ratio = n as f64 / rate;
                for (x, s) in numer[w * k..(w + 1) * k].iter_mut().zip(l) {
                    *x += s * ratio;
                }
            }
            for (a, s) in score_sum.iter_mut().zip(l) {
                *a += s;
            }
        }
        for (i, t) in theta.iter_mut().enumerate() {
            *t *= numer[i] / score_sum[i % k].max(FLOOR);
        }
        let ll = poisson_loglik(corpus, &theta, k, &scores);
        let prev = *loglik.last().unwrap();
        loglik.push(ll);
        if !ll.is_finite() {
            return Err(Error::Invariant(format!("NMF log-likelihood became {ll}")));
        }
        if config.tol > 0.0 && (ll - prev).abs() <= config.tol * ll.abs() {
            converged = true;
            break;
        }
    }
    let psi = column_sums(&theta, k);
    for (i, t) in theta.iter_mut().enumerate() {
        *t /= psi[i % k].max(FLOOR);
    }
    for l in scores.iter_mut() {
        for (x, p) in l.iter_mut().zip(&psi) {
            *x *= p;
        }
    }
    Ok(NmfFit {
        theta,
        scores,
        loglik,
        converged,
    })
}

/// Generalized KL divergence `Σ w ln(w / r) − w + r` between the counts and
/// the rates `r = Θ l`; zero when the factorization reproduces the data.
pub fn nmf_divergence(corpus: &Corpus, theta: &[f64], scores: &[Vec<f64>]) -> f64 {
    let k = scores.first().map_or(1, Vec::len);
    let colsum = column_sums(theta, k);
    let mut div = 0.0;
    for (d, l) in corpus.docs().iter().zip(scores) {
        let r = rates(theta, k, d.entries(), l);
        for (&(_, n), rate) in d.entries().iter().zip(&r) {
            let w = n as f64;
            div += w * (w / rate).ln() - w;
        }
        div += colsum.iter().zip(l).map(|(s, x)| s * x).sum::<f64>();
    }
    div
}

/// Distance from a fixed point of the normalized rewrite rules
///
/// `l_k ← l_k Σ_j θ_jk w_j / Σ_k θ_jk l_k` and
/// `θ_jk ∝ θ_jk Σ_i l_ik w_ij / Σ_k θ_jk l_ik` (columns normalized).
///
/// Returns `(max |Δθ|, max_i max_k |Δl_ik| / max(1, L_i))`.
pub fn nmf_fixed_point_residuals(corpus: &Corpus, theta: &[f64], scores: &[Vec<f64>]) -> (f64, f64) {
    let k = scores.first().map_or(1, Vec::len);
    let j = corpus.num_words();
    let mut numer = vec![0.0; j * k];
    let mut score_res: f64 = 0.0;
    for (d, l) in corpus.docs().iter().zip(scores) {
        let r = rates(theta, k, d.entries(), l);
        let mut acc = vec![0.0; k];
        for (&(w, n), rate) in d.entries().iter().zip(&r) {
            let ratio = n as f64 / rate;
            for c in 0..k {
                acc[c] += theta[w * k + c] * ratio;
                numer[w * k + c] += theta[w * k + c] * l[c] * ratio;
            }
        }
        let scale = (d.len() as f64).max(1.0);
        for c in 0..k {
            score_res = score_res.max((l[c] * acc[c] - l[c]).abs() / scale);
        }
    }
    let colsum = column_sums(&numer, k);
    let theta_res = numer
        .iter()
        .zip(theta)
        .enumerate()
        .map(|(i, (x, t))| (x / colsum[i % k].max(FLOOR) - t).abs())
        .fold(0.0, f64::max);
    (theta_res, score_res)
}
