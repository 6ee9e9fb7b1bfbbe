//! Helpers shared by unit tests.

use crate::corpus::Document;
use crate::mathfn::{log_sum_exp, Rng};
use crate::model::{Family, LatentCounts, ModelParams};

pub fn doc(counts: &[u32]) -> Document {
    Document::from_counts(counts.iter().enumerate().map(|(w, &c)| (w, c)))
}

/// Model with the given row-major Θ (rows = words).
pub fn params(family: Family, theta: &[&[f64]], alpha: &[f64], beta: &[f64], rho: &[f64]) -> ModelParams {
    let j = theta.len();
    let p = ModelParams {
        family,
        k: alpha.len(),
        num_words: j,
        theta: theta.concat(),
        alpha: alpha.to_vec(),
        beta: if family == Family::Dm { vec![] } else { beta.to_vec() },
        rho: if family == Family::Cgp { rho.to_vec() } else { vec![] },
        gamma: vec![0.5; j],
        groups: None,
    };
    p.validate().unwrap();
    p
}

/// Random model with Dirichlet(1) columns and priors in `[lo, hi)`.
pub fn random_params(family: Family, j: usize, k: usize, lo: f64, hi: f64, rng: &mut Rng) -> ModelParams {
    let mut p = ModelParams::new(
        family,
        j,
        (0..k).map(|_| rng.uniform_range(lo, hi)).collect(),
        if family == Family::Dm { vec![] } else { (0..k).map(|_| rng.uniform_range(lo, hi)).collect() },
        if family == Family::Cgp { (0..k).map(|_| rng.uniform_range(0.0, 0.9)).collect() } else { vec![] },
        vec![0.5; j],
        None,
    )
    .unwrap();
    p.theta = crate::synth::random_theta(j, k, 1.0, None, rng).unwrap();
    p
}

pub fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    (0..=n)
        .flat_map(|first| {
            compositions(n - first, k - 1).into_iter().map(move |mut rest| {
                rest.insert(0, first);
                rest
            })
        })
        .collect()
}

pub fn all_latents(d: &Document, k: usize) -> Vec<LatentCounts> {
    let mut out = vec![LatentCounts { k, rows: vec![] }];
    for &(w, n) in d.entries() {
        out = out
            .into_iter()
            .flat_map(|v| {
                compositions(n as u64, k).into_iter().map(move |row| {
                    let mut v2 = v.clone();
                    v2.rows.push((w, row));
                    v2
                })
            })
            .collect();
    }
    out
}

/// `ln p(w)` by summing a latent-matrix marginal over every consistent `V`.
pub fn enumerated_marginal(d: &Document, p: &ModelParams) -> f64 {
    let f = match p.family {
        Family::Gp => crate::model::loglik_gp_marginal,
        Family::Cgp => crate::model::loglik_cgp_marginal,
        Family::Dm => crate::model::loglik_dm_marginal,
    };
    let terms: Vec<f64> = all_latents(d, p.k).iter().map(|v| f(v, p).unwrap()).collect();
    log_sum_exp(&terms)
}
