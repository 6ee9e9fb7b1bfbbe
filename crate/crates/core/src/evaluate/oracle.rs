//! Exact `ln p(w | Θ, priors)` by enumerating every latent table `V`.
//!
//! Deliberately shares nothing with the likelihood code except `ln_gamma`,
//! so agreement between the two is a real check.

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::mathfn::ln_gamma;
use crate::model::{Family, ModelParams};

const MAX_CELLS: usize = 6;
const MAX_TOKENS: u64 = 4;

/// All ways to write `n` as an ordered sum of `k` nonnegative parts.
fn splits(n: u64, k: usize) -> Vec<Vec<u64>> {
    if k == 1 {
        return vec![vec![n]];
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in splits(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn lfact(n: u64) -> Result<f64> {
    ln_gamma(n as f64 + 1.0)
}

/// Component part of `ln p(V)` given column totals `c` and `L_g` per group.
fn component_part(c: &[u64], group_totals: &[u64], p: &ModelParams) -> Result<f64> {
    let mut s = 0.0;
    match p.family {
        Family::Dm => {
            let asum: f64 = p.alpha.iter().sum();
            let l: u64 = c.iter().sum();
            for &t in group_totals {
                s += lfact(t)?;
            }
            s += ln_gamma(asum)? - ln_gamma(l as f64 + asum)?;
            for (&n, &a) in c.iter().zip(&p.alpha) {
                s += ln_gamma(n as f64 + a)? - ln_gamma(a)?;
            }
        }
        Family::Gp | Family::Cgp => {
            for k in 0..p.k {
                let (a, b, n) = (p.alpha[k], p.beta[k], c[k] as f64);
                // ∫ l^c e^{-l} Gamma(l; a, b) dl / c!, the c! sitting in the word part.
                let gp = ln_gamma(n + a)? - ln_gamma(a)? + a * b.ln() - (n + a) * (1.0 + b).ln();
                s += if p.family == Family::Cgp {
                    let r = p.rho[k];
                    let slab = (1.0 - r) * gp.exp();
                    if c[k] == 0 {
                        (slab + r).ln()
                    } else {
                        slab.ln()
                    }
                } else {
                    gp
                };
            }
        }
    }
    Ok(s)
}

/// Exact log-marginal of `doc`. Refuses instances with `J·K > 6` or `L > 4`.
pub fn brute_force_marginal(doc: &Document, p: &ModelParams) -> Result<f64> {
    if p.num_words * p.k > MAX_CELLS || doc.len() > MAX_TOKENS {
        return Err(Error::TooLarge(format!(
            "J·K = {} (max {MAX_CELLS}), L = {} (max {MAX_TOKENS})",
            p.num_words * p.k,
            doc.len()
        )));
    }
    if let Some(&(w, _)) = doc.entries().iter().find(|(w, _)| *w >= p.num_words) {
        return Err(Error::OutOfVocabulary { ids: vec![w + 1] });
    }
    let k = p.k;
    let mut group_totals = vec![0u64; p.num_groups()];
    for &(w, n) in doc.entries() {
        group_totals[p.groups.as_ref().map_or(0, |g| g.group_of(w))] += n as u64;
    }
    let options: Vec<Vec<Vec<u64>>> = doc.entries().iter().map(|&(_, n)| splits(n as u64, k)).collect();
    let mut terms = Vec::new();
    let mut pick = vec![0usize; options.len()];
    loop {
        let mut c = vec![0u64; k];
        let mut words = 0.0;
        let mut possible = true;
        for (e, &(w, _)) in doc.entries().iter().enumerate() {
            for (j, &v) in options[e][pick[e]].iter().enumerate() {
                if v == 0 {
                    continue;
                }
                let t = p.theta[w * k + j];
                if t == 0.0 {
                    possible = false;
                }
                c[j] += v;
                words += v as f64 * t.ln() - lfact(v)?;
            }
        }
        if possible {
            terms.push(words + component_part(&c, &group_totals, p)?);
        }
        // Odometer over the per-word splits.
        let mut e = 0;
        while e < pick.len() {
            pick[e] += 1;
            if pick[e] < options[e].len() {
                break;
            }
            pick[e] = 0;
            e += 1;
        }
        if e == pick.len() {
            break;
        }
    }
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(max);
    }
    Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
}
