//! Mean-field variational inference for the GP and DM families, plus NMF.
//!
//! Each document keeps a K-vector `a` (gamma shapes for GP, Dirichlet
//! parameters for DM); GP also keeps the rates `b = 1 + β`. A cycle updates
//! every document once against the current Θ and accumulates the expected
//! word-component counts, then re-estimates Θ.

mod nmf;
mod states;

pub use nmf::{fit_nmf, nmf_divergence, nmf_fixed_point_residuals, NmfConfig, NmfFit};
pub use states::{load_states, save_states};

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use crate::corpus::{log_multinomial_coeff, Corpus, Document, Groups};
use crate::error::{Error, Result};
use crate::mathfn::{digamma_unchecked, ln_factorial, ln_gamma_unchecked};
use crate::model::{normalize_theta, theta_block_sums, Family, ModelParams};
use crate::parallel::Pool;

/// Documents handed to the pool at a time. Keeps the per-batch buffer small.
const BATCH: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalConfig {
    pub max_cycles: usize,
    /// Stop once the total bound changes by less than `tol · |bound|`.
    pub tol: f64,
    pub threads: usize,
}

impl Default for VariationalConfig {
    fn default() -> Self {
        VariationalConfig {
            max_cycles: 200,
            tol: 1e-6,
            threads: 1,
        }
    }
}

/// Per-document variational parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationalState {
    pub a: Vec<f64>,
    /// Gamma rates (GP only; empty for DM).
    pub b: Vec<f64>,
    /// Lower bound on `ln p(w)` at the last evaluation.
    pub bound: f64,
}

impl VariationalState {
    /// Starting point: `a_k = (Σα + L)/K` for GP, `a_k = 0.5` for DM.
    pub fn initial(doc: &Document, p: &ModelParams) -> Result<Self> {
        match p.family {
            Family::Gp => Ok(VariationalState {
                a: vec![(p.alpha_sum() + doc.len() as f64) / p.k as f64; p.k],
                b: p.beta.iter().map(|b| 1.0 + b).collect(),
                bound: f64::NEG_INFINITY,
            }),
            Family::Dm => Ok(VariationalState {
                a: vec![0.5; p.k],
                b: vec![],
                bound: f64::NEG_INFINITY,
            }),
            Family::Cgp => Err(cgp_unsupported()),
        }
    }

    /// Posterior mean of the scores under `q`: `a/b` for GP, `a/Σa` for DM.
    pub fn mean_scores(&self) -> Vec<f64> {
        if self.b.is_empty() {
            let s: f64 = self.a.iter().sum();
            self.a.iter().map(|a| a / s).collect()
        } else {
            self.a.iter().zip(&self.b).map(|(a, b)| a / b).collect()
        }
    }
}

fn cgp_unsupported() -> Error {
    Error::Unsupported("variational inference is available for gp and dm only".into())
}

/// Result of one document update.
#[derive(Debug, Clone)]
pub struct EStep {
    pub state: VariationalState,
    /// Bound evaluated at the incoming state, before `a` was updated.
    pub bound: f64,
    /// `w_j n_jk`, one K-block per entry of `doc.entries()`.
    pub expected_counts: Vec<f64>,
}

fn check_state(state: &VariationalState, p: &ModelParams) -> Result<()> {
    let want_b = if p.family == Family::Gp { p.k } else { 0 };
    if state.a.len() != p.k || state.b.len() != want_b {
        return Err(Error::Dimension(format!(
            "state has {} shapes and {} rates, model needs {} and {}",
            state.a.len(),
            state.b.len(),
            p.k,
            want_b
        )));
    }
    if let Some(a) = state.a.iter().find(|a| !(**a > 0.0 && a.is_finite())) {
        return Err(Error::domain("variational state", format!("a = {a}, need positive")));
    }
    if let Some(b) = state.b.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(Error::domain("variational state", format!("b = {b}, need positive")));
    }
    Ok(())
}

/// `E[ln l_k]` (GP) or `E[ln m_k]` (DM) under the state.
fn expected_logs(state: &VariationalState) -> Vec<f64> {
    if state.b.is_empty() {
        let psi_sum = digamma_unchecked(state.a.iter().sum());
        state.a.iter().map(|&a| digamma_unchecked(a) - psi_sum).collect()
    } else {
        state
            .a
            .iter()
            .zip(&state.b)
            .map(|(&a, &b)| digamma_unchecked(a) - b.ln())
            .collect()
    }
}

/// Prior-versus-posterior part of the bound (everything except `Σ w ln Z`).
fn bound_prior_terms(doc: &Document, p: &ModelParams, state: &VariationalState, elog: &[f64]) -> f64 {
    let mut s = 0.0;
    match p.family {
        Family::Gp => {
            s -= doc.entries().iter().map(|&(_, n)| ln_factorial(n as u64)).sum::<f64>();
            for k in 0..p.k {
                let (alpha, beta, a, b) = (p.alpha[k], p.beta[k], state.a[k], state.b[k]);
                s -= ln_gamma_unchecked(alpha) + a * b.ln() - ln_gamma_unchecked(a) - alpha * beta.ln();
                s += (alpha - a) * elog[k];
            }
        }
        _ => {
            s += match &p.groups {
                None => log_multinomial_coeff(doc),
                Some(g) => g.split(doc).iter().map(log_multinomial_coeff).sum(),
            };
            let asum: f64 = state.a.iter().sum();
            s -= ln_gamma_unchecked(asum) - ln_gamma_unchecked(p.alpha_sum());
            for k in 0..p.k {
                s -= ln_gamma_unchecked(p.alpha[k]) - ln_gamma_unchecked(state.a[k]);
                s += (p.alpha[k] - state.a[k]) * elog[k];
            }
        }
    }
    s
}

/// Responsibilities `n_jk ∝ θ_jk exp(elog_k)` for every observed word.
/// Calls `visit(entry index, count, ln Z_j, n_j·)`.
fn responsibilities(
    doc: &Document,
    p: &ModelParams,
    elog: &[f64],
    mut visit: impl FnMut(usize, u32, f64, &[f64]),
) -> Result<()> {
    let mut u = vec![0.0; p.k];
    for (e, &(w, n)) in doc.entries().iter().enumerate() {
        let row = p.theta_row(w);
        let mut max = f64::NEG_INFINITY;
        for k in 0..p.k {
            u[k] = if row[k] > 0.0 { row[k].ln() + elog[k] } else { f64::NEG_INFINITY };
            max = max.max(u[k]);
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::Degenerate { word: w + 1 });
        }
        let mut z = 0.0;
        for x in u.iter_mut() {
            *x = (*x - max).exp();
            z += *x;
        }
        for x in u.iter_mut() {
            *x /= z;
        }
        visit(e, n, max + z.ln(), &u);
    }
    Ok(())
}

fn update(doc: &Document, p: &ModelParams, state: &VariationalState, with_counts: bool) -> Result<EStep> {
    p.check_doc(doc)?;
    check_state(state, p)?;
    let elog = expected_logs(state);
    let mut bound = bound_prior_terms(doc, p, state, &elog);
    let mut a = p.alpha.clone();
    let mut expected = if with_counts { vec![0.0; doc.nnz() * p.k] } else { Vec::new() };
    responsibilities(doc, p, &elog, |e, n, ln_z, resp| {
        let n = n as f64;
        bound += n * ln_z;
        for k in 0..resp.len() {
            a[k] += n * resp[k];
        }
        if with_counts {
            for (dst, r) in expected[e * resp.len()..(e + 1) * resp.len()].iter_mut().zip(resp) {
                *dst = n * r;
            }
        }
    })?;
    let b = match p.family {
        Family::Gp => p.beta.iter().map(|b| 1.0 + b).collect(),
        _ => vec![],
    };
    Ok(EStep {
        state: VariationalState { a, b, bound },
        bound,
        expected_counts: expected,
    })
}

/// One Gamma-Poisson document update: responsibilities from the incoming
/// state, the bound at that state, then `a_k = α_k + Σ_j w_j n_jk`, `b_k = 1 + β_k`.
pub fn e_step_gp(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<EStep> {
    p.require(Family::Gp, "e_step_gp")?;
    update(doc, p, state, true)
}

/// One Dirichlet-multinomial document update (grouped if the model has groups).
pub fn e_step_dm(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<EStep> {
    p.require(Family::Dm, "e_step_dm")?;
    update(doc, p, state, true)
}

pub fn e_step(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<EStep> {
    match p.family {
        Family::Gp => e_step_gp(doc, p, state),
        Family::Dm => e_step_dm(doc, p, state),
        Family::Cgp => Err(cgp_unsupported()),
    }
}

fn bound_only(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<f64> {
    p.check_doc(doc)?;
    check_state(state, p)?;
    let elog = expected_logs(state);
    let mut bound = bound_prior_terms(doc, p, state, &elog);
    responsibilities(doc, p, &elog, |_, n, ln_z, _| bound += n as f64 * ln_z)?;
    Ok(bound)
}

/// Lower bound on `ln p(w | Θ, α, β)` for a Gamma-Poisson document at `state`.
pub fn bound_gp(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<f64> {
    p.require(Family::Gp, "bound_gp")?;
    bound_only(doc, p, state)
}

/// Lower bound on `ln p(w | Θ, α)` for a Dirichlet-multinomial document at `state`.
pub fn bound_dm(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<f64> {
    p.require(Family::Dm, "bound_dm")?;
    bound_only(doc, p, state)
}

pub fn bound(doc: &Document, p: &ModelParams, state: &VariationalState) -> Result<f64> {
    match p.family {
        Family::Cgp => Err(cgp_unsupported()),
        _ => bound_only(doc, p, state),
    }
}

/// `θ_jk ∝ totals_jk + γ_j`, normalized per column or per group.
pub fn m_step(totals: &[f64], gamma: &[f64], k: usize, groups: Option<&Groups>) -> Result<Vec<f64>> {
    let j = gamma.len();
    if totals.len() != j * k {
        return Err(Error::Dimension(format!(
            "totals have {} entries, expected {}×{}",
            totals.len(),
            j,
            k
        )));
    }
    if let Some(x) = totals.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
        return Err(Error::domain("m_step", format!("totals must be nonnegative, got {x}")));
    }
    let mut theta: Vec<f64> = totals
        .iter()
        .enumerate()
        .map(|(i, t)| t + gamma[i / k])
        .collect();
    if let Some((g, c, _)) = theta_block_sums(&theta, j, k, groups)
        .into_iter()
        .find(|&(_, _, m)| m <= 0.0)
    {
        return Err(Error::domain(
            "m_step",
            format!("column {} (group {}) has no mass and no prior", c + 1, g + 1),
        ));
    }
    normalize_theta(&mut theta, j, k, groups);
    Ok(theta)
}

/// `Σ_jk γ_j ln θ_jk`. The M-step `θ_jk ∝ T_jk + γ_j` maximizes the summed
/// document bounds plus this term, not the bounds alone. Zero entries of a
/// user-supplied start are skipped; every M-step output is positive.
pub fn theta_penalty(p: &ModelParams) -> f64 {
    let k = p.k;
    p.theta
        .iter()
        .enumerate()
        .filter(|(_, &t)| t > 0.0)
        .map(|(i, t)| p.gamma[i / k] * t.ln())
        .sum()
}

/// One row of the per-cycle report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub cycle: usize,
    /// Sum of document bounds plus [`theta_penalty`], both at the Θ the
    /// cycle started from. This is the quantity each cycle cannot decrease.
    pub total_bound: f64,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub rows: Vec<ReportRow>,
    pub converged: bool,
    /// Total bound of the returned states under the returned Θ.
    pub final_bound: f64,
}

impl FitReport {
    /// Tab-separated `cycle, total_bound`, plus `wall_seconds` when `timing`
    /// is set, preceded by `header` lines.
    pub fn write_tsv<W: Write>(&self, out: &mut W, header: &str, timing: bool) -> std::io::Result<()> {
        if !header.is_empty() {
            writeln!(out, "{header}")?;
        }
        if timing {
            writeln!(out, "cycle\ttotal_bound\twall_seconds")?;
        } else {
            writeln!(out, "cycle\ttotal_bound")?;
        }
        for r in &self.rows {
            if timing {
                writeln!(out, "{}\t{}\t{:.6}", r.cycle, r.total_bound, r.wall_seconds)?;
            } else {
                writeln!(out, "{}\t{}", r.cycle, r.total_bound)?;
            }
        }
        writeln!(out, "final\t{}", self.final_bound)
    }
}

#[derive(Debug, Clone)]
pub struct VariationalFit {
    pub params: ModelParams,
    pub states: Vec<VariationalState>,
    pub report: FitReport,
}

/// Run full cycles until the bound settles or `max_cycles` is reached.
///
/// `states` resumes from stored per-document parameters; otherwise every
/// document starts from [`VariationalState::initial`].
pub fn fit_variational(
    corpus: &Corpus,
    init: &ModelParams,
    config: &VariationalConfig,
    states: Option<Vec<VariationalState>>,
) -> Result<VariationalFit> {
    if init.family == Family::Cgp {
        return Err(cgp_unsupported());
    }
    init.validate()?;
    if corpus.num_words() != init.num_words {
        return Err(Error::Dimension(format!(
            "corpus has {} word ids, model has {}",
            corpus.num_words(),
            init.num_words
        )));
    }
    let mut params = init.clone();
    let docs = corpus.docs();
    let mut states = match states {
        Some(s) if s.len() == docs.len() => s,
        Some(s) => {
            return Err(Error::Dimension(format!(
                "{} stored states for {} documents",
                s.len(),
                docs.len()
            )))
        }
        None => docs
            .iter()
            .map(|d| VariationalState::initial(d, &params))
            .collect::<Result<_>>()?,
    };
    let pool = Pool::new(config.threads)?;
    let (j, k) = (params.num_words, params.k);
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut converged = false;
    let mut totals = vec![0.0; j * k];
    for cycle in 1..=config.max_cycles {
        totals.iter_mut().for_each(|t| *t = 0.0);
        let mut total_bound = 0.0;
        for (doc_batch, state_batch) in docs.chunks(BATCH).zip(states.chunks_mut(BATCH)) {
            let steps = pool.map(doc_batch, state_batch, |_, d, s| {
                let step = update(d, &params, s, true)?;
                *s = step.state;
                Ok((step.bound, step.expected_counts))
            })?;
            for (d, (b, counts)) in doc_batch.iter().zip(steps) {
                total_bound += b;
                for (e, &(w, _)) in d.entries().iter().enumerate() {
                    for (t, c) in totals[w * k..(w + 1) * k].iter_mut().zip(&counts[e * k..(e + 1) * k]) {
                        *t += c;
                    }
                }
            }
        }
        total_bound += theta_penalty(&params);
        params.theta = m_step(&totals, &params.gamma, k, params.groups.as_ref())?;
        let prev = rows.last().map(|r: &ReportRow| r.total_bound);
        rows.push(ReportRow {
            cycle,
            total_bound,
            wall_seconds: start.elapsed().as_secs_f64(),
        });
        if !total_bound.is_finite() {
            return Err(Error::Invariant(format!("total bound became {total_bound} at cycle {cycle}")));
        }
        if let Some(prev) = prev {
            if (total_bound - prev).abs() <= config.tol * total_bound.abs() {
                converged = true;
                break;
            }
        }
    }
    let final_bound = evaluate_states(corpus, &params, &mut states, &pool)?;
    Ok(VariationalFit {
        params,
        states,
        report: FitReport {
            rows,
            converged,
            final_bound,
        },
    })
}

/// Recompute every state's bound under `p` without updating it; returns the sum.
fn evaluate_states(
    corpus: &Corpus,
    p: &ModelParams,
    states: &mut [VariationalState],
    pool: &Pool,
) -> Result<f64> {
    let mut total = 0.0;
    for (doc_batch, state_batch) in corpus.docs().chunks(BATCH).zip(states.chunks_mut(BATCH)) {
        let bounds = pool.map(doc_batch, state_batch, |_, d, s| {
            s.bound = bound(d, p, s)?;
            Ok(s.bound)
        })?;
        total += bounds.iter().sum::<f64>();
    }
    Ok(total)
}

/// Sum of per-document bounds of stored states under `p`, in document order.
pub fn total_bound(corpus: &Corpus, p: &ModelParams, states: &[VariationalState], threads: usize) -> Result<f64> {
    if states.len() != corpus.num_docs() {
        return Err(Error::Dimension(format!(
            "{} states for {} documents",
            states.len(),
            corpus.num_docs()
        )));
    }
    let mut states = states.to_vec();
    evaluate_states(corpus, p, &mut states, &Pool::new(threads)?)
}

/// Iterate one document's update with Θ fixed until the bound settles.
pub fn infer_variational(
    doc: &Document,
    p: &ModelParams,
    max_iter: usize,
    tol: f64,
) -> Result<VariationalState> {
    let mut state = VariationalState::initial(doc, p)?;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..max_iter.max(1) {
        let step = update(doc, p, &state, false)?;
        state = step.state;
        if (step.bound - prev).abs() <= tol * step.bound.abs() {
            break;
        }
        prev = step.bound;
    }
    state.bound = bound(doc, p, &state)?;
    Ok(state)
}

pub fn write_report(report: &FitReport, path: impl AsRef<Path>, header: &str, timing: bool) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    report
        .write_tsv(&mut buf, header, timing)
        .and_then(|_| std::fs::write(path, buf))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[cfg(test)]
mod tests;
