use super::*;
use crate::corpus::{Corpus, Document};
use crate::mathfn::{digamma, integrate, ln_factorial, ln_gamma, Rng};
use crate::model::{loglik_dm_latent, loglik_gp_latent, LatentCounts};
use crate::synth::{generate, random_theta, DocLength};
use crate::testutil::{all_latents, doc, enumerated_marginal, params, random_params};

fn gp_state(a: &[f64], p: &ModelParams) -> VariationalState {
    VariationalState {
        a: a.to_vec(),
        b: p.beta.iter().map(|b| 1.0 + b).collect(),
        bound: 0.0,
    }
}

fn dm_state(a: &[f64]) -> VariationalState {
    VariationalState { a: a.to_vec(), b: vec![], bound: 0.0 }
}

#[test]
fn gp_single_component_takes_all_counts() {
    let p = params(Family::Gp, &[&[0.4], &[0.6]], &[1.5], &[2.0], &[]);
    let d = doc(&[3, 4]);
    let s = VariationalState::initial(&d, &p).unwrap();
    assert_eq!(s.a, vec![8.5]);
    let step = e_step_gp(&d, &p, &s).unwrap();
    assert_eq!(step.state.a, vec![1.5 + 7.0]);
    assert_eq!(step.state.b, vec![3.0]);
    assert_eq!(step.expected_counts, vec![3.0, 4.0]);
}

#[test]
fn symmetric_start_gives_uniform_responsibilities() {
    let p = params(Family::Gp, &[&[0.3, 0.3, 0.3], &[0.7, 0.7, 0.7]], &[1.0; 3], &[1.0; 3], &[]);
    let d = doc(&[2, 5]);
    let step = e_step_gp(&d, &p, &VariationalState::initial(&d, &p).unwrap()).unwrap();
    for (e, &(_, n)) in d.entries().iter().enumerate() {
        for k in 0..3 {
            assert!((step.expected_counts[e * 3 + k] - n as f64 / 3.0).abs() < 1e-15);
        }
    }
    let q = params(Family::Dm, &[&[0.3, 0.3], &[0.7, 0.7]], &[0.5, 0.5], &[], &[]);
    let step = e_step_dm(&d, &q, &VariationalState::initial(&d, &q).unwrap()).unwrap();
    assert!(step.expected_counts.chunks(2).all(|c| (c[0] - c[1]).abs() < 1e-15));
}

#[test]
fn gp_hand_update() {
    let p = params(Family::Gp, &[&[0.9, 0.1], &[0.1, 0.9]], &[1.0, 1.0], &[1.0, 1.0], &[]);
    let step = e_step_gp(&doc(&[3, 0]), &p, &gp_state(&[2.0, 2.0], &p)).unwrap();
    assert!((step.state.a[0] - 3.7).abs() < 1e-14);
    assert!((step.state.a[1] - 1.3).abs() < 1e-14);
}

#[test]
fn zero_weight_word_is_degenerate() {
    let p = params(Family::Gp, &[&[1.0, 0.5], &[0.0, 0.5]], &[1.0, 1.0], &[1.0, 1.0], &[]);
    let mut q = p.clone();
    q.theta = vec![1.0, 1.0, 0.0, 0.0];
    let err = e_step_gp(&doc(&[1, 1]), &q, &gp_state(&[1.0, 1.0], &q)).unwrap_err();
    assert!(matches!(err, Error::Degenerate { word: 2 }));
    assert!(e_step_gp(&doc(&[1, 1]), &p, &gp_state(&[1.0, 1.0], &p)).is_ok());
}

#[test]
fn m_step_cases() {
    let t = m_step(&[0.0; 6], &[0.5; 3], 2, None).unwrap();
    assert!(t.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-15));
    let t = m_step(&[1.0, 3.0], &[0.5, 0.5], 1, None).unwrap();
    assert!((t[0] - 0.3).abs() < 1e-15 && (t[1] - 0.7).abs() < 1e-15);
    assert!(m_step(&[0.0, 0.0], &[0.0, 0.0], 1, None).is_err());
    let g = Groups::new(vec![0, 0, 1]).unwrap();
    let t = m_step(&[1.0, 3.0, 2.0], &[0.5; 3], 1, Some(&g)).unwrap();
    assert!((t[0] + t[1] - 1.0).abs() < 1e-15 && t[2] == 1.0);
}

#[test]
fn empty_document_bound_is_exact() {
    let p = params(Family::Gp, &[&[0.9, 0.1], &[0.1, 0.9]], &[0.7, 2.0], &[0.5, 3.0], &[]);
    let b = bound_gp(&Document::default(), &p, &gp_state(&p.alpha.clone(), &p)).unwrap();
    let want: f64 = (0..2).map(|k| p.alpha[k] * (p.beta[k] / (1.0 + p.beta[k])).ln()).sum();
    assert!((b - want).abs() < 1e-14);
}

#[test]
fn dm_single_component_bound_is_exact() {
    let p = params(Family::Dm, &[&[0.2], &[0.3], &[0.5]], &[0.8], &[], &[]);
    let d = doc(&[2, 0, 3]);
    let step = e_step_dm(&d, &p, &VariationalState::initial(&d, &p).unwrap()).unwrap();
    assert_eq!(step.state.a, vec![5.8]);
    let exact = (120.0f64 / 12.0).ln() + 2.0 * 0.2f64.ln() + 3.0 * 0.5f64.ln();
    assert!((step.bound - exact).abs() < 1e-13);
}

/// Responsibilities recomputed from scratch for the quadrature oracles.
fn resp(d: &Document, p: &ModelParams, elog: &[f64]) -> Vec<Vec<f64>> {
    d.entries()
        .iter()
        .map(|&(w, _)| {
            let u: Vec<f64> = (0..p.k).map(|k| p.theta_at(w, k) * elog[k].exp()).collect();
            let z: f64 = u.iter().sum();
            u.iter().map(|x| x / z).collect()
        })
        .collect()
}

fn ln_q_latent(v: &LatentCounts, d: &Document, n: &[Vec<f64>]) -> f64 {
    v.rows
        .iter()
        .zip(d.entries())
        .zip(n)
        .map(|(((_, row), &(_, w)), nj)| {
            ln_factorial(w as u64)
                + row
                    .iter()
                    .zip(nj)
                    .map(|(&x, &q)| if x == 0 { 0.0 } else { x as f64 * q.ln() - ln_factorial(x) })
                    .sum::<f64>()
        })
        .sum()
}

/// ELBO of a two-component DM document by enumeration over V and quadrature over m.
fn dm_elbo_by_quadrature(d: &Document, p: &ModelParams, a: &[f64]) -> f64 {
    let ln_beta = |x: f64| {
        ln_gamma(a[0] + a[1]).unwrap() - ln_gamma(a[0]).unwrap() - ln_gamma(a[1]).unwrap()
            + (a[0] - 1.0) * x.ln()
            + (a[1] - 1.0) * (1.0 - x).ln()
    };
    let expect = |f: &dyn Fn(f64) -> f64| {
        integrate(
            &|x: f64| if x <= 0.0 || x >= 1.0 { 0.0 } else { ln_beta(x).exp() * f(x) },
            0.0,
            1.0,
            1e-13,
        )
    };
    let elog: Vec<f64> = (0..2)
        .map(|k| expect(&|x: f64| if k == 0 { x.ln() } else { (1.0 - x).ln() }))
        .collect();
    let n = resp(d, p, &elog);
    let mut elbo = -expect(&ln_beta);
    for v in all_latents(d, 2) {
        let lq = ln_q_latent(&v, d, &n);
        let e = expect(&|x: f64| loglik_dm_latent(&v, &[x, 1.0 - x], p).unwrap());
        elbo += lq.exp() * (e - lq);
    }
    elbo
}

#[test]
fn dm_bound_matches_quadrature_elbo() {
    let p = params(Family::Dm, &[&[0.7, 0.2], &[0.3, 0.8]], &[1.5, 2.0], &[], &[]);
    for (counts, a) in [([1u32, 1], [1.7, 2.4]), ([2, 0], [3.0, 1.5]), ([1, 2], [2.2, 2.2])] {
        let d = doc(&counts);
        let b = bound_dm(&d, &p, &dm_state(&a)).unwrap();
        let q = dm_elbo_by_quadrature(&d, &p, &a);
        assert!((b - q).abs() < 1e-8, "{counts:?}: {b} vs {q}");
        assert!(b <= enumerated_marginal(&d, &p) + 1e-12);
    }
}

#[test]
fn dm_hand_bound() {
    // J = K = 2, w = (1, 1), a = (1, 1): E[ln m_k] = ψ(1) − ψ(2) = −1 and the
    // Dirichlet terms vanish when a = α.
    let p = params(Family::Dm, &[&[0.6, 0.2], &[0.4, 0.8]], &[1.0, 1.0], &[], &[]);
    let b = bound_dm(&doc(&[1, 1]), &p, &dm_state(&[1.0, 1.0])).unwrap();
    let z1 = (0.6f64 + 0.2) * (-1f64).exp();
    let z2 = (0.4f64 + 0.8) * (-1f64).exp();
    assert!((b - (2f64.ln() + z1.ln() + z2.ln())).abs() < 1e-14);
}

#[test]
fn gp_bound_matches_quadrature_elbo() {
    let p = params(Family::Gp, &[&[0.7, 0.2], &[0.3, 0.8]], &[1.5, 2.0], &[0.8, 1.2], &[]);
    let d = doc(&[1, 1]);
    let state = gp_state(&[2.0, 2.5], &p);
    let b = bound_gp(&d, &p, &state).unwrap();
    let (a, rate) = (&state.a, &state.b);
    let ln_q = |k: usize, x: f64| crate::mathfn::gamma_log_density(x, a[k], rate[k]);
    let e1 = |k: usize, f: &dyn Fn(f64) -> f64| {
        crate::mathfn::integrate_half_line(&|x: f64| ln_q(k, x).exp() * f(x), 1e-13)
    };
    let elog: Vec<f64> = (0..2).map(|k| e1(k, &|x: f64| x.ln())).collect();
    let n = resp(&d, &p, &elog);
    let entropy: f64 = (0..2).map(|k| -e1(k, &|x: f64| ln_q(k, x))).sum();
    let mut elbo = entropy;
    for v in all_latents(&d, 2) {
        let lq = ln_q_latent(&v, &d, &n);
        // ln p(V, l) is a sum of per-component terms plus constants, so the
        // double integral factorizes into two single ones.
        let base = loglik_gp_latent(&v, &[1.0, 1.0], &p).unwrap();
        let c = v.component_totals();
        let mut e = base;
        for k in 0..2 {
            let f = |x: f64| (c[k] as f64 + p.alpha[k] - 1.0) * x.ln() - (p.beta[k] + 1.0) * (x - 1.0);
            e += e1(k, &f);
        }
        elbo += lq.exp() * (e - lq);
    }
    assert!((b - elbo).abs() < 1e-7, "{b} vs {elbo}");
}

#[test]
fn bound_never_exceeds_enumerated_marginal() {
    let mut rng = Rng::new(99);
    for case in 0..200 {
        let family = if case % 2 == 0 { Family::Gp } else { Family::Dm };
        let (j, k) = (1 + rng.below(2), 1 + rng.below(2));
        let p = random_params(family, j, k, 0.2, 3.0, &mut rng);
        let counts: Vec<u32> = (0..j).map(|_| rng.below(4) as u32).collect();
        let d = doc(&counts);
        let exact = enumerated_marginal(&d, &p);
        let mut state = VariationalState::initial(&d, &p).unwrap();
        for _ in 0..10 {
            let step = e_step(&d, &p, &state).unwrap();
            assert!(step.bound <= exact + 1e-10 * exact.abs().max(1.0), "case {case}: {} > {exact}", step.bound);
            state = step.state;
        }
    }
}

fn synthetic(family: Family, seed: u64, docs: usize) -> (Corpus, ModelParams) {
    let mut rng = Rng::new(seed);
    let (j, k) = (20, 2);
    let mut truth = match family {
        Family::Gp => ModelParams::new(Family::Gp, j, vec![5.0; k], vec![0.2; k], vec![], vec![0.5; j], None),
        _ => ModelParams::new(Family::Dm, j, vec![1.0; k], vec![], vec![], vec![0.5; j], None),
    }
    .unwrap();
    truth.theta = random_theta(j, k, 0.5, None, &mut rng).unwrap();
    let len = if family == Family::Gp { DocLength::FromScores } else { DocLength::Poisson(50.0) };
    let corpus = generate(&truth, docs, len, &mut rng).unwrap().corpus;
    let mut init = truth.clone();
    init.randomize_theta(&corpus.word_totals(), &mut rng);
    (corpus, init)
}

#[test]
fn total_bound_ascends() {
    for (seed, family) in [(1, Family::Gp), (2, Family::Dm), (3, Family::Gp), (4, Family::Dm)] {
        let (corpus, init) = synthetic(family, seed, 100);
        let cfg = VariationalConfig { max_cycles: 100, tol: 0.0, threads: 1 };
        let fit = fit_variational(&corpus, &init, &cfg, None).unwrap();
        for w in fit.report.rows.windows(2) {
            let (a, b) = (w[0].total_bound, w[1].total_bound);
            assert!(b - a >= -1e-8 * a.abs(), "{family}: cycle {} {a} -> {b}", w[1].cycle);
        }
    }
}

#[test]
fn expected_counts_conserve_tokens() {
    let (corpus, init) = synthetic(Family::Dm, 8, 30);
    let mut total = 0.0;
    for d in corpus.docs() {
        let step = e_step(d, &init, &VariationalState::initial(d, &init).unwrap()).unwrap();
        for (e, &(_, n)) in d.entries().iter().enumerate() {
            let row: f64 = step.expected_counts[e * 2..e * 2 + 2].iter().sum();
            assert!((row - n as f64).abs() < 1e-12 * n as f64);
        }
        total += step.expected_counts.iter().sum::<f64>();
    }
    assert!((total - corpus.total_tokens() as f64).abs() < 1e-9);
}

#[test]
fn thread_count_does_not_change_results() {
    let (corpus, init) = synthetic(Family::Gp, 5, 600);
    let one = fit_variational(&corpus, &init, &VariationalConfig { max_cycles: 5, tol: 0.0, threads: 1 }, None).unwrap();
    let four = fit_variational(&corpus, &init, &VariationalConfig { max_cycles: 5, tol: 0.0, threads: 4 }, None).unwrap();
    assert_eq!(one.params, four.params);
    assert_eq!(one.states, four.states);
    let b1: Vec<f64> = one.report.rows.iter().map(|r| r.total_bound).collect();
    let b4: Vec<f64> = four.report.rows.iter().map(|r| r.total_bound).collect();
    assert_eq!(b1, b4);
}

#[test]
fn document_order_does_not_change_theta() {
    let (corpus, init) = synthetic(Family::Dm, 6, 50);
    let mut docs = corpus.docs().to_vec();
    docs.reverse();
    let reversed = Corpus::new(docs, corpus.num_words()).unwrap();
    let cfg = VariationalConfig { max_cycles: 3, tol: 0.0, threads: 1 };
    let a = fit_variational(&corpus, &init, &cfg, None).unwrap();
    let b = fit_variational(&reversed, &init, &cfg, None).unwrap();
    for (x, y) in a.params.theta.iter().zip(&b.params.theta) {
        assert!((x - y).abs() < 1e-13);
    }
}

#[test]
fn one_document_single_component_gives_smoothed_counts() {
    let corpus = Corpus::new(vec![doc(&[3, 0, 1])], 3).unwrap();
    let init = params(Family::Gp, &[&[0.2], &[0.5], &[0.3]], &[1.0], &[1.0], &[]);
    let fit = fit_variational(&corpus, &init, &VariationalConfig::default(), None).unwrap();
    let want = [3.5 / 5.5, 0.5 / 5.5, 1.5 / 5.5];
    for (x, y) in fit.params.theta.iter().zip(want) {
        assert!((x - y).abs() < 1e-15);
    }
    assert!(fit.report.converged);
    assert!(fit.report.rows.len() <= 3);
}

#[test]
fn resume_from_stored_states_continues_the_run() {
    let (corpus, init) = synthetic(Family::Gp, 12, 80);
    let cfg = |n| VariationalConfig { max_cycles: n, tol: 0.0, threads: 1 };
    let full = fit_variational(&corpus, &init, &cfg(8), None).unwrap();
    let first = fit_variational(&corpus, &init, &cfg(4), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("states.tsv");
    save_states(&first.states, &path, "# states").unwrap();
    let loaded = load_states(&path, 2, true).unwrap();
    assert_eq!(loaded, first.states);
    let second = fit_variational(&corpus, &first.params, &cfg(4), Some(loaded)).unwrap();
    assert_eq!(second.params, full.params);
    assert_eq!(second.report.rows.last().unwrap().total_bound, full.report.rows.last().unwrap().total_bound);
    assert_eq!(second.report.final_bound, full.report.final_bound);
    let recomputed = total_bound(&corpus, &full.params, &full.states, 1).unwrap();
    assert_eq!(recomputed, full.report.final_bound);
}

#[test]
fn cgp_is_rejected() {
    let p = params(Family::Cgp, &[&[1.0]], &[1.0], &[1.0], &[0.5]);
    let corpus = Corpus::new(vec![doc(&[1])], 1).unwrap();
    assert!(matches!(
        fit_variational(&corpus, &p, &VariationalConfig::default(), None),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn inference_on_training_document_reproduces_its_bound() {
    let (corpus, init) = synthetic(Family::Dm, 21, 60);
    let fit = fit_variational(&corpus, &init, &VariationalConfig { max_cycles: 500, tol: 1e-12, threads: 1 }, None).unwrap();
    for (d, s) in corpus.docs().iter().zip(&fit.states).take(10) {
        let inferred = infer_variational(d, &fit.params, 5000, 1e-14).unwrap();
        assert!((inferred.bound - s.bound).abs() < 1e-6 * s.bound.abs(), "{} vs {}", inferred.bound, s.bound);
    }
}

#[test]
fn digamma_expectation_used_in_update() {
    let p = params(Family::Dm, &[&[0.6, 0.2], &[0.4, 0.8]], &[0.5, 0.5], &[], &[]);
    let d = doc(&[1, 0]);
    let a = [2.0, 3.0];
    let step = e_step_dm(&d, &p, &dm_state(&a)).unwrap();
    let e: Vec<f64> = a.iter().map(|&x| digamma(x).unwrap() - digamma(5.0).unwrap()).collect();
    let n0 = 0.6 * e[0].exp() / (0.6 * e[0].exp() + 0.2 * e[1].exp());
    assert!((step.state.a[0] - (0.5 + n0)).abs() < 1e-14);
}

mod nmf_tests {
    use super::*;

    fn random_counts(rows: usize, cols: usize, rng: &mut Rng) -> Corpus {
        let docs = (0..rows)
            .map(|_| Document::from_counts((0..cols).map(|w| (w, rng.below(10) as u32))))
            .collect();
        Corpus::new(docs, cols).unwrap()
    }

    #[test]
    fn rank_one_matrix_is_reconstructed() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let v = [2u32, 1, 3, 5, 1];
        let docs = u
            .iter()
            .map(|&s| Document::from_counts(v.iter().enumerate().map(|(w, &c)| (w, (s * c as f64) as u32))))
            .collect();
        let corpus = Corpus::new(docs, 5).unwrap();
        let fit = fit_nmf(&corpus, &NmfConfig { k: 2, max_iter: 3000, tol: 0.0, seed: 4 }).unwrap();
        let mut err: f64 = 0.0;
        for (d, l) in corpus.docs().iter().zip(&fit.scores) {
            for w in 0..5 {
                let r: f64 = (0..2).map(|k| fit.theta[w * 2 + k] * l[k]).sum();
                err = err.max((r - d.count(w) as f64).abs());
            }
        }
        assert!(err < 1e-3, "{err}");
        assert!(nmf_divergence(&corpus, &fit.theta, &fit.scores) < 1e-6);
    }

    #[test]
    fn divergence_hand_value() {
        // One document (2, 0) against rates (1, 1): 2 ln 2 − 2 + 2.
        let corpus = Corpus::new(vec![Document::from_counts([(0, 2)])], 2).unwrap();
        let d = nmf_divergence(&corpus, &[0.5, 0.5], &[vec![2.0]]);
        assert!((d - 2.0 * 2f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn likelihood_nondecreasing_and_fixed_point_reached() {
        let mut rng = Rng::new(17);
        for seed in 0..5 {
            let corpus = random_counts(10, 8, &mut rng);
            let fit = fit_nmf(&corpus, &NmfConfig { k: 3, max_iter: 2000, tol: 0.0, seed }).unwrap();
            for w in fit.loglik.windows(2) {
                assert!(w[1] - w[0] >= -1e-10, "{} -> {}", w[0], w[1]);
            }
            for c in 0..3 {
                let s: f64 = (0..8).map(|w| fit.theta[w * 3 + c]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
            let (rt, rl) = nmf_fixed_point_residuals(&corpus, &fit.theta, &fit.scores);
            assert!(rt <= 1e-6 && rl <= 1e-6, "seed {seed}: {rt} {rl}");
        }
    }

    #[test]
    fn scale_indeterminacy() {
        let mut rng = Rng::new(3);
        let corpus = random_counts(6, 5, &mut rng);
        let fit = fit_nmf(&corpus, &NmfConfig { k: 2, max_iter: 50, tol: 0.0, seed: 1 }).unwrap();
        let psi = [3.0, 0.25];
        let theta2: Vec<f64> = fit.theta.iter().enumerate().map(|(i, t)| t / psi[i % 2]).collect();
        let scores2: Vec<Vec<f64>> = fit.scores.iter().map(|l| vec![l[0] * psi[0], l[1] * psi[1]]).collect();
        let a = nmf::poisson_loglik(&corpus, &fit.theta, 2, &fit.scores);
        let b = nmf::poisson_loglik(&corpus, &theta2, 2, &scores2);
        assert!((a - b).abs() < 1e-9 * a.abs());
        assert!((a - fit.loglik.last().unwrap()).abs() < 1e-9 * a.abs());
    }
}
