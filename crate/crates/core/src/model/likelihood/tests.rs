use super::*;
use crate::corpus::{bag, DocumentSeq, Groups};
use crate::mathfn::{integrate, integrate_half_line, poisson_gamma_logpmf, Rng};
use crate::model::{model_from_json, model_to_json};
use proptest::prelude::*;

fn gp(theta: &[&[f64]], alpha: &[f64], beta: &[f64]) -> ModelParams {
    let j = theta.len();
    let mut p = ModelParams::new(
        Family::Gp,
        j,
        alpha.to_vec(),
        beta.to_vec(),
        vec![],
        vec![0.5; j],
        None,
    )
    .unwrap();
    p.theta = theta.concat();
    p.validate().unwrap();
    p
}

fn as_family(p: &ModelParams, family: Family, rho: Option<Vec<f64>>) -> ModelParams {
    let mut q = p.clone();
    q.family = family;
    match family {
        Family::Dm => q.beta.clear(),
        Family::Cgp => q.rho = rho.unwrap(),
        Family::Gp => {}
    }
    q.validate().unwrap();
    q
}

fn doc(counts: &[u32]) -> Document {
    Document::from_counts(counts.iter().enumerate().map(|(w, &c)| (w, c)))
}

/// Every split of `n` into `k` ordered nonnegative parts.
fn compositions(n: u64, k: usize) -> Vec<Vec<u64>> {
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

/// Every latent matrix consistent with `d`.
fn all_latents(d: &Document, k: usize) -> Vec<LatentCounts> {
    let mut out = vec![LatentCounts { k, rows: vec![] }];
    for &(w, n) in d.entries() {
        let mut next = Vec::new();
        for v in &out {
            for row in compositions(n as u64, k) {
                let mut v2 = v.clone();
                v2.rows.push((w, row));
                next.push(v2);
            }
        }
        out = next;
    }
    out
}

fn log_sum(xs: impl Iterator<Item = f64>) -> f64 {
    crate::mathfn::log_sum_exp(&xs.collect::<Vec<_>>())
}

fn random_theta(j: usize, k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let cols: Vec<Vec<f64>> = (0..k)
        .map(|_| crate::mathfn::sample_dirichlet(&vec![1.0; j], rng).unwrap())
        .collect();
    (0..j).map(|w| (0..k).map(|c| cols[c][w]).collect()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn gp_joint_hand_value() {
    let p = gp(&[&[1.0]], &[1.0], &[1.0]);
    let v = loglik_gp_joint(&doc(&[2]), &[1.0], &p).unwrap();
    assert!((v - (-2.0 - 2f64.ln())).abs() < 1e-14, "{v}");
}

#[test]
fn gp_joint_empty_document() {
    let p = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[0.5, 2.0], &[1.5, 0.25]);
    let l = [0.8, 2.5];
    let v = loglik_gp_joint(&doc(&[]), &l, &p).unwrap();
    let want: f64 = (0..2)
        .map(|k| gamma_log_density(l[k], p.alpha[k], p.beta[k]) - l[k])
        .sum();
    assert!((v - want).abs() < 1e-13);
}

#[test]
fn gp_joint_component_permutation() {
    let p = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[0.5, 2.0], &[1.5, 0.25]);
    let q = gp(&[&[0.6, 0.3], &[0.4, 0.7]], &[2.0, 0.5], &[0.25, 1.5]);
    let d = doc(&[3, 1]);
    let a = loglik_gp_joint(&d, &[0.8, 2.5], &p).unwrap();
    let b = loglik_gp_joint(&d, &[2.5, 0.8], &q).unwrap();
    assert!((a - b).abs() < 1e-13);
}

#[test]
fn gp_latent_sums_to_joint() {
    let mut rng = Rng::new(7);
    for case in 0..40 {
        let (j, k) = (1 + case % 2, 1 + (case / 2) % 2);
        let th = random_theta(j, k, &mut rng);
        let rows: Vec<&[f64]> = th.iter().map(|r| r.as_slice()).collect();
        let alpha: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.2, 3.0)).collect();
        let beta: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.2, 3.0)).collect();
        let p = gp(&rows, &alpha, &beta);
        let counts: Vec<u32> = (0..j).map(|_| rng.below(3) as u32).collect();
        let d = doc(&counts);
        let l: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.1, 4.0)).collect();
        let joint = loglik_gp_joint(&d, &l, &p).unwrap();
        let summed = log_sum(all_latents(&d, k).iter().map(|v| loglik_gp_latent(v, &l, &p).unwrap()));
        assert!(close(joint, summed, 1e-12), "case {case}: {joint} vs {summed}");
    }
}

#[test]
fn gp_latent_simple_cases() {
    let p = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[1.5, 2.0], &[1.5, 0.25]);
    let l = [0.8, 2.5];
    let empty = LatentCounts { k: 2, rows: vec![] };
    let zero = loglik_gp_latent(&empty, &l, &p).unwrap();
    let want: f64 = (0..2)
        .map(|k| gamma_log_density(l[k], p.alpha[k], p.beta[k]) - l[k])
        .sum();
    assert!((zero - want).abs() < 1e-13);
    let one = LatentCounts { k: 2, rows: vec![(1, vec![0, 1])] };
    let diff = loglik_gp_latent(&one, &l, &p).unwrap() - zero;
    assert!((diff - (l[1].ln() + 0.4f64.ln())).abs() < 1e-13);
}

#[test]
fn gp_marginal_matches_quadrature() {
    let p = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[1.5, 2.0], &[0.7, 1.3]);
    let cases = [
        vec![],
        vec![(0, vec![1, 0])],
        vec![(0, vec![1, 1]), (1, vec![1, 0])],
        vec![(0, vec![2, 0]), (1, vec![0, 2])],
    ];
    for rows in cases {
        let v = LatentCounts { k: 2, rows };
        let marginal = loglik_gp_marginal(&v, &p).unwrap();
        let inner = |l1: f64| {
            integrate_half_line(&|l2: f64| loglik_gp_latent(&v, &[l1, l2], &p).unwrap().exp(), 1e-13)
        };
        let quad = integrate_half_line(&inner, 1e-12).ln();
        assert!(
            (marginal.exp() - quad.exp()).abs() <= 1e-6 * marginal.exp(),
            "{marginal} vs {quad}"
        );
    }
}

#[test]
fn gp_marginal_empty_and_single_word() {
    let p = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[1.5, 2.0], &[0.7, 1.3]);
    let v = LatentCounts { k: 2, rows: vec![] };
    let want: f64 = (0..2).map(|k| p.alpha[k] * (p.beta[k] / (1.0 + p.beta[k])).ln()).sum();
    assert!((loglik_gp_marginal(&v, &p).unwrap() - want).abs() < 1e-13);

    let q = gp(&[&[1.0]], &[0.7], &[2.5]);
    for n in 0..6u64 {
        let v = LatentCounts { k: 1, rows: vec![(0, vec![n])] };
        let a = loglik_gp_marginal(&v, &q).unwrap();
        let b = poisson_gamma_logpmf(n, 0.7, 2.5).unwrap();
        assert!((a - b).abs() < 1e-12, "{n}: {a} vs {b}");
    }
}

#[test]
fn cgp_reductions_and_hand_value() {
    let base = gp(&[&[0.3, 0.6], &[0.7, 0.4]], &[1.5, 2.0], &[0.7, 1.3]);
    let zero = as_family(&base, Family::Cgp, Some(vec![0.0, 0.0]));
    let v = LatentCounts { k: 2, rows: vec![(0, vec![2, 0]), (1, vec![1, 0])] };
    assert_eq!(
        loglik_cgp_marginal(&v, &zero).unwrap().to_bits(),
        loglik_gp_marginal(&v, &base).unwrap().to_bits()
    );
    let forced = as_family(&base, Family::Cgp, Some(vec![1.0, 0.2]));
    assert_eq!(loglik_cgp_marginal(&v, &forced).unwrap(), f64::NEG_INFINITY);

    let one = gp(&[&[1.0]], &[1.0], &[1.0]);
    let c = as_family(&one, Family::Cgp, Some(vec![0.5]));
    let v0 = LatentCounts { k: 1, rows: vec![] };
    assert!((loglik_cgp_marginal(&v0, &c).unwrap() - 0.75f64.ln()).abs() < 1e-14);
}

#[test]
fn cgp_spike_probability() {
    assert!((cgp_zero_spike_probability(0.5, 1.0, 1.0) - 2.0 / 3.0).abs() < 1e-15);
    assert_eq!(cgp_zero_spike_probability(0.0, 0.3, 2.0), 0.0);
    // Against the exact marginal: P(spike | c=0) = ρ / p(c=0).
    let one = gp(&[&[1.0]], &[0.4], &[2.0]);
    let c = as_family(&one, Family::Cgp, Some(vec![0.3]));
    let v0 = LatentCounts { k: 1, rows: vec![] };
    let p0 = loglik_cgp_marginal(&v0, &c).unwrap().exp();
    assert!((cgp_zero_spike_probability(0.3, 0.4, 2.0) - 0.3 / p0).abs() < 1e-14);
}

#[test]
fn cgp_joint_spike_and_slab() {
    let one = gp(&[&[1.0]], &[2.0], &[1.0]);
    let c = as_family(&one, Family::Cgp, Some(vec![0.25]));
    let empty = doc(&[]);
    assert!((loglik_cgp_joint(&empty, &[Score::Spike], &c).unwrap() - 0.25f64.ln()).abs() < 1e-15);
    assert_eq!(loglik_cgp_joint(&doc(&[1]), &[Score::Spike], &c).unwrap(), f64::NEG_INFINITY);
    let slab = loglik_cgp_joint(&doc(&[1]), &[Score::Slab(2.0)], &c).unwrap();
    let want = 0.75f64.ln() + loglik_gp_joint(&doc(&[1]), &[2.0], &one).unwrap();
    assert!((slab - want).abs() < 1e-13);
}

#[test]
fn dm_full_cases() {
    let base = gp(&[&[0.2, 0.5], &[0.3, 0.1], &[0.5, 0.4]], &[1.0, 2.0], &[1.0, 1.0]);
    let p = as_family(&base, Family::Dm, None);
    // Component permutation.
    let q = as_family(
        &gp(&[&[0.5, 0.2], &[0.1, 0.3], &[0.4, 0.5]], &[2.0, 1.0], &[1.0, 1.0]),
        Family::Dm,
        None,
    );
    let d = doc(&[2, 0, 1]);
    let a = loglik_dm_full(&d, &[0.3, 0.7], &p).unwrap();
    let b = loglik_dm_full(&d, &[0.7, 0.3], &q).unwrap();
    assert!((a - b).abs() < 1e-13);

    // K = 1 is a plain multinomial.
    let single = as_family(&gp(&[&[0.2], &[0.8]], &[1.3], &[1.0]), Family::Dm, None);
    let v = loglik_dm_full(&doc(&[2, 1]), &[1.0], &single).unwrap();
    let want = 3f64.ln() + 2.0 * 0.2f64.ln() + 0.8f64.ln();
    assert!((v - want).abs() < 1e-13);

    // Normalization over all documents of length 3.
    let two = as_family(&gp(&[&[0.2, 0.6], &[0.8, 0.4]], &[1.0, 2.0], &[1.0, 1.0]), Family::Dm, None);
    let m = [0.35, 0.65];
    let prior = dirichlet_log_density(&m, &two.alpha);
    let total: f64 = (0..=3u32)
        .map(|a| (loglik_dm_full(&doc(&[a, 3 - a]), &m, &two).unwrap() - prior).exp())
        .sum();
    assert!((total - 1.0).abs() < 1e-13);
}

#[test]
fn dm_marginal_matches_beta_integral() {
    let p = as_family(&gp(&[&[0.2, 0.6], &[0.8, 0.4]], &[1.5, 2.5], &[1.0, 1.0]), Family::Dm, None);
    for rows in [
        vec![],
        vec![(0, vec![1, 1])],
        vec![(0, vec![2, 0]), (1, vec![0, 1])],
        vec![(0, vec![1, 2]), (1, vec![1, 0])],
    ] {
        let v = LatentCounts { k: 2, rows };
        let marginal = loglik_dm_marginal(&v, &p).unwrap();
        let quad = integrate(
            &|x: f64| {
                if x <= 0.0 || x >= 1.0 {
                    return 0.0;
                }
                loglik_dm_latent(&v, &[x, 1.0 - x], &p).unwrap().exp()
            },
            0.0,
            1.0,
            1e-14,
        );
        assert!((marginal.exp() - quad).abs() <= 1e-6 * quad, "{marginal} vs {}", quad.ln());
    }
}

#[test]
fn dm_marginal_symmetry_and_single_component() {
    let p = as_family(&gp(&[&[0.2, 0.6], &[0.8, 0.4]], &[1.5, 1.5], &[1.0, 1.0]), Family::Dm, None);
    let sym = as_family(&gp(&[&[0.6, 0.2], &[0.4, 0.8]], &[1.5, 1.5], &[1.0, 1.0]), Family::Dm, None);
    let v = LatentCounts { k: 2, rows: vec![(0, vec![2, 1]), (1, vec![0, 1])] };
    let swapped = LatentCounts { k: 2, rows: vec![(0, vec![1, 2]), (1, vec![1, 0])] };
    let a = loglik_dm_marginal(&v, &p).unwrap();
    let b = loglik_dm_marginal(&swapped, &sym).unwrap();
    assert!((a - b).abs() < 1e-13);

    let single = as_family(&gp(&[&[0.2], &[0.8]], &[0.7], &[1.0]), Family::Dm, None);
    let v = LatentCounts { k: 1, rows: vec![(0, vec![2]), (1, vec![1])] };
    let want = 3f64.ln() + 2.0 * 0.2f64.ln() + 0.8f64.ln();
    assert!((loglik_dm_marginal(&v, &single).unwrap() - want).abs() < 1e-13);
}

#[test]
fn posterior_means() {
    let p = gp(&[&[0.5, 0.5], &[0.5, 0.5]], &[1.0, 1.0], &[1.0, 1.0]);
    assert_eq!(posterior_mean_scores(&[2, 0], &p).unwrap(), vec![1.5, 0.5]);
    let c0 = as_family(&p, Family::Cgp, Some(vec![0.0, 0.0]));
    assert_eq!(posterior_mean_scores(&[2, 0], &c0).unwrap(), vec![1.5, 0.5]);
    let c = as_family(&p, Family::Cgp, Some(vec![0.5, 0.5]));
    let m = posterior_mean_scores(&[2, 0], &c).unwrap();
    assert_eq!(m[0], 1.5);
    assert!((m[1] - 0.5 / 3.0).abs() < 1e-15);
    let d = as_family(&p, Family::Dm, None);
    assert!(posterior_mean_scores(&[2, 0], &d).is_err());
    assert_eq!(dirichlet_mean(&[2, 0], &[1.0, 1.0]), vec![0.75, 0.25]);
}

fn dm_grouped(theta: &[&[f64]], of_word: Vec<usize>) -> ModelParams {
    let p = ModelParams {
        family: Family::Dm,
        k: theta[0].len(),
        num_words: theta.len(),
        theta: theta.concat(),
        alpha: vec![1.0; theta[0].len()],
        beta: vec![],
        rho: vec![],
        gamma: vec![0.5; theta.len()],
        groups: Some(Groups::new(of_word).unwrap()),
    };
    p.validate().unwrap();
    p
}

fn grouped(p: &ModelParams, of_word: Vec<usize>) -> ModelParams {
    let mut q = p.clone();
    q.groups = Some(Groups::new(of_word).unwrap());
    q
}

#[test]
fn grouped_reductions() {
    let p = as_family(&gp(&[&[0.2, 0.6], &[0.8, 0.4]], &[1.5, 0.5], &[1.0, 1.0]), Family::Dm, None);
    let g1 = grouped(&p, vec![0, 0]);
    g1.validate().unwrap();
    let d = doc(&[2, 1]);
    let m = [0.4, 0.6];
    let a = loglik_grouped(&d, &m, &g1).unwrap();
    let b = loglik_dm_full(&d, &m, &p).unwrap();
    assert!((a - b).abs() <= 1e-12);
    assert!(loglik_grouped(&d, &m, &p).is_err());
    for v in all_latents(&d, 2) {
        let a = loglik_dm_marginal(&v, &g1).unwrap();
        let b = loglik_dm_marginal(&v, &p).unwrap();
        assert!((a - b).abs() <= 1e-12);
    }

    // Two groups holding the same distribution over two words each.
    let two = dm_grouped(&[&[0.3], &[0.7], &[0.3], &[0.7]], vec![0, 0, 1, 1]);
    let half = as_family(&gp(&[&[0.3], &[0.7]], &[1.0], &[1.0]), Family::Dm, None);
    let g = loglik_grouped(&doc(&[1, 2, 1, 2]), &[1.0], &two).unwrap();
    let single = loglik_dm_full(&doc(&[1, 2]), &[1.0], &half).unwrap();
    // K = 1 makes the Dirichlet term zero, so the groups simply add.
    assert!((g - 2.0 * single).abs() < 1e-13);

    // One yea/nay pair per group, K = 1: a product of Bernoulli terms.
    let senate = dm_grouped(&[&[0.9], &[0.1], &[0.25], &[0.75]], vec![0, 0, 1, 1]);
    let v = loglik_grouped(&doc(&[1, 0, 0, 1]), &[1.0], &senate).unwrap();
    assert!((v - (0.9f64.ln() + 0.75f64.ln())).abs() < 1e-14);
}

#[test]
fn sequence_form_differs_by_multinomial_coefficient() {
    let p = as_family(
        &gp(&[&[0.2, 0.5], &[0.3, 0.1], &[0.5, 0.4]], &[1.0, 2.0], &[1.0, 1.0]),
        Family::Dm,
        None,
    );
    let m = [0.3, 0.7];
    let seq = DocumentSeq { tokens: vec![2, 0, 2, 1, 2] };
    let seq_ll: f64 = dirichlet_log_density(&m, &p.alpha)
        + seq
            .tokens
            .iter()
            .map(|&w| (m[0] * p.theta_at(w, 0) + m[1] * p.theta_at(w, 1)).ln())
            .sum::<f64>();
    let b = bag(&seq);
    let bag_ll = loglik_dm_full(&b, &m, &p).unwrap();
    assert!((seq_ll - (bag_ll - crate::corpus::log_multinomial_coeff(&b))).abs() < 1e-13);
}

#[test]
fn json_round_trip_is_exact() {
    let mut rng = Rng::new(3);
    let th = random_theta(5, 3, &mut rng);
    let rows: Vec<&[f64]> = th.iter().map(|r| r.as_slice()).collect();
    let p = gp(&rows, &[0.1, 1.0 / 3.0, 7.25], &[1e-3, 2.0, 1.0 / 7.0]);
    let c = as_family(&p, Family::Cgp, Some(vec![0.0, 0.1, 1.0]));
    for q in [p.clone(), c, as_family(&p, Family::Dm, None)] {
        let back = model_from_json(&model_to_json(&q)).unwrap();
        assert_eq!(back, q);
    }
    let mut d = grouped(&as_family(&p, Family::Dm, None), vec![0, 0, 1, 1, 1]);
    d.fill_theta(|j, k| (j + k + 1) as f64);
    let back = model_from_json(&model_to_json(&d)).unwrap();
    assert_eq!(back, d);
}

#[test]
fn validation_rejects_bad_parameters() {
    let p = gp(&[&[0.5], &[0.5]], &[1.0], &[1.0]);
    let mut q = p.clone();
    q.theta[0] = 0.6;
    assert!(q.validate().is_err());
    let mut q = p.clone();
    q.alpha[0] = 0.0;
    assert!(q.validate().is_err());
    let mut q = p.clone();
    q.rho = vec![0.5];
    assert!(q.validate().is_err());
    let mut q = as_family(&p, Family::Cgp, Some(vec![0.5]));
    q.rho[0] = 1.5;
    assert!(q.validate().is_err());
    assert!(grouped(&p, vec![0, 1]).validate().is_err());
    assert!(model_from_json("{\"format\":\"other\"}").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gp_marginal_is_dm_times_poisson_gamma_per_latent_matrix(
        seed in any::<u64>(),
        j in 1usize..=2,
        k in 1usize..=2,
        beta in 0.05f64..5.0,
    ) {
        let mut rng = Rng::new(seed);
        let th = random_theta(j, k, &mut rng);
        let rows: Vec<&[f64]> = th.iter().map(|r| r.as_slice()).collect();
        let alpha: Vec<f64> = (0..k).map(|_| rng.uniform_range(0.05, 4.0)).collect();
        let p = gp(&rows, &alpha, &vec![beta; k]);
        let dm = as_family(&p, Family::Dm, None);
        let counts: Vec<u32> = (0..j).map(|_| rng.below(4) as u32).collect();
        let total: u32 = counts.iter().sum();
        let d = doc(&counts);
        let pg = poisson_gamma_logpmf(total as u64, p.alpha_sum(), beta).unwrap();
        let latents = all_latents(&d, k);
        for v in &latents {
            let a = loglik_gp_marginal(v, &p).unwrap();
            let b = loglik_dm_marginal(v, &dm).unwrap() + pg;
            prop_assert!((a - b).abs() <= 1e-10, "{} vs {}", a, b);
        }
        let a = log_sum(latents.iter().map(|v| loglik_gp_marginal(v, &p).unwrap()));
        let b = log_sum(latents.iter().map(|v| loglik_dm_marginal(v, &dm).unwrap())) + pg;
        prop_assert!((a - b).abs() <= 1e-8);
    }
}
