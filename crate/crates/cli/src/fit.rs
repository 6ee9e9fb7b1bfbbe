use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use dca::evaluate::{component_counts, export_features, write_features};
use dca::gibbs::{run_chain, run_chains};
use dca::mathfn::Rng;
use dca::model::save_model;
use dca::variational::{
    fit_nmf, fit_variational, nmf_divergence, save_states, write_report, NmfConfig, VariationalConfig,
};

use crate::options::{
    create_dir, header, score_table, write_file, Algorithm, ChainArgs, CorpusArgs, ModelArg, PriorArgs,
};
use crate::{usage, CliResult};

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    #[arg(long, value_enum)]
    pub model: ModelArg,
    /// Inference engine [default: variational for dm, collapsed otherwise].
    #[arg(long, value_enum)]
    pub algorithm: Option<Algorithm>,
    #[arg(long)]
    pub k: usize,
    #[command(flatten)]
    pub priors: PriorArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Maximum cycles (variational) or iterations (nmf) [default: 200 / 1000].
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Relative convergence tolerance (variational, nmf) [default: 1e-6 / 1e-10].
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Worker threads for document-parallel steps; results do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Add wall-clock seconds to the variational report.
    #[arg(long)]
    pub timing: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

fn features_text(head: &str, counts: &[Vec<f64>], k: usize) -> String {
    let mut buf = format!("{head}\n").into_bytes();
    write_features(&export_features(counts), k, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

pub fn run(a: FitArgs) -> CliResult {
    let family = a.model.family();
    let algorithm = a.algorithm.unwrap_or(Algorithm::default_for(family));
    algorithm.check(family)?;
    let sampling = algorithm.sampler().is_some();
    if sampling && (a.cycles.is_some() || a.tol.is_some()) {
        return usage("--cycles and --tol apply to variational and nmf; use --burn-in/--samples for gibbs");
    }
    if !sampling && a.chain.any() {
        return usage("--burn-in, --samples, --thin and --chains apply to gibbs and collapsed only");
    }
    if a.threads == 0 {
        return usage("--threads must be at least 1");
    }
    if a.tol.is_some_and(|t| !(t >= 0.0)) {
        return usage("--tol must be nonnegative");
    }
    let corpus = a.corpus.load(Some(family))?;
    let mut params = a.priors.build(family, a.k, &corpus)?;
    params.randomize_theta(&corpus.word_totals(), &mut Rng::new(a.seed));
    create_dir(&a.out)?;
    let head = header(family, a.k, a.seed, &format!("algorithm={}", algorithm.name()));

    match algorithm {
        Algorithm::Variational => {
            let config = VariationalConfig {
                max_cycles: a.cycles.unwrap_or(200),
                tol: a.tol.unwrap_or(1e-6),
                threads: a.threads,
            };
            let fit = fit_variational(&corpus, &params, &config, None)?;
            save_model(&fit.params, a.out.join("model.json"))?;
            let scores: Vec<Vec<f64>> = fit.states.iter().map(|s| s.mean_scores()).collect();
            write_file(&a.out.join("scores.tsv"), &score_table(&head, "score", &scores))?;
            save_states(&fit.states, a.out.join("states.tsv"), &head)?;
            write_report(&fit.report, a.out.join("report.tsv"), &head, a.timing)?;
            let counts = component_counts(&corpus, &fit.params, &fit.states)?;
            write_file(&a.out.join("features.txt"), &features_text(&head, &counts, a.k))?;
            println!(
                "cycles={} converged={} final_bound={}",
                fit.report.rows.len(),
                fit.report.converged,
                fit.report.final_bound
            );
        }
        Algorithm::Gibbs | Algorithm::Collapsed => {
            let sampler = algorithm.sampler().expect("sampling algorithm");
            let config = a.chain.config(sampler, a.seed, a.threads)?;
            let chains = a.chain.chains()?;
            let (summary, runs) = if chains == 1 {
                let s = run_chain(&corpus, &params, &config)?;
                (s.clone(), vec![s])
            } else {
                run_chains(&corpus, &params, &config, chains, a.threads)?
            };
            save_model(&summary.params, a.out.join("model.json"))?;
            write_file(&a.out.join("scores.tsv"), &score_table(&head, "score", &summary.scores))?;
            for (c, run) in runs.iter().enumerate() {
                let name = if c == 0 { "report.tsv".to_string() } else { format!("report.chain{}.tsv", c + 1) };
                let mut buf = Vec::new();
                run.write_trace(&mut buf, &head).expect("writing to memory");
                write_file(&a.out.join(name), &String::from_utf8(buf).expect("utf-8"))?;
            }
            write_file(&a.out.join("features.txt"), &features_text(&head, &summary.counts, a.k))?;
            println!(
                "chains={chains} kept={} mean_loglik_estimate={}",
                summary.kept,
                summary.mean_kept_loglik()
            );
        }
        Algorithm::Nmf => {
            let config = NmfConfig {
                k: a.k,
                max_iter: a.cycles.unwrap_or(1000),
                tol: a.tol.unwrap_or(1e-10),
                seed: a.seed,
            };
            let fit = fit_nmf(&corpus, &config)?;
            params.theta = fit.theta.clone();
            save_model(&params, a.out.join("model.json"))?;
            write_file(&a.out.join("scores.tsv"), &score_table(&head, "score", &fit.scores))?;
            let div = nmf_divergence(&corpus, &fit.theta, &fit.scores);
            let mut report = format!("{head}\niteration\tloglik\n");
            for (i, ll) in fit.loglik.iter().enumerate() {
                writeln!(report, "{i}\t{ll}").unwrap();
            }
            writeln!(report, "# divergence={div} converged={}", fit.converged).unwrap();
            write_file(&a.out.join("report.tsv"), &report)?;
            println!("iterations={} converged={} divergence={div}", fit.loglik.len() - 1, fit.converged);
        }
    }
    Ok(())
}
