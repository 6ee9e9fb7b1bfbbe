use std::path::PathBuf;

use clap::Args;
use dca::corpus::rollcall::load_rollcall;
use dca::corpus::{save_docword, write_group_file, write_vocab};
use dca::mathfn::Rng;
use dca::model::{save_model, Family};
use dca::synth::{generate, random_theta, DocLength};

use crate::options::{create_dir, header, score_table, write_file, ModelArg, PriorArgs};
use crate::{usage, CliResult};

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub model: ModelArg,
    #[arg(long)]
    pub k: usize,
    /// Vocabulary size J.
    #[arg(long)]
    pub words: usize,
    /// Number of documents I.
    #[arg(long)]
    pub docs: usize,
    /// Mean document length, dm only [default: 50].
    #[arg(long)]
    pub length: Option<f64>,
    #[command(flatten)]
    pub priors: PriorArgs,
    /// Symmetric Dirichlet concentration of the true Θ columns.
    #[arg(long, default_value_t = 0.5)]
    pub concentration: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes `corpus.txt`, the generating model `truth.json` and its `scores.tsv`.
pub fn synth(a: SynthArgs) -> CliResult {
    let family = a.model.family();
    let length = match (family, a.length) {
        (Family::Dm, l) => {
            let l = l.unwrap_or(50.0);
            if !(l >= 0.0 && l.is_finite()) {
                return usage("--length must be nonnegative");
            }
            DocLength::Poisson(l)
        }
        (_, Some(_)) => return usage("--length applies to dm; gp/cgp lengths follow from the scores"),
        (_, None) => DocLength::FromScores,
    };
    if a.words == 0 {
        return usage("--words must be at least 1");
    }
    if !(a.concentration > 0.0 && a.concentration.is_finite()) {
        return usage("--concentration must be positive");
    }
    let empty = dca::corpus::Corpus::new(vec![], a.words)?;
    let mut p = a.priors.build(family, a.k, &empty)?;
    let mut rng = Rng::new(a.seed);
    p.theta = random_theta(a.words, a.k, a.concentration, None, &mut rng)?;
    let s = generate(&p, a.docs, length, &mut rng)?;
    create_dir(&a.out)?;
    save_docword(&s.corpus, a.out.join("corpus.txt"))?;
    save_model(&p, a.out.join("truth.json"))?;
    let head = header(family, a.k, a.seed, "synthetic");
    write_file(&a.out.join("scores.tsv"), &score_table(&head, "score", &s.scores))?;
    println!("docs={} words={} tokens={}", s.corpus.num_docs(), a.words, s.corpus.total_tokens());
    Ok(())
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Vote table: header `id<TAB>name...`, one row per roll call, cells Y/N.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

/// Writes `corpus.txt`, `vocab.txt` and `groups.txt`.
pub fn ingest(a: IngestArgs) -> CliResult {
    let corpus = load_rollcall(&a.input)?;
    create_dir(&a.out)?;
    save_docword(&corpus, a.out.join("corpus.txt"))?;
    if let Some(v) = corpus.vocab() {
        write_vocab(v, a.out.join("vocab.txt"))?;
    }
    if let Some(g) = corpus.groups() {
        write_group_file(g, a.out.join("groups.txt"))?;
    }
    println!(
        "docs={} words={} groups={}",
        corpus.num_docs(),
        corpus.num_words(),
        corpus.groups().map_or(0, |g| g.num_groups())
    );
    Ok(())
}
