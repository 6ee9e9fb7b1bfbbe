use std::fmt::Write as _;
use std::path::PathBuf;

use clap::Args;
use dca::corpus::load_vocab;
use dca::model::load_model;

use crate::options::header;
use crate::CliResult;

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long)]
    pub model_file: PathBuf,
    /// Vocabulary, one word per line [default: 1-based word ids].
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Words listed per component.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    /// Print the K × G table of each group's first-word probability instead
    /// (for roll-call data, the yea probability of each member per bloc).
    #[arg(long)]
    pub membership: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

pub fn run(a: TopicsArgs) -> CliResult {
    let p = load_model(&a.model_file)?;
    let names: Vec<String> = match &a.vocab {
        Some(path) => {
            let v = load_vocab(path)?;
            if v.len() != p.num_words {
                return Err(dca::Error::Dimension(format!(
                    "vocabulary has {} words, model has {}",
                    v.len(),
                    p.num_words
                ))
                .into());
            }
            v
        }
        None => (1..=p.num_words).map(|w| w.to_string()).collect(),
    };
    let mut out = header(p.family, p.k, a.seed, "") + "\n";
    if a.membership {
        let groups = p
            .groups
            .as_ref()
            .ok_or_else(|| dca::Error::Validation("--membership needs a model with word groups".into()))?;
        out.push_str("component");
        for g in 0..groups.num_groups() {
            write!(out, "\t{}", names[groups.members(g)[0]]).unwrap();
        }
        out.push('\n');
        for c in 0..p.k {
            write!(out, "{}", c + 1).unwrap();
            for g in 0..groups.num_groups() {
                write!(out, "\t{}", p.theta_at(groups.members(g)[0], c)).unwrap();
            }
            out.push('\n');
        }
    } else {
        out.push_str("component\trank\tword\tweight\n");
        for c in 0..p.k {
            let mut order: Vec<usize> = (0..p.num_words).collect();
            order.sort_by(|&x, &y| p.theta_at(y, c).total_cmp(&p.theta_at(x, c)).then(x.cmp(&y)));
            for (rank, &w) in order.iter().take(a.top).enumerate() {
                writeln!(out, "{}\t{}\t{}\t{}", c + 1, rank + 1, names[w], p.theta_at(w, c)).unwrap();
            }
        }
    }
    print!("{out}");
    Ok(())
}
