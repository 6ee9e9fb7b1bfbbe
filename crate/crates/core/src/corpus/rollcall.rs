//! Roll-call votes as a grouped corpus.
//!
//! Input is a tab-separated table: a header row `id<TAB>name1<TAB>name2...`
//! followed by one row per vote, each cell `Y`, `N` or anything else for
//! absent. Every column (members and, if present, an outcome column) becomes
//! two words, `name-yea` and `name-nay`, forming one group.

use std::io::BufRead;
use std::path::Path;

use super::{Corpus, Document, Groups};
use crate::error::{Error, Result};

pub fn load_rollcall(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    read_rollcall(std::io::BufReader::new(file), path)
}

pub fn read_rollcall<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut names: Option<Vec<String>> = None;
    let mut docs = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        match &names {
            None => {
                if cells.len() < 2 {
                    return Err(parse_err(n + 1, "header needs an id column and at least one member".into()));
                }
                names = Some(cells[1..].iter().map(|s| s.trim().to_string()).collect());
            }
            Some(names) => {
                if cells.len() != names.len() + 1 {
                    return Err(parse_err(
                        n + 1,
                        format!("expected {} cells, found {}", names.len() + 1, cells.len()),
                    ));
                }
                let entries = cells[1..].iter().enumerate().filter_map(|(m, v)| {
                    match v.trim() {
                        "Y" | "y" => Some((2 * m, 1)),
                        "N" | "n" => Some((2 * m + 1, 1)),
                        _ => None,
                    }
                });
                docs.push(Document::from_counts(entries));
            }
        }
    }
    let names = names.ok_or_else(|| parse_err(0, "empty roll-call file".into()))?;
    let vocab = names
        .iter()
        .flat_map(|n| [format!("{n}-yea"), format!("{n}-nay")])
        .collect();
    let groups = Groups::new((0..2 * names.len()).map(|w| w / 2).collect())?;
    Corpus::new(docs, 2 * names.len())?
        .with_vocab(vocab)?
        .with_groups(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    #[test]
    fn votes_become_yea_nay_pairs() {
        let text = "id\tSmith\tJones\toutcome\nv1\tY\tN\tY\nv2\t-\tY\tN\n";
        let c = read_rollcall(Cursor::new(text), Path::new("votes.tsv")).unwrap();
        assert_eq!(c.num_words(), 6);
        assert_eq!(c.groups().unwrap().num_groups(), 3);
        assert_eq!(c.vocab().unwrap()[1], "Smith-nay");
        assert_eq!(c.doc(0).entries(), &[(0, 1), (3, 1), (4, 1)]);
        assert_eq!(c.doc(1).entries(), &[(2, 1), (5, 1)]);
        for d in c.docs() {
            assert!(c.groups().unwrap().totals(d).iter().all(|&t| t <= 1));
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let text = "id\tA\tB\nv1\tY\n";
        let err = read_rollcall(Cursor::new(text), Path::new("votes.tsv")).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
