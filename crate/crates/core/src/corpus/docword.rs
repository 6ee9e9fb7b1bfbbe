//! Plain-text corpus files.
//!
//! docword: three header lines `I`, `J`, `NNZ`, then `NNZ` lines of
//! `docId wordId count`, all 1-based. Vocabulary: one token per line.
//! Groups: `wordId groupId` per line, both 1-based.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{Corpus, Document, Groups};
use crate::error::{Error, Result};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(format!("opening {}", path.display()), e))
}

/// Lines with their 1-based numbers, skipping blanks and `#` comments.
fn content_lines<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    reader
        .lines()
        .enumerate()
        .filter_map(move |(n, line)| match line {
            Err(e) => Some(Err(Error::io(format!("reading {}", path.display()), e))),
            Ok(s) => {
                let t = s.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((n + 1, t.to_string())))
                }
            }
        })
}

fn header_value(
    lines: &mut impl Iterator<Item = Result<(usize, String)>>,
    path: &Path,
    name: &str,
) -> Result<usize> {
    match lines.next() {
        None => Err(parse_err(path, 0, format!("missing header value {name}"))),
        Some(r) => {
            let (n, s) = r?;
            s.parse::<usize>()
                .map_err(|_| parse_err(path, n, format!("header {name}: expected a nonnegative integer, got {s:?}")))
        }
    }
}

pub fn load_docword(path: impl AsRef<Path>) -> Result<Corpus> {
    let path = path.as_ref();
    read_docword(open(path)?, path)
}

/// Parse a docword stream; `path` is used only in error messages.
pub fn read_docword<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let mut lines = content_lines(reader, path);
    let num_docs = header_value(&mut lines, path, "I")?;
    let num_words = header_value(&mut lines, path, "J")?;
    let nnz = header_value(&mut lines, path, "NNZ")?;

    let mut raw: Vec<Vec<(usize, u32)>> = vec![Vec::new(); num_docs];
    let mut seen = 0usize;
    for r in lines {
        let (n, s) = r?;
        seen += 1;
        if seen > nnz {
            return Err(parse_err(path, n, format!("more than NNZ = {nnz} entries")));
        }
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(path, n, "expected `docId wordId count`"));
        }
        let id = |f: &str, what: &str, max: usize| -> Result<usize> {
            let v: usize = f
                .parse()
                .map_err(|_| parse_err(path, n, format!("{what}: not an integer: {f:?}")))?;
            if v == 0 || v > max {
                return Err(parse_err(path, n, format!("{what} {v} outside 1..={max}")));
            }
            Ok(v - 1)
        };
        let d = id(fields[0], "docId", num_docs)?;
        let w = id(fields[1], "wordId", num_words)?;
        let c: u32 = fields[2]
            .parse()
            .map_err(|_| parse_err(path, n, format!("count: not a positive integer: {:?}", fields[2])))?;
        if c == 0 {
            return Err(parse_err(path, n, "count must be positive"));
        }
        raw[d].push((w, c));
    }
    if seen != nnz {
        return Err(parse_err(
            path,
            0,
            format!("header declares NNZ = {nnz} but found {seen} entries"),
        ));
    }
    Corpus::new(raw.into_iter().map(Document::from_counts).collect(), num_words)
}

pub fn save_docword(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut out = BufWriter::new(file);
    write_docword(corpus, &mut out).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    out.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn write_docword<W: Write>(corpus: &Corpus, out: &mut W) -> std::io::Result<()> {
    writeln!(out, "{}", corpus.num_docs())?;
    writeln!(out, "{}", corpus.num_words())?;
    writeln!(out, "{}", corpus.nnz())?;
    for (i, d) in corpus.docs().iter().enumerate() {
        for &(w, c) in d.entries() {
            writeln!(out, "{} {} {}", i + 1, w + 1, c)?;
        }
    }
    Ok(())
}

pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for line in open(path)?.lines() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        out.push(line.trim_end_matches('\r').to_string());
    }
    Ok(out)
}

pub fn write_vocab(vocab: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for v in vocab {
        text.push_str(v);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read `wordId groupId` pairs, returned zero-based.
pub fn load_group_file(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let mut pairs = Vec::new();
    for r in content_lines(open(path)?, path) {
        let (n, s) = r?;
        let fields: Vec<&str> = s.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(path, n, "expected `wordId groupId`"));
        }
        let mut ids = [0usize; 2];
        for (slot, f) in ids.iter_mut().zip(&fields) {
            *slot = match f.parse::<usize>() {
                Ok(v) if v > 0 => v - 1,
                _ => return Err(parse_err(path, n, format!("expected a positive integer, got {f:?}"))),
            };
        }
        pairs.push((ids[0], ids[1]));
    }
    Ok(pairs)
}

pub fn write_group_file(groups: &Groups, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    for (w, &g) in groups.assignment().iter().enumerate() {
        text.push_str(&format!("{} {}\n", w + 1, g + 1));
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
