//! Per-document variational parameters on disk, one document per line:
//! `doc<TAB>bound<TAB>a_1..a_K[<TAB>b_1..b_K]`, after a `#` header line.

use std::fmt::Write as _;
use std::path::Path;

use super::VariationalState;
use crate::error::{Error, Result};

pub fn save_states(states: &[VariationalState], path: impl AsRef<Path>, header: &str) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::new();
    if !header.is_empty() {
        text.push_str(header);
        text.push('\n');
    }
    for (i, s) in states.iter().enumerate() {
        write!(text, "{}\t{}", i + 1, s.bound).unwrap();
        for x in s.a.iter().chain(&s.b) {
            write!(text, "\t{x}").unwrap();
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Read states written by [`save_states`]. `with_rates` says whether each
/// line carries `b` after `a` (GP models).
pub fn load_states(path: impl AsRef<Path>, k: usize, with_rates: bool) -> Result<Vec<VariationalState>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let width = 2 + k * if with_rates { 2 } else { 1 };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            msg,
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != width {
            return Err(err(format!("expected {width} fields, found {}", fields.len())));
        }
        let id: usize = fields[0].parse().map_err(|_| err("bad document id".into()))?;
        if id != out.len() + 1 {
            return Err(err(format!("expected document {}, found {id}", out.len() + 1)));
        }
        let nums = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| err(format!("not a number: {f:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        out.push(VariationalState {
            bound: nums[0],
            a: nums[1..1 + k].to_vec(),
            b: nums[1 + k..].to_vec(),
        });
    }
    Ok(out)
}
