//! JSON model files.
//!
//! ```text
//! {
//!   "format": "dca-model", "version": 1,
//!   "family": "gp" | "cgp" | "dm", "k": K, "num_words": J,
//!   "alpha": [K], "beta": [K or empty], "rho": [K or empty], "gamma": [J],
//!   "groups": null | [J group ids, 1-based],
//!   "theta": [[K numbers] × J]          // row j = word j
//! }
//! ```
//! Numbers are written in shortest round-trip form, so a load after a save
//! reproduces every value exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Family, ModelParams};
use crate::corpus::Groups;
use crate::error::{Error, Result};

const FORMAT: &str = "dca-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    family: String,
    k: usize,
    num_words: usize,
    alpha: Vec<f64>,
    #[serde(default)]
    beta: Vec<f64>,
    #[serde(default)]
    rho: Vec<f64>,
    gamma: Vec<f64>,
    #[serde(default)]
    groups: Option<Vec<usize>>,
    theta: Vec<Vec<f64>>,
}

pub fn model_to_json(p: &ModelParams) -> String {
    let file = ModelFile {
        format: FORMAT.into(),
        version: VERSION,
        family: p.family.as_str().into(),
        k: p.k,
        num_words: p.num_words,
        alpha: p.alpha.clone(),
        beta: p.beta.clone(),
        rho: p.rho.clone(),
        gamma: p.gamma.clone(),
        groups: p
            .groups
            .as_ref()
            .map(|g| g.assignment().iter().map(|x| x + 1).collect()),
        theta: p.theta.chunks(p.k).map(<[f64]>::to_vec).collect(),
    };
    serde_json::to_string_pretty(&file).expect("model serializes")
}

pub fn model_from_json(text: &str) -> Result<ModelParams> {
    let f: ModelFile = serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if f.format != FORMAT {
        return Err(Error::Format(format!("expected format {FORMAT:?}, got {:?}", f.format)));
    }
    if f.version != VERSION {
        return Err(Error::Format(format!("unsupported version {}", f.version)));
    }
    let family: Family = f.family.parse().map_err(|e: Error| Error::Format(e.to_string()))?;
    if f.theta.len() != f.num_words || f.theta.iter().any(|r| r.len() != f.k) {
        return Err(Error::Format(format!("theta must be {} rows of {} values", f.num_words, f.k)));
    }
    let groups = match f.groups {
        None => None,
        Some(ids) => {
            if ids.contains(&0) {
                return Err(Error::Format("group ids are 1-based".into()));
            }
            Some(Groups::new(ids.into_iter().map(|g| g - 1).collect())?)
        }
    };
    let p = ModelParams {
        family,
        k: f.k,
        num_words: f.num_words,
        theta: f.theta.concat(),
        alpha: f.alpha,
        beta: f.beta,
        rho: f.rho,
        gamma: f.gamma,
        groups,
    };
    p.validate()?;
    Ok(p)
}

pub fn save_model(p: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model_to_json(p) + "\n")
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    model_from_json(&text)
}
