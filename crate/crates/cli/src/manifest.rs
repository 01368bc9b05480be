//! Run manifests: the full experiment config plus content hashes of every
//! input and reproducible output.

use std::collections::BTreeMap;
use std::path::Path;

use pmp_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::experiments::Experiment;
use crate::output::{sha256_hex, Output};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: Experiment,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

fn hash_inputs(exp: &Experiment) -> Result<BTreeMap<String, String>> {
    exp.inputs()
        .into_iter()
        .map(|p| Ok((p.display().to_string(), sha256_hex(&std::fs::read(&p)?))))
        .collect()
}

/// Runs `exp`, writes outputs and the manifest into `dir` when given.
pub fn run_recorded(mut exp: Experiment, dir: Option<&Path>) -> Result<(Manifest, Output, serde_json::Value)> {
    let inputs = hash_inputs(&exp)?;
    let mut out = Output::new();
    let report = exp.run(&mut out)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: exp,
        inputs,
        outputs: out.hashes(),
    };
    if let Some(dir) = dir {
        out.write_to(dir)?;
        std::fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok((manifest, out, report))
}

/// Outcome of re-running a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replay {
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
}

impl Replay {
    pub fn is_exact(&self) -> bool {
        self.mismatched.is_empty()
    }
}

/// Re-runs the recorded experiment and compares every output hash.
pub fn replay(manifest: &Manifest, dir: Option<&Path>) -> Result<Replay> {
    let inputs = hash_inputs(&manifest.experiment)?;
    if inputs != manifest.inputs {
        return Err(Error::Validation {
            constraint: "input hashes".into(),
            message: "inputs differ from the recorded run".into(),
        });
    }
    let (again, _, _) = run_recorded(manifest.experiment.clone(), dir)?;
    let mut names: Vec<&String> = manifest.outputs.keys().chain(again.outputs.keys()).collect();
    names.sort();
    names.dedup();
    let (mut matched, mut mismatched) = (Vec::new(), Vec::new());
    for name in names {
        if manifest.outputs.get(name) == again.outputs.get(name) {
            matched.push(name.clone());
        } else {
            mismatched.push(name.clone());
        }
    }
    Ok(Replay { matched, mismatched })
}

pub fn load(path: &Path) -> Result<Manifest> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
