//! Synthetic scene and detector simulator.
//!
//! Stands in for the physical acquisition rig and the external
//! detector: generates region stacks whose defects are visible only
//! under some lighting conditions, and simulates noisy detector output
//! per image. Both steps are pure functions of (config, seed), which
//! makes them usable as exact oracles for the study harness.

pub mod config;
mod generate;

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::dataset::DatasetError;
use crate::model::{ModelError, CONDITION_COUNT};

pub use config::{
    default_config_text, parse_config, AnnotationWeighting, DefectProfile, DetectorNoiseModel,
    SceneConfig, SimConfig,
};
pub use generate::{generate_dataset, simulate_detections, GeneratedDataset};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("unsatisfiable scene: {0}")]
    Unsatisfiable(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no visibility entry for region `{region_id}` defect `{defect_id}`")]
    MissingVisibility {
        region_id: String,
        defect_id: String,
    },
}

impl SimError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        SimError::Format {
            line,
            message: message.into(),
        }
    }
}

/// Realized per-condition visibility of every generated defect, keyed
/// by (region, defect). Persisted next to the manifest so detector
/// simulation can run as a separate step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VisibilityTable {
    entries: Vec<(String, String, [bool; CONDITION_COUNT])>,
    index: HashMap<(String, String), usize>,
}

impl VisibilityTable {
    pub fn insert(&mut self, region_id: &str, defect_id: &str, mask: [bool; CONDITION_COUNT]) {
        let key = (region_id.to_string(), defect_id.to_string());
        self.index.insert(key.clone(), self.entries.len());
        self.entries.push((key.0, key.1, mask));
    }

    pub fn get(&self, region_id: &str, defect_id: &str) -> Option<&[bool; CONDITION_COUNT]> {
        self.index
            .get(&(region_id.to_string(), defect_id.to_string()))
            .map(|&i| &self.entries[i].2)
    }

    pub fn entries(&self) -> &[(String, String, [bool; CONDITION_COUNT])] {
        &self.entries
    }
}

/// Sidecar file: `visibility 1` header, then one
/// `<region_id> <defect_id> <12-bit mask>` line per defect.
pub fn save_visibility<W: Write>(table: &VisibilityTable, mut out: W) -> Result<(), SimError> {
    writeln!(out, "visibility 1")?;
    for (region_id, defect_id, mask) in table.entries() {
        let bits: String = mask.iter().map(|&b| if b { '1' } else { '0' }).collect();
        writeln!(out, "{region_id} {defect_id} {bits}")?;
    }
    Ok(())
}

pub fn load_visibility<R: BufRead>(reader: R) -> Result<VisibilityTable, SimError> {
    let mut lines = reader.lines().enumerate();
    let header = lines.next().map(|(_, l)| l).transpose()?;
    if header.as_deref() != Some("visibility 1") {
        return Err(SimError::format(1, "expected `visibility 1` header"));
    }
    let mut table = VisibilityTable::default();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split(' ').collect();
        if tokens.len() != 3 {
            return Err(SimError::format(line_no, "expected 3 fields"));
        }
        if tokens[2].len() != CONDITION_COUNT {
            return Err(SimError::format(line_no, "mask must have 12 bits"));
        }
        let mut mask = [false; CONDITION_COUNT];
        for (i, ch) in tokens[2].chars().enumerate() {
            mask[i] = match ch {
                '1' => true,
                '0' => false,
                other => {
                    return Err(SimError::format(line_no, format!("bad mask bit `{other}`")))
                }
            };
        }
        table.insert(tokens[0], tokens[1], mask);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn visibility_round_trip() {
        let mut table = VisibilityTable::default();
        let mut mask = [false; CONDITION_COUNT];
        mask[0] = true;
        mask[11] = true;
        table.insert("r1", "r1-d0", mask);
        table.insert("r2", "r2-d0", [true; CONDITION_COUNT]);
        let mut buf = Vec::new();
        save_visibility(&table, &mut buf).unwrap();
        let loaded = load_visibility(buf.as_slice()).unwrap();
        assert_eq!(loaded, table);
    }

    #[test]
    fn bad_mask_rejected() {
        assert!(load_visibility("visibility 1\nr1 d0 10x100000000\n".as_bytes()).is_err());
        assert!(load_visibility("visibility 1\nr1 d0 101\n".as_bytes()).is_err());
        assert!(load_visibility("nope\n".as_bytes()).is_err());
    }
}
