//! Object-wise train/val/test splitting and the split file format.
//!
//! All regions of one object always land in the same split. Counts per
//! split follow largest-remainder apportionment of the ratios over the
//! object count, with ties resolved in train/val/test priority order.
//!
//! File format:
//!
//! ```text
//! split seed=<u64> ratios=<train>,<val>,<test>
//! <object_id> <train|val|test>
//! ```

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;

use crate::seeds;

use super::{DatasetError, DatasetManifest};

pub const DEFAULT_RATIOS: [f64; 3] = [0.70, 0.15, 0.15];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SplitName {
    Train,
    Val,
    Test,
}

impl SplitName {
    pub const ALL: [SplitName; 3] = [SplitName::Train, SplitName::Val, SplitName::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Val => "val",
            SplitName::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<SplitName> {
        match s {
            "train" => Some(SplitName::Train),
            "val" => Some(SplitName::Val),
            "test" => Some(SplitName::Test),
            _ => None,
        }
    }
}

impl fmt::Display for SplitName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An exhaustive, disjoint assignment of objects to splits, along with
/// the seed and ratios that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitAssignment {
    pub seed: u64,
    pub ratios: [f64; 3],
    entries: Vec<(String, SplitName)>,
    by_object: HashMap<String, SplitName>,
}

impl SplitAssignment {
    fn new(seed: u64, ratios: [f64; 3], entries: Vec<(String, SplitName)>) -> Self {
        let by_object = entries.iter().cloned().collect();
        Self {
            seed,
            ratios,
            entries,
            by_object,
        }
    }

    pub fn entries(&self) -> &[(String, SplitName)] {
        &self.entries
    }

    pub fn split_of(&self, object_id: &str) -> Option<SplitName> {
        self.by_object.get(object_id).copied()
    }

    pub fn count(&self, split: SplitName) -> usize {
        self.entries.iter().filter(|(_, s)| *s == split).count()
    }
}

fn validate_ratios(ratios: [f64; 3]) -> Result<(), DatasetError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|&r| r <= 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(DatasetError::InvalidRatios(ratios));
    }
    Ok(())
}

/// Largest-remainder apportionment of `ratios` over `n` items; ties on
/// the fractional remainder favor earlier splits (train, then val,
/// then test).
fn apportion(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    let mut remainders = [0.0f64; 3];
    for i in 0..3 {
        let quota = ratios[i] * n as f64;
        counts[i] = quota.floor() as usize;
        remainders[i] = quota - quota.floor();
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| remainders[b].partial_cmp(&remainders[a]).unwrap().then(a.cmp(&b)));
    for k in 0..(n - assigned) {
        counts[order[k % 3]] += 1;
    }
    counts
}

/// Shuffles the manifest's objects with a seeded permutation and
/// apportions them to train/val/test. Needs at least 3 objects so each
/// split is non-empty by construction of positive ratios.
pub fn split_objectwise(
    manifest: &DatasetManifest,
    ratios: [f64; 3],
    seed: u64,
) -> Result<SplitAssignment, DatasetError> {
    validate_ratios(ratios)?;
    let mut objects: Vec<String> = manifest
        .object_ids()
        .into_iter()
        .map(str::to_string)
        .collect();
    if objects.len() < 3 {
        return Err(DatasetError::TooFewObjects(objects.len()));
    }
    let mut rng = seeds::rng(seeds::derive(seed, 0));
    objects.shuffle(&mut rng);
    let counts = apportion(objects.len(), ratios);

    let mut entries: Vec<(String, SplitName)> = Vec::with_capacity(objects.len());
    let mut it = objects.into_iter();
    for (split, &count) in SplitName::ALL.iter().zip(&counts) {
        for _ in 0..count {
            entries.push((it.next().unwrap(), *split));
        }
    }
    // file order is object order, not shuffle order
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(SplitAssignment::new(seed, ratios, entries))
}

pub fn save_split<W: Write>(split: &SplitAssignment, mut out: W) -> Result<(), DatasetError> {
    writeln!(
        out,
        "split seed={} ratios={},{},{}",
        split.seed, split.ratios[0], split.ratios[1], split.ratios[2]
    )?;
    for (object_id, name) in &split.entries {
        writeln!(out, "{object_id} {name}")?;
    }
    Ok(())
}

pub fn load_split<R: BufRead>(reader: R) -> Result<SplitAssignment, DatasetError> {
    let mut lines = reader.lines().enumerate();
    let (first_no, header) = match lines.next() {
        Some((n, l)) => (n + 1, l?),
        None => return Err(DatasetError::format(1, "empty file, expected split header")),
    };
    let tokens: Vec<&str> = header.split(' ').collect();
    if tokens.len() != 3 || tokens[0] != "split" {
        return Err(DatasetError::format(
            first_no,
            "expected `split seed=<seed> ratios=<train>,<val>,<test>`",
        ));
    }
    let seed = tokens[1]
        .strip_prefix("seed=")
        .and_then(|s| s.parse::<u64>().ok())
        .ok_or_else(|| DatasetError::format(first_no, format!("bad seed field `{}`", tokens[1])))?;
    let ratio_list = tokens[2]
        .strip_prefix("ratios=")
        .ok_or_else(|| DatasetError::format(first_no, format!("bad ratios field `{}`", tokens[2])))?;
    let parts: Vec<f64> = ratio_list
        .split(',')
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| DatasetError::format(first_no, format!("bad ratios `{ratio_list}`")))?;
    if parts.len() != 3 {
        return Err(DatasetError::format(first_no, "ratios need 3 values"));
    }
    let ratios = [parts[0], parts[1], parts[2]];
    validate_ratios(ratios)?;

    let mut entries = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        let tokens: Vec<&str> = line.split(' ').collect();
        if tokens.len() != 2 {
            return Err(DatasetError::format(line_no, "expected `<object_id> <split>`"));
        }
        let name = SplitName::parse(tokens[1]).ok_or_else(|| {
            DatasetError::format(line_no, format!("unknown split name `{}`", tokens[1]))
        })?;
        if !seen.insert(tokens[0].to_string()) {
            return Err(DatasetError::format(
                line_no,
                format!("object `{}` assigned twice", tokens[0]),
            ));
        }
        entries.push((tokens[0].to_string(), name));
    }
    Ok(SplitAssignment::new(seed, ratios, entries))
}
