//! Annotation-source statistics: how often annotators picked each of
//! the 12 lighting conditions to label on.

use crate::model::CONDITION_COUNT;

use super::DatasetManifest;

/// Normalized frequency of annotator source conditions, indexed by
/// condition index. Each (region, defect) pair counts once regardless
/// of propagation state; all zeros when the dataset has no annotations.
pub fn annotation_frequency(manifest: &DatasetManifest) -> [f64; CONDITION_COUNT] {
    let mut counts = [0usize; CONDITION_COUNT];
    for region in manifest.regions() {
        let mut seen: Vec<&str> = Vec::new();
        for img in region.images() {
            for ann in &img.annotations {
                if !seen.contains(&ann.defect_id.as_str()) {
                    seen.push(&ann.defect_id);
                    counts[ann.source_condition.index()] += 1;
                }
            }
        }
    }
    let total: usize = counts.iter().sum();
    let mut out = [0.0; CONDITION_COUNT];
    if total > 0 {
        for (o, c) in out.iter_mut().zip(&counts) {
            *o = *c as f64 / total as f64;
        }
    }
    out
}
