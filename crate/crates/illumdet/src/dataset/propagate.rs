//! Annotation propagation: the single annotator-drawn box of each
//! defect is copied verbatim onto all 12 images of its region stack.
//! The stack's images are pixel-registered, so the copy is by
//! coordinate identity.

use crate::model::{Annotation, RegionStack};

use super::{DatasetError, DatasetManifest};

/// Expands every defect's annotation to all 12 images. Invisible
/// regions stay annotation-free. A defect annotated with differing
/// boxes (or differing source conditions) on two images is a data
/// integrity error.
pub fn propagate_annotations(stack: &RegionStack) -> Result<RegionStack, DatasetError> {
    if !stack.visible {
        return Ok(stack.clone());
    }
    // defects in first-appearance order, scanning condition order
    let mut defects: Vec<Annotation> = Vec::new();
    for img in stack.images() {
        for ann in &img.annotations {
            match defects.iter().find(|d| d.defect_id == ann.defect_id) {
                Some(existing) => {
                    if existing.bbox != ann.bbox
                        || existing.source_condition != ann.source_condition
                    {
                        return Err(DatasetError::ConflictingAnnotation {
                            region_id: stack.region_id.clone(),
                            defect_id: ann.defect_id.clone(),
                        });
                    }
                }
                None => defects.push(ann.clone()),
            }
        }
    }
    let mut out = stack.clone();
    let propagated = RegionStack::new(
        out.region_id.clone(),
        out.object_id.clone(),
        out.visible,
        out.images()
            .iter()
            .map(|img| {
                let mut img = img.clone();
                img.annotations = defects.clone();
                img
            })
            .collect(),
    )?;
    out = propagated;
    Ok(out)
}

/// Propagates every region of a manifest.
pub fn propagate_manifest(manifest: &DatasetManifest) -> Result<DatasetManifest, DatasetError> {
    manifest.map_regions(|stack| propagate_annotations(stack))
}
