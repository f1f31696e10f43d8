//! Greedy non-maximum suppression and the late-fusion step that pools
//! detections from all 12 images of a region stack, suppresses them,
//! and writes the surviving set back onto every image.

use thiserror::Error;

use crate::metrics::iou;
use crate::model::{Detection, DetectionSet, OrdF64, RegionStack};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("NMS IoU threshold {0} outside (0, 1]")]
    InvalidTheta(f64),
}

/// Parameters of the suppression step: the IoU threshold at or above
/// which a candidate is discarded against a kept box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusionParams {
    theta: f64,
}

impl FusionParams {
    pub fn new(theta: f64) -> Result<Self, FusionError> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(FusionError::InvalidTheta(theta));
        }
        Ok(Self { theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
}

impl Default for FusionParams {
    fn default() -> Self {
        Self { theta: 0.5 }
    }
}

/// Greedy non-maximum suppression.
///
/// Repeatedly selects the highest-confidence remaining box, keeps it,
/// and removes every remaining candidate whose IoU with it is >= theta.
/// Confidences of kept boxes are unchanged; output is ordered by
/// selection, i.e. descending confidence. Ties on confidence resolve
/// by larger area, then lexicographic coordinates, then input order.
pub fn nms(candidates: &DetectionSet, params: &FusionParams) -> DetectionSet {
    let items = candidates.as_slice();
    let order = crate::metrics::confidence_order(items);
    let mut alive = vec![true; items.len()];
    let mut kept: Vec<Detection> = Vec::new();

    for &i in &order {
        if !alive[i] {
            continue;
        }
        alive[i] = false;
        let selected = items[i];
        for &j in &order {
            if alive[j] && iou(selected.bbox(), items[j].bbox()) >= params.theta {
                alive[j] = false;
            }
        }
        kept.push(selected);
    }
    DetectionSet::from_vec(kept)
}

/// Late fusion for one region stack: concatenate the detections of all
/// 12 images (condition-index order), suppress the pooled set, and
/// replace every image's detections with identical copies of the
/// result. Annotations and visibility are untouched. Images whose
/// detections are still unset contribute nothing.
pub fn fuse_region(stack: &RegionStack, params: &FusionParams) -> RegionStack {
    let pooled: DetectionSet = stack
        .images()
        .iter()
        .flat_map(|img| img.detections.iter().flat_map(|d| d.iter()))
        .copied()
        .collect();
    stack.with_detections_everywhere(nms(&pooled, params))
}

/// Literal transcription of the greedy suppression loop, kept free of
/// data-structure shortcuts; serves as the oracle the optimized path is
/// tested against.
pub fn nms_reference(candidates: &DetectionSet, params: &FusionParams) -> DetectionSet {
    let mut pool: Vec<Detection> = candidates.as_slice().to_vec();
    let mut kept: Vec<Detection> = Vec::new();
    while !pool.is_empty() {
        let argmax = pool
            .iter()
            .enumerate()
            .min_by_key(|(_, d)| {
                (
                    std::cmp::Reverse(OrdF64(d.confidence())),
                    d.bbox().tie_break_key(),
                )
            })
            .map(|(i, _)| i)
            .unwrap();
        let selected = pool.remove(argmax);
        pool.retain(|d| iou(selected.bbox(), d.bbox()) < params.theta);
        kept.push(selected);
    }
    DetectionSet::from_vec(kept)
}
