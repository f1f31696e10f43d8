//! Domain vocabulary shared by every other module: boxes, lighting
//! conditions, annotations, detections, and the 12-image region stack.
//!
//! All types are immutable after construction and validated at the
//! constructor, so downstream code never has to re-check invariants.

use std::fmt;

use thiserror::Error;

/// Number of lighting conditions per region (4 modalities x 3 exposures).
pub const CONDITION_COUNT: usize = 12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid bounding box [{x_min}, {y_min}, {x_max}, {y_max}]: {reason}")]
    InvalidBox {
        x_min: f64,
        y_min: f64,
        x_max: f64,
        y_max: f64,
        reason: &'static str,
    },
    #[error("confidence {0} outside [0, 1]")]
    InvalidConfidence(f64),
    #[error("unknown modality `{0}`")]
    UnknownModality(String),
    #[error("unknown exposure `{0}`")]
    UnknownExposure(String),
    #[error("condition index {0} outside [0, 11]")]
    ConditionIndexOutOfRange(usize),
    #[error("region `{region_id}`: duplicate image for condition {condition}")]
    DuplicateCondition {
        region_id: String,
        condition: LightingCondition,
    },
    #[error("region `{region_id}`: expected 12 images, got {count}")]
    WrongImageCount { region_id: String, count: usize },
    #[error("region `{region_id}`: image record belongs to region `{image_region}`")]
    ForeignImage {
        region_id: String,
        image_region: String,
    },
    #[error("region `{region_id}`: duplicate defect id `{defect_id}` with differing boxes")]
    ConflictingAnnotation {
        region_id: String,
        defect_id: String,
    },
    #[error("region `{region_id}` is flagged invisible but carries annotations")]
    InvisibleWithAnnotations { region_id: String },
}

/// Axis-aligned rectangle in continuous image pixel coordinates,
/// origin top-left, x to the right, y downwards. `x_max`/`y_max` are
/// exclusive; area is `width * height` with no +1 pixel correction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    x_min: f64,
    y_min: f64,
    x_max: f64,
    y_max: f64,
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self, ModelError> {
        let reject = |reason| ModelError::InvalidBox {
            x_min,
            y_min,
            x_max,
            y_max,
            reason,
        };
        if ![x_min, y_min, x_max, y_max].iter().all(|v| v.is_finite()) {
            return Err(reject("non-finite coordinate"));
        }
        if x_max <= x_min || y_max <= y_min {
            return Err(reject("non-positive extent"));
        }
        Ok(Self {
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    /// Area of the overlap with `other`, 0 when disjoint.
    pub fn intersection_area(&self, other: &BoundingBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// Total order used for deterministic tie-breaking: larger area
    /// first, then lexicographic coordinates.
    pub fn tie_break_key(&self) -> impl Ord {
        (
            std::cmp::Reverse(OrdF64(self.area())),
            OrdF64(self.x_min),
            OrdF64(self.y_min),
            OrdF64(self.x_max),
            OrdF64(self.y_max),
        )
    }
}

/// Finite f64 wrapper with a total order. Inputs are validated at
/// construction so NaN never reaches a comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct OrdF64(pub f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// One of the four lighting configurations of the acquisition rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Modality {
    /// Central light, front/diffused illumination.
    C,
    /// Vertical dark-field (up/down lights).
    Ud,
    /// Horizontal dark-field (left/right lights).
    Lr,
    /// All-lateral dark-field (all four side lights).
    Udlr,
}

impl Modality {
    pub const ALL: [Modality; 4] = [Modality::C, Modality::Ud, Modality::Lr, Modality::Udlr];

    pub fn code(self) -> usize {
        match self {
            Modality::C => 0,
            Modality::Ud => 1,
            Modality::Lr => 2,
            Modality::Udlr => 3,
        }
    }

    pub fn from_code(code: usize) -> Option<Modality> {
        Modality::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::C => "C",
            Modality::Ud => "UD",
            Modality::Lr => "LR",
            Modality::Udlr => "UDLR",
        }
    }

    pub fn parse(s: &str) -> Result<Modality, ModelError> {
        match s {
            "C" => Ok(Modality::C),
            "UD" => Ok(Modality::Ud),
            "LR" => Ok(Modality::Lr),
            "UDLR" => Ok(Modality::Udlr),
            other => Err(ModelError::UnknownModality(other.to_string())),
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Effective shutter-speed level, realized by light-activation duration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Exposure {
    Low,
    Medium,
    High,
}

impl Exposure {
    pub const ALL: [Exposure; 3] = [Exposure::Low, Exposure::Medium, Exposure::High];

    pub fn code(self) -> usize {
        match self {
            Exposure::Low => 0,
            Exposure::Medium => 1,
            Exposure::High => 2,
        }
    }

    pub fn from_code(code: usize) -> Option<Exposure> {
        Exposure::ALL.get(code).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Exposure::Low => "low",
            Exposure::Medium => "medium",
            Exposure::High => "high",
        }
    }

    pub fn parse(s: &str) -> Result<Exposure, ModelError> {
        match s {
            "low" => Ok(Exposure::Low),
            "medium" => Ok(Exposure::Medium),
            "high" => Ok(Exposure::High),
            other => Err(ModelError::UnknownExposure(other.to_string())),
        }
    }
}

impl fmt::Display for Exposure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A (modality, exposure) pair; one of the 12 acquisition conditions
/// of a region stack. `index` is the canonical ordering
/// `3 * modality_code + exposure_code`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LightingCondition {
    pub modality: Modality,
    pub exposure: Exposure,
}

impl LightingCondition {
    pub fn new(modality: Modality, exposure: Exposure) -> Self {
        Self { modality, exposure }
    }

    pub fn index(self) -> usize {
        3 * self.modality.code() + self.exposure.code()
    }

    pub fn from_index(index: usize) -> Result<Self, ModelError> {
        if index >= CONDITION_COUNT {
            return Err(ModelError::ConditionIndexOutOfRange(index));
        }
        Ok(Self {
            modality: Modality::from_code(index / 3).unwrap(),
            exposure: Exposure::from_code(index % 3).unwrap(),
        })
    }

    /// All 12 conditions in canonical index order.
    pub fn all() -> impl Iterator<Item = LightingCondition> {
        (0..CONDITION_COUNT).map(|i| LightingCondition::from_index(i).unwrap())
    }
}

impl fmt::Display for LightingCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.modality, self.exposure)
    }
}

/// A labeled defect: the box drawn by the annotator plus the condition
/// the annotator labeled on. After propagation the same annotation is
/// carried verbatim by all 12 images of the stack.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub defect_id: String,
    pub bbox: BoundingBox,
    pub source_condition: LightingCondition,
}

/// A detector output box with its confidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    bbox: BoundingBox,
    confidence: f64,
}

impl Detection {
    pub fn new(bbox: BoundingBox, confidence: f64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(ModelError::InvalidConfidence(confidence));
        }
        Ok(Self { bbox, confidence })
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn confidence(&self) -> f64 {
        self.confidence
    }
}

/// An ordered collection of detections; order is insertion order and is
/// preserved by every operation that consumes it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    items: Vec<Detection>,
}

impl DetectionSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_vec(items: Vec<Detection>) -> Self {
        Self { items }
    }

    pub fn push(&mut self, det: Detection) {
        self.items.push(det);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Detection> {
        self.items.iter()
    }

    pub fn as_slice(&self) -> &[Detection] {
        &self.items
    }
}

impl<'a> IntoIterator for &'a DetectionSet {
    type Item = &'a Detection;
    type IntoIter = std::slice::Iter<'a, Detection>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

impl FromIterator<Detection> for DetectionSet {
    fn from_iter<T: IntoIterator<Item = Detection>>(iter: T) -> Self {
        Self {
            items: iter.into_iter().collect(),
        }
    }
}

/// One acquired image: a (region, condition) cell of the stack.
/// `detections` is `None` until a detections file is imported or the
/// simulator has run.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub region_id: String,
    pub condition: LightingCondition,
    pub uri: String,
    pub annotations: Vec<Annotation>,
    pub detections: Option<DetectionSet>,
}

impl ImageRecord {
    pub fn new(region_id: &str, condition: LightingCondition, uri: String) -> Self {
        Self {
            image_id: image_id(region_id, condition),
            region_id: region_id.to_string(),
            condition,
            uri,
            annotations: Vec::new(),
            detections: None,
        }
    }
}

/// Canonical image identifier: `<region_id>/<modality>/<exposure>`.
pub fn image_id(region_id: &str, condition: LightingCondition) -> String {
    format!("{region_id}/{condition}")
}

/// The 12 pixel-registered images of one defective region, sharing the
/// same annotations. `visible == false` means the defect was not
/// spottable in any of the 12 conditions; such regions carry zero
/// annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionStack {
    pub region_id: String,
    pub object_id: String,
    pub visible: bool,
    images: Vec<ImageRecord>,
}

impl RegionStack {
    /// Builds a stack from exactly 12 image records, one per condition.
    /// Records may arrive in any order; they are stored sorted by
    /// condition index.
    pub fn new(
        region_id: String,
        object_id: String,
        visible: bool,
        mut images: Vec<ImageRecord>,
    ) -> Result<Self, ModelError> {
        if images.len() != CONDITION_COUNT {
            return Err(ModelError::WrongImageCount {
                region_id,
                count: images.len(),
            });
        }
        let mut seen = [false; CONDITION_COUNT];
        for img in &images {
            if img.region_id != region_id {
                return Err(ModelError::ForeignImage {
                    region_id,
                    image_region: img.region_id.clone(),
                });
            }
            let idx = img.condition.index();
            if seen[idx] {
                return Err(ModelError::DuplicateCondition {
                    region_id,
                    condition: img.condition,
                });
            }
            seen[idx] = true;
        }
        images.sort_by_key(|img| img.condition.index());
        if !visible && images.iter().any(|img| !img.annotations.is_empty()) {
            return Err(ModelError::InvisibleWithAnnotations { region_id });
        }
        Ok(Self {
            region_id,
            object_id,
            visible,
            images,
        })
    }

    pub fn images(&self) -> &[ImageRecord] {
        &self.images
    }

    pub fn image(&self, condition: LightingCondition) -> &ImageRecord {
        &self.images[condition.index()]
    }

    /// Replaces every image's detection set with `detections` (identical
    /// copies), leaving annotations untouched.
    pub fn with_detections_everywhere(&self, detections: DetectionSet) -> RegionStack {
        let mut out = self.clone();
        for img in &mut out.images {
            img.detections = Some(detections.clone());
        }
        out
    }

    /// Maps each image's detection set through `f`.
    pub fn map_detections(
        &self,
        mut f: impl FnMut(&ImageRecord) -> Option<DetectionSet>,
    ) -> RegionStack {
        let mut out = self.clone();
        for img in &mut out.images {
            img.detections = f(img);
        }
        out
    }
}

/// Stable integer index of a lighting condition, `(C, low) = 0` through
/// `(UDLR, high) = 11`.
pub fn condition_index(condition: LightingCondition) -> usize {
    condition.index()
}

/// Area of a valid bounding box; always strictly positive.
pub fn box_area(b: &BoundingBox) -> f64 {
    b.area()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x0: f64, y0: f64, x1: f64, y1: f64) -> BoundingBox {
        BoundingBox::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn condition_index_endpoints() {
        assert_eq!(
            condition_index(LightingCondition::new(Modality::C, Exposure::Low)),
            0
        );
        assert_eq!(
            condition_index(LightingCondition::new(Modality::Udlr, Exposure::High)),
            11
        );
        // 3 * 1 + 1
        assert_eq!(
            condition_index(LightingCondition::new(Modality::Ud, Exposure::Medium)),
            4
        );
    }

    #[test]
    fn condition_index_bijective() {
        let mut seen = [false; CONDITION_COUNT];
        for c in LightingCondition::all() {
            let idx = c.index();
            assert!(!seen[idx]);
            seen[idx] = true;
            assert_eq!(LightingCondition::from_index(idx).unwrap(), c);
        }
        assert!(seen.iter().all(|&s| s));
        assert!(LightingCondition::from_index(12).is_err());
    }

    #[test]
    fn box_area_examples() {
        assert_eq!(box_area(&bx(0.0, 0.0, 10.0, 10.0)), 100.0);
        assert_eq!(box_area(&bx(0.0, 0.0, 1.0, 1.0)), 1.0);
        // 5 * 4
        assert_eq!(box_area(&bx(2.5, 0.0, 7.5, 4.0)), 20.0);
    }

    #[test]
    fn degenerate_boxes_rejected() {
        assert!(BoundingBox::new(0.0, 0.0, 0.0, 10.0).is_err());
        assert!(BoundingBox::new(5.0, 0.0, 4.0, 10.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 10.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::INFINITY, 10.0).is_err());
    }

    #[test]
    fn confidence_bounds() {
        let b = bx(0.0, 0.0, 1.0, 1.0);
        assert!(Detection::new(b, 0.0).is_ok());
        assert!(Detection::new(b, 1.0).is_ok());
        assert!(Detection::new(b, -0.1).is_err());
        assert!(Detection::new(b, 1.1).is_err());
    }

    fn stack_images(region_id: &str) -> Vec<ImageRecord> {
        LightingCondition::all()
            .map(|c| ImageRecord::new(region_id, c, format!("mem://{region_id}/{c}")))
            .collect()
    }

    #[test]
    fn stack_requires_all_conditions_once() {
        let imgs = stack_images("r1");
        assert!(RegionStack::new("r1".into(), "o1".into(), true, imgs).is_ok());

        let mut dup = stack_images("r1");
        dup[3] = dup[2].clone();
        let err = RegionStack::new("r1".into(), "o1".into(), true, dup).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateCondition { .. }));

        let short = stack_images("r1")[..11].to_vec();
        let err = RegionStack::new("r1".into(), "o1".into(), true, short).unwrap_err();
        assert!(matches!(err, ModelError::WrongImageCount { .. }));
    }

    #[test]
    fn invisible_stack_rejects_annotations() {
        let mut imgs = stack_images("r1");
        imgs[0].annotations.push(Annotation {
            defect_id: "d1".into(),
            bbox: bx(0.0, 0.0, 5.0, 5.0),
            source_condition: LightingCondition::from_index(0).unwrap(),
        });
        let err = RegionStack::new("r1".into(), "o1".into(), false, imgs).unwrap_err();
        assert!(matches!(err, ModelError::InvisibleWithAnnotations { .. }));
    }
}
