//! Persistence and protocol layer: manifest / detections / split file
//! formats, annotation propagation, object-wise splitting, subset
//! selection, and annotation-frequency statistics.

pub mod detections;
pub mod manifest;
pub mod propagate;
pub mod select;
pub mod split;
pub mod stats;

use thiserror::Error;

use crate::model::ModelError;

pub use detections::{apply_detections, load_detections, save_detections, DetectionEntry};
pub use manifest::{load_manifest, save_manifest, DatasetManifest, SCHEMA_VERSION};
pub use propagate::{propagate_annotations, propagate_manifest};
pub use select::{select_images, ExposureScope, SelectionSpec, Strategy};
pub use split::{load_split, save_split, split_objectwise, SplitAssignment, SplitName};
pub use stats::annotation_frequency;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    /// Malformed record in a line-delimited file.
    #[error("line {line}: {message}")]
    Format { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("region `{region_id}`: defect `{defect_id}` annotated with conflicting boxes")]
    ConflictingAnnotation {
        region_id: String,
        defect_id: String,
    },
    #[error("object-wise split needs at least 3 objects, got {0}")]
    TooFewObjects(usize),
    #[error("split ratios must be positive and sum to 1, got {0:?}")]
    InvalidRatios([f64; 3]),
    #[error("detections reference unknown image id `{0}`")]
    UnknownImageId(String),
    #[error("duplicate region id `{0}`")]
    DuplicateRegion(String),
    #[error("identifier `{0}` contains whitespace or other forbidden characters")]
    InvalidIdentifier(String),
    #[error("split file does not cover object `{0}`")]
    UnassignedObject(String),
}

impl DatasetError {
    pub(crate) fn format(line: usize, message: impl Into<String>) -> Self {
        DatasetError::Format {
            line,
            message: message.into(),
        }
    }
}
