//! Toolkit for multi-illumination surface-defect detection experiments.
//!
//! A defective region is photographed under 12 lighting conditions
//! (4 modalities x 3 exposures) by a single fixed camera, giving a
//! pixel-registered *region stack* that shares one set of annotations.
//! This crate provides:
//!
//! - the region-stack data model and annotation propagation
//!   ([`model`], [`dataset`]);
//! - detection metrics: IoU matching, Precision/Recall/F1 at a fixed
//!   confidence cutoff, average precision, PR curves ([`metrics`]);
//! - late fusion: greedy NMS over the pooled detections of a stack,
//!   with the surviving boxes replicated to every image ([`fusion`]);
//! - object-wise dataset splitting and the modality-constrained subset
//!   selections used by the four evaluation studies ([`dataset`]);
//! - a synthetic scene and detector simulator with modality-dependent
//!   defect visibility, used as the verification oracle ([`sim`]);
//! - the study harness that composes all of the above into report
//!   tables ([`study`]) and PR-curve CSV/SVG output ([`plot`]).
//!
//! Everything randomized is a pure function of its inputs and a seed.

pub mod dataset;
pub mod fusion;
pub mod metrics;
pub mod model;
pub mod plot;
pub mod seeds;
pub mod sim;
pub mod study;

mod testutil;
