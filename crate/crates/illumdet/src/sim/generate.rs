//! Scene generation and detector simulation.
//!
//! `generate_dataset` builds a manifest of region stacks with
//! per-condition defect visibility; `simulate_detections` replays a
//! noisy detector over that manifest. Both draw from per-region (and
//! per-image) derived RNG streams, so output is independent of
//! evaluation order and stable under config-preserving edits.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Normal, Poisson};
use rayon::prelude::*;

use crate::dataset::DatasetManifest;
use crate::model::{
    Annotation, BoundingBox, Detection, DetectionSet, ImageRecord, LightingCondition, RegionStack,
    CONDITION_COUNT,
};
use crate::seeds;

use super::config::{
    AnnotationWeighting, DefectProfile, DetectorNoiseModel, SceneConfig, ANNOTATION_SOURCE_PRIOR,
};
use super::{SimError, VisibilityTable};

/// Output of scene generation: the manifest plus the realized
/// visibility of every defect, which detector simulation needs later.
#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub manifest: DatasetManifest,
    pub visibility: VisibilityTable,
}

/// Retries for a defect whose sampled visibility mask came out empty;
/// profiles are validated to be visible somewhere, so in practice one
/// or two draws suffice.
const MASK_RETRIES: usize = 64;

pub fn generate_dataset(scene: &SceneConfig, seed: u64) -> Result<GeneratedDataset, SimError> {
    scene.validate()?;
    let mut regions = Vec::with_capacity(scene.region_count);
    let mut visibility = VisibilityTable::default();
    let profile_weights =
        WeightedIndex::new(scene.profiles.iter().map(|p| p.weight)).expect("validated weights");

    for r in 0..scene.region_count {
        let mut rng = seeds::rng(seeds::derive(seed, r as u64));
        let region_id = format!("reg-{r:05}");
        let object_id = format!("obj-{:05}", r / scene.regions_per_object);
        let visible = !rng.gen_bool(scene.invisible_rate);

        let mut annotations = Vec::new();
        if visible {
            let defect_count = rng.gen_range(scene.min_defects..=scene.max_defects);
            for d in 0..defect_count {
                let profile = &scene.profiles[profile_weights.sample(&mut rng)];
                let bbox = sample_box(&mut rng, scene);
                let mask = sample_mask(&mut rng, profile, scene)?;
                let source_condition = sample_source_condition(&mut rng, &mask, scene);
                let defect_id = format!("{region_id}-d{d}");
                visibility.insert(&region_id, &defect_id, mask);
                annotations.push(Annotation {
                    defect_id,
                    bbox,
                    source_condition,
                });
            }
        }

        let images = LightingCondition::all()
            .map(|c| {
                let mut img =
                    ImageRecord::new(&region_id, c, format!("sim://{region_id}/{c}"));
                img.annotations = annotations.clone();
                img
            })
            .collect();
        regions.push(RegionStack::new(region_id, object_id, visible, images)?);
    }

    let manifest = DatasetManifest::new(regions, Some(format!("seed={seed}")))?;
    Ok(GeneratedDataset {
        manifest,
        visibility,
    })
}

/// Applies the simulated detector to every image of the manifest; the
/// result has `Some` detections on every image.
pub fn simulate_detections(
    manifest: &DatasetManifest,
    visibility: &VisibilityTable,
    scene: &SceneConfig,
    noise: &DetectorNoiseModel,
    seed: u64,
) -> Result<DatasetManifest, SimError> {
    scene.validate()?;
    noise.validate()?;
    // Regions are independent derived-seed streams, so the parallel map
    // is order-deterministic regardless of worker count.
    let out_regions = manifest
        .regions()
        .par_iter()
        .enumerate()
        .map(|(ri, stack)| simulate_region(stack, ri, visibility, scene, noise, seed))
        .collect::<Result<Vec<_>, SimError>>()?;
    Ok(DatasetManifest::new(
        out_regions,
        manifest.seed_provenance.clone(),
    )?)
}

fn simulate_region(
    stack: &RegionStack,
    ri: usize,
    visibility: &VisibilityTable,
    scene: &SceneConfig,
    noise: &DetectorNoiseModel,
    seed: u64,
) -> Result<RegionStack, SimError> {
    let mut images = Vec::with_capacity(CONDITION_COUNT);
    for (ci, img) in stack.images().iter().enumerate() {
        let mut rng = seeds::rng(seeds::derive(seeds::derive(seed, ri as u64), ci as u64));
        let mut dets = DetectionSet::new();
        for ann in &img.annotations {
            let mask = visibility.get(&stack.region_id, &ann.defect_id).ok_or_else(|| {
                SimError::MissingVisibility {
                    region_id: stack.region_id.clone(),
                    defect_id: ann.defect_id.clone(),
                }
            })?;
            if mask[ci] && rng.gen_bool(noise.detect_probability) {
                let bbox = jitter_box(&mut rng, &ann.bbox, noise.jitter_std, scene);
                let conf = scaled_beta(
                    &mut rng,
                    noise.true_confidence_beta,
                    noise.true_confidence_range,
                );
                dets.push(Detection::new(bbox, conf).expect("confidence in range"));
            }
        }
        for _ in 0..poisson_count(&mut rng, noise.false_positive_rate) {
            let bbox = sample_box(&mut rng, scene);
            let conf = scaled_beta(
                &mut rng,
                noise.false_confidence_beta,
                noise.false_confidence_range,
            );
            dets.push(Detection::new(bbox, conf).expect("confidence in range"));
        }
        let mut img = img.clone();
        img.detections = Some(dets);
        images.push(img);
    }
    Ok(RegionStack::new(
        stack.region_id.clone(),
        stack.object_id.clone(),
        stack.visible,
        images,
    )?)
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi <= lo {
        lo
    } else {
        rng.gen_range(lo..hi)
    }
}

/// Random box with side lengths in the configured size range, fully
/// inside the image.
fn sample_box(rng: &mut ChaCha8Rng, scene: &SceneConfig) -> BoundingBox {
    let w = uniform(rng, scene.min_defect_size, scene.max_defect_size);
    let h = uniform(rng, scene.min_defect_size, scene.max_defect_size);
    let x0 = uniform(rng, 0.0, scene.image_width - w);
    let y0 = uniform(rng, 0.0, scene.image_height - h);
    BoundingBox::new(x0, y0, x0 + w, y0 + h).expect("positive extent by construction")
}

/// Per-condition Bernoulli visibility; an all-false draw is resampled
/// because a defect in a visible region must be spottable somewhere.
fn sample_mask(
    rng: &mut ChaCha8Rng,
    profile: &DefectProfile,
    scene: &SceneConfig,
) -> Result<[bool; CONDITION_COUNT], SimError> {
    for _ in 0..MASK_RETRIES {
        let mut mask = [false; CONDITION_COUNT];
        for (i, slot) in mask.iter_mut().enumerate() {
            let c = LightingCondition::from_index(i).unwrap();
            *slot = rng.gen_bool(profile.visibility(c, scene.exposure_multipliers));
        }
        if mask.iter().any(|&b| b) {
            return Ok(mask);
        }
    }
    Err(SimError::Unsatisfiable(format!(
        "profile `{}` produced no visible condition after {} draws",
        profile.name, MASK_RETRIES
    )))
}

/// Draws the condition the annotator labels on, restricted to the
/// conditions where the defect is visible.
fn sample_source_condition(
    rng: &mut ChaCha8Rng,
    mask: &[bool; CONDITION_COUNT],
    scene: &SceneConfig,
) -> LightingCondition {
    let candidates: Vec<usize> = (0..CONDITION_COUNT).filter(|&i| mask[i]).collect();
    let weights: Vec<f64> = candidates
        .iter()
        .map(|&i| match scene.annotation_weighting {
            AnnotationWeighting::Uniform => 1.0,
            AnnotationWeighting::Profiled => ANNOTATION_SOURCE_PRIOR[i],
        })
        .collect();
    let dist = WeightedIndex::new(&weights).expect("non-empty positive weights");
    LightingCondition::from_index(candidates[dist.sample(rng)]).unwrap()
}

/// Gaussian corner jitter, clamped to the image; a box that collapses
/// under jitter falls back to the ground-truth coordinates.
fn jitter_box(
    rng: &mut ChaCha8Rng,
    gt: &BoundingBox,
    std: f64,
    scene: &SceneConfig,
) -> BoundingBox {
    if std == 0.0 {
        return *gt;
    }
    let normal = Normal::new(0.0, std).expect("validated std");
    let x0 = (gt.x_min() + normal.sample(rng)).clamp(0.0, scene.image_width);
    let y0 = (gt.y_min() + normal.sample(rng)).clamp(0.0, scene.image_height);
    let x1 = (gt.x_max() + normal.sample(rng)).clamp(0.0, scene.image_width);
    let y1 = (gt.y_max() + normal.sample(rng)).clamp(0.0, scene.image_height);
    BoundingBox::new(x0, y0, x1, y1).unwrap_or(*gt)
}

/// Beta sample rescaled into `[lo, hi]`; a degenerate range short-cuts
/// to the constant without consuming randomness differently.
fn scaled_beta(rng: &mut ChaCha8Rng, (a, b): (f64, f64), (lo, hi): (f64, f64)) -> f64 {
    if hi <= lo {
        return lo;
    }
    let beta = Beta::new(a, b).expect("validated beta parameters");
    (lo + (hi - lo) * beta.sample(rng)).clamp(0.0, 1.0)
}

fn poisson_count(rng: &mut ChaCha8Rng, rate: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(rate).expect("validated rate");
    dist.sample(rng) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::SimConfig;

    fn small_scene() -> SceneConfig {
        SceneConfig {
            region_count: 8,
            regions_per_object: 2,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let scene = small_scene();
        let a = generate_dataset(&scene, 11).unwrap();
        let b = generate_dataset(&scene, 11).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.visibility, b.visibility);
        let c = generate_dataset(&scene, 12).unwrap();
        assert_ne!(a.manifest, c.manifest);
    }

    #[test]
    fn generated_shape_matches_config() {
        let scene = small_scene();
        let out = generate_dataset(&scene, 3).unwrap();
        assert_eq!(out.manifest.regions().len(), 8);
        assert_eq!(out.manifest.image_count(), 96);
        assert_eq!(out.manifest.object_ids().len(), 4);
        for stack in out.manifest.regions() {
            for img in stack.images() {
                // Annotations are pre-propagated: every image of a stack
                // carries the identical list.
                assert_eq!(img.annotations, stack.images()[0].annotations);
                for ann in &img.annotations {
                    assert!(ann.bbox.x_max() <= scene.image_width);
                    assert!(ann.bbox.y_max() <= scene.image_height);
                    assert!(out.visibility.get(&stack.region_id, &ann.defect_id).is_some());
                }
            }
            if stack.visible {
                let n = stack.images()[0].annotations.len();
                assert!((scene.min_defects..=scene.max_defects).contains(&n));
            }
        }
    }

    #[test]
    fn source_condition_is_visible() {
        let out = generate_dataset(&small_scene(), 17).unwrap();
        for stack in out.manifest.regions() {
            for ann in &stack.images()[0].annotations {
                let mask = out.visibility.get(&stack.region_id, &ann.defect_id).unwrap();
                assert!(mask[ann.source_condition.index()]);
            }
        }
    }

    #[test]
    fn detections_cover_every_image_and_reproduce() {
        let cfg = SimConfig::default();
        let scene = small_scene();
        let gen = generate_dataset(&scene, 5).unwrap();
        let a = simulate_detections(&gen.manifest, &gen.visibility, &scene, &cfg.detector, 9)
            .unwrap();
        let b = simulate_detections(&gen.manifest, &gen.visibility, &scene, &cfg.detector, 9)
            .unwrap();
        assert_eq!(a, b);
        for img in a.images() {
            assert!(img.detections.is_some());
        }
    }

    #[test]
    fn detections_respect_visibility() {
        // Perfect detector, no noise: a detection appears exactly on the
        // conditions where the defect is visible.
        let scene = small_scene();
        let noise = DetectorNoiseModel {
            detect_probability: 1.0,
            jitter_std: 0.0,
            true_confidence_range: (1.0, 1.0),
            false_positive_rate: 0.0,
            ..DetectorNoiseModel::default()
        };
        let gen = generate_dataset(&scene, 21).unwrap();
        let sim = simulate_detections(&gen.manifest, &gen.visibility, &scene, &noise, 1).unwrap();
        for stack in sim.regions() {
            for (ci, img) in stack.images().iter().enumerate() {
                let expected: usize = img
                    .annotations
                    .iter()
                    .filter(|a| gen.visibility.get(&stack.region_id, &a.defect_id).unwrap()[ci])
                    .count();
                let dets = img.detections.as_ref().unwrap();
                assert_eq!(dets.len(), expected);
                for d in dets {
                    assert_eq!(d.confidence(), 1.0);
                }
            }
        }
    }

    #[test]
    fn missing_visibility_is_an_error() {
        let scene = small_scene();
        let gen = generate_dataset(&scene, 2).unwrap();
        let empty = VisibilityTable::default();
        let has_defects = gen.manifest.regions().iter().any(|s| s.visible);
        if has_defects {
            let err = simulate_detections(
                &gen.manifest,
                &empty,
                &scene,
                &DetectorNoiseModel::default(),
                0,
            );
            assert!(matches!(err, Err(SimError::MissingVisibility { .. })));
        }
    }
}
