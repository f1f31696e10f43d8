//! Subset selection for the modality-constrained studies: which images
//! of a split take part in an experiment.

use crate::model::{Exposure, ImageRecord, LightingCondition, Modality};
use crate::seeds;

use rand::seq::SliceRandom;
use rand::Rng;

use super::{DatasetError, DatasetManifest, SplitAssignment, SplitName};

/// Whether the random-modalities strategy draws one exposure per chosen
/// modality or a single exposure for the whole region. Either way a
/// region contributes exactly 3 images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExposureScope {
    #[default]
    PerImage,
    PerRegion,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Strategy {
    /// All 3 exposures of one modality for every region.
    SingleModality(Modality),
    /// Per region, 3 of the 4 modalities with a random exposure each.
    RandomModalities(ExposureScope),
    /// A quarter of the regions (floor), with all 12 of their images.
    QuarterRegions,
    /// Every image of the split.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionSpec {
    pub strategy: Strategy,
    pub seed: u64,
}

impl SelectionSpec {
    pub fn describe(&self) -> String {
        match self.strategy {
            Strategy::SingleModality(m) => format!("single_modality:{m}"),
            Strategy::RandomModalities(ExposureScope::PerImage) => "random_modalities".into(),
            Strategy::RandomModalities(ExposureScope::PerRegion) => {
                "random_modalities:per_region_exposure".into()
            }
            Strategy::QuarterRegions => "quarter_regions".into(),
            Strategy::Full => "full".into(),
        }
    }
}

/// Picks the image records of `split` named by the selection strategy.
/// Output order follows manifest order; randomized strategies are pure
/// functions of (manifest, split, spec).
pub fn select_images<'a>(
    manifest: &'a DatasetManifest,
    split: &SplitAssignment,
    split_name: SplitName,
    spec: &SelectionSpec,
) -> Result<Vec<&'a ImageRecord>, DatasetError> {
    let regions: Vec<_> = manifest
        .regions()
        .iter()
        .filter(|r| match split.split_of(&r.object_id) {
            Some(s) => s == split_name,
            None => true, // caller may pass an all-covering split; missing objects checked below
        })
        .collect();
    for r in &regions {
        if split.split_of(&r.object_id).is_none() {
            return Err(DatasetError::UnassignedObject(r.object_id.clone()));
        }
    }

    let mut out = Vec::new();
    match spec.strategy {
        Strategy::SingleModality(modality) => {
            for region in &regions {
                for exposure in Exposure::ALL {
                    out.push(region.image(LightingCondition::new(modality, exposure)));
                }
            }
        }
        Strategy::RandomModalities(scope) => {
            for (idx, region) in regions.iter().enumerate() {
                let mut rng = seeds::rng(seeds::derive(spec.seed, idx as u64));
                let mut modalities = Modality::ALL;
                modalities.shuffle(&mut rng);
                let mut chosen: Vec<Modality> = modalities[..3].to_vec();
                chosen.sort();
                let region_exposure = Exposure::ALL[rng.gen_range(0..3)];
                for modality in chosen {
                    let exposure = match scope {
                        ExposureScope::PerRegion => region_exposure,
                        ExposureScope::PerImage => Exposure::ALL[rng.gen_range(0..3)],
                    };
                    out.push(region.image(LightingCondition::new(modality, exposure)));
                }
            }
        }
        Strategy::QuarterRegions => {
            let keep = regions.len() / 4;
            let mut order: Vec<usize> = (0..regions.len()).collect();
            let mut rng = seeds::rng(seeds::derive(spec.seed, 0));
            order.shuffle(&mut rng);
            let mut kept: Vec<usize> = order[..keep].to_vec();
            kept.sort_unstable();
            for idx in kept {
                out.extend(regions[idx].images().iter());
            }
        }
        Strategy::Full => {
            for region in &regions {
                out.extend(region.images().iter());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::split::{split_objectwise, DEFAULT_RATIOS};
    use crate::testutil::manifest_with_objects;
    use std::collections::HashMap;

    fn setup(objects: usize) -> (DatasetManifest, SplitAssignment) {
        let manifest = manifest_with_objects(objects, 2);
        let split = split_objectwise(&manifest, DEFAULT_RATIOS, 11).unwrap();
        (manifest, split)
    }

    #[test]
    fn single_modality_takes_three_per_region() {
        let (manifest, split) = setup(20);
        let spec = SelectionSpec {
            strategy: Strategy::SingleModality(Modality::Udlr),
            seed: 0,
        };
        let picked = select_images(&manifest, &split, SplitName::Test, &spec).unwrap();
        let test_regions = manifest
            .regions()
            .iter()
            .filter(|r| split.split_of(&r.object_id) == Some(SplitName::Test))
            .count();
        assert_eq!(picked.len(), 3 * test_regions);
        assert!(picked.iter().all(|img| img.condition.modality == Modality::Udlr));
    }

    #[test]
    fn random_modalities_distinct_per_region() {
        let (manifest, split) = setup(40);
        let spec = SelectionSpec {
            strategy: Strategy::RandomModalities(ExposureScope::PerImage),
            seed: 3,
        };
        let picked = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
        let mut per_region: HashMap<&str, Vec<Modality>> = HashMap::new();
        for img in &picked {
            per_region
                .entry(img.region_id.as_str())
                .or_default()
                .push(img.condition.modality);
        }
        for (_, mods) in per_region {
            assert_eq!(mods.len(), 3);
            let mut dedup = mods.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), 3, "duplicate modality within a region");
        }
    }

    #[test]
    fn per_region_exposure_scope_is_constant_within_region() {
        let (manifest, split) = setup(40);
        let spec = SelectionSpec {
            strategy: Strategy::RandomModalities(ExposureScope::PerRegion),
            seed: 3,
        };
        let picked = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
        let mut per_region: HashMap<&str, Vec<Exposure>> = HashMap::new();
        for img in &picked {
            per_region
                .entry(img.region_id.as_str())
                .or_default()
                .push(img.condition.exposure);
        }
        for (_, exps) in per_region {
            assert!(exps.windows(2).all(|w| w[0] == w[1]));
        }
    }

    #[test]
    fn quarter_regions_floor_count() {
        let (manifest, split) = setup(30);
        let spec = SelectionSpec {
            strategy: Strategy::QuarterRegions,
            seed: 8,
        };
        let picked = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
        let train_regions = manifest
            .regions()
            .iter()
            .filter(|r| split.split_of(&r.object_id) == Some(SplitName::Train))
            .count();
        assert_eq!(picked.len(), (train_regions / 4) * 12);
    }

    #[test]
    fn full_selects_everything() {
        let (manifest, split) = setup(10);
        let spec = SelectionSpec {
            strategy: Strategy::Full,
            seed: 0,
        };
        let total: usize = SplitName::ALL
            .iter()
            .map(|&s| select_images(&manifest, &split, s, &spec).unwrap().len())
            .sum();
        assert_eq!(total, manifest.image_count());
    }

    #[test]
    fn selection_is_deterministic() {
        let (manifest, split) = setup(24);
        for strategy in [
            Strategy::RandomModalities(ExposureScope::PerImage),
            Strategy::QuarterRegions,
        ] {
            let spec = SelectionSpec { strategy, seed: 99 };
            let a = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
            let b = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
            let ids = |v: &[&ImageRecord]| v.iter().map(|i| i.image_id.clone()).collect::<Vec<_>>();
            assert_eq!(ids(&a), ids(&b));
        }
    }
}
