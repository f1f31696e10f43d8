//! Dataset-protocol guarantees: object-wise split integrity across a
//! seed sweep, selection sizes, and manifest round-trip stability.

use illumdet::dataset::split::DEFAULT_RATIOS;
use illumdet::dataset::{
    load_manifest, save_manifest, select_images, split_objectwise, ExposureScope, SelectionSpec,
    SplitName, Strategy,
};
use illumdet::model::Modality;
use illumdet::sim::{generate_dataset, SceneConfig};

fn scene(region_count: usize) -> SceneConfig {
    SceneConfig {
        region_count,
        regions_per_object: 3,
        ..SceneConfig::default()
    }
}

#[test]
fn split_never_separates_an_object_across_hundred_seeds() {
    let manifest = generate_dataset(&scene(60), 1).unwrap().manifest;
    for seed in 0..100 {
        let split = split_objectwise(&manifest, DEFAULT_RATIOS, seed).unwrap();
        for stack in manifest.regions() {
            // all regions of an object resolve to the same split
            let expected = split.split_of(&stack.object_id);
            assert!(expected.is_some(), "seed {seed}: object unassigned");
        }
        let total: usize = SplitName::ALL.iter().map(|&s| split.count(s)).sum();
        assert_eq!(total, manifest.object_ids().len());
    }
}

#[test]
fn modality_constrained_selections_are_quarter_sized() {
    let manifest = generate_dataset(&scene(120), 2).unwrap().manifest;
    let split = split_objectwise(&manifest, DEFAULT_RATIOS, 7).unwrap();
    let train_images = select_images(
        &manifest,
        &split,
        SplitName::Train,
        &SelectionSpec {
            strategy: Strategy::Full,
            seed: 0,
        },
    )
    .unwrap()
    .len();

    for strategy in [
        Strategy::SingleModality(Modality::C),
        Strategy::SingleModality(Modality::Udlr),
        Strategy::RandomModalities(ExposureScope::PerImage),
        Strategy::RandomModalities(ExposureScope::PerRegion),
    ] {
        let spec = SelectionSpec { strategy, seed: 5 };
        let picked = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
        // 3 of 12 images per region: exactly 25% of the split
        assert_eq!(picked.len() * 4, train_images, "{}", spec.describe());
    }
}

#[test]
fn quarter_regions_keeps_floor_n_over_four() {
    for region_count in [8, 9, 10, 11, 101] {
        let manifest = generate_dataset(&scene(region_count * 3), 3).unwrap().manifest;
        let split = split_objectwise(&manifest, DEFAULT_RATIOS, 1).unwrap();
        let spec = SelectionSpec {
            strategy: Strategy::QuarterRegions,
            seed: 4,
        };
        let picked = select_images(&manifest, &split, SplitName::Train, &spec).unwrap();
        let train_regions = manifest
            .regions()
            .iter()
            .filter(|r| split.split_of(&r.object_id) == Some(SplitName::Train))
            .count();
        assert_eq!(picked.len(), (train_regions / 4) * 12);
        let mut regions: Vec<&str> = picked.iter().map(|i| i.region_id.as_str()).collect();
        regions.dedup();
        assert_eq!(regions.len(), train_regions / 4);
    }
}

#[test]
fn manifest_round_trip_is_byte_identical() {
    let manifest = generate_dataset(&scene(40), 9).unwrap().manifest;
    let mut first = Vec::new();
    save_manifest(&manifest, &mut first).unwrap();
    let reloaded = load_manifest(first.as_slice()).unwrap();
    let mut second = Vec::new();
    save_manifest(&reloaded, &mut second).unwrap();
    assert_eq!(first, second);
    assert_eq!(reloaded, manifest);
}
