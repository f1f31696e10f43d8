//! End-to-end study behavior on controlled simulator configurations:
//! the noiseless ceiling and the fusion advantage under complementary
//! per-modality visibility.

use illumdet::dataset::split::DEFAULT_RATIOS;
use illumdet::dataset::split_objectwise;
use illumdet::sim::{
    generate_dataset, DefectProfile, DetectorNoiseModel, SceneConfig,
};
use illumdet::study::{run_study, DetectionsSource, StudyConfig};

/// Every defect visible in all 12 conditions; detector never misses,
/// never jitters, never hallucinates, confidence pinned to 1.
fn noiseless() -> (SceneConfig, DetectorNoiseModel) {
    let scene = SceneConfig {
        region_count: 30,
        regions_per_object: 2,
        invisible_rate: 0.0,
        exposure_multipliers: [1.0, 1.0, 1.0],
        profiles: vec![DefectProfile {
            name: "always".into(),
            weight: 1.0,
            modality_visibility: [1.0; 4],
        }],
        ..SceneConfig::default()
    };
    let noise = DetectorNoiseModel {
        detect_probability: 1.0,
        jitter_std: 0.0,
        true_confidence_range: (1.0, 1.0),
        false_positive_rate: 0.0,
        ..DetectorNoiseModel::default()
    };
    (scene, noise)
}

/// Four defect kinds, each visible in exactly one modality, plus
/// false-positive clutter and sub-certain detection: the configuration
/// where pooling the 12 views pays off.
pub fn complementary() -> (SceneConfig, DetectorNoiseModel) {
    let profiles = ["only-c", "only-ud", "only-lr", "only-udlr"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut vis = [0.0; 4];
            vis[i] = 1.0;
            DefectProfile {
                name: (*name).into(),
                weight: 1.0,
                modality_visibility: vis,
            }
        })
        .collect();
    let scene = SceneConfig {
        region_count: 200,
        regions_per_object: 4,
        invisible_rate: 0.0,
        exposure_multipliers: [1.0, 1.0, 1.0],
        profiles,
        ..SceneConfig::default()
    };
    let noise = DetectorNoiseModel {
        detect_probability: 0.85,
        jitter_std: 1.0,
        true_confidence_beta: (6.0, 2.0),
        true_confidence_range: (0.7, 1.0),
        false_positive_rate: 0.3,
        false_confidence_beta: (2.0, 5.0),
        false_confidence_range: (0.1, 0.8),
    };
    (scene, noise)
}

#[test]
fn noiseless_study_one_is_perfect_in_every_modality() {
    let (scene, noise) = noiseless();
    let gen = generate_dataset(&scene, 41).unwrap();
    let split = split_objectwise(&gen.manifest, DEFAULT_RATIOS, 41).unwrap();
    let source = DetectionsSource::Simulated {
        visibility: &gen.visibility,
        scene: &scene,
        noise: &noise,
        seed: 41,
    };
    let report = run_study(&gen.manifest, &split, &source, &StudyConfig::new(1, 41)).unwrap();
    assert_eq!(report.rows.len(), 4);
    for row in &report.rows {
        assert_eq!(row.metrics.precision, 1.0, "{}", row.test);
        assert_eq!(row.metrics.recall, 1.0, "{}", row.test);
        assert_eq!(row.metrics.f1, 1.0, "{}", row.test);
        assert_eq!(row.metrics.ap, 1.0, "{}", row.test);
    }
}

#[test]
fn fusion_beats_unfused_on_complementary_visibility() {
    let (scene, noise) = complementary();
    for seed in 0..5u64 {
        let gen = generate_dataset(&scene, seed).unwrap();
        let split = split_objectwise(&gen.manifest, DEFAULT_RATIOS, seed).unwrap();
        let source = DetectionsSource::Simulated {
            visibility: &gen.visibility,
            scene: &scene,
            noise: &noise,
            seed,
        };
        let report =
            run_study(&gen.manifest, &split, &source, &StudyConfig::new(4, seed)).unwrap();
        let unfused = &report.rows[0].metrics;
        let fused = &report.rows[1].metrics;
        assert!(
            fused.recall - unfused.recall >= 0.10,
            "seed {seed}: fused recall {} vs unfused {}",
            fused.recall,
            unfused.recall
        );
        assert!(
            fused.ap - unfused.ap >= 0.05,
            "seed {seed}: fused AP {} vs unfused {}",
            fused.ap,
            unfused.ap
        );
    }
}
