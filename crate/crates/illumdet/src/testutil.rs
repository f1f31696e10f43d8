//! Small fixture builders shared by unit tests.
#![cfg(test)]

use crate::dataset::DatasetManifest;
use crate::model::{
    Annotation, BoundingBox, ImageRecord, LightingCondition, RegionStack, CONDITION_COUNT,
};

/// A visible, propagated manifest with one defect per region; the
/// annotator source condition cycles over the 12 conditions.
pub fn manifest_with_objects(object_count: usize, regions_per_object: usize) -> DatasetManifest {
    let mut regions = Vec::new();
    for r in 0..object_count * regions_per_object {
        let region_id = format!("reg-{r:04}");
        let object_id = format!("obj-{:04}", r / regions_per_object);
        let source = LightingCondition::from_index(r % CONDITION_COUNT).unwrap();
        let images = LightingCondition::all()
            .map(|c| {
                let mut img = ImageRecord::new(&region_id, c, format!("mem://{region_id}/{c}"));
                img.annotations.push(Annotation {
                    defect_id: format!("{region_id}-d0"),
                    bbox: BoundingBox::new(1.5, 2.0, 20.25, 30.0).unwrap(),
                    source_condition: source,
                });
                img
            })
            .collect();
        regions.push(RegionStack::new(region_id, object_id, true, images).unwrap());
    }
    DatasetManifest::new(regions, Some("test:1".into())).unwrap()
}

/// A manifest with `region_count` regions, two regions per object.
pub fn demo_manifest(region_count: usize) -> DatasetManifest {
    let mut regions = Vec::new();
    for r in 0..region_count {
        let region_id = format!("reg-{r:04}");
        let object_id = format!("obj-{:04}", r / 2);
        let source = LightingCondition::from_index(r % CONDITION_COUNT).unwrap();
        let images = LightingCondition::all()
            .map(|c| {
                let mut img = ImageRecord::new(&region_id, c, format!("mem://{region_id}/{c}"));
                img.annotations.push(Annotation {
                    defect_id: format!("{region_id}-d0"),
                    bbox: BoundingBox::new(1.5, 2.0, 20.25, 30.0).unwrap(),
                    source_condition: source,
                });
                img
            })
            .collect();
        regions.push(RegionStack::new(region_id, object_id, true, images).unwrap());
    }
    DatasetManifest::new(regions, Some("test:1".into())).unwrap()
}
