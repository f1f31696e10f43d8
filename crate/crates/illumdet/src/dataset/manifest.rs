//! Dataset manifest: the on-disk description of region stacks.
//!
//! The format is UTF-8, line-delimited, whitespace-separated records
//! with a fixed field order; unknown record kinds and surplus fields
//! are rejected. Layout:
//!
//! ```text
//! meta 1 <provenance|->
//! object <object_id>
//! image <object_id> <region_id> <modality> <exposure> <uri> <0|1> <n> <ann>{n}
//! ```
//!
//! Each `ann` token is `defect_id,x_min,y_min,x_max,y_max,flag` where
//! the flag is `*` on the image whose condition the annotator labeled
//! on and `-` elsewhere. The 12 image records of a region appear
//! consecutively under their object header, in condition-index order
//! when written by this module. Saving is canonical: save -> load ->
//! save is byte-identical.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::model::{
    Annotation, BoundingBox, Exposure, ImageRecord, LightingCondition, Modality, RegionStack,
    CONDITION_COUNT,
};

use super::DatasetError;

pub const SCHEMA_VERSION: u32 = 1;

/// An in-memory dataset: region stacks grouped by object, in stable
/// order, plus file-level metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub schema_version: u32,
    /// Free-form single-token provenance note (e.g. the generator seed).
    pub seed_provenance: Option<String>,
    regions: Vec<RegionStack>,
    index: HashMap<String, usize>,
}

impl DatasetManifest {
    /// Builds a manifest, grouping regions by object in first-appearance
    /// order. Region ids must be globally unique.
    pub fn new(
        regions: Vec<RegionStack>,
        seed_provenance: Option<String>,
    ) -> Result<Self, DatasetError> {
        let mut object_order: Vec<String> = Vec::new();
        for stack in &regions {
            check_identifier(&stack.region_id)?;
            check_identifier(&stack.object_id)?;
            if !object_order.contains(&stack.object_id) {
                object_order.push(stack.object_id.clone());
            }
        }
        if let Some(p) = &seed_provenance {
            check_identifier(p)?;
        }
        let mut grouped: Vec<RegionStack> = Vec::with_capacity(regions.len());
        for object_id in &object_order {
            grouped.extend(regions.iter().filter(|r| &r.object_id == object_id).cloned());
        }
        let mut index = HashMap::new();
        for (i, stack) in grouped.iter().enumerate() {
            if index.insert(stack.region_id.clone(), i).is_some() {
                return Err(DatasetError::DuplicateRegion(stack.region_id.clone()));
            }
        }
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            seed_provenance,
            regions: grouped,
            index,
        })
    }

    pub fn regions(&self) -> &[RegionStack] {
        &self.regions
    }

    pub fn region(&self, region_id: &str) -> Option<&RegionStack> {
        self.index.get(region_id).map(|&i| &self.regions[i])
    }

    /// Object ids in stored (first-appearance) order.
    pub fn object_ids(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for stack in &self.regions {
            if out.last() != Some(&stack.object_id.as_str()) {
                out.push(&stack.object_id);
            }
        }
        out
    }

    pub fn images(&self) -> impl Iterator<Item = &ImageRecord> {
        self.regions.iter().flat_map(|r| r.images().iter())
    }

    pub fn image_count(&self) -> usize {
        self.regions.len() * CONDITION_COUNT
    }

    /// Rebuilds the manifest with each region replaced through `f`.
    pub fn map_regions(
        &self,
        mut f: impl FnMut(&RegionStack) -> Result<RegionStack, DatasetError>,
    ) -> Result<DatasetManifest, DatasetError> {
        let regions = self
            .regions
            .iter()
            .map(|r| f(r))
            .collect::<Result<Vec<_>, _>>()?;
        DatasetManifest::new(regions, self.seed_provenance.clone())
    }
}

fn check_identifier(id: &str) -> Result<(), DatasetError> {
    if id.is_empty() || id.contains(char::is_whitespace) || id.contains(',') {
        return Err(DatasetError::InvalidIdentifier(id.to_string()));
    }
    Ok(())
}

pub fn save_manifest<W: Write>(manifest: &DatasetManifest, mut out: W) -> Result<(), DatasetError> {
    writeln!(
        out,
        "meta {} {}",
        manifest.schema_version,
        manifest.seed_provenance.as_deref().unwrap_or("-")
    )?;
    let mut current_object: Option<&str> = None;
    for stack in manifest.regions() {
        if current_object != Some(stack.object_id.as_str()) {
            writeln!(out, "object {}", stack.object_id)?;
            current_object = Some(&stack.object_id);
        }
        for img in stack.images() {
            write!(
                out,
                "image {} {} {} {} {} {} {}",
                stack.object_id,
                stack.region_id,
                img.condition.modality,
                img.condition.exposure,
                img.uri,
                if stack.visible { 1 } else { 0 },
                img.annotations.len(),
            )?;
            for ann in &img.annotations {
                let flag = if ann.source_condition == img.condition {
                    "*"
                } else {
                    "-"
                };
                write!(
                    out,
                    " {},{},{},{},{},{}",
                    ann.defect_id,
                    ann.bbox.x_min(),
                    ann.bbox.y_min(),
                    ann.bbox.x_max(),
                    ann.bbox.y_max(),
                    flag
                )?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

/// One image record as parsed from a line, before stacks are assembled.
struct RawImage {
    line: usize,
    object_id: String,
    region_id: String,
    condition: LightingCondition,
    uri: String,
    visible: bool,
    annotations: Vec<RawAnnotation>,
}

struct RawAnnotation {
    defect_id: String,
    bbox: BoundingBox,
    flagged: bool,
}

pub fn load_manifest<R: BufRead>(reader: R) -> Result<DatasetManifest, DatasetError> {
    let mut lines = reader.lines().enumerate();

    let (first_no, first) = match lines.next() {
        Some((n, l)) => (n + 1, l?),
        None => return Err(DatasetError::format(1, "empty file, expected meta record")),
    };
    let meta: Vec<&str> = first.split(' ').collect();
    if meta.len() != 3 || meta[0] != "meta" {
        return Err(DatasetError::format(
            first_no,
            "expected `meta <version> <provenance>`",
        ));
    }
    let schema_version: u32 = meta[1]
        .parse()
        .map_err(|_| DatasetError::format(first_no, format!("bad schema version `{}`", meta[1])))?;
    if schema_version != SCHEMA_VERSION {
        return Err(DatasetError::format(
            first_no,
            format!("unsupported schema version {schema_version}"),
        ));
    }
    let seed_provenance = if meta[2] == "-" {
        None
    } else {
        Some(meta[2].to_string())
    };

    let mut raw_images: Vec<RawImage> = Vec::new();
    let mut current_object: Option<String> = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            return Err(DatasetError::format(line_no, "blank line not allowed"));
        }
        let tokens: Vec<&str> = line.split(' ').collect();
        match tokens[0] {
            "object" => {
                if tokens.len() != 2 {
                    return Err(DatasetError::format(line_no, "expected `object <object_id>`"));
                }
                current_object = Some(tokens[1].to_string());
            }
            "image" => {
                let object_id = current_object.clone().ok_or_else(|| {
                    DatasetError::format(line_no, "image record before any object header")
                })?;
                raw_images.push(parse_image_record(line_no, &tokens, &object_id)?);
            }
            other => {
                return Err(DatasetError::format(
                    line_no,
                    format!("unknown record kind `{other}`"),
                ));
            }
        }
    }

    let regions = assemble_regions(raw_images)?;
    DatasetManifest::new(regions, seed_provenance)
}

fn parse_image_record(
    line: usize,
    tokens: &[&str],
    current_object: &str,
) -> Result<RawImage, DatasetError> {
    if tokens.len() < 8 {
        return Err(DatasetError::format(
            line,
            "image record needs at least 8 fields",
        ));
    }
    let object_id = tokens[1];
    if object_id != current_object {
        return Err(DatasetError::format(
            line,
            format!("image object `{object_id}` does not match header `{current_object}`"),
        ));
    }
    let region_id = tokens[2];
    let modality =
        Modality::parse(tokens[3]).map_err(|e| DatasetError::format(line, e.to_string()))?;
    let exposure =
        Exposure::parse(tokens[4]).map_err(|e| DatasetError::format(line, e.to_string()))?;
    let uri = tokens[5];
    let visible = match tokens[6] {
        "1" => true,
        "0" => false,
        other => {
            return Err(DatasetError::format(
                line,
                format!("bad visible flag `{other}`, expected 0 or 1"),
            ))
        }
    };
    let ann_count: usize = tokens[7]
        .parse()
        .map_err(|_| DatasetError::format(line, format!("bad annotation count `{}`", tokens[7])))?;
    if tokens.len() != 8 + ann_count {
        return Err(DatasetError::format(
            line,
            format!(
                "expected {} annotation fields, found {}",
                ann_count,
                tokens.len() - 8
            ),
        ));
    }
    let mut annotations = Vec::with_capacity(ann_count);
    for tok in &tokens[8..] {
        annotations.push(parse_annotation(line, tok)?);
    }
    let mut seen = std::collections::HashSet::new();
    for ann in &annotations {
        if !seen.insert(ann.defect_id.as_str()) {
            return Err(DatasetError::format(
                line,
                format!("defect `{}` listed twice on one image", ann.defect_id),
            ));
        }
    }
    Ok(RawImage {
        line,
        object_id: object_id.to_string(),
        region_id: region_id.to_string(),
        condition: LightingCondition::new(modality, exposure),
        uri: uri.to_string(),
        visible,
        annotations,
    })
}

fn parse_annotation(line: usize, token: &str) -> Result<RawAnnotation, DatasetError> {
    let parts: Vec<&str> = token.split(',').collect();
    if parts.len() != 6 {
        return Err(DatasetError::format(
            line,
            format!("annotation `{token}` must have 6 comma-separated fields"),
        ));
    }
    let coord = |s: &str, name: &str| -> Result<f64, DatasetError> {
        s.parse::<f64>()
            .map_err(|_| DatasetError::format(line, format!("bad {name} `{s}` in annotation")))
    };
    let bbox = BoundingBox::new(
        coord(parts[1], "x_min")?,
        coord(parts[2], "y_min")?,
        coord(parts[3], "x_max")?,
        coord(parts[4], "y_max")?,
    )
    .map_err(|e| DatasetError::format(line, e.to_string()))?;
    let flagged = match parts[5] {
        "*" => true,
        "-" => false,
        other => {
            return Err(DatasetError::format(
                line,
                format!("bad source flag `{other}`, expected * or -"),
            ))
        }
    };
    Ok(RawAnnotation {
        defect_id: parts[0].to_string(),
        bbox,
        flagged,
    })
}

fn assemble_regions(raw_images: Vec<RawImage>) -> Result<Vec<RegionStack>, DatasetError> {
    let mut regions: Vec<RegionStack> = Vec::new();
    let mut finished: std::collections::HashSet<String> = std::collections::HashSet::new();
    let mut group: Vec<RawImage> = Vec::new();

    let flush = |group: &mut Vec<RawImage>,
                     finished: &mut std::collections::HashSet<String>|
     -> Result<Option<RegionStack>, DatasetError> {
        if group.is_empty() {
            return Ok(None);
        }
        let stack = build_stack(std::mem::take(group))?;
        if !finished.insert(stack.region_id.clone()) {
            return Err(DatasetError::DuplicateRegion(stack.region_id.clone()));
        }
        Ok(Some(stack))
    };

    for raw in raw_images {
        if let Some(last) = group.last() {
            if last.region_id != raw.region_id || last.object_id != raw.object_id {
                if let Some(stack) = flush(&mut group, &mut finished)? {
                    regions.push(stack);
                }
            }
        }
        group.push(raw);
    }
    if let Some(stack) = flush(&mut group, &mut finished)? {
        regions.push(stack);
    }
    Ok(regions)
}

fn build_stack(group: Vec<RawImage>) -> Result<RegionStack, DatasetError> {
    let region_id = group[0].region_id.clone();
    let object_id = group[0].object_id.clone();
    let first_line = group[0].line;
    let visible = group[0].visible;
    if group.iter().any(|g| g.visible != visible) {
        return Err(DatasetError::format(
            first_line,
            format!("region `{region_id}` mixes visible flags across its images"),
        ));
    }
    if group.len() != CONDITION_COUNT {
        return Err(DatasetError::format(
            first_line,
            format!(
                "region `{region_id}` has {} image records, expected {CONDITION_COUNT}",
                group.len()
            ),
        ));
    }
    let mut by_condition: [Option<&RawImage>; CONDITION_COUNT] = [None; CONDITION_COUNT];
    for raw in &group {
        let slot = &mut by_condition[raw.condition.index()];
        if slot.is_some() {
            return Err(DatasetError::format(
                raw.line,
                format!(
                    "region `{region_id}` has two images for condition {}",
                    raw.condition
                ),
            ));
        }
        *slot = Some(raw);
    }

    // the flagged copy of each defect fixes its source condition
    let mut sources: HashMap<&str, LightingCondition> = HashMap::new();
    for raw in &group {
        for ann in &raw.annotations {
            if ann.flagged {
                if let Some(prev) = sources.insert(&ann.defect_id, raw.condition) {
                    if prev != raw.condition {
                        return Err(DatasetError::format(
                            raw.line,
                            format!(
                                "defect `{}` flagged as source on two conditions",
                                ann.defect_id
                            ),
                        ));
                    }
                }
            }
        }
    }

    let mut images = Vec::with_capacity(CONDITION_COUNT);
    for raw in &group {
        let mut img = ImageRecord::new(&region_id, raw.condition, raw.uri.clone());
        for ann in &raw.annotations {
            let source_condition = sources.get(ann.defect_id.as_str()).copied().ok_or_else(|| {
                DatasetError::format(
                    raw.line,
                    format!("defect `{}` has no source-flagged record", ann.defect_id),
                )
            })?;
            img.annotations.push(Annotation {
                defect_id: ann.defect_id.clone(),
                bbox: ann.bbox,
                source_condition,
            });
        }
        images.push(img);
    }
    RegionStack::new(region_id, object_id, visible, images).map_err(DatasetError::from)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Detection;
    use crate::testutil::demo_manifest;

    fn round_trip(m: &DatasetManifest) -> (Vec<u8>, DatasetManifest) {
        let mut buf = Vec::new();
        save_manifest(m, &mut buf).unwrap();
        let loaded = load_manifest(buf.as_slice()).unwrap();
        (buf, loaded)
    }

    #[test]
    fn empty_manifest_round_trips() {
        let m = DatasetManifest::new(Vec::new(), None).unwrap();
        let (_, loaded) = round_trip(&m);
        assert_eq!(loaded, m);
        assert_eq!(loaded.image_count(), 0);
    }

    #[test]
    fn hundred_regions_load_1200_images() {
        let m = demo_manifest(100);
        let (_, loaded) = round_trip(&m);
        assert_eq!(loaded.image_count(), 1200);
        assert_eq!(loaded, m);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let m = demo_manifest(7);
        let (bytes1, loaded) = round_trip(&m);
        let mut bytes2 = Vec::new();
        save_manifest(&loaded, &mut bytes2).unwrap();
        assert_eq!(bytes1, bytes2);
    }

    #[test]
    fn detections_do_not_affect_manifest_serialization() {
        let m = demo_manifest(2);
        let with_dets = m
            .map_regions(|r| {
                Ok(r.with_detections_everywhere(DetectionSet::from_vec(vec![Detection::new(
                    BoundingBox::new(0.0, 0.0, 5.0, 5.0).unwrap(),
                    0.5,
                )
                .unwrap()])))
            })
            .unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        save_manifest(&m, &mut a).unwrap();
        save_manifest(&with_dets, &mut b).unwrap();
        assert_eq!(a, b);
    }
    use crate::model::DetectionSet;

    #[test]
    fn duplicate_condition_rejected() {
        let m = demo_manifest(1);
        let mut buf = Vec::new();
        save_manifest(&m, &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        // duplicate the (UD, low) image line for region 0
        let dup_line: String = text
            .lines()
            .find(|l| l.contains(" UD low "))
            .unwrap()
            .to_string();
        text.push_str(&dup_line);
        text.push('\n');
        let err = load_manifest(text.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("image records"), "{err}");
    }

    #[test]
    fn unknown_record_kind_rejected() {
        let err = load_manifest("meta 1 -\nwat x\n".as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Format { line: 2, .. }), "{err}");
    }

    #[test]
    fn surplus_annotation_fields_rejected() {
        let text = "meta 1 -\nobject o1\nimage o1 r1 C low mem://x 1 0 extra\n";
        let err = load_manifest(text.as_bytes()).unwrap_err();
        assert!(matches!(err, DatasetError::Format { line: 3, .. }), "{err}");
    }

    #[test]
    fn error_names_line_number() {
        let text = "meta 1 -\nobject o1\nimage o1 r1 C noon mem://x 1 0\n";
        let err = load_manifest(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 3: unknown exposure `noon`");
    }
}
