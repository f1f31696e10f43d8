//! Detections file: the import/export path for detector outputs.
//!
//! One detection per line, space-separated:
//!
//! ```text
//! <image_id> <x_min> <y_min> <x_max> <y_max> <confidence>
//! ```

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::model::{BoundingBox, Detection, DetectionSet};

use super::{DatasetError, DatasetManifest};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionEntry {
    pub image_id: String,
    pub detection: Detection,
}

pub fn load_detections<R: BufRead>(reader: R) -> Result<Vec<DetectionEntry>, DatasetError> {
    let mut entries = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.is_empty() {
            return Err(DatasetError::format(line_no, "blank line not allowed"));
        }
        let tokens: Vec<&str> = line.split(' ').collect();
        if tokens.len() != 6 {
            return Err(DatasetError::format(
                line_no,
                format!("expected 6 fields, found {}", tokens.len()),
            ));
        }
        let num = |s: &str, name: &str| -> Result<f64, DatasetError> {
            s.parse::<f64>()
                .map_err(|_| DatasetError::format(line_no, format!("bad {name} `{s}`")))
        };
        let bbox = BoundingBox::new(
            num(tokens[1], "x_min")?,
            num(tokens[2], "y_min")?,
            num(tokens[3], "x_max")?,
            num(tokens[4], "y_max")?,
        )
        .map_err(|e| DatasetError::format(line_no, e.to_string()))?;
        let detection = Detection::new(bbox, num(tokens[5], "confidence")?)
            .map_err(|e| DatasetError::format(line_no, e.to_string()))?;
        entries.push(DetectionEntry {
            image_id: tokens[0].to_string(),
            detection,
        });
    }
    Ok(entries)
}

/// Writes the detections carried by a manifest, images in manifest
/// order; images without a detection set are skipped.
pub fn save_detections<W: Write>(
    manifest: &DatasetManifest,
    mut out: W,
) -> Result<(), DatasetError> {
    for img in manifest.images() {
        if let Some(dets) = &img.detections {
            for det in dets {
                writeln!(
                    out,
                    "{} {} {} {} {} {}",
                    img.image_id,
                    det.bbox().x_min(),
                    det.bbox().y_min(),
                    det.bbox().x_max(),
                    det.bbox().y_max(),
                    det.confidence()
                )?;
            }
        }
    }
    Ok(())
}

/// Attaches imported detections to a manifest. Every image of the
/// manifest ends up with a concrete (possibly empty) detection set;
/// entries naming an image the manifest does not contain are rejected.
pub fn apply_detections(
    manifest: &DatasetManifest,
    entries: &[DetectionEntry],
) -> Result<DatasetManifest, DatasetError> {
    let mut by_image: HashMap<&str, DetectionSet> = HashMap::new();
    let known: std::collections::HashSet<&str> =
        manifest.images().map(|img| img.image_id.as_str()).collect();
    for entry in entries {
        if !known.contains(entry.image_id.as_str()) {
            return Err(DatasetError::UnknownImageId(entry.image_id.clone()));
        }
        by_image
            .entry(&entry.image_id)
            .or_default()
            .push(entry.detection);
    }
    manifest.map_regions(|stack| {
        Ok(stack.map_detections(|img| {
            Some(
                by_image
                    .get(img.image_id.as_str())
                    .cloned()
                    .unwrap_or_default(),
            )
        }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::demo_manifest;

    #[test]
    fn round_trip_preserves_order_and_values() {
        let manifest = demo_manifest(3);
        let mut entries = Vec::new();
        for (i, img) in manifest.images().enumerate() {
            entries.push(DetectionEntry {
                image_id: img.image_id.clone(),
                detection: Detection::new(
                    BoundingBox::new(0.5, 0.5, 10.0 + i as f64, 10.0).unwrap(),
                    0.25,
                )
                .unwrap(),
            });
        }
        let applied = apply_detections(&manifest, &entries).unwrap();
        let mut buf = Vec::new();
        save_detections(&applied, &mut buf).unwrap();
        let reloaded = load_detections(buf.as_slice()).unwrap();
        assert_eq!(reloaded, entries);
    }

    #[test]
    fn unknown_image_rejected() {
        let manifest = demo_manifest(1);
        let entries = vec![DetectionEntry {
            image_id: "nope/C/low".into(),
            detection: Detection::new(BoundingBox::new(0.0, 0.0, 1.0, 1.0).unwrap(), 0.5).unwrap(),
        }];
        assert!(matches!(
            apply_detections(&manifest, &entries),
            Err(DatasetError::UnknownImageId(_))
        ));
    }

    #[test]
    fn apply_fills_empty_sets_everywhere() {
        let manifest = demo_manifest(2);
        let applied = apply_detections(&manifest, &[]).unwrap();
        for img in applied.images() {
            assert_eq!(img.detections.as_ref().map(|d| d.len()), Some(0));
        }
    }

    #[test]
    fn malformed_line_errors() {
        assert!(load_detections("a b c\n".as_bytes()).is_err());
        assert!(load_detections("img 0 0 1 1 1.5\n".as_bytes()).is_err());
    }
}
