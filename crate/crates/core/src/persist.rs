//! File formats: saliency grids, their JSON sidecars and annotation indexes.
//!
//! A saliency grid is an 8-byte header (height then width, little-endian `u32`) followed
//! by `height·width` little-endian `f32` values in row-major order.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::imgproc::Map2D;
use crate::model::dataset::CLASS_NAMES;
use crate::model::BBox;

pub fn encode_grid(map: &Map2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 4 * map.len());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    for &v in map.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<Map2D> {
    if bytes.len() < 8 {
        return invalid("saliency grid shorter than its header");
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice"));
    let (h, w) = (word(0) as usize, word(4) as usize);
    let body = &bytes[8..];
    if body.len() != 4 * h * w {
        return invalid(format!("saliency grid body has {} bytes, expected {}", body.len(), 4 * h * w));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
        .collect();
    Map2D::new(h, w, data)
}

pub fn write_grid(path: impl AsRef<Path>, map: &Map2D) -> Result<()> {
    std::fs::write(path, encode_grid(map))?;
    Ok(())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Map2D> {
    decode_grid(&std::fs::read(path)?)
}

/// Sidecar written next to every saliency grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SaliencySidecar {
    pub method: String,
    pub class_index: usize,
    pub config: serde_json::Value,
}

/// One entry of the fixture dataset index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub label: usize,
    pub bbox: BBox,
}

/// `{id → {label, bbox}}`, keys in sorted order.
pub type FixtureIndex = BTreeMap<String, FixtureEntry>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CocoObject {
    pub category: serde_json::Value,
    pub bbox: BBox,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AnyEntry {
    Fixture(FixtureEntry),
    Coco(Vec<CocoObject>),
}

/// Category-labelled boxes per image id, from either annotation format.
pub type Annotations = BTreeMap<String, Vec<(String, BBox)>>;

pub fn category_name(label: usize) -> String {
    CLASS_NAMES.get(label).map_or_else(|| label.to_string(), |s| s.to_string())
}

fn category_string(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Parses a fixture index (`{id → {label, bbox}}`) or a COCO subset
/// (`{image_id → [{category, bbox}]}`).
pub fn parse_annotations(json: &str) -> Result<Annotations> {
    let raw: BTreeMap<String, AnyEntry> = serde_json::from_str(json)?;
    Ok(raw
        .into_iter()
        .map(|(id, entry)| {
            let boxes = match entry {
                AnyEntry::Fixture(f) => vec![(category_name(f.label), f.bbox)],
                AnyEntry::Coco(objs) => objs.iter().map(|o| (category_string(&o.category), o.bbox)).collect(),
            };
            (id, boxes)
        })
        .collect())
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<Annotations> {
    parse_annotations(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout_is_header_then_f32() {
        let m = Map2D::new(2, 3, vec![0.0, 0.25, 0.5, 0.75, 1.0, 0.125]).unwrap();
        let bytes = encode_grid(&m);
        assert_eq!(bytes.len(), 8 + 24);
        assert_eq!(&bytes[..8], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &0.25f32.to_le_bytes());
        assert_eq!(decode_grid(&bytes).unwrap(), m);
        assert!(decode_grid(&bytes[..10]).is_err());
        assert!(decode_grid(&bytes[..4]).is_err());
    }

    #[test]
    fn both_annotation_formats_parse() {
        let fixture = r#"{"img_00000": {"label": 1, "bbox": [1, 2, 3, 4]}}"#;
        let a = parse_annotations(fixture).unwrap();
        assert_eq!(a["img_00000"], vec![("circle".to_string(), BBox::new(1, 2, 3, 4))]);
        let coco = r#"{"17": [{"category": "dog", "bbox": [0, 0, 5, 5]}, {"category": 3, "bbox": [1, 1, 2, 2]}]}"#;
        let c = parse_annotations(coco).unwrap();
        assert_eq!(c["17"][0].0, "dog");
        assert_eq!(c["17"][1], ("3".to_string(), BBox::new(1, 1, 2, 2)));
        assert!(parse_annotations(r#"{"x": 3}"#).is_err());
    }
}
