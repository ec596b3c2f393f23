//! On-disk dataset layout.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/inputs/<source>_<start>.pgm
//! <dir>/targets/<source>_<start>.pgm
//! ```
//!
//! The manifest is JSON with one record per line, so a parse failure can be
//! attributed to a record:
//!
//! ```text
//! {"version":1,"n":5,"stride":5,"threshold":32,"delta":4.0,"records":[
//! {"source_id":"v0000","start_index":0,...},
//! {"source_id":"v0001","start_index":0,...}
//! ]}
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pairs::{FrameMotionPair, PairMeta};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::motion::{TauSchedule, TemplateConfig};

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// Dataset-wide settings recorded at the top of the manifest.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n: usize,
    pub stride: usize,
    pub threshold: u8,
    pub delta: f32,
}

impl DatasetHeader {
    pub fn new(n: usize, cfg: &TemplateConfig) -> Self {
        Self {
            n,
            stride: n,
            threshold: cfg.threshold,
            delta: cfg.delta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Record {
    source_id: String,
    start_index: usize,
    n: usize,
    threshold: u8,
    delta: f32,
    tau_schedule: TauSchedule,
    width: usize,
    height: usize,
    input: String,
    target: String,
}

#[derive(Serialize)]
struct ManifestHead {
    version: u32,
    #[serde(flatten)]
    header: DatasetHeader,
}

#[derive(Deserialize)]
struct ManifestDoc {
    version: u32,
    #[serde(flatten)]
    header: DatasetHeader,
    records: Vec<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub pairs: Vec<FrameMotionPair>,
}

fn stem(meta: &PairMeta) -> Result<String> {
    let ok = !meta.source_id.is_empty()
        && meta
            .source_id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if !ok {
        return Err(Error::Spec(format!(
            "source id {:?} must be non-empty and use only [A-Za-z0-9._-]",
            meta.source_id
        )));
    }
    Ok(format!("{}_{}", meta.source_id, meta.start_index))
}

/// Writes images and the manifest. Returns the manifest path.
pub fn write_dataset(
    dir: impl AsRef<Path>,
    header: &DatasetHeader,
    pairs: &[FrameMotionPair],
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    for sub in ["inputs", "targets"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }

    let mut seen = HashSet::new();
    let mut lines = Vec::with_capacity(pairs.len());
    for pair in pairs {
        if !pair.input.same_dims(&pair.target) {
            return Err(Error::Shape(format!(
                "pair {}@{} has mismatched input and target",
                pair.meta.source_id, pair.meta.start_index
            )));
        }
        let stem = stem(&pair.meta)?;
        if !seen.insert(stem.clone()) {
            return Err(Error::Spec(format!("duplicate pair name {stem}")));
        }
        let record = Record {
            source_id: pair.meta.source_id.clone(),
            start_index: pair.meta.start_index,
            n: pair.meta.n,
            threshold: pair.meta.config.threshold,
            delta: pair.meta.config.delta,
            tau_schedule: pair.meta.config.tau_schedule,
            width: pair.input.width(),
            height: pair.input.height(),
            input: format!("inputs/{stem}.pgm"),
            target: format!("targets/{stem}.pgm"),
        };
        pair.input.write_pgm(dir.join(&record.input))?;
        pair.target.write_pgm(dir.join(&record.target))?;
        lines.push(serde_json::to_string(&record).expect("record serializes"));
    }

    let head = serde_json::to_string(&ManifestHead {
        version: MANIFEST_VERSION,
        header: *header,
    })
    .expect("header serializes");
    // reopen the object to append the records array
    let mut text = head[..head.len() - 1].to_string();
    text.push_str(",\"records\":[\n");
    text.push_str(&lines.join(",\n"));
    if !lines.is_empty() {
        text.push('\n');
    }
    text.push_str("]}\n");

    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;

    let doc: ManifestDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.clone(),
        // line 1 is the header, line k + 1 holds record k
        record: e.line().saturating_sub(1),
        message: e.to_string(),
    })?;
    if doc.version != MANIFEST_VERSION {
        return Err(Error::Parse {
            path,
            record: 0,
            message: format!("unsupported manifest version {}", doc.version),
        });
    }

    let mut pairs = Vec::with_capacity(doc.records.len());
    for (i, value) in doc.records.into_iter().enumerate() {
        let record: Record = serde_json::from_value(value).map_err(|e| Error::Parse {
            path: path.clone(),
            record: i + 1,
            message: e.to_string(),
        })?;
        let load = |rel: &str| -> Result<GrayImage> {
            let p = dir.join(rel);
            if !p.is_file() {
                return Err(Error::Integrity(format!(
                    "record {} references missing image {}",
                    i + 1,
                    p.display()
                )));
            }
            let img = GrayImage::read_pgm(&p)?;
            if img.dims() != (record.width, record.height) {
                return Err(Error::Integrity(format!(
                    "record {}: {} is {}x{}, manifest says {}x{}",
                    i + 1,
                    p.display(),
                    img.width(),
                    img.height(),
                    record.width,
                    record.height
                )));
            }
            Ok(img)
        };
        pairs.push(FrameMotionPair {
            input: load(&record.input)?,
            target: load(&record.target)?,
            meta: PairMeta {
                source_id: record.source_id,
                start_index: record.start_index,
                n: record.n,
                config: TemplateConfig {
                    threshold: record.threshold,
                    delta: record.delta,
                    tau_schedule: record.tau_schedule,
                },
            },
        });
    }
    Ok(Dataset {
        header: doc.header,
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(source: &str, start: usize, seed: u8) -> FrameMotionPair {
        let cfg = TemplateConfig::new(32, 3.5).unwrap();
        FrameMotionPair {
            input: GrayImage::new(3, 2, vec![seed, 1, 2, 3, 4, 5]).unwrap(),
            target: GrayImage::new(3, 2, vec![0, 255, seed, 0, 85, 170]).unwrap(),
            meta: PairMeta {
                source_id: source.into(),
                start_index: start,
                n: 5,
                config: cfg,
            },
        }
    }

    fn header() -> DatasetHeader {
        DatasetHeader::new(5, &TemplateConfig::new(32, 3.5).unwrap())
    }

    #[test]
    fn empty_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &header(), &[]).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        assert!(ds.pairs.is_empty());
        assert_eq!(ds.header, header());
    }

    #[test]
    fn three_pairs_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![pair("a", 0, 7), pair("a", 5, 8), pair("b-2", 0, 9)];
        write_dataset(dir.path(), &header(), &pairs).unwrap();
        let ds = read_dataset(dir.path()).unwrap();
        assert_eq!(ds.pairs, pairs);
    }

    #[test]
    fn truncated_manifest_names_record() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = vec![pair("a", 0, 7), pair("a", 5, 8), pair("a", 10, 9)];
        let path = write_dataset(dir.path(), &header(), &pairs).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        // header, three records, closing line; cut the last record in half
        assert_eq!(lines.len(), 5);
        let third = lines[3];
        let truncated = format!(
            "{}\n{}\n{}\n{}",
            lines[0],
            lines[1],
            lines[2],
            &third[..third.len() / 2]
        );
        fs::write(&path, truncated).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_record_named() {
        let dir = tempfile::tempdir().unwrap();
        let path =
            write_dataset(dir.path(), &header(), &[pair("a", 0, 1), pair("a", 5, 2)]).unwrap();
        let text = fs::read_to_string(&path)
            .unwrap()
            .replace("\"start_index\":5", "\"start_index\":\"x\"");
        fs::write(&path, text).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Parse { record, .. }) => assert_eq!(record, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_image_is_integrity_error() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &header(), &[pair("a", 0, 1)]).unwrap();
        fs::remove_file(dir.path().join("targets/a_0.pgm")).unwrap();
        assert!(matches!(read_dataset(dir.path()), Err(Error::Integrity(_))));
    }

    #[test]
    fn rejects_unsafe_source_ids_and_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        assert!(write_dataset(dir.path(), &header(), &[pair("../x", 0, 1)]).is_err());
        assert!(write_dataset(dir.path(), &header(), &[pair("a", 0, 1), pair("a", 0, 2)]).is_err());
    }
}
