//! Dataset manifest: UTF-8 comma-separated text with the fixed header
//! `subject_id,path,modality,plane_hint,label,split`. Paths are stored
//! relative to the manifest file and resolved against it on read.

use crate::error::{Error, Result};
use crate::volume::{Modality, Plane};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

pub const MANIFEST_HEADER: &str = "subject_id,path,modality,plane_hint,label,split";

/// What kind of volume a manifest row points at: an acquisition modality
/// or the subject's instance-labelled ground-truth mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Modality(Modality),
    Mask,
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ChannelKind::Modality(m) => write!(f, "{m}"),
            ChannelKind::Mask => f.write_str("mask"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub subject_id: String,
    /// Resolved on read; written relative to the manifest.
    pub path: PathBuf,
    pub kind: ChannelKind,
    pub plane_hint: Option<Plane>,
    pub label: Option<String>,
    pub split: Split,
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestRow>> {
    let path = path.as_ref();
    let parse = |reason: String| Error::Parse { path: path.to_path_buf(), reason };
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let file = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (lineno, line) in file.lines().enumerate() {
        let line = line?;
        let line = line.trim_end();
        if lineno == 0 {
            if line != MANIFEST_HEADER {
                return Err(parse(format!("bad header line: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse(format!("line {}: expected 6 fields, got {}", lineno + 1, fields.len())));
        }
        let kind = if fields[2].eq_ignore_ascii_case("mask") {
            ChannelKind::Mask
        } else {
            ChannelKind::Modality(
                Modality::parse(fields[2])
                    .ok_or_else(|| parse(format!("line {}: unknown modality {}", lineno + 1, fields[2])))?,
            )
        };
        let plane_hint = if fields[3].is_empty() {
            None
        } else {
            Some(
                Plane::parse(fields[3])
                    .ok_or_else(|| parse(format!("line {}: unknown plane {}", lineno + 1, fields[3])))?,
            )
        };
        let label = if fields[4].is_empty() { None } else { Some(fields[4].to_string()) };
        let split = match fields[5] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(parse(format!("line {}: unknown split {other}", lineno + 1))),
        };
        rows.push(ManifestRow {
            subject_id: fields[0].to_string(),
            path: base.join(fields[1]),
            kind,
            plane_hint,
            label,
            split,
        });
    }
    Ok(rows)
}

/// Writes rows with paths made relative to the manifest's directory when
/// they live under it.
pub fn write_manifest(path: impl AsRef<Path>, rows: &[ManifestRow]) -> Result<()> {
    let path = path.as_ref();
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{MANIFEST_HEADER}")?;
    for row in rows {
        let rel = row.path.strip_prefix(base).unwrap_or(&row.path);
        writeln!(
            out,
            "{},{},{},{},{},{}",
            row.subject_id,
            rel.display(),
            row.kind,
            row.plane_hint.map(|p| p.name()).unwrap_or(""),
            row.label.as_deref().unwrap_or(""),
            row.split,
        )?;
    }
    out.flush()?;
    Ok(())
}
