//! Quality-assessment corpora.
//!
//! A manifest is a CSV file with header `reference_path,distorted_path,mos`.
//! Relative image paths are resolved against the manifest's directory and
//! MOS values must lie in `[1, 5]`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srtgan_core::qa_train::{check_mos, QaSample};

use crate::error::{Error, Result};
use crate::image_io::load_image;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub reference_path: String,
    pub distorted_path: String,
    pub mos: f64,
}

/// Parse a manifest. Every malformed row is reported, numbered from 1 for
/// the first data row, in one [`Error::Config`].
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestRow>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let headers = rdr.headers().map_err(|e| Error::format(path, e.to_string()))?.clone();
    for col in ["reference_path", "distorted_path", "mos"] {
        if !headers.iter().any(|h| h == col) {
            return Err(Error::Config(format!("{}: missing column `{col}`", path.display())));
        }
    }
    let mut rows = Vec::new();
    let mut bad = Vec::new();
    for (i, rec) in rdr.deserialize::<ManifestRow>().enumerate() {
        let row = i + 1;
        match rec {
            Ok(r) => match check_mos(r.mos, row) {
                Ok(()) if !r.reference_path.is_empty() && !r.distorted_path.is_empty() => rows.push(r),
                Ok(()) => bad.push(format!("row {row}: empty path")),
                Err(e) => bad.push(e.to_string().trim_start_matches("invalid argument: ").to_string()),
            },
            Err(e) => bad.push(format!("row {row}: {e}")),
        }
    }
    if !bad.is_empty() {
        let rows: Vec<String> = bad.iter().filter_map(|m| m.split(':').next().map(String::from)).collect();
        return Err(Error::Config(format!(
            "{}: malformed manifest {}:\n  {}",
            path.display(),
            rows.join(", "),
            bad.join("\n  ")
        )));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: manifest has no rows", path.display())));
    }
    Ok(rows)
}

pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_relative() {
        base.join(p)
    } else {
        p.to_path_buf()
    }
}

/// Decode every record. Reference images shared by several rows are
/// decoded once.
pub fn load_samples(manifest: &Path, rows: &[ManifestRow]) -> Result<Vec<QaSample>> {
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut refs = BTreeMap::new();
    let mut out = Vec::with_capacity(rows.len());
    for r in rows {
        let reference = match refs.get(&r.reference_path) {
            Some(img) => Clone::clone(img),
            None => {
                let img = load_image(&resolve(base, &r.reference_path))?;
                refs.insert(r.reference_path.clone(), img.clone());
                img
            }
        };
        let distorted = load_image(&resolve(base, &r.distorted_path))?;
        if distorted.tensor().shape() != reference.tensor().shape() {
            return Err(Error::format(
                resolve(base, &r.distorted_path),
                format!("shape {:?} differs from its reference {:?}", distorted.tensor().shape(), reference.tensor().shape()),
            ));
        }
        out.push(QaSample {
            distorted,
            reference,
            mos: r.mos as f32,
        });
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
struct KadidRow {
    dist_img: String,
    ref_img: String,
    dmos: f64,
}

/// Convert a KADID-10K directory (`dmos.csv` plus `images/`) into manifest
/// rows with paths relative to `root`.
pub fn kadid_manifest(root: &Path) -> Result<Vec<ManifestRow>> {
    let csv_path = root.join("dmos.csv");
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(&csv_path)
        .map_err(|e| Error::format(&csv_path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<KadidRow>().enumerate() {
        let r = rec.map_err(|e| Error::format(&csv_path, format!("row {}: {e}", i + 1)))?;
        rows.push(ManifestRow {
            reference_path: format!("images/{}", r.ref_img),
            distorted_path: format!("images/{}", r.dist_img),
            mos: r.dmos,
        });
    }
    if rows.is_empty() {
        return Err(Error::format(&csv_path, "no rows"));
    }
    Ok(rows)
}
