//! Paired dataset directories.
//!
//! A dataset is a directory of `{id}_LR.png` / `{id}_HR.png` files plus an
//! optional `index.txt` listing one identifier per line (blank lines and
//! `#` comments ignored). Without an index every `*_LR.png` with a matching
//! HR file is used, in sorted order.

use std::path::{Path, PathBuf};

use srtgan_core::ImagePair;

use crate::error::{Error, Result};
use crate::image_io::load_image;

pub const INDEX_FILE: &str = "index.txt";

pub fn lr_path(root: &Path, id: &str) -> PathBuf {
    root.join(format!("{id}_LR.png"))
}

pub fn hr_path(root: &Path, id: &str) -> PathBuf {
    root.join(format!("{id}_HR.png"))
}

/// Identifiers of the pairs in `root`.
pub fn list_ids(root: &Path) -> Result<Vec<String>> {
    let index = root.join(INDEX_FILE);
    if index.exists() {
        let text = std::fs::read_to_string(&index).map_err(|e| Error::io(&index, e))?;
        let ids: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect();
        if ids.is_empty() {
            return Err(Error::format(&index, "index lists no pairs"));
        }
        return Ok(ids);
    }
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        if let Some(id) = name.to_str().and_then(|n| n.strip_suffix("_LR.png")) {
            if hr_path(root, id).exists() {
                ids.push(id.to_string());
            }
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::format(root, "no `{id}_LR.png` / `{id}_HR.png` pairs found"));
    }
    Ok(ids)
}

/// Load every pair, checking `hr = scale × lr`.
pub fn load_pairs(root: &Path, scale: usize) -> Result<Vec<ImagePair>> {
    list_ids(root)?
        .into_iter()
        .map(|id| {
            let lr = load_image(&lr_path(root, &id))?;
            let hr = load_image(&hr_path(root, &id))?;
            ImagePair::new(lr, hr, scale, id.as_str()).map_err(|e| Error::format(root, format!("pair `{id}`: {e}")))
        })
        .collect()
}

/// Write pairs as a dataset directory with an index.
pub fn save_pairs(root: &Path, pairs: &[ImagePair]) -> Result<()> {
    use crate::image_io::{save_png, BitDepth};
    std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
    let mut index = String::new();
    for p in pairs {
        save_png(&lr_path(root, &p.id), &p.lr, 0, BitDepth::Eight)?;
        save_png(&hr_path(root, &p.id), &p.hr, 0, BitDepth::Eight)?;
        index.push_str(&p.id);
        index.push('\n');
    }
    let path = root.join(INDEX_FILE);
    std::fs::write(&path, index).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use srtgan_core::synthetic::dataset;

    #[test]
    fn save_then_load_round_trips_quantised_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = dataset(&mut rand_chacha::ChaCha8Rng::seed_from_u64(3), 3, 6, 5, 4).unwrap();
        save_pairs(dir.path(), &pairs).unwrap();
        let back = load_pairs(dir.path(), 4).unwrap();
        assert_eq!(back.len(), 3);
        for (a, b) in pairs.iter().zip(&back) {
            assert_eq!(a.id, b.id);
            // Synthetic pairs are already 8-bit quantised.
            assert!(a.hr.tensor().max_abs_diff(b.hr.tensor()).unwrap() < 1e-6);
            assert!(a.lr.tensor().max_abs_diff(b.lr.tensor()).unwrap() < 1e-6);
        }
    }

    #[test]
    fn index_selects_and_orders_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = dataset(&mut rand_chacha::ChaCha8Rng::seed_from_u64(4), 3, 4, 4, 4).unwrap();
        save_pairs(dir.path(), &pairs).unwrap();
        std::fs::write(dir.path().join(INDEX_FILE), "# subset\nsyn002\n\nsyn000\n").unwrap();
        assert_eq!(list_ids(dir.path()).unwrap(), ["syn002", "syn000"]);
        std::fs::remove_file(dir.path().join(INDEX_FILE)).unwrap();
        assert_eq!(list_ids(dir.path()).unwrap(), ["syn000", "syn001", "syn002"]);
    }

    #[test]
    fn scale_mismatch_names_the_pair() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = dataset(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5), 1, 4, 4, 4).unwrap();
        save_pairs(dir.path(), &pairs).unwrap();
        let e = load_pairs(dir.path(), 2).unwrap_err().to_string();
        assert!(e.contains("syn000"), "{e}");
    }
}
