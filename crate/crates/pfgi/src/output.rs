//! Atomic file output with per-file checksums.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use pfgi_core::Grid;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::pgm::{self, Rescale};

/// One file written during a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Writes files under one directory, each through a temporary file that is
/// renamed into place, and remembers what it wrote.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileRecord>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(OutputDir {
            root,
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes without recording a checksum (used for the manifest itself).
    pub fn write_unrecorded(&self, rel: &str, contents: &[u8]) -> io::Result<PathBuf> {
        let target = self.root.join(rel);
        let dir = target.parent().unwrap_or(&self.root);
        fs::create_dir_all(dir)?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        tmp.write_all(contents)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target).map_err(|e| e.error)?;
        Ok(target)
    }

    pub fn write(&mut self, rel: &str, contents: &[u8]) -> io::Result<PathBuf> {
        let target = self.write_unrecorded(rel, contents)?;
        self.files.push(FileRecord {
            path: rel.to_string(),
            sha256: sha256_hex(contents),
            bytes: contents.len() as u64,
        });
        Ok(target)
    }

    /// Writes `rel` as an 8-bit PGM plus a `.json` sidecar with the rescale.
    pub fn write_image(&mut self, rel: &str, image: &Grid) -> io::Result<Rescale> {
        let (bytes, rescale) = pgm::quantize(image);
        let n = image.side();
        self.write(rel, &pgm::encode_pgm(n, n, &bytes))?;
        let sidecar = Path::new(rel).with_extension("json");
        let json = serde_json::to_vec_pretty(&rescale).map_err(io::Error::other)?;
        self.write(&sidecar.to_string_lossy().replace('\\', "/"), &json)?;
        Ok(rescale)
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

/// Shortest round-trip decimal text for a float; stable across platforms.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_and_records_checksums() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path().join("run")).unwrap();
        out.write("a/b.txt", b"abc").unwrap();
        assert_eq!(fs::read(dir.path().join("run/a/b.txt")).unwrap(), b"abc");
        assert_eq!(
            out.files()[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        // overwrite in place
        out.write("a/b.txt", b"xyz").unwrap();
        assert_eq!(fs::read(dir.path().join("run/a/b.txt")).unwrap(), b"xyz");
        let leftovers = fs::read_dir(dir.path().join("run/a")).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn image_has_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(dir.path()).unwrap();
        let g = Grid::from_vec(2, vec![0.0, 1.0, 2.0, 4.0]).unwrap();
        let r = out.write_image("img.pgm", &g).unwrap();
        assert_eq!((r.min, r.max), (0.0, 4.0));
        let side: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("img.json")).unwrap()).unwrap();
        assert_eq!(side["scale"], 63.75);
        assert_eq!(out.files().len(), 2);
    }
}
