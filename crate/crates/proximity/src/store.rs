//! On-disk dataset store: normalized CSV files plus a JSON manifest holding
//! their SHA-256 hashes.
//!
//! ```text
//! STORE/
//!   manifest.json
//!   tracts.csv
//!   svi.csv
//!   sets/00-pharm.csv
//!   sets/01-dg.csv
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use proximity_core::model::StateUniverse;
use proximity_core::{FacilitySet, Tract};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ingest::{self, IngestError, IngestReport, TextFormat, ANY_CHAIN};

pub const MANIFEST: &str = "manifest.json";
pub const STORE_FORMAT: &str = "proximity-store/1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("{path}: invalid manifest: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("{path}: unsupported store format {found:?}")]
    Format { path: PathBuf, found: String },
    #[error("{path}: content hash mismatch (manifest {expected}, file {actual})")]
    Hash { path: PathBuf, expected: String, actual: String },
    #[error("{path}: {rejected} row(s) rejected on reload; store is not normalized")]
    Dirty { path: PathBuf, rejected: u64 },
    #[error("duplicate facility set name {0:?}")]
    DuplicateSet(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Universe {
    Us,
    Any,
}

impl Universe {
    pub fn state_universe(self) -> StateUniverse {
        match self {
            Universe::Us => StateUniverse::Us,
            Universe::Any => StateUniverse::Any,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub file: String,
    pub sha256: String,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SetEntry {
    pub name: String,
    #[serde(flatten)]
    pub file: FileEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub universe: Universe,
    pub tracts: FileEntry,
    pub svi: FileEntry,
    pub svi_matched: u64,
    pub sets: Vec<SetEntry>,
    /// Ingest reports from the original sources, keyed by input label.
    #[serde(default)]
    pub reports: Vec<(String, IngestReport)>,
}

/// A loaded, validated store. Immutable once built.
#[derive(Debug, Clone)]
pub struct Store {
    pub manifest: Manifest,
    /// SHA-256 of the manifest bytes; identifies the store content.
    pub manifest_hash: String,
    pub tracts: Vec<Tract>,
    pub sets: Vec<FacilitySet>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

fn set_file_name(i: usize, name: &str) -> String {
    let safe: String =
        name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '_' }).collect();
    format!("sets/{i:02}-{safe}.csv")
}

fn write_entry(dir: &Path, file: &str, bytes: &[u8], records: u64) -> Result<FileEntry, StoreError> {
    let path = dir.join(file);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(FileEntry { file: file.to_string(), sha256: sha256_hex(bytes), records })
}

fn encode(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), IngestError>) -> Result<Vec<u8>, StoreError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|source| StoreError::Ingest { path: path.to_path_buf(), source })?;
    Ok(buf)
}

impl Store {
    /// Writes tracts (with SVI) and facility sets as a normalized store.
    pub fn write(
        dir: &Path,
        universe: Universe,
        tracts: &[Tract],
        sets: &[FacilitySet],
        reports: Vec<(String, IngestReport)>,
    ) -> Result<Store, StoreError> {
        let mut names = std::collections::BTreeSet::new();
        for s in sets {
            if !names.insert(s.name()) {
                return Err(StoreError::DuplicateSet(s.name().to_string()));
            }
        }
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let tract_bytes = encode(dir, |b| ingest::write_tracts(b, tracts))?;
        let svi_bytes = encode(dir, |b| ingest::write_svi(b, tracts))?;
        let svi_matched = tracts.iter().filter(|t| t.svi().is_some()).count() as u64;
        let tracts_entry = write_entry(dir, "tracts.csv", &tract_bytes, tracts.len() as u64)?;
        let svi_entry = write_entry(dir, "svi.csv", &svi_bytes, svi_matched)?;
        let mut set_entries = Vec::new();
        for (i, s) in sets.iter().enumerate() {
            let bytes = encode(dir, |b| ingest::write_facilities(b, s))?;
            let file = write_entry(dir, &set_file_name(i, s.name()), &bytes, s.len() as u64)?;
            set_entries.push(SetEntry { name: s.name().to_string(), file });
        }
        let manifest = Manifest {
            format: STORE_FORMAT.to_string(),
            universe,
            tracts: tracts_entry,
            svi: svi_entry,
            svi_matched,
            sets: set_entries,
            reports,
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|source| StoreError::Manifest {
            path: dir.join(MANIFEST),
            source,
        })?;
        bytes.push(b'\n');
        let mpath = dir.join(MANIFEST);
        fs::write(&mpath, &bytes).map_err(io_err(&mpath))?;
        Ok(Store { manifest, manifest_hash: sha256_hex(&bytes), tracts: tracts.to_vec(), sets: sets.to_vec() })
    }

    /// Loads a store, verifying every file hash and that every row still parses.
    pub fn load(dir: &Path) -> Result<Store, StoreError> {
        let mpath = dir.join(MANIFEST);
        let bytes = fs::read(&mpath).map_err(io_err(&mpath))?;
        let manifest: Manifest =
            serde_json::from_slice(&bytes).map_err(|source| StoreError::Manifest { path: mpath.clone(), source })?;
        if manifest.format != STORE_FORMAT {
            return Err(StoreError::Format { path: mpath, found: manifest.format });
        }
        let fmt = TextFormat { delimiter: b',', universe: manifest.universe.state_universe() };

        let read_checked = |entry: &FileEntry| -> Result<(PathBuf, Vec<u8>), StoreError> {
            let path = dir.join(&entry.file);
            let data = fs::read(&path).map_err(io_err(&path))?;
            let actual = sha256_hex(&data);
            if actual != entry.sha256 {
                return Err(StoreError::Hash { path, expected: entry.sha256.clone(), actual });
            }
            Ok((path, data))
        };
        let clean = |path: &Path, report: &IngestReport| -> Result<(), StoreError> {
            match report.rejected_total() {
                0 => Ok(()),
                rejected => Err(StoreError::Dirty { path: path.to_path_buf(), rejected }),
            }
        };

        let (tpath, tdata) = read_checked(&manifest.tracts)?;
        let (tracts, report) = ingest::parse_tracts(tdata.as_slice(), &fmt)
            .map_err(|source| StoreError::Ingest { path: tpath.clone(), source })?;
        clean(&tpath, &report)?;
        let (spath, sdata) = read_checked(&manifest.svi)?;
        let (tracts, report) = ingest::join_svi(tracts, sdata.as_slice(), &fmt)
            .map_err(|source| StoreError::Ingest { path: spath.clone(), source })?;
        clean(&spath, &report)?;

        let mut sets = Vec::with_capacity(manifest.sets.len());
        for entry in &manifest.sets {
            let (path, data) = read_checked(&entry.file)?;
            let (set, report) = ingest::parse_facilities(data.as_slice(), ANY_CHAIN, None, &fmt)
                .map_err(|source| StoreError::Ingest { path: path.clone(), source })?;
            clean(&path, &report)?;
            let set = FacilitySet::new(entry.name.clone(), set.facilities().to_vec())
                .map_err(|_| StoreError::DuplicateSet(entry.name.clone()))?;
            sets.push(set);
        }
        Ok(Store { manifest, manifest_hash: sha256_hex(&bytes), tracts, sets })
    }

    pub fn set_names(&self) -> impl Iterator<Item = &str> {
        self.sets.iter().map(FacilitySet::name)
    }
}
