//! External experience store: stable index -> archived content.
//!
//! Every write (including overwrites) lands in an append-only write log.
//! Persistence is two JSONL files: entries at `path`, the write log at the
//! sibling `<stem>.log.jsonl`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("index must be a non-empty string")]
    InvalidIndex,
    #[error("index '{index}' not found. Known: [{}]", known.join(", "))]
    IndexNotFound { index: String, known: Vec<String> },
    #[error("storage error at {path}: {message}")]
    Storage { path: PathBuf, message: String },
}

impl StoreError {
    fn storage(path: &Path, message: impl ToString) -> Self {
        StoreError::Storage {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WriteRecord {
    pub step: usize,
    pub index: String,
    pub byte_length: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperienceStore {
    entries: BTreeMap<String, String>,
    write_log: Vec<WriteRecord>,
}

#[derive(Serialize, Deserialize)]
struct EntryLine {
    index: String,
    content: String,
}

impl ExperienceStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Archive `content` under `index`; the last write to an index wins.
    pub fn put(&mut self, step: usize, index: &str, content: &str) -> Result<(), StoreError> {
        if index.is_empty() {
            return Err(StoreError::InvalidIndex);
        }
        self.write_log.push(WriteRecord {
            step,
            index: index.to_string(),
            byte_length: content.len(),
        });
        self.entries.insert(index.to_string(), content.to_string());
        Ok(())
    }

    pub fn get(&self, index: &str) -> Result<&str, StoreError> {
        self.entries
            .get(index)
            .map(String::as_str)
            .ok_or_else(|| StoreError::IndexNotFound {
                index: index.to_string(),
                known: self.indices().map(str::to_string).collect(),
            })
    }

    pub fn contains(&self, index: &str) -> bool {
        self.entries.contains_key(index)
    }

    /// Indices in sorted order.
    pub fn indices(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_log(&self) -> &[WriteRecord] {
        &self.write_log
    }

    /// Sibling path holding the write log for a store persisted at `path`.
    pub fn log_path(path: &Path) -> PathBuf {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        path.with_file_name(format!("{stem}.log.jsonl"))
    }

    pub fn persist(&self, path: &Path) -> Result<(), StoreError> {
        write_jsonl(
            path,
            self.entries.iter().map(|(index, content)| EntryLine {
                index: index.clone(),
                content: content.clone(),
            }),
        )?;
        write_jsonl(&Self::log_path(path), self.write_log.iter().cloned())
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let mut entries = BTreeMap::new();
        for line in read_jsonl::<EntryLine>(path)? {
            if line.index.is_empty() {
                return Err(StoreError::storage(path, "entry with empty index"));
            }
            entries.insert(line.index, line.content);
        }
        let write_log = read_jsonl::<WriteRecord>(&Self::log_path(path))?;
        Ok(Self { entries, write_log })
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<(), StoreError> {
    let file = fs::File::create(path).map_err(|e| StoreError::storage(path, e))?;
    let mut out = BufWriter::new(file);
    for row in rows {
        serde_json::to_writer(&mut out, &row).map_err(|e| StoreError::storage(path, e))?;
        out.write_all(b"\n").map_err(|e| StoreError::storage(path, e))?;
    }
    out.flush().map_err(|e| StoreError::storage(path, e))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = fs::read_to_string(path).map_err(|e| StoreError::storage(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::storage(path, format!("line {}: {e}", i + 1)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn put_get_roundtrip() {
        let mut s = ExperienceStore::new();
        s.put(1, "ctx_locations", "sinkbasin_bar__plus_01_dot_13\ndesk 1").unwrap();
        let before = s.clone();
        assert_eq!(s.get("ctx_locations").unwrap(), "sinkbasin_bar__plus_01_dot_13\ndesk 1");
        assert_eq!(s, before);
    }

    #[test]
    fn overwrite_is_logged() {
        let mut s = ExperienceStore::new();
        s.put(1, "a", "first").unwrap();
        s.put(2, "a", "second!").unwrap();
        assert_eq!(s.get("a").unwrap(), "second!");
        assert_eq!(s.len(), 1);
        assert_eq!(
            s.write_log(),
            &[
                WriteRecord { step: 1, index: "a".into(), byte_length: 5 },
                WriteRecord { step: 2, index: "a".into(), byte_length: 7 },
            ]
        );
    }

    #[test]
    fn empty_index_rejected() {
        let mut s = ExperienceStore::new();
        assert!(matches!(s.put(0, "", "x"), Err(StoreError::InvalidIndex)));
        assert!(s.write_log().is_empty());
    }

    #[test]
    fn missing_index_lists_known() {
        let mut s = ExperienceStore::new();
        s.put(0, "b", "1").unwrap();
        s.put(0, "a", "2").unwrap();
        let err = s.get("missing").unwrap_err();
        assert_eq!(err.to_string(), "index 'missing' not found. Known: [a, b]");
        match err {
            StoreError::IndexNotFound { index, known } => {
                assert_eq!(index, "missing");
                assert_eq!(known, vec!["a", "b"]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_store_roundtrips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let s = ExperienceStore::new();
        s.persist(&path).unwrap();
        assert_eq!(ExperienceStore::load(&path).unwrap(), s);
        assert!(dir.path().join("store.log.jsonl").exists());
    }

    #[test]
    fn random_entries_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut s = ExperienceStore::new();
        let mut oracle = BTreeMap::new();
        for step in 0..100 {
            let index = format!("ctx_{}", rng.random_range(0..60));
            let len = rng.random_range(0..200);
            let content: String = (0..len)
                .map(|_| char::from_u32(rng.random_range(1..0x2FFF)).unwrap_or('?'))
                .collect();
            s.put(step, &index, &content).unwrap();
            oracle.insert(index, content);
        }
        s.persist(&path).unwrap();
        let loaded = ExperienceStore::load(&path).unwrap();
        assert_eq!(loaded, s);
        let loaded_map: BTreeMap<String, String> =
            loaded.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        assert_eq!(loaded_map, oracle);
        assert_eq!(loaded.write_log().len(), 100);
    }

    #[test]
    fn corrupted_file_is_storage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        fs::write(&path, "{\"index\": \"a\", \"content\": \n").unwrap();
        fs::write(ExperienceStore::log_path(&path), "").unwrap();
        assert!(matches!(ExperienceStore::load(&path), Err(StoreError::Storage { .. })));
        let missing = dir.path().join("nope.jsonl");
        assert!(matches!(ExperienceStore::load(&missing), Err(StoreError::Storage { .. })));
    }

    proptest! {
        #[test]
        fn get_after_put_is_identity(index in ".{1,20}", content in any::<String>()) {
            let mut s = ExperienceStore::new();
            s.put(0, &index, &content).unwrap();
            prop_assert_eq!(s.get(&index).unwrap(), content.as_str());
        }
    }
}
