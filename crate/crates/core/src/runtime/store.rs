//! Content-addressed plan storage.
//!
//! A plan's id is the hex SHA-256 prefix of its canonical text, so storing the
//! same plan twice yields the same id. Named plans carry a version that grows
//! by one each time different content is stored under the name; writers can
//! pass the version they edited to detect lost updates.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dsl::{self, PlanDocument, SyntaxError};

const ID_LEN: usize = 16;
const INDEX_FILE: &str = "index.json";
const PLAN_DIR: &str = "plans";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("unknown plan `{0}`")]
    UnknownPlan(String),
    #[error("plan `{name}` is at version {current}, not {expected}")]
    VersionConflict { name: String, expected: u32, current: u32 },
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("storage: {0}")]
    Io(#[from] io::Error),
    #[error("corrupt index: {0}")]
    Index(#[from] serde_json::Error),
}

/// Id of the canonical serialization of `doc`.
pub fn plan_id(doc: &PlanDocument) -> String {
    let digest = Sha256::digest(dsl::serialize(doc).as_bytes());
    hex::encode(digest)[..ID_LEN].to_string()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub id: String,
    pub name: Option<String>,
    /// 1 for anonymous plans.
    pub version: u32,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    plans: BTreeMap<String, PlanEntry>,
    /// Latest id per plan name.
    heads: BTreeMap<String, String>,
}

/// Plans kept in memory, optionally mirrored to `<dir>/plans/<id>.bt` with
/// `<dir>/index.json`.
#[derive(Debug, Default)]
pub struct PlanStore {
    dir: Option<PathBuf>,
    index: Index,
    docs: BTreeMap<String, PlanDocument>,
}

impl PlanStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Opens or creates a store under `dir`.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        fs::create_dir_all(dir.join(PLAN_DIR))?;
        let index_path = dir.join(INDEX_FILE);
        let index: Index = match fs::read_to_string(&index_path) {
            Ok(text) => serde_json::from_str(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Index::default(),
            Err(e) => return Err(e.into()),
        };
        let mut docs = BTreeMap::new();
        for id in index.plans.keys() {
            let text = fs::read_to_string(dir.join(PLAN_DIR).join(format!("{id}.bt")))?;
            docs.insert(id.clone(), dsl::parse(&text)?);
        }
        Ok(Self {
            dir: Some(dir.to_path_buf()),
            index,
            docs,
        })
    }

    pub fn put(&mut self, doc: PlanDocument, expected_version: Option<u32>) -> Result<PlanEntry, StoreError> {
        let id = plan_id(&doc);
        if let Some(existing) = self.index.plans.get(&id) {
            return Ok(existing.clone());
        }
        let version = match &doc.name {
            Some(name) => {
                let current = self
                    .index
                    .heads
                    .get(name)
                    .map_or(0, |head| self.index.plans[head].version);
                if let Some(expected) = expected_version {
                    if expected != current {
                        return Err(StoreError::VersionConflict {
                            name: name.clone(),
                            expected,
                            current,
                        });
                    }
                }
                current + 1
            }
            None => 1,
        };
        let entry = PlanEntry {
            id: id.clone(),
            name: doc.name.clone(),
            version,
        };
        if let Some(dir) = &self.dir {
            fs::write(dir.join(PLAN_DIR).join(format!("{id}.bt")), dsl::serialize(&doc))?;
        }
        if let Some(name) = &doc.name {
            self.index.heads.insert(name.clone(), id.clone());
        }
        self.index.plans.insert(id.clone(), entry.clone());
        self.docs.insert(id, doc);
        self.flush()?;
        Ok(entry)
    }

    /// Parses and stores DSL text.
    pub fn put_text(&mut self, text: &str, expected_version: Option<u32>) -> Result<PlanEntry, StoreError> {
        self.put(dsl::parse(text)?, expected_version)
    }

    fn flush(&self) -> Result<(), StoreError> {
        if let Some(dir) = &self.dir {
            let tmp = dir.join(format!("{INDEX_FILE}.tmp"));
            fs::write(&tmp, serde_json::to_vec_pretty(&self.index)?)?;
            fs::rename(tmp, dir.join(INDEX_FILE))?;
        }
        Ok(())
    }

    /// Looks up by id or by plan name (latest version).
    pub fn get(&self, key: &str) -> Result<(&PlanEntry, &PlanDocument), StoreError> {
        let id = self.index.heads.get(key).map_or(key, String::as_str);
        match (self.index.plans.get(id), self.docs.get(id)) {
            (Some(e), Some(d)) => Ok((e, d)),
            _ => Err(StoreError::UnknownPlan(key.to_string())),
        }
    }

    pub fn list(&self) -> Vec<PlanEntry> {
        self.index.plans.values().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PLAN: &str = "plan demo\nsequence { arm.Teach() }";

    fn scratch(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("costar-store-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn same_content_same_id() {
        let mut s = PlanStore::in_memory();
        let a = s.put_text(PLAN, None).unwrap();
        let b = s.put_text("plan demo sequence{arm.Teach()}", None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.id.len(), ID_LEN);
        assert_eq!(s.list().len(), 1);
    }

    #[test]
    fn versions_and_conflicts() {
        let mut s = PlanStore::in_memory();
        assert_eq!(s.put_text(PLAN, Some(0)).unwrap().version, 1);
        let v2 = s.put_text("plan demo\nsequence { arm.Teach() gripper.Open() }", Some(1)).unwrap();
        assert_eq!(v2.version, 2);
        assert!(matches!(
            s.put_text("plan demo\nselector { }", Some(1)),
            Err(StoreError::VersionConflict { current: 2, .. })
        ));
        assert_eq!(s.get("demo").unwrap().0.id, v2.id);
    }

    #[test]
    fn persists_across_reopen() {
        let dir = scratch("reopen");
        let id = {
            let mut s = PlanStore::open(&dir).unwrap();
            s.put_text(PLAN, None).unwrap().id
        };
        let s = PlanStore::open(&dir).unwrap();
        let (entry, doc) = s.get(&id).unwrap();
        assert_eq!(entry.name.as_deref(), Some("demo"));
        assert_eq!(plan_id(doc), id);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn unknown_plan() {
        assert!(matches!(PlanStore::in_memory().get("x"), Err(StoreError::UnknownPlan(_))));
    }
}
