use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::smatrix::{BlockResult, TaskKey, TaskStore};

/// One JSON file per finished block. Unreadable files count as missing.
#[derive(Debug, Clone)]
pub struct DirStore {
    dir: PathBuf,
}

impl DirStore {
    pub fn new(dir: impl AsRef<Path>) -> Self {
        Self {
            dir: dir.as_ref().to_path_buf(),
        }
    }

    fn path(&self, key: &TaskKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.file_stem()))
    }
}

impl TaskStore for DirStore {
    fn load(&self, key: &TaskKey) -> Option<BlockResult> {
        let text = fs::read_to_string(self.path(key)).ok()?;
        let r: BlockResult = serde_json::from_str(&text).ok()?;
        (r.k == key.k && r.parity == key.parity).then_some(r)
    }

    fn save(&self, key: &TaskKey, result: &BlockResult) -> Result<()> {
        let path = self.path(key);
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string(result).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }
}
