//! On-disk analysis store: one folder per document, every write atomic.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{AppError, AppResult};
use scriptoria::Error;

static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to `path` via a temp file in the same folder and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    write_atomic_with(path, bytes, |_| Ok(()))
}

/// As [`write_atomic`], running `before_rename` between the temp write and the rename.
pub fn write_atomic_with(
    path: &Path,
    bytes: &[u8],
    before_rename: impl FnOnce(&Path) -> io::Result<()>,
) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}-{}",
        name.to_string_lossy(),
        std::process::id(),
        TEMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    before_rename(&tmp)?;
    fs::rename(&tmp, path)
}

/// A document folder.
#[derive(Debug, Clone)]
pub struct DocFolder {
    dir: PathBuf,
}

impl DocFolder {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn exists(&self, name: &str) -> bool {
        self.path(name).is_file()
    }

    pub fn create(&self) -> AppResult<()> {
        fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        Ok(())
    }

    pub fn read_bytes(&self, name: &str) -> AppResult<Vec<u8>> {
        let p = self.path(name);
        fs::read(&p).map_err(|e| Error::io(p, e).into())
    }

    pub fn read_json<T: DeserializeOwned>(&self, name: &str) -> AppResult<T> {
        let p = self.path(name);
        let bytes = self.read_bytes(name)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| AppError::Core(Error::Format(format!("{}: {e}", p.display()))))
    }

    pub fn write_bytes(&self, name: &str, bytes: &[u8]) -> AppResult<()> {
        let p = self.path(name);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        write_atomic(&p, bytes).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }

    /// Pretty JSON with a trailing newline, so artifacts diff cleanly.
    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> AppResult<()> {
        self.write_bytes(name, &to_json_bytes(value)?)
    }

    /// Sorted file names inside a sub-folder; empty when it does not exist.
    pub fn list(&self, sub: &str) -> AppResult<Vec<String>> {
        let p = self.path(sub);
        let entries = match fs::read_dir(&p) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(p, e).into()),
        };
        let mut names = Vec::new();
        for e in entries {
            let e = e.map_err(|err| Error::io(&p, err))?;
            let name = e.file_name().to_string_lossy().into_owned();
            if !name.starts_with('.') {
                names.push(name);
            }
        }
        names.sort();
        Ok(names)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> AppResult<Vec<u8>> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| AppError::Internal(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Root folder holding one sub-folder per document id.
#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> AppResult<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Folder for an id that must already exist.
    pub fn document(&self, id: &str) -> AppResult<DocFolder> {
        if !valid_id(id) {
            return Err(AppError::NotFound(format!("document {id}")));
        }
        let folder = DocFolder::new(self.root.join(id));
        if !folder.exists(crate::workflow::RECORD) {
            return Err(AppError::NotFound(format!("document {id}")));
        }
        Ok(folder)
    }

    pub fn folder(&self, id: &str) -> DocFolder {
        DocFolder::new(self.root.join(id))
    }
}

/// Ids are generated as lowercase hex with an optional `-n` suffix; anything
/// else (path separators, dots) is rejected before touching the filesystem.
pub fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}
