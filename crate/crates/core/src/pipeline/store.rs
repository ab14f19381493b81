use std::fs::{self, File, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use sha2::{Digest, Sha256};

use super::project::{ArtifactRef, Project};
use crate::error::{invalid, Error, Result};

pub const PROJECT_MANIFEST: &str = "manifest.json";
const LOCK_FILE: &str = ".lock";

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling and a rename, so readers observe
/// either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().ok_or_else(|| invalid(format!("{} has no parent", path.display())))?;
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp-{}-{}", std::process::id(), TMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Holds the per-project lock file locked until dropped.
pub struct ProjectLock {
    _file: File,
}

/// A directory of projects, one subdirectory per project id.
#[derive(Debug, Clone)]
pub struct ProjectStore {
    root: PathBuf,
}

/// Project ids are single path components of `[A-Za-z0-9_.-]`, not
/// starting with a dot.
pub fn check_project_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id.len() <= 128
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'));
    if ok {
        Ok(())
    } else {
        Err(invalid(format!("invalid project id {id:?}")))
    }
}

impl ProjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn project_dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    pub fn exists(&self, id: &str) -> bool {
        check_project_id(id).is_ok() && self.project_dir(id).join(PROJECT_MANIFEST).is_file()
    }

    fn lock_with(&self, id: &str, exclusive: bool) -> Result<ProjectLock> {
        check_project_id(id)?;
        let dir = self.project_dir(id);
        if !dir.is_dir() {
            return Err(Error::NotFound(format!("project {id}")));
        }
        let file = OpenOptions::new().create(true).truncate(false).write(true).open(dir.join(LOCK_FILE))?;
        if exclusive {
            file.lock()?;
        } else {
            file.lock_shared()?;
        }
        Ok(ProjectLock { _file: file })
    }

    /// Exclusive lock serializing every mutation of project `id`, across
    /// threads and processes.
    pub fn lock(&self, id: &str) -> Result<ProjectLock> {
        self.lock_with(id, true)
    }

    /// Creates an empty project. Fails if `id` already exists.
    pub fn create(&self, id: &str, name: &str, created_at: u64) -> Result<Project> {
        check_project_id(id)?;
        let dir = self.project_dir(id);
        fs::create_dir_all(&dir)?;
        let _lock = self.lock(id)?;
        if dir.join(PROJECT_MANIFEST).exists() {
            return Err(invalid(format!("project {id} already exists")));
        }
        let p = Project::new(id, name, created_at);
        self.write_manifest(&p)?;
        Ok(p)
    }

    /// Reads and validates a manifest; every referenced file must exist and
    /// match its hash. Offending paths are reported together.
    pub fn load(&self, id: &str) -> Result<Project> {
        let _lock = self.lock_with(id, false)?;
        self.load_unlocked(id)
    }

    fn load_unlocked(&self, id: &str) -> Result<Project> {
        let dir = self.project_dir(id);
        let path = dir.join(PROJECT_MANIFEST);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(Error::NotFound(format!("project {id}"))),
            Err(e) => return Err(e.into()),
        };
        let p: Project = serde_json::from_slice(&bytes)?;
        if p.id != id {
            return Err(invalid(format!("manifest in {} names project {}", dir.display(), p.id)));
        }
        p.validate()?;
        let mut bad = Vec::new();
        for a in p.artifacts() {
            let file = dir.join(&a.path);
            match fs::read(&file) {
                Ok(b) if sha256_hex(&b) == a.id => {}
                _ => bad.push(file),
            }
        }
        if !bad.is_empty() {
            return Err(Error::MissingFiles(bad));
        }
        Ok(p)
    }

    fn write_manifest(&self, p: &Project) -> Result<()> {
        let mut json = serde_json::to_vec_pretty(p)?;
        json.push(b'\n');
        write_atomic(&self.project_dir(&p.id).join(PROJECT_MANIFEST), &json)
    }

    /// Runs `f` on the current manifest under the exclusive lock and saves
    /// the result. Nothing is saved when `f` fails.
    pub fn update<T>(&self, id: &str, f: impl FnOnce(&mut Project, &ArtifactWriter) -> Result<T>) -> Result<T> {
        let _lock = self.lock(id)?;
        let mut p = self.load_unlocked(id)?;
        let writer = ArtifactWriter { dir: self.project_dir(id) };
        let out = f(&mut p, &writer)?;
        p.validate()?;
        self.write_manifest(&p)?;
        Ok(out)
    }

    /// Overwrites the manifest as is (under the exclusive lock).
    pub fn save(&self, p: &Project) -> Result<()> {
        let _lock = self.lock(&p.id)?;
        p.validate()?;
        self.write_manifest(p)
    }

    pub fn read_artifact(&self, project: &str, a: &ArtifactRef) -> Result<Vec<u8>> {
        check_project_id(project)?;
        let path = self.project_dir(project).join(&a.path);
        let bytes = fs::read(&path).map_err(|_| Error::MissingFiles(vec![path.clone()]))?;
        if sha256_hex(&bytes) != a.id {
            return Err(Error::MissingFiles(vec![path]));
        }
        Ok(bytes)
    }

    /// Ids of all projects with a manifest, sorted.
    pub fn list(&self) -> Result<Vec<String>> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root)? {
            let entry = entry?;
            if let Some(id) = entry.file_name().to_str() {
                if self.exists(id) {
                    ids.push(id.to_string());
                }
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Locates an artifact by hash across all projects.
    pub fn find_artifact(&self, artifact_id: &str) -> Result<(String, ArtifactRef, Vec<u8>)> {
        for id in self.list()? {
            let Ok(p) = self.load(&id) else { continue };
            if let Some(a) = p.artifact(artifact_id) {
                let bytes = self.read_artifact(&id, a)?;
                return Ok((id, a.clone(), bytes));
            }
        }
        Err(Error::NotFound(format!("artifact {artifact_id}")))
    }
}

/// Writes artifact files into one project directory.
pub struct ArtifactWriter {
    dir: PathBuf,
}

impl ArtifactWriter {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&self, rel: &str, media_type: &str, bytes: &[u8]) -> Result<ArtifactRef> {
        write_atomic(&self.dir.join(rel), bytes)?;
        Ok(ArtifactRef {
            id: sha256_hex(bytes),
            path: rel.to_string(),
            media_type: media_type.to_string(),
            size: bytes.len() as u64,
        })
    }

    pub fn read(&self, a: &ArtifactRef) -> Result<Vec<u8>> {
        let path = self.dir.join(&a.path);
        let bytes = fs::read(&path).map_err(|_| Error::MissingFiles(vec![path.clone()]))?;
        if sha256_hex(&bytes) != a.id {
            return Err(Error::MissingFiles(vec![path]));
        }
        Ok(bytes)
    }

    /// Deletes a file or directory tree if present.
    pub fn remove(&self, rel: &str) -> Result<()> {
        let path = self.dir.join(rel);
        if path.is_dir() {
            fs::remove_dir_all(path)?;
        } else if path.exists() {
            fs::remove_file(path)?;
        }
        Ok(())
    }
}
