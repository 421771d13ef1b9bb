//! Dataset manifests: JSON lists of image / ground-truth / optional deep-map
//! paths, resolved relative to the manifest file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Stable identifier; defaults to the image file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub image: PathBuf,
    pub gt: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deep: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn effective_id(&self) -> String {
        match &self.id {
            Some(id) => id.clone(),
            None => self
                .image
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.image.to_string_lossy().into_owned()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Load and validate: relative paths are resolved against the manifest's
    /// directory, every referenced file must exist, and effective ids must be
    /// unique.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| match source.kind() {
            std::io::ErrorKind::NotFound => Error::FileNotFound { path: path.into() },
            _ => Error::Io {
                path: path.into(),
                source,
            },
        })?;
        let mut manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::InvalidManifest {
                path: path.into(),
                reason: e.to_string(),
            })?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        let resolve = |p: &PathBuf| -> PathBuf {
            if p.is_absolute() {
                p.clone()
            } else {
                base.join(p)
            }
        };
        for entry in &mut manifest.entries {
            entry.image = resolve(&entry.image);
            entry.gt = resolve(&entry.gt);
            entry.deep = entry.deep.as_ref().map(resolve);
        }
        manifest.validate(path)?;
        Ok(manifest)
    }

    fn validate(&self, path: &Path) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.entries {
            let id = entry.effective_id();
            if !seen.insert(id.clone()) {
                return Err(Error::InvalidManifest {
                    path: path.into(),
                    reason: format!("duplicate entry id '{id}'"),
                });
            }
            for p in [Some(&entry.image), Some(&entry.gt), entry.deep.as_ref()]
                .into_iter()
                .flatten()
            {
                if !p.exists() {
                    return Err(Error::InvalidManifest {
                        path: path.into(),
                        reason: format!("referenced file does not exist: '{}'", p.display()),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(path, json).map_err(|source| Error::Io {
            path: path.into(),
            source,
        })
    }
}
