//! Directory-backed job persistence.
//!
//! ```text
//! <root>/jobs/job-000001/
//!     job.json          status and counters, rewritten atomically
//!     dataset.jsonl     snapshot of the submitted comments
//!     config.toml       resolved analysis config
//!     pending.json      draft revisions not yet re-matched
//!     versions/0.json   one immutable analysis document per version
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use kpa_core::ingest::{read_dataset, write_dataset};
use kpa_core::pipeline::{emit_report, parse_report, AnalysisResult, ReportFormat};
use kpa_core::{AnalysisConfig, Dataset, Stance};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("job {0:?} not found")]
    NotFound(String),
    #[error("job {id}: cannot move from {from:?} to {to:?}")]
    InvalidTransition {
        id: String,
        from: JobStatus,
        to: JobStatus,
    },
    #[error("job {id}: version {version} already exists")]
    VersionExists { id: String, version: usize },
    #[error("job {id}: corrupt {file}: {message}")]
    Corrupt { id: String, file: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobStatus {
    Pending,
    Running,
    Done,
    Failed,
}

impl JobStatus {
    pub fn can_move_to(self, next: JobStatus) -> bool {
        matches!(
            (self, next),
            (JobStatus::Pending, JobStatus::Running)
                | (JobStatus::Pending, JobStatus::Failed)
                | (JobStatus::Running, JobStatus::Done)
                | (JobStatus::Running, JobStatus::Failed)
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub dataset: String,
    pub status: JobStatus,
    /// Number of persisted versions.
    pub versions: usize,
    /// Counter for ids of key points added by analysts.
    pub added_key_points: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A draft edit of the latest version's key point list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum Revision {
    Rename {
        key_point_id: String,
        text: String,
    },
    Delete {
        key_point_id: String,
    },
    Add {
        key_point_id: String,
        text: String,
        topic: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stance: Option<Stance>,
    },
}

pub struct JobStore {
    root: PathBuf,
    next_id: Mutex<u64>,
}

const ID_PREFIX: &str = "job-";

fn parse_id(id: &str) -> Option<u64> {
    let digits = id.strip_prefix(ID_PREFIX)?;
    if digits.len() < 6 || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

/// Writes through a temporary file and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

impl JobStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("jobs"))?;
        let store = JobStore {
            root,
            next_id: Mutex::new(0),
        };
        let last = store.ids()?.iter().filter_map(|id| parse_id(id)).max().unwrap_or(0);
        *store.next_id.lock().expect("id counter poisoned") = last + 1;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn dir(&self, id: &str) -> Result<PathBuf, StoreError> {
        if parse_id(id).is_none() {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let dir = self.root.join("jobs").join(id);
        if dir.join("job.json").is_file() {
            Ok(dir)
        } else {
            Err(StoreError::NotFound(id.to_string()))
        }
    }

    fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids = Vec::new();
        for entry in fs::read_dir(self.root.join("jobs"))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if parse_id(&name).is_some() {
                ids.push(name);
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn read_json<T: for<'de> Deserialize<'de>>(&self, id: &str, file: &'static str) -> Result<T, StoreError> {
        let path = self.dir(id)?.join(file);
        let reader = BufReader::new(File::open(path)?);
        serde_json::from_reader(reader).map_err(|e| StoreError::Corrupt {
            id: id.to_string(),
            file,
            message: e.to_string(),
        })
    }

    fn write_record(&self, dir: &Path, record: &JobRecord) -> Result<(), StoreError> {
        let bytes = serde_json::to_vec_pretty(record).expect("job records serialize");
        write_atomic(&dir.join("job.json"), &bytes)?;
        Ok(())
    }

    /// Persists a new pending job.
    pub fn create(&self, dataset: &Dataset, config: &AnalysisConfig) -> Result<JobRecord, StoreError> {
        let id = {
            let mut next = self.next_id.lock().expect("id counter poisoned");
            let id = format!("{ID_PREFIX}{:06}", *next);
            *next += 1;
            id
        };
        let dir = self.root.join("jobs").join(&id);
        let staging = self.root.join("jobs").join(format!(".{id}.staging"));
        fs::create_dir_all(staging.join("versions"))?;
        let mut snapshot = Vec::new();
        write_dataset(dataset, &mut snapshot).map_err(|e| io::Error::other(e.to_string()))?;
        write_atomic(&staging.join("dataset.jsonl"), &snapshot)?;
        let config_text = config.to_toml_string().map_err(|e| io::Error::other(e.to_string()))?;
        write_atomic(&staging.join("config.toml"), config_text.as_bytes())?;
        write_atomic(&staging.join("pending.json"), b"[]")?;
        let record = JobRecord {
            id: id.clone(),
            dataset: dataset.name.clone(),
            status: JobStatus::Pending,
            versions: 0,
            added_key_points: 0,
            error: None,
        };
        self.write_record(&staging, &record)?;
        fs::rename(staging, dir)?;
        Ok(record)
    }

    pub fn list(&self) -> Result<Vec<JobRecord>, StoreError> {
        self.ids()?.iter().map(|id| self.get(id)).collect()
    }

    pub fn get(&self, id: &str) -> Result<JobRecord, StoreError> {
        self.read_json(id, "job.json")
    }

    /// Moves a job forward. Backward or sideways moves are rejected.
    pub fn set_status(&self, id: &str, status: JobStatus, error: Option<String>) -> Result<JobRecord, StoreError> {
        let dir = self.dir(id)?;
        let mut record = self.get(id)?;
        if !record.status.can_move_to(status) {
            return Err(StoreError::InvalidTransition {
                id: id.to_string(),
                from: record.status,
                to: status,
            });
        }
        record.status = status;
        record.error = error;
        self.write_record(&dir, &record)?;
        Ok(record)
    }

    pub fn next_key_point_id(&self, id: &str) -> Result<String, StoreError> {
        let dir = self.dir(id)?;
        let mut record = self.get(id)?;
        record.added_key_points += 1;
        self.write_record(&dir, &record)?;
        Ok(format!("kp-{}", record.added_key_points))
    }

    pub fn dataset(&self, id: &str) -> Result<Dataset, StoreError> {
        let record = self.get(id)?;
        let config = self.config(id)?;
        let file = File::open(self.dir(id)?.join("dataset.jsonl"))?;
        read_dataset(BufReader::new(file), record.dataset, config.domain).map_err(|e| StoreError::Corrupt {
            id: id.to_string(),
            file: "dataset.jsonl",
            message: e.to_string(),
        })
    }

    pub fn config(&self, id: &str) -> Result<AnalysisConfig, StoreError> {
        let text = fs::read_to_string(self.dir(id)?.join("config.toml"))?;
        AnalysisConfig::from_toml_str(&text, None).map_err(|e| StoreError::Corrupt {
            id: id.to_string(),
            file: "config.toml",
            message: e.to_string(),
        })
    }

    /// Appends a version. Existing version files are never replaced.
    pub fn write_version(&self, id: &str, result: &AnalysisResult) -> Result<usize, StoreError> {
        let dir = self.dir(id)?;
        let mut record = self.get(id)?;
        let version = record.versions;
        let path = dir.join("versions").join(format!("{version}.json"));
        let tmp = dir.join("versions").join(format!("{version}.json.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(emit_report(result, ReportFormat::Structured).as_bytes())?;
            f.sync_all()?;
        }
        // Claim the name first so an existing version cannot be overwritten.
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                fs::remove_file(&tmp)?;
                return Err(StoreError::VersionExists {
                    id: id.to_string(),
                    version,
                });
            }
            Err(e) => return Err(e.into()),
        }
        fs::rename(&tmp, &path)?;
        record.versions = version + 1;
        self.write_record(&dir, &record)?;
        Ok(version)
    }

    pub fn version_bytes(&self, id: &str, version: usize) -> Result<Option<Vec<u8>>, StoreError> {
        let record = self.get(id)?;
        if version >= record.versions {
            return Ok(None);
        }
        let path = self.dir(id)?.join("versions").join(format!("{version}.json"));
        Ok(Some(fs::read(path)?))
    }

    pub fn version(&self, id: &str, version: usize) -> Result<Option<AnalysisResult>, StoreError> {
        let Some(bytes) = self.version_bytes(id, version)? else {
            return Ok(None);
        };
        let text = String::from_utf8_lossy(&bytes);
        parse_report(&text).map(Some).map_err(|e| StoreError::Corrupt {
            id: id.to_string(),
            file: "versions",
            message: e.to_string(),
        })
    }

    pub fn pending(&self, id: &str) -> Result<Vec<Revision>, StoreError> {
        self.read_json(id, "pending.json")
    }

    pub fn set_pending(&self, id: &str, revisions: &[Revision]) -> Result<(), StoreError> {
        let dir = self.dir(id)?;
        let bytes = serde_json::to_vec_pretty(revisions).expect("revisions serialize");
        write_atomic(&dir.join("pending.json"), &bytes)?;
        Ok(())
    }
}
