//! Append-only JSON-lines event log per session, and replay.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ifa_core::augmentation::Correction;
use ifa_core::experiment::Experiment;

use crate::error::ServiceError;
use crate::session::{CreateSession, Session};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", content = "data", rename_all = "snake_case")]
pub enum Event {
    Created { id: String, request: CreateSession },
    Corrected { sample_id: usize, correction: Correction },
    Retrained { skip: BTreeSet<usize>, metric: f64 },
}

#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    file: File,
}

impl EventLog {
    pub fn create(dir: &Path, id: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{id}.jsonl"));
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self { path, file })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Appends one event as a single write.
    pub fn append(&mut self, event: &Event) -> std::io::Result<()> {
        let mut line = serde_json::to_string(event).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())
    }

    pub fn sync(&self) -> std::io::Result<()> {
        self.file.sync_all()
    }
}

/// Rebuilds a session by re-applying its logged events.
pub fn replay(path: &Path, experiment: &Experiment) -> Result<Session, ServiceError> {
    let reader = BufReader::new(File::open(path)?);
    let mut session: Option<Session> = None;
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| ServiceError::BadRequest(format!("log line {}: {e}", n + 1)))?;
        match (event, session.as_mut()) {
            (Event::Created { id, request }, None) => session = Some(Session::create(id, experiment, &request)?),
            (Event::Corrected { sample_id, correction }, Some(s)) => {
                s.submit(sample_id, correction)?;
            }
            (Event::Retrained { skip, metric }, Some(s)) => {
                let entry = s.retrain(&skip)?;
                if entry.metric.to_bits() != metric.to_bits() {
                    return Err(ServiceError::Internal(format!(
                        "replayed metric {} differs from logged {metric}",
                        entry.metric
                    )));
                }
            }
            _ => return Err(ServiceError::BadRequest(format!("log line {}: out of order", n + 1))),
        }
    }
    session.ok_or_else(|| ServiceError::BadRequest("empty session log".into()))
}
