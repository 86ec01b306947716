//! Append-only event log, one JSON object per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServerError;

pub const LOG_FILE: &str = "events.ndjson";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated {
        session_id: String,
        study_id: String,
        subject_id: String,
        playlist: Vec<String>,
        created_at: String,
    },
    MediaIssued {
        session_id: String,
        index: usize,
        token: String,
    },
    /// First byte of a token's media went out.
    MediaOpened { token: String },
    RatingSubmitted {
        session_id: String,
        index: usize,
        video_id: String,
        rating: f64,
        timestamp: String,
    },
}

#[derive(Debug)]
pub struct EventLog {
    file: Option<File>,
    path: Option<PathBuf>,
}

impl EventLog {
    /// Log that only lives in memory.
    pub fn ephemeral() -> Self {
        Self { file: None, path: None }
    }

    /// Open (or create) `dir/events.ndjson` and return the events already
    /// in it. A final line without a newline is a torn write and is
    /// dropped; any other unreadable line is an error.
    pub fn open(dir: impl AsRef<Path>) -> Result<(Self, Vec<Event>), ServerError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut events = Vec::new();
        let mut keep_len = 0u64;
        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut line = String::new();
            let mut lineno = 0;
            loop {
                line.clear();
                let n = reader.read_line(&mut line)?;
                if n == 0 {
                    break;
                }
                lineno += 1;
                if !line.ends_with('\n') {
                    tracing::warn!("dropping torn final record at line {lineno}");
                    break;
                }
                keep_len += n as u64;
                if line.trim().is_empty() {
                    continue;
                }
                let ev = serde_json::from_str(&line)
                    .map_err(|e| ServerError::Log(format!("{}:{lineno}: {e}", path.display())))?;
                events.push(ev);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        file.set_len(keep_len)?;
        Ok((
            Self {
                file: Some(file),
                path: Some(path),
            },
            events,
        ))
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn append(&mut self, ev: &Event) -> Result<(), ServerError> {
        if let Some(f) = &mut self.file {
            let mut line = serde_json::to_vec(ev).map_err(|e| ServerError::Log(e.to_string()))?;
            line.push(b'\n');
            f.write_all(&line)?;
            f.flush()?;
        }
        Ok(())
    }
}
