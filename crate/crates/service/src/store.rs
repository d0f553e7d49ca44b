//! Append-only record log. Each submission body is written to its own file
//! and fsynced before the log line that refers to it.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const LOG_FILE: &str = "records.jsonl";
pub const BODY_DIR: &str = "submissions";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case", deny_unknown_fields)]
pub enum Record {
    Submission {
        submission_id: String,
        submitter: String,
        seq: u64,
        received_at: u64,
    },
    Score {
        submission_id: String,
        f1: f64,
        map: f64,
    },
    Failure {
        submission_id: String,
        error: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pending,
    Scored { f1: f64, map: f64 },
    Failed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub submission_id: String,
    pub submitter: String,
    pub seq: u64,
    pub received_at: u64,
    pub status: Status,
}

pub struct Store {
    dir: PathBuf,
    log: File,
    pub entries: BTreeMap<String, Entry>,
    pub next_seq: u64,
}

impl Store {
    /// Opens or creates the store and replays its log. A torn final line
    /// left by a crash is cut off before new records are appended.
    pub fn open(dir: &Path) -> Result<Self, ServiceError> {
        fs::create_dir_all(dir.join(BODY_DIR))?;
        let mut log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(dir.join(LOG_FILE))?;
        let mut text = String::new();
        log.read_to_string(&mut text)?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            log::warn!("dropping {} bytes of incomplete trailing record", text.len() - complete);
            log.set_len(complete as u64)?;
            log.seek(std::io::SeekFrom::End(0))?;
        }

        let mut store = Store {
            dir: dir.to_owned(),
            log,
            entries: BTreeMap::new(),
            next_seq: 0,
        };
        for (i, line) in text[..complete].lines().enumerate() {
            let record: Record = serde_json::from_str(line).map_err(|e| ServiceError::Log {
                line: i + 1,
                message: e.to_string(),
            })?;
            store.apply(record);
        }
        Ok(store)
    }

    fn apply(&mut self, record: Record) {
        match record {
            Record::Submission {
                submission_id,
                submitter,
                seq,
                received_at,
            } => {
                self.next_seq = self.next_seq.max(seq + 1);
                self.entries.insert(
                    submission_id.clone(),
                    Entry {
                        submission_id,
                        submitter,
                        seq,
                        received_at,
                        status: Status::Pending,
                    },
                );
            }
            Record::Score { submission_id, f1, map } => {
                if let Some(e) = self.entries.get_mut(&submission_id) {
                    e.status = Status::Scored { f1, map };
                }
            }
            Record::Failure { submission_id, .. } => {
                if let Some(e) = self.entries.get_mut(&submission_id) {
                    e.status = Status::Failed;
                }
            }
        }
    }

    pub fn body_path(&self, submission_id: &str) -> PathBuf {
        self.dir.join(BODY_DIR).join(format!("{submission_id}.jsonl"))
    }

    pub fn write_body(&self, submission_id: &str, body: &[u8]) -> Result<(), ServiceError> {
        let mut f = File::create(self.body_path(submission_id))?;
        f.write_all(body)?;
        f.sync_all()?;
        Ok(())
    }

    /// Durably appends `record`, then applies it in memory.
    pub fn append(&mut self, record: Record) -> Result<(), ServiceError> {
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        self.log.write_all(line.as_bytes())?;
        self.log.sync_data()?;
        self.apply(record);
        Ok(())
    }

    pub fn pending(&self) -> Vec<String> {
        self.entries
            .values()
            .filter(|e| e.status == Status::Pending)
            .map(|e| e.submission_id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn submission(id: &str, seq: u64) -> Record {
        Record::Submission {
            submission_id: id.into(),
            submitter: "team".into(),
            seq,
            received_at: 0,
        }
    }

    #[test]
    fn replay_restores_state() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open(dir.path()).unwrap();
            s.append(submission("a", 0)).unwrap();
            s.append(submission("b", 1)).unwrap();
            s.append(Record::Score {
                submission_id: "a".into(),
                f1: 0.5,
                map: 0.25,
            })
            .unwrap();
        }
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.next_seq, 2);
        assert_eq!(s.entries["a"].status, Status::Scored { f1: 0.5, map: 0.25 });
        assert_eq!(s.pending(), vec!["b".to_string()]);
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut s = Store::open(dir.path()).unwrap();
            s.append(submission("a", 0)).unwrap();
        }
        let log = dir.path().join(LOG_FILE);
        let mut f = OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{\"record\":\"score\",\"subm").unwrap();
        drop(f);
        let mut s = Store::open(dir.path()).unwrap();
        s.append(submission("b", 1)).unwrap();
        let s = Store::open(dir.path()).unwrap();
        assert_eq!(s.entries.len(), 2);
    }

    #[test]
    fn corrupt_record_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(LOG_FILE), "not json\n").unwrap();
        let err = Store::open(dir.path()).err().unwrap();
        assert!(err.to_string().contains("line 1"), "{err}");
    }
}
