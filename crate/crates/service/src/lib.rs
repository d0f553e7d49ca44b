//! Blind scoring service. Submissions are detections files; the service
//! scores them against ground truth it never reveals and keeps a
//! leaderboard of aggregate F1 and mAP.
//!
//! Endpoints:
//!
//! - `POST /submissions?submitter=<name>` with a detections JSONL body:
//!   `202` with the new `submission_id`, `400` with the offending line, or
//!   `413` when the body exceeds the size limit.
//! - `GET /submissions/{id}`: status and, once scored, `f1`, `map`, `rank`.
//! - `GET /leaderboard`: scored entries ranked by F1, then mAP, then arrival.
//!
//! Every body is key-sorted JSON with a trailing newline.

mod api;
pub mod store;

use std::future::Future;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use ulcerbench_core::io::{parse_detections, read_ground_truth, GroundTruthTable};
use ulcerbench_core::metrics::MatchConfig;
use ulcerbench_core::scoring::score_submission;

use store::{Record, Status, Store};

pub use api::router;

pub const DEFAULT_MAX_BODY_BYTES: usize = 16 * 1024 * 1024;
pub const MAX_SUBMITTER_LEN: usize = 64;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] ulcerbench_core::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("record log line {line}: {message}")]
    Log { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub gt_path: PathBuf,
    pub data_dir: PathBuf,
    pub max_body_bytes: usize,
    pub match_config: MatchConfig,
    /// Re-score every stored submission at startup, not only pending ones.
    pub rescore_all: bool,
}

impl ServiceConfig {
    pub fn new(gt_path: impl Into<PathBuf>, data_dir: impl Into<PathBuf>) -> Self {
        Self {
            gt_path: gt_path.into(),
            data_dir: data_dir.into(),
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            match_config: MatchConfig::default(),
            rescore_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeaderboardEntry {
    pub rank: usize,
    pub submission_id: String,
    pub submitter: String,
    pub f1: f64,
    pub map: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubmissionView {
    pub submission_id: String,
    pub submitter: String,
    pub status: &'static str,
    pub received_at: u64,
    pub f1: Option<f64>,
    pub map: Option<f64>,
    pub rank: Option<usize>,
}

#[derive(Debug)]
pub enum IngestError {
    BadSubmitter(String),
    Malformed(String),
    Storage(ServiceError),
}

struct Inner {
    gt: GroundTruthTable,
    match_config: MatchConfig,
    max_body_bytes: usize,
    store: Mutex<Store>,
}

#[derive(Clone)]
pub struct Service {
    inner: Arc<Inner>,
}

impl Service {
    /// Loads the ground truth, replays the record log and scores every
    /// submission still pending (or all of them with `rescore_all`).
    pub fn open(cfg: &ServiceConfig) -> Result<Self, ServiceError> {
        cfg.match_config.validate()?;
        if cfg.max_body_bytes == 0 {
            return Err(ServiceError::Config("max_body_bytes must be >= 1".into()));
        }
        let (gt, _warnings) = read_ground_truth(&cfg.gt_path)?;
        let store = Store::open(&cfg.data_dir)?;
        let service = Self {
            inner: Arc::new(Inner {
                gt,
                match_config: cfg.match_config,
                max_body_bytes: cfg.max_body_bytes,
                store: Mutex::new(store),
            }),
        };
        let todo = if cfg.rescore_all {
            service.lock().entries.keys().cloned().collect()
        } else {
            service.lock().pending()
        };
        for id in todo {
            service.score(&id)?;
        }
        Ok(service)
    }

    fn lock(&self) -> MutexGuard<'_, Store> {
        self.inner.store.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn max_body_bytes(&self) -> usize {
        self.inner.max_body_bytes
    }

    /// Validates and durably stores a submission; scoring is left to the
    /// caller.
    pub fn ingest(&self, submitter: &str, body: &[u8]) -> Result<String, IngestError> {
        if submitter.is_empty()
            || submitter.chars().count() > MAX_SUBMITTER_LEN
            || submitter.chars().any(char::is_control)
        {
            return Err(IngestError::BadSubmitter(format!(
                "submitter must be 1-{MAX_SUBMITTER_LEN} printable characters"
            )));
        }
        let text = std::str::from_utf8(body).map_err(|e| {
            let line = body[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
            IngestError::Malformed(format!("line {line}: invalid UTF-8"))
        })?;
        parse_detections(text).map_err(|e| IngestError::Malformed(e.to_string()))?;

        let id = uuid::Uuid::new_v4().simple().to_string();
        let received_at = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut store = self.lock();
        store.write_body(&id, body).map_err(IngestError::Storage)?;
        let seq = store.next_seq;
        store
            .append(Record::Submission {
                submission_id: id.clone(),
                submitter: submitter.to_owned(),
                seq,
                received_at,
            })
            .map_err(IngestError::Storage)?;
        Ok(id)
    }

    /// Scores a stored submission and records the outcome. Scoring runs
    /// without holding the store lock.
    pub fn score(&self, submission_id: &str) -> Result<(), ServiceError> {
        let path = self.lock().body_path(submission_id);
        let record = match self.compute(&path) {
            Ok((f1, map)) => Record::Score {
                submission_id: submission_id.to_owned(),
                f1,
                map,
            },
            Err(e) => {
                log::warn!("submission {submission_id} failed to score: {e}");
                Record::Failure {
                    submission_id: submission_id.to_owned(),
                    error: e.to_string(),
                }
            }
        };
        self.lock().append(record)
    }

    fn compute(&self, path: &std::path::Path) -> Result<(f64, f64), ServiceError> {
        let text = std::fs::read_to_string(path)?;
        let dets = parse_detections(&text).map_err(ulcerbench_core::Error::from)?;
        let s = score_submission(&dets, &self.inner.gt, &self.inner.match_config)?;
        Ok((s.f1, s.map))
    }

    pub fn leaderboard(&self) -> Vec<LeaderboardEntry> {
        let store = self.lock();
        let mut scored: Vec<_> = store
            .entries
            .values()
            .filter_map(|e| match e.status {
                Status::Scored { f1, map } => Some((e, f1, map)),
                _ => None,
            })
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| b.2.total_cmp(&a.2))
                .then_with(|| a.0.seq.cmp(&b.0.seq))
        });
        scored
            .into_iter()
            .enumerate()
            .map(|(i, (e, f1, map))| LeaderboardEntry {
                rank: i + 1,
                submission_id: e.submission_id.clone(),
                submitter: e.submitter.clone(),
                f1,
                map,
            })
            .collect()
    }

    pub fn submission(&self, submission_id: &str) -> Option<SubmissionView> {
        let entry = self.lock().entries.get(submission_id)?.clone();
        let (status, f1, map) = match entry.status {
            Status::Pending => ("pending", None, None),
            Status::Failed => ("failed", None, None),
            Status::Scored { f1, map } => ("scored", Some(f1), Some(map)),
        };
        let rank = f1.and_then(|_| {
            self.leaderboard()
                .iter()
                .find(|e| e.submission_id == submission_id)
                .map(|e| e.rank)
        });
        Some(SubmissionView {
            submission_id: entry.submission_id,
            submitter: entry.submitter,
            status,
            received_at: entry.received_at,
            f1,
            map,
            rank,
        })
    }
}

/// Serves `service` on `listener` until `shutdown` resolves.
pub async fn serve(
    service: Service,
    listener: tokio::net::TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
