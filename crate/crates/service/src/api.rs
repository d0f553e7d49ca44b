use axum::body::{to_bytes, Body};
use axum::extract::{DefaultBodyLimit, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::{Deserialize, Serialize};
use ulcerbench_core::report::to_canonical_json;

use crate::{IngestError, LeaderboardEntry, Service};

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json; charset=utf-8")],
        to_canonical_json(value),
    )
        .into_response()
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    json(status, &ErrorBody { error: message.into() })
}

#[derive(Deserialize)]
struct SubmitParams {
    submitter: Option<String>,
}

#[derive(Serialize)]
struct Accepted {
    submission_id: String,
    status: &'static str,
}

#[derive(Serialize)]
struct Leaderboard {
    entries: Vec<LeaderboardEntry>,
}

pub fn router(service: Service) -> Router {
    Router::new()
        .route("/submissions", post(submit))
        .route("/submissions/{id}", get(submission))
        .route("/leaderboard", get(leaderboard))
        .fallback(|| async { error(StatusCode::NOT_FOUND, "no such endpoint") })
        .layer(DefaultBodyLimit::disable())
        .with_state(service)
}

async fn submit(State(svc): State<Service>, Query(params): Query<SubmitParams>, body: Body) -> Response {
    let limit = svc.max_body_bytes();
    let Ok(bytes) = to_bytes(body, limit).await else {
        return error(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!("submission exceeds {limit} bytes"),
        );
    };
    let submitter = params.submitter.unwrap_or_else(|| "anonymous".into());
    let ingest = {
        let svc = svc.clone();
        tokio::task::spawn_blocking(move || svc.ingest(&submitter, &bytes))
    };
    let id = match ingest.await {
        Ok(Ok(id)) => id,
        Ok(Err(IngestError::BadSubmitter(m))) | Ok(Err(IngestError::Malformed(m))) => {
            return error(StatusCode::BAD_REQUEST, m)
        }
        Ok(Err(IngestError::Storage(e))) => {
            log::error!("storing submission failed: {e}");
            return error(StatusCode::INTERNAL_SERVER_ERROR, "submission could not be stored");
        }
        Err(e) => {
            log::error!("ingest task failed: {e}");
            return error(StatusCode::INTERNAL_SERVER_ERROR, "submission could not be stored");
        }
    };
    let scorer = svc.clone();
    let scored_id = id.clone();
    tokio::task::spawn_blocking(move || {
        if let Err(e) = scorer.score(&scored_id) {
            log::error!("recording score of {scored_id} failed: {e}");
        }
    });
    json(
        StatusCode::ACCEPTED,
        &Accepted {
            submission_id: id,
            status: "pending",
        },
    )
}

async fn submission(State(svc): State<Service>, Path(id): Path<String>) -> Response {
    match svc.submission(&id) {
        Some(view) => json(StatusCode::OK, &view),
        None => error(StatusCode::NOT_FOUND, "unknown submission id"),
    }
}

async fn leaderboard(State(svc): State<Service>) -> Response {
    json(
        StatusCode::OK,
        &Leaderboard {
            entries: svc.leaderboard(),
        },
    )
}
