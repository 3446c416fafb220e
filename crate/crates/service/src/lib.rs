//! Serves any [`BlackBoxModel`](brittle_core::models::BlackBoxModel) over
//! HTTP and wraps a remote endpoint back into one.
//!
//! The service has no authentication and is meant for local evaluation runs.
//!
//! ```text
//! GET  /v1/metadata  -> {"model_id": "...", "input_dim": d, "num_classes": c}
//! POST /v1/predict   {"inputs": [[...], ...]} -> {"model_id": "...", "outputs": [[...], ...]}
//! ```
//!
//! Errors carry `{"error": "..."}` with status 400 (malformed body),
//! 422 (dimension mismatch) or 500 (model failure).

mod client;
mod protocol;
mod server;

pub use client::{RemoteModel, DEFAULT_MAX_BATCH, DEFAULT_TIMEOUT};
pub use protocol::{ErrorBody, Metadata, PredictRequest, PredictResponse, NORMALIZATION_TOLERANCE};
pub use server::{serve, ServerHandle};
