use std::net::{SocketAddr, TcpListener, ToSocketAddrs};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::{Body, Bytes};
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::Response;
use axum::routing::{get, post};
use axum::Router;
use brittle_core::models::BlackBoxModel;
use brittle_core::{Error, Matrix, Result};
use serde::Serialize;
use tokio::sync::oneshot;

use crate::protocol::{ErrorBody, Metadata, PredictRequest, PredictResponse};

type SharedModel = Arc<dyn BlackBoxModel>;

/// A running server. Dropping the handle stops it and waits for the worker.
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// `http://host:port`, suitable for [`crate::RemoteModel::connect`].
    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops on its own (it only does so on error).
    pub fn join(mut self) -> Result<()> {
        match self.thread.take().map(JoinHandle::join) {
            Some(Ok(result)) => result.map_err(Error::from),
            Some(Err(_)) => Err(Error::Transport("server thread panicked".into())),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

/// Binds `addr` and serves `model` on a background runtime. Port 0 picks a
/// free port; see [`ServerHandle::local_addr`].
pub fn serve<M: BlackBoxModel + 'static>(
    model: M,
    addr: impl ToSocketAddrs,
) -> Result<ServerHandle> {
    let listener =
        TcpListener::bind(addr).map_err(|e| Error::Transport(format!("cannot bind: {e}")))?;
    listener.set_nonblocking(true)?;
    let local = listener.local_addr()?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_io()
        .build()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(Arc::new(model));
    let thread = std::thread::Builder::new()
        .name(format!("brittle-service-{}", local.port()))
        .spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener)?;
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
            })
        })?;
    Ok(ServerHandle {
        addr: local,
        shutdown: Some(tx),
        thread: Some(thread),
    })
}

fn router(model: SharedModel) -> Router {
    Router::new()
        .route("/v1/metadata", get(metadata))
        .route("/v1/predict", post(predict))
        .with_state(model)
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("protocol types serialize");
    Response::builder()
        .status(status)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body))
        .expect("static response parts")
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    json(
        status,
        &ErrorBody {
            error: message.into(),
        },
    )
}

async fn metadata(State(model): State<SharedModel>) -> Response {
    json(
        StatusCode::OK,
        &Metadata {
            model_id: model.model_id(),
            input_dim: model.input_dim(),
            num_classes: model.num_classes(),
        },
    )
}

async fn predict(State(model): State<SharedModel>, body: Bytes) -> Response {
    let request: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => {
            return error(
                StatusCode::BAD_REQUEST,
                format!("malformed request body: {e}"),
            )
        }
    };
    let d = model.input_dim();
    if let Some((i, row)) = request
        .inputs
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != d)
    {
        return error(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("input row {i} has {} values, model expects {d}", row.len()),
        );
    }
    let model_id = model.model_id();
    if request.inputs.is_empty() {
        return json(
            StatusCode::OK,
            &PredictResponse {
                model_id,
                outputs: Vec::new(),
            },
        );
    }
    let batch = match Matrix::from_rows(&request.inputs) {
        Ok(b) => b,
        Err(e) => return error(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()),
    };
    let result = tokio::task::spawn_blocking(move || model.predict(&batch)).await;
    match result {
        Ok(Ok(probs)) => json(
            StatusCode::OK,
            &PredictResponse {
                model_id,
                outputs: probs.row_iter().map(<[f64]>::to_vec).collect(),
            },
        ),
        Ok(Err(e)) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
        Err(_) => error(StatusCode::INTERNAL_SERVER_ERROR, "prediction task failed"),
    }
}
