use std::time::Duration;

use brittle_core::models::BlackBoxModel;
use brittle_core::{Error, Matrix, Result};
use serde::de::DeserializeOwned;

use crate::protocol::{
    ErrorBody, Metadata, PredictRequest, PredictResponse, NORMALIZATION_TOLERANCE,
};

pub const DEFAULT_MAX_BATCH: usize = 64;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A model behind `base_url`, queried in chunks of at most `max_batch` rows.
///
/// Every response is checked against the model contract (row count, width,
/// nonnegative entries, rows summing to one) before it is returned.
#[derive(Clone, Debug)]
pub struct RemoteModel {
    base_url: String,
    agent: ureq::Agent,
    max_batch: usize,
    metadata: Metadata,
}

fn transport(e: ureq::Error) -> Error {
    Error::Transport(e.to_string())
}

impl RemoteModel {
    /// Fetches the endpoint's metadata; fails if it is unreachable.
    pub fn connect(base_url: &str, timeout: Duration, max_batch: usize) -> Result<Self> {
        if max_batch == 0 {
            return Err(Error::InvalidArgument("max_batch must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let base_url = base_url.trim_end_matches('/').to_string();
        let mut response = agent
            .get(format!("{base_url}/v1/metadata"))
            .call()
            .map_err(transport)?;
        let status = response.status().as_u16();
        let text = response.body_mut().read_to_string().map_err(transport)?;
        let metadata: Metadata = decode(status, &text)?;
        if metadata.input_dim == 0 || metadata.num_classes == 0 {
            return Err(Error::Protocol(format!(
                "endpoint reports input_dim {} and num_classes {}",
                metadata.input_dim, metadata.num_classes
            )));
        }
        Ok(Self {
            base_url,
            agent,
            max_batch,
            metadata,
        })
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn max_batch(&self) -> usize {
        self.max_batch
    }

    fn predict_chunk(&self, chunk: &Matrix, first_row: usize) -> Result<Vec<f64>> {
        let request = PredictRequest {
            inputs: chunk.row_iter().map(<[f64]>::to_vec).collect(),
        };
        let body = serde_json::to_vec(&request)?;
        let mut response = self
            .agent
            .post(format!("{}/v1/predict", self.base_url))
            .header("Content-Type", "application/json")
            .send(&body[..])
            .map_err(transport)?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .with_config()
            .limit(u64::MAX)
            .read_to_string()
            .map_err(transport)?;
        let reply: PredictResponse = decode(status, &text)?;
        if reply.outputs.len() != chunk.rows() {
            return Err(Error::Protocol(format!(
                "sent {} rows starting at row {first_row}, received {}",
                chunk.rows(),
                reply.outputs.len()
            )));
        }
        let c = self.metadata.num_classes;
        let mut values = Vec::with_capacity(chunk.rows() * c);
        for (i, row) in reply.outputs.iter().enumerate() {
            check_row(first_row + i, row, c)?;
            values.extend_from_slice(row);
        }
        Ok(values)
    }
}

fn decode<T: DeserializeOwned>(status: u16, text: &str) -> Result<T> {
    if !(200..300).contains(&status) {
        let detail = serde_json::from_str::<ErrorBody>(text)
            .map(|b| b.error)
            .unwrap_or_else(|_| text.chars().take(200).collect());
        return Err(Error::Protocol(format!(
            "endpoint answered {status}: {detail}"
        )));
    }
    serde_json::from_str(text).map_err(|e| Error::Protocol(format!("unreadable response: {e}")))
}

fn check_row(index: usize, row: &[f64], classes: usize) -> Result<()> {
    if row.len() != classes {
        return Err(Error::Protocol(format!(
            "output row {index} has {} entries, expected {classes}",
            row.len()
        )));
    }
    if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
        return Err(Error::Protocol(format!(
            "output row {index} has a negative or non-finite probability"
        )));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err(Error::Protocol(format!(
            "output row {index} sums to {sum}, not 1"
        )));
    }
    Ok(())
}

impl BlackBoxModel for RemoteModel {
    fn input_dim(&self) -> usize {
        self.metadata.input_dim
    }

    fn num_classes(&self) -> usize {
        self.metadata.num_classes
    }

    fn model_id(&self) -> String {
        self.metadata.model_id.clone()
    }

    fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        let d = self.metadata.input_dim;
        if batch.cols() != d {
            return Err(Error::InvalidArgument(format!(
                "batch has {} columns, remote model expects {d}",
                batch.cols()
            )));
        }
        let mut values = Vec::with_capacity(batch.rows() * self.metadata.num_classes);
        for start in (0..batch.rows()).step_by(self.max_batch) {
            let end = (start + self.max_batch).min(batch.rows());
            values.extend(self.predict_chunk(&batch.row_range(start, end), start)?);
        }
        Matrix::from_vec(batch.rows(), self.metadata.num_classes, values)
    }
}
