//! Datasets: MNIST-format ingestion, synthetic oracle data and seeded splits.

mod idx;

use serde::{Deserialize, Serialize};

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_images, load_idx_labels, parse_idx_images,
    parse_idx_labels, write_idx_images, write_idx_labels, IMAGE_MAGIC, LABEL_MAGIC,
};

use crate::error::{invalid, Result};
use crate::math::{dot, Matrix, SeededRng};
use std::path::Path;

/// Height, width and channel count of the images stored in a dataset row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl ImageShape {
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// `n` samples in `[0, 1]^d` with optional class labels.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    features: Matrix,
    labels: Option<Vec<usize>>,
    num_classes: usize,
    image_shape: Option<ImageShape>,
}

impl Dataset {
    /// Checks every invariant: features in `[0, 1]`, one label per row below
    /// `num_classes`, and an image shape that covers each row exactly.
    pub fn new(
        name: impl Into<String>,
        features: Matrix,
        labels: Option<Vec<usize>>,
        num_classes: usize,
        image_shape: Option<ImageShape>,
    ) -> Result<Self> {
        if let Some(pos) = features
            .as_slice()
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            return invalid(format!(
                "feature {} at flat index {pos} outside [0, 1]",
                features.as_slice()[pos]
            ));
        }
        if let Some(labels) = &labels {
            if labels.len() != features.rows() {
                return invalid(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    features.rows()
                ));
            }
            if let Some(bad) = labels.iter().find(|&&l| l >= num_classes) {
                return invalid(format!("label {bad} not below {num_classes} classes"));
            }
        }
        if let Some(shape) = image_shape {
            if shape.len() != features.cols() {
                return invalid(format!(
                    "image shape {}x{}x{} does not match {} features",
                    shape.height,
                    shape.width,
                    shape.channels,
                    features.cols()
                ));
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            num_classes,
            image_shape,
        })
    }

    /// Loads an IDX image file and, if given, its label file (10 classes).
    pub fn from_idx(
        name: impl Into<String>,
        images: impl AsRef<Path>,
        labels: Option<&Path>,
    ) -> Result<Self> {
        let (features, shape) = load_idx_images(images)?;
        let labels = labels.map(load_idx_labels).transpose()?;
        let num_classes = labels
            .as_ref()
            .map_or(0, |l| l.iter().max().map_or(0, |m| (m + 1).max(10)));
        Self::new(name, features, labels, num_classes, Some(shape))
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Labels, or an invalid-argument error naming `purpose`.
    pub fn require_labels(&self, purpose: &str) -> Result<&[usize]> {
        match &self.labels {
            Some(l) => Ok(l),
            None => invalid(format!(
                "{purpose} needs labels but dataset {} has none",
                self.name
            )),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn image_shape(&self) -> Option<ImageShape> {
        self.image_shape
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Same data without labels.
    pub fn without_labels(&self) -> Dataset {
        Dataset {
            labels: None,
            ..self.clone()
        }
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize], name: impl Into<String>) -> Result<Dataset> {
        if let Some(bad) = indices.iter().find(|&&i| i >= self.len()) {
            return invalid(format!(
                "index {bad} out of range for {} samples",
                self.len()
            ));
        }
        Ok(Dataset {
            name: name.into(),
            features: self.features.select_rows(indices),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            num_classes: self.num_classes,
            image_shape: self.image_shape,
        })
    }

    /// The first `n` rows of a seeded shuffle (all rows when `n` exceeds the size).
    pub fn shuffled_head(&self, n: usize, seed: u64) -> Dataset {
        let mut order = SeededRng::new(seed).permutation(self.len());
        order.truncate(n.min(self.len()));
        let name = format!("{}[shuffle:{seed}][..{}]", self.name, order.len());
        self.subset(&order, name)
            .expect("indices from a permutation")
    }
}

/// Uniform features in `[0, 1]^d` labeled by the side of the hyperplane
/// `w·x + b = 0` (label 1 when `w·x + b > 0`).
pub fn synth_linear_dataset(
    rng: &mut SeededRng,
    n: usize,
    d: usize,
    w: &[f64],
    b: f64,
) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return invalid("synthetic dataset needs n >= 1 and d >= 1");
    }
    if w.len() != d {
        return invalid(format!("hyperplane has {} weights for d = {d}", w.len()));
    }
    let values: Vec<f64> = (0..n * d).map(|_| rng.uniform()).collect();
    let features = Matrix::from_vec(n, d, values)?;
    let labels = features
        .row_iter()
        .map(|x| usize::from(dot(w, x) + b > 0.0))
        .collect();
    Dataset::new(
        format!("synthetic-linear-{n}x{d}"),
        features,
        Some(labels),
        2,
        None,
    )
}

/// Seeded partition into `⌈fraction·n⌉` rows and the remainder.
pub fn split(dataset: &Dataset, fraction: f64, rng: &mut SeededRng) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return invalid(format!("split fraction {fraction} outside (0, 1)"));
    }
    if dataset.is_empty() {
        return invalid("cannot split an empty dataset");
    }
    let order = rng.permutation(dataset.len());
    let head = ((fraction * dataset.len() as f64).ceil() as usize).min(dataset.len());
    let first = dataset.subset(&order[..head], format!("{}[split:a]", dataset.name))?;
    let second = dataset.subset(&order[head..], format!("{}[split:b]", dataset.name))?;
    Ok((first, second))
}
