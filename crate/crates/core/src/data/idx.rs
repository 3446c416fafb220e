//! Reader and writer for the IDX binary format used by the MNIST files.
//!
//! Layout: two zero bytes, a type code (`0x08` for unsigned bytes), the number
//! of dimensions, one big-endian `u32` per dimension, then the row-major
//! payload. Files ending in `.gz` are decompressed first.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::ImageShape;
use crate::error::{Error, Result};
use crate::math::Matrix;

const UNSIGNED_BYTE: u8 = 0x08;

/// Magic number of an image file: unsigned bytes, three dimensions.
pub const IMAGE_MAGIC: u32 = 0x0000_0803;
/// Magic number of a label file: unsigned bytes, one dimension.
pub const LABEL_MAGIC: u32 = 0x0000_0801;

fn format_error(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    let mut file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        GzDecoder::new(file).read_to_end(&mut bytes)?;
    } else {
        file.read_to_end(&mut bytes)?;
    }
    Ok(bytes)
}

/// Validates the header and returns `(dims, payload)`.
fn parse(bytes: &[u8], expected_dims: u8) -> Result<(Vec<usize>, &[u8])> {
    if bytes.len() < 4 {
        return Err(format_error(
            bytes.len(),
            "file shorter than the 4-byte magic number",
        ));
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(format_error(
            0,
            "magic number must start with two zero bytes",
        ));
    }
    if bytes[2] != UNSIGNED_BYTE {
        return Err(format_error(
            2,
            format!("data type 0x{:02x} is not unsigned byte (0x08)", bytes[2]),
        ));
    }
    if bytes[3] != expected_dims {
        let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
        return Err(format_error(
            3,
            format!(
                "magic {magic} declares {} dimensions, expected {expected_dims}",
                bytes[3]
            ),
        ));
    }
    let header_len = 4 + 4 * expected_dims as usize;
    if bytes.len() < header_len {
        return Err(format_error(bytes.len(), "truncated dimension header"));
    }
    let mut dims = Vec::with_capacity(expected_dims as usize);
    let mut payload_len: usize = 1;
    for i in 0..expected_dims as usize {
        let at = 4 + 4 * i;
        let dim = u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes")) as usize;
        payload_len = payload_len
            .checked_mul(dim)
            .ok_or_else(|| format_error(at, "declared dimensions overflow the payload size"))?;
        dims.push(dim);
    }
    let expected_len = header_len
        .checked_add(payload_len)
        .ok_or_else(|| format_error(4, "declared dimensions overflow the payload size"))?;
    if bytes.len() < expected_len {
        return Err(format_error(
            bytes.len(),
            format!(
                "truncated payload: header declares {payload_len} bytes, file holds {}",
                bytes.len() - header_len
            ),
        ));
    }
    if bytes.len() > expected_len {
        return Err(format_error(
            expected_len,
            format!(
                "{} trailing bytes after the declared payload",
                bytes.len() - expected_len
            ),
        ));
    }
    Ok((dims, &bytes[header_len..]))
}

/// Parses an in-memory image file. Pixels are divided by 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(Matrix, ImageShape)> {
    let (dims, payload) = parse(bytes, 3)?;
    let (n, height, width) = (dims[0], dims[1], dims[2]);
    let d = height * width;
    let values = payload.iter().map(|&p| f64::from(p) / 255.0).collect();
    let shape = ImageShape {
        height,
        width,
        channels: 1,
    };
    Ok((Matrix::from_parts(n, d, values), shape))
}

/// Parses an in-memory label file.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let (_, payload) = parse(bytes, 1)?;
    Ok(payload.iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image file as an `n × (height·width)` matrix with entries in `[0, 1]`.
pub fn load_idx_images(path: impl AsRef<Path>) -> Result<(Matrix, ImageShape)> {
    parse_idx_images(&read_file(path.as_ref())?)
}

/// Loads a label file.
pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_idx_labels(&read_file(path.as_ref())?)
}

fn header(dims: &[usize]) -> Result<Vec<u8>> {
    let mut out = vec![0, 0, UNSIGNED_BYTE, dims.len() as u8];
    for &d in dims {
        let d = u32::try_from(d)
            .map_err(|_| Error::InvalidArgument(format!("dimension {d} does not fit in u32")))?;
        out.extend_from_slice(&d.to_be_bytes());
    }
    Ok(out)
}

/// Encodes images (entries in `[0, 1]`) as an IDX image file, rounding to bytes.
pub fn encode_idx_images(images: &Matrix, shape: ImageShape) -> Result<Vec<u8>> {
    if shape.channels != 1 || shape.len() != images.cols() {
        return Err(Error::InvalidArgument(format!(
            "image shape {shape:?} does not describe {} single-channel pixels",
            images.cols()
        )));
    }
    let mut out = header(&[images.rows(), shape.height, shape.width])?;
    out.extend(
        images
            .as_slice()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8),
    );
    Ok(out)
}

pub fn encode_idx_labels(labels: &[usize]) -> Result<Vec<u8>> {
    let mut out = header(&[labels.len()])?;
    for &l in labels {
        out.push(
            u8::try_from(l)
                .map_err(|_| Error::InvalidArgument(format!("label {l} exceeds 255")))?,
        );
    }
    Ok(out)
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &Matrix, shape: ImageShape) -> Result<()> {
    File::create(path)?.write_all(&encode_idx_images(images, shape)?)?;
    Ok(())
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[usize]) -> Result<()> {
    File::create(path)?.write_all(&encode_idx_labels(labels)?)?;
    Ok(())
}
