use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions must be at least 1x1, got {height}x{width}")]
    EmptyGrid { height: usize, width: usize },

    #[error("expected {expected} values for the grid, got {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("value out of range at index {index}: {value}")]
    ValueOutOfRange { index: usize, value: f64 },

    #[error("dimension mismatch: {left_h}x{left_w} vs {right_h}x{right_w}")]
    DimensionMismatch {
        left_h: usize,
        left_w: usize,
        right_h: usize,
        right_w: usize,
    },

    #[error("invalid box ({xmin}, {ymin}, {xmax}, {ymax}): require xmin < xmax and ymin < ymax")]
    InvalidBox { xmin: u32, ymin: u32, xmax: u32, ymax: u32 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("pixel ({x}, {y}) lies outside a {height}x{width} map")]
    PixelOutOfBounds {
        x: u32,
        y: u32,
        height: usize,
        width: usize,
    },

    #[error("sample set `{label}` needs at least 2 scores, got {found}")]
    NotEnoughSamples { label: String, found: usize },

    #[error("no images")]
    NoImages,

    #[error("duplicate image id `{0}`")]
    DuplicateImage(String),

    #[error("image id mismatch: `{0}` is not present in the ground truth")]
    IdMismatch(String),

    #[error("degenerate crop: {0}")]
    DegenerateCrop(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

/// Problems found while decoding one of the on-disk formats. Every variant
/// names the byte offset or the line where decoding stopped.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic at byte 0: expected \"SDPM\", found {found:?}")]
    BadMagic { found: String },

    #[error("unsupported format version {version} at byte 4")]
    UnsupportedVersion { version: u32 },

    #[error("truncated: {what} needs {expected} bytes at byte offset {offset}, found {found}")]
    Truncated {
        what: &'static str,
        offset: usize,
        expected: usize,
        found: usize,
    },

    #[error("dimension overflow at byte 8: {height}x{width}")]
    DimensionOverflow { height: u32, width: u32 },

    #[error("value out of range at index {index} (byte offset {offset}): {value}")]
    ValueOutOfRange { index: usize, offset: usize, value: f32 },

    #[error("{extra} trailing bytes after payload at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("mask image: {0}")]
    Mask(String),
}

impl FormatError {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        FormatError::Line {
            line,
            message: message.into(),
        }
    }
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
