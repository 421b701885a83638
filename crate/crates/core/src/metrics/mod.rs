//! Fidelity metrics, rate-distortion curves and Bjøntegaard delta rate.

mod bdrate;
mod fidelity;
mod rd;

pub use bdrate::{bd_rate, integrate_log_rate, MonotoneCubic};
pub use fidelity::{format_score, mse, psnr, ssim, SSIM_WINDOW};
pub use rd::{
    append_rd_rows, emit_rd, ingest_scores, read_rd_csv, render_svg, write_bdrate_report, write_rd_csv, RdCurve,
    RdPoint, RD_HEADER,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("clip shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("SSIM needs frames of at least 11x11, got {width}x{height}")]
    TooSmall { width: usize, height: usize },
    #[error("curve {curve}: {reason}")]
    InvalidCurve { curve: String, reason: String },
    #[error("BD-rate needs at least 4 points per curve, {curve} has {points}")]
    InsufficientPoints { curve: String, points: usize },
    #[error("quality ranges of the two curves do not overlap")]
    EmptyOverlap,
    #[error("rd csv line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
