//! Raw clip interchange file (`RVID`).
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "RVID" | version u8 = 1 | width u16 | height u16 | frame_count u32
//!        | fps_num u16 | fps_den u16 | frame_count * width*height*3 RGB bytes
//! ```

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::video::{Fps, Frame, VideoClip, VideoError};

pub const MAGIC: &[u8; 4] = b"RVID";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 17;

#[derive(Debug, Error)]
pub enum RvidError {
    #[error("bad magic, expected \"RVID\"")]
    BadMagic,
    #[error("unsupported RVID version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated RVID: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("{0} trailing bytes after last frame")]
    TrailingBytes(usize),
    #[error("{field} = {value} does not fit the RVID header")]
    FieldRange { field: &'static str, value: u64 },
    #[error(transparent)]
    Video(#[from] VideoError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn narrow_u16(field: &'static str, value: usize) -> Result<u16, RvidError> {
    u16::try_from(value).map_err(|_| RvidError::FieldRange {
        field,
        value: value as u64,
    })
}

pub fn to_bytes(clip: &VideoClip) -> Result<Vec<u8>, RvidError> {
    let width = narrow_u16("width", clip.width())?;
    let height = narrow_u16("height", clip.height())?;
    let count = u32::try_from(clip.frame_count()).map_err(|_| RvidError::FieldRange {
        field: "frame_count",
        value: clip.frame_count() as u64,
    })?;
    let fps_num = narrow_u16("fps_num", clip.fps().num as usize)?;
    let fps_den = narrow_u16("fps_den", clip.fps().den as usize)?;

    let mut out = Vec::with_capacity(HEADER_LEN + clip.frame_len() * clip.frame_count());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&fps_num.to_le_bytes());
    out.extend_from_slice(&fps_den.to_le_bytes());
    for frame in clip.frames() {
        out.extend_from_slice(frame.data());
    }
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<VideoClip, RvidError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(RvidError::BadMagic);
        }
        return Err(RvidError::Truncated {
            needed: HEADER_LEN,
            available: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(RvidError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(RvidError::UnsupportedVersion(bytes[4]));
    }
    let u16_at = |at: usize| u16::from_le_bytes([bytes[at], bytes[at + 1]]);
    let width = u16_at(5) as usize;
    let height = u16_at(7) as usize;
    let count = u32::from_le_bytes([bytes[9], bytes[10], bytes[11], bytes[12]]) as usize;
    let fps = Fps::new(u16_at(13) as u32, u16_at(15) as u32)?;
    if width == 0 || height == 0 {
        return Err(VideoError::InvalidDimensions { width, height }.into());
    }
    if count == 0 {
        return Err(VideoError::NoFrames.into());
    }

    let frame_len = width * height * 3;
    let needed = frame_len
        .checked_mul(count)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(RvidError::FieldRange {
            field: "frame_count",
            value: count as u64,
        })?;
    if bytes.len() < needed {
        return Err(RvidError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(RvidError::TrailingBytes(bytes.len() - needed));
    }
    let frames = bytes[HEADER_LEN..]
        .chunks_exact(frame_len)
        .map(|chunk| Frame::from_rgb(chunk.to_vec()))
        .collect();
    Ok(VideoClip::new(width, height, fps, frames)?)
}

pub fn read_file(path: impl AsRef<Path>) -> Result<VideoClip, RvidError> {
    from_bytes(&fs::read(path)?)
}

pub fn write_file(path: impl AsRef<Path>, clip: &VideoClip) -> Result<(), RvidError> {
    fs::write(path, to_bytes(clip)?)?;
    Ok(())
}
