//! Lossless pose keypoint coding.
//!
//! Keypoints are rounded to 16-bit pixel coordinates, serialized into the
//! `DPOS` layout below and compressed as a standalone ("LZMA-alone") stream.
//!
//! ```text
//! "DPOS" | version u8 = 1 | width u16 | height u16 | frame_count u16 | keypoints_per_pose u8
//! per frame: pose_count u8, then pose_count * keypoints_per_pose * (x u16, y u16)
//! ```
//!
//! All integers are little-endian. Invisible keypoints are written as the
//! sentinel pair `(0xFFFF, 0xFFFF)`; confidence scores are not transmitted.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use xz2::stream::{Action, LzmaOptions, Status, Stream};

pub const MAGIC: &[u8; 4] = b"DPOS";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 12;
pub const INVISIBLE: u16 = 0xFFFF;
const LZMA_PRESET: u32 = 6;

#[derive(Debug, Error)]
pub enum PoseError {
    #[error("{field} = {value} exceeds its field range (max {max})")]
    FieldRange {
        field: &'static str,
        value: usize,
        max: usize,
    },
    #[error("frame {frame} pose {pose} has {actual} keypoints, expected {expected}")]
    KeypointCount {
        frame: usize,
        pose: usize,
        expected: usize,
        actual: usize,
    },
    #[error("frame {frame} pose {pose} keypoint {keypoint} ({x}, {y}) outside {width}x{height}")]
    OutOfBounds {
        frame: usize,
        pose: usize,
        keypoint: usize,
        x: u16,
        y: u16,
        width: usize,
        height: usize,
    },
    #[error("bad magic, expected \"DPOS\"")]
    BadMagic,
    #[error("unsupported DPOS version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated pose payload: {0}")]
    Truncated(&'static str),
    #[error("{0} trailing bytes after pose payload")]
    TrailingBytes(usize),
    #[error("lzma: {0}")]
    Lzma(String),
    #[error("pose json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Keypoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y, visible: true }
    }

    pub const fn hidden() -> Self {
        Self {
            x: 0.0,
            y: 0.0,
            visible: false,
        }
    }
}

pub type Pose = Vec<Keypoint>;

/// Per-frame, per-person 2D keypoints in pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSequence {
    pub width: usize,
    pub height: usize,
    pub keypoints_per_pose: usize,
    pub frames: Vec<Vec<Pose>>,
}

impl PoseSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }
}

/// A quantized keypoint: pixel coordinates, or the invisible sentinel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QPoint {
    pub x: u16,
    pub y: u16,
}

impl QPoint {
    pub const INVISIBLE: QPoint = QPoint {
        x: INVISIBLE,
        y: INVISIBLE,
    };

    pub fn is_visible(self) -> bool {
        self != Self::INVISIBLE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuantizedPoseSequence {
    pub width: usize,
    pub height: usize,
    pub keypoints_per_pose: usize,
    pub frames: Vec<Vec<Vec<QPoint>>>,
}

impl QuantizedPoseSequence {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    /// Size of the `DPOS` serialization before compression.
    pub fn serialized_len(&self) -> usize {
        HEADER_LEN
            + self
                .frames
                .iter()
                .map(|poses| 1 + poses.len() * self.keypoints_per_pose * 4)
                .sum::<usize>()
    }

    /// Checks every field against the `DPOS` ranges and the keypoint bounds.
    pub fn validate(&self) -> Result<(), PoseError> {
        let range = |field, value: usize, max: usize| {
            if value > max {
                Err(PoseError::FieldRange { field, value, max })
            } else {
                Ok(())
            }
        };
        range("width", self.width, u16::MAX as usize)?;
        range("height", self.height, u16::MAX as usize)?;
        range("frame_count", self.frames.len(), u16::MAX as usize)?;
        range("keypoints_per_pose", self.keypoints_per_pose, u8::MAX as usize)?;
        if self.width == 0 || self.height == 0 || self.keypoints_per_pose == 0 {
            return Err(PoseError::FieldRange {
                field: "dimensions/keypoints_per_pose (zero)",
                value: 0,
                max: 0,
            });
        }
        for (f, poses) in self.frames.iter().enumerate() {
            range("pose_count", poses.len(), u8::MAX as usize)?;
            for (p, pose) in poses.iter().enumerate() {
                if pose.len() != self.keypoints_per_pose {
                    return Err(PoseError::KeypointCount {
                        frame: f,
                        pose: p,
                        expected: self.keypoints_per_pose,
                        actual: pose.len(),
                    });
                }
                for (k, pt) in pose.iter().enumerate() {
                    if pt.is_visible() && (pt.x as usize >= self.width || pt.y as usize >= self.height) {
                        return Err(PoseError::OutOfBounds {
                            frame: f,
                            pose: p,
                            keypoint: k,
                            x: pt.x,
                            y: pt.y,
                            width: self.width,
                            height: self.height,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn quantize_coord(v: f64, limit: usize) -> u16 {
    // NaN saturates to 0 in the cast.
    let max = limit.saturating_sub(1).min(INVISIBLE as usize - 1) as f64;
    v.round().clamp(0.0, max) as u16
}

/// Rounds each visible coordinate to the nearest pixel and clamps it into the frame.
pub fn quantize_pose(seq: &PoseSequence) -> QuantizedPoseSequence {
    let frames = seq
        .frames
        .iter()
        .map(|poses| {
            poses
                .iter()
                .map(|pose| {
                    pose.iter()
                        .map(|kp| {
                            if kp.visible {
                                QPoint {
                                    x: quantize_coord(kp.x, seq.width),
                                    y: quantize_coord(kp.y, seq.height),
                                }
                            } else {
                                QPoint::INVISIBLE
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    QuantizedPoseSequence {
        width: seq.width,
        height: seq.height,
        keypoints_per_pose: seq.keypoints_per_pose,
        frames,
    }
}

impl From<&QuantizedPoseSequence> for PoseSequence {
    fn from(q: &QuantizedPoseSequence) -> Self {
        let frames = q
            .frames
            .iter()
            .map(|poses| {
                poses
                    .iter()
                    .map(|pose| {
                        pose.iter()
                            .map(|pt| {
                                if pt.is_visible() {
                                    Keypoint::new(pt.x as f64, pt.y as f64)
                                } else {
                                    Keypoint::hidden()
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        PoseSequence {
            width: q.width,
            height: q.height,
            keypoints_per_pose: q.keypoints_per_pose,
            frames,
        }
    }
}

/// The uncompressed `DPOS` serialization.
pub fn serialize_pose(seq: &QuantizedPoseSequence) -> Result<Vec<u8>, PoseError> {
    seq.validate()?;
    let mut out = Vec::with_capacity(seq.serialized_len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(seq.width as u16).to_le_bytes());
    out.extend_from_slice(&(seq.height as u16).to_le_bytes());
    out.extend_from_slice(&(seq.frames.len() as u16).to_le_bytes());
    out.push(seq.keypoints_per_pose as u8);
    for poses in &seq.frames {
        out.push(poses.len() as u8);
        for pt in poses.iter().flatten() {
            out.extend_from_slice(&pt.x.to_le_bytes());
            out.extend_from_slice(&pt.y.to_le_bytes());
        }
    }
    debug_assert_eq!(out.len(), seq.serialized_len());
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], PoseError> {
        if self.buf.len() - self.pos < n {
            return Err(PoseError::Truncated(what));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &'static str) -> Result<u8, PoseError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &'static str) -> Result<u16, PoseError> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }
}

/// Parses an uncompressed `DPOS` buffer.
pub fn deserialize_pose(buf: &[u8]) -> Result<QuantizedPoseSequence, PoseError> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(PoseError::BadMagic);
    }
    let version = r.u8("version")?;
    if version != VERSION {
        return Err(PoseError::UnsupportedVersion(version));
    }
    let width = r.u16("width")? as usize;
    let height = r.u16("height")? as usize;
    let frame_count = r.u16("frame_count")? as usize;
    let kpp = r.u8("keypoints_per_pose")? as usize;
    let mut frames = Vec::with_capacity(frame_count.min(buf.len()));
    for _ in 0..frame_count {
        let pose_count = r.u8("pose_count")? as usize;
        let mut poses = Vec::with_capacity(pose_count);
        for _ in 0..pose_count {
            let mut pose = Vec::with_capacity(kpp);
            for _ in 0..kpp {
                let x = r.u16("keypoint")?;
                let y = r.u16("keypoint")?;
                pose.push(QPoint { x, y });
            }
            poses.push(pose);
        }
        frames.push(poses);
    }
    if r.pos != buf.len() {
        return Err(PoseError::TrailingBytes(buf.len() - r.pos));
    }
    let seq = QuantizedPoseSequence {
        width,
        height,
        keypoints_per_pose: kpp,
        frames,
    };
    seq.validate()?;
    Ok(seq)
}

fn lzma_err(e: xz2::stream::Error) -> PoseError {
    PoseError::Lzma(e.to_string())
}

pub(crate) fn lzma_alone_compress(raw: &[u8]) -> Vec<u8> {
    let opts = LzmaOptions::new_preset(LZMA_PRESET).expect("valid lzma preset");
    let mut stream = Stream::new_lzma_encoder(&opts).expect("lzma encoder init");
    let mut out = Vec::with_capacity(raw.len() / 2 + 64);
    loop {
        if out.len() == out.capacity() {
            out.reserve(out.capacity().max(64));
        }
        let consumed = stream.total_in() as usize;
        let status = stream
            .process_vec(&raw[consumed..], &mut out, Action::Finish)
            .expect("lzma encode of in-memory buffer");
        if status == Status::StreamEnd {
            return out;
        }
    }
}

pub(crate) fn lzma_alone_decompress(bits: &[u8]) -> Result<Vec<u8>, PoseError> {
    let mut stream = Stream::new_lzma_decoder(u64::MAX).map_err(lzma_err)?;
    let mut out = Vec::with_capacity(bits.len().saturating_mul(4).max(256));
    loop {
        if out.len() == out.capacity() {
            out.reserve(out.capacity());
        }
        let consumed = stream.total_in() as usize;
        let produced = stream.total_out();
        let status = stream
            .process_vec(&bits[consumed..], &mut out, Action::Run)
            .map_err(lzma_err)?;
        if status == Status::StreamEnd {
            break;
        }
        let stalled = stream.total_in() as usize == consumed && stream.total_out() == produced;
        if stalled && out.len() < out.capacity() {
            return Err(PoseError::Truncated("lzma stream"));
        }
    }
    let used = stream.total_in() as usize;
    if used != bits.len() {
        return Err(PoseError::TrailingBytes(bits.len() - used));
    }
    Ok(out)
}

pub fn encode_pose(seq: &QuantizedPoseSequence) -> Result<Vec<u8>, PoseError> {
    Ok(lzma_alone_compress(&serialize_pose(seq)?))
}

pub fn decode_pose(bits: &[u8]) -> Result<QuantizedPoseSequence, PoseError> {
    deserialize_pose(&lzma_alone_decompress(bits)?)
}

// OpenPose-style JSON: keypoints flattened as [x0, y0, c0, x1, y1, c1, ...]
// with c > 0 meaning visible.

#[derive(Serialize, Deserialize)]
struct JsonPerson {
    pose_keypoints_2d: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct JsonFrame {
    people: Vec<JsonPerson>,
}

#[derive(Serialize, Deserialize)]
struct JsonSequence {
    width: usize,
    height: usize,
    keypoints_per_pose: usize,
    frames: Vec<JsonFrame>,
}

impl PoseSequence {
    pub fn from_json(text: &str) -> Result<Self, PoseError> {
        let js: JsonSequence = serde_json::from_str(text).map_err(|e| PoseError::Json(e.to_string()))?;
        let k = js.keypoints_per_pose;
        let mut frames = Vec::with_capacity(js.frames.len());
        for (f, frame) in js.frames.into_iter().enumerate() {
            let mut poses = Vec::with_capacity(frame.people.len());
            for (p, person) in frame.people.into_iter().enumerate() {
                let flat = person.pose_keypoints_2d;
                if flat.len() != k * 3 {
                    return Err(PoseError::KeypointCount {
                        frame: f,
                        pose: p,
                        expected: k,
                        actual: flat.len() / 3,
                    });
                }
                poses.push(
                    flat.chunks_exact(3)
                        .map(|c| Keypoint {
                            x: c[0],
                            y: c[1],
                            visible: c[2] > 0.0,
                        })
                        .collect(),
                );
            }
            frames.push(poses);
        }
        Ok(PoseSequence {
            width: js.width,
            height: js.height,
            keypoints_per_pose: k,
            frames,
        })
    }

    pub fn to_json(&self) -> String {
        let frames = self
            .frames
            .iter()
            .map(|poses| JsonFrame {
                people: poses
                    .iter()
                    .map(|pose| JsonPerson {
                        pose_keypoints_2d: pose
                            .iter()
                            .flat_map(|kp| if kp.visible { [kp.x, kp.y, 1.0] } else { [0.0, 0.0, 0.0] })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        let js = JsonSequence {
            width: self.width,
            height: self.height,
            keypoints_per_pose: self.keypoints_per_pose,
            frames,
        };
        serde_json::to_string_pretty(&js).expect("pose json serialization")
    }
}
