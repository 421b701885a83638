//! `DSC0` multimodal container and bit accounting.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "DSC0"
//!      4     1  version = 1
//!      5     2  width
//!      7     2  height
//!      9     2  frame_count
//!     11     2  fps_num
//!     13     2  fps_den
//!     15     1  Ds
//!     16     1  Dt
//!     17     1  fill_mode (0 none, 1 zero, 2 forward)
//!     18     1  interleave ratio r
//!     19     2  qp (i16)
//!     21     1  stream_count
//!     22        per stream: id u8, payload_len u32, payload
//!   end-4     4  CRC-32 (IEEE) over every non-payload byte above, in order
//! ```
//!
//! The trailer covers metadata and stream framing only; payloads carry their
//! own integrity checks where the codec has them.

use std::fmt;

use thiserror::Error;

use crate::scaffold::FillMode;
use crate::video::Fps;

pub const MAGIC: &[u8; 4] = b"DSC0";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 22;
pub const STREAM_HEADER_LEN: usize = 5;
pub const TRAILER_LEN: usize = 4;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("bad magic, expected \"DSC0\"")]
    BadMagic,
    #[error("unsupported container version {0}")]
    UnsupportedVersion(u8),
    #[error("truncated container: {0}")]
    Truncated(&'static str),
    #[error("stream {index} declares {declared} payload bytes but only {available} remain")]
    PayloadOverrun {
        index: usize,
        declared: usize,
        available: usize,
    },
    #[error("{0} trailing bytes after container")]
    TrailingBytes(usize),
    #[error("header checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("unknown modality id {0}")]
    InvalidModality(u8),
    #[error("duplicate {0} stream")]
    DuplicateModality(ModalityId),
    #[error("container has no video stream")]
    MissingVideo,
    #[error("invalid {field}: {value}")]
    InvalidField { field: &'static str, value: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModalityId {
    Text = 0,
    Video = 1,
    Sketch = 2,
    Pose = 3,
}

impl ModalityId {
    pub const ALL: [ModalityId; 4] = [
        ModalityId::Text,
        ModalityId::Video,
        ModalityId::Sketch,
        ModalityId::Pose,
    ];

    pub fn from_u8(v: u8) -> Option<Self> {
        Self::ALL.get(v as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ModalityId::Text => "text",
            ModalityId::Video => "video",
            ModalityId::Sketch => "sketch",
            ModalityId::Pose => "pose",
        }
    }
}

impl fmt::Display for ModalityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModalityStream {
    pub id: ModalityId,
    pub payload: Vec<u8>,
}

impl ModalityStream {
    pub fn new(id: ModalityId, payload: Vec<u8>) -> Self {
        Self { id, payload }
    }
}

/// Global metadata of a coded clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerMeta {
    pub width: u16,
    pub height: u16,
    pub frame_count: u16,
    pub fps: Fps,
    pub spatial_factor: u8,
    pub temporal_factor: u8,
    pub fill_mode: FillMode,
    pub ratio: u8,
    pub qp: i16,
}

impl ContainerMeta {
    fn validate(&self) -> Result<(), ContainerError> {
        let positive = [
            ("width", self.width as i64),
            ("height", self.height as i64),
            ("frame_count", self.frame_count as i64),
            ("Ds", self.spatial_factor as i64),
            ("Dt", self.temporal_factor as i64),
        ];
        for (field, value) in positive {
            if value == 0 {
                return Err(ContainerError::InvalidField { field, value });
            }
        }
        for (field, value) in [("fps_num", self.fps.num), ("fps_den", self.fps.den)] {
            if value == 0 || value > u16::MAX as u32 {
                return Err(ContainerError::InvalidField {
                    field,
                    value: value as i64,
                });
            }
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64 * self.frame_count as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Container {
    pub meta: ContainerMeta,
    pub streams: Vec<ModalityStream>,
}

impl Container {
    pub fn stream(&self, id: ModalityId) -> Option<&ModalityStream> {
        self.streams.iter().find(|s| s.id == id)
    }

    pub fn validate(&self) -> Result<(), ContainerError> {
        self.meta.validate()?;
        if self.streams.len() > u8::MAX as usize {
            return Err(ContainerError::InvalidField {
                field: "stream_count",
                value: self.streams.len() as i64,
            });
        }
        let mut seen = [false; 4];
        for s in &self.streams {
            if std::mem::replace(&mut seen[s.id as usize], true) {
                return Err(ContainerError::DuplicateModality(s.id));
            }
            if s.payload.len() > u32::MAX as usize {
                return Err(ContainerError::InvalidField {
                    field: "payload_len",
                    value: s.payload.len() as i64,
                });
            }
        }
        if !seen[ModalityId::Video as usize] {
            return Err(ContainerError::MissingVideo);
        }
        Ok(())
    }

    /// Exact size of the muxed container in bytes.
    pub fn byte_len(&self) -> usize {
        container_len(self.streams.iter().map(|s| s.payload.len()))
    }
}

/// `HEADER_LEN + sum(STREAM_HEADER_LEN + len) + TRAILER_LEN`.
pub fn container_len(payload_lens: impl IntoIterator<Item = usize>) -> usize {
    HEADER_LEN + payload_lens.into_iter().map(|l| STREAM_HEADER_LEN + l).sum::<usize>() + TRAILER_LEN
}

fn header_bytes(meta: &ContainerMeta, stream_count: u8) -> [u8; HEADER_LEN] {
    let mut h = [0u8; HEADER_LEN];
    h[..4].copy_from_slice(MAGIC);
    h[4] = VERSION;
    h[5..7].copy_from_slice(&meta.width.to_le_bytes());
    h[7..9].copy_from_slice(&meta.height.to_le_bytes());
    h[9..11].copy_from_slice(&meta.frame_count.to_le_bytes());
    h[11..13].copy_from_slice(&(meta.fps.num as u16).to_le_bytes());
    h[13..15].copy_from_slice(&(meta.fps.den as u16).to_le_bytes());
    h[15] = meta.spatial_factor;
    h[16] = meta.temporal_factor;
    h[17] = meta.fill_mode.code();
    h[18] = meta.ratio;
    h[19..21].copy_from_slice(&meta.qp.to_le_bytes());
    h[21] = stream_count;
    h
}

pub fn mux(container: &Container) -> Result<Vec<u8>, ContainerError> {
    container.validate()?;
    let mut out = Vec::with_capacity(container.byte_len());
    let mut crc = crc32fast::Hasher::new();
    let header = header_bytes(&container.meta, container.streams.len() as u8);
    crc.update(&header);
    out.extend_from_slice(&header);
    for s in &container.streams {
        let mut framing = [0u8; STREAM_HEADER_LEN];
        framing[0] = s.id as u8;
        framing[1..].copy_from_slice(&(s.payload.len() as u32).to_le_bytes());
        crc.update(&framing);
        out.extend_from_slice(&framing);
        out.extend_from_slice(&s.payload);
    }
    out.extend_from_slice(&crc.finalize().to_le_bytes());
    debug_assert_eq!(out.len(), container.byte_len());
    Ok(out)
}

pub fn demux(bits: &[u8]) -> Result<Container, ContainerError> {
    if bits.len() >= 4 && &bits[..4] != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    if bits.len() < HEADER_LEN {
        return Err(ContainerError::Truncated("header"));
    }
    if bits[4] != VERSION {
        return Err(ContainerError::UnsupportedVersion(bits[4]));
    }
    let u16_at = |at: usize| u16::from_le_bytes([bits[at], bits[at + 1]]);
    let stream_count = bits[21] as usize;

    let mut crc = crc32fast::Hasher::new();
    crc.update(&bits[..HEADER_LEN]);
    let mut pos = HEADER_LEN;
    let mut raw_streams = Vec::with_capacity(stream_count);
    for index in 0..stream_count {
        if bits.len() - pos < STREAM_HEADER_LEN {
            return Err(ContainerError::Truncated("stream header"));
        }
        let framing = &bits[pos..pos + STREAM_HEADER_LEN];
        crc.update(framing);
        let id = framing[0];
        let declared = u32::from_le_bytes([framing[1], framing[2], framing[3], framing[4]]) as usize;
        pos += STREAM_HEADER_LEN;
        let available = bits.len() - pos;
        if declared > available {
            return Err(ContainerError::PayloadOverrun {
                index,
                declared,
                available,
            });
        }
        raw_streams.push((id, &bits[pos..pos + declared]));
        pos += declared;
    }
    let rest = bits.len() - pos;
    if rest < TRAILER_LEN {
        return Err(ContainerError::Truncated("checksum trailer"));
    }
    if rest > TRAILER_LEN {
        return Err(ContainerError::TrailingBytes(rest - TRAILER_LEN));
    }
    let stored = u32::from_le_bytes([bits[pos], bits[pos + 1], bits[pos + 2], bits[pos + 3]]);
    let computed = crc.finalize();
    if stored != computed {
        return Err(ContainerError::ChecksumMismatch { stored, computed });
    }

    let fill_mode = FillMode::from_code(bits[17]).ok_or(ContainerError::InvalidField {
        field: "fill_mode",
        value: bits[17] as i64,
    })?;
    let meta = ContainerMeta {
        width: u16_at(5),
        height: u16_at(7),
        frame_count: u16_at(9),
        fps: Fps {
            num: u16_at(11) as u32,
            den: u16_at(13) as u32,
        },
        spatial_factor: bits[15],
        temporal_factor: bits[16],
        fill_mode,
        ratio: bits[18],
        qp: i16::from_le_bytes([bits[19], bits[20]]),
    };
    let streams = raw_streams
        .into_iter()
        .map(|(id, payload)| {
            let id = ModalityId::from_u8(id).ok_or(ContainerError::InvalidModality(id))?;
            Ok(ModalityStream::new(id, payload.to_vec()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let container = Container { meta, streams };
    container.validate()?;
    Ok(container)
}

/// Bits per pixel over the whole clip.
pub fn bpp(total_bits: u64, width: usize, height: usize, frame_count: usize) -> f64 {
    total_bits as f64 / (width as f64 * height as f64 * frame_count as f64)
}

/// Average bitrate in kbit/s of `total_bits` spread over `frame_count` frames at `fps`.
pub fn bitrate_kbps(total_bits: u64, frame_count: usize, fps: Fps) -> f64 {
    total_bits as f64 * fps.num as f64 / (fps.den as f64 * frame_count as f64) / 1000.0
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Breakdown {
    /// Fixed header, per-stream framing and checksum trailer.
    pub header_bits: u64,
    pub streams: Vec<(ModalityId, u64)>,
    pub total_bits: u64,
}

impl Breakdown {
    pub fn payload_bits(&self) -> u64 {
        self.streams.iter().map(|(_, b)| b).sum()
    }

    pub fn bits_for(&self, id: ModalityId) -> Option<u64> {
        self.streams.iter().find(|(m, _)| *m == id).map(|(_, b)| *b)
    }

    /// Rate figure used for reporting; `include_framing = false` counts payloads only.
    pub fn rate_bits(&self, include_framing: bool) -> u64 {
        if include_framing {
            self.total_bits
        } else {
            self.payload_bits()
        }
    }
}

pub fn breakdown(container: &Container) -> Breakdown {
    let streams: Vec<(ModalityId, u64)> = container
        .streams
        .iter()
        .map(|s| (s.id, 8 * s.payload.len() as u64))
        .collect();
    let header_bits = 8 * (HEADER_LEN + STREAM_HEADER_LEN * container.streams.len() + TRAILER_LEN) as u64;
    Breakdown {
        header_bits,
        total_bits: header_bits + streams.iter().map(|(_, b)| b).sum::<u64>(),
        streams,
    }
}
