use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VideoError {
    #[error("clip must contain at least one frame")]
    NoFrames,
    #[error("invalid dimensions {width}x{height}")]
    InvalidDimensions { width: usize, height: usize },
    #[error("invalid frame rate {num}/{den}")]
    InvalidFps { num: u32, den: u32 },
    #[error("frame {index} has {actual} bytes, expected {expected}")]
    FrameSize {
        index: usize,
        expected: usize,
        actual: usize,
    },
}

/// Rational frame rate, e.g. 30000/1001.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fps {
    pub num: u32,
    pub den: u32,
}

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self, VideoError> {
        if num == 0 || den == 0 {
            return Err(VideoError::InvalidFps { num, den });
        }
        Ok(Self { num, den })
    }

    pub const fn integer(num: u32) -> Self {
        Self { num, den: 1 }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl Default for Fps {
    fn default() -> Self {
        Self::integer(30)
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// One packed RGB24 picture, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    data: Vec<u8>,
}

impl Frame {
    pub fn from_rgb(data: Vec<u8>) -> Self {
        Self { data }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { data }
    }

    pub fn black(width: usize, height: usize) -> Self {
        Self {
            data: vec![0; width * height * 3],
        }
    }

    #[inline]
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }
}

impl fmt::Debug for Frame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Frame").field("len", &self.data.len()).finish()
    }
}

/// A decoded 8-bit RGB frame sequence.
///
/// All frames share `width x height`; a clip always holds at least one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    width: usize,
    height: usize,
    fps: Fps,
    frames: Vec<Frame>,
}

impl VideoClip {
    pub fn new(width: usize, height: usize, fps: Fps, frames: Vec<Frame>) -> Result<Self, VideoError> {
        if width == 0 || height == 0 {
            return Err(VideoError::InvalidDimensions { width, height });
        }
        if fps.num == 0 || fps.den == 0 {
            return Err(VideoError::InvalidFps {
                num: fps.num,
                den: fps.den,
            });
        }
        if frames.is_empty() {
            return Err(VideoError::NoFrames);
        }
        let expected = width * height * 3;
        for (index, frame) in frames.iter().enumerate() {
            if frame.data.len() != expected {
                return Err(VideoError::FrameSize {
                    index,
                    expected,
                    actual: frame.data.len(),
                });
            }
        }
        Ok(Self {
            width,
            height,
            fps,
            frames,
        })
    }

    /// Constructor for callers that already uphold the invariants.
    pub(crate) fn from_parts(width: usize, height: usize, fps: Fps, frames: Vec<Frame>) -> Self {
        debug_assert!(width > 0 && height > 0 && !frames.is_empty());
        debug_assert!(frames.iter().all(|f| f.data.len() == width * height * 3));
        Self {
            width,
            height,
            fps,
            frames,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn fps(&self) -> Fps {
        self.fps
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_len(&self) -> usize {
        self.width * self.height * 3
    }

    /// Total number of pixels over all frames (the BPP denominator).
    pub fn pixel_count(&self) -> u64 {
        self.width as u64 * self.height as u64 * self.frames.len() as u64
    }

    pub fn same_shape(&self, other: &VideoClip) -> bool {
        self.width == other.width && self.height == other.height && self.frames.len() == other.frames.len()
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }
}
