//! Spatiotemporal degradation of the source clip and receiver-side restoration.
//!
//! The sender keeps one frame out of every `Dt` (always starting at frame 0)
//! and bilinearly shrinks each kept frame by `Ds`. The receiver upsamples back
//! to the original size and refills the dropped positions, by default with a
//! copy of the most recent kept frame (forward filling).

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::video::{Frame, VideoClip};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScaffoldError {
    #[error("{name} must be >= 1")]
    InvalidFactor { name: &'static str },
    #[error("target dimensions {width}x{height} are degenerate")]
    DegenerateDims { width: usize, height: usize },
    #[error("sampled clip has {actual} frames, expected ceil({original}/{dt}) = {expected}")]
    FillCountMismatch {
        original: usize,
        dt: usize,
        expected: usize,
        actual: usize,
    },
    #[error("restoration info inconsistent with degraded clip: {0}")]
    InconsistentInfo(String),
    #[error("unknown fill mode {0:?}")]
    UnknownFillMode(String),
}

/// How dropped frame positions are restored.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum FillMode {
    /// Keep only the retained frames.
    None,
    /// Black frames at dropped positions.
    Zero,
    /// Repeat the most recent retained frame.
    #[default]
    Forward,
}

impl FillMode {
    pub const fn code(self) -> u8 {
        match self {
            FillMode::None => 0,
            FillMode::Zero => 1,
            FillMode::Forward => 2,
        }
    }

    pub const fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FillMode::None),
            1 => Some(FillMode::Zero),
            2 => Some(FillMode::Forward),
            _ => None,
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            FillMode::None => "none",
            FillMode::Zero => "zero",
            FillMode::Forward => "forward",
        }
    }
}

impl fmt::Display for FillMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FillMode {
    type Err = ScaffoldError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(FillMode::None),
            "zero" => Ok(FillMode::Zero),
            "forward" => Ok(FillMode::Forward),
            _ => Err(ScaffoldError::UnknownFillMode(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DegradationParams {
    pub spatial_factor: usize,
    pub temporal_factor: usize,
    pub fill_mode: FillMode,
}

impl DegradationParams {
    pub fn new(spatial_factor: usize, temporal_factor: usize, fill_mode: FillMode) -> Result<Self, ScaffoldError> {
        let params = Self {
            spatial_factor,
            temporal_factor,
            fill_mode,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), ScaffoldError> {
        if self.spatial_factor == 0 {
            return Err(ScaffoldError::InvalidFactor { name: "spatial_factor" });
        }
        if self.temporal_factor == 0 {
            return Err(ScaffoldError::InvalidFactor {
                name: "temporal_factor",
            });
        }
        Ok(())
    }

    /// Scaffold dimensions for a `width x height` source: `round(dim / Ds)`.
    pub fn target_dims(&self, width: usize, height: usize) -> (usize, usize) {
        (
            div_round(width, self.spatial_factor),
            div_round(height, self.spatial_factor),
        )
    }
}

impl Default for DegradationParams {
    fn default() -> Self {
        Self {
            spatial_factor: 1,
            temporal_factor: 2,
            fill_mode: FillMode::Forward,
        }
    }
}

/// Everything the receiver needs to undo [`degrade`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RestorationInfo {
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub spatial_factor: usize,
    pub temporal_factor: usize,
    pub fill_mode: FillMode,
}

impl RestorationInfo {
    pub fn retained_frames(&self) -> usize {
        retained_count(self.frame_count, self.temporal_factor)
    }
}

fn div_round(n: usize, d: usize) -> usize {
    (2 * n + d) / (2 * d)
}

/// Number of frames kept by [`temporal_subsample`]: `ceil(n / dt)`.
pub fn retained_count(n: usize, dt: usize) -> usize {
    n.div_ceil(dt)
}

/// Keeps the frames at source indices `i` with `i % dt == 0`.
pub fn temporal_subsample(clip: &VideoClip, dt: usize) -> Result<VideoClip, ScaffoldError> {
    if dt == 0 {
        return Err(ScaffoldError::InvalidFactor {
            name: "temporal_factor",
        });
    }
    let frames = clip.frames().iter().step_by(dt).cloned().collect();
    Ok(VideoClip::from_parts(clip.width(), clip.height(), clip.fps(), frames))
}

/// Per-axis sampling taps: lower source index, upper source index, upper weight.
fn axis_taps(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    let max = (src - 1) as f64;
    (0..dst)
        .map(|x| {
            let s = ((x as f64 + 0.5) * scale - 0.5).clamp(0.0, max);
            let lo = s.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, s - lo as f64)
        })
        .collect()
}

fn resample_frame(src: &[u8], src_w: usize, xs: &[(usize, usize, f64)], ys: &[(usize, usize, f64)]) -> Frame {
    let dst_w = xs.len();
    let mut out = vec![0u8; dst_w * ys.len() * 3];
    for (y, &(y0, y1, fy)) in ys.iter().enumerate() {
        let row0 = &src[y0 * src_w * 3..(y0 + 1) * src_w * 3];
        let row1 = &src[y1 * src_w * 3..(y1 + 1) * src_w * 3];
        let dst_row = &mut out[y * dst_w * 3..(y + 1) * dst_w * 3];
        for (x, &(x0, x1, fx)) in xs.iter().enumerate() {
            for c in 0..3 {
                let p00 = row0[x0 * 3 + c] as f64;
                let p01 = row0[x1 * 3 + c] as f64;
                let p10 = row1[x0 * 3 + c] as f64;
                let p11 = row1[x1 * 3 + c] as f64;
                let top = p00 + (p01 - p00) * fx;
                let bottom = p10 + (p11 - p10) * fx;
                let v = top + (bottom - top) * fy;
                dst_row[x * 3 + c] = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Frame::from_rgb(out)
}

/// Bilinear resize of every frame with half-pixel-centre coordinate mapping.
///
/// No anti-aliasing pre-filter is applied. Resampling to the source size is
/// the identity.
pub fn spatial_resample(
    clip: &VideoClip,
    target_width: usize,
    target_height: usize,
) -> Result<VideoClip, ScaffoldError> {
    if target_width == 0 || target_height == 0 {
        return Err(ScaffoldError::DegenerateDims {
            width: target_width,
            height: target_height,
        });
    }
    if target_width == clip.width() && target_height == clip.height() {
        return Ok(clip.clone());
    }
    let xs = axis_taps(clip.width(), target_width);
    let ys = axis_taps(clip.height(), target_height);
    let frames: Vec<Frame> = clip
        .frames()
        .par_iter()
        .map(|f| resample_frame(f.data(), clip.width(), &xs, &ys))
        .collect();
    Ok(VideoClip::from_parts(target_width, target_height, clip.fps(), frames))
}

/// Re-expands a temporally subsampled clip to `original_count` frames.
pub fn temporal_fill(
    sampled: &VideoClip,
    original_count: usize,
    dt: usize,
    mode: FillMode,
) -> Result<VideoClip, ScaffoldError> {
    if dt == 0 {
        return Err(ScaffoldError::InvalidFactor {
            name: "temporal_factor",
        });
    }
    if original_count == 0 {
        return Err(ScaffoldError::InvalidFactor { name: "original_count" });
    }
    let expected = retained_count(original_count, dt);
    if sampled.frame_count() != expected {
        return Err(ScaffoldError::FillCountMismatch {
            original: original_count,
            dt,
            expected,
            actual: sampled.frame_count(),
        });
    }
    let src = sampled.frames();
    let frames = match mode {
        FillMode::None => return Ok(sampled.clone()),
        FillMode::Forward => (0..original_count).map(|i| src[i / dt].clone()).collect(),
        FillMode::Zero => {
            let black = Frame::black(sampled.width(), sampled.height());
            (0..original_count)
                .map(|i| {
                    if i % dt == 0 {
                        src[i / dt].clone()
                    } else {
                        black.clone()
                    }
                })
                .collect()
        }
    };
    Ok(VideoClip::from_parts(
        sampled.width(),
        sampled.height(),
        sampled.fps(),
        frames,
    ))
}

/// Sender side: temporal subsampling followed by spatial downsampling.
pub fn degrade(clip: &VideoClip, params: &DegradationParams) -> Result<(VideoClip, RestorationInfo), ScaffoldError> {
    params.validate()?;
    let (tw, th) = params.target_dims(clip.width(), clip.height());
    if tw == 0 || th == 0 {
        return Err(ScaffoldError::DegenerateDims { width: tw, height: th });
    }
    let kept = temporal_subsample(clip, params.temporal_factor)?;
    let scaffold = spatial_resample(&kept, tw, th)?;
    let info = RestorationInfo {
        width: clip.width(),
        height: clip.height(),
        frame_count: clip.frame_count(),
        spatial_factor: params.spatial_factor,
        temporal_factor: params.temporal_factor,
        fill_mode: params.fill_mode,
    };
    Ok((scaffold, info))
}

/// Receiver side: upsample to the original size, then refill dropped frames.
pub fn restore_scaffold(degraded: &VideoClip, info: &RestorationInfo) -> Result<VideoClip, ScaffoldError> {
    if info.spatial_factor == 0 {
        return Err(ScaffoldError::InvalidFactor { name: "spatial_factor" });
    }
    if info.temporal_factor == 0 {
        return Err(ScaffoldError::InvalidFactor {
            name: "temporal_factor",
        });
    }
    let expected_dims = (
        div_round(info.width, info.spatial_factor),
        div_round(info.height, info.spatial_factor),
    );
    if (degraded.width(), degraded.height()) != expected_dims {
        return Err(ScaffoldError::InconsistentInfo(format!(
            "scaffold is {}x{}, expected {}x{} for {}x{} / Ds={}",
            degraded.width(),
            degraded.height(),
            expected_dims.0,
            expected_dims.1,
            info.width,
            info.height,
            info.spatial_factor
        )));
    }
    if degraded.frame_count() != info.retained_frames() {
        return Err(ScaffoldError::InconsistentInfo(format!(
            "scaffold has {} frames, expected {} for {} frames / Dt={}",
            degraded.frame_count(),
            info.retained_frames(),
            info.frame_count,
            info.temporal_factor
        )));
    }
    let upsampled = spatial_resample(degraded, info.width, info.height)?;
    temporal_fill(&upsampled, info.frame_count, info.temporal_factor, info.fill_mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::Fps;

    fn tagged_clip(n: usize, w: usize, h: usize) -> VideoClip {
        let frames = (0..n)
            .map(|i| Frame::from_rgb((0..w * h * 3).map(|j| ((i * 7 + j) % 251) as u8).collect()))
            .collect();
        VideoClip::new(w, h, Fps::integer(30), frames).unwrap()
    }

    #[test]
    fn subsample_fig3_case() {
        let clip = tagged_clip(4, 2, 2);
        let kept = temporal_subsample(&clip, 2).unwrap();
        assert_eq!(kept.frames(), &[clip.frames()[0].clone(), clip.frames()[2].clone()]);
        assert_eq!(kept.fps(), clip.fps());
    }

    #[test]
    fn subsample_identity_and_large_factor() {
        let clip = tagged_clip(5, 2, 2);
        assert_eq!(temporal_subsample(&clip, 1).unwrap(), clip);
        let one = temporal_subsample(&clip, 9).unwrap();
        assert_eq!(one.frames(), &clip.frames()[..1]);
    }

    #[test]
    fn subsample_57_by_8() {
        let clip = tagged_clip(57, 1, 1);
        let kept = temporal_subsample(&clip, 8).unwrap();
        assert_eq!(kept.frame_count(), 8);
        for (k, f) in kept.frames().iter().enumerate() {
            assert_eq!(f, &clip.frames()[k * 8]);
        }
    }

    #[test]
    fn fill_modes() {
        let clip = tagged_clip(4, 2, 2);
        let kept = temporal_subsample(&clip, 2).unwrap();
        let f = clip.frames();
        let fwd = temporal_fill(&kept, 4, 2, FillMode::Forward).unwrap();
        assert_eq!(fwd.frames(), &[f[0].clone(), f[0].clone(), f[2].clone(), f[2].clone()]);
        let zero = temporal_fill(&kept, 4, 2, FillMode::Zero).unwrap();
        let black = Frame::black(2, 2);
        assert_eq!(zero.frames(), &[f[0].clone(), black.clone(), f[2].clone(), black]);
        assert_eq!(temporal_fill(&kept, 4, 2, FillMode::None).unwrap(), kept);
        assert_eq!(temporal_fill(&clip, 4, 1, FillMode::Forward).unwrap(), clip);
    }

    #[test]
    fn fill_rejects_count_mismatch() {
        let clip = tagged_clip(3, 1, 1);
        let err = temporal_fill(&clip, 4, 2, FillMode::Forward).unwrap_err();
        assert_eq!(
            err,
            ScaffoldError::FillCountMismatch {
                original: 4,
                dt: 2,
                expected: 2,
                actual: 3
            }
        );
    }

    #[test]
    fn resample_constant_and_identity() {
        let clip = VideoClip::new(7, 5, Fps::default(), vec![Frame::filled(7, 5, [12, 200, 99])]).unwrap();
        for (w, h) in [(3, 2), (14, 10), (1, 1), (20, 3)] {
            let out = spatial_resample(&clip, w, h).unwrap();
            assert_eq!(out.frames()[0], Frame::filled(w, h, [12, 200, 99]));
        }
        let tagged = tagged_clip(2, 9, 4);
        assert_eq!(spatial_resample(&tagged, 9, 4).unwrap(), tagged);
        assert!(spatial_resample(&tagged, 0, 4).is_err());
    }

    #[test]
    fn half_pixel_downsample_averages_pairs() {
        // 2x downsample with half-pixel centres lands exactly between source pixels.
        let data: Vec<u8> = [10u8, 20, 30, 41].iter().flat_map(|&v| [v, v, v]).collect();
        let clip = VideoClip::new(4, 1, Fps::default(), vec![Frame::from_rgb(data)]).unwrap();
        let out = spatial_resample(&clip, 2, 1).unwrap();
        // (10+20)/2 = 15, (30+41)/2 = 35.5 rounds half away from zero to 36
        assert_eq!(out.frames()[0].data(), &[15, 15, 15, 36, 36, 36]);
    }

    #[test]
    fn degrade_shapes() {
        let clip = VideoClip::new(512, 512, Fps::default(), vec![Frame::black(512, 512); 57]).unwrap();
        let (s, info) = degrade(&clip, &DegradationParams::new(4, 8, FillMode::Forward).unwrap()).unwrap();
        assert_eq!((s.width(), s.height(), s.frame_count()), (128, 128, 8));
        assert_eq!(info.frame_count, 57);
        let (s, _) = degrade(&clip, &DegradationParams::new(2, 4, FillMode::Forward).unwrap()).unwrap();
        assert_eq!((s.width(), s.height(), s.frame_count()), (256, 256, 15));
        let restored = restore_scaffold(
            &VideoClip::new(128, 128, Fps::default(), vec![Frame::black(128, 128); 8]).unwrap(),
            &RestorationInfo {
                width: 512,
                height: 512,
                frame_count: 57,
                spatial_factor: 4,
                temporal_factor: 8,
                fill_mode: FillMode::Forward,
            },
        )
        .unwrap();
        assert_eq!(
            (restored.width(), restored.height(), restored.frame_count()),
            (512, 512, 57)
        );
    }

    #[test]
    fn degrade_rejects_degenerate() {
        let clip = tagged_clip(2, 3, 3);
        assert!(matches!(
            degrade(&clip, &DegradationParams::new(8, 1, FillMode::Forward).unwrap()),
            Err(ScaffoldError::DegenerateDims { .. })
        ));
        assert!(DegradationParams::new(0, 1, FillMode::Forward).is_err());
        assert!(DegradationParams::new(1, 0, FillMode::Forward).is_err());
    }

    #[test]
    fn identity_round_trip() {
        let clip = tagged_clip(5, 6, 4);
        let params = DegradationParams::new(1, 1, FillMode::Forward).unwrap();
        let (s, info) = degrade(&clip, &params).unwrap();
        assert_eq!(s, clip);
        assert_eq!(restore_scaffold(&s, &info).unwrap(), clip);
    }

    #[test]
    fn restore_rejects_inconsistent_info() {
        let clip = tagged_clip(6, 8, 8);
        let (s, mut info) = degrade(&clip, &DegradationParams::new(2, 2, FillMode::Forward).unwrap()).unwrap();
        info.frame_count = 9;
        assert!(matches!(
            restore_scaffold(&s, &info),
            Err(ScaffoldError::InconsistentInfo(_))
        ));
        info.frame_count = 6;
        info.spatial_factor = 4;
        assert!(matches!(
            restore_scaffold(&s, &info),
            Err(ScaffoldError::InconsistentInfo(_))
        ));
    }

    #[test]
    fn fill_mode_codes_round_trip() {
        for m in [FillMode::None, FillMode::Zero, FillMode::Forward] {
            assert_eq!(FillMode::from_code(m.code()), Some(m));
            assert_eq!(m.name().parse::<FillMode>().unwrap(), m);
        }
        assert_eq!(FillMode::from_code(3), None);
    }
}
