//! Skeleton rasterization of decoded poses.

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::pose::{QPoint, QuantizedPoseSequence};
use crate::video::{Fps, Frame, VideoClip};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("topology line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("edge ({0}, {1}) references a keypoint >= {2}")]
    EdgeIndex(usize, usize, usize),
    #[error("pose sequence has no frames to render")]
    NoFrames,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Eight saturated hues; edge `e` uses `PALETTE[e % 8]`, keypoint `k` uses `PALETTE[k % 8]`.
pub const PALETTE: [[u8; 3]; 8] = [
    [255, 0, 0],
    [255, 128, 0],
    [255, 255, 0],
    [0, 255, 0],
    [0, 255, 255],
    [0, 0, 255],
    [128, 0, 255],
    [255, 0, 255],
];

/// Half-width of the 3 px limb stroke.
const LIMB_HALF_WIDTH: i64 = 1;
/// Joint discs cover pixels within this radius of the keypoint.
const JOINT_RADIUS: i64 = 2;

/// Skeleton connectivity as pairs of keypoint indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub edges: Vec<(usize, usize)>,
}

impl Topology {
    /// 18-keypoint OpenPose body model (nose, neck, shoulders, elbows, wrists,
    /// hips, knees, ankles, eyes, ears).
    pub fn openpose18() -> Self {
        const LIMBS: [(usize, usize); 17] = [
            (1, 2),
            (1, 5),
            (2, 3),
            (3, 4),
            (5, 6),
            (6, 7),
            (1, 8),
            (8, 9),
            (9, 10),
            (1, 11),
            (11, 12),
            (12, 13),
            (1, 0),
            (0, 14),
            (14, 16),
            (0, 15),
            (15, 17),
        ];
        Self { edges: LIMBS.to_vec() }
    }

    /// One `a b` pair per line. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, RenderError> {
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            let err = |reason: &str| RenderError::Parse {
                line: i + 1,
                reason: reason.to_string(),
            };
            if parts.len() != 2 {
                return Err(err("expected two integers"));
            }
            let a = parts[0].parse().map_err(|_| err("invalid integer"))?;
            let b = parts[1].parse().map_err(|_| err("invalid integer"))?;
            edges.push((a, b));
        }
        Ok(Self { edges })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RenderError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.edges.iter().map(|(a, b)| format!("{a} {b}\n")).collect()
    }

    pub fn validate(&self, keypoints_per_pose: usize) -> Result<(), RenderError> {
        for &(a, b) in &self.edges {
            if a >= keypoints_per_pose || b >= keypoints_per_pose {
                return Err(RenderError::EdgeIndex(a, b, keypoints_per_pose));
            }
        }
        Ok(())
    }
}

impl Default for Topology {
    fn default() -> Self {
        Self::openpose18()
    }
}

struct Canvas<'a> {
    data: &'a mut [u8],
    width: i64,
    height: i64,
}

impl Canvas<'_> {
    fn put(&mut self, x: i64, y: i64, rgb: [u8; 3]) {
        if x >= 0 && y >= 0 && x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    fn stamp_square(&mut self, cx: i64, cy: i64, half: i64, rgb: [u8; 3]) {
        for dy in -half..=half {
            for dx in -half..=half {
                self.put(cx + dx, cy + dy, rgb);
            }
        }
    }

    fn disc(&mut self, cx: i64, cy: i64, r: i64, rgb: [u8; 3]) {
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    self.put(cx + dx, cy + dy, rgb);
                }
            }
        }
    }

    /// Bresenham stepping with a square brush at every step.
    fn line(&mut self, a: QPoint, b: QPoint, rgb: [u8; 3]) {
        let (mut x, mut y) = (a.x as i64, a.y as i64);
        let (x1, y1) = (b.x as i64, b.y as i64);
        let dx = (x1 - x).abs();
        let dy = -(y1 - y).abs();
        let sx = if x < x1 { 1 } else { -1 };
        let sy = if y < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        loop {
            self.stamp_square(x, y, LIMB_HALF_WIDTH, rgb);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
}

/// Draws every pose onto a black canvas: limbs first, then joints on top.
pub fn render_pose(seq: &QuantizedPoseSequence, topology: &Topology, fps: Fps) -> Result<VideoClip, RenderError> {
    topology.validate(seq.keypoints_per_pose)?;
    if seq.frames.is_empty() {
        return Err(RenderError::NoFrames);
    }
    let frames = seq
        .frames
        .iter()
        .map(|poses| {
            let mut frame = Frame::black(seq.width, seq.height);
            let mut canvas = Canvas {
                data: frame.data_mut(),
                width: seq.width as i64,
                height: seq.height as i64,
            };
            for pose in poses {
                for (e, &(a, b)) in topology.edges.iter().enumerate() {
                    let (pa, pb) = (pose[a], pose[b]);
                    if pa.is_visible() && pb.is_visible() {
                        canvas.line(pa, pb, PALETTE[e % PALETTE.len()]);
                    }
                }
            }
            for pose in poses {
                for (k, pt) in pose.iter().enumerate() {
                    if pt.is_visible() {
                        canvas.disc(pt.x as i64, pt.y as i64, JOINT_RADIUS, PALETTE[k % PALETTE.len()]);
                    }
                }
            }
            frame
        })
        .collect();
    Ok(VideoClip::new(seq.width, seq.height, fps, frames).expect("rendered clip shape"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point_seq(a: QPoint, b: QPoint) -> QuantizedPoseSequence {
        QuantizedPoseSequence {
            width: 64,
            height: 64,
            keypoints_per_pose: 2,
            frames: vec![vec![vec![a, b]]],
        }
    }

    #[test]
    fn empty_sequence_is_black() {
        let seq = QuantizedPoseSequence {
            width: 16,
            height: 8,
            keypoints_per_pose: 18,
            frames: vec![vec![]; 3],
        };
        let clip = render_pose(&seq, &Topology::openpose18(), Fps::default()).unwrap();
        assert_eq!(clip.frame_count(), 3);
        assert!(clip.frames().iter().all(|f| f.data().iter().all(|&b| b == 0)));
    }

    #[test]
    fn vertical_segment_oracle() {
        let seq = two_point_seq(QPoint { x: 10, y: 10 }, QPoint { x: 10, y: 50 });
        let topo = Topology { edges: vec![(0, 1)] };
        let clip = render_pose(&seq, &topo, Fps::default()).unwrap();
        let f = clip.frames()[0].data();
        let px = |x: usize, y: usize| [f[(y * 64 + x) * 3], f[(y * 64 + x) * 3 + 1], f[(y * 64 + x) * 3 + 2]];
        for y in 0..64usize {
            for x in 0..64usize {
                let in_band = (9..=11).contains(&x) && (9..=51).contains(&y);
                let in_disc = |cy: i64| {
                    let (dx, dy) = (x as i64 - 10, y as i64 - cy);
                    dx * dx + dy * dy <= 4
                };
                let expected = if in_disc(10) {
                    PALETTE[0]
                } else if in_disc(50) {
                    PALETTE[1]
                } else if in_band {
                    PALETTE[0]
                } else {
                    [0, 0, 0]
                };
                assert_eq!(px(x, y), expected, "pixel ({x},{y})");
            }
        }
    }

    #[test]
    fn invisible_endpoint_skips_edge() {
        let seq = two_point_seq(QPoint { x: 10, y: 10 }, QPoint::INVISIBLE);
        let clip = render_pose(&seq, &Topology { edges: vec![(0, 1)] }, Fps::default()).unwrap();
        let lit = clip.frames()[0].data().chunks(3).filter(|p| p != &[0, 0, 0]).count();
        assert_eq!(lit, 13); // only the radius-2 joint disc
    }

    #[test]
    fn deterministic_and_validated() {
        let seq = two_point_seq(QPoint { x: 3, y: 60 }, QPoint { x: 61, y: 2 });
        let topo = Topology { edges: vec![(0, 1)] };
        assert_eq!(
            render_pose(&seq, &topo, Fps::default()).unwrap(),
            render_pose(&seq, &topo, Fps::default()).unwrap()
        );
        assert!(matches!(
            render_pose(&seq, &Topology { edges: vec![(0, 2)] }, Fps::default()),
            Err(RenderError::EdgeIndex(0, 2, 2))
        ));
    }

    #[test]
    fn topology_text_round_trip() {
        let t = Topology::openpose18();
        assert_eq!(Topology::parse(&t.to_text()).unwrap(), t);
        assert_eq!(Topology::parse("# c\n\n1 2 # x\n").unwrap().edges, vec![(1, 2)]);
        assert!(Topology::parse("1\n").is_err());
        assert!(Topology::parse("a b\n").is_err());
    }
}
