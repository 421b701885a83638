//! Deterministic synthetic test content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::video::{Fps, Frame, VideoClip};

/// Moving diagonal colour gradient plus seeded uniform noise of `+-noise_amp` levels.
///
/// The gradient pans two pixels per frame so consecutive frames differ, which
/// gives inter prediction something to do. Output is identical on every
/// platform for a given seed.
pub fn gradient_noise(width: usize, height: usize, frames: usize, noise_amp: u8, seed: u64) -> VideoClip {
    assert!(width > 0 && height > 0 && frames > 0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = noise_amp as i32;
    let out = (0..frames)
        .map(|t| {
            let mut data = Vec::with_capacity(width * height * 3);
            for y in 0..height {
                for x in 0..width {
                    let u = (x + 2 * t) as i32;
                    let base = [
                        (u * 255 / width.max(1) as i32) % 256,
                        (y as i32 * 255) / height.max(1) as i32,
                        ((u + y as i32) * 127 / (width + height) as i32 + 64) % 256,
                    ];
                    for b in base {
                        let n = if amp > 0 { rng.gen_range(-amp..=amp) } else { 0 };
                        data.push((b + n).clamp(0, 255) as u8);
                    }
                }
            }
            Frame::from_rgb(data)
        })
        .collect();
    VideoClip::from_parts(width, height, Fps::integer(30), out)
}

/// The fixed clip used for toy codec RD checks and end-to-end runs.
pub fn reference_clip() -> VideoClip {
    gradient_noise(128, 128, 16, 12, 0x5eed)
}
