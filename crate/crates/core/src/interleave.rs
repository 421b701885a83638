//! Latent token grid geometry and token-level modality interleaving.
//!
//! Tokens are flattened in `(t, h, w)` raster order. A mask with ratio `r`
//! assigns index `i` to the scaffold video when `i % (r + 1) == 0` and to the
//! auxiliary modality (sketch or pose) otherwise, so video always holds
//! index 0.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InterleaveError {
    #[error("{0} must be >= 1")]
    NonPositive(&'static str),
    #[error("length mismatch: mask has {mask} tokens, {what} has {other}")]
    LengthMismatch {
        what: &'static str,
        mask: usize,
        other: usize,
    },
    #[error("malformed mask file: {0}")]
    Parse(String),
}

/// Latent grid produced by a video VAE with temporal factor `ft` and spatial factor `fs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenGridSpec {
    pub latent_frames: usize,
    pub latent_h: usize,
    pub latent_w: usize,
}

impl TokenGridSpec {
    pub fn total_tokens(&self) -> usize {
        self.latent_frames * self.latent_h * self.latent_w
    }

    /// Tokens per latent frame.
    pub fn slab_len(&self) -> usize {
        self.latent_h * self.latent_w
    }

    pub fn index(&self, t: usize, h: usize, w: usize) -> usize {
        (t * self.latent_h + h) * self.latent_w + w
    }
}

/// VAE compression factors; the defaults describe a causal 8x temporal,
/// 32x spatial video VAE.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VaeGeometry {
    pub temporal_factor: usize,
    pub spatial_factor: usize,
    pub causal_first_frame: bool,
}

impl Default for VaeGeometry {
    fn default() -> Self {
        Self {
            temporal_factor: 8,
            spatial_factor: 32,
            causal_first_frame: true,
        }
    }
}

pub fn token_grid(
    frame_count: usize,
    width: usize,
    height: usize,
    geometry: &VaeGeometry,
) -> Result<TokenGridSpec, InterleaveError> {
    let checks = [
        ("frame_count", frame_count),
        ("width", width),
        ("height", height),
        ("temporal_factor", geometry.temporal_factor),
        ("spatial_factor", geometry.spatial_factor),
    ];
    for (name, v) in checks {
        if v == 0 {
            return Err(InterleaveError::NonPositive(name));
        }
    }
    let ft = geometry.temporal_factor;
    let latent_frames = if geometry.causal_first_frame {
        1 + (frame_count - 1).div_ceil(ft)
    } else {
        frame_count.div_ceil(ft)
    };
    Ok(TokenGridSpec {
        latent_frames,
        latent_h: height.div_ceil(geometry.spatial_factor),
        latent_w: width.div_ceil(geometry.spatial_factor),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Modality {
    Video,
    Aux,
}

impl Modality {
    pub fn symbol(self) -> char {
        match self {
            Modality::Video => 'V',
            Modality::Aux => 'A',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterleaveMask {
    ratio: usize,
    entries: Vec<Modality>,
}

impl InterleaveMask {
    /// Wraps an arbitrary assignment, e.g. a frame-level layout to be checked
    /// with [`validate_mask`].
    pub fn from_entries(entries: Vec<Modality>, ratio: usize) -> Self {
        Self { ratio, entries }
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[Modality] {
        &self.entries
    }

    pub fn count(&self, m: Modality) -> usize {
        self.entries.iter().filter(|&&e| e == m).count()
    }

    /// True when the entries follow the periodic pattern for this ratio.
    pub fn is_periodic(&self) -> bool {
        self.entries
            .iter()
            .enumerate()
            .all(|(i, &e)| (e == Modality::Video) == (i % (self.ratio + 1) == 0))
    }

    /// `N r` on the first line, then one `V`/`A` per token.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.entries.len(), self.ratio);
        s.extend(self.entries.iter().map(|m| m.symbol()));
        s.push('\n');
        s
    }
}

impl fmt::Display for InterleaveMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for InterleaveMask {
    type Err = InterleaveError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut lines = s.lines();
        let head = lines.next().ok_or_else(|| InterleaveError::Parse("empty".into()))?;
        let nums: Vec<usize> = head
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| InterleaveError::Parse(format!("bad header {head:?}")))
            })
            .collect::<Result<_, _>>()?;
        let [n, r] = nums[..] else {
            return Err(InterleaveError::Parse(format!("bad header {head:?}")));
        };
        let body = lines.next().unwrap_or("");
        if lines.any(|l| !l.trim().is_empty()) {
            return Err(InterleaveError::Parse("unexpected extra lines".into()));
        }
        let entries = body
            .chars()
            .map(|c| match c {
                'V' => Ok(Modality::Video),
                'A' => Ok(Modality::Aux),
                _ => Err(InterleaveError::Parse(format!("unexpected symbol {c:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if entries.len() != n {
            return Err(InterleaveError::Parse(format!(
                "header says {n} tokens, body has {}",
                entries.len()
            )));
        }
        Ok(Self { ratio: r, entries })
    }
}

/// One video token followed by `ratio` auxiliary tokens, repeated.
pub fn plan_interleave(total_tokens: usize, ratio: usize) -> InterleaveMask {
    let entries = (0..total_tokens)
        .map(|i| {
            if i % (ratio + 1) == 0 {
                Modality::Video
            } else {
                Modality::Aux
            }
        })
        .collect();
    InterleaveMask { ratio, entries }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub video_tokens: usize,
    pub aux_tokens: usize,
    /// Latent frames whose tokens all carry one modality.
    pub hazard_frames: Vec<usize>,
    pub periodic: bool,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.hazard_frames.is_empty()
    }
}

/// Flags latent frames conditioned by a single modality.
///
/// With `r > 0` and slabs longer than `r`, a token-level pattern always mixes
/// both tags in every slab; an all-one-modality slab means modalities were
/// alternated per frame, which blends them inside temporally compressed latents.
pub fn validate_mask(mask: &InterleaveMask, grid: &TokenGridSpec) -> Result<ValidationReport, InterleaveError> {
    if mask.len() != grid.total_tokens() {
        return Err(InterleaveError::LengthMismatch {
            what: "grid",
            mask: mask.len(),
            other: grid.total_tokens(),
        });
    }
    let slab = grid.slab_len();
    let mut hazard_frames = Vec::new();
    if mask.ratio > 0 && slab > mask.ratio {
        for (t, chunk) in mask.entries.chunks(slab).enumerate() {
            if chunk.iter().all(|&m| m == chunk[0]) {
                hazard_frames.push(t);
            }
        }
    }
    let video_tokens = mask.count(Modality::Video);
    Ok(ValidationReport {
        video_tokens,
        aux_tokens: mask.len() - video_tokens,
        hazard_frames,
        periodic: mask.is_periodic(),
    })
}

/// Selects, per position, the video or auxiliary token. Tokens are opaque.
pub fn apply_mask<T: Clone>(mask: &InterleaveMask, video: &[T], aux: &[T]) -> Result<Vec<T>, InterleaveError> {
    for (what, len) in [("video tokens", video.len()), ("aux tokens", aux.len())] {
        if len != mask.len() {
            return Err(InterleaveError::LengthMismatch {
                what,
                mask: mask.len(),
                other: len,
            });
        }
    }
    Ok(mask
        .entries
        .iter()
        .zip(video.iter().zip(aux))
        .map(|(m, (v, a))| match m {
            Modality::Video => v.clone(),
            Modality::Aux => a.clone(),
        })
        .collect())
}
