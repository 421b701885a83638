//! Deterministic block-DCT video codec used as a stand-in for a neural codec.
//!
//! Per plane and 8x8 block: optional subtraction of the previous
//! reconstructed frame (the first frame is always intra, predicted from mid
//! grey), orthonormal DCT-II, uniform quantization `round(c / q)`, zigzag
//! scan and zero run-length tokens. The token stream of the whole clip is
//! then DEFLATE compressed. Planes are edge-padded to a multiple of 8.
//!
//! Bitstream:
//!
//! ```text
//! "TOYV" | version u8 = 1 | width u16 | height u16 | frame_count u32
//!        | fps_num u16 | fps_den u16 | q u8 | flags u8 | zlib(tokens)
//! flags: bit 0 = inter prediction, bit 1 = single grey plane
//! tokens per block: { run u8 (0..=63), level signed varint }* then EOB (64)
//! ```

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;

use flate2::write::ZlibEncoder;
use flate2::Compression;
use thiserror::Error;

use super::text::{inflate_exact, TextCodecError};
use crate::video::{Fps, Frame, VideoClip};

pub const MAGIC: &[u8; 4] = b"TOYV";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 19;
const FLAG_INTER: u8 = 0x01;
const FLAG_GRAY: u8 = 0x02;
const EOB: u8 = 64;
const B: usize = 8;

#[derive(Debug, Error)]
pub enum ToyCodecError {
    #[error("quantization step must be in 1..=255")]
    InvalidQuant,
    #[error("{field} = {value} does not fit the toy bitstream header")]
    FieldRange { field: &'static str, value: usize },
    #[error("bad magic, expected \"TOYV\"")]
    BadMagic,
    #[error("unsupported toy bitstream version {0}")]
    UnsupportedVersion(u8),
    #[error("malformed toy header: {0}")]
    BadHeader(&'static str),
    #[error("entropy stage: {0}")]
    Entropy(#[from] TextCodecError),
    #[error("malformed token stream: {0}")]
    BadTokens(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ToyCodecParams {
    pub quant_step: u8,
    pub inter_prediction: bool,
    /// Code a single luma plane and replicate it into RGB on decode (sketches).
    pub grayscale: bool,
}

impl ToyCodecParams {
    pub fn new(quant_step: u8, inter_prediction: bool) -> Result<Self, ToyCodecError> {
        if quant_step == 0 {
            return Err(ToyCodecError::InvalidQuant);
        }
        Ok(Self {
            quant_step,
            inter_prediction,
            grayscale: false,
        })
    }

    pub fn grayscale(mut self, on: bool) -> Self {
        self.grayscale = on;
        self
    }
}

impl Default for ToyCodecParams {
    fn default() -> Self {
        Self {
            quant_step: 16,
            inter_prediction: true,
            grayscale: false,
        }
    }
}

struct Tables {
    /// basis[u][x] = a(u) cos((2x + 1) u pi / 16)
    basis: [[f64; B]; B],
    zigzag: [usize; B * B],
}

fn tables() -> &'static Tables {
    static T: OnceLock<Tables> = OnceLock::new();
    T.get_or_init(|| {
        let mut basis = [[0.0; B]; B];
        for (u, row) in basis.iter_mut().enumerate() {
            let a = if u == 0 {
                (1.0 / B as f64).sqrt()
            } else {
                (2.0 / B as f64).sqrt()
            };
            for (x, v) in row.iter_mut().enumerate() {
                *v = a * (((2 * x + 1) * u) as f64 * PI / (2 * B) as f64).cos();
            }
        }
        let mut zigzag = [0usize; B * B];
        let mut i = 0;
        for s in 0..(2 * B - 1) {
            let range: Vec<usize> = (0..B).filter(|&r| s >= r && s - r < B).collect();
            // even diagonals run bottom-left to top-right
            let rows: Vec<usize> = if s % 2 == 0 {
                range.into_iter().rev().collect()
            } else {
                range
            };
            for r in rows {
                zigzag[i] = r * B + (s - r);
                i += 1;
            }
        }
        Tables { basis, zigzag }
    })
}

fn fdct(block: &[f64; 64]) -> [f64; 64] {
    let c = &tables().basis;
    let mut tmp = [0.0; 64];
    for y in 0..B {
        for u in 0..B {
            tmp[y * B + u] = (0..B).map(|x| c[u][x] * block[y * B + x]).sum();
        }
    }
    let mut out = [0.0; 64];
    for v in 0..B {
        for u in 0..B {
            out[v * B + u] = (0..B).map(|y| c[v][y] * tmp[y * B + u]).sum();
        }
    }
    out
}

fn idct(coef: &[f64; 64]) -> [f64; 64] {
    let c = &tables().basis;
    let mut tmp = [0.0; 64];
    for v in 0..B {
        for x in 0..B {
            tmp[v * B + x] = (0..B).map(|u| c[u][x] * coef[v * B + u]).sum();
        }
    }
    let mut out = [0.0; 64];
    for y in 0..B {
        for x in 0..B {
            out[y * B + x] = (0..B).map(|v| c[v][y] * tmp[v * B + x]).sum();
        }
    }
    out
}

#[derive(Clone)]
struct Plane {
    w: usize,
    data: Vec<u8>,
}

impl Plane {
    fn flat(w: usize, h: usize, v: u8) -> Self {
        Self {
            w,
            data: vec![v; w * h],
        }
    }
}

fn padded(n: usize) -> usize {
    n.div_ceil(B) * B
}

/// Splits a frame into edge-padded planes (RGB, or one BT.601 luma plane).
fn frame_planes(frame: &Frame, width: usize, height: usize, gray: bool) -> Vec<Plane> {
    let (pw, ph) = (padded(width), padded(height));
    let n = if gray { 1 } else { 3 };
    let rgb = frame.data();
    (0..n)
        .map(|c| {
            let mut data = Vec::with_capacity(pw * ph);
            for y in 0..ph {
                let sy = y.min(height - 1);
                for x in 0..pw {
                    let i = (sy * width + x.min(width - 1)) * 3;
                    data.push(if gray {
                        (0.299 * rgb[i] as f64 + 0.587 * rgb[i + 1] as f64 + 0.114 * rgb[i + 2] as f64).round() as u8
                    } else {
                        rgb[i + c]
                    });
                }
            }
            Plane { w: pw, data }
        })
        .collect()
}

fn planes_to_frame(planes: &[Plane], width: usize, height: usize) -> Frame {
    let mut out = Vec::with_capacity(width * height * 3);
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let p = &planes[if planes.len() == 1 { 0 } else { c }];
                out.push(p.data[y * p.w + x]);
            }
        }
    }
    Frame::from_rgb(out)
}

/// Dequantizes `levels` (natural order) and adds the prediction, writing into `recon`.
fn reconstruct_block(levels: &[i32; 64], q: f64, pred: &Plane, recon: &mut Plane, bx: usize, by: usize) {
    let mut coef = [0.0; 64];
    for (c, &l) in coef.iter_mut().zip(levels) {
        *c = l as f64 * q;
    }
    let resid = idct(&coef);
    for y in 0..B {
        for x in 0..B {
            let i = (by + y) * recon.w + bx + x;
            recon.data[i] = (pred.data[i] as f64 + resid[y * B + x]).round().clamp(0.0, 255.0) as u8;
        }
    }
}

fn put_svarint(out: &mut Vec<u8>, v: i32) {
    let mut z = ((v << 1) ^ (v >> 31)) as u32;
    loop {
        let byte = (z & 0x7f) as u8;
        z >>= 7;
        if z == 0 {
            out.push(byte);
            return;
        }
        out.push(byte | 0x80);
    }
}

fn narrow<T: TryFrom<usize>>(field: &'static str, value: usize) -> Result<T, ToyCodecError> {
    T::try_from(value).map_err(|_| ToyCodecError::FieldRange { field, value })
}

pub fn toy_encode(clip: &VideoClip, params: &ToyCodecParams) -> Result<Vec<u8>, ToyCodecError> {
    if params.quant_step == 0 {
        return Err(ToyCodecError::InvalidQuant);
    }
    let (w, h) = (clip.width(), clip.height());
    let mut out = Vec::with_capacity(HEADER_LEN + 64);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&narrow::<u16>("width", w)?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>("height", h)?.to_le_bytes());
    out.extend_from_slice(&narrow::<u32>("frame_count", clip.frame_count())?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>("fps_num", clip.fps().num as usize)?.to_le_bytes());
    out.extend_from_slice(&narrow::<u16>("fps_den", clip.fps().den as usize)?.to_le_bytes());
    out.push(params.quant_step);
    let mut flags = 0;
    if params.inter_prediction {
        flags |= FLAG_INTER;
    }
    if params.grayscale {
        flags |= FLAG_GRAY;
    }
    out.push(flags);

    let zz = &tables().zigzag;
    let q = params.quant_step as f64;
    let (pw, ph) = (padded(w), padded(h));
    let mid = Plane::flat(pw, ph, 128);
    let mut tokens = Vec::new();
    let mut prev: Option<Vec<Plane>> = None;
    for frame in clip.frames() {
        let src = frame_planes(frame, w, h, params.grayscale);
        let mut recon_planes = Vec::with_capacity(src.len());
        for (c, plane) in src.iter().enumerate() {
            let pred = match (&prev, params.inter_prediction) {
                (Some(p), true) => &p[c],
                _ => &mid,
            };
            let mut recon = Plane::flat(pw, ph, 0);
            for by in (0..ph).step_by(B) {
                for bx in (0..pw).step_by(B) {
                    let mut resid = [0.0; 64];
                    for y in 0..B {
                        for x in 0..B {
                            let i = (by + y) * pw + bx + x;
                            resid[y * B + x] = plane.data[i] as f64 - pred.data[i] as f64;
                        }
                    }
                    let coef = fdct(&resid);
                    let mut levels = [0i32; 64];
                    for (l, c) in levels.iter_mut().zip(coef.iter()) {
                        *l = (c / q).round() as i32;
                    }
                    let mut run = 0u8;
                    for &pos in zz.iter() {
                        let l = levels[pos];
                        if l == 0 {
                            run += 1;
                        } else {
                            tokens.push(run);
                            put_svarint(&mut tokens, l);
                            run = 0;
                        }
                    }
                    tokens.push(EOB);
                    reconstruct_block(&levels, q, pred, &mut recon, bx, by);
                }
            }
            recon_planes.push(recon);
        }
        prev = Some(recon_planes);
    }

    let mut enc = ZlibEncoder::new(out, Compression::best());
    enc.write_all(&tokens).expect("in-memory write");
    Ok(enc.finish().expect("in-memory write"))
}

struct TokenReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl TokenReader<'_> {
    fn byte(&mut self) -> Result<u8, ToyCodecError> {
        let b = *self
            .buf
            .get(self.pos)
            .ok_or(ToyCodecError::BadTokens("token stream ends early"))?;
        self.pos += 1;
        Ok(b)
    }

    fn svarint(&mut self) -> Result<i32, ToyCodecError> {
        let mut z = 0u32;
        for shift in (0..35).step_by(7) {
            let b = self.byte()?;
            z |= ((b & 0x7f) as u32) << shift;
            if b & 0x80 == 0 {
                return Ok(((z >> 1) as i32) ^ -((z & 1) as i32));
            }
        }
        Err(ToyCodecError::BadTokens("varint too long"))
    }

    fn block(&mut self) -> Result<[i32; 64], ToyCodecError> {
        let zz = &tables().zigzag;
        let mut levels = [0i32; 64];
        let mut pos = 0usize;
        loop {
            let run = self.byte()?;
            if run == EOB {
                return Ok(levels);
            }
            if run > EOB {
                return Err(ToyCodecError::BadTokens("invalid run"));
            }
            pos += run as usize;
            if pos >= 64 {
                return Err(ToyCodecError::BadTokens("run past end of block"));
            }
            let level = self.svarint()?;
            if level == 0 {
                return Err(ToyCodecError::BadTokens("zero level"));
            }
            levels[zz[pos]] = level;
            pos += 1;
        }
    }
}

pub fn toy_decode(bits: &[u8]) -> Result<VideoClip, ToyCodecError> {
    if bits.len() < HEADER_LEN {
        return Err(ToyCodecError::BadHeader("truncated header"));
    }
    if &bits[..4] != MAGIC {
        return Err(ToyCodecError::BadMagic);
    }
    if bits[4] != VERSION {
        return Err(ToyCodecError::UnsupportedVersion(bits[4]));
    }
    let u16_at = |at: usize| u16::from_le_bytes([bits[at], bits[at + 1]]) as usize;
    let w = u16_at(5);
    let h = u16_at(7);
    let count = u32::from_le_bytes([bits[9], bits[10], bits[11], bits[12]]) as usize;
    let fps = Fps::new(u16_at(13) as u32, u16_at(15) as u32).map_err(|_| ToyCodecError::BadHeader("zero fps"))?;
    let quant = bits[17];
    let flags = bits[18];
    if w == 0 || h == 0 || count == 0 {
        return Err(ToyCodecError::BadHeader("zero dimension or frame count"));
    }
    if quant == 0 {
        return Err(ToyCodecError::InvalidQuant);
    }
    if flags & !(FLAG_INTER | FLAG_GRAY) != 0 {
        return Err(ToyCodecError::BadHeader("unknown flags"));
    }
    let inter = flags & FLAG_INTER != 0;
    let n_planes = if flags & FLAG_GRAY != 0 { 1 } else { 3 };

    let tokens = inflate_exact(&bits[HEADER_LEN..])?;
    let blocks_per_frame = n_planes * padded(w) / B * padded(h) / B;
    // Every block costs at least its EOB byte.
    if tokens.len() < blocks_per_frame.saturating_mul(count) {
        return Err(ToyCodecError::BadTokens("token stream ends early"));
    }
    let mut reader = TokenReader { buf: &tokens, pos: 0 };
    let q = quant as f64;
    let (pw, ph) = (padded(w), padded(h));
    let mid = Plane::flat(pw, ph, 128);
    let mut prev: Option<Vec<Plane>> = None;
    let mut frames = Vec::with_capacity(count);
    for _ in 0..count {
        let mut planes = Vec::with_capacity(n_planes);
        for c in 0..n_planes {
            let pred = match (&prev, inter) {
                (Some(p), true) => &p[c],
                _ => &mid,
            };
            let mut recon = Plane::flat(pw, ph, 0);
            for by in (0..ph).step_by(B) {
                for bx in (0..pw).step_by(B) {
                    let levels = reader.block()?;
                    reconstruct_block(&levels, q, pred, &mut recon, bx, by);
                }
            }
            planes.push(recon);
        }
        frames.push(planes_to_frame(&planes, w, h));
        prev = Some(planes);
    }
    if reader.pos != tokens.len() {
        return Err(ToyCodecError::BadTokens("trailing tokens"));
    }
    Ok(VideoClip::from_parts(w, h, fps, frames))
}
