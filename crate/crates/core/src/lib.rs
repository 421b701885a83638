//! Semantic video compression toolchain.
//!
//! A source clip is factorized into independently coded modality streams:
//! a lossless text caption, a spatiotemporally degraded video scaffold, and
//! optional sketch or pose sequences. The streams are muxed into a single
//! container whose size defines the rate. On the receiver side the scaffold
//! is restored to full resolution and frame rate, and a token interleaving
//! layout is planned for a downstream diffusion decoder (which lives outside
//! this crate).
//!
//! Module map:
//!
//! * [`video`] / [`rvid`]: in-memory clips and the raw `RVID` interchange file.
//! * [`scaffold`]: degradation at the sender, fill-based restoration at the receiver.
//! * [`codecs`]: text (zlib), pose (`DPOS` + LZMA), a toy DCT video codec and an
//!   adapter for external codec commands.
//! * [`interleave`]: latent token grid geometry and conditioning masks.
//! * [`container`]: the `DSC0` multimodal container and bit accounting.
//! * [`metrics`]: PSNR, SSIM, RD curves and BD-rate.

pub mod codecs;
pub mod container;
pub mod interleave;
pub mod metrics;
pub mod rvid;
pub mod scaffold;
pub mod synth;
pub mod video;

pub use video::{Fps, Frame, VideoClip, VideoError};
