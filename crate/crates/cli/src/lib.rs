//! Command-line front end for the semantic video toolchain.
//!
//! Every command writes human-readable lines and `#METRIC ` prefixed
//! `key=value` lines to stdout. Failures map to a distinct exit code per
//! failure class, see [`CliError::exit_code`].

pub mod config;

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use semvid::codecs::external::ExternalCodecError;
use semvid::codecs::pose::serialize_pose;
use semvid::codecs::render::RenderError;
use semvid::codecs::{
    decode_pose, decode_text, encode_pose, encode_text, external_decode, external_encode, quantize_pose, render_pose,
    toy_decode, toy_encode, PoseError, PoseSequence, TextCodecError, Topology, ToyCodecError, ToyCodecParams,
};
use semvid::container::{
    bitrate_kbps, bpp, breakdown, demux, mux, Container, ContainerError, ContainerMeta, ModalityId, ModalityStream,
};
use semvid::interleave::{plan_interleave, token_grid, validate_mask, InterleaveError, InterleaveMask};
use semvid::metrics::{
    append_rd_rows, bd_rate, format_score, ingest_scores, psnr, render_svg, ssim, write_bdrate_report, write_rd_csv,
    MetricsError, RdCurve, RdPoint,
};
use semvid::rvid::{self, RvidError};
use semvid::scaffold::{degrade, restore_scaffold, RestorationInfo, ScaffoldError};
use semvid::synth::gradient_noise;
use semvid::{Fps, VideoClip};

pub use config::{CodecChoice, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("config: {0}")]
    Config(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Rvid(#[from] RvidError),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Scaffold(#[from] ScaffoldError),
    #[error(transparent)]
    Text(#[from] TextCodecError),
    #[error(transparent)]
    Pose(#[from] PoseError),
    #[error(transparent)]
    Toy(#[from] ToyCodecError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    External(#[from] ExternalCodecError),
    #[error(transparent)]
    Interleave(#[from] InterleaveError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub mod exit {
    pub const USAGE: i32 = 2;
    pub const IO: i32 = 3;
    pub const FORMAT: i32 = 4;
    pub const CODEC: i32 = 5;
    pub const EXTERNAL: i32 = 6;
    pub const CONFIG: i32 = 7;
    pub const METRICS: i32 = 8;
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 usage, 3 I/O, 4 malformed file, 5 codec, 6 external codec, 7 config, 8 metrics.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Io { .. } | CliError::Rvid(RvidError::Io(_)) | CliError::Metrics(MetricsError::Io(_)) => exit::IO,
            CliError::Render(RenderError::Io(_)) => exit::IO,
            CliError::Format(_) | CliError::Rvid(_) | CliError::Container(_) | CliError::Pose(PoseError::Json(_)) => {
                exit::FORMAT
            }
            CliError::Scaffold(_) | CliError::Text(_) | CliError::Pose(_) | CliError::Toy(_) => exit::CODEC,
            CliError::External(_) => exit::EXTERNAL,
            CliError::Config(_) | CliError::Render(_) | CliError::Interleave(_) => exit::CONFIG,
            CliError::Metrics(_) => exit::METRICS,
        }
    }
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Parser, Debug)]
#[command(name = "semvid", version, about = "Semantic video compression toolchain")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Run configuration flags; each overrides the same key from `--config`.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// `key = value` config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Spatial downsampling factor
    #[arg(long)]
    pub ds: Option<usize>,
    /// Temporal subsampling factor
    #[arg(long)]
    pub dt: Option<usize>,
    /// Fill mode: none, zero or forward
    #[arg(long)]
    pub fill: Option<String>,
    /// Quality parameter recorded in the container and passed to external codecs as {qp}
    #[arg(long, allow_hyphen_values = true)]
    pub qp: Option<i32>,
    /// Auxiliary tokens per video token
    #[arg(long)]
    pub ratio: Option<usize>,
    /// Video codec: toy or external
    #[arg(long)]
    pub codec: Option<String>,
    /// Toy codec quantizer step
    #[arg(long)]
    pub toy_q: Option<u8>,
    /// Toy codec inter prediction (true/false)
    #[arg(long)]
    pub toy_inter: Option<String>,
    /// External encoder command template with {in}, {out} and optional {qp}
    #[arg(long)]
    pub ext_encode: Option<String>,
    /// External decoder command template
    #[arg(long)]
    pub ext_decode: Option<String>,
    /// Directory for external codec scratch files
    #[arg(long)]
    pub ext_workdir: Option<String>,
    /// VAE temporal factor
    #[arg(long)]
    pub ft: Option<usize>,
    /// VAE spatial factor
    #[arg(long)]
    pub fs: Option<usize>,
    /// Causal first latent frame (true/false)
    #[arg(long)]
    pub causal: Option<String>,
    /// Skeleton topology file (one `a b` pair per line)
    #[arg(long)]
    pub topology: Option<String>,
}

impl RunArgs {
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(p) = &self.config {
            cfg.apply_file(p)?;
        }
        let flags: [(&str, Option<String>); 15] = [
            ("ds", self.ds.map(|v| v.to_string())),
            ("dt", self.dt.map(|v| v.to_string())),
            ("fill", self.fill.clone()),
            ("qp", self.qp.map(|v| v.to_string())),
            ("ratio", self.ratio.map(|v| v.to_string())),
            ("codec", self.codec.clone()),
            ("toy_q", self.toy_q.map(|v| v.to_string())),
            ("toy_inter", self.toy_inter.clone()),
            ("ext_encode", self.ext_encode.clone()),
            ("ext_decode", self.ext_decode.clone()),
            ("ext_workdir", self.ext_workdir.clone()),
            ("ft", self.ft.map(|v| v.to_string())),
            ("fs", self.fs.map(|v| v.to_string())),
            ("causal", self.causal.clone()),
            ("topology", self.topology.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Degrade, code and mux a clip with its caption and optional pose/sketch
    Encode(EncodeArgs),
    /// Demux a container and reconstruct the scaffold plus sidecar files
    Decode(DecodeArgs),
    /// Print container metadata and bit accounting
    Inspect { input: PathBuf },
    /// Quantize and compress an OpenPose-style JSON sequence
    PoseEnc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Decode a pose bitstream to JSON, optionally rendering it
    PoseDec {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Rendered skeleton clip (RVID)
        #[arg(long)]
        render: Option<PathBuf>,
        #[arg(long, default_value_t = 30)]
        fps: u32,
        #[arg(long)]
        topology: Option<PathBuf>,
    },
    /// Plan (or check) a token interleaving mask for a clip geometry
    PlanInterleave(PlanArgs),
    /// Score a reconstruction and append RD rows
    Evaluate(EvaluateArgs),
    /// BD-rate of test curves against anchor curves
    Bdrate {
        #[arg(long)]
        anchor: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Restrict to one metric
        #[arg(long)]
        metric: Option<String>,
        /// Anchor method to use when the anchor file holds several
        #[arg(long)]
        anchor_method: Option<String>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render RD curves from one or more CSV files to SVG
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        metric: Option<String>,
        /// Also write the merged points as CSV
        #[arg(long)]
        csv_out: Option<PathBuf>,
    },
    /// Toy codec encoder (RVID -> bitstream)
    ToyEnc {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 16)]
        q: u8,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        inter: bool,
    },
    /// Toy codec decoder (bitstream -> RVID)
    ToyDec {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a synthetic gradient-plus-noise clip
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 128)]
        height: usize,
        #[arg(long, default_value_t = 16)]
        frames: usize,
        #[arg(long, default_value_t = 12)]
        noise: u8,
        #[arg(long, default_value_t = 0x5eed)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    /// UTF-8 caption file
    #[arg(long)]
    pub caption: Option<PathBuf>,
    /// OpenPose-style JSON pose sequence
    #[arg(long)]
    pub pose: Option<PathBuf>,
    /// Sketch clip (RVID) with the same shape as the input
    #[arg(long)]
    pub sketch: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct DecodeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Restored scaffold (RVID); sidecars default to `<stem>.caption.txt`, `<stem>.mask.txt`, ...
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub caption_out: Option<PathBuf>,
    #[arg(long)]
    pub mask_out: Option<PathBuf>,
    #[arg(long)]
    pub pose_out: Option<PathBuf>,
    #[arg(long)]
    pub sketch_out: Option<PathBuf>,
    /// Rasterize the decoded pose to an RVID clip
    #[arg(long)]
    pub render_pose: bool,
    /// Rendered pose clip, default `<stem>.pose.rvid`
    #[arg(long)]
    pub pose_render_out: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct PlanArgs {
    #[arg(long)]
    pub frames: usize,
    #[arg(long)]
    pub width: usize,
    #[arg(long)]
    pub height: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Validate this mask file instead of planning a new one
    #[arg(long)]
    pub check: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Args, Debug)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub reference: PathBuf,
    #[arg(long)]
    pub reconstruction: PathBuf,
    /// Transmitted bits; alternatively pass --container
    #[arg(long, conflicts_with = "container", required_unless_present = "container")]
    pub bits: Option<u64>,
    /// Container whose size (and operating point) is used
    #[arg(long)]
    pub container: Option<PathBuf>,
    #[arg(long)]
    pub csv: PathBuf,
    #[arg(long)]
    pub method: String,
    #[command(flatten)]
    pub run: RunArgs,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

fn read_string(path: &Path) -> Result<String> {
    let bytes = read(path)?;
    String::from_utf8(bytes).map_err(|_| CliError::Format(format!("{}: not valid UTF-8", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn stdout_err(e: io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

/// `<dir>/<stem>.<suffix>` next to `output`.
pub fn sidecar(output: &Path, suffix: &str) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    output.with_file_name(format!("{stem}.{suffix}"))
}

fn metric_line(out: &mut dyn Write, name: &str, fields: &[(&str, String)]) -> Result<()> {
    let body: Vec<String> = fields.iter().map(|(k, v)| format!("{k}={v}")).collect();
    writeln!(out, "#METRIC {name} {}", body.join(" ")).map_err(stdout_err)
}

fn narrow(field: &'static str, v: usize) -> Result<u16> {
    u16::try_from(v).map_err(|_| CliError::Container(ContainerError::InvalidField { field, value: v as i64 }))
}

fn encode_video(clip: &VideoClip, cfg: &RunConfig) -> Result<Vec<u8>> {
    Ok(match cfg.codec {
        CodecChoice::Toy => toy_encode(clip, &cfg.toy_params()?)?,
        CodecChoice::External => external_encode(clip, &cfg.external_spec()?)?,
    })
}

fn decode_video(bits: &[u8], cfg: &RunConfig) -> Result<VideoClip> {
    Ok(match cfg.codec {
        CodecChoice::Toy => toy_decode(bits)?,
        CodecChoice::External => external_decode(bits, &cfg.external_spec()?)?,
    })
}

pub fn restoration_info(meta: &ContainerMeta) -> RestorationInfo {
    RestorationInfo {
        width: meta.width as usize,
        height: meta.height as usize,
        frame_count: meta.frame_count as usize,
        spatial_factor: meta.spatial_factor as usize,
        temporal_factor: meta.temporal_factor as usize,
        fill_mode: meta.fill_mode,
    }
}

/// Restores a decoded scaffold and stamps it with the container frame rate.
fn restore(decoded: &VideoClip, meta: &ContainerMeta) -> Result<VideoClip> {
    let restored = restore_scaffold(decoded, &restoration_info(meta))?;
    VideoClip::new(restored.width(), restored.height(), meta.fps, restored.into_frames())
        .map_err(|e| CliError::Format(e.to_string()))
}

/// Bit accounting line shared by `encode` and `inspect`.
fn accounting(out: &mut dyn Write, name: &str, c: &Container) -> Result<()> {
    let b = breakdown(c);
    let m = &c.meta;
    let (w, h, n) = (m.width as usize, m.height as usize, m.frame_count as usize);
    let mut fields = vec![
        ("total_bits", b.total_bits.to_string()),
        ("header_bits", b.header_bits.to_string()),
    ];
    let names: Vec<&str> = b.streams.iter().map(|(id, _)| id.name()).collect();
    let keys: Vec<String> = names.iter().map(|n| format!("{n}_bits")).collect();
    for ((_, bits), key) in b.streams.iter().zip(&keys) {
        fields.push((key.as_str(), bits.to_string()));
    }
    fields.push(("streams", names.join(",")));
    fields.push(("bpp", bpp(b.total_bits, w, h, n).to_string()));
    fields.push(("kbps", bitrate_kbps(b.total_bits, n, m.fps).to_string()));
    metric_line(out, name, &fields)
}

pub fn cmd_encode(a: &EncodeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve()?;
    let clip = rvid::read_file(&a.input)?;
    let params = cfg.degradation()?;
    let meta = ContainerMeta {
        width: narrow("width", clip.width())?,
        height: narrow("height", clip.height())?,
        frame_count: narrow("frame_count", clip.frame_count())?,
        fps: clip.fps(),
        spatial_factor: cfg.ds as u8,
        temporal_factor: cfg.dt as u8,
        fill_mode: cfg.fill,
        ratio: cfg.ratio as u8,
        qp: cfg.qp as i16,
    };
    let (scaffold, _) = degrade(&clip, &params)?;
    let mut streams = Vec::new();
    if let Some(p) = &a.caption {
        streams.push(ModalityStream::new(ModalityId::Text, encode_text(&read_string(p)?)));
    }
    streams.push(ModalityStream::new(ModalityId::Video, encode_video(&scaffold, &cfg)?));
    if let Some(p) = &a.sketch {
        let sketch = rvid::read_file(p)?;
        if !sketch.same_shape(&clip) {
            return Err(CliError::Format(format!(
                "{}: sketch must match the input clip shape",
                p.display()
            )));
        }
        let (degraded, _) = degrade(&sketch, &params)?;
        let bits = toy_encode(&degraded, &cfg.toy_params()?.grayscale(true))?;
        streams.push(ModalityStream::new(ModalityId::Sketch, bits));
    }
    if let Some(p) = &a.pose {
        let seq = PoseSequence::from_json(&read_string(p)?)?;
        streams.push(ModalityStream::new(
            ModalityId::Pose,
            encode_pose(&quantize_pose(&seq))?,
        ));
    }
    let container = Container { meta, streams };
    let bytes = mux(&container)?;
    write(&a.output, &bytes)?;
    writeln!(
        out,
        "wrote {} ({} bytes, scaffold {}x{} x{} frames)",
        a.output.display(),
        bytes.len(),
        scaffold.width(),
        scaffold.height(),
        scaffold.frame_count()
    )
    .map_err(stdout_err)?;
    accounting(out, "encode", &container)
}

pub fn cmd_decode(a: &DecodeArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve()?;
    let c = demux(&read(&a.input)?)?;
    let meta = c.meta;
    let video = c.stream(ModalityId::Video).ok_or(ContainerError::MissingVideo)?;
    let scaffold = restore(&decode_video(&video.payload, &cfg)?, &meta)?;
    rvid::write_file(&a.output, &scaffold)?;
    writeln!(out, "scaffold: {}", a.output.display()).map_err(stdout_err)?;

    if let Some(s) = c.stream(ModalityId::Text) {
        let caption = decode_text(&s.payload)?;
        let path = a
            .caption_out
            .clone()
            .unwrap_or_else(|| sidecar(&a.output, "caption.txt"));
        write(&path, caption.as_bytes())?;
        writeln!(out, "caption: {}", path.display()).map_err(stdout_err)?;
    }
    if let Some(s) = c.stream(ModalityId::Sketch) {
        let sketch = restore(&toy_decode(&s.payload)?, &meta)?;
        let path = a
            .sketch_out
            .clone()
            .unwrap_or_else(|| sidecar(&a.output, "sketch.rvid"));
        rvid::write_file(&path, &sketch)?;
        writeln!(out, "sketch: {}", path.display()).map_err(stdout_err)?;
    }
    if let Some(s) = c.stream(ModalityId::Pose) {
        let q = decode_pose(&s.payload)?;
        let path = a.pose_out.clone().unwrap_or_else(|| sidecar(&a.output, "pose.json"));
        write(&path, PoseSequence::from(&q).to_json().as_bytes())?;
        writeln!(out, "pose: {}", path.display()).map_err(stdout_err)?;
        if a.render_pose || a.pose_render_out.is_some() {
            let path = a
                .pose_render_out
                .clone()
                .unwrap_or_else(|| sidecar(&a.output, "pose.rvid"));
            let topology = match &cfg.topology {
                Some(t) => Topology::load(t)?,
                None => Topology::openpose18(),
            };
            rvid::write_file(&path, &render_pose(&q, &topology, meta.fps)?)?;
            writeln!(out, "pose render: {}", path.display()).map_err(stdout_err)?;
        }
    }

    let grid = token_grid(
        meta.frame_count as usize,
        meta.width as usize,
        meta.height as usize,
        &cfg.geometry,
    )?;
    let mask = plan_interleave(grid.total_tokens(), meta.ratio as usize);
    let report = validate_mask(&mask, &grid)?;
    let path = a.mask_out.clone().unwrap_or_else(|| sidecar(&a.output, "mask.txt"));
    write(&path, mask.to_text().as_bytes())?;
    writeln!(out, "mask: {}", path.display()).map_err(stdout_err)?;
    metric_line(
        out,
        "decode",
        &[
            ("width", meta.width.to_string()),
            ("height", meta.height.to_string()),
            ("frames", meta.frame_count.to_string()),
            ("latent_frames", grid.latent_frames.to_string()),
            ("latent_h", grid.latent_h.to_string()),
            ("latent_w", grid.latent_w.to_string()),
            ("tokens", grid.total_tokens().to_string()),
            ("video_tokens", report.video_tokens.to_string()),
            ("aux_tokens", report.aux_tokens.to_string()),
            ("hazard_frames", report.hazard_frames.len().to_string()),
        ],
    )
}

pub fn cmd_inspect(input: &Path, out: &mut dyn Write) -> Result<()> {
    let c = demux(&read(input)?)?;
    let m = &c.meta;
    let lines = [
        format!("container: {}", input.display()),
        format!(
            "video: {}x{}, {} frames @ {}/{} fps",
            m.width, m.height, m.frame_count, m.fps.num, m.fps.den
        ),
        format!(
            "degradation: Ds={} Dt={} fill={}; ratio={} qp={}",
            m.spatial_factor, m.temporal_factor, m.fill_mode, m.ratio, m.qp
        ),
    ];
    for l in lines {
        writeln!(out, "{l}").map_err(stdout_err)?;
    }
    for s in &c.streams {
        writeln!(out, "  stream {} ({}): {} bytes", s.id as u8, s.id, s.payload.len()).map_err(stdout_err)?;
    }
    accounting(out, "inspect", &c)
}

fn cmd_pose_enc(input: &Path, output: &Path, out: &mut dyn Write) -> Result<()> {
    let q = quantize_pose(&PoseSequence::from_json(&read_string(input)?)?);
    let raw = serialize_pose(&q)?;
    let bits = encode_pose(&q)?;
    write(output, &bits)?;
    metric_line(
        out,
        "pose-enc",
        &[
            ("frames", q.frame_count().to_string()),
            ("raw_bytes", raw.len().to_string()),
            ("coded_bytes", bits.len().to_string()),
            ("bits", (8 * bits.len()).to_string()),
        ],
    )
}

fn cmd_pose_dec(
    input: &Path,
    output: &Path,
    render: Option<&Path>,
    fps: u32,
    topology: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let q = decode_pose(&read(input)?)?;
    write(output, PoseSequence::from(&q).to_json().as_bytes())?;
    if let Some(r) = render {
        let topo = match topology {
            Some(t) => Topology::load(t)?,
            None => Topology::openpose18(),
        };
        let fps = Fps::new(fps, 1).map_err(|e| CliError::Usage(e.to_string()))?;
        rvid::write_file(r, &render_pose(&q, &topo, fps)?)?;
    }
    metric_line(out, "pose-dec", &[("frames", q.frame_count().to_string())])
}

fn cmd_plan(a: &PlanArgs, out: &mut dyn Write) -> Result<()> {
    let cfg = a.run.resolve()?;
    let grid = token_grid(a.frames, a.width, a.height, &cfg.geometry)?;
    let mask = match &a.check {
        Some(p) => read_string(p)?.parse::<InterleaveMask>()?,
        None => plan_interleave(grid.total_tokens(), cfg.ratio),
    };
    let report = validate_mask(&mask, &grid)?;
    if let Some(p) = &a.output {
        write(p, mask.to_text().as_bytes())?;
    }
    for t in &report.hazard_frames {
        writeln!(out, "hazard: latent frame {t} carries a single modality").map_err(stdout_err)?;
    }
    metric_line(
        out,
        "plan-interleave",
        &[
            ("latent_frames", grid.latent_frames.to_string()),
            ("latent_h", grid.latent_h.to_string()),
            ("latent_w", grid.latent_w.to_string()),
            ("tokens", grid.total_tokens().to_string()),
            ("ratio", mask.ratio().to_string()),
            ("video_tokens", report.video_tokens.to_string()),
            ("aux_tokens", report.aux_tokens.to_string()),
            ("hazard_frames", report.hazard_frames.len().to_string()),
            ("periodic", report.periodic.to_string()),
        ],
    )
}

fn cmd_evaluate(a: &EvaluateArgs, out: &mut dyn Write) -> Result<()> {
    let reference = rvid::read_file(&a.reference)?;
    let recon = rvid::read_file(&a.reconstruction)?;
    let (bits, (qp, ds, dt)) = match (&a.container, a.bits) {
        (Some(p), _) => {
            let bytes = read(p)?;
            let m = demux(&bytes)?.meta;
            (
                8 * bytes.len() as u64,
                (m.qp as i32, m.spatial_factor as u32, m.temporal_factor as u32),
            )
        }
        (None, Some(b)) => {
            let cfg = a.run.resolve()?;
            (b, (cfg.qp, cfg.ds as u32, cfg.dt as u32))
        }
        (None, None) => return Err(CliError::Usage("pass --bits or --container".into())),
    };
    let p = psnr(&reference, &recon)?;
    let s = ssim(&reference, &recon)?;
    let rate = bpp(bits, reference.width(), reference.height(), reference.frame_count());
    let point = |score| RdPoint::new(rate, score).with_operating_point(qp, ds, dt);
    let curves = [
        RdCurve::new(a.method.clone(), "psnr", vec![point(p)])?,
        RdCurve::new(a.method.clone(), "ssim", vec![point(s)])?,
    ];
    append_rd_rows(&a.csv, &curves).map_err(|e| CliError::io(&a.csv, e))?;
    metric_line(
        out,
        "evaluate",
        &[
            ("method", a.method.clone()),
            ("bits", bits.to_string()),
            ("bpp", rate.to_string()),
            ("psnr", format_score(p)),
            ("ssim", s.to_string()),
        ],
    )
}

/// Pairs each test curve with the anchor curve of the same metric.
pub fn bdrate_rows(
    anchor: &[RdCurve],
    test: &[RdCurve],
    metric: Option<&str>,
    anchor_method: Option<&str>,
) -> Result<Vec<(String, String, f64)>> {
    let mut rows = Vec::new();
    for t in test {
        if metric.is_some_and(|m| m != t.metric) {
            continue;
        }
        let candidates: Vec<&RdCurve> = anchor
            .iter()
            .filter(|a| a.metric == t.metric && anchor_method.is_none_or(|m| m == a.method))
            .collect();
        let a = match candidates[..] {
            [] => continue,
            [a] => a,
            _ => {
                return Err(CliError::Usage(format!(
                    "anchor holds several methods for {}; pick one with --anchor-method",
                    t.metric
                )))
            }
        };
        rows.push((t.method.clone(), t.metric.clone(), bd_rate(a, t)?));
    }
    if rows.is_empty() {
        return Err(CliError::Usage(
            "no metric is shared by the anchor and test curves".into(),
        ));
    }
    Ok(rows)
}

fn cmd_plot(
    inputs: &[PathBuf],
    output: &Path,
    metric: Option<&str>,
    csv_out: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut curves = Vec::new();
    for p in inputs {
        curves.extend(ingest_scores(p)?);
    }
    curves.retain(|c| metric.is_none_or(|m| m == c.metric));
    if curves.is_empty() {
        return Err(CliError::Usage("no curves to plot".into()));
    }
    write(output, render_svg(&curves).as_bytes())?;
    if let Some(p) = csv_out {
        let mut buf = Vec::new();
        write_rd_csv(&curves, &mut buf).map_err(|e| CliError::io(p, e))?;
        write(p, &buf)?;
    }
    let points: usize = curves.iter().map(|c| c.points.len()).sum();
    metric_line(
        out,
        "plot",
        &[("curves", curves.len().to_string()), ("points", points.to_string())],
    )
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Encode(a) => cmd_encode(&a, out),
        Command::Decode(a) => cmd_decode(&a, out),
        Command::Inspect { input } => cmd_inspect(&input, out),
        Command::PoseEnc { input, output } => cmd_pose_enc(&input, &output, out),
        Command::PoseDec {
            input,
            output,
            render,
            fps,
            topology,
        } => cmd_pose_dec(&input, &output, render.as_deref(), fps, topology.as_deref(), out),
        Command::PlanInterleave(a) => cmd_plan(&a, out),
        Command::Evaluate(a) => cmd_evaluate(&a, out),
        Command::Bdrate {
            anchor,
            test,
            metric,
            anchor_method,
            output,
        } => {
            let rows = bdrate_rows(
                &ingest_scores(&anchor)?,
                &ingest_scores(&test)?,
                metric.as_deref(),
                anchor_method.as_deref(),
            )?;
            if let Some(p) = &output {
                let mut buf = Vec::new();
                write_bdrate_report(&rows, &mut buf).map_err(|e| CliError::io(p, e))?;
                write(p, &buf)?;
            }
            for (method, metric, bd) in &rows {
                metric_line(
                    out,
                    "bdrate",
                    &[
                        ("method", method.clone()),
                        ("metric", metric.clone()),
                        ("bdrate_percent", format!("{bd:.6}")),
                    ],
                )?;
            }
            Ok(())
        }
        Command::Plot {
            inputs,
            output,
            metric,
            csv_out,
        } => cmd_plot(&inputs, &output, metric.as_deref(), csv_out.as_deref(), out),
        Command::ToyEnc {
            input,
            output,
            q,
            inter,
        } => {
            let clip = rvid::read_file(&input)?;
            let bits = toy_encode(&clip, &ToyCodecParams::new(q, inter)?)?;
            write(&output, &bits)?;
            metric_line(out, "toy-enc", &[("bytes", bits.len().to_string())])
        }
        Command::ToyDec { input, output } => {
            let clip = toy_decode(&read(&input)?)?;
            rvid::write_file(&output, &clip)?;
            metric_line(out, "toy-dec", &[("frames", clip.frame_count().to_string())])
        }
        Command::Synth {
            output,
            width,
            height,
            frames,
            noise,
            seed,
        } => {
            if width == 0 || height == 0 || frames == 0 {
                return Err(CliError::Usage("width, height and frames must be >= 1".into()));
            }
            rvid::write_file(&output, &gradient_noise(width, height, frames, noise, seed))?;
            metric_line(out, "synth", &[("frames", frames.to_string())])
        }
    }
}
