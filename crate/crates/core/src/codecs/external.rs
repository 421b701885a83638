//! Adapter for video codecs that run as external commands.
//!
//! The clip is handed over as an `RVID` file; the adapter never looks inside
//! the bitstream the command produces. Command templates are run through
//! `sh -c` after substituting `{in}`, `{out}` and `{qp}`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::process::Command;

use thiserror::Error;

use crate::rvid::{self, RvidError};
use crate::video::VideoClip;

#[derive(Debug, Error)]
pub enum ExternalCodecError {
    #[error("command template {0:?} must contain {{in}} and {{out}}")]
    BadTemplate(String),
    #[error("failed to launch {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: io::Error,
    },
    #[error("{command:?} exited with status {code:?}: {stderr}")]
    ExitStatus {
        command: String,
        code: Option<i32>,
        stderr: String,
    },
    #[error("{command:?} did not produce {path}")]
    MissingOutput { command: String, path: PathBuf },
    #[error("decoder output is not a valid RVID file: {0}")]
    Rvid(#[from] RvidError),
    #[error("working directory: {0}")]
    Io(#[source] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCodecSpec {
    pub encode_cmd: String,
    pub decode_cmd: String,
    pub workdir: PathBuf,
    pub qp: i32,
}

impl ExternalCodecSpec {
    pub fn new(
        encode_cmd: impl Into<String>,
        decode_cmd: impl Into<String>,
        workdir: impl Into<PathBuf>,
        qp: i32,
    ) -> Result<Self, ExternalCodecError> {
        let spec = Self {
            encode_cmd: encode_cmd.into(),
            decode_cmd: decode_cmd.into(),
            workdir: workdir.into(),
            qp,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExternalCodecError> {
        for t in [&self.encode_cmd, &self.decode_cmd] {
            if !(t.contains("{in}") && t.contains("{out}")) {
                return Err(ExternalCodecError::BadTemplate(t.clone()));
            }
        }
        Ok(())
    }
}

fn shell_quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', r"'\''"))
}

fn run(template: &str, input: &Path, output: &Path, qp: i32, cwd: &Path) -> Result<(), ExternalCodecError> {
    let command = template
        .replace("{in}", &shell_quote(input))
        .replace("{out}", &shell_quote(output))
        .replace("{qp}", &qp.to_string());
    let result = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(cwd)
        .output()
        .map_err(|source| ExternalCodecError::Spawn {
            command: command.clone(),
            source,
        })?;
    if !result.status.success() {
        return Err(ExternalCodecError::ExitStatus {
            command,
            code: result.status.code(),
            stderr: String::from_utf8_lossy(&result.stderr).trim().to_string(),
        });
    }
    if !output.is_file() {
        return Err(ExternalCodecError::MissingOutput {
            command,
            path: output.to_path_buf(),
        });
    }
    Ok(())
}

/// Each call works in its own scratch directory under `spec.workdir`, so
/// concurrent invocations sharing a workdir do not collide.
fn scratch(spec: &ExternalCodecSpec) -> Result<tempfile::TempDir, ExternalCodecError> {
    fs::create_dir_all(&spec.workdir).map_err(ExternalCodecError::Io)?;
    tempfile::Builder::new()
        .prefix("extcodec-")
        .tempdir_in(&spec.workdir)
        .map_err(ExternalCodecError::Io)
}

pub fn external_encode(clip: &VideoClip, spec: &ExternalCodecSpec) -> Result<Vec<u8>, ExternalCodecError> {
    spec.validate()?;
    let dir = scratch(spec)?;
    let input = dir.path().join("input.rvid");
    let output = dir.path().join("output.bin");
    fs::write(&input, rvid::to_bytes(clip)?).map_err(ExternalCodecError::Io)?;
    run(&spec.encode_cmd, &input, &output, spec.qp, dir.path())?;
    fs::read(&output).map_err(ExternalCodecError::Io)
}

pub fn external_decode(bits: &[u8], spec: &ExternalCodecSpec) -> Result<VideoClip, ExternalCodecError> {
    spec.validate()?;
    let dir = scratch(spec)?;
    let input = dir.path().join("input.bin");
    let output = dir.path().join("output.rvid");
    fs::write(&input, bits).map_err(ExternalCodecError::Io)?;
    run(&spec.decode_cmd, &input, &output, spec.qp, dir.path())?;
    let bytes = fs::read(&output).map_err(ExternalCodecError::Io)?;
    Ok(rvid::from_bytes(&bytes)?)
}
