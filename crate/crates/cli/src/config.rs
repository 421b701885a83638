//! Run configuration: defaults, `key = value` files and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use semvid::codecs::{ExternalCodecSpec, ToyCodecParams};
use semvid::interleave::VaeGeometry;
use semvid::scaffold::{DegradationParams, FillMode};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CodecChoice {
    Toy,
    External,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub ds: usize,
    pub dt: usize,
    pub fill: FillMode,
    pub qp: i32,
    pub ratio: usize,
    pub codec: CodecChoice,
    pub toy_q: u8,
    pub toy_inter: bool,
    pub ext_encode: Option<String>,
    pub ext_decode: Option<String>,
    pub ext_workdir: Option<PathBuf>,
    pub geometry: VaeGeometry,
    pub topology: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            ds: 1,
            dt: 2,
            fill: FillMode::Forward,
            qp: 0,
            ratio: 3,
            codec: CodecChoice::Toy,
            toy_q: 16,
            toy_inter: true,
            ext_encode: None,
            ext_decode: None,
            ext_workdir: None,
            geometry: VaeGeometry::default(),
            topology: None,
        }
    }
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("{key} = {value:?}: {why}"))
}

fn int<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| bad(key, value, "not a valid integer"))
}

fn boolean(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(bad(key, value, "expected true or false")),
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "ds" => self.ds = int(key, value)?,
            "dt" => self.dt = int(key, value)?,
            "fill" => {
                self.fill = value
                    .parse()
                    .map_err(|_| bad(key, value, "expected none, zero or forward"))?
            }
            "qp" => self.qp = int(key, value)?,
            "ratio" => self.ratio = int(key, value)?,
            "codec" => {
                self.codec = match value {
                    "toy" => CodecChoice::Toy,
                    "external" => CodecChoice::External,
                    _ => return Err(bad(key, value, "expected toy or external")),
                }
            }
            "toy_q" => self.toy_q = int(key, value)?,
            "toy_inter" => self.toy_inter = boolean(key, value)?,
            "ext_encode" => self.ext_encode = Some(value.to_string()),
            "ext_decode" => self.ext_decode = Some(value.to_string()),
            "ext_workdir" => self.ext_workdir = Some(PathBuf::from(value)),
            "ft" => self.geometry.temporal_factor = int(key, value)?,
            "fs" => self.geometry.spatial_factor = int(key, value)?,
            "causal" => self.geometry.causal_first_frame = boolean(key, value)?,
            "topology" => self.topology = Some(PathBuf::from(value)),
            _ => return Err(CliError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key = value` line; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", n + 1)))?;
            self.set(k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        self.apply_text(&text)
    }

    /// Range checks shared by every command.
    pub fn validate(&self) -> Result<(), CliError> {
        for (k, v) in [("ds", self.ds), ("dt", self.dt)] {
            if !(1..=255).contains(&v) {
                return Err(bad(k, &v.to_string(), "must be in 1..=255"));
            }
        }
        if self.ratio > 255 {
            return Err(bad("ratio", &self.ratio.to_string(), "must be in 0..=255"));
        }
        if i16::try_from(self.qp).is_err() {
            return Err(bad("qp", &self.qp.to_string(), "must fit in 16 bits"));
        }
        if self.toy_q == 0 {
            return Err(bad("toy_q", "0", "must be >= 1"));
        }
        for (k, v) in [
            ("ft", self.geometry.temporal_factor),
            ("fs", self.geometry.spatial_factor),
        ] {
            if v == 0 {
                return Err(bad(k, "0", "must be >= 1"));
            }
        }
        if self.codec == CodecChoice::External && (self.ext_encode.is_none() || self.ext_decode.is_none()) {
            return Err(CliError::Config(
                "codec = external needs ext_encode and ext_decode".into(),
            ));
        }
        Ok(())
    }

    pub fn degradation(&self) -> Result<DegradationParams, CliError> {
        Ok(DegradationParams::new(self.ds, self.dt, self.fill)?)
    }

    pub fn toy_params(&self) -> Result<ToyCodecParams, CliError> {
        Ok(ToyCodecParams::new(self.toy_q, self.toy_inter)?)
    }

    pub fn external_spec(&self) -> Result<ExternalCodecSpec, CliError> {
        let (Some(enc), Some(dec)) = (&self.ext_encode, &self.ext_decode) else {
            return Err(CliError::Config("external codec commands are not configured".into()));
        };
        let workdir = self.ext_workdir.clone().unwrap_or_else(std::env::temp_dir);
        Ok(ExternalCodecSpec::new(enc.clone(), dec.clone(), workdir, self.qp)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!((c.ds, c.dt, c.fill, c.ratio), (1, 2, FillMode::Forward, 3));
        assert_eq!((c.geometry.temporal_factor, c.geometry.spatial_factor), (8, 32));
        assert!(c.validate().is_ok());
    }

    #[test]
    fn file_syntax() {
        let mut c = RunConfig::default();
        c.apply_text("# operating point\nds = 2\n dt=4 # trailing\n\nfill = zero\ncausal = false\n")
            .unwrap();
        assert_eq!((c.ds, c.dt, c.fill), (2, 4, FillMode::Zero));
        assert!(!c.geometry.causal_first_frame);
        assert!(c.apply_text("ds 2").is_err());
        assert!(c.apply_text("colour = red").is_err());
        assert!(c.apply_text("dt = -1").is_err());
    }

    #[test]
    fn range_checks() {
        let mut c = RunConfig::default();
        c.set("ds", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.set("codec", "external").unwrap();
        assert!(c.validate().is_err());
        c.set("ext_encode", "cp {in} {out}").unwrap();
        c.set("ext_decode", "cp {in} {out}").unwrap();
        assert!(c.validate().is_ok());
    }
}
