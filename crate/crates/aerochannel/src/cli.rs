//! Command-line plumbing shared by the `aerochannel` binary: run manifests,
//! environment resolution, and the viral-load range syntax.
//!
//! Every output directory receives a `manifest.json` sufficient to reproduce
//! the run: the exact command line, the resolved environment (by hash), the
//! master seed, and the tool version. Exit codes are 0 for success, 1 for
//! validation errors (bad flags, bad configs), and 2 for runtime errors
//! (I/O failures and the like).

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::environment::{self, EnvironmentSpec};
use crate::error::{Error, Result};

pub const EXIT_OK: u8 = 0;
pub const EXIT_VALIDATION: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

/// Environment variable naming a directory of preset documents that takes
/// precedence over the builtin presets when resolving `--env NAME`.
pub const PRESET_DIR_ENV: &str = "AEROCHANNEL_PRESET_DIR";

/// Map an error to the documented process exit code: configuration and
/// parameter problems are validation failures, I/O problems are runtime
/// failures.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

/// Reproducibility record written next to every output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    /// The argv that produced the outputs.
    pub command: Vec<String>,
    /// `--env` argument as given (path or preset name).
    pub env: String,
    /// FNV-1a 64 hash of the resolved environment document.
    pub config_hash: String,
    pub master_seed: u64,
    pub runs: u32,
    pub workers: Option<usize>,
    /// Files written, relative to the manifest's directory.
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub duration_seconds: f64,
    pub created_unix_s: u64,
}

impl RunManifest {
    /// `config_document` is whatever text fully determines the run given the
    /// command line: the resolved environment JSON, or the parameter record
    /// of an analytic evaluation.
    pub fn new(env_arg: &str, config_document: &str, master_seed: u64, runs: u32) -> Self {
        Self {
            command: std::env::args().collect(),
            env: env_arg.to_string(),
            config_hash: format!("{:016x}", fnv1a64(config_document.as_bytes())),
            master_seed,
            runs,
            workers: None,
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            duration_seconds: 0.0,
            created_unix_s: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        Ok(path)
    }
}

/// FNV-1a, 64-bit. Good enough to fingerprint a config document.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Resolve `--env`: an existing file path wins, then `NAME.json` under
/// [`PRESET_DIR_ENV`] if that variable is set, then the builtin presets.
pub fn resolve_env(arg: &str) -> Result<EnvironmentSpec> {
    let as_path = Path::new(arg);
    if as_path.is_file() {
        let text = std::fs::read_to_string(as_path)?;
        return EnvironmentSpec::from_json(&text);
    }
    if let Ok(dir) = std::env::var(PRESET_DIR_ENV) {
        let candidate = Path::new(&dir).join(format!("{arg}.json"));
        if candidate.is_file() {
            let text = std::fs::read_to_string(&candidate)?;
            return EnvironmentSpec::from_json(&text);
        }
    }
    environment::builtin(arg)
}

/// Parse a load range `start:stop:points[,log|lin]` into explicit values.
/// `log` spacing is the default; a single value may be given bare.
pub fn parse_loads(spec: &str) -> Result<Vec<f64>> {
    let bad = |msg: &str| Error::InvalidParam(format!("loads `{spec}`: {msg}"));

    let (range, scale) = match spec.rsplit_once(',') {
        Some((r, s)) => (r, s),
        None => (spec, "log"),
    };
    if !matches!(scale, "log" | "lin") {
        return Err(bad("scale must be `log` or `lin`"));
    }

    let parts: Vec<&str> = range.split(':').collect();
    match parts.as_slice() {
        [single] => {
            let v: f64 = single
                .parse()
                .map_err(|_| bad("expected a number or start:stop:points"))?;
            if v < 0.0 || !v.is_finite() {
                return Err(bad("load must be >= 0"));
            }
            Ok(vec![v])
        }
        [start, stop, points] => {
            let start: f64 = start.parse().map_err(|_| bad("bad start"))?;
            let stop: f64 = stop.parse().map_err(|_| bad("bad stop"))?;
            let points: usize = points.parse().map_err(|_| bad("bad point count"))?;
            if points == 0 {
                return Err(bad("point count must be >= 1"));
            }
            if !(start.is_finite() && stop.is_finite()) || start < 0.0 || stop < start {
                return Err(bad("need 0 <= start <= stop"));
            }
            if points == 1 {
                return Ok(vec![start]);
            }
            let values = match scale {
                "lin" => {
                    let step = (stop - start) / (points - 1) as f64;
                    (0..points).map(|i| start + step * i as f64).collect()
                }
                _ => {
                    if start <= 0.0 {
                        return Err(bad("log spacing needs start > 0"));
                    }
                    let ratio = (stop / start).ln() / (points - 1) as f64;
                    (0..points)
                        .map(|i| start * (ratio * i as f64).exp())
                        .collect()
                }
            };
            Ok(values)
        }
        _ => Err(bad("expected start:stop:points[,log|lin]")),
    }
}

/// Turn a receiver id into something safe for a file name.
pub fn sanitize_filename(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// A gnuplot script plotting every rate-curve CSV in the output directory.
pub fn gnuplot_script(rate_files: &[String]) -> String {
    let mut s = String::from(
        "# Generated plot script: run `gnuplot plot.gp` in this directory.\n\
         set datafile separator ','\n\
         set logscale x\n\
         set xlabel 'viral load (copies/mL)'\n\
         set ylabel 'infection rate R (bits/event)'\n\
         set y2label 'linear measure (prob/event)'\n\
         set y2tics\n\
         set key left top\n",
    );
    s.push_str("plot ");
    let mut first = true;
    for f in rate_files {
        if !first {
            s.push_str(", \\\n     ");
        }
        first = false;
        s.push_str(&format!(
            "'{f}' using 1:2 with lines title '{f} R' axes x1y1, \\\n     \
             '{f}' using 1:3 with lines dashtype 2 title '{f} linear' axes x1y2"
        ));
    }
    s.push('\n');
    s
}
