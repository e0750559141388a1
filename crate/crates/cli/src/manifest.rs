//! Plain `key=value` run records written next to every output.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};

use crate::UsageError;

pub fn path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

pub struct Manifest<'a> {
    pub command: &'a str,
    pub seed: Option<u64>,
    pub inputs: Vec<&'a Path>,
    pub output: &'a Path,
    pub params: Vec<(&'static str, String)>,
    pub argv: &'a [OsString],
}

impl Manifest<'_> {
    pub fn write(&self, elapsed: Duration) -> Result<PathBuf> {
        let mut s = String::new();
        let _ = writeln!(s, "command={}", self.command);
        let _ = writeln!(s, "version={}", env!("CARGO_PKG_VERSION"));
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "seed={seed}");
        }
        for (i, p) in self.inputs.iter().enumerate() {
            let _ = writeln!(s, "input.{i}={}", p.display());
        }
        let _ = writeln!(s, "output={}", self.output.display());
        for (k, v) in &self.params {
            let _ = writeln!(s, "param.{k}={v}");
        }
        let cwd = std::env::current_dir().context("reading the working directory")?;
        let _ = writeln!(s, "cwd={}", cwd.display());
        for (i, a) in self.argv.iter().enumerate() {
            let a = a
                .to_str()
                .filter(|a| !a.contains('\n'))
                .ok_or_else(|| UsageError(format!("argument {a:?} cannot be recorded")))?;
            let _ = writeln!(s, "arg.{i}={a}");
        }
        let _ = writeln!(s, "wall_time_s={:.3}", elapsed.as_secs_f64());
        let path = path_for(self.output);
        std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Recorded command line. Moves into the recorded working directory so
/// relative paths resolve as they did originally.
pub fn load_argv(path: &Path) -> Result<Vec<OsString>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut args: Vec<(usize, String)> = Vec::new();
    let mut cwd = None;
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        if key == "cwd" {
            cwd = Some(PathBuf::from(value));
        } else if let Some(i) = key.strip_prefix("arg.") {
            let i = i
                .parse()
                .map_err(|_| UsageError(format!("bad manifest key {key}")))?;
            args.push((i, value.to_string()));
        }
    }
    args.sort();
    if args.is_empty() || args.iter().enumerate().any(|(i, (j, _))| i != *j) {
        bail!(UsageError(format!(
            "{} has no complete argument list",
            path.display()
        )));
    }
    if let Some(dir) = cwd {
        std::env::set_current_dir(&dir).with_context(|| format!("entering {}", dir.display()))?;
    }
    Ok(args.into_iter().map(|(_, a)| a.into()).collect())
}
