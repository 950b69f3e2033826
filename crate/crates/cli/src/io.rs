//! Artifact persistence. Every file, the manifest included, is written to a
//! temporary sibling and renamed into place, so readers never observe a
//! partial file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;

use lsrkit_core::lsr::{decode_vector, encode_vector};
use lsrkit_core::net::{decode_checkpoint, encode_checkpoint, MlpArchitecture};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Crate version and the git revision it was built from.
pub const VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), " (", env!("LSRKIT_GIT_REV"), ")");

pub fn version_string() -> String {
    format!("lsrkit {VERSION}")
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(MlpArchitecture, Vec<f64>)> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    decode_vector(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ArtifactEntry {
    pub name: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: String,
    started: String,
    finished: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    checkpoint: Option<String>,
    artifacts: &'a [ArtifactEntry],
    config: &'a RunConfig,
}

/// Output directory of one command, tracking what it has written.
pub struct RunOutput {
    dir: PathBuf,
    command: String,
    started: DateTime<Utc>,
    artifacts: Vec<ArtifactEntry>,
}

impl RunOutput {
    pub fn create(dir: &Path, command: &str) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: Utc::now(),
            artifacts: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn artifacts(&self) -> &[ArtifactEntry] {
        &self.artifacts
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.path(name);
        write_atomic(&path, bytes)?;
        self.artifacts.retain(|a| a.name != name);
        self.artifacts.push(ArtifactEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_checkpoint(&mut self, name: &str, arch: &MlpArchitecture, theta: &[f64]) -> Result<PathBuf> {
        let bytes = encode_checkpoint(arch, theta)?;
        self.write(name, &bytes)
    }

    pub fn write_vector(&mut self, name: &str, v: &[f64]) -> Result<PathBuf> {
        self.write(name, &encode_vector(v))
    }

    /// Writes the manifest last; it lists every artifact written before it.
    pub fn finish(self, cfg: &RunConfig, checkpoint: Option<&Path>) -> Result<PathBuf> {
        let stamp = |t: DateTime<Utc>| t.to_rfc3339_opts(SecondsFormat::Millis, true);
        let manifest = Manifest {
            command: &self.command,
            version: version_string(),
            started: stamp(self.started),
            finished: stamp(Utc::now()),
            checkpoint: checkpoint.map(|p| p.display().to_string()),
            artifacts: &self.artifacts,
            config: cfg,
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
        let path = self.path(MANIFEST_FILE);
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lsrkit_core::net::{init_params, Activation};

    #[test]
    fn artifacts_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = RunOutput::create(&dir.path().join("nested/run"), "lsr").unwrap();
        out.write("a.csv", b"x,y\n").unwrap();
        out.write("a.csv", b"x,y\n1,2\n").unwrap();
        let arch = MlpArchitecture::new(2, 1, vec![3], Activation::Tanh).unwrap();
        let theta = init_params(&arch, 0);
        let ck = out.write_checkpoint("model.ckpt", &arch, &theta).unwrap();
        out.write_vector("v.vec", &[1.0, 2.0]).unwrap();
        assert_eq!(out.artifacts().len(), 3);
        assert_eq!(out.artifacts()[0].bytes, 8);

        assert_eq!(read_checkpoint(&ck).unwrap(), (arch, theta));
        assert_eq!(read_vector(&out.path("v.vec")).unwrap(), vec![1.0, 2.0]);

        let run_dir = out.dir().to_path_buf();
        let manifest = out.finish(&RunConfig::default(), Some(&ck)).unwrap();
        let text = fs::read_to_string(manifest).unwrap();
        let parsed: toml::Table = text.parse().unwrap();
        assert_eq!(parsed["command"].as_str(), Some("lsr"));
        assert!(parsed["version"].as_str().unwrap().starts_with("lsrkit "));
        assert_eq!(parsed["artifacts"].as_array().unwrap().len(), 3);
        assert_eq!(parsed["config"]["lsr"]["rank"].as_integer(), Some(400));
        let leftovers: Vec<_> = fs::read_dir(&run_dir)
            .unwrap()
            .map(|e| e.unwrap().file_name().into_string().unwrap())
            .filter(|n| n.ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty(), "{leftovers:?}");
    }

    #[test]
    fn missing_files_are_io_errors() {
        let err = read_checkpoint(Path::new("/nonexistent/model.ckpt")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn corrupt_checkpoint_is_a_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.ckpt");
        fs::write(&p, b"nope").unwrap();
        assert_eq!(read_checkpoint(&p).unwrap_err().exit_code(), 1);
    }
}
