use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use shadow_relight::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Policy {
    pub force: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Fails with a not-found error naming the first missing input.
pub fn require_inputs<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.exists() {
            return Err(io_err(p, std::io::Error::new(std::io::ErrorKind::NotFound, "input file not found")));
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// An output directory whose file names are checked before anything is written.
pub struct OutDir {
    dir: PathBuf,
}

impl OutDir {
    pub fn prepare(dir: &Path, names: &[&str], policy: Policy) -> Result<Self> {
        let out = Self { dir: dir.to_path_buf() };
        check_overwrite(names.iter().map(|n| out.path(n)), policy)?;
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub fn check_overwrite(paths: impl IntoIterator<Item = PathBuf>, policy: Policy) -> Result<()> {
    if policy.force {
        return Ok(());
    }
    for p in paths {
        if p.exists() {
            return Err(Error::Parameter(format!(
                "refusing to overwrite {} (pass --force)",
                p.display()
            )));
        }
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}
