//! Output files are written to a temporary sibling and renamed into place,
//! so a failed command never leaves a partial file behind.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::error::CliError;

pub struct OutDir {
    dir: PathBuf,
    pending: Vec<(NamedTempFile, PathBuf)>,
}

impl OutDir {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::parse(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), pending: Vec::new() })
    }

    /// Stages `name`; nothing is visible until [`OutDir::commit`].
    pub fn stage<F>(&mut self, name: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut dyn Write) -> Result<(), CliError>,
    {
        let tmp = NamedTempFile::new_in(&self.dir)?;
        {
            let mut w = BufWriter::new(tmp.as_file());
            fill(&mut w)?;
            w.flush()?;
        }
        self.pending.push((tmp, self.dir.join(name)));
        Ok(())
    }

    pub fn stage_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        self.stage(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// Renames every staged file into place and returns the final paths.
    pub fn commit(self) -> Result<Vec<PathBuf>, CliError> {
        let mut done = Vec::with_capacity(self.pending.len());
        for (tmp, path) in self.pending {
            tmp.persist(&path).map_err(|e| CliError::parse(format!("cannot write {}: {e}", path.display())))?;
            done.push(path);
        }
        Ok(done)
    }
}
