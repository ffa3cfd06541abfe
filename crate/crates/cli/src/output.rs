use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ganlab::distributions::fmt_f64;

use crate::error::{CliError, Context, Result};

/// Writes artifacts under a run directory and remembers their paths.
///
/// A child covers a subdirectory, so per-seed workers can write on their
/// own and be merged back in seed order with [`Output::absorb`].
#[derive(Debug)]
pub struct Output {
    root: PathBuf,
    prefix: PathBuf,
    files: Vec<PathBuf>,
}

impl Output {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Output {
            root: root.into(),
            prefix: PathBuf::new(),
            files: Vec::new(),
        }
    }

    pub fn child(&self, dir: impl AsRef<Path>) -> Self {
        Output {
            root: self.root.clone(),
            prefix: self.prefix.join(dir),
            files: Vec::new(),
        }
    }

    pub fn absorb(&mut self, child: Output) {
        self.files.extend(child.files);
    }

    /// Artifact paths relative to the run directory, in writing order.
    pub fn files(&self) -> &[PathBuf] {
        &self.files
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }

    /// Streams a file through `write`, which may return library errors.
    pub fn write_with<F>(&mut self, name: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> ganlab::error::Result<()>,
    {
        let rel = self.prefix.join(name);
        let path = self.root.join(&rel);
        let io = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io)?;
        }
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        write(&mut w).context(|| format!("writing {}", path.display()))?;
        w.flush().map_err(io)?;
        self.files.push(rel);
        Ok(())
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        self.write_with(name, |w| Ok(w.write_all(text.as_bytes())?))
    }

    /// A CSV table of floats, formatted exactly.
    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        self.write_with(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for row in rows {
                c.write_record(row.iter().map(|&v| fmt_f64(v)))?;
            }
            c.flush()?;
            Ok(())
        })
    }

    /// A CSV table of preformatted cells.
    pub fn records(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        self.write_with(name, |w| {
            let mut c = csv::Writer::from_writer(w);
            c.write_record(header)?;
            for row in rows {
                c.write_record(row)?;
            }
            c.flush()?;
            Ok(())
        })
    }
}
