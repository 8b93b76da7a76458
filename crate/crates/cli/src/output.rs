//! CSV and JSON writers. Floats carry 17 significant digits so reruns compare
//! byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Empty cell for a value that was not computed.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Csv {
    out: BufWriter<File>,
    path: String,
    columns: usize,
}

impl Csv {
    pub fn create(path: &Path, header: &[String]) -> Result<Self, CliError> {
        let file = File::create(path).map_err(|e| CliError::io(format!("cannot create {}: {e}", path.display())))?;
        let mut csv = Csv { out: BufWriter::new(file), path: path.display().to_string(), columns: header.len() };
        csv.line(header)?;
        Ok(csv)
    }

    pub fn row(&mut self, cells: &[String]) -> Result<(), CliError> {
        debug_assert_eq!(cells.len(), self.columns);
        self.line(cells)
    }

    fn line(&mut self, cells: &[String]) -> Result<(), CliError> {
        writeln!(self.out, "{}", cells.join(",")).map_err(|e| CliError::io(format!("writing {}: {e}", self.path)))
    }

    pub fn finish(mut self) -> Result<(), CliError> {
        self.out.flush().map_err(|e| CliError::io(format!("writing {}: {e}", self.path)))
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(format!("serializing {}: {e}", path.display())))?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))
}
