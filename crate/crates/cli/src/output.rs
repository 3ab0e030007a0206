//! Output files. Everything is written in a fixed order with deterministic
//! formatting so repeated runs are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use cvphase::phase_space::io::{write_field, FieldFormat};
use cvphase::phase_space::WignerField;
use serde::Serialize;

use crate::error::CliError;

/// Writes into one directory and remembers what it wrote.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        fs::write(self.dir.join(name), serde_json::to_string_pretty(value)? + "\n")?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    /// CSV with a header known only at run time.
    pub fn csv_records(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.dir.join(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn field(&mut self, stem: &str, field: &WignerField, format: FieldFormat) -> Result<(), CliError> {
        let header = write_field(field, &self.dir, stem, format)?;
        let data = match format {
            FieldFormat::Csv => format!("{stem}.csv"),
            FieldFormat::Binary => format!("{stem}.bin"),
        };
        self.files.push(
            header
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
        );
        self.files.push(data);
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}
