//! Minimal CSV writing with RFC-4180-style quoting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub fn quote_field(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> std::io::Result<Self> {
        let mut w = CsvWriter {
            out: BufWriter::new(File::create(path)?),
        };
        w.write_row(header)?;
        Ok(w)
    }

    pub fn write_row<S: AsRef<str>>(&mut self, fields: &[S]) -> std::io::Result<()> {
        let line: Vec<String> = fields.iter().map(|f| quote_field(f.as_ref())).collect();
        writeln!(self.out, "{}", line.join(","))
    }

    pub fn finish(mut self) -> std::io::Result<()> {
        self.out.flush()
    }
}

/// Numeric formatting used across all CSV output: decimal point, no locale.
pub fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.10e}")
    }
}
