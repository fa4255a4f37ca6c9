use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// 17 significant digits, enough to round-trip any double.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Header plus rows, comma separated with LF endings.
pub struct Csv {
    writer: csv::Writer<Vec<u8>>,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer
            .write_record(header)
            .expect("writing to memory cannot fail");
        Self { writer }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.writer
            .write_record(fields)
            .expect("writing to memory cannot fail");
    }

    pub fn into_string(self) -> String {
        let bytes = self.writer.into_inner().expect("flushing to memory cannot fail");
        String::from_utf8(bytes).expect("fields are UTF-8")
    }
}

/// Pretty JSON with keys sorted at every level.
pub fn json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Check(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Check(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Usage(format!("cannot write output: {e}"));
    match path {
        Some(p) => {
            let f = File::create(p)
                .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            w.write_all(text.as_bytes()).map_err(io_err)?;
            w.flush().map_err(io_err)
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).map_err(io_err)?;
            out.flush().map_err(io_err)
        }
    }
}
