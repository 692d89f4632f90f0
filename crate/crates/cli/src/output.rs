use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use coagem_core::Record;
use serde_json::{json, Value};

use crate::error::CliError;

/// Output location and file-name stem for one command invocation.
pub struct Sink {
    dir: PathBuf,
    stem: String,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, stem: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            stem: stem.to_string(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    /// Writes a CSV whose first line is `#schema: <schema>`.
    pub fn csv(
        &mut self,
        suffix: &str,
        schema: &str,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let path = self.path(suffix);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "#schema: {schema}")?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, suffix: &str, value: &Value) -> Result<(), CliError> {
        let path = self.path(suffix);
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}

/// Metadata block shared by every command.
pub fn metadata(command: &str, config: &impl serde::Serialize, extra: Value) -> Value {
    let mut m = json!({
        "tool": "coagem",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": config,
    });
    if let (Some(m), Value::Object(extra)) = (m.as_object_mut(), extra) {
        m.extend(extra);
    }
    m
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub const TRAJECTORY_SCHEMA: &str = "coagem.trajectory/1";

pub fn trajectory_header(track: &[usize]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "m0", "m1", "m2", "m3", "gel_fraction", "M"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(track.iter().map(|n| format!("u_{n}")));
    h
}

pub fn trajectory_row(r: &Record, track: &[usize]) -> Vec<String> {
    let mut row = vec![num(r.t)];
    row.extend(r.moments.iter().map(|&m| num(m)));
    row.push(opt(r.gel_fraction));
    row.push(num(r.interaction_mass));
    row.extend(track.iter().map(|&n| num(r.fraction(n))));
    row
}
