//! CSV and JSON rendering and atomic file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::params::Params;
use crate::CliError;

pub const BANNER: &str = "# sfd-lab";
/// Ends the echoed config in a CSV header.
pub const SEPARATOR: &str = "# --";

/// One output file: named columns, named scalars and free-form notes.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub columns: Vec<(String, Vec<f64>)>,
    pub scalars: Vec<(String, f64)>,
    pub notes: Vec<String>,
    /// Arrays of their own length, JSON only (CSV carries them as notes).
    pub arrays: Vec<(String, Vec<f64>)>,
}

impl Report {
    pub fn column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn scalar(mut self, name: &str, value: f64) -> Self {
        self.scalars.push((name.to_string(), value));
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// 12 significant digits, `.` as decimal point.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

pub fn render_csv(p: &Params, r: &Report) -> String {
    let mut s = format!("{BANNER} {}\n", env!("CARGO_PKG_VERSION"));
    for line in p.echo() {
        s.push_str(&format!("# {line}\n"));
    }
    s.push_str(SEPARATOR);
    s.push('\n');
    for (k, v) in &r.scalars {
        s.push_str(&format!("# {k}: {}\n", fmt(*v)));
    }
    for n in &r.notes {
        s.push_str(&format!("# {n}\n"));
    }
    let names: Vec<&str> = r.columns.iter().map(|(n, _)| n.as_str()).collect();
    s.push_str(&names.join(","));
    s.push('\n');
    let rows = r.columns.first().map_or(0, |c| c.1.len());
    for i in 0..rows {
        let row: Vec<String> = r.columns.iter().map(|(_, c)| fmt(c[i])).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn number(x: f64) -> Value {
    // same rounding as the CSV output
    fmt(x)
        .parse::<f64>()
        .ok()
        .and_then(Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

pub fn render_json(p: &Params, r: &Report) -> String {
    let mut m = Map::new();
    m.insert("command".into(), Value::String(p.command.into()));
    m.insert(
        "config".into(),
        Value::Array(p.echo().into_iter().map(Value::String).collect()),
    );
    for (k, v) in &r.scalars {
        m.insert(k.clone(), number(*v));
    }
    for (k, c) in r.columns.iter().chain(&r.arrays) {
        m.insert(k.clone(), Value::Array(c.iter().map(|x| number(*x)).collect()));
    }
    if !r.notes.is_empty() {
        m.insert(
            "notes".into(),
            Value::Array(r.notes.iter().cloned().map(Value::String).collect()),
        );
    }
    let mut s = serde_json::to_string_pretty(&Value::Object(m)).expect("serialisable");
    s.push('\n');
    s
}

/// `out.csv` with suffix `density-1` gives `out.density-1.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}.{suffix}.{}", ext.to_string_lossy()),
        None => format!("{stem}.{suffix}"),
    };
    path.with_file_name(name)
}

fn temp_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.tmp-{}", std::process::id()))
}

/// Writes every file to a temporary sibling first and renames once all
/// succeeded; on any failure the temporaries and already renamed files go.
pub fn write_all(files: &[(PathBuf, String)]) -> Result<(), CliError> {
    let mut temps = Vec::new();
    let io = |p: &Path, e: std::io::Error| CliError::Io(format!("{}: {e}", p.display()));
    let result = (|| {
        for (path, text) in files {
            let tmp = temp_path(path);
            temps.push(tmp.clone());
            let mut f = fs::File::create(&tmp).map_err(|e| io(&tmp, e))?;
            f.write_all(text.as_bytes()).map_err(|e| io(&tmp, e))?;
            f.sync_all().map_err(|e| io(&tmp, e))?;
        }
        Ok(())
    })();
    if let Err(e) = result {
        for t in &temps {
            let _ = fs::remove_file(t);
        }
        return Err(e);
    }
    for (i, (path, _)) in files.iter().enumerate() {
        if let Err(e) = fs::rename(&temps[i], path) {
            for t in &temps[i..] {
                let _ = fs::remove_file(t);
            }
            for (p, _) in &files[..i] {
                let _ = fs::remove_file(p);
            }
            return Err(io(path, e));
        }
    }
    Ok(())
}
