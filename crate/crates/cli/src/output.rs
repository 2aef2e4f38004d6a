use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::manifest::RunManifest;
use crate::CliError;

/// `result` as a JSON object with the manifest under `"manifest"`.
pub fn json_with_manifest<T: Serialize>(result: &T, manifest: &RunManifest) -> Result<String, CliError> {
    let mut v = serde_json::to_value(result).map_err(CliError::io)?;
    let m = serde_json::to_value(manifest).map_err(CliError::io)?;
    match &mut v {
        Value::Object(map) => {
            map.insert("manifest".into(), m);
        }
        other => {
            v = serde_json::json!({ "result": other.take(), "manifest": m });
        }
    }
    let mut s = serde_json::to_string_pretty(&v).map_err(CliError::io)?;
    s.push('\n');
    Ok(s)
}

/// CSV text with the manifest as leading comment lines.
pub fn csv_with_manifest(header: &[&str], rows: &[Vec<String>], manifest: &RunManifest) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(CliError::io)?;
    for r in rows {
        w.write_record(r).map_err(CliError::io)?;
    }
    let body = w.into_inner().map_err(|e| CliError::io(e.into_error()))?;
    let mut out = manifest.comment_block();
    out.push_str(&String::from_utf8_lossy(&body));
    Ok(out)
}

/// Writes to `path`, or stdout when absent.
pub fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_file(p, text),
        None => io::stdout().write_all(text.as_bytes()).map_err(CliError::io),
    }
}

pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io)?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub struct Series<'a> {
    pub x: usize,
    pub y: usize,
    pub title: &'a str,
    pub style: &'a str,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub logscale_x: bool,
    pub series: Vec<Series<'a>>,
}

/// gnuplot script drawing columns of `csv_name` (1-based) into `<stem>.png`.
/// The header row and `#` lines are skipped by gnuplot as non-numeric data.
pub fn gnuplot_script(csv_name: &str, plot: &Plot, manifest: &RunManifest) -> String {
    let stem = csv_name.strip_suffix(".csv").unwrap_or(csv_name);
    let mut s = manifest.comment_block();
    s.push_str("set datafile separator ','\n");
    s.push_str("set terminal pngcairo size 900,600\n");
    s.push_str(&format!("set output '{stem}.png'\n"));
    s.push_str(&format!("set title '{}'\n", plot.title));
    s.push_str(&format!("set xlabel '{}'\n", plot.xlabel));
    s.push_str(&format!("set ylabel '{}'\n", plot.ylabel));
    s.push_str("set key outside right\nset grid\n");
    if plot.logscale_x {
        s.push_str("set logscale x\n");
    }
    let parts: Vec<String> = plot
        .series
        .iter()
        .map(|p| {
            format!(
                "'{csv_name}' using {}:{} with {} title '{}'",
                p.x, p.y, p.style, p.title
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", parts.join(", \\\n     ")));
    s
}
