//! Report payloads and their on-disk formats.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
    SvgData,
}

/// A named (x, y) polyline for plotting.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<[f64; 2]>,
}

/// Everything a command produces; this is what the cache stores.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Report {
    pub json: Value,
    pub csv: String,
    pub series: Vec<Series>,
}

impl Report {
    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("reports serialize")
    }

    pub fn from_value(v: Value) -> Option<Self> {
        serde_json::from_value(v).ok()
    }

    /// CSV rows, excluding the header.
    pub fn csv_rows(&self) -> usize {
        self.csv.lines().count().saturating_sub(1)
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                Ok(serde_json::to_string_pretty(&self.json).expect("reports serialize") + "\n")
            }
            Format::Csv => Ok(self.csv.clone()),
            Format::SvgData => Err(CliError::Validation(
                "svg-data writes a directory of files; pass --out".into(),
            )),
        }
    }
}

/// Writes the report to `out` (a file for csv/json, a directory of
/// `<series>.dat` files for svg-data).
pub fn write_report(report: &Report, format: Format, out: &Path) -> Result<Vec<std::path::PathBuf>, CliError> {
    if report.csv_rows() == 0 && report.series.is_empty() {
        return Err(CliError::Validation("nothing to report: empty payload".into()));
    }
    let io = |e: std::io::Error, p: &Path| CliError::Io(format!("{}: {e}", p.display()));
    match format {
        Format::Csv | Format::Json => {
            let text = report.render(format)?;
            fs::write(out, text).map_err(|e| io(e, out))?;
            Ok(vec![out.to_path_buf()])
        }
        Format::SvgData => {
            if report.series.is_empty() {
                return Err(CliError::Validation("this command produces no plot series".into()));
            }
            fs::create_dir_all(out).map_err(|e| io(e, out))?;
            let mut written = Vec::new();
            for s in &report.series {
                let path = out.join(format!("{}.dat", s.name));
                fs::write(&path, polyline(s)).map_err(|e| io(e, &path))?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

/// Whitespace-separated columns with a commented header, readable by
/// gnuplot, numpy.loadtxt and friends.
pub fn polyline(s: &Series) -> String {
    let mut out = format!("# {}\n# {} {}\n", s.name, s.x_label, s.y_label);
    for [x, y] in &s.points {
        out.push_str(&format!("{x} {y}\n"));
    }
    out
}

/// Quotes a CSV field when needed.
pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Report {
        Report {
            json: json!({"a": 1}),
            csv: "x,y\n1,2\n".into(),
            series: vec![Series {
                name: "mu".into(),
                x_label: "t".into(),
                y_label: "mu".into(),
                points: vec![[0.0, 1.0], [0.5, 0.25]],
            }],
        }
    }

    #[test]
    fn formats_write() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        write_report(&r, Format::Csv, &dir.path().join("r.csv")).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("r.csv")).unwrap(), "x,y\n1,2\n");
        let files = write_report(&r, Format::SvgData, &dir.path().join("plots")).unwrap();
        assert_eq!(files.len(), 1);
        let text = fs::read_to_string(&files[0]).unwrap();
        assert!(text.ends_with("0 1\n0.5 0.25\n"));
    }

    #[test]
    fn empty_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let r = Report {
            json: json!({}),
            csv: "x,y\n".into(),
            series: vec![],
        };
        assert!(write_report(&r, Format::Csv, &dir.path().join("r.csv")).is_err());
    }

    #[test]
    fn unwritable_path_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(write_report(&sample(), Format::Csv, &bad), Err(CliError::Io(_))));
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("plain"), "plain");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("say \"hi\""), "\"say \"\"hi\"\"\"");
    }
}
