//! CSV/JSON artifacts and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// A number with 17 significant digits, `.` decimal separator.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// A CSV table with LF line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
            columns: header.len(),
        }
    }

    pub fn row(&mut self, values: &[f64]) {
        assert_eq!(values.len(), self.columns, "row width differs from header");
        let cells: Vec<String> = values.iter().map(|&v| fmt_num(v)).collect();
        let _ = writeln!(self.text, "{}", cells.join(","));
    }

    /// A row whose first column is a label.
    pub fn labelled_row(&mut self, label: &str, values: &[f64]) {
        assert_eq!(values.len() + 1, self.columns, "row width differs from header");
        debug_assert!(!label.contains([',', '\n', '"']));
        let _ = write!(self.text, "{label}");
        for &v in values {
            let _ = write!(self.text, ",{}", fmt_num(v));
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// One asserted check of a pipeline.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    /// Bound the measurement was compared with.
    pub limit: f64,
}

/// Everything a pipeline produced, before it touches the disk.
#[derive(Debug, Clone, Default)]
pub struct Bundle {
    /// (file name, contents), written in order.
    pub files: Vec<(String, String)>,
    pub invariants: Vec<Invariant>,
    /// Report-only quantities; they never affect the exit code.
    pub reports: serde_json::Map<String, Value>,
    /// Long-format plot rows (series, x, y).
    pub plot: Vec<(String, f64, f64)>,
}

impl Bundle {
    pub fn csv(&mut self, name: impl Into<String>, csv: Csv) {
        self.files.push((name.into(), csv.text));
    }

    pub fn json(&mut self, name: impl Into<String>, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON value serializes");
        text.push('\n');
        self.files.push((name.into(), text));
    }

    /// Records `measured <= limit` (or `>=` when `at_least`).
    pub fn check(&mut self, name: impl Into<String>, measured: f64, limit: f64, at_least: bool) {
        let pass = if at_least { measured >= limit } else { measured <= limit };
        self.invariants.push(Invariant {
            name: name.into(),
            pass,
            measured,
            limit,
        });
    }

    /// Records a boolean check; `measured` is 1 for pass, 0 for fail.
    pub fn check_flag(&mut self, name: impl Into<String>, pass: bool) {
        self.invariants.push(Invariant {
            name: name.into(),
            pass,
            measured: if pass { 1.0 } else { 0.0 },
            limit: 1.0,
        });
    }

    pub fn report(&mut self, key: &str, value: impl Serialize) {
        self.reports
            .insert(key.into(), serde_json::to_value(value).expect("report serializes"));
    }

    pub fn plot_series(&mut self, series: &str, points: impl IntoIterator<Item = (f64, f64)>) {
        self.plot
            .extend(points.into_iter().map(|(x, y)| (series.to_string(), x, y)));
    }

    pub fn all_pass(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }

    /// The `series,x,y` table.
    pub fn plot_csv(&self) -> Csv {
        let mut csv = Csv::new(&["series", "x", "y"]);
        for (s, x, y) in &self.plot {
            csv.labelled_row(s, &[*x, *y]);
        }
        csv
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    kind: &'a str,
    config_hash: &'a str,
    wall_time_s: f64,
    all_pass: bool,
    artifacts: Vec<&'a str>,
    invariants: &'a [Invariant],
    reports: &'a serde_json::Map<String, Value>,
}

/// Writes the artifacts, `plot.csv` and finally `manifest.json`.
pub fn write_bundle(
    bundle: &Bundle,
    dir: &Path,
    kind: &str,
    config_hash: &str,
    wall_time_s: f64,
) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    for (name, text) in &bundle.files {
        fs::write(dir.join(name), text)?;
    }
    fs::write(dir.join("plot.csv"), bundle.plot_csv().as_str())?;
    let mut artifacts: Vec<&str> = bundle.files.iter().map(|(n, _)| n.as_str()).collect();
    artifacts.push("plot.csv");
    let manifest = Manifest {
        kind,
        config_hash,
        wall_time_s,
        all_pass: bundle.all_pass(),
        artifacts,
        invariants: &bundle.invariants,
        reports: &bundle.reports,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_keep_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_num(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_num(f64::NAN), "NaN");
        let x = std::f64::consts::PI * 1e-300;
        assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn csv_uses_lf_and_header_order() {
        let mut c = Csv::new(&["a", "R", "value"]);
        c.row(&[1.0, 2.0, 3.0]);
        assert!(c.as_str().starts_with("a,R,value\n"));
        assert!(!c.as_str().contains('\r'));
        assert_eq!(c.as_str().lines().count(), 2);
    }

    #[test]
    fn empty_bundle_plots_header_only() {
        assert_eq!(Bundle::default().plot_csv().as_str(), "series,x,y\n");
    }
}
