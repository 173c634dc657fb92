//! File formats: CSV tables, JSON reports and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use lpdist::Extended;
use serde::Serialize;

use crate::config::RunConfig;

/// Provenance written next to (or inside) every output file.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub config: RunConfig,
    pub argv: Vec<String>,
    /// RFC 3339, UTC.
    pub timestamp: String,
    pub wall_clock_seconds: f64,
    pub tolerances: BTreeMap<&'static str, f64>,
}

/// Formats a float with 17 significant digits, which round-trips every
/// double. `+∞` is written `inf`.
pub fn float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub fn extended(x: Extended) -> String {
    match x {
        Extended::Finite(v) => float(v),
        Extended::PosInfinity => "inf".into(),
    }
}

/// A CSV table built in memory, so nothing is written until it is complete.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Table { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }
}

/// `<csv>.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes through a sibling temporary file and a rename, so a failed run
/// leaves no truncated output behind.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = fs::write(&tmp, contents).and_then(|_| fs::rename(&tmp, path));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

/// Pretty JSON with a trailing newline.
pub fn json_text(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Adds `"manifest"` to a JSON object.
pub fn with_manifest(report: &impl Serialize, manifest: &Manifest) -> serde_json::Value {
    let mut value = serde_json::to_value(report).expect("report types serialize");
    if let serde_json::Value::Object(map) = &mut value {
        map.insert("manifest".into(), serde_json::to_value(manifest).expect("manifest serializes"));
    }
    value
}

/// Six decimals with trailing zeros removed: `0.25`, `1.333333`.
pub fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2f64.sqrt(), 1e-300, 123456.789, 5e-324, -2.5] {
            let s = float(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(float(f64::INFINITY), "inf");
        assert_eq!(extended(Extended::PosInfinity), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn short_numbers() {
        assert_eq!(short(0.25), "0.25");
        assert_eq!(short(4.0 / 3.0), "1.333333");
        assert_eq!(short(2.0 / 9.0), "0.222222");
        assert_eq!(short(1.0), "1");
    }

    #[test]
    fn manifest_path_appends() {
        assert_eq!(manifest_path(Path::new("a/out.csv")), PathBuf::from("a/out.csv.manifest.json"));
    }
}
