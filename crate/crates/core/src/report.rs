// SPDX-License-Identifier: MIT OR Apache-2.0

//! Result rows, the CSV format and the run manifest.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{input, Error, Result};

pub const CSV_HEADER: &str =
    "detector,K,delta_aod_deg,threshold,p_fa_emp,p_md_emp,p_fa_analytic,p_md_analytic,trials,wall_time_s";

/// One operating point of one detector.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub detector: String,
    pub k: usize,
    pub delta_aod_deg: f64,
    pub threshold: f64,
    pub p_fa_emp: f64,
    pub p_md_emp: f64,
    /// Present for the genie-aided detector only.
    pub p_fa_analytic: Option<f64>,
    pub p_md_analytic: Option<f64>,
    pub trials: usize,
    pub wall_time_s: f64,
}

impl ResultRow {
    /// Binomial standard error of a rate `p` estimated from this row's trials.
    pub fn std_error(&self, p: f64) -> f64 {
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// True when the row has fewer than `25 / target` trials, where the
    /// target is the larger error rate (analytic when available).
    pub fn is_underpowered(&self) -> bool {
        let target = match (self.p_fa_analytic, self.p_md_analytic) {
            (Some(a), Some(b)) => a.max(b),
            _ => self.p_fa_emp.max(self.p_md_emp),
        };
        target > 0.0 && (self.trials as f64) < required_trials(target) as f64
    }

    fn sort_key_cmp(&self, other: &ResultRow) -> Ordering {
        self.detector
            .cmp(&other.detector)
            .then(self.k.cmp(&other.k))
            .then(self.delta_aod_deg.total_cmp(&other.delta_aod_deg))
            .then(self.threshold.total_cmp(&other.threshold))
    }
}

/// Trials needed so the binomial standard error of a rate near `target` is a
/// fifth of the rate itself.
pub fn required_trials(target: f64) -> usize {
    (25.0 / target).ceil() as usize
}

pub fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(ResultRow::sort_key_cmp);
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders rows as CSV (header included), sorted by detector, K, ΔΩ and threshold.
pub fn to_csv(rows: &[ResultRow]) -> Result<String> {
    let mut sorted = rows.to_vec();
    sort_rows(&mut sorted);
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in &sorted {
        if r.detector.contains([',', '"', '\n', '\r']) {
            return input(format!("detector label {:?} cannot be written to CSV", r.detector));
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.detector,
            r.k,
            r.delta_aod_deg,
            r.threshold,
            r.p_fa_emp,
            r.p_md_emp,
            opt(r.p_fa_analytic),
            opt(r.p_md_analytic),
            r.trials,
            r.wall_time_s
        )
        .expect("writing to a String cannot fail");
    }
    Ok(out)
}

pub fn parse_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return input(format!("unexpected CSV header {other:?}")),
    }
    let float = |s: &str, line: usize| {
        s.parse::<f64>()
            .map_err(|_| Error::InvalidInput(format!("line {line}: bad number {s:?}")))
    };
    let int = |s: &str, line: usize| {
        s.parse::<usize>()
            .map_err(|_| Error::InvalidInput(format!("line {line}: bad integer {s:?}")))
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return input(format!("line {n}: expected 10 fields, found {}", f.len()));
        }
        let maybe = |s: &str| if s.is_empty() { Ok(None) } else { float(s, n).map(Some) };
        rows.push(ResultRow {
            detector: f[0].to_string(),
            k: int(f[1], n)?,
            delta_aod_deg: float(f[2], n)?,
            threshold: float(f[3], n)?,
            p_fa_emp: float(f[4], n)?,
            p_md_emp: float(f[5], n)?,
            p_fa_analytic: maybe(f[6])?,
            p_md_analytic: maybe(f[7])?,
            trials: int(f[8], n)?,
            wall_time_s: float(f[9], n)?,
        });
    }
    Ok(rows)
}

/// Plain `key = value` provenance record written next to each CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Manifest {
        let mut m = Manifest::default();
        m.push("artifact", env!("CARGO_PKG_NAME"));
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.entries.push((key.into(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| Error::InvalidInput(format!("manifest line {}: missing ' = '", i + 1)))?;
            entries.push((k.to_string(), v.to_string()));
        }
        Ok(Manifest { entries })
    }
}

pub fn manifest_path(csv_path: &Path) -> PathBuf {
    let mut name = csv_path.as_os_str().to_owned();
    name.push(".manifest");
    PathBuf::from(name)
}

/// Writes the CSV to `path` and the manifest to `<path>.manifest`.
pub fn emit_results(rows: &[ResultRow], path: &Path, manifest: &Manifest) -> Result<()> {
    if rows.is_empty() {
        return input("no result rows to write");
    }
    let csv = to_csv(rows)?;
    fs::write(path, csv)?;
    fs::write(manifest_path(path), manifest.render())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(detector: &str, analytic: bool) -> ResultRow {
        ResultRow {
            detector: detector.into(),
            k: 10,
            delta_aod_deg: 0.5,
            threshold: -1.25,
            p_fa_emp: 0.01,
            p_md_emp: 0.02,
            p_fa_analytic: analytic.then_some(0.011),
            p_md_analytic: analytic.then_some(0.019),
            trials: 1000,
            wall_time_s: 0.5,
        }
    }

    #[test]
    fn single_genie_row_layout() {
        let csv = to_csv(&[row("genie", true)]).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines.iter().all(|l| l.split(',').count() == 10));
        assert_eq!(lines[1], "genie,10,0.5,-1.25,0.01,0.02,0.011,0.019,1000,0.5");
    }

    #[test]
    fn plugin_row_has_empty_analytic_cells() {
        let csv = to_csv(&[row("shrinkage", false)]).unwrap();
        let fields: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(fields[6], "");
        assert_eq!(fields[7], "");
    }

    #[test]
    fn rejects_bad_input() {
        assert!(to_csv(&[row("a,b", false)]).is_err());
        assert!(parse_csv("nope\n").is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\ngenie,1,2\n")).is_err());
        assert!(parse_csv(&format!("{CSV_HEADER}\ngenie,x,0,0,0,0,,,1,0\n")).is_err());
    }

    #[test]
    fn emit_writes_csv_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let mut m = Manifest::new();
        m.push("seed", 42);
        emit_results(&[row("genie", true)], &path, &m).unwrap();
        let back = parse_csv(&fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(back, vec![row("genie", true)]);
        let manifest = Manifest::parse(&fs::read_to_string(manifest_path(&path)).unwrap()).unwrap();
        assert_eq!(manifest.get("seed"), Some("42"));
        assert_eq!(manifest.get("version"), Some(env!("CARGO_PKG_VERSION")));
        assert!(emit_results(&[], &path, &m).is_err());
        let bad = dir.path().join("missing").join("out.csv");
        assert!(matches!(emit_results(&[row("genie", true)], &bad, &m), Err(Error::Io(_))));
    }

    #[test]
    fn underpowered_rule() {
        let mut r = row("genie", true);
        r.trials = 1000;
        assert!(r.is_underpowered() == (1000.0 < 25.0 / 0.019));
        r.trials = 10_000;
        assert!(!r.is_underpowered());
        assert_eq!(required_trials(0.01), 2500);
    }
}
