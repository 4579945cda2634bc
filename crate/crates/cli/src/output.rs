//! Files written by a run, console lines, and the reproducibility manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use specgeom_core::experiments::StabilityReport;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Twelve significant digits.
pub fn fmt12(x: f64) -> String {
    format!("{x:.11e}")
}

pub fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Structured text form of a report.
pub fn report_text(rep: &StabilityReport) -> String {
    let mut s = format!("report {}\n", rep.id);
    for (k, v) in &rep.params {
        s.push_str(&format!("param {k} = {v}\n"));
    }
    for r in &rep.rows {
        s.push_str(&format!(
            "row {} | lhs {} | rhs {} | margin {} | tol {} | {}{}\n",
            r.param,
            fmt12(r.lhs),
            fmt12(r.rhs),
            fmt12(r.margin),
            fmt12(r.tolerance),
            if r.pass { "pass" } else { "FAIL" },
            if r.informational { " (informational)" } else { "" }
        ));
    }
    for c in &rep.checks {
        s.push_str(&format!(
            "check {} | value {} | threshold {} | {}{}{}\n",
            c.name,
            fmt12(c.value),
            fmt12(c.threshold),
            if c.pass { "pass" } else { "FAIL" },
            if c.informational { " (informational)" } else { "" },
            if c.note.is_empty() { String::new() } else { format!(" — {}", c.note) }
        ));
    }
    for (k, v) in &rep.provenance {
        s.push_str(&format!("provenance {k} = {}\n", fmt12(*v)));
    }
    s.push_str(&format!("summary {}\n", rep.summary()));
    s
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a std::collections::BTreeMap<String, String>,
    config_sha256: String,
    seed: &'a str,
    deterministic: bool,
    threads: usize,
    outputs: &'a [String],
}

#[derive(Default)]
pub struct Outputs {
    pub files: Vec<String>,
}

impl Outputs {
    /// All console output goes through one locked writer.
    pub fn say(&self, line: impl AsRef<str>) {
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}", line.as_ref());
    }

    /// `out` if set, else `<out-dir>/<default>`.
    pub fn target(&self, cfg: &RunConfig, default: &str) -> PathBuf {
        match cfg.raw("out") {
            Some(p) => PathBuf::from(p),
            None => cfg.out_dir().join(default),
        }
    }

    pub fn prepare(&self, path: &Path) -> CliResult<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CliError::Write { path: parent.display().to_string(), source: e })?;
        }
        Ok(())
    }

    pub fn write_text(&mut self, path: &Path, text: &str) -> CliResult<()> {
        self.prepare(path)?;
        std::fs::write(path, text).map_err(|e| CliError::Write { path: path.display().to_string(), source: e })?;
        self.files.push(path.display().to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(format!("serialization failed: {e}")))?;
        self.write_text(path, &(text + "\n"))
    }

    /// `<id>.json`, `<id>.csv` and `<id>.txt` in `dir`; returns the paths.
    pub fn write_report(&mut self, dir: &Path, rep: &StabilityReport) -> CliResult<Vec<String>> {
        let start = self.files.len();
        self.write_text(&dir.join(format!("{}.json", rep.id)), &(rep.to_json()? + "\n"))?;
        self.write_text(&dir.join(format!("{}.csv", rep.id)), &rep.to_csv())?;
        self.write_text(&dir.join(format!("{}.txt", rep.id)), &report_text(rep))?;
        Ok(self.files[start..].to_vec())
    }

    pub fn write_manifest(&mut self, path: &Path, cfg: &RunConfig, deterministic: bool, threads: usize, outputs: &[String]) -> CliResult<()> {
        let m = Manifest {
            tool: "specgeom",
            version: env!("CARGO_PKG_VERSION"),
            command: &cfg.command,
            config: &cfg.values,
            config_sha256: cfg.sha256(),
            seed: cfg.raw("seed").unwrap_or(""),
            deterministic,
            threads,
            outputs,
        };
        self.write_json(path, &m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use specgeom_core::experiments::{Check, ReportRow};

    #[test]
    fn twelve_digit_formatting() {
        assert_eq!(fmt12(8.0 * std::f64::consts::PI), "2.51327412287e1");
        assert_eq!(csv_field("a,b"), "\"a,b\"");
    }

    #[test]
    fn text_report_marks_informational_entries() {
        let mut rep = StabilityReport::new("demo");
        rep.rows.push(ReportRow::new("x", 1.0, 2.0, 0.0).informational());
        rep.checks.push(Check::at_most("c", 0.5, 1.0));
        let t = report_text(&rep);
        assert!(t.contains("FAIL (informational)"));
        assert!(t.contains("summary demo: PASS"));
    }
}
