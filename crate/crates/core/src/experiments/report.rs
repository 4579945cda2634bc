use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Round to 12 significant digits so serialized reports diff cleanly.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// One parameter point of an inequality audit: pass ⟺ lhs − rhs ≥ −tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub param: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
}

impl ReportRow {
    pub fn new(param: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let (lhs, rhs, tolerance) = (sig12(lhs), sig12(rhs), sig12(tolerance));
        let margin = sig12(lhs - rhs);
        ReportRow { param: param.into(), lhs, rhs, margin, tolerance, pass: margin >= -tolerance, informational: false }
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }
}

/// A named assertion that is not of the lhs ≥ rhs form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, threshold: f64, pass: bool) -> Self {
        Check { name: name.into(), value: sig12(value), threshold: sig12(threshold), pass, informational: false, note: String::new() }
    }

    /// value ≤ threshold.
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, value <= threshold)
    }

    /// value ≥ threshold.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, threshold, value >= threshold)
    }

    pub fn informational(mut self) -> Self {
        self.informational = true;
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub id: String,
    pub params: BTreeMap<String, String>,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    /// Mesh levels, solver residuals and fitted constants behind the numbers.
    pub provenance: BTreeMap<String, f64>,
}

impl StabilityReport {
    pub fn new(id: &str) -> Self {
        StabilityReport { id: id.into(), params: BTreeMap::new(), rows: Vec::new(), checks: Vec::new(), provenance: BTreeMap::new() }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.params.insert(key.into(), value.to_string());
        self
    }

    pub fn record(&mut self, key: &str, value: f64) -> &mut Self {
        self.provenance.insert(key.into(), sig12(value));
        self
    }

    /// All asserted rows and checks pass (informational entries are ignored).
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.informational || r.pass) && self.checks.iter().all(|c| c.informational || c.pass)
    }

    /// Every number in the report is finite.
    pub fn is_finite(&self) -> bool {
        self.rows.iter().all(|r| [r.lhs, r.rhs, r.margin, r.tolerance].iter().all(|x| x.is_finite()))
            && self.checks.iter().all(|c| c.value.is_finite() || c.informational)
            && self.provenance.values().all(|v| v.is_finite())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("malformed report: {e}")))
    }

    pub const CSV_HEADER: &'static str = "param,lhs,rhs,margin,pass";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{},{:.11e},{:.11e},{:.11e},{}", csv_field(&r.param), r.lhs, r.rhs, r.margin, r.pass);
        }
        out
    }

    /// One-line summary for consoles.
    pub fn summary(&self) -> String {
        let failed: Vec<&str> = self
            .rows
            .iter()
            .filter(|r| !r.informational && !r.pass)
            .map(|r| r.param.as_str())
            .chain(self.checks.iter().filter(|c| !c.informational && !c.pass).map(|c| c.name.as_str()))
            .collect();
        if failed.is_empty() {
            format!("{}: PASS ({} rows, {} checks)", self.id, self.rows.len(), self.checks.len())
        } else {
            format!("{}: FAIL [{}]", self.id, failed.join(", "))
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Least-squares slope of log y against log x.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_and_serialize() {
        let mut r = StabilityReport::new("t");
        r.rows.push(ReportRow::new("a=1", 1.0 / 3.0, 0.25, 1e-3));
        r.rows.push(ReportRow::new("a,2", 0.1, 0.2, 1e-3));
        assert!(r.rows[0].pass && !r.rows[1].pass);
        assert_eq!(r.rows[0].lhs, 0.333333333333);
        let back = StabilityReport::from_json(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let csv = r.to_csv();
        assert!(csv.starts_with("param,lhs,rhs,margin,pass\n"));
        assert!(csv.contains("\"a,2\""));
        assert!(!r.passed());
    }

    #[test]
    fn slope_of_power_law() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y) - 2.0).abs() < 1e-12);
    }
}
