//! Verdict records for batch runs, written as CSV or JSON lines.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticParams, AsymptoticVerdict};

pub const CSV_HEADER: [&str; 10] = [
    "command",
    "check",
    "nets",
    "compact",
    "test",
    "slope",
    "classification",
    "passed",
    "detail",
    "params",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub command: String,
    pub check: String,
    pub nets: Vec<String>,
    /// Id of the compact set the check sampled.
    pub compact: String,
    /// Test or route id within the check.
    pub test: String,
    pub slope: Option<f64>,
    pub classification: Option<String>,
    pub passed: bool,
    pub detail: String,
    pub params: BTreeMap<String, f64>,
}

impl VerdictRecord {
    pub fn new(command: &str, check: &str, nets: &[&str], passed: bool) -> Self {
        VerdictRecord {
            command: command.into(),
            check: check.into(),
            nets: nets.iter().map(|s| s.to_string()).collect(),
            compact: String::new(),
            test: String::new(),
            slope: None,
            classification: None,
            passed,
            detail: String::new(),
            params: BTreeMap::new(),
        }
    }

    pub fn compact(mut self, id: &str) -> Self {
        self.compact = id.into();
        self
    }

    pub fn test(mut self, id: &str) -> Self {
        self.test = id.into();
        self
    }

    pub fn detail(mut self, d: impl Into<String>) -> Self {
        self.detail = d.into();
        self
    }

    pub fn param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    /// Slope, classification and estimator parameters of `v`.
    pub fn verdict(mut self, v: &AsymptoticVerdict) -> Self {
        self.slope = Some(v.slope);
        self.classification = Some(v.classification.to_string());
        self.estimator(&v.params)
    }

    pub fn estimator(mut self, p: &AsymptoticParams) -> Self {
        self.params.insert("n_max".into(), p.n_max as f64);
        self.params.insert("m_max".into(), p.m_max as f64);
        self.params.insert("fit_tolerance".into(), p.fit_tolerance);
        self
    }

    fn csv_fields(&self) -> [String; 10] {
        let params = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v:e}"))
            .collect::<Vec<_>>()
            .join(";");
        [
            self.command.clone(),
            self.check.clone(),
            self.nets.join(" | "),
            self.compact.clone(),
            self.test.clone(),
            self.slope.map(|s| format!("{s:e}")).unwrap_or_default(),
            self.classification.clone().unwrap_or_default(),
            self.passed.to_string(),
            self.detail.clone(),
            params,
        ]
    }
}

pub fn write_csv<W: Write>(w: W, records: &[VerdictRecord]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in records {
        out.write_record(r.csv_fields())?;
    }
    out.flush()
}

pub fn write_jsonl<W: Write>(mut w: W, records: &[VerdictRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        writeln!(w)?;
    }
    Ok(())
}

pub fn read_jsonl(text: &str) -> serde_json::Result<Vec<VerdictRecord>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{estimate_growth_order, EpsGrid};

    fn sample() -> VerdictRecord {
        let grid = EpsGrid::default();
        let s = grid.sample(|e| Ok(e.powi(-3))).unwrap();
        let v = estimate_growth_order(&s, &grid, &AsymptoticParams::default()).unwrap();
        VerdictRecord::new("classify", "moderate", &["eps^-3 * sin(x)"], true)
            .compact("K1")
            .test("chart")
            .verdict(&v)
            .detail("a, b")
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![sample(), VerdictRecord::new("equiv", "routes", &["u", "v"], false)];
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_jsonl(&text).unwrap(), recs);
    }

    #[test]
    fn csv_quotes_commas() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[sample()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER.join(","));
        let row = lines.next().unwrap();
        assert!(row.starts_with("classify,moderate,eps^-3 * sin(x),K1,chart,"));
        assert!(row.contains("Moderate(3)"));
        assert!(row.contains("\"a, b\""));
    }
}
