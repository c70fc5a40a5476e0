use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, OutputFormat};
use crate::error::Result;
use crate::stats::{MomentReport, TestVerdict};

/// Whether a row passes by staying within its threshold or by exceeding it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expect {
    Match,
    Detect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub statistic_id: String,
    pub estimate_re: f64,
    pub estimate_im: f64,
    pub std_error: f64,
    pub z: f64,
    pub threshold: f64,
    pub expect: Expect,
    pub pass: bool,
}

impl ReportRow {
    fn new(id: impl Into<String>, estimate: Complex64, std_error: f64, z: f64, threshold: f64, expect: Expect) -> Self {
        let pass = match expect {
            Expect::Match => z.abs() <= threshold,
            Expect::Detect => z.abs() > threshold,
        };
        Self {
            statistic_id: id.into(),
            estimate_re: estimate.re,
            estimate_im: estimate.im,
            std_error,
            z,
            threshold,
            expect,
            pass,
        }
    }

    /// A verdict on one component of `report`.
    pub fn from_verdict(v: &TestVerdict, report: &MomentReport) -> Self {
        let se = if v.id.ends_with(".im") {
            report.std_error_im
        } else if v.id.ends_with(".re") {
            report.std_error_re
        } else {
            report.std_error
        };
        Self::new(&v.id, report.estimate, se, v.z_score, v.threshold, Expect::Match)
    }

    /// Passes iff `|z| > threshold`.
    pub fn detect(v: &TestVerdict, report: &MomentReport) -> Self {
        let mut row = Self::from_verdict(v, report);
        row.expect = Expect::Detect;
        row.pass = v.z_score.abs() > v.threshold;
        row
    }

    /// A deterministic check `|value| ≤ tolerance`, reported as
    /// `z = value / tolerance` against threshold 1.
    pub fn exact(id: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(
            id,
            Complex64::new(value, 0.0),
            0.0,
            value / tolerance,
            1.0,
            Expect::Match,
        )
    }

    /// A boolean check with no associated statistic.
    pub fn flag(id: impl Into<String>, ok: bool) -> Self {
        Self::exact(id, if ok { 0.0 } else { f64::INFINITY }, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    /// The power the rows refer to; 0 for checks not tied to a power.
    pub m: u64,
    pub rows: Vec<ReportRow>,
}

impl PowerTable {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, id: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.statistic_id == id)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub tables: Vec<PowerTable>,
    pub notes: Vec<String>,
    /// The wrapped experiment of a negative control.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<ExperimentReport>>,
    pub pass: bool,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(config: &ExperimentConfig, tables: Vec<PowerTable>, notes: Vec<String>) -> Self {
        let pass = tables.iter().all(PowerTable::pass);
        Self {
            experiment: config.kind.name().to_string(),
            config: config.clone(),
            tables,
            notes,
            inner: None,
            pass,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn table(&self, m: u64) -> Option<&PowerTable> {
        self.tables.iter().find(|t| t.m == m)
    }

    pub fn failures(&self) -> impl Iterator<Item = (u64, &ReportRow)> {
        self.tables
            .iter()
            .flat_map(|t| t.rows.iter().filter(|r| !r.pass).map(move |r| (t.m, r)))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per row with the columns experiment, m, statistic_id,
    /// estimate_re, estimate_im, std_error, z, pass. Rows of a wrapped
    /// experiment follow, labelled `outer/inner`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "experiment",
            "m",
            "statistic_id",
            "estimate_re",
            "estimate_im",
            "std_error",
            "z",
            "pass",
        ])?;
        self.write_rows(&mut w, &self.experiment)?;
        w.flush()?;
        Ok(())
    }

    fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>, label: &str) -> Result<()> {
        for t in &self.tables {
            for r in &t.rows {
                w.write_record([
                    label.to_string(),
                    t.m.to_string(),
                    r.statistic_id.clone(),
                    r.estimate_re.to_string(),
                    r.estimate_im.to_string(),
                    r.std_error.to_string(),
                    r.z.to_string(),
                    r.pass.to_string(),
                ])?;
            }
        }
        if let Some(inner) = &self.inner {
            inner.write_rows(w, &format!("{label}/{}", inner.experiment))?;
        }
        Ok(())
    }

    pub fn write(&self, path: &Path, format: OutputFormat) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(file, format)
    }

    pub fn write_to<W: Write>(&self, mut out: W, format: OutputFormat) -> Result<()> {
        match format {
            OutputFormat::Json => {
                out.write_all(self.to_json()?.as_bytes())?;
                out.write_all(b"\n")?;
                out.flush()?;
                Ok(())
            }
            OutputFormat::Csv => self.write_csv(out),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MomentReport {
        MomentReport {
            id: "x".into(),
            estimate: Complex64::new(0.1, 0.2),
            std_error: 0.5,
            std_error_re: 0.3,
            std_error_im: 0.4,
            sample_size: 100,
        }
    }

    #[test]
    fn rows_follow_their_expectation() {
        let v = TestVerdict::new("x.im", 7.0, 5.0);
        let r = ReportRow::from_verdict(&v, &report());
        assert!(!r.pass);
        assert_eq!(r.std_error, 0.4);
        assert!(ReportRow::detect(&v, &report()).pass);
        assert!(ReportRow::exact("drift", 1e-13, 1e-12).pass);
        assert!(!ReportRow::exact("drift", 2e-12, 1e-12).pass);
        assert!(!ReportRow::flag("ok", false).pass);
    }

    #[test]
    fn csv_has_fixed_columns() {
        let config = ExperimentConfig::from_json(
            r#"{"kind": "eigen_convergence", "group": {"family": "U", "n": 2}, "powers": [2], "samples": 100, "seed": 1}"#,
        )
        .unwrap();
        let table = PowerTable {
            m: 2,
            rows: vec![ReportRow::exact("a", 0.0, 1.0)],
        };
        let rep = ExperimentReport::new(&config, vec![table], vec![]);
        assert!(rep.pass);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "experiment,m,statistic_id,estimate_re,estimate_im,std_error,z,pass"
        );
        assert_eq!(lines.next().unwrap(), "eigen_convergence,2,a,0,0,0,0,true");
    }
}
