//! Verdicts, time series and the files an experiment leaves behind.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{LabError, LabResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    /// Passes when `value <= tolerance`.
    AtMost,
    /// Passes when `value >= tolerance`.
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Fail,
    /// Not checked; the reason is in the note.
    Skipped,
    /// Reported for the record, never asserted.
    Recorded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub bound: Bound,
    pub status: Status,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub note: String,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Verdict {
        Verdict::judged(name, value, tolerance, Bound::AtMost)
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64) -> Verdict {
        Verdict::judged(name, value, tolerance, Bound::AtLeast)
    }

    fn judged(name: impl Into<String>, value: f64, tolerance: f64, bound: Bound) -> Verdict {
        let ok = match bound {
            Bound::AtMost => value <= tolerance,
            Bound::AtLeast => value >= tolerance,
        };
        Verdict {
            name: name.into(),
            value,
            tolerance,
            bound,
            status: if ok { Status::Pass } else { Status::Fail },
            note: String::new(),
        }
    }

    pub fn recorded(name: impl Into<String>, value: f64) -> Verdict {
        Verdict {
            name: name.into(),
            value,
            tolerance: f64::NAN,
            bound: Bound::AtMost,
            status: Status::Recorded,
            note: String::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Verdict {
        self.note = note.into();
        self
    }

    /// Keeps the measurement but withdraws the judgement.
    pub fn skipped(mut self, why: impl Into<String>) -> Verdict {
        self.status = Status::Skipped;
        self.note = why.into();
        self
    }

    pub fn passed(&self) -> bool {
        self.status != Status::Fail
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tol = if self.status == Status::Recorded {
            "-".to_string()
        } else {
            let op = match self.bound {
                Bound::AtMost => "<=",
                Bound::AtLeast => ">=",
            };
            format!("{op}{:.3e}", self.tolerance)
        };
        let status = match self.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
            Status::Recorded => "RECORDED",
        };
        write!(f, "{} {:.6e} {} {}", self.name, self.value, tol, status)?;
        if !self.note.is_empty() {
            write!(f, " # {}", self.note)?;
        }
        Ok(())
    }
}

/// Columns sharing one time axis.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Series {
    pub times: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Series {
    pub fn new(times: Vec<f64>) -> Series {
        Series {
            times,
            columns: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, values: Vec<f64>) {
        debug_assert_eq!(values.len(), self.times.len());
        self.columns.push((name.into(), values));
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn write_csv(&self, path: &Path) -> LabResult<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| LabError::Encode(e.to_string()))?;
        let mut header = vec!["t".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        w.write_record(&header)
            .map_err(|e| LabError::Encode(e.to_string()))?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{t:e}")];
            row.extend(self.columns.iter().map(|(_, v)| format!("{:e}", v[i])));
            w.write_record(&row)
                .map_err(|e| LabError::Encode(e.to_string()))?;
        }
        w.flush().map_err(|e| LabError::io(path, e))
    }
}

/// Everything one experiment produced.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub series: Option<Series>,
    pub verdicts: Vec<Verdict>,
    /// Experiment-specific results echoed into the manifest.
    pub details: serde_json::Value,
    /// Extra JSON files, written next to the standard outputs.
    pub attachments: Vec<(String, serde_json::Value)>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(Verdict::passed)
    }

    pub fn verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn verdicts_text(&self) -> String {
        self.verdicts.iter().map(|v| format!("{v}\n")).collect()
    }

    /// Writes `series.csv` (when there is a series), `manifest.json`,
    /// `verdicts.txt` and the attachments into `dir`.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig) -> LabResult<()> {
        fs::create_dir_all(dir).map_err(|e| LabError::io(dir, e))?;
        if let Some(s) = &self.series {
            s.write_csv(&dir.join("series.csv"))?;
        }
        let manifest = serde_json::json!({
            "config": cfg,
            "passed": self.passed(),
            "verdicts": self.verdicts,
            "details": self.details,
        });
        write_json(&dir.join("manifest.json"), &manifest)?;
        let path = dir.join("verdicts.txt");
        fs::write(&path, self.verdicts_text()).map_err(|e| LabError::io(&path, e))?;
        for (name, value) in &self.attachments {
            write_json(&dir.join(name), value)?;
        }
        Ok(())
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> LabResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| LabError::Encode(e.to_string()))?;
    fs::write(path, text).map_err(|e| LabError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_lines() {
        assert_eq!(
            Verdict::at_most("I2", 1e-9, 1e-8).to_string(),
            "I2 1.000000e-9 <=1.000e-8 PASS"
        );
        assert_eq!(
            Verdict::at_least("rho", 0.1, 0.25).to_string(),
            "rho 1.000000e-1 >=2.500e-1 FAIL"
        );
        let s = Verdict::at_most("Ic", 1.0, 1e-4).skipped("boundary mass");
        assert!(s.passed());
        assert!(s.to_string().ends_with("SKIPPED # boundary mass"));
        assert!(Verdict::recorded("c", 2.0)
            .to_string()
            .ends_with("- RECORDED"));
    }

    #[test]
    fn nan_never_passes() {
        assert!(!Verdict::at_most("x", f64::NAN, 1.0).passed());
        assert!(!Verdict::at_least("x", f64::NAN, 1.0).passed());
    }

    #[test]
    fn csv_has_one_row_per_time() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = Series::new(vec![0.0, 0.5, 1.0]);
        s.push("I2", vec![1.0, 1.0, 1.0]);
        s.push("M1", vec![0.0, 0.25, 0.5]);
        let path = dir.path().join("series.csv");
        s.write_csv(&path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,I2,M1");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[2], "5e-1,1e0,2.5e-1");
    }
}
