//! Report assembly and rendering. A report is a pure function of the
//! resolved config — measurement maps are ordered, floats are printed with
//! full round-trip precision, and nothing volatile (paths, times, hosts) is
//! included — so identical configs yield byte-identical output.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::config::{GridSection, ModelSection, Suite};

/// One suite's verdict: the headline tolerance it was judged against and
/// every measurement it produced.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: &'static str,
    pub passed: bool,
    pub tolerance: f64,
    pub measurements: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl SuiteReport {
    pub fn failure(suite: Suite, tolerance: f64, message: String) -> SuiteReport {
        SuiteReport {
            suite: suite.name(),
            passed: false,
            tolerance,
            measurements: BTreeMap::new(),
            note: Some(message),
        }
    }
}

/// The whole run: an echo of the inputs that determined it, then one entry
/// per suite ordered by suite name.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub model: ModelSection,
    pub grid: GridSection,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(
        model: &ModelSection,
        grid: &GridSection,
        suites: Vec<SuiteReport>,
    ) -> RunReport {
        let requested: BTreeMap<&'static str, f64> = suites
            .iter()
            .map(|r| (r.suite, r.tolerance))
            .collect();
        let passed = suites.iter().all(|r| r.passed);
        RunReport {
            model: model.clone(),
            grid: *grid,
            tolerances: requested,
            suites,
            passed,
        }
    }

    pub fn render_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per measurement; suite status is repeated on each row so the
    /// file is self-contained when filtered.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("suite,passed,tolerance,measurement,value\n");
        for r in &self.suites {
            if r.measurements.is_empty() {
                let _ = writeln!(
                    out,
                    "{},{},{:.17e},,",
                    r.suite,
                    r.passed,
                    r.tolerance
                );
            }
            for (key, value) in &r.measurements {
                let _ = writeln!(
                    out,
                    "{},{},{:.17e},{},{:.17e}",
                    r.suite, r.passed, r.tolerance, key, value
                );
            }
        }
        let _ = writeln!(out, "overall,{},,,", self.passed);
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let width = self
            .suites
            .iter()
            .map(|r| r.suite.len())
            .max()
            .unwrap_or(5)
            .max(5);
        for r in &self.suites {
            let status = if r.passed { "PASS" } else { "FAIL" };
            let _ = write!(out, "{:width$}  {status}  tol {:.1e}", r.suite, r.tolerance);
            let mut parts: Vec<String> = r
                .measurements
                .iter()
                .map(|(k, v)| format!("{k} = {v:.3e}"))
                .collect();
            if let Some(note) = &r.note {
                parts.push(format!("note: {note}"));
            }
            if !parts.is_empty() {
                let _ = write!(out, "  [{}]", parts.join("; "));
            }
            out.push('\n');
        }
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }
}
