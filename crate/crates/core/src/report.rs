//! Residual check reports shared by the library and the command line.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::sampling::Residual;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_residual: f64,
    pub tolerance: f64,
    pub witness: Option<Vec<f64>>,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub detail: Option<String>,
    #[serde(skip_serializing_if = "Bound::is_upper", default)]
    pub bound: Bound,
}

/// How the residual is judged against the tolerance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bound {
    /// Passes when the residual is at most the tolerance.
    #[default]
    Upper,
    /// Passes when the residual exceeds the tolerance.
    Lower,
    /// The verdict is fixed when the check is made.
    Fixed,
}

impl Bound {
    pub fn is_upper(&self) -> bool {
        *self == Bound::Upper
    }
}

impl Check {
    pub fn from_residual(name: impl Into<String>, residual: Residual, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            passed: residual.within(tolerance),
            max_residual: residual.max,
            tolerance,
            witness: residual.witness,
            detail: None,
            bound: Bound::Upper,
        }
    }

    /// Judge again against a different tolerance.
    pub fn rejudge(&mut self, tolerance: f64) {
        match self.bound {
            Bound::Upper => self.passed = self.max_residual <= tolerance,
            Bound::Lower => self.passed = self.max_residual > tolerance,
            Bound::Fixed => return,
        }
        self.tolerance = tolerance;
    }

    pub fn fixed(mut self) -> Check {
        self.bound = Bound::Fixed;
        self
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl CheckReport {
    pub fn new() -> Self {
        CheckReport {
            checks: Vec::new(),
            passed: true,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.passed &= check.passed;
        self.checks.push(check);
    }

    pub fn extend(&mut self, other: CheckReport) {
        for c in other.checks {
            self.push(c);
        }
    }

    /// Replace every tolerance and recompute the verdicts.
    pub fn rejudge(&mut self, tolerance: f64) {
        self.passed = true;
        for c in &mut self.checks {
            c.rejudge(tolerance);
            self.passed &= c.passed;
        }
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// One line per check with its worst residual and witness point.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            let status = if c.passed { "PASS" } else { "FAIL" };
            let _ = write!(
                out,
                "{status} {:<28} max={:.3e} tol={:.1e}",
                c.name, c.max_residual, c.tolerance
            );
            if let Some(w) = &c.witness {
                let pts: Vec<String> = w.iter().map(|x| format!("{x:.6}")).collect();
                let _ = write!(out, " at ({})", pts.join(", "));
            }
            if let Some(d) = &c.detail {
                let _ = write!(out, "  [{d}]");
            }
            out.push('\n');
        }
        let _ = writeln!(out, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}
