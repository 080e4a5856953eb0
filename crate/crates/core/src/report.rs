//! Check reports: named pass/fail items with rendered residuals.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CheckItem {
    pub name: String,
    pub pass: bool,
    pub residual: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub checks: Vec<CheckItem>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn pass(&mut self, name: impl Into<String>) {
        self.checks.push(CheckItem {
            name: name.into(),
            pass: true,
            residual: None,
        });
    }

    pub fn fail(&mut self, name: impl Into<String>, residual: impl Into<String>) {
        self.checks.push(CheckItem {
            name: name.into(),
            pass: false,
            residual: Some(residual.into()),
        });
    }

    pub fn record(&mut self, name: impl Into<String>, pass: bool, residual: Option<String>) {
        self.checks.push(CheckItem {
            name: name.into(),
            pass,
            residual,
        });
    }

    pub fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    pub fn merge(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.warnings.extend(other.warnings);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}
