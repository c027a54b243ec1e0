use serde::Serialize;
use std::fmt;

/// One named audit outcome.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

/// Outcome of a numeric audit. Failures are recorded here, never raised.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub subject: String,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            checks: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, passed: bool, value: f64, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            value,
            detail: detail.into(),
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}: {}", self.subject, if self.passed() { "pass" } else { "FAIL" })?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {} = {:.6e} {}",
                if c.passed { "ok" } else { "!!" },
                c.name,
                c.value,
                c.detail
            )?;
        }
        Ok(())
    }
}
