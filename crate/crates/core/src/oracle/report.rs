use std::fmt;

use super::{ACCUMULATED_TOL, EXACT_TOL, SOLVER_TOL};

/// Tolerances handed to each check. A negative value makes every comparison
/// fail, which is how the failure path is exercised.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Identities that hold in exact arithmetic.
    pub exact: f64,
    /// Comparisons involving a bisected index.
    pub solver: f64,
    /// Bounds summed over many paths or strategies.
    pub accumulated: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            exact: EXACT_TOL,
            solver: SOLVER_TOL,
            accumulated: ACCUMULATED_TOL,
        }
    }
}

impl Tolerances {
    pub fn broken() -> Self {
        Self {
            exact: -1.0,
            solver: -1.0,
            accumulated: -1.0,
        }
    }
}

/// Outcome of one check on one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    /// The statement being checked, in words.
    pub anchor: String,
    /// Seed that regenerates the instance, if it was random.
    pub seed: Option<u64>,
    /// Number of individual comparisons made.
    pub cases: usize,
    /// Number of failed comparisons.
    pub failures: usize,
    /// Descriptions of the first few failures.
    pub violations: Vec<String>,
}

/// Failures described in full per report; the rest are only counted.
const RECORDED_FAILURES: usize = 10;

impl CheckReport {
    pub fn new(check: &str, anchor: &str) -> Self {
        Self {
            check: check.to_string(),
            anchor: anchor.to_string(),
            seed: None,
            cases: 0,
            failures: 0,
            violations: Vec::new(),
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        self.seed = seed;
        self
    }

    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    /// Counts one comparison and records `message` when `ok` is false.
    pub fn expect(&mut self, ok: bool, message: impl FnOnce() -> String) {
        if ok {
            self.cases += 1;
        } else {
            self.fail(message());
        }
    }

    pub(crate) fn fail(&mut self, message: String) {
        self.cases += 1;
        self.failures += 1;
        if self.violations.len() < RECORDED_FAILURES {
            self.violations.push(message);
        }
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{status} {} ({})", self.check, self.anchor)?;
        if let Some(seed) = self.seed {
            write!(f, " seed={seed}")?;
        }
        write!(f, " cases={}", self.cases)?;
        if let Some(first) = self.violations.first() {
            write!(f, " failures={} first: {first}", self.failures)?;
        }
        Ok(())
    }
}
