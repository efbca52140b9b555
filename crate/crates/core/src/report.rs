use serde::{Deserialize, Serialize};

/// One named numeric contract with its measured residual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, residual: f64) -> Self {
        Check { name: name.into(), pass, residual }
    }

    /// Passes when `residual ≤ tol`.
    pub fn within(name: impl Into<String>, residual: f64, tol: f64) -> Self {
        Check::new(name, residual <= tol, residual)
    }
}

pub fn all_pass(checks: &[Check]) -> bool {
    checks.iter().all(|c| c.pass)
}
