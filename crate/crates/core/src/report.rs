//! Inequality reports shared by every checker.

use serde::{Deserialize, Serialize};

/// One checked inequality `lhs <= rhs`, emitted as a JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub check: String,
    pub params: serde_json::Value,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
}

impl Report {
    /// `lhs <= rhs` up to `rel_tol * max(1, |rhs|)`.
    pub fn inequality(check: &str, params: serde_json::Value, lhs: f64, rhs: f64, rel_tol: f64) -> Self {
        let slack = rhs - lhs;
        let pass = lhs.is_finite() && !rhs.is_nan() && slack >= -rel_tol * rhs.abs().max(1.0);
        Self { check: check.into(), params, lhs, rhs, slack, pass }
    }

    /// `|deviation| <= tol`, reported as lhs = deviation, rhs = tol.
    pub fn deviation(check: &str, params: serde_json::Value, deviation: f64, tol: f64) -> Self {
        Self {
            check: check.into(),
            params,
            lhs: deviation,
            rhs: tol,
            slack: tol - deviation,
            pass: deviation.is_finite() && deviation <= tol,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports are plain data")
    }
}
