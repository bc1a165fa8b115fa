use difftape::gradcheck::{composite_suite, primitive_suite, CheckReport};
use drape_core::gradcheck::{end_to_end_suite, force_suite, invariance_suite, Suite};
use serde::Serialize;

use crate::error::{CliError, Result};

pub const PRIMITIVE_TOLERANCE: f64 = 1e-6;
pub const COMPOSITES: usize = 3;
pub const FORCE_MESHES: usize = 20;
pub const INVARIANCE_CASES: usize = 100;
pub const REPORT_FILE: &str = "gradcheck.json";

#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub name: String,
    pub checks: usize,
    pub failures: Vec<String>,
    pub worst: Option<String>,
    pub worst_error: f64,
    pub worst_tolerance: f64,
    pub passed: bool,
}

impl SuiteSummary {
    fn of(suite: &Suite) -> Self {
        let worst = suite.worst();
        SuiteSummary {
            name: suite.name.clone(),
            checks: suite.checks.len(),
            failures: suite.failures().map(|c| format!("{} ({:.3e} >= {:.1e})", c.name, c.max_rel_err, c.tolerance)).collect(),
            worst: worst.map(|c| c.name.clone()),
            worst_error: worst.map_or(0.0, |c| c.max_rel_err),
            worst_tolerance: worst.map_or(0.0, |c| c.tolerance),
            passed: suite.passed(),
        }
    }

    pub fn line(&self) -> String {
        format!(
            "[{}] {:<30} {:>4} checks, worst {:.3e} (tol {:.1e}) in {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checks,
            self.worst_error,
            self.worst_tolerance,
            self.worst.as_deref().unwrap_or("-")
        )
    }
}

fn tape_suite(name: &str, checks: Vec<CheckReport>) -> Suite {
    Suite { name: name.into(), checks }
}

/// Every finite-difference suite: tape primitives and composites, cloth
/// forces, invariances, and end-to-end pipeline gradients.
pub fn suites(seed: u64) -> Result<Vec<Suite>> {
    let tape = |e: difftape::TapeError| CliError::Drape(e.into());
    Ok(vec![
        tape_suite("tape primitives", primitive_suite(seed, PRIMITIVE_TOLERANCE).map_err(tape)?),
        tape_suite("tape composites", composite_suite(seed, COMPOSITES, PRIMITIVE_TOLERANCE).map_err(tape)?),
        force_suite(seed, FORCE_MESHES)?,
        invariance_suite(seed, INVARIANCE_CASES)?,
        end_to_end_suite(seed)?,
    ])
}

/// Runs [`suites`], prints one line per suite and fails if any check does.
pub fn run(seed: u64, out: Option<&std::path::Path>) -> Result<Vec<SuiteSummary>> {
    let summaries: Vec<SuiteSummary> = suites(seed)?.iter().map(SuiteSummary::of).collect();
    for s in &summaries {
        println!("{}", s.line());
        for f in &s.failures {
            println!("       failed: {f}");
        }
    }
    if let Some(dir) = out {
        super::ensure_out(dir)?;
        crate::report::write_json(&dir.join(REPORT_FILE), &serde_json::json!({ "schema_version": crate::report::SCHEMA_VERSION, "seed": seed, "suites": summaries }))?;
    }
    let failed: Vec<&str> = summaries.iter().filter(|s| !s.passed).map(|s| s.name.as_str()).collect();
    if failed.is_empty() {
        Ok(summaries)
    } else {
        Err(CliError::CheckFailed(format!("gradient checks failed: {}", failed.join(", "))))
    }
}
