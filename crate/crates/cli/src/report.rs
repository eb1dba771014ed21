//! Versioned JSON reports and CSV side tables.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

pub const SCHEMA: &str = "entlab.report/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

/// One numeric claim with the bound it was checked against.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub relation: Relation,
    pub bound: f64,
    /// Distance to the bound, positive when the check holds.
    pub margin: f64,
    pub holds: bool,
    /// Hard checks decide the exit status; soft ones are only flagged.
    pub hard: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtMost,
            bound,
            margin: bound - value,
            holds: value <= bound,
            hard: true,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            relation: Relation::AtLeast,
            bound,
            margin: value - bound,
            holds: value >= bound,
            hard: true,
        }
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub seed: u64,
    pub config: Value,
    pub checks: Vec<Check>,
    pub violations: Vec<Check>,
    pub soft_flags: Vec<Check>,
    pub artifacts: Vec<String>,
    pub result: Value,
    pub status: &'static str,
}

impl Report {
    pub fn clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Run-dependent data kept out of the deterministic report.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub subcommand: String,
    pub timestamp_unix: f64,
    pub elapsed_seconds: f64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub argv: Vec<String>,
}

impl Meta {
    pub fn now(subcommand: &str, elapsed: Duration, out_dir: &Path, argv: Vec<String>) -> Self {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default();
        Self {
            subcommand: subcommand.into(),
            timestamp_unix: ts.as_secs_f64(),
            elapsed_seconds: elapsed.as_secs_f64(),
            threads: rayon::current_num_threads(),
            out_dir: out_dir.to_path_buf(),
            argv,
        }
    }
}

/// Output sink of one subcommand run.
pub struct Ctx {
    pub seed: u64,
    pub subcommand: String,
    out_dir: PathBuf,
    artifacts: Vec<String>,
}

impl Ctx {
    pub fn new(subcommand: &str, seed: u64, out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)?;
        Ok(Self {
            seed,
            subcommand: subcommand.into(),
            out_dir: out_dir.to_path_buf(),
            artifacts: Vec::new(),
        })
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    pub fn artifacts(&self) -> &[String] {
        &self.artifacts
    }

    /// Writes `<subcommand>.<name>.csv`.
    pub fn csv<T: Serialize>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = T>,
    ) -> Result<(), CliError> {
        let file = format!("{}.{name}.csv", self.subcommand);
        let mut w = csv::Writer::from_path(self.out_dir.join(&file))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        self.artifacts.push(file);
        Ok(())
    }

    /// Writes a pretty JSON file at `rel` under the output directory.
    pub fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), CliError> {
        let path = self.out_dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n")?;
        self.artifacts.push(rel.to_string());
        Ok(())
    }
}

/// What a subcommand hands back for the report.
pub struct Outcome {
    pub checks: Vec<Check>,
    pub result: Value,
}

pub fn assemble(ctx: &Ctx, config: Value, outcome: Outcome) -> Report {
    let violations: Vec<Check> = outcome
        .checks
        .iter()
        .filter(|c| c.hard && !c.holds)
        .cloned()
        .collect();
    let soft_flags = outcome
        .checks
        .iter()
        .filter(|c| !c.hard && !c.holds)
        .cloned()
        .collect();
    let status = if violations.is_empty() {
        "clean"
    } else {
        "violation"
    };
    Report {
        schema: SCHEMA,
        version: env!("CARGO_PKG_VERSION"),
        subcommand: ctx.subcommand.clone(),
        seed: ctx.seed,
        config,
        checks: outcome.checks,
        violations,
        soft_flags,
        artifacts: ctx.artifacts().to_vec(),
        result: outcome.result,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn margins_and_nan() {
        let c = Check::at_most("x", 1.0, 3.0);
        assert!(c.holds && c.margin == 2.0);
        let c = Check::at_least("y", 0.5, 0.999);
        assert!(!c.holds && c.margin < 0.0);
        assert!(!Check::at_most("z", f64::NAN, 1.0).holds);
    }
}
