use std::fmt;
use std::io::Write;

use serde::Serialize;
use wco_core::battery::FuzzSummary;
use wco_core::invariant_subspaces::GrowthRow;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Table,
    Json,
}

pub fn emit<T: Serialize + fmt::Display>(out: &mut impl Write, format: Format, report: &T) -> Result<(), CliError> {
    match format {
        Format::Table => write!(out, "{report}")?,
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, report)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

/// CSV with a header row in table mode, a JSON array otherwise.
pub fn emit_growth(out: &mut impl Write, format: Format, rows: &[GrowthRow]) -> Result<(), CliError> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut *out, rows)?;
            writeln!(out)?;
        }
        Format::Table => {
            let mut writer = csv::Writer::from_writer(out);
            for r in rows {
                writer.serialize(r)?;
            }
            writer.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
#[serde(transparent)]
pub struct FuzzView<'a>(pub &'a FuzzSummary);

impl fmt::Display for FuzzView<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.0;
        let mutation = serde_json::to_value(s.mutation).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
        writeln!(
            f,
            "systems {}  seed {}  max_atoms {}  tolerance {:e}  mutation {mutation}",
            s.count, s.seed, s.max_atoms, s.tolerance
        )?;
        writeln!(f, "{:<40} {:>7} {:>7} {:>7}", "check", "pass", "fail", "skip")?;
        for (check, tally) in &s.checks {
            let name = serde_json::to_value(check).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            writeln!(f, "{name:<40} {:>7} {:>7} {:>7}", tally.passed, tally.failed, tally.skipped)?;
        }
        writeln!(f, "systems_failed {}", s.systems_failed)?;
        for c in &s.counterexamples {
            let check = serde_json::to_value(c.check).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            writeln!(f)?;
            writeln!(f, "counterexample index {} ({check}): {}", c.index, c.detail)?;
            writeln!(f, "minimized {}", serde_json::to_string(&c.minimized).map_err(|_| fmt::Error)?)?;
        }
        Ok(())
    }
}
