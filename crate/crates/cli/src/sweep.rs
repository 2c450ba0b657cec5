//! Parameter sweeps over independent scenario copies.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::CliError;
use crate::run::{run_scenario, write_csv};
use crate::scenario::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    Lc,
    K1,
    K2,
    /// Cells per axis (all three axes).
    Grid,
}

impl FromStr for SweepParam {
    type Err = CliError;
    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "lc" => Ok(SweepParam::Lc),
            "k1" => Ok(SweepParam::K1),
            "k2" => Ok(SweepParam::K2),
            "grid" => Ok(SweepParam::Grid),
            _ => Err(CliError::Validation(format!(
                "unknown sweep parameter {s:?} (expected Lc, k1, k2 or grid)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Lc => "Lc",
            SweepParam::K1 => "k1",
            SweepParam::K2 => "k2",
            SweepParam::Grid => "grid",
        })
    }
}

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub status: String,
    pub steps: usize,
    pub elastic_energy: f64,
    pub defect_energy: f64,
    pub hardening_energy: f64,
    pub cumulative_dissipation: f64,
    pub hardening_slope: f64,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
}

/// Copy of `base` with one parameter replaced.
pub fn apply(base: &Scenario, param: SweepParam, value: f64) -> Result<Scenario, CliError> {
    let mut s = base.clone();
    match param {
        SweepParam::Lc => s.material.lc = value,
        SweepParam::K1 => s.material.k1 = value,
        SweepParam::K2 => s.material.k2 = value,
        SweepParam::Grid => {
            if !(value >= 1.0) || value.fract() != 0.0 {
                return Err(CliError::Validation(format!("grid: cells per axis must be a positive integer, got {value}")));
            }
            s.grid.cells = [value as usize; 3];
        }
    }
    s.prepare()?;
    Ok(s)
}

/// Checks that `param` affects the variant of `base`.
pub fn check_applicable(base: &Scenario, param: SweepParam) -> Result<(), CliError> {
    let tag = base.prepare()?.variant.tag;
    let ok = match param {
        SweepParam::Lc | SweepParam::Grid => true,
        SweepParam::K1 => tag.is_kinematic(),
        SweepParam::K2 => tag.is_isotropic(),
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation(format!("parameter {param} does not enter variant {tag}")))
    }
}

/// Runs one scenario per value, concurrently, each in its own directory
/// below `out`; failures are recorded in the summary and do not stop the
/// sweep.
pub fn sweep(base: &Scenario, param: SweepParam, values: &[f64], out: &Path, quiet: bool) -> Result<Vec<SweepRow>, CliError> {
    check_applicable(base, param)?;
    std::fs::create_dir_all(out).map_err(CliError::io(out))?;
    let rows: Vec<SweepRow> = values
        .par_iter()
        .enumerate()
        .map(|(k, &value)| {
            let dir = out.join(format!("run_{k:03}_{param}_{value}"));
            let result = apply(base, param, value).and_then(|s| run_scenario(&s, &dir, true));
            let mut row = SweepRow {
                parameter: param.to_string(),
                value,
                status: "ok".into(),
                steps: 0,
                elastic_energy: f64::NAN,
                defect_energy: f64::NAN,
                hardening_energy: f64::NAN,
                cumulative_dissipation: f64::NAN,
                hardening_slope: f64::NAN,
                outer_iterations: 0,
                cg_iterations: 0,
            };
            match result {
                Ok(sum) => {
                    row.steps = sum.rows.len();
                    row.elastic_energy = sum.final_energy.elastic;
                    row.defect_energy = sum.final_energy.defect;
                    row.hardening_energy = sum.final_energy.hardening;
                    row.cumulative_dissipation = sum.rows.last().map_or(0.0, |r| r.cumulative_dissipation);
                    row.hardening_slope = sum.hardening_slope();
                    row.outer_iterations = sum.outer_iterations;
                    row.cg_iterations = sum.cg_iterations;
                }
                Err(e) => row.status = format!("error: {e}"),
            }
            if !quiet {
                eprintln!("{param} = {value}: {}", row.status);
            }
            row
        })
        .collect();
    write_csv(&out.join("summary.csv"), &rows)?;
    Ok(rows)
}
