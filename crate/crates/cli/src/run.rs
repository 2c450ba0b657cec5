//! Driving a scenario: time series, VTK snapshots.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use gradplast::models::{cauchy_stress, eshelby_stress};
use gradplast::solver::time_step;
use gradplast::{EnergySplit, Grid, ModelVariant, Problem, SimState, VariantTag};

use crate::error::CliError;
use crate::scenario::{Prepared, Scenario};

/// One line of `timeseries.csv`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimeSeriesRow {
    pub step: usize,
    pub level: f64,
    pub elastic_energy: f64,
    pub defect_energy: f64,
    pub hardening_energy: f64,
    pub cumulative_dissipation: f64,
    pub max_dev_sigma_e: f64,
    pub mean_gamma: f64,
    pub active_node_fraction: f64,
    pub vi_residual: f64,
    pub mean_sigma12: f64,
    pub max_abs_sigma12: f64,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<TimeSeriesRow>,
    pub final_energy: EnergySplit,
    pub outer_iterations: usize,
    pub cg_iterations: usize,
    pub snapshots: Vec<PathBuf>,
}

impl RunSummary {
    /// Least-squares slope of `max |σ₁₂|` against the load level over the
    /// plastic steps of the initial monotone segment; NaN with fewer than two.
    pub fn hardening_slope(&self) -> f64 {
        let mut pts = Vec::new();
        let mut last = f64::NEG_INFINITY;
        for r in &self.rows {
            if r.level < last {
                break;
            }
            last = r.level;
            if r.active_node_fraction > 0.0 {
                pts.push((r.level, r.max_abs_sigma12));
            }
        }
        if pts.len() < 2 {
            return f64::NAN;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}

/// Volume average and maximum magnitude of `σ₁₂` over the Gauss points.
fn shear_stress(variant: &ModelVariant, grid: &Grid, state: &SimState) -> (f64, f64) {
    let w = grid.cell_volume() / 8.0;
    let mut sum = 0.0;
    let mut max: f64 = 0.0;
    for cell in cauchy_stress(variant, grid, &state.u, &state.p) {
        for s in cell {
            sum += w * s[(0, 1)];
            max = max.max(s[(0, 1)].abs());
        }
    }
    (sum / grid.volume(), max)
}

/// Runs every load step and writes the time series and snapshots below `out`.
pub fn run_scenario(scenario: &Scenario, out: &Path, quiet: bool) -> Result<RunSummary, CliError> {
    let Prepared {
        variant,
        grid,
        boundary,
        loads,
        config,
    } = scenario.prepare()?;
    fs::create_dir_all(out).map_err(CliError::io(out))?;
    let vtk_dir = out.join(&scenario.output.vtk_dir);
    if scenario.output.stride > 0 {
        fs::create_dir_all(&vtk_dir).map_err(CliError::io(&vtk_dir))?;
    }
    let problem = Problem::new(variant, grid.clone(), boundary, &config)
        .map_err(|source| CliError::Solver { step: 0, source })?;
    // no flow rule: a single equilibrium solve at the final load
    let steps = if variant.tag == VariantTag::Micromorphic {
        &loads[loads.len() - 1..]
    } else {
        &loads[..]
    };
    let weights = grid.nodal_weights();
    let mut state = SimState::zero(&grid);
    let mut rows = Vec::with_capacity(steps.len());
    let mut cumulative = 0.0;
    let mut summary = RunSummary {
        rows: Vec::new(),
        final_energy: EnergySplit::default(),
        outer_iterations: 0,
        cg_iterations: 0,
        snapshots: Vec::new(),
    };
    for (k, load) in steps.iter().enumerate() {
        let step = k + 1;
        let (next, rep) =
            time_step(&problem, &state, load, &config).map_err(|source| CliError::Solver { step, source })?;
        cumulative += rep.dissipation_increment;
        let mean_gamma = next
            .gamma
            .values
            .iter()
            .zip(&weights)
            .map(|(g, w)| g * w)
            .sum::<f64>()
            / grid.volume();
        let (mean_s12, max_s12) = shear_stress(&variant, &grid, &next);
        let row = TimeSeriesRow {
            step,
            level: load.level,
            elastic_energy: rep.energy.elastic,
            defect_energy: rep.energy.defect,
            hardening_energy: rep.energy.hardening,
            cumulative_dissipation: cumulative,
            max_dev_sigma_e: rep.max_driving_stress,
            mean_gamma,
            active_node_fraction: rep.active_node_fraction,
            vi_residual: rep.vi_residual.unwrap_or(f64::NAN),
            mean_sigma12: mean_s12,
            max_abs_sigma12: max_s12,
            outer_iterations: rep.outer_iterations,
            cg_iterations: rep.cg_iterations,
        };
        if !quiet {
            eprintln!(
                "step {step:>4}  level {:>12.5e}  dissipation {:>12.5e}  active {:>6.3}  iterations {}",
                row.level, row.cumulative_dissipation, row.active_node_fraction, row.outer_iterations
            );
        }
        let stride = scenario.output.stride;
        if stride > 0 && (step % stride == 0 || step == steps.len()) {
            let path = vtk_dir.join(format!("fields_{step:04}.vtk"));
            write_vtk(&path, &variant, &grid, &next, step)?;
            summary.snapshots.push(path);
        }
        summary.outer_iterations += rep.outer_iterations;
        summary.cg_iterations += rep.cg_iterations;
        summary.final_energy = rep.energy;
        rows.push(row);
        state = next;
    }
    write_csv(&out.join(&scenario.output.csv), &rows)?;
    summary.rows = rows;
    Ok(summary)
}

pub fn write_csv<R: Serialize>(path: &Path, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(CliError::io(path))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let source = match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    };
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Legacy ASCII VTK (version 3.0) structured-points snapshot.
pub fn write_vtk(path: &Path, variant: &ModelVariant, grid: &Grid, state: &SimState, step: usize) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = BufWriter::new(file);
    let sigma_e = eshelby_stress(variant, grid, state);
    let irrot = variant.tag.is_irrotational();
    let driving: Vec<f64> = sigma_e
        .values
        .iter()
        .map(|m| if irrot { m.sym().dev().norm() } else { m.dev().norm() })
        .collect();
    let [nx, ny, nz] = grid.nodes_per_axis();
    let mut body = String::new();
    use std::fmt::Write as _;
    let _ = writeln!(body, "# vtk DataFile Version 3.0");
    let _ = writeln!(body, "gradplast {} step {step}", variant.tag);
    let _ = writeln!(body, "ASCII");
    let _ = writeln!(body, "DATASET STRUCTURED_POINTS");
    let _ = writeln!(body, "DIMENSIONS {nx} {ny} {nz}");
    let _ = writeln!(body, "ORIGIN {:e} {:e} {:e}", grid.origin[0], grid.origin[1], grid.origin[2]);
    let _ = writeln!(body, "SPACING {:e} {:e} {:e}", grid.h[0], grid.h[1], grid.h[2]);
    let _ = writeln!(body, "POINT_DATA {}", grid.node_count());
    let _ = writeln!(body, "VECTORS u double");
    for u in &state.u.values {
        let _ = writeln!(body, "{:e} {:e} {:e}", u[0], u[1], u[2]);
    }
    for i in 0..3 {
        for j in 0..3 {
            let _ = writeln!(body, "SCALARS p_{}{} double 1", i + 1, j + 1);
            let _ = writeln!(body, "LOOKUP_TABLE default");
            for p in &state.p.values {
                let _ = writeln!(body, "{:e}", p[(i, j)]);
            }
        }
    }
    for (name, values) in [("gamma", &state.gamma.values), ("dev_sigma_e", &driving)] {
        let _ = writeln!(body, "SCALARS {name} double 1");
        let _ = writeln!(body, "LOOKUP_TABLE default");
        for v in values.iter() {
            let _ = writeln!(body, "{v:e}");
        }
    }
    w.write_all(body.as_bytes()).map_err(CliError::io(path))?;
    w.flush().map_err(CliError::io(path))
}
