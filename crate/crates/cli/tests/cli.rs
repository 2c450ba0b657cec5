use std::fs;
use std::path::Path;
use std::process::Command;

use gradplast::oracles::radial_return::{pure_shear, radial_return_0d, Hardening};
use gradplast::MaterialParams;
use gradplast_cli::scenario::{LoadSpec, OutputSpec};
use gradplast_cli::{parse_scenario, run_scenario, sweep, Scenario, SweepParam};

const SIGMA_Y: f64 = 0.01;

fn yield_shear() -> f64 {
    SIGMA_Y / 2f64.sqrt()
}

fn base(variant: &str, cells: usize, gamma: &str, hard: &str) -> Scenario {
    let text = format!(
        r#"{{
        "version": 1,
        "variant": "{variant}",
        "material": {{"mu": 1.0, "lambda": 1.5, "k1": 0.5, "k2": 0.5, "lc": 0.2, "sigma_y": {SIGMA_Y}}},
        "grid": {{"cells": [{cells}, {cells}, {cells}]}},
        "boundary": {{"gamma_faces": {gamma}, "micro_hard_faces": {hard},
                      "dirichlet_gradient": [[0, 1, 0], [0, 0, 0], [0, 0, 0]]}},
        "load": [{{"level": 0.001}}],
        "solver": {{"vi_probes": 0}},
        "output": {{"stride": 0}}
    }}"#
    );
    parse_scenario(&text).unwrap()
}

fn with_levels(mut s: Scenario, levels: &[f64]) -> Scenario {
    s.load = levels
        .iter()
        .map(|&level| LoadSpec {
            level,
            body_force: [0.0; 3],
            dt: 1.0,
        })
        .collect();
    s
}

const ALL: &str = r#"["x-", "x+", "y-", "y+", "z-", "z+"]"#;
const LAYER: &str = r#"["y-", "y+"]"#;

/// Homogeneous shear with the local model.
fn homogeneous(levels: &[f64]) -> Scenario {
    let mut s = with_levels(base("kin_spin", 2, ALL, "[]"), levels);
    s.material.lc = 0.0;
    s
}

fn cycle(steps: usize, s_max: f64) -> Vec<f64> {
    let half = steps / 2;
    (1..=steps)
        .map(|k| {
            if k <= half {
                s_max * k as f64 / half as f64
            } else {
                s_max * (1.0 - 2.0 * (k - half) as f64 / half as f64)
            }
        })
        .collect()
}

#[test]
fn micromorphic_runs_a_single_step() {
    let dir = tempfile::tempdir().unwrap();
    let s = with_levels(base("micromorphic", 2, LAYER, LAYER), &[0.01, 0.02, 0.03]);
    let sum = run_scenario(&s, dir.path(), true).unwrap();
    assert_eq!(sum.rows.len(), 1);
    assert_eq!(sum.rows[0].level, 0.03);
    assert_eq!(sum.rows[0].cumulative_dissipation, 0.0);
    let csv = fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn elastic_program_has_no_plastic_slip() {
    let dir = tempfile::tempdir().unwrap();
    let s = homogeneous(&[0.2 * yield_shear(), 0.5 * yield_shear(), 0.9 * yield_shear()]);
    let sum = run_scenario(&s, dir.path(), true).unwrap();
    assert!(sum.rows.iter().all(|r| r.mean_gamma == 0.0 && r.cumulative_dissipation == 0.0));
}

#[test]
fn shear_cycle_shows_reverse_yield_below_forward_yield() {
    let dir = tempfile::tempdir().unwrap();
    let levels = cycle(40, 3.7 * yield_shear());
    let s = homogeneous(&levels);
    let sum = run_scenario(&s, dir.path(), true).unwrap();
    let params = MaterialParams::new(1.0, 1.5, 0.5, 0.0, 0.0, SIGMA_Y).unwrap();
    let path: Vec<_> = levels.iter().map(|&l| pure_shear(l)).collect();
    let oracle = radial_return_0d(&params, &path, Hardening::Kinematic);
    for (row, rr) in sum.rows.iter().zip(&oracle) {
        assert!((row.mean_sigma12 - rr.sigma[(0, 1)]).abs() <= 1e-8 * SIGMA_Y);
        assert_eq!(row.active_node_fraction > 0.0, rr.plastic, "step {}", row.step);
    }
    let forward = sum.rows.iter().position(|r| r.active_node_fraction > 0.0).unwrap();
    let reverse = (20..sum.rows.len()).find(|&k| sum.rows[k].active_node_fraction > 0.0).unwrap();
    let f = sum.rows[forward].mean_sigma12.abs();
    let r = sum.rows[reverse].mean_sigma12.abs();
    assert!(r < f, "reverse onset {r} vs forward {f}");
    for w in sum.rows.windows(2) {
        assert!(w[1].cumulative_dissipation >= w[0].cumulative_dissipation);
    }
}

fn check_vtk(path: &Path, nodes: usize) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# vtk DataFile Version 3.0"));
    lines.next();
    assert_eq!(lines.next(), Some("ASCII"));
    assert_eq!(lines.next(), Some("DATASET STRUCTURED_POINTS"));
    let dims: Vec<usize> = lines.next().unwrap()["DIMENSIONS ".len()..]
        .split(' ')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(dims.iter().product::<usize>(), nodes);
    assert!(lines.next().unwrap().starts_with("ORIGIN "));
    assert!(lines.next().unwrap().starts_with("SPACING "));
    assert_eq!(lines.next(), Some(format!("POINT_DATA {nodes}").as_str()));
    // one vector array and eleven scalar arrays, each followed by one value per node
    let mut arrays = 0;
    let mut rest = lines.peekable();
    while let Some(header) = rest.next() {
        let scalar = header.starts_with("SCALARS ");
        assert!(scalar || header.starts_with("VECTORS "), "{header}");
        if scalar {
            assert_eq!(rest.next(), Some("LOOKUP_TABLE default"));
        }
        for _ in 0..nodes {
            let line = rest.next().unwrap();
            let n = line.split(' ').map(|v| v.parse::<f64>().unwrap()).count();
            assert_eq!(n, if scalar { 1 } else { 3 });
        }
        arrays += 1;
    }
    assert_eq!(arrays, 12);
}

#[test]
fn snapshots_are_legacy_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = with_levels(base("kin_spin", 2, LAYER, LAYER), &[0.005, 0.01, 0.02]);
    s.output = OutputSpec {
        stride: 2,
        vtk_dir: "fields".into(),
        ..OutputSpec::default()
    };
    let sum = run_scenario(&s, dir.path(), true).unwrap();
    let names: Vec<_> = sum.snapshots.iter().map(|p| p.file_name().unwrap().to_owned()).collect();
    assert_eq!(names, ["fields_0002.vtk", "fields_0003.vtk"]);
    for p in &sum.snapshots {
        assert!(p.starts_with(dir.path().join("fields")));
        check_vtk(p, 27);
    }
}

#[test]
fn identical_configs_give_identical_files() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut s = with_levels(base("iso_spin", 2, LAYER, LAYER), &[0.005, 0.01, 0.02]);
    s.solver.vi_probes = 5;
    s.output.stride = 1;
    run_scenario(&s, a.path(), true).unwrap();
    run_scenario(&s, b.path(), true).unwrap();
    for f in ["timeseries.csv", "fields_0003.vtk"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}

#[test]
fn single_value_sweep_matches_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let s = with_levels(base("kin_spin", 2, LAYER, LAYER), &[0.005, 0.01, 0.02]);
    let run = run_scenario(&s, &dir.path().join("direct"), true).unwrap();
    let rows = sweep(&s, SweepParam::Lc, &[0.2], &dir.path().join("sweep"), true).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].status, "ok");
    assert_eq!(rows[0].elastic_energy, run.final_energy.elastic);
    assert_eq!(rows[0].cumulative_dissipation, run.rows.last().unwrap().cumulative_dissipation);
    assert!(dir.path().join("sweep/summary.csv").exists());
}

#[test]
fn local_sweep_reduces_to_the_point_model() {
    let dir = tempfile::tempdir().unwrap();
    let levels: Vec<f64> = (1..=8).map(|k| 0.5 * k as f64 * yield_shear()).collect();
    let mut s = homogeneous(&levels);
    s.material.lc = 0.3;
    let rows = sweep(&s, SweepParam::Lc, &[0.0], dir.path(), true).unwrap();
    assert_eq!(rows[0].status, "ok");
    let params = MaterialParams::new(1.0, 1.5, 0.5, 0.0, 0.0, SIGMA_Y).unwrap();
    let path: Vec<_> = levels.iter().map(|&l| pure_shear(l)).collect();
    let last = radial_return_0d(&params, &path, Hardening::Kinematic).pop().unwrap();
    // homogeneous: σ₁₂ is the same at every point, so max |σ₁₂| follows the oracle
    let slope_oracle = params.mu * params.k1 / (2.0 + params.k1);
    assert!((rows[0].hardening_slope - slope_oracle).abs() <= 1e-8 * slope_oracle);
    let diss = SIGMA_Y * last.eps_p.norm();
    assert!((rows[0].cumulative_dissipation - diss).abs() <= 1e-8 * diss);
}

#[test]
fn sweep_records_failures_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let s = with_levels(base("kin_spin", 2, LAYER, LAYER), &[0.005]);
    let rows = sweep(&s, SweepParam::K1, &[0.0, 0.5], dir.path(), true).unwrap();
    assert!(rows[0].status.starts_with("error") && rows[0].status.contains("k1"));
    assert_eq!(rows[1].status, "ok");
    assert!(sweep(&s, SweepParam::K2, &[0.5], dir.path(), true).is_err());
}

#[test]
fn length_scale_stiffens_the_layer() {
    let dir = tempfile::tempdir().unwrap();
    let levels: Vec<f64> = (1..=8).map(|k| 0.6 * k as f64 * yield_shear()).collect();
    let s = with_levels(base("kin_spin", 4, LAYER, LAYER), &levels);
    let rows = sweep(&s, SweepParam::Lc, &[0.1, 0.2, 0.4], dir.path(), true).unwrap();
    let slopes: Vec<f64> = rows.iter().map(|r| r.hardening_slope).collect();
    assert!(slopes.iter().all(|v| v.is_finite()), "{slopes:?}");
    assert!(slopes[0] <= slopes[1] && slopes[1] <= slopes[2], "{slopes:?}");
}

fn gradplast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gradplast")).args(args).output().unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let s = with_levels(base("kin_spin", 1, LAYER, LAYER), &[0.005, 0.01]);
    fs::write(&good, s.to_canonical_json()).unwrap();
    let out = dir.path().join("out");
    let o = gradplast(&["--quiet", "--out", out.to_str().unwrap(), "run", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("timeseries.csv").exists());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, s.to_canonical_json().replace("\"k1\": 0.5", "\"k1\": 0.0")).unwrap();
    assert_eq!(gradplast(&["run", bad.to_str().unwrap()]).status.code(), Some(2));
    let missing = dir.path().join("missing.json");
    assert_eq!(gradplast(&["run", missing.to_str().unwrap()]).status.code(), Some(4));

    let mut hard = s.clone();
    hard.solver.max_outer = 1;
    hard.load[0].level = 0.05;
    let hard_path = dir.path().join("hard.json");
    fs::write(&hard_path, hard.to_canonical_json()).unwrap();
    let o = gradplast(&["--quiet", "--out", out.to_str().unwrap(), "run", hard_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));

    let o = gradplast(&["--quiet", "oracle-check"]);
    assert_eq!(o.status.code(), Some(0));

    let o = gradplast(&["korn", good.to_str().unwrap(), "--no-bc"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("constant_skew_quotient 0e0"), "{text}");
}
