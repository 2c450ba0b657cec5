//! Scenario documents (JSON, `"version": 1`).

use serde::{Deserialize, Serialize};

use gradplast::{
    BoundaryConfig, DefectForm, Face, FaceSet, Grid, LoadStep, MaterialParams, ModelVariant, SolverConfig,
    VariantTag,
};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    /// One of `kin_spin`, `iso_spin`, `iso_irrot`, `kin_irrot`, `micromorphic`.
    pub variant: String,
    /// `curl` or `microstress`.
    #[serde(default = "default_defect_form")]
    pub defect_form: String,
    pub material: Material,
    pub grid: GridSpec,
    pub boundary: BoundarySpec,
    pub load: Vec<LoadSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub mu: f64,
    pub lambda: f64,
    /// Optional; must equal `lambda + 2 mu / 3` when given.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub k1: f64,
    #[serde(default)]
    pub k2: f64,
    #[serde(default)]
    pub lc: f64,
    pub sigma_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub cells: [usize; 3],
    #[serde(default = "unit_size")]
    pub size: [f64; 3],
    #[serde(default)]
    pub origin: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Faces named `x-`, `x+`, `y-`, `y+`, `z-`, `z+`.
    pub gamma_faces: Vec<String>,
    /// Defaults to `gamma_faces`.
    #[serde(default)]
    pub micro_hard_faces: Option<Vec<String>>,
    /// `G` in `u = level · G (x − origin)` on Γ.
    #[serde(default)]
    pub dirichlet_gradient: [[f64; 3]; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoadSpec {
    pub level: f64,
    #[serde(default)]
    pub body_force: [f64; 3],
    #[serde(default = "one")]
    pub dt: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub tol_outer: f64,
    pub tol_cg: f64,
    pub tol_fista: f64,
    pub max_outer: usize,
    pub max_cg: usize,
    pub max_fista: usize,
    pub lipschitz_safety: f64,
    pub power_iterations: usize,
    pub vi_probes: usize,
    pub seed: u64,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let c = SolverConfig::default();
        SolverSpec {
            tol_outer: c.tol_outer,
            tol_cg: c.tol_cg,
            tol_fista: c.tol_fista,
            max_outer: c.max_outer,
            max_cg: c.max_cg,
            max_fista: c.max_fista,
            lipschitz_safety: c.lipschitz_safety,
            power_iterations: c.power_iterations,
            vi_probes: c.vi_probes,
            seed: c.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSpec {
    /// File name of the time series, relative to the output directory.
    pub csv: String,
    /// Directory of the VTK snapshots, relative to the output directory.
    pub vtk_dir: String,
    /// Snapshot every `stride` steps (and at the last step); 0 disables.
    pub stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            csv: "timeseries.csv".into(),
            vtk_dir: ".".into(),
            stride: 1,
        }
    }
}

fn default_defect_form() -> String {
    "curl".into()
}

fn unit_size() -> [f64; 3] {
    [1.0; 3]
}

fn one() -> f64 {
    1.0
}

/// Solver-ready objects built from a validated scenario.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub variant: ModelVariant,
    pub grid: Grid,
    pub boundary: BoundaryConfig,
    pub loads: Vec<LoadStep>,
    pub config: SolverConfig,
}

fn faces(names: &[String], what: &str) -> Result<FaceSet, CliError> {
    let mut set = FaceSet::empty();
    for n in names {
        let f: Face = n
            .parse()
            .map_err(|e| CliError::Validation(format!("{what}: {e}")))?;
        set.insert(f);
    }
    Ok(set)
}

fn invalid(what: &str) -> impl Fn(gradplast::Error) -> CliError + '_ {
    move |e| CliError::Validation(format!("{what}: {e}"))
}

impl Scenario {
    /// Builds and checks every derived object.
    pub fn prepare(&self) -> Result<Prepared, CliError> {
        if self.version != SCHEMA_VERSION {
            return Err(CliError::Validation(format!(
                "unsupported version {} (expected {SCHEMA_VERSION})",
                self.version
            )));
        }
        let tag: VariantTag = self.variant.parse().map_err(invalid("variant"))?;
        let form = match self.defect_form.as_str() {
            "curl" => DefectForm::Curl,
            "microstress" => DefectForm::Microstress,
            other => {
                return Err(CliError::Validation(format!(
                    "defect_form: unknown value {other:?} (expected \"curl\" or \"microstress\")"
                )))
            }
        };
        let m = &self.material;
        let params = match m.kappa {
            Some(kappa) => MaterialParams::with_kappa(m.mu, m.lambda, kappa, m.k1, m.k2, m.lc, m.sigma_y),
            None => MaterialParams::new(m.mu, m.lambda, m.k1, m.k2, m.lc, m.sigma_y),
        }
        .map_err(invalid("material"))?;
        let variant = ModelVariant::new(tag, params)
            .map_err(invalid("material"))?
            .with_defect_form(form);
        let g = &self.grid;
        if g.size.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(CliError::Validation(format!("grid: size must be positive, got {:?}", g.size)));
        }
        let grid = Grid::with_size(g.cells, g.size, g.origin).map_err(invalid("grid"))?;
        let gamma = faces(&self.boundary.gamma_faces, "boundary.gamma_faces")?;
        let hard = match &self.boundary.micro_hard_faces {
            Some(f) => faces(f, "boundary.micro_hard_faces")?,
            None => gamma,
        };
        let boundary = BoundaryConfig::with_micro_hard(gamma, gradplast::tensor::Mat3(self.boundary.dirichlet_gradient), hard)
            .map_err(invalid("boundary"))?;
        if self.load.is_empty() {
            return Err(CliError::Validation("load: at least one step is required".into()));
        }
        let mut loads = Vec::with_capacity(self.load.len());
        for (k, l) in self.load.iter().enumerate() {
            if !l.level.is_finite() || l.body_force.iter().any(|f| !f.is_finite()) {
                return Err(CliError::Validation(format!("load[{k}]: non-finite value")));
            }
            if !(l.dt > 0.0) || !l.dt.is_finite() {
                return Err(CliError::Validation(format!("load[{k}]: dt must be positive, got {}", l.dt)));
            }
            loads.push(LoadStep {
                level: l.level,
                body_force: l.body_force,
                dt: l.dt,
            });
        }
        let s = &self.solver;
        let config = SolverConfig {
            dt_schedule: loads.iter().map(|l| l.dt).collect(),
            tol_outer: s.tol_outer,
            tol_cg: s.tol_cg,
            tol_fista: s.tol_fista,
            max_outer: s.max_outer,
            max_cg: s.max_cg,
            max_fista: s.max_fista,
            lipschitz_safety: s.lipschitz_safety,
            power_iterations: s.power_iterations,
            vi_probes: s.vi_probes,
            seed: s.seed,
        };
        config.validate().map_err(invalid("solver"))?;
        if self.output.csv.is_empty() {
            return Err(CliError::Validation("output.csv must not be empty".into()));
        }
        Ok(Prepared {
            variant,
            grid,
            boundary,
            loads,
            config,
        })
    }

    /// Pretty JSON with every default written out.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }
}

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let s: Scenario = serde_json::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    s.prepare()?;
    Ok(s)
}
