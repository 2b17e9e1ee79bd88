//! Run configuration: one JSON file per run.

use std::path::Path;

use affine_lab_core::families::{example_family, QuadricImmersion};
use affine_lab_core::symmetry::FrameOptions;
use affine_lab_core::{AffineOptions, CurveDef, FamilySpec, SphereKind};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Generate,
    Verify,
    Classify,
    SphereCheck,
    IntegrateCurve,
    ExportMesh,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Command::Generate => "generate",
            Command::Verify => "verify",
            Command::Classify => "classify",
            Command::SphereCheck => "sphere-check",
            Command::IntegrateCurve => "integrate-curve",
            Command::ExportMesh => "export-mesh",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_residual_tol")]
    pub residual_tol: f64,
    #[serde(default = "default_exact_tol")]
    pub exact_tol: f64,
}

fn default_residual_tol() -> f64 {
    1e-6
}

fn default_exact_tol() -> f64 {
    1e-8
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual_tol: default_residual_tol(),
            exact_tol: default_exact_tol(),
        }
    }
}

/// Numerical knobs below the tolerances, echoed in every report.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub solve_tol: f64,
    pub rank_tol: f64,
    /// Taylor order of the immersion expansion.
    pub order: usize,
    pub iso_tol: f64,
    pub quadric_tol: f64,
    pub newton_iters: usize,
    /// Nodes along `t` for warped-product data.
    pub warp_nodes: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        let a = AffineOptions::default();
        let f = FrameOptions::default();
        Numerics {
            solve_tol: a.solve_tol,
            rank_tol: a.rank_tol,
            order: a.order,
            iso_tol: f.iso_tol,
            quadric_tol: f.quadric_tol,
            newton_iters: f.newton_iters,
            warp_nodes: 65,
        }
    }
}

/// A standard quadric, optionally stretched along the axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadricInput {
    pub epsilon: i8,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Parameter box, one interval per chart coordinate.
    pub domain: Vec<[f64; 2]>,
}

impl QuadricInput {
    pub fn immersion(&self) -> Result<QuadricImmersion> {
        let q = QuadricImmersion::new(self.epsilon, self.dim)?;
        match &self.scales {
            Some(s) if s.len() != self.dim + 1 => Err(CliError::Config(format!(
                "quadric scales need {} entries, got {}",
                self.dim + 1,
                s.len()
            ))),
            Some(s) => Ok(q.with_scales(s.clone())),
            None => Ok(q),
        }
    }

    pub fn box_domain(&self) -> Vec<(f64, f64)> {
        self.domain.iter().map(|[a, b]| (*a, *b)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphereCheckOptions {
    /// Sphere type to test; both admissible types when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SphereKind>,
    /// Equation constant; least-squares estimate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Curve nodes along the `t` range.
    #[serde(default = "default_curve_nodes")]
    pub curve_nodes: usize,
}

fn default_curve_nodes() -> usize {
    33
}

impl Default for SphereCheckOptions {
    fn default() -> Self {
        SphereCheckOptions {
            kind: None,
            c: None,
            curve_nodes: default_curve_nodes(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshOptions {
    #[serde(default = "default_grid")]
    pub grid: [usize; 2],
    /// Ambient coordinates written as OBJ `x y z`; defaults to
    /// `(0, n − 1, n)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axes: Option<[usize; 3]>,
}

fn default_grid() -> [usize; 2] {
    [64, 64]
}

impl Default for MeshOptions {
    fn default() -> Self {
        MeshOptions {
            grid: default_grid(),
            axes: None,
        }
    }
}

/// File names of the outputs, relative to the output directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub report: String,
    pub points_csv: String,
    pub curve_csv: String,
    pub mesh_obj: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            report: "report.json".into(),
            points_csv: "points.csv".into(),
            curve_csv: "curve.csv".into(),
            mesh_obj: "mesh.obj".into(),
        }
    }
}

/// Example family selected by name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExampleRef {
    pub name: String,
    #[serde(default = "default_n")]
    pub n: usize,
}

fn default_n() -> usize {
    3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Taken from the command line when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FamilySpec>,
    /// Shorthand for a named example family; expanded into `family`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<ExampleRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadric: Option<QuadricInput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveDef>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub sphere: SphereCheckOptions,
    #[serde(default)]
    pub mesh: MeshOptions,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_samples() -> usize {
    20
}

impl RunConfig {
    pub fn new(command: Command) -> RunConfig {
        RunConfig {
            command: Some(command),
            family: None,
            example: None,
            quadric: None,
            curve: None,
            samples: default_samples(),
            seed: 0,
            tolerances: Tolerances::default(),
            numerics: Numerics::default(),
            sphere: SphereCheckOptions::default(),
            mesh: MeshOptions::default(),
            outputs: Outputs::default(),
        }
    }

    pub fn with_example(mut self, name: &str, n: usize) -> RunConfig {
        self.example = Some(ExampleRef { name: name.into(), n });
        self
    }

    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(CliError::Json)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        RunConfig::from_json(&text)
    }

    pub fn command(&self) -> Result<Command> {
        self.command
            .ok_or_else(|| CliError::Config("no command given on the command line or in the config".into()))
    }

    /// Expands the example shorthand and checks command-specific
    /// requirements; the result is what reports echo.
    pub fn resolved(mut self) -> Result<RunConfig> {
        if let Some(ex) = self.example.take() {
            if self.family.is_some() {
                return Err(CliError::Config("give either `family` or `example`, not both".into()));
            }
            self.family = Some(example_family(&ex.name, ex.n)?);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let command = self.command()?;
        let bad = |msg: &str| Err(CliError::Config(msg.to_string()));
        if self.samples < 1 {
            return bad("samples must be at least 1");
        }
        let t = self.tolerances;
        if !(t.residual_tol > 0.0 && t.exact_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.family.is_some() && self.quadric.is_some() {
            return bad("give either `family` or `quadric`, not both");
        }
        let surface = self.family.is_some() || self.quadric.is_some();
        match command {
            Command::Generate | Command::SphereCheck if self.family.is_none() => {
                bad(&format!("`{command}` needs a `family` (or `example`)"))
            }
            Command::Verify | Command::Classify | Command::ExportMesh if !surface => {
                bad(&format!("`{command}` needs a `family`, `example` or `quadric`"))
            }
            Command::IntegrateCurve if !matches!(self.curve, Some(CurveDef::Ode(_))) => {
                bad("`integrate-curve` needs a `curve` of type `ode`")
            }
            Command::ExportMesh if self.mesh.grid.iter().any(|&g| g < 2) => bad("mesh grid needs at least 2 x 2 nodes"),
            Command::SphereCheck if self.sphere.curve_nodes < 2 => bad("sphere.curve_nodes must be at least 2"),
            _ => Ok(()),
        }
    }

    pub fn affine_options(&self) -> AffineOptions {
        AffineOptions {
            residual_tol: self.tolerances.residual_tol,
            exact_tol: self.tolerances.exact_tol,
            solve_tol: self.numerics.solve_tol,
            rank_tol: self.numerics.rank_tol,
            order: self.numerics.order,
        }
    }

    pub fn frame_options(&self) -> FrameOptions {
        FrameOptions {
            iso_tol: self.numerics.iso_tol,
            quadric_tol: self.numerics.quadric_tol,
            newton_iters: self.numerics.newton_iters,
        }
    }
}
