//! Experiment configuration: a flat TOML document, or JSON with the same
//! schema when the file name ends in `.json`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{io, ExteriorSpec, FractionalOrder, GraphFunction, IndicatorGrid, SetExterior};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::solvers::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    FractionalObstacle,
    TwoMembranes,
    SMinimalSet,
    /// No solve: the analyses run on the configured `graph` profile.
    GraphAnalysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    /// Half width of the domain box (graphs) or of the set box.
    pub radius: f64,
    pub spacing: Option<f64>,
    /// Spacing `2^-level`, used when `spacing` is absent.
    pub level: Option<i32>,
}

impl GridConfig {
    pub fn spacing(&self) -> Result<f64> {
        match (self.spacing, self.level) {
            (Some(h), _) if h > 0.0 && h.is_finite() => Ok(h),
            (Some(h), _) => Err(Error::Config(format!("grid spacing {h} must be positive"))),
            (None, Some(k)) => Ok(2f64.powi(-k)),
            (None, None) => Err(Error::Config("grid needs `spacing` or `level`".into())),
        }
    }
}

/// Scalar field on the graph grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Constant { value: f64 },
    /// `height - curvature |x|^2`.
    Paraboloid { height: f64, curvature: f64 },
    /// `height (1 - |x|^2 / width^2)_+^3`.
    Bump { height: f64, width: f64 },
    Plane { slope: Vec<f64>, offset: f64 },
    /// `amplitude |x|^exponent`.
    Power { amplitude: f64, exponent: f64 },
    /// Grid file in the domain text format.
    File { path: PathBuf },
}

impl Profile {
    fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        match self {
            Profile::Constant { value } => *value,
            Profile::Paraboloid { height, curvature } => height - curvature * r2,
            Profile::Bump { height, width } => height * (1.0 - r2 / (width * width)).max(0.0).powi(3),
            Profile::Plane { slope, offset } => offset + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            Profile::Power { amplitude, exponent } => amplitude * r2.sqrt().powf(*exponent),
            Profile::File { .. } => unreachable!("file profiles are read, not evaluated"),
        }
    }

    pub fn build(&self, grid: &GridConfig, exterior: ExteriorSpec, scale: f64, base: &Path) -> Result<GraphFunction> {
        let h = grid.spacing()?;
        let g = match self {
            Profile::File { path } => {
                let g = io::read_graph(&base.join(path))?;
                let same = g.dim() == grid.dim && (g.radius() - grid.radius).abs() < 1e-12 && (g.spacing() - h).abs() < 1e-15;
                if !same {
                    return Err(Error::Config(format!("{} does not match the configured grid", path.display())));
                }
                g.with_exterior(exterior)?
            }
            Profile::Plane { slope, .. } if slope.len() != grid.dim => {
                return Err(Error::Config("plane slope length must equal the grid dimension".into()));
            }
            p => GraphFunction::from_fn(grid.dim, grid.radius, h, exterior, |x| p.value(x))?,
        };
        if scale == 1.0 {
            return Ok(g);
        }
        let scaled = g.values().iter().map(|v| v * scale).collect();
        g.with_values(scaled)
    }
}

/// Values of a graph outside its box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Exterior {
    #[default]
    Zero,
    Flat { value: f64 },
    Plane { slope: Vec<f64>, offset: f64 },
}

impl Exterior {
    pub fn spec(&self, dim: usize) -> Result<ExteriorSpec> {
        Ok(match self {
            Exterior::Zero => ExteriorSpec::Zero,
            Exterior::Flat { value } => ExteriorSpec::flat(dim, *value),
            Exterior::Plane { slope, offset } => {
                if slope.len() != dim {
                    return Err(Error::Config("exterior slope length must equal the grid dimension".into()));
                }
                ExteriorSpec::plane(slope.clone(), *offset)
            }
        })
    }
}

/// Subset of the set box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    #[default]
    Empty,
    /// `{x . normal < offset}`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    Ball { center: Vec<f64>, radius: f64 },
    /// Explicit list of cell indices.
    Cells { indices: Vec<usize> },
    File { path: PathBuf },
}

impl Shape {
    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Shape::Empty | Shape::Cells { .. } | Shape::File { .. } => false,
            Shape::HalfSpace { normal, offset } => normal.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() < *offset,
            Shape::Ball { center, radius } => {
                center.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>() < radius * radius
            }
        }
    }

    pub fn build(&self, grid: &GridConfig, exterior: SetExterior, base: &Path) -> Result<IndicatorGrid> {
        let h = grid.spacing()?;
        match self {
            Shape::File { path } => {
                let e = io::read_indicator(&base.join(path))?;
                let template = IndicatorGrid::centered(grid.dim, grid.radius, h, exterior.clone(), |_| 0.0)?;
                e.check_compatible(&template)?;
                IndicatorGrid::new(grid.dim, &e.lower()[..grid.dim], &e.counts()[..grid.dim], h, e.cells().to_vec(), exterior)
            }
            Shape::Cells { indices } => {
                let e = IndicatorGrid::centered(grid.dim, grid.radius, h, exterior, |_| 0.0)?;
                let mut cells = e.cells().to_vec();
                for &i in indices {
                    *cells
                        .get_mut(i)
                        .ok_or_else(|| Error::Config(format!("cell index {i} outside the set box")))? = 1.0;
                }
                e.with_cells(cells)
            }
            s => IndicatorGrid::centered(grid.dim, grid.radius, h, exterior, |x| if s.contains(x) { 1.0 } else { 0.0 }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetExteriorConfig {
    #[default]
    Complement,
    Full,
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl SetExteriorConfig {
    pub fn rule(&self) -> Result<SetExterior> {
        match self {
            SetExteriorConfig::Complement => Ok(SetExterior::Complement),
            SetExteriorConfig::Full => Ok(SetExterior::Full),
            SetExteriorConfig::HalfSpace { normal, offset } => SetExterior::half_space(normal, *offset),
        }
    }
}

/// Data of the set obstacle problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetConfig {
    /// Half width of the cube in which cells are free.
    pub window: f64,
    #[serde(default)]
    pub exterior: SetExteriorConfig,
    /// Data outside the window, also the starting guess inside it.
    #[serde(default)]
    pub frozen: Shape,
    #[serde(default)]
    pub obstacle: Shape,
}

/// Multipliers applied to profile values; the `forcing` and `obstacle`
/// sweep parameters set them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scale {
    pub forcing: f64,
    pub obstacle: f64,
}

impl Default for Scale {
    fn default() -> Self {
        Self { forcing: 1.0, obstacle: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analysis {
    /// Log-log slope of the gap `u - phi` (or `u - v`) at each contact boundary cell.
    Detachment {
        /// Fit window in multiples of the spacing.
        window_cells: Option<[f64; 2]>,
    },
    RegularPoint {
        #[serde(default = "default_threshold")]
        threshold: f64,
    },
    EulerLagrange {
        /// One-sided tolerance; `20 h^(1-2s)` when absent.
        tol: Option<f64>,
    },
    Holder {
        #[serde(default)]
        target: Target,
        derivative: usize,
        beta: f64,
        half_width: f64,
        seed: Option<u64>,
    },
    Linearization {
        beta: f64,
        pairs: usize,
        /// Pairs are drawn in the cube of this half width.
        sample_radius: f64,
        min_separation: f64,
        seed: Option<u64>,
    },
    Audit {
        trials: usize,
        r_min: f64,
        r_max: f64,
        /// Ball centers are drawn in the cube of this half width.
        half_width: f64,
        /// Vertical extent of the rasterized subgraphs.
        z_range: [f64; 2],
        seed: Option<u64>,
    },
    Flatness {
        point: Vec<f64>,
        r_max: Option<f64>,
    },
}

fn default_threshold() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    U,
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub s: f64,
    pub grid: GridConfig,
    /// Graph obstacle of the fractional obstacle problem.
    pub obstacle: Option<Profile>,
    /// Forcing `f` of the nonlocal graph.
    pub forcing: Option<Profile>,
    /// Forcing `g` of the classical membrane.
    pub forcing_v: Option<Profile>,
    /// Graph inspected by `graph_analysis`.
    pub graph: Option<Profile>,
    #[serde(default)]
    pub exterior: Exterior,
    #[serde(default)]
    pub exterior_v: Exterior,
    pub set: Option<SetConfig>,
    #[serde(default)]
    pub scale: Scale,
    /// Seed shared by the solver and every analysis without its own seed.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub analyses: Vec<Analysis>,
    pub output_dir: Option<PathBuf>,
    /// Directory that relative input paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        let parsed = if json {
            serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })
        } else {
            toml::from_str(text).map_err(|e| {
                let line = e.span().map(|s| text[..s.start].lines().count().max(1)).unwrap_or(0);
                Error::Parse { line, msg: e.message().to_string() }
            })
        };
        let mut config: Self = parsed?;
        config.solver.seed = config.seed;
        Ok(config)
    }

    /// Reads a config; a missing `.toml` or `.json` extension is tried in that order.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>, PathBuf)> {
        let resolved = resolve_path(path)?;
        let bytes = std::fs::read(&resolved).map_err(|e| Error::io(&resolved, e))?;
        let text = String::from_utf8(bytes.clone()).map_err(|_| Error::input("config is not UTF-8"))?;
        let json = resolved.extension().is_some_and(|e| e == "json");
        let mut config = Self::parse(&text, json)?;
        config.base_dir = resolved.parent().map(Path::to_path_buf).unwrap_or_default();
        config.validate()?;
        Ok((config, bytes, resolved))
    }

    pub fn order(&self) -> Result<FractionalOrder> {
        FractionalOrder::new(self.s)
    }

    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.order()?, self.grid.spacing()?)
    }

    /// Checks every cross-reference before any computation starts.
    pub fn validate(&self) -> Result<()> {
        self.order()?;
        self.grid.spacing()?;
        self.solver.validate()?;
        let need = |field: bool, name: &str| {
            if field {
                Ok(())
            } else {
                Err(Error::Config(format!("problem {:?} needs `{name}`", self.problem)))
            }
        };
        let graph_dims = 1..=2;
        match self.problem {
            Problem::FractionalObstacle => need(self.obstacle.is_some(), "obstacle")?,
            Problem::TwoMembranes => {}
            Problem::SMinimalSet => need(self.set.is_some(), "set")?,
            Problem::GraphAnalysis => need(self.graph.is_some(), "graph")?,
        }
        if self.problem == Problem::SMinimalSet {
            if !(2..=3).contains(&self.grid.dim) {
                return Err(Error::Config("set problems need grid.dim 2 or 3".into()));
            }
        } else if !graph_dims.contains(&self.grid.dim) {
            return Err(Error::Config("graph problems need grid.dim 1 or 2".into()));
        }
        for profile in [&self.obstacle, &self.forcing, &self.forcing_v, &self.graph].into_iter().flatten() {
            if let Profile::File { path } = profile {
                self.check_exists(path)?;
            }
        }
        if let Some(set) = &self.set {
            for shape in [&set.frozen, &set.obstacle] {
                if let Shape::File { path } = shape {
                    self.check_exists(path)?;
                }
            }
        }
        for a in &self.analyses {
            let ok = match (a, self.problem) {
                (Analysis::Detachment { .. }, p) => matches!(p, Problem::FractionalObstacle | Problem::TwoMembranes),
                (Analysis::RegularPoint { .. } | Analysis::EulerLagrange { .. } | Analysis::Audit { .. }, p) => {
                    p == Problem::TwoMembranes
                }
                (Analysis::Holder { target: Target::V, .. }, p) => p == Problem::TwoMembranes,
                (Analysis::Holder { .. } | Analysis::Linearization { .. }, p) => p != Problem::SMinimalSet,
                (Analysis::Flatness { .. }, _) => true,
            };
            if !ok {
                return Err(Error::Config(format!("analysis {a:?} does not apply to problem {:?}", self.problem)));
            }
        }
        Ok(())
    }

    fn check_exists(&self, path: &Path) -> Result<()> {
        let full = self.base_dir.join(path);
        if full.is_file() {
            Ok(())
        } else {
            Err(Error::Config(format!("referenced file {} does not exist", full.display())))
        }
    }
}

pub fn resolve_path(path: &Path) -> Result<PathBuf> {
    if path.is_file() {
        return Ok(path.to_path_buf());
    }
    for ext in ["toml", "json"] {
        let candidate = path.with_extension(ext);
        if candidate.is_file() {
            return Ok(candidate);
        }
    }
    Err(Error::Config(format!("config {} not found", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBSTACLE: &str = r#"
problem = "fractional_obstacle"
s = 0.25
output_dir = "out"

[grid]
dim = 1
radius = 1.0
level = 5

[obstacle]
kind = "paraboloid"
height = 0.5
curvature = 4.0

[solver]
tol_contact = 1e-13

[[analyses]]
kind = "detachment"
window_cells = [4.0, 32.0]
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = ExperimentConfig::parse(OBSTACLE, false).unwrap();
        let json = serde_json::to_string(&a).unwrap();
        let b = ExperimentConfig::parse(&json, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.grid.spacing().unwrap(), 1.0 / 32.0);
        assert_eq!(a.solver.tol_contact, Some(1e-13));
        a.validate().unwrap();
    }

    #[test]
    fn rejects_bad_input() {
        let unknown = OBSTACLE.replace("height = 0.5", "height = 0.5\ncolour = 1");
        assert!(matches!(ExperimentConfig::parse(&unknown, false), Err(Error::Parse { .. })));
        let missing = OBSTACLE.replace("[obstacle]\nkind = \"paraboloid\"\nheight = 0.5\ncurvature = 4.0\n", "");
        assert!(matches!(ExperimentConfig::parse(&missing, false).unwrap().validate(), Err(Error::Config(_))));
        let bad_s = OBSTACLE.replace("s = 0.25", "s = 0.75");
        assert!(ExperimentConfig::parse(&bad_s, false).unwrap().validate().is_err());
        let file = OBSTACLE.replace("kind = \"paraboloid\"\nheight = 0.5\ncurvature = 4.0", "kind = \"file\"\npath = \"nowhere.grid\"");
        assert!(matches!(ExperimentConfig::parse(&file, false).unwrap().validate(), Err(Error::Config(_))));
    }

    #[test]
    fn profiles_evaluate() {
        let grid = GridConfig { dim: 1, radius: 1.0, spacing: Some(0.25), level: None };
        let p = Profile::Paraboloid { height: 1.0, curvature: 2.0 };
        let g = p.build(&grid, ExteriorSpec::Zero, 2.0, Path::new(".")).unwrap();
        let x = g.center(0)[0];
        assert!((g.values()[0] - 2.0 * (1.0 - 2.0 * x * x)).abs() < 1e-15);
        let b = Profile::Bump { height: 1.0, width: 0.5 }.build(&grid, ExteriorSpec::Zero, 1.0, Path::new(".")).unwrap();
        assert_eq!(b.values()[0], 0.0);
        assert!(b.values()[3] > 0.0);
    }
}
