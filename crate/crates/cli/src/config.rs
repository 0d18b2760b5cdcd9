//! Experiment configuration: one JSON document per run.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use weakgeo::nalgebra::{DMatrix, DVector};
use weakgeo::proxset::{
    AffineField, FieldBounds, PhiBound, ProxSet, QuadraticField, RadialField, ScalarField,
};
use weakgeo::solver::SolverConfig;
use weakgeo::verify::Region;
use weakgeo::{ManifoldModel, Point};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub seed: u64,
    pub manifold: ManifoldSpec,
    pub set: SetSpec,
    /// Constant φ replacing the shape default.
    #[serde(default)]
    pub phi: Option<f64>,
    #[serde(default)]
    pub endpoints: Option<[Vec<f64>; 2]>,
    /// Interior waypoints of the seed polyline.
    #[serde(default)]
    pub waypoints: Vec<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub verify: Vec<TaskSpec>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Euclidean { dim: usize },
    Sphere { dim: usize, curvature: f64 },
    Hyperbolic { dim: usize, curvature: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Full,
    Ball { center: Vec<f64>, radius: f64 },
    BallComplement { center: Vec<f64>, radius: f64 },
    Sublevel { field: FieldSpec, bounds: BoundsSpec },
    Hypersurface { field: FieldSpec, bounds: BoundsSpec },
    Intersection { members: Vec<SetSpec> },
}

/// Scalar field in ambient coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Affine { normal: Vec<f64>, offset: f64 },
    Radial { center: Vec<f64>, radius: f64 },
    Quadratic { matrix: Vec<Vec<f64>>, linear: Vec<f64>, constant: f64 },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub g_min: f64,
    pub hess_max: f64,
    /// Omitted means unbounded.
    #[serde(default)]
    pub reach: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub n: usize,
    pub step0: f64,
    pub armijo_shrink: f64,
    pub armijo_slope: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolverConfig::default();
        Self {
            n: d.n,
            step0: d.step0,
            armijo_shrink: d.armijo_shrink,
            armijo_slope: d.armijo_slope,
            tol_residual: d.tol_residual,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

fn default_max_dist() -> f64 {
    0.1
}

fn default_max_error() -> f64 {
    1e-2
}

fn default_refinement() -> f64 {
    1.5
}

fn default_c_tol() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskSpec {
    Lipschitz {
        region: RegionSpec,
        tube: f64,
        #[serde(default)]
        pair_radius: Option<f64>,
        epsilon: f64,
        #[serde(default)]
        c_const: Option<f64>,
        samples: usize,
        /// Extra pass condition on the largest sampled ratio.
        #[serde(default)]
        max_ratio_limit: Option<f64>,
    },
    Defect {
        region: RegionSpec,
        samples: usize,
        #[serde(default)]
        slope_range: Option<[f64; 2]>,
    },
    Directional {
        point: Vec<f64>,
        direction: Vec<f64>,
        steps: Vec<f64>,
        #[serde(default = "default_max_error")]
        max_error: f64,
    },
    Phi {
        region: RegionSpec,
        samples: usize,
        #[serde(default = "default_max_dist")]
        max_dist: f64,
    },
    /// Geodesic `γ` between two points against geodesic `η`, evaluated at
    /// `(n, fd_step)` and `(2n, fd_step/2)`.
    Identity {
        gamma: [Vec<f64>; 2],
        eta: [Vec<f64>; 2],
        n: usize,
        fd_step: f64,
        #[serde(default = "default_refinement")]
        min_refinement: f64,
    },
    /// Solves from the configured seed, then compares against a curve
    /// through `waypoints` (re-solved when `resolve` is set).
    Comparison {
        waypoints: Vec<Vec<f64>>,
        #[serde(default)]
        resolve: bool,
        #[serde(default = "default_c_tol")]
        c_tol: f64,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::Lipschitz { .. } => "lipschitz",
            TaskSpec::Defect { .. } => "defect",
            TaskSpec::Directional { .. } => "directional",
            TaskSpec::Phi { .. } => "phi",
            TaskSpec::Identity { .. } => "identity",
            TaskSpec::Comparison { .. } => "comparison",
        }
    }
}

/// Validated configuration with constructed model objects.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub manifold: ManifoldModel,
    pub set: ProxSet,
    pub endpoints: Option<(Point, Point)>,
    pub waypoints: Vec<Point>,
    pub solver: SolverConfig,
}

fn cfg_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("bad config: {e}")))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            )));
        }
        Ok(cfg)
    }

    pub fn build(self) -> Result<Experiment, CliError> {
        let manifold = match self.manifold {
            ManifoldSpec::Euclidean { dim } => ManifoldModel::euclidean(dim),
            ManifoldSpec::Sphere { dim, curvature } => ManifoldModel::sphere(dim, curvature),
            ManifoldSpec::Hyperbolic { dim, curvature } => ManifoldModel::hyperbolic(dim, curvature),
        }
        .map_err(cfg_err)?;
        let mut set = build_set(&manifold, &self.set)?;
        if let Some(phi) = self.phi {
            if !(phi >= 0.0) {
                return Err(CliError::Config("phi must be nonnegative".into()));
            }
            set = set.with_phi(PhiBound::Constant(phi));
        }
        let endpoints = match &self.endpoints {
            Some([a, b]) => {
                let x = manifold.point(a.clone()).map_err(cfg_err)?;
                let y = manifold.point(b.clone()).map_err(cfg_err)?;
                for (name, p) in [("start", &x), ("end", &y)] {
                    if !set.contains(p, weakgeo::solver::FEASIBILITY_TOL) {
                        return Err(CliError::Config(format!("{name} point is not in the set")));
                    }
                }
                Some((x, y))
            }
            None => None,
        };
        let waypoints = self
            .waypoints
            .iter()
            .map(|w| manifold.point(w.clone()).map_err(cfg_err))
            .collect::<Result<Vec<_>, _>>()?;
        let solver = SolverConfig {
            n: self.solver.n,
            step0: self.solver.step0,
            armijo_shrink: self.solver.armijo_shrink,
            armijo_slope: self.solver.armijo_slope,
            tol_residual: self.solver.tol_residual,
            max_iter: self.solver.max_iter,
            seed: self.seed,
        };
        solver.validate().map_err(cfg_err)?;
        Ok(Experiment {
            config: self,
            manifold,
            set,
            endpoints,
            waypoints,
            solver,
        })
    }
}

pub fn build_region(m: &ManifoldModel, spec: &RegionSpec) -> Result<Region, CliError> {
    if !(spec.radius > 0.0) {
        return Err(CliError::Config("region radius must be positive".into()));
    }
    Ok(Region {
        center: m.point(spec.center.clone()).map_err(cfg_err)?,
        radius: spec.radius,
    })
}

fn vector(m: &ManifoldModel, v: &[f64]) -> Result<DVector<f64>, CliError> {
    if v.len() != m.ambient_dim() {
        return Err(CliError::Config(format!(
            "field vector has {} entries, ambient dimension is {}",
            v.len(),
            m.ambient_dim()
        )));
    }
    Ok(DVector::from_column_slice(v))
}

fn build_field(m: &ManifoldModel, spec: &FieldSpec) -> Result<Arc<dyn ScalarField>, CliError> {
    Ok(match spec {
        FieldSpec::Affine { normal, offset } => Arc::new(AffineField {
            normal: vector(m, normal)?,
            offset: *offset,
        }),
        FieldSpec::Radial { center, radius } => Arc::new(RadialField {
            center: vector(m, center)?,
            radius: *radius,
        }),
        FieldSpec::Quadratic {
            matrix,
            linear,
            constant,
        } => {
            let k = m.ambient_dim();
            if matrix.len() != k || matrix.iter().any(|r| r.len() != k) {
                return Err(CliError::Config(format!("quadratic matrix must be {k}×{k}")));
            }
            let a = DMatrix::from_fn(k, k, |i, j| matrix[i][j]);
            if (&a - a.transpose()).abs().max() > 1e-12 * (1.0 + a.abs().max()) {
                return Err(CliError::Config("quadratic matrix must be symmetric".into()));
            }
            Arc::new(QuadraticField {
                matrix: a,
                linear: vector(m, linear)?,
                constant: *constant,
            })
        }
    })
}

fn build_bounds(b: &BoundsSpec) -> FieldBounds {
    FieldBounds {
        g_min: b.g_min,
        hess_max: b.hess_max,
        reach: b.reach.unwrap_or(f64::INFINITY),
    }
}

pub fn build_set(m: &ManifoldModel, spec: &SetSpec) -> Result<ProxSet, CliError> {
    let point = |c: &Vec<f64>| m.point(c.clone()).map_err(cfg_err);
    match spec {
        SetSpec::Full => Ok(ProxSet::full(*m)),
        SetSpec::Ball { center, radius } => ProxSet::ball(*m, point(center)?, *radius).map_err(cfg_err),
        SetSpec::BallComplement { center, radius } => {
            ProxSet::ball_complement(*m, point(center)?, *radius).map_err(cfg_err)
        }
        SetSpec::Sublevel { field, bounds } => {
            ProxSet::sublevel(*m, build_field(m, field)?, build_bounds(bounds)).map_err(cfg_err)
        }
        SetSpec::Hypersurface { field, bounds } => {
            ProxSet::hypersurface(*m, build_field(m, field)?, build_bounds(bounds)).map_err(cfg_err)
        }
        SetSpec::Intersection { members } => {
            let sets = members
                .iter()
                .map(|s| build_set(m, s))
                .collect::<Result<Vec<_>, _>>()?;
            ProxSet::intersection(*m, sets).map_err(cfg_err)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OBSTACLE: &str = r#"{
        "schema": 1,
        "manifold": {"kind": "euclidean", "dim": 2},
        "set": {"shape": "ball_complement", "center": [0, 0], "radius": 1},
        "endpoints": [[-2, 0], [2, 0]],
        "waypoints": [[0, 2]],
        "solver": {"n": 200}
    }"#;

    #[test]
    fn parses_and_builds() {
        let exp = ExperimentConfig::from_json(OBSTACLE).unwrap().build().unwrap();
        assert_eq!(exp.solver.n, 200);
        assert_eq!(exp.solver.tol_residual, SolverConfig::default().tol_residual);
        assert_eq!(exp.waypoints.len(), 1);
        assert!(exp.endpoints.is_some());
    }

    #[test]
    fn rejects_bad_configs() {
        let inside = OBSTACLE.replace("[-2, 0], [2, 0]", "[0, 0.5], [2, 0]");
        let e = ExperimentConfig::from_json(&inside).unwrap().build().unwrap_err();
        assert!(e.to_string().contains("start point"));
        let schema = OBSTACLE.replace("\"schema\": 1", "\"schema\": 7");
        assert!(ExperimentConfig::from_json(&schema).is_err());
        let unknown = OBSTACLE.replace("\"n\": 200", "\"n\": 200, \"tolerance\": 1");
        assert!(ExperimentConfig::from_json(&unknown).is_err());
        let small = OBSTACLE.replace("\"n\": 200", "\"n\": 2");
        assert!(ExperimentConfig::from_json(&small).unwrap().build().is_err());
    }

    #[test]
    fn builds_field_shapes() {
        let text = r#"{
            "schema": 1,
            "manifold": {"kind": "sphere", "dim": 2, "curvature": 1},
            "set": {"shape": "intersection", "members": [
                {"shape": "sublevel", "field": {"type": "affine", "normal": [0, 0, -1], "offset": 0},
                 "bounds": {"g_min": 0.5, "hess_max": 0}},
                {"shape": "ball", "center": [0, 0, 1], "radius": 1.2}
            ]},
            "phi": 0.25
        }"#;
        let exp = ExperimentConfig::from_json(text).unwrap().build().unwrap();
        assert_eq!(exp.set.phi(&Point::new(vec![0.0, 0.0, 1.0])), 0.25);
        let bad = text.replace("[0, 0, -1]", "[0, -1]");
        assert!(ExperimentConfig::from_json(&bad).unwrap().build().is_err());
    }
}
