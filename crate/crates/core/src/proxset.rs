//! Catalog of prox-regular subsets: membership, metric projection,
//! Bouligand tangent cones, proximal normal cones and φ bounds.
//!
//! Every shape is described by a list of constraints `h_j(x) ≤ 0` (or
//! `h_j(x) = 0` for hypersurfaces) given in ambient coordinates. Balls use
//! closed-form radial projections; level sets of scalar fields go through a
//! Lagrange–Newton solve in ambient coordinates with the model embedding as
//! an extra equality constraint. On the curved models the squared ambient
//! chord is a monotone function of the geodesic distance, so nearest points
//! for the chord are nearest points for the Riemannian distance.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{GeoError, Result};
use crate::manifold::{ManifoldModel, ModelKind, Point, TangentVector};

/// Distance below which a constraint counts as active.
pub const ACTIVE_TOL: f64 = 1e-9;

/// Membership slack accepted by the cone operations.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Smooth scalar field in ambient coordinates, with Euclidean derivatives.
///
/// Implementations must be reentrant: they are evaluated concurrently.
pub trait ScalarField: Send + Sync + fmt::Debug {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// `h(x) = ⟨a, x⟩ + b`.
#[derive(Debug, Clone)]
pub struct AffineField {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl ScalarField for AffineField {
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.normal.dot(x) + self.offset
    }

    fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
        self.normal.clone()
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(x.len(), x.len())
    }
}

/// `h(x) = ‖x − c‖ − r` (ambient Euclidean norm).
#[derive(Debug, Clone)]
pub struct RadialField {
    pub center: DVector<f64>,
    pub radius: f64,
}

impl ScalarField for RadialField {
    fn value(&self, x: &DVector<f64>) -> f64 {
        (x - &self.center).norm() - self.radius
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let d = x - &self.center;
        let n = d.norm();
        if n == 0.0 {
            DVector::zeros(x.len())
        } else {
            d / n
        }
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = x - &self.center;
        let n = d.norm();
        let dim = x.len();
        if n == 0.0 {
            return DMatrix::zeros(dim, dim);
        }
        let u = d / n;
        (DMatrix::identity(dim, dim) - &u * u.transpose()) / n
    }
}

/// `h(x) = ½ xᵀAx + bᵀx + c` with symmetric `A`.
#[derive(Debug, Clone)]
pub struct QuadraticField {
    pub matrix: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub constant: f64,
}

impl ScalarField for QuadraticField {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.matrix * x)) + self.linear.dot(x) + self.constant
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x + &self.linear
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.matrix.clone()
    }
}

/// Regularity data declared for a level set `{h = 0}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldBounds {
    /// Lower bound of the Riemannian gradient norm on the tube around `{h = 0}`.
    pub g_min: f64,
    /// Upper bound of the Hessian operator norm on the same tube.
    pub hess_max: f64,
    /// Radius of the neighborhood on which the projection is single-valued.
    pub reach: f64,
}

#[derive(Clone)]
pub enum PhiBound {
    /// Per-shape default.
    Default,
    Constant(f64),
    Custom(Arc<dyn Fn(&Point) -> f64 + Send + Sync>),
}

impl fmt::Debug for PhiBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiBound::Default => write!(f, "Default"),
            PhiBound::Constant(c) => write!(f, "Constant({c})"),
            PhiBound::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Shape {
    FullManifold,
    GeodesicBall {
        center: Point,
        radius: f64,
    },
    /// Closure of the complement of the open ball.
    BallComplement {
        center: Point,
        radius: f64,
    },
    /// `{h ≤ 0}`.
    Sublevel {
        field: Arc<dyn ScalarField>,
        bounds: FieldBounds,
    },
    /// `{h = 0}`.
    Hypersurface {
        field: Arc<dyn ScalarField>,
        bounds: FieldBounds,
    },
    Intersection(Vec<Shape>),
}

/// A closed φ-convex subset of a model space.
#[derive(Debug, Clone)]
pub struct ProxSet {
    manifold: ManifoldModel,
    shape: Shape,
    phi: PhiBound,
}

/// Outward unit normals of the constraints active at `base`.
#[derive(Debug, Clone)]
pub struct ConeBasis {
    pub base: Point,
    pub active_normals: Vec<TangentVector>,
    /// `true` where the constraint is an equality (both normal directions).
    pub equality: Vec<bool>,
    /// Index of each active constraint in the set's constraint list.
    pub constraint_ids: Vec<usize>,
}

impl ConeBasis {
    pub fn is_interior(&self) -> bool {
        self.active_normals.is_empty()
    }
}

/// One scalar constraint in ambient coordinates.
#[derive(Debug, Clone)]
pub(crate) enum Constraint {
    Field {
        field: Arc<dyn ScalarField>,
        bounds: FieldBounds,
        equality: bool,
    },
    Ball {
        center: Point,
        radius: f64,
        outside: bool,
    },
}

impl Constraint {
    fn is_equality(&self) -> bool {
        matches!(self, Constraint::Field { equality: true, .. })
    }

    /// Constraint value in the representation used by the Newton solve.
    fn value(&self, m: &ManifoldModel, x: &DVector<f64>) -> f64 {
        match self {
            Constraint::Field { field, .. } => field.value(x),
            Constraint::Ball {
                center,
                radius,
                outside,
            } => {
                let v = ball_value(m, center.coords(), *radius, x);
                if *outside {
                    -v
                } else {
                    v
                }
            }
        }
    }

    fn egrad(&self, m: &ManifoldModel, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Constraint::Field { field, .. } => field.gradient(x),
            Constraint::Ball {
                center,
                radius,
                outside,
            } => {
                let g = ball_egrad(m, center.coords(), *radius, x);
                if *outside {
                    -g
                } else {
                    g
                }
            }
        }
    }

    fn ehess(&self, m: &ManifoldModel, x: &DVector<f64>) -> DMatrix<f64> {
        match self {
            Constraint::Field { field, .. } => field.hessian(x),
            Constraint::Ball {
                radius, outside, ..
            } => {
                let n = x.len();
                if m.kind() == ModelKind::Euclidean {
                    let s = if *outside { -1.0 } else { 1.0 };
                    DMatrix::identity(n, n) * (s / radius)
                } else {
                    DMatrix::zeros(n, n)
                }
            }
        }
    }

    /// Signed distance-like slack: positive outside the constraint.
    fn slack(&self, m: &ManifoldModel, x: &Point) -> f64 {
        match self {
            Constraint::Field { field, .. } => {
                let h = field.value(x.coords());
                let g = m.norm(&m.riemannian_gradient(x, &field.gradient(x.coords())));
                if g > 0.0 {
                    h / g
                } else {
                    h
                }
            }
            Constraint::Ball {
                center,
                radius,
                outside,
            } => {
                let d = m.dist(center, x) - radius;
                if *outside {
                    -d
                } else {
                    d
                }
            }
        }
    }

    fn unit_normal(&self, m: &ManifoldModel, x: &Point) -> Result<TangentVector> {
        let g = m.riemannian_gradient(x, &self.egrad(m, x.coords()));
        let n = m.norm(&g);
        if !(n > 0.0) {
            return Err(GeoError::Numeric(
                "constraint gradient vanishes on the boundary".into(),
            ));
        }
        Ok(g.scaled(1.0 / n))
    }
}

/// Normalized ball constraint `≤ 0` inside `B(c, ρ)`, with unit Riemannian
/// gradient on the boundary sphere.
fn ball_value(m: &ManifoldModel, c: &DVector<f64>, rho: f64, x: &DVector<f64>) -> f64 {
    match m.kind() {
        ModelKind::Euclidean => ((x - c).norm_squared() - rho * rho) / (2.0 * rho),
        ModelKind::Sphere => {
            let r = m.radius();
            (r * r * (rho / r).cos() - x.dot(c)) / (r * (rho / r).sin())
        }
        ModelKind::Hyperbolic => {
            let r = m.radius();
            (-m.ambient_inner(x, c) - r * r * (rho / r).cosh()) / (r * (rho / r).sinh())
        }
    }
}

fn ball_egrad(m: &ManifoldModel, c: &DVector<f64>, rho: f64, x: &DVector<f64>) -> DVector<f64> {
    match m.kind() {
        ModelKind::Euclidean => (x - c) / rho,
        ModelKind::Sphere => {
            let r = m.radius();
            -c / (r * (rho / r).sin())
        }
        ModelKind::Hyperbolic => {
            let r = m.radius();
            -m.metric_apply(c) / (r * (rho / r).sinh())
        }
    }
}

/// φ for the complement of a geodesic ball of radius `rho`.
fn complement_phi(m: &ManifoldModel, rho: f64) -> f64 {
    match m.kind() {
        ModelKind::Euclidean => 1.0 / (2.0 * rho),
        ModelKind::Sphere => {
            let r = m.radius();
            if rho >= 0.5 * PI * r {
                0.0
            } else {
                // sup of cot(ρ/R)·tan(d/2R)/d over the convexity radius d ≤ πR/2
                2.0 / (PI * r * (rho / r).tan())
            }
        }
        ModelKind::Hyperbolic => {
            let r = m.radius();
            1.0 / (2.0 * r * (rho / r).tanh())
        }
    }
}

fn shape_phi(m: &ManifoldModel, shape: &Shape) -> f64 {
    match shape {
        Shape::FullManifold => 0.0,
        Shape::GeodesicBall { radius, .. } => {
            if m.kind() == ModelKind::Sphere && *radius > 0.5 * PI * m.radius() {
                complement_phi(m, PI * m.radius() - radius)
            } else {
                0.0
            }
        }
        Shape::BallComplement { radius, .. } => complement_phi(m, *radius),
        Shape::Sublevel { bounds, .. } | Shape::Hypersurface { bounds, .. } => {
            0.5 * bounds.hess_max / bounds.g_min
        }
        Shape::Intersection(members) => members.iter().map(|s| shape_phi(m, s)).sum(),
    }
}

fn flatten(shape: &Shape, out: &mut Vec<Constraint>) {
    match shape {
        Shape::FullManifold => {}
        Shape::GeodesicBall { center, radius } => out.push(Constraint::Ball {
            center: center.clone(),
            radius: *radius,
            outside: false,
        }),
        Shape::BallComplement { center, radius } => out.push(Constraint::Ball {
            center: center.clone(),
            radius: *radius,
            outside: true,
        }),
        Shape::Sublevel { field, bounds } => out.push(Constraint::Field {
            field: field.clone(),
            bounds: *bounds,
            equality: false,
        }),
        Shape::Hypersurface { field, bounds } => out.push(Constraint::Field {
            field: field.clone(),
            bounds: *bounds,
            equality: true,
        }),
        Shape::Intersection(members) => members.iter().for_each(|s| flatten(s, out)),
    }
}

fn check_bounds(bounds: &FieldBounds) -> Result<()> {
    if !(bounds.g_min > 0.0 && bounds.hess_max >= 0.0 && bounds.reach > 0.0) {
        return Err(GeoError::InvalidParameter(format!(
            "field bounds need g_min > 0, hess_max ≥ 0, reach > 0: {bounds:?}"
        )));
    }
    Ok(())
}

impl ProxSet {
    pub fn full(manifold: ManifoldModel) -> Self {
        Self {
            manifold,
            shape: Shape::FullManifold,
            phi: PhiBound::Default,
        }
    }

    pub fn ball(manifold: ManifoldModel, center: Point, radius: f64) -> Result<Self> {
        Self::check_ball(&manifold, &center, radius)?;
        Ok(Self {
            manifold,
            shape: Shape::GeodesicBall { center, radius },
            phi: PhiBound::Default,
        })
    }

    pub fn ball_complement(manifold: ManifoldModel, center: Point, radius: f64) -> Result<Self> {
        Self::check_ball(&manifold, &center, radius)?;
        Ok(Self {
            manifold,
            shape: Shape::BallComplement { center, radius },
            phi: PhiBound::Default,
        })
    }

    fn check_ball(m: &ManifoldModel, center: &Point, radius: f64) -> Result<()> {
        m.check_point(center)?;
        if !(radius > 0.0 && radius < m.injectivity_radius()) {
            return Err(GeoError::InvalidParameter(format!(
                "ball radius must lie in (0, {}), got {radius}",
                m.injectivity_radius()
            )));
        }
        Ok(())
    }

    pub fn sublevel(
        manifold: ManifoldModel,
        field: Arc<dyn ScalarField>,
        bounds: FieldBounds,
    ) -> Result<Self> {
        check_bounds(&bounds)?;
        Ok(Self {
            manifold,
            shape: Shape::Sublevel { field, bounds },
            phi: PhiBound::Default,
        })
    }

    pub fn hypersurface(
        manifold: ManifoldModel,
        field: Arc<dyn ScalarField>,
        bounds: FieldBounds,
    ) -> Result<Self> {
        check_bounds(&bounds)?;
        Ok(Self {
            manifold,
            shape: Shape::Hypersurface { field, bounds },
            phi: PhiBound::Default,
        })
    }

    /// Intersection of sublevel sets, balls and ball complements.
    pub fn intersection(manifold: ManifoldModel, members: Vec<ProxSet>) -> Result<Self> {
        if members.is_empty() {
            return Err(GeoError::InvalidParameter(
                "intersection needs at least one member".into(),
            ));
        }
        let mut shapes = Vec::with_capacity(members.len());
        for s in members {
            if s.manifold != manifold {
                return Err(GeoError::InvalidParameter(
                    "intersection members live on different models".into(),
                ));
            }
            match s.shape {
                Shape::Sublevel { .. }
                | Shape::GeodesicBall { .. }
                | Shape::BallComplement { .. } => shapes.push(s.shape),
                other => {
                    return Err(GeoError::InvalidParameter(format!(
                        "unsupported intersection member: {other:?}"
                    )))
                }
            }
        }
        Ok(Self {
            manifold,
            shape: Shape::Intersection(shapes),
            phi: PhiBound::Default,
        })
    }

    pub fn with_phi(mut self, phi: PhiBound) -> Self {
        self.phi = phi;
        self
    }

    pub fn manifold(&self) -> &ManifoldModel {
        &self.manifold
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub(crate) fn constraints(&self) -> Vec<Constraint> {
        let mut out = Vec::new();
        flatten(&self.shape, &mut out);
        out
    }

    /// Radius of the neighborhood of `S` on which `project` is single-valued.
    pub fn reach(&self) -> f64 {
        let m = &self.manifold;
        fn shape_reach(m: &ManifoldModel, s: &Shape) -> f64 {
            match s {
                Shape::FullManifold => f64::INFINITY,
                Shape::GeodesicBall { radius, .. } => m.injectivity_radius() - radius,
                Shape::BallComplement { radius, .. } => *radius,
                Shape::Sublevel { bounds, .. } | Shape::Hypersurface { bounds, .. } => {
                    bounds.reach
                }
                Shape::Intersection(members) => members
                    .iter()
                    .map(|s| shape_reach(m, s))
                    .fold(f64::INFINITY, f64::min),
            }
        }
        shape_reach(m, &self.shape)
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        let m = &self.manifold;
        self.constraints().iter().all(|c| match c {
            Constraint::Field {
                field, equality, ..
            } => {
                let h = field.value(x.coords());
                if *equality {
                    h.abs() <= tol
                } else {
                    h <= tol
                }
            }
            Constraint::Ball { .. } => c.slack(m, x) <= tol,
        })
    }

    /// Value of the φ bound at `x`.
    pub fn phi(&self, x: &Point) -> f64 {
        match &self.phi {
            PhiBound::Default => shape_phi(&self.manifold, &self.shape),
            PhiBound::Constant(c) => *c,
            PhiBound::Custom(f) => f(x),
        }
    }

    /// Metric projection `P_S(z)`.
    pub fn project(&self, z: &Point) -> Result<Point> {
        let m = &self.manifold;
        m.check_point(z)?;
        let x = match &self.shape {
            Shape::FullManifold => return Ok(z.clone()),
            Shape::GeodesicBall { center, radius } => {
                if m.dist(center, z) <= *radius {
                    return Ok(z.clone());
                }
                radial(m, center, *radius, z)?
            }
            Shape::BallComplement { center, radius } => {
                let d = m.dist(center, z);
                if d >= *radius {
                    return Ok(z.clone());
                }
                if d <= 1e-12 * radius {
                    return Err(GeoError::Domain(
                        "projection onto a ball complement is multivalued at the center".into(),
                    ));
                }
                radial(m, center, *radius, z)?
            }
            Shape::Sublevel { field, .. } => {
                if field.value(z.coords()) <= 0.0 {
                    return Ok(z.clone());
                }
                let cs = self.constraints();
                let (x, lambda) = newton_project(m, z, &cs, &[0])?;
                if lambda[0] < -1e-9 {
                    return Err(GeoError::Numeric(format!(
                        "projection converged to a non-minimal critical point (λ = {:.3e})",
                        lambda[0]
                    )));
                }
                x
            }
            Shape::Hypersurface { .. } => newton_project(m, z, &self.constraints(), &[0])?.0,
            Shape::Intersection(_) => self.project_intersection(z)?,
        };
        let d = m.dist(z, &x);
        if d > self.reach() {
            return Err(GeoError::Domain(format!(
                "point lies {d:.6} from the set, beyond the declared reach {}",
                self.reach()
            )));
        }
        self.check_field_regularity(&x)?;
        Ok(x)
    }

    fn check_field_regularity(&self, x: &Point) -> Result<()> {
        let m = &self.manifold;
        for c in self.constraints() {
            if let Constraint::Field { field, bounds, .. } = &c {
                if c.slack(m, x).abs() > ACTIVE_TOL {
                    continue;
                }
                let g = m.norm(&m.riemannian_gradient(x, &field.gradient(x.coords())));
                if g < bounds.g_min {
                    return Err(GeoError::Numeric(format!(
                        "gradient norm {g:.3e} below the declared g_min {}",
                        bounds.g_min
                    )));
                }
            }
        }
        Ok(())
    }

    fn project_intersection(&self, z: &Point) -> Result<Point> {
        let m = &self.manifold;
        let cs = self.constraints();
        if cs.iter().all(|c| c.value(m, z.coords()) <= 0.0) {
            return Ok(z.clone());
        }
        let k = cs.len();
        let mut best: Option<(f64, Point)> = None;
        let mut last_err = None;
        for mask in 1u32..(1 << k) {
            let active: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
            if active.len() > m.dim() {
                continue;
            }
            let (x, lambda) = match newton_project(m, z, &cs, &active) {
                Ok(r) => r,
                Err(e) => {
                    last_err = Some(e);
                    continue;
                }
            };
            if lambda.iter().any(|&l| l < -1e-9) {
                continue;
            }
            let feasible = cs
                .iter()
                .enumerate()
                .filter(|(j, _)| !active.contains(j))
                .all(|(_, c)| c.slack(m, &x) <= ACTIVE_TOL);
            if !feasible {
                continue;
            }
            let d = m.dist(z, &x);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, x));
            }
        }
        best.map(|(_, x)| x).ok_or_else(|| {
            GeoError::Numeric(format!(
                "no admissible active set for the intersection projection (last error: {})",
                last_err.map_or_else(|| "none".to_string(), |e| e.to_string())
            ))
        })
    }

    /// Projection onto `{h_j = 0 : j ∈ active}`, used to keep nodes on the
    /// boundary faces they are pressed against.
    pub(crate) fn project_onto_faces(&self, z: &Point, active: &[usize]) -> Result<Point> {
        let cs = self.constraints();
        if let [j] = active {
            if let Constraint::Ball { center, radius, .. } = &cs[*j] {
                return radial(&self.manifold, center, *radius, z);
            }
        }
        Ok(newton_project(&self.manifold, z, &cs, active)?.0)
    }

    /// Active constraints and their outward unit normals at `x ∈ S`.
    pub fn cone_basis(&self, x: &Point) -> Result<ConeBasis> {
        let m = &self.manifold;
        if !self.contains(x, MEMBERSHIP_TOL) {
            return Err(GeoError::Domain("point is not in the set".into()));
        }
        let mut basis = ConeBasis {
            base: x.clone(),
            active_normals: Vec::new(),
            equality: Vec::new(),
            constraint_ids: Vec::new(),
        };
        for (j, c) in self.constraints().iter().enumerate() {
            if c.is_equality() || c.slack(m, x) >= -ACTIVE_TOL {
                basis.active_normals.push(c.unit_normal(m, x)?);
                basis.equality.push(c.is_equality());
                basis.constraint_ids.push(j);
            }
        }
        Ok(basis)
    }

    /// Metric projection of `v ∈ T_x M` onto the Bouligand tangent cone
    /// `T^B_S(x)`, with `x` the base of `v`.
    pub fn tangent_cone_project(&self, v: &TangentVector) -> Result<TangentVector> {
        let basis = self.cone_basis(v.base())?;
        Ok(project_polyhedral_cone(&self.manifold, &basis, v))
    }

    /// `‖P_{T^B_S(x)}(w)‖`; zero exactly when `w ∈ N^P_S(x)`.
    pub fn normal_residual(&self, w: &TangentVector) -> Result<f64> {
        Ok(self.manifold.norm(&self.tangent_cone_project(w)?))
    }
}

/// Nearest point of the cone `{u : ⟨n_i, u⟩ ≤ 0, ⟨n_e, u⟩ = 0}` by
/// enumeration of active subsets; the cones here have at most a handful of
/// generators.
pub(crate) fn project_polyhedral_cone(
    m: &ManifoldModel,
    basis: &ConeBasis,
    v: &TangentVector,
) -> TangentVector {
    let normals = &basis.active_normals;
    let k = normals.len();
    if k == 0 {
        return v.clone();
    }
    let required: u32 = basis
        .equality
        .iter()
        .enumerate()
        .filter(|(_, e)| **e)
        .fold(0, |acc, (i, _)| acc | (1 << i));
    let dots: Vec<f64> = normals.iter().map(|n| m.inner(n, v)).collect();
    let mut best: Option<(f64, TangentVector)> = None;
    for mask in 0u32..(1 << k) {
        if mask & required != required {
            continue;
        }
        let active: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        let mut w = v.clone();
        if !active.is_empty() {
            let a = active.len();
            let gram = DMatrix::from_fn(a, a, |r, c| m.inner(&normals[active[r]], &normals[active[c]]));
            let rhs = DVector::from_fn(a, |r, _| dots[active[r]]);
            let Ok(mu) = gram.svd(true, true).solve(&rhs, 1e-12) else {
                continue;
            };
            if active
                .iter()
                .zip(mu.iter())
                .any(|(&i, &mu)| !basis.equality[i] && mu < -1e-12)
            {
                continue;
            }
            for (&i, &mu) in active.iter().zip(mu.iter()) {
                w = w.axpy(-mu, &normals[i]);
            }
        }
        let scale = 1e-12 * (1.0 + m.norm(v));
        let feasible = (0..k)
            .filter(|i| !active.contains(i))
            .all(|i| m.inner(&normals[i], &w) <= scale);
        if !feasible {
            continue;
        }
        let gap = m.norm(&v.minus(&w));
        if best.as_ref().is_none_or(|(g, _)| gap < *g) {
            best = Some((gap, w));
        }
    }
    match best {
        Some((_, w)) => m.project_tangent(v.base(), w.coords().clone()),
        None => TangentVector::zero(v.base()),
    }
}

/// Radial projection onto the sphere of radius `rho` around `center`.
fn radial(m: &ManifoldModel, center: &Point, rho: f64, z: &Point) -> Result<Point> {
    let u = m.log(center, z)?;
    let n = m.norm(&u);
    if !(n > 0.0) {
        return Err(GeoError::Domain(
            "radial projection is undefined at the center".into(),
        ));
    }
    m.exp(&u.scaled(rho / n))
}

const NEWTON_MAX_ITER: usize = 100;
const RESTORATION_MAX_ITER: usize = 60;

/// Nearest point of `{h_j = 0 : j ∈ active}` to `z`, with multipliers.
///
/// A Gauss–Newton feasibility restoration started at `z` lands near the
/// foot point; Lagrange–Newton on the KKT system then polishes it. Returns
/// the multipliers of `∇F + Σ λ_j ∇h_j + μ ∇e = 0`; for sublevel sets the
/// nearest point of an exterior `z` has `λ_j ≥ 0`.
pub(crate) fn newton_project(
    m: &ManifoldModel,
    z: &Point,
    cs: &[Constraint],
    active: &[usize],
) -> Result<(Point, Vec<f64>)> {
    let k = active.len();
    let curved = m.kind() != ModelKind::Euclidean;
    let n = m.ambient_dim();

    // Feasibility restoration along Riemannian gradients.
    let mut x = z.clone();
    for _ in 0..RESTORATION_MAX_ITER {
        let h = DVector::from_fn(k, |i, _| cs[active[i]].value(m, x.coords()));
        if h.amax() <= 1e-13 {
            break;
        }
        let grads: Vec<TangentVector> = active
            .iter()
            .map(|&j| m.riemannian_gradient(&x, &cs[j].egrad(m, x.coords())))
            .collect();
        let gram = DMatrix::from_fn(k, k, |r, c| m.inner(&grads[r], &grads[c]));
        let y = gram
            .svd(true, true)
            .solve(&h, 1e-14)
            .map_err(|e| GeoError::Numeric(format!("degenerate constraint gradients: {e}")))?;
        let mut step = TangentVector::zero(&x);
        for (g, yi) in grads.iter().zip(y.iter()) {
            step = step.axpy(-yi, g);
        }
        x = m.exp_unchecked(&step)?;
    }

    let gz = m.metric_apply(z.coords());
    let radius2 = if curved { m.radius().powi(2) } else { 0.0 };
    let sign = if m.kind() == ModelKind::Sphere { -1.0 } else { 1.0 };
    let unknowns = n + k + usize::from(curved);

    let residual = |x: &DVector<f64>, lam: &DVector<f64>| -> DVector<f64> {
        let gx = m.metric_apply(x);
        let mut r = DVector::zeros(unknowns);
        let mut rx = &gx - &gz;
        for (i, &j) in active.iter().enumerate() {
            rx += cs[j].egrad(m, x) * lam[i];
            r[n + i] = cs[j].value(m, x);
        }
        if curved {
            rx += &gx * lam[k];
            r[n + k] = 0.5 * (x.dot(&gx) + sign * radius2);
        }
        r.rows_mut(0, n).copy_from(&rx);
        r
    };

    // Least-squares multipliers at the restored point.
    let x0 = x.coords().clone();
    let mut cols: Vec<DVector<f64>> = active.iter().map(|&j| cs[j].egrad(m, &x0)).collect();
    if curved {
        cols.push(m.metric_apply(&x0));
    }
    let a = DMatrix::from_columns(&cols);
    let rhs = -(m.metric_apply(&x0) - &gz);
    let mut lam = a
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| GeoError::Numeric(format!("multiplier estimate failed: {e}")))?;

    let mut xv = x0;
    let scale = 1.0 + z.coords().norm();
    let mut res = residual(&xv, &lam);
    let mut converged = res.norm() <= 1e-13 * scale;
    for _ in 0..NEWTON_MAX_ITER {
        if converged {
            break;
        }
        let mut jac = DMatrix::zeros(unknowns, unknowns);
        let mut hl = if curved {
            metric_matrix(m) * (1.0 + lam[k])
        } else {
            DMatrix::identity(n, n)
        };
        for (i, &j) in active.iter().enumerate() {
            hl += cs[j].ehess(m, &xv) * lam[i];
            let g = cs[j].egrad(m, &xv);
            jac.view_mut((n + i, 0), (1, n)).copy_from(&g.transpose());
            jac.view_mut((0, n + i), (n, 1)).copy_from(&g);
        }
        if curved {
            let g = m.metric_apply(&xv);
            jac.view_mut((n + k, 0), (1, n)).copy_from(&g.transpose());
            jac.view_mut((0, n + k), (n, 1)).copy_from(&g);
        }
        jac.view_mut((0, 0), (n, n)).copy_from(&hl);
        let step = jac
            .lu()
            .solve(&(-&res))
            .ok_or_else(|| GeoError::Numeric("singular KKT matrix in projection".into()))?;
        let mut alpha = 1.0;
        let r0 = res.norm();
        loop {
            let xt = &xv + step.rows(0, n) * alpha;
            let lt = &lam + step.rows(n, unknowns - n) * alpha;
            let rt = residual(&xt, &lt);
            if rt.norm() < r0 || alpha < 1e-6 {
                xv = xt;
                lam = lt;
                res = rt;
                break;
            }
            alpha *= 0.5;
        }
        if res.norm() <= 1e-13 * scale || (alpha * step.norm()) <= 1e-15 * scale {
            converged = res.norm() <= 1e-9 * scale;
            if !converged {
                break;
            }
        }
    }
    if !converged {
        return Err(GeoError::Numeric(format!(
            "Lagrange–Newton projection did not converge (KKT residual {:.3e})",
            res.norm()
        )));
    }
    let x = m.normalize(xv);
    Ok((x, lam.rows(0, k).iter().copied().collect()))
}

fn metric_matrix(m: &ManifoldModel) -> DMatrix<f64> {
    let n = m.ambient_dim();
    let mut g = DMatrix::identity(n, n);
    if m.kind() == ModelKind::Hyperbolic {
        g[(n - 1, n - 1)] = -1.0;
    }
    g
}
