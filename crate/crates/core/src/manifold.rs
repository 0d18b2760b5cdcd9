//! Constant-curvature model spaces in ambient coordinates.
//!
//! Three models are supported, each with closed-form geodesic kernels:
//!
//! * `Euclidean(n)`: plain coordinates in ℝⁿ.
//! * `Sphere(n, Δ)`: the sphere of radius `R = 1/√Δ` in ℝⁿ⁺¹.
//! * `Hyperbolic(n, δ)`: the upper sheet of the hyperboloid
//!   `⟨x, x⟩_L = −R²`, `R = 1/√|δ|`, in Minkowski space ℝⁿ⁺¹ with the
//!   time coordinate stored last.
//!
//! Distances are evaluated from the chord `‖y − x‖` (Euclidean or
//! Minkowski), which stays accurate for nearby points where the usual
//! `acos`/`acosh` forms lose half of the significant digits.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;

use crate::error::{GeoError, Result};

/// Relative tolerance used when validating user-supplied points and vectors.
pub const EMBED_TOL: f64 = 1e-10;

/// Largest normalized angle `√Δ·d` accepted by `log`/`transport` on the
/// sphere before the pair is treated as antipodal.
const CUT_LOCUS_MARGIN: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Euclidean,
    Sphere,
    Hyperbolic,
}

/// A constant-curvature Riemannian model space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldModel {
    kind: ModelKind,
    dim: usize,
    curvature: f64,
}

/// A point of a model in ambient coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    coords: DVector<f64>,
}

/// A tangent vector together with its base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    base: Point,
    coords: DVector<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Self {
            coords: DVector::from_vec(coords),
        }
    }

    pub fn from_vector(coords: DVector<f64>) -> Self {
        Self { coords }
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl TangentVector {
    /// Builds a tangent vector without validation. Use
    /// [`ManifoldModel::tangent`] for checked construction.
    pub fn from_parts(base: Point, coords: DVector<f64>) -> Self {
        debug_assert_eq!(base.len(), coords.len());
        Self { base, coords }
    }

    pub fn zero(base: &Point) -> Self {
        Self {
            coords: DVector::zeros(base.len()),
            base: base.clone(),
        }
    }

    pub fn base(&self) -> &Point {
        &self.base
    }

    pub fn coords(&self) -> &DVector<f64> {
        &self.coords
    }

    pub fn as_slice(&self) -> &[f64] {
        self.coords.as_slice()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            base: self.base.clone(),
            coords: &self.coords * factor,
        }
    }

    /// Sum of two vectors sharing a base point.
    pub fn plus(&self, other: &TangentVector) -> Self {
        Self {
            base: self.base.clone(),
            coords: &self.coords + &other.coords,
        }
    }

    pub fn minus(&self, other: &TangentVector) -> Self {
        Self {
            base: self.base.clone(),
            coords: &self.coords - &other.coords,
        }
    }

    /// `self + factor · other`.
    pub fn axpy(&self, factor: f64, other: &TangentVector) -> Self {
        Self {
            base: self.base.clone(),
            coords: &self.coords + &other.coords * factor,
        }
    }
}

impl std::ops::Neg for TangentVector {
    type Output = TangentVector;

    fn neg(self) -> TangentVector {
        TangentVector {
            base: self.base,
            coords: -self.coords,
        }
    }
}

/// Lipschitz constant of `exp_x⁻¹` on a ball of radius `r` when all
/// sectional curvatures are bounded above by `delta`:
/// `r√Δ / sin(r√Δ)` for `Δ > 0`, and `1` otherwise.
pub fn lipschitz_k(r: f64, delta: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(GeoError::InvalidParameter(format!(
            "ball radius must be positive, got {r}"
        )));
    }
    if delta <= 0.0 {
        return Ok(1.0);
    }
    let a = r * delta.sqrt();
    if a >= PI {
        return Err(GeoError::Domain(format!(
            "r·√Δ = {a} reaches the conjugate radius π"
        )));
    }
    Ok(a / a.sin())
}

/// `x · cot(x)`, continuous at zero.
pub(crate) fn x_cot_x(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 3.0 - x2 * x2 / 45.0
    } else {
        x * x.cos() / x.sin()
    }
}

/// `sin(x)/x`, continuous at zero.
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// `sinh(x)/x`, continuous at zero.
fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

impl ManifoldModel {
    pub fn euclidean(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            kind: ModelKind::Euclidean,
            dim,
            curvature: 0.0,
        })
    }

    /// Sphere of constant curvature `curvature > 0`.
    pub fn sphere(dim: usize, curvature: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(curvature > 0.0 && curvature.is_finite()) {
            return Err(GeoError::InvalidParameter(format!(
                "sphere curvature must be positive, got {curvature}"
            )));
        }
        Ok(Self {
            kind: ModelKind::Sphere,
            dim,
            curvature,
        })
    }

    /// Hyperbolic space of constant curvature `curvature < 0`.
    pub fn hyperbolic(dim: usize, curvature: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(curvature < 0.0 && curvature.is_finite()) {
            return Err(GeoError::InvalidParameter(format!(
                "hyperbolic curvature must be negative, got {curvature}"
            )));
        }
        Ok(Self {
            kind: ModelKind::Hyperbolic,
            dim,
            curvature,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Intrinsic dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::Euclidean => self.dim,
            _ => self.dim + 1,
        }
    }

    /// The constant sectional curvature κ.
    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// δ: lower sectional curvature bound.
    pub fn curvature_lower(&self) -> f64 {
        self.curvature
    }

    /// Δ: upper sectional curvature bound.
    pub fn curvature_upper(&self) -> f64 {
        self.curvature
    }

    /// `|R|∞ = |κ|`, the operator norm of `(u, v, w) ↦ R(u, v)w` on
    /// orthonormal frames of a space of constant curvature κ.
    pub fn curv_tensor_bound(&self) -> f64 {
        self.curvature.abs()
    }

    /// Scale `1/√|κ|` of the curved models; infinite for Euclidean space.
    pub fn radius(&self) -> f64 {
        match self.kind {
            ModelKind::Euclidean => f64::INFINITY,
            _ => 1.0 / self.curvature.abs().sqrt(),
        }
    }

    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere => PI * self.radius(),
            _ => f64::INFINITY,
        }
    }

    pub fn convexity_radius(&self) -> f64 {
        match self.kind {
            ModelKind::Sphere => 0.5 * PI * self.radius(),
            _ => f64::INFINITY,
        }
    }

    /// Ambient bilinear form: Euclidean dot product, or the Minkowski form
    /// with the last coordinate negated on the hyperboloid.
    pub fn ambient_inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        match self.kind {
            ModelKind::Hyperbolic => {
                let n = a.len() - 1;
                a.rows(0, n).dot(&b.rows(0, n)) - a[n] * b[n]
            }
            _ => a.dot(b),
        }
    }

    /// Applies the ambient metric matrix `G` (identity or `diag(1, …, 1, −1)`).
    pub(crate) fn metric_apply(&self, a: &DVector<f64>) -> DVector<f64> {
        let mut out = a.clone();
        if self.kind == ModelKind::Hyperbolic {
            let n = out.len() - 1;
            out[n] = -out[n];
        }
        out
    }

    pub fn inner(&self, u: &TangentVector, v: &TangentVector) -> f64 {
        self.ambient_inner(&u.coords, &v.coords)
    }

    pub fn norm(&self, v: &TangentVector) -> f64 {
        self.ambient_inner(&v.coords, &v.coords).max(0.0).sqrt()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.ambient_dim() {
            return Err(GeoError::DimensionMismatch {
                expected: self.ambient_dim(),
                got: len,
            });
        }
        Ok(())
    }

    /// Relative embedding defect of ambient coordinates.
    pub fn embedding_defect(&self, x: &DVector<f64>) -> f64 {
        match self.kind {
            ModelKind::Euclidean => 0.0,
            ModelKind::Sphere => {
                let r2 = self.radius().powi(2);
                (x.norm_squared() - r2).abs() / r2
            }
            ModelKind::Hyperbolic => {
                let r2 = self.radius().powi(2);
                let n = x.len() - 1;
                if x[n] <= 0.0 {
                    return f64::INFINITY;
                }
                (self.ambient_inner(x, x) + r2).abs() / (r2 + x.norm_squared())
            }
        }
    }

    /// Validated point construction.
    pub fn point(&self, coords: Vec<f64>) -> Result<Point> {
        let p = Point::new(coords);
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        self.check_len(p.len())?;
        if p.coords.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::OffManifold {
                defect: f64::INFINITY,
            });
        }
        let defect = self.embedding_defect(&p.coords);
        if defect > EMBED_TOL {
            return Err(GeoError::OffManifold { defect });
        }
        Ok(())
    }

    /// Validated tangent vector construction.
    pub fn tangent(&self, base: &Point, coords: Vec<f64>) -> Result<TangentVector> {
        let v = TangentVector {
            base: base.clone(),
            coords: DVector::from_vec(coords),
        };
        self.check_tangent(&v)?;
        Ok(v)
    }

    pub fn check_tangent(&self, v: &TangentVector) -> Result<()> {
        self.check_len(v.coords.len())?;
        self.check_len(v.base.len())?;
        if v.coords.iter().any(|c| !c.is_finite()) {
            return Err(GeoError::NotTangent {
                defect: f64::INFINITY,
            });
        }
        if self.kind == ModelKind::Euclidean {
            return Ok(());
        }
        let scale = v.base.coords.norm() * v.coords.norm();
        if scale == 0.0 {
            return Ok(());
        }
        let defect = self.ambient_inner(&v.base.coords, &v.coords).abs() / scale;
        if defect > EMBED_TOL {
            return Err(GeoError::NotTangent { defect });
        }
        Ok(())
    }

    /// Pulls ambient coordinates back onto the model.
    pub fn normalize(&self, x: DVector<f64>) -> Point {
        match self.kind {
            ModelKind::Euclidean => Point::from_vector(x),
            ModelKind::Sphere => {
                let r = self.radius();
                let n = x.norm();
                Point::from_vector(x * (r / n))
            }
            ModelKind::Hyperbolic => {
                let r2 = self.radius().powi(2);
                let n = x.len() - 1;
                let mut x = x;
                let spatial = x.rows(0, n).norm_squared();
                x[n] = (r2 + spatial).sqrt();
                Point::from_vector(x)
            }
        }
    }

    /// Orthogonal projection of an ambient vector onto `T_x M`.
    pub fn project_tangent(&self, x: &Point, w: DVector<f64>) -> TangentVector {
        let coords = match self.kind {
            ModelKind::Euclidean => w,
            ModelKind::Sphere => {
                let r2 = self.radius().powi(2);
                let c = w.dot(&x.coords) / r2;
                w - &x.coords * c
            }
            ModelKind::Hyperbolic => {
                let r2 = self.radius().powi(2);
                let c = self.ambient_inner(&w, &x.coords) / r2;
                w + &x.coords * c
            }
        };
        TangentVector {
            base: x.clone(),
            coords,
        }
    }

    /// Riemannian gradient of a function from its ambient Euclidean gradient.
    pub fn riemannian_gradient(&self, x: &Point, egrad: &DVector<f64>) -> TangentVector {
        self.project_tangent(x, self.metric_apply(egrad))
    }

    /// Exponential map `exp_x(v)` with `x` the base of `v`.
    pub fn exp(&self, v: &TangentVector) -> Result<Point> {
        self.check_tangent(v)?;
        self.exp_unchecked(v)
    }

    pub(crate) fn exp_unchecked(&self, v: &TangentVector) -> Result<Point> {
        let x = &v.base.coords;
        match self.kind {
            ModelKind::Euclidean => Ok(Point::from_vector(x + &v.coords)),
            ModelKind::Sphere => {
                let r = self.radius();
                let theta = self.norm(v) / r;
                if theta >= PI {
                    return Err(GeoError::Domain(format!(
                        "tangent norm {} reaches the injectivity radius {}",
                        theta * r,
                        PI * r
                    )));
                }
                let y = x * theta.cos() + &v.coords * sinc(theta);
                Ok(self.normalize(y))
            }
            ModelKind::Hyperbolic => {
                let r = self.radius();
                let theta = self.norm(v) / r;
                let y = x * theta.cosh() + &v.coords * sinhc(theta);
                Ok(self.normalize(y))
            }
        }
    }

    /// Chord vector `y − x` and its squared (Minkowski) length.
    fn chord(&self, x: &Point, y: &Point) -> (DVector<f64>, f64) {
        let w = &y.coords - &x.coords;
        let q = self.ambient_inner(&w, &w).max(0.0);
        (w, q)
    }

    /// Distance as a function of the chord length.
    fn dist_from_chord(&self, c: f64) -> f64 {
        match self.kind {
            ModelKind::Euclidean => c,
            ModelKind::Sphere => {
                let r = self.radius();
                2.0 * r * (c / (2.0 * r)).min(1.0).asin()
            }
            ModelKind::Hyperbolic => {
                let r = self.radius();
                2.0 * r * (c / (2.0 * r)).asinh()
            }
        }
    }

    /// Riemannian distance.
    pub fn dist(&self, x: &Point, y: &Point) -> f64 {
        let (_, q) = self.chord(x, y);
        self.dist_from_chord(q.sqrt())
    }

    /// Logarithm map `exp_x⁻¹(y)`.
    pub fn log(&self, x: &Point, y: &Point) -> Result<TangentVector> {
        let (w, q) = self.chord(x, y);
        match self.kind {
            ModelKind::Euclidean => Ok(TangentVector {
                base: x.clone(),
                coords: w,
            }),
            ModelKind::Sphere => {
                let r = self.radius();
                let theta = self.dist_from_chord(q.sqrt()) / r;
                if theta >= PI - CUT_LOCUS_MARGIN {
                    return Err(GeoError::Domain(
                        "log is undefined for antipodal points".into(),
                    ));
                }
                // y − cos θ · x, using cos θ = 1 − q/(2R²)
                let u = w + &x.coords * (q / (2.0 * r * r));
                Ok(self.project_tangent(x, u / sinc(theta)))
            }
            ModelKind::Hyperbolic => {
                let r = self.radius();
                let theta = self.dist_from_chord(q.sqrt()) / r;
                // y − cosh θ · x, using cosh θ = 1 + q/(2R²)
                let u = w - &x.coords * (q / (2.0 * r * r));
                Ok(self.project_tangent(x, u / sinhc(theta)))
            }
        }
    }

    /// Parallel transport `L_{x,y}` of `v ∈ T_x M` along the minimizing
    /// geodesic from `x` to `y`.
    pub fn transport(&self, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        let x = &v.base;
        match self.kind {
            ModelKind::Euclidean => Ok(TangentVector {
                base: y.clone(),
                coords: v.coords.clone(),
            }),
            ModelKind::Sphere => {
                let r = self.radius();
                let (_, q) = self.chord(x, y);
                let theta = self.dist_from_chord(q.sqrt()) / r;
                if theta >= PI - CUT_LOCUS_MARGIN {
                    return Err(GeoError::Domain(
                        "transport is undefined between antipodal points".into(),
                    ));
                }
                let denom = 2.0 * r * r - 0.5 * q;
                let c = y.coords.dot(&v.coords) / denom;
                let out = &v.coords - (&x.coords + &y.coords) * c;
                Ok(self.project_tangent(y, out))
            }
            ModelKind::Hyperbolic => {
                let r = self.radius();
                let (_, q) = self.chord(x, y);
                let denom = 2.0 * r * r + 0.5 * q;
                let c = self.ambient_inner(&y.coords, &v.coords) / denom;
                let out = &v.coords + (&x.coords + &y.coords) * c;
                Ok(self.project_tangent(y, out))
            }
        }
    }

    /// Point at parameter `t` on the minimizing geodesic from `x` to `y`.
    pub fn geodesic(&self, x: &Point, y: &Point, t: f64) -> Result<Point> {
        let v = self.log(x, y)?;
        self.exp_unchecked(&v.scaled(t))
    }

    /// Orthonormal basis of `T_x M` (Gram–Schmidt on projected axes).
    pub fn tangent_basis(&self, x: &Point) -> Vec<TangentVector> {
        let n = self.ambient_dim();
        let mut basis: Vec<TangentVector> = Vec::with_capacity(self.dim);
        for k in 0..n {
            if basis.len() == self.dim {
                break;
            }
            let mut e = DVector::zeros(n);
            e[k] = 1.0;
            let mut v = self.project_tangent(x, e);
            for b in &basis {
                let c = self.inner(&v, b);
                v = v.axpy(-c, b);
            }
            let norm = self.norm(&v);
            if norm > 0.25 {
                basis.push(v.scaled(1.0 / norm));
            }
        }
        debug_assert_eq!(basis.len(), self.dim);
        basis
    }

    /// Uniform sample from the tangent ball `{‖v‖ ≤ radius}` at `x`.
    pub fn sample_tangent_ball<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        x: &Point,
        radius: f64,
    ) -> TangentVector {
        let basis = self.tangent_basis(x);
        let coeffs = loop {
            let c: Vec<f64> = (0..self.dim)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            if c.iter().map(|a| a * a).sum::<f64>() <= 1.0 {
                break c;
            }
        };
        let mut v = TangentVector::zero(x);
        for (c, b) in coeffs.iter().zip(&basis) {
            v = v.axpy(c * radius, b);
        }
        v
    }

    /// Uniform sample (Riemannian volume) from the geodesic ball
    /// `B(center, radius)`, by rejection on the polar volume density.
    pub fn sample_ball<R: Rng + ?Sized>(&self, rng: &mut R, center: &Point, radius: f64) -> Point {
        let radius = radius.min(self.injectivity_radius() * (1.0 - 1e-9));
        let density = |rho: f64| -> f64 {
            let exponent = (self.dim as i32) - 1;
            match self.kind {
                ModelKind::Euclidean => 1.0,
                ModelKind::Sphere => sinc(rho / self.radius()).powi(exponent),
                ModelKind::Hyperbolic => sinhc(rho / self.radius()).powi(exponent),
            }
        };
        let max_density = match self.kind {
            ModelKind::Hyperbolic => density(radius),
            _ => 1.0,
        };
        loop {
            let v = self.sample_tangent_ball(rng, center, radius);
            let rho = self.norm(&v);
            if rng.random::<f64>() * max_density <= density(rho) {
                return self
                    .exp_unchecked(&v)
                    .expect("radius is capped below the injectivity radius");
            }
        }
    }

    /// Accurate change `d(a₁, b₁)² − d(a₀, b₀)²` for nearby configurations.
    ///
    /// Evaluated from coordinate displacements so that the result keeps its
    /// relative accuracy even when it is many orders of magnitude below the
    /// distances themselves.
    pub(crate) fn dist_sq_delta(&self, a0: &Point, b0: &Point, a1: &Point, b1: &Point) -> f64 {
        let w0 = &b0.coords - &a0.coords;
        let w1 = &b1.coords - &a1.coords;
        let dw = (&b1.coords - &b0.coords) - (&a1.coords - &a0.coords);
        let q0 = self.ambient_inner(&w0, &w0).max(0.0);
        let q1 = self.ambient_inner(&w1, &w1).max(0.0);
        let dq = self.ambient_inner(&dw, &(&w1 + &w0));
        let (c0, c1) = (q0.sqrt(), q1.sqrt());
        let dc = if c0 + c1 > 0.0 { dq / (c0 + c1) } else { 0.0 };
        let dd = match self.kind {
            ModelKind::Euclidean => dc,
            ModelKind::Sphere => {
                let r2 = 2.0 * self.radius();
                let (u0, u1) = ((c0 / r2).min(1.0), (c1 / r2).min(1.0));
                let den = u1 * (1.0 - u0 * u0).sqrt() + u0 * (1.0 - u1 * u1).sqrt();
                if den > 0.0 {
                    r2 * ((dc / r2) * (u0 + u1) / den).clamp(-1.0, 1.0).asin()
                } else {
                    dc
                }
            }
            ModelKind::Hyperbolic => {
                let r2 = 2.0 * self.radius();
                let (u0, u1) = (c0 / r2, c1 / r2);
                let den = u1 * (1.0 + u0 * u0).sqrt() + u0 * (1.0 + u1 * u1).sqrt();
                if den > 0.0 {
                    r2 * ((dc / r2) * (u0 + u1) / den).asinh()
                } else {
                    dc
                }
            }
        };
        let d0 = self.dist_from_chord(c0);
        let d1 = self.dist_from_chord(c1);
        dd * (d0 + d1)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(GeoError::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn models() -> Vec<ManifoldModel> {
        vec![
            ManifoldModel::euclidean(2).unwrap(),
            ManifoldModel::euclidean(3).unwrap(),
            ManifoldModel::sphere(2, 1.0).unwrap(),
            ManifoldModel::sphere(3, 4.0).unwrap(),
            ManifoldModel::hyperbolic(2, -1.0).unwrap(),
            ManifoldModel::hyperbolic(3, -0.5).unwrap(),
        ]
    }

    fn origin(m: &ManifoldModel) -> Point {
        let mut c = vec![0.0; m.ambient_dim()];
        if m.kind() != ModelKind::Euclidean {
            *c.last_mut().unwrap() = m.radius();
        }
        Point::new(c)
    }

    #[test]
    fn euclidean_exp_is_addition() {
        let m = ManifoldModel::euclidean(2).unwrap();
        let x = m.point(vec![0.0, 0.0]).unwrap();
        let v = m.tangent(&x, vec![3.0, 4.0]).unwrap();
        assert_eq!(m.exp(&v).unwrap().as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn sphere_quarter_circle() {
        let m = ManifoldModel::sphere(2, 1.0).unwrap();
        let north = m.point(vec![0.0, 0.0, 1.0]).unwrap();
        let v = m.tangent(&north, vec![PI / 2.0, 0.0, 0.0]).unwrap();
        let y = m.exp(&v).unwrap();
        assert_abs_diff_eq!(y.coords()[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(y.coords()[2], 0.0, epsilon = 1e-15);
        let l = m.log(&north, &m.point(vec![1.0, 0.0, 0.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(m.norm(&l), PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn hyperbolic_zero_vector() {
        let m = ManifoldModel::hyperbolic(2, -1.0).unwrap();
        let x = m.point(vec![0.0, 0.0, 1.0]).unwrap();
        let y = m.exp(&TangentVector::zero(&x)).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn euclidean_log_and_dist() {
        let m = ManifoldModel::euclidean(2).unwrap();
        let x = m.point(vec![1.0, 1.0]).unwrap();
        let y = m.point(vec![4.0, 5.0]).unwrap();
        let l = m.log(&x, &y).unwrap();
        assert_eq!(l.as_slice(), &[3.0, 4.0]);
        assert_eq!(m.norm(&l), 5.0);
        let o = m.point(vec![0.0, 0.0]).unwrap();
        assert_eq!(m.dist(&o, &m.point(vec![3.0, 4.0]).unwrap()), 5.0);
    }

    #[test]
    fn sphere_pole_distance() {
        let m = ManifoldModel::sphere(2, 1.0).unwrap();
        let n = m.point(vec![0.0, 0.0, 1.0]).unwrap();
        let s = m.point(vec![0.0, 0.0, -1.0]).unwrap();
        assert_abs_diff_eq!(m.dist(&n, &s), PI, epsilon = 1e-15);
        assert!(matches!(m.log(&n, &s), Err(GeoError::Domain(_))));
        let v = TangentVector::zero(&n);
        assert!(matches!(m.transport(&s, &v), Err(GeoError::Domain(_))));
    }

    #[test]
    fn euclidean_transport_is_identity() {
        let m = ManifoldModel::euclidean(2).unwrap();
        let x = m.point(vec![0.0, 0.0]).unwrap();
        let y = m.point(vec![5.0, 0.0]).unwrap();
        let v = m.tangent(&x, vec![0.0, 2.0]).unwrap();
        let w = m.transport(&y, &v).unwrap();
        assert_eq!(w.as_slice(), &[0.0, 2.0]);
        assert_eq!(w.base(), &y);
    }

    #[test]
    fn exp_rejects_bad_input() {
        let m = ManifoldModel::sphere(2, 1.0).unwrap();
        let n = m.point(vec![0.0, 0.0, 1.0]).unwrap();
        let normal = TangentVector::from_parts(n.clone(), DVector::from_vec(vec![0.0, 0.0, 1.0]));
        assert!(matches!(m.exp(&normal), Err(GeoError::NotTangent { .. })));
        let long = m.tangent(&n, vec![PI, 0.0, 0.0]).unwrap();
        assert!(matches!(m.exp(&long), Err(GeoError::Domain(_))));
        assert!(m.point(vec![0.0, 0.0, 2.0]).is_err());
        assert!(m.point(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn lipschitz_k_values() {
        assert_eq!(lipschitz_k(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(lipschitz_k(1.0, -3.0).unwrap(), 1.0);
        assert_abs_diff_eq!(lipschitz_k(PI / 2.0, 1.0).unwrap(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            lipschitz_k(PI / 3.0, 1.0).unwrap(),
            2.0 * PI / (3.0 * 3f64.sqrt()),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(lipschitz_k(PI / 3.0, 1.0).unwrap(), 1.209200, epsilon = 1e-6);
        assert!(lipschitz_k(PI, 1.0).is_err());
        assert!(lipschitz_k(0.0, 1.0).is_err());
    }

    #[test]
    fn lipschitz_k_monotone_with_taylor_bound() {
        for &delta in &[0.25f64, 1.0, 4.0] {
            let mut prev = 1.0;
            for i in 1..200 {
                let r = i as f64 * 0.015 / delta.sqrt();
                let k = lipschitz_k(r, delta).unwrap();
                assert!(k >= prev);
                if r * delta.sqrt() <= 1.0 {
                    assert!((k - 1.0).abs() <= delta * r * r);
                }
                prev = k;
            }
        }
    }

    #[test]
    fn roundtrip_transport_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in models() {
            let o = origin(&m);
            let reach = if m.kind() == ModelKind::Sphere { 0.9 * PI * m.radius() } else { 2.0 };
            for _ in 0..200 {
                let x = m.sample_ball(&mut rng, &o, 1.0f64.min(reach / 2.0));
                m.check_point(&x).unwrap();
                let v = m.sample_tangent_ball(&mut rng, &x, reach / 2.0);
                let y = m.exp(&v).unwrap();
                let back = m.log(&x, &y).unwrap();
                let err = (back.coords() - v.coords()).norm();
                assert!(err <= 1e-9 * (1.0 + m.norm(&v)), "{m:?} roundtrip {err}");
                assert!((m.dist(&x, &y) - m.norm(&v)).abs() <= 1e-9);
                assert_eq!(m.dist(&x, &y), m.dist(&y, &x));

                let u = m.sample_tangent_ball(&mut rng, &x, 1.0);
                let w = m.sample_tangent_ball(&mut rng, &x, 1.0);
                let tu = m.transport(&y, &u).unwrap();
                let tw = m.transport(&y, &w).unwrap();
                m.check_tangent(&tu).unwrap();
                assert!((m.inner(&tu, &tw) - m.inner(&u, &w)).abs() <= 1e-9);

                let lxy = m.log(&x, &y).unwrap();
                let lyx = m.log(&y, &x).unwrap();
                let t = m.transport(&x, &lyx).unwrap();
                assert!((t.coords() + lxy.coords()).norm() <= 1e-9);
            }
        }
    }

    #[test]
    fn distance_gradient_identity() {
        // ∇ψ = −2 exp_x⁻¹ z for ψ(x) = d²(x, z), checked by central differences.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in models() {
            let o = origin(&m);
            let z = m.sample_ball(&mut rng, &o, 0.5);
            let x = m.sample_ball(&mut rng, &z, 0.5);
            let grad = m.log(&x, &z).unwrap().scaled(-2.0);
            let mut errs = Vec::new();
            for &h in &[1e-2, 5e-3] {
                let mut worst = 0.0f64;
                for e in m.tangent_basis(&x) {
                    let p = m.exp(&e.scaled(h)).unwrap();
                    let q = m.exp(&e.scaled(-h)).unwrap();
                    let fd = (m.dist(&p, &z).powi(2) - m.dist(&q, &z).powi(2)) / (2.0 * h);
                    worst = worst.max((fd - m.inner(&grad, &e)).abs());
                }
                errs.push(worst);
            }
            assert!(errs[0] < 1e-4, "{m:?}: {errs:?}");
            if m.kind() != ModelKind::Euclidean {
                assert!(errs[1] < errs[0] / 3.0, "{m:?}: {errs:?}");
            }
        }
    }

    #[test]
    fn dist_sq_delta_matches_direct_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for m in models() {
            let o = origin(&m);
            for _ in 0..50 {
                let a0 = m.sample_ball(&mut rng, &o, 0.5);
                let b0 = m.exp(&m.sample_tangent_ball(&mut rng, &a0, 0.1)).unwrap();
                let a1 = m.exp(&m.sample_tangent_ball(&mut rng, &a0, 0.01)).unwrap();
                let b1 = m.exp(&m.sample_tangent_ball(&mut rng, &b0, 0.01)).unwrap();
                let direct = m.dist(&a1, &b1).powi(2) - m.dist(&a0, &b0).powi(2);
                let delta = m.dist_sq_delta(&a0, &b0, &a1, &b1);
                assert!((direct - delta).abs() <= 1e-13, "{m:?}: {direct} vs {delta}");
            }
        }
    }

    #[test]
    fn sample_ball_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for m in models() {
            let o = origin(&m);
            for _ in 0..100 {
                let p = m.sample_ball(&mut rng, &o, 0.7);
                assert!(m.dist(&o, &p) <= 0.7 + 1e-12);
            }
        }
    }
}
