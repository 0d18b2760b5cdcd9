//! Sampling and finite-difference checks of the quantitative statements
//! about projections, transport and weak geodesics.
//!
//! Every sampled quantity uses its own RNG stream (seed, sample index), so
//! the reports do not depend on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::curve::{c_factor, trapezoid, DiscreteCurve};
use crate::error::{GeoError, Result};
use crate::manifold::{lipschitz_k, ManifoldModel, Point, TangentVector};
use crate::parallel::map_indexed;
use crate::proxset::ProxSet;
use crate::solver::min_norm_subgradient;

/// Relative slack accepted before a sampled inequality counts as violated.
pub const VIOLATION_RTOL: f64 = 1e-9;

/// Geodesic ball used as sampling region.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub center: Point,
    pub radius: f64,
}

/// Common sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub samples: usize,
    pub seed: u64,
    /// Worker threads; 0 runs serially.
    pub threads: usize,
}

fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Index of the first maximum; NaN entries are ignored.
fn argmax(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}

const MAX_ATTEMPTS: usize = 10_000;

// ---------------------------------------------------------------------------
// transport–log defect

#[derive(Debug, Clone, PartialEq)]
pub struct DefectReport {
    /// Pairs `(x, y)` with `x ≠ y`.
    pub pairs: usize,
    /// `max A(x, y) / d(x, y)`.
    pub c_fitted: f64,
    /// Least-squares slope of `log A` against `log d`; `None` when every
    /// defect vanishes.
    pub slope: Option<f64>,
    pub max_defect: f64,
    /// Pair achieving `c_fitted`.
    pub argmax: Option<(Point, Point)>,
}

/// Estimated Lipschitz constant over `region` of
/// `z ↦ L_{y,x}(log_y z) − log_x z`, from `probes` short z-pairs.
pub fn transport_defect(
    m: &ManifoldModel,
    region: &Region,
    x: &Point,
    y: &Point,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    if x == y {
        return Ok(0.0);
    }
    let h = 1e-4 * region.radius.max(1e-3);
    let defect = |z: &Point| -> Result<TangentVector> {
        let a = m.transport(x, &m.log(y, z)?)?;
        Ok(a.minus(&m.log(x, z)?))
    };
    let mut best = 0.0f64;
    for _ in 0..probes {
        let z1 = m.sample_ball(rng, &region.center, region.radius);
        let dir = m.sample_tangent_ball(rng, &z1, 1.0);
        let len = m.norm(&dir);
        if len < 1e-3 {
            continue;
        }
        let z2 = m.exp(&dir.scaled(h / len))?;
        let diff = defect(&z2)?.minus(&defect(&z1)?);
        best = best.max(m.norm(&diff) / m.dist(&z1, &z2));
    }
    Ok(best)
}

pub fn transport_defect_scaling(
    m: &ManifoldModel,
    region: &Region,
    sampling: Sampling,
) -> Result<DefectReport> {
    m.check_point(&region.center)?;
    if region.radius >= m.convexity_radius() {
        return Err(GeoError::Domain(
            "defect region must lie inside a convex ball".into(),
        ));
    }
    let rows = map_indexed(sampling.threads, sampling.samples, |i| -> Result<(f64, f64, Point, Point)> {
        let mut rng = sample_rng(sampling.seed, i);
        let x = m.sample_ball(&mut rng, &region.center, region.radius);
        let y = m.sample_ball(&mut rng, &region.center, region.radius);
        let a = transport_defect(m, region, &x, &y, 32, &mut rng)?;
        Ok((m.dist(&x, &y), a, x, y))
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let rows: Vec<_> = rows.into_iter().filter(|r| r.0 > 0.0).collect();
    let best = argmax(rows.iter().map(|r| r.1 / r.0));
    let max_defect = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    // Defects below this are rounding noise of the linear maps.
    let floor = 1e-10;
    let fit: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.1 > floor)
        .map(|r| (r.0.ln(), r.1.ln()))
        .collect();
    let slope = if fit.len() >= 2 && max_defect > floor {
        let k = fit.len() as f64;
        let mx = fit.iter().map(|p| p.0).sum::<f64>() / k;
        let my = fit.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = fit.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = fit.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    } else {
        None
    };
    let (c_fitted, argmax) = match best {
        Some((i, c)) if max_defect > floor => (c, Some((rows[i].2.clone(), rows[i].3.clone()))),
        _ => (0.0, None),
    };
    Ok(DefectReport {
        pairs: rows.len(),
        c_fitted,
        slope,
        max_defect,
        argmax,
    })
}

// ---------------------------------------------------------------------------
// projection Lipschitz bounds

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzConfig {
    pub region: Region,
    /// Pairs are drawn within this distance of `S`.
    pub tube: f64,
    /// When set, `y` is drawn within this distance of `x`.
    pub pair_radius: Option<f64>,
    /// Tolerance of the `1 + ε` bound.
    pub epsilon: f64,
    /// Constant `C` of the α term; estimated over the region when `None`.
    pub c_const: Option<f64>,
    pub sampling: Sampling,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzReport {
    pub samples: usize,
    /// Pairs skipped because `x = y`.
    pub skipped: usize,
    pub max_ratio: f64,
    pub argmax: (Point, Point),
    /// Largest per-pair bound `k/(1 − β − α)` among checked pairs.
    pub bound_theorem: f64,
    /// `1 + ε`.
    pub bound_corollary: f64,
    pub violations_theorem: usize,
    pub violations_corollary: usize,
    /// Pairs where `1 − β − α ≤ 0` or the convex ball is too large.
    pub theorem_unchecked: usize,
    pub c_used: f64,
    /// Smallest theorem slack `bound − ratio` and its pair.
    pub min_theorem_slack: f64,
    pub min_slack_pair: Option<(Point, Point)>,
    /// Largest tube radius below which no sampled pair exceeds `1 + ε`.
    pub empirical_tube: f64,
}

struct PairSample {
    x: Point,
    y: Point,
    ratio: f64,
    theorem_bound: Option<f64>,
    tube_dist: f64,
}

fn draw_in_tube(
    set: &ProxSet,
    rng: &mut ChaCha8Rng,
    center: &Point,
    radius: f64,
    tube: f64,
) -> Option<(Point, Point)> {
    let m = set.manifold();
    for _ in 0..MAX_ATTEMPTS {
        let z = m.sample_ball(rng, center, radius);
        if let Ok(p) = set.project(&z) {
            if m.dist(&z, &p) <= tube {
                return Some((z, p));
            }
        }
    }
    None
}

pub fn projection_lipschitz(set: &ProxSet, cfg: &LipschitzConfig) -> Result<LipschitzReport> {
    let m = *set.manifold();
    m.check_point(&cfg.region.center)?;
    if !(cfg.tube > 0.0 && cfg.tube <= cfg.region.radius) {
        return Err(GeoError::InvalidParameter(
            "tube must lie in (0, region radius]".into(),
        ));
    }
    let c_used = match cfg.c_const {
        Some(c) => c,
        None => {
            let r = cfg.region.radius.min(0.5 * m.convexity_radius());
            let region = Region {
                center: cfg.region.center.clone(),
                radius: r,
            };
            let samples = Sampling {
                samples: 200,
                ..cfg.sampling
            };
            transport_defect_scaling(&m, &region, samples)?.c_fitted
        }
    };
    let delta = m.curvature_upper();
    let draws = map_indexed(cfg.sampling.threads, cfg.sampling.samples, |i| {
        let mut rng = sample_rng(cfg.sampling.seed, i);
        let (x, px) = draw_in_tube(set, &mut rng, &cfg.region.center, cfg.region.radius, cfg.tube)?;
        let (y, py) = match cfg.pair_radius {
            Some(r) => draw_in_tube(set, &mut rng, &x, r, cfg.tube)?,
            None => draw_in_tube(set, &mut rng, &cfg.region.center, cfg.region.radius, cfg.tube)?,
        };
        let d = m.dist(&x, &y);
        if d == 0.0 {
            return Some(None);
        }
        let ratio = m.dist(&px, &py) / d;
        let dx = m.dist(&x, &px);
        let dy = m.dist(&y, &py);
        let beta = set.phi(&px) * dx + set.phi(&py) * dy;
        let alpha = c_used * dy;
        let sigma = dx.max(m.dist(&px, &y)) * (1.0 + 1e-12);
        let theorem_bound = if 1.0 - beta - alpha > 0.0 && sigma < m.convexity_radius() {
            let k = if sigma > 0.0 {
                lipschitz_k(sigma, delta).ok()
            } else {
                Some(1.0)
            };
            k.map(|k| k / (1.0 - beta - alpha))
        } else {
            None
        };
        Some(Some(PairSample {
            x,
            y,
            ratio,
            theorem_bound,
            tube_dist: dx.max(dy),
        }))
    })?;
    if draws.iter().any(|d| d.is_none()) {
        return Err(GeoError::Domain(
            "could not draw points within the tube; check region and tube".into(),
        ));
    }
    let skipped = draws.iter().filter(|d| matches!(d, Some(None))).count();
    let pairs: Vec<PairSample> = draws.into_iter().flatten().flatten().collect();
    if pairs.is_empty() {
        return Err(GeoError::Domain("sampling produced no valid pairs".into()));
    }
    let (imax, max_ratio) = argmax(pairs.iter().map(|p| p.ratio)).expect("nonempty");
    let bound_corollary = 1.0 + cfg.epsilon;
    let corollary_violation = |p: &PairSample| p.ratio > bound_corollary * (1.0 + VIOLATION_RTOL);
    let violations_corollary = pairs.iter().filter(|p| corollary_violation(p)).count();
    let mut violations_theorem = 0;
    let mut theorem_unchecked = 0;
    let mut bound_theorem = 0.0f64;
    let mut min_slack = f64::INFINITY;
    let mut min_pair = None;
    for p in &pairs {
        match p.theorem_bound {
            Some(b) => {
                bound_theorem = bound_theorem.max(b);
                if p.ratio > b * (1.0 + VIOLATION_RTOL) {
                    violations_theorem += 1;
                }
                if b - p.ratio < min_slack {
                    min_slack = b - p.ratio;
                    min_pair = Some((p.x.clone(), p.y.clone()));
                }
            }
            None => theorem_unchecked += 1,
        }
    }
    let empirical_tube = pairs
        .iter()
        .filter(|p| corollary_violation(p))
        .map(|p| p.tube_dist)
        .fold(cfg.tube, f64::min);
    Ok(LipschitzReport {
        samples: pairs.len(),
        skipped,
        max_ratio,
        argmax: (pairs[imax].x.clone(), pairs[imax].y.clone()),
        bound_theorem,
        bound_corollary,
        violations_theorem,
        violations_corollary,
        theorem_unchecked,
        c_used,
        min_theorem_slack: min_slack,
        min_slack_pair: min_pair,
        empirical_tube,
    })
}

// ---------------------------------------------------------------------------
// directional derivative of the projection

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalReport {
    pub steps: Vec<f64>,
    pub errors: Vec<f64>,
    /// Error at the smallest step.
    pub final_error: f64,
    /// Errors are nonincreasing as the step decreases, up to rounding.
    pub monotone: bool,
    pub limit: TangentVector,
}

/// Compares `log(x, P_S(exp(x, t·v))) / t` with `P_{T^B_S(x)}(v)`.
pub fn directional_derivative_check(
    set: &ProxSet,
    v: &TangentVector,
    steps: &[f64],
) -> Result<DirectionalReport> {
    let m = set.manifold();
    let x = v.base();
    if steps.is_empty() || steps.iter().any(|&t| !(t > 0.0)) {
        return Err(GeoError::InvalidParameter("steps must be positive".into()));
    }
    if steps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(GeoError::InvalidParameter("steps must decrease".into()));
    }
    let limit = set.tangent_cone_project(v)?;
    let mut errors = Vec::with_capacity(steps.len());
    for &t in steps {
        let z = m.exp(&v.scaled(t))?;
        let p = set.project(&z)?;
        let q = m.log(x, &p)?.scaled(1.0 / t);
        errors.push(m.norm(&q.minus(&limit)));
    }
    let noise = 1e-12 * (1.0 + m.norm(v));
    let monotone = errors
        .windows(2)
        .zip(steps.windows(2))
        .all(|(e, t)| e[1] <= e[0] * (1.0 + 1e-6) + noise / t[1]);
    Ok(DirectionalReport {
        steps: steps.to_vec(),
        final_error: *errors.last().expect("nonempty"),
        errors,
        monotone,
        limit,
    })
}

// ---------------------------------------------------------------------------
// distance identities along curves

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityReport {
    /// Max over interior nodes of the central-difference residual of
    /// `d/dt d²(γ, η) = 2⟨log_γ η, L_{η,γ} η̇ − γ̇⟩`.
    pub dist_deriv_residual: f64,
    pub dist_deriv_argmax: usize,
    /// Max finite-difference residual of `∇ d²(·, z)(x) = −2 log_x z` at
    /// `x = γ_i`, `z = η_i`, along orthonormal tangent directions.
    pub grad_residual: f64,
    pub grad_argmax: usize,
    pub fd_step: f64,
}

pub fn identity_checks(
    gamma: &DiscreteCurve,
    eta: &DiscreteCurve,
    fd_step: f64,
) -> Result<IdentityReport> {
    let m = *gamma.manifold();
    let metrics = gamma.metrics(eta)?;
    if metrics.d_inf >= m.convexity_radius() {
        return Err(GeoError::Domain(format!(
            "curves are {} apart, beyond the convexity radius",
            metrics.d_inf
        )));
    }
    if !(fd_step > 0.0) {
        return Err(GeoError::InvalidParameter("fd_step must be positive".into()));
    }
    let n = gamma.segments();
    let d2 = |i: usize| m.dist(gamma.node(i), eta.node(i)).powi(2);
    let mut dist_deriv = Vec::with_capacity(n - 1);
    for i in 1..n {
        let fd = (d2(i + 1) - d2(i - 1)) * n as f64 / 2.0;
        let w = m.log(gamma.node(i), eta.node(i))?;
        let moved = m.transport(gamma.node(i), &eta.velocity(i)?)?;
        let rhs = 2.0 * m.inner(&w, &moved.minus(&gamma.velocity(i)?));
        dist_deriv.push((fd - rhs).abs());
    }
    let mut grad = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = gamma.node(i);
        let z = eta.node(i);
        let g = m.log(x, z)?.scaled(-2.0);
        let mut worst = 0.0f64;
        for e in m.tangent_basis(x) {
            let plus = m.exp(&e.scaled(fd_step))?;
            let minus = m.exp(&e.scaled(-fd_step))?;
            let fd = (m.dist(&plus, z).powi(2) - m.dist(&minus, z).powi(2)) / (2.0 * fd_step);
            worst = worst.max((fd - m.inner(&g, &e)).abs());
        }
        grad.push(worst);
    }
    let (la, lr) = argmax(dist_deriv.iter().copied()).expect("interior nodes exist");
    let (ga, gr) = argmax(grad.iter().copied()).expect("nodes exist");
    Ok(IdentityReport {
        dist_deriv_residual: lr,
        dist_deriv_argmax: la + 1,
        grad_residual: gr,
        grad_argmax: ga,
        fd_step,
    })
}

// ---------------------------------------------------------------------------
// comparison inequality

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// Left side minus right side; nonnegative when the inequality holds.
    pub margin: f64,
    /// `½∫‖η̇‖²`.
    pub energy_eta: f64,
    /// `½∫(c(γ,η) − 1)‖γ̇‖²`.
    pub c_term: f64,
    /// `∫⟨ξ, log_γ η⟩`.
    pub xi_term: f64,
    /// `d_∞ ‖log_γ η‖_{L²} (φ̄ ‖ξ + D_tγ̇‖_{L²} + ½|R|_∞ ‖γ̇‖_{L∞} ‖η̇‖_{L²})`.
    pub penalty: f64,
    pub d_inf: f64,
    pub l2_log: f64,
    pub phi_bar: f64,
    /// Node with the most negative pointwise contribution.
    pub worst_node: usize,
}

/// Evaluates the lower bound on `energy(η)` around a critical curve `γ`,
/// with `ξ = −P_{T^B_S}(D_tγ̇)` and trapezoid quadrature.
#[allow(clippy::needless_range_loop)]
pub fn comparison_inequality_check(
    gamma: &DiscreteCurve,
    set: &ProxSet,
    eta: &DiscreteCurve,
) -> Result<ComparisonReport> {
    let m = *gamma.manifold();
    let metrics = gamma.metrics(eta)?;
    let n = gamma.segments();
    if gamma.node(0) != eta.node(0) || gamma.node(n) != eta.node(n) {
        return Err(GeoError::InvalidParameter(
            "curves must share their endpoints".into(),
        ));
    }
    if metrics.d_inf >= m.convexity_radius() {
        return Err(GeoError::Domain(format!(
            "curves are {} apart, beyond the convexity radius",
            metrics.d_inf
        )));
    }
    for (name, c) in [("γ", gamma), ("η", eta)] {
        if let Some(i) = c.nodes().iter().position(|p| !set.contains(p, 1e-9)) {
            return Err(GeoError::Domain(format!("node {i} of {name} is not in the set")));
        }
    }
    let xi = min_norm_subgradient(gamma, set)?;
    let delta = m.curvature_upper().max(0.0);
    let speeds = gamma.speeds()?;
    let mut c_vals = Vec::with_capacity(n + 1);
    let mut xi_vals = Vec::with_capacity(n + 1);
    let mut normal_sq = Vec::with_capacity(n + 1);
    let mut phi_bar = 0.0f64;
    for i in 0..=n {
        let d = m.dist(gamma.node(i), eta.node(i));
        let c = c_factor(delta, d)?;
        c_vals.push(0.5 * (c - 1.0) * speeds[i] * speeds[i]);
        let w = m.log(gamma.node(i), eta.node(i))?;
        xi_vals.push(m.inner(&xi.vectors()[i], &w));
        if i > 0 && i < n {
            let r = xi.vectors()[i].plus(&gamma.covariant_accel(i)?);
            normal_sq.push(m.inner(&r, &r));
        } else {
            normal_sq.push(0.0);
        }
        phi_bar = phi_bar.max(set.phi(gamma.node(i)));
    }
    let energy_eta = eta.energy();
    let c_term = trapezoid(&c_vals);
    let xi_term = trapezoid(&xi_vals);
    let normal_l2 = trapezoid(&normal_sq).sqrt();
    let speed_inf = speeds.iter().copied().fold(0.0, f64::max);
    let eta_l2 = (2.0 * energy_eta).sqrt();
    let penalty = metrics.d_inf
        * metrics.l2_log
        * (phi_bar * normal_l2 + 0.5 * m.curv_tensor_bound() * speed_inf * eta_l2);
    let eta_speeds = eta.speeds()?;
    let (worst_node, _) = argmax((0..=n).map(|i| {
        c_vals[i] + xi_vals[i] - 0.5 * eta_speeds[i] * eta_speeds[i]
    }))
    .expect("nodes exist");
    Ok(ComparisonReport {
        margin: energy_eta - c_term - xi_term + penalty,
        energy_eta,
        c_term,
        xi_term,
        penalty,
        d_inf: metrics.d_inf,
        l2_log: metrics.l2_log,
        phi_bar,
        worst_node,
    })
}

// ---------------------------------------------------------------------------
// φ-convexity

#[derive(Debug, Clone, PartialEq)]
pub struct PhiReport {
    /// Samples with a boundary point and a nonzero proximal normal.
    pub samples: usize,
    /// `max ⟨v, log(x, y)⟩ − φ(x) d²(x, y)`; `None` without samples.
    pub max_excess: Option<f64>,
    /// `(x, y)` achieving the maximum.
    pub argmax: Option<(Point, Point)>,
    pub violations: usize,
}

/// Samples boundary points `x`, unit proximal normals `v` at `x` and points
/// `y ∈ S` with `d(x, y) ≤ max_dist`.
pub fn phi_convexity_check(
    set: &ProxSet,
    region: &Region,
    max_dist: f64,
    sampling: Sampling,
) -> Result<PhiReport> {
    let m = *set.manifold();
    m.check_point(&region.center)?;
    let rows = map_indexed(sampling.threads, sampling.samples, |i| -> Option<(f64, Point, Point)> {
        let mut rng = sample_rng(sampling.seed, i);
        for _ in 0..64 {
            let z = m.sample_ball(&mut rng, &region.center, region.radius);
            let Ok(x) = set.project(&z) else { continue };
            let v = if m.dist(&z, &x) > 1e-12 {
                m.log(&x, &z).ok()?
            } else {
                let cone = set.cone_basis(&x).ok()?;
                if cone.active_normals.is_empty() {
                    continue;
                }
                cone.active_normals
                    .iter()
                    .skip(1)
                    .fold(cone.active_normals[0].clone(), |a, b| a.plus(b))
            };
            let len = m.norm(&v);
            if !(len > 0.0) {
                continue;
            }
            let v = v.scaled(1.0 / len);
            for _ in 0..64 {
                let q = m.sample_ball(&mut rng, &x, max_dist);
                let Ok(y) = set.project(&q) else { continue };
                let d = m.dist(&x, &y);
                if d > max_dist {
                    continue;
                }
                let w = m.log(&x, &y).ok()?;
                let excess = m.inner(&v, &w) - set.phi(&x) * d * d;
                return Some((excess, x, y));
            }
        }
        None
    })?;
    let rows: Vec<_> = rows.into_iter().flatten().collect();
    let tol = |r: &(f64, Point, Point)| VIOLATION_RTOL * (1.0 + m.dist(&r.1, &r.2));
    let violations = rows.iter().filter(|r| r.0 > tol(r)).count();
    let best = argmax(rows.iter().map(|r| r.0));
    Ok(PhiReport {
        samples: rows.len(),
        max_excess: best.map(|(_, e)| e),
        argmax: best.map(|(i, _)| (rows[i].1.clone(), rows[i].2.clone())),
        violations,
    })
}
