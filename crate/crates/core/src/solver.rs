//! Weak geodesics by projected descent on the discrete energy.
//!
//! Each iteration computes the discrete gradient `g_i = −D_tγ̇_i / N`, and
//! preconditions it with the H¹ operator `N·tridiag(−1, 2, −1)` written in a
//! frame parallel-transported along the curve. Nodes pressed against the
//! boundary (the gradient pushes them out of `S`) are restricted to the
//! tangent space of the active faces. The trial curve is
//! `P_S(retract(exp(x_i, s·d_i)))` with Armijo backtracking on the energy.
//! If the preconditioned step collapses, the plain projected L² gradient is
//! tried before the run is declared stalled.

use nalgebra::{DMatrix, DVector};

use crate::curve::{trapezoid, DiscreteCurve, SpeedStats, TangentField};
use crate::error::{GeoError, Result};
use crate::manifold::{ManifoldModel, Point, TangentVector};
use crate::proxset::{project_polyhedral_cone, ConeBasis, ProxSet};

/// Membership slack required of every node.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Armijo steps below this count as a collapse.
pub const MIN_STEP: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of segments `N`.
    pub n: usize,
    pub step0: f64,
    /// Backtracking factor β.
    pub armijo_shrink: f64,
    /// Sufficient-decrease constant c₁.
    pub armijo_slope: f64,
    pub tol_residual: f64,
    pub max_iter: usize,
    /// Recorded for provenance; the solver itself is deterministic.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 200,
            step0: 1.0,
            armijo_shrink: 0.5,
            armijo_slope: 1e-4,
            tol_residual: 1e-8,
            max_iter: 10_000,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(GeoError::InvalidParameter(msg.to_string()));
        if self.n < 8 {
            return bad("solver needs N ≥ 8");
        }
        if !(self.tol_residual > 0.0) {
            return bad("tol_residual must be positive");
        }
        if !(self.armijo_shrink > 0.0 && self.armijo_shrink < 1.0) {
            return bad("armijo shrink factor must lie in (0, 1)");
        }
        if !(self.armijo_slope > 0.0 && self.armijo_slope < 1.0) {
            return bad("armijo slope constant must lie in (0, 1)");
        }
        if !(self.step0 > 0.0) {
            return bad("step0 must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// Armijo step collapsed with the residual above tolerance.
    Stalled,
    MaxIterations,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::Stalled => "stalled",
            SolveStatus::MaxIterations => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub status: SolveStatus,
    pub converged: bool,
    pub iterations: usize,
    /// Energy of the iterate after each iteration, starting with the seed.
    pub energy_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    /// Accepted step size per iteration (0 for the seed row).
    pub step_trace: Vec<f64>,
    pub final_energy: f64,
    pub final_residual: f64,
    pub final_speed_stats: SpeedStats,
    pub min_norm_subgradient_l2: f64,
}

/// Seed curve: nodes of the geodesic from `x` to `y` projected onto `S`.
pub fn initialize(x: &Point, y: &Point, set: &ProxSet, n: usize) -> Result<DiscreteCurve> {
    let m = *set.manifold();
    check_endpoints(x, y, set)?;
    let base = DiscreteCurve::geodesic(m, x, y, n)?;
    project_interior(base, set)
}

/// Seed curve through intermediate waypoints, projected onto `S`.
pub fn initialize_polyline(waypoints: &[Point], set: &ProxSet, n: usize) -> Result<DiscreteCurve> {
    let (Some(x), Some(y)) = (waypoints.first(), waypoints.last()) else {
        return Err(GeoError::InvalidParameter("no waypoints".into()));
    };
    check_endpoints(x, y, set)?;
    let base = DiscreteCurve::polyline(*set.manifold(), waypoints, n)?;
    project_interior(base, set)
}

fn check_endpoints(x: &Point, y: &Point, set: &ProxSet) -> Result<()> {
    for (name, p) in [("start", x), ("end", y)] {
        set.manifold().check_point(p)?;
        if !set.contains(p, FEASIBILITY_TOL) {
            return Err(GeoError::Domain(format!("{name} point is not in the set")));
        }
    }
    Ok(())
}

fn project_interior(curve: DiscreteCurve, set: &ProxSet) -> Result<DiscreteCurve> {
    let m = *curve.manifold();
    let n = curve.segments();
    let nodes = curve
        .into_nodes()
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            if i == 0 || i == n {
                Ok(p)
            } else {
                set.project(&p).map_err(|e| {
                    GeoError::Domain(format!(
                        "cannot project seed node {i} onto the set ({e}); supply a seed curve"
                    ))
                })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteCurve::new(m, nodes)
}

/// Discrete energy gradient `−D_tγ̇_i / N` at an interior node.
pub fn energy_gradient(curve: &DiscreteCurve, i: usize) -> Result<TangentVector> {
    let n = curve.segments() as f64;
    Ok(curve.covariant_accel(i)?.scaled(-1.0 / n))
}

/// Per-node first-order data of the current iterate.
struct NodeState {
    accel: TangentVector,
    cone: ConeBasis,
    projected: TangentVector,
}

fn node_states(curve: &DiscreteCurve, set: &ProxSet) -> Result<Vec<NodeState>> {
    let m = curve.manifold();
    for (i, p) in curve.nodes().iter().enumerate() {
        if !set.contains(p, FEASIBILITY_TOL) {
            return Err(GeoError::Domain(format!("node {i} is not in the set")));
        }
    }
    (1..curve.segments())
        .map(|i| {
            let accel = curve.covariant_accel(i)?;
            let cone = set.cone_basis(curve.node(i))?;
            let projected = project_polyhedral_cone(m, &cone, &accel);
            Ok(NodeState {
                accel,
                cone,
                projected,
            })
        })
        .collect()
}

fn residual_of(curve: &DiscreteCurve, states: &[NodeState]) -> Result<f64> {
    let m = curve.manifold();
    let speeds = curve.speeds()?;
    let mean_sq = trapezoid(&speeds.iter().map(|s| s * s).collect::<Vec<_>>());
    let worst = states
        .iter()
        .map(|s| m.norm(&s.projected))
        .fold(0.0, f64::max);
    Ok(worst / (1.0 + mean_sq))
}

/// `max_i ‖P_{T^B_S(x_i)}(D_tγ̇_i)‖ / (1 + mean ‖γ̇‖²)` over interior nodes.
pub fn residual(curve: &DiscreteCurve, set: &ProxSet) -> Result<f64> {
    residual_of(curve, &node_states(curve, set)?)
}

/// `ξ_i = −P_{T^B_S(x_i)}(D_tγ̇_i)`, zero at the endpoints.
pub fn min_norm_subgradient(curve: &DiscreteCurve, set: &ProxSet) -> Result<TangentField> {
    let states = node_states(curve, set)?;
    let n = curve.segments();
    let mut vectors = Vec::with_capacity(n + 1);
    vectors.push(TangentVector::zero(curve.node(0)));
    vectors.extend(states.into_iter().map(|s| -s.projected));
    vectors.push(TangentVector::zero(curve.node(n)));
    TangentField::new(curve.clone(), vectors)
}

/// Descent direction per interior node plus the faces each node is held on.
struct Direction {
    vectors: Vec<TangentVector>,
    faces: Vec<Vec<usize>>,
}

fn l2_direction(states: &[NodeState], n: usize) -> Direction {
    Direction {
        vectors: states.iter().map(|s| s.projected.scaled(1.0 / n as f64)).collect(),
        faces: vec![Vec::new(); states.len()],
    }
}

/// Coefficients `(θ cot θ, θ / sin θ)` of the perpendicular second
/// variation of `d²/2` along a segment of length `d`, with `θ = √|K|·d`
/// (hyperbolic functions for `K < 0`).
fn jacobi_coeffs(m: &ManifoldModel, d: f64) -> (f64, f64) {
    let k = m.curvature();
    let theta = k.abs().sqrt() * d;
    if theta < 1e-4 {
        let t2 = if k > 0.0 { theta * theta } else { -theta * theta };
        return (1.0 - t2 / 3.0, 1.0 + t2 / 6.0);
    }
    if k > 0.0 {
        (theta / theta.tan(), theta / theta.sin())
    } else {
        (theta / theta.tanh(), theta / theta.sinh())
    }
}

/// Orthonormal basis (columns) of the null space of the rows of `a`.
fn null_space(a: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if a.nrows() == 0 {
        return DMatrix::identity(dim, dim);
    }
    let gram = a.transpose() * a;
    let eig = gram.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let cols: Vec<DVector<f64>> = (0..dim)
        .filter(|&k| eig.eigenvalues[k] <= 1e-10 * scale)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, rhs.ncols()));
    }
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| GeoError::Numeric("preconditioner lost definiteness".into()))?;
    Ok(chol.solve(rhs))
}

fn sobolev_direction(curve: &DiscreteCurve, states: &[NodeState]) -> Result<Direction> {
    let m = curve.manifold();
    let n = curve.segments();
    let nf = n as f64;
    let dim = m.dim();
    let count = n - 1;

    // Parallel frame along the interior nodes.
    let mut frames: Vec<Vec<TangentVector>> = Vec::with_capacity(count);
    frames.push(m.tangent_basis(curve.node(1)));
    for i in 2..n {
        let prev = frames.last().expect("nonempty");
        let f = prev
            .iter()
            .map(|v| m.transport(curve.node(i), v))
            .collect::<Result<Vec<_>>>()?;
        frames.push(f);
    }
    let coords = |k: usize, v: &TangentVector| -> DVector<f64> {
        DVector::from_iterator(dim, frames[k].iter().map(|e| m.inner(e, v)))
    };

    let mut q: Vec<DMatrix<f64>> = Vec::with_capacity(count);
    let mut rhs: Vec<DVector<f64>> = Vec::with_capacity(count);
    let mut faces = Vec::with_capacity(count);
    for (k, s) in states.iter().enumerate() {
        let pressed: Vec<usize> = (0..s.cone.active_normals.len())
            .filter(|&j| s.cone.equality[j] || m.inner(&s.cone.active_normals[j], &s.accel) > 0.0)
            .collect();
        let rows: Vec<_> = pressed
            .iter()
            .map(|&j| coords(k, &s.cone.active_normals[j]).transpose())
            .collect();
        let a = if rows.is_empty() {
            DMatrix::zeros(0, dim)
        } else {
            DMatrix::from_rows(&rows)
        };
        let qk = null_space(&a, dim);
        // −g_i = accel_i / N
        rhs.push(qk.transpose() * coords(k, &s.accel) / nf);
        q.push(qk);
        faces.push(pressed.iter().map(|&j| s.cone.constraint_ids[j]).collect());
    }

    // Second variation of (N/2)·d² per segment, in frame coordinates.
    let seg_block = |k: usize, fwd: bool| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let i = k + 1;
        let j = if fwd { i + 1 } else { i - 1 };
        let w = m.log(curve.node(i), curve.node(j))?;
        let d = m.norm(&w);
        let (a, b) = jacobi_coeffs(m, d);
        let eye = DMatrix::identity(dim, dim);
        if d == 0.0 {
            return Ok((eye.clone() * (nf * a), eye * (-nf * b)));
        }
        let u = coords(k, &w) / d;
        let along = &u * u.transpose();
        let perp = &eye - &along;
        Ok(((&along + &perp * a) * nf, -(along + perp * b) * nf))
    };
    let mut diag_full = Vec::with_capacity(count);
    let mut upper_full = Vec::with_capacity(count);
    for k in 0..count {
        let (back, _) = seg_block(k, false)?;
        let (fwd, off) = seg_block(k, true)?;
        diag_full.push(back + fwd);
        upper_full.push(off);
    }
    let diag = |k: usize| q[k].transpose() * &diag_full[k] * &q[k];
    let upper = |k: usize| q[k].transpose() * &upper_full[k] * &q[k + 1];

    // Block Thomas.
    let mut d_mod: Vec<DMatrix<f64>> = Vec::with_capacity(count);
    let mut r_mod: Vec<DVector<f64>> = Vec::with_capacity(count);
    d_mod.push(diag(0));
    r_mod.push(rhs[0].clone());
    for k in 1..count {
        let lower = upper(k - 1).transpose();
        let w = spd_solve(&d_mod[k - 1], &lower.transpose())?.transpose();
        d_mod.push(diag(k) - &w * upper(k - 1));
        let r = &rhs[k] - &w * &r_mod[k - 1];
        r_mod.push(r);
    }
    let mut y: Vec<DVector<f64>> = vec![DVector::zeros(0); count];
    for k in (0..count).rev() {
        let mut r = DMatrix::from_column_slice(r_mod[k].len(), 1, r_mod[k].as_slice());
        if k + 1 < count {
            r -= upper(k) * &y[k + 1];
        }
        let sol = spd_solve(&d_mod[k], &r)?;
        y[k] = sol.column(0).into_owned();
    }

    let vectors = (0..count)
        .map(|k| {
            let a = &q[k] * &y[k];
            let mut v = TangentVector::zero(curve.node(k + 1));
            for (c, e) in a.iter().zip(&frames[k]) {
                v = v.axpy(*c, e);
            }
            // frame drift accumulates along the curve
            m.project_tangent(curve.node(k + 1), v.coords().clone())
        })
        .collect();
    Ok(Direction { vectors, faces })
}

/// Trial nodes for step `s`, or `None` if a projection fails.
fn trial_nodes(
    curve: &DiscreteCurve,
    set: &ProxSet,
    dir: &Direction,
    s: f64,
) -> Option<Vec<Point>> {
    let m = curve.manifold();
    let n = curve.segments();
    let mut nodes = Vec::with_capacity(n + 1);
    nodes.push(curve.node(0).clone());
    for (k, d) in dir.vectors.iter().enumerate() {
        let mut z = m.exp(&d.scaled(s)).ok()?;
        if !dir.faces[k].is_empty() {
            z = set.project_onto_faces(&z, &dir.faces[k]).ok()?;
        }
        nodes.push(set.project(&z).ok()?);
    }
    nodes.push(curve.node(n).clone());
    Some(nodes)
}

fn energy_delta(m: &ManifoldModel, old: &[Point], new: &[Point]) -> f64 {
    let n = (old.len() - 1) as f64;
    let sum: f64 = (0..old.len() - 1)
        .map(|i| m.dist_sq_delta(&old[i], &old[i + 1], &new[i], &new[i + 1]))
        .sum();
    0.5 * n * sum
}

/// Armijo backtracking; returns the accepted nodes, step and energy change.
fn line_search(
    curve: &DiscreteCurve,
    set: &ProxSet,
    states: &[NodeState],
    dir: &Direction,
    cfg: &SolverConfig,
) -> Option<(Vec<Point>, f64, f64)> {
    let m = curve.manifold();
    let n = curve.segments() as f64;
    let mut s = cfg.step0;
    while s >= MIN_STEP {
        if let Some(nodes) = trial_nodes(curve, set, dir, s) {
            let mut slope = 0.0;
            let mut ok = true;
            for (k, st) in states.iter().enumerate() {
                match m.log(curve.node(k + 1), &nodes[k + 1]) {
                    Ok(disp) => slope -= m.inner(&st.accel, &disp) / n,
                    Err(_) => {
                        ok = false;
                        break;
                    }
                }
            }
            if ok && slope < 0.0 {
                let de = energy_delta(m, curve.nodes(), &nodes);
                if de <= cfg.armijo_slope * slope {
                    return Some((nodes, s, de));
                }
            }
        }
        s *= cfg.armijo_shrink;
    }
    None
}

/// Runs projected descent from `seed_curve` (or the projected geodesic).
pub fn solve(
    x: &Point,
    y: &Point,
    set: &ProxSet,
    cfg: &SolverConfig,
    seed_curve: Option<DiscreteCurve>,
) -> Result<(DiscreteCurve, SolveReport)> {
    cfg.validate()?;
    let m = *set.manifold();
    let mut curve = match seed_curve {
        Some(c) => {
            if c.manifold() != &m {
                return Err(GeoError::InvalidParameter(
                    "seed curve lives on a different model".into(),
                ));
            }
            if c.segments() != cfg.n {
                return Err(GeoError::InvalidParameter(format!(
                    "seed curve has {} segments, config asks for {}",
                    c.segments(),
                    cfg.n
                )));
            }
            if c.node(0) != x || c.node(cfg.n) != y {
                return Err(GeoError::InvalidParameter(
                    "seed curve endpoints differ from the requested endpoints".into(),
                ));
            }
            check_endpoints(x, y, set)?;
            c
        }
        None => initialize(x, y, set, cfg.n)?,
    };

    let mut energy = curve.energy();
    let mut energy_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut step_trace = Vec::new();
    let mut last_step = 0.0;
    let mut iterations = 0;
    let status = loop {
        let states = node_states(&curve, set)?;
        let res = residual_of(&curve, &states)?;
        energy_trace.push(energy);
        residual_trace.push(res);
        step_trace.push(last_step);
        if res <= cfg.tol_residual {
            break SolveStatus::Converged;
        }
        if iterations >= cfg.max_iter {
            break SolveStatus::MaxIterations;
        }
        let mut accepted = None;
        if let Ok(dir) = sobolev_direction(&curve, &states) {
            accepted = line_search(&curve, set, &states, &dir, cfg);
        }
        if accepted.is_none() {
            let dir = l2_direction(&states, cfg.n);
            accepted = line_search(&curve, set, &states, &dir, cfg);
        }
        let Some((nodes, step, de)) = accepted else {
            break SolveStatus::Stalled;
        };
        curve = DiscreteCurve::new(m, nodes)?;
        energy += de;
        last_step = step;
        iterations += 1;
    };

    let xi = min_norm_subgradient(&curve, set)?;
    let report = SolveReport {
        status,
        converged: status == SolveStatus::Converged,
        iterations,
        final_energy: curve.energy(),
        final_residual: *residual_trace.last().expect("at least one row"),
        final_speed_stats: curve.speed_stats()?,
        min_norm_subgradient_l2: xi.l2_norm(),
        energy_trace,
        residual_trace,
        step_trace,
    };
    Ok((curve, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::proxset::{AffineField, FieldBounds};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn p(c: &[f64]) -> Point {
        Point::new(c.to_vec())
    }

    fn e2() -> ManifoldModel {
        ManifoldModel::euclidean(2).unwrap()
    }

    fn obstacle() -> ProxSet {
        ProxSet::ball_complement(e2(), p(&[0.0, 0.0]), 1.0).unwrap()
    }

    fn cfg(n: usize) -> SolverConfig {
        SolverConfig {
            n,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn full_manifold_initialization_is_the_geodesic() {
        let s = ProxSet::full(e2());
        let c = initialize(&p(&[0.0, 0.0]), &p(&[3.0, 4.0]), &s, 10).unwrap();
        assert_abs_diff_eq!(c.energy(), 12.5, epsilon = 1e-12);
        let same = initialize(&p(&[1.0, 1.0]), &p(&[1.0, 1.0]), &s, 10).unwrap();
        assert!(same.nodes().iter().all(|q| q == &p(&[1.0, 1.0])));
    }

    #[test]
    fn obstacle_initialization_projects_to_upper_circle() {
        let c = initialize(&p(&[-2.0, 0.0]), &p(&[2.0, 1e-6]), &obstacle(), 40).unwrap();
        for q in c.nodes() {
            let r = q.coords().norm();
            if r < 1.0 + 1e-12 {
                assert_abs_diff_eq!(r, 1.0, epsilon = 1e-12);
                assert!(q.coords()[1] >= 0.0);
            }
        }
        assert!(c.nodes().iter().filter(|q| (q.coords().norm() - 1.0).abs() < 1e-12).count() > 10);
    }

    #[test]
    fn initialization_rejects_infeasible_endpoints() {
        assert!(matches!(
            initialize(&p(&[0.2, 0.0]), &p(&[2.0, 0.0]), &obstacle(), 10),
            Err(GeoError::Domain(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let c = DiscreteCurve::geodesic(e2(), &p(&[0.0, 0.0]), &p(&[1.0, 2.0]), 16).unwrap();
        for i in 1..16 {
            assert!(energy_gradient(&c, i).unwrap().coords().norm() < 1e-12);
        }
        let n = 200;
        let omega = PI / 2.0;
        let arc = DiscreteCurve::new(
            e2(),
            (0..=n)
                .map(|i| {
                    let a = omega * i as f64 / n as f64;
                    p(&[a.cos(), a.sin()])
                })
                .collect(),
        )
        .unwrap();
        for i in [1, 77, 199] {
            let g = energy_gradient(&arc, i).unwrap();
            let expect = arc.node(i).coords() * (omega * omega / n as f64);
            assert!((g.coords() - &expect).norm() <= 1e-2 * expect.norm());
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let s2 = ManifoldModel::sphere(2, 1.0).unwrap();
        let n = 40;
        let c = DiscreteCurve::new(
            s2,
            (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    let (lat, lon) = (0.3 * (PI * t).sin(), 1.5 * t);
                    p(&[lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()])
                })
                .collect(),
        )
        .unwrap();
        let field: Vec<TangentVector> = (0..=n)
            .map(|i| {
                let t = i as f64 / n as f64;
                let w = nalgebra::DVector::from_vec(vec![0.2, -0.5, 1.0]) * (PI * t).sin();
                s2.project_tangent(c.node(i), w)
            })
            .collect();
        let s = 1e-5;
        let moved = DiscreteCurve::new(
            s2,
            field.iter().map(|v| s2.exp(&v.scaled(s)).unwrap()).collect(),
        )
        .unwrap();
        let fd = energy_delta(&s2, c.nodes(), moved.nodes()) / s;
        let analytic: f64 = (1..n)
            .map(|i| s2.inner(&energy_gradient(&c, i).unwrap(), &field[i]))
            .sum();
        assert!((fd - analytic).abs() <= 1e-4 * analytic.abs(), "{fd} vs {analytic}");
    }

    #[test]
    fn full_manifold_solve_is_immediate() {
        let s = ProxSet::full(e2());
        let (c, r) = solve(&p(&[0.0, 0.0]), &p(&[3.0, 4.0]), &s, &cfg(32), None).unwrap();
        assert!(r.converged);
        assert_abs_diff_eq!(r.final_energy, 12.5, epsilon = 1e-10);
        assert!(residual(&c, &s).unwrap() <= 1e-9);
    }

    #[test]
    fn residual_rejects_infeasible_curve() {
        let c = DiscreteCurve::geodesic(e2(), &p(&[-2.0, 0.0]), &p(&[2.0, 0.0]), 16).unwrap();
        assert!(matches!(residual(&c, &obstacle()), Err(GeoError::Domain(_))));
    }

    #[test]
    fn obstacle_solve_reaches_tangent_arc_tangent_energy() {
        let s = obstacle();
        let x = p(&[-2.0, 0.0]);
        let y = p(&[2.0, 0.0]);
        let seed = initialize_polyline(&[x.clone(), p(&[0.0, 2.0]), y.clone()], &s, 100).unwrap();
        let (c, r) = solve(&x, &y, &s, &cfg(100), Some(seed)).unwrap();
        assert!(r.converged, "{:?} after {} iterations", r.status, r.iterations);
        let l = 2.0 * 3f64.sqrt() + PI / 3.0;
        assert!((r.final_energy - l * l / 2.0).abs() <= 5e-3 * l * l / 2.0);
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(c.nodes().iter().all(|q| s.contains(q, 1e-9)));
        assert!(c.nodes().iter().all(|q| q.coords()[1] >= -1e-12));
        // restarting from the solution makes no progress
        let (_, again) = solve(&x, &y, &s, &cfg(100), Some(c)).unwrap();
        assert_eq!(again.iterations, 0);
    }

    #[test]
    fn hemisphere_solve_finds_equator() {
        let s2 = ManifoldModel::sphere(2, 1.0).unwrap();
        let field = AffineField {
            normal: nalgebra::DVector::from_vec(vec![0.0, 0.0, -1.0]),
            offset: 0.0,
        };
        let bounds = FieldBounds {
            g_min: 0.5,
            hess_max: 0.0,
            reach: 1.5,
        };
        let s = ProxSet::sublevel(s2, Arc::new(field), bounds).unwrap();
        let x = p(&[1.0, 0.0, 0.0]);
        let y = p(&[0.0, 1.0, 0.0]);
        let mid = p(&[0.5, 0.5, 0.5f64.sqrt()]);
        let seed = initialize_polyline(&[x.clone(), mid, y.clone()], &s, 64).unwrap();
        let (c, r) = solve(&x, &y, &s, &cfg(64), Some(seed)).unwrap();
        assert!(r.converged, "{:?}", r.status);
        let exact = DiscreteCurve::geodesic(s2, &x, &y, 64).unwrap();
        assert!(c.metrics(&exact).unwrap().d_inf <= 1e-3);
    }

    #[test]
    fn rejects_bad_config() {
        let mut c = cfg(4);
        assert!(c.validate().is_err());
        c.n = 16;
        c.armijo_shrink = 1.0;
        assert!(c.validate().is_err());
    }
}
