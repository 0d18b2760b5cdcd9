//! Solve and verify runs writing CSV outputs.

use std::fs;
use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};
use weakgeo::curve::{fmt_f64, DiscreteCurve};
use weakgeo::solver::{initialize, initialize_polyline, solve, SolveReport, SolverConfig};
use weakgeo::verify::{
    comparison_inequality_check, directional_derivative_check, identity_checks,
    phi_convexity_check, projection_lipschitz, transport_defect_scaling, LipschitzConfig, Sampling,
};
use weakgeo::{GeoError, Point};

use crate::config::{build_region, Experiment, ExperimentConfig, TaskSpec};
use crate::CliError;

/// Residual ratio below which a refinement study is at the rounding floor.
pub const REFINEMENT_FLOOR: f64 = 1e-10;

/// Config text, seed and thread count for one invocation.
#[derive(Debug, Clone)]
pub struct RunContext {
    pub config_text: String,
    pub seed_override: Option<u64>,
    pub threads: usize,
}

impl RunContext {
    pub fn load(path: &Path, seed_override: Option<u64>, threads: usize) -> Result<Self, CliError> {
        let config_text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self {
            config_text,
            seed_override,
            threads,
        })
    }

    fn experiment(&self) -> Result<(Experiment, u64), CliError> {
        let mut cfg = ExperimentConfig::from_json(&self.config_text)?;
        if let Some(s) = self.seed_override {
            cfg.seed = s;
        }
        let seed = cfg.seed;
        Ok((cfg.build()?, seed))
    }

    fn provenance(&self, seed: u64) -> String {
        let hash = Sha256::digest(self.config_text.as_bytes());
        format!(
            "weakgeo {} config={} seed={seed}",
            env!("CARGO_PKG_VERSION"),
            hex::encode(hash)
        )
    }
}

/// Outcome of a run: `passed` maps to exit code 0, otherwise 1.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub passed: bool,
    pub message: String,
}

fn create(dir: &Path, name: &str, header: &str) -> Result<fs::File, CliError> {
    let mut f = fs::File::create(dir.join(name))?;
    writeln!(f, "# {header}")?;
    Ok(f)
}

fn write_rows(dir: &Path, name: &str, header: &str, rows: &[(String, String)]) -> Result<(), CliError> {
    let mut f = create(dir, name, header)?;
    writeln!(f, "key,value")?;
    for (k, v) in rows {
        writeln!(f, "{k},{v}")?;
    }
    Ok(())
}

fn row(k: &str, v: impl ToString) -> (String, String) {
    (k.to_string(), v.to_string())
}

fn num(k: &str, v: f64) -> (String, String) {
    (k.to_string(), fmt_f64(v))
}

fn point_str(p: &Point) -> String {
    p.as_slice().iter().map(|&c| fmt_f64(c)).collect::<Vec<_>>().join(" ")
}

fn seed_curve(exp: &Experiment, waypoints: &[Point], n: usize) -> Result<DiscreteCurve, CliError> {
    let (x, y) = exp
        .endpoints
        .clone()
        .ok_or_else(|| CliError::Config("config has no endpoints".into()))?;
    let curve = if waypoints.is_empty() {
        initialize(&x, &y, &exp.set, n)
    } else {
        let mut all = vec![x];
        all.extend(waypoints.iter().cloned());
        all.push(y);
        initialize_polyline(&all, &exp.set, n)
    };
    curve.map_err(|e| CliError::Config(format!("cannot build seed curve: {e}")))
}

fn run_solver(
    exp: &Experiment,
    seed: DiscreteCurve,
    cfg: &SolverConfig,
) -> Result<(DiscreteCurve, SolveReport), CliError> {
    let (x, y) = (seed.node(0).clone(), seed.node(seed.segments()).clone());
    solve(&x, &y, &exp.set, cfg, Some(seed)).map_err(CliError::Numeric)
}

pub fn run_solve(ctx: &RunContext, out: &Path) -> Result<RunOutcome, CliError> {
    let (exp, seed) = ctx.experiment()?;
    let init = seed_curve(&exp, &exp.waypoints, exp.solver.n)?;
    fs::create_dir_all(out)?;
    let header = ctx.provenance(seed);
    let (curve, report) = run_solver(&exp, init, &exp.solver)?;

    let f = fs::File::create(out.join("curve.csv"))?;
    curve.write_csv(f, Some(&header)).map_err(CliError::Numeric)?;

    let mut f = create(out, "trace.csv", &header)?;
    writeln!(f, "iter,energy,residual,step")?;
    for (i, ((e, r), s)) in report
        .energy_trace
        .iter()
        .zip(&report.residual_trace)
        .zip(&report.step_trace)
        .enumerate()
    {
        writeln!(f, "{i},{},{},{}", fmt_f64(*e), fmt_f64(*r), fmt_f64(*s))?;
    }

    write_rows(
        out,
        "report.csv",
        &header,
        &[
            row("status", report.status.as_str()),
            row("converged", report.converged),
            row("iterations", report.iterations),
            row("n", curve.segments()),
            num("energy", report.final_energy),
            num("length", curve.length()),
            num("residual", report.final_residual),
            num("speed_mean", report.final_speed_stats.mean),
            num("speed_rel_deviation", report.final_speed_stats.rel_deviation),
            num("min_norm_subgradient_l2", report.min_norm_subgradient_l2),
        ],
    )?;
    Ok(RunOutcome {
        passed: report.converged,
        message: format!(
            "{} after {} iterations: energy {} residual {:e}",
            report.status.as_str(),
            report.iterations,
            report.final_energy,
            report.final_residual
        ),
    })
}

struct TaskResult {
    passed: bool,
    metric: &'static str,
    value: f64,
    rows: Vec<(String, String)>,
}

fn run_task(exp: &Experiment, task: &TaskSpec, sampling: Sampling) -> Result<TaskResult, CliError> {
    let m = exp.manifold;
    let set = &exp.set;
    let cfg_err = |e: GeoError| CliError::Config(e.to_string());
    match task {
        TaskSpec::Lipschitz {
            region,
            tube,
            pair_radius,
            epsilon,
            c_const,
            samples,
            max_ratio_limit,
        } => {
            let cfg = LipschitzConfig {
                region: build_region(&m, region)?,
                tube: *tube,
                pair_radius: *pair_radius,
                epsilon: *epsilon,
                c_const: *c_const,
                sampling: Sampling {
                    samples: *samples,
                    ..sampling
                },
            };
            let r = projection_lipschitz(set, &cfg).map_err(CliError::Numeric)?;
            let within = max_ratio_limit.is_none_or(|lim| r.max_ratio <= lim);
            let mut rows = vec![
                row("samples", r.samples),
                row("skipped", r.skipped),
                num("max_ratio", r.max_ratio),
                row("argmax_x", point_str(&r.argmax.0)),
                row("argmax_y", point_str(&r.argmax.1)),
                num("bound_theorem", r.bound_theorem),
                num("bound_corollary", r.bound_corollary),
                row("violations_theorem", r.violations_theorem),
                row("violations_corollary", r.violations_corollary),
                row("theorem_unchecked", r.theorem_unchecked),
                num("c_fitted", r.c_used),
                num("min_theorem_slack", r.min_theorem_slack),
                num("empirical_tube", r.empirical_tube),
                num("epsilon", *epsilon),
            ];
            if let Some((x, y)) = &r.min_slack_pair {
                rows.push(row("min_slack_x", point_str(x)));
                rows.push(row("min_slack_y", point_str(y)));
            }
            if let Some(lim) = max_ratio_limit {
                rows.push(num("max_ratio_limit", *lim));
            }
            Ok(TaskResult {
                passed: r.violations_theorem == 0 && r.violations_corollary == 0 && within,
                metric: "max_ratio",
                value: r.max_ratio,
                rows,
            })
        }
        TaskSpec::Defect {
            region,
            samples,
            slope_range,
        } => {
            let region = build_region(&m, region)?;
            let r = transport_defect_scaling(
                &m,
                &region,
                Sampling {
                    samples: *samples,
                    ..sampling
                },
            )
            .map_err(cfg_err)?;
            let passed = match slope_range {
                Some([lo, hi]) => r.slope.is_some_and(|s| (*lo..=*hi).contains(&s)),
                None => true,
            };
            let mut rows = vec![
                row("pairs", r.pairs),
                num("c_fitted", r.c_fitted),
                row("slope", r.slope.map_or("none".to_string(), fmt_f64)),
                num("max_defect", r.max_defect),
            ];
            if let Some((x, y)) = &r.argmax {
                rows.push(row("argmax_x", point_str(x)));
                rows.push(row("argmax_y", point_str(y)));
            }
            Ok(TaskResult {
                passed,
                metric: "c_fitted",
                value: r.c_fitted,
                rows,
            })
        }
        TaskSpec::Directional {
            point,
            direction,
            steps,
            max_error,
        } => {
            let x = m.point(point.clone()).map_err(cfg_err)?;
            if !set.contains(&x, weakgeo::proxset::MEMBERSHIP_TOL) {
                return Err(CliError::Config("directional point is not in the set".into()));
            }
            let v = m.tangent(&x, direction.clone()).map_err(cfg_err)?;
            let r = directional_derivative_check(set, &v, steps).map_err(CliError::Numeric)?;
            let mut rows = vec![
                row("limit", point_str(&Point::new(r.limit.as_slice().to_vec()))),
                row("monotone", r.monotone),
                num("final_error", r.final_error),
                num("max_error", *max_error),
            ];
            for (t, e) in r.steps.iter().zip(&r.errors) {
                rows.push((format!("error@{}", fmt_f64(*t)), fmt_f64(*e)));
            }
            Ok(TaskResult {
                passed: r.monotone && r.final_error <= *max_error,
                metric: "final_error",
                value: r.final_error,
                rows,
            })
        }
        TaskSpec::Phi {
            region,
            samples,
            max_dist,
        } => {
            let region = build_region(&m, region)?;
            let r = phi_convexity_check(
                set,
                &region,
                *max_dist,
                Sampling {
                    samples: *samples,
                    ..sampling
                },
            )
            .map_err(CliError::Numeric)?;
            let mut rows = vec![
                row("samples", r.samples),
                row(
                    "max_excess",
                    r.max_excess.map_or("no samples".to_string(), fmt_f64),
                ),
                row("violations", r.violations),
            ];
            if let Some((x, y)) = &r.argmax {
                rows.push(row("argmax_x", point_str(x)));
                rows.push(row("argmax_y", point_str(y)));
            }
            Ok(TaskResult {
                passed: r.violations == 0,
                metric: "max_excess",
                value: r.max_excess.unwrap_or(f64::NEG_INFINITY),
                rows,
            })
        }
        TaskSpec::Identity {
            gamma,
            eta,
            n,
            fd_step,
            min_refinement,
        } => {
            let curve = |ends: &[Vec<f64>; 2], n: usize| -> Result<DiscreteCurve, CliError> {
                let a = m.point(ends[0].clone()).map_err(cfg_err)?;
                let b = m.point(ends[1].clone()).map_err(cfg_err)?;
                DiscreteCurve::geodesic(m, &a, &b, n).map_err(cfg_err)
            };
            let coarse = identity_checks(&curve(gamma, *n)?, &curve(eta, *n)?, *fd_step).map_err(cfg_err)?;
            let fine =
                identity_checks(&curve(gamma, 2 * n)?, &curve(eta, 2 * n)?, fd_step / 2.0).map_err(cfg_err)?;
            let refined = |a: f64, b: f64| a <= REFINEMENT_FLOOR || b * min_refinement <= a;
            let dist_deriv_ok = refined(coarse.dist_deriv_residual, fine.dist_deriv_residual);
            let grad_ok = refined(coarse.grad_residual, fine.grad_residual);
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { f64::INFINITY };
            Ok(TaskResult {
                passed: dist_deriv_ok && grad_ok,
                metric: "dist_deriv_residual_fine",
                value: fine.dist_deriv_residual,
                rows: vec![
                    num("dist_deriv_residual_coarse", coarse.dist_deriv_residual),
                    num("dist_deriv_residual_fine", fine.dist_deriv_residual),
                    num("dist_deriv_ratio", ratio(coarse.dist_deriv_residual, fine.dist_deriv_residual)),
                    row("dist_deriv_argmax_fine", fine.dist_deriv_argmax),
                    num("grad_residual_coarse", coarse.grad_residual),
                    num("grad_residual_fine", fine.grad_residual),
                    num("grad_ratio", ratio(coarse.grad_residual, fine.grad_residual)),
                    row("grad_argmax_fine", fine.grad_argmax),
                ],
            })
        }
        TaskSpec::Comparison {
            waypoints,
            resolve,
            c_tol,
        } => {
            let n = exp.solver.n;
            let (gamma, report) = run_solver(exp, seed_curve(exp, &exp.waypoints, n)?, &exp.solver)?;
            let wps = waypoints
                .iter()
                .map(|w| m.point(w.clone()).map_err(cfg_err))
                .collect::<Result<Vec<_>, _>>()?;
            let mut eta = seed_curve(exp, &wps, n)?;
            let mut eta_converged = true;
            if *resolve {
                let (c, r) = run_solver(exp, eta, &exp.solver)?;
                eta = c;
                eta_converged = r.converged;
            }
            let r = comparison_inequality_check(&gamma, set, &eta).map_err(CliError::Numeric)?;
            let tol = c_tol / n as f64;
            Ok(TaskResult {
                passed: report.converged && eta_converged && r.margin >= -tol,
                metric: "margin",
                value: r.margin,
                rows: vec![
                    row("gamma_converged", report.converged),
                    row("eta_converged", eta_converged),
                    num("margin", r.margin),
                    num("tolerance", tol),
                    num("energy_eta", r.energy_eta),
                    num("energy_gamma", gamma.energy()),
                    num("c_term", r.c_term),
                    num("xi_term", r.xi_term),
                    num("penalty", r.penalty),
                    num("d_inf", r.d_inf),
                    num("l2_log", r.l2_log),
                    num("phi_bar", r.phi_bar),
                    row("worst_node", r.worst_node),
                ],
            })
        }
    }
}

pub fn run_verify(ctx: &RunContext, out: &Path) -> Result<RunOutcome, CliError> {
    let (exp, seed) = ctx.experiment()?;
    if exp.config.verify.is_empty() {
        return Err(CliError::Config("config has no verify tasks".into()));
    }
    fs::create_dir_all(out)?;
    let header = ctx.provenance(seed);
    let mut summary = Vec::new();
    for (i, task) in exp.config.verify.iter().enumerate() {
        let sampling = Sampling {
            samples: 0,
            seed: seed.wrapping_add(i as u64),
            threads: ctx.threads,
        };
        let result = run_task(&exp, task, sampling)?;
        let name = format!("task{i}_{}.csv", task.name());
        write_rows(out, &name, &header, &result.rows)?;
        summary.push((i, task.name(), result));
    }
    let mut f = create(out, "summary.csv", &header)?;
    writeln!(f, "task,kind,passed,metric,value")?;
    for (i, name, r) in &summary {
        writeln!(f, "{i},{name},{},{},{}", r.passed, r.metric, fmt_f64(r.value))?;
    }
    let failed: Vec<String> = summary
        .iter()
        .filter(|s| !s.2.passed)
        .map(|s| format!("task{} ({})", s.0, s.1))
        .collect();
    Ok(RunOutcome {
        passed: failed.is_empty(),
        message: if failed.is_empty() {
            format!("{} tasks passed", summary.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
    })
}
