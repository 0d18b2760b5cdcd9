//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Oracles are computed here, independently of the library code
//! under test.
#![allow(clippy::type_complexity)]

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use weakgeo::curve::DiscreteCurve;
use weakgeo::nalgebra::DVector;
use weakgeo::proxset::{AffineField, FieldBounds, ProxSet};
use weakgeo::verify::{directional_derivative_check, identity_checks, phi_convexity_check, Region, Sampling};
use weakgeo::{ManifoldModel, Point, TangentVector};

/// Speed deviations below this are rounding noise; the refinement
/// comparison is not meaningful there.
const SPEED_FLOOR: f64 = 1e-10;

type Outcome = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

struct Run {
    code: Option<i32>,
    elapsed: Duration,
    stderr: String,
}

fn weakgeo(cmd: &str, cfg: &Path, out: &Path, threads: &str) -> Run {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_weakgeo"))
        .args([cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("WEAKGEO_THREADS", threads)
        .output()
        .expect("binary runs");
    Run {
        code: o.status.code(),
        elapsed: start.elapsed(),
        stderr: String::from_utf8_lossy(&o.stderr).into_owned(),
    }
}

fn key_values(path: &Path) -> BTreeMap<String, String> {
    fs::read_to_string(path)
        .unwrap_or_default()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .filter_map(|l| l.split_once(',').map(|(k, v)| (k.to_string(), v.to_string())))
        .collect()
}

fn get(kv: &BTreeMap<String, String>, key: &str) -> Result<f64, String> {
    kv.get(key)
        .ok_or_else(|| format!("missing {key}"))?
        .parse()
        .map_err(|e| format!("{key}: {e}"))
}

fn check(ok: bool, msg: String) -> Outcome {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Config with `"n": 200` replaced.
fn with_n(name: &str, n: usize, dir: &Path) -> PathBuf {
    let text = fs::read_to_string(configs().join(name)).unwrap();
    assert!(text.contains("\"n\": 200"), "{name}");
    let p = dir.join(format!("{n}_{name}"));
    fs::write(&p, text.replace("\"n\": 200", &format!("\"n\": {n}"))).unwrap();
    p
}

// ---------------------------------------------------------------------------
// oracles

/// Shortest path around the unit disk by Dijkstra on the visibility graph of
/// the endpoints and the vertices of a circumscribed `m`-gon.
fn visibility_shortest_path(a: [f64; 2], b: [f64; 2], m: usize) -> f64 {
    let scale = 1.0 / (PI / m as f64).cos();
    let mut pts = vec![a, b];
    pts.extend((0..m).map(|k| {
        let t = 2.0 * PI * k as f64 / m as f64;
        [scale * t.cos(), scale * t.sin()]
    }));
    let clear = |p: [f64; 2], q: [f64; 2]| {
        let d = [q[0] - p[0], q[1] - p[1]];
        let len2 = d[0] * d[0] + d[1] * d[1];
        let s = if len2 == 0.0 {
            0.0
        } else {
            (-(p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0)
        };
        let c = [p[0] + s * d[0], p[1] + s * d[1]];
        c[0] * c[0] + c[1] * c[1] >= 1.0 - 1e-12
    };
    let n = pts.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut done = vec![false; n];
    dist[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&i| !done[i])
            .min_by(|&i, &j| dist[i].total_cmp(&dist[j]))
            .unwrap();
        if u == 1 {
            break;
        }
        done[u] = true;
        for v in 0..n {
            if !done[v] && clear(pts[u], pts[v]) {
                let w = ((pts[u][0] - pts[v][0]).powi(2) + (pts[u][1] - pts[v][1]).powi(2)).sqrt();
                dist[v] = dist[v].min(dist[u] + w);
            }
        }
    }
    dist[1]
}

fn read_nodes(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').skip(1).map(|v| v.parse().unwrap()).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// criteria

fn obstacle(tmp: &Path) -> Outcome {
    let analytic = 2.0 * 3f64.sqrt() + PI / 3.0;
    let brute = visibility_shortest_path([-2.0, 0.0], [2.0, 0.0], 4000);
    if (brute - analytic).abs() > 1e-4 {
        return Err(format!("oracles disagree: tangent-arc {analytic}, visibility {brute}"));
    }
    let target = analytic * analytic / 2.0;
    let out = tmp.join("c1");
    let run = weakgeo("solve", &configs().join("obstacle.json"), &out, "0");
    let kv = key_values(&out.join("report.csv"));
    let energy = get(&kv, "energy")?;
    let residual = get(&kv, "residual")?;
    let rel = (energy - target).abs() / target;
    let secs = run.elapsed.as_secs_f64();
    check(
        run.code == Some(0) && residual <= 1e-6 && rel <= 5e-3 && secs <= 10.0,
        format!(
            "exit {:?}, energy {energy:.6} vs {target:.6} (rel {rel:.2e}), residual {residual:.2e}, {secs:.2}s",
            run.code
        ),
    )
}

const SOLVES: [&str; 3] = ["euclidean_full.json", "obstacle.json", "hemisphere.json"];

fn solve_reports(tmp: &Path) -> Result<Vec<(String, BTreeMap<String, String>, BTreeMap<String, String>)>, String> {
    SOLVES
        .iter()
        .map(|name| {
            let mut kvs = Vec::new();
            for n in [200, 400] {
                let out = tmp.join(format!("speed_{n}_{name}"));
                let run = weakgeo("solve", &with_n(name, n, tmp), &out, "0");
                if run.code != Some(0) {
                    return Err(format!("{name} N={n}: exit {:?} {}", run.code, run.stderr.trim()));
                }
                kvs.push(key_values(&out.join("report.csv")));
            }
            let fine = kvs.pop().unwrap();
            let coarse = kvs.pop().unwrap();
            Ok((name.to_string(), coarse, fine))
        })
        .collect()
}

fn constant_speed(tmp: &Path) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, coarse, fine) in solve_reports(tmp)? {
        let a = get(&coarse, "speed_rel_deviation")?;
        let b = get(&fine, "speed_rel_deviation")?;
        ok &= a <= 1e-2 && (b < a || a.max(b) <= SPEED_FLOOR);
        parts.push(format!("{name} {a:.2e}→{b:.2e}"));
    }
    check(ok, format!("deviation N=200→400: {}", parts.join(", ")))
}

fn criticality(tmp: &Path) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, coarse, fine) in solve_reports(tmp)? {
        for kv in [&coarse, &fine] {
            let r = get(kv, "residual")?;
            let xi = get(kv, "min_norm_subgradient_l2")?;
            ok &= r <= 1e-6 && xi <= 1e-6;
            parts.push(format!("{name} N={} residual {r:.1e} ξ {xi:.1e}", kv["n"]));
        }
    }
    check(ok, parts.join(", "))
}

fn lipschitz(tmp: &Path) -> Outcome {
    let out = tmp.join("c4_circle");
    let run = weakgeo("verify", &configs().join("circle_lipschitz.json"), &out, "0");
    let kv = key_values(&out.join("task0_lipschitz.csv"));
    let samples = get(&kv, "samples")?;
    let max_ratio = get(&kv, "max_ratio")?;
    let vt = get(&kv, "violations_theorem")?;
    let vc = get(&kv, "violations_corollary")?;
    let limit = 1.0 / (1.0 - 0.1) + 5e-3;
    let secs = run.elapsed.as_secs_f64();

    let hp_out = tmp.join("c4_half");
    let hp = weakgeo("verify", &configs().join("half_plane.json"), &hp_out, "0");
    let hp_kv = key_values(&hp_out.join("task0_lipschitz.csv"));
    let hp_ratio = get(&hp_kv, "max_ratio")?;
    check(
        run.code == Some(0)
            && hp.code == Some(0)
            && samples >= 1e4
            && max_ratio <= limit
            && vt == 0.0
            && vc == 0.0
            && hp_ratio <= 1.0 + 1e-9
            && secs <= 5.0,
        format!(
            "circle: {samples} pairs, max ratio {max_ratio:.6} ≤ {limit:.6}, theorem violations {vt}, corollary violations {vc}, C {}, {secs:.2}s; half-plane max ratio {hp_ratio}",
            kv.get("c_fitted").map_or("?", |s| s)
        ),
    )
}

fn directional() -> Outcome {
    let e2 = ManifoldModel::euclidean(2).unwrap();
    let s2 = ManifoldModel::sphere(2, 1.0).unwrap();
    let pt = |c: &[f64]| Point::new(c.to_vec());
    let tv = |x: &Point, c: &[f64]| TangentVector::from_parts(x.clone(), DVector::from_column_slice(c));
    let half = |m: ManifoldModel, normal: &[f64]| {
        ProxSet::sublevel(
            m,
            std::sync::Arc::new(AffineField {
                normal: DVector::from_column_slice(normal),
                offset: 0.0,
            }),
            FieldBounds {
                g_min: 1.0,
                hess_max: 0.0,
                reach: f64::INFINITY,
            },
        )
        .unwrap()
    };
    let (s, c) = (0.5f64.sin(), 0.5f64.cos());
    let cap_x = pt(&[s, 0.0, c]);
    // (name, set, base, direction, expected limit)
    let cases: Vec<(&str, ProxSet, Point, Vec<f64>, Vec<f64>)> = vec![
        (
            "disk complement",
            ProxSet::ball_complement(e2, pt(&[0.0, 0.0]), 1.0).unwrap(),
            pt(&[1.0, 0.0]),
            vec![-1.0, 1.0],
            vec![0.0, 1.0],
        ),
        ("unit disk", ProxSet::ball(e2, pt(&[0.0, 0.0]), 1.0).unwrap(), pt(&[1.0, 0.0]), vec![1.0, 1.0], vec![0.0, 1.0]),
        ("half-plane", half(e2, &[1.0, 0.0]), pt(&[0.0, 0.5]), vec![1.0, 1.0], vec![0.0, 1.0]),
        (
            "quadrant corner",
            ProxSet::intersection(e2, vec![half(e2, &[1.0, 0.0]), half(e2, &[0.0, 1.0])]).unwrap(),
            pt(&[0.0, 0.0]),
            vec![1.0, -2.0],
            vec![0.0, -2.0],
        ),
        ("hemisphere", half(s2, &[0.0, 0.0, -1.0]), pt(&[1.0, 0.0, 0.0]), vec![0.0, 0.5, -1.0], vec![0.0, 0.5, 0.0]),
        (
            "spherical cap complement",
            ProxSet::ball_complement(s2, pt(&[0.0, 0.0, 1.0]), 0.5).unwrap(),
            cap_x.clone(),
            vec![-c, 1.0, s],
            vec![0.0, 1.0, 0.0],
        ),
    ];
    let steps = [1e-1, 1e-2, 1e-3];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, set, x, v, expected) in cases {
        let m = *set.manifold();
        let r = directional_derivative_check(&set, &tv(&x, &v), &steps).map_err(|e| format!("{name}: {e}"))?;
        let limit_err = m.norm(&r.limit.minus(&tv(&x, &expected)));
        let pass = r.errors[2] <= 1e-2 && r.monotone && limit_err <= 1e-9;
        ok &= pass;
        parts.push(format!("{name} {:.1e}{}", r.errors[2], if pass { "" } else { " (fail)" }));
    }
    check(ok, format!("error at t=1e-3: {}", parts.join(", ")))
}

fn kernels() -> Outcome {
    let models = [
        ManifoldModel::euclidean(2).unwrap(),
        ManifoldModel::sphere(2, 1.0).unwrap(),
        ManifoldModel::hyperbolic(2, -1.0).unwrap(),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, m) in models.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + k as u64);
        let mut origin = vec![0.0; m.ambient_dim()];
        if m.ambient_dim() > m.dim() {
            *origin.last_mut().unwrap() = 1.0;
        }
        let origin = Point::new(origin);
        let r = 0.45 * m.injectivity_radius().min(4.0);
        let (mut round, mut iso, mut flip) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..1000 {
            let x = m.sample_ball(&mut rng, &origin, r);
            let v = m.sample_tangent_ball(&mut rng, &x, r);
            let y = m.exp(&v).map_err(|e| e.to_string())?;
            let back = m.log(&x, &y).map_err(|e| e.to_string())?;
            round = round.max(m.norm(&back.minus(&v)));
            let w = m.sample_tangent_ball(&mut rng, &y, 1.0);
            let t = m.transport(&x, &w).map_err(|e| e.to_string())?;
            iso = iso.max((m.norm(&t) - m.norm(&w)).abs());
            let l = m.transport(&x, &m.log(&y, &x).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
            flip = flip.max(m.norm(&l.plus(&back)));
        }
        ok &= round <= 1e-9 && iso <= 1e-9 && flip <= 1e-9;
        parts.push(format!("{:?} {round:.1e}/{iso:.1e}/{flip:.1e}", m.kind()));
    }
    check(ok, format!("roundtrip/isometry/transport-log over 1000 samples: {}", parts.join(", ")))
}

fn phi_convexity() -> Outcome {
    let e2 = ManifoldModel::euclidean(2).unwrap();
    let pt = |c: &[f64]| Point::new(c.to_vec());
    let hp = ProxSet::sublevel(
        e2,
        std::sync::Arc::new(AffineField {
            normal: DVector::from_column_slice(&[1.0, 0.0]),
            offset: 0.0,
        }),
        FieldBounds {
            g_min: 1.0,
            hess_max: 0.0,
            reach: f64::INFINITY,
        },
    )
    .unwrap();
    let bc = ProxSet::ball_complement(e2, pt(&[0.0, 0.0]), 1.0).unwrap();
    if (bc.phi(&pt(&[1.0, 0.0])) - 0.5).abs() > 1e-15 || hp.phi(&pt(&[0.0, 0.0])) != 0.0 {
        return Err("φ defaults differ from 0 and 1/(2ρ)".into());
    }
    let region = Region {
        center: pt(&[0.0, 0.0]),
        radius: 2.0,
    };
    let sampling = Sampling {
        samples: 10_000,
        seed: 5,
        threads: 0,
    };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, set) in [("half-plane", &hp), ("disk complement", &bc)] {
        let r = phi_convexity_check(set, &region, 0.1, sampling).map_err(|e| e.to_string())?;
        let max = r.max_excess.unwrap_or(f64::NEG_INFINITY);
        ok &= r.samples >= 5000 && r.violations == 0 && max <= 1e-9;
        parts.push(format!("{name}: {} samples, max excess {max:.1e}, violations {}", r.samples, r.violations));
    }
    check(ok, parts.join("; "))
}

fn identities() -> Outcome {
    let s2 = ManifoldModel::sphere(2, 1.0).unwrap();
    let node = |t: f64, lat: f64| {
        let lon = 1.5 * t + lat * (2.0 * PI * t).sin();
        Point::new(vec![lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()])
    };
    let curves = |n: usize| {
        let g = DiscreteCurve::new(s2, (0..=n).map(|i| node(i as f64 / n as f64, 0.0)).collect()).unwrap();
        let e = DiscreteCurve::new(
            s2,
            (0..=n)
                .map(|i| {
                    let t = i as f64 / n as f64;
                    node(t, 0.2 * (PI * t).sin() * (1.0 + 0.5 * (3.0 * t).cos()))
                })
                .collect(),
        )
        .unwrap();
        (g, e)
    };
    let (g1, e1) = curves(200);
    let (g2, e2) = curves(400);
    let a = identity_checks(&g1, &e1, 0.1).map_err(|e| e.to_string())?;
    let b = identity_checks(&g2, &e2, 0.05).map_err(|e| e.to_string())?;
    let lem = a.dist_deriv_residual / b.dist_deriv_residual;
    let grad = a.grad_residual / b.grad_residual;
    check(
        lem >= 1.5 && grad >= 1.5 && b.dist_deriv_residual <= 0.05,
        format!(
            "distance-derivative residual {:.2e}→{:.2e} (×{lem:.2}), gradient residual {:.2e}→{:.2e} (×{grad:.2})",
            a.dist_deriv_residual, b.dist_deriv_residual, a.grad_residual, b.grad_residual
        ),
    )
}

fn hemisphere(tmp: &Path) -> Outcome {
    let out = tmp.join("c9");
    let run = weakgeo("solve", &configs().join("hemisphere.json"), &out, "0");
    let nodes = read_nodes(&out.join("curve.csv"));
    let n = nodes.len() - 1;
    let d_inf = nodes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let t = FRAC_PI_2 * i as f64 / n as f64;
            let exact = [t.cos(), t.sin(), 0.0];
            let dot: f64 = p.iter().zip(exact).map(|(a, b)| a * b).sum();
            dot.clamp(-1.0, 1.0).acos()
        })
        .fold(0.0, f64::max);
    check(
        run.code == Some(0) && d_inf <= 1e-3,
        format!("exit {:?}, d_inf to equator arc {d_inf:.2e}", run.code),
    )
}

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn determinism(tmp: &Path) -> Outcome {
    let runs = [
        ("solve", "euclidean_full.json"),
        ("solve", "obstacle.json"),
        ("solve", "hemisphere.json"),
        ("verify", "obstacle.json"),
        ("verify", "circle_lipschitz.json"),
        ("verify", "half_plane.json"),
        ("verify", "sphere_identities.json"),
    ];
    let mut files = 0;
    for (cmd, name) in runs {
        let cfg = configs().join(name);
        let mut outputs = Vec::new();
        for (k, threads) in ["0", "4", "0"].iter().enumerate() {
            let out = tmp.join(format!("det_{cmd}_{name}_{k}"));
            let run = weakgeo(cmd, &cfg, &out, threads);
            if run.code != Some(0) {
                return Err(format!("{cmd} {name} threads={threads}: exit {:?}", run.code));
            }
            outputs.push(dir_bytes(&out));
        }
        if outputs[0] != outputs[1] || outputs[0] != outputs[2] {
            return Err(format!("{cmd} {name}: outputs differ between runs"));
        }
        files += outputs[0].len();
    }
    Ok(format!("{} runs, {files} CSV files byte-identical (serial, 4 threads, serial)", runs.len()))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let t = tmp.path();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("obstacle geodesic", Box::new(|| obstacle(t))),
        ("constant speed", Box::new(|| constant_speed(t))),
        ("weak-geodesic criticality", Box::new(|| criticality(t))),
        ("projection Lipschitz", Box::new(|| lipschitz(t))),
        ("directional derivative", Box::new(directional)),
        ("manifold kernels", Box::new(kernels)),
        ("φ-convexity", Box::new(phi_convexity)),
        ("identity refinement", Box::new(identities)),
        ("hemisphere geodesic", Box::new(|| hemisphere(t))),
        ("determinism", Box::new(|| determinism(t))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS {:>2} {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
