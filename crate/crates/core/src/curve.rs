//! Discrete curves on a uniform grid of `[0, 1]` and tangent fields along them.

use std::io::{Read, Write};

use crate::error::{GeoError, Result};
use crate::manifold::{x_cot_x, ManifoldModel, Point, TangentVector};

/// `N + 1` nodes at times `t_i = i / N`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCurve {
    manifold: ManifoldModel,
    nodes: Vec<Point>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurveMetrics {
    /// `max_i d(γ_i, η_i)`.
    pub d_inf: f64,
    /// Trapezoid L² norm of `t ↦ d(γ(t), η(t))`.
    pub l2_log: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedStats {
    pub mean: f64,
    /// `(max − min) / mean` over node speeds; zero for a constant curve.
    pub rel_deviation: f64,
}

impl DiscreteCurve {
    pub fn new(manifold: ManifoldModel, nodes: Vec<Point>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(GeoError::InvalidParameter(format!(
                "a discrete curve needs N ≥ 2 segments, got {} nodes",
                nodes.len()
            )));
        }
        for p in &nodes {
            manifold.check_point(p)?;
        }
        let limit = 0.5 * manifold.injectivity_radius();
        for (i, w) in nodes.windows(2).enumerate() {
            let d = manifold.dist(&w[0], &w[1]);
            if d > limit {
                return Err(GeoError::Domain(format!(
                    "nodes {i} and {} are {d} apart, above half the injectivity radius",
                    i + 1
                )));
            }
        }
        Ok(Self { manifold, nodes })
    }

    /// Nodes at `t_i = i/N` on the minimizing geodesic from `x` to `y`.
    pub fn geodesic(manifold: ManifoldModel, x: &Point, y: &Point, n: usize) -> Result<Self> {
        let v = manifold.log(x, y)?;
        let nodes = (0..=n)
            .map(|i| {
                if i == 0 {
                    Ok(x.clone())
                } else if i == n {
                    Ok(y.clone())
                } else {
                    manifold.exp(&v.scaled(i as f64 / n as f64))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(manifold, nodes)
    }

    /// Piecewise-geodesic curve through `waypoints`, sampled uniformly in
    /// arc length with `n` segments.
    pub fn polyline(manifold: ManifoldModel, waypoints: &[Point], n: usize) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(GeoError::InvalidParameter(
                "a polyline needs at least two waypoints".into(),
            ));
        }
        let lens: Vec<f64> = waypoints
            .windows(2)
            .map(|w| manifold.dist(&w[0], &w[1]))
            .collect();
        let total: f64 = lens.iter().sum();
        let mut nodes = Vec::with_capacity(n + 1);
        nodes.push(waypoints[0].clone());
        let mut seg = 0;
        let mut start = 0.0;
        for i in 1..n {
            let s = total * i as f64 / n as f64;
            while seg + 1 < lens.len() && s > start + lens[seg] {
                start += lens[seg];
                seg += 1;
            }
            let t = if lens[seg] > 0.0 {
                ((s - start) / lens[seg]).clamp(0.0, 1.0)
            } else {
                0.0
            };
            nodes.push(manifold.geodesic(&waypoints[seg], &waypoints[seg + 1], t)?);
        }
        nodes.push(waypoints[waypoints.len() - 1].clone());
        Self::new(manifold, nodes)
    }

    pub fn manifold(&self) -> &ManifoldModel {
        &self.manifold
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Point {
        &self.nodes[i]
    }

    /// Number of segments `N`.
    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 / self.segments() as f64
    }

    pub(crate) fn into_nodes(self) -> Vec<Point> {
        self.nodes
    }

    fn check_index(&self, i: usize, interior: bool) -> Result<()> {
        let n = self.segments();
        let ok = if interior { i >= 1 && i < n } else { i <= n };
        if !ok {
            return Err(GeoError::IndexOutOfRange {
                index: i,
                len: self.nodes.len(),
            });
        }
        Ok(())
    }

    fn check_same_grid(&self, other: &DiscreteCurve) -> Result<()> {
        if self.manifold != other.manifold {
            return Err(GeoError::InvalidParameter(
                "curves live on different models".into(),
            ));
        }
        if self.nodes.len() != other.nodes.len() {
            return Err(GeoError::DimensionMismatch {
                expected: self.nodes.len(),
                got: other.nodes.len(),
            });
        }
        Ok(())
    }

    /// `(N/2) Σ d(x_i, x_{i+1})²`.
    pub fn energy(&self) -> f64 {
        let n = self.segments() as f64;
        let sum: f64 = self
            .nodes
            .windows(2)
            .map(|w| self.manifold.dist(&w[0], &w[1]).powi(2))
            .sum();
        0.5 * n * sum
    }

    /// Length of the piecewise geodesic through the nodes.
    pub fn length(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| self.manifold.dist(&w[0], &w[1]))
            .sum()
    }

    /// Forward difference `N·log(x_i, x_{i+1})`; backward at the last node.
    pub fn velocity(&self, i: usize) -> Result<TangentVector> {
        self.check_index(i, false)?;
        let n = self.segments();
        let m = &self.manifold;
        if i < n {
            Ok(m.log(&self.nodes[i], &self.nodes[i + 1])?.scaled(n as f64))
        } else {
            Ok(m.log(&self.nodes[n], &self.nodes[n - 1])?.scaled(-(n as f64)))
        }
    }

    /// `N²·(log(x_i, x_{i+1}) + log(x_i, x_{i−1}))`.
    pub fn covariant_accel(&self, i: usize) -> Result<TangentVector> {
        self.check_index(i, true)?;
        let n2 = (self.segments() as f64).powi(2);
        let m = &self.manifold;
        let fwd = m.log(&self.nodes[i], &self.nodes[i + 1])?;
        let bwd = m.log(&self.nodes[i], &self.nodes[i - 1])?;
        // the two logs nearly cancel; re-project the small sum
        Ok(m.project_tangent(&self.nodes[i], fwd.plus(&bwd).scaled(n2).coords().clone()))
    }

    pub fn speeds(&self) -> Result<Vec<f64>> {
        (0..=self.segments())
            .map(|i| Ok(self.manifold.norm(&self.velocity(i)?)))
            .collect()
    }

    pub fn speed_stats(&self) -> Result<SpeedStats> {
        let s = self.speeds()?;
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        let max = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().copied().fold(f64::INFINITY, f64::min);
        let rel_deviation = if mean > 0.0 { (max - min) / mean } else { 0.0 };
        Ok(SpeedStats {
            mean,
            rel_deviation,
        })
    }

    /// Comparison factor `2√Δ d cot(√Δ d)` with `d = d(γ_i, η_i)` and `Δ`
    /// the positive part of the curvature.
    pub fn c_factor(&self, other: &DiscreteCurve, i: usize) -> Result<f64> {
        self.check_same_grid(other)?;
        self.check_index(i, false)?;
        let d = self.manifold.dist(&self.nodes[i], &other.nodes[i]);
        c_factor(self.manifold.curvature_upper().max(0.0), d)
    }

    pub fn metrics(&self, other: &DiscreteCurve) -> Result<CurveMetrics> {
        self.check_same_grid(other)?;
        let d: Vec<f64> = self
            .nodes
            .iter()
            .zip(&other.nodes)
            .map(|(a, b)| self.manifold.dist(a, b))
            .collect();
        let d_inf = d.iter().copied().fold(0.0, f64::max);
        let l2_log = trapezoid(&d.iter().map(|x| x * x).collect::<Vec<_>>()).sqrt();
        Ok(CurveMetrics { d_inf, l2_log })
    }

    /// CSV with header `t,c0,c1,...`, one node per row; `comment` is written
    /// first as a `#` line.
    pub fn write_csv<W: Write>(&self, out: W, comment: Option<&str>) -> Result<()> {
        let mut out = out;
        if let Some(c) = comment {
            writeln!(out, "# {c}").map_err(io_err)?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((0..self.manifold.ambient_dim()).map(|k| format!("c{k}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, p) in self.nodes.iter().enumerate() {
            let mut row = vec![fmt_f64(self.time(i))];
            row.extend(p.as_slice().iter().map(|&c| fmt_f64(c)));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }

    pub fn read_csv<R: Read>(manifold: ManifoldModel, input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(input);
        let width = r.headers().map_err(csv_err)?.len();
        if width != manifold.ambient_dim() + 1 {
            return Err(GeoError::DimensionMismatch {
                expected: manifold.ambient_dim() + 1,
                got: width,
            });
        }
        let mut nodes = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_err)?;
            let coords = rec
                .iter()
                .skip(1)
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| GeoError::InvalidParameter(format!("bad number {f:?}: {e}")))
                })
                .collect::<Result<Vec<_>>>()?;
            nodes.push(manifold.point(coords)?);
        }
        Self::new(manifold, nodes)
    }
}

/// `2√Δ d cot(√Δ d)`; equal to 2 when `Δ ≤ 0` or `d = 0`.
pub fn c_factor(delta: f64, d: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Ok(2.0);
    }
    let a = delta.sqrt() * d;
    if a >= std::f64::consts::PI {
        return Err(GeoError::Domain(format!("√Δ·d = {a} ≥ π")));
    }
    Ok(2.0 * x_cot_x(a))
}

/// Trapezoid rule on the uniform grid of `[0, 1]`.
pub fn trapezoid(values: &[f64]) -> f64 {
    let n = values.len() - 1;
    let inner: f64 = values[1..n].iter().sum();
    (inner + 0.5 * (values[0] + values[n])) / n as f64
}

/// Shortest decimal that round-trips to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn io_err(e: std::io::Error) -> GeoError {
    GeoError::InvalidParameter(format!("i/o error: {e}"))
}

fn csv_err(e: csv::Error) -> GeoError {
    GeoError::InvalidParameter(format!("csv error: {e}"))
}

/// One tangent vector per node of a curve.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentField {
    curve: DiscreteCurve,
    vectors: Vec<TangentVector>,
}

impl TangentField {
    pub fn new(curve: DiscreteCurve, vectors: Vec<TangentVector>) -> Result<Self> {
        if vectors.len() != curve.nodes.len() {
            return Err(GeoError::DimensionMismatch {
                expected: curve.nodes.len(),
                got: vectors.len(),
            });
        }
        for (v, p) in vectors.iter().zip(&curve.nodes) {
            if v.base() != p {
                return Err(GeoError::InvalidParameter(
                    "field vector is not based at its node".into(),
                ));
            }
            curve.manifold.check_tangent(v)?;
        }
        Ok(Self { curve, vectors })
    }

    pub fn zero(curve: DiscreteCurve) -> Self {
        let vectors = curve.nodes.iter().map(TangentVector::zero).collect();
        Self { curve, vectors }
    }

    /// Parallel field: `v` transported node to node from the first node.
    pub fn parallel(curve: DiscreteCurve, v: TangentVector) -> Result<Self> {
        let m = curve.manifold;
        let mut vectors = vec![v];
        for p in &curve.nodes[1..] {
            let next = m.transport(p, vectors.last().expect("nonempty"))?;
            vectors.push(next);
        }
        Self::new(curve, vectors)
    }

    pub fn curve(&self) -> &DiscreteCurve {
        &self.curve
    }

    pub fn vectors(&self) -> &[TangentVector] {
        &self.vectors
    }

    pub fn is_proper(&self) -> bool {
        let last = self.vectors.len() - 1;
        self.vectors[0].coords().iter().all(|&c| c == 0.0)
            && self.vectors[last].coords().iter().all(|&c| c == 0.0)
    }

    /// `(N/2)·(L V_{i+1} − L V_{i−1})` with both neighbors transported to `x_i`.
    pub fn derivative(&self, i: usize) -> Result<TangentVector> {
        self.curve.check_index(i, true)?;
        let m = &self.curve.manifold;
        let x = &self.curve.nodes[i];
        let next = m.transport(x, &self.vectors[i + 1])?;
        let prev = m.transport(x, &self.vectors[i - 1])?;
        let d = next.minus(&prev).scaled(0.5 * self.curve.segments() as f64);
        Ok(m.project_tangent(x, d.coords().clone()))
    }

    /// Trapezoid L² norm.
    pub fn l2_norm(&self) -> f64 {
        let m = &self.curve.manifold;
        let sq: Vec<f64> = self.vectors.iter().map(|v| m.inner(v, v)).collect();
        trapezoid(&sq).sqrt()
    }
}
