//! Damped-Newton solver for the maximal/CMC spacelike graph equation
//! `div(grad f / sqrt(1 - |grad f|^2)) = c` on discretized domains: the flat
//! 2-torus, an interval, and radial disks with Euclidean or hyperbolic
//! weight.
//!
//! The torus discretization is the gradient of the discrete area functional
//! on a uniform right-triangle mesh (a divergence-form central stencil that
//! reduces to the 5-point Laplacian in the linear limit). The functional is
//! convex on spacelike data, its Hessian is symmetric positive semidefinite
//! with only the constant field in its kernel, and the only periodic
//! critical points of the c = 0 equation are constant fields; Newton with
//! an energy line search therefore converges globally and lands on exact
//! constants, which is the desk-scale rigidity statement the experiments
//! probe.

use crate::error::{GeomError, Result};
use crate::graph::GraphMap;
use crate::metric::MetricField;
use serde::Serialize;

/// Discrete spacelike margin: face gradients must stay below 1 - this.
pub const SPACELIKE_MARGIN: f64 = 1e-6;

/// Domain of a discrete graph.
#[derive(Clone, Debug, Serialize)]
pub enum DomainSpec {
    /// Periodic unit square, `n x n` nodes, spacing 1/n.
    Torus { n: usize },
    /// Interval [0, length] with Dirichlet values at both ends.
    Interval {
        n: usize,
        length: f64,
        left: f64,
        right: f64,
    },
    /// Radial profile on [0, radius]; Neumann at 0, Dirichlet at the rim.
    RadialDisk {
        n: usize,
        radius: f64,
        boundary: f64,
    },
}

impl DomainSpec {
    pub fn node_count(&self) -> usize {
        match self {
            DomainSpec::Torus { n } => n * n,
            DomainSpec::Interval { n, .. } => n + 1,
            DomainSpec::RadialDisk { n, .. } => n + 1,
        }
    }

    pub fn spacing(&self) -> f64 {
        match self {
            DomainSpec::Torus { n } => 1.0 / *n as f64,
            DomainSpec::Interval { n, length, .. } => length / *n as f64,
            DomainSpec::RadialDisk { n, radius, .. } => radius / *n as f64,
        }
    }
}

/// Gridded scalar graph values over a domain.
#[derive(Clone, Debug, Serialize)]
pub struct DiscreteGraph {
    pub domain: DomainSpec,
    pub values: Vec<f64>,
}

/// Solver controls.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveOptions {
    pub c: f64,
    pub max_iterations: usize,
    /// Max-norm target for the operator residual.
    pub tolerance: f64,
    /// Initial damping of the Newton step; grows toward 1 on success.
    pub damping_init: f64,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            c: 0.0,
            max_iterations: 60,
            tolerance: 1e-11,
            damping_init: 0.5,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub step: f64,
    pub range: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveResult {
    pub graph: DiscreteGraph,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub log: Vec<IterationRecord>,
}

fn phi(s: f64) -> f64 {
    s / (1.0 - s * s).sqrt()
}

fn phi_prime(s: f64) -> f64 {
    (1.0 - s * s).powf(-1.5)
}

impl DiscreteGraph {
    pub fn new(domain: DomainSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.node_count() {
            return Err(GeomError::DimensionMismatch {
                expected: domain.node_count(),
                got: values.len(),
            });
        }
        Ok(DiscreteGraph { domain, values })
    }

    /// Largest central-difference gradient magnitude over the nodes.
    pub fn max_central_gradient(&self) -> f64 {
        let h = self.domain.spacing();
        match &self.domain {
            DomainSpec::Torus { n } => {
                let n = *n;
                let f = &self.values;
                let idx = |i: usize, j: usize| (i % n) * n + (j % n);
                let mut worst: f64 = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let dx = (f[idx(i + 1, j)] - f[idx(i + n - 1, j)]) / (2.0 * h);
                        let dy = (f[idx(i, j + 1)] - f[idx(i, j + n - 1)]) / (2.0 * h);
                        worst = worst.max((dx * dx + dy * dy).sqrt());
                    }
                }
                worst
            }
            _ => {
                let f = &self.values;
                let mut worst: f64 = 0.0;
                for i in 1..f.len() - 1 {
                    worst = worst.max(((f[i + 1] - f[i - 1]) / (2.0 * h)).abs());
                }
                worst
            }
        }
    }

    /// Largest face-difference gradient (the spacelike control quantity).
    pub fn max_face_gradient(&self) -> f64 {
        max_face_gradient(&self.domain, &self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn range(&self) -> f64 {
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    /// Low-pass trigonometric interpolation of a torus field as a smooth
    /// graph map (modes up to 8 per axis, coefficients below 1e-13 dropped).
    pub fn to_graph_map(&self) -> Result<GraphMap> {
        let DomainSpec::Torus { n } = self.domain else {
            return Err(GeomError::InvalidParameter(
                "interpolation is provided for torus fields".into(),
            ));
        };
        let f = &self.values;
        let kmax = 8usize.min(n / 2 - 1);
        let mut waves: Vec<(i64, i64, f64, f64)> = Vec::new();
        let scale = f.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
        let mut mean = 0.0;
        for v in f.iter() {
            mean += v;
        }
        mean /= (n * n) as f64;
        for k in -(kmax as i64)..=(kmax as i64) {
            for l in -(kmax as i64)..=(kmax as i64) {
                if (k, l) == (0, 0) {
                    continue;
                }
                // one representative per conjugate pair
                if k < 0 || (k == 0 && l < 0) {
                    continue;
                }
                let mut re = 0.0;
                let mut im = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let phase = std::f64::consts::TAU
                            * (k as f64 * i as f64 + l as f64 * j as f64)
                            / n as f64;
                        re += f[i * n + j] * phase.cos();
                        im += f[i * n + j] * phase.sin();
                    }
                }
                let a = 2.0 * re / (n * n) as f64;
                let b = 2.0 * im / (n * n) as f64;
                if a.abs() > 1e-13 * scale || b.abs() > 1e-13 * scale {
                    waves.push((k, l, a, b));
                }
            }
        }
        let map = GraphMap::new(
            "torus_interpolant",
            2,
            1,
            std::sync::Arc::new(move |x: &[crate::jet::Jet]| {
                let dim = x[0].dim();
                let order = x.iter().map(|j| j.order()).min().unwrap();
                let mut s = crate::jet::Jet::constant(dim, order, mean);
                for &(k, l, a, b) in waves.iter() {
                    let phase = x[0].scale(std::f64::consts::TAU * k as f64)
                        + x[1].scale(std::f64::consts::TAU * l as f64);
                    s = s + phase.cos().scale(a) + phase.sin().scale(b);
                }
                vec![s]
            }),
            std::sync::Arc::new(|_| true),
        );
        Ok(map)
    }
}

fn max_face_gradient(domain: &DomainSpec, f: &[f64]) -> f64 {
    let h = domain.spacing();
    match domain {
        DomainSpec::Torus { n } => {
            let n = *n;
            let idx = |i: usize, j: usize| (i % n) * n + (j % n);
            let mut worst: f64 = 0.0;
            for i in 0..n {
                for j in 0..n {
                    // both triangle gradients of the cell
                    let a = f[idx(i, j)];
                    let b = f[idx(i + 1, j)];
                    let c = f[idx(i + 1, j + 1)];
                    let d = f[idx(i, j + 1)];
                    let (u1, v1) = ((b - a) / h, (c - b) / h);
                    let (u2, v2) = ((c - d) / h, (d - a) / h);
                    worst = worst.max((u1 * u1 + v1 * v1).sqrt());
                    worst = worst.max((u2 * u2 + v2 * v2).sqrt());
                }
            }
            worst
        }
        _ => {
            let mut worst: f64 = 0.0;
            for i in 0..f.len() - 1 {
                worst = worst.max(((f[i + 1] - f[i]) / h).abs());
            }
            worst
        }
    }
}

fn check_metric_domain(domain: &DomainSpec, metric: &MetricField) -> Result<usize> {
    match domain {
        DomainSpec::Torus { .. } => {
            if metric.name() != "flat_torus" || metric.dim() != 2 {
                return Err(GeomError::InvalidParameter(
                    "torus solves expect the 2-dimensional `flat_torus` metric".into(),
                ));
            }
            Ok(2)
        }
        DomainSpec::Interval { .. } => {
            if metric.dim() != 1 || !metric.is_flat() {
                return Err(GeomError::InvalidParameter(
                    "interval solves expect the `line` metric".into(),
                ));
            }
            Ok(1)
        }
        DomainSpec::RadialDisk { .. } => match metric.name() {
            "poincare_ball" | "euclidean" => Ok(metric.dim()),
            other => Err(GeomError::InvalidParameter(format!(
                "radial solves support `poincare_ball` and `euclidean`, got `{other}`"
            ))),
        },
    }
}

/// Radial area-density weight of the metric in geodesic polar coordinates.
fn radial_weight(metric: &MetricField, m: usize, r: f64) -> f64 {
    match metric.name() {
        "poincare_ball" => r.sinh().powi(m as i32 - 1),
        _ => r.powi(m as i32 - 1),
    }
}

/// Discrete divergence-form residual field of the CMC operator; converges
/// at second order to `<H, nu> - c` for smooth fields.
pub fn cmc_operator_residual(
    dg: &DiscreteGraph,
    metric: &MetricField,
    c: f64,
) -> Result<Vec<f64>> {
    let m = check_metric_domain(&dg.domain, metric)?;
    let worst = max_face_gradient(&dg.domain, &dg.values);
    if worst > 1.0 - SPACELIKE_MARGIN {
        // locate the offending node for the error payload
        let node = worst_gradient_node(&dg.domain, &dg.values);
        return Err(GeomError::DiscreteSpacelike {
            node,
            gradient: worst,
        });
    }
    Ok(match &dg.domain {
        DomainSpec::Torus { n } => torus_residual(*n, &dg.values, c),
        DomainSpec::Interval { n, length, .. } => {
            let h = length / *n as f64;
            interval_residual(&dg.values, h, c)
        }
        DomainSpec::RadialDisk { n, radius, .. } => {
            let h = radius / *n as f64;
            radial_residual(&dg.values, h, c, metric, m)
        }
    })
}

fn worst_gradient_node(domain: &DomainSpec, f: &[f64]) -> usize {
    let h = domain.spacing();
    match domain {
        DomainSpec::Torus { n } => {
            let n = *n;
            let idx = |i: usize, j: usize| (i % n) * n + (j % n);
            let mut worst = 0.0;
            let mut at = 0;
            for i in 0..n {
                for j in 0..n {
                    let g = ((f[idx(i + 1, j)] - f[idx(i, j)]) / h).abs();
                    if g > worst {
                        worst = g;
                        at = idx(i, j);
                    }
                }
            }
            at
        }
        _ => {
            let mut worst = 0.0;
            let mut at = 0;
            for i in 0..f.len() - 1 {
                let g = ((f[i + 1] - f[i]) / h).abs();
                if g > worst {
                    worst = g;
                    at = i;
                }
            }
            at
        }
    }
}

// ---- torus discretization -------------------------------------------------

/// Gradient of the discrete area functional plus the volume term, scaled to
/// the operator residual `div(Df/w) - c` (5-point stencil in the linear
/// limit). Each unit cell is split into two right triangles.
fn torus_energy_gradient(n: usize, f: &[f64], c: f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    let area = 0.5 * h * h;
    let mut grad = vec![c * h * h; n * n];
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    for i in 0..n {
        for j in 0..n {
            let ia = idx(i, j);
            let ib = idx(i + 1, j);
            let ic = idx(i + 1, j + 1);
            let id = idx(i, j + 1);
            let (a, b, cc, d) = (f[ia], f[ib], f[ic], f[id]);
            // lower triangle (a, b, c)
            let u1 = (b - a) / h;
            let v1 = (cc - b) / h;
            let w1 = (1.0 - u1 * u1 - v1 * v1).sqrt();
            grad[ia] += area * (-u1 / h) / w1;
            grad[ib] += area * ((u1 - v1) / h) / w1;
            grad[ic] += area * (v1 / h) / w1;
            // upper triangle (a, c, d)
            let u2 = (cc - d) / h;
            let v2 = (d - a) / h;
            let w2 = (1.0 - u2 * u2 - v2 * v2).sqrt();
            grad[ia] += area * (-v2 / h) / w2;
            grad[ic] += area * (u2 / h) / w2;
            grad[id] += area * ((v2 - u2) / h) / w2;
        }
    }
    grad
}

fn torus_residual(n: usize, f: &[f64], c: f64) -> Vec<f64> {
    let h = 1.0 / n as f64;
    torus_energy_gradient(n, f, c)
        .iter()
        .map(|g| -g / (h * h))
        .collect()
}

fn torus_energy(n: usize, f: &[f64], c: f64) -> f64 {
    let h = 1.0 / n as f64;
    let area = 0.5 * h * h;
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut e = 0.0;
    for i in 0..n {
        for j in 0..n {
            let (a, b, cc, d) = (
                f[idx(i, j)],
                f[idx(i + 1, j)],
                f[idx(i + 1, j + 1)],
                f[idx(i, j + 1)],
            );
            let u1 = (b - a) / h;
            let v1 = (cc - b) / h;
            let u2 = (cc - d) / h;
            let v2 = (d - a) / h;
            e -= area * (1.0 - u1 * u1 - v1 * v1).max(0.0).sqrt();
            e -= area * (1.0 - u2 * u2 - v2 * v2).max(0.0).sqrt();
        }
    }
    e + c * h * h * f.iter().sum::<f64>()
}

/// Hessian-vector product of the torus functional.
fn torus_hessian_apply(n: usize, f: &[f64], v: &[f64], out: &mut [f64]) {
    let h = 1.0 / n as f64;
    let area = 0.5 * h * h;
    out.iter_mut().for_each(|x| *x = 0.0);
    let idx = |i: usize, j: usize| (i % n) * n + (j % n);
    for i in 0..n {
        for j in 0..n {
            let ia = idx(i, j);
            let ib = idx(i + 1, j);
            let ic = idx(i + 1, j + 1);
            let id = idx(i, j + 1);
            // lower triangle
            {
                let u = (f[ib] - f[ia]) / h;
                let w = (f[ic] - f[ib]) / h;
                let du = (v[ib] - v[ia]) / h;
                let dw = (v[ic] - v[ib]) / h;
                let wsq = 1.0 - u * u - w * w;
                let wv = wsq.sqrt();
                let dot = u * du + w * dw;
                let su = du / wv + dot * u / (wv * wsq);
                let sw = dw / wv + dot * w / (wv * wsq);
                out[ia] += area * (-su / h);
                out[ib] += area * ((su - sw) / h);
                out[ic] += area * (sw / h);
            }
            // upper triangle
            {
                let u = (f[ic] - f[id]) / h;
                let w = (f[id] - f[ia]) / h;
                let du = (v[ic] - v[id]) / h;
                let dw = (v[id] - v[ia]) / h;
                let wsq = 1.0 - u * u - w * w;
                let wv = wsq.sqrt();
                let dot = u * du + w * dw;
                let su = du / wv + dot * u / (wv * wsq);
                let sw = dw / wv + dot * w / (wv * wsq);
                out[ia] += area * (-sw / h);
                out[ic] += area * (su / h);
                out[id] += area * ((sw - su) / h);
            }
        }
    }
}

fn project_mean_zero(v: &mut [f64]) {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

/// Conjugate gradients on the mean-zero subspace.
fn torus_cg(n: usize, f: &[f64], rhs: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let len = n * n;
    let mut x = vec![0.0; len];
    let mut r = rhs.to_vec();
    project_mean_zero(&mut r);
    let mut p = r.clone();
    let mut ap = vec![0.0; len];
    let mut rs: f64 = r.iter().map(|v| v * v).sum();
    let target = tol * tol * rs.max(1e-300);
    for _ in 0..max_iter {
        if rs <= target {
            break;
        }
        torus_hessian_apply(n, f, &p, &mut ap);
        project_mean_zero(&mut ap);
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rs / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rs_new: f64 = r.iter().map(|v| v * v).sum();
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..len {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

// ---- one-dimensional discretizations ---------------------------------------

fn interval_residual(f: &[f64], h: f64, c: f64) -> Vec<f64> {
    let n = f.len();
    let mut r = vec![0.0; n];
    for i in 1..n - 1 {
        let up = (f[i + 1] - f[i]) / h;
        let um = (f[i] - f[i - 1]) / h;
        r[i] = (phi(up) - phi(um)) / h - c;
    }
    r
}

fn radial_residual(f: &[f64], h: f64, c: f64, metric: &MetricField, m: usize) -> Vec<f64> {
    let n = f.len();
    let mut r = vec![0.0; n];
    // symmetry node: the operator limit m * d/dr phi(f') at r = 0
    let u_half = (f[1] - f[0]) / h;
    r[0] = 2.0 * m as f64 * phi(u_half) / h - c;
    for i in 1..n - 1 {
        let rp = (i as f64 + 0.5) * h;
        let rm = (i as f64 - 0.5) * h;
        let ri = i as f64 * h;
        let sp = radial_weight(metric, m, rp);
        let sm = radial_weight(metric, m, rm);
        let si = radial_weight(metric, m, ri);
        let up = (f[i + 1] - f[i]) / h;
        let um = (f[i] - f[i - 1]) / h;
        r[i] = (sp * phi(up) - sm * phi(um)) / (si * h) - c;
    }
    r
}

/// Tridiagonal Newton step for the 1-D problems; interior unknowns only.
fn oned_newton_step(
    f: &[f64],
    h: f64,
    residual: &[f64],
    weight: impl Fn(f64) -> f64,
    radial: bool,
    m: usize,
) -> Vec<f64> {
    let n = f.len();
    let start = if radial { 0 } else { 1 };
    let unknowns = n - 1 - start;
    let mut lower = vec![0.0; unknowns];
    let mut diag = vec![0.0; unknowns];
    let mut upper = vec![0.0; unknowns];
    let mut rhs = vec![0.0; unknowns];
    for (row, i) in (start..n - 1).enumerate() {
        rhs[row] = -residual[i];
        if radial && i == 0 {
            let u = (f[1] - f[0]) / h;
            let k = 2.0 * m as f64 * phi_prime(u) / (h * h);
            diag[row] = -k;
            upper[row] = k;
            continue;
        }
        let (sp, sm, si) = if radial {
            let rp = (i as f64 + 0.5) * h;
            let rm = (i as f64 - 0.5) * h;
            (weight(rp), weight(rm), weight(i as f64 * h))
        } else {
            (1.0, 1.0, 1.0)
        };
        let up = (f[i + 1] - f[i]) / h;
        let um = (f[i] - f[i - 1]) / h;
        let kp = sp * phi_prime(up) / (si * h * h);
        let km = sm * phi_prime(um) / (si * h * h);
        diag[row] = -(kp + km);
        upper[row] = kp;
        lower[row] = km;
    }
    // Thomas algorithm
    let mut cp = vec![0.0; unknowns];
    let mut dp = vec![0.0; unknowns];
    cp[0] = upper[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..unknowns {
        let denom = diag[i] - lower[i] * cp[i - 1];
        cp[i] = upper[i] / denom;
        dp[i] = (rhs[i] - lower[i] * dp[i - 1]) / denom;
    }
    let mut delta = vec![0.0; unknowns];
    delta[unknowns - 1] = dp[unknowns - 1];
    for i in (0..unknowns - 1).rev() {
        delta[i] = dp[i] - cp[i] * delta[i + 1];
    }
    let mut full = vec![0.0; n];
    for (row, i) in (start..n - 1).enumerate() {
        full[i] = delta[row];
    }
    full
}

/// Initial data for a solve.
#[derive(Clone, Debug)]
pub enum InitialData {
    /// Seeded random trigonometric field (torus) scaled to the given
    /// maximum gradient, or linear interpolation elsewhere.
    Random { max_gradient: f64 },
    Values(Vec<f64>),
    Constant(f64),
}

fn initial_values(
    domain: &DomainSpec,
    init: &InitialData,
    seed: u64,
) -> Result<Vec<f64>> {
    match (domain, init) {
        (_, InitialData::Values(v)) => {
            if v.len() != domain.node_count() {
                return Err(GeomError::DimensionMismatch {
                    expected: domain.node_count(),
                    got: v.len(),
                });
            }
            Ok(v.clone())
        }
        (_, InitialData::Constant(v)) => Ok(vec![*v; domain.node_count()]),
        (DomainSpec::Torus { n }, InitialData::Random { max_gradient }) => {
            let map = crate::solutions::trig_graph(2, seed, *max_gradient, 3)?;
            let n = *n;
            let mut vals = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..n {
                    let p = [i as f64 / n as f64, j as f64 / n as f64];
                    vals[i * n + j] = map.value(&p)?[0];
                }
            }
            Ok(vals)
        }
        (DomainSpec::Interval { n, left, right, .. }, InitialData::Random { .. }) => Ok((0..=*n)
            .map(|i| left + (right - left) * i as f64 / *n as f64)
            .collect()),
        (DomainSpec::RadialDisk { n, boundary, .. }, InitialData::Random { .. }) => {
            Ok(vec![*boundary; *n + 1])
        }
    }
}

/// Solve the discrete CMC equation by damped Newton iteration.
///
/// Every accepted iterate stays strictly spacelike; the step is scaled back
/// whenever the face gradients would cross `1 - SPACELIKE_MARGIN` and an
/// Armijo test controls the update (energy decrease on the torus, residual
/// decrease on the 1-D domains).
pub fn solve_cmc(
    options: &SolveOptions,
    domain: &DomainSpec,
    metric: &MetricField,
    init: &InitialData,
) -> Result<SolveResult> {
    let m = check_metric_domain(domain, metric)?;
    let mut f = initial_values(domain, init, options.seed)?;
    if max_face_gradient(domain, &f) > 1.0 - SPACELIKE_MARGIN {
        let node = worst_gradient_node(domain, &f);
        return Err(GeomError::DiscreteSpacelike {
            node,
            gradient: max_face_gradient(domain, &f),
        });
    }
    let h = domain.spacing();
    let mut log = Vec::new();
    let mut damping = options.damping_init.clamp(1e-3, 1.0);
    let mut history = Vec::new();

    let residual_of = |f: &[f64]| -> Vec<f64> {
        match domain {
            DomainSpec::Torus { n } => torus_residual(*n, f, options.c),
            DomainSpec::Interval { .. } => interval_residual(f, h, options.c),
            DomainSpec::RadialDisk { .. } => radial_residual(f, h, options.c, metric, m),
        }
    };
    let max_norm = |v: &[f64]| v.iter().map(|x| x.abs()).fold(0.0, f64::max);

    let mut res = residual_of(&f);
    let mut res_norm = max_norm(&res);
    let range0 = {
        let dg = DiscreteGraph::new(domain.clone(), f.clone())?;
        dg.range()
    };
    log.push(IterationRecord {
        iteration: 0,
        residual: res_norm,
        step: 0.0,
        range: range0,
    });
    history.push(res_norm);

    let mut iterations = 0;
    while res_norm > options.tolerance && iterations < options.max_iterations {
        iterations += 1;
        // Newton direction
        let delta = match domain {
            DomainSpec::Torus { n } => {
                let mut grad = torus_energy_gradient(*n, &f, options.c);
                let rhs: Vec<f64> = grad.iter().map(|g| -g).collect();
                let d = torus_cg(*n, &f, &rhs, 1e-10, 40 * n * n);
                project_mean_zero(&mut grad);
                d
            }
            DomainSpec::Interval { .. } => {
                oned_newton_step(&f, h, &res, |_| 1.0, false, m)
            }
            DomainSpec::RadialDisk { .. } => {
                let metric_name = metric.name().to_string();
                let mm = m;
                oned_newton_step(
                    &f,
                    h,
                    &res,
                    move |r| {
                        if metric_name == "poincare_ball" {
                            r.sinh().powi(mm as i32 - 1)
                        } else {
                            r.powi(mm as i32 - 1)
                        }
                    },
                    true,
                    m,
                )
            }
        };

        // step control: spacelike cap plus backtracking
        let mut alpha = damping;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = f
                .iter()
                .zip(delta.iter())
                .map(|(a, d)| a + alpha * d)
                .collect();
            if max_face_gradient(domain, &trial) > 1.0 - SPACELIKE_MARGIN {
                alpha *= 0.5;
                continue;
            }
            let ok = match domain {
                DomainSpec::Torus { n } => {
                    // Armijo on the convex energy
                    let g0 = torus_energy(*n, &f, options.c);
                    let grad = torus_energy_gradient(*n, &f, options.c);
                    let slope: f64 = grad.iter().zip(delta.iter()).map(|(a, b)| a * b).sum();
                    let g1 = torus_energy(*n, &trial, options.c);
                    g1 <= g0 + 1e-4 * alpha * slope || g1 < g0
                }
                _ => {
                    let r1 = residual_of(&trial);
                    max_norm(&r1) <= (1.0 - 1e-4 * alpha) * res_norm || max_norm(&r1) < res_norm
                }
            };
            if ok {
                f = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
        damping = (2.0 * damping).min(1.0);
        res = residual_of(&f);
        res_norm = max_norm(&res);
        history.push(res_norm);
        let dg = DiscreteGraph::new(domain.clone(), f.clone())?;
        log.push(IterationRecord {
            iteration: iterations,
            residual: res_norm,
            step: alpha,
            range: dg.range(),
        });
    }

    let converged = res_norm <= options.tolerance;
    if !converged {
        return Err(GeomError::NoConvergence {
            iterations,
            residual: res_norm,
            history,
        });
    }
    Ok(SolveResult {
        graph: DiscreteGraph::new(domain.clone(), f)?,
        converged,
        iterations,
        final_residual: res_norm,
        log,
    })
}

/// Desk-scale rigidity experiment: solve the maximal equation on the torus
/// from seeded random spacelike data and run the pointwise suites on the
/// interpolated solution.
#[derive(Clone, Debug, Serialize)]
pub struct BernsteinReport {
    pub seed: u64,
    pub grid: usize,
    pub iterations: usize,
    pub final_residual: f64,
    pub final_sup_gradient: f64,
    pub converged_constant: f64,
    pub range_tail: Vec<f64>,
    pub surface_report: crate::identities::IdentityReport,
    pub inequality_report: crate::identities::IdentityReport,
}

pub fn bernstein_experiment(seed: u64, grid: usize, target_kind: &str) -> Result<BernsteinReport> {
    if target_kind != "line" {
        return Err(GeomError::InvalidParameter(format!(
            "unsupported target `{target_kind}`; the experiment targets the line"
        )));
    }
    let domain = DomainSpec::Torus { n: grid };
    let metric = crate::metric::metric_by_name("flat_torus", 2)?;
    let options = SolveOptions {
        seed,
        ..Default::default()
    };
    let result = solve_cmc(
        &options,
        &domain,
        &metric,
        &InitialData::Random { max_gradient: 0.5 },
    )?;
    let sup = result.graph.max_central_gradient();
    let constant = result.graph.mean();
    let tail: Vec<f64> = result
        .log
        .iter()
        .rev()
        .take(5)
        .map(|r| r.range)
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();

    let interp = result.graph.to_graph_map()?;
    let product = crate::graph::ProductMetric::new(
        crate::metric::metric_by_name("flat_torus", 2)?,
        crate::metric::metric_by_name("line", 1)?,
    );
    let p = [0.3, 0.6];
    let surface_report = crate::identities::surface_case_report(&product, &interp, &p)?;
    let inequality_report = crate::identities::bernstein_inequality(&product, &interp, &p)?;
    Ok(BernsteinReport {
        seed,
        grid,
        iterations: result.iterations,
        final_residual: result.final_residual,
        final_sup_gradient: sup,
        converged_constant: constant,
        range_tail: tail,
        surface_report,
        inequality_report,
    })
}
