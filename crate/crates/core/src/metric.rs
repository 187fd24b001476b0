//! Riemannian metrics on single coordinate charts: registry of built-in
//! charts, Christoffel symbols, Riemann/sectional/Ricci curvature and
//! geodesic-ball measures. All derivatives come from jet arithmetic; a
//! Richardson-extrapolated finite-difference oracle is provided for
//! cross-checks.

use crate::error::{GeomError, Result};
use crate::jet::Jet;
use crate::linalg::jet_mat_inverse;
use crate::quad::adaptive_simpson;
use nalgebra::DMatrix;
use std::sync::Arc;

pub type JetFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;
pub type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;

/// Margin keeping Poincare-ball evaluations away from the chart boundary.
pub const POINCARE_MARGIN: f64 = 1e-3;

/// A smooth Riemannian metric on one coordinate chart.
///
/// `eval` maps seeded coordinate jets to the `dim x dim` component matrix
/// (row major); evaluating with order-k jets yields all component
/// derivatives up to order k in one pass.
#[derive(Clone)]
pub struct MetricField {
    name: String,
    dim: usize,
    derivative_order: usize,
    closed_manifold: bool,
    rotationally_symmetric: bool,
    flat: bool,
    eval_fn: JetFn,
    christoffel_fn: Option<JetFn>,
    domain_fn: DomainFn,
}

impl std::fmt::Debug for MetricField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MetricField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish()
    }
}

/// Check coordinates are finite and of the chart's dimension.
pub fn check_point(p: &[f64], dim: usize) -> Result<()> {
    if p.len() != dim {
        return Err(GeomError::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    if p.iter().any(|x| !x.is_finite()) {
        return Err(GeomError::NonFinitePoint(p.to_vec()));
    }
    Ok(())
}

/// Christoffel symbols, all-index-lowered Riemann tensor, sectional
/// curvature and Ricci tensor at one point.
pub struct CurvatureData {
    pub dim: usize,
    pub metric: DMatrix<f64>,
    /// Gamma^k_{ij} indexed [k][i][j].
    pub christoffel: Vec<f64>,
    /// R_{ijkl}, with the sign convention making R(u,v,u,v) the sectional numerator.
    pub riemann: Vec<f64>,
    pub ricci: DMatrix<f64>,
}

impl CurvatureData {
    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> f64 {
        let d = self.dim;
        self.christoffel[(k * d + i) * d + j]
    }

    #[inline]
    pub fn riem(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let d = self.dim;
        self.riemann[((i * d + j) * d + k) * d + l]
    }

    /// R(u, v, w, z) on coordinate components.
    pub fn riemann_apply(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..d {
                if v[j] == 0.0 {
                    continue;
                }
                for k in 0..d {
                    for l in 0..d {
                        s += self.riem(i, j, k, l) * u[i] * v[j] * w[k] * z[l];
                    }
                }
            }
        }
        s
    }

    /// Sectional curvature of the plane spanned by `u`, `v`.
    pub fn sectional(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let d = self.dim;
        assert_eq!(u.len(), d);
        assert_eq!(v.len(), d);
        let ip = |a: &[f64], b: &[f64]| -> f64 {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += self.metric[(i, j)] * a[i] * b[j];
                }
            }
            s
        };
        let uu = ip(u, u);
        let vv = ip(v, v);
        let uv = ip(u, v);
        let gram = uu * vv - uv * uv;
        if gram <= 1e-12 * (uu * vv).max(1e-300) {
            return Err(GeomError::DegeneratePlane);
        }
        Ok(self.riemann_apply(u, v, u, v) / gram)
    }

    pub fn ricci_apply(&self, u: &[f64], v: &[f64]) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += self.ricci[(i, j)] * u[i] * v[j];
            }
        }
        s
    }
}

/// Geodesic-ball volume and boundary area with a quadrature error bound.
#[derive(Clone, Copy, Debug)]
pub struct BallMeasures {
    pub volume: f64,
    pub boundary_area: f64,
    pub quadrature_error: f64,
}

impl MetricField {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        derivative_order: usize,
        eval_fn: JetFn,
        domain_fn: DomainFn,
    ) -> Self {
        MetricField {
            name: name.into(),
            dim,
            derivative_order,
            closed_manifold: false,
            rotationally_symmetric: false,
            flat: false,
            eval_fn,
            christoffel_fn: None,
            domain_fn,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Highest derivative order the field supplies exactly.
    pub fn derivative_order(&self) -> usize {
        self.derivative_order
    }

    pub fn is_closed_manifold(&self) -> bool {
        self.closed_manifold
    }

    pub fn is_rotationally_symmetric(&self) -> bool {
        self.rotationally_symmetric
    }

    pub fn is_flat(&self) -> bool {
        self.flat
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.dim && p.iter().all(|x| x.is_finite()) && (self.domain_fn)(p)
    }

    fn check_domain(&self, p: &[f64]) -> Result<()> {
        check_point(p, self.dim)?;
        if !(self.domain_fn)(p) {
            return Err(GeomError::OutOfDomain {
                chart: self.name.clone(),
                point: p.to_vec(),
            });
        }
        Ok(())
    }

    /// Metric components as jets; the closure composes with whatever jets
    /// are passed in, so chart points and mapped points both work.
    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.eval_fn)(x)
    }

    /// Extra seed order consumed by derived fields (induced metrics lose one
    /// derivative order to the jacobian of the defining map).
    fn order_loss(&self) -> usize {
        3usize.saturating_sub(self.derivative_order)
    }

    pub fn eval(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        let jets = Jet::seed(p, self.order_loss());
        let vals = self.eval_jets(&jets);
        Ok(DMatrix::from_fn(self.dim, self.dim, |i, j| {
            vals[i * self.dim + j].value()
        }))
    }

    /// Christoffel symbols Gamma^k_{ij} as jets.
    ///
    /// Uses the chart's closed form when available; otherwise differentiates
    /// the metric jets directly, which is valid only when `x` are seeded
    /// chart variables (not composed through another map).
    pub fn christoffel_jets(&self, x: &[Jet]) -> Vec<Jet> {
        if let Some(cf) = &self.christoffel_fn {
            return cf(x);
        }
        let d = self.dim;
        let g = self.eval_jets(x);
        let ginv = jet_mat_inverse(&g, d).expect("metric must be invertible");
        christoffel_from_metric_jets(&g, &ginv, d)
    }

    /// Whether a closed-form Christoffel evaluation is attached, making the
    /// symbols composable through another map's jets.
    pub fn has_closed_christoffel(&self) -> bool {
        self.christoffel_fn.is_some()
    }

    /// Gamma^k_{ij} values at a chart point, indexed [k][i][j].
    pub fn christoffel(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(p)?;
        let order = if self.christoffel_fn.is_some() {
            0
        } else {
            1 + self.order_loss()
        };
        let jets = Jet::seed(p, order);
        let gam = self.christoffel_jets(&jets);
        Ok(gam.iter().map(|j| j.value()).collect())
    }

    /// Full curvature data at a chart point.
    pub fn curvature(&self, p: &[f64]) -> Result<CurvatureData> {
        self.check_domain(p)?;
        let d = self.dim;
        let jets = Jet::seed(p, (2 + self.order_loss()).min(3));
        let g = self.eval_jets(&jets);
        let ginv = jet_mat_inverse(&g, d)?;
        let gamma = christoffel_from_metric_jets(&g, &ginv, d);

        // R^i_{jkl} = d_k Gamma^i_{lj} - d_l Gamma^i_{kj}
        //           + Gamma^i_{km} Gamma^m_{lj} - Gamma^i_{lm} Gamma^m_{kj}
        let gam = |k: usize, i: usize, j: usize| -> &Jet { &gamma[(k * d + i) * d + j] };
        let mut riemann_up = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut val = gam(i, l, j).grad(k) - gam(i, k, j).grad(l);
                        for m in 0..d {
                            val += gam(i, k, m).value() * gam(m, l, j).value()
                                - gam(i, l, m).value() * gam(m, k, j).value();
                        }
                        riemann_up[((i * d + j) * d + k) * d + l] = val;
                    }
                }
            }
        }
        let gval = DMatrix::from_fn(d, d, |i, j| g[i * d + j].value());
        let mut riemann = vec![0.0; d * d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    for l in 0..d {
                        let mut s = 0.0;
                        for a in 0..d {
                            s += gval[(i, a)] * riemann_up[((a * d + j) * d + k) * d + l];
                        }
                        riemann[((i * d + j) * d + k) * d + l] = s;
                    }
                }
            }
        }
        let mut ricci = DMatrix::<f64>::zeros(d, d);
        for j in 0..d {
            for l in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    s += riemann_up[((a * d + j) * d + a) * d + l];
                }
                ricci[(j, l)] = s;
            }
        }
        Ok(CurvatureData {
            dim: d,
            metric: gval,
            christoffel: gamma.iter().map(|j| j.value()).collect(),
            riemann,
            ricci,
        })
    }

    /// Residual of metric compatibility nabla g = 0 reassembled from the
    /// computed Christoffel symbols; a self-test of the derivative path.
    pub fn compatibility_residual(&self, p: &[f64]) -> Result<f64> {
        self.check_domain(p)?;
        let d = self.dim;
        let jets = Jet::seed(p, 1 + self.order_loss());
        let g = self.eval_jets(&jets);
        let gamma = self.christoffel(p)?;
        let gam = |k: usize, i: usize, j: usize| gamma[(k * d + i) * d + j];
        let mut worst: f64 = 0.0;
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut r = g[i * d + j].grad(k);
                    for l in 0..d {
                        r -= gam(l, k, i) * g[l * d + j].value() + gam(l, k, j) * g[i * d + l].value();
                    }
                    worst = worst.max(r.abs());
                }
            }
        }
        Ok(worst)
    }

    fn radial_profile(&self, t: f64) -> (f64, f64) {
        // metric sampled on the first coordinate axis: (radial, tangential)
        let mut p = vec![0.0; self.dim];
        p[0] = t;
        let jets = Jet::seed(&p, 0);
        let g = self.eval_jets(&jets);
        let radial = g[0].value();
        let tangential = if self.dim >= 2 {
            g[self.dim + 1].value()
        } else {
            1.0
        };
        (radial, tangential)
    }

    fn max_coordinate_radius(&self) -> f64 {
        // largest axis coordinate still inside the chart
        let mut lo = 0.0;
        let mut hi = 1.0;
        let on_axis = |t: f64| -> bool {
            let mut p = vec![0.0; self.dim];
            p[0] = t;
            (self.domain_fn)(&p)
        };
        if on_axis(hi) {
            while on_axis(hi) && hi < 1e12 {
                hi *= 2.0;
            }
            if hi >= 1e12 {
                return f64::INFINITY;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if on_axis(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Volume and boundary area of the geodesic ball of radius `radius`.
    ///
    /// Only valid on rotationally symmetric charts, where geodesic balls
    /// about the symmetry center are coordinate balls. `resolution` sets the
    /// minimum quadrature panel count.
    pub fn geodesic_ball_measures(
        &self,
        center: &[f64],
        radius: f64,
        resolution: usize,
    ) -> Result<BallMeasures> {
        self.check_domain(center)?;
        if radius <= 0.0 {
            return Err(GeomError::InvalidParameter(
                "ball radius must be positive".into(),
            ));
        }
        if !self.rotationally_symmetric {
            return Err(GeomError::InvalidParameter(format!(
                "`{}` is not registered as rotationally symmetric",
                self.name
            )));
        }
        let centered = center.iter().all(|&c| c == 0.0);
        if !centered && !self.flat {
            return Err(GeomError::InvalidParameter(
                "geodesic balls are only coordinate balls about the chart origin".into(),
            ));
        }
        let m = self.dim;
        // coordinate radius rho with geodesic radius(rho) = radius; closed
        // forms for the registry charts, bisection otherwise
        let rho = match self.name.as_str() {
            "euclidean" | "flat_torus" | "line" | "circle" => radius,
            "poincare_ball" => (radius / 2.0).tanh(),
            "sphere_stereo" => (radius / 2.0).tan(),
            _ => {
                let geo = |rho: f64| -> Result<f64> {
                    let (v, _) = adaptive_simpson(
                        |t| self.radial_profile(t).0.sqrt(),
                        0.0,
                        rho,
                        1e-12,
                        resolution.max(4),
                    )?;
                    Ok(v)
                };
                let rho_max = self.max_coordinate_radius();
                let mut hi = if rho_max.is_finite() {
                    rho_max * (1.0 - 1e-12)
                } else {
                    1.0
                };
                if !rho_max.is_finite() {
                    while geo(hi)? < radius {
                        hi *= 2.0;
                        if hi > 1e9 {
                            return Err(GeomError::Quadrature("radius out of reach".into()));
                        }
                    }
                } else if geo(hi)? < radius {
                    return Err(GeomError::OutOfDomain {
                        chart: self.name.clone(),
                        point: vec![radius],
                    });
                }
                let mut lo = 0.0;
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if geo(mid)? < radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            }
        };
        if radius <= 0.0 || !rho.is_finite() || (m > 0 && !self.contains(&{
            let mut p = vec![0.0; m];
            p[0] = rho;
            p
        })) {
            return Err(GeomError::OutOfDomain {
                chart: self.name.clone(),
                point: vec![radius],
            });
        }

        let omega = unit_sphere_area(m);
        let (rad_b, tan_b) = self.radial_profile(rho);
        let boundary_area = if m == 1 {
            2.0
        } else {
            omega * rho.powi(m as i32 - 1) * tan_b.powf(0.5 * (m - 1) as f64)
        };
        let integrand = |t: f64| -> f64 {
            let (b, a) = self.radial_profile(t);
            let tang = if m == 1 {
                1.0
            } else {
                a.powf(0.5 * (m - 1) as f64) * t.powi(m as i32 - 1)
            };
            b.sqrt() * tang
        };
        let (vol, err) = adaptive_simpson(integrand, 0.0, rho, 1e-12, resolution.max(8))?;
        let volume = omega * vol;
        let _ = rad_b;
        Ok(BallMeasures {
            volume,
            boundary_area,
            quadrature_error: err * omega,
        })
    }
}

/// Area of the unit (m-1)-sphere in R^m; by convention 2 when m = 1.
pub fn unit_sphere_area(m: usize) -> f64 {
    match m {
        1 => 2.0,
        2 => 2.0 * std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI,
        _ => {
            // omega_{m-1} = 2 pi / (m - 2) * omega_{m-3}
            2.0 * std::f64::consts::PI / (m as f64 - 2.0) * unit_sphere_area(m - 2)
        }
    }
}

/// Gamma^k_{ij} jets from metric jets (one derivative order is consumed).
pub fn christoffel_from_metric_jets(g: &[Jet], ginv: &[Jet], d: usize) -> Vec<Jet> {
    let dim = g[0].dim();
    let order = g.iter().map(|j| j.order()).min().unwrap();
    assert!(order >= 1, "christoffel symbols need metric derivatives");
    let mut out = Vec::with_capacity(d * d * d);
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                let mut s = Jet::constant(dim, order - 1, 0.0);
                for l in 0..d {
                    let term = g[l * d + j].demote(i) + g[l * d + i].demote(j) - g[i * d + j].demote(l);
                    s = s + ginv[k * d + l].truncate(order - 1) * term;
                }
                out.push(s.scale(0.5));
            }
        }
    }
    out
}

fn conformal_metric(
    // phi(s) with s = |x|^2 such that g = e^{2 phi} delta, plus dphi/ds closed form
    phi_of_s: impl Fn(&Jet) -> Jet + Send + Sync + Copy + 'static,
    dphi_ds: impl Fn(&Jet) -> Jet + Send + Sync + Copy + 'static,
) -> (JetFn, JetFn) {
    let eval: JetFn = Arc::new(move |x: &[Jet]| {
        let d = x.len();
        let s = crate::jet::norm_sq(x);
        let factor = phi_of_s(&s).scale(2.0).exp();
        let dimj = x[0].dim();
        let order = x.iter().map(|j| j.order()).min().unwrap();
        let zero = Jet::constant(dimj, order, 0.0);
        let mut out = vec![zero; d * d];
        for i in 0..d {
            out[i * d + i] = factor.clone();
        }
        out
    });
    // Gamma^k_{ij} = delta_ki dphi_j + delta_kj dphi_i - delta_ij dphi_k,
    // dphi_i = 2 x_i phi'(s)
    let christoffel: JetFn = Arc::new(move |x: &[Jet]| {
        let d = x.len();
        let s = crate::jet::norm_sq(x);
        let dp = dphi_ds(&s);
        let dphi: Vec<Jet> = (0..d).map(|i| (&x[i] * &dp).scale(2.0)).collect();
        let dimj = x[0].dim();
        let order = dphi[0].order();
        let mut out = Vec::with_capacity(d * d * d);
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    let mut t = Jet::constant(dimj, order, 0.0);
                    if k == i {
                        t = t + &dphi[j];
                    }
                    if k == j {
                        t = t + &dphi[i];
                    }
                    if i == j {
                        t = t - &dphi[k];
                    }
                    out.push(t);
                }
            }
        }
        out
    });
    (eval, christoffel)
}

fn flat_eval(dim: usize) -> JetFn {
    Arc::new(move |x: &[Jet]| {
        let d = dim;
        let dimj = x[0].dim();
        let order = x.iter().map(|j| j.order()).min().unwrap();
        let mut out = vec![Jet::constant(dimj, order, 0.0); d * d];
        for i in 0..d {
            out[i * d + i] = Jet::constant(dimj, order, 1.0);
        }
        out
    })
}

fn flat_christoffel(dim: usize) -> JetFn {
    Arc::new(move |x: &[Jet]| {
        let dimj = x[0].dim();
        let order = x.iter().map(|j| j.order()).min().unwrap();
        vec![Jet::constant(dimj, order, 0.0); dim * dim * dim]
    })
}

/// Names accepted by [`metric_by_name`], in registry order.
pub const METRIC_NAMES: [&str; 6] = [
    "euclidean",
    "poincare_ball",
    "sphere_stereo",
    "flat_torus",
    "circle",
    "line",
];

/// Build a registered metric. `dim` is the chart dimension.
pub fn metric_by_name(name: &str, dim: usize) -> Result<MetricField> {
    if dim == 0 {
        return Err(GeomError::InvalidParameter("dimension must be >= 1".into()));
    }
    match name {
        "euclidean" => {
            let mut m = MetricField::new(
                "euclidean",
                dim,
                3,
                flat_eval(dim),
                Arc::new(|_| true),
            );
            m.christoffel_fn = Some(flat_christoffel(dim));
            m.rotationally_symmetric = true;
            m.flat = true;
            Ok(m)
        }
        "line" => {
            if dim != 1 {
                return Err(GeomError::InvalidParameter("`line` is one-dimensional".into()));
            }
            let mut m = metric_by_name("euclidean", 1)?;
            m.name = "line".into();
            Ok(m)
        }
        "flat_torus" => {
            let mut m = MetricField::new(
                "flat_torus",
                dim,
                3,
                flat_eval(dim),
                Arc::new(|_| true),
            );
            m.christoffel_fn = Some(flat_christoffel(dim));
            m.rotationally_symmetric = true;
            m.flat = true;
            m.closed_manifold = true;
            Ok(m)
        }
        "circle" => {
            if dim != 1 {
                return Err(GeomError::InvalidParameter("`circle` is one-dimensional".into()));
            }
            let mut m = metric_by_name("flat_torus", 1)?;
            m.name = "circle".into();
            Ok(m)
        }
        "poincare_ball" => {
            // g = (2 / (1 - |x|^2))^2 delta, so phi = ln 2 - ln(1 - s)
            let (eval, gamma) = conformal_metric(
                |s| (1.0 - s).ln().scale(-1.0) + std::f64::consts::LN_2,
                |s| (1.0 - s).recip(),
            );
            let mut m = MetricField::new(
                "poincare_ball",
                dim,
                3,
                eval,
                Arc::new(|p: &[f64]| {
                    p.iter().map(|x| x * x).sum::<f64>() < (1.0 - POINCARE_MARGIN).powi(2)
                }),
            );
            m.christoffel_fn = Some(gamma);
            m.rotationally_symmetric = true;
            Ok(m)
        }
        "sphere_stereo" => {
            // g = (2 / (1 + |x|^2))^2 delta; chart excludes a cap around the
            // antipode, |x| < 100 keeps evaluations well conditioned
            let (eval, gamma) = conformal_metric(
                |s| (s + 1.0).ln().scale(-1.0) + std::f64::consts::LN_2,
                |s| (s + 1.0).recip().scale(-1.0),
            );
            let mut m = MetricField::new(
                "sphere_stereo",
                dim,
                3,
                eval,
                Arc::new(|p: &[f64]| p.iter().map(|x| x * x).sum::<f64>() < 1.0e4),
            );
            m.christoffel_fn = Some(gamma);
            m.rotationally_symmetric = true;
            Ok(m)
        }
        other => Err(GeomError::UnknownName(other.into())),
    }
}

/// Central finite difference of metric components along coordinate `k`, with
/// one Richardson extrapolation level. The oracle for jet derivatives.
pub fn fd_metric_derivative(metric: &MetricField, p: &[f64], k: usize, h: f64) -> Vec<f64> {
    let d = metric.dim();
    let loss = 3usize.saturating_sub(metric.derivative_order());
    let diff = |step: f64| -> Vec<f64> {
        let mut pp = p.to_vec();
        let mut pm = p.to_vec();
        pp[k] += step;
        pm[k] -= step;
        let gp = metric.eval_jets(&Jet::seed(&pp, loss));
        let gm = metric.eval_jets(&Jet::seed(&pm, loss));
        (0..d * d)
            .map(|i| (gp[i].value() - gm[i].value()) / (2.0 * step))
            .collect()
    };
    let d1 = diff(h);
    let d2 = diff(0.5 * h);
    (0..d * d).map(|i| (4.0 * d2[i] - d1[i]) / 3.0).collect()
}
