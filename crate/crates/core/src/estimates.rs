//! Isoperimetric estimates on geodesic balls: the mean-curvature bound for
//! one-dimensional targets (trace convention) and witness upper bounds for
//! the Cheeger constant.

use crate::error::{GeomError, Result};
use crate::extrinsic::second_fundamental;
use crate::graph::{GraphMap, ProductMetric};
use crate::metric::MetricField;
use crate::sampling::halton_ball;
use serde::Serialize;

/// Measures of a geodesic ball domain for the estimate reports.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DomainMeasures {
    /// Geodesic radius of the ball about the chart origin.
    pub radius: f64,
    /// Boundary area under g_1.
    pub boundary_area: f64,
    /// Volume under g_1.
    pub volume: f64,
    /// sup over the ball of |grad f|_1 (zero when no graph is involved).
    pub sup_gradient: f64,
    /// Witness upper bound for the Cheeger constant of the ball.
    pub cheeger_witness: f64,
}

/// Outcome of the mean-curvature estimate on a ball: in trace convention,
/// `inf_D |<H,nu>| <= b_D / sqrt(1 - b_D^2) * A_1(dD) / V_1(D)`.
#[derive(Clone, Debug, Serialize)]
pub struct Prop9Report {
    pub lhs_inf_mean: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub samples: usize,
    pub measures: DomainMeasures,
}

/// Dense-sampling estimate of the mean-curvature bound on the geodesic ball
/// of the given radius about the chart origin. The target must be a line.
pub fn prop9_check(
    product: &ProductMetric,
    f: &GraphMap,
    radius: f64,
    samples: usize,
) -> Result<Prop9Report> {
    if product.n() != 1 {
        return Err(GeomError::InvalidParameter(
            "the mean-curvature estimate needs a one-dimensional target".into(),
        ));
    }
    let m = product.m();
    let sigma1 = &product.sigma1;
    let center = vec![0.0; m];
    let ball = sigma1.geodesic_ball_measures(&center, radius, 32)?;

    // coordinate radius of the ball for sampling; the gradient supremum is
    // attained on the closure, so boundary-shell samples join the interior
    // Halton set
    let rho = coordinate_radius(sigma1, radius)?;
    let mut pts = halton_ball(m, rho, samples.max(8));
    let shell = crate::sampling::seeded_directions(m, (samples / 4).max(16), 71);
    for dir in shell {
        pts.push(dir.iter().map(|&u| u * rho).collect());
    }
    let mut inf_mean = f64::INFINITY;
    let mut sup_grad: f64 = 0.0;
    for p in pts.iter() {
        let e = second_fundamental(product, f, p)?;
        inf_mean = inf_mean.min(e.scalar_mean.expect("n = 1").abs());
        // |grad f|_1^2 = g1^{ij} d_i f d_j f
        let g1 = sigma1.eval(p)?;
        let jac = f.jacobian(p)?;
        let df = jac.row(0).transpose();
        let gsq = (df.transpose()
            * g1.clone().try_inverse().ok_or(GeomError::SingularMatrix)?
            * &df)[(0, 0)];
        sup_grad = sup_grad.max(gsq.max(0.0).sqrt());
    }
    // negated form also rejects NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(sup_grad < 1.0) {
        return Err(GeomError::NotSpacelike {
            lambda1_sq: sup_grad * sup_grad,
        });
    }
    let rhs = sup_grad / (1.0 - sup_grad * sup_grad).sqrt() * ball.boundary_area / ball.volume;
    let slack = rhs - inf_mean;
    let witness = cheeger_witness(sigma1, radius, 64)?;
    Ok(Prop9Report {
        lhs_inf_mean: inf_mean,
        rhs,
        slack,
        pass: slack >= -1e-9 * (1.0 + rhs.abs()),
        samples: pts.len(),
        measures: DomainMeasures {
            radius,
            boundary_area: ball.boundary_area,
            volume: ball.volume,
            sup_gradient: sup_grad,
            cheeger_witness: witness,
        },
    })
}

fn coordinate_radius(metric: &MetricField, geodesic_radius: f64) -> Result<f64> {
    match metric.name() {
        "euclidean" | "flat_torus" | "line" | "circle" => Ok(geodesic_radius),
        "poincare_ball" => Ok((geodesic_radius / 2.0).tanh()),
        _ => {
            // invert the radial distance integral by bisection
            let geo = |rho: f64| -> Result<f64> {
                let (v, _) = crate::quad::adaptive_simpson(
                    |t| {
                        let mut p = vec![0.0; metric.dim()];
                        p[0] = t;
                        let jets = crate::jet::Jet::seed(&p, 0);
                        metric.eval_jets(&jets)[0].value().sqrt()
                    },
                    0.0,
                    rho,
                    1e-12,
                    8,
                )?;
                Ok(v)
            };
            let mut lo = 0.0;
            let mut hi = 1.0;
            while geo(hi)? < geodesic_radius {
                hi *= 2.0;
                if hi > 1e6 {
                    return Err(GeomError::Quadrature("radius out of reach".into()));
                }
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if geo(mid)? < geodesic_radius {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(0.5 * (lo + hi))
        }
    }
}

/// Witness upper bound on the Cheeger constant of the geodesic ball `B_r`:
/// the minimum of `A_1(dB_s)/V_1(B_s)` over concentric balls `s <= r`. For
/// closed charts (torus, circle) the constant is zero by convention.
pub fn cheeger_witness(metric: &MetricField, r: f64, witness_count: usize) -> Result<f64> {
    if metric.is_closed_manifold() {
        return Ok(0.0);
    }
    if r <= 0.0 {
        return Err(GeomError::InvalidParameter("radius must be positive".into()));
    }
    let center = vec![0.0; metric.dim()];
    let mut best = f64::INFINITY;
    let count = witness_count.max(2);
    for k in 1..=count {
        let s = r * k as f64 / count as f64;
        let ball = metric.geodesic_ball_measures(&center, s, 16)?;
        best = best.min(ball.boundary_area / ball.volume);
    }
    Ok(best)
}
