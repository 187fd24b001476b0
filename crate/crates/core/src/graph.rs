//! Graph immersions of maps `f: Sigma_1 -> Sigma_2` into the product
//! `(Sigma_1 x Sigma_2, g_1 - g_2)`: singular values, adapted frames, the
//! hyperbolic angle, and pulled-back volume-form components.

use crate::error::{GeomError, Result};
use crate::jet::Jet;
use crate::linalg::{cholesky, jacobi_eigen_sym, solve_lower, solve_lower_t};
use crate::metric::{check_point, DomainFn, JetFn, MetricField};
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Reject graphs with largest squared singular value above `1 - SPACELIKE_TOL`;
/// beyond that the hyperbolic angle loses all precision.
pub const SPACELIKE_TOL: f64 = 1e-8;

/// Squared singular values at or below this count as rank-deficient.
const RANK_TOL: f64 = 1e-10;

/// A smooth map between charts, with derivatives supplied by jet evaluation.
#[derive(Clone)]
pub struct GraphMap {
    name: String,
    m: usize,
    n: usize,
    eval_fn: JetFn,
    domain_fn: DomainFn,
}

impl std::fmt::Debug for GraphMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GraphMap")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("n", &self.n)
            .finish()
    }
}

impl GraphMap {
    pub fn new(
        name: impl Into<String>,
        m: usize,
        n: usize,
        eval_fn: JetFn,
        domain_fn: DomainFn,
    ) -> Self {
        GraphMap {
            name: name.into(),
            m,
            n,
            eval_fn,
            domain_fn,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_dim(&self) -> usize {
        self.m
    }

    pub fn target_dim(&self) -> usize {
        self.n
    }

    pub fn contains(&self, p: &[f64]) -> bool {
        p.len() == self.m && (self.domain_fn)(p)
    }

    fn check_domain(&self, p: &[f64]) -> Result<()> {
        check_point(p, self.m)?;
        if !(self.domain_fn)(p) {
            return Err(GeomError::OutOfDomain {
                chart: format!("graph `{}`", self.name),
                point: p.to_vec(),
            });
        }
        Ok(())
    }

    pub fn eval_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.eval_fn)(x)
    }

    pub fn value(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(p)?;
        Ok(self
            .eval_jets(&Jet::seed(p, 0))
            .iter()
            .map(|j| j.value())
            .collect())
    }

    /// df as an n x m matrix.
    pub fn jacobian(&self, p: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(p)?;
        let jets = self.eval_jets(&Jet::seed(p, 1));
        Ok(DMatrix::from_fn(self.n, self.m, |a, i| jets[a].grad(i)))
    }

    /// Second partials d^2 f^a / dx^i dx^j, indexed [a][i][j].
    pub fn second_derivatives(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(p)?;
        let jets = self.eval_jets(&Jet::seed(p, 2));
        let (m, n) = (self.m, self.n);
        let mut out = vec![0.0; n * m * m];
        for a in 0..n {
            for i in 0..m {
                for j in 0..m {
                    out[(a * m + i) * m + j] = jets[a].hess(i, j);
                }
            }
        }
        Ok(out)
    }
}

/// The pseudo-Riemannian product `(Sigma_1 x Sigma_2, g_1 - g_2)`.
#[derive(Clone, Debug)]
pub struct ProductMetric {
    pub sigma1: MetricField,
    pub sigma2: MetricField,
}

impl ProductMetric {
    pub fn new(sigma1: MetricField, sigma2: MetricField) -> Self {
        ProductMetric { sigma1, sigma2 }
    }

    pub fn m(&self) -> usize {
        self.sigma1.dim()
    }

    pub fn n(&self) -> usize {
        self.sigma2.dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.m() + self.n()
    }

    pub fn is_flat(&self) -> bool {
        self.sigma1.is_flat() && self.sigma2.is_flat()
    }

    /// Block product metric [g_1, -g_2] at the product point (values).
    pub fn ambient_metric(&self, p1: &[f64], p2: &[f64]) -> Result<DMatrix<f64>> {
        let g1 = self.sigma1.eval(p1)?;
        let g2 = self.sigma2.eval(p2)?;
        let (m, n) = (self.m(), self.n());
        let mut g = DMatrix::<f64>::zeros(m + n, m + n);
        g.view_mut((0, 0), (m, m)).copy_from(&g1);
        g.view_mut((m, m), (n, n)).copy_from(&(-g2));
        Ok(g)
    }

    /// Ambient metric component jets at `(x, y)` given coordinate jets.
    pub fn ambient_metric_jets(&self, x: &[Jet], y: &[Jet]) -> Vec<Jet> {
        let (m, n) = (self.m(), self.n());
        let dim = x[0].dim();
        let order = x
            .iter()
            .chain(y.iter())
            .map(|j| j.order())
            .min()
            .unwrap();
        let g1 = self.sigma1.eval_jets(x);
        let g2 = self.sigma2.eval_jets(y);
        let d = m + n;
        let mut out = vec![Jet::constant(dim, order, 0.0); d * d];
        for i in 0..m {
            for j in 0..m {
                out[i * d + j] = g1[i * m + j].truncate(order.min(g1[i * m + j].order()));
            }
        }
        for a in 0..n {
            for b in 0..n {
                out[(m + a) * d + (m + b)] =
                    g2[a * n + b].scale(-1.0).truncate(order.min(g2[a * n + b].order()));
            }
        }
        out
    }

    /// Ambient Christoffel symbols at `(x, y)` as jets, indexed [A][B][C]
    /// over the m+n product coordinates. Block diagonal: the factor symbols.
    ///
    /// Requires closed-form Christoffel evaluations on any curved factor so
    /// the symbols compose through mapped (non-seed) jets.
    pub fn ambient_christoffel_jets(&self, x: &[Jet], y: &[Jet]) -> Result<Vec<Jet>> {
        let (m, n) = (self.m(), self.n());
        if !self.sigma2.is_flat() && !self.sigma2.has_closed_christoffel() {
            return Err(GeomError::InvalidParameter(format!(
                "metric `{}` lacks a composable Christoffel form",
                self.sigma2.name()
            )));
        }
        let g1c = self.sigma1.christoffel_jets(x);
        let g2c = self.sigma2.christoffel_jets(y);
        let dim = x[0].dim();
        let order = g1c
            .iter()
            .chain(g2c.iter())
            .map(|j| j.order())
            .min()
            .unwrap();
        let d = m + n;
        let mut out = vec![Jet::constant(dim, order, 0.0); d * d * d];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    out[(k * d + i) * d + j] = g1c[(k * m + i) * m + j].truncate(order);
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    out[((m + k) * d + (m + i)) * d + (m + j)] =
                        g2c[(k * n + i) * n + j].truncate(order);
                }
            }
        }
        Ok(out)
    }
}

/// Per-point frame data of a spacelike graph: singular values, adapted
/// tangent/normal frames, hyperbolic angle and pulled-back volume components.
#[derive(Clone, Debug)]
pub struct SpacelikeFrameData {
    pub point: Vec<f64>,
    pub f_point: Vec<f64>,
    /// Singular values of df, descending, rank-truncated to exact zeros.
    pub lambdas: Vec<f64>,
    pub rank: usize,
    /// g_1-orthonormal eigenvectors of f* g_2 (chart components).
    pub a_tangent: Vec<DVector<f64>>,
    /// g_2-orthonormal basis with the first `rank` vectors aligned to df(a_i).
    pub a_normal: Vec<DVector<f64>>,
    /// Orthonormal tangent frame of the graph, ambient components.
    pub e_tangent: Vec<DVector<f64>>,
    /// Orthonormal timelike normal frame, ambient components.
    pub e_normal: Vec<DVector<f64>>,
    pub cosh_theta: f64,
    /// delta(p) = 1 - lambda_1^2.
    pub delta: f64,
    /// Omega_{1..m}: the volume form on the tangent frame.
    pub vol_top: f64,
    /// Omega_{alpha i}, indexed [alpha][i] with alpha over the normal frame.
    pub vol_normal: Vec<f64>,
    /// Omega_{alpha beta i j}, indexed ((alpha * n + beta) * m + i) * m + j.
    pub vol_double: Vec<f64>,
    pub g1: DMatrix<f64>,
    pub g2: DMatrix<f64>,
    pub induced: DMatrix<f64>,
    pub sqrt_det_g1: f64,
}

impl SpacelikeFrameData {
    pub fn m(&self) -> usize {
        self.a_tangent.len()
    }

    pub fn n(&self) -> usize {
        self.a_normal.len()
    }

    #[inline]
    pub fn vol_alpha_i(&self, alpha: usize, i: usize) -> f64 {
        self.vol_normal[alpha * self.m() + i]
    }

    #[inline]
    pub fn vol_alpha_beta_ij(&self, alpha: usize, beta: usize, i: usize, j: usize) -> f64 {
        let (m, n) = (self.m(), self.n());
        self.vol_double[((alpha * n + beta) * m + i) * m + j]
    }

    /// Tangent frame vector expressed in graph coordinates (the Sigma_1
    /// chart), i.e. the pi_1 projection of `e_tangent[i]`.
    pub fn e_tangent_chart(&self, i: usize) -> DVector<f64> {
        let m = self.m();
        DVector::from_fn(m, |k, _| self.e_tangent[i][k])
    }

    /// Ambient inner product g_1 - g_2 between ambient component vectors.
    pub fn ambient_inner(&self, u: &DVector<f64>, v: &DVector<f64>) -> f64 {
        let (m, n) = (self.m(), self.n());
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += self.g1[(i, j)] * u[i] * v[j];
            }
        }
        for a in 0..n {
            for b in 0..n {
                s -= self.g2[(a, b)] * u[m + a] * v[m + b];
            }
        }
        s
    }

    /// Worst deviation of the adapted frames from pseudo-orthonormality.
    pub fn frame_deviation(&self) -> f64 {
        let (m, n) = (self.m(), self.n());
        let mut worst: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst
                    .max((self.ambient_inner(&self.e_tangent[i], &self.e_tangent[j]) - want).abs());
            }
            for b in 0..n {
                worst =
                    worst.max(self.ambient_inner(&self.e_tangent[i], &self.e_normal[b]).abs());
            }
        }
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { -1.0 } else { 0.0 };
                worst = worst
                    .max((self.ambient_inner(&self.e_normal[a], &self.e_normal[b]) - want).abs());
            }
        }
        worst
    }
}

/// Hyperbolic-angle scalar `1 / sqrt(det_{g1}(g1 - f* g2))` as a jet; the
/// direct differentiation path used by the identity checks.
pub fn cosh_theta_jet(product: &ProductMetric, f: &GraphMap, x: &[Jet]) -> Jet {
    let induced = induced_metric_jets(product, f, x);
    let g1 = product.sigma1.eval_jets(x);
    let m = product.m();
    let det_g = crate::linalg::jet_mat_det(&induced, m);
    let det_g1 = crate::linalg::jet_mat_det(&g1, m);
    (det_g1 / det_g).sqrt()
}

/// Induced metric components `g1 - f* g2` as jets (one order below input).
pub fn induced_metric_jets(product: &ProductMetric, f: &GraphMap, x: &[Jet]) -> Vec<Jet> {
    let m = product.m();
    let n = product.n();
    let fj = f.eval_jets(x);
    let g1 = product.sigma1.eval_jets(x);
    let g2 = product.sigma2.eval_jets(&fj);
    // jacobian entries, one order down
    let jac: Vec<Jet> = (0..n * m)
        .map(|idx| fj[idx / m].demote(idx % m))
        .collect();
    let order = jac[0].order();
    let dim = x[0].dim();
    let mut out = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            let mut s = g1[i * m + j].truncate(order.min(g1[i * m + j].order()));
            for a in 0..n {
                for b in 0..n {
                    let term = &jac[a * m + i] * &jac[b * m + j] * &g2[a * n + b];
                    s = s - term;
                }
            }
            let _ = dim;
            out.push(s);
        }
    }
    out
}

/// The induced metric of the graph as a standalone metric field on the
/// Sigma_1 chart (derivative order 2: one order goes into df).
pub fn induced_metric_field(product: &ProductMetric, f: &GraphMap) -> MetricField {
    let prod = product.clone();
    let map = f.clone();
    let dom_prod = product.clone();
    let dom_map = f.clone();
    MetricField::new(
        format!("induced({})", f.name()),
        product.m(),
        2,
        Arc::new(move |x: &[Jet]| induced_metric_jets(&prod, &map, x)),
        Arc::new(move |p: &[f64]| {
            dom_map.contains(p)
                && dom_prod.sigma1.contains(p)
                && dom_map
                    .value(p)
                    .map(|fp| dom_prod.sigma2.contains(&fp))
                    .unwrap_or(false)
        }),
    )
}

/// Build the adapted frames, singular values and hyperbolic angle at `p`.
pub fn analyze_graph_point(
    product: &ProductMetric,
    f: &GraphMap,
    p: &[f64],
) -> Result<SpacelikeFrameData> {
    let m = product.m();
    let n = product.n();
    if f.domain_dim() != m || f.target_dim() != n {
        return Err(GeomError::DimensionMismatch {
            expected: m,
            got: f.domain_dim(),
        });
    }
    check_point(p, m)?;
    if !f.contains(p) || !product.sigma1.contains(p) {
        return Err(GeomError::OutOfDomain {
            chart: product.sigma1.name().to_string(),
            point: p.to_vec(),
        });
    }
    let fp = f.value(p)?;
    if !product.sigma2.contains(&fp) {
        return Err(GeomError::OutOfDomain {
            chart: product.sigma2.name().to_string(),
            point: fp,
        });
    }

    let g1 = product.sigma1.eval(p)?;
    let g2 = product.sigma2.eval(&fp)?;
    let jac = f.jacobian(p)?;
    // pull-back f* g2 in chart coordinates
    let pullback = jac.transpose() * &g2 * &jac;

    // eigen-decompose relative to g1 through the Cholesky factor
    let l1 = cholesky(&g1)?;
    let mut c = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        let col = solve_lower(&l1, &pullback.column(j).clone_owned());
        c.set_column(j, &col);
    }
    let mut sym = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        let row = solve_lower(&l1, &c.row(i).transpose());
        sym.set_row(i, &row.transpose());
    }
    let sym = (&sym + sym.transpose()) * 0.5;
    let (mus, y) = jacobi_eigen_sym(&sym);

    if mus[0] > 1.0 - SPACELIKE_TOL {
        return Err(GeomError::NotSpacelike { lambda1_sq: mus[0] });
    }

    let rank = mus.iter().filter(|&&mu| mu > RANK_TOL).count();
    let mut lambdas: Vec<f64> = mus
        .iter()
        .enumerate()
        .map(|(i, &mu)| if i < rank { mu.max(0.0).sqrt() } else { 0.0 })
        .collect();

    let mut a_tangent: Vec<DVector<f64>> = (0..m)
        .map(|j| solve_lower_t(&l1, &y.column(j).clone_owned()))
        .collect();

    // positively oriented tangent eigenbasis
    let amat = DMatrix::from_fn(m, m, |r, c| a_tangent[c][r]);
    if amat.determinant() < 0.0 {
        a_tangent[m - 1].neg_mut();
    }

    // normal-side frame: images of the tangent eigenvectors, then a
    // Gram-Schmidt completion from the coordinate basis in index order
    let mut a_normal: Vec<DVector<f64>> = Vec::with_capacity(n);
    for i in 0..rank.min(n) {
        let b = &jac * &a_tangent[i];
        a_normal.push(b / lambdas[i]);
    }
    // polish the aligned block to exact g2-orthonormality
    gram_schmidt_g(&mut a_normal, &g2, 0);
    let start = a_normal.len();
    for k in 0..n {
        if a_normal.len() == n {
            break;
        }
        let mut cand = DVector::<f64>::zeros(n);
        cand[k] = 1.0;
        a_normal.push(cand);
        let last = a_normal.len() - 1;
        let kept = gram_schmidt_g(&mut a_normal, &g2, start.min(last));
        if !kept {
            a_normal.pop();
        }
    }
    if a_normal.len() != n {
        return Err(GeomError::SingularMatrix);
    }

    let cosh_theta = 1.0
        / lambdas
            .iter()
            .map(|l| 1.0 - l * l)
            .product::<f64>()
            .sqrt();
    let delta = 1.0 - lambdas[0] * lambdas[0];

    // adapted pseudo-orthonormal frames of the ambient product
    let dtot = m + n;
    let mut e_tangent = Vec::with_capacity(m);
    for i in 0..m {
        let norm = (1.0 - lambdas[i] * lambdas[i]).sqrt();
        let mut v = DVector::<f64>::zeros(dtot);
        for k in 0..m {
            v[k] = a_tangent[i][k] / norm;
        }
        if i < rank {
            for a in 0..n {
                v[m + a] = lambdas[i] * a_normal[i][a] / norm;
            }
        }
        e_tangent.push(v);
    }
    let mut e_normal = Vec::with_capacity(n);
    for j in 0..n {
        let lam = if j < rank { lambdas[j] } else { 0.0 };
        let norm = (1.0 - lam * lam).sqrt();
        let mut v = DVector::<f64>::zeros(dtot);
        if j < rank {
            for k in 0..m {
                v[k] = lam * a_tangent[j][k] / norm;
            }
        }
        for a in 0..n {
            v[m + a] = a_normal[j][a] / norm;
        }
        e_normal.push(v);
    }

    let induced = &g1 - &pullback;
    let sqrt_det_g1 = g1.determinant().sqrt();

    let mut frame = SpacelikeFrameData {
        point: p.to_vec(),
        f_point: fp,
        lambdas: std::mem::take(&mut lambdas),
        rank,
        a_tangent,
        a_normal,
        e_tangent,
        e_normal,
        cosh_theta,
        delta,
        vol_top: 0.0,
        vol_normal: Vec::new(),
        vol_double: Vec::new(),
        g1,
        g2,
        induced,
        sqrt_det_g1,
    };
    let (top, single, double) = pullback_volume_components(&frame);
    frame.vol_top = top;
    frame.vol_normal = single;
    frame.vol_double = double;
    Ok(frame)
}

/// Orthonormalize `vecs[start..]` against everything before them in the
/// given positive-definite inner product. Returns false and leaves the last
/// vector unnormalized if it became (numerically) dependent.
fn gram_schmidt_g(vecs: &mut [DVector<f64>], g: &DMatrix<f64>, start: usize) -> bool {
    let ip = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * g * v)[(0, 0)];
    for i in start.min(vecs.len())..vecs.len() {
        // two passes for numerical safety
        for _ in 0..2 {
            for j in 0..i {
                let proj = ip(&vecs[i].clone(), &vecs[j].clone());
                let prev = vecs[j].clone();
                vecs[i] -= prev * proj;
            }
        }
        let norm = ip(&vecs[i].clone(), &vecs[i].clone()).sqrt();
        // negated form also rejects NaN
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(norm > 1e-8) {
            return false;
        }
        vecs[i] /= norm;
    }
    true
}

/// Volume-form components by direct substitution of the frame vectors into
/// the g_1 volume form pulled back through pi_1.
///
/// Returns `(Omega_{1..m}, Omega_{alpha i}, Omega_{alpha beta i j})`.
pub fn pullback_volume_components(
    frame: &SpacelikeFrameData,
) -> (f64, Vec<f64>, Vec<f64>) {
    let m = frame.m();
    let n = frame.n();
    let omega = |cols: &[&DVector<f64>]| -> f64 {
        let mat = DMatrix::from_fn(m, m, |r, c| cols[c][r]);
        frame.sqrt_det_g1 * mat.determinant()
    };
    let base: Vec<&DVector<f64>> = frame.e_tangent.iter().collect();
    let top = omega(&base);

    let mut single = vec![0.0; n * m];
    for alpha in 0..n {
        for i in 0..m {
            let mut cols = base.clone();
            cols[i] = &frame.e_normal[alpha];
            single[alpha * m + i] = omega(&cols);
        }
    }
    let mut double = vec![0.0; n * n * m * m];
    for alpha in 0..n {
        for beta in 0..n {
            if alpha == beta {
                continue;
            }
            for i in 0..m {
                for j in 0..m {
                    if i == j {
                        continue;
                    }
                    let mut cols = base.clone();
                    cols[i] = &frame.e_normal[alpha];
                    cols[j] = &frame.e_normal[beta];
                    double[((alpha * n + beta) * m + i) * m + j] = omega(&cols);
                }
            }
        }
    }
    (top, single, double)
}
