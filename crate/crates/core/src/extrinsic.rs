//! Second fundamental form, mean curvature, ambient product curvature and
//! the Gauss/Codazzi/Ricci structure-equation residuals for spacelike graphs.
//!
//! Everything is assembled in graph coordinates from jet evaluations of the
//! immersion `x -> (x, f(x))`, then expressed in the adapted frames where an
//! identity calls for frame components. Normal-bundle curvature is the one
//! place finite differences enter: two-sided differences of a projected
//! normal frame, every other derivative is exact.

use crate::error::{GeomError, Result};
use crate::graph::{
    analyze_graph_point, induced_metric_field, GraphMap, ProductMetric, SpacelikeFrameData,
};
use crate::jet::Jet;
use crate::linalg::jet_mat_inverse;
use crate::metric::CurvatureData;
use nalgebra::{DMatrix, DVector};

/// Step for the finite-difference paths (normal-bundle curvature, mean-
/// curvature derivatives for n >= 2).
pub const FD_STEP: f64 = 1e-5;

/// Extrinsic data of the graph at one point, in adapted frames.
#[derive(Clone, Debug)]
pub struct ExtrinsicData {
    pub frame: SpacelikeFrameData,
    /// h^alpha_{ij}, indexed [alpha][i][j] (alpha over the normal frame).
    pub h: Vec<f64>,
    /// H^alpha = sum_i h^alpha_{ii}.
    pub mean_components: Vec<f64>,
    /// ||H|| = sqrt(sum_alpha (H^alpha)^2), timelike-frame magnitude.
    pub mean_norm: f64,
    /// ||B||^2 = sum (h^alpha_{ij})^2.
    pub b_norm_sq: f64,
    /// hat R^alpha_{beta i j} = sum_k (h^alpha_{ik} h^beta_{jk} - h^beta_{ik} h^alpha_{jk}).
    pub commutator: Vec<f64>,
    /// Future-directed unit timelike normal, ambient components (n = 1).
    pub nu: Option<DVector<f64>>,
    /// <H, nu> in the trace convention (n = 1): the Calabi-operator value.
    pub scalar_mean: Option<f64>,
    /// Tangent projector onto T M inside the ambient product.
    pub proj_tangent: DMatrix<f64>,
    /// Normal projector (complement of the tangent one).
    pub proj_normal: DMatrix<f64>,
    /// B(T_i, T_j) on coordinate tangents, ambient components, index i*m+j.
    pub b_coord: Vec<DVector<f64>>,
    /// H as an ambient vector.
    pub mean_vector: DVector<f64>,
}

impl ExtrinsicData {
    #[inline]
    pub fn h_frame(&self, alpha: usize, i: usize, j: usize) -> f64 {
        let m = self.frame.m();
        self.h[(alpha * m + i) * m + j]
    }

    #[inline]
    pub fn commutator_at(&self, alpha: usize, beta: usize, i: usize, j: usize) -> f64 {
        let (m, n) = (self.frame.m(), self.frame.n());
        self.commutator[((alpha * n + beta) * m + i) * m + j]
    }
}

/// Jet pipeline for the graph immersion at one point.
pub(crate) struct GraphPointJets {
    pub m: usize,
    pub n: usize,
    pub x: Vec<Jet>,
    pub fj: Vec<Jet>,
    /// Coordinate tangents T_i = (delta_i, df_i), ambient jet components.
    pub tangent: Vec<Vec<Jet>>,
    /// Ambient metric components at (x, f(x)).
    pub gbar: Vec<Jet>,
    /// Ambient Christoffel symbols at (x, f(x)), indexed [A][B][C].
    pub gamma_bar: Vec<Jet>,
    pub induced_inv: Vec<Jet>,
    /// B(T_i, T_j) ambient jet components, index i*m+j.
    pub b: Vec<Vec<Jet>>,
}

impl GraphPointJets {
    pub fn compute(product: &ProductMetric, f: &GraphMap, p: &[f64], order: usize) -> Result<Self> {
        let m = product.m();
        let n = product.n();
        let d = m + n;
        let x = Jet::seed(p, order);
        let fj = f.eval_jets(&x);
        let gbar = product.ambient_metric_jets(&x, &fj);
        let gamma_bar = product.ambient_christoffel_jets(&x, &fj)?;

        let mut tangent = Vec::with_capacity(m);
        for i in 0..m {
            let mut t = Vec::with_capacity(d);
            for k in 0..m {
                t.push(Jet::constant(
                    m,
                    order.saturating_sub(1),
                    if k == i { 1.0 } else { 0.0 },
                ));
            }
            for a in 0..n {
                t.push(fj[a].demote(i));
            }
            tangent.push(t);
        }

        let mut induced = Vec::with_capacity(m * m);
        for i in 0..m {
            for j in 0..m {
                induced.push(inner_jets(&gbar, d, &tangent[i], &tangent[j]));
            }
        }
        let induced_inv = jet_mat_inverse(&induced, m)?;
        drop(induced);

        // B_ij = (dd Phi_ij + Gammabar(T_i, T_j))^perp; needs two orders
        let mut b = Vec::with_capacity(if order >= 2 { m * m } else { 0 });
        for i in 0..if order >= 2 { m } else { 0 } {
            for j in 0..m {
                let mut v: Vec<Jet> = Vec::with_capacity(d);
                let ord = order.saturating_sub(2);
                for a_idx in 0..d {
                    let second = if a_idx < m {
                        Jet::constant(m, ord, 0.0)
                    } else {
                        fj[a_idx - m].demote(i).demote(j)
                    };
                    let mut s = second;
                    for bb in 0..d {
                        for cc in 0..d {
                            let g = &gamma_bar[(a_idx * d + bb) * d + cc];
                            if g.value() == 0.0 && g.order() == 0 {
                                continue;
                            }
                            s = s + g * &tangent[i][bb] * &tangent[j][cc];
                        }
                    }
                    v.push(s);
                }
                b.push(v);
            }
        }
        let built_b = order >= 2;
        let mut me = GraphPointJets {
            m,
            n,
            x,
            fj,
            tangent,
            gbar,
            gamma_bar,
            induced_inv,
            b,
        };
        if built_b {
            for idx in 0..m * m {
                me.b[idx] = me.normal_project(&me.b[idx]);
            }
        }
        Ok(me)
    }

    pub fn ambient_dim(&self) -> usize {
        self.m + self.n
    }

    /// v - sum_{kl} T_k ginv^{kl} gbar(v, T_l), at the jet level.
    pub fn normal_project(&self, v: &[Jet]) -> Vec<Jet> {
        let d = self.ambient_dim();
        let m = self.m;
        let mut coeffs = Vec::with_capacity(m);
        for l in 0..m {
            coeffs.push(inner_jets(&self.gbar, d, v, &self.tangent[l]));
        }
        let mut out: Vec<Jet> = v.to_vec();
        for a_idx in 0..d {
            let mut corr: Option<Jet> = None;
            for k in 0..m {
                for l in 0..m {
                    let term = &self.tangent[k][a_idx] * &self.induced_inv[k * m + l] * &coeffs[l];
                    corr = Some(match corr {
                        None => term,
                        Some(c) => c + term,
                    });
                }
            }
            if let Some(c) = corr {
                out[a_idx] = &out[a_idx] - &c;
            }
        }
        out
    }

    /// Ambient covariant derivative along x^k of a jet vector field, values.
    pub fn cov_deriv_values(&self, k: usize, field: &[Jet]) -> DVector<f64> {
        let d = self.ambient_dim();
        let mut out = DVector::<f64>::zeros(d);
        for a_idx in 0..d {
            let mut s = field[a_idx].grad(k);
            for bb in 0..d {
                for cc in 0..d {
                    s += self.gamma_bar[(a_idx * d + bb) * d + cc].value()
                        * self.tangent[k][bb].value()
                        * field[cc].value();
                }
            }
            out[a_idx] = s;
        }
        out
    }

    pub fn values(v: &[Jet]) -> DVector<f64> {
        DVector::from_iterator(v.len(), v.iter().map(|j| j.value()))
    }

    /// Mean curvature vector H = g^{ij} B_ij as jets.
    pub fn mean_vector_jets(&self) -> Vec<Jet> {
        let d = self.ambient_dim();
        let m = self.m;
        let order = self.b[0][0].order().min(self.induced_inv[0].order());
        let mut out = vec![Jet::constant(m, order, 0.0); d];
        for i in 0..m {
            for j in 0..m {
                for a_idx in 0..d {
                    out[a_idx] =
                        &out[a_idx] + &(&self.induced_inv[i * m + j] * &self.b[i * m + j][a_idx]);
                }
            }
        }
        out
    }

    /// Future-directed unit normal (gradient of f, 1)/sqrt(1 - |grad f|^2)
    /// as jets; only for one-dimensional targets.
    pub fn unit_normal_jets(&self, product: &ProductMetric) -> Vec<Jet> {
        assert_eq!(self.n, 1);
        let m = self.m;
        let g1 = product.sigma1.eval_jets(&self.x);
        let g1_inv = jet_mat_inverse(&g1, m).expect("g1 invertible");
        let df: Vec<Jet> = (0..m).map(|i| self.fj[0].demote(i)).collect();
        let order = df[0].order().min(g1_inv[0].order());
        let mut grad = vec![Jet::constant(m, order, 0.0); m];
        for i in 0..m {
            for j in 0..m {
                grad[i] = &grad[i] + &(&g1_inv[i * m + j] * &df[j]);
            }
        }
        let mut norm_sq = Jet::constant(m, order, 0.0);
        for i in 0..m {
            norm_sq = norm_sq + &grad[i] * &df[i];
        }
        let w = (1.0 - norm_sq).sqrt().recip();
        let mut nu: Vec<Jet> = grad.iter().map(|g| g * &w).collect();
        nu.push(w);
        nu
    }
}

/// gbar(u, v) with all three as jets.
pub(crate) fn inner_jets(gbar: &[Jet], d: usize, u: &[Jet], v: &[Jet]) -> Jet {
    let mut s: Option<Jet> = None;
    for a in 0..d {
        for b in 0..d {
            let g = &gbar[a * d + b];
            if g.value() == 0.0 && g.order() == 0 {
                continue;
            }
            let term = g * &u[a] * &v[b];
            s = Some(match s {
                None => term,
                Some(acc) => acc + term,
            });
        }
    }
    s.unwrap()
}

/// Curvature tensors of both factors, evaluated at a product point; the
/// ambient curvature splits as R_1 on pi_1 parts minus R_2 on pi_2 parts.
pub struct AmbientCurvature {
    pub m: usize,
    pub n: usize,
    pub curv1: CurvatureData,
    pub curv2: CurvatureData,
}

impl AmbientCurvature {
    pub fn at(product: &ProductMetric, p1: &[f64], p2: &[f64]) -> Result<Self> {
        Ok(AmbientCurvature {
            m: product.m(),
            n: product.n(),
            curv1: product.sigma1.curvature(p1)?,
            curv2: product.sigma2.curvature(p2)?,
        })
    }

    /// Rbar(u, v, w, z) on ambient coordinate components.
    pub fn eval(&self, u: &[f64], v: &[f64], w: &[f64], z: &[f64]) -> Result<f64> {
        let d = self.m + self.n;
        for vec in [u, v, w, z] {
            if vec.len() != d {
                return Err(GeomError::DimensionMismatch {
                    expected: d,
                    got: vec.len(),
                });
            }
        }
        let m = self.m;
        let r1 = self
            .curv1
            .riemann_apply(&u[..m], &v[..m], &w[..m], &z[..m]);
        let r2 = self
            .curv2
            .riemann_apply(&u[m..], &v[m..], &w[m..], &z[m..]);
        Ok(r1 - r2)
    }

    /// The curvature operator applied to vectors, lowered then raised with
    /// the ambient metric: returns Rbar(w, z) v as an ambient vector.
    pub fn operator(
        &self,
        gbar: &DMatrix<f64>,
        v: &[f64],
        w: &[f64],
        z: &[f64],
    ) -> Result<DVector<f64>> {
        let d = self.m + self.n;
        let mut cov = DVector::<f64>::zeros(d);
        let mut basis = vec![0.0; d];
        for a in 0..d {
            basis[a] = 1.0;
            cov[a] = self.eval(&basis, v, w, z)?;
            basis[a] = 0.0;
        }
        let ginv = gbar
            .clone()
            .try_inverse()
            .ok_or(GeomError::SingularMatrix)?;
        Ok(ginv * cov)
    }
}

/// Ambient curvature value at a product point `p = (p1, p2)` (m + n coords).
pub fn ambient_curvature(
    product: &ProductMetric,
    p: &[f64],
    u: &[f64],
    v: &[f64],
    w: &[f64],
    z: &[f64],
) -> Result<f64> {
    let m = product.m();
    if p.len() != product.ambient_dim() {
        return Err(GeomError::DimensionMismatch {
            expected: product.ambient_dim(),
            got: p.len(),
        });
    }
    let amb = AmbientCurvature::at(product, &p[..m], &p[m..])?;
    amb.eval(u, v, w, z)
}

/// Second fundamental form, mean curvature and projectors at `p`.
pub fn second_fundamental(
    product: &ProductMetric,
    f: &GraphMap,
    p: &[f64],
) -> Result<ExtrinsicData> {
    let frame = analyze_graph_point(product, f, p)?;
    let gj = GraphPointJets::compute(product, f, p, 2)?;
    let m = gj.m;
    let n = gj.n;
    let d = m + n;

    let b_coord: Vec<DVector<f64>> = gj.b.iter().map(|v| GraphPointJets::values(v)).collect();
    let gbar = DMatrix::from_fn(d, d, |i, j| gj.gbar[i * d + j].value());
    let inner = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &gbar * v)[(0, 0)];

    // frame components: h^alpha_{ij} = -gbar(B(e_i, e_j), e_alpha)
    let mut h = vec![0.0; n * m * m];
    for i in 0..m {
        for j in 0..m {
            // B(e_i, e_j) from coordinate components of the chart parts
            let ei = frame.e_tangent_chart(i);
            let ejc = frame.e_tangent_chart(j);
            let mut bij = DVector::<f64>::zeros(d);
            for k in 0..m {
                for l in 0..m {
                    bij += &b_coord[k * m + l] * (ei[k] * ejc[l]);
                }
            }
            for alpha in 0..n {
                h[(alpha * m + i) * m + j] = -inner(&bij, &frame.e_normal[alpha]);
            }
        }
    }

    let mut mean_components = vec![0.0; n];
    for alpha in 0..n {
        for i in 0..m {
            mean_components[alpha] += h[(alpha * m + i) * m + i];
        }
    }
    let mean_norm = mean_components
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let b_norm_sq = h.iter().map(|x| x * x).sum::<f64>();

    let mut commutator = vec![0.0; n * n * m * m];
    for alpha in 0..n {
        for beta in 0..n {
            for i in 0..m {
                for j in 0..m {
                    let mut s = 0.0;
                    for k in 0..m {
                        s += h[(alpha * m + i) * m + k] * h[(beta * m + j) * m + k]
                            - h[(beta * m + i) * m + k] * h[(alpha * m + j) * m + k];
                    }
                    commutator[((alpha * n + beta) * m + i) * m + j] = s;
                }
            }
        }
    }

    // coordinate mean curvature vector
    let ginv = DMatrix::from_fn(m, m, |i, j| gj.induced_inv[i * m + j].value());
    let mut mean_vector = DVector::<f64>::zeros(d);
    for i in 0..m {
        for j in 0..m {
            mean_vector += &b_coord[i * m + j] * ginv[(i, j)];
        }
    }

    // projectors
    let tmat = DMatrix::from_fn(d, m, |a, i| gj.tangent[i][a].value());
    let proj_tangent = &tmat * ginv * tmat.transpose() * &gbar;
    let proj_normal = DMatrix::<f64>::identity(d, d) - &proj_tangent;

    let (nu, scalar_mean) = if n == 1 {
        let nuj = gj.unit_normal_jets(product);
        let nu = GraphPointJets::values(&nuj);
        let s = -inner(&mean_vector, &nu);
        (Some(nu), Some(s))
    } else {
        (None, None)
    };

    Ok(ExtrinsicData {
        frame,
        h,
        mean_components,
        mean_norm,
        b_norm_sq,
        commutator,
        nu,
        scalar_mean,
        proj_tangent,
        proj_normal,
        b_coord,
        mean_vector,
    })
}

/// Frame components H^alpha_{,i} of the normal-connection derivative of the
/// mean curvature, indexed [alpha][i].
///
/// For n = 1 these are exact directional derivatives of the scalar <H, nu>
/// (the normalized normal line bundle is flat); for n >= 2 they come from
/// two-sided finite differences of the H field, ambient-corrected and
/// normal-projected at the base point.
pub fn mean_curvature_derivatives(
    product: &ProductMetric,
    f: &GraphMap,
    extr: &ExtrinsicData,
) -> Result<Vec<f64>> {
    mean_curvature_derivatives_with_step(product, f, extr, FD_STEP)
}

/// Same as [`mean_curvature_derivatives`] with an explicit step for the
/// n >= 2 finite-difference path (used to estimate its noise).
pub fn mean_curvature_derivatives_with_step(
    product: &ProductMetric,
    f: &GraphMap,
    extr: &ExtrinsicData,
    step: f64,
) -> Result<Vec<f64>> {
    let frame = &extr.frame;
    let m = frame.m();
    let n = frame.n();
    let p = &frame.point;
    let d = m + n;
    let mut out = vec![0.0; n * m];

    if n == 1 {
        let gj = GraphPointJets::compute(product, f, p, 3)?;
        let hj = gj.mean_vector_jets();
        let nuj = gj.unit_normal_jets(product);
        // scalar <H, nu> = -gbar(H, nu) as a jet
        let s = inner_jets(&gj.gbar, d, &hj, &nuj).scale(-1.0);
        let nu = GraphPointJets::values(&nuj);
        let sigma = -frame.ambient_inner(&nu, &frame.e_normal[0]);
        for i in 0..m {
            let ei = frame.e_tangent_chart(i);
            let mut dir = 0.0;
            for k in 0..m {
                dir += ei[k] * s.grad(k);
            }
            out[i] = sigma * dir;
        }
        return Ok(out);
    }

    // n >= 2: finite differences of the H vector field along coordinate
    // curves, ambient covariant correction, projection at the base point
    let gj = GraphPointJets::compute(product, f, p, 2)?;
    let gbar = DMatrix::from_fn(d, d, |i, j| gj.gbar[i * d + j].value());
    let h_field = |x: &[f64]| -> Result<DVector<f64>> {
        let g = GraphPointJets::compute(product, f, x, 2)?;
        Ok(GraphPointJets::values(&g.mean_vector_jets()))
    };
    let mut cov_derivs = Vec::with_capacity(m);
    for k in 0..m {
        let mut pp = p.clone();
        let mut pm = p.clone();
        pp[k] += step;
        pm[k] -= step;
        let mut dh = (h_field(&pp)? - h_field(&pm)?) / (2.0 * step);
        // + Gammabar(T_k, H)
        let hval = &extr.mean_vector;
        for a_idx in 0..d {
            let mut corr = 0.0;
            for bb in 0..d {
                for cc in 0..d {
                    corr += gj.gamma_bar[(a_idx * d + bb) * d + cc].value()
                        * gj.tangent[k][bb].value()
                        * hval[cc];
                }
            }
            dh[a_idx] += corr;
        }
        // project onto the normal bundle at p
        let projected = &extr.proj_normal * dh;
        cov_derivs.push(projected);
    }
    for alpha in 0..n {
        for i in 0..m {
            let ei = frame.e_tangent_chart(i);
            let mut v = DVector::<f64>::zeros(d);
            for k in 0..m {
                v += &cov_derivs[k] * ei[k];
            }
            out[alpha * m + i] = -(v.transpose() * &gbar * &frame.e_normal[alpha])[(0, 0)];
        }
    }
    Ok(out)
}

/// Residuals of the three structure equations at `p`, each normalized by
/// `1 + max |term|`.
#[derive(Clone, Debug)]
pub struct StructureResiduals {
    pub gauss: f64,
    pub codazzi: f64,
    pub ricci: f64,
    pub warnings: Vec<String>,
}

pub fn structure_equation_residuals(
    product: &ProductMetric,
    f: &GraphMap,
    p: &[f64],
) -> Result<StructureResiduals> {
    let extr = second_fundamental(product, f, p)?;
    let frame = &extr.frame;
    let m = frame.m();
    let n = frame.n();
    let d = m + n;
    let mut warnings = Vec::new();

    let gj = GraphPointJets::compute(product, f, p, 3)?;
    let gbar = DMatrix::from_fn(d, d, |i, j| gj.gbar[i * d + j].value());
    let inner = |u: &DVector<f64>, v: &DVector<f64>| (u.transpose() * &gbar * v)[(0, 0)];
    let amb = AmbientCurvature::at(product, p, &frame.f_point)?;

    let induced_field = induced_metric_field(product, f);
    let curv_m = induced_field.curvature(p)?;

    let tvals: Vec<DVector<f64>> = gj
        .tangent
        .iter()
        .map(|t| GraphPointJets::values(t))
        .collect();
    let tslice: Vec<Vec<f64>> = tvals.iter().map(|t| t.iter().cloned().collect()).collect();

    // ---- Gauss ----
    let mut gauss_diff: f64 = 0.0;
    let mut gauss_scale: f64 = 0.0;
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                for l in 0..m {
                    let lhs = curv_m.riem(i, j, k, l);
                    let rbar = amb.eval(&tslice[i], &tslice[j], &tslice[k], &tslice[l])?;
                    let hh = inner(&extr.b_coord[i * m + k], &extr.b_coord[j * m + l])
                        - inner(&extr.b_coord[i * m + l], &extr.b_coord[j * m + k]);
                    let rhs = rbar + hh;
                    gauss_diff = gauss_diff.max((lhs - rhs).abs());
                    gauss_scale = gauss_scale.max(lhs.abs()).max(rbar.abs()).max(hh.abs());
                }
            }
        }
    }
    let gauss = gauss_diff / (1.0 + gauss_scale);

    // ---- Codazzi ----
    // (nabla_k B)(T_i, T_j) = (D_k B_ij)^perp - Gamma^l_{ki} B_lj - Gamma^l_{kj} B_il
    let gamma_ind = induced_field.christoffel(p)?;
    let gam = |k: usize, i: usize, j: usize| gamma_ind[(k * m + i) * m + j];
    let proj_n = &extr.proj_normal;
    let mut nabla_b = vec![DVector::<f64>::zeros(d); m * m * m]; // [k][i][j]
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let dkb = gj.cov_deriv_values(k, &gj.b[i * m + j]);
                let mut v = proj_n * dkb;
                for l in 0..m {
                    v -= &extr.b_coord[l * m + j] * gam(l, k, i);
                    v -= &extr.b_coord[i * m + l] * gam(l, k, j);
                }
                nabla_b[(k * m + i) * m + j] = v;
            }
        }
    }
    let mut codazzi_diff: f64 = 0.0;
    let mut codazzi_scale: f64 = 0.0;
    for k in 0..m {
        for i in 0..m {
            for j in 0..m {
                let lhs = &nabla_b[(k * m + i) * m + j] - &nabla_b[(i * m + k) * m + j];
                // (Rbar(T_k, T_i) T_j)^perp
                let rv = amb.operator(&gbar, &tslice[j], &tslice[k], &tslice[i])?;
                let rhs = proj_n * rv;
                for a_idx in 0..d {
                    codazzi_diff = codazzi_diff.max((lhs[a_idx] - rhs[a_idx]).abs());
                    codazzi_scale = codazzi_scale
                        .max(lhs[a_idx].abs())
                        .max(rhs[a_idx].abs());
                }
            }
        }
    }
    let codazzi = codazzi_diff / (1.0 + codazzi_scale);

    // ---- Ricci (normal bundle) ----
    // W_{l beta}(x) = (D_l e~_beta)^perp with e~ the projected normal frame;
    // the outer derivative is a two-sided finite difference of W.
    let mut step = FD_STEP;
    {
        // keep the stencil inside the charts
        for k in 0..m {
            loop {
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[k] += step;
                pm[k] -= step;
                if f.contains(&pp)
                    && f.contains(&pm)
                    && product.sigma1.contains(&pp)
                    && product.sigma1.contains(&pm)
                {
                    break;
                }
                step *= 0.5;
                if step < 1e-7 {
                    warnings.push(format!(
                        "fd step underflow near chart boundary (coordinate {k})"
                    ));
                    break;
                }
            }
        }
    }
    let w_field = |x: &[f64], l: usize, beta: usize| -> Result<DVector<f64>> {
        let g = GraphPointJets::compute(product, f, x, 2)?;
        let frames = projected_normal_frame(&g, &frame.e_normal)?;
        let dl = g.cov_deriv_values(l, &frames[beta]);
        // project normal at x using value-level projectors
        let dloc = g.ambient_dim();
        let gb = DMatrix::from_fn(dloc, dloc, |i, j| g.gbar[i * dloc + j].value());
        let tm = DMatrix::from_fn(dloc, g.m, |a, i| g.tangent[i][a].value());
        let ginv = DMatrix::from_fn(g.m, g.m, |i, j| g.induced_inv[i * g.m + j].value());
        let proj_t = &tm * ginv * tm.transpose() * &gb;
        Ok(&dl - proj_t * &dl)
    };
    let mut ricci_diff: f64 = 0.0;
    let mut ricci_scale: f64 = 0.0;
    for beta in 0..n {
        // nabla^perp_k nabla^perp_l e~_beta - (k <-> l), coordinate directions
        let mut curv_op = vec![DVector::<f64>::zeros(d); m * m];
        for k in 0..m {
            for l in 0..m {
                if k == l {
                    continue;
                }
                let mut pp = p.to_vec();
                let mut pm = p.to_vec();
                pp[k] += step;
                pm[k] -= step;
                let dw = (w_field(&pp, l, beta)? - w_field(&pm, l, beta)?) / (2.0 * step);
                // + Gammabar(T_k, W_l) at p, then normal projection
                let w_at_p = w_field(p, l, beta)?;
                let mut v = dw;
                for a_idx in 0..d {
                    let mut corr = 0.0;
                    for bb in 0..d {
                        for cc in 0..d {
                            corr += gj.gamma_bar[(a_idx * d + bb) * d + cc].value()
                                * gj.tangent[k][bb].value()
                                * w_at_p[cc];
                        }
                    }
                    v[a_idx] += corr;
                }
                curv_op[k * m + l] = proj_n * v;
            }
        }
        for alpha in 0..n {
            for kf in 0..m {
                for lf in 0..m {
                    if kf == lf {
                        continue;
                    }
                    // contract coordinate-direction curvature into the frames
                    let ek = frame.e_tangent_chart(kf);
                    let el = frame.e_tangent_chart(lf);
                    let mut vec_sum = DVector::<f64>::zeros(d);
                    for k in 0..m {
                        for l in 0..m {
                            if k == l {
                                continue;
                            }
                            vec_sum += &(&curv_op[k * m + l] - &curv_op[l * m + k]) * (ek[k] * el[l]);
                        }
                    }
                    let lhs = -inner(&vec_sum, &frame.e_normal[alpha]);
                    let rbar = -amb.eval(
                        frame.e_normal[alpha].as_slice(),
                        frame.e_normal[beta].as_slice(),
                        frame.e_tangent[kf].as_slice(),
                        frame.e_tangent[lf].as_slice(),
                    )?;
                    let mut hh = 0.0;
                    for i in 0..m {
                        hh += extr.h_frame(alpha, kf, i) * extr.h_frame(beta, lf, i)
                            - extr.h_frame(alpha, lf, i) * extr.h_frame(beta, kf, i);
                    }
                    let rhs = rbar - hh;
                    ricci_diff = ricci_diff.max((lhs - rhs).abs());
                    ricci_scale = ricci_scale.max(lhs.abs()).max(rbar.abs()).max(hh.abs());
                }
            }
        }
    }
    let ricci = ricci_diff / (1.0 + ricci_scale);

    Ok(StructureResiduals {
        gauss,
        codazzi,
        ricci,
        warnings,
    })
}

/// Smooth local normal frame: project fixed reference normals onto the
/// normal space at the evaluation point and re-orthonormalize (timelike
/// Gram-Schmidt). Agrees with the reference frame at the base point.
fn projected_normal_frame(
    gj: &GraphPointJets,
    reference: &[DVector<f64>],
) -> Result<Vec<Vec<Jet>>> {
    let d = gj.ambient_dim();
    let n = gj.n;
    let order = gj.tangent[0][0].order();
    let mut frames: Vec<Vec<Jet>> = Vec::with_capacity(n);
    for e in reference.iter() {
        let v: Vec<Jet> = (0..d).map(|a| Jet::constant(gj.m, order, e[a])).collect();
        let mut w = gj.normal_project(&v);
        // subtract gbar-projections onto the previously accepted normals,
        // remembering normals have gbar-norm -1
        let prev: Vec<Vec<Jet>> = frames.clone();
        for q in &prev {
            let c = inner_jets(&gj.gbar, d, &w, q);
            for a in 0..d {
                w[a] = &w[a] + &(&c * &q[a]);
            }
        }
        let norm = inner_jets(&gj.gbar, d, &w, &w).scale(-1.0).sqrt();
        let inv = norm.recip();
        for a in 0..d {
            w[a] = &w[a] * &inv;
        }
        frames.push(w);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::metric_by_name;
    use std::sync::Arc;

    fn flat_product(m: usize, n: usize) -> ProductMetric {
        ProductMetric::new(
            metric_by_name("euclidean", m).unwrap(),
            metric_by_name("euclidean", n).unwrap(),
        )
    }

    fn hyperboloid(m: usize) -> GraphMap {
        GraphMap::new(
            "hyperboloid",
            m,
            1,
            Arc::new(|x: &[Jet]| vec![(crate::jet::norm_sq(x) + 1.0).sqrt()]),
            Arc::new(|_| true),
        )
    }

    fn affine(mat: Vec<Vec<f64>>) -> GraphMap {
        let n = mat.len();
        let m = mat[0].len();
        GraphMap::new(
            "affine",
            m,
            n,
            Arc::new(move |x: &[Jet]| {
                (0..mat.len())
                    .map(|a| {
                        let mut s =
                            Jet::constant(x[0].dim(), x.iter().map(|j| j.order()).min().unwrap(), 0.0);
                        for (i, xi) in x.iter().enumerate() {
                            s = s + xi.scale(mat[a][i]);
                        }
                        s
                    })
                    .collect()
            }),
            Arc::new(|_| true),
        )
    }

    #[test]
    fn affine_graph_is_totally_geodesic() {
        let product = flat_product(2, 2);
        let f = affine(vec![vec![0.4, 0.1], vec![-0.2, 0.3]]);
        let e = second_fundamental(&product, &f, &[0.3, -0.5]).unwrap();
        assert!(e.b_norm_sq < 1e-20);
        assert!(e.mean_norm < 1e-12);
        let r = structure_equation_residuals(&product, &f, &[0.3, -0.5]).unwrap();
        assert!(r.gauss < 1e-12 && r.codazzi < 1e-12 && r.ricci < 1e-10);
    }

    #[test]
    fn hyperboloid_is_umbilic_with_scalar_mean_m() {
        for m in [2usize, 3] {
            let product = flat_product(m, 1);
            let f = hyperboloid(m);
            for p in [[0.0, 0.0, 0.0], [0.3, 0.1, -0.2], [1.2, -0.7, 0.4]] {
                let p = &p[..m];
                let e = second_fundamental(&product, &f, p).unwrap();
                let s = e.scalar_mean.unwrap();
                assert!((s - m as f64).abs() < 1e-9, "m={m}: <H,nu> = {s}");
                // umbilic: h^1_{ij} proportional to identity in the frame
                let h00 = e.h_frame(0, 0, 0);
                for i in 0..m {
                    for j in 0..m {
                        let want = if i == j { h00 } else { 0.0 };
                        assert!((e.h_frame(0, i, j) - want).abs() < 1e-9);
                    }
                }
            }
        }
    }

    #[test]
    fn calabi_divergence_matches_scalar_mean() {
        // div(Df / sqrt(1 - |Df|^2)) for the hyperboloid equals m exactly
        let product = flat_product(2, 1);
        let f = hyperboloid(2);
        let p = [0.4, -0.3];
        let e = second_fundamental(&product, &f, &p).unwrap();
        // flat-chart divergence via jets
        let x = Jet::seed(&p, 2);
        let fj = f.eval_jets(&x);
        let df: Vec<Jet> = (0..2).map(|i| fj[0].demote(i)).collect();
        let w = (1.0 - (df[0].squared() + df[1].squared())).sqrt();
        let mut div = 0.0;
        for i in 0..2 {
            div += (&df[i] / &w).grad(i);
        }
        assert!((e.scalar_mean.unwrap() - div).abs() < 1e-9);
    }

    #[test]
    fn trace_consistency_via_induced_inverse() {
        let product = flat_product(2, 2);
        let f = affine(vec![vec![0.5, 0.2], vec![0.1, 0.3]]);
        let p = [0.2, 0.1];
        let e = second_fundamental(&product, &f, &p).unwrap();
        // H^alpha from the coordinate route
        let d = 4;
        let gbar = product.ambient_metric(&p, &f.value(&p).unwrap()).unwrap();
        for alpha in 0..2 {
            let viaframe: f64 = (0..2).map(|i| e.h_frame(alpha, i, i)).sum();
            let coord =
                -(e.mean_vector.transpose() * &gbar * &e.frame.e_normal[alpha])[(0, 0)];
            assert!((viaframe - coord).abs() < 1e-12);
        }
        let _ = d;
    }

    #[test]
    fn ambient_curvature_splitting() {
        // Sigma_2 = S^2: plane of two pure-Sigma_2 unit vectors gives -K_2
        let product = ProductMetric::new(
            metric_by_name("euclidean", 2).unwrap(),
            metric_by_name("sphere_stereo", 2).unwrap(),
        );
        let p2 = [0.2, -0.1];
        let g2 = product.sigma2.eval(&p2).unwrap();
        let s = 1.0 / g2[(0, 0)].sqrt();
        let u = [0.0, 0.0, s, 0.0];
        let v = [0.0, 0.0, 0.0, s];
        let p = [0.0, 0.0, p2[0], p2[1]];
        let val = ambient_curvature(&product, &p, &u, &v, &u, &v).unwrap();
        assert!((val + 1.0).abs() < 1e-9, "got {val}");
        // zero pi_1 parts against a flat Sigma_2 factor vanish
        let product2 = flat_product(2, 1);
        let q = [0.1, 0.2, 0.0];
        let a = [0.3, -0.2, 0.5];
        let b = [0.0, 0.1, -0.4];
        let val2 = ambient_curvature(&product2, &q, &a, &b, &a, &b).unwrap();
        assert!(val2.abs() < 1e-12);
        // antisymmetry pairs of the 4-tensor
        let amb = AmbientCurvature::at(
            &product,
            &[0.0, 0.0],
            &p2,
        )
        .unwrap();
        let w = [0.1, -0.2, 0.3, 0.5];
        let z = [0.4, 0.1, -0.3, 0.2];
        let base = amb.eval(&u, &v, &w, &z).unwrap();
        assert!((base + amb.eval(&v, &u, &w, &z).unwrap()).abs() < 1e-12);
        assert!((base + amb.eval(&u, &v, &z, &w).unwrap()).abs() < 1e-12);
        assert!((base - amb.eval(&w, &z, &u, &v).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn structure_equations_on_flat_polynomial_graph() {
        let product = flat_product(2, 2);
        // cubic components, gradients well inside the spacelike region
        let f = GraphMap::new(
            "poly",
            2,
            2,
            Arc::new(|x: &[Jet]| {
                let (a, b) = (&x[0], &x[1]);
                vec![
                    a.squared() * b * 0.08 + a * 0.15 - b.squared() * 0.1,
                    b.powi(3) * 0.05 + a * b * 0.12 + a * 0.05,
                ]
            }),
            Arc::new(|_| true),
        );
        let p = [0.4, -0.6];
        let r = structure_equation_residuals(&product, &f, &p).unwrap();
        assert!(r.gauss < 1e-6, "gauss {}", r.gauss);
        assert!(r.codazzi < 1e-6, "codazzi {}", r.codazzi);
        assert!(r.ricci < 1e-6, "ricci {}", r.ricci);
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn ricci_equation_active_on_rank_two_curved_target() {
        // independent components give rank 2, so both the normal-bundle
        // curvature and the shape commutator are nonzero
        let product = ProductMetric::new(
            metric_by_name("euclidean", 2).unwrap(),
            metric_by_name("poincare_ball", 2).unwrap(),
        );
        let f = GraphMap::new(
            "rank_two",
            2,
            2,
            Arc::new(|x: &[Jet]| {
                vec![
                    (x[0].scale(0.35)).tanh() + x[1].squared() * 0.02,
                    (x[1].scale(0.3)).tanh() - &x[0] * &x[1] * 0.03,
                ]
            }),
            Arc::new(|_| true),
        );
        let p = [0.5, -0.3];
        let e = second_fundamental(&product, &f, &p).unwrap();
        assert_eq!(e.frame.rank, 2);
        // shape commutator genuinely nonzero
        let comm = e.commutator_at(0, 1, 0, 1);
        assert!(comm.abs() > 1e-6, "commutator {comm}");
        let r = structure_equation_residuals(&product, &f, &p).unwrap();
        assert!(r.ricci < 1e-6, "ricci {}", r.ricci);
        assert!(r.gauss < 1e-6 && r.codazzi < 1e-6);
    }

    #[test]
    fn structure_equations_with_curved_target() {
        // rank-one map into the hyperbolic plane, still exercises R_2 != 0
        let product = ProductMetric::new(
            metric_by_name("euclidean", 2).unwrap(),
            metric_by_name("poincare_ball", 2).unwrap(),
        );
        let f = GraphMap::new(
            "curved_target",
            2,
            2,
            Arc::new(|x: &[Jet]| {
                let t = &x[0] * 0.3 + x[1].scale(0.1);
                vec![(&t * 0.5).tanh() * 0.6, (&t * 0.4).tanh() * 0.2]
            }),
            Arc::new(|_| true),
        );
        let p = [0.3, 0.2];
        let r = structure_equation_residuals(&product, &f, &p).unwrap();
        assert!(r.gauss < 1e-4, "gauss {}", r.gauss);
        assert!(r.codazzi < 1e-4, "codazzi {}", r.codazzi);
        assert!(r.ricci < 1e-4, "ricci {}", r.ricci);
    }
}
