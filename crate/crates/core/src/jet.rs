//! Forward-mode dual arithmetic carrying derivatives up to third order.
//!
//! A [`Jet`] is a truncated Taylor expansion of a scalar quantity in `dim`
//! independent variables. Arithmetic on jets propagates exact partial
//! derivatives through arbitrary compositions, so every metric, map and
//! scalar field in this crate differentiates without finite-difference
//! noise. Finite differences are kept around only as an oracle.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Truncated Taylor value: scalar plus derivatives up to `order` (0..=3).
#[derive(Clone, Debug)]
pub struct Jet {
    dim: usize,
    order: usize,
    v: f64,
    g: Vec<f64>, // dim             (order >= 1)
    h: Vec<f64>, // dim*dim         (order >= 2)
    t: Vec<f64>, // dim*dim*dim     (order >= 3)
}

pub const MAX_ORDER: usize = 3;

impl Jet {
    pub fn constant(dim: usize, order: usize, v: f64) -> Self {
        assert!(order <= MAX_ORDER);
        Jet {
            dim,
            order,
            v,
            g: if order >= 1 { vec![0.0; dim] } else { Vec::new() },
            h: if order >= 2 { vec![0.0; dim * dim] } else { Vec::new() },
            t: if order >= 3 { vec![0.0; dim * dim * dim] } else { Vec::new() },
        }
    }

    /// The `index`-th coordinate seeded as an independent variable.
    pub fn variable(dim: usize, order: usize, index: usize, v: f64) -> Self {
        assert!(index < dim);
        let mut j = Jet::constant(dim, order, v);
        if order >= 1 {
            j.g[index] = 1.0;
        }
        j
    }

    /// Seed a full coordinate point as independent variables.
    pub fn seed(p: &[f64], order: usize) -> Vec<Jet> {
        let dim = p.len();
        p.iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(dim, order, i, x))
            .collect()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn value(&self) -> f64 {
        self.v
    }

    pub fn grad(&self, i: usize) -> f64 {
        debug_assert!(self.order >= 1);
        self.g[i]
    }

    pub fn gradient(&self) -> &[f64] {
        &self.g
    }

    pub fn hess(&self, i: usize, j: usize) -> f64 {
        debug_assert!(self.order >= 2);
        self.h[i * self.dim + j]
    }

    pub fn third(&self, i: usize, j: usize, k: usize) -> f64 {
        debug_assert!(self.order >= 3);
        self.t[(i * self.dim + j) * self.dim + k]
    }

    /// Reinterpret the partial derivative along `i` as a jet one order lower.
    pub fn demote(&self, i: usize) -> Jet {
        assert!(self.order >= 1, "cannot demote an order-0 jet");
        let d = self.dim;
        let order = self.order - 1;
        let mut out = Jet::constant(d, order, self.g[i]);
        if order >= 1 {
            for j in 0..d {
                out.g[j] = self.h[i * d + j];
            }
        }
        if order >= 2 {
            for j in 0..d {
                for k in 0..d {
                    out.h[j * d + k] = self.t[(i * d + j) * d + k];
                }
            }
        }
        out
    }

    /// Drop tracked derivatives down to `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        assert!(order <= self.order);
        let mut out = Jet::constant(self.dim, order, self.v);
        if order >= 1 {
            out.g.copy_from_slice(&self.g);
        }
        if order >= 2 {
            out.h.copy_from_slice(&self.h);
        }
        if order >= 3 {
            out.t.copy_from_slice(&self.t);
        }
        out
    }

    fn binary_order(&self, rhs: &Jet) -> (usize, usize) {
        assert_eq!(self.dim, rhs.dim, "jet dimension mismatch");
        (self.dim, self.order.min(rhs.order))
    }

    fn add_impl(&self, rhs: &Jet) -> Jet {
        let (d, order) = self.binary_order(rhs);
        let mut out = Jet::constant(d, order, self.v + rhs.v);
        if order >= 1 {
            for i in 0..d {
                out.g[i] = self.g[i] + rhs.g[i];
            }
        }
        if order >= 2 {
            for i in 0..d * d {
                out.h[i] = self.h[i] + rhs.h[i];
            }
        }
        if order >= 3 {
            for i in 0..d * d * d {
                out.t[i] = self.t[i] + rhs.t[i];
            }
        }
        out
    }

    fn sub_impl(&self, rhs: &Jet) -> Jet {
        self.add_impl(&rhs.neg_impl())
    }

    fn neg_impl(&self) -> Jet {
        let mut out = self.clone();
        out.v = -out.v;
        for x in out.g.iter_mut() {
            *x = -*x;
        }
        for x in out.h.iter_mut() {
            *x = -*x;
        }
        for x in out.t.iter_mut() {
            *x = -*x;
        }
        out
    }

    fn mul_impl(&self, rhs: &Jet) -> Jet {
        let (d, order) = self.binary_order(rhs);
        let a = self;
        let b = rhs;
        let mut out = Jet::constant(d, order, a.v * b.v);
        if order >= 1 {
            for i in 0..d {
                out.g[i] = a.g[i] * b.v + a.v * b.g[i];
            }
        }
        if order >= 2 {
            for i in 0..d {
                for j in 0..d {
                    out.h[i * d + j] = a.h[i * d + j] * b.v
                        + a.g[i] * b.g[j]
                        + a.g[j] * b.g[i]
                        + a.v * b.h[i * d + j];
                }
            }
        }
        if order >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let idx = (i * d + j) * d + k;
                        out.t[idx] = a.t[idx] * b.v
                            + a.h[i * d + j] * b.g[k]
                            + a.h[i * d + k] * b.g[j]
                            + a.h[j * d + k] * b.g[i]
                            + a.g[i] * b.h[j * d + k]
                            + a.g[j] * b.h[i * d + k]
                            + a.g[k] * b.h[i * d + j]
                            + a.v * b.t[idx];
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.v *= s;
        for x in out.g.iter_mut() {
            *x *= s;
        }
        for x in out.h.iter_mut() {
            *x *= s;
        }
        for x in out.t.iter_mut() {
            *x *= s;
        }
        out
    }

    pub fn shift(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.v += s;
        out
    }

    /// Compose with a univariate function given its derivatives at `self.value()`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64, f3: f64) -> Jet {
        let d = self.dim;
        let order = self.order;
        let a = self;
        let mut out = Jet::constant(d, order, f0);
        if order >= 1 {
            for i in 0..d {
                out.g[i] = f1 * a.g[i];
            }
        }
        if order >= 2 {
            for i in 0..d {
                for j in 0..d {
                    out.h[i * d + j] = f2 * a.g[i] * a.g[j] + f1 * a.h[i * d + j];
                }
            }
        }
        if order >= 3 {
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let idx = (i * d + j) * d + k;
                        out.t[idx] = f3 * a.g[i] * a.g[j] * a.g[k]
                            + f2 * (a.h[i * d + j] * a.g[k]
                                + a.h[i * d + k] * a.g[j]
                                + a.h[j * d + k] * a.g[i])
                            + f1 * a.t[idx];
                    }
                }
            }
        }
        out
    }

    pub fn recip(&self) -> Jet {
        let x = self.v;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x), -6.0 / (x * x * x * x))
    }

    pub fn sqrt(&self) -> Jet {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v), 0.375 / (r * self.v * self.v))
    }

    pub fn exp(&self) -> Jet {
        let e = self.v.exp();
        self.chain(e, e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let x = self.v;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(s, c, s, c)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.v.sinh(), self.v.cosh());
        self.chain(c, s, c, s)
    }

    pub fn tanh(&self) -> Jet {
        let t = self.v.tanh();
        let u = 1.0 - t * t;
        self.chain(t, u, -2.0 * t * u, -2.0 * u * (1.0 - 3.0 * t * t))
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s, -c)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c, s)
    }

    pub fn powi(&self, n: i32) -> Jet {
        let x = self.v;
        let p = |k: i32| -> f64 {
            // falling-factorial prefactor for the k-th derivative of x^n
            let mut c = 1.0;
            for j in 0..k {
                c *= (n - j) as f64;
            }
            c * x.powi(n - k)
        };
        self.chain(p(0), p(1), p(2), p(3))
    }

    pub fn squared(&self) -> Jet {
        self.mul_impl(self)
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $impl_fn:ident) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$impl_fn(rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$impl_fn(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                self.$impl_fn(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$impl_fn(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, add_impl);
jet_binop!(Sub, sub, sub_impl);
jet_binop!(Mul, mul, mul_impl);

impl Div<&Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_impl(&rhs.recip())
    }
}
impl Div<Jet> for Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_impl(&rhs.recip())
    }
}
impl Div<&Jet> for Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self.mul_impl(&rhs.recip())
    }
}
impl Div<Jet> for &Jet {
    type Output = Jet;
    fn div(self, rhs: Jet) -> Jet {
        self.mul_impl(&rhs.recip())
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.neg_impl()
    }
}
impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.neg_impl()
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}
impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}
impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}
impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}
impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.shift(rhs)
    }
}
impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        self.shift(rhs)
    }
}
impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.shift(-rhs)
    }
}
impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self.shift(-rhs)
    }
}
impl Sub<&Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        rhs.neg_impl().shift(self)
    }
}
impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        rhs.neg_impl().shift(self)
    }
}
impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}
impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

/// Sum of squared entries, as a jet.
pub fn norm_sq(xs: &[Jet]) -> Jet {
    let d = xs[0].dim();
    let order = xs.iter().map(|x| x.order()).min().unwrap();
    let mut acc = Jet::constant(d, order, 0.0);
    for x in xs {
        acc = acc + x.squared();
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_fn(x: &[Jet]) -> Jet {
        // moderately nasty composition exercising every rule
        let a = (&x[0] * &x[1] + x[0].squared() * 0.5).sinh();
        let b = (norm_sq(x) + 1.0).ln().sqrt();
        let c = (&x[1] * 0.3).tanh() + x[0].powi(3) / (x[1].cosh() + 2.0);
        a * b + c
    }

    fn eval_value(p: &[f64]) -> f64 {
        let jets = Jet::seed(p, 0);
        test_fn(&jets).value()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = [0.37, -0.81];
        let jets = Jet::seed(&p, 3);
        let f = test_fn(&jets);
        let h = 1e-6;
        for i in 0..2 {
            let mut pp = p;
            let mut pm = p;
            pp[i] += h;
            pm[i] -= h;
            let fd = (eval_value(&pp) - eval_value(&pm)) / (2.0 * h);
            assert!((f.grad(i) - fd).abs() < 1e-8, "grad {i}: {} vs {}", f.grad(i), fd);
        }
    }

    #[test]
    fn hessian_and_third_match_finite_differences_of_gradient() {
        let p = [0.37, -0.81];
        let f = test_fn(&Jet::seed(&p, 3));
        let h = 1e-5;
        for i in 0..2 {
            for j in 0..2 {
                let mut pp = p;
                let mut pm = p;
                pp[j] += h;
                pm[j] -= h;
                let gp = test_fn(&Jet::seed(&pp, 1)).grad(i);
                let gm = test_fn(&Jet::seed(&pm, 1)).grad(i);
                let fd = (gp - gm) / (2.0 * h);
                assert!((f.hess(i, j) - fd).abs() < 1e-6);
                for k in 0..2 {
                    let hp = test_fn(&Jet::seed(&pp, 2)).hess(i, k);
                    let hm = test_fn(&Jet::seed(&pm, 2)).hess(i, k);
                    let fd3 = (hp - hm) / (2.0 * h);
                    assert!((f.third(i, k, j) - fd3).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn hessian_symmetry() {
        let p = [1.3, 0.2];
        let f = test_fn(&Jet::seed(&p, 3));
        assert!((f.hess(0, 1) - f.hess(1, 0)).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    let t = f.third(i, j, k);
                    assert!((t - f.third(j, i, k)).abs() < 1e-12);
                    assert!((t - f.third(i, k, j)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn demote_is_partial_derivative() {
        let p = [0.5, 0.25];
        let f = test_fn(&Jet::seed(&p, 3));
        let d0 = f.demote(0);
        assert_eq!(d0.order(), 2);
        assert!((d0.value() - f.grad(0)).abs() < 1e-15);
        assert!((d0.grad(1) - f.hess(0, 1)).abs() < 1e-15);
        assert!((d0.hess(1, 1) - f.third(0, 1, 1)).abs() < 1e-15);
    }

    proptest::proptest! {
        // product rule at every tracked order
        #[test]
        fn prop_product_rule(
            x in -1.5f64..1.5,
            y in -1.5f64..1.5,
        ) {
            let p = [x, y];
            let s = Jet::seed(&p, 3);
            let a = (&s[0] * 0.7 + s[1].squared() * 0.3).sin() + &s[0] * 0.1;
            let b = (s[1].scale(0.4)).cosh() + &s[0] * &s[1];
            let prod = &a * &b;
            for i in 0..2 {
                let want = a.grad(i) * b.value() + a.value() * b.grad(i);
                proptest::prop_assert!((prod.grad(i) - want).abs() < 1e-12);
                for j in 0..2 {
                    let want2 = a.hess(i, j) * b.value()
                        + a.grad(i) * b.grad(j)
                        + a.grad(j) * b.grad(i)
                        + a.value() * b.hess(i, j);
                    proptest::prop_assert!((prod.hess(i, j) - want2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn polynomial_exact() {
        // f = x^2 y + 4, all derivatives closed form
        let p = [2.0, 3.0];
        let x = Jet::seed(&p, 3);
        let f = x[0].squared() * &x[1] + Jet::constant(2, 3, 4.0);
        assert_eq!(f.value(), 16.0);
        assert_eq!(f.grad(0), 12.0);
        assert_eq!(f.grad(1), 4.0);
        assert_eq!(f.hess(0, 0), 6.0);
        assert_eq!(f.hess(0, 1), 4.0);
        assert_eq!(f.third(0, 0, 1), 2.0);
        assert_eq!(f.third(0, 0, 0), 0.0);
    }
}
