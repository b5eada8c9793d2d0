//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] holds the Taylor coefficients `c_α` of a smooth function around a
//! point, for all multi-indices `|α| ≤ K`, so that the partial derivative
//! `∂^α f = α! c_α`. Arithmetic on jets is truncated polynomial arithmetic,
//! and composition with a univariate function is the Taylor series of that
//! function evaluated on the nilpotent part of the jet. Pushing seeded jets
//! through a computation therefore propagates derivatives by the multivariate
//! chain rule to any fixed order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

use crate::scalar::{factorial, Scalar};

/// Multi-index layout for `nvars` variables truncated at total degree `order`.
#[derive(Debug)]
pub struct JetShape {
    nvars: usize,
    order: usize,
    indices: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, usize>,
    products: Vec<(u32, u32, u32)>,
}

impl JetShape {
    fn build(nvars: usize, order: usize) -> Self {
        let mut indices: Vec<Vec<u8>> = Vec::new();
        for degree in 0..=order {
            let mut current = vec![0u8; nvars];
            push_degree(&mut indices, &mut current, 0, degree);
        }
        let lookup: HashMap<Vec<u8>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            let da: usize = a.iter().map(|&v| v as usize).sum();
            for (j, b) in indices.iter().enumerate() {
                let db: usize = b.iter().map(|&v| v as usize).sum();
                if da + db > order {
                    continue;
                }
                let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                products.push((i as u32, j as u32, lookup[&sum] as u32));
            }
        }
        JetShape {
            nvars,
            order,
            indices,
            lookup,
            products,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Multi-indices in graded order; position 0 is the constant term.
    pub fn indices(&self) -> &[Vec<u8>] {
        &self.indices
    }

    pub fn position(&self, alpha: &[u8]) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }
}

fn push_degree(out: &mut Vec<Vec<u8>>, current: &mut Vec<u8>, var: usize, remaining: usize) {
    if var + 1 == current.len() {
        current[var] = remaining as u8;
        out.push(current.clone());
        current[var] = 0;
        return;
    }
    if current.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for take in (0..=remaining).rev() {
        current[var] = take as u8;
        push_degree(out, current, var + 1, remaining - take);
    }
    current[var] = 0;
}

/// Shared, cached shape for `(nvars, order)`.
type ShapeCache = Mutex<HashMap<(usize, usize), Arc<JetShape>>>;

pub fn shape(nvars: usize, order: usize) -> Arc<JetShape> {
    static CACHE: OnceLock<ShapeCache> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("jet shape cache poisoned");
    guard
        .entry((nvars, order))
        .or_insert_with(|| Arc::new(JetShape::build(nvars, order)))
        .clone()
}

/// Truncated Taylor expansion of a scalar function of `nvars` variables.
#[derive(Clone)]
pub struct Jet<T: Scalar> {
    shape: Arc<JetShape>,
    coeffs: Vec<T>,
}

impl<T: Scalar> fmt::Debug for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.shape.nvars)
            .field("order", &self.shape.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl<T: Scalar> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.shape, &other.shape) && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> Jet<T> {
    pub fn constant(shape: &Arc<JetShape>, value: T) -> Self {
        let mut coeffs = vec![T::zero(); shape.len()];
        coeffs[0] = value;
        Jet {
            shape: shape.clone(),
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded around `value`.
    pub fn variable(shape: &Arc<JetShape>, var: usize, value: T) -> Self {
        let mut jet = Self::constant(shape, value);
        if shape.order >= 1 {
            let mut alpha = vec![0u8; shape.nvars];
            alpha[var] = 1;
            let pos = shape.position(&alpha).expect("first order index");
            jet.coeffs[pos] = T::one();
        }
        jet
    }

    /// Identity seeds `x_i + dx_i` for a point.
    pub fn seed(point: &[T], order: usize) -> Vec<Self> {
        let sh = shape(point.len(), order);
        point
            .iter()
            .enumerate()
            .map(|(i, &v)| Self::variable(&sh, i, v))
            .collect()
    }

    pub fn from_coeffs(shape: &Arc<JetShape>, coeffs: Vec<T>) -> Self {
        assert_eq!(coeffs.len(), shape.len(), "coefficient count mismatch");
        Jet {
            shape: shape.clone(),
            coeffs,
        }
    }

    pub fn shape(&self) -> &Arc<JetShape> {
        &self.shape
    }

    pub fn order(&self) -> usize {
        self.shape.order
    }

    pub fn nvars(&self) -> usize {
        self.shape.nvars
    }

    pub fn value(&self) -> T {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &[u8]) -> T {
        self.shape
            .position(alpha)
            .map(|p| self.coeffs[p])
            .unwrap_or_else(T::zero)
    }

    /// Partial derivative `∂^α` at the expansion point; zero beyond the order.
    pub fn derivative(&self, alpha: &[u8]) -> T {
        let weight = alpha
            .iter()
            .fold(T::one(), |acc, &a| acc * factorial::<T>(a as usize));
        self.coeff(alpha) * weight
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    fn same_shape(&self, other: &Self) {
        debug_assert!(
            Arc::ptr_eq(&self.shape, &other.shape),
            "jet shapes differ: ({}, {}) vs ({}, {})",
            self.shape.nvars,
            self.shape.order,
            other.shape.nvars,
            other.shape.order
        );
    }

    pub fn scale(&self, k: T) -> Self {
        Jet {
            shape: self.shape.clone(),
            coeffs: self.coeffs.iter().map(|&c| c * k).collect(),
        }
    }

    pub fn add_scalar(&self, k: T) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    /// The jet minus its value: nilpotent of degree `order + 1`.
    fn nilpotent(&self) -> Self {
        let mut out = self.clone();
        out.coeffs[0] = T::zero();
        out
    }

    fn mul_ref(&self, other: &Self) -> Self {
        self.same_shape(other);
        let mut coeffs = vec![T::zero(); self.coeffs.len()];
        for &(i, j, k) in &self.shape.products {
            coeffs[k as usize] += self.coeffs[i as usize] * other.coeffs[j as usize];
        }
        Jet {
            shape: self.shape.clone(),
            coeffs,
        }
    }

    /// `Σ_j derivs[j] / j! · (self − a)^j` where `a = self.value()`: the
    /// Taylor composition `g ∘ self` given `g^{(j)}(a)`.
    pub fn compose_univariate(&self, derivs: &[T]) -> Self {
        let order = self.shape.order;
        let mut out = Self::constant(&self.shape, derivs[0]);
        if order == 0 {
            return out;
        }
        let h = self.nilpotent();
        let mut power = h.clone();
        for (j, &d) in derivs.iter().enumerate().take(order + 1).skip(1) {
            if d != T::zero() {
                let w = d / factorial::<T>(j);
                for (o, p) in out.coeffs.iter_mut().zip(&power.coeffs) {
                    *o += *p * w;
                }
            }
            if j < order {
                power = power.mul_ref(&h);
            }
        }
        out
    }

    /// Substitute `inputs` into a Taylor polynomial given by `poly`, whose
    /// coefficients are expansions around `inputs[i].value()`.
    pub fn compose_taylor(poly: &Jet<T>, inputs: &[Jet<T>]) -> Jet<T> {
        assert_eq!(poly.nvars(), inputs.len(), "taylor substitution arity");
        let target = inputs
            .first()
            .map(|j| j.shape.clone())
            .unwrap_or_else(|| shape(0, 0));
        let k = poly.order().min(target.order);
        let h: Vec<Jet<T>> = inputs.iter().map(|j| j.nilpotent()).collect();
        let mut powers: Vec<Vec<Jet<T>>> = Vec::with_capacity(h.len());
        for hi in &h {
            let mut ps = vec![Jet::constant(&target, T::one())];
            for d in 1..=k {
                let next = ps[d - 1].mul_ref(hi);
                ps.push(next);
            }
            powers.push(ps);
        }
        let mut out = Jet::constant(&target, T::zero());
        for (pos, alpha) in poly.shape.indices.iter().enumerate() {
            let c = poly.coeffs[pos];
            let deg: usize = alpha.iter().map(|&a| a as usize).sum();
            if c == T::zero() || deg > k {
                continue;
            }
            let mut term = Jet::constant(&target, c);
            for (var, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    term = term.mul_ref(&powers[var][a as usize]);
                }
            }
            for (o, t) in out.coeffs.iter_mut().zip(&term.coeffs) {
                *o += *t;
            }
        }
        out
    }

    pub fn recip(&self) -> Self {
        let a = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        let inv = T::one() / a;
        let mut d = inv;
        for j in 0..=self.order() {
            derivs.push(d);
            d = d * (-T::from_count(j + 1)) * inv;
        }
        self.compose_univariate(&derivs)
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose_univariate(&vec![e; self.order() + 1])
    }

    pub fn ln(&self) -> Self {
        let a = self.value();
        let mut derivs = vec![a.ln()];
        let inv = T::one() / a;
        let mut d = inv;
        for j in 1..=self.order() {
            derivs.push(d);
            d = d * (-T::from_count(j)) * inv;
        }
        self.compose_univariate(&derivs)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<T> = (0..=self.order()).map(|j| cycle[j % 4]).collect();
        self.compose_univariate(&derivs)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<T> = (0..=self.order()).map(|j| cycle[j % 4]).collect();
        self.compose_univariate(&derivs)
    }

    /// `self^p` for real `p`; the value must be positive unless `p` is a
    /// non-negative integer.
    pub fn powf(&self, p: T) -> Self {
        if p.fract() == T::zero() && p >= T::zero() && p <= T::lit(64.0) {
            return self.powi(p.to_i32().expect("small integer"));
        }
        let a = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        let mut coef = T::one();
        for j in 0..=self.order() {
            derivs.push(coef * a.powf(p - T::from_count(j)));
            coef = coef * (p - T::from_count(j));
        }
        self.compose_univariate(&derivs)
    }

    pub fn powi(&self, n: i32) -> Self {
        if n < 0 {
            return self.powi(-n).recip();
        }
        let a = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        let mut coef = T::one();
        for j in 0..=self.order() {
            let e = n - j as i32;
            if e < 0 {
                derivs.push(T::zero());
            } else {
                derivs.push(coef * a.powi(e));
            }
            coef = coef * T::from_count((n - j as i32).max(0) as usize);
        }
        self.compose_univariate(&derivs)
    }

    pub fn sqrt(&self) -> Self {
        self.powf(T::lit(0.5))
    }

    pub fn tanh(&self) -> Self {
        let two = T::lit(2.0);
        let e = self.scale(two).exp();
        (e.add_scalar(-T::one())) / e.add_scalar(T::one())
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl<T: Scalar> $trait<&Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                let f: fn(&Jet<T>, &Jet<T>) -> Jet<T> = $body;
                f(self, rhs)
            }
        }
        impl<T: Scalar> $trait<Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                (&self).$method(&rhs)
            }
        }
        impl<T: Scalar> $trait<&Jet<T>> for Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: &Jet<T>) -> Jet<T> {
                (&self).$method(rhs)
            }
        }
        impl<T: Scalar> $trait<Jet<T>> for &Jet<T> {
            type Output = Jet<T>;
            fn $method(self, rhs: Jet<T>) -> Jet<T> {
                self.$method(&rhs)
            }
        }
    };
}

binop!(Add, add, |a, b| {
    a.same_shape(b);
    Jet {
        shape: a.shape.clone(),
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| *x + *y).collect(),
    }
});
binop!(Sub, sub, |a, b| {
    a.same_shape(b);
    Jet {
        shape: a.shape.clone(),
        coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| *x - *y).collect(),
    }
});
binop!(Mul, mul, |a, b| a.mul_ref(b));
binop!(Div, div, |a, b| a.mul_ref(&b.recip()));

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        self.scale(-T::one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn shape_counts_binomial() {
        // C(n + K, K)
        assert_eq!(shape(1, 3).len(), 4);
        assert_eq!(shape(2, 3).len(), 10);
        assert_eq!(shape(3, 2).len(), 10);
        assert_eq!(shape(2, 0).len(), 1);
        assert_eq!(shape(2, 3).indices()[0], vec![0, 0]);
    }

    #[test]
    fn polynomial_derivatives() {
        let x = Jet::<f64>::seed(&[3.0], 3);
        let y = &x[0] * &x[0];
        assert_eq!(y.value(), 9.0);
        assert_eq!(y.derivative(&[1]), 6.0);
        assert_eq!(y.derivative(&[2]), 2.0);
        assert_eq!(y.derivative(&[3]), 0.0);
    }

    #[test]
    fn mixed_partials_product() {
        let v = Jet::<f64>::seed(&[2.0, 5.0], 3);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert_eq!(f.derivative(&[1, 0]), 20.0);
        assert_eq!(f.derivative(&[0, 1]), 4.0);
        assert_eq!(f.derivative(&[1, 1]), 4.0);
        assert_eq!(f.derivative(&[2, 1]), 2.0);
    }

    #[test]
    fn chain_rule_through_sin_exp() {
        let x = Jet::<f64>::seed(&[0.3], 3);
        let f = x[0].scale(2.0).sin().exp();
        let s = (0.6f64).sin();
        let c = (0.6f64).cos();
        let e = s.exp();
        assert_relative_eq!(f.derivative(&[1]), 2.0 * c * e, epsilon = 1e-14);
        let d2 = e * (4.0 * c * c - 4.0 * s);
        assert_relative_eq!(f.derivative(&[2]), d2, epsilon = 1e-13);
    }

    #[test]
    fn recip_and_ln_are_inverse_friendly() {
        let x = Jet::<f64>::seed(&[1.7], 3);
        let r = x[0].recip();
        assert_relative_eq!(r.derivative(&[3]), -6.0 / 1.7f64.powi(4), epsilon = 1e-13);
        let l = x[0].ln().exp();
        for (a, b) in l.coeffs().iter().zip(x[0].coeffs()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn powf_matches_powi_and_sqrt() {
        let x = Jet::<f64>::seed(&[2.5], 3);
        let a = x[0].powf(-3.0);
        let b = x[0].powi(-3);
        for (p, q) in a.coeffs().iter().zip(b.coeffs()) {
            assert_relative_eq!(p, q, epsilon = 1e-13);
        }
        let s = x[0].sqrt();
        let sq = &s * &s;
        for (p, q) in sq.coeffs().iter().zip(x[0].coeffs()) {
            assert_relative_eq!(p, q, epsilon = 1e-13);
        }
    }

    #[test]
    fn taylor_substitution_matches_direct_composition() {
        // g(y) = y^3 composed with y = sin(x)
        let x = Jet::<f64>::seed(&[0.4], 3);
        let inner = x[0].sin();
        let direct = inner.powi(3);
        let poly_seed = Jet::<f64>::seed(&[inner.value()], 3);
        let poly = poly_seed[0].powi(3);
        let sub = Jet::compose_taylor(&poly, &[inner]);
        for (p, q) in sub.coeffs().iter().zip(direct.coeffs()) {
            assert_relative_eq!(p, q, epsilon = 1e-13);
        }
    }

    #[test]
    fn f32_jets_work() {
        let x = Jet::<f32>::seed(&[0.5], 2);
        let f = x[0].exp();
        assert!((f.derivative(&[2]) - 0.5f32.exp()).abs() < 1e-6);
    }
}
