//! ε-parametrized nets of smooth maps on boxes in ℝⁿ.
//!
//! A [`Net`] is the representative `(u_ε)_ε`: for every `ε ∈ (0, 1]` a smooth
//! map from a box in ℝⁿ to ℝᵐ. Derivatives are obtained by pushing Taylor
//! jets through the map; maps without analytic jets fall back to central
//! differences with two Richardson levels.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{self, Jet};
use crate::scalar::factorial;

pub type J = Jet<f64>;

/// Analytic order marker for maps whose jets exist to every order.
pub const UNLIMITED: usize = usize::MAX;

/// Default highest order reachable by finite differences.
pub const FD_MAX_ORDER: usize = 3;

/// Closed axis-aligned box; bounds may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        assert_eq!(lo.len(), hi.len(), "box bound dimensions");
        BoxDomain { lo, hi }
    }

    pub fn whole(dim: usize) -> Self {
        BoxDomain {
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
        }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        BoxDomain {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    /// True when `inner` sits in the interior with at least `margin` to spare.
    pub fn contains_box_with_margin(&self, inner: &BoxDomain, margin: f64) -> bool {
        inner.dim() == self.dim()
            && (0..self.dim()).all(|i| {
                inner.lo[i] - self.lo[i] >= margin && self.hi[i] - inner.hi[i] >= margin
            })
    }

    pub fn intersect(&self, other: &BoxDomain) -> Option<BoxDomain> {
        let lo: Vec<f64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&other.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(l, h)| l <= h) {
            Some(BoxDomain { lo, hi })
        } else {
            None
        }
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    /// Smallest box containing `points`.
    pub fn hull<'a, I: IntoIterator<Item = &'a [f64]>>(dim: usize, points: I) -> Option<BoxDomain> {
        let mut lo = vec![f64::INFINITY; dim];
        let mut hi = vec![f64::NEG_INFINITY; dim];
        let mut any = false;
        for p in points {
            any = true;
            for i in 0..dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        any.then_some(BoxDomain { lo, hi })
    }

    pub fn expanded(&self, margin: f64) -> BoxDomain {
        BoxDomain {
            lo: self.lo.iter().map(|v| v - margin).collect(),
            hi: self.hi.iter().map(|v| v + margin).collect(),
        }
    }
}

/// An ε-family of smooth maps. Implementations are pure.
pub trait NetMap: Send + Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;

    /// Highest derivative order `eval_jet` supports (`0`: none).
    fn analytic_order(&self) -> usize;

    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>>;

    /// Push jets through the slice at `eps`; `None` when unsupported.
    fn eval_jet(&self, _eps: f64, _x: &[J]) -> Option<Result<Vec<J>>> {
        None
    }
}

/// Jets of `map` at `eps` composed with input jets `x`, using the analytic
/// route when available and central differences otherwise.
pub fn map_jets(map: &dyn NetMap, eps: f64, x: &[J], fd_order: usize) -> Result<Vec<J>> {
    let order = x.first().map(|j| j.order()).unwrap_or(0);
    if order == 0 {
        let a: Vec<f64> = x.iter().map(|j| j.value()).collect();
        let sh = x
            .first()
            .map(|j| j.shape().clone())
            .unwrap_or_else(|| jet::shape(0, 0));
        return Ok(map
            .eval(eps, &a)?
            .into_iter()
            .map(|v| Jet::constant(&sh, v))
            .collect());
    }
    if order <= map.analytic_order() {
        if let Some(r) = map.eval_jet(eps, x) {
            return r;
        }
    }
    if order > fd_order {
        return Err(Error::OrderUnreachable {
            requested: order,
            analytic: map.analytic_order(),
            fd: fd_order,
        });
    }
    let a: Vec<f64> = x.iter().map(|j| j.value()).collect();
    let polys = fd_taylor(map, eps, &a, order)?;
    Ok(polys.iter().map(|p| Jet::compose_taylor(p, x)).collect())
}

/// Finite-difference step for the fallback route.
///
/// `max(min(ε^1.5, 1e-2), 1e-7)·(1 + |x|)`.
pub fn fd_step(eps: f64, x: f64) -> f64 {
    eps.powf(1.5).clamp(1e-7, 1e-2) * (1.0 + x.abs())
}

fn stencil(order: u8) -> &'static [(i32, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        3 => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
        _ => unreachable!("finite differences above third order"),
    }
}

fn fd_partial(map: &dyn NetMap, eps: f64, a: &[f64], alpha: &[u8], h: &[f64]) -> Result<Vec<f64>> {
    let n = a.len();
    let mut out = vec![0.0; map.dim_out()];
    let mut idx = vec![0usize; n];
    let stencils: Vec<&[(i32, f64)]> = alpha.iter().map(|&k| stencil(k)).collect();
    let mut scale = 1.0;
    for i in 0..n {
        scale *= h[i].powi(alpha[i] as i32);
    }
    loop {
        let mut p = a.to_vec();
        let mut w = 1.0;
        for i in 0..n {
            let (off, c) = stencils[i][idx[i]];
            p[i] += off as f64 * h[i];
            w *= c;
        }
        let v = map.eval(eps, &p)?;
        for (o, vi) in out.iter_mut().zip(v) {
            *o += w * vi;
        }
        let mut i = 0;
        loop {
            if i == n {
                return Ok(out.into_iter().map(|v| v / scale).collect());
            }
            idx[i] += 1;
            if idx[i] < stencils[i].len() {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

/// Taylor polynomials (one per output) around `a` from finite differences.
fn fd_taylor(map: &dyn NetMap, eps: f64, a: &[f64], order: usize) -> Result<Vec<J>> {
    let n = a.len();
    let sh = jet::shape(n, order);
    let base_h: Vec<f64> = a.iter().map(|&x| fd_step(eps, x)).collect();
    let m = map.dim_out();
    let mut coeffs = vec![vec![0.0; sh.len()]; m];
    for (pos, alpha) in sh.indices().iter().enumerate() {
        let deg: usize = alpha.iter().map(|&v| v as usize).sum();
        let value = if deg == 0 {
            map.eval(eps, a)?
        } else {
            let d: Vec<Vec<f64>> = (0..3)
                .map(|lvl| {
                    let h: Vec<f64> = base_h.iter().map(|v| v / f64::powi(2.0, lvl)).collect();
                    fd_partial(map, eps, a, alpha, &h)
                })
                .collect::<Result<_>>()?;
            (0..m)
                .map(|i| {
                    let r1 = (4.0 * d[1][i] - d[0][i]) / 3.0;
                    let r2 = (4.0 * d[2][i] - d[1][i]) / 3.0;
                    (16.0 * r2 - r1) / 15.0
                })
                .collect()
        };
        let weight: f64 = alpha.iter().map(|&k| factorial::<f64>(k as usize)).product();
        for i in 0..m {
            coeffs[i][pos] = value[i] / weight;
        }
    }
    Ok(coeffs.into_iter().map(|c| Jet::from_coeffs(&sh, c)).collect())
}

/// The representative `(u_ε)_ε`.
#[derive(Clone)]
pub struct Net {
    map: Arc<dyn NetMap>,
    label: String,
    domain: BoxDomain,
    focus: Vec<Vec<f64>>,
    fd_order: usize,
}

impl fmt::Debug for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Net")
            .field("label", &self.label)
            .field("dim_in", &self.dim_in())
            .field("dim_out", &self.dim_out())
            .field("domain", &self.domain)
            .finish()
    }
}

impl Net {
    pub fn new(map: Arc<dyn NetMap>, label: impl Into<String>, domain: BoxDomain) -> Result<Self> {
        if domain.dim() != map.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "domain has dimension {}, map expects {}",
                domain.dim(),
                map.dim_in()
            )));
        }
        Ok(Net {
            map,
            label: label.into(),
            domain,
            focus: Vec::new(),
            fd_order: FD_MAX_ORDER,
        })
    }

    /// Net given by one expression per output component.
    pub fn from_exprs(exprs: &[&str], vars: &[&str], label: impl Into<String>) -> Result<Self> {
        let parsed = exprs
            .iter()
            .map(|s| Expr::parse(s, vars))
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            Arc::new(ExprMap::new(parsed, vars.len())),
            label,
            BoxDomain::whole(vars.len()),
        )
    }

    /// Net from a closure on jets; `order` is the supported analytic order.
    pub fn from_jet_fn<F>(dim_in: usize, dim_out: usize, order: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[J]) -> Vec<J> + Send + Sync + 'static,
    {
        Self::try_from_jet_fn(dim_in, dim_out, order, label, move |e, x| Ok(f(e, x)))
    }

    /// [`Net::from_jet_fn`] for closures that can fail.
    pub fn try_from_jet_fn<F>(dim_in: usize, dim_out: usize, order: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[J]) -> Result<Vec<J>> + Send + Sync + 'static,
    {
        Net {
            map: Arc::new(JetFnMap {
                dim_in,
                dim_out,
                order,
                f: Box::new(f),
            }),
            label: label.into(),
            domain: BoxDomain::whole(dim_in),
            focus: Vec::new(),
            fd_order: FD_MAX_ORDER,
        }
    }

    /// Net from a value closure only; derivatives by finite differences.
    pub fn from_value_fn<F>(dim_in: usize, dim_out: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Net {
            map: Arc::new(ValueFnMap {
                dim_in,
                dim_out,
                f: Box::new(f),
            }),
            label: label.into(),
            domain: BoxDomain::whole(dim_in),
            focus: Vec::new(),
            fd_order: FD_MAX_ORDER,
        }
    }

    /// Identity map on ℝⁿ, constant in ε.
    pub fn identity(dim: usize) -> Self {
        Self::from_jet_fn(dim, dim, UNLIMITED, "id", |_, x| x.to_vec())
    }

    /// Constant point `q`, constant in ε.
    pub fn constant_point(dim_in: usize, q: Vec<f64>) -> Self {
        let m = q.len();
        Self::from_jet_fn(dim_in, m, UNLIMITED, "const", move |_, x| {
            let sh = x.first().map(|j| j.shape().clone()).unwrap_or_else(|| jet::shape(0, 0));
            q.iter().map(|&v| Jet::constant(&sh, v)).collect()
        })
    }

    pub fn with_domain(mut self, domain: BoxDomain) -> Result<Self> {
        if domain.dim() != self.dim_in() {
            return Err(Error::DimensionMismatch("domain dimension".into()));
        }
        self.domain = domain;
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Declare locations (in source coordinates) of ε-scale features; sampling
    /// of compact sets zooms in around them.
    pub fn with_focus(mut self, focus: Vec<Vec<f64>>) -> Self {
        self.focus = focus;
        self
    }

    pub fn with_fd_order(mut self, order: usize) -> Self {
        self.fd_order = order.min(FD_MAX_ORDER);
        self
    }

    pub fn map(&self) -> &Arc<dyn NetMap> {
        &self.map
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn focus(&self) -> &[Vec<f64>] {
        &self.focus
    }

    pub fn dim_in(&self) -> usize {
        self.map.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.map.dim_out()
    }

    pub fn analytic_order(&self) -> usize {
        self.map.analytic_order()
    }

    pub fn fd_order(&self) -> usize {
        self.fd_order
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "point has {} coordinates, net `{}` expects {}",
                x.len(),
                self.label,
                self.dim_in()
            )));
        }
        if !self.domain.contains(x) {
            return Err(Error::OutsideDomain { point: x.to_vec() });
        }
        Ok(())
    }

    pub fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let v = self.map.eval(eps, x)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("`{}` at eps={eps}, x={x:?}", self.label)));
        }
        Ok(v)
    }

    /// All partial derivatives up to `order` at `x`, one jet per output.
    pub fn jets(&self, eps: f64, x: &[f64], order: usize) -> Result<Vec<J>> {
        self.check_point(x)?;
        let seeds = Jet::seed(x, order);
        self.jets_at(eps, &seeds)
    }

    /// Compose the slice at `eps` with input jets.
    pub fn jets_at(&self, eps: f64, x: &[J]) -> Result<Vec<J>> {
        if x.len() != self.dim_in() {
            return Err(Error::DimensionMismatch(format!(
                "{} input jets for net `{}` with dim_in {}",
                x.len(),
                self.label,
                self.dim_in()
            )));
        }
        let a: Vec<f64> = x.iter().map(|j| j.value()).collect();
        if !self.domain.contains(&a) {
            return Err(Error::OutsideDomain { point: a });
        }
        let out = map_jets(self.map.as_ref(), eps, x, self.fd_order)?;
        if out.iter().any(|j| !j.is_finite()) {
            return Err(Error::NonFinite(format!("jets of `{}` at eps={eps}, x={a:?}", self.label)));
        }
        Ok(out)
    }

    /// `∂^α u_ε(x)` componentwise.
    pub fn eval_jet(&self, eps: f64, x: &[f64], alpha: &[u8]) -> Result<Vec<f64>> {
        if alpha.len() != self.dim_in() {
            return Err(Error::DimensionMismatch("multi-index length".into()));
        }
        let order: usize = alpha.iter().map(|&a| a as usize).sum();
        if order > self.analytic_order().max(self.fd_order) {
            return Err(Error::OrderUnreachable {
                requested: order,
                analytic: self.analytic_order(),
                fd: self.fd_order,
            });
        }
        Ok(self
            .jets(eps, x, order)?
            .iter()
            .map(|j| j.derivative(alpha))
            .collect())
    }

    /// Finite-difference route regardless of analytic availability.
    pub fn eval_jet_fd(&self, eps: f64, x: &[f64], alpha: &[u8]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let order: usize = alpha.iter().map(|&a| a as usize).sum();
        if order > self.fd_order {
            return Err(Error::OrderUnreachable {
                requested: order,
                analytic: 0,
                fd: self.fd_order,
            });
        }
        let polys = fd_taylor(self.map.as_ref(), eps, x, order)?;
        Ok(polys.iter().map(|p| p.derivative(alpha)).collect())
    }

    pub fn at(&self, eps: f64) -> SmoothMapHandle {
        SmoothMapHandle {
            net: self.clone(),
            eps,
        }
    }
}

/// A single smooth map `u_ε` at a fixed ε.
#[derive(Clone, Debug)]
pub struct SmoothMapHandle {
    net: Net,
    eps: f64,
}

impl SmoothMapHandle {
    /// ε-independent map from expressions.
    pub fn from_exprs(exprs: &[&str], vars: &[&str]) -> Result<Self> {
        Ok(Net::from_exprs(exprs, vars, "map")?.at(1.0))
    }

    pub fn dim_in(&self) -> usize {
        self.net.dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.net.dim_out()
    }

    /// Analytic jet order; `0` means finite-difference fallback only.
    pub fn k_max(&self) -> usize {
        self.net.analytic_order()
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.eval(self.eps, x)
    }

    pub fn jet_eval(&self, x: &[f64], alpha: &[u8]) -> Result<Vec<f64>> {
        self.net.eval_jet(self.eps, x, alpha)
    }

    pub fn jets_at(&self, x: &[J]) -> Result<Vec<J>> {
        self.net.jets_at(self.eps, x)
    }

    /// The constant-in-ε net `ε ↦ this map`.
    pub fn to_constant_net(&self) -> Net {
        let frozen = FrozenMap {
            inner: self.net.clone(),
            eps: self.eps,
        };
        Net {
            map: Arc::new(frozen),
            label: format!("{}@{}", self.net.label, self.eps),
            domain: self.net.domain.clone(),
            focus: Vec::new(),
            fd_order: self.net.fd_order,
        }
    }
}

/// Scalar or vector net of numbers `(r_ε)_ε`.
#[derive(Clone)]
pub struct GeneralizedNumber {
    at: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>,
    dim: usize,
}

impl fmt::Debug for GeneralizedNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GeneralizedNumber(d={})", self.dim)
    }
}

impl GeneralizedNumber {
    pub fn new<F: Fn(f64) -> Vec<f64> + Send + Sync + 'static>(dim: usize, f: F) -> Self {
        GeneralizedNumber { at: Arc::new(f), dim }
    }

    pub fn scalar<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Self::new(1, move |e| vec![f(e)])
    }

    pub fn constant(v: Vec<f64>) -> Self {
        let d = v.len();
        Self::new(d, move |_| v.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, eps: f64) -> Vec<f64> {
        (self.at)(eps)
    }
}

// ----- map implementations -------------------------------------------------

pub struct ExprMap {
    exprs: Vec<Expr>,
    dim_in: usize,
}

impl ExprMap {
    pub fn new(exprs: Vec<Expr>, dim_in: usize) -> Self {
        ExprMap { exprs, dim_in }
    }
}

impl NetMap for ExprMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.exprs.len()
    }
    fn analytic_order(&self) -> usize {
        UNLIMITED
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.exprs.iter().map(|e| e.eval(x, eps)).collect())
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        let sh = x.first().map(|j| j.shape().clone()).unwrap_or_else(|| jet::shape(0, 0));
        Some(Ok(self.exprs.iter().map(|e| e.eval_jet(x, eps, &sh)).collect()))
    }
}

type JetFn = Box<dyn Fn(f64, &[J]) -> Result<Vec<J>> + Send + Sync>;
type ValueFn = Box<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;

struct JetFnMap {
    dim_in: usize,
    dim_out: usize,
    order: usize,
    f: JetFn,
}

impl NetMap for JetFnMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn analytic_order(&self) -> usize {
        self.order
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        let sh = jet::shape(x.len(), 0);
        let seeds: Vec<J> = x.iter().map(|&v| Jet::constant(&sh, v)).collect();
        Ok((self.f)(eps, &seeds)?.iter().map(|j| j.value()).collect())
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        Some((self.f)(eps, x))
    }
}

struct ValueFnMap {
    dim_in: usize,
    dim_out: usize,
    f: ValueFn,
}

impl NetMap for ValueFnMap {
    fn dim_in(&self) -> usize {
        self.dim_in
    }
    fn dim_out(&self) -> usize {
        self.dim_out
    }
    fn analytic_order(&self) -> usize {
        0
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(eps, x))
    }
}

struct FrozenMap {
    inner: Net,
    eps: f64,
}

impl NetMap for FrozenMap {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.inner.dim_out()
    }
    fn analytic_order(&self) -> usize {
        self.inner.analytic_order()
    }
    fn eval(&self, _eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        self.inner.map.eval(self.eps, x)
    }
    fn eval_jet(&self, _eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        self.inner.map.eval_jet(self.eps, x)
    }
}

/// Order reachable by `net` through either route.
fn reachable(net: &Net) -> usize {
    net.analytic_order().max(net.fd_order)
}

struct ComposeMap {
    outer: Net,
    inner: Net,
}

impl NetMap for ComposeMap {
    fn dim_in(&self) -> usize {
        self.inner.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.outer.dim_out()
    }
    fn analytic_order(&self) -> usize {
        reachable(&self.outer).min(reachable(&self.inner))
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        let y = self.inner.map.eval(eps, x)?;
        if !self.outer.domain.contains(&y) {
            return Err(Error::OutsideDomain { point: y });
        }
        self.outer.map.eval(eps, &y)
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        let y = match map_jets(self.inner.map.as_ref(), eps, x, self.inner.fd_order) {
            Ok(y) => y,
            Err(e) => return Some(Err(e)),
        };
        let yv: Vec<f64> = y.iter().map(|j| j.value()).collect();
        if !self.outer.domain.contains(&yv) {
            return Some(Err(Error::OutsideDomain { point: yv }));
        }
        Some(map_jets(self.outer.map.as_ref(), eps, &y, self.outer.fd_order))
    }
}

/// Slicewise composition `outer_ε ∘ inner_ε`.
pub fn compose_nets(outer: &Net, inner: &Net) -> Result<Net> {
    if inner.dim_out() != outer.dim_in() {
        return Err(Error::DimensionMismatch(format!(
            "inner `{}` has dim_out {}, outer `{}` has dim_in {}",
            inner.label,
            inner.dim_out(),
            outer.label,
            outer.dim_in()
        )));
    }
    Ok(Net {
        map: Arc::new(ComposeMap {
            outer: outer.clone(),
            inner: inner.clone(),
        }),
        label: format!("{}∘{}", outer.label, inner.label),
        domain: inner.domain.clone(),
        focus: composed_focus(outer, inner),
        fd_order: outer.fd_order.min(inner.fd_order),
    })
}

// Outer focus points are kept as hints in source coordinates; the ε-scale
// patches around them still catch near-identity shifts of the inner map.
fn composed_focus(outer: &Net, inner: &Net) -> Vec<Vec<f64>> {
    let mut focus = inner.focus.clone();
    if outer.dim_in() == inner.dim_in() {
        for f in &outer.focus {
            if !focus.contains(f) {
                focus.push(f.clone());
            }
        }
    }
    focus
}

struct LinearMap {
    terms: Vec<(f64, Net)>,
}

impl NetMap for LinearMap {
    fn dim_in(&self) -> usize {
        self.terms[0].1.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.terms[0].1.dim_out()
    }
    fn analytic_order(&self) -> usize {
        self.terms.iter().map(|(_, n)| reachable(n)).min().unwrap_or(0)
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim_out()];
        for (c, n) in &self.terms {
            for (o, v) in out.iter_mut().zip(n.map.eval(eps, x)?) {
                *o += c * v;
            }
        }
        Ok(out)
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        let mut out: Option<Vec<J>> = None;
        for (c, n) in &self.terms {
            let js = match map_jets(n.map.as_ref(), eps, x, n.fd_order) {
                Ok(js) => js,
                Err(e) => return Some(Err(e)),
            };
            out = Some(match out {
                None => js.iter().map(|j| j.scale(*c)).collect(),
                Some(acc) => acc.iter().zip(&js).map(|(a, j)| a + &j.scale(*c)).collect(),
            });
        }
        out.map(Ok)
    }
}

/// `Σ coeffs[i] · nets[i]`, slicewise.
pub fn linear_combination(nets: &[Net], coeffs: &[f64]) -> Result<Net> {
    if nets.is_empty() {
        return Err(Error::EmptyList);
    }
    if nets.len() != coeffs.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} nets, {} coefficients",
            nets.len(),
            coeffs.len()
        )));
    }
    let (di, dout) = (nets[0].dim_in(), nets[0].dim_out());
    if nets.iter().any(|n| n.dim_in() != di || n.dim_out() != dout) {
        return Err(Error::DimensionMismatch("nets differ in dimensions".into()));
    }
    let mut domain = nets[0].domain.clone();
    for n in &nets[1..] {
        domain = domain
            .intersect(&n.domain)
            .ok_or_else(|| Error::DimensionMismatch("disjoint domains".into()))?;
    }
    let label = nets
        .iter()
        .zip(coeffs)
        .map(|(n, c)| format!("{c}·{}", n.label))
        .collect::<Vec<_>>()
        .join(" + ");
    let mut focus: Vec<Vec<f64>> = Vec::new();
    for n in nets {
        for f in &n.focus {
            if !focus.contains(f) {
                focus.push(f.clone());
            }
        }
    }
    Ok(Net {
        map: Arc::new(LinearMap {
            terms: nets.iter().cloned().zip(coeffs.iter().copied()).map(|(n, c)| (c, n)).collect(),
        }),
        label,
        domain,
        focus,
        fd_order: nets.iter().map(|n| n.fd_order).min().unwrap_or(FD_MAX_ORDER),
    })
}

/// Jets of `∂_var` of the net's components, composed with input jets `x`.
pub(crate) fn partial_jets(net: &Net, eps: f64, x: &[J], var: usize) -> Result<Vec<J>> {
    derivative_jets(|s| map_jets(net.map.as_ref(), eps, s, net.fd_order), x, var)
}

/// Jets of `∂_var f` composed with input jets `x`, for any `f` acting on jets.
pub(crate) fn derivative_jets<F>(f: F, x: &[J], var: usize) -> Result<Vec<J>>
where
    F: Fn(&[J]) -> Result<Vec<J>>,
{
    let order = x.first().map(|j| j.order()).unwrap_or(0);
    let a: Vec<f64> = x.iter().map(|j| j.value()).collect();
    let seeds = Jet::seed(&a, order + 1);
    let full = f(&seeds)?;
    let sh = jet::shape(a.len(), order);
    let polys: Vec<J> = full
        .iter()
        .map(|f| {
            let coeffs = sh
                .indices()
                .iter()
                .map(|alpha| {
                    let mut shifted = alpha.clone();
                    shifted[var] += 1;
                    f.coeff(&shifted) * shifted[var] as f64
                })
                .collect();
            Jet::from_coeffs(&sh, coeffs)
        })
        .collect();
    Ok(polys.iter().map(|p| Jet::compose_taylor(p, x)).collect())
}

struct PartialMap {
    net: Net,
    var: usize,
}

impl NetMap for PartialMap {
    fn dim_in(&self) -> usize {
        self.net.dim_in()
    }
    fn dim_out(&self) -> usize {
        self.net.dim_out()
    }
    fn analytic_order(&self) -> usize {
        reachable(&self.net).saturating_sub(1)
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        let seeds = Jet::seed(x, 0);
        let j = partial_jets(&self.net, eps, &seeds, self.var)?;
        Ok(j.iter().map(|v| v.value()).collect())
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        Some(partial_jets(&self.net, eps, x, self.var))
    }
}

/// Net of first partials `∂_var u_ε`.
pub fn partial(net: &Net, var: usize) -> Result<Net> {
    if var >= net.dim_in() {
        return Err(Error::DimensionMismatch(format!("no variable {var}")));
    }
    Ok(Net {
        map: Arc::new(PartialMap {
            net: net.clone(),
            var,
        }),
        label: format!("∂{var}({})", net.label),
        domain: net.domain.clone(),
        focus: net.focus.clone(),
        fd_order: net.fd_order.saturating_sub(1),
    })
}

/// Net of Jacobian matrices `(∂_j u_ε^i)`, row-major with `dim_out` rows.
pub fn jacobian(net: &Net) -> Result<Net> {
    if reachable(net) == 0 {
        return Err(Error::JetsUnavailable(net.label.clone()));
    }
    let (n, m) = (net.dim_in(), net.dim_out());
    let inner = net.clone();
    let order = reachable(net) - 1;
    let j = Net::try_from_jet_fn(n, m * n, order, format!("D({})", net.label), move |eps, x| {
        let cols = (0..n).map(|v| partial_jets(&inner, eps, x, v)).collect::<Result<Vec<_>>>()?;
        Ok((0..m).flat_map(|i| cols.iter().map(move |c| c[i].clone())).collect())
    });
    Ok(Net {
        domain: net.domain.clone(),
        focus: net.focus.clone(),
        fd_order: net.fd_order.saturating_sub(1),
        ..j
    })
}

struct DirectionalMap {
    net: Net,
    field: Net,
}

impl NetMap for DirectionalMap {
    fn dim_in(&self) -> usize {
        self.net.dim_in()
    }
    fn dim_out(&self) -> usize {
        1
    }
    fn analytic_order(&self) -> usize {
        reachable(&self.net).saturating_sub(1).min(reachable(&self.field))
    }
    fn eval(&self, eps: f64, x: &[f64]) -> Result<Vec<f64>> {
        let seeds = Jet::seed(x, 0);
        match self.eval_jet(eps, &seeds) {
            Some(r) => r.map(|v| v.iter().map(|j| j.value()).collect()),
            None => unreachable!(),
        }
    }
    fn eval_jet(&self, eps: f64, x: &[J]) -> Option<Result<Vec<J>>> {
        let run = || -> Result<Vec<J>> {
            let xi = map_jets(self.field.map.as_ref(), eps, x, self.field.fd_order)?;
            let mut acc: Option<J> = None;
            for (i, xi_i) in xi.iter().enumerate() {
                let d = partial_jets(&self.net, eps, x, i)?;
                let term = xi_i * &d[0];
                acc = Some(match acc {
                    None => term,
                    Some(a) => a + term,
                });
            }
            Ok(vec![acc.expect("at least one variable")])
        };
        Some(run())
    }
}

/// Lie derivative `L_ξ u_ε = Σ ξⁱ ∂_i u_ε` of a scalar net along a vector field.
pub fn directional_derivative(net: &Net, field: &SmoothMapHandle) -> Result<Net> {
    if net.dim_out() != 1 {
        return Err(Error::DimensionMismatch("directional derivative needs a scalar net".into()));
    }
    let n = net.dim_in();
    if field.dim_in() != n || field.dim_out() != n {
        return Err(Error::DimensionMismatch(format!(
            "field must map R^{n} to R^{n}, got R^{} to R^{}",
            field.dim_in(),
            field.dim_out()
        )));
    }
    Ok(Net {
        map: Arc::new(DirectionalMap {
            net: net.clone(),
            field: field.to_constant_net(),
        }),
        label: format!("L({})", net.label),
        domain: net.domain.clone(),
        focus: net.focus.clone(),
        fd_order: net.fd_order.saturating_sub(1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn eval_jet_examples() {
        let sq = Net::from_exprs(&["x^2"], &["x"], "sq").unwrap();
        assert_eq!(sq.eval_jet(0.1, &[3.0], &[1]).unwrap(), vec![6.0]);
        let osc = Net::from_exprs(&["sin(x/eps)"], &["x"], "osc").unwrap();
        assert!((osc.eval_jet(0.01, &[0.0], &[1]).unwrap()[0] - 100.0).abs() < 1e-10);
        let neg = Net::from_exprs(&["exp(-1/eps)*x"], &["x"], "neg").unwrap();
        assert_eq!(neg.eval_jet(0.5, &[1.0], &[0]).unwrap()[0], (-2.0f64).exp());
    }

    #[test]
    fn order_unreachable_for_fd_only_nets() {
        let n = Net::from_value_fn(1, 1, "sampled", |_, x| vec![x[0].sin()]);
        assert!(n.eval_jet(0.5, &[0.2], &[3]).is_ok());
        assert!(matches!(
            n.eval_jet(0.5, &[0.2], &[4]),
            Err(Error::OrderUnreachable { requested: 4, .. })
        ));
    }

    #[test]
    fn nonfinite_and_domain_errors() {
        let n = Net::from_exprs(&["1/x"], &["x"], "inv").unwrap();
        assert!(matches!(n.eval(0.5, &[0.0]), Err(Error::NonFinite(_))));
        let b = n.with_domain(BoxDomain::cube(1, 1.0, 2.0)).unwrap();
        assert!(matches!(b.eval(0.5, &[0.5]), Err(Error::OutsideDomain { .. })));
    }

    #[test]
    fn compose_examples() {
        let id = Net::identity(1);
        let shift = Net::from_exprs(&["y+eps"], &["y"], "shift").unwrap();
        let c = compose_nets(&shift, &id).unwrap();
        assert_eq!(c.eval(0.25, &[1.0]).unwrap(), vec![1.25]);

        let sq = Net::from_exprs(&["y^2"], &["y"], "sq").unwrap();
        let lin = Net::from_exprs(&["eps*x"], &["x"], "lin").unwrap();
        let c = compose_nets(&sq, &lin).unwrap();
        let e: f64 = 0.3;
        assert!((c.eval_jet(e, &[1.0], &[1]).unwrap()[0] - 2.0 * e * e).abs() < 1e-15);

        let s = Net::from_exprs(&["sin(y)"], &["y"], "sin").unwrap();
        let r = Net::from_exprs(&["x/eps"], &["x"], "r").unwrap();
        let c = compose_nets(&s, &r).unwrap();
        assert_eq!(c.eval_jet(0.01, &[0.0], &[2]).unwrap()[0], 0.0);
    }

    #[test]
    fn compose_dimension_mismatch() {
        let a = Net::from_exprs(&["x", "x"], &["x"], "a").unwrap();
        let b = Net::from_exprs(&["x"], &["x"], "b").unwrap();
        assert!(matches!(compose_nets(&b, &a), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn compose_with_fd_only_outer() {
        let outer = Net::from_value_fn(1, 1, "cube", |_, y| vec![y[0].powi(3)]);
        let inner = Net::from_exprs(&["2*x"], &["x"], "dbl").unwrap();
        let c = compose_nets(&outer, &inner).unwrap();
        // d/dx (2x)^3 = 24 x^2
        let d = c.eval_jet(0.5, &[1.0], &[1]).unwrap()[0];
        assert!(rel(d, 24.0) < 1e-8, "{d}");
    }

    #[test]
    fn directional_examples() {
        let u = Net::from_exprs(&["x^2"], &["x"], "u").unwrap();
        let one = SmoothMapHandle::from_exprs(&["1"], &["x"]).unwrap();
        let d = directional_derivative(&u, &one).unwrap();
        assert_eq!(d.eval(0.5, &[1.5]).unwrap(), vec![3.0]);

        let c = Net::from_exprs(&["eps"], &["x"], "c").unwrap();
        let any = SmoothMapHandle::from_exprs(&["x^3+1"], &["x"]).unwrap();
        let d = directional_derivative(&c, &any).unwrap();
        assert_eq!(d.eval(0.5, &[0.7]).unwrap(), vec![0.0]);

        let xy = Net::from_exprs(&["x*y"], &["x", "y"], "xy").unwrap();
        let swap = SmoothMapHandle::from_exprs(&["y", "x"], &["x", "y"]).unwrap();
        let d = directional_derivative(&xy, &swap).unwrap();
        assert_eq!(d.eval(0.1, &[2.0, 3.0]).unwrap(), vec![13.0]);
        // jets of the Lie derivative: d/dx (x² + y²) = 2x
        assert_eq!(d.eval_jet(0.1, &[2.0, 3.0], &[1, 0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn directional_dimension_checks() {
        let v = Net::from_exprs(&["x", "x"], &["x"], "v").unwrap();
        let one = SmoothMapHandle::from_exprs(&["1"], &["x"]).unwrap();
        assert!(directional_derivative(&v, &one).is_err());
        let u = Net::from_exprs(&["x*y"], &["x", "y"], "u").unwrap();
        assert!(directional_derivative(&u, &one).is_err());
    }

    #[test]
    fn linear_combination_examples() {
        let id = Net::from_exprs(&["x"], &["x"], "id").unwrap();
        let pert = Net::from_exprs(&["eps^8*sin(x)"], &["x"], "p").unwrap();
        let s = linear_combination(&[id.clone(), pert], &[1.0, 1.0]).unwrap();
        let e: f64 = 0.5;
        assert_eq!(s.eval(e, &[1.0]).unwrap()[0], 1.0 + e.powi(8) * 1f64.sin());

        let u = Net::from_exprs(&["sin(x/eps)*exp(x)"], &["x"], "u").unwrap();
        let z = linear_combination(&[u.clone(), u], &[1.0, -1.0]).unwrap();
        for &x in &[-0.3, 0.0, 0.8] {
            assert_eq!(z.eval(0.01, &[x]).unwrap(), vec![0.0]);
        }

        let one = Net::from_exprs(&["1"], &["x"], "one").unwrap();
        let five = linear_combination(&[one.clone(), one], &[2.0, 3.0]).unwrap();
        assert_eq!(five.eval(0.3, &[9.0]).unwrap(), vec![5.0]);
        assert!(matches!(linear_combination(&[], &[]), Err(Error::EmptyList)));
    }

    #[test]
    fn jet_zero_index_equals_eval() {
        let u = Net::from_exprs(&["sin(x/eps)*y", "exp(x*y)"], &["x", "y"], "u").unwrap();
        for &(e, x, y) in &[(0.1, 0.3, -0.2), (0.01, -1.0, 0.5)] {
            let v = u.eval(e, &[x, y]).unwrap();
            let j = u.eval_jet(e, &[x, y], &[0, 0]).unwrap();
            assert_eq!(v, j);
        }
    }

    #[test]
    fn partial_net_matches_direct_derivative() {
        let u = Net::from_exprs(&["x^3*y"], &["x", "y"], "u").unwrap();
        let p = partial(&u, 0).unwrap();
        assert_eq!(p.eval(0.5, &[2.0, 3.0]).unwrap(), vec![36.0]);
        // ∂_y of ∂_x(x³y) = 3x²
        assert_eq!(p.eval_jet(0.5, &[2.0, 3.0], &[0, 1]).unwrap(), vec![12.0]);
    }

    #[test]
    fn frozen_handle_is_constant_in_eps() {
        let u = Net::from_exprs(&["x/eps"], &["x"], "u").unwrap();
        let frozen = u.at(0.5).to_constant_net();
        assert_eq!(frozen.eval(0.01, &[1.0]).unwrap(), vec![2.0]);
        assert_eq!(frozen.eval(0.9, &[1.0]).unwrap(), vec![2.0]);
    }
}
