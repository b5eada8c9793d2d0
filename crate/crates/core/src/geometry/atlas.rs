//! Manifolds as finite atlases of boxes with catalog transition maps and an
//! optional Riemannian metric given by expressions in chart coordinates.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::{self, Jet};
use crate::net::{BoxDomain, Net, SmoothMapHandle, J, UNLIMITED};

/// A point of the manifold in the coordinates of one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifoldPoint {
    pub chart: usize,
    pub coords: Vec<f64>,
}

impl ManifoldPoint {
    pub fn new(chart: usize, coords: Vec<f64>) -> Self {
        ManifoldPoint { chart, coords }
    }
}

/// Catalog of transition maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum TransitionKind {
    Identity,
    /// `y = A x + b`.
    Affine { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Cartesian `(x, y)` to polar `(r, θ)` with `θ ∈ (-π, π]`.
    Polar,
}

/// `atan2` on jets: rotate so the base point sits on the positive axis, then
/// expand `atan` around zero.
fn atan2_jet(y: &J, x: &J) -> J {
    let theta0 = y.value().atan2(x.value());
    let (s, c) = theta0.sin_cos();
    let xr = &x.scale(c) + &y.scale(s);
    let yr = &y.scale(c) - &x.scale(s);
    let t = &yr / &xr;
    let order = t.order();
    let mut derivs = vec![0.0; order + 1];
    let mut fact = 1.0;
    for (k, d) in derivs.iter_mut().enumerate().skip(1) {
        if k > 1 {
            fact *= (k - 1) as f64;
        }
        if k % 2 == 1 {
            *d = if (k / 2) % 2 == 0 { fact } else { -fact };
        }
    }
    t.compose_univariate(&derivs).add_scalar(theta0)
}

impl TransitionKind {
    /// Forward and inverse maps as ε-independent handles.
    pub fn handles(&self, dim: usize) -> Result<(SmoothMapHandle, SmoothMapHandle)> {
        match self {
            TransitionKind::Identity => Ok((Net::identity(dim).at(1.0), Net::identity(dim).at(1.0))),
            TransitionKind::Affine { matrix, offset } => {
                if matrix.len() != dim || matrix.iter().any(|r| r.len() != dim) || offset.len() != dim {
                    return Err(Error::DimensionMismatch("affine transition shape".into()));
                }
                let a = DMatrix::from_fn(dim, dim, |i, j| matrix[i][j]);
                let inv = a
                    .clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Config("affine transition matrix is singular".into()))?;
                let b = DVector::from_column_slice(offset);
                let binv = -(&inv * &b);
                Ok((affine_handle(a, b), affine_handle(inv, binv)))
            }
            TransitionKind::Polar => {
                if dim != 2 {
                    return Err(Error::DimensionMismatch("polar transition needs dimension 2".into()));
                }
                let fwd = Net::from_jet_fn(2, 2, UNLIMITED, "polar", |_, x| {
                    let r = (&x[0] * &x[0] + &x[1] * &x[1]).sqrt();
                    vec![r, atan2_jet(&x[1], &x[0])]
                });
                let bwd = Net::from_exprs(&["r*cos(t)", "r*sin(t)"], &["r", "t"], "cartesian")?;
                Ok((fwd.at(1.0), bwd.at(1.0)))
            }
        }
    }
}

fn affine_handle(a: DMatrix<f64>, b: DVector<f64>) -> SmoothMapHandle {
    let n = a.nrows();
    Net::from_jet_fn(n, n, UNLIMITED, "affine", move |_, x| {
        let sh = x.first().map(|j| j.shape().clone()).unwrap_or_else(|| jet::shape(0, 0));
        (0..n)
            .map(|i| {
                let mut acc = Jet::constant(&sh, b[i]);
                for (j, xj) in x.iter().enumerate() {
                    if a[(i, j)] != 0.0 {
                        acc = acc + xj.scale(a[(i, j)]);
                    }
                }
                acc
            })
            .collect()
    })
    .at(1.0)
}

#[derive(Debug, Clone)]
pub struct Chart {
    pub name: String,
    pub domain: BoxDomain,
    /// Row-major `dim × dim` metric entries in chart coordinates.
    pub metric: Option<Arc<Vec<Expr>>>,
}

#[derive(Debug, Clone)]
pub struct Transition {
    pub from: usize,
    pub to: usize,
    pub kind: TransitionKind,
    pub map: SmoothMapHandle,
}

/// Finite atlas; immutable once built.
#[derive(Debug, Clone)]
pub struct Atlas {
    dim: usize,
    charts: Vec<Chart>,
    transitions: Vec<Transition>,
}

/// Coordinates of a bounded box used for sampling an unbounded domain.
pub(crate) fn sampling_box(domain: &BoxDomain, clip: f64) -> BoxDomain {
    BoxDomain::new(
        domain.lo.iter().map(|v| v.max(-clip)).collect(),
        domain.hi.iter().map(|v| v.min(clip)).collect(),
    )
}

/// Tensor grid of `per_axis` points per coordinate, nudged off the boundary.
pub(crate) fn grid_points(region: &BoxDomain, per_axis: usize) -> Vec<Vec<f64>> {
    let n = region.dim();
    let mut out = Vec::new();
    let mut idx = vec![0usize; n];
    loop {
        out.push(
            (0..n)
                .map(|i| {
                    let t = (idx[i] as f64 + 0.5) / per_axis as f64;
                    region.lo[i] + t * (region.hi[i] - region.lo[i])
                })
                .collect(),
        );
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            idx[i] += 1;
            if idx[i] < per_axis {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
    }
}

impl Atlas {
    pub fn new(dim: usize) -> Self {
        Atlas {
            dim,
            charts: Vec::new(),
            transitions: Vec::new(),
        }
    }

    /// ℝⁿ with one global chart and the Euclidean metric.
    pub fn euclidean(dim: usize) -> Self {
        let mut a = Atlas::new(dim);
        let entries: Vec<String> = (0..dim * dim)
            .map(|k| if k / dim == k % dim { "1".into() } else { "0".into() })
            .collect();
        let refs: Vec<&str> = entries.iter().map(|s| s.as_str()).collect();
        let c = a.add_chart("global", BoxDomain::whole(dim));
        a.set_metric(c, &refs).expect("identity metric is valid");
        a
    }

    /// ℝⁿ with one global chart and no metric.
    pub fn plain(dim: usize) -> Self {
        let mut a = Atlas::new(dim);
        a.add_chart("global", BoxDomain::whole(dim));
        a
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn chart(&self, id: usize) -> Result<&Chart> {
        self.charts.get(id).ok_or(Error::PointOutsideAtlas)
    }

    pub fn chart_id(&self, name: &str) -> Option<usize> {
        self.charts.iter().position(|c| c.name == name)
    }

    pub fn add_chart(&mut self, name: impl Into<String>, domain: BoxDomain) -> usize {
        assert_eq!(domain.dim(), self.dim, "chart dimension");
        self.charts.push(Chart {
            name: name.into(),
            domain,
            metric: None,
        });
        self.charts.len() - 1
    }

    /// Metric entries as expressions in the chart's coordinates `x0, x1, …`
    /// (also `x, y, z` for dimensions up to three). Checked symmetric
    /// positive definite at sampled points.
    pub fn set_metric(&mut self, chart: usize, entries: &[&str]) -> Result<()> {
        let n = self.dim;
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!("metric needs {} entries", n * n)));
        }
        let names = coordinate_names(n);
        let vars: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let exprs = entries
            .iter()
            .map(|e| Expr::parse(e, &vars))
            .collect::<Result<Vec<_>>>()?;
        if exprs.iter().any(|e| e.uses_eps()) {
            return Err(Error::Config("metric entries may not depend on eps".into()));
        }
        let domain = self.chart(chart)?.domain.clone();
        let exprs = Arc::new(exprs);
        for p in grid_points(&sampling_box(&domain, 10.0), 5) {
            let g = metric_from(&exprs, n, &p);
            if (&g - g.transpose()).amax() > 1e-12 * (1.0 + g.amax()) {
                return Err(Error::Config(format!("metric not symmetric at {p:?}")));
            }
            if g.iter().any(|v| !v.is_finite()) || g.cholesky().is_none() {
                return Err(Error::Config(format!("metric not positive definite at {p:?}")));
            }
        }
        self.charts[chart].metric = Some(exprs);
        Ok(())
    }

    /// Register `from → to` and its inverse after checking they are mutually
    /// inverse on sampled overlap points.
    pub fn add_transition(&mut self, from: usize, to: usize, kind: TransitionKind) -> Result<()> {
        let (fwd, bwd) = kind.handles(self.dim)?;
        let (dom_from, dom_to) = (self.chart(from)?.domain.clone(), self.chart(to)?.domain.clone());
        let mut checked = 0;
        for p in grid_points(&sampling_box(&dom_from, 10.0), 7) {
            let Ok(y) = fwd.eval(&p) else { continue };
            if !dom_to.contains(&y) {
                continue;
            }
            let back = bwd.eval(&y)?;
            let err = back.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = 1.0 + p.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if err > 1e-9 * scale {
                return Err(Error::Config(format!(
                    "transitions {from}->{to} not mutually inverse at {p:?} (error {err:e})"
                )));
            }
            checked += 1;
        }
        if checked == 0 {
            return Err(Error::Config(format!("charts {from} and {to} do not overlap")));
        }
        self.transitions.retain(|t| !((t.from == from && t.to == to) || (t.from == to && t.to == from)));
        let inverse_kind = kind.clone();
        self.transitions.push(Transition {
            from,
            to,
            kind,
            map: fwd,
        });
        self.transitions.push(Transition {
            from: to,
            to: from,
            kind: inverse_kind,
            map: bwd,
        });
        Ok(())
    }

    pub fn transition(&self, from: usize, to: usize) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.from == from && t.to == to)
    }

    pub fn contains(&self, p: &ManifoldPoint) -> bool {
        self.charts
            .get(p.chart)
            .is_some_and(|c| c.domain.contains(&p.coords))
    }

    /// Coordinates of `p` in chart `to`, if `p` lies in that chart.
    pub fn map_point(&self, p: &ManifoldPoint, to: usize) -> Result<Option<Vec<f64>>> {
        if !self.contains(p) {
            return Err(Error::PointOutsideAtlas);
        }
        if p.chart == to {
            return Ok(Some(p.coords.clone()));
        }
        let Some(t) = self.transition(p.chart, to) else {
            return Ok(None);
        };
        let Ok(y) = t.map.eval(&p.coords) else {
            return Ok(None);
        };
        Ok(self.charts[to].domain.contains(&y).then_some(y))
    }

    /// Jets of the transition `from → to` composed with input jets.
    pub fn transition_jets(&self, from: usize, to: usize, x: &[J]) -> Result<Vec<J>> {
        if from == to {
            return Ok(x.to_vec());
        }
        let t = self
            .transition(from, to)
            .ok_or_else(|| Error::AtlasMismatch(format!("no transition {from}->{to}")))?;
        t.map.jets_at(x)
    }

    pub fn has_metric(&self) -> bool {
        self.charts.iter().all(|c| c.metric.is_some())
    }

    pub fn metric(&self, chart: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        let exprs = self.chart(chart)?.metric.as_ref().ok_or(Error::NoMetric)?;
        Ok(metric_from(exprs, self.dim, x))
    }

    /// Metric is constant on the chart.
    pub fn metric_is_constant(&self, chart: usize) -> Result<bool> {
        let exprs = self.chart(chart)?.metric.as_ref().ok_or(Error::NoMetric)?;
        Ok(exprs.iter().all(|e| e.is_coordinate_free()))
    }
}

fn metric_from(exprs: &[Expr], n: usize, x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| exprs[i * n + j].eval(x, 1.0))
}

/// Coordinate names accepted in atlas expressions: `x, y, z` up to three
/// dimensions, `x0, x1, …` otherwise.
pub fn coordinate_names(n: usize) -> Vec<String> {
    if n <= 3 {
        ["x", "y", "z"][..n].iter().map(|s| s.to_string()).collect()
    } else {
        (0..n).map(|i| format!("x{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn annulus_atlas() -> Atlas {
        let mut a = Atlas::new(2);
        let cart = a.add_chart("cart", BoxDomain::cube(2, -3.0, 3.0));
        let polar = a.add_chart(
            "polar",
            BoxDomain::new(vec![0.5, -3.0], vec![4.0, 3.0]),
        );
        a.set_metric(cart, &["1", "0", "0", "1"]).unwrap();
        a.set_metric(polar, &["1", "0", "0", "x^2"]).unwrap();
        a.add_transition(cart, polar, TransitionKind::Polar).unwrap();
        a
    }

    #[test]
    fn polar_transition_round_trip_and_jets() {
        let a = annulus_atlas();
        let p = ManifoldPoint::new(0, vec![-1.0, 1.0]);
        let y = a.map_point(&p, 1).unwrap().unwrap();
        assert!((y[0] - 2f64.sqrt()).abs() < 1e-14);
        assert!((y[1] - 0.75 * std::f64::consts::PI).abs() < 1e-14);
        // ∂θ/∂x = -y/r², ∂²θ/∂x² = 2xy/r⁴
        let seeds = Jet::seed(&[-1.0, 1.0], 2);
        let j = a.transition_jets(0, 1, &seeds).unwrap();
        assert!((j[1].derivative(&[1, 0]) + 0.5).abs() < 1e-14);
        assert!((j[1].derivative(&[2, 0]) + 0.5).abs() < 1e-14);
        // origin is outside the polar chart
        assert_eq!(a.map_point(&ManifoldPoint::new(0, vec![0.1, 0.0]), 1).unwrap(), None);
    }

    #[test]
    fn affine_transition_and_errors() {
        let mut a = Atlas::new(1);
        let c0 = a.add_chart("a", BoxDomain::cube(1, -1.0, 1.0));
        let c1 = a.add_chart("b", BoxDomain::cube(1, 0.0, 5.0));
        a.add_transition(
            c0,
            c1,
            TransitionKind::Affine {
                matrix: vec![vec![2.0]],
                offset: vec![1.0],
            },
        )
        .unwrap();
        assert_eq!(a.map_point(&ManifoldPoint::new(1, vec![2.0]), 0).unwrap(), Some(vec![0.5]));
        assert!(matches!(
            a.map_point(&ManifoldPoint::new(0, vec![4.0]), 1),
            Err(Error::PointOutsideAtlas)
        ));
        let singular = TransitionKind::Affine {
            matrix: vec![vec![0.0]],
            offset: vec![0.0],
        };
        assert!(a.add_transition(c0, c1, singular).is_err());
    }

    #[test]
    fn metric_validation() {
        let mut a = Atlas::plain(2);
        assert!(a.set_metric(0, &["1", "2", "0", "1"]).is_err());
        assert!(a.set_metric(0, &["-1", "0", "0", "1"]).is_err());
        assert!(a.set_metric(0, &["1+x^2", "0", "0", "exp(y)"]).is_ok());
        assert!(!a.metric_is_constant(0).unwrap());
        assert!(matches!(Atlas::plain(1).metric(0, &[0.0]), Err(Error::NoMetric)));
    }
}
