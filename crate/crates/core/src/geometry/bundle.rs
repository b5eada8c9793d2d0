//! Vector bundles over an [`Atlas`]: fiber transition matrices, the cocycle
//! check, and the fiber-linear test homomorphisms to `ℝ × ℝ^{m′}`.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::atlas::{coordinate_names, grid_points, sampling_box, Atlas, ManifoldPoint};
use super::bank::{box_cutoff, ScalarTest};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::jet::Jet;
use crate::net::{derivative_jets, BoxDomain, J};

#[derive(Debug, Clone)]
pub enum FiberKind {
    /// `E = X × ℝ^m` with identity transitions.
    Trivial,
    /// Tangent bundle: transitions are Jacobians of the chart changes.
    Tangent,
    /// Matrices given as expressions in the source chart's coordinates.
    Custom(BTreeMap<(usize, usize), Arc<Vec<Expr>>>),
}

#[derive(Debug, Clone)]
pub struct VBAtlas {
    base: Atlas,
    fiber_dim: usize,
    kind: FiberKind,
}

impl VBAtlas {
    pub fn trivial(base: Atlas, fiber_dim: usize) -> Self {
        VBAtlas {
            base,
            fiber_dim,
            kind: FiberKind::Trivial,
        }
    }

    pub fn tangent(base: Atlas) -> Self {
        let d = base.dim();
        VBAtlas {
            base,
            fiber_dim: d,
            kind: FiberKind::Tangent,
        }
    }

    /// Bundle with explicit transition matrices `φ_{to,from}` written in the
    /// coordinates of `from`; both directions must be supplied. The cocycle
    /// identity is checked before returning.
    pub fn custom(base: Atlas, fiber_dim: usize, transitions: &[(usize, usize, Vec<&str>)]) -> Result<Self> {
        let names = coordinate_names(base.dim());
        let vars: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
        let mut map = BTreeMap::new();
        for (to, from, entries) in transitions {
            if entries.len() != fiber_dim * fiber_dim {
                return Err(Error::DimensionMismatch("transition matrix entries".into()));
            }
            let exprs = entries.iter().map(|e| Expr::parse(e, &vars)).collect::<Result<Vec<_>>>()?;
            map.insert((*to, *from), Arc::new(exprs));
        }
        let vb = VBAtlas {
            base,
            fiber_dim,
            kind: FiberKind::Custom(map),
        };
        vb.check_cocycle()?;
        Ok(vb)
    }

    pub fn base(&self) -> &Atlas {
        &self.base
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    pub fn kind(&self) -> &FiberKind {
        &self.kind
    }

    /// `φ_{to,from}(x)` mapping fiber coordinates of chart `from` to chart `to`
    /// over the base point with `from`-coordinates `x`.
    pub fn fiber_transition(&self, to: usize, from: usize, x: &[f64]) -> Result<DMatrix<f64>> {
        let m = self.fiber_dim;
        if to == from {
            return Ok(DMatrix::identity(m, m));
        }
        match &self.kind {
            FiberKind::Trivial => Ok(DMatrix::identity(m, m)),
            FiberKind::Tangent => {
                let seeds = Jet::seed(x, 1);
                let y = self.base.transition_jets(from, to, &seeds)?;
                Ok(DMatrix::from_fn(m, m, |i, j| {
                    let mut alpha = vec![0u8; m];
                    alpha[j] = 1;
                    y[i].derivative(&alpha)
                }))
            }
            FiberKind::Custom(map) => {
                let exprs = map
                    .get(&(to, from))
                    .ok_or_else(|| Error::AtlasMismatch(format!("no fiber transition {from}->{to}")))?;
                Ok(DMatrix::from_fn(m, m, |i, j| exprs[i * m + j].eval(x, 1.0)))
            }
        }
    }

    /// Jets of `φ_{to,from}` (row-major) composed with base jets in `from` coordinates.
    pub fn fiber_transition_jets(&self, to: usize, from: usize, x: &[J]) -> Result<Vec<J>> {
        let m = self.fiber_dim;
        let sh = x[0].shape().clone();
        let identity = || {
            (0..m * m)
                .map(|k| Jet::constant(&sh, if k / m == k % m { 1.0 } else { 0.0 }))
                .collect()
        };
        if to == from {
            return Ok(identity());
        }
        match &self.kind {
            FiberKind::Trivial => Ok(identity()),
            FiberKind::Tangent => {
                let cols = (0..m)
                    .map(|j| derivative_jets(|s| self.base.transition_jets(from, to, s), x, j))
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..m * m).map(|k| cols[k % m][k / m].clone()).collect())
            }
            FiberKind::Custom(map) => {
                let exprs = map
                    .get(&(to, from))
                    .ok_or_else(|| Error::AtlasMismatch(format!("no fiber transition {from}->{to}")))?;
                Ok(exprs.iter().map(|e| e.eval_jet(x, 1.0, &sh)).collect())
            }
        }
    }

    /// `φ_{αγ} = φ_{αβ}·φ_{βγ}` on sampled triple overlaps, tolerance 1e-9.
    pub fn check_cocycle(&self) -> Result<()> {
        let k = self.base.charts().len();
        for g in 0..k {
            let dom = sampling_box(&self.base.chart(g)?.domain, 10.0);
            for x in grid_points(&dom, 5) {
                let p = ManifoldPoint::new(g, x.clone());
                for b in 0..k {
                    let Some(xb) = self.base.map_point(&p, b)? else { continue };
                    for a in 0..k {
                        if self.base.map_point(&p, a)?.is_none() {
                            continue;
                        }
                        let direct = self.fiber_transition(a, g, &x)?;
                        let chained = self.fiber_transition(a, b, &xb)? * self.fiber_transition(b, g, &x)?;
                        let err = (&direct - &chained).amax();
                        if err > 1e-9 * (1.0 + direct.amax()) {
                            return Err(Error::Config(format!(
                                "cocycle identity fails for charts ({a},{b},{g}) at {x:?}: {err:e}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Compactly supported fiber-linear test map `E → ℝ × ℝ^{m′}` with `m′` the
/// fiber dimension: `(x, ξ) ↦ (χ(x)·x_l, χ(x)·ξ)` in one vb-chart, where `χ` is
/// the cutoff and `x_l` a chart coordinate (or `1` when `coord` is `None`).
#[derive(Debug, Clone)]
pub struct VbHomTest {
    pub id: String,
    pub chart: usize,
    pub coord: Option<usize>,
    pub cutoff: ScalarTest,
}

impl VbHomTest {
    pub fn base_part(&self, x: &[f64]) -> f64 {
        let c = self.cutoff.eval(x);
        match self.coord {
            Some(l) => c * x[l],
            None => c,
        }
    }

    pub fn base_jet(&self, x: &[J]) -> J {
        let c = self.cutoff.jet(x);
        match self.coord {
            Some(l) => &c * &x[l],
            None => c,
        }
    }

    /// Scalar factor multiplying the fiber.
    pub fn fiber_factor(&self, x: &[f64]) -> f64 {
        self.cutoff.eval(x)
    }

    pub fn fiber_factor_jet(&self, x: &[J]) -> J {
        self.cutoff.jet(x)
    }

    pub fn apply(&self, x: &[f64], xi: &[f64]) -> (f64, Vec<f64>) {
        let c = self.fiber_factor(x);
        (self.base_part(x), xi.iter().map(|v| c * v).collect())
    }
}

/// Test homomorphism localized by the box cutoff `region ± margin` inside `chart`.
pub fn make_vbhom_test(vb: &VBAtlas, chart: usize, coord: Option<usize>, region: &BoxDomain, margin: f64) -> Result<VbHomTest> {
    let domain = &vb.base().chart(chart)?.domain;
    let support = region.expanded(margin);
    let strictly_inside = (0..support.dim()).all(|i| support.lo[i] > domain.lo[i] && support.hi[i] < domain.hi[i]);
    if !strictly_inside || !(margin > 0.0) {
        return Err(Error::SupportEscapesChart { chart });
    }
    if coord.is_some_and(|l| l >= vb.base().dim()) {
        return Err(Error::DimensionMismatch("coordinate index".into()));
    }
    let cutoff = ScalarTest::new("cutoff", chart, support, box_cutoff(region, margin));
    Ok(VbHomTest {
        id: format!("vbhom{chart}/{coord:?}"),
        chart,
        coord,
        cutoff,
    })
}

/// Bank of test homomorphisms around `region`: plain cutoff plus one per
/// base coordinate, at the bank margin and at a tighter one.
pub fn vbhom_bank(vb: &VBAtlas, chart: usize, region: &BoxDomain) -> Result<Vec<VbHomTest>> {
    let margin = super::bank::bank_margin(region);
    let mut out = Vec::new();
    for m in [margin, 0.5 * margin] {
        for coord in std::iter::once(None).chain((0..vb.base().dim()).map(Some)) {
            let mut t = make_vbhom_test(vb, chart, coord, region, m)?;
            t.id = format!("{}@{m}", t.id);
            out.push(t);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::atlas::TransitionKind;

    fn two_chart_line() -> Atlas {
        let mut a = Atlas::new(1);
        let c0 = a.add_chart("a", BoxDomain::cube(1, -2.0, 2.0));
        let c1 = a.add_chart("b", BoxDomain::cube(1, -1.0, 5.0));
        a.add_transition(
            c0,
            c1,
            TransitionKind::Affine {
                matrix: vec![vec![2.0]],
                offset: vec![1.0],
            },
        )
        .unwrap();
        a
    }

    #[test]
    fn tangent_transition_is_jacobian_and_cocycle_holds() {
        let vb = VBAtlas::tangent(two_chart_line());
        assert_eq!(vb.fiber_transition(1, 0, &[0.3]).unwrap()[(0, 0)], 2.0);
        assert_eq!(vb.fiber_transition(0, 1, &[0.3]).unwrap()[(0, 0)], 0.5);
        vb.check_cocycle().unwrap();

        let mut polar = Atlas::new(2);
        let cart = polar.add_chart("cart", BoxDomain::cube(2, -3.0, 3.0));
        let p = polar.add_chart("polar", BoxDomain::new(vec![0.5, -3.0], vec![4.0, 3.0]));
        polar.add_transition(cart, p, TransitionKind::Polar).unwrap();
        let vb = VBAtlas::tangent(polar);
        vb.check_cocycle().unwrap();
        // jets of the transition matrix agree with the matrix and its derivative
        let x = [1.2, 0.7];
        let h = 1e-6;
        let j = vb.fiber_transition_jets(1, 0, &Jet::seed(&x, 1)).unwrap();
        let m0 = vb.fiber_transition(1, 0, &x).unwrap();
        let m1 = vb.fiber_transition(1, 0, &[x[0] + h, x[1]]).unwrap();
        for (k, jk) in j.iter().enumerate().take(4) {
            let (r, c) = (k / 2, k % 2);
            assert!((jk.value() - m0[(r, c)]).abs() < 1e-12);
            let fd = (m1[(r, c)] - m0[(r, c)]) / h;
            assert!((jk.derivative(&[1, 0]) - fd).abs() < 1e-4);
        }
    }

    #[test]
    fn broken_cocycle_is_rejected() {
        let ok = VBAtlas::custom(two_chart_line(), 1, &[(1, 0, vec!["exp(x)"]), (0, 1, vec!["exp(-(x-1)/2)"])]);
        assert!(ok.is_ok(), "{ok:?}");
        let bad = VBAtlas::custom(two_chart_line(), 1, &[(1, 0, vec!["2"]), (0, 1, vec!["2"])]);
        assert!(bad.is_err());
    }

    #[test]
    fn vbhom_test_examples() {
        let vb = VBAtlas::trivial(Atlas::plain(1), 2);
        let region = BoxDomain::cube(1, -0.5, 0.5);
        let t = make_vbhom_test(&vb, 0, Some(0), &region, 0.25).unwrap();
        let (b, f) = t.apply(&[0.2], &[1.0, -3.0]);
        assert_eq!(b, 0.2);
        assert_eq!(f, vec![1.0, -3.0]);
        let (b, f) = t.apply(&[2.0], &[1.0, -3.0]);
        assert_eq!(b, 0.0);
        assert_eq!(f, vec![0.0, 0.0]);
        let x = [0.6];
        let (_, f1) = t.apply(&x, &[1.0, 0.5]);
        let (_, f2) = t.apply(&x, &[2.0, 1.0]);
        assert_eq!(f2, vec![2.0 * f1[0], 2.0 * f1[1]]);

        let bounded = VBAtlas::trivial(two_chart_line(), 1);
        assert!(matches!(
            make_vbhom_test(&bounded, 0, None, &BoxDomain::cube(1, 1.5, 1.9), 0.2),
            Err(Error::SupportEscapesChart { chart: 0 })
        ));
    }
}
