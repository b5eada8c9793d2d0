//! Nets of vector bundle homomorphisms and hybrid nets (maps into a bundle
//! over another manifold): moderateness, vb-equivalence, tangent maps, point
//! insertion, composition, representative alignment and the vector space
//! `Hom_u`.
//!
//! Fiber parts are stored as row-major matrices per chart pair; a hybrid net
//! is the one-column case.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::asymptotics::AsymptoticVerdict;
use crate::error::{Error, Result};
use crate::geometry::atlas::{Atlas, ManifoldPoint};
use crate::geometry::bundle::{vbhom_bank, VBAtlas, VbHomTest};
use crate::geometry::compact::CompactSet;
use crate::geometry::pou::partition_of_unity;
use crate::jet::Jet;
use crate::manifold_maps::{
    check_cbounded, check_equivalent, check_moderate, compose, gmpoint_equivalent, order_norms, per_eps, stepwise_point,
    CheckConfig, EquivalenceReport, GeneralizedManifoldPoint, ManifoldNet, ModerateReport, PointValueReport, RouteVerdict,
};
use crate::net::{compose_nets, jacobian, linear_combination, BoxDomain, Net, J, UNLIMITED};

/// Point of a vector bundle in one vb-chart: base coordinates and fiber vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbPoint {
    pub chart: usize,
    pub base: Vec<f64>,
    pub fiber: Vec<f64>,
}

impl VbPoint {
    pub fn new(chart: usize, base: Vec<f64>, fiber: Vec<f64>) -> Self {
        VbPoint { chart, base, fiber }
    }

    pub fn base_point(&self) -> ManifoldPoint {
        ManifoldPoint::new(self.chart, self.base.clone())
    }
}

fn mat_mul(a: &[J], ar: usize, ac: usize, b: &[J], bc: usize) -> Vec<J> {
    (0..ar * bc)
        .map(|k| {
            let (i, j) = (k / bc, k % bc);
            let mut s = &a[i * ac] * &b[j];
            for l in 1..ac {
                s = &s + &(&a[i * ac + l] * &b[l * bc + j]);
            }
            s
        })
        .collect()
}

/// Operator norm induced by the max norm: largest absolute row sum.
fn op_norm(m: &[f64], rows: usize, cols: usize) -> f64 {
    (0..rows)
        .map(|r| m[r * cols..(r + 1) * cols].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Relative size below which a difference is floating-point rounding.
const ROUNDING: f64 = 1e-13;

/// `d` with rounding-level values (relative to `scale`) treated as exact zero.
fn settle(d: f64, scale: f64) -> f64 {
    if d <= ROUNDING * scale {
        0.0
    } else {
        d
    }
}

/// Largest operator norm of `∂^α M` per order `0..=k`.
fn matrix_order_norms(entries: &[J], rows: usize, cols: usize, k: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; k + 1];
    for alpha in entries[0].shape().indices() {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg > k {
            continue;
        }
        let d: Vec<f64> = entries.iter().map(|e| e.derivative(alpha)).collect();
        let n = op_norm(&d, rows, cols);
        out[deg] = out[deg].max(if n.is_nan() { f64::INFINITY } else { n });
    }
    out
}

/// Fiber part over a base net: per chart pair a net of `rows × cols` matrices.
#[derive(Clone)]
struct Fibered {
    base: ManifoldNet,
    fiber: BTreeMap<(usize, usize), Net>,
    rows: usize,
    cols: usize,
}

struct Local {
    chart: usize,
    base: Vec<J>,
    fiber: Vec<J>,
}

impl Fibered {
    fn add_fiber(&mut self, s: usize, t: usize, net: Net) -> Result<()> {
        let base_rep = self
            .base
            .rep(s, t)
            .ok_or_else(|| Error::AtlasMismatch(format!("no base representative for charts ({s}, {t})")))?;
        if net.dim_in() != base_rep.dim_in() || net.dim_out() != self.rows * self.cols {
            return Err(Error::DimensionMismatch(format!(
                "fiber net R^{} -> R^{}, expected R^{} -> R^{}",
                net.dim_in(),
                net.dim_out(),
                base_rep.dim_in(),
                self.rows * self.cols
            )));
        }
        let domain = net
            .domain()
            .intersect(base_rep.domain())
            .ok_or_else(|| Error::AtlasMismatch("fiber domain misses the chart".into()))?;
        self.fiber.insert((s, t), net.with_domain(domain)?);
        Ok(())
    }

    /// Base and fiber representatives out of source chart `s`.
    fn rep_from(&self, s: usize) -> Result<(usize, &Net, &Net)> {
        let (t, b) = self.base.rep_from(s)?;
        let f = self
            .fiber
            .get(&(s, t))
            .ok_or_else(|| Error::AtlasMismatch(format!("no fiber representative for charts ({s}, {t})")))?;
        Ok((t, b, f))
    }

    fn local(&self, s: usize, eps: f64, x: &[J]) -> Result<Local> {
        let (t, b, f) = self.rep_from(s)?;
        Ok(Local {
            chart: t,
            base: b.jets_at(eps, x)?,
            fiber: f.jets_at(eps, x)?,
        })
    }

    /// Values at a point: base image chart, base coordinates, fiber matrix.
    fn eval(&self, eps: f64, p: &ManifoldPoint) -> Result<(usize, Vec<f64>, Vec<f64>)> {
        let y = self.base.eval_point(eps, p)?;
        let f = self
            .fiber
            .get(&(p.chart, y.chart))
            .ok_or_else(|| Error::AtlasMismatch(format!("no fiber representative for charts ({}, {})", p.chart, y.chart)))?;
        Ok((y.chart, y.coords, f.eval(eps, &p.coords)?))
    }

    fn check_compatibility(&self, target: &VBAtlas, l: &CompactSet, cfg: &CheckConfig) -> Result<()> {
        self.base.check_compatibility(l, &cfg.grid)?;
        let reps: Vec<_> = self.fiber.iter().filter(|((s, _), _)| *s == l.chart).collect();
        for &eps in cfg.grid.values() {
            for x in l.points() {
                for (i, ((_, t1), f1)) in reps.iter().enumerate() {
                    for ((_, t2), f2) in &reps[i + 1..] {
                        let b1 = self.base.rep(l.chart, *t1).expect("base rep exists");
                        let (Ok(y1), Ok(m1), Ok(m2)) = (b1.eval(eps, &x), f1.eval(eps, &x), f2.eval(eps, &x)) else {
                            continue;
                        };
                        let p1 = ManifoldPoint::new(*t1, y1.clone());
                        if !target.base().contains(&p1) || target.base().map_point(&p1, *t2)?.is_none() {
                            continue;
                        }
                        let phi = target.fiber_transition(*t2, *t1, &y1)?;
                        let a = DMatrix::from_row_slice(self.rows, self.cols, &m1);
                        let b = DMatrix::from_row_slice(self.rows, self.cols, &m2);
                        let err = (phi * a - &b).amax();
                        if err > 1e-9 * (1.0 + b.amax()) {
                            return Err(Error::AtlasMismatch(format!(
                                "fiber representatives over charts {t1} and {t2} disagree at eps={eps}, x={x:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VbModerateReport {
    pub base: ModerateReport,
    /// Worst verdict of `f̂ ∘ u_ε` over the test homomorphisms.
    pub fiber_bank: AsymptoticVerdict,
    /// Chart estimate cross-check on the fiber matrices.
    pub fiber_chart: AsymptoticVerdict,
    pub bank_size: usize,
}

impl VbModerateReport {
    pub fn moderate(&self) -> bool {
        self.base.moderate() && self.fiber_bank.classification.is_moderate() && self.fiber_chart.classification.is_moderate()
    }

    pub fn verdict(&self) -> AsymptoticVerdict {
        self.base
            .verdict
            .clone()
            .worst(self.base.chart_verdict.clone())
            .worst(self.fiber_bank.clone())
            .worst(self.fiber_chart.clone())
    }
}

fn fibered_moderate(f: &Fibered, target: &VBAtlas, l: &CompactSet, cfg: &CheckConfig) -> Result<VbModerateReport> {
    let cb = check_cbounded(&f.base, l, cfg)?;
    let Some((chart, witness)) = cb.witness else {
        return Err(Error::NotCBounded(f.base.label().to_string()));
    };
    let base = check_moderate(&f.base, l, cfg)?;
    let bank = vbhom_bank(target, chart, &witness)?;
    let kk = cfg.k_max;
    let focus = f.base.focus(l.chart);
    let per = per_eps(&cfg.grid, |eps| {
        let mut acc = vec![vec![0.0f64; kk + 1]; bank.len() + 1];
        for x in l.points_at(eps, &focus) {
            let loc = match f.local(l.chart, eps, &Jet::seed(&x, kk)) {
                Ok(loc) => loc,
                Err(Error::NonFinite(_)) => {
                    acc.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v = f64::INFINITY));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let y = target.base().transition_jets(loc.chart, chart, &loc.base)?;
            let m = if loc.chart == chart {
                loc.fiber
            } else {
                let phi = target.fiber_transition_jets(chart, loc.chart, &loc.base)?;
                mat_mul(&phi, f.rows, f.rows, &loc.fiber, f.cols)
            };
            for (t, test) in bank.iter().enumerate() {
                let c = test.fiber_factor_jet(&y);
                let cm: Vec<J> = m.iter().map(|e| &c * e).collect();
                let b = order_norms(&test.base_jet(&y), kk);
                let n = matrix_order_norms(&cm, f.rows, f.cols, kk);
                for o in 0..=kk {
                    acc[t][o] = acc[t][o].max(b[o].max(n[o]));
                }
            }
            for (o, v) in matrix_order_norms(&m, f.rows, f.cols, kk).into_iter().enumerate() {
                acc[bank.len()][o] = acc[bank.len()][o].max(v);
            }
        }
        Ok(acc)
    })?;
    let classify = |t: usize| -> Result<AsymptoticVerdict> {
        let mut worst: Option<AsymptoticVerdict> = None;
        for o in 0..=kk {
            let s: Vec<f64> = per.iter().map(|a| a[t][o]).collect();
            let v = cfg.classify_growth(&s)?.with_order_cap(kk);
            worst = Some(match worst {
                None => v,
                Some(w) => w.worst(v),
            });
        }
        Ok(worst.expect("k_max >= 0"))
    };
    let mut fiber_bank: Option<AsymptoticVerdict> = None;
    for t in 0..bank.len() {
        let v = classify(t)?;
        fiber_bank = Some(match fiber_bank {
            None => v,
            Some(w) => w.worst(v),
        });
    }
    Ok(VbModerateReport {
        base,
        fiber_bank: fiber_bank.ok_or(Error::EmptyList)?,
        fiber_chart: classify(bank.len())?,
        bank_size: bank.len(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VbEquivalenceReport {
    pub equivalent: bool,
    pub base: EquivalenceReport,
    /// Order-0 fiber difference in vb-chart coordinates.
    pub fiber_chart: RouteVerdict,
    /// Fiber difference through the test homomorphisms.
    pub fiber_bank: RouteVerdict,
    /// Base images never shared a chart, so the fiber test had nothing to compare.
    pub fiber_vacuous: bool,
}

struct FiberPair {
    yu: Vec<f64>,
    mu: Vec<f64>,
    yv: Vec<f64>,
    mv: Vec<f64>,
}

fn fibered_equivalent(u: &Fibered, v: &Fibered, target: &VBAtlas, l: &CompactSet, cfg: &CheckConfig) -> Result<VbEquivalenceReport> {
    let base = check_equivalent(&u.base, &v.base, l, cfg)?;
    let mut focus = u.base.focus(l.chart);
    for f in v.base.focus(l.chart) {
        if !focus.contains(&f) {
            focus.push(f);
        }
    }
    let (chart, _, _) = u.rep_from(l.chart)?;
    let per: Vec<Vec<Option<FiberPair>>> = per_eps(&cfg.grid, |eps| {
        l.points_at(eps, &focus)
            .into_iter()
            .map(|x| {
                let p = ManifoldPoint::new(l.chart, x);
                let (cu, yu, mu) = u.eval(eps, &p)?;
                let (cv, yv, mv) = v.eval(eps, &p)?;
                let to = |c: usize, y: &[f64], m: Vec<f64>| -> Result<Option<(Vec<f64>, Vec<f64>)>> {
                    if c == chart {
                        return Ok(Some((y.to_vec(), m)));
                    }
                    let Some(y2) = target.base().map_point(&ManifoldPoint::new(c, y.to_vec()), chart)? else {
                        return Ok(None);
                    };
                    let phi = target.fiber_transition(chart, c, y)?;
                    let mm = phi * DMatrix::from_row_slice(u.rows, u.cols, &m);
                    Ok(Some((y2, mm.transpose().as_slice().to_vec())))
                };
                Ok(match (to(cu, &yu, mu)?, to(cv, &yv, mv)?) {
                    (Some((yu, mu)), Some((yv, mv))) => Some(FiberPair { yu, mu, yv, mv }),
                    _ => None,
                })
            })
            .collect()
    })?;
    let start = cfg.grid.small_half_start();
    let vacuous = per[start..].iter().all(|pts| pts.iter().all(|p| p.is_none()));

    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    let chart_s: Vec<f64> = per
        .iter()
        .map(|pts| {
            pts.iter()
                .flatten()
                .map(|p| {
                    let scale = op_norm(&p.mu, u.rows, u.cols) + op_norm(&p.mv, u.rows, u.cols);
                    settle(op_norm(&diff(&p.mu, &p.mv), u.rows, u.cols), scale)
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let chart_v = cfg.classify(&chart_s)?;

    let hull_pts: Vec<&[f64]> = per[start..]
        .iter()
        .flat_map(|pts| pts.iter().flatten().flat_map(|p| [p.yu.as_slice(), p.yv.as_slice()]))
        .collect();
    let region = BoxDomain::hull(target.base().dim(), hull_pts).unwrap_or_else(|| l.region.clone());
    let bank: Vec<VbHomTest> = vbhom_bank(target, chart, &region)?;
    let mut bank_ok = true;
    let mut worst: Option<(AsymptoticVerdict, String)> = None;
    for test in &bank {
        let s: Vec<f64> = per
            .iter()
            .map(|pts| {
                pts.iter()
                    .flatten()
                    .map(|p| {
                        let (cu, cv) = (test.fiber_factor(&p.yu), test.fiber_factor(&p.yv));
                        let d: Vec<f64> = p.mu.iter().zip(&p.mv).map(|(a, b)| cu * a - cv * b).collect();
                        let scale = cu.abs() * op_norm(&p.mu, u.rows, u.cols) + cv.abs() * op_norm(&p.mv, u.rows, u.cols);
                        let (bu, bv) = (test.base_part(&p.yu), test.base_part(&p.yv));
                        settle(op_norm(&d, u.rows, u.cols), scale).max(settle((bu - bv).abs(), bu.abs() + bv.abs()))
                    })
                    .fold(0.0, f64::max)
            })
            .collect();
        let v = cfg.classify(&s)?;
        if !cfg.negligible(&v) {
            bank_ok = false;
        }
        worst = Some(match worst {
            Some((w, id)) if w.clone().worst(v.clone()) == w => (w, id),
            _ => (v, test.id.clone()),
        });
    }
    let (bank_v, bank_id) = worst.ok_or(Error::EmptyList)?;
    let chart_eq = base.equivalent && (vacuous || cfg.negligible(&chart_v));
    let bank_eq = base.bank.equivalent && (vacuous || bank_ok);
    if chart_eq != bank_eq {
        return Err(Error::InconsistentTests(format!(
            "`{}` vs `{}`: chart route {chart_eq}, test-homomorphism route {bank_eq}",
            u.base.label(),
            v.base.label()
        )));
    }
    Ok(VbEquivalenceReport {
        equivalent: chart_eq,
        fiber_chart: RouteVerdict {
            equivalent: cfg.negligible(&chart_v),
            verdict: chart_v,
            detail: format!("vb-chart {chart}"),
        },
        fiber_bank: RouteVerdict {
            equivalent: bank_ok,
            verdict: bank_v,
            detail: bank_id,
        },
        base,
        fiber_vacuous: vacuous,
    })
}

/// Order-`k` chart route: all derivatives up to `k` of the base and fiber
/// differences negligible.
fn fibered_order_k(u: &Fibered, v: &Fibered, l: &CompactSet, k: usize, cfg: &CheckConfig) -> Result<bool> {
    let mut focus = u.base.focus(l.chart);
    focus.extend(v.base.focus(l.chart));
    let per = per_eps(&cfg.grid, |eps| {
        let mut acc = vec![0.0f64; k + 1];
        for x in l.points_at(eps, &focus) {
            let seeds = Jet::seed(&x, k);
            let (a, b) = (u.local(l.chart, eps, &seeds)?, v.local(l.chart, eps, &seeds)?);
            if a.chart != b.chart {
                return Err(Error::AtlasMismatch("higher-order comparison needs a common target chart".into()));
            }
            let db: Vec<J> = a.base.iter().zip(&b.base).map(|(p, q)| p - q).collect();
            let df: Vec<J> = a.fiber.iter().zip(&b.fiber).map(|(p, q)| p - q).collect();
            let nf = matrix_order_norms(&df, u.rows, u.cols, k);
            let (fa, fb) = (matrix_order_norms(&a.fiber, u.rows, u.cols, k), matrix_order_norms(&b.fiber, u.rows, u.cols, k));
            for ((c, p), q) in db.iter().zip(&a.base).zip(&b.base) {
                let (n, np, nq) = (order_norms(c, k), order_norms(p, k), order_norms(q, k));
                for o in 0..=k {
                    acc[o] = acc[o].max(settle(n[o], np[o] + nq[o]));
                }
            }
            for o in 0..=k {
                acc[o] = acc[o].max(settle(nf[o], fa[o] + fb[o]));
            }
        }
        Ok(acc)
    })?;
    for o in 0..=k {
        let s: Vec<f64> = per.iter().map(|a| a[o]).collect();
        if !cfg.negligible(&cfg.classify(&s)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Net of homomorphisms `E → F` over a base net `X → Y`: `(x, ξ) ↦ (u̲_ε(x), M_ε(x)·ξ)`.
#[derive(Clone)]
pub struct HomNet {
    label: String,
    source: VBAtlas,
    target: VBAtlas,
    inner: Fibered,
}

impl fmt::Debug for HomNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HomNet({})", self.label)
    }
}

fn check_bases(source: &Atlas, target: &Atlas, base: &ManifoldNet) -> Result<()> {
    if base.source().dim() != source.dim() || base.target().dim() != target.dim() {
        return Err(Error::AtlasMismatch("base net does not match the bundle base atlases".into()));
    }
    Ok(())
}

impl HomNet {
    pub fn new(label: impl Into<String>, source: VBAtlas, target: VBAtlas, base: ManifoldNet) -> Result<Self> {
        check_bases(source.base(), target.base(), &base)?;
        let (rows, cols) = (target.fiber_dim(), source.fiber_dim());
        Ok(HomNet {
            label: label.into(),
            source,
            target,
            inner: Fibered {
                base,
                fiber: BTreeMap::new(),
                rows,
                cols,
            },
        })
    }

    /// Fiber matrices over charts `(s, t)`, row-major `target_fiber × source_fiber`.
    pub fn with_fiber(mut self, s: usize, t: usize, net: Net) -> Result<Self> {
        self.inner.add_fiber(s, t, net)?;
        Ok(self)
    }

    /// Homomorphism of trivial bundles over ℝⁿ → ℝᵐ from expressions.
    pub fn from_exprs(base: &[&str], fiber: &[&str], vars: &[&str], source_fiber: usize, target_fiber: usize, label: &str) -> Result<Self> {
        let b = ManifoldNet::from_exprs(base, vars, label)?;
        let source = VBAtlas::trivial(b.source().clone(), source_fiber);
        let target = VBAtlas::trivial(b.target().clone(), target_fiber);
        HomNet::new(label, source, target, b)?.with_fiber(0, 0, Net::from_exprs(fiber, vars, label)?)
    }

    /// Identity homomorphism of `vb`.
    pub fn identity(vb: &VBAtlas) -> Self {
        let base = ManifoldNet::identity(vb.base());
        let m = vb.fiber_dim();
        let n = vb.base().dim();
        let mut out = HomNet::new("id", vb.clone(), vb.clone(), base).expect("same atlas");
        for c in 0..vb.base().charts().len() {
            let id: Vec<f64> = (0..m * m).map(|k| if k / m == k % m { 1.0 } else { 0.0 }).collect();
            out.inner
                .add_fiber(c, c, Net::constant_point(n, id))
                .expect("dimensions match");
        }
        out
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &VBAtlas {
        &self.source
    }

    pub fn target(&self) -> &VBAtlas {
        &self.target
    }

    pub fn base(&self) -> &ManifoldNet {
        &self.inner.base
    }

    pub fn fiber_rep(&self, s: usize, t: usize) -> Option<&Net> {
        self.inner.fiber.get(&(s, t))
    }

    pub fn fiber_matrix(&self, eps: f64, p: &ManifoldPoint) -> Result<DMatrix<f64>> {
        let (_, _, m) = self.inner.eval(eps, p)?;
        Ok(DMatrix::from_row_slice(self.inner.rows, self.inner.cols, &m))
    }

    pub fn eval(&self, eps: f64, e: &VbPoint) -> Result<VbPoint> {
        if e.fiber.len() != self.inner.cols {
            return Err(Error::DimensionMismatch("fiber vector length".into()));
        }
        let (c, y, m) = self.inner.eval(eps, &e.base_point())?;
        let xi = DMatrix::from_row_slice(self.inner.rows, self.inner.cols, &m) * DMatrix::from_column_slice(e.fiber.len(), 1, &e.fiber);
        Ok(VbPoint::new(c, y, xi.as_slice().to_vec()))
    }

    /// Chart-pair representatives agree under base and fiber transitions.
    pub fn check_compatibility(&self, l: &CompactSet, cfg: &CheckConfig) -> Result<()> {
        self.inner.check_compatibility(&self.target, l, cfg)
    }
}

pub fn check_vb_moderate(u: &HomNet, l: &CompactSet, cfg: &CheckConfig) -> Result<VbModerateReport> {
    fibered_moderate(&u.inner, &u.target, l, cfg)
}

fn require_moderate<F>(label: &str, f: F) -> Result<()>
where
    F: FnOnce() -> Result<VbModerateReport>,
{
    match f() {
        Ok(r) if r.moderate() => Ok(()),
        Ok(_) | Err(Error::NotCBounded(_)) => Err(Error::NotModerate(label.to_string())),
        Err(e) => Err(e),
    }
}

/// vb-equivalence on `L`: base equivalence plus order-0 fiber differences,
/// by vb-chart and by test homomorphisms; the two routes must agree.
pub fn check_vb_equivalent(u: &HomNet, v: &HomNet, l: &CompactSet, cfg: &CheckConfig) -> Result<VbEquivalenceReport> {
    same_shape(&u.inner, &v.inner)?;
    require_moderate(&u.label, || check_vb_moderate(u, l, cfg))?;
    require_moderate(&v.label, || check_vb_moderate(v, l, cfg))?;
    fibered_equivalent(&u.inner, &v.inner, &u.target, l, cfg)
}

/// vb-`k`-equivalence in one chart pair: all derivatives up to order `k`.
pub fn check_vb_equivalent_order(u: &HomNet, v: &HomNet, l: &CompactSet, k: usize, cfg: &CheckConfig) -> Result<bool> {
    same_shape(&u.inner, &v.inner)?;
    fibered_order_k(&u.inner, &v.inner, l, k, cfg)
}

fn same_shape(u: &Fibered, v: &Fibered) -> Result<()> {
    if u.rows != v.rows || u.cols != v.cols {
        return Err(Error::AtlasMismatch("fiber dimensions differ".into()));
    }
    Ok(())
}

/// `Tu`: base `u`, fiber matrices the Jacobians of the chart representatives.
pub fn tangent_map(u: &ManifoldNet) -> Result<HomNet> {
    let source = VBAtlas::tangent(u.source().clone());
    let target = VBAtlas::tangent(u.target().clone());
    let mut out = HomNet::new(format!("T{}", u.label()), source, target, u.clone())?;
    for ((s, t), net) in u.reps() {
        out.inner.add_fiber(*s, *t, jacobian(net)?)?;
    }
    Ok(out)
}

/// Compactly supported generalized point of a vector bundle.
#[derive(Clone)]
pub struct VbGeneralizedPoint {
    pub label: String,
    at: Arc<dyn Fn(f64) -> VbPoint + Send + Sync>,
    /// Support of the base points.
    pub support: CompactSet,
    pub eps0: f64,
}

impl fmt::Debug for VbGeneralizedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VbGeneralizedPoint({})", self.label)
    }
}

impl VbGeneralizedPoint {
    pub fn new<F>(label: impl Into<String>, support: CompactSet, f: F) -> Self
    where
        F: Fn(f64) -> VbPoint + Send + Sync + 'static,
    {
        VbGeneralizedPoint {
            label: label.into(),
            at: Arc::new(f),
            support,
            eps0: 1.0,
        }
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn at(&self, eps: f64) -> VbPoint {
        (self.at)(eps)
    }

    pub fn base_point(&self) -> GeneralizedManifoldPoint {
        let this = self.clone();
        GeneralizedManifoldPoint::new(format!("π({})", self.label), self.support.clone(), move |e| this.at(e).base_point())
            .with_eps0(self.eps0)
    }

    /// Base stays in its support and the fiber norm is moderate; returns the
    /// fiber-norm verdict.
    pub fn check(&self, vb: &VBAtlas, cfg: &CheckConfig) -> Result<AsymptoticVerdict> {
        self.base_point().check_support(vb.base(), &cfg.grid)?;
        let s = cfg
            .grid
            .sample(|e| Ok(self.at(e).fiber.iter().map(|v| v.abs()).fold(0.0, f64::max)))?;
        let v = cfg.classify_growth(&s)?;
        if !v.classification.is_moderate() {
            return Err(Error::NotModerate(self.label.clone()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VbPointEquivalence {
    pub equivalent: bool,
    pub base_equivalent: bool,
    /// `None` when the base points never shared a chart.
    pub fiber: Option<AsymptoticVerdict>,
}

/// `ẽ ~_vb ẽ′`: equivalent base points and negligible fiber difference where
/// both base points lie in a common chart.
pub fn vb_points_equivalent(a: &VbGeneralizedPoint, b: &VbGeneralizedPoint, vb: &VBAtlas, cfg: &CheckConfig) -> Result<VbPointEquivalence> {
    let base_equivalent = gmpoint_equivalent(&a.base_point(), &b.base_point(), vb.base(), cfg)?;
    let mut colocated = Vec::with_capacity(cfg.grid.len());
    let mut s = Vec::with_capacity(cfg.grid.len());
    for &e in cfg.grid.values() {
        let (pa, pb) = (a.at(e), b.at(e));
        let mapped = vb.base().map_point(&pb.base_point(), pa.chart)?;
        match mapped {
            Some(_) => {
                let phi = vb.fiber_transition(pa.chart, pb.chart, &pb.base)?;
                let fb = phi * DMatrix::from_column_slice(pb.fiber.len(), 1, &pb.fiber);
                s.push(pa.fiber.iter().zip(fb.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
                colocated.push(true);
            }
            None => {
                s.push(0.0);
                colocated.push(false);
            }
        }
    }
    let start = cfg.grid.small_half_start();
    let fiber = if colocated[start..].iter().any(|&c| c) {
        Some(cfg.classify(&s)?)
    } else {
        None
    };
    let fiber_ok = fiber.as_ref().is_none_or(|v| cfg.negligible(v));
    Ok(VbPointEquivalence {
        equivalent: base_equivalent && fiber_ok,
        base_equivalent,
        fiber,
    })
}

fn value_point(
    label: String,
    inner: &Fibered,
    target: &VBAtlas,
    base_value: GeneralizedManifoldPoint,
    f: impl Fn(f64) -> Result<VbPoint> + Send + Sync + 'static,
    cfg: &CheckConfig,
) -> Result<VbGeneralizedPoint> {
    let rows = inner.rows;
    let chart = base_value.support.chart;
    let out = VbGeneralizedPoint::new(label, base_value.support.clone(), move |e| {
        f(e).unwrap_or_else(|_| VbPoint::new(chart, vec![f64::NAN; base_value.support.dim()], vec![f64::NAN; rows]))
    })
    .with_eps0(base_value.eps0);
    out.check(target, cfg)?;
    Ok(out)
}

/// `u(ẽ) = [(u_ε(e_ε))_ε]`.
pub fn vb_point_insert(u: &HomNet, e: &VbGeneralizedPoint, cfg: &CheckConfig) -> Result<VbGeneralizedPoint> {
    e.check(&u.source, cfg)?;
    require_moderate(&u.label, || check_vb_moderate(u, &e.support, cfg))?;
    let base_value = crate::manifold_maps::point_value(&u.inner.base, &e.base_point(), cfg)?;
    let (net, pt) = (u.clone(), e.clone());
    value_point(
        format!("{}({})", u.label, e.label),
        &u.inner,
        &u.target,
        base_value,
        move |eps| net.eval(eps, &pt.at(eps)),
        cfg,
    )
}

fn compose_fibered(inner: &Fibered, outer: &Fibered, outer_is_matrix_on_inner_fiber: bool) -> Result<Fibered> {
    let base = compose(&inner.base, &outer.base)?;
    let mut fiber = BTreeMap::new();
    for ((s, t), inner_base) in inner.base.reps() {
        for ((t2, z), outer_fiber) in &outer.fiber {
            if t != t2 || !base.reps().contains_key(&(*s, *z)) {
                continue;
            }
            let Some(inner_fiber) = inner.fiber.get(&(*s, *t)) else { continue };
            let (ib, of, inf) = (inner_base.clone(), outer_fiber.clone(), inner_fiber.clone());
            let (r, c_mid, c) = (outer.rows, outer.cols, inner.cols);
            let net = if outer_is_matrix_on_inner_fiber {
                Net::try_from_jet_fn(ib.dim_in(), r * c, UNLIMITED, format!("{}·{}", of.label(), inf.label()), move |eps, x| {
                    let y = ib.jets_at(eps, x)?;
                    let mo = of.jets_at(eps, &y)?;
                    let mi = inf.jets_at(eps, x)?;
                    Ok(mat_mul(&mo, r, c_mid, &mi, c))
                })
                .with_domain(inner_base.domain().clone())?
                .with_focus(inner_base.focus().to_vec())
            } else {
                compose_nets(outer_fiber, inner_base)?
            };
            fiber.insert((*s, *z), net);
        }
    }
    if fiber.is_empty() {
        return Err(Error::AtlasMismatch("no matching intermediate charts".into()));
    }
    let (rows, cols) = if outer_is_matrix_on_inner_fiber {
        (outer.rows, inner.cols)
    } else {
        (outer.rows, outer.cols)
    };
    Ok(Fibered { base, fiber, rows, cols })
}

/// `v ∘ u` for homomorphisms `u: E → F`, `v: F → G`; fiber matrices multiply
/// through the intermediate charts.
pub fn compose_homs(u: &HomNet, v: &HomNet) -> Result<HomNet> {
    if u.target.fiber_dim() != v.source.fiber_dim() || u.target.base().dim() != v.source.base().dim() {
        return Err(Error::AtlasMismatch(format!("`{}` does not feed `{}`", u.label, v.label)));
    }
    Ok(HomNet {
        label: format!("{}∘{}", v.label, u.label),
        source: u.source.clone(),
        target: v.target.clone(),
        inner: compose_fibered(&u.inner, &v.inner, true)?,
    })
}

/// [`compose_homs`] with the c-boundedness precondition and a post-hoc
/// vb-moderateness check on `L`.
pub fn compose_homs_checked(u: &HomNet, v: &HomNet, l: &CompactSet, cfg: &CheckConfig) -> Result<HomNet> {
    if !check_cbounded(u.base(), l, cfg)?.cbounded {
        return Err(Error::NotCBounded(u.label.clone()));
    }
    let c = compose_homs(u, v)?;
    require_moderate(&c.label, || check_vb_moderate(&c, l, cfg))?;
    Ok(c)
}

/// Net of maps `X → F` into a vector bundle over `Y`: `x ↦ (u̲_ε(x), s_ε(x))`.
#[derive(Clone)]
pub struct HybridNet {
    label: String,
    target: VBAtlas,
    inner: Fibered,
}

impl fmt::Debug for HybridNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "HybridNet({})", self.label)
    }
}

impl HybridNet {
    pub fn new(label: impl Into<String>, target: VBAtlas, base: ManifoldNet) -> Result<Self> {
        if base.target().dim() != target.base().dim() {
            return Err(Error::AtlasMismatch("base net does not match the bundle base".into()));
        }
        let rows = target.fiber_dim();
        Ok(HybridNet {
            label: label.into(),
            target,
            inner: Fibered {
                base,
                fiber: BTreeMap::new(),
                rows,
                cols: 1,
            },
        })
    }

    pub fn with_fiber(mut self, s: usize, t: usize, net: Net) -> Result<Self> {
        self.inner.add_fiber(s, t, net)?;
        Ok(self)
    }

    /// Hybrid net `ℝⁿ → ℝᵐ × ℝ^k` (trivial target bundle) from expressions.
    pub fn from_exprs(base: &[&str], fiber: &[&str], vars: &[&str], label: &str) -> Result<Self> {
        let b = ManifoldNet::from_exprs(base, vars, label)?;
        let target = VBAtlas::trivial(b.target().clone(), fiber.len());
        HybridNet::new(label, target, b)?.with_fiber(0, 0, Net::from_exprs(fiber, vars, label)?)
    }

    /// Generalized section of `vb` over the identity base, given on one chart.
    pub fn section(vb: &VBAtlas, chart: usize, fiber: Net) -> Result<Self> {
        let label = fiber.label().to_string();
        HybridNet::new(label, vb.clone(), ManifoldNet::identity(vb.base()))?.with_fiber(chart, chart, fiber)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn target(&self) -> &VBAtlas {
        &self.target
    }

    pub fn base(&self) -> &ManifoldNet {
        &self.inner.base
    }

    pub fn fiber_rep(&self, s: usize, t: usize) -> Option<&Net> {
        self.inner.fiber.get(&(s, t))
    }

    pub fn eval(&self, eps: f64, p: &ManifoldPoint) -> Result<VbPoint> {
        let (c, y, m) = self.inner.eval(eps, p)?;
        Ok(VbPoint::new(c, y, m))
    }

    pub fn check_compatibility(&self, l: &CompactSet, cfg: &CheckConfig) -> Result<()> {
        self.inner.check_compatibility(&self.target, l, cfg)
    }
}

pub fn check_hybrid_moderate(u: &HybridNet, l: &CompactSet, cfg: &CheckConfig) -> Result<VbModerateReport> {
    fibered_moderate(&u.inner, &u.target, l, cfg)
}

/// Order-0 hybrid equivalence (base plus fiber vectors), cross-checked by the
/// test-homomorphism route.
pub fn check_hybrid_equivalent(u: &HybridNet, v: &HybridNet, l: &CompactSet, cfg: &CheckConfig) -> Result<VbEquivalenceReport> {
    same_shape(&u.inner, &v.inner)?;
    require_moderate(&u.label, || check_hybrid_moderate(u, l, cfg))?;
    require_moderate(&v.label, || check_hybrid_moderate(v, l, cfg))?;
    fibered_equivalent(&u.inner, &v.inner, &u.target, l, cfg)
}

pub fn check_hybrid_equivalent_order(u: &HybridNet, v: &HybridNet, l: &CompactSet, k: usize, cfg: &CheckConfig) -> Result<bool> {
    same_shape(&u.inner, &v.inner)?;
    fibered_order_k(&u.inner, &v.inner, l, k, cfg)
}

/// `u(p̃) = [(u_ε(p_ε))_ε]` as a generalized bundle point.
pub fn hybrid_point_value(u: &HybridNet, p: &GeneralizedManifoldPoint, cfg: &CheckConfig) -> Result<VbGeneralizedPoint> {
    let base_value = crate::manifold_maps::point_value(&u.inner.base, p, cfg)?;
    let (net, pt) = (u.clone(), p.clone());
    value_point(
        format!("{}({})", u.label, p.label),
        &u.inner,
        &u.target,
        base_value,
        move |eps| net.eval(eps, &pt.at(eps)),
        cfg,
    )
}

/// `u(p̃) ~_vb v(p̃)` at an adversarial point of `L` and every supplied point.
pub fn check_hybrid_pointvalue_equality(
    u: &HybridNet,
    v: &HybridNet,
    l: &CompactSet,
    points: &[GeneralizedManifoldPoint],
    cfg: &CheckConfig,
) -> Result<PointValueReport> {
    let mut focus = u.base().focus(l.chart);
    focus.extend(v.base().focus(l.chart));
    let chosen = per_eps(&cfg.grid, |eps| {
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for x in l.points_at(eps, &focus) {
            let p = ManifoldPoint::new(l.chart, x.clone());
            let (a, b) = (u.eval(eps, &p)?, v.eval(eps, &p)?);
            let d = if a.chart == b.chart {
                a.base
                    .iter()
                    .zip(&b.base)
                    .chain(a.fiber.iter().zip(&b.fiber))
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max)
            } else {
                f64::INFINITY
            };
            if d > best.0 {
                best = (d, x);
            }
        }
        Ok(best.1)
    })?;
    let mut all = vec![stepwise_point("adversarial", l, &cfg.grid, chosen)];
    all.extend(points.iter().cloned());
    for p in &all {
        let a = hybrid_point_value(u, p, cfg)?;
        let b = hybrid_point_value(v, p, cfg)?;
        if !vb_points_equivalent(&a, &b, &u.target, cfg)?.equivalent {
            return Ok(PointValueReport {
                equal: false,
                separated_by: Some(p.label.clone()),
                points_tested: all.len(),
            });
        }
    }
    Ok(PointValueReport {
        equal: true,
        separated_by: None,
        points_tested: all.len(),
    })
}

/// `v ∘ u` for `u: X → Y` and a hybrid `v: Y → G`.
pub fn compose_hybrid(u: &ManifoldNet, v: &HybridNet) -> Result<HybridNet> {
    let inner_u = Fibered {
        base: u.clone(),
        fiber: u.reps().keys().map(|&k| (k, Net::constant_point(u.source().dim(), vec![]))).collect(),
        rows: 0,
        cols: 0,
    };
    Ok(HybridNet {
        label: format!("{}∘{}", v.label, u.label()),
        target: v.target.clone(),
        inner: compose_fibered(&inner_u, &v.inner, false)?,
    })
}

/// `w ∘ v` for a hybrid `v: Y → G` and a homomorphism `w: G → H`.
pub fn compose_hybrid_hom(v: &HybridNet, w: &HomNet) -> Result<HybridNet> {
    if v.target.fiber_dim() != w.source.fiber_dim() || v.target.base().dim() != w.source.base().dim() {
        return Err(Error::AtlasMismatch(format!("`{}` does not feed `{}`", v.label, w.label)));
    }
    Ok(HybridNet {
        label: format!("{}∘{}", w.label, v.label),
        target: w.target.clone(),
        inner: compose_fibered(&v.inner, &w.inner, true)?,
    })
}

/// [`compose_hybrid`] with a post-hoc hybrid-moderateness check on `L`.
pub fn compose_hybrid_checked(u: &ManifoldNet, v: &HybridNet, l: &CompactSet, cfg: &CheckConfig) -> Result<HybridNet> {
    if !check_cbounded(u, l, cfg)?.cbounded {
        return Err(Error::NotCBounded(u.label().to_string()));
    }
    let c = compose_hybrid(u, v)?;
    require_moderate(&c.label, || check_hybrid_moderate(&c, l, cfg))?;
    Ok(c)
}

/// Result of [`align_hom`] / [`align_hybrid`].
#[derive(Debug, Clone)]
pub struct Aligned<T> {
    pub net: T,
    /// Largest grid ε from which on (downwards) the base equals the target
    /// representative; above it the input is passed through.
    pub threshold: f64,
    /// Ball radius of the cover.
    pub radius: f64,
}

fn align_fibered(v: &Fibered, target: &VBAtlas, u_rep: &ManifoldNet, l: &CompactSet, cover: Option<&[CompactSet]>, cfg: &CheckConfig) -> Result<(Fibered, f64, f64)> {
    let s = l.chart;
    let (tu, u_net) = u_rep.rep_from(s)?;
    let (tv, v_base, v_fib) = v.rep_from(s)?;
    if !check_equivalent(&v.base, u_rep, l, cfg)?.equivalent {
        return Err(Error::AlignmentFailed(format!("base of `{}` is not equivalent to `{}`", v.base.label(), u_rep.label())));
    }
    let cb = check_cbounded(u_rep, l, cfg)?;
    let Some((wchart, witness)) = cb.witness else {
        return Err(Error::NotCBounded(u_rep.label().to_string()));
    };
    let atlas = target.base();
    let width = witness.widths().iter().cloned().fold(0.0, f64::max).max(1e-3);
    let default_cover = [CompactSet {
        id: "witness".into(),
        chart: wchart,
        region: witness.expanded(0.05 * width),
        resolution: 5,
        jitter: 0,
        seed: 0,
    }];
    let cores = cover.unwrap_or(&default_cover);
    let region = CompactSet {
        id: "witness".into(),
        chart: wchart,
        region: witness.clone(),
        resolution: 9,
        jitter: 0,
        seed: 0,
    };
    let pou = partition_of_unity(atlas, cores, &region).map_err(|_| Error::NoRadius)?;
    // r: half the distance from each cutoff support to its chart boundary
    let mut radius = f64::INFINITY;
    for j in 0..pou.len() {
        let sup = pou.support(j);
        let dom = &atlas.chart(pou.chart_of(j))?.domain;
        for i in 0..atlas.dim() {
            radius = radius.min(0.5 * (sup.lo[i] - dom.lo[i])).min(0.5 * (dom.hi[i] - sup.hi[i]));
        }
    }
    if !(radius > 0.0) {
        return Err(Error::NoRadius);
    }

    // threshold: below it every sampled ṽ̲_ε(x) lies within r of u_ε(x) in
    // each chart whose cutoff is active at u_ε(x)
    let focus = u_rep.focus(s);
    let ok = per_eps(&cfg.grid, |eps| {
        for x in l.points_at(eps, &focus) {
            let yu = ManifoldPoint::new(tu, u_net.eval(eps, &x)?);
            let yv = ManifoldPoint::new(tv, v_base.eval(eps, &x)?);
            let chi = pou.values(&yu)?;
            for (j, c) in chi.iter().enumerate() {
                if *c == 0.0 {
                    continue;
                }
                let a = pou.chart_of(j);
                let (Some(pu), Some(pv)) = (atlas.map_point(&yu, a)?, atlas.map_point(&yv, a)?) else {
                    return Ok(false);
                };
                let d = pu.iter().zip(&pv).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
                if !(d < radius) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    })?;
    let mut threshold = None;
    for (i, &e) in cfg.grid.values().iter().enumerate().rev() {
        if ok[i] {
            threshold = Some(e);
        } else {
            break;
        }
    }
    let threshold = threshold.ok_or(Error::ThresholdNotReached)?;

    let (rows, cols) = (v.rows, v.cols);
    let dim_in = u_net.dim_in();
    let base_net = {
        let (un, vb, at) = (u_net.clone(), v_base.clone(), atlas.clone());
        Net::try_from_jet_fn(dim_in, atlas.dim(), UNLIMITED, format!("{}⇐{}", u_rep.label(), v.base.label()), move |eps, x| {
            if eps <= threshold {
                un.jets_at(eps, x)
            } else {
                at.transition_jets(tv, tu, &vb.jets_at(eps, x)?)
            }
        })
        .with_domain(u_net.domain().clone())?
        .with_focus(u_net.focus().to_vec())
    };
    let fiber_net = {
        let (un, vb, vf, tg, pou) = (u_net.clone(), v_base.clone(), v_fib.clone(), target.clone(), pou.clone());
        Net::try_from_jet_fn(dim_in, rows * cols, UNLIMITED, format!("aligned({})", v_fib.label()), move |eps, x| {
            let yv = vb.jets_at(eps, x)?;
            let mv = vf.jets_at(eps, x)?;
            let at = tg.base();
            if eps > threshold {
                let phi = tg.fiber_transition_jets(tu, tv, &yv)?;
                return Ok(mat_mul(&phi, rows, rows, &mv, cols));
            }
            let yu = un.jets_at(eps, x)?;
            let chi = pou.jets(tu, &yu)?;
            let sh = x[0].shape().clone();
            let mut sum: Vec<J> = vec![Jet::constant(&sh, 0.0); rows * cols];
            for (j, c) in chi.iter().enumerate() {
                if c.coeffs().iter().all(|v| *v == 0.0) {
                    continue;
                }
                let a = pou.chart_of(j);
                let pv = ManifoldPoint::new(tv, yv.iter().map(|j| j.value()).collect());
                if at.map_point(&pv, a)?.is_none() {
                    return Err(Error::AlignmentFailed(format!("base image leaves chart {a} at eps={eps}")));
                }
                // fiber coordinates of ṽ_ε in chart a, re-based at u_ε and read back in chart tu
                let to_a = mat_mul(&tg.fiber_transition_jets(a, tv, &yv)?, rows, rows, &mv, cols);
                let yu_a = at.transition_jets(tu, a, &yu)?;
                let back = mat_mul(&tg.fiber_transition_jets(tu, a, &yu_a)?, rows, rows, &to_a, cols);
                sum = sum.iter().zip(&back).map(|(s, b)| s + &(c * b)).collect();
            }
            Ok(sum)
        })
        .with_domain(u_net.domain().clone())?
        .with_focus(u_net.focus().to_vec())
    };
    let base = ManifoldNet::new(u_rep.label(), u_rep.source().clone(), u_rep.target().clone()).with_rep(s, tu, base_net)?;
    let mut fiber = BTreeMap::new();
    fiber.insert((s, tu), fiber_net);
    Ok((Fibered { base, fiber, rows, cols }, threshold, radius))
}

/// Representative of the class of `v` whose base is `u_rep` exactly (for ε at
/// or below the returned threshold), built from a partition of unity on the
/// target base.
pub fn align_hom(v: &HomNet, u_rep: &ManifoldNet, l: &CompactSet, cover: Option<&[CompactSet]>, cfg: &CheckConfig) -> Result<Aligned<HomNet>> {
    let (inner, threshold, radius) = align_fibered(&v.inner, &v.target, u_rep, l, cover, cfg)?;
    Ok(Aligned {
        net: HomNet {
            label: format!("aligned({})", v.label),
            source: v.source.clone(),
            target: v.target.clone(),
            inner,
        },
        threshold,
        radius,
    })
}

pub fn align_hybrid(v: &HybridNet, u_rep: &ManifoldNet, l: &CompactSet, cover: Option<&[CompactSet]>, cfg: &CheckConfig) -> Result<Aligned<HybridNet>> {
    let (inner, threshold, radius) = align_fibered(&v.inner, &v.target, u_rep, l, cover, cfg)?;
    Ok(Aligned {
        net: HybridNet {
            label: format!("aligned({})", v.label),
            target: v.target.clone(),
            inner,
        },
        threshold,
        radius,
    })
}

fn align_for_sum(v: &HomNet, u_rep: &ManifoldNet, l: &CompactSet, cfg: &CheckConfig) -> Result<Aligned<HomNet>> {
    align_hom(v, u_rep, l, None, cfg).map_err(|e| Error::AlignmentFailed(format!("`{}`: {e}", v.label)))
}

fn combine(parts: &[(f64, &Aligned<HomNet>)], label: String) -> Result<HomNet> {
    let first = &parts[0].1.net;
    let mut inner = first.inner.clone();
    for (key, net) in inner.fiber.iter_mut() {
        let nets = parts
            .iter()
            .map(|(_, a)| {
                a.net
                    .inner
                    .fiber
                    .get(key)
                    .cloned()
                    .ok_or_else(|| Error::AlignmentFailed("aligned nets use different charts".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let coeffs: Vec<f64> = parts.iter().map(|(c, _)| *c).collect();
        *net = linear_combination(&nets, &coeffs)?;
    }
    Ok(HomNet {
        label,
        source: first.source.clone(),
        target: first.target.clone(),
        inner,
    })
}

/// `v1 + v2` in `Hom_u`: both aligned to `u_rep`, fiber matrices added.
pub fn hom_u_add(v1: &HomNet, v2: &HomNet, u_rep: &ManifoldNet, l: &CompactSet, cfg: &CheckConfig) -> Result<HomNet> {
    let (a, b) = (align_for_sum(v1, u_rep, l, cfg)?, align_for_sum(v2, u_rep, l, cfg)?);
    combine(&[(1.0, &a), (1.0, &b)], format!("({}+{})", v1.label, v2.label))
}

/// `c·v` in `Hom_u`.
pub fn hom_u_scale(c: f64, v: &HomNet, u_rep: &ManifoldNet, l: &CompactSet, cfg: &CheckConfig) -> Result<HomNet> {
    let a = align_for_sum(v, u_rep, l, cfg)?;
    combine(&[(c, &a)], format!("{c}·{}", v.label))
}

/// Zero of `Hom_u`: base `u_rep`, zero fiber matrices.
pub fn hom_u_zero(source: &VBAtlas, target: &VBAtlas, u_rep: &ManifoldNet) -> Result<HomNet> {
    let (r, c) = (target.fiber_dim(), source.fiber_dim());
    let mut out = HomNet::new("0", source.clone(), target.clone(), u_rep.clone())?;
    for ((s, t), net) in u_rep.reps() {
        out.inner.add_fiber(*s, *t, Net::constant_point(net.dim_in(), vec![0.0; r * c]))?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairingReport {
    /// `(ε, max_t |d/dt g(ξ,η) − g(ξ′,η) − g(ξ,η′)|)`.
    pub residuals: Vec<(f64, f64)>,
}

impl PairingReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|r| r.1).fold(0.0, f64::max)
    }
}

/// Metric compatibility of the covariant derivative along a curve, slicewise:
/// `d/dt g(ξ, η) = g(ξ′, η) + g(ξ, η′)` with `ξ′ = ξ̇ + Γ(α̇, ξ)`.
///
/// `g` maps chart coordinates of X to the `n×n` metric (row-major); `alpha`
/// is the curve `ℝ → X`; `xi`, `eta` are hybrid nets into `TX` whose base
/// representatives must evaluate exactly to `alpha`.
pub fn metric_pairing_derivative_check(g: &Net, alpha: &Net, xi: &HybridNet, eta: &HybridNet, times: &[f64], eps_values: &[f64]) -> Result<PairingReport> {
    let n = alpha.dim_out();
    if g.dim_in() != n || g.dim_out() != n * n || alpha.dim_in() != 1 {
        return Err(Error::DimensionMismatch("metric, curve and fields disagree".into()));
    }
    let fields = [xi, eta];
    for f in fields {
        let (_, b, _) = f.inner.rep_from(0)?;
        for &e in eps_values {
            for &t in times {
                if b.eval(e, &[t])? != alpha.eval(e, &[t])? {
                    return Err(Error::NotAligned);
                }
            }
        }
    }
    let mut residuals = Vec::with_capacity(eps_values.len());
    for &e in eps_values {
        let mut worst = 0.0f64;
        for &t in times {
            let seeds = Jet::seed(&[t], 1);
            let a = alpha.jets_at(e, &seeds)?;
            let adot: Vec<f64> = a.iter().map(|j| j.derivative(&[1])).collect();
            let gt = g.jets_at(e, &a)?;
            let vals: Vec<f64> = a.iter().map(|j| j.value()).collect();
            let gx = g.jets(e, &vals, 1)?;
            let gm = DMatrix::from_fn(n, n, |i, j| gx[i * n + j].value());
            let ginv = gm.clone().try_inverse().ok_or_else(|| Error::NonFinite("degenerate metric".into()))?;
            let dg = |k: usize, i: usize, j: usize| {
                let mut alpha_k = vec![0u8; n];
                alpha_k[k] = 1;
                gx[i * n + j].derivative(&alpha_k)
            };
            // Γ^k_ij
            let mut gamma = vec![0.0; n * n * n];
            for k in 0..n {
                for i in 0..n {
                    for j in 0..n {
                        gamma[(k * n + i) * n + j] = 0.5
                            * (0..n)
                                .map(|l| ginv[(k, l)] * (dg(i, j, l) + dg(j, i, l) - dg(l, i, j)))
                                .sum::<f64>();
                    }
                }
            }
            let field = |h: &HybridNet| -> Result<(Vec<f64>, Vec<f64>)> {
                let (_, _, f) = h.inner.rep_from(0)?;
                let j = f.jets_at(e, &seeds)?;
                Ok((j.iter().map(|c| c.value()).collect(), j.iter().map(|c| c.derivative(&[1])).collect()))
            };
            let (x, xdot) = field(xi)?;
            let (y, ydot) = field(eta)?;
            let cov = |v: &[f64], vdot: &[f64]| -> Vec<f64> {
                (0..n)
                    .map(|k| {
                        vdot[k]
                            + (0..n)
                                .flat_map(|i| (0..n).map(move |j| (i, j)))
                                .map(|(i, j)| gamma[(k * n + i) * n + j] * adot[i] * v[j])
                                .sum::<f64>()
                    })
                    .collect()
            };
            let pair = |p: &[f64], q: &[f64]| -> f64 { (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| gm[(i, j)] * p[i] * q[j]).sum() };
            let mut lhs = 0.0;
            for i in 0..n {
                for j in 0..n {
                    lhs += gt[i * n + j].derivative(&[1]) * x[i] * y[j] + gm[(i, j)] * (xdot[i] * y[j] + x[i] * ydot[j]);
                }
            }
            let rhs = pair(&cov(&x, &xdot), &y) + pair(&x, &cov(&y, &ydot));
            worst = worst.max((lhs - rhs).abs());
        }
        residuals.push((e, worst));
    }
    Ok(PairingReport { residuals })
}

/// Largest fiber-operator-norm difference between two homs at one point, for reports.
pub fn fiber_gap(u: &HomNet, v: &HomNet, eps: f64, p: &ManifoldPoint) -> Result<f64> {
    let (a, b) = (u.fiber_matrix(eps, p)?, v.fiber_matrix(eps, p)?);
    let d = a - b;
    Ok(op_norm(d.transpose().as_slice(), d.nrows(), d.ncols()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asymptotics::{Classification, EpsGrid};
    use crate::geometry::atlas::TransitionKind;
    use crate::manifold_maps::random_points;

    fn cfg() -> CheckConfig {
        CheckConfig::default().with_k_max(1)
    }

    fn k1() -> CompactSet {
        CompactSet::interval(-1.0, 1.0, 17)
    }

    fn hom(base: &str, fiber: &str) -> HomNet {
        HomNet::from_exprs(&[base], &[fiber], &["x"], 1, 1, &format!("({base};{fiber})")).unwrap()
    }

    fn hybrid(base: &str, fiber: &str) -> HybridNet {
        HybridNet::from_exprs(&[base], &[fiber], &["x"], &format!("({base};{fiber})")).unwrap()
    }

    #[test]
    fn vb_moderate_examples() {
        let c = cfg();
        let id = HomNet::identity(&VBAtlas::tangent(Atlas::euclidean(1)));
        let r = check_vb_moderate(&id, &k1(), &c).unwrap();
        assert_eq!(r.verdict().classification, Classification::Moderate { n: 0 });
        let r = check_vb_moderate(&hom("0.5", "eps^(-2)"), &k1(), &c).unwrap();
        assert_eq!(r.verdict().classification, Classification::Moderate { n: 2 });
        assert_eq!(r.fiber_chart.classification, Classification::Moderate { n: 2 });
        let r = check_vb_moderate(&hom("x", "exp(1/eps)"), &k1(), &c).unwrap();
        assert_eq!(r.verdict().classification, Classification::Neither);
        assert!(!r.moderate());
        assert!(matches!(check_vb_moderate(&hom("1/eps", "1"), &k1(), &c), Err(Error::NotCBounded(_))));
    }

    #[test]
    fn vb_equivalence_examples() {
        let c = cfg();
        let u = hom("sin(x)", "2+x");
        let r = check_vb_equivalent(&u, &hom("sin(x)", "2+x+exp(-1/eps)"), &k1(), &c).unwrap();
        assert!(r.equivalent);
        let r = check_vb_equivalent(&u, &hom("sin(x)", "(2+x)*(1+eps)"), &k1(), &c).unwrap();
        assert!(!r.equivalent);
        assert!(r.base.equivalent);
        assert!(check_vb_equivalent(&u, &u, &k1(), &c).unwrap().equivalent);
        // order collapse
        for v in [hom("sin(x)", "2+x+exp(-1/eps)"), hom("sin(x)", "(2+x)*(1+eps)"), hom("sin(x)+eps", "2+x")] {
            let zero = check_vb_equivalent(&u, &v, &k1(), &c).unwrap().equivalent;
            assert_eq!(zero, check_vb_equivalent_order(&u, &v, &k1(), 2, &c).unwrap());
        }
    }

    #[test]
    fn tangent_map_examples() {
        let c = cfg();
        let t = tangent_map(&ManifoldNet::from_exprs(&["x^2"], &["x"], "sq").unwrap()).unwrap();
        let m = t.fiber_matrix(0.1, &ManifoldPoint::new(0, vec![0.75])).unwrap();
        assert_eq!(m[(0, 0)], 1.5);
        let id = tangent_map(&ManifoldNet::identity(&Atlas::euclidean(2))).unwrap();
        let r = check_vb_equivalent(&id, &HomNet::identity(&VBAtlas::tangent(Atlas::euclidean(2))), &CompactSet::cube(2, -1.0, 1.0, 5), &c).unwrap();
        assert!(r.equivalent);
        let frozen = Net::from_value_fn(1, 1, "frozen", |_, x| vec![x[0]]).with_fd_order(0);
        assert!(matches!(tangent_map(&ManifoldNet::euclidean(frozen)), Err(Error::JetsUnavailable(_))));
    }

    #[test]
    fn chain_rule_for_tangent_maps() {
        let c = cfg();
        let u = ManifoldNet::from_exprs(&["sin(x)+eps*x"], &["x"], "u").unwrap();
        let v = ManifoldNet::from_exprs(&["x^3-x"], &["x"], "v").unwrap();
        let lhs = tangent_map(&compose(&u, &v).unwrap()).unwrap();
        let rhs = compose_homs(&tangent_map(&u).unwrap(), &tangent_map(&v).unwrap()).unwrap();
        assert!(check_vb_equivalent(&lhs, &rhs, &k1(), &c).unwrap().equivalent);
    }

    #[test]
    fn point_insertion_examples() {
        let c = CheckConfig::default();
        let k = CompactSet::interval(0.0, 1.0, 5);
        let e = VbGeneralizedPoint::new("e", k.clone(), |eps| VbPoint::new(0, vec![0.5], vec![3.0 * eps]));
        let id = HomNet::identity(&VBAtlas::trivial(Atlas::euclidean(1), 1));
        let same = vb_point_insert(&id, &e, &c).unwrap();
        assert_eq!(same.at(0.125), e.at(0.125));
        let scaled = vb_point_insert(&hom("x", "1/eps"), &e, &c).unwrap();
        assert!((scaled.at(2f64.powi(-14)).fiber[0] - 3.0).abs() < 1e-12);
        let zero = VbGeneralizedPoint::new("0", k.clone(), |_| VbPoint::new(0, vec![0.5], vec![0.0]));
        assert_eq!(vb_point_insert(&hom("x", "1/eps"), &zero, &c).unwrap().at(0.01).fiber, vec![0.0]);
        let wild = VbGeneralizedPoint::new("wild", k, |eps| VbPoint::new(0, vec![0.5], vec![(1.0 / eps).exp()]));
        assert!(matches!(vb_point_insert(&id, &wild, &c), Err(Error::NotModerate(_))));
    }

    #[test]
    fn hom_composition_examples() {
        let c = cfg();
        let a = HomNet::from_exprs(&["0.2"], &["1", "2", "0", "1"], &["x"], 2, 2, "A").unwrap();
        let b = HomNet::from_exprs(&["0.3"], &["0", "1", "1", "0"], &["x"], 2, 2, "B").unwrap();
        let ba = compose_homs(&a, &b).unwrap();
        let m = ba.fiber_matrix(0.1, &ManifoldPoint::new(0, vec![0.0])).unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 2.0]));
        let u = hom("sin(x)", "1+x^2");
        let with_id = compose_homs(&u, &HomNet::identity(u.target())).unwrap();
        assert!(check_vb_equivalent(&with_id, &u, &k1(), &c).unwrap().equivalent);
        let v = hom("x^2", "x");
        let perturbed = hom("sin(x)+exp(-1/eps)", "1+x^2+exp(-1/eps)");
        let lhs = compose_homs_checked(&u, &v, &k1(), &c).unwrap();
        let rhs = compose_homs_checked(&perturbed, &v, &k1(), &c).unwrap();
        assert!(check_vb_equivalent(&lhs, &rhs, &k1(), &c).unwrap().equivalent);
        assert!(matches!(compose_homs(&a, &u), Err(Error::AtlasMismatch(_))));
    }

    #[test]
    fn hybrid_examples() {
        let c = cfg();
        let s = hybrid("x", "sin(x/eps)*eps");
        let r = check_hybrid_moderate(&s, &k1(), &c).unwrap();
        assert!(r.moderate());
        let zero = hybrid("x", "0");
        assert!(!check_hybrid_equivalent(&s, &zero, &k1(), &c).unwrap().equivalent);
        let u = hybrid("sin(x)", "cos(x)");
        assert!(check_hybrid_equivalent(&u, &hybrid("sin(x)", "cos(x)+exp(-1/eps)"), &k1(), &c).unwrap().equivalent);
        let shifted = hybrid("sin(x)+eps", "cos(x)");
        let r = check_hybrid_equivalent(&u, &shifted, &k1(), &c).unwrap();
        assert!(!r.equivalent && !r.base.equivalent);
        for v in [hybrid("sin(x)", "cos(x)+exp(-1/eps)"), shifted, hybrid("sin(x)", "cos(x)+eps")] {
            assert_eq!(
                check_hybrid_equivalent(&u, &v, &k1(), &c).unwrap().equivalent,
                check_hybrid_equivalent_order(&u, &v, &k1(), 2, &c).unwrap()
            );
        }
    }

    #[test]
    fn hybrid_point_value_examples() {
        let c = CheckConfig::default();
        let origin = GeneralizedManifoldPoint::constant(0, vec![0.0]);
        let v = hybrid_point_value(&hybrid("0.25", "3"), &origin, &c).unwrap();
        assert_eq!(v.at(0.01), VbPoint::new(0, vec![0.25], vec![3.0]));
        let small = hybrid_point_value(&hybrid("x", "eps"), &origin, &c).unwrap();
        let zero = hybrid_point_value(&hybrid("x", "0"), &origin, &c).unwrap();
        let vb = VBAtlas::trivial(Atlas::euclidean(1), 1);
        assert!(!vb_points_equivalent(&small, &zero, &vb, &c).unwrap().equivalent);
        let pts = random_points(&k1(), 3, 7);
        let a = hybrid("sin(x)", "cos(x)");
        let r = check_hybrid_pointvalue_equality(&a, &a, &k1(), &pts, &c).unwrap();
        assert!(r.equal);
        let r = check_hybrid_pointvalue_equality(&a, &hybrid("sin(x)", "cos(x)+eps*x"), &k1(), &pts, &c).unwrap();
        assert!(!r.equal);
    }

    #[test]
    fn hybrid_composition_examples() {
        let c = cfg();
        let v = hybrid("x^2", "sin(x)");
        let same = compose_hybrid(&ManifoldNet::identity(&Atlas::euclidean(1)), &v).unwrap();
        assert!(check_hybrid_equivalent(&same, &v, &k1(), &c).unwrap().equivalent);
        let id_hom = HomNet::identity(v.target());
        let same = compose_hybrid_hom(&v, &id_hom).unwrap();
        assert!(check_hybrid_equivalent(&same, &v, &k1(), &c).unwrap().equivalent);
        let u = ManifoldNet::from_exprs(&["x/2"], &["x"], "half").unwrap();
        let up = ManifoldNet::from_exprs(&["x/2+exp(-1/eps)"], &["x"], "half'").unwrap();
        let a = compose_hybrid_checked(&u, &v, &k1(), &c).unwrap();
        let b = compose_hybrid_checked(&up, &v, &k1(), &c).unwrap();
        assert!(check_hybrid_equivalent(&a, &b, &k1(), &c).unwrap().equivalent);
        let scale = HomNet::from_exprs(&["x"], &["3"], &["x"], 1, 1, "3").unwrap();
        let w = compose_hybrid_hom(&v, &scale).unwrap();
        let p = w.eval(0.1, &ManifoldPoint::new(0, vec![0.5])).unwrap();
        assert_eq!(p.fiber, vec![3.0 * 0.5f64.sin()]);
    }

    #[test]
    fn alignment_rebases_exactly() {
        let c = cfg();
        let u_rep = ManifoldNet::from_exprs(&["sin(x)"], &["x"], "u").unwrap();
        let v = hom("sin(x)+exp(-1/eps)", "2+x");
        let aligned = align_hom(&v, &u_rep, &k1(), None, &c).unwrap();
        assert_eq!(aligned.threshold, c.grid.values()[0]);
        for &e in c.grid.values() {
            for x in k1().points() {
                let p = ManifoldPoint::new(0, x.clone());
                assert_eq!(
                    aligned.net.base().eval_point(e, &p).unwrap().coords,
                    u_rep.eval_point(e, &p).unwrap().coords
                );
            }
        }
        assert!(check_vb_equivalent(&aligned.net, &v, &k1(), &c).unwrap().equivalent);
        // already aligned: unchanged on the working region
        let w = hom("sin(x)", "2+x");
        let same = align_hom(&w, &u_rep, &k1(), None, &c).unwrap();
        for x in k1().points() {
            let p = ManifoldPoint::new(0, x);
            assert_eq!(same.net.fiber_matrix(0.01, &p).unwrap(), w.fiber_matrix(0.01, &p).unwrap());
        }
        // a two-piece cover sums back to the same fiber
        let cover = [CompactSet::interval(-1.0, 0.2, 5), CompactSet::interval(-0.2, 1.0, 5)];
        let two = align_hom(&v, &u_rep, &k1(), Some(&cover), &c).unwrap();
        let p = ManifoldPoint::new(0, vec![0.1]);
        assert!((two.net.fiber_matrix(0.01, &p).unwrap()[(0, 0)] - 2.1).abs() < 1e-12);
        let far = hom("sin(x)+100", "1");
        assert!(matches!(align_hom(&far, &u_rep, &k1(), None, &c), Err(Error::AlignmentFailed(_))));
    }

    #[test]
    fn alignment_across_charts_uses_fiber_transitions() {
        let c = CheckConfig::default().with_k_max(1).with_grid(EpsGrid::dyadic(2, 12).unwrap());
        let mut base = Atlas::new(1);
        let a = base.add_chart("a", BoxDomain::cube(1, -3.0, 3.0));
        let b = base.add_chart("b", BoxDomain::cube(1, -5.0, 7.0));
        base.add_transition(
            a,
            b,
            TransitionKind::Affine {
                matrix: vec![vec![2.0]],
                offset: vec![1.0],
            },
        )
        .unwrap();
        base.set_metric(a, &["4"]).unwrap();
        base.set_metric(b, &["1"]).unwrap();
        let tb = VBAtlas::tangent(base.clone());
        let u_rep = ManifoldNet::new("u", Atlas::euclidean(1), base.clone())
            .with_rep(0, a, Net::from_exprs(&["x/2"], &["x"], "u").unwrap())
            .unwrap();
        // same map read in chart b with a negligible shift
        let v_base = ManifoldNet::new("v", Atlas::euclidean(1), base)
            .with_rep(0, b, Net::from_exprs(&["x+1+exp(-1/eps)"], &["x"], "v").unwrap())
            .unwrap();
        let src = VBAtlas::trivial(Atlas::euclidean(1), 1);
        let v = HomNet::new("v", src, tb, v_base)
            .unwrap()
            .with_fiber(0, b, Net::from_exprs(&["4"], &["x"], "4").unwrap())
            .unwrap();
        let aligned = align_hom(&v, &u_rep, &k1(), None, &c).unwrap();
        // chart b fiber 4 reads as 2 in chart a
        let m = aligned.net.fiber_matrix(2f64.powi(-10), &ManifoldPoint::new(0, vec![0.3])).unwrap();
        assert!((m[(0, 0)] - 2.0).abs() < 1e-12);
        let p = ManifoldPoint::new(0, vec![0.3]);
        assert_eq!(aligned.net.base().eval_point(0.01, &p).unwrap(), u_rep.eval_point(0.01, &p).unwrap());
    }

    #[test]
    fn hom_u_is_a_vector_space() {
        let c = cfg();
        let u_rep = ManifoldNet::from_exprs(&["sin(x)"], &["x"], "u").unwrap();
        let v1 = hom("sin(x)+exp(-1/eps)", "1+x");
        let v2 = hom("sin(x)", "cos(x/eps)*eps+2");
        let (s, t) = (v1.source().clone(), v1.target().clone());
        let zero = hom_u_zero(&s, &t, &u_rep).unwrap();
        let neg = hom_u_scale(-1.0, &v1, &u_rep, &k1(), &c).unwrap();
        let sum = hom_u_add(&v1, &neg, &u_rep, &k1(), &c).unwrap();
        assert!(check_vb_equivalent(&sum, &zero, &k1(), &c).unwrap().equivalent);
        let one = hom_u_scale(1.0, &v1, &u_rep, &k1(), &c).unwrap();
        assert!(check_vb_equivalent(&one, &v1, &k1(), &c).unwrap().equivalent);
        let a = hom_u_add(&v1, &v2, &u_rep, &k1(), &c).unwrap();
        let b = hom_u_add(&v2, &v1, &u_rep, &k1(), &c).unwrap();
        assert!(check_vb_equivalent(&a, &b, &k1(), &c).unwrap().equivalent);
        let other_base = hom("cos(x)", "1");
        assert!(matches!(hom_u_add(&v1, &other_base, &u_rep, &k1(), &c), Err(Error::AlignmentFailed(_))));
    }

    #[test]
    fn metric_pairing_examples() {
        let tx = VBAtlas::tangent(Atlas::euclidean(2));
        let flat = Net::from_exprs(&["1", "0", "0", "1"], &["x", "y"], "flat").unwrap();
        let line = Net::from_exprs(&["x", "2*x"], &["x"], "line").unwrap();
        let curve = ManifoldNet::new("line", Atlas::euclidean(1), tx.base().clone())
            .with_rep(0, 0, line.clone())
            .unwrap();
        let field = |e: [&str; 2]| {
            HybridNet::new("f", tx.clone(), curve.clone())
                .unwrap()
                .with_fiber(0, 0, Net::from_exprs(&e, &["x"], "f").unwrap())
                .unwrap()
        };
        let times: Vec<f64> = (0..=20).map(|i| -1.0 + 0.1 * i as f64).collect();
        let r = metric_pairing_derivative_check(&flat, &line, &field(["1", "0"]), &field(["0.5", "3"]), &times, &[0.1]).unwrap();
        assert!(r.max_residual() < 1e-14);
        let r = metric_pairing_derivative_check(&flat, &line, &field(["x", "0"]), &field(["x", "0"]), &times, &[0.1]).unwrap();
        assert!(r.max_residual() < 1e-14);
        // curved metric along a curved path
        let g = Net::from_exprs(&["1+x^2", "x*y", "x*y", "2+sin(y)"], &["x", "y"], "g").unwrap();
        let circle = Net::from_exprs(&["cos(x)", "sin(x)"], &["x"], "circle").unwrap();
        let cc = ManifoldNet::new("circle", Atlas::euclidean(1), tx.base().clone())
            .with_rep(0, 0, circle.clone())
            .unwrap();
        let f = |e: [&str; 2]| {
            HybridNet::new("f", tx.clone(), cc.clone())
                .unwrap()
                .with_fiber(0, 0, Net::from_exprs(&e, &["x"], "f").unwrap())
                .unwrap()
        };
        let r = metric_pairing_derivative_check(&g, &circle, &f(["x", "1"]), &f(["sin(3*x)", "x^2"]), &times, &[0.1, 0.01]).unwrap();
        assert!(r.max_residual() < 1e-12, "{r:?}");
        let misaligned = field(["1", "0"]);
        assert!(matches!(
            metric_pairing_derivative_check(&g, &circle, &misaligned, &f(["1", "0"]), &times, &[0.1]),
            Err(Error::NotAligned)
        ));
    }

    #[test]
    fn compatibility_of_fiber_representatives() {
        let mut base = Atlas::new(1);
        let a = base.add_chart("a", BoxDomain::cube(1, -3.0, 3.0));
        let b = base.add_chart("b", BoxDomain::cube(1, -5.0, 7.0));
        base.add_transition(
            a,
            b,
            TransitionKind::Affine {
                matrix: vec![vec![2.0]],
                offset: vec![1.0],
            },
        )
        .unwrap();
        let tb = VBAtlas::tangent(base.clone());
        let src = VBAtlas::trivial(Atlas::euclidean(1), 1);
        let bn = ManifoldNet::new("u", Atlas::euclidean(1), base)
            .with_rep(0, a, Net::from_exprs(&["x/2"], &["x"], "ua").unwrap())
            .unwrap()
            .with_rep(0, b, Net::from_exprs(&["x+1"], &["x"], "ub").unwrap())
            .unwrap();
        let good = HomNet::new("u", src.clone(), tb.clone(), bn.clone())
            .unwrap()
            .with_fiber(0, a, Net::from_exprs(&["x"], &["x"], "ma").unwrap())
            .unwrap()
            .with_fiber(0, b, Net::from_exprs(&["2*x"], &["x"], "mb").unwrap())
            .unwrap();
        let c = CheckConfig::default().with_grid(EpsGrid::dyadic(1, 6).unwrap());
        good.check_compatibility(&k1(), &c).unwrap();
        let bad = good.with_fiber(0, b, Net::from_exprs(&["x"], &["x"], "mb").unwrap()).unwrap();
        assert!(bad.check_compatibility(&k1(), &c).is_err());
    }
}
