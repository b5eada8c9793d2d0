//! Nets of maps between manifolds: c-boundedness, moderateness, the
//! three-route equivalence test, generalized points, point values and
//! composition.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{estimate_growth_order, gpoint_equivalent, upper_envelope, AsymptoticParams, AsymptoticVerdict, Classification, EpsGrid};
use crate::error::{Error, Result};
use crate::geometry::atlas::{Atlas, ManifoldPoint};
use crate::geometry::bank::{scalar_bank, unbounded_bank, ScalarTest, DEFAULT_BANK_SIZE};
use crate::geometry::compact::CompactSet;
use crate::geometry::distance::{chart_distance, riemannian_distance};
use crate::jet::Jet;
use crate::net::{compose_nets, BoxDomain, GeneralizedNumber, Net, J};

/// Sampling and tolerance settings shared by all checks.
#[derive(Debug, Clone)]
pub struct CheckConfig {
    pub grid: EpsGrid,
    pub params: AsymptoticParams,
    /// Highest derivative order tested for moderateness.
    pub k_max: usize,
    pub bank_size: usize,
    /// Quantitative proxy for "→ 0".
    pub assoc_tol: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            grid: EpsGrid::default(),
            params: AsymptoticParams::default(),
            k_max: 3,
            bank_size: DEFAULT_BANK_SIZE,
            assoc_tol: 1e-3,
        }
    }
}

impl CheckConfig {
    pub fn with_grid(mut self, grid: EpsGrid) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_k_max(mut self, k: usize) -> Self {
        self.k_max = k;
        self
    }

    pub(crate) fn negligible(&self, v: &AsymptoticVerdict) -> bool {
        v.classification.negligible_to(self.params.m_max)
    }

    pub(crate) fn classify(&self, samples: &[f64]) -> Result<AsymptoticVerdict> {
        estimate_growth_order(samples, &self.grid, &self.params)
    }

    /// Growth of a sup curve. A raw fit of Neither falls back to the upper
    /// envelope, so aliasing dips of an oscillating sup cannot fake
    /// super-polynomial growth; decay verdicts come from the raw fit.
    pub(crate) fn classify_growth(&self, samples: &[f64]) -> Result<AsymptoticVerdict> {
        let raw = self.classify(samples)?;
        if raw.classification.is_moderate() {
            return Ok(raw);
        }
        self.classify(&upper_envelope(samples))
    }
}

/// Parallel map over the grid, results in grid order.
pub(crate) fn per_eps<T: Send, F>(grid: &EpsGrid, f: F) -> Result<Vec<T>>
where
    F: Fn(f64) -> Result<T> + Sync,
{
    grid.values().par_iter().map(|&e| f(e)).collect()
}

/// Largest `|∂^α g|` over multi-indices of each order `0..=k`.
pub(crate) fn order_norms(j: &J, k: usize) -> Vec<f64> {
    let mut out = vec![0.0f64; k + 1];
    for alpha in j.shape().indices() {
        let deg: usize = alpha.iter().map(|&a| a as usize).sum();
        if deg <= k {
            let d = j.derivative(alpha).abs();
            out[deg] = out[deg].max(if d.is_nan() { f64::INFINITY } else { d });
        }
    }
    out
}

/// `(u_ε)_ε` between manifolds, given chart-pair representatives.
#[derive(Clone)]
pub struct ManifoldNet {
    label: String,
    source: Atlas,
    target: Atlas,
    reps: BTreeMap<(usize, usize), Net>,
}

impl fmt::Debug for ManifoldNet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ManifoldNet")
            .field("label", &self.label)
            .field("charts", &self.reps.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl ManifoldNet {
    pub fn new(label: impl Into<String>, source: Atlas, target: Atlas) -> Self {
        ManifoldNet {
            label: label.into(),
            source,
            target,
            reps: BTreeMap::new(),
        }
    }

    /// Net `ℝⁿ → ℝᵐ` between single-chart Euclidean spaces.
    pub fn euclidean(net: Net) -> Self {
        let (n, m) = (net.dim_in(), net.dim_out());
        let label = net.label().to_string();
        ManifoldNet::new(label, Atlas::euclidean(n), Atlas::euclidean(m))
            .with_rep(0, 0, net)
            .expect("dimensions match by construction")
    }

    /// Identity of `atlas`, one representative per chart.
    pub fn identity(atlas: &Atlas) -> Self {
        let mut out = ManifoldNet::new("id", atlas.clone(), atlas.clone());
        for c in 0..atlas.charts().len() {
            out.reps.insert(
                (c, c),
                Net::identity(atlas.dim())
                    .with_domain(atlas.charts()[c].domain.clone())
                    .expect("chart dimension matches"),
            );
        }
        out
    }

    /// Net from expressions `ℝⁿ → ℝᵐ` in coordinates `vars`.
    pub fn from_exprs(exprs: &[&str], vars: &[&str], label: &str) -> Result<Self> {
        Ok(Self::euclidean(Net::from_exprs(exprs, vars, label)?))
    }

    pub fn with_rep(mut self, source_chart: usize, target_chart: usize, net: Net) -> Result<Self> {
        let sd = self.source.chart(source_chart)?.domain.clone();
        self.target.chart(target_chart)?;
        if net.dim_in() != self.source.dim() || net.dim_out() != self.target.dim() {
            return Err(Error::DimensionMismatch(format!(
                "representative R^{} -> R^{} for manifolds of dimension {} -> {}",
                net.dim_in(),
                net.dim_out(),
                self.source.dim(),
                self.target.dim()
            )));
        }
        let domain = net
            .domain()
            .intersect(&sd)
            .ok_or_else(|| Error::AtlasMismatch("representative domain misses the chart".into()))?;
        self.reps.insert((source_chart, target_chart), net.with_domain(domain)?);
        Ok(self)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source(&self) -> &Atlas {
        &self.source
    }

    pub fn target(&self) -> &Atlas {
        &self.target
    }

    pub fn reps(&self) -> &BTreeMap<(usize, usize), Net> {
        &self.reps
    }

    pub fn rep(&self, source_chart: usize, target_chart: usize) -> Option<&Net> {
        self.reps.get(&(source_chart, target_chart))
    }

    /// First representative out of `chart`.
    pub fn rep_from(&self, chart: usize) -> Result<(usize, &Net)> {
        self.reps
            .iter()
            .find(|((s, _), _)| *s == chart)
            .map(|((_, t), n)| (*t, n))
            .ok_or_else(|| Error::AtlasMismatch(format!("`{}` has no representative on chart {chart}", self.label)))
    }

    pub fn focus(&self, chart: usize) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = Vec::new();
        for ((s, _), n) in &self.reps {
            if *s == chart {
                for f in n.focus() {
                    if !out.contains(f) {
                        out.push(f.clone());
                    }
                }
            }
        }
        out
    }

    /// `u_ε(p)`, using the first representative whose image lies in its target chart.
    pub fn eval_point(&self, eps: f64, p: &ManifoldPoint) -> Result<ManifoldPoint> {
        let mut last = None;
        for ((s, t), net) in &self.reps {
            if *s != p.chart {
                continue;
            }
            match net.eval(eps, &p.coords) {
                Ok(y) if self.target.chart(*t)?.domain.contains(&y) => return Ok(ManifoldPoint::new(*t, y)),
                Ok(_) => {}
                Err(e) => last = Some(e),
            }
        }
        Err(last.unwrap_or(Error::ImageEscapesAtlas { eps }))
    }

    /// Chart-pair representatives agree under target transitions at the
    /// sampled points of `k`, per grid ε.
    pub fn check_compatibility(&self, k: &CompactSet, grid: &EpsGrid) -> Result<()> {
        let reps: Vec<(&(usize, usize), &Net)> = self.reps.iter().filter(|((s, _), _)| *s == k.chart).collect();
        for &eps in grid.values() {
            for x in k.points() {
                for (i, ((_, t1), n1)) in reps.iter().enumerate() {
                    for ((_, t2), n2) in &reps[i + 1..] {
                        let (Ok(y1), Ok(y2)) = (n1.eval(eps, &x), n2.eval(eps, &x)) else { continue };
                        let p1 = ManifoldPoint::new(*t1, y1);
                        if !self.target.contains(&p1) {
                            continue;
                        }
                        let Some(mapped) = self.target.map_point(&p1, *t2)? else { continue };
                        let err = mapped.iter().zip(&y2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                        if err > 1e-9 * (1.0 + y2.iter().map(|v| v.abs()).fold(0.0, f64::max)) {
                            return Err(Error::AtlasMismatch(format!(
                                "representatives ({}, {t1}) and ({}, {t2}) disagree at eps={eps}, x={x:?}",
                                k.chart, k.chart
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Images of the sampled `K` at one ε, all in `chart` coordinates of the target.
fn images_in(u: &ManifoldNet, k: &CompactSet, eps: f64, pts: &[Vec<f64>], chart: usize) -> Result<Vec<Option<Vec<f64>>>> {
    pts.iter()
        .map(|x| {
            let y = u.eval_point(eps, &ManifoldPoint::new(k.chart, x.clone()))?;
            u.target.map_point(&y, chart)
        })
        .collect()
}

fn union_focus(nets: &[&ManifoldNet], chart: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for n in nets {
        for f in n.focus(chart) {
            if !out.contains(&f) {
                out.push(f);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CBoundedReport {
    pub cbounded: bool,
    /// Target chart and box `K′` holding all small-ε images.
    pub witness: Option<(usize, BoxDomain)>,
    /// Growth of `sup_K |u_ε|` in target chart coordinates.
    pub growth: AsymptoticVerdict,
    /// Every non-compactly supported smooth test (coordinates, `|y|²`) is
    /// moderate of order zero along `u`.
    pub smooth_tests_order0: bool,
    /// Every compactly supported test stays bounded along `u` (holds even
    /// for escaping nets).
    pub compact_tests_bounded: bool,
}

/// Do the images of `K` stay in a fixed compact set of the target for small ε?
pub fn check_cbounded(u: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<CBoundedReport> {
    let (chart, _) = u.rep_from(k.chart)?;
    let focus = u.focus(k.chart);
    let start = cfg.grid.small_half_start();
    let per: Vec<Vec<Option<Vec<f64>>>> = per_eps(&cfg.grid, |eps| {
        let pts = k.points_at(eps, &focus);
        images_in(u, k, eps, &pts, chart)
    })?;
    let mut sup = Vec::with_capacity(per.len());
    let mut hull_pts: Vec<Vec<f64>> = Vec::new();
    for (i, imgs) in per.iter().enumerate() {
        let mut s = 0.0f64;
        for y in imgs {
            match y {
                Some(y) => {
                    s = s.max(y.iter().map(|v| v.abs()).fold(0.0, f64::max));
                    if i >= start {
                        hull_pts.push(y.clone());
                    }
                }
                None if i >= start => {
                    return Err(Error::ImageEscapesAtlas { eps: cfg.grid.values()[i] });
                }
                None => {}
            }
        }
        sup.push(s);
    }
    let growth = cfg.classify_growth(&sup)?;
    let dim = u.target.dim();
    let hull = BoxDomain::hull(dim, hull_pts.iter().map(|v| v.as_slice()));
    let domain = &u.target.chart(chart)?.domain;
    let bounded = growth.classification.growth() == Some(0);
    let inside = hull
        .as_ref()
        .is_some_and(|h| (0..dim).all(|i| h.lo[i] > domain.lo[i] && h.hi[i] < domain.hi[i]));
    let cbounded = bounded && inside;

    // smooth tests on all of Y
    let mut smooth_ok = true;
    for f in unbounded_bank(chart, dim) {
        let s: Vec<f64> = per
            .iter()
            .map(|imgs| imgs.iter().flatten().map(|y| f.eval(y).abs()).fold(0.0, f64::max))
            .collect();
        if cfg.classify_growth(&s)?.classification.growth() != Some(0) {
            smooth_ok = false;
        }
    }
    // compactly supported tests placed around the images at the largest ε
    let first = BoxDomain::hull(dim, per[0].iter().flatten().map(|v| v.as_slice()));
    let mut compact_ok = true;
    if let Some(region) = first {
        for f in scalar_bank(chart, &region, cfg.bank_size) {
            let s: Vec<f64> = per
                .iter()
                .map(|imgs| imgs.iter().flatten().map(|y| f.eval(y).abs()).fold(0.0, f64::max))
                .collect();
            if cfg.classify_growth(&s)?.classification.growth() != Some(0) {
                compact_ok = false;
            }
        }
    }
    Ok(CBoundedReport {
        cbounded,
        witness: if cbounded { hull.map(|h| (chart, h)) } else { None },
        growth,
        smooth_tests_order0: smooth_ok,
        compact_tests_bounded: compact_ok,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestDetail {
    pub test: String,
    pub order: usize,
    pub verdict: AsymptoticVerdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModerateReport {
    /// Worst verdict over the bank and derivative orders.
    pub verdict: AsymptoticVerdict,
    pub worst: (String, usize),
    pub details: Vec<TestDetail>,
    /// Chart estimate cross-check: derivatives of the representative itself.
    pub chart_verdict: AsymptoticVerdict,
    pub bank_size: usize,
}

impl ModerateReport {
    pub fn moderate(&self) -> bool {
        self.verdict.classification.is_moderate() && self.chart_verdict.classification.is_moderate()
    }
}

/// Derivative norms per order of `g_ε(x)` over sampled points, as sample
/// curves indexed `[test][order][eps]`.
fn derivative_sups<F>(cfg: &CheckConfig, n_tests: usize, k_max: usize, f: F) -> Result<Vec<Vec<Vec<f64>>>>
where
    F: Fn(f64) -> Result<Vec<Vec<f64>>> + Sync,
{
    let per = per_eps(&cfg.grid, f)?;
    Ok((0..n_tests)
        .map(|t| (0..=k_max).map(|k| per.iter().map(|v| v[t][k]).collect()).collect())
        .collect())
}

/// Moderateness through the test bank: `sup_K |D^{(k)}(f∘u_ε)|` for every
/// bank member and `k ≤ k_max` must be moderate.
pub fn check_moderate(u: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<ModerateReport> {
    let cb = check_cbounded(u, k, cfg)?;
    let Some((chart, witness)) = cb.witness else {
        return Err(Error::NotCBounded(u.label.clone()));
    };
    let (rep_chart, rep) = u.rep_from(k.chart)?;
    let bank = scalar_bank(chart, &witness, cfg.bank_size);
    let kk = cfg.k_max;
    let focus = u.focus(k.chart);
    let target = &u.target;
    let sups = derivative_sups(cfg, bank.len() + 1, kk, |eps| {
        let mut acc = vec![vec![0.0f64; kk + 1]; bank.len() + 1];
        for x in k.points_at(eps, &focus) {
            let seeds = Jet::seed(&x, kk);
            let y = match rep.jets_at(eps, &seeds) {
                Ok(y) => target.transition_jets(rep_chart, chart, &y)?,
                Err(Error::NonFinite(_)) => {
                    for a in acc.iter_mut() {
                        a.iter_mut().for_each(|v| *v = f64::INFINITY);
                    }
                    continue;
                }
                Err(e) => return Err(e),
            };
            for (t, f) in bank.iter().enumerate() {
                for (o, v) in order_norms(&f.jet(&y), kk).into_iter().enumerate() {
                    acc[t][o] = acc[t][o].max(v);
                }
            }
            for comp in &y {
                for (o, v) in order_norms(comp, kk).into_iter().enumerate() {
                    acc[bank.len()][o] = acc[bank.len()][o].max(v);
                }
            }
        }
        Ok(acc)
    })?;
    let mut details = Vec::new();
    let mut worst: Option<(AsymptoticVerdict, String, usize)> = None;
    for (t, f) in bank.iter().enumerate() {
        for (o, s) in sups[t].iter().enumerate() {
            let v = cfg.classify_growth(s)?.with_order_cap(kk);
            let replace = match &worst {
                None => true,
                Some((w, _, _)) => w.clone().worst(v.clone()) == v && v != *w,
            };
            if replace {
                worst = Some((v.clone(), f.id.clone(), o));
            }
            details.push(TestDetail {
                test: f.id.clone(),
                order: o,
                verdict: v,
            });
        }
    }
    let mut chart_verdict: Option<AsymptoticVerdict> = None;
    for s in &sups[bank.len()] {
        let v = cfg.classify_growth(s)?.with_order_cap(kk);
        chart_verdict = Some(match chart_verdict {
            None => v,
            Some(c) => c.worst(v),
        });
    }
    let (verdict, wid, wk) = worst.expect("bank is non-empty");
    Ok(ModerateReport {
        verdict,
        worst: (wid, wk),
        details,
        chart_verdict: chart_verdict.expect("k_max >= 0"),
        bank_size: bank.len(),
    })
}

/// Growth of a vector-valued net on `K`, one curve per derivative order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetGrowth {
    /// Worst verdict over all orders.
    pub verdict: AsymptoticVerdict,
    pub per_order: Vec<AsymptoticVerdict>,
    /// `sup_K max_{|α|=k} |∂^α u_ε|`, indexed `[order][eps]`.
    pub samples: Vec<Vec<f64>>,
}

/// Classify `(u_ε)` as a net of smooth maps into ℝᵐ by the sup over `K` of
/// its derivatives up to `cfg.k_max`. No c-boundedness is required.
pub fn classify_net(u: &Net, k: &CompactSet, cfg: &CheckConfig) -> Result<NetGrowth> {
    let kk = cfg.k_max;
    let sups = derivative_sups(cfg, 1, kk, |eps| {
        let mut acc = vec![0.0f64; kk + 1];
        for x in k.points_at(eps, u.focus()) {
            let y = match u.jets_at(eps, &Jet::seed(&x, kk)) {
                Ok(y) => y,
                Err(Error::NonFinite(_)) => {
                    acc.iter_mut().for_each(|v| *v = f64::INFINITY);
                    continue;
                }
                Err(e) => return Err(e),
            };
            for comp in &y {
                for (o, v) in order_norms(comp, kk).into_iter().enumerate() {
                    acc[o] = acc[o].max(v);
                }
            }
        }
        Ok(vec![acc])
    })?;
    let samples = sups.into_iter().next().expect("one curve set");
    let per_order = samples
        .iter()
        .map(|s| cfg.classify_growth(s).map(|v| v.with_order_cap(kk)))
        .collect::<Result<Vec<_>>>()?;
    let verdict = per_order
        .iter()
        .cloned()
        .reduce(|a, b| a.worst(b))
        .expect("k_max >= 0");
    Ok(NetGrowth {
        verdict,
        per_order,
        samples,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteVerdict {
    pub equivalent: bool,
    pub verdict: AsymptoticVerdict,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    /// `sup_K d_h(u_ε, v_ε)` decay.
    pub distance: RouteVerdict,
    /// `f∘u_ε − f∘v_ε` negligible for every bank member.
    pub bank: RouteVerdict,
    /// Chart-local order-0 difference.
    pub chart: RouteVerdict,
    pub bank_size: usize,
}

impl EquivalenceReport {
    pub fn routes_agree(&self) -> bool {
        self.distance.equivalent == self.bank.equivalent && self.bank.equivalent == self.chart.equivalent
    }
}

/// Pointwise comparison data for two nets on `K`: per grid ε, the sampled
/// images of both nets in a common target chart.
pub(crate) struct PairSamples {
    pub chart: usize,
    /// `[eps][point] -> (u image, v image)`.
    pub images: Vec<Vec<(ManifoldPoint, ManifoldPoint)>>,
    pub points: Vec<Vec<Vec<f64>>>,
}

pub(crate) fn pair_samples(u: &ManifoldNet, v: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<PairSamples> {
    if u.target.dim() != v.target.dim() || u.source.dim() != v.source.dim() {
        return Err(Error::AtlasMismatch("nets have different source or target dimensions".into()));
    }
    let (chart, _) = u.rep_from(k.chart)?;
    let focus = union_focus(&[u, v], k.chart);
    let per = per_eps(&cfg.grid, |eps| {
        let pts = k.points_at(eps, &focus);
        let imgs = pts
            .iter()
            .map(|x| {
                let p = ManifoldPoint::new(k.chart, x.clone());
                Ok((u.eval_point(eps, &p)?, v.eval_point(eps, &p)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((pts, imgs))
    })?;
    let (points, images) = per.into_iter().unzip();
    Ok(PairSamples { chart, images, points })
}

fn chart_difference(target: &Atlas, chart: usize, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    let (Some(ya), Some(yb)) = (target.map_point(a, chart)?, target.map_point(b, chart)?) else {
        return Ok(f64::INFINITY);
    };
    Ok(ya.iter().zip(&yb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

pub(crate) fn point_distance(target: &Atlas, a: &ManifoldPoint, b: &ManifoldPoint) -> Result<f64> {
    if a.chart == b.chart {
        chart_distance(target, a.chart, &a.coords, &b.coords)
    } else {
        riemannian_distance(target, a, b)
    }
}

/// `u ~ v` on `K` by three independent routes, which must agree.
pub fn check_equivalent(u: &ManifoldNet, v: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<EquivalenceReport> {
    for net in [u, v] {
        let m = check_moderate(net, k, cfg).map_err(|e| match e {
            Error::NotCBounded(l) => Error::NotModerate(l),
            other => other,
        })?;
        if !m.moderate() {
            return Err(Error::NotModerate(net.label.clone()));
        }
    }
    let report = equivalence_routes(u, v, k, cfg)?;
    if !report.routes_agree() {
        return Err(Error::InconsistentTests(format!(
            "`{}` vs `{}`: distance {}, bank {}, chart {}",
            u.label, v.label, report.distance.equivalent, report.bank.equivalent, report.chart.equivalent
        )));
    }
    Ok(report)
}

/// The three routes without the moderateness precondition or agreement check.
pub fn equivalence_routes(u: &ManifoldNet, v: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<EquivalenceReport> {
    let ps = pair_samples(u, v, k, cfg)?;
    let target = &u.target;
    let mut dist = Vec::new();
    let mut diff = Vec::new();
    for imgs in &ps.images {
        let mut d = 0.0f64;
        let mut c = 0.0f64;
        for (a, b) in imgs {
            d = d.max(point_distance(target, a, b)?);
            c = c.max(chart_difference(target, ps.chart, a, b)?);
        }
        dist.push(d);
        diff.push(c);
    }
    let dv = cfg.classify(&dist)?;
    let cv = cfg.classify(&diff)?;

    let region = images_hull(target, ps.chart, &ps.images)?;
    let bank = scalar_bank(ps.chart, &region, cfg.bank_size);
    let (bank_eq, bank_v, worst) = bank_route(target, ps.chart, &bank, &ps.images, cfg)?;
    Ok(EquivalenceReport {
        equivalent: cfg.negligible(&dv),
        distance: RouteVerdict {
            equivalent: cfg.negligible(&dv),
            verdict: dv,
            detail: "sup d_h".into(),
        },
        bank: RouteVerdict {
            equivalent: bank_eq,
            verdict: bank_v,
            detail: worst,
        },
        chart: RouteVerdict {
            equivalent: cfg.negligible(&cv),
            verdict: cv,
            detail: format!("chart {}", ps.chart),
        },
        bank_size: bank.len(),
    })
}

pub(crate) fn images_hull(target: &Atlas, chart: usize, images: &[Vec<(ManifoldPoint, ManifoldPoint)>]) -> Result<BoxDomain> {
    let start = images.len() / 2;
    let mut pts = Vec::new();
    for imgs in &images[start..] {
        for (a, b) in imgs {
            for p in [a, b] {
                if let Some(y) = target.map_point(p, chart)? {
                    pts.push(y);
                }
            }
        }
    }
    BoxDomain::hull(target.dim(), pts.iter().map(|v| v.as_slice())).ok_or(Error::ImageEscapesAtlas { eps: 0.0 })
}

/// Worst `sup |f∘u − f∘v|` verdict over the bank.
fn bank_route(
    target: &Atlas,
    chart: usize,
    bank: &[ScalarTest],
    images: &[Vec<(ManifoldPoint, ManifoldPoint)>],
    cfg: &CheckConfig,
) -> Result<(bool, AsymptoticVerdict, String)> {
    let mut all = true;
    let mut worst: Option<(AsymptoticVerdict, String)> = None;
    for f in bank {
        let mut s = Vec::with_capacity(images.len());
        for imgs in images {
            let mut m = 0.0f64;
            for (a, b) in imgs {
                let fa = target.map_point(a, chart)?.map(|y| f.eval(&y)).unwrap_or(0.0);
                let fb = target.map_point(b, chart)?.map(|y| f.eval(&y)).unwrap_or(0.0);
                m = m.max((fa - fb).abs());
            }
            s.push(m);
        }
        let v = cfg.classify(&s)?;
        if !cfg.negligible(&v) {
            all = false;
        }
        worst = Some(match worst {
            None => (v, f.id.clone()),
            Some((w, id)) => {
                if rank_key(&v) > rank_key(&w) {
                    (v, f.id.clone())
                } else {
                    (w, id)
                }
            }
        });
    }
    let (v, id) = worst.ok_or(Error::EmptyList)?;
    Ok((all, v, id))
}

fn rank_key(v: &AsymptoticVerdict) -> (u8, i64) {
    match v.classification {
        Classification::Negligible { m } => (0, -(m as i64)),
        Classification::Moderate { n } => (1, n as i64),
        Classification::Neither => (2, 0),
    }
}

/// Compactly supported generalized point `p̃ = [(p_ε)_ε]` of a manifold.
#[derive(Clone)]
pub struct GeneralizedManifoldPoint {
    pub label: String,
    at: Arc<dyn Fn(f64) -> ManifoldPoint + Send + Sync>,
    pub support: CompactSet,
    /// `p_ε ∈ support` for all `ε ≤ eps0`.
    pub eps0: f64,
}

impl fmt::Debug for GeneralizedManifoldPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GeneralizedManifoldPoint({})", self.label)
    }
}

impl GeneralizedManifoldPoint {
    pub fn new<F>(label: impl Into<String>, support: CompactSet, f: F) -> Self
    where
        F: Fn(f64) -> ManifoldPoint + Send + Sync + 'static,
    {
        GeneralizedManifoldPoint {
            label: label.into(),
            at: Arc::new(f),
            support,
            eps0: 1.0,
        }
    }

    /// Point of ℝⁿ (chart 0) given by coordinates, supported on `support`.
    pub fn euclidean<F>(label: impl Into<String>, support: CompactSet, f: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        let chart = support.chart;
        Self::new(label, support, move |e| ManifoldPoint::new(chart, f(e)))
    }

    pub fn constant(chart: usize, q: Vec<f64>) -> Self {
        let support = CompactSet {
            id: format!("{{{q:?}}}"),
            chart,
            region: BoxDomain::new(q.clone(), q.clone()),
            resolution: 2,
            jitter: 0,
            seed: 0,
        };
        Self::new(format!("{q:?}"), support, move |_| ManifoldPoint::new(chart, q.clone()))
    }

    pub fn with_eps0(mut self, eps0: f64) -> Self {
        self.eps0 = eps0;
        self
    }

    pub fn at(&self, eps: f64) -> ManifoldPoint {
        (self.at)(eps)
    }

    /// Coordinates in `chart` (the point must lie there).
    pub fn coords_in(&self, atlas: &Atlas, chart: usize, eps: f64) -> Result<Vec<f64>> {
        atlas
            .map_point(&self.at(eps), chart)?
            .ok_or(Error::SupportEscapes { eps })
    }

    /// `p_ε ∈ support` at every grid `ε ≤ eps0`.
    pub fn check_support(&self, atlas: &Atlas, grid: &EpsGrid) -> Result<()> {
        for &eps in grid.values().iter().filter(|&&e| e <= self.eps0) {
            let p = self.at(eps);
            let inside = atlas
                .map_point(&p, self.support.chart)
                .ok()
                .flatten()
                .is_some_and(|y| self.support.region.expanded(1e-12).contains(&y));
            if !inside {
                return Err(Error::SupportEscapes { eps });
            }
        }
        Ok(())
    }

    /// Coordinates in the support chart as a generalized number.
    pub fn as_number(&self, atlas: &Atlas) -> GeneralizedNumber {
        let this = self.clone();
        let atlas = atlas.clone();
        let chart = self.support.chart;
        let dim = atlas.dim();
        GeneralizedNumber::new(dim, move |e| {
            this.coords_in(&atlas, chart, e)
                .unwrap_or_else(|_| vec![f64::NAN; dim])
        })
    }
}

/// `p̃ ~ q̃` on `atlas` (distance route cross-checked by a test bank).
pub fn gmpoint_equivalent(p: &GeneralizedManifoldPoint, q: &GeneralizedManifoldPoint, atlas: &Atlas, cfg: &CheckConfig) -> Result<bool> {
    let chart = p.support.chart;
    let a = p.as_number(atlas);
    let b = GeneralizedNumber::new(atlas.dim(), {
        let q = q.clone();
        let atlas = atlas.clone();
        move |e| q.coords_in(&atlas, chart, e).unwrap_or_else(|_| vec![f64::NAN; atlas.dim()])
    });
    let dist = |x: &[f64], y: &[f64]| -> Result<f64> {
        if x.iter().chain(y).any(|v| v.is_nan()) {
            return Ok(f64::INFINITY);
        }
        if atlas.has_metric() {
            chart_distance(atlas, chart, x, y)
        } else {
            crate::asymptotics::euclidean(x, y)
        }
    };
    Ok(gpoint_equivalent(&a, &b, &cfg.grid, dist, &cfg.params)?.equivalent)
}

/// `u(p̃) = [(u_ε(p_ε))_ε]`, supported on the c-boundedness witness from the
/// small half of the grid on.
pub fn point_value(u: &ManifoldNet, p: &GeneralizedManifoldPoint, cfg: &CheckConfig) -> Result<GeneralizedManifoldPoint> {
    p.check_support(&u.source, &cfg.grid)?;
    let cb = check_cbounded(u, &p.support, cfg)?;
    let Some((chart, witness)) = cb.witness else {
        return Err(Error::NotCBounded(u.label.clone()));
    };
    let eps0 = p.eps0.min(cfg.grid.values()[cfg.grid.small_half_start()]);
    // the witness is a sampled hull; the images of this point join it
    let mut region = witness;
    for &e in cfg.grid.values().iter().filter(|&&e| e <= eps0) {
        let img = u.eval_point(e, &p.at(e))?;
        if let Some(y) = u.target.map_point(&img, chart)? {
            region = BoxDomain::hull(region.dim(), [region.lo.as_slice(), region.hi.as_slice(), y.as_slice()]).expect("non-empty");
        }
    }
    let margin = 1e-6 * (1.0 + region.widths().iter().cloned().fold(0.0, f64::max));
    let support = CompactSet {
        id: format!("{}(K')", u.label),
        chart,
        region: region.expanded(margin),
        resolution: p.support.resolution,
        jitter: p.support.jitter,
        seed: p.support.seed,
    };
    let net = u.clone();
    let pt = p.clone();
    let value = GeneralizedManifoldPoint::new(format!("{}({})", u.label, p.label), support, move |e| {
        net.eval_point(e, &pt.at(e))
            .unwrap_or_else(|_| ManifoldPoint::new(chart, vec![f64::NAN; net.target.dim()]))
    })
    .with_eps0(eps0);
    value.check_support(&u.target, &cfg.grid)?;
    Ok(value)
}

/// Adversarial generalized point: per grid ε the sampled point of `K` where
/// the chart difference of `u` and `v` is largest (lowest index on ties),
/// held constant on `(ε_{j+1}, ε_j]`.
pub fn adversarial_point(u: &ManifoldNet, v: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<GeneralizedManifoldPoint> {
    let ps = pair_samples(u, v, k, cfg)?;
    let mut chosen = Vec::with_capacity(ps.images.len());
    for (imgs, pts) in ps.images.iter().zip(&ps.points) {
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (i, (a, b)) in imgs.iter().enumerate() {
            let d = chart_difference(&u.target, ps.chart, a, b)?;
            if d > best.0 {
                best = (d, i);
            }
        }
        chosen.push(pts[best.1].clone());
    }
    Ok(stepwise_point("adversarial", k, &cfg.grid, chosen))
}

/// `p_ε := points[j]` for `ε_{j+1} < ε ≤ ε_j`.
pub(crate) fn stepwise_point(label: &str, k: &CompactSet, grid: &EpsGrid, points: Vec<Vec<f64>>) -> GeneralizedManifoldPoint {
    let eps = grid.values().to_vec();
    let chart = k.chart;
    GeneralizedManifoldPoint::new(label, k.clone(), move |e| {
        let j = eps.iter().rposition(|&g| e <= g).unwrap_or(0);
        ManifoldPoint::new(chart, points[j].clone())
    })
}

/// `n` seeded generalized points of `K`: fixed points, drifting points
/// `c + ε·d` and oscillating points `c + a·sin(ω/ε)`.
pub fn random_points(k: &CompactSet, n: usize, seed: u64) -> Vec<GeneralizedManifoldPoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = k.dim();
    let r = &k.region;
    (0..n)
        .map(|i| {
            let w: Vec<f64> = (0..dim).map(|d| r.hi[d] - r.lo[d]).collect();
            let c: Vec<f64> = (0..dim).map(|d| r.lo[d] + rng.gen_range(0.25..0.75) * w[d]).collect();
            let dir: Vec<f64> = (0..dim).map(|d| rng.gen_range(-0.2..0.2) * w[d]).collect();
            let omega = rng.gen_range(0.5..3.0);
            let kind = i % 3;
            GeneralizedManifoldPoint::euclidean(format!("random{i}"), k.clone(), move |e| {
                c.iter()
                    .zip(&dir)
                    .map(|(ci, di)| match kind {
                        0 => *ci,
                        1 => ci + e * di,
                        _ => ci + di * (omega / e).sin(),
                    })
                    .collect()
            })
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointValueReport {
    pub equal: bool,
    /// Label of the first separating point.
    pub separated_by: Option<String>,
    pub points_tested: usize,
}

/// `u(p̃) ~ v(p̃)` for the adversarial point of `K` and every supplied point.
pub fn check_pointvalue_equality(
    u: &ManifoldNet,
    v: &ManifoldNet,
    k: &CompactSet,
    points: &[GeneralizedManifoldPoint],
    cfg: &CheckConfig,
) -> Result<PointValueReport> {
    let mut all = vec![adversarial_point(u, v, k, cfg)?];
    all.extend(points.iter().cloned());
    for p in &all {
        let a = point_value(u, p, cfg)?;
        let b = point_value(v, p, cfg)?;
        if !gmpoint_equivalent(&a, &b, &u.target, cfg)? {
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

/// Slicewise `v_ε ∘ u_ε` through matching intermediate charts.
pub fn compose(u: &ManifoldNet, v: &ManifoldNet) -> Result<ManifoldNet> {
    if u.target.dim() != v.source.dim() || u.target.charts().len() != v.source.charts().len() {
        return Err(Error::AtlasMismatch(format!(
            "target of `{}` does not match source of `{}`",
            u.label, v.label
        )));
    }
    let mut out = ManifoldNet::new(format!("{}∘{}", v.label, u.label), u.source.clone(), v.target.clone());
    for ((s, t), inner) in &u.reps {
        for ((t2, z), outer) in &v.reps {
            if t == t2 {
                let c = compose_nets(outer, inner)?;
                out.reps.insert((*s, *z), c);
            }
        }
    }
    if out.reps.is_empty() {
        return Err(Error::AtlasMismatch("no matching intermediate charts".into()));
    }
    Ok(out)
}

/// [`compose`] with the c-boundedness precondition and a post-hoc
/// moderateness check on `K`.
pub fn compose_checked(u: &ManifoldNet, v: &ManifoldNet, k: &CompactSet, cfg: &CheckConfig) -> Result<ManifoldNet> {
    if !check_cbounded(u, k, cfg)?.cbounded {
        return Err(Error::NotCBounded(u.label.clone()));
    }
    let c = compose(u, v)?;
    let m = check_moderate(&c, k, cfg).map_err(|_| Error::NotModerate(c.label.clone()))?;
    if !m.moderate() {
        return Err(Error::NotModerate(c.label.clone()));
    }
    Ok(c)
}

/// `u + c·w` in the chart representatives (for perturbation tests on ℝⁿ targets).
pub fn perturb(u: &ManifoldNet, w: &Net, c: f64) -> Result<ManifoldNet> {
    let mut out = u.clone();
    for net in out.reps.values_mut() {
        *net = crate::net::linear_combination(&[net.clone(), w.clone()], &[1.0, c])?;
    }
    out.label = format!("{}+{}·{}", u.label, c, w.label());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CheckConfig {
        CheckConfig::default()
    }

    fn k1() -> CompactSet {
        CompactSet::interval(-1.0, 1.0, 33)
    }

    fn net(e: &str) -> ManifoldNet {
        ManifoldNet::from_exprs(&[e], &["x"], e).unwrap()
    }

    #[test]
    fn cbounded_examples() {
        let r = check_cbounded(&net("sin(x/eps)"), &k1(), &cfg()).unwrap();
        assert!(r.cbounded);
        let (_, w) = r.witness.unwrap();
        assert!(w.lo[0] >= -1.0 && w.hi[0] <= 1.0 && w.lo[0] < -0.99 && w.hi[0] > 0.99);
        assert!(r.smooth_tests_order0);

        let r = check_cbounded(&net("1/eps"), &k1(), &cfg()).unwrap();
        assert!(!r.cbounded);
        assert!(!r.smooth_tests_order0);
        assert!(r.compact_tests_bounded);

        let r = check_cbounded(&net("0.3"), &k1(), &cfg()).unwrap();
        let (_, w) = r.witness.unwrap();
        assert_eq!(w, BoxDomain::new(vec![0.3], vec![0.3]));
    }

    #[test]
    fn moderate_examples() {
        let c = cfg().with_k_max(2);
        let r = check_moderate(&net("sin(x/eps)"), &k1(), &c).unwrap();
        assert_eq!(r.verdict.classification, Classification::Moderate { n: 2 });
        assert_eq!(r.verdict.tested_order_cap, 2);
        assert_eq!(r.chart_verdict.classification, Classification::Moderate { n: 2 });
        let r = check_moderate(&net("x"), &k1(), &c).unwrap();
        assert_eq!(r.verdict.classification, Classification::Moderate { n: 0 });
        let short = cfg().with_k_max(1).with_grid(EpsGrid::dyadic(2, 8).unwrap());
        let r = check_moderate(&net("sin(exp(1/eps)*x)"), &k1(), &short).unwrap();
        assert_eq!(r.verdict.classification, Classification::Neither);
        assert!(matches!(check_moderate(&net("1/eps"), &k1(), &c), Err(Error::NotCBounded(_))));
    }

    #[test]
    fn net_growth_examples() {
        let c = cfg().with_k_max(2);
        let g = classify_net(&Net::from_exprs(&["eps^-3 * sin(x)"], &["x"], "u").unwrap(), &k1(), &c).unwrap();
        assert_eq!(g.verdict.classification, Classification::Moderate { n: 3 });
        assert!((g.verdict.slope + 3.0).abs() < 0.1);
        let g = classify_net(&Net::from_exprs(&["sin(x/eps)"], &["x"], "osc").unwrap(), &k1(), &c).unwrap();
        assert_eq!(g.per_order[0].classification, Classification::Moderate { n: 0 });
        assert_eq!(g.verdict.classification, Classification::Moderate { n: 2 });
        let g = classify_net(&Net::from_exprs(&["eps^2*x"], &["x"], "e2").unwrap(), &k1(), &c).unwrap();
        assert_eq!(g.verdict.classification, Classification::Negligible { m: 2 });
    }

    #[test]
    fn equivalence_examples() {
        let c = cfg().with_k_max(1);
        let r = check_equivalent(&net("x"), &net("x+exp(-1/eps)"), &k1(), &c).unwrap();
        assert!(r.equivalent && r.routes_agree());
        let r = check_equivalent(&net("eps*x"), &net("eps^2*x^2"), &k1(), &c).unwrap();
        assert!(!r.equivalent && r.routes_agree());
        let r = check_equivalent(&net("sin(x/eps)"), &net("sin(x/eps)"), &k1(), &c).unwrap();
        assert!(r.equivalent);
        assert!(matches!(
            check_equivalent(&net("x/eps"), &net("x"), &k1(), &c),
            Err(Error::NotModerate(_))
        ));
    }

    #[test]
    fn point_value_examples() {
        let c = cfg();
        let k = CompactSet::interval(0.5, 2.5, 9);
        let p = GeneralizedManifoldPoint::euclidean("1+eps", k.clone(), |e| vec![1.0 + e]);
        let v = point_value(&net("x^2"), &p, &c).unwrap();
        assert_eq!(v.at(0.25).coords, vec![1.5625]);

        let q = point_value(&net("0.7"), &p, &c).unwrap();
        assert_eq!(q.at(0.01).coords, vec![0.7]);

        let zero = GeneralizedManifoldPoint::constant(0, vec![0.0]);
        let shifted = point_value(&net("x+eps"), &zero, &c).unwrap();
        assert_eq!(shifted.at(0.125).coords, vec![0.125]);
        let origin = GeneralizedManifoldPoint::constant(0, vec![0.0]);
        let atlas = Atlas::euclidean(1);
        // [(ε)] is not [(0)] but tends to it
        let e_pt = GeneralizedManifoldPoint::euclidean("eps", CompactSet::interval(0.0, 1.0, 3), |e| vec![e]);
        assert!(!gmpoint_equivalent(&e_pt, &origin, &atlas, &c).unwrap());
        let growth = c.classify(&c.grid.sample(|e| Ok(shifted.at(e).coords[0].abs())).unwrap()).unwrap();
        assert_eq!(growth.classification, Classification::Negligible { m: 1 });

        let outside = GeneralizedManifoldPoint::euclidean("far", k.clone(), |e| vec![3.0 + e]);
        assert!(matches!(point_value(&net("x"), &outside, &c), Err(Error::SupportEscapes { .. })));
    }

    #[test]
    fn pointvalue_equality_examples() {
        let c = cfg();
        let pts = random_points(&k1(), 4, 1);
        let r = check_pointvalue_equality(&net("x"), &net("x+exp(-1/eps)"), &k1(), &pts, &c).unwrap();
        assert!(r.equal);
        let r = check_pointvalue_equality(&net("eps*x"), &net("eps^2*x^2"), &k1(), &pts, &c).unwrap();
        assert!(!r.equal);
        assert_eq!(r.separated_by.as_deref(), Some("adversarial"));
        let adv = adversarial_point(&net("eps*x"), &net("eps^2*x^2"), &k1(), &c).unwrap();
        assert!(adv.at(0.01).coords[0].abs() > 0.9);
    }

    #[test]
    fn composition_examples() {
        let c = cfg().with_k_max(1);
        let comp = compose(&net("x"), &net("x+eps")).unwrap();
        assert_eq!(comp.eval_point(0.5, &ManifoldPoint::new(0, vec![1.0])).unwrap().coords, vec![1.5]);
        let checked = compose_checked(&net("sin(x/eps)"), &net("x^2"), &k1(), &c).unwrap();
        let direct = net("sin(x/eps)^2");
        assert!(check_equivalent(&checked, &direct, &k1(), &c).unwrap().equivalent);
        assert!(matches!(
            compose_checked(&net("1/eps"), &net("x"), &k1(), &c),
            Err(Error::NotCBounded(_))
        ));
        let two = ManifoldNet::from_exprs(&["x", "x"], &["x"], "diag").unwrap();
        assert!(matches!(compose(&two, &net("x")), Err(Error::AtlasMismatch(_))));
    }

    #[test]
    fn multi_chart_representatives_are_compatible() {
        use crate::geometry::atlas::TransitionKind;
        let mut target = Atlas::new(2);
        let cart = target.add_chart("cart", BoxDomain::cube(2, -3.0, 3.0));
        let polar = target.add_chart("polar", BoxDomain::new(vec![0.5, -3.0], vec![4.0, 3.0]));
        target.set_metric(cart, &["1", "0", "0", "1"]).unwrap();
        target.set_metric(polar, &["1", "0", "0", "x^2"]).unwrap();
        target.add_transition(cart, polar, TransitionKind::Polar).unwrap();
        let circle = ManifoldNet::new("circle", Atlas::euclidean(1), target)
            .with_rep(0, 0, Net::from_exprs(&["cos(x)", "sin(x)"], &["x"], "cart").unwrap())
            .unwrap()
            .with_rep(0, 1, Net::from_exprs(&["1+0*x", "x"], &["x"], "polar").unwrap())
            .unwrap();
        circle.check_compatibility(&k1(), &EpsGrid::dyadic(1, 6).unwrap()).unwrap();
        let bad = circle
            .clone()
            .with_rep(0, 1, Net::from_exprs(&["1+eps", "x"], &["x"], "polar").unwrap())
            .unwrap();
        assert!(bad.check_compatibility(&k1(), &EpsGrid::dyadic(1, 6).unwrap()).is_err());
    }
}
