//! Weak limits and association: mollifiers and the regularizations they
//! induce, pairings with test densities, association to zero, distributional
//! shadows and k-association of manifold-valued nets.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::EpsGrid;
use crate::error::{Error, Result};
use crate::geometry::atlas::Atlas;
use crate::geometry::bank::{scalar_bank, Density};
use crate::jet::Jet;
use crate::manifold_maps::{check_moderate, images_hull, pair_samples, per_eps, point_distance, CheckConfig, ManifoldNet};
use crate::net::{linear_combination, BoxDomain, Net, J, UNLIMITED};
use crate::profiles::{bump, bump_value};
use crate::quadrature::{adaptive_simpson, gauss_legendre, SimpsonOptions};

/// Cells of the tabulated primitive.
const CDF_CELLS: usize = 2048;
/// Pairings below this are quadrature noise (100× the absolute tolerance).
pub const PAIRING_NOISE: f64 = 1e-8;

/// Compactly supported unit-mass profile `ρ(t) = c·w(t/r)·bump(t/r)/r` on
/// `[−r, r]`, `w` a polynomial weight; `ρ_ε(x) = ε^{-1} ρ(x/ε)`.
#[derive(Clone)]
pub struct Mollifier {
    pub id: String,
    weight: Vec<f64>,
    radius: f64,
    norm: f64,
    /// Primitive at the cell edges `−r + i·2r/CDF_CELLS`.
    cdf: Arc<Vec<f64>>,
}

impl fmt::Debug for Mollifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mollifier")
            .field("id", &self.id)
            .field("weight", &self.weight)
            .field("radius", &self.radius)
            .finish()
    }
}

fn gauss_cell(a: f64, b: f64, nodes: &[f64], weights: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let (m, h) = ((a + b) / 2.0, (b - a) / 2.0);
    nodes.iter().zip(weights).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
}

impl Mollifier {
    /// Normalized `w(t)·exp(−1/(1−t²))` with `w(t) = Σ weight[k] t^k`.
    pub fn new(id: impl Into<String>, weight: Vec<f64>) -> Result<Self> {
        let mut m = Mollifier {
            id: id.into(),
            weight,
            radius: 1.0,
            norm: 1.0,
            cdf: Arc::new(Vec::new()),
        };
        let (x, w) = gauss_legendre::<f64>(16);
        let h = 2.0 / CDF_CELLS as f64;
        let mut cdf = Vec::with_capacity(CDF_CELLS + 1);
        cdf.push(0.0);
        for i in 0..CDF_CELLS {
            let a = -1.0 + i as f64 * h;
            let s = gauss_cell(a, a + h, &x, &w, |t| m.raw(t));
            cdf.push(cdf[i] + s);
        }
        let mass = cdf[CDF_CELLS];
        let negative = (0..=200).any(|i| m.raw(-1.0 + i as f64 / 100.0) < 0.0);
        if !(mass.is_finite() && mass > 0.0) || negative {
            return Err(Error::Config(format!("mollifier `{}` is not a positive profile", m.id)));
        }
        m.norm = 1.0 / mass;
        m.cdf = Arc::new(cdf.into_iter().map(|c| c / mass).collect());
        Ok(m)
    }

    /// Normalized `exp(−1/(1−t²))`.
    pub fn standard() -> Self {
        Mollifier::new("bump", vec![1.0]).expect("valid profile")
    }

    /// Normalized `(1+2t²)·exp(−1/(1−t²))`; its `∫ρ²` differs from the
    /// standard one by about 9%.
    pub fn weighted() -> Self {
        Mollifier::new("bump_w", vec![1.0, 0.0, 2.0]).expect("valid profile")
    }

    /// Same shape on `[−r, r]`.
    pub fn with_radius(mut self, r: f64) -> Self {
        self.radius = r;
        self.id = format!("{}_r{r}", self.id);
        self
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn raw(&self, s: f64) -> f64 {
        let w: f64 = self.weight.iter().rev().fold(0.0, |acc, a| acc * s + a);
        w * bump_value(s)
    }

    /// `ρ(t)`.
    pub fn profile(&self, t: f64) -> f64 {
        self.norm * self.raw(t / self.radius) / self.radius
    }

    pub fn profile_jet(&self, t: &J) -> J {
        let s = t.scale(1.0 / self.radius);
        let mut w = Jet::constant(t.shape(), 0.0);
        for a in self.weight.iter().rev() {
            w = (&w * &s).add_scalar(*a);
        }
        (&w * &bump(&s)).scale(self.norm / self.radius)
    }

    /// `ρ^{(j)}(t)` for `j = 0..=k`.
    pub fn profile_derivatives(&self, t: f64, k: usize) -> Vec<f64> {
        let j = self.profile_jet(&Jet::seed(&[t], k)[0]);
        (0..=k).map(|i| j.derivative(&[i as u8])).collect()
    }

    /// `∫_{−∞}^t ρ`.
    pub fn primitive(&self, t: f64) -> f64 {
        let s = t / self.radius;
        if s <= -1.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        let h = 2.0 / CDF_CELLS as f64;
        let i = (((s + 1.0) / h) as usize).min(CDF_CELLS - 1);
        let a = -1.0 + i as f64 * h;
        let (x, w) = gauss_legendre::<f64>(8);
        self.cdf[i] + self.norm * gauss_cell(a, s, &x, &w, |v| self.raw(v))
    }

    /// `∫ρ²`, the coefficient of the shadow of `(ε^{-1/2} ρ(x/ε))²`.
    pub fn square_integral(&self) -> f64 {
        let (x, w) = gauss_legendre::<f64>(16);
        let r = self.radius;
        let h = 2.0 * r / 512.0;
        (0..512)
            .map(|i| {
                let a = -r + i as f64 * h;
                gauss_cell(a, a + h, &x, &w, |t| self.profile(t).powi(2))
            })
            .sum()
    }

    pub fn mass(&self) -> f64 {
        self.cdf[CDF_CELLS]
    }
}

/// Singular object to regularize by a mollifier.
#[derive(Clone)]
pub enum Distribution {
    /// `δ`, regularized to `ρ_ε`.
    Delta,
    /// `ε^{-1/2} ρ(x/ε)`: weakly zero, with square of shadow `(∫ρ²)·δ`.
    HalfDelta,
    /// `H`, regularized to `x ↦ ∫_{−∞}^x ρ_ε`.
    Heaviside,
    /// Locally integrable `f` with support in `support` and jump points
    /// `breakpoints`, regularized to `f ∗ ρ_ε`.
    Custom {
        id: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        support: (f64, f64),
        breakpoints: Vec<f64>,
    },
}

impl fmt::Debug for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Distribution::Delta => write!(f, "Delta"),
            Distribution::HalfDelta => write!(f, "HalfDelta"),
            Distribution::Heaviside => write!(f, "Heaviside"),
            Distribution::Custom { id, .. } => write!(f, "Custom({id})"),
        }
    }
}

impl Distribution {
    /// Singular support: where the regularization differs from the limit.
    fn singular_hull(&self) -> (f64, f64) {
        match self {
            Distribution::Custom { support, .. } => *support,
            _ => (0.0, 0.0),
        }
    }
}

/// `ε^{-a} ρ(x/ε)` with analytic jets.
fn scaled_profile(rho: &Mollifier, power: f64, label: String) -> Net {
    let rho = rho.clone();
    Net::from_jet_fn(1, 1, UNLIMITED, label, move |eps, x| {
        vec![rho.profile_jet(&x[0].scale(1.0 / eps)).scale(eps.powf(-power))]
    })
    .with_focus(vec![vec![0.0]])
}

/// Regularization of `dist` by `rho` on a one-dimensional chart domain. The
/// regularized support at `eps_max` must stay inside `domain`.
pub fn embed_distribution(dist: &Distribution, rho: &Mollifier, domain: &BoxDomain, eps_max: f64) -> Result<Net> {
    if domain.dim() != 1 {
        return Err(Error::DimensionMismatch("distributions embed on one-dimensional charts".into()));
    }
    let (lo, hi) = dist.singular_hull();
    let reach = eps_max * rho.radius();
    if lo - reach < domain.lo[0] || hi + reach > domain.hi[0] {
        return Err(Error::SupportEscapesChart { chart: 0 });
    }
    let net = match dist {
        Distribution::Delta => scaled_profile(rho, 1.0, format!("delta[{}]", rho.id)),
        Distribution::HalfDelta => scaled_profile(rho, 0.5, format!("d[{}]", rho.id)),
        Distribution::Heaviside => {
            let r = rho.clone();
            Net::from_jet_fn(1, 1, UNLIMITED, format!("H[{}]", rho.id), move |eps, x| {
                let t = x[0].scale(1.0 / eps);
                let tv = t.value();
                let mut derivs = vec![r.primitive(tv)];
                if t.order() > 0 {
                    derivs.extend(r.profile_derivatives(tv, t.order() - 1));
                }
                vec![t.compose_univariate(&derivs)]
            })
            .with_focus(vec![vec![0.0]])
        }
        Distribution::Custom { id, f, breakpoints, .. } => {
            let (r, f, bps) = (rho.clone(), f.clone(), breakpoints.clone());
            let focus: Vec<Vec<f64>> = bps.iter().map(|b| vec![*b]).collect();
            Net::try_from_jet_fn(1, 1, UNLIMITED, format!("{id}*{}", rho.id), move |eps, x| {
                let xv = x[0].value();
                let rad = r.radius();
                // jump points of s ↦ f(x − εs)
                let opts = SimpsonOptions {
                    breakpoints: bps.iter().map(|b| (xv - b) / eps).collect(),
                    ..SimpsonOptions::default()
                };
                let derivs = (0..=x[0].order())
                    .map(|j| {
                        let v = adaptive_simpson(
                            |s| f(xv - eps * s) * r.profile_derivatives(s, j)[j],
                            -rad,
                            rad,
                            &opts,
                        )?;
                        Ok(v * eps.powi(-(j as i32)))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                Ok(vec![x[0].compose_univariate(&derivs)])
            })
            .with_focus(focus)
        }
    };
    net.with_domain(domain.clone())
}

/// `∫ u_ε ν` over the support of `ν`, resolving ε-width features.
pub fn weak_integral(u: &Net, nu: &Density, eps: f64) -> Result<f64> {
    if u.dim_in() != 1 || u.dim_out() != 1 {
        return Err(Error::DimensionMismatch("weak pairing needs a scalar net on R".into()));
    }
    let (a, b) = nu.support();
    let mut opts = SimpsonOptions::for_eps(eps);
    opts.breakpoints = u.focus().iter().filter_map(|p| p.first().copied()).collect();
    let mut failed = false;
    let v = adaptive_simpson(
        |x| {
            let w = nu.eval(x);
            if w == 0.0 {
                return 0.0;
            }
            match u.eval(eps, &[x]) {
                Ok(y) => y[0] * w,
                Err(_) => {
                    failed = true;
                    f64::NAN
                }
            }
        },
        a,
        b,
        &opts,
    )?;
    if failed {
        return Err(Error::QuadratureNonconvergence { a, b });
    }
    Ok(v)
}

/// Pairings `∫ u_ε ν` for every density and grid ε, `[density][eps]`.
pub fn pairing_table(u: &Net, bank: &[Density], grid: &EpsGrid) -> Result<Vec<Vec<f64>>> {
    let jobs: Vec<(usize, f64)> = (0..bank.len()).flat_map(|d| grid.values().iter().map(move |&e| (d, e))).collect();
    let flat = jobs
        .par_iter()
        .map(|&(d, e)| weak_integral(u, &bank[d], e))
        .collect::<Result<Vec<f64>>>()?;
    Ok(flat.chunks(grid.len()).map(|c| c.to_vec()).collect())
}

/// Quantitative proxy for "→ 0" on a grid-ordered series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroTrend {
    pub tends_to_zero: bool,
    /// Exactly one of the two conditions held.
    pub borderline: bool,
    /// Value at the smallest ε.
    pub last: f64,
    /// Non-increasing over the small half of the grid.
    pub decreasing: bool,
}

/// `|value| < tol` at the smallest ε and `|values|` non-increasing over the
/// small half of the grid; values under `noise` count as zero.
pub fn zero_trend(values: &[f64], grid: &EpsGrid, tol: f64, noise: f64) -> ZeroTrend {
    let settle = |v: f64| if v.abs() <= noise { 0.0 } else { v.abs() };
    let tail: Vec<f64> = values[grid.small_half_start()..].iter().map(|&v| settle(v)).collect();
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));
    let last = values.last().copied().unwrap_or(f64::NAN);
    let small = settle(last) < tol;
    ZeroTrend {
        tends_to_zero: small && decreasing,
        borderline: small != decreasing,
        last,
        decreasing,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityPairing {
    pub density_id: String,
    pub pairings: Vec<f64>,
    pub trend: ZeroTrend,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssociationReport {
    pub associated: bool,
    /// Some density met only one of the two "→ 0" conditions.
    pub borderline: bool,
    pub densities: Vec<DensityPairing>,
}

/// `u ≈ 0`: every bank pairing tends to zero.
pub fn check_associated_zero(u: &Net, bank: &[Density], grid: &EpsGrid, assoc_tol: f64) -> Result<AssociationReport> {
    let table = pairing_table(u, bank, grid)?;
    let densities: Vec<DensityPairing> = bank
        .iter()
        .zip(table)
        .map(|(d, p)| DensityPairing {
            density_id: d.id.clone(),
            trend: zero_trend(&p, grid, assoc_tol, PAIRING_NOISE),
            pairings: p,
        })
        .collect();
    Ok(AssociationReport {
        associated: densities.iter().all(|d| d.trend.tends_to_zero),
        borderline: densities.iter().any(|d| d.trend.borderline),
        densities,
    })
}

/// `u ≈ v` for scalar nets on ℝ.
pub fn check_associated(u: &Net, v: &Net, bank: &[Density], grid: &EpsGrid, assoc_tol: f64) -> Result<AssociationReport> {
    check_associated_zero(&difference(u, v)?, bank, grid, assoc_tol)
}

/// `u − v` keeping both nets' focus points.
pub fn difference(u: &Net, v: &Net) -> Result<Net> {
    let mut focus = u.focus().to_vec();
    focus.extend(v.focus().iter().cloned());
    Ok(linear_combination(&[u.clone(), v.clone()], &[1.0, -1.0])?
        .with_label(format!("{}-{}", u.label(), v.label()))
        .with_focus(focus))
}

/// `f ∘ u` for a scalar function given with its derivatives.
pub fn compose_scalar<F>(u: &Net, label: &str, f: F) -> Net
where
    F: Fn(&J) -> J + Send + Sync + 'static,
{
    let inner = u.clone();
    Net::try_from_jet_fn(1, 1, UNLIMITED, format!("{label}({})", u.label()), move |eps, x| {
        Ok(vec![f(&inner.jets_at(eps, x)?[0])])
    })
    .with_focus(u.focus().to_vec())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowEntry {
    pub density_id: String,
    /// `(ε, ∫ u_ε ν)` in grid order.
    pub pairings: Vec<(f64, f64)>,
    /// Richardson extrapolation from the three smallest ε.
    pub limit: f64,
    /// Observed convergence order of the extrapolation (NaN if the
    /// differences do not contract).
    pub order: f64,
    /// Successive differences tend to zero.
    pub converged: bool,
    pub candidate: Option<f64>,
    /// `|limit − candidate|`.
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShadowReport {
    /// Every pairing converged.
    pub shadow_detected: bool,
    pub entries: Vec<ShadowEntry>,
}

impl ShadowReport {
    pub fn max_relative_residual(&self) -> Option<f64> {
        self.entries
            .iter()
            .map(|e| Some(e.residual? / e.candidate?.abs().max(1e-300)))
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }

    /// Columns `density_id,eps,pairing,extrapolated_limit,candidate,residual`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "density_id,eps,pairing,extrapolated_limit,candidate,residual")?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        for e in &self.entries {
            for &(eps, p) in &e.pairings {
                writeln!(
                    w,
                    "{},{eps:e},{p:e},{:e},{},{}",
                    e.density_id,
                    e.limit,
                    opt(e.candidate),
                    opt(e.residual)
                )?;
            }
        }
        Ok(())
    }
}

fn richardson(eps: &[f64], p: &[f64]) -> (f64, f64) {
    let n = p.len();
    let (p1, p2, p3) = (p[n - 3], p[n - 2], p[n - 1]);
    let (d1, d2) = (p1 - p2, p2 - p3);
    if d2.abs() <= PAIRING_NOISE {
        return (p3, f64::INFINITY);
    }
    let q = d1 / d2;
    let r = eps[n - 2] / eps[n - 1];
    if q <= 1.0 {
        return (p3, f64::NAN);
    }
    let order = q.ln() / r.ln();
    (p3 + d2 / (q - 1.0), order)
}

/// Distributional shadow of a scalar net on ℝ: per density the limit of
/// `∫ u_ε ν`, compared with `candidate(ν)` when given.
pub fn shadow(u: &Net, candidate: Option<&(dyn Fn(&Density) -> f64 + Sync)>, bank: &[Density], grid: &EpsGrid, assoc_tol: f64) -> Result<ShadowReport> {
    let table = pairing_table(u, bank, grid)?;
    let eps = grid.values();
    let mut entries = Vec::with_capacity(bank.len());
    for (d, p) in bank.iter().zip(table) {
        let start = grid.small_half_start();
        let growth = crate::asymptotics::estimate_growth_order(
            &p.iter().map(|v| v.abs()).collect::<Vec<_>>(),
            grid,
            &Default::default(),
        )?;
        if growth.classification.growth().is_some_and(|n| n >= 1) && p[start..].windows(2).all(|w| w[1].abs() > w[0].abs()) {
            return Err(Error::DivergentPairing(d.id.clone()));
        }
        let diffs: Vec<f64> = p.windows(2).map(|w| w[1] - w[0]).collect();
        let diff_grid = EpsGrid::new(eps[1..].to_vec())?;
        let converged = zero_trend(&diffs, &diff_grid, assoc_tol, PAIRING_NOISE).tends_to_zero;
        let (limit, order) = richardson(eps, &p);
        let cand = candidate.map(|c| c(d));
        entries.push(ShadowEntry {
            density_id: d.id.clone(),
            pairings: eps.iter().copied().zip(p).collect(),
            limit,
            order,
            converged,
            candidate: cand,
            residual: cand.map(|c| (limit - c).abs()),
        });
    }
    Ok(ShadowReport {
        shadow_detected: entries.iter().all(|e| e.converged),
        entries,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KAssociationReport {
    pub associated: bool,
    pub order: usize,
    /// `sup_K d_h(u_ε, v_ε)` trend (order 0 only).
    pub distance: Option<ZeroTrend>,
    /// Worst bank test: id and trend of `sup_K |∂^α(f∘u − f∘v)|`, `|α| ≤ k`.
    pub bank: (String, ZeroTrend),
    pub bank_size: usize,
}

/// `u ≈_k v` on `K`: compositions with smooth test functions agree in the
/// weak sense up to order `k`, decided through local uniform convergence of
/// derivatives to order `k`. At `k = 0` the distance route must agree.
pub fn check_k_associated(u: &ManifoldNet, v: &ManifoldNet, l: &crate::geometry::compact::CompactSet, k: usize, cfg: &CheckConfig) -> Result<KAssociationReport> {
    for net in [u, v] {
        let m = check_moderate(net, l, cfg).map_err(|e| match e {
            Error::NotCBounded(s) => Error::NotModerate(s),
            other => other,
        })?;
        if !m.moderate() {
            return Err(Error::NotModerate(net.label().to_string()));
        }
    }
    let target: &Atlas = u.target();
    let ps = pair_samples(u, v, l, cfg)?;
    let region = images_hull(target, ps.chart, &ps.images)?;
    let bank = scalar_bank(ps.chart, &region, cfg.bank_size);
    let tol = cfg.assoc_tol;
    let noise = 1e-12;

    let sups: Vec<Vec<f64>> = if k == 0 {
        ps.images
            .iter()
            .map(|imgs| {
                bank.iter()
                    .map(|f| {
                        let mut m = 0.0f64;
                        for (a, b) in imgs {
                            let fa = target.map_point(a, ps.chart)?.map(|y| f.eval(&y)).unwrap_or(0.0);
                            let fb = target.map_point(b, ps.chart)?.map(|y| f.eval(&y)).unwrap_or(0.0);
                            m = m.max((fa - fb).abs());
                        }
                        Ok(m)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?
    } else {
        let (tu, nu) = u.rep_from(l.chart)?;
        let (tv, nv) = v.rep_from(l.chart)?;
        if tu != tv {
            return Err(Error::AtlasMismatch("higher-order association needs a common target chart".into()));
        }
        per_eps(&cfg.grid, |eps| {
            let mut acc = vec![0.0f64; bank.len()];
            for x in &ps.points[cfg.grid.values().iter().position(|&e| e == eps).expect("grid value")] {
                let seeds = Jet::seed(x, k);
                let (a, b) = (nu.jets_at(eps, &seeds)?, nv.jets_at(eps, &seeds)?);
                for (i, f) in bank.iter().enumerate() {
                    let d = &f.jet(&a) - &f.jet(&b);
                    let m = crate::manifold_maps::order_norms(&d, k).into_iter().fold(0.0, f64::max);
                    acc[i] = acc[i].max(m);
                }
            }
            Ok(acc)
        })?
    };
    let mut worst: Option<(String, ZeroTrend)> = None;
    let mut all = true;
    for (i, f) in bank.iter().enumerate() {
        let s: Vec<f64> = sups.iter().map(|row| row[i]).collect();
        let t = zero_trend(&s, &cfg.grid, tol, noise);
        all &= t.tends_to_zero;
        let replace = match &worst {
            None => true,
            Some((_, w)) => (!t.tends_to_zero && w.tends_to_zero) || (t.tends_to_zero == w.tends_to_zero && t.last.abs() > w.last.abs()),
        };
        if replace {
            worst = Some((f.id.clone(), t));
        }
    }
    let distance = if k == 0 {
        let d = ps
            .images
            .iter()
            .map(|imgs| imgs.iter().map(|(a, b)| point_distance(target, a, b)).try_fold(0.0f64, |m, d| Ok::<_, Error>(m.max(d?))))
            .collect::<Result<Vec<f64>>>()?;
        let t = zero_trend(&d, &cfg.grid, tol, noise);
        if t.tends_to_zero != all {
            return Err(Error::InconsistentRoutes(format!(
                "`{}` vs `{}`: distance {}, bank {all}",
                u.label(),
                v.label(),
                t.tends_to_zero
            )));
        }
        Some(t)
    } else {
        None
    };
    Ok(KAssociationReport {
        associated: all,
        order: k,
        distance,
        bank: worst.ok_or(Error::EmptyList)?,
        bank_size: bank.len(),
    })
}

/// `sup |u_ε − v_ε|` over `[a, b]` sampled on `n` points plus the nets' focus
/// points, with the maximizing abscissa.
pub fn representative_sup_difference(u: &Net, v: &Net, eps: f64, a: f64, b: f64, n: usize) -> Result<(f64, f64)> {
    let mut xs: Vec<f64> = (0..n).map(|i| a + (b - a) * i as f64 / (n - 1).max(1) as f64).collect();
    xs.extend(u.focus().iter().chain(v.focus()).filter_map(|p| p.first().copied()));
    let mut best = (f64::NEG_INFINITY, a);
    for x in xs {
        let d = (u.eval(eps, &[x])?[0] - v.eval(eps, &[x])?[0]).abs();
        if d > best.0 {
            best = (d, x);
        }
    }
    Ok(best)
}

/// The point (if any) of the unit-scale interval where `H_ε = 1/2`.
pub fn heaviside_midpoint(rho: &Mollifier) -> f64 {
    let (mut lo, mut hi) = (-rho.radius(), rho.radius());
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if rho.primitive(m) < 0.5 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Manifold net `ℝ → ℝ` from a scalar net.
pub fn as_manifold_net(u: &Net) -> ManifoldNet {
    ManifoldNet::euclidean(u.clone())
}
