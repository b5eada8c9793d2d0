//! Geodesics of the impulsive pp-wave `ds² = δ(u) f(x,y) du² − du dv + dx² + dy²`
//! with `δ` regularized by a mollifier, and the study of their limit as
//! `ε → 0`: c-boundedness, Cauchy convergence and the limiting kink.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::sync::{Arc, Mutex};

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::association::{check_k_associated, KAssociationReport, Mollifier};
use crate::asymptotics::{estimate_growth_order, AsymptoticVerdict, EpsGrid};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::compact::CompactSet;
use crate::jet::{self, Jet};
use crate::manifold_maps::{check_cbounded, CheckConfig, ManifoldNet};
use crate::net::{BoxDomain, Net};
use crate::ode::{DormandPrince, OdeStats};

/// Wave profile `f(x, y)` in the expression grammar.
#[derive(Debug, Clone)]
pub struct PPWaveProfile {
    pub source: String,
    expr: Expr,
}

impl PPWaveProfile {
    pub fn new(source: &str) -> Result<Self> {
        let expr = Expr::parse(source, &["x", "y"])?;
        if expr.uses_eps() {
            return Err(Error::Config("wave profile may not depend on eps".into()));
        }
        Ok(PPWaveProfile {
            source: source.to_string(),
            expr,
        })
    }

    /// `f(x,y) = x² − y²`.
    pub fn saddle() -> Self {
        PPWaveProfile::new("x^2-y^2").expect("valid profile")
    }

    pub fn flat() -> Self {
        PPWaveProfile::new("0").expect("valid profile")
    }

    /// `(f, ∂_x f, ∂_y f)`.
    pub fn gradient(&self, x: f64, y: f64) -> (f64, f64, f64) {
        let sh = jet::shape(2, 1);
        let j = self.expr.eval_jet(&[Jet::variable(&sh, 0, x), Jet::variable(&sh, 1, y)], 0.0, &sh);
        (j.value(), j.derivative(&[1, 0]), j.derivative(&[0, 1]))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.expr.eval(&[x, y], 0.0)
    }
}

/// Geodesic equations of the metric with `δ` replaced by `δ_ε = ρ_ε`, with
/// `u` as parameter. State `(v, x, y, v̇, ẋ, ẏ)`.
#[derive(Debug, Clone)]
pub struct GeodesicSystem {
    pub profile: PPWaveProfile,
    pub rho: Mollifier,
    pub eps: f64,
}

impl GeodesicSystem {
    pub fn new(profile: PPWaveProfile, rho: Mollifier, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidGrid(format!("eps must be positive, got {eps}")));
        }
        Ok(GeodesicSystem { profile, rho, eps })
    }

    /// `(δ_ε(u), δ_ε'(u))`.
    pub fn pulse(&self, u: f64) -> (f64, f64) {
        let d = self.rho.profile_derivatives(u / self.eps, 1);
        (d[0] / self.eps, d[1] / (self.eps * self.eps))
    }

    /// Half-width of the pulse.
    pub fn pulse_radius(&self) -> f64 {
        self.eps * self.rho.radius()
    }

    /// `v̈ = δ'f + 2δ(f_x ẋ + f_y ẏ)`, `ẍ = ½δ f_x`, `ÿ = ½δ f_y`.
    pub fn rhs(&self, u: f64, s: &[f64], d: &mut [f64]) {
        let (dl, ddl) = self.pulse(u);
        let (f, fx, fy) = if dl == 0.0 && ddl == 0.0 {
            (0.0, 0.0, 0.0)
        } else {
            self.profile.gradient(s[1], s[2])
        };
        d[0] = s[3];
        d[1] = s[4];
        d[2] = s[5];
        d[3] = ddl * f + 2.0 * dl * (fx * s[4] + fy * s[5]);
        d[4] = 0.5 * dl * fx;
        d[5] = 0.5 * dl * fy;
    }

    /// Metric in coordinates `(u, v, x, y)`.
    pub fn metric(&self, u: f64, x: f64, y: f64) -> Matrix4<f64> {
        let g_uu = self.pulse(u).0 * self.profile.eval(x, y);
        Matrix4::new(
            g_uu, -0.5, 0.0, 0.0, //
            -0.5, 0.0, 0.0, 0.0, //
            0.0, 0.0, 1.0, 0.0, //
            0.0, 0.0, 0.0, 1.0,
        )
    }

    /// `g(γ̇, γ̇)` for `γ̇ = (1, v̇, ẋ, ẏ)`; conserved along geodesics.
    pub fn tangent_norm(&self, u: f64, s: &[f64]) -> f64 {
        self.pulse(u).0 * self.profile.eval(s[1], s[2]) - s[3] + s[4] * s[4] + s[5] * s[5]
    }

    /// Relative gap between the hard-coded accelerations and `−Γ^k_ij γ̇^i γ̇^j`
    /// with Christoffel symbols from fourth-order finite differences of the metric.
    pub fn christoffel_residual(&self, u: f64, s: &[f64]) -> f64 {
        let pos = [u, s[0], s[1], s[2]];
        let steps = [1e-3 * self.pulse_radius(), 1e-3, 1e-3, 1e-3];
        let metric_at = |p: &[f64; 4]| self.metric(p[0], p[2], p[3]);
        let dg: Vec<Matrix4<f64>> = (0..4)
            .map(|l| {
                let at = |k: f64| {
                    let mut p = pos;
                    p[l] += k * steps[l];
                    metric_at(&p)
                };
                (at(-2.0) - at(-1.0) * 8.0 + at(1.0) * 8.0 - at(2.0)) / (12.0 * steps[l])
            })
            .collect();
        let ginv = metric_at(&pos).try_inverse().expect("pp-wave metric is nondegenerate");
        let vel = [1.0, s[3], s[4], s[5]];
        let mut fd = [0.0; 4];
        for (k, a) in fd.iter_mut().enumerate() {
            for i in 0..4 {
                for j in 0..4 {
                    let gamma: f64 = (0..4)
                        .map(|l| 0.5 * ginv[(k, l)] * (dg[i][(j, l)] + dg[j][(i, l)] - dg[l][(i, j)]))
                        .sum();
                    *a -= gamma * vel[i] * vel[j];
                }
            }
        }
        let mut d = [0.0; 6];
        self.rhs(u, s, &mut d);
        let analytic = [0.0, d[3], d[4], d[5]];
        let scale = analytic.iter().map(|v| v.abs()).fold(1.0, f64::max);
        fd.iter().zip(&analytic).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
    }
}

/// Initial data at `u0`: `(v, x, y, v̇, ẋ, ẏ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicInit {
    pub u0: f64,
    pub state: [f64; 6],
}

impl GeodesicInit {
    /// At rest transversally at `(x0, y0)`, `v = v̇ = 0`.
    pub fn at_rest(u0: f64, x0: f64, y0: f64) -> Self {
        GeodesicInit {
            u0,
            state: [0.0, x0, y0, 0.0, 0.0, 0.0],
        }
    }
}

/// One ε-slice of the geodesic net, with Hermite dense output.
#[derive(Debug, Clone)]
pub struct GeodesicSlice {
    pub eps: f64,
    pub us: Vec<f64>,
    pub states: Vec<[f64; 6]>,
    derivs: Vec<[f64; 6]>,
    /// `max |g(γ̇,γ̇) − g(γ̇,γ̇)(u0)|`.
    pub norm_drift: f64,
    pub stats: OdeStats,
}

fn hermite(h: f64, t: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> (f64, f64) {
    let (t2, t3) = (t * t, t * t * t);
    let v = (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * d1;
    let dv = ((6.0 * t2 - 6.0 * t) * y0 + (-6.0 * t2 + 6.0 * t) * y1) / h + (3.0 * t2 - 4.0 * t + 1.0) * d0 + (3.0 * t2 - 2.0 * t) * d1;
    (v, dv)
}

impl GeodesicSlice {
    /// State and its `u`-derivative at `u` inside the solved interval.
    pub fn eval(&self, u: f64) -> Result<([f64; 6], [f64; 6])> {
        let (lo, hi) = (self.us[0].min(self.us[self.us.len() - 1]), self.us[0].max(self.us[self.us.len() - 1]));
        if !(lo..=hi).contains(&u) {
            return Err(Error::OutsideDomain { point: vec![u] });
        }
        let asc = self.us[0] <= self.us[self.us.len() - 1];
        let i = if asc {
            self.us.partition_point(|&x| x <= u).clamp(1, self.us.len() - 1) - 1
        } else {
            self.us.partition_point(|&x| x >= u).clamp(1, self.us.len() - 1) - 1
        };
        let h = self.us[i + 1] - self.us[i];
        let t = (u - self.us[i]) / h;
        let mut s = [0.0; 6];
        let mut d = [0.0; 6];
        for c in 0..6 {
            let (v, dv) = hermite(h, t, self.states[i][c], self.states[i + 1][c], self.derivs[i][c], self.derivs[i + 1][c]);
            s[c] = v;
            d[c] = dv;
        }
        Ok((s, d))
    }

    /// Columns `eps,u,v,x,y,xdot`.
    pub fn write_csv<W: Write>(&self, mut w: W, header: bool) -> std::io::Result<()> {
        if header {
            writeln!(w, "eps,u,v,x,y,xdot")?;
        }
        for (u, s) in self.us.iter().zip(&self.states) {
            writeln!(w, "{:e},{u:e},{:e},{:e},{:e},{:e}", self.eps, s[0], s[1], s[2], s[4])?;
        }
        Ok(())
    }
}

/// Integrator settings for [`solve_geodesic`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Uniform output points across the interval.
    pub samples: usize,
    /// Output points across the pulse.
    pub pulse_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            rtol: 1e-11,
            atol: 1e-12,
            samples: 2001,
            pulse_samples: 129,
        }
    }
}

/// Integrate from `init.u0` to `u_end` (either direction). Steps inside the
/// pulse are capped at a sixteenth of its half-width.
pub fn solve_geodesic(sys: &GeodesicSystem, init: &GeodesicInit, u_end: f64, opts: &SolveOptions) -> Result<GeodesicSlice> {
    let (u0, u1) = (init.u0, u_end);
    let r = sys.pulse_radius();
    let mut us: Vec<f64> = (0..opts.samples)
        .map(|i| u0 + (u1 - u0) * i as f64 / (opts.samples - 1) as f64)
        .collect();
    let (lo, hi) = (u0.min(u1), u0.max(u1));
    for i in 0..opts.pulse_samples {
        let u = -r + 2.0 * r * i as f64 / (opts.pulse_samples - 1) as f64;
        if u > lo && u < hi {
            us.push(u);
        }
    }
    if u0 <= u1 {
        us.sort_by(|a, b| a.total_cmp(b));
    } else {
        us.sort_by(|a, b| b.total_cmp(a));
    }
    us.dedup();
    us[0] = u0;
    let dp = DormandPrince {
        rtol: opts.rtol,
        atol: opts.atol,
        h_min: 1e-6 * r.min(1.0),
        ..DormandPrince::default()
    };
    let cap = move |u: f64| {
        let out = u.abs() - r;
        if out <= 0.0 {
            r / 16.0
        } else {
            out.max(r / 16.0).min(0.05)
        }
    };
    let (states, stats) = dp.solve(|u, s, d| sys.rhs(u, s, d), &init.state, &us, cap)?;
    let states: Vec<[f64; 6]> = states.into_iter().map(|s| s.try_into().expect("six components")).collect();
    let derivs: Vec<[f64; 6]> = us
        .iter()
        .zip(&states)
        .map(|(&u, s)| {
            let mut d = [0.0; 6];
            sys.rhs(u, s, &mut d);
            d
        })
        .collect();
    let n0 = sys.tangent_norm(u0, &init.state);
    let norm_drift = us
        .iter()
        .zip(&states)
        .map(|(&u, s)| (sys.tangent_norm(u, s) - n0).abs())
        .fold(0.0, f64::max);
    Ok(GeodesicSlice {
        eps: sys.eps,
        us,
        states,
        derivs,
        norm_drift,
        stats,
    })
}

/// Geodesic net `ε ↦ γ_ε`, solving each slice on first use.
#[derive(Clone)]
pub struct GeodesicNet {
    pub profile: PPWaveProfile,
    pub rho: Mollifier,
    pub init: GeodesicInit,
    pub u_end: f64,
    pub opts: SolveOptions,
    cache: Arc<Mutex<HashMap<u64, Arc<GeodesicSlice>>>>,
}

impl GeodesicNet {
    pub fn new(profile: PPWaveProfile, rho: Mollifier, init: GeodesicInit, u_end: f64) -> Self {
        GeodesicNet {
            profile,
            rho,
            init,
            u_end,
            opts: SolveOptions::default(),
            cache: Arc::new(Mutex::new(HashMap::new())),
        }
    }

    pub fn slice(&self, eps: f64) -> Result<Arc<GeodesicSlice>> {
        if let Some(s) = self.cache.lock().expect("cache lock").get(&eps.to_bits()) {
            return Ok(s.clone());
        }
        let sys = GeodesicSystem::new(self.profile.clone(), self.rho.clone(), eps)?;
        let s = Arc::new(solve_geodesic(&sys, &self.init, self.u_end, &self.opts)?);
        self.cache.lock().expect("cache lock").insert(eps.to_bits(), s.clone());
        Ok(s)
    }

    /// Solve every grid slice in parallel.
    pub fn solve_all(&self, grid: &EpsGrid) -> Result<Vec<Arc<GeodesicSlice>>> {
        grid.values().par_iter().map(|&e| self.slice(e)).collect()
    }

    /// Net `u ↦ γ_ε(u)^c` (state component `c`) on the solved interval, with
    /// first-order jets from the equations of motion.
    pub fn component(&self, c: usize, label: &str) -> Result<Net> {
        let this = self.clone();
        let (lo, hi) = (self.init.u0.min(self.u_end), self.init.u0.max(self.u_end));
        Net::try_from_jet_fn(1, 1, 1, label.to_string(), move |eps, x| {
            let s = this.slice(eps)?;
            let (v, d) = s.eval(x[0].value())?;
            let derivs = [v[c], d[c]];
            Ok(vec![x[0].compose_univariate(&derivs[..=x[0].order().min(1)])])
        })
        .with_domain(BoxDomain::new(vec![lo], vec![hi]))
        .map(|n| n.with_focus(vec![vec![0.0]]))
    }
}

/// Continuous piecewise-affine function with a single break at `u = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kink {
    pub value_at_break: f64,
    pub slope_before: f64,
    pub slope_after: f64,
}

impl Kink {
    pub fn jump(&self) -> f64 {
        self.slope_after - self.slope_before
    }

    pub fn eval(&self, u: f64) -> f64 {
        self.value_at_break + if u < 0.0 { self.slope_before * u } else { self.slope_after * u }
    }

    /// Least-squares fit to samples `(u, x)`.
    pub fn fit(samples: &[(f64, f64)]) -> Result<Self> {
        let a = nalgebra::DMatrix::from_fn(samples.len(), 3, |i, j| {
            let u = samples[i].0;
            match j {
                0 => 1.0,
                1 => u.min(0.0),
                _ => u.max(0.0),
            }
        });
        let b = nalgebra::DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
        let sol = a
            .svd(true, true)
            .solve(&b, 1e-14)
            .map_err(|e| Error::NoConvergence(format!("kink fit: {e}")))?;
        Ok(Kink {
            value_at_break: sol[0],
            slope_before: sol[1],
            slope_after: sol[2],
        })
    }

    /// Constant-in-ε net of the kink.
    pub fn to_net(&self, domain: BoxDomain) -> Result<Net> {
        let k = *self;
        Net::from_jet_fn(1, 1, 1, "kink", move |_, x| {
            let u = x[0].value();
            let slope = if u < 0.0 { k.slope_before } else { k.slope_after };
            vec![x[0].compose_univariate(&[k.eval(u), slope][..=x[0].order().min(1)])]
        })
        .with_domain(domain)
        .map(|n| n.with_focus(vec![vec![0.0]]))
    }
}

/// Inputs of [`kink_limit_study`].
#[derive(Debug, Clone)]
pub struct KinkStudyConfig {
    pub grid: EpsGrid,
    /// Compact `u`-interval; initial data sit at its left end.
    pub interval: (f64, f64),
    pub assoc_tol: f64,
    /// Sample points of the `u`-interval for sup-distances and the fit.
    pub samples: usize,
}

impl Default for KinkStudyConfig {
    fn default() -> Self {
        KinkStudyConfig {
            grid: EpsGrid::dyadic(6, 14).expect("valid grid"),
            interval: (-1.0, 1.0),
            assoc_tol: 1e-3,
            samples: 4001,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KinkReport {
    pub profile: String,
    pub mollifier: String,
    pub eps: Vec<f64>,
    /// x-component net c-bounded on the interval.
    pub cbounded: bool,
    /// `sup_u |x_ε|`, `sup_u |y_ε|` per ε.
    pub sup_x: Vec<f64>,
    pub sup_y: Vec<f64>,
    /// `(ε, sup_u |x_ε − x_{ε/2}|)` for every grid pair `ε, ε/2`.
    pub cauchy: Vec<(f64, f64)>,
    pub cauchy_decreasing: bool,
    /// Fit to the smallest-ε solution.
    pub kink: Kink,
    /// `(ε, ẋ(end) − ẋ(start))`.
    pub jumps: Vec<(f64, f64)>,
    /// Relative change of the jump between the two smallest ε.
    pub jump_stability: f64,
    pub association: KAssociationReport,
    /// Growth of `sup_u |v̇_ε|`: the v-velocity carries a `δ`-scale spike.
    pub vdot_growth: AsymptoticVerdict,
    pub vdot_unbounded: bool,
    pub max_norm_drift: f64,
}

impl KinkReport {
    /// Key-value text.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "profile = {}", self.profile);
        let _ = writeln!(s, "mollifier = {}", self.mollifier);
        let _ = writeln!(s, "cbounded = {}", self.cbounded);
        let _ = writeln!(s, "sup_x = {:e}", self.sup_x.iter().cloned().fold(0.0, f64::max));
        let _ = writeln!(s, "sup_y = {:e}", self.sup_y.iter().cloned().fold(0.0, f64::max));
        for (e, d) in &self.cauchy {
            let _ = writeln!(s, "cauchy[{e:e}] = {d:e}");
        }
        let _ = writeln!(s, "cauchy_decreasing = {}", self.cauchy_decreasing);
        let _ = writeln!(s, "kink_value_at_break = {:.12}", self.kink.value_at_break);
        let _ = writeln!(s, "kink_slope_before = {:.12}", self.kink.slope_before);
        let _ = writeln!(s, "kink_slope_after = {:.12}", self.kink.slope_after);
        let _ = writeln!(s, "velocity_jump = {:.12}", self.kink.jump());
        let _ = writeln!(s, "jump_stability = {:e}", self.jump_stability);
        let _ = writeln!(s, "zero_associated = {}", self.association.associated);
        let _ = writeln!(s, "vdot_unbounded = {}", self.vdot_unbounded);
        let _ = writeln!(s, "max_norm_drift = {:e}", self.max_norm_drift);
        s
    }
}

/// Solve on the grid and assemble the limit study.
pub fn kink_limit_study(profile: &PPWaveProfile, rho: &Mollifier, init: &GeodesicInit, cfg: &KinkStudyConfig) -> Result<(KinkReport, GeodesicNet)> {
    let (lo, hi) = cfg.interval;
    let start = GeodesicInit { u0: lo, ..*init };
    let net = GeodesicNet::new(profile.clone(), rho.clone(), start, hi);
    let slices = net.solve_all(&cfg.grid)?;
    let eps = cfg.grid.values().to_vec();
    let us: Vec<f64> = (0..cfg.samples)
        .map(|i| lo + (hi - lo) * i as f64 / (cfg.samples - 1) as f64)
        .collect();

    let sup = |s: &GeodesicSlice, c: usize| s.states.iter().map(|v| v[c].abs()).fold(0.0, f64::max);
    let sup_x: Vec<f64> = slices.iter().map(|s| sup(s, 1)).collect();
    let sup_y: Vec<f64> = slices.iter().map(|s| sup(s, 2)).collect();
    let vdot: Vec<f64> = slices.iter().map(|s| sup(s, 3)).collect();

    let mut cauchy = Vec::new();
    for (i, &e) in eps.iter().enumerate() {
        if let Some(j) = eps.iter().position(|&f| (f - e / 2.0).abs() <= 1e-12 * e) {
            let (a, b) = (&slices[i], &slices[j]);
            let mut pts = us.clone();
            pts.extend(a.us.iter().chain(&b.us).filter(|u| (lo..=hi).contains(*u)));
            let d = pts
                .iter()
                .map(|&u| Ok((a.eval(u)?.0[1] - b.eval(u)?.0[1]).abs()))
                .try_fold(0.0f64, |m, d: Result<f64>| Ok::<_, Error>(m.max(d?)))?;
            cauchy.push((e, d));
        }
    }
    // distances at rounding level count as converged
    let settled = |d: f64| d <= 1e-12;
    let cauchy_decreasing = cauchy.len() >= 2 && cauchy.windows(2).all(|w| w[1].1 < w[0].1 || settled(w[1].1));
    if !cauchy_decreasing {
        return Err(Error::NoConvergence(format!("Cauchy distances {cauchy:?}")));
    }

    let finest = slices.last().expect("grid is non-empty");
    let fit_samples: Vec<(f64, f64)> = us.iter().map(|&u| Ok((u, finest.eval(u)?.0[1]))).collect::<Result<_>>()?;
    let kink = Kink::fit(&fit_samples)?;
    let jumps: Vec<(f64, f64)> = slices
        .iter()
        .map(|s| (s.eps, s.states[s.states.len() - 1][4] - s.states[0][4]))
        .collect();
    let n = jumps.len();
    let jump_stability = ((jumps[n - 1].1 - jumps[n - 2].1) / jumps[n - 1].1.abs().max(1e-300)).abs();

    let check = CheckConfig {
        grid: cfg.grid.clone(),
        k_max: 1,
        assoc_tol: cfg.assoc_tol,
        ..CheckConfig::default()
    };
    let k = CompactSet::interval(lo, hi, 65);
    let x_net = ManifoldNet::euclidean(net.component(1, "x")?);
    let cbounded = check_cbounded(&x_net, &k, &check)?.cbounded;
    let kink_net = ManifoldNet::euclidean(kink.to_net(BoxDomain::new(vec![lo], vec![hi]))?);
    let association = check_k_associated(&x_net, &kink_net, &k, 0, &check)?;

    let vdot_growth = estimate_growth_order(&vdot, &cfg.grid, &check.params)?;
    let vdot_unbounded = vdot_growth.classification.growth().is_none_or(|n| n >= 1);
    let report = KinkReport {
        profile: profile.source.clone(),
        mollifier: rho.id.clone(),
        eps,
        cbounded,
        sup_x,
        sup_y,
        cauchy,
        cauchy_decreasing,
        kink,
        jumps,
        jump_stability,
        association,
        vdot_growth,
        vdot_unbounded,
        max_norm_drift: slices.iter().map(|s| s.norm_drift).fold(0.0, f64::max),
    };
    Ok((report, net))
}

/// Trajectory dump of every solved slice.
pub fn write_trajectories<W: Write>(slices: &[Arc<GeodesicSlice>], mut w: W) -> std::io::Result<()> {
    for (i, s) in slices.iter().enumerate() {
        s.write_csv(&mut w, i == 0)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rho() -> Mollifier {
        Mollifier::standard()
    }

    #[test]
    fn flat_wave_gives_straight_lines() {
        let sys = GeodesicSystem::new(PPWaveProfile::flat(), rho(), 0.01).unwrap();
        let init = GeodesicInit {
            u0: -1.0,
            state: [0.0, 0.5, 0.0, 0.0, 1.0, 0.0],
        };
        let s = solve_geodesic(&sys, &init, 1.0, &SolveOptions::default()).unwrap();
        for (u, st) in s.us.iter().zip(&s.states) {
            assert!((st[1] - (0.5 + (u + 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn before_the_pulse_nothing_happens() {
        let sys = GeodesicSystem::new(PPWaveProfile::saddle(), rho(), 0.01).unwrap();
        let mut d = [0.0; 6];
        sys.rhs(-0.011, &[0.3, 1.0, 0.5, 0.2, 0.1, -0.4], &mut d);
        assert_eq!(&d[3..], &[0.0, 0.0, 0.0]);
        assert_eq!(&d[..3], &[0.2, 0.1, -0.4]);
    }

    #[test]
    fn analytic_and_finite_difference_christoffels_agree() {
        let sys = GeodesicSystem::new(PPWaveProfile::saddle(), rho(), 0.01).unwrap();
        let mut rng_state = 0x9e3779b97f4a7c15u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((rng_state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..8 {
            let u = 0.009 * next();
            let s = [next(), next(), next(), next(), next(), next()];
            let r = sys.christoffel_residual(u, &s);
            assert!(r < 1e-8, "u={u}, residual {r}");
        }
        let other = GeodesicSystem::new(PPWaveProfile::new("sin(x)*y+x*y^2").unwrap(), Mollifier::weighted(), 0.05).unwrap();
        assert!(other.christoffel_residual(0.01, &[0.1, 0.4, -0.7, 0.3, 0.2, 0.9]) < 1e-8);
    }

    #[test]
    fn tangent_norm_is_conserved_and_reversal_recovers_data() {
        let sys = GeodesicSystem::new(PPWaveProfile::saddle(), rho(), 1e-2).unwrap();
        let init = GeodesicInit::at_rest(-1.0, 1.0, 0.0);
        let fwd = solve_geodesic(&sys, &init, 1.0, &SolveOptions::default()).unwrap();
        assert!(fwd.norm_drift < 1e-7, "{}", fwd.norm_drift);
        let back_init = GeodesicInit {
            u0: 1.0,
            state: *fwd.states.last().unwrap(),
        };
        let back = solve_geodesic(&sys, &back_init, -1.0, &SolveOptions::default()).unwrap();
        let end = back.states.last().unwrap();
        for (c, (e, s)) in end.iter().zip(&init.state).enumerate() {
            assert!((e - s).abs() < 1e-7, "component {c}: {e}");
        }
    }

    #[test]
    fn dense_output_matches_nodes_and_slopes() {
        let sys = GeodesicSystem::new(PPWaveProfile::saddle(), rho(), 1e-2).unwrap();
        let s = solve_geodesic(&sys, &GeodesicInit::at_rest(-1.0, 1.0, 0.0), 1.0, &SolveOptions::default()).unwrap();
        let i = s.us.len() / 3;
        assert_eq!(s.eval(s.us[i]).unwrap().0, s.states[i]);
        assert!(s.eval(1.5).is_err());
    }

    #[test]
    fn kink_fit_recovers_a_kink() {
        let k = Kink {
            value_at_break: 0.3,
            slope_before: -0.5,
            slope_after: 1.25,
        };
        let pts: Vec<(f64, f64)> = (0..101).map(|i| -1.0 + 0.02 * i as f64).map(|u| (u, k.eval(u))).collect();
        let f = Kink::fit(&pts).unwrap();
        assert!((f.jump() - 1.75).abs() < 1e-12);
        assert!((f.value_at_break - 0.3).abs() < 1e-12);
    }

    #[test]
    fn flat_study_degenerates_to_a_line() {
        let cfg = KinkStudyConfig {
            grid: EpsGrid::dyadic(4, 9).unwrap(),
            samples: 401,
            ..KinkStudyConfig::default()
        };
        let init = GeodesicInit {
            u0: -1.0,
            state: [0.0, 0.2, 0.0, 0.0, 0.5, 0.0],
        };
        let (r, _) = kink_limit_study(&PPWaveProfile::flat(), &rho(), &init, &cfg).unwrap();
        assert!(r.cauchy.iter().all(|c| c.1 < 1e-12));
        assert!(r.kink.jump().abs() < 1e-12);
        assert!((r.kink.slope_before - 0.5).abs() < 1e-12);
        assert!(r.association.associated);
        assert!(!r.vdot_unbounded);
    }

    #[test]
    fn saddle_study() {
        let cfg = KinkStudyConfig {
            grid: EpsGrid::dyadic(6, 12).unwrap(),
            ..KinkStudyConfig::default()
        };
        let (r, _) = kink_limit_study(&PPWaveProfile::saddle(), &rho(), &GeodesicInit::at_rest(-1.0, 1.0, 0.0), &cfg).unwrap();
        assert!(r.cbounded);
        assert!(r.cauchy_decreasing);
        assert!(r.association.associated);
        assert!(r.vdot_unbounded);
        assert!(r.jump_stability < 1e-2);
        // ½ ∂_x f(1, 0) = 1 in the limit
        assert!((r.kink.jump() - 1.0).abs() < 1e-2, "{}", r.kink.jump());
    }
}
