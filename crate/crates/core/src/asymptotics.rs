//! Classification of scalar ε-sample curves: moderate `O(ε^{-N})`,
//! negligible `O(ε^m)` up to a tested order, or neither.
//!
//! The estimator fits `log(sample + floor)` against `log ε` on the
//! smallest-ε half of the grid and guards against super-polynomial growth
//! with a drift test between the two halves of that window.

use std::fmt;
use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::GeneralizedNumber;
use crate::regression::fit_line;

pub const MIN_GRID_LEN: usize = 6;

/// Strictly decreasing finite sequence of ε values in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsGrid {
    values: Vec<f64>,
}

impl EpsGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < MIN_GRID_LEN {
            return Err(Error::GridTooShort {
                len: values.len(),
                min: MIN_GRID_LEN,
            });
        }
        if values.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
            return Err(Error::InvalidGrid("values must lie in (0, 1]".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidGrid("values must be strictly decreasing".into()));
        }
        Ok(EpsGrid { values })
    }

    /// `ε_k = 2^{-k}` for `k = k_first..=k_last`.
    pub fn dyadic(k_first: i32, k_last: i32) -> Result<Self> {
        Self::new((k_first..=k_last).map(|k| 2f64.powi(-k)).collect())
    }

    /// `points` geometrically spaced values from `eps_max` down to `eps_min`.
    pub fn geometric(eps_max: f64, eps_min: f64, points: usize) -> Result<Self> {
        if points < 2 || !(eps_min > 0.0) || eps_min >= eps_max {
            return Err(Error::InvalidGrid(format!(
                "need eps_max > eps_min > 0 and at least two points (got {eps_max}, {eps_min}, {points})"
            )));
        }
        let ratio = (eps_min / eps_max).ln() / (points - 1) as f64;
        let mut values: Vec<f64> = (0..points).map(|i| eps_max * (ratio * i as f64).exp()).collect();
        values[points - 1] = eps_min;
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("grid is non-empty")
    }

    /// Index where the smallest-ε half of the grid starts.
    pub fn small_half_start(&self) -> usize {
        self.values.len() / 2
    }

    /// Evaluate `f` at every grid point (parallel, order preserved).
    pub fn sample<F>(&self, f: F) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Result<f64> + Sync,
    {
        self.values.par_iter().map(|&e| f(e)).collect()
    }
}

impl Default for EpsGrid {
    fn default() -> Self {
        Self::dyadic(4, 20).expect("default grid is valid")
    }
}

/// Estimator parameters; every verdict carries the set it was made with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptoticParams {
    pub n_max: u32,
    pub m_max: u32,
    pub m_min: f64,
    pub floor: f64,
    pub fit_tolerance: f64,
    pub ratio_bound: f64,
    /// Slope change between sub-windows that counts as drift.
    pub drift: f64,
}

impl Default for AsymptoticParams {
    fn default() -> Self {
        AsymptoticParams {
            n_max: 12,
            m_max: 8,
            m_min: 0.5,
            floor: 1e-300,
            fit_tolerance: 0.25,
            ratio_bound: 1e3,
            drift: 1.0,
        }
    }
}

impl AsymptoticParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.m_min, self.floor, self.fit_tolerance, self.ratio_bound, self.drift];
        if positive.iter().any(|v| !(*v > 0.0)) || self.n_max == 0 || self.m_max == 0 {
            return Err(Error::Config("asymptotic tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classification {
    Moderate { n: u32 },
    Negligible { m: u32 },
    Neither,
}

impl Classification {
    pub fn is_moderate(&self) -> bool {
        !matches!(self, Classification::Neither)
    }

    /// Negligible at least to order `m`.
    pub fn negligible_to(&self, m: u32) -> bool {
        matches!(self, Classification::Negligible { m: k } if *k >= m)
    }

    /// Growth exponent `N` with `O(ε^{-N})`; `0` for negligible curves.
    pub fn growth(&self) -> Option<u32> {
        match self {
            Classification::Moderate { n } => Some(*n),
            Classification::Negligible { .. } => Some(0),
            Classification::Neither => None,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Classification::Moderate { n } => write!(f, "Moderate({n})"),
            Classification::Negligible { m } => write!(f, "Negligible({m})"),
            Classification::Neither => write!(f, "Neither"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticVerdict {
    /// Fitted exponent `s` in `samples ≈ C·ε^s`.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub classification: Classification,
    /// Highest derivative order that entered the samples.
    pub tested_order_cap: usize,
    pub params: AsymptoticParams,
}

impl AsymptoticVerdict {
    pub fn with_order_cap(mut self, k: usize) -> Self {
        self.tested_order_cap = k;
        self
    }

    fn fixed(slope: f64, classification: Classification, params: &AsymptoticParams) -> Self {
        AsymptoticVerdict {
            slope,
            intercept: 0.0,
            r_squared: 1.0,
            classification,
            tested_order_cap: 0,
            params: *params,
        }
    }

    /// Fitted curve `exp(intercept)·ε^slope`.
    pub fn fitted(&self, eps: f64) -> f64 {
        if self.slope == f64::INFINITY {
            0.0
        } else if self.slope == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (self.intercept + self.slope * eps.ln()).exp()
        }
    }

    /// Worst of two verdicts: Neither beats Moderate beats Negligible.
    pub fn worst(self, other: AsymptoticVerdict) -> AsymptoticVerdict {
        if rank(&other.classification) > rank(&self.classification) {
            other
        } else {
            self
        }
    }
}

fn rank(c: &Classification) -> (u32, i64) {
    match c {
        Classification::Negligible { m } => (0, -(*m as i64)),
        Classification::Moderate { n } => (1, *n as i64),
        Classification::Neither => (2, 0),
    }
}

fn check_samples(samples: &[f64], grid: &EpsGrid) -> Result<()> {
    if samples.len() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples for a grid of {}",
            samples.len(),
            grid.len()
        )));
    }
    for (e, s) in grid.values().iter().zip(samples) {
        if s.is_nan() || *s < 0.0 {
            return Err(Error::NonFinite(format!("sample {s} at eps={e}")));
        }
    }
    Ok(())
}

/// Running maximum from the largest ε down: `M(ε_j) = max_{i ≤ j} s_i`.
///
/// A curve is `O(ε^{-N})` iff its envelope is, and the envelope is free of
/// the dips an oscillating curve shows at isolated ε.
pub fn upper_envelope(samples: &[f64]) -> Vec<f64> {
    samples
        .iter()
        .scan(0.0f64, |m, &s| {
            *m = if s.is_nan() { s } else { m.max(s) };
            Some(*m)
        })
        .collect()
}

/// Classify a nonnegative sample curve.
///
/// An infinite sample (overflow of a super-polynomial curve) classifies as
/// Neither; NaN or negative samples are errors.
pub fn estimate_growth_order(samples: &[f64], grid: &EpsGrid, params: &AsymptoticParams) -> Result<AsymptoticVerdict> {
    check_samples(samples, grid)?;
    let start = grid.small_half_start();
    if samples[start..].iter().any(|s| s.is_infinite()) {
        return Ok(AsymptoticVerdict::fixed(f64::NEG_INFINITY, Classification::Neither, params));
    }
    let logs: Vec<f64> = samples.iter().map(|s| (s + params.floor).ln()).collect();
    classify_logs(&logs, grid, params)
}

/// Classify from `ln(sample)` directly, for curves too large or small to
/// represent (e.g. `ln e^{1/ε} = 1/ε`).
pub fn estimate_growth_order_log(log_samples: &[f64], grid: &EpsGrid, params: &AsymptoticParams) -> Result<AsymptoticVerdict> {
    if log_samples.len() != grid.len() {
        return Err(Error::DimensionMismatch("log samples vs grid".into()));
    }
    if log_samples.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::NonFinite("log sample".into()));
    }
    let floor = params.floor.ln();
    let logs: Vec<f64> = log_samples.iter().map(|&v| v.max(floor)).collect();
    classify_logs(&logs, grid, params)
}

fn classify_logs(logs: &[f64], grid: &EpsGrid, params: &AsymptoticParams) -> Result<AsymptoticVerdict> {
    let start = grid.small_half_start();
    let floor = params.floor.ln();
    let window = &logs[start..];
    // at or below the floor, up to rounding of ln(s + floor)
    if window.iter().all(|&l| l <= floor + 1e-9) {
        return Ok(AsymptoticVerdict::fixed(
            f64::INFINITY,
            Classification::Negligible { m: params.m_max },
            params,
        ));
    }
    let xs: Vec<f64> = grid.values()[start..].iter().map(|e| e.ln()).collect();
    let fit = fit_line(&xs, window).ok_or_else(|| Error::InvalidGrid("degenerate fit window".into()))?;
    let slope = fit.slope;
    let tol = params.fit_tolerance;

    let half = xs.len() / 2;
    let early = fit_line(&xs[..=half], &window[..=half]);
    let late = fit_line(&xs[half..], &window[half..]);
    let drifting = match (early, late) {
        (Some(a), Some(b)) => b.slope < a.slope - params.drift * a.slope.abs().max(1.0) && b.slope < 0.0,
        _ => false,
    };

    let classification = if slope < -(params.n_max as f64) - tol || drifting {
        Classification::Neither
    } else if slope >= params.m_min {
        let m = (slope + tol).floor().min(params.m_max as f64).max(0.0) as u32;
        Classification::Negligible { m }
    } else {
        let n = (-slope - tol).ceil().max(0.0) as u32;
        Classification::Moderate { n }
    };
    Ok(AsymptoticVerdict {
        slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        classification,
        tested_order_cap: 0,
        params: *params,
    })
}

/// Outcome of the ratio test `samples/ε^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NegligibilityReport {
    pub order: u32,
    pub negligible: bool,
    /// Ratio trends upward over the window although the test passed or
    /// failed only narrowly.
    pub borderline: bool,
    /// Slope of `log(samples/ε^m)` against `log ε`.
    pub ratio_slope: f64,
    /// Largest ratio over the window relative to its first (largest-ε) value.
    pub ratio_growth: f64,
}

/// Is `samples = O(ε^m)` over the small-ε half of the grid?
///
/// True iff the log-ratio `log(samples/ε^m)` has slope at least
/// `-fit_tolerance` and the ratio grows by at most `ratio_bound`.
pub fn is_negligible(samples: &[f64], grid: &EpsGrid, m: u32, params: &AsymptoticParams) -> Result<NegligibilityReport> {
    check_samples(samples, grid)?;
    let start = grid.small_half_start();
    let window = &samples[start..];
    if window.iter().all(|&s| s <= params.floor) {
        return Ok(NegligibilityReport {
            order: m,
            negligible: true,
            borderline: false,
            ratio_slope: f64::INFINITY,
            ratio_growth: 0.0,
        });
    }
    if window.iter().any(|s| s.is_infinite()) {
        return Ok(NegligibilityReport {
            order: m,
            negligible: false,
            borderline: false,
            ratio_slope: f64::NEG_INFINITY,
            ratio_growth: f64::INFINITY,
        });
    }
    let eps = &grid.values()[start..];
    let xs: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let lr: Vec<f64> = window
        .iter()
        .zip(&xs)
        .map(|(s, x)| (s + params.floor).ln() - m as f64 * x)
        .collect();
    let fit = fit_line(&xs, &lr).ok_or_else(|| Error::InvalidGrid("degenerate fit window".into()))?;
    let first = lr[0];
    let growth = lr.iter().map(|l| (l - first).exp()).fold(0.0, f64::max);
    let negligible = fit.slope >= -params.fit_tolerance && growth <= params.ratio_bound;
    let rising = lr.windows(2).all(|w| w[1] > w[0]);
    let borderline = rising && fit.slope < 0.0 && fit.slope > -1.0;
    Ok(NegligibilityReport {
        order: m,
        negligible,
        borderline,
        ratio_slope: fit.slope,
        ratio_growth: growth,
    })
}

/// Max-norm of `a(ε) − b(ε)` classified on the grid.
pub fn gnum_difference(a: &GeneralizedNumber, b: &GeneralizedNumber, grid: &EpsGrid, params: &AsymptoticParams) -> Result<AsymptoticVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", a.dim(), b.dim())));
    }
    let samples = grid.sample(|e| {
        Ok(a.at(e)
            .iter()
            .zip(b.at(e))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max))
    })?;
    estimate_growth_order(&samples, grid, params)
}

/// `a = b` in the generalized numbers: the difference is negligible up to `m_max`.
pub fn gnum_equal(a: &GeneralizedNumber, b: &GeneralizedNumber, grid: &EpsGrid, params: &AsymptoticParams) -> Result<bool> {
    Ok(gnum_difference(a, b, grid, params)?
        .classification
        .negligible_to(params.m_max))
}

/// Verdict of [`gpoint_equivalent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEquivalence {
    pub equivalent: bool,
    pub distance: AsymptoticVerdict,
    /// Verdict of the test-function route (`f(p_ε) − f(q_ε)` negligible for every bank member).
    pub bank_equivalent: bool,
    pub bank_size: usize,
}

/// `(p_ε) ~ (q_ε)`: `d(p_ε, q_ε) = O(ε^m)` for every tested `m`, cross-checked
/// against a bank of compactly supported test functions.
pub fn gpoint_equivalent<D>(p: &GeneralizedNumber, q: &GeneralizedNumber, grid: &EpsGrid, distance: D, params: &AsymptoticParams) -> Result<PointEquivalence>
where
    D: Fn(&[f64], &[f64]) -> Result<f64> + Sync,
{
    if p.dim() != q.dim() {
        return Err(Error::DimensionMismatch(format!("dimensions {} and {}", p.dim(), q.dim())));
    }
    for net in [p, q] {
        let norms = grid.sample(|e| Ok(net.at(e).iter().map(|v| v.abs()).fold(0.0, f64::max)))?;
        let v = estimate_growth_order(&upper_envelope(&norms), grid, params)?;
        if v.classification.growth() != Some(0) {
            return Err(Error::NotCompactlySupported);
        }
    }
    let dists = grid.sample(|e| distance(&p.at(e), &q.at(e)))?;
    let verdict = estimate_growth_order(&dists, grid, params)?;
    let equivalent = verdict.classification.negligible_to(params.m_max);

    let d = p.dim();
    let pts: Vec<Vec<f64>> = grid
        .values()
        .iter()
        .flat_map(|&e| [p.at(e), q.at(e)])
        .collect();
    let hull = crate::net::BoxDomain::hull(d, pts.iter().map(|v| v.as_slice()))
        .expect("grid is non-empty");
    let bank = crate::geometry::bank::scalar_bank(0, &hull, crate::geometry::bank::DEFAULT_BANK_SIZE);
    let mut bank_equivalent = true;
    for f in &bank {
        let diffs = grid.sample(|e| Ok((f.eval(&p.at(e)) - f.eval(&q.at(e))).abs()))?;
        if !estimate_growth_order(&diffs, grid, params)?
            .classification
            .negligible_to(params.m_max)
        {
            bank_equivalent = false;
            break;
        }
    }
    if bank_equivalent != equivalent {
        return Err(Error::InconsistentTests(format!(
            "distance route says {equivalent}, test-function route says {bank_equivalent}"
        )));
    }
    Ok(PointEquivalence {
        equivalent,
        distance: verdict,
        bank_equivalent,
        bank_size: bank.len(),
    })
}

pub fn euclidean(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch("point dimensions".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

/// Plot-ready dump: `eps,value,fit`.
pub fn write_fit_csv<W: Write>(mut w: W, grid: &EpsGrid, samples: &[f64], verdict: &AsymptoticVerdict) -> io::Result<()> {
    writeln!(w, "eps,value,fit")?;
    for (e, s) in grid.values().iter().zip(samples) {
        writeln!(w, "{e:e},{s:e},{:e}", verdict.fitted(*e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tab(grid: &EpsGrid, f: impl Fn(f64) -> f64) -> Vec<f64> {
        grid.values().iter().map(|&e| f(e)).collect()
    }

    #[test]
    fn grid_validation() {
        assert!(matches!(EpsGrid::dyadic(1, 4), Err(Error::GridTooShort { len: 4, min: 6 })));
        assert!(EpsGrid::new(vec![0.5, 0.4, 0.4, 0.3, 0.2, 0.1]).is_err());
        assert!(EpsGrid::new(vec![1.5, 0.4, 0.35, 0.3, 0.2, 0.1]).is_err());
        let g = EpsGrid::default();
        assert_eq!(g.len(), 17);
        assert_eq!(g.values()[0], 1.0 / 16.0);
        let geo = EpsGrid::geometric(0.5, 1e-4, 9).unwrap();
        assert_eq!(geo.smallest(), 1e-4);
    }

    #[test]
    fn power_laws() {
        let g = EpsGrid::dyadic(4, 16).unwrap();
        let p = AsymptoticParams::default();
        let v = estimate_growth_order(&tab(&g, |e| e.powi(-3)), &g, &p).unwrap();
        assert!((v.slope + 3.0).abs() < 0.1);
        assert_eq!(v.classification, Classification::Moderate { n: 3 });
        let v = estimate_growth_order(&tab(&g, |e| e * e), &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Negligible { m: 2 });
    }

    #[test]
    fn super_polynomial_curves() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let v = estimate_growth_order(&tab(&g, |e| (-1.0 / e).exp()), &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Negligible { m: 8 });
        let v = estimate_growth_order(&tab(&g, |e| (1.0 / e).exp()), &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Neither);
        // exp(1/ε) on a grid where it stays finite: caught by slope and drift
        let g = EpsGrid::dyadic(1, 9).unwrap();
        let v = estimate_growth_order(&tab(&g, |e| (1.0 / e).exp()), &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Neither);
        let logs = tab(&g, |e| 1.0 / e);
        let v = estimate_growth_order_log(&logs, &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Neither);
    }

    #[test]
    fn envelope_of_oscillation() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let s = tab(&g, |e| e * (1.0 / e).sin().abs());
        let env = upper_envelope(&s);
        assert!(env.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(env[0], s[0]);
        assert_eq!(estimate_growth_order(&env, &g, &p).unwrap().classification, Classification::Moderate { n: 0 });
        let grow = tab(&g, |e| e.powi(-2) * (2.0 + (1.0 / e).sin()));
        assert_eq!(estimate_growth_order(&upper_envelope(&grow), &g, &p).unwrap().classification, Classification::Moderate { n: 2 });
    }

    #[test]
    fn zero_and_errors() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let v = estimate_growth_order(&vec![0.0; g.len()], &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Negligible { m: 8 });
        let mut s = vec![1.0; g.len()];
        s[3] = f64::NAN;
        assert!(matches!(estimate_growth_order(&s, &g, &p), Err(Error::NonFinite(_))));
        assert!(estimate_growth_order(&[1.0; 3], &g, &p).is_err());
        let v = estimate_growth_order(&vec![2.5; g.len()], &g, &p).unwrap();
        assert_eq!(v.classification, Classification::Moderate { n: 0 });
    }

    #[test]
    fn negligibility_ratio_test() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let sq = tab(&g, |e| e * e);
        assert!(is_negligible(&sq, &g, 2, &p).unwrap().negligible);
        assert!(!is_negligible(&sq, &g, 3, &p).unwrap().negligible);
        assert!(is_negligible(&vec![0.0; g.len()], &g, 5, &p).unwrap().negligible);

        // ε|log ε|: the ratio |log ε| grows without bound, slowly
        let s = tab(&g, |e| e * e.ln().abs());
        let tight = AsymptoticParams {
            fit_tolerance: 0.05,
            ..p
        };
        let r = is_negligible(&s, &g, 1, &tight).unwrap();
        assert!(!r.negligible);
        assert!(r.borderline);
        let r = is_negligible(&s, &g, 1, &p).unwrap();
        assert!(r.borderline);
    }

    #[test]
    fn ratio_table_oracle_for_log_example() {
        // direct tabulation: ratio = |ln ε| = k ln 2 strictly increasing
        let g = EpsGrid::default();
        let s = tab(&g, |e| e * e.ln().abs());
        let start = g.small_half_start();
        let ratios: Vec<f64> = s[start..]
            .iter()
            .zip(&g.values()[start..])
            .map(|(s, e)| s / e)
            .collect();
        for (i, r) in ratios.iter().enumerate() {
            let k = (start + 4 + i) as f64;
            assert!((r - k * 2f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn generalized_numbers() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let two_eps = GeneralizedNumber::scalar(|e| 2.0 * e);
        let zero = GeneralizedNumber::scalar(|_| 0.0);
        let tiny = GeneralizedNumber::scalar(|e| (-1.0 / e).exp());
        assert!(!gnum_equal(&two_eps, &zero, &g, &p).unwrap());
        assert!(gnum_equal(&tiny, &zero, &g, &p).unwrap());
        assert!(gnum_equal(&two_eps, &two_eps, &g, &p).unwrap());
        let pair = GeneralizedNumber::constant(vec![0.0, 0.0]);
        assert!(gnum_equal(&pair, &zero, &g, &p).is_err());
    }

    #[test]
    fn generalized_points() {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let origin = GeneralizedNumber::constant(vec![0.0, 0.0]);
        let drift = GeneralizedNumber::new(2, |e| vec![e, 0.0]);
        let r = gpoint_equivalent(&drift, &origin, &g, euclidean, &p).unwrap();
        assert!(!r.equivalent);
        assert!(!r.bank_equivalent);

        let q = GeneralizedNumber::new(2, |e| vec![0.3 + e.sin(), -0.2]);
        let pq = GeneralizedNumber::new(2, |e| {
            let t = (-1.0 / e).exp();
            vec![0.3 + e.sin() + t, -0.2 + t]
        });
        assert!(gpoint_equivalent(&pq, &q, &g, euclidean, &p).unwrap().equivalent);

        let osc = GeneralizedNumber::new(2, |e| vec![(1.0 / e).sin() * (-1.0 / e).exp(), 0.0]);
        let r = gpoint_equivalent(&osc, &origin, &g, euclidean, &p).unwrap();
        assert!(r.equivalent);
        assert_eq!(r.bank_size, crate::geometry::bank::DEFAULT_BANK_SIZE);

        let escaping = GeneralizedNumber::new(2, |e| vec![1.0 / e, 0.0]);
        assert!(matches!(
            gpoint_equivalent(&escaping, &origin, &g, euclidean, &p),
            Err(Error::NotCompactlySupported)
        ));
    }

    #[test]
    fn csv_columns() {
        let g = EpsGrid::dyadic(4, 9).unwrap();
        let s = tab(&g, |e| 1.0 / e);
        let v = estimate_growth_order(&s, &g, &AsymptoticParams::default()).unwrap();
        let mut buf = Vec::new();
        write_fit_csv(&mut buf, &g, &s, &v).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "eps,value,fit");
        assert_eq!(lines.len(), g.len() + 1);
    }
}
