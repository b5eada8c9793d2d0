//! One-dimensional quadrature: composite Gauss–Legendre for smooth integrands
//! with known scale, and adaptive Simpson with an ε-aware detection mesh for
//! integrands carrying narrow features.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Gauss–Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre<T: Scalar>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 0 { 0.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = T::lit(-x);
        nodes[n - 1 - i] = T::lit(x);
        weights[i] = T::lit(w);
        weights[n - 1 - i] = T::lit(w);
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule with `panels` equal panels of `order` nodes.
#[derive(Debug, Clone)]
pub struct CompositeGauss<T: Scalar> {
    nodes: Vec<T>,
    weights: Vec<T>,
    panels: usize,
}

impl<T: Scalar> CompositeGauss<T> {
    pub fn new(order: usize, panels: usize) -> Self {
        let (nodes, weights) = gauss_legendre(order);
        CompositeGauss {
            nodes,
            weights,
            panels: panels.max(1),
        }
    }

    pub fn integrate<F: FnMut(T) -> T>(&self, a: T, b: T, mut f: F) -> T {
        let width = (b - a) / T::from_count(self.panels);
        let half = width / T::lit(2.0);
        let mut total = T::zero();
        for p in 0..self.panels {
            let mid = a + width * (T::from_count(p) + T::lit(0.5));
            let mut s = T::zero();
            for (x, w) in self.nodes.iter().zip(&self.weights) {
                s += *w * f(mid + half * *x);
            }
            total += s * half;
        }
        total
    }
}

/// Options for [`adaptive_simpson`].
#[derive(Debug, Clone)]
pub struct SimpsonOptions<T: Scalar> {
    /// Absolute tolerance for the whole integral.
    pub abs_tol: T,
    /// Feature scale; the initial mesh is no coarser than `4·scale` so any
    /// feature of width ≥ `2·scale` hits a node.
    pub feature_scale: Option<T>,
    /// Smallest interval the recursion may produce.
    pub min_width: T,
    /// Extra mesh points (e.g. known feature locations).
    pub breakpoints: Vec<T>,
    /// Hard cap on the initial mesh size.
    pub max_panels: usize,
}

impl<T: Scalar> Default for SimpsonOptions<T> {
    fn default() -> Self {
        SimpsonOptions {
            abs_tol: T::lit(1e-10),
            feature_scale: None,
            min_width: T::lit(1e-12),
            breakpoints: Vec::new(),
            max_panels: 1 << 20,
        }
    }
}

impl<T: Scalar> SimpsonOptions<T> {
    /// Tolerance 1e-10 tightened for ε-width features: detection mesh at
    /// scale ε and recursion floor well below ε/8.
    pub fn for_eps(eps: T) -> Self {
        SimpsonOptions {
            feature_scale: Some(eps),
            min_width: eps * T::lit(1.0 / 8.0) * T::lit(1e-6),
            ..Self::default()
        }
    }
}

/// Adaptive Simpson with Richardson correction.
///
/// Returns `QuadratureNonconvergence` when the accumulated error estimate of
/// intervals that hit the width floor exceeds 100× the tolerance.
pub fn adaptive_simpson<T: Scalar, F: FnMut(T) -> T>(
    mut f: F,
    a: T,
    b: T,
    opts: &SimpsonOptions<T>,
) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, T::one()) } else { (b, a, -T::one()) };
    let len = hi - lo;
    let mut mesh = vec![lo, hi];
    let base_panels = 8usize;
    let mut panels = base_panels;
    if let Some(scale) = opts.feature_scale {
        let needed = (len / (scale * T::lit(4.0))).ceil().to_f64_lossy();
        if needed.is_finite() && needed > panels as f64 {
            panels = (needed as usize).min(opts.max_panels);
        }
    }
    mesh.clear();
    for i in 0..=panels {
        mesh.push(lo + len * T::from_count(i) / T::from_count(panels));
    }
    for &bp in &opts.breakpoints {
        if bp > lo && bp < hi {
            mesh.push(bp);
        }
    }
    mesh.sort_by(|x, y| x.partial_cmp(y).expect("finite mesh"));
    mesh.dedup();

    let mut total = T::zero();
    let mut floor_error = T::zero();
    for w in mesh.windows(2) {
        let (x0, x1) = (w[0], w[1]);
        let tol = opts.abs_tol * (x1 - x0) / len;
        let m = (x0 + x1) / T::lit(2.0);
        let (f0, fm, f1) = (f(x0), f(m), f(x1));
        let whole = simpson(x0, x1, f0, fm, f1);
        total += recurse(&mut f, x0, x1, f0, fm, f1, whole, tol, opts.min_width, 0, &mut floor_error);
    }
    if !total.is_finite() {
        return Err(Error::QuadratureNonconvergence {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
        });
    }
    if floor_error > opts.abs_tol * T::lit(100.0) {
        return Err(Error::QuadratureNonconvergence {
            a: a.to_f64_lossy(),
            b: b.to_f64_lossy(),
        });
    }
    Ok(sign * total)
}

fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Scalar, F: FnMut(T) -> T>(
    f: &mut F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    min_width: T,
    depth: usize,
    floor_error: &mut T,
) -> T {
    let m = (a + b) / T::lit(2.0);
    let lm = (a + m) / T::lit(2.0);
    let rm = (m + b) / T::lit(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    let scale_tol = tol.max(T::epsilon() * T::lit(16.0) * (left + right).abs());
    if delta.abs() <= T::lit(15.0) * scale_tol {
        return left + right + delta / T::lit(15.0);
    }
    if (b - a) / T::lit(2.0) < min_width || depth >= 60 {
        *floor_error += delta.abs();
        return left + right + delta / T::lit(15.0);
    }
    let half = tol / T::lit(2.0);
    recurse(f, a, m, fa, flm, fm, left, half, min_width, depth + 1, floor_error)
        + recurse(f, m, b, fm, frm, fb, right, half, min_width, depth + 1, floor_error)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        for n in [1usize, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre::<f64>(n);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-14, "n={n}");
            assert!(x.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn gauss_exact_for_polynomials() {
        let rule = CompositeGauss::<f64>::new(4, 1);
        // degree 7 exact for 4 nodes
        let v = rule.integrate(0.0, 2.0, |x| x.powi(7));
        assert!((v - 2f64.powi(8) / 8.0).abs() < 1e-12);
    }

    #[test]
    fn simpson_smooth_and_reversed() {
        let opts = SimpsonOptions::<f64>::default();
        let v = adaptive_simpson(|x| x.sin(), 0.0, std::f64::consts::PI, &opts).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
        let r = adaptive_simpson(|x| x.sin(), std::f64::consts::PI, 0.0, &opts).unwrap();
        assert!((r + 2.0).abs() < 1e-10);
    }

    #[test]
    fn narrow_feature_is_detected() {
        // unit-mass spike of width 2e-5 away from every default mesh node
        let eps = 1e-5;
        let c = 0.3137;
        let spike = |x: f64| {
            let t = (x - c) / eps;
            crate::profiles::bump_value(t) / eps
        };
        let missed = adaptive_simpson(spike, -1.0, 1.0, &SimpsonOptions::default()).unwrap();
        let found = adaptive_simpson(spike, -1.0, 1.0, &SimpsonOptions::for_eps(eps)).unwrap();
        let mass = CompositeGauss::<f64>::new(16, 64)
            .integrate(-1.0, 1.0, crate::profiles::bump_value);
        assert!(missed.abs() < 1e-3 * mass, "default mesh should miss the spike");
        assert!((found - mass).abs() < 1e-9);
    }

    #[test]
    fn f32_rule() {
        let rule = CompositeGauss::<f32>::new(8, 4);
        let v = rule.integrate(0.0, 1.0, |x| x.exp());
        assert!((v - (1f32.exp() - 1.0)).abs() < 1e-5);
    }
}
