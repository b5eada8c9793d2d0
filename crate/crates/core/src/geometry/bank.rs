//! Test objects the characterizations quantify over: bump functions, box
//! cutoffs, finite banks of scalar tests and one-densities.

use std::fmt;
use std::sync::Arc;

use super::atlas::Atlas;
use crate::error::{Error, Result};
use crate::jet::{self, Jet};
use crate::net::{BoxDomain, Net, SmoothMapHandle, J, UNLIMITED};
use crate::profiles::{bump, bump_value, smooth_step};

pub const DEFAULT_BANK_SIZE: usize = 16;

type JetFn = Arc<dyn Fn(&[J]) -> J + Send + Sync>;

/// Smooth scalar test function in the coordinates of one chart, vanishing
/// outside `support`.
#[derive(Clone)]
pub struct ScalarTest {
    pub id: String,
    pub chart: usize,
    pub support: BoxDomain,
    f: JetFn,
}

impl fmt::Debug for ScalarTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarTest({}, chart {})", self.id, self.chart)
    }
}

impl ScalarTest {
    pub fn new<F>(id: impl Into<String>, chart: usize, support: BoxDomain, f: F) -> Self
    where
        F: Fn(&[J]) -> J + Send + Sync + 'static,
    {
        ScalarTest {
            id: id.into(),
            chart,
            support,
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        let sh = jet::shape(y.len(), 0);
        let seeds: Vec<J> = y.iter().map(|&v| Jet::constant(&sh, v)).collect();
        (self.f)(&seeds).value()
    }

    pub fn jet(&self, y: &[J]) -> J {
        (self.f)(y)
    }

    pub fn to_net(&self) -> Net {
        let f = self.f.clone();
        Net::from_jet_fn(self.support.dim(), 1, UNLIMITED, self.id.clone(), move |_, y| vec![f(y)])
    }
}

/// `1` on the ball of radius `r_in`, `0` outside radius `r_out`.
fn radial_bump(center: Vec<f64>, r_in: f64, r_out: f64) -> impl Fn(&[J]) -> J + Send + Sync + Clone {
    let (a, b) = (r_in * r_in, r_out * r_out);
    move |y: &[J]| {
        let sh = y[0].shape().clone();
        let mut s = Jet::constant(&sh, 0.0);
        for (yi, ci) in y.iter().zip(&center) {
            let d = yi.add_scalar(-ci);
            s = s + &d * &d;
        }
        smooth_step(&s.add_scalar(-a).scale(1.0 / (b - a)))
    }
}

/// Radial C^∞ bump on ℝⁿ: `1` on `|y−c| ≤ r_in`, `0` on `|y−c| ≥ r_out`.
pub fn make_bump(center: &[f64], inner_radius: f64, outer_radius: f64) -> Result<SmoothMapHandle> {
    if !(inner_radius > 0.0 && inner_radius < outer_radius) {
        return Err(Error::Config(format!(
            "bump radii must satisfy 0 < inner < outer (got {inner_radius}, {outer_radius})"
        )));
    }
    let f = radial_bump(center.to_vec(), inner_radius, outer_radius);
    Ok(Net::from_jet_fn(center.len(), 1, UNLIMITED, "bump", move |_, y| vec![f(y)]).at(1.0))
}

/// Bump checked against a chart of `atlas`.
pub fn make_bump_in(atlas: &Atlas, chart: usize, center: &[f64], inner_radius: f64, outer_radius: f64) -> Result<ScalarTest> {
    let domain = &atlas.chart(chart)?.domain;
    let support = BoxDomain::new(
        center.iter().map(|c| c - outer_radius).collect(),
        center.iter().map(|c| c + outer_radius).collect(),
    );
    if !domain.contains_box_with_margin(&support, 0.0) || support.lo == domain.lo || support.hi == domain.hi {
        return Err(Error::BallEscapesChart { chart });
    }
    make_bump(center, inner_radius, outer_radius)?;
    Ok(ScalarTest::new(
        format!("bump{center:?}"),
        chart,
        support,
        radial_bump(center.to_vec(), inner_radius, outer_radius),
    ))
}

/// Product cutoff: `1` on `region`, `0` outside `region` widened by `margin`.
pub fn box_cutoff(region: &BoxDomain, margin: f64) -> impl Fn(&[J]) -> J + Send + Sync + Clone {
    let (lo, hi) = (region.lo.clone(), region.hi.clone());
    move |y: &[J]| {
        let sh = y[0].shape().clone();
        let mut acc = Jet::constant(&sh, 1.0);
        for (i, yi) in y.iter().enumerate() {
            let below = smooth_step(&yi.scale(-1.0).add_scalar(lo[i]).scale(1.0 / margin));
            let above = smooth_step(&yi.add_scalar(-hi[i]).scale(1.0 / margin));
            acc = acc * below * above;
        }
        acc
    }
}

pub fn box_cutoff_test(id: impl Into<String>, chart: usize, region: &BoxDomain, margin: f64) -> ScalarTest {
    ScalarTest::new(id, chart, region.expanded(margin), box_cutoff(region, margin))
}

/// Margin used around a bank region.
pub fn bank_margin(region: &BoxDomain) -> f64 {
    0.25 * region.widths().iter().cloned().fold(0.0, f64::max).max(0.2)
}

/// Finite bank of `size` compactly supported tests around `region`:
/// the cutoff `χ ≡ 1` on the region, coordinate-times-cutoff functions, and
/// separated bumps at two scales.
pub fn scalar_bank(chart: usize, region: &BoxDomain, size: usize) -> Vec<ScalarTest> {
    let n = region.dim();
    let margin = bank_margin(region);
    let chi = box_cutoff(region, margin);
    let support = region.expanded(margin);
    let mut bank = vec![ScalarTest::new("cutoff", chart, support.clone(), chi.clone())];
    for i in 0..n {
        let c = chi.clone();
        bank.push(ScalarTest::new(format!("coord{i}*cutoff"), chart, support.clone(), move |y: &[J]| {
            &y[i] * &c(y)
        }));
    }
    let width = region.widths().iter().cloned().fold(0.0, f64::max).max(0.1);
    let mut centers: Vec<(Vec<f64>, f64)> = Vec::new();
    // coarse scale: centre and corners
    centers.push((region.center(), 0.5 * width));
    for mask in 0..(1usize << n).min(8) {
        let c = (0..n)
            .map(|i| if mask >> i & 1 == 1 { region.hi[i] } else { region.lo[i] })
            .collect();
        centers.push((c, 0.5 * width));
    }
    // fine scale: Halton points
    let primes = [2u32, 3, 5, 7, 11, 13];
    let mut k = 1u32;
    while bank.len() + centers.len() < size {
        let c = (0..n)
            .map(|i| region.lo[i] + halton(k, primes[i % primes.len()]) * (region.hi[i] - region.lo[i]))
            .collect();
        centers.push((c, 0.2 * width));
        k += 1;
    }
    for (c, r) in centers {
        if bank.len() >= size {
            break;
        }
        let sup = BoxDomain::new(c.iter().map(|v| v - r).collect(), c.iter().map(|v| v + r).collect());
        bank.push(ScalarTest::new(format!("bump{c:?}/{r}"), chart, sup, radial_bump(c, 0.5 * r, r)));
    }
    bank
}

fn halton(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Smooth functions on all of ℝⁿ that are not compactly supported: the
/// coordinates and `|y|²`. These detect escaping images that compactly
/// supported tests miss.
pub fn unbounded_bank(chart: usize, dim: usize) -> Vec<ScalarTest> {
    let mut bank: Vec<ScalarTest> = (0..dim)
        .map(|i| ScalarTest::new(format!("coord{i}"), chart, BoxDomain::whole(dim), move |y: &[J]| y[i].clone()))
        .collect();
    bank.push(ScalarTest::new("norm2", chart, BoxDomain::whole(dim), |y: &[J]| {
        let mut s = Jet::constant(y[0].shape(), 0.0);
        for yi in y {
            s = s + yi * yi;
        }
        s
    }));
    bank
}

/// One-density `ν(x)dx` on a one-dimensional chart: `w(x)·ψ((x−c)/r)` with
/// `ψ` the bump normalized to `ψ(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub id: String,
    pub center: f64,
    pub radius: f64,
    /// Polynomial weight coefficients `w(x) = Σ a_k x^k`.
    pub weight: Vec<f64>,
}

impl Density {
    pub fn new(id: impl Into<String>, center: f64, radius: f64, weight: Vec<f64>) -> Self {
        Density {
            id: id.into(),
            center,
            radius,
            weight,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let w: f64 = self.weight.iter().rev().fold(0.0, |acc, a| acc * x + a);
        w * bump_value((x - self.center) / self.radius) * std::f64::consts::E
    }

    pub fn jet(&self, x: &J) -> J {
        let t = x.add_scalar(-self.center).scale(1.0 / self.radius);
        let mut w = Jet::constant(x.shape(), 0.0);
        for a in self.weight.iter().rev() {
            w = (&w * x).add_scalar(*a);
        }
        (&w * &bump(&t)).scale(std::f64::consts::E)
    }
}

/// Default density bank on ℝ: several around the origin, one away from it,
/// and one vanishing at the origin.
pub fn density_bank() -> Vec<Density> {
    vec![
        Density::new("nu0", 0.0, 1.0, vec![1.0]),
        Density::new("nu1", 0.0, 0.5, vec![1.0, 1.0]),
        Density::new("nu2", 0.25, 0.6, vec![1.0]),
        Density::new("nu3", -0.3, 0.5, vec![1.0, -2.0]),
        Density::new("nu4", 0.6, 0.3, vec![1.0]),
        Density::new("nu5", 0.0, 1.0, vec![0.0, 1.0]),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_examples() {
        let b = make_bump(&[0.5, -0.5], 0.2, 0.6).unwrap();
        assert_eq!(b.eval(&[0.5, -0.5]).unwrap(), vec![1.0]);
        assert_eq!(b.eval(&[0.5, 0.2]).unwrap(), vec![0.0]);
        for v in [[0.25, 0.125], [-0.0625, 0.25], [0.375, 0.0]] {
            let p = b.eval(&[0.5 + v[0], -0.5 + v[1]]).unwrap()[0];
            let m = b.eval(&[0.5 - v[0], -0.5 - v[1]]).unwrap()[0];
            assert_eq!(p, m);
            assert!((0.0..=1.0).contains(&p));
        }
        assert!(b.k_max() >= 3);
        assert!(make_bump(&[0.0], 0.5, 0.5).is_err());
    }

    #[test]
    fn bump_must_fit_chart() {
        let mut a = Atlas::new(1);
        a.add_chart("c", BoxDomain::cube(1, -1.0, 1.0));
        assert!(make_bump_in(&a, 0, &[0.0], 0.2, 0.5).is_ok());
        assert!(matches!(
            make_bump_in(&a, 0, &[0.8], 0.2, 0.5),
            Err(Error::BallEscapesChart { chart: 0 })
        ));
    }

    #[test]
    fn bank_members_vanish_outside_support() {
        let region = BoxDomain::new(vec![-1.0, 0.0], vec![1.0, 0.5]);
        let bank = scalar_bank(0, &region, DEFAULT_BANK_SIZE);
        assert_eq!(bank.len(), DEFAULT_BANK_SIZE);
        for t in &bank {
            let s = &t.support;
            for p in [
                vec![s.lo[0] - 1e-9, s.center()[1]],
                vec![s.hi[0] + 0.3, s.lo[1]],
                vec![s.center()[0], s.hi[1] + 1e-6],
            ] {
                assert_eq!(t.eval(&p), 0.0, "{} at {p:?}", t.id);
            }
        }
        // cutoff is 1 on the region
        assert_eq!(bank[0].eval(&[0.3, 0.2]), 1.0);
        assert_eq!(bank[1].eval(&[0.3, 0.2]), 0.3);
    }

    #[test]
    fn densities() {
        let d = &density_bank()[0];
        assert!((d.eval(0.0) - 1.0).abs() < 1e-15);
        assert_eq!(d.eval(1.0), 0.0);
        let j = d.jet(&Jet::seed(&[0.3], 1)[0]);
        assert!((j.value() - d.eval(0.3)).abs() < 1e-15);
        assert_eq!(density_bank()[5].eval(0.0), 0.0);
    }
}
