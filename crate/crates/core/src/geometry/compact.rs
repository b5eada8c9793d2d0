use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::atlas::Atlas;
use crate::error::{Error, Result};
use crate::net::BoxDomain;

/// Offsets (in units of ε) of the sample patch placed around each focus point.
const FOCUS_OFFSETS: [f64; 13] = [-8.0, -4.0, -2.0, -1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0];

/// A closed box `K` strictly inside a chart domain, with its sampling rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub id: String,
    pub chart: usize,
    pub region: BoxDomain,
    /// Grid points per axis (boundary included).
    pub resolution: usize,
    /// Extra uniformly jittered points, drawn from a fixed seed.
    pub jitter: usize,
    pub seed: u64,
}

impl CompactSet {
    pub fn new(atlas: &Atlas, chart: usize, region: BoxDomain, resolution: usize) -> Result<Self> {
        let domain = &atlas.chart(chart)?.domain;
        if region.dim() != atlas.dim() || !region.is_bounded() {
            return Err(Error::Config("compact set must be a bounded box of the atlas dimension".into()));
        }
        if region.lo.iter().zip(&region.hi).any(|(l, h)| l > h) {
            return Err(Error::Config("compact set has inverted bounds".into()));
        }
        let inside = (0..region.dim()).all(|i| region.lo[i] > domain.lo[i] && region.hi[i] < domain.hi[i]);
        if !inside {
            return Err(Error::SupportEscapesChart { chart });
        }
        Ok(CompactSet {
            id: format!("K{chart}{:?}", region.lo),
            chart,
            region,
            resolution: resolution.max(2),
            jitter: resolution.max(2),
            seed: 0x5eed,
        })
    }

    /// Interval `[lo, hi]` in a one-dimensional chart of ℝ.
    pub fn interval(lo: f64, hi: f64, resolution: usize) -> Self {
        CompactSet {
            id: format!("[{lo},{hi}]"),
            chart: 0,
            region: BoxDomain::new(vec![lo], vec![hi]),
            resolution: resolution.max(2),
            jitter: resolution.max(2),
            seed: 0x5eed,
        }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64, resolution: usize) -> Self {
        CompactSet {
            id: format!("[{lo},{hi}]^{dim}"),
            chart: 0,
            region: BoxDomain::cube(dim, lo, hi),
            resolution: resolution.max(2),
            jitter: resolution.max(2),
            seed: 0x5eed,
        }
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.region.dim()
    }

    /// Tensor grid with boundary plus seeded jitter points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let r = self.resolution;
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        'grid: loop {
            out.push(
                (0..n)
                    .map(|i| {
                        let t = idx[i] as f64 / (r - 1) as f64;
                        self.region.lo[i] + t * (self.region.hi[i] - self.region.lo[i])
                    })
                    .collect(),
            );
            let mut i = 0;
            loop {
                if i == n {
                    break 'grid;
                }
                idx[i] += 1;
                if idx[i] < r {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        for _ in 0..self.jitter {
            out.push(
                (0..n)
                    .map(|i| rng.gen_range(self.region.lo[i]..=self.region.hi[i]))
                    .collect(),
            );
        }
        out
    }

    /// [`points`](Self::points) plus ε-scale patches around `focus` points so
    /// features of width ε are resolved at every grid ε.
    pub fn points_at(&self, eps: f64, focus: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut out = self.points();
        for f in focus {
            if f.len() != self.dim() {
                continue;
            }
            for axis in 0..self.dim() {
                for k in FOCUS_OFFSETS {
                    let mut p = f.clone();
                    p[axis] += k * eps;
                    if self.region.contains(&p) {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_points_with_boundary() {
        let k = CompactSet::interval(-1.0, 1.0, 5);
        let a = k.points();
        assert_eq!(a, k.points());
        assert_eq!(a.len(), 10);
        assert_eq!(a[0], vec![-1.0]);
        assert_eq!(a[2], vec![0.0]);
        assert_eq!(a[4], vec![1.0]);
        assert!(a.iter().all(|p| k.region.contains(p)));
        let other = k.clone().with_seed(7).points();
        assert_ne!(a, other);
    }

    #[test]
    fn focus_patches_scale_with_eps() {
        let k = CompactSet::interval(-1.0, 1.0, 3);
        let base = k.points().len();
        let pts = k.points_at(1e-3, &[vec![0.0]]);
        assert_eq!(pts.len(), base + 13);
        assert!(pts.contains(&vec![2.5e-4]));
    }

    #[test]
    fn must_sit_inside_chart() {
        let mut a = Atlas::new(1);
        a.add_chart("c", BoxDomain::cube(1, -1.0, 1.0));
        assert!(CompactSet::new(&a, 0, BoxDomain::cube(1, -0.5, 0.5), 5).is_ok());
        assert!(matches!(
            CompactSet::new(&a, 0, BoxDomain::cube(1, -1.0, 0.5), 5),
            Err(Error::SupportEscapesChart { chart: 0 })
        ));
    }
}
