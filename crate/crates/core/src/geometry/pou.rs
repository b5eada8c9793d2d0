use super::atlas::{Atlas, ManifoldPoint};
use super::bank::{box_cutoff_test, ScalarTest};
use super::compact::CompactSet;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::net::J;

/// Smooth partition of unity `χ_j = ψ_j / Σ_k ψ_k` subordinate to a finite
/// cover by boxes, each `ψ_j` a cutoff `≡ 1` on its core.
#[derive(Debug, Clone)]
pub struct PartitionOfUnity {
    atlas: Atlas,
    psis: Vec<ScalarTest>,
}

impl PartitionOfUnity {
    pub fn len(&self) -> usize {
        self.psis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psis.is_empty()
    }

    pub fn chart_of(&self, j: usize) -> usize {
        self.psis[j].chart
    }

    pub fn support(&self, j: usize) -> &crate::net::BoxDomain {
        &self.psis[j].support
    }

    fn psi_jets(&self, chart: usize, x: &[J]) -> Result<Vec<J>> {
        let sh = x[0].shape().clone();
        let a: Vec<f64> = x.iter().map(|j| j.value()).collect();
        let p = ManifoldPoint::new(chart, a);
        self.psis
            .iter()
            .map(|psi| {
                if psi.chart == chart {
                    return Ok(psi.jet(x));
                }
                match self.atlas.map_point(&p, psi.chart)? {
                    Some(_) => Ok(psi.jet(&self.atlas.transition_jets(chart, psi.chart, x)?)),
                    None => Ok(Jet::constant(&sh, 0.0)),
                }
            })
            .collect()
    }

    /// Jets of every `χ_j` at input jets given in `chart` coordinates.
    pub fn jets(&self, chart: usize, x: &[J]) -> Result<Vec<J>> {
        let psi = self.psi_jets(chart, x)?;
        let sh = x[0].shape().clone();
        let mut total = Jet::constant(&sh, 0.0);
        for p in &psi {
            total = total + p;
        }
        if total.value() == 0.0 {
            return Ok(vec![Jet::constant(&sh, 0.0); psi.len()]);
        }
        let inv = total.recip();
        Ok(psi.iter().map(|p| p * &inv).collect())
    }

    pub fn values(&self, p: &ManifoldPoint) -> Result<Vec<f64>> {
        let seeds = Jet::seed(&p.coords, 0);
        Ok(self.jets(p.chart, &seeds)?.iter().map(|j| j.value()).collect())
    }
}

/// Partition of unity for the cover `cores`; every sampled point of `region`
/// must be covered.
pub fn partition_of_unity(atlas: &Atlas, cover: &[CompactSet], region: &CompactSet) -> Result<PartitionOfUnity> {
    if cover.is_empty() {
        return Err(Error::EmptyList);
    }
    let mut psis = Vec::with_capacity(cover.len());
    for (j, core) in cover.iter().enumerate() {
        let domain = &atlas.chart(core.chart)?.domain;
        let width = core.region.widths().iter().cloned().fold(0.0, f64::max).max(0.1);
        let gap = (0..core.dim())
            .map(|i| (core.region.lo[i] - domain.lo[i]).min(domain.hi[i] - core.region.hi[i]))
            .fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            return Err(Error::SupportEscapesChart { chart: core.chart });
        }
        let margin = (0.25 * width).min(0.5 * gap);
        psis.push(box_cutoff_test(format!("psi{j}"), core.chart, &core.region, margin));
    }
    let pou = PartitionOfUnity {
        atlas: atlas.clone(),
        psis,
    };
    for x in region.points() {
        let p = ManifoldPoint::new(region.chart, x.clone());
        let chi = pou.values(&p)?;
        let sum: f64 = chi.iter().sum();
        if sum == 0.0 {
            return Err(Error::CoverGap { point: x });
        }
        debug_assert!((sum - 1.0).abs() < 1e-9);
    }
    Ok(pou)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::BoxDomain;

    #[test]
    fn single_core_is_constant_one() {
        let a = Atlas::plain(1);
        let k = CompactSet::interval(-2.0, 2.0, 9);
        let pou = partition_of_unity(&a, std::slice::from_ref(&k), &k).unwrap();
        for x in k.points() {
            assert_eq!(pou.values(&ManifoldPoint::new(0, x)).unwrap(), vec![1.0]);
        }
    }

    #[test]
    fn two_intervals_sum_to_one() {
        let a = Atlas::plain(1);
        let cover = [CompactSet::interval(-2.0, 0.2, 5), CompactSet::interval(-0.2, 2.0, 5)];
        let region = CompactSet::interval(-2.0, 2.0, 41);
        let pou = partition_of_unity(&a, &cover, &region).unwrap();
        for x in region.points() {
            let v = pou.values(&ManifoldPoint::new(0, x.clone())).unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|c| *c >= 0.0));
        }
        // only the first support reaches x = -1.5
        let v = pou.values(&ManifoldPoint::new(0, vec![-1.5])).unwrap();
        assert_eq!(v, vec![1.0, 0.0]);
        // jets of the sum vanish beyond order 0
        let j = pou.jets(0, &Jet::seed(&[0.1], 2)).unwrap();
        let s = &j[0] + &j[1];
        assert!(s.derivative(&[1]).abs() < 1e-12 && s.derivative(&[2]).abs() < 1e-10);
    }

    #[test]
    fn gap_is_reported() {
        let a = Atlas::plain(1);
        let cover = [CompactSet::interval(-2.0, -1.0, 5), CompactSet::interval(1.0, 2.0, 5)];
        let region = CompactSet::interval(-2.0, 2.0, 9);
        assert!(matches!(
            partition_of_unity(&a, &cover, &region),
            Err(Error::CoverGap { .. })
        ));
        let mut bounded = Atlas::new(1);
        bounded.add_chart("c", BoxDomain::cube(1, -1.0, 1.0));
        let edge = [CompactSet::interval(-1.0, 0.5, 3)];
        assert!(partition_of_unity(&bounded, &edge, &edge[0]).is_err());
    }
}
