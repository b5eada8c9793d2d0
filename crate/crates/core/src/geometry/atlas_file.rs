//! Atlas description files (TOML).
//!
//! ```toml
//! dim = 2
//!
//! [[chart]]
//! name = "cart"
//! lo = [-3.0, -3.0]
//! hi = [3.0, 3.0]
//! metric = ["1", "0", "0", "1"]      # optional, row-major expressions
//!
//! [[chart]]
//! name = "polar"
//! lo = [0.5, -3.0]
//! hi = [4.0, 3.0]
//! metric = ["1", "0", "0", "x^2"]
//!
//! [[transition]]
//! from = "cart"
//! to = "polar"
//! map = "polar"                      # identity | affine | polar
//! ```
//!
//! Unbounded sides use `inf` / `-inf`.

use serde::Deserialize;

use super::atlas::{Atlas, TransitionKind};
use crate::error::{Error, Result};
use crate::net::BoxDomain;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtlasFile {
    dim: usize,
    #[serde(default)]
    chart: Vec<ChartEntry>,
    #[serde(default)]
    transition: Vec<TransitionEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChartEntry {
    name: String,
    lo: Vec<f64>,
    hi: Vec<f64>,
    metric: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
struct TransitionEntry {
    from: String,
    to: String,
    #[serde(flatten)]
    kind: TransitionKind,
}

pub fn parse_atlas(text: &str) -> Result<Atlas> {
    let file: AtlasFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    if file.chart.is_empty() {
        return Err(Error::Config("atlas needs at least one chart".into()));
    }
    let mut atlas = Atlas::new(file.dim);
    for c in &file.chart {
        if c.lo.len() != file.dim || c.hi.len() != file.dim {
            return Err(Error::Config(format!("chart `{}` bounds do not match dim", c.name)));
        }
        if c.lo.iter().zip(&c.hi).any(|(l, h)| l >= h) {
            return Err(Error::Config(format!("chart `{}` is empty", c.name)));
        }
        if atlas.chart_id(&c.name).is_some() {
            return Err(Error::Config(format!("duplicate chart `{}`", c.name)));
        }
        let id = atlas.add_chart(c.name.clone(), BoxDomain::new(c.lo.clone(), c.hi.clone()));
        if let Some(m) = &c.metric {
            let refs: Vec<&str> = m.iter().map(|s| s.as_str()).collect();
            atlas.set_metric(id, &refs)?;
        }
    }
    for t in file.transition {
        let lookup = |name: &str| {
            atlas
                .chart_id(name)
                .ok_or_else(|| Error::Config(format!("unknown chart `{name}`")))
        };
        let (from, to) = (lookup(&t.from)?, lookup(&t.to)?);
        atlas.add_transition(from, to, t.kind)?;
    }
    Ok(atlas)
}

pub fn load_atlas(path: &std::path::Path) -> Result<Atlas> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_atlas(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::atlas::ManifoldPoint;
    use crate::geometry::distance::riemannian_distance;

    const POLAR: &str = r#"
dim = 2

[[chart]]
name = "cart"
lo = [-3.0, -3.0]
hi = [3.0, 3.0]
metric = ["1", "0", "0", "1"]

[[chart]]
name = "polar"
lo = [0.5, -3.0]
hi = [4.0, 3.0]
metric = ["1", "0", "0", "x^2"]

[[transition]]
from = "cart"
to = "polar"
map = "polar"
"#;

    #[test]
    fn parses_polar_atlas() {
        let a = parse_atlas(POLAR).unwrap();
        assert_eq!(a.charts().len(), 2);
        let p = ManifoldPoint::new(0, vec![2.0, 0.0]);
        let q = ManifoldPoint::new(1, vec![2.0, std::f64::consts::PI / 2.0]);
        let d = riemannian_distance(&a, &p, &q).unwrap();
        assert!((d - 8f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn affine_and_unbounded() {
        let text = r#"
dim = 1
[[chart]]
name = "a"
lo = [-inf]
hi = [inf]
[[chart]]
name = "b"
lo = [-inf]
hi = [inf]
[[transition]]
from = "a"
to = "b"
map = "affine"
matrix = [[3.0]]
offset = [1.0]
"#;
        let a = parse_atlas(text).unwrap();
        let y = a.map_point(&ManifoldPoint::new(0, vec![1.0]), 1).unwrap();
        assert_eq!(y, Some(vec![4.0]));
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_atlas("dim = 1").is_err());
        assert!(parse_atlas("dim = 1\n[[chart]]\nname='a'\nlo=[1.0]\nhi=[0.0]").is_err());
        let unknown = "dim = 1\n[[chart]]\nname='a'\nlo=[0.0]\nhi=[1.0]\n[[transition]]\nfrom='a'\nto='z'\nmap='identity'";
        assert!(parse_atlas(unknown).is_err());
        let bad_expr = "dim = 1\n[[chart]]\nname='a'\nlo=[0.0]\nhi=[1.0]\nmetric=['import(os)']";
        assert!(parse_atlas(bad_expr).is_err());
    }
}
