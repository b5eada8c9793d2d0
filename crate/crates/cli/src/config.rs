//! Run configuration: a sectioned TOML file naming nets, compact sets and
//! the checks each command runs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use colombeau_core::association::{as_manifold_net, embed_distribution, Distribution, Mollifier};
use colombeau_core::asymptotics::{AsymptoticParams, EpsGrid};
use colombeau_core::bundle_maps::{HomNet, HybridNet};
use colombeau_core::geometry::atlas::Atlas;
use colombeau_core::geometry::atlas_file::load_atlas;
use colombeau_core::geometry::compact::CompactSet;
use colombeau_core::manifold_maps::{CheckConfig, ManifoldNet};
use colombeau_core::net::{BoxDomain, Net};

pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

#[derive(Debug)]
pub enum ConfigError {
    Parse(String),
    UnknownNet(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse(m) => write!(f, "{m}"),
            ConfigError::UnknownNet(l) => write!(f, "unknown net `{l}`"),
        }
    }
}

fn parse_err(e: impl std::fmt::Display) -> ConfigError {
    ConfigError::Parse(e.to_string())
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub eps_max: f64,
    pub eps_min: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            eps_max: 2f64.powi(-4),
            eps_min: 2f64.powi(-20),
            points: 17,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub n_max: u32,
    pub m_max: u32,
    pub fit_tolerance: f64,
    pub assoc_tol: f64,
    pub k_max: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let p = AsymptoticParams::default();
        Tolerances {
            n_max: p.n_max,
            m_max: p.m_max,
            fit_tolerance: p.fit_tolerance,
            assoc_tol: 1e-3,
            k_max: 1,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactSpec {
    pub id: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    pub atlas: Option<String>,
    pub chart: Option<String>,
}

fn default_resolution() -> usize {
    33
}

fn default_vars() -> Vec<String> {
    vec!["x".into()]
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub label: String,
    #[serde(default)]
    pub exprs: Vec<String>,
    #[serde(default = "default_vars")]
    pub vars: Vec<String>,
    /// power | trig | heaviside | delta | half_delta
    pub catalog: Option<String>,
    pub power: Option<f64>,
    pub function: Option<String>,
    pub mollifier: Option<String>,
    pub domain: Option<[f64; 2]>,
    pub source: Option<String>,
    pub target: Option<String>,
    pub source_chart: Option<String>,
    pub target_chart: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSpec {
    pub label: String,
    pub base: Vec<String>,
    pub fiber: Vec<String>,
    #[serde(default = "default_vars")]
    pub vars: Vec<String>,
    #[serde(default = "one")]
    pub source_fiber: usize,
    #[serde(default = "one")]
    pub target_fiber: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HybridSpec {
    pub label: String,
    pub base: Vec<String>,
    pub fiber: Vec<String>,
    #[serde(default = "default_vars")]
    pub vars: Vec<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifySpec {
    pub net: String,
    pub compact: Option<String>,
    /// Expected classification as printed, e.g. `Moderate(3)`.
    pub expect: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub u: String,
    pub v: String,
    pub compact: Option<String>,
    pub expect: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointvalSpec {
    pub u: String,
    pub v: String,
    /// manifold | hybrid
    #[serde(default = "manifold_kind")]
    pub kind: String,
    pub compact: Option<String>,
    #[serde(default = "twenty")]
    pub points: usize,
    pub expect: Option<bool>,
}

fn manifold_kind() -> String {
    "manifold".into()
}

fn twenty() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssociateSpec {
    pub u: String,
    /// Omitted: association with zero.
    pub v: Option<String>,
    /// weak | k | shadow
    #[serde(default = "weak")]
    pub mode: String,
    #[serde(default)]
    pub k: usize,
    /// Raise `u` to this power before pairing.
    pub power: Option<i32>,
    /// Power for `v`; defaults to `power`.
    pub v_power: Option<i32>,
    /// Association tolerance for this check; the global one when omitted.
    pub tol: Option<f64>,
    pub compact: Option<String>,
    /// Shadow candidate `c·δ`; `square_integral` reads `c = ∫ρ²` of `mollifier`.
    pub delta_weight: Option<toml::Value>,
    pub mollifier: Option<String>,
    pub expect: Option<bool>,
}

fn weak() -> String {
    "weak".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssocGridSpec {
    /// Dyadic exponents `[first, last]`.
    pub eps_exponents: [i32; 2],
}

impl Default for AssocGridSpec {
    fn default() -> Self {
        AssocGridSpec { eps_exponents: [2, 14] }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PpwaveSpec {
    pub profile: String,
    pub mollifier: String,
    pub x0: f64,
    pub y0: f64,
    pub interval: [f64; 2],
    pub eps_exponents: [i32; 2],
    pub samples: usize,
    pub assoc_tol: f64,
}

impl Default for PpwaveSpec {
    fn default() -> Self {
        PpwaveSpec {
            profile: "x^2-y^2".into(),
            mollifier: "standard".into(),
            x0: 1.0,
            y0: 0.0,
            interval: [-1.0, 1.0],
            eps_exponents: [6, 14],
            samples: 4001,
            assoc_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteSpec {
    pub criteria: Vec<usize>,
    pub random_points: usize,
    pub instances: usize,
}

impl Default for SuiteSpec {
    fn default() -> Self {
        SuiteSpec {
            criteria: (1..=10).collect(),
            random_points: 20,
            instances: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub atlases: BTreeMap<String, PathBuf>,
    pub compact: Vec<CompactSpec>,
    pub net: Vec<NetSpec>,
    pub hom: Vec<HomSpec>,
    pub hybrid: Vec<HybridSpec>,
    pub classify: Vec<ClassifySpec>,
    pub equiv: Vec<PairSpec>,
    pub vb_equiv: Vec<PairSpec>,
    pub hybrid_equiv: Vec<PairSpec>,
    pub pointvals: Vec<PointvalSpec>,
    pub associate: Vec<AssociateSpec>,
    pub assoc_grid: AssocGridSpec,
    pub ppwave: PpwaveSpec,
    pub suite: SuiteSpec,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(parse_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let t = &self.tolerances;
        if !(positive(t.fit_tolerance) && positive(t.assoc_tol) && t.n_max > 0 && t.m_max > 0) {
            return Err(ConfigError::Parse("all tolerances must be positive".into()));
        }
        if self.associate.iter().any(|a| a.tol.is_some_and(|t| !positive(t))) {
            return Err(ConfigError::Parse("association tolerances must be positive".into()));
        }
        if !positive(self.ppwave.assoc_tol) {
            return Err(ConfigError::Parse("ppwave.assoc_tol must be positive".into()));
        }
        self.eps_grid()?;
        EpsGrid::dyadic(self.assoc_grid.eps_exponents[0], self.assoc_grid.eps_exponents[1]).map_err(parse_err)?;
        EpsGrid::dyadic(self.ppwave.eps_exponents[0], self.ppwave.eps_exponents[1]).map_err(parse_err)?;
        Ok(())
    }

    pub fn eps_grid(&self) -> Result<EpsGrid, ConfigError> {
        let g = &self.grid;
        EpsGrid::geometric(g.eps_max, g.eps_min, g.points).map_err(parse_err)
    }

    pub fn check_config(&self) -> Result<CheckConfig, ConfigError> {
        let t = &self.tolerances;
        let params = AsymptoticParams {
            n_max: t.n_max,
            m_max: t.m_max,
            fit_tolerance: t.fit_tolerance,
            ..AsymptoticParams::default()
        };
        params.validate().map_err(parse_err)?;
        let mut c = CheckConfig::default().with_grid(self.eps_grid()?).with_k_max(t.k_max);
        c.params = params;
        c.assoc_tol = t.assoc_tol;
        Ok(c)
    }

    pub fn assoc_grid(&self) -> Result<EpsGrid, ConfigError> {
        let [a, b] = self.assoc_grid.eps_exponents;
        EpsGrid::dyadic(a, b).map_err(parse_err)
    }
}

pub fn mollifier(name: &str) -> Result<Mollifier, ConfigError> {
    match name {
        "standard" => Ok(Mollifier::standard()),
        "weighted" => Ok(Mollifier::weighted()),
        other => Err(ConfigError::Parse(format!("unknown mollifier `{other}`"))),
    }
}

/// Nets, bundle maps and compact sets addressed by label.
pub struct Registry {
    pub nets: BTreeMap<String, (Net, ManifoldNet)>,
    pub homs: BTreeMap<String, HomNet>,
    pub hybrids: BTreeMap<String, HybridNet>,
    pub compacts: BTreeMap<String, CompactSet>,
}

impl Registry {
    pub fn build(cfg: &RunConfig, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut atlases = BTreeMap::new();
        for (name, path) in &cfg.atlases {
            let full = base_dir.join(path);
            atlases.insert(name.clone(), load_atlas(&full).map_err(|e| ConfigError::Parse(format!("{}: {e}", full.display())))?);
        }
        let atlas = |name: &Option<String>| -> Result<Option<&Atlas>, ConfigError> {
            match name {
                None => Ok(None),
                Some(n) => atlases
                    .get(n)
                    .map(Some)
                    .ok_or_else(|| ConfigError::Parse(format!("unknown atlas `{n}`"))),
            }
        };
        let chart_id = |a: &Atlas, name: &Option<String>| -> Result<usize, ConfigError> {
            match name {
                None => Ok(0),
                Some(n) => a.chart_id(n).ok_or_else(|| ConfigError::Parse(format!("unknown chart `{n}`"))),
            }
        };

        let mut compacts = BTreeMap::new();
        compacts.insert(
            "K".to_string(),
            CompactSet::interval(-1.0, 1.0, 33).with_id("K").with_seed(cfg.seed),
        );
        for c in &cfg.compact {
            let region = BoxDomain::new(c.lo.clone(), c.hi.clone());
            let k = match atlas(&c.atlas)? {
                Some(a) => CompactSet::new(a, chart_id(a, &c.chart)?, region, c.resolution),
                None => CompactSet::new(&Atlas::euclidean(c.lo.len()), 0, region, c.resolution),
            }
            .map_err(|e| ConfigError::Parse(format!("compact `{}`: {e}", c.id)))?;
            compacts.insert(c.id.clone(), k.with_id(c.id.clone()).with_seed(cfg.seed));
        }

        let mut nets = BTreeMap::new();
        for n in &cfg.net {
            let net = catalog_net(n)?;
            let m = match (atlas(&n.source)?, atlas(&n.target)?) {
                (None, None) => as_manifold_net(&net),
                (s, t) => {
                    let src = s.cloned().unwrap_or_else(|| Atlas::euclidean(net.dim_in()));
                    let tgt = t.cloned().unwrap_or_else(|| Atlas::euclidean(net.dim_out()));
                    let (sc, tc) = (chart_id(&src, &n.source_chart)?, chart_id(&tgt, &n.target_chart)?);
                    ManifoldNet::new(n.label.clone(), src, tgt).with_rep(sc, tc, net.clone()).map_err(parse_err)?
                }
            };
            nets.insert(n.label.clone(), (net, m.with_label(n.label.clone())));
        }
        let mut homs = BTreeMap::new();
        for h in &cfg.hom {
            let (b, f, v) = (strs(&h.base), strs(&h.fiber), strs(&h.vars));
            let net = HomNet::from_exprs(&b, &f, &v, h.source_fiber, h.target_fiber, &h.label).map_err(parse_err)?;
            homs.insert(h.label.clone(), net);
        }
        let mut hybrids = BTreeMap::new();
        for h in &cfg.hybrid {
            let (b, f, v) = (strs(&h.base), strs(&h.fiber), strs(&h.vars));
            hybrids.insert(h.label.clone(), HybridNet::from_exprs(&b, &f, &v, &h.label).map_err(parse_err)?);
        }
        Ok(Registry {
            nets,
            homs,
            hybrids,
            compacts,
        })
    }

    pub fn net(&self, label: &str) -> Result<&(Net, ManifoldNet), ConfigError> {
        self.nets.get(label).ok_or_else(|| ConfigError::UnknownNet(label.into()))
    }

    pub fn hom(&self, label: &str) -> Result<&HomNet, ConfigError> {
        self.homs.get(label).ok_or_else(|| ConfigError::UnknownNet(label.into()))
    }

    pub fn hybrid(&self, label: &str) -> Result<&HybridNet, ConfigError> {
        self.hybrids.get(label).ok_or_else(|| ConfigError::UnknownNet(label.into()))
    }

    pub fn compact(&self, id: &Option<String>) -> Result<&CompactSet, ConfigError> {
        let id = id.as_deref().unwrap_or("K");
        self.compacts
            .get(id)
            .ok_or_else(|| ConfigError::Parse(format!("unknown compact set `{id}`")))
    }
}

/// False for NaN.
fn positive(x: f64) -> bool {
    x > 0.0
}

fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(|s| s.as_str()).collect()
}

fn catalog_net(n: &NetSpec) -> Result<Net, ConfigError> {
    let vars = strs(&n.vars);
    let exprs: Vec<String> = match n.catalog.as_deref() {
        None => {
            if n.exprs.is_empty() {
                return Err(ConfigError::Parse(format!("net `{}` has neither exprs nor catalog", n.label)));
            }
            n.exprs.clone()
        }
        Some("power") => {
            let p = n.power.ok_or_else(|| ConfigError::Parse(format!("net `{}`: power missing", n.label)))?;
            let factor = n.exprs.first().map(String::as_str).unwrap_or("1");
            vec![format!("eps^({p})*({factor})")]
        }
        Some("trig") => {
            let f = n.function.as_deref().unwrap_or("sin");
            if f != "sin" && f != "cos" {
                return Err(ConfigError::Parse(format!("net `{}`: trig function must be sin or cos", n.label)));
            }
            let p = n.power.unwrap_or(1.0);
            vec![format!("{f}({}/eps^({p}))", vars[0])]
        }
        Some(kind @ ("heaviside" | "delta" | "half_delta")) => {
            let dist = match kind {
                "heaviside" => Distribution::Heaviside,
                "delta" => Distribution::Delta,
                _ => Distribution::HalfDelta,
            };
            let rho = mollifier(n.mollifier.as_deref().unwrap_or("standard"))?;
            let [lo, hi] = n.domain.unwrap_or([-10.0, 10.0]);
            let net = embed_distribution(&dist, &rho, &BoxDomain::new(vec![lo], vec![hi]), 1.0).map_err(parse_err)?;
            return Ok(net.with_label(n.label.clone()));
        }
        Some(other) => return Err(ConfigError::Parse(format!("unknown catalog entry `{other}`"))),
    };
    let refs = strs(&exprs);
    Net::from_exprs(&refs, &vars, n.label.clone()).map_err(parse_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_config_builds() {
        let cfg = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        let reg = Registry::build(&cfg, Path::new(".")).unwrap();
        for c in &cfg.classify {
            reg.net(&c.net).unwrap();
        }
        assert!(!cfg.equiv.is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("[grid]\npoints = 3\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::parse("[tolerances]\nassoc_tol = 0.0\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(RunConfig::parse("bogus = 1\n"), Err(ConfigError::Parse(_))));
        let cfg = RunConfig::parse("").unwrap();
        let reg = Registry::build(&cfg, Path::new(".")).unwrap();
        assert!(matches!(reg.net("nope"), Err(ConfigError::UnknownNet(_))));
    }

    #[test]
    fn catalog_entries() {
        let cfg = RunConfig::parse(
            r#"
[[net]]
label = "p"
catalog = "power"
power = -3
exprs = ["sin(x)"]

[[net]]
label = "t"
catalog = "trig"
function = "cos"

[[net]]
label = "h"
catalog = "heaviside"
mollifier = "weighted"
"#,
        )
        .unwrap();
        let reg = Registry::build(&cfg, Path::new(".")).unwrap();
        let (p, _) = reg.net("p").unwrap();
        assert!((p.eval(0.5, &[1.0]).unwrap()[0] - 8.0 * 1f64.sin()).abs() < 1e-12);
        let (t, _) = reg.net("t").unwrap();
        assert_eq!(t.eval(0.5, &[1.0]).unwrap()[0], 2f64.cos());
        let (h, _) = reg.net("h").unwrap();
        assert_eq!(h.eval(0.01, &[1.0]).unwrap()[0], 1.0);
    }
}
