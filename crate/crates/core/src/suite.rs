//! The standard experiment suite: ten checks over a fixed catalog of nets,
//! each reduced to a pass/fail outcome with verdict records.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::association::{
    check_associated, check_k_associated, compose_scalar, embed_distribution, representative_sup_difference, shadow, Distribution,
    Mollifier,
};
use crate::asymptotics::{is_negligible, Classification, EpsGrid};
use crate::bundle_maps::{
    align_hom, align_hybrid, check_hybrid_equivalent, check_hybrid_equivalent_order, check_hybrid_pointvalue_equality,
    check_vb_equivalent, check_vb_equivalent_order, compose_homs_checked, compose_hybrid_checked, hom_u_add, hom_u_scale, hom_u_zero,
    HomNet, HybridNet,
};
use crate::error::Result;
use crate::geometry::atlas::ManifoldPoint;
use crate::geometry::bank::{density_bank, Density};
use crate::geometry::compact::CompactSet;
use crate::impulsive_wave::{kink_limit_study, GeodesicInit, KinkReport, KinkStudyConfig, PPWaveProfile};
use crate::manifold_maps::{
    check_equivalent, check_pointvalue_equality, classify_net, compose_checked, perturb, random_points, CheckConfig, ManifoldNet,
};
use crate::net::{BoxDomain, Net};
use crate::records::VerdictRecord;

pub const CRITERIA: [&str; 10] = [
    "estimator-calibration",
    "route-agreement",
    "linear-vs-quadratic",
    "heaviside-powers",
    "delta-square-sensitivity",
    "composition-well-defined",
    "point-value-separation",
    "alignment-hom-u",
    "order-collapse",
    "ppwave-kink",
];

/// Sampling for the suite; defaults are the desk-scale settings.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    /// Equivalence, composition and point-value checks.
    pub check: CheckConfig,
    /// Weak pairings and shadows; its smallest ε is where shadows are read.
    pub assoc_grid: EpsGrid,
    pub kink: KinkStudyConfig,
    pub random_points: usize,
    pub instances: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            check: CheckConfig::default().with_k_max(1),
            assoc_grid: EpsGrid::dyadic(2, 14).expect("valid grid"),
            kink: KinkStudyConfig::default(),
            random_points: 20,
            instances: 5,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub summary: String,
    pub records: Vec<VerdictRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairKind {
    Identical,
    NegligiblePerturbed,
    EpsSeparated,
    UnitSeparated,
}

impl PairKind {
    pub fn equivalent(self) -> bool {
        matches!(self, PairKind::Identical | PairKind::NegligiblePerturbed)
    }
}

fn k1() -> CompactSet {
    CompactSet::interval(-1.0, 1.0, 33)
}

fn mnet(exprs: &[&str]) -> Result<ManifoldNet> {
    ManifoldNet::from_exprs(exprs, &["x"], &exprs.join(","))
}

fn hom(base: &str, fiber: &str) -> Result<HomNet> {
    HomNet::from_exprs(&[base], &[fiber], &["x"], 1, 1, &format!("({base};{fiber})"))
}

fn hybrid(base: &str, fiber: &str) -> Result<HybridNet> {
    HybridNet::from_exprs(&[base], &[fiber], &["x"], &format!("({base};{fiber})"))
}

/// Pairs of nets ℝ → ℝⁿ covering every separation class.
pub fn manifold_pairs() -> Result<Vec<(PairKind, ManifoldNet, ManifoldNet)>> {
    use PairKind::*;
    let spec: [(PairKind, &[&str], &[&str]); 12] = [
        (Identical, &["x"], &["x"]),
        (Identical, &["sin(x/eps)"], &["sin(x/eps)"]),
        (NegligiblePerturbed, &["x"], &["x+exp(-1/eps)"]),
        (NegligiblePerturbed, &["sin(x)"], &["sin(x)+exp(-1/eps)*cos(x)"]),
        (NegligiblePerturbed, &["x", "x^2"], &["x+exp(-1/eps)", "x^2"]),
        (EpsSeparated, &["eps*x"], &["eps^2*x^2"]),
        (EpsSeparated, &["x"], &["x+eps"]),
        (EpsSeparated, &["sin(x)"], &["sin(x)+eps*sin(x/eps)"]),
        (EpsSeparated, &["cos(x)", "sin(x)"], &["cos(x)", "sin(x)+eps^2"]),
        (UnitSeparated, &["x"], &["x+1"]),
        (UnitSeparated, &["cos(x)"], &["sin(x)"]),
        (UnitSeparated, &["sin(x/eps)"], &["cos(x/eps)"]),
    ];
    spec.iter().map(|(k, u, v)| Ok((*k, mnet(u)?, mnet(v)?))).collect()
}

pub fn vb_pairs() -> Result<Vec<(PairKind, HomNet, HomNet)>> {
    use PairKind::*;
    let spec = [
        (Identical, ("sin(x)", "2+x"), ("sin(x)", "2+x")),
        (NegligiblePerturbed, ("sin(x)", "2+x"), ("sin(x)", "2+x+exp(-1/eps)")),
        (NegligiblePerturbed, ("x/2", "cos(x/eps)"), ("x/2+exp(-1/eps)", "cos(x/eps)")),
        (EpsSeparated, ("sin(x)", "2+x"), ("sin(x)", "(2+x)*(1+eps)")),
        (EpsSeparated, ("sin(x)", "2+x"), ("sin(x)+eps", "2+x")),
        (UnitSeparated, ("x", "1"), ("x", "x")),
    ];
    spec.iter()
        .map(|(k, (ub, uf), (vb, vf))| Ok((*k, hom(ub, uf)?, hom(vb, vf)?)))
        .collect()
}

pub fn hybrid_pairs() -> Result<Vec<(PairKind, HybridNet, HybridNet)>> {
    use PairKind::*;
    let spec = [
        (Identical, ("sin(x)", "cos(x)"), ("sin(x)", "cos(x)")),
        (NegligiblePerturbed, ("sin(x)", "cos(x)"), ("sin(x)", "cos(x)+exp(-1/eps)")),
        (NegligiblePerturbed, ("x^2", "eps*sin(x/eps)"), ("x^2+exp(-1/eps)", "eps*sin(x/eps)")),
        (EpsSeparated, ("sin(x)", "cos(x)"), ("sin(x)", "cos(x)+eps*x")),
        (EpsSeparated, ("sin(x)", "cos(x)"), ("sin(x)+eps", "cos(x)")),
        (UnitSeparated, ("x", "0"), ("x", "1")),
    ];
    spec.iter()
        .map(|(k, (ub, uf), (vb, vf))| Ok((*k, hybrid(ub, uf)?, hybrid(vb, vf)?)))
        .collect()
}

fn criterion_name(id: usize) -> &'static str {
    id.checked_sub(1).and_then(|i| CRITERIA.get(i)).copied().unwrap_or("unknown")
}

fn outcome(id: usize, passed: bool, summary: String, records: Vec<VerdictRecord>) -> CriterionOutcome {
    CriterionOutcome {
        id,
        name: criterion_name(id).into(),
        passed,
        summary,
        records,
    }
}

fn record(id: usize, nets: &[&str], passed: bool) -> VerdictRecord {
    VerdictRecord::new("suite", criterion_name(id), nets, passed)
}

/// Run one criterion by its 1-based id.
pub fn run_criterion(id: usize, cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    match id {
        1 => estimator_calibration(cfg),
        2 => route_agreement(cfg),
        3 => linear_vs_quadratic(cfg),
        4 => heaviside_powers(cfg),
        5 => delta_square_sensitivity(cfg),
        6 => composition_well_defined(cfg),
        7 => point_value_separation(cfg),
        8 => alignment_hom_u(cfg),
        9 => order_collapse(cfg),
        10 => ppwave_kink(cfg).map(|(o, _)| o),
        _ => Err(crate::error::Error::Config(format!("no criterion {id}"))),
    }
}

/// Criteria in id order; a criterion that errors counts as failed.
pub fn run_suite(ids: &[usize], cfg: &SuiteConfig) -> Vec<CriterionOutcome> {
    ids.iter()
        .map(|&id| {
            run_criterion(id, cfg).unwrap_or_else(|e| {
                let r = record(id, &[], false).detail(e.to_string());
                outcome(id, false, format!("error: {e}"), vec![r])
            })
        })
        .collect()
}

fn estimator_calibration(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let c = cfg.check.clone().with_k_max(0);
    let k = CompactSet::interval(-1.0, 1.0, 5);
    let m_max = c.params.m_max;
    let mut records = Vec::new();
    let mut all = true;
    let mut notes = Vec::new();
    for (expr, want, slope) in [
        ("eps^(-3)", Classification::Moderate { n: 3 }, Some(-3.0)),
        ("eps^2", Classification::Negligible { m: 2 }, Some(2.0)),
        ("exp(-1/eps)", Classification::Negligible { m: m_max }, None),
        ("exp(1/eps)", Classification::Neither, None),
    ] {
        let net = Net::from_exprs(&[expr], &["x"], expr)?;
        let g = classify_net(&net, &k, &c)?;
        let v = &g.verdict;
        let mut ok = v.classification == want;
        if let Some(s) = slope {
            ok &= (v.slope - s).abs() <= 0.1;
        }
        if expr == "eps^2" {
            let s = &g.samples[0];
            ok &= is_negligible(s, &c.grid, 2, &c.params)?.negligible && !is_negligible(s, &c.grid, 3, &c.params)?.negligible;
        }
        all &= ok;
        notes.push(format!("{expr}: {} (slope {:.4})", v.classification, v.slope));
        records.push(record(1, &[expr], ok).compact(&k.id).test("sup").verdict(v));
    }
    Ok(outcome(1, all, notes.join("; "), records))
}

fn route_agreement(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let pairs = manifold_pairs()?;
    let mut records = Vec::new();
    let mut agree = 0;
    for (kind, u, v) in &pairs {
        let r = check_equivalent(u, v, &k, &cfg.check)?;
        let ok = r.routes_agree() && r.equivalent == kind.equivalent();
        agree += ok as usize;
        let detail = format!(
            "{kind:?}: distance={} bank={} chart={}",
            r.distance.equivalent, r.bank.equivalent, r.chart.equivalent
        );
        records.push(
            record(2, &[u.label(), v.label()], ok)
                .compact(&k.id)
                .test("three-routes")
                .verdict(&r.distance.verdict)
                .detail(detail),
        );
    }
    let passed = pairs.len() >= 10 && agree == pairs.len();
    Ok(outcome(2, passed, format!("{agree}/{} pairs with agreeing routes", pairs.len()), records))
}

fn linear_vs_quadratic(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let u = mnet(&["eps*x"])?;
    let v = mnet(&["eps^2*x^2"])?;
    let equiv = check_equivalent(&u, &v, &k, &cfg.check)?;
    let ac = cfg.check.clone().with_grid(cfg.assoc_grid.clone());
    let assoc = check_k_associated(&u, &v, &k, 0, &ac)?;
    let weak = check_associated(
        u.rep(0, 0).expect("chart rep"),
        v.rep(0, 0).expect("chart rep"),
        &density_bank(),
        &cfg.assoc_grid,
        ac.assoc_tol,
    )?;
    let passed = !equiv.equivalent && assoc.associated && weak.associated;
    let records = vec![
        record(3, &[u.label(), v.label()], !equiv.equivalent)
            .compact(&k.id)
            .test("equivalent")
            .verdict(&equiv.distance.verdict)
            .detail(format!("equivalent={}", equiv.equivalent)),
        record(3, &[u.label(), v.label()], assoc.associated)
            .compact(&k.id)
            .test("0-associated")
            .detail(format!("associated={} weak={}", assoc.associated, weak.associated)),
    ];
    Ok(outcome(
        3,
        passed,
        format!("equivalent: {}; 0-associated: {}", equiv.equivalent, assoc.associated),
        records,
    ))
}

fn whole_line() -> BoxDomain {
    BoxDomain::cube(1, -10.0, 10.0)
}

fn heaviside_powers(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let rho = Mollifier::standard();
    let h = embed_distribution(&Distribution::Heaviside, &rho, &whole_line(), 1.0)?;
    let h2 = compose_scalar(&h, "H^2", |y| y * y);
    let bank = density_bank();
    let tol = cfg.check.assoc_tol;
    let r = check_associated(&h2, &h, &bank, &cfg.assoc_grid, tol)?;
    let worst_last = r
        .densities
        .iter()
        .map(|d| d.pairings.last().copied().unwrap_or(f64::NAN).abs())
        .fold(0.0, f64::max);
    let eps = cfg.assoc_grid.smallest();
    let (gap, at) = representative_sup_difference(&h2, &h, eps, -1.0, 1.0, 201)?;
    let half = h.eval(eps, &[at])?[0];
    let not_equal = (gap - 0.25).abs() <= 1e-3 && (half - 0.5).abs() <= 1e-3;
    let passed = r.associated && worst_last < tol && not_equal;
    let records = vec![
        record(4, &["H^2", "H"], r.associated && worst_last < tol)
            .test("weak")
            .param("max_last_pairing", worst_last)
            .detail(format!("associated={}", r.associated)),
        record(4, &["H^2", "H"], not_equal)
            .test("sup-difference")
            .param("gap", gap)
            .param("at", at)
            .param("eps", eps),
    ];
    Ok(outcome(
        4,
        passed,
        format!("associated: {}; max last pairing {worst_last:.2e}; sup gap {gap:.6} at x={at}", r.associated),
        records,
    ))
}

fn delta_square_sensitivity(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let grid = &cfg.assoc_grid;
    let bank = density_bank();
    let tol = cfg.check.assoc_tol;
    let mollifiers = [Mollifier::standard(), Mollifier::weighted()];
    let c: Vec<f64> = mollifiers.iter().map(|m| m.square_integral()).collect();
    let spread = (c[0] - c[1]).abs() / c[0];
    let mut records = vec![record(5, &["rho_1", "rho_2"], spread > 0.05).test("c-spread").param("c1", c[0]).param("c2", c[1])];
    let mut passed = spread > 0.05;
    let mut ds = Vec::new();
    for (m, &ci) in mollifiers.iter().zip(&c) {
        let d = embed_distribution(&Distribution::HalfDelta, m, &whole_line(), 1.0)?;
        let sq = compose_scalar(&d, "d^2", |y| y * y);
        let cand = move |nu: &Density| ci * nu.eval(0.0);
        let r = shadow(&sq, Some(&cand), &bank, grid, tol)?;
        let mut worst = 0.0f64;
        for (e, nu) in r.entries.iter().zip(&bank) {
            let last = e.pairings.last().map(|p| p.1).unwrap_or(f64::NAN);
            let target = cand(nu);
            let err = if target.abs() > 0.0 { (last - target).abs() / target.abs() } else { last.abs() / ci };
            worst = worst.max(err);
        }
        let ok = r.shadow_detected && worst < 1e-2;
        passed &= ok;
        records.push(record(5, &[&format!("d^2[{}]", m.id)], ok).test("shadow").param("c", ci).param("max_rel_err", worst));
        ds.push(d);
    }
    let weak = check_associated(&ds[0], &ds[1], &bank, grid, tol)?;
    let sq = |d: &Net| compose_scalar(d, "d^2", |y| y * y);
    let squares = check_associated(&sq(&ds[0]), &sq(&ds[1]), &bank, grid, tol)?;
    passed &= weak.associated && !squares.associated;
    records.push(record(5, &["d_1", "d_2"], weak.associated).test("associated"));
    records.push(record(5, &["d_1^2", "d_2^2"], !squares.associated).test("squares-separate"));
    Ok(outcome(
        5,
        passed,
        format!(
            "c = ({:.6}, {:.6}), spread {spread:.3}; d1≈d2: {}; d1²≈d2²: {}",
            c[0], c[1], weak.associated, squares.associated
        ),
        records,
    ))
}

const NEG: &str = "exp(-1/eps)";

fn composition_well_defined(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let c = &cfg.check;
    let mut records = Vec::new();
    let mut passed = true;
    let mut counts = [0usize; 3];

    let inner = ["sin(x/eps)", "x/2", "eps*x", "cos(x)+eps", "sin(x)*cos(x/eps)"];
    let outer = ["x^2", "sin(x)", "exp(x)", "x^3-x", "1/(2+x^2)"];
    let w_inner = Net::from_exprs(&[&format!("{NEG}*cos(x)")], &["x"], "n1")?;
    let w_outer = Net::from_exprs(&[&format!("{NEG}*x")], &["x"], "n2")?;
    for (a, b) in inner.iter().zip(outer) {
        let (u, v) = (mnet(&[a])?, mnet(&[b])?);
        let lhs = compose_checked(&u, &v, &k, c)?;
        let rhs = compose_checked(&perturb(&u, &w_inner, 1.0)?, &perturb(&v, &w_outer, 1.0)?, &k, c)?;
        let ok = check_equivalent(&lhs, &rhs, &k, c)?.equivalent;
        passed &= ok;
        counts[0] += ok as usize;
        records.push(record(6, &[u.label(), v.label()], ok).compact(&k.id).test("manifold"));
    }

    let homs = [
        (("sin(x)", "2+x"), ("x^2", "x")),
        (("x/2", "cos(x/eps)"), ("sin(x)", "1+x^2")),
        (("cos(x)", "eps^(-1)"), ("x", "3")),
        (("0.5*x+eps", "x^2"), ("exp(x)", "sin(x)")),
        (("0.5*sin(x/eps)", "1"), ("x^3", "2+cos(x)")),
    ];
    for ((ub, uf), (vb, vf)) in homs {
        let (u, v) = (hom(ub, uf)?, hom(vb, vf)?);
        let up = hom(&format!("{ub}+{NEG}"), &format!("{uf}+{NEG}*x"))?;
        let vp = hom(&format!("{vb}+{NEG}*x"), &format!("{vf}+{NEG}"))?;
        let lhs = compose_homs_checked(&u, &v, &k, c)?;
        let rhs = compose_homs_checked(&up, &vp, &k, c)?;
        let ok = check_vb_equivalent(&lhs, &rhs, &k, c)?.equivalent;
        passed &= ok;
        counts[1] += ok as usize;
        records.push(record(6, &[u.label(), v.label()], ok).compact(&k.id).test("vb"));
    }

    let hybrids = [
        ("x/2", ("x^2", "sin(x)")),
        ("sin(x/eps)", ("x", "cos(x)")),
        ("eps*x", ("sin(x)", "x^2+1")),
        ("cos(x)", ("x^3", "exp(x)")),
        ("x^2-0.5", ("x", "eps*sin(x/eps)")),
    ];
    for (ue, (vb, vf)) in hybrids {
        let u = mnet(&[ue])?;
        let v = hybrid(vb, vf)?;
        let up = perturb(&u, &w_inner, 1.0)?;
        let vp = hybrid(&format!("{vb}+{NEG}"), &format!("{vf}+{NEG}*x"))?;
        let lhs = compose_hybrid_checked(&u, &v, &k, c)?;
        let rhs = compose_hybrid_checked(&up, &vp, &k, c)?;
        let ok = check_hybrid_equivalent(&lhs, &rhs, &k, c)?.equivalent;
        passed &= ok;
        counts[2] += ok as usize;
        records.push(record(6, &[u.label(), v.label()], ok).compact(&k.id).test("hybrid"));
    }
    Ok(outcome(
        6,
        passed,
        format!("well-defined: manifold {}/5, vb {}/5, hybrid {}/5", counts[0], counts[1], counts[2]),
        records,
    ))
}

fn point_value_separation(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let c = &cfg.check;
    let pts = random_points(&k, cfg.random_points, cfg.seed);
    let mut records = Vec::new();
    let mut passed = true;
    let mut n = 0;
    let judge = |kind: PairKind, equal: bool, by: Option<String>, tested: usize| {
        if kind.equivalent() {
            equal && tested == pts.len() + 1
        } else {
            !equal && by.as_deref() == Some("adversarial")
        }
    };
    for (kind, u, v) in manifold_pairs()? {
        let r = check_pointvalue_equality(&u, &v, &k, &pts, c)?;
        let ok = judge(kind, r.equal, r.separated_by.clone(), r.points_tested);
        passed &= ok;
        n += 1;
        records.push(
            record(7, &[u.label(), v.label()], ok)
                .compact(&k.id)
                .test("manifold")
                .detail(format!("{kind:?}: equal={} separated_by={:?}", r.equal, r.separated_by)),
        );
    }
    for (kind, u, v) in hybrid_pairs()? {
        let r = check_hybrid_pointvalue_equality(&u, &v, &k, &pts, c)?;
        let ok = judge(kind, r.equal, r.separated_by.clone(), r.points_tested);
        passed &= ok;
        n += 1;
        records.push(
            record(7, &[u.label(), v.label()], ok)
                .compact(&k.id)
                .test("hybrid")
                .detail(format!("{kind:?}: equal={} separated_by={:?}", r.equal, r.separated_by)),
        );
    }
    Ok(outcome(7, passed, format!("{n} pairs, {} random points each", pts.len()), records))
}

fn coef(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> String {
    format!("({:.6})", rng.gen_range(lo..hi))
}

/// Base evaluations of the aligned net match `u_rep` bit for bit on `K`
/// below the alignment threshold.
fn rebased_exactly(base: &ManifoldNet, u_rep: &ManifoldNet, k: &CompactSet, grid: &EpsGrid, threshold: f64) -> Result<bool> {
    for &e in grid.values().iter().filter(|&&e| e <= threshold) {
        for x in k.points() {
            let p = ManifoldPoint::new(k.chart, x);
            if base.eval_point(e, &p)?.coords != u_rep.eval_point(e, &p)?.coords {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn alignment_hom_u(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let c = &cfg.check;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut records = Vec::new();
    let mut passed = true;
    let mut good = 0;
    for i in 0..cfg.instances {
        let (a, b) = (coef(&mut rng, 0.5, 1.5), coef(&mut rng, -0.5, 0.5));
        let base = format!("{a}*sin(x)+{b}");
        let u_rep = mnet(&[&base])?;
        let fiber = |rng: &mut ChaCha8Rng| format!("{}+{}*cos({}*x)", coef(rng, 1.0, 2.0), coef(rng, -1.0, 1.0), coef(rng, 0.5, 3.0));
        let v1 = hom(&format!("{base}+{}*{NEG}", coef(&mut rng, -1.0, 1.0)), &fiber(&mut rng))?;
        let v2 = hom(&base, &fiber(&mut rng))?;
        let v3 = hom(&format!("{base}+{NEG}*x"), &fiber(&mut rng))?;
        let h = hybrid(&format!("{base}+{NEG}"), &fiber(&mut rng))?;
        let (l, m) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));

        let aligned = align_hom(&v1, &u_rep, &k, None, c)?;
        let exact = rebased_exactly(aligned.net.base(), &u_rep, &k, &c.grid, aligned.threshold)?;
        let still = check_vb_equivalent(&aligned.net, &v1, &k, c)?.equivalent;
        let ah = align_hybrid(&h, &u_rep, &k, None, c)?;
        let exact_h = rebased_exactly(ah.net.base(), &u_rep, &k, &c.grid, ah.threshold)?;
        let still_h = check_hybrid_equivalent(&ah.net, &h, &k, c)?.equivalent;

        let eq = |x: &HomNet, y: &HomNet| -> Result<bool> { Ok(check_vb_equivalent(x, y, &k, c)?.equivalent) };
        let add = |x: &HomNet, y: &HomNet| hom_u_add(x, y, &u_rep, &k, c);
        let scale = |s: f64, x: &HomNet| hom_u_scale(s, x, &u_rep, &k, c);
        let zero = hom_u_zero(v1.source(), v1.target(), &u_rep)?;
        let axioms = [
            ("commutative", eq(&add(&v1, &v2)?, &add(&v2, &v1)?)?),
            ("associative", eq(&add(&add(&v1, &v2)?, &v3)?, &add(&v1, &add(&v2, &v3)?)?)?),
            ("zero", eq(&add(&v1, &zero)?, &scale(1.0, &v1)?)?),
            ("inverse", eq(&add(&v1, &scale(-1.0, &v1)?)?, &zero)?),
            ("unit", eq(&scale(1.0, &v1)?, &v1)?),
            ("compatible", eq(&scale(l, &scale(m, &v1)?)?, &scale(l * m, &v1)?)?),
            ("distributive-vectors", eq(&scale(l, &add(&v1, &v2)?)?, &add(&scale(l, &v1)?, &scale(l, &v2)?)?)?),
            ("distributive-scalars", eq(&scale(l + m, &v1)?, &add(&scale(l, &v1)?, &scale(m, &v1)?)?)?),
        ];
        let axioms_ok = axioms.iter().all(|a| a.1);
        let ok = exact && still && exact_h && still_h && axioms_ok;
        passed &= ok;
        good += ok as usize;
        let failed: Vec<&str> = axioms.iter().filter(|a| !a.1).map(|a| a.0).collect();
        records.push(
            record(8, &[v1.label(), v2.label(), v3.label()], ok)
                .compact(&k.id)
                .test(&format!("instance-{i}"))
                .param("threshold", aligned.threshold)
                .detail(format!(
                    "rebased={exact}/{exact_h} equivalent={still}/{still_h} failed_axioms={failed:?}"
                )),
        );
    }
    Ok(outcome(8, passed, format!("{good}/{} random instances", cfg.instances), records))
}

fn order_collapse(cfg: &SuiteConfig) -> Result<CriterionOutcome> {
    let k = k1();
    let c = &cfg.check;
    let mut records = Vec::new();
    let mut passed = true;
    let mut n = 0;
    for (kind, u, v) in vb_pairs()? {
        let zero = check_vb_equivalent(&u, &v, &k, c)?.equivalent;
        let two = check_vb_equivalent_order(&u, &v, &k, 2, c)?;
        let ok = zero == two && zero == kind.equivalent();
        passed &= ok;
        n += 1;
        records.push(record(9, &[u.label(), v.label()], ok).compact(&k.id).test("vb").detail(format!("order0={zero} order2={two}")));
    }
    for (kind, u, v) in hybrid_pairs()? {
        let zero = check_hybrid_equivalent(&u, &v, &k, c)?.equivalent;
        let two = check_hybrid_equivalent_order(&u, &v, &k, 2, c)?;
        let ok = zero == two && zero == kind.equivalent();
        passed &= ok;
        n += 1;
        records.push(
            record(9, &[u.label(), v.label()], ok)
                .compact(&k.id)
                .test("hybrid")
                .detail(format!("order0={zero} order2={two}")),
        );
    }
    Ok(outcome(9, passed, format!("{n} pairs, order 0 against order 2"), records))
}

/// Kink study on the saddle profile with initial data at rest at `(1, 0)`.
pub fn ppwave_kink(cfg: &SuiteConfig) -> Result<(CriterionOutcome, KinkReport)> {
    let init = GeodesicInit::at_rest(cfg.kink.interval.0, 1.0, 0.0);
    let (r, _) = kink_limit_study(&PPWaveProfile::saddle(), &Mollifier::standard(), &init, &cfg.kink)?;
    let strictly = r.cauchy.windows(2).all(|w| w[1].1 < w[0].1);
    let last = r.cauchy.last().map(|c| c.1).unwrap_or(f64::NAN);
    let routes = r.association.distance.as_ref().is_some_and(|d| d.tends_to_zero) && r.association.bank.1.tends_to_zero;
    let passed = r.cbounded && strictly && last < 1e-3 && r.association.associated && routes && r.jump_stability < 0.01;
    let records = vec![record(10, &["x_eps"], passed)
        .test("kink")
        .param("jump", r.kink.jump())
        .param("jump_stability", r.jump_stability)
        .param("last_cauchy", last)
        .detail(format!(
            "cbounded={} strictly_decreasing={strictly} associated={} routes={routes}",
            r.cbounded, r.association.associated
        ))];
    let summary = format!(
        "c-bounded: {}; last Cauchy {last:.2e}; jump {:.6} (stability {:.1e}); associated: {}",
        r.cbounded,
        r.kink.jump(),
        r.jump_stability,
        r.association.associated
    );
    Ok((outcome(10, passed, summary, records), r))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_sizes() {
        assert!(manifold_pairs().unwrap().len() >= 10);
        let kinds: Vec<PairKind> = manifold_pairs().unwrap().iter().map(|p| p.0).collect();
        for k in [PairKind::Identical, PairKind::NegligiblePerturbed, PairKind::EpsSeparated, PairKind::UnitSeparated] {
            assert!(kinds.contains(&k));
        }
        assert_eq!(vb_pairs().unwrap().len(), 6);
        assert_eq!(hybrid_pairs().unwrap().len(), 6);
    }

    #[test]
    fn unknown_criterion_fails_cleanly() {
        let out = run_suite(&[11], &SuiteConfig::default());
        assert!(!out[0].passed);
        assert!(out[0].summary.starts_with("error"));
    }
}
