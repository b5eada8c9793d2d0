//! One driver per subcommand. Each check becomes a printed line and a
//! verdict record; checks run on the rayon pool and are collected in
//! configuration order.

use std::fs;
use std::path::Path;

use rayon::prelude::*;

use colombeau_core::association::{
    check_associated, check_associated_zero, check_k_associated, compose_scalar, shadow,
};
use colombeau_core::asymptotics::{write_fit_csv, EpsGrid};
use colombeau_core::bundle_maps::{
    check_hybrid_equivalent, check_hybrid_pointvalue_equality, check_vb_equivalent, VbEquivalenceReport,
};
use colombeau_core::geometry::bank::{density_bank, Density};
use colombeau_core::impulsive_wave::{kink_limit_study, write_trajectories, GeodesicInit, KinkStudyConfig, PPWaveProfile};
use colombeau_core::manifold_maps::{
    check_equivalent, check_pointvalue_equality, classify_net, random_points, CheckConfig, ManifoldNet,
};
use colombeau_core::net::Net;
use colombeau_core::records::VerdictRecord;
use colombeau_core::suite::{run_suite, SuiteConfig};

use crate::config::{mollifier, AssociateSpec, ConfigError, PairSpec, Registry, RunConfig};

/// Relative tolerance on shadow limits against a candidate.
const SHADOW_REL_TOL: f64 = 1e-2;

pub struct Outcome {
    pub line: String,
    pub passed: bool,
    pub records: Vec<VerdictRecord>,
}

impl Outcome {
    fn single(line: String, record: VerdictRecord) -> Self {
        Outcome {
            line,
            passed: record.passed,
            records: vec![record],
        }
    }
}

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e.to_string())
    }
}

impl From<colombeau_core::Error> for RunError {
    fn from(e: colombeau_core::Error) -> Self {
        RunError::Config(ConfigError::Parse(e.to_string()))
    }
}

/// Inputs shared by the per-check drivers.
pub struct Run<'a> {
    pub cfg: &'a RunConfig,
    pub reg: &'a Registry,
    pub check: CheckConfig,
    pub out: &'a Path,
}

type Checked = Result<Outcome, RunError>;

fn write_file(path: &Path, bytes: Vec<u8>) -> Result<(), RunError> {
    fs::write(path, bytes).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))
}

fn yes_no(b: bool, yes: &str, no: &str) -> String {
    if b { yes.into() } else { no.into() }
}

/// Passed when the verdict matches the expectation, or when none was given.
fn against(expect: Option<bool>, got: bool) -> bool {
    expect.is_none_or(|e| e == got)
}

fn failed(command: &str, check: &str, nets: &[&str], e: impl std::fmt::Display) -> Outcome {
    Outcome::single(
        format!("{}: error: {e}", nets.join(" ~ ")),
        VerdictRecord::new(command, check, nets, false).detail(format!("error: {e}")),
    )
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn collect<T: Sync>(items: &[T], f: impl Fn(&T) -> Checked + Sync + Send) -> Result<Vec<Outcome>, RunError> {
    items.par_iter().map(f).collect()
}

pub fn classify(cx: &Run) -> Result<Vec<Outcome>, RunError> {
    let fits = cx.out.join("fits");
    fs::create_dir_all(&fits)?;
    let grid = cx.check.grid.clone();
    collect(&cx.cfg.classify, |c| {
        let (net, _) = cx.reg.net(&c.net)?;
        let k = cx.reg.compact(&c.compact)?;
        let g = match classify_net(net, k, &cx.check) {
            Ok(g) => g,
            Err(e) => return Ok(failed("classify", "growth", &[&c.net], e)),
        };
        for (order, (v, s)) in g.per_order.iter().zip(&g.samples).enumerate() {
            let path = fits.join(format!("{}_d{order}.csv", file_stem(&c.net)));
            let mut buf = Vec::new();
            write_fit_csv(&mut buf, &grid, s, v)?;
            write_file(&path, buf)?;
        }
        let class = g.verdict.classification.to_string();
        let passed = c.expect.as_ref().is_none_or(|e| *e == class);
        let expect = c.expect.as_ref().map(|e| format!(" (expected {e})")).unwrap_or_default();
        Ok(Outcome::single(
            format!("{} on {}: {class}; slope {:.3}{expect}", c.net, k.id, g.verdict.slope),
            VerdictRecord::new("classify", "growth", &[&c.net], passed)
                .compact(&k.id)
                .verdict(&g.verdict)
                .param("orders", g.per_order.len() as f64),
        ))
    })
}

pub fn equiv(cx: &Run) -> Result<Vec<Outcome>, RunError> {
    let assoc = cx.check.clone();
    collect(&cx.cfg.equiv, |p| {
        let ((_, u), (_, v)) = (cx.reg.net(&p.u)?, cx.reg.net(&p.v)?);
        let k = cx.reg.compact(&p.compact)?;
        let nets = [p.u.as_str(), p.v.as_str()];
        let r = match check_equivalent(u, v, k, &cx.check) {
            Ok(r) => r,
            Err(e) => return Ok(failed("equiv", "equivalence", &nets, e)),
        };
        let a = match check_k_associated(u, v, k, 0, &assoc) {
            Ok(a) => a.associated,
            Err(e) => return Ok(failed("equiv", "association", &nets, e)),
        };
        let passed = r.routes_agree() && against(p.expect, r.equivalent);
        let verdict = r.distance.verdict.clone();
        Ok(Outcome::single(
            format!(
                "{} ~ {} on {}: {}; 0-associated: {a}",
                p.u,
                p.v,
                k.id,
                yes_no(r.equivalent, "equivalent", "not equivalent")
            ),
            VerdictRecord::new("equiv", "equivalence", &nets, passed)
                .compact(&k.id)
                .test("distance")
                .verdict(&verdict)
                .detail(format!(
                    "equivalent={} distance={} bank={} chart={} associated0={a}",
                    r.equivalent, r.distance.equivalent, r.bank.equivalent, r.chart.equivalent
                )),
        ))
    })
}

fn bundle_pairs<F>(command: &str, pairs: &[PairSpec], cx: &Run, run: F) -> Result<Vec<Outcome>, RunError>
where
    F: Fn(&PairSpec) -> Result<colombeau_core::Result<VbEquivalenceReport>, RunError> + Sync + Send,
{
    collect(pairs, |p| {
        let k = cx.reg.compact(&p.compact)?;
        let nets = [p.u.as_str(), p.v.as_str()];
        let r = match run(p)? {
            Ok(r) => r,
            Err(e) => return Ok(failed(command, "equivalence", &nets, e)),
        };
        let passed = against(p.expect, r.equivalent);
        Ok(Outcome::single(
            format!(
                "{} ~ {} on {}: {}",
                p.u,
                p.v,
                k.id,
                yes_no(r.equivalent, "equivalent", "not equivalent")
            ),
            VerdictRecord::new(command, "equivalence", &nets, passed)
                .compact(&k.id)
                .test("fiber-chart")
                .verdict(&r.fiber_chart.verdict)
                .detail(format!(
                    "equivalent={} base={} fiber_chart={} fiber_bank={} vacuous={}",
                    r.equivalent, r.base.equivalent, r.fiber_chart.equivalent, r.fiber_bank.equivalent, r.fiber_vacuous
                )),
        ))
    })
}

pub fn vb_equiv(cx: &Run) -> Result<Vec<Outcome>, RunError> {
    bundle_pairs("vb-equiv", &cx.cfg.vb_equiv, cx, |p| {
        let (u, v) = (cx.reg.hom(&p.u)?, cx.reg.hom(&p.v)?);
        Ok(check_vb_equivalent(u, v, cx.reg.compact(&p.compact)?, &cx.check))
    })
}

pub fn hybrid_equiv(cx: &Run) -> Result<Vec<Outcome>, RunError> {
    bundle_pairs("hybrid-equiv", &cx.cfg.hybrid_equiv, cx, |p| {
        let (u, v) = (cx.reg.hybrid(&p.u)?, cx.reg.hybrid(&p.v)?);
        Ok(check_hybrid_equivalent(u, v, cx.reg.compact(&p.compact)?, &cx.check))
    })
}

pub fn pointvals(cx: &Run) -> Result<Vec<Outcome>, RunError> {
    collect(&cx.cfg.pointvals, |p| {
        let k = cx.reg.compact(&p.compact)?;
        let pts = random_points(k, p.points, cx.cfg.seed);
        let nets = [p.u.as_str(), p.v.as_str()];
        let r = match p.kind.as_str() {
            "manifold" => check_pointvalue_equality(&cx.reg.net(&p.u)?.1, &cx.reg.net(&p.v)?.1, k, &pts, &cx.check),
            "hybrid" => check_hybrid_pointvalue_equality(cx.reg.hybrid(&p.u)?, cx.reg.hybrid(&p.v)?, k, &pts, &cx.check),
            other => return Err(ConfigError::Parse(format!("unknown point-value kind `{other}`")).into()),
        };
        let r = match r {
            Ok(r) => r,
            Err(e) => return Ok(failed("pointvals", "point-values", &nets, e)),
        };
        let passed = against(p.expect, r.equal);
        let by = r.separated_by.clone().unwrap_or_default();
        Ok(Outcome::single(
            format!(
                "{} vs {} ({}): {} over {} points{}",
                p.u,
                p.v,
                p.kind,
                yes_no(r.equal, "equal", "separated"),
                r.points_tested,
                if by.is_empty() { String::new() } else { format!(" (by {by})") }
            ),
            VerdictRecord::new("pointvals", "point-values", &nets, passed)
                .compact(&k.id)
                .test(&p.kind)
                .param("points", r.points_tested as f64)
                .param("seed", cx.cfg.seed as f64)
                .detail(format!("equal={} separated_by={by}", r.equal)),
        ))
    })
}

fn powered(net: &Net, p: Option<i32>) -> Net {
    match p {
        None | Some(1) => net.clone(),
        Some(p) => compose_scalar(net, &format!("pow{p}"), move |y| y.powi(p)),
    }
}

fn delta_weight(a: &AssociateSpec) -> Result<Option<f64>, ConfigError> {
    match &a.delta_weight {
        None => Ok(None),
        Some(toml::Value::Float(c)) => Ok(Some(*c)),
        Some(toml::Value::Integer(c)) => Ok(Some(*c as f64)),
        Some(toml::Value::String(s)) if s == "square_integral" => {
            Ok(Some(mollifier(a.mollifier.as_deref().unwrap_or("standard"))?.square_integral()))
        }
        Some(other) => Err(ConfigError::Parse(format!("delta_weight must be a number or \"square_integral\", got {other}"))),
    }
}

pub fn associate(cx: &Run, grid: &EpsGrid) -> Result<Vec<Outcome>, RunError> {
    let shadows = cx.out.join("shadows");
    if cx.cfg.associate.iter().any(|a| a.mode == "shadow") {
        fs::create_dir_all(&shadows)?;
    }
    let bank = density_bank();
    collect(&cx.cfg.associate, |a| {
        let tol = a.tol.unwrap_or(cx.check.assoc_tol);
        let zero = "0".to_string();
        let v_label = a.v.as_ref().unwrap_or(&zero);
        let nets = [a.u.as_str(), v_label.as_str()];
        let power = a.power.map(|p| format!("^{p}")).unwrap_or_default();
        let v_power = a.v_power.or(a.power).map(|p| format!("^{p}")).unwrap_or_default();
        match a.mode.as_str() {
            "weak" => {
                let u = powered(&cx.reg.net(&a.u)?.0, a.power);
                let r = match &a.v {
                    None => check_associated_zero(&u, &bank, grid, tol),
                    Some(v) => check_associated(&u, &powered(&cx.reg.net(v)?.0, a.v_power.or(a.power)), &bank, grid, tol),
                };
                let r = match r {
                    Ok(r) => r,
                    Err(e) => return Ok(failed("associate", "weak", &nets, e)),
                };
                let worst = r.densities.iter().map(|d| d.trend.last.abs()).fold(0.0, f64::max);
                Ok(Outcome::single(
                    format!(
                        "{}{power} ≈ {v_label}{v_power}: {} (worst final pairing {worst:.3e})",
                        a.u,
                        yes_no(r.associated, "associated", "not associated")
                    ),
                    VerdictRecord::new("associate", "weak", &nets, against(a.expect, r.associated))
                        .test("density-bank")
                        .param("worst_final_pairing", worst)
                        .param("power", a.power.unwrap_or(1) as f64)
                        .param("tol", tol)
                        .detail(format!("associated={} borderline={}", r.associated, r.borderline)),
                ))
            }
            "k" => {
                if a.power.is_some() || a.v_power.is_some() {
                    return Err(ConfigError::Parse("power applies to weak and shadow association only".into()).into());
                }
                let u = &cx.reg.net(&a.u)?.1;
                let zero_net;
                let v = match &a.v {
                    Some(v) => &cx.reg.net(v)?.1,
                    None => {
                        let vars: Vec<String> = (0..u.source().dim()).map(|i| format!("x{i}")).collect();
                        let vars: Vec<&str> = vars.iter().map(String::as_str).collect();
                        let zeros = vec!["0"; u.target().dim()];
                        zero_net = ManifoldNet::from_exprs(&zeros, &vars, "0")?;
                        &zero_net
                    }
                };
                let k = cx.reg.compact(&a.compact)?;
                let mut check = cx.check.clone();
                check.assoc_tol = tol;
                let r = match check_k_associated(u, v, k, a.k, &check) {
                    Ok(r) => r,
                    Err(e) => return Ok(failed("associate", "k-association", &nets, e)),
                };
                Ok(Outcome::single(
                    format!(
                        "{} ≈_{} {v_label} on {}: {} (worst test {})",
                        a.u,
                        a.k,
                        k.id,
                        yes_no(r.associated, "associated", "not associated"),
                        r.bank.0
                    ),
                    VerdictRecord::new("associate", "k-association", &nets, against(a.expect, r.associated))
                        .compact(&k.id)
                        .test(&r.bank.0)
                        .param("order", a.k as f64)
                        .param("final_bank_sup", r.bank.1.last)
                        .detail(format!(
                            "associated={} distance={}",
                            r.associated,
                            r.distance.as_ref().map(|d| d.tends_to_zero.to_string()).unwrap_or_else(|| "n/a".into())
                        )),
                ))
            }
            "shadow" => {
                let u = powered(&cx.reg.net(&a.u)?.0, a.power);
                let c = delta_weight(a)?;
                let cand = c.map(|c| move |nu: &Density| c * nu.eval(0.0));
                let cand_ref = cand.as_ref().map(|f| f as &(dyn Fn(&Density) -> f64 + Sync));
                let r = match shadow(&u, cand_ref, &bank, grid, tol) {
                    Ok(r) => r,
                    Err(e) => return Ok(failed("associate", "shadow", &nets, e)),
                };
                let path = shadows.join(format!("{}{}.csv", file_stem(&a.u), file_stem(&power)));
                let mut buf = Vec::new();
                r.write_csv(&mut buf)?;
                write_file(&path, buf)?;
                let scale = c.map(f64::abs).unwrap_or(1.0).max(f64::MIN_POSITIVE);
                let worst = r
                    .entries
                    .iter()
                    .filter_map(|e| Some(e.residual? / e.candidate?.abs().max(scale)))
                    .fold(0.0, f64::max);
                let matches = r.shadow_detected && (c.is_none() || worst < SHADOW_REL_TOL);
                let target = c.map(|c| format!("{c:.6}·δ")).unwrap_or_else(|| "limit".into());
                Ok(Outcome::single(
                    format!(
                        "{}{power} → {target}: {} (worst relative residual {worst:.2e})",
                        a.u,
                        yes_no(matches, "shadow found", "no shadow")
                    ),
                    VerdictRecord::new("associate", "shadow", &[&a.u], against(a.expect, matches))
                        .test("density-bank")
                        .param("delta_weight", c.unwrap_or(f64::NAN))
                        .param("worst_relative_residual", worst)
                        .detail(format!("detected={} matches={matches}", r.shadow_detected)),
                ))
            }
            other => Err(ConfigError::Parse(format!("unknown association mode `{other}`")).into()),
        }
    })
}

fn kink_config(cfg: &RunConfig) -> Result<KinkStudyConfig, RunError> {
    let p = &cfg.ppwave;
    Ok(KinkStudyConfig {
        grid: EpsGrid::dyadic(p.eps_exponents[0], p.eps_exponents[1])?,
        interval: (p.interval[0], p.interval[1]),
        assoc_tol: p.assoc_tol,
        samples: p.samples,
    })
}

pub fn ppwave(cfg: &RunConfig, out: &Path) -> Result<Vec<Outcome>, RunError> {
    let p = &cfg.ppwave;
    let profile = PPWaveProfile::new(&p.profile).map_err(|e| ConfigError::Parse(format!("ppwave profile: {e}")))?;
    let rho = mollifier(&p.mollifier)?;
    let study = kink_config(cfg)?;
    let init = GeodesicInit::at_rest(p.interval[0], p.x0, p.y0);
    let nets = ["x_eps"];
    let (r, net) = match kink_limit_study(&profile, &rho, &init, &study) {
        Ok(r) => r,
        Err(e) => return Ok(vec![failed("ppwave", "kink", &nets, e)]),
    };
    let mut traj = Vec::new();
    write_trajectories(&net.solve_all(&study.grid)?, &mut traj)?;
    write_file(&out.join("trajectories.csv"), traj)?;
    write_file(&out.join("kink_report.txt"), r.to_text().into_bytes())?;
    let passed = r.cbounded && r.cauchy_decreasing && r.association.associated;
    let line = format!(
        "x_eps on [{}, {}]: c-bounded: {}; Cauchy decreasing: {}; velocity jump {:.6}; 0-associated with kink: {}",
        p.interval[0],
        p.interval[1],
        r.cbounded,
        r.cauchy_decreasing,
        r.kink.jump(),
        r.association.associated
    );
    let record = VerdictRecord::new("ppwave", "kink", &nets, passed)
        .test(&p.profile)
        .param("jump", r.kink.jump())
        .param("value_at_break", r.kink.value_at_break)
        .param("jump_stability", r.jump_stability)
        .param("max_norm_drift", r.max_norm_drift)
        .detail(format!(
            "cbounded={} cauchy_decreasing={} associated={} vdot_unbounded={}",
            r.cbounded, r.cauchy_decreasing, r.association.associated, r.vdot_unbounded
        ));
    Ok(vec![Outcome::single(line, record)])
}

pub fn suite(cfg: &RunConfig, check: CheckConfig) -> Result<Vec<Outcome>, RunError> {
    let sc = SuiteConfig {
        check,
        assoc_grid: cfg.assoc_grid()?,
        kink: kink_config(cfg)?,
        random_points: cfg.suite.random_points,
        instances: cfg.suite.instances,
        seed: cfg.seed,
    };
    let outcomes: Vec<_> = cfg.suite.criteria.par_iter().flat_map_iter(|&id| run_suite(&[id], &sc)).collect();
    Ok(outcomes
        .into_iter()
        .map(|o| Outcome {
            line: format!("{} {} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.id, o.name, o.summary),
            passed: o.passed,
            records: o.records,
        })
        .collect())
}
