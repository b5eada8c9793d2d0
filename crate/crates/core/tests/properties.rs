use colombeau_core::association::check_k_associated;
use colombeau_core::asymptotics::{estimate_growth_order, upper_envelope, AsymptoticParams, Classification, EpsGrid};
use colombeau_core::geometry::atlas::Atlas;
use colombeau_core::geometry::compact::CompactSet;
use colombeau_core::impulsive_wave::Kink;
use colombeau_core::manifold_maps::{
    check_cbounded, check_equivalent, check_pointvalue_equality, random_points, CheckConfig, ManifoldNet,
};
use colombeau_core::net::{BoxDomain, Net};
use colombeau_core::records::{read_jsonl, write_jsonl, VerdictRecord};
use proptest::prelude::*;

fn k1() -> CompactSet {
    CompactSet::interval(-1.0, 1.0, 17)
}

fn cfg() -> CheckConfig {
    CheckConfig::default().with_k_max(1)
}

fn num(v: f64) -> String {
    format!("({v})")
}

fn pair(a: f64, b: f64, d: f64, gap: usize) -> (ManifoldNet, ManifoldNet, bool) {
    let base = format!("{}*sin(x)+{}", num(a), num(b));
    let (term, equivalent) = match gap {
        0 => ("exp(-1/eps)*cos(x)", true),
        1 => ("eps*x", false),
        2 => ("eps^2", false),
        _ => ("1", false),
    };
    let u = ManifoldNet::from_exprs(&[&base], &["x"], "u").unwrap();
    let v = ManifoldNet::from_exprs(&[&format!("{base}+{}*{term}", num(d))], &["x"], "v").unwrap();
    (u, v, equivalent)
}

fn expected(s: f64, p: &AsymptoticParams) -> Classification {
    if s >= p.m_min {
        Classification::Negligible {
            m: ((s + p.fit_tolerance).floor() as u32).min(p.m_max),
        }
    } else {
        Classification::Moderate {
            n: (-s - p.fit_tolerance).ceil().max(0.0) as u32,
        }
    }
}

proptest! {
    #[test]
    fn power_laws_are_recovered(s in -10.0f64..7.5, c in 1e-3f64..1e3) {
        let g = EpsGrid::default();
        let p = AsymptoticParams::default();
        let samples: Vec<f64> = g.values().iter().map(|e| c * e.powf(s)).collect();
        let v = estimate_growth_order(&samples, &g, &p).unwrap();
        prop_assert!((v.slope - s).abs() < 1e-6);
        prop_assert_eq!(v.classification, expected(s, &p));
    }

    #[test]
    fn envelope_is_monotone_and_idempotent(xs in prop::collection::vec(0.0f64..1e6, 6..40)) {
        let env = upper_envelope(&xs);
        prop_assert!(env.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(env.iter().zip(&xs).all(|(e, x)| e >= x));
        prop_assert_eq!(upper_envelope(&env), env);
    }

    #[test]
    fn jets_follow_the_chain_rule(x in -2.0f64..2.0, a in -3.0f64..3.0) {
        let net = Net::from_exprs(&[&format!("exp({}*sin(x))", num(a))], &["x"], "f").unwrap();
        let j = &net.jets(0.1, &[x], 2).unwrap()[0];
        let f = (a * x.sin()).exp();
        let d1 = a * x.cos() * f;
        let d2 = (-a * x.sin() + (a * x.cos()).powi(2)) * f;
        prop_assert!((j.value() - f).abs() <= 1e-12 * f.abs().max(1.0));
        prop_assert!((j.derivative(&[1]) - d1).abs() <= 1e-11 * f.abs().max(1.0));
        prop_assert!((j.derivative(&[2]) - d2).abs() <= 1e-10 * f.abs().max(1.0));
    }

    #[test]
    fn kink_fit_recovers_exact_kinks(v in -2.0f64..2.0, l in -3.0f64..3.0, r in -3.0f64..3.0) {
        let k = Kink { value_at_break: v, slope_before: l, slope_after: r };
        let samples: Vec<(f64, f64)> = (0..=40).map(|i| -1.0 + 0.05 * i as f64).map(|u| (u, k.eval(u))).collect();
        let fit = Kink::fit(&samples).unwrap();
        prop_assert!((fit.value_at_break - v).abs() < 1e-10);
        prop_assert!((fit.jump() - (r - l)).abs() < 1e-10);
    }

    #[test]
    fn records_round_trip(cmd in "[a-z-]{1,12}", detail in "[ -~]{0,40}", slope in -20.0f64..20.0, passed: bool) {
        let r = VerdictRecord::new(&cmd, "check", &["u", "v,w"], passed).detail(detail).param("slope", slope);
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&r)).unwrap();
        prop_assert_eq!(read_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap(), vec![r]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn routes_agree_and_match_the_construction(a in 0.5f64..2.0, b in -1.0f64..1.0, d in 0.2f64..2.0, gap in 0usize..4) {
        let (u, v, equivalent) = pair(a, b, d, gap);
        let r = check_equivalent(&u, &v, &k1(), &cfg()).unwrap();
        prop_assert!(r.routes_agree());
        prop_assert_eq!(r.equivalent, equivalent);
    }

    #[test]
    fn equivalence_implies_association(a in 0.5f64..2.0, b in -1.0f64..1.0, d in 0.2f64..2.0, gap in 0usize..4) {
        let (u, v, _) = pair(a, b, d, gap);
        let c = cfg().with_grid(EpsGrid::dyadic(2, 14).unwrap());
        if check_equivalent(&u, &v, &k1(), &c).unwrap().equivalent {
            prop_assert!(check_k_associated(&u, &v, &k1(), 0, &c).unwrap().associated);
        }
    }

    #[test]
    fn equivalence_implies_equal_point_values(a in 0.5f64..2.0, b in -1.0f64..1.0, d in 0.2f64..2.0, gap in 0usize..4, seed: u64) {
        let (u, v, _) = pair(a, b, d, gap);
        let c = cfg();
        let pts = random_points(&k1(), 4, seed);
        let equivalent = check_equivalent(&u, &v, &k1(), &c).unwrap().equivalent;
        let pv = check_pointvalue_equality(&u, &v, &k1(), &pts, &c).unwrap();
        prop_assert_eq!(pv.equal, equivalent);
    }

    #[test]
    fn verdicts_do_not_depend_on_the_metric(a in 0.5f64..2.0, b in -1.0f64..1.0, d in 0.2f64..2.0, gap in 0usize..4) {
        let (u, v, _) = pair(a, b, d, gap);
        let mut curved = Atlas::new(1);
        let chart = curved.add_chart("line", BoxDomain::whole(1));
        curved.set_metric(chart, &["4+x^2"]).unwrap();
        let recast = |w: &ManifoldNet| {
            ManifoldNet::new(w.label(), Atlas::euclidean(1), curved.clone())
                .with_rep(0, chart, w.rep(0, 0).unwrap().clone())
                .unwrap()
        };
        let flat = check_equivalent(&u, &v, &k1(), &cfg()).unwrap().equivalent;
        let bent = check_equivalent(&recast(&u), &recast(&v), &k1(), &cfg()).unwrap().equivalent;
        prop_assert_eq!(flat, bent);
    }

    #[test]
    fn cbounded_nets_have_bounded_compositions(a in 0.2f64..3.0, p in 0usize..3) {
        let e = match p {
            0 => format!("{}*sin(x/eps)", num(a)),
            1 => format!("{}*x*cos(x/eps^2)", num(a)),
            _ => format!("{}+eps*x", num(a)),
        };
        let r = check_cbounded(&ManifoldNet::from_exprs(&[&e], &["x"], &e).unwrap(), &k1(), &cfg()).unwrap();
        prop_assert!(r.cbounded);
        prop_assert!(r.smooth_tests_order0 && r.compact_tests_bounded);
        let escaping = format!("{}/eps", num(a));
        let r = check_cbounded(&ManifoldNet::from_exprs(&[&escaping], &["x"], "e").unwrap(), &k1(), &cfg()).unwrap();
        prop_assert!(!r.cbounded && !r.smooth_tests_order0 && r.compact_tests_bounded);
    }
}
