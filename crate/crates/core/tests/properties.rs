use proptest::prelude::*;

use canard_kit::classify::Evidence;
use canard_kit::config::{bundled, LoadedModel};
use canard_kit::expr::{Bindings, Expr, Func};
use canard_kit::geom::{area_form, Metric, VectorField};
use canard_kit::report::{analyze, AnalysisReport};

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        Just(Expr::var("x")),
        Just(Expr::var("y")),
        Just(Expr::param("a")),
        (-5i64..=5).prop_map(Expr::int),
        (-9i64..=9, 1i64..=4).prop_map(|(n, d)| Expr::rational(n, d)),
    ]
}

/// Random expression trees that are defined everywhere.
fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(Expr::sum),
            prop::collection::vec(inner.clone(), 2..3).prop_map(Expr::product),
            (inner.clone(), 0i32..4).prop_map(|(b, k)| Expr::pow(b, k)),
            inner.clone().prop_map(Expr::neg),
            inner.clone().prop_map(|e| Expr::func(Func::Sin, e)),
            inner.clone().prop_map(|e| Expr::func(Func::Cos, e)),
            // denominator bounded away from zero
            (inner.clone(), inner).prop_map(|(n, d)| {
                Expr::quotient(n, Expr::sum(vec![Expr::int(2), Expr::pow(d, 2)]))
            }),
        ]
    })
}

fn point() -> impl Strategy<Value = Bindings> {
    (-1.5f64..1.5, -1.5f64..1.5, -1.5f64..1.5).prop_map(|(x, y, a)| Bindings::new().with("a", a).at(x, y))
}

fn field() -> impl Strategy<Value = VectorField> {
    (expr(), expr()).prop_map(|(a, b)| VectorField::new(a, b))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn opt(v: f64) -> impl Strategy<Value = Option<f64>> {
    prop_oneof![1 => Just(None), 1 => Just(Some(0.0)), 6 => (-v..v).prop_map(Some)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn simplify_preserves_value(e in expr(), b in point()) {
        let (u, v) = (e.evaluate(&b).unwrap(), e.simplify().evaluate(&b).unwrap());
        prop_assert!(close(u, v, 1e-9), "{e}: {u} vs {v}");
    }

    #[test]
    fn simplify_is_idempotent(e in expr()) {
        let s = e.simplify();
        prop_assert_eq!(s.simplify(), s);
    }

    #[test]
    fn derivative_is_linear(f in expr(), g in expr(), k in -4i64..=4, b in point()) {
        let lhs = (Expr::int(k) * f.clone() + g.clone()).differentiate("x");
        let rhs = Expr::int(k) * f.differentiate("x") + g.differentiate("x");
        let (u, v) = (lhs.evaluate(&b).unwrap(), rhs.evaluate(&b).unwrap());
        prop_assert!(close(u, v, 1e-9), "{u} vs {v}");
    }

    #[test]
    fn derivative_matches_finite_differences(e in expr(), b in point()) {
        let h = 1e-5;
        for var in ["x", "y", "a"] {
            let at = |d: f64| {
                let mut c = b.clone();
                c.set(var, b.get(var).unwrap() + d);
                e.evaluate(&c).unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            let exact = e.differentiate(var).evaluate(&b).unwrap();
            let scale = 1.0 + at(0.0).abs() + exact.abs();
            prop_assert!((fd - exact).abs() <= 1e-4 * scale, "d/d{var} {e}: {fd} vs {exact}");
        }
    }

    #[test]
    fn area_form_is_bilinear_and_antisymmetric(
        u in field(), v in field(), w in field(), k in -3i64..=3, b in point()
    ) {
        let m = Metric::new(
            Expr::sum(vec![Expr::int(1), Expr::pow(Expr::var("x"), 2)]),
            Expr::rational(1, 4) * Expr::var("x") * Expr::var("y"),
            Expr::sum(vec![Expr::int(1), Expr::pow(Expr::var("y"), 2)]),
        );
        let ev = |e: Expr| e.evaluate(&b).unwrap();
        let uv = ev(area_form(&u, &v, &m));
        prop_assert!(close(uv, -ev(area_form(&v, &u, &m)), 1e-9));
        prop_assert!(ev(area_form(&u, &u, &m)).abs() <= 1e-9 * (1.0 + uv.abs()));
        let kc = Expr::int(k);
        let combo = u.scale(&kc).add(&w);
        let lhs = ev(area_form(&combo, &v, &m));
        let rhs = k as f64 * uv + ev(area_form(&w, &v, &m));
        prop_assert!(close(lhs, rhs, 1e-8), "{lhs} vs {rhs}");
    }

    #[test]
    fn decide_is_deterministic_and_scale_free(
        zf in opt(1.0).prop_map(|v| v.unwrap_or(0.0)),
        z2f in opt(2.0), g in opt(2.0), vg in opt(2.0), v2g in opt(2.0), sigma in opt(2.0),
        a in opt(2.0), scale in 1.0f64..50.0,
    ) {
        let e = Evidence { zf, z2f, g, vg, v2g, sigma, a, ..Evidence::default() };
        let k = e.decide(1e-8);
        prop_assert_eq!(k, e.decide(1e-8));
        // the tree only reads signs, so a common positive rescaling cannot change it
        let s = |v: Option<f64>| v.map(|v| v * scale);
        let scaled = Evidence { zf: zf * scale, z2f: s(z2f), g: s(g), vg: s(vg), v2g: s(v2g), sigma: s(sigma), a: s(a), ..e };
        prop_assert_eq!(scaled.decide(1e-8 * scale), k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn analysis_report_round_trips(lambda in -0.5f64..0.5, gx in -0.3f64..0.3, gy in -0.3f64..0.3) {
        let l = LoadedModel::from_toml(bundled::VAN_DER_POL, &[("lambda".into(), lambda)]).unwrap();
        let r = analyze(&l, Some((gx, gy))).unwrap();
        let back = AnalysisReport::from_json(&r.to_json()).unwrap();
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(back.to_json(), r.to_json());
    }
}
