use curvatur::catalog::{parse_expr, parse_geometry, BinOp, Expr, Func};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0u32..1000).prop_map(|n| Expr::Num(n as f64)),
        (0.0f64..1e6).prop_map(Expr::Num),
        (1e-300f64..1e300).prop_map(Expr::Num),
        prop::sample::select(vec!["u", "v", "t", "x_1", "alpha"]).prop_map(Expr::var),
    ]
}

fn expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(6, 64, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (prop::sample::select(Func::ALL.to_vec()), inner.clone()).prop_map(|(f, e)| Expr::call(f, e)),
            (
                prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Pow]),
                inner.clone(),
                inner
            )
                .prop_map(|(op, a, b)| Expr::bin(op, a, b)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_expressions_parse_back(e in expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse_expr(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn geometry_sources_round_trip(e in expr()) {
        let src = format!("curve c (t in [0,1]) = (t, {})", e.to_string().replace(['u', 'v'], "t").replace("alpha", "t").replace("x_1", "t"));
        if let Ok(spec) = parse_geometry(&src) {
            prop_assert_eq!(parse_geometry(&spec.to_source()).unwrap(), spec);
        }
    }
}
