use pharmonic::expr::{parse_expression, random_expression, Expr};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn printed_expressions_reparse(seed in any::<u64>(), depth in 0usize..7, dim in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = random_expression(&mut rng, depth, dim);
        let text = e.to_string();
        let back = parse_expression(&text).unwrap();
        prop_assert_eq!(&back, &e, "{}", text);
        prop_assert!(e.arity() <= dim);
    }

    #[test]
    fn evaluation_matches_tree(a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let e = parse_expression("x1*x2 - x1/(1 + x2^2) + sin(x1)^2").unwrap();
        let want = a * b - a / (1.0 + b * b) + a.sin().powf(2.0);
        prop_assert!((e.eval(&[a, b]) - want).abs() <= 1e-12 * (1.0 + want.abs()));
    }

    #[test]
    fn garbage_never_panics(s in "[-+*/^()a-z0-9. ]{0,24}") {
        let _ = parse_expression(&s);
    }
}

#[test]
fn negative_literal_prints_in_parentheses() {
    let e = Expr::Num(-2.5);
    assert_eq!(e.to_string(), "(-2.5)");
}
