//! Property tests: codec round-trips, canonicalization invariance, fuzzer
//! skeleton preservation, and generation determinism.

use proptest::prelude::*;

use ccfg::fuzzer;
use ccfg::generator::{self, mode_upper, Limits, SampleMode};
use ccfg::grammar::{
    canonicalize, format_constraint, format_production, parse_constraint, parse_production,
    BinOpKind, Comparator, Constraint, CounterArg, Expr, LhsKind, Production, SeparatorKind,
    Symbol,
};
use ccfg::seed;
use ccfg::validator::parse_testcase;

fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9]{0,3}".prop_filter("reserved subscripts", |s| s != "i" && s != "s" && s != "n")
}

fn nt_name() -> impl Strategy<Value = String> {
    "[A-Z][A-Za-z0-9]{0,3}"
}

fn expr(depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0i128..=1_000_000).prop_map(Expr::IntConst),
        (2i128..=10, 0u32..=9).prop_map(|(base, exponent)| Expr::Power { base, exponent }),
        (ident(), any::<bool>()).prop_map(|(name, indexed)| Expr::Var { name, indexed }),
    ];
    leaf.prop_recursive(depth, 16, 2, |inner| {
        (
            prop_oneof![
                Just(BinOpKind::Add),
                Just(BinOpKind::Sub),
                Just(BinOpKind::Mul)
            ],
            inner.clone(),
            inner,
        )
            .prop_map(|(op, left, right)| Expr::BinOp {
                op,
                left: Box::new(left),
                right: Box::new(right),
            })
    })
}

fn comparator() -> impl Strategy<Value = Comparator> {
    prop_oneof![
        Just(Comparator::Le),
        Just(Comparator::Lt),
        Just(Comparator::Ge),
        Just(Comparator::Gt),
        Just(Comparator::Eq),
    ]
}

fn constraint() -> impl Strategy<Value = Constraint> {
    (
        proptest::collection::vec(expr(2), 2..=4),
        proptest::collection::vec(comparator(), 3),
    )
        .prop_map(|(operands, mut ops)| {
            ops.truncate(operands.len() - 1);
            Constraint { operands, ops }
        })
}

fn rhs_symbol() -> impl Strategy<Value = Symbol> {
    prop_oneof![
        Just(Symbol::Separator(SeparatorKind::Space)),
        Just(Symbol::Separator(SeparatorKind::Newline)),
        (ident(), any::<bool>()).prop_map(|(name, indexed)| Symbol::Variable { name, indexed }),
        "[+*#?!=]{1,2}".prop_map(Symbol::Terminal),
        (
            nt_name(),
            prop_oneof![
                Just(None),
                Just(Some(CounterArg::Same)),
                Just(Some(CounterArg::Decrement)),
                (1u64..=9).prop_map(|v| Some(CounterArg::Const(v))),
                ident().prop_map(|v| Some(CounterArg::VarRef(v))),
            ]
        )
            .prop_map(|(name, arg)| Symbol::NonterminalRef { name, arg }),
    ]
}

fn production() -> impl Strategy<Value = Production> {
    (
        nt_name(),
        prop_oneof![
            Just(LhsKind::Plain),
            Just(LhsKind::CounterParam),
            (1u64..=9).prop_map(LhsKind::Base),
        ],
        proptest::collection::vec(rhs_symbol(), 1..=6),
    )
        .prop_map(|(lhs_name, lhs_kind, rhs)| Production {
            lhs_name,
            lhs_kind,
            rhs,
        })
}

proptest! {
    #[test]
    fn production_codec_round_trips(p in production()) {
        let line = format_production(&p);
        let back = parse_production(&line).expect("formatted production parses");
        prop_assert_eq!(back, p);
    }

    #[test]
    fn constraint_codec_round_trips(c in constraint()) {
        let line = format_constraint(&c);
        let back = parse_constraint(&line).expect("formatted constraint parses");
        prop_assert_eq!(back, c);
    }

    #[test]
    fn tokenize_detokenize_is_identity(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        let tc = fuzzer::tokenize_case(&bytes);
        prop_assert_eq!(fuzzer::detokenize(&tc), bytes);
    }

    #[test]
    fn mutation_preserves_skeleton(
        tokens in proptest::collection::vec("[0-9]{1,4}|[a-z]{1,4}|[0-9]{1,3}\\.[0-9]{1,2}", 1..12),
        newline_mask in proptest::collection::vec(any::<bool>(), 11),
        seed_val in any::<u64>(),
    ) {
        let text: Vec<u8> = tokens
            .iter()
            .enumerate()
            .flat_map(|(k, t)| {
                let mut piece = t.as_bytes().to_vec();
                if k + 1 < tokens.len() {
                    piece.push(if newline_mask[k] { b'\n' } else { b' ' });
                }
                piece
            })
            .collect();
        let tc = fuzzer::tokenize_case(&text);
        let mutated = fuzzer::mutate_case(&tc, fuzzer::DEFAULT_RATIO, false, &mut seed::rng_from(seed_val)).unwrap();
        let mtc = fuzzer::tokenize_case(&mutated);
        prop_assert_eq!(mtc.tokens.len(), tc.tokens.len());
        let seps = |t: &fuzzer::TokenizedCase| -> Vec<fuzzer::FollowingSeparator> {
            t.tokens.iter().map(|t| t.following_separator).collect()
        };
        prop_assert_eq!(seps(&mtc), seps(&tc));
        let expected = ((fuzzer::DEFAULT_RATIO * tc.tokens.len() as f64).round() as usize)
            .clamp(1, tc.tokens.len());
        let differing = tc.tokens.iter().zip(&mtc.tokens).filter(|(a, b)| a.text != b.text).count();
        prop_assert_eq!(differing, expected);
    }

    #[test]
    fn mode_upper_is_monotone(lo in -1000i64..1000, width in 0i64..100_000) {
        let hi = lo + width;
        let full = mode_upper(lo, hi, SampleMode::Full);
        let log = mode_upper(lo, hi, SampleMode::Log);
        let loglog = mode_upper(lo, hi, SampleMode::LogLog);
        let min = mode_upper(lo, hi, SampleMode::Min);
        prop_assert!(min <= loglog && loglog <= log && log <= full);
        prop_assert_eq!(min, lo);
        prop_assert_eq!(full, hi);
    }

    #[test]
    fn suite_generation_is_deterministic(seed_val in any::<u64>()) {
        let g = ccfg::testutil::grammar_from(
            &["<S> -> n <n> <L_n>", "<L_i> -> <L_i-1> <s> x_i", "<L_1> -> x_i"],
            &["1<=n<=40", "1<=x_i<=1000"],
        );
        let s1 = generator::generate_suite(&g, "p", seed_val, Limits::default()).unwrap();
        let s2 = generator::generate_suite(&g, "p", seed_val, Limits::default()).unwrap();
        let texts = |s: &generator::TestSuite| -> Vec<Vec<u8>> {
            s.cases.iter().map(|c| c.text.clone()).collect()
        };
        prop_assert_eq!(texts(&s1), texts(&s2));
    }

    #[test]
    fn generated_cases_parse_back(seed_val in any::<u64>()) {
        let g = ccfg::testutil::grammar_from(
            &["<S> -> n <s> k <n> <L_n>", "<L_i> -> <L_i-1> <s> a_i", "<L_1> -> a_i"],
            &["1<=k<=n<=30", "1<=a_i<=k"],
        );
        let suite = generator::generate_suite(&g, "p", seed_val, Limits::default()).unwrap();
        for case in &suite.cases {
            prop_assert!(parse_testcase(&g, &case.text).accepted);
        }
    }

    #[test]
    fn canonicalization_is_rename_invariant(suffix in "[a-z]{1,3}") {
        let base = ccfg::testutil::grammar_from(
            &["<S> -> n <n> <L_n>", "<L_i> -> <L_i-1> <s> x_i", "<L_1> -> x_i"],
            &["1<=n<=40", "1<=x_i<=1000"],
        );
        let lines = [
            format!("<S> -> q{suffix} <n> <Ls{suffix}_q{suffix}>"),
            format!("<Ls{suffix}_i> -> <Ls{suffix}_i-1> <s> y{suffix}_i"),
            format!("<Ls{suffix}_1> -> y{suffix}_i"),
        ];
        let cons = [format!("1<=q{suffix}<=40"), format!("1<=y{suffix}_i<=1000")];
        let line_refs: Vec<&str> = lines.iter().map(|s| s.as_str()).collect();
        let con_refs: Vec<&str> = cons.iter().map(|s| s.as_str()).collect();
        let renamed = ccfg::testutil::grammar_from(&line_refs, &con_refs);
        let a = canonicalize(&base);
        let b = canonicalize(&renamed);
        prop_assert_eq!(a.productions, b.productions);
        prop_assert_eq!(a.constraints, b.constraints);
    }
}
