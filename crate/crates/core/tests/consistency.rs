//! Cross-module agreement on random gamma sequences.

use kgamma::algebra::q_norm_general;
use kgamma::jacobi::{block_product, jacobi_coefficients};
use kgamma::numeric::rel_diff;
use kgamma::oracle::{stieltjes, DiscreteMeasure};
use kgamma::presets::{example2_alternating, example4_sparse};
use kgamma::widom::{widom_dyadic_closed, widom_from_table};
use kgamma::{Float, GammaSpec, Rational, Tail};
use proptest::prelude::*;

fn gamma() -> impl Strategy<Value = Rational> {
    (20u32..=250).prop_map(|p| Rational::from((p, 1000)))
}

fn spec() -> impl Strategy<Value = GammaSpec> {
    (
        proptest::collection::vec(gamma(), 0..6),
        proptest::collection::vec(gamma(), 1..4),
    )
        .prop_map(|(prefix, period)| GammaSpec::new(prefix, Tail::Periodic(period), 192).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn recursion_norms_match_gram_norms(spec in spec()) {
        let table = jacobi_coefficients(&spec, 40).unwrap();
        for n in 1..=40u64 {
            let from_table = table.norm_sq(n as usize).unwrap();
            let from_gram = q_norm_general(&spec, n).unwrap();
            prop_assert!(from_table.rel_diff(&from_gram) < 1e-40, "n={}", n);
        }
    }

    #[test]
    fn block_sums_and_dyadic_products(spec in spec()) {
        let table = jacobi_coefficients(&spec, 512).unwrap();
        for s in 0..=9u32 {
            prop_assert!(table.norm_sq(1 << s).unwrap().rel_diff(&spec.q_norm_sq(s)) < 1e-45);
            let norm = spec.q_norm_sq(s).value();
            let mut k = 1usize;
            while ((2 * k + 1) << s) <= 512 {
                let sum = block_product(&table, (2 * k + 1) << s, s).unwrap().value()
                    + block_product(&table, (2 * k) << s, s).unwrap().value();
                prop_assert!(rel_diff(&sum, &norm) < 1e-45);
                k += 1;
            }
        }
    }

    #[test]
    fn widom_closed_form_matches_series(spec in spec()) {
        let table = jacobi_coefficients(&spec, 1024).unwrap();
        let series = widom_from_table(&spec, &table).unwrap();
        let two = Float::with_val(192, 2).sqrt();
        for s in 0..=10u32 {
            let closed = widom_dyadic_closed(&spec, s).unwrap();
            prop_assert!(series.w(1 << s).rel_diff(&closed) < 1e-40);
            prop_assert!(closed.value() >= Float::with_val(192, &two * (1.0 - 1e-40)));
        }
    }
}

#[test]
fn oracle_matches_recursion_on_mixed_spec() {
    let spec = GammaSpec::new(
        vec![Rational::from((1, 5)), Rational::from((1, 7))],
        Tail::Constant(Rational::from((1, 6))),
        256,
    )
    .unwrap();
    let table = jacobi_coefficients(&spec, 48).unwrap();
    let oracle = stieltjes(&DiscreteMeasure::counting(&spec, 10).unwrap(), 48).unwrap();
    for n in 1..=48 {
        assert!(rel_diff(&table.a(n), &oracle.a[n - 1]) < 1e-60, "n={n}");
        assert!(Float::with_val(256, &oracle.b[n - 1] - 0.5f64).abs() < 1e-60);
    }
}

#[test]
fn presets_run_through_the_pipeline() {
    for spec in [example2_alternating(256).unwrap(), example4_sparse(&[3, 6, 12], 256).unwrap()] {
        assert!(spec.note().unwrap().contains("shifted by 3"));
        let table = jacobi_coefficients(&spec, 4096).unwrap();
        let series = widom_from_table(&spec, &table).unwrap();
        for s in 0..=12u32 {
            let closed = widom_dyadic_closed(&spec, s).unwrap();
            assert!(series.w(1 << s).rel_diff(&closed) < 1e-40, "{} s={s}", spec.canonical());
        }
    }
}
