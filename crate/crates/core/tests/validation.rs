use jetconvex_core::jet::{ValidationStatus, ViolationKind};
use jetconvex_core::verify::random_jet;
use jetconvex_core::{compute_slack, validate, JetDataset, JetPoint, Tolerances};
use proptest::prelude::*;
use rand::SeedableRng;

fn jet(records: &[(f64, f64, f64)]) -> JetDataset {
    JetDataset::new(records.iter().map(|&(x, f, g)| JetPoint::new(vec![x], f, vec![g])).collect(), 1).unwrap()
}

fn status(ds: &JetDataset) -> jetconvex_core::ValidationReport {
    validate(&compute_slack(ds), &Tolerances::default(), ds)
}

#[test]
fn negative_slack_pair() {
    // f = 0 at both points but the first gradient says f rises toward y_1
    let ds = jet(&[(0.0, 0.0, 1.0), (1.0, 0.0, 0.0)]);
    let r = status(&ds);
    assert_eq!(r.status, ValidationStatus::ViolatesC);
    let v = r.violations.iter().find(|v| v.kind == ViolationKind::C).unwrap();
    assert_eq!(v.pair, (1, 0));
    assert_eq!(v.magnitude, -1.0);
}

#[test]
fn flat_pair_with_gradient_gap() {
    // tangent of y_0 passes through (1, 0) exactly, gradients differ by 1
    let ds = jet(&[(0.0, 0.0, 0.0), (1.0, 0.0, 1.0)]);
    let r = status(&ds);
    assert_eq!(r.status, ValidationStatus::ViolatesCw1);
    assert_eq!(r.violations.len(), 1);
    assert_eq!(r.violations[0].pair, (1, 0));
    assert_eq!(r.violations[0].magnitude, 1.0);
}

#[test]
fn c_takes_precedence() {
    let ds = jet(&[(0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (3.0, 0.0, 0.0), (4.0, 0.0, 1.0)]);
    assert_eq!(status(&ds).status, ValidationStatus::ViolatesC);
}

fn jet_strategy() -> impl Strategy<Value = JetDataset> {
    (1usize..=3, 1usize..=20, any::<u64>()).prop_map(|(d, n, seed)| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        random_jet(d, n, &mut rng).unwrap().1
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sampled_convex_jets_are_valid(ds in jet_strategy()) {
        let tol = Tolerances { eps_c: 0.0, ..Default::default() };
        let r = validate(&compute_slack(&ds), &tol, &ds);
        prop_assert!(r.is_valid(), "{:?}", r.violations.first());
        prop_assert!(r.worst_c_slack >= 0.0 || ds.len() == 1);
    }

    #[test]
    fn adding_an_affine_function_keeps_slacks(ds in jet_strategy(), c in -3.0f64..3.0, a in prop::collection::vec(-3.0f64..3.0, 3)) {
        let d = ds.dim();
        let shifted = JetDataset::new(
            ds.points()
                .iter()
                .map(|p| {
                    let lin: f64 = p.x.iter().zip(&a).map(|(x, ak)| x * ak).sum();
                    let g = p.g.iter().zip(&a).map(|(g, ak)| g + ak).collect();
                    JetPoint::new(p.x.clone(), p.f + lin + c, g)
                })
                .collect(),
            d,
        )
        .unwrap();
        let (s1, s2) = (compute_slack(&ds), compute_slack(&shifted));
        let tol = 1e-12 * (ds.data_scale() + shifted.data_scale()) * 10.0;
        for ((i, j, p, b), (_, _, q, e)) in s1.pairs().zip(s2.pairs()) {
            prop_assert!((p - q).abs() <= tol, "pair ({i},{j}) {p} vs {q}");
            prop_assert!((b - e).abs() <= tol);
        }
    }

    #[test]
    fn violating_pair_is_reported(x0 in -2.0f64..2.0, dx in 0.1f64..2.0, g in 0.5f64..3.0) {
        // y_1 sits on the tangent plane of y_0 while the gradients differ
        let ds = jet(&[(x0, 0.0, 0.0), (x0 + dx, 0.0, g)]);
        let r = status(&ds);
        prop_assert_eq!(r.status, ValidationStatus::ViolatesCw1);
        prop_assert_eq!(r.violations[0].pair, (1, 0));
    }
}
