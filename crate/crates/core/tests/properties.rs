//! Property tests for the structural invariants: estimator monotonicity,
//! spectrum shape identities, expression round trips.

use jumpfrac::expr::{parse_expr, Expr, Var};
use jumpfrac::model::ModelSpec;
use jumpfrac::points::{approx_rate, covering_fraction, JumpEvent, PointSystem};
use jumpfrac::regularity::{estimate_holder, HolderFlag, DEFAULT_H_CAP};
use jumpfrac::sde::{simulate_path, SimulationConfig};
use jumpfrac::spectrum::{
    f_cont, f_jump, pointwise_spectrum, resolve_case, sup_consistency, Endpoint, LeftEndpoint,
    PointContext, NEG_INF,
};
use proptest::prelude::*;

fn event_strategy() -> impl Strategy<Value = JumpEvent> {
    (0.0f64..1.0, 0.01f64..1.0, proptest::bool::ANY).prop_map(|(t, mag, neg)| JumpEvent {
        t,
        z: if neg { -mag } else { mag },
    })
}

fn system_strategy(max_events: usize) -> impl Strategy<Value = PointSystem> {
    proptest::collection::vec(event_strategy(), 0..max_events)
        .prop_map(|evs| PointSystem::from_events(evs, 1.0, 0.01, 0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn approx_rate_monotone_under_event_addition(
        ps in system_strategy(40),
        extra in event_strategy(),
        t in 0.0f64..1.0,
    ) {
        let base = approx_rate(&ps, t, 16.0).unwrap().delta_hat;
        let mut evs = ps.events().to_vec();
        evs.push(extra);
        let bigger = PointSystem::from_events(evs, 1.0, 0.01, 0).unwrap();
        let after = approx_rate(&bigger, t, 16.0).unwrap().delta_hat;
        prop_assert!(after >= base - 1e-12);
    }

    #[test]
    fn covering_fraction_non_increasing_in_delta(
        ps in system_strategy(30),
        d1 in 1.0f64..4.0,
        d2 in 0.0f64..2.0,
    ) {
        // balls shrink as delta grows, so coverage can only drop
        let hi = d1 + d2;
        let f_lo = covering_fraction(&ps, d1, 512).unwrap();
        let f_hi = covering_fraction(&ps, hi, 512).unwrap();
        prop_assert!(f_hi <= f_lo + 1e-12);
    }

    #[test]
    fn linear_branches_are_homogeneous(
        gamma in 0.05f64..1.95,
        frac in 0.01f64..0.49,
    ) {
        // doubling h doubles the value while both points stay in-branch
        let h = frac / gamma;
        let v1 = f_cont(Endpoint::One, gamma, h).unwrap();
        let v2 = f_cont(Endpoint::One, gamma, 2.0 * h).unwrap();
        prop_assert!((v2 - 2.0 * v1).abs() < 1e-12);
    }

    #[test]
    fn f_jump_matches_f_cont_slopes(
        g2 in 0.2f64..1.2,
        dg in 0.1f64..0.7,
        h in 0.0f64..2.0,
    ) {
        let g1 = g2 + dg;
        let v = f_jump(LeftEndpoint::One, Endpoint::One, g1, g2, h).unwrap();
        // away from the two breakpoints the shape is one of the two lines
        // or -inf past the support
        let b1 = 1.0 / g1;
        let b2 = 1.0 / g2;
        if (h - b1).abs() > 1e-9 && (h - b2).abs() > 1e-9 {
            if h < b1 {
                prop_assert!((v - g1 * h).abs() < 1e-12);
            } else if h < b2 {
                prop_assert!((v - g2 * h).abs() < 1e-12);
            } else {
                prop_assert_eq!(v, NEG_INF);
            }
        }
    }

    #[test]
    fn pointwise_never_exceeds_one_and_dies_past_support(
        beta_t in 0.1f64..1.9,
        drop in -0.5f64..0.5,
        delta in 1.0f64..4.0,
        lm_plus in proptest::bool::ANY,
        lm_minus in proptest::bool::ANY,
        h in 0.0f64..3.0,
    ) {
        let beta_t_minus = (beta_t + drop).clamp(0.1, 1.9);
        let ctx = PointContext {
            sigma_zero: true,
            beta_t,
            beta_t_minus,
            delta_t: delta,
            is_jump_time: true,
            lm_plus,
            lm_minus,
        };
        let v = pointwise_spectrum(&ctx, h).unwrap();
        prop_assert!(v <= 1.0 + 1e-12);
        let beta_min = beta_t.min(beta_t_minus);
        if h > 1.0 / beta_min + 1e-9 {
            prop_assert_eq!(v, NEG_INF);
        }
        // the dispatch must always resolve to a case
        resolve_case(&ctx).unwrap();
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sup_consistency_on_random_profiles(
        amp in 0.0f64..0.4,
        freq in 0.5f64..8.0,
        base in 0.8f64..1.4,
        h in 0.0f64..0.55,
    ) {
        let provider = move |t: f64| {
            let beta = (base + amp * (freq * t).sin()).clamp(0.1, 1.9);
            PointContext::continuity(false, beta, 1.0, false)
        };
        let (local, sup) = sup_consistency((0.0, 1.0), h, 256, provider).unwrap();
        if local.d.is_finite() || sup.is_finite() {
            prop_assert!((local.d - sup).abs() < 1e-9, "{} vs {}", local.d, sup);
        }
    }
}

// expression round trip on generated trees

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![(0.0f64..100.0).prop_map(Expr::Num), Just(Expr::Var(Var::X)),]
}

fn expr_strategy() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(5, 64, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|e| Expr::Neg(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(b))),
            inner.clone().prop_map(|e| Expr::Sin(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Tanh(Box::new(e))),
            inner.clone().prop_map(|e| Expr::Abs(Box::new(e))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Min(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| Expr::Clamp(
                Box::new(a),
                Box::new(b),
                Box::new(c)
            )),
            (inner, 0.25f64..3.0).prop_map(|(a, c)| Expr::Pow(Box::new(a), c)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(e in expr_strategy()) {
        let printed = e.to_string();
        let reparsed = parse_expr(&printed).unwrap();
        prop_assert_eq!(e, reparsed, "printed as `{}`", printed);
    }
}

#[test]
fn holder_estimate_affine_insensitive() {
    // adding an affine function moves h_hat by less than 0.05 wherever
    // the raw estimate is clearly sub-polynomial
    let model = ModelSpec::pure_jump(parse_expr("1.25").unwrap(), (1.25, 1.25));
    let cfg = SimulationConfig {
        z_min: 1e-4,
        seed: 31,
        ..Default::default()
    };
    let ps = PointSystem::sample(1.0, 1e-4, 31).unwrap();
    let path = simulate_path(&model, &ps, &cfg).unwrap();
    let shifted = path.with_affine_added(5.0, 0.4);
    let mut checked = 0;
    for k in 1..40 {
        let t = k as f64 / 40.0;
        let a = estimate_holder(&path, t, (6, 11), DEFAULT_H_CAP).unwrap();
        if a.flag != HolderFlag::Ok || a.h_hat >= 1.0 {
            continue;
        }
        let b = estimate_holder(&shifted, t, (6, 11), DEFAULT_H_CAP).unwrap();
        assert!(
            (a.h_hat - b.h_hat).abs() <= 0.05,
            "t={t}: {} vs {}",
            a.h_hat,
            b.h_hat
        );
        checked += 1;
    }
    assert!(checked > 10, "only {checked} comparable points");

    // a constant shift only perturbs the stored floats (absorption), so
    // the estimate is invariant to rounding accuracy
    let shifted = path.with_affine_added(123.0, 0.0);
    for k in 1..10 {
        let t = k as f64 / 10.0;
        let a = estimate_holder(&path, t, (6, 11), DEFAULT_H_CAP).unwrap();
        let b = estimate_holder(&shifted, t, (6, 11), DEFAULT_H_CAP).unwrap();
        assert!((a.h_hat - b.h_hat).abs() < 1e-9, "t={t}");
    }
}
