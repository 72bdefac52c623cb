use imbstream::{
    progress, validate_config, ClassSpec, DriftPlan, DriftSpec, DriftTarget, EffectiveState, GeneratorKind, StreamConfig,
    TypeProportions, ValidatedConfig,
};
use proptest::prelude::*;

#[derive(Clone, Debug)]
enum Kind {
    Imbalance(f64),
    Borderline(f64),
    Rare(f64),
    Split(usize),
    Move,
}

fn config(kind: &Kind, seed: u64) -> ValidatedConfig {
    let start_ratio = if matches!(kind, Kind::Imbalance(_)) { 0.3 } else { 0.1 };
    let subclusters = if matches!(kind, Kind::Move) { 3 } else { 1 };
    let mut cfg = StreamConfig::new(
        "drift",
        vec![
            ClassSpec::majority("c0", 1.0 - 2.0 * start_ratio),
            ClassSpec::minority("c1", start_ratio).with_subclusters(subclusters),
            ClassSpec::minority("c2", start_ratio).with_subclusters(subclusters),
        ],
        seed,
    );
    let all = DriftTarget::AllMinority;
    cfg.drifts.push(match kind {
        Kind::Imbalance(to) => DriftSpec::imbalance_ratio(all, *to),
        Kind::Borderline(to) => DriftSpec::type_proportion(all, TypeProportions::borderline(*to)),
        Kind::Rare(to) => DriftSpec::type_proportion(all, TypeProportions::rare(*to)),
        Kind::Split(n) => DriftSpec::split(all, *n),
        Kind::Move => DriftSpec::moving(all),
    });
    validate_config(&cfg).unwrap()
}

fn arb_kind() -> impl Strategy<Value = Kind> {
    prop_oneof![
        (0.01..0.3f64).prop_map(Kind::Imbalance),
        (0.0..=1.0f64).prop_map(Kind::Borderline),
        (0.0..=1.0f64).prop_map(Kind::Rare),
        (2usize..=7).prop_map(Kind::Split),
        Just(Kind::Move),
    ]
}

fn same_concept(a: &EffectiveState, b: &EffectiveState) -> bool {
    a.ratios == b.ratios && a.type_proportions == b.type_proportions && a.layout == b.layout
}

/// Every scalar parameter of the state, in a fixed order. Only comparable
/// between states with the same sub-cluster counts.
fn scalars(s: &EffectiveState) -> Vec<f64> {
    let mut v = s.ratios.clone();
    for t in &s.type_proportions {
        v.extend(t.as_array());
    }
    for region in &s.layout.classes {
        for sc in &region.subclusters {
            v.extend(sc.ellipsoid.center);
            v.push(sc.weight);
        }
    }
    v
}

#[test]
fn progress_examples() {
    let d = DriftSpec::moving(DriftTarget::AllMinority);
    assert_eq!(progress(&d, 70_000), 0.0);
    assert_eq!(progress(&d, 85_000), 0.5);
    assert_eq!(progress(&d, 100_000), 1.0);
}

#[test]
fn imbalance_drift_lands_on_the_paper_ratios() {
    let plan = DriftPlan::new(&config(&Kind::Imbalance(0.01), 1)).unwrap();
    let s = plan.state_at(100_000);
    assert!((s.ratios[0] - 0.98).abs() < 1e-12);
    assert_eq!(&s.ratios[1..], &[0.01, 0.01]);
}

#[test]
fn geometry_drifts_place_for_every_seed() {
    for seed in 0..300 {
        for kind in [Kind::Move, Kind::Split(5), Kind::Split(7)] {
            for generator in [GeneratorKind::Old, GeneratorKind::New] {
                let mut cfg = config(&kind, seed).into_inner();
                cfg.generator = generator;
                let cfg = validate_config(&cfg).unwrap();
                DriftPlan::new(&cfg).unwrap_or_else(|e| panic!("{kind:?} {generator:?} seed {seed}: {e}"));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn progress_is_a_clamped_line(t in 0u64..300_000, start in 0u64..150_000, len in 1u64..100_000) {
        let d = DriftSpec::moving(DriftTarget::AllMinority).window(start, start + len);
        let p = progress(&d, t);
        prop_assert!((0.0..=1.0).contains(&p));
        if t > start && t < start + len {
            prop_assert!((p - (t - start) as f64 / len as f64).abs() < 1e-12);
        }
        prop_assert!(progress(&d, t + 1) >= p);
    }

    #[test]
    fn drift_boundaries_match_the_stationary_concepts(kind in arb_kind(), seed in 0u64..1000) {
        let cfg = config(&kind, seed);
        let plan = DriftPlan::new(&cfg).unwrap();
        let d = &cfg.config().drifts[0];
        prop_assert!(same_concept(&plan.state_at(d.t_start), &plan.state_at(1)));
        prop_assert!(same_concept(&plan.state_at(d.t_end), &plan.state_at(cfg.length())));
    }

    #[test]
    fn states_before_the_window_are_identical(kind in arb_kind(), seed in 0u64..1000, a in 0u64..70_000, b in 0u64..70_000) {
        let plan = DriftPlan::new(&config(&kind, seed)).unwrap();
        prop_assert!(same_concept(&plan.state_at(a), &plan.state_at(b)));
    }

    #[test]
    fn parameters_move_monotonically_inside_the_window(kind in arb_kind(), seed in 0u64..1000) {
        let plan = DriftPlan::new(&config(&kind, seed)).unwrap();
        let states: Vec<EffectiveState> = (70_001..100_000).step_by(1_500).map(|t| plan.state_at(t)).collect();
        for s in &states {
            prop_assert!((s.ratios.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let first = scalars(&states[0]);
        let last = scalars(states.last().unwrap());
        for w in states.windows(2) {
            let (a, b) = (scalars(&w[0]), scalars(&w[1]));
            prop_assert_eq!(a.len(), b.len());
            for i in 0..a.len() {
                // each step goes the same way as the whole window, up to rounding
                prop_assert!((b[i] - a[i]) * (last[i] - first[i]) >= -1e-12, "parameter {}", i);
            }
        }
    }
}
