use bmapf::bo::BoConfig;
use bmapf::bomsd::{design_model_set, plan};
use bmapf::models::{experiment_one_model, simulate, StateSpaceModel};
use bmapf::Error;
use proptest::prelude::*;

/// m_k = floor(m (K - k + 1) / K) by repeated subtraction, no multiplication.
fn floor_by_subtraction(m: usize, k_total: usize, k: usize) -> usize {
    let mut num = 0usize;
    for _ in 0..(k_total - k + 1) {
        num += m;
    }
    let mut q = 0;
    while num >= k_total {
        num -= k_total;
        q += 1;
    }
    q
}

proptest! {
    #[test]
    fn plan_matches_floor_formula(k in 1usize..40, extra in 0usize..2000) {
        let m = k + extra;
        let p = plan(m, k).unwrap();
        prop_assert_eq!(p.sub_lengths.len(), k);
        for (i, &len) in p.sub_lengths.iter().enumerate() {
            prop_assert_eq!(len, floor_by_subtraction(m, k, i + 1));
        }
        prop_assert_eq!(p.sub_lengths[0], m);
        prop_assert!(p.sub_lengths[k - 1] >= 1);
        prop_assert!(p.sub_lengths.windows(2).all(|w| w[0] > w[1]));
        prop_assert_eq!(plan(m, k).unwrap(), p);
    }
}

#[test]
fn plan_needs_enough_data() {
    assert!(matches!(plan(3, 5), Err(Error::PlanTooShort { m: 3, k: 5 })));
    assert!(plan(5, 0).is_err());
}

fn quick_bo() -> BoConfig {
    BoConfig { budget: 12, ..BoConfig::default() }
}

#[test]
fn single_component_searches_full_data() {
    let model = experiment_one_model();
    let hist = simulate(&model, &[0.657], 60, 1).unwrap();
    let set = design_model_set(&model, &hist.observations, 1, &quick_bo(), 200, 9).unwrap();
    assert_eq!(set.components.len(), 1);
    let c = &set.components[0];
    assert_eq!(c.m_k, 60);
    assert_eq!(c.search.queries.len(), 12);
    assert_eq!(c.theta, c.search.best_theta);
    let max = c.search.queries.iter().map(|q| q.value).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(c.f_best, max);
}

#[test]
fn components_distinct_and_in_domain() {
    let model = experiment_one_model();
    let hist = simulate(&model, &[0.657], 100, 2).unwrap();
    let set = design_model_set(&model, &hist.observations, 5, &quick_bo(), 200, 3).unwrap();
    let thetas = set.thetas();
    assert_eq!(
        set.components.iter().map(|c| c.m_k).collect::<Vec<_>>(),
        vec![100, 80, 60, 40, 20]
    );
    for (i, a) in thetas.iter().enumerate() {
        assert!(model.param_domain().contains(a));
        for b in &thetas[i + 1..] {
            assert_ne!(a[0].to_bits(), b[0].to_bits());
        }
    }
}

#[test]
fn design_is_reproducible() {
    let model = experiment_one_model();
    let hist = simulate(&model, &[0.657], 50, 5).unwrap();
    let a = design_model_set(&model, &hist.observations, 3, &quick_bo(), 100, 11).unwrap();
    let b = design_model_set(&model, &hist.observations, 3, &quick_bo(), 100, 11).unwrap();
    assert_eq!(a.thetas(), b.thetas());
    let c = design_model_set(&model, &hist.observations, 3, &quick_bo(), 100, 12).unwrap();
    assert_ne!(a.thetas(), c.thetas());
}

#[test]
fn design_rejects_short_history() {
    let model = experiment_one_model();
    let err = design_model_set(&model, &[0.1, 0.2], 3, &quick_bo(), 100, 0).unwrap_err();
    assert!(matches!(err, Error::PlanTooShort { .. }));
}
