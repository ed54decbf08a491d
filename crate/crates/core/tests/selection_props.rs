//! Budget-constrained selection checked against brute-force enumeration.

use metainf_core::selection::{estimate_cost, select};
use metainf_core::selectors::{oracle, OracleTruth};
use metainf_core::{Budget, Error, HardwareProfile, MethodConfig, PerformanceTensor, TaskProfile};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn task(id: &str) -> TaskProfile {
    TaskProfile {
        id: id.into(),
        description: "workload".into(),
        batch_size: 16,
        prompt_count: 100,
        source_tag: "s".into(),
        model: "m".into(),
    }
}

fn hardware(id: &str, price: f64) -> HardwareProfile {
    HardwareProfile {
        id: id.into(),
        gpu_class: "L4".into(),
        gpu_count: 1,
        memory_gb: 24.0,
        price_per_hour: price,
        description: id.into(),
    }
}

/// Random complete tensor; coarse runtimes make ties common.
fn random_tensor(rng: &mut ChaCha8Rng, n: usize, m: usize, h: usize) -> PerformanceTensor {
    let mut methods: Vec<MethodConfig> = MethodConfig::universe().collect();
    methods.shuffle(rng);
    methods.truncate(m);
    let mut t = PerformanceTensor::new(
        (0..n).map(|i| format!("t{i}")).collect(),
        methods,
        (0..h).map(|k| format!("h{k}")).collect(),
    );
    let coarse = rng.random_bool(0.5);
    for i in 0..n {
        for j in 0..m {
            for k in 0..h {
                let v = if coarse {
                    f64::from(rng.random_range(1u32..6)) * 100.0
                } else {
                    rng.random_range(1.0..5000.0)
                };
                t.set(i, j, k, Some(v)).unwrap();
            }
        }
    }
    t
}

/// Fastest method with cost ≤ budget; ties by lower cost, then lower index.
fn brute_force(t: &PerformanceTensor, i: usize, k: usize, hw: &HardwareProfile, budget: f64) -> Option<MethodConfig> {
    let (_, m, _) = t.shape();
    (0..m)
        .map(|j| {
            let rt = t.get(i, j, k).unwrap();
            (rt, estimate_cost(hw, rt).amount, t.methods()[j])
        })
        .filter(|c| c.1 <= budget)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.index().cmp(&b.2.index())))
        .map(|c| c.2)
}

/// A budget that is often exactly one of the candidate costs.
fn random_budget(rng: &mut ChaCha8Rng, t: &PerformanceTensor, i: usize, k: usize, hw: &HardwareProfile) -> f64 {
    let (_, m, _) = t.shape();
    let cost = |j: usize| estimate_cost(hw, t.get(i, j, k).unwrap()).amount;
    match rng.random_range(0..5) {
        0 => 0.0,
        1 => cost(rng.random_range(0..m)),
        2 => {
            let c = cost(rng.random_range(0..m));
            c - c * f64::EPSILON
        }
        3 => f64::INFINITY,
        _ => rng.random_range(0.0..5.0),
    }
}

#[test]
fn oracle_selection_equals_brute_force_on_random_tensors() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cells = 0;
    for _ in 0..50 {
        let (n, m, h) = (rng.random_range(1..=6), rng.random_range(1..=8), rng.random_range(1..=4));
        let t = random_tensor(&mut rng, n, m, h);
        let sel = oracle(OracleTruth::Tensor(t.clone()), t.methods().to_vec());
        for i in 0..n {
            for k in 0..h {
                let hw = hardware(&t.hardware()[k], rng.random_range(0.0..40.0));
                let b = random_budget(&mut rng, &t, i, k, &hw);
                let got = select(&sel, &task(&t.tasks()[i]), &hw, Budget::new(b).unwrap());
                match (got, brute_force(&t, i, k, &hw, b)) {
                    (Ok(r), Some(want)) => assert_eq!(r.method, want),
                    (Err(Error::Infeasible { .. }), None) => {}
                    (other, want) => panic!("cell ({i},{k}) budget {b}: {other:?} vs {want:?}"),
                }
                cells += 1;
            }
        }
    }
    assert!(cells >= 50);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn returned_selection_fits_budget(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=8);
        let t = random_tensor(&mut rng, 2, m, 2);
        let sel = oracle(OracleTruth::Tensor(t.clone()), t.methods().to_vec());
        let hw = hardware("h1", rng.random_range(0.0..100.0));
        let b = random_budget(&mut rng, &t, 1, 1, &hw);
        match select(&sel, &task("t1"), &hw, Budget::new(b).unwrap()) {
            Ok(r) => {
                prop_assert!(r.cost.amount <= b);
                prop_assert!(r.feasible_set_size >= 1);
                prop_assert!(brute_force(&t, 1, 1, &hw, b).is_some());
            }
            Err(Error::Infeasible { cheapest_cost, .. }) => {
                prop_assert!(cheapest_cost > b);
                prop_assert!(brute_force(&t, 1, 1, &hw, b).is_none());
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn larger_budget_never_selects_slower(seed in any::<u64>(), lo in 0.0f64..3.0, extra in 0.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tensor(&mut rng, 1, 8, 1);
        let sel = oracle(OracleTruth::Tensor(t.clone()), t.methods().to_vec());
        let hw = hardware("h0", rng.random_range(0.1..20.0));
        let small = select(&sel, &task("t0"), &hw, Budget::new(lo).unwrap());
        let large = select(&sel, &task("t0"), &hw, Budget::new(lo + extra).unwrap());
        match (small, large) {
            (Ok(s), Ok(l)) => {
                prop_assert!(l.predicted_runtime_s <= s.predicted_runtime_s);
                prop_assert!(l.feasible_set_size >= s.feasible_set_size);
            }
            (Err(Error::Infeasible { .. }), _) => {}
            (Ok(_), Err(e)) => prop_assert!(false, "feasible at {} but not at {}: {}", lo, lo + extra, e),
            (Err(e), _) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn scaling_price_and_budget_together_keeps_choice(seed in any::<u64>(), exp in -8i32..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = rng.random_range(1..=8);
        let t = random_tensor(&mut rng, 1, m, 1);
        let sel = oracle(OracleTruth::Tensor(t.clone()), t.methods().to_vec());
        let price = rng.random_range(0.1..20.0);
        let b = random_budget(&mut rng, &t, 0, 0, &hardware("h0", price));
        let scale = 2f64.powi(exp);
        let base = select(&sel, &task("t0"), &hardware("h0", price), Budget::new(b).unwrap());
        let scaled = select(&sel, &task("t0"), &hardware("h0", price * scale), Budget::new(b * scale).unwrap());
        match (base, scaled) {
            (Ok(a), Ok(c)) => prop_assert_eq!(a.method, c.method),
            (Err(Error::Infeasible { .. }), Err(Error::Infeasible { .. })) => {}
            (a, c) => prop_assert!(false, "{:?} vs {:?}", a, c),
        }
    }
}
