use std::sync::Arc;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rlho::binpack::{ActionKind, Instance, Packing};
use rlho::exact;
use rlho::sa::{self, SaConfig};

fn sizes(max_n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..=1.0, 1..=max_n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn actions_keep_feasibility_and_telescope(
        sizes in sizes(30),
        seed in any::<u64>(),
        actions in prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..200),
    ) {
        let inst = Arc::new(Instance::from_sizes(sizes, 1.0).unwrap());
        let n = inst.n();
        let mut p = Packing::random(inst.clone(), &mut ChaCha8Rng::seed_from_u64(seed));
        let start = p.cost() as i64;
        let mut total = 0i64;
        for (i, j) in actions {
            let before = p.cost() as i64;
            let out = p.apply_action(i.index(n), j.index(n)).unwrap();
            total += out.reward;
            prop_assert_eq!(out.reward, before - p.cost() as i64);
            prop_assert!(out.reward == 0 || out.kind == ActionKind::Moved);
            prop_assert!((0..=1).contains(&out.reward));
            prop_assert!(p.check_invariants().is_ok());
            prop_assert!(p.cost() >= inst.lower_bound() && p.cost() <= n);
        }
        prop_assert_eq!(total, start - p.cost() as i64);
    }

    #[test]
    fn annealing_returns_feasible_best(sizes in sizes(25), seed in any::<u64>()) {
        let inst = Arc::new(Instance::from_sizes(sizes, 1.0).unwrap());
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let start = Packing::random(inst.clone(), &mut r);
        let res = sa::run(&start, &SaConfig::default().with_steps(500), &mut r);
        prop_assert!(res.best.check_invariants().is_ok());
        prop_assert!(res.last.check_invariants().is_ok());
        prop_assert!(res.best.cost() <= start.cost());
        prop_assert!(res.best.cost() <= res.last.cost());
        prop_assert!(res.best.cost() >= inst.lower_bound());
    }

    #[test]
    fn instance_text_round_trips(sizes in sizes(40)) {
        let inst = Instance::from_sizes(sizes, 1.0).unwrap();
        let back = Instance::from_text(&inst.to_text()).unwrap();
        prop_assert_eq!(back.sizes(), inst.sizes());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn annealing_is_never_below_the_exact_optimum(sizes in sizes(8), seed in any::<u64>()) {
        let inst = Arc::new(Instance::from_sizes(sizes, 1.0).unwrap());
        let optimum = exact::solve(&inst).unwrap().bins;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let start = Packing::random(inst.clone(), &mut r);
        let res = sa::run(&start, &SaConfig::default().with_steps(2000), &mut r);
        prop_assert!(res.best.cost() >= optimum);
        prop_assert!(optimum >= inst.lower_bound());
    }
}

#[test]
fn annealing_finds_the_optimum_on_six_items() {
    let cfg = SaConfig {
        t_max: 5.0,
        t_min: 0.01,
        ..SaConfig::default()
    }
    .with_steps(100_000);
    let mut hits = 0;
    for seed in 0..20u64 {
        let inst = Arc::new(Instance::generate(6, 100 + seed).unwrap());
        let optimum = exact::solve(&inst).unwrap().bins;
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let res = sa::run(&Packing::singletons(inst), &cfg, &mut r);
        if res.best.cost() == optimum {
            hits += 1;
        }
    }
    assert!(hits >= 19, "{hits}/20");
}

#[test]
fn converged_annealing_lands_near_the_lower_bound() {
    let inst = Arc::new(Instance::generate(100, 7).unwrap());
    let lb = inst.lower_bound();
    let gaps: Vec<usize> = (1..=5u64)
        .map(|seed| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let start = Packing::random(inst.clone(), &mut r);
            sa::run_to_convergence(&start, &SaConfig::default(), &mut r)
                .best
                .cost()
                - lb
        })
        .collect();
    assert!(
        gaps.iter().filter(|&&g| g <= 6).count() >= 4,
        "gaps above the lower bound: {gaps:?}"
    );
}
