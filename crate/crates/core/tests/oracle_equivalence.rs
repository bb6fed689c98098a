use flexauction::allocator::{
    allocate, allocate_fixed_supply, AllocatorConfig, PurchaseRule, TieBreak,
};
use flexauction::feasibility::{is_feasible, objective, witness_assignment, DecisionPair};
use flexauction::instances::{random_instance, InstanceParams};
use flexauction::model::MarketStructure;
use flexauction::oracle::{default_purchase_cap, solve_exact, solve_fixed_supply};
use proptest::prelude::*;

const TOL: f64 = 1e-9;

fn exact(tie: TieBreak) -> AllocatorConfig {
    AllocatorConfig {
        rule: PurchaseRule::Exact,
        tie_break: tie,
    }
}

#[test]
fn allocator_matches_oracle_on_seeded_instances() {
    let params = InstanceParams::default();
    for i in 0..3000 {
        let inst = random_instance(&params, 11, i).unwrap();
        let n = inst.w.len();
        let best = solve_exact(
            &inst.w,
            &inst.c,
            &inst.market,
            &default_purchase_cap(n, inst.market.k()),
        )
        .unwrap();
        for tie in [TieBreak::LowerIndexFirst, TieBreak::HigherIndexFirst] {
            let a = allocate(&inst.w, &inst.c, &inst.market, exact(tie)).unwrap();
            let got = a.objective(&inst.w, &inst.market);
            assert!(
                (got - best.objective).abs() <= TOL,
                "instance {i}: {got} vs {} ({inst:?})",
                best.objective
            );
            assert!(is_feasible(&a.pair(), &inst.c, &inst.market).unwrap());
        }
    }
}

#[test]
fn fixed_supply_matches_zero_purchase_oracle() {
    let params = InstanceParams::default();
    for i in 0..3000 {
        let inst = random_instance(&params, 12, i).unwrap();
        let best = solve_fixed_supply(&inst.w, &inst.c, &inst.market).unwrap();
        for tie in [TieBreak::LowerIndexFirst, TieBreak::HigherIndexFirst] {
            let xi = allocate_fixed_supply(&inst.w, &inst.c, &inst.market, tie).unwrap();
            let g = vec![0; inst.market.k()];
            let got = objective(&xi, &g, &inst.w, &inst.market);
            assert!((got - best.objective).abs() <= TOL, "instance {i}");
            assert!(is_feasible(&DecisionPair::new(xi, g), &inst.c, &inst.market).unwrap());
        }
    }
}

#[test]
fn per_class_rule_is_not_always_optimal() {
    let mk = MarketStructure::new(vec![1, 0], vec![5.0, 3.0]).unwrap();
    let (w, c) = ([4.0, 6.0], [1, 2]);
    let cfg = AllocatorConfig {
        rule: PurchaseRule::PerClass,
        ..Default::default()
    };
    let per_class = allocate(&w, &c, &mk, cfg).unwrap();
    assert_eq!(per_class.objective(&w, &mk), 6.0);
    let best = solve_exact(&w, &c, &mk, &default_purchase_cap(2, 2)).unwrap();
    assert_eq!(best.objective, 7.0);
}

#[test]
fn purchases_are_used_and_go_to_their_own_class_or_lower() {
    let params = InstanceParams::default();
    for i in 0..3000 {
        let inst = random_instance(&params, 13, i).unwrap();
        let a = allocate(&inst.w, &inst.c, &inst.market, AllocatorConfig::default()).unwrap();
        let k = inst.market.k();
        let witness = witness_assignment(&a.pair(), &inst.c, &inst.market).unwrap();
        let bought: u64 = a.g.iter().sum();
        let free_used = witness.0.iter().flatten().filter(|s| !s.purchased).count();
        assert_eq!(
            a.pair().served_count(),
            free_used + bought as usize,
            "instance {i}"
        );
        assert_eq!(witness.purchased_used(k), a.g, "instance {i}");
        for (l, slot) in witness.0.iter().enumerate() {
            if let Some(s) = slot {
                assert!(
                    !s.purchased || inst.c[l] <= s.band,
                    "instance {i}: consumer {l}"
                );
            }
        }
    }
}

fn instance() -> impl Strategy<Value = (Vec<u64>, Vec<f64>, Vec<f64>, Vec<usize>)> {
    (1usize..=3).prop_flat_map(|k| {
        (
            prop::collection::vec(0u64..=2, k),
            prop::collection::btree_set(1u32..=20, k),
            prop::collection::vec((-10i32..=30, 1usize..=k), 0..=6),
        )
            .prop_map(|(m, prices, consumers)| {
                // half-integer prices and valuations make ties common
                let p: Vec<f64> = prices.into_iter().rev().map(|x| x as f64 / 2.0).collect();
                let (w, c) = consumers
                    .into_iter()
                    .map(|(w, c)| (w as f64 / 2.0, c))
                    .unzip();
                (m, p, w, c)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1500))]

    #[test]
    fn allocator_is_optimal_on_tie_heavy_instances((m, p, w, c) in instance()) {
        let mk = MarketStructure::new(m, p).unwrap();
        let best = solve_exact(&w, &c, &mk, &default_purchase_cap(w.len(), mk.k())).unwrap();
        for tie in [TieBreak::LowerIndexFirst, TieBreak::HigherIndexFirst] {
            let a = allocate(&w, &c, &mk, exact(tie)).unwrap();
            prop_assert!((a.objective(&w, &mk) - best.objective).abs() <= TOL);
        }
        let fixed = solve_fixed_supply(&w, &c, &mk).unwrap();
        let xi = allocate_fixed_supply(&w, &c, &mk, TieBreak::default()).unwrap();
        prop_assert!((objective(&xi, &vec![0; mk.k()], &w, &mk) - fixed.objective).abs() <= TOL);
    }

    #[test]
    fn raising_a_served_valuation_keeps_it_served(
        (m, p, w, c) in instance(),
        pick in any::<prop::sample::Index>(),
        bump in 0u32..10,
    ) {
        prop_assume!(!w.is_empty());
        let mk = MarketStructure::new(m, p).unwrap();
        let l = pick.index(w.len());
        let a = allocate(&w, &c, &mk, AllocatorConfig::default()).unwrap();
        if !a.xi[l] {
            return Ok(());
        }
        let mut higher = w.clone();
        higher[l] += bump as f64 / 2.0;
        prop_assert!(allocate(&higher, &c, &mk, AllocatorConfig::default()).unwrap().xi[l]);
    }

    #[test]
    fn virtual_threshold_is_the_critical_value(
        (m, p, w, c) in instance(),
        pick in any::<prop::sample::Index>(),
    ) {
        prop_assume!(!w.is_empty());
        let mk = MarketStructure::new(m, p).unwrap();
        let l = pick.index(w.len());
        let a = allocate(&w, &c, &mk, AllocatorConfig::default()).unwrap();
        let mut probe = w.clone();
        probe[l] = a.vthr[l] + 1e-6;
        prop_assert!(allocate(&probe, &c, &mk, AllocatorConfig::default()).unwrap().xi[l]);
        probe[l] = a.vthr[l] - 1e-6;
        prop_assert!(!allocate(&probe, &c, &mk, AllocatorConfig::default()).unwrap().xi[l]);
    }
}
