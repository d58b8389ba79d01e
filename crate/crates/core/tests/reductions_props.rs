mod common;

use std::collections::HashSet;

use common::*;
use popassign::gen::{generate_market, PrefStyle};
use popassign::oracle::{is_popular_with_penalty, min_margin_up_to_symmetry};
use popassign::reductions::{
    allocation_to_assignment, assignment_to_allocation, housing_to_assignment, reduce_diversity,
    reduce_penalty_matching, reduce_popular_matching, solve_diversity, solve_housing, solve_penalty_matching,
    weak_to_strict, Allocation, HousingMarket, Origin,
};
use popassign::{validate, Instance, Matching};
use proptest::prelude::*;

fn style() -> impl Strategy<Value = PrefStyle> {
    prop::sample::select(STYLES.to_vec())
}

fn max_matching_size(inst: &Instance) -> usize {
    all_matchings(inst, false).iter().map(Matching::len).max().unwrap_or(0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn popular_matching_reduction_preserves_delta(seed in any::<u64>(), na in 1usize..=3, nb in 1usize..=3, style in style()) {
        let inst = random_instance(seed, na, nb, style, 0.6);
        let (target, map) = reduce_popular_matching(&inst);
        prop_assert!(validate(&target.to_doc()).is_valid());
        let all = all_matchings(&inst, false);
        for m in all.iter().take(12) {
            let m2 = map.extend(&inst, m).unwrap();
            prop_assert!(m2.is_perfect());
            prop_assert_eq!(&map.lift(&m2), m);
            for n in all.iter().take(12) {
                let n2 = map.extend(&inst, n).unwrap();
                prop_assert_eq!(votes(&inst, n, m, 1), votes(&target, &n2, &m2, 1));
            }
        }
    }

    #[test]
    fn penalty_reduction_turns_votes_into_deltas(seed in any::<u64>(), na in 1usize..=3, nb in 1usize..=3, kappa in 1usize..=3, style in style()) {
        let inst = random_instance(seed, na, nb, style, 0.6);
        let (target, map) = reduce_penalty_matching(&inst, kappa).unwrap();
        prop_assert_eq!(target.num_agents(), na + nb + na * (kappa - 1));
        prop_assert_eq!(target.num_objects(), nb + na * kappa);
        let all = all_matchings(&inst, false);
        for m in all.iter().take(10) {
            let m2 = map.extend(&inst, m).unwrap();
            for n in all.iter().take(10) {
                let n2 = map.extend(&inst, n).unwrap();
                prop_assert_eq!(votes(&target, &n2, &m2, 1), votes(&inst, n, m, kappa as i64));
            }
        }
    }

    #[test]
    fn penalty_matchings_are_popular_and_large(seed in any::<u64>(), na in 1usize..=4, nb in 1usize..=4, kappa in 1usize..=3, style in style()) {
        let inst = random_instance(seed, na, nb, style, 0.55);
        let out = solve_penalty_matching(&inst, kappa).unwrap();
        let all = all_matchings(&inst, false);
        let exists = all.iter().any(|m| all.iter().all(|n| votes(&inst, n, m, kappa as i64) <= 0));
        prop_assert_eq!(out.lifted.is_some(), exists);
        if let Some(m) = &out.lifted {
            prop_assert!(is_popular_with_penalty(&inst, m, kappa as i64).unwrap());
            prop_assert!(m.len() * (kappa + 1) >= kappa * max_matching_size(&inst));
        }
    }
}

#[test]
fn every_target_assignment_lifts_to_a_matching() {
    for seed in 0..60u64 {
        let inst = random_instance(seed, 2, 2, STYLES[(seed % 3) as usize], 0.7);
        for kappa in 1..=2 {
            let (target, map) = reduce_penalty_matching(&inst, kappa).unwrap();
            for m2 in all_matchings(&target, true) {
                let m = map.lift(&m2);
                let pairs: Vec<_> = m.pairs().collect();
                assert!(Matching::from_pairs(&inst, pairs).is_ok());
            }
        }
    }
}

#[test]
fn penalty_popular_matchings_are_large() {
    for seed in 0..80u64 {
        let inst = random_instance(seed, 4, 4, STYLES[(seed % 3) as usize], 0.5);
        let all = all_matchings(&inst, false);
        let max = max_matching_size(&inst);
        for kappa in 1..=3i64 {
            for m in all.iter().filter(|m| all.iter().all(|n| votes(&inst, n, m, kappa) <= 0)) {
                assert!(m.len() as i64 * (kappa + 1) >= kappa * max as i64);
            }
        }
    }
}

#[test]
fn diversity_lift_respects_quotas() {
    for seed in 0..60u64 {
        let inst = random_instance(seed, 4, 3, STYLES[(seed % 3) as usize], 0.6);
        let colors = [0, 0, 1, 1];
        let bounds = [(1, 2), (0, 1)];
        let Ok(out) = solve_diversity(&inst, &colors, &bounds) else { continue };
        assert!(validate(&out.target.to_doc()).is_valid());
        let admissible = |m: &Matching| {
            bounds.iter().enumerate().all(|(i, &(s, t))| {
                let c = (0..4).filter(|&a| colors[a] == i && m.agent_partner(a).is_some()).count();
                s <= c && c <= t
            })
        };
        let candidates: Vec<Matching> = all_matchings(&inst, false).into_iter().filter(|m| admissible(m)).collect();
        let exists = candidates.iter().any(|m| candidates.iter().all(|n| votes(&inst, n, m, 1) <= 0));
        assert_eq!(out.lifted.is_some(), exists, "seed {seed}");
        if let Some(m) = out.lifted {
            assert!(admissible(&m), "seed {seed}");
            assert!(candidates.iter().all(|n| votes(&inst, n, &m, 1) <= 0), "seed {seed}");
        }
        let (_, map) = reduce_diversity(&inst, &colors, &bounds).unwrap();
        assert_eq!(map.object_origin.iter().filter(|o| matches!(o, Origin::Artificial { .. })).count(), 1 + 2);
    }
}

/// All allocations, choosing for every agent either no trade or one out-arc.
fn all_allocations(market: &HousingMarket) -> Vec<Allocation> {
    let n = market.num_agents();
    let mut out = Vec::new();
    let mut choice = vec![None; n];
    fn go(market: &HousingMarket, a: usize, choice: &mut Vec<Option<usize>>, out: &mut Vec<Allocation>) {
        if a == market.num_agents() {
            let arcs: Vec<(usize, usize)> = choice.iter().enumerate().filter_map(|(a, h)| h.map(|h| (a, h))).collect();
            if let Ok(alloc) = Allocation::from_arcs(market, &arcs) {
                out.push(alloc);
            }
            return;
        }
        choice[a] = None;
        go(market, a + 1, choice, out);
        for &h in market.targets(a) {
            choice[a] = Some(h);
            go(market, a + 1, choice, out);
        }
        choice[a] = None;
    }
    go(market, 0, &mut choice, &mut out);
    out
}

fn allocation_votes(market: &HousingMarket, s: &Allocation, t: &Allocation) -> i64 {
    (0..market.num_agents())
        .map(|a| match (s.trading_partner(a), t.trading_partner(a)) {
            (Some(x), Some(y)) => i64::from(market.prefers(a, x, y)) - i64::from(market.prefers(a, y, x)),
            (Some(_), None) => 1,
            (None, Some(_)) => -1,
            (None, None) => 0,
        })
        .sum()
}

#[test]
fn housing_matches_allocation_elections() {
    for seed in 0..100u64 {
        let n = 1 + (seed % 5) as usize;
        let market = generate_market(n, 0.5, STYLES[(seed % 3) as usize], seed).unwrap();
        let allocations = all_allocations(&market);
        let (inst, map) = housing_to_assignment(&market);
        assert_eq!(inst.num_edges(), market.arcs().len() + n);
        // allocations ↔ assignments of G_D
        let images: HashSet<Matching> = allocations.iter().map(|s| allocation_to_assignment(s, &map)).collect();
        assert_eq!(images.len(), allocations.len());
        assert_eq!(images, all_matchings(&inst, true).into_iter().collect());
        for s in &allocations {
            let m = allocation_to_assignment(s, &map);
            assert_eq!(&assignment_to_allocation(&m, &map, &market).unwrap(), s);
        }
        let popular_exists = allocations
            .iter()
            .any(|s| allocations.iter().all(|t| allocation_votes(&market, t, s) <= 0));
        let out = solve_housing(&market).unwrap();
        assert_eq!(out.allocation.is_some(), popular_exists, "seed {seed}");
        if let Some(s) = &out.allocation {
            assert!(allocations.iter().all(|t| allocation_votes(&market, t, s) <= 0));
            let mut seen = HashSet::new();
            for cycle in s.cycles() {
                assert!(cycle.len() >= 2);
                for a in cycle {
                    assert!(seen.insert(a));
                }
            }
        }
    }
}

#[test]
fn weak_to_strict_shifts_minimum_margin_by_q() {
    let mut checked = 0;
    for seed in 0..400u64 {
        if checked == 40 {
            break;
        }
        let n = 1 + (seed % 3) as usize;
        let inst = random_with_assignment(seed, n, PrefStyle::Weak);
        let (target, q, map) = weak_to_strict(&inst).unwrap();
        assert!((0..target.num_agents()).all(|a| target.is_strict_ranking(a)));
        let source = min_margin(&inst).unwrap();
        let shifted = min_margin_up_to_symmetry(&target, 50_000).unwrap().unwrap();
        assert_eq!(shifted.margin, source + q as i64, "seed {seed}");
        let lifted = map.lift(&shifted.witness);
        assert!(lifted.is_perfect());
        checked += 1;
    }
    assert_eq!(checked, 40);
}
