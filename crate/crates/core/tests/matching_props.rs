use popassign::matching::{max_weight_perfect_matching, maximum_matching, BipartiteGraph, WeightedBipartiteGraph};
use proptest::prelude::*;

fn edge_lists(max: usize) -> impl Strategy<Value = (usize, usize, Vec<bool>)> {
    (0..=max, 0..=max).prop_flat_map(|(l, r)| (Just(l), Just(r), prop::collection::vec(any::<bool>(), l * r)))
}

fn graph(l: usize, r: usize, mask: &[bool]) -> BipartiteGraph {
    let mut g = BipartiteGraph::new(l, r);
    for u in 0..l {
        for v in 0..r {
            if mask[u * r + v] {
                g.add_edge(u, v);
            }
        }
    }
    g
}

/// Maximum matching size by exhaustive search.
fn brute_size(g: &BipartiteGraph, u: usize, used: &mut Vec<bool>) -> usize {
    if u == g.left() {
        return 0;
    }
    let mut best = brute_size(g, u + 1, used);
    for &v in g.neighbors(u) {
        if !used[v] {
            used[v] = true;
            best = best.max(1 + brute_size(g, u + 1, used));
            used[v] = false;
        }
    }
    best
}

/// Best perfect-matching weight by exhaustive search.
fn brute_weight(g: &WeightedBipartiteGraph, u: usize, used: &mut Vec<bool>) -> Option<i64> {
    if u == g.left() {
        return Some(0);
    }
    let mut best = None;
    for &(v, w) in g.neighbors(u) {
        if !used[v] {
            used[v] = true;
            if let Some(rest) = brute_weight(g, u + 1, used) {
                best = best.max(Some(rest + w));
            }
            used[v] = false;
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn hopcroft_karp_is_maximum((l, r, mask) in edge_lists(7)) {
        let g = graph(l, r, &mask);
        let m = maximum_matching(&g);
        for (u, v) in m.pairs() {
            prop_assert!(g.neighbors(u).contains(&v));
        }
        prop_assert_eq!(m.len(), brute_size(&g, 0, &mut vec![false; r]));
        prop_assert_eq!(maximum_matching(&g), m);
    }

    #[test]
    fn hungarian_is_optimal(n in 1usize..=5, cells in prop::collection::vec(prop::option::weighted(0.8, -1i64..=1), 25)) {
        let mut g = WeightedBipartiteGraph::new(n, n);
        for u in 0..n {
            for v in 0..n {
                if let Some(w) = cells[u * 5 + v] {
                    g.add_edge(u, v, w);
                }
            }
        }
        let brute = brute_weight(&g, 0, &mut vec![false; n]);
        match max_weight_perfect_matching(&g) {
            Ok((m, w)) => {
                prop_assert!(m.is_perfect());
                let sum: i64 = m.pairs().map(|(u, v)| g.weight(u, v).unwrap()).sum();
                prop_assert_eq!(sum, w);
                prop_assert_eq!(Some(w), brute);
            }
            Err(_) => prop_assert_eq!(brute, None),
        }
    }
}
