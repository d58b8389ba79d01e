#![allow(dead_code)]

use popassign::gen::{generate, GenConfig, PrefStyle};
use popassign::{parse_instance, Instance, InstanceBuilder, Matching};

pub const STYLES: [PrefStyle; 3] = [PrefStyle::Strict, PrefStyle::Weak, PrefStyle::Partial];

/// K_{n,n} where every agent ranks b1 ≻ b2 ≻ … ≻ bn.
pub fn unanimous(n: usize) -> Instance {
    let mut b = InstanceBuilder::new();
    for i in 0..n {
        b.add_agent(&format!("a{}", i + 1)).unwrap();
    }
    for i in 0..n {
        b.add_object(&format!("b{}", i + 1)).unwrap();
    }
    let order: Vec<usize> = (0..n).collect();
    for a in 0..n {
        for o in 0..n {
            b.add_edge(a, o).unwrap();
        }
        b.ranking(a, &order);
    }
    b.build().unwrap()
}

/// Complete 3×3 instance with a: x≻z, y≻z; b: x≻z; c: y≻x, y≻z.
pub fn partial_order_example() -> Instance {
    parse_instance(
        r#"{
            "agents": ["a", "b", "c"],
            "objects": ["x", "y", "z"],
            "edges": [["a","x"],["a","y"],["a","z"],["b","x"],["b","y"],["b","z"],
                      ["c","x"],["c","y"],["c","z"]],
            "preferences": {
                "a": {"pairs": [["x","z"],["y","z"]]},
                "b": {"pairs": [["x","z"]]},
                "c": {"pairs": [["y","x"],["y","z"]]}
            }
        }"#,
    )
    .unwrap()
}

/// a1, a2: b1 ≻ b2; a3: b1 ≻ b2 ≻ b3.
pub fn assignment_not_matching() -> Instance {
    parse_instance(
        r#"{
            "agents": ["a1", "a2", "a3"],
            "objects": ["b1", "b2", "b3"],
            "edges": [["a1","b1"],["a1","b2"],["a2","b1"],["a2","b2"],
                      ["a3","b1"],["a3","b2"],["a3","b3"]],
            "preferences": {
                "a1": {"tiers": [["b1"],["b2"]]},
                "a2": {"tiers": [["b1"],["b2"]]},
                "a3": {"tiers": [["b1"],["b2"],["b3"]]}
            }
        }"#,
    )
    .unwrap()
}

pub fn random_instance(seed: u64, agents: usize, objects: usize, style: PrefStyle, density: f64) -> Instance {
    generate(&GenConfig {
        agents,
        objects,
        density,
        style,
        seed,
    })
    .unwrap()
}

/// A square instance of size `n` that admits a perfect matching, found by
/// rejection sampling from `seed` onwards.
pub fn random_with_assignment(seed: u64, n: usize, style: PrefStyle) -> Instance {
    let density = 0.35 + 0.15 * (seed % 5) as f64;
    (0..)
        .map(|i| random_instance(seed.wrapping_mul(1_000_003).wrapping_add(i), n, n, style, density))
        .find(Instance::has_perfect_matching)
        .unwrap()
}

/// Every matching, by plain recursion over agents.
pub fn all_matchings(inst: &Instance, perfect_only: bool) -> Vec<Matching> {
    fn go(inst: &Instance, a: usize, perfect: bool, cur: &mut Matching, out: &mut Vec<Matching>) {
        if a == inst.num_agents() {
            if !perfect || cur.len() == inst.num_objects() {
                out.push(cur.clone());
            }
            return;
        }
        for &b in inst.neighbors(a) {
            if cur.object_partner(b).is_none() {
                cur.insert(a, b);
                go(inst, a + 1, perfect, cur, out);
                cur.remove_agent(a);
            }
        }
        if !perfect {
            go(inst, a + 1, perfect, cur, out);
        }
    }
    let mut out = Vec::new();
    if perfect_only && inst.num_agents() != inst.num_objects() {
        return out;
    }
    go(inst, 0, perfect_only, &mut Matching::for_instance(inst), &mut out);
    out
}

/// Agents preferring `n` minus agents preferring `m`; unmatched is worst and
/// an agent's vote between being matched and unmatched counts `kappa`.
pub fn votes(inst: &Instance, n: &Matching, m: &Matching, kappa: i64) -> i64 {
    (0..inst.num_agents())
        .map(|a| match (n.agent_partner(a), m.agent_partner(a)) {
            (Some(x), Some(y)) if x != y => {
                let xy = inst.preference_pairs(a).contains(&(x, y));
                let yx = inst.preference_pairs(a).contains(&(y, x));
                i64::from(xy) - i64::from(yx)
            }
            (Some(_), None) => kappa,
            (None, Some(_)) => -kappa,
            _ => 0,
        })
        .sum()
}

/// Brute-force unpopularity margin over `candidates`.
pub fn margin_over(inst: &Instance, m: &Matching, candidates: &[Matching]) -> i64 {
    candidates.iter().map(|n| votes(inst, n, m, 1)).max().unwrap_or(0)
}

/// Minimum brute-force margin over all assignments; `None` without one.
pub fn min_margin(inst: &Instance) -> Option<i64> {
    let all = all_matchings(inst, true);
    all.iter().map(|m| margin_over(inst, m, &all)).min()
}
