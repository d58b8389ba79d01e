//! Level functions, the level-induced subgraph and the level-raising search
//! for popular assignments.
//!
//! Every object carries a level. An agent keeps edges to her undominated
//! neighbours on her highest neighbouring level, plus edges one level down
//! to undominated neighbours that beat everything on that highest level. The
//! search repeatedly takes a maximum matching in this subgraph and raises the
//! level of every object left unmatched, until the matching is perfect or a
//! level reaches its cap. Levels double as the object side of an LP dual
//! certificate, `α_b = −ℓ(b)`.

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::instance::{Instance, Matching};
use crate::matching::{maximum_matching_from, BipartiteGraph};
use crate::variants::{lambda_feasible_local, LoadCapacity};

/// Object levels plus the cached per-agent maximum neighbour level `ℓ*(a)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelFunction {
    levels: Vec<usize>,
    top: Vec<usize>,
}

impl LevelFunction {
    pub fn zeros(instance: &Instance) -> Self {
        Self::new(instance, vec![0; instance.num_objects()])
    }

    pub fn new(instance: &Instance, levels: Vec<usize>) -> Self {
        assert_eq!(levels.len(), instance.num_objects(), "one level per object");
        let mut f = Self {
            levels,
            top: vec![0; instance.num_agents()],
        };
        f.refresh(instance);
        f
    }

    fn refresh(&mut self, instance: &Instance) {
        for a in 0..instance.num_agents() {
            self.top[a] = instance
                .neighbors(a)
                .iter()
                .map(|&b| self.levels[b])
                .max()
                .unwrap_or(0);
        }
    }

    pub fn level(&self, b: usize) -> usize {
        self.levels[b]
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// `ℓ*(a)`, the highest level among `a`'s neighbours (0 if isolated).
    pub fn top(&self, a: usize) -> usize {
        self.top[a]
    }

    pub fn max_level(&self) -> usize {
        self.levels.iter().copied().max().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.levels.iter().sum()
    }

    /// Raises each listed object by one level.
    pub fn raise(&mut self, instance: &Instance, objects: impl IntoIterator<Item = usize>) {
        for b in objects {
            self.levels[b] += 1;
        }
        self.refresh(instance);
    }
}

/// Level sets of one agent's neighbourhood, keyed by local position.
pub(crate) struct AgentView {
    pub top: usize,
    /// neighbours on level `top`
    pub at_top: FixedBitSet,
    /// neighbours on level `top − 1` (empty when `top == 0`)
    pub below_top: FixedBitSet,
}

impl AgentView {
    pub fn new(instance: &Instance, levels: &LevelFunction, a: usize) -> Self {
        let nbrs = instance.neighbors(a);
        let top = levels.top(a);
        let mut at_top = FixedBitSet::with_capacity(nbrs.len());
        let mut below_top = FixedBitSet::with_capacity(nbrs.len());
        for (i, &b) in nbrs.iter().enumerate() {
            let l = levels.level(b);
            if l == top {
                at_top.insert(i);
            } else if l + 1 == top {
                below_top.insert(i);
            }
        }
        Self {
            top,
            at_top,
            below_top,
        }
    }
}

/// Membership of the neighbour at local position `j` of agent `a` in `E_ℓ`.
pub(crate) fn in_induced_local(
    instance: &Instance,
    levels: &LevelFunction,
    view: &AgentView,
    a: usize,
    j: usize,
) -> bool {
    let b = instance.neighbors(a)[j];
    let level = levels.level(b);
    let better = instance.better_than(a, j);
    if level == view.top {
        better.is_disjoint(&view.at_top)
    } else if level + 1 == view.top {
        view.at_top.is_subset(instance.worse_than(a, j)) && better.is_disjoint(&view.below_top)
    } else {
        false
    }
}

/// Local positions of `a`'s edges in `E_ℓ`, computed with whole-set
/// operations: undominated top-level neighbours, plus next-level neighbours
/// that beat the whole top level and are undominated on their own level.
pub(crate) fn induced_local_set(instance: &Instance, view: &AgentView, a: usize) -> FixedBitSet {
    let d = instance.neighbors(a).len();
    let mut out = FixedBitSet::with_capacity(d);
    for j in view.at_top.ones() {
        if instance.better_than(a, j).is_disjoint(&view.at_top) {
            out.insert(j);
        }
    }
    if view.below_top.count_ones(..) > 0 {
        let mut candidates = view.below_top.clone();
        for t in view.at_top.ones() {
            candidates.intersect_with(instance.better_than(a, t));
        }
        for j in candidates.ones() {
            if instance.better_than(a, j).is_disjoint(&view.below_top) {
                out.insert(j);
            }
        }
    }
    out
}

/// Whether `(a, b)` belongs to the subgraph induced by `levels`.
pub fn in_induced_subgraph(instance: &Instance, levels: &LevelFunction, a: usize, b: usize) -> bool {
    match instance.local_pos(a, b) {
        Some(j) => in_induced_local(instance, levels, &AgentView::new(instance, levels, a), a, j),
        None => false,
    }
}

/// The subgraph `G_ℓ` induced by `levels`, agents on the left.
pub fn induced_subgraph(instance: &Instance, levels: &LevelFunction) -> Result<BipartiteGraph> {
    let mut adj = Vec::with_capacity(instance.num_agents());
    for a in 0..instance.num_agents() {
        if instance.neighbors(a).is_empty() {
            return Err(Error::EmptyNeighborhood(instance.agent_name(a).to_string()));
        }
        let view = AgentView::new(instance, levels, a);
        let nbrs = instance.neighbors(a);
        adj.push(induced_local_set(instance, &view, a).ones().map(|j| nbrs[j]).collect());
    }
    Ok(BipartiteGraph::from_adjacency(instance.num_objects(), adj))
}

/// Integer dual vector over agents and objects.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualCertificate {
    pub agents: Vec<i64>,
    pub objects: Vec<i64>,
}

impl DualCertificate {
    pub fn zeros(instance: &Instance) -> Self {
        Self {
            agents: vec![0; instance.num_agents()],
            objects: vec![0; instance.num_objects()],
        }
    }

    pub fn sum(&self) -> i64 {
        self.agents.iter().sum::<i64>() + self.objects.iter().sum::<i64>()
    }
}

/// `α_b = −ℓ(b)` and `α_a = ℓ(M(a))`.
pub fn certificate_from_levels(
    instance: &Instance,
    m: &Matching,
    levels: &LevelFunction,
) -> Result<DualCertificate> {
    if !m.is_perfect() || m.num_agents() != instance.num_agents() {
        return Err(Error::NotPerfect);
    }
    let mut cert = DualCertificate::zeros(instance);
    for (a, b) in m.pairs() {
        if !in_induced_subgraph(instance, levels, a, b) {
            return Err(Error::NotInInducedSubgraph);
        }
        cert.agents[a] = levels.level(b) as i64;
    }
    for (b, alpha) in cert.objects.iter_mut().enumerate() {
        *alpha = -(levels.level(b) as i64);
    }
    Ok(cert)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NotFoundReason {
    /// Some level reached `n`: no popular assignment exists.
    LevelOverflow,
    /// Some level reached a cap below `n`.
    TruncationCap,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    Found {
        assignment: Matching,
        levels: LevelFunction,
        certificate: DualCertificate,
        iterations: usize,
    },
    NotFound {
        final_levels: LevelFunction,
        reason: NotFoundReason,
        iterations: usize,
    },
}

impl SolveOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, SolveOutcome::Found { .. })
    }

    pub fn assignment(&self) -> Option<&Matching> {
        match self {
            SolveOutcome::Found { assignment, .. } => Some(assignment),
            SolveOutcome::NotFound { .. } => None,
        }
    }

    pub fn certificate(&self) -> Option<&DualCertificate> {
        match self {
            SolveOutcome::Found { certificate, .. } => Some(certificate),
            SolveOutcome::NotFound { .. } => None,
        }
    }

    pub fn levels(&self) -> &LevelFunction {
        match self {
            SolveOutcome::Found { levels, .. } => levels,
            SolveOutcome::NotFound { final_levels, .. } => final_levels,
        }
    }

    /// Number of subgraph constructions performed.
    pub fn iterations(&self) -> usize {
        match self {
            SolveOutcome::Found { iterations, .. } | SolveOutcome::NotFound { iterations, .. } => {
                *iterations
            }
        }
    }
}

/// Knobs shared by every level-raising variant.
#[derive(Clone, Copy, Default)]
pub(crate) struct SearchConfig<'a> {
    /// Stop once some level reaches this value; `None` means `n`.
    pub max_level: Option<usize>,
    /// Edge ids excluded from every subgraph.
    pub forbidden: Option<&'a FixedBitSet>,
    /// When present, edges are admitted by λ-feasibility instead of `E_ℓ`.
    pub loads: Option<&'a LoadCapacity>,
}

/// Runs the level-raising loop; `observe` sees the levels and the maximum
/// matching of every iteration. The caller guarantees `|A| = |B|`.
pub(crate) fn search(
    instance: &Instance,
    config: SearchConfig<'_>,
    observe: &mut dyn FnMut(&LevelFunction, &Matching),
) -> SolveOutcome {
    let n = instance.num_agents();
    let cap = config.max_level.map_or(n, |c| c.min(n));
    let mut levels = LevelFunction::zeros(instance);
    let mut iterations = 0;
    // edges of the last matching that survive in the next subgraph seed it
    let mut previous = Matching::for_instance(instance);
    loop {
        if levels.max_level() >= cap {
            let reason = if levels.max_level() >= n {
                NotFoundReason::LevelOverflow
            } else {
                NotFoundReason::TruncationCap
            };
            return SolveOutcome::NotFound {
                final_levels: levels,
                reason,
                iterations,
            };
        }
        iterations += 1;
        let graph = admissible_graph(instance, &levels, config);
        let m = maximum_matching_from(&graph, &previous);
        observe(&levels, &m);
        if m.len() == n {
            let certificate = match config.loads {
                None => certificate_from_levels(instance, &m, &levels)
                    .expect("perfect matching inside the induced subgraph"),
                Some(loads) => loaded_certificate(instance, &m, &levels, loads),
            };
            return SolveOutcome::Found {
                assignment: m,
                levels,
                certificate,
                iterations,
            };
        }
        let unmatched: Vec<usize> = (0..instance.num_objects())
            .filter(|&b| m.object_partner(b).is_none())
            .collect();
        levels.raise(instance, unmatched);
        previous = m;
    }
}

fn admissible_graph(instance: &Instance, levels: &LevelFunction, config: SearchConfig<'_>) -> BipartiteGraph {
    let mut adj = vec![Vec::new(); instance.num_agents()];
    for (a, row) in adj.iter_mut().enumerate() {
        let view = AgentView::new(instance, levels, a);
        let edge_ids = instance.neighbor_edges(a);
        let nbrs = instance.neighbors(a);
        let allowed = |j: usize| !config.forbidden.is_some_and(|f| f.contains(edge_ids[j]));
        match config.loads {
            None => row.extend(induced_local_set(instance, &view, a).ones().filter(|&j| allowed(j)).map(|j| nbrs[j])),
            Some(loads) => row.extend(
                (0..nbrs.len())
                    .filter(|&j| allowed(j) && lambda_feasible_local(instance, levels, &view, a, j, loads.get(edge_ids[j])))
                    .map(|j| nbrs[j]),
            ),
        }
    }
    BipartiteGraph::from_adjacency(instance.num_objects(), adj)
}

/// `α_b = −ℓ(b)`, `α_a = −α_{M(a)} + λ(a, M(a))`.
fn loaded_certificate(
    instance: &Instance,
    m: &Matching,
    levels: &LevelFunction,
    loads: &LoadCapacity,
) -> DualCertificate {
    let mut cert = DualCertificate::zeros(instance);
    for (b, alpha) in cert.objects.iter_mut().enumerate() {
        *alpha = -(levels.level(b) as i64);
    }
    for (a, b) in m.pairs() {
        let e = instance.edge_id(a, b).expect("matched along an edge");
        cert.agents[a] = levels.level(b) as i64 + loads.get(e) as i64;
    }
    cert
}

pub(crate) fn require_perfect_matching(instance: &Instance) -> Result<()> {
    if instance.has_perfect_matching() {
        Ok(())
    } else {
        Err(Error::NoPerfectMatching)
    }
}

/// Finds a popular assignment or proves that none exists.
pub fn solve_popular_assignment(instance: &Instance) -> Result<SolveOutcome> {
    solve_truncated(instance, instance.num_agents())
}

/// The level search stopped as soon as some level reaches `max_level`.
pub fn solve_truncated(instance: &Instance, max_level: usize) -> Result<SolveOutcome> {
    require_perfect_matching(instance)?;
    let config = SearchConfig {
        max_level: Some(max_level),
        ..SearchConfig::default()
    };
    Ok(search(instance, config, &mut |_, _| {}))
}

/// As [`solve_truncated`], reporting each iteration's levels and matching.
pub fn solve_traced(
    instance: &Instance,
    max_level: usize,
    observe: &mut dyn FnMut(&LevelFunction, &Matching),
) -> Result<SolveOutcome> {
    require_perfect_matching(instance)?;
    let config = SearchConfig {
        max_level: Some(max_level),
        ..SearchConfig::default()
    };
    Ok(search(instance, config, observe))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{parse_instance, InstanceBuilder};

    fn section_2_1() -> Instance {
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

    fn unanimous(n: usize) -> Instance {
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

    #[test]
    fn zero_levels_keep_undominated_edges() {
        let inst = section_2_1();
        let levels = LevelFunction::zeros(&inst);
        let g = induced_subgraph(&inst, &levels).unwrap();
        for a in 0..3 {
            for (j, &b) in inst.neighbors(a).iter().enumerate() {
                let undominated = inst.better_than(a, j).is_clear();
                assert_eq!(g.neighbors(a).contains(&b), undominated);
            }
        }
    }

    #[test]
    fn partial_order_final_levels() {
        let inst = section_2_1();
        let out = solve_popular_assignment(&inst).unwrap();
        assert!(out.is_found());
        let o = |n: &str| inst.object(n).unwrap();
        let levels = out.levels();
        assert_eq!(
            (levels.level(o("x")), levels.level(o("y")), levels.level(o("z"))),
            (0, 0, 1)
        );
        let b = inst.agent("b").unwrap();
        assert!(!in_induced_subgraph(&inst, levels, b, o("y")));
    }

    #[test]
    fn figure_fragment() {
        // a1: objects at levels 2,1,0 ranked 2,3,1; a2: levels 1,0,0 ranked 2,1,1.
        let mut bld = InstanceBuilder::new();
        let a1 = bld.add_agent("a1").unwrap();
        let a2 = bld.add_agent("a2").unwrap();
        let o: Vec<usize> = (1..=4).map(|i| bld.add_object(&format!("o{i}")).unwrap()).collect();
        for &b in &o[..3] {
            bld.add_edge(a1, b).unwrap();
        }
        for &b in &o[1..] {
            bld.add_edge(a2, b).unwrap();
        }
        bld.tiers(a1, &[vec![o[2]], vec![o[0]], vec![o[1]]]);
        bld.tiers(a2, &[vec![o[2], o[3]], vec![o[1]]]);
        let inst = bld.build().unwrap();
        let levels = LevelFunction::new(&inst, vec![2, 1, 0, 0]);
        let g = induced_subgraph(&inst, &levels).unwrap();
        assert_eq!(g.neighbors(a1), &[o[0]]);
        let mut a2_edges = g.neighbors(a2).to_vec();
        a2_edges.sort();
        assert_eq!(a2_edges, vec![o[1], o[2], o[3]]);
    }

    #[test]
    fn unanimous_has_no_popular_assignment() {
        let out = solve_popular_assignment(&unanimous(3)).unwrap();
        assert!(matches!(
            out,
            SolveOutcome::NotFound {
                reason: NotFoundReason::LevelOverflow,
                ..
            }
        ));
        assert!(out.iterations() <= 9);
    }

    #[test]
    fn truncation_at_n_matches_full_run() {
        for inst in [unanimous(3), section_2_1()] {
            assert_eq!(
                solve_truncated(&inst, 3).unwrap(),
                solve_popular_assignment(&inst).unwrap()
            );
        }
    }

    #[test]
    fn truncation_cap_reason() {
        let out = solve_truncated(&unanimous(3), 1).unwrap();
        assert!(matches!(
            out,
            SolveOutcome::NotFound {
                reason: NotFoundReason::TruncationCap,
                ..
            }
        ));
    }

    #[test]
    fn certificate_of_partial_order_example() {
        let inst = section_2_1();
        let o = |n: &str| inst.object(n).unwrap();
        let a = |n: &str| inst.agent(n).unwrap();
        let m = Matching::from_pairs(&inst, [(a("a"), o("x")), (a("b"), o("z")), (a("c"), o("y"))])
            .unwrap();
        let levels = LevelFunction::new(&inst, vec![0, 0, 1]);
        let cert = certificate_from_levels(&inst, &m, &levels).unwrap();
        assert_eq!(cert.objects, vec![0, 0, -1]);
        assert_eq!(cert.agents, vec![0, 1, 0]);
        assert_eq!(cert.sum(), 0);
    }

    #[test]
    fn certificate_rejects_bad_input() {
        let inst = section_2_1();
        let levels = LevelFunction::new(&inst, vec![0, 0, 1]);
        let partial = Matching::from_pairs(&inst, [(0, 0)]).unwrap();
        assert!(matches!(
            certificate_from_levels(&inst, &partial, &levels),
            Err(Error::NotPerfect)
        ));
        // (b, y) is outside E_ℓ at these levels.
        let m = Matching::from_pairs(&inst, [(0, 0), (1, 1), (2, 2)]).unwrap();
        assert!(matches!(
            certificate_from_levels(&inst, &m, &levels),
            Err(Error::NotInInducedSubgraph)
        ));
    }

    #[test]
    fn requires_perfect_matching() {
        let inst = parse_instance(r#"{"agents":["a","b"],"objects":["x","y"],"edges":[["a","x"],["b","x"]]}"#)
            .unwrap();
        assert!(matches!(solve_popular_assignment(&inst), Err(Error::NoPerfectMatching)));
        assert!(matches!(
            induced_subgraph(
                &parse_instance(r#"{"agents":["a"],"objects":["x"],"edges":[]}"#).unwrap(),
                &LevelFunction::new(&parse_instance(r#"{"agents":["a"],"objects":["x"],"edges":[]}"#).unwrap(), vec![0])
            ),
            Err(Error::EmptyNeighborhood(_))
        ));
    }

    #[test]
    fn set_membership_matches_edge_membership() {
        use crate::gen::{generate, GenConfig, PrefStyle};
        for seed in 0..60u64 {
            let style = [PrefStyle::Strict, PrefStyle::Weak, PrefStyle::Partial][(seed % 3) as usize];
            let inst = generate(&GenConfig { agents: 6, objects: 7, density: 0.7, style, seed }).unwrap();
            let levels: Vec<usize> = (0..7).map(|b| (seed as usize * 7 + b * 3) % 3).collect();
            let levels = LevelFunction::new(&inst, levels);
            for a in 0..6 {
                let view = AgentView::new(&inst, &levels, a);
                let set = induced_local_set(&inst, &view, a);
                for j in 0..inst.neighbors(a).len() {
                    assert_eq!(set.contains(j), in_induced_local(&inst, &levels, &view, a, j), "seed {seed}");
                }
            }
        }
    }

    #[test]
    fn levels_rise_monotonically() {
        let inst = unanimous(4);
        let mut history: Vec<Vec<usize>> = Vec::new();
        solve_traced(&inst, 4, &mut |l, _| history.push(l.levels().to_vec())).unwrap();
        for w in history.windows(2) {
            assert!(w[0].iter().zip(&w[1]).all(|(x, y)| x <= y));
            assert!(w[0].iter().sum::<usize>() < w[1].iter().sum::<usize>());
        }
    }
}
