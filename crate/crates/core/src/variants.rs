//! Constrained and relaxed versions of the level search: forced and forbidden
//! edges, assignments with bounded unpopularity margin, and popularity with
//! penalty votes.

use std::collections::BTreeMap;

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{Instance, Matching};
use crate::popular::{
    require_perfect_matching, search, solve_truncated, AgentView, DualCertificate, LevelFunction,
    SearchConfig, SolveOutcome,
};

/// Forced edges `F⁺` and forbidden edges `F⁻`, stored as edge ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EdgeConstraints {
    forced: Vec<usize>,
    forbidden: Vec<usize>,
}

impl EdgeConstraints {
    /// Validates that both sets are edges, that they are disjoint and that
    /// the forced edges form a matching.
    pub fn new(
        instance: &Instance,
        forced: &[(usize, usize)],
        forbidden: &[(usize, usize)],
    ) -> Result<Self> {
        let ids = |pairs: &[(usize, usize)]| -> Result<Vec<usize>> {
            let mut ids = pairs
                .iter()
                .map(|&(a, b)| instance.edge_id(a, b).ok_or_else(|| instance.not_an_edge(a, b)))
                .collect::<Result<Vec<_>>>()?;
            ids.sort_unstable();
            ids.dedup();
            Ok(ids)
        };
        let forced = ids(forced)?;
        let forbidden = ids(forbidden)?;
        if let Some(&e) = forced.iter().find(|e| forbidden.binary_search(e).is_ok()) {
            let (a, b) = instance.edge(e);
            return Err(Error::InvalidConstraints(format!(
                "({}, {}) is both forced and forbidden",
                instance.agent_name(a),
                instance.object_name(b)
            )));
        }
        let mut seen_agents = vec![false; instance.num_agents()];
        let mut seen_objects = vec![false; instance.num_objects()];
        for &e in &forced {
            let (a, b) = instance.edge(e);
            if std::mem::replace(&mut seen_agents[a], true) {
                return Err(Error::InvalidConstraints(format!(
                    "agent {} has two forced edges",
                    instance.agent_name(a)
                )));
            }
            if std::mem::replace(&mut seen_objects[b], true) {
                return Err(Error::InvalidConstraints(format!(
                    "object {} has two forced edges",
                    instance.object_name(b)
                )));
            }
        }
        Ok(Self { forced, forbidden })
    }

    pub fn from_named<S: AsRef<str>>(
        instance: &Instance,
        forced: &[(S, S)],
        forbidden: &[(S, S)],
    ) -> Result<Self> {
        let resolve = |pairs: &[(S, S)]| -> Result<Vec<(usize, usize)>> {
            pairs
                .iter()
                .map(|(a, b)| Ok((instance.agent(a.as_ref())?, instance.object(b.as_ref())?)))
                .collect()
        };
        Self::new(instance, &resolve(forced)?, &resolve(forbidden)?)
    }

    pub fn forced(&self) -> &[usize] {
        &self.forced
    }

    pub fn forbidden(&self) -> &[usize] {
        &self.forbidden
    }

    pub fn is_empty(&self) -> bool {
        self.forced.is_empty() && self.forbidden.is_empty()
    }

    /// Whether `m` contains every forced edge and no forbidden one.
    pub fn admits(&self, instance: &Instance, m: &Matching) -> bool {
        let holds = |e: usize| {
            let (a, b) = instance.edge(e);
            m.contains(a, b)
        };
        self.forced.iter().all(|&e| holds(e)) && !self.forbidden.iter().any(|&e| holds(e))
    }
}

/// `F⁻` plus every sibling of a forced edge, as sorted edge ids.
pub fn forced_to_forbidden(instance: &Instance, constraints: &EdgeConstraints) -> Vec<usize> {
    let set = forbidden_bitset(instance, constraints.forced(), constraints.forbidden());
    set.ones().collect()
}

fn forbidden_bitset(instance: &Instance, forced: &[usize], forbidden: &[usize]) -> FixedBitSet {
    let mut set = FixedBitSet::with_capacity(instance.num_edges());
    for &e in forbidden {
        set.insert(e);
    }
    for &e in forced {
        let (a, _) = instance.edge(e);
        for &sibling in instance.neighbor_edges(a) {
            if sibling != e {
                set.insert(sibling);
            }
        }
    }
    set
}

/// A popular assignment containing `F⁺` and avoiding `F⁻`, if one exists.
/// The result is popular among all assignments, not only the admissible ones.
pub fn solve_with_constraints(instance: &Instance, constraints: &EdgeConstraints) -> Result<SolveOutcome> {
    require_perfect_matching(instance)?;
    let forbidden = forbidden_bitset(instance, constraints.forced(), constraints.forbidden());
    let config = SearchConfig {
        forbidden: Some(&forbidden),
        ..SearchConfig::default()
    };
    Ok(search(instance, config, &mut |_, _| {}))
}

/// Sparse per-edge load `λ: E → ℕ`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadCapacity {
    loads: BTreeMap<usize, usize>,
}

impl LoadCapacity {
    pub fn new() -> Self {
        Self::default()
    }

    /// One unit of load per occurrence of an edge id.
    pub fn from_multiset(edges: impl IntoIterator<Item = usize>) -> Self {
        let mut out = Self::new();
        for e in edges {
            *out.loads.entry(e).or_insert(0) += 1;
        }
        out
    }

    pub fn get(&self, e: usize) -> usize {
        self.loads.get(&e).copied().unwrap_or(0)
    }

    pub fn set(&mut self, e: usize, load: usize) {
        if load == 0 {
            self.loads.remove(&e);
        } else {
            self.loads.insert(e, load);
        }
    }

    pub fn total(&self) -> usize {
        self.loads.values().sum()
    }

    /// Edges with positive load, ascending.
    pub fn overloaded(&self) -> impl Iterator<Item = usize> + '_ {
        self.loads.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.loads.iter().map(|(&e, &l)| (e, l))
    }
}

pub(crate) fn lambda_feasible_local(
    instance: &Instance,
    levels: &LevelFunction,
    view: &AgentView,
    a: usize,
    j: usize,
    lambda: usize,
) -> bool {
    let b = instance.neighbors(a)[j];
    let shifted = levels.level(b) + lambda;
    let better = instance.better_than(a, j);
    if shifted > view.top {
        true
    } else if shifted == view.top {
        better.is_disjoint(&view.at_top)
    } else if shifted + 1 == view.top {
        view.at_top.is_subset(instance.worse_than(a, j)) && better.is_disjoint(&view.below_top)
    } else {
        false
    }
}

/// Whether the edge `(a, b)` is `λ`-feasible under `levels`. Non-edges are
/// never feasible.
pub fn lambda_feasible(instance: &Instance, levels: &LevelFunction, a: usize, b: usize, lambda: usize) -> bool {
    match instance.local_pos(a, b) {
        Some(j) => {
            let view = AgentView::new(instance, levels, a);
            lambda_feasible_local(instance, levels, &view, a, j, lambda)
        }
        None => false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum KMarginOutcome {
    Found {
        assignment: Matching,
        loads: LoadCapacity,
        levels: LevelFunction,
        certificate: DualCertificate,
        /// `Σα` of the certificate; the true margin may be smaller.
        certified_margin_bound: i64,
        /// Branches tried up to and including the successful one.
        branches: usize,
    },
    NotFound {
        branches: usize,
    },
}

impl KMarginOutcome {
    pub fn is_found(&self) -> bool {
        matches!(self, KMarginOutcome::Found { .. })
    }

    pub fn assignment(&self) -> Option<&Matching> {
        match self {
            KMarginOutcome::Found { assignment, .. } => Some(assignment),
            KMarginOutcome::NotFound { .. } => None,
        }
    }

    pub fn branches(&self) -> usize {
        match self {
            KMarginOutcome::Found { branches, .. } | KMarginOutcome::NotFound { branches } => *branches,
        }
    }
}

/// Number of multisets of at most `k` elements drawn from `m` edges.
pub fn branch_count(m: usize, k: usize) -> u128 {
    // C(m+t−1, t) built incrementally: c_t = c_{t−1}·(m+t−1)/t.
    let mut total = 0u128;
    let mut c = 1u128;
    for t in 0..=k {
        if t > 0 {
            c = c * (m + t - 1) as u128 / t as u128;
        }
        total += c;
    }
    total
}

/// Load functions with `Σλ ≤ k`, by total load and then lexicographically by
/// the sorted edge-id vector.
pub fn load_functions(m: usize, k: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..=k).flat_map(move |t| Multisets::new(m, t))
}

/// Non-decreasing sequences of length `t` over `0..m`, lexicographic.
struct Multisets {
    m: usize,
    current: Option<Vec<usize>>,
}

impl Multisets {
    fn new(m: usize, t: usize) -> Self {
        let current = if t == 0 || m > 0 { Some(vec![0; t]) } else { None };
        Self { m, current }
    }
}

impl Iterator for Multisets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.take()?;
        let mut next = out.clone();
        let mut i = next.len();
        while i > 0 {
            i -= 1;
            if next[i] + 1 < self.m {
                let v = next[i] + 1;
                for x in &mut next[i..] {
                    *x = v;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(out)
    }
}

fn run_branch(instance: &Instance, multiset: &[usize]) -> Option<(Matching, LoadCapacity, LevelFunction, DualCertificate)> {
    let loads = LoadCapacity::from_multiset(multiset.iter().copied());
    let overloaded: Vec<usize> = loads.overloaded().collect();
    let forbidden = forbidden_bitset(instance, &overloaded, &[]);
    let config = SearchConfig {
        forbidden: Some(&forbidden),
        loads: Some(&loads),
        ..SearchConfig::default()
    };
    match search(instance, config, &mut |_, _| {}) {
        SolveOutcome::Found {
            assignment,
            levels,
            certificate,
            ..
        } => Some((assignment, loads, levels, certificate)),
        SolveOutcome::NotFound { .. } => None,
    }
}

fn found(
    (assignment, loads, levels, certificate): (Matching, LoadCapacity, LevelFunction, DualCertificate),
    branches: usize,
) -> KMarginOutcome {
    KMarginOutcome::Found {
        certified_margin_bound: certificate.sum(),
        assignment,
        loads,
        levels,
        certificate,
        branches,
    }
}

/// An assignment with unpopularity margin at most `k`, if one exists.
pub fn solve_k_margin(instance: &Instance, k: usize) -> Result<KMarginOutcome> {
    require_perfect_matching(instance)?;
    let mut branches = 0;
    for multiset in load_functions(instance.num_edges(), k) {
        branches += 1;
        if let Some(hit) = run_branch(instance, &multiset) {
            return Ok(found(hit, branches));
        }
    }
    Ok(KMarginOutcome::NotFound { branches })
}

/// As [`solve_k_margin`], spreading branches over `workers` threads. The
/// reported branch is the first successful one in enumeration order, so the
/// result equals the sequential one.
pub fn solve_k_margin_parallel(instance: &Instance, k: usize, workers: usize) -> Result<KMarginOutcome> {
    require_perfect_matching(instance)?;
    let all: Vec<Vec<usize>> = load_functions(instance.num_edges(), k).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameters(e.to_string()))?;
    let hit = pool.install(|| {
        all.par_iter()
            .enumerate()
            .find_map_first(|(i, multiset)| run_branch(instance, multiset).map(|h| (i, h)))
    });
    Ok(match hit {
        Some((i, h)) => found(h, i + 1),
        None => KMarginOutcome::NotFound { branches: all.len() },
    })
}

/// An assignment popular with penalty `κ` against all matchings, found by the
/// `(κ+1)`-level truncation.
pub fn solve_penalty_assignment(instance: &Instance, kappa: usize) -> Result<SolveOutcome> {
    if kappa == 0 {
        return Err(Error::InvalidParameters("penalty must be at least 1".into()));
    }
    solve_truncated(instance, kappa + 1)
}
