//! Ground truth: head-to-head votes, exact unpopularity margins (through
//! LP1 and by enumeration), dual-certificate checking and the classical
//! characterisation of popular matchings under weak rankings.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instance::{Instance, Matching, PrefComparison};
use crate::matching::{max_weight_perfect_matching, maximum_matching, BipartiteGraph, WeightedBipartiteGraph};
use crate::popular::DualCertificate;

/// Default agent cap for perfect-matching enumeration.
pub const PERFECT_CAP: usize = 8;
/// Default agent cap for enumerating all matchings.
pub const ALL_MATCHINGS_CAP: usize = 6;

/// `wt_M(a, b)`: +1 if `a` prefers `b` to `M(a)`, −1 if the reverse, else 0.
pub fn edge_weight(instance: &Instance, m: &Matching, a: usize, b: usize) -> Result<i64> {
    if !instance.has_edge(a, b) {
        return Err(instance.not_an_edge(a, b));
    }
    let current = m
        .agent_partner(a)
        .ok_or_else(|| Error::Unmatched(instance.agent_name(a).to_string()))?;
    Ok(match instance.compare(a, b, current)? {
        PrefComparison::Prefers => 1,
        PrefComparison::Dispreferred => -1,
        PrefComparison::Indifferent => 0,
    })
}

/// `vote^κ_a(N, M)`: how `a` votes in the election of `N` against `M`.
pub fn vote_with_penalty(instance: &Instance, a: usize, n: &Matching, m: &Matching, kappa: i64) -> i64 {
    match (n.agent_partner(a), m.agent_partner(a)) {
        (Some(x), Some(y)) => {
            if instance.prefers(a, x, y) {
                1
            } else if instance.prefers(a, y, x) {
                -1
            } else {
                0
            }
        }
        (Some(_), None) => kappa,
        (None, Some(_)) => -kappa,
        (None, None) => 0,
    }
}

/// `Δ(N, M)`: agents preferring `N` minus agents preferring `M`, where being
/// unmatched is worse than any object.
pub fn delta(instance: &Instance, n: &Matching, m: &Matching) -> i64 {
    penalty_delta(instance, n, m, 1)
}

/// `Σ_a vote^κ_a(N, M)`.
pub fn penalty_delta(instance: &Instance, n: &Matching, m: &Matching, kappa: i64) -> i64 {
    (0..instance.num_agents())
        .map(|a| vote_with_penalty(instance, a, n, m, kappa))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginReport {
    /// `μ(M) = max_N Δ(N, M)`
    pub margin: i64,
    /// An assignment attaining the maximum.
    pub witness: Matching,
}

fn require_assignment(instance: &Instance, m: &Matching) -> Result<()> {
    if m.num_agents() != instance.num_agents() || m.num_objects() != instance.num_objects() || !m.is_perfect() {
        return Err(Error::NotPerfect);
    }
    match m.pairs().find(|&(a, b)| !instance.has_edge(a, b)) {
        Some((a, b)) => Err(instance.not_an_edge(a, b)),
        None => Ok(()),
    }
}

/// The graph weighted by `wt_M`.
pub fn weight_graph(instance: &Instance, m: &Matching) -> Result<WeightedBipartiteGraph> {
    require_assignment(instance, m)?;
    let mut g = WeightedBipartiteGraph::new(instance.num_agents(), instance.num_objects());
    for &(a, b) in instance.edges() {
        g.add_edge(a, b, edge_weight(instance, m, a, b)?);
    }
    Ok(g)
}

/// `μ(M)` as the optimum of LP1, solved as a maximum-weight perfect matching.
pub fn unpopularity_margin(instance: &Instance, m: &Matching) -> Result<MarginReport> {
    let g = weight_graph(instance, m)?;
    let (witness, margin) = max_weight_perfect_matching(&g)?;
    Ok(MarginReport { margin, witness })
}

pub fn is_popular(instance: &Instance, m: &Matching) -> Result<bool> {
    Ok(unpopularity_margin(instance, m)?.margin == 0)
}

/// `μ(M)` by trying every assignment; ties go to the first in enumeration order.
pub fn brute_force_margin(instance: &Instance, m: &Matching) -> Result<MarginReport> {
    brute_force_margin_capped(instance, m, PERFECT_CAP)
}

pub fn brute_force_margin_capped(instance: &Instance, m: &Matching, cap: usize) -> Result<MarginReport> {
    require_assignment(instance, m)?;
    let mut best: Option<MarginReport> = None;
    for n in enumerate_perfect_matchings_capped(instance, cap)? {
        let d = delta(instance, &n, m);
        if best.as_ref().map_or(true, |b| d > b.margin) {
            best = Some(MarginReport { margin: d, witness: n });
        }
    }
    // M itself is enumerated, so the maximum is at least Δ(M, M) = 0.
    Ok(best.expect("M is a perfect matching"))
}

/// Whether no assignment beats `m`, stopping at the first that does.
pub fn brute_force_is_popular(instance: &Instance, m: &Matching) -> Result<bool> {
    require_assignment(instance, m)?;
    for n in enumerate_perfect_matchings(instance)? {
        if delta(instance, &n, m) > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Depth-first enumeration of matchings, agent by agent in index order and
/// neighbours in adjacency order; an agent's "unmatched" option comes last.
pub struct MatchingEnumerator<'a> {
    instance: &'a Instance,
    perfect: bool,
    /// next option to try per agent: neighbour positions, then `deg` for unmatched
    next: Vec<usize>,
    current: Matching,
    depth: usize,
    started: bool,
    done: bool,
}

impl<'a> MatchingEnumerator<'a> {
    fn new(instance: &'a Instance, perfect: bool) -> Self {
        let n = instance.num_agents();
        Self {
            instance,
            perfect,
            next: vec![0; n],
            current: Matching::for_instance(instance),
            depth: 0,
            started: false,
            done: perfect && n != instance.num_objects(),
        }
    }

    fn backtrack(&mut self) -> bool {
        if self.depth == 0 {
            return false;
        }
        self.depth -= 1;
        self.current.remove_agent(self.depth);
        true
    }
}

impl Iterator for MatchingEnumerator<'_> {
    type Item = Matching;

    fn next(&mut self) -> Option<Matching> {
        if self.done {
            return None;
        }
        if self.started && !self.backtrack() {
            self.done = true;
            return None;
        }
        self.started = true;
        let n = self.instance.num_agents();
        loop {
            if self.depth == n {
                return Some(self.current.clone());
            }
            let a = self.depth;
            let nbrs = self.instance.neighbors(a);
            let options = nbrs.len() + usize::from(!self.perfect);
            let mut chosen = None;
            while self.next[a] < options {
                let opt = self.next[a];
                self.next[a] += 1;
                if opt == nbrs.len() || self.current.object_partner(nbrs[opt]).is_none() {
                    chosen = Some(opt);
                    break;
                }
            }
            match chosen {
                Some(opt) => {
                    if opt < nbrs.len() {
                        self.current.insert(a, nbrs[opt]);
                    }
                    self.depth += 1;
                    if self.depth < n {
                        self.next[self.depth] = 0;
                    }
                }
                None => {
                    if !self.backtrack() {
                        self.done = true;
                        return None;
                    }
                }
            }
        }
    }
}

fn check_cap(instance: &Instance, cap: usize) -> Result<()> {
    let size = instance.num_agents();
    if size > cap {
        Err(Error::CapExceeded { size, cap })
    } else {
        Ok(())
    }
}

/// Every perfect matching exactly once, in a fixed order.
pub fn enumerate_perfect_matchings(instance: &Instance) -> Result<MatchingEnumerator<'_>> {
    enumerate_perfect_matchings_capped(instance, PERFECT_CAP)
}

pub fn enumerate_perfect_matchings_capped(instance: &Instance, cap: usize) -> Result<MatchingEnumerator<'_>> {
    check_cap(instance, cap)?;
    Ok(MatchingEnumerator::new(instance, true))
}

/// Every matching (including the empty one) exactly once.
pub fn enumerate_matchings(instance: &Instance) -> Result<MatchingEnumerator<'_>> {
    enumerate_matchings_capped(instance, ALL_MATCHINGS_CAP)
}

pub fn enumerate_matchings_capped(instance: &Instance, cap: usize) -> Result<MatchingEnumerator<'_>> {
    check_cap(instance, cap)?;
    Ok(MatchingEnumerator::new(instance, false))
}

/// No matching `N` has a positive penalty-`κ` vote sum against `m`.
pub fn is_popular_with_penalty(instance: &Instance, m: &Matching, kappa: i64) -> Result<bool> {
    for n in enumerate_matchings(instance)? {
        if penalty_delta(instance, &n, m, kappa) > 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Popularity among all matchings, not only assignments.
pub fn is_popular_matching(instance: &Instance, m: &Matching) -> Result<bool> {
    is_popular_with_penalty(instance, m, 1)
}

/// Minimum `μ` over all assignments and an assignment attaining it, by
/// enumeration. `None` if the instance has no assignment.
pub fn min_margin_brute_force(instance: &Instance) -> Result<Option<MarginReport>> {
    let mut best: Option<MarginReport> = None;
    for m in enumerate_perfect_matchings(instance)? {
        let margin = unpopularity_margin(instance, &m)?.margin;
        if best.as_ref().map_or(true, |b| margin < b.margin) {
            best = Some(MarginReport { margin, witness: m });
        }
    }
    Ok(best)
}

/// Minimum `μ` over all assignments, enumerating them only up to swaps of
/// interchangeable agents (same neighbours, same preferences), which leave
/// `μ` unchanged. Fails if more than `budget` representatives are visited.
pub fn min_margin_up_to_symmetry(instance: &Instance, budget: usize) -> Result<Option<MarginReport>> {
    let n = instance.num_agents();
    if n != instance.num_objects() || !instance.has_perfect_matching() {
        return Ok(None);
    }
    // previous member of each agent's class, if any
    let mut class_prev = vec![None; n];
    let mut seen: HashMap<(Vec<usize>, Vec<(usize, usize)>), usize> = HashMap::new();
    for a in 0..n {
        let mut nbrs = instance.neighbors(a).to_vec();
        nbrs.sort_unstable();
        let mut pairs = instance.preference_pairs(a);
        pairs.sort_unstable();
        if let Some(prev) = seen.insert((nbrs, pairs), a) {
            class_prev[a] = Some(prev);
        }
    }
    let mut state = SymmetricSearch {
        instance,
        class_prev,
        current: Matching::for_instance(instance),
        best: None,
        visited: 0,
        budget,
    };
    state.descend(0)?;
    Ok(state.best)
}

struct SymmetricSearch<'a> {
    instance: &'a Instance,
    class_prev: Vec<Option<usize>>,
    current: Matching,
    best: Option<MarginReport>,
    visited: usize,
    budget: usize,
}

impl SymmetricSearch<'_> {
    fn completable(&self, from: usize) -> bool {
        let n = self.instance.num_agents();
        let mut g = BipartiteGraph::new(n - from, self.instance.num_objects());
        for a in from..n {
            for &b in self.instance.neighbors(a) {
                if self.current.object_partner(b).is_none() {
                    g.add_edge(a - from, b);
                }
            }
        }
        maximum_matching(&g).len() == n - from
    }

    fn descend(&mut self, a: usize) -> Result<()> {
        let n = self.instance.num_agents();
        if a == n {
            self.visited += 1;
            if self.visited > self.budget {
                return Err(Error::CapExceeded {
                    size: self.visited,
                    cap: self.budget,
                });
            }
            let margin = unpopularity_margin(self.instance, &self.current)?.margin;
            if self.best.as_ref().map_or(true, |b| margin < b.margin) {
                self.best = Some(MarginReport {
                    margin,
                    witness: self.current.clone(),
                });
            }
            return Ok(());
        }
        // Class members take objects in increasing index order.
        let floor = self.class_prev[a].and_then(|p| self.current.agent_partner(p));
        for &b in self.instance.neighbors(a) {
            if floor.is_some_and(|f| b <= f) || self.current.object_partner(b).is_some() {
                continue;
            }
            self.current.insert(a, b);
            if self.completable(a + 1) {
                self.descend(a + 1)?;
            }
            self.current.remove_agent(a);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertificateViolation {
    NotPerfect,
    WrongLength,
    /// `α_a + α_b < wt_M(a, b)`
    Infeasible { agent: usize, object: usize },
    AgentOutOfRange { agent: usize, value: i64 },
    ObjectOutOfRange { object: usize, value: i64 },
    /// `Σα` differs from 0 (when `k = 0`) or exceeds `k`
    Sum { sum: i64, k: i64 },
    /// A matched edge with `α_a + α_b ≠ 0` when `k = 0`
    NotTight { agent: usize, object: usize },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CertificateReport {
    pub violations: Vec<CertificateViolation>,
}

impl CertificateReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks `α` as a certificate that `μ(M) ≤ k`: LP2 feasibility, the integer
/// ranges (`α_a ≤ n−1` for `k = 0`, `α_a ≤ n` otherwise; always
/// `−(n−1) ≤ α_b ≤ 0`), `Σα = 0` or `Σα ≤ k`, and for `k = 0` tightness of
/// every matched edge. For `k > 0` the matched-edge loads `α_a + α_{M(a)}`
/// sum to `Σα`, so the sum bound is the load bound.
pub fn verify_certificate(instance: &Instance, m: &Matching, alpha: &DualCertificate, k: i64) -> CertificateReport {
    let mut violations = Vec::new();
    if require_assignment(instance, m).is_err() {
        violations.push(CertificateViolation::NotPerfect);
        return CertificateReport { violations };
    }
    if alpha.agents.len() != instance.num_agents() || alpha.objects.len() != instance.num_objects() {
        violations.push(CertificateViolation::WrongLength);
        return CertificateReport { violations };
    }
    let n = instance.num_agents() as i64;
    for &(a, b) in instance.edges() {
        let wt = edge_weight(instance, m, a, b).expect("assignment checked");
        if alpha.agents[a] + alpha.objects[b] < wt {
            violations.push(CertificateViolation::Infeasible { agent: a, object: b });
        }
    }
    let agent_max = if k == 0 { n - 1 } else { n };
    for (a, &v) in alpha.agents.iter().enumerate() {
        if v < 0 || v > agent_max {
            violations.push(CertificateViolation::AgentOutOfRange { agent: a, value: v });
        }
    }
    for (b, &v) in alpha.objects.iter().enumerate() {
        if v > 0 || v < -(n - 1) {
            violations.push(CertificateViolation::ObjectOutOfRange { object: b, value: v });
        }
    }
    let sum = alpha.sum();
    if (k == 0 && sum != 0) || sum > k {
        violations.push(CertificateViolation::Sum { sum, k });
    }
    if k == 0 {
        for (a, b) in m.pairs() {
            if alpha.agents[a] + alpha.objects[b] != 0 {
                violations.push(CertificateViolation::NotTight { agent: a, object: b });
            }
        }
    }
    CertificateReport { violations }
}

/// First-choice edges `E₁` and second-choice edges `E₂`, as edge ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CharacterizationSets {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

/// `E₁` = undominated edges; `E₂` = edges whose addition to `G[E₁]` enlarges
/// its maximum matching ("critical") and that no critical edge at the same
/// agent dominates. Applies to any instance; only under weak rankings (with
/// last resorts added) do the sets characterise popular matchings.
pub fn characterize_weak_rankings(instance: &Instance) -> CharacterizationSets {
    let mut first = Vec::new();
    let mut g1 = BipartiteGraph::new(instance.num_agents(), instance.num_objects());
    for a in 0..instance.num_agents() {
        for (j, &b) in instance.neighbors(a).iter().enumerate() {
            if instance.better_than(a, j).is_clear() {
                first.push(instance.neighbor_edges(a)[j]);
                g1.add_edge(a, b);
            }
        }
    }
    first.sort_unstable();
    let base = maximum_matching(&g1).len();
    let is_critical = |e: usize| {
        let (a, b) = instance.edge(e);
        let mut g = g1.clone();
        g.add_edge(a, b);
        maximum_matching(&g).len() > base
    };
    let critical: Vec<bool> = (0..instance.num_edges())
        .map(|e| first.binary_search(&e).is_err() && is_critical(e))
        .collect();
    let mut second = Vec::new();
    for a in 0..instance.num_agents() {
        let edges = instance.neighbor_edges(a);
        for (j, &e) in edges.iter().enumerate() {
            if critical[e] && !instance.better_than(a, j).ones().any(|i| critical[edges[i]]) {
                second.push(e);
            }
        }
    }
    second.sort_unstable();
    CharacterizationSets { first, second }
}

/// `M ⊆ E₁ ∪ E₂`, `M` matches every agent, and `M ∩ E₁` is a maximum
/// matching of `G[E₁]`. No check on the kind of preferences.
pub fn aikm_conditions_hold(instance: &Instance, m: &Matching) -> bool {
    let sets = characterize_weak_rankings(instance);
    let in_first = |e: usize| sets.first.binary_search(&e).is_ok();
    let in_second = |e: usize| sets.second.binary_search(&e).is_ok();
    let mut matched_first = 0;
    for a in 0..instance.num_agents() {
        let Some(b) = m.agent_partner(a) else {
            return false;
        };
        let Some(e) = instance.edge_id(a, b) else {
            return false;
        };
        if in_first(e) {
            matched_first += 1;
        } else if !in_second(e) {
            return false;
        }
    }
    let mut g1 = BipartiteGraph::new(instance.num_agents(), instance.num_objects());
    for &e in &sets.first {
        let (a, b) = instance.edge(e);
        g1.add_edge(a, b);
    }
    matched_first == maximum_matching(&g1).len()
}

/// Popularity of `m` among all matchings via the weak-ranking
/// characterisation. The caller adds last-resort objects beforehand.
pub fn is_popular_weak(instance: &Instance, m: &Matching) -> Result<bool> {
    if let Some(a) = (0..instance.num_agents()).find(|&a| !instance.is_weak_ranking(a)) {
        return Err(Error::NotWeakRanking(instance.agent_name(a).to_string()));
    }
    Ok(aikm_conditions_hold(instance, m))
}
