//! Bipartite matching kernels: Hopcroft–Karp for maximum cardinality and a
//! shortest-augmenting-path Hungarian method for maximum-weight perfect
//! matching. Both are deterministic for a fixed adjacency order.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::instance::{Instance, Matching};

/// Adjacency-list bipartite graph over `0..left` and `0..right`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BipartiteGraph {
    right: usize,
    adj: Vec<Vec<usize>>,
}

impl BipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        Self {
            right,
            adj: vec![Vec::new(); left],
        }
    }

    /// The full edge set of an instance, agents on the left.
    pub fn from_instance(instance: &Instance) -> Self {
        Self {
            right: instance.num_objects(),
            adj: (0..instance.num_agents())
                .map(|a| instance.neighbors(a).to_vec())
                .collect(),
        }
    }

    /// From adjacency lists that are already duplicate-free.
    pub(crate) fn from_adjacency(right: usize, adj: Vec<Vec<usize>>) -> Self {
        debug_assert!(adj.iter().flatten().all(|&v| v < right));
        Self { right, adj }
    }

    /// Panics on out-of-range indices; duplicates are ignored.
    pub fn add_edge(&mut self, u: usize, v: usize) {
        assert!(u < self.adj.len() && v < self.right, "edge ({u}, {v}) out of range");
        if !self.adj[u].contains(&v) {
            self.adj[u].push(v);
        }
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.adj[u]
    }

    pub fn num_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }
}

/// Bipartite graph with an integer weight on every edge.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct WeightedBipartiteGraph {
    right: usize,
    adj: Vec<Vec<(usize, i64)>>,
}

impl WeightedBipartiteGraph {
    pub fn new(left: usize, right: usize) -> Self {
        Self {
            right,
            adj: vec![Vec::new(); left],
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: i64) {
        assert!(u < self.adj.len() && v < self.right, "edge ({u}, {v}) out of range");
        match self.adj[u].iter_mut().find(|(w, _)| *w == v) {
            Some(slot) => slot.1 = weight,
            None => self.adj[u].push((v, weight)),
        }
    }

    pub fn left(&self) -> usize {
        self.adj.len()
    }

    pub fn right(&self) -> usize {
        self.right
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, i64)] {
        &self.adj[u]
    }

    pub fn weight(&self, u: usize, v: usize) -> Option<i64> {
        self.adj[u].iter().find(|(w, _)| *w == v).map(|&(_, wt)| wt)
    }

    pub fn unweighted(&self) -> BipartiteGraph {
        BipartiteGraph {
            right: self.right,
            adj: self
                .adj
                .iter()
                .map(|row| row.iter().map(|&(v, _)| v).collect())
                .collect(),
        }
    }
}

const UNREACHED: u32 = u32::MAX;

/// Maximum-cardinality matching by Hopcroft–Karp, O(m√n).
pub fn maximum_matching(g: &BipartiteGraph) -> Matching {
    maximum_matching_from(g, &Matching::empty(g.left(), g.right()))
}

/// Hopcroft–Karp started from the pairs of `initial` that are edges of `g`.
pub fn maximum_matching_from(g: &BipartiteGraph, initial: &Matching) -> Matching {
    let mut left_to = vec![None; g.left()];
    let mut right_to = vec![None; g.right()];
    for (u, v) in initial.pairs() {
        if u < g.left() && v < g.right() && right_to[v].is_none() && g.neighbors(u).contains(&v) {
            left_to[u] = Some(v);
            right_to[v] = Some(u);
        }
    }
    let mut dist = vec![UNREACHED; g.left()];
    let mut queue = VecDeque::new();
    loop {
        if !layer(g, &left_to, &right_to, &mut dist, &mut queue) {
            break;
        }
        let mut next = vec![0usize; g.left()];
        let mut augmented = false;
        for u in 0..g.left() {
            if left_to[u].is_none() && augment(u, g, &mut dist, &mut next, &mut left_to, &mut right_to) {
                augmented = true;
            }
        }
        if !augmented {
            break;
        }
    }
    let mut m = Matching::empty(g.left(), g.right());
    for (u, v) in left_to.iter().enumerate() {
        if let Some(v) = *v {
            m.insert(u, v);
        }
    }
    m
}

/// BFS from all free left vertices; returns whether a free right vertex is
/// reachable.
fn layer(
    g: &BipartiteGraph,
    left_to: &[Option<usize>],
    right_to: &[Option<usize>],
    dist: &mut [u32],
    queue: &mut VecDeque<usize>,
) -> bool {
    queue.clear();
    for u in 0..g.left() {
        if left_to[u].is_none() {
            dist[u] = 0;
            queue.push_back(u);
        } else {
            dist[u] = UNREACHED;
        }
    }
    let mut found = false;
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            match right_to[v] {
                None => found = true,
                Some(w) if dist[w] == UNREACHED => {
                    dist[w] = dist[u] + 1;
                    queue.push_back(w);
                }
                _ => {}
            }
        }
    }
    found
}

fn augment(
    u: usize,
    g: &BipartiteGraph,
    dist: &mut [u32],
    next: &mut [usize],
    left_to: &mut [Option<usize>],
    right_to: &mut [Option<usize>],
) -> bool {
    while next[u] < g.neighbors(u).len() {
        let v = g.neighbors(u)[next[u]];
        next[u] += 1;
        let ok = match right_to[v] {
            None => true,
            Some(w) => dist[w] == dist[u] + 1 && augment(w, g, dist, next, left_to, right_to),
        };
        if ok {
            left_to[u] = Some(v);
            right_to[v] = Some(u);
            return true;
        }
    }
    dist[u] = UNREACHED;
    false
}

/// Maximum-weight perfect matching and its weight.
///
/// Missing edges are simply unavailable; if no perfect matching exists the
/// call fails with [`Error::NoPerfectMatching`].
pub fn max_weight_perfect_matching(g: &WeightedBipartiteGraph) -> Result<(Matching, i64)> {
    let n = g.left();
    if n != g.right() {
        return Err(Error::NoPerfectMatching);
    }
    // Minimise cost = −weight with potentials; 1-based rows/columns, column 0
    // is the virtual root of each Dijkstra phase.
    const INF: i64 = i64::MAX / 4;
    let mut row_pot = vec![0i64; n + 1];
    let mut col_pot = vec![0i64; n + 1];
    let mut col_row = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut cost = vec![vec![None; n + 1]; n + 1];
    for u in 0..n {
        for &(v, w) in g.neighbors(u) {
            cost[u + 1][v + 1] = Some(-w);
        }
    }

    for row in 1..=n {
        col_row[0] = row;
        let mut col = 0usize;
        let mut min_slack = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col] = true;
            let r = col_row[col];
            let mut delta = INF;
            let mut next_col = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                if let Some(c) = cost[r][j] {
                    let reduced = c - row_pot[r] - col_pot[j];
                    if reduced < min_slack[j] {
                        min_slack[j] = reduced;
                        way[j] = col;
                    }
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    next_col = j;
                }
            }
            if delta >= INF {
                return Err(Error::NoPerfectMatching);
            }
            for j in 0..=n {
                if used[j] {
                    row_pot[col_row[j]] += delta;
                    col_pot[j] -= delta;
                } else if min_slack[j] < INF {
                    // unreachable columns stay at INF so they are never picked
                    min_slack[j] -= delta;
                }
            }
            col = next_col;
            if col_row[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            col_row[col] = col_row[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }

    let mut m = Matching::empty(n, n);
    let mut total = 0;
    for j in 1..=n {
        let r = col_row[j];
        m.insert(r - 1, j - 1);
        total -= cost[r][j].expect("matched along an edge");
    }
    Ok((m, total))
}
