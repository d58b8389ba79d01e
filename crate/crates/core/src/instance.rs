//! Instance data model: agents, objects, edges and per-agent strict partial
//! orders over neighbouring objects.
//!
//! Preferences are stored transitively closed, one bitset row per neighbour,
//! so that domination queries during subgraph construction are O(1).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{maximum_matching, BipartiteGraph};

/// Outcome of comparing two neighbours from one agent's point of view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PrefComparison {
    Prefers,
    Dispreferred,
    Indifferent,
}

/// A bipartite instance with one-sided partial-order preferences.
///
/// Agents and objects are addressed by dense indices assigned in input
/// order. Neighbours of an agent additionally have a *local* position, the
/// index into [`Instance::neighbors`], which is what the preference bitsets
/// are keyed by.
#[derive(Clone, Debug)]
pub struct Instance {
    agents: Vec<String>,
    objects: Vec<String>,
    agent_index: HashMap<String, usize>,
    object_index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    edge_index: HashMap<(usize, usize), usize>,
    nbrs: Vec<Vec<usize>>,
    nbr_edges: Vec<Vec<usize>>,
    object_nbrs: Vec<Vec<usize>>,
    local: Vec<HashMap<usize, usize>>,
    // better[a][j]: local positions i with nbrs[a][i] preferred to nbrs[a][j]
    better: Vec<Vec<FixedBitSet>>,
    // worse[a][j]: local positions i with nbrs[a][j] preferred to nbrs[a][i]
    worse: Vec<Vec<FixedBitSet>>,
}

impl Instance {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn agent_name(&self, a: usize) -> &str {
        &self.agents[a]
    }

    pub fn object_name(&self, b: usize) -> &str {
        &self.objects[b]
    }

    pub fn agent_names(&self) -> &[String] {
        &self.agents
    }

    pub fn object_names(&self) -> &[String] {
        &self.objects
    }

    pub fn agent_id(&self, name: &str) -> Option<usize> {
        self.agent_index.get(name).copied()
    }

    pub fn object_id(&self, name: &str) -> Option<usize> {
        self.object_index.get(name).copied()
    }

    pub fn agent(&self, name: &str) -> Result<usize> {
        self.agent_id(name)
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn object(&self, name: &str) -> Result<usize> {
        self.object_id(name)
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    /// All edges in input order; the position is the edge id.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a, b)).copied()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edge_index.contains_key(&(a, b))
    }

    /// Neighbouring objects of agent `a`, in edge input order.
    pub fn neighbors(&self, a: usize) -> &[usize] {
        &self.nbrs[a]
    }

    /// Edge ids of agent `a`, parallel to [`Instance::neighbors`].
    pub fn neighbor_edges(&self, a: usize) -> &[usize] {
        &self.nbr_edges[a]
    }

    pub fn object_neighbors(&self, b: usize) -> &[usize] {
        &self.object_nbrs[b]
    }

    pub fn local_pos(&self, a: usize, b: usize) -> Option<usize> {
        self.local[a].get(&b).copied()
    }

    /// Local positions of neighbours that `a` strictly prefers to her
    /// neighbour at local position `j`.
    pub fn better_than(&self, a: usize, j: usize) -> &FixedBitSet {
        &self.better[a][j]
    }

    /// Local positions of neighbours that `a` ranks strictly below her
    /// neighbour at local position `j`.
    pub fn worse_than(&self, a: usize, j: usize) -> &FixedBitSet {
        &self.worse[a][j]
    }

    /// `b ≻_a c`; false whenever either object is not a neighbour of `a`.
    pub fn prefers(&self, a: usize, b: usize, c: usize) -> bool {
        match (self.local_pos(a, b), self.local_pos(a, c)) {
            (Some(i), Some(j)) => self.worse[a][i].contains(j),
            _ => false,
        }
    }

    pub fn compare(&self, a: usize, b: usize, c: usize) -> Result<PrefComparison> {
        let i = self.local_pos(a, b).ok_or_else(|| self.not_an_edge(a, b))?;
        let j = self.local_pos(a, c).ok_or_else(|| self.not_an_edge(a, c))?;
        Ok(if self.worse[a][i].contains(j) {
            PrefComparison::Prefers
        } else if self.worse[a][j].contains(i) {
            PrefComparison::Dispreferred
        } else {
            PrefComparison::Indifferent
        })
    }

    pub(crate) fn not_an_edge(&self, a: usize, b: usize) -> Error {
        Error::NotAnEdge {
            agent: self.agents[a].clone(),
            object: self.objects[b].clone(),
        }
    }

    /// The closed preference relation of `a` as object-index pairs `(b, c)`
    /// meaning `b ≻_a c`.
    pub fn preference_pairs(&self, a: usize) -> Vec<(usize, usize)> {
        let nbrs = &self.nbrs[a];
        let mut pairs = Vec::new();
        for (i, row) in self.worse[a].iter().enumerate() {
            for j in row.ones() {
                pairs.push((nbrs[i], nbrs[j]));
            }
        }
        pairs
    }

    /// Whether indifference is transitive for agent `a`.
    pub fn is_weak_ranking(&self, a: usize) -> bool {
        let d = self.nbrs[a].len();
        for i in 0..d {
            for j in (i + 1)..d {
                let indifferent =
                    !self.worse[a][i].contains(j) && !self.worse[a][j].contains(i);
                if indifferent
                    && (self.better[a][i] != self.better[a][j]
                        || self.worse[a][i] != self.worse[a][j])
                {
                    return false;
                }
            }
        }
        true
    }

    pub fn has_weak_rankings(&self) -> bool {
        (0..self.num_agents()).all(|a| self.is_weak_ranking(a))
    }

    /// Whether `a` ranks her neighbours in a total strict order.
    pub fn is_strict_ranking(&self, a: usize) -> bool {
        let d = self.nbrs[a].len();
        self.worse[a].iter().map(|row| row.count_ones(..)).sum::<usize>() == d * d.saturating_sub(1) / 2
    }

    /// Indifference classes of a weak ranking, best first, as object indices.
    /// `None` if the preferences of `a` are not a weak ranking.
    pub fn tiers(&self, a: usize) -> Option<Vec<Vec<usize>>> {
        if !self.is_weak_ranking(a) {
            return None;
        }
        let mut by_rank: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (i, &b) in self.nbrs[a].iter().enumerate() {
            by_rank
                .entry(self.better[a][i].count_ones(..))
                .or_default()
                .push(b);
        }
        Some(by_rank.into_values().collect())
    }

    /// The covering pairs of `a`'s relation: `b ≻ c` with nothing strictly
    /// between them. Their closure is the full relation.
    pub fn covering_pairs(&self, a: usize) -> Vec<(usize, usize)> {
        let nbrs = &self.nbrs[a];
        let mut pairs = Vec::new();
        for (i, row) in self.worse[a].iter().enumerate() {
            let mut cover = row.clone();
            for k in row.ones() {
                cover.difference_with(&self.worse[a][k]);
            }
            pairs.extend(cover.ones().map(|j| (nbrs[i], nbrs[j])));
        }
        pairs
    }

    /// Serializes weak rankings as tiers and other relations as covering
    /// pairs, so a strict ranking over `d` objects takes `d` names, not
    /// `d²/2` pairs.
    pub fn to_doc(&self) -> InstanceDoc {
        let name = |b: usize| self.objects[b].clone();
        let mut preferences = BTreeMap::new();
        for a in 0..self.num_agents() {
            let doc = match self.tiers(a) {
                Some(tiers) if tiers.len() > 1 => {
                    PreferenceDoc::Tiers(tiers.into_iter().map(|t| t.into_iter().map(name).collect()).collect())
                }
                Some(_) => continue,
                None => PreferenceDoc::Pairs(
                    self.covering_pairs(a).into_iter().map(|(b, c)| (name(b), name(c))).collect(),
                ),
            };
            preferences.insert(self.agents[a].clone(), doc);
        }
        InstanceDoc {
            agents: self.agents.clone(),
            objects: self.objects.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.agents[a].clone(), self.objects[b].clone()))
                .collect(),
            preferences,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("instance serializes")
    }

    /// Builds a validated instance from a parsed document.
    pub fn from_doc(doc: &InstanceDoc) -> Result<Self> {
        let report = validate(doc);
        if !report.is_valid() {
            return Err(Error::Invalid(
                report.violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        let mut builder = InstanceBuilder::new();
        for name in &doc.agents {
            builder.add_agent(name)?;
        }
        for name in &doc.objects {
            builder.add_object(name)?;
        }
        for (a, b) in &doc.edges {
            let (a, b) = (builder.agent(a)?, builder.object(b)?);
            builder.add_edge(a, b)?;
        }
        for (agent, pref) in &doc.preferences {
            let a = builder.agent(agent)?;
            match pref {
                PreferenceDoc::Pairs(pairs) => {
                    for (b, c) in pairs {
                        let (b, c) = (builder.object(b)?, builder.object(c)?);
                        builder.prefer(a, b, c);
                    }
                }
                PreferenceDoc::Tiers(tiers) => {
                    let tiers = tiers
                        .iter()
                        .map(|t| t.iter().map(|b| builder.object(b)).collect::<Result<Vec<_>>>())
                        .collect::<Result<Vec<_>>>()?;
                    builder.tiers(a, &tiers);
                }
            }
        }
        builder.build()
    }

    /// Whether a perfect matching exists.
    pub fn has_perfect_matching(&self) -> bool {
        self.num_agents() == self.num_objects()
            && maximum_matching(&BipartiteGraph::from_instance(self)).len() == self.num_agents()
    }
}

/// Parses and validates a JSON instance document.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let doc: InstanceDoc =
        serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    Instance::from_doc(&doc)
}

/// Incremental construction of an [`Instance`]. Preference pairs are raw;
/// closure and acyclicity checking happen in [`InstanceBuilder::build`].
#[derive(Clone, Debug, Default)]
pub struct InstanceBuilder {
    agents: Vec<String>,
    objects: Vec<String>,
    agent_index: HashMap<String, usize>,
    object_index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    edge_set: HashSet<(usize, usize)>,
    raw: Vec<Vec<(usize, usize)>>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from a copy of `instance`, closed preferences included.
    pub fn from_instance(instance: &Instance) -> Self {
        let mut builder = Self::new();
        for name in &instance.agents {
            builder.add_agent(name).expect("names are unique");
        }
        for name in &instance.objects {
            builder.add_object(name).expect("names are unique");
        }
        for &(a, b) in &instance.edges {
            builder.add_edge(a, b).expect("edges are unique");
        }
        for a in 0..instance.num_agents() {
            builder.raw[a] = instance.preference_pairs(a);
        }
        builder
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn num_objects(&self) -> usize {
        self.objects.len()
    }

    pub fn has_name(&self, name: &str) -> bool {
        self.agent_index.contains_key(name) || self.object_index.contains_key(name)
    }

    /// Returns `base`, or `base` with primes appended until it is unused.
    pub fn fresh_name(&self, base: String) -> String {
        let mut name = base;
        while self.has_name(&name) {
            name.push('\'');
        }
        name
    }

    pub fn add_agent(&mut self, name: &str) -> Result<usize> {
        if self.has_name(name) {
            return Err(Error::Invalid(vec![format!("duplicate identifier `{name}`")]));
        }
        let id = self.agents.len();
        self.agents.push(name.to_string());
        self.agent_index.insert(name.to_string(), id);
        self.raw.push(Vec::new());
        Ok(id)
    }

    pub fn add_object(&mut self, name: &str) -> Result<usize> {
        if self.has_name(name) {
            return Err(Error::Invalid(vec![format!("duplicate identifier `{name}`")]));
        }
        let id = self.objects.len();
        self.objects.push(name.to_string());
        self.object_index.insert(name.to_string(), id);
        Ok(id)
    }

    /// Adds an agent under a generated name that avoids every existing one.
    pub fn add_fresh_agent(&mut self, base: String) -> usize {
        let name = self.fresh_name(base);
        self.add_agent(&name).expect("fresh name")
    }

    pub fn add_fresh_object(&mut self, base: String) -> usize {
        let name = self.fresh_name(base);
        self.add_object(&name).expect("fresh name")
    }

    pub fn agent(&self, name: &str) -> Result<usize> {
        self.agent_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownAgent(name.to_string()))
    }

    pub fn object(&self, name: &str) -> Result<usize> {
        self.object_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownObject(name.to_string()))
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        if !self.edge_set.insert((a, b)) {
            return Err(Error::Invalid(vec![format!(
                "duplicate edge ({}, {})",
                self.agents[a], self.objects[b]
            )]));
        }
        self.edges.push((a, b));
        Ok(())
    }

    /// Records the raw pair `b ≻_a c`.
    pub fn prefer(&mut self, a: usize, b: usize, c: usize) {
        self.raw[a].push((b, c));
    }

    /// Records a weak ranking: every object of an earlier tier is preferred
    /// to every object of a later tier.
    pub fn tiers(&mut self, a: usize, tiers: &[Vec<usize>]) {
        // consecutive tiers suffice; the closure in `build` adds the rest
        for pair in tiers.windows(2) {
            for &b in &pair[0] {
                for &c in &pair[1] {
                    self.prefer(a, b, c);
                }
            }
        }
    }

    /// Records a strict ranking, best first.
    pub fn ranking(&mut self, a: usize, order: &[usize]) {
        let tiers: Vec<Vec<usize>> = order.iter().map(|&b| vec![b]).collect();
        self.tiers(a, &tiers);
    }

    pub fn build(self) -> Result<Instance> {
        let n_agents = self.agents.len();
        let n_objects = self.objects.len();
        let mut nbrs = vec![Vec::new(); n_agents];
        let mut nbr_edges = vec![Vec::new(); n_agents];
        let mut object_nbrs = vec![Vec::new(); n_objects];
        let mut local = vec![HashMap::new(); n_agents];
        let mut edge_index = HashMap::with_capacity(self.edges.len());
        for (id, &(a, b)) in self.edges.iter().enumerate() {
            local[a].insert(b, nbrs[a].len());
            nbrs[a].push(b);
            nbr_edges[a].push(id);
            object_nbrs[b].push(a);
            edge_index.insert((a, b), id);
        }

        let mut problems = Vec::new();
        let mut better = Vec::with_capacity(n_agents);
        let mut worse = Vec::with_capacity(n_agents);
        for a in 0..n_agents {
            let d = nbrs[a].len();
            let mut rows = vec![FixedBitSet::with_capacity(d); d];
            for &(b, c) in &self.raw[a] {
                match (local[a].get(&b), local[a].get(&c)) {
                    (Some(&i), Some(&j)) => rows[i].insert(j),
                    _ => problems.push(format!(
                        "preference ({}, {}) of agent `{}` refers to a non-edge",
                        self.objects[b], self.objects[c], self.agents[a]
                    )),
                }
            }
            close_transitively(&mut rows);
            if (0..d).any(|i| rows[i].contains(i)) {
                problems.push(format!("preferences of agent `{}` are cyclic", self.agents[a]));
            }
            let mut cols = vec![FixedBitSet::with_capacity(d); d];
            for (i, row) in rows.iter().enumerate() {
                for j in row.ones() {
                    cols[j].insert(i);
                }
            }
            worse.push(rows);
            better.push(cols);
        }
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }

        Ok(Instance {
            agents: self.agents,
            objects: self.objects,
            agent_index: self.agent_index,
            object_index: self.object_index,
            edges: self.edges,
            edge_index,
            nbrs,
            nbr_edges,
            object_nbrs,
            local,
            better,
            worse,
        })
    }
}

/// Warshall-style closure: `rows[i]` holds the successors of `i`.
pub(crate) fn close_transitively(rows: &mut [FixedBitSet]) {
    for k in 0..rows.len() {
        let via = rows[k].clone();
        for row in rows.iter_mut() {
            if row.contains(k) {
                row.union_with(&via);
            }
        }
    }
}

/// Serialized instance. Preferences are given either as raw `pairs`
/// (`[b, c]` meaning `b ≻ c`) or as weak-ranking `tiers`, best first.
/// Agents absent from `preferences` are indifferent among all neighbours.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub agents: Vec<String>,
    pub objects: Vec<String>,
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub preferences: BTreeMap<String, PreferenceDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PreferenceDoc {
    #[serde(rename = "pairs")]
    Pairs(Vec<(String, String)>),
    #[serde(rename = "tiers")]
    Tiers(Vec<Vec<String>>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    DuplicateAgent(String),
    DuplicateObject(String),
    SharedIdentifier(String),
    UnknownEdgeAgent(String),
    UnknownEdgeObject(String),
    DuplicateEdge(String, String),
    UnknownPreferenceAgent(String),
    NonEdgePreference { agent: String, object: String },
    RepeatedTierObject { agent: String, object: String },
    CyclicPreferences { agent: String, cycle: Vec<String> },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateAgent(a) => write!(f, "duplicate agent `{a}`"),
            Violation::DuplicateObject(b) => write!(f, "duplicate object `{b}`"),
            Violation::SharedIdentifier(x) => {
                write!(f, "`{x}` is used both as an agent and an object")
            }
            Violation::UnknownEdgeAgent(a) => write!(f, "edge refers to unknown agent `{a}`"),
            Violation::UnknownEdgeObject(b) => write!(f, "edge refers to unknown object `{b}`"),
            Violation::DuplicateEdge(a, b) => write!(f, "duplicate edge ({a}, {b})"),
            Violation::UnknownPreferenceAgent(a) => {
                write!(f, "preferences given for unknown agent `{a}`")
            }
            Violation::NonEdgePreference { agent, object } => {
                write!(f, "agent `{agent}` ranks `{object}` which is not her neighbour")
            }
            Violation::RepeatedTierObject { agent, object } => {
                write!(f, "agent `{agent}` lists `{object}` in more than one tier slot")
            }
            Violation::CyclicPreferences { agent, cycle } => {
                write!(f, "preferences of `{agent}` contain the cycle {}", cycle.join(" > "))
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Collects every invariant violation of a document. Nothing is repaired.
pub fn validate(doc: &InstanceDoc) -> ValidationReport {
    let mut violations = Vec::new();
    let mut agents = HashSet::new();
    for a in &doc.agents {
        if !agents.insert(a.as_str()) {
            violations.push(Violation::DuplicateAgent(a.clone()));
        }
    }
    let mut objects = HashSet::new();
    for b in &doc.objects {
        if !objects.insert(b.as_str()) {
            violations.push(Violation::DuplicateObject(b.clone()));
        }
        if agents.contains(b.as_str()) {
            violations.push(Violation::SharedIdentifier(b.clone()));
        }
    }

    let mut edges: HashSet<(&str, &str)> = HashSet::new();
    for (a, b) in &doc.edges {
        if !agents.contains(a.as_str()) {
            violations.push(Violation::UnknownEdgeAgent(a.clone()));
        }
        if !objects.contains(b.as_str()) {
            violations.push(Violation::UnknownEdgeObject(b.clone()));
        }
        if !edges.insert((a.as_str(), b.as_str())) {
            violations.push(Violation::DuplicateEdge(a.clone(), b.clone()));
        }
    }

    for (agent, pref) in &doc.preferences {
        if !agents.contains(agent.as_str()) {
            violations.push(Violation::UnknownPreferenceAgent(agent.clone()));
            continue;
        }
        let mut mentioned: Vec<&str> = Vec::new();
        let pairs: Vec<(&str, &str)> = match pref {
            PreferenceDoc::Pairs(pairs) => {
                for (b, c) in pairs {
                    mentioned.push(b);
                    mentioned.push(c);
                }
                pairs.iter().map(|(b, c)| (b.as_str(), c.as_str())).collect()
            }
            PreferenceDoc::Tiers(tiers) => {
                let mut seen = HashSet::new();
                for b in tiers.iter().flatten() {
                    mentioned.push(b);
                    if !seen.insert(b.as_str()) {
                        violations.push(Violation::RepeatedTierObject {
                            agent: agent.clone(),
                            object: b.clone(),
                        });
                    }
                }
                // tiers are acyclic unless an object repeats, reported above
                Vec::new()
            }
        };
        let mut reported = HashSet::new();
        for b in mentioned {
            if !edges.contains(&(agent.as_str(), b)) && reported.insert(b) {
                violations.push(Violation::NonEdgePreference {
                    agent: agent.clone(),
                    object: b.to_string(),
                });
            }
        }
        if let Some(cycle) = find_cycle(&pairs) {
            violations.push(Violation::CyclicPreferences {
                agent: agent.clone(),
                cycle: cycle.into_iter().map(str::to_string).collect(),
            });
        }
    }
    ValidationReport { violations }
}

/// Finds a directed cycle in the raw pair digraph, if any.
fn find_cycle<'a>(pairs: &[(&'a str, &'a str)]) -> Option<Vec<&'a str>> {
    let mut succ: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for &(b, c) in pairs {
        succ.entry(b).or_default().push(c);
        succ.entry(c).or_default();
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = succ.keys().map(|&k| (k, 0)).collect();
    let mut path: Vec<&str> = Vec::new();

    fn visit<'a>(
        v: &'a str,
        succ: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut HashMap<&'a str, u8>,
        path: &mut Vec<&'a str>,
    ) -> Option<Vec<&'a str>> {
        state.insert(v, 1);
        path.push(v);
        for &w in &succ[v] {
            match state[w] {
                1 => {
                    let start = path.iter().position(|&x| x == w).expect("on stack");
                    let mut cycle = path[start..].to_vec();
                    cycle.push(w);
                    return Some(cycle);
                }
                0 => {
                    if let Some(c) = visit(w, succ, state, path) {
                        return Some(c);
                    }
                }
                _ => {}
            }
        }
        path.pop();
        state.insert(v, 2);
        None
    }

    let keys: Vec<&str> = succ.keys().copied().collect();
    for v in keys {
        if state[v] == 0 {
            if let Some(c) = visit(v, &succ, &mut state, &mut path) {
                return Some(c);
            }
        }
    }
    None
}

/// A matching between agents and objects, with partner lookup both ways.
/// Not tied to a particular instance; [`Matching::from_pairs`] checks edge
/// membership when one is given.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matching {
    agent_to: Vec<Option<usize>>,
    object_to: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(num_agents: usize, num_objects: usize) -> Self {
        Self {
            agent_to: vec![None; num_agents],
            object_to: vec![None; num_objects],
        }
    }

    pub fn for_instance(instance: &Instance) -> Self {
        Self::empty(instance.num_agents(), instance.num_objects())
    }

    /// Builds a matching of `instance`, rejecting non-edges and reused nodes.
    pub fn from_pairs(
        instance: &Instance,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let mut m = Self::for_instance(instance);
        for (a, b) in pairs {
            if !instance.has_edge(a, b) {
                return Err(instance.not_an_edge(a, b));
            }
            if m.agent_to[a].is_some() {
                return Err(Error::DoubleMatched(instance.agent_name(a).to_string()));
            }
            if m.object_to[b].is_some() {
                return Err(Error::DoubleMatched(instance.object_name(b).to_string()));
            }
            m.insert(a, b);
        }
        Ok(m)
    }

    pub fn from_named_pairs<S: AsRef<str>>(instance: &Instance, pairs: &[(S, S)]) -> Result<Self> {
        let ids = pairs
            .iter()
            .map(|(a, b)| Ok((instance.agent(a.as_ref())?, instance.object(b.as_ref())?)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_pairs(instance, ids)
    }

    /// Inserts `(a, b)`, dropping any previous partners of either node.
    pub fn insert(&mut self, a: usize, b: usize) {
        if let Some(old) = self.agent_to[a].take() {
            self.object_to[old] = None;
        }
        if let Some(old) = self.object_to[b].take() {
            self.agent_to[old] = None;
        }
        self.agent_to[a] = Some(b);
        self.object_to[b] = Some(a);
    }

    pub fn remove_agent(&mut self, a: usize) {
        if let Some(b) = self.agent_to[a].take() {
            self.object_to[b] = None;
        }
    }

    pub fn agent_partner(&self, a: usize) -> Option<usize> {
        self.agent_to[a]
    }

    pub fn object_partner(&self, b: usize) -> Option<usize> {
        self.object_to[b]
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.agent_to[a] == Some(b)
    }

    pub fn num_agents(&self) -> usize {
        self.agent_to.len()
    }

    pub fn num_objects(&self) -> usize {
        self.object_to.len()
    }

    pub fn len(&self) -> usize {
        self.agent_to.iter().filter(|p| p.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every agent and every object is matched.
    pub fn is_perfect(&self) -> bool {
        self.agent_to.len() == self.object_to.len() && self.agent_to.iter().all(Option::is_some)
    }

    /// Matched pairs ordered by agent index.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.agent_to
            .iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| (a, b)))
    }

    pub fn to_named_pairs(&self, instance: &Instance) -> Vec<(String, String)> {
        self.pairs()
            .map(|(a, b)| {
                (
                    instance.agent_name(a).to_string(),
                    instance.object_name(b).to_string(),
                )
            })
            .collect()
    }
}

/// Relates an instance to its perfect-matching augmentation. Original nodes
/// keep their indices; added nodes come after them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AugmentationMap {
    pub original_agents: usize,
    pub original_objects: usize,
    /// Maximum matching size of the original instance.
    pub max_matching_size: usize,
    pub dummy_agents: Vec<usize>,
    pub artificial_objects: Vec<usize>,
}

impl AugmentationMap {
    /// Restricts a matching of the augmented instance to original edges.
    pub fn project(&self, m: &Matching) -> Matching {
        let mut out = Matching::empty(self.original_agents, self.original_objects);
        for (a, b) in m.pairs() {
            if a < self.original_agents && b < self.original_objects {
                out.insert(a, b);
            }
        }
        out
    }

    /// Extends a maximum matching of the original instance to a perfect
    /// matching of the augmented one.
    pub fn extend(&self, m: &Matching) -> Result<Matching> {
        if m.len() != self.max_matching_size {
            return Err(Error::NotPerfect);
        }
        let n_agents = self.original_agents + self.dummy_agents.len();
        let n_objects = self.original_objects + self.artificial_objects.len();
        let mut out = Matching::empty(n_agents, n_objects);
        for (a, b) in m.pairs() {
            out.insert(a, b);
        }
        let free_agents = (0..self.original_agents).filter(|&a| m.agent_partner(a).is_none());
        for (a, &art) in free_agents.zip(&self.artificial_objects) {
            out.insert(a, art);
        }
        let free_objects = (0..self.original_objects).filter(|&b| m.object_partner(b).is_none());
        for (b, &d) in free_objects.zip(&self.dummy_agents) {
            out.insert(d, b);
        }
        Ok(out)
    }
}

/// Adds `|B| − ν` dummy agents adjacent to every original object and
/// `|A| − ν` artificial objects tied at the bottom of every original agent's
/// ranking, so that the result admits a perfect matching.
pub fn augment_to_perfect(instance: &Instance) -> (Instance, AugmentationMap) {
    let nu = maximum_matching(&BipartiteGraph::from_instance(instance)).len();
    let mut builder = InstanceBuilder::from_instance(instance);
    let dummies: Vec<usize> = (0..instance.num_objects() - nu)
        .map(|i| builder.add_fresh_agent(format!("__dummy:{i}")))
        .collect();
    let artificial: Vec<usize> = (0..instance.num_agents() - nu)
        .map(|i| builder.add_fresh_object(format!("__art:{i}")))
        .collect();
    for &d in &dummies {
        for b in 0..instance.num_objects() {
            builder.add_edge(d, b).expect("fresh edge");
        }
    }
    for a in 0..instance.num_agents() {
        for &art in &artificial {
            builder.add_edge(a, art).expect("fresh edge");
            for &b in instance.neighbors(a) {
                builder.prefer(a, b, art);
            }
        }
    }
    let augmented = builder.build().expect("augmentation preserves validity");
    let map = AugmentationMap {
        original_agents: instance.num_agents(),
        original_objects: instance.num_objects(),
        max_matching_size: nu,
        dummy_agents: dummies,
        artificial_objects: artificial,
    };
    (augmented, map)
}
