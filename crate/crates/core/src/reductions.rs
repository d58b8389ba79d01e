//! Instance transformations that turn related problems into popular
//! assignment questions, and the maps that carry solutions back.
//!
//! * popular matchings and matchings popular with penalty `κ` (last-resort
//!   paths plus dummy agents),
//! * popularity under per-colour diversity quotas,
//! * housing markets (trading cycles become assignments),
//! * weak rankings to strict rankings, shifting every margin by `q`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceBuilder, Matching};
use crate::popular::{solve_popular_assignment, solve_truncated, SolveOutcome};

/// Where a node of a reduced instance comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Origin {
    /// the node with this index in the source instance
    Source(usize),
    /// `p_i(a)`, `1 ≤ i < κ`
    PathAgent { agent: usize, index: usize },
    /// `l_i(a)`, `1 ≤ i ≤ κ`; `l_1(a)` is the last resort of `a`
    PathObject { agent: usize, index: usize },
    Dummy(usize),
    /// artificial object `index` of colour `color`
    Artificial { color: usize, index: usize },
    /// the house owned by an agent of a housing market
    House(usize),
    TierAgent { agent: usize, tier: usize },
    TierObject { agent: usize, tier: usize },
    /// `copy` 1 or 2: the two clones of a tier agent
    CloneAgent { agent: usize, tier: usize, copy: usize },
    /// `copy` 1 or 2: the first and second choice objects of a tier gadget
    CloneObject { agent: usize, tier: usize, copy: usize },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReductionKind {
    PenaltyMatching { kappa: usize },
    Diversity { colors: Vec<usize>, bounds: Vec<(usize, usize)> },
    Housing,
    WeakToStrict,
}

/// Relates a reduced instance to its source. Source agents and objects keep
/// their indices in the target unless noted by their origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionMap {
    pub kind: ReductionKind,
    pub source_agents: usize,
    pub source_objects: usize,
    pub agent_origin: Vec<Origin>,
    pub object_origin: Vec<Origin>,
    agent_lookup: HashMap<Origin, usize>,
    object_lookup: HashMap<Origin, usize>,
}

impl ReductionMap {
    fn new(
        kind: ReductionKind,
        source_agents: usize,
        source_objects: usize,
        agent_origin: Vec<Origin>,
        object_origin: Vec<Origin>,
    ) -> Self {
        let agent_lookup = agent_origin.iter().enumerate().map(|(i, &o)| (o, i)).collect();
        let object_lookup = object_origin.iter().enumerate().map(|(i, &o)| (o, i)).collect();
        Self {
            kind,
            source_agents,
            source_objects,
            agent_origin,
            object_origin,
            agent_lookup,
            object_lookup,
        }
    }

    pub fn target_agent(&self, origin: Origin) -> Option<usize> {
        self.agent_lookup.get(&origin).copied()
    }

    pub fn target_object(&self, origin: Origin) -> Option<usize> {
        self.object_lookup.get(&origin).copied()
    }

    /// The source agent represented by a target agent, for agents whose
    /// original-object edges stand for edges of that source agent.
    fn represented_agent(&self, t: usize) -> Option<usize> {
        match self.agent_origin[t] {
            Origin::Source(a) => Some(a),
            Origin::TierAgent { agent, .. } | Origin::CloneAgent { agent, .. } => Some(agent),
            _ => None,
        }
    }

    /// Projects a matching of the target onto the source: every target edge
    /// between a (representative of a) source agent and a source object.
    /// Not meaningful for housing markets, see [`assignment_to_allocation`].
    pub fn lift(&self, m: &Matching) -> Matching {
        let mut out = Matching::empty(self.source_agents, self.source_objects);
        for (t, b) in m.pairs() {
            if let (Some(a), Origin::Source(b)) = (self.represented_agent(t), self.object_origin[b]) {
                out.insert(a, b);
            }
        }
        out
    }

    /// The assignment of the target that corresponds to a source matching
    /// (an admissible one for diversity, an assignment for weak-to-strict).
    pub fn extend(&self, source: &Instance, m: &Matching) -> Result<Matching> {
        let mut out = Matching::empty(self.agent_origin.len(), self.object_origin.len());
        for (a, b) in m.pairs() {
            if !source.has_edge(a, b) {
                return Err(source.not_an_edge(a, b));
            }
        }
        match &self.kind {
            ReductionKind::PenaltyMatching { kappa } => self.extend_penalty(m, *kappa, &mut out),
            ReductionKind::Diversity { colors, bounds } => self.extend_diversity(m, colors, bounds, &mut out)?,
            ReductionKind::Housing => {
                return Err(Error::InvalidParameters(
                    "housing reductions map allocations, not matchings".into(),
                ))
            }
            ReductionKind::WeakToStrict => self.extend_weak_to_strict(source, m, &mut out)?,
        }
        Ok(out)
    }

    fn extend_penalty(&self, m: &Matching, kappa: usize, out: &mut Matching) {
        let path_object = |agent, index| self.object_lookup[&Origin::PathObject { agent, index }];
        let path_agent = |agent, index| self.agent_lookup[&Origin::PathAgent { agent, index }];
        let mut for_dummies = Vec::new();
        for a in 0..self.source_agents {
            match m.agent_partner(a) {
                Some(b) => {
                    out.insert(a, b);
                    for i in 1..kappa {
                        out.insert(path_agent(a, i), path_object(a, i));
                    }
                    for_dummies.push(path_object(a, kappa));
                }
                None => {
                    out.insert(a, path_object(a, 1));
                    for i in 1..kappa {
                        out.insert(path_agent(a, i), path_object(a, i + 1));
                    }
                }
            }
        }
        for_dummies.extend((0..self.source_objects).filter(|&b| m.object_partner(b).is_none()));
        for_dummies.sort_unstable();
        for (i, b) in for_dummies.into_iter().enumerate() {
            out.insert(self.agent_lookup[&Origin::Dummy(i)], b);
        }
    }

    fn extend_diversity(
        &self,
        m: &Matching,
        colors: &[usize],
        bounds: &[(usize, usize)],
        out: &mut Matching,
    ) -> Result<()> {
        let mut for_dummies: Vec<usize> = Vec::new();
        for (i, &(s, t)) in bounds.iter().enumerate() {
            let members: Vec<usize> = (0..self.source_agents).filter(|&a| colors[a] == i).collect();
            let matched = members.iter().filter(|&&a| m.agent_partner(a).is_some()).count();
            if matched < s || matched > t {
                return Err(Error::InvalidConstraints(format!(
                    "colour {i} has {matched} matched agents, outside [{s}, {t}]"
                )));
            }
            // Unmatched agents take the objects no dummy can reach first.
            let artificial: Vec<usize> = (0..members.len() - s)
                .map(|index| self.object_lookup[&Origin::Artificial { color: i, index }])
                .collect();
            let (designated, private) = artificial.split_at(t - s);
            let mut pool = private.iter().chain(designated.iter().rev());
            for &a in &members {
                match m.agent_partner(a) {
                    Some(b) => out.insert(a, b),
                    None => out.insert(a, *pool.next().expect("enough artificial objects")),
                }
            }
            for_dummies.extend(pool.copied());
        }
        for_dummies.extend((0..self.source_objects).filter(|&b| m.object_partner(b).is_none()));
        for_dummies.sort_unstable();
        for (i, b) in for_dummies.into_iter().enumerate() {
            out.insert(self.agent_lookup[&Origin::Dummy(i)], b);
        }
        Ok(())
    }

    fn extend_weak_to_strict(&self, source: &Instance, m: &Matching, out: &mut Matching) -> Result<()> {
        if !m.is_perfect() {
            return Err(Error::NotPerfect);
        }
        for v in 0..self.source_agents {
            let tiers = source.tiers(v).expect("checked when reducing");
            let w = m.agent_partner(v).expect("perfect");
            for (i, tier) in tiers.iter().enumerate() {
                let tier_agent = self.agent_lookup[&Origin::TierAgent { agent: v, tier: i }];
                let tier_object = self.object_lookup[&Origin::TierObject { agent: v, tier: i }];
                if tier.contains(&w) {
                    out.insert(v, tier_object);
                    out.insert(tier_agent, w);
                } else {
                    out.insert(tier_agent, tier_object);
                }
                for copy in 1..=2 {
                    out.insert(
                        self.agent_lookup[&Origin::CloneAgent { agent: v, tier: i, copy }],
                        self.object_lookup[&Origin::CloneObject { agent: v, tier: i, copy }],
                    );
                }
            }
        }
        Ok(())
    }
}

/// Tracks node origins while a reduced instance is assembled.
struct Assembly {
    builder: InstanceBuilder,
    agent_origin: Vec<Origin>,
    object_origin: Vec<Origin>,
}

impl Assembly {
    /// Starts from a copy of the source instance.
    fn copying(source: &Instance) -> Self {
        Self {
            builder: InstanceBuilder::from_instance(source),
            agent_origin: (0..source.num_agents()).map(Origin::Source).collect(),
            object_origin: (0..source.num_objects()).map(Origin::Source).collect(),
        }
    }

    fn agent(&mut self, name: String, origin: Origin) -> usize {
        self.agent_origin.push(origin);
        self.builder.add_fresh_agent(name)
    }

    fn object(&mut self, name: String, origin: Origin) -> usize {
        self.object_origin.push(origin);
        self.builder.add_fresh_object(name)
    }

    fn edge(&mut self, a: usize, b: usize) {
        self.builder.add_edge(a, b).expect("each reduction edge is added once");
    }

    fn finish(self, kind: ReductionKind, source: &Instance) -> (Instance, ReductionMap) {
        let target = self.builder.build().expect("reductions preserve validity");
        let map = ReductionMap::new(
            kind,
            source.num_agents(),
            source.num_objects(),
            self.agent_origin,
            self.object_origin,
        );
        (target, map)
    }
}

/// Adds a last resort `l(a)` below every neighbour of each agent and `|B|`
/// indifferent dummy agents adjacent to all objects. Matchings of the source
/// correspond to assignments of the target with equal `Δ`.
pub fn reduce_popular_matching(instance: &Instance) -> (Instance, ReductionMap) {
    penalty_reduction(instance, 1)
}

/// Adds a path `a, l_1(a), p_1(a), …, p_{κ−1}(a), l_κ(a)` per agent, with
/// `l_1(a)` the unique worst choice of `a` and each `p_i(a)` preferring
/// `l_i(a)` to `l_{i+1}(a)`, plus `|B|` indifferent dummies adjacent to the
/// original objects and every `l_κ(a)`.
pub fn reduce_penalty_matching(instance: &Instance, kappa: usize) -> Result<(Instance, ReductionMap)> {
    if kappa == 0 {
        return Err(Error::InvalidParameters("penalty must be at least 1".into()));
    }
    Ok(penalty_reduction(instance, kappa))
}

fn penalty_reduction(instance: &Instance, kappa: usize) -> (Instance, ReductionMap) {
    let mut asm = Assembly::copying(instance);
    let mut ends = Vec::with_capacity(instance.num_agents());
    for a in 0..instance.num_agents() {
        let name = instance.agent_name(a);
        let objects: Vec<usize> = (1..=kappa)
            .map(|i| {
                let label = if kappa == 1 {
                    format!("__lr:{name}")
                } else {
                    format!("__l:{name}:{i}")
                };
                asm.object(label, Origin::PathObject { agent: a, index: i })
            })
            .collect();
        asm.edge(a, objects[0]);
        for &b in instance.neighbors(a) {
            asm.builder.prefer(a, b, objects[0]);
        }
        for i in 1..kappa {
            let p = asm.agent(format!("__p:{name}:{i}"), Origin::PathAgent { agent: a, index: i });
            asm.edge(p, objects[i - 1]);
            asm.edge(p, objects[i]);
            asm.builder.prefer(p, objects[i - 1], objects[i]);
        }
        ends.push(objects[kappa - 1]);
    }
    for i in 0..instance.num_objects() {
        let d = asm.agent(format!("__dummy:{i}"), Origin::Dummy(i));
        for b in (0..instance.num_objects()).chain(ends.iter().copied()) {
            asm.edge(d, b);
        }
    }
    asm.finish(ReductionKind::PenaltyMatching { kappa }, instance)
}

/// A solve on a reduced instance together with its lifted result.
#[derive(Clone, Debug)]
pub struct ReducedSolve {
    pub target: Instance,
    pub map: ReductionMap,
    pub outcome: SolveOutcome,
    /// The lifted source matching when the target solve succeeded.
    pub lifted: Option<Matching>,
}

/// A matching popular with penalty `κ`, via the penalty reduction and the
/// `(κ+1)`-level truncation. `κ = 1` decides popular matching existence.
pub fn solve_penalty_matching(instance: &Instance, kappa: usize) -> Result<ReducedSolve> {
    let (target, map) = reduce_penalty_matching(instance, kappa)?;
    let outcome = solve_truncated(&target, kappa + 1)?;
    let lifted = outcome.assignment().map(|m| map.lift(m));
    Ok(ReducedSolve {
        target,
        map,
        outcome,
        lifted,
    })
}

pub fn solve_popular_matching(instance: &Instance) -> Result<ReducedSolve> {
    solve_penalty_matching(instance, 1)
}

/// Quota reduction: agents coloured `colors[a] ∈ 0..k`, and admissible
/// matchings match between `s_i` and `t_i` agents of colour `i`. Adds
/// `n_i − s_i` artificial objects tied at the bottom of colour `i`, and
/// `|B| − Σ s_i` indifferent dummies adjacent to every original object and to
/// the first `t_i − s_i` artificial objects of each colour.
pub fn reduce_diversity(
    instance: &Instance,
    colors: &[usize],
    bounds: &[(usize, usize)],
) -> Result<(Instance, ReductionMap)> {
    if colors.len() != instance.num_agents() {
        return Err(Error::InvalidConstraints(format!(
            "{} colours given for {} agents",
            colors.len(),
            instance.num_agents()
        )));
    }
    if let Some(&c) = colors.iter().find(|&&c| c >= bounds.len()) {
        return Err(Error::InvalidConstraints(format!("colour {c} has no bounds")));
    }
    let mut sizes = vec![0usize; bounds.len()];
    for &c in colors {
        sizes[c] += 1;
    }
    for (i, (&(s, t), &n)) in bounds.iter().zip(&sizes).enumerate() {
        if s > t || t > n {
            return Err(Error::InvalidConstraints(format!(
                "colour {i}: bounds [{s}, {t}] do not fit {n} agents"
            )));
        }
    }
    let lower: usize = bounds.iter().map(|b| b.0).sum();
    if lower > instance.num_objects() {
        return Err(Error::InvalidConstraints(format!(
            "lower bounds sum to {lower} but there are {} objects",
            instance.num_objects()
        )));
    }

    let mut asm = Assembly::copying(instance);
    let mut reachable = Vec::new();
    for (i, &(s, t)) in bounds.iter().enumerate() {
        let artificial: Vec<usize> = (0..sizes[i] - s)
            .map(|index| asm.object(format!("__art:{i}:{index}"), Origin::Artificial { color: i, index }))
            .collect();
        for a in (0..instance.num_agents()).filter(|&a| colors[a] == i) {
            for &x in &artificial {
                asm.edge(a, x);
                for &b in instance.neighbors(a) {
                    asm.builder.prefer(a, b, x);
                }
            }
        }
        reachable.extend_from_slice(&artificial[..t - s]);
    }
    for i in 0..instance.num_objects() - lower {
        let d = asm.agent(format!("__dummy:{i}"), Origin::Dummy(i));
        for b in (0..instance.num_objects()).chain(reachable.iter().copied()) {
            asm.edge(d, b);
        }
    }
    let kind = ReductionKind::Diversity {
        colors: colors.to_vec(),
        bounds: bounds.to_vec(),
    };
    Ok(asm.finish(kind, instance))
}

/// A matching popular among admissible ones, through the quota reduction.
pub fn solve_diversity(instance: &Instance, colors: &[usize], bounds: &[(usize, usize)]) -> Result<ReducedSolve> {
    let (target, map) = reduce_diversity(instance, colors, bounds)?;
    let outcome = solve_popular_assignment(&target)?;
    let lifted = outcome.assignment().map(|m| map.lift(m));
    Ok(ReducedSolve {
        target,
        map,
        outcome,
        lifted,
    })
}

/// Splits every agent's tiers into strict gadgets and then replaces every
/// indifferent agent by three clones over two private objects, yielding
/// strict rankings throughout. Returns the target, `q` (the number of
/// indifferent agents replaced) and the map; minimum margins shift by `q`.
pub fn weak_to_strict(instance: &Instance) -> Result<(Instance, usize, ReductionMap)> {
    let mut all_tiers = Vec::with_capacity(instance.num_agents());
    for a in 0..instance.num_agents() {
        let tiers = instance
            .tiers(a)
            .ok_or_else(|| Error::NotWeakRanking(instance.agent_name(a).to_string()))?;
        all_tiers.push(tiers);
    }
    let mut asm = Assembly {
        builder: InstanceBuilder::new(),
        agent_origin: Vec::new(),
        object_origin: Vec::new(),
    };
    for a in 0..instance.num_agents() {
        asm.builder.add_agent(instance.agent_name(a))?;
        asm.agent_origin.push(Origin::Source(a));
    }
    for b in 0..instance.num_objects() {
        asm.builder.add_object(instance.object_name(b))?;
        asm.object_origin.push(Origin::Source(b));
    }
    let mut q = 0;
    for (v, tiers) in all_tiers.iter().enumerate() {
        let name = instance.agent_name(v).to_string();
        let mut tier_objects = Vec::with_capacity(tiers.len());
        for (i, tier) in tiers.iter().enumerate() {
            let t = asm.agent(format!("__tier:{name}:{i}"), Origin::TierAgent { agent: v, tier: i });
            let bt = asm.object(format!("__tierobj:{name}:{i}"), Origin::TierObject { agent: v, tier: i });
            tier_objects.push(bt);
            let t_name = format!("__tier:{name}:{i}");
            let first = asm.object(
                format!("__first:{t_name}"),
                Origin::CloneObject { agent: v, tier: i, copy: 1 },
            );
            let second = asm.object(
                format!("__second:{t_name}"),
                Origin::CloneObject { agent: v, tier: i, copy: 2 },
            );
            let clones = [
                t,
                asm.agent(
                    format!("__clone:{t_name}:1"),
                    Origin::CloneAgent { agent: v, tier: i, copy: 1 },
                ),
                asm.agent(
                    format!("__clone:{t_name}:2"),
                    Origin::CloneAgent { agent: v, tier: i, copy: 2 },
                ),
            ];
            let order: Vec<usize> = [first, second]
                .into_iter()
                .chain(tier.iter().copied())
                .chain(std::iter::once(bt))
                .collect();
            for &c in &clones {
                for &x in &order {
                    asm.edge(c, x);
                }
                asm.builder.ranking(c, &order);
            }
            q += 1;
        }
        for &bt in &tier_objects {
            asm.edge(v, bt);
        }
        asm.builder.ranking(v, &tier_objects);
    }
    let (target, map) = asm.finish(ReductionKind::WeakToStrict, instance);
    Ok((target, q, map))
}

/// A housing market: agents own one house each and trade along arcs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HousingMarket {
    agents: Vec<String>,
    houses: Vec<String>,
    /// out-arc heads per agent, in input order
    out: Vec<Vec<usize>>,
    /// closed preference pairs per agent over heads: `(x, y)` means the arc
    /// to `x` beats the arc to `y`
    prefs: Vec<HashSet<(usize, usize)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketDoc {
    pub agents: Vec<String>,
    /// House names per agent; defaults to `house:<agent>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endowments: Option<BTreeMap<String, String>>,
    pub arcs: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub preferences: BTreeMap<String, ArcPreferenceDoc>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArcPreferenceDoc {
    /// `[[arc1, arc2], …]` meaning arc1 ≻ arc2
    Pairs(Vec<((String, String), (String, String))>),
    /// heads of out-arcs, best tier first
    Tiers(Vec<Vec<String>>),
}

pub fn parse_market(text: &str) -> Result<HousingMarket> {
    let doc: MarketDoc = serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))?;
    HousingMarket::from_doc(&doc)
}

impl HousingMarket {
    pub fn from_doc(doc: &MarketDoc) -> Result<Self> {
        let mut problems = Vec::new();
        let mut index = HashMap::new();
        for (i, a) in doc.agents.iter().enumerate() {
            if index.insert(a.clone(), i).is_some() {
                problems.push(format!("duplicate agent `{a}`"));
            }
        }
        let n = doc.agents.len();
        let mut houses: Vec<String> = doc.agents.iter().map(|a| format!("house:{a}")).collect();
        if let Some(endowments) = &doc.endowments {
            for (a, h) in endowments {
                match index.get(a) {
                    Some(&i) => houses[i] = h.clone(),
                    None => problems.push(format!("endowment for unknown agent `{a}`")),
                }
            }
        }
        let mut seen_houses = HashSet::new();
        for h in &houses {
            if !seen_houses.insert(h.as_str()) {
                problems.push(format!("house `{h}` is owned by two agents"));
            }
            if index.contains_key(h) {
                problems.push(format!("house `{h}` shares a name with an agent"));
            }
        }
        let mut out = vec![Vec::new(); n];
        let mut arc_set = HashSet::new();
        for (x, y) in &doc.arcs {
            match (index.get(x), index.get(y)) {
                (Some(&i), Some(&j)) => {
                    if i == j {
                        problems.push(format!("self-arc at `{x}`"));
                    } else if !arc_set.insert((i, j)) {
                        problems.push(format!("duplicate arc ({x}, {y})"));
                    } else {
                        out[i].push(j);
                    }
                }
                _ => problems.push(format!("arc ({x}, {y}) names an unknown agent")),
            }
        }
        let mut raw: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (a, pref) in &doc.preferences {
            let Some(&i) = index.get(a) else {
                problems.push(format!("preferences for unknown agent `{a}`"));
                continue;
            };
            let mut head = |arc_tail: &str, arc_head: &str| -> Option<usize> {
                match index.get(arc_head) {
                    Some(&j) if arc_tail == a && arc_set.contains(&(i, j)) => Some(j),
                    _ => {
                        problems.push(format!("preference of `{a}` names ({arc_tail}, {arc_head}), not one of its arcs"));
                        None
                    }
                }
            };
            match pref {
                ArcPreferenceDoc::Pairs(pairs) => {
                    for ((t1, h1), (t2, h2)) in pairs {
                        if let (Some(x), Some(y)) = (head(t1, h1), head(t2, h2)) {
                            raw[i].push((x, y));
                        }
                    }
                }
                ArcPreferenceDoc::Tiers(tiers) => {
                    let ids: Vec<Vec<usize>> = tiers
                        .iter()
                        .map(|tier| tier.iter().filter_map(|h| head(a, h)).collect())
                        .collect();
                    for (t, upper) in ids.iter().enumerate() {
                        for lower in &ids[t + 1..] {
                            for &x in upper {
                                for &y in lower {
                                    raw[i].push((x, y));
                                }
                            }
                        }
                    }
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        let mut prefs = Vec::with_capacity(n);
        for (i, pairs) in raw.into_iter().enumerate() {
            let closed = close_pairs(&pairs);
            if let Some(&(x, _)) = closed.iter().find(|(x, y)| x == y) {
                problems.push(format!(
                    "preferences of `{}` are cyclic through ({}, {})",
                    doc.agents[i], doc.agents[i], doc.agents[x]
                ));
            }
            prefs.push(closed);
        }
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        Ok(Self {
            agents: doc.agents.clone(),
            houses,
            out,
            prefs,
        })
    }

    pub fn to_doc(&self) -> MarketDoc {
        let default = self
            .agents
            .iter()
            .zip(&self.houses)
            .all(|(a, h)| *h == format!("house:{a}"));
        let endowments = (!default).then(|| {
            self.agents
                .iter()
                .cloned()
                .zip(self.houses.iter().cloned())
                .collect()
        });
        let mut preferences = BTreeMap::new();
        for (a, pairs) in self.prefs.iter().enumerate() {
            if pairs.is_empty() {
                continue;
            }
            let mut sorted: Vec<_> = pairs.iter().copied().collect();
            sorted.sort_unstable();
            let arc = |h: usize| (self.agents[a].clone(), self.agents[h].clone());
            preferences.insert(
                self.agents[a].clone(),
                ArcPreferenceDoc::Pairs(sorted.into_iter().map(|(x, y)| (arc(x), arc(y))).collect()),
            );
        }
        MarketDoc {
            agents: self.agents.clone(),
            endowments,
            arcs: self
                .arcs()
                .into_iter()
                .map(|(x, y)| (self.agents[x].clone(), self.agents[y].clone()))
                .collect(),
            preferences,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_doc()).expect("market serializes")
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn agent_name(&self, a: usize) -> &str {
        &self.agents[a]
    }

    pub fn house_name(&self, a: usize) -> &str {
        &self.houses[a]
    }

    pub fn agent_id(&self, name: &str) -> Option<usize> {
        self.agents.iter().position(|a| a == name)
    }

    /// Heads of the arcs leaving `a`, in input order.
    pub fn targets(&self, a: usize) -> &[usize] {
        &self.out[a]
    }

    pub fn has_arc(&self, a: usize, b: usize) -> bool {
        self.out[a].contains(&b)
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.out
            .iter()
            .enumerate()
            .flat_map(|(a, heads)| heads.iter().map(move |&h| (a, h)))
            .collect()
    }

    /// Whether `a` prefers the arc to `x` over the arc to `y`.
    pub fn prefers(&self, a: usize, x: usize, y: usize) -> bool {
        self.prefs[a].contains(&(x, y))
    }
}

fn close_pairs(pairs: &[(usize, usize)]) -> HashSet<(usize, usize)> {
    let mut closed: HashSet<(usize, usize)> = pairs.iter().copied().collect();
    loop {
        let mut added = Vec::new();
        for &(x, y) in &closed {
            for &(y2, z) in &closed {
                if y == y2 && !closed.contains(&(x, z)) {
                    added.push((x, z));
                }
            }
        }
        if added.is_empty() {
            return closed;
        }
        closed.extend(added);
    }
}

/// A set of arcs forming vertex-disjoint trading cycles, stored as the
/// trading partner of every agent.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Allocation {
    next: Vec<Option<usize>>,
}

impl Allocation {
    /// Nobody trades.
    pub fn empty(num_agents: usize) -> Self {
        Self {
            next: vec![None; num_agents],
        }
    }

    /// Validates that `arcs` belong to the market and form disjoint cycles.
    pub fn from_arcs(market: &HousingMarket, arcs: &[(usize, usize)]) -> Result<Self> {
        let n = market.num_agents();
        let mut next = vec![None; n];
        let mut prev = vec![None; n];
        for &(a, b) in arcs {
            if a >= n || b >= n || !market.has_arc(a, b) {
                return Err(Error::NotCycles(format!("({a}, {b}) is not an arc")));
            }
            if next[a].replace(b).is_some() {
                return Err(Error::NotCycles(format!("{} leaves twice", market.agent_name(a))));
            }
            if prev[b].replace(a).is_some() {
                return Err(Error::NotCycles(format!("{} is entered twice", market.agent_name(b))));
            }
        }
        if let Some(a) = (0..n).find(|&a| next[a].is_some() != prev[a].is_some()) {
            return Err(Error::NotCycles(format!(
                "{} is on a path, not a cycle",
                market.agent_name(a)
            )));
        }
        Ok(Self { next })
    }

    pub fn trading_partner(&self, a: usize) -> Option<usize> {
        self.next[a]
    }

    pub fn arcs(&self) -> Vec<(usize, usize)> {
        self.next
            .iter()
            .enumerate()
            .filter_map(|(a, b)| b.map(|b| (a, b)))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.next.iter().all(Option::is_none)
    }

    /// Trading cycles, each starting at its smallest agent.
    pub fn cycles(&self) -> Vec<Vec<usize>> {
        let mut seen = vec![false; self.next.len()];
        let mut out = Vec::new();
        for start in 0..self.next.len() {
            if seen[start] || self.next[start].is_none() {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut cur = self.next[start].expect("trades");
            while cur != start {
                seen[cur] = true;
                cycle.push(cur);
                cur = self.next[cur].expect("cycles are closed");
            }
            out.push(cycle);
        }
        out
    }
}

/// `G_D`: agents, one object per house, an edge `(a, ω(a′))` per arc
/// `(a, a′)` and the self edge `(a, ω(a))` as `a`'s unique worst choice.
pub fn housing_to_assignment(market: &HousingMarket) -> (Instance, ReductionMap) {
    let n = market.num_agents();
    let mut builder = InstanceBuilder::new();
    for a in 0..n {
        builder.add_agent(market.agent_name(a)).expect("validated names");
    }
    for a in 0..n {
        builder.add_object(market.house_name(a)).expect("validated names");
    }
    for a in 0..n {
        for &h in market.targets(a) {
            builder.add_edge(a, h).expect("arcs are unique");
            builder.prefer(a, h, a);
        }
        builder.add_edge(a, a).expect("no self-arcs");
        for &(x, y) in &market.prefs[a] {
            builder.prefer(a, x, y);
        }
    }
    let instance = builder.build().expect("market preferences are acyclic");
    let map = ReductionMap::new(
        ReductionKind::Housing,
        n,
        0,
        (0..n).map(Origin::Source).collect(),
        (0..n).map(Origin::House).collect(),
    );
    (instance, map)
}

/// The allocation whose image is the assignment `m` of `G_D`.
pub fn assignment_to_allocation(m: &Matching, map: &ReductionMap, market: &HousingMarket) -> Result<Allocation> {
    if map.kind != ReductionKind::Housing {
        return Err(Error::InvalidParameters("not a housing reduction".into()));
    }
    if !m.is_perfect() || m.num_agents() != market.num_agents() {
        return Err(Error::NotPerfect);
    }
    let arcs: Vec<(usize, usize)> = m
        .pairs()
        .filter_map(|(a, b)| match map.object_origin[b] {
            Origin::House(h) if h != a => Some((a, h)),
            _ => None,
        })
        .collect();
    Allocation::from_arcs(market, &arcs)
}

/// `M_S`: traders receive the house at the head of their arc, everyone else
/// keeps their own.
pub fn allocation_to_assignment(allocation: &Allocation, map: &ReductionMap) -> Matching {
    let n = map.source_agents;
    let mut m = Matching::empty(n, n);
    for a in 0..n {
        let h = allocation.trading_partner(a).unwrap_or(a);
        m.insert(a, map.target_object(Origin::House(h)).expect("every house has an object"));
    }
    m
}

/// Popular allocation search through `G_D`.
#[derive(Clone, Debug)]
pub struct HousingSolve {
    pub instance: Instance,
    pub map: ReductionMap,
    pub outcome: SolveOutcome,
    pub allocation: Option<Allocation>,
}

pub fn solve_housing(market: &HousingMarket) -> Result<HousingSolve> {
    let (instance, map) = housing_to_assignment(market);
    let outcome = solve_popular_assignment(&instance)?;
    let allocation = outcome
        .assignment()
        .map(|m| assignment_to_allocation(m, &map, market))
        .transpose()?;
    Ok(HousingSolve {
        instance,
        map,
        outcome,
        allocation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::parse_instance;

    fn section_2_2() -> Instance {
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

    fn k22() -> Instance {
        parse_instance(
            r#"{"agents":["a1","a2"],"objects":["b1","b2"],
                "edges":[["a1","b1"],["a1","b2"],["a2","b1"],["a2","b2"]],
                "preferences":{"a1":{"tiers":[["b1"],["b2"]]}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn popular_matching_sizes() {
        let (t, map) = reduce_popular_matching(&section_2_2());
        assert_eq!((t.num_agents(), t.num_objects()), (6, 6));
        assert_eq!(map.kind, ReductionKind::PenaltyMatching { kappa: 1 });
        assert!(t.object_id("__lr:a1").is_some());
        assert!(t.agent_id("__dummy:2").is_some());
    }

    #[test]
    fn no_popular_matching_in_section_2_2() {
        let out = solve_popular_matching(&section_2_2()).unwrap();
        assert!(!out.outcome.is_found());
        assert!(out.lifted.is_none());
        assert!(solve_popular_assignment(&section_2_2()).unwrap().is_found());
    }

    #[test]
    fn penalty_sizes() {
        let (t, _) = reduce_penalty_matching(&k22(), 2).unwrap();
        assert_eq!((t.num_agents(), t.num_objects()), (6, 6));
        assert!(reduce_penalty_matching(&k22(), 0).is_err());
        let (t1, _) = reduce_penalty_matching(&k22(), 1).unwrap();
        let (t2, _) = reduce_popular_matching(&k22());
        assert_eq!(t1.to_doc(), t2.to_doc());
    }

    #[test]
    fn penalty_extend_lift_round_trip() {
        let inst = section_2_2();
        let (t, map) = reduce_penalty_matching(&inst, 3).unwrap();
        let m = Matching::from_pairs(&inst, [(0, 1), (2, 0)]).unwrap();
        let ext = map.extend(&inst, &m).unwrap();
        assert!(ext.is_perfect());
        for (a, b) in ext.pairs() {
            assert!(t.has_edge(a, b));
        }
        assert_eq!(map.lift(&ext), m);
    }

    #[test]
    fn diversity_counts() {
        // colours n = (2, 2), s = (1, 0), t = (2, 1), |B| = 3
        let inst = parse_instance(
            r#"{"agents":["a","b","c","d"],"objects":["x","y","z"],
                "edges":[["a","x"],["b","y"],["c","z"],["d","x"]]}"#,
        )
        .unwrap();
        let (t, map) = reduce_diversity(&inst, &[0, 0, 1, 1], &[(1, 2), (0, 1)]).unwrap();
        let count = |f: &dyn Fn(&Origin) -> bool| map.object_origin.iter().filter(|o| f(o)).count();
        assert_eq!(count(&|o| matches!(o, Origin::Artificial { color: 0, .. })), 1);
        assert_eq!(count(&|o| matches!(o, Origin::Artificial { color: 1, .. })), 2);
        assert_eq!(map.agent_origin.iter().filter(|o| matches!(o, Origin::Dummy(_))).count(), 2);
        assert_eq!(t.num_agents(), t.num_objects());
        let m = Matching::from_pairs(&inst, [(0, 0), (2, 2)]).unwrap();
        let ext = map.extend(&inst, &m).unwrap();
        assert!(ext.is_perfect());
        assert_eq!(map.lift(&ext), m);
        assert!(reduce_diversity(&inst, &[0, 0, 1, 1], &[(3, 3), (0, 1)]).is_err());
        assert!(reduce_diversity(&inst, &[0, 0, 1, 1], &[(2, 2), (2, 2)]).is_err());
    }

    #[test]
    fn diversity_trivial_case() {
        let inst = k22();
        let (t, _) = reduce_diversity(&inst, &[0, 0], &[(2, 2)]).unwrap();
        assert_eq!(t.to_doc(), inst.to_doc());
    }

    fn market(text: &str) -> HousingMarket {
        parse_market(text).unwrap()
    }

    #[test]
    fn arcless_market() {
        let m = market(r#"{"agents":["a","b"],"arcs":[]}"#);
        let (inst, _) = housing_to_assignment(&m);
        assert_eq!(inst.num_edges(), 2);
        let out = solve_housing(&m).unwrap();
        assert!(out.allocation.unwrap().is_empty());
    }

    #[test]
    fn mutual_swap() {
        let m = market(r#"{"agents":["a","b"],"arcs":[["a","b"],["b","a"]]}"#);
        let (inst, map) = housing_to_assignment(&m);
        assert_eq!((inst.num_agents(), inst.num_objects(), inst.num_edges()), (2, 2, 4));
        let out = solve_housing(&m).unwrap();
        let alloc = out.allocation.unwrap();
        assert_eq!(alloc.cycles(), vec![vec![0, 1]]);
        assert_eq!(
            assignment_to_allocation(&allocation_to_assignment(&alloc, &map), &map, &m).unwrap(),
            alloc
        );
    }

    #[test]
    fn market_validation() {
        assert!(parse_market(r#"{"agents":["a"],"arcs":[["a","a"]]}"#).is_err());
        assert!(parse_market(r#"{"agents":["a","b"],"endowments":{"a":"h","b":"h"},"arcs":[]}"#).is_err());
        assert!(parse_market(
            r#"{"agents":["a","b","c"],"arcs":[["a","b"],["a","c"]],
                "preferences":{"a":{"pairs":[[["a","b"],["a","c"]],[["a","c"],["a","b"]]]}}}"#
        )
        .is_err());
        let m = market(
            r#"{"agents":["a","b","c"],"arcs":[["a","b"],["b","c"],["c","a"],["a","c"]],
                "preferences":{"a":{"tiers":[["c"],["b"]]}}}"#,
        );
        assert!(m.prefers(0, 2, 1));
        assert!(Allocation::from_arcs(&m, &[(0, 1)]).is_err());
        assert!(Allocation::from_arcs(&m, &[(0, 1), (1, 2), (2, 0)]).is_ok());
        assert_eq!(parse_market(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn weak_to_strict_counts() {
        let single = parse_instance(r#"{"agents":["a"],"objects":["x","y"],"edges":[["a","x"],["a","y"]]}"#)
            .unwrap();
        let (t, q, _) = weak_to_strict(&single).unwrap();
        assert_eq!(q, 1);
        assert_eq!(t.num_agents(), 1 + 3);
        assert!((0..t.num_agents()).all(|a| t.is_strict_ranking(a)));

        let strict = section_2_2();
        let (t, q, map) = weak_to_strict(&strict).unwrap();
        assert_eq!(q, 2 + 2 + 3);
        assert!((0..t.num_agents()).all(|a| t.is_strict_ranking(a)));
        let m = Matching::from_pairs(&strict, [(0, 0), (1, 1), (2, 2)]).unwrap();
        let ext = map.extend(&strict, &m).unwrap();
        assert!(ext.is_perfect());
        assert_eq!(map.lift(&ext), m);
    }

    #[test]
    fn weak_to_strict_rejects_partial_orders() {
        let inst = parse_instance(
            r#"{"agents":["a"],"objects":["x","y","z"],"edges":[["a","x"],["a","y"],["a","z"]],
                "preferences":{"a":{"pairs":[["x","z"]]}}}"#,
        )
        .unwrap();
        assert!(matches!(weak_to_strict(&inst), Err(Error::NotWeakRanking(_))));
    }
}
