//! Seeded random instances and housing markets for tests and benchmarks.

use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::instance::{Instance, InstanceBuilder};
use crate::reductions::{ArcPreferenceDoc, HousingMarket, MarketDoc};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefStyle {
    /// a total order over the neighbours
    Strict,
    /// ordered tiers of tied neighbours
    Weak,
    /// a random DAG over the neighbours, transitively closed
    Partial,
}

impl FromStr for PrefStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(PrefStyle::Strict),
            "weak" => Ok(PrefStyle::Weak),
            "partial" => Ok(PrefStyle::Partial),
            other => Err(Error::InvalidParameters(format!("unknown preference style `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenConfig {
    pub agents: usize,
    pub objects: usize,
    /// independent probability of each agent–object edge
    pub density: f64,
    pub style: PrefStyle,
    pub seed: u64,
}

fn check_density(density: f64) -> Result<()> {
    if density.is_finite() && (0.0..=1.0).contains(&density) {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("density {density} is not in [0, 1]")))
    }
}

/// Raw preference pairs over `items` in the given style; pairs are indices
/// into `items`' values.
pub fn sample_preferences<R: Rng>(rng: &mut R, items: &[usize], style: PrefStyle) -> Vec<(usize, usize)> {
    let mut order = items.to_vec();
    order.shuffle(rng);
    let mut pairs = Vec::new();
    match style {
        PrefStyle::Strict => {
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    pairs.push((order[i], order[j]));
                }
            }
        }
        PrefStyle::Weak => {
            let mut tier = vec![0usize; order.len()];
            for i in 1..order.len() {
                tier[i] = tier[i - 1] + usize::from(rng.gen_bool(0.5));
            }
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    if tier[i] < tier[j] {
                        pairs.push((order[i], order[j]));
                    }
                }
            }
        }
        PrefStyle::Partial => {
            for i in 0..order.len() {
                for j in i + 1..order.len() {
                    if rng.gen_bool(0.5) {
                        pairs.push((order[i], order[j]));
                    }
                }
            }
        }
    }
    pairs
}

/// A random instance with agents `a1…` and objects `b1…`.
pub fn generate(config: &GenConfig) -> Result<Instance> {
    check_density(config.density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut builder = InstanceBuilder::new();
    for i in 1..=config.agents {
        builder.add_agent(&format!("a{i}"))?;
    }
    for i in 1..=config.objects {
        builder.add_object(&format!("b{i}"))?;
    }
    for a in 0..config.agents {
        let nbrs: Vec<usize> = (0..config.objects)
            .filter(|_| rng.gen_bool(config.density))
            .collect();
        for &b in &nbrs {
            builder.add_edge(a, b)?;
        }
        for (x, y) in sample_preferences(&mut rng, &nbrs, config.style) {
            builder.prefer(a, x, y);
        }
    }
    builder.build()
}

/// A random housing market with agents `a1…`; every ordered pair of distinct
/// agents is an arc with probability `density`.
pub fn generate_market(agents: usize, density: f64, style: PrefStyle, seed: u64) -> Result<HousingMarket> {
    check_density(density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (1..=agents).map(|i| format!("a{i}")).collect();
    let mut doc = MarketDoc {
        agents: names.clone(),
        endowments: None,
        arcs: Vec::new(),
        preferences: Default::default(),
    };
    for a in 0..agents {
        let heads: Vec<usize> = (0..agents)
            .filter(|&h| h != a && rng.gen_bool(density))
            .collect();
        for &h in &heads {
            doc.arcs.push((names[a].clone(), names[h].clone()));
        }
        let arc = |h: usize| (names[a].clone(), names[h].clone());
        let pairs: Vec<_> = sample_preferences(&mut rng, &heads, style)
            .into_iter()
            .map(|(x, y)| (arc(x), arc(y)))
            .collect();
        if !pairs.is_empty() {
            doc.preferences.insert(names[a].clone(), ArcPreferenceDoc::Pairs(pairs));
        }
    }
    HousingMarket::from_doc(&doc)
}
