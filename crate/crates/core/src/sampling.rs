//! View-generating sub-graph samplers.
//!
//! Both samplers grow a node set `S` from one seeded random start node, only
//! ever adding neighbors of `S`, and return the sub-graph induced by `S`. They
//! differ in which neighbor is added next:
//!
//! * [`diffusion_sample`] picks a random member of `S` that still has outside
//!   neighbors, then one of those neighbors at random: an unbiased skeleton.
//! * [`community_expansion_sample`] greedily adds the frontier node that
//!   reaches the most nodes not yet in `S` or on its frontier, favouring hubs
//!   and the tree-like hierarchy around them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    rate: f64,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn new(rate: f64, seed: u64) -> Result<Self> {
        if !(rate > 0.0 && rate <= 1.0) {
            return Err(crate::contract(alloc::format!("sampling rate {rate} outside (0, 1]")));
        }
        Ok(Self { rate, seed })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// `max(1, round(rate · n))`.
    pub fn target(&self, n: usize) -> usize {
        (libm::round(self.rate * n as f64) as usize).clamp(1, n.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Diffusion,
    CommunityExpansion,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 2] = [SamplerKind::Diffusion, SamplerKind::CommunityExpansion];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Diffusion => "diffusion",
            SamplerKind::CommunityExpansion => "community_expansion",
        }
    }

    pub fn sample(self, g: &Graph, cfg: &SamplerConfig) -> Result<SampledGraph> {
        match self {
            SamplerKind::Diffusion => diffusion_sample(g, cfg),
            SamplerKind::CommunityExpansion => community_expansion_sample(g, cfg),
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "diffusion" => Ok(SamplerKind::Diffusion),
            "community_expansion" | "expansion" | "community" => Ok(SamplerKind::CommunityExpansion),
            _ => Err(Error::Unknown { what: "sampler", name: s.into() }),
        }
    }
}

/// A sampled sub-graph plus, for each of its nodes, the original node id.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledGraph {
    pub graph: Graph,
    pub original_ids: Vec<usize>,
}

fn start(g: &Graph, cfg: &SamplerConfig) -> Result<(ChaCha8Rng, usize)> {
    if g.node_count() == 0 {
        return Err(crate::contract("cannot sample an empty graph"));
    }
    if !g.is_connected() {
        return Err(Error::Disconnected);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let first = rng.gen_range(0..g.node_count());
    Ok((rng, first))
}

fn finish(g: &Graph, nodes: Vec<usize>) -> Result<SampledGraph> {
    let graph = g.induced_subgraph(&nodes)?;
    Ok(SampledGraph { graph, original_ids: nodes })
}

pub fn diffusion_sample(g: &Graph, cfg: &SamplerConfig) -> Result<SampledGraph> {
    let (mut rng, first) = start(g, cfg)?;
    let target = cfg.target(g.node_count());
    let mut in_set = vec![false; g.node_count()];
    // outside[v]: neighbors of v not yet in S, for v in S
    let mut outside = vec![0usize; g.node_count()];
    // members of S with outside > 0, with their positions for O(1) removal
    let mut frontier: Vec<usize> = Vec::new();
    let mut slot = vec![usize::MAX; g.node_count()];
    let mut nodes = Vec::with_capacity(target);

    let mut add = |v: usize, in_set: &mut Vec<bool>, nodes: &mut Vec<usize>, frontier: &mut Vec<usize>| {
        in_set[v] = true;
        nodes.push(v);
        for &w in g.neighbors(v) {
            if in_set[w] {
                outside[w] -= 1;
                if outside[w] == 0 {
                    let k = slot[w];
                    frontier.swap_remove(k);
                    if k < frontier.len() {
                        slot[frontier[k]] = k;
                    }
                    slot[w] = usize::MAX;
                }
            } else {
                outside[v] += 1;
            }
        }
        if outside[v] > 0 {
            slot[v] = frontier.len();
            frontier.push(v);
        }
    };

    add(first, &mut in_set, &mut nodes, &mut frontier);
    while nodes.len() < target {
        let u = frontier[rng.gen_range(0..frontier.len())];
        let choices: Vec<usize> = g.neighbors(u).iter().copied().filter(|&w| !in_set[w]).collect();
        let v = choices[rng.gen_range(0..choices.len())];
        add(v, &mut in_set, &mut nodes, &mut frontier);
    }
    finish(g, nodes)
}

pub fn community_expansion_sample(g: &Graph, cfg: &SamplerConfig) -> Result<SampledGraph> {
    let (_, first) = start(g, cfg)?;
    let n = g.node_count();
    let target = cfg.target(n);
    let mut in_set = vec![false; n];
    let mut nodes = vec![first];
    in_set[first] = true;
    let mut reached = vec![false; n];
    while nodes.len() < target {
        // reached = S ∪ N(S)
        reached.copy_from_slice(&in_set);
        for &v in &nodes {
            for &w in g.neighbors(v) {
                reached[w] = true;
            }
        }
        let mut best: Option<(usize, usize)> = None;
        for v in 0..n {
            if in_set[v] || !reached[v] {
                continue;
            }
            let gain = g.neighbors(v).iter().filter(|&&w| !reached[w]).count();
            // ascending scan keeps the smallest id on ties
            if best.is_none_or(|(_, b)| gain > b) {
                best = Some((v, gain));
            }
        }
        let (v, _) = best.expect("connected graph always has a frontier until S is complete");
        in_set[v] = true;
        nodes.push(v);
    }
    finish(g, nodes)
}

/// Verifies one sample of `g`: node count equals the target, the sample is
/// connected, every edge of `g` between chosen nodes is kept, and resampling
/// with the same seed reproduces it. Returns the first violation found.
pub fn check_invariants(g: &Graph, kind: SamplerKind, cfg: &SamplerConfig) -> Result<Option<String>> {
    let s = kind.sample(g, cfg)?;
    let target = cfg.target(g.node_count());
    if s.graph.node_count() != target || s.original_ids.len() != target {
        return Ok(Some(format!("{} nodes, expected {target}", s.graph.node_count())));
    }
    if !s.graph.is_connected() {
        return Ok(Some("sample is not connected".into()));
    }
    let ids = &s.original_ids;
    let induced = (0..ids.len()).flat_map(|a| (a + 1..ids.len()).map(move |b| (a, b))).filter(|&(a, b)| g.has_edge(ids[a], ids[b])).count();
    let kept = s.graph.edges().iter().filter(|&&(a, b)| g.has_edge(ids[a], ids[b])).count();
    if induced != s.graph.edge_count() || kept != induced {
        return Ok(Some(format!("{} edges kept, {induced} induced", s.graph.edge_count())));
    }
    if kind.sample(g, cfg)? != s {
        return Ok(Some("resampling with the same seed differs".into()));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        Graph::structure(n, (1..n).map(|i| (i - 1, i)), None).unwrap()
    }

    #[test]
    fn target_size() {
        let c = SamplerConfig::new(0.5, 0).unwrap();
        assert_eq!(c.target(10), 5);
        assert_eq!(c.target(1), 1);
        assert_eq!(SamplerConfig::new(0.01, 0).unwrap().target(10), 1);
        assert_eq!(SamplerConfig::new(0.25, 0).unwrap().target(10), 3);
        assert!(SamplerConfig::new(0.0, 0).is_err());
        assert!(SamplerConfig::new(1.5, 0).is_err());
    }

    #[test]
    fn full_rate_returns_whole_graph() {
        let g = Graph::structure(5, [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4), (1, 3)], None).unwrap();
        for kind in SamplerKind::ALL {
            let s = kind.sample(&g, &SamplerConfig::new(1.0, 3).unwrap()).unwrap();
            assert_eq!(s.graph.node_count(), 5);
            assert_eq!(s.graph.edge_count(), g.edge_count());
        }
    }

    #[test]
    fn half_path_is_connected() {
        let g = path(10);
        for seed in 0..20 {
            let s = diffusion_sample(&g, &SamplerConfig::new(0.5, seed).unwrap()).unwrap();
            assert_eq!(s.graph.node_count(), 5);
            assert!(s.graph.is_connected());
        }
    }

    #[test]
    fn star_expansion_takes_center() {
        let star = Graph::structure(10, (1..10).map(|i| (0, i)), None).unwrap();
        // find a seed whose start node is a leaf
        let seed = (0..100)
            .find(|&s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                rng.gen_range(0..10usize) != 0
            })
            .unwrap();
        let s = community_expansion_sample(&star, &SamplerConfig::new(0.2, seed).unwrap()).unwrap();
        assert_eq!(s.original_ids.len(), 2);
        assert_ne!(s.original_ids[0], 0);
        assert_eq!(s.original_ids[1], 0);
        assert_eq!(s.graph.edge_count(), 1);
    }

    #[test]
    fn expansion_breaks_ties_by_smallest_id() {
        // 0 is the start (n = 1 graph is trivial, so use a symmetric cycle)
        let cycle = Graph::structure(6, (0..6).map(|i| (i, (i + 1) % 6)), None).unwrap();
        let seed = (0..100).find(|&s| ChaCha8Rng::seed_from_u64(s).gen_range(0..6usize) == 0).unwrap();
        let s = community_expansion_sample(&cycle, &SamplerConfig::new(2.0 / 6.0, seed).unwrap()).unwrap();
        // both frontier nodes 1 and 5 gain one new node; 1 wins
        assert_eq!(s.original_ids, alloc::vec![0, 1]);
    }

    #[test]
    fn disconnected_input_is_rejected() {
        let g = Graph::structure(4, [(0, 1), (2, 3)], None).unwrap();
        for kind in SamplerKind::ALL {
            assert_eq!(kind.sample(&g, &SamplerConfig::new(0.5, 0).unwrap()), Err(Error::Disconnected));
        }
    }

    #[test]
    fn same_seed_same_sample() {
        let g = Graph::structure(8, [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 6), (6, 7), (0, 4), (2, 6)], None).unwrap();
        for kind in SamplerKind::ALL {
            let cfg = SamplerConfig::new(0.6, 42).unwrap();
            assert_eq!(kind.sample(&g, &cfg).unwrap(), kind.sample(&g, &cfg).unwrap());
        }
    }

    #[test]
    fn names_parse() {
        assert_eq!("diffusion".parse::<SamplerKind>().unwrap(), SamplerKind::Diffusion);
        assert_eq!("community-expansion".parse::<SamplerKind>().unwrap(), SamplerKind::CommunityExpansion);
        assert!("walk".parse::<SamplerKind>().is_err());
    }
}
