use super::{Slice, SlicePlane};
use crate::linalg::{median, Vec3};
use serde::{Deserialize, Serialize};

/// Multiple of the median inter-slice center spacing within which centers
/// of adjacent slices may be linked.
pub const ADJACENCY_MULTIPLIER: f64 = 1.5;
/// A chain must span more than this fraction of the slices to be the torso.
pub const TORSO_MIN_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartLabel {
    Torso,
    Limb(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainNode {
    pub slice: usize,
    pub group: usize,
    pub center: Vec3,
    pub area: f64,
    pub radius: f64,
    pub parity_valid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chain {
    pub label: PartLabel,
    /// Ordered by slice index.
    pub nodes: Vec<ChainNode>,
}

impl Chain {
    pub fn centers(&self) -> Vec<Vec3> {
        self.nodes.iter().map(|n| n.center).collect()
    }

    pub fn max_area(&self) -> f64 {
        self.nodes.iter().map(|n| n.area).fold(0.0, f64::max)
    }
}

/// Chains of linked group centers; the torso (when any chain exists) is
/// always first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartChains {
    pub chains: Vec<Chain>,
    /// Median distance between a center and its nearest center in the next
    /// slice.
    pub spacing: f64,
    pub adjacency_radius: f64,
    pub slice_count: usize,
}

impl PartChains {
    pub fn torso(&self) -> Option<&Chain> {
        self.chains.iter().find(|c| c.label == PartLabel::Torso)
    }

    pub fn limbs(&self) -> impl Iterator<Item = &Chain> {
        self.chains.iter().filter(|c| c.label != PartLabel::Torso)
    }

    /// Total number of group centers across all chains.
    pub fn center_count(&self) -> usize {
        self.chains.iter().map(|c| c.nodes.len()).sum()
    }
}

/// Links group centers of adjacent slices into chains and labels the torso.
///
/// Two centers in consecutive slices are linked when each is the only
/// center of the other slice within the adjacency radius, so branch points
/// end a chain and start one per branch. Every group ends up in exactly one
/// chain.
pub fn classify_parts(slices: &[Slice]) -> PartChains {
    let nodes: Vec<Vec<ChainNode>> = slices
        .iter()
        .enumerate()
        .map(|(s, slice)| {
            let plane = SlicePlane::across_major_axis(slice.axis_coordinate);
            slice
                .groups
                .iter()
                .enumerate()
                .map(|(g, group)| ChainNode {
                    slice: s,
                    group: g,
                    center: group.center,
                    area: group.area(&plane),
                    radius: group.radius(),
                    parity_valid: group.parity_valid,
                })
                .collect()
        })
        .collect();

    let mut gaps = Vec::new();
    for pair in nodes.windows(2) {
        for a in &pair[0] {
            if let Some(d) = pair[1].iter().map(|b| (a.center - b.center).norm()).min_by(f64::total_cmp) {
                gaps.push(d);
            }
        }
    }
    let spacing = median(&gaps).unwrap_or(0.0);
    let radius = ADJACENCY_MULTIPLIER * spacing;

    // next[s][g] = index of the linked group in slice s + 1.
    let mut next: Vec<Vec<Option<usize>>> = nodes.iter().map(|n| vec![None; n.len()]).collect();
    let mut has_prev: Vec<Vec<bool>> = nodes.iter().map(|n| vec![false; n.len()]).collect();
    for s in 0..nodes.len().saturating_sub(1) {
        let near = |a: &ChainNode, b: &ChainNode| (a.center - b.center).norm() <= radius;
        for (i, a) in nodes[s].iter().enumerate() {
            let forward: Vec<usize> = (0..nodes[s + 1].len()).filter(|&j| near(a, &nodes[s + 1][j])).collect();
            if forward.len() != 1 {
                continue;
            }
            let j = forward[0];
            let backward = nodes[s].iter().filter(|x| near(x, &nodes[s + 1][j])).count();
            if backward == 1 {
                next[s][i] = Some(j);
                has_prev[s + 1][j] = true;
            }
        }
    }

    let mut chains: Vec<Chain> = Vec::new();
    for s in 0..nodes.len() {
        for g in 0..nodes[s].len() {
            if has_prev[s][g] {
                continue;
            }
            let mut chain = vec![nodes[s][g].clone()];
            let (mut cs, mut cg) = (s, g);
            while let Some(n) = next[cs][cg] {
                cs += 1;
                cg = n;
                chain.push(nodes[cs][cg].clone());
            }
            chains.push(Chain {
                label: PartLabel::Limb(0),
                nodes: chain,
            });
        }
    }

    let min_len = TORSO_MIN_FRACTION * slices.len() as f64;
    let pick = |eligible: &dyn Fn(&Chain) -> bool| {
        chains
            .iter()
            .enumerate()
            .filter(|(_, c)| eligible(c))
            .max_by(|(i, a), (j, b)| {
                a.max_area()
                    .total_cmp(&b.max_area())
                    .then(a.nodes.len().cmp(&b.nodes.len()))
                    .then(j.cmp(i))
            })
            .map(|(i, _)| i)
    };
    let torso = pick(&|c: &Chain| c.nodes.len() as f64 > min_len).or_else(|| pick(&|_| true));
    if let Some(t) = torso {
        let chain = chains.remove(t);
        chains.insert(0, chain);
        chains[0].label = PartLabel::Torso;
    }
    let mut limb = 0;
    for chain in chains.iter_mut().skip(usize::from(torso.is_some())) {
        limb += 1;
        chain.label = PartLabel::Limb(limb);
    }

    PartChains {
        chains,
        spacing,
        adjacency_radius: radius,
        slice_count: slices.len(),
    }
}
