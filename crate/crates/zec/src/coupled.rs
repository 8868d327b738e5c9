//! Coupled graph construction and the zero-capacity test.
//!
//! The coupled graph is the tensor product of the noise graph with itself;
//! an edge (i,j) -> (k,m) carries the mod-q difference of the two underlying
//! noise labels. The zero-error capacities of the channel are zero iff every
//! difference sequence d_{1:n} is realizable as a walk on this graph from
//! some vertex. The decision procedure is a subset-construction reachability
//! search: a label sequence is unwalkable iff iterating the transition map
//! from the full vertex set along it reaches the empty set.

use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::fsm::{NoiseFsm, Start, ENUM_GUARD_DEFAULT};
use crate::{Error, Result};

/// Default cap on the base-graph state count for the exact subset search
/// (subset space is 2^(|S|^2)).
pub const EXACT_STATE_GUARD_DEFAULT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CoupledEdge {
    pub from: (usize, usize),
    pub to: (usize, usize),
    pub label: u32,
}

#[derive(Debug, Clone)]
pub struct CoupledGraph {
    pub q: u32,
    /// Number of base-graph states; vertices are all of S x S.
    pub base_states: usize,
    pub edges: Vec<CoupledEdge>,
    /// edges indexed by (from-vertex id, label) for the subset iteration.
    trans: Vec<Vec<u128>>,
}

impl CoupledGraph {
    pub fn vertex_id(&self, pair: (usize, usize)) -> usize {
        pair.0 * self.base_states + pair.1
    }

    pub fn num_vertices(&self) -> usize {
        self.base_states * self.base_states
    }

    fn full_set(&self) -> u128 {
        if self.num_vertices() == 128 {
            u128::MAX
        } else {
            (1u128 << self.num_vertices()) - 1
        }
    }

    /// T(U, d) = { v : exists u in U with an edge (u -> v, d) }.
    fn step_subset(&self, subset: u128, label: u32) -> u128 {
        let mut out = 0u128;
        let mut rest = subset;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            out |= self.trans[v][label as usize];
        }
        out
    }
}

/// Build the coupled graph of a validated channel.
pub fn coupled_graph(fsm: &NoiseFsm) -> Result<CoupledGraph> {
    coupled_graph_with_guard(fsm, 12)
}

pub fn coupled_graph_with_guard(fsm: &NoiseFsm, max_states: usize) -> Result<CoupledGraph> {
    let n = fsm.num_states();
    if n > max_states {
        return Err(Error::Guard(format!(
            "coupled graph over {n} states exceeds cap {max_states}"
        )));
    }
    if n * n > 128 {
        return Err(Error::Guard(format!(
            "coupled graph needs {} vertices; bitset limit is 128",
            n * n
        )));
    }
    let q = fsm.q;
    let mut edges = Vec::new();
    let mut trans = vec![vec![0u128; q as usize]; n * n];
    for i in 0..n {
        for j in 0..n {
            for ei in fsm.outgoing(i) {
                for ej in fsm.outgoing(j) {
                    let label = (ei.z + q - ej.z) % q;
                    let from = (i, j);
                    let to = (ei.to, ej.to);
                    edges.push(CoupledEdge { from, to, label });
                    trans[i * n + j][label as usize] |= 1u128 << (ei.to * n + ej.to);
                }
            }
        }
    }
    edges.sort();
    Ok(CoupledGraph {
        q,
        base_states: n,
        edges,
        trans,
    })
}

#[derive(Debug, Clone)]
pub struct ZeroTestResult {
    /// True iff every difference sequence admits a walk (C0 = C0f = 0).
    pub is_zero: bool,
    /// A shortest unwalkable label sequence when not zero (lexicographically
    /// least among shortest).
    pub witness: Option<Vec<u32>>,
    pub subsets_explored: usize,
}

/// Decide whether the zero-error capacities are zero.
///
/// BFS over subsets of coupled-graph vertices starting from the full set,
/// branching on labels in increasing order; the capacities are nonzero iff
/// the empty subset is reachable, and the label path to it is the witness.
pub fn zero_capacity_test(cg: &CoupledGraph) -> ZeroTestResult {
    let full = cg.full_set();
    let mut visited: HashMap<u128, ()> = HashMap::new();
    let mut queue: VecDeque<(u128, Vec<u32>)> = VecDeque::new();
    visited.insert(full, ());
    queue.push_back((full, Vec::new()));
    while let Some((subset, path)) = queue.pop_front() {
        for d in 0..cg.q {
            let next = cg.step_subset(subset, d);
            let mut next_path = path.clone();
            next_path.push(d);
            if next == 0 {
                return ZeroTestResult {
                    is_zero: false,
                    witness: Some(next_path),
                    subsets_explored: visited.len(),
                };
            }
            if let std::collections::hash_map::Entry::Vacant(e) = visited.entry(next) {
                e.insert(());
                queue.push_back((next, next_path));
            }
        }
    }
    ZeroTestResult {
        is_zero: true,
        witness: None,
        subsets_explored: visited.len(),
    }
}

/// True iff some coupled-graph walk (from any vertex) carries label
/// sequence `d`.
pub fn is_walkable(cg: &CoupledGraph, d: &[u32]) -> bool {
    let mut subset = cg.full_set();
    for &label in d {
        debug_assert!(label < cg.q);
        subset = cg.step_subset(subset, label);
        if subset == 0 {
            return false;
        }
    }
    true
}

/// Brute-force difference-set oracle: computes P(n) = { z - z' } over all
/// admissible noise pairs and checks it spans the whole input space.
pub fn difference_set_oracle(fsm: &NoiseFsm, n: usize) -> Result<(bool, Option<Vec<u32>>)> {
    let seqs = fsm.enumerate_noise_sequences(Start::All, n, ENUM_GUARD_DEFAULT)?;
    let pairs = (seqs.len() as u128).pow(2);
    if pairs > u128::from(ENUM_GUARD_DEFAULT) {
        return Err(Error::Guard(format!(
            "{pairs} noise pairs exceed the oracle guard"
        )));
    }
    let q = fsm.q;
    let mut diffs: BTreeSet<Vec<u32>> = BTreeSet::new();
    for z in &seqs {
        for zp in &seqs {
            let d: Vec<u32> = z.iter().zip(zp).map(|(&a, &b)| (a + q - b) % q).collect();
            diffs.insert(d);
        }
    }
    let total = (q as u128).pow(n as u32);
    if diffs.len() as u128 == total {
        return Ok((true, None));
    }
    // lexicographically least absent sequence
    let mut cur = vec![0u32; n];
    loop {
        if !diffs.contains(&cur) {
            return Ok((false, Some(cur)));
        }
        // increment base-q
        let mut i = n;
        loop {
            if i == 0 {
                unreachable!("diff set claimed incomplete but all sequences present");
            }
            i -= 1;
            cur[i] += 1;
            if cur[i] < q {
                break;
            }
            cur[i] = 0;
        }
    }
}
