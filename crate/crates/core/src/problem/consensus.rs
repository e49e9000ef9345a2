use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Agent `owner` keeps a local copy of the foreign node `node`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Coupling {
    pub owner: usize,
    pub node: usize,
}

/// Input to [`build_consensus`].
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConsensusSpec {
    /// Variable count of every node.
    pub node_dims: Vec<usize>,
    /// Owning agent of every node.
    pub partition: Vec<usize>,
    pub num_agents: usize,
    pub couplings: Vec<Coupling>,
    /// Agent-private variables appended after nodes and copies. Empty means
    /// none for every agent.
    #[serde(default)]
    pub extra_dims: Vec<usize>,
}

/// Matrices and index maps produced by [`build_consensus`].
#[derive(Debug, Clone)]
pub struct ConsensusLayout {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub block_dims: Vec<usize>,
    /// Offset of every agent's block inside `x`.
    pub block_offsets: Vec<usize>,
    /// Per agent: node → offset inside the block, for owned nodes and copies.
    pub local: Vec<BTreeMap<usize, usize>>,
    /// Per agent: offset of the private variables inside the block.
    pub extra_offset: Vec<usize>,
    /// Node → offset in `x̄`, only for nodes that have at least one copy.
    pub global_offset: BTreeMap<usize, usize>,
}

impl ConsensusLayout {
    /// Offset of `node` (owned or copied by `agent`) inside the full `x`.
    pub fn x_index(&self, agent: usize, node: usize) -> Option<usize> {
        self.local[agent]
            .get(&node)
            .map(|o| self.block_offsets[agent] + o)
    }
}

/// Builds the duplication constraints `x_j − x̄_j = 0` and `x^i_j − x̄_j = 0`.
///
/// A block lists its owned nodes in ascending order, then its copies in
/// coupling order, then private variables. Each duplicated node gets one
/// global copy; its rows are the original first, then each copy in
/// coupling order, one row per component.
pub fn build_consensus(spec: &ConsensusSpec) -> Result<ConsensusLayout> {
    let nn = spec.node_dims.len();
    let na = spec.num_agents;
    if spec.partition.len() != nn {
        return Err(Error::Consensus(format!(
            "partition covers {} nodes, expected {nn}",
            spec.partition.len()
        )));
    }
    if let Some(n) = spec.partition.iter().position(|&a| a >= na) {
        return Err(Error::Consensus(format!("node {n} assigned to unknown agent")));
    }
    if !spec.extra_dims.is_empty() && spec.extra_dims.len() != na {
        return Err(Error::Consensus("extra_dims must list every agent".into()));
    }
    let mut seen = BTreeSet::new();
    for c in &spec.couplings {
        if c.owner >= na {
            return Err(Error::Consensus(format!("coupling owner {} unknown", c.owner)));
        }
        if c.node >= nn {
            return Err(Error::Consensus(format!(
                "coupling references undeclared node {}",
                c.node
            )));
        }
        if spec.partition[c.node] == c.owner {
            return Err(Error::Consensus(format!(
                "agent {} already owns node {}",
                c.owner, c.node
            )));
        }
        if !seen.insert((c.owner, c.node)) {
            return Err(Error::Consensus(format!(
                "duplicate copy of node {} in agent {}",
                c.node, c.owner
            )));
        }
    }

    let mut local: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); na];
    let mut fill = vec![0usize; na];
    for (node, &agent) in spec.partition.iter().enumerate() {
        local[agent].insert(node, fill[agent]);
        fill[agent] += spec.node_dims[node];
    }
    for c in &spec.couplings {
        local[c.owner].insert(c.node, fill[c.owner]);
        fill[c.owner] += spec.node_dims[c.node];
    }
    let mut extra_offset = Vec::with_capacity(na);
    for (agent, f) in fill.iter_mut().enumerate() {
        extra_offset.push(*f);
        *f += spec.extra_dims.get(agent).copied().unwrap_or(0);
    }
    let block_dims = fill;
    let mut block_offsets = vec![0usize; na + 1];
    for i in 0..na {
        block_offsets[i + 1] = block_offsets[i] + block_dims[i];
    }

    let mut copies_of: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in &spec.couplings {
        copies_of.entry(c.node).or_default().push(c.owner);
    }
    let mut global_offset = BTreeMap::new();
    let mut a_entries = Vec::new();
    let mut b_entries = Vec::new();
    let mut row = 0usize;
    let mut n2 = 0usize;
    for (&node, owners) in &copies_of {
        let d = spec.node_dims[node];
        global_offset.insert(node, n2);
        let holders = std::iter::once(spec.partition[node]).chain(owners.iter().copied());
        for agent in holders {
            let base = block_offsets[agent] + local[agent][&node];
            for comp in 0..d {
                a_entries.push((row, base + comp, 1.0));
                b_entries.push((row, n2 + comp, -1.0));
                row += 1;
            }
        }
        n2 += d;
    }
    let n1 = block_offsets[na];
    Ok(ConsensusLayout {
        a: SparseMatrix::from_triplets(row, n1, a_entries)?,
        b: SparseMatrix::from_triplets(row, n2, b_entries)?,
        block_dims,
        block_offsets: block_offsets[..na].to_vec(),
        local,
        extra_offset,
        global_offset,
    })
}

/// Checks `Im(B) ⊆ Im(A)` constructively for selector-type couplings: every
/// row holds exactly one entry of A and at most one of B, and no column of
/// A is used twice, so any `x̄` is matched by `x_c = −(b/a) x̄_j`.
pub fn certify_image_inclusion(a: &SparseMatrix, b: &SparseMatrix) -> bool {
    if a.rows() != b.rows() {
        return false;
    }
    let mut used = vec![false; a.cols()];
    for r in 0..a.rows() {
        let (ac, av) = a.row(r);
        let (bc, _) = b.row(r);
        if ac.len() != 1 || bc.len() > 1 || av[0] == 0.0 || used[ac[0]] {
            return false;
        }
        used[ac[0]] = true;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_node() -> ConsensusSpec {
        ConsensusSpec {
            node_dims: vec![1, 1],
            partition: vec![0, 1],
            num_agents: 2,
            couplings: vec![Coupling { owner: 0, node: 1 }, Coupling { owner: 1, node: 0 }],
            extra_dims: vec![],
        }
    }

    #[test]
    fn two_node_rows_by_hand() {
        let l = build_consensus(&two_node()).unwrap();
        // x = (x_0, x^0_1 | x_1, x^1_0), x̄ = (x̄_0, x̄_1)
        assert_eq!(l.a.rows(), 4);
        assert_eq!(l.a.cols(), 4);
        assert_eq!(l.b.cols(), 2);
        let a: Vec<_> = l.a.triplets().collect();
        let b: Vec<_> = l.b.triplets().collect();
        assert_eq!(a, vec![(0, 0, 1.0), (1, 3, 1.0), (2, 2, 1.0), (3, 1, 1.0)]);
        assert_eq!(b, vec![(0, 0, -1.0), (1, 0, -1.0), (2, 1, -1.0), (3, 1, -1.0)]);
        assert_eq!(l.x_index(1, 0), Some(3));
        assert!(certify_image_inclusion(&l.a, &l.b));
    }

    #[test]
    fn single_agent_is_uncoupled() {
        let spec = ConsensusSpec {
            node_dims: vec![2, 3],
            partition: vec![0, 0],
            num_agents: 1,
            couplings: vec![],
            extra_dims: vec![1],
        };
        let l = build_consensus(&spec).unwrap();
        assert_eq!(l.a.rows(), 0);
        assert_eq!(l.b.cols(), 0);
        assert_eq!(l.block_dims, vec![6]);
        assert_eq!(l.extra_offset, vec![5]);
    }

    #[test]
    fn bad_couplings_rejected() {
        let mut s = two_node();
        s.couplings.push(Coupling { owner: 0, node: 7 });
        assert!(build_consensus(&s).is_err());
        let mut s = two_node();
        s.couplings.push(Coupling { owner: 0, node: 0 });
        assert!(build_consensus(&s).is_err());
        let mut s = two_node();
        s.couplings.push(Coupling { owner: 0, node: 1 });
        assert!(build_consensus(&s).is_err());
        let mut s = two_node();
        s.partition = vec![0, 5];
        assert!(build_consensus(&s).is_err());
    }

    #[test]
    fn multi_dim_nodes_get_component_rows() {
        let spec = ConsensusSpec {
            node_dims: vec![3, 3],
            partition: vec![0, 1],
            num_agents: 2,
            couplings: vec![Coupling { owner: 0, node: 1 }],
            extra_dims: vec![],
        };
        let l = build_consensus(&spec).unwrap();
        assert_eq!(l.a.rows(), 6);
        assert_eq!(l.b.cols(), 3);
        assert!(l.b.has_disjoint_columns());
        assert_eq!(l.b.col_sq_norms(), vec![2.0; 3]);
    }
}
