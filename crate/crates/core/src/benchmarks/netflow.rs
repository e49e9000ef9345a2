//! Nonlinear network flow with rotated-cone couplings between nodal
//! potentials, split into regions.
//!
//! Every node `i` holds `p_i`, `x_i` and `(x_ij, y_ij)` for each neighbour.
//! The flow `p_ij = (a_i/deg i)·x_i + b_ij·x_ij + c_ij·y_ij` enters the
//! balance `p_i − d_i = Σ_j p_ij`, and `x_ij² + y_ij² = x_i·x_j`. A region
//! that needs `x_j` of a foreign neighbour keeps a local copy.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::problem::{
    build_consensus, BlockProblem, BlockSpec, ConsensusLayout, ConsensusSpec, Constraint,
    Coupling, GeneratorTag, GlobalSet, Instance, Objective, SetKind,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetFlowConfig {
    pub nodes: usize,
    /// Probability of each non-tree edge.
    pub edge_density: f64,
    pub regions: usize,
    /// Bounds on every nodal potential `x_i`.
    pub x_lower: f64,
    pub x_upper: f64,
    /// `|p_i|` bound in the local box.
    pub production_bound: f64,
}

impl Default for NetFlowConfig {
    fn default() -> Self {
        Self {
            nodes: 12,
            edge_density: 0.2,
            regions: 3,
            x_lower: 0.8,
            x_upper: 1.2,
            production_bound: 100.0,
        }
    }
}

/// Sampled network, parameters and a feasible point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetFlowInstance {
    pub config: NetFlowConfig,
    /// Undirected edges `(i, j)` with `i < j`.
    pub edges: Vec<(usize, usize)>,
    /// Sorted neighbours of every node.
    pub neighbours: Vec<Vec<usize>>,
    pub region: Vec<usize>,
    pub a: Vec<f64>,
    /// `b_ij`, `c_ij` keyed by directed edge.
    pub b: BTreeMap<(usize, usize), f64>,
    pub c: BTreeMap<(usize, usize), f64>,
    pub demand: Vec<f64>,
    /// `f_i(p) = ½ q_i p² + l_i p`.
    pub cost_quad: Vec<f64>,
    pub cost_lin: Vec<f64>,
    /// Feasible `x_i`, `p_i` and `(x_ij, y_ij)`.
    pub cert_x: Vec<f64>,
    pub cert_p: Vec<f64>,
    pub cert_flow: BTreeMap<(usize, usize), (f64, f64)>,
}

/// Per-node values used to scatter a point into a layout.
struct NodePoint<'a> {
    x: &'a [f64],
    p: &'a [f64],
    flow: &'a BTreeMap<(usize, usize), (f64, f64)>,
}

fn random_tree_graph(
    n: usize,
    density: f64,
    rng: &mut ChaCha8Rng,
) -> (Vec<(usize, usize)>, Vec<Vec<usize>>) {
    let mut edges = Vec::new();
    for k in 1..n {
        edges.push((rng.random_range(0..k), k));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random::<f64>() < density {
                edges.push((i, j));
            }
        }
    }
    edges.sort_unstable();
    let mut nb = vec![Vec::new(); n];
    for &(i, j) in &edges {
        nb[i].push(j);
        nb[j].push(i);
    }
    nb.iter_mut().for_each(|v| v.sort_unstable());
    (edges, nb)
}

/// `p_ij` at the given potentials and edge variables.
fn flow(inst: &NetFlowInstance, i: usize, j: usize, xi: f64, xy: (f64, f64)) -> f64 {
    let deg = inst.neighbours[i].len() as f64;
    inst.a[i] / deg * xi + inst.b[&(i, j)] * xy.0 + inst.c[&(i, j)] * xy.1
}

/// Random point on the cone `u² + v² = x_i x_j`.
fn cone_point(xi: f64, xj: f64, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let r = (xi * xj).sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    (r * t.cos(), r * t.sin())
}

/// Samples a connected graph (random tree plus extra edges), parameters,
/// a feasible point, and demands `d_i ≥ 0` that make that point feasible.
pub fn gen_netflow_instance(cfg: &NetFlowConfig, seed: u64) -> Result<NetFlowInstance> {
    if cfg.nodes < 2 || cfg.regions < 2 || cfg.regions > cfg.nodes {
        return Err(Error::InvalidArgument(format!(
            "netflow needs 2 ≤ regions ≤ nodes, got {} regions on {} nodes",
            cfg.regions, cfg.nodes
        )));
    }
    if !(0.0..=1.0).contains(&cfg.edge_density)
        || !(0.0 < cfg.x_lower && cfg.x_lower <= cfg.x_upper)
        || !(cfg.production_bound > 0.0)
    {
        return Err(Error::InvalidArgument("netflow bounds or density out of range".into()));
    }
    let n = cfg.nodes;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (edges, neighbours) = random_tree_graph(n, cfg.edge_density, &mut rng);
    let region = (0..n).map(|i| i * cfg.regions / n).collect();
    let a = (0..n).map(|_| rng.random_range(0.5..=2.0)).collect();
    let mut b = BTreeMap::new();
    let mut c = BTreeMap::new();
    for i in 0..n {
        for &j in &neighbours[i] {
            b.insert((i, j), rng.random_range(-1.0..=1.0));
            c.insert((i, j), rng.random_range(-1.0..=1.0));
        }
    }
    let cost_quad = (0..n).map(|_| rng.random_range(1.0..=2.0)).collect();
    let cost_lin = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let cert_x: Vec<f64> = (0..n)
        .map(|_| rng.random_range(cfg.x_lower..=cfg.x_upper))
        .collect();
    let mut cert_flow = BTreeMap::new();
    for i in 0..n {
        for &j in &neighbours[i] {
            cert_flow.insert((i, j), cone_point(cert_x[i], cert_x[j], &mut rng));
        }
    }
    let mut inst = NetFlowInstance {
        config: cfg.clone(),
        edges,
        neighbours,
        region,
        a,
        b,
        c,
        demand: vec![0.0; n],
        cost_quad,
        cost_lin,
        cert_x,
        cert_p: vec![0.0; n],
        cert_flow,
    };
    for i in 0..n {
        let out: f64 = inst.neighbours[i]
            .iter()
            .map(|&j| flow(&inst, i, j, inst.cert_x[i], inst.cert_flow[&(i, j)]))
            .sum();
        let p = out.max(0.0) + rng.random_range(0.0..=1.0);
        inst.cert_p[i] = p;
        inst.demand[i] = p - out;
    }
    if inst.cert_p.iter().any(|p| p.abs() > cfg.production_bound) {
        return Err(Error::InvalidArgument(
            "sampled production exceeds production_bound".into(),
        ));
    }
    Ok(inst)
}

impl NetFlowInstance {
    pub fn num_nodes(&self) -> usize {
        self.neighbours.len()
    }

    /// Edges whose endpoints lie in different regions.
    pub fn cross_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .copied()
            .filter(|&(i, j)| self.region[i] != self.region[j])
            .collect()
    }

    fn consensus_spec(&self, agents: usize, partition: Vec<usize>) -> ConsensusSpec {
        let mut couplings = Vec::new();
        for (i, j) in self.edges.iter().copied() {
            if partition[i] != partition[j] {
                couplings.push(Coupling {
                    owner: partition[i],
                    node: j,
                });
                couplings.push(Coupling {
                    owner: partition[j],
                    node: i,
                });
            }
        }
        couplings.sort_by_key(|c| (c.owner, c.node));
        couplings.dedup();
        let mut extra = vec![0usize; agents];
        for (i, &r) in partition.iter().enumerate() {
            extra[r] += 1 + 2 * self.neighbours[i].len();
        }
        ConsensusSpec {
            node_dims: vec![1; self.num_nodes()],
            partition,
            num_agents: agents,
            couplings,
            extra_dims: extra,
        }
    }

    /// Offset inside block `r` of `p_i` for every owned node; the
    /// `(x_ij, y_ij)` pairs follow in neighbour order.
    fn private_offsets(&self, lay: &ConsensusLayout, partition: &[usize]) -> Vec<usize> {
        let mut fill = lay.extra_offset.clone();
        let mut off = vec![0; self.num_nodes()];
        for (i, &r) in partition.iter().enumerate() {
            off[i] = fill[r];
            fill[r] += 1 + 2 * self.neighbours[i].len();
        }
        off
    }

    fn build(&self, agents: usize, partition: Vec<usize>) -> Result<(BlockProblem, ConsensusLayout)> {
        let cfg = &self.config;
        let lay = build_consensus(&self.consensus_spec(agents, partition.clone()))?;
        let priv_off = self.private_offsets(&lay, &partition);
        let mut blocks = Vec::with_capacity(agents);
        for r in 0..agents {
            let dim = lay.block_dims[r];
            let mut lower = vec![-cfg.x_upper; dim];
            let mut upper = vec![cfg.x_upper; dim];
            let mut diag = vec![0.0; dim];
            let mut linear = vec![0.0; dim];
            for &off in lay.local[r].values() {
                lower[off] = cfg.x_lower;
                upper[off] = cfg.x_upper;
            }
            let mut constraints = Vec::new();
            for (i, _) in partition.iter().enumerate().filter(|&(_, &q)| q == r) {
                let pi = priv_off[i];
                let xi = lay.local[r][&i];
                lower[pi] = -cfg.production_bound;
                upper[pi] = cfg.production_bound;
                diag[pi] = self.cost_quad[i];
                linear[pi] = self.cost_lin[i];
                let mut terms = vec![(pi, 1.0), (xi, -self.a[i])];
                for (k, &j) in self.neighbours[i].iter().enumerate() {
                    let (u, v) = (pi + 1 + 2 * k, pi + 2 + 2 * k);
                    terms.push((u, -self.b[&(i, j)]));
                    terms.push((v, -self.c[&(i, j)]));
                    constraints.push(Constraint::RotatedCone {
                        u,
                        v,
                        p: xi,
                        q: lay.local[r][&j],
                    });
                }
                constraints.push(Constraint::Linear {
                    terms,
                    rhs: self.demand[i],
                });
            }
            blocks.push(BlockSpec {
                dim,
                objective: Objective::Quadratic {
                    diag,
                    linear,
                    dense: None,
                    offset: 0.0,
                },
                set: SetKind::Manifold {
                    constraints,
                    base: Box::new(SetKind::Box { lower, upper }),
                },
            });
        }
        let n2 = lay.b.cols();
        let p = BlockProblem::new(
            blocks,
            GlobalSet::uniform_box(n2, cfg.x_lower, cfg.x_upper),
            lay.a.clone(),
            lay.b.clone(),
        )?;
        Ok((p, lay))
    }

    /// One block per region.
    pub fn to_problem(&self) -> Result<(BlockProblem, ConsensusLayout)> {
        self.build(self.config.regions, self.region.clone())
    }

    /// The undivided network as a single block.
    pub fn reference_problem(&self) -> Result<(BlockProblem, ConsensusLayout)> {
        self.build(1, vec![0; self.num_nodes()])
    }

    /// Writes a per-node point into a layout; `copy_x(agent, node)` gives
    /// the value of a copied potential.
    fn scatter(
        &self,
        lay: &ConsensusLayout,
        partition: &[usize],
        pt: &NodePoint,
        copy_x: &mut dyn FnMut(usize, usize) -> f64,
    ) -> Vec<f64> {
        let priv_off = self.private_offsets(lay, partition);
        let n1 = lay.block_offsets.last().unwrap() + lay.block_dims.last().unwrap();
        let mut x = vec![0.0; n1];
        for (r, map) in lay.local.iter().enumerate() {
            for (&node, &off) in map {
                x[lay.block_offsets[r] + off] = if partition[node] == r {
                    pt.x[node]
                } else {
                    copy_x(r, node)
                };
            }
        }
        for (i, &r) in partition.iter().enumerate() {
            let base = lay.block_offsets[r] + priv_off[i];
            x[base] = pt.p[i];
            for (k, &j) in self.neighbours[i].iter().enumerate() {
                let (u, v) = pt.flow[&(i, j)];
                x[base + 1 + 2 * k] = u;
                x[base + 2 + 2 * k] = v;
            }
        }
        x
    }

    /// Certificate `(x, x̄)` for the regional problem.
    pub fn certificate(&self, lay: &ConsensusLayout) -> Vec<f64> {
        let pt = NodePoint {
            x: &self.cert_x,
            p: &self.cert_p,
            flow: &self.cert_flow,
        };
        let mut v = self.scatter(lay, &self.region, &pt, &mut |_, node| self.cert_x[node]);
        let mut xbar = vec![0.0; lay.b.cols()];
        for (&node, &off) in &lay.global_offset {
            xbar[off] = self.cert_x[node];
        }
        v.extend(xbar);
        v
    }

    /// Block-feasible start: fresh potentials, independently drawn copies,
    /// cone points, and productions that close every balance.
    pub fn block_feasible_start(&self, lay: &ConsensusLayout, seed: u64) -> Vec<f64> {
        let cfg = &self.config;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.num_nodes();
        let xs: Vec<f64> = (0..n)
            .map(|_| rng.random_range(cfg.x_lower..=cfg.x_upper))
            .collect();
        let mut copies = BTreeMap::new();
        for (r, map) in lay.local.iter().enumerate() {
            for &node in map.keys() {
                if self.region[node] != r {
                    copies.insert((r, node), rng.random_range(cfg.x_lower..=cfg.x_upper));
                }
            }
        }
        let seen_x = |i: usize, j: usize| {
            let r = self.region[i];
            if self.region[j] == r {
                xs[j]
            } else {
                copies[&(r, j)]
            }
        };
        let mut fl = BTreeMap::new();
        let mut ps = vec![0.0; n];
        for i in 0..n {
            let mut out = 0.0;
            for &j in &self.neighbours[i] {
                let xy = cone_point(xs[i], seen_x(i, j), &mut rng);
                out += flow(self, i, j, xs[i], xy);
                fl.insert((i, j), xy);
            }
            ps[i] = (self.demand[i] + out).clamp(-cfg.production_bound, cfg.production_bound);
        }
        let pt = NodePoint {
            x: &xs,
            p: &ps,
            flow: &fl,
        };
        self.scatter(lay, &self.region, &pt, &mut |r, node| copies[&(r, node)])
    }
}

/// Regional problem with certificate, a block-feasible start and the
/// single-block reference.
pub fn gen_netflow(cfg: &NetFlowConfig, seed: u64) -> Result<Instance> {
    let net = gen_netflow_instance(cfg, seed)?;
    let (p, lay) = net.to_problem()?;
    let (reference, _) = net.reference_problem()?;
    let mut inst = Instance::new(
        GeneratorTag {
            family: "netflow".into(),
            params: json!(cfg),
            seed,
        },
        p,
    );
    inst.certificate = Some(net.certificate(&lay));
    inst.initial_x = Some(net.block_feasible_start(&lay, seed ^ 0x5eed));
    inst.reference = Some(reference);
    Ok(inst)
}
