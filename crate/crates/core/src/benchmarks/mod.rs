//! Benchmark families, the infeasible stress case, random consensus
//! instances and a centralized reference solve.

mod netflow;
mod sphere;

pub use netflow::{gen_netflow, gen_netflow_instance, NetFlowConfig, NetFlowInstance};
pub use sphere::{
    gen_sphere, pair_owner, random_sphere_start, sphere_layout, sphere_reference, SphereInstance,
    MIN_START_DISTANCE, SINGULAR_DISTANCE, SPHERE_BLOCKS,
};

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::problem::{
    build_consensus, BlockObjective, BlockProblem, BlockSpec, ConsensusSpec, Constraint,
    Coupling, GeneratorTag, GlobalSet, Instance, Objective, Projector, SetKind,
};
use crate::subsolvers::{XBlockSolver, XSolverConfig};

/// `½(x₁ − 1)² + ½(x₂ + 1)²` over `[−10, 10]²` with `x₁ = x̄ = x₂`; the
/// solution is the origin.
pub fn gen_toy() -> Result<Instance> {
    let blk = |c: f64| BlockSpec {
        dim: 1,
        objective: Objective::separable_quadratic(&[1.0], &[c]),
        set: SetKind::Box {
            lower: vec![-10.0],
            upper: vec![10.0],
        },
    };
    let p = BlockProblem::new(
        vec![blk(1.0), blk(-1.0)],
        GlobalSet::WholeSpace { dim: 1 },
        SparseMatrix::identity(2),
        SparseMatrix::from_triplets(2, 1, vec![(0, 0, -1.0), (1, 0, -1.0)])?,
    )?;
    Ok(Instance::new(
        GeneratorTag {
            family: "toy".into(),
            params: json!({}),
            seed: 0,
        },
        p,
    ))
}

/// Unit sphere in Rⁿ against the box `[2, 3]ⁿ` with `x = x̄`.
pub fn gen_infeasible(n: usize, seed: u64) -> Result<Instance> {
    if n == 0 {
        return Err(Error::InvalidArgument("infeasible instance needs n ≥ 1".into()));
    }
    let p = BlockProblem::new(
        vec![BlockSpec {
            dim: n,
            objective: Objective::Zero,
            set: SetKind::Spheres {
                point_dim: n,
                radius: 1.0,
            },
        }],
        GlobalSet::uniform_box(n, 2.0, 3.0),
        SparseMatrix::identity(n),
        SparseMatrix::scaled_identity(n, -1.0),
    )?;
    Ok(Instance::new(
        GeneratorTag {
            family: "infeasible".into(),
            params: json!({ "n": n }),
            seed,
        },
        p,
    ))
}

/// `‖(2,…,2)‖ − 1`, the distance between the sphere and the box.
pub fn infeasible_gap(n: usize) -> f64 {
    2.0 * (n as f64).sqrt() - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomConsensusConfig {
    pub max_n1: usize,
    pub max_m: usize,
    pub max_agents: usize,
    pub max_nodes: usize,
    /// Chance that an agent copies a given foreign node.
    pub copy_probability: f64,
}

impl Default for RandomConsensusConfig {
    fn default() -> Self {
        Self {
            max_n1: 60,
            max_m: 40,
            max_agents: 4,
            max_nodes: 10,
            copy_probability: 0.3,
        }
    }
}

/// Random duplication pattern over nodes of dimension 1–3. Agents get a box
/// `[−2, 2]` with a possibly indefinite diagonal quadratic, the whole space
/// with a strongly convex one, or unit spheres per node; `X̄` is a box.
pub fn gen_random_consensus(cfg: &RandomConsensusConfig, seed: u64) -> Result<Instance> {
    if cfg.max_agents < 2 || cfg.max_nodes < 2 || cfg.max_n1 < 2 {
        return Err(Error::InvalidArgument("random consensus needs room for two agents".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let na = rng.random_range(2..=cfg.max_agents);
        let nn = rng.random_range(na.max(2)..=cfg.max_nodes.max(na));
        let sphere_dim = rng.random_range(1..=3);
        let kinds: Vec<u8> = (0..na).map(|_| rng.random_range(0..3)).collect();
        let partition: Vec<usize> = (0..nn)
            .map(|k| if k < na { k } else { rng.random_range(0..na) })
            .collect();
        let node_dims: Vec<usize> = partition
            .iter()
            .map(|&a| {
                if kinds[a] == 2 {
                    sphere_dim
                } else {
                    rng.random_range(1..=3)
                }
            })
            .collect();
        let mut couplings = Vec::new();
        for owner in 0..na {
            for node in 0..nn {
                let fits = kinds[owner] != 2 || node_dims[node] == sphere_dim;
                if partition[node] != owner && fits && rng.random::<f64>() < cfg.copy_probability {
                    couplings.push(Coupling { owner, node });
                }
            }
        }
        if couplings.is_empty() {
            continue;
        }
        let lay = build_consensus(&ConsensusSpec {
            node_dims: node_dims.clone(),
            partition: partition.clone(),
            num_agents: na,
            couplings,
            extra_dims: Vec::new(),
        })?;
        let n1: usize = lay.block_dims.iter().sum();
        if n1 > cfg.max_n1 || lay.a.rows() > cfg.max_m {
            continue;
        }
        let blocks = (0..na)
            .map(|a| {
                let dim = lay.block_dims[a];
                let centers: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
                let (lo, set) = match kinds[a] {
                    0 => (
                        -0.5,
                        SetKind::Box {
                            lower: vec![-2.0; dim],
                            upper: vec![2.0; dim],
                        },
                    ),
                    1 => (0.5, SetKind::WholeSpace),
                    _ => (
                        -0.5,
                        SetKind::Spheres {
                            point_dim: sphere_dim,
                            radius: 1.0,
                        },
                    ),
                };
                let w: Vec<f64> = (0..dim).map(|_| rng.random_range(lo..2.0)).collect();
                BlockSpec {
                    dim,
                    objective: Objective::separable_quadratic(&w, &centers),
                    set,
                }
            })
            .collect();
        let n2 = lay.b.cols();
        let p = BlockProblem::new(blocks, GlobalSet::uniform_box(n2, -2.0, 2.0), lay.a, lay.b)?;
        return Ok(Instance::new(
            GeneratorTag {
                family: "random_consensus".into(),
                params: json!(cfg),
                seed,
            },
            p,
        ));
    }
    Err(Error::InvalidArgument(
        "could not sample a random consensus instance within the size limits".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CentralizedConfig {
    pub starts: usize,
    pub seed: u64,
    /// Stationarity tolerance of the local solve.
    pub tol: f64,
    /// Restarts of the local solver from its own output.
    pub max_rounds: usize,
    /// Largest set violation accepted at the end.
    pub feasibility_tol: f64,
    pub x_solver: XSolverConfig,
}

impl Default for CentralizedConfig {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 0,
            tol: 1e-6,
            max_rounds: 40,
            feasibility_tol: 1e-7,
            x_solver: XSolverConfig {
                max_steps: 20_000,
                ..XSolverConfig::default()
            },
        }
    }
}

/// Sum of the block objectives of `p` over the stacked `(x, x̄)`.
struct StackedObjective(BlockProblem);

impl BlockObjective for StackedObjective {
    fn evaluate(&self, v: &[f64], grad: Option<&mut [f64]>) -> std::result::Result<f64, String> {
        let p = &self.0;
        let x = &v[..p.n1()];
        let val = p.objective(x).map_err(|e| e.to_string())?;
        if let Some(g) = grad {
            let gx = p.gradient(x).map_err(|e| e.to_string())?;
            g[..p.n1()].copy_from_slice(&gx);
            g[p.n1()..].iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(val)
    }
}

/// Product of the block sets and `X̄`, each projected onto its base.
struct StackedProjector(BlockProblem);

impl Projector for StackedProjector {
    fn project(&self, v: &mut [f64]) {
        let p = &self.0;
        let (x, xbar) = v.split_at_mut(p.n1());
        for (i, blk) in p.blocks().iter().enumerate() {
            blk.set.project(&mut x[p.block_range(i)]);
        }
        p.global_set().project(xbar);
    }
}

fn shifted(c: &Constraint, off: usize) -> Constraint {
    match c {
        Constraint::Linear { terms, rhs } => Constraint::Linear {
            terms: terms.iter().map(|&(i, v)| (i + off, v)).collect(),
            rhs: *rhs,
        },
        Constraint::RotatedCone { u, v, p, q } => Constraint::RotatedCone {
            u: u + off,
            v: v + off,
            p: p + off,
            q: q + off,
        },
        Constraint::Sphere { indices, radius } => Constraint::Sphere {
            indices: indices.iter().map(|i| i + off).collect(),
            radius: *radius,
        },
    }
}

/// All of `(x, x̄)` in one block; block equality constraints and the rows
/// of `Ax + Bx̄ = 0` become manifold constraints.
pub fn stack_problem(p: &BlockProblem) -> Result<BlockProblem> {
    let mut constraints = Vec::new();
    for (i, blk) in p.blocks().iter().enumerate() {
        let off = p.block_offsets()[i];
        constraints.extend(blk.set.constraints().iter().map(|c| shifted(c, off)));
    }
    let n1 = p.n1();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.m()];
    for (r, c, v) in p.a().triplets() {
        rows[r].push((c, v));
    }
    for (r, c, v) in p.b().triplets() {
        rows[r].push((n1 + c, v));
    }
    constraints.extend(rows.into_iter().map(|terms| Constraint::Linear { terms, rhs: 0.0 }));
    let dim = n1 + p.n2();
    BlockProblem::new(
        vec![BlockSpec {
            dim,
            objective: Objective::Custom(Arc::new(StackedObjective(p.clone()))),
            set: SetKind::Manifold {
                constraints,
                base: Box::new(SetKind::Custom(Arc::new(StackedProjector(p.clone())))),
            },
        }],
        GlobalSet::WholeSpace { dim: 0 },
        SparseMatrix::zeros(0, dim),
        SparseMatrix::zeros(0, 0),
    )
}

/// Best local value of a single-block solve over several random starts.
///
/// Uses the instance's reference model when present, otherwise the stacked
/// problem. The returned point lives in that model's variables.
pub fn solve_centralized(inst: &Instance, cfg: &CentralizedConfig) -> Result<(f64, Vec<f64>)> {
    let q = match &inst.reference {
        Some(r) => r.clone(),
        None => stack_problem(&inst.problem)?,
    };
    if q.m() != 0 {
        return Err(Error::InvalidArgument("centralized model must be uncoupled".into()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in 0..cfg.starts {
        let seed = cfg.seed.wrapping_add(s as u64);
        let x0 = match inst.generator.family.as_str() {
            "sphere" if inst.reference.is_some() => random_sphere_start(q.n1() / 3, seed),
            _ => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..q.n1()).map(|_| StandardNormal.sample(&mut rng)).collect()
            }
        };
        if let Ok((val, x)) = local_solve(&q, x0, cfg) {
            if best.as_ref().is_none_or(|(b, _)| val < *b) {
                best = Some((val, x));
            }
        }
    }
    best.ok_or(Error::CentralizedFailed(cfg.starts))
}

fn local_solve(q: &BlockProblem, mut x: Vec<f64>, cfg: &CentralizedConfig) -> Result<(f64, Vec<f64>)> {
    let mut solver = XBlockSolver::new(q, cfg.x_solver.clone())?;
    for b in 0..q.num_blocks() {
        q.blocks()[b].set.project(&mut x[q.block_range(b)]);
    }
    for _ in 0..cfg.max_rounds {
        let rep = solver.solve(q, &mut x, &[], &[], &[], 1.0, 0.0, cfg.tol)?;
        if rep.residual <= cfg.tol {
            break;
        }
    }
    let v = q.max_violation(&x);
    if !(v <= cfg.feasibility_tol) {
        return Err(Error::Infeasible { block: 0, violation: v });
    }
    Ok((q.objective(&x)?, x))
}

/// `(distributed − centralized)/|centralized| × 100`.
pub fn gap_percent(distributed: f64, centralized: f64) -> f64 {
    (distributed - centralized) / centralized.abs() * 100.0
}
