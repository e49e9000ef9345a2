//! Coulomb energy of `n_p` unit vectors in R³, split over three agents.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::json;

use crate::error::{Error, Result};
use crate::linalg::{dist, SparseMatrix};
use crate::problem::{
    build_consensus, BlockProblem, BlockSpec, ConsensusLayout, ConsensusSpec, Coupling,
    GeneratorTag, GlobalSet, Instance, Objective, SetKind,
};

pub const SPHERE_BLOCKS: usize = 3;
/// Minimum pairwise distance of generated starting points.
pub const MIN_START_DISTANCE: f64 = 0.1;
/// Below this distance the Coulomb oracle reports an error.
pub const SINGULAR_DISTANCE: f64 = 1e-8;

/// Layout of a generated sphere instance.
#[derive(Debug, Clone)]
pub struct SphereInstance {
    pub n_p: usize,
    /// Block of every point.
    pub partition: Vec<usize>,
    /// `(owner, foreign point)` copies.
    pub couplings: Vec<Coupling>,
    /// Every pair `(i, j)`, `i < j`, with the block that evaluates it.
    pub pair_owner: Vec<((usize, usize), usize)>,
    pub layout: ConsensusLayout,
}

/// Points go round-robin to blocks. A pair inside one block stays there; a
/// pair across blocks `u` and `u+1 (mod 3)` goes to `u`, so each block
/// copies the points of exactly one neighbour.
pub fn pair_owner(bi: usize, bj: usize) -> usize {
    if bi == bj || (bi + 1) % SPHERE_BLOCKS == bj {
        bi
    } else {
        bj
    }
}

fn sphere_points(n_p: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let mut pts: Vec<[f64; 3]> = Vec::with_capacity(n_p);
    while pts.len() < n_p {
        let mut v = [0.0f64; 3];
        for c in &mut v {
            *c = StandardNormal.sample(rng);
        }
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n < 1e-12 {
            continue;
        }
        v.iter_mut().for_each(|c| *c /= n);
        if pts.iter().all(|q| dist(q, &v) >= MIN_START_DISTANCE) {
            pts.push(v);
        }
    }
    pts
}

/// Single-block model of the same energy with no copies.
pub fn sphere_reference(n_p: usize) -> Result<BlockProblem> {
    let pairs = (0..n_p)
        .flat_map(|i| (i + 1..n_p).map(move |j| (i, j)))
        .collect();
    BlockProblem::new(
        vec![BlockSpec {
            dim: 3 * n_p,
            objective: Objective::Coulomb {
                point_dim: 3,
                pairs,
                min_distance: SINGULAR_DISTANCE,
            },
            set: SetKind::Spheres {
                point_dim: 3,
                radius: 1.0,
            },
        }],
        GlobalSet::WholeSpace { dim: 0 },
        SparseMatrix::zeros(0, 3 * n_p),
        SparseMatrix::zeros(0, 0),
    )
}

pub fn sphere_layout(n_p: usize) -> Result<SphereInstance> {
    if n_p < 2 {
        return Err(Error::InvalidArgument(format!("sphere needs n_p ≥ 2, got {n_p}")));
    }
    let partition: Vec<usize> = (0..n_p).map(|i| i % SPHERE_BLOCKS).collect();
    let mut couplings = Vec::new();
    let mut pair_owners = Vec::new();
    for i in 0..n_p {
        for j in i + 1..n_p {
            let owner = pair_owner(partition[i], partition[j]);
            pair_owners.push(((i, j), owner));
            for node in [i, j] {
                let c = Coupling { owner, node };
                if partition[node] != owner && !couplings.contains(&c) {
                    couplings.push(c);
                }
            }
        }
    }
    couplings.sort_by_key(|c| (c.owner, c.node));
    let layout = build_consensus(&ConsensusSpec {
        node_dims: vec![3; n_p],
        partition: partition.clone(),
        num_agents: SPHERE_BLOCKS,
        couplings: couplings.clone(),
        extra_dims: Vec::new(),
    })?;
    Ok(SphereInstance {
        n_p,
        partition,
        couplings,
        pair_owner: pair_owners,
        layout,
    })
}

impl SphereInstance {
    pub fn to_problem(&self) -> Result<BlockProblem> {
        let lay = &self.layout;
        let blocks = (0..SPHERE_BLOCKS)
            .map(|b| {
                let pairs = self
                    .pair_owner
                    .iter()
                    .filter(|&&(_, o)| o == b)
                    .map(|&((i, j), _)| (lay.local[b][&i] / 3, lay.local[b][&j] / 3))
                    .collect();
                BlockSpec {
                    dim: lay.block_dims[b],
                    objective: Objective::Coulomb {
                        point_dim: 3,
                        pairs,
                        min_distance: SINGULAR_DISTANCE,
                    },
                    set: SetKind::Spheres {
                        point_dim: 3,
                        radius: 1.0,
                    },
                }
            })
            .collect();
        let n2 = lay.b.cols();
        BlockProblem::new(
            blocks,
            GlobalSet::uniform_box(n2, -1.0, 1.0),
            lay.a.clone(),
            lay.b.clone(),
        )
    }

    /// Stacks point coordinates into `x`, copies included.
    pub fn scatter(&self, pts: &[[f64; 3]]) -> Vec<f64> {
        let lay = &self.layout;
        let n1 = lay.block_offsets[SPHERE_BLOCKS - 1] + lay.block_dims[SPHERE_BLOCKS - 1];
        let mut x = vec![0.0; n1];
        for (b, map) in lay.local.iter().enumerate() {
            for (&node, &off) in map {
                let at = lay.block_offsets[b] + off;
                x[at..at + 3].copy_from_slice(&pts[node]);
            }
        }
        x
    }
}

/// Sphere benchmark with a spread-out starting point (copies agree with
/// their originals) and the single-block reference model.
pub fn gen_sphere(n_p: usize, seed: u64) -> Result<Instance> {
    let si = sphere_layout(n_p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = sphere_points(n_p, &mut rng);
    let mut inst = Instance::new(
        GeneratorTag {
            family: "sphere".into(),
            params: json!({ "n_p": n_p }),
            seed,
        },
        si.to_problem()?,
    );
    inst.initial_x = Some(si.scatter(&pts));
    inst.reference = Some(sphere_reference(n_p)?);
    Ok(inst)
}

/// Random unit vectors at least [`MIN_START_DISTANCE`] apart, flattened.
pub fn random_sphere_start(n_p: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sphere_points(n_p, &mut rng).concat()
}
