//! Block-structured problem `min Σ f_i(x^i)` s.t. `x^i ∈ X_i`, `x̄ ∈ X̄`,
//! `Ax + Bx̄ = 0`, plus the consensus-matrix builder and instance files.

mod consensus;
mod instance;
mod oracles;

pub use consensus::{build_consensus, certify_image_inclusion, ConsensusLayout, ConsensusSpec, Coupling};
pub use instance::{GeneratorTag, Instance, INSTANCE_FORMAT_VERSION};
pub use oracles::{BlockObjective, Constraint, GlobalSet, Objective, Projector, SetKind};

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{norm, SparseMatrix};

/// One agent: its variable count, smooth objective and constraint set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSpec {
    pub dim: usize,
    pub objective: Objective,
    pub set: SetKind,
}

/// `‖d₁‖, ‖d₂‖, ‖d₃‖`, `‖Ax + Bx̄‖` and `‖z‖` at a point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub d1_norm: f64,
    pub d2_norm: f64,
    pub d3_norm: f64,
    pub primal_gap: f64,
    pub z_norm: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct RawProblem {
    blocks: Vec<BlockSpec>,
    global_set: GlobalSet,
    a: SparseMatrix,
    b: SparseMatrix,
}

/// Immutable problem description. Construction validates every shape.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawProblem", into = "RawProblem")]
pub struct BlockProblem {
    blocks: Vec<BlockSpec>,
    global_set: GlobalSet,
    a: SparseMatrix,
    b: SparseMatrix,
    offsets: Vec<usize>,
    btb_diag: Option<Vec<f64>>,
}

impl std::fmt::Debug for RawProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RawProblem({} blocks)", self.blocks.len())
    }
}

impl TryFrom<RawProblem> for BlockProblem {
    type Error = Error;

    fn try_from(r: RawProblem) -> Result<Self> {
        Self::new(r.blocks, r.global_set, r.a, r.b)
    }
}

impl From<BlockProblem> for RawProblem {
    fn from(p: BlockProblem) -> Self {
        RawProblem {
            blocks: p.blocks,
            global_set: p.global_set,
            a: p.a,
            b: p.b,
        }
    }
}

impl BlockProblem {
    pub fn new(
        blocks: Vec<BlockSpec>,
        global_set: GlobalSet,
        a: SparseMatrix,
        b: SparseMatrix,
    ) -> Result<Self> {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for (i, blk) in blocks.iter().enumerate() {
            blk.objective
                .check_dim(blk.dim)
                .map_err(|m| Error::InvalidArgument(format!("block {i} objective: {m}")))?;
            blk.set
                .check_dim(blk.dim)
                .map_err(|m| Error::InvalidArgument(format!("block {i} set: {m}")))?;
            offsets.push(offsets[i] + blk.dim);
        }
        let n1 = *offsets.last().unwrap();
        check_len("BlockProblem: cols(A) vs block dims", n1, a.cols())?;
        check_len("BlockProblem: rows(B) vs rows(A)", a.rows(), b.rows())?;
        check_len("BlockProblem: cols(B) vs global dim", global_set.dim(), b.cols())?;
        if let GlobalSet::Box { lower, upper } = &global_set {
            if lower.len() != upper.len() || lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                return Err(Error::InvalidArgument("global box has lower > upper".into()));
            }
        }
        let col_sq = b.col_sq_norms();
        if let Some(j) = col_sq.iter().position(|&d| d == 0.0) {
            return Err(Error::Singular(format!("column {j} of B is identically zero")));
        }
        let btb_diag = if b.has_disjoint_columns() {
            Some(col_sq)
        } else {
            None
        };
        Ok(Self {
            blocks,
            global_set,
            a,
            b,
            offsets,
            btb_diag,
        })
    }

    pub fn blocks(&self) -> &[BlockSpec] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn global_set(&self) -> &GlobalSet {
        &self.global_set
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &SparseMatrix {
        &self.b
    }

    /// Total local dimension `n₁`.
    pub fn n1(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Global dimension `n₂`.
    pub fn n2(&self) -> usize {
        self.b.cols()
    }

    /// Number of coupling rows `m`.
    pub fn m(&self) -> usize {
        self.a.rows()
    }

    pub fn block_offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub fn block_range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Diagonal of `BᵀB` when it is diagonal (no row of B has two entries).
    pub fn btb_diagonal(&self) -> Option<&[f64]> {
        self.btb_diag.as_deref()
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        check_len("x", self.n1(), x.len())
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.check_x(x)?;
        let mut total = 0.0;
        for (i, blk) in self.blocks.iter().enumerate() {
            total += blk
                .objective
                .evaluate(&x[self.block_range(i)], None)
                .map_err(|message| Error::Oracle { block: i, message })?;
        }
        Ok(total)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        let mut g = vec![0.0; x.len()];
        for (i, blk) in self.blocks.iter().enumerate() {
            let r = self.block_range(i);
            blk.objective
                .evaluate(&x[r.clone()], Some(&mut g[r]))
                .map_err(|message| Error::Oracle { block: i, message })?;
        }
        Ok(g)
    }

    /// `Ax + Bx̄`.
    pub fn coupling(&self, x: &[f64], xbar: &[f64]) -> Result<Vec<f64>> {
        self.check_x(x)?;
        check_len("x̄", self.n2(), xbar.len())?;
        let mut r = self.a.mul(x);
        self.b.mul_add(xbar, &mut r);
        Ok(r)
    }

    /// `Ax + Bx̄ + z`.
    pub fn primal_residual(&self, x: &[f64], xbar: &[f64], z: &[f64]) -> Result<Vec<f64>> {
        check_len("z", self.m(), z.len())?;
        let mut r = self.coupling(x, xbar)?;
        for (ri, zi) in r.iter_mut().zip(z) {
            *ri += zi;
        }
        Ok(r)
    }

    /// Per-block set violation (projection gap plus equality residual).
    pub fn block_violation(&self, i: usize, x: &[f64]) -> f64 {
        self.blocks[i].set.violation(&x[self.block_range(i)])
    }

    /// Largest block violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        (0..self.num_blocks())
            .map(|i| self.block_violation(i, x))
            .fold(0.0, f64::max)
    }

    /// Errors with the first block whose violation exceeds `tol`.
    pub fn check_feasible(&self, x: &[f64], tol: f64) -> Result<()> {
        self.check_x(x)?;
        for i in 0..self.num_blocks() {
            let v = self.block_violation(i, x);
            if !(v <= tol) {
                return Err(Error::Infeasible {
                    block: i,
                    violation: v,
                });
            }
        }
        Ok(())
    }

    pub fn primal_gap(&self, x: &[f64], xbar: &[f64]) -> Result<f64> {
        Ok(norm(&self.coupling(x, xbar)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn free_block(dim: usize, objective: Objective) -> BlockSpec {
        BlockSpec {
            dim,
            objective,
            set: SetKind::WholeSpace,
        }
    }

    fn toy() -> BlockProblem {
        let blocks = vec![
            free_block(2, Objective::separable_quadratic(&[2.0, 2.0], &[0.0, 0.0])),
            free_block(1, Objective::separable_quadratic(&[2.0], &[0.0])),
        ];
        let a = SparseMatrix::from_triplets(2, 3, vec![(0, 0, 1.0), (1, 2, 1.0)]).unwrap();
        let b = SparseMatrix::from_triplets(2, 1, vec![(0, 0, -1.0), (1, 0, -1.0)]).unwrap();
        BlockProblem::new(blocks, GlobalSet::WholeSpace { dim: 1 }, a, b).unwrap()
    }

    #[test]
    fn objective_by_hand() {
        let p = toy();
        assert_eq!(p.objective(&[1.0, 0.0, 2.0]).unwrap(), 5.0);
        assert_eq!(p.gradient(&[1.0, 0.0, 2.0]).unwrap(), vec![2.0, 0.0, 4.0]);
    }

    #[test]
    fn zero_objectives_give_zero() {
        let blocks = vec![free_block(2, Objective::Zero)];
        let p = BlockProblem::new(
            blocks,
            GlobalSet::WholeSpace { dim: 0 },
            SparseMatrix::zeros(0, 2),
            SparseMatrix::zeros(0, 0),
        )
        .unwrap();
        assert_eq!(p.objective(&[3.0, 4.0]).unwrap(), 0.0);
        assert_eq!(p.m(), 0);
    }

    #[test]
    fn primal_residual_cases() {
        let p = toy();
        let x = [1.0, 5.0, 2.0];
        let xbar = [0.5];
        let c = p.coupling(&x, &xbar).unwrap();
        let z: Vec<f64> = c.iter().map(|v| -v).collect();
        assert_eq!(p.primal_residual(&x, &xbar, &z).unwrap(), vec![0.0, 0.0]);
        assert_eq!(
            p.primal_residual(&[0.0; 3], &[0.0], &[7.0, -1.0]).unwrap(),
            vec![7.0, -1.0]
        );
        assert!(p.primal_residual(&[0.0; 2], &[0.0], &[0.0; 2]).is_err());
    }

    #[test]
    fn zero_column_of_b_rejected() {
        let blocks = vec![free_block(1, Objective::Zero)];
        let a = SparseMatrix::identity(1);
        let b = SparseMatrix::zeros(1, 1);
        assert!(matches!(
            BlockProblem::new(blocks, GlobalSet::WholeSpace { dim: 1 }, a, b),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn oracle_error_carries_block() {
        let blocks = vec![
            free_block(1, Objective::Zero),
            free_block(
                6,
                Objective::Coulomb {
                    point_dim: 3,
                    pairs: vec![(0, 1)],
                    min_distance: 1e-8,
                },
            ),
        ];
        let p = BlockProblem::new(
            blocks,
            GlobalSet::WholeSpace { dim: 0 },
            SparseMatrix::zeros(0, 7),
            SparseMatrix::zeros(0, 0),
        )
        .unwrap();
        match p.objective(&[0.0; 7]) {
            Err(Error::Oracle { block, .. }) => assert_eq!(block, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let p = toy();
        let s = serde_json::to_string(&p).unwrap();
        let q: BlockProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(serde_json::to_string(&q).unwrap(), s);
        assert_eq!(q.block_offsets(), &[0, 2, 3]);
    }
}
