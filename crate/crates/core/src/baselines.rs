//! Comparison solvers: the pure penalty method and a one-level relaxation
//! solved by a single proximal three-block ADMM.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::inner::{run_inner_with, InnerConfig, InnerObserver};
use crate::linalg::norm;
use crate::outer::{default_start, run_outer, OuterConfig, SolveResult, SolveStatus, ZeroDual};
use crate::problem::{BlockProblem, ResidualReport};
use crate::subsolvers::{solve_xbar_block, XBlockSolver, XSolverConfig};
use crate::trace::{Scope, TraceRecord};

/// Outer loop of the two-level method with `λ ≡ 0`.
pub fn run_penalty(p: &BlockProblem, cfg: &OuterConfig) -> Result<SolveResult> {
    run_outer(p, cfg, None, &mut ZeroDual, "penalty", None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelaxationConfig {
    pub eps: f64,
    /// Defaults to `1/ε²`.
    pub beta: Option<f64>,
    /// Defaults to `3/ε²`.
    pub rho: Option<f64>,
    /// Proximal weight on both the x and x̄ blocks; defaults to `0.01/ε`.
    pub prox: Option<f64>,
    pub max_iters: usize,
    pub record_potential: bool,
    pub record_trace: bool,
    pub x_solver: XSolverConfig,
}

impl Default for RelaxationConfig {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            beta: None,
            rho: None,
            prox: None,
            max_iters: 20_000,
            record_potential: cfg!(test),
            record_trace: true,
            x_solver: XSolverConfig::default(),
        }
    }
}

impl RelaxationConfig {
    pub fn beta(&self) -> f64 {
        self.beta.unwrap_or(1.0 / (self.eps * self.eps))
    }

    pub fn rho(&self) -> f64 {
        self.rho.unwrap_or(3.0 / (self.eps * self.eps))
    }

    pub fn prox(&self) -> f64 {
        self.prox.unwrap_or(0.01 / self.eps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::Config {
                field: "relaxation.eps".into(),
                message: "must be positive".into(),
            });
        }
        for (name, v) in [("beta", self.beta()), ("rho", self.rho()), ("prox", self.prox())] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config {
                    field: format!("relaxation.{name}"),
                    message: "must be positive and finite".into(),
                });
            }
        }
        self.x_solver.validate()
    }
}

/// One-level ADMM on `min f(x) + (β/2)‖z‖²` s.t. `Ax + Bx̄ + z = 0`.
pub fn run_relaxation(p: &BlockProblem, cfg: &RelaxationConfig) -> Result<SolveResult> {
    run_relaxation_from(p, cfg, None, None)
}

pub fn run_relaxation_from(
    p: &BlockProblem,
    cfg: &RelaxationConfig,
    x0: Option<&[f64]>,
    observer: Option<&mut dyn InnerObserver>,
) -> Result<SolveResult> {
    cfg.validate()?;
    let (beta, rho, h) = (cfg.beta(), cfg.rho(), cfg.prox());
    let x = match x0 {
        Some(v) => {
            check_len("x⁰", p.n1(), v.len())?;
            v.to_vec()
        }
        None => default_start(p),
    };
    let m = p.m();
    let zeros = vec![0.0; m];
    let mut xbar = vec![0.0; p.n2()];
    p.global_set().project(&mut xbar);
    let xbar = solve_xbar_block(p, &x, &zeros, &zeros, 1.0, &xbar)?;
    let z: Vec<f64> = p.coupling(&x, &xbar)?.iter().map(|v| -v).collect();

    let inner_cfg = InnerConfig {
        rho_factor: rho / beta,
        tolerances: [cfg.eps; 3],
        max_iters: cfg.max_iters,
        record_potential: cfg.record_potential,
        record_trace: cfg.record_trace,
        prox_x: h,
        prox_xbar: h,
        x_solver: cfg.x_solver.clone(),
    };
    let mut solver = XBlockSolver::new(p, cfg.x_solver.clone())?;
    let res = run_inner_with(
        p,
        &zeros,
        beta,
        (&x, &xbar, &z),
        &inner_cfg,
        &mut solver,
        observer,
        1,
    )?;
    let gap = p.primal_gap(&res.x, &res.xbar)?;
    let status = if !res.converged {
        SolveStatus::BudgetExhausted
    } else if gap <= cfg.eps {
        SolveStatus::EpsStationary
    } else {
        SolveStatus::RelaxedStationary
    };
    let objective = p.objective(&res.x)?;
    let report = ResidualReport {
        d1_norm: norm(&res.d1),
        d2_norm: norm(&res.d2),
        d3_norm: norm(&res.d3),
        primal_gap: gap,
        z_norm: norm(&res.z),
    };
    let mut trace = res.trace;
    trace.push(TraceRecord {
        scope: Scope::Outer,
        k: 1,
        t: res.iterations,
        beta,
        rho,
        l_val: f64::NAN,
        d1: report.d1_norm,
        d2: report.d2_norm,
        d3: report.d3_norm,
        z_norm: report.z_norm,
        gap,
        lambda_norm: 0.0,
        objective,
        inner_iters: res.iterations,
        wall_time: None,
    });
    Ok(SolveResult {
        solver: "relaxation".into(),
        status,
        x: res.x,
        xbar: res.xbar,
        z: res.z,
        y: res.y,
        lambda: zeros,
        beta,
        d1: res.d1,
        d2: res.d2,
        report,
        objective,
        outer_iters: 1,
        total_inner_iters: res.iterations,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inner::InnerSnapshot;
    use crate::linalg::SparseMatrix;
    use crate::outer::{run_two_level, DualBounds, DualMap, SafeguardedDual};
    use crate::problem::{BlockSpec, GlobalSet, Objective, SetKind};

    fn toy() -> BlockProblem {
        let blk = |c: f64| BlockSpec {
            dim: 1,
            objective: Objective::separable_quadratic(&[2.0], &[c]),
            set: SetKind::WholeSpace,
        };
        BlockProblem::new(
            vec![blk(1.0), blk(3.0)],
            GlobalSet::WholeSpace { dim: 1 },
            SparseMatrix::identity(2),
            SparseMatrix::from_triplets(2, 1, vec![(0, 0, -1.0), (1, 0, -1.0)]).unwrap(),
        )
        .unwrap()
    }

    fn far_box() -> BlockProblem {
        BlockProblem::new(
            vec![BlockSpec {
                dim: 2,
                objective: Objective::Zero,
                set: SetKind::Spheres {
                    point_dim: 2,
                    radius: 1.0,
                },
            }],
            GlobalSet::uniform_box(2, 2.0, 3.0),
            SparseMatrix::identity(2),
            SparseMatrix::scaled_identity(2, -1.0),
        )
        .unwrap()
    }

    struct Recording(Vec<usize>, SafeguardedDual);

    impl DualMap for Recording {
        fn update(&mut self, l: &[f64], b: f64, z: &[f64], bd: &DualBounds) -> Vec<f64> {
            self.0.push(l.len());
            self.1.update(l, b, z, bd)
        }
    }

    #[test]
    fn injected_dual_map_reproduces_two_level() {
        let p = toy();
        let cfg = OuterConfig {
            eps: 1e-6,
            ..OuterConfig::default()
        };
        let a = run_two_level(&p, &cfg).unwrap();
        let mut rec = Recording(Vec::new(), SafeguardedDual);
        let b = run_outer(&p, &cfg, None, &mut rec, "two_level", None).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(format!("{:?}", a.trace), format!("{:?}", b.trace));
        assert_eq!(rec.0.len(), a.outer_iters - 1);
    }

    #[test]
    fn penalty_matches_two_level_limit() {
        let p = toy();
        let cfg = OuterConfig {
            eps: 1e-3,
            ..OuterConfig::default()
        };
        let a = run_two_level(&p, &cfg).unwrap();
        let b = run_penalty(&p, &cfg).unwrap();
        assert!(b.lambda.iter().all(|&l| l == 0.0));
        for (u, v) in a.x.iter().zip(&b.x) {
            assert!((u - v).abs() < 1e-2, "{u} {v}");
        }
        assert!(b.outer_iters >= a.outer_iters);
    }

    struct ZCheck(f64, f64);

    impl InnerObserver for ZCheck {
        fn on_iteration(&mut self, s: &InnerSnapshot) -> Result<()> {
            // βz + y = 0 after every y-update
            let worst = s
                .z
                .iter()
                .zip(s.y)
                .map(|(z, y)| (s.beta * z + y).abs())
                .fold(0.0, f64::max);
            self.0 = self.0.max(worst / s.beta.max(1.0));
            self.1 = self.1.max(worst);
            Ok(())
        }
    }

    #[test]
    fn relaxation_on_toy_is_nearly_feasible() {
        let p = toy();
        let cfg = RelaxationConfig::default();
        let mut obs = ZCheck(0.0, 0.0);
        let r = run_relaxation_from(&p, &cfg, None, Some(&mut obs)).unwrap();
        assert!(r.report.primal_gap <= 10.0 * cfg.eps, "{:?}", r.report);
        assert!(obs.0 <= 1e-10, "{}", obs.0);
    }

    #[test]
    fn relaxation_on_infeasible_instance_returns_a_point() {
        let p = far_box();
        let cfg = RelaxationConfig {
            eps: 1e-3,
            ..RelaxationConfig::default()
        };
        let r = run_relaxation(&p, &cfg).unwrap();
        assert!(r.report.primal_gap > 1.0);
        assert_ne!(r.status, SolveStatus::EpsStationary);
    }
}
