//! Outer augmented-Lagrangian loop: safeguarded dual update, penalty
//! schedule, tolerance schedule and classification of the limit.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::inner::{run_inner_with, InnerConfig, InnerObserver};
use crate::linalg::{norm, DenseMatrix};
use crate::problem::{BlockProblem, ResidualReport};
use crate::subsolvers::{solve_xbar_block, XBlockSolver};
use crate::trace::{Scope, TraceRecord};

/// Penalty rule: adaptive (grow only without enough progress in `‖z‖`) or
/// geometric (grow every round).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Adaptive,
    Geometric,
}

/// Safeguard box for the outer multiplier `λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DualBounds {
    Uniform { lower: f64, upper: f64 },
    PerRow { lower: Vec<f64>, upper: Vec<f64> },
}

impl DualBounds {
    fn validate(&self, m: usize) -> Result<()> {
        let ok = match self {
            DualBounds::Uniform { lower, upper } => upper > lower,
            DualBounds::PerRow { lower, upper } => {
                check_len("dual bounds (lower)", m, lower.len())?;
                check_len("dual bounds (upper)", m, upper.len())?;
                lower.iter().zip(upper).all(|(l, u)| u > l)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config {
                field: "outer.dual_bounds".into(),
                message: "need upper > lower in every component".into(),
            })
        }
    }

    #[inline]
    pub fn clamp(&self, i: usize, v: f64) -> f64 {
        match self {
            DualBounds::Uniform { lower, upper } => v.clamp(*lower, *upper),
            DualBounds::PerRow { lower, upper } => v.clamp(lower[i], upper[i]),
        }
    }
}

/// Rule `k ↦ (ε₁ᵏ, ε₂ᵏ, ε₃ᵏ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToleranceSchedule {
    /// `ε₃ᵏ = max{ε, √m/(kρᵏ)}` and `ε₁ᵏ = ε₂ᵏ = max{ε, c₀ρᵏε₃ᵏ/√m}`.
    Standard { c0: f64 },
    /// `ε₃ᵏ = max{ε, scale/k}` with the same dual rule.
    Harmonic { scale: f64, c0: f64 },
}

impl ToleranceSchedule {
    /// Inner tolerances for round `k` at penalty `ρ` with `m` coupling rows.
    pub fn tolerances(&self, k: usize, rho: f64, m: usize, eps: f64, eps_dual: f64) -> [f64; 3] {
        let kf = k.max(1) as f64;
        let sm = (m as f64).sqrt();
        let (e3, c0) = match self {
            ToleranceSchedule::Standard { c0 } => {
                let e3 = if m == 0 { eps } else { eps.max(sm / (kf * rho)) };
                (e3, *c0)
            }
            ToleranceSchedule::Harmonic { scale, c0 } => (eps.max(scale / kf), *c0),
        };
        let e1 = if m == 0 {
            eps_dual
        } else {
            eps_dual.max(c0 * rho * e3 / sm)
        };
        [e1, e1, e3]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OuterConfig {
    pub dual_bounds: DualBounds,
    /// `λ¹`; zeros when absent.
    pub lambda_init: Option<Vec<f64>>,
    pub beta_init: f64,
    pub omega: f64,
    pub gamma: f64,
    pub variant: Variant,
    /// Target for `‖Ax + Bx̄‖` and, unless `eps_dual` is set, for `‖d₁‖`, `‖d₂‖`.
    pub eps: f64,
    pub eps_dual: Option<f64>,
    pub schedule: ToleranceSchedule,
    pub max_outer: usize,
    pub beta_cap: f64,
    /// Budget on the total number of inner iterations.
    pub max_total_inner: usize,
    /// `‖Ax + Bx̄‖` below which a limit counts as feasible (defaults to `eps`).
    pub feas_tol: Option<f64>,
    /// Tolerance on the feasibility-problem residual (defaults to `eps`).
    pub feas_stationarity_tol: Option<f64>,
    /// Stop as soon as a converged inner run ends with `‖Ax + Bx̄‖ ≤ ε`,
    /// without polishing `d₁`, `d₂`. The status is classified as usual.
    pub primal_stop: bool,
    /// Start every inner run from the previous round's output.
    pub warm_start: bool,
    pub record_wall_time: bool,
    pub inner: InnerConfig,
}

impl Default for OuterConfig {
    fn default() -> Self {
        Self {
            dual_bounds: DualBounds::Uniform {
                lower: -1e6,
                upper: 1e6,
            },
            lambda_init: None,
            beta_init: 10.0,
            omega: 0.75,
            gamma: 2.0,
            variant: Variant::Adaptive,
            eps: 1e-5,
            eps_dual: None,
            schedule: ToleranceSchedule::Standard { c0: 1.0 },
            max_outer: 100,
            beta_cap: 1e6,
            max_total_inner: 1_000_000,
            feas_tol: None,
            feas_stationarity_tol: None,
            primal_stop: false,
            warm_start: true,
            record_wall_time: false,
            inner: InnerConfig::default(),
        }
    }
}

impl OuterConfig {
    pub fn validate(&self, m: usize) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: format!("outer.{field}"),
                message: message.into(),
            })
        };
        self.dual_bounds.validate(m)?;
        if !(self.beta_init > 0.0) {
            return bad("beta_init", "must be positive");
        }
        if !(0.0..1.0).contains(&self.omega) {
            return bad("omega", "must lie in [0, 1)");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma", "must exceed 1");
        }
        if !(self.eps > 0.0) || self.eps_dual.is_some_and(|e| !(e > 0.0)) {
            return bad("eps", "must be positive");
        }
        if !(self.beta_cap >= self.beta_init) {
            return bad("beta_cap", "must be at least beta_init");
        }
        if let Some(l) = &self.lambda_init {
            check_len("outer.lambda_init", m, l.len())?;
            if l.iter()
                .enumerate()
                .any(|(i, v)| self.dual_bounds.clamp(i, *v) != *v)
            {
                return bad("lambda_init", "must lie inside the dual bounds");
            }
        }
        self.inner.validate()
    }

    pub fn eps_dual(&self) -> f64 {
        self.eps_dual.unwrap_or(self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    /// `max(‖d₁‖, ‖d₂‖, ‖Ax + Bx̄‖) ≤ ε`.
    EpsStationary,
    /// Infeasible limit that is stationary for `min ½‖Ax + Bx̄‖²`.
    FeasibilityStationary,
    BudgetExhausted,
    /// Stationary for a relaxed problem but not feasible (one-level baseline).
    RelaxedStationary,
}

impl SolveStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            SolveStatus::EpsStationary => 0,
            SolveStatus::FeasibilityStationary => 2,
            SolveStatus::BudgetExhausted => 3,
            SolveStatus::RelaxedStationary => 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResult {
    pub solver: String,
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    /// Multiplier and penalty used by the last inner run.
    pub lambda: Vec<f64>,
    pub beta: f64,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub report: ResidualReport,
    pub objective: f64,
    pub outer_iters: usize,
    pub total_inner_iters: usize,
    pub trace: Vec<TraceRecord>,
}

/// Map from `(λᵏ, βᵏ, zᵏ)` to `λᵏ⁺¹`.
pub trait DualMap {
    fn update(&mut self, lambda: &[f64], beta: f64, z: &[f64], bounds: &DualBounds) -> Vec<f64>;
}

/// `λ ← Proj_[λ̲, λ̄](λ + βz)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SafeguardedDual;

impl DualMap for SafeguardedDual {
    fn update(&mut self, lambda: &[f64], beta: f64, z: &[f64], bounds: &DualBounds) -> Vec<f64> {
        update_dual(lambda, beta, z, bounds)
    }
}

/// `λ ≡ 0`, which turns the outer loop into a pure penalty method.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDual;

impl DualMap for ZeroDual {
    fn update(&mut self, lambda: &[f64], _: f64, _: &[f64], _: &DualBounds) -> Vec<f64> {
        vec![0.0; lambda.len()]
    }
}

pub fn update_dual(lambda: &[f64], beta: f64, z: &[f64], bounds: &DualBounds) -> Vec<f64> {
    (0..lambda.len())
        .map(|i| bounds.clamp(i, lambda[i] + beta * z[i]))
        .collect()
}

pub fn update_penalty(
    beta: f64,
    z_norm: f64,
    z_prev_norm: f64,
    omega: f64,
    gamma: f64,
    variant: Variant,
    cap: f64,
) -> f64 {
    let next = match variant {
        Variant::Adaptive if z_norm <= omega * z_prev_norm => beta,
        _ => gamma * beta,
    };
    next.min(cap)
}

/// Closed test `max(‖d₁‖, ‖d₂‖) ≤ ε_dual` and `‖Ax + Bx̄‖ ≤ ε`.
pub fn check_eps_stationary(d1: &[f64], d2: &[f64], gap: f64, eps: f64, eps_dual: f64) -> bool {
    norm(d1) <= eps_dual && norm(d2) <= eps_dual && gap <= eps
}

/// Projected-gradient residual (unit step) of `½‖Ax + Bx̄‖²` over `X × X̄`.
/// Manifold blocks use the gradient component orthogonal to the rows of
/// the constraint Jacobian.
pub fn feasibility_residual(p: &BlockProblem, x: &[f64], xbar: &[f64]) -> Result<f64> {
    let w = p.coupling(x, xbar)?;
    let gx = p.a().mul_t(&w);
    let gxb = p.b().mul_t(&w);
    let mut total = 0.0;
    for (i, blk) in p.blocks().iter().enumerate() {
        let r = p.block_range(i);
        let (xb, gb) = (&x[r.clone()], &gx[r]);
        let cons = blk.set.constraints();
        if cons.is_empty() {
            let mut v: Vec<f64> = xb.iter().zip(gb).map(|(a, g)| a - g).collect();
            blk.set.project(&mut v);
            total += xb.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        } else {
            let n = xb.len();
            let mut jac = DenseMatrix::zeros(cons.len(), n);
            for (ci, c) in cons.iter().enumerate() {
                let mut row = vec![0.0; n];
                c.add_scaled_gradient(xb, 1.0, &mut row);
                for (j, v) in row.into_iter().enumerate() {
                    jac.set(ci, j, v);
                }
            }
            let mut jjt = jac.matmul_t(&jac)?;
            jjt.add_diagonal(1e-12);
            let gm = DenseMatrix::from_col_major(1, n, gb.to_vec())?;
            let rhs = gm.matmul_t(&jac)?;
            let nu = rhs.solve_spd_right(&jjt)?;
            let corr = nu.matmul(&jac)?;
            for j in 0..n {
                let v = gb[j] - corr.get(0, j);
                total += v * v;
            }
        }
    }
    let mut v: Vec<f64> = xbar.iter().zip(&gxb).map(|(a, g)| a - g).collect();
    p.global_set().project(&mut v);
    total += xbar.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    Ok(total.sqrt())
}

/// Status of a limit point reached without certification.
#[allow(clippy::too_many_arguments)]
pub fn classify_limit(
    p: &BlockProblem,
    x: &[f64],
    xbar: &[f64],
    d1: &[f64],
    d2: &[f64],
    eps: f64,
    eps_dual: f64,
    feas_tol: f64,
    feas_stat_tol: f64,
) -> Result<SolveStatus> {
    let gap = p.primal_gap(x, xbar)?;
    if gap <= feas_tol {
        return Ok(if check_eps_stationary(d1, d2, gap, eps, eps_dual) {
            SolveStatus::EpsStationary
        } else {
            SolveStatus::BudgetExhausted
        });
    }
    Ok(if feasibility_residual(p, x, xbar)? <= feas_stat_tol {
        SolveStatus::FeasibilityStationary
    } else {
        SolveStatus::BudgetExhausted
    })
}

/// Block-feasible default start: zeros projected onto every block set.
pub fn default_start(p: &BlockProblem) -> Vec<f64> {
    let mut x = vec![0.0; p.n1()];
    for i in 0..p.num_blocks() {
        p.blocks()[i].set.project(&mut x[p.block_range(i)]);
    }
    x
}

/// Two-level method with the safeguarded dual update.
pub fn run_two_level(p: &BlockProblem, cfg: &OuterConfig) -> Result<SolveResult> {
    run_outer(p, cfg, None, &mut SafeguardedDual, "two_level", None)
}

/// Outer loop with an injectable dual map, optional start point and
/// optional inner observer.
pub fn run_outer(
    p: &BlockProblem,
    cfg: &OuterConfig,
    x0: Option<&[f64]>,
    dual_map: &mut dyn DualMap,
    solver_tag: &str,
    mut observer: Option<&mut dyn InnerObserver>,
) -> Result<SolveResult> {
    let m = p.m();
    cfg.validate(m)?;
    let started = Instant::now();
    let eps = cfg.eps;
    let eps_dual = cfg.eps_dual();
    let x_start = match x0 {
        Some(v) => {
            check_len("x⁰", p.n1(), v.len())?;
            v.to_vec()
        }
        None => default_start(p),
    };
    let mut x = x_start.clone();
    let mut xbar = vec![0.0; p.n2()];
    p.global_set().project(&mut xbar);
    let zeros = vec![0.0; m];
    xbar = solve_xbar_block(p, &x, &zeros, &zeros, 1.0, &xbar)?;
    let mut z: Vec<f64> = p.coupling(&x, &xbar)?.iter().map(|v| -v).collect();
    let xbar_start = xbar.clone();
    let z_start = z.clone();

    let mut lambda = cfg.lambda_init.clone().unwrap_or_else(|| vec![0.0; m]);
    let mut beta = cfg.beta_init;
    let mut z_prev_norm = norm(&z);
    let mut solver = XBlockSolver::new(p, cfg.inner.x_solver.clone())?;
    let mut inner_cfg = cfg.inner.clone();
    let mut trace = Vec::new();
    let mut total_inner = 0usize;
    let mut polish = false;
    let mut status = None;
    let mut last = None;
    let mut lambda_used = lambda.clone();
    let mut beta_used = beta;
    let mut outer_iters = 0;

    for k in 1..=cfg.max_outer.max(1) {
        outer_iters = k;
        let rho = inner_cfg.rho_factor * beta;
        let mut tol = cfg.schedule.tolerances(k, rho, m, eps, eps_dual);
        if polish {
            tol[0] = eps_dual;
            tol[1] = eps_dual;
            tol[2] = tol[2].min(eps);
        }
        inner_cfg.tolerances = tol;
        inner_cfg.max_iters = cfg
            .inner
            .max_iters
            .min(cfg.max_total_inner.saturating_sub(total_inner))
            .max(1);
        let res = run_inner_with(
            p,
            &lambda,
            beta,
            (&x, &xbar, &z),
            &inner_cfg,
            &mut solver,
            observer.as_mut().map(|o| &mut **o as &mut dyn InnerObserver),
            k,
        )?;
        total_inner += res.iterations;
        lambda_used.clone_from(&lambda);
        beta_used = beta;
        x.clone_from(&res.x);
        xbar.clone_from(&res.xbar);
        z.clone_from(&res.z);
        let gap = p.primal_gap(&x, &xbar)?;
        let z_norm = norm(&z);
        let objective = p.objective(&x)?;
        if cfg.inner.record_trace {
            trace.extend(res.trace.iter().cloned());
        }
        trace.push(TraceRecord {
            scope: Scope::Outer,
            k,
            t: res.iterations,
            beta,
            rho,
            l_val: f64::NAN,
            d1: norm(&res.d1),
            d2: norm(&res.d2),
            d3: norm(&res.d3),
            z_norm,
            gap,
            lambda_norm: norm(&lambda),
            objective,
            inner_iters: res.iterations,
            wall_time: cfg
                .record_wall_time
                .then(|| started.elapsed().as_secs_f64()),
        });
        let certified = res.x_residual <= eps_dual
            && check_eps_stationary(&res.d1, &res.d2, gap, eps, eps_dual);
        let inner_converged = res.converged;
        last = Some(res);
        if certified {
            status = Some(SolveStatus::EpsStationary);
            break;
        }
        if gap <= eps {
            if cfg.primal_stop && inner_converged {
                break;
            }
            polish = true;
        }
        if total_inner >= cfg.max_total_inner {
            break;
        }
        lambda = dual_map.update(&lambda, beta, &z, &cfg.dual_bounds);
        let beta_next = update_penalty(
            beta,
            z_norm,
            z_prev_norm,
            cfg.omega,
            cfg.gamma,
            cfg.variant,
            cfg.beta_cap,
        );
        let wants_growth = match cfg.variant {
            Variant::Adaptive => z_norm > cfg.omega * z_prev_norm,
            Variant::Geometric => true,
        };
        if beta >= cfg.beta_cap && ((wants_growth && !polish) || !inner_converged) {
            // the penalty is pinned at its cap without progress
            break;
        }
        beta = beta_next;
        z_prev_norm = z_norm;
        if !cfg.warm_start {
            x.clone_from(&x_start);
            xbar.clone_from(&xbar_start);
            z.clone_from(&z_start);
            solver.reset();
        }
    }

    let res = last.expect("at least one outer round runs");
    let status = match status {
        Some(s) => s,
        None => classify_limit(
            p,
            &res.x,
            &res.xbar,
            &res.d1,
            &res.d2,
            eps,
            eps_dual,
            cfg.feas_tol.unwrap_or(eps),
            cfg.feas_stationarity_tol.unwrap_or(eps),
        )?,
    };
    let gap = p.primal_gap(&res.x, &res.xbar)?;
    Ok(SolveResult {
        solver: solver_tag.to_string(),
        status,
        report: ResidualReport {
            d1_norm: norm(&res.d1),
            d2_norm: norm(&res.d2),
            d3_norm: norm(&res.d3),
            primal_gap: gap,
            z_norm: norm(&res.z),
        },
        objective: p.objective(&res.x)?,
        x: res.x,
        xbar: res.xbar,
        z: res.z,
        y: res.y,
        lambda: lambda_used,
        beta: beta_used,
        d1: res.d1,
        d2: res.d2,
        outer_iters,
        total_inner_iters: total_inner,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_update_cases() {
        let b = DualBounds::Uniform {
            lower: -5.0,
            upper: 5.0,
        };
        assert_eq!(update_dual(&[1.0, -2.0], 3.0, &[0.0, 0.0], &b), vec![1.0, -2.0]);
        assert_eq!(update_dual(&[0.0, 0.0], 10.0, &[1.0, -1.0], &b), vec![5.0, -5.0]);
        assert_eq!(update_dual(&[1.0, 1.0], 2.0, &[0.5, -0.25], &b), vec![2.0, 0.5]);
    }

    #[test]
    fn penalty_rules() {
        let a = Variant::Adaptive;
        assert_eq!(update_penalty(10.0, 0.0, 1.0, 0.75, 1.5, a, 1e6), 10.0);
        assert_eq!(update_penalty(10.0, 0.8, 1.0, 0.75, 1.5, a, 1e6), 15.0);
        assert_eq!(update_penalty(2.0, 0.0, 1.0, 0.75, 1.5, Variant::Geometric, 1e6), 3.0);
        assert_eq!(update_penalty(9e5, 1.0, 1.0, 0.5, 2.0, a, 1e6), 1e6);
    }

    #[test]
    fn eps_gate_is_closed() {
        assert!(check_eps_stationary(&[0.0], &[0.0], 0.0, 1e-3, 1e-3));
        assert!(!check_eps_stationary(&[0.0], &[0.0], 2e-3, 1e-3, 1e-3));
        assert!(check_eps_stationary(&[1e-3], &[0.0], 1e-3, 1e-3, 1e-3));
    }

    #[test]
    fn schedule_values() {
        let s = ToleranceSchedule::Standard { c0: 1.0 };
        let [e1, e2, e3] = s.tolerances(2, 10.0, 4, 1e-6, 1e-6);
        assert_eq!(e3, 0.1);
        assert_eq!(e1, 0.5);
        assert_eq!(e2, e1);
        let [e1, _, e3] = s.tolerances(1000, 1e6, 4, 1e-6, 1e-6);
        assert_eq!(e3, 1e-6);
        assert_eq!(e1, 0.5);
        assert_eq!(s.tolerances(1, 1.0, 0, 1e-4, 1e-5), [1e-5, 1e-5, 1e-4]);
    }

    fn toy() -> BlockProblem {
        use crate::linalg::SparseMatrix;
        use crate::problem::{BlockSpec, GlobalSet, Objective, SetKind};
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

    #[test]
    fn toy_consensus_reaches_kkt_point() {
        let p = toy();
        let cfg = OuterConfig {
            eps: 1e-7,
            ..OuterConfig::default()
        };
        let r = run_two_level(&p, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::EpsStationary);
        for v in r.x.iter().chain(&r.xbar) {
            assert!((v - 2.0).abs() < 1e-5, "{v}");
        }
        // y multiplies Ax + Bx̄ = 0 and λ tracks −y
        assert!((r.y[0] + 2.0).abs() < 1e-4 && (r.y[1] - 2.0).abs() < 1e-4, "{:?}", r.y);
        let lam = update_dual(&r.lambda, r.beta, &r.z, &cfg.dual_bounds);
        assert!((lam[0] - 2.0).abs() < 1e-4 && (lam[1] + 2.0).abs() < 1e-4, "{lam:?}");
        assert!((r.objective - 2.0).abs() < 1e-5);
    }

    #[test]
    fn zero_dual_is_a_penalty_method() {
        let p = toy();
        let cfg = OuterConfig {
            eps: 1e-4,
            max_outer: 200,
            ..OuterConfig::default()
        };
        let r = run_outer(&p, &cfg, None, &mut ZeroDual, "penalty", None).unwrap();
        assert!(r.lambda.iter().all(|&l| l == 0.0));
        assert!(r.report.primal_gap <= 1e-4);
    }

    #[test]
    fn sphere_against_far_box_is_feasibility_stationary() {
        use crate::linalg::SparseMatrix;
        use crate::problem::{BlockSpec, GlobalSet, Objective, SetKind};
        let p = BlockProblem::new(
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
        .unwrap();
        let cfg = OuterConfig {
            eps: 1e-6,
            feas_stationarity_tol: Some(1e-4),
            max_outer: 60,
            ..OuterConfig::default()
        };
        let r = run_two_level(&p, &cfg).unwrap();
        assert_eq!(r.status, SolveStatus::FeasibilityStationary);
        assert!((r.report.primal_gap - (8f64.sqrt() - 1.0)).abs() < 1e-4);
        assert_eq!(r.status.exit_code(), 2);
    }
}
