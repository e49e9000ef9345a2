//! Three-block ADMM on the slack reformulation
//! `min f(x) + ⟨λ, z⟩ + (β/2)‖z‖²` s.t. `Ax + Bx̄ + z = 0`, `x ∈ X`, `x̄ ∈ X̄`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{all_finite, dot, norm, norm_sq};
use crate::problem::BlockProblem;
use crate::subsolvers::{solve_xbar_prox, z_update, XBlockSolver, XSolverConfig};
use crate::trace::{Scope, TraceRecord};

/// Feasibility slack accepted when evaluating the potential.
pub const FEASIBILITY_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InnerConfig {
    /// `ρ = c·β`.
    pub rho_factor: f64,
    /// `(ε₁, ε₂, ε₃)` for `‖d₁‖`, `‖d₂‖`, `‖d₃‖`.
    pub tolerances: [f64; 3],
    pub max_iters: usize,
    /// Evaluate `L_ρ` every iteration and fail on any increase.
    pub record_potential: bool,
    /// Keep one trace record per inner iteration.
    pub record_trace: bool,
    /// Proximal weights `(h/2)‖x − xᵗ‖²` and `(h̄/2)‖x̄ − x̄ᵗ‖²`; zero in the
    /// plain method.
    pub prox_x: f64,
    pub prox_xbar: f64,
    pub x_solver: XSolverConfig,
}

impl Default for InnerConfig {
    fn default() -> Self {
        Self {
            rho_factor: 2.0,
            tolerances: [1e-6; 3],
            max_iters: 10_000,
            record_potential: cfg!(test),
            record_trace: true,
            prox_x: 0.0,
            prox_xbar: 0.0,
            x_solver: XSolverConfig::default(),
        }
    }
}

impl InnerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho_factor > 0.0) {
            return Err(Error::Config {
                field: "inner.rho_factor".into(),
                message: "must be positive".into(),
            });
        }
        if self.tolerances.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config {
                field: "inner.tolerances".into(),
                message: "must be positive".into(),
            });
        }
        if !(self.prox_x >= 0.0 && self.prox_xbar >= 0.0) {
            return Err(Error::Config {
                field: "inner.prox".into(),
                message: "must be nonnegative".into(),
            });
        }
        self.x_solver.validate()
    }

    /// x-block tolerance `min(stationarity_tol, ε₁/10)`.
    pub fn x_tolerance(&self) -> f64 {
        self.x_solver.stationarity_tol.min(self.tolerances[0] / 10.0)
    }
}

/// Iterates `(x, x̄, z, y)` with the iteration count and current `L_ρ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerState {
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub t: usize,
    pub l_val: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub xbar: Vec<f64>,
    pub z: Vec<f64>,
    pub y: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Stationarity residual of the last x-block solve.
    pub x_residual: f64,
    pub potential_trace: Option<Vec<f64>>,
    pub trace: Vec<TraceRecord>,
}

/// Everything an observer may inspect after one full iteration.
#[derive(Debug)]
pub struct InnerSnapshot<'a> {
    pub t: usize,
    pub lambda: &'a [f64],
    pub beta: f64,
    pub rho: f64,
    pub x: &'a [f64],
    pub xbar: &'a [f64],
    pub z: &'a [f64],
    pub y: &'a [f64],
    pub x_prev: &'a [f64],
    pub xbar_prev: &'a [f64],
    pub z_prev: &'a [f64],
    pub y_prev: &'a [f64],
    /// `f(x)` at the new point.
    pub objective: f64,
    /// `L_ρ` before the iteration and after each of the three steps
    /// (NaN unless potentials are recorded).
    pub l_start: f64,
    pub l_after_x: f64,
    pub l_after_xbar: f64,
    pub l_val: f64,
    pub d1_norm: f64,
    pub d2_norm: f64,
    pub d3_norm: f64,
    pub x_residual: f64,
}

/// Per-iteration hook, mainly for invariant checks in tests.
pub trait InnerObserver {
    fn on_iteration(&mut self, snap: &InnerSnapshot<'_>) -> Result<()>;
}

/// `L_ρ = f(x) + ⟨λ, z⟩ + (β/2)‖z‖² + ⟨y, Ax + Bx̄ + z⟩ + (ρ/2)‖Ax + Bx̄ + z‖²`.
/// Errors when `x ∉ X` or `x̄ ∉ X̄` (the indicator terms would be infinite).
#[allow(clippy::too_many_arguments)]
pub fn evaluate_potential(
    p: &BlockProblem,
    lambda: &[f64],
    beta: f64,
    rho: f64,
    x: &[f64],
    xbar: &[f64],
    z: &[f64],
    y: &[f64],
) -> Result<f64> {
    check_len("potential: λ", p.m(), lambda.len())?;
    check_len("potential: y", p.m(), y.len())?;
    p.check_feasible(x, FEASIBILITY_SLACK)?;
    if !p.global_set().contains(xbar, 1e-12) {
        return Err(Error::Infeasible {
            block: p.num_blocks(),
            violation: f64::NAN,
        });
    }
    let f = p.objective(x)?;
    let r = p.primal_residual(x, xbar, z)?;
    Ok(potential_from_parts(f, lambda, beta, rho, z, y, &r))
}

fn potential_from_parts(
    f: f64,
    lambda: &[f64],
    beta: f64,
    rho: f64,
    z: &[f64],
    y: &[f64],
    r: &[f64],
) -> f64 {
    f + dot(lambda, z) + 0.5 * beta * norm_sq(z) + dot(y, r) + 0.5 * rho * norm_sq(r)
}

/// Runs the inner ADMM from `(x⁰, x̄⁰, z⁰)` with `y⁰ = −λ − βz⁰`.
pub fn run_inner(
    p: &BlockProblem,
    lambda: &[f64],
    beta: f64,
    init: (&[f64], &[f64], &[f64]),
    cfg: &InnerConfig,
) -> Result<InnerResult> {
    let mut solver = XBlockSolver::new(p, cfg.x_solver.clone())?;
    run_inner_with(p, lambda, beta, init, cfg, &mut solver, None, 0)
}

fn nonfinite(context: &str, t: usize) -> Error {
    Error::NonFinite {
        context: context.into(),
        iteration: t,
    }
}

/// [`run_inner`] with a reusable x-block solver, an optional observer and
/// the outer index stamped into trace records.
#[allow(clippy::too_many_arguments)]
pub fn run_inner_with(
    p: &BlockProblem,
    lambda: &[f64],
    beta: f64,
    init: (&[f64], &[f64], &[f64]),
    cfg: &InnerConfig,
    solver: &mut XBlockSolver,
    mut observer: Option<&mut dyn InnerObserver>,
    outer_k: usize,
) -> Result<InnerResult> {
    cfg.validate()?;
    if !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("β must be positive, got {beta}")));
    }
    let (x0, xbar0, z0) = init;
    check_len("inner: x⁰", p.n1(), x0.len())?;
    check_len("inner: x̄⁰", p.n2(), xbar0.len())?;
    check_len("inner: z⁰", p.m(), z0.len())?;
    check_len("inner: λ", p.m(), lambda.len())?;
    let m = p.m();
    let rho = cfg.rho_factor * beta;
    let x_tol = cfg.x_tolerance();
    let [eps1, eps2, eps3] = cfg.tolerances;

    let mut x = x0.to_vec();
    let mut xbar = xbar0.to_vec();
    p.global_set().project(&mut xbar);
    let mut z = z0.to_vec();
    let mut y: Vec<f64> = (0..m).map(|i| -lambda[i] - beta * z[i]).collect();

    let record = cfg.record_potential;
    let potential = |x: &[f64], xbar: &[f64], z: &[f64], y: &[f64]| -> Result<(f64, f64)> {
        let f = p.objective(x)?;
        let r = p.primal_residual(x, xbar, z)?;
        Ok((f, potential_from_parts(f, lambda, beta, rho, z, y, &r)))
    };
    let mut l_prev = f64::NAN;
    let mut potentials = Vec::new();
    let mut trace = Vec::new();
    let mut d1 = vec![0.0; p.n1()];
    let mut d2 = vec![0.0; p.n2()];
    let mut d3 = vec![0.0; m];
    let mut converged = false;
    let mut x_residual = 0.0;
    let mut iterations = 0;

    for t in 1..=cfg.max_iters.max(1) {
        iterations = t;
        let x_prev = x.clone();
        let xbar_prev = xbar.clone();
        let z_prev = z.clone();
        let y_prev = y.clone();
        if record && t == 1 {
            // an infeasible start has infinite potential; the chain then
            // starts after the first x-update
            if p.max_violation(&x) <= FEASIBILITY_SLACK {
                l_prev = potential(&x, &xbar, &z, &y)?.1;
                potentials.push(l_prev);
            }
        }

        let rep = solver.solve(p, &mut x, &xbar, &z, &y, rho, cfg.prox_x, x_tol)?;
        x_residual = rep.residual;
        if !all_finite(&x) {
            return Err(nonfinite("x-block update", t));
        }
        let l_after_x = if record {
            potential(&x, &xbar, &z, &y)?.1
        } else {
            f64::NAN
        };

        xbar = solve_xbar_prox(p, &x, &z, &y, rho, cfg.prox_xbar, &xbar)?;
        let l_after_xbar = if record {
            potential(&x, &xbar, &z, &y)?.1
        } else {
            f64::NAN
        };

        let w = p.coupling(&x, &xbar)?;
        z = z_update(lambda, beta, &y, rho, &w);
        for i in 0..m {
            d3[i] = w[i] + z[i];
            y[i] += rho * d3[i];
        }
        if !all_finite(&z) || !all_finite(&y) {
            return Err(nonfinite("z/y update", t));
        }

        let (f_val, l_val) = if record {
            potential(&x, &xbar, &z, &y)?
        } else {
            (f64::NAN, f64::NAN)
        };
        if record {
            // L_ρ is nonincreasing along the iteration (descent property)
            let start = if l_prev.is_nan() { l_after_x } else { l_prev };
            let slack = 1e-8 * start.abs().max(1.0);
            if l_val > start + slack {
                return Err(Error::InvariantViolation {
                    iteration: t,
                    message: format!("potential rose from {start:.12e} to {l_val:.12e}"),
                });
            }
            potentials.push(l_val);
        }

        // d₁ = −ρAᵀ(Bx̄ᵗ⁻¹ + zᵗ⁻¹ − Bx̄ᵗ − zᵗ), d₂ = −ρBᵀ(zᵗ⁻¹ − zᵗ)
        let mut dz: Vec<f64> = (0..m).map(|i| z_prev[i] - z[i]).collect();
        d2.iter_mut().for_each(|v| *v = 0.0);
        p.b().mul_t_add(&dz, &mut d2);
        let dxbar: Vec<f64> = (0..p.n2()).map(|j| xbar_prev[j] - xbar[j]).collect();
        p.b().mul_add(&dxbar, &mut dz);
        d1.iter_mut().for_each(|v| *v = 0.0);
        p.a().mul_t_add(&dz, &mut d1);
        d1.iter_mut().for_each(|v| *v *= -rho);
        d2.iter_mut().for_each(|v| *v *= -rho);
        if cfg.prox_x > 0.0 {
            for j in 0..p.n1() {
                d1[j] -= cfg.prox_x * (x[j] - x_prev[j]);
            }
        }
        if cfg.prox_xbar > 0.0 {
            for j in 0..p.n2() {
                d2[j] += cfg.prox_xbar * dxbar[j];
            }
        }

        let (n1, n2, n3) = (norm(&d1), norm(&d2), norm(&d3));
        if cfg.record_trace {
            trace.push(TraceRecord {
                scope: Scope::Inner,
                k: outer_k,
                t,
                beta,
                rho,
                l_val,
                d1: n1,
                d2: n2,
                d3: n3,
                z_norm: norm(&z),
                gap: norm(&w),
                lambda_norm: f64::NAN,
                objective: f_val,
                inner_iters: t,
                wall_time: None,
            });
        }
        if let Some(obs) = observer.as_deref_mut() {
            obs.on_iteration(&InnerSnapshot {
                t,
                lambda,
                beta,
                rho,
                x: &x,
                xbar: &xbar,
                z: &z,
                y: &y,
                x_prev: &x_prev,
                xbar_prev: &xbar_prev,
                z_prev: &z_prev,
                y_prev: &y_prev,
                objective: f_val,
                l_start: l_prev,
                l_after_x,
                l_after_xbar,
                l_val,
                d1_norm: n1,
                d2_norm: n2,
                d3_norm: n3,
                x_residual,
            })?;
        }
        l_prev = l_val;
        if n1 <= eps1 && n2 <= eps2 && n3 <= eps3 && x_residual <= eps1 {
            converged = true;
            break;
        }
    }
    Ok(InnerResult {
        x,
        xbar,
        z,
        y,
        d1,
        d2,
        d3,
        iterations,
        converged,
        x_residual,
        potential_trace: record.then_some(potentials),
        trace,
    })
}
