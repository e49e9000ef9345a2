use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::newton::projected_newton;
use super::pg::{projected_gradient, residual_step, PgOutcome, PgSettings};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, norm_sq, DenseMatrix, SparseMatrix};
use crate::problem::{BlockProblem, Objective};

/// Settings of the x-block local solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XSolverConfig {
    pub max_steps: usize,
    /// Upper bound on the stationarity residual; the inner loop further
    /// tightens it to `ε₁/10`.
    pub stationarity_tol: f64,
    /// Backtracking shrink factor in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease constant in (0, 1).
    pub sufficient_decrease: f64,
    /// Initial penalty on `‖h(x)‖²` for manifold sets, relative to `max(1, ρ)`.
    pub penalty_init: f64,
    pub penalty_growth: f64,
    pub max_penalty_rounds: usize,
    /// `‖h(x)‖` accepted as feasible.
    pub feasibility_tol: f64,
}

impl Default for XSolverConfig {
    fn default() -> Self {
        Self {
            max_steps: 5000,
            stationarity_tol: 1e-6,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            penalty_init: 10.0,
            penalty_growth: 10.0,
            max_penalty_rounds: 60,
            feasibility_tol: 1e-10,
        }
    }
}

impl XSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: format!("x_solver.{field}"),
                message: message.into(),
            })
        };
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad("shrink", "must lie in (0, 1)");
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease", "must lie in (0, 1)");
        }
        if !(self.stationarity_tol > 0.0) {
            return bad("stationarity_tol", "must be positive");
        }
        if !(self.penalty_init > 0.0) || !(self.penalty_growth > 1.0) {
            return bad("penalty_growth", "need penalty_init > 0 and growth > 1");
        }
        if !(self.feasibility_tol > 0.0) {
            return bad("feasibility_tol", "must be positive");
        }
        if self.max_steps == 0 {
            return bad("max_steps", "must be positive");
        }
        Ok(())
    }
}

/// Outcome of one x-block update over all groups.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct XBlockReport {
    /// Largest group stationarity residual.
    pub residual: f64,
    /// Largest `‖h(x)‖` over manifold blocks.
    pub infeasibility: f64,
    pub steps: usize,
    /// Groups that kept their previous point.
    pub fallbacks: usize,
}

/// Blocks that share coupling rows are solved jointly; for consensus
/// instances every group is a single block.
#[derive(Debug, Clone)]
struct Group {
    blocks: Vec<usize>,
    vars: Vec<usize>,
    local_offsets: Vec<usize>,
    rows: Vec<usize>,
    a: SparseMatrix,
    ata: Vec<f64>,
    n_constraints: usize,
}

#[derive(Debug, Clone, Default)]
struct MultiplierState {
    nu: Vec<f64>,
    mu: f64,
}

/// Data shared by every group solve of one x-update.
struct Ctx<'a> {
    p: &'a BlockProblem,
    bz: &'a [f64],
    y: &'a [f64],
    rho: f64,
    prox: f64,
    tol: f64,
}

/// Reusable x-block solver holding the group plan and warm-started
/// multipliers for manifold blocks.
#[derive(Debug, Clone)]
pub struct XBlockSolver {
    cfg: XSolverConfig,
    groups: Vec<Group>,
    states: Vec<MultiplierState>,
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

impl XBlockSolver {
    pub fn new(p: &BlockProblem, cfg: XSolverConfig) -> Result<Self> {
        cfg.validate()?;
        let nb = p.num_blocks();
        let offsets = p.block_offsets();
        let block_of = |col: usize| offsets.partition_point(|&o| o <= col) - 1;
        let mut parent: Vec<usize> = (0..nb).collect();
        let a = p.a();
        let mut row_block = vec![usize::MAX; p.m()];
        for (r, rb) in row_block.iter_mut().enumerate() {
            let (cols, _) = a.row(r);
            if let Some(&c0) = cols.first() {
                let b0 = block_of(c0);
                *rb = b0;
                for &c in &cols[1..] {
                    let (ra, rc) = (find(&mut parent, b0), find(&mut parent, block_of(c)));
                    if ra != rc {
                        parent[ra.max(rc)] = ra.min(rc);
                    }
                }
            }
        }
        let mut root_group = vec![usize::MAX; nb];
        let mut groups: Vec<Group> = Vec::new();
        for b in 0..nb {
            let r = find(&mut parent, b);
            if root_group[r] == usize::MAX {
                root_group[r] = groups.len();
                groups.push(Group {
                    blocks: Vec::new(),
                    vars: Vec::new(),
                    local_offsets: vec![0],
                    rows: Vec::new(),
                    a: SparseMatrix::zeros(0, 0),
                    ata: Vec::new(),
                    n_constraints: 0,
                });
            }
            let g = &mut groups[root_group[r]];
            g.blocks.push(b);
            g.vars.extend(p.block_range(b));
            g.local_offsets.push(g.vars.len());
            g.n_constraints += p.blocks()[b].set.constraints().len();
        }
        for (r, &b) in row_block.iter().enumerate() {
            if b != usize::MAX {
                let gi = root_group[find(&mut parent, b)];
                groups[gi].rows.push(r);
            }
        }
        let mut local_of = vec![0usize; p.n1()];
        for g in &mut groups {
            for (k, &v) in g.vars.iter().enumerate() {
                local_of[v] = k;
            }
            let mut trip = Vec::new();
            for (lr, &r) in g.rows.iter().enumerate() {
                let (cols, vals) = a.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    trip.push((lr, local_of[c], v));
                }
            }
            g.a = SparseMatrix::from_triplets(g.rows.len(), g.vars.len(), trip)?;
            g.ata = g.a.col_sq_norms();
        }
        let states = vec![MultiplierState::default(); groups.len()];
        Ok(Self {
            cfg,
            groups,
            states,
        })
    }

    pub fn config(&self) -> &XSolverConfig {
        &self.cfg
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Clears warm-started multipliers of manifold blocks.
    pub fn reset(&mut self) {
        for s in &mut self.states {
            *s = MultiplierState::default();
        }
    }

    /// Replaces `x` by a stationary point of
    /// `f(x) + ⟨y, Ax⟩ + (ρ/2)‖Ax + Bx̄ + z‖² + (h/2)‖x − x_prev‖²` over `X`
    /// that does not increase this function relative to the input `x`.
    /// `h` is the proximal weight (zero for the plain inner ADMM).
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &mut self,
        p: &BlockProblem,
        x: &mut [f64],
        xbar: &[f64],
        z: &[f64],
        y: &[f64],
        rho: f64,
        prox: f64,
        tol: f64,
    ) -> Result<XBlockReport> {
        let mut bz = p.b().mul(xbar);
        for (v, zi) in bz.iter_mut().zip(z) {
            *v += zi;
        }
        let ctx = Ctx {
            p,
            bz: &bz,
            y,
            rho,
            prox,
            tol,
        };
        let cfg = &self.cfg;
        let x_in: &[f64] = x;
        let results: Vec<Result<(Vec<f64>, XBlockReport)>> = self
            .groups
            .par_iter()
            .zip(self.states.par_iter_mut())
            .map(|(g, st)| {
                let mut u: Vec<f64> = g.vars.iter().map(|&v| x_in[v]).collect();
                let rep = solve_group(&ctx, cfg, g, &mut u, st)?;
                Ok((u, rep))
            })
            .collect();
        let mut total = XBlockReport::default();
        for (g, res) in self.groups.iter().zip(results) {
            let (u, rep) = res?;
            for (&v, val) in g.vars.iter().zip(u) {
                x[v] = val;
            }
            total.residual = total.residual.max(rep.residual);
            total.infeasibility = total.infeasibility.max(rep.infeasibility);
            total.steps = total.steps.max(rep.steps);
            total.fallbacks += rep.fallbacks;
        }
        Ok(total)
    }
}

/// One-shot x-block update with the configured tolerance; returns the new
/// point and its stationarity residual.
pub fn solve_x_block(
    p: &BlockProblem,
    x_prev: &[f64],
    xbar: &[f64],
    z: &[f64],
    y: &[f64],
    rho: f64,
    cfg: &XSolverConfig,
) -> Result<(Vec<f64>, f64)> {
    let mut solver = XBlockSolver::new(p, cfg.clone())?;
    let mut x = x_prev.to_vec();
    let rep = solver.solve(p, &mut x, xbar, z, y, rho, 0.0, cfg.stationarity_tol)?;
    Ok((x, rep.residual))
}

fn block_slice(g: &Group, k: usize) -> std::ops::Range<usize> {
    g.local_offsets[k]..g.local_offsets[k + 1]
}

fn project_group(p: &BlockProblem, g: &Group, u: &mut [f64]) {
    for (k, &b) in g.blocks.iter().enumerate() {
        p.blocks()[b].set.project(&mut u[block_slice(g, k)]);
    }
}

fn constraint_values(p: &BlockProblem, g: &Group, u: &[f64]) -> Vec<f64> {
    let mut h = Vec::with_capacity(g.n_constraints);
    for (k, &b) in g.blocks.iter().enumerate() {
        let ub = &u[block_slice(g, k)];
        h.extend(p.blocks()[b].set.constraints().iter().map(|c| c.value(ub)));
    }
    h
}

/// Group objective, with optional penalty terms `⟨ν, h⟩ + (μ/2)‖h‖²` and
/// proximal anchor.
fn group_eval(
    ctx: &Ctx,
    g: &Group,
    u: &[f64],
    mut grad: Option<&mut [f64]>,
    aug: Option<(&[f64], f64)>,
    anchor: &[f64],
) -> Result<f64> {
    let p = ctx.p;
    let mut val = 0.0;
    for (k, &b) in g.blocks.iter().enumerate() {
        let r = block_slice(g, k);
        let gs = grad.as_deref_mut().map(|gr| &mut gr[r.clone()]);
        val += p.blocks()[b]
            .objective
            .evaluate(&u[r], gs)
            .map_err(|message| Error::Oracle { block: b, message })?;
    }
    if !g.rows.is_empty() {
        let mut w = g.a.mul(u);
        let yg: Vec<f64> = g.rows.iter().map(|&r| ctx.y[r]).collect();
        val += dot(&yg, &w);
        for (wi, &r) in w.iter_mut().zip(&g.rows) {
            *wi += ctx.bz[r];
        }
        val += 0.5 * ctx.rho * norm_sq(&w);
        if let Some(gr) = grad.as_deref_mut() {
            let coef: Vec<f64> = yg.iter().zip(&w).map(|(a, b)| a + ctx.rho * b).collect();
            g.a.mul_t_add(&coef, gr);
        }
    }
    if ctx.prox > 0.0 {
        let mut d2 = 0.0;
        for j in 0..u.len() {
            let d = u[j] - anchor[j];
            d2 += d * d;
            if let Some(gr) = grad.as_deref_mut() {
                gr[j] += ctx.prox * d;
            }
        }
        val += 0.5 * ctx.prox * d2;
    }
    if let Some((nu, mu)) = aug {
        let mut ci = 0;
        for (k, &b) in g.blocks.iter().enumerate() {
            let r = block_slice(g, k);
            for c in p.blocks()[b].set.constraints() {
                let h = c.value(&u[r.clone()]);
                val += nu[ci] * h + 0.5 * mu * h * h;
                if let Some(gr) = grad.as_deref_mut() {
                    c.add_scaled_gradient(&u[r.clone()], nu[ci] + mu * h, &mut gr[r.clone()]);
                }
                ci += 1;
            }
        }
    }
    Ok(val)
}

/// Diagonal metric `1 + ρ·diag(AᵀA) + prox + μ·diag(JᵀJ)`, made constant on
/// the chunks each set's projection couples.
fn metric(ctx: &Ctx, g: &Group, u: &[f64], mu: f64) -> Vec<f64> {
    let p = ctx.p;
    let mut d: Vec<f64> = g
        .ata
        .iter()
        .map(|a| 1.0 + ctx.rho * a + ctx.prox)
        .collect();
    if mu > 0.0 {
        for (k, &b) in g.blocks.iter().enumerate() {
            let r = block_slice(g, k);
            let ub = &u[r.clone()];
            for c in p.blocks()[b].set.constraints() {
                let mut jrow = vec![0.0; ub.len()];
                c.add_scaled_gradient(ub, 1.0, &mut jrow);
                for (dj, jv) in d[r.clone()].iter_mut().zip(&jrow) {
                    *dj += mu * jv * jv;
                }
            }
        }
    }
    for (k, &b) in g.blocks.iter().enumerate() {
        let r = block_slice(g, k);
        let chunk = p.blocks()[b].set.metric_chunk(r.len());
        if chunk > 1 {
            for c in d[r].chunks_mut(chunk) {
                let m = c.iter().copied().fold(0.0, f64::max);
                c.iter_mut().for_each(|v| *v = m);
            }
        }
    }
    d
}

fn pg_settings(cfg: &XSolverConfig, tol: f64, d: &[f64]) -> PgSettings {
    PgSettings {
        max_steps: cfg.max_steps,
        tol,
        shrink: cfg.shrink,
        sigma: cfg.sufficient_decrease,
        eta_res: residual_step(d),
    }
}

fn first_block(g: &Group) -> usize {
    g.blocks.first().copied().unwrap_or(0)
}

/// Box bounds of the group when every block has a box base set and an
/// objective with a closed-form Hessian.
fn newton_bounds(p: &BlockProblem, g: &Group) -> Option<(Vec<f64>, Vec<f64>)> {
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    for (k, &b) in g.blocks.iter().enumerate() {
        let blk = &p.blocks()[b];
        if !matches!(blk.objective, Objective::Zero | Objective::Quadratic { .. }) {
            return None;
        }
        let (l, h) = blk.set.box_bounds(g.local_offsets[k + 1] - g.local_offsets[k])?;
        lo.extend(l);
        hi.extend(h);
    }
    Some((lo, hi))
}

/// Hessian of [`group_eval`]; with `with_objective` false only the
/// constraint terms `Σ w_c ∇²h_c + μ JᵀJ` remain.
fn group_hessian(
    ctx: &Ctx,
    g: &Group,
    u: &[f64],
    aug: Option<(&[f64], f64)>,
    with_objective: bool,
) -> DenseMatrix {
    let p = ctx.p;
    let n = u.len();
    let mut h = DenseMatrix::zeros(n, n);
    if with_objective {
        for (k, &b) in g.blocks.iter().enumerate() {
            p.blocks()[b].objective.add_hessian(&mut h, g.local_offsets[k]);
        }
        for r in 0..g.a.rows() {
            let (cols, vals) = g.a.row(r);
            for (&c1, &v1) in cols.iter().zip(vals) {
                for (&c2, &v2) in cols.iter().zip(vals) {
                    h.set(c1, c2, h.get(c1, c2) + ctx.rho * v1 * v2);
                }
            }
        }
        if ctx.prox > 0.0 {
            h.add_diagonal(ctx.prox);
        }
    }
    if let Some((nu, mu)) = aug {
        let mut ci = 0;
        for (k, &b) in g.blocks.iter().enumerate() {
            let r = block_slice(g, k);
            let off = r.start;
            let ub = &u[r.clone()];
            for c in p.blocks()[b].set.constraints() {
                let hv = c.value(ub);
                c.add_scaled_hessian(nu[ci] + mu * hv, &mut h, off);
                let mut jrow = vec![0.0; ub.len()];
                c.add_scaled_gradient(ub, 1.0, &mut jrow);
                let nz: Vec<(usize, f64)> = jrow
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(i, v)| (i + off, *v))
                    .collect();
                for &(i, vi) in &nz {
                    for &(j, vj) in &nz {
                        h.set(i, j, h.get(i, j) + mu * vi * vj);
                    }
                }
                ci += 1;
            }
        }
    }
    h
}

fn solve_group(
    ctx: &Ctx,
    cfg: &XSolverConfig,
    g: &Group,
    u: &mut Vec<f64>,
    st: &mut MultiplierState,
) -> Result<XBlockReport> {
    let p = ctx.p;
    let project = |v: &mut [f64]| project_group(p, g, v);
    let mut start = u.clone();
    project(&mut start);
    let moved = start != *u;
    *u = start;

    if g.n_constraints == 0 {
        let anchor = u.clone();
        let eval = |v: &[f64], gr: &mut [f64]| group_eval(ctx, g, v, Some(gr), None, &anchor);
        let d = metric(ctx, g, u, 0.0);
        let out = projected_gradient(u, &eval, &project, &d, &pg_settings(cfg, ctx.tol, &d))?;
        return Ok(XBlockReport {
            residual: out.residual,
            infeasibility: 0.0,
            steps: out.steps,
            fallbacks: usize::from(out.stalled && out.steps == 0 && !moved),
        });
    }

    let bounds = newton_bounds(p, g);
    let h0 = norm(&constraint_values(p, g, u));
    if h0 > cfg.feasibility_tol {
        restore(ctx, cfg, g, u, bounds.as_ref())?;
    }
    let anchor = u.clone();
    let x_prev = u.clone();
    let phi_prev = group_eval(ctx, g, &x_prev, None, None, &anchor)?;
    let scale = ctx.rho.max(1.0);
    if st.nu.len() != g.n_constraints {
        st.nu = vec![0.0; g.n_constraints];
    }
    st.mu = cfg.penalty_init * scale;
    let mu_max = 1e10 * scale;
    let mut h_prev = f64::INFINITY;
    let mut report = XBlockReport::default();
    for _ in 0..cfg.max_penalty_rounds {
        let (nu, mu) = (st.nu.clone(), st.mu);
        let eval =
            |v: &[f64], gr: &mut [f64]| group_eval(ctx, g, v, Some(gr), Some((&nu, mu)), &anchor);
        let d = metric(ctx, g, u, mu);
        let settings = pg_settings(cfg, ctx.tol, &d);
        let out = match &bounds {
            Some((lo, hi)) => {
                let hess = |v: &[f64]| group_hessian(ctx, g, v, Some((&nu, mu)), true);
                newton_or_gradient(u, &eval, &hess, lo, hi, &project, &d, &settings)?
            }
            None => projected_gradient(u, &eval, &project, &d, &settings)?,
        };
        let h = constraint_values(p, g, u);
        let hn = norm(&h);
        for (n, hv) in st.nu.iter_mut().zip(&h) {
            *n += mu * hv;
        }
        report.steps += out.steps;
        report.residual = out.residual;
        report.infeasibility = hn;
        if hn <= cfg.feasibility_tol && out.residual <= ctx.tol {
            break;
        }
        if hn > 0.25 * h_prev {
            st.mu = (st.mu * cfg.penalty_growth).min(mu_max);
        }
        h_prev = hn;
    }
    let phi_new = group_eval(ctx, g, u, None, None, &anchor)?;
    if phi_new > phi_prev {
        *u = x_prev;
        report.fallbacks = 1;
        report.infeasibility = norm(&constraint_values(p, g, u));
    }
    Ok(report)
}

/// Projected Newton, finished by projected gradient if Newton stalls short
/// of the tolerance.
#[allow(clippy::too_many_arguments)]
fn newton_or_gradient(
    u: &mut Vec<f64>,
    eval: &dyn Fn(&[f64], &mut [f64]) -> Result<f64>,
    hess: &dyn Fn(&[f64]) -> DenseMatrix,
    lo: &[f64],
    hi: &[f64],
    project: &dyn Fn(&mut [f64]),
    d: &[f64],
    s: &PgSettings,
) -> Result<PgOutcome> {
    let newton = PgSettings {
        max_steps: s.max_steps.min(200),
        ..*s
    };
    let out = projected_newton(u, eval, hess, lo, hi, &newton)?;
    if out.residual <= s.tol {
        return Ok(out);
    }
    let mut rest = projected_gradient(u, eval, project, d, s)?;
    rest.steps += out.steps;
    Ok(rest)
}

/// Drives `½‖h(x)‖²` to zero over the base set.
fn restore(
    ctx: &Ctx,
    cfg: &XSolverConfig,
    g: &Group,
    u: &mut Vec<f64>,
    bounds: Option<&(Vec<f64>, Vec<f64>)>,
) -> Result<()> {
    let p = ctx.p;
    let project = |v: &mut [f64]| project_group(p, g, v);
    let eval = |v: &[f64], gr: &mut [f64]| -> Result<f64> {
        gr.iter_mut().for_each(|x| *x = 0.0);
        let mut val = 0.0;
        for (k, &b) in g.blocks.iter().enumerate() {
            let r = block_slice(g, k);
            for c in p.blocks()[b].set.constraints() {
                let h = c.value(&v[r.clone()]);
                val += 0.5 * h * h;
                c.add_scaled_gradient(&v[r.clone()], h, &mut gr[r.clone()]);
            }
        }
        Ok(val)
    };
    let restore_ctx = Ctx {
        rho: 0.0,
        prox: 0.0,
        ..*ctx
    };
    for _ in 0..20 {
        let d = metric(&restore_ctx, g, u, 1.0);
        let mut s = pg_settings(cfg, cfg.feasibility_tol * 1e-2, &d);
        s.max_steps = cfg.max_steps.max(20_000);
        match bounds {
            Some((lo, hi)) => {
                let zeros = vec![0.0; g.n_constraints];
                let hess = |v: &[f64]| group_hessian(&restore_ctx, g, v, Some((&zeros, 1.0)), false);
                newton_or_gradient(u, &eval, &hess, lo, hi, &project, &d, &s)?;
            }
            None => {
                projected_gradient(u, &eval, &project, &d, &s)?;
            }
        }
        if norm(&constraint_values(p, g, u)) <= cfg.feasibility_tol {
            return Ok(());
        }
    }
    Err(Error::Infeasible {
        block: first_block(g),
        violation: norm(&constraint_values(p, g, u)),
    })
}
