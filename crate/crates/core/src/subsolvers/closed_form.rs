use crate::error::{check_len, Result};
use crate::linalg::{dist, norm};
use crate::problem::BlockProblem;

/// Minimizer over `X̄` of `⟨y, Bx̄⟩ + (ρ/2)‖Ax + Bx̄ + z‖² + (h/2)‖x̄ − anchor‖²`.
///
/// With `BᵀB = D` diagonal the problem separates per coordinate and
/// `x̄_j = Proj(( −(Bᵀ(y + ρ(Ax + z)))_j + h·anchor_j ) / (ρD_jj + h))`.
/// Otherwise a projected-gradient loop on the convex quadratic runs to
/// machine precision, starting from `anchor`.
pub fn solve_xbar_prox(
    p: &BlockProblem,
    x: &[f64],
    z: &[f64],
    y: &[f64],
    rho: f64,
    prox: f64,
    anchor: &[f64],
) -> Result<Vec<f64>> {
    check_len("x̄ update: z", p.m(), z.len())?;
    check_len("x̄ update: y", p.m(), y.len())?;
    check_len("x̄ update: anchor", p.n2(), anchor.len())?;
    let mut r = p.a().spmv(x, false)?;
    for i in 0..r.len() {
        r[i] = y[i] + rho * (r[i] + z[i]);
    }
    let gs = p.global_set();
    if let Some(d) = p.btb_diagonal() {
        let v = p.b().mul_t(&r);
        return Ok((0..p.n2())
            .map(|j| gs.clamp_coord(j, (-v[j] + prox * anchor[j]) / (rho * d[j] + prox)))
            .collect());
    }
    // ‖B‖₂² ≤ ‖B‖₁‖B‖∞
    let b = p.b();
    let mut col_abs = vec![0.0; p.n2()];
    let mut row_max: f64 = 0.0;
    for i in 0..b.rows() {
        let (cols, vals) = b.row(i);
        let mut s = 0.0;
        for (&c, &v) in cols.iter().zip(vals) {
            s += v.abs();
            col_abs[c] += v.abs();
        }
        row_max = row_max.max(s);
    }
    let lip = rho * row_max * col_abs.iter().copied().fold(0.0, f64::max) + prox;
    let step = 1.0 / lip;
    let mut xb = anchor.to_vec();
    gs.project(&mut xb);
    let mut prev = xb.clone();
    let mut mom = xb.clone();
    let mut t = 1.0f64;
    for _ in 0..200_000 {
        // gradient at the extrapolated point
        let mut w = b.mul(&mom);
        for i in 0..w.len() {
            w[i] = r[i] + rho * w[i];
        }
        let g = b.mul_t(&w);
        for j in 0..xb.len() {
            xb[j] = mom[j] - step * (g[j] + prox * (mom[j] - anchor[j]));
        }
        gs.project(&mut xb);
        let change = dist(&xb, &prev);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        for j in 0..xb.len() {
            mom[j] = xb[j] + (t - 1.0) / t_next * (xb[j] - prev[j]);
        }
        t = t_next;
        prev.clone_from(&xb);
        if change <= 1e-15 * (1.0 + norm(&xb)) {
            break;
        }
    }
    Ok(xb)
}

/// `argmin_{x̄ ∈ X̄} ⟨y, Bx̄⟩ + (ρ/2)‖Ax + Bx̄ + z‖²`.
pub fn solve_xbar_block(
    p: &BlockProblem,
    x: &[f64],
    z: &[f64],
    y: &[f64],
    rho: f64,
    xbar_prev: &[f64],
) -> Result<Vec<f64>> {
    solve_xbar_prox(p, x, z, y, rho, 0.0, xbar_prev)
}

/// `z = −(λ + y + ρw)/(β + ρ)` with `w = Ax + Bx̄`, the unique minimizer of
/// `⟨λ, z⟩ + (β/2)‖z‖² + ⟨y, w + z⟩ + (ρ/2)‖w + z‖²`.
pub fn z_update(lambda: &[f64], beta: f64, y: &[f64], rho: f64, w: &[f64]) -> Vec<f64> {
    let s = 1.0 / (beta + rho);
    (0..w.len())
        .map(|i| -(lambda[i] + y[i] + rho * w[i]) * s)
        .collect()
}

pub fn solve_z_block(
    p: &BlockProblem,
    lambda: &[f64],
    beta: f64,
    x: &[f64],
    xbar: &[f64],
    y: &[f64],
    rho: f64,
) -> Result<Vec<f64>> {
    check_len("z update: λ", p.m(), lambda.len())?;
    check_len("z update: y", p.m(), y.len())?;
    let w = p.coupling(x, xbar)?;
    Ok(z_update(lambda, beta, y, rho, &w))
}
