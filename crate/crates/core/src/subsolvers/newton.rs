//! Projected Newton over a box with an Armijo search along the projection
//! arc. Coordinates near an active bound whose gradient points outward take
//! a scaled gradient step; the rest take a Newton step on the reduced,
//! shifted-to-definite Hessian.

use super::pg::{stationarity_residual, PgOutcome, PgSettings};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// Solves `(H + τI) d = −g` with the smallest `τ` from a geometric ladder
/// that makes the matrix positive definite.
fn shifted_newton_step(h: &DenseMatrix, g: &[f64]) -> Result<Vec<f64>> {
    let n = g.len();
    let scale = (0..n).map(|i| h.get(i, i).abs()).fold(1.0, f64::max);
    let rhs = DenseMatrix::from_fn(1, n, |_, j| -g[j]);
    let mut tau = 0.0;
    for _ in 0..40 {
        let mut m = h.clone();
        m.add_diagonal(tau);
        if let Ok(d) = rhs.solve_spd_right(&m) {
            if d.as_slice().iter().all(|v| v.is_finite()) {
                return Ok(d.into_vec());
            }
        }
        tau = if tau == 0.0 { 1e-10 * scale } else { tau * 10.0 };
    }
    Err(Error::Singular("no positive definite shift of the Newton matrix".into()))
}

pub(crate) fn projected_newton(
    u: &mut Vec<f64>,
    eval: &dyn Fn(&[f64], &mut [f64]) -> Result<f64>,
    hess: &dyn Fn(&[f64]) -> DenseMatrix,
    lower: &[f64],
    upper: &[f64],
    s: &PgSettings,
) -> Result<PgOutcome> {
    let n = u.len();
    let project = |v: &mut [f64]| {
        for j in 0..v.len() {
            v[j] = v[j].clamp(lower[j], upper[j]);
        }
    };
    project(u);
    let mut g = vec![0.0; n];
    let mut phi = eval(u, &mut g)?;
    if !phi.is_finite() {
        return Err(Error::NonFinite {
            context: "projected-Newton start value".into(),
            iteration: 0,
        });
    }
    let mut residual = stationarity_residual(u, &g, s.eta_res, &project);
    let mut out = PgOutcome {
        phi,
        residual,
        steps: 0,
        stalled: false,
    };
    if residual <= s.tol || n == 0 {
        return Ok(out);
    }
    let mut trial = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for step in 0..s.max_steps {
        let width = stationarity_residual(u, &g, 1.0, &project).min(1e-3);
        let binding: Vec<bool> = (0..n)
            .map(|j| {
                (u[j] <= lower[j] + width && g[j] > 0.0) || (u[j] >= upper[j] - width && g[j] < 0.0)
            })
            .collect();
        let free: Vec<usize> = (0..n).filter(|&j| !binding[j]).collect();
        let h = hess(u);
        let mut d = vec![0.0; n];
        for j in (0..n).filter(|&j| binding[j]) {
            d[j] = -g[j] / h.get(j, j).max(1.0);
        }
        if !free.is_empty() {
            let hf = DenseMatrix::from_fn(free.len(), free.len(), |a, b| h.get(free[a], free[b]));
            let gf: Vec<f64> = free.iter().map(|&j| g[j]).collect();
            for (k, v) in shifted_newton_step(&hf, &gf)?.into_iter().enumerate() {
                d[free[k]] = v;
            }
        }
        let newton_dec: f64 = free.iter().map(|&j| -g[j] * d[j]).sum();
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for j in 0..n {
                trial[j] = u[j] + alpha * d[j];
            }
            project(&mut trial);
            if trial == *u {
                break;
            }
            let bound_dec: f64 = (0..n)
                .filter(|&j| binding[j])
                .map(|j| g[j] * (u[j] - trial[j]))
                .sum();
            let dec = alpha * newton_dec + bound_dec;
            match eval(&trial, &mut g_new) {
                Ok(v) if v.is_finite()
                    && (v <= phi - s.sigma * dec
                        || (v <= phi && s.sigma * dec.abs() <= 1e-14 * phi.abs().max(1.0))) =>
                {
                    accepted = Some(v);
                    break;
                }
                _ => alpha *= s.shrink,
            }
        }
        let Some(phi_new) = accepted else {
            out.stalled = true;
            break;
        };
        std::mem::swap(u, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        phi = phi_new;
        residual = stationarity_residual(u, &g, s.eta_res, &project);
        out.steps = step + 1;
        if residual <= s.tol {
            break;
        }
    }
    out.phi = phi;
    out.residual = residual;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(tol: f64) -> PgSettings {
        PgSettings {
            max_steps: 100,
            tol,
            shrink: 0.5,
            sigma: 1e-4,
            eta_res: 1.0,
        }
    }

    #[test]
    fn quadratic_over_box_in_few_steps() {
        // ½(1000 u0² + u1²) − 1000 u0 − 5 u1 over [0, 2]², solution (1, 2)
        let eval = |u: &[f64], g: &mut [f64]| {
            g[0] = 1000.0 * u[0] - 1000.0;
            g[1] = u[1] - 5.0;
            Ok(0.5 * (1000.0 * u[0] * u[0] + u[1] * u[1]) - 1000.0 * u[0] - 5.0 * u[1])
        };
        let hess = |_: &[f64]| DenseMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 1000.0,
            (1, 1) => 1.0,
            _ => 0.0,
        });
        let mut u = vec![0.0, 0.0];
        let out =
            projected_newton(&mut u, &eval, &hess, &[0.0; 2], &[2.0; 2], &settings(1e-12)).unwrap();
        assert!(out.steps <= 5, "{out:?}");
        assert!((u[0] - 1.0).abs() < 1e-12 && u[1] == 2.0, "{u:?}");
    }

    #[test]
    fn indefinite_hessian_still_descends() {
        // u0² − u1² over [−1, 1]², from (0.5, 0.1): minimizers at u1 = ±1
        let eval = |u: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * u[0];
            g[1] = -2.0 * u[1];
            Ok(u[0] * u[0] - u[1] * u[1])
        };
        let hess = |_: &[f64]| DenseMatrix::from_fn(2, 2, |i, j| match (i, j) {
            (0, 0) => 2.0,
            (1, 1) => -2.0,
            _ => 0.0,
        });
        let mut u = vec![0.5, 0.1];
        let out =
            projected_newton(&mut u, &eval, &hess, &[-1.0; 2], &[1.0; 2], &settings(1e-10)).unwrap();
        assert!(out.residual <= 1e-10, "{out:?}");
        assert!(u[0].abs() < 1e-8 && u[1] == 1.0, "{u:?}");
    }
}
