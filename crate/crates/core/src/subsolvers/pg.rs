//! Monotone projected gradient with Barzilai-Borwein trial steps and
//! Armijo backtracking in a diagonal metric.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct PgSettings {
    pub max_steps: usize,
    pub tol: f64,
    pub shrink: f64,
    pub sigma: f64,
    /// Step used to measure `‖u − P(u − η∇φ)‖/η`.
    pub eta_res: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PgOutcome {
    pub phi: f64,
    pub residual: f64,
    pub steps: usize,
    pub stalled: bool,
}

pub(crate) fn stationarity_residual(
    u: &[f64],
    g: &[f64],
    eta: f64,
    project: &dyn Fn(&mut [f64]),
) -> f64 {
    let mut v: Vec<f64> = u.iter().zip(g).map(|(a, b)| a - eta * b).collect();
    project(&mut v);
    let mut s = 0.0;
    for (a, b) in u.iter().zip(&v) {
        s += (a - b) * (a - b);
    }
    s.sqrt() / eta
}

/// Minimizes `eval` over the set behind `project`, starting from the
/// feasible point `u`. `dscale` is a positive diagonal metric that must be
/// constant on every chunk the projection couples, so projecting in the
/// scaled metric is the plain projection. Every accepted step satisfies
/// `φ(u⁺) ≤ φ(u) − (σ/η)‖u⁺ − u‖²_D`, hence `φ` never increases.
pub(crate) fn projected_gradient(
    u: &mut Vec<f64>,
    eval: &dyn Fn(&[f64], &mut [f64]) -> Result<f64>,
    project: &dyn Fn(&mut [f64]),
    dscale: &[f64],
    s: &PgSettings,
) -> Result<PgOutcome> {
    let n = u.len();
    let mut g = vec![0.0; n];
    let mut phi = eval(u, &mut g)?;
    if !phi.is_finite() {
        return Err(Error::NonFinite {
            context: "projected-gradient start value".into(),
            iteration: 0,
        });
    }
    let mut residual = stationarity_residual(u, &g, s.eta_res, project);
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
    let mut eta = 1.0;
    for step in 0..s.max_steps {
        let mut accepted = None;
        for _ in 0..80 {
            for j in 0..n {
                trial[j] = u[j] - eta * g[j] / dscale[j];
            }
            project(&mut trial);
            let mut dist2 = 0.0;
            for j in 0..n {
                dist2 += dscale[j] * (trial[j] - u[j]) * (trial[j] - u[j]);
            }
            if dist2 == 0.0 {
                break;
            }
            match eval(&trial, &mut g_new) {
                // below rounding noise, plain nonincrease is accepted
                Ok(v) if v.is_finite()
                    && (v <= phi - s.sigma / eta * dist2
                        || (v <= phi && s.sigma / eta * dist2 <= 1e-14 * phi.abs().max(1.0))) =>
                {
                    accepted = Some(v);
                    break;
                }
                _ => eta *= s.shrink,
            }
        }
        let Some(phi_new) = accepted else {
            out.stalled = true;
            break;
        };
        let mut sy = 0.0;
        let mut sds = 0.0;
        for j in 0..n {
            let sj = trial[j] - u[j];
            sy += sj * (g_new[j] - g[j]);
            sds += dscale[j] * sj * sj;
        }
        eta = if sy > 0.0 { sds / sy } else { eta * 4.0 };
        eta = eta.clamp(1e-12, 1e12);
        std::mem::swap(u, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        phi = phi_new;
        residual = stationarity_residual(u, &g, s.eta_res, project);
        out.steps = step + 1;
        if residual <= s.tol {
            break;
        }
    }
    out.phi = phi;
    out.residual = residual;
    Ok(out)
}

/// `1/max(D)`: the residual step matched to the stiffest coordinate.
pub(crate) fn residual_step(dscale: &[f64]) -> f64 {
    1.0 / dscale.iter().copied().fold(1.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(tol: f64) -> PgSettings {
        PgSettings {
            max_steps: 10_000,
            tol,
            shrink: 0.5,
            sigma: 1e-4,
            eta_res: 1.0,
        }
    }

    #[test]
    fn ill_conditioned_quadratic_over_box() {
        // ½(1000 u0² + u1²) − 1000 u0 − 5 u1 over [0, 2]², solution (1, 2)
        let eval = |u: &[f64], g: &mut [f64]| {
            g[0] = 1000.0 * u[0] - 1000.0;
            g[1] = u[1] - 5.0;
            Ok(0.5 * (1000.0 * u[0] * u[0] + u[1] * u[1]) - 1000.0 * u[0] - 5.0 * u[1])
        };
        let project = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = x.clamp(0.0, 2.0));
        let mut u = vec![0.0, 0.0];
        let d = [1000.0, 1.0];
        let mut s = settings(1e-10);
        s.eta_res = residual_step(&d);
        let out = projected_gradient(&mut u, &eval, &project, &d, &s).unwrap();
        assert!(out.residual <= 1e-10, "{out:?}");
        assert!((u[0] - 1.0).abs() < 1e-10 && (u[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn stationary_start_is_returned_untouched() {
        let eval = |u: &[f64], g: &mut [f64]| {
            g[0] = u[0];
            Ok(0.5 * u[0] * u[0])
        };
        let project = |_: &mut [f64]| {};
        let mut u = vec![0.0];
        let out = projected_gradient(&mut u, &eval, &project, &[1.0], &settings(1e-12)).unwrap();
        assert_eq!(out.steps, 0);
        assert_eq!(u, vec![0.0]);
    }
}
