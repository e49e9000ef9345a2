//! Shared pieces of the integration tests and the acceptance runner:
//! an inner-iteration invariant checker, instance suites and independent
//! numerical minimizers used as oracles.
#![allow(dead_code)]

pub mod oracles;

use twolevel::benchmarks::{
    gen_infeasible, gen_netflow, gen_random_consensus, gen_sphere, gen_toy, NetFlowConfig,
    RandomConsensusConfig,
};
use twolevel::inner::{InnerObserver, InnerSnapshot};
use twolevel::linalg::{dot, norm, norm_inf, norm_sq};
use twolevel::outer::{run_outer, OuterConfig, SafeguardedDual};
use twolevel::problem::{BlockProblem, Instance};

/// `f(x) + ⟨λ, z⟩ + (β/2)‖z‖² + ⟨y, Ax + Bx̄ + z⟩ + (ρ/2)‖Ax + Bx̄ + z‖²`,
/// evaluated from scratch.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian(
    p: &BlockProblem,
    lambda: &[f64],
    beta: f64,
    rho: f64,
    x: &[f64],
    xbar: &[f64],
    z: &[f64],
    y: &[f64],
) -> f64 {
    let mut r = p.a().mul(x);
    for (ri, (bi, zi)) in r.iter_mut().zip(p.b().mul(xbar).iter().zip(z)) {
        *ri += bi + zi;
    }
    p.objective(x).unwrap() + dot(lambda, z) + 0.5 * beta * norm_sq(z) + dot(y, &r)
        + 0.5 * rho * norm_sq(&r)
}

/// Worst normalized violation of each inner-iteration invariant; a value
/// above 1 is a failure.
#[derive(Debug, Default, Clone)]
pub struct InvariantTally {
    pub iterations: usize,
    /// descent, multiplier identity, residual identity, lower bound
    pub worst: [f64; 4],
    pub first_failure: Option<String>,
}

impl InvariantTally {
    pub fn ok(&self) -> bool {
        self.first_failure.is_none()
    }

    pub fn merge(&mut self, o: &InvariantTally) {
        self.iterations += o.iterations;
        for i in 0..4 {
            self.worst[i] = self.worst[i].max(o.worst[i]);
        }
        if self.first_failure.is_none() {
            self.first_failure.clone_from(&o.first_failure);
        }
    }
}

pub struct InvariantChecker<'a> {
    pub p: &'a BlockProblem,
    pub label: String,
    pub tally: InvariantTally,
}

impl<'a> InvariantChecker<'a> {
    pub fn new(p: &'a BlockProblem, label: impl Into<String>) -> Self {
        Self {
            p,
            label: label.into(),
            tally: InvariantTally::default(),
        }
    }

    fn record(&mut self, which: usize, ratio: f64, t: usize, what: &str) {
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.tally.worst[which] = self.tally.worst[which].max(ratio);
        if ratio > 1.0 && self.tally.first_failure.is_none() {
            self.tally.first_failure = Some(format!("{} t={t}: {what} (ratio {ratio:.3e})", self.label));
        }
    }
}

impl InnerObserver for InvariantChecker<'_> {
    fn on_iteration(&mut self, s: &InnerSnapshot<'_>) -> twolevel::Result<()> {
        let p = self.p;
        self.tally.iterations += 1;
        let (beta, rho) = (s.beta, s.rho);
        let l_prev = lagrangian(p, s.lambda, beta, rho, s.x_prev, s.xbar_prev, s.z_prev, s.y_prev);
        let l_now = lagrangian(p, s.lambda, beta, rho, s.x, s.xbar, s.z, s.y);

        // (a) L(t−1) − L(t) ≥ β‖B(x̄ᵗ⁻¹ − x̄ᵗ)‖² + (β/2)‖zᵗ⁻¹ − zᵗ‖², within 1e−8
        let dxb: Vec<f64> = s.xbar_prev.iter().zip(s.xbar).map(|(a, b)| a - b).collect();
        let dz: Vec<f64> = s.z_prev.iter().zip(s.z).map(|(a, b)| a - b).collect();
        let bound = beta * norm_sq(&p.b().mul(&dxb)) + 0.5 * beta * norm_sq(&dz);
        let short = bound - (l_prev - l_now);
        self.record(0, short / 1e-8, s.t, "descent inequality");

        // (b) λ + βz + y = 0
        let scale_b = 1f64
            .max(norm_inf(s.lambda))
            .max(beta * norm_inf(s.z))
            .max(norm_inf(s.y));
        let dev = (0..s.y.len())
            .map(|i| (s.lambda[i] + beta * s.z[i] + s.y[i]).abs())
            .fold(0.0, f64::max);
        self.record(1, dev / (1e-10 * scale_b), s.t, "λ + βz + y = 0");

        // (c) ‖Ax + Bx̄ + z‖ = ½‖zᵗ⁻¹ − zᵗ‖
        let ax = p.a().mul(s.x);
        let bxb = p.b().mul(s.xbar);
        let r: Vec<f64> = (0..ax.len()).map(|i| ax[i] + bxb[i] + s.z[i]).collect();
        let scale_c = 1f64
            .max(norm_inf(&ax))
            .max(norm_inf(&bxb))
            .max(norm_inf(s.z))
            .max(norm_inf(s.z_prev))
            .max(norm_inf(s.lambda) / beta);
        let gap = (norm(&r) - 0.5 * norm(&dz)).abs();
        self.record(2, gap / (1e-10 * scale_c), s.t, "residual identity");

        // (d) L ≥ f(x) − ‖λ‖²/(2β)
        let f = p.objective(s.x).unwrap();
        let lower = f - norm_sq(s.lambda) / (2.0 * beta);
        let below = lower - l_now;
        self.record(3, below / (1e-8 * 1f64.max(f.abs())), s.t, "lower bound");
        Ok(())
    }
}

/// The 50 random consensus instances of the invariant suite.
pub fn random_suite(count: u64) -> Vec<Instance> {
    (0..count)
        .map(|seed| gen_random_consensus(&RandomConsensusConfig::default(), seed).unwrap())
        .collect()
}

/// One small instance of every consensus benchmark family.
pub fn family_suite() -> Vec<(String, Instance)> {
    vec![
        ("toy".into(), gen_toy().unwrap()),
        ("infeasible".into(), gen_infeasible(2, 0).unwrap()),
        ("sphere".into(), gen_sphere(6, 1).unwrap()),
        (
            "netflow".into(),
            gen_netflow(
                &NetFlowConfig {
                    nodes: 6,
                    regions: 2,
                    ..NetFlowConfig::default()
                },
                2,
            )
            .unwrap(),
        ),
    ]
}

/// Minimizes a smooth convex function over a set with a projection by
/// projected gradient with backtracking, from `x0`.
pub fn projected_descent(
    f: &dyn Fn(&[f64]) -> (f64, Vec<f64>),
    project: &dyn Fn(&mut [f64]),
    x0: &[f64],
    iters: usize,
) -> Vec<f64> {
    let mut x = x0.to_vec();
    project(&mut x);
    let (mut fx, mut g) = f(&x);
    let mut step = 1.0;
    for _ in 0..iters {
        let mut accepted = false;
        for _ in 0..80 {
            let mut cand: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            project(&mut cand);
            let d: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (fc, gc) = f(&cand);
            if fc <= fx + dot(&g, &d) + norm_sq(&d) / (2.0 * step) {
                if norm(&d) <= 1e-15 * (1.0 + norm(&x)) {
                    return cand;
                }
                x = cand;
                fx = fc;
                g = gc;
                step *= 2.0;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    x
}

/// Minimizes a one-dimensional convex function on `[lo, hi]` by golden
/// section.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
        if hi - lo <= 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    0.5 * (lo + hi)
}

pub fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let d: Vec<f64> = got.iter().zip(want).map(|(a, b)| a - b).collect();
    norm(&d) / norm(want).max(1e-12)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

/// Outer budget of the invariant suite.
pub fn invariant_budget() -> OuterConfig {
    let mut cfg = OuterConfig {
        eps: 1e-6,
        max_outer: 12,
        max_total_inner: 3000,
        ..OuterConfig::default()
    };
    cfg.inner.max_iters = 600;
    cfg.inner.record_potential = false;
    cfg
}

/// Runs the two-level method on `inst` and checks every inner iteration.
pub fn check_invariants(inst: &Instance, label: &str) -> InvariantTally {
    let p = &inst.problem;
    let mut chk = InvariantChecker::new(p, label);
    run_outer(
        p,
        &invariant_budget(),
        inst.initial_x.as_deref(),
        &mut SafeguardedDual,
        "two_level",
        Some(&mut chk),
    )
    .unwrap();
    chk.tally
}
