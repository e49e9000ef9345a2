//! Independent numerical minimizers of every closed-form block subproblem.

use super::{golden_min, projected_descent, random_suite, rel_err};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twolevel::benchmarks::{gen_infeasible, gen_netflow, NetFlowConfig};
use twolevel::linalg::{dot, norm_sq, DenseMatrix, Mode, Tensor3};
use twolevel::problem::{BlockProblem, Instance};
use twolevel::subsolvers::{solve_xbar_prox, solve_z_block};
use twolevel::tensor_pca::{
    update_bnoise, update_e, update_factor, update_s, update_y, update_z, CpFactors, PcaConfig,
    PcaState,
};

pub const TOL: f64 = 1e-6;

fn uniform(rng: &mut ChaCha8Rng, n: usize, s: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-s..s)).collect()
}

fn consensus_instances() -> Vec<Instance> {
    let mut v = random_suite(20);
    v.push(gen_infeasible(3, 0).unwrap());
    v.push(
        gen_netflow(
            &NetFlowConfig {
                nodes: 5,
                regions: 2,
                ..NetFlowConfig::default()
            },
            1,
        )
        .unwrap(),
    );
    v
}

/// `⟨y, Ax + Bx̄ + z⟩ + (ρ/2)‖Ax + Bx̄ + z‖² + (h/2)‖x̄ − a‖²` over `X̄`.
#[allow(clippy::too_many_arguments)]
pub fn xbar_oracle(
    p: &BlockProblem,
    x: &[f64],
    z: &[f64],
    y: &[f64],
    rho: f64,
    h: f64,
    anchor: &[f64],
) -> Vec<f64> {
    let ax = p.a().mul(x);
    let f = |xb: &[f64]| {
        let bx = p.b().mul(xb);
        let r: Vec<f64> = (0..ax.len()).map(|i| ax[i] + bx[i] + z[i]).collect();
        let d: Vec<f64> = xb.iter().zip(anchor).map(|(a, b)| a - b).collect();
        let val = dot(y, &r) + 0.5 * rho * norm_sq(&r) + 0.5 * h * norm_sq(&d);
        let w: Vec<f64> = (0..r.len()).map(|i| y[i] + rho * r[i]).collect();
        let mut g = p.b().mul_t(&w);
        for (gi, di) in g.iter_mut().zip(&d) {
            *gi += h * di;
        }
        (val, g)
    };
    let project = |v: &mut [f64]| p.global_set().project(v);
    projected_descent(&f, &project, anchor, 200_000)
}

/// `⟨λ, z⟩ + (β/2)‖z‖² + ⟨y, w + z⟩ + (ρ/2)‖w + z‖²` over all `z`.
pub fn z_oracle(lambda: &[f64], beta: f64, y: &[f64], rho: f64, w: &[f64]) -> Vec<f64> {
    let f = |z: &[f64]| {
        let r: Vec<f64> = (0..z.len()).map(|i| w[i] + z[i]).collect();
        let val = dot(lambda, z) + 0.5 * beta * norm_sq(z) + dot(y, &r) + 0.5 * rho * norm_sq(&r);
        let g = (0..z.len())
            .map(|i| lambda[i] + beta * z[i] + y[i] + rho * r[i])
            .collect();
        (val, g)
    };
    projected_descent(&f, &|_| {}, &vec![0.0; w.len()], 200_000)
}

/// Worst relative error of the x̄ and z updates over the consensus
/// instances; also returns the number of instances.
pub fn consensus_oracle_errors() -> (f64, usize) {
    let mut worst: f64 = 0.0;
    let insts = consensus_instances();
    for (seed, inst) in insts.iter().enumerate() {
        let p = &inst.problem;
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
        let x = uniform(&mut rng, p.n1(), 2.0);
        let z = uniform(&mut rng, p.m(), 1.0);
        let y = uniform(&mut rng, p.m(), 3.0);
        let lambda = uniform(&mut rng, p.m(), 3.0);
        let mut anchor = uniform(&mut rng, p.n2(), 2.0);
        p.global_set().project(&mut anchor);
        let beta = rng.random_range(0.5..20.0);
        let rho = 2.0 * beta;
        for h in [0.0, rng.random_range(0.1..5.0)] {
            let got = solve_xbar_prox(p, &x, &z, &y, rho, h, &anchor).unwrap();
            let want = xbar_oracle(p, &x, &z, &y, rho, h, &anchor);
            worst = worst.max(rel_err(&got, &want));
        }
        let got = solve_z_block(p, &lambda, beta, &x, &anchor, &y, rho).unwrap();
        let w = p.coupling(&x, &anchor).unwrap();
        worst = worst.max(rel_err(&got, &z_oracle(&lambda, beta, &y, rho, &w)));
    }
    (worst, insts.len())
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DenseMatrix {
    DenseMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn rand_tensor(rng: &mut ChaCha8Rng, d: [usize; 3], s: f64) -> Tensor3 {
    Tensor3::from_fn(d, |_, _, _| rng.random_range(-s..s))
}

fn cp_entry(f: &CpFactors, i: usize, j: usize, k: usize) -> f64 {
    (0..f.a.cols())
        .map(|r| f.a.get(i, r) * f.b.get(j, r) * f.c.get(k, r))
        .sum()
}

/// `Σ (𝒵 − ⟦A, B, C⟧)² + (δ/2)‖F − Fᵏ‖²` over the factor of `mode`.
fn factor_oracle(f: &CpFactors, z: &Tensor3, mode: Mode, delta: f64) -> Vec<f64> {
    let [i1, i2, i3] = z.dims();
    let rank = f.a.cols();
    let (rows, fk) = match mode {
        Mode::One => (i1, &f.a),
        Mode::Two => (i2, &f.b),
        Mode::Three => (i3, &f.c),
    };
    let unpack = |v: &[f64]| DenseMatrix::from_fn(rows, rank, |r, c| v[r * rank + c]);
    let obj = |v: &[f64]| {
        let m = unpack(v);
        let mut g2 = f.clone();
        match mode {
            Mode::One => g2.a = m.clone(),
            Mode::Two => g2.b = m.clone(),
            Mode::Three => g2.c = m.clone(),
        }
        let mut val = 0.0;
        let mut grad = vec![0.0; rows * rank];
        for i in 0..i1 {
            for j in 0..i2 {
                for k in 0..i3 {
                    let e = z.get(i, j, k) - cp_entry(&g2, i, j, k);
                    val += e * e;
                    for r in 0..rank {
                        let (row, other) = match mode {
                            Mode::One => (i, g2.b.get(j, r) * g2.c.get(k, r)),
                            Mode::Two => (j, g2.a.get(i, r) * g2.c.get(k, r)),
                            Mode::Three => (k, g2.a.get(i, r) * g2.b.get(j, r)),
                        };
                        grad[row * rank + r] -= 2.0 * e * other;
                    }
                }
            }
        }
        for r in 0..rows {
            for c in 0..rank {
                let d = m.get(r, c) - fk.get(r, c);
                val += 0.5 * delta * d * d;
                grad[r * rank + c] += delta * d;
            }
        }
        (val, grad)
    };
    let start: Vec<f64> = (0..rows * rank).map(|q| fk.get(q / rank, q % rank)).collect();
    projected_descent(&obj, &|_| {}, &start, 200_000)
}

fn flat(m: &DenseMatrix) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r * c).map(|q| m.get(q / c, q % c)).collect()
}

/// A random PCA state on random small dimensions.
pub fn random_pca_state(seed: u64) -> (PcaState, Tensor3, PcaConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = [
        rng.random_range(2..5),
        rng.random_range(2..5),
        rng.random_range(2..5),
    ];
    let rank = rng.random_range(1..4);
    let f = CpFactors::new(
        rand_matrix(&mut rng, d[0], rank),
        rand_matrix(&mut rng, d[1], rank),
        rand_matrix(&mut rng, d[2], rank),
    )
    .unwrap();
    let cfg = PcaConfig {
        alpha: rng.random_range(0.05..1.0),
        alpha_n: rng.random_range(0.1..2.0),
        delta: [0.0; 6].map(|_| rng.random_range(0.01..1.0)),
        beta_init: rng.random_range(0.5..10.0),
        rank,
        ..PcaConfig::default()
    };
    let mut st = PcaState::new(f, &cfg);
    st.z = rand_tensor(&mut rng, d, 2.0);
    st.e = rand_tensor(&mut rng, d, 1.0);
    st.noise = rand_tensor(&mut rng, d, 0.5);
    st.s = rand_tensor(&mut rng, d, 0.5);
    st.y = rand_tensor(&mut rng, d, 2.0);
    st.lambda = rand_tensor(&mut rng, d, 2.0);
    let t = rand_tensor(&mut rng, d, 3.0);
    (st, t, cfg)
}

/// Entry-wise golden-section minimizer of a separable objective.
fn entrywise(t: &Tensor3, phi: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    (0..t.len())
        .map(|i| golden_min(|v| phi(i, v), -1e3, 1e3))
        .collect()
}

/// Worst relative error of every tensor PCA block update over `count` random
/// states.
pub fn pca_oracle_errors(count: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..count {
        let (st, t, cfg) = random_pca_state(seed);
        let (rho, beta, tau) = (st.rho, st.beta, st.tau);
        let [tt, y, b, z, s, e, l] = [
            t.as_slice(),
            st.y.as_slice(),
            st.noise.as_slice(),
            st.z.as_slice(),
            st.s.as_slice(),
            st.e.as_slice(),
            st.lambda.as_slice(),
        ];
        for (idx, mode) in Mode::ALL.into_iter().enumerate() {
            let got = update_factor(&st.factors, &st.z, mode, cfg.delta[idx]).unwrap();
            let want = factor_oracle(&st.factors, &st.z, mode, cfg.delta[idx]);
            worst = worst.max(rel_err(&flat(&got), &want));
        }
        // r(v) with the block in question replaced by v
        let res = |i: usize, zz: f64, ee: f64, bb: f64, ss: f64| zz + ee + bb + ss - tt[i];
        let al = |i: usize, r: f64| -y[i] * r + 0.5 * rho * r * r;

        let got = update_e(&st, &t, cfg.alpha, cfg.delta[3]).unwrap();
        let want = entrywise(&t, |i, v| {
            let dv = v - e[i];
            cfg.alpha * v.abs() + al(i, res(i, z[i], v, b[i], s[i])) + 0.5 * cfg.delta[3] * dv * dv
        });
        worst = worst.max(rel_err(got.as_slice(), &want));

        let [d1, d2, d3] = st.z.dims();
        let model: Vec<f64> = (0..d1)
            .flat_map(|i| (0..d2).flat_map(move |j| (0..d3).map(move |k| (i, j, k))))
            .map(|(i, j, k)| (st.z.index(i, j, k), cp_entry(&st.factors, i, j, k)))
            .fold(vec![0.0; t.len()], |mut acc, (q, v)| {
                acc[q] = v;
                acc
            });
        let got = update_z(&st, &t, cfg.delta[4]).unwrap();
        let want = entrywise(&t, |i, v| {
            let (dm, dv) = (v - model[i], v - z[i]);
            dm * dm + cfg.delta[4] * dv * dv + al(i, res(i, v, e[i], b[i], s[i]))
        });
        worst = worst.max(rel_err(got.as_slice(), &want));

        let got = update_bnoise(&st, &t, cfg.alpha_n, cfg.delta[5]).unwrap();
        let want = entrywise(&t, |i, v| {
            let dv = v - b[i];
            cfg.alpha_n * v * v + al(i, res(i, z[i], e[i], v, s[i])) + 0.5 * cfg.delta[5] * dv * dv
        });
        worst = worst.max(rel_err(got.as_slice(), &want));

        // linearized step: ⟨∇_𝓢 L, 𝓢 − 𝓢ᵏ⟩ + ‖𝓢 − 𝓢ᵏ‖²/(2τ)
        let got = update_s(&st, &t).unwrap();
        let want = entrywise(&t, |i, v| {
            let r = res(i, z[i], e[i], b[i], s[i]);
            let g = l[i] + beta * s[i] - y[i] + rho * r;
            let dv = v - s[i];
            g * dv + dv * dv / (2.0 * tau)
        });
        worst = worst.max(rel_err(got.as_slice(), &want));

        let got = update_y(&st, &t).unwrap();
        let want: Vec<f64> = (0..t.len())
            .map(|i| y[i] - rho * res(i, z[i], e[i], b[i], s[i]))
            .collect();
        worst = worst.max(rel_err(got.as_slice(), &want));
    }
    worst
}
