//! Robust tensor PCA
//! `min ‖𝒵 − ⟦A,B,C⟧‖² + α‖𝓔‖₁ + α_N‖𝓑‖²` s.t. `𝒵 + 𝓔 + 𝓑 = 𝒯`
//! by the two-level scheme: a slack `𝓢` with multiplier `Λ` and penalty
//! `β` wraps a multi-block ADMM whose block updates are all closed form.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hadamard, khatri_rao, DenseMatrix, Mode, Tensor3};

/// Factor matrices `A` (I₁×R), `B` (I₂×R), `C` (I₃×R).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFactors {
    pub a: DenseMatrix,
    pub b: DenseMatrix,
    pub c: DenseMatrix,
}

impl CpFactors {
    pub fn new(a: DenseMatrix, b: DenseMatrix, c: DenseMatrix) -> Result<Self> {
        let r = a.cols();
        if b.cols() != r || c.cols() != r {
            return Err(Error::InvalidArgument(format!(
                "factor ranks differ: {}, {}, {}",
                r,
                b.cols(),
                c.cols()
            )));
        }
        Ok(Self { a, b, c })
    }

    /// Factors with i.i.d. `N(0, scale²)` entries.
    pub fn random(dims: [usize; 3], rank: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let mut draw = |rows: usize| {
            DenseMatrix::from_fn(rows, rank, |_, _| {
                scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
        };
        let a = draw(dims[0]);
        let b = draw(dims[1]);
        let c = draw(dims[2]);
        Self { a, b, c }
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.a.rows(), self.b.rows(), self.c.rows()]
    }

    pub fn factor(&self, mode: Mode) -> &DenseMatrix {
        match mode {
            Mode::One => &self.a,
            Mode::Two => &self.b,
            Mode::Three => &self.c,
        }
    }

    fn factor_mut(&mut self, mode: Mode) -> &mut DenseMatrix {
        match mode {
            Mode::One => &mut self.a,
            Mode::Two => &mut self.b,
            Mode::Three => &mut self.c,
        }
    }

    /// The two factors other than `mode`'s, in Khatri–Rao order
    /// (`(C, B)`, `(C, A)`, `(B, A)`).
    fn others(&self, mode: Mode) -> (&DenseMatrix, &DenseMatrix) {
        match mode {
            Mode::One => (&self.c, &self.b),
            Mode::Two => (&self.c, &self.a),
            Mode::Three => (&self.b, &self.a),
        }
    }
}

/// `T[i,j,k] = Σ_r A[i,r]·B[j,r]·C[k,r]`.
pub fn cp_reconstruct(f: &CpFactors) -> Tensor3 {
    let dims = f.dims();
    let r = f.rank();
    let mut t = Tensor3::zeros(dims);
    let (i1, i2) = (dims[0], dims[1]);
    t.as_mut_slice()
        .par_chunks_mut(i1 * i2)
        .enumerate()
        .for_each(|(k, slab)| {
            for j in 0..i2 {
                for q in 0..r {
                    let w = f.b.get(j, q) * f.c.get(k, q);
                    if w == 0.0 {
                        continue;
                    }
                    let col = f.a.col(q);
                    for i in 0..i1 {
                        slab[i + i1 * j] += col[i] * w;
                    }
                }
            }
        });
    t
}

/// `argmin_F ‖Z₍ₙ₎ − F(P ⊙ Q)ᵀ‖² + (δ/2)‖F − Fᵏ‖²`, i.e.
/// `F = [Z₍ₙ₎(P ⊙ Q) + (δ/2)Fᵏ][(PᵀP)∘(QᵀQ) + (δ/2)I]⁻¹`.
pub fn update_factor(f: &CpFactors, z: &Tensor3, mode: Mode, delta: f64) -> Result<DenseMatrix> {
    if z.dims() != f.dims() {
        return Err(Error::InvalidArgument(format!(
            "tensor dims {:?} do not match factor dims {:?}",
            z.dims(),
            f.dims()
        )));
    }
    let (p, q) = f.others(mode);
    let kr = khatri_rao(p, q)?;
    let mut rhs = z.unfold(mode).matmul(&kr)?;
    rhs.add_scaled(0.5 * delta, f.factor(mode));
    let mut gram = hadamard(&p.gram(), &q.gram())?;
    gram.add_diagonal(0.5 * delta);
    let out = rhs.solve_spd_right(&gram)?;
    if !out.is_finite() {
        return Err(Error::NonFinite {
            context: format!("factor update {mode:?}"),
            iteration: 0,
        });
    }
    Ok(out)
}

/// Multiplier-update variant of the PCA loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaMode {
    /// Slack `𝓢`, multiplier `Λ` and an increasing penalty.
    TwoLevel,
    /// `𝓢 ≡ 0`, `Λ ≡ 0`, fixed penalty: the one-level ADMM.
    OneLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub alpha: f64,
    pub alpha_n: f64,
    /// `δ₁..δ₆`; entries 0–2 for the factors, 3 for `𝓔`, 4 for `𝒵`, 5 for `𝓑`.
    pub delta: [f64; 6],
    pub gamma: f64,
    /// `ρ = c·β`.
    pub c: f64,
    pub beta_init: f64,
    pub beta_cap: f64,
    /// Rank estimate `R`.
    pub rank: usize,
    pub max_inner: usize,
    /// Outer update fires when `‖𝒵+𝓔+𝓑+𝓢−𝒯‖ < max{floor, scale/K_out}`.
    pub threshold_floor: f64,
    pub threshold_scale: f64,
    /// Stop early once `r_k = ‖𝒵+𝓔+𝓑−𝒯‖` falls to this value.
    pub stop_tol: Option<f64>,
    /// Standard deviation of the initial factor entries; zero gives zero factors.
    pub init_scale: f64,
    pub seed: u64,
    pub mode: PcaMode,
    /// Box for `Λ` after each outer update; no projection when absent.
    pub lambda_bounds: Option<(f64, f64)>,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self {
            alpha: 0.4,
            alpha_n: 1.0,
            delta: [1e-2; 6],
            gamma: 1.5,
            c: 3.0,
            beta_init: 2.0,
            beta_cap: 1e6,
            rank: 4,
            max_inner: 2000,
            threshold_floor: 1e-5,
            threshold_scale: 1e-3,
            stop_tol: None,
            init_scale: 1.0,
            seed: 0,
            mode: PcaMode::TwoLevel,
            lambda_bounds: None,
        }
    }
}

impl PcaConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, message: &str| {
            Err(Error::Config {
                field: format!("pca.{field}"),
                message: message.into(),
            })
        };
        if !(self.alpha >= 0.0 && self.alpha_n >= 0.0) {
            return bad("alpha", "weights must be nonnegative");
        }
        if self.delta.iter().any(|d| !(*d > 0.0)) {
            return bad("delta", "proximal constants must be positive");
        }
        if !(self.gamma > 1.0) {
            return bad("gamma", "must exceed 1");
        }
        if !(self.c > 0.0 && self.beta_init > 0.0 && self.beta_cap >= self.beta_init) {
            return bad("beta_init", "need c > 0 and 0 < beta_init <= beta_cap");
        }
        if self.rank == 0 {
            return bad("rank", "must be positive");
        }
        if self.lambda_bounds.is_some_and(|(lo, hi)| !(hi > lo)) {
            return bad("lambda_bounds", "need upper > lower");
        }
        if !(self.init_scale >= 0.0) {
            return bad("init_scale", "must be nonnegative");
        }
        Ok(())
    }

    pub fn threshold(&self, k_out: usize) -> f64 {
        self.threshold_floor
            .max(self.threshold_scale / k_out.max(1) as f64)
    }
}

/// Iterates of the PCA loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaState {
    pub factors: CpFactors,
    pub z: Tensor3,
    pub e: Tensor3,
    pub noise: Tensor3,
    pub s: Tensor3,
    pub y: Tensor3,
    pub lambda: Tensor3,
    pub beta: f64,
    pub rho: f64,
    pub tau: f64,
    /// Outer counter `K_out`, starting at 1.
    pub k_out: usize,
}

impl PcaState {
    /// Given factors, zero tensors and `β = β¹`, `ρ = cβ`, `τ = 1/ρ`.
    pub fn new(factors: CpFactors, cfg: &PcaConfig) -> Self {
        let dims = factors.dims();
        let zero = Tensor3::zeros(dims);
        let rho = cfg.c * cfg.beta_init;
        Self {
            factors,
            z: zero.clone(),
            e: zero.clone(),
            noise: zero.clone(),
            s: zero.clone(),
            y: zero.clone(),
            lambda: zero,
            beta: cfg.beta_init,
            rho,
            tau: 1.0 / rho,
            k_out: 1,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.z.dims()
    }

    /// `𝒵 + 𝓔 + 𝓑 + 𝓢 − 𝒯`.
    pub fn full_residual(&self, t: &Tensor3) -> Tensor3 {
        map_entries(t, |idx| {
            self.z.as_slice()[idx] + self.e.as_slice()[idx] + self.noise.as_slice()[idx]
                + self.s.as_slice()[idx]
                - t.as_slice()[idx]
        })
    }

    /// `r = ‖𝒵 + 𝓔 + 𝓑 − 𝒯‖`.
    pub fn residual_norm(&self, t: &Tensor3) -> f64 {
        map_entries(t, |idx| {
            self.z.as_slice()[idx] + self.e.as_slice()[idx] + self.noise.as_slice()[idx]
                - t.as_slice()[idx]
        })
        .frobenius_norm()
    }
}

fn map_entries(like: &Tensor3, f: impl Fn(usize) -> f64 + Sync) -> Tensor3 {
    const CHUNK: usize = 8192;
    let mut out = Tensor3::zeros(like.dims());
    out.as_mut_slice()
        .par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(c, chunk)| {
            for (off, v) in chunk.iter_mut().enumerate() {
                *v = f(c * CHUNK + off);
            }
        });
    out
}

fn check_dims(st: &PcaState, t: &Tensor3) -> Result<()> {
    if st.dims() != t.dims() {
        return Err(Error::InvalidArgument(format!(
            "data tensor dims {:?} do not match state dims {:?}",
            t.dims(),
            st.dims()
        )));
    }
    Ok(())
}

/// `𝓔 = S( (ρ/(ρ+δ₄))(𝒯 + 𝒴/ρ − 𝓑 − 𝒵 − 𝓢) + (δ₄/(ρ+δ₄))𝓔, α/(ρ+δ₄) )`.
pub fn update_e(st: &PcaState, t: &Tensor3, alpha: f64, delta4: f64) -> Result<Tensor3> {
    check_dims(st, t)?;
    let rho = st.rho;
    let den = rho + delta4;
    let kappa = alpha / den;
    let (tt, y, b, z, s, e) = (
        t.as_slice(),
        st.y.as_slice(),
        st.noise.as_slice(),
        st.z.as_slice(),
        st.s.as_slice(),
        st.e.as_slice(),
    );
    let (w, inv_rho, we) = (rho / den, 1.0 / rho, delta4 / den);
    Ok(map_entries(t, |i| {
        let v = w * (tt[i] + y[i] * inv_rho - b[i] - z[i] - s[i]) + we * e[i];
        v.signum() * (v.abs() - kappa).max(0.0)
    }))
}

/// `𝒵 = (2⟦A,B,C⟧ + 2δ₅𝒵 + 𝒴 − ρ(𝓔 + 𝓑 + 𝓢 − 𝒯)) / (2 + 2δ₅ + ρ)`.
pub fn update_z(st: &PcaState, t: &Tensor3, delta5: f64) -> Result<Tensor3> {
    check_dims(st, t)?;
    let cp = cp_reconstruct(&st.factors);
    let rho = st.rho;
    let den = 2.0 + 2.0 * delta5 + rho;
    let (tt, y, b, z, s, e, m) = (
        t.as_slice(),
        st.y.as_slice(),
        st.noise.as_slice(),
        st.z.as_slice(),
        st.s.as_slice(),
        st.e.as_slice(),
        cp.as_slice(),
    );
    Ok(map_entries(t, |i| {
        (2.0 * m[i] + 2.0 * delta5 * z[i] + y[i] - rho * (e[i] + b[i] + s[i] - tt[i])) / den
    }))
}

/// `𝓑 = (𝒴 + δ₆𝓑 − ρ(𝓔 + 𝒵 + 𝓢 − 𝒯)) / (2α_N + δ₆ + ρ)`.
pub fn update_bnoise(st: &PcaState, t: &Tensor3, alpha_n: f64, delta6: f64) -> Result<Tensor3> {
    check_dims(st, t)?;
    let rho = st.rho;
    let den = 2.0 * alpha_n + delta6 + rho;
    let (tt, y, b, z, s, e) = (
        t.as_slice(),
        st.y.as_slice(),
        st.noise.as_slice(),
        st.z.as_slice(),
        st.s.as_slice(),
        st.e.as_slice(),
    );
    Ok(map_entries(t, |i| {
        (y[i] + delta6 * b[i] - rho * (e[i] + z[i] + s[i] - tt[i])) / den
    }))
}

/// Gradient step `𝓢 − τ(Λ + β𝓢 − 𝒴 + ρ(𝒵 + 𝓔 + 𝓑 + 𝓢 − 𝒯))` on the
/// augmented Lagrangian.
pub fn update_s(st: &PcaState, t: &Tensor3) -> Result<Tensor3> {
    check_dims(st, t)?;
    let (rho, beta, tau) = (st.rho, st.beta, st.tau);
    let (tt, y, b, z, s, e, l) = (
        t.as_slice(),
        st.y.as_slice(),
        st.noise.as_slice(),
        st.z.as_slice(),
        st.s.as_slice(),
        st.e.as_slice(),
        st.lambda.as_slice(),
    );
    Ok(map_entries(t, |i| {
        let r = z[i] + e[i] + b[i] + s[i] - tt[i];
        s[i] - tau * (l[i] + beta * s[i] - y[i] + rho * r)
    }))
}

/// `𝒴 − ρ(𝒵 + 𝓔 + 𝓑 + 𝓢 − 𝒯)`.
pub fn update_y(st: &PcaState, t: &Tensor3) -> Result<Tensor3> {
    check_dims(st, t)?;
    let rho = st.rho;
    let (tt, y, b, z, s, e) = (
        t.as_slice(),
        st.y.as_slice(),
        st.noise.as_slice(),
        st.z.as_slice(),
        st.s.as_slice(),
        st.e.as_slice(),
    );
    Ok(map_entries(t, |i| {
        y[i] - rho * (z[i] + e[i] + b[i] + s[i] - tt[i])
    }))
}

/// One full inner iteration: factors (Gauss–Seidel), 𝓔, 𝒵, 𝓑, 𝓢, 𝒴.
pub fn inner_step(st: &mut PcaState, t: &Tensor3, cfg: &PcaConfig) -> Result<()> {
    check_dims(st, t)?;
    for (idx, mode) in Mode::ALL.into_iter().enumerate() {
        let next = update_factor(&st.factors, &st.z, mode, cfg.delta[idx])?;
        *st.factors.factor_mut(mode) = next;
    }
    st.e = update_e(st, t, cfg.alpha, cfg.delta[3])?;
    st.z = update_z(st, t, cfg.delta[4])?;
    st.noise = update_bnoise(st, t, cfg.alpha_n, cfg.delta[5])?;
    if cfg.mode == PcaMode::TwoLevel {
        st.s = update_s(st, t)?;
    }
    st.y = update_y(st, t)?;
    Ok(())
}

/// `Λ ← Λ + β𝓢` (clamped when bounds are set), `β ← min(γβ, cap)`, `ρ ← cβ`, `τ ← 1/ρ`.
pub fn outer_update(st: &mut PcaState, cfg: &PcaConfig) {
    let beta = st.beta;
    let s = st.s.as_slice();
    st.lambda
        .as_mut_slice()
        .par_iter_mut()
        .zip(s.par_iter())
        .for_each(|(l, sv)| {
            *l += beta * sv;
            if let Some((lo, hi)) = cfg.lambda_bounds {
                *l = l.clamp(lo, hi);
            }
        });
    st.beta = (cfg.gamma * st.beta).min(cfg.beta_cap);
    st.rho = cfg.c * st.beta;
    st.tau = 1.0 / st.rho;
    st.k_out += 1;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaTraceRecord {
    pub k_inner: usize,
    pub k_out: usize,
    pub beta: f64,
    /// `‖𝒵 + 𝓔 + 𝓑 − 𝒯‖`.
    pub residual: f64,
    /// `‖𝒵 + 𝓔 + 𝓑 + 𝓢 − 𝒯‖`.
    pub full_residual: f64,
    /// `‖𝒵 − 𝒵_true‖/‖𝒵_true‖` when a ground truth is supplied.
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct PcaRun {
    pub state: PcaState,
    pub trace: Vec<PcaTraceRecord>,
}

impl PcaRun {
    pub fn final_residual(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.residual)
    }
}

pub fn relative_error(z: &Tensor3, truth: &Tensor3) -> f64 {
    let num: f64 = z
        .as_slice()
        .iter()
        .zip(truth.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    num.sqrt() / truth.frobenius_norm()
}

/// Runs `max_inner` inner iterations from random factors drawn with
/// `cfg.seed`.
pub fn run_pca(t: &Tensor3, cfg: &PcaConfig, truth: Option<&Tensor3>) -> Result<PcaRun> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let factors = CpFactors::random(t.dims(), cfg.rank, cfg.init_scale, &mut rng);
    run_pca_from(t, cfg, PcaState::new(factors, cfg), truth)
}

pub fn run_pca_from(
    t: &Tensor3,
    cfg: &PcaConfig,
    mut st: PcaState,
    truth: Option<&Tensor3>,
) -> Result<PcaRun> {
    cfg.validate()?;
    check_dims(&st, t)?;
    if let Some(tr) = truth {
        if tr.dims() != t.dims() {
            return Err(Error::InvalidArgument("ground truth dims differ from data".into()));
        }
    }
    let mut trace = Vec::with_capacity(cfg.max_inner);
    for k in 1..=cfg.max_inner {
        inner_step(&mut st, t, cfg)?;
        if !(st.z.is_finite() && st.e.is_finite() && st.y.is_finite() && st.s.is_finite()) {
            return Err(Error::NonFinite {
                context: "tensor PCA state".into(),
                iteration: k,
            });
        }
        let residual = st.residual_norm(t);
        let full_residual = st.full_residual(t).frobenius_norm();
        trace.push(PcaTraceRecord {
            k_inner: k,
            k_out: st.k_out,
            beta: st.beta,
            residual,
            full_residual,
            rel_error: truth.map(|tr| relative_error(&st.z, tr)),
        });
        if cfg.stop_tol.is_some_and(|tol| residual <= tol) {
            break;
        }
        // at k = 1 from zero duals the slack absorbs the whole residual and
        // the test holds trivially
        if cfg.mode == PcaMode::TwoLevel && k > 1 && full_residual < cfg.threshold(st.k_out) {
            outer_update(&mut st, cfg);
        }
    }
    Ok(PcaRun { state: st, trace })
}

/// Writes `k_inner,k_out,beta,r_k,full_residual,rel_error`.
pub fn write_pca_trace_csv<W: Write>(w: W, solver: &str, records: &[PcaTraceRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([
        "solver",
        "k_inner",
        "k_out",
        "beta",
        "r_k",
        "full_residual",
        "rel_error",
    ])?;
    for r in records {
        wr.write_record([
            solver.to_string(),
            r.k_inner.to_string(),
            r.k_out.to_string(),
            format!("{:?}", r.beta),
            format!("{:?}", r.residual),
            format!("{:?}", r.full_residual),
            format!("{:?}", r.rel_error.unwrap_or(f64::NAN)),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

/// Synthetic robust-PCA data: a low-rank tensor from standard normal
/// factors plus sparse outliers and small dense noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaDataConfig {
    pub dims: [usize; 3],
    pub rank_cp: usize,
    /// Fraction of entries hit by an outlier.
    pub outlier_fraction: f64,
    /// Outliers are uniform on `[−m, m]`.
    pub outlier_magnitude: f64,
    pub noise_std: f64,
}

impl Default for PcaDataConfig {
    fn default() -> Self {
        Self {
            dims: [30, 50, 70],
            rank_cp: 3,
            outlier_fraction: 0.1,
            outlier_magnitude: 5.0,
            noise_std: 0.01,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PcaData {
    pub observed: Tensor3,
    pub truth: Tensor3,
    pub factors: CpFactors,
}

pub fn gen_pca_data(cfg: &PcaDataConfig, seed: u64) -> Result<PcaData> {
    if cfg.rank_cp == 0 || cfg.dims.contains(&0) {
        return Err(Error::InvalidArgument("PCA data needs positive dims and rank".into()));
    }
    if !(0.0..=1.0).contains(&cfg.outlier_fraction) || !(cfg.noise_std >= 0.0) {
        return Err(Error::InvalidArgument(
            "outlier fraction must lie in [0, 1] and noise_std be nonnegative".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let factors = CpFactors::random(cfg.dims, cfg.rank_cp, 1.0, &mut rng);
    let truth = cp_reconstruct(&factors);
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut observed = truth.clone();
    for v in observed.as_mut_slice() {
        if rng.random::<f64>() < cfg.outlier_fraction {
            *v += rng.random_range(-cfg.outlier_magnitude..=cfg.outlier_magnitude);
        }
        *v += noise.sample(&mut rng);
    }
    Ok(PcaData {
        observed,
        truth,
        factors,
    })
}

/// `⌈0.2·R_CP⌉` added to the true rank.
pub fn default_rank_estimate(rank_cp: usize) -> usize {
    rank_cp + (rank_cp as f64 * 0.2).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e1(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, 1, |i, _| if i == 0 { 1.0 } else { 0.0 })
    }

    #[test]
    fn rank_one_indicator() {
        let f = CpFactors::new(e1(2), e1(3), e1(2)).unwrap();
        let t = cp_reconstruct(&f);
        assert_eq!(t.get(0, 0, 0), 1.0);
        assert_eq!(t.frobenius_norm(), 1.0);
    }

    #[test]
    fn zero_factor_gives_zero_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut f = CpFactors::random([2, 3, 4], 2, 1.0, &mut rng);
        f.b = DenseMatrix::zeros(3, 2);
        assert_eq!(cp_reconstruct(&f).frobenius_norm(), 0.0);
    }

    #[test]
    fn scalar_factor_update_by_hand() {
        let one = |v: f64| DenseMatrix::from_fn(1, 1, |_, _| v);
        let f = CpFactors::new(one(0.5), one(2.0), one(-1.5)).unwrap();
        let z = Tensor3::from_vec([1, 1, 1], vec![3.0]).unwrap();
        let d = 0.2;
        let a = update_factor(&f, &z, Mode::One, d).unwrap().get(0, 0);
        let want = (3.0 * (-1.5 * 2.0) + d / 2.0 * 0.5) / (2.25 * 4.0 + d / 2.0);
        assert!((a - want).abs() < 1e-15);
    }

    #[test]
    fn exact_model_is_a_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = CpFactors::random([3, 4, 5], 2, 1.0, &mut rng);
        let z = cp_reconstruct(&f);
        for mode in Mode::ALL {
            let next = update_factor(&f, &z, mode, 1e-10).unwrap();
            let old = f.factor(mode);
            for (a, b) in next.as_slice().iter().zip(old.as_slice()) {
                assert!((a - b).abs() < 1e-8, "{mode:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unshrunk_e_is_the_plain_residual() {
        let cfg = PcaConfig {
            rank: 1,
            ..PcaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = [2, 2, 2];
        let mut st = PcaState::new(CpFactors::random(dims, 1, 1.0, &mut rng), &cfg);
        let rnd = |rng: &mut ChaCha8Rng| Tensor3::from_fn(dims, |_, _, _| rng.random_range(-1.0..1.0));
        st.z = rnd(&mut rng);
        st.noise = rnd(&mut rng);
        st.s = rnd(&mut rng);
        st.y = rnd(&mut rng);
        let t = rnd(&mut rng);
        let e = update_e(&st, &t, 0.0, 0.0).unwrap();
        for i in 0..8 {
            let want = t.as_slice()[i] + st.y.as_slice()[i] / st.rho
                - st.noise.as_slice()[i]
                - st.z.as_slice()[i]
                - st.s.as_slice()[i];
            assert!((e.as_slice()[i] - want).abs() < 1e-15);
        }
        assert_eq!(update_e(&st, &t, 1e6, 0.0).unwrap().frobenius_norm(), 0.0);
    }

    #[test]
    fn zero_data_zero_init_is_fixed() {
        let cfg = PcaConfig {
            init_scale: 0.0,
            max_inner: 5,
            ..PcaConfig::default()
        };
        let t = Tensor3::zeros([2, 3, 2]);
        let run = run_pca(&t, &cfg, None).unwrap();
        assert!(run.trace.iter().all(|r| r.residual == 0.0));
        assert_eq!(run.state.z.frobenius_norm(), 0.0);
    }

    #[test]
    fn y_update_is_definitional() {
        let cfg = PcaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let dims = [2, 2, 3];
        let mut st = PcaState::new(CpFactors::random(dims, 4, 1.0, &mut rng), &cfg);
        st.z = Tensor3::from_fn(dims, |i, j, k| (i + j * k) as f64);
        let t = Tensor3::from_fn(dims, |i, _, _| i as f64);
        let y = update_y(&st, &t).unwrap();
        let r = st.full_residual(&t);
        for i in 0..t.len() {
            assert_eq!(y.as_slice()[i], st.y.as_slice()[i] - st.rho * r.as_slice()[i]);
        }
    }

    #[test]
    fn outer_update_restores_tau_rho() {
        let cfg = PcaConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut st = PcaState::new(CpFactors::random([2, 2, 2], 1, 1.0, &mut rng), &cfg);
        st.s = Tensor3::from_fn([2, 2, 2], |i, j, k| (i + j + k) as f64);
        outer_update(&mut st, &cfg);
        assert_eq!(st.beta, 3.0);
        assert_eq!(st.tau * st.rho, 1.0);
        assert_eq!(st.lambda.get(1, 1, 1), 6.0);
        assert_eq!(st.k_out, 2);
    }

    #[test]
    fn noiseless_rank_one_is_recovered() {
        let data = gen_pca_data(
            &PcaDataConfig {
                dims: [5, 6, 7],
                rank_cp: 1,
                outlier_fraction: 0.0,
                noise_std: 0.0,
                ..PcaDataConfig::default()
            },
            4,
        )
        .unwrap();
        let cfg = PcaConfig {
            rank: 1,
            alpha: 100.0,
            alpha_n: 100.0,
            max_inner: 500,
            ..PcaConfig::default()
        };
        let run = run_pca(&data.observed, &cfg, Some(&data.truth)).unwrap();
        let last = run.trace.last().unwrap();
        assert!(last.residual < 1e-5, "{last:?}");
        assert!(last.rel_error.unwrap() < 1e-3, "{last:?}");
    }

    #[test]
    fn csv_header() {
        let mut buf = Vec::new();
        let rec = PcaTraceRecord {
            k_inner: 1,
            k_out: 1,
            beta: 2.0,
            residual: 0.5,
            full_residual: 0.5,
            rel_error: None,
        };
        write_pca_trace_csv(&mut buf, "two_level", &[rec]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("solver,k_inner,k_out,beta,r_k"));
        assert!(s.contains("two_level,1,1,2.0,0.5,0.5,NaN"));
    }
}
