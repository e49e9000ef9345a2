//! Block-level oracles. Every built-in oracle is plain data so an instance
//! can be written to disk and rebuilt exactly; `Custom` variants accept
//! user code and are skipped by serialization.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, norm, DenseMatrix};

/// User-supplied smooth objective.
pub trait BlockObjective: Send + Sync {
    /// Returns `f(x)` and overwrites `grad` with `∇f(x)` when given.
    fn evaluate(&self, x: &[f64], grad: Option<&mut [f64]>) -> Result<f64, String>;
}

/// User-supplied Euclidean projection onto a closed set.
pub trait Projector: Send + Sync {
    fn project(&self, v: &mut [f64]);
}

/// Smooth block objective `f_i`.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Objective {
    Zero,
    /// `½ Σ diag_k x_k² + ½ xᵀ D x + linearᵀx + offset`, with `D` an
    /// optional symmetric row-major matrix.
    Quadratic {
        diag: Vec<f64>,
        linear: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dense: Option<Vec<f64>>,
        #[serde(default)]
        offset: f64,
    },
    /// Coulomb energy `Σ 1/‖p_a − p_b‖` over listed point pairs, points
    /// being consecutive chunks of `point_dim` coordinates.
    Coulomb {
        point_dim: usize,
        pairs: Vec<(usize, usize)>,
        min_distance: f64,
    },
    #[serde(skip)]
    Custom(Arc<dyn BlockObjective>),
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Zero => write!(f, "Zero"),
            Objective::Quadratic { diag, .. } => write!(f, "Quadratic(n={})", diag.len()),
            Objective::Coulomb { pairs, .. } => write!(f, "Coulomb(pairs={})", pairs.len()),
            Objective::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Objective {
    /// Separable quadratic `Σ ½ w_k (x_k − c_k)²`.
    pub fn separable_quadratic(weights: &[f64], centers: &[f64]) -> Self {
        let offset = weights
            .iter()
            .zip(centers)
            .map(|(w, c)| 0.5 * w * c * c)
            .sum();
        Objective::Quadratic {
            diag: weights.to_vec(),
            linear: weights.iter().zip(centers).map(|(w, c)| -w * c).collect(),
            dense: None,
            offset,
        }
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<(), String> {
        match self {
            Objective::Zero | Objective::Custom(_) => Ok(()),
            Objective::Quadratic {
                diag,
                linear,
                dense,
                ..
            } => {
                if diag.len() != dim || linear.len() != dim {
                    return Err(format!("quadratic terms sized for {} not {dim}", diag.len()));
                }
                if let Some(d) = dense {
                    if d.len() != dim * dim {
                        return Err("dense quadratic block has wrong size".into());
                    }
                }
                Ok(())
            }
            Objective::Coulomb {
                point_dim, pairs, ..
            } => {
                if *point_dim == 0 || dim % point_dim != 0 {
                    return Err(format!("dim {dim} not a multiple of point dim {point_dim}"));
                }
                let np = dim / point_dim;
                if pairs.iter().any(|&(a, b)| a >= np || b >= np || a == b) {
                    return Err("coulomb pair index out of range".into());
                }
                Ok(())
            }
        }
    }

    /// Adds `∇²f` into `out` at offset `off`. Returns false when the
    /// objective has no closed-form Hessian.
    pub fn add_hessian(&self, out: &mut DenseMatrix, off: usize) -> bool {
        match self {
            Objective::Zero => true,
            Objective::Quadratic { diag, dense, .. } => {
                let n = diag.len();
                for (k, d) in diag.iter().enumerate() {
                    let cur = out.get(off + k, off + k);
                    out.set(off + k, off + k, cur + d);
                }
                if let Some(m) = dense {
                    for i in 0..n {
                        for j in 0..n {
                            let cur = out.get(off + i, off + j);
                            out.set(off + i, off + j, cur + m[i * n + j]);
                        }
                    }
                }
                true
            }
            Objective::Coulomb { .. } | Objective::Custom(_) => false,
        }
    }

    /// Returns `f(x)`, writing `∇f(x)` into `grad` when provided.
    pub fn evaluate(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> Result<f64, String> {
        if let Some(g) = grad.as_deref_mut() {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
        match self {
            Objective::Zero => Ok(0.0),
            Objective::Quadratic {
                diag,
                linear,
                dense,
                offset,
            } => {
                let mut val = *offset;
                for k in 0..x.len() {
                    val += 0.5 * diag[k] * x[k] * x[k] + linear[k] * x[k];
                }
                if let Some(g) = grad.as_deref_mut() {
                    for k in 0..x.len() {
                        g[k] = diag[k] * x[k] + linear[k];
                    }
                }
                if let Some(d) = dense {
                    let n = x.len();
                    for i in 0..n {
                        let row = &d[i * n..(i + 1) * n];
                        let rx = dot(row, x);
                        val += 0.5 * x[i] * rx;
                        if let Some(g) = grad.as_deref_mut() {
                            g[i] += rx;
                        }
                    }
                }
                Ok(val)
            }
            Objective::Coulomb {
                point_dim,
                pairs,
                min_distance,
            } => {
                let d = *point_dim;
                let mut val = 0.0;
                for &(a, b) in pairs {
                    let (pa, pb) = (&x[a * d..(a + 1) * d], &x[b * d..(b + 1) * d]);
                    let mut r2 = 0.0;
                    for k in 0..d {
                        r2 += (pa[k] - pb[k]) * (pa[k] - pb[k]);
                    }
                    let r = r2.sqrt();
                    if !(r >= *min_distance) {
                        return Err(format!(
                            "points {a} and {b} are {r:.3e} apart (below {min_distance:.1e})"
                        ));
                    }
                    val += 1.0 / r;
                    if let Some(g) = grad.as_deref_mut() {
                        let s = 1.0 / (r2 * r);
                        for k in 0..d {
                            let diff = (x[a * d + k] - x[b * d + k]) * s;
                            g[a * d + k] -= diff;
                            g[b * d + k] += diff;
                        }
                    }
                }
                Ok(val)
            }
            Objective::Custom(obj) => obj.evaluate(x, grad),
        }
    }
}

/// Scalar equality constraint `h(x) = 0` of a manifold block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `Σ coef·x[idx] − rhs`.
    Linear { terms: Vec<(usize, f64)>, rhs: f64 },
    /// `x[u]² + x[v]² − x[p]·x[q]`, the surface of a rotated second-order cone.
    RotatedCone { u: usize, v: usize, p: usize, q: usize },
    /// `Σ x[idx]² − radius²`.
    Sphere { indices: Vec<usize>, radius: f64 },
}

impl Constraint {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Linear { terms, rhs } => {
                terms.iter().fold(0.0, |acc, &(i, c)| acc + c * x[i]) - rhs
            }
            Constraint::RotatedCone { u, v, p, q } => {
                x[*u] * x[*u] + x[*v] * x[*v] - x[*p] * x[*q]
            }
            Constraint::Sphere { indices, radius } => {
                indices.iter().fold(0.0, |acc, &i| acc + x[i] * x[i]) - radius * radius
            }
        }
    }

    /// `out ← out + w·∇h(x)`.
    pub fn add_scaled_gradient(&self, x: &[f64], w: f64, out: &mut [f64]) {
        match self {
            Constraint::Linear { terms, .. } => {
                for &(i, c) in terms {
                    out[i] += w * c;
                }
            }
            Constraint::RotatedCone { u, v, p, q } => {
                out[*u] += 2.0 * w * x[*u];
                out[*v] += 2.0 * w * x[*v];
                out[*p] -= w * x[*q];
                out[*q] -= w * x[*p];
            }
            Constraint::Sphere { indices, .. } => {
                for &i in indices {
                    out[i] += 2.0 * w * x[i];
                }
            }
        }
    }

    /// `out[off.., off..] += w·∇²h`; the Hessians are constant.
    pub fn add_scaled_hessian(&self, w: f64, out: &mut DenseMatrix, off: usize) {
        let mut bump = |i: usize, j: usize, v: f64| {
            let cur = out.get(off + i, off + j);
            out.set(off + i, off + j, cur + v);
        };
        match self {
            Constraint::Linear { .. } => {}
            Constraint::RotatedCone { u, v, p, q } => {
                bump(*u, *u, 2.0 * w);
                bump(*v, *v, 2.0 * w);
                bump(*p, *q, -w);
                bump(*q, *p, -w);
            }
            Constraint::Sphere { indices, .. } => {
                for &i in indices {
                    bump(i, i, 2.0 * w);
                }
            }
        }
    }

    fn max_index(&self) -> usize {
        match self {
            Constraint::Linear { terms, .. } => terms.iter().map(|t| t.0).max().unwrap_or(0),
            Constraint::RotatedCone { u, v, p, q } => *u.max(v).max(p).max(q),
            Constraint::Sphere { indices, .. } => indices.iter().copied().max().unwrap_or(0),
        }
    }
}

/// Local constraint set `X_i` of a block.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SetKind {
    WholeSpace,
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Every consecutive chunk of `point_dim` coordinates lies on the sphere
    /// of the given radius.
    Spheres {
        point_dim: usize,
        radius: f64,
    },
    /// `{x ∈ base : h(x) = 0}` for sets without a cheap projection. `base`
    /// must itself be a projection set.
    Manifold {
        constraints: Vec<Constraint>,
        base: Box<SetKind>,
    },
    #[serde(skip)]
    Custom(Arc<dyn Projector>),
}

impl fmt::Debug for SetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetKind::WholeSpace => write!(f, "WholeSpace"),
            SetKind::Box { lower, .. } => write!(f, "Box(n={})", lower.len()),
            SetKind::Spheres { point_dim, radius } => {
                write!(f, "Spheres(d={point_dim}, r={radius})")
            }
            SetKind::Manifold { constraints, base } => {
                write!(f, "Manifold(h={}, base={:?})", constraints.len(), base)
            }
            SetKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl SetKind {
    pub fn is_manifold(&self) -> bool {
        matches!(self, SetKind::Manifold { .. })
    }

    pub(crate) fn check_dim(&self, dim: usize) -> Result<(), String> {
        match self {
            SetKind::WholeSpace | SetKind::Custom(_) => Ok(()),
            SetKind::Box { lower, upper } => {
                if lower.len() != dim || upper.len() != dim {
                    return Err(format!("box bounds sized {} not {dim}", lower.len()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err("box has lower > upper".into());
                }
                Ok(())
            }
            SetKind::Spheres { point_dim, radius } => {
                if *point_dim == 0 || dim % point_dim != 0 {
                    return Err(format!("dim {dim} not a multiple of point dim {point_dim}"));
                }
                if !(*radius > 0.0) {
                    return Err("sphere radius must be positive".into());
                }
                Ok(())
            }
            SetKind::Manifold { constraints, base } => {
                if base.is_manifold() {
                    return Err("manifold base must be a projection set".into());
                }
                if constraints.iter().any(|c| c.max_index() >= dim) {
                    return Err("constraint index out of range".into());
                }
                base.check_dim(dim)
            }
        }
    }

    /// Euclidean projection onto the set (onto `base` for manifolds).
    /// Projecting a sphere center returns the first basis direction.
    pub fn project(&self, v: &mut [f64]) {
        match self {
            SetKind::WholeSpace => {}
            SetKind::Box { lower, upper } => {
                for ((x, l), u) in v.iter_mut().zip(lower).zip(upper) {
                    *x = x.clamp(*l, *u);
                }
            }
            SetKind::Spheres { point_dim, radius } => {
                for chunk in v.chunks_mut(*point_dim) {
                    let n = norm(chunk);
                    if n > 0.0 {
                        chunk.iter_mut().for_each(|x| *x = *x / n * radius);
                    } else {
                        chunk.iter_mut().for_each(|x| *x = 0.0);
                        chunk[0] = *radius;
                    }
                }
            }
            SetKind::Manifold { base, .. } => base.project(v),
            SetKind::Custom(p) => p.project(v),
        }
    }

    /// Width of the coordinate chunks the projection couples; a diagonal
    /// metric constant on such chunks leaves the projection unchanged.
    pub(crate) fn metric_chunk(&self, dim: usize) -> usize {
        match self {
            SetKind::WholeSpace | SetKind::Box { .. } => 1,
            SetKind::Spheres { point_dim, .. } => *point_dim,
            SetKind::Manifold { base, .. } => base.metric_chunk(dim),
            SetKind::Custom(_) => dim.max(1),
        }
    }

    /// Coordinate bounds when the projection is a box (possibly unbounded).
    pub fn box_bounds(&self, dim: usize) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            SetKind::WholeSpace => Some((vec![f64::NEG_INFINITY; dim], vec![f64::INFINITY; dim])),
            SetKind::Box { lower, upper } => Some((lower.clone(), upper.clone())),
            SetKind::Manifold { base, .. } => base.box_bounds(dim),
            SetKind::Spheres { .. } | SetKind::Custom(_) => None,
        }
    }

    pub fn constraints(&self) -> &[Constraint] {
        match self {
            SetKind::Manifold { constraints, .. } => constraints,
            _ => &[],
        }
    }

    /// Distance-like violation: `‖x − P(x)‖` plus `‖h(x)‖` for manifolds.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut p = x.to_vec();
        self.project(&mut p);
        let proj_gap = crate::linalg::dist(x, &p);
        let h: f64 = self
            .constraints()
            .iter()
            .map(|c| c.value(x).powi(2))
            .sum::<f64>()
            .sqrt();
        proj_gap + h
    }
}

/// Global-copy set `X̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GlobalSet {
    WholeSpace { dim: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl GlobalSet {
    pub fn uniform_box(dim: usize, lower: f64, upper: f64) -> Self {
        GlobalSet::Box {
            lower: vec![lower; dim],
            upper: vec![upper; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GlobalSet::WholeSpace { dim } => *dim,
            GlobalSet::Box { lower, .. } => lower.len(),
        }
    }

    pub fn project(&self, v: &mut [f64]) {
        if let GlobalSet::Box { lower, upper } = self {
            for ((x, l), u) in v.iter_mut().zip(lower).zip(upper) {
                *x = x.clamp(*l, *u);
            }
        }
    }

    #[inline]
    pub fn clamp_coord(&self, j: usize, v: f64) -> f64 {
        match self {
            GlobalSet::WholeSpace { .. } => v,
            GlobalSet::Box { lower, upper } => v.clamp(lower[j], upper[j]),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        match self {
            GlobalSet::WholeSpace { .. } => true,
            GlobalSet::Box { lower, upper } => v
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sphere_projection_ties_to_first_axis() {
        let s = SetKind::Spheres {
            point_dim: 3,
            radius: 1.0,
        };
        let mut v = vec![0.0, 0.0, 0.0, 0.0, 3.0, 4.0];
        s.project(&mut v);
        assert_eq!(v, vec![1.0, 0.0, 0.0, 0.0, 0.6, 0.8]);
    }

    #[test]
    fn coulomb_gradient_and_singularity() {
        let obj = Objective::Coulomb {
            point_dim: 3,
            pairs: vec![(0, 1)],
            min_distance: 1e-8,
        };
        let x = [1.0, 0.0, 0.0, -1.0, 0.0, 0.0];
        let mut g = [0.0; 6];
        let v = obj.evaluate(&x, Some(&mut g)).unwrap();
        assert_eq!(v, 0.5);
        // d/dx0 of 1/(x0 - x3) at distance 2 is -1/4
        assert!((g[0] + 0.25).abs() < 1e-15);
        assert!((g[3] - 0.25).abs() < 1e-15);
        let y = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
        assert!(obj.evaluate(&y, None).is_err());
    }

    #[test]
    fn two_quadratic_blocks_by_hand() {
        let f = Objective::separable_quadratic(&[2.0, 2.0], &[0.0, 0.0]);
        // ‖x‖² for x = (1, 0) is 1
        assert_eq!(f.evaluate(&[1.0, 0.0], None).unwrap(), 1.0);
    }

    #[test]
    fn cone_constraint_gradient() {
        let c = Constraint::RotatedCone {
            u: 0,
            v: 1,
            p: 2,
            q: 3,
        };
        let x = [0.5, 0.5, 1.0, 0.5];
        assert!((c.value(&x) - 0.0).abs() < 1e-15);
        let mut g = [0.0; 4];
        c.add_scaled_gradient(&x, 1.0, &mut g);
        assert_eq!(g, [1.0, 1.0, -0.5, -1.0]);
    }

    #[test]
    fn serde_keeps_builtin_oracles() {
        let s = SetKind::Manifold {
            constraints: vec![Constraint::Linear {
                terms: vec![(0, 1.0), (1, -1.0)],
                rhs: 0.5,
            }],
            base: Box::new(SetKind::Box {
                lower: vec![-1.0, -1.0],
                upper: vec![1.0, 1.0],
            }),
        };
        let json = serde_json::to_string(&s).unwrap();
        let back: SetKind = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}
