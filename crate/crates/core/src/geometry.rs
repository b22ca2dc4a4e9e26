//! Convex polytope action sets.
//!
//! Optimal actions of a linear objective over a compact polytope sit on its
//! extreme points, so learners only ever plan over the vertex list `V`. The
//! continuous interior is still needed when playing: the state-recovery scheme
//! perturbs the planned vertex by a small random displacement so that distinct
//! coefficient vectors give distinct rewards almost surely.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{dot, l2_distance, lex_cmp, linf_distance, Scalar};

/// Vertex enumeration of a hypercube is refused above this dimension.
pub const MAX_ENUMERABLE_DIM: usize = 25;
/// Explicit vertex lists up to this size are checked for extremality.
pub const MAX_VALIDATED_VERTICES: usize = 64;
/// Rejection attempts before falling back to the interior-point construction.
pub const REJECTION_ATTEMPTS: usize = 64;

const DUPLICATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum Representation<T> {
    ExplicitVertices(Vec<Vec<T>>),
    Hypercube { lower: Vec<T>, upper: Vec<T> },
}

/// Compact convex action set in vertex representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope<T> {
    dim: usize,
    repr: Representation<T>,
    vertices: Option<Vec<Vec<T>>>,
}

impl<T: Scalar> Polytope<T> {
    pub fn hypercube(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::config(format!(
                "hypercube bounds have different lengths ({} vs {})",
                lower.len(),
                upper.len()
            )));
        }
        if lower.is_empty() {
            return Err(Error::config("hypercube must have dimension >= 1"));
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::config(format!(
                    "hypercube coordinate {i}: need finite lower < upper, got [{l}, {u}]"
                )));
            }
        }
        let dim = lower.len();
        let vertices = (dim <= MAX_ENUMERABLE_DIM).then(|| hypercube_corners(&lower, &upper));
        Ok(Self {
            dim,
            repr: Representation::Hypercube { lower, upper },
            vertices,
        })
    }

    /// The unit cube `[0,1]^dim`.
    pub fn unit_cube(dim: usize) -> Result<Self> {
        Self::hypercube(vec![T::zero(); dim], vec![T::one(); dim])
    }

    /// Polytope given by its extreme points. The caller declares the points
    /// extreme; this is verified by LP when there are at most
    /// [`MAX_VALIDATED_VERTICES`] of them.
    pub fn from_vertices(points: Vec<Vec<T>>) -> Result<Self> {
        let first = points
            .first()
            .ok_or_else(|| Error::config("vertex list must be non-empty"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::config("vertices must have dimension >= 1"));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::config(format!(
                    "vertex {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(Error::config(format!(
                    "vertex {i} has a non-finite coordinate"
                )));
            }
        }
        let tol = T::lit(DUPLICATE_TOL);
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if linf_distance(&points[i], &points[j]) <= tol {
                    return Err(Error::config(format!("vertices {i} and {j} coincide")));
                }
            }
        }
        if points.len() <= MAX_VALIDATED_VERTICES && points.len() > 1 {
            let as_f64: Vec<Vec<f64>> = points
                .iter()
                .map(|p| p.iter().map(|x| x.as_f64()).collect())
                .collect();
            for k in 0..as_f64.len() {
                let others: Vec<Vec<f64>> = as_f64
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != k)
                    .map(|(_, p)| p.clone())
                    .collect();
                if in_convex_hull(&others, &as_f64[k], DUPLICATE_TOL) {
                    return Err(Error::config(format!(
                        "vertex {k} is a convex combination of the other vertices"
                    )));
                }
            }
        }
        Ok(Self {
            dim,
            vertices: Some(points.clone()),
            repr: Representation::ExplicitVertices(points),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn representation(&self) -> &Representation<T> {
        &self.repr
    }

    /// Extreme points in a deterministic order: lexicographic corners for a
    /// hypercube, the stored order for an explicit list.
    pub fn vertices(&self) -> Result<&[Vec<T>]> {
        self.vertices.as_deref().ok_or_else(|| {
            Error::contract(format!(
                "hypercube of dimension {} has 2^{} vertices; use argmax_linear instead",
                self.dim, self.dim
            ))
        })
    }

    /// Maximizes `<v, c>` over the polytope. Returns the lexicographically
    /// smallest maximizing vertex.
    pub fn argmax_linear(&self, c: &[T]) -> (Vec<T>, T) {
        assert_eq!(c.len(), self.dim, "objective dimension mismatch");
        match &self.repr {
            Representation::Hypercube { lower, upper } => {
                let v: Vec<T> = c
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(&ci, (&l, &u))| if ci > T::zero() { u } else { l })
                    .collect();
                let value = dot(&v, c);
                (v, value)
            }
            Representation::ExplicitVertices(points) => {
                let mut best = &points[0];
                let mut best_value = dot(best, c);
                for p in &points[1..] {
                    let value = dot(p, c);
                    if value > best_value
                        || (value == best_value && lex_cmp(p, best) == std::cmp::Ordering::Less)
                    {
                        best = p;
                        best_value = value;
                    }
                }
                (best.clone(), best_value)
            }
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.dim {
            return false;
        }
        match &self.repr {
            Representation::Hypercube { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&xi, (&l, &u))| xi >= l - tol && xi <= u + tol),
            Representation::ExplicitVertices(points) => {
                let pts: Vec<Vec<f64>> = points
                    .iter()
                    .map(|p| p.iter().map(|v| v.as_f64()).collect())
                    .collect();
                let xf: Vec<f64> = x.iter().map(|v| v.as_f64()).collect();
                in_convex_hull(&pts, &xf, tol.as_f64())
            }
        }
    }

    /// Draws a point of `B(a_star, radius) ∩ A` from a distribution that is
    /// absolutely continuous w.r.t. Lebesgue measure.
    pub fn sample_perturbed_action<R: Rng + ?Sized>(
        &self,
        a_star: &[T],
        radius: T,
        rng: &mut R,
    ) -> Vec<T> {
        self.sample_perturbed_action_traced(a_star, radius, rng)
            .point
    }

    pub fn sample_perturbed_action_traced<R: Rng + ?Sized>(
        &self,
        a_star: &[T],
        radius: T,
        rng: &mut R,
    ) -> PerturbedSample<T> {
        debug_assert!(radius > T::zero());
        let zero_tol = T::zero();
        for attempt in 1..=REJECTION_ATTEMPTS {
            let candidate = sample_in_ball(a_star, radius, rng);
            if self.contains(&candidate, zero_tol) {
                return PerturbedSample {
                    point: candidate,
                    attempts: attempt,
                    used_fallback: false,
                };
            }
        }
        let q = self.sample_interior(rng);
        let dist = l2_distance(&q, a_star);
        let cap = if dist > T::zero() {
            T::one().min(radius / dist)
        } else {
            T::one()
        };
        // (0, cap], never exactly zero
        let u: f64 = 1.0 - rng.random::<f64>();
        let lambda = cap * T::lit(u);
        let point = a_star
            .iter()
            .zip(&q)
            .map(|(&a, &qi)| a + lambda * (qi - a))
            .collect();
        PerturbedSample {
            point,
            attempts: REJECTION_ATTEMPTS,
            used_fallback: true,
        }
    }

    /// A random point in the relative interior with a density.
    fn sample_interior<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match &self.repr {
            Representation::Hypercube { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| {
                    let w: f64 = 1.0 - rng.random::<f64>();
                    l + (u - l) * T::lit(w)
                })
                .collect(),
            Representation::ExplicitVertices(points) => {
                let weights: Vec<f64> = points
                    .iter()
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = weights.iter().sum();
                let mut q = vec![T::zero(); self.dim];
                for (p, w) in points.iter().zip(&weights) {
                    let w = T::lit(w / total);
                    for (qi, &pi) in q.iter_mut().zip(p) {
                        *qi = *qi + w * pi;
                    }
                }
                q
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PerturbedSample<T> {
    pub point: Vec<T>,
    /// Rejection attempts consumed (including the accepted one).
    pub attempts: usize,
    pub used_fallback: bool,
}

fn hypercube_corners<T: Scalar>(lower: &[T], upper: &[T]) -> Vec<Vec<T>> {
    let n = lower.len();
    (0..1usize << n)
        .map(|mask| {
            (0..n)
                .map(|i| {
                    // first coordinate is the most significant bit
                    if mask >> (n - 1 - i) & 1 == 1 {
                        upper[i]
                    } else {
                        lower[i]
                    }
                })
                .collect()
        })
        .collect()
}

fn sample_in_ball<T: Scalar, R: Rng + ?Sized>(center: &[T], radius: T, rng: &mut R) -> Vec<T> {
    let n = center.len();
    let dir: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    let u: f64 = rng.random();
    let r = radius.as_f64() * u.powf(1.0 / n as f64) / norm.max(f64::MIN_POSITIVE);
    center
        .iter()
        .zip(&dir)
        .map(|(&c, &d)| c + T::lit(d * r))
        .collect()
}

/// LP feasibility: is `x` within `tol` (per coordinate) of a convex
/// combination of `points`?
pub(crate) fn in_convex_hull(points: &[Vec<f64>], x: &[f64], tol: f64) -> bool {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let lambdas: Vec<_> = points
        .iter()
        .map(|_| problem.add_var(0.0, (0.0, f64::INFINITY)))
        .collect();
    let sum: Vec<_> = lambdas.iter().map(|&v| (v, 1.0)).collect();
    problem.add_constraint(sum.as_slice(), ComparisonOp::Eq, 1.0);
    for (j, &xj) in x.iter().enumerate() {
        let row: Vec<_> = lambdas
            .iter()
            .zip(points)
            .map(|(&v, p)| (v, p[j]))
            .collect();
        problem.add_constraint(row.as_slice(), ComparisonOp::Ge, xj - tol);
        problem.add_constraint(row.as_slice(), ComparisonOp::Le, xj + tol);
    }
    problem.solve().is_ok()
}

/// Shrinking perturbation radius `epsilon_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSchedule<T> {
    pub epsilon: T,
    pub alpha_eps: T,
    pub gamma: T,
    /// Largest L1 norm over every coefficient vector of the model.
    pub theta_norm_max: T,
}

impl<T: Scalar> PerturbationSchedule<T> {
    pub fn new(epsilon: T, alpha_eps: T, gamma: T, theta_norm_max: T) -> Result<Self> {
        if !(epsilon > T::zero()) {
            return Err(Error::config(format!("epsilon must be > 0, got {epsilon}")));
        }
        if !(alpha_eps > T::one()) {
            return Err(Error::config(format!(
                "alpha_eps must be > 1, got {alpha_eps}"
            )));
        }
        if !(gamma > T::zero()) {
            return Err(Error::config(format!("gamma must be > 0, got {gamma}")));
        }
        // an all-zero model gives a norm of 0; any positive scale works then
        let theta_norm_max = if theta_norm_max > T::zero() {
            theta_norm_max
        } else {
            T::one()
        };
        Ok(Self {
            epsilon,
            alpha_eps,
            gamma,
            theta_norm_max,
        })
    }

    /// `epsilon / (gamma * t^alpha_eps * theta_norm_max)`, for `t >= 1`.
    pub fn epsilon_at(&self, t: u64) -> Result<T> {
        if t < 1 {
            return Err(Error::contract("epsilon_at requires t >= 1"));
        }
        Ok(self.radius(t))
    }

    #[inline]
    pub(crate) fn radius(&self, t: u64) -> T {
        let t = T::lit(t.max(1) as f64);
        self.epsilon / (self.gamma * t.powf(self.alpha_eps) * self.theta_norm_max)
    }
}
