//! Exact quantities of a fully known model: stationary law, optimal policy,
//! average reward, problem constants and regret accounting.

use crate::env::{ArmId, EnvironmentSpec, ThetaSet, TransitionMatrix};
use crate::error::{Error, Result};
use crate::scalar::{dot, lex_cmp, Scalar};

/// Relative tolerance for collecting maximizers into a tie set.
pub const TIE_TOL: f64 = 1e-12;
/// Bisection steps used for the gap.
pub const DELTA_BISECTION_STEPS: usize = 60;
/// Largest instance for which the gap is computed.
pub const DELTA_MAX_STATES: usize = 4;
pub const DELTA_MAX_ARMS: usize = 4;
pub const DELTA_MAX_SET: usize = 3;

/// Dense Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|r| r.len() != n) {
        return Err(Error::contract("linear system is not square"));
    }
    let scale = a
        .iter()
        .flatten()
        .fold(T::zero(), |m, x| m.max(x.abs()))
        .max(T::min_positive_value());
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[i][col]
                    .abs()
                    .partial_cmp(&a[j][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if a[pivot][col].abs() <= scale * T::epsilon() * T::from_usize_lossy(n) {
            return Err(Error::Model("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                a[row][k] = a[row][k] - f * a[col][k];
            }
            b[row] = b[row] - f * b[col];
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc = acc - a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x)
}

/// Solves `mu P = mu`, `sum mu = 1` with the last balance equation replaced
/// by the normalization.
pub fn stationary_distribution<T: Scalar>(p: &TransitionMatrix<T>) -> Result<Vec<T>> {
    let n = p.num_states();
    let rows = p.rows();
    let mut a = vec![vec![T::zero(); n]; n];
    for (i, a_row) in a.iter_mut().enumerate().take(n - 1) {
        for (j, entry) in a_row.iter_mut().enumerate() {
            *entry = rows[j][i] - if i == j { T::one() } else { T::zero() };
        }
    }
    a[n - 1] = vec![T::one(); n];
    let mut rhs = vec![T::zero(); n];
    rhs[n - 1] = T::one();
    let mu = solve_linear(a, rhs)
        .map_err(|_| Error::Model("transition matrix is not irreducible".into()))?;
    if mu.iter().any(|&m| m < -T::epsilon().sqrt()) {
        return Err(Error::Model("transition matrix is not irreducible".into()));
    }
    Ok(mu.into_iter().map(|m| m.max(T::zero())).collect())
}

/// `max_i |(mu P)_i - mu_i|`.
pub fn fixed_point_residual<T: Scalar>(p: &TransitionMatrix<T>, mu: &[T]) -> T {
    let n = p.num_states();
    (0..n)
        .map(|j| {
            let pj: T = (0..n).map(|i| mu[i] * p.rows()[i][j]).sum();
            (pj - mu[j]).abs()
        })
        .fold(T::zero(), T::max)
}

/// `E_{s_next ~ row} E_{theta ~ P_Theta(arm, s_next)} theta`.
pub fn mean_theta<T: Scalar>(row: &[T], arm_sets: &[ThetaSet<T>], dim: usize) -> Vec<T> {
    let mut c = vec![T::zero(); dim];
    for (&p, set) in row.iter().zip(arm_sets) {
        for (th, &q) in set.vectors.iter().zip(&set.probs) {
            for (ci, &x) in c.iter_mut().zip(th) {
                *ci = *ci + p * q * x;
            }
        }
    }
    c
}

/// One-step value of playing `(arm, action)` after `s_prev`.
pub fn one_step_value<T: Scalar>(
    spec: &EnvironmentSpec<T>,
    s_prev: usize,
    arm: ArmId,
    action: &[T],
) -> T {
    let row = spec.transition().rows()[s_prev].as_slice();
    dot(action, &mean_theta(row, spec.thetas().arm(arm), spec.dim()))
}

/// A policy mapping the previous state to an arm and an action.
pub type Policy<T> = [(ArmId, Vec<T>)];

/// Long-run average reward of a stationary previous-state policy.
pub fn average_reward<T: Scalar>(spec: &EnvironmentSpec<T>, policy: &Policy<T>) -> Result<T> {
    if policy.len() != spec.num_states() {
        return Err(Error::contract(format!(
            "policy has {} entries, chain has {} states",
            policy.len(),
            spec.num_states()
        )));
    }
    let mu = stationary_distribution(spec.transition())?;
    Ok(policy
        .iter()
        .enumerate()
        .map(|(s, (arm, a))| mu[s] * one_step_value(spec, s, *arm, a))
        .sum())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyChoice<T> {
    pub arm: ArmId,
    /// Index into the vertex list, when the polytope is enumerable.
    pub vertex_index: Option<usize>,
    pub action: Vec<T>,
    pub value: T,
    /// Every `(arm, vertex index)` within the tie tolerance of the maximum.
    pub ties: Vec<(ArmId, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimalPolicy<T> {
    pub choices: Vec<PolicyChoice<T>>,
}

impl<T: Scalar> OptimalPolicy<T> {
    pub fn as_policy(&self) -> Vec<(ArmId, Vec<T>)> {
        self.choices
            .iter()
            .map(|c| (c.arm, c.action.clone()))
            .collect()
    }

    pub fn choice(&self, s_prev: usize) -> &PolicyChoice<T> {
        &self.choices[s_prev]
    }
}

fn tie_tol<T: Scalar>(best: T) -> T {
    T::lit(TIE_TOL) * best.abs().max(T::one())
}

/// Per previous state, the best arm and vertex by exhaustive scan; the
/// selected pair is the smallest arm and then the lexicographically smallest
/// vertex among the maximizers. Hypercubes too large to enumerate fall back
/// to the per-arm linear argmax, with a singleton tie set.
pub fn optimal_policy<T: Scalar>(spec: &EnvironmentSpec<T>) -> Result<OptimalPolicy<T>> {
    let rows = spec.transition().rows();
    let mut choices = Vec::with_capacity(rows.len());
    match spec.actions().vertices() {
        Ok(vertices) => {
            for row in rows {
                let mut values = Vec::with_capacity(spec.num_arms() * vertices.len());
                for b in 0..spec.num_arms() {
                    let c = mean_theta(row, spec.thetas().arm(ArmId(b)), spec.dim());
                    for (v, x) in vertices.iter().enumerate() {
                        values.push((b, v, dot(x, &c)));
                    }
                }
                let best = values.iter().fold(T::neg_infinity(), |m, x| m.max(x.2));
                let tol = tie_tol(best);
                let ties: Vec<(ArmId, usize)> = values
                    .iter()
                    .filter(|x| best - x.2 <= tol)
                    .map(|x| (ArmId(x.0), x.1))
                    .collect();
                let &(arm, vi) = ties
                    .iter()
                    .min_by(|a, b| {
                        a.0.cmp(&b.0)
                            .then_with(|| lex_cmp(&vertices[a.1], &vertices[b.1]))
                    })
                    .expect("nonempty tie set");
                let value = values[arm.0 * vertices.len() + vi].2;
                choices.push(PolicyChoice {
                    arm,
                    vertex_index: Some(vi),
                    action: vertices[vi].clone(),
                    value,
                    ties,
                });
            }
        }
        Err(_) => {
            for row in rows {
                let mut best: Option<PolicyChoice<T>> = None;
                for b in 0..spec.num_arms() {
                    let c = mean_theta(row, spec.thetas().arm(ArmId(b)), spec.dim());
                    let (action, value) = spec.actions().argmax_linear(&c);
                    if best.as_ref().is_none_or(|x| value > x.value) {
                        best = Some(PolicyChoice {
                            arm: ArmId(b),
                            vertex_index: None,
                            action,
                            value,
                            ties: vec![],
                        });
                    }
                }
                choices.push(best.expect("at least one arm"));
            }
        }
    }
    Ok(OptimalPolicy { choices })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConstants<T> {
    /// Largest expected first-passage time between two distinct states.
    pub t_m: T,
    /// Inverse of the smallest positive transition probability.
    pub t_s: T,
    /// Range of attainable rewards over vertices and coefficient vectors.
    pub r_max: T,
    pub c_theta_max: usize,
    /// Largest probability perturbation that keeps every optimal set; `None`
    /// when the instance is too large.
    pub delta: Option<T>,
}

/// `h[i][j]`: expected number of steps to first reach `j` from `i` (zero on
/// the diagonal).
pub fn hitting_times<T: Scalar>(p: &TransitionMatrix<T>) -> Result<Vec<Vec<T>>> {
    let n = p.num_states();
    let rows = p.rows();
    let mut h = vec![vec![T::zero(); n]; n];
    for target in 0..n {
        let others: Vec<usize> = (0..n).filter(|&i| i != target).collect();
        if others.is_empty() {
            continue;
        }
        let a: Vec<Vec<T>> = others
            .iter()
            .map(|&i| {
                others
                    .iter()
                    .map(|&j| if i == j { T::one() } else { T::zero() } - rows[i][j])
                    .collect()
            })
            .collect();
        let x = solve_linear(a, vec![T::one(); others.len()])?;
        for (k, &i) in others.iter().enumerate() {
            h[i][target] = x[k];
        }
    }
    Ok(h)
}

pub fn compute_constants<T: Scalar>(spec: &EnvironmentSpec<T>) -> Result<ModelConstants<T>> {
    let h = hitting_times(spec.transition())?;
    let t_m = h.iter().flatten().fold(T::one(), |m, &x| m.max(x));
    let min_pos = spec
        .transition()
        .rows()
        .iter()
        .flatten()
        .filter(|&&x| x > T::zero())
        .fold(T::infinity(), |m, &x| m.min(x));
    let t_s = T::one() / min_pos;
    let mut hi = T::neg_infinity();
    let mut lo = T::infinity();
    for th in spec.thetas().all_vectors() {
        hi = hi.max(spec.actions().argmax_linear(th).1);
        let neg: Vec<T> = th.iter().map(|&x| -x).collect();
        lo = lo.min(-spec.actions().argmax_linear(&neg).1);
    }
    Ok(ModelConstants {
        t_m,
        t_s,
        r_max: hi - lo,
        c_theta_max: spec.thetas().max_set_size(),
        delta: gap(spec)?,
    })
}

/// Perturbs every entry by `sign * delta`, clamps to `[0, 1]` and
/// renormalizes. `None` when all mass is removed.
fn corner<T: Scalar>(p: &[T], signs: usize, delta: T) -> Option<Vec<T>> {
    let q: Vec<T> = p
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let d = if signs >> i & 1 == 1 { delta } else { -delta };
            (x + d).max(T::zero()).min(T::one())
        })
        .collect();
    let total: T = q.iter().copied().sum();
    (total > T::zero()).then(|| q.into_iter().map(|x| x / total).collect())
}

fn corners<T: Scalar>(p: &[T], delta: T) -> Vec<Vec<T>> {
    (0..1usize << p.len())
        .filter_map(|s| corner(p, s, delta))
        .collect()
}

/// The gap: bisection on `delta` for the property that every corner
/// perturbation of the transition row and of every coefficient distribution
/// leaves the optimal set of each previous state unchanged.
pub fn gap<T: Scalar>(spec: &EnvironmentSpec<T>) -> Result<Option<T>> {
    let n = spec.num_states();
    if n > DELTA_MAX_STATES
        || spec.num_arms() > DELTA_MAX_ARMS
        || spec.thetas().max_set_size() > DELTA_MAX_SET
    {
        return Ok(None);
    }
    let Ok(vertices) = spec.actions().vertices() else {
        return Ok(None);
    };
    let policy = optimal_policy(spec)?;
    let preserved = |delta: T| -> bool {
        (0..n).all(|s| argmax_preserved(spec, vertices, &policy.choices[s].ties, s, delta))
    };
    if preserved(T::one()) {
        return Ok(Some(T::one()));
    }
    let (mut lo, mut hi) = (T::zero(), T::one());
    for _ in 0..DELTA_BISECTION_STEPS {
        let mid = (lo + hi) * T::lit(0.5);
        if preserved(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Whether the tie set of `s_prev` is exactly the optimal set under every
/// corner perturbation of size `delta`.
///
/// Arms perturb independently and, given the transition row, so does every
/// arrival state, so extreme values over all perturbation combinations
/// decompose into sums of per-arrival-state extremes weighted by the row.
pub fn argmax_preserved<T: Scalar>(
    spec: &EnvironmentSpec<T>,
    vertices: &[Vec<T>],
    ties: &[(ArmId, usize)],
    s_prev: usize,
    delta: T,
) -> bool {
    let nv = vertices.len();
    let n = spec.num_states();
    // expectations[b][s_next][corner][v]
    let expectations: Vec<Vec<Vec<Vec<T>>>> = (0..spec.num_arms())
        .map(|b| {
            (0..n)
                .map(|sn| {
                    let set = spec.thetas().get(ArmId(b), crate::env::StateId(sn));
                    corners(&set.probs, delta)
                        .iter()
                        .map(|q| {
                            vertices
                                .iter()
                                .map(|v| {
                                    set.vectors
                                        .iter()
                                        .zip(q)
                                        .map(|(th, &w)| w * dot(v, th))
                                        .sum()
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let (tie_arm, tie_v) = ties[0];
    let in_ties = |b: usize, v: usize| ties.contains(&(ArmId(b), v));
    let tol = T::lit(TIE_TOL) * T::lit(16.0);
    for row in corners(&spec.transition().rows()[s_prev], delta) {
        // extreme of sum_sn row[sn] * f(corner) over independent corners
        let extreme = |b: usize, f: &dyn Fn(&[T]) -> T, take_max: bool| -> T {
            row.iter()
                .zip(&expectations[b])
                .map(|(&p, per_corner)| {
                    let vals = per_corner.iter().map(|e| f(e));
                    let e = if take_max {
                        vals.fold(T::neg_infinity(), T::max)
                    } else {
                        vals.fold(T::infinity(), T::min)
                    };
                    p * e
                })
                .sum()
        };
        let scale = extreme(tie_arm.0, &|e: &[T]| e[tie_v].abs(), true).max(T::one());
        let anchor_min = extreme(tie_arm.0, &|e: &[T]| e[tie_v], false);
        for b in 0..spec.num_arms() {
            for v in 0..nv {
                if b == tie_arm.0 && v == tie_v {
                    continue;
                }
                let tied = in_ties(b, v);
                if b == tie_arm.0 {
                    let diff_min = extreme(b, &|e: &[T]| e[tie_v] - e[v], false);
                    let diff_max = extreme(b, &|e: &[T]| e[tie_v] - e[v], true);
                    if tied {
                        if diff_min.abs().max(diff_max.abs()) > tol * scale {
                            return false;
                        }
                    } else if diff_min <= tol * scale {
                        return false;
                    }
                } else {
                    let other_max = extreme(b, &|e: &[T]| e[v], true);
                    if tied {
                        let other_min = extreme(b, &|e: &[T]| e[v], false);
                        let anchor_max = extreme(tie_arm.0, &|e: &[T]| e[tie_v], true);
                        if (anchor_max - other_min)
                            .abs()
                            .max((other_max - anchor_min).abs())
                            > tol * scale
                        {
                            return false;
                        }
                    } else if anchor_min - other_max <= tol * scale {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// `R(t) = t rho* - sum_{tau <= t} r_tau` for every `t`.
pub fn regret_trace<T: Scalar>(rewards: &[T], rho_star: T) -> Vec<T> {
    let mut acc = T::zero();
    rewards
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            acc = acc + r;
            T::from_usize_lossy(i + 1) * rho_star - acc
        })
        .collect()
}
