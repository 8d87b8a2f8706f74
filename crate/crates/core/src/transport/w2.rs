//! `W₂²(r, s) = min_π Σ_i Pr_π{Z_i ≠ U_i}²`.
//!
//! The map `π ↦ m(π)` to the disagreement vector is linear, so `W₂²` is
//! the squared norm of the minimum-norm point of the polytope
//! `m(Π(r, s)) ⊂ [0,1]^n`. We find that point with Wolfe's fully
//! corrective conditional-gradient method: the linear oracle is an exact
//! transport LP with cost `Σ_i w_i 1{z_i ≠ u_i}`, every oracle vertex keeps
//! its transport plan, and the final coupling is the convex combination of
//! the plans of the active vertices.
//!
//! For any iterate `x` and oracle answer `v`, every point `y` of the
//! polytope has `⟨x, y⟩ ≥ ⟨x, v⟩`, so `‖y‖ ≥ ⟨x, v⟩ / ‖x‖`. This gives a
//! certified lower bound on `W₂` and hence on the optimality gap.

use serde::{Deserialize, Serialize};

use super::ot::solve_transport;
use super::{w2_lower_bound, Coupling, DisagreementVector};
use crate::error::{Error, Result};
use crate::linalg::solve_dense;
use crate::measures::Distribution;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct W2Options<T> {
    /// Target bound on the certified gap of the objective `W₂²`.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for W2Options<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-7),
            max_iter: 100_000,
        }
    }
}

/// Solver output. `value² = Σ_i m_i²` at `coupling`, and
/// `value² − lower_bound² ≤ gap`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct W2Result<T> {
    pub value: T,
    pub coupling: Coupling<T>,
    /// Certified upper bound on `value² − W₂²`.
    pub gap: T,
    /// Certified lower bound on `W₂`.
    pub lower_bound: T,
    pub disagreement: DisagreementVector<T>,
    pub iterations: usize,
}

/// `W₂` with default options apart from the gap tolerance.
pub fn w2_distance<T: Real>(r: &Distribution<T>, s: &Distribution<T>, tol: T) -> Result<W2Result<T>> {
    w2_distance_with(
        r,
        s,
        W2Options {
            tol,
            ..W2Options::default()
        },
    )
}

struct Atom<T> {
    point: Vec<T>,
    plan: Vec<(usize, usize, T)>,
}

struct Oracle<'a, T> {
    r: &'a [T],
    s: &'a [T],
    n: usize,
    /// Digits of every configuration, row-major by configuration.
    digits: Vec<usize>,
}

impl<T: Real> Oracle<'_, T> {
    fn vertex(&self, w: &[T]) -> Result<Atom<T>> {
        let n = self.n;
        let d = &self.digits;
        let sol = solve_transport(self.r, self.s, |z, u| {
            let (a, b) = (&d[z * n..(z + 1) * n], &d[u * n..(u + 1) * n]);
            a.iter()
                .zip(b)
                .zip(w)
                .filter(|((x, y), _)| x != y)
                .map(|(_, wi)| *wi)
                .sum()
        })?;
        let mut point = vec![T::zero(); n];
        for &(z, u, x) in &sol.plan {
            for i in 0..n {
                if d[z * n + i] != d[u * n + i] {
                    point[i] = point[i] + x;
                }
            }
        }
        Ok(Atom {
            point,
            plan: sol.plan,
        })
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn combine<T: Real>(atoms: &[Atom<T>], lambda: &[T], n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (a, &l) in atoms.iter().zip(lambda) {
        for (xi, pi) in x.iter_mut().zip(&a.point) {
            *xi = *xi + l * *pi;
        }
    }
    x
}

/// Minimiser of `‖Σ μ_j p_j‖` over the affine hull (`Σ μ_j = 1`).
fn affine_minimizer<T: Real>(atoms: &[Atom<T>]) -> Option<Vec<T>> {
    let k = atoms.len();
    if k == 1 {
        return Some(vec![T::one()]);
    }
    let mut m = vec![vec![T::zero(); k + 1]; k + 1];
    for i in 0..k {
        for j in 0..k {
            m[i][j] = dot(&atoms[i].point, &atoms[j].point);
        }
        m[i][k] = T::one();
        m[k][i] = T::one();
    }
    let mut b = vec![T::zero(); k + 1];
    b[k] = T::one();
    let sol = solve_dense(m, b, T::lit(1e-13))?;
    Some(sol[..k].to_vec())
}

/// Wolfe's minimum-norm-point iteration over the disagreement polytope.
pub fn w2_distance_with<T: Real>(
    r: &Distribution<T>,
    s: &Distribution<T>,
    opts: W2Options<T>,
) -> Result<W2Result<T>> {
    if r.space() != s.space() {
        return Err(Error::SpaceMismatch);
    }
    if !(opts.tol > T::zero()) {
        return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
    }
    let space = r.space();
    let n = space.n();
    let digits: Vec<usize> = (0..space.len())
        .flat_map(|id| (0..n).map(move |i| space.digit(id, i)))
        .collect();
    let oracle = Oracle {
        r: r.weights(),
        s: s.weights(),
        n,
        digits,
    };
    let coordinate_bound = w2_lower_bound(r, s)?;
    let eps = T::lit(1e-12);

    let mut atoms = vec![oracle.vertex(&vec![T::one(); n])?];
    let mut lambda = vec![T::one()];
    let mut x = atoms[0].point.clone();
    let mut iterations = 0;
    let mut dual_bound = T::zero();
    let mut last_f;
    let mut last_fw;

    loop {
        let f = dot(&x, &x);
        let v = oracle.vertex(&x)?;
        let xv = dot(&x, &v.point);
        if f > T::zero() {
            dual_bound = dual_bound.max(xv.max(T::zero()) / f.sqrt());
        }
        let lb = dual_bound.max(coordinate_bound);
        let fw_gap = T::lit(2.0) * (f - xv);
        let gap = (f - lb * lb).min(fw_gap).max(T::zero());
        last_f = f;
        last_fw = fw_gap;
        if f <= opts.tol || gap <= opts.tol {
            break;
        }
        if iterations >= opts.max_iter {
            return Err(Error::NotConverged {
                iterations,
                best_value: f.sqrt().to_f64_lossy(),
                gap: gap.to_f64_lossy(),
                best_disagreement: x.iter().map(|t| t.to_f64_lossy()).collect(),
            });
        }
        iterations += 1;
        // The oracle vertex no longer improves on x: rounding has the last word.
        if f - xv <= eps * (T::one() + f) {
            return Err(Error::NotConverged {
                iterations,
                best_value: f.sqrt().to_f64_lossy(),
                gap: gap.to_f64_lossy(),
                best_disagreement: x.iter().map(|t| t.to_f64_lossy()).collect(),
            });
        }
        atoms.push(v);
        lambda.push(T::zero());

        // minor cycle: move to the affine minimiser of the corral, dropping
        // vertices until it lies in the relative interior
        loop {
            let Some(mu) = affine_minimizer(&atoms) else {
                // affinely dependent corral: drop the older vertex that
                // carries the least weight
                let last = atoms.len() - 1;
                let drop = (0..last)
                    .min_by(|&a, &b| lambda[a].partial_cmp(&lambda[b]).unwrap())
                    .unwrap_or(last);
                lambda.remove(drop);
                atoms.remove(drop);
                let total: T = lambda.iter().copied().sum::<T>();
                if total > T::zero() {
                    lambda.iter_mut().for_each(|l| *l = *l / total);
                } else {
                    let k = lambda.len();
                    lambda.iter_mut().for_each(|l| *l = T::one() / T::count(k));
                }
                continue;
            };
            if mu.iter().all(|&m| m > eps) {
                lambda = mu;
                break;
            }
            let mut theta = T::one();
            for (&l, &m) in lambda.iter().zip(&mu) {
                if m <= eps {
                    let denom = l - m;
                    if denom > T::zero() {
                        theta = theta.min(l / denom);
                    }
                }
            }
            for (l, &m) in lambda.iter_mut().zip(&mu) {
                *l = theta * m + (T::one() - theta) * *l;
            }
            let mut k = 0;
            let mut removed = false;
            while k < atoms.len() {
                if lambda[k] <= eps && atoms.len() > 1 {
                    atoms.remove(k);
                    lambda.remove(k);
                    removed = true;
                } else {
                    k += 1;
                }
            }
            if !removed {
                // numerical safety: drop the smallest weight explicitly
                let drop = (0..lambda.len())
                    .min_by(|&a, &b| lambda[a].partial_cmp(&lambda[b]).unwrap())
                    .unwrap();
                atoms.remove(drop);
                lambda.remove(drop);
            }
            let total: T = lambda.iter().copied().sum();
            lambda.iter_mut().for_each(|l| *l = *l / total);
            if atoms.len() == 1 {
                lambda = vec![T::one()];
                break;
            }
        }
        x = combine(&atoms, &lambda, n);
    }

    let mut entries = Vec::new();
    for (a, &l) in atoms.iter().zip(&lambda) {
        entries.extend(a.plan.iter().map(|&(z, u, w)| (z, u, w * l)));
    }
    let coupling = Coupling::assemble(r.clone(), s.clone(), entries);
    let disagreement = coupling.disagreement();
    let value = disagreement.squared_norm().sqrt();
    let lower_bound = dual_bound.max(coordinate_bound).min(value);
    let f_final = value * value;
    let gap = (f_final - lower_bound * lower_bound)
        .min(last_fw + (f_final - last_f).abs())
        .max(T::zero());
    Ok(W2Result {
        value,
        coupling,
        gap,
        lower_bound,
        disagreement,
        iterations,
    })
}
