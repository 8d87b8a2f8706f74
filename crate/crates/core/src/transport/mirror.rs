//! An independent reference solver for `W₂²`: entropic mirror descent on
//! the coupling itself, with Sinkhorn projection onto the marginal
//! constraints and exact rounding back onto the transport polytope.
//!
//! It shares no code with the primary solver apart from the coupling
//! type, and every iterate it scores is an exactly feasible coupling, so
//! its best value is always an upper bound on `W₂²`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Coupling;
use crate::error::{Error, Result};
use crate::measures::Distribution;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorOptions {
    pub iterations: usize,
    /// Step size; `None` uses `1 / (2n)`, the inverse smoothness constant
    /// of the objective with respect to the `ℓ₁` norm.
    pub step: Option<f64>,
    /// Marginal tolerance of the scaling step; each iterate is rounded onto
    /// the polytope exactly afterwards, so this only affects speed.
    pub sinkhorn_tol: f64,
}

impl Default for MirrorOptions {
    fn default() -> Self {
        Self {
            iterations: 2000,
            step: None,
            sinkhorn_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MirrorResult<T> {
    /// Smallest objective `Σ_i m_i²` seen at a feasible iterate.
    pub best_objective: T,
    pub coupling: Coupling<T>,
}

struct Problem<T> {
    rows: Vec<usize>,
    cols: Vec<usize>,
    r: Vec<T>,
    s: Vec<T>,
    /// `mask[a * n_cols + b]` lists the sites where row `a` and column `b` differ.
    mask: Vec<Vec<usize>>,
    n_sites: usize,
}

impl<T: Real> Problem<T> {
    fn disagreement(&self, pi: &[T]) -> Vec<T> {
        let mut m = vec![T::zero(); self.n_sites];
        for (cell, w) in pi.iter().enumerate() {
            for &i in &self.mask[cell] {
                m[i] = m[i] + *w;
            }
        }
        m
    }

    fn objective(&self, pi: &[T]) -> T {
        self.disagreement(pi).iter().map(|x| *x * *x).sum()
    }

    /// Scales `k` in place to the marginals by alternating projections,
    /// then rounds onto the polytope exactly.
    fn project(&self, k: &mut [T], tol: T) {
        let (nr, nc) = (self.rows.len(), self.cols.len());
        for _ in 0..20_000 {
            for a in 0..nr {
                let row = &mut k[a * nc..(a + 1) * nc];
                let t: T = row.iter().copied().sum();
                if t > T::zero() {
                    let f = self.r[a] / t;
                    row.iter_mut().for_each(|x| *x = *x * f);
                }
            }
            let mut err = T::zero();
            for b in 0..nc {
                let t: T = (0..nr).map(|a| k[a * nc + b]).sum();
                err = err.max((t - self.s[b]).abs());
                if t > T::zero() {
                    let f = self.s[b] / t;
                    (0..nr).for_each(|a| k[a * nc + b] = k[a * nc + b] * f);
                }
            }
            if err <= tol {
                break;
            }
        }
        self.round(k);
    }

    /// Rounding onto `Π(r, s)`: shrink over-full rows and columns, then
    /// redistribute the deficit as a rank-one correction.
    fn round(&self, k: &mut [T]) {
        let (nr, nc) = (self.rows.len(), self.cols.len());
        for a in 0..nr {
            let t: T = k[a * nc..(a + 1) * nc].iter().copied().sum();
            if t > self.r[a] {
                let f = self.r[a] / t;
                k[a * nc..(a + 1) * nc].iter_mut().for_each(|x| *x = *x * f);
            }
        }
        for b in 0..nc {
            let t: T = (0..nr).map(|a| k[a * nc + b]).sum();
            if t > self.s[b] {
                let f = self.s[b] / t;
                (0..nr).for_each(|a| k[a * nc + b] = k[a * nc + b] * f);
            }
        }
        let er: Vec<T> = (0..nr)
            .map(|a| (self.r[a] - k[a * nc..(a + 1) * nc].iter().copied().sum::<T>()).max(T::zero()))
            .collect();
        let ec: Vec<T> = (0..nc)
            .map(|b| (self.s[b] - (0..nr).map(|a| k[a * nc + b]).sum::<T>()).max(T::zero()))
            .collect();
        let total: T = er.iter().copied().sum();
        if total > T::zero() {
            for a in 0..nr {
                for b in 0..nc {
                    k[a * nc + b] = k[a * nc + b] + er[a] * ec[b] / total;
                }
            }
        }
    }
}

/// Runs entropic mirror descent from a seeded random interior coupling.
pub fn mirror_descent_w2<T: Real>(
    r: &Distribution<T>,
    s: &Distribution<T>,
    seed: u64,
    opts: MirrorOptions,
) -> Result<MirrorResult<T>> {
    if r.space() != s.space() {
        return Err(Error::SpaceMismatch);
    }
    let space = r.space();
    let rows: Vec<usize> = (0..space.len()).filter(|&x| r.weights()[x] > T::zero()).collect();
    let cols: Vec<usize> = (0..space.len()).filter(|&x| s.weights()[x] > T::zero()).collect();
    let n_sites = space.n();
    let mut mask = Vec::with_capacity(rows.len() * cols.len());
    for &z in &rows {
        for &u in &cols {
            mask.push(
                (0..n_sites)
                    .filter(|&i| space.digit(z, i) != space.digit(u, i))
                    .collect(),
            );
        }
    }
    let prob = Problem {
        r: rows.iter().map(|&x| r.weights()[x]).collect(),
        s: cols.iter().map(|&x| s.weights()[x]).collect(),
        rows,
        cols,
        mask,
        n_sites,
    };
    let tol = T::lit(opts.sinkhorn_tol);
    let eta = T::lit(opts.step.unwrap_or(0.5 / n_sites.max(1) as f64));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pi: Vec<T> = (0..prob.mask.len())
        .map(|_| T::lit(0.05 + rng.gen::<f64>()))
        .collect();
    prob.project(&mut pi, tol);
    let mut best = prob.objective(&pi);
    let mut best_pi = pi.clone();
    for _ in 0..opts.iterations {
        let m = prob.disagreement(&pi);
        for (cell, w) in pi.iter_mut().enumerate() {
            let g: T = prob.mask[cell].iter().map(|&i| m[i]).sum::<T>() * T::lit(2.0);
            *w = *w * (-eta * g).exp();
        }
        prob.project(&mut pi, tol);
        let f = prob.objective(&pi);
        if f < best {
            best = f;
            best_pi.copy_from_slice(&pi);
        }
    }
    let nc = prob.cols.len();
    let entries = best_pi
        .iter()
        .enumerate()
        .map(|(cell, &w)| (prob.rows[cell / nc], prob.cols[cell % nc], w))
        .collect();
    let coupling = Coupling::new(r.clone(), s.clone(), entries)?;
    let best_objective = coupling.objective();
    Ok(MirrorResult {
        best_objective,
        coupling,
    })
}
