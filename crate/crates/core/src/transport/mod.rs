//! Couplings of measures on `X^Λ`: maximal couplings, the transport
//! distance `W₂`, and couplings that are simultaneously maximal on a
//! nested family of coordinate blocks.

mod goldstein;
pub mod lp;
pub mod mirror;
pub mod ot;
mod w2;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{tv_weights, Distribution};
use crate::scalar::Real;
use crate::state_space::ConfigSpace;

pub use goldstein::{goldstein_coupling, goldstein_levels, GoldsteinCoupling, GoldsteinLevel};
pub use w2::{w2_distance, w2_distance_with, W2Options, W2Result};

/// Tolerance on coupling marginals.
pub const MARGINAL_TOL: f64 = 1e-10;

/// A joint law `π` of `(Z, U)` with prescribed marginals, stored sparsely
/// as `(z, u, mass)` triples sorted by `(z, u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Coupling<T> {
    left: Distribution<T>,
    right: Distribution<T>,
    entries: Vec<(usize, usize, T)>,
}

impl<T: Real> Coupling<T> {
    /// Builds a coupling, merging duplicate cells and checking both
    /// marginals to [`MARGINAL_TOL`].
    pub fn new(left: Distribution<T>, right: Distribution<T>, entries: Vec<(usize, usize, T)>) -> Result<Self> {
        if left.space() != right.space() {
            return Err(Error::SpaceMismatch);
        }
        let c = Self::assemble(left, right, entries);
        let res = c.marginal_residual();
        if !(res <= T::lit(MARGINAL_TOL)) {
            return Err(Error::InvalidArgument(format!(
                "coupling marginals off by {res}"
            )));
        }
        if c.entries.iter().any(|e| e.2 < T::zero()) {
            return Err(Error::InvalidArgument("negative coupling mass".into()));
        }
        Ok(c)
    }

    pub(crate) fn assemble(left: Distribution<T>, right: Distribution<T>, entries: Vec<(usize, usize, T)>) -> Self {
        let mut merged: BTreeMap<(usize, usize), T> = BTreeMap::new();
        for (z, u, w) in entries {
            if w != T::zero() {
                let e = merged.entry((z, u)).or_insert(T::zero());
                *e = *e + w;
            }
        }
        let entries = merged.into_iter().map(|((z, u), w)| (z, u, w)).collect();
        Self { left, right, entries }
    }

    pub fn left(&self) -> &Distribution<T> {
        &self.left
    }

    pub fn right(&self) -> &Distribution<T> {
        &self.right
    }

    pub fn space(&self) -> &ConfigSpace {
        self.left.space()
    }

    pub fn entries(&self) -> &[(usize, usize, T)] {
        &self.entries
    }

    /// Largest absolute deviation of either marginal.
    pub fn marginal_residual(&self) -> T {
        let len = self.left.len();
        let mut rows = vec![T::zero(); len];
        let mut cols = vec![T::zero(); len];
        for &(z, u, w) in &self.entries {
            rows[z] = rows[z] + w;
            cols[u] = cols[u] + w;
        }
        let a = rows
            .iter()
            .zip(self.left.weights())
            .map(|(a, b)| (*a - *b).abs());
        let b = cols
            .iter()
            .zip(self.right.weights())
            .map(|(a, b)| (*a - *b).abs());
        a.chain(b).fold(T::zero(), T::max)
    }

    /// `m_i = Pr{Z_i ≠ U_i}` for every site.
    pub fn disagreement(&self) -> DisagreementVector<T> {
        let space = self.space();
        let mut m = vec![T::zero(); space.n()];
        for &(z, u, w) in &self.entries {
            for (i, mi) in m.iter_mut().enumerate() {
                if space.digit(z, i) != space.digit(u, i) {
                    *mi = *mi + w;
                }
            }
        }
        DisagreementVector(m)
    }

    /// `Pr{Z_J ≠ U_J}` for a set of positions `J`.
    pub fn disagreement_on(&self, positions: &[usize]) -> T {
        let space = self.space();
        self.entries
            .iter()
            .filter(|(z, u, _)| positions.iter().any(|&p| space.digit(*z, p) != space.digit(*u, p)))
            .map(|e| e.2)
            .sum()
    }

    /// `Σ_i m_i²`, the transport objective at this coupling.
    pub fn objective(&self) -> T {
        self.disagreement().squared_norm()
    }

    /// Dense matrix, available when the pair space has at most `2^16` cells.
    pub fn to_dense(&self) -> Option<Vec<Vec<T>>> {
        let len = self.left.len();
        if len.checked_mul(len)? > 1 << 16 {
            return None;
        }
        let mut out = vec![vec![T::zero(); len]; len];
        for &(z, u, w) in &self.entries {
            out[z][u] = w;
        }
        Some(out)
    }
}

/// Per-site disagreement probabilities of a coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(transparent)]
pub struct DisagreementVector<T>(pub Vec<T>);

impl<T: Real> DisagreementVector<T> {
    pub fn squared_norm(&self) -> T {
        self.0.iter().map(|x| *x * *x).sum()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }
}

/// Coupling with the largest possible diagonal mass `Σ min(r, s)`; the
/// off-diagonal residuals are coupled independently.
pub fn maximal_coupling<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<Coupling<T>> {
    if r.space() != s.space() {
        return Err(Error::SpaceMismatch);
    }
    let rw = r.weights();
    let sw = s.weights();
    let mut entries = Vec::new();
    let mut res_r = Vec::new();
    let mut res_s = Vec::new();
    for (x, (&a, &b)) in rw.iter().zip(sw).enumerate() {
        let m = a.min(b);
        if m > T::zero() {
            entries.push((x, x, m));
        }
        if a > m {
            res_r.push((x, a - m));
        }
        if b > m {
            res_s.push((x, b - m));
        }
    }
    let tr: T = res_r.iter().map(|e| e.1).sum();
    let ts: T = res_s.iter().map(|e| e.1).sum();
    let t = tr.max(ts);
    if t > T::zero() {
        for &(z, a) in &res_r {
            for &(u, b) in &res_s {
                entries.push((z, u, a * b / t));
            }
        }
    }
    Ok(Coupling::assemble(r.clone(), s.clone(), entries))
}

/// `√(Σ_i tv(r_i, s_i)²)` over single-site marginals.
pub fn w2_lower_bound<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<T> {
    if r.space() != s.space() {
        return Err(Error::SpaceMismatch);
    }
    let sum: T = (0..r.space().n())
        .map(|i| {
            let tv = tv_weights(&r.site_marginal(i), &s.site_marginal(i));
            tv * tv
        })
        .sum();
    Ok(sum.sqrt())
}

/// `(W₂², n·tv²)`: the transport distance never exceeds `√n` times the
/// variational distance.
pub fn w2_vs_tv_bound<T: Real>(r: &Distribution<T>, s: &Distribution<T>, tol: T) -> Result<(T, T)> {
    let w = w2_distance(r, s, tol)?;
    let tv = tv_weights(r.weights(), s.weights());
    Ok((w.value * w.value, T::count(r.space().n()) * tv * tv))
}
