//! Couplings of two block conditionals that are maximal simultaneously on
//! every block of the nested family `J_{k,M,i}`.
//!
//! Levels `L_1 = M ⊋ L_2 ⊋ … ⊋ L_T` are the distinct J-sets, listed by
//! increasing distance from the flipped site `k`. Agreement on `L_t`
//! implies agreement on every later level, so the coupling is built by
//! peeling: first put `min(μ, ν)` on the diagonal, then for each level `t`
//! and each `L_t`-cylinder `c` pair up `min(R_Y(c), R_Z(c))` of the
//! residual masses inside `c` (proportionally, independently). Those pairs
//! agree on `L_t` but not on `L_{t-1}`, and afterwards at most one residual
//! is positive in each `L_t`-cylinder. The leftover mass is coupled
//! independently. Each level then disagrees with probability exactly the
//! variational distance of the `L_t`-marginals.

use serde::{Deserialize, Serialize};

use super::lp::{solve_lp, LinearProgram};
use super::Coupling;
use crate::error::{Error, Result};
use crate::measures::{tv_weights, Distribution};
use crate::scalar::Real;
use crate::spec::LocalSpec;
use crate::state_space::{rho_unchecked, ConfigSpace};

/// Tolerance on the level equalities before the LP backstop takes over.
const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GoldsteinLevel<T> {
    /// `ρ(k, i)` for the sites `i` whose J-set is this level.
    pub distance: u64,
    /// Universe positions of the level's sites.
    pub positions: Vec<usize>,
    /// Variational distance of the two level marginals.
    pub tv: T,
    /// `Pr{Y_L ≠ Z_L}` under the coupling.
    pub disagreement: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GoldsteinCoupling<T> {
    /// Universe positions of `M` in increasing order; the coupling lives on
    /// `X^M` in this order.
    pub block: Vec<usize>,
    /// The single outside position where the contexts differ, if any.
    pub flip: Option<usize>,
    pub coupling: Coupling<T>,
    pub levels: Vec<GoldsteinLevel<T>>,
    /// Whether the linear-programming backstop produced the coupling.
    pub used_lp: bool,
}

impl<T: Real> GoldsteinCoupling<T> {
    /// Largest violation of the level equalities.
    pub fn max_level_error(&self) -> T {
        self.levels
            .iter()
            .map(|l| (l.disagreement - l.tv).abs())
            .fold(T::zero(), T::max)
    }

    /// For each `i ∈ M`: `(position, Pr{Y_i ≠ Z_i}, tv of the J_i marginals, ρ(k, i))`.
    pub fn site_bounds(&self) -> Vec<(usize, T, T, u64)> {
        let m = self.coupling.disagreement();
        let mut out = Vec::new();
        for (j, &pos) in self.block.iter().enumerate() {
            let level = self
                .levels
                .iter()
                .rev()
                .find(|l| l.positions.contains(&pos));
            if let Some(l) = level {
                out.push((pos, m.0[j], l.tv, l.distance));
            }
        }
        out
    }
}

/// Distinct J-sets of `block` relative to the universe position `k`, as
/// `(distance, positions)` with distance increasing (sets decreasing).
pub fn goldstein_levels(universe: &ConfigSpace, block: &[usize], k: usize) -> Vec<(u64, Vec<usize>)> {
    let sites = universe.sites();
    let ks = sites.site(k);
    let mut dists: Vec<u64> = block.iter().map(|&p| rho_unchecked(ks, sites.site(p))).collect();
    dists.sort_unstable();
    dists.dedup();
    dists
        .into_iter()
        .map(|d| {
            let mut pos: Vec<usize> = block
                .iter()
                .copied()
                .filter(|&p| rho_unchecked(ks, sites.site(p)) >= d)
                .collect();
            pos.sort_unstable();
            (d, pos)
        })
        .collect()
}

/// Couples `q_M(·|ȳ)` and `q_M(·|z̄)` so that every J-level is maximally coupled.
pub fn goldstein_coupling<T: Real, S: LocalSpec<T> + ?Sized>(
    spec: &S,
    block: &[usize],
    ctx_y: usize,
    ctx_z: usize,
) -> Result<GoldsteinCoupling<T>> {
    let universe = spec.universe();
    let mut block = block.to_vec();
    block.sort_unstable();
    if block.windows(2).any(|w| w[0] == w[1]) || block.iter().any(|&p| p >= universe.n()) {
        return Err(Error::InvalidArgument("invalid block".into()));
    }
    let outside = universe.complement(&block);
    let diffs: Vec<usize> = outside
        .iter()
        .copied()
        .filter(|&p| universe.digit(ctx_y, p) != universe.digit(ctx_z, p))
        .collect();
    if diffs.len() > 1 {
        return Err(Error::ContextDifference(diffs.len()));
    }
    let flip = diffs.first().copied();

    let sub = universe.subspace(&block)?;
    let mu = Distribution::from_unnormalized(sub.clone(), spec.block_conditional(&block, ctx_y)?)?;
    let nu = Distribution::from_unnormalized(sub.clone(), spec.block_conditional(&block, ctx_z)?)?;

    // levels in subspace coordinates
    let raw_levels = match flip {
        Some(k) => goldstein_levels(universe, &block, k),
        None => Vec::new(),
    };
    let local: Vec<Vec<usize>> = raw_levels
        .iter()
        .map(|(_, pos)| pos.iter().map(|p| block.binary_search(p).unwrap()).collect())
        .collect();

    let entries = peel(&sub, mu.weights(), nu.weights(), &local);
    let coupling = Coupling::assemble(mu.clone(), nu.clone(), entries);
    let mut result = GoldsteinCoupling {
        levels: describe(&coupling, &raw_levels, &local)?,
        block,
        flip,
        coupling,
        used_lp: false,
    };
    let ok = result.max_level_error() <= T::lit(LEVEL_TOL)
        && result.coupling.marginal_residual() <= T::lit(super::MARGINAL_TOL);
    if !ok {
        let entries = level_lp(&sub, mu.weights(), nu.weights(), &local, &result.levels)?;
        let coupling = Coupling::new(mu, nu, entries)?;
        result.levels = describe(&coupling, &raw_levels, &local)?;
        result.coupling = coupling;
        result.used_lp = true;
        if result.max_level_error() > T::lit(LEVEL_TOL) {
            return Err(Error::Infeasible("level equalities not attainable".into()));
        }
    }
    Ok(result)
}

fn describe<T: Real>(
    coupling: &Coupling<T>,
    raw: &[(u64, Vec<usize>)],
    local: &[Vec<usize>],
) -> Result<Vec<GoldsteinLevel<T>>> {
    raw.iter()
        .zip(local)
        .map(|((d, pos), loc)| {
            let mu_l = coupling.left().marginal(loc)?;
            let nu_l = coupling.right().marginal(loc)?;
            Ok(GoldsteinLevel {
                distance: *d,
                positions: pos.clone(),
                tv: tv_weights(mu_l.weights(), nu_l.weights()),
                disagreement: coupling.disagreement_on(loc),
            })
        })
        .collect()
}

/// The residual-peeling construction over nested levels (`levels[0]` is the
/// whole block, or `levels` is empty when the contexts agree).
fn peel<T: Real>(space: &ConfigSpace, mu: &[T], nu: &[T], levels: &[Vec<usize>]) -> Vec<(usize, usize, T)> {
    let len = mu.len();
    let mut entries = Vec::new();
    let mut ry = mu.to_vec();
    let mut rz = nu.to_vec();
    for x in 0..len {
        let g = mu[x].min(nu[x]);
        if g > T::zero() {
            entries.push((x, x, g));
            ry[x] = mu[x] - g;
            rz[x] = nu[x] - g;
        }
        // exactly one of the residuals is positive
        if ry[x] <= rz[x] {
            ry[x] = T::zero();
        } else {
            rz[x] = T::zero();
        }
    }
    for level in levels.iter().skip(1) {
        let q = space.q();
        let cylinders = q.pow(level.len() as u32);
        let mut ys: Vec<Vec<usize>> = vec![Vec::new(); cylinders];
        let mut zs: Vec<Vec<usize>> = vec![Vec::new(); cylinders];
        for x in 0..len {
            let c = space.project(x, level);
            if ry[x] > T::zero() {
                ys[c].push(x);
            }
            if rz[x] > T::zero() {
                zs[c].push(x);
            }
        }
        for c in 0..cylinders {
            let my: T = ys[c].iter().map(|&x| ry[x]).sum();
            let mz: T = zs[c].iter().map(|&x| rz[x]).sum();
            let eta = my.min(mz);
            if eta <= T::zero() {
                continue;
            }
            for &y in &ys[c] {
                for &z in &zs[c] {
                    entries.push((y, z, ry[y] * rz[z] * eta / (my * mz)));
                }
            }
            // the side with the smaller residual is exhausted exactly
            if my <= mz {
                ys[c].iter().for_each(|&y| ry[y] = T::zero());
                let f = (mz - eta) / mz;
                zs[c].iter().for_each(|&z| rz[z] = rz[z] * f);
            } else {
                zs[c].iter().for_each(|&z| rz[z] = T::zero());
                let f = (my - eta) / my;
                ys[c].iter().for_each(|&y| ry[y] = ry[y] * f);
            }
        }
    }
    let ty: T = ry.iter().copied().sum();
    let tz: T = rz.iter().copied().sum();
    let t = ty.max(tz);
    if t > T::zero() {
        for y in (0..len).filter(|&y| ry[y] > T::zero()) {
            for z in (0..len).filter(|&z| rz[z] > T::zero()) {
                entries.push((y, z, ry[y] * rz[z] / t));
            }
        }
    }
    entries
}

/// Feasibility LP: marginals plus `Pr{Y_L = Z_L} = 1 − tv_L` at every level.
fn level_lp<T: Real>(
    space: &ConfigSpace,
    mu: &[T],
    nu: &[T],
    levels: &[Vec<usize>],
    described: &[GoldsteinLevel<T>],
) -> Result<Vec<(usize, usize, T)>> {
    let len = mu.len();
    let nv = len * len;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    for y in 0..len {
        let mut r = vec![T::zero(); nv];
        (0..len).for_each(|z| r[y * len + z] = T::one());
        rows.push(r);
        rhs.push(mu[y]);
    }
    for z in 0..len {
        let mut r = vec![T::zero(); nv];
        (0..len).for_each(|y| r[y * len + z] = T::one());
        rows.push(r);
        rhs.push(nu[z]);
    }
    for (level, d) in levels.iter().zip(described) {
        let mut r = vec![T::zero(); nv];
        for y in 0..len {
            for z in 0..len {
                if level.iter().all(|&p| space.digit(y, p) == space.digit(z, p)) {
                    r[y * len + z] = T::one();
                }
            }
        }
        rows.push(r);
        rhs.push(T::one() - d.tv);
    }
    let sol = solve_lp(&LinearProgram {
        cost: vec![T::zero(); nv],
        rows,
        rhs,
    })?;
    Ok(sol
        .x
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > T::zero())
        .map(|(v, &w)| (v / len, v % len, w))
        .collect())
}
