//! Heat-bath (Gibbs sampler) kernels: single-site updates `Γ_i`, their
//! uniform mixture `Γ`, block updates `Γ_I` with a frozen boundary and the
//! mixture `Γ_{I_m}` over a cube family; Dirichlet forms and the
//! entropy-decay identity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{avg_site_divergence, for_each_context, relative_entropy, Distribution};
use crate::scalar::Real;
use crate::spec::LocalSpec;
use crate::state_space::{cubes_intersecting, ConfigSpace, CubeFamily};
use crate::transport::{w2_distance_with, W2Options};

/// Dense materialisation limit for kernels.
pub const DENSE_CAP: usize = 1 << 12;

/// Resampling of a block from a fixed conditional law: from `y` the chain
/// moves to `z` with `z̄_I = ȳ_I` and probability `table[z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockUpdate<T> {
    block: Vec<usize>,
    /// `q_I(z_I | z̄_I)` indexed by the full configuration `z`.
    table: Vec<T>,
    /// Configurations whose context has no mass; their row is undefined.
    null: Vec<bool>,
}

impl<T: Real> BlockUpdate<T> {
    pub fn block(&self) -> &[usize] {
        &self.block
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Repr<T> {
    Dense(Vec<Vec<T>>),
    /// `Σ_j w_j Γ_j`.
    Mixture(Vec<(T, BlockUpdate<T>)>),
}

/// A Markov kernel on a configuration space.
///
/// Structured kernels act fibre by fibre and are never materialised unless
/// asked for; rows on conditioning contexts without mass are undefined and
/// are reported as such when a measure charges them.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel<T> {
    space: ConfigSpace,
    repr: Repr<T>,
}

impl<T: Real> Kernel<T> {
    /// A dense row-stochastic kernel; rows must sum to one within `1e-12`.
    pub fn dense(space: ConfigSpace, rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.len() != space.len() {
            return Err(Error::DimensionMismatch(space.len(), rows.len()));
        }
        for row in &rows {
            if row.len() != space.len() {
                return Err(Error::DimensionMismatch(space.len(), row.len()));
            }
            if row.iter().any(|x| !(*x >= T::zero())) {
                return Err(Error::InvalidArgument("negative kernel entry".into()));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > T::inequality_slack().max(T::epsilon() * T::lit(64.0)) {
                return Err(Error::InvalidArgument(format!("kernel row sums to {s}")));
            }
        }
        Ok(Self {
            space,
            repr: Repr::Dense(rows),
        })
    }

    pub fn identity(space: ConfigSpace) -> Self {
        let len = space.len();
        Self {
            space,
            repr: Repr::Mixture(vec![(
                T::one(),
                BlockUpdate {
                    block: Vec::new(),
                    table: vec![T::one(); len],
                    null: vec![false; len],
                },
            )]),
        }
    }

    /// `Σ_j w_j K_j` for structured kernels on the same space.
    pub fn mixture(parts: &[Kernel<T>], weights: &[T]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return Err(Error::InvalidArgument("empty mixture".into()));
        };
        if parts.len() != weights.len() {
            return Err(Error::DimensionMismatch(parts.len(), weights.len()));
        }
        let mut out = Vec::new();
        for (k, &w) in parts.iter().zip(weights) {
            if k.space != first.space {
                return Err(Error::SpaceMismatch);
            }
            match &k.repr {
                Repr::Mixture(items) => out.extend(items.iter().map(|(v, u)| (*v * w, u.clone()))),
                Repr::Dense(_) => {
                    return Err(Error::InvalidArgument("mixtures take structured kernels".into()))
                }
            }
        }
        Ok(Self {
            space: first.space.clone(),
            repr: Repr::Mixture(out),
        })
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    /// `pK` without renormalisation.
    pub fn apply_weights(&self, p: &[T]) -> Result<Vec<T>> {
        if p.len() != self.space.len() {
            return Err(Error::DimensionMismatch(self.space.len(), p.len()));
        }
        let len = p.len();
        match &self.repr {
            Repr::Dense(rows) => {
                let mut out = vec![T::zero(); len];
                for (y, row) in rows.iter().enumerate() {
                    if p[y] != T::zero() {
                        for (o, k) in out.iter_mut().zip(row) {
                            *o = *o + p[y] * *k;
                        }
                    }
                }
                Ok(out)
            }
            Repr::Mixture(items) => {
                let mut out = vec![T::zero(); len];
                let mut err = None;
                for (w, upd) in items {
                    for_each_context(&self.space, &upd.block, |_, ids| {
                        let mass: T = ids.iter().map(|&x| p[x]).sum();
                        if mass == T::zero() {
                            return;
                        }
                        if upd.null[ids[0]] {
                            err = Some(Error::ZeroMassContext);
                            return;
                        }
                        for &z in ids {
                            out[z] = out[z] + *w * mass * upd.table[z];
                        }
                    });
                }
                match err {
                    Some(e) => Err(e),
                    None => Ok(out),
                }
            }
        }
    }

    /// `pK` as a measure (renormalised against rounding drift).
    pub fn apply(&self, p: &Distribution<T>) -> Result<Distribution<T>> {
        if p.space() != &self.space {
            return Err(Error::SpaceMismatch);
        }
        Distribution::from_unnormalized(self.space.clone(), self.apply_weights(p.weights())?)
    }

    /// `(Kf)(y) = Σ_z K(z|y) f(z)`; undefined rows act as the identity.
    pub fn apply_fn(&self, f: &[T]) -> Vec<T> {
        match &self.repr {
            Repr::Dense(rows) => rows
                .iter()
                .map(|row| row.iter().zip(f).map(|(k, v)| *k * *v).sum())
                .collect(),
            Repr::Mixture(items) => {
                let mut out = vec![T::zero(); f.len()];
                for (w, upd) in items {
                    for_each_context(&self.space, &upd.block, |_, ids| {
                        if upd.null[ids[0]] {
                            for &y in ids {
                                out[y] = out[y] + *w * f[y];
                            }
                            return;
                        }
                        let avg: T = ids.iter().map(|&z| upd.table[z] * f[z]).sum();
                        for &y in ids {
                            out[y] = out[y] + *w * avg;
                        }
                    });
                }
                out
            }
        }
    }

    /// `K(z|y)`; undefined rows are the identity.
    pub fn entry(&self, y: usize, z: usize) -> T {
        match &self.repr {
            Repr::Dense(rows) => rows[y][z],
            Repr::Mixture(items) => items
                .iter()
                .filter(|(_, u)| self.space.clear(y, &u.block) == self.space.clear(z, &u.block))
                .map(|(w, u)| {
                    if u.null[y] {
                        if y == z {
                            *w
                        } else {
                            T::zero()
                        }
                    } else {
                        *w * u.table[z]
                    }
                })
                .sum(),
        }
    }

    /// Dense matrix, for spaces of at most [`DENSE_CAP`] states.
    pub fn to_dense(&self) -> Result<Vec<Vec<T>>> {
        let len = self.space.len();
        if len > DENSE_CAP {
            return Err(Error::StateCapExceeded {
                states: len as u128,
                cap: DENSE_CAP,
            });
        }
        if let Repr::Dense(rows) = &self.repr {
            return Ok(rows.clone());
        }
        let mut out = vec![vec![T::zero(); len]; len];
        for (y, row) in out.iter_mut().enumerate() {
            let mut e = vec![T::zero(); len];
            e[y] = T::one();
            // row y of K is δ_y K
            if let Ok(r) = self.apply_weights(&e) {
                *row = r;
            } else {
                row[y] = T::one();
            }
        }
        Ok(out)
    }

    /// Pairs `(y, z)` with possibly nonzero `K(z|y)`.
    fn for_each_pair(&self, mut f: impl FnMut(usize, usize)) {
        match &self.repr {
            Repr::Dense(rows) => {
                for y in 0..rows.len() {
                    for z in 0..rows.len() {
                        f(y, z);
                    }
                }
            }
            Repr::Mixture(items) => {
                let mut seen = std::collections::HashSet::new();
                for (_, u) in items {
                    if !seen.insert(u.block.clone()) {
                        continue;
                    }
                    for_each_context(&self.space, &u.block, |_, ids| {
                        for &y in ids {
                            for &z in ids {
                                f(y, z);
                            }
                        }
                    });
                }
            }
        }
    }
}

fn single_update<T: Real>(q: &Distribution<T>, block: &[usize]) -> BlockUpdate<T> {
    let space = q.space();
    let w = q.weights();
    let mut table = vec![T::zero(); space.len()];
    let mut null = vec![false; space.len()];
    for_each_context(space, block, |_, ids| {
        let mass: T = ids.iter().map(|&x| w[x]).sum();
        for &x in ids {
            if mass > T::zero() {
                table[x] = w[x] / mass;
            } else {
                null[x] = true;
            }
        }
    });
    BlockUpdate {
        block: block.to_vec(),
        table,
        null,
    }
}

/// `Γ_i(z|y) = δ(ȳ_i, z̄_i) q_i(z_i|ȳ_i)`.
pub fn site_kernel<T: Real>(q: &Distribution<T>, i: usize) -> Result<Kernel<T>> {
    if i >= q.space().n() {
        return Err(Error::InvalidArgument(format!("site {i} out of range")));
    }
    Ok(Kernel {
        space: q.space().clone(),
        repr: Repr::Mixture(vec![(T::one(), single_update(q, &[i]))]),
    })
}

/// The random-scan Gibbs sampler `Γ = (1/n) Σ_i Γ_i` and its components.
#[derive(Debug, Clone)]
pub struct GibbsSampler<T> {
    pub site_kernels: Vec<Kernel<T>>,
    pub mixture: Kernel<T>,
}

pub fn gibbs_sampler<T: Real>(q: &Distribution<T>) -> Result<GibbsSampler<T>> {
    let n = q.space().n();
    let site_kernels = (0..n).map(|i| site_kernel(q, i)).collect::<Result<Vec<_>>>()?;
    let w = vec![T::one() / T::count(n); n];
    let mixture = Kernel::mixture(&site_kernels, &w)?;
    Ok(GibbsSampler {
        site_kernels,
        mixture,
    })
}

/// The space `X^Λ` of the free sites of a specification.
pub fn free_space<T: Real, S: LocalSpec<T> + ?Sized>(spec: &S) -> Result<ConfigSpace> {
    spec.universe().subspace(spec.free_sites())
}

/// Universe configuration that agrees with `boundary` off the free sites
/// and with the free-space configuration `x` on them.
pub fn embed<T: Real, S: LocalSpec<T> + ?Sized>(spec: &S, boundary: usize, x: usize) -> usize {
    let u = spec.universe();
    let free = spec.free_sites();
    let q = u.q();
    let mut id = u.clear(boundary, free);
    let mut rest = x;
    for &p in free {
        id += (rest % q) * u.stride(p);
        rest /= q;
    }
    id
}

/// `Γ_I` on `X^Λ` with the sites outside `Λ` frozen to `boundary`.
///
/// `block` lists universe positions; only its free part is resampled.
pub fn block_kernel<T: Real, S: LocalSpec<T> + ?Sized>(spec: &S, block: &[usize], boundary: usize) -> Result<Kernel<T>> {
    let space = free_space(spec)?;
    let free = spec.free_sites();
    let local: Vec<usize> = block
        .iter()
        .filter_map(|p| free.iter().position(|f| f == p))
        .collect();
    let mut table = vec![T::zero(); space.len()];
    let mut null = vec![false; space.len()];
    let global: Vec<usize> = local.iter().map(|&j| free[j]).collect();
    let mut failure = None;
    for_each_context(&space, &local, |c, ids| {
        match spec.block_conditional(&global, embed(spec, boundary, c)) {
            Ok(w) => {
                for (&x, v) in ids.iter().zip(w) {
                    table[x] = v;
                }
            }
            Err(Error::ZeroMassContext) => ids.iter().for_each(|&x| null[x] = true),
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Kernel {
        space,
        repr: Repr::Mixture(vec![(
            T::one(),
            BlockUpdate {
                block: local,
                table,
                null,
            },
        )]),
    })
}

/// `Γ_{I_m} = (1/|I_m|) Σ_{I ∈ I_m} Γ_I` with a frozen boundary.
#[derive(Debug, Clone)]
pub struct BlockSampler<T> {
    pub family: CubeFamily,
    pub block_kernels: Vec<Kernel<T>>,
    pub mixture: Kernel<T>,
    pub boundary: usize,
}

pub fn block_sampler<T: Real, S: LocalSpec<T> + ?Sized>(spec: &S, m: u64, boundary: usize) -> Result<BlockSampler<T>> {
    let lam = spec.universe().sites().subset(spec.free_sites());
    let family = cubes_intersecting(&lam, m)?;
    let free = spec.free_sites();
    let block_kernels = family
        .cubes
        .iter()
        .map(|c| {
            let global: Vec<usize> = c.members.iter().map(|&j| free[j]).collect();
            block_kernel(spec, &global, boundary)
        })
        .collect::<Result<Vec<_>>>()?;
    let w = vec![T::one() / T::count(block_kernels.len()); block_kernels.len()];
    let mixture = Kernel::mixture(&block_kernels, &w)?;
    Ok(BlockSampler {
        family,
        block_kernels,
        mixture,
        boundary,
    })
}

/// `max |q(y) K(z|y) − q(z) K(y|z)|`.
pub fn check_reversibility<T: Real>(q: &Distribution<T>, k: &Kernel<T>) -> Result<T> {
    if q.space() != k.space() {
        return Err(Error::SpaceMismatch);
    }
    let w = q.weights();
    let mut worst = T::zero();
    k.for_each_pair(|y, z| {
        if y < z {
            let d = (w[y] * k.entry(y, z) - w[z] * k.entry(z, y)).abs();
            worst = worst.max(d);
        }
    });
    Ok(worst)
}

/// `‖qK − q‖₁`.
pub fn stationarity_residual<T: Real>(q: &Distribution<T>, k: &Kernel<T>) -> Result<T> {
    let out = k.apply_weights(q.weights())?;
    Ok(out.iter().zip(q.weights()).map(|(a, b)| (*a - *b).abs()).sum())
}

/// `⟨(I − K) f, f⟩_π`.
pub fn dirichlet_form<T: Real>(k: &Kernel<T>, pi: &Distribution<T>, f: &[T]) -> Result<T> {
    if f.len() != pi.len() {
        return Err(Error::DimensionMismatch(pi.len(), f.len()));
    }
    let kf = k.apply_fn(f);
    Ok(pi
        .weights()
        .iter()
        .zip(f)
        .zip(&kf)
        .map(|((p, a), b)| *p * *a * (*a - *b))
        .sum())
}

/// `√(p/q)`, set to zero where `q` vanishes.
pub fn sqrt_density<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Vec<T> {
    p.weights()
        .iter()
        .zip(q.weights())
        .map(|(a, b)| if *b > T::zero() { (*a / *b).sqrt() } else { T::zero() })
        .collect()
}

/// `(1/n) E_p Σ_i (1 − A(p_i(·|Ȳ_i), q_i(·|Ȳ_i))²)`, the Dirichlet form of
/// `Γ` at `√(p/q)` in closed form.
pub fn dirichlet_closed_form<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    if !p.absolutely_continuous(q) {
        return Err(Error::SupportViolation("p charges a q-null configuration".into()));
    }
    let space = p.space();
    let (pw, qw) = (p.weights(), q.weights());
    let mut total = T::zero();
    for i in 0..space.n() {
        for_each_context(space, &[i], |_, ids| {
            let pm: T = ids.iter().map(|&x| pw[x]).sum();
            if pm <= T::zero() {
                return;
            }
            let qm: T = ids.iter().map(|&x| qw[x]).sum();
            let a: T = ids
                .iter()
                .map(|&x| ((pw[x] / pm) * (qw[x] / qm)).sqrt())
                .sum::<T>()
                .min(T::one());
            total = total + pm * (T::one() - a * a);
        });
    }
    Ok(total / T::count(space.n()))
}

/// The three terms of `D(p‖q) − D(pΓ_i‖q) = E D(p_i(·|Ȳ_i) ‖ q_i(·|Ȳ_i))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct EntropyDecay<T> {
    pub divergence: T,
    pub after_update: T,
    pub expected_site_divergence: T,
    pub residual: T,
}

pub fn entropy_decay_identity<T: Real>(p: &Distribution<T>, q: &Distribution<T>, i: usize) -> Result<EntropyDecay<T>> {
    let divergence = relative_entropy(p, q)?;
    if !divergence.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let after = site_kernel(q, i)?.apply(p)?;
    let after_update = relative_entropy(&after, q)?;
    let expected_site_divergence = avg_site_divergence(p, q, i)?;
    Ok(EntropyDecay {
        divergence,
        after_update,
        expected_site_divergence,
        residual: (divergence - after_update - expected_site_divergence).abs(),
    })
}

/// Worst one-step `W₂` contraction ratio observed over a set of pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ContractionReport<T> {
    /// `max W₂(rK, sK) / W₂(r, s)` with both distances at the solver optimum.
    pub worst_ratio: T,
    /// The same ratio with the numerator's value over the denominator's
    /// certified lower bound: a guaranteed upper bound on the true ratio.
    pub worst_certified_ratio: T,
    pub evaluated: usize,
    /// Pairs whose distance was too small to give a meaningful ratio.
    pub skipped: usize,
}

/// Measures `W₂(rK, sK) / W₂(r, s)` over `pairs`; pairs with
/// `W₂(r, s) ≤ min_distance` are skipped.
pub fn empirical_w2_contraction<T: Real>(
    k: &Kernel<T>,
    pairs: &[(Distribution<T>, Distribution<T>)],
    opts: W2Options<T>,
    min_distance: T,
) -> Result<ContractionReport<T>> {
    let mut report = ContractionReport {
        worst_ratio: T::zero(),
        worst_certified_ratio: T::zero(),
        evaluated: 0,
        skipped: 0,
    };
    for (r, s) in pairs {
        let before = w2_distance_with(r, s, opts)?;
        if before.value <= min_distance || before.lower_bound <= T::zero() {
            report.skipped += 1;
            continue;
        }
        let after = w2_distance_with(&k.apply(r)?, &k.apply(s)?, opts)?;
        report.worst_ratio = report.worst_ratio.max(after.value / before.value);
        report.worst_certified_ratio = report.worst_certified_ratio.max(after.value / before.lower_bound);
        report.evaluated += 1;
    }
    Ok(report)
}
