//! Dense probability measures on `X^Λ`: divergences, distances,
//! marginals, conditionals and the elementary inequalities between them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{xlogy_ratio, Real};
use crate::state_space::{ConfigId, ConfigSpace};

/// A probability vector over every configuration of a [`ConfigSpace`],
/// indexed by [`ConfigId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
#[serde(try_from = "DistributionRepr<T>", into = "DistributionRepr<T>")]
pub struct Distribution<T> {
    space: ConfigSpace,
    weights: Vec<T>,
}

#[derive(Serialize, Deserialize)]
#[serde(bound = "T: Real")]
struct DistributionRepr<T> {
    space: ConfigSpace,
    weights: Vec<T>,
}

impl<T: Real> TryFrom<DistributionRepr<T>> for Distribution<T> {
    type Error = Error;
    fn try_from(r: DistributionRepr<T>) -> Result<Self> {
        Distribution::new(r.space, r.weights)
    }
}

impl<T: Real> From<Distribution<T>> for DistributionRepr<T> {
    fn from(d: Distribution<T>) -> Self {
        DistributionRepr {
            space: d.space,
            weights: d.weights,
        }
    }
}

/// Tolerance on total mass for a vector of `len` weights.
fn mass_tol<T: Real>(len: usize) -> T {
    let rounding = T::epsilon() * T::count(len).sqrt() * T::lit(16.0);
    T::inequality_slack().max(rounding)
}

impl<T: Real> Distribution<T> {
    /// Validates non-negativity and unit mass.
    pub fn new(space: ConfigSpace, weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::DimensionMismatch(space.len(), weights.len()));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument(format!("invalid weight {w}")));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > mass_tol::<T>(weights.len()) {
            return Err(Error::InvalidArgument(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Self { space, weights })
    }

    /// Normalises arbitrary non-negative weights.
    pub fn from_unnormalized(space: ConfigSpace, mut weights: Vec<T>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::DimensionMismatch(space.len(), weights.len()));
        }
        if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
            return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if total <= T::zero() {
            return Err(Error::InvalidArgument("weights have zero total mass".into()));
        }
        for w in &mut weights {
            *w = *w / total;
        }
        Ok(Self { space, weights })
    }

    pub fn uniform(space: ConfigSpace) -> Self {
        let w = T::one() / T::count(space.len());
        let weights = vec![w; space.len()];
        Self { space, weights }
    }

    pub fn point_mass(space: ConfigSpace, id: ConfigId) -> Result<Self> {
        if id.0 >= space.len() {
            return Err(Error::InvalidArgument(format!("configuration id {} out of range", id.0)));
        }
        let mut weights = vec![T::zero(); space.len()];
        weights[id.0] = T::one();
        Ok(Self { space, weights })
    }

    /// The product measure `⊗_i marginals[i]`.
    pub fn product(space: ConfigSpace, marginals: &[Vec<T>]) -> Result<Self> {
        if marginals.len() != space.n() {
            return Err(Error::DimensionMismatch(space.n(), marginals.len()));
        }
        for m in marginals {
            if m.len() != space.q() {
                return Err(Error::DimensionMismatch(space.q(), m.len()));
            }
        }
        let weights = (0..space.len())
            .map(|id| {
                (0..space.n())
                    .map(|pos| marginals[pos][space.digit(id, pos)])
                    .fold(T::one(), |a, b| a * b)
            })
            .collect();
        Self::from_unnormalized(space, weights)
    }

    #[inline]
    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    #[inline]
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<T> {
        self.weights
    }

    #[inline]
    pub fn prob(&self, id: ConfigId) -> T {
        self.weights[id.0]
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Whether `self(x) > 0` implies `other(x) > 0`.
    pub fn absolutely_continuous(&self, other: &Self) -> bool {
        self.weights
            .iter()
            .zip(&other.weights)
            .all(|(a, b)| *a <= T::zero() || *b > T::zero())
    }

    pub fn has_full_support(&self) -> bool {
        self.weights.iter().all(|w| *w > T::zero())
    }

    /// `(1 - eps) self + eps other`.
    pub fn mix(&self, other: &Self, eps: T) -> Result<Self> {
        same_space(self, other)?;
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (T::one() - eps) * *a + eps * *b)
            .collect();
        Ok(Self {
            space: self.space.clone(),
            weights,
        })
    }

    /// Marginal on the listed positions, as a measure on the subspace.
    pub fn marginal(&self, positions: &[usize]) -> Result<Distribution<T>> {
        check_positions(&self.space, positions)?;
        let sub = self.space.subspace(positions)?;
        let inner = self.space.block_offsets(positions);
        let outer = self.space.block_offsets(&self.space.complement(positions));
        let weights = inner
            .iter()
            .map(|&o| outer.iter().map(|&c| self.weights[c + o]).sum())
            .collect();
        Ok(Distribution {
            space: sub,
            weights,
        })
    }

    /// Marginal on a single position as a plain vector over `X`.
    pub fn site_marginal(&self, pos: usize) -> Vec<T> {
        let q = self.space.q();
        let mut out = vec![T::zero(); q];
        for (id, w) in self.weights.iter().enumerate() {
            let a = self.space.digit(id, pos);
            out[a] = out[a] + *w;
        }
        out
    }

    /// Conditional law of the listed positions given the symbols that the
    /// configuration `context` carries outside them.
    pub fn conditional(&self, positions: &[usize], context: ConfigId) -> Result<ConditionalSlice<T>> {
        check_positions(&self.space, positions)?;
        if context.0 >= self.space.len() {
            return Err(Error::InvalidArgument("context id out of range".into()));
        }
        let base = self.space.clear(context.0, positions);
        let inner = self.space.block_offsets(positions);
        let raw: Vec<T> = inner.iter().map(|&o| self.weights[base + o]).collect();
        let mass: T = raw.iter().copied().sum();
        let outside = self.space.complement(positions);
        let context_symbols = outside.iter().map(|&p| self.space.digit(base, p)).collect();
        let weights = (mass > T::zero()).then(|| raw.iter().map(|w| *w / mass).collect());
        Ok(ConditionalSlice {
            target: positions.to_vec(),
            context: context_symbols,
            mass,
            weights,
        })
    }

    /// `q_i(x_i | x̄_i)` for the configuration `id`; `None` on a null context.
    #[inline]
    pub fn site_conditional_prob(&self, pos: usize, id: usize) -> Option<T> {
        let stride = self.space.stride(pos);
        let base = id - self.space.digit(id, pos) * stride;
        let mass: T = (0..self.space.q()).map(|a| self.weights[base + a * stride]).sum();
        (mass > T::zero()).then(|| self.weights[id] / mass)
    }
}

/// Conditional law `p_I(·|ȳ_I)`; `weights` is `None` when the conditioning
/// event is null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConditionalSlice<T> {
    /// Conditioned positions `I`, in subspace order.
    pub target: Vec<usize>,
    /// Symbols on the complement of `I`, in increasing position order.
    pub context: Vec<usize>,
    /// Probability of the conditioning event.
    pub mass: T,
    pub weights: Option<Vec<T>>,
}

impl<T: Real> ConditionalSlice<T> {
    pub fn is_defined(&self) -> bool {
        self.weights.is_some()
    }
}

/// The constant `α = min q_i(x_i|x̄_i)` over sites and `x ∈ supp q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AlphaConstant<T>(pub T);

impl<T: Real> AlphaConstant<T> {
    #[inline]
    pub fn value(self) -> T {
        self.0
    }
}

fn same_space<T>(r: &Distribution<T>, s: &Distribution<T>) -> Result<()> {
    if r.space != s.space {
        return Err(Error::SpaceMismatch);
    }
    Ok(())
}

fn check_positions(space: &ConfigSpace, positions: &[usize]) -> Result<()> {
    let mut seen = vec![false; space.n()];
    for &p in positions {
        if p >= space.n() {
            return Err(Error::InvalidArgument(format!("position {p} out of range")));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument(format!("position {p} repeated")));
        }
    }
    Ok(())
}

/// Variational distance `½ Σ |r − s|` of two weight vectors.
#[inline]
pub fn tv_weights<T: Real>(r: &[T], s: &[T]) -> T {
    r.iter().zip(s).map(|(a, b)| (*a - *b).abs()).sum::<T>() * T::lit(0.5)
}

/// Relative entropy `Σ r ln(r/s)` of two weight vectors (may be `+inf`).
#[inline]
pub fn kl_weights<T: Real>(r: &[T], s: &[T]) -> T {
    r.iter().zip(s).map(|(a, b)| xlogy_ratio(*a, *b)).sum()
}

/// Hellinger affinity `Σ √(r s)` of two weight vectors.
#[inline]
pub fn affinity_weights<T: Real>(r: &[T], s: &[T]) -> T {
    r.iter().zip(s).map(|(a, b)| (*a * *b).sqrt()).sum()
}

pub fn tv_distance<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<T> {
    same_space(r, s)?;
    Ok(tv_weights(&r.weights, &s.weights))
}

/// `D(r‖s)` in nats; `+inf` when `r` charges an `s`-null state.
pub fn relative_entropy<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<T> {
    same_space(r, s)?;
    Ok(kl_weights(&r.weights, &s.weights))
}

pub fn hellinger_affinity<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<T> {
    same_space(r, s)?;
    Ok(affinity_weights(&r.weights, &s.weights))
}

/// `H(r,s) = (Σ (√r − √s)²)^{1/2}`.
pub fn hellinger_distance<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<T> {
    same_space(r, s)?;
    let h2: T = r
        .weights
        .iter()
        .zip(&s.weights)
        .map(|(a, b)| {
            let d = a.sqrt() - b.sqrt();
            d * d
        })
        .sum();
    Ok(h2.sqrt())
}

/// `(tv², 1 − A²)`; the first never exceeds the second.
pub fn lemma1_gap<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<(T, T)> {
    let tv = tv_distance(r, s)?;
    let a = hellinger_affinity(r, s)?.min(T::one());
    Ok((tv * tv, T::one() - a * a))
}

/// `(tv², D/2)`, the two sides of Pinsker's inequality.
pub fn pinsker_gap<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<(T, T)> {
    let tv = tv_distance(r, s)?;
    let d = relative_entropy(r, s)?;
    Ok((tv * tv, d * T::lit(0.5)))
}

/// `(D(r‖s), (4/α_s)·tv²)` where `α_s` is the least positive weight of `s`.
pub fn lemma2_reverse_pinsker<T: Real>(r: &Distribution<T>, s: &Distribution<T>) -> Result<(T, T)> {
    let d = relative_entropy(r, s)?;
    if !d.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let alpha_s = s
        .weights
        .iter()
        .copied()
        .filter(|w| *w > T::zero())
        .fold(T::infinity(), T::min);
    let tv = tv_distance(r, s)?;
    Ok((d, T::lit(4.0) / alpha_s * tv * tv))
}

/// Visits each outside context of `block`: the callback receives the
/// offsets `c + o` for every inner offset `o`.
pub(crate) fn for_each_context(
    space: &ConfigSpace,
    block: &[usize],
    mut f: impl FnMut(usize, &[usize]),
) {
    let inner = space.block_offsets(block);
    let outer = space.block_offsets(&space.complement(block));
    let mut ids = vec![0usize; inner.len()];
    for &c in &outer {
        for (slot, &o) in ids.iter_mut().zip(&inner) {
            *slot = c + o;
        }
        f(c, &ids);
    }
}

/// `E_{Ȳ ~ p} D(p_I(·|Ȳ_I) ‖ q_I(·|Ȳ_I))`; `+inf` when a `q`-null context
/// carries `p`-mass or a conditional is not absolutely continuous.
pub fn expected_block_divergence<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    block: &[usize],
) -> Result<T> {
    same_space(p, q)?;
    check_positions(&p.space, block)?;
    let mut total = T::zero();
    for_each_context(&p.space, block, |_, ids| {
        let pm: T = ids.iter().map(|&x| p.weights[x]).sum();
        if pm <= T::zero() {
            return;
        }
        let qm: T = ids.iter().map(|&x| q.weights[x]).sum();
        if qm <= T::zero() {
            total = T::infinity();
            return;
        }
        // Σ p(x) ln( (p(x)/P) / (q(x)/Q) )
        let term: T = ids
            .iter()
            .map(|&x| xlogy_ratio(p.weights[x] / pm, q.weights[x] / qm) * pm)
            .sum();
        total = total + term;
    });
    Ok(total)
}

/// `E_{Ȳ ~ p} tv²(p_I(·|Ȳ_I), q_I(·|Ȳ_I))`.
pub fn expected_block_tv_sq<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    block: &[usize],
) -> Result<T> {
    same_space(p, q)?;
    check_positions(&p.space, block)?;
    let mut total = T::zero();
    let mut null = false;
    for_each_context(&p.space, block, |_, ids| {
        let pm: T = ids.iter().map(|&x| p.weights[x]).sum();
        if pm <= T::zero() {
            return;
        }
        let qm: T = ids.iter().map(|&x| q.weights[x]).sum();
        if qm <= T::zero() {
            null = true;
            return;
        }
        let tv = ids
            .iter()
            .map(|&x| (p.weights[x] / pm - q.weights[x] / qm).abs())
            .sum::<T>()
            * T::lit(0.5);
        total = total + pm * tv * tv;
    });
    if null {
        return Err(Error::ZeroMassContext);
    }
    Ok(total)
}

/// `E D(p_i(·|Ȳ_i) ‖ q_i(·|Ȳ_i))` with `Ȳ ~ p`.
pub fn avg_site_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>, i: usize) -> Result<T> {
    expected_block_divergence(p, q, &[i])
}

/// `E |p_i(·|Ȳ_i) − q_i(·|Ȳ_i)|²` with `Ȳ ~ p`.
pub fn avg_site_tv_sq<T: Real>(p: &Distribution<T>, q: &Distribution<T>, i: usize) -> Result<T> {
    expected_block_tv_sq(p, q, &[i])
}

/// `Σ_i E |p_i(·|Ȳ_i) − q_i(·|Ȳ_i)|²`.
pub fn sum_site_tv_sq<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    (0..p.space.n()).map(|i| avg_site_tv_sq(p, q, i)).sum()
}

/// `Σ_i E D(p_i(·|Ȳ_i) ‖ q_i(·|Ȳ_i))`.
pub fn sum_site_divergence<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<T> {
    (0..p.space.n()).map(|i| avg_site_divergence(p, q, i)).sum()
}

/// Both sides of the averaged chain rule for relative entropy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ChainExpansion<T> {
    pub divergence: T,
    /// `(1/n) Σ_i D(Y_i ‖ X_i)` over single-site marginals.
    pub marginal_term: T,
    /// `(1/n) Σ_i E D(p̄_i(·|Y_i) ‖ q̄_i(·|Y_i))`.
    pub conditional_term: T,
    pub residual: T,
}

/// Evaluates `D(p‖q)` directly and through the averaged chain rule.
pub fn chain_expansion_check<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<ChainExpansion<T>> {
    let divergence = relative_entropy(p, q)?;
    if !divergence.is_finite() {
        return Err(Error::InfiniteDivergence);
    }
    let n = p.space.n();
    let nt = T::count(n);
    let mut marginal_term = T::zero();
    let mut conditional_term = T::zero();
    for i in 0..n {
        marginal_term = marginal_term + kl_weights(&p.site_marginal(i), &q.site_marginal(i));
        let rest = p.space.complement(&[i]);
        conditional_term = conditional_term + expected_block_divergence(p, q, &rest)?;
    }
    marginal_term = marginal_term / nt;
    conditional_term = conditional_term / nt;
    Ok(ChainExpansion {
        divergence,
        marginal_term,
        conditional_term,
        residual: (divergence - marginal_term - conditional_term).abs(),
    })
}

/// Least single-site conditional probability over `supp q`.
pub fn alpha_constant<T: Real>(q: &Distribution<T>) -> Result<AlphaConstant<T>> {
    let space = &q.space;
    let mut alpha = T::infinity();
    for pos in 0..space.n() {
        for_each_context(space, &[pos], |_, ids| {
            let mass: T = ids.iter().map(|&x| q.weights[x]).sum();
            for &x in ids {
                if q.weights[x] > T::zero() {
                    alpha = alpha.min(q.weights[x] / mass);
                }
            }
        });
    }
    if !alpha.is_finite() {
        return Err(Error::InvalidArgument("measure has no positive weight".into()));
    }
    Ok(AlphaConstant(alpha.min(T::one())))
}
