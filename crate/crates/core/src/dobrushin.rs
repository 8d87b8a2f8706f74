//! The `ℓ₂` Dobrushin uniqueness machinery: the coupling matrix `A`, its
//! operator norm, the resulting transport-entropy constant, and end-to-end
//! checks of the entropy bounds that constant drives.

use rand::distributions::{Distribution as _, WeightedIndex};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{
    alpha_constant, for_each_context, relative_entropy, sum_site_divergence, sum_site_tv_sq, tv_distance,
    AlphaConstant, Distribution,
};
use crate::samplers::{dirichlet_form, gibbs_sampler, sqrt_density};
use crate::scalar::Real;
use crate::transport::{w2_distance_with, W2Options};

/// Above this many states condition checks sample instead of enumerating.
pub const EXHAUSTIVE_CAP: usize = 1 << 12;

/// One evaluated inequality `lhs ≤ rhs`; `slack = lhs − rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InequalityCheck<T> {
    pub lhs: T,
    pub rhs: T,
    pub slack: T,
}

impl<T: Real> InequalityCheck<T> {
    pub fn new(lhs: T, rhs: T) -> Self {
        // ∞ ≤ ∞ counts as satisfied
        let slack = if lhs == rhs { T::zero() } else { lhs - rhs };
        Self { lhs, rhs, slack }
    }

    pub fn holds(&self, tol: T) -> bool {
        self.slack <= tol
    }
}

/// `a_{k,i}`: the largest variational distance between site-`i`
/// conditionals whose contexts differ only at site `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct CouplingMatrixA<T> {
    pub entries: Vec<Vec<T>>,
}

impl<T: Real> CouplingMatrixA<T> {
    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, k: usize, i: usize) -> T {
        self.entries[k][i]
    }

    /// Principal submatrix on `positions`.
    pub fn minor(&self, positions: &[usize]) -> Self {
        Self {
            entries: positions
                .iter()
                .map(|&k| positions.iter().map(|&i| self.entries[k][i]).collect())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DobrushinReport<T> {
    /// `‖A‖₂`.
    pub norm: T,
    /// `‖A‖₁` (largest column sum), for display only.
    pub norm_l1: T,
    pub alpha: AlphaConstant<T>,
    /// `1/(1 − ‖A‖₂)²` when the condition holds.
    #[serde(rename = "C")]
    pub c: Option<T>,
    pub satisfied: bool,
}

/// Exact `A` by enumerating every pair of configurations that differ at one site.
pub fn coupling_matrix<T: Real>(q: &Distribution<T>) -> Result<CouplingMatrixA<T>> {
    if !q.has_full_support() {
        return Err(Error::SupportViolation(
            "the coupling matrix needs a measure with full support".into(),
        ));
    }
    let space = q.space();
    let (n, alph) = (space.n(), space.q());
    let w = q.weights();
    let cond = |id: usize, i: usize, out: &mut [T]| {
        let base = space.clear(id, &[i]);
        let st = space.stride(i);
        for (a, o) in out.iter_mut().enumerate() {
            *o = w[base + a * st];
        }
        let z: T = out.iter().copied().sum();
        out.iter_mut().for_each(|x| *x = *x / z);
    };
    let entries = (0..n)
        .into_par_iter()
        .map(|k| {
            let mut row = vec![T::zero(); n];
            let (mut ca, mut cb) = (vec![T::zero(); alph], vec![T::zero(); alph]);
            let sk = space.stride(k);
            for (i, slot) in row.iter_mut().enumerate() {
                if i == k {
                    continue;
                }
                let mut best = T::zero();
                for z in 0..space.len() {
                    if space.digit(z, i) != 0 || space.digit(z, k) != 0 {
                        continue;
                    }
                    for a in 0..alph {
                        cond(z + a * sk, i, &mut ca);
                        for b in a + 1..alph {
                            cond(z + b * sk, i, &mut cb);
                            best = best.max(crate::measures::tv_weights(&ca, &cb));
                        }
                    }
                }
                *slot = best;
            }
            row
        })
        .collect();
    Ok(CouplingMatrixA { entries })
}

/// `‖A‖₂` by power iteration on `AᵀA` to relative precision `1e-10`.
pub fn spectral_norm<T: Real>(a: &CouplingMatrixA<T>) -> T {
    linalg::spectral_norm(&a.entries, T::lit(1e-10), 100_000)
}

pub fn dobrushin_report<T: Real>(q: &Distribution<T>) -> Result<DobrushinReport<T>> {
    let a = coupling_matrix(q)?;
    let norm = spectral_norm(&a);
    let satisfied = norm < T::one();
    Ok(DobrushinReport {
        norm,
        norm_l1: linalg::max_column_sum(&a.entries),
        alpha: alpha_constant(q)?,
        c: satisfied.then(|| T::one() / ((T::one() - norm) * (T::one() - norm))),
        satisfied,
    })
}

/// `C = 1/(1 − ‖A‖₂)²`.
pub fn theorem2_constant<T: Real>(report: &DobrushinReport<T>) -> Result<T> {
    report.c.ok_or_else(|| {
        Error::NotApplicable(format!(
            "‖A‖₂ = {} is not below 1",
            report.norm.to_f64_lossy()
        ))
    })
}

/// How the `(I, ȳ_I)` pairs of the transport condition are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConditionOptions<T> {
    pub w2: W2Options<T>,
    /// Sample size used when the space exceeds [`EXHAUSTIVE_CAP`].
    pub samples: usize,
    pub seed: u64,
    /// Sampled blocks are redrawn until `|X|^|I|` is at most this.
    pub max_block_states: usize,
}

impl<T: Real> Default for ConditionOptions<T> {
    fn default() -> Self {
        Self {
            w2: W2Options::default(),
            samples: 256,
            seed: 0,
            max_block_states: 256,
        }
    }
}

/// One conditional transport inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConditionCase<T> {
    pub block: Vec<usize>,
    /// Configuration with the outside symbols `ȳ_I` and zeros on `I`.
    pub context: usize,
    /// `W₂²` at the solver's coupling (an upper bound on the optimum).
    pub lhs: T,
    pub rhs: T,
    pub solver_gap: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ConditionReport<T> {
    pub worst_slack: T,
    pub worst: Option<ConditionCase<T>>,
    pub checked: usize,
    pub exhaustive: bool,
}

/// `|p_i(·|x̄_i) − q_i(·|x̄_i)|²`.
fn site_tv_sq<T: Real>(p: &Distribution<T>, q: &Distribution<T>, i: usize, x: usize) -> T {
    let space = p.space();
    let base = space.clear(x, &[i]);
    let st = space.stride(i);
    let ids = (0..space.q()).map(|a| base + a * st);
    let pm: T = ids.clone().map(|y| p.weights()[y]).sum();
    let qm: T = ids.clone().map(|y| q.weights()[y]).sum();
    let tv = ids
        .map(|y| (p.weights()[y] / pm - q.weights()[y] / qm).abs())
        .sum::<T>()
        * T::lit(0.5);
    tv * tv
}

fn condition_case<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    c: T,
    block: &[usize],
    context: usize,
    opts: W2Options<T>,
) -> Result<Option<ConditionCase<T>>> {
    let space = p.space();
    let ids: Vec<usize> = space.block_offsets(block).iter().map(|o| context + o).collect();
    let pm: T = ids.iter().map(|&x| p.weights()[x]).sum();
    if pm <= T::zero() {
        return Ok(None);
    }
    let qm: T = ids.iter().map(|&x| q.weights()[x]).sum();
    if qm <= T::zero() {
        return Err(Error::SupportViolation("a q-null context carries p-mass".into()));
    }
    let sub = space.subspace(block)?;
    let pc = Distribution::from_unnormalized(sub.clone(), ids.iter().map(|&x| p.weights()[x]).collect())?;
    let qc = Distribution::from_unnormalized(sub, ids.iter().map(|&x| q.weights()[x]).collect())?;
    let w2 = w2_distance_with(&pc, &qc, opts)?;
    let mut expected = T::zero();
    for &x in &ids {
        let px = p.weights()[x];
        if px > T::zero() {
            let s: T = block.iter().map(|&i| site_tv_sq(p, q, i, x)).sum();
            expected = expected + px / pm * s;
        }
    }
    Ok(Some(ConditionCase {
        block: block.to_vec(),
        context,
        lhs: w2.value * w2.value,
        rhs: c * expected,
        solver_gap: w2.gap,
    }))
}

/// Checks `W₂²(p_I(·|ȳ_I), q_I(·|ȳ_I)) ≤ C·E[Σ_{i∈I} |p_i − q_i|² | Ȳ_I = ȳ_I]`.
///
/// `subsets = None` sweeps every non-empty `I` and every context when the
/// space has at most [`EXHAUSTIVE_CAP`] states, and otherwise a seeded
/// sample of `(I, ȳ_I)` pairs drawn from `p` with `|X|^|I|` capped by
/// `max_block_states`. Given subsets are checked
/// against every context of positive `p`-mass. Contexts of zero `p`-mass
/// are skipped.
pub fn verify_condition_1_3<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    c: T,
    subsets: Option<&[Vec<usize>]>,
    opts: ConditionOptions<T>,
) -> Result<ConditionReport<T>> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let space = p.space();
    let n = space.n();
    let exhaustive = subsets.is_some() || space.len() <= EXHAUSTIVE_CAP;
    let mut cases: Vec<(Vec<usize>, usize)> = Vec::new();
    if exhaustive {
        let blocks: Vec<Vec<usize>> = match subsets {
            Some(s) => s
                .iter()
                .map(|b| {
                    let mut b = b.clone();
                    b.sort_unstable();
                    b
                })
                .collect(),
            None => (1u64..1 << n)
                .map(|mask| (0..n).filter(|i| mask >> i & 1 == 1).collect())
                .collect(),
        };
        for b in blocks {
            if b.is_empty() || b.iter().any(|&i| i >= n) || b.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument("subsets must be non-empty sets of positions".into()));
            }
            for_each_context(space, &b, |ctx, _| cases.push((b.clone(), ctx)));
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let mut cdf = Vec::with_capacity(space.len());
        let mut acc = T::zero();
        for w in p.weights() {
            acc = acc + *w;
            cdf.push(acc.to_f64_lossy());
        }
        let total = acc.to_f64_lossy();
        for _ in 0..opts.samples {
            // uniform over non-empty subsets with a tractable block size:
            // the size is drawn with weight C(n, k), then the positions
            let max_len = (1..=n)
                .take_while(|&k| (space.q() as f64).powi(k as i32) <= opts.max_block_states as f64)
                .last()
                .unwrap_or(1);
            let log_binom = |k: usize| -> f64 { (0..k).map(|j| ((n - j) as f64 / (j + 1) as f64).ln()).sum() };
            let top = log_binom(max_len.min(n / 2).max(1));
            let size_weights: Vec<f64> = (1..=max_len).map(|k| (log_binom(k) - top).exp()).collect();
            let sizes = WeightedIndex::new(&size_weights).expect("positive size weights");
            let size = sizes.sample(&mut rng) + 1;
            let mut block = sample(&mut rng, n, size).into_vec();
            block.sort_unstable();
            let u = rng.gen::<f64>() * total;
            let x = cdf.partition_point(|&v| v <= u).min(space.len() - 1);
            let ctx = space.clear(x, &block);
            cases.push((block, ctx));
        }
    }
    let results: Vec<Option<ConditionCase<T>>> = cases
        .par_iter()
        .map(|(b, ctx)| condition_case(p, q, c, b, *ctx, opts.w2))
        .collect::<Result<_>>()?;
    let mut report = ConditionReport {
        worst_slack: T::neg_infinity(),
        worst: None,
        checked: 0,
        exhaustive,
    };
    for case in results.into_iter().flatten() {
        report.checked += 1;
        let slack = case.lhs - case.rhs;
        if slack > report.worst_slack {
            report.worst_slack = slack;
            report.worst = Some(case);
        }
    }
    Ok(report)
}

/// Both lines of the entropy bound: `D ≤ (4C/α)·Σ E|p_i − q_i|²` and
/// `D ≤ (2C/α)·Σ E D(p_i‖q_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Theorem1Check<T> {
    pub divergence: T,
    pub alpha: T,
    /// `None` when `p` is not absolutely continuous w.r.t. `q`.
    pub middle: Option<T>,
    pub last: T,
    pub first_line: Option<InequalityCheck<T>>,
    pub second_line: InequalityCheck<T>,
}

pub fn verify_theorem1<T: Real>(p: &Distribution<T>, q: &Distribution<T>, c: T) -> Result<Theorem1Check<T>> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let alpha = alpha_constant(q)?.value();
    let divergence = relative_entropy(p, q)?;
    let last = T::lit(2.0) * c / alpha * sum_site_divergence(p, q)?;
    let middle = if p.absolutely_continuous(q) {
        Some(T::lit(4.0) * c / alpha * sum_site_tv_sq(p, q)?)
    } else {
        None
    };
    Ok(Theorem1Check {
        divergence,
        alpha,
        middle,
        last,
        first_line: middle.map(|m| InequalityCheck::new(divergence, m)),
        second_line: InequalityCheck::new(divergence, last),
    })
}

fn require_ac<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<()> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    if !p.absolutely_continuous(q) {
        return Err(Error::SupportViolation("p is not absolutely continuous w.r.t. q".into()));
    }
    Ok(())
}

/// One Gibbs-sampler step contracts entropy:
/// `D(pΓ‖q) ≤ (1 − α/(2nC))·D(p‖q)`.
pub fn verify_corollary1<T: Real>(p: &Distribution<T>, q: &Distribution<T>, c: T) -> Result<InequalityCheck<T>> {
    require_ac(p, q)?;
    let alpha = alpha_constant(q)?.value();
    let n = T::count(q.space().n());
    let gamma = gibbs_sampler(q)?;
    let stepped = gamma.mixture.apply(p)?;
    let rate = T::one() - alpha / (T::lit(2.0) * n * c);
    Ok(InequalityCheck::new(
        relative_entropy(&stepped, q)?,
        rate * relative_entropy(p, q)?,
    ))
}

/// `(1/n)·D(pΓ‖q) ≤ (4C/α)·E_Γ(√(p/q), √(p/q))`.
pub fn verify_corollary2<T: Real>(p: &Distribution<T>, q: &Distribution<T>, c: T) -> Result<InequalityCheck<T>> {
    require_ac(p, q)?;
    let alpha = alpha_constant(q)?.value();
    let n = T::count(q.space().n());
    let gamma = gibbs_sampler(q)?;
    let stepped = gamma.mixture.apply(p)?;
    let energy = dirichlet_form(&gamma.mixture, q, &sqrt_density(p, q))?;
    Ok(InequalityCheck::new(
        relative_entropy(&stepped, q)? / n,
        T::lit(4.0) * c / alpha * energy,
    ))
}

/// `|p − q|² ≤ (2/(|X|α)²)^{n + log₂ n}·Σ_i E|p_i − q_i|²`.
pub fn lemma4_bound<T: Real>(p: &Distribution<T>, q: &Distribution<T>) -> Result<InequalityCheck<T>> {
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let alpha = alpha_constant(q)?.value();
    let space = q.space();
    let n = T::count(space.n());
    let xa = T::count(space.q()) * alpha;
    let factor = (T::lit(2.0) / (xa * xa)).powf(n + n.log2());
    let tv = tv_distance(p, q)?;
    Ok(InequalityCheck::new(tv * tv, factor * sum_site_tv_sq(p, q)?))
}
