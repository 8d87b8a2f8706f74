//! Strong mixing on finite lattice boxes: the measured coupling function
//! `φ`, its lattice row-sum `‖Φ‖`, the block constant `Θ_m`, the
//! separating-cube matrix `D`, and checks of the block-sampler bounds.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dobrushin::{verify_theorem1, InequalityCheck, Theorem1Check};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::{alpha_constant, expected_block_tv_sq, for_each_context, tv_weights, Distribution};
use crate::samplers::{block_sampler, empirical_w2_contraction, free_space, ContractionReport};
use crate::scalar::Real;
use crate::spec::LocalSpec;
use crate::state_space::{cubes_intersecting, rho_unchecked, ConfigSpace, SiteSet};
use crate::transport::{w2_distance_with, W2Options};

/// Largest `R` scanned when minimising over the split radius.
pub const R_SCAN_CAP: u64 = 64;
/// Largest cube side scanned for the admissible `m₀`.
pub const M_SCAN_CAP: u64 = 4096;
/// Universes up to this many positions are enumerated exhaustively.
const EXHAUSTIVE_UNIVERSE: usize = 20;

/// `φ(r) = K·e^{−γr}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AnalyticPhi<T> {
    #[serde(rename = "K")]
    pub k: T,
    pub gamma: T,
}

impl<T: Real> AnalyticPhi<T> {
    pub fn at(&self, r: u64) -> T {
        self.k * (-self.gamma * T::lit(r as f64)).exp()
    }
}

/// Per-distance maxima of the block-conditional sensitivity to a single
/// outside flip, optionally combined with an analytic envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MixingProfile<T> {
    /// `(r, φ(r))`, increasing in `r`.
    pub phi: Vec<(u64, T)>,
    pub analytic: Option<AnalyticPhi<T>>,
    /// Number of `(V, flip, M)` triples evaluated.
    pub triples: usize,
    /// Whether every `V ⊆ Λ` and every outside context was covered.
    pub exhaustive: bool,
}

impl<T: Real> MixingProfile<T> {
    pub fn from_values(phi: Vec<(u64, T)>) -> Self {
        let mut phi = phi;
        phi.sort_by_key(|e| e.0);
        Self {
            phi,
            analytic: None,
            triples: 0,
            exhaustive: false,
        }
    }

    pub fn analytic(k: T, gamma: T) -> Self {
        Self {
            phi: Vec::new(),
            analytic: Some(AnalyticPhi { k, gamma }),
            triples: 0,
            exhaustive: false,
        }
    }

    pub fn empirical(&self, r: u64) -> T {
        self.phi
            .binary_search_by_key(&r, |e| e.0)
            .map(|i| self.phi[i].1)
            .unwrap_or(T::zero())
    }

    /// The larger of the measured and the analytic value.
    pub fn value(&self, r: u64) -> T {
        let a = self.analytic.map(|f| f.at(r)).unwrap_or(T::zero());
        self.empirical(r).max(a)
    }

    /// Largest distance with a recorded value.
    pub fn observed_radius(&self) -> u64 {
        self.phi.last().map(|e| e.0).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    /// Number of sampled `(V, context, flip)` items when not exhaustive.
    pub budget: usize,
    pub seed: u64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self { budget: 4096, seed: 0 }
    }
}

struct SubsetTables {
    /// Positions in the universe of each non-empty `M ⊆ V`.
    members: Vec<Vec<usize>>,
    /// `proj[M][v]`: index in `X^M` of the `V`-configuration `v`.
    proj: Vec<Vec<usize>>,
}

fn subset_tables(v: &[usize], q: usize) -> SubsetTables {
    let size = q.pow(v.len() as u32);
    let mut members = Vec::new();
    let mut proj = Vec::new();
    for mask in 1usize..1 << v.len() {
        let sel: Vec<usize> = (0..v.len()).filter(|j| mask >> j & 1 == 1).collect();
        members.push(sel.iter().map(|&j| v[j]).collect());
        proj.push(
            (0..size)
                .map(|idx| {
                    let mut out = 0;
                    let mut mul = 1;
                    for &j in &sel {
                        out += (idx / q.pow(j as u32)) % q * mul;
                        mul *= q;
                    }
                    out
                })
                .collect(),
        );
    }
    SubsetTables { members, proj }
}

fn marginal<T: Real>(cond: &[T], proj: &[usize], out: &mut [T]) {
    out.iter_mut().for_each(|x| *x = T::zero());
    for (v, w) in cond.iter().enumerate() {
        out[proj[v]] = out[proj[v]] + *w;
    }
}

/// Records `|q_M(·|ȳ_V) − q_M(·|z̄_V)|` for every `M ⊆ V` into `best`, binned by `ρ(k, M)`.
fn record<T: Real>(
    universe: &ConfigSpace,
    tables: &SubsetTables,
    k: usize,
    a: &[T],
    b: &[T],
    best: &mut BTreeMap<u64, T>,
    buf: (&mut Vec<T>, &mut Vec<T>),
) -> usize {
    let q = universe.q();
    let sites = universe.sites();
    let ks = sites.site(k);
    for (members, proj) in tables.members.iter().zip(&tables.proj) {
        let len = q.pow(members.len() as u32);
        buf.0.resize(len, T::zero());
        buf.1.resize(len, T::zero());
        marginal(a, proj, buf.0);
        marginal(b, proj, buf.1);
        let tv = tv_weights(buf.0, buf.1);
        let r = members
            .iter()
            .map(|&p| rho_unchecked(ks, sites.site(p)))
            .min()
            .unwrap_or(0);
        let e = best.entry(r).or_insert(T::zero());
        *e = e.max(tv);
    }
    tables.members.len()
}

/// Measures `φ(r) = max |q_M(·|ȳ_V) − q_M(·|z̄_V)|` over `M ⊆ V ⊆ Λ` and
/// contexts differing at one site `k ∉ V`, with `r = ρ(k, M)`.
///
/// Contexts range over the whole universe outside `V` (the free sites
/// not in `V` and the collar). Every `V` and context is enumerated when
/// `|Λ| ≤ 9`, `|X| = 2` and the universe is small enough; otherwise
/// `opts.budget` seeded `(V, context, flip)` items are drawn.
pub fn estimate_phi<T: Real, S: LocalSpec<T> + ?Sized>(spec: &S, opts: PhiOptions) -> Result<MixingProfile<T>> {
    let universe = spec.universe();
    let free = spec.free_sites();
    let q = universe.q();
    let exhaustive = free.len() <= 9 && q == 2 && universe.n() <= EXHAUSTIVE_UNIVERSE;

    let partials: Vec<(BTreeMap<u64, T>, usize)> = if exhaustive {
        let mut subsets: Vec<Vec<usize>> = (1usize..1 << free.len())
            .map(|mask| (0..free.len()).filter(|j| mask >> j & 1 == 1).map(|j| free[j]).collect())
            .collect();
        // the complement of V must be non-empty to flip anything
        subsets.retain(|v| v.len() < universe.n());
        subsets
            .par_iter()
            .map(|v| -> Result<(BTreeMap<u64, T>, usize)> {
                let tables = subset_tables(v, q);
                let comp = universe.complement(v);
                let outer = universe.block_offsets(&comp);
                let conds = outer
                    .iter()
                    .map(|&c| spec.block_conditional(v, c))
                    .collect::<Result<Vec<_>>>()?;
                let mut best = BTreeMap::new();
                let mut count = 0;
                let (mut b0, mut b1) = (Vec::new(), Vec::new());
                for ci in 0..outer.len() {
                    let mut place = 1;
                    for &k in &comp {
                        let a = ci / place % q;
                        for b in a + 1..q {
                            let cj = ci + (b - a) * place;
                            count += record(universe, &tables, k, &conds[ci], &conds[cj], &mut best, (&mut b0, &mut b1));
                        }
                        place *= q;
                    }
                }
                Ok((best, count))
            })
            .collect::<Result<_>>()?
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        if free.is_empty() || universe.n() < 2 {
            return Ok(MixingProfile::from_values(Vec::new()));
        }
        let items: Vec<(Vec<usize>, usize, usize, usize)> = (0..opts.budget)
            .map(|_| {
                let v = loop {
                    let v: Vec<usize> = free.iter().copied().filter(|_| rng.gen::<bool>()).collect();
                    if !v.is_empty() && v.len() < universe.n() {
                        break v;
                    }
                };
                let comp = universe.complement(&v);
                let mut ctx = 0;
                for &p in &comp {
                    ctx += rng.gen_range(0..q) * universe.stride(p);
                }
                let k = comp[rng.gen_range(0..comp.len())];
                let a = universe.digit(ctx, k);
                let b = (a + rng.gen_range(1..q)) % q;
                (v, ctx, k, b)
            })
            .collect();
        items
            .par_iter()
            .map(|(block, ctx, k, b)| -> Result<(BTreeMap<u64, T>, usize)> {
                let (ctx, k, b) = (*ctx, *k, *b);
                let tables = subset_tables(block, q);
                let ca = spec.block_conditional(block, ctx)?;
                let cb = spec.block_conditional(block, universe.with_digit(ctx, k, b))?;
                let mut best = BTreeMap::new();
                let count = record(universe, &tables, k, &ca, &cb, &mut best, (&mut Vec::new(), &mut Vec::new()));
                Ok((best, count))
            })
            .collect::<Result<_>>()?
    };
    let mut best: BTreeMap<u64, T> = BTreeMap::new();
    let mut triples = 0;
    for (part, count) in partials {
        triples += count;
        for (r, v) in part {
            let e = best.entry(r).or_insert(T::zero());
            *e = e.max(v);
        }
    }
    Ok(MixingProfile {
        phi: best.into_iter().collect(),
        analytic: None,
        triples,
        exhaustive,
    })
}

/// `#{i ∈ Z^d : ρ(0, i) = r} = (2r+1)^d − (2r−1)^d` for `r ≥ 1`.
pub fn shell_count(r: u64, d: usize) -> u128 {
    let d = d as u32;
    (2 * r as u128 + 1).pow(d) - (2 * r as u128 - 1).pow(d)
}

/// `Σ_{r > from} w(r)·K e^{−γr}` summed until negligible, plus a geometric
/// bound on what is left.
fn analytic_tail<T: Real>(f: &AnalyticPhi<T>, from: u64, weight: impl Fn(u64) -> T) -> Result<T> {
    if !(f.gamma > T::zero()) || f.k < T::zero() {
        return Err(Error::InvalidArgument(
            "analytic φ must have K ≥ 0 and γ > 0 to be summable".into(),
        ));
    }
    if f.k == T::zero() {
        return Ok(T::zero());
    }
    let mut acc = T::zero();
    let mut r = from + 1;
    let mut prev = weight(r) * f.at(r);
    acc = acc + prev;
    loop {
        r += 1;
        let term = weight(r) * f.at(r);
        acc = acc + term;
        let ratio = if prev > T::zero() { term / prev } else { T::zero() };
        if term <= T::lit(1e-18) * acc && ratio < T::one() {
            // the ratio of successive terms only shrinks from here on
            return Ok(acc + term * ratio / (T::one() - ratio));
        }
        if r > from + 1_000_000 {
            return Err(Error::NotConverged {
                iterations: 1_000_000,
                best_value: acc.to_f64_lossy(),
                gap: term.to_f64_lossy(),
                best_disagreement: Vec::new(),
            });
        }
        prev = term;
    }
}

/// `‖Φ‖ = Σ_{i ≠ 0} φ(ρ(0, i))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhiNorm<T> {
    pub value: T,
    /// Shells up to this radius are summed term by term.
    pub radius: u64,
    pub tail: T,
    /// Without an analytic envelope, `φ` is taken as 0 beyond `radius`,
    /// so the value may undercount.
    pub optimistic: bool,
}

pub fn phi_norm<T: Real>(profile: &MixingProfile<T>, d: usize, radius: u64) -> Result<PhiNorm<T>> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let head: T = (1..=radius)
        .map(|r| T::lit(shell_count(r, d) as f64) * profile.value(r))
        .sum();
    let (tail, optimistic) = match &profile.analytic {
        Some(f) => (analytic_tail(f, radius, |r| T::lit(shell_count(r, d) as f64))?, false),
        None => (T::zero(), true),
    };
    Ok(PhiNorm {
        value: head + tail,
        radius,
        tail,
        optimistic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThetaParams<T> {
    pub m: u64,
    #[serde(rename = "R_star")]
    pub r_star: u64,
    pub theta: T,
    pub norm: T,
    /// `Θ_m < 1`.
    pub usable: bool,
    pub optimistic: bool,
}

/// `2d·Σ_{r ≥ R} (2r+1)^{d−1} φ(r)` for every `R ∈ [1, R_SCAN_CAP]`.
fn tails<T: Real>(profile: &MixingProfile<T>, d: usize) -> Result<Vec<T>> {
    let w = |r: u64| T::lit(((2 * r + 1) as f64).powi(d as i32 - 1));
    let beyond = match &profile.analytic {
        Some(f) => analytic_tail(f, R_SCAN_CAP, w)?,
        None => T::zero(),
    };
    let mut out = vec![T::zero(); R_SCAN_CAP as usize + 2];
    out[R_SCAN_CAP as usize + 1] = beyond;
    for r in (1..=R_SCAN_CAP).rev() {
        out[r as usize] = out[r as usize + 1] + w(r) * profile.value(r);
    }
    let c = T::lit(2.0 * d as f64);
    Ok(out.into_iter().map(|x| x * c).collect())
}

/// `Θ_m = min_R [‖Φ‖·dR/m + 2d·Σ_{r≥R} (2r+1)^{d−1} φ(r)]` over `R ∈ [1, 64]`.
pub fn theta_m<T: Real>(profile: &MixingProfile<T>, d: usize, m: u64) -> Result<ThetaParams<T>> {
    if m == 0 {
        return Err(Error::InvalidArgument("cube side must be at least 1".into()));
    }
    let norm = phi_norm(profile, d, R_SCAN_CAP)?;
    let tail = tails(profile, d)?;
    theta_from(norm, &tail, d, m)
}

fn theta_from<T: Real>(norm: PhiNorm<T>, tail: &[T], d: usize, m: u64) -> Result<ThetaParams<T>> {
    let mut best = (T::infinity(), 1);
    for r in 1..=R_SCAN_CAP {
        let v = norm.value * T::lit((d as u64 * r) as f64 / m as f64) + tail[r as usize];
        if v < best.0 {
            best = (v, r);
        }
    }
    Ok(ThetaParams {
        m,
        r_star: best.1,
        theta: best.0,
        norm: norm.value,
        usable: best.0 < T::one(),
        optimistic: norm.optimistic,
    })
}

/// The finite-range variant `‖Φ‖·dR/m` for a specification of range `R`.
pub fn theta_finite_range<T: Real>(profile: &MixingProfile<T>, d: usize, m: u64, range: u64) -> Result<T> {
    let norm = phi_norm(profile, d, R_SCAN_CAP)?;
    Ok(norm.value * T::lit((d as u64 * range) as f64 / m as f64))
}

/// `D = (φ(ρ(k,i))·#{I ∈ I_m : i ∈ I, k ∉ I})_{k,i ∈ Λ}` and its bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DMatrixReport<T> {
    pub entries: Vec<Vec<T>>,
    /// Separating-cube counts behind the entries.
    pub counts: Vec<Vec<usize>>,
    pub norm: T,
    /// `m^d·Θ_m`.
    pub bound: T,
    pub theta: ThetaParams<T>,
    /// Every count is at most `min(d·m^{d−1}·ρ(k,i), m^d)`.
    pub entrywise_ok: bool,
    /// `max (d_{k,i} − m^d φ(ρ) min(dρ/m, 1))`.
    pub entrywise_worst_slack: T,
    pub norm_ok: bool,
}

pub fn d_matrix_norm_bound<T: Real>(profile: &MixingProfile<T>, m: u64, lattice: &SiteSet) -> Result<DMatrixReport<T>> {
    let d = lattice.dim();
    let family = cubes_intersecting(lattice, m)?;
    let n = lattice.len();
    let md = family.coverage();
    let mut entries = vec![vec![T::zero(); n]; n];
    let mut counts = vec![vec![0usize; n]; n];
    let mut entrywise_ok = true;
    let mut worst = T::neg_infinity();
    for k in 0..n {
        for i in 0..n {
            let rho = rho_unchecked(lattice.site(k), lattice.site(i));
            let c = if k == i { 0 } else { family.separating_count(i, k) };
            counts[k][i] = c;
            let phi = if k == i { T::zero() } else { profile.value(rho) };
            entries[k][i] = phi * T::count(c);
            let cap = (d * (m as usize).pow(d as u32 - 1) * rho as usize).min(md);
            entrywise_ok &= c <= cap;
            let bound = T::count(md) * phi * (T::lit((d as u64 * rho) as f64 / m as f64)).min(T::one());
            worst = worst.max(entries[k][i] - bound);
        }
    }
    let norm = linalg::spectral_norm(&entries, T::lit(1e-12), 100_000);
    let theta = theta_m(profile, d, m)?;
    let bound = T::count(md) * theta.theta;
    Ok(DMatrixReport {
        entries,
        counts,
        norm,
        bound,
        theta,
        entrywise_ok,
        entrywise_worst_slack: worst,
        norm_ok: norm <= bound * (T::one() + T::lit(1e-9)),
    })
}

/// `Σ_I E W₂²(p_B(·|Ȳ_B), q_B(·|Ȳ_B))` over the given blocks, at the
/// solver optimum; also returns the largest solver gap.
fn sum_block_w2_sq<T: Real>(
    p: &Distribution<T>,
    q: &Distribution<T>,
    blocks: &[Vec<usize>],
    opts: W2Options<T>,
) -> Result<(T, T)> {
    let space = p.space();
    let parts: Vec<(T, T)> = blocks
        .par_iter()
        .map(|b| -> Result<(T, T)> {
            let sub = space.subspace(b)?;
            let mut ctxs = Vec::new();
            for_each_context(space, b, |_, ids| ctxs.push(ids.to_vec()));
            let mut total = T::zero();
            let mut gap = T::zero();
            for ids in ctxs {
                let pw: Vec<T> = ids.iter().map(|&x| p.weights()[x]).collect();
                let pm: T = pw.iter().copied().sum();
                if pm <= T::zero() {
                    continue;
                }
                let qw: Vec<T> = ids.iter().map(|&x| q.weights()[x]).collect();
                if qw.iter().copied().sum::<T>() <= T::zero() {
                    return Err(Error::SupportViolation("a q-null context carries p-mass".into()));
                }
                let pc = Distribution::from_unnormalized(sub.clone(), pw)?;
                let qc = Distribution::from_unnormalized(sub.clone(), qw)?;
                let w = w2_distance_with(&pc, &qc, opts)?;
                total = total + pm * w.value * w.value;
                gap = gap.max(w.gap);
            }
            Ok((total, gap))
        })
        .collect::<Result<_>>()?;
    Ok(parts
        .into_iter()
        .fold((T::zero(), T::zero()), |(a, g), (b, h)| (a + b, g.max(h))))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AuxReport<T> {
    pub theta: ThetaParams<T>,
    /// `|I_m|`.
    pub cubes: usize,
    /// `W₂²(p_Λ, q_Λ(·|ȳ_Λ))`.
    pub lhs: T,
    /// `(1/m^d)·(1−Θ_m)^{−2}·Σ_I E W₂²(p_{I∩Λ}, q_{I∩Λ})`.
    pub mid: T,
    /// `(1−Θ_m)^{−2}·Σ_I E |p_{I∩Λ} − q_{I∩Λ}|²`.
    pub rhs: T,
    pub first: InequalityCheck<T>,
    pub second: InequalityCheck<T>,
    /// `W₂²(p_Λ, p_Λ Γ_{I_m}) ≤ (m^d/N²)·Σ_I E W₂²(p_{I∩Λ}, q_{I∩Λ})`.
    pub one_step: InequalityCheck<T>,
    /// Largest certified gap among the transport solves.
    pub solver_gap: T,
}

/// Checks both inequalities of the block-sampler transport bound and the
/// one-step estimate behind it, for `p` on `X^Λ` and boundary `ȳ_Λ`.
pub fn verify_aux_theorem<T: Real, S: LocalSpec<T> + ?Sized>(
    p: &Distribution<T>,
    spec: &S,
    boundary: usize,
    m: u64,
    profile: &MixingProfile<T>,
    opts: W2Options<T>,
) -> Result<AuxReport<T>> {
    let space = free_space(spec)?;
    if p.space() != &space {
        return Err(Error::SpaceMismatch);
    }
    let lattice = space.sites().clone();
    let d = lattice.dim();
    let theta = theta_m(profile, d, m)?;
    if !theta.usable {
        return Err(Error::NotApplicable(format!(
            "Θ_m = {} is not below 1 for m = {m}",
            theta.theta.to_f64_lossy()
        )));
    }
    let q = spec.free_conditional(boundary)?;
    let sampler = block_sampler(spec, m, boundary)?;
    let blocks: Vec<Vec<usize>> = sampler.family.cubes.iter().map(|c| c.members.clone()).collect();
    let n_cubes = T::count(blocks.len());
    let md = T::count(sampler.family.coverage());
    let factor = T::one() / ((T::one() - theta.theta) * (T::one() - theta.theta));

    let whole = w2_distance_with(p, &q, opts)?;
    let (sum_w2, gap) = sum_block_w2_sq(p, &q, &blocks, opts)?;
    let mut sum_tv = T::zero();
    for b in &blocks {
        sum_tv = sum_tv + expected_block_tv_sq(p, &q, b)?;
    }
    let step = w2_distance_with(p, &sampler.mixture.apply(p)?, opts)?;

    let lhs = whole.value * whole.value;
    let mid = factor * sum_w2 / md;
    let rhs = factor * sum_tv;
    Ok(AuxReport {
        theta,
        cubes: blocks.len(),
        lhs,
        mid,
        rhs,
        first: InequalityCheck::new(lhs, mid),
        second: InequalityCheck::new(mid, rhs),
        one_step: InequalityCheck::new(step.value * step.value, md / (n_cubes * n_cubes) * sum_w2),
        solver_gap: gap.max(whole.gap).max(step.gap),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct BlockContraction<T> {
    pub theta: ThetaParams<T>,
    /// `1 − (m^d/N)(1 − Θ_m)`.
    pub rate: T,
    pub observed: ContractionReport<T>,
    pub check: InequalityCheck<T>,
}

/// Worst observed `W₂(rΓ_{I_m}, sΓ_{I_m}) / W₂(r, s)` against the rate
/// `1 − (m^d/N)(1 − Θ_m)`; pairs at distance below `1e-6` are skipped.
pub fn block_contraction_check<T: Real, S: LocalSpec<T> + ?Sized>(
    spec: &S,
    boundary: usize,
    m: u64,
    profile: &MixingProfile<T>,
    pairs: &[(Distribution<T>, Distribution<T>)],
    opts: W2Options<T>,
) -> Result<BlockContraction<T>> {
    let lattice = free_space(spec)?.sites().clone();
    let theta = theta_m(profile, lattice.dim(), m)?;
    if !theta.usable {
        return Err(Error::NotApplicable(format!(
            "Θ_m = {} is not below 1 for m = {m}",
            theta.theta.to_f64_lossy()
        )));
    }
    let sampler = block_sampler(spec, m, boundary)?;
    let rate = T::one()
        - T::count(sampler.family.coverage()) / T::count(sampler.family.len()) * (T::one() - theta.theta);
    let chunks: Vec<ContractionReport<T>> = pairs
        .par_iter()
        .map(|pair| empirical_w2_contraction(&sampler.mixture, std::slice::from_ref(pair), opts, T::lit(1e-6)))
        .collect::<Result<_>>()?;
    let observed = chunks.into_iter().fold(
        ContractionReport {
            worst_ratio: T::zero(),
            worst_certified_ratio: T::zero(),
            evaluated: 0,
            skipped: 0,
        },
        |a, b| ContractionReport {
            worst_ratio: a.worst_ratio.max(b.worst_ratio),
            worst_certified_ratio: a.worst_certified_ratio.max(b.worst_certified_ratio),
            evaluated: a.evaluated + b.evaluated,
            skipped: a.skipped + b.skipped,
        },
    );
    Ok(BlockContraction {
        theta,
        rate,
        observed,
        check: InequalityCheck::new(observed.worst_ratio, rate),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Theorem3Constant<T> {
    pub theta: ThetaParams<T>,
    pub alpha: T,
    /// `m^d/(1−Θ_m)²·(2/(|X|α)²)^{m + log₂ m}`.
    #[serde(rename = "C")]
    pub c: T,
    /// The same with exponent `m^d + log₂ m^d`, the site count of a full cube.
    pub c_block: T,
    /// Smallest cube side with `Θ_m < 1`.
    pub m0: u64,
}

fn constant_at<T: Real>(theta: &ThetaParams<T>, d: usize, alpha: T, alphabet: usize) -> (T, T) {
    let m = theta.m as f64;
    let md = m.powi(d as i32);
    let xa = T::count(alphabet) * alpha;
    let base = T::lit(2.0) / (xa * xa);
    let pre = T::lit(md) / ((T::one() - theta.theta) * (T::one() - theta.theta));
    (
        pre * base.powf(T::lit(m + m.log2())),
        pre * base.powf(T::lit(md + md.log2())),
    )
}

/// Smallest `m ≤ M_SCAN_CAP` with `Θ_m < 1`.
pub fn scan_m0<T: Real>(profile: &MixingProfile<T>, d: usize) -> Result<ThetaParams<T>> {
    let norm = phi_norm(profile, d, R_SCAN_CAP)?;
    let tail = tails(profile, d)?;
    for m in 1..=M_SCAN_CAP {
        let t = theta_from(norm, &tail, d, m)?;
        if t.usable {
            return Ok(t);
        }
    }
    Err(Error::NotApplicable(format!("no cube side up to {M_SCAN_CAP} gives Θ_m < 1")))
}

/// The constant of the conditional transport inequality at cube side `m`
/// (or at the smallest admissible side when `m` is `None`).
pub fn theorem3_constant<T: Real>(
    profile: &MixingProfile<T>,
    d: usize,
    m: Option<u64>,
    alpha: T,
    alphabet: usize,
) -> Result<Theorem3Constant<T>> {
    if !(alpha > T::zero()) {
        return Err(Error::InvalidArgument("α must be positive".into()));
    }
    let m0 = scan_m0(profile, d)?;
    let theta = match m {
        Some(m) => theta_m(profile, d, m)?,
        None => m0,
    };
    if !theta.usable {
        return Err(Error::NotApplicable(format!(
            "Θ_m = {} is not below 1 for m = {}",
            theta.theta.to_f64_lossy(),
            theta.m
        )));
    }
    let (c, c_block) = constant_at(&theta, d, alpha, alphabet);
    Ok(Theorem3Constant {
        theta,
        alpha,
        c,
        c_block,
        m0: m0.m,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Theorem3Check<T> {
    pub constant: Theorem3Constant<T>,
    pub bound: Theorem1Check<T>,
}

/// `D(p_Λ ‖ q_Λ(·|ȳ_Λ)) ≤ (4C/α)·Σ_i E|p_i − q_i|²` with the strong-mixing
/// constant `C`; `α` is that of `q_Λ(·|ȳ_Λ)`.
pub fn verify_theorem3<T: Real, S: LocalSpec<T> + ?Sized>(
    p: &Distribution<T>,
    spec: &S,
    boundary: usize,
    profile: &MixingProfile<T>,
    m: Option<u64>,
) -> Result<Theorem3Check<T>> {
    let q = spec.free_conditional(boundary)?;
    if p.space() != q.space() {
        return Err(Error::SpaceMismatch);
    }
    let alpha = alpha_constant(&q)?.value();
    let constant = theorem3_constant(profile, q.space().sites().dim(), m, alpha, q.space().q())?;
    let bound = verify_theorem1(p, &q, constant.c)?;
    Ok(Theorem3Check { constant, bound })
}
