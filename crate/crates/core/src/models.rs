//! Generators of joint measures and specifications: Ising and Potts pair
//! potentials of finite range on a box with a frozen collar, seeded random
//! full-support measures, and perturbations `p ≪ q`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::Distribution;
use crate::scalar::Real;
use crate::spec::LocalSpec;
use crate::state_space::{rho_unchecked, Alphabet, ConfigSpace, Site, SiteSet};

/// Index cap for universes (box plus collar); they are only indexed, never
/// materialised densely.
const UNIVERSE_CAP: usize = 1 << 62;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interaction {
    /// Spins `s = 2x − 1` on `{0, 1}`; pair term `s_k s_i`, field term `s_i`.
    Ising,
    /// Pair term `δ(x_k, x_i)`, field term `δ(x_i, 0)`.
    Potts,
}

/// `H(x) = −Σ_{k,i} J(k,i) φ(x_k, x_i) − Σ_i h(i) ψ(x_i)` and
/// `q ∝ exp(−β H)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PairPotential<T> {
    pub kind: Interaction,
    pub beta: T,
    /// Interaction range `R`; also the collar width.
    pub range: u64,
    /// Coupling between lattice neighbours (`ℓ₁` distance one).
    pub coupling: T,
    /// Uniform external field.
    pub field: T,
    /// Additional symmetric couplings; each pair must lie within range.
    #[serde(default)]
    pub extra_couplings: Vec<(Site, Site, T)>,
    /// Additional site-dependent fields.
    #[serde(default)]
    pub site_fields: Vec<(Site, T)>,
}

impl<T: Real> PairPotential<T> {
    pub fn ising(beta: T, coupling: T, field: T) -> Self {
        Self {
            kind: Interaction::Ising,
            beta,
            range: 1,
            coupling,
            field,
            extra_couplings: Vec::new(),
            site_fields: Vec::new(),
        }
    }

    pub fn potts(beta: T, coupling: T) -> Self {
        Self {
            kind: Interaction::Potts,
            ..Self::ising(beta, coupling, T::zero())
        }
    }

    fn pair_term(&self, a: usize, b: usize) -> T {
        match self.kind {
            Interaction::Ising => {
                if a == b {
                    T::one()
                } else {
                    -T::one()
                }
            }
            Interaction::Potts => {
                if a == b {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    fn field_term(&self, a: usize) -> T {
        match self.kind {
            Interaction::Ising => T::lit(2.0) * T::count(a) - T::one(),
            Interaction::Potts => {
                if a == 0 {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }
}

/// The frozen configuration on the collar `{ j ∉ Λ : ρ(j, Λ) ≤ R }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryCondition {
    /// Collar fixed to symbol 0 and decoupled from `Λ`.
    Free,
    /// Every collar site carries the same symbol.
    Constant(usize),
    /// Explicit symbols, in the sorted order of the collar sites.
    Explicit(Vec<usize>),
}

/// A pair-potential Gibbs specification on `Λ` with a frozen collar.
///
/// Universe positions `0..|Λ|` are the box, the rest is the collar.
#[derive(Debug, Clone)]
pub struct GibbsModel<T> {
    potential: PairPotential<T>,
    universe: ConfigSpace,
    free: Vec<usize>,
    boundary: BoundaryCondition,
    boundary_id: usize,
    /// `(position, J)` neighbours of each universe position.
    neighbours: Vec<Vec<(usize, T)>>,
    fields: Vec<T>,
}

impl<T: Real> GibbsModel<T> {
    pub fn new(
        potential: PairPotential<T>,
        lattice: SiteSet,
        alphabet: Alphabet,
        boundary: BoundaryCondition,
    ) -> Result<Self> {
        if potential.kind == Interaction::Ising && alphabet.size() != 2 {
            return Err(Error::InvalidArgument("the Ising interaction needs |X| = 2".into()));
        }
        if potential.range == 0 {
            return Err(Error::InvalidArgument("interaction range must be at least 1".into()));
        }
        if !(potential.beta >= T::zero()) {
            return Err(Error::InvalidArgument("beta must be non-negative".into()));
        }
        let collar = lattice.collar(potential.range);
        let n_box = lattice.len();
        let all = lattice.union_disjoint(&collar)?;
        let universe = ConfigSpace::with_cap(alphabet, all, UNIVERSE_CAP)?;
        let q = alphabet.size();

        let collar_symbols: Vec<usize> = match &boundary {
            BoundaryCondition::Free => vec![0; collar.len()],
            BoundaryCondition::Constant(a) => vec![*a; collar.len()],
            BoundaryCondition::Explicit(v) => {
                if v.len() != collar.len() {
                    return Err(Error::DimensionMismatch(collar.len(), v.len()));
                }
                v.clone()
            }
        };
        if let Some(&a) = collar_symbols.iter().find(|&&a| a >= q) {
            return Err(Error::SymbolOutOfRange {
                position: 0,
                symbol: a,
                size: q,
            });
        }
        let boundary_id = collar_symbols
            .iter()
            .enumerate()
            .map(|(j, &a)| a * universe.stride(n_box + j))
            .sum();

        let index: HashMap<&Site, usize> = universe.sites().sites().iter().enumerate().map(|(p, s)| (s, p)).collect();
        let mut couplings: HashMap<(usize, usize), T> = HashMap::new();
        let decoupled = |a: usize, b: usize| matches!(boundary, BoundaryCondition::Free) && (a >= n_box || b >= n_box);
        let sites = universe.sites().sites();
        for a in 0..universe.n() {
            for b in a + 1..universe.n() {
                if a >= n_box && b >= n_box {
                    continue;
                }
                let l1: u64 = sites[a].0.iter().zip(&sites[b].0).map(|(x, y)| x.abs_diff(*y)).sum();
                if l1 == 1 && !decoupled(a, b) && potential.coupling != T::zero() {
                    couplings.insert((a, b), potential.coupling);
                }
            }
        }
        for (s1, s2, j) in &potential.extra_couplings {
            if rho_unchecked(s1, s2) > potential.range || s1 == s2 {
                return Err(Error::InvalidArgument(format!(
                    "coupling {:?}–{:?} exceeds the interaction range",
                    s1.0, s2.0
                )));
            }
            let (Some(&a), Some(&b)) = (index.get(s1), index.get(s2)) else {
                continue;
            };
            if (a >= n_box && b >= n_box) || decoupled(a, b) {
                continue;
            }
            let key = (a.min(b), a.max(b));
            let e = couplings.entry(key).or_insert(T::zero());
            *e = *e + *j;
        }
        let mut neighbours = vec![Vec::new(); universe.n()];
        let mut pairs: Vec<_> = couplings.into_iter().collect();
        pairs.sort_by_key(|(k, _)| *k);
        for ((a, b), j) in pairs {
            neighbours[a].push((b, j));
            neighbours[b].push((a, j));
        }
        let mut fields = vec![T::zero(); universe.n()];
        for f in fields.iter_mut().take(n_box) {
            *f = potential.field;
        }
        for (s, h) in &potential.site_fields {
            if let Some(&p) = index.get(s) {
                if p < n_box {
                    fields[p] = fields[p] + *h;
                }
            }
        }
        Ok(Self {
            potential,
            universe,
            free: (0..n_box).collect(),
            boundary,
            boundary_id,
            neighbours,
            fields,
        })
    }

    /// Nearest-neighbour Ising chain on `{1, .., n}`.
    pub fn ising_chain(n: usize, beta: T, field: T, boundary: BoundaryCondition) -> Result<Self> {
        Self::new(
            PairPotential::ising(beta, T::one(), field),
            SiteSet::chain(n),
            Alphabet::new(2)?,
            boundary,
        )
    }

    pub fn potential(&self) -> &PairPotential<T> {
        &self.potential
    }

    pub fn boundary(&self) -> &BoundaryCondition {
        &self.boundary
    }

    /// Universe configuration carrying the boundary on the collar and 0 on `Λ`.
    pub fn boundary_id(&self) -> usize {
        self.boundary_id
    }

    pub fn lattice(&self) -> SiteSet {
        self.universe.sites().subset(&self.free)
    }

    /// `J` between two universe positions.
    pub fn coupling_between(&self, a: usize, b: usize) -> T {
        self.neighbours[a]
            .iter()
            .find(|(p, _)| *p == b)
            .map(|e| e.1)
            .unwrap_or(T::zero())
    }

    /// Part of `H` that depends on the symbols at `block`.
    fn local_energy(&self, digits: &[usize], block: &[usize], in_block: &[bool]) -> T {
        let pot = &self.potential;
        let mut e = T::zero();
        for &a in block {
            e = e - self.fields[a] * pot.field_term(digits[a]);
            for &(b, j) in &self.neighbours[a] {
                // count pairs inside the block once
                if in_block[b] && b < a {
                    continue;
                }
                e = e - j * pot.pair_term(digits[a], digits[b]);
            }
        }
        e
    }

    /// `q_Λ(·|ȳ_Λ)` for this model's boundary.
    pub fn joint(&self) -> Result<Distribution<T>> {
        self.free_conditional(self.boundary_id)
    }
}

impl<T: Real> LocalSpec<T> for GibbsModel<T> {
    fn universe(&self) -> &ConfigSpace {
        &self.universe
    }

    fn free_sites(&self) -> &[usize] {
        &self.free
    }

    fn block_conditional(&self, block: &[usize], context: usize) -> Result<Vec<T>> {
        let u = &self.universe;
        if block.iter().any(|&p| p >= self.free.len()) {
            return Err(Error::InvalidArgument("block must consist of free sites".into()));
        }
        let q = u.q();
        let mut digits = u.decode_raw(context);
        let mut in_block = vec![false; u.n()];
        block.iter().for_each(|&p| in_block[p] = true);
        let count = q.pow(block.len() as u32);
        let mut log_w = Vec::with_capacity(count);
        for b in 0..count {
            let mut rest = b;
            for &p in block {
                digits[p] = rest % q;
                rest /= q;
            }
            log_w.push(-self.potential.beta * self.local_energy(&digits, block, &in_block));
        }
        let top = log_w.iter().copied().fold(T::neg_infinity(), T::max);
        let w: Vec<T> = log_w.iter().map(|l| (*l - top).exp()).collect();
        let z: T = w.iter().copied().sum();
        Ok(w.into_iter().map(|x| x / z).collect())
    }
}

/// `q_Λ(x_Λ|ȳ_Λ) ∝ exp(−β H)` as a dense measure.
pub fn gibbs_joint<T: Real>(model: &GibbsModel<T>) -> Result<Distribution<T>> {
    model.joint()
}

/// A seeded full-support measure with every weight at least `min_mass / |states|`.
pub fn random_spec<T: Real>(seed: u64, lattice: &SiteSet, alphabet: Alphabet, min_mass: T) -> Result<Distribution<T>> {
    if !(min_mass >= T::zero() && min_mass <= T::one()) {
        return Err(Error::InvalidArgument("min_mass must lie in [0, 1]".into()));
    }
    let space = ConfigSpace::new(alphabet, lattice.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<T> = (0..space.len()).map(|_| T::lit(rng.gen::<f64>() + 1e-3)).collect();
    let total: T = raw.iter().copied().sum();
    let n = T::count(space.len());
    let w = raw
        .into_iter()
        .map(|r| min_mass / n + (T::one() - min_mass) * r / total)
        .collect();
    Distribution::from_unnormalized(space, w)
}

/// `p = (1 − ε) q + ε r` with `r` a seeded random measure on `supp q`.
pub fn perturb<T: Real>(q: &Distribution<T>, eps: T, seed: u64) -> Result<Distribution<T>> {
    if !(eps >= T::zero() && eps <= T::one()) {
        return Err(Error::InvalidArgument("epsilon must lie in [0, 1]".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<T> = q
        .weights()
        .iter()
        .map(|w| {
            let u = rng.gen::<f64>();
            if *w > T::zero() {
                T::lit(u)
            } else {
                T::zero()
            }
        })
        .collect();
    let r = Distribution::from_unnormalized(q.space().clone(), raw)?;
    q.mix(&r, eps)
}
