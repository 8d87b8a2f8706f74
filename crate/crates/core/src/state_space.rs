//! Configuration indexing over `X^Λ` and the lattice geometry of `Z^d`.
//!
//! Configurations are encoded in mixed radix: the digit of the first site
//! of the [`SiteSet`] is the least significant one. Marginalising over a
//! coordinate is therefore a strided sum over the dense weight vector.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default upper bound on `|X|^|Λ|` for dense representations.
pub const DEFAULT_STATE_CAP: usize = 1 << 24;

/// The finite single-site alphabet `X = {0, .., size - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Alphabet(usize);

impl Alphabet {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::InvalidArgument(format!(
                "alphabet size must be at least 2, got {size}"
            )));
        }
        Ok(Self(size))
    }

    #[inline]
    pub fn size(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Alphabet {
    type Error = Error;
    fn try_from(size: usize) -> Result<Self> {
        Alphabet::new(size)
    }
}

impl From<Alphabet> for usize {
    fn from(a: Alphabet) -> usize {
        a.0
    }
}

/// A lattice point of `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for Site {
    fn from(v: Vec<i64>) -> Self {
        Site(v)
    }
}

/// Chebyshev distance `ρ(k, i) = max_ν |k_ν - i_ν|`.
pub fn rho(k: &Site, i: &Site) -> Result<u64> {
    if k.dim() != i.dim() {
        return Err(Error::DimensionMismatch(k.dim(), i.dim()));
    }
    Ok(rho_unchecked(k, i))
}

#[inline]
pub(crate) fn rho_unchecked(k: &Site, i: &Site) -> u64 {
    k.0.iter()
        .zip(&i.0)
        .map(|(a, b)| a.abs_diff(*b))
        .max()
        .unwrap_or(0)
}

/// Distance from a site to a nonempty set of sites.
pub fn rho_to_set<'a>(k: &Site, set: impl IntoIterator<Item = &'a Site>) -> Option<u64> {
    set.into_iter().map(|s| rho_unchecked(k, s)).min()
}

/// An ordered finite set of distinct sites of equal dimension.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SiteSetRepr", into = "SiteSetRepr")]
pub struct SiteSet {
    dim: usize,
    sites: Vec<Site>,
}

#[derive(Serialize, Deserialize)]
struct SiteSetRepr {
    dim: usize,
    sites: Vec<Site>,
}

impl TryFrom<SiteSetRepr> for SiteSet {
    type Error = Error;
    fn try_from(r: SiteSetRepr) -> Result<Self> {
        SiteSet::new(r.dim, r.sites)
    }
}

impl From<SiteSet> for SiteSetRepr {
    fn from(s: SiteSet) -> Self {
        SiteSetRepr {
            dim: s.dim,
            sites: s.sites,
        }
    }
}

impl SiteSet {
    pub fn new(dim: usize, sites: Vec<Site>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("lattice dimension must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(sites.len());
        for s in &sites {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(dim, s.dim()));
            }
            if !seen.insert(s) {
                return Err(Error::InvalidArgument(format!("duplicate site {:?}", s.0)));
            }
        }
        Ok(Self { dim, sites })
    }

    /// The one-dimensional index set `{1, .., n}`.
    pub fn chain(n: usize) -> Self {
        Self {
            dim: 1,
            sites: (1..=n as i64).map(|i| Site(vec![i])).collect(),
        }
    }

    /// The box `[0, side_0) × .. × [0, side_{d-1})`, first coordinate fastest.
    pub fn lattice_box(sides: &[usize]) -> Result<Self> {
        if sides.is_empty() || sides.contains(&0) {
            return Err(Error::InvalidArgument("box sides must be positive".into()));
        }
        let total: usize = sides.iter().product();
        let mut sites = Vec::with_capacity(total);
        let mut cur = vec![0i64; sides.len()];
        for _ in 0..total {
            sites.push(Site(cur.clone()));
            for (c, &s) in cur.iter_mut().zip(sides) {
                *c += 1;
                if *c < s as i64 {
                    break;
                }
                *c = 0;
            }
        }
        Self::new(sides.len(), sites)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    #[inline]
    pub fn site(&self, idx: usize) -> &Site {
        &self.sites[idx]
    }

    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index_of(site).is_some()
    }

    /// Sub-set formed by the given positions, in the given order.
    pub fn subset(&self, positions: &[usize]) -> SiteSet {
        SiteSet {
            dim: self.dim,
            sites: positions.iter().map(|&p| self.sites[p].clone()).collect(),
        }
    }

    /// All sites not in `self` within Chebyshev distance `width` of it.
    pub fn collar(&self, width: u64) -> SiteSet {
        let mut out = Vec::new();
        let mut seen: HashSet<Site> = self.sites.iter().cloned().collect();
        let w = width as i64;
        for s in &self.sites {
            let mut offset = vec![-w; self.dim];
            loop {
                let cand = Site(s.0.iter().zip(&offset).map(|(a, b)| a + b).collect());
                if seen.insert(cand.clone()) {
                    out.push(cand);
                }
                let mut carry = true;
                for o in offset.iter_mut() {
                    if !carry {
                        break;
                    }
                    *o += 1;
                    if *o > w {
                        *o = -w;
                    } else {
                        carry = false;
                    }
                }
                if carry {
                    break;
                }
            }
        }
        out.sort();
        SiteSet {
            dim: self.dim,
            sites: out,
        }
    }

    /// Concatenation of two disjoint site sets.
    pub fn union_disjoint(&self, other: &SiteSet) -> Result<SiteSet> {
        let mut sites = self.sites.clone();
        sites.extend(other.sites.iter().cloned());
        SiteSet::new(self.dim, sites)
    }
}

/// Mixed-radix identifier of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigId(pub usize);

/// The configuration space `X^Λ` with its mixed-radix encoding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConfigSpaceRepr", into = "ConfigSpaceRepr")]
pub struct ConfigSpace {
    alphabet: Alphabet,
    sites: SiteSet,
    strides: Vec<usize>,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct ConfigSpaceRepr {
    alphabet: Alphabet,
    sites: SiteSet,
}

impl TryFrom<ConfigSpaceRepr> for ConfigSpace {
    type Error = Error;
    fn try_from(r: ConfigSpaceRepr) -> Result<Self> {
        ConfigSpace::new(r.alphabet, r.sites)
    }
}

impl From<ConfigSpace> for ConfigSpaceRepr {
    fn from(s: ConfigSpace) -> Self {
        ConfigSpaceRepr {
            alphabet: s.alphabet,
            sites: s.sites,
        }
    }
}

impl ConfigSpace {
    pub fn new(alphabet: Alphabet, sites: SiteSet) -> Result<Self> {
        Self::with_cap(alphabet, sites, DEFAULT_STATE_CAP)
    }

    /// Builds the space, failing fast when `|X|^|Λ|` exceeds `cap`.
    pub fn with_cap(alphabet: Alphabet, sites: SiteSet, cap: usize) -> Result<Self> {
        let q = alphabet.size() as u128;
        let mut states: u128 = 1;
        let mut strides = Vec::with_capacity(sites.len());
        for _ in 0..sites.len() {
            strides.push(states as usize);
            states = states.saturating_mul(q);
            if states > cap as u128 {
                return Err(Error::StateCapExceeded { states, cap });
            }
        }
        Ok(Self {
            alphabet,
            sites,
            strides,
            len: states as usize,
        })
    }

    /// `X^n` over the chain `{1, .., n}`.
    pub fn chain(alphabet: usize, n: usize) -> Result<Self> {
        Self::new(Alphabet::new(alphabet)?, SiteSet::chain(n))
    }

    #[inline]
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    #[inline]
    pub fn q(&self) -> usize {
        self.alphabet.size()
    }

    pub fn sites(&self) -> &SiteSet {
        &self.sites
    }

    /// Number of sites `|Λ|`.
    #[inline]
    pub fn n(&self) -> usize {
        self.sites.len()
    }

    /// Number of configurations `|X|^|Λ|`.
    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn stride(&self, pos: usize) -> usize {
        self.strides[pos]
    }

    pub fn encode(&self, config: &[usize]) -> Result<ConfigId> {
        if config.len() != self.n() {
            return Err(Error::DimensionMismatch(self.n(), config.len()));
        }
        let q = self.q();
        let mut id = 0;
        for (pos, (&sym, &stride)) in config.iter().zip(&self.strides).enumerate() {
            if sym >= q {
                return Err(Error::SymbolOutOfRange {
                    position: pos,
                    symbol: sym,
                    size: q,
                });
            }
            id += sym * stride;
        }
        Ok(ConfigId(id))
    }

    pub fn decode(&self, id: ConfigId) -> Result<Vec<usize>> {
        if id.0 >= self.len {
            return Err(Error::InvalidArgument(format!(
                "configuration id {} out of range {}",
                id.0, self.len
            )));
        }
        Ok(self.decode_raw(id.0))
    }

    #[inline]
    pub(crate) fn decode_raw(&self, mut id: usize) -> Vec<usize> {
        let q = self.q();
        let mut out = Vec::with_capacity(self.n());
        for _ in 0..self.n() {
            out.push(id % q);
            id /= q;
        }
        out
    }

    /// Symbol at position `pos` of configuration `id`.
    #[inline]
    pub fn digit(&self, id: usize, pos: usize) -> usize {
        (id / self.strides[pos]) % self.q()
    }

    /// Replaces the symbol at `pos`.
    #[inline]
    pub fn with_digit(&self, id: usize, pos: usize, sym: usize) -> usize {
        id - self.digit(id, pos) * self.strides[pos] + sym * self.strides[pos]
    }

    /// The space `X^I` for the listed positions (kept in the given order).
    pub fn subspace(&self, positions: &[usize]) -> Result<ConfigSpace> {
        ConfigSpace::new(self.alphabet, self.sites.subset(positions))
    }

    /// Offsets in this space of every configuration of `X^positions`, listed
    /// in the mixed-radix order of the subspace.
    pub fn block_offsets(&self, positions: &[usize]) -> Vec<usize> {
        let q = self.q();
        let mut out = vec![0usize];
        for &p in positions {
            let stride = self.strides[p];
            let prev = out.len();
            out.reserve(prev * (q - 1));
            for a in 1..q {
                for j in 0..prev {
                    out.push(out[j] + a * stride);
                }
            }
        }
        out
    }

    /// Positions not listed in `positions`, in increasing order.
    pub fn complement(&self, positions: &[usize]) -> Vec<usize> {
        let mut mask = vec![false; self.n()];
        for &p in positions {
            mask[p] = true;
        }
        (0..self.n()).filter(|&p| !mask[p]).collect()
    }

    /// Projects configuration `id` onto `positions`, giving an id of the subspace.
    #[inline]
    pub fn project(&self, id: usize, positions: &[usize]) -> usize {
        let q = self.q();
        let mut out = 0;
        let mut mult = 1;
        for &p in positions {
            out += self.digit(id, p) * mult;
            mult *= q;
        }
        out
    }

    /// Offset of `id` after zeroing the digits at `positions`.
    #[inline]
    pub fn clear(&self, id: usize, positions: &[usize]) -> usize {
        positions
            .iter()
            .fold(id, |acc, &p| acc - self.digit(acc, p) * self.strides[p])
    }
}

/// One `m`-sided cube `corner + [0, m)^d` together with its trace on `Λ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub corner: Site,
    /// Positions in `Λ` of the sites covered by the cube.
    pub members: Vec<usize>,
    /// The covered sites themselves.
    pub sites: Vec<Site>,
}

/// All `m`-sided cubes of `Z^d` (every integer translate) meeting `Λ`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeFamily {
    pub m: u64,
    pub dim: usize,
    pub cubes: Vec<Cube>,
}

impl CubeFamily {
    #[inline]
    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// `m^d`, the number of cubes covering any given site.
    pub fn coverage(&self) -> usize {
        (self.m as usize).pow(self.dim as u32)
    }

    /// Number of cubes containing the site at position `i` but not `k`.
    pub fn separating_count(&self, i: usize, k: usize) -> usize {
        self.cubes
            .iter()
            .filter(|c| c.members.contains(&i) && !c.members.contains(&k))
            .count()
    }
}

/// Enumerates `I_m(Λ)`: all integer translates of the `m`-sided cube that
/// intersect `Λ`.
pub fn cubes_intersecting(lattice: &SiteSet, m: u64) -> Result<CubeFamily> {
    if m == 0 {
        return Err(Error::InvalidArgument("cube side must be at least 1".into()));
    }
    let d = lattice.dim();
    let mut cubes = Vec::new();
    if lattice.is_empty() {
        return Ok(CubeFamily { m, dim: d, cubes });
    }
    let mi = m as i64;
    let lo: Vec<i64> = (0..d)
        .map(|nu| lattice.sites().iter().map(|s| s.0[nu]).min().unwrap() - mi + 1)
        .collect();
    let hi: Vec<i64> = (0..d)
        .map(|nu| lattice.sites().iter().map(|s| s.0[nu]).max().unwrap())
        .collect();
    let mut corner = lo.clone();
    loop {
        let members: Vec<usize> = lattice
            .sites()
            .iter()
            .enumerate()
            .filter(|(_, s)| {
                s.0.iter()
                    .zip(&corner)
                    .all(|(x, c)| *x >= *c && *x < *c + mi)
            })
            .map(|(p, _)| p)
            .collect();
        if !members.is_empty() {
            cubes.push(Cube {
                corner: Site(corner.clone()),
                sites: members.iter().map(|&p| lattice.site(p).clone()).collect(),
                members,
            });
        }
        let mut nu = 0;
        loop {
            if nu == d {
                return Ok(CubeFamily { m, dim: d, cubes });
            }
            corner[nu] += 1;
            if corner[nu] <= hi[nu] {
                break;
            }
            corner[nu] = lo[nu];
            nu += 1;
        }
    }
}

/// Positions of `M` ordered by increasing distance from `k`, ties broken
/// by the order of `M`.
pub fn order_by_distance(k: &Site, m_set: &SiteSet) -> Vec<usize> {
    let mut order: Vec<usize> = (0..m_set.len()).collect();
    order.sort_by_key(|&p| (rho_unchecked(k, m_set.site(p)), p));
    order
}

/// `J_{k,M,i} = { j ∈ M : ρ(k, j) ≥ ρ(k, i) }`, as positions in `M`.
pub fn j_set(k: &Site, m_set: &SiteSet, i: &Site) -> Result<Vec<usize>> {
    if k.dim() != m_set.dim() {
        return Err(Error::DimensionMismatch(m_set.dim(), k.dim()));
    }
    if m_set.contains(k) {
        return Err(Error::InvalidArgument("k must lie outside M".into()));
    }
    if m_set.index_of(i).is_none() {
        return Err(Error::SiteNotInSet);
    }
    let ri = rho_unchecked(k, i);
    Ok((0..m_set.len())
        .filter(|&p| rho_unchecked(k, m_set.site(p)) >= ri)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[i64]) -> Site {
        Site(v.to_vec())
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho(&s(&[0, 0]), &s(&[0, 0])).unwrap(), 0);
        assert_eq!(rho(&s(&[0, 0]), &s(&[3, -2])).unwrap(), 3);
        assert_eq!(rho(&s(&[1, 1, 1]), &s(&[0, 2, 5])).unwrap(), 4);
        assert!(matches!(
            rho(&s(&[0]), &s(&[0, 1])),
            Err(Error::DimensionMismatch(1, 2))
        ));
    }

    #[test]
    fn encode_examples() {
        let space = ConfigSpace::chain(2, 3).unwrap();
        assert_eq!(space.encode(&[0, 0, 0]).unwrap(), ConfigId(0));
        assert_eq!(space.encode(&[1, 0, 0]).unwrap(), ConfigId(1));
        assert!(matches!(
            space.encode(&[0, 2, 0]),
            Err(Error::SymbolOutOfRange { position: 1, .. })
        ));
    }

    #[test]
    fn encode_decode_round_trip_exhaustive() {
        let space = ConfigSpace::chain(3, 4).unwrap();
        assert_eq!(space.len(), 81);
        for id in 0..space.len() {
            let cfg = space.decode(ConfigId(id)).unwrap();
            assert_eq!(space.encode(&cfg).unwrap(), ConfigId(id));
        }
    }

    #[test]
    fn state_cap_fails_fast() {
        let err = ConfigSpace::with_cap(Alphabet::new(2).unwrap(), SiteSet::chain(13), 1 << 12);
        assert!(matches!(err, Err(Error::StateCapExceeded { .. })));
        assert!(ConfigSpace::with_cap(Alphabet::new(2).unwrap(), SiteSet::chain(12), 1 << 12).is_ok());
    }

    #[test]
    fn alphabet_and_site_set_validation() {
        assert!(Alphabet::new(1).is_err());
        assert!(SiteSet::new(1, vec![s(&[0]), s(&[0])]).is_err());
        assert!(SiteSet::new(2, vec![s(&[0])]).is_err());
    }

    #[test]
    fn block_offsets_follow_subspace_order() {
        let space = ConfigSpace::chain(3, 3).unwrap();
        let offs = space.block_offsets(&[2, 0]);
        let sub = space.subspace(&[2, 0]).unwrap();
        for (sub_id, &off) in offs.iter().enumerate() {
            let sub_cfg = sub.decode(ConfigId(sub_id)).unwrap();
            let full = space.decode(ConfigId(off)).unwrap();
            assert_eq!(full, vec![sub_cfg[1], 0, sub_cfg[0]]);
            assert_eq!(space.project(off, &[2, 0]), sub_id);
        }
    }

    #[test]
    fn cubes_one_dimensional() {
        let lam = SiteSet::new(1, vec![s(&[0]), s(&[1]), s(&[2])]).unwrap();
        let f1 = cubes_intersecting(&lam, 1).unwrap();
        assert_eq!(f1.len(), 3);
        let f2 = cubes_intersecting(&lam, 2).unwrap();
        let traces: Vec<Vec<usize>> = f2.cubes.iter().map(|c| c.members.clone()).collect();
        assert_eq!(traces, vec![vec![0], vec![0, 1], vec![1, 2], vec![2]]);
        let corners: Vec<i64> = f2.cubes.iter().map(|c| c.corner.0[0]).collect();
        assert_eq!(corners, vec![-1, 0, 1, 2]);
        for p in 0..3 {
            assert_eq!(f2.cubes.iter().filter(|c| c.members.contains(&p)).count(), 2);
        }
    }

    #[test]
    fn cubes_cover_each_site_m_to_the_d_times() {
        let lam = SiteSet::lattice_box(&[3, 3]).unwrap();
        for m in 1..=4u64 {
            let fam = cubes_intersecting(&lam, m).unwrap();
            for p in 0..lam.len() {
                let cover = fam.cubes.iter().filter(|c| c.members.contains(&p)).count();
                assert_eq!(cover, fam.coverage(), "m={m} site={p}");
            }
        }
        // irregular Λ: still all translates
        let lam = SiteSet::new(2, vec![s(&[0, 0]), s(&[2, 1]), s(&[-1, 3])]).unwrap();
        let fam = cubes_intersecting(&lam, 2).unwrap();
        for p in 0..lam.len() {
            assert_eq!(fam.cubes.iter().filter(|c| c.members.contains(&p)).count(), 4);
        }
    }

    #[test]
    fn j_set_examples() {
        let m = SiteSet::new(1, vec![s(&[1]), s(&[2]), s(&[3])]).unwrap();
        assert_eq!(j_set(&s(&[0]), &m, &s(&[1])).unwrap(), vec![0, 1, 2]);
        assert_eq!(j_set(&s(&[0]), &m, &s(&[3])).unwrap(), vec![2]);
        assert!(j_set(&s(&[1]), &m, &s(&[2])).is_err());
        assert!(matches!(j_set(&s(&[0]), &m, &s(&[7])), Err(Error::SiteNotInSet)));

        let m2 = SiteSet::new(2, vec![s(&[0, 0]), s(&[1, 0]), s(&[0, 1])]).unwrap();
        let j = j_set(&s(&[2, 0]), &m2, &s(&[1, 0])).unwrap();
        assert_eq!(j, vec![0, 1, 2]);
    }

    #[test]
    fn collar_of_interval() {
        let lam = SiteSet::lattice_box(&[3]).unwrap();
        let c = lam.collar(2);
        let coords: Vec<i64> = c.sites().iter().map(|s| s.0[0]).collect();
        assert_eq!(coords, vec![-2, -1, 3, 4]);
        let sq = SiteSet::lattice_box(&[2, 2]).unwrap();
        assert_eq!(sq.collar(1).len(), 12);
    }
}
