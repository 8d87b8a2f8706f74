//! Local specifications: consistent families of block conditionals
//! `q_M(·|x̄_M)` on a finite universe of sites.

use crate::error::{Error, Result};
use crate::measures::Distribution;
use crate::scalar::Real;
use crate::state_space::ConfigSpace;

/// Conditional laws of blocks of free sites given everything else.
///
/// The universe is the set of sites on which configurations live (the free
/// region together with any frozen boundary collar). Block conditionals are
/// returned over `X^block` in the mixed-radix order of `block`.
pub trait LocalSpec<T: Real>: Sync {
    fn universe(&self) -> &ConfigSpace;

    /// Positions of the universe that may be resampled.
    fn free_sites(&self) -> &[usize];

    /// `q_M(·|x̄_M)` where `x̄_M` is read off the universe configuration
    /// `context` (its digits inside `block` are ignored).
    fn block_conditional(&self, block: &[usize], context: usize) -> Result<Vec<T>>;

    /// The joint law of the free sites given the frozen remainder of
    /// `context`, as a measure on `X^free`.
    fn free_conditional(&self, context: usize) -> Result<Distribution<T>> {
        let free = self.free_sites().to_vec();
        let w = self.block_conditional(&free, context)?;
        Distribution::from_unnormalized(self.universe().subspace(&free)?, w)
    }
}

/// The specification induced by one joint measure on `X^Λ`; every site is free.
#[derive(Debug, Clone)]
pub struct JointSpec<T> {
    q: Distribution<T>,
    free: Vec<usize>,
}

impl<T: Real> JointSpec<T> {
    pub fn new(q: Distribution<T>) -> Self {
        let free = (0..q.space().n()).collect();
        Self { q, free }
    }

    pub fn measure(&self) -> &Distribution<T> {
        &self.q
    }
}

impl<T: Real> LocalSpec<T> for JointSpec<T> {
    fn universe(&self) -> &ConfigSpace {
        self.q.space()
    }

    fn free_sites(&self) -> &[usize] {
        &self.free
    }

    fn block_conditional(&self, block: &[usize], context: usize) -> Result<Vec<T>> {
        let space = self.q.space();
        if block.iter().any(|&p| p >= space.n()) {
            return Err(Error::InvalidArgument("block position out of range".into()));
        }
        let base = space.clear(context, block);
        let w = self.q.weights();
        let raw: Vec<T> = space.block_offsets(block).iter().map(|&o| w[base + o]).collect();
        let mass: T = raw.iter().copied().sum();
        if mass <= T::zero() {
            return Err(Error::ZeroMassContext);
        }
        Ok(raw.into_iter().map(|x| x / mass).collect())
    }
}
