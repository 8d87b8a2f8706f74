//! Brute-force oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spinlab::measures::Distribution;
use spinlab::models::{BoundaryCondition, GibbsModel, PairPotential};
use spinlab::state_space::{Alphabet, ConfigSpace, SiteSet};
use spinlab::LocalSpec;

pub fn linf(a: &[i64], b: &[i64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x.abs_diff(*y)).max().unwrap()
}

/// Nearest-neighbour Ising weights of every universe configuration, from
/// the coordinates alone.
pub fn brute_weights(model: &GibbsModel<f64>, beta: f64, field: f64, free_boundary: bool) -> Vec<f64> {
    let u = model.universe();
    let n_box = model.free_sites().len();
    let sites: Vec<Vec<i64>> = u.sites().sites().iter().map(|s| s.0.clone()).collect();
    let mut bonds = Vec::new();
    for a in 0..u.n() {
        for b in a + 1..u.n() {
            let l1: u64 = sites[a].iter().zip(&sites[b]).map(|(x, y)| x.abs_diff(*y)).sum();
            let in_box = a < n_box || b < n_box;
            let collar = a >= n_box || b >= n_box;
            if l1 == 1 && in_box && !(free_boundary && collar) {
                bonds.push((a, b));
            }
        }
    }
    (0..u.len())
        .map(|id| {
            let s: Vec<f64> = (0..u.n()).map(|p| 2.0 * u.digit(id, p) as f64 - 1.0).collect();
            let h: f64 = -bonds.iter().map(|&(a, b)| s[a] * s[b]).sum::<f64>()
                - field * (0..n_box).map(|p| s[p]).sum::<f64>();
            (-beta * h).exp()
        })
        .collect()
}

/// φ by direct enumeration of every `M ⊆ V ⊆ Λ`, context and single flip.
pub fn brute_phi(model: &GibbsModel<f64>, w: &[f64]) -> BTreeMap<u64, f64> {
    let u = model.universe();
    let n_box = model.free_sites().len();
    let sites: Vec<Vec<i64>> = u.sites().sites().iter().map(|s| s.0.clone()).collect();
    let mut best = BTreeMap::new();
    for vmask in 1u32..1 << n_box {
        let v: Vec<usize> = (0..n_box).filter(|j| vmask >> j & 1 == 1).collect();
        let outside: Vec<usize> = (0..u.n()).filter(|p| !v.contains(p)).collect();
        // q_V(·|ctx) as a map from full configuration to probability
        let cond = |ctx: usize| -> Vec<(usize, f64)> {
            let mut out = Vec::new();
            for xv in 0..1usize << v.len() {
                let mut id = ctx;
                for (j, &p) in v.iter().enumerate() {
                    id = u.with_digit(id, p, xv >> j & 1);
                }
                out.push((id, w[id]));
            }
            let z: f64 = out.iter().map(|e| e.1).sum();
            out.iter().map(|&(i, x)| (i, x / z)).collect()
        };
        for c in 0..1usize << outside.len() {
            let mut ctx = 0;
            for (j, &p) in outside.iter().enumerate() {
                ctx = u.with_digit(ctx, p, c >> j & 1);
            }
            let a = cond(ctx);
            for &k in &outside {
                if u.digit(ctx, k) != 0 {
                    continue;
                }
                let b = cond(u.with_digit(ctx, k, 1));
                for mmask in 1u32..1 << v.len() {
                    let m: Vec<usize> = v.iter().enumerate().filter(|(j, _)| mmask >> j & 1 == 1).map(|(_, &p)| p).collect();
                    let key = |id: usize| m.iter().map(|&p| u.digit(id, p)).collect::<Vec<_>>();
                    let mut diff: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
                    for &(id, x) in &a {
                        *diff.entry(key(id)).or_default() += x;
                    }
                    for &(id, x) in &b {
                        *diff.entry(key(id)).or_default() -= x;
                    }
                    let tv = 0.5 * diff.values().map(|x| x.abs()).sum::<f64>();
                    let r = m.iter().map(|&p| linf(&sites[k], &sites[p])).min().unwrap();
                    let e = best.entry(r).or_insert(0.0f64);
                    *e = e.max(tv);
                }
            }
        }
    }
    best
}

pub fn ising_box(sides: &[usize], beta: f64, field: f64, boundary: BoundaryCondition) -> GibbsModel<f64> {
    GibbsModel::new(
        PairPotential::ising(beta, 1.0, field),
        SiteSet::lattice_box(sides).unwrap(),
        Alphabet::new(2).unwrap(),
        boundary,
    )
    .unwrap()
}

pub fn random_p(space: &ConfigSpace, rng: &mut ChaCha8Rng) -> Distribution<f64> {
    let w = (0..space.len()).map(|_| 0.05 + rng.gen::<f64>()).collect();
    Distribution::from_unnormalized(space.clone(), w).unwrap()
}

/// Direct transcription of the Θ_m minimisation, evaluated shell by shell.
pub fn theta_oracle(phi: impl Fn(u64) -> f64, d: i32, m: u64) -> (f64, u64) {
    let norm: f64 = (1..=5000u64)
        .map(|r| ((2 * r + 1) as f64).powi(d) - ((2 * r - 1) as f64).powi(d))
        .zip(1..)
        .map(|(c, r)| c * phi(r))
        .sum();
    let mut best = (f64::INFINITY, 0);
    for big_r in 1..=64u64 {
        let tail: f64 = (big_r..5000).map(|r| ((2 * r + 1) as f64).powi(d - 1) * phi(r)).sum();
        let v = norm * (d as f64) * big_r as f64 / m as f64 + 2.0 * d as f64 * tail;
        if v < best.0 {
            best = (v, big_r);
        }
    }
    best
}

/// `m^d − Π_ν (m − min(|k_ν − i_ν|, m))`: cubes holding `i` minus those holding both.
pub fn separating_closed_form(k: &[i64], i: &[i64], m: u64) -> usize {
    let d = k.len() as u32;
    let both: u64 = k.iter().zip(i).map(|(a, b)| m - a.abs_diff(*b).min(m)).product();
    (m.pow(d) - both) as usize
}
