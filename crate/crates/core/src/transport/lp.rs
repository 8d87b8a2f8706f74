//! Dense two-phase simplex with Bland's rule for small equality-form LPs.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `min costᵀx` subject to `rows · x = rhs`, `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub cost: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
}

struct Tableau<T> {
    /// `(rows + 1) × (cols + 1)`; the last row is the objective, the last
    /// column the right-hand side.
    t: Vec<Vec<T>>,
    basis: Vec<usize>,
    eps: T,
}

impl<T: Real> Tableau<T> {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let width = self.t[0].len();
        let p = self.t[r][c];
        for k in 0..width {
            self.t[r][k] = self.t[r][k] / p;
        }
        for i in 0..self.t.len() {
            if i == r {
                continue;
            }
            let f = self.t[i][c];
            if f != T::zero() {
                for k in 0..width {
                    let sub = f * self.t[r][k];
                    self.t[i][k] = self.t[i][k] - sub;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Runs Bland-rule simplex over columns `< allowed`.
    fn optimize(&mut self, allowed: usize, cap: usize) -> Result<()> {
        let obj = self.t.len() - 1;
        let rhs = self.t[0].len() - 1;
        for _ in 0..cap {
            let Some(c) = (0..allowed).find(|&c| self.t[obj][c] < -self.eps) else {
                return Ok(());
            };
            let mut best: Option<(T, usize, usize)> = None;
            for r in 0..self.rows() {
                let a = self.t[r][c];
                if a > self.eps {
                    let ratio = self.t[r][rhs] / a;
                    let better = match best {
                        None => true,
                        Some((b, _, var)) => ratio < b || (ratio == b && self.basis[r] < var),
                    };
                    if better {
                        best = Some((ratio, r, self.basis[r]));
                    }
                }
            }
            let Some((_, r, _)) = best else {
                return Err(Error::Infeasible("objective unbounded below".into()));
            };
            self.pivot(r, c);
        }
        Err(Error::NotConverged {
            iterations: cap,
            best_value: self.t[obj][rhs].to_f64_lossy(),
            gap: f64::NAN,
            best_disagreement: Vec::new(),
        })
    }
}

/// Solves the LP exactly up to floating-point pivoting.
pub fn solve_lp<T: Real>(lp: &LinearProgram<T>) -> Result<LpSolution<T>> {
    let nv = lp.cost.len();
    let m = lp.rows.len();
    if lp.rhs.len() != m {
        return Err(Error::DimensionMismatch(m, lp.rhs.len()));
    }
    if let Some(r) = lp.rows.iter().find(|r| r.len() != nv) {
        return Err(Error::DimensionMismatch(nv, r.len()));
    }
    let scale = lp
        .rows
        .iter()
        .flatten()
        .chain(lp.rhs.iter())
        .fold(T::one(), |a, x| a.max(x.abs()));
    let eps = T::lit(1e-11) * scale;

    // phase 1: artificials in columns nv..nv+m
    let width = nv + m + 1;
    let mut t = Vec::with_capacity(m + 1);
    for (row, &b) in lp.rows.iter().zip(&lp.rhs) {
        let sign = if b < T::zero() { -T::one() } else { T::one() };
        let mut r = vec![T::zero(); width];
        for (k, a) in row.iter().enumerate() {
            r[k] = *a * sign;
        }
        r[nv + t.len()] = T::one();
        r[width - 1] = b * sign;
        t.push(r);
    }
    let mut obj = vec![T::zero(); width];
    for r in &t {
        for k in 0..nv {
            obj[k] = obj[k] - r[k];
        }
        obj[width - 1] = obj[width - 1] - r[width - 1];
    }
    t.push(obj);
    let mut tab = Tableau {
        t,
        basis: (nv..nv + m).collect(),
        eps,
    };
    let cap = 50_000 + 100 * (nv + m);
    tab.optimize(nv, cap)?;
    let infeas = -tab.t[m][width - 1];
    if infeas > T::lit(1e-9) * scale {
        return Err(Error::Infeasible(format!("phase-one residual {infeas}")));
    }

    // drive artificials out of the basis; drop redundant rows
    let mut r = 0;
    while r < tab.rows() {
        if tab.basis[r] >= nv {
            let col = (0..nv).find(|&c| tab.t[r][c].abs() > eps);
            match col {
                Some(c) => {
                    tab.pivot(r, c);
                    r += 1;
                }
                None => {
                    tab.t.remove(r);
                    tab.basis.remove(r);
                }
            }
        } else {
            r += 1;
        }
    }

    // phase 2: restore the true objective
    let rows = tab.rows();
    let mut obj = vec![T::zero(); width];
    obj[..nv].copy_from_slice(&lp.cost);
    for i in 0..rows {
        let b = tab.basis[i];
        let cb = lp.cost[b];
        if cb != T::zero() {
            for k in 0..width {
                obj[k] = obj[k] - cb * tab.t[i][k];
            }
        }
    }
    tab.t[rows] = obj;
    tab.optimize(nv, cap)?;

    let mut x = vec![T::zero(); nv];
    for i in 0..rows {
        x[tab.basis[i]] = tab.t[i][width - 1].max(T::zero());
    }
    let objective = x.iter().zip(&lp.cost).map(|(a, b)| *a * *b).sum();
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn small_program() {
        // min -x - y  s.t. x + 2y + s1 = 4, 3x + y + s2 = 6
        let lp = LinearProgram {
            cost: vec![-1.0, -1.0, 0.0, 0.0],
            rows: vec![vec![1.0, 2.0, 1.0, 0.0], vec![3.0, 1.0, 0.0, 1.0]],
            rhs: vec![4.0, 6.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, -2.8, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[0], 1.6, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 1.2, epsilon = 1e-12);
    }

    #[test]
    fn redundant_rows_and_infeasibility() {
        let lp = LinearProgram {
            cost: vec![1.0, 2.0],
            rows: vec![vec![1.0, 1.0], vec![2.0, 2.0]],
            rhs: vec![1.0, 2.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-12);
        let bad = LinearProgram {
            cost: vec![1.0, 1.0],
            rows: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            rhs: vec![1.0, 2.0],
        };
        assert!(matches!(solve_lp(&bad), Err(Error::Infeasible(_))));
    }

    #[test]
    fn negative_rhs() {
        let lp = LinearProgram {
            cost: vec![1.0, 0.0],
            rows: vec![vec![-1.0, -1.0]],
            rhs: vec![-3.0],
        };
        let sol = solve_lp(&lp).unwrap();
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.x[1], 3.0, epsilon = 1e-12);
    }
}
