//! Exact discrete optimal transport by the transportation simplex
//! (MODI / u-v method) on a spanning-tree basis.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// An optimal plan, listed sparsely over the original row/column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution<T> {
    /// `(row, col, mass)` with `mass > 0`.
    pub plan: Vec<(usize, usize, T)>,
    pub cost: T,
    /// Row potentials (zero on rows without supply).
    pub u: Vec<T>,
    /// Column potentials (zero on columns without demand).
    pub v: Vec<T>,
    pub pivots: usize,
}

/// Minimises `Σ c(i,j) x_ij` over plans with row sums `supply` and column
/// sums `demand`. Totals are assumed equal up to rounding.
pub fn solve_transport<T: Real>(
    supply: &[T],
    demand: &[T],
    cost: impl Fn(usize, usize) -> T,
) -> Result<TransportSolution<T>> {
    let rows: Vec<usize> = (0..supply.len()).filter(|&i| supply[i] > T::zero()).collect();
    let cols: Vec<usize> = (0..demand.len()).filter(|&j| demand[j] > T::zero()).collect();
    if rows.is_empty() || cols.is_empty() {
        return Err(Error::InvalidArgument("transport marginals have no mass".into()));
    }
    let m = rows.len();
    let n = cols.len();
    let c: Vec<T> = rows
        .iter()
        .flat_map(|&i| cols.iter().map(move |&j| (i, j)))
        .map(|(i, j)| cost(i, j))
        .collect();
    let s: Vec<T> = rows.iter().map(|&i| supply[i]).collect();
    let d: Vec<T> = cols.iter().map(|&j| demand[j]).collect();

    let mut tab = Tableau::northwest(m, n, &s, &d);
    let cmax = c.iter().fold(T::zero(), |a, x| a.max(x.abs()));
    let eps = T::lit(1e-12) * (T::one() + cmax);
    let cap = 200 * (m + n) * (m + n) + 1000;
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;
    let (mut u, mut v) = (vec![T::zero(); m], vec![T::zero(); n]);
    loop {
        tab.potentials(&c, &mut u, &mut v);
        let bland = degenerate_run > 2 * (m + n);
        let entering = tab.price(&c, &u, &v, eps, bland);
        let Some((ei, ej)) = entering else { break };
        if pivots >= cap {
            return Err(Error::NotConverged {
                iterations: pivots,
                best_value: tab.cost(&c).to_f64_lossy(),
                gap: f64::NAN,
                best_disagreement: Vec::new(),
            });
        }
        let theta = tab.pivot(ei, ej);
        pivots += 1;
        if theta > T::zero() {
            degenerate_run = 0;
        } else {
            degenerate_run += 1;
        }
    }

    let mut plan = Vec::with_capacity(m + n);
    for (&(i, j), &x) in tab.cells.iter().zip(&tab.flow) {
        if x > T::zero() {
            plan.push((rows[i], cols[j], x));
        }
    }
    plan.sort_by_key(|&(i, j, _)| (i, j));
    let total_cost = plan.iter().map(|&(i, j, x)| cost(i, j) * x).sum();
    let mut uu = vec![T::zero(); supply.len()];
    let mut vv = vec![T::zero(); demand.len()];
    for (k, &i) in rows.iter().enumerate() {
        uu[i] = u[k];
    }
    for (k, &j) in cols.iter().enumerate() {
        vv[j] = v[k];
    }
    Ok(TransportSolution {
        plan,
        cost: total_cost,
        u: uu,
        v: vv,
        pivots,
    })
}

/// Basis of `m + n − 1` cells forming a spanning tree of the bipartite
/// row/column graph.
struct Tableau<T> {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<T>,
    /// Basis slot of each cell, or `usize::MAX`.
    slot: Vec<usize>,
}

impl<T: Real> Tableau<T> {
    fn northwest(m: usize, n: usize, s: &[T], d: &[T]) -> Self {
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        let (mut i, mut j) = (0, 0);
        let (mut rs, mut rd) = (s[0], d[0]);
        loop {
            let x = rs.min(rd).max(T::zero());
            cells.push((i, j));
            flow.push(x);
            rs = rs - x;
            rd = rd - x;
            if i == m - 1 && j == n - 1 {
                break;
            }
            let advance_row = if i == m - 1 {
                false
            } else if j == n - 1 {
                true
            } else {
                rs <= rd
            };
            if advance_row {
                i += 1;
                rs = s[i];
            } else {
                j += 1;
                rd = d[j];
            }
        }
        // fold any rounding imbalance into the last cell
        let last = flow.len() - 1;
        flow[last] = flow[last] + rs.min(rd).max(T::zero());
        let mut slot = vec![usize::MAX; m * n];
        for (k, &(a, b)) in cells.iter().enumerate() {
            slot[a * n + b] = k;
        }
        Self {
            m,
            n,
            cells,
            flow,
            slot,
        }
    }

    fn cost(&self, c: &[T]) -> T {
        self.cells
            .iter()
            .zip(&self.flow)
            .map(|(&(i, j), &x)| c[i * self.n + j] * x)
            .sum()
    }

    /// Adjacency over nodes `0..m` (rows) and `m..m+n` (columns); each
    /// entry is `(neighbour, basis slot)`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, c: &[T], u: &mut [T], v: &mut [T]) {
        let adj = self.adjacency();
        let mut seen = vec![false; self.m + self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        u[0] = T::zero();
        while let Some(node) = stack.pop() {
            for &(nb, k) in &adj[node] {
                if seen[nb] {
                    continue;
                }
                seen[nb] = true;
                let (i, j) = self.cells[k];
                let cij = c[i * self.n + j];
                if nb >= self.m {
                    v[j] = cij - u[i];
                } else {
                    u[i] = cij - v[j];
                }
                stack.push(nb);
            }
        }
    }

    /// Most negative reduced cost (Dantzig), or the first negative one in
    /// index order when `bland` is set.
    fn price(&self, c: &[T], u: &[T], v: &[T], eps: T, bland: bool) -> Option<(usize, usize)> {
        let mut best = -eps;
        let mut arg = None;
        for i in 0..self.m {
            let row = &c[i * self.n..(i + 1) * self.n];
            for j in 0..self.n {
                if self.slot[i * self.n + j] != usize::MAX {
                    continue;
                }
                let r = row[j] - u[i] - v[j];
                if r < best {
                    best = r;
                    arg = Some((i, j));
                    if bland {
                        return arg;
                    }
                }
            }
        }
        arg
    }

    /// Brings cell `(ei, ej)` into the basis and returns the step size.
    fn pivot(&mut self, ei: usize, ej: usize) -> T {
        let adj = self.adjacency();
        let start = self.m + ej;
        let target = ei;
        // parent pointers from the entering column to the entering row
        let mut parent = vec![(usize::MAX, usize::MAX); self.m + self.n];
        let mut stack = vec![start];
        parent[start] = (start, usize::MAX);
        while let Some(node) = stack.pop() {
            if node == target {
                break;
            }
            for &(nb, k) in &adj[node] {
                if parent[nb].0 == usize::MAX {
                    parent[nb] = (node, k);
                    stack.push(nb);
                }
            }
        }
        // walk back from the row to the column; the edge leaving the column
        // gets −θ, then signs alternate
        let mut path = Vec::new();
        let mut node = target;
        while node != start {
            let (p, k) = parent[node];
            path.push(k);
            node = p;
        }
        path.reverse();
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for (step, &k) in path.iter().enumerate() {
            if step % 2 == 0 {
                let x = self.flow[k];
                if x < theta || (x == theta && k < leave) {
                    theta = x;
                    leave = k;
                }
            }
        }
        for (step, &k) in path.iter().enumerate() {
            if step % 2 == 0 {
                self.flow[k] = (self.flow[k] - theta).max(T::zero());
            } else {
                self.flow[k] = self.flow[k] + theta;
            }
        }
        let (li, lj) = self.cells[leave];
        self.slot[li * self.n + lj] = usize::MAX;
        self.cells[leave] = (ei, ej);
        self.flow[leave] = theta;
        self.slot[ei * self.n + ej] = leave;
        theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::lp::{solve_lp, LinearProgram};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize, zeros: bool) -> Vec<f64> {
        let mut w: Vec<f64> = (0..n)
            .map(|_| if zeros && rng.gen::<f64>() < 0.3 { 0.0 } else { rng.gen::<f64>() })
            .collect();
        if w.iter().all(|x| *x == 0.0) {
            w[0] = 1.0;
        }
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= s);
        w
    }

    fn check_plan(sol: &TransportSolution<f64>, s: &[f64], d: &[f64]) {
        let mut rs = vec![0.0; s.len()];
        let mut cs = vec![0.0; d.len()];
        for &(i, j, x) in &sol.plan {
            assert!(x > 0.0);
            rs[i] += x;
            cs[j] += x;
        }
        for (a, b) in rs.iter().zip(s) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        for (a, b) in cs.iter().zip(d) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_cost_gives_tv() {
        let s = [0.5, 0.5];
        let d = [0.25, 0.75];
        let sol = solve_transport(&s, &d, |i, j| if i == j { 0.0 } else { 1.0 }).unwrap();
        assert_abs_diff_eq!(sol.cost, 0.25, epsilon = 1e-15);
        check_plan(&sol, &s, &d);
    }

    #[test]
    fn matches_dense_lp_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..200 {
            let m = 1 + trial % 6;
            let n = 1 + (trial / 6) % 6;
            let zeros = trial % 3 == 0;
            let s = random_simplex(&mut rng, m, zeros);
            let d = random_simplex(&mut rng, n, zeros);
            // integer-valued costs exercise degeneracy
            let c: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| (rng.gen_range(0..4)) as f64).collect())
                .collect();
            let sol = solve_transport(&s, &d, |i, j| c[i][j]).unwrap();
            check_plan(&sol, &s, &d);

            let mut rows = Vec::new();
            let mut rhs = Vec::new();
            for i in 0..m {
                let mut r = vec![0.0; m * n];
                (0..n).for_each(|j| r[i * n + j] = 1.0);
                rows.push(r);
                rhs.push(s[i]);
            }
            for j in 0..n {
                let mut r = vec![0.0; m * n];
                (0..m).for_each(|i| r[i * n + j] = 1.0);
                rows.push(r);
                rhs.push(d[j]);
            }
            let lp = LinearProgram {
                cost: c.iter().flatten().copied().collect(),
                rows,
                rhs,
            };
            let oracle = solve_lp(&lp).unwrap();
            assert_abs_diff_eq!(sol.cost, oracle.objective, epsilon = 1e-10);

            // dual feasibility on the supports: u_i + v_j ≤ c_ij
            for i in (0..m).filter(|&i| s[i] > 0.0) {
                for j in (0..n).filter(|&j| d[j] > 0.0) {
                    assert!(sol.u[i] + sol.v[j] <= c[i][j] + 1e-10);
                }
            }
        }
    }

    #[test]
    fn larger_random_instances_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let s = random_simplex(&mut rng, 40, false);
            let d = random_simplex(&mut rng, 40, false);
            let c: Vec<f64> = (0..1600).map(|_| rng.gen::<f64>()).collect();
            let sol = solve_transport(&s, &d, |i, j| c[i * 40 + j]).unwrap();
            check_plan(&sol, &s, &d);
            let dual: f64 = s.iter().zip(&sol.u).map(|(a, b)| a * b).sum::<f64>()
                + d.iter().zip(&sol.v).map(|(a, b)| a * b).sum::<f64>();
            assert_abs_diff_eq!(dual, sol.cost, epsilon = 1e-10);
        }
    }
}
