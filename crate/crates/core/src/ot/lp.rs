//! Exact discrete optimal transport by the transportation simplex method.
//!
//! The basis is kept as a spanning tree of `n + m - 1` cells over the
//! bipartite row/column graph. Each pivot recomputes the dual potentials from
//! the tree, prices every non-basic cell and pushes flow around the unique
//! cycle closed by the entering cell. Dantzig pricing is used until a run of
//! degenerate pivots is observed, after which Bland's rule takes over, which
//! rules out cycling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::assignment::hungarian_with_potentials;
use super::measure::{ground_cost_matrix, CostSpec, Coupling, EmpiricalMeasure, Matrix};

/// Optimal plan together with the dual certificate that proves it optimal.
#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub coupling: Coupling<T>,
    pub value: T,
    /// Row potentials `u`, with `u_i + v_j <= C_ij` for all cells.
    pub row_potentials: Vec<T>,
    /// Column potentials `v`.
    pub col_potentials: Vec<T>,
    pub pivots: usize,
}

/// Minimum of `sum_ij P_ij C_ij` over couplings of `a` and `b`.
pub fn kantorovich_lp<T: Scalar>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    cost: &CostSpec<T>,
) -> Result<(Coupling<T>, T)> {
    let sol = kantorovich_lp_full(a, b, cost)?;
    Ok((sol.coupling, sol.value))
}

pub fn kantorovich_lp_full<T: Scalar>(
    a: &EmpiricalMeasure<T>,
    b: &EmpiricalMeasure<T>,
    cost: &CostSpec<T>,
) -> Result<LpSolution<T>> {
    let c = ground_cost_matrix(a, b, cost)?;
    if a.len() == b.len() && a.is_uniform() && b.is_uniform() {
        return Ok(uniform_square(a.weights(), &c));
    }
    solve_transport(a.weights(), b.weights(), &c)
}

/// Uniform marginals of equal size: the plan polytope is the scaled Birkhoff
/// polytope, so an optimal assignment is an optimal vertex.
fn uniform_square<T: Scalar>(weights: &[T], c: &Matrix<T>) -> LpSolution<T> {
    let (assignment, u, v) = hungarian_with_potentials(c);
    let mut plan = Matrix::zeros(c.rows(), c.cols());
    let mut value = T::zero();
    for (i, &j) in assignment.iter().enumerate() {
        plan.set(i, j, weights[i]);
        value += weights[i] * c.get(i, j);
    }
    LpSolution {
        coupling: Coupling::from_plan(plan),
        value,
        row_potentials: u,
        col_potentials: v,
        pivots: 0,
    }
}

/// Transportation problem with supplies `supply`, demands `demand` and cost
/// matrix `cost`. Both marginals must carry the same total mass.
pub fn solve_transport<T: Scalar>(
    supply: &[T],
    demand: &[T],
    cost: &Matrix<T>,
) -> Result<LpSolution<T>> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidMeasure("empty marginal".into()));
    }
    if cost.rows() != n || cost.cols() != m {
        return Err(Error::ShapeMismatch(format!(
            "cost is {}x{}, marginals are {n} and {m}",
            cost.rows(),
            cost.cols()
        )));
    }
    let sa: T = supply.iter().copied().sum();
    let sb: T = demand.iter().copied().sum();
    let mass_tol = T::lit(1e-9).max(T::epsilon() * T::from_usize_lossy(64 * (n + m)));
    if (sa - sb).abs() > mass_tol {
        return Err(Error::InvalidMeasure(format!(
            "marginals carry different mass ({sa} vs {sb})"
        )));
    }
    if supply.iter().chain(demand).any(|w| *w < T::zero() || !w.is_finite()) {
        return Err(Error::InvalidMeasure("negative or non-finite marginal weight".into()));
    }
    if cost.as_slice().iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("cost matrix entry".into()));
    }

    let mut tree = Tree::northwest_corner(supply, demand);
    let opt_tol = T::solver_tol() * (T::one() + cost.max_abs());
    let max_pivots = 100 * (n * m + n + m) + 1000;
    let mut degenerate_run = 0usize;
    let mut pivots = 0usize;

    loop {
        let (u, v) = tree.potentials(cost);
        let use_bland = degenerate_run > n + m;
        let entering = price(cost, &tree, &u, &v, opt_tol, use_bland);
        let Some((ei, ej)) = entering else {
            let plan = tree.plan();
            let coupling = Coupling::from_plan(plan);
            let value = coupling.cost(cost);
            return Ok(LpSolution {
                coupling,
                value,
                row_potentials: u,
                col_potentials: v,
                pivots,
            });
        };
        if pivots >= max_pivots {
            return Err(Error::InvalidArgument(format!(
                "transportation simplex exceeded {max_pivots} pivots"
            )));
        }
        let theta = tree.pivot(ei, ej);
        pivots += 1;
        if theta <= T::zero() {
            degenerate_run += 1;
        } else {
            degenerate_run = 0;
        }
    }
}

/// Returns the entering cell, or `None` at optimality.
fn price<T: Scalar>(
    cost: &Matrix<T>,
    tree: &Tree<T>,
    u: &[T],
    v: &[T],
    tol: T,
    bland: bool,
) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut best_r = -tol;
    for i in 0..cost.rows() {
        let row = cost.row(i);
        for (j, c) in row.iter().enumerate() {
            let r = *c - u[i] - v[j];
            if r < best_r && !tree.is_basic(i, j) {
                if bland {
                    return Some((i, j));
                }
                best_r = r;
                best = Some((i, j));
            }
        }
    }
    best
}

/// Spanning-tree basis. Nodes `0..n` are rows, `n..n+m` are columns.
struct Tree<T> {
    n: usize,
    m: usize,
    cells: Vec<(usize, usize)>,
    flows: Vec<T>,
    /// `basic[i * m + j]` holds the cell index + 1, or 0 when non-basic.
    basic: Vec<usize>,
    adj: Vec<Vec<usize>>,
}

impl<T: Scalar> Tree<T> {
    fn northwest_corner(supply: &[T], demand: &[T]) -> Self {
        let n = supply.len();
        let m = demand.len();
        let mut ra = supply.to_vec();
        let mut rb = demand.to_vec();
        let mut tree = Tree {
            n,
            m,
            cells: Vec::with_capacity(n + m - 1),
            flows: Vec::with_capacity(n + m - 1),
            basic: vec![0; n * m],
            adj: vec![Vec::new(); n + m],
        };
        let (mut i, mut j) = (0, 0);
        loop {
            let x = ra[i].min(rb[j]).max(T::zero());
            ra[i] -= x;
            rb[j] -= x;
            tree.insert(i, j, x);
            if i == n - 1 && j == m - 1 {
                break;
            }
            if i == n - 1 {
                j += 1;
            } else if j == m - 1 || ra[i] <= rb[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        // Rounding residue from the marginals lands on the last cell.
        let last = tree.flows.len() - 1;
        tree.flows[last] += ra[n - 1].min(rb[m - 1]).max(T::zero());
        tree
    }

    fn insert(&mut self, i: usize, j: usize, flow: T) {
        let k = self.cells.len();
        self.cells.push((i, j));
        self.flows.push(flow);
        self.basic[i * self.m + j] = k + 1;
        self.adj[i].push(k);
        self.adj[self.n + j].push(k);
    }

    #[inline]
    fn is_basic(&self, i: usize, j: usize) -> bool {
        self.basic[i * self.m + j] != 0
    }

    fn other_end(&self, k: usize, node: usize) -> usize {
        let (i, j) = self.cells[k];
        if node == i {
            self.n + j
        } else {
            i
        }
    }

    fn potentials(&self, cost: &Matrix<T>) -> (Vec<T>, Vec<T>) {
        let mut pot = vec![T::zero(); self.n + self.m];
        let mut seen = vec![false; self.n + self.m];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(node) = stack.pop() {
            for &k in &self.adj[node] {
                let other = self.other_end(k, node);
                if seen[other] {
                    continue;
                }
                let (i, j) = self.cells[k];
                let c = cost.get(i, j);
                // u_i + v_j = c_ij
                pot[other] = c - pot[node];
                seen[other] = true;
                stack.push(other);
            }
        }
        let v = pot.split_off(self.n);
        (pot, v)
    }

    /// Cell indices along the tree path from node `from` to node `to`.
    fn path(&self, from: usize, to: usize) -> Vec<usize> {
        let total = self.n + self.m;
        let mut parent_edge = vec![usize::MAX; total];
        let mut seen = vec![false; total];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(from);
        seen[from] = true;
        while let Some(node) = queue.pop_front() {
            if node == to {
                break;
            }
            for &k in &self.adj[node] {
                let other = self.other_end(k, node);
                if !seen[other] {
                    seen[other] = true;
                    parent_edge[other] = k;
                    queue.push_back(other);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = to;
        while node != from {
            let k = parent_edge[node];
            edges.push(k);
            node = self.other_end(k, node);
        }
        edges.reverse();
        edges
    }

    /// Brings cell `(ei, ej)` into the basis; returns the step length.
    fn pivot(&mut self, ei: usize, ej: usize) -> T {
        // Cycle: entering (+), then the path from column ej back to row ei
        // alternating (-, +, -, ...).
        let path = self.path(self.n + ej, ei);
        let mut theta = T::infinity();
        let mut leave = usize::MAX;
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let f = self.flows[k];
                // Ties go to the smallest cell position (Bland).
                let key = self.cells[k];
                if f < theta || (f == theta && key < self.cells[leave]) {
                    theta = f;
                    leave = k;
                }
            }
        }
        let theta = theta.max(T::zero());
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.flows[k] = (self.flows[k] - theta).max(T::zero());
            } else {
                self.flows[k] += theta;
            }
        }
        self.replace(leave, ei, ej, theta);
        theta
    }

    fn replace(&mut self, k: usize, i: usize, j: usize, flow: T) {
        let (oi, oj) = self.cells[k];
        self.basic[oi * self.m + oj] = 0;
        self.adj[oi].retain(|&e| e != k);
        self.adj[self.n + oj].retain(|&e| e != k);
        self.cells[k] = (i, j);
        self.flows[k] = flow;
        self.basic[i * self.m + j] = k + 1;
        self.adj[i].push(k);
        self.adj[self.n + j].push(k);
    }

    fn plan(&self) -> Matrix<T> {
        let mut p = Matrix::zeros(self.n, self.m);
        for (&(i, j), &f) in self.cells.iter().zip(&self.flows) {
            p.set(i, j, f.max(T::zero()));
        }
        p
    }
}
