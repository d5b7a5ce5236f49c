//! Optimal transport between two uniform token distributions.
//!
//! Small problems are solved exactly by successive shortest paths on the
//! bipartite transportation network; the solver only needs ordered field
//! arithmetic, so it also runs on exact rationals. Larger problems use
//! log-domain Sinkhorn iterations.

use ndarray::{Array1, Array2, ArrayView2};
use num_traits::Num;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest `M * N` solved exactly.
pub const EXACT_LIMIT: usize = 10_000;

/// Optimal plan with integer flows for uniform marginals.
///
/// Row `m` ships `N` units and column `n` receives `M` units, so
/// `flow[m][n] / (M * N)` is the transport mass with marginals `1/M`, `1/N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerPlan {
    pub rows: usize,
    pub cols: usize,
    pub flow: Vec<usize>,
}

impl IntegerPlan {
    pub fn get(&self, m: usize, n: usize) -> usize {
        self.flow[m * self.cols + n]
    }

    pub fn total(&self) -> usize {
        self.rows * self.cols
    }
}

/// Exact minimum-cost plan for uniform marginals.
///
/// `cost` is row-major `rows x cols`.
pub fn exact_uniform_plan<T>(cost: &[T], rows: usize, cols: usize) -> Result<IntegerPlan>
where
    T: Num + PartialOrd + Copy,
{
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("transport problem"));
    }
    if cost.len() != rows * cols {
        return Err(Error::Transport(format!(
            "cost has {} entries, expected {}",
            cost.len(),
            rows * cols
        )));
    }
    // Shift costs to be non-negative so zero initial potentials are feasible.
    let min = cost.iter().copied().fold(cost[0], |a, b| if b < a { b } else { a });
    let c: Vec<T> = cost.iter().map(|&v| v - min).collect();

    let mut supply = vec![cols; rows];
    let mut demand = vec![rows; cols];
    let mut flow = vec![0usize; rows * cols];
    // Node layout: rows, then cols, then the sink and the source.
    let sink = rows + cols;
    let source = sink + 1;
    let n_nodes = rows + cols + 2;
    let mut pot = vec![T::zero(); n_nodes];
    let mut remaining = rows * cols;

    while remaining > 0 {
        let mut dist: Vec<Option<T>> = vec![None; n_nodes];
        let mut prev: Vec<usize> = vec![usize::MAX; n_nodes];
        let mut done = vec![false; n_nodes];
        dist[source] = Some(T::zero());
        done[source] = true;
        for (i, &s) in supply.iter().enumerate() {
            if s > 0 {
                dist[i] = Some(pot[source] - pot[i]);
                prev[i] = source;
            }
        }
        loop {
            let mut best: Option<(usize, T)> = None;
            for (v, d) in dist.iter().enumerate() {
                if let (false, Some(d)) = (done[v], d) {
                    if best.is_none_or(|(_, b)| *d < b) {
                        best = Some((v, *d));
                    }
                }
            }
            let Some((u, du)) = best else { break };
            done[u] = true;
            if u == sink {
                break;
            }
            let mut relax = |v: usize, reduced: T, dist: &mut Vec<Option<T>>| {
                let cand = du + reduced;
                if !done[v] && dist[v].is_none_or(|dv| cand < dv) {
                    dist[v] = Some(cand);
                    prev[v] = u;
                }
            };
            if u < rows {
                for j in 0..cols {
                    let v = rows + j;
                    relax(v, c[u * cols + j] + pot[u] - pot[v], &mut dist);
                }
            } else {
                let j = u - rows;
                for i in 0..rows {
                    if flow[i * cols + j] > 0 {
                        relax(i, pot[u] - pot[i] - c[i * cols + j], &mut dist);
                    }
                }
                if demand[j] > 0 {
                    relax(sink, pot[u] - pot[sink], &mut dist);
                }
            }
        }
        let Some(d_sink) = dist[sink] else {
            return Err(Error::Transport("no augmenting path".into()));
        };
        for v in 0..n_nodes {
            let d = match dist[v] {
                Some(d) if done[v] => d,
                _ => d_sink,
            };
            pot[v] = pot[v] + d;
        }

        // Walk back from the sink to find the bottleneck.
        let last_col = prev[sink];
        let mut path = vec![last_col];
        let mut v = last_col;
        while prev[v] != source {
            v = prev[v];
            path.push(v);
        }
        path.reverse();
        let first_row = path[0];
        let mut amount = supply[first_row].min(demand[last_col - rows]);
        for w in path.windows(2) {
            if w[0] >= rows {
                let (j, i) = (w[0] - rows, w[1]);
                amount = amount.min(flow[i * cols + j]);
            }
        }
        for w in path.windows(2) {
            if w[0] < rows {
                flow[w[0] * cols + (w[1] - rows)] += amount;
            } else {
                flow[w[1] * cols + (w[0] - rows)] -= amount;
            }
        }
        supply[first_row] -= amount;
        demand[last_col - rows] -= amount;
        remaining -= amount;
    }

    Ok(IntegerPlan { rows, cols, flow })
}

/// Entropic-regularized plan with marginals `1/M`, `1/N`.
pub fn sinkhorn_uniform_plan<F: Scalar>(
    cost: ArrayView2<'_, F>,
    epsilon: F,
    tolerance: F,
    max_iters: usize,
) -> Result<Array2<F>> {
    let (rows, cols) = cost.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyInput("transport problem"));
    }
    let log_a = -F::from_count(rows).ln();
    let log_b = -F::from_count(cols).ln();
    let k = cost.mapv(|c| -c / epsilon);
    let mut f = Array1::<F>::zeros(rows);
    let mut g = Array1::<F>::zeros(cols);

    let lse = |vals: &mut dyn Iterator<Item = F>| -> F {
        let v: Vec<F> = vals.collect();
        let max = v.iter().copied().fold(F::neg_infinity(), F::max);
        max + v.iter().map(|&x| (x - max).exp()).sum::<F>().ln()
    };
    let plan = |f: &Array1<F>, g: &Array1<F>| {
        Array2::from_shape_fn((rows, cols), |(i, j)| (k[[i, j]] + f[i] + g[j]).exp())
    };

    for _ in 0..max_iters {
        for i in 0..rows {
            f[i] = log_a - lse(&mut (0..cols).map(|j| k[[i, j]] + g[j]));
        }
        for j in 0..cols {
            g[j] = log_b - lse(&mut (0..rows).map(|i| k[[i, j]] + f[i]));
        }
        // Columns are exact after the g-update; check rows.
        let p = plan(&f, &g);
        let a = F::one() / F::from_count(rows);
        let violation = p
            .rows()
            .into_iter()
            .map(|r| (r.sum() - a).abs())
            .fold(F::zero(), F::max);
        if violation <= tolerance {
            return Ok(p);
        }
    }
    Err(Error::Transport(format!(
        "sinkhorn did not reach marginal tolerance within {max_iters} iterations"
    )))
}

/// Plan for uniform marginals: exact when `M * N <= EXACT_LIMIT`, Sinkhorn otherwise.
pub fn uniform_plan<F: Scalar>(cost: ArrayView2<'_, F>) -> Result<Array2<F>> {
    let (rows, cols) = cost.dim();
    if rows * cols <= EXACT_LIMIT {
        let flat: Vec<F> = cost.iter().copied().collect();
        let plan = exact_uniform_plan(&flat, rows, cols)?;
        let total = F::from_count(plan.total());
        Ok(Array2::from_shape_fn((rows, cols), |(i, j)| {
            F::from_count(plan.get(i, j)) / total
        }))
    } else {
        sinkhorn_uniform_plan(cost, F::lit(0.01), F::lit(1e-6), 5_000)
    }
}
