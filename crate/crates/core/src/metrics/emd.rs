//! Exact earth mover's distance between two normalized maps via the
//! transportation simplex (northwest-corner start, MODI pivoting).
//! Grids above the exact-size limit are box-downsampled first and the
//! result is flagged approximate.

use crate::error::{Error, Result};
use crate::map::SaliencyMap;
use crate::scalar::{lit, Real};

/// Minimal transport cost between `supply` and `demand` (equal totals)
/// under the given unit cost. Exact up to floating-point rounding.
pub fn transport_min_cost<T: Real>(
    supply: &[T],
    demand: &[T],
    cost: impl Fn(usize, usize) -> T,
) -> T {
    let n = supply.len();
    let m = demand.len();
    assert!(n > 0 && m > 0);
    if n == 1 {
        return (0..m).map(|j| demand[j] * cost(0, j)).sum();
    }
    if m == 1 {
        return (0..n).map(|i| supply[i] * cost(i, 0)).sum();
    }

    // northwest-corner initial basis: n + m - 1 cells forming a tree
    let mut a = supply.to_vec();
    let mut b = demand.to_vec();
    let mut cells: Vec<(usize, usize)> = Vec::with_capacity(n + m - 1);
    let mut flows: Vec<T> = Vec::with_capacity(n + m - 1);
    let (mut i, mut j) = (0, 0);
    loop {
        let f = a[i].min(b[j]);
        cells.push((i, j));
        flows.push(f);
        a[i] -= f;
        b[j] -= f;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if a[i] <= T::zero() && i < n - 1 {
            i += 1;
        } else {
            j += 1;
        }
    }

    let tol = lit::<T>(-1e-12);
    let max_pivots = 50 * (n + m);
    for _ in 0..max_pivots {
        // potentials from the basis tree: u_i + v_j = c_ij on basic cells
        let (u, v) = potentials(n, m, &cells, &cost);

        // most negative reduced cost enters
        let mut best = T::zero();
        let mut entering = None;
        for ii in 0..n {
            for jj in 0..m {
                let rc = cost(ii, jj) - u[ii] - v[jj];
                if rc < best {
                    best = rc;
                    entering = Some((ii, jj));
                }
            }
        }
        let Some((ei, ej)) = entering else { break };
        if best >= tol {
            break;
        }

        // unique tree path from row ei to column ej closes the cycle
        let path = tree_path(n, m, &cells, ei, ej);
        // entering cell is +; path edges alternate -, +, -, ... from ei
        let mut theta = T::infinity();
        let mut leaving = usize::MAX;
        for (pos, &edge) in path.iter().enumerate() {
            if pos % 2 == 0 && flows[edge] < theta {
                theta = flows[edge];
                leaving = edge;
            }
        }
        for (pos, &edge) in path.iter().enumerate() {
            if pos % 2 == 0 {
                flows[edge] -= theta;
            } else {
                flows[edge] += theta;
            }
        }
        cells[leaving] = (ei, ej);
        flows[leaving] = theta;
    }

    cells
        .iter()
        .zip(&flows)
        .map(|(&(i, j), f)| *f * cost(i, j))
        .sum()
}

fn potentials<T: Real>(
    n: usize,
    m: usize,
    cells: &[(usize, usize)],
    cost: &impl Fn(usize, usize) -> T,
) -> (Vec<T>, Vec<T>) {
    // nodes: rows 0..n, cols n..n+m
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    for (idx, &(i, j)) in cells.iter().enumerate() {
        adj[i].push((n + j, idx));
        adj[n + j].push((i, idx));
    }
    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); m];
    let mut known = vec![false; n + m];
    let mut queue = std::collections::VecDeque::new();
    known[0] = true;
    queue.push_back(0usize);
    while let Some(node) = queue.pop_front() {
        for &(other, idx) in &adj[node] {
            if known[other] {
                continue;
            }
            let (i, j) = cells[idx];
            if other >= n {
                v[other - n] = cost(i, j) - u[i];
            } else {
                u[other] = cost(i, j) - v[node - n];
            }
            known[other] = true;
            queue.push_back(other);
        }
    }
    (u, v)
}

/// Basis-edge indices along the unique tree path from row `ei` to
/// column `ej`, ordered starting at the `ei` end.
fn tree_path(n: usize, m: usize, cells: &[(usize, usize)], ei: usize, ej: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n + m];
    for (idx, &(i, j)) in cells.iter().enumerate() {
        adj[i].push((n + j, idx));
        adj[n + j].push((i, idx));
    }
    let target = n + ej;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n + m];
    let mut visited = vec![false; n + m];
    visited[ei] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(ei);
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        for &(other, idx) in &adj[node] {
            if !visited[other] {
                visited[other] = true;
                parent[other] = Some((node, idx));
                queue.push_back(other);
            }
        }
    }
    let mut path = Vec::new();
    let mut node = target;
    while let Some((prev, idx)) = parent[node] {
        path.push(idx);
        node = prev;
    }
    path.reverse();
    path
}

/// EMD with Euclidean pixel-center ground distance. Returns the distance
/// and whether the grid was downsampled to fit the exact-size limit.
pub fn emd<T: Real>(
    gt: &SaliencyMap<T>,
    pred: &SaliencyMap<T>,
    exact_limit: usize,
) -> Result<(T, bool)> {
    gt.same_dims(pred)?;
    let sum_gt: T = gt.values().iter().copied().sum();
    let sum_pred: T = pred.values().iter().copied().sum();
    if sum_gt <= T::zero() || sum_pred <= T::zero() {
        return Err(Error::DegeneratePrediction("all-zero map has no mass".into()));
    }

    let (gt_small, pred_small, scale, approx) = if gt.len() > exact_limit {
        let mut k = 2usize;
        while gt.height().div_ceil(k) * gt.width().div_ceil(k) > exact_limit {
            k += 1;
        }
        (downsample(gt, k), downsample(pred, k), lit::<T>(k as f64), true)
    } else {
        (gt.clone(), pred.clone(), T::one(), false)
    };

    let width = gt_small.width();
    let collect = |map: &SaliencyMap<T>, total: T| -> (Vec<T>, Vec<(T, T)>) {
        let mut mass = Vec::new();
        let mut coords = Vec::new();
        for (idx, v) in map.values().iter().enumerate() {
            if *v > T::zero() {
                mass.push(*v / total);
                coords.push((lit((idx % width) as f64), lit((idx / width) as f64)));
            }
        }
        (mass, coords)
    };
    let sum_gt_small: T = gt_small.values().iter().copied().sum();
    let sum_pred_small: T = pred_small.values().iter().copied().sum();
    let (supply, src) = collect(&gt_small, sum_gt_small);
    let (demand, dst) = collect(&pred_small, sum_pred_small);

    let cost = |i: usize, j: usize| {
        let dx = src[i].0 - dst[j].0;
        let dy = src[i].1 - dst[j].1;
        (dx * dx + dy * dy).sqrt()
    };
    Ok((transport_min_cost(&supply, &demand, cost) * scale, approx))
}

fn downsample<T: Real>(map: &SaliencyMap<T>, k: usize) -> SaliencyMap<T> {
    let (w, h) = map.dims();
    let (ow, oh) = (w.div_ceil(k), h.div_ceil(k));
    let mut out = vec![T::zero(); ow * oh];
    for y in 0..h {
        for x in 0..w {
            out[(y / k) * ow + (x / k)] += map.get(x, y);
        }
    }
    SaliencyMap::new(ow, oh, out).expect("downsampled mass stays valid")
}
