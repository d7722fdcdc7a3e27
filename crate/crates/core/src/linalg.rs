//! Sparse linear systems and a direct banded LU solver.
//!
//! Systems are stored as triplets. The solver reorders the unknowns with
//! reverse Cuthill-McKee on the symmetrized sparsity graph, factors the
//! resulting band matrix with partial pivoting, and checks the residual.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Relative residual accepted by [`solve`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-11;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearSystem {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    rhs: Vec<f64>,
    finalized: bool,
}

impl LinearSystem {
    pub fn new(dim: usize) -> Self {
        LinearSystem {
            dim,
            entries: Vec::new(),
            rhs: vec![0.0; dim],
            finalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Adds `value` to entry `(row, col)`.
    #[inline]
    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.dim && col < self.dim);
        self.entries.push((row, col, value));
        self.finalized = false;
    }

    #[inline]
    pub fn add_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] += value;
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Sorts the triplets and merges duplicates.
    pub fn finalize(&mut self) {
        if self.finalized {
            return;
        }
        // Stable bucketing by row, then a stable insertion sort by column
        // within each short row, so duplicate sums are reproducible.
        let mut starts = vec![0usize; self.dim + 1];
        for e in &self.entries {
            starts[e.0 + 1] += 1;
        }
        for i in 0..self.dim {
            starts[i + 1] += starts[i];
        }
        let mut next = starts.clone();
        let mut bucketed = vec![(0, 0, 0.0); self.entries.len()];
        for &e in &self.entries {
            bucketed[next[e.0]] = e;
            next[e.0] += 1;
        }
        for row in 0..self.dim {
            let slice = &mut bucketed[starts[row]..starts[row + 1]];
            for i in 1..slice.len() {
                let mut j = i;
                while j > 0 && slice[j - 1].1 > slice[j].1 {
                    slice.swap(j - 1, j);
                    j -= 1;
                }
            }
        }
        self.entries = bucketed;
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for &(r, c, v) in &self.entries {
            match merged.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => merged.push((r, c, v)),
            }
        }
        self.entries = merged;
        self.finalized = true;
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Triplets; unique and row-major once finalized.
    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Entries of one row (requires a finalized system).
    pub fn row(&self, row: usize) -> Vec<(usize, f64)> {
        self.entries
            .iter()
            .filter(|e| e.0 == row)
            .map(|e| (e.1, e.2))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut a = vec![vec![0.0; self.dim]; self.dim];
        for &(r, c, v) in &self.entries {
            a[r][c] += v;
        }
        a
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    /// `||A x - b||_inf / (1 + ||b||_inf)`.
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let ax = self.apply(x);
        let num = ax
            .iter()
            .zip(&self.rhs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        num / (1.0 + inf_norm(&self.rhs))
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Solution of a linear system together with its checked residual.
#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub residual: f64,
}

/// Reverse Cuthill-McKee ordering of the graph given by adjacency lists.
/// Returns `order[new] = old`.
pub fn reverse_cuthill_mckee(adjacency: &[Vec<usize>]) -> Vec<usize> {
    let n = adjacency.len();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(adjacency, &degree, seed);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adjacency[v]
                .iter()
                .copied()
                .filter(|&w| !visited[w])
                .collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn bfs_levels(adjacency: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adjacency.len()];
    level[start] = Some(0);
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        let lv = level[v].unwrap();
        for &w in &adjacency[v] {
            if level[w].is_none() {
                level[w] = Some(lv + 1);
                queue.push_back(w);
            }
        }
    }
    level
}

fn pseudo_peripheral(adjacency: &[Vec<usize>], degree: &[usize], seed: usize) -> usize {
    let depth_and_end = |start: usize| {
        let level = bfs_levels(adjacency, start);
        let depth = level.iter().flatten().copied().max().unwrap_or(0);
        let end = (0..adjacency.len())
            .filter(|&v| level[v] == Some(depth))
            .min_by_key(|&v| (degree[v], v))
            .unwrap_or(start);
        (depth, end)
    };
    let mut current = seed;
    let (mut depth, mut end) = depth_and_end(current);
    for _ in 0..16 {
        let (next_depth, next_end) = depth_and_end(end);
        if next_depth <= depth {
            break;
        }
        current = end;
        depth = next_depth;
        end = next_end;
    }
    current
}

/// Row-stored band matrix holding columns `i - kl ..= i + kl + ku` of row `i`,
/// wide enough for the fill produced by partial pivoting.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandLu {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
            pivots: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn factor(&mut self, scale: f64) -> Result<()> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + kl + ku).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in k + 1..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best >= 1e-300 * scale) {
                return Err(Error::SingularMatrix {
                    column: k,
                    pivot: best,
                });
            }
            self.pivots[k] = p;
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            let width = self.width;
            let span = last_col - k;
            for i in k + 1..=last_row {
                let ik = self.idx(i, k);
                let m = self.data[ik] / pivot;
                self.data[ik] = m;
                if m == 0.0 {
                    continue;
                }
                // Columns k+1..=last_col of row k, subtracted from row i.
                let (head, tail) = self.data.split_at_mut(i * width);
                let start_k = k * width + kl + 1;
                let src = &head[start_k..start_k + span];
                let start_i = k + 1 + kl - i;
                let dst = &mut tail[start_i..start_i + span];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d -= m * s;
                }
            }
        }
        Ok(())
    }

    fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk == 0.0 {
                continue;
            }
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] -= self.data[self.idx(i, k)] * bk;
            }
        }
        for k in (0..n).rev() {
            let last = (k + kl + ku).min(n - 1);
            let start = self.idx(k, k) + 1;
            let row = &self.data[start..start + (last - k)];
            let s: f64 = row.iter().zip(&b[k + 1..=last]).map(|(a, x)| a * x).sum();
            b[k] = (b[k] - s) / self.data[self.idx(k, k)];
        }
    }
}

/// Matrix size, off-diagonal pattern and the ordering computed for it.
type CachedOrdering = (usize, Vec<(usize, usize)>, Vec<usize>);

thread_local! {
    /// Ordering of the last sparsity pattern seen on this thread. A time
    /// stepper solves the same pattern every step.
    static LAST_ORDERING: std::cell::RefCell<Option<CachedOrdering>> =
        const { std::cell::RefCell::new(None) };
}

/// Reverse Cuthill-McKee ordering for the off-diagonal `pattern`, reused
/// when the pattern repeats.
fn cached_ordering(n: usize, pattern: Vec<(usize, usize)>) -> Vec<usize> {
    LAST_ORDERING.with(|cell| {
        if let Some((dim, last, order)) = &*cell.borrow() {
            if *dim == n && *last == pattern {
                return order.clone();
            }
        }
        let mut degree = vec![0usize; n];
        for &(r, c) in &pattern {
            degree[r] += 1;
            degree[c] += 1;
        }
        let mut adjacency: Vec<Vec<usize>> =
            degree.iter().map(|&d| Vec::with_capacity(d)).collect();
        for &(r, c) in &pattern {
            adjacency[r].push(c);
            adjacency[c].push(r);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let order = reverse_cuthill_mckee(&adjacency);
        *cell.borrow_mut() = Some((n, pattern, order.clone()));
        order
    })
}

/// Solves `A x = b` by a banded LU with partial pivoting after a
/// bandwidth-reducing permutation. Up to two steps of iterative refinement
/// are taken if the first residual exceeds the tolerance.
pub fn solve(system: &LinearSystem) -> Result<Solution> {
    let n = system.dim;
    if n == 0 {
        return Ok(Solution {
            x: Vec::new(),
            residual: 0.0,
        });
    }
    let mut sys_sorted;
    let system = if system.finalized {
        system
    } else {
        sys_sorted = system.clone();
        sys_sorted.finalize();
        &sys_sorted
    };

    let pattern: Vec<(usize, usize)> = system
        .entries
        .iter()
        .filter(|e| e.0 != e.1 && e.2 != 0.0)
        .map(|e| (e.0, e.1))
        .collect();
    let order = cached_ordering(n, pattern);
    let mut position = vec![0; n];
    for (new, &old) in order.iter().enumerate() {
        position[old] = new;
    }

    let mut kl = 0;
    let mut ku = 0;
    let mut scale: f64 = 0.0;
    for &(r, c, v) in &system.entries {
        if v == 0.0 {
            continue;
        }
        let (i, j) = (position[r], position[c]);
        if i > j {
            kl = kl.max(i - j);
        } else {
            ku = ku.max(j - i);
        }
        scale = scale.max(v.abs());
    }
    if scale == 0.0 {
        return Err(Error::SingularMatrix {
            column: 0,
            pivot: 0.0,
        });
    }
    let mut lu = BandLu::new(n, kl, ku);
    for &(r, c, v) in system.entries.iter().filter(|e| e.2 != 0.0) {
        let idx = lu.idx(position[r], position[c]);
        lu.data[idx] += v;
    }
    lu.factor(scale)?;

    let permuted_solve = |rhs: &[f64]| -> Vec<f64> {
        let mut b: Vec<f64> = order.iter().map(|&old| rhs[old]).collect();
        lu.solve_in_place(&mut b);
        let mut x = vec![0.0; n];
        for (new, &old) in order.iter().enumerate() {
            x[old] = b[new];
        }
        x
    };

    let mut x = permuted_solve(&system.rhs);
    let mut residual = system.relative_residual(&x);
    for _ in 0..2 {
        if residual < RESIDUAL_TOLERANCE {
            break;
        }
        let ax = system.apply(&x);
        let r: Vec<f64> = system.rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let dx = permuted_solve(&r);
        for (xi, di) in x.iter_mut().zip(&dx) {
            *xi += di;
        }
        residual = system.relative_residual(&x);
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularMatrix {
            column: 0,
            pivot: f64::NAN,
        });
    }
    if !(residual < RESIDUAL_TOLERANCE) {
        return Err(Error::ResidualTooLarge { residual });
    }
    Ok(Solution { x, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Small deterministic generator for test matrices.
    struct Lcg(u64);

    impl Lcg {
        fn next(&mut self) -> f64 {
            self.0 = self
                .0
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        }
    }

    #[test]
    fn identity_system() {
        let mut s = LinearSystem::new(5);
        for i in 0..5 {
            s.add(i, i, 1.0);
        }
        s.add_rhs(3, 1.0);
        s.finalize();
        let sol = solve(&s).unwrap();
        assert_eq!(sol.x, vec![0.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn random_spd_recovered() {
        let n = 50;
        let mut rng = Lcg(7);
        let g: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.next()).collect())
            .collect();
        let x_star: Vec<f64> = (0..n).map(|_| rng.next()).collect();
        let mut s = LinearSystem::new(n);
        for i in 0..n {
            for j in 0..n {
                let mut v: f64 = (0..n).map(|k| g[k][i] * g[k][j]).sum();
                if i == j {
                    v += n as f64;
                }
                s.add(i, j, v);
            }
        }
        s.finalize();
        let b = s.apply(&x_star);
        for (i, bi) in b.iter().enumerate() {
            s.add_rhs(i, *bi);
        }
        let sol = solve(&s).unwrap();
        for (a, b) in sol.x.iter().zip(&x_star) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn needs_pivoting() {
        // zero diagonal, solvable only with row interchanges
        let mut s = LinearSystem::new(3);
        s.add(0, 1, 2.0);
        s.add(1, 0, 1.0);
        s.add(1, 2, 1.0);
        s.add(2, 2, 3.0);
        s.add_rhs(0, 4.0);
        s.add_rhs(1, 4.0);
        s.add_rhs(2, 3.0);
        let sol = solve(&s).unwrap();
        assert_eq!(sol.x, vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn duplicate_rows_are_singular() {
        let mut s = LinearSystem::new(3);
        for (j, v) in [1.0, 2.0, 3.0].iter().enumerate() {
            s.add(0, j, *v);
            s.add(1, j, *v);
        }
        s.add(2, 2, 1.0);
        s.finalize();
        assert!(matches!(solve(&s), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn finalize_merges_duplicates() {
        let mut s = LinearSystem::new(2);
        s.add(1, 0, 1.0);
        s.add(0, 0, 2.0);
        s.add(1, 0, 0.5);
        s.finalize();
        assert_eq!(s.entries(), &[(0, 0, 2.0), (1, 0, 1.5)]);
    }

    #[test]
    fn rcm_on_a_ring_keeps_bandwidth_small() {
        let n = 200;
        let adjacency: Vec<Vec<usize>> =
            (0..n).map(|i| vec![(i + n - 1) % n, (i + 1) % n]).collect();
        let order = reverse_cuthill_mckee(&adjacency);
        let mut pos = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            pos[old] = new;
        }
        let band = (0..n)
            .map(|i| pos[i].abs_diff(pos[(i + 1) % n]))
            .max()
            .unwrap();
        assert!(band <= 2, "bandwidth {band}");
        let mut sorted = order.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn nonsymmetric_cyclic_system() {
        let n = 120;
        let mut rng = Lcg(99);
        let mut s = LinearSystem::new(n);
        for i in 0..n {
            s.add(i, i, 4.0 + rng.next());
            s.add(i, (i + 1) % n, rng.next());
            s.add(i, (i + n - 3) % n, rng.next());
        }
        s.finalize();
        let x_star: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let b = s.apply(&x_star);
        for (i, bi) in b.iter().enumerate() {
            s.add_rhs(i, *bi);
        }
        let sol = solve(&s).unwrap();
        for (a, b) in sol.x.iter().zip(&x_star) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
