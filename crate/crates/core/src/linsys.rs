//! Sparse fixed-point systems `z = A z + c` with nonnegative substochastic `A`.
//!
//! Rows with a positive constant are the targets. Variables that cannot reach
//! a target through positive entries of `A` are pinned to zero before
//! solving, which makes the remaining system nonsingular.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Default)]
pub(crate) struct FixedPointSystem {
    pub rows: Vec<Vec<(usize, f64)>>,
    pub constant: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct NotConverged {
    pub iterations: usize,
    pub residual: f64,
}

impl FixedPointSystem {
    pub fn len(&self) -> usize {
        self.constant.len()
    }

    /// Variables with no positive path to a target.
    pub fn zero_set(&self) -> Vec<bool> {
        let n = self.len();
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                if a > 0.0 {
                    reverse[j].push(i);
                }
            }
        }
        let mut reaches = vec![false; n];
        let mut stack: Vec<usize> = (0..n).filter(|&i| self.constant[i] > 0.0).collect();
        for &i in &stack {
            reaches[i] = true;
        }
        while let Some(j) = stack.pop() {
            for &i in &reverse[j] {
                if !reaches[i] {
                    reaches[i] = true;
                    stack.push(i);
                }
            }
        }
        reaches.into_iter().map(|r| !r).collect()
    }

    /// Largest `|z_i - (A z + c)_i|`.
    pub fn residual(&self, z: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.constant)
            .zip(z)
            .map(|((row, &c), &zi)| {
                let rhs: f64 = row.iter().map(|&(j, a)| a * z[j]).sum::<f64>() + c;
                (zi - rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Sparse Gaussian elimination on `(I - A) z = c` over the non-zero set.
    pub fn solve_direct(&self) -> Vec<f64> {
        let zero = self.zero_set();
        let live: Vec<usize> = (0..self.len()).filter(|&i| !zero[i]).collect();
        let mut pos = vec![usize::MAX; self.len()];
        for (k, &i) in live.iter().enumerate() {
            pos[i] = k;
        }
        let m = live.len();

        // Up-looking LU: row k of U is produced from row k of (I - A) by
        // eliminating against rows 0..k.
        let mut upper: Vec<Vec<(usize, f64)>> = Vec::with_capacity(m);
        let mut rhs: Vec<f64> = Vec::with_capacity(m);
        let mut work = vec![0.0f64; m];
        let mut touched = vec![false; m];
        let mut nonzeros: Vec<usize> = Vec::new();
        let mut pending: BinaryHeap<Reverse<usize>> = BinaryHeap::new();

        for (k, &i) in live.iter().enumerate() {
            let mut b = self.constant[i];
            let mut acc = Accumulator { k, work: &mut work, touched: &mut touched, nonzeros: &mut nonzeros, pending: &mut pending };
            acc.add(k, 1.0);
            for &(j, a) in &self.rows[i] {
                if pos[j] != usize::MAX && a != 0.0 {
                    acc.add(pos[j], -a);
                }
            }
            while let Some(Reverse(j)) = acc.pending.pop() {
                let factor = acc.work[j] / upper[j][0].1;
                acc.work[j] = 0.0;
                if factor == 0.0 {
                    continue;
                }
                for &(col, u) in &upper[j][1..] {
                    acc.add(col, -factor * u);
                }
                b -= factor * rhs[j];
            }
            nonzeros.sort_unstable();
            let mut row = Vec::new();
            for &col in &nonzeros {
                if col >= k && (work[col] != 0.0 || col == k) {
                    row.push((col, work[col]));
                }
                work[col] = 0.0;
                touched[col] = false;
            }
            nonzeros.clear();
            debug_assert_eq!(row[0].0, k);
            upper.push(row);
            rhs.push(b);
        }

        let mut sol = vec![0.0; m];
        for k in (0..m).rev() {
            let row = &upper[k];
            let mut acc = rhs[k];
            for &(col, u) in &row[1..] {
                acc -= u * sol[col];
            }
            sol[k] = acc / row[0].1;
        }

        let mut z = vec![0.0; self.len()];
        for (k, &i) in live.iter().enumerate() {
            z[i] = sol[k].clamp(0.0, 1.0);
        }
        z
    }

    /// Gauss–Seidel from zero; converges monotonically to the least solution.
    pub fn solve_gauss_seidel(&self, tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize), NotConverged> {
        let zero = self.zero_set();
        let mut z = vec![0.0; self.len()];
        let mut iterations = 0;
        loop {
            iterations += 1;
            let mut delta: f64 = 0.0;
            for i in 0..self.len() {
                if zero[i] {
                    continue;
                }
                let v: f64 = self.rows[i].iter().map(|&(j, a)| a * z[j]).sum::<f64>() + self.constant[i];
                delta = delta.max((v - z[i]).abs());
                z[i] = v;
            }
            if delta <= tol {
                return Ok((z, iterations));
            }
            if iterations >= max_iter {
                return Err(NotConverged { iterations, residual: self.residual(&z) });
            }
        }
    }
}

struct Accumulator<'a> {
    k: usize,
    work: &'a mut [f64],
    touched: &'a mut [bool],
    nonzeros: &'a mut Vec<usize>,
    pending: &'a mut BinaryHeap<Reverse<usize>>,
}

impl Accumulator<'_> {
    fn add(&mut self, col: usize, val: f64) {
        if !self.touched[col] {
            self.touched[col] = true;
            self.nonzeros.push(col);
            if col < self.k {
                self.pending.push(Reverse(col));
            }
        }
        self.work[col] += val;
    }
}
