//! Node-major path storage and Brownian increment generation.
//!
//! Matrices are laid out with one row per time node and one column per path,
//! so every per-node operation (evolution steps, cross-path regressions,
//! portfolio rolls) works on a contiguous slice. Increments are drawn from
//! per-path ChaCha streams: stream = path index, seed = master seed, which
//! makes every path reproducible independently of chunking or path count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Dense row-major matrix, rows = time nodes, columns = paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PathMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    /// Row `r` immutably together with row `r + 1` mutably.
    pub fn step_rows(&mut self, r: usize) -> (&[f64], &mut [f64]) {
        let (lo, hi) = self.data.split_at_mut((r + 1) * self.cols);
        (&lo[r * self.cols..], &mut hi[..self.cols])
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// RNG for one path: fixed seed, stream = path index.
pub fn path_rng(master_seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(path);
    rng
}

/// Brownian increments over `steps` rows and `npaths` columns, each entry
/// N(0, h). Column `j` consumes exactly `steps` draws of stream `j`.
pub fn brownian_increments(master_seed: u64, npaths: usize, steps: usize, h: f64) -> PathMatrix {
    let mut m = PathMatrix::zeros(steps, npaths);
    let sqrt_h = h.sqrt();
    for j in 0..npaths {
        let mut rng = path_rng(master_seed, j as u64);
        for k in 0..steps {
            let g: f64 = rng.sample(StandardNormal);
            m.data[k * npaths + j] = g * sqrt_h;
        }
    }
    m
}

/// Sum consecutive groups of `factor` rows: the coarse increments of the same
/// Brownian paths. Used for common-random-number refinement ladders.
pub fn coarsen_increments(fine: &PathMatrix, factor: usize) -> PathMatrix {
    assert!(factor > 0 && fine.rows % factor == 0);
    let rows = fine.rows / factor;
    let mut out = PathMatrix::zeros(rows, fine.cols);
    for r in 0..rows {
        let dst = out.row_mut(r);
        for s in 0..factor {
            let src = fine.row(r * factor + s);
            for (d, v) in dst.iter_mut().zip(src) {
                *d += v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_stable_under_path_count() {
        let a = brownian_increments(7, 4, 16, 0.25);
        let b = brownian_increments(7, 9, 16, 0.25);
        for k in 0..16 {
            for j in 0..4 {
                assert_eq!(a.at(k, j), b.at(k, j));
            }
        }
    }

    #[test]
    fn coarsening_preserves_totals() {
        let fine = brownian_increments(3, 5, 32, 1.0 / 32.0);
        let coarse = coarsen_increments(&fine, 4);
        assert_eq!(coarse.rows(), 8);
        for j in 0..5 {
            let tf: f64 = (0..32).map(|k| fine.at(k, j)).sum();
            let tc: f64 = (0..8).map(|k| coarse.at(k, j)).sum();
            assert!((tf - tc).abs() < 1e-14);
        }
    }

    #[test]
    fn step_rows_views_are_adjacent() {
        let mut m = PathMatrix::zeros(3, 2);
        m.set(1, 0, 5.0);
        let (prev, next) = m.step_rows(1);
        assert_eq!(prev[0], 5.0);
        next[1] = 7.0;
        assert_eq!(m.at(2, 1), 7.0);
    }
}
