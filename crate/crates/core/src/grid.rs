//! Square row-major grids of reals.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// An `n`×`n` grid stored row by row.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    n: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn zeros(n: usize) -> Self {
        Self::filled(n, 0.0)
    }

    pub fn filled(n: usize, value: f64) -> Self {
        Grid {
            n,
            data: vec![value; n * n],
        }
    }

    /// Wraps row-major data; `None` if the length is not `n * n`.
    pub fn from_vec(n: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == n * n).then_some(Grid { n, data })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for row in 0..n {
            for col in 0..n {
                data.push(f(row, col));
            }
        }
        Grid { n, data }
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n + col] = value;
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Euclidean norm of all entries.
    pub fn l2_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    /// Euclidean norm of `self - other`. Panics on a side mismatch.
    pub fn l2_distance(&self, other: &Grid) -> f64 {
        assert_eq!(self.n, other.n, "grid side mismatch");
        libm::sqrt(
            self.data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| (a - b) * (a - b))
                .sum(),
        )
    }

    /// Elementwise `self + other`.
    pub fn add(&self, other: &Grid) -> Grid {
        assert_eq!(self.n, other.n, "grid side mismatch");
        Grid {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Elementwise `self - other`.
    pub fn sub(&self, other: &Grid) -> Grid {
        assert_eq!(self.n, other.n, "grid side mismatch");
        Grid {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid {
        Grid {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Toroidal roll: the value at `(r, c)` moves to `(r + dy, c + dx)` mod `n`.
    pub fn roll(&self, dx: i64, dy: i64) -> Grid {
        let n = self.n as i64;
        if n == 0 {
            return self.clone();
        }
        Grid::from_fn(self.n, |row, col| {
            let src_row = (row as i64 - dy).rem_euclid(n) as usize;
            let src_col = (col as i64 - dx).rem_euclid(n) as usize;
            self.get(src_row, src_col)
        })
    }
}

impl Index<usize> for Grid {
    type Output = f64;

    fn index(&self, idx: usize) -> &f64 {
        &self.data[idx]
    }
}

impl IndexMut<usize> for Grid {
    fn index_mut(&mut self, idx: usize) -> &mut f64 {
        &mut self.data[idx]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roll_moves_content_right_and_down() {
        let mut g = Grid::zeros(3);
        g.set(0, 0, 1.0);
        let r = g.roll(1, 2);
        assert_eq!(r.get(2, 1), 1.0);
        assert_eq!(r.sum(), 1.0);
        assert_eq!(g.roll(3, -3), g);
    }

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Grid::from_vec(2, vec![0.0; 3]).is_none());
        assert!(Grid::from_vec(2, vec![0.0; 4]).is_some());
    }
}
