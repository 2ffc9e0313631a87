//! Hadamard-derived illumination masks.
//!
//! The object plane (`n`×`n` pixels) is split into `k` column blocks of
//! width `N = n / k`. Every row-segment of every block is scanned with the
//! complete set of `N` rows of the order-`N` S-matrix, so a full sequence has
//! `n · k · N = n²` frames. Frames are ordered block-major (left to right),
//! then by row (top to bottom), then by S-matrix row index.

use alloc::vec::Vec;
use num_rational::Ratio;
use thiserror::Error;

use crate::grid::Grid;

/// Human-readable statement of the frame ordering used by [`MaskSequence`].
pub const FRAME_ORDER: &str =
    "blocks left-to-right, rows top-to-bottom, s-matrix rows in index order";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MaskError {
    #[error("hadamard order {order} is not a power of two")]
    NotPowerOfTwo { order: usize },
    #[error("s-matrix order {order} invalid: order + 1 must be a power of two")]
    InvalidSMatrixOrder { order: usize },
    #[error("image side n must be positive")]
    EmptyImage,
    #[error("block count k must be positive")]
    NoBlocks,
    #[error("k must divide n (n = {n}, k = {k})")]
    BlocksDoNotDivide { n: usize, k: usize },
    #[error("block width n/k = {block_width} invalid: block width + 1 must be a power of two")]
    InvalidBlockWidth { block_width: usize },
    #[error("contrast formula denominator is zero for block width {block_width}")]
    DegenerateContrast { block_width: usize },
    #[error("contrast formula overflows for block width {block_width}")]
    ContrastOverflow { block_width: usize },
}

/// Sylvester Hadamard matrix with `±1` entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HadamardMatrix {
    order: usize,
    entries: Vec<i8>,
}

impl HadamardMatrix {
    /// Builds the Sylvester matrix `H_{2m} = [[H_m, H_m], [H_m, -H_m]]`.
    pub fn new(order: usize) -> Result<Self, MaskError> {
        if order == 0 || !order.is_power_of_two() {
            return Err(MaskError::NotPowerOfTwo { order });
        }
        let mut entries = Vec::with_capacity(order * order);
        for row in 0..order {
            for col in 0..order {
                // Sylvester entry: (-1)^popcount(row & col)
                let sign = if (row & col).count_ones() % 2 == 0 {
                    1
                } else {
                    -1
                };
                entries.push(sign);
            }
        }
        Ok(HadamardMatrix { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> i8 {
        self.entries[row * self.order + col]
    }

    pub fn row(&self, row: usize) -> &[i8] {
        &self.entries[row * self.order..(row + 1) * self.order]
    }

    /// Integer dot product of two rows.
    pub fn row_dot(&self, a: usize, b: usize) -> i64 {
        self.row(a)
            .iter()
            .zip(self.row(b))
            .map(|(&x, &y)| i64::from(x) * i64::from(y))
            .sum()
    }
}

/// Binary S-matrix of order `N` (with `N + 1` a power of two).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SMatrix {
    order: usize,
    entries: Vec<u8>,
}

impl SMatrix {
    /// Drops the first row and column of the normalized Hadamard matrix of
    /// order `N + 1` and maps `-1 → 1`, `+1 → 0`.
    pub fn new(order: usize) -> Result<Self, MaskError> {
        if order == 0 || !(order + 1).is_power_of_two() {
            return Err(MaskError::InvalidSMatrixOrder { order });
        }
        // Sylvester matrices are already normalized (first row and column +1).
        let h = HadamardMatrix::new(order + 1)?;
        let mut entries = Vec::with_capacity(order * order);
        for row in 1..=order {
            for col in 1..=order {
                entries.push(u8::from(h.get(row, col) == -1));
            }
        }
        Ok(SMatrix { order, entries })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.order + col]
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.entries[row * self.order..(row + 1) * self.order]
    }

    /// Number of ones in each row, `(N + 1) / 2`.
    pub fn ones_per_row(&self) -> usize {
        self.order.div_ceil(2)
    }

    /// `S · x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(
            x.len(),
            self.order,
            "vector length must equal s-matrix order"
        );
        (0..self.order)
            .map(|r| {
                self.row(r)
                    .iter()
                    .zip(x)
                    .filter(|(&s, _)| s == 1)
                    .map(|(_, &v)| v)
                    .sum()
            })
            .collect()
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    /// `None` if an intermediate value overflows `i128`.
    pub fn determinant(&self) -> Option<i128> {
        let n = self.order;
        let mut m: Vec<i128> = self.entries.iter().map(|&v| i128::from(v)).collect();
        let mut sign = 1i128;
        let mut prev = 1i128;
        for p in 0..n {
            if m[p * n + p] == 0 {
                let swap = (p + 1..n).find(|&r| m[r * n + p] != 0);
                match swap {
                    Some(r) => {
                        for c in 0..n {
                            m.swap(p * n + c, r * n + c);
                        }
                        sign = -sign;
                    }
                    None => return Some(0),
                }
            }
            let pivot = m[p * n + p];
            for r in p + 1..n {
                for c in p + 1..n {
                    let v = m[r * n + c]
                        .checked_mul(pivot)?
                        .checked_sub(m[r * n + p].checked_mul(m[p * n + c])?)?;
                    m[r * n + c] = v / prev;
                }
                m[r * n + p] = 0;
            }
            prev = pivot;
        }
        if n == 0 {
            return Some(1);
        }
        Some(sign * m[n * n - 1])
    }

    /// Solves `S · x = y` exactly through the closed-form inverse
    /// `S⁻¹ = 2/(N+1) · (2Sᵀ − J)`.
    pub fn solve(&self, y: &[i64]) -> Vec<Ratio<i64>> {
        assert_eq!(
            y.len(),
            self.order,
            "vector length must equal s-matrix order"
        );
        let total: i64 = y.iter().sum();
        let denom = (self.order + 1) as i64;
        (0..self.order)
            .map(|col| {
                let transposed: i64 = (0..self.order)
                    .filter(|&r| self.get(r, col) == 1)
                    .map(|r| y[r])
                    .sum();
                Ratio::new(2 * (2 * transposed - total), denom)
            })
            .collect()
    }
}

/// One illumination frame: a single S-matrix row placed on one row-segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskFrame {
    pub block: usize,
    pub row: usize,
    pub pattern: usize,
    lit: Vec<u32>,
}

impl MaskFrame {
    /// Sorted flat indices (`row * n + col`) of the transmitting pixels.
    pub fn lit_pixels(&self) -> &[u32] {
        &self.lit
    }

    pub fn is_lit(&self, pixel: usize) -> bool {
        u32::try_from(pixel)
            .map(|p| self.lit.binary_search(&p).is_ok())
            .unwrap_or(false)
    }

    /// Renders the frame as a 0/1 grid.
    pub fn to_grid(&self, n: usize) -> Grid {
        let mut g = Grid::zeros(n);
        for &p in &self.lit {
            g[p as usize] = 1.0;
        }
        g
    }
}

/// The complete block-scanning sequence for an `n`×`n` field split into `k`
/// column blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSequence {
    n: usize,
    k: usize,
    block_width: usize,
    s_matrix: SMatrix,
    frames: Vec<MaskFrame>,
}

impl MaskSequence {
    pub fn new(n: usize, k: usize) -> Result<Self, MaskError> {
        if n == 0 {
            return Err(MaskError::EmptyImage);
        }
        if k == 0 {
            return Err(MaskError::NoBlocks);
        }
        if !n.is_multiple_of(k) {
            return Err(MaskError::BlocksDoNotDivide { n, k });
        }
        let block_width = n / k;
        let s_matrix =
            SMatrix::new(block_width).map_err(|_| MaskError::InvalidBlockWidth { block_width })?;

        let mut frames = Vec::with_capacity(n * n);
        for block in 0..k {
            for row in 0..n {
                for pattern in 0..block_width {
                    let lit = s_matrix
                        .row(pattern)
                        .iter()
                        .enumerate()
                        .filter(|(_, &s)| s == 1)
                        .map(|(j, _)| (row * n + block * block_width + j) as u32)
                        .collect();
                    frames.push(MaskFrame {
                        block,
                        row,
                        pattern,
                        lit,
                    });
                }
            }
        }
        Ok(MaskSequence {
            n,
            k,
            block_width,
            s_matrix,
            frames,
        })
    }

    pub fn side(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.k
    }

    pub fn block_width(&self) -> usize {
        self.block_width
    }

    pub fn s_matrix(&self) -> &SMatrix {
        &self.s_matrix
    }

    pub fn frames(&self) -> &[MaskFrame] {
        &self.frames
    }

    /// Measurement count `M`.
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, index: usize) -> &MaskFrame {
        &self.frames[index]
    }

    /// Number of row-segments, `n · k`.
    pub fn segment_count(&self) -> usize {
        self.n * self.k
    }

    /// Index of the first frame scanning segment `(block, row)`; the
    /// segment's frames occupy the next `block_width` indices.
    pub fn segment_start(&self, block: usize, row: usize) -> usize {
        (block * self.n + row) * self.block_width
    }

    /// Flat pixel indices of segment `(block, row)`, left to right.
    pub fn segment_pixels(&self, block: usize, row: usize) -> Vec<usize> {
        let start = row * self.n + block * self.block_width;
        (start..start + self.block_width).collect()
    }

    /// Iterates `(block, row)` for every segment in frame order.
    pub fn segments(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.k).flat_map(move |b| (0..self.n).map(move |r| (b, r)))
    }

    /// Per-pixel count of frames that light the pixel.
    pub fn coverage(&self) -> Grid {
        let mut g = Grid::zeros(self.n);
        for f in &self.frames {
            for &p in f.lit_pixels() {
                g[p as usize] += 1.0;
            }
        }
        g
    }
}

/// Row contrast predicted for a block of width `N`:
/// `(1 + N) / (1 + N(2N − 5))`, evaluated exactly and without clamping.
pub fn hadamard_block_contrast(block_width: usize) -> Result<Ratio<i64>, MaskError> {
    if block_width == 0 {
        return Err(MaskError::InvalidBlockWidth { block_width });
    }
    let overflow = MaskError::ContrastOverflow { block_width };
    let w = i64::try_from(block_width).map_err(|_| overflow.clone())?;
    let numer = w.checked_add(1).ok_or(overflow.clone())?;
    let denom = w
        .checked_mul(2)
        .and_then(|v| v.checked_sub(5))
        .and_then(|v| v.checked_mul(w))
        .and_then(|v| v.checked_add(1))
        .ok_or(overflow)?;
    if denom == 0 {
        return Err(MaskError::DegenerateContrast { block_width });
    }
    Ok(Ratio::new(numer, denom))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hadamard_base_cases() {
        let h1 = HadamardMatrix::new(1).unwrap();
        assert_eq!(h1.row(0), &[1]);
        let h2 = HadamardMatrix::new(2).unwrap();
        assert_eq!(h2.row(0), &[1, 1]);
        assert_eq!(h2.row(1), &[1, -1]);
    }

    #[test]
    fn hadamard_rejects_non_powers() {
        for order in [0, 3, 6, 7, 12] {
            assert_eq!(
                HadamardMatrix::new(order),
                Err(MaskError::NotPowerOfTwo { order })
            );
        }
    }

    #[test]
    fn hadamard_order_eight_is_orthogonal() {
        let h = HadamardMatrix::new(8).unwrap();
        for i in 0..8 {
            for j in 0..8 {
                let expected = if i == j { 8 } else { 0 };
                assert_eq!(h.row_dot(i, j), expected, "rows {i},{j}");
            }
        }
    }

    #[test]
    fn s_matrix_small_orders() {
        assert_eq!(SMatrix::new(1).unwrap().row(0), &[1]);
        let s3 = SMatrix::new(3).unwrap();
        assert_eq!(s3.row(0), &[1, 0, 1]);
        assert_eq!(s3.row(1), &[0, 1, 1]);
        assert_eq!(s3.row(2), &[1, 1, 0]);
        assert_eq!(s3.determinant(), Some(-2));
        let s7 = SMatrix::new(7).unwrap();
        for r in 0..7 {
            assert_eq!(s7.row(r).iter().filter(|&&v| v == 1).count(), 4);
        }
        assert_ne!(s7.determinant(), Some(0));
        assert!(SMatrix::new(2).is_err());
        assert!(SMatrix::new(0).is_err());
    }

    #[test]
    fn mask_sequence_degenerate_raster() {
        let m = MaskSequence::new(4, 4).unwrap();
        assert_eq!(m.block_width(), 1);
        assert_eq!(m.len(), 16);
        assert!(m.frames().iter().all(|f| f.lit_pixels().len() == 1));
        assert_eq!(m.coverage(), Grid::filled(4, 1.0));
    }

    #[test]
    fn mask_sequence_validation() {
        assert_eq!(
            MaskSequence::new(35, 4),
            Err(MaskError::BlocksDoNotDivide { n: 35, k: 4 })
        );
        assert_eq!(
            MaskSequence::new(12, 2),
            Err(MaskError::InvalidBlockWidth { block_width: 6 })
        );
        assert_eq!(MaskSequence::new(0, 1), Err(MaskError::EmptyImage));
        assert_eq!(MaskSequence::new(4, 0), Err(MaskError::NoBlocks));
    }

    #[test]
    fn mask_sequence_frame_order() {
        let m = MaskSequence::new(6, 2).unwrap();
        let f = m.frame(m.segment_start(1, 2) + 1);
        assert_eq!((f.block, f.row, f.pattern), (1, 2, 1));
        // s3 row 1 = [0, 1, 1] on columns 3..6 of row 2
        assert_eq!(f.lit_pixels(), &[2 * 6 + 4, 2 * 6 + 5]);
        assert!(f.is_lit(17) && !f.is_lit(15));
        assert_eq!(m.segment_pixels(1, 2), vec![15, 16, 17]);
    }

    #[test]
    fn contrast_formula_values() {
        assert_eq!(hadamard_block_contrast(7).unwrap(), Ratio::new(1, 8));
        assert_eq!(hadamard_block_contrast(3).unwrap(), Ratio::from_integer(1));
        assert_eq!(hadamard_block_contrast(1).unwrap(), Ratio::from_integer(-1));
        assert!(hadamard_block_contrast(0).is_err());
        assert!(matches!(
            hadamard_block_contrast(usize::MAX),
            Err(MaskError::ContrastOverflow { .. })
        ));
    }

    #[test]
    fn solve_inverts_apply() {
        let s = SMatrix::new(3).unwrap();
        let x = [1.0, 0.0, 1.0];
        let y: Vec<i64> = s.apply(&x).iter().map(|&v| v as i64).collect();
        let back = s.solve(&y);
        assert_eq!(
            back,
            vec![
                Ratio::from_integer(1),
                Ratio::from_integer(0),
                Ratio::from_integer(1)
            ]
        );
    }
}
