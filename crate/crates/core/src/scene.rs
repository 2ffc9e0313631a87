//! Transmissive objects and their motion.

use alloc::string::{String, ToString};
use thiserror::Error;

use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("unsupported glyph {0:?}; expected one of X, J, T, U")]
    UnsupportedGlyph(char),
    #[error("glyph side {n} too small; need at least {GLYPH_SIZE}")]
    TooSmall { n: usize },
    #[error("transmissivity {value} at pixel {index} outside [0, 1]")]
    OutOfRange { index: usize, value: f64 },
    #[error("motion ({dx}, {dy}) exceeds the scene side {n}")]
    MotionTooLarge { dx: i64, dy: i64, n: usize },
}

/// Side of the built-in bitmap font.
pub const GLYPH_SIZE: usize = 7;

/// Characters available to [`Scene::letter`].
pub const GLYPHS: [char; 4] = ['X', 'J', 'T', 'U'];

const GLYPH_X: [&str; 7] = [
    "#.....#", ".#...#.", "..#.#..", "...#...", "..#.#..", ".#...#.", "#.....#",
];
const GLYPH_J: [&str; 7] = [
    "..#####", ".....#.", ".....#.", ".....#.", ".....#.", "#....#.", ".####..",
];
const GLYPH_T: [&str; 7] = [
    "#######", "...#...", "...#...", "...#...", "...#...", "...#...", "...#...",
];
const GLYPH_U: [&str; 7] = [
    "#.....#", "#.....#", "#.....#", "#.....#", "#.....#", "#.....#", ".#####.",
];

fn glyph_rows(c: char) -> Option<&'static [&'static str; 7]> {
    match c.to_ascii_uppercase() {
        'X' => Some(&GLYPH_X),
        'J' => Some(&GLYPH_J),
        'T' => Some(&GLYPH_T),
        'U' => Some(&GLYPH_U),
        _ => None,
    }
}

/// An `n`×`n` object with per-pixel transmissivity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    grid: Grid,
    label: String,
}

impl Scene {
    pub fn new(grid: Grid, label: impl Into<String>) -> Result<Self, SceneError> {
        if let Some((index, &value)) = grid
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(SceneError::OutOfRange { index, value });
        }
        Ok(Scene {
            grid,
            label: label.into(),
        })
    }

    /// Renders a built-in glyph at side `n` by nearest-neighbour scaling of
    /// the 7×7 font. Strokes transmit (1), the rest is opaque (0).
    pub fn letter(c: char, n: usize) -> Result<Self, SceneError> {
        let rows = glyph_rows(c).ok_or(SceneError::UnsupportedGlyph(c))?;
        if n < GLYPH_SIZE {
            return Err(SceneError::TooSmall { n });
        }
        let grid = Grid::from_fn(n, |row, col| {
            let src_row = row * GLYPH_SIZE / n;
            let src_col = col * GLYPH_SIZE / n;
            if rows[src_row].as_bytes()[src_col] == b'#' {
                1.0
            } else {
                0.0
            }
        });
        Ok(Scene {
            grid,
            label: c.to_ascii_uppercase().to_string(),
        })
    }

    pub fn uniform(n: usize, value: f64, label: impl Into<String>) -> Result<Self, SceneError> {
        Scene::new(Grid::filled(n, value), label)
    }

    pub fn side(&self) -> usize {
        self.grid.side()
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// True if every pixel is exactly 0 or 1.
    pub fn is_binary(&self) -> bool {
        self.grid.as_slice().iter().all(|&v| v == 0.0 || v == 1.0)
    }

    /// Translates by `(steps·dx, steps·dy)`; positive `dx` moves content right.
    pub fn shifted(&self, motion: &MotionDescriptor, steps: i64) -> Scene {
        let n = self.side();
        let dx = motion.dx.saturating_mul(steps);
        let dy = motion.dy.saturating_mul(steps);
        let grid = if motion.wrap {
            self.grid.roll(dx, dy)
        } else {
            Grid::from_fn(n, |row, col| {
                let src_row = row as i64 - dy;
                let src_col = col as i64 - dx;
                let inside = (0..n as i64).contains(&src_row) && (0..n as i64).contains(&src_col);
                if inside {
                    self.grid.get(src_row as usize, src_col as usize)
                } else {
                    0.0
                }
            })
        };
        Scene {
            grid,
            label: self.label.clone(),
        }
    }
}

/// Integer translation applied once per exposure window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MotionDescriptor {
    pub dx: i64,
    pub dy: i64,
    /// Toroidal roll when set, zero (opaque) fill otherwise.
    pub wrap: bool,
}

impl MotionDescriptor {
    pub const STILL: MotionDescriptor = MotionDescriptor {
        dx: 0,
        dy: 0,
        wrap: true,
    };

    /// Checks `|dx|, |dy| <= n`.
    pub fn validate(&self, n: usize) -> Result<(), SceneError> {
        let limit = n as i64;
        if self.dx.abs() > limit || self.dy.abs() > limit {
            return Err(SceneError::MotionTooLarge {
                dx: self.dx,
                dy: self.dy,
                n,
            });
        }
        Ok(())
    }
}

/// Free-function form of [`Scene::letter`].
pub fn letter_stencil(c: char, n: usize) -> Result<Scene, SceneError> {
    Scene::letter(c, n)
}

/// Free-function form of [`Scene::shifted`].
pub fn shift_scene(scene: &Scene, motion: &MotionDescriptor, steps: i64) -> Scene {
    scene.shifted(motion, steps)
}
