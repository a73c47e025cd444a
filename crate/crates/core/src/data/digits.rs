//! Procedural 8x8 digit glyphs.
//!
//! Each sample is one of ten fixed templates, shifted by up to one pixel in
//! each direction, with Gaussian pixel noise. Pixels live in `[-1, 1]`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Dataset;
use crate::error::Result;
use crate::nn::Tensor;

pub const SIDE: usize = 8;
pub const CLASSES: usize = 10;

const TEMPLATES: [[&str; SIDE]; CLASSES] = [
    [
        "..####..", ".#....#.", ".#....#.", ".#....#.", ".#....#.", ".#....#.", "..####..",
        "........",
    ],
    [
        "...##...", "..###...", "...##...", "...##...", "...##...", "...##...", "..####..",
        "........",
    ],
    [
        "..####..", ".#....#.", "......#.", ".....#..", "...##...", "..#.....", ".######.",
        "........",
    ],
    [
        ".#####..", "......#.", "......#.", "..####..", "......#.", "......#.", ".#####..",
        "........",
    ],
    [
        ".....#..", "....##..", "...#.#..", "..#..#..", ".######.", ".....#..", ".....#..",
        "........",
    ],
    [
        ".######.", ".#......", ".#####..", "......#.", "......#.", ".#....#.", "..####..",
        "........",
    ],
    [
        "..####..", ".#......", ".#......", ".#####..", ".#....#.", ".#....#.", "..####..",
        "........",
    ],
    [
        ".######.", "......#.", ".....#..", "....#...", "...#....", "...#....", "...#....",
        "........",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..####..", ".#....#.", ".#....#.", "..####..",
        "........",
    ],
    [
        "..####..", ".#....#.", ".#....#.", "..#####.", "......#.", "......#.", "..####..",
        "........",
    ],
];

/// Template `digit` shifted by `(dx, dy)` as ink values in `{0, 1}`.
pub fn glyph(digit: usize, dx: isize, dy: isize) -> [f64; SIDE * SIDE] {
    let mut out = [0.0; SIDE * SIDE];
    for (r, row) in TEMPLATES[digit].iter().enumerate() {
        for (c, ch) in row.bytes().enumerate() {
            if ch != b'#' {
                continue;
            }
            let (rr, cc) = (r as isize + dy, c as isize + dx);
            if (0..SIDE as isize).contains(&rr) && (0..SIDE as isize).contains(&cc) {
                out[rr as usize * SIDE + cc as usize] = 1.0;
            }
        }
    }
    out
}

pub(crate) fn render<R: Rng + ?Sized>(n: usize, noise: f64, rng: &mut R) -> Result<Dataset> {
    let mut values = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = rng.random_range(0..CLASSES);
        let dx = rng.random_range(0..3i64) as isize - 1;
        let dy = rng.random_range(0..3i64) as isize - 1;
        for ink in glyph(y, dx, dy) {
            let z: f64 = StandardNormal.sample(rng);
            values.push((2.0 * ink - 1.0 + noise * z).clamp(-1.0, 1.0));
        }
        labels.push(y);
    }
    Dataset::new(
        Tensor::matrix(n, SIDE * SIDE, values)?,
        Some(labels),
        CLASSES,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn templates_are_distinct() {
        for a in 0..CLASSES {
            for b in a + 1..CLASSES {
                assert_ne!(glyph(a, 0, 0), glyph(b, 0, 0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn shift_moves_ink() {
        let g = glyph(1, 0, 0);
        let s = glyph(1, 1, 0);
        assert_eq!(g[3], 1.0);
        assert_eq!(s[4], 1.0);
        assert_eq!(s[3], 0.0);
    }
}
