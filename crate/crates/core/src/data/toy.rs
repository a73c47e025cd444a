use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{digits, Dataset};
use crate::error::{Error, Result};
use crate::nn::Tensor;
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// Gaussian blobs equally spaced on a circle.
    Ring,
    /// Gaussian blobs on a square lattice; `modes` must be a perfect square.
    Grid,
    /// Two interleaved half circles.
    Moons,
    /// Procedurally rendered 8x8 digit glyphs (64-dimensional, 10 classes).
    Digits8x8,
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ring" => Ok(Family::Ring),
            "grid" => Ok(Family::Grid),
            "moons" => Ok(Family::Moons),
            "digits8x8" => Ok(Family::Digits8x8),
            other => Err(Error::config(
                "data.family",
                format!("unknown family `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Ring => "ring",
            Family::Grid => "grid",
            Family::Moons => "moons",
            Family::Digits8x8 => "digits8x8",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySpec {
    pub family: Family,
    pub modes: usize,
    /// Ring radius or grid half-width, in output units.
    pub radius: f64,
    /// Blob standard deviation (pixel noise for digits).
    pub std: f64,
    pub n: usize,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        ToySpec {
            family: Family::Ring,
            modes: 8,
            radius: 0.8,
            std: 0.05,
            n: 8000,
            seed: 0,
        }
    }
}

impl ToySpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::config("data.n", "must be at least 1"));
        }
        if !(self.std > 0.0) {
            return Err(Error::config("data.std", "must be positive"));
        }
        match self.family {
            Family::Ring | Family::Grid if self.modes == 0 => {
                Err(Error::config("data.modes", "must be at least 1"))
            }
            Family::Grid if grid_side(self.modes).is_none() => {
                Err(Error::config("data.modes", "grid needs a perfect square"))
            }
            _ => Ok(()),
        }
    }
}

fn grid_side(modes: usize) -> Option<usize> {
    let s = (modes as f64).sqrt().round() as usize;
    (s * s == modes).then_some(s)
}

/// Component means of the mixture families, in output units.
pub fn mode_centers(spec: &ToySpec) -> Vec<[f64; 2]> {
    match spec.family {
        Family::Ring => (0..spec.modes)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / spec.modes as f64;
                [spec.radius * t.cos(), spec.radius * t.sin()]
            })
            .collect(),
        Family::Grid => {
            let s = grid_side(spec.modes).unwrap_or(1);
            let coord = |i: usize| {
                if s == 1 {
                    0.0
                } else {
                    -spec.radius + 2.0 * spec.radius * i as f64 / (s - 1) as f64
                }
            };
            (0..spec.modes)
                .map(|j| [coord(j % s), coord(j / s)])
                .collect()
        }
        Family::Moons | Family::Digits8x8 => Vec::new(),
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates the dataset described by `spec`; bit-identical for equal specs.
pub fn make_toy(spec: &ToySpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    match spec.family {
        Family::Ring | Family::Grid => {
            let centers = mode_centers(spec);
            let mut values = Vec::with_capacity(spec.n * 2);
            let mut labels = Vec::with_capacity(spec.n);
            for _ in 0..spec.n {
                let j = rng.random_range(0..centers.len());
                for c in centers[j] {
                    values.push((c + spec.std * normal(&mut rng)).clamp(-1.0, 1.0));
                }
                labels.push(j);
            }
            Dataset::new(
                Tensor::matrix(spec.n, 2, values)?,
                Some(labels),
                centers.len(),
            )
        }
        Family::Moons => {
            let scale = spec.radius / 1.5;
            let mut values = Vec::with_capacity(spec.n * 2);
            let mut labels = Vec::with_capacity(spec.n);
            for _ in 0..spec.n {
                let j = rng.random_range(0..2usize);
                let t = rng.random_range(0.0..PI);
                let (x, y) = if j == 0 {
                    (t.cos(), t.sin())
                } else {
                    (1.0 - t.cos(), 0.5 - t.sin())
                };
                values.push(((x - 0.5) * scale + spec.std * normal(&mut rng)).clamp(-1.0, 1.0));
                values.push(((y - 0.25) * scale + spec.std * normal(&mut rng)).clamp(-1.0, 1.0));
                labels.push(j);
            }
            Dataset::new(Tensor::matrix(spec.n, 2, values)?, Some(labels), 2)
        }
        Family::Digits8x8 => digits::render(spec.n, spec.std, &mut rng),
    }
}
