use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::seeded_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub public_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            public_fraction: 0.02,
            seed: 0,
        }
    }
}

/// Seeded uniform partition into `(public, private)` index sets of sizes
/// `floor(n f)` and `n - floor(n f)`, each in ascending order.
pub fn split_indices(n: usize, spec: SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    let f = spec.public_fraction;
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::config(
            "split.public_fraction",
            format!("{f} not in (0, 1)"),
        ));
    }
    let n_pub = (n as f64 * f).floor() as usize;
    if n_pub == 0 || n_pub == n {
        return Err(Error::Contract(format!(
            "public fraction {f} of {n} points leaves an empty side"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut seeded_rng(spec.seed));
    let mut public = perm[..n_pub].to_vec();
    let mut private = perm[n_pub..].to_vec();
    public.sort_unstable();
    private.sort_unstable();
    Ok((public, private))
}

pub fn split_public_private(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let (public, private) = split_indices(ds.n(), spec)?;
    Ok((ds.subset(&public), ds.subset(&private)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_to_ninety_eight() {
        let (p, q) = split_indices(1000, SplitSpec::default()).unwrap();
        assert_eq!((p.len(), q.len()), (20, 980));
        let mut all: Vec<usize> = p.iter().chain(&q).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn too_small_is_error() {
        assert!(split_indices(10, SplitSpec::default()).is_err());
        let bad = SplitSpec {
            public_fraction: 1.0,
            seed: 0,
        };
        assert!(split_indices(100, bad).is_err());
    }
}
