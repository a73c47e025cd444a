//! Adaptive Gauss-Kronrod (7/15) quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5) and the centre.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Returns `(kronrod estimate, |kronrod - gauss|)` on `[a, b]`.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    /// Absolute tolerance on the summed error estimate.
    pub tol: f64,
    /// Hard cap on the number of panel bisections.
    pub max_splits: usize,
    /// Width of the initial uniform panels.
    pub initial_width: f64,
}

/// Integrates `f` over `[a, b]`, bisecting the worst panel until the summed
/// error estimate drops below `opts.tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<f64> {
    if !(b > a) || !(opts.initial_width > 0.0) {
        return Err(Error::Accounting(format!(
            "bad integration window [{a}, {b}]"
        )));
    }
    let n0 = ((b - a) / opts.initial_width).ceil().max(1.0) as usize;
    let w = (b - a) / n0 as f64;
    let mut heap = BinaryHeap::with_capacity(n0 * 2);
    let mut total_err = 0.0;
    for i in 0..n0 {
        let lo = a + w * i as f64;
        let hi = if i + 1 == n0 {
            b
        } else {
            a + w * (i + 1) as f64
        };
        let (value, err) = gk15(&f, lo, hi);
        total_err += err;
        heap.push(Panel {
            a: lo,
            b: hi,
            value,
            err,
        });
    }
    let mut splits = 0;
    while total_err > opts.tol {
        if splits >= opts.max_splits {
            return Err(Error::Accounting(format!(
                "quadrature did not reach tolerance {:e} after {splits} splits (error {total_err:e})",
                opts.tol
            )));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        total_err += e1 + e2 - worst.err;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            err: e2,
        });
        splits += 1;
        // Cancellation in the running sum must not stall convergence.
        if splits % 1024 == 0 {
            total_err = heap.iter().map(|p| p.err).sum();
        }
    }
    // Sum in positional order so the result does not depend on heap layout.
    let mut panels = heap.into_vec();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let value = panels.iter().map(|p| p.value).sum();
    if !f64::is_finite(value) {
        return Err(Error::Accounting(
            "quadrature produced a non-finite value".into(),
        ));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> QuadratureOptions {
        QuadratureOptions {
            tol: 1e-12,
            max_splits: 1_000_000,
            initial_width: 0.5,
        }
    }

    #[test]
    fn integrates_gaussian_density() {
        let f = |z: f64| (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let v = integrate(f, -12.0, 12.0, opts()).unwrap();
        assert!((v - 1.0).abs() < 1e-13);
    }

    #[test]
    fn integrates_polynomial_exactly() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, opts()).unwrap();
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
    }

    #[test]
    fn reports_failure_instead_of_guessing() {
        let o = QuadratureOptions {
            tol: 1e-14,
            max_splits: 3,
            initial_width: 1.0,
        };
        let err = integrate(|x: f64| (1.0 / (x + 1e-9)).sin(), 0.0, 1.0, o).unwrap_err();
        assert!(matches!(err, Error::Accounting(_)));
    }
}
