use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Largest number of inputs accepted by [`fit_multilinear`].
pub const MAX_MULTILINEAR_INPUTS: usize = 12;
/// Interior points used to measure the residual of a fit.
pub const RESIDUAL_POINTS: usize = 100;

/// `Σ_I C_I Π_{i∈I} λ_i`, with `coeffs[mask]` holding `C_I` for the subset
/// whose bits are set in `mask` (bit `i` stands for input `i`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilinearPoly {
    pub inputs: usize,
    pub coeffs: Vec<f64>,
}

impl MultilinearPoly {
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(mask, c)| {
                (0..self.inputs)
                    .filter(|i| mask >> i & 1 == 1)
                    .map(|i| x[i])
                    .product::<f64>()
                    * c
            })
            .sum()
    }

    /// Nonzero coefficients (beyond `tol`) as `(subset, coefficient)` pairs.
    pub fn terms(&self, tol: f64) -> Vec<(Vec<usize>, f64)> {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > tol)
            .map(|(mask, c)| ((0..self.inputs).filter(|i| mask >> i & 1 == 1).collect(), *c))
            .collect()
    }

    /// True when no coefficient of a product of two or more inputs exceeds `tol`.
    pub fn is_linear(&self, tol: f64) -> bool {
        self.coeffs
            .iter()
            .enumerate()
            .all(|(mask, c)| (mask as u32).count_ones() < 2 || c.abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultilinearFit {
    pub poly: MultilinearPoly,
    /// Largest `|f − poly|` over the interior check points.
    pub residual: f64,
}

impl MultilinearFit {
    pub fn is_multilinear(&self, tol: f64) -> bool {
        self.residual <= tol
    }
}

/// Fits the multilinear function that agrees with `f` on the corners of
/// `[0,1]^n` (Möbius inversion of the corner values) and measures how far
/// `f` is from it at random interior points.
pub fn fit_multilinear(f: impl Fn(&[f64]) -> Result<f64>, n: usize, seed: u64) -> Result<MultilinearFit> {
    if n > MAX_MULTILINEAR_INPUTS {
        return Err(Error::invalid(
            "multilinear",
            format!("{n} inputs exceed the limit of {MAX_MULTILINEAR_INPUTS}"),
        ));
    }
    let mut coeffs = Vec::with_capacity(1 << n);
    let mut x = vec![0.0; n];
    for mask in 0..1usize << n {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = (mask >> i & 1) as f64;
        }
        coeffs.push(f(&x)?);
    }
    // In-place Möbius transform over the subset lattice.
    for i in 0..n {
        for mask in 0..1usize << n {
            if mask >> i & 1 == 1 {
                coeffs[mask] -= coeffs[mask ^ (1 << i)];
            }
        }
    }
    let poly = MultilinearPoly { inputs: n, coeffs };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut residual: f64 = 0.0;
    for _ in 0..RESIDUAL_POINTS {
        for xi in x.iter_mut() {
            // Strictly inside the cube.
            *xi = rng.gen_range(1e-6..1.0 - 1e-6);
        }
        residual = residual.max((f(&x)? - poly.eval(&x)).abs());
    }
    Ok(MultilinearFit { poly, residual })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_known_coefficients() {
        let f = |x: &[f64]| Ok(0.1 + 0.2 * x[0] - 0.3 * x[1] + 0.4 * x[0] * x[1] + 0.05 * x[0] * x[1] * x[2]);
        let fit = fit_multilinear(f, 3, 7).unwrap();
        let expect = [0.1, 0.2, -0.3, 0.4, 0.0, 0.0, 0.0, 0.05];
        for (c, e) in fit.poly.coeffs.iter().zip(expect) {
            assert!((c - e).abs() < 1e-15, "{c} vs {e}");
        }
        assert!(fit.residual < 1e-15);
        assert!(!fit.poly.is_linear(1e-12));
    }

    #[test]
    fn constants_and_non_multilinear_functions() {
        let fit = fit_multilinear(|_| Ok(0.25), 2, 0).unwrap();
        assert_eq!(fit.poly.terms(0.0), vec![(vec![], 0.25)]);
        let sq = fit_multilinear(|x| Ok(x[0] * x[0]), 1, 0).unwrap();
        assert!(sq.residual > 1e-3);
        assert!(fit_multilinear(|_| Ok(0.0), 13, 0).is_err());
    }
}
