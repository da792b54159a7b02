//! Monomial bases for the surface-spline side conditions and the
//! Vandermonde/Gram matrices built on point sets.

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};

/// Graded-lexicographic monomial basis of total degree <= degree in d
/// variables.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialBasis {
    pub d: usize,
    pub degree: usize,
    /// Exponent multi-indices, graded then lexicographic.
    pub monomials: Vec<Vec<usize>>,
}

/// dim Pi_degree in d variables: C(degree + d, d).
pub fn dim_pi(degree: usize, d: usize) -> usize {
    let mut num = 1usize;
    let mut den = 1usize;
    for k in 1..=d {
        num *= degree + k;
        den *= k;
    }
    num / den
}

/// Monomial basis of Pi_{m-1}: all exponents of total degree <= m - 1.
pub fn polynomial_basis(m: usize, d: usize) -> PolynomialBasis {
    assert!(m >= 1 && d >= 1);
    let degree = m - 1;
    let mut monomials = Vec::new();
    for total in 0..=degree {
        let mut stack: Vec<Vec<usize>> = vec![vec![]];
        for k in 0..d {
            let mut next = Vec::new();
            for partial in &stack {
                let used: usize = partial.iter().sum();
                let remaining = total - used;
                let hi = if k + 1 == d { remaining } else { remaining };
                for e in (0..=hi).rev() {
                    let mut p2 = partial.clone();
                    p2.push(e);
                    if k + 1 == d && p2.iter().sum::<usize>() != total {
                        continue;
                    }
                    next.push(p2);
                }
            }
            stack = next;
        }
        monomials.extend(stack);
    }
    let basis = PolynomialBasis { d, degree, monomials };
    debug_assert_eq!(basis.len(), dim_pi(degree, d));
    basis
}

impl PolynomialBasis {
    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    /// Evaluate the j-th monomial at x.
    pub fn eval(&self, j: usize, x: &[f64]) -> f64 {
        self.monomials[j]
            .iter()
            .zip(x.iter())
            .map(|(&e, &v)| v.powi(e as i32))
            .product()
    }

    /// Evaluate D^alpha of the j-th monomial at x.
    pub fn eval_derivative(&self, j: usize, alpha: &[usize], x: &[f64]) -> f64 {
        let mut val = 1.0;
        for (k, (&e, &a)) in self.monomials[j].iter().zip(alpha.iter()).enumerate() {
            if a > e {
                return 0.0;
            }
            let mut c = 1.0;
            for i in 0..a {
                c *= (e - i) as f64;
            }
            val *= c * x[k].powi((e - a) as i32);
        }
        val
    }

    /// Matrix of monomial values at the points of a set (rows: points in
    /// set order, columns: monomials).
    pub fn matrix(&self, x: &PointSet) -> Array2<f64> {
        let mut phi = Array2::zeros((x.len(), self.len()));
        for i in 0..x.len() {
            for j in 0..self.len() {
                phi[(i, j)] = self.eval(j, x.point(i));
            }
        }
        phi
    }

    /// Values of all monomials at one point.
    pub fn row(&self, x: &[f64]) -> Array1<f64> {
        Array1::from_iter((0..self.len()).map(|j| self.eval(j, x)))
    }
}

/// Vandermonde matrix, its Gram matrix and the Gram inverse norm.
#[derive(Clone, Debug)]
pub struct VandermondeSystem {
    pub phi: Array2<f64>,
    pub gram: Array2<f64>,
    /// Spectral norm of G^{-1} = 1 / lambda_min(G).
    pub gram_inverse_norm: f64,
}

/// Build the Vandermonde system of `basis` on `x`. Fails when the Gram
/// matrix is numerically rank-deficient (non-unisolvent points).
pub fn vandermonde(x: &PointSet, basis: &PolynomialBasis) -> Result<VandermondeSystem> {
    let phi = basis.matrix(x);
    let gram = phi.t().dot(&phi);
    let (eigs, _) = gram.eigh(UPLO::Lower)?;
    let lambda_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let lambda_max = eigs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lambda_min <= 1e-12 * lambda_max.max(0.0) || lambda_min <= 0.0 {
        return Err(Error::NonUnisolvent);
    }
    Ok(VandermondeSystem {
        phi,
        gram,
        gram_inverse_norm: 1.0 / lambda_min,
    })
}
