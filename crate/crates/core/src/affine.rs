//! Affine functionals over the boundary unknowns.
//!
//! The solver carries every coefficient `c_{m,k}` as an [`AffineExpr`] in the
//! unknowns `π_x` (boundary states) and `π_(m,j0)` until the boundary system is
//! solved. Unknowns are addressed by dense index, so an expression is just a
//! coefficient vector plus a constant.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

#[derive(Debug, Clone, PartialEq)]
pub struct AffineExpr {
    pub constant: f64,
    pub coefficients: Vec<f64>,
}

impl AffineExpr {
    pub fn zero(unknowns: usize) -> Self {
        Self {
            constant: 0.0,
            coefficients: vec![0.0; unknowns],
        }
    }

    /// The expression `1 * x_index`.
    pub fn unknown(unknowns: usize, index: usize) -> Self {
        let mut e = Self::zero(unknowns);
        e.coefficients[index] = 1.0;
        e
    }

    pub fn constant(unknowns: usize, value: f64) -> Self {
        let mut e = Self::zero(unknowns);
        e.constant = value;
        e
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.coefficients.iter().all(|&c| c == 0.0)
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &AffineExpr, scale: f64) {
        assert_eq!(self.len(), other.len(), "affine dimension mismatch");
        if scale == 0.0 {
            return;
        }
        self.constant += scale * other.constant;
        for (a, b) in self.coefficients.iter_mut().zip(&other.coefficients) {
            *a += scale * b;
        }
    }

    pub fn scaled(&self, scale: f64) -> AffineExpr {
        let mut e = self.clone();
        e.constant *= scale;
        e.coefficients.iter_mut().for_each(|c| *c *= scale);
        e
    }

    pub fn eval(&self, values: &[f64]) -> f64 {
        assert_eq!(self.len(), values.len(), "affine dimension mismatch");
        self.constant + self.coefficients.iter().zip(values).map(|(c, v)| c * v).sum::<f64>()
    }
}

impl Add<&AffineExpr> for AffineExpr {
    type Output = AffineExpr;
    fn add(mut self, rhs: &AffineExpr) -> AffineExpr {
        self.add_scaled(rhs, 1.0);
        self
    }
}

impl Sub<&AffineExpr> for AffineExpr {
    type Output = AffineExpr;
    fn sub(mut self, rhs: &AffineExpr) -> AffineExpr {
        self.add_scaled(rhs, -1.0);
        self
    }
}

impl AddAssign<&AffineExpr> for AffineExpr {
    fn add_assign(&mut self, rhs: &AffineExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl SubAssign<&AffineExpr> for AffineExpr {
    fn sub_assign(&mut self, rhs: &AffineExpr) {
        self.add_scaled(rhs, -1.0);
    }
}

impl Mul<f64> for &AffineExpr {
    type Output = AffineExpr;
    fn mul(self, rhs: f64) -> AffineExpr {
        self.scaled(rhs)
    }
}

impl Neg for AffineExpr {
    type Output = AffineExpr;
    fn neg(self) -> AffineExpr {
        self.scaled(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_matches_evaluation() {
        let x = AffineExpr::unknown(3, 0);
        let y = AffineExpr::unknown(3, 2);
        let c = AffineExpr::constant(3, 1.5);
        let e = (&x * 2.0) + &y - &c;
        let vals = [0.25, 9.0, -1.0];
        assert_eq!(e.eval(&vals), 2.0 * 0.25 - 1.0 - 1.5);
        let n = -e.clone();
        assert_eq!(n.eval(&vals), -e.eval(&vals));
        let mut z = AffineExpr::zero(3);
        assert!(z.is_zero());
        z += &e;
        z -= &e;
        assert!(z.is_zero());
    }
}
