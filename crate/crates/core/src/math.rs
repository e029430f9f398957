//! Float helpers that `core` does not provide without `std`.

#[inline]
pub(crate) fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

/// `base^exp` for a non-negative integer exponent with `0^0 = 1`.
#[inline]
pub(crate) fn powi(base: f64, exp: u64) -> f64 {
    let mut result = 1.0;
    let mut b = base;
    let mut e = exp;
    while e > 0 {
        if e & 1 == 1 {
            result *= b;
        }
        b *= b;
        e >>= 1;
    }
    result
}

/// `base^exp` for a signed exponent; only called with `base != 0` when `exp < 0`.
#[inline]
pub(crate) fn powi_signed(base: f64, exp: i64) -> f64 {
    if exp >= 0 {
        powi(base, exp as u64)
    } else {
        1.0 / powi(base, exp.unsigned_abs())
    }
}

/// Binomial coefficient `C(n, k)` as a running product in f64. Zero when `k > n`.
pub fn binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// `C(a - 1 + n, n)` for a level offset `a >= 0`; equals `[n == 0]` at `a = 0`.
#[inline]
pub(crate) fn level_binomial(a: u64, n: u64) -> f64 {
    if a == 0 {
        if n == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        binomial(a - 1 + n, n)
    }
}

/// Unevaluated sum `hi + lo` carrying about 106 bits of precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, libm::fma(a, b, -p))
}

impl DoubleDouble {
    pub fn new(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (hi, lo) = two_sum(s, e + self.lo + o.lo);
        Self { hi, lo }
    }

    pub fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Self) -> Self {
        self.add(o.neg())
    }

    pub fn mul(self, o: Self) -> Self {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = two_sum(p, e + self.hi * o.lo + self.lo * o.hi);
        Self { hi, lo }
    }

    pub fn div(self, o: Self) -> Self {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Self::new(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Self::new(q2)));
        let q3 = r.hi / o.hi;
        Self::new(q1).add(Self::new(q2)).add(Self::new(q3))
    }

    pub fn powi(self, exp: u64) -> Self {
        let mut result = Self::new(1.0);
        let mut b = self;
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(b);
            }
            b = b.mul(b);
            e >>= 1;
        }
        result
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

#[inline]
pub(crate) fn is_finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10.0);
        assert_eq!(binomial(0, 0), 1.0);
        assert_eq!(binomial(3, 4), 0.0);
        assert_eq!(binomial(40, 20), 137_846_528_820.0);
        assert_eq!(level_binomial(0, 0), 1.0);
        assert_eq!(level_binomial(0, 3), 0.0);
        assert_eq!(level_binomial(4, 2), binomial(5, 2));
    }

    #[test]
    fn double_double_keeps_cancelled_bits() {
        let x = DoubleDouble::new(1.0).add(DoubleDouble::new(1e-20));
        let y = x.sub(DoubleDouble::new(1.0));
        assert_eq!(y.to_f64(), 1e-20);
        let t = DoubleDouble::new(1.0 + f64::EPSILON);
        let sq = t.mul(t).sub(DoubleDouble::new(1.0 + 2.0 * f64::EPSILON));
        assert_eq!(sq.to_f64(), f64::EPSILON * f64::EPSILON);
        assert_eq!(DoubleDouble::new(3.0).powi(4).to_f64(), 81.0);
        let third = DoubleDouble::new(1.0).div(DoubleDouble::new(3.0));
        let back = third.mul(DoubleDouble::new(3.0)).sub(DoubleDouble::new(1.0));
        assert!(back.to_f64().abs() < 1e-30);
    }

    #[test]
    fn integer_powers() {
        assert_eq!(powi(0.0, 0), 1.0);
        assert_eq!(powi(0.0, 3), 0.0);
        assert!((powi(0.5, 10) - 1.0 / 1024.0).abs() < 1e-18);
        assert!((powi_signed(2.0, -3) - 0.125).abs() < 1e-18);
    }
}
