//! Exact arithmetic primitives.
//!
//! Everything here is built on GMP rationals. Gamma values at half-integers are
//! carried as a rational coefficient times a power of `sqrt(pi)` so that any
//! cancellation of `sqrt(pi)` is checked rather than assumed.

use std::fmt;
use std::ops::{Div, Mul};

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use thiserror::Error;

/// Arbitrary-precision exact rational, always in lowest terms.
pub type BigRational = Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("uncancelled pole: {denom_zeros} zero factor(s) in the denominator, {numer_zeros} in the numerator")]
    UncancelledPole { numer_zeros: usize, denom_zeros: usize },
    #[error("cannot add values carrying sqrt(pi)^{0} and sqrt(pi)^{1}")]
    ExponentMismatch(i32, i32),
    #[error("value carries sqrt(pi)^{0} and is not rational")]
    NotRational(i32),
}

/// True when `2x` is an integer.
pub fn is_half_integer(x: &Rational) -> bool {
    *x.denom() == 1 || *x.denom() == 2
}

/// Rising factorial `(a)_n = a (a+1) ... (a+n-1)`; `(a)_0 = 1`.
pub fn pochhammer(a: &Rational, n: u32) -> Rational {
    let mut acc = Rational::from(1);
    let mut term = a.clone();
    for _ in 0..n {
        if term.is_zero() {
            return Rational::new();
        }
        acc *= &term;
        term += 1;
    }
    acc
}

/// A value `coeff * pi^(sqrtpi_exponent / 2)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SqrtPiScaled {
    pub coeff: Rational,
    pub sqrtpi_exponent: i32,
}

impl SqrtPiScaled {
    pub fn new(coeff: Rational, sqrtpi_exponent: i32) -> Self {
        // zero has no meaningful exponent; normalise so equality is structural
        if coeff.is_zero() {
            return SqrtPiScaled { coeff, sqrtpi_exponent: 0 };
        }
        SqrtPiScaled { coeff, sqrtpi_exponent }
    }

    pub fn rational(coeff: Rational) -> Self {
        Self::new(coeff, 0)
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, ExactError> {
        if self.coeff.is_zero() {
            return Ok(other.clone());
        }
        if other.coeff.is_zero() {
            return Ok(self.clone());
        }
        if self.sqrtpi_exponent != other.sqrtpi_exponent {
            return Err(ExactError::ExponentMismatch(self.sqrtpi_exponent, other.sqrtpi_exponent));
        }
        Ok(Self::new(Rational::from(&self.coeff + &other.coeff), self.sqrtpi_exponent))
    }

    /// The rational value, provided `sqrt(pi)` has cancelled completely.
    pub fn to_rational(&self) -> Result<Rational, ExactError> {
        if self.sqrtpi_exponent != 0 {
            return Err(ExactError::NotRational(self.sqrtpi_exponent));
        }
        Ok(self.coeff.clone())
    }

    pub fn into_rational(self) -> Result<Rational, ExactError> {
        if self.sqrtpi_exponent != 0 {
            return Err(ExactError::NotRational(self.sqrtpi_exponent));
        }
        Ok(self.coeff)
    }

    pub fn to_float(&self, prec: u32) -> Float {
        let pi = Float::with_val(prec, rug::float::Constant::Pi);
        let scale = Float::with_val(prec, pi.sqrt_ref()).pow(self.sqrtpi_exponent);
        Float::with_val(prec, &self.coeff) * scale
    }
}

impl Mul for &SqrtPiScaled {
    type Output = SqrtPiScaled;
    fn mul(self, rhs: &SqrtPiScaled) -> SqrtPiScaled {
        SqrtPiScaled::new(
            Rational::from(&self.coeff * &rhs.coeff),
            self.sqrtpi_exponent + rhs.sqrtpi_exponent,
        )
    }
}

impl Mul for SqrtPiScaled {
    type Output = SqrtPiScaled;
    fn mul(self, rhs: SqrtPiScaled) -> SqrtPiScaled {
        &self * &rhs
    }
}

impl Mul<&Rational> for SqrtPiScaled {
    type Output = SqrtPiScaled;
    fn mul(self, rhs: &Rational) -> SqrtPiScaled {
        SqrtPiScaled::new(self.coeff * rhs, self.sqrtpi_exponent)
    }
}

impl Div for &SqrtPiScaled {
    type Output = SqrtPiScaled;
    /// Panics on division by zero, like every other rug division.
    fn div(self, rhs: &SqrtPiScaled) -> SqrtPiScaled {
        SqrtPiScaled::new(
            Rational::from(&self.coeff / &rhs.coeff),
            self.sqrtpi_exponent - rhs.sqrtpi_exponent,
        )
    }
}

impl Div for SqrtPiScaled {
    type Output = SqrtPiScaled;
    fn div(self, rhs: SqrtPiScaled) -> SqrtPiScaled {
        &self / &rhs
    }
}

impl fmt::Display for SqrtPiScaled {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sqrtpi_exponent {
            0 => write!(f, "{}", self.coeff),
            e => write!(f, "{}*pi^({}/2)", self.coeff, e),
        }
    }
}

/// Exact `Gamma(x)` for `x` a positive integer or half-integer.
pub fn gamma_half(x: &Rational) -> Result<SqrtPiScaled, ExactError> {
    if !is_half_integer(x) || *x <= 0 {
        return Err(ExactError::Domain(format!(
            "gamma_half needs a positive integer or half-integer, got {x}"
        )));
    }
    if *x.denom() == 1 {
        let n = x.numer().to_u32().ok_or_else(|| {
            ExactError::Domain(format!("gamma argument {x} too large"))
        })?;
        let fact = Integer::from(Integer::factorial(n - 1));
        return Ok(SqrtPiScaled::rational(Rational::from(fact)));
    }
    // x = m + 1/2: Gamma(x) = (2m)! / (4^m m!) sqrt(pi)
    let m = (Integer::from(x.numer() - 1u32) / 2u32)
        .to_u32()
        .ok_or_else(|| ExactError::Domain(format!("gamma argument {x} too large")))?;
    let num = Integer::from(Integer::factorial(2 * m));
    let den = Integer::from(Integer::factorial(m)) << (2 * m);
    Ok(SqrtPiScaled::new(Rational::from((num, den)), 1))
}

/// An ordered product of rational factors, kept unevaluated so that zero
/// factors can be matched between a numerator and a denominator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorList {
    pub factors: Vec<Rational>,
}

impl FactorList {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, f: Rational) {
        self.factors.push(f);
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    pub fn zero_count(&self) -> usize {
        self.factors.iter().filter(|f| f.is_zero()).count()
    }

    /// Plain product of all factors.
    pub fn product(&self) -> Rational {
        self.factors.iter().fold(Rational::from(1), |acc, f| acc * f)
    }
}

impl FromIterator<Rational> for FactorList {
    fn from_iter<I: IntoIterator<Item = Rational>>(iter: I) -> Self {
        FactorList { factors: iter.into_iter().collect() }
    }
}

/// Ratio of two factor products with zero cancellation.
///
/// Zero factors are paired positionally: the first `z_d` zeros of the numerator
/// cancel the `z_d` zeros of the denominator. Any numerator zero left over
/// makes the result zero; a denominator zero left over is a pole.
pub fn factored_ratio(numer: &FactorList, denom: &FactorList) -> Result<Rational, ExactError> {
    let z_n = numer.zero_count();
    let z_d = denom.zero_count();
    if z_n < z_d {
        return Err(ExactError::UncancelledPole { numer_zeros: z_n, denom_zeros: z_d });
    }
    let mut to_cancel = z_d;
    let mut num = Rational::from(1);
    for f in &numer.factors {
        if f.is_zero() {
            if to_cancel > 0 {
                to_cancel -= 1;
                continue;
            }
            return Ok(Rational::new());
        }
        num *= f;
    }
    let den = denom
        .factors
        .iter()
        .filter(|f| !f.is_zero())
        .fold(Rational::from(1), |acc, f| acc * f);
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    #[test]
    fn pochhammer_examples() {
        assert_eq!(pochhammer(&q(3, 1), 0), 1);
        assert_eq!(pochhammer(&q(1, 2), 2), q(3, 4));
        assert_eq!(pochhammer(&q(-2, 1), 4), 0);
    }

    #[test]
    fn gamma_half_examples() {
        assert_eq!(gamma_half(&q(1, 2)).unwrap(), SqrtPiScaled::new(q(1, 1), 1));
        assert_eq!(gamma_half(&q(4, 1)).unwrap(), SqrtPiScaled::rational(q(6, 1)));
        // (5/2)(3/2)(1/2) Gamma(1/2)
        let expected = q(5, 2) * q(3, 2) * q(1, 2);
        assert_eq!(gamma_half(&q(7, 2)).unwrap(), SqrtPiScaled::new(expected, 1));
    }

    #[test]
    fn gamma_half_rejects_bad_arguments() {
        for x in [q(0, 1), q(-1, 2), q(1, 3), q(-3, 1)] {
            assert!(matches!(gamma_half(&x), Err(ExactError::Domain(_))), "{x}");
        }
    }

    #[test]
    fn gamma_half_float_value() {
        let g = gamma_half(&q(7, 2)).unwrap().to_float(128);
        assert!((g.to_f64() - 3.323_350_970_447_842_6).abs() < 1e-14);
    }

    #[test]
    fn sqrtpi_bookkeeping() {
        let a = gamma_half(&q(9, 2)).unwrap();
        let b = gamma_half(&q(1, 2)).unwrap();
        let r = &a / &b;
        assert_eq!(r.to_rational().unwrap(), q(105, 16));
        assert_eq!((&a * &b).sqrtpi_exponent, 2);
        assert!(matches!(a.to_rational(), Err(ExactError::NotRational(1))));
        assert!(matches!(
            a.checked_add(&SqrtPiScaled::rational(q(1, 1))),
            Err(ExactError::ExponentMismatch(1, 0))
        ));
        assert_eq!(a.checked_add(&a).unwrap().coeff, q(105, 8));
    }

    #[test]
    fn factored_ratio_examples() {
        let fl = |v: &[Rational]| v.iter().cloned().collect::<FactorList>();
        assert_eq!(factored_ratio(&fl(&[q(2, 1), q(3, 1)]), &fl(&[q(4, 1)])).unwrap(), q(3, 2));
        assert_eq!(factored_ratio(&fl(&[q(0, 1), q(5, 1)]), &fl(&[q(2, 1)])).unwrap(), 0);
        assert_eq!(
            factored_ratio(&fl(&[q(0, 1), q(6, 1)]), &fl(&[q(0, 1), q(3, 1)])).unwrap(),
            q(2, 1)
        );
        assert_eq!(
            factored_ratio(&fl(&[q(0, 1), q(0, 1), q(6, 1)]), &fl(&[q(0, 1), q(3, 1)])).unwrap(),
            0
        );
        assert_eq!(
            factored_ratio(&fl(&[q(6, 1)]), &fl(&[q(0, 1)])),
            Err(ExactError::UncancelledPole { numer_zeros: 0, denom_zeros: 1 })
        );
    }

    /// (c0 + eps) style check: replace each zero by eps and take the limit.
    #[test]
    fn factored_ratio_matches_eps_limit() {
        let numer: FactorList = [q(0, 1), q(6, 1)].into_iter().collect();
        let denom: FactorList = [q(0, 1), q(3, 1)].into_iter().collect();
        let eps = q(1, 1_000_000_007);
        let perturbed = |l: &FactorList| {
            l.factors
                .iter()
                .map(|f| if f.is_zero() { eps.clone() } else { f.clone() })
                .fold(q(1, 1), |a, f| a * f)
        };
        assert_eq!(perturbed(&numer) / perturbed(&denom), factored_ratio(&numer, &denom).unwrap());
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-60i64..60, 1i64..12).prop_map(|(n, d)| q(n, d))
    }

    proptest! {
        #[test]
        fn pochhammer_splits(a in small_rational(), n in 0u32..=20, m in 0u32..=20) {
            let lhs = pochhammer(&a, n) * pochhammer(&(a.clone() + n), m);
            prop_assert_eq!(lhs, pochhammer(&a, n + m));
        }

        #[test]
        fn factored_ratio_agrees_with_naive(
            num in proptest::collection::vec(small_rational(), 0..8),
            den in proptest::collection::vec(small_rational(), 0..8),
        ) {
            prop_assume!(den.iter().all(|f| !f.is_zero()));
            let n: FactorList = num.into_iter().collect();
            let d: FactorList = den.into_iter().collect();
            prop_assert_eq!(factored_ratio(&n, &d).unwrap(), n.product() / d.product());
        }
    }

    #[test]
    fn gamma_half_recurrence() {
        let mut x = q(1, 2);
        while x <= 40 {
            let next = gamma_half(&(x.clone() + 1)).unwrap();
            let cur = gamma_half(&x).unwrap() * &x;
            assert_eq!(next, cur, "x = {x}");
            x += q(1, 2);
        }
    }
}
