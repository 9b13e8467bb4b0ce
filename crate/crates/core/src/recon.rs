//! Recovering small-denominator rationals from numerical approximants.
//!
//! The candidate is the best rational approximation with bounded denominator
//! (continued fractions plus the final semiconvergent). It is declared
//! [`Confidence::Unique`] when both of its neighbours in the Farey sequence of
//! order `bound` lie outside the error interval, since every other fraction
//! of that order is farther away than one of them.

use std::fmt;

use rayon::prelude::*;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReconError {
    #[error("no candidate: nothing with denominator <= {bound} lies within {radius} of {x}")]
    NoCandidate { x: String, radius: String, bound: Integer },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Default denominator bound.
pub const DEFAULT_BOUND: u64 = 10_000_000;
/// Default radius, in units of the last reported digit.
pub const DEFAULT_RADIUS_ULPS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Confidence {
    Unique,
    Ambiguous,
}

impl fmt::Display for Confidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Confidence::Unique => "unique",
            Confidence::Ambiguous => "ambiguous",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalGuess {
    pub value: Rational,
    pub denominator_bound: Integer,
    /// `|x - value|`.
    pub residual: Float,
    pub confidence: Confidence,
}

/// Closest rational to `x` with denominator at most `bound`.
pub fn best_approximation(x: &Rational, bound: &Integer) -> Rational {
    assert!(*bound >= 1, "denominator bound must be positive");
    if x.denom() <= bound {
        return x.clone();
    }
    let (mut p0, mut q0, mut p1, mut q1) = (Integer::from(0), Integer::from(1), Integer::from(1), Integer::from(0));
    let (mut n, mut d) = (x.numer().clone(), x.denom().clone());
    loop {
        let (a, r) = n.clone().div_rem_floor(d.clone());
        let q2 = Integer::from(&q0 + &a * &q1);
        if q2 > *bound {
            break;
        }
        let p2 = Integer::from(&p0 + &a * &p1);
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        (n, d) = (d, r);
        if d == 0 {
            break;
        }
    }
    let t = Integer::from(bound - &q0) / &q1;
    let semi = Rational::from((Integer::from(&p0 + &t * &p1), Integer::from(&q0 + &t * &q1)));
    let conv = Rational::from((p1, q1));
    let err_semi = Rational::from(&semi - x).abs();
    let err_conv = Rational::from(&conv - x).abs();
    if err_conv <= err_semi {
        conv
    } else {
        semi
    }
}

/// Left and right neighbours of `r` in the Farey sequence of order `bound`.
pub fn farey_neighbors(r: &Rational, bound: &Integer) -> (Rational, Rational) {
    let (p, q) = (r.numer(), r.denom());
    // left a/b: p b - q a = 1, right c/d: q c - p d = 1, with b, d maximal
    let largest = |residue: Integer| -> Integer {
        // largest value <= bound congruent to residue mod q
        let slack = Integer::from(bound - &residue);
        residue + slack / q * q
    };
    let (b, d) = if *q == 1 {
        (bound.clone(), bound.clone())
    } else {
        let inv = Integer::from(p.invert_ref(q).expect("coprime"));
        let b = largest(inv.clone());
        let d = largest(Integer::from(q - &inv));
        (b, d)
    };
    let a = (Integer::from(p * &b) - 1) / q;
    let c = (Integer::from(p * &d) + 1) / q;
    (Rational::from((a, b)), Rational::from((c, d)))
}

/// Reconstruction from an exact rational approximant.
pub fn reconstruct_rational(x: &Rational, radius: &Rational, bound: &Integer) -> Result<RationalGuess, ReconError> {
    if *radius <= 0 {
        return Err(ReconError::Argument(format!("error radius must be positive, got {radius}")));
    }
    if *bound < 1 {
        return Err(ReconError::Argument(format!("denominator bound must be positive, got {bound}")));
    }
    let value = best_approximation(x, bound);
    let residual = Rational::from(&value - x).abs();
    if residual > *radius {
        return Err(ReconError::NoCandidate {
            x: x.to_f64().to_string(),
            radius: radius.to_f64().to_string(),
            bound: bound.clone(),
        });
    }
    let (left, right) = farey_neighbors(&value, bound);
    let outside = |r: &Rational| Rational::from(r - x).abs() > *radius;
    let confidence = if outside(&left) && outside(&right) { Confidence::Unique } else { Confidence::Ambiguous };
    Ok(RationalGuess {
        value,
        denominator_bound: bound.clone(),
        residual: Float::with_val(128, residual),
        confidence,
    })
}

/// Reconstruction of a big-float approximant.
pub fn reconstruct(x: &Float, error_radius: &Float, denominator_bound: &Integer) -> Result<RationalGuess, ReconError> {
    let xr = x
        .to_rational()
        .ok_or_else(|| ReconError::Argument(format!("approximant {x} is not finite")))?;
    let rr = error_radius
        .to_rational()
        .ok_or_else(|| ReconError::Argument(format!("error radius {error_radius} is not finite")))?;
    let mut guess = reconstruct_rational(&xr, &rr, denominator_bound)?;
    guess.residual = Float::with_val(x.prec().max(128), Rational::from(&guess.value - &xr).abs());
    Ok(guess)
}

/// A decimal approximant with the radius implied by its last digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Approximant {
    pub value: Rational,
    pub radius: Rational,
}

/// Parses `[-]digits[.digits][e[-]exp]` exactly; the radius defaults to
/// [`DEFAULT_RADIUS_ULPS`] units in the last written digit.
pub fn parse_approximant(s: &str) -> Result<Approximant, ReconError> {
    let bad = || ReconError::Argument(format!("not a decimal number: {s:?}"));
    let s = s.trim();
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: Integer = format!("0{int_part}{frac_part}").parse().map_err(|_| bad())?;
    let scale = exp - frac_part.len() as i32;
    let unit = pow10(scale);
    let mut value = Rational::from(digits) * &unit;
    if neg {
        value = -value;
    }
    Ok(Approximant { value, radius: unit * DEFAULT_RADIUS_ULPS })
}

fn pow10(e: i32) -> Rational {
    use rug::ops::Pow;
    Rational::from(10).pow(e)
}

/// One element of a reconstructed sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEntry {
    pub k: i64,
    pub guess: Result<RationalGuess, ReconError>,
}

/// Element-wise reconstruction; a single radius is shared by all elements.
pub fn reconstruct_sequence(
    values: &[(i64, Float)],
    error_radii: &[Float],
    bound: &Integer,
) -> Result<Vec<SequenceEntry>, ReconError> {
    if error_radii.len() != 1 && error_radii.len() != values.len() {
        return Err(ReconError::Argument(format!(
            "{} radii for {} values",
            error_radii.len(),
            values.len()
        )));
    }
    Ok(values
        .par_iter()
        .enumerate()
        .map(|(i, (k, x))| {
            let radius = &error_radii[if error_radii.len() == 1 { 0 } else { i }];
            SequenceEntry { k: *k, guess: reconstruct(x, radius, bound) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn f(s: &str) -> Float {
        Float::with_val(256, Float::parse(s).unwrap())
    }

    #[test]
    fn spec_examples() {
        let g = reconstruct(&f("0.5"), &f("1e-6"), &Integer::from(100)).unwrap();
        assert_eq!((g.value, g.confidence), (q(1, 2), Confidence::Unique));
        let g = reconstruct(&f("0.242424242424"), &f("1e-10"), &Integer::from(1000)).unwrap();
        assert_eq!((g.value, g.confidence), (q(8, 33), Confidence::Unique));
        let g = reconstruct(&f("0.710526"), &f("1e-5"), &Integer::from(100)).unwrap();
        assert_eq!((g.value, g.confidence), (q(27, 38), Confidence::Unique));
    }

    #[test]
    fn sequences() {
        let out = reconstruct_sequence(&[(0, f("0.45312500"))], &[f("1e-7")], &Integer::from(1024)).unwrap();
        assert_eq!(out[0].guess.as_ref().unwrap().value, q(29, 64));
        let x = Float::with_val(256, q(3736, 22287));
        let x = f(&format!("{x:.12}"));
        let out = reconstruct_sequence(&[(1, x)], &[f("1e-5")], &Integer::from(100_000)).unwrap();
        assert_eq!(out[0].guess.as_ref().unwrap().value, q(3736, 22287));
        assert!(reconstruct_sequence(&[], &[f("1e-5")], &Integer::from(10)).unwrap().is_empty());
        assert!(reconstruct_sequence(&[(0, f("0.1")), (1, f("0.2"))], &[f("1"), f("1"), f("1")], &Integer::from(10)).is_err());
    }

    #[test]
    fn errors() {
        assert!(matches!(
            reconstruct(&f("0.5"), &f("0"), &Integer::from(10)),
            Err(ReconError::Argument(_))
        ));
        assert!(matches!(
            reconstruct(&f("0.123456789"), &f("1e-9"), &Integer::from(10)),
            Err(ReconError::NoCandidate { .. })
        ));
    }

    #[test]
    fn farey() {
        let (l, r) = farey_neighbors(&q(1, 2), &Integer::from(5));
        assert_eq!((l, r), (q(2, 5), q(3, 5)));
        let (l, r) = farey_neighbors(&q(1, 3), &Integer::from(5));
        assert_eq!((l, r), (q(1, 4), q(2, 5)));
        let (l, r) = farey_neighbors(&q(0, 1), &Integer::from(4));
        assert_eq!((l, r), (q(-1, 4), q(1, 4)));
    }

    #[test]
    fn decimal_parsing() {
        let a = parse_approximant("0.242424").unwrap();
        assert_eq!(a.value, q(242424, 1_000_000));
        assert_eq!(a.radius, q(1, 100_000));
        let a = parse_approximant("-1.5e-3").unwrap();
        assert_eq!(a.value, q(-15, 10_000));
        assert_eq!(a.radius, q(1, 1000));
        assert_eq!(parse_approximant("42").unwrap().radius, q(10, 1));
        for s in ["", ".", "abc", "1.2.3", "1e"] {
            assert!(parse_approximant(s).is_err(), "{s}");
        }
    }
}
