//! Closed-form separability probabilities for `alpha = 1/2, 1, 2`, the
//! `G(alpha, k)` scaffold, polynomial structure of `F / G` and the large-`k`
//! log-ratio diagnostic.

use std::fmt;

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{gamma_half, is_half_integer, pochhammer, ExactError, SqrtPiScaled};
use crate::inversion::digits_to_bits;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosedFormError {
    #[error("singularity: the alpha = {alpha} formula has a pole at k = {k}")]
    Singularity { alpha: Rational, k: i64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("structure violation: {0}")]
    StructureViolation(String),
    #[error("precision error: need at least {needed} digits, got {have}")]
    Precision { needed: u32, have: u32 },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

/// The three `alpha` values with printed separability formulas.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AlphaCase {
    Rebit,
    Qubit,
    Quaterbit,
}

impl AlphaCase {
    pub const ALL: [AlphaCase; 3] = [AlphaCase::Rebit, AlphaCase::Qubit, AlphaCase::Quaterbit];

    pub fn alpha(self) -> Rational {
        match self {
            AlphaCase::Rebit => Rational::from((1, 2)),
            AlphaCase::Qubit => Rational::from(1),
            AlphaCase::Quaterbit => Rational::from(2),
        }
    }

    pub fn from_alpha(alpha: &Rational) -> Result<Self, ClosedFormError> {
        AlphaCase::ALL
            .into_iter()
            .find(|c| c.alpha() == *alpha)
            .ok_or_else(|| ClosedFormError::Domain(format!("no closed form for alpha = {alpha}")))
    }

    fn formula(self) -> Formula {
        let q = |n: i64, d: i64| Rational::from((n, d));
        match self {
            AlphaCase::Qubit => Formula {
                scale: q(3, 1),
                four_shift: 3,
                poly: Poly::from_ints(&[25, 14, 2]),
                gamma_num: vec![(1, q(7, 2)), (2, q(9, 1))],
                gamma_den: vec![(3, q(13, 1))],
            },
            AlphaCase::Quaterbit => Formula {
                scale: q(1, 3),
                four_shift: 6,
                poly: Poly::from_ints(&[2430, 1452, 355, 42, 2]),
                gamma_num: vec![(1, q(13, 2)), (2, q(15, 1))],
                gamma_den: vec![(3, q(22, 1))],
            },
            AlphaCase::Rebit => Formula {
                scale: q(1, 1),
                four_shift: 1,
                poly: Poly::from_ints(&[15, 8]),
                gamma_num: vec![(1, q(2, 1)), (2, q(9, 2))],
                gamma_den: vec![(3, q(7, 1))],
            },
        }
    }
}

impl fmt::Display for AlphaCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.alpha())
    }
}

/// `F(k) = scale 4^(k + four_shift) poly(k) prod Gamma(num) / (sqrt(pi) prod Gamma(den))`,
/// each gamma argument being `a k + b`.
struct Formula {
    scale: Rational,
    four_shift: i64,
    poly: Poly,
    gamma_num: Vec<(i64, Rational)>,
    gamma_den: Vec<(i64, Rational)>,
}

fn gamma_arg(a: i64, b: &Rational, k: i64) -> Rational {
    Rational::from(a * k) + b
}

fn pow4(e: i64) -> Rational {
    let e = i32::try_from(e).expect("exponent fits in i32");
    Rational::from(4).pow(e)
}

impl Formula {
    fn f_exact(&self, case: AlphaCase, k: i64) -> Result<Rational, ClosedFormError> {
        let mut acc = SqrtPiScaled::new(Rational::from(&self.scale * &pow4(k + self.four_shift)), -1);
        acc = acc * &self.poly.eval(&Rational::from(k));
        for (a, b) in &self.gamma_num {
            let x = gamma_arg(*a, b, k);
            if x <= 0 {
                return Err(ClosedFormError::Singularity { alpha: case.alpha(), k });
            }
            acc = acc * gamma_half(&x)?;
        }
        for (a, b) in &self.gamma_den {
            let x = gamma_arg(*a, b, k);
            if x <= 0 {
                // 1/Gamma vanishes at non-positive integers
                return Ok(Rational::new());
            }
            acc = acc / gamma_half(&x)?;
        }
        Ok(acc.into_rational()?)
    }

    fn log_f(&self, k: i64, prec: u32) -> Float {
        let mut acc = Float::with_val(prec, &self.scale).ln();
        acc += Float::with_val(prec, 4).ln() * Float::with_val(prec, k + self.four_shift);
        acc += Float::with_val(prec, self.poly.eval(&Rational::from(k))).ln();
        acc -= Float::with_val(prec, Constant::Pi).ln() / 2;
        for (a, b) in &self.gamma_num {
            acc += Float::with_val(prec, gamma_arg(*a, b, k)).ln_gamma();
        }
        for (a, b) in &self.gamma_den {
            acc -= Float::with_val(prec, gamma_arg(*a, b, k)).ln_gamma();
        }
        acc
    }
}

/// Smallest `k` accepted by [`sep_prob`].
pub const MIN_K: i64 = -2;

/// `F(alpha, k)`, so that the separability probability is `1 - F`.
pub fn complement(case: AlphaCase, k: i64) -> Result<Rational, ClosedFormError> {
    if k < MIN_K {
        return Err(ClosedFormError::Domain(format!("k = {k} below {MIN_K}")));
    }
    case.formula().f_exact(case, k)
}

/// Exact separability probability `1 - F(alpha, k)`.
pub fn sep_prob(case: AlphaCase, k: i64) -> Result<Rational, ClosedFormError> {
    Ok(Rational::from(1) - complement(case, k)?)
}

/// Separability probability rounded to `digits` decimal digits of precision.
pub fn sep_prob_float(case: AlphaCase, k: i64, digits: u32) -> Result<Float, ClosedFormError> {
    Ok(Float::with_val(digits_to_bits(digits) + 8, sep_prob(case, k)?))
}

/// `G(alpha, k) = 4^k Gamma(k+3a+3/2) Gamma(2k+5a+2) / (Gamma(1/2) Gamma(3k+10a+2))`.
pub fn g_scaffold(alpha: &Rational, k: i64) -> Result<Rational, ClosedFormError> {
    if !is_half_integer(alpha) || *alpha <= 0 {
        return Err(ClosedFormError::Domain(format!("alpha = {alpha} is not a positive half-integer")));
    }
    let k_q = Rational::from(k);
    let num1 = (&k_q + Rational::from(3 * alpha)) + Rational::from((3, 2));
    let num2 = Rational::from(2 * &k_q) + Rational::from(5 * alpha) + 2;
    let den = Rational::from(3 * &k_q) + Rational::from(10 * alpha) + 2;
    for x in [&num1, &num2, &den] {
        if *x <= 0 {
            return Err(ClosedFormError::Domain(format!("gamma argument {x} is not positive")));
        }
    }
    let value = SqrtPiScaled::rational(pow4(k)) * gamma_half(&num1)? * gamma_half(&num2)?
        / (gamma_half(&Rational::from((1, 2)))? * gamma_half(&den)?);
    Ok(value.into_rational()?)
}

/// `(k + 2 alpha + 1)_(alpha + 1/2)` for half-integer `alpha`, `1` otherwise.
pub fn half_integer_correction(alpha: &Rational, k: i64) -> Rational {
    match half_integer_pochhammer(alpha) {
        Some((base, count)) => pochhammer(&(Rational::from(k) + base), count),
        None => Rational::from(1),
    }
}

/// `(base, count)` with correction `(k + base)_count`, for non-integer `alpha`.
fn half_integer_pochhammer(alpha: &Rational) -> Option<(Rational, u32)> {
    if *alpha.denom() == 1 {
        return None;
    }
    let base = Rational::from(2 * alpha) + 1;
    let count = (alpha + Rational::from((1, 2)))
        .numer()
        .to_u32()
        .expect("small alpha");
    Some((base, count))
}

/// Dense polynomial in `k` with exact coefficients, lowest degree first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Poly {
    #[serde(with = "crate::serde_rational::vec")]
    coeffs: Vec<Rational>,
}

impl Poly {
    pub fn new(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        Poly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly::new(coeffs.iter().map(|&c| Rational::from(c)).collect())
    }

    /// `prod (k + r)` over `roots_neg`.
    pub fn from_shifts(shifts: impl IntoIterator<Item = Rational>) -> Self {
        let mut p = Poly::from_ints(&[1]);
        for s in shifts {
            p = &p * &Poly::new(vec![s, Rational::from(1)]);
        }
        p
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn leading(&self) -> Rational {
        self.coeffs.last().cloned().unwrap_or_default()
    }

    /// Coefficient of `k^i`.
    pub fn coeff(&self, i: usize) -> Rational {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn eval(&self, x: &Rational) -> Rational {
        let mut acc = Rational::new();
        for c in self.coeffs.iter().rev() {
            acc *= x;
            acc += c;
        }
        acc
    }

    pub fn monic(&self) -> Poly {
        let lead = self.leading();
        Poly::new(self.coeffs.iter().map(|c| Rational::from(c / &lead)).collect())
    }

    /// Quotient and remainder by a nonzero divisor.
    pub fn div_rem(&self, divisor: &Poly) -> (Poly, Poly) {
        let dd = divisor.degree().expect("division by the zero polynomial");
        let lead = divisor.leading();
        let mut rem = self.coeffs.clone();
        let n = self.coeffs.len();
        if n <= dd {
            return (Poly::default(), self.clone());
        }
        let mut quot = vec![Rational::new(); n - dd];
        for i in (0..n - dd).rev() {
            let c = Rational::from(&rem[i + dd] / &lead);
            if !c.is_zero() {
                for (j, d) in divisor.coeffs.iter().enumerate() {
                    rem[i + j] -= Rational::from(&c * d);
                }
            }
            quot[i] = c;
        }
        rem.truncate(dd);
        (Poly::new(quot), Poly::new(rem))
    }

    /// Minimal-degree interpolant by Newton divided differences.
    pub fn interpolate(points: &[(Rational, Rational)]) -> Poly {
        let newton = divided_differences(points);
        newton_to_monomial(points, &newton)
    }
}

impl std::ops::Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::default();
        }
        let mut out = vec![Rational::new(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += Rational::from(a * b);
            }
        }
        Poly::new(out)
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return f.write_str("0");
        }
        let mut first = true;
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let neg = *c < 0;
            let mag = Rational::from(c.abs_ref());
            if first {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            first = false;
            let show_coeff = i == 0 || mag != 1;
            if show_coeff {
                write!(f, "{mag}")?;
                if i > 0 && *mag.denom() != 1 {
                    f.write_str(" ")?;
                }
            }
            match i {
                0 => {}
                1 => f.write_str("k")?,
                _ => write!(f, "k^{i}")?,
            }
        }
        Ok(())
    }
}

fn divided_differences(points: &[(Rational, Rational)]) -> Vec<Rational> {
    let mut table: Vec<Rational> = points.iter().map(|(_, y)| y.clone()).collect();
    let n = points.len();
    for level in 1..n {
        for i in (level..n).rev() {
            let dx = Rational::from(&points[i].0 - &points[i - level].0);
            table[i] = Rational::from(&table[i] - &table[i - 1]) / dx;
        }
    }
    table
}

fn newton_to_monomial(points: &[(Rational, Rational)], newton: &[Rational]) -> Poly {
    // Horner on the Newton form: p = c0 + (x - x0)(c1 + (x - x1)(c2 + ...))
    let mut acc = Poly::default();
    for i in (0..newton.len()).rev() {
        let shift = Poly::new(vec![-points[i].0.clone(), Rational::from(1)]);
        acc = &acc * &shift;
        let mut c = acc.coeffs.clone();
        if c.is_empty() {
            c.push(Rational::new());
        }
        c[0] += &newton[i];
        acc = Poly::new(c);
    }
    acc
}

/// Extra samples beyond the degree that must agree with the interpolant.
pub const WITNESS_SAMPLES: usize = 2;
const MAX_SAMPLES: i64 = 80;

/// Fits the minimal-degree polynomial through `points`, requiring at least
/// [`WITNESS_SAMPLES`] points beyond those that determine it.
pub fn fit_polynomial(points: &[(Rational, Rational)]) -> Result<Poly, ClosedFormError> {
    let newton = divided_differences(points);
    let used = newton.iter().rposition(|c| !c.is_zero()).map_or(0, |i| i + 1);
    if points.len() < used + WITNESS_SAMPLES {
        return Err(ClosedFormError::StructureViolation(format!(
            "{} samples cannot confirm a polynomial needing {used}",
            points.len()
        )));
    }
    Ok(newton_to_monomial(&points[..used], &newton[..used]))
}

/// `F / G` times the half-integer correction at `k`.
fn p_sample(case: AlphaCase, k: i64) -> Result<Rational, ClosedFormError> {
    let alpha = case.alpha();
    let f = complement(case, k)?;
    Ok(f / g_scaffold(&alpha, k)? * half_integer_correction(&alpha, k))
}

/// `p_alpha(k)` by exact interpolation at `k = 0, 1, 2, ...`, sampling until
/// the divided differences vanish on the witness samples.
pub fn extract_p(case: AlphaCase) -> Result<Poly, ClosedFormError> {
    let mut points: Vec<(Rational, Rational)> = Vec::new();
    for k in 0..MAX_SAMPLES {
        points.push((Rational::from(k), p_sample(case, k)?));
        if let Ok(p) = fit_polynomial(&points) {
            return Ok(p);
        }
    }
    Err(ClosedFormError::StructureViolation(format!(
        "no polynomial of degree below {} fits F/G for alpha = {case}",
        MAX_SAMPLES - 1
    )))
}

/// `p_alpha` from separability probabilities `(k, P_k)` rather than the closed form.
pub fn extract_p_from_values(alpha: &Rational, values: &[(i64, Rational)]) -> Result<Poly, ClosedFormError> {
    let points = values
        .iter()
        .map(|(k, p)| {
            let f = Rational::from(1) - p;
            Ok((Rational::from(*k), f / g_scaffold(alpha, *k)? * half_integer_correction(alpha, *k)))
        })
        .collect::<Result<Vec<_>, ClosedFormError>>()?;
    fit_polynomial(&points)
}

/// Quantities predicted for `p_alpha` by the structural ansatz.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralPrediction {
    #[serde(with = "crate::serde_rational")]
    pub alpha: Rational,
    pub degree: u32,
    #[serde(with = "crate::serde_rational")]
    pub leading_coeff: Rational,
    /// Factor chain `(k+g1)...(k+g2)`; integer `alpha` only.
    pub g1: Option<i64>,
    pub g2: Option<i64>,
    #[serde(with = "crate::serde_rational::option")]
    pub c2: Option<Rational>,
    #[serde(with = "crate::serde_rational::option")]
    pub c2_prime: Option<Rational>,
    /// Absent when `alpha` is a half-integer or divisible by 4.
    #[serde(with = "crate::serde_rational::option")]
    pub c3: Option<Rational>,
    pub irreducible_degree: Option<i64>,
    /// `(base, count)` of the correction `(k + base)_count`.
    #[serde(with = "crate::serde_rational::option_pair")]
    pub half_integer_pochhammer: Option<(Rational, u32)>,
}

pub fn structural_prediction(alpha: &Rational) -> Result<StructuralPrediction, ClosedFormError> {
    if !is_half_integer(alpha) || *alpha < Rational::from((1, 2)) {
        return Err(ClosedFormError::Domain(format!("alpha = {alpha} is not a half-integer >= 1/2")));
    }
    let two_alpha = Rational::from(2 * alpha).numer().to_u32().expect("small alpha");
    let leading_coeff = Rational::from((
        Integer::from(1) << (4 * two_alpha + 1),
        Integer::from(Integer::factorial(two_alpha - 1)),
    ));
    let Some(a) = (*alpha.denom() == 1).then(|| alpha.numer().to_i64().expect("small alpha")) else {
        let degree = Rational::from(5 * alpha) - Rational::from((3, 2));
        return Ok(StructuralPrediction {
            alpha: alpha.clone(),
            degree: degree.numer().to_u32().expect("integer degree"),
            leading_coeff,
            g1: None,
            g2: None,
            c2: None,
            c2_prime: None,
            c3: None,
            irreducible_degree: None,
            half_integer_pochhammer: half_integer_pochhammer(alpha),
        });
    };
    let q = |n: i64, d: i64| Rational::from((n, d));
    let ar = Rational::from(a);
    let g1 = 2 * a + 1 + (a + 1).div_euclid(2);
    let g2 = 3 * a + (a + 1).div_euclid(3);
    let mod4_shift = (a - 1).div_euclid(4) - a.div_euclid(4);
    let c2 = q(-3, 1) + q(3, 2) * &ar + q(17, 2) * Rational::from(ar.square_ref())
        + Rational::from(mod4_shift) * (q(1, 1) + q(5, 2) * &ar);
    let c2_prime = Rational::from((g1 + g2) * (g2 - g1 + 1)) / 2;
    let c3 = (a % 4 != 0).then(|| {
        let mut acc = q(11, 1);
        for (i, c) in [q(-389, 24), q(-333, 16), q(115, 48), q(289, 8)].into_iter().enumerate() {
            acc += c * ar.clone().pow(i as u32 + 1);
        }
        acc
    });
    Ok(StructuralPrediction {
        alpha: alpha.clone(),
        degree: u32::try_from(4 * a - 2).expect("alpha >= 1"),
        leading_coeff,
        g1: Some(g1),
        g2: Some(g2),
        c2: Some(c2),
        c2_prime: Some(c2_prime),
        c3,
        irreducible_degree: Some(3 * a + (a + 1).div_euclid(2) - (a + 1).div_euclid(3) - 2),
        half_integer_pochhammer: None,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub case: AlphaCase,
    pub p: Poly,
    pub prediction: StructuralPrediction,
    pub checks: Vec<StructureCheck>,
}

impl StructureReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&StructureCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Compares `extract_p` against `structural_prediction`.
pub fn verify_structure(case: AlphaCase) -> Result<StructureReport, ClosedFormError> {
    let p = extract_p(case)?;
    let prediction = structural_prediction(&case.alpha())?;
    Ok(StructureReport { checks: structure_checks(&p, &prediction), case, p, prediction })
}

/// Structure checks of an arbitrary polynomial against a prediction.
pub fn structure_checks(p: &Poly, pred: &StructuralPrediction) -> Vec<StructureCheck> {
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(StructureCheck { name: name.to_string(), passed, detail });
    };
    let degree = p.degree().unwrap_or(0);
    push("degree", degree == pred.degree as usize, format!("found {degree}, predicted {}", pred.degree));
    let lead = p.leading();
    push("leading", lead == pred.leading_coeff, format!("found {lead}, predicted {}", pred.leading_coeff));
    let monic = p.monic();
    let second = if degree >= 1 { monic.coeff(degree - 1) } else { Rational::new() };
    if let Some(c2) = &pred.c2 {
        push("c2", second == *c2, format!("found {second}, predicted {c2}"));
    }
    if let (Some(g1), Some(g2)) = (pred.g1, pred.g2) {
        let chain = Poly::from_shifts((g1..=g2).map(Rational::from));
        let (quot, rem) = monic.div_rem(&chain);
        if g1 <= g2 {
            push("chain", rem.is_zero(), format!("(k+{g1})..(k+{g2}) remainder {rem}"));
        } else {
            push("chain", true, format!("empty chain, g1 = {g1} > g2 = {g2}"));
        }
        if let (Some(c2), Some(c2p)) = (&pred.c2, &pred.c2_prime) {
            let target = Rational::from(c2 - c2p);
            let qd = quot.degree().unwrap_or(0);
            let found = if rem.is_zero() && qd >= 1 { quot.coeff(qd - 1) } else { Rational::new() };
            push("reduced_second", rem.is_zero() && found == target, format!("found {found}, predicted {target}"));
        }
        if let Some(irr) = pred.irreducible_degree {
            let qd = quot.degree().unwrap_or(0) as i64;
            push("reduced_degree", rem.is_zero() && qd == irr, format!("found {qd}, predicted {irr}"));
        }
    }
    if let Some(c3) = &pred.c3 {
        let third = if degree >= 2 { monic.coeff(degree - 2) } else { Rational::new() };
        push("c3", third == *c3, format!("found {third}, predicted {c3}"));
    }
    checks
}

/// Default digits for [`log_ratio`].
pub const LOG_RATIO_DIGITS: u32 = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct LogRatio {
    pub k: i64,
    pub value: Float,
    /// Bound on the absolute error from the working precision.
    pub error_bound: Float,
}

/// `log P_{k+1} / log P_k` computed from log-gamma values.
pub fn log_ratio(case: AlphaCase, k: i64, digits: u32) -> Result<LogRatio, ClosedFormError> {
    if k < 1 {
        return Err(ClosedFormError::Domain(format!("log ratio needs k >= 1, got {k}")));
    }
    let formula = case.formula();
    let probe = formula.log_f(k + 1, 64);
    let needed = probe.to_f64().abs().log10().max(0.0).ceil() as u32 + 16;
    if digits < needed {
        return Err(ClosedFormError::Precision { needed, have: digits });
    }
    let prec = digits_to_bits(digits);
    let lf0 = formula.log_f(k, prec);
    let lf1 = formula.log_f(k + 1, prec);
    // log P = log1p(-F)
    let lp0 = (-lf0.clone().exp()).ln_1p();
    let lp1 = (-lf1.clone().exp()).ln_1p();
    let value = Float::with_val(prec, &lp1 / &lp0);
    let eps = Float::with_val(prec, 10).pow(-(digits as i32));
    let scale = Float::with_val(prec, lf0.abs_ref()) + lf1.abs() + 8;
    let error_bound = Float::with_val(prec, value.abs_ref()) * scale * eps;
    Ok(LogRatio { k, value, error_bound })
}
