//! Tail probabilities `Pr{X > xi}` from a truncated moment sequence.
//!
//! The density on `[a, b]` is expanded in orthogonal polynomials of
//! `t = c0 + c1 x` (`c0 = -(a+b)/(b-a)`, `c1 = 2/(b-a)`) with weight
//! `(1 - t^2)^alpha_w`. Writing `P_n(c0 + y) = sum_j B[n][j] y^j` the truncated
//! tail becomes a fixed linear functional `sum_i A_i mu_i` of the moments.
//!
//! Two routes are provided:
//!
//! * [`gegenbauer_tail`] uses the derivative identity for the Gegenbauer
//!   weight, `q_n = g_n q_1` with `g_n = P_{n-1}^{lambda+1}(zeta)`;
//! * [`legendre_tail`] is the `alpha_w = 0` case computed from the Legendre
//!   identity `int_zeta^1 P_n = (P_{n-1}(zeta) - P_{n+1}(zeta)) / (2n + 1)`.
//!
//! Both routes share the polynomial row recurrence but not the weights, so
//! agreeing on `alpha_w = 0` is a genuine check.

use std::fmt;

use rug::ops::Pow;
use rug::{Float, Integer, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::moments::{MomentSequence, Scenario};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InversionError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("need moments up to order {needed}, have {available}")]
    LengthMismatch { needed: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    Legendre,
    Gegenbauer(u32),
}

impl Method {
    pub fn alpha_w(self) -> u32 {
        match self {
            Method::Legendre => 0,
            Method::Gegenbauer(a) => a,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Legendre => f.write_str("legendre"),
            Method::Gegenbauer(a) => write!(f, "gegenbauer({a})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NumericMode {
    Exact,
    /// Requested number of correct decimal digits.
    BigFloat(u32),
}

/// Truncation order up to which exact evaluation is the default.
pub const EXACT_DEFAULT_MAX_M: u32 = 500;
/// Default digits for big-float evaluation beyond [`EXACT_DEFAULT_MAX_M`].
pub const DEFAULT_FLOAT_DIGITS: u32 = 300;

impl NumericMode {
    pub fn default_for(m: u32) -> Self {
        if m <= EXACT_DEFAULT_MAX_M {
            NumericMode::Exact
        } else {
            NumericMode::BigFloat(DEFAULT_FLOAT_DIGITS)
        }
    }
}

impl fmt::Display for NumericMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NumericMode::Exact => f.write_str("exact"),
            NumericMode::BigFloat(d) => write!(f, "float({d})"),
        }
    }
}

/// An exact rational or a big float.
#[derive(Debug, Clone, PartialEq)]
pub enum Number {
    Exact(Rational),
    Float(Float),
}

impl Number {
    pub fn to_f64(&self) -> f64 {
        match self {
            Number::Exact(q) => q.to_f64(),
            Number::Float(f) => f.to_f64(),
        }
    }

    pub fn to_float(&self, prec: u32) -> Float {
        match self {
            Number::Exact(q) => Float::with_val(prec, q),
            Number::Float(f) => Float::with_val(prec, f),
        }
    }

    pub fn as_exact(&self) -> Option<&Rational> {
        match self {
            Number::Exact(q) => Some(q),
            Number::Float(_) => None,
        }
    }

    /// Decimal rendering with `digits` significant digits.
    pub fn to_decimal(&self, digits: usize) -> String {
        let prec = digits_to_bits(digits as u32) + 16;
        let f = self.to_float(prec);
        format!("{f:.digits$}")
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Number::Exact(q) => write!(f, "{q}"),
            Number::Float(x) => write!(f, "{x}"),
        }
    }
}

pub(crate) fn digits_to_bits(digits: u32) -> u32 {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as u32
}

/// `c0 = -(a+b)/(b-a)` and `c1 = 2/(b-a)`.
pub fn affine_map(a: &Rational, b: &Rational) -> (Rational, Rational) {
    let width = Rational::from(b - a);
    let c0 = -Rational::from(a + b) / &width;
    let c1 = Rational::from(2) / width;
    (c0, c1)
}

/// Exact tables of the Gegenbauer construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GegenbauerTables {
    pub alpha_w: u32,
    pub m: u32,
    /// `b[n][j]`: coefficient of `y^j` in `P_n(c0 + y)`.
    pub b: Vec<Vec<Rational>>,
    /// `eta[n] = h_n / h_0`.
    pub eta: Vec<Rational>,
    /// `g[n - 1] = P_{n-1}^{lambda+1}(c0)` for `n = 1 ..= m`.
    pub g: Vec<Rational>,
    pub c0: Rational,
    pub c1: Rational,
}

impl GegenbauerTables {
    /// `B[n][j]` with the row index as in the recurrence.
    pub fn b_entry(&self, n: usize, j: usize) -> &Rational {
        &self.b[n][j]
    }

    /// `g_n`, 1-based.
    pub fn g_n(&self, n: usize) -> &Rational {
        &self.g[n - 1]
    }
}

/// Builds the full `B`, `eta`, `g` tables by their recurrences (`g` at `zeta = c0`).
pub fn build_tables(a: &Rational, b: &Rational, alpha_w: u32, m: u32) -> Result<GegenbauerTables, InversionError> {
    if a >= b {
        return Err(InversionError::Argument(format!("empty interval [{a}, {b}]")));
    }
    let (c0, c1) = affine_map(a, b);
    let al = i64::from(alpha_w);
    let mut rows: Vec<Vec<Rational>> = vec![vec![Rational::from(1)]];
    if m >= 1 {
        rows.push(vec![c0.clone(), Rational::from(1)]);
    }
    for n in 2..=i64::from(m) {
        let r = Rational::from((2 * n + 2 * al - 1, n + 2 * al));
        let s = Rational::from((n - 1, n + 2 * al));
        let prev = &rows[n as usize - 1];
        let prev2 = &rows[n as usize - 2];
        let row: Vec<Rational> = (0..=n as usize)
            .map(|j| {
                let mut acc = Rational::new();
                if j < prev.len() {
                    acc += Rational::from(&c0 * &prev[j]);
                }
                if j >= 1 {
                    acc += &prev[j - 1];
                }
                acc *= &r;
                if j < prev2.len() {
                    acc -= Rational::from(&s * &prev2[j]);
                }
                acc
            })
            .collect();
        rows.push(row);
    }
    Ok(GegenbauerTables {
        alpha_w,
        m,
        b: rows,
        eta: eta_table(alpha_w, m),
        g: g_table(alpha_w, &c0, m),
        c0,
        c1,
    })
}

/// `eta_0 = 1`, `eta_n = n(2n+2a-1) / ((2n+2a+1)(n+2a)) eta_{n-1}`.
pub fn eta_table(alpha_w: u32, m: u32) -> Vec<Rational> {
    let al = i64::from(alpha_w);
    let mut eta = Vec::with_capacity(m as usize + 1);
    eta.push(Rational::from(1));
    for n in 1..=i64::from(m) {
        let f = Rational::from((n * (2 * n + 2 * al - 1), (2 * n + 2 * al + 1) * (n + 2 * al)));
        let next = f * &eta[n as usize - 1];
        eta.push(next);
    }
    eta
}

/// `g_1 ..= g_m` at `zeta`: `g_n = P_{n-1}^{lambda+1}(zeta)`.
pub fn g_table(alpha_w: u32, zeta: &Rational, m: u32) -> Vec<Rational> {
    let al = i64::from(alpha_w);
    let mut g: Vec<Rational> = Vec::with_capacity(m as usize);
    for n in 1..=i64::from(m) {
        let v = match n {
            1 => Rational::from(1),
            2 => zeta.clone(),
            _ => {
                let r = Rational::from((2 * n + 2 * al - 1, n + 2 * al + 1));
                let s = Rational::from((n - 2, n + 2 * al + 1));
                r * zeta * &g[n as usize - 2] - s * &g[n as usize - 3]
            }
        };
        g.push(v);
    }
    g
}

/// `int_lo^1 (1 - t^2)^alpha_w dt` by exact polynomial integration.
pub fn weight_integral(alpha_w: u32, lo: &Rational) -> Rational {
    let mut total = Rational::new();
    for r in 0..=alpha_w {
        let binom = Integer::from(Integer::binomial_u(alpha_w, r));
        let e = 2 * r + 1;
        let lo_pow = lo.clone().pow(e as i32);
        let term = (Rational::from(1) - lo_pow) * binom / e;
        if r % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    total
}

/// Per-order weights `w_n` with tail `= sum_n w_n E[P_n(T)]`.
fn gegenbauer_weights(alpha_w: u32, zeta: &Rational, m: u32) -> Vec<Rational> {
    let h0 = weight_integral(alpha_w, &Rational::from(-1));
    let q0 = weight_integral(alpha_w, zeta);
    let one_minus_sq = Rational::from(1) - Rational::from(zeta.square_ref());
    let q1 = one_minus_sq.pow(alpha_w as i32 + 1) / (2 * (alpha_w + 1));
    let scale = q1 / &h0;
    let eta = eta_table(alpha_w, m);
    let g = g_table(alpha_w, zeta, m);
    let mut w = Vec::with_capacity(m as usize + 1);
    w.push(q0 / h0);
    for n in 1..=m as usize {
        w.push(Rational::from(&scale * &g[n - 1]) / &eta[n]);
    }
    w
}

/// Legendre weights `(P_{n-1}(zeta) - P_{n+1}(zeta)) / 2`, `w_0 = (1 - zeta)/2`.
fn legendre_weights(zeta: &Rational, m: u32) -> Vec<Rational> {
    let mut p: Vec<Rational> = Vec::with_capacity(m as usize + 2);
    p.push(Rational::from(1));
    p.push(zeta.clone());
    for n in 2..=i64::from(m) + 1 {
        let v = (Rational::from(2 * n - 1) * zeta * &p[n as usize - 1]
            - Rational::from(n - 1) * &p[n as usize - 2])
            / n;
        p.push(v);
    }
    let mut w = Vec::with_capacity(m as usize + 1);
    w.push((Rational::from(1) - zeta) / 2);
    for n in 1..=m as usize {
        w.push(Rational::from(&p[n - 1] - &p[n + 1]) / 2);
    }
    w
}

/// Streams the rows of `P_n(c0 + y)` as integer vectors over a common
/// denominator, `B[n] = N[n] / (q^n prod_{i=1}^n (i + 2a))` with `c0 = p/q`.
struct ExactRows {
    alpha_w: i64,
    p: Integer,
    q: Integer,
    prev2: Vec<Integer>,
    prev: Vec<Integer>,
    denom: Integer,
    n: i64,
}

impl ExactRows {
    fn new(alpha_w: u32, c0: &Rational) -> Self {
        ExactRows {
            alpha_w: i64::from(alpha_w),
            p: c0.numer().clone(),
            q: c0.denom().clone(),
            prev2: Vec::new(),
            prev: Vec::new(),
            denom: Integer::from(1),
            n: -1,
        }
    }

    /// Advances to the next row, returning `(numerators, denominator)`.
    fn next_row(&mut self) -> (&[Integer], &Integer) {
        self.n += 1;
        let n = self.n;
        let row = match n {
            0 => vec![Integer::from(1)],
            1 => {
                let f = 1 + 2 * self.alpha_w;
                self.denom = Integer::from(&self.q * f);
                vec![Integer::from(&self.p * f), self.denom.clone()]
            }
            _ => {
                let a = self.alpha_w;
                let r = Integer::from(2 * n + 2 * a - 1);
                let s = Integer::from((n - 1) * (n - 1 + 2 * a)) * Integer::from(self.q.square_ref());
                let mut row = Vec::with_capacity(n as usize + 1);
                for j in 0..=n as usize {
                    let mut acc = Integer::new();
                    if j < self.prev.len() {
                        acc += Integer::from(&self.p * &self.prev[j]);
                    }
                    if j >= 1 {
                        acc += Integer::from(&self.q * &self.prev[j - 1]);
                    }
                    acc *= &r;
                    if j < self.prev2.len() {
                        acc -= Integer::from(&s * &self.prev2[j]);
                    }
                    row.push(acc);
                }
                self.denom *= Integer::from(&self.q * (n + 2 * a));
                row
            }
        };
        self.prev2 = std::mem::replace(&mut self.prev, row);
        (&self.prev, &self.denom)
    }
}

/// `S_i = sum_{n=i}^m w_n B[n][i]` held as `numer / denom`.
fn accumulate_exact(alpha_w: u32, c0: &Rational, weights: &[Rational]) -> Vec<Rational> {
    let m = weights.len() - 1;
    let mut rows = ExactRows::new(alpha_w, c0);
    let mut acc: Vec<Integer> = vec![Integer::new(); m + 1];
    let mut acc_den = Integer::from(1);
    for w in weights {
        let (row, den) = rows.next_row();
        if w.is_zero() {
            continue;
        }
        // w / den as u / v in lowest terms
        let scaled = Rational::from((w.numer().clone(), Integer::from(w.denom() * den)));
        let (u, v) = scaled.into_numer_denom();
        let lcm = Integer::from(acc_den.lcm_ref(&v));
        let grow = Integer::from(&lcm / &acc_den);
        let mul = Integer::from(&lcm / &v) * &u;
        for (i, entry) in acc.iter_mut().enumerate() {
            if grow != 1 {
                *entry *= &grow;
            }
            if i < row.len() {
                *entry += Integer::from(&mul * &row[i]);
            }
        }
        acc_den = lcm;
    }
    acc.into_iter().map(|x| Rational::from((x, acc_den.clone()))).collect()
}

fn accumulate_float(alpha_w: u32, c0: &Rational, weights: &[Rational], prec: u32) -> Vec<Float> {
    let m = weights.len() - 1;
    let al = i64::from(alpha_w);
    let c0f = Float::with_val(prec, c0);
    let mut acc = vec![Float::new(prec); m + 1];
    let mut prev2: Vec<Float> = Vec::new();
    let mut prev: Vec<Float> = Vec::new();
    for (n, w) in weights.iter().enumerate() {
        let n = n as i64;
        let row: Vec<Float> = match n {
            0 => vec![Float::with_val(prec, 1)],
            1 => vec![c0f.clone(), Float::with_val(prec, 1)],
            _ => {
                let r = Float::with_val(prec, Rational::from((2 * n + 2 * al - 1, n + 2 * al)));
                let s = Float::with_val(prec, Rational::from((n - 1, n + 2 * al)));
                (0..=n as usize)
                    .map(|j| {
                        let mut t = Float::new(prec);
                        if j < prev.len() {
                            t += Float::with_val(prec, &c0f * &prev[j]);
                        }
                        if j >= 1 {
                            t += &prev[j - 1];
                        }
                        t *= &r;
                        if j < prev2.len() {
                            t -= Float::with_val(prec, &s * &prev2[j]);
                        }
                        t
                    })
                    .collect()
            }
        };
        let wf = Float::with_val(prec, w);
        for (slot, b) in acc.iter_mut().zip(&row) {
            *slot += Float::with_val(prec, &wf * b);
        }
        prev2 = std::mem::replace(&mut prev, row);
    }
    acc
}

/// Coefficients `A_0 ..= A_m` of the tail functional and its value.
#[derive(Debug, Clone, PartialEq)]
pub struct TailEstimate {
    pub scenario: Scenario,
    pub method: Method,
    pub m: u32,
    pub xi: Rational,
    pub mode: NumericMode,
    pub value: Number,
    pub coeffs: Vec<Number>,
}

fn check_xi(a: &Rational, b: &Rational, xi: &Rational) -> Result<(), InversionError> {
    if a >= b {
        return Err(InversionError::Argument(format!("empty interval [{a}, {b}]")));
    }
    if xi < a || xi > b {
        return Err(InversionError::Argument(format!("xi = {xi} outside [{a}, {b}]")));
    }
    Ok(())
}

fn check_length(moments: &MomentSequence, m: u32) -> Result<(), InversionError> {
    if moments.mu.len() < m as usize + 1 {
        return Err(InversionError::LengthMismatch { needed: m as usize, available: moments.order() });
    }
    Ok(())
}

/// `c0`, `c1` and the per-order weights `w_0 ..= w_m`.
fn prepare(
    a: &Rational,
    b: &Rational,
    method: Method,
    xi: &Rational,
    m: u32,
) -> Result<(Rational, Rational, Vec<Rational>), InversionError> {
    check_xi(a, b, xi)?;
    let (c0, c1) = affine_map(a, b);
    let zeta = Rational::from(&c1 * xi) + &c0;
    let weights = match method {
        Method::Legendre => legendre_weights(&zeta, m),
        Method::Gegenbauer(alpha_w) => gegenbauer_weights(alpha_w, &zeta, m),
    };
    Ok((c0, c1, weights))
}

/// Guard bits added in big-float mode: the monomial expansion cancels roughly
/// `log2(4.5)` bits per order before the sum settles.
fn guard_bits(m: u32) -> u32 {
    64 + (m as f64 * 2.2).ceil() as u32
}

fn coefficients_from_weights(alpha_w: u32, c0: &Rational, c1: &Rational, weights: &[Rational], mode: NumericMode) -> Vec<Number> {
    match mode {
        NumericMode::Exact => {
            let mut c1_pow = Rational::from(1);
            accumulate_exact(alpha_w, c0, weights)
                .into_iter()
                .map(|s| {
                    let a_i = s * &c1_pow;
                    c1_pow *= c1;
                    Number::Exact(a_i)
                })
                .collect()
        }
        NumericMode::BigFloat(digits) => {
            let prec = digits_to_bits(digits) + guard_bits(weights.len() as u32);
            let c1f = Float::with_val(prec, c1);
            let mut c1_pow = Float::with_val(prec, 1);
            accumulate_float(alpha_w, c0, weights, prec)
                .into_iter()
                .map(|s| {
                    let a_i = s * &c1_pow;
                    c1_pow *= &c1f;
                    Number::Float(a_i)
                })
                .collect()
        }
    }
}

/// `A_0 ..= A_m` for the tail functional on `[a, b]`; these depend only on
/// the interval, the method, `xi` and `m`.
pub fn tail_coefficients(
    a: &Rational,
    b: &Rational,
    method: Method,
    xi: &Rational,
    m: u32,
    mode: NumericMode,
) -> Result<Vec<Number>, InversionError> {
    let (c0, c1, weights) = prepare(a, b, method, xi, m)?;
    Ok(coefficients_from_weights(method.alpha_w(), &c0, &c1, &weights, mode))
}

/// `sum_i A_i mu_i`.
pub fn apply_coefficients(coeffs: &[Number], mu: &[Rational]) -> Number {
    match coeffs.first() {
        Some(Number::Float(first)) => {
            let prec = first.prec();
            let mut acc = Float::new(prec);
            for (c, x) in coeffs.iter().zip(mu) {
                acc += Float::with_val(prec, &c.to_float(prec) * x);
            }
            Number::Float(acc)
        }
        _ => {
            let mut acc = Rational::new();
            for (c, x) in coeffs.iter().zip(mu) {
                if let Number::Exact(c) = c {
                    acc += Rational::from(c * x);
                }
            }
            Number::Exact(acc)
        }
    }
}

/// Estimate of `Pr{X > xi}` from `mu_0 ..= mu_m` with either method.
pub fn tail(
    moments: &MomentSequence,
    method: Method,
    xi: &Rational,
    m: u32,
    mode: NumericMode,
) -> Result<TailEstimate, InversionError> {
    let (a, b) = moments.scenario.interval();
    check_xi(&a, &b, xi)?;
    check_length(moments, m)?;
    let coeffs = tail_coefficients(&a, &b, method, xi, m, mode)?;
    let value = apply_coefficients(&coeffs, &moments.mu);
    Ok(TailEstimate {
        scenario: moments.scenario.clone(),
        method,
        m,
        xi: xi.clone(),
        mode,
        value,
        coeffs,
    })
}

/// Truncated Gegenbauer-weight estimate of `Pr{X > xi}` from `mu_0 ..= mu_m`.
pub fn gegenbauer_tail(
    moments: &MomentSequence,
    alpha_w: u32,
    xi: &Rational,
    m: u32,
    mode: NumericMode,
) -> Result<TailEstimate, InversionError> {
    tail(moments, Method::Gegenbauer(alpha_w), xi, m, mode)
}

/// Legendre (uniform base density) estimate of `Pr{X > xi}`.
pub fn legendre_tail(
    moments: &MomentSequence,
    xi: &Rational,
    m: u32,
    mode: NumericMode,
) -> Result<TailEstimate, InversionError> {
    tail(moments, Method::Legendre, xi, m, mode)
}

/// Tail estimates at every order in `m_list` from a single pass over the
/// polynomial rows: `tail(m) = sum_{n <= m} w_n E[P_n(T)]`.
pub fn convergence_profile(
    moments: &MomentSequence,
    method: Method,
    xi: &Rational,
    m_list: &[u32],
    mode: NumericMode,
) -> Result<Vec<(u32, Number)>, InversionError> {
    if m_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(InversionError::Argument("m_list must be strictly increasing".into()));
    }
    let Some(&m_max) = m_list.last() else {
        return Ok(Vec::new());
    };
    let (a, b) = moments.scenario.interval();
    check_xi(&a, &b, xi)?;
    check_length(moments, m_max)?;
    let (c0, c1, weights) = prepare(&a, &b, method, xi, m_max)?;
    let alpha_w = method.alpha_w();
    let mut out = Vec::with_capacity(m_list.len());
    let mut wanted = m_list.iter().peekable();
    match mode {
        NumericMode::Exact => {
            // E[P_n(T)] = sum_j B[n][j] c1^j mu_j
            let scaled: Vec<Rational> = {
                let mut c1_pow = Rational::from(1);
                moments.mu[..=m_max as usize]
                    .iter()
                    .map(|mu| {
                        let v = Rational::from(mu * &c1_pow);
                        c1_pow *= &c1;
                        v
                    })
                    .collect()
            };
            let mut rows = ExactRows::new(alpha_w, &c0);
            let mut total = Rational::new();
            for (n, w) in weights.iter().enumerate() {
                let (row, den) = rows.next_row();
                let mut modified = Rational::new();
                for (b, s) in row.iter().zip(&scaled) {
                    if !b.is_zero() {
                        modified += Rational::from(s * b);
                    }
                }
                modified /= den;
                total += modified * w;
                if wanted.peek().is_some_and(|&&m| m as usize == n) {
                    out.push((n as u32, Number::Exact(total.clone())));
                    wanted.next();
                }
            }
        }
        NumericMode::BigFloat(_) => {
            // independent passes keep the float path simple; cost is dominated
            // by the largest order anyway
            for &m in m_list {
                let coeffs = coefficients_from_weights(alpha_w, &c0, &c1, &weights[..=m as usize], mode);
                out.push((m, apply_coefficients(&coeffs, &moments.mu)));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::{moment_sequence, Variable};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    fn seq(variable: Variable, alpha: Rational, k: Rational, m: u32) -> MomentSequence {
        moment_sequence(&Scenario::new(variable, alpha, k).unwrap(), m).unwrap()
    }

    #[test]
    fn affine_constants() {
        let (a, b) = Variable::Diff.interval();
        assert_eq!(affine_map(&a, &b), (q(13, 14), q(216, 7)));
        let (a, b) = Variable::PtDet.interval();
        assert_eq!(affine_map(&a, &b), (q(15, 17), q(512, 17)));
    }

    #[test]
    fn table_bases() {
        let t = build_tables(&q(-1, 16), &q(1, 256), 2, 1).unwrap();
        assert_eq!(t.b, vec![vec![q(1, 1)], vec![t.c0.clone(), q(1, 1)]]);
        assert_eq!(t.eta[0], 1);
        let t = build_tables(&q(-1, 16), &q(1, 432), 3, 6).unwrap();
        assert_eq!(*t.g_n(1), 1);
        assert_eq!(*t.g_n(2), t.c0);
        for n in 1..=6usize {
            let a = 3i64;
            let n_ = n as i64;
            let f = q(n_ * (2 * n_ + 2 * a - 1), (2 * n_ + 2 * a + 1) * (n_ + 2 * a));
            assert_eq!(t.eta[n], f * &t.eta[n - 1]);
        }
        assert!(build_tables(&q(1, 1), &q(0, 1), 0, 3).is_err());
    }

    #[test]
    fn eta_matches_structure_constants() {
        // h_n = int (1-t^2)^a P_n(t)^2, with P_n(1) = 1; check n = 1, 2 for a = 0, 1, 2
        for a in 0..=2u32 {
            let h0 = weight_integral(a, &q(-1, 1));
            let eta = eta_table(a, 2);
            // P_1 = t: int (1-t^2)^a t^2 dt
            let h1 = integrate_poly_weighted(a, &[q(0, 1), q(0, 1), q(1, 1)]);
            assert_eq!(h1, Rational::from(&h0 * &eta[1]));
            // P_2 = ((2a+3) t^2 - 1) / (2a+2)
            let c2 = q(2 * a as i64 + 3, 2 * a as i64 + 2);
            let c0 = q(-1, 2 * a as i64 + 2);
            let sq = [
                Rational::from(c0.square_ref()),
                q(0, 1),
                (2 * Rational::from(&c0 * &c2)),
                q(0, 1),
                Rational::from(c2.square_ref()),
            ];
            let h2 = integrate_poly_weighted(a, &sq);
            assert_eq!(h2, h0 * &eta[2]);
        }
    }

    /// int_{-1}^1 (1-t^2)^a sum c_i t^i dt, by expanding the weight.
    fn integrate_poly_weighted(a: u32, coeffs: &[Rational]) -> Rational {
        let mut total = Rational::new();
        for r in 0..=a {
            let binom = Integer::from(Integer::binomial_u(a, r));
            for (i, c) in coeffs.iter().enumerate() {
                let e = i as u32 + 2 * r;
                if e % 2 == 1 {
                    continue;
                }
                let term = Rational::from(c * &binom) * q(2, e as i64 + 1);
                if r % 2 == 0 {
                    total += term;
                } else {
                    total -= term;
                }
            }
        }
        total
    }

    #[test]
    fn streamed_rows_match_tables() {
        for a in [0u32, 1, 2] {
            let t = build_tables(&q(-1, 16), &q(1, 432), a, 25).unwrap();
            let mut rows = ExactRows::new(a, &t.c0);
            for n in 0..=25usize {
                let (row, den) = rows.next_row();
                let got: Vec<Rational> = row.iter().map(|x| Rational::from((x.clone(), den.clone()))).collect();
                assert_eq!(got, t.b[n], "alpha_w = {a}, n = {n}");
            }
        }
    }

    #[test]
    fn uniform_baseline() {
        let s = seq(Variable::PtDet, q(1, 1), q(0, 1), 0);
        let t = legendre_tail(&s, &q(0, 1), 0, NumericMode::Exact).unwrap();
        assert_eq!(t.value, Number::Exact(q(1, 17)));
        let g = gegenbauer_tail(&s, 0, &q(0, 1), 0, NumericMode::Exact).unwrap();
        assert_eq!(g.value, Number::Exact(q(1, 17)));
    }

    #[test]
    fn endpoints_are_exact() {
        let s = seq(Variable::Diff, q(1, 1), q(1, 1), 20);
        let (a, b) = s.scenario.interval();
        for m in [0, 1, 5, 20] {
            for method in [Method::Legendre, Method::Gegenbauer(0), Method::Gegenbauer(2)] {
                let lo = tail(&s, method, &a, m, NumericMode::Exact).unwrap();
                let hi = tail(&s, method, &b, m, NumericMode::Exact).unwrap();
                assert_eq!(lo.value, Number::Exact(q(1, 1)), "{method} m={m}");
                assert_eq!(hi.value, Number::Exact(q(0, 1)), "{method} m={m}");
            }
        }
    }

    #[test]
    fn profile_matches_individual_runs() {
        let s = seq(Variable::PtDet, q(1, 1), q(0, 1), 30);
        let xi = q(0, 1);
        for method in [Method::Legendre, Method::Gegenbauer(1)] {
            let prof = convergence_profile(&s, method, &xi, &[0, 7, 30], NumericMode::Exact).unwrap();
            for (m, v) in prof {
                assert_eq!(v, tail(&s, method, &xi, m, NumericMode::Exact).unwrap().value);
            }
        }
        assert_eq!(
            convergence_profile(&s, Method::Legendre, &xi, &[0], NumericMode::Exact).unwrap(),
            vec![(0, Number::Exact(q(1, 17)))]
        );
        assert!(convergence_profile(&s, Method::Legendre, &xi, &[3, 3], NumericMode::Exact).is_err());
    }

    #[test]
    fn argument_errors() {
        let s = seq(Variable::PtDet, q(1, 1), q(0, 1), 3);
        assert!(matches!(
            legendre_tail(&s, &q(0, 1), 4, NumericMode::Exact),
            Err(InversionError::LengthMismatch { needed: 4, available: 3 })
        ));
        assert!(matches!(
            legendre_tail(&s, &q(1, 2), 2, NumericMode::Exact),
            Err(InversionError::Argument(_))
        ));
    }

    #[test]
    fn float_mode_tracks_exact() {
        let s = seq(Variable::PtDet, q(1, 1), q(0, 1), 60);
        let xi = q(0, 1);
        let exact = legendre_tail(&s, &xi, 60, NumericMode::Exact).unwrap();
        let float = legendre_tail(&s, &xi, 60, NumericMode::BigFloat(50)).unwrap();
        let e = exact.value.to_float(400);
        let f = float.value.to_float(400);
        let rel = Float::with_val(400, (e.clone() - f) / e).abs();
        assert!(rel < Float::with_val(64, 1e-40), "{rel}");
    }
}
