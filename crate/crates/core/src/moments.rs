//! Exact determinantal moments as terminating hypergeometric sums.
//!
//! Two functionals are covered, both normalised by `<|rho|^k>`:
//!
//! * `PtDet`: `<|rho^PT|^n |rho|^k>`, a terminating 5F4 at unit argument;
//! * `Diff`: `<|rho|^k (|rho^PT| - |rho|)^n>`, a terminating 4F3.
//!
//! For integer `k` the 5F4 has summands where `(-k)_j` and one of the halved
//! denominator parameters vanish together. Those summands are evaluated as the
//! limit `k -> k + eps`: every Pochhammer parameter is stored as an affine
//! function of `k`, and factors that vanish are replaced by their slope.

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rayon::prelude::*;
use rug::{Assign, Rational};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exactnum::{factored_ratio, is_half_integer, pochhammer, ExactError, FactorList};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MomentError {
    #[error("invalid moment parameters: {0}")]
    Domain(String),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("moment n = {n}: {source}")]
    AtIndex {
        n: u32,
        #[source]
        source: Box<MomentError>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variable {
    /// Determinant of the partial transpose.
    #[serde(rename = "pt")]
    PtDet,
    /// Difference `|rho^PT| - |rho|`.
    Diff,
}

impl Variable {
    /// Support interval `[a, b]` of the variable.
    pub fn interval(self) -> (Rational, Rational) {
        match self {
            Variable::PtDet => (Rational::from((-1, 16)), Rational::from((1, 256))),
            Variable::Diff => (Rational::from((-1, 16)), Rational::from((1, 432))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variable::PtDet => "pt",
            Variable::Diff => "diff",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variable {
    type Err = MomentError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pt" | "ptdet" => Ok(Variable::PtDet),
            "diff" => Ok(Variable::Diff),
            other => Err(MomentError::Domain(format!("unknown variable '{other}'"))),
        }
    }
}

/// One moment problem: which variable, the Dyson-type index `alpha` and the
/// induced-measure exponent `k`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Scenario {
    variable: Variable,
    alpha: Rational,
    k: Rational,
}

impl Scenario {
    pub fn new(variable: Variable, alpha: Rational, k: Rational) -> Result<Self, MomentError> {
        check_params(&alpha, &k)?;
        Ok(Scenario { variable, alpha, k })
    }

    pub fn variable(&self) -> Variable {
        self.variable
    }

    pub fn alpha(&self) -> &Rational {
        &self.alpha
    }

    pub fn k(&self) -> &Rational {
        &self.k
    }

    pub fn interval(&self) -> (Rational, Rational) {
        self.variable.interval()
    }

    /// Moment `n` of this scenario.
    pub fn moment(&self, n: u32) -> Result<Rational, MomentError> {
        match self.variable {
            Variable::PtDet => pt_moment(&self.alpha, &self.k, n),
            Variable::Diff => diff_moment(&self.alpha, &self.k, n),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} alpha={} k={}", self.variable, self.alpha, self.k)
    }
}

fn check_params(alpha: &Rational, k: &Rational) -> Result<(), MomentError> {
    if !is_half_integer(alpha) || *alpha < Rational::from((1, 2)) {
        return Err(MomentError::Domain(format!(
            "alpha must be an integer or half-integer >= 1/2, got {alpha}"
        )));
    }
    if !is_half_integer(k) || *k < 0 {
        return Err(MomentError::Domain(format!(
            "k must be a nonnegative integer or half-integer, got {k}"
        )));
    }
    Ok(())
}

/// A Pochhammer parameter `value + slope * (k' - k)`, evaluated at `k' = k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub value: Rational,
    pub slope: Rational,
}

impl Param {
    fn constant(value: Rational) -> Self {
        Param { value, slope: Rational::new() }
    }

    fn affine(value: Rational, slope: Rational) -> Self {
        Param { value, slope }
    }
}

/// `sum_j prod (a)_j / prod (b)_j / j!` at unit argument, truncated after `last`.
#[derive(Debug, Clone)]
pub struct TerminatingSeries {
    pub numer: Vec<Param>,
    pub denom: Vec<Param>,
    pub last: u32,
}

/// Factor lists for one summand.
#[derive(Debug, Clone)]
pub struct Summand {
    pub numer: FactorList,
    pub denom: FactorList,
    /// A parameter without `k` dependence hit zero in the numerator.
    pub hard_zero: bool,
    /// ... or in the denominator.
    pub hard_pole: bool,
}

impl TerminatingSeries {
    /// Builds the factor lists of summand `j`.
    ///
    /// Each `k`-dependent factor `p + i` is written as `slope * ((p + i) / slope)`
    /// so every vanishing factor has unit slope; positional pairing in
    /// `factored_ratio` is then the `k -> k + eps` limit.
    pub fn summand(&self, j: u32) -> Summand {
        let mut s = Summand {
            numer: FactorList::new(),
            denom: FactorList::new(),
            hard_zero: false,
            hard_pole: false,
        };
        for (params, list, hard) in [
            (&self.numer, &mut s.numer, &mut s.hard_zero),
            (&self.denom, &mut s.denom, &mut s.hard_pole),
        ] {
            for p in params {
                for i in 0..j {
                    let v = Rational::from(&p.value + i);
                    if p.slope.is_zero() {
                        *hard |= v.is_zero();
                        list.push(v);
                    } else {
                        list.push(v / &p.slope);
                        list.push(p.slope.clone());
                    }
                }
            }
        }
        for i in 1..=j {
            s.denom.push(Rational::from(i));
        }
        s
    }

    /// Summation through `factored_ratio`, one factor list pair per summand.
    pub fn sum_by_factors(&self) -> Result<Rational, MomentError> {
        let mut total = Rational::new();
        for j in 0..=self.last {
            let s = self.summand(j);
            if s.hard_pole {
                return Err(ExactError::UncancelledPole {
                    numer_zeros: s.numer.zero_count(),
                    denom_zeros: s.denom.zero_count(),
                }
                .into());
            }
            if s.hard_zero {
                continue;
            }
            total += factored_ratio(&s.numer, &s.denom)?;
        }
        Ok(total)
    }

    /// Same sum via consecutive term ratios; `O(last)` big-number operations
    /// instead of `O(last^2)`.
    pub fn sum(&self) -> Result<Rational, MomentError> {
        let mut total = Rational::from(1);
        let mut coeff = Rational::from(1);
        let mut order: i64 = 0;
        let mut ratio = Rational::new();
        for j in 0..self.last {
            ratio.assign(1);
            let mut numer_zeros = 0usize;
            let mut denom_zeros = 0usize;
            for p in &self.numer {
                let v = Rational::from(&p.value + j);
                if v.is_zero() {
                    if p.slope.is_zero() {
                        return Ok(total);
                    }
                    ratio *= &p.slope;
                    numer_zeros += 1;
                } else {
                    ratio *= v;
                }
            }
            for p in &self.denom {
                let v = Rational::from(&p.value + j);
                if v.is_zero() {
                    if p.slope.is_zero() {
                        return Err(ExactError::UncancelledPole { numer_zeros, denom_zeros: 1 }.into());
                    }
                    ratio /= &p.slope;
                    denom_zeros += 1;
                } else {
                    ratio /= v;
                }
            }
            ratio /= j + 1;
            order += numer_zeros as i64 - denom_zeros as i64;
            coeff *= &ratio;
            if order < 0 {
                return Err(ExactError::UncancelledPole { numer_zeros, denom_zeros }.into());
            }
            if order == 0 {
                total += &coeff;
            }
        }
        Ok(total)
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn prod_pochhammer(params: &[Rational], n: u32) -> Rational {
    params.iter().fold(Rational::from(1), |acc, a| acc * pochhammer(a, n))
}

/// Shared denominator `(k+3a+3/2)_n (2k+6a+5/2)_{2n}` of both prefactors.
fn common_denominator(alpha: &Rational, k: &Rational, n: u32) -> Rational {
    let a1 = (k + Rational::from(3 * alpha)) + q(3, 2);
    let a2 = Rational::from(2 * k) + Rational::from(6 * alpha) + q(5, 2);
    pochhammer(&a1, n) * pochhammer(&a2, 2 * n)
}

/// Prefactor and 5F4 of the `|rho^PT|` moment.
pub fn pt_series(alpha: &Rational, k: &Rational, n: u32) -> Result<(Rational, TerminatingSeries), MomentError> {
    check_params(alpha, k)?;
    let kn = Rational::from(k + n);
    let numer = [
        Rational::from(k + 1),
        Rational::from(k + 1) + alpha,
        Rational::from(k + 1) + Rational::from(2 * alpha),
    ];
    let prefactor = prod_pochhammer(&numer, n) / (common_denominator(alpha, k, n) << (6 * n));

    let series = TerminatingSeries {
        numer: vec![
            Param::constant(Rational::from(-i64::from(n))),
            Param::affine(Rational::from(-k), q(-1, 1)),
            Param::constant(alpha.clone()),
            Param::constant(alpha + q(1, 2)),
            Param::affine(
                Rational::from(-2 * k) - 2 * n - 1 - Rational::from(5 * alpha),
                q(-2, 1),
            ),
        ],
        denom: vec![
            Param::affine(Rational::from(-&kn) - alpha, q(-1, 1)),
            Param::affine(Rational::from(-&kn) - Rational::from(2 * alpha), q(-1, 1)),
            Param::affine(Rational::from(-&kn) / 2, q(-1, 2)),
            Param::affine((Rational::from(-&kn) + 1) / 2, q(-1, 2)),
        ],
        last: n,
    };
    Ok((prefactor, series))
}

/// Prefactor and 4F3 of the `|rho^PT| - |rho|` moment.
pub fn diff_series(alpha: &Rational, k: &Rational, n: u32) -> Result<(Rational, TerminatingSeries), MomentError> {
    check_params(alpha, k)?;
    let top: Rational = Rational::from(2 * k) + n + 2 + Rational::from(5 * alpha);
    let numer = [alpha.clone(), (alpha + q(1, 2)), top.clone()];
    let mut prefactor = prod_pochhammer(&numer, n) / (common_denominator(alpha, k, n) << (4 * n));
    if n % 2 == 1 {
        prefactor = -prefactor;
    }
    let series = TerminatingSeries {
        numer: vec![
            Param::constant(q(-i64::from(n), 2)),
            Param::constant(q(1 - i64::from(n), 2)),
            Param::affine(Rational::from(k + 1) + alpha, q(1, 1)),
            Param::affine(Rational::from(k + 1) + Rational::from(2 * alpha), q(1, 1)),
        ],
        denom: vec![
            Param::constant(Rational::from(1 - i64::from(n)) - alpha),
            Param::constant(q(1, 2) - Rational::from(n) - alpha),
            Param::affine(top, q(2, 1)),
        ],
        last: n / 2,
    };
    Ok((prefactor, series))
}

/// `<|rho^PT|^n |rho|^k> / <|rho|^k>`, exactly.
pub fn pt_moment(alpha: &Rational, k: &Rational, n: u32) -> Result<Rational, MomentError> {
    let (pre, series) = pt_series(alpha, k, n)?;
    Ok(pre * series.sum()?)
}

/// `<|rho|^k (|rho^PT| - |rho|)^n> / <|rho|^k>`, exactly.
pub fn diff_moment(alpha: &Rational, k: &Rational, n: u32) -> Result<Rational, MomentError> {
    let (pre, series) = diff_series(alpha, k, n)?;
    Ok(pre * series.sum()?)
}

/// As [`pt_moment`], evaluating every summand through `factored_ratio`.
pub fn pt_moment_by_factors(alpha: &Rational, k: &Rational, n: u32) -> Result<Rational, MomentError> {
    let (pre, series) = pt_series(alpha, k, n)?;
    Ok(pre * series.sum_by_factors()?)
}

/// As [`diff_moment`], evaluating every summand through `factored_ratio`.
pub fn diff_moment_by_factors(alpha: &Rational, k: &Rational, n: u32) -> Result<Rational, MomentError> {
    let (pre, series) = diff_series(alpha, k, n)?;
    Ok(pre * series.sum_by_factors()?)
}

/// Exact moments `mu_0 ..= mu_m` of one scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MomentSequence {
    pub scenario: Scenario,
    pub mu: Vec<Rational>,
}

impl MomentSequence {
    /// Highest available moment index.
    pub fn order(&self) -> usize {
        self.mu.len().saturating_sub(1)
    }

    /// Extends the sequence in place so that `mu_m` is available.
    pub fn extend_to(&mut self, m: u32) -> Result<(), MomentError> {
        let start = self.mu.len() as u32;
        if start > m {
            return Ok(());
        }
        let fresh = compute_range(&self.scenario, start, m)?;
        self.mu.extend(fresh);
        Ok(())
    }
}

fn compute_range(scenario: &Scenario, from: u32, to: u32) -> Result<Vec<Rational>, MomentError> {
    (from..=to)
        .into_par_iter()
        .map(|n| {
            scenario
                .moment(n)
                .map_err(|e| MomentError::AtIndex { n, source: Box::new(e) })
        })
        .collect()
}

/// `mu_0 ..= mu_m` for `scenario`.
pub fn moment_sequence(scenario: &Scenario, m: u32) -> Result<MomentSequence, MomentError> {
    let mut seq = MomentSequence { scenario: scenario.clone(), mu: Vec::new() };
    seq.extend_to(m)?;
    Ok(seq)
}

/// Process-wide memo of computed moment sequences keyed by scenario.
#[derive(Debug, Default)]
pub struct MomentMemo {
    table: Mutex<HashMap<Scenario, Vec<Rational>>>,
}

impl MomentMemo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds the memo, e.g. from a cache file. Longer sequences win.
    pub fn insert(&self, seq: MomentSequence) {
        let mut table = self.table.lock().unwrap();
        let entry = table.entry(seq.scenario).or_default();
        if seq.mu.len() > entry.len() {
            *entry = seq.mu;
        }
    }

    pub fn sequence(&self, scenario: &Scenario, m: u32) -> Result<MomentSequence, MomentError> {
        let known = {
            let table = self.table.lock().unwrap();
            table.get(scenario).cloned().unwrap_or_default()
        };
        let mut seq = MomentSequence { scenario: scenario.clone(), mu: known };
        // the lock is not held while computing; concurrent callers on the same
        // key may duplicate work but `insert` keeps the longest result
        seq.extend_to(m)?;
        self.insert(seq.clone());
        seq.mu.truncate(m as usize + 1);
        Ok(seq)
    }
}
