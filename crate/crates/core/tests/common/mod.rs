//! Reference implementations shared by the integration tests. They are kept
//! deliberately naive and independent of the library internals.

#![allow(dead_code)]

use rug::Rational;

pub fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

/// `a + s eps`, a factor perturbed through `k -> k + eps`.
#[derive(Clone, Debug)]
struct Lin {
    a: Rational,
    s: Rational,
}

/// Leading term `c eps^ord` of a product of [`Lin`] factors.
#[derive(Clone, Debug)]
struct Lead {
    ord: i64,
    c: Rational,
    vanishes: bool,
}

impl Lead {
    fn one() -> Self {
        Lead { ord: 0, c: q(1, 1), vanishes: false }
    }

    fn mul(&mut self, f: &Lin) {
        if f.a != 0 {
            self.c *= &f.a;
        } else if f.s != 0 {
            self.ord += 1;
            self.c *= &f.s;
        } else {
            self.vanishes = true;
        }
    }

    fn div(&mut self, f: &Lin) {
        if f.a != 0 {
            self.c /= &f.a;
        } else if f.s != 0 {
            self.ord -= 1;
            self.c /= &f.s;
        } else {
            panic!("exact pole in oracle");
        }
    }

    /// `(x)_n` with every unit step as a separate factor.
    fn poch(&mut self, x: &Lin, n: u32, invert: bool) {
        for i in 0..n {
            let f = Lin { a: Rational::from(&x.a + i), s: x.s.clone() };
            if invert {
                self.div(&f)
            } else {
                self.mul(&f)
            }
        }
    }
}

fn lin(a: Rational, s: i64, sd: i64) -> Lin {
    Lin { a, s: q(s, sd) }
}

/// `lim_{eps -> 0} prefactor * sum_j prod (a)_j / prod (b)_j / j!`.
fn evaluate(pre_num: &[(Lin, u32)], pre_den: &[(Lin, u32)], pre_scale: Rational, top: &[Lin], bottom: &[Lin], last: u32) -> Rational {
    let mut pre = Lead::one();
    for (x, n) in pre_num {
        pre.poch(x, *n, false);
    }
    for (x, n) in pre_den {
        pre.poch(x, *n, true);
    }
    assert!(!pre.vanishes && pre.ord == 0, "prefactor degenerates");
    let mut total = q(0, 1);
    for j in 0..=last {
        let mut t = Lead::one();
        for a in top {
            t.poch(a, j, false);
        }
        for b in bottom {
            t.poch(b, j, true);
        }
        t.poch(&lin(q(1, 1), 0, 1), j, true);
        if t.vanishes || t.ord > 0 {
            continue;
        }
        assert!(t.ord == 0, "uncancelled pole at j = {j}");
        total += t.c;
    }
    pre.c * pre_scale * total
}

/// `<|rho^PT|^n |rho|^k> / <|rho|^k>` from the 5F4 representation.
pub fn naive_pt(alpha: &Rational, k: &Rational, n: u32) -> Rational {
    let a = alpha.clone();
    let nn = Rational::from(n);
    let kk = k.clone();
    let pre_num = [
        (lin(Rational::from(&kk + 1), 1, 1), n),
        (lin(Rational::from(&kk + 1) + &a, 1, 1), n),
        (lin(Rational::from(&kk + 1) + Rational::from(2 * &a), 1, 1), n),
    ];
    let pre_den = [
        (lin((&kk + Rational::from(3 * &a)) + q(3, 2), 1, 1), n),
        (lin(Rational::from(2 * &kk) + Rational::from(6 * &a) + q(5, 2), 2, 1), 2 * n),
    ];
    let scale = Rational::from((1, 1)) / Rational::from(rug::Integer::from(1) << (6 * n));
    let top = [
        lin(-nn.clone(), 0, 1),
        lin(-kk.clone(), -1, 1),
        lin(a.clone(), 0, 1),
        lin(&a + q(1, 2), 0, 1),
        lin(-Rational::from(2 * &kk) - Rational::from(2 * &nn) - 1 - Rational::from(5 * &a), -2, 1),
    ];
    let bottom = [
        lin(-Rational::from(&kk + &nn) - &a, -1, 1),
        lin(-Rational::from(&kk + &nn) - Rational::from(2 * &a), -1, 1),
        lin(-Rational::from(&kk + &nn) / 2, -1, 2),
        lin((1 - Rational::from(&kk + &nn)) / 2, -1, 2),
    ];
    evaluate(&pre_num, &pre_den, scale, &top, &bottom, n)
}

/// `<|rho|^k (|rho^PT| - |rho|)^n> / <|rho|^k>` from the 4F3 representation.
pub fn naive_diff(alpha: &Rational, k: &Rational, n: u32) -> Rational {
    let a = alpha.clone();
    let nn = Rational::from(n);
    let kk = k.clone();
    let big: Rational = nn.clone() + Rational::from(2 * &kk) + 2 + Rational::from(5 * &a);
    let pre_num = [
        (lin(a.clone(), 0, 1), n),
        (lin(&a + q(1, 2), 0, 1), n),
        (lin(big.clone(), 2, 1), n),
    ];
    let pre_den = [
        (lin((&kk + Rational::from(3 * &a)) + q(3, 2), 1, 1), n),
        (lin(Rational::from(2 * &kk) + Rational::from(6 * &a) + q(5, 2), 2, 1), 2 * n),
    ];
    let sign = if n.is_multiple_of(2) { 1 } else { -1 };
    let scale = Rational::from(sign) / Rational::from(rug::Integer::from(1) << (4 * n));
    let top = [
        lin(-nn.clone() / 2, 0, 1),
        lin((1 - nn.clone()) / 2, 0, 1),
        lin(Rational::from(&kk + 1) + &a, 1, 1),
        lin(Rational::from(&kk + 1) + Rational::from(2 * &a), 1, 1),
    ];
    let bottom = [
        lin(1 - nn.clone() - &a, 0, 1),
        lin(q(1, 2) - nn.clone() - &a, 0, 1),
        lin(big, 2, 1),
    ];
    evaluate(&pre_num, &pre_den, scale, &top, &bottom, n)
}

/// Closest `p/s` to `x` over all `s <= bound`, with the number of minimisers.
pub fn scan_best(x: &Rational, bound: u32) -> (Rational, Rational, usize) {
    let mut best: Option<(Rational, Rational)> = None;
    let mut ties = 0;
    for s in 1..=bound {
        let p = Rational::from(x * s).round();
        let cand = Rational::from((p.numer().clone(), rug::Integer::from(s)));
        let d = Rational::from(&cand - x).abs();
        match &best {
            Some((_, bd)) if d > *bd => {}
            Some((bv, bd)) if d == *bd => {
                if cand != *bv {
                    ties += 1;
                }
            }
            _ => {
                best = Some((cand, d));
                ties = 1;
            }
        }
    }
    let (v, d) = best.expect("bound >= 1");
    (v, d, ties)
}

/// Distinct reduced fractions with denominator `<= bound` inside `[x - r, x + r]`.
pub fn scan_count(x: &Rational, r: &Rational, bound: u32) -> usize {
    let lo = Rational::from(x - r);
    let hi = Rational::from(x + r);
    let mut count = 0;
    for s in 1..=bound {
        let p_lo = Rational::from(&lo * s).ceil();
        let p_hi = Rational::from(&hi * s).floor();
        let mut p = p_lo.numer().clone();
        while p <= *p_hi.numer() {
            if p.clone().gcd(&rug::Integer::from(s)) == 1 {
                count += 1;
            }
            p += 1;
        }
    }
    count
}
