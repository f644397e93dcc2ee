//! Reference implementations used as test oracles. Nothing here calls into
//! the crate's statistics code.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

fn binomial(n: u64, k: u64) -> BigInt {
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Exact hypergeometric probability of the table (a, b; c, d).
pub fn exact_point_prob(a: u64, b: u64, c: u64, d: u64) -> BigRational {
    BigRational::new(
        binomial(a + b, a) * binomial(c + d, c),
        binomial(a + b + c + d, a + c),
    )
}

/// Two-sided Fisher p-value by enumerating every table with the observed
/// margins and summing those no more probable than the observed one.
pub fn exact_fisher_two_sided(a: u64, b: u64, c: u64, d: u64) -> f64 {
    let (r1, r2, k) = (a + b, c + d, a + c);
    let observed = exact_point_prob(a, b, c, d);
    let lo = k.saturating_sub(r2);
    let hi = r1.min(k);
    let mut sum = BigRational::zero();
    for x in lo..=hi {
        let p = exact_point_prob(x, r1 - x, k - x, r2 - (k - x));
        if p <= observed {
            sum += p;
        }
    }
    sum.to_f64().unwrap()
}

/// All point probabilities with the margins of (a, b; c, d), as f64.
pub fn exact_support_probs(a: u64, b: u64, c: u64, d: u64) -> Vec<(u64, f64)> {
    let (r1, r2, k) = (a + b, c + d, a + c);
    (k.saturating_sub(r2)..=r1.min(k))
        .map(|x| {
            (
                x,
                exact_point_prob(x, r1 - x, k - x, r2 - (k - x))
                    .to_f64()
                    .unwrap(),
            )
        })
        .collect()
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn reg_inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln())
        .exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability of Student's t with `df` degrees of freedom.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    reg_inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Pooled-variance t statistic and two-sided p.
pub fn pooled_t(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let sp2 = ((nx - 1.0) * var(x) + (ny - 1.0) * var(y)) / (nx + ny - 2.0);
    let t = (mean(x) - mean(y)) / (sp2 * (1.0 / nx + 1.0 / ny)).sqrt();
    (t, t_two_sided_p(t, nx + ny - 2.0))
}

/// Welch t statistic and two-sided p (Welch–Satterthwaite df).
pub fn welch_t(x: &[f64], y: &[f64]) -> (f64, f64) {
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (vx, vy) = (var(x) / nx, var(y) / ny);
    let t = (mean(x) - mean(y)) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2) / (vx * vx / (nx - 1.0) + vy * vy / (ny - 1.0));
    (t, t_two_sided_p(t, df))
}

pub fn cohens_d(x: &[f64], y: &[f64]) -> f64 {
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let sp2 = ((nx - 1.0) * var(x) + (ny - 1.0) * var(y)) / (nx + ny - 2.0);
    (mean(x) - mean(y)) / sp2.sqrt()
}
