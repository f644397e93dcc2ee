//! Fisher's exact test on 2×2 tables, the two-sample t-test and Cohen's d.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::matrixio::AccuracySample;
use crate::{Error, Result};

/// Relative tolerance when deciding whether a table is "as extreme" as the
/// observed one in the two-sided sum.
pub const TIE_TOLERANCE: f64 = 1e-7;

const LN_FACTORIAL_TABLE: usize = 1 << 16;

fn ln_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACTORIAL_TABLE);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..LN_FACTORIAL_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// ln(n!)
pub fn ln_factorial(n: u64) -> f64 {
    let table = ln_factorial_table();
    match table.get(n as usize) {
        Some(&v) => v,
        None => ln_gamma(n as f64 + 1.0),
    }
}

/// ln C(n, k); `k <= n` is the caller's responsibility.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// 2×2 table of correct/incorrect counts. Row one is the original model,
/// row two the mutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// original, correct
    pub a: u64,
    /// original, incorrect
    pub b: u64,
    /// mutant, correct
    pub c: u64,
    /// mutant, incorrect
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Result<Self> {
        if a + b == 0 || c + d == 0 {
            return Err(Error::Table(format!(
                "({a},{b},{c},{d}): each row needs at least one instance"
            )));
        }
        Ok(ContingencyTable { a, b, c, d })
    }

    pub fn row_totals(&self) -> (u64, u64) {
        (self.a + self.b, self.c + self.d)
    }

    pub fn correct_total(&self) -> u64 {
        self.a + self.c
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Range of `a` over all tables sharing these margins.
    pub fn support(&self) -> std::ops::RangeInclusive<u64> {
        let (r1, r2) = self.row_totals();
        let k = self.correct_total();
        k.saturating_sub(r2)..=r1.min(k)
    }

    /// The table with the same margins and top-left count `a`.
    pub fn with_a(&self, a: u64) -> ContingencyTable {
        let (r1, r2) = self.row_totals();
        let k = self.correct_total();
        let c = k - a;
        ContingencyTable {
            a,
            b: r1 - a,
            c,
            d: r2 - c,
        }
    }

    fn ln_point_prob(&self) -> f64 {
        let (r1, r2) = self.row_totals();
        ln_binomial(r1, self.a) + ln_binomial(r2, self.c)
            - ln_binomial(self.total(), self.correct_total())
    }
}

/// Hypergeometric probability of the table given its margins:
/// C(a+b, a)·C(c+d, c) / C(n, a+c).
pub fn hypergeom_point_prob(t: &ContingencyTable) -> f64 {
    t.ln_point_prob().exp().clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// The original is correct more often than the mutant (`a'` ≥ `a`).
    Greater,
    /// The original is correct less often than the mutant (`a'` ≤ `a`).
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TTestVariant {
    #[default]
    StudentPooled,
    Welch,
}

/// Outcome of a test. `statistic` and `effect_size` are `None` when the test
/// does not produce them; they may be ±∞ for perfectly separated samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub p_value: f64,
    pub statistic: Option<f64>,
    pub effect_size: Option<f64>,
}

pub fn fisher_exact(t: &ContingencyTable) -> TestResult {
    fisher_exact_with(t, Alternative::TwoSided)
}

pub fn fisher_exact_with(t: &ContingencyTable, alternative: Alternative) -> TestResult {
    let observed = t.ln_point_prob();
    let cutoff = observed + TIE_TOLERANCE.ln_1p();
    let p: f64 = t
        .support()
        .filter(|&a| match alternative {
            Alternative::TwoSided => true,
            Alternative::Greater => a >= t.a,
            Alternative::Less => a <= t.a,
        })
        .map(|a| t.with_a(a).ln_point_prob())
        .filter(|&lp| alternative != Alternative::TwoSided || lp <= cutoff)
        .map(f64::exp)
        .sum();
    TestResult {
        p_value: p.clamp(0.0, 1.0),
        statistic: None,
        effect_size: None,
    }
}

/// Size, mean and unbiased variance of a sample. A sample whose values are
/// all identical gets exactly that value as mean and a variance of zero.
#[derive(Debug, Clone, Copy)]
struct Summary {
    n: f64,
    mean: f64,
    var: f64,
}

fn summarize(x: &[f64]) -> Result<Summary> {
    if x.len() < 2 {
        return Err(Error::SampleTooSmall {
            len: x.len(),
            min: 2,
        });
    }
    let n = x.len() as f64;
    if x.iter().all(|&v| v == x[0]) {
        return Ok(Summary {
            n,
            mean: x[0],
            var: 0.0,
        });
    }
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(Summary { n, mean, var })
}

fn separated(diff: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    }
}

/// Two-sided two-sample t-test. The statistic is positive when
/// `mean(x) > mean(y)`.
pub fn two_sample_ttest(
    x: &AccuracySample,
    y: &AccuracySample,
    variant: TTestVariant,
) -> Result<TestResult> {
    let sx = summarize(x.values())?;
    let sy = summarize(y.values())?;
    let diff = sx.mean - sy.mean;
    let (se, df) = match variant {
        TTestVariant::StudentPooled => {
            let df = sx.n + sy.n - 2.0;
            let pooled = ((sx.n - 1.0) * sx.var + (sy.n - 1.0) * sy.var) / df;
            ((pooled * (1.0 / sx.n + 1.0 / sy.n)).sqrt(), df)
        }
        TTestVariant::Welch => {
            let (vx, vy) = (sx.var / sx.n, sy.var / sy.n);
            let df = (vx + vy).powi(2)
                / (vx.powi(2) / (sx.n - 1.0) + vy.powi(2) / (sy.n - 1.0));
            ((vx + vy).sqrt(), df)
        }
    };
    let effect_size = Some(cohens_d_summaries(&sx, &sy));
    if se == 0.0 {
        let statistic = separated(diff);
        return Ok(TestResult {
            p_value: if diff == 0.0 { 1.0 } else { 0.0 },
            statistic: Some(statistic),
            effect_size,
        });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Invariant(format!("t distribution with df={df}: {e}")))?;
    let p = 2.0 * dist.sf(t.abs());
    Ok(TestResult {
        p_value: p.clamp(0.0, 1.0),
        statistic: Some(t),
        effect_size,
    })
}

fn cohens_d_summaries(sx: &Summary, sy: &Summary) -> f64 {
    let diff = sx.mean - sy.mean;
    let pooled = ((sx.n - 1.0) * sx.var + (sy.n - 1.0) * sy.var) / (sx.n + sy.n - 2.0);
    if pooled == 0.0 {
        return separated(diff);
    }
    diff / pooled.sqrt()
}

/// Cohen's d with pooled standard deviation, `mean(x) - mean(y)` in the
/// numerator. Zero-variance samples give 0 when the means agree and ±∞
/// otherwise.
pub fn cohens_d(x: &AccuracySample, y: &AccuracySample) -> Result<f64> {
    Ok(cohens_d_summaries(
        &summarize(x.values())?,
        &summarize(y.values())?,
    ))
}
