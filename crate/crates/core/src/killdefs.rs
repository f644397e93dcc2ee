//! Kill definitions KD1–KD4 and the Fisher-based KDF/NKI criterion, plus
//! mutation scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::matrixio::{check_subset, AccuracySample, CorrectnessMatrix};
use crate::stats::{
    cohens_d, fisher_exact_with, two_sample_ttest, Alternative, ContingencyTable, TTestVariant,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Definition {
    KD1,
    KD2,
    KD3,
    KD4,
    KDF,
}

impl Definition {
    pub const ALL: [Definition; 5] = [
        Definition::KD1,
        Definition::KD2,
        Definition::KD3,
        Definition::KD4,
        Definition::KDF,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Definition::KD1 => "KD1",
            Definition::KD2 => "KD2",
            Definition::KD3 => "KD3",
            Definition::KD4 => "KD4",
            Definition::KDF => "KDF",
        }
    }

    /// KD3 and KD4 compare predicted labels, not just correctness.
    pub fn needs_labels(self) -> bool {
        matches!(self, Definition::KD3 | Definition::KD4)
    }
}

impl fmt::Display for Definition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Definition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Definition::ALL
            .into_iter()
            .find(|d| d.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Param(format!("unknown kill definition `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KillParams {
    pub alpha: f64,
    pub beta: f64,
    pub tau: u64,
    pub directional: bool,
    pub ttest_variant: TTestVariant,
    /// Divide alpha by the number of inputs tested under KDF.
    pub bonferroni: bool,
    pub alternative: Alternative,
}

impl Default for KillParams {
    fn default() -> Self {
        KillParams {
            alpha: 0.05,
            beta: 0.2,
            tau: 1,
            directional: true,
            ttest_variant: TTestVariant::StudentPooled,
            bonferroni: false,
            alternative: Alternative::TwoSided,
        }
    }
}

impl KillParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Param(format!("alpha must be in (0,1), got {}", self.alpha)));
        }
        if !(self.beta >= 0.0) {
            return Err(Error::Param(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.tau < 1 {
            return Err(Error::Param("tau must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KillVerdict {
    pub definition: Option<Definition>,
    pub killed: bool,
    pub p_value: Option<f64>,
    pub effect_size: Option<f64>,
    pub statistic: Option<f64>,
    pub nki: Option<u64>,
    /// Column indices of the killing inputs, in column order.
    pub killing_inputs: Option<Vec<usize>>,
    pub per_class: Option<BTreeMap<String, bool>>,
}

impl KillVerdict {
    fn new(definition: Definition, killed: bool) -> Self {
        KillVerdict {
            definition: Some(definition),
            killed,
            ..Default::default()
        }
    }

    /// Fraction of classes killed (KD3 only).
    pub fn class_score(&self) -> Option<f64> {
        let classes = self.per_class.as_ref()?;
        if classes.is_empty() {
            return Some(0.0);
        }
        Some(classes.values().filter(|&&k| k).count() as f64 / classes.len() as f64)
    }
}

/// KD1: accuracy distributions differ significantly with a large enough
/// effect.
pub fn kd1_killed(
    a_orig: &AccuracySample,
    a_mut: &AccuracySample,
    params: &KillParams,
) -> Result<KillVerdict> {
    let test = two_sample_ttest(a_orig, a_mut, params.ttest_variant)?;
    let d = match test.effect_size {
        Some(d) => d,
        None => cohens_d(a_orig, a_mut)?,
    };
    let killed = test.p_value < params.alpha
        && if params.directional {
            d >= params.beta && a_orig.mean() > a_mut.mean()
        } else {
            d.abs() >= params.beta
        };
    Ok(KillVerdict {
        p_value: Some(test.p_value),
        effect_size: Some(d),
        statistic: test.statistic,
        ..KillVerdict::new(Definition::KD1, killed)
    })
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::Alignment(format!("vectors have lengths {a} and {b}")));
    }
    if a == 0 {
        return Err(Error::Alignment("empty vectors".into()));
    }
    Ok(())
}

fn with_killing(mut v: KillVerdict, killing: Vec<usize>) -> KillVerdict {
    v.nki = Some(killing.len() as u64);
    v.killing_inputs = Some(killing);
    v
}

/// KD2: some input is classified correctly by the original and incorrectly
/// by the mutant.
pub fn kd2_killed(orig_row: &[bool], mut_row: &[bool]) -> Result<KillVerdict> {
    check_lengths(orig_row.len(), mut_row.len())?;
    let killing: Vec<usize> = orig_row
        .iter()
        .zip(mut_row)
        .enumerate()
        .filter(|(_, (&o, &m))| o && !m)
        .map(|(j, _)| j)
        .collect();
    Ok(with_killing(
        KillVerdict::new(Definition::KD2, !killing.is_empty()),
        killing,
    ))
}

/// KD3: per class `C`, some input of true class `C` is labelled `C` by the
/// original and something else by the mutant.
pub fn kd3_killed_class<S: AsRef<str>>(
    orig_preds: &[S],
    mut_preds: &[S],
    truth: &[S],
) -> Result<KillVerdict> {
    check_lengths(orig_preds.len(), mut_preds.len())?;
    check_lengths(orig_preds.len(), truth.len())?;
    let mut per_class: BTreeMap<&str, bool> = BTreeMap::new();
    let mut killing = Vec::new();
    for (j, ((o, m), t)) in orig_preds.iter().zip(mut_preds).zip(truth).enumerate() {
        let (o, m, t) = (o.as_ref().trim(), m.as_ref().trim(), t.as_ref().trim());
        let hit = o == t && m != t;
        *per_class.entry(t).or_insert(false) |= hit;
        if hit {
            killing.push(j);
        }
    }
    let killed = per_class.values().any(|&k| k);
    let mut v = with_killing(KillVerdict::new(Definition::KD3, killed), killing);
    v.per_class = Some(
        per_class
            .into_iter()
            .map(|(c, k)| (c.to_string(), k))
            .collect(),
    );
    Ok(v)
}

/// KD4: the mutant's label differs from the original's on some input.
pub fn kd4_killed<S: AsRef<str>>(orig_preds: &[S], mut_preds: &[S]) -> Result<KillVerdict> {
    check_lengths(orig_preds.len(), mut_preds.len())?;
    let killing: Vec<usize> = orig_preds
        .iter()
        .zip(mut_preds)
        .enumerate()
        .filter(|(_, (o, m))| o.as_ref().trim() != m.as_ref().trim())
        .map(|(j, _)| j)
        .collect();
    Ok(with_killing(
        KillVerdict::new(Definition::KD4, !killing.is_empty()),
        killing,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputKill {
    pub kills: bool,
    pub p_value: f64,
    pub table: ContingencyTable,
}

/// Fisher's exact test on one input's correctness columns.
pub fn kdf_input_kills(orig_col: &[bool], mut_col: &[bool], alpha: f64) -> Result<InputKill> {
    kdf_input_kills_with(orig_col, mut_col, alpha, Alternative::TwoSided)
}

pub fn kdf_input_kills_with(
    orig_col: &[bool],
    mut_col: &[bool],
    alpha: f64,
    alternative: Alternative,
) -> Result<InputKill> {
    let a = orig_col.iter().filter(|&&b| b).count() as u64;
    let c = mut_col.iter().filter(|&&b| b).count() as u64;
    let table = ContingencyTable::new(
        a,
        orig_col.len() as u64 - a,
        c,
        mut_col.len() as u64 - c,
    )?;
    let p_value = fisher_exact_with(&table, alternative).p_value;
    Ok(InputKill {
        kills: p_value < alpha,
        p_value,
        table,
    })
}

fn check_aligned(orig: &CorrectnessMatrix, mutant: &CorrectnessMatrix) -> Result<()> {
    if orig.n_inputs() != mutant.n_inputs() {
        return Err(Error::Alignment(format!(
            "{} has {} inputs, {} has {}",
            orig.model_id(),
            orig.n_inputs(),
            mutant.model_id(),
            mutant.n_inputs()
        )));
    }
    Ok(())
}

/// Per-(a, c) cache of the kill decision; p depends only on the two
/// correct counts.
struct KillCache {
    mut_instances: u64,
    dense: Vec<Option<bool>>,
    sparse: HashMap<(u64, u64), bool>,
}

impl KillCache {
    const DENSE_LIMIT: u64 = 1 << 20;

    fn new(orig_instances: u64, mut_instances: u64) -> Self {
        let cells = (orig_instances + 1).saturating_mul(mut_instances + 1);
        KillCache {
            mut_instances,
            dense: if cells <= Self::DENSE_LIMIT {
                vec![None; cells as usize]
            } else {
                Vec::new()
            },
            sparse: HashMap::new(),
        }
    }

    fn get_or(&mut self, a: u64, c: u64, f: impl FnOnce() -> Result<bool>) -> Result<bool> {
        if self.dense.is_empty() {
            if let Some(&k) = self.sparse.get(&(a, c)) {
                return Ok(k);
            }
            let k = f()?;
            self.sparse.insert((a, c), k);
            return Ok(k);
        }
        let slot = &mut self.dense[(a * (self.mut_instances + 1) + c) as usize];
        match slot {
            Some(k) => Ok(*k),
            None => {
                let k = f()?;
                *slot = Some(k);
                Ok(k)
            }
        }
    }
}

/// Killing inputs among `subset` under Fisher's exact test, from per-column
/// correct counts of each model.
pub fn killing_inputs_from_counts(
    orig_correct: &[u64],
    orig_instances: u64,
    mut_correct: &[u64],
    mut_instances: u64,
    subset: &[usize],
    params: &KillParams,
) -> Result<Vec<usize>> {
    check_subset(subset, orig_correct.len())?;
    let mut killing = killing_over(
        orig_correct,
        orig_instances,
        mut_correct,
        mut_instances,
        subset.iter().copied(),
        subset.len(),
        params,
    )?;
    killing.sort_unstable();
    Ok(killing)
}

/// Killing inputs among the first `len` columns.
pub fn killing_inputs_in_prefix(
    orig_correct: &[u64],
    orig_instances: u64,
    mut_correct: &[u64],
    mut_instances: u64,
    len: usize,
    params: &KillParams,
) -> Result<Vec<usize>> {
    if len == 0 || len > orig_correct.len() {
        return Err(Error::Subset(format!(
            "prefix of {len} inputs invalid for {} inputs",
            orig_correct.len()
        )));
    }
    killing_over(
        orig_correct,
        orig_instances,
        mut_correct,
        mut_instances,
        0..len,
        len,
        params,
    )
}

fn killing_over(
    orig_correct: &[u64],
    orig_instances: u64,
    mut_correct: &[u64],
    mut_instances: u64,
    columns: impl Iterator<Item = usize>,
    tested: usize,
    params: &KillParams,
) -> Result<Vec<usize>> {
    if orig_correct.len() != mut_correct.len() {
        return Err(Error::Alignment(format!(
            "{} and {} columns",
            orig_correct.len(),
            mut_correct.len()
        )));
    }
    let alpha = if params.bonferroni {
        params.alpha / tested as f64
    } else {
        params.alpha
    };
    let mut cache = KillCache::new(orig_instances, mut_instances);
    let mut killing = Vec::new();
    for j in columns {
        let (a, c) = (orig_correct[j], mut_correct[j]);
        let kills = cache.get_or(a, c, || {
            let table = ContingencyTable::new(a, orig_instances - a, c, mut_instances - c)?;
            Ok(fisher_exact_with(&table, params.alternative).p_value < alpha)
        })?;
        if kills {
            killing.push(j);
        }
    }
    Ok(killing)
}

pub fn column_counts(cm: &CorrectnessMatrix) -> Vec<u64> {
    let mut counts = vec![0u64; cm.n_inputs()];
    for i in 0..cm.instance_count() {
        for (c, &b) in counts.iter_mut().zip(cm.row(i)) {
            *c += b as u64;
        }
    }
    counts
}

fn killing_inputs(
    orig: &CorrectnessMatrix,
    mutant: &CorrectnessMatrix,
    subset: &[usize],
    params: &KillParams,
) -> Result<Vec<usize>> {
    check_aligned(orig, mutant)?;
    killing_inputs_from_counts(
        &column_counts(orig),
        orig.instance_count() as u64,
        &column_counts(mutant),
        mutant.instance_count() as u64,
        subset,
        params,
    )
}

/// KDF: the mutant is killed when at least `tau` inputs of `subset` kill it.
pub fn kdf_killed(
    orig: &CorrectnessMatrix,
    mutant: &CorrectnessMatrix,
    subset: &[usize],
    params: &KillParams,
) -> Result<KillVerdict> {
    let killing = killing_inputs(orig, mutant, subset, params)?;
    Ok(kdf_verdict(killing, params.tau))
}

/// KDF verdict from an already computed list of killing inputs.
pub fn kdf_verdict(killing: Vec<usize>, tau: u64) -> KillVerdict {
    let killed = killing.len() as u64 >= tau;
    with_killing(KillVerdict::new(Definition::KDF, killed), killing)
}

/// Number of killing inputs in `subset`.
pub fn nki(
    orig: &CorrectnessMatrix,
    mutant: &CorrectnessMatrix,
    subset: &[usize],
    alpha: f64,
) -> Result<u64> {
    let params = KillParams {
        alpha,
        ..KillParams::default()
    };
    Ok(killing_inputs(orig, mutant, subset, &params)?.len() as u64)
}

/// Proportion of killed mutants. All verdicts must share one definition.
pub fn mutation_score(verdicts: &[KillVerdict]) -> Result<f64> {
    let first = verdicts
        .first()
        .ok_or_else(|| Error::Aggregate("no verdicts".into()))?;
    if verdicts.iter().any(|v| v.definition != first.definition) {
        return Err(Error::Aggregate("verdicts mix kill definitions".into()));
    }
    Ok(verdicts.iter().filter(|v| v.killed).count() as f64 / verdicts.len() as f64)
}
