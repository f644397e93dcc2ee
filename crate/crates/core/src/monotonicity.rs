//! Kill status over cumulative test-set prefixes.
//!
//! A kill definition is monotone when a test set that kills a mutant keeps
//! killing it as inputs are added. [`audit`] evaluates one definition on the
//! prefixes `[0, s)` for a grid of sizes and records every killed → not
//! killed regression.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::killdefs::{
    column_counts, kd1_killed, kd2_killed, kd3_killed_class, kd4_killed, kdf_verdict,
    killing_inputs_in_prefix, Definition, KillParams, KillVerdict,
};
use crate::matrixio::{accuracy_prefix, correctness, CorrectnessMatrix, GroundTruth, PredictionMatrix};
use crate::{Error, Result};

/// Predicted labels backing a [`ModelPair`], needed by KD3 and KD4.
#[derive(Debug, Clone)]
struct Labels {
    truth: GroundTruth,
    orig: PredictionMatrix,
    mutant: PredictionMatrix,
}

/// An original model and one mutant over the same columns.
#[derive(Debug, Clone)]
pub struct ModelPair {
    orig: CorrectnessMatrix,
    mutant: CorrectnessMatrix,
    orig_counts: Vec<u64>,
    mut_counts: Vec<u64>,
    labels: Option<Labels>,
}

impl ModelPair {
    pub fn from_predictions(
        truth: &GroundTruth,
        orig: &PredictionMatrix,
        mutant: &PredictionMatrix,
    ) -> Result<Self> {
        let mut pair = ModelPair::from_correctness(
            correctness(orig, truth)?,
            correctness(mutant, truth)?,
        )?;
        pair.labels = Some(Labels {
            truth: truth.clone(),
            orig: orig.clone(),
            mutant: mutant.clone(),
        });
        Ok(pair)
    }

    /// Pair without labels; KD3 and KD4 are unavailable.
    pub fn from_correctness(orig: CorrectnessMatrix, mutant: CorrectnessMatrix) -> Result<Self> {
        if orig.n_inputs() != mutant.n_inputs() {
            return Err(Error::Alignment(format!(
                "{} has {} inputs, {} has {}",
                orig.model_id(),
                orig.n_inputs(),
                mutant.model_id(),
                mutant.n_inputs()
            )));
        }
        Ok(ModelPair {
            orig_counts: column_counts(&orig),
            mut_counts: column_counts(&mutant),
            orig,
            mutant,
            labels: None,
        })
    }

    pub fn orig(&self) -> &CorrectnessMatrix {
        &self.orig
    }

    pub fn mutant(&self) -> &CorrectnessMatrix {
        &self.mutant
    }

    pub fn n_inputs(&self) -> usize {
        self.orig.n_inputs()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.is_some()
    }

    /// Columns reordered so that new column `k` is old column `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut pair =
            ModelPair::from_correctness(self.orig.permuted(order)?, self.mutant.permuted(order)?)?;
        pair.labels = match &self.labels {
            Some(l) => Some(Labels {
                truth: l.truth.permuted(order)?,
                orig: l.orig.permuted(order)?,
                mutant: l.mutant.permuted(order)?,
            }),
            None => None,
        };
        Ok(pair)
    }

    /// Column order produced by `--shuffle-seed`.
    pub fn shuffled(&self, seed: u64) -> Result<Self> {
        let mut order: Vec<usize> = (0..self.n_inputs()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        self.permuted(&order)
    }

    /// Verdict of `definition` on the first `len` columns. KD2–KD4 compare
    /// original instance `pair.0` with mutant instance `pair.1`.
    pub fn verdict_on_prefix(
        &self,
        definition: Definition,
        len: usize,
        params: &KillParams,
        pair: (usize, usize),
    ) -> Result<KillVerdict> {
        if len == 0 || len > self.n_inputs() {
            return Err(Error::Subset(format!(
                "prefix size {len} outside 1..={}",
                self.n_inputs()
            )));
        }
        if definition != Definition::KD1 && definition != Definition::KDF {
            check_pair(pair, &self.orig, &self.mutant)?;
        }
        match definition {
            Definition::KD1 => {
                for cm in [&self.orig, &self.mutant] {
                    if cm.instance_count() < 2 {
                        return Err(Error::Kd1TooFewInstances {
                            model_id: cm.model_id().to_string(),
                            instances: cm.instance_count(),
                        });
                    }
                }
                kd1_killed(
                    &accuracy_prefix(&self.orig, len)?,
                    &accuracy_prefix(&self.mutant, len)?,
                    params,
                )
            }
            Definition::KDF => {
                let killing = killing_inputs_in_prefix(
                    &self.orig_counts,
                    self.orig.instance_count() as u64,
                    &self.mut_counts,
                    self.mutant.instance_count() as u64,
                    len,
                    params,
                )?;
                Ok(kdf_verdict(killing, params.tau))
            }
            Definition::KD2 => kd2_killed(
                &self.orig.row(pair.0)[..len],
                &self.mutant.row(pair.1)[..len],
            ),
            Definition::KD3 | Definition::KD4 => {
                let l = self
                    .labels
                    .as_ref()
                    .ok_or_else(|| Error::LabelsRequired(definition.to_string()))?;
                let o = &l.orig.row(pair.0)[..len];
                let m = &l.mutant.row(pair.1)[..len];
                if definition == Definition::KD3 {
                    kd3_killed_class(o, m, &l.truth.labels()[..len])
                } else {
                    kd4_killed(o, m)
                }
            }
        }
    }
}

fn check_pair(
    pair: (usize, usize),
    orig: &CorrectnessMatrix,
    mutant: &CorrectnessMatrix,
) -> Result<()> {
    if pair.0 >= orig.instance_count() || pair.1 >= mutant.instance_count() {
        return Err(Error::Param(format!(
            "instance pair ({}, {}) out of range for {}×{} instances",
            pair.0,
            pair.1,
            orig.instance_count(),
            mutant.instance_count()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditConfig {
    pub start: usize,
    pub step: usize,
    /// Defaults to the number of inputs.
    pub end: Option<usize>,
    pub definition: Definition,
    pub params: KillParams,
    /// Instance pair for KD2–KD4.
    pub pair: (usize, usize),
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            start: 100,
            step: 100,
            end: None,
            definition: Definition::KD1,
            params: KillParams::default(),
            pair: (0, 0),
        }
    }
}

impl AuditConfig {
    /// Prefix sizes `start, start + step, ...` up to `end`; `end` is always
    /// the last size.
    pub fn sizes(&self, n_inputs: usize) -> Result<Vec<usize>> {
        let end = self.end.unwrap_or(n_inputs);
        if self.start == 0 {
            return Err(Error::Param("start must be >= 1".into()));
        }
        if self.step == 0 {
            return Err(Error::Param("step must be >= 1".into()));
        }
        if end > n_inputs {
            return Err(Error::Param(format!(
                "end {end} exceeds the {n_inputs} available inputs"
            )));
        }
        if self.start > end {
            return Err(Error::Param(format!(
                "start {} exceeds end {end} ({n_inputs} inputs)",
                self.start
            )));
        }
        let mut sizes: Vec<usize> = (self.start..=end).step_by(self.step).collect();
        if sizes.last() != Some(&end) {
            sizes.push(end);
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub size_killed: usize,
    pub size_not_killed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditTrace {
    pub definition: Definition,
    pub sizes: Vec<usize>,
    pub killed: Vec<bool>,
    pub p_values: Vec<Option<f64>>,
    pub effect_sizes: Vec<Option<f64>>,
    pub nki: Vec<Option<u64>>,
    /// Consecutive killed → not-killed transitions.
    pub violations: Vec<Violation>,
    /// Number of index pairs `i < j` with `killed[i] && !killed[j]`.
    pub witness_pairs: u64,
}

impl AuditTrace {
    pub fn is_monotone(&self) -> bool {
        is_monotone(&self.killed)
    }

    /// Rows of `size,killed,p_value,effect_size,nki`; missing values are
    /// empty fields.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Io {
            path: "<trace>".into(),
            source: e,
        };
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "size,killed,p_value,effect_size,nki").map_err(io)?;
        for i in 0..self.sizes.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                self.sizes[i],
                self.killed[i],
                fmt_opt_f64(self.p_values[i]),
                fmt_opt_f64(self.effect_sizes[i]),
                self.nki[i].map(|n| n.to_string()).unwrap_or_default()
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn fmt_opt_f64(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(x) if x == f64::INFINITY => "inf".into(),
        Some(x) if x == f64::NEG_INFINITY => "-inf".into(),
        Some(x) => format!("{x:e}"),
    }
}

/// True when the kill sequence never goes from killed back to not killed.
pub fn is_monotone(killed: &[bool]) -> bool {
    let mut seen = false;
    for &k in killed {
        if seen && !k {
            return false;
        }
        seen |= k;
    }
    true
}

fn witness_pairs(killed: &[bool]) -> u64 {
    let mut killed_before = 0u64;
    let mut pairs = 0u64;
    for &k in killed {
        if k {
            killed_before += 1;
        } else {
            pairs += killed_before;
        }
    }
    pairs
}

pub fn audit(pair: &ModelPair, cfg: &AuditConfig) -> Result<AuditTrace> {
    cfg.params.validate()?;
    let sizes = cfg.sizes(pair.n_inputs())?;
    if cfg.definition.needs_labels() && !pair.has_labels() {
        return Err(Error::LabelsRequired(cfg.definition.to_string()));
    }
    let verdicts: Vec<KillVerdict> = sizes
        .par_iter()
        .map(|&s| pair.verdict_on_prefix(cfg.definition, s, &cfg.params, cfg.pair))
        .collect::<Result<_>>()?;

    let killed: Vec<bool> = verdicts.iter().map(|v| v.killed).collect();
    let violations = sizes
        .windows(2)
        .zip(killed.windows(2))
        .filter(|(_, k)| k[0] && !k[1])
        .map(|(s, _)| Violation {
            size_killed: s[0],
            size_not_killed: s[1],
        })
        .collect();
    Ok(AuditTrace {
        definition: cfg.definition,
        witness_pairs: witness_pairs(&killed),
        p_values: verdicts.iter().map(|v| v.p_value).collect(),
        effect_sizes: verdicts.iter().map(|v| v.effect_size).collect(),
        nki: verdicts.iter().map(|v| v.nki).collect(),
        killed,
        violations,
        sizes,
    })
}
