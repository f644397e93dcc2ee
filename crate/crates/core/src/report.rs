//! Per-mutant analysis and the JSON report written by `mutakill analyze`.
//!
//! Schema (version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "tool_version": "0.1.0",
//!   "timestamp": 1760000000,            // unix seconds; omitted with --no-timestamp
//!   "inputs": [{"role": "predictions", "path": "...", "sha256": "..."}, ...],
//!   "original_model_id": "orig",
//!   "n_inputs": 10000,
//!   "params": {"alpha": 0.05, "beta": 0.2, "tau": 1, "ttest": "student-pooled",
//!              "directional": true, "alternative": "two-sided", "bonferroni": false,
//!              "instance_pair": [0, 0], "all_pairs": false, "definitions": ["KD1", "KDF"]},
//!   "mutants": [{
//!     "model_id": "m1", "instances": 20,
//!     "verdicts": {"KDF": {"killed": true, "p_value": null, "nki": 3,
//!                          "killing_input_ids": ["x1", ...], ...}, ...}
//!   }, ...],
//!   "mutation_scores": {"KD1": 0.5, "KDF": 1.0}
//! }
//! ```
//!
//! Non-finite numbers (separated zero-variance samples) are written as the
//! strings `"inf"` / `"-inf"`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::killdefs::{mutation_score, Definition, KillParams, KillVerdict};
use crate::matrixio::{GroundTruth, PredictionMatrix};
use crate::monotonicity::ModelPair;
use crate::stats::{Alternative, TTestVariant};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// f64 that serializes ±∞ as a string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JsonFloat(pub f64);

impl Serialize for JsonFloat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            x if x.is_finite() => s.serialize_f64(x),
            x if x == f64::INFINITY => s.serialize_str("inf"),
            x if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => s.serialize_str("nan"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsEcho {
    pub alpha: f64,
    pub beta: f64,
    pub tau: u64,
    pub ttest: TTestVariant,
    pub directional: bool,
    pub alternative: Alternative,
    pub bonferroni: bool,
    pub instance_pair: [usize; 2],
    pub all_pairs: bool,
    pub definitions: Vec<Definition>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictReport {
    pub killed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<JsonFloat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub statistic: Option<JsonFloat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub effect_size: Option<JsonFloat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nki: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub killing_input_ids: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_class: Option<BTreeMap<String, bool>>,
    /// KD3: killed classes / total classes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_score: Option<f64>,
    /// KD2–KD4: fraction of index-aligned instance pairs that kill.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_kill_fraction: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MutantReport {
    pub model_id: String,
    pub instances: usize,
    pub verdicts: BTreeMap<Definition, VerdictReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub tool_version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
    pub inputs: Vec<InputDigest>,
    pub original_model_id: String,
    pub n_inputs: usize,
    pub params: ParamsEcho,
    pub mutants: Vec<MutantReport>,
    pub mutation_scores: BTreeMap<Definition, f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOptions {
    pub definitions: Vec<Definition>,
    pub params: KillParams,
    pub pair: (usize, usize),
    pub all_pairs: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            definitions: Definition::ALL.to_vec(),
            params: KillParams::default(),
            pair: (0, 0),
            all_pairs: false,
        }
    }
}

fn to_report(v: &KillVerdict, truth: &GroundTruth) -> VerdictReport {
    VerdictReport {
        killed: v.killed,
        p_value: v.p_value.map(JsonFloat),
        statistic: v.statistic.map(JsonFloat),
        effect_size: v.effect_size.map(JsonFloat),
        nki: v.nki,
        killing_input_ids: v
            .killing_inputs
            .as_ref()
            .map(|cols| cols.iter().map(|&j| truth.input_ids()[j].clone()).collect()),
        class_score: v.class_score(),
        per_class: v.per_class.clone(),
        pair_kill_fraction: None,
    }
}

fn analyze_mutant(
    truth: &GroundTruth,
    orig: &PredictionMatrix,
    mutant: &PredictionMatrix,
    opts: &AnalysisOptions,
) -> Result<(MutantReport, Vec<KillVerdict>)> {
    let pair = ModelPair::from_predictions(truth, orig, mutant)?;
    let n = truth.len();
    let mut verdicts = BTreeMap::new();
    let mut raw = Vec::with_capacity(opts.definitions.len());
    for &def in &opts.definitions {
        let v = pair.verdict_on_prefix(def, n, &opts.params, opts.pair)?;
        let mut rep = to_report(&v, truth);
        if opts.all_pairs && matches!(def, Definition::KD2 | Definition::KD3 | Definition::KD4) {
            let pairs = orig.instance_count().min(mutant.instance_count());
            let mut killed = 0usize;
            for i in 0..pairs {
                if pair.verdict_on_prefix(def, n, &opts.params, (i, i))?.killed {
                    killed += 1;
                }
            }
            rep.pair_kill_fraction = Some(killed as f64 / pairs as f64);
        }
        verdicts.insert(def, rep);
        raw.push(v);
    }
    Ok((
        MutantReport {
            model_id: mutant.model_id().to_string(),
            instances: mutant.instance_count(),
            verdicts,
        },
        raw,
    ))
}

/// Evaluates every requested definition for every mutant against
/// `original_id`. `inputs` and `timestamp` are echoed verbatim.
pub fn analyze(
    truth: &GroundTruth,
    models: &[PredictionMatrix],
    original_id: &str,
    opts: &AnalysisOptions,
    inputs: Vec<InputDigest>,
    timestamp: Option<u64>,
) -> Result<AnalysisReport> {
    opts.params.validate()?;
    if opts.definitions.is_empty() {
        return Err(Error::Param("no kill definitions requested".into()));
    }
    let orig = models
        .iter()
        .find(|m| m.model_id() == original_id)
        .ok_or_else(|| Error::UnknownModel(original_id.to_string()))?;
    let mutants: Vec<&PredictionMatrix> = models
        .iter()
        .filter(|m| m.model_id() != original_id)
        .collect();
    if mutants.is_empty() {
        return Err(Error::Param(format!(
            "no mutants besides the original `{original_id}`"
        )));
    }
    if opts.definitions.contains(&Definition::KD1) {
        for m in std::iter::once(orig).chain(mutants.iter().copied()) {
            if m.instance_count() < 2 {
                return Err(Error::Kd1TooFewInstances {
                    model_id: m.model_id().to_string(),
                    instances: m.instance_count(),
                });
            }
        }
    }

    let results: Vec<(MutantReport, Vec<KillVerdict>)> = mutants
        .par_iter()
        .map(|m| analyze_mutant(truth, orig, m, opts))
        .collect::<Result<_>>()?;

    let mut definitions = opts.definitions.clone();
    definitions.sort();
    definitions.dedup();
    let mut mutation_scores = BTreeMap::new();
    for &def in &definitions {
        let verdicts: Vec<KillVerdict> = results
            .iter()
            .flat_map(|(_, raw)| raw.iter().filter(|v| v.definition == Some(def)).take(1))
            .cloned()
            .collect();
        mutation_scores.insert(def, mutation_score(&verdicts)?);
    }

    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp,
        inputs,
        original_model_id: original_id.to_string(),
        n_inputs: truth.len(),
        params: ParamsEcho {
            alpha: opts.params.alpha,
            beta: opts.params.beta,
            tau: opts.params.tau,
            ttest: opts.params.ttest_variant,
            directional: opts.params.directional,
            alternative: opts.params.alternative,
            bonferroni: opts.params.bonferroni,
            instance_pair: [opts.pair.0, opts.pair.1],
            all_pairs: opts.all_pairs,
            definitions,
        },
        mutants: results.into_iter().map(|(m, _)| m).collect(),
        mutation_scores,
    };
    report.check_scores()?;
    Ok(report)
}

impl AnalysisReport {
    /// Recomputes each mutation score from the per-mutant entries.
    pub fn check_scores(&self) -> Result<()> {
        for (def, &score) in &self.mutation_scores {
            let killed = self
                .mutants
                .iter()
                .filter(|m| m.verdicts.get(def).is_some_and(|v| v.killed))
                .count();
            let expected = killed as f64 / self.mutants.len() as f64;
            if expected != score {
                return Err(Error::Invariant(format!(
                    "{def} mutation score {score} but verdicts give {expected}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Invariant(format!("report serialization: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(id: &str, rows: Vec<Vec<&str>>, ids: &[&str]) -> PredictionMatrix {
        PredictionMatrix::new(
            id,
            (0..rows.len()).map(|i| i.to_string()).collect(),
            ids.iter().map(|s| s.to_string()).collect(),
            rows.into_iter()
                .map(|r| r.into_iter().map(String::from).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_models_score_zero() {
        let ids = ["a", "b", "c"];
        let truth = GroundTruth::new(ids.iter().zip(["1", "2", "3"]).map(|(a, b)| (*a, b))).unwrap();
        let rows = vec![vec!["1", "2", "0"], vec!["1", "0", "3"]];
        let models = vec![model("m1", rows.clone(), &ids), model("orig", rows, &ids)];
        let report = analyze(&truth, &models, "orig", &AnalysisOptions::default(), vec![], None)
            .unwrap();
        assert_eq!(report.mutants.len(), 1);
        for (def, score) in &report.mutation_scores {
            assert_eq!(*score, 0.0, "{def}");
        }
        assert!(report.mutants[0].verdicts.values().all(|v| !v.killed));
    }

    #[test]
    fn unknown_original_and_missing_mutants() {
        let ids = ["a"];
        let truth = GroundTruth::new([("a", "1")]).unwrap();
        let models = vec![model("orig", vec![vec!["1"], vec!["1"]], &ids)];
        let opts = AnalysisOptions::default();
        assert!(matches!(
            analyze(&truth, &models, "nope", &opts, vec![], None),
            Err(Error::UnknownModel(_))
        ));
        assert!(analyze(&truth, &models, "orig", &opts, vec![], None).is_err());
    }

    #[test]
    fn kd1_with_single_instance_is_named() {
        let ids = ["a"];
        let truth = GroundTruth::new([("a", "1")]).unwrap();
        let models = vec![
            model("m", vec![vec!["1"]], &ids),
            model("orig", vec![vec!["1"], vec!["1"]], &ids),
        ];
        assert!(matches!(
            analyze(&truth, &models, "orig", &AnalysisOptions::default(), vec![], None),
            Err(Error::Kd1TooFewInstances { instances: 1, .. })
        ));
    }

    #[test]
    fn json_floats() {
        let v = serde_json::to_string(&[JsonFloat(0.5), JsonFloat(f64::INFINITY), JsonFloat(f64::NEG_INFINITY)])
            .unwrap();
        assert_eq!(v, r#"[0.5,"inf","-inf"]"#);
    }
}
