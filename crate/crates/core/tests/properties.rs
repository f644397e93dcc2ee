use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use mutakill::killdefs::{
    kd2_killed, kd3_killed_class, kd4_killed, kdf_input_kills, kdf_killed, mutation_score, nki,
    Definition, KillParams, KillVerdict,
};
use mutakill::matrixio::{
    accuracy_sample, correctness, read_predictions, read_truth, write_predictions, write_truth,
    CorrectnessMatrix, GroundTruth, PredictionMatrix,
};
use mutakill::monotonicity::{audit, AuditConfig, ModelPair};
use proptest::prelude::*;

const LABELS: [&str; 3] = ["A", "B", "C"];

#[derive(Debug, Clone)]
struct Scenario {
    truth: GroundTruth,
    orig: PredictionMatrix,
    mutant: PredictionMatrix,
}

fn label_matrix(r: usize, n: usize) -> impl Strategy<Value = Vec<Vec<usize>>> {
    prop::collection::vec(prop::collection::vec(0usize..3, n), r)
}

fn build(id: &str, ids: &[String], rows: Vec<Vec<usize>>) -> PredictionMatrix {
    PredictionMatrix::new(
        id,
        (0..rows.len()).map(|i| i.to_string()).collect(),
        ids.to_vec(),
        rows.into_iter()
            .map(|r| r.into_iter().map(|l| LABELS[l].to_string()).collect())
            .collect(),
    )
    .unwrap()
}

fn scenario(max_r: usize, max_n: usize) -> impl Strategy<Value = Scenario> {
    (2..=max_r, 2..=max_r, 1..=max_n)
        .prop_flat_map(|(ro, rm, n)| {
            (
                prop::collection::vec(0usize..3, n),
                label_matrix(ro, n),
                label_matrix(rm, n),
            )
        })
        .prop_map(|(truth, o, m)| {
            let ids: Vec<String> = (0..truth.len()).map(|j| format!("x{j}")).collect();
            Scenario {
                truth: GroundTruth::new(ids.iter().cloned().zip(truth.iter().map(|&l| LABELS[l])))
                    .unwrap(),
                orig: build("orig", &ids, o),
                mutant: build("mut", &ids, m),
            }
        })
}

fn bool_matrix(r: usize, n: usize) -> impl Strategy<Value = Vec<Vec<bool>>> {
    prop::collection::vec(prop::collection::vec(any::<bool>(), n), r)
}

fn correctness_pair() -> impl Strategy<Value = (CorrectnessMatrix, CorrectnessMatrix)> {
    (2usize..20, 2usize..20, 1usize..60)
        .prop_flat_map(|(ro, rm, n)| (bool_matrix(ro, n), bool_matrix(rm, n)))
        .prop_map(|(o, m)| {
            (
                CorrectnessMatrix::from_rows("orig", o).unwrap(),
                CorrectnessMatrix::from_rows("mut", m).unwrap(),
            )
        })
}

/// Two nested column subsets `small ⊆ large` of `0..n`.
fn nested_subsets(n: usize, keep_large: &[bool], keep_small: &[bool]) -> (Vec<usize>, Vec<usize>) {
    let large: Vec<usize> = (0..n).filter(|&j| keep_large[j] || j == 0).collect();
    let small: Vec<usize> = large
        .iter()
        .copied()
        .filter(|&j| keep_small[j] || j == large[0])
        .collect();
    (small, large)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn predictions_round_trip(s in scenario(5, 12)) {
        let mut pred = Vec::new();
        write_predictions(&mut pred, &[s.mutant.clone(), s.orig.clone()]).unwrap();
        let mut truth = Vec::new();
        write_truth(&mut truth, &s.truth).unwrap();
        let gt = read_truth(truth.as_slice(), Path::new("t")).unwrap();
        let models = read_predictions(pred.as_slice(), Path::new("p"), &gt).unwrap();
        prop_assert_eq!(&gt, &s.truth);
        prop_assert_eq!(models, vec![s.mutant, s.orig]);
    }

    #[test]
    fn accuracy_equals_recount(s in scenario(6, 30)) {
        let cm = correctness(&s.orig, &s.truth).unwrap();
        let all: Vec<usize> = (0..cm.n_inputs()).collect();
        let acc = accuracy_sample(&cm, &all).unwrap();
        for i in 0..cm.instance_count() {
            let hits = s.orig.row(i).iter().zip(s.truth.labels()).filter(|(p, t)| p == t).count();
            prop_assert_eq!(acc.values()[i], hits as f64 / all.len() as f64);
        }
    }

    #[test]
    fn correctness_ignores_label_names(s in scenario(4, 20), perm in Just([2usize, 0, 1])) {
        let rename = |l: &str| format!("k{}", perm[LABELS.iter().position(|&x| x == l).unwrap()]);
        let truth = GroundTruth::new(
            s.truth.input_ids().iter().cloned().zip(s.truth.labels().iter().map(|l| rename(l))),
        ).unwrap();
        let rows = (0..s.orig.instance_count())
            .map(|i| s.orig.row(i).iter().map(|l| rename(l)).collect())
            .collect();
        let renamed = PredictionMatrix::new(
            "orig", s.orig.instance_ids().to_vec(), s.orig.input_ids().to_vec(), rows,
        ).unwrap();
        prop_assert_eq!(correctness(&renamed, &truth).unwrap(), correctness(&s.orig, &s.truth).unwrap());
    }

    #[test]
    fn kdf_and_nki_monotone_under_supersets(
        (o, m) in correctness_pair(),
        keep_large in prop::collection::vec(any::<bool>(), 60),
        keep_small in prop::collection::vec(any::<bool>(), 60),
        tau in 1u64..4,
    ) {
        let (small, large) = nested_subsets(o.n_inputs(), &keep_large, &keep_small);
        let params = KillParams { tau, ..KillParams::default() };
        let vs = kdf_killed(&o, &m, &small, &params).unwrap();
        let vl = kdf_killed(&o, &m, &large, &params).unwrap();
        prop_assert!(vs.nki.unwrap() <= vl.nki.unwrap());
        prop_assert!(!vs.killed || vl.killed);
        prop_assert_eq!(nki(&o, &m, &large, 0.05).unwrap(), kdf_killed(&o, &m, &large, &KillParams::default()).unwrap().nki.unwrap());
        prop_assert_eq!(vs.killed, vs.nki.unwrap() >= tau);
        prop_assert_eq!(vs.killing_inputs.as_ref().unwrap().len() as u64, vs.nki.unwrap());
    }

    #[test]
    fn existential_definitions_monotone(s in scenario(4, 40), cut in 0.0f64..1.0) {
        let n = s.truth.len();
        let k = ((n as f64 * cut) as usize).clamp(1, n);
        let o = correctness(&s.orig, &s.truth).unwrap();
        let m = correctness(&s.mutant, &s.truth).unwrap();
        let short = kd2_killed(&o.row(0)[..k], &m.row(0)[..k]).unwrap();
        let long = kd2_killed(o.row(0), m.row(0)).unwrap();
        prop_assert!(!short.killed || long.killed);
        let short = kd3_killed_class(&s.orig.row(0)[..k], &s.mutant.row(0)[..k], &s.truth.labels()[..k]).unwrap();
        let long = kd3_killed_class(s.orig.row(0), s.mutant.row(0), s.truth.labels()).unwrap();
        prop_assert!(!short.killed || long.killed);
        for (class, killed) in short.per_class.unwrap() {
            prop_assert!(!killed || long.per_class.as_ref().unwrap()[&class]);
        }
        let short = kd4_killed(&s.orig.row(0)[..k], &s.mutant.row(0)[..k]).unwrap();
        let long = kd4_killed(s.orig.row(0), s.mutant.row(0)).unwrap();
        prop_assert!(!short.killed || long.killed);
    }

    #[test]
    fn kd2_killing_inputs_are_kd4_killing_inputs(s in scenario(3, 40)) {
        let o = correctness(&s.orig, &s.truth).unwrap();
        let m = correctness(&s.mutant, &s.truth).unwrap();
        let kd2 = kd2_killed(o.row(0), m.row(0)).unwrap();
        let kd4 = kd4_killed(s.orig.row(0), s.mutant.row(0)).unwrap();
        let kd4_inputs = kd4.killing_inputs.unwrap();
        for j in kd2.killing_inputs.unwrap() {
            prop_assert!(kd4_inputs.contains(&j));
        }
        prop_assert!(!kd2.killed || kd4.killed);
    }

    #[test]
    fn kd3_matches_exhaustive_scan(s in scenario(2, 12)) {
        let v = kd3_killed_class(s.orig.row(0), s.mutant.row(0), s.truth.labels()).unwrap();
        let mut expected: BTreeMap<String, bool> = BTreeMap::new();
        for class in s.truth.labels() {
            let killed = (0..s.truth.len()).any(|t| {
                s.truth.labels()[t] == *class
                    && s.orig.row(0)[t] == *class
                    && s.mutant.row(0)[t] != *class
            });
            expected.insert(class.clone(), killed);
        }
        prop_assert_eq!(v.killed, expected.values().any(|&k| k));
        prop_assert_eq!(v.per_class.unwrap(), expected);
    }

    #[test]
    fn input_kill_depends_only_on_counts(
        o in prop::collection::vec(any::<bool>(), 1..30),
        m in prop::collection::vec(any::<bool>(), 1..30),
        rot in 0usize..30,
    ) {
        let base = kdf_input_kills(&o, &m, 0.05).unwrap();
        let mut o2 = o.clone();
        o2.rotate_left(rot % o.len());
        let mut m2 = m.clone();
        m2.reverse();
        let moved = kdf_input_kills(&o2, &m2, 0.05).unwrap();
        prop_assert_eq!(base, moved);
    }

    #[test]
    fn mutation_score_of_union_is_weighted_mean(
        left in prop::collection::vec(any::<bool>(), 1..20),
        right in prop::collection::vec(any::<bool>(), 1..20),
    ) {
        let verdicts = |ks: &[bool]| -> Vec<KillVerdict> {
            ks.iter().map(|&killed| KillVerdict { definition: Some(Definition::KDF), killed, ..Default::default() }).collect()
        };
        let (l, r) = (verdicts(&left), verdicts(&right));
        let all: Vec<KillVerdict> = l.iter().chain(&r).cloned().collect();
        let weighted = (mutation_score(&l).unwrap() * l.len() as f64
            + mutation_score(&r).unwrap() * r.len() as f64) / all.len() as f64;
        prop_assert!((mutation_score(&all).unwrap() - weighted).abs() < 1e-12);
    }

    #[test]
    fn two_size_audit_matches_direct_verdicts((o, m) in correctness_pair(), a in 1usize..60, b in 1usize..60) {
        let n = o.n_inputs();
        let (start, end) = ((a.min(b) - 1) % n + 1, n);
        prop_assume!(start < end);
        let pair = ModelPair::from_correctness(o.clone(), m.clone()).unwrap();
        for definition in [Definition::KD1, Definition::KDF, Definition::KD2] {
            let cfg = AuditConfig { start, step: end - start, end: Some(end), definition, ..AuditConfig::default() };
            let trace = audit(&pair, &cfg).unwrap();
            prop_assert_eq!(&trace.sizes, &vec![start, end]);
            for (i, &s) in trace.sizes.iter().enumerate() {
                let cols: Vec<usize> = (0..s).collect();
                let direct = match definition {
                    Definition::KD1 => mutakill::killdefs::kd1_killed(
                        &accuracy_sample(&o, &cols).unwrap(),
                        &accuracy_sample(&m, &cols).unwrap(),
                        &KillParams::default(),
                    ).unwrap().killed,
                    Definition::KDF => kdf_killed(&o, &m, &cols, &KillParams::default()).unwrap().killed,
                    _ => kd2_killed(&o.row(0)[..s], &m.row(0)[..s]).unwrap().killed,
                };
                prop_assert_eq!(trace.killed[i], direct);
            }
        }
    }

    #[test]
    fn audits_of_monotone_definitions_never_regress(s in scenario(8, 60), step in 1usize..7) {
        let pair = ModelPair::from_predictions(&s.truth, &s.orig, &s.mutant).unwrap();
        for definition in [Definition::KDF, Definition::KD2, Definition::KD3, Definition::KD4] {
            let cfg = AuditConfig { start: 1, step, definition, ..AuditConfig::default() };
            let trace = audit(&pair, &cfg).unwrap();
            prop_assert!(trace.violations.is_empty());
            prop_assert!(trace.is_monotone());
            prop_assert_eq!(trace.witness_pairs, 0);
            if definition == Definition::KDF {
                let counts: Vec<u64> = trace.nki.iter().map(|n| n.unwrap()).collect();
                prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]));
            }
        }
    }
}

#[test]
fn permuting_instances_keeps_column_tables() {
    let o = CorrectnessMatrix::from_rows(
        "o",
        vec![vec![true, false, true], vec![true, true, false], vec![false, false, true]],
    )
    .unwrap();
    let swapped = CorrectnessMatrix::from_rows(
        "o",
        vec![o.row(2).to_vec(), o.row(0).to_vec(), o.row(1).to_vec()],
    )
    .unwrap();
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for j in 0..3 {
        counts.insert(j, o.column_correct(j));
        assert_eq!(swapped.column_correct(j), counts[&j]);
        assert_eq!(
            kdf_input_kills(&o.column(j), &o.column(j), 0.05).unwrap(),
            kdf_input_kills(&swapped.column(j), &o.column(j), 0.05).unwrap()
        );
    }
}
