//! Synthetic correctness matrices.
//!
//! [`generate`] draws cells from per-block correctness probabilities using
//! `ChaCha8Rng::seed_from_u64(seed)` as the single stream: every cell of the
//! original matrix in row-major order, then every cell of the mutant matrix,
//! each cell being `rng.gen::<f64>() < p`.
//!
//! [`adversarial_kd1`] is fully deterministic and is the fixture on which
//! KD1 loses a kill when inputs are added.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrixio::{CorrectnessMatrix, GroundTruth, PredictionMatrix};
use crate::{Error, Result};

pub const ORIGINAL_ID: &str = "original";
pub const MUTANT_ID: &str = "mutant";
/// Appended to the true label to synthesize a wrong prediction.
pub const WRONG_SUFFIX: &str = "_X";
const SYNTH_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub width: usize,
    pub p_orig: f64,
    pub p_mut: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_inputs: usize,
    pub r_orig: usize,
    pub r_mut: usize,
    pub blocks: Vec<Block>,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 || self.r_orig == 0 || self.r_mut == 0 {
            return Err(Error::Param(
                "n_inputs, r_orig and r_mut must be positive".into(),
            ));
        }
        let width: usize = self.blocks.iter().map(|b| b.width).sum();
        if width != self.n_inputs {
            return Err(Error::Param(format!(
                "block widths sum to {width}, expected {}",
                self.n_inputs
            )));
        }
        for b in &self.blocks {
            for p in [b.p_orig, b.p_mut] {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Param(format!("probability {p} outside [0,1]")));
                }
            }
        }
        Ok(())
    }
}

pub fn generate(spec: &ScenarioSpec) -> Result<(CorrectnessMatrix, CorrectnessMatrix)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut draw = |id: &str, r: usize, pick: fn(&Block) -> f64| {
        let rows = (0..r)
            .map(|_| {
                spec.blocks
                    .iter()
                    .flat_map(|b| std::iter::repeat(pick(b)).take(b.width))
                    .map(|p| rng.gen::<f64>() < p)
                    .collect()
            })
            .collect();
        CorrectnessMatrix::from_rows(id, rows)
    };
    let orig = draw(ORIGINAL_ID, spec.r_orig, |b| b.p_orig)?;
    let mutant = draw(MUTANT_ID, spec.r_mut, |b| b.p_mut)?;
    Ok((orig, mutant))
}

/// Mutant instance `i` is wrong on strong column `j` iff `(i + j) mod 5 < 2`.
fn strong_cell_wrong(instance: usize, col: usize) -> bool {
    (instance + col) % 5 < 2
}

/// Noise column `j` (block-local) is correct iff `j mod 20` is below 11 for
/// even instances and below 9 for odd ones: accuracy 0.55 / 0.45, the same
/// for both models.
fn noise_cell_correct(instance: usize, col: usize) -> bool {
    let cut = if instance % 2 == 0 { 11 } else { 9 };
    col % 20 < cut
}

/// A strong block of `k_strong` columns (original always right, every
/// mutant instance wrong on 40% of them) followed by `k_noise` columns that
/// give both models the same alternating per-instance accuracy offsets.
///
/// The strong block alone separates the models perfectly; the noise block
/// leaves the mean gap untouched in absolute count but inflates the spread
/// of instance accuracies until the t-test no longer rejects.
pub fn adversarial_kd1(
    r: usize,
    k_strong: usize,
    k_noise: usize,
) -> Result<(CorrectnessMatrix, CorrectnessMatrix)> {
    if r < 4 || r % 2 != 0 {
        return Err(Error::Param(format!("r must be even and >= 4, got {r}")));
    }
    if k_strong == 0 || k_noise == 0 {
        return Err(Error::Param("k_strong and k_noise must be >= 1".into()));
    }
    let build = |id: &str, mutant: bool| {
        let rows = (0..r)
            .map(|i| {
                let strong = (0..k_strong).map(|j| !(mutant && strong_cell_wrong(i, j)));
                let noise = (0..k_noise).map(|j| noise_cell_correct(i, j));
                strong.chain(noise).collect()
            })
            .collect();
        CorrectnessMatrix::from_rows(id, rows)
    };
    Ok((build(ORIGINAL_ID, false)?, build(MUTANT_ID, true)?))
}

/// Ground truth for synthetic matrices: ids `x00000…`, labels `c0`..`c9`.
pub fn synthetic_truth(n_inputs: usize) -> GroundTruth {
    let width = n_inputs.saturating_sub(1).to_string().len().max(5);
    GroundTruth::new(
        (0..n_inputs).map(|j| (format!("x{j:0width$}"), format!("c{}", j % SYNTH_CLASSES))),
    )
    .expect("synthetic ids are unique and non-empty")
}

/// Labels consistent with `cm`: correct cells get the true label, wrong
/// cells the true label plus [`WRONG_SUFFIX`].
pub fn to_predictions(cm: &CorrectnessMatrix, truth: &GroundTruth) -> Result<PredictionMatrix> {
    if cm.n_inputs() != truth.len() {
        return Err(Error::Alignment(format!(
            "{} columns for {} inputs",
            cm.n_inputs(),
            truth.len()
        )));
    }
    let rows = (0..cm.instance_count())
        .map(|i| {
            cm.row(i)
                .iter()
                .zip(truth.labels())
                .map(|(&ok, label)| {
                    if ok {
                        label.clone()
                    } else {
                        format!("{label}{WRONG_SUFFIX}")
                    }
                })
                .collect()
        })
        .collect();
    PredictionMatrix::new(
        cm.model_id(),
        (0..cm.instance_count()).map(|i| i.to_string()).collect(),
        truth.input_ids().to_vec(),
        rows,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrixio::correctness;

    fn spec(blocks: Vec<Block>, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            n_inputs: blocks.iter().map(|b| b.width).sum(),
            r_orig: 20,
            r_mut: 20,
            blocks,
            seed,
        }
    }

    fn all(cm: &CorrectnessMatrix, v: bool) -> bool {
        (0..cm.instance_count()).all(|i| cm.row(i).iter().all(|&b| b == v))
    }

    #[test]
    fn certain_blocks() {
        for seed in [0, 1, u64::MAX] {
            let (o, m) = generate(&spec(vec![Block { width: 100, p_orig: 1.0, p_mut: 1.0 }], seed))
                .unwrap();
            assert!(all(&o, true) && all(&m, true));
            let (o, m) = generate(&spec(vec![Block { width: 100, p_orig: 0.0, p_mut: 0.0 }], seed))
                .unwrap();
            assert!(all(&o, false) && all(&m, false));
        }
    }

    #[test]
    fn empirical_rates() {
        let (o, m) =
            generate(&spec(vec![Block { width: 1000, p_orig: 0.9, p_mut: 0.6 }], 42)).unwrap();
        let rate = |cm: &CorrectnessMatrix| {
            (0..20).map(|i| cm.row(i).iter().filter(|&&b| b).count()).sum::<usize>() as f64
                / 20_000.0
        };
        assert!((rate(&o) - 0.9).abs() < 0.03);
        assert!((rate(&m) - 0.6).abs() < 0.03);
    }

    #[test]
    fn reproducible() {
        let s = spec(
            vec![
                Block { width: 30, p_orig: 0.7, p_mut: 0.4 },
                Block { width: 20, p_orig: 0.5, p_mut: 0.5 },
            ],
            9,
        );
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = ScenarioSpec { seed: 10, ..s.clone() };
        assert_ne!(generate(&s).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs() {
        let mut s = spec(vec![Block { width: 10, p_orig: 0.5, p_mut: 0.5 }], 0);
        s.n_inputs = 11;
        assert!(generate(&s).is_err());
        let s = spec(vec![Block { width: 10, p_orig: 1.5, p_mut: 0.5 }], 0);
        assert!(generate(&s).is_err());
    }

    #[test]
    fn adversarial_shape() {
        let (o, m) = adversarial_kd1(20, 100, 9900).unwrap();
        assert_eq!((o.instance_count(), o.n_inputs()), (20, 10_000));
        for i in 0..20 {
            assert!(o.row(i)[..100].iter().all(|&b| b));
            assert_eq!(m.row(i)[..100].iter().filter(|&&b| b).count(), 60);
            let noise = o.row(i)[100..].iter().filter(|&&b| b).count();
            assert_eq!(noise, if i % 2 == 0 { 5445 } else { 4455 });
            assert_eq!(o.row(i)[100..], m.row(i)[100..]);
        }
        // each strong column: 8 of 20 mutant instances wrong
        for j in 0..100 {
            assert_eq!(m.column_correct(j), 12);
        }
    }

    #[test]
    fn adversarial_bounds() {
        assert!(adversarial_kd1(3, 10, 10).is_err());
        assert!(adversarial_kd1(2, 10, 10).is_err());
        assert!(adversarial_kd1(4, 0, 10).is_err());
        assert!(adversarial_kd1(4, 10, 0).is_err());
    }

    #[test]
    fn predictions_reproduce_correctness() {
        let (o, _) = adversarial_kd1(4, 5, 7).unwrap();
        let truth = synthetic_truth(12);
        let pm = to_predictions(&o, &truth).unwrap();
        assert_eq!(correctness(&pm, &truth).unwrap(), o);
        assert_eq!(truth.input_ids()[11], "x00011");
    }
}
