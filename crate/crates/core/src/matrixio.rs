//! Prediction, ground-truth and correctness matrices, plus their CSV formats.
//!
//! Predictions CSV: `model_id,instance_id,input_id,predicted_label`, one row
//! per cell. Ground-truth CSV: `input_id,true_label`. The order of first
//! appearance in the ground-truth file fixes the column order everywhere.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::{Error, Result};

pub const TRUTH_HEADER: [&str; 2] = ["input_id", "true_label"];
pub const PREDICTIONS_HEADER: [&str; 4] = ["model_id", "instance_id", "input_id", "predicted_label"];

/// True labels of the test inputs, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    input_ids: Vec<String>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl GroundTruth {
    pub fn new<I, S, L>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, L)>,
        S: Into<String>,
        L: Into<String>,
    {
        let mut input_ids = Vec::new();
        let mut labels = Vec::new();
        let mut index = HashMap::new();
        for (id, label) in entries {
            let id = id.into();
            if index.insert(id.clone(), input_ids.len()).is_some() {
                return Err(Error::Alignment(format!("duplicate input_id `{id}`")));
            }
            input_ids.push(id);
            labels.push(label.into());
        }
        if input_ids.is_empty() {
            return Err(Error::Alignment("ground truth has no inputs".into()));
        }
        Ok(GroundTruth {
            input_ids,
            labels,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.input_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input_ids.is_empty()
    }

    pub fn input_ids(&self) -> &[String] {
        &self.input_ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn position(&self, input_id: &str) -> Option<usize> {
        self.index.get(input_id).copied()
    }

    /// Reorders the inputs so that new column `k` is old column `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.len())?;
        GroundTruth::new(
            order
                .iter()
                .map(|&j| (self.input_ids[j].clone(), self.labels[j].clone())),
        )
    }
}

/// Predicted labels of every instance of one model, `instances × inputs`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionMatrix {
    model_id: String,
    instance_ids: Vec<String>,
    input_ids: Vec<String>,
    cells: Vec<String>,
}

impl PredictionMatrix {
    pub fn new(
        model_id: impl Into<String>,
        instance_ids: Vec<String>,
        input_ids: Vec<String>,
        rows: Vec<Vec<String>>,
    ) -> Result<Self> {
        let model_id = model_id.into();
        if rows.is_empty() {
            return Err(Error::Alignment(format!("model {model_id} has no instances")));
        }
        if rows.len() != instance_ids.len() {
            return Err(Error::Alignment(format!(
                "model {model_id}: {} rows but {} instance ids",
                rows.len(),
                instance_ids.len()
            )));
        }
        let n = input_ids.len();
        let mut cells = Vec::with_capacity(rows.len() * n);
        for (row, id) in rows.into_iter().zip(&instance_ids) {
            if row.len() != n {
                return Err(Error::Alignment(format!(
                    "model {model_id}, instance {id}: {} predictions for {n} inputs",
                    row.len()
                )));
            }
            cells.extend(row);
        }
        Ok(PredictionMatrix {
            model_id,
            instance_ids,
            input_ids,
            cells,
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn instance_count(&self) -> usize {
        self.instance_ids.len()
    }

    pub fn instance_ids(&self) -> &[String] {
        &self.instance_ids
    }

    pub fn input_ids(&self) -> &[String] {
        &self.input_ids
    }

    pub fn n_inputs(&self) -> usize {
        self.input_ids.len()
    }

    pub fn row(&self, instance: usize) -> &[String] {
        let n = self.n_inputs();
        &self.cells[instance * n..(instance + 1) * n]
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.n_inputs())?;
        let rows = (0..self.instance_count())
            .map(|i| {
                let row = self.row(i);
                order.iter().map(|&j| row[j].clone()).collect()
            })
            .collect();
        PredictionMatrix::new(
            self.model_id.clone(),
            self.instance_ids.clone(),
            order.iter().map(|&j| self.input_ids[j].clone()).collect(),
            rows,
        )
    }
}

/// `bits[i][j]` is true when instance `i` classified input `j` correctly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectnessMatrix {
    model_id: String,
    instances: usize,
    inputs: usize,
    bits: Vec<bool>,
}

impl CorrectnessMatrix {
    pub fn from_rows(model_id: impl Into<String>, rows: Vec<Vec<bool>>) -> Result<Self> {
        let model_id = model_id.into();
        let instances = rows.len();
        if instances == 0 {
            return Err(Error::Alignment(format!("model {model_id} has no instances")));
        }
        let inputs = rows[0].len();
        if rows.iter().any(|r| r.len() != inputs) {
            return Err(Error::Alignment(format!(
                "model {model_id}: rows have different lengths"
            )));
        }
        Ok(CorrectnessMatrix {
            model_id,
            instances,
            inputs,
            bits: rows.into_iter().flatten().collect(),
        })
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn instance_count(&self) -> usize {
        self.instances
    }

    pub fn n_inputs(&self) -> usize {
        self.inputs
    }

    pub fn get(&self, instance: usize, input: usize) -> bool {
        self.bits[instance * self.inputs + input]
    }

    pub fn row(&self, instance: usize) -> &[bool] {
        &self.bits[instance * self.inputs..(instance + 1) * self.inputs]
    }

    pub fn column(&self, input: usize) -> Vec<bool> {
        (0..self.instances).map(|i| self.get(i, input)).collect()
    }

    /// Number of instances that classified `input` correctly.
    pub fn column_correct(&self, input: usize) -> usize {
        (0..self.instances).filter(|&i| self.get(i, input)).count()
    }

    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        check_permutation(order, self.inputs)?;
        let rows = (0..self.instances)
            .map(|i| {
                let row = self.row(i);
                order.iter().map(|&j| row[j]).collect()
            })
            .collect();
        CorrectnessMatrix::from_rows(self.model_id.clone(), rows)
    }
}

/// Per-instance accuracy over a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracySample(Vec<f64>);

impl AccuracySample {
    pub fn new(values: Vec<f64>) -> Self {
        AccuracySample(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

impl From<Vec<f64>> for AccuracySample {
    fn from(values: Vec<f64>) -> Self {
        AccuracySample(values)
    }
}

pub fn correctness(pm: &PredictionMatrix, gt: &GroundTruth) -> Result<CorrectnessMatrix> {
    if pm.input_ids() != gt.input_ids() {
        return Err(Error::Alignment(format!(
            "model {} columns do not match the ground truth order",
            pm.model_id()
        )));
    }
    let rows = (0..pm.instance_count())
        .map(|i| {
            pm.row(i)
                .iter()
                .zip(gt.labels())
                .map(|(p, t)| p.trim() == t.trim())
                .collect()
        })
        .collect();
    CorrectnessMatrix::from_rows(pm.model_id(), rows)
}

/// Validates a column subset: non-empty, in range, no duplicates.
pub fn check_subset(subset: &[usize], n_inputs: usize) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::Subset("accuracy is undefined on zero inputs".into()));
    }
    let mut seen = vec![false; n_inputs];
    for &j in subset {
        if j >= n_inputs {
            return Err(Error::Subset(format!(
                "column {j} out of range for {n_inputs} inputs"
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::Subset(format!("column {j} listed twice")));
        }
    }
    Ok(())
}

pub fn accuracy_sample(cm: &CorrectnessMatrix, subset: &[usize]) -> Result<AccuracySample> {
    check_subset(subset, cm.n_inputs())?;
    let len = subset.len() as f64;
    Ok(AccuracySample(
        (0..cm.instance_count())
            .map(|i| {
                let row = cm.row(i);
                subset.iter().filter(|&&j| row[j]).count() as f64 / len
            })
            .collect(),
    ))
}

/// Accuracy over the first `len` columns.
pub fn accuracy_prefix(cm: &CorrectnessMatrix, len: usize) -> Result<AccuracySample> {
    if len == 0 || len > cm.n_inputs() {
        return Err(Error::Subset(format!(
            "prefix of {len} inputs invalid for {} inputs",
            cm.n_inputs()
        )));
    }
    Ok(AccuracySample(
        (0..cm.instance_count())
            .map(|i| cm.row(i)[..len].iter().filter(|&&b| b).count() as f64 / len as f64)
            .collect(),
    ))
}

fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::Subset(format!(
            "permutation has {} entries for {n} columns",
            order.len()
        )));
    }
    for &j in order {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return Err(Error::Subset("not a permutation of the columns".into()));
        }
    }
    Ok(())
}

/// Numeric order when both ids are unsigned integers, lexicographic otherwise.
fn instance_order(a: &str, b: &str) -> Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, path: &Path, expected: &[&str]) -> Result<()> {
    let found = rdr.headers().map_err(|e| csv_error(path, e))?;
    if found.iter().ne(expected.iter().copied()) {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            expected: expected.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    Ok(())
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        path: path.to_path_buf(),
        line,
        message: err.to_string(),
    }
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a ground-truth CSV. `path` is used for error context only.
pub fn read_truth<R: Read>(reader: R, path: &Path) -> Result<GroundTruth> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &TRUTH_HEADER)?;
    let mut entries: Vec<(String, String)> = Vec::new();
    let mut seen = HashSet::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let id = rec[0].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateTruthId {
                path: path.to_path_buf(),
                line,
                input_id: id,
            });
        }
        entries.push((id, rec[1].to_string()));
    }
    if entries.is_empty() {
        return Err(Error::EmptyTruth {
            path: path.to_path_buf(),
        });
    }
    GroundTruth::new(entries)
}

/// Reads a predictions CSV against `truth`. Models come back sorted by id;
/// instances are re-indexed densely in id order.
pub fn read_predictions<R: Read>(
    reader: R,
    path: &Path,
    truth: &GroundTruth,
) -> Result<Vec<PredictionMatrix>> {
    let mut rdr = csv_reader(reader);
    check_header(&mut rdr, path, &PREDICTIONS_HEADER)?;
    let n = truth.len();
    let mut models: BTreeMap<String, HashMap<String, Vec<Option<String>>>> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let (model_id, instance_id, input_id, label) = (&rec[0], &rec[1], &rec[2], &rec[3]);
        let col = truth.position(input_id).ok_or_else(|| Error::UnknownInput {
            path: path.to_path_buf(),
            line,
            model_id: model_id.to_string(),
            input_id: input_id.to_string(),
        })?;
        let row = models
            .entry(model_id.to_string())
            .or_default()
            .entry(instance_id.to_string())
            .or_insert_with(|| vec![None; n]);
        if row[col].is_some() {
            return Err(Error::DuplicateCell {
                path: path.to_path_buf(),
                line,
                model_id: model_id.to_string(),
                instance_id: instance_id.to_string(),
                input_id: input_id.to_string(),
            });
        }
        row[col] = Some(label.to_string());
    }
    if models.is_empty() {
        return Err(Error::EmptyPredictions {
            path: path.to_path_buf(),
        });
    }

    let mut out = Vec::with_capacity(models.len());
    for (model_id, instances) in models {
        let mut ids: Vec<String> = instances.keys().cloned().collect();
        ids.sort_by(|a, b| instance_order(a, b));
        let mut instances = instances;
        let mut rows = Vec::with_capacity(ids.len());
        for id in &ids {
            let cells = instances.remove(id).unwrap_or_default();
            let mut row = Vec::with_capacity(n);
            for (col, cell) in cells.into_iter().enumerate() {
                match cell {
                    Some(label) => row.push(label),
                    None => {
                        return Err(Error::RaggedInstance {
                            model_id,
                            instance_id: id.clone(),
                            input_id: truth.input_ids()[col].clone(),
                        })
                    }
                }
            }
            rows.push(row);
        }
        out.push(PredictionMatrix::new(
            model_id,
            ids,
            truth.input_ids().to_vec(),
            rows,
        )?);
    }
    Ok(out)
}

pub fn load_predictions(
    path: impl AsRef<Path>,
    truth_path: impl AsRef<Path>,
) -> Result<(GroundTruth, Vec<PredictionMatrix>)> {
    let (path, truth_path) = (path.as_ref(), truth_path.as_ref());
    let truth = read_truth(open(truth_path)?, truth_path)?;
    let models = read_predictions(open(path)?, path, &truth)?;
    Ok((truth, models))
}

fn write_error(err: csv::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<output>"),
        source: std::io::Error::other(err.to_string()),
    }
}

pub fn write_truth<W: Write>(writer: W, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRUTH_HEADER).map_err(write_error)?;
    for (id, label) in truth.input_ids().iter().zip(truth.labels()) {
        w.write_record([id, label]).map_err(write_error)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}

pub fn write_predictions<W: Write>(writer: W, models: &[PredictionMatrix]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(PREDICTIONS_HEADER).map_err(write_error)?;
    for pm in models {
        for (i, instance_id) in pm.instance_ids().iter().enumerate() {
            for (input_id, label) in pm.input_ids().iter().zip(pm.row(i)) {
                w.write_record([pm.model_id(), instance_id, input_id, label])
                    .map_err(write_error)?;
            }
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: PathBuf::from("<output>"),
        source,
    })
}
