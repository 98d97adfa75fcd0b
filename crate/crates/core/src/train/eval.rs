use std::fmt::Write as _;

use crate::datagen::Sample;
use crate::geometry::{pair_hausdorff_error, structure_hausdorff_error, thresholded_accuracy, OrientedBox};
use crate::nn::ParamStore;
use crate::structure::{flatten_capped, DEFAULT_MAX_BOXES};

use super::{Model, TrainError};

pub const EVAL_THRESHOLDS: [f64; 2] = [0.2, 0.1];

/// Source of predicted structures.
#[derive(Clone, Copy, Debug)]
pub enum Predictor<'a> {
    /// Predicts each sample's ground truth; a sanity baseline.
    Oracle,
    Model { model: &'a Model, params: &'a ParamStore },
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalRow {
    pub sample: String,
    pub predicted_boxes: usize,
    pub truth_boxes: usize,
    pub hausdorff: f64,
    /// One entry per threshold.
    pub accuracy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub rows: Vec<EvalRow>,
    /// Hausdorff error over the whole set (mean of the per-sample values).
    pub hausdorff: f64,
    /// Mean per-sample accuracy, per threshold.
    pub accuracy: Vec<f64>,
}

impl EvalReport {
    /// Tab-separated rows, one per sample, then a `mean` row.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("sample\tpredicted_boxes\ttruth_boxes\thausdorff");
        for t in &self.thresholds {
            write!(s, "\tacc@{t}").expect("string write");
        }
        s.push('\n');
        let n = self.rows.len().max(1) as f64;
        let mean_pred = self.rows.iter().map(|r| r.predicted_boxes as f64).sum::<f64>() / n;
        let mean_truth = self.rows.iter().map(|r| r.truth_boxes as f64).sum::<f64>() / n;
        for r in &self.rows {
            write!(s, "{}\t{}\t{}\t{}", r.sample, r.predicted_boxes, r.truth_boxes, r.hausdorff).expect("string write");
            for a in &r.accuracy {
                write!(s, "\t{a}").expect("string write");
            }
            s.push('\n');
        }
        write!(s, "mean\t{mean_pred}\t{mean_truth}\t{}", self.hausdorff).expect("string write");
        for a in &self.accuracy {
            write!(s, "\t{a}").expect("string write");
        }
        s.push('\n');
        s
    }
}

fn boxes(tree: &crate::structure::StructureTree) -> Result<Vec<OrientedBox>, TrainError> {
    Ok(flatten_capped(tree, DEFAULT_MAX_BOXES)?.0)
}

/// Decodes every sample, flattens prediction and ground truth, and scores
/// them with the Hausdorff error and thresholded accuracies.
pub fn evaluate(predictor: Predictor, samples: &[Sample], thresholds: &[f64]) -> Result<EvalReport, TrainError> {
    if samples.is_empty() {
        return Err(TrainError::Config("nothing to evaluate".into()));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let (mut preds, mut truths) = (Vec::new(), Vec::new());
    for s in samples {
        let truth = boxes(&s.tree)?;
        let pred = match predictor {
            Predictor::Oracle => truth.clone(),
            Predictor::Model { model, params } => boxes(&model.predict(params, &s.mask)?)?,
        };
        let accuracy = thresholds
            .iter()
            .map(|&t| thresholded_accuracy(&pred, &truth, t))
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| TrainError::Config(e.to_string()))?;
        let hausdorff = pair_hausdorff_error(&pred, &truth).map_err(|e| TrainError::Config(e.to_string()))?;
        rows.push(EvalRow {
            sample: s.entry.sample.clone(),
            predicted_boxes: pred.len(),
            truth_boxes: truth.len(),
            hausdorff,
            accuracy,
        });
        preds.push(pred);
        truths.push(truth);
    }
    let hausdorff = structure_hausdorff_error(&preds, &truths).map_err(|e| TrainError::Config(e.to_string()))?;
    let accuracy = (0..thresholds.len())
        .map(|k| rows.iter().map(|r| r.accuracy[k]).sum::<f64>() / rows.len() as f64)
        .collect();
    Ok(EvalReport { thresholds: thresholds.to_vec(), rows, hausdorff, accuracy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{build_dataset, Dataset, DatasetConfig, Split};
    use crate::rvnn::RvnnConfig;

    fn samples() -> Vec<Sample> {
        let dir = tempfile::tempdir().unwrap();
        build_dataset(&DatasetConfig { shapes: 4, views: 2, seed: 9, ..Default::default() }, dir.path()).unwrap();
        Dataset::open(dir.path()).unwrap().load_split(Split::Test).unwrap()
    }

    #[test]
    fn oracle_is_perfect() {
        let s = samples();
        assert!(!s.is_empty());
        let r = evaluate(Predictor::Oracle, &s, &EVAL_THRESHOLDS).unwrap();
        assert_eq!(r.thresholds, vec![0.2, 0.1]);
        assert_eq!(r.hausdorff, 0.0);
        assert_eq!(r.accuracy, vec![1.0, 1.0]);
        assert!(r.rows.iter().all(|row| row.predicted_boxes == row.truth_boxes));
    }

    #[test]
    fn aggregate_row_is_the_mean_of_emitted_rows() {
        let s = samples();
        let cfg = RvnnConfig { code_dim: 8, hidden: 10, ..Default::default() };
        let params = Model::init(&cfg, 5).unwrap();
        let model = Model::bind(&params, &cfg).unwrap();
        let r = evaluate(Predictor::Model { model: &model, params: &params }, &s, &EVAL_THRESHOLDS).unwrap();
        let text = r.to_tsv();
        let lines: Vec<Vec<&str>> = text.lines().map(|l| l.split('\t').collect()).collect();
        assert_eq!(lines[0], vec!["sample", "predicted_boxes", "truth_boxes", "hausdorff", "acc@0.2", "acc@0.1"]);
        let body = &lines[1..lines.len() - 1];
        let last = lines.last().unwrap();
        assert_eq!(last[0], "mean");
        for col in 1..6 {
            let mean = body.iter().map(|row| row[col].parse::<f64>().unwrap()).sum::<f64>() / body.len() as f64;
            let agg: f64 = last[col].parse().unwrap();
            assert!((mean - agg).abs() < 1e-12, "column {col}: {mean} vs {agg}");
        }
    }
}
