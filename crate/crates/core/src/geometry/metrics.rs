//! Corner-based Hausdorff measures between boxes and box sets.

use super::obb::OrientedBox;
use super::GeometryError;

/// Directed Hausdorff distance between the corner sets of two boxes:
/// the largest distance from a corner of `a` to its closest corner of `b`.
pub fn box_hausdorff(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let qs = b.corners();
    a.corners()
        .iter()
        .map(|p| qs.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// Mean over boxes of `from` of the smallest directed distance to any box of `to`.
pub fn set_distance(from: &[OrientedBox], to: &[OrientedBox]) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|a| to.iter().map(|b| box_hausdorff(a, b)).fold(f64::INFINITY, f64::min))
        .sum();
    sum / from.len() as f64
}

/// Symmetrized set distance for one prediction / ground-truth pair.
pub fn pair_hausdorff_error(
    prediction: &[OrientedBox],
    ground_truth: &[OrientedBox],
) -> Result<f64, GeometryError> {
    if prediction.is_empty() || ground_truth.is_empty() {
        return Err(GeometryError::EmptyInput("box set"));
    }
    Ok(0.5 * (set_distance(prediction, ground_truth) + set_distance(ground_truth, prediction)))
}

/// Hausdorff error over a collection of flattened structures:
/// `1/(2T) Σ (D(Sᵢ, Gᵢ) + D(Gᵢ, Sᵢ))`.
pub fn structure_hausdorff_error(
    predictions: &[Vec<OrientedBox>],
    ground_truths: &[Vec<OrientedBox>],
) -> Result<f64, GeometryError> {
    if predictions.len() != ground_truths.len() {
        return Err(GeometryError::LengthMismatch {
            left: predictions.len(),
            right: ground_truths.len(),
        });
    }
    if predictions.is_empty() {
        return Err(GeometryError::EmptyInput("structure list"));
    }
    let mut total = 0.0;
    for (p, g) in predictions.iter().zip(ground_truths) {
        total += pair_hausdorff_error(p, g)?;
    }
    Ok(total / predictions.len() as f64)
}

/// Fraction of predicted boxes whose distance to their nearest ground-truth
/// box, divided by that box's diagonal, is below `threshold`. Nearest boxes
/// are chosen independently per prediction (ties go to the lower index).
pub fn thresholded_accuracy(
    prediction: &[OrientedBox],
    ground_truth: &[OrientedBox],
    threshold: f64,
) -> Result<f64, GeometryError> {
    if prediction.is_empty() || ground_truth.is_empty() {
        return Err(GeometryError::EmptyInput("box set"));
    }
    if !(threshold > 0.0) {
        return Err(GeometryError::InvalidThreshold(threshold));
    }
    let mut hits = 0usize;
    for p in prediction {
        let mut best = (f64::INFINITY, 0usize);
        for (j, g) in ground_truth.iter().enumerate() {
            let h = box_hausdorff(p, g);
            if h < best.0 {
                best = (h, j);
            }
        }
        let diag = ground_truth[best.1].diagonal();
        if !(diag > 0.0 && diag.is_finite()) {
            return Err(GeometryError::DegenerateBox(best.1));
        }
        if best.0 / diag < threshold {
            hits += 1;
        }
    }
    Ok(hits as f64 / prediction.len() as f64)
}
