use serde::{Deserialize, Serialize};

use super::hungarian::min_cost_assignment;
use crate::geometry::{GeometryError, PartMask};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskMatch {
    pub pred: String,
    pub gt: String,
    pub iou: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub miou: f64,
    pub count_match: bool,
    pub matches: Vec<MaskMatch>,
}

/// IoU of two sorted index sets. Two empty masks have IoU 0.
pub fn iou(a: &PartMask, b: &PartMask) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.indices.len() && j < b.indices.len() {
        match a.indices[i].cmp(&b.indices[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Hungarian max-IoU matching; mIoU averages over ground-truth parts with
/// unmatched ones scoring 0. With no ground-truth parts, mIoU is 1 when the
/// prediction is also empty and 0 otherwise. `count_match` compares mask
/// counts.
pub fn eval_segmentation(
    pred: &[PartMask],
    gt: &[PartMask],
    n_points: usize,
) -> Result<SegmentationResult, GeometryError> {
    for m in pred.iter().chain(gt) {
        m.check_bounds(n_points)?;
    }
    let count_match = pred.len() == gt.len();
    if gt.is_empty() {
        return Ok(SegmentationResult {
            miou: if pred.is_empty() { 1.0 } else { 0.0 },
            count_match,
            matches: Vec::new(),
        });
    }
    let ious: Vec<Vec<f64>> = pred.iter().map(|p| gt.iter().map(|g| iou(p, g)).collect()).collect();
    let neg: Vec<Vec<f64>> = ious.iter().map(|r| r.iter().map(|x| -x).collect()).collect();
    let pairs = min_cost_assignment(&neg);
    let total: f64 = pairs.iter().map(|&(p, g)| ious[p][g]).sum();
    let matches = pairs
        .iter()
        .map(|&(p, g)| MaskMatch {
            pred: pred[p].part_name.clone(),
            gt: gt[g].part_name.clone(),
            iou: ious[p][g],
        })
        .collect();
    Ok(SegmentationResult {
        miou: total / gt.len() as f64,
        count_match,
        matches,
    })
}
