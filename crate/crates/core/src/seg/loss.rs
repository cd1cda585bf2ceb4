use super::{mismatch, sigmoid, SegError};
use crate::geometry::PartMask;

pub const PROB_CLAMP: f64 = 1e-7;
pub const DICE_SMOOTHING: f64 = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct SegLoss {
    pub loss: f64,
    pub bce: f64,
    pub dice: f64,
    /// Gradient of `loss` with respect to the pre-sigmoid logits.
    pub grad: Vec<f64>,
}

/// λ_bce·BCE + λ_dice·DICE for one mask. Probabilities are clamped to
/// [1e-7, 1−1e-7]; the logit gradient uses the clamped values.
pub fn seg_loss(
    probabilities: &[f64],
    gt: &PartMask,
    lambda_bce: f64,
    lambda_dice: f64,
) -> Result<SegLoss, SegError> {
    let m = probabilities.len();
    if let Some(&last) = gt.indices.last() {
        if last >= m {
            return Err(mismatch("ground-truth mask index bound", m, last + 1));
        }
    }
    if m == 0 {
        return Err(mismatch("probability count", 1, 0));
    }
    let target = gt.to_dense(m);
    let p: Vec<f64> = probabilities
        .iter()
        .map(|&x| x.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP))
        .collect();
    let mf = m as f64;
    let bce = -p
        .iter()
        .zip(&target)
        .map(|(&q, &t)| t * q.ln() + (1.0 - t) * (1.0 - q).ln())
        .sum::<f64>()
        / mf;
    let inter: f64 = p.iter().zip(&target).map(|(q, t)| q * t).sum();
    let sum_p: f64 = p.iter().sum();
    let sum_g: f64 = target.iter().sum();
    let denom = sum_p + sum_g + DICE_SMOOTHING;
    let numer = 2.0 * inter + DICE_SMOOTHING;
    let dice = 1.0 - numer / denom;
    let grad = p
        .iter()
        .zip(&target)
        .map(|(&q, &t)| {
            // dBCE/dz simplifies to (q - t)/M through the sigmoid derivative.
            let d_dice = -(2.0 * t * denom - numer) / (denom * denom);
            lambda_bce * (q - t) / mf + lambda_dice * d_dice * q * (1.0 - q)
        })
        .collect();
    Ok(SegLoss {
        loss: lambda_bce * bce + lambda_dice * dice,
        bce,
        dice,
        grad,
    })
}

pub fn seg_loss_from_logits(
    logits: &[f64],
    gt: &PartMask,
    lambda_bce: f64,
    lambda_dice: f64,
) -> Result<SegLoss, SegError> {
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
    seg_loss(&probs, gt, lambda_bce, lambda_dice)
}

/// λ_text·L_text + λ_seg·Σ L_seg.
pub fn total_loss(text_loss: f64, seg_losses: &[f64], lambda_text: f64, lambda_seg: f64) -> f64 {
    lambda_text * text_loss + lambda_seg * seg_losses.iter().sum::<f64>()
}
