//! `[SEG]`-token segmentation head: query fusion, scaled dot-product point
//! scoring, thresholding, and the BCE + Dice objective.

mod loss;
mod tensor;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::geometry::PartMask;

pub use loss::{seg_loss, seg_loss_from_logits, total_loss, SegLoss, DICE_SMOOTHING, PROB_CLAMP};
pub use tensor::{
    load_features, load_params, load_tokens, save_features, save_params, save_tokens, Tensor,
    TokenFile,
};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SegError {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("tensor file: {0}")]
    Tensor(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn mismatch(what: &str, expected: usize, got: usize) -> SegError {
    SegError::DimensionMismatch {
        what: what.to_string(),
        expected,
        got,
    }
}

/// Linear query and key projections plus the binarization threshold.
/// `w_query` is d×2h and acts on `[h_category; h_seg]`; `w_key` is d×p.
#[derive(Clone, Debug, PartialEq)]
pub struct SegDecoderParams {
    pub w_query: DMatrix<f64>,
    pub w_key: DMatrix<f64>,
    pub threshold: f64,
}

impl SegDecoderParams {
    pub fn new(
        w_query: DMatrix<f64>,
        w_key: DMatrix<f64>,
        threshold: f64,
    ) -> Result<Self, SegError> {
        if w_query.nrows() != w_key.nrows() {
            return Err(mismatch("attention dim of w_key", w_query.nrows(), w_key.nrows()));
        }
        if w_query.nrows() == 0 || w_query.ncols() == 0 || w_query.ncols() % 2 != 0 {
            return Err(SegError::InvalidParams(format!(
                "w_query must be d×2h with d, h > 0, got {}×{}",
                w_query.nrows(),
                w_query.ncols()
            )));
        }
        if w_key.ncols() == 0 {
            return Err(SegError::InvalidParams("w_key has no columns".into()));
        }
        if !(w_query.iter().all(|x| x.is_finite()) && w_key.iter().all(|x| x.is_finite())) {
            return Err(SegError::InvalidParams("weights must be finite".into()));
        }
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(SegError::InvalidParams(format!(
                "threshold must lie in (0,1), got {threshold}"
            )));
        }
        Ok(SegDecoderParams {
            w_query,
            w_key,
            threshold,
        })
    }

    pub fn zeros(d: usize, h: usize, p: usize) -> Self {
        SegDecoderParams {
            w_query: DMatrix::zeros(d, 2 * h),
            w_key: DMatrix::zeros(d, p),
            threshold: DEFAULT_THRESHOLD,
        }
    }

    /// Gaussian weights scaled by 1/sqrt(fan_in).
    pub fn random<R: Rng>(d: usize, h: usize, p: usize, rng: &mut R) -> Self {
        let mut draw = |rows: usize, cols: usize| {
            let s = 1.0 / (cols as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| {
                s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
            })
        };
        let w_query = draw(d, 2 * h);
        let w_key = draw(d, p);
        SegDecoderParams {
            w_query,
            w_key,
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn attention_dim(&self) -> usize {
        self.w_query.nrows()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_query.ncols() / 2
    }

    pub fn feature_dim(&self) -> usize {
        self.w_key.ncols()
    }
}

/// Hidden states of a `[SEG]` token and the category token before it.
#[derive(Clone, Debug, PartialEq)]
pub struct SegTokenPair {
    pub h_seg: DVector<f64>,
    pub h_category: DVector<f64>,
}

impl SegTokenPair {
    pub fn new(h_seg: Vec<f64>, h_category: Vec<f64>) -> Self {
        SegTokenPair {
            h_seg: DVector::from_vec(h_seg),
            h_category: DVector::from_vec(h_category),
        }
    }

    fn combined(&self) -> DVector<f64> {
        let h = self.h_category.len();
        DVector::from_fn(h + self.h_seg.len(), |i, _| {
            if i < h {
                self.h_category[i]
            } else {
                self.h_seg[i - h]
            }
        })
    }
}

/// Per-point backbone features, one row per point.
#[derive(Clone, Debug, PartialEq)]
pub struct PointFeatures {
    pub features: DMatrix<f64>,
}

impl PointFeatures {
    pub fn new(features: DMatrix<f64>) -> Self {
        PointFeatures { features }
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }
}

/// Pre-sigmoid scores q·k_i/√d.
pub fn score_logits(
    params: &SegDecoderParams,
    pair: &SegTokenPair,
    feats: &PointFeatures,
) -> Result<Vec<f64>, SegError> {
    let h = params.hidden_dim();
    if pair.h_seg.len() != h {
        return Err(mismatch("h_seg", h, pair.h_seg.len()));
    }
    if pair.h_category.len() != h {
        return Err(mismatch("h_category", h, pair.h_category.len()));
    }
    if feats.features.ncols() != params.feature_dim() {
        return Err(mismatch("point features", params.feature_dim(), feats.features.ncols()));
    }
    let q = &params.w_query * pair.combined();
    let scale = (params.attention_dim() as f64).sqrt();
    // k_i = W_key f_i, so q·k_i = (W_keyᵀ q)·f_i.
    let projected = params.w_key.transpose() * q;
    let logits = &feats.features * projected;
    Ok(logits.iter().map(|z| z / scale).collect())
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn score_points(
    params: &SegDecoderParams,
    pair: &SegTokenPair,
    feats: &PointFeatures,
) -> Result<Vec<f64>, SegError> {
    Ok(score_logits(params, pair, feats)?.into_iter().map(sigmoid).collect())
}

/// Points whose probability reaches the threshold.
pub fn binarize(part_name: &str, probabilities: &[f64], threshold: f64) -> PartMask {
    let indices = probabilities
        .iter()
        .enumerate()
        .filter(|(_, &p)| p >= threshold)
        .map(|(i, _)| i)
        .collect();
    PartMask::new(part_name, indices)
}

/// Scores and binarizes each named token pair against the same features.
pub fn segment(
    params: &SegDecoderParams,
    tokens: &[(String, SegTokenPair)],
    feats: &PointFeatures,
) -> Result<Vec<PartMask>, SegError> {
    tokens
        .iter()
        .map(|(name, pair)| {
            let probs = score_points(params, pair, feats)?;
            Ok(binarize(name, &probs, params.threshold))
        })
        .collect()
}

/// Synthetic decoder whose scores recover a known point labelling.
///
/// With `p = max(16, parts)`, point i of part k gets features `2e_k − 1`
/// (plus optional Gaussian noise), token k has `h_seg = e_k` and a zero
/// category state, `W_query = gain·[0 | I]` and `W_key = I`. Logits are
/// `±gain/√p` before noise, positive exactly on the matching part.
pub struct OracleFixture {
    pub params: SegDecoderParams,
    pub features: PointFeatures,
    pub tokens: Vec<(String, SegTokenPair)>,
}

pub fn oracle_fixture<R: Rng>(
    labels: &[usize],
    part_names: &[String],
    gain: f64,
    feature_sigma: f64,
    rng: &mut R,
) -> OracleFixture {
    let p = part_names.len().max(16);
    let mut w_query = DMatrix::zeros(p, 2 * p);
    for i in 0..p {
        w_query[(i, p + i)] = gain;
    }
    let params = SegDecoderParams {
        w_query,
        w_key: DMatrix::identity(p, p),
        threshold: DEFAULT_THRESHOLD,
    };
    let features = DMatrix::from_fn(labels.len(), p, |i, j| {
        let base = if labels[i] == j { 1.0 } else { -1.0 };
        if feature_sigma > 0.0 {
            let n: f64 = StandardNormal.sample(rng);
            base + feature_sigma * n
        } else {
            base
        }
    });
    let tokens = part_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let mut h_seg = vec![0.0; p];
            h_seg[k] = 1.0;
            (name.clone(), SegTokenPair::new(h_seg, vec![0.0; p]))
        })
        .collect();
    OracleFixture {
        params,
        features: PointFeatures::new(features),
        tokens,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use proptest::prelude::*;

    fn one_dim(q: f64, ks: &[f64]) -> (SegDecoderParams, SegTokenPair, PointFeatures) {
        let params = SegDecoderParams::new(
            DMatrix::from_row_slice(1, 2, &[0.0, 1.0]),
            DMatrix::from_row_slice(1, 1, &[1.0]),
            0.5,
        )
        .unwrap();
        let pair = SegTokenPair::new(vec![q], vec![0.0]);
        let feats = PointFeatures::new(DMatrix::from_column_slice(ks.len(), 1, ks));
        (params, pair, feats)
    }

    #[test]
    fn zero_weights_give_one_half() {
        let params = SegDecoderParams::zeros(16, 32, 16);
        let pair = SegTokenPair::new(vec![0.3; 32], vec![-1.0; 32]);
        let feats = PointFeatures::new(DMatrix::from_fn(10, 16, |i, j| (i * j) as f64));
        let probs = score_points(&params, &pair, &feats).unwrap();
        assert!(probs.iter().all(|&p| p == 0.5));
        assert_eq!(binarize("x", &probs, 0.5).len(), 10);
    }

    #[test]
    fn hand_evaluated_scores() {
        let (params, pair, feats) = one_dim(2.0, &[1.0, -1.0, 0.0]);
        let probs = score_points(&params, &pair, &feats).unwrap();
        let expect = [1.0 / (1.0 + (-2.0f64).exp()), 1.0 / (1.0 + 2.0f64.exp()), 0.5];
        for (p, e) in probs.iter().zip(expect) {
            assert!((p - e).abs() < 1e-15);
        }
        assert!((probs[0] - 0.880797).abs() < 1e-6);
        assert!((probs[1] - 0.119202).abs() < 1e-6);
    }

    #[test]
    fn binarize_uses_greater_or_equal() {
        assert_eq!(binarize("a", &[0.9, 0.1, 0.5], 0.5).indices, vec![0, 2]);
        assert!(binarize("a", &[0.49; 4], 0.5).is_empty());
    }

    #[test]
    fn dimension_mismatch() {
        let (params, _, feats) = one_dim(2.0, &[1.0]);
        let bad = SegTokenPair::new(vec![1.0, 2.0], vec![0.0]);
        assert!(matches!(
            score_points(&params, &bad, &feats),
            Err(SegError::DimensionMismatch { .. })
        ));
        let wide = PointFeatures::new(DMatrix::zeros(3, 2));
        let pair = SegTokenPair::new(vec![1.0], vec![0.0]);
        assert!(score_points(&params, &pair, &wide).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(SegDecoderParams::new(DMatrix::zeros(2, 4), DMatrix::zeros(3, 4), 0.5).is_err());
        assert!(SegDecoderParams::new(DMatrix::zeros(2, 3), DMatrix::zeros(2, 4), 0.5).is_err());
        assert!(SegDecoderParams::new(DMatrix::zeros(2, 4), DMatrix::zeros(2, 4), 1.0).is_err());
        let mut w = DMatrix::zeros(2, 4);
        w[(0, 0)] = f64::NAN;
        assert!(SegDecoderParams::new(w, DMatrix::zeros(2, 4), 0.5).is_err());
    }

    #[test]
    fn oracle_fixture_recovers_labels() {
        let labels = [0, 1, 2, 1, 0, 2, 2];
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let mut rng = crate::util::rng(1);
        let fx = oracle_fixture(&labels, &names, 8.0, 0.0, &mut rng);
        let masks = segment(&fx.params, &fx.tokens, &fx.features).unwrap();
        assert_eq!(masks[0].indices, vec![0, 4]);
        assert_eq!(masks[1].indices, vec![1, 3]);
        assert_eq!(masks[2].indices, vec![2, 5, 6]);
    }

    proptest! {
        #[test]
        fn permutation_equivariant(seed in any::<u64>(), m in 1usize..30) {
            let mut rng = crate::util::rng(seed);
            let params = SegDecoderParams::random(16, 32, 16, &mut rng);
            let pair = SegTokenPair::new(
                (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
                (0..32).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let feats = DMatrix::from_fn(m, 16, |_, _| rng.random_range(-1.0..1.0));
            let mut perm: Vec<usize> = (0..m).collect();
            for i in (1..m).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = DMatrix::from_fn(m, 16, |i, j| feats[(perm[i], j)]);
            let a = score_points(&params, &pair, &PointFeatures::new(feats)).unwrap();
            let b = score_points(&params, &pair, &PointFeatures::new(permuted)).unwrap();
            for i in 0..m {
                prop_assert_eq!(b[i], a[perm[i]]);
            }
            prop_assert!(a.iter().all(|&p| p > 0.0 && p < 1.0));
        }

        #[test]
        fn threshold_monotone(probs in prop::collection::vec(0.0f64..1.0, 0..40),
                              t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let wide = binarize("m", &probs, lo);
            let narrow = binarize("m", &probs, hi);
            prop_assert!(narrow.indices.iter().all(|i| wide.indices.contains(i)));
        }

        #[test]
        fn positive_scaling_preserves_order(seed in any::<u64>(), c in 0.1f64..10.0) {
            let mut rng = crate::util::rng(seed);
            let params = SegDecoderParams::random(4, 3, 5, &mut rng);
            let pair = SegTokenPair::new(vec![0.5, -0.2, 1.0], vec![0.1, 0.3, -0.7]);
            let feats = DMatrix::from_fn(12, 5, |_, _| rng.random_range(-1.0..1.0));
            let a = score_logits(&params, &pair, &PointFeatures::new(feats.clone())).unwrap();
            let b = score_logits(&params, &pair, &PointFeatures::new(feats * c)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((y - c * x).abs() <= 1e-12 * (1.0 + (c * x).abs()));
            }
        }
    }
}
