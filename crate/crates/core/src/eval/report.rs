use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::executability::{ExecutabilityVerdict, FailureCategory};
use super::joints::JointErrors;
use super::segmentation::SegmentationResult;
use super::EvalError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Split {
    #[default]
    #[serde(rename = "ID")]
    Id,
    #[serde(rename = "OOD")]
    Ood,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuccessThresholds {
    pub axis: f64,
    pub origin: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectRecord {
    pub split: Split,
    pub executable: bool,
    pub failure_category: FailureCategory,
    pub miou: Option<f64>,
    pub count_match: Option<bool>,
    pub joint_type_error: Option<f64>,
    pub joint_axis_error: Option<f64>,
    pub joint_origin_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_success_rate: Option<f64>,
}

/// Means over the objects of one split. Metrics no object reported are absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub objects: usize,
    pub executability_rate: f64,
    pub failure_rate: f64,
    pub failure_breakdown: BTreeMap<FailureCategory, f64>,
    pub miou: Option<f64>,
    pub count_accuracy: Option<f64>,
    pub joint_type_error: Option<f64>,
    pub joint_axis_error: Option<f64>,
    pub joint_origin_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub joint_success_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub all: SplitMetrics,
    pub id: Option<SplitMetrics>,
    pub ood: Option<SplitMetrics>,
    pub objects: BTreeMap<String, ObjectRecord>,
}

/// Combines per-object results. Every joint, segmentation and split key
/// must name an object with a verdict; with a non-empty `splits` map every
/// object needs a label, otherwise all objects count as in-distribution.
pub fn aggregate_report(
    verdicts: &BTreeMap<String, ExecutabilityVerdict>,
    joints: &BTreeMap<String, JointErrors>,
    seg: &BTreeMap<String, SegmentationResult>,
    splits: &BTreeMap<String, Split>,
    success: Option<SuccessThresholds>,
) -> Result<EvalReport, EvalError> {
    for (what, key) in joints
        .keys()
        .map(|k| ("joint errors", k))
        .chain(seg.keys().map(|k| ("segmentation", k)))
        .chain(splits.keys().map(|k| ("split labels", k)))
    {
        if !verdicts.contains_key(key) {
            return Err(EvalError::KeyMismatch {
                key: key.clone(),
                message: format!("{what} entry has no executability verdict"),
            });
        }
    }
    let mut objects = BTreeMap::new();
    for (key, v) in verdicts {
        let split = if splits.is_empty() {
            Split::Id
        } else {
            *splits.get(key).ok_or_else(|| EvalError::KeyMismatch {
                key: key.clone(),
                message: "object has no split label".into(),
            })?
        };
        let j = joints.get(key);
        let s = seg.get(key);
        objects.insert(
            key.clone(),
            ObjectRecord {
                split,
                executable: v.passed,
                failure_category: v.failure_category,
                miou: s.map(|s| s.miou),
                count_match: s.map(|s| s.count_match),
                joint_type_error: j.and_then(|j| j.type_error),
                joint_axis_error: j.and_then(|j| j.axis_error),
                joint_origin_error: j.and_then(|j| j.origin_error),
                joint_success_rate: success
                    .and_then(|t| j.and_then(|j| j.success_rate(t.axis, t.origin))),
            },
        );
    }
    let pick = |split: Option<Split>| -> Vec<&ObjectRecord> {
        objects
            .values()
            .filter(|r| split.is_none_or(|s| r.split == s))
            .collect()
    };
    Ok(EvalReport {
        all: split_metrics(&pick(None)),
        id: Some(pick(Some(Split::Id))).filter(|v| !v.is_empty()).map(|v| split_metrics(&v)),
        ood: Some(pick(Some(Split::Ood))).filter(|v| !v.is_empty()).map(|v| split_metrics(&v)),
        objects,
    })
}

fn mean<I: Iterator<Item = f64>>(values: I) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

fn split_metrics(records: &[&ObjectRecord]) -> SplitMetrics {
    let n = records.len();
    let nf = n.max(1) as f64;
    let passed = records.iter().filter(|r| r.executable).count();
    let mut breakdown = BTreeMap::new();
    for cat in FailureCategory::FAILURES {
        let count = records.iter().filter(|r| r.failure_category == cat).count();
        if count > 0 {
            breakdown.insert(cat, count as f64 / nf);
        }
    }
    SplitMetrics {
        objects: n,
        executability_rate: passed as f64 / nf,
        failure_rate: (n - passed) as f64 / nf,
        failure_breakdown: breakdown,
        miou: mean(records.iter().filter_map(|r| r.miou)),
        count_accuracy: mean(
            records
                .iter()
                .filter_map(|r| r.count_match)
                .map(|b| if b { 1.0 } else { 0.0 }),
        ),
        joint_type_error: mean(records.iter().filter_map(|r| r.joint_type_error)),
        joint_axis_error: mean(records.iter().filter_map(|r| r.joint_axis_error)),
        joint_origin_error: mean(records.iter().filter_map(|r| r.joint_origin_error)),
        joint_success_rate: mean(records.iter().filter_map(|r| r.joint_success_rate)),
    }
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }

    /// Plain-text table with All / ID / OOD columns; absent values print as `-`.
    pub fn to_table(&self) -> String {
        let cols = [Some(&self.all), self.id.as_ref(), self.ood.as_ref()];
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        let mut rows: Vec<(String, [String; 3])> = Vec::new();
        let mut row = |name: &str, f: &dyn Fn(&SplitMetrics) -> Option<f64>| {
            rows.push((name.to_string(), cols.map(|c| fmt(c.and_then(f)))));
        };
        row("objects", &|m| Some(m.objects as f64));
        row("mIoU", &|m| m.miou);
        row("count acc", &|m| m.count_accuracy);
        row("joint type err", &|m| m.joint_type_error);
        row("joint axis err (rad)", &|m| m.joint_axis_error);
        row("joint origin err (m)", &|m| m.joint_origin_error);
        row("joint success", &|m| m.joint_success_rate);
        row("executability", &|m| Some(m.executability_rate));
        for cat in FailureCategory::FAILURES {
            row(&format!("fail: {cat}"), &|m| m.failure_breakdown.get(&cat).copied());
        }
        let mut out = String::new();
        let _ = writeln!(out, "{:<22} {:>10} {:>10} {:>10}", "metric", "All", "ID", "OOD");
        for (name, vals) in rows {
            let vals = if name == "objects" {
                vals.map(|v| v.split('.').next().unwrap_or("-").to_string())
            } else {
                vals
            };
            let _ = writeln!(out, "{name:<22} {:>10} {:>10} {:>10}", vals[0], vals[1], vals[2]);
        }
        out
    }
}
