//! Evaluation metrics: regression error, binary accuracy, multi-annotator
//! consensus, heading-sign reduction, and the resize-factor correction for
//! predictions made on images with a different aspect ratio.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

/// Angles smaller than this count as pointing straight down the road and
/// are excluded from sign-based binary scoring.
pub const ON_AXIS_EPS_RAD: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction and truth lists must have equal nonzero length (got {preds} and {truths})")]
    LengthMismatch { preds: usize, truths: usize },
    #[error("item {index} has {got} labels, expected {expected}")]
    RaggedLabels { index: usize, got: usize, expected: usize },
    #[error("consensus group size must be positive")]
    EmptyGroup,
    #[error("no prediction rows joined against truth rows")]
    NoJoinedRows,
    #[error("resize factor must be positive and finite (got {0})")]
    BadResizeFactor(f64),
}

/// Mean absolute error over paired samples.
pub fn mae(preds: &[f64], truths: &[f64]) -> Result<f64, MetricsError> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    let total: f64 = preds.iter().zip(truths).map(|(p, t)| (p - t).abs()).sum();
    Ok(total / preds.len() as f64)
}

/// Percentage of paired samples that agree.
pub fn binary_accuracy(preds: &[bool], truths: &[bool]) -> Result<f64, MetricsError> {
    if preds.is_empty() || preds.len() != truths.len() {
        return Err(MetricsError::LengthMismatch { preds: preds.len(), truths: truths.len() });
    }
    let matches = preds.iter().zip(truths).filter(|(p, t)| p == t).count();
    Ok(100.0 * matches as f64 / preds.len() as f64)
}

/// How many identical votes a label needs to win a consensus group.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsensusPolicy {
    pub group_size: usize,
    pub min_votes: usize,
}

impl Default for ConsensusPolicy {
    /// Five annotators, strict majority.
    fn default() -> ConsensusPolicy {
        ConsensusPolicy { group_size: 5, min_votes: 3 }
    }
}

/// Reduces each item's annotator labels to a single winner, or `None`
/// when no label reaches the vote threshold (or two labels tie at it).
pub fn consensus<T: Ord + Clone>(
    items: &[Vec<T>],
    policy: ConsensusPolicy,
) -> Result<Vec<Option<T>>, MetricsError> {
    if policy.group_size == 0 || policy.min_votes == 0 {
        return Err(MetricsError::EmptyGroup);
    }
    let mut out = Vec::with_capacity(items.len());
    for (index, labels) in items.iter().enumerate() {
        if labels.len() != policy.group_size {
            return Err(MetricsError::RaggedLabels {
                index,
                got: labels.len(),
                expected: policy.group_size,
            });
        }
        let mut counts: BTreeMap<&T, usize> = BTreeMap::new();
        for label in labels {
            *counts.entry(label).or_insert(0) += 1;
        }
        let mut winners = counts.iter().filter(|(_, &n)| n >= policy.min_votes);
        let winner = match (winners.next(), winners.next()) {
            (Some((label, _)), None) => Some((*label).clone()),
            _ => None,
        };
        out.push(winner);
    }
    Ok(out)
}

/// Which side of the road axis a heading angle falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingSign {
    NegativeRotation,
    PositiveRotation,
    OnAxis,
}

/// Sign class of a heading angle; magnitudes under [`ON_AXIS_EPS_RAD`]
/// are `OnAxis`.
pub fn heading_sign_class(angle_rad: f64) -> HeadingSign {
    if angle_rad.abs() < ON_AXIS_EPS_RAD {
        HeadingSign::OnAxis
    } else if angle_rad < 0.0 {
        HeadingSign::NegativeRotation
    } else {
        HeadingSign::PositiveRotation
    }
}

/// Scales predicted angles to compensate for training images whose aspect
/// ratio differs from the evaluation images.
///
/// Horizontal compression shrinks apparent vanishing-point displacement,
/// so the default direction multiplies raw predictions back up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResizeCorrection {
    pub rf: f64,
    pub source_w: u32,
    pub source_h: u32,
    pub target_w: u32,
    pub target_h: u32,
    /// Divide instead of multiply.
    pub divide: bool,
}

impl ResizeCorrection {
    /// Correction with `rf` equal to the ratio of the two aspect ratios.
    pub fn from_dims(
        source_w: u32,
        source_h: u32,
        target_w: u32,
        target_h: u32,
    ) -> Result<ResizeCorrection, MetricsError> {
        if source_w == 0 || source_h == 0 || target_w == 0 || target_h == 0 {
            return Err(MetricsError::BadResizeFactor(0.0));
        }
        let rf = (source_w as f64 / source_h as f64) / (target_w as f64 / target_h as f64);
        Ok(ResizeCorrection { rf, source_w, source_h, target_w, target_h, divide: false })
    }

    /// 1242×375 wide-format source evaluated on 227×227 square crops.
    pub fn kitti_default() -> ResizeCorrection {
        ResizeCorrection::from_dims(1242, 375, 227, 227).expect("constant dims are valid")
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.rf.is_finite() && self.rf > 0.0) {
            return Err(MetricsError::BadResizeFactor(self.rf));
        }
        Ok(())
    }
}

/// Applies the resize correction to a raw predicted angle.
pub fn apply_resize_factor(raw_angle_rad: f64, corr: &ResizeCorrection) -> f64 {
    if corr.divide {
        raw_angle_rad / corr.rf
    } else {
        raw_angle_rad * corr.rf
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AffordanceKind {
    Regression,
    Binary,
}

/// One affordance's value on one row; rows omit affordances they cannot
/// state.
#[derive(Debug, Clone, PartialEq)]
pub enum EvalValue {
    Real(f64),
    Binary(bool),
}

/// One pose's affordance values keyed by affordance name.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub pano_id: String,
    pub values: BTreeMap<String, EvalValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalEntry {
    pub name: String,
    pub kind: AffordanceKind,
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy_pct: Option<f64>,
}

/// Per-affordance comparison of predictions against ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    /// One JSON object per entry, newline-delimited.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("report serializes"));
            out.push('\n');
        }
        out
    }

    /// Fixed-width table for terminals.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>10} {:>8} {:>12}\n",
            "affordance", "kind", "count", "metric"
        ));
        for e in &self.entries {
            let (kind, metric) = match e.kind {
                AffordanceKind::Regression => {
                    ("regression", format!("{:.4} MAE", e.mae.unwrap_or(f64::NAN)))
                }
                AffordanceKind::Binary => {
                    ("binary", format!("{:.2}% acc", e.accuracy_pct.unwrap_or(f64::NAN)))
                }
            };
            out.push_str(&format!("{:<28} {:>10} {:>8} {:>12}\n", e.name, kind, e.count, metric));
        }
        out
    }
}

/// Joins predictions to truths on `pano_id` and scores each declared
/// affordance: MAE for regression, accuracy for binary. Rows missing a
/// value for an affordance are skipped for that affordance only;
/// affordances with no usable pairs are omitted from the report.
pub fn eval_report(
    preds: &[EvalRow],
    truths: &[EvalRow],
    kinds: &BTreeMap<String, AffordanceKind>,
) -> Result<EvalReport, MetricsError> {
    let truth_by_id: BTreeMap<&str, &EvalRow> =
        truths.iter().map(|r| (r.pano_id.as_str(), r)).collect();
    let joined: Vec<(&EvalRow, &EvalRow)> = preds
        .iter()
        .filter_map(|p| truth_by_id.get(p.pano_id.as_str()).map(|t| (p, *t)))
        .collect();
    if joined.is_empty() {
        return Err(MetricsError::NoJoinedRows);
    }

    let mut entries = Vec::new();
    for (name, kind) in kinds {
        match kind {
            AffordanceKind::Regression => {
                let mut p = Vec::new();
                let mut t = Vec::new();
                for (pr, tr) in &joined {
                    if let (Some(EvalValue::Real(a)), Some(EvalValue::Real(b))) =
                        (pr.values.get(name), tr.values.get(name))
                    {
                        p.push(*a);
                        t.push(*b);
                    }
                }
                if !p.is_empty() {
                    entries.push(EvalEntry {
                        name: name.clone(),
                        kind: *kind,
                        count: p.len(),
                        mae: Some(mae(&p, &t)?),
                        accuracy_pct: None,
                    });
                }
            }
            AffordanceKind::Binary => {
                let mut p = Vec::new();
                let mut t = Vec::new();
                for (pr, tr) in &joined {
                    if let (Some(EvalValue::Binary(a)), Some(EvalValue::Binary(b))) =
                        (pr.values.get(name), tr.values.get(name))
                    {
                        p.push(*a);
                        t.push(*b);
                    }
                }
                if !p.is_empty() {
                    entries.push(EvalEntry {
                        name: name.clone(),
                        kind: *kind,
                        count: p.len(),
                        mae: None,
                        accuracy_pct: Some(binary_accuracy(&p, &t)?),
                    });
                }
            }
        }
    }
    Ok(EvalReport { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mae_of_identical_lists_is_zero() {
        let v = vec![1.0, -2.5, 3.25];
        assert_eq!(mae(&v, &v).unwrap(), 0.0);
    }

    #[test]
    fn mae_hand_arithmetic() {
        let got = mae(&[1.0, 2.0, 3.0], &[1.0, 1.0, 4.0]).unwrap();
        assert!((got - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mae_rejects_empty_and_mismatched() {
        assert!(mae(&[], &[]).is_err());
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn binary_accuracy_hand_cases() {
        assert_eq!(binary_accuracy(&[true, false], &[true, false]).unwrap(), 100.0);
        assert_eq!(binary_accuracy(&[true, false], &[false, true]).unwrap(), 0.0);
        let got = binary_accuracy(&[true, true, false, false], &[true, true, true, false]).unwrap();
        assert_eq!(got, 75.0);
    }

    #[test]
    fn consensus_majority_of_five_booleans() {
        let items = vec![vec![true, true, false, true, false]];
        let got = consensus(&items, ConsensusPolicy::default()).unwrap();
        assert_eq!(got, vec![Some(true)]);
    }

    #[test]
    fn consensus_without_strict_majority_is_unresolved() {
        let items = vec![vec![2u32, 2, 3, 3, 1]];
        let got = consensus(&items, ConsensusPolicy::default()).unwrap();
        assert_eq!(got, vec![None]);
    }

    #[test]
    fn consensus_rejects_ragged_input() {
        let items = vec![vec![1u8, 1, 1, 1, 1], vec![1, 1, 1]];
        let err = consensus(&items, ConsensusPolicy::default()).unwrap_err();
        assert_eq!(err, MetricsError::RaggedLabels { index: 1, got: 3, expected: 5 });
    }

    #[test]
    fn heading_sign_examples() {
        assert_eq!(heading_sign_class(-0.1745), HeadingSign::NegativeRotation);
        assert_eq!(heading_sign_class(0.1745), HeadingSign::PositiveRotation);
        assert_eq!(heading_sign_class(0.0), HeadingSign::OnAxis);
        assert_eq!(heading_sign_class(9e-7), HeadingSign::OnAxis);
        assert_eq!(heading_sign_class(-9e-7), HeadingSign::OnAxis);
    }

    #[test]
    fn resize_factor_identity_and_wide_source() {
        let unit = ResizeCorrection::from_dims(227, 227, 227, 227).unwrap();
        assert_eq!(unit.rf, 1.0);
        assert_eq!(apply_resize_factor(0.42, &unit), 0.42);

        let kitti = ResizeCorrection::kitti_default();
        assert!((kitti.rf - 1242.0 / 375.0).abs() < 1e-12);
        assert!((kitti.rf - 3.312).abs() < 1e-12);
        let corrected = apply_resize_factor(0.05236, &kitti);
        assert!((corrected - 0.17342).abs() < 1e-4, "corrected {corrected}");
    }

    #[test]
    fn resize_factor_can_divide() {
        let mut corr = ResizeCorrection::kitti_default();
        corr.divide = true;
        let got = apply_resize_factor(3.312, &corr);
        assert!((got - 1.0).abs() < 1e-12);
    }

    fn row(id: &str, values: &[(&str, EvalValue)]) -> EvalRow {
        EvalRow {
            pano_id: id.to_string(),
            values: values.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        }
    }

    fn kinds() -> BTreeMap<String, AffordanceKind> {
        [
            ("heading_angle".to_string(), AffordanceKind::Regression),
            ("wrong_way".to_string(), AffordanceKind::Binary),
        ]
        .into_iter()
        .collect()
    }

    #[test]
    fn eval_report_perfect_predictions() {
        let rows = vec![
            row("a", &[("heading_angle", EvalValue::Real(0.1)), ("wrong_way", EvalValue::Binary(false))]),
            row("b", &[("heading_angle", EvalValue::Real(-0.2)), ("wrong_way", EvalValue::Binary(true))]),
        ];
        let report = eval_report(&rows, &rows, &kinds()).unwrap();
        assert_eq!(report.entries.len(), 2);
        assert_eq!(report.entries[0].mae, Some(0.0));
        assert_eq!(report.entries[1].accuracy_pct, Some(100.0));
    }

    #[test]
    fn eval_report_hand_fixture() {
        let preds = vec![
            row("a", &[("heading_angle", EvalValue::Real(0.1)), ("wrong_way", EvalValue::Binary(true))]),
            row("b", &[("heading_angle", EvalValue::Real(0.3)), ("wrong_way", EvalValue::Binary(false))]),
        ];
        let truths = vec![
            row("a", &[("heading_angle", EvalValue::Real(0.2)), ("wrong_way", EvalValue::Binary(true))]),
            row("b", &[("heading_angle", EvalValue::Real(0.25)), ("wrong_way", EvalValue::Binary(true))]),
        ];
        let report = eval_report(&preds, &truths, &kinds()).unwrap();
        let ha = &report.entries[0];
        assert_eq!(ha.name, "heading_angle");
        assert_eq!(ha.count, 2);
        assert!((ha.mae.unwrap() - 0.075).abs() < 1e-15);
        let ww = &report.entries[1];
        assert_eq!(ww.count, 2);
        assert_eq!(ww.accuracy_pct, Some(50.0));
    }

    #[test]
    fn eval_report_skips_missing_values_per_affordance() {
        let preds = vec![
            row("a", &[("heading_angle", EvalValue::Real(1.0)), ("wrong_way", EvalValue::Binary(true))]),
            row("b", &[("heading_angle", EvalValue::Real(2.0)), ("wrong_way", EvalValue::Binary(false))]),
        ];
        let truths = vec![
            row("a", &[("wrong_way", EvalValue::Binary(true))]),
            row("b", &[("heading_angle", EvalValue::Real(2.0)), ("wrong_way", EvalValue::Binary(false))]),
        ];
        let report = eval_report(&preds, &truths, &kinds()).unwrap();
        let ha = &report.entries[0];
        assert_eq!((ha.name.as_str(), ha.count), ("heading_angle", 1));
        assert_eq!(ha.mae, Some(0.0));
        let ww = &report.entries[1];
        assert_eq!(ww.count, 2);
    }

    #[test]
    fn eval_report_requires_joined_rows() {
        let preds = vec![row("a", &[("heading_angle", EvalValue::Real(1.0))])];
        let truths = vec![row("z", &[("heading_angle", EvalValue::Real(1.0))])];
        assert_eq!(eval_report(&preds, &truths, &kinds()).unwrap_err(), MetricsError::NoJoinedRows);
    }

    #[test]
    fn report_renders_jsonl_and_table() {
        let report = EvalReport {
            entries: vec![EvalEntry {
                name: "heading_angle".into(),
                kind: AffordanceKind::Regression,
                count: 3,
                mae: Some(0.5),
                accuracy_pct: None,
            }],
        };
        let jsonl = report.to_jsonl();
        assert_eq!(jsonl.lines().count(), 1);
        assert!(jsonl.contains("\"kind\":\"regression\""));
        assert!(!jsonl.contains("accuracy_pct"));
        let table = report.render_table();
        assert!(table.contains("heading_angle"));
        assert!(table.contains("0.5000 MAE"));
    }

    proptest! {
        #[test]
        fn mae_scales_with_input(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..30),
            k in -10.0f64..10.0,
        ) {
            let p: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
            let t: Vec<f64> = pairs.iter().map(|(_, b)| *b).collect();
            let ps: Vec<f64> = p.iter().map(|a| a * k).collect();
            let ts: Vec<f64> = t.iter().map(|b| b * k).collect();
            let base = mae(&p, &t).unwrap();
            let scaled = mae(&ps, &ts).unwrap();
            prop_assert!((scaled - k.abs() * base).abs() < 1e-9);
            prop_assert!(base >= 0.0);
        }

        #[test]
        fn mae_zero_iff_equal(
            pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 1..30),
        ) {
            let p: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
            let t: Vec<f64> = pairs.iter().map(|(_, b)| *b).collect();
            let got = mae(&p, &t).unwrap();
            prop_assert_eq!(got == 0.0, p == t);
        }

        #[test]
        fn consensus_is_permutation_invariant(
            labels in prop::collection::vec(0u8..4, 5),
            seed in 0u64..1000,
        ) {
            let mut shuffled = labels.clone();
            // deterministic Fisher-Yates from the seed
            let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            for i in (1..shuffled.len()).rev() {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let j = (state >> 33) as usize % (i + 1);
                shuffled.swap(i, j);
            }
            let a = consensus(&[labels], ConsensusPolicy::default()).unwrap();
            let b = consensus(&[shuffled], ConsensusPolicy::default()).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn unanimity_always_wins(label in any::<u8>()) {
            let items = vec![vec![label; 5]];
            let got = consensus(&items, ConsensusPolicy::default()).unwrap();
            prop_assert_eq!(got, vec![Some(label)]);
        }

        #[test]
        fn heading_sign_flips_under_negation(a in 1e-6f64..3.14) {
            let pos = heading_sign_class(a);
            let neg = heading_sign_class(-a);
            prop_assert_eq!(pos, HeadingSign::PositiveRotation);
            prop_assert_eq!(neg, HeadingSign::NegativeRotation);
        }

        #[test]
        fn resize_factor_is_linear(a in -0.3f64..0.3, b in -0.3f64..0.3) {
            let corr = ResizeCorrection::kitti_default();
            let lhs = apply_resize_factor(a + b, &corr);
            let rhs = apply_resize_factor(a, &corr) + apply_resize_factor(b, &corr);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
