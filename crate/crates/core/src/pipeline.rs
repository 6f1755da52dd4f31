//! Orchestration shared by the command-line tool and integration tests:
//! expand poses across rotation offsets, label them in parallel, and
//! summarize the resulting manifest.

use std::collections::BTreeMap;
use std::thread;

use crate::geo::Bearing;
use crate::index::{MatchConfig, SegmentIndex};
use crate::label::{label_pose, LabelConfig};
use crate::manifest::ManifestRow;
use crate::metrics::{AffordanceKind, EvalRow, EvalValue};
use crate::osm::RoadNetwork;
use crate::pose::CameraPose;

/// Value histograms and match counts over a labeled manifest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSummary {
    pub total: usize,
    pub matched: usize,
    pub no_match: usize,
    /// affordance name → label value → row count, discrete labels only.
    pub value_counts: BTreeMap<String, BTreeMap<String, usize>>,
}

impl LabelSummary {
    pub fn from_rows(rows: &[ManifestRow]) -> LabelSummary {
        let mut value_counts: BTreeMap<String, BTreeMap<String, usize>> = BTreeMap::new();
        let mut bump = |name: &str, value: String| {
            *value_counts.entry(name.to_string()).or_default().entry(value).or_insert(0) += 1;
        };
        let mut matched = 0;
        for row in rows {
            if row.is_matched() {
                matched += 1;
            }
            if let Some(v) = row.drivable_heading {
                bump("drivable_heading", v.to_string());
            }
            if let Some(v) = row.intersection_ahead {
                bump("intersection_ahead", v.as_str().to_string());
            }
            if let Some(v) = row.num_lanes {
                bump("num_lanes", v.to_string());
            }
            if let Some(v) = row.wrong_way {
                bump("wrong_way", v.to_string());
            }
            if let Some(v) = row.bike_lane {
                bump("bike_lane", v.to_string());
            }
        }
        LabelSummary {
            total: rows.len(),
            matched,
            no_match: rows.len() - matched,
            value_counts,
        }
    }

    pub fn ambiguous_count(&self) -> usize {
        self.value_counts
            .get("intersection_ahead")
            .and_then(|m| m.get("ambiguous"))
            .copied()
            .unwrap_or(0)
    }

    /// Human-readable multi-line summary.
    pub fn render(&self) -> String {
        let mut out = format!(
            "rows: {} (matched {}, no match {})\n",
            self.total, self.matched, self.no_match
        );
        for (name, counts) in &self.value_counts {
            let values: Vec<String> =
                counts.iter().map(|(value, n)| format!("{value}={n}")).collect();
            out.push_str(&format!("{name}: {}\n", values.join(" ")));
        }
        out
    }
}

/// A labeled manifest plus its summary.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRun {
    pub rows: Vec<ManifestRow>,
    pub summary: LabelSummary,
}

/// Labels every pose at every rotation offset.
///
/// Each sweep angle yields one row per pose whose heading is the vehicle
/// heading plus the offset, mimicking a crop rotated inside the panorama.
/// Rows come back pose-major in input order regardless of how the work
/// was scheduled across threads.
pub fn run_labeling(
    poses: &[CameraPose],
    yaw_sweep_deg: &[f64],
    network: &RoadNetwork,
    index: &SegmentIndex,
    match_config: &MatchConfig,
    label_config: &LabelConfig,
) -> LabelRun {
    let sweep: &[f64] = if yaw_sweep_deg.is_empty() { &[0.0] } else { yaw_sweep_deg };
    let mut expanded: Vec<(CameraPose, f64)> = Vec::with_capacity(poses.len() * sweep.len());
    for pose in poses {
        for &yaw_deg in sweep {
            let mut rotated = pose.clone();
            rotated.heading =
                Bearing::from_radians(pose.heading.radians() + yaw_deg.to_radians());
            expanded.push((rotated, yaw_deg));
        }
    }

    let label_one = |(pose, yaw_deg): &(CameraPose, f64)| -> ManifestRow {
        let record = label_pose(pose, network, index, match_config, label_config);
        ManifestRow::new(pose, *yaw_deg, &record)
    };

    let workers = thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(8)
        .min(expanded.len().max(1));
    let rows: Vec<ManifestRow> = if workers <= 1 {
        expanded.iter().map(label_one).collect()
    } else {
        let chunk_len = expanded.len().div_ceil(workers);
        thread::scope(|s| {
            let handles: Vec<_> = expanded
                .chunks(chunk_len)
                .map(|chunk| s.spawn(move || chunk.iter().map(label_one).collect::<Vec<_>>()))
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("labeler thread panicked"))
                .collect()
        })
    };

    LabelRun { summary: LabelSummary::from_rows(&rows), rows }
}

/// The affordance kinds scored by evaluation, keyed by manifest field.
pub fn eval_kinds() -> BTreeMap<String, AffordanceKind> {
    [
        ("heading_angle_deg", AffordanceKind::Regression),
        ("distance_to_intersection_m", AffordanceKind::Regression),
        ("num_lanes", AffordanceKind::Regression),
        ("drivable_heading", AffordanceKind::Binary),
        ("intersection_ahead", AffordanceKind::Binary),
        ("wrong_way", AffordanceKind::Binary),
        ("bike_lane", AffordanceKind::Binary),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

/// Projects manifest rows into evaluation rows.
///
/// The ternary intersection label scores as binary with ambiguous rows
/// abstaining. Rows from a rotation sweep get a composite join key so
/// the same panorama's rotations stay distinct.
pub fn manifest_to_eval_rows(rows: &[ManifestRow]) -> Vec<EvalRow> {
    rows.iter()
        .map(|row| {
            let mut values = BTreeMap::new();
            if let Some(v) = row.heading_angle_deg {
                values.insert("heading_angle_deg".to_string(), EvalValue::Real(v));
            }
            if let Some(v) = row.distance_to_intersection_m {
                values.insert("distance_to_intersection_m".to_string(), EvalValue::Real(v));
            }
            if let Some(v) = row.num_lanes {
                values.insert("num_lanes".to_string(), EvalValue::Real(v as f64));
            }
            if let Some(v) = row.drivable_heading {
                values.insert("drivable_heading".to_string(), EvalValue::Binary(v));
            }
            match row.intersection_ahead {
                Some(crate::label::IntersectionAhead::Yes) => {
                    values.insert("intersection_ahead".to_string(), EvalValue::Binary(true));
                }
                Some(crate::label::IntersectionAhead::No) => {
                    values.insert("intersection_ahead".to_string(), EvalValue::Binary(false));
                }
                Some(crate::label::IntersectionAhead::Ambiguous) | None => {}
            }
            if let Some(v) = row.wrong_way {
                values.insert("wrong_way".to_string(), EvalValue::Binary(v));
            }
            if let Some(v) = row.bike_lane {
                values.insert("bike_lane".to_string(), EvalValue::Binary(v));
            }
            let pano_id = if row.yaw_offset_deg == 0.0 {
                row.pano_id.clone()
            } else {
                format!("{}@{}", row.pano_id, row.yaw_offset_deg)
            };
            EvalRow { pano_id, values }
        })
        .collect()
}
