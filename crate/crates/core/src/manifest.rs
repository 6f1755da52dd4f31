//! Training-manifest rows and the filter/split policies applied to them.
//!
//! The canonical on-disk form is JSON lines with a fixed field order; a
//! CSV export of the same schema is offered for spreadsheet use. Splits
//! are assigned per spatial block rather than per row so that
//! near-duplicate neighboring captures cannot straddle train and test.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::EARTH_RADIUS_M;
use crate::label::{AffordanceRecord, IntersectionAhead};
use crate::pose::CameraPose;

pub const DEFAULT_BLOCK_SIZE_M: f64 = 500.0;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("split ratios must each lie in [0, 1] and sum to 1 (got {0:?})")]
    BadRatios([f64; 3]),
    #[error("block size must be positive (got {0})")]
    BadBlockSize(f64),
    #[error("write failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv write failed: {0}")]
    Csv(#[from] csv::Error),
}

/// One labeled pose. Field order here is the serialized field order.
/// Label fields are `null` exactly when the labeler could not state them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub pano_id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub heading_deg: f64,
    /// Crop yaw relative to the vehicle heading; 0 for the forward view.
    pub yaw_offset_deg: f64,
    pub heading_angle_deg: Option<f64>,
    pub drivable_heading: Option<bool>,
    pub intersection_ahead: Option<IntersectionAhead>,
    pub distance_to_intersection_m: Option<f64>,
    pub num_lanes: Option<u32>,
    pub wrong_way: Option<bool>,
    pub bike_lane: Option<bool>,
    pub way_id: Option<i64>,
    pub centerline_dist_m: Option<f64>,
    /// Diagnostic `key=value` strings from the labeler.
    pub flags: Vec<String>,
}

pub const CSV_HEADER: [&str; 15] = [
    "pano_id",
    "lat_deg",
    "lon_deg",
    "heading_deg",
    "yaw_offset_deg",
    "heading_angle_deg",
    "drivable_heading",
    "intersection_ahead",
    "distance_to_intersection_m",
    "num_lanes",
    "wrong_way",
    "bike_lane",
    "way_id",
    "centerline_dist_m",
    "flags",
];

impl ManifestRow {
    /// Builds a row from a pose and its label record. Angles are stored in
    /// degrees; the record's radians are converted here.
    pub fn new(pose: &CameraPose, yaw_offset_deg: f64, record: &AffordanceRecord) -> ManifestRow {
        ManifestRow {
            pano_id: pose.pano_id.clone(),
            lat_deg: pose.pos.lat_deg(),
            lon_deg: pose.pos.lon_deg(),
            heading_deg: pose.heading.degrees(),
            yaw_offset_deg,
            heading_angle_deg: record.heading_angle.map(f64::to_degrees),
            drivable_heading: record.drivable_heading,
            intersection_ahead: record.intersection_ahead,
            distance_to_intersection_m: record.distance_to_intersection_m,
            num_lanes: record.num_lanes,
            wrong_way: record.wrong_way,
            bike_lane: record.bike_lane,
            way_id: record.matched.as_ref().map(|m| m.way_id),
            centerline_dist_m: record.matched.as_ref().map(|m| m.centerline_dist_m),
            flags: record.diagnostics.iter().map(|(k, v)| format!("{k}={v}")).collect(),
        }
    }

    pub fn is_matched(&self) -> bool {
        self.way_id.is_some()
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }
}

/// Writes rows as JSON lines in manifest field order.
pub fn write_manifest_jsonl<W: Write>(mut w: W, rows: &[ManifestRow]) -> Result<(), ManifestError> {
    for row in rows {
        serde_json::to_writer(&mut w, row).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a JSON-lines manifest; blank lines are ignored, malformed lines
/// are errors carrying their line number.
pub fn read_manifest_jsonl<R: Read>(r: R) -> Result<Vec<ManifestRow>, ManifestError> {
    let reader = BufReader::new(r);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .map_err(|e| ManifestError::Parse { line: i + 1, message: e.to_string() })?;
        rows.push(row);
    }
    Ok(rows)
}

fn csv_opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

/// Writes rows as CSV with the same columns and order as the JSON form.
/// Absent values become empty cells; flags are joined with `;`.
pub fn write_manifest_csv<W: Write>(w: W, rows: &[ManifestRow]) -> Result<(), ManifestError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(CSV_HEADER)?;
    for row in rows {
        wtr.write_record([
            row.pano_id.clone(),
            row.lat_deg.to_string(),
            row.lon_deg.to_string(),
            row.heading_deg.to_string(),
            row.yaw_offset_deg.to_string(),
            csv_opt(&row.heading_angle_deg),
            csv_opt(&row.drivable_heading),
            row.intersection_ahead.map(|v| v.as_str().to_string()).unwrap_or_default(),
            csv_opt(&row.distance_to_intersection_m),
            csv_opt(&row.num_lanes),
            csv_opt(&row.wrong_way),
            csv_opt(&row.bike_lane),
            csv_opt(&row.way_id),
            csv_opt(&row.centerline_dist_m),
            row.flags.join(";"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Which rows survive into a training manifest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FilterPolicy {
    /// Drop rows the matcher could not place on any road.
    pub drop_unmatched: bool,
    /// Drop rows whose intersection label fell in the ambiguous band.
    pub drop_ambiguous: bool,
    /// Drop rows flagged as perpendicular matches.
    pub drop_perpendicular: bool,
    /// Keep only rows whose lane count lies in this inclusive range;
    /// rows without a lane count are dropped when a range is set.
    pub lane_range: Option<(u32, u32)>,
}

impl Default for FilterPolicy {
    fn default() -> FilterPolicy {
        FilterPolicy {
            drop_unmatched: true,
            drop_ambiguous: true,
            drop_perpendicular: true,
            lane_range: None,
        }
    }
}

impl FilterPolicy {
    pub fn keeps(&self, row: &ManifestRow) -> bool {
        if self.drop_unmatched && !row.is_matched() {
            return false;
        }
        if self.drop_ambiguous && row.intersection_ahead == Some(IntersectionAhead::Ambiguous) {
            return false;
        }
        if self.drop_perpendicular && row.has_flag("perpendicular_match=true") {
            return false;
        }
        if let Some((lo, hi)) = self.lane_range {
            match row.num_lanes {
                Some(n) if (lo..=hi).contains(&n) => {}
                _ => return false,
            }
        }
        true
    }
}

/// Keeps the subset of rows the policy allows, in input order, unmodified.
pub fn apply_filter(rows: &[ManifestRow], policy: &FilterPolicy) -> Vec<ManifestRow> {
    rows.iter().filter(|r| policy.keeps(r)).cloned().collect()
}

/// Train/val/test split parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub ratios: [f64; 3],
    pub seed: u64,
    pub block_size_m: f64,
}

impl SplitSpec {
    pub fn new(ratios: [f64; 3], seed: u64, block_size_m: f64) -> Result<SplitSpec, ManifestError> {
        let sum: f64 = ratios.iter().sum();
        let each_ok = ratios.iter().all(|r| r.is_finite() && (0.0..=1.0).contains(r));
        if !each_ok || (sum - 1.0).abs() > 1e-9 {
            return Err(ManifestError::BadRatios(ratios));
        }
        if !(block_size_m.is_finite() && block_size_m > 0.0) {
            return Err(ManifestError::BadBlockSize(block_size_m));
        }
        Ok(SplitSpec { ratios, seed, block_size_m })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train: Vec<ManifestRow>,
    pub val: Vec<ManifestRow>,
    pub test: Vec<ManifestRow>,
}

/// Spatial block containing a coordinate: degrees scaled to equatorial
/// meters and quantized at the block size. The constant meter-per-degree
/// scale keeps the quantization seam-free across latitudes.
pub fn block_key(lat_deg: f64, lon_deg: f64, block_size_m: f64) -> (i64, i64) {
    let meters_per_deg = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    (
        (lon_deg * meters_per_deg / block_size_m).floor() as i64,
        (lat_deg * meters_per_deg / block_size_m).floor() as i64,
    )
}

/// Partitions rows into train/val/test by spatial block.
///
/// Blocks are shuffled with a seeded generator, then assigned greedily:
/// a block goes to train while train is short of its row-count target,
/// then to val likewise, then to test. Every row of a block lands in the
/// same split, so splits are disjoint at block granularity.
pub fn split_rows(rows: &[ManifestRow], spec: &SplitSpec) -> Result<SplitResult, ManifestError> {
    SplitSpec::new(spec.ratios, spec.seed, spec.block_size_m)?;
    let mut blocks: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, row) in rows.iter().enumerate() {
        blocks
            .entry(block_key(row.lat_deg, row.lon_deg, spec.block_size_m))
            .or_default()
            .push(i);
    }
    let mut keys: Vec<(i64, i64)> = blocks.keys().copied().collect();
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    keys.shuffle(&mut rng);

    let total = rows.len() as f64;
    let target_train = spec.ratios[0] * total;
    let target_val = spec.ratios[1] * total;
    let mut assignment = vec![2u8; rows.len()];
    let (mut train_count, mut val_count) = (0usize, 0usize);
    for key in keys {
        let members = &blocks[&key];
        let dest = if (train_count as f64) < target_train {
            0
        } else if (val_count as f64) < target_val {
            1
        } else {
            2
        };
        match dest {
            0 => train_count += members.len(),
            1 => val_count += members.len(),
            _ => {}
        }
        for &i in members {
            assignment[i] = dest;
        }
    }

    let mut result = SplitResult { train: Vec::new(), val: Vec::new(), test: Vec::new() };
    for (i, row) in rows.iter().enumerate() {
        match assignment[i] {
            0 => result.train.push(row.clone()),
            1 => result.val.push(row.clone()),
            _ => result.test.push(row.clone()),
        }
    }
    Ok(result)
}
