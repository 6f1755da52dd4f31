//! The seven per-pose driving affordances derived from a road-network match.
//!
//! Everything here is pure: a pose, its match, the immutable network, and a
//! config in; labels out. Poses can be labeled in parallel without shared
//! state.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::geo::{angle_diff, haversine_distance};
use crate::index::{MatchConfig, MatchResult, SegmentIndex, TravelDirection};
use crate::osm::{bike_lane_present, lane_count, Direction, RoadAttributes, RoadNetwork};
use crate::pose::CameraPose;

/// Ternary intersection-ahead label. `Ambiguous` marks the distance band
/// between the true and false thresholds; manifest policy decides whether
/// those rows train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum IntersectionAhead {
    #[serde(rename = "true")]
    Yes,
    #[serde(rename = "false")]
    No,
    #[serde(rename = "ambiguous")]
    Ambiguous,
}

impl IntersectionAhead {
    pub fn as_str(&self) -> &'static str {
        match self {
            IntersectionAhead::Yes => "true",
            IntersectionAhead::No => "false",
            IntersectionAhead::Ambiguous => "ambiguous",
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid label config: {0}")]
pub struct ConfigError(pub String);

/// Thresholds for the label rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelConfig {
    /// Heading residual bound for a drivable heading.
    pub drivable_angle_rad: f64,
    /// Distances at or below this are a definite intersection ahead.
    pub intersection_true_m: f64,
    /// Distances above this (or no intersection found) are definitely not.
    pub intersection_false_m: f64,
    /// How far the intersection walk extends before giving up.
    pub max_search_m: f64,
    /// Minimum road continuation ahead for a drivable heading.
    pub min_continuation_m: f64,
    pub right_hand_traffic: bool,
}

impl Default for LabelConfig {
    fn default() -> LabelConfig {
        LabelConfig {
            drivable_angle_rad: 22.5_f64.to_radians(),
            intersection_true_m: 30.0,
            intersection_false_m: 100.0,
            max_search_m: 150.0,
            min_continuation_m: 15.0,
            right_hand_traffic: true,
        }
    }
}

impl LabelConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            self.drivable_angle_rad,
            self.intersection_true_m,
            self.intersection_false_m,
            self.max_search_m,
            self.min_continuation_m,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(ConfigError("thresholds must be finite".into()));
        }
        if self.drivable_angle_rad <= 0.0 {
            return Err(ConfigError("drivable angle must be positive".into()));
        }
        if self.min_continuation_m < 0.0 {
            return Err(ConfigError("min continuation must be non-negative".into()));
        }
        if !(0.0 < self.intersection_true_m
            && self.intersection_true_m < self.intersection_false_m
            && self.intersection_false_m <= self.max_search_m)
        {
            return Err(ConfigError(
                "need 0 < intersection-true < intersection-false <= max-search".into(),
            ));
        }
        Ok(())
    }
}

/// Labels for one pose, plus the match that produced them. An unmatched
/// pose carries no labels and a `reason` diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct AffordanceRecord {
    pub heading_angle: Option<f64>,
    pub drivable_heading: Option<bool>,
    pub intersection_ahead: Option<IntersectionAhead>,
    pub distance_to_intersection_m: Option<f64>,
    pub num_lanes: Option<u32>,
    pub wrong_way: Option<bool>,
    pub bike_lane: Option<bool>,
    pub matched: Option<MatchResult>,
    pub diagnostics: BTreeMap<String, String>,
}

impl AffordanceRecord {
    fn unmatched() -> AffordanceRecord {
        let mut diagnostics = BTreeMap::new();
        diagnostics.insert("reason".to_string(), "no_match".to_string());
        AffordanceRecord {
            heading_angle: None,
            drivable_heading: None,
            intersection_ahead: None,
            distance_to_intersection_m: None,
            num_lanes: None,
            wrong_way: None,
            bike_lane: None,
            matched: None,
            diagnostics,
        }
    }

    pub fn is_matched(&self) -> bool {
        self.matched.is_some()
    }
}

fn travel_as_direction(dir: TravelDirection) -> Direction {
    match dir {
        TravelDirection::Forward => Direction::Forward,
        TravelDirection::Backward => Direction::Backward,
    }
}

/// Signed residual between the camera heading and the travel direction of
/// the matched road; positive = camera rotated clockwise of the road.
pub fn heading_angle(pose: &CameraPose, m: &MatchResult) -> f64 {
    angle_diff(pose.heading.radians(), m.travel_bearing().radians())
}

/// Half-meter band around the centerline where GPS noise dominates the
/// side signal; wrong-way falls back to the heading-angle sign there.
const CENTERLINE_TIE_M: f64 = 0.5;

/// Whether the pose opposes legal flow: driving against a oneway, or on
/// the off side of a two-way road for the traffic-hand rule.
pub fn wrong_way(
    pose: &CameraPose,
    m: &MatchResult,
    attrs: &RoadAttributes,
    config: &LabelConfig,
) -> bool {
    if attrs.oneway {
        return angle_diff(pose.heading.radians(), m.segment_bearing.radians()).abs()
            > std::f64::consts::FRAC_PI_2;
    }
    let offset = m.offset_relative_to_travel();
    if offset.abs() < CENTERLINE_TIE_M {
        let ha = heading_angle(pose, m);
        return if config.right_hand_traffic { ha < 0.0 } else { ha > 0.0 };
    }
    if config.right_hand_traffic {
        offset < 0.0
    } else {
        offset > 0.0
    }
}

fn used_centerline_tiebreak(m: &MatchResult, attrs: &RoadAttributes) -> bool {
    !attrs.oneway && m.offset_relative_to_travel().abs() < CENTERLINE_TIE_M
}

/// Ternary decision from a walked intersection distance.
pub fn intersection_ahead(distance_m: Option<f64>, config: &LabelConfig) -> IntersectionAhead {
    match distance_m {
        Some(d) if d <= config.intersection_true_m => IntersectionAhead::Yes,
        Some(d) if d <= config.intersection_false_m => IntersectionAhead::Ambiguous,
        _ => IntersectionAhead::No,
    }
}

/// Distance between two nodes of the network, by id.
fn node_gap_m(network: &RoadNetwork, a: i64, b: i64) -> f64 {
    match (network.node_pos(a), network.node_pos(b)) {
        (Some(pa), Some(pb)) => haversine_distance(pa, pb),
        _ => 0.0,
    }
}

/// Index of the matched segment instance in `network.segments`.
fn matched_segment_idx(network: &RoadNetwork, m: &MatchResult) -> Option<usize> {
    network
        .incident_segments(m.node_a)
        .iter()
        .copied()
        .find(|&i| {
            let s = &network.segments[i];
            s.way_id == m.way_id && s.node_a == m.node_a && s.node_b == m.node_b
        })
}

/// First node ahead of the projected point and the arc length to it.
fn first_hop(network: &RoadNetwork, m: &MatchResult) -> (i64, f64) {
    let len = node_gap_m(network, m.node_a, m.node_b);
    match m.travel_direction {
        TravelDirection::Forward => (m.node_b, (1.0 - m.t) * len),
        TravelDirection::Backward => (m.node_a, m.t * len),
    }
}

fn way_name(network: &RoadNetwork, way_id: i64) -> Option<&str> {
    network
        .ways
        .get(&way_id)
        .and_then(|rw| rw.attrs.name.as_deref())
        .filter(|name| !name.is_empty())
}

/// Iteration bound for walks; road lengths are positive, so distance grows
/// every step and this only guards against degenerate float accumulation.
const WALK_STEP_LIMIT: usize = 1_000_000;

/// Arc distance from the projected point to the first intersection node
/// reached by walking the matched way in the travel direction, continuing
/// at degree-2 joints only into the same way or a way sharing its
/// (non-empty) name. `None` when no intersection lies within
/// `config.max_search_m` along that walk.
pub fn distance_to_intersection(
    m: &MatchResult,
    network: &RoadNetwork,
    config: &LabelConfig,
) -> Option<f64> {
    if m.t == 0.0 && network.intersections.contains(&m.node_a) {
        return Some(0.0);
    }
    if m.t == 1.0 && network.intersections.contains(&m.node_b) {
        return Some(0.0);
    }

    let start = matched_segment_idx(network, m)?;
    let (mut exit, mut cum) = first_hop(network, m);
    let mut cur = start;

    for _ in 0..WALK_STEP_LIMIT {
        if cum > config.max_search_m {
            return None;
        }
        if network.intersections.contains(&exit) {
            return Some(cum);
        }
        let cands: Vec<usize> = network
            .incident_segments(exit)
            .iter()
            .copied()
            .filter(|&i| i != cur)
            .collect();
        let &[next] = cands.as_slice() else {
            return None;
        };
        let next_seg = &network.segments[next];
        if next_seg.way_id != network.segments[cur].way_id {
            let same_name = matches!(
                (way_name(network, network.segments[cur].way_id), way_name(network, next_seg.way_id)),
                (Some(a), Some(b)) if a == b
            );
            if !same_name {
                return None;
            }
        }
        exit = if next_seg.node_a == exit { next_seg.node_b } else { next_seg.node_a };
        cum += next_seg.length_m;
        cur = next;
    }
    None
}

/// Depth bound for the continuation search; at road scale the budget is
/// exhausted within a handful of hops.
const CONTINUATION_DEPTH_LIMIT: usize = 4096;

fn continuation_reaches(
    network: &RoadNetwork,
    via: usize,
    node: i64,
    remaining: f64,
    depth: usize,
) -> bool {
    if remaining <= 0.0 {
        return true;
    }
    if depth == 0 {
        return false;
    }
    for &i in network.incident_segments(node) {
        if i == via {
            continue;
        }
        let seg = &network.segments[i];
        let next = if seg.node_a == node { seg.node_b } else { seg.node_a };
        if continuation_reaches(network, i, next, remaining - seg.length_m, depth - 1) {
            return true;
        }
    }
    false
}

/// True when the road graph, walked from the projected point in the travel
/// direction (never reversing onto the arriving segment, branching freely
/// through joints and intersections), extends at least
/// `config.min_continuation_m`.
pub fn road_continues(m: &MatchResult, network: &RoadNetwork, config: &LabelConfig) -> bool {
    let Some(start) = matched_segment_idx(network, m) else {
        return false;
    };
    let (exit, first_arc) = first_hop(network, m);
    let remaining = config.min_continuation_m - first_arc;
    if remaining <= 0.0 {
        return true;
    }
    continuation_reaches(network, start, exit, remaining, CONTINUATION_DEPTH_LIMIT)
}

/// A heading the vehicle could actually follow: small heading residual and
/// enough road ahead.
pub fn drivable_heading(
    pose: &CameraPose,
    m: &MatchResult,
    network: &RoadNetwork,
    config: &LabelConfig,
) -> bool {
    heading_angle(pose, m).abs() <= config.drivable_angle_rad
        && road_continues(m, network, config)
}

/// Matches the pose and computes all seven labels. Never fails: an
/// unmatched pose yields a record with every label absent and
/// `diagnostics["reason"] = "no_match"`.
pub fn label_pose(
    pose: &CameraPose,
    network: &RoadNetwork,
    index: &SegmentIndex,
    match_config: &MatchConfig,
    config: &LabelConfig,
) -> AffordanceRecord {
    let Some(m) = index.nearest_segment(pose, match_config) else {
        return AffordanceRecord::unmatched();
    };
    let Some(road_way) = network.ways.get(&m.way_id) else {
        return AffordanceRecord::unmatched();
    };
    let attrs = &road_way.attrs;
    let dir = travel_as_direction(m.travel_direction);

    let mut diagnostics = BTreeMap::new();
    if m.perpendicular {
        diagnostics.insert("perpendicular_match".to_string(), "true".to_string());
    }
    if used_centerline_tiebreak(&m, attrs) {
        diagnostics.insert("centerline_tiebreak".to_string(), "true".to_string());
    }

    let distance = distance_to_intersection(&m, network, config);
    AffordanceRecord {
        heading_angle: Some(heading_angle(pose, &m)),
        drivable_heading: Some(drivable_heading(pose, &m, network, config)),
        intersection_ahead: Some(intersection_ahead(distance, config)),
        distance_to_intersection_m: distance,
        num_lanes: lane_count(attrs, dir),
        wrong_way: Some(wrong_way(pose, &m, attrs, config)),
        bike_lane: Some(bike_lane_present(attrs, dir, config.right_hand_traffic)),
        matched: Some(m),
        diagnostics,
    }
}
