//! Uniform-grid spatial index and heading-aware pose-to-segment matching.
//!
//! All geometry lives in one planar local frame anchored at the network's
//! bounding-box center, so grid lookups and the brute-force distance scan
//! agree bit for bit. The frame is an equirectangular approximation; keep
//! networks within about 5 km of their center (city-district scale) for
//! metric fidelity.

use std::collections::HashMap;

use crate::geo::{angle_diff, initial_bearing, project_point_to_segment, to_local, Bearing,
                 GeoPoint, LocalVec};
use crate::osm::RoadNetwork;
use crate::pose::CameraPose;

pub const DEFAULT_CELL_SIZE_M: f64 = 50.0;
pub const DEFAULT_MAX_MATCH_DIST_M: f64 = 25.0;
pub const DEFAULT_HEADING_WEIGHT_M_PER_RAD: f64 = 5.0;

/// Matching knobs. `heading_weight_m_per_rad = 0` reduces the score to pure
/// nearest-distance matching.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub max_match_dist_m: f64,
    pub heading_weight_m_per_rad: f64,
}

impl Default for MatchConfig {
    fn default() -> MatchConfig {
        MatchConfig {
            max_match_dist_m: DEFAULT_MAX_MATCH_DIST_M,
            heading_weight_m_per_rad: DEFAULT_HEADING_WEIGHT_M_PER_RAD,
        }
    }
}

/// Travel orientation along a matched segment relative to its node order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TravelDirection {
    Forward,
    Backward,
}

/// A road segment prepared for planar queries.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedSegment {
    pub way_id: i64,
    pub node_a: i64,
    pub node_b: i64,
    pub a: LocalVec,
    pub b: LocalVec,
    /// Great-circle bearing of the a→b node order.
    pub bearing: Bearing,
    /// Haversine length from the source network.
    pub length_m: f64,
}

/// Outcome of matching one pose against the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub way_id: i64,
    pub node_a: i64,
    pub node_b: i64,
    /// Position of the projected point along a→b, in [0, 1].
    pub t: f64,
    /// Signed distance to the projected point; positive = pose right of
    /// the a→b direction. Collinear poses beyond an endpoint count as
    /// right side.
    pub lateral_offset_m: f64,
    pub segment_bearing: Bearing,
    pub travel_direction: TravelDirection,
    pub centerline_dist_m: f64,
    /// Both travel orientations scored within ~1e-9 rad of perpendicular.
    pub perpendicular: bool,
}

impl MatchResult {
    /// Bearing of the chosen travel direction.
    pub fn travel_bearing(&self) -> Bearing {
        match self.travel_direction {
            TravelDirection::Forward => self.segment_bearing,
            TravelDirection::Backward => self.segment_bearing.opposite(),
        }
    }

    /// Lateral offset re-signed relative to the travel direction, so the
    /// physical side of the road reads the same whichever way the segment's
    /// nodes are ordered. Positive = pose right of the direction of travel.
    pub fn offset_relative_to_travel(&self) -> f64 {
        match self.travel_direction {
            TravelDirection::Forward => self.lateral_offset_m,
            TravelDirection::Backward => -self.lateral_offset_m,
        }
    }
}

/// Uniform grid over segment bounding boxes in the shared local frame.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    frame_origin: GeoPoint,
    cell_size_m: f64,
    grid: HashMap<(i64, i64), Vec<usize>>,
    segments: Vec<IndexedSegment>,
}

fn cell_of(v: f64, cell_size: f64) -> i64 {
    (v / cell_size).floor() as i64
}

impl SegmentIndex {
    /// Builds the index with the frame anchored at the bounding-box center
    /// of the network's segment endpoints.
    pub fn build(network: &RoadNetwork, cell_size_m: f64) -> SegmentIndex {
        let cell_size_m = if cell_size_m > 0.0 { cell_size_m } else { DEFAULT_CELL_SIZE_M };
        let mut lat_range: Option<(f64, f64)> = None;
        let mut lon_range: Option<(f64, f64)> = None;
        for seg in &network.segments {
            for id in [seg.node_a, seg.node_b] {
                let Some(pos) = network.node_pos(id) else { continue };
                let widen = |range: &mut Option<(f64, f64)>, v: f64| {
                    *range = Some(match *range {
                        None => (v, v),
                        Some((lo, hi)) => (lo.min(v), hi.max(v)),
                    });
                };
                widen(&mut lat_range, pos.lat());
                widen(&mut lon_range, pos.lon());
            }
        }
        let frame_origin = match (lat_range, lon_range) {
            (Some((lat_lo, lat_hi)), Some((lon_lo, lon_hi))) => {
                GeoPoint::new((lat_lo + lat_hi) / 2.0, (lon_lo + lon_hi) / 2.0)
                    .expect("bbox center of valid points is valid")
            }
            _ => GeoPoint::new(0.0, 0.0).expect("origin"),
        };

        let mut segments = Vec::new();
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for seg in &network.segments {
            let (Some(pa), Some(pb)) = (network.node_pos(seg.node_a), network.node_pos(seg.node_b))
            else {
                continue;
            };
            let Ok(bearing) = initial_bearing(pa, pb) else { continue };
            let a = to_local(&frame_origin, pa);
            let b = to_local(&frame_origin, pb);
            let idx = segments.len();
            segments.push(IndexedSegment {
                way_id: seg.way_id,
                node_a: seg.node_a,
                node_b: seg.node_b,
                a,
                b,
                bearing,
                length_m: seg.length_m,
            });
            let (x0, x1) = (cell_of(a.east.min(b.east), cell_size_m),
                            cell_of(a.east.max(b.east), cell_size_m));
            let (y0, y1) = (cell_of(a.north.min(b.north), cell_size_m),
                            cell_of(a.north.max(b.north), cell_size_m));
            for cx in x0..=x1 {
                for cy in y0..=y1 {
                    grid.entry((cx, cy)).or_default().push(idx);
                }
            }
        }

        SegmentIndex {
            frame_origin,
            cell_size_m,
            grid,
            segments,
        }
    }

    pub fn frame_origin(&self) -> &GeoPoint {
        &self.frame_origin
    }

    pub fn segments(&self) -> &[IndexedSegment] {
        &self.segments
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Projects a point into the index frame.
    pub fn to_frame(&self, p: &GeoPoint) -> LocalVec {
        to_local(&self.frame_origin, p)
    }

    /// Candidate segment indices whose grid cells intersect the square of
    /// half-width `radius` around `p`, sorted and deduplicated.
    fn candidates(&self, p: LocalVec, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        let (x0, x1) = (cell_of(p.east - radius, self.cell_size_m),
                        cell_of(p.east + radius, self.cell_size_m));
        let (y0, y1) = (cell_of(p.north - radius, self.cell_size_m),
                        cell_of(p.north + radius, self.cell_size_m));
        for cx in x0..=x1 {
            for cy in y0..=y1 {
                if let Some(list) = self.grid.get(&(cx, cy)) {
                    out.extend_from_slice(list);
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Segments whose minimum frame distance to `p` is ≤ `radius_m`,
    /// ordered by (way_id, node_a, node_b).
    pub fn segments_within(&self, p: &GeoPoint, radius_m: f64) -> Vec<&IndexedSegment> {
        let pl = self.to_frame(p);
        let mut hits: Vec<&IndexedSegment> = self
            .candidates(pl, radius_m)
            .into_iter()
            .map(|i| &self.segments[i])
            .filter(|seg| {
                project_point_to_segment(&pl, &seg.a, &seg.b)
                    .map(|(_, _, dist)| dist <= radius_m)
                    .unwrap_or(false)
            })
            .collect();
        hits.sort_by_key(|seg| (seg.way_id, seg.node_a, seg.node_b));
        hits
    }

    /// Matches a pose to the best segment within `config.max_match_dist_m`.
    ///
    /// Score = centerline distance + heading weight × the smaller absolute
    /// heading residual over the two segment orientations. Ties break by
    /// (way_id, node_a, node_b) so results are reproducible.
    pub fn nearest_segment(&self, pose: &CameraPose, config: &MatchConfig) -> Option<MatchResult> {
        let pl = self.to_frame(&pose.pos);
        let heading = pose.heading.radians();
        let mut best: Option<(f64, &IndexedSegment, f64, f64)> = None;
        for i in self.candidates(pl, config.max_match_dist_m) {
            let seg = &self.segments[i];
            let Ok((_, t, dist)) = project_point_to_segment(&pl, &seg.a, &seg.b) else {
                continue;
            };
            if dist > config.max_match_dist_m {
                continue;
            }
            let fwd = angle_diff(heading, seg.bearing.radians()).abs();
            let back = angle_diff(heading, seg.bearing.opposite().radians()).abs();
            let score = dist + config.heading_weight_m_per_rad * fwd.min(back);
            let better = match &best {
                None => true,
                Some((best_score, best_seg, _, _)) => {
                    (score, seg.way_id, seg.node_a, seg.node_b)
                        < (*best_score, best_seg.way_id, best_seg.node_a, best_seg.node_b)
                }
            };
            if better {
                best = Some((score, seg, t, dist));
            }
        }
        let (_, seg, t, dist) = best?;
        Some(self.finish_match(pl, seg, t, dist, heading))
    }

    fn finish_match(
        &self,
        pl: LocalVec,
        seg: &IndexedSegment,
        t: f64,
        dist: f64,
        heading: f64,
    ) -> MatchResult {
        let fwd = angle_diff(heading, seg.bearing.radians()).abs();
        let back = angle_diff(heading, seg.bearing.opposite().radians()).abs();
        let axis = seg.b.sub(&seg.a);
        let side = axis.cross(&pl.sub(&seg.a));
        // side > 0 means pose left of a→b; positive lateral means right
        let lateral = if side > 0.0 { -dist } else { dist };

        let perpendicular = (fwd - back).abs() < 1e-9;
        let travel_direction = if perpendicular {
            // orient the road so the pose sits left of travel; deterministic
            // and flagged for downstream policy
            if lateral <= 0.0 {
                TravelDirection::Forward
            } else {
                TravelDirection::Backward
            }
        } else if fwd <= back {
            TravelDirection::Forward
        } else {
            TravelDirection::Backward
        };

        MatchResult {
            way_id: seg.way_id,
            node_a: seg.node_a,
            node_b: seg.node_b,
            t,
            lateral_offset_m: lateral,
            segment_bearing: seg.bearing,
            travel_direction,
            centerline_dist_m: dist,
            perpendicular,
        }
    }
}
