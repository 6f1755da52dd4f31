//! OSM document model and drivable road-network extraction.
//!
//! The parser ([`parse_osm_xml`]) produces raw nodes and ways; extraction
//! filters to drivable highway classes, decomposes polylines into segments
//! with haversine lengths, parses per-way road attributes, and marks
//! intersection nodes.

mod tags;
mod xml;

use std::collections::{BTreeMap, BTreeSet, HashMap};

pub use tags::{lane_count, bike_lane_present, Direction, RoadAttributes};
pub use xml::{parse_osm_xml, write_osm_xml, OsmError, ParseWarnings, ParsedOsm};

use crate::geo::{haversine_distance, GeoPoint};

/// A tagged coordinate point from an OSM document.
#[derive(Debug, Clone, PartialEq)]
pub struct OsmNode {
    pub id: i64,
    pub pos: GeoPoint,
}

/// An ordered node list with key/value tags.
#[derive(Debug, Clone, PartialEq)]
pub struct OsmWay {
    pub id: i64,
    pub node_ids: Vec<i64>,
    pub tags: BTreeMap<String, String>,
}

impl OsmWay {
    pub fn tag(&self, key: &str) -> Option<&str> {
        self.tags.get(key).map(String::as_str)
    }
}

/// One consecutive-node piece of a way, in way node order.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub way_id: i64,
    pub node_a: i64,
    pub node_b: i64,
    pub length_m: f64,
}

/// A kept way together with its parsed road attributes.
#[derive(Debug, Clone)]
pub struct RoadWay {
    pub way: OsmWay,
    pub attrs: RoadAttributes,
}

/// The extracted drivable road network.
///
/// Immutable after extraction; safe to share across threads for reads.
#[derive(Debug, Clone, Default)]
pub struct RoadNetwork {
    pub nodes: HashMap<i64, OsmNode>,
    pub ways: BTreeMap<i64, RoadWay>,
    pub segments: Vec<Segment>,
    pub intersections: BTreeSet<i64>,
    incidence: HashMap<i64, Vec<usize>>,
}

impl RoadNetwork {
    pub fn node_pos(&self, id: i64) -> Option<&GeoPoint> {
        self.nodes.get(&id).map(|n| &n.pos)
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    /// Indices into `segments` of every segment touching `node`.
    pub fn incident_segments(&self, node: i64) -> &[usize] {
        self.incidence.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn build_incidence(segments: &[Segment]) -> HashMap<i64, Vec<usize>> {
    let mut map: HashMap<i64, Vec<usize>> = HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        map.entry(seg.node_a).or_default().push(i);
        map.entry(seg.node_b).or_default().push(i);
    }
    map
}

/// Counters reported alongside extraction.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractStats {
    pub ways_kept: usize,
    pub ways_excluded: usize,
    pub lane_tag_conflicts: usize,
    pub degenerate_segments: usize,
}

/// Highway classes kept by default: drivable roads plus their `_link` ramps.
pub const DEFAULT_HIGHWAY_ALLOWLIST: [&str; 8] = [
    "motorway",
    "trunk",
    "primary",
    "secondary",
    "tertiary",
    "residential",
    "unclassified",
    "service",
];

/// Accepts a `highway` tag value against an allowlist of base classes.
fn class_allowed(value: &str, allowlist: &[&str]) -> bool {
    allowlist.iter().any(|base| {
        value == *base
            || (value.strip_suffix("_link").map(|v| v == *base)).unwrap_or(false)
    })
}

/// Builds the road network from parsed nodes and ways.
///
/// Keeps only ways whose `highway` tag is in `allowlist` (pass
/// [`DEFAULT_HIGHWAY_ALLOWLIST`] for the standard set). Ways tagged
/// `oneway=-1` are normalized: node order reversed, direction-sensitive
/// attributes swapped, so forward always means legal travel direction.
pub fn extract_road_network(
    nodes: Vec<OsmNode>,
    ways: Vec<OsmWay>,
    allowlist: &[&str],
) -> (RoadNetwork, ExtractStats) {
    let mut stats = ExtractStats::default();
    let node_map: HashMap<i64, OsmNode> = nodes.into_iter().map(|n| (n.id, n)).collect();

    let mut kept_ways = BTreeMap::new();
    let mut segments = Vec::new();

    for mut way in ways {
        let allowed = way
            .tag("highway")
            .map(|hw| class_allowed(hw, allowlist))
            .unwrap_or(false);
        if !allowed {
            stats.ways_excluded += 1;
            continue;
        }
        let (attrs, reversed, warnings) = RoadAttributes::from_tags(&way.tags);
        stats.lane_tag_conflicts += warnings;
        if reversed {
            way.node_ids.reverse();
            way.tags.insert("oneway".to_string(), "yes".to_string());
        }
        for pair in way.node_ids.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            // parse guarantees refs resolve; guard anyway for direct callers
            let (Some(na), Some(nb)) = (node_map.get(&a), node_map.get(&b)) else {
                stats.degenerate_segments += 1;
                continue;
            };
            let length_m = haversine_distance(&na.pos, &nb.pos);
            if length_m <= 0.0 {
                stats.degenerate_segments += 1;
                continue;
            }
            segments.push(Segment {
                way_id: way.id,
                node_a: a,
                node_b: b,
                length_m,
            });
        }
        stats.ways_kept += 1;
        kept_ways.insert(way.id, RoadWay { way, attrs });
    }

    let intersections = detect_intersections(&segments);
    let incidence = build_incidence(&segments);
    (
        RoadNetwork {
            nodes: node_map,
            ways: kept_ways,
            segments,
            intersections,
            incidence,
        },
        stats,
    )
}

/// A node is an intersection iff it terminates ≥3 segments coming from ≥2
/// distinct ways. Degree-2 polyline joints never qualify.
pub fn detect_intersections(segments: &[Segment]) -> BTreeSet<i64> {
    let mut incident: HashMap<i64, (usize, BTreeSet<i64>)> = HashMap::new();
    for seg in segments {
        for node in [seg.node_a, seg.node_b] {
            let entry = incident.entry(node).or_default();
            entry.0 += 1;
            entry.1.insert(seg.way_id);
        }
    }
    incident
        .into_iter()
        .filter(|(_, (count, ways))| *count >= 3 && ways.len() >= 2)
        .map(|(node, _)| node)
        .collect()
}
