//! Shared fixtures for unit tests: synthetic networks laid out in local
//! meters near (0°, 0°), where the planar frame is exact in scale.

use std::collections::BTreeMap;

use crate::geo::{Bearing, GeoPoint, EARTH_RADIUS_M};
use crate::osm::{extract_road_network, OsmNode, OsmWay, RoadNetwork, DEFAULT_HIGHWAY_ALLOWLIST};
use crate::pose::CameraPose;

/// Geographic point at the given local-frame meters from (0°, 0°).
pub fn geo_at(east: f64, north: f64) -> GeoPoint {
    GeoPoint::new(north / EARTH_RADIUS_M, east / EARTH_RADIUS_M).unwrap()
}

/// Builds a network from ways given as (east, north) meter polylines.
/// Every way gets `highway=residential` unless the tag list overrides it;
/// nodes are numbered sequentially per way, so ways never share nodes.
pub fn network_from_local(ways_m: &[(&[(f64, f64)], &[(&str, &str)])]) -> RoadNetwork {
    let specs: Vec<(Vec<(i64, f64, f64)>, Vec<(String, String)>)> = {
        let mut next_node = 1i64;
        ways_m
            .iter()
            .map(|(poly, tags)| {
                let nodes: Vec<(i64, f64, f64)> = poly
                    .iter()
                    .map(|(e, n)| {
                        let id = next_node;
                        next_node += 1;
                        (id, *e, *n)
                    })
                    .collect();
                let tags = tags
                    .iter()
                    .map(|(k, v)| (k.to_string(), v.to_string()))
                    .collect();
                (nodes, tags)
            })
            .collect()
    };
    let shaped: Vec<(&[(i64, f64, f64)], &[(String, String)])> = specs
        .iter()
        .map(|(nodes, tags)| (nodes.as_slice(), tags.as_slice()))
        .collect();
    network_from_shared_nodes(&shaped)
}

/// Builds a network from ways whose nodes carry explicit ids, allowing two
/// ways to share a node (and so form intersections). Node entries are
/// `(id, east_m, north_m)`; the first occurrence of an id fixes its
/// position.
pub fn network_from_shared_nodes(
    ways: &[(&[(i64, f64, f64)], &[(String, String)])],
) -> RoadNetwork {
    let mut nodes: Vec<OsmNode> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut osm_ways = Vec::new();
    for (wi, (poly, tags)) in ways.iter().enumerate() {
        let mut node_ids = Vec::new();
        for (id, east, north) in poly.iter() {
            if seen.insert(*id) {
                nodes.push(OsmNode {
                    id: *id,
                    pos: geo_at(*east, *north),
                });
            }
            node_ids.push(*id);
        }
        let mut tag_map: BTreeMap<String, String> = tags.iter().cloned().collect();
        tag_map
            .entry("highway".to_string())
            .or_insert_with(|| "residential".to_string());
        osm_ways.push(OsmWay {
            id: 100 + wi as i64,
            node_ids,
            tags: tag_map,
        });
    }
    extract_road_network(nodes, osm_ways, &DEFAULT_HIGHWAY_ALLOWLIST).0
}

/// Camera pose at local-frame meters with the given heading (radians,
/// clockwise from north).
pub fn pose_at(east: f64, north: f64, heading_rad: f64) -> CameraPose {
    CameraPose::new("p", geo_at(east, north), Bearing::from_radians(heading_rad))
}
