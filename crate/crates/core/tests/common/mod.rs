//! Shared fixtures for integration tests: a local-meter coordinate helper,
//! OSM builders, and a synthetic micro-city whose affordance labels are
//! derivable by hand from its construction.

use std::collections::BTreeMap;

use streetlabel::geo::{GeoPoint, EARTH_RADIUS_M};
use streetlabel::label::IntersectionAhead;
use streetlabel::osm::{extract_road_network, OsmNode, OsmWay, RoadNetwork, DEFAULT_HIGHWAY_ALLOWLIST};
use streetlabel::pose::CameraPose;

/// Maps flat local meters onto the globe near (0°, 0°): latitude carries
/// north, longitude carries east. At city scale the distortion is far
/// below test tolerances.
pub fn geo_at(east_m: f64, north_m: f64) -> GeoPoint {
    GeoPoint::new(north_m / EARTH_RADIUS_M, east_m / EARTH_RADIUS_M).unwrap()
}

pub fn node(id: i64, east_m: f64, north_m: f64) -> OsmNode {
    OsmNode { id, pos: geo_at(east_m, north_m) }
}

pub fn way(id: i64, node_ids: &[i64], tags: &[(&str, &str)]) -> OsmWay {
    let mut map: BTreeMap<String, String> = BTreeMap::new();
    for (k, v) in tags {
        map.insert(k.to_string(), v.to_string());
    }
    map.entry("highway".to_string()).or_insert_with(|| "residential".to_string());
    OsmWay { id, node_ids: node_ids.to_vec(), tags: map }
}

pub fn build_network(nodes: Vec<OsmNode>, ways: Vec<OsmWay>) -> RoadNetwork {
    extract_road_network(nodes, ways, &DEFAULT_HIGHWAY_ALLOWLIST).0
}

pub fn pose_at(id: &str, east_m: f64, north_m: f64, heading_deg: f64) -> CameraPose {
    CameraPose::new(
        id,
        geo_at(east_m, north_m),
        streetlabel::geo::Bearing::from_degrees(heading_deg),
    )
}

/// Expected labels for one pose, stated in the units `label_pose` emits.
pub struct TruthPose {
    pub pose: CameraPose,
    pub heading_angle_rad: f64,
    pub drivable: bool,
    pub intersection: IntersectionAhead,
    pub distance_m: Option<f64>,
    pub lanes: Option<u32>,
    pub wrong_way: bool,
    pub bike_lane: bool,
}

/// Cardinal travel along a street axis.
#[derive(Clone, Copy, PartialEq)]
enum Axis {
    EastWest,
    NorthSouth,
}

/// The crossings sit at 100, 300, 500, 700 along every grid street; each
/// street extends 100 m past the outer crossings.
const CROSSINGS: [f64; 4] = [100.0, 300.0, 500.0, 700.0];
const STREET_MIN: f64 = 0.0;
const STREET_MAX: f64 = 800.0;

/// Default walk budget for the intersection search; crossings further than
/// this along the road read as "none found". Pose placement keeps every
/// expected distance at least 2 m away from this and the other decision
/// boundaries so float noise cannot flip a label.
const MAX_SEARCH_M: f64 = 150.0;

struct Street {
    axis: Axis,
    /// Fixed coordinate of the street line (y for east-west, x for north-south).
    at: f64,
    /// Total lanes used for the per-direction truth.
    lanes_fwd: u32,
    lanes_back: u32,
    has_bike_lane: bool,
    crossings: bool,
}

/// Builds the micro-city road network together with ~500 poses whose seven
/// affordance labels follow from the construction:
///
/// * a grid of four east-west and four north-south two-way streets whose
///   crossings form 16 four-way intersections,
/// * a oneway three-lane avenue south of the grid (no shared nodes), and
/// * a bike-laned street further south (cycleway=lane, both curbs).
pub fn micro_city() -> (RoadNetwork, Vec<TruthPose>) {
    let mut nodes = Vec::new();
    let mut ways = Vec::new();

    let crossing_id = |i: usize, j: usize| 1000 + 10 * i as i64 + j as i64;

    // grid crossing nodes: i indexes the north-south street (x), j the
    // east-west street (y)
    for i in 0..4 {
        for j in 0..4 {
            nodes.push(node(crossing_id(i, j), CROSSINGS[i], CROSSINGS[j]));
        }
    }
    // east-west streets: west end, four crossings, east end
    for j in 0..4 {
        let y = CROSSINGS[j];
        let west = 2000 + 10 * j as i64;
        let east = west + 1;
        nodes.push(node(west, STREET_MIN, y));
        nodes.push(node(east, STREET_MAX, y));
        let ids: Vec<i64> = std::iter::once(west)
            .chain((0..4).map(|i| crossing_id(i, j)))
            .chain(std::iter::once(east))
            .collect();
        ways.push(way(
            100 + j as i64,
            &ids,
            &[("name", &format!("Row {j}")), ("lanes", "2")],
        ));
    }
    // north-south streets; street 0 carries asymmetric directional lanes
    for i in 0..4 {
        let x = CROSSINGS[i];
        let south = 3000 + 10 * i as i64;
        let north = south + 1;
        nodes.push(node(south, x, STREET_MIN));
        nodes.push(node(north, x, STREET_MAX));
        let ids: Vec<i64> = std::iter::once(south)
            .chain((0..4).map(|j| crossing_id(i, j)))
            .chain(std::iter::once(north))
            .collect();
        let name = format!("Column {i}");
        let mut tags: Vec<(&str, &str)> = vec![("name", &name), ("lanes", "4")];
        if i == 0 {
            tags.push(("lanes:forward", "3"));
            tags.push(("lanes:backward", "1"));
        }
        ways.push(way(200 + i as i64, &ids, &tags));
    }
    // oneway avenue south of the grid, with one interior shape node
    nodes.push(node(4000, STREET_MIN, -200.0));
    nodes.push(node(4001, 400.0, -200.0));
    nodes.push(node(4002, STREET_MAX, -200.0));
    ways.push(way(
        300,
        &[4000, 4001, 4002],
        &[
            ("highway", "primary"),
            ("name", "Oneway Avenue"),
            ("oneway", "yes"),
            ("lanes", "3"),
        ],
    ));
    // bike-laned street further south
    nodes.push(node(4100, STREET_MIN, -400.0));
    nodes.push(node(4101, STREET_MAX, -400.0));
    ways.push(way(
        400,
        &[4100, 4101],
        &[("name", "Bike Street"), ("lanes", "2"), ("cycleway", "lane")],
    ));

    let network = build_network(nodes, ways);

    let grid_streets: Vec<Street> = (0..4)
        .map(|j| Street {
            axis: Axis::EastWest,
            at: CROSSINGS[j],
            lanes_fwd: 1,
            lanes_back: 1,
            has_bike_lane: false,
            crossings: true,
        })
        .chain((0..4).map(|i| Street {
            axis: Axis::NorthSouth,
            at: CROSSINGS[i],
            lanes_fwd: if i == 0 { 3 } else { 2 },
            lanes_back: if i == 0 { 1 } else { 2 },
            has_bike_lane: false,
            crossings: true,
        }))
        .collect();

    let mut truths = Vec::new();
    let mut pose_no = 0usize;

    // mid-block sweeps: along-position steps of 45 m, alternating lateral
    // side and cycling heading offsets within the drivable cone
    let offsets_deg = [-10.0, -5.0, 0.0, 5.0, 10.0];
    for street in &grid_streets {
        for &forward in &[true, false] {
            let mut k = 0usize;
            let mut s = 17.0;
            while s <= 783.0 {
                let lateral = if k % 2 == 0 { -2.0 } else { 2.5 };
                let offset = offsets_deg[k % offsets_deg.len()];
                truths.push(street_truth(street, s, lateral, forward, offset, &mut pose_no));
                k += 1;
                s += 45.0;
            }
        }
    }
    // intersection-band poses on the east-west streets, traveling east:
    // 20 m (true), 50 m (ambiguous), 120 m (false) before each crossing
    for j in 0..4 {
        let street = &grid_streets[j];
        for c in CROSSINGS {
            for d in [20.0, 50.0, 120.0] {
                if c - d < 5.0 {
                    continue;
                }
                truths.push(street_truth(street, c - d, -2.0, true, 5.0, &mut pose_no));
            }
        }
    }
    // headings outside the drivable cone
    for street in &grid_streets {
        for &forward in &[true, false] {
            for &(s, offset) in &[(205.0, 30.0), (410.0, -30.0), (610.0, 30.0), (215.0, -30.0)] {
                truths.push(street_truth(street, s, 2.5, forward, offset, &mut pose_no));
            }
        }
    }
    // outward poses past the outer crossings: no intersection ahead
    for street in &grid_streets {
        truths.push(street_truth(street, 750.0, -2.0, true, 0.0, &mut pose_no));
        truths.push(street_truth(street, 50.0, -2.0, false, 0.0, &mut pose_no));
    }
    // too close to the street end for the heading to stay drivable
    for street in &grid_streets {
        truths.push(street_truth(street, 792.0, -2.0, true, 0.0, &mut pose_no));
        truths.push(street_truth(street, 8.0, -2.0, false, 0.0, &mut pose_no));
    }

    // oneway avenue: with-flow poses legal, against-flow poses wrong-way
    let avenue = Street {
        axis: Axis::EastWest,
        at: -200.0,
        lanes_fwd: 3,
        lanes_back: 3,
        has_bike_lane: false,
        crossings: false,
    };
    for &forward in &[true, false] {
        let mut s = 20.0;
        let mut k = 0usize;
        while s <= 780.0 {
            let lateral = if k % 2 == 0 { -2.0 } else { 2.0 };
            let offset = offsets_deg[k % offsets_deg.len()];
            let mut truth = street_truth(&avenue, s, lateral, forward, offset, &mut pose_no);
            // oneway rule replaces the side rule: against the way is wrong
            truth.wrong_way = !forward;
            truth.lanes = Some(3);
            truths.push(truth);
            s += 40.0;
            k += 1;
        }
    }
    // bike street: curb lanes on both sides
    let bike = Street {
        axis: Axis::EastWest,
        at: -400.0,
        lanes_fwd: 1,
        lanes_back: 1,
        has_bike_lane: true,
        crossings: false,
    };
    for &forward in &[true, false] {
        let mut s = 20.0;
        let mut k = 0usize;
        while s <= 780.0 {
            let lateral = if k % 2 == 0 { -2.0 } else { 2.0 };
            let offset = offsets_deg[(k + 1) % offsets_deg.len()];
            truths.push(street_truth(&bike, s, lateral, forward, offset, &mut pose_no));
            s += 40.0;
            k += 1;
        }
    }

    (network, truths)
}

/// Expected labels for a pose on `street` at along-position `s`, offset
/// `lateral` meters to the left of the +s axis, traveling in +s direction
/// iff `forward`, heading rotated `offset_deg` from the travel direction.
fn street_truth(
    street: &Street,
    s: f64,
    lateral: f64,
    forward: bool,
    offset_deg: f64,
    pose_no: &mut usize,
) -> TruthPose {
    let id = format!("pose{:04}", *pose_no);
    *pose_no += 1;

    let (east, north) = match street.axis {
        Axis::EastWest => (s, street.at + lateral),
        Axis::NorthSouth => (street.at + lateral, s),
    };
    let travel_deg = match (street.axis, forward) {
        (Axis::EastWest, true) => 90.0,
        (Axis::EastWest, false) => 270.0,
        (Axis::NorthSouth, true) => 0.0,
        (Axis::NorthSouth, false) => 180.0,
    };
    let pose = pose_at(&id, east, north, travel_deg + offset_deg);

    // distance to the next crossing in travel direction, within the walk budget
    let raw_distance = if street.crossings {
        if forward {
            CROSSINGS.iter().copied().filter(|c| *c > s).fold(None::<f64>, |best, c| {
                Some(best.map_or(c - s, |b| b.min(c - s)))
            })
        } else {
            CROSSINGS.iter().copied().filter(|c| *c < s).fold(None::<f64>, |best, c| {
                Some(best.map_or(s - c, |b| b.min(s - c)))
            })
        }
    } else {
        None
    };
    let distance_m = raw_distance.filter(|d| *d <= MAX_SEARCH_M);
    let intersection = match distance_m {
        Some(d) if d <= 30.0 => IntersectionAhead::Yes,
        Some(d) if d <= 100.0 => IntersectionAhead::Ambiguous,
        _ => IntersectionAhead::No,
    };

    // drivable: heading inside the 22.5° cone and ≥15 m of road onward
    let remaining = if forward { STREET_MAX - s } else { s - STREET_MIN };
    let drivable = offset_deg.abs() <= 22.5 && remaining >= 15.0;

    // two-way side rule: on the left of travel is the oncoming side.
    // Positive lateral means +north for east-west streets and +east for
    // north-south streets, so which sign is "left" depends on the axis.
    let on_left_of_travel = match (street.axis, forward) {
        (Axis::EastWest, true) => lateral > 0.0,
        (Axis::EastWest, false) => lateral < 0.0,
        (Axis::NorthSouth, true) => lateral < 0.0,
        (Axis::NorthSouth, false) => lateral > 0.0,
    };

    TruthPose {
        pose,
        heading_angle_rad: offset_deg.to_radians(),
        drivable,
        intersection,
        distance_m,
        lanes: Some(if forward { street.lanes_fwd } else { street.lanes_back }),
        wrong_way: on_left_of_travel,
        bike_lane: street.has_bike_lane,
    }
}
