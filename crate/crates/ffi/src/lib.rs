//! C ABI over the labeling engine: load a road network once, then label
//! camera poses one call at a time.
//!
//! Conventions:
//! * Every fallible function returns [`SlbStatus`]; `SLB_STATUS_OK` is zero.
//! * On failure a thread-local message is set, readable via
//!   [`slb_last_error_message`] until the next failing call on that thread.
//! * Out-parameters are written only on success.
//! * [`SlbEngine`] is opaque; release it with [`slb_engine_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::os::raw::c_char;

use streetlabel::geo::{Bearing, GeoPoint};
use streetlabel::index::{MatchConfig, SegmentIndex, DEFAULT_CELL_SIZE_M};
use streetlabel::label::{label_pose, IntersectionAhead, LabelConfig};
use streetlabel::osm::{extract_road_network, parse_osm_xml, RoadNetwork, DEFAULT_HIGHWAY_ALLOWLIST};
use streetlabel::pose::CameraPose;

/// Result code for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlbStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument was out of range, non-finite, or inconsistent.
    InvalidArgument = 2,
    /// The OSM input could not be parsed.
    ParseError = 3,
    /// The input parsed but contained no usable road segments.
    EmptyNetwork = 4,
    /// The file could not be read.
    IoError = 5,
}

/// Ternary intersection call; `Unknown` means the pose matched no road.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlbIntersection {
    No = 0,
    Yes = 1,
    Ambiguous = 2,
    Unknown = 3,
}

/// A street-level camera pose in WGS84 degrees. Heading is clockwise from
/// north.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlbPose {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub heading_deg: f64,
}

/// Matching and labeling knobs. Start from [`slb_config_default`] and
/// override fields as needed; angles are degrees, distances meters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlbConfig {
    /// Poses further than this from every road stay unmatched.
    pub max_match_dist_m: f64,
    /// Meters of score added per radian of heading disagreement.
    pub heading_weight_m_per_rad: f64,
    /// Heading residual bound for a drivable heading.
    pub drivable_angle_deg: f64,
    /// Intersection distances at or below this are a definite yes.
    pub intersection_true_m: f64,
    /// Intersection distances above this (or none found) are a definite no.
    pub intersection_false_m: f64,
    /// How far the intersection walk extends before giving up.
    pub max_search_m: f64,
    /// Minimum road continuation ahead for a drivable heading.
    pub min_continuation_m: f64,
    /// Drive-on-left convention for the wrong-way side rule.
    pub left_hand_traffic: bool,
}

/// Labels for one pose. `has_*` flags gate their value fields; `way_id`,
/// `centerline_dist_m`, and `perpendicular` are valid iff `matched`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SlbLabels {
    pub matched: bool,
    pub has_heading_angle: bool,
    /// Signed residual to the road's travel direction, radians.
    pub heading_angle_rad: f64,
    pub has_drivable_heading: bool,
    pub drivable_heading: bool,
    pub intersection_ahead: SlbIntersection,
    pub has_distance_to_intersection: bool,
    pub distance_to_intersection_m: f64,
    pub has_num_lanes: bool,
    pub num_lanes: u32,
    pub has_wrong_way: bool,
    pub wrong_way: bool,
    pub has_bike_lane: bool,
    pub bike_lane: bool,
    pub way_id: i64,
    pub centerline_dist_m: f64,
    pub perpendicular: bool,
}

/// A loaded road network with its spatial index.
pub struct SlbEngine {
    network: RoadNetwork,
    index: SegmentIndex,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: SlbStatus, message: &str) -> SlbStatus {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
    status
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn slb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn slb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Fills `out` with the default configuration.
///
/// # Safety
/// `out` must be null or valid for writing one `SlbConfig`.
#[no_mangle]
pub unsafe extern "C" fn slb_config_default(out: *mut SlbConfig) -> SlbStatus {
    if out.is_null() {
        return fail(SlbStatus::NullArgument, "out is null");
    }
    let mc = MatchConfig::default();
    let lc = LabelConfig::default();
    *out = SlbConfig {
        max_match_dist_m: mc.max_match_dist_m,
        heading_weight_m_per_rad: mc.heading_weight_m_per_rad,
        drivable_angle_deg: lc.drivable_angle_rad.to_degrees(),
        intersection_true_m: lc.intersection_true_m,
        intersection_false_m: lc.intersection_false_m,
        max_search_m: lc.max_search_m,
        min_continuation_m: lc.min_continuation_m,
        left_hand_traffic: !lc.right_hand_traffic,
    };
    SlbStatus::Ok
}

fn convert_config(config: &SlbConfig) -> Result<(MatchConfig, LabelConfig), String> {
    let fields = [
        config.max_match_dist_m,
        config.heading_weight_m_per_rad,
        config.drivable_angle_deg,
        config.intersection_true_m,
        config.intersection_false_m,
        config.max_search_m,
        config.min_continuation_m,
    ];
    if fields.iter().any(|v| !v.is_finite()) {
        return Err("config fields must be finite".to_string());
    }
    if config.max_match_dist_m <= 0.0 {
        return Err("max_match_dist_m must be positive".to_string());
    }
    if config.heading_weight_m_per_rad < 0.0 {
        return Err("heading_weight_m_per_rad must be non-negative".to_string());
    }
    let label = LabelConfig {
        drivable_angle_rad: config.drivable_angle_deg.to_radians(),
        intersection_true_m: config.intersection_true_m,
        intersection_false_m: config.intersection_false_m,
        max_search_m: config.max_search_m,
        min_continuation_m: config.min_continuation_m,
        right_hand_traffic: !config.left_hand_traffic,
    };
    label.validate().map_err(|e| e.to_string())?;
    Ok((
        MatchConfig {
            max_match_dist_m: config.max_match_dist_m,
            heading_weight_m_per_rad: config.heading_weight_m_per_rad,
        },
        label,
    ))
}

fn build_engine(xml: &[u8]) -> Result<Box<SlbEngine>, SlbStatus> {
    let parsed = match parse_osm_xml(xml) {
        Ok(parsed) => parsed,
        Err(e) => return Err(fail(SlbStatus::ParseError, &e.to_string())),
    };
    let (network, _) = extract_road_network(parsed.nodes, parsed.ways, &DEFAULT_HIGHWAY_ALLOWLIST);
    if network.is_empty() {
        return Err(fail(SlbStatus::EmptyNetwork, "no road segments after extraction"));
    }
    let index = SegmentIndex::build(&network, DEFAULT_CELL_SIZE_M);
    Ok(Box::new(SlbEngine { network, index }))
}

/// Builds an engine from OSM XML held in memory.
///
/// # Safety
/// `xml` must be null or valid for reading `len` bytes; `out` must be null
/// or valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn slb_engine_from_osm_xml(
    xml: *const c_char,
    len: usize,
    out: *mut *mut SlbEngine,
) -> SlbStatus {
    if xml.is_null() || out.is_null() {
        return fail(SlbStatus::NullArgument, "xml and out must be non-null");
    }
    let bytes = std::slice::from_raw_parts(xml as *const u8, len);
    match build_engine(bytes) {
        Ok(engine) => {
            *out = Box::into_raw(engine);
            SlbStatus::Ok
        }
        Err(status) => status,
    }
}

/// Builds an engine from an OSM XML file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// valid for writing one pointer.
#[no_mangle]
pub unsafe extern "C" fn slb_engine_from_osm_path(
    path: *const c_char,
    out: *mut *mut SlbEngine,
) -> SlbStatus {
    if path.is_null() || out.is_null() {
        return fail(SlbStatus::NullArgument, "path and out must be non-null");
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => s,
        Err(_) => return fail(SlbStatus::InvalidArgument, "path is not valid UTF-8"),
    };
    let bytes = match std::fs::read(path) {
        Ok(bytes) => bytes,
        Err(e) => return fail(SlbStatus::IoError, &format!("{path}: {e}")),
    };
    match build_engine(&bytes) {
        Ok(engine) => {
            *out = Box::into_raw(engine);
            SlbStatus::Ok
        }
        Err(status) => status,
    }
}

/// Releases an engine. Null is a no-op.
///
/// # Safety
/// `engine` must be null or a pointer returned by an `slb_engine_from_*`
/// call that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn slb_engine_free(engine: *mut SlbEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Number of road segments in the loaded network.
///
/// # Safety
/// `engine` must be null or a live engine pointer; `out` must be null or
/// valid for writing one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn slb_engine_segment_count(
    engine: *const SlbEngine,
    out: *mut usize,
) -> SlbStatus {
    if engine.is_null() || out.is_null() {
        return fail(SlbStatus::NullArgument, "engine and out must be non-null");
    }
    *out = (*engine).network.segments.len();
    SlbStatus::Ok
}

/// Number of intersection nodes in the loaded network.
///
/// # Safety
/// `engine` must be null or a live engine pointer; `out` must be null or
/// valid for writing one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn slb_engine_intersection_count(
    engine: *const SlbEngine,
    out: *mut usize,
) -> SlbStatus {
    if engine.is_null() || out.is_null() {
        return fail(SlbStatus::NullArgument, "engine and out must be non-null");
    }
    *out = (*engine).network.intersections.len();
    SlbStatus::Ok
}

/// Matches one pose against the network and derives its labels. A pose that
/// matches no road still succeeds, with `matched = false` and every label
/// absent. Pass `config = NULL` for defaults.
///
/// # Safety
/// `engine` must be null or a live engine pointer; `pose` and `out` must be
/// null or valid for reads/writes of their types; `config` must be null or
/// valid for reading one `SlbConfig`.
#[no_mangle]
pub unsafe extern "C" fn slb_label_pose(
    engine: *const SlbEngine,
    pose: *const SlbPose,
    config: *const SlbConfig,
    out: *mut SlbLabels,
) -> SlbStatus {
    if engine.is_null() || pose.is_null() || out.is_null() {
        return fail(SlbStatus::NullArgument, "engine, pose, and out must be non-null");
    }
    let engine = &*engine;
    let pose = *pose;

    let (match_config, label_config) = if config.is_null() {
        (MatchConfig::default(), LabelConfig::default())
    } else {
        match convert_config(&*config) {
            Ok(pair) => pair,
            Err(msg) => return fail(SlbStatus::InvalidArgument, &msg),
        }
    };

    if !pose.heading_deg.is_finite() {
        return fail(SlbStatus::InvalidArgument, "heading must be finite");
    }
    let pos = match GeoPoint::from_degrees(pose.lat_deg, pose.lon_deg) {
        Ok(pos) => pos,
        Err(e) => return fail(SlbStatus::InvalidArgument, &e.to_string()),
    };
    let camera = CameraPose::new("ffi", pos, Bearing::from_degrees(pose.heading_deg));

    let rec = label_pose(&camera, &engine.network, &engine.index, &match_config, &label_config);
    let m = rec.matched.as_ref();
    *out = SlbLabels {
        matched: m.is_some(),
        has_heading_angle: rec.heading_angle.is_some(),
        heading_angle_rad: rec.heading_angle.unwrap_or(0.0),
        has_drivable_heading: rec.drivable_heading.is_some(),
        drivable_heading: rec.drivable_heading.unwrap_or(false),
        intersection_ahead: match rec.intersection_ahead {
            Some(IntersectionAhead::No) => SlbIntersection::No,
            Some(IntersectionAhead::Yes) => SlbIntersection::Yes,
            Some(IntersectionAhead::Ambiguous) => SlbIntersection::Ambiguous,
            None => SlbIntersection::Unknown,
        },
        has_distance_to_intersection: rec.distance_to_intersection_m.is_some(),
        distance_to_intersection_m: rec.distance_to_intersection_m.unwrap_or(0.0),
        has_num_lanes: rec.num_lanes.is_some(),
        num_lanes: rec.num_lanes.unwrap_or(0),
        has_wrong_way: rec.wrong_way.is_some(),
        wrong_way: rec.wrong_way.unwrap_or(false),
        has_bike_lane: rec.bike_lane.is_some(),
        bike_lane: rec.bike_lane.unwrap_or(false),
        way_id: m.map(|m| m.way_id).unwrap_or(0),
        centerline_dist_m: m.map(|m| m.centerline_dist_m).unwrap_or(0.0),
        perpendicular: m.map(|m| m.perpendicular).unwrap_or(false),
    };
    SlbStatus::Ok
}
