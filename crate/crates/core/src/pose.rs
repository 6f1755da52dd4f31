//! Camera pose record shared by matching, labeling, and panorama handling.

use crate::geo::{Bearing, GeoPoint};

/// Default equirectangular source width when metadata omits dimensions.
pub const DEFAULT_SOURCE_WIDTH_PX: u32 = 2048;
/// Default equirectangular source height when metadata omits dimensions.
pub const DEFAULT_SOURCE_HEIGHT_PX: u32 = 1024;

/// One street-level capture: where the camera was and which way the
/// vehicle pointed.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    pub pano_id: String,
    pub pos: GeoPoint,
    /// Vehicle true heading at capture time.
    pub heading: Bearing,
    pub source_width_px: u32,
    pub source_height_px: u32,
    pub capture_date: Option<String>,
}

impl CameraPose {
    /// Pose with default source dimensions and no capture date.
    pub fn new(pano_id: impl Into<String>, pos: GeoPoint, heading: Bearing) -> CameraPose {
        CameraPose {
            pano_id: pano_id.into(),
            pos,
            heading,
            source_width_px: DEFAULT_SOURCE_WIDTH_PX,
            source_height_px: DEFAULT_SOURCE_HEIGHT_PX,
            capture_date: None,
        }
    }
}
