//! Road attribute parsing from OSM way tags.

use std::collections::BTreeMap;

/// Travel direction along a way relative to its node order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Forward => Direction::Backward,
            Direction::Backward => Direction::Forward,
        }
    }
}

/// Per-way road attributes parsed from tags.
///
/// Directional fields are expressed in node order after `oneway=-1`
/// normalization, so forward is always a legal travel direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoadAttributes {
    pub lanes_total: Option<u32>,
    pub lanes_forward: Option<u32>,
    pub lanes_backward: Option<u32>,
    pub oneway: bool,
    pub bike_lane_left: bool,
    pub bike_lane_right: bool,
    pub highway_class: String,
    pub name: Option<String>,
}

fn parse_lane_value(value: &str) -> Option<u32> {
    match value.trim().parse::<u32>() {
        Ok(n) if n > 0 => Some(n),
        _ => None,
    }
}

/// `cycleway*` values that mark a dedicated on-road or adjacent bike lane.
fn is_bike_lane_value(value: &str) -> bool {
    matches!(value, "lane" | "track")
}

impl RoadAttributes {
    /// Parses tags into attributes.
    ///
    /// Returns `(attrs, reversed, warning_count)`. `reversed` is true for
    /// `oneway=-1`; the caller must reverse the way's node order, and the
    /// directional fields returned here are already swapped to match.
    /// Warnings count malformed lane values and forward/backward sums that
    /// contradict `lanes` (the total wins and the split is dropped).
    pub fn from_tags(tags: &BTreeMap<String, String>) -> (RoadAttributes, bool, usize) {
        let mut warnings = 0;
        let mut attrs = RoadAttributes {
            highway_class: tags.get("highway").cloned().unwrap_or_default(),
            name: tags.get("name").cloned(),
            ..RoadAttributes::default()
        };

        let mut reversed = false;
        match tags.get("oneway").map(String::as_str) {
            Some("yes") | Some("true") | Some("1") => attrs.oneway = true,
            Some("-1") => {
                attrs.oneway = true;
                reversed = true;
            }
            _ => {}
        }

        for (key, field) in [
            ("lanes", &mut attrs.lanes_total),
            ("lanes:forward", &mut attrs.lanes_forward),
            ("lanes:backward", &mut attrs.lanes_backward),
        ] {
            if let Some(raw) = tags.get(key) {
                match parse_lane_value(raw) {
                    Some(n) => *field = Some(n),
                    None => warnings += 1,
                }
            }
        }

        if let (Some(total), Some(fwd), Some(back)) =
            (attrs.lanes_total, attrs.lanes_forward, attrs.lanes_backward)
        {
            if fwd + back != total {
                warnings += 1;
                attrs.lanes_forward = None;
                attrs.lanes_backward = None;
            }
        }

        if tags
            .get("cycleway")
            .or_else(|| tags.get("cycleway:both"))
            .map(|v| is_bike_lane_value(v))
            .unwrap_or(false)
        {
            attrs.bike_lane_left = true;
            attrs.bike_lane_right = true;
        }
        if tags
            .get("cycleway:left")
            .map(|v| is_bike_lane_value(v))
            .unwrap_or(false)
        {
            attrs.bike_lane_left = true;
        }
        if tags
            .get("cycleway:right")
            .map(|v| is_bike_lane_value(v))
            .unwrap_or(false)
        {
            attrs.bike_lane_right = true;
        }

        if reversed {
            std::mem::swap(&mut attrs.lanes_forward, &mut attrs.lanes_backward);
            std::mem::swap(&mut attrs.bike_lane_left, &mut attrs.bike_lane_right);
        }

        (attrs, reversed, warnings)
    }
}

/// Lane count available to a vehicle travelling in `dir`.
///
/// One-way roads devote the whole tagged width to the single direction.
/// Two-way roads use the explicit directional tag when present, otherwise
/// split the total evenly (floor, at least 1). `None` when the way carries
/// no usable lane tags.
pub fn lane_count(attrs: &RoadAttributes, dir: Direction) -> Option<u32> {
    if attrs.oneway {
        return attrs.lanes_total;
    }
    let tagged = match dir {
        Direction::Forward => attrs.lanes_forward,
        Direction::Backward => attrs.lanes_backward,
    };
    tagged.or_else(|| attrs.lanes_total.map(|t| (t / 2).max(1)))
}

/// Whether a bike lane runs on the curb side for travel in `dir`.
///
/// Under right-hand traffic the forward curb is the way's right side; under
/// left-hand traffic the sides swap.
pub fn bike_lane_present(attrs: &RoadAttributes, dir: Direction, right_hand_traffic: bool) -> bool {
    let curb_is_right = match dir {
        Direction::Forward => right_hand_traffic,
        Direction::Backward => !right_hand_traffic,
    };
    if curb_is_right {
        attrs.bike_lane_right
    } else {
        attrs.bike_lane_left
    }
}
