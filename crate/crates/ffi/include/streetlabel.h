/* C interface for the streetlabel affordance-labeling engine. Generated; do not edit. */

#ifndef STREETLABEL_H
#define STREETLABEL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Ternary intersection call; `Unknown` means the pose matched no road.
 */
typedef enum {
  SLB_INTERSECTION_NO = 0,
  SLB_INTERSECTION_YES = 1,
  SLB_INTERSECTION_AMBIGUOUS = 2,
  SLB_INTERSECTION_UNKNOWN = 3,
} SlbIntersection;

/**
 * Result code for every fallible call.
 */
typedef enum {
  SLB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SLB_STATUS_NULL_ARGUMENT = 1,
  /**
   * An argument was out of range, non-finite, or inconsistent.
   */
  SLB_STATUS_INVALID_ARGUMENT = 2,
  /**
   * The OSM input could not be parsed.
   */
  SLB_STATUS_PARSE_ERROR = 3,
  /**
   * The input parsed but contained no usable road segments.
   */
  SLB_STATUS_EMPTY_NETWORK = 4,
  /**
   * The file could not be read.
   */
  SLB_STATUS_IO_ERROR = 5,
} SlbStatus;

/**
 * A loaded road network with its spatial index.
 */
typedef struct SlbEngine SlbEngine;

/**
 * Matching and labeling knobs. Start from [`slb_config_default`] and
 * override fields as needed; angles are degrees, distances meters.
 */
typedef struct {
  /**
   * Poses further than this from every road stay unmatched.
   */
  double max_match_dist_m;
  /**
   * Meters of score added per radian of heading disagreement.
   */
  double heading_weight_m_per_rad;
  /**
   * Heading residual bound for a drivable heading.
   */
  double drivable_angle_deg;
  /**
   * Intersection distances at or below this are a definite yes.
   */
  double intersection_true_m;
  /**
   * Intersection distances above this (or none found) are a definite no.
   */
  double intersection_false_m;
  /**
   * How far the intersection walk extends before giving up.
   */
  double max_search_m;
  /**
   * Minimum road continuation ahead for a drivable heading.
   */
  double min_continuation_m;
  /**
   * Drive-on-left convention for the wrong-way side rule.
   */
  bool left_hand_traffic;
} SlbConfig;

/**
 * A street-level camera pose in WGS84 degrees. Heading is clockwise from
 * north.
 */
typedef struct {
  double lat_deg;
  double lon_deg;
  double heading_deg;
} SlbPose;

/**
 * Labels for one pose. `has_*` flags gate their value fields; `way_id`,
 * `centerline_dist_m`, and `perpendicular` are valid iff `matched`.
 */
typedef struct {
  bool matched;
  bool has_heading_angle;
  /**
   * Signed residual to the road's travel direction, radians.
   */
  double heading_angle_rad;
  bool has_drivable_heading;
  bool drivable_heading;
  SlbIntersection intersection_ahead;
  bool has_distance_to_intersection;
  double distance_to_intersection_m;
  bool has_num_lanes;
  uint32_t num_lanes;
  bool has_wrong_way;
  bool wrong_way;
  bool has_bike_lane;
  bool bike_lane;
  int64_t way_id;
  double centerline_dist_m;
  bool perpendicular;
} SlbLabels;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *slb_version(void);

/**
 * Message for the most recent failure on this thread, or an empty string.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *slb_last_error_message(void);

/**
 * Fills `out` with the default configuration.
 *
 * # Safety
 * `out` must be null or valid for writing one `SlbConfig`.
 */
SlbStatus slb_config_default(SlbConfig *out);

/**
 * Builds an engine from OSM XML held in memory.
 *
 * # Safety
 * `xml` must be null or valid for reading `len` bytes; `out` must be null
 * or valid for writing one pointer.
 */
SlbStatus slb_engine_from_osm_xml(const char *xml, size_t len, SlbEngine **out);

/**
 * Builds an engine from an OSM XML file.
 *
 * # Safety
 * `path` must be null or a NUL-terminated string; `out` must be null or
 * valid for writing one pointer.
 */
SlbStatus slb_engine_from_osm_path(const char *path, SlbEngine **out);

/**
 * Releases an engine. Null is a no-op.
 *
 * # Safety
 * `engine` must be null or a pointer returned by an `slb_engine_from_*`
 * call that has not been freed yet.
 */
void slb_engine_free(SlbEngine *engine);

/**
 * Number of road segments in the loaded network.
 *
 * # Safety
 * `engine` must be null or a live engine pointer; `out` must be null or
 * valid for writing one `size_t`.
 */
SlbStatus slb_engine_segment_count(const SlbEngine *engine, size_t *out);

/**
 * Number of intersection nodes in the loaded network.
 *
 * # Safety
 * `engine` must be null or a live engine pointer; `out` must be null or
 * valid for writing one `size_t`.
 */
SlbStatus slb_engine_intersection_count(const SlbEngine *engine, size_t *out);

/**
 * Matches one pose against the network and derives its labels. A pose that
 * matches no road still succeeds, with `matched = false` and every label
 * absent. Pass `config = NULL` for defaults.
 *
 * # Safety
 * `engine` must be null or a live engine pointer; `pose` and `out` must be
 * null or valid for reads/writes of their types; `config` must be null or
 * valid for reading one `SlbConfig`.
 */
SlbStatus slb_label_pose(const SlbEngine *engine,
                         const SlbPose *pose,
                         const SlbConfig *config,
                         SlbLabels *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STREETLABEL_H */
