//! Panorama metadata ingestion and equirectangular→perspective cropping.
//!
//! The crop is a gnomonic projection: each output pixel casts a ray through
//! a pinhole camera yawed/pitched inside the panorama sphere, and the ray's
//! spherical angles address a fractional source pixel. Resampling is
//! bilinear with horizontal wraparound at the ±180° seam and vertical clamp
//! at the poles.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geo::{Bearing, GeoPoint, EARTH_RADIUS_M};
use crate::pose::{CameraPose, DEFAULT_SOURCE_HEIGHT_PX, DEFAULT_SOURCE_WIDTH_PX};

pub const DEFAULT_OUT_SIZE_PX: u32 = 227;
pub const DEFAULT_HFOV_DEG: f64 = 100.0;
pub const DEFAULT_MIN_SPACING_M: f64 = 5.0;
pub const CHANNELS: usize = 3;

#[derive(Debug, Error)]
pub enum PanoError {
    #[error("invalid crop spec: {0}")]
    InvalidSpec(String),
    #[error("raster is {got_w}x{got_h} but the crop spec expects {want_w}x{want_h}")]
    SourceDims {
        want_w: u32,
        want_h: u32,
        got_w: u32,
        got_h: u32,
    },
    #[error("raster buffer holds {len} bytes, expected {expected}")]
    BufferSize { len: usize, expected: usize },
    #[error("raster dimensions must be positive")]
    EmptyRaster,
    #[error("metadata read failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

/// Parameters of one perspective crop out of an equirectangular panorama.
///
/// The focal length is derived from the field of view so that the *edge
/// pixel centers* of a row sit exactly at ±hfov/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropSpec {
    out_w: u32,
    out_h: u32,
    hfov_rad: f64,
    yaw_rad: f64,
    pitch_rad: f64,
    focal_px: f64,
    source_w: u32,
    source_h: u32,
}

impl CropSpec {
    /// Builds a spec; yaw is normalized to [0, 2π) so full-turn aliases
    /// produce identical pixel maps.
    pub fn new(
        out_w: u32,
        out_h: u32,
        hfov_rad: f64,
        yaw_rad: f64,
        pitch_rad: f64,
        source_w: u32,
        source_h: u32,
    ) -> Result<CropSpec, PanoError> {
        if out_w < 2 || out_h < 2 {
            return Err(PanoError::InvalidSpec("output must be at least 2x2".into()));
        }
        if source_w == 0 || source_h == 0 {
            return Err(PanoError::InvalidSpec("source dimensions must be positive".into()));
        }
        if !(hfov_rad.is_finite() && 0.0 < hfov_rad && hfov_rad < PI) {
            return Err(PanoError::InvalidSpec("horizontal FOV must be in (0, π)".into()));
        }
        if !(pitch_rad.is_finite() && pitch_rad.abs() < FRAC_PI_2) {
            return Err(PanoError::InvalidSpec("pitch must be in (-π/2, π/2)".into()));
        }
        if !yaw_rad.is_finite() {
            return Err(PanoError::InvalidSpec("yaw must be finite".into()));
        }
        let focal_px = ((out_w as f64 - 1.0) / 2.0) / (hfov_rad / 2.0).tan();
        Ok(CropSpec {
            out_w,
            out_h,
            hfov_rad,
            yaw_rad: Bearing::from_radians(yaw_rad).radians(),
            pitch_rad,
            focal_px,
            source_w,
            source_h,
        })
    }

    /// 227×227 output, 100° FOV, level pitch.
    pub fn with_defaults(yaw_rad: f64, source_w: u32, source_h: u32) -> Result<CropSpec, PanoError> {
        CropSpec::new(
            DEFAULT_OUT_SIZE_PX,
            DEFAULT_OUT_SIZE_PX,
            DEFAULT_HFOV_DEG.to_radians(),
            yaw_rad,
            0.0,
            source_w,
            source_h,
        )
    }

    pub fn out_size(&self) -> (u32, u32) {
        (self.out_w, self.out_h)
    }

    pub fn hfov_rad(&self) -> f64 {
        self.hfov_rad
    }

    pub fn yaw_rad(&self) -> f64 {
        self.yaw_rad
    }

    pub fn pitch_rad(&self) -> f64 {
        self.pitch_rad
    }

    pub fn focal_px(&self) -> f64 {
        self.focal_px
    }

    pub fn source_size(&self) -> (u32, u32) {
        (self.source_w, self.source_h)
    }

    /// Spherical angles (lon, lat) of the ray through output pixel center
    /// (u, v). Longitude is measured around the vertical axis (0 = panorama
    /// front, positive rightward); latitude positive upward.
    pub fn pixel_angles(&self, u: f64, v: f64) -> (f64, f64) {
        let cx = (self.out_w as f64 - 1.0) / 2.0;
        let cy = (self.out_h as f64 - 1.0) / 2.0;
        let x = (u - cx) / self.focal_px;
        let y = (v - cy) / self.focal_px;
        let n = (x * x + y * y + 1.0).sqrt();
        let (dx, dy, dz) = (x / n, y / n, 1.0 / n);
        let (sin_yaw, cos_yaw) = self.yaw_rad.sin_cos();
        let (x1, y1, z1) = (dx * cos_yaw + dz * sin_yaw, dy, -dx * sin_yaw + dz * cos_yaw);
        let (sin_p, cos_p) = self.pitch_rad.sin_cos();
        let (x2, y2, z2) = (x1, y1 * cos_p - z1 * sin_p, y1 * sin_p + z1 * cos_p);
        let lon = x2.atan2(z2);
        let lat = (-y2).asin();
        (lon, lat)
    }

    /// Fractional source pixel sampled by output pixel center (u, v):
    /// column wrapped into [0, W), row clamped into [0, H−1].
    pub fn source_pixel(&self, u: f64, v: f64) -> (f64, f64) {
        let (lon, lat) = self.pixel_angles(u, v);
        let w = self.source_w as f64;
        let h = self.source_h as f64;
        let mut sx = (w * (lon / TAU + 0.5)).rem_euclid(w);
        if sx >= w {
            sx = 0.0;
        }
        let sy = (h * (0.5 - lat / PI)).clamp(0.0, h - 1.0);
        (sx, sy)
    }
}

/// Row-major source coordinates for every output pixel of `spec`.
pub fn crop_pixel_map(spec: &CropSpec) -> Vec<(f64, f64)> {
    let (out_w, out_h) = spec.out_size();
    let mut map = Vec::with_capacity(out_w as usize * out_h as usize);
    for v in 0..out_h {
        for u in 0..out_w {
            map.push(spec.source_pixel(u as f64, v as f64));
        }
    }
    map
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl RasterBuffer {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<RasterBuffer, PanoError> {
        if width == 0 || height == 0 {
            return Err(PanoError::EmptyRaster);
        }
        let expected = width as usize * height as usize * CHANNELS;
        if data.len() != expected {
            return Err(PanoError::BufferSize { len: data.len(), expected });
        }
        Ok(RasterBuffer { width, height, data })
    }

    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> RasterBuffer {
        let mut data = Vec::with_capacity(width as usize * height as usize * CHANNELS);
        for _ in 0..(width as usize * height as usize) {
            data.extend_from_slice(&rgb);
        }
        RasterBuffer { width, height, data }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Bilinear sample; columns wrap around the horizontal seam, rows clamp
    /// at the poles.
    fn sample_bilinear(&self, sx: f64, sy: f64) -> [u8; 3] {
        let w = self.width as i64;
        let h = self.height as i64;
        let x0f = sx.floor();
        let y0f = sy.floor();
        let fx = sx - x0f;
        let fy = sy - y0f;
        let x0 = (x0f as i64).rem_euclid(w);
        let x1 = (x0 + 1).rem_euclid(w);
        let y0 = (y0f as i64).clamp(0, h - 1);
        let y1 = (y0 + 1).min(h - 1);
        let p00 = self.get(x0 as u32, y0 as u32);
        let p10 = self.get(x1 as u32, y0 as u32);
        let p01 = self.get(x0 as u32, y1 as u32);
        let p11 = self.get(x1 as u32, y1 as u32);
        let mut out = [0u8; 3];
        for c in 0..CHANNELS {
            let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
            let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
            let value = top * (1.0 - fy) + bottom * fy;
            out[c] = (value + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

/// Whether the raster has the 2:1 aspect of a full equirectangular sphere.
pub fn is_full_equirect(width: u32, height: u32) -> bool {
    width == 2 * height
}

/// Renders the crop described by `spec` from a full panorama.
pub fn resample(pano: &RasterBuffer, spec: &CropSpec) -> Result<RasterBuffer, PanoError> {
    let (want_w, want_h) = spec.source_size();
    if (pano.width, pano.height) != (want_w, want_h) {
        return Err(PanoError::SourceDims {
            want_w,
            want_h,
            got_w: pano.width,
            got_h: pano.height,
        });
    }
    let (out_w, out_h) = spec.out_size();
    let mut data = Vec::with_capacity(out_w as usize * out_h as usize * CHANNELS);
    for v in 0..out_h {
        for u in 0..out_w {
            let (sx, sy) = spec.source_pixel(u as f64, v as f64);
            data.extend_from_slice(&pano.sample_bilinear(sx, sy));
        }
    }
    RasterBuffer::new(out_w, out_h, data)
}

/// Loads an image file as RGB.
pub fn load_raster(path: &Path) -> Result<RasterBuffer, PanoError> {
    let img = image::open(path)?.to_rgb8();
    let (width, height) = img.dimensions();
    RasterBuffer::new(width, height, img.into_raw())
}

/// Writes a raster as PNG.
pub fn save_raster(path: &Path, raster: &RasterBuffer) -> Result<(), PanoError> {
    let img: image::RgbImage =
        image::ImageBuffer::from_raw(raster.width, raster.height, raster.data.clone())
            .expect("buffer length checked at construction");
    img.save_with_format(path, image::ImageFormat::Png)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct MetaRecord {
    pano_id: String,
    lat: f64,
    lon: f64,
    heading: f64,
    #[serde(default)]
    width: Option<u32>,
    #[serde(default)]
    height: Option<u32>,
    #[serde(default)]
    date: Option<String>,
}

/// Reads camera poses from JSON-lines metadata.
///
/// Each line holds `pano_id`, `lat`, `lon`, `heading` (degrees) and
/// optional `width`, `height`, `date`. Records that fail to parse or
/// validate are skipped; each skip emits a `line N: reason` diagnostic.
/// Blank lines are ignored.
pub fn parse_pano_metadata<R: Read>(input: R) -> Result<(Vec<CameraPose>, Vec<String>), PanoError> {
    let reader = BufReader::new(input);
    let mut poses = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: MetaRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(err) => {
                diagnostics.push(format!("line {line_no}: {err}"));
                continue;
            }
        };
        let pos = match GeoPoint::from_degrees(record.lat, record.lon) {
            Ok(p) => p,
            Err(err) => {
                diagnostics.push(format!("line {line_no}: {err}"));
                continue;
            }
        };
        if !record.heading.is_finite() {
            diagnostics.push(format!("line {line_no}: heading must be finite"));
            continue;
        }
        if record.width == Some(0) || record.height == Some(0) {
            diagnostics.push(format!("line {line_no}: image dimensions must be positive"));
            continue;
        }
        poses.push(CameraPose {
            pano_id: record.pano_id,
            pos,
            heading: Bearing::from_degrees(record.heading),
            source_width_px: record.width.unwrap_or(DEFAULT_SOURCE_WIDTH_PX),
            source_height_px: record.height.unwrap_or(DEFAULT_SOURCE_HEIGHT_PX),
            capture_date: record.date,
        });
    }
    Ok((poses, diagnostics))
}

/// Thins a pose list so no two kept poses are closer than `min_spacing_m`.
///
/// Greedy in input order: a pose is kept iff it is at least the spacing
/// away from every pose already kept. A uniform grid over kept positions
/// prunes the distance checks; distances themselves are haversine.
pub fn dedupe_poses(poses: Vec<CameraPose>, min_spacing_m: f64) -> Vec<CameraPose> {
    if min_spacing_m <= 0.0 || poses.is_empty() {
        return poses;
    }
    let lat0 = poses[0].pos.lat();
    let cos_lat0 = lat0.cos().max(1e-6);
    let cell = min_spacing_m;
    let key = |p: &GeoPoint| -> (i64, i64) {
        let east = EARTH_RADIUS_M * p.lon() * cos_lat0;
        let north = EARTH_RADIUS_M * p.lat();
        ((east / cell).floor() as i64, (north / cell).floor() as i64)
    };

    let mut kept: Vec<CameraPose> = Vec::new();
    let mut grid: std::collections::HashMap<(i64, i64), Vec<usize>> =
        std::collections::HashMap::new();
    for pose in poses {
        let (kx, ky) = key(&pose.pos);
        let mut ok = true;
        'scan: for dx in -2..=2 {
            for dy in -2..=2 {
                if let Some(list) = grid.get(&(kx + dx, ky + dy)) {
                    for &i in list {
                        if crate::geo::haversine_distance(&kept[i].pos, &pose.pos) < min_spacing_m {
                            ok = false;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if ok {
            grid.entry((kx, ky)).or_default().push(kept.len());
            kept.push(pose);
        }
    }
    kept
}
