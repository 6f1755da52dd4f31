//! End-to-end tests of the command-line binary: exit codes, output files,
//! and flag/config precedence.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use streetlabel::geo::GeoPoint;
use streetlabel::label::IntersectionAhead;
use streetlabel::manifest::{read_manifest_jsonl, write_manifest_jsonl, ManifestRow};
use streetlabel::osm::{write_osm_xml, OsmNode, OsmWay};
use streetlabel::pano::{load_raster, save_raster, RasterBuffer};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_streetlabel"));
    cmd.env_remove("STREETLABEL_CONFIG");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

/// Local-meter coordinates mapped onto the globe near the equator, the
/// same convention the unit-test fixtures use.
fn geo_at(east_m: f64, north_m: f64) -> GeoPoint {
    let r = streetlabel::geo::EARTH_RADIUS_M;
    GeoPoint::new(north_m / r, east_m / r).unwrap()
}

fn node(id: i64, east_m: f64, north_m: f64) -> OsmNode {
    OsmNode { id, pos: geo_at(east_m, north_m) }
}

fn way(id: i64, node_ids: &[i64], tags: &[(&str, &str)]) -> OsmWay {
    let mut map = BTreeMap::new();
    map.insert("highway".to_string(), "residential".to_string());
    for (k, v) in tags {
        map.insert(k.to_string(), v.to_string());
    }
    OsmWay { id, node_ids: node_ids.to_vec(), tags: map }
}

/// An east-west street crossing a north-south street at (200, 0).
fn crossing_osm() -> String {
    let nodes = vec![
        node(1, 0.0, 0.0),
        node(2, 200.0, 0.0),
        node(3, 400.0, 0.0),
        node(4, 200.0, -150.0),
        node(5, 200.0, 150.0),
    ];
    let ways = vec![
        way(100, &[1, 2, 3], &[("name", "King Street"), ("lanes", "2")]),
        way(101, &[4, 2, 5], &[("name", "Queen Street")]),
    ];
    write_osm_xml(&nodes, &ways)
}

fn pose_line(id: &str, east_m: f64, north_m: f64, heading_deg: f64) -> String {
    let p = geo_at(east_m, north_m);
    format!(
        r#"{{"pano_id":"{id}","lat":{},"lon":{},"heading":{heading_deg}}}"#,
        p.lat_deg(),
        p.lon_deg()
    )
}

/// Poses: one 35 m before the crossing (ambiguous band), one 150 m before
/// (clear "false"), one nowhere near any road.
fn fixture_poses() -> String {
    [
        pose_line("near", 165.0, 0.5, 90.0),
        pose_line("mid", 50.0, -0.5, 90.0),
        pose_line("faraway", 4000.0, 4000.0, 0.0),
    ]
    .join("\n")
}

fn write_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let osm = dir.join("map.osm");
    let poses = dir.join("poses.jsonl");
    fs::write(&osm, crossing_osm()).unwrap();
    fs::write(&poses, fixture_poses()).unwrap();
    (osm, poses)
}

#[test]
fn label_writes_manifest_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let out = dir.path().join("manifest.jsonl");
    let csv = dir.path().join("manifest.csv");
    let output = run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&out)
        .arg("--csv")
        .arg(&csv));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("rows: 3 (matched 2, no match 1)"), "{stdout}");

    let rows = read_manifest_jsonl(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    let near = &rows[0];
    assert_eq!(near.pano_id, "near");
    assert_eq!(near.intersection_ahead, Some(IntersectionAhead::Ambiguous));
    assert!((near.distance_to_intersection_m.unwrap() - 35.0).abs() < 0.05);
    let mid = &rows[1];
    assert_eq!(mid.intersection_ahead, Some(IntersectionAhead::No));
    assert!(!rows[2].is_matched());

    let csv_text = fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 4);
    assert!(csv_text.starts_with("pano_id,"));
}

#[test]
fn explicit_default_flags_change_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let plain = dir.path().join("plain.jsonl");
    let flagged = dir.path().join("flagged.jsonl");
    assert!(run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&plain))
    .status
    .success());
    assert!(run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&flagged)
        .args([
            "--intersection-true",
            "30",
            "--intersection-false",
            "100",
            "--drivable-angle",
            "22.5",
            "--max-search",
            "150",
            "--min-continuation",
            "15",
            "--max-match-dist",
            "25",
            "--heading-weight",
            "5",
        ]))
    .status
    .success());
    assert_eq!(fs::read(&plain).unwrap(), fs::read(&flagged).unwrap());
}

#[test]
fn empty_poses_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, _) = write_fixture(dir.path());
    let empty = dir.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let output = run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&empty)
        .arg("--out")
        .arg(dir.path().join("x.jsonl")));
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no poses"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let output = run(bin().args(["label", "--bogus"]));
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn config_file_shifts_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let config = dir.path().join("conf.toml");
    fs::write(&config, "intersection_true = 40.0\n").unwrap();

    // 35 m to the crossing: ambiguous by default, "true" under the config
    let out = dir.path().join("configured.jsonl");
    assert!(run(bin()
        .env("STREETLABEL_CONFIG", &config)
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&out))
    .status
    .success());
    let rows = read_manifest_jsonl(fs::File::open(&out).unwrap()).unwrap();
    assert_eq!(rows[0].intersection_ahead, Some(IntersectionAhead::Yes));

    // an explicit flag beats the config file
    let out2 = dir.path().join("flag-wins.jsonl");
    assert!(run(bin()
        .env("STREETLABEL_CONFIG", &config)
        .args(["label", "--intersection-true", "30", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&out2))
    .status
    .success());
    let rows = read_manifest_jsonl(fs::File::open(&out2).unwrap()).unwrap();
    assert_eq!(rows[0].intersection_ahead, Some(IntersectionAhead::Ambiguous));
}

#[test]
fn malformed_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let config = dir.path().join("conf.toml");
    fs::write(&config, "unknown_key = 1\n").unwrap();
    let output = run(bin()
        .env("STREETLABEL_CONFIG", &config)
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(dir.path().join("x.jsonl")));
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn filter_drops_ambiguous_unless_kept() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let manifest = dir.path().join("manifest.jsonl");
    assert!(run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&manifest))
    .status
    .success());

    let strict = dir.path().join("strict.jsonl");
    let output = run(bin()
        .args(["filter", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&strict));
    assert!(output.status.success());
    let kept = read_manifest_jsonl(fs::File::open(&strict).unwrap()).unwrap();
    // ambiguous "near" and unmatched "faraway" both drop
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].pano_id, "mid");

    let lax = dir.path().join("lax.jsonl");
    assert!(run(bin()
        .args(["filter", "--keep-ambiguous", "--keep-unmatched", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&lax))
    .status
    .success());
    let kept = read_manifest_jsonl(fs::File::open(&lax).unwrap()).unwrap();
    assert_eq!(kept.len(), 3);
}

#[test]
fn split_is_deterministic_and_honors_degenerate_ratios() {
    let dir = tempfile::tempdir().unwrap();
    let rows: Vec<ManifestRow> = (0..40)
        .map(|i| {
            let p = geo_at(600.0 * (i % 8) as f64, 600.0 * (i / 8) as f64);
            ManifestRow {
                pano_id: format!("p{i}"),
                lat_deg: p.lat_deg(),
                lon_deg: p.lon_deg(),
                heading_deg: 0.0,
                yaw_offset_deg: 0.0,
                heading_angle_deg: Some(0.0),
                drivable_heading: Some(true),
                intersection_ahead: None,
                distance_to_intersection_m: None,
                num_lanes: Some(2),
                wrong_way: Some(false),
                bike_lane: Some(false),
                way_id: Some(1),
                centerline_dist_m: Some(0.0),
                flags: vec![],
            }
        })
        .collect();
    let manifest = dir.path().join("manifest.jsonl");
    let mut buf = Vec::new();
    write_manifest_jsonl(&mut buf, &rows).unwrap();
    fs::write(&manifest, &buf).unwrap();

    for (out_name, ratios) in [("a", "0.6,0.2,0.2"), ("b", "0.6,0.2,0.2")] {
        let out = dir.path().join(out_name);
        assert!(run(bin()
            .args(["split", "--ratios", ratios, "--seed", "11", "--manifest"])
            .arg(&manifest)
            .arg("--out")
            .arg(&out))
        .status
        .success());
    }
    for name in ["train.jsonl", "val.jsonl", "test.jsonl"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(name)).unwrap(),
            fs::read(dir.path().join("b").join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }

    let all_train = dir.path().join("all-train");
    assert!(run(bin()
        .args(["split", "--ratios", "1,0,0", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(&all_train))
    .status
    .success());
    let train =
        read_manifest_jsonl(fs::File::open(all_train.join("train.jsonl")).unwrap()).unwrap();
    assert_eq!(train.len(), 40);

    let bad = run(bin()
        .args(["split", "--ratios", "0.5,0.2,0.2", "--manifest"])
        .arg(&manifest)
        .arg("--out")
        .arg(dir.path().join("bad")));
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn eval_scores_perfectly_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let (osm, poses) = write_fixture(dir.path());
    let manifest = dir.path().join("manifest.jsonl");
    assert!(run(bin()
        .args(["label", "--osm"])
        .arg(&osm)
        .arg("--poses")
        .arg(&poses)
        .arg("--out")
        .arg(&manifest))
    .status
    .success());
    let report_path = dir.path().join("report.jsonl");
    let output = run(bin()
        .args(["eval", "--pred"])
        .arg(&manifest)
        .arg("--truth")
        .arg(&manifest)
        .arg("--out")
        .arg(&report_path));
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("100.00% acc"), "{stdout}");
    assert!(stdout.contains("0.0000 MAE"), "{stdout}");
    let report = fs::read_to_string(&report_path).unwrap();
    assert!(report.lines().count() >= 4);

    let disjoint = dir.path().join("disjoint.jsonl");
    let mut renamed =
        read_manifest_jsonl(fs::File::open(&manifest).unwrap()).unwrap();
    for row in &mut renamed {
        row.pano_id = format!("other-{}", row.pano_id);
    }
    let mut buf = Vec::new();
    write_manifest_jsonl(&mut buf, &renamed).unwrap();
    fs::write(&disjoint, &buf).unwrap();
    let output = run(bin()
        .args(["eval", "--pred"])
        .arg(&disjoint)
        .arg("--truth")
        .arg(&manifest));
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn crop_emits_specs_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let poses = dir.path().join("poses.jsonl");
    fs::write(
        &poses,
        [
            r#"{"pano_id":"pic","lat":43.0,"lon":-80.0,"heading":0.0,"width":512,"height":256}"#,
            r#"{"pano_id":"missing","lat":43.0,"lon":-80.0,"heading":0.0}"#,
        ]
        .join("\n"),
    )
    .unwrap();
    let images = dir.path().join("imgs");
    fs::create_dir(&images).unwrap();
    save_raster(&images.join("pic.png"), &RasterBuffer::filled(512, 256, [9, 120, 200]))
        .unwrap();

    let out = dir.path().join("crops");
    let output = run(bin()
        .args(["crop", "--yaw-sweep", "0,90", "--poses"])
        .arg(&poses)
        .arg("--images")
        .arg(&images)
        .arg("--out")
        .arg(&out));
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    assert!(String::from_utf8_lossy(&output.stderr).contains("no image for missing"));

    let crop = load_raster(&out.join("pic_0.png")).unwrap();
    assert_eq!((crop.width(), crop.height()), (227, 227));
    assert!(crop.data().chunks(3).all(|px| px == [9, 120, 200]));
    assert!(out.join("pic_90.png").is_file());

    let specs = fs::read_to_string(out.join("crops.jsonl")).unwrap();
    assert_eq!(specs.lines().count(), 4);
    assert!(specs.contains("\"file\":null"), "{specs}");
}
