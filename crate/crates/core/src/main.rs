//! Command-line front end: label poses against a road network, filter and
//! split manifests, evaluate predictions, and crop panoramas.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use streetlabel::index::{MatchConfig, SegmentIndex, DEFAULT_CELL_SIZE_M};
use streetlabel::label::LabelConfig;
use streetlabel::manifest::{
    apply_filter, read_manifest_jsonl, split_rows, write_manifest_csv, write_manifest_jsonl,
    FilterPolicy, SplitSpec, DEFAULT_BLOCK_SIZE_M,
};
use streetlabel::metrics::eval_report;
use streetlabel::osm::{extract_road_network, DEFAULT_HIGHWAY_ALLOWLIST};
use streetlabel::pano::{
    dedupe_poses, is_full_equirect, load_raster, parse_pano_metadata, resample, save_raster,
    CropSpec, DEFAULT_MIN_SPACING_M,
};
use streetlabel::pipeline::{eval_kinds, manifest_to_eval_rows, run_labeling};

/// Environment variable naming a TOML file with default flag values.
const CONFIG_ENV: &str = "STREETLABEL_CONFIG";
const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.15, 0.15];

#[derive(Parser)]
#[command(
    name = "streetlabel",
    version,
    about = "Label driving affordances for street-level camera poses from OSM road geometry"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Label poses against an OSM extract and write a manifest.
    Label(LabelCmd),
    /// Drop manifest rows a training policy excludes.
    Filter(FilterCmd),
    /// Partition a manifest into train/val/test by spatial block.
    Split(SplitCmd),
    /// Score a prediction manifest against a truth manifest.
    Eval(EvalCmd),
    /// Compute perspective crops (and their specs) from panoramas.
    Crop(CropCmd),
}

#[derive(Args)]
struct LabelCmd {
    /// OSM XML extract.
    #[arg(long)]
    osm: PathBuf,
    /// Pose metadata, JSON lines.
    #[arg(long)]
    poses: PathBuf,
    /// Output manifest path (JSON lines).
    #[arg(long)]
    out: PathBuf,
    /// Also write the manifest as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Maximum pose-to-centerline match distance, meters.
    #[arg(long)]
    max_match_dist: Option<f64>,
    /// Heading mismatch weight, meters per radian of bearing error.
    #[arg(long)]
    heading_weight: Option<f64>,
    /// Maximum angle to the road axis that still counts as drivable, degrees.
    #[arg(long)]
    drivable_angle: Option<f64>,
    /// Distance at or under which an intersection is "ahead", meters.
    #[arg(long)]
    intersection_true: Option<f64>,
    /// Distance beyond which an intersection is not ahead, meters.
    #[arg(long)]
    intersection_false: Option<f64>,
    /// How far to walk the road graph looking for an intersection, meters.
    #[arg(long)]
    max_search: Option<f64>,
    /// Minimum onward road length for a heading to be drivable, meters.
    #[arg(long)]
    min_continuation: Option<f64>,
    /// Label for left-hand-traffic regions.
    #[arg(long)]
    left_hand_traffic: bool,
    /// Minimum spacing between kept poses, meters.
    #[arg(long)]
    min_spacing: Option<f64>,
    /// Comma-separated rotation offsets to label per pose, degrees.
    #[arg(long)]
    yaw_sweep: Option<String>,
}

#[derive(Args)]
struct FilterCmd {
    /// Input manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Output manifest path.
    #[arg(long)]
    out: PathBuf,
    /// Also write the filtered manifest as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Keep rows whose intersection label is ambiguous.
    #[arg(long)]
    keep_ambiguous: bool,
    /// Keep rows that matched no road.
    #[arg(long)]
    keep_unmatched: bool,
    /// Keep rows flagged as perpendicular matches.
    #[arg(long)]
    keep_perpendicular: bool,
    /// Keep only rows with at least this many lanes.
    #[arg(long)]
    lanes_min: Option<u32>,
    /// Keep only rows with at most this many lanes.
    #[arg(long)]
    lanes_max: Option<u32>,
}

#[derive(Args)]
struct SplitCmd {
    /// Input manifest (JSON lines).
    #[arg(long)]
    manifest: PathBuf,
    /// Output directory for train.jsonl, val.jsonl, test.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Train,val,test fractions summing to 1.
    #[arg(long)]
    ratios: Option<String>,
    /// Shuffle seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Spatial block edge length, meters.
    #[arg(long)]
    block_size: Option<f64>,
}

#[derive(Args)]
struct EvalCmd {
    /// Predicted rows (JSON lines, manifest schema, keyed by pano_id).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth manifest.
    #[arg(long)]
    truth: PathBuf,
    /// Write the report as JSON lines here (table always prints).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CropCmd {
    /// Pose metadata, JSON lines.
    #[arg(long)]
    poses: PathBuf,
    /// Directory of equirectangular panoramas named <pano_id>.png.
    #[arg(long)]
    images: Option<PathBuf>,
    /// Output directory for crops and crops.jsonl.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated crop yaws relative to the panorama front, degrees.
    #[arg(long)]
    yaw_sweep: Option<String>,
}

/// Optional defaults loaded from the file named by `STREETLABEL_CONFIG`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    max_match_dist: Option<f64>,
    heading_weight: Option<f64>,
    drivable_angle: Option<f64>,
    intersection_true: Option<f64>,
    intersection_false: Option<f64>,
    max_search: Option<f64>,
    min_continuation: Option<f64>,
    left_hand_traffic: Option<bool>,
    seed: Option<u64>,
    ratios: Option<[f64; 3]>,
    block_size: Option<f64>,
    yaw_sweep: Option<Vec<f64>>,
    min_spacing: Option<f64>,
}

enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) => m,
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { 1 } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let config = match load_file_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {}", e.message());
            return ExitCode::from(e.exit_code());
        }
    };
    let result = match cli.command {
        Command::Label(cmd) => run_label(cmd, &config),
        Command::Filter(cmd) => run_filter(cmd),
        Command::Split(cmd) => run_split(cmd, &config),
        Command::Eval(cmd) => run_eval(cmd),
        Command::Crop(cmd) => run_crop(cmd, &config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_file_config() -> Result<FileConfig, CliError> {
    let Some(path) = std::env::var_os(CONFIG_ENV) else {
        return Ok(FileConfig::default());
    };
    let text = fs::read_to_string(&path)
        .map_err(|e| CliError::Data(format!("config {}: {e}", Path::new(&path).display())))?;
    toml::from_str(&text)
        .map_err(|e| CliError::Usage(format!("config {}: {e}", Path::new(&path).display())))
}

fn parse_f64_list(text: &str, flag: &str) -> Result<Vec<f64>, CliError> {
    text.split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{flag}: `{part}` is not a number")))
        })
        .collect()
}

fn resolve_yaw_sweep(flag: &Option<String>, config: &FileConfig) -> Result<Vec<f64>, CliError> {
    match flag {
        Some(text) => parse_f64_list(text, "--yaw-sweep"),
        None => Ok(config.yaw_sweep.clone().unwrap_or_else(|| vec![0.0])),
    }
}

fn create_out_file(path: &Path) -> Result<BufWriter<File>, CliError> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        CliError::Data(format!("cannot create {}: {e}", path.display()))
    })?))
}

fn run_label(cmd: LabelCmd, config: &FileConfig) -> Result<(), CliError> {
    let osm_text = fs::read(&cmd.osm)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.osm.display())))?;
    let parsed = streetlabel::osm::parse_osm_xml(osm_text.as_slice()).map_err(data_err)?;
    if parsed.warnings.total() > 0 {
        eprintln!(
            "osm warnings: {} duplicate nodes, {} duplicate ways, {} dropped ways",
            parsed.warnings.duplicate_nodes,
            parsed.warnings.duplicate_ways,
            parsed.warnings.dropped_ways
        );
    }
    let (network, stats) =
        extract_road_network(parsed.nodes, parsed.ways, &DEFAULT_HIGHWAY_ALLOWLIST);
    eprintln!(
        "road network: {} ways kept, {} excluded, {} segments, {} intersections",
        stats.ways_kept,
        stats.ways_excluded,
        network.segments.len(),
        network.intersections.len()
    );

    let poses_file = File::open(&cmd.poses)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.poses.display())))?;
    let (poses, diagnostics) = parse_pano_metadata(poses_file).map_err(data_err)?;
    for d in &diagnostics {
        eprintln!("poses: {d}");
    }
    if poses.is_empty() {
        return Err(CliError::Data("no poses".to_string()));
    }
    let min_spacing = cmd
        .min_spacing
        .or(config.min_spacing)
        .unwrap_or(DEFAULT_MIN_SPACING_M);
    let poses = dedupe_poses(poses, min_spacing);

    let match_config = MatchConfig {
        max_match_dist_m: cmd
            .max_match_dist
            .or(config.max_match_dist)
            .unwrap_or(MatchConfig::default().max_match_dist_m),
        heading_weight_m_per_rad: cmd
            .heading_weight
            .or(config.heading_weight)
            .unwrap_or(MatchConfig::default().heading_weight_m_per_rad),
    };
    let defaults = LabelConfig::default();
    let label_config = LabelConfig {
        drivable_angle_rad: cmd
            .drivable_angle
            .or(config.drivable_angle)
            .map(f64::to_radians)
            .unwrap_or(defaults.drivable_angle_rad),
        intersection_true_m: cmd
            .intersection_true
            .or(config.intersection_true)
            .unwrap_or(defaults.intersection_true_m),
        intersection_false_m: cmd
            .intersection_false
            .or(config.intersection_false)
            .unwrap_or(defaults.intersection_false_m),
        max_search_m: cmd.max_search.or(config.max_search).unwrap_or(defaults.max_search_m),
        min_continuation_m: cmd
            .min_continuation
            .or(config.min_continuation)
            .unwrap_or(defaults.min_continuation_m),
        right_hand_traffic: !(cmd.left_hand_traffic
            || config.left_hand_traffic.unwrap_or(false)),
    };
    label_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let yaw_sweep = resolve_yaw_sweep(&cmd.yaw_sweep, config)?;

    let index = SegmentIndex::build(&network, DEFAULT_CELL_SIZE_M);
    let run = run_labeling(&poses, &yaw_sweep, &network, &index, &match_config, &label_config);

    let mut out = create_out_file(&cmd.out)?;
    write_manifest_jsonl(&mut out, &run.rows).map_err(data_err)?;
    out.flush().map_err(data_err)?;
    if let Some(csv_path) = &cmd.csv {
        let csv_file = create_out_file(csv_path)?;
        write_manifest_csv(csv_file, &run.rows).map_err(data_err)?;
    }
    print!("{}", run.summary.render());
    Ok(())
}

fn run_filter(cmd: FilterCmd) -> Result<(), CliError> {
    let file = File::open(&cmd.manifest)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.manifest.display())))?;
    let rows = read_manifest_jsonl(file).map_err(data_err)?;
    let lane_range = match (cmd.lanes_min, cmd.lanes_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(0), hi.unwrap_or(u32::MAX))),
    };
    let policy = FilterPolicy {
        drop_unmatched: !cmd.keep_unmatched,
        drop_ambiguous: !cmd.keep_ambiguous,
        drop_perpendicular: !cmd.keep_perpendicular,
        lane_range,
    };
    let kept = apply_filter(&rows, &policy);
    let mut out = create_out_file(&cmd.out)?;
    write_manifest_jsonl(&mut out, &kept).map_err(data_err)?;
    out.flush().map_err(data_err)?;
    if let Some(csv_path) = &cmd.csv {
        let csv_file = create_out_file(csv_path)?;
        write_manifest_csv(csv_file, &kept).map_err(data_err)?;
    }
    println!("kept {} of {} rows", kept.len(), rows.len());
    Ok(())
}

fn run_split(cmd: SplitCmd, config: &FileConfig) -> Result<(), CliError> {
    let file = File::open(&cmd.manifest)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.manifest.display())))?;
    let rows = read_manifest_jsonl(file).map_err(data_err)?;
    let ratios = match &cmd.ratios {
        Some(text) => {
            let list = parse_f64_list(text, "--ratios")?;
            <[f64; 3]>::try_from(list).map_err(|list| {
                CliError::Usage(format!("--ratios: expected 3 values, got {}", list.len()))
            })?
        }
        None => config.ratios.unwrap_or(DEFAULT_RATIOS),
    };
    let spec = SplitSpec::new(
        ratios,
        cmd.seed.or(config.seed).unwrap_or(0),
        cmd.block_size.or(config.block_size).unwrap_or(DEFAULT_BLOCK_SIZE_M),
    )
    .map_err(|e| CliError::Usage(e.to_string()))?;
    let split = split_rows(&rows, &spec).map_err(data_err)?;

    fs::create_dir_all(&cmd.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cmd.out.display())))?;
    for (name, part) in
        [("train", &split.train), ("val", &split.val), ("test", &split.test)]
    {
        let path = cmd.out.join(format!("{name}.jsonl"));
        let mut out = create_out_file(&path)?;
        write_manifest_jsonl(&mut out, part).map_err(data_err)?;
        out.flush().map_err(data_err)?;
    }
    println!(
        "train {} rows, val {} rows, test {} rows",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    Ok(())
}

fn run_eval(cmd: EvalCmd) -> Result<(), CliError> {
    let pred_file = File::open(&cmd.pred)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.pred.display())))?;
    let preds = read_manifest_jsonl(pred_file).map_err(data_err)?;
    let truth_file = File::open(&cmd.truth)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.truth.display())))?;
    let truths = read_manifest_jsonl(truth_file).map_err(data_err)?;
    let report = eval_report(
        &manifest_to_eval_rows(&preds),
        &manifest_to_eval_rows(&truths),
        &eval_kinds(),
    )
    .map_err(data_err)?;
    if let Some(path) = &cmd.out {
        let mut out = create_out_file(path)?;
        out.write_all(report.to_jsonl().as_bytes()).map_err(data_err)?;
        out.flush().map_err(data_err)?;
    }
    print!("{}", report.render_table());
    Ok(())
}

#[derive(serde::Serialize)]
struct CropRecord {
    pano_id: String,
    yaw_deg: f64,
    file: Option<String>,
    out_w: u32,
    out_h: u32,
    hfov_deg: f64,
    focal_px: f64,
    source_w: u32,
    source_h: u32,
}

fn run_crop(cmd: CropCmd, config: &FileConfig) -> Result<(), CliError> {
    let poses_file = File::open(&cmd.poses)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", cmd.poses.display())))?;
    let (poses, diagnostics) = parse_pano_metadata(poses_file).map_err(data_err)?;
    for d in &diagnostics {
        eprintln!("poses: {d}");
    }
    if poses.is_empty() {
        return Err(CliError::Data("no poses".to_string()));
    }
    let yaw_sweep = resolve_yaw_sweep(&cmd.yaw_sweep, config)?;
    fs::create_dir_all(&cmd.out)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", cmd.out.display())))?;

    // one raster load per pose, reused across the sweep
    let mut records = Vec::new();
    let mut written = 0usize;
    for pose in &poses {
        let raster = match &cmd.images {
            None => None,
            Some(dir) => {
                let path = dir.join(format!("{}.png", pose.pano_id));
                if path.is_file() {
                    let raster = load_raster(&path).map_err(data_err)?;
                    if !is_full_equirect(raster.width(), raster.height()) {
                        eprintln!(
                            "warning: {} is {}x{}, not a 2:1 equirectangular panorama",
                            path.display(),
                            raster.width(),
                            raster.height()
                        );
                    }
                    Some(raster)
                } else {
                    eprintln!("warning: no image for {} at {}", pose.pano_id, path.display());
                    None
                }
            }
        };
        for &yaw_deg in &yaw_sweep {
            let (source_w, source_h) = match &raster {
                Some(r) => (r.width(), r.height()),
                None => (pose.source_width_px, pose.source_height_px),
            };
            let spec = CropSpec::with_defaults(yaw_deg.to_radians(), source_w, source_h)
                .map_err(|e| CliError::Usage(e.to_string()))?;
            let file = match &raster {
                Some(r) => {
                    let crop = resample(r, &spec).map_err(data_err)?;
                    let name = format!("{}_{}.png", pose.pano_id, yaw_deg);
                    save_raster(&cmd.out.join(&name), &crop).map_err(data_err)?;
                    written += 1;
                    Some(name)
                }
                None => None,
            };
            let (out_w, out_h) = spec.out_size();
            records.push(CropRecord {
                pano_id: pose.pano_id.clone(),
                yaw_deg,
                file,
                out_w,
                out_h,
                hfov_deg: spec.hfov_rad().to_degrees(),
                focal_px: spec.focal_px(),
                source_w,
                source_h,
            });
        }
    }

    let mut out = create_out_file(&cmd.out.join("crops.jsonl"))?;
    for record in &records {
        serde_json::to_writer(&mut out, record)
            .map_err(|e| CliError::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(data_err)?;
    }
    out.flush().map_err(data_err)?;
    println!("{} crop specs, {} images written", records.len(), written);
    Ok(())
}
