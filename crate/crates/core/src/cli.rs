//! Command-line driver: one subcommand per stage plus a batch `pipeline`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 a metric floor
//! was violated. Logs go to standard error; artifacts go to files.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::annotations::{
    load_bbox_document, load_polygon_document, load_prediction_document, save_polygon_document,
    ClassRole, ClassTaxonomy, PolygonDocument, PredictionDocument, PrototypeLibrary,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    dataset_stats, keypoint_metrics, mask_metrics, scores_table, MaskMetrics, MetricFloors, Scores,
    DEFAULT_IOU_THRESHOLD, DEFAULT_KEYPOINT_RADIUS,
};
use crate::geometry::Point;
use crate::graph::{
    compare_graphs, compare_netlists, to_netlist, CircuitGraph, ExportFormat, GraphMetrics,
    Netlist, NodeMatching,
};
use crate::pipeline::{self, ArtifactPaths, Config};
use crate::raster::{BinaryMap, GrayImage, Polarity, ThresholdMethod};
use crate::refine::render_semantic_map;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_FLOOR: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "circuitgraph",
    version,
    about = "Handwritten circuit diagrams to netlists"
)]
struct Cli {
    /// Key-value config file (`key = value` per line, `#` comments).
    /// Command-line flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Class list, one name per line (default: built-in list).
    #[arg(long, global = true, value_name = "FILE")]
    taxonomy: Option<PathBuf>,

    /// Port prototype library JSON (default: built-in library).
    #[arg(long, global = true, value_name = "FILE")]
    prototypes: Option<PathBuf>,

    /// Worker threads for per-image parallelism (0: one per core).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    /// Accepted for scripts; every stage is deterministic and seedless.
    #[arg(long, global = true)]
    seedless: bool,

    /// More log output on standard error (repeat for more).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,

    #[command(flatten)]
    tunables: Tunables,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Default, Args)]
struct Tunables {
    /// Binarization threshold: `otsu` or a gray level t (stroke if value < t).
    #[arg(long, global = true, value_parser = parse_threshold)]
    threshold: Option<ThresholdMethod>,

    /// Which side of the threshold is ink [default: dark].
    #[arg(long, global = true, value_enum)]
    polarity: Option<PolarityArg>,

    /// Majority-filter radius applied after thresholding [default: 0].
    #[arg(long, global = true, value_name = "PX")]
    denoise_radius: Option<usize>,

    /// Outline simplification tolerance in pixels [default: 1].
    #[arg(long, global = true, value_name = "PX")]
    epsilon: Option<f64>,

    /// Smallest residual stroke region that becomes a wire [default: 8].
    #[arg(long, global = true, value_name = "PIXELS")]
    min_area: Option<usize>,

    /// Erosion radius before keypoint detection [default: 1].
    #[arg(long, global = true, value_name = "PX")]
    erosion_radius: Option<usize>,

    /// Arc-length gap that separates keypoint clusters [default: 3].
    #[arg(long, global = true, value_name = "PX")]
    cluster_gap: Option<f64>,

    /// Largest keypoint-to-port distance for a wire attachment [default: 10].
    #[arg(long, global = true, value_name = "PX")]
    tolerance: Option<f64>,

    /// Direction of annotated rotation angles [default: ccw].
    #[arg(long, global = true, value_enum)]
    rotation_direction: Option<RotationDirection>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PolarityArg {
    Dark,
    Light,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RotationDirection {
    Ccw,
    Cw,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MatchingArg {
    Geometric,
    Degree,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold a grayscale or color image into a stroke map.
    Binarize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Turn bounding boxes (or detector predictions) into coarse polygons.
    Coarse {
        /// Bounding-box XML document.
        #[arg(
            long,
            required_unless_present = "predictions",
            conflicts_with = "predictions"
        )]
        bboxes: Option<PathBuf>,
        /// Detector prediction JSON, used instead of bounding boxes.
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Lowest prediction score kept.
        #[arg(long, default_value_t = 0.5)]
        min_score: f64,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Shrink coarse polygons onto the strokes they cover.
    Refine {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Add wire polygons for strokes no other polygon covers.
    Wires {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Detect symbol terminals and wire contact points.
    Keypoints {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Name symbol keypoints after their class prototype ports.
    Ports {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the per-symbol assignment report here.
        #[arg(long)]
        assignments: Option<PathBuf>,
        /// Also write a detector-format document here.
        #[arg(long)]
        coco: Option<PathBuf>,
    },
    /// Build the circuit graph from polygons with ports.
    Graph {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Output format: json, graphml, netlist.
        #[arg(long, default_value = "json", value_parser = parse_format)]
        format: ExportFormat,
    },
    /// Derive nets from a graph JSON document.
    Netlist {
        #[arg(long)]
        graph: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write open terminals and crossover pairings here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Render strokes colored by the class of the polygon covering them.
    Overlay {
        #[arg(long)]
        polygons: PathBuf,
        #[arg(long)]
        map: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score predictions against ground truth; exit 3 below a floor.
    Eval(EvalArgs),
    /// Count files and annotations below a dataset root.
    Stats {
        root: PathBuf,
        /// Write the statistics as JSON here.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every stage on each image of a dataset directory.
    Pipeline {
        /// Directory holding images/, binmaps/ and bboxes/.
        root: PathBuf,
        /// Artifact directory [default: <root>/out].
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("inputs").required(true).multiple(true).args(["pred", "pred_netlist", "pred_graph"])))]
struct EvalArgs {
    /// Predicted polygon document (masks and ports).
    #[arg(long, requires = "gt")]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Predicted netlist text.
    #[arg(long, requires = "gt_netlist")]
    pred_netlist: Option<PathBuf>,
    #[arg(long)]
    gt_netlist: Option<PathBuf>,
    /// Predicted graph JSON.
    #[arg(long, requires = "gt_graph")]
    pred_graph: Option<PathBuf>,
    #[arg(long)]
    gt_graph: Option<PathBuf>,
    /// Node matching for graph comparison.
    #[arg(long, value_enum, default_value = "geometric")]
    matching: MatchingArg,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou_threshold: f64,
    /// Largest distance between matched keypoints.
    #[arg(long, default_value_t = DEFAULT_KEYPOINT_RADIUS)]
    keypoint_radius: f64,
    #[arg(long)]
    min_mask_f1: Option<f64>,
    #[arg(long)]
    min_keypoint_f1: Option<f64>,
    #[arg(long)]
    min_net_f1: Option<f64>,
    /// Write the report as JSON here.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn parse_threshold(s: &str) -> std::result::Result<ThresholdMethod, String> {
    if s.eq_ignore_ascii_case("otsu") {
        return Ok(ThresholdMethod::Otsu);
    }
    s.parse::<u8>()
        .map(ThresholdMethod::Fixed)
        .map_err(|_| format!("expected `otsu` or 0..=255, got `{s}`"))
}

fn parse_format(s: &str) -> std::result::Result<ExportFormat, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Directory names of the dataset layout, overridable from the config file.
#[derive(Debug, Clone)]
struct Layout {
    images: String,
    binmaps: String,
    bboxes: String,
    out: String,
}

impl Default for Layout {
    fn default() -> Self {
        Self {
            images: "images".into(),
            binmaps: "binmaps".into(),
            bboxes: "bboxes".into(),
            out: "out".into(),
        }
    }
}

struct Settings {
    config: Config,
    layout: Layout,
    workers: usize,
    taxonomy: ClassTaxonomy,
    library: PrototypeLibrary,
}

/// Applies `key = value` lines onto `config` and `layout`.
fn apply_config_file(
    path: &Path,
    config: &mut Config,
    layout: &mut Layout,
    workers: &mut usize,
) -> Result<()> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fail = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: n + 1,
            column: 1,
            message,
        };
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| fail(format!("expected `key = value`, got `{line}`")))?;
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
            value
                .parse()
                .map_err(|_| format!("bad value `{value}` for `{key}`"))
        }
        let r: std::result::Result<(), String> = (|| {
            match key {
                "threshold" => config.threshold = parse_threshold(value)?,
                "polarity" => {
                    config.polarity = match value {
                        "dark" => Polarity::DarkIsStroke,
                        "light" => Polarity::LightIsStroke,
                        _ => return Err(format!("polarity must be dark or light, got `{value}`")),
                    }
                }
                "denoise_radius" => config.denoise_radius = num(key, value)?,
                "epsilon" => config.epsilon = num(key, value)?,
                "min_area" => config.min_area = num(key, value)?,
                "erosion_radius" => config.erosion_radius = num(key, value)?,
                "cluster_gap" => config.cluster_gap = num(key, value)?,
                "tolerance" => config.tolerance = num(key, value)?,
                "rotation_direction" => {
                    config.rotation_clockwise = match value {
                        "ccw" => false,
                        "cw" => true,
                        _ => {
                            return Err(format!(
                                "rotation_direction must be ccw or cw, got `{value}`"
                            ))
                        }
                    }
                }
                "workers" => *workers = num(key, value)?,
                "images_dir" => layout.images = value.to_string(),
                "binmaps_dir" => layout.binmaps = value.to_string(),
                "bboxes_dir" => layout.bboxes = value.to_string(),
                "output_dir" => layout.out = value.to_string(),
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        })();
        r.map_err(fail)?;
    }
    Ok(())
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut config = Config::default();
    let mut layout = Layout::default();
    let mut workers = 0;
    if let Some(path) = &cli.config {
        apply_config_file(path, &mut config, &mut layout, &mut workers)?;
    }
    let t = &cli.tunables;
    if let Some(v) = t.threshold {
        config.threshold = v;
    }
    if let Some(v) = t.polarity {
        config.polarity = match v {
            PolarityArg::Dark => Polarity::DarkIsStroke,
            PolarityArg::Light => Polarity::LightIsStroke,
        };
    }
    macro_rules! take {
        ($($field:ident),*) => { $( if let Some(v) = t.$field { config.$field = v; } )* };
    }
    take!(
        denoise_radius,
        epsilon,
        min_area,
        erosion_radius,
        cluster_gap,
        tolerance
    );
    if let Some(d) = t.rotation_direction {
        config.rotation_clockwise = matches!(d, RotationDirection::Cw);
    }
    if let Some(w) = cli.workers {
        workers = w;
    }
    let taxonomy = match &cli.taxonomy {
        Some(p) => ClassTaxonomy::load(p)?,
        None => ClassTaxonomy::builtin(),
    };
    let library = match &cli.prototypes {
        Some(p) => PrototypeLibrary::load(p)?,
        None => PrototypeLibrary::builtin(),
    };
    Ok(Settings {
        config,
        layout,
        workers,
        taxonomy,
        library,
    })
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn to_json_line(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

enum Outcome {
    Done,
    FloorViolated,
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .try_init();

    let result = settings(&cli).and_then(|s| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(s.workers)
            .build()
            .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
        pool.install(|| execute(&cli.command, &s))
    });
    match result {
        Ok(Outcome::Done) => EXIT_OK,
        Ok(Outcome::FloorViolated) => EXIT_FLOOR,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn load_polygons(path: &Path, s: &Settings) -> Result<PolygonDocument> {
    let doc = load_polygon_document(path, &s.taxonomy)?;
    for d in &doc.degenerate {
        log::warn!(
            "{}: shape {} ({}) skipped: {}",
            path.display(),
            d.index,
            d.label,
            d.reason
        );
    }
    Ok(doc)
}

impl Command {
    fn output_file(&self) -> Option<&Path> {
        match self {
            Command::Binarize { output, .. }
            | Command::Coarse { output, .. }
            | Command::Refine { output, .. }
            | Command::Wires { output, .. }
            | Command::Keypoints { output, .. }
            | Command::Ports { output, .. }
            | Command::Graph { output, .. }
            | Command::Netlist { output, .. }
            | Command::Overlay { output, .. } => Some(output),
            Command::Eval(a) => a.output.as_deref(),
            Command::Stats { output, .. } => output.as_deref(),
            Command::Pipeline { .. } => None,
        }
    }
}

fn execute(command: &Command, s: &Settings) -> Result<Outcome> {
    let cfg = &s.config;
    if let Some(dir) = command
        .output_file()
        .and_then(Path::parent)
        .filter(|d| !d.as_os_str().is_empty())
    {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    match command {
        Command::Binarize { input, output } => {
            let img = GrayImage::load(input)?;
            pipeline::binarize_stage(&img, cfg).save(output)?;
        }
        Command::Coarse {
            bboxes,
            predictions,
            min_score,
            map,
            output,
        } => {
            let map = BinaryMap::load(map)?;
            let doc = match (bboxes, predictions) {
                (Some(b), _) => {
                    let set = load_bbox_document(b, &s.taxonomy)?;
                    pipeline::coarse_stage(&set, &map)?.0
                }
                (None, Some(p)) => {
                    let doc = load_prediction_document(p)?
                        .to_polygon_document(&s.taxonomy, *min_score)?;
                    if (doc.width, doc.height) != map.dims() {
                        return Err(Error::DimensionMismatch {
                            a: (doc.width, doc.height),
                            b: map.dims(),
                        });
                    }
                    doc
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            save_polygon_document(output, &doc)?;
        }
        Command::Refine {
            polygons,
            map,
            output,
        } => {
            let (doc, report) =
                pipeline::refine_stage(&load_polygons(polygons, s)?, &BinaryMap::load(map)?, cfg)?;
            log::info!(
                "refined {}, hull fallback {}, empty {:?}",
                report.refined,
                report.hull_fallback,
                report.empty_interior
            );
            save_polygon_document(output, &doc)?;
        }
        Command::Wires {
            polygons,
            map,
            output,
        } => {
            let doc =
                pipeline::wires_stage(&load_polygons(polygons, s)?, &BinaryMap::load(map)?, cfg)?;
            save_polygon_document(output, &doc)?;
        }
        Command::Keypoints {
            polygons,
            map,
            output,
        } => {
            let doc = pipeline::keypoints_stage(
                &load_polygons(polygons, s)?,
                &BinaryMap::load(map)?,
                cfg,
            )?;
            save_polygon_document(output, &doc)?;
        }
        Command::Ports {
            polygons,
            output,
            assignments,
            coco,
        } => {
            let (doc, report) =
                pipeline::ports_stage(&load_polygons(polygons, s)?, &s.library, cfg)?;
            save_polygon_document(output, &doc)?;
            if let Some(path) = assignments {
                write_file(path, to_json_line(&report))?;
            }
            if let Some(path) = coco {
                let slots = s.library.max_ports();
                write_file(
                    path,
                    PredictionDocument::from_polygon_document(&doc, &s.taxonomy, &s.library, slots)
                        .to_json(),
                )?;
            }
        }
        Command::Graph {
            polygons,
            output,
            format,
        } => {
            let (graph, report) = pipeline::graph_stage(&load_polygons(polygons, s)?, cfg);
            for a in &report.anomalies {
                log::warn!("{}: {a:?}", polygons.display());
            }
            write_file(output, graph.export(*format))?;
        }
        Command::Netlist {
            graph,
            output,
            report,
        } => {
            let (netlist, rep) = to_netlist(&CircuitGraph::load(graph)?);
            write_file(output, netlist.to_text())?;
            if let Some(path) = report {
                write_file(path, to_json_line(&rep))?;
            }
        }
        Command::Overlay {
            polygons,
            map,
            output,
        } => {
            let doc = load_polygons(polygons, s)?;
            let map = BinaryMap::load(map)?;
            render_semantic_map(&map, &doc.polygons, &s.taxonomy)?.save(output)?;
        }
        Command::Eval(args) => return eval(args, s),
        Command::Stats { root, output } => {
            let stats = dataset_stats(root);
            print!("{}", stats.summary());
            if let Some(path) = output {
                write_file(path, stats.to_json())?;
            }
        }
        Command::Pipeline { root, output } => {
            let out = output.clone().unwrap_or_else(|| root.join(&s.layout.out));
            batch(root, &out, s)?;
        }
    }
    Ok(Outcome::Done)
}

#[derive(Serialize)]
struct EvalReport {
    masks: Option<MaskMetrics>,
    keypoints: Option<Scores>,
    nets: Option<Scores>,
    graph: Option<GraphMetrics>,
    violations: Vec<String>,
}

fn symbol_ports(doc: &PolygonDocument) -> Vec<Point> {
    doc.polygons
        .iter()
        .filter(|p| p.role() == ClassRole::Symbol)
        .flat_map(|p| p.ports.iter().flatten().map(|q| q.position))
        .collect()
}

fn eval(args: &EvalArgs, s: &Settings) -> Result<Outcome> {
    let mut report = EvalReport {
        masks: None,
        keypoints: None,
        nets: None,
        graph: None,
        violations: Vec::new(),
    };
    if let (Some(p), Some(g)) = (&args.pred, &args.gt) {
        let (pred, gt) = (load_polygons(p, s)?, load_polygons(g, s)?);
        let m = mask_metrics(
            &pred.polygons,
            &gt.polygons,
            args.iou_threshold,
            gt.width,
            gt.height,
        );
        print!("{}", scores_table(&m.per_class, &m.overall));
        report.masks = Some(m);
        report.keypoints = Some(keypoint_metrics(
            &symbol_ports(&pred),
            &symbol_ports(&gt),
            args.keypoint_radius,
        ));
    }
    if let (Some(p), Some(g)) = (&args.pred_graph, &args.gt_graph) {
        let (pred, gt) = (CircuitGraph::load(p)?, CircuitGraph::load(g)?);
        let mode = match args.matching {
            MatchingArg::Geometric => NodeMatching::Geometric,
            MatchingArg::Degree => NodeMatching::DegreeSequence,
        };
        let m = compare_graphs(&pred, &gt, mode);
        report.nets = Some(m.nets);
        report.graph = Some(m);
    }
    if let (Some(p), Some(g)) = (&args.pred_netlist, &args.gt_netlist) {
        let read = |path: &Path| -> Result<Netlist> {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            Netlist::parse_text(&text).map_err(|e| match e {
                Error::Parse {
                    line,
                    column,
                    message,
                    ..
                } => Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    column,
                    message,
                },
                other => other,
            })
        };
        report.nets = Some(compare_netlists(&read(p)?, &read(g)?));
    }
    let mut summary = BTreeMap::new();
    if let Some(k) = &report.keypoints {
        summary.insert("keypoints".to_string(), *k);
    }
    if let Some(n) = &report.nets {
        summary.insert("nets".to_string(), *n);
    }
    if let Some(g) = &report.graph {
        summary.insert("graph nodes".to_string(), g.nodes);
        summary.insert("graph edges".to_string(), g.edges);
    }
    if !summary.is_empty() {
        let overall = report
            .masks
            .as_ref()
            .map(|m| m.overall)
            .unwrap_or_else(|| Scores::from_counts(0, 0, 0));
        if report.masks.is_some() {
            print!("{}", scores_table(&summary, &overall));
        } else {
            for (name, sc) in &summary {
                println!(
                    "{name}: precision {:.4} recall {:.4} f1 {:.4}",
                    sc.precision, sc.recall, sc.f1
                );
            }
        }
    }
    let floors = MetricFloors {
        mask_f1: args.min_mask_f1,
        keypoint_f1: args.min_keypoint_f1,
        net_f1: args.min_net_f1,
    };
    report.violations = floors.check(
        report.masks.as_ref().map(|m| &m.overall),
        report.keypoints.as_ref(),
        report.nets.as_ref(),
    );
    if let Some(path) = &args.output {
        write_file(path, to_json_line(&report))?;
    }
    if report.violations.is_empty() {
        Ok(Outcome::Done)
    } else {
        for v in &report.violations {
            eprintln!("floor violated: {v}");
        }
        Ok(Outcome::FloorViolated)
    }
}

const IMAGE_EXTENSIONS: [&str; 4] = ["png", "jpg", "jpeg", "PNG"];

fn stroke_map(root: &Path, id: &str, s: &Settings) -> Result<BinaryMap> {
    let binmap = root.join(&s.layout.binmaps).join(format!("{id}.png"));
    if binmap.is_file() {
        return BinaryMap::load(&binmap);
    }
    for ext in IMAGE_EXTENSIONS {
        let img = root.join(&s.layout.images).join(format!("{id}.{ext}"));
        if img.is_file() {
            return Ok(pipeline::binarize_stage(&GrayImage::load(&img)?, &s.config));
        }
    }
    Err(Error::Validation(format!(
        "{id}: neither a binary map nor an image was found"
    )))
}

fn process_image(root: &Path, out: &Path, xml: &Path, s: &Settings) -> Result<(String, usize)> {
    let set = load_bbox_document(xml, &s.taxonomy)?;
    let id = xml
        .file_stem()
        .map(|x| x.to_string_lossy().into_owned())
        .unwrap_or_else(|| set.image_id.clone());
    let map = stroke_map(root, &id, s)?;
    let result = pipeline::run(&set, &map, &s.library, &s.config)?;
    let paths = ArtifactPaths::new(out, &id);
    save_polygon_document(&paths.polygons, &result.document)?;
    write_file(&paths.graph, result.graph.to_json())?;
    write_file(&paths.netlist, result.netlist.to_text())?;
    write_file(&paths.report, result.report.to_json())?;
    render_semantic_map(&map, &result.document.polygons, &s.taxonomy)?.save(&paths.overlay)?;
    Ok((id, result.netlist.nets.len()))
}

#[derive(Serialize)]
struct BatchSummary {
    images: usize,
    succeeded: BTreeMap<String, usize>,
    failed: BTreeMap<String, String>,
}

fn batch(root: &Path, out: &Path, s: &Settings) -> Result<()> {
    let dir = root.join(&s.layout.bboxes);
    let mut docs: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(|e| Error::io(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "xml"))
        .collect();
    docs.sort();
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let results: Vec<(PathBuf, Result<(String, usize)>)> = docs
        .par_iter()
        .map(|xml| (xml.clone(), process_image(root, out, xml, s)))
        .collect();
    let mut summary = BatchSummary {
        images: docs.len(),
        succeeded: BTreeMap::new(),
        failed: BTreeMap::new(),
    };
    for (xml, r) in results {
        match r {
            Ok((id, nets)) => {
                log::info!("{id}: {nets} nets");
                summary.succeeded.insert(id, nets);
            }
            Err(e) => {
                log::error!("{}: {e}", xml.display());
                summary
                    .failed
                    .insert(xml.display().to_string(), e.to_string());
            }
        }
    }
    write_file(&out.join("summary.json"), to_json_line(&summary))?;
    if summary.failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{} of {} images failed; see {}",
            summary.failed.len(),
            summary.images,
            out.join("summary.json").display()
        )))
    }
}
