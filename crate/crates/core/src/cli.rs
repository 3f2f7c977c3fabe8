//! The `humandet` command line.
//!
//! Exit codes: 0 success, 2 configuration error, 3 model/format error,
//! 4 data error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::evalbench::{
    bench_fps, emit_report, evaluate_dataset, rates, EvalReport, ProcessSampler, ReportFormat, DEFAULT_MATCH_IOU,
};
use crate::haar::{
    cascade_detect, generate_candidates, load_cascade, save_cascade, train_cascade, CascadeModel, CascadeTrainConfig,
    DetectParams,
};
use crate::hog::{
    detect_multiscale, load_hog_model, save_hog_model, svm_score, train_hog_svm, HogConfig, HogDetectParams,
    HogSvmModel, MergeRule, SvmParams,
};
use crate::imagecore::{
    format_detection_line, ground_truth, load_image, parse_annotations, save_image, AnnotationRecord, BoundingBox,
    Detection, Image,
};
use crate::lcnn::{
    analyze, build_lcnn, lcnn_architecture, load_model, save_model, ssd_detect, train_toy, Architecture, CnnModel,
    LcnnConfig, ToySample, TrainConfig, DEFAULT_CONF_THRESHOLD, DEFAULT_NMS_IOU,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_FORMAT: i32 = 3;
pub const EXIT_DATA: i32 = 4;

/// Maps an error to the process exit code.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        Error::Format(_) | Error::Shape(_) | Error::Type(_) | Error::Io(_) => EXIT_FORMAT,
        Error::Input(_) | Error::Channel(_) | Error::Bounds(_) => EXIT_DATA,
    }
}

#[derive(Debug, Parser)]
#[command(name = "humandet", version, about = "Human detection with Haar cascades, HOG+SVM and a lightweight CNN")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub shared: Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DetectorKind {
    Haar,
    Hogsvm,
    Lcnn,
    /// Sleeps for `--stub-ms` per frame (bench only).
    Stub,
}

impl DetectorKind {
    fn name(self) -> &'static str {
        match self {
            DetectorKind::Haar => "haar",
            DetectorKind::Hogsvm => "hogsvm",
            DetectorKind::Lcnn => "lcnn",
            DetectorKind::Stub => "stub",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Table,
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

/// Flags accepted by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Shared {
    /// Model file (detect, bench) or architecture JSON (analyze).
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Input images or directories; annotation/detection file for eval;
    /// dataset directory for train.
    #[arg(long, global = true, num_args = 1..)]
    pub input: Vec<PathBuf>,
    /// Output file (stdout when omitted; model path for train).
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Table)]
    pub format: FormatArg,
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Worker threads for per-image work.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Minimum CNN confidence, in [0, 1].
    #[arg(long, global = true)]
    pub conf: Option<f64>,
    /// Overlap above which duplicate boxes are suppressed, in [0, 1].
    #[arg(long = "nms-iou", global = true)]
    pub nms_iou: Option<f64>,
    /// Add published reference figures next to measured ones.
    #[arg(long = "paper-ref", global = true)]
    pub with_reference: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a detector over images and print annotation lines with scores.
    Detect(DetectArgs),
    /// Train a model from a directory of images and `annotations.txt`.
    Train(TrainArgs),
    /// Measure FPS, CPU and memory of a detector over frames.
    Bench(BenchArgs),
    /// Compare a detection file with ground truth.
    Eval(EvalArgs),
    /// Per-layer MAC and parameter table.
    Analyze(AnalyzeArgs),
    /// Test helper: optionally allocate memory, then idle.
    #[command(hide = true)]
    Stub(StubArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub detector: DetectorKind,
    /// Directory for copies of the inputs with boxes drawn on them.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// How hogsvm collapses overlapping window hits.
    #[arg(long, value_enum, default_value_t = MergeArg::Nms)]
    pub merge: MergeArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MergeArg {
    Nms,
    BiggestBox,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub detector: DetectorKind,
    /// Class name of positive samples.
    #[arg(long, default_value = "person")]
    pub positive_class: String,
    /// Random background crops added per image as extra negatives.
    #[arg(long, default_value_t = 0)]
    pub mine_negatives: usize,
    /// Window size `WxH` for haar/hogsvm.
    #[arg(long)]
    pub window: Option<String>,
    /// Boosting rounds per cascade stage.
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    /// Cascade stages.
    #[arg(long, default_value_t = 1)]
    pub stages: usize,
    /// Haar candidate position stride in pixels.
    #[arg(long, default_value_t = 2)]
    pub feature_stride: u32,
    /// SVM epochs.
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// SVM regularization.
    #[arg(long, default_value_t = 1e-3)]
    pub lambda: f64,
    /// CNN gradient steps.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    /// CNN learning rate.
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    /// CNN channel width multiplier.
    #[arg(long, default_value_t = 0.25)]
    pub width_multiplier: f64,
    /// CNN input side.
    #[arg(long, default_value_t = 64)]
    pub input_size: usize,
    /// Fraction of images held out for validation.
    #[arg(long, default_value_t = 0.15)]
    pub validation_fraction: f64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_enum)]
    pub detector: DetectorKind,
    /// Timed seconds after warm-up.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    /// Per-frame sleep of the stub detector.
    #[arg(long, default_value_t = 100)]
    pub stub_ms: u64,
    /// Process sampling period.
    #[arg(long, default_value_t = 100)]
    pub sample_ms: u64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Ground-truth annotation file.
    #[arg(long)]
    pub ground_truth: PathBuf,
    /// Overlap needed for a detection to count as correct.
    #[arg(long, default_value_t = DEFAULT_MATCH_IOU)]
    pub iou: f64,
    /// Name used in the report row.
    #[arg(long, default_value = "detections")]
    pub detector: String,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long, default_value_t = 1.0)]
    pub width_multiplier: f64,
    #[arg(long, default_value_t = 224)]
    pub input_size: usize,
}

#[derive(Debug, Args)]
pub struct StubArgs {
    /// Idle time before allocating.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
    /// Megabytes to allocate and touch.
    #[arg(long, default_value_t = 0)]
    pub alloc_mb: usize,
    /// Idle time after allocating.
    #[arg(long, default_value_t = 1000)]
    pub hold_ms: u64,
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn run() -> i32 {
    run_from(std::env::args_os())
}

pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("humandet: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let s = &cli.shared;
    if let Some(c) = s.conf {
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::config(format!("--conf {c} is outside [0, 1]")));
        }
    }
    if let Some(n) = s.nms_iou {
        if !(0.0..=1.0).contains(&n) {
            return Err(Error::config(format!("--nms-iou {n} is outside [0, 1]")));
        }
    }
    if s.jobs == 0 {
        return Err(Error::config("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Detect(a) => cmd_detect(s, a),
        Command::Train(a) => cmd_train(s, a),
        Command::Bench(a) => cmd_bench(s, a),
        Command::Eval(a) => cmd_eval(s, a),
        Command::Analyze(a) => cmd_analyze(s, a),
        Command::Stub(a) => cmd_stub(a),
    }
}

fn write_output(shared: &Shared, text: &str) -> Result<()> {
    match &shared.output {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn is_image(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("pgm" | "ppm" | "pnm"))
}

/// Expands directories (sorted, PGM/PPM only) and checks files exist.
fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    if inputs.is_empty() {
        return Err(Error::config("no --input given"));
    }
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut files: Vec<PathBuf> =
                std::fs::read_dir(p)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|f| is_image(f)).collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(Error::config(format!("input {} does not exist", p.display())));
        }
    }
    if out.is_empty() {
        return Err(Error::config("no PGM/PPM frames found in the inputs"));
    }
    Ok(out)
}

fn image_id(p: &Path) -> String {
    p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn require_model(shared: &Shared) -> Result<&Path> {
    let p = shared.model.as_deref().ok_or_else(|| Error::config("--model is required"))?;
    if !p.is_file() {
        let msg = format!("model file {} not found", p.display());
        return Err(Error::Io(std::io::Error::new(std::io::ErrorKind::NotFound, msg)));
    }
    Ok(p)
}

/// A loaded detector ready to run on images.
enum Loaded {
    Haar(CascadeModel, DetectParams),
    Hog(HogSvmModel, HogDetectParams),
    Lcnn(Box<CnnModel>, f64, f64),
    Stub(Duration),
}

impl Loaded {
    fn load(kind: DetectorKind, shared: &Shared, stub_ms: u64, merge: MergeRule) -> Result<Self> {
        let nms_default = |d: f64| shared.nms_iou.unwrap_or(d);
        Ok(match kind {
            DetectorKind::Haar => {
                let params = DetectParams { nms_iou: nms_default(DetectParams::default().nms_iou), ..Default::default() };
                Loaded::Haar(load_cascade(require_model(shared)?)?, params)
            }
            DetectorKind::Hogsvm => {
                let params = HogDetectParams {
                    merge,
                    merge_iou: nms_default(HogDetectParams::default().merge_iou),
                    ..Default::default()
                };
                Loaded::Hog(load_hog_model(require_model(shared)?)?, params)
            }
            DetectorKind::Lcnn => Loaded::Lcnn(
                Box::new(load_model(require_model(shared)?)?),
                shared.conf.unwrap_or(DEFAULT_CONF_THRESHOLD),
                nms_default(DEFAULT_NMS_IOU),
            ),
            DetectorKind::Stub => Loaded::Stub(Duration::from_millis(stub_ms)),
        })
    }

    fn detect(&self, img: &Image) -> Result<Vec<Detection>> {
        match self {
            Loaded::Haar(m, p) => cascade_detect(m, img, p),
            Loaded::Hog(m, p) => detect_multiscale(m, img, p),
            Loaded::Lcnn(m, conf, nms) => ssd_detect(m, img, *conf, *nms),
            Loaded::Stub(d) => {
                std::thread::sleep(*d);
                Ok(Vec::new())
            }
        }
    }
}

/// Runs `f` over `items` on up to `jobs` threads, keeping input order.
fn parallel_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if jobs <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(jobs);
    std::thread::scope(|scope| {
        let handles: Vec<_> =
            items.chunks(chunk).map(|c| scope.spawn(|| c.iter().map(&f).collect::<Vec<R>>())).collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    })
}

/// Copy of `img` in colour with 1-pixel red rectangle outlines.
pub fn draw_boxes(img: &Image, dets: &[Detection]) -> Image {
    let mut out = img.to_rgb();
    let (w, h) = (out.width() as i64, out.height() as i64);
    let mut put = |x: i64, y: i64| {
        if x >= 0 && y >= 0 && x < w && y < h {
            out.set(x as usize, y as usize, 0, 255.0);
            out.set(x as usize, y as usize, 1, 0.0);
            out.set(x as usize, y as usize, 2, 0.0);
        }
    };
    for d in dets {
        let x0 = d.bbox.x.round() as i64;
        let y0 = d.bbox.y.round() as i64;
        let x1 = (d.bbox.right().round() as i64 - 1).max(x0);
        let y1 = (d.bbox.bottom().round() as i64 - 1).max(y0);
        for x in x0..=x1 {
            put(x, y0);
            put(x, y1);
        }
        for y in y0..=y1 {
            put(x0, y);
            put(x1, y);
        }
    }
    out
}

fn cmd_detect(shared: &Shared, a: &DetectArgs) -> Result<()> {
    if a.detector == DetectorKind::Stub {
        return Err(Error::config("the stub detector is only available to bench"));
    }
    let merge = match a.merge {
        MergeArg::Nms => MergeRule::Nms,
        MergeArg::BiggestBox => MergeRule::BiggestBox,
    };
    let detector = Loaded::load(a.detector, shared, 0, merge)?;
    let files = collect_images(&shared.input)?;
    if let Some(dir) = &a.overlay {
        std::fs::create_dir_all(dir)?;
    }
    let results = parallel_map(&files, shared.jobs, |f| -> Result<(String, Vec<Detection>)> {
        let img = load_image(f)?;
        let dets = detector.detect(&img)?;
        if let Some(dir) = &a.overlay {
            save_image(&draw_boxes(&img, &dets), dir.join(format!("{}_boxes.ppm", image_id(f))))?;
        }
        Ok((image_id(f), dets))
    });
    let mut text = String::new();
    for r in results {
        let (id, dets) = r?;
        for d in &dets {
            let _ = writeln!(text, "{}", format_detection_line(&id, d));
        }
    }
    write_output(shared, &text)
}

fn parse_window(s: &str) -> Result<(usize, usize)> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| Error::config(format!("window {s:?} is not WxH")))?;
    let parse = |v: &str| v.trim().parse::<usize>().ok().filter(|n| *n > 0);
    match (parse(w), parse(h)) {
        (Some(w), Some(h)) => Ok((w, h)),
        _ => Err(Error::config(format!("window {s:?} is not WxH"))),
    }
}

/// A dataset directory: images plus `annotations.txt`.
struct Dataset {
    images: Vec<(String, Image)>,
    records: Vec<AnnotationRecord>,
}

fn load_dataset(shared: &Shared) -> Result<Dataset> {
    let dir = match shared.input.as_slice() {
        [d] if d.is_dir() => d,
        [d] => return Err(Error::config(format!("dataset directory {} does not exist", d.display()))),
        _ => return Err(Error::config("train takes exactly one --input dataset directory")),
    };
    let ann_path = dir.join("annotations.txt");
    if !ann_path.is_file() {
        return Err(Error::config(format!("{} is missing", ann_path.display())));
    }
    let records = parse_annotations(&std::fs::read_to_string(&ann_path)?)?;
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(dir)?.filter_map(|e| e.ok().map(|e| e.path())).filter(|f| is_image(f)).collect();
    files.sort();
    let mut images = Vec::new();
    for f in files {
        images.push((image_id(&f), load_image(&f)?));
    }
    Ok(Dataset { images, records })
}

fn find_image<'a>(ds: &'a Dataset, id: &str) -> Result<&'a Image> {
    let stem = Path::new(id).file_stem().map_or(id.to_string(), |s| s.to_string_lossy().into_owned());
    ds.images
        .iter()
        .find(|(i, _)| *i == stem)
        .map(|(_, img)| img)
        .ok_or_else(|| Error::input(format!("annotation refers to missing image {id:?}")))
}

/// Crops a box (rounded, clamped to the image) and resizes it to `w × h`.
fn crop_window(img: &Image, b: &BoundingBox, w: usize, h: usize) -> Result<Image> {
    let b = b
        .clamp_to(img.width() as f64, img.height() as f64)
        .ok_or_else(|| Error::input("annotated box lies outside its image"))?;
    let x = b.x.round() as usize;
    let y = b.y.round() as usize;
    let cw = (b.w.round() as usize).clamp(1, img.width() - x.min(img.width() - 1));
    let ch = (b.h.round() as usize).clamp(1, img.height() - y.min(img.height() - 1));
    img.crop(x.min(img.width() - 1), y.min(img.height() - 1), cw, ch)?.resize_nearest(w, h)
}

/// Positive and negative training windows from the annotations.
fn collect_windows(ds: &Dataset, a: &TrainArgs, w: usize, h: usize, seed: u64) -> Result<(Vec<Image>, Vec<Image>)> {
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for r in &ds.records {
        let img = find_image(ds, &r.image_id)?;
        let win = crop_window(img, &r.bbox, w, h)?;
        if r.class == a.positive_class {
            pos.push(win);
        } else {
            neg.push(win);
        }
    }
    if a.mine_negatives > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (id, img) in &ds.images {
            let boxes: Vec<BoundingBox> = ds
                .records
                .iter()
                .filter(|r| image_id(Path::new(&r.image_id)) == *id && r.class == a.positive_class)
                .map(|r| r.bbox)
                .collect();
            if img.width() < w || img.height() < h {
                continue;
            }
            let mut found = 0;
            for _ in 0..a.mine_negatives * 50 {
                if found == a.mine_negatives {
                    break;
                }
                let x = rng.gen_range(0..=img.width() - w);
                let y = rng.gen_range(0..=img.height() - h);
                let cand = BoundingBox::new(x as f64, y as f64, w as f64, h as f64);
                if boxes.iter().all(|b| b.intersection(&cand) == 0.0) {
                    neg.push(img.crop(x, y, w, h)?);
                    found += 1;
                }
            }
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::input(format!(
            "training needs both classes; found {} positive and {} negative samples",
            pos.len(),
            neg.len()
        )));
    }
    Ok((pos, neg))
}

fn train_output(shared: &Shared) -> Result<&Path> {
    shared.output.as_deref().ok_or_else(|| Error::config("train needs --output for the model file"))
}

fn cmd_train(shared: &Shared, a: &TrainArgs) -> Result<()> {
    let out = train_output(shared)?;
    let ds = load_dataset(shared)?;
    match a.detector {
        DetectorKind::Haar => {
            let (w, h) = a.window.as_deref().map_or(Ok((24, 24)), parse_window)?;
            let (pos, neg) = collect_windows(&ds, a, w, h, shared.seed)?;
            let candidates = generate_candidates(w as u32, h as u32, a.feature_stride);
            let cfg = CascadeTrainConfig { rounds_per_stage: vec![a.rounds; a.stages.max(1)], stage_thresholds: None };
            let model = train_cascade(&pos, &neg, &candidates, &cfg)?;
            let mut correct = 0;
            for (win, label) in pos.iter().map(|p| (p, true)).chain(neg.iter().map(|n| (n, false))) {
                if haar_window_positive(&model, win)? == label {
                    correct += 1;
                }
            }
            save_cascade(&model, out)?;
            println!("stages {}", model.stages.len());
            println!("learners {}", model.learner_count());
            println!("training accuracy {:.6}", correct as f64 / (pos.len() + neg.len()) as f64);
        }
        DetectorKind::Hogsvm => {
            let (w, h) = a.window.as_deref().map_or(Ok((64, 128)), parse_window)?;
            let (pos, neg) = collect_windows(&ds, a, w, h, shared.seed)?;
            let config = HogConfig { window_w: w, window_h: h, ..HogConfig::default() };
            config.validate()?;
            let labels: Vec<i8> = std::iter::repeat_n(1, pos.len()).chain(std::iter::repeat_n(-1, neg.len())).collect();
            let windows: Vec<Image> = pos.into_iter().chain(neg).collect();
            let params = SvmParams { lambda: a.lambda, epochs: a.epochs, seed: shared.seed };
            let (model, fit) = train_hog_svm(&windows, &labels, config, &params)?;
            let mut correct = 0;
            for (win, y) in windows.iter().zip(&labels) {
                let d = crate::hog::hog_descriptor(win, &model.config)?;
                let s = svm_score(&model, d.as_slice())?;
                if (s > 0.0) == (*y > 0) {
                    correct += 1;
                }
            }
            save_hog_model(&model, out)?;
            println!("final objective {:.6}", fit.objective.last().copied().unwrap_or(f64::NAN));
            println!("training accuracy {:.6}", correct as f64 / windows.len() as f64);
        }
        DetectorKind::Lcnn => {
            let mut samples: BTreeMap<String, ToySample> = BTreeMap::new();
            for (id, img) in &ds.images {
                samples.insert(id.clone(), ToySample { image: img.clone(), boxes: Vec::new() });
            }
            for r in ds.records.iter().filter(|r| r.class == a.positive_class) {
                let id = image_id(Path::new(&r.image_id));
                let s = samples.get_mut(&id).ok_or_else(|| Error::input(format!("annotation refers to missing image {id:?}")))?;
                s.boxes.push(r.bbox);
            }
            let data: Vec<ToySample> = samples.into_values().collect();
            if data.iter().all(|s| s.boxes.is_empty()) {
                return Err(Error::input(format!("no {:?} boxes in the dataset", a.positive_class)));
            }
            let cfg = LcnnConfig { width_multiplier: a.width_multiplier, input_size: a.input_size };
            let mut model = build_lcnn(&cfg, shared.seed)?;
            let tc = TrainConfig {
                steps: a.steps,
                learning_rate: a.lr,
                validation_fraction: a.validation_fraction,
                seed: shared.seed,
                ..TrainConfig::default()
            };
            let report = train_toy(&mut model, &data, &tc)?;
            save_model(&model, out)?;
            println!("train images {}", report.train_count);
            println!("initial loss {:.6}", report.initial_loss());
            println!("final loss {:.6}", report.final_loss());
            if let Some(v) = report.validation_loss {
                println!("validation loss {v:.6}");
            }
        }
        DetectorKind::Stub => return Err(Error::config("the stub detector cannot be trained")),
    }
    Ok(())
}

fn haar_window_positive(model: &CascadeModel, img: &Image) -> Result<bool> {
    let ii = crate::imagecore::integral(&crate::imagecore::to_grayscale(img))?;
    Ok(model.classify_at(&ii, 0, 0).is_some())
}

fn cmd_bench(shared: &Shared, a: &BenchArgs) -> Result<()> {
    if !(a.duration.is_finite() && a.duration >= 1.0) {
        return Err(Error::config("--duration must be at least one second"));
    }
    let frames: Vec<Image> = if a.detector == DetectorKind::Stub && shared.input.is_empty() {
        vec![Image::filled(8, 8, 1, 0.0)?]
    } else {
        collect_images(&shared.input)?.iter().map(load_image).collect::<Result<_>>()?
    };
    let detector = Loaded::load(a.detector, shared, a.stub_ms, MergeRule::default())?;
    let sampler = ProcessSampler::start(std::process::id(), Duration::from_millis(a.sample_ms.max(1)))?;
    let stats = bench_fps(&frames, Duration::from_secs_f64(a.duration), |f| detector.detect(f).map(|_| ()));
    let series = sampler.finish();
    let stats = stats?;
    let report = EvalReport {
        detector: a.detector.name().to_string(),
        fps_avg: Some(stats.fps_avg),
        fps_peak: Some(stats.fps_peak),
        cpu_avg: series.cpu_avg(),
        mem_peak: series.rss_peak(),
        fpr: None,
        fnr: None,
        frames: stats.frames as u64,
        duration: stats.elapsed,
    };
    write_output(shared, &emit_report(&[report], shared.format.into(), shared.with_reference)?)
}

fn cmd_eval(shared: &Shared, a: &EvalArgs) -> Result<()> {
    if !(a.iou > 0.0 && a.iou < 1.0) {
        return Err(Error::config("--iou must lie in (0, 1)"));
    }
    let det_path = match shared.input.as_slice() {
        [p] => p,
        _ => return Err(Error::config("eval takes exactly one --input detection file")),
    };
    for p in [det_path, &a.ground_truth] {
        if !p.is_file() {
            return Err(Error::config(format!("{} does not exist", p.display())));
        }
    }
    let gt = ground_truth(&parse_annotations(&std::fs::read_to_string(&a.ground_truth)?)?);
    let mut preds: BTreeMap<String, Vec<Detection>> = BTreeMap::new();
    for r in parse_annotations(&std::fs::read_to_string(det_path)?)? {
        preds.entry(r.image_id.clone()).or_default().push(r.into_detection());
    }
    let counts = evaluate_dataset(&preds, &gt, a.iou);
    let r = rates(&counts);
    let images: std::collections::BTreeSet<&String> = preds.keys().chain(gt.keys()).collect();
    let report = EvalReport { fpr: r.fpr, fnr: r.fnr, frames: images.len() as u64, ..EvalReport::new(a.detector.clone()) };
    write_output(shared, &emit_report(&[report], shared.format.into(), shared.with_reference)?)
}

fn cmd_analyze(shared: &Shared, a: &AnalyzeArgs) -> Result<()> {
    let arch = match &shared.model {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            Architecture::from_json(&text)?
        }
        None => lcnn_architecture(&LcnnConfig { width_multiplier: a.width_multiplier, input_size: a.input_size })?,
    };
    let cost = analyze(&arch)?;
    let text = match ReportFormat::from(shared.format) {
        ReportFormat::Json => serde_json::to_string_pretty(&cost).expect("cost serializes") + "\n",
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| Error::format(format!("csv: {e}"));
            w.write_record([
                "index", "op", "kernel", "in", "out", "side", "macs", "conv_equiv_macs", "reduction", "params",
            ])
            .map_err(csv_err)?;
            for r in &cost.rows {
                w.write_record([
                    r.index.to_string(),
                    r.op.clone(),
                    r.kernel.to_string(),
                    r.in_channels.to_string(),
                    r.out_channels.to_string(),
                    r.feature_side.to_string(),
                    r.macs.to_string(),
                    r.conventional_equivalent.to_string(),
                    r.reduction.to_string(),
                    r.parameters.to_string(),
                ])
                .map_err(csv_err)?;
            }
            let t = &cost.totals;
            w.write_record([
                "total".to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                t.macs.to_string(),
                t.conventional_equivalent.to_string(),
                t.reduction.to_string(),
                t.parameters.to_string(),
            ])
            .map_err(csv_err)?;
            String::from_utf8(w.into_inner().map_err(|e| Error::format(format!("csv: {e}")))?).expect("utf-8")
        }
        ReportFormat::Table => {
            let mut s = format!(
                "{:>5}  {:<10} {:>2} {:>5} {:>5} {:>4} {:>14} {:>16} {:>9} {:>10}\n",
                "layer", "op", "k", "in", "out", "side", "macs", "conv_equiv_macs", "reduction", "params"
            );
            for r in &cost.rows {
                let _ = writeln!(
                    s,
                    "{:>5}  {:<10} {:>2} {:>5} {:>5} {:>4} {:>14} {:>16} {:>9.6} {:>10}",
                    r.index,
                    r.op,
                    r.kernel,
                    r.in_channels,
                    r.out_channels,
                    r.feature_side,
                    r.macs,
                    r.conventional_equivalent,
                    r.reduction,
                    r.parameters
                );
            }
            let t = &cost.totals;
            let _ = writeln!(
                s,
                "{:>5}  {:<10} {:>2} {:>5} {:>5} {:>4} {:>14} {:>16} {:>9.6} {:>10}",
                "total", "", "", "", "", "", t.macs, t.conventional_equivalent, t.reduction, t.parameters
            );
            s
        }
    };
    write_output(shared, &text)
}

fn cmd_stub(a: &StubArgs) -> Result<()> {
    std::thread::sleep(Duration::from_millis(a.delay_ms));
    let mut block: Vec<u8> = Vec::new();
    if a.alloc_mb > 0 {
        block = vec![0u8; a.alloc_mb * 1024 * 1024];
        for i in (0..block.len()).step_by(4096) {
            block[i] = (i / 4096) as u8 | 1;
        }
    }
    std::thread::sleep(Duration::from_millis(a.hold_ms));
    std::hint::black_box(&block);
    Ok(())
}
