//! `lpr`: command-line front end for the plate recognition engine.

mod overlay;

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use image::RgbImage;
use rayon::prelude::*;

use lpr_core::bench::run_bench;
use lpr_core::augmentation::{
    jitter, negative_image, permute_corpus, rescale_margin, AnnotatedPlate, JitterParams, RescaleParams,
};
use lpr_core::decode::{anchors_to_grid, compute_anchors};
use lpr_core::evaluation::{
    evaluate_end_to_end, load_annotations, load_manifest, write_annotations, EvalOptions, RunSpec,
};
use lpr_core::imageio::{is_supported_image, load_image, save_image};
use lpr_core::layout::{builtin_rulesets, Layout, RuleBook};
use lpr_core::model_io::{compute_bflops, load_weights, parse_config, serialize_config, write_weights, Architecture, LayerSpec, NetworkModel};
use lpr_core::pipeline::{run_pipeline, Models, PipelineConfig};
use lpr_core::records::{write_jsonl, ImageRecord, TimingRecord};
use lpr_core::synthetic;
use lpr_core::Error;

const EXIT_PARSE: u8 = 3;
const EXIT_MODEL: u8 = 4;
const EXIT_IO: u8 = 5;
const EXIT_VALIDATION: u8 = 6;

#[derive(Parser)]
#[command(name = "lpr", version, about = "Layout-independent license plate recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the layer table and BFLOPs of a network configuration.
    Inspect(InspectArgs),
    /// Recognize plates in images or directories of images.
    Run(RunArgs),
    /// Score results against annotations.
    Eval(EvalArgs),
    /// Time each stage and the vehicles-count sweep.
    Bench(BenchArgs),
    /// Generate an augmented plate corpus.
    Augment(AugmentArgs),
    /// Estimate region anchors from annotated boxes.
    Anchors(AnchorArgs),
    /// Write the synthetic models, scene and annotations.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct InspectArgs {
    /// Darknet `.cfg` file, or one of `vehicle`, `plate`, `chars` for the shipped configs.
    config: String,
    /// Also check that this weights file fits the configuration.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct PipelineArgs {
    /// Directory holding `<name>.cfg` and `<name>.weights` for the three networks.
    #[arg(long, env = "LPR_MODEL_DIR")]
    models: PathBuf,
    #[arg(long, default_value_t = lpr_core::pipeline::DEFAULT_VEHICLE_THRESHOLD)]
    vehicle_thresh: f32,
    #[arg(long, default_value_t = lpr_core::pipeline::DEFAULT_LAYOUT_THRESHOLD)]
    layout_thresh: f32,
    /// Lowest plate score kept (as an undefined layout).
    #[arg(long, default_value_t = lpr_core::pipeline::DEFAULT_PLATE_FLOOR)]
    plate_floor: f32,
    /// Character threshold for every layout but European [default: from the rules]
    #[arg(long)]
    char_thresh: Option<f32>,
    /// Character threshold for European plates [default: from the rules]
    #[arg(long)]
    char_thresh_eu: Option<f32>,
    #[arg(long, default_value_t = lpr_core::pipeline::DEFAULT_NMS_IOU)]
    nms_iou: f32,
    /// Layout rules file replacing the built-in rules.
    #[arg(long)]
    rules: Option<PathBuf>,
}

impl PipelineArgs {
    fn load(&self) -> Result<(Models, RuleBook, PipelineConfig), Error> {
        let config = PipelineConfig {
            vehicle_threshold: self.vehicle_thresh,
            layout_threshold: self.layout_thresh,
            plate_floor: self.plate_floor,
            nms_iou: self.nms_iou,
            char_threshold: self.char_thresh,
            char_threshold_european: self.char_thresh_eu,
        };
        config.validate()?;
        let mut book = match &self.rules {
            Some(p) => RuleBook::load(p)?,
            None => builtin_rulesets(),
        };
        config.apply_thresholds(&mut book);
        let models = Models::load_dir(&self.models)?;
        let classes = models.plate.region().map_or(0, |r| r.classes);
        if classes != book.classes.len() {
            return Err(Error::Rules(format!(
                "plate model has {classes} classes, the rules describe {}",
                book.classes.len()
            )));
        }
        Ok((models, book, config))
    }
}

#[derive(Args)]
struct RunArgs {
    /// Image files or directories.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Results file (one JSON record per line) [default: stdout]
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Per-image stage timings, one JSON record per line.
    #[arg(long)]
    timings: Option<PathBuf>,
    /// Directory for annotated copies of the inputs.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Images processed concurrently.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct EvalArgs {
    /// TOML manifest of `[[run]]` entries (dataset, results, annotations, merge_1_i).
    #[arg(long, conflicts_with_all = ["results", "annotations"])]
    manifest: Option<PathBuf>,
    #[arg(long, requires = "annotations")]
    results: Option<PathBuf>,
    #[arg(long, requires = "results")]
    annotations: Option<PathBuf>,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    /// Read `1` and `I` as the same symbol.
    #[arg(long)]
    merge_1_i: bool,
    /// Weight the cross-dataset average by plate count.
    #[arg(long)]
    weighted: bool,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    image: PathBuf,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Vehicle counts for the sweep.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5])]
    sweep: Vec<usize>,
    /// Timed repetitions.
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Untimed warm-up repetitions.
    #[arg(long, default_value_t = 3)]
    warmup: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum AugmentMode {
    Permute,
    Negative,
    Jitter,
    Rescale,
}

#[derive(Args)]
struct AugmentArgs {
    /// Annotation file; image paths are relative to its directory.
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_enum)]
    mode: AugmentMode,
    /// Variants per plate.
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for patches and `manifest.txt`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AnchorStage {
    /// Vehicle boxes relative to the image.
    Vehicle,
    /// Plate boxes relative to their vehicle.
    Plate,
    /// Character boxes relative to their plate.
    Chars,
}

#[derive(Args)]
struct AnchorArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long, value_enum)]
    stage: AnchorStage,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Region grid as `WxH`, e.g. `14x9`.
    #[arg(long, value_parser = parse_grid)]
    grid: (usize, usize),
}

#[derive(Args)]
struct FixtureArgs {
    /// Output directory.
    out: PathBuf,
    /// Plate texts, one vehicle each (seven characters).
    #[arg(long = "text", default_values_t = ["ABC1234".to_string()])]
    texts: Vec<String>,
    #[arg(long, default_value = "brazilian")]
    layout: String,
}

fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w = w.parse().map_err(|_| "bad grid width")?;
    let h = h.parse().map_err(|_| "bad grid height")?;
    if w == 0 || h == 0 {
        return Err("grid extents must be positive".into());
    }
    Ok((w, h))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Annotation { .. } | Error::Rules(_) | Error::Json(_) => EXIT_PARSE,
        Error::Weights(_) | Error::Shape(_) => EXIT_MODEL,
        Error::Io { .. } | Error::Image(_) => EXIT_IO,
        Error::Invalid(_) | Error::MissingKeys(_) => EXIT_VALIDATION,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Inspect(a) => inspect(a),
        Command::Run(a) => run(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Augment(a) => augment(a),
        Command::Anchors(a) => anchors(a),
        Command::Fixture(a) => fixture(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lpr: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

fn load_config(arg: &str) -> Result<NetworkModel, Error> {
    match arg {
        "vehicle" => Ok(Architecture::VehicleYolov2.model()),
        "plate" => Ok(Architecture::PlateFastYolov2.model()),
        "chars" => Ok(Architecture::CrNet.model()),
        path => {
            let text = fs::read_to_string(path).map_err(io_err(Path::new(path)))?;
            parse_config(&text)
        }
    }
}

fn inspect(args: InspectArgs) -> Result<(), Error> {
    let mut model = load_config(&args.config)?;
    if let Some(w) = &args.weights {
        let bytes = fs::read(w).map_err(io_err(w))?;
        model = load_weights(model, &bytes)?;
    }
    let flops = compute_bflops(&model);
    let out = io::stdout();
    let mut out = out.lock();
    let _ = writeln!(out, "{:>5}  {:<6} {:>7}  {:<10} {:>16}  {:>16}  {:>7}", "layer", "type", "filters", "size", "input", "output", "BFLOP");
    for (i, layer) in model.layers().iter().enumerate() {
        let (filters, size) = match layer {
            LayerSpec::Conv(c) => (c.filters.to_string(), format!("{}x{}/{}", c.size, c.size, c.stride)),
            LayerSpec::MaxPool(p) => (String::new(), format!("{}x{}/{}", p.size, p.size, p.stride)),
            LayerSpec::Route(src) => (String::new(), src.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")),
            LayerSpec::Reorg(s) => (String::new(), format!("/{s}")),
            LayerSpec::Region(r) => (String::new(), format!("{} anchors", r.num_anchors())),
        };
        let _ = writeln!(
            out,
            "{:>5}  {:<6} {:>7}  {:<10} {:>16}  {:>16}  {:>7.3}",
            i,
            layer.kind_name(),
            filters,
            size,
            model.input_shapes()[i].to_string(),
            model.shape_trace()[i].to_string(),
            flops.per_layer[i]
        );
    }
    let _ = writeln!(out, "total {:.2} BFLOPs", flops.total);
    if model.has_weights() {
        let _ = writeln!(out, "weights ok");
    }
    Ok(())
}

fn collect_images(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Error> {
    let mut out = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .map_err(io_err(input))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && is_supported_image(p))
                .collect();
            found.sort();
            out.extend(found);
        } else if input.is_file() {
            out.push(input.clone());
        } else {
            return Err(Error::io(input, io::Error::new(io::ErrorKind::NotFound, "no such file or directory")));
        }
    }
    if out.is_empty() {
        return Err(Error::Invalid("no images found".into()));
    }
    Ok(out)
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(io_err(p))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn run(args: RunArgs) -> Result<(), Error> {
    let (models, book, config) = args.pipeline.load()?;
    let images = collect_images(&args.inputs)?;
    if let Some(dir) = &args.overlay {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.max(1))
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let process = |path: &PathBuf| -> Result<(ImageRecord, Option<TimingRecord>), Error> {
        let key = path.to_string_lossy().into_owned();
        let image = match load_image(path) {
            Ok(i) => i,
            Err(e) => return Ok((ImageRecord::failed(&key, &e), None)),
        };
        let output = run_pipeline(&image, &models, &book, &config)?;
        let record = ImageRecord::from_output(&key, image.width(), image.height(), &output);
        if let Some(dir) = &args.overlay {
            let stem = path.file_stem().map_or("image".into(), |s| s.to_string_lossy().into_owned());
            let drawn = overlay::draw(&image, &record);
            save_image(&drawn, &dir.join(format!("{stem}.png")))?;
        }
        Ok((record, Some(TimingRecord::new(&key, &output.timings))))
    };
    let results: Vec<_> = pool.install(|| images.par_iter().map(process).collect::<Result<Vec<_>, _>>())?;
    let (records, timings): (Vec<ImageRecord>, Vec<Option<TimingRecord>>) = results.into_iter().unzip();
    let mut out = writer(args.output.as_deref())?;
    write_jsonl(&records, &mut out)?;
    out.flush().map_err(|e| Error::io("<output>", e))?;
    if let Some(path) = &args.timings {
        let timings: Vec<TimingRecord> = timings.into_iter().flatten().collect();
        let mut t = writer(Some(path))?;
        write_jsonl(&timings, &mut t)?;
        t.flush().map_err(io_err(path))?;
    }
    if args.output.is_some() {
        let read = records.iter().filter(|r| r.status == lpr_core::records::Status::Ok).count();
        eprintln!("{} images, {read} with a plate read", records.len());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Error> {
    let specs = match (&args.manifest, &args.results, &args.annotations) {
        (Some(m), _, _) => load_manifest(m)?,
        (None, Some(r), Some(a)) => vec![RunSpec {
            dataset: args.dataset.clone(),
            results: r.clone(),
            annotations: a.clone(),
            merge_1_i: args.merge_1_i,
        }],
        _ => return Err(Error::Invalid("give --manifest or both --results and --annotations".into())),
    };
    let options = EvalOptions {
        weighted_average: args.weighted,
        ..Default::default()
    };
    let report = evaluate_end_to_end(&specs, &options)?;
    print!("{}", report.to_text());
    if let Some(path) = &args.json {
        let text = serde_json::to_string_pretty(&report)?;
        fs::write(path, text + "\n").map_err(io_err(path))?;
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), Error> {
    let (models, book, config) = args.pipeline.load()?;
    let image = load_image(&args.image)?;
    let report = run_bench(&image, &models, &book, &config, &args.sweep, args.reps, args.warmup)?;
    print!("{}", report.to_text());
    Ok(())
}

fn augment(args: AugmentArgs) -> Result<(), Error> {
    let records = load_annotations(&args.annotations)?;
    let base = args.annotations.parent().unwrap_or(Path::new("")).to_path_buf();
    let book = match &args.rules {
        Some(p) => RuleBook::load(p)?,
        None => builtin_rulesets(),
    };
    let mut corpus = Vec::new();
    for rec in &records {
        let image: RgbImage = load_image(&base.join(&rec.image))?;
        for plate in rec.plates() {
            corpus.push(AnnotatedPlate::from_scene(&image, plate)?);
        }
    }
    if corpus.is_empty() {
        return Err(Error::Invalid("no annotated plates".into()));
    }
    let seed_of = |i: usize, copy: usize| args.seed ^ ((i as u64) << 20) ^ copy as u64;
    let generated: Vec<AnnotatedPlate> = match args.mode {
        AugmentMode::Permute => permute_corpus(&corpus, &book, args.count, args.seed)?,
        AugmentMode::Negative => corpus.iter().map(negative_image).collect(),
        AugmentMode::Jitter => (0..args.count)
            .flat_map(|c| corpus.iter().enumerate().map(move |(i, p)| (c, i, p)))
            .map(|(c, i, p)| jitter(p, &JitterParams::default(), seed_of(i, c)))
            .collect(),
        AugmentMode::Rescale => (0..args.count)
            .flat_map(|c| corpus.iter().enumerate().map(move |(i, p)| (c, i, p)))
            .map(|(c, i, p)| rescale_margin(p, &RescaleParams::default(), seed_of(i, c)))
            .collect(),
    };
    fs::create_dir_all(&args.out).map_err(io_err(&args.out))?;
    let mut manifest = Vec::with_capacity(generated.len());
    for (i, plate) in generated.iter().enumerate() {
        let name = format!("plate_{i:06}.png");
        save_image(&plate.raster, &args.out.join(&name))?;
        manifest.push(plate.to_record(&name));
    }
    let path = args.out.join("manifest.txt");
    fs::write(&path, write_annotations(&manifest)).map_err(io_err(&path))?;
    eprintln!("{} plates written to {}", generated.len(), args.out.display());
    Ok(())
}

fn anchors(args: AnchorArgs) -> Result<(), Error> {
    let records = load_annotations(&args.annotations)?;
    let base = args.annotations.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut boxes = Vec::new();
    for rec in &records {
        match args.stage {
            AnchorStage::Vehicle => {
                let image = load_image(&base.join(&rec.image))?;
                let (w, h) = (image.width() as f32, image.height() as f32);
                boxes.extend(rec.vehicles.iter().map(|v| (v.rect.w / w, v.rect.h / h)));
            }
            AnchorStage::Plate => {
                for v in &rec.vehicles {
                    if let Some(p) = &v.plate {
                        boxes.push((p.rect.w / v.rect.w, p.rect.h / v.rect.h));
                    }
                }
            }
            AnchorStage::Chars => {
                for p in rec.plates() {
                    boxes.extend(p.chars.iter().map(|c| (c.rect.w / p.rect.w, c.rect.h / p.rect.h)));
                }
            }
        }
    }
    let anchors = anchors_to_grid(&compute_anchors(&boxes, args.k)?, args.grid.0, args.grid.1);
    let list: Vec<String> = anchors.iter().map(|(w, h)| format!("{w:.4},{h:.4}")).collect();
    println!("anchors={}", list.join(", "));
    Ok(())
}

fn fixture(args: FixtureArgs) -> Result<(), Error> {
    let book = builtin_rulesets();
    let layout: Layout = args.layout.parse()?;
    let texts: Vec<&str> = args.texts.iter().map(String::as_str).collect();
    let fx = synthetic::fixture(&texts, &layout, &book)?;
    let models_dir = args.out.join("models");
    fs::create_dir_all(&models_dir).map_err(io_err(&models_dir))?;
    for (arch, model) in [
        (Architecture::VehicleYolov2, &fx.models.vehicle),
        (Architecture::PlateFastYolov2, &fx.models.plate),
        (Architecture::CrNet, &fx.models.characters),
    ] {
        let cfg = models_dir.join(format!("{}.cfg", arch.file_stem()));
        fs::write(&cfg, serialize_config(model)).map_err(io_err(&cfg))?;
        let weights = models_dir.join(format!("{}.weights", arch.file_stem()));
        fs::write(&weights, write_weights(model)?).map_err(io_err(&weights))?;
    }
    save_image(&fx.image, &args.out.join("scene.png"))?;
    let annotations = synthetic::annotations("scene.png", &texts, &layout)?;
    let path = args.out.join("annotations.txt");
    fs::write(&path, write_annotations(&[annotations])).map_err(io_err(&path))?;
    println!("{}", args.out.display());
    Ok(())
}
